//! Chunked sparse block grid and its binary snapshot format.

mod chunk;
mod geometry;
pub mod snapshot;
mod sparse;

pub(crate) use chunk::node_of;
pub use chunk::{chunk_volume, ChunkKey, ChunkMask, CHUNK_EDGE};
pub use geometry::{GridGeometry, NodeIndex};
pub use sparse::{channels, ChunkView, OccupancyStats, PropertyId, SparseBlockGrid};
