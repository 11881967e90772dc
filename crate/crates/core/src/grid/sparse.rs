use std::collections::HashMap;

use rayon::prelude::*;

use super::chunk::{chunk_volume, locate, node_of, ChunkKey, ChunkMask, CHUNK_EDGE};
use super::geometry::{GridGeometry, NodeIndex};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Conventional channel names used by the geometry builder and the solver.
pub mod channels {
    pub const PHI: &str = "phi";
    pub const U: &str = "u";
    pub const U_NEXT: &str = "u_next";
    pub const DIFFUSION: &str = "D";
    pub const REACTION: &str = "reaction";

    pub const STANDARD: [&str; 5] = [PHI, U, U_NEXT, DIFFUSION, REACTION];
}

/// Handle to a registered property channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PropertyId(pub(crate) usize);

impl PropertyId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Chunked sparse Cartesian grid.
///
/// Nodes live in 8-per-axis chunks; a chunk is stored once any of its nodes
/// is inserted. Every channel has one slot per chunk node, laid out as
/// `channel[chunk * chunk_volume + offset]`, so all channels share the same
/// occupancy. Chunk order is insertion order and stays fixed, which makes
/// chunk-ordered reductions reproducible.
#[derive(Debug, Clone)]
pub struct SparseBlockGrid<T> {
    geometry: GridGeometry<T>,
    names: Vec<String>,
    keys: Vec<ChunkKey>,
    lookup: HashMap<ChunkKey, usize>,
    masks: Vec<ChunkMask>,
    channels: Vec<Vec<T>>,
    active: usize,
    revision: u64,
}

/// Counts describing how much of the dense box a grid occupies.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct OccupancyStats {
    pub chunk_count: usize,
    pub active_node_count: usize,
    pub dense_node_count: usize,
    /// `active_node_count / dense_node_count`.
    pub fill_fraction: f64,
    /// Chunks a fully populated box would need.
    pub dense_chunk_count: usize,
    /// `chunk_count / dense_chunk_count`.
    pub chunk_fill_fraction: f64,
}

/// Borrowed view of one stored chunk.
#[derive(Clone, Copy)]
pub struct ChunkView<'a, T> {
    grid: &'a SparseBlockGrid<T>,
    slot: usize,
}

impl<'a, T: Real> ChunkView<'a, T> {
    /// Position of the chunk in the grid's storage order.
    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn key(&self) -> ChunkKey {
        self.grid.keys[self.slot]
    }

    pub fn mask(&self) -> &'a ChunkMask {
        &self.grid.masks[self.slot]
    }

    /// All slots of the channel for this chunk, including unset ones.
    pub fn channel(&self, prop: PropertyId) -> &'a [T] {
        let v = self.grid.chunk_volume();
        &self.grid.channels[prop.0][self.slot * v..(self.slot + 1) * v]
    }

    /// Active nodes of the chunk as `(global index, in-chunk offset)`.
    pub fn active_nodes(&self) -> impl Iterator<Item = (NodeIndex, usize)> + 'a {
        let dims = self.grid.geometry.dims();
        let key = self.key();
        self.mask()
            .iter()
            .map(move |o| (NodeIndex(node_of(dims, key, o)), o))
    }
}

impl<T: Real> SparseBlockGrid<T> {
    /// Empty grid with the given property channels. Channel names must be unique.
    pub fn new<S: AsRef<str>>(geometry: GridGeometry<T>, names: &[S]) -> Result<Self> {
        let names: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::input(format!("duplicate channel name `{n}`")));
            }
        }
        let channels = vec![Vec::new(); names.len()];
        Ok(SparseBlockGrid {
            geometry,
            names,
            keys: Vec::new(),
            lookup: HashMap::new(),
            masks: Vec::new(),
            channels,
            active: 0,
            revision: 0,
        })
    }

    /// Empty grid with the channels in [`channels::STANDARD`].
    pub fn with_standard_channels(geometry: GridGeometry<T>) -> Self {
        Self::new(geometry, &channels::STANDARD).expect("standard names are unique")
    }

    pub fn geometry(&self) -> &GridGeometry<T> {
        &self.geometry
    }

    pub fn property_names(&self) -> &[String] {
        &self.names
    }

    pub fn property(&self, name: &str) -> Result<PropertyId> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(PropertyId)
            .ok_or_else(|| Error::UnknownProperty(name.to_string()))
    }

    #[inline]
    pub fn chunk_volume(&self) -> usize {
        chunk_volume(self.geometry.dims())
    }

    pub fn chunk_count(&self) -> usize {
        self.keys.len()
    }

    pub fn active_node_count(&self) -> usize {
        self.active
    }

    /// Bumped whenever the set of active nodes changes.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn chunk_keys(&self) -> &[ChunkKey] {
        &self.keys
    }

    pub fn chunk_slot(&self, key: ChunkKey) -> Option<usize> {
        self.lookup.get(&key).copied()
    }

    /// Marks `index` active and writes one value per channel, in registration order.
    pub fn insert_node(&mut self, index: impl Into<NodeIndex>, values: &[T]) -> Result<()> {
        if values.len() != self.names.len() {
            return Err(Error::input(format!(
                "expected {} channel values, got {}",
                self.names.len(),
                values.len()
            )));
        }
        let (slot, off) = self.activate(index.into())?;
        let v = self.chunk_volume();
        for (ch, &val) in self.channels.iter_mut().zip(values) {
            ch[slot * v + off] = val;
        }
        Ok(())
    }

    /// Marks `index` active, leaving channel values as they were (zero for new chunks).
    pub fn insert_default(&mut self, index: impl Into<NodeIndex>) -> Result<()> {
        self.activate(index.into()).map(|_| ())
    }

    fn activate(&mut self, idx: NodeIndex) -> Result<(usize, usize)> {
        self.geometry.check(idx)?;
        let (key, off) = locate(self.geometry.dims(), idx.0);
        let slot = match self.lookup.get(&key) {
            Some(&s) => s,
            None => {
                let s = self.keys.len();
                let v = self.chunk_volume();
                self.keys.push(key);
                self.masks.push(ChunkMask::default());
                for ch in &mut self.channels {
                    ch.resize(ch.len() + v, T::zero());
                }
                self.lookup.insert(key, s);
                s
            }
        };
        if !self.masks[slot].get(off) {
            self.masks[slot].set(off);
            self.active += 1;
            self.revision += 1;
        }
        Ok((slot, off))
    }

    /// Storage location of an active node.
    pub fn locate_active(&self, index: NodeIndex) -> Option<(usize, usize)> {
        if !self.geometry.contains(index) {
            return None;
        }
        let (key, off) = locate(self.geometry.dims(), index.0);
        let slot = *self.lookup.get(&key)?;
        self.masks[slot].get(off).then_some((slot, off))
    }

    pub fn is_active(&self, index: impl Into<NodeIndex>) -> bool {
        self.locate_active(index.into()).is_some()
    }

    /// Value of `property` at `index`, or `None` if the node is inactive.
    pub fn get(&self, index: impl Into<NodeIndex>, property: &str) -> Result<Option<T>> {
        let idx = index.into();
        self.geometry.check(idx)?;
        let p = self.property(property)?;
        Ok(self.value(idx, p))
    }

    #[inline]
    pub fn value(&self, index: NodeIndex, prop: PropertyId) -> Option<T> {
        let (slot, off) = self.locate_active(index)?;
        Some(self.channels[prop.0][slot * self.chunk_volume() + off])
    }

    /// Overwrites one channel value of an already active node.
    pub fn set(&mut self, index: impl Into<NodeIndex>, prop: PropertyId, value: T) -> Result<()> {
        let idx = index.into();
        self.geometry.check(idx)?;
        let (slot, off) = self
            .locate_active(idx)
            .ok_or_else(|| Error::input(format!("node {:?} is not active", idx.0)))?;
        let v = self.chunk_volume();
        self.channels[prop.0][slot * v + off] = value;
        Ok(())
    }

    /// Raw channel storage (`chunk_count * chunk_volume` slots).
    pub fn channel(&self, prop: PropertyId) -> &[T] {
        &self.channels[prop.0]
    }

    pub fn channel_mut(&mut self, prop: PropertyId) -> &mut [T] {
        &mut self.channels[prop.0]
    }

    /// Exchanges the storage of two channels (buffer swap).
    pub fn swap_channels(&mut self, a: PropertyId, b: PropertyId) {
        self.channels.swap(a.0, b.0);
    }

    /// Read access to several channels plus write access to one.
    pub(crate) fn split_channels(&mut self, write: PropertyId) -> (&mut [T], Vec<Option<&[T]>>) {
        let mut out = None;
        let mut reads = Vec::with_capacity(self.channels.len());
        for (i, ch) in self.channels.iter_mut().enumerate() {
            if i == write.0 {
                out = Some(ch.as_mut_slice());
                reads.push(None);
            } else {
                reads.push(Some(&ch[..]));
            }
        }
        (out.expect("write channel exists"), reads)
    }

    pub fn masks(&self) -> &[ChunkMask] {
        &self.masks
    }

    pub fn chunk(&self, slot: usize) -> ChunkView<'_, T> {
        assert!(slot < self.keys.len());
        ChunkView { grid: self, slot }
    }

    pub fn chunks(&self) -> impl Iterator<Item = ChunkView<'_, T>> {
        (0..self.keys.len()).map(move |slot| ChunkView { grid: self, slot })
    }

    /// Calls `visitor` once per stored chunk.
    pub fn for_each_active_chunk(&self, visitor: impl FnMut(ChunkView<'_, T>)) {
        self.chunks().for_each(visitor);
    }

    /// Parallel variant of [`Self::for_each_active_chunk`]; visitation order is unspecified.
    pub fn par_for_each_active_chunk(&self, visitor: impl Fn(ChunkView<'_, T>) + Sync + Send) {
        (0..self.keys.len())
            .into_par_iter()
            .for_each(|slot| visitor(ChunkView { grid: self, slot }));
    }

    /// Visits every active node in chunk storage order.
    pub fn for_each_active_node(&self, mut f: impl FnMut(NodeIndex, usize)) {
        let v = self.chunk_volume();
        for c in self.chunks() {
            for (idx, off) in c.active_nodes() {
                f(idx, c.slot * v + off);
            }
        }
    }

    /// Writes `f(index, position)` into `prop` at every active node.
    pub fn fill_with(&mut self, prop: PropertyId, f: impl Fn(NodeIndex, [T; 3]) -> T) {
        let v = self.chunk_volume();
        let dims = self.geometry.dims();
        for slot in 0..self.keys.len() {
            let key = self.keys[slot];
            for off in self.masks[slot].iter() {
                let idx = NodeIndex(node_of(dims, key, off));
                let pos = self.geometry.position(idx);
                self.channels[prop.0][slot * v + off] = f(idx, pos);
            }
        }
    }

    pub fn occupancy_stats(&self) -> OccupancyStats {
        let dense_nodes = self.geometry.node_count();
        let size = self.geometry.size();
        let dense_chunks: usize = (0..self.geometry.dims())
            .map(|a| size[a].div_ceil(CHUNK_EDGE))
            .product();
        OccupancyStats {
            chunk_count: self.keys.len(),
            active_node_count: self.active,
            dense_node_count: dense_nodes,
            fill_fraction: self.active as f64 / dense_nodes as f64,
            dense_chunk_count: dense_chunks,
            chunk_fill_fraction: self.keys.len() as f64 / dense_chunks as f64,
        }
    }

    pub(crate) fn raw_parts(&self) -> (&[ChunkKey], &[ChunkMask], &[Vec<T>]) {
        (&self.keys, &self.masks, &self.channels)
    }

    pub(crate) fn from_raw_parts(
        geometry: GridGeometry<T>,
        names: Vec<String>,
        keys: Vec<ChunkKey>,
        masks: Vec<ChunkMask>,
        channels: Vec<Vec<T>>,
    ) -> Result<Self> {
        let v = chunk_volume(geometry.dims());
        if masks.len() != keys.len() || channels.iter().any(|c| c.len() != keys.len() * v) {
            return Err(Error::format("grid snapshot", "inconsistent chunk payload"));
        }
        let mut lookup = HashMap::with_capacity(keys.len());
        for (s, k) in keys.iter().enumerate() {
            if lookup.insert(*k, s).is_some() {
                return Err(Error::format(
                    "grid snapshot",
                    format!("duplicate chunk {k:?}"),
                ));
            }
        }
        if masks.iter().any(ChunkMask::is_empty) {
            return Err(Error::format(
                "grid snapshot",
                "stored chunk with empty mask",
            ));
        }
        let active = masks.iter().map(ChunkMask::count).sum();
        Ok(SparseBlockGrid {
            geometry,
            names,
            keys,
            lookup,
            masks,
            channels,
            active,
            revision: 0,
        })
    }
}
