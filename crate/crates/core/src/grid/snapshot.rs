//! Little-endian binary snapshots.
//!
//! Sparse grid (`SBGR`, version 1):
//!
//! ```text
//! magic      4 bytes  "SBGR"
//! version    u32      1
//! scalar     u8       4 (f32) or 8 (f64)
//! dims       u8       2 or 3
//! size       dims x u64
//! spacing    dims x scalar
//! origin     dims x scalar
//! nprops     u32
//! per prop   u32 byte length, UTF-8 name
//! nchunks    u64
//! per chunk  dims x u32 key, 8^dims/8 mask bytes, nprops x 8^dims scalars
//! ```
//!
//! Dense field (`DFLD`, version 1): magic, version, scalar, dims, size,
//! spacing, origin as above, then `prod(size)` scalars in row-major order.

use std::io::{Read, Write};

use super::chunk::{chunk_volume, ChunkKey, ChunkMask};
use super::geometry::GridGeometry;
use super::sparse::SparseBlockGrid;
use crate::error::{Error, Result};
use crate::scalar::{Precision, Real};

pub const GRID_MAGIC: &[u8; 4] = b"SBGR";
pub const FIELD_MAGIC: &[u8; 4] = b"DFLD";
pub const VERSION: u32 = 1;

pub(crate) struct ByteWriter {
    pub buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        ByteWriter { buf: Vec::new() }
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn scalar<T: Real>(&mut self, v: T) {
        v.write_le(&mut self.buf);
    }

    pub fn header<T: Real>(&mut self, magic: &[u8; 4], geo: &GridGeometry<T>) {
        let d = geo.dims();
        self.bytes(magic);
        self.u32(VERSION);
        self.u8(T::BYTES as u8);
        self.u8(d as u8);
        for a in 0..d {
            self.u64(geo.size()[a] as u64);
        }
        for a in 0..d {
            self.scalar(geo.spacing()[a]);
        }
        for a in 0..d {
            self.scalar(geo.origin()[a]);
        }
    }
}

pub(crate) struct ByteReader<'a> {
    data: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> ByteReader<'a> {
    pub fn new(data: &'a [u8], what: &'static str) -> Self {
        ByteReader { data, pos: 0, what }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(Error::format(self.what, "unexpected end of data"));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn scalar<T: Real>(&mut self) -> Result<T> {
        Ok(T::read_le(self.take(T::BYTES)?))
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(Error::format(self.what, "trailing bytes"));
        }
        Ok(())
    }

    pub fn header<T: Real>(&mut self, magic: &[u8; 4]) -> Result<GridGeometry<T>> {
        if self.take(4)? != magic {
            return Err(Error::format(self.what, "bad magic"));
        }
        let version = self.u32()?;
        if version != VERSION {
            return Err(Error::format(
                self.what,
                format!("unsupported version {version}"),
            ));
        }
        let scalar = self.u8()? as usize;
        if scalar != T::BYTES {
            return Err(Error::format(
                self.what,
                format!(
                    "stored with {scalar}-byte scalars, reader expects {}",
                    T::NAME
                ),
            ));
        }
        let dims = self.u8()? as usize;
        if !(dims == 2 || dims == 3) {
            return Err(Error::format(self.what, format!("dims = {dims}")));
        }
        let mut size = Vec::with_capacity(dims);
        for _ in 0..dims {
            size.push(usize::try_from(self.u64()?).map_err(|_| Error::format(self.what, "size"))?);
        }
        let mut spacing = Vec::with_capacity(dims);
        for _ in 0..dims {
            spacing.push(self.scalar::<T>()?);
        }
        let mut origin = Vec::with_capacity(dims);
        for _ in 0..dims {
            origin.push(self.scalar::<T>()?);
        }
        GridGeometry::new(&size, &spacing, &origin)
            .map_err(|e| Error::format(self.what, e.to_string()))
    }
}

/// Scalar width recorded in a snapshot header (either format).
pub fn peek_precision(data: &[u8]) -> Result<Precision> {
    if data.len() < 9 || !(&data[..4] == GRID_MAGIC || &data[..4] == FIELD_MAGIC) {
        return Err(Error::format("snapshot", "bad magic"));
    }
    Precision::from_bytes(data[8] as usize)
        .ok_or_else(|| Error::format("snapshot", format!("scalar width {}", data[8])))
}

/// Bytes of the `DFLD` snapshots needed to store every channel of `grid`
/// as a fully allocated dense field.
pub fn dense_equivalent_bytes<T: Real>(grid: &SparseBlockGrid<T>) -> usize {
    let geo = grid.geometry();
    let dims = geo.dims();
    let header = 4 + 4 + 1 + 1 + 8 * dims + 2 * dims * T::BYTES;
    grid.property_names().len() * (header + geo.node_count() * T::BYTES)
}

pub fn encode_grid<T: Real>(grid: &SparseBlockGrid<T>) -> Vec<u8> {
    let mut w = ByteWriter::new();
    let geo = grid.geometry();
    let dims = geo.dims();
    let vol = chunk_volume(dims);
    w.header(GRID_MAGIC, geo);
    w.u32(grid.property_names().len() as u32);
    for n in grid.property_names() {
        w.u32(n.len() as u32);
        w.bytes(n.as_bytes());
    }
    let (keys, masks, channels) = grid.raw_parts();
    w.u64(keys.len() as u64);
    for (slot, (key, mask)) in keys.iter().zip(masks).enumerate() {
        for a in 0..dims {
            w.u32(key.0[a]);
        }
        w.bytes(&mask.to_bytes(vol));
        for ch in channels {
            for &v in &ch[slot * vol..(slot + 1) * vol] {
                w.scalar(v);
            }
        }
    }
    w.buf
}

pub fn decode_grid<T: Real>(data: &[u8]) -> Result<SparseBlockGrid<T>> {
    let mut r = ByteReader::new(data, "grid snapshot");
    let geo: GridGeometry<T> = r.header(GRID_MAGIC)?;
    let dims = geo.dims();
    let vol = chunk_volume(dims);
    let nprops = r.u32()? as usize;
    let mut names = Vec::with_capacity(nprops);
    for _ in 0..nprops {
        let len = r.u32()? as usize;
        let s = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::format("grid snapshot", "property name is not UTF-8"))?;
        names.push(s.to_string());
    }
    let nchunks = r.u64()? as usize;
    let size = geo.size();
    let mut keys = Vec::with_capacity(nchunks);
    let mut masks = Vec::with_capacity(nchunks);
    let mut channels = vec![Vec::with_capacity(nchunks * vol); nprops];
    for _ in 0..nchunks {
        let mut key = [0u32; 3];
        for (a, k) in key.iter_mut().enumerate().take(dims) {
            *k = r.u32()?;
            if (*k as usize) >= size[a].div_ceil(8) {
                return Err(Error::format(
                    "grid snapshot",
                    format!("chunk key {key:?} outside grid"),
                ));
            }
        }
        keys.push(ChunkKey(key));
        let mask = ChunkMask::from_bytes(r.take(vol / 8)?);
        for off in mask.iter() {
            let node = super::chunk::node_of(dims, ChunkKey(key), off);
            if !geo.contains(node.into()) {
                return Err(Error::format("grid snapshot", "active node outside grid"));
            }
        }
        masks.push(mask);
        for ch in channels.iter_mut() {
            for _ in 0..vol {
                ch.push(r.scalar::<T>()?);
            }
        }
    }
    r.finish()?;
    SparseBlockGrid::from_raw_parts(geo, names, keys, masks, channels)
}

pub fn write_grid<T: Real>(grid: &SparseBlockGrid<T>, mut out: impl Write) -> Result<()> {
    out.write_all(&encode_grid(grid))?;
    Ok(())
}

pub fn read_grid<T: Real>(mut input: impl Read) -> Result<SparseBlockGrid<T>> {
    let mut data = Vec::new();
    input.read_to_end(&mut data)?;
    decode_grid(&data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::channels;

    #[test]
    fn roundtrip_preserves_everything() {
        let geo = GridGeometry::new(&[20, 11, 9], &[0.5, 0.25, 1.0], &[-1.0, 0.0, 2.0]).unwrap();
        let mut g = SparseBlockGrid::<f64>::with_standard_channels(geo);
        for (n, idx) in [[0, 0, 0], [19, 10, 8], [8, 3, 1], [9, 3, 1]]
            .iter()
            .enumerate()
        {
            let v = n as f64;
            g.insert_node(*idx, &[v, v + 0.1, -v, 1e-300, f64::MAX])
                .unwrap();
        }
        let bytes = encode_grid(&g);
        let back: SparseBlockGrid<f64> = decode_grid(&bytes).unwrap();
        assert_eq!(back.chunk_count(), g.chunk_count());
        assert_eq!(back.active_node_count(), g.active_node_count());
        assert_eq!(back.geometry(), g.geometry());
        let u = g.property(channels::U).unwrap();
        assert_eq!(
            back.channel(u)
                .iter()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>(),
            g.channel(u).iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(encode_grid(&back), bytes);
    }

    #[test]
    fn rejects_wrong_precision_and_truncation() {
        let geo = GridGeometry::uniform(&[8, 8], 1.0f32).unwrap();
        let mut g = SparseBlockGrid::<f32>::new(geo, &["u"]).unwrap();
        g.insert_node([1, 1], &[1.0]).unwrap();
        let bytes = encode_grid(&g);
        assert_eq!(peek_precision(&bytes).unwrap(), Precision::F32);
        assert!(decode_grid::<f64>(&bytes).is_err());
        assert!(decode_grid::<f32>(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_grid::<f32>(&bad).is_err());
    }

    #[test]
    fn dense_equivalent_matches_field_encoding() {
        use crate::field::DenseField;
        let geo = GridGeometry::uniform(&[9, 5, 3], 0.5f32).unwrap();
        let g = SparseBlockGrid::<f32>::new(geo.clone(), &["u", "phi"]).unwrap();
        let one = DenseField::filled(geo, 0.0f32).encode().len();
        assert_eq!(dense_equivalent_bytes(&g), 2 * one);
    }
}
