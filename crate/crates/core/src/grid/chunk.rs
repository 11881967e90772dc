/// Nodes per axis in one chunk.
pub const CHUNK_EDGE: usize = 8;
const MASK_WORDS: usize = 8;

/// Chunk index per axis: `node_index / 8`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChunkKey(pub [u32; 3]);

/// Slots per chunk for a grid of the given dimension.
#[inline]
pub const fn chunk_volume(dims: usize) -> usize {
    if dims == 2 {
        CHUNK_EDGE * CHUNK_EDGE
    } else {
        CHUNK_EDGE * CHUNK_EDGE * CHUNK_EDGE
    }
}

/// Offsets of the unit step along each axis inside a chunk (row-major).
#[inline]
pub(crate) const fn chunk_strides(dims: usize) -> [usize; 3] {
    if dims == 2 {
        [CHUNK_EDGE, 1, 0]
    } else {
        [CHUNK_EDGE * CHUNK_EDGE, CHUNK_EDGE, 1]
    }
}

/// Splits a node index into its chunk key and in-chunk offset.
#[inline]
pub(crate) fn locate(dims: usize, idx: [usize; 3]) -> (ChunkKey, usize) {
    let key = ChunkKey([
        (idx[0] / CHUNK_EDGE) as u32,
        (idx[1] / CHUNK_EDGE) as u32,
        if dims == 2 {
            0
        } else {
            (idx[2] / CHUNK_EDGE) as u32
        },
    ]);
    let s = chunk_strides(dims);
    let off =
        (idx[0] % CHUNK_EDGE) * s[0] + (idx[1] % CHUNK_EDGE) * s[1] + (idx[2] % CHUNK_EDGE) * s[2];
    (key, off)
}

/// Inverse of [`locate`].
#[inline]
pub(crate) fn node_of(dims: usize, key: ChunkKey, offset: usize) -> [usize; 3] {
    let e = CHUNK_EDGE;
    let local = if dims == 2 {
        [offset / e, offset % e, 0]
    } else {
        [offset / (e * e), (offset / e) % e, offset % e]
    };
    let mut out = [0; 3];
    for a in 0..dims {
        out[a] = key.0[a] as usize * e + local[a];
    }
    out
}

/// Occupancy bitset of one chunk (up to 512 slots).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChunkMask([u64; MASK_WORDS]);

impl ChunkMask {
    #[inline]
    pub fn get(&self, offset: usize) -> bool {
        self.0[offset >> 6] >> (offset & 63) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, offset: usize) {
        self.0[offset >> 6] |= 1 << (offset & 63);
    }

    pub fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }

    /// Set offsets in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &bits)| {
            let mut b = bits;
            std::iter::from_fn(move || {
                if b == 0 {
                    return None;
                }
                let t = b.trailing_zeros() as usize;
                b &= b - 1;
                Some(w * 64 + t)
            })
        })
    }

    /// Bytes of the first `slots` bits, bit `o` at byte `o / 8`, position `o % 8`.
    pub(crate) fn to_bytes(self, slots: usize) -> Vec<u8> {
        let mut out = vec![0u8; slots / 8];
        for (w, word) in self.0.iter().enumerate() {
            for b in 0..8 {
                let idx = w * 8 + b;
                if idx < out.len() {
                    out[idx] = (word >> (8 * b)) as u8;
                }
            }
        }
        out
    }

    pub(crate) fn from_bytes(bytes: &[u8]) -> Self {
        let mut m = ChunkMask::default();
        for (idx, &byte) in bytes.iter().enumerate() {
            m.0[idx / 8] |= (byte as u64) << (8 * (idx % 8));
        }
        m
    }
}
