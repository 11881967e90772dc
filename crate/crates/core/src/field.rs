//! Dense full-box scalar fields used for ingestion and redistancing.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grid::snapshot::{ByteReader, ByteWriter, FIELD_MAGIC};
use crate::grid::{GridGeometry, NodeIndex};
use crate::scalar::Real;

/// One scalar per node of a [`GridGeometry`], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseField<T> {
    geometry: GridGeometry<T>,
    data: Vec<T>,
}

impl<T: Real> DenseField<T> {
    pub fn filled(geometry: GridGeometry<T>, value: T) -> Self {
        let n = geometry.node_count();
        DenseField {
            geometry,
            data: vec![value; n],
        }
    }

    pub fn from_vec(geometry: GridGeometry<T>, data: Vec<T>) -> Result<Self> {
        if data.len() != geometry.node_count() {
            return Err(Error::input(format!(
                "field has {} values, geometry needs {}",
                data.len(),
                geometry.node_count()
            )));
        }
        Ok(DenseField { geometry, data })
    }

    /// Samples `f` at every node position.
    pub fn from_fn(geometry: GridGeometry<T>, f: impl Fn([T; 3]) -> T) -> Self {
        let data = geometry
            .indices()
            .map(|i| f(geometry.position(i)))
            .collect();
        DenseField { geometry, data }
    }

    pub fn geometry(&self) -> &GridGeometry<T> {
        &self.geometry
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, idx: impl Into<NodeIndex>) -> T {
        self.data[self.geometry.linear(idx.into())]
    }

    #[inline]
    pub fn set(&mut self, idx: impl Into<NodeIndex>, v: T) {
        let l = self.geometry.linear(idx.into());
        self.data[l] = v;
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        DenseField {
            geometry: self.geometry.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn min_max(&self) -> (T, T) {
        self.data
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.header(FIELD_MAGIC, &self.geometry);
        for &v in &self.data {
            w.scalar(v);
        }
        w.buf
    }

    pub fn decode(data: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(data, "field snapshot");
        let geometry: GridGeometry<T> = r.header(FIELD_MAGIC)?;
        let n = geometry.node_count();
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            values.push(r.scalar::<T>()?);
        }
        r.finish()?;
        DenseField::from_vec(geometry, values)
    }

    pub fn write(&self, mut out: impl Write) -> Result<()> {
        out.write_all(&self.encode())?;
        Ok(())
    }

    pub fn read(mut input: impl Read) -> Result<Self> {
        let mut data = Vec::new();
        input.read_to_end(&mut data)?;
        Self::decode(&data)
    }
}
