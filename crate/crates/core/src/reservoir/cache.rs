//! Feature cache file: `"AANF"`, u32 version, u32 count, u32 dim, then
//! `count × dim` little-endian `f32`, row-aligned with a dataset manifest.

use std::borrow::Borrow;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::model::ReservoirModel;
use super::ReservoirError;
use crate::binio::{LeReader, LeWriter};
use crate::world::Image;

pub const CACHE_MAGIC: &[u8; 4] = b"AANF";
pub const CACHE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureCache {
    dim: usize,
    data: Vec<f32>,
}

impl FeatureCache {
    pub fn new(dim: usize) -> Self {
        FeatureCache { dim, data: Vec::new() }
    }

    pub fn from_rows(dim: usize, rows: Vec<Vec<f32>>) -> Result<Self, ReservoirError> {
        let mut c = FeatureCache::new(dim);
        for r in rows {
            c.push(&r)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, row: &[f32]) -> Result<(), ReservoirError> {
        if row.len() != self.dim {
            return Err(ReservoirError::Shape(format!("row has {} values, expected {}", row.len(), self.dim)));
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    /// Extracts normalized features for every image, in order.
    pub fn build<I, B>(model: &ReservoirModel, images: I) -> Result<Self, ReservoirError>
    where
        I: IntoIterator<Item = B>,
        B: Borrow<Image>,
    {
        let mut c = FeatureCache::new(model.architecture().feature_dim()?);
        for img in images {
            c.push(&model.extract_features(img.borrow())?)?;
        }
        Ok(c)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    /// New cache holding the selected rows in the given order.
    pub fn select(&self, idx: &[usize]) -> Self {
        let mut c = FeatureCache::new(self.dim);
        for &i in idx {
            c.data.extend_from_slice(self.row(i));
        }
        c
    }

    /// Appends all rows of `other`.
    pub fn extend(&mut self, other: &FeatureCache) -> Result<(), ReservoirError> {
        if other.dim != self.dim {
            return Err(ReservoirError::Shape("dimension mismatch".into()));
        }
        self.data.extend_from_slice(&other.data);
        Ok(())
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<(), ReservoirError> {
        let mut w = LeWriter::new(w);
        w.bytes(CACHE_MAGIC)?;
        w.u32(CACHE_VERSION)?;
        w.u32(self.len() as u32)?;
        w.u32(self.dim as u32)?;
        w.f32s(&self.data)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self, ReservoirError> {
        let mut r = LeReader::new(r);
        let magic = r.bytes::<4>()?;
        if &magic != CACHE_MAGIC {
            return Err(ReservoirError::Format(format!("bad magic {magic:?}")));
        }
        let version = r.u32()?;
        if version != CACHE_VERSION {
            return Err(ReservoirError::Format(format!("unsupported cache version {version}")));
        }
        let count = r.u32()? as usize;
        let dim = r.u32()? as usize;
        if dim == 0 && count > 0 {
            return Err(ReservoirError::Format("zero feature dimension".into()));
        }
        let data = r.f32s(count * dim)?;
        if !r.at_end()? {
            return Err(ReservoirError::Format("trailing bytes after last row".into()));
        }
        Ok(FeatureCache { dim, data })
    }

    pub fn write(&self, path: &Path) -> Result<(), ReservoirError> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn read(path: &Path) -> Result<Self, ReservoirError> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> FeatureCache {
        FeatureCache::from_rows(3, vec![vec![0.0, 0.5, 1.0], vec![0.25, 0.125, 0.75]]).unwrap()
    }

    #[test]
    fn header_layout() {
        let mut buf = Vec::new();
        sample().write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"AANF");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 3);
        assert_eq!(buf.len(), 16 + 6 * 4);
        assert_eq!(f32::from_le_bytes(buf[20..24].try_into().unwrap()), 0.5);
    }

    #[test]
    fn corrupted_header_is_a_format_error() {
        let mut buf = Vec::new();
        sample().write_to(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(FeatureCache::read_from(&bad[..]), Err(ReservoirError::Format(_))));
        let mut bad = buf.clone();
        bad[4] = 9;
        assert!(matches!(FeatureCache::read_from(&bad[..]), Err(ReservoirError::Format(_))));
        assert!(matches!(FeatureCache::read_from(&buf[..buf.len() - 2]), Err(ReservoirError::Truncated)));
        assert!(matches!(FeatureCache::read_from(&buf[..10]), Err(ReservoirError::Truncated)));
    }

    #[test]
    fn wrong_row_width_rejected() {
        let mut c = FeatureCache::new(2);
        assert!(c.push(&[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bitwise(dim in 1usize..16, rows in 0usize..8, seed in any::<u64>()) {
            use rand::Rng;
            let mut rng = crate::seed::rng(seed, &[]);
            let data: Vec<Vec<f32>> = (0..rows).map(|_| (0..dim).map(|_| rng.gen::<f32>()).collect()).collect();
            let c = FeatureCache::from_rows(dim, data).unwrap();
            let mut buf = Vec::new();
            c.write_to(&mut buf).unwrap();
            let back = FeatureCache::read_from(&buf[..]).unwrap();
            prop_assert_eq!(back.len(), rows);
            for (a, b) in back.rows().zip(c.rows()) {
                prop_assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
        }
    }
}
