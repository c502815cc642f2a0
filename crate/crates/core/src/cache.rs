//! Binary caches for sliced features (`SWF1`) and Gram matrices (`SWG1`).
//!
//! Both files start with a 32-byte little-endian header followed by
//! row-major `f64` payloads:
//!
//! ```text
//! SWF1: magic[4] | M u32 | N u32 | r u32 | seed u64 | count u32 | reserved u32 | count × M×N f64
//! SWG1: magic[4] | rows u32 | cols u32 | reserved u32 | seed u64 | reserved u64 | rows×cols f64
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sliced::{SliceBasis, SlicedFeature};

pub const FEATURE_MAGIC: &[u8; 4] = b"SWF1";
pub const GRAM_MAGIC: &[u8; 4] = b"SWG1";
pub const HEADER_LEN: usize = 32;

/// Cache file name for a dataset on a given basis configuration.
pub fn feature_cache_path(dir: &Path, dataset_id: &str, seed: u64, m: usize, n: usize) -> PathBuf {
    dir.join(format!("{dataset_id}-s{seed}-M{m}-N{n}.swf"))
}

fn u32_of(x: usize, what: &str) -> Result<u32> {
    u32::try_from(x).map_err(|_| Error::invalid(format!("{what} = {x} does not fit in 32 bits")))
}

pub fn write_features(path: &Path, basis: &SliceBasis, features: &[SlicedFeature]) -> Result<()> {
    let (m, n) = (basis.num_directions(), basis.num_levels());
    if let Some(f) = features.iter().find(|f| f.basis_id() != basis.id()) {
        return Err(Error::Contract(format!(
            "feature on basis {:#x} cannot be cached under basis {:#x}",
            f.basis_id(),
            basis.id()
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(FEATURE_MAGIC)?;
    w.write_all(&u32_of(m, "M")?.to_le_bytes())?;
    w.write_all(&u32_of(n, "N")?.to_le_bytes())?;
    w.write_all(&u32_of(basis.dim(), "r")?.to_le_bytes())?;
    w.write_all(&basis.seed().to_le_bytes())?;
    w.write_all(&u32_of(features.len(), "count")?.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    for f in features {
        for q in f.quantiles() {
            w.write_all(&q.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads features cached for `basis`; the header must match the basis shape
/// and seed.
pub fn read_features(path: &Path, basis: &SliceBasis) -> Result<Vec<SlicedFeature>> {
    let mut r = Reader::open(path)?;
    r.magic(FEATURE_MAGIC)?;
    let m = r.u32()? as usize;
    let n = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let seed = r.u64()?;
    let count = r.u32()? as usize;
    r.u32()?;
    if (m, n, dim, seed) != (basis.num_directions(), basis.num_levels(), basis.dim(), basis.seed()) {
        return Err(Error::Format {
            offset: 4,
            message: format!(
                "cache header (M={m}, N={n}, r={dim}, seed={seed}) does not match the basis"
            ),
        });
    }
    (0..count)
        .map(|_| {
            let q = r.f64s(m * n)?;
            SlicedFeature::from_raw(q, n, basis.id())
        })
        .collect()
}

pub fn write_gram(path: &Path, gram: &DMatrix<f64>, seed: u64) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(GRAM_MAGIC)?;
    w.write_all(&u32_of(gram.nrows(), "rows")?.to_le_bytes())?;
    w.write_all(&u32_of(gram.ncols(), "cols")?.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    w.write_all(&seed.to_le_bytes())?;
    w.write_all(&0u64.to_le_bytes())?;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            w.write_all(&gram[(i, j)].to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Returns the matrix and the seed of record.
pub fn read_gram(path: &Path) -> Result<(DMatrix<f64>, u64)> {
    let mut r = Reader::open(path)?;
    r.magic(GRAM_MAGIC)?;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    r.u32()?;
    let seed = r.u64()?;
    r.u64()?;
    let data = r.f64s(rows * cols)?;
    Ok((DMatrix::from_row_slice(rows, cols, &data), seed))
}

struct Reader {
    inner: BufReader<File>,
    offset: u64,
}

impl Reader {
    fn open(path: &Path) -> Result<Self> {
        Ok(Self {
            inner: BufReader::new(File::open(path)?),
            offset: 0,
        })
    }

    fn bytes<const K: usize>(&mut self) -> Result<[u8; K]> {
        let mut buf = [0u8; K];
        self.inner.read_exact(&mut buf).map_err(|_| Error::Format {
            offset: self.offset,
            message: "truncated cache file".into(),
        })?;
        self.offset += K as u64;
        Ok(buf)
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let got = self.bytes::<4>()?;
        if &got != expected {
            return Err(Error::Format {
                offset: 0,
                message: format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(&got),
                    String::from_utf8_lossy(expected)
                ),
            });
        }
        Ok(())
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn f64s(&mut self, k: usize) -> Result<Vec<f64>> {
        (0..k).map(|_| Ok(f64::from_le_bytes(self.bytes()?))).collect()
    }
}
