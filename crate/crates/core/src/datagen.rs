//! Synthetic mode-counting task: each bag is drawn from a Gaussian mixture
//! whose number of components is the regression target.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::measures::EmpiricalMeasure;
use crate::rng;

/// One mixture with uniform component weights.
#[derive(Debug, Clone)]
pub struct GmmTask {
    pub means: Vec<DVector<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
}

impl GmmTask {
    pub fn num_components(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }
}

/// Draws `p ~ U{1..C}`, means `~ U([−5, 5]^r)` and covariances
/// `a A Aᵀ + B` with `a ~ U[1, 4]`, `A_ij ~ U[−1, 1]`, `B` diagonal `~ U[0, 1]`.
pub fn sample_gmm_task<R: Rng + ?Sized>(max_components: usize, dim: usize, rng: &mut R) -> Result<GmmTask> {
    if max_components == 0 || dim == 0 {
        return Err(Error::invalid("C and r must be at least 1"));
    }
    let p = rng.random_range(1..=max_components);
    let means = (0..p)
        .map(|_| DVector::from_fn(dim, |_, _| rng.random_range(-5.0..=5.0)))
        .collect();
    let covariances = (0..p)
        .map(|_| {
            let a: f64 = rng.random_range(1.0..=4.0);
            let mat = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..=1.0));
            let diag = DVector::from_fn(dim, |_, _| rng.random_range(0.0..=1.0));
            let mut sigma = &mat * mat.transpose() * a;
            for i in 0..dim {
                sigma[(i, i)] += diag[i];
            }
            sigma
        })
        .collect();
    Ok(GmmTask { means, covariances })
}

/// Lower Cholesky factor, with one jittered retry for near-singular draws.
fn covariance_factor(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(c) = sigma.clone().cholesky() {
        return Ok(c.l());
    }
    let mut jittered = sigma.clone();
    for i in 0..sigma.nrows() {
        jittered[(i, i)] += 1e-12;
    }
    jittered
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Numerical("covariance is not positive definite".into()))
}

/// `n × r` row-major i.i.d. draws from the mixture.
pub fn sample_points<R: Rng + ?Sized>(task: &GmmTask, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let factors = task
        .covariances
        .iter()
        .map(covariance_factor)
        .collect::<Result<Vec<_>>>()?;
    let dim = task.dim();
    let mut out = Vec::with_capacity(n * dim);
    for _ in 0..n {
        let j = rng.random_range(0..task.num_components());
        let z = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &task.means[j] + &factors[j] * z;
        out.extend(x.iter());
    }
    Ok(out)
}

/// A bag of samples with its number of mixture components.
#[derive(Debug, Clone)]
pub struct LabeledBag {
    pub measure: EmpiricalMeasure,
    pub label: usize,
}

/// `T` independent tasks, task `t` drawn from stream `t` of `seed`.
pub fn make_mode_dataset(
    tasks: usize,
    n: usize,
    max_components: usize,
    dim: usize,
    seed: u64,
) -> Result<Vec<LabeledBag>> {
    if tasks == 0 || n == 0 || max_components == 0 || dim == 0 {
        return Err(Error::invalid("T, n, C and r must all be at least 1"));
    }
    (0..tasks)
        .map(|t| {
            let mut rng = rng::stream(seed, t as u64);
            let task = sample_gmm_task(max_components, dim, &mut rng)?;
            let points = sample_points(&task, n, &mut rng)?;
            Ok(LabeledBag {
                measure: EmpiricalMeasure::from_flat_uniform(points, dim)?,
                label: task.num_components(),
            })
        })
        .collect()
}

const DUMP_MAGIC: &[u8; 4] = b"GMD1";

/// Writes `magic "GMD1" | T u32 | n u32 | C u32 | r u32 | seed u64` followed
/// by every bag's `n × r` little-endian f64 points, then `T` i32 labels.
pub fn write_dataset(
    path: &Path,
    bags: &[LabeledBag],
    max_components: usize,
    seed: u64,
) -> Result<()> {
    let first = bags.first().ok_or_else(|| Error::invalid("empty dataset"))?;
    let (n, dim) = (first.measure.len(), first.measure.dim());
    if bags.iter().any(|b| b.measure.len() != n || b.measure.dim() != dim) {
        return Err(Error::invalid("bags must share size and dimension"));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(DUMP_MAGIC)?;
    for v in [bags.len(), n, max_components, dim] {
        let v = u32::try_from(v).map_err(|_| Error::invalid("count exceeds 32 bits"))?;
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&seed.to_le_bytes())?;
    for b in bags {
        for x in b.measure.flat_points() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    for b in bags {
        let label = i32::try_from(b.label).map_err(|_| Error::invalid("label exceeds 32 bits"))?;
        w.write_all(&label.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dump written by [`write_dataset`]; returns the bags and the
/// header's `(C, seed)`.
pub fn read_dataset(path: &Path) -> Result<(Vec<LabeledBag>, usize, u64)> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    let need = |off: usize, len: usize| -> Result<&[u8]> {
        bytes.get(off..off + len).ok_or(Error::Format {
            offset: off as u64,
            message: "truncated dataset dump".into(),
        })
    };
    if need(0, 4)? != DUMP_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: "bad magic, expected GMD1".into(),
        });
    }
    let u32_at = |off: usize| -> Result<usize> {
        Ok(u32::from_le_bytes(need(off, 4)?.try_into().expect("4 bytes")) as usize)
    };
    let (tasks, n, c, dim) = (u32_at(4)?, u32_at(8)?, u32_at(12)?, u32_at(16)?);
    let seed = u64::from_le_bytes(need(20, 8)?.try_into().expect("8 bytes"));
    let mut off = 28;
    let mut points = Vec::with_capacity(tasks);
    for _ in 0..tasks {
        let raw = need(off, n * dim * 8)?;
        points.push(
            raw.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect::<Vec<_>>(),
        );
        off += n * dim * 8;
    }
    let mut bags = Vec::with_capacity(tasks);
    for pts in points {
        let label = i32::from_le_bytes(need(off, 4)?.try_into().expect("4 bytes"));
        off += 4;
        bags.push(LabeledBag {
            measure: EmpiricalMeasure::from_flat_uniform(pts, dim)?,
            label: usize::try_from(label).map_err(|_| Error::Format {
                offset: off as u64 - 4,
                message: format!("negative label {label}"),
            })?,
        });
    }
    Ok((bags, c, seed))
}
