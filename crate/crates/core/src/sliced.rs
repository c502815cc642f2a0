//! Monte-Carlo sliced Wasserstein features.
//!
//! A [`SliceBasis`] fixes `M` directions on the sphere and `N` quantile levels
//! in (0, 1). Every measure is mapped to the `M × N` matrix of its projected
//! quantiles, and
//!
//! ```text
//! d̂_p(ℙ, ℚ)^p = (1/MN) Σ_{m,ℓ} |F⁻¹_{θ_m#ℙ}(t_ℓ) − F⁻¹_{θ_m#ℚ}(t_ℓ)|^p
//! ```
//!
//! is an exact ℓ_p distance between feature vectors. The basis must be shared
//! by every measure that is ever compared; features carry the basis id and
//! distances across bases are refused.

use std::hash::{Hash, Hasher};

use rand::Rng as _;
use rand_distr::{Open01, StandardNormal};

use crate::error::{Error, Result};
use crate::measures::{dot, EmpiricalMeasure, SortedProjection};
use crate::ot1d::{self, Order};
use crate::rng;

pub const DEFAULT_DIRECTIONS: usize = 100;
pub const DEFAULT_LEVELS: usize = 100;

/// Shared directions `θ_1..θ_M` and levels `t_1..t_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceBasis {
    /// Row-major `M × r`.
    directions: Vec<f64>,
    levels: Vec<f64>,
    dim: usize,
    seed: u64,
    id: u64,
}

impl SliceBasis {
    /// Samples a basis: directions are normalized standard-normal vectors,
    /// levels are i.i.d. uniform on the open interval.
    pub fn sample(num_directions: usize, num_levels: usize, dim: usize, seed: u64) -> Result<Self> {
        if num_directions == 0 || num_levels == 0 || dim == 0 {
            return Err(Error::invalid("M, N and r must all be at least 1"));
        }
        let mut rng = rng::seeded(seed);
        let mut directions = Vec::with_capacity(num_directions * dim);
        for _ in 0..num_directions {
            directions.extend(sample_unit(&mut rng, dim));
        }
        let levels = (0..num_levels).map(|_| rng.sample(Open01)).collect();
        Self::assemble(directions, levels, dim, seed)
    }

    /// Basis from explicit directions (row-major `M × dim`) and levels.
    pub fn from_parts(directions: Vec<f64>, levels: Vec<f64>, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 || directions.is_empty() || directions.len() % dim != 0 {
            return Err(Error::invalid("directions must form a non-empty M × r matrix"));
        }
        if levels.is_empty() {
            return Err(Error::invalid("at least one quantile level is required"));
        }
        for row in directions.chunks_exact(dim) {
            let norm = dot(row, row).sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("direction norm {norm} is not 1")));
            }
        }
        if let Some(t) = levels.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(Error::invalid(format!("level {t} outside (0, 1)")));
        }
        Self::assemble(directions, levels, dim, seed)
    }

    fn assemble(directions: Vec<f64>, levels: Vec<f64>, dim: usize, seed: u64) -> Result<Self> {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        dim.hash(&mut h);
        directions.len().hash(&mut h);
        for x in directions.iter().chain(&levels) {
            x.to_bits().hash(&mut h);
        }
        Ok(Self {
            directions,
            levels,
            dim,
            seed,
            id: h.finish(),
        })
    }

    pub fn num_directions(&self) -> usize {
        self.directions.len() / self.dim
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Content hash; equal ids mean bitwise-equal bases.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn direction(&self, m: usize) -> &[f64] {
        &self.directions[m * self.dim..(m + 1) * self.dim]
    }

    pub fn directions(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.directions.chunks_exact(self.dim)
    }

    /// Feature matrix of `measure` on this basis.
    pub fn feature(&self, measure: &EmpiricalMeasure) -> Result<SlicedFeature> {
        sliced_feature(measure, self)
    }
}

/// Uniform draw on S^{dim−1}.
pub fn sample_unit<R: rand::Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Convenience alias for [`SliceBasis::sample`].
pub fn sample_basis(num_directions: usize, num_levels: usize, dim: usize, seed: u64) -> Result<SliceBasis> {
    SliceBasis::sample(num_directions, num_levels, dim, seed)
}

/// Raw quantile matrix of one measure; the `(MN)^{-1/p}` factor is applied
/// at distance time.
#[derive(Debug, Clone, PartialEq)]
pub struct SlicedFeature {
    /// Row-major `M × N`.
    quantiles: Vec<f64>,
    num_levels: usize,
    basis_id: u64,
}

impl SlicedFeature {
    pub fn from_raw(quantiles: Vec<f64>, num_levels: usize, basis_id: u64) -> Result<Self> {
        if num_levels == 0 || quantiles.is_empty() || quantiles.len() % num_levels != 0 {
            return Err(Error::invalid("quantile buffer must form an M × N matrix"));
        }
        Ok(Self {
            quantiles,
            num_levels,
            basis_id,
        })
    }

    pub fn basis_id(&self) -> u64 {
        self.basis_id
    }

    pub fn num_directions(&self) -> usize {
        self.quantiles.len() / self.num_levels
    }

    pub fn num_levels(&self) -> usize {
        self.num_levels
    }

    pub fn quantiles(&self) -> &[f64] {
        &self.quantiles
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.quantiles[m * self.num_levels..(m + 1) * self.num_levels]
    }

    pub fn get(&self, m: usize, l: usize) -> f64 {
        self.quantiles[m * self.num_levels + l]
    }
}

/// Evaluates the quantile matrix: each direction is projected and sorted
/// once, then queried at every level.
pub fn sliced_feature(measure: &EmpiricalMeasure, basis: &SliceBasis) -> Result<SlicedFeature> {
    if measure.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: measure.dim(),
        });
    }
    let mut quantiles = Vec::with_capacity(basis.num_directions() * basis.num_levels());
    let mut projected = vec![0.0; measure.len()];
    for theta in basis.directions() {
        projected
            .iter_mut()
            .zip(measure.points())
            .for_each(|(v, x)| *v = dot(x, theta));
        let proj = SortedProjection::from_atoms(&projected, measure.weights())?;
        quantiles.extend(basis.levels().iter().map(|&t| proj.quantile(t)));
    }
    SlicedFeature::from_raw(quantiles, basis.num_levels(), basis.id())
}

fn check_same_basis(a: &SlicedFeature, b: &SlicedFeature) -> Result<()> {
    if a.basis_id != b.basis_id || a.quantiles.len() != b.quantiles.len() || a.num_levels != b.num_levels {
        return Err(Error::Contract(format!(
            "sliced features built on different bases ({:#x} vs {:#x})",
            a.basis_id, b.basis_id
        )));
    }
    Ok(())
}

/// `d̂_p` between two features on the same basis.
pub fn sliced_distance(a: &SlicedFeature, b: &SlicedFeature, p: Order) -> Result<f64> {
    check_same_basis(a, b)?;
    Ok(p.root(sliced_power_unchecked(a, b, p)))
}

/// `d̂_p^p`, without the basis check.
#[inline]
pub(crate) fn sliced_power_unchecked(a: &SlicedFeature, b: &SlicedFeature, p: Order) -> f64 {
    let sum: f64 = match p {
        Order::One => a.quantiles.iter().zip(&b.quantiles).map(|(x, y)| (x - y).abs()).sum(),
        Order::Two => a
            .quantiles
            .iter()
            .zip(&b.quantiles)
            .map(|(x, y)| (x - y) * (x - y))
            .sum(),
    };
    sum / a.quantiles.len() as f64
}

/// Sliced distance with the inner 1D integral evaluated exactly:
/// `((1/M) Σ_m W_p(θ_m#a, θ_m#b)^p)^{1/p}`.
///
/// `directions` is row-major `M × r`, each row unit-norm.
pub fn sliced_distance_exact_inner(
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
    p: Order,
    directions: &[f64],
) -> Result<f64> {
    let dim = a.dim();
    if b.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: b.dim(),
        });
    }
    if directions.is_empty() || directions.len() % dim != 0 {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: directions.len(),
        });
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for theta in directions.chunks_exact(dim) {
        let pa = a.project(theta)?;
        let pb = b.project(theta)?;
        total += ot1d::general_power(&pa, &pb, p);
        count += 1;
    }
    Ok(p.root(total / count as f64))
}
