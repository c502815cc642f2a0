//! Distances between probability measures other than the sliced ones:
//! MMD with a Gaussian inner kernel, Hellinger and total variation on a
//! shared support, and Euclidean distance between vectors.

use crate::error::{Error, Result};
use crate::measures::EmpiricalMeasure;

use super::histogram::GridHistogram;

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `Σᵢⱼ wᵢ vⱼ exp(−γ‖xᵢ − yⱼ‖²)`
pub(crate) fn mean_embedding_inner(a: &EmpiricalMeasure, b: &EmpiricalMeasure, gamma: f64) -> f64 {
    let mut total = 0.0;
    for (x, wa) in a.points().zip(a.weights()) {
        let mut row = 0.0;
        for (y, wb) in b.points().zip(b.weights()) {
            row += wb * (-gamma * sq_dist(x, y)).exp();
        }
        total += wa * row;
    }
    total
}

/// Empirical MMD with inner kernel `exp(−γ‖x − y‖²)`; the squared value is
/// clamped at zero before the root.
pub fn mmd_distance(a: &EmpiricalMeasure, b: &EmpiricalMeasure, inner_gamma: f64) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    check_gamma(inner_gamma)?;
    let aa = mean_embedding_inner(a, a, inner_gamma);
    let bb = mean_embedding_inner(b, b, inner_gamma);
    let ab = mean_embedding_inner(a, b, inner_gamma);
    Ok(mmd_from_terms(aa, bb, ab))
}

#[inline]
pub(crate) fn mmd_from_terms(aa: f64, bb: f64, ab: f64) -> f64 {
    (aa + bb - 2.0 * ab).max(0.0).sqrt()
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!("bandwidth {gamma} must be positive and finite")));
    }
    Ok(())
}

fn check_probability_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    for w in [a, b] {
        let total: f64 = w.iter().sum();
        if w.iter().any(|x| !(*x >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("weights must form a probability vector"));
        }
    }
    Ok(())
}

/// `(½ Σᵢ (√αᵢ − √βᵢ)²)^{1/2}` for two probability vectors on one support.
pub fn hellinger_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_probability_pair(a, b)?;
    Ok(hellinger_unchecked(a, b))
}

pub(crate) fn hellinger_unchecked(a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x.sqrt() - y.sqrt();
            d * d
        })
        .sum();
    (0.5 * s).sqrt().min(1.0)
}

/// `½ ‖α − β‖₁` for two probability vectors on one support.
pub fn tv_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_probability_pair(a, b)?;
    Ok(tv_unchecked(a, b))
}

pub(crate) fn tv_unchecked(a: &[f64], b: &[f64]) -> f64 {
    (0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()).min(1.0)
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(sq_dist(a, b).sqrt())
}

/// Per-histogram data for separable-Gaussian MMD on a pixel grid.
///
/// On a regular grid the inner Gaussian factorizes across axes, so the
/// cross term `Σ A[i,j] B[k,l] g_y(i−k) g_x(j−l)` equals `⟨A, G_y B G_x⟩`.
/// Smoothing every histogram once makes each pair an O(HW) inner product.
pub(crate) struct SmoothedHistogram {
    pub smoothed: Vec<f64>,
    pub self_term: f64,
}

pub(crate) fn axis_gram(len: usize, spacing: f64, gamma: f64) -> Vec<f64> {
    let mut g = vec![0.0; len * len];
    for i in 0..len {
        for j in 0..len {
            let d = (i as f64 - j as f64) * spacing;
            g[i * len + j] = (-gamma * d * d).exp();
        }
    }
    g
}

pub(crate) fn smooth_histogram(h: &GridHistogram, gy: &[f64], gx: &[f64]) -> SmoothedHistogram {
    let (rows, cols) = (h.height(), h.width());
    let w = h.weights();
    // tmp = B G_x
    let mut tmp = vec![0.0; rows * cols];
    for r in 0..rows {
        let src = &w[r * cols..(r + 1) * cols];
        if src.iter().all(|&v| v == 0.0) {
            continue;
        }
        let dst = &mut tmp[r * cols..(r + 1) * cols];
        for (c, &v) in src.iter().enumerate() {
            if v != 0.0 {
                let g = &gx[c * cols..(c + 1) * cols];
                dst.iter_mut().zip(g).for_each(|(d, gv)| *d += v * gv);
            }
        }
    }
    // out = G_y tmp
    let mut out = vec![0.0; rows * cols];
    for k in 0..rows {
        let src = &tmp[k * cols..(k + 1) * cols];
        if src.iter().all(|&v| v == 0.0) {
            continue;
        }
        for r in 0..rows {
            let g = gy[r * rows + k];
            let dst = &mut out[r * cols..(r + 1) * cols];
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += g * s);
        }
    }
    let self_term = w.iter().zip(&out).map(|(a, b)| a * b).sum();
    SmoothedHistogram {
        smoothed: out,
        self_term,
    }
}

/// MMD between two histograms on the same grid using the separable form.
pub fn mmd_distance_grid(a: &GridHistogram, b: &GridHistogram, inner_gamma: f64) -> Result<f64> {
    a.check_same_grid(b)?;
    check_gamma(inner_gamma)?;
    let gy = axis_gram(a.height(), a.row_spacing(), inner_gamma);
    let gx = axis_gram(a.width(), a.col_spacing(), inner_gamma);
    let sa = smooth_histogram(a, &gy, &gx);
    let sb = smooth_histogram(b, &gy, &gx);
    let ab: f64 = a.weights().iter().zip(&sb.smoothed).map(|(x, y)| x * y).sum();
    Ok(mmd_from_terms(sa.self_term, sb.self_term, ab))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dirac(x: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::new_uniform(vec![x.to_vec()]).unwrap()
    }

    #[test]
    fn mmd_identity_and_diracs() {
        let a = EmpiricalMeasure::new_uniform(vec![vec![0.0, 1.0], vec![2.0, 0.5]]).unwrap();
        assert_eq!(mmd_distance(&a, &a, 0.7).unwrap(), 0.0);
        let (x, y, g) = ([0.0, 0.0], [1.0, 2.0], 0.3);
        let d = mmd_distance(&dirac(&x), &dirac(&y), g).unwrap();
        let expect = (2.0 * (1.0 - (-g * 5.0f64).exp())).sqrt();
        assert!((d - expect).abs() < 1e-14);
        let far = mmd_distance(&dirac(&[0.0]), &dirac(&[1e4]), 1.0).unwrap();
        assert!((far - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn mmd_errors() {
        assert!(mmd_distance(&dirac(&[0.0]), &dirac(&[0.0, 1.0]), 1.0).is_err());
        assert!(mmd_distance(&dirac(&[0.0]), &dirac(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn hellinger_values() {
        assert_eq!(hellinger_distance(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert!((hellinger_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        let d = hellinger_distance(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((d - (1.0 - 2f64.sqrt() / 2.0).sqrt()).abs() < 1e-15);
        assert!((d - 0.5412).abs() < 1e-4);
        assert!(hellinger_distance(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn tv_values() {
        assert_eq!(tv_distance(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.5, 0.5]).unwrap(), 0.5);
        assert!(tv_distance(&[1.0, 0.0, 0.0], &[0.5, 0.5]).is_err());
        assert!(tv_distance(&[0.9, 0.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn grid_mmd_matches_direct_double_sum() {
        let mut w = vec![0.0; 5 * 4];
        w[1] = 3.0;
        w[6] = 1.0;
        w[13] = 4.0;
        w[19] = 2.0;
        let a = GridHistogram::from_intensities(5, 4, &w).unwrap();
        let mut v = vec![0.0; 5 * 4];
        v[0] = 1.0;
        v[10] = 5.0;
        v[17] = 2.0;
        let b = GridHistogram::from_intensities(5, 4, &v).unwrap();
        for gamma in [1e-3, 0.5, 4.0, 60.0] {
            let fast = mmd_distance_grid(&a, &b, gamma).unwrap();
            let slow = mmd_distance(&a.to_measure().unwrap(), &b.to_measure().unwrap(), gamma).unwrap();
            assert!((fast - slow).abs() < 1e-12, "γ={gamma}: {fast} vs {slow}");
        }
    }
}
