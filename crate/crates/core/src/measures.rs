//! Empirical probability measures and their one-dimensional push-forwards.
//!
//! An [`EmpiricalMeasure`] is a finite weighted sum of Dirac masses in ℝʳ.
//! Projecting it onto a unit direction θ and sorting gives a
//! [`SortedProjection`], which carries everything needed to evaluate the
//! generalized inverse CDF of the push-forward θ*#ℙ.

use crate::error::{Error, Result};

/// Tolerance for accepting caller-supplied weights as a probability vector.
pub const SIMPLEX_TOL: f64 = 1e-9;
/// Tolerance for unit-norm projection directions.
pub const UNIT_TOL: f64 = 1e-9;

/// Weighted point cloud `Σ wᵢ δ_{xᵢ}` in ℝʳ.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    /// Row-major `n × dim` atom coordinates.
    points: Vec<f64>,
    weights: Vec<f64>,
    dim: usize,
    uniform: bool,
}

impl EmpiricalMeasure {
    /// Uniform measure `(1/n) Σ δ_{xᵢ}` over the given rows.
    pub fn new_uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let (flat, dim) = flatten(points)?;
        let n = flat.len() / dim;
        Ok(Self {
            points: flat,
            weights: vec![1.0 / n as f64; n],
            dim,
            uniform: true,
        })
    }

    /// Uniform measure from a row-major buffer.
    pub fn from_flat_uniform(points: Vec<f64>, dim: usize) -> Result<Self> {
        check_flat(&points, dim)?;
        let n = points.len() / dim;
        Ok(Self {
            points,
            weights: vec![1.0 / n as f64; n],
            dim,
            uniform: true,
        })
    }

    /// Weighted measure. Weights must already lie on the simplex (within
    /// [`SIMPLEX_TOL`]); they are then rescaled to sum to one.
    pub fn new_weighted(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let (flat, dim) = flatten(points)?;
        Self::from_flat_weighted(flat, dim, weights)
    }

    pub fn from_flat_weighted(points: Vec<f64>, dim: usize, weights: Vec<f64>) -> Result<Self> {
        check_flat(&points, dim)?;
        let n = points.len() / dim;
        if weights.len() != n {
            return Err(Error::invalid(format!(
                "{} weights for {} atoms",
                weights.len(),
                n
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid(format!("weight {w} is negative or not finite")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::invalid(format!(
                "weights sum to {total}, expected 1 (normalize before constructing)"
            )));
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let uniform = weights.windows(2).all(|p| p[0] == p[1]);
        Ok(Self {
            points,
            weights,
            dim,
            uniform,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Row-major atom coordinates.
    pub fn flat_points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.dim)
    }

    /// True when every atom carries the same mass.
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Projects atoms onto `direction` and sorts them; see [`project`].
    pub fn project(&self, direction: &[f64]) -> Result<SortedProjection> {
        project(self, direction)
    }

    /// The measure translated by `shift`.
    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: shift.len(),
            });
        }
        let mut out = self.clone();
        for row in out.points.chunks_exact_mut(self.dim) {
            row.iter_mut().zip(shift).for_each(|(x, s)| *x += s);
        }
        Ok(out)
    }
}

fn flatten(points: Vec<Vec<f64>>) -> Result<(Vec<f64>, usize)> {
    let dim = points
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::invalid("empty point set"))?;
    if dim == 0 {
        return Err(Error::invalid("points must have dimension ≥ 1"));
    }
    let mut flat = Vec::with_capacity(points.len() * dim);
    for row in &points {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: row.len(),
            });
        }
        flat.extend_from_slice(row);
    }
    Ok((flat, dim))
}

fn check_flat(points: &[f64], dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::invalid("points must have dimension ≥ 1"));
    }
    if points.is_empty() {
        return Err(Error::invalid("empty point set"));
    }
    if points.len() % dim != 0 {
        return Err(Error::invalid(format!(
            "buffer of length {} is not a multiple of dimension {dim}",
            points.len()
        )));
    }
    Ok(())
}

/// Sorted one-dimensional atoms with their cumulative masses.
///
/// `values` is nondecreasing, `cum_weights` strictly increasing with a final
/// entry of exactly 1. Atoms of zero mass are dropped on construction since
/// they do not move the CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedProjection {
    values: Vec<f64>,
    cum_weights: Vec<f64>,
    uniform: bool,
}

impl SortedProjection {
    /// Builds a projection from unsorted 1D atoms and their masses.
    pub fn from_atoms(values: &[f64], weights: &[f64]) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::invalid("values and weights differ in length"));
        }
        if values.is_empty() {
            return Err(Error::invalid("empty projection"));
        }
        let mut order: Vec<usize> = (0..values.len()).filter(|&i| weights[i] > 0.0).collect();
        if order.is_empty() {
            return Err(Error::invalid("projection carries no mass"));
        }
        // stable: ties keep their input order
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let uniform = order.len() == values.len() && weights.windows(2).all(|p| p[0] == p[1]);
        let mut acc = 0.0;
        let mut cum_weights = Vec::with_capacity(order.len());
        let mut sorted = Vec::with_capacity(order.len());
        for &i in &order {
            acc += weights[i];
            cum_weights.push(acc);
            sorted.push(values[i]);
        }
        if (acc - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::invalid(format!("projected mass {acc} differs from 1")));
        }
        *cum_weights.last_mut().expect("non-empty") = 1.0;
        Ok(Self {
            values: sorted,
            cum_weights,
            uniform,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cum_weights(&self) -> &[f64] {
        &self.cum_weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Whether all atoms carry mass exactly 1/n.
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Generalized inverse CDF; see [`inverse_cdf`].
    pub fn inverse_cdf(&self, t: f64) -> Result<f64> {
        inverse_cdf(self, t)
    }

    /// Unchecked quantile lookup for `t ∈ (0, 1]`.
    #[inline]
    pub(crate) fn quantile(&self, t: f64) -> f64 {
        let k = self.cum_weights.partition_point(|&c| c < t);
        self.values[k.min(self.values.len() - 1)]
    }
}

/// Push-forward of `measure` under `x ↦ ⟨x, θ⟩`, sorted ascending.
pub fn project(measure: &EmpiricalMeasure, direction: &[f64]) -> Result<SortedProjection> {
    if direction.len() != measure.dim() {
        return Err(Error::DimensionMismatch {
            expected: measure.dim(),
            got: direction.len(),
        });
    }
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::invalid(format!("direction has norm {norm}, expected 1")));
    }
    let projected: Vec<f64> = measure.points().map(|x| dot(x, direction)).collect();
    SortedProjection::from_atoms(&projected, measure.weights())
}

/// `F^{[-1]}(t) = x_(k)` for the smallest `k` with `s_k ≥ t`, i.e. the
/// left-open convention `s_{k-1} < t ≤ s_k`.
pub fn inverse_cdf(proj: &SortedProjection, t: f64) -> Result<f64> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::invalid(format!("quantile level {t} outside (0, 1]")));
    }
    Ok(proj.quantile(t))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(xs: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::new_uniform(xs.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    #[test]
    fn uniform_construction() {
        let m = EmpiricalMeasure::new_uniform(vec![vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(m.weights(), &[0.5, 0.5]);
        let single = EmpiricalMeasure::new_uniform(vec![vec![1.0, 1.0]]).unwrap();
        assert_eq!(single.weights(), &[1.0]);
        assert_eq!(single.point(0), &[1.0, 1.0]);
    }

    #[test]
    fn uniform_fifty_atoms() {
        let pts: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, -(i as f64)]).collect();
        let m = EmpiricalMeasure::new_uniform(pts).unwrap();
        assert_eq!(m.len(), 50);
        assert!(m.weights().iter().all(|&w| w == 0.02));
        assert!((m.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_and_ragged_inputs_rejected() {
        assert!(matches!(
            EmpiricalMeasure::new_uniform(vec![]),
            Err(Error::InvalidInput(_))
        ));
        assert!(EmpiricalMeasure::new_uniform(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn weighted_construction() {
        let m = EmpiricalMeasure::new_weighted(vec![vec![0.0], vec![1.0]], vec![0.25, 0.75]).unwrap();
        assert_eq!(m.weights(), &[0.25, 0.75]);
        assert!(!m.is_uniform());
        assert!(EmpiricalMeasure::new_weighted(vec![vec![0.0], vec![1.0]], vec![0.5, 0.6]).is_err());
        assert!(EmpiricalMeasure::new_weighted(vec![vec![0.0], vec![1.0]], vec![-0.5, 1.5]).is_err());
    }

    #[test]
    fn intensity_normalized_histogram_accepted() {
        let intensities = [12.0, 255.0, 80.0, 3.0];
        let total: f64 = intensities.iter().sum();
        let pts: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64, 0.0]).collect();
        let m = EmpiricalMeasure::new_weighted(pts, intensities.iter().map(|i| i / total).collect())
            .unwrap();
        assert!((m.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn axis_projections() {
        let m = EmpiricalMeasure::new_uniform(vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let p = project(&m, &[1.0, 0.0]).unwrap();
        assert_eq!(p.values(), &[0.0, 1.0]);
        assert_eq!(p.cum_weights(), &[0.5, 1.0]);
        let q = project(&m, &[0.0, 1.0]).unwrap();
        assert_eq!(q.values(), &[0.0, 0.0]);
        assert_eq!(q.cum_weights(), &[0.5, 1.0]);
    }

    #[test]
    fn projection_sorts() {
        let p = project(&line(&[3.0, 1.0, 2.0]), &[1.0]).unwrap();
        assert_eq!(p.values(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn projection_rejects_bad_direction() {
        let m = line(&[1.0]);
        assert!(matches!(
            project(&m, &[1.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(project(&m, &[0.5]).is_err());
    }

    #[test]
    fn inverse_cdf_on_three_atoms() {
        let p = project(&line(&[1.0, 2.0, 3.0]), &[1.0]).unwrap();
        assert_eq!(inverse_cdf(&p, 0.5).unwrap(), 2.0);
        assert_eq!(inverse_cdf(&p, 1.0).unwrap(), 3.0);
        assert_eq!(inverse_cdf(&p, 0.2).unwrap(), 1.0);
        // breakpoints belong to the left atom
        assert_eq!(inverse_cdf(&p, p.cum_weights()[0]).unwrap(), 1.0);
        assert!(inverse_cdf(&p, 0.0).is_err());
        assert!(inverse_cdf(&p, 1.0 + 1e-9).is_err());
        assert!(inverse_cdf(&p, f64::NAN).is_err());
    }

    #[test]
    fn zero_mass_atoms_are_dropped() {
        let m = EmpiricalMeasure::new_weighted(
            vec![vec![5.0], vec![1.0], vec![2.0]],
            vec![0.0, 0.5, 0.5],
        )
        .unwrap();
        let p = project(&m, &[1.0]).unwrap();
        assert_eq!(p.values(), &[1.0, 2.0]);
        assert_eq!(p.cum_weights(), &[0.5, 1.0]);
    }

    fn arb_measure() -> impl Strategy<Value = EmpiricalMeasure> {
        (1usize..4).prop_flat_map(|dim| {
            prop::collection::vec(prop::collection::vec(-10.0f64..10.0, dim), 1..20)
                .prop_map(|pts| EmpiricalMeasure::new_uniform(pts).unwrap())
        })
    }

    fn unit(dim: usize, raw: &[f64]) -> Vec<f64> {
        let v: Vec<f64> = raw.iter().take(dim).copied().collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n < 1e-6 {
            let mut e = vec![0.0; dim];
            e[0] = 1.0;
            e
        } else {
            v.iter().map(|x| x / n).collect()
        }
    }

    proptest! {
        #[test]
        fn midpoints_enumerate_sorted_atoms(m in arb_measure(), raw in prop::collection::vec(-1.0f64..1.0, 3)) {
            let theta = unit(m.dim(), &raw);
            let p = project(&m, &theta).unwrap();
            let mut prev = 0.0;
            for (k, &c) in p.cum_weights().iter().enumerate() {
                let mid = 0.5 * (prev + c);
                prop_assert_eq!(inverse_cdf(&p, mid).unwrap(), p.values()[k]);
                prev = c;
            }
        }

        #[test]
        fn inverse_cdf_is_monotone(m in arb_measure(), raw in prop::collection::vec(-1.0f64..1.0, 3),
                                   mut ts in prop::collection::vec(1e-9f64..1.0, 2..30)) {
            let theta = unit(m.dim(), &raw);
            let p = project(&m, &theta).unwrap();
            ts.sort_by(f64::total_cmp);
            let qs: Vec<f64> = ts.iter().map(|&t| inverse_cdf(&p, t).unwrap()).collect();
            prop_assert!(qs.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn opposite_direction_mirrors(m in arb_measure(), raw in prop::collection::vec(-1.0f64..1.0, 3)) {
            let theta = unit(m.dim(), &raw);
            let neg: Vec<f64> = theta.iter().map(|x| -x).collect();
            let a = project(&m, &theta).unwrap();
            let b = project(&m, &neg).unwrap();
            let mirrored: Vec<f64> = a.values().iter().rev().map(|x| -x).collect();
            prop_assert_eq!(mirrored, b.values().to_vec());
        }
    }
}
