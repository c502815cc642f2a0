//! One-dimensional p-Wasserstein distances in closed form.
//!
//! In 1D the optimal coupling is monotone, so `W_p(α, β)^p = ∫₀¹ |F_α^{[-1]}(t) − F_β^{[-1]}(t)|^p dt`.
//! Both quantile functions are piecewise constant for empirical measures:
//! with equal uniform masses the integral reduces to matching sorted atoms;
//! otherwise it is a sum over the merged cumulative-weight breakpoints.
//!
//! [`wasserstein_lp_oracle`] solves the transport linear program directly and
//! exists only to validate the closed forms on small instances.

use crate::error::{Error, Result};
use crate::measures::{EmpiricalMeasure, SortedProjection};

/// Ground-cost exponent. Only `p = 1` and `p = 2` are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Order {
    One,
    Two,
}

impl Order {
    pub fn from_int(p: u32) -> Result<Self> {
        match p {
            1 => Ok(Order::One),
            2 => Ok(Order::Two),
            other => Err(Error::invalid(format!("p = {other} unsupported (use 1 or 2)"))),
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Order::One => 1.0,
            Order::Two => 2.0,
        }
    }

    /// `|x|^p`
    #[inline]
    pub fn cost(self, x: f64) -> f64 {
        match self {
            Order::One => x.abs(),
            Order::Two => x * x,
        }
    }

    /// `s^{1/p}`
    #[inline]
    pub fn root(self, s: f64) -> f64 {
        match self {
            Order::One => s,
            Order::Two => s.max(0.0).sqrt(),
        }
    }
}

/// Sorted-atom formula `((1/n) Σ_k |x_(k) − y_(k)|^p)^{1/p}` for two uniform
/// measures with the same number of atoms.
pub fn wasserstein_1d_balanced(a: &SortedProjection, b: &SortedProjection, p: Order) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::NotBalanced(format!(
            "atom counts differ ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if !a.is_uniform() || !b.is_uniform() {
        return Err(Error::NotBalanced("weights are not uniform".into()));
    }
    let n = a.len() as f64;
    let sum: f64 = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| p.cost(x - y))
        .sum();
    Ok(p.root(sum / n))
}

/// Merged-breakpoint formula valid for any sizes and weights.
pub fn wasserstein_1d_general(a: &SortedProjection, b: &SortedProjection, p: Order) -> f64 {
    p.root(general_power(a, b, p))
}

/// `W_p^p` via merged breakpoints.
pub(crate) fn general_power(a: &SortedProjection, b: &SortedProjection, p: Order) -> f64 {
    let (va, ca) = (a.values(), a.cum_weights());
    let (vb, cb) = (b.values(), b.cum_weights());
    let (mut i, mut j) = (0, 0);
    let mut prev = 0.0;
    let mut total = 0.0;
    while i < va.len() && j < vb.len() {
        let next = ca[i].min(cb[j]);
        let len = next - prev;
        if len > 0.0 {
            total += len * p.cost(va[i] - vb[j]);
        }
        prev = next;
        if ca[i] == next {
            i += 1;
        }
        if cb[j] == next {
            j += 1;
        }
    }
    total
}

/// Dispatches to the balanced formula when it applies, else the general one.
pub fn wasserstein_1d(a: &SortedProjection, b: &SortedProjection, p: Order) -> f64 {
    match wasserstein_1d_balanced(a, b, p) {
        Ok(d) => d,
        Err(_) => wasserstein_1d_general(a, b, p),
    }
}

/// Largest `n·m` the LP oracle accepts.
pub const ORACLE_MAX_CELLS: usize = 64;

/// Exact optimal transport cost between two 1D measures by solving the
/// transportation linear program with a dense simplex method.
pub fn wasserstein_lp_oracle(a: &EmpiricalMeasure, b: &EmpiricalMeasure, p: Order) -> Result<f64> {
    if a.dim() != 1 || b.dim() != 1 {
        return Err(Error::invalid("LP oracle expects one-dimensional measures"));
    }
    let (n, m) = (a.len(), b.len());
    if n * m > ORACLE_MAX_CELLS {
        return Err(Error::invalid(format!(
            "instance {n}×{m} exceeds the oracle limit of {ORACLE_MAX_CELLS} cells"
        )));
    }
    let xs = a.flat_points();
    let ys = b.flat_points();
    let cost: Vec<f64> = (0..n)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| p.cost(xs[i] - ys[j]))
        .collect();
    let value = transport_lp(a.weights(), b.weights(), &cost)?;
    Ok(p.root(value))
}

/// Minimizes `Σ c_ij π_ij` subject to row sums `a`, column sums `b`, `π ≥ 0`.
///
/// Two-phase tableau simplex with Bland's rule; one artificial variable per
/// constraint. The redundant marginal constraint leaves an artificial basic
/// at zero, which is harmless because artificials never re-enter.
fn transport_lp(a: &[f64], b: &[f64], cost: &[f64]) -> Result<f64> {
    const EPS: f64 = 1e-12;
    let (n, m) = (a.len(), b.len());
    let vars = n * m;
    let rows = n + m;
    let cols = vars + rows + 1; // structural, artificial, rhs
    let rhs = cols - 1;
    let mut tab = vec![vec![0.0; cols]; rows];
    for i in 0..n {
        for j in 0..m {
            tab[i][i * m + j] = 1.0;
            tab[n + j][i * m + j] = 1.0;
        }
        tab[i][rhs] = a[i];
    }
    for j in 0..m {
        tab[n + j][rhs] = b[j];
    }
    for (r, row) in tab.iter_mut().enumerate() {
        row[vars + r] = 1.0;
    }
    let mut basis: Vec<usize> = (vars..vars + rows).collect();

    let run = |tab: &mut Vec<Vec<f64>>, basis: &mut Vec<usize>, obj: &[f64], allowed: usize| -> Result<()> {
        for _ in 0..10_000 {
            // reduced cost of column k: obj_k − Σ_r obj_{basis r} tab[r][k]
            let entering = (0..allowed).find(|&k| {
                if basis.contains(&k) {
                    return false;
                }
                let z: f64 = (0..rows).map(|r| obj[basis[r]] * tab[r][k]).sum();
                obj[k] - z < -EPS
            });
            let Some(k) = entering else { return Ok(()) };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..rows {
                if tab[r][k] > EPS {
                    let ratio = tab[r][rhs] / tab[r][k];
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < lratio - EPS || (ratio <= lratio + EPS && basis[r] < basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::Numerical("transport LP unbounded".into()));
            };
            let piv = tab[r][k];
            tab[r].iter_mut().for_each(|x| *x /= piv);
            let pivot_row = tab[r].clone();
            for (rr, row) in tab.iter_mut().enumerate() {
                if rr != r && row[k] != 0.0 {
                    let f = row[k];
                    row.iter_mut().zip(&pivot_row).for_each(|(x, p)| *x -= f * p);
                }
            }
            basis[r] = k;
        }
        Err(Error::Numerical("simplex iteration limit reached".into()))
    };

    let mut phase1 = vec![0.0; cols - 1];
    phase1[vars..].iter_mut().for_each(|c| *c = 1.0);
    run(&mut tab, &mut basis, &phase1, cols - 1)?;
    let infeasibility: f64 = (0..rows)
        .filter(|&r| basis[r] >= vars)
        .map(|r| tab[r][rhs])
        .sum();
    if infeasibility > 1e-9 {
        return Err(Error::Numerical(format!(
            "transport LP infeasible (residual {infeasibility})"
        )));
    }
    let mut phase2 = vec![0.0; cols - 1];
    phase2[..vars].copy_from_slice(cost);
    run(&mut tab, &mut basis, &phase2, vars)?;
    Ok((0..rows)
        .filter(|&r| basis[r] < vars)
        .map(|r| cost[basis[r]] * tab[r][rhs])
        .sum())
}
