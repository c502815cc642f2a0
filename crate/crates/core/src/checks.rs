//! Numerical self-checks of the distances, kernels and solver against
//! independent references. The `check` subcommand and the acceptance tests
//! both run these.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::Result;
use crate::kernels::distances::mean_embedding_inner;
use crate::kernels::{gram_matrix, is_psd, spectrum_extremes, DistanceSpec, GridHistogram, Item, KernelSpec};
use crate::krr::{self, RegularizationPath};
use crate::measures::EmpiricalMeasure;
use crate::ot1d::{wasserstein_1d, wasserstein_1d_balanced, wasserstein_lp_oracle, Order};
use crate::rng;
use crate::sliced::{sliced_distance, sliced_distance_exact_inner, sample_unit, SliceBasis};

/// Result of one check.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] {}. {} ({:.1}s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.detail
        )
    }
}

fn timed(id: u32, name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckOutcome {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    CheckOutcome {
        id,
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn line_measure(xs: &[f64], ws: Option<&[f64]>) -> Result<EmpiricalMeasure> {
    let pts = xs.to_vec();
    match ws {
        Some(w) => EmpiricalMeasure::from_flat_weighted(pts, 1, w.to_vec()),
        None => EmpiricalMeasure::from_flat_uniform(pts, 1),
    }
}

fn random_atoms<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    // Integer-valued atoms half of the time so ties and coincident points occur.
    if rng.random_bool(0.5) {
        (0..n).map(|_| f64::from(rng.random_range(-3i32..=3))).collect()
    } else {
        (0..n).map(|_| rng.random_range(-5.0..5.0)).collect()
    }
}

fn random_simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / s).collect()
}

/// Closed-form 1D distances against the transport LP on small instances.
pub fn ot_oracle_equivalence(instances: usize, seed: u64) -> CheckOutcome {
    timed(1, "1D transport closed forms vs LP oracle", || {
        let mut rng = rng::seeded(seed);
        let mut worst: f64 = 0.0;
        let (mut balanced, mut unbalanced) = (0, 0);
        for i in 0..instances {
            let p = if i % 2 == 0 { Order::One } else { Order::Two };
            let n = rng.random_range(1..=6);
            let (a, b, is_balanced) = if rng.random_bool(0.5) {
                let a = line_measure(&random_atoms(&mut rng, n), None)?;
                let b = line_measure(&random_atoms(&mut rng, n), None)?;
                (a, b, true)
            } else {
                let m = rng.random_range(1..=6);
                let wa = random_simplex(&mut rng, n);
                let wb = random_simplex(&mut rng, m);
                let a = line_measure(&random_atoms(&mut rng, n), Some(&wa))?;
                let b = line_measure(&random_atoms(&mut rng, m), Some(&wb))?;
                (a, b, false)
            };
            let oracle = wasserstein_lp_oracle(&a, &b, p)?;
            let (pa, pb) = (a.project(&[1.0])?, b.project(&[1.0])?);
            let closed = wasserstein_1d(&pa, &pb, p);
            worst = worst.max((closed - oracle).abs());
            if is_balanced {
                balanced += 1;
                worst = worst.max((wasserstein_1d_balanced(&pa, &pb, p)? - oracle).abs());
            } else {
                unbalanced += 1;
            }
        }
        Ok((
            worst <= 1e-10,
            format!("{balanced} balanced + {unbalanced} weighted instances, max |closed − LP| = {worst:.2e} (tol 1e-10)"),
        ))
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Sliced distances between Dirac masses against their closed forms.
pub fn dirac_sliced(pairs: usize, directions: usize, seed: u64) -> CheckOutcome {
    timed(2, "Dirac sliced distances", || {
        let mut rng = rng::seeded(seed);
        let dims = [2usize, 3, 5];
        let bases = dims
            .iter()
            .map(|&r| SliceBasis::sample(directions, 1, r, rng::derive_seed(seed, &[r as u64])))
            .collect::<Result<Vec<_>>>()?;
        let exact_dirs: Vec<f64> = {
            let mut dr = rng::seeded(rng::derive_seed(seed, &[rng::tag("exact")]));
            (0..directions).flat_map(|_| sample_unit(&mut dr, 2)).collect()
        };
        let (mut worst_sw2, mut worst_sw1) = (0.0f64, 0.0f64);
        for i in 0..pairs {
            let k = i % dims.len();
            let r = dims[k];
            let a: Vec<f64> = (0..r).map(|_| rng.random_range(-5.0..5.0)).collect();
            let b: Vec<f64> = (0..r).map(|_| rng.random_range(-5.0..5.0)).collect();
            let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            let da = EmpiricalMeasure::new_uniform(vec![a.clone()])?;
            let db = EmpiricalMeasure::new_uniform(vec![b.clone()])?;
            let d = sliced_distance(&bases[k].feature(&da)?, &bases[k].feature(&db)?, Order::Two)?;
            let expect = norm(&diff) / (r as f64).sqrt();
            worst_sw2 = worst_sw2.max((d - expect).abs() / expect);
            if r == 2 {
                let d1 = sliced_distance_exact_inner(&da, &db, Order::One, &exact_dirs)?;
                let expect1 = 2.0 / PI * norm(&diff);
                worst_sw1 = worst_sw1.max((d1 - expect1).abs() / expect1);
            }
        }
        Ok((
            worst_sw2 <= 0.02 && worst_sw1 <= 0.02,
            format!(
                "M = {directions}: max rel. error SW2 {:.3}%, exact-inner SW1 {:.3}% (tol 2%)",
                100.0 * worst_sw2,
                100.0 * worst_sw1
            ),
        ))
    })
}

/// In one dimension the sliced estimate is a Monte-Carlo quadrature of the
/// exact 1D distance.
pub fn one_dimensional_reduction(pairs: usize, levels: usize, seed: u64) -> CheckOutcome {
    timed(3, "r = 1 reduction to the 1D closed form", || {
        let mut rng = rng::seeded(seed);
        let basis = SliceBasis::sample(1, levels, 1, rng::derive_seed(seed, &[rng::tag("basis")]))?;
        let mut worst: f64 = 0.0;
        for i in 0..pairs {
            let p = if i % 2 == 0 { Order::Two } else { Order::One };
            let n = rng.random_range(1..=30);
            let m = rng.random_range(1..=30);
            let shift = rng.random_range(-2.0..2.0);
            let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let ys: Vec<f64> = (0..m).map(|_| shift + rng.random_range(-3.0..3.0)).collect();
            let a = line_measure(&xs, None)?;
            let b = line_measure(&ys, None)?;
            let approx = sliced_distance(&basis.feature(&a)?, &basis.feature(&b)?, p)?;
            let exact = wasserstein_1d(&a.project(&[1.0])?, &b.project(&[1.0])?, p);
            worst = worst.max((approx - exact).abs() / exact);
        }
        Ok((worst <= 0.02, format!("N = {levels}: max rel. error {:.3}% over {pairs} pairs (tol 2%)", 100.0 * worst)))
    })
}

fn random_bag<R: Rng>(rng: &mut R, dim: usize, max_points: usize) -> Result<EmpiricalMeasure> {
    let n = rng.random_range(1..=max_points);
    let center: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
    let scale = rng.random_range(0.1..2.0);
    let pts: Vec<f64> = (0..n)
        .flat_map(|_| center.iter().map(|c| c + scale * rng.random_range(-1.0..1.0)).collect::<Vec<_>>())
        .collect();
    if rng.random_bool(0.5) {
        EmpiricalMeasure::from_flat_uniform(pts, dim)
    } else {
        let w = random_simplex(rng, n);
        EmpiricalMeasure::from_flat_weighted(pts, dim, w)
    }
}

fn random_grid<R: Rng>(rng: &mut R, side: usize) -> Result<GridHistogram> {
    let mut v: Vec<f64> = (0..side * side)
        .map(|_| if rng.random_bool(0.4) { 0.0 } else { rng.random_range(0.0..255.0) })
        .collect();
    v[0] += 1.0;
    GridHistogram::from_intensities(side, side, &v)
}

/// Gaussian-like Grams on each Hilbertian distance are positive semi-definite.
pub fn psd_grams(per_kernel: usize, max_size: usize, seed: u64) -> CheckOutcome {
    timed(4, "PSD Gram suite", || {
        let mut rng = rng::seeded(seed);
        let basis = SliceBasis::sample(20, 20, 2, rng::derive_seed(seed, &[rng::tag("basis")]))?;
        let kinds = ["SW2", "SW1", "MMD", "Hellinger", "TV", "Euclidean"];
        let mut worst_ratio = f64::INFINITY;
        let mut failures = Vec::new();
        for (k, &kind) in kinds.iter().enumerate() {
            for _ in 0..per_kernel {
                let size = rng.random_range(2..=max_size);
                let gamma = 10f64.powf(rng.random_range(-2.0..1.0));
                let (items, distance): (Vec<Item>, DistanceSpec) = match k {
                    0 | 1 => {
                        let items = (0..size)
                            .map(|_| random_bag(&mut rng, 2, 15).and_then(|m| basis.feature(&m)).map(Item::Sliced))
                            .collect::<Result<Vec<_>>>()?;
                        let id = basis.id();
                        (items, if k == 0 { DistanceSpec::Sw2 { basis_id: id } } else { DistanceSpec::Sw1 { basis_id: id } })
                    }
                    2 => {
                        let inner = 10f64.powf(rng.random_range(-2.0..1.0));
                        let items = (0..size)
                            .map(|_| random_bag(&mut rng, 2, 15).map(Item::Measure))
                            .collect::<Result<Vec<_>>>()?;
                        (items, DistanceSpec::Mmd { inner_gamma: inner })
                    }
                    3 | 4 => {
                        let items = (0..size)
                            .map(|_| random_grid(&mut rng, 5).map(Item::Histogram))
                            .collect::<Result<Vec<_>>>()?;
                        (items, if k == 3 { DistanceSpec::Hellinger } else { DistanceSpec::TotalVariation })
                    }
                    _ => {
                        let items = (0..size)
                            .map(|_| Item::Vector((0..16).map(|_| rng.random_range(0.0..1.0)).collect()))
                            .collect();
                        (items, DistanceSpec::Euclidean)
                    }
                };
                let spec = KernelSpec::hilbertian(distance, gamma)?;
                let gram = gram_matrix(&items, &spec)?;
                let (min, max) = spectrum_extremes(&gram);
                worst_ratio = worst_ratio.min(min / max);
                if !is_psd(&gram, 1e-8) {
                    failures.push(format!("{kind} size {size} γ {gamma:.3e}: λ_min/λ_max = {:.3e}", min / max));
                }
            }
        }
        let total = per_kernel * kinds.len();
        Ok((
            failures.is_empty(),
            if failures.is_empty() {
                format!("{total} Grams, worst λ_min/λ_max = {worst_ratio:.3e} (tol −1e-8)")
            } else {
                format!("{} of {total} Grams not PSD; first: {}", failures.len(), failures[0])
            },
        ))
    })
}

/// Least-squares slope of `y` against `x`.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Squared MMD between `N(0, I₂)` and an `n`-sample, using the population
/// terms in closed form:
/// `E k(X, X') = (1 + 4γ)^{-1}` and `E_X k(X, x) = (1 + 2γ)^{-1} exp(−γ‖x‖²/(1 + 2γ))` in 2D.
fn population_mmd_sq(sample: &EmpiricalMeasure, gamma: f64) -> f64 {
    let pp = 1.0 / (1.0 + 4.0 * gamma);
    let c = 1.0 + 2.0 * gamma;
    let embed: f64 = sample
        .points()
        .zip(sample.weights())
        .map(|(x, w)| w * (-gamma * (x[0] * x[0] + x[1] * x[1]) / c).exp() / c)
        .sum();
    pp - 2.0 * embed + mean_embedding_inner(sample, sample, gamma)
}

/// Expected squared MMD to the empirical measure decays like `1/n`.
pub fn mmd_sample_complexity(reps: usize, seed: u64) -> CheckOutcome {
    timed(5, "MMD sample complexity", || {
        let sizes = [10usize, 30, 100, 300, 1000];
        let gamma = 1.0;
        let mut means = Vec::with_capacity(sizes.len());
        for &n in &sizes {
            let mut total = 0.0;
            for rep in 0..reps {
                let mut r = rng::stream(rng::derive_seed(seed, &[n as u64]), rep as u64);
                let pts: Vec<f64> = (0..2 * n).map(|_| r.sample::<f64, _>(rand_distr::StandardNormal)).collect();
                total += population_mmd_sq(&EmpiricalMeasure::from_flat_uniform(pts, 2)?, gamma);
            }
            means.push(total / reps as f64);
        }
        let lx: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
        let ly: Vec<f64> = means.iter().map(|m| m.ln()).collect();
        let s = slope(&lx, &ly);
        Ok((
            (-1.3..=-0.7).contains(&s),
            format!(
                "log-log slope {s:.3} (accept [−1.3, −0.7]); E[d²] = {}",
                means.iter().map(|m| format!("{m:.3e}")).collect::<Vec<_>>().join(", ")
            ),
        ))
    })
}

/// Interpolation limit, monotone training error and agreement with a dense
/// LU solve.
pub fn krr_sanity(seed: u64) -> CheckOutcome {
    timed(6, "KRR sanity", || {
        let mut rng = rng::seeded(seed);
        let basis = SliceBasis::sample(30, 30, 2, rng::derive_seed(seed, &[rng::tag("basis")]))?;
        let mut worst_interp: f64 = 0.0;
        let mut worst_dense: f64 = 0.0;
        let mut monotone = true;
        let lambdas: Vec<f64> = (0..13).map(|k| 10f64.powi(k - 10)).collect();
        for trial in 0..20 {
            let t = rng.random_range(5..=20);
            let items = (0..t)
                .map(|_| random_bag(&mut rng, 2, 10).and_then(|m| basis.feature(&m)).map(Item::Sliced))
                .collect::<Result<Vec<_>>>()?;
            let spec = KernelSpec::hilbertian(DistanceSpec::Sw2 { basis_id: basis.id() }, 1.0)?;
            let gram = gram_matrix(&items, &spec)?;
            let q = if trial % 2 == 0 { 1 } else { 3 };
            let y = DMatrix::from_fn(t, q, |_, _| rng.random_range(-2.0..2.0));

            let model = krr::fit(&gram, &y, 1e-10)?;
            let fitted = model.predict(&gram)?;
            worst_interp = worst_interp.max((&fitted - &y).amax());

            let path = RegularizationPath::new(&gram, &y)?;
            let mut prev = -1.0;
            for &lambda in &lambdas {
                let mse = (&path.solve(lambda)?.predict(&gram)? - &y).norm_squared() / (t * q) as f64;
                if mse < prev - 1e-12 {
                    monotone = false;
                }
                prev = mse;
            }

            for &lambda in &[1e-3, 1e-1, 1.0] {
                let chol = krr::fit(&gram, &y, lambda)?;
                let mut system = gram.clone();
                for i in 0..t {
                    system[(i, i)] += lambda * t as f64;
                }
                let dense = system.lu().solve(&y).expect("shifted Gram is invertible");
                worst_dense = worst_dense.max((chol.dual_coefficients() - dense).amax());
            }
        }
        Ok((
            worst_interp <= 1e-4 && monotone && worst_dense <= 1e-10,
            format!(
                "interpolation max error {worst_interp:.2e} (tol 1e-4), training MSE monotone: {monotone}, dense-solve max diff {worst_dense:.2e} (tol 1e-10)"
            ),
        ))
    })
}

/// Every numerical check at its acceptance size.
pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    vec![
        ot_oracle_equivalence(500, seed),
        dirac_sliced(50, 100_000, seed),
        one_dimensional_reduction(50, 10_000, seed),
        psd_grams(200, 40, seed),
        mmd_sample_complexity(500, seed),
        krr_sanity(seed),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_versions_pass() {
        for outcome in [
            ot_oracle_equivalence(40, 1),
            dirac_sliced(6, 20_000, 1),
            psd_grams(5, 12, 1),
            krr_sanity(1),
        ] {
            assert!(outcome.passed, "{}", outcome.line());
        }
    }

    #[test]
    fn slope_of_power_law() {
        let x: Vec<f64> = [1.0f64, 2.0, 3.0].iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = [1.0f64, 2.0, 3.0].iter().map(|v| (5.0 / v).ln()).collect();
        assert!((slope(&x, &y) + 1.0).abs() < 1e-12);
    }
}
