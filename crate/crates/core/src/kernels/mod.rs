//! Distance-substitution kernels on probability measures.
//!
//! A Hilbertian distance `d` plugged into `exp(−γ d^{2β})` gives a positive
//! definite kernel for `0 < β ≤ 1`. The pairings used here are
//!
//! | distance | β | kernel |
//! |----------|---|--------|
//! | SW₂ | 1 | `exp(−γ SW₂²)` |
//! | SW₁ | ½ | `exp(−γ SW₁)` |
//! | MMD | 1 | `exp(−γ MMD²)` |
//! | Hellinger | 1 | `exp(−γ d_H²)` |
//! | TV | ½ | `exp(−γ d_TV)` |
//! | Euclidean | 1 | RBF on flattened vectors |
//!
//! Gram assembly goes through distance matrices so that a single distance
//! computation serves every bandwidth in a grid.

pub(crate) mod distances;
mod histogram;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measures::EmpiricalMeasure;
use crate::ot1d::Order;
use crate::sliced::{sliced_power_unchecked, SlicedFeature};

pub use distances::{euclidean_distance, hellinger_distance, mmd_distance, mmd_distance_grid, tv_distance};
pub use histogram::GridHistogram;

use distances::{axis_gram, check_gamma, hellinger_unchecked, mean_embedding_inner, mmd_from_terms, smooth_histogram, tv_unchecked};

/// Which distance between inputs a kernel substitutes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceSpec {
    /// Monte-Carlo SW₂ on features of the basis with this id.
    Sw2 { basis_id: u64 },
    /// Monte-Carlo SW₁ on features of the basis with this id.
    Sw1 { basis_id: u64 },
    /// MMD with inner Gaussian `exp(−γ‖x − y‖²)`.
    Mmd { inner_gamma: f64 },
    Hellinger,
    TotalVariation,
    /// Euclidean norm between flattened vectors.
    Euclidean,
}

impl DistanceSpec {
    pub fn validate(&self) -> Result<()> {
        if let DistanceSpec::Mmd { inner_gamma } = self {
            check_gamma(*inner_gamma)?;
        }
        Ok(())
    }

    /// Exponent 2β for which `exp(−γ d^{2β})` is guaranteed positive definite.
    pub fn hilbertian_beta(&self) -> f64 {
        match self {
            DistanceSpec::Sw1 { .. } | DistanceSpec::TotalVariation => 0.5,
            _ => 1.0,
        }
    }

    /// Distance between two inputs.
    pub fn distance(&self, a: &Item, b: &Item) -> Result<f64> {
        let rows = std::slice::from_ref(a);
        let cols = std::slice::from_ref(b);
        Ok(distance_matrix(self, rows, cols)?[(0, 0)])
    }
}

/// An input to a kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Sliced(SlicedFeature),
    Measure(EmpiricalMeasure),
    Histogram(GridHistogram),
    Vector(Vec<f64>),
}

impl From<SlicedFeature> for Item {
    fn from(f: SlicedFeature) -> Self {
        Item::Sliced(f)
    }
}

impl From<EmpiricalMeasure> for Item {
    fn from(m: EmpiricalMeasure) -> Self {
        Item::Measure(m)
    }
}

impl From<GridHistogram> for Item {
    fn from(h: GridHistogram) -> Self {
        Item::Histogram(h)
    }
}

impl From<Vec<f64>> for Item {
    fn from(v: Vec<f64>) -> Self {
        Item::Vector(v)
    }
}

/// How a distance becomes a kernel value.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelForm {
    /// `exp(−γ d^{2β})`
    GaussianLike { gamma: f64, beta: f64 },
    /// `½(d(x, x₀)² + d(y, x₀)² − d(x, y)²)`
    LinearWithOrigin { origin: Box<Item> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub distance: DistanceSpec,
    pub form: KernelForm,
}

impl KernelSpec {
    pub fn gaussian(distance: DistanceSpec, gamma: f64, beta: f64) -> Result<Self> {
        let spec = Self {
            distance,
            form: KernelForm::GaussianLike { gamma, beta },
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Gaussian-like kernel at the distance's Hilbertian exponent.
    pub fn hilbertian(distance: DistanceSpec, gamma: f64) -> Result<Self> {
        Self::gaussian(distance, gamma, distance.hilbertian_beta())
    }

    pub fn linear(distance: DistanceSpec, origin: Item) -> Result<Self> {
        distance.validate()?;
        Ok(Self {
            distance,
            form: KernelForm::LinearWithOrigin {
                origin: Box::new(origin),
            },
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.distance.validate()?;
        if let KernelForm::GaussianLike { gamma, beta } = self.form {
            check_gamma(gamma)?;
            if !(beta > 0.0 && beta <= 1.0) {
                return Err(Error::invalid(format!("β = {beta} outside (0, 1]")));
            }
        }
        Ok(())
    }

    /// Whether the substituted kernel is positive definite by construction.
    /// `exp(−γ SW₁²)` is the standard counterexample: only `√SW₁` is Hilbertian.
    pub fn is_guaranteed_psd(&self) -> bool {
        match self.form {
            KernelForm::GaussianLike { beta, .. } => beta <= self.distance.hilbertian_beta(),
            KernelForm::LinearWithOrigin { .. } => self.distance.hilbertian_beta() == 1.0,
        }
    }

    /// Kernel value from a precomputed distance (Gaussian-like forms only).
    pub fn eval(&self, d: f64) -> Result<f64> {
        match self.form {
            KernelForm::GaussianLike { gamma, beta } => gaussian_like(gamma, beta, d),
            KernelForm::LinearWithOrigin { .. } => Err(Error::Contract(
                "linear-with-origin kernels need three distances; use linear_with_origin".into(),
            )),
        }
    }
}

/// `exp(−γ d^{2β})`
pub fn gaussian_like(gamma: f64, beta: f64, d: f64) -> Result<f64> {
    if !(d >= 0.0) {
        return Err(Error::Contract(format!("negative distance {d}")));
    }
    Ok(gaussian_like_unchecked(gamma, beta, d))
}

#[inline]
fn gaussian_like_unchecked(gamma: f64, beta: f64, d: f64) -> f64 {
    let e = if beta == 1.0 {
        d * d
    } else if beta == 0.5 {
        d
    } else {
        d.powf(2.0 * beta)
    };
    (-gamma * e).exp()
}

/// `½(d(x, x₀)² + d(y, x₀)² − d(x, y)²)`
pub fn linear_with_origin(d_x_origin: f64, d_y_origin: f64, d_xy: f64) -> Result<f64> {
    if [d_x_origin, d_y_origin, d_xy].iter().any(|d| !(*d >= 0.0)) {
        return Err(Error::Contract("negative distance".into()));
    }
    Ok(0.5 * (d_x_origin * d_x_origin + d_y_origin * d_y_origin - d_xy * d_xy))
}

/// Kernel value between two inputs.
pub fn kernel_eval(spec: &KernelSpec, a: &Item, b: &Item) -> Result<f64> {
    Ok(cross_gram(std::slice::from_ref(a), std::slice::from_ref(b), spec)?[(0, 0)])
}

enum Prepared<'a> {
    Sliced(Vec<&'a SlicedFeature>),
    Measures {
        items: Vec<&'a EmpiricalMeasure>,
        self_terms: Vec<f64>,
        gamma: f64,
    },
    Grids {
        items: Vec<&'a GridHistogram>,
        smoothed: Vec<Vec<f64>>,
        self_terms: Vec<f64>,
    },
    Weights(Vec<&'a [f64]>),
    Vectors(Vec<&'a [f64]>),
}

fn kind_error(spec: &DistanceSpec, item: &Item) -> Error {
    let got = match item {
        Item::Sliced(_) => "sliced feature",
        Item::Measure(_) => "measure",
        Item::Histogram(_) => "grid histogram",
        Item::Vector(_) => "vector",
    };
    Error::invalid(format!("{spec:?} cannot be evaluated on a {got}"))
}

fn prepare<'a>(spec: &DistanceSpec, items: &'a [Item]) -> Result<Prepared<'a>> {
    match *spec {
        DistanceSpec::Sw1 { basis_id } | DistanceSpec::Sw2 { basis_id } => items
            .iter()
            .map(|it| match it {
                Item::Sliced(f) if f.basis_id() == basis_id => Ok(f),
                Item::Sliced(f) => Err(Error::Contract(format!(
                    "feature on basis {:#x} used with a kernel bound to basis {basis_id:#x}",
                    f.basis_id()
                ))),
                other => Err(kind_error(spec, other)),
            })
            .collect::<Result<Vec<_>>>()
            .map(Prepared::Sliced),
        DistanceSpec::Mmd { inner_gamma } => {
            check_gamma(inner_gamma)?;
            match items.first() {
                Some(Item::Histogram(_)) => {
                    let grids = items
                        .iter()
                        .map(|it| match it {
                            Item::Histogram(h) => Ok(h),
                            other => Err(kind_error(spec, other)),
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let first = grids[0];
                    let gy = axis_gram(first.height(), first.row_spacing(), inner_gamma);
                    let gx = axis_gram(first.width(), first.col_spacing(), inner_gamma);
                    for g in &grids {
                        first.check_same_grid(g)?;
                    }
                    let (smoothed, self_terms) = grids
                        .par_iter()
                        .map(|h| {
                            let s = smooth_histogram(h, &gy, &gx);
                            (s.smoothed, s.self_term)
                        })
                        .unzip();
                    Ok(Prepared::Grids {
                        items: grids,
                        smoothed,
                        self_terms,
                    })
                }
                _ => {
                    let measures = items
                        .iter()
                        .map(|it| match it {
                            Item::Measure(m) => Ok(m),
                            other => Err(kind_error(spec, other)),
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let self_terms = measures
                        .par_iter()
                        .map(|m| mean_embedding_inner(m, m, inner_gamma))
                        .collect();
                    Ok(Prepared::Measures {
                        items: measures,
                        self_terms,
                        gamma: inner_gamma,
                    })
                }
            }
        }
        DistanceSpec::Hellinger | DistanceSpec::TotalVariation => items
            .iter()
            .map(|it| match it {
                Item::Histogram(h) => Ok(h.weights()),
                other => Err(kind_error(spec, other)),
            })
            .collect::<Result<Vec<_>>>()
            .map(Prepared::Weights),
        DistanceSpec::Euclidean => items
            .iter()
            .map(|it| match it {
                Item::Vector(v) => Ok(v.as_slice()),
                other => Err(kind_error(spec, other)),
            })
            .collect::<Result<Vec<_>>>()
            .map(Prepared::Vectors),
    }
}

fn pair_distance(spec: &DistanceSpec, rows: &Prepared, i: usize, cols: &Prepared, j: usize) -> f64 {
    match (rows, cols) {
        (Prepared::Sliced(a), Prepared::Sliced(b)) => {
            let p = if matches!(spec, DistanceSpec::Sw1 { .. }) {
                Order::One
            } else {
                Order::Two
            };
            p.root(sliced_power_unchecked(a[i], b[j], p))
        }
        (
            Prepared::Measures {
                items: a,
                self_terms: sa,
                gamma,
            },
            Prepared::Measures {
                items: b, self_terms: sb, ..
            },
        ) => mmd_from_terms(sa[i], sb[j], mean_embedding_inner(a[i], b[j], *gamma)),
        (
            Prepared::Grids {
                items: a, self_terms: sa, ..
            },
            Prepared::Grids {
                smoothed: eb,
                self_terms: sb,
                ..
            },
        ) => {
            let ab: f64 = a[i].weights().iter().zip(&eb[j]).map(|(x, y)| x * y).sum();
            mmd_from_terms(sa[i], sb[j], ab)
        }
        (Prepared::Weights(a), Prepared::Weights(b)) => match spec {
            DistanceSpec::Hellinger => hellinger_unchecked(a[i], b[j]),
            _ => tv_unchecked(a[i], b[j]),
        },
        (Prepared::Vectors(a), Prepared::Vectors(b)) => a[i]
            .iter()
            .zip(b[j])
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt(),
        _ => unreachable!("row and column inputs prepared for the same distance"),
    }
}

fn check_compatible(rows: &Prepared, cols: &Prepared) -> Result<()> {
    let shapes = |p: &Prepared| -> Vec<(usize, usize)> {
        match p {
            Prepared::Sliced(v) => v.iter().map(|f| (f.num_directions(), f.num_levels())).collect(),
            Prepared::Measures { items, .. } => items.iter().map(|m| (m.dim(), 0)).collect(),
            Prepared::Grids { items, .. } => items.iter().map(|h| (h.height(), h.width())).collect(),
            Prepared::Weights(v) | Prepared::Vectors(v) => v.iter().map(|w| (w.len(), 0)).collect(),
        }
    };
    let mut all = shapes(rows);
    all.extend(shapes(cols));
    if all.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::invalid("inputs do not share a common shape"));
    }
    Ok(())
}

/// `rows.len() × cols.len()` matrix of distances.
pub fn distance_matrix(spec: &DistanceSpec, rows: &[Item], cols: &[Item]) -> Result<DMatrix<f64>> {
    let pr = prepare(spec, rows)?;
    let pc = prepare(spec, cols)?;
    check_compatible(&pr, &pc)?;
    let data: Vec<Vec<f64>> = (0..rows.len())
        .into_par_iter()
        .map(|i| (0..cols.len()).map(|j| pair_distance(spec, &pr, i, &pc, j)).collect())
        .collect();
    Ok(DMatrix::from_fn(rows.len(), cols.len(), |i, j| data[i][j]))
}

/// Symmetric distance matrix with a zero diagonal; only the upper triangle
/// is evaluated and then mirrored.
pub fn distance_matrix_symmetric(spec: &DistanceSpec, items: &[Item]) -> Result<DMatrix<f64>> {
    let pr = prepare(spec, items)?;
    check_compatible(&pr, &pr)?;
    let n = items.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| ((i + 1)..n).map(|j| pair_distance(spec, &pr, i, &pr, j)).collect())
        .collect();
    let mut d = DMatrix::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            let j = i + 1 + k;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    Ok(d)
}

/// Applies a Gaussian-like form elementwise to a distance matrix.
pub fn gaussian_from_distances(distances: &DMatrix<f64>, gamma: f64, beta: f64) -> DMatrix<f64> {
    distances.map(|d| gaussian_like_unchecked(gamma, beta, d))
}

/// Symmetric `T × T` Gram matrix.
pub fn gram_matrix(items: &[Item], spec: &KernelSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let d = distance_matrix_symmetric(&spec.distance, items)?;
    match &spec.form {
        KernelForm::GaussianLike { gamma, beta } => {
            let mut k = gaussian_from_distances(&d, *gamma, *beta);
            k.fill_diagonal(1.0);
            Ok(k)
        }
        KernelForm::LinearWithOrigin { origin } => {
            let to_origin = distance_matrix(&spec.distance, items, std::slice::from_ref(origin))?;
            let n = items.len();
            Ok(DMatrix::from_fn(n, n, |i, j| {
                let (a, b) = (to_origin[(i, 0)], to_origin[(j, 0)]);
                0.5 * (a * a + b * b - d[(i, j)] * d[(i, j)])
            }))
        }
    }
}

/// `T_test × T_train` matrix whose rows are the kernel vectors `k_ℙ`.
pub fn cross_gram(test: &[Item], train: &[Item], spec: &KernelSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let d = distance_matrix(&spec.distance, test, train)?;
    match &spec.form {
        KernelForm::GaussianLike { gamma, beta } => Ok(gaussian_from_distances(&d, *gamma, *beta)),
        KernelForm::LinearWithOrigin { origin } => {
            let origin = std::slice::from_ref(origin.as_ref());
            let ta = distance_matrix(&spec.distance, test, origin)?;
            let tb = distance_matrix(&spec.distance, train, origin)?;
            Ok(DMatrix::from_fn(test.len(), train.len(), |i, j| {
                0.5 * (ta[(i, 0)].powi(2) + tb[(j, 0)].powi(2) - d[(i, j)].powi(2))
            }))
        }
    }
}

/// Smallest and largest eigenvalues of a symmetric matrix.
pub fn spectrum_extremes(gram: &DMatrix<f64>) -> (f64, f64) {
    let eig = gram.clone().symmetric_eigenvalues();
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// PSD up to a scale-relative tolerance: `λ_min ≥ −tol · λ_max`.
pub fn is_psd(gram: &DMatrix<f64>, tol: f64) -> bool {
    let (min, max) = spectrum_extremes(gram);
    min >= -tol * max.abs()
}
