//! Kernel ridge regression in the dual.
//!
//! Given a training Gram matrix `K` (T × T) and targets `Y` (T × q), the
//! estimator is `f(ℙ) = k_ℙᵀ α` with `α = (K + λT I)⁻¹ Y`. The regularizer
//! is scaled by `T` inside [`fit`]; callers pass λ as it appears in the grid.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::kernels::{cross_gram, gram_matrix, Item, KernelSpec};

/// How targets were encoded for regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetEncoding {
    Scalar,
    OneHot { classes: usize },
}

/// Fitted dual coefficients.
#[derive(Debug, Clone)]
pub struct KrrModel {
    dual_coefficients: DMatrix<f64>,
    lambda: f64,
    encoding: TargetEncoding,
}

impl KrrModel {
    pub fn dual_coefficients(&self) -> &DMatrix<f64> {
        &self.dual_coefficients
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn encoding(&self) -> TargetEncoding {
        self.encoding
    }

    pub fn with_encoding(mut self, encoding: TargetEncoding) -> Self {
        self.encoding = encoding;
        self
    }

    pub fn train_size(&self) -> usize {
        self.dual_coefficients.nrows()
    }

    /// Predictions for a batch of kernel rows (`B × T`), returned as `B × q`.
    pub fn predict(&self, k_rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if k_rows.ncols() != self.train_size() {
            return Err(Error::DimensionMismatch {
                expected: self.train_size(),
                got: k_rows.ncols(),
            });
        }
        Ok(k_rows * &self.dual_coefficients)
    }

    /// Prediction for a single kernel vector.
    pub fn predict_one(&self, k_row: &[f64]) -> Result<Vec<f64>> {
        let row = DMatrix::from_row_slice(1, k_row.len(), k_row);
        Ok(self.predict(&row)?.row(0).iter().copied().collect())
    }
}

fn check_inputs(gram: &DMatrix<f64>, targets: &DMatrix<f64>, lambda: f64) -> Result<()> {
    if !gram.is_square() {
        return Err(Error::invalid("Gram matrix must be square"));
    }
    if targets.nrows() != gram.nrows() {
        return Err(Error::DimensionMismatch {
            expected: gram.nrows(),
            got: targets.nrows(),
        });
    }
    if gram.nrows() == 0 {
        return Err(Error::invalid("no training points"));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("λ = {lambda} must be positive")));
    }
    if targets.iter().any(|y| !y.is_finite()) || gram.iter().any(|k| !k.is_finite()) {
        return Err(Error::invalid("non-finite Gram entry or target"));
    }
    Ok(())
}

/// Solves `(K + λT I) α = Y` by Cholesky factorization, retrying once with
/// diagonal jitter `1e-10 · tr(K)/T` if the factorization fails.
pub fn fit(gram: &DMatrix<f64>, targets: &DMatrix<f64>, lambda: f64) -> Result<KrrModel> {
    check_inputs(gram, targets, lambda)?;
    let t = gram.nrows();
    let shift = lambda * t as f64;
    let mut system = gram.clone();
    for i in 0..t {
        system[(i, i)] += shift;
    }
    let chol = match system.clone().cholesky() {
        Some(c) => c,
        None => {
            let jitter = 1e-10 * gram.trace().abs() / t as f64;
            let mut retry = system.clone();
            for i in 0..t {
                retry[(i, i)] += jitter;
            }
            retry.cholesky().ok_or_else(|| {
                Error::Numerical(format!(
                    "Cholesky factorization failed for K + λT I (λ = {lambda}) even after jitter {jitter:e}"
                ))
            })?
        }
    };
    let dual = chol.solve(targets);
    let encoding = if targets.ncols() == 1 {
        TargetEncoding::Scalar
    } else {
        TargetEncoding::OneHot {
            classes: targets.ncols(),
        }
    };
    Ok(KrrModel {
        dual_coefficients: dual,
        lambda,
        encoding,
    })
}

/// Eigendecomposition of a training Gram, reused to solve for many λ.
///
/// `α(λ) = U (Λ + λT)⁻¹ Uᵀ Y`; negative roundoff eigenvalues are kept as is,
/// which is harmless while `λT` dominates them.
pub struct RegularizationPath {
    vectors: DMatrix<f64>,
    values: DVector<f64>,
    projected_targets: DMatrix<f64>,
}

impl RegularizationPath {
    pub fn new(gram: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<Self> {
        check_inputs(gram, targets, 1.0)?;
        let eig = SymmetricEigen::new(gram.clone());
        let projected_targets = eig.eigenvectors.transpose() * targets;
        Ok(Self {
            vectors: eig.eigenvectors,
            values: eig.eigenvalues,
            projected_targets,
        })
    }

    /// Dual coefficients for one λ.
    pub fn solve(&self, lambda: f64) -> Result<KrrModel> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("λ = {lambda} must be positive")));
        }
        let t = self.values.len() as f64;
        let mut scaled = self.projected_targets.clone();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            let denom = self.values[i] + lambda * t;
            if denom <= 0.0 {
                return Err(Error::Numerical(format!(
                    "K + λT I is not positive definite at λ = {lambda}"
                )));
            }
            row /= denom;
        }
        let q = scaled.ncols();
        Ok(KrrModel {
            dual_coefficients: &self.vectors * scaled,
            lambda,
            encoding: if q == 1 {
                TargetEncoding::Scalar
            } else {
                TargetEncoding::OneHot { classes: q }
            },
        })
    }
}

/// KRR model bound to its training inputs and kernel.
#[derive(Debug, Clone)]
pub struct DistributionRegressor {
    train: Vec<Item>,
    spec: KernelSpec,
    model: KrrModel,
}

impl DistributionRegressor {
    pub fn fit(train: Vec<Item>, targets: &DMatrix<f64>, spec: KernelSpec, lambda: f64) -> Result<Self> {
        let gram = gram_matrix(&train, &spec)?;
        let model = fit(&gram, targets, lambda)?;
        Ok(Self { train, spec, model })
    }

    pub fn model(&self) -> &KrrModel {
        &self.model
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn predict(&self, items: &[Item]) -> Result<DMatrix<f64>> {
        let k = cross_gram(items, &self.train, &self.spec)?;
        self.model.predict(&k)
    }
}

/// Scalar targets as a `T × 1` matrix.
pub fn scalar_targets(values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(values.len(), 1, values)
}

/// One-hot rows for labels in `[0, classes)`.
pub fn encode_one_hot(labels: &[usize], classes: usize) -> Result<DMatrix<f64>> {
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::invalid(format!("label {bad} outside [0, {classes})")));
    }
    Ok(DMatrix::from_fn(labels.len(), classes, |i, j| {
        if labels[i] == j {
            1.0
        } else {
            0.0
        }
    }))
}

/// Index of the largest entry; ties go to the lowest index.
pub fn decode_argmax(prediction: &[f64]) -> Result<usize> {
    if prediction.is_empty() {
        return Err(Error::invalid("empty prediction"));
    }
    let mut best = 0;
    for (i, &v) in prediction.iter().enumerate().skip(1) {
        if v > prediction[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Argmax of every row.
pub fn decode_rows(predictions: &DMatrix<f64>) -> Vec<usize> {
    predictions
        .row_iter()
        .map(|r| decode_argmax(&r.iter().copied().collect::<Vec<_>>()).expect("non-empty row"))
        .collect()
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::invalid("rmse of empty vectors"));
    }
    let mse = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64;
    Ok(mse.sqrt())
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::invalid("accuracy of empty vectors"));
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Gaussian Gram of 1D points.
    fn rbf_gram(xs: &[f64], gamma: f64) -> DMatrix<f64> {
        DMatrix::from_fn(xs.len(), xs.len(), |i, j| (-gamma * (xs[i] - xs[j]).powi(2)).exp())
    }

    #[test]
    fn single_point_closed_form() {
        let k = DMatrix::from_element(1, 1, 1.0);
        let m = fit(&k, &scalar_targets(&[1.0]), 1.0).unwrap();
        assert!((m.dual_coefficients()[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((m.predict_one(&[1.0]).unwrap()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_targets_give_zero_model() {
        let k = rbf_gram(&[0.0, 1.0, 2.5], 1.0);
        let m = fit(&k, &scalar_targets(&[0.0, 0.0, 0.0]), 0.1).unwrap();
        assert!(m.dual_coefficients().iter().all(|&a| a == 0.0));
        assert_eq!(m.predict_one(&[0.3, 0.2, 0.9]).unwrap(), vec![0.0]);
    }

    #[test]
    fn interpolation_limit() {
        let xs = [0.0, 1.0, 2.0, 3.5, 5.0];
        let k = rbf_gram(&xs, 1.0);
        let y = scalar_targets(&[1.0, -2.0, 0.5, 3.0, 0.0]);
        let m = fit(&k, &y, 1e-10).unwrap();
        let fitted = m.predict(&k).unwrap();
        assert!((fitted - &y).abs().max() < 1e-4);
    }

    #[test]
    fn predict_is_linear_in_rows() {
        let k = rbf_gram(&[0.0, 0.7, 1.9], 0.5);
        let m = fit(&k, &scalar_targets(&[1.0, 2.0, 3.0]), 0.01).unwrap();
        assert_eq!(m.predict_one(&[0.0, 0.0, 0.0]).unwrap(), vec![0.0]);
        assert_eq!(m.predict_one(&[0.0, 1.0, 0.0]).unwrap()[0], m.dual_coefficients()[(1, 0)]);
        assert!(m.predict_one(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn residual_bound() {
        let k = rbf_gram(&[0.0, 0.1, 0.2, 2.0, 2.05, 4.0], 2.0);
        let y = DMatrix::from_fn(6, 2, |i, j| (i * 3 + j) as f64 - 4.0);
        let lambda = 1e-3;
        let m = fit(&k, &y, lambda).unwrap();
        let mut sys = k.clone();
        for i in 0..6 {
            sys[(i, i)] += lambda * 6.0;
        }
        let residual = (&sys * m.dual_coefficients() - &y).abs().max();
        assert!(residual <= 1e-8 * (1.0 + y.abs().max()));
        assert_eq!(m.encoding(), TargetEncoding::OneHot { classes: 2 });
    }

    #[test]
    fn singular_gram_is_rescued_by_ridge() {
        let k = DMatrix::from_element(4, 4, 1.0);
        let m = fit(&k, &scalar_targets(&[1.0, 1.0, 1.0, 1.0]), 1e-6).unwrap();
        assert!(m.dual_coefficients().iter().all(|a| a.is_finite()));
    }

    #[test]
    fn indefinite_system_reports_numerical_error() {
        let k = DMatrix::from_row_slice(2, 2, &[-5.0, 0.0, 0.0, 1.0]);
        assert!(matches!(fit(&k, &scalar_targets(&[1.0, 1.0]), 0.1), Err(Error::Numerical(_))));
    }

    #[test]
    fn input_errors() {
        let k = DMatrix::from_element(2, 2, 1.0);
        assert!(fit(&k, &scalar_targets(&[1.0]), 1.0).is_err());
        assert!(fit(&k, &scalar_targets(&[1.0, 2.0]), 0.0).is_err());
        assert!(fit(&k, &scalar_targets(&[1.0, f64::NAN]), 1.0).is_err());
    }

    #[test]
    fn regularization_path_matches_cholesky() {
        let xs = [0.0, 0.3, 1.1, 2.0, 2.2, 3.9, 5.0];
        let k = rbf_gram(&xs, 0.8);
        let y = encode_one_hot(&[0, 1, 2, 0, 1, 2, 2], 3).unwrap();
        let path = RegularizationPath::new(&k, &y).unwrap();
        for lambda in [1e-6, 1e-3, 0.1, 10.0] {
            let a = path.solve(lambda).unwrap();
            let b = fit(&k, &y, lambda).unwrap();
            let diff = (a.dual_coefficients() - b.dual_coefficients()).abs().max();
            assert!(diff < 1e-7 * (1.0 + b.dual_coefficients().abs().max()), "λ={lambda}: {diff}");
        }
    }

    #[test]
    fn one_hot_and_argmax() {
        let y = encode_one_hot(&[2], 4).unwrap();
        assert_eq!(y.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 1.0, 0.0]);
        assert!(encode_one_hot(&[4], 4).is_err());
        assert_eq!(decode_argmax(&[0.1, 0.7, 0.2]).unwrap(), 1);
        assert_eq!(decode_argmax(&[0.5, 0.5]).unwrap(), 0);
        assert!(decode_argmax(&[]).is_err());
    }

    #[test]
    fn metrics() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 3.5355).abs() < 1e-4);
        assert_eq!(accuracy(&[1, 2], &[1, 2]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 3], &[1, 2]).unwrap(), 0.5);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(accuracy(&[1], &[]).is_err());
    }

    fn arb_problem() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..12).prop_flat_map(|t| {
            (
                prop::collection::vec(-3.0f64..3.0, t),
                prop::collection::vec(-5.0f64..5.0, t),
            )
        })
    }

    proptest! {
        #[test]
        fn training_mse_monotone_in_lambda((xs, ys) in arb_problem()) {
            let k = rbf_gram(&xs, 1.0);
            let y = scalar_targets(&ys);
            let mut prev = -1.0;
            for e in -8..=2 {
                let m = fit(&k, &y, 10f64.powi(e)).unwrap();
                let fitted: Vec<f64> = m.predict(&k).unwrap().iter().copied().collect();
                let mse = rmse(&fitted, &ys).unwrap().powi(2);
                prop_assert!(mse >= prev - 1e-9, "λ=1e{}: {} < {}", e, mse, prev);
                prev = mse;
            }
        }

        #[test]
        fn permutation_equivariance((xs, ys) in arb_problem(), probe in -3.0f64..3.0, rot in 0usize..12) {
            let t = xs.len();
            let perm: Vec<usize> = (0..t).map(|i| (i + rot) % t).collect();
            let xs2: Vec<f64> = perm.iter().map(|&i| xs[i]).collect();
            let ys2: Vec<f64> = perm.iter().map(|&i| ys[i]).collect();
            let row = |x: &[f64]| x.iter().map(|xi| (-(xi - probe).powi(2)).exp()).collect::<Vec<_>>();
            let a = fit(&rbf_gram(&xs, 1.0), &scalar_targets(&ys), 0.01).unwrap().predict_one(&row(&xs)).unwrap()[0];
            let b = fit(&rbf_gram(&xs2, 1.0), &scalar_targets(&ys2), 0.01).unwrap().predict_one(&row(&xs2)).unwrap()[0];
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }

        #[test]
        fn target_scaling((xs, ys) in arb_problem(), c in -4.0f64..4.0) {
            let k = rbf_gram(&xs, 1.0);
            let base = fit(&k, &scalar_targets(&ys), 0.05).unwrap().predict(&k).unwrap();
            let scaled_y: Vec<f64> = ys.iter().map(|y| c * y).collect();
            let scaled = fit(&k, &scalar_targets(&scaled_y), 0.05).unwrap().predict(&k).unwrap();
            prop_assert!((scaled - base * c).abs().max() <= 1e-10 * (1.0 + c.abs() * 5.0));
        }

        #[test]
        fn agrees_with_dense_lu((xs, ys) in arb_problem(), lambda in 1e-4f64..1.0) {
            let k = rbf_gram(&xs, 0.7);
            let t = xs.len();
            let m = fit(&k, &scalar_targets(&ys), lambda).unwrap();
            let sys = &k + DMatrix::identity(t, t) * (lambda * t as f64);
            let direct = sys.lu().solve(&scalar_targets(&ys)).unwrap();
            prop_assert!((m.dual_coefficients() - direct).abs().max() <= 1e-10 * (1.0 + ys.iter().fold(0.0f64, |a, y| a.max(y.abs())) / lambda));
        }
    }
}
