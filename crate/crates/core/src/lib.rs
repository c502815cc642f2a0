//! Distribution regression with sliced-Wasserstein kernels.
//!
//! Inputs are probability distributions observed through finite sample bags.
//! Each bag becomes an [`EmpiricalMeasure`]; a shared [`SliceBasis`] of random
//! directions and quantile levels maps every measure to a fixed-size
//! [`SlicedFeature`] whose ℓ_p distance approximates the sliced Wasserstein
//! distance. Substituting that distance into a Gaussian-like form gives a
//! positive-definite kernel on distributions, which drives kernel ridge
//! regression in [`krr`].
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`measures`] | weighted point clouds, projections, generalized inverse CDFs |
//! | [`ot1d`] | closed-form 1D Wasserstein distances and an LP oracle |
//! | [`sliced`] | Monte-Carlo slice bases, feature maps, sliced distances |
//! | [`kernels`] | SW / MMD / Hellinger / TV / RBF substitution kernels, Gram matrices |
//! | [`krr`] | dual kernel ridge regression, one-hot encoding, metrics |
//! | [`datagen`] | Gaussian-mixture mode-counting task generator |
//! | [`ingest`] | IDX image files, roto-translation, image histograms |
//! | [`harness`] | grid search, repeated trials, CSV/markdown reports |
//! | [`checks`] | numerical acceptance checks shared by the CLI and tests |

pub mod cache;
pub mod checks;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod ingest;
pub mod kernels;
pub mod krr;
pub mod measures;
pub mod ot1d;
pub mod rng;
pub mod sliced;

pub use error::{Error, Result};
pub use kernels::{DistanceSpec, Item, KernelForm, KernelSpec};
pub use krr::{KrrModel, TargetEncoding};
pub use measures::{EmpiricalMeasure, SortedProjection};
pub use sliced::{SliceBasis, SlicedFeature};
