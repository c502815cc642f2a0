//! End-to-end experiments: build the splits for one repeat, grid-search every
//! method on the validation split, refit the winner and score it on the test
//! split.
//!
//! Selection only ever sees the training and validation splits; the test split
//! is touched once, after the winner is fixed.

pub mod config;
pub mod grid;
pub mod report;

use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use crate::datagen::make_mode_dataset;
use crate::error::{Error, Result};
use crate::ingest::{self, GrayImage};
use crate::kernels::{distance_matrix, distance_matrix_symmetric, gaussian_from_distances, DistanceSpec, GridHistogram, Item};
use crate::krr::{self, RegularizationPath};
use crate::measures::EmpiricalMeasure;
use crate::rng;
use crate::sliced::SliceBasis;

pub use config::{ExperimentConfig, GmmTaskConfig, Grids, Method, MnistTaskConfig, TaskConfig};
pub use grid::{grid_logspace, select_best, Cell};
pub use report::{emit_report, summarize, Metric, Summary, TrialResult};

const MNIST_CLASSES: usize = 10;

/// Inputs of one split in every representation a method may ask for.
#[derive(Debug, Clone)]
pub struct Split {
    pub measures: Vec<EmpiricalMeasure>,
    /// Full-grid image histograms (images only).
    pub grids: Option<Vec<GridHistogram>>,
    /// Flattened images scaled to [0, 1] (images only).
    pub vectors: Option<Vec<Vec<f64>>>,
    pub labels: Vec<usize>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Regression on a scalar label or classification over `classes` labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    Regression,
    Classification { classes: usize },
}

impl Problem {
    pub fn metric(self) -> Metric {
        match self {
            Problem::Regression => Metric::Rmse,
            Problem::Classification { .. } => Metric::Accuracy,
        }
    }

    fn targets(self, labels: &[usize]) -> Result<DMatrix<f64>> {
        match self {
            Problem::Regression => Ok(krr::scalar_targets(&labels.iter().map(|&l| l as f64).collect::<Vec<_>>())),
            Problem::Classification { classes } => krr::encode_one_hot(labels, classes),
        }
    }

    /// Reported score (RMSE or accuracy) of predictions against labels.
    fn score(self, pred: &DMatrix<f64>, labels: &[usize]) -> Result<f64> {
        match self {
            Problem::Regression => {
                let truth: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
                krr::rmse(pred.column(0).as_slice(), &truth)
            }
            Problem::Classification { .. } => krr::accuracy(&krr::decode_rows(pred), labels),
        }
    }

    /// Selection loss: lower is better.
    fn badness(self, score: f64) -> f64 {
        match self {
            Problem::Regression => score,
            Problem::Classification { .. } => 1.0 - score,
        }
    }
}

/// Train / validation / test splits of one repeat with their shared basis.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub problem: Problem,
    pub train: Split,
    pub val: Split,
    pub test: Split,
    pub basis: SliceBasis,
}

/// The winning grid cell and every cell the selector compared.
#[derive(Debug, Clone)]
pub struct Selection {
    pub best: Cell,
    pub cells: Vec<Cell>,
}

fn seed_for(config: &ExperimentConfig, repeat: usize, label: &str) -> u64 {
    rng::derive_seed(config.seed, &[repeat as u64, rng::tag(label)])
}

fn gmm_split(g: &GmmTaskConfig, count: usize, seed: u64) -> Result<Split> {
    let bags = make_mode_dataset(count, g.points_per_bag, g.max_components, g.dim, seed)?;
    let (measures, labels) = bags.into_iter().map(|b| (b.measure, b.label)).unzip();
    Ok(Split {
        measures,
        grids: None,
        vectors: None,
        labels,
    })
}

fn image_split(images: Vec<GrayImage>, labels: Vec<usize>, methods: &[Method]) -> Result<Split> {
    let grids = images
        .iter()
        .map(ingest::image_to_grid_histogram)
        .collect::<Result<Vec<_>>>()?;
    let measures = grids.iter().map(GridHistogram::to_measure).collect::<Result<Vec<_>>>()?;
    let vectors = methods
        .contains(&Method::Rbf)
        .then(|| images.iter().map(ingest::flatten_image).collect());
    Ok(Split {
        measures,
        grids: Some(grids),
        vectors,
        labels,
    })
}

/// Per-class shuffled, disjoint, balanced index sets of the requested sizes.
pub fn balanced_splits(labels: &[u8], sizes: &[usize], classes: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        let l = usize::from(l);
        if l >= classes {
            return Err(Error::invalid(format!("label {l} outside 0..{classes}")));
        }
        by_class[l].push(i);
    }
    for (c, idx) in by_class.iter_mut().enumerate() {
        idx.shuffle(&mut rng::stream(seed, c as u64));
    }
    let mut cursor = vec![0usize; classes];
    let mut out = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let mut split = Vec::with_capacity(size);
        for (c, idx) in by_class.iter().enumerate() {
            let want = size / classes + usize::from(c < size % classes);
            let end = cursor[c] + want;
            if end > idx.len() {
                return Err(Error::invalid(format!(
                    "class {c} has {} images, fewer than the {end} requested across splits",
                    idx.len()
                )));
            }
            split.extend_from_slice(&idx[cursor[c]..end]);
            cursor[c] = end;
        }
        out.push(split);
    }
    Ok(out)
}

/// Labelled images available to the image task.
#[derive(Debug, Clone)]
pub struct ImageCorpus {
    pub images: Vec<GrayImage>,
    pub labels: Vec<u8>,
}

impl ImageCorpus {
    pub fn load(m: &MnistTaskConfig) -> Result<Self> {
        let (images, labels) = ingest::load_idx_pair(&m.images, &m.labels)?;
        Ok(Self { images, labels })
    }
}

fn mnist_dataset(
    config: &ExperimentConfig,
    m: &MnistTaskConfig,
    corpus: &ImageCorpus,
    repeat: usize,
) -> Result<(Problem, Split, Split, Split)> {
    let sizes = [m.train, m.val, m.test];
    let parts = balanced_splits(&corpus.labels, &sizes, MNIST_CLASSES, seed_for(config, repeat, "split"))?;
    let roto_seed = seed_for(config, repeat, "roto");
    let max_angle = m.max_angle_deg.to_radians();
    let mut splits = Vec::with_capacity(3);
    for idx in parts {
        let images = idx
            .iter()
            .map(|&i| {
                let img = &corpus.images[i];
                if max_angle > 0.0 {
                    ingest::roto_translate(img, max_angle, &mut rng::stream(roto_seed, i as u64))
                } else {
                    Ok(img.clone())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let labels = idx.iter().map(|&i| usize::from(corpus.labels[i])).collect();
        splits.push(image_split(images, labels, &config.methods)?);
    }
    let test = splits.pop().expect("three splits");
    let val = splits.pop().expect("three splits");
    let train = splits.pop().expect("three splits");
    Ok((Problem::Classification { classes: MNIST_CLASSES }, train, val, test))
}

/// Builds the splits and slice basis of one repeat. `corpus` is required for
/// the image task.
pub fn build_dataset(config: &ExperimentConfig, corpus: Option<&ImageCorpus>, repeat: usize) -> Result<Dataset> {
    let (problem, train, val, test, dim) = match &config.task {
        TaskConfig::GmmModes(g) => {
            let train = gmm_split(g, g.tasks, seed_for(config, repeat, "train"))?;
            let val = gmm_split(g, g.val, seed_for(config, repeat, "val"))?;
            let test = gmm_split(g, g.test, seed_for(config, repeat, "test"))?;
            (Problem::Regression, train, val, test, g.dim)
        }
        TaskConfig::Mnist(m) => {
            let corpus = corpus.ok_or_else(|| Error::Config("image task needs a loaded image corpus".into()))?;
            let (problem, train, val, test) = mnist_dataset(config, m, corpus, repeat)?;
            (problem, train, val, test, 2)
        }
    };
    let basis = SliceBasis::sample(config.directions, config.levels, dim, seed_for(config, repeat, "basis"))?;
    Ok(Dataset {
        problem,
        train,
        val,
        test,
        basis,
    })
}

/// Kernel inputs of one split for a method.
fn items(method: Method, split: &Split, basis: &SliceBasis) -> Result<Vec<Item>> {
    let missing = || Error::Config(format!("method {method} requires image data"));
    Ok(match method {
        Method::Sw1 | Method::Sw2 => {
            let features = split.measures.iter().map(|m| basis.feature(m)).collect::<Result<Vec<_>>>()?;
            if features.iter().any(|f| f.basis_id() != basis.id()) {
                return Err(Error::Contract("split features computed on a different basis".into()));
            }
            features.into_iter().map(Item::Sliced).collect()
        }
        Method::Mmd => match &split.grids {
            Some(g) => g.iter().cloned().map(Item::Histogram).collect(),
            None => split.measures.iter().cloned().map(Item::Measure).collect(),
        },
        Method::Hellinger | Method::Tv => split.grids.as_ref().ok_or_else(missing)?.iter().cloned().map(Item::Histogram).collect(),
        Method::Rbf => split.vectors.as_ref().ok_or_else(missing)?.iter().cloned().map(Item::Vector).collect(),
    })
}

/// Distances the method searches over: one per inner bandwidth for MMD.
fn distance_specs(method: Method, grids: &Grids, basis: &SliceBasis) -> Result<Vec<(Option<f64>, DistanceSpec)>> {
    Ok(match method {
        Method::Sw2 => vec![(None, DistanceSpec::Sw2 { basis_id: basis.id() })],
        Method::Sw1 => vec![(None, DistanceSpec::Sw1 { basis_id: basis.id() })],
        Method::Hellinger => vec![(None, DistanceSpec::Hellinger)],
        Method::Tv => vec![(None, DistanceSpec::TotalVariation)],
        Method::Rbf => vec![(None, DistanceSpec::Euclidean)],
        Method::Mmd => grids
            .mmd_inner_gamma
            .values()?
            .into_iter()
            .map(|g| (Some(g), DistanceSpec::Mmd { inner_gamma: g }))
            .collect(),
    })
}

fn train_gram(d: &DMatrix<f64>, gamma: f64, beta: f64) -> DMatrix<f64> {
    let mut k = gaussian_from_distances(d, gamma, beta);
    k.fill_diagonal(1.0);
    k
}

/// Grid search over (inner γ, γ, λ) scored on the validation split only.
pub fn select_hyperparameters(
    method: Method,
    problem: Problem,
    train: &Split,
    val: &Split,
    basis: &SliceBasis,
    grids: &Grids,
) -> Result<Selection> {
    let train_items = items(method, train, basis)?;
    let val_items = items(method, val, basis)?;
    let targets = problem.targets(&train.labels)?;
    let lambdas = grids.lambda.values()?;
    let gammas = grids.outer(method).values()?;
    let mut cells = Vec::new();
    for (inner_gamma, spec) in distance_specs(method, grids, basis)? {
        let beta = spec.hilbertian_beta();
        let blocks = distance_matrix_symmetric(&spec, &train_items)
            .and_then(|dtt| Ok((dtt, distance_matrix(&spec, &val_items, &train_items)?)));
        for &gamma in &gammas {
            let failed = |lambda| Cell {
                inner_gamma,
                gamma,
                lambda,
                badness: f64::INFINITY,
            };
            let Ok((dtt, dvt)) = &blocks else {
                cells.extend(lambdas.iter().map(|&l| failed(l)));
                continue;
            };
            let k_val = gaussian_from_distances(dvt, gamma, beta);
            let path = match RegularizationPath::new(&train_gram(dtt, gamma, beta), &targets) {
                Ok(p) => p,
                Err(_) => {
                    cells.extend(lambdas.iter().map(|&l| failed(l)));
                    continue;
                }
            };
            for &lambda in &lambdas {
                let score = path
                    .solve(lambda)
                    .and_then(|model| model.predict(&k_val))
                    .and_then(|pred| problem.score(&pred, &val.labels));
                cells.push(match score {
                    Ok(s) if s.is_finite() => Cell {
                        badness: problem.badness(s),
                        ..failed(lambda)
                    },
                    _ => failed(lambda),
                });
            }
        }
    }
    let best = select_best(&cells).ok_or_else(|| Error::Config("empty hyperparameter grid".into()))?;
    let best = cells[best];
    if !best.badness.is_finite() {
        return Err(Error::Numerical(format!("every grid cell failed for {method}")));
    }
    Ok(Selection { best, cells })
}

fn find_spec(method: Method, grids: &Grids, basis: &SliceBasis, inner: Option<f64>) -> Result<DistanceSpec> {
    distance_specs(method, grids, basis)?
        .into_iter()
        .find(|(g, _)| *g == inner)
        .map(|(_, s)| s)
        .ok_or_else(|| Error::Contract("selected bandwidth not in grid".into()))
}

/// Selects hyperparameters, refits on the training split and scores the
/// test split.
pub fn evaluate_method(method: Method, data: &Dataset, grids: &Grids, repeat: usize) -> Result<TrialResult> {
    let start = Instant::now();
    let selection = select_hyperparameters(method, data.problem, &data.train, &data.val, &data.basis, grids)?;
    let best = selection.best;
    let spec = find_spec(method, grids, &data.basis, best.inner_gamma)?;
    let beta = spec.hilbertian_beta();
    let train_items = items(method, &data.train, &data.basis)?;
    let test_items = items(method, &data.test, &data.basis)?;
    let dtt = distance_matrix_symmetric(&spec, &train_items)?;
    let model = krr::fit(&train_gram(&dtt, best.gamma, beta), &data.problem.targets(&data.train.labels)?, best.lambda)?;
    let dst = distance_matrix(&spec, &test_items, &train_items)?;
    let pred = model.predict(&gaussian_from_distances(&dst, best.gamma, beta))?;
    let test_score = data.problem.score(&pred, &data.test.labels)?;
    let val_score = match data.problem {
        Problem::Regression => best.badness,
        Problem::Classification { .. } => 1.0 - best.badness,
    };
    if !test_score.is_finite() {
        return Err(Error::Numerical("non-finite test score".into()));
    }
    Ok(TrialResult {
        method,
        repeat,
        metric: data.problem.metric(),
        lambda: best.lambda,
        gamma: best.gamma,
        inner_gamma: best.inner_gamma,
        val_score,
        test_score,
        seconds: start.elapsed().as_secs_f64(),
        cells_evaluated: selection.cells.len(),
    })
}

/// Runs every repeat and method, calling `progress` after each trial.
pub fn run_experiment_with(
    config: &ExperimentConfig,
    mut progress: impl FnMut(&TrialResult),
) -> Result<Vec<TrialResult>> {
    config.validate()?;
    let corpus = match &config.task {
        TaskConfig::Mnist(m) => Some(ImageCorpus::load(m)?),
        TaskConfig::GmmModes(_) => None,
    };
    let mut results = Vec::with_capacity(config.repeats * config.methods.len());
    for repeat in 0..config.repeats {
        let data = build_dataset(config, corpus.as_ref(), repeat)
            .map_err(|e| e.in_context(format!("repeat {repeat}: building data")))?;
        for &method in &config.methods {
            let result = evaluate_method(method, &data, &config.grids, repeat)
                .map_err(|e| e.in_context(format!("repeat {repeat}, method {method}")))?;
            progress(&result);
            results.push(result);
        }
    }
    Ok(results)
}

/// Runs the experiment and, if an output directory is configured, writes
/// the report there.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<TrialResult>> {
    let results = run_experiment_with(config, |_| {})?;
    if let Some(dir) = &config.out {
        let title = match config.task {
            TaskConfig::GmmModes(_) => "Mode counting",
            TaskConfig::Mnist(_) => "Image classification",
        };
        emit_report(&results, dir, title)?;
    }
    Ok(results)
}
