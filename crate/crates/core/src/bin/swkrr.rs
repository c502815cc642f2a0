use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use swkrr::checks;
use swkrr::harness::config::{parse_methods, ConfigFile};
use swkrr::harness::report::markdown_summary;
use swkrr::harness::{run_experiment_with, emit_report, ExperimentConfig, GmmTaskConfig, Method, MnistTaskConfig, TaskConfig};
use swkrr::Error;

#[derive(Parser)]
#[command(name = "swkrr", version, about = "Distribution regression with sliced-Wasserstein kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count Gaussian-mixture components from sample bags.
    Gmm(GmmArgs),
    /// Classify (optionally roto-translated) digit images as histograms.
    Mnist(MnistArgs),
    /// Run the numerical self-checks.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    /// TOML file whose keys mirror the flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of MMD, SW2, SW1, Hellinger, TV, RBF.
    #[arg(long)]
    methods: Option<String>,
    /// Number of slice directions.
    #[arg(long = "M")]
    directions: Option<usize>,
    /// Number of quantile levels.
    #[arg(long = "N")]
    levels: Option<usize>,
    /// Output directory for results.csv and summary.md.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GmmArgs {
    /// Training bags.
    #[arg(long = "T")]
    tasks: Option<usize>,
    /// Points per bag.
    #[arg(long)]
    n: Option<usize>,
    /// Maximum number of mixture components.
    #[arg(long = "C")]
    max_components: Option<usize>,
    /// Dimension.
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    val: Option<usize>,
    #[arg(long)]
    test: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct MnistArgs {
    #[arg(long)]
    images: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long = "max-angle-deg")]
    max_angle_deg: Option<f64>,
    #[arg(long)]
    train: Option<usize>,
    #[arg(long)]
    val: Option<usize>,
    #[arg(long)]
    test: Option<usize>,
    #[command(flatten)]
    common: Common,
}

fn load_file(path: &Option<PathBuf>) -> Result<ConfigFile, Error> {
    path.as_deref().map_or_else(|| Ok(ConfigFile::default()), ConfigFile::load)
}

fn finish(
    task: TaskConfig,
    file: ConfigFile,
    c: Common,
    default_methods: &[Method],
    default_out: &str,
) -> Result<ExperimentConfig, Error> {
    let methods = match c.methods {
        Some(list) => parse_methods(&list)?,
        None => file.methods.unwrap_or_else(|| default_methods.to_vec()),
    };
    Ok(ExperimentConfig {
        task,
        methods,
        directions: c.directions.or(file.directions).unwrap_or(100),
        levels: c.levels.or(file.levels).unwrap_or(100),
        repeats: c.repeats.or(file.repeats).unwrap_or(5),
        seed: c.seed.or(file.seed).unwrap_or(0),
        grids: file.grids.unwrap_or_default(),
        out: Some(c.out.or(file.out).unwrap_or_else(|| PathBuf::from(default_out))),
    })
}

fn gmm_config(a: GmmArgs) -> Result<ExperimentConfig, Error> {
    let file = load_file(&a.common.config)?;
    let mut task = GmmTaskConfig::new(
        a.tasks.or(file.tasks).unwrap_or(100),
        a.n.or(file.n).unwrap_or(50),
        a.max_components.or(file.max_components).unwrap_or(2),
        a.r.or(file.r).unwrap_or(2),
    );
    task.val = a.val.or(file.val).unwrap_or(task.val);
    task.test = a.test.or(file.test).unwrap_or(task.test);
    finish(TaskConfig::GmmModes(task), file, a.common, &[Method::Mmd, Method::Sw2, Method::Sw1], "results/gmm")
}

fn mnist_config(a: MnistArgs) -> Result<ExperimentConfig, Error> {
    let file = load_file(&a.common.config)?;
    let task = MnistTaskConfig {
        images: a
            .images
            .or(file.images.clone())
            .unwrap_or_else(|| PathBuf::from("data/mnist/images-idx3-ubyte.gz")),
        labels: a
            .labels
            .or(file.labels.clone())
            .unwrap_or_else(|| PathBuf::from("data/mnist/labels-idx1-ubyte.gz")),
        train: a.train.or(file.train).unwrap_or(1000),
        val: a.val.or(file.val).unwrap_or(300),
        test: a.test.or(file.test).unwrap_or(500),
        max_angle_deg: a.max_angle_deg.or(file.max_angle_deg).unwrap_or(0.0),
    };
    finish(
        TaskConfig::Mnist(task),
        file,
        a.common,
        &[Method::Rbf, Method::Mmd, Method::Sw2, Method::Sw1],
        "results/mnist",
    )
}

fn run(config: Result<ExperimentConfig, Error>, title: &str) -> ExitCode {
    let config = match config.and_then(|c| c.validate().map(|()| c)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("invalid configuration: {e}");
            return ExitCode::from(2);
        }
    };
    let results = run_experiment_with(&config, |r| {
        eprintln!(
            "repeat {} {:>9}: val {:.4} test {:.4}  λ={:e} {}  ({:.1}s)",
            r.repeat,
            r.method,
            r.val_score,
            r.test_score,
            r.lambda,
            r.chosen_gammas(),
            r.seconds
        );
    });
    let results = match results {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let dir = config.out.as_deref().expect("output directory set");
    match emit_report(&results, dir, title) {
        Ok((csv, md)) => {
            print!("{}", markdown_summary(&results, title));
            eprintln!("wrote {} and {}", csv.display(), md.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Gmm(a) => run(gmm_config(a), "Mode counting"),
        Command::Mnist(a) => run(mnist_config(a), "Image classification"),
        Command::Check { seed } => {
            let outcomes = checks::run_all(seed);
            for o in &outcomes {
                println!("{}", o.line());
            }
            if outcomes.iter().all(|o| o.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
