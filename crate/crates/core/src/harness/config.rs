use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};

use super::grid::grid_logspace;

/// Kernel methods the harness can compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(try_from = "String")]
pub enum Method {
    Mmd,
    Sw2,
    Sw1,
    Hellinger,
    Tv,
    Rbf,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Rbf,
        Method::Mmd,
        Method::Sw2,
        Method::Sw1,
        Method::Hellinger,
        Method::Tv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Mmd => "MMD",
            Method::Sw2 => "SW2",
            Method::Sw1 => "SW1",
            Method::Hellinger => "Hellinger",
            Method::Tv => "TV",
            Method::Rbf => "RBF",
        }
    }

    pub fn is_sliced(self) -> bool {
        matches!(self, Method::Sw1 | Method::Sw2)
    }

    /// Whether the method only makes sense on image data.
    pub fn needs_images(self) -> bool {
        matches!(self, Method::Hellinger | Method::Tv | Method::Rbf)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mmd" => Ok(Method::Mmd),
            "sw2" => Ok(Method::Sw2),
            "sw1" => Ok(Method::Sw1),
            "hellinger" | "h" => Ok(Method::Hellinger),
            "tv" => Ok(Method::Tv),
            "rbf" | "euclidean" => Ok(Method::Rbf),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Parses a comma-separated method list.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let methods = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<_>>>()?;
    if methods.is_empty() {
        return Err(Error::Config("method list is empty".into()));
    }
    Ok(methods)
}

/// Log-spaced axis `k` points from `lo` to `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub k: usize,
}

impl Axis {
    pub const fn new(lo: f64, hi: f64, k: usize) -> Self {
        Self { lo, hi, k }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        grid_logspace(self.lo, self.hi, self.k)
    }
}

/// Hyperparameter grids searched on the validation split.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default)]
pub struct Grids {
    pub lambda: Axis,
    pub rbf_gamma: Axis,
    pub mmd_inner_gamma: Axis,
    pub mmd_outer_gamma: Axis,
    pub sw_gamma: Axis,
    pub hellinger_gamma: Axis,
    pub tv_gamma: Axis,
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            lambda: Axis::new(1e-8, 100.0, 25),
            rbf_gamma: Axis::new(1e-3, 1.0, 14),
            mmd_inner_gamma: Axis::new(1e-6, 100.0, 14),
            mmd_outer_gamma: Axis::new(1e-3, 100.0, 7),
            sw_gamma: Axis::new(1e-5, 100.0, 14),
            hellinger_gamma: Axis::new(1e-3, 1e3, 14),
            tv_gamma: Axis::new(1e-3, 1e3, 14),
        }
    }
}

impl Grids {
    /// Outer (kernel) bandwidths for a method.
    pub fn outer(&self, method: Method) -> Axis {
        match method {
            Method::Mmd => self.mmd_outer_gamma,
            Method::Sw1 | Method::Sw2 => self.sw_gamma,
            Method::Hellinger => self.hellinger_gamma,
            Method::Tv => self.tv_gamma,
            Method::Rbf => self.rbf_gamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for axis in [
            self.lambda,
            self.rbf_gamma,
            self.mmd_inner_gamma,
            self.mmd_outer_gamma,
            self.sw_gamma,
            self.hellinger_gamma,
            self.tv_gamma,
        ] {
            axis.values().map_err(|e| Error::Config(format!("grid {axis:?}: {e}")))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmTaskConfig {
    /// Training bags.
    pub tasks: usize,
    pub points_per_bag: usize,
    pub max_components: usize,
    pub dim: usize,
    pub val: usize,
    pub test: usize,
}

impl GmmTaskConfig {
    pub fn new(tasks: usize, points_per_bag: usize, max_components: usize, dim: usize) -> Self {
        Self {
            tasks,
            points_per_bag,
            max_components,
            dim,
            val: 50,
            test: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MnistTaskConfig {
    pub images: PathBuf,
    pub labels: PathBuf,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub max_angle_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskConfig {
    GmmModes(GmmTaskConfig),
    Mnist(MnistTaskConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: TaskConfig,
    pub methods: Vec<Method>,
    pub directions: usize,
    pub levels: usize,
    pub repeats: usize,
    pub seed: u64,
    pub grids: Grids,
    /// Directory receiving `results.csv` and `summary.md`.
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.repeats == 0 {
            return bad("repeats must be at least 1");
        }
        if self.methods.is_empty() {
            return bad("at least one method is required");
        }
        if self.directions == 0 || self.levels == 0 {
            return bad("M and N must be at least 1");
        }
        match &self.task {
            TaskConfig::GmmModes(g) => {
                if g.tasks == 0 || g.points_per_bag == 0 || g.max_components == 0 || g.dim == 0 || g.val == 0 || g.test == 0 {
                    return bad("T, n, C, r and split sizes must be positive");
                }
                if let Some(m) = self.methods.iter().find(|m| m.needs_images()) {
                    return Err(Error::Config(format!("method {m} requires image data")));
                }
            }
            TaskConfig::Mnist(m) => {
                if m.train == 0 || m.val == 0 || m.test == 0 {
                    return bad("train, val and test counts must be positive");
                }
                if !(m.max_angle_deg >= 0.0 && m.max_angle_deg <= 180.0) {
                    return bad("max angle must lie in [0, 180] degrees");
                }
            }
        }
        self.grids.validate()
    }
}

/// Plain-text (TOML) config file; keys mirror the CLI flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(rename = "T")]
    pub tasks: Option<usize>,
    pub n: Option<usize>,
    #[serde(rename = "C")]
    pub max_components: Option<usize>,
    pub r: Option<usize>,
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub max_angle_deg: Option<f64>,
    pub train: Option<usize>,
    pub val: Option<usize>,
    pub test: Option<usize>,
    pub repeats: Option<usize>,
    pub seed: Option<u64>,
    pub methods: Option<Vec<Method>>,
    #[serde(rename = "M")]
    pub directions: Option<usize>,
    #[serde(rename = "N")]
    pub levels: Option<usize>,
    pub out: Option<PathBuf>,
    pub grids: Option<Grids>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}
