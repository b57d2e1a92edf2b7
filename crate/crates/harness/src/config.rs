//! Experiment configuration files.

use std::path::{Path, PathBuf};

use bis_core::sampler::{BisConfig, HyperMode, RboConfig};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Version of every file format the harness writes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bis,
    StandardIs,
    RandomizedBo,
}

impl Method {
    /// Short label used in file names and plot columns.
    pub fn label(self) -> &'static str {
        match self {
            Method::Bis => "bis",
            Method::StandardIs => "qmc",
            Method::RandomizedBo => "rbo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum TargetSpec {
    Gaussian,
    Bimodal,
    Banana,
    /// Truncated 1-D normal.
    Normal {
        mean: f64,
        sd: f64,
        lower: f64,
        upper: f64,
    },
    #[serde(rename = "gandk")]
    GAndK {
        #[serde(default = "gandk_theta")]
        theta_true: Vec<f64>,
        #[serde(default = "gandk_n")]
        n_obs: usize,
        #[serde(default)]
        data_seed: u64,
        /// One value per line; replaces the synthetic dataset.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dataset: Option<PathBuf>,
        #[serde(default = "gandk_c")]
        c: f64,
    },
    Lorenz {
        #[serde(default = "lorenz_theta")]
        theta_true: Vec<f64>,
        #[serde(default = "lorenz_replicates")]
        replicates: usize,
        #[serde(default)]
        data_seed: u64,
        /// `name,value` rows with `s0..s5` and `x0..`; replaces the synthetic
        /// observation.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        observed: Option<PathBuf>,
    },
}

fn gandk_theta() -> Vec<f64> {
    vec![3.0, 1.0, 2.0, 0.5]
}
fn gandk_n() -> usize {
    1000
}
fn gandk_c() -> f64 {
    bis_core::targets::gandk::DEFAULT_C
}
fn lorenz_theta() -> Vec<f64> {
    vec![2.0, 0.1]
}
fn lorenz_replicates() -> usize {
    10_000
}

impl TargetSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TargetSpec::Gaussian => "gaussian",
            TargetSpec::Bimodal => "bimodal",
            TargetSpec::Banana => "banana",
            TargetSpec::Normal { .. } => "normal",
            TargetSpec::GAndK { .. } => "gandk",
            TargetSpec::Lorenz { .. } => "lorenz",
        }
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self, TargetSpec::Lorenz { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RboSection {
    pub starts: usize,
    pub steps: usize,
    pub merge_radius: f64,
}

impl Default for RboSection {
    fn default() -> Self {
        let d = RboConfig::default();
        Self {
            starts: d.starts,
            steps: d.steps,
            merge_radius: d.merge_radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSpec {
    pub mmd_bandwidth: f64,
    /// Halton nodes for the final TVD; 0 disables it.
    pub tvd_nodes: usize,
    /// MMD checkpoints; every `N0` evaluations up to `N` if unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<usize>>,
}

impl Default for MetricSpec {
    fn default() -> Self {
        Self {
            mmd_bandwidth: 0.1,
            tvd_nodes: 10_000,
            checkpoints: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSpec {
    pub count: usize,
    /// Seed of the target instance used to build the reference; only
    /// stochastic targets depend on it.
    pub seed: u64,
    /// Cache directory; `<output_dir>/reference` if unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        Self {
            count: 100_000,
            seed: 0,
            cache_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Label for output columns; the method label if unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub target: TargetSpec,
    pub method: Method,
    #[serde(default)]
    pub bis: BisConfig,
    #[serde(default)]
    pub rbo: RboSection,
    #[serde(default)]
    pub metrics: MetricSpec,
    #[serde(default)]
    pub reference: ReferenceSpec,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// A config with default sections.
    pub fn new(
        target: TargetSpec,
        method: Method,
        bis: BisConfig,
        seeds: Vec<u64>,
        output_dir: impl Into<PathBuf>,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            label: None,
            target,
            method,
            bis,
            rbo: RboSection::default(),
            metrics: MetricSpec::default(),
            reference: ReferenceSpec::default(),
            seeds,
            output_dir: output_dir.into(),
        }
    }

    /// Reads a TOML file. Relative paths inside it are resolved against the
    /// file's directory. The result is validated.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg: Self = toml::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        if let Some(p) = self.reference.cache_dir.as_mut() {
            fix(p);
        }
        match &mut self.target {
            TargetSpec::GAndK {
                dataset: Some(p), ..
            } => fix(p),
            TargetSpec::Lorenz {
                observed: Some(p), ..
            } => fix(p),
            _ => {}
        }
    }

    pub fn label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| self.method.label().to_string())
    }

    pub fn budget(&self) -> usize {
        self.bis.budget
    }

    pub fn reference_dir(&self) -> PathBuf {
        self.reference
            .cache_dir
            .clone()
            .unwrap_or_else(|| self.output_dir.join("reference"))
    }

    /// MMD checkpoints in increasing order, ending at `N`.
    pub fn checkpoints(&self) -> Vec<usize> {
        let n = self.bis.budget;
        let mut c = match &self.metrics.checkpoints {
            Some(c) => c.iter().copied().filter(|&k| k >= 1 && k <= n).collect(),
            None => {
                let step = self.bis.n_initial().max(1);
                (1..=n / step).map(|i| i * step).collect::<Vec<_>>()
            }
        };
        c.push(n);
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn rbo_config(&self, seed: u64) -> RboConfig {
        RboConfig {
            bis: BisConfig {
                seed,
                ..self.bis.clone()
            },
            starts: self.rbo.starts,
            steps: self.rbo.steps,
            merge_radius: self.rbo.merge_radius,
        }
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if self.method != Method::StandardIs {
            self.bis
                .validate()
                .map_err(|e| HarnessError::Config(e.to_string()))?;
        } else if self.bis.budget == 0 {
            return bad("budget must be positive".into());
        }
        if self.reference.count < 10 * self.bis.budget {
            return bad(format!(
                "reference count {} is below 10 x budget ({})",
                self.reference.count,
                10 * self.bis.budget
            ));
        }
        if !(self.metrics.mmd_bandwidth > 0.0) {
            return bad("mmd_bandwidth must be positive".into());
        }
        if self.metrics.tvd_nodes > self.reference.count {
            return bad(format!(
                "tvd_nodes {} exceeds the reference count {}; TVD nodes are the first reference points",
                self.metrics.tvd_nodes, self.reference.count
            ));
        }
        match &self.target {
            TargetSpec::Normal {
                sd, lower, upper, ..
            } if !(*sd > 0.0 && lower < upper) => {
                return bad("normal target needs sd > 0 and lower < upper".into())
            }
            TargetSpec::GAndK {
                theta_true,
                dataset,
                ..
            } => {
                if theta_true.len() != 4 {
                    return bad("g-and-k theta_true needs 4 entries".into());
                }
                if let Some(p) = dataset {
                    if !p.is_file() {
                        return bad(format!("dataset {} does not exist", p.display()));
                    }
                }
            }
            TargetSpec::Lorenz {
                theta_true,
                replicates,
                observed,
                ..
            } => {
                if theta_true.len() != 2 {
                    return bad("Lorenz theta_true needs 2 entries".into());
                }
                if *replicates < 8 {
                    return bad("Lorenz needs at least 8 replicates".into());
                }
                if let Some(p) = observed {
                    if !p.is_file() {
                        return bad(format!("observed summaries {} do not exist", p.display()));
                    }
                }
            }
            _ => {}
        }
        // Method/target compatibility.
        match self.method {
            Method::RandomizedBo => {
                if self.target.is_stochastic() {
                    return bad("randomized_bo needs a deterministic target; its local ascent is not defined on a noisy likelihood".into());
                }
                if self.rbo.starts == 0 || self.rbo.steps == 0 {
                    return bad("rbo.starts and rbo.steps must be positive".into());
                }
            }
            Method::StandardIs => {}
            Method::Bis => {}
        }
        Ok(())
    }

    /// Applies command-line overrides.
    pub fn apply_overrides(&mut self, o: &Overrides) {
        if !o.seeds.is_empty() {
            self.seeds = o.seeds.clone();
        }
        if let Some(out) = &o.output_dir {
            self.output_dir = out.clone();
        }
        if let Some(stride) = o.refit_stride {
            if let HyperMode::Mle { refit_stride, .. } = &mut self.bis.hyper {
                *refit_stride = stride;
            }
        }
        if let Some(r) = o.replicates {
            if let TargetSpec::Lorenz { replicates, .. } = &mut self.target {
                *replicates = r;
            }
        }
    }
}

/// Command-line overrides of config values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seeds: Vec<u64>,
    pub output_dir: Option<PathBuf>,
    pub refit_stride: Option<usize>,
    pub replicates: Option<usize>,
}
