//! Seed sweeps of one method on one target.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use bis_core::acquisition::PhiSpec;
use bis_core::gp::{GpPosterior, NoiseMode, TrainingSet};
use bis_core::lowdisc::ScaledStream;
use bis_core::metrics::{tvd_from_log_values, MmdKernel, MmdReference};
use bis_core::sampler::{
    bis_run, randomized_bo_is, standard_is, surrogate_outputs, BisConfig, WeightedSampleSet,
};
use bis_core::targets::{is_sentinel, TargetDensity, FAILED_LOG_Q};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Method, SCHEMA_VERSION};
use crate::error::{HarnessError, Result};
use crate::io;
use crate::reference::{Reference, ReferenceInfo};
use crate::stats::Summary;
use crate::targets::PreparedTarget;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub schema: u32,
    pub harness: String,
    pub core: String,
}

impl Default for Versions {
    fn default() -> Self {
        Self {
            schema: SCHEMA_VERSION,
            harness: env!("CARGO_PKG_VERSION").to_string(),
            core: bis_core::VERSION.to_string(),
        }
    }
}

/// Metrics of one seed, also written to `metrics.json` in its directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub schema_version: u32,
    pub seed: u64,
    pub checkpoints: Vec<usize>,
    /// MMD against the reference at each checkpoint.
    pub mmd: Vec<f64>,
    /// TVD between the final plug-in GP density and the reference density.
    pub final_tvd: Option<f64>,
    pub eval_count: u64,
    pub effective_sample_size: f64,
    pub wall_seconds: f64,
}

impl SeedMetrics {
    pub fn final_mmd(&self) -> f64 {
        *self.mmd.last().expect("at least one checkpoint")
    }

    pub fn mmd_at(&self, n: usize) -> Option<f64> {
        self.checkpoints
            .iter()
            .position(|&c| c == n)
            .map(|i| self.mmd[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFiles {
    pub samples: PathBuf,
    pub trace: PathBuf,
    pub metrics: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum SeedOutcome {
    Completed {
        files: SeedFiles,
        metrics: SeedMetrics,
    },
    Failed {
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    #[serde(flatten)]
    pub outcome: SeedOutcome,
}

impl SeedRecord {
    pub fn metrics(&self) -> Option<&SeedMetrics> {
        match &self.outcome {
            SeedOutcome::Completed { metrics, .. } => Some(metrics),
            SeedOutcome::Failed { .. } => None,
        }
    }

    pub fn files(&self) -> Option<&SeedFiles> {
        match &self.outcome {
            SeedOutcome::Completed { files, .. } => Some(files),
            SeedOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSummary {
    pub n: usize,
    #[serde(flatten)]
    pub mmd: Summary,
}

/// Manifest of a run, written as `record.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub label: String,
    pub config: ExperimentConfig,
    pub reference: ReferenceInfo,
    pub checkpoints: Vec<usize>,
    pub seeds: Vec<SeedRecord>,
    /// Over completed seeds.
    pub mmd: Vec<CheckpointSummary>,
    pub final_tvd: Option<Summary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_file: Option<PathBuf>,
    pub versions: Versions,
    pub started_unix: f64,
    pub finished_unix: f64,
}

impl RunRecord {
    pub fn completed(&self) -> impl Iterator<Item = &SeedMetrics> {
        self.seeds.iter().filter_map(SeedRecord::metrics)
    }

    pub fn final_mmds(&self) -> Vec<f64> {
        self.completed().map(SeedMetrics::final_mmd).collect()
    }

    pub fn final_mmd(&self) -> Option<&Summary> {
        self.mmd.last().map(|c| &c.mmd)
    }

    /// Values at checkpoint `n` across completed seeds.
    pub fn mmds_at(&self, n: usize) -> Vec<f64> {
        self.completed().filter_map(|m| m.mmd_at(n)).collect()
    }

    pub fn dir(&self) -> PathBuf {
        run_dir(&self.config)
    }
}

pub fn run_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.join(cfg.label())
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

/// MMD of every checkpoint prefix of `set` against the reference.
pub fn checkpoint_mmds(
    reference: &MmdReference,
    set: &WeightedSampleSet,
    checkpoints: &[usize],
) -> Vec<f64> {
    let mut tracker = reference.prefix_tracker();
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut ci = 0;
    for (i, (p, l)) in set.points.iter().zip(&set.log_ratios).enumerate() {
        let v = tracker.push(p.clone(), *l);
        while ci < checkpoints.len() && checkpoints[ci] == i + 1 {
            out.push(v);
            ci += 1;
        }
    }
    out
}

/// GP refit on every successful evaluation of the run with the last
/// hyperparameters the sampler used.
pub fn plug_in_posterior(
    set: &WeightedSampleSet,
    config: &BisConfig,
) -> Result<Option<GpPosterior>> {
    let Some(hyper) = set
        .trace
        .iter()
        .rev()
        .find_map(|r| r.hyperparameters.clone())
    else {
        return Ok(None);
    };
    let (inputs, log_q): (Vec<Vec<f64>>, Vec<f64>) = set
        .trace
        .iter()
        .filter(|r| !is_sentinel(r.log_q))
        .map(|r| (r.point.clone(), r.log_q))
        .unzip();
    if inputs.is_empty() {
        return Ok(None);
    }
    let outputs = surrogate_outputs(&log_q, config.phi, config.output_floor);
    let default_noise = match config.noise {
        NoiseMode::Fixed { variance } => variance,
        NoiseMode::Estimate { .. } => 1e-6,
    };
    let training = TrainingSet::new(inputs, outputs, hyper.noise_variance_or(default_noise))?;
    Ok(Some(GpPosterior::fit_profiled(
        hyper.kernel(),
        config.mean_form,
        &training,
    )?))
}

/// `log phi(m(theta))` of the plug-in density, up to a constant.
pub fn plug_in_log_density(post: &GpPosterior, phi: PhiSpec, theta: &[f64]) -> f64 {
    let m = post.predict_mean(theta);
    match phi {
        PhiSpec::Exp => m,
        PhiSpec::Relu => m.max(0.0).ln(),
        PhiSpec::Square => 2.0 * m.abs().ln(),
    }
}

/// TVD of the plug-in density against the reference on its first `nodes`
/// points, which are the first scaled Halton nodes.
pub fn plug_in_tvd(
    post: &GpPosterior,
    phi: PhiSpec,
    reference: &WeightedSampleSet,
    nodes: usize,
) -> Result<f64> {
    let nodes = nodes.min(reference.len());
    let lp: Vec<f64> = reference.points[..nodes]
        .iter()
        .map(|x| plug_in_log_density(post, phi, x))
        .collect();
    Ok(tvd_from_log_values(&lp, &reference.log_ratios[..nodes])?)
}

fn counted_log_q(target: &dyn TargetDensity, theta: &[f64]) -> f64 {
    match target.log_q(theta) {
        Ok(v) if v.is_finite() => v,
        _ => FAILED_LOG_Q,
    }
}

/// Smallest `n <= max_n` for which standard IS on the first `n` points of
/// `stream` has MMD at most `error_target`; `max_n + 1` if none does.
pub fn samples_to_match(
    target: &dyn TargetDensity,
    reference: &MmdReference,
    error_target: f64,
    max_n: usize,
    stream: &mut ScaledStream,
) -> Result<usize> {
    if !(error_target > 0.0) {
        return Err(HarnessError::Config(format!(
            "error target must be positive, got {error_target}"
        )));
    }
    let log_u = -target.domain().log_volume();
    let mut tracker = reference.prefix_tracker();
    for n in 1..=max_n {
        let (_, theta) = stream.next_point();
        let lq = counted_log_q(target, &theta);
        let ratio = if is_sentinel(lq) { lq } else { lq - log_u };
        if tracker.push(theta, ratio) <= error_target {
            return Ok(n);
        }
    }
    Ok(max_n + 1)
}

/// Runs the configured method for one seed.
pub fn run_method(
    cfg: &ExperimentConfig,
    target: &dyn TargetDensity,
    seed: u64,
) -> Result<WeightedSampleSet> {
    let bis = BisConfig {
        seed,
        ..cfg.bis.clone()
    };
    Ok(match cfg.method {
        Method::Bis => bis_run(target, &bis)?,
        Method::StandardIs => {
            let mut s = bis.proposal.stream(target.domain(), seed);
            standard_is(target, bis.budget, &mut s)?
        }
        Method::RandomizedBo => randomized_bo_is(target, &cfg.rbo_config(seed))?,
    })
}

fn seed_dir(cfg: &ExperimentConfig, seed: u64) -> PathBuf {
    run_dir(cfg).join(format!("seed-{seed}"))
}

fn run_seed(
    cfg: &ExperimentConfig,
    prepared: &PreparedTarget,
    reference: &Reference,
    seed: u64,
) -> Result<(SeedFiles, SeedMetrics, WeightedSampleSet)> {
    let start = Instant::now();
    let target = prepared.instance(seed)?;
    let set = run_method(cfg, target.as_ref(), seed)?;
    let evals = target.eval_count();
    if evals != cfg.budget() as u64 || set.len() != cfg.budget() {
        return Err(HarnessError::Budget {
            seed,
            evals,
            budget: cfg.budget(),
        });
    }
    let checkpoints = cfg.checkpoints();
    let mmd = checkpoint_mmds(&reference.mmd, &set, &checkpoints);
    let final_tvd = if cfg.metrics.tvd_nodes > 0 && cfg.method != Method::StandardIs {
        match plug_in_posterior(&set, &cfg.bis)? {
            Some(post) => Some(plug_in_tvd(
                &post,
                cfg.bis.phi,
                &reference.set,
                cfg.metrics.tvd_nodes,
            )?),
            None => None,
        }
    } else {
        None
    };
    let metrics = SeedMetrics {
        schema_version: SCHEMA_VERSION,
        seed,
        checkpoints,
        mmd,
        final_tvd,
        eval_count: evals,
        effective_sample_size: set.effective_sample_size(),
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    let dir = seed_dir(cfg, seed);
    let files = SeedFiles {
        samples: dir.join("samples.csv"),
        trace: dir.join("trace.jsonl"),
        metrics: dir.join("metrics.json"),
    };
    io::write_samples(&files.samples, &set)?;
    io::write_trace(&files.trace, &set.trace)?;
    io::write_json(&files.metrics, &metrics)?;
    Ok((files, metrics, set))
}

/// The reference and prepared target for a config.
pub fn prepare(cfg: &ExperimentConfig) -> Result<(PreparedTarget, Reference)> {
    cfg.validate()?;
    let target = PreparedTarget::new(&cfg.target)?;
    let kernel = MmdKernel::new(cfg.metrics.mmd_bandwidth)?;
    let reference = Reference::for_target(
        &target,
        cfg.reference.count,
        cfg.reference.seed,
        &cfg.reference_dir(),
        kernel,
    )?;
    Ok((target, reference))
}

/// Validates, builds (or loads) the reference, and runs every seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let (target, reference) = prepare(cfg)?;
    Ok(run_experiment_with(cfg, &target, &reference)?.0)
}

/// Runs every seed against an existing reference. Returns the record and
/// the sample sets of completed seeds in seed order.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    target: &PreparedTarget,
    reference: &Reference,
) -> Result<(RunRecord, Vec<Option<WeightedSampleSet>>)> {
    cfg.validate()?;
    if (reference.mmd.kernel().bandwidth - cfg.metrics.mmd_bandwidth).abs() > 0.0 {
        return Err(HarnessError::Config(
            "reference was built for a different MMD bandwidth".into(),
        ));
    }
    let started = unix_now();
    let dir = run_dir(cfg);
    io::ensure_dir(&dir)?;
    let data_file = target.write_data(&cfg.output_dir.join("data"))?;

    let results: Vec<Result<(SeedFiles, SeedMetrics, WeightedSampleSet)>> = cfg
        .seeds
        .par_iter()
        .map(|&s| run_seed(cfg, target, reference, s))
        .collect();

    let mut seeds = Vec::with_capacity(results.len());
    let mut sets = Vec::with_capacity(results.len());
    for (&seed, r) in cfg.seeds.iter().zip(results) {
        match r {
            Ok((files, metrics, set)) => {
                log::info!(
                    "{} seed {seed}: final MMD {:.4}",
                    cfg.label(),
                    metrics.final_mmd()
                );
                seeds.push(SeedRecord {
                    seed,
                    outcome: SeedOutcome::Completed { files, metrics },
                });
                sets.push(Some(set));
            }
            // Budget violations fail the whole run.
            Err(e @ HarnessError::Budget { .. }) => return Err(e),
            Err(e) => {
                log::warn!("{} seed {seed} failed: {e}", cfg.label());
                seeds.push(SeedRecord {
                    seed,
                    outcome: SeedOutcome::Failed {
                        message: e.to_string(),
                    },
                });
                sets.push(None);
            }
        }
    }
    let (mmd, final_tvd) = aggregate(&cfg.checkpoints(), &seeds)?;
    if mmd.first().is_some_and(|c| c.mmd.count < seeds.len()) {
        log::warn!(
            "{}: aggregating {} of {} seeds",
            cfg.label(),
            mmd[0].mmd.count,
            seeds.len()
        );
    }
    let record = RunRecord {
        schema_version: SCHEMA_VERSION,
        label: cfg.label(),
        config: cfg.clone(),
        reference: reference.info.clone(),
        checkpoints: cfg.checkpoints(),
        seeds,
        mmd,
        final_tvd,
        data_file,
        versions: Versions::default(),
        started_unix: started,
        finished_unix: unix_now(),
    };
    io::write_json(&dir.join("record.json"), &record)?;
    Ok((record, sets))
}

/// Per-checkpoint MMD summaries and the final-TVD summary over completed
/// seeds.
pub fn aggregate(
    checkpoints: &[usize],
    seeds: &[SeedRecord],
) -> Result<(Vec<CheckpointSummary>, Option<Summary>)> {
    let done: Vec<&SeedMetrics> = seeds.iter().filter_map(SeedRecord::metrics).collect();
    if done.is_empty() {
        return Err(HarnessError::AllSeedsFailed);
    }
    let mmd = checkpoints
        .iter()
        .map(|&n| {
            let v: Vec<f64> = done.iter().filter_map(|m| m.mmd_at(n)).collect();
            Summary::of(&v).map(|mmd| CheckpointSummary { n, mmd })
        })
        .collect::<Option<Vec<_>>>()
        .ok_or(HarnessError::AllSeedsFailed)?;
    let tvd: Vec<f64> = done.iter().filter_map(|m| m.final_tvd).collect();
    Ok((mmd, Summary::of(&tvd)))
}

pub fn load_record(path: &Path) -> Result<RunRecord> {
    io::read_json(path)
}

/// One row per seed of a sample-count comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRow {
    pub seed: u64,
    pub error_target: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchTable {
    pub schema_version: u32,
    pub label: String,
    pub max_n: usize,
    pub rows: Vec<MatchRow>,
    pub summary: Summary,
}

/// For each completed seed of `record`, the number of standard IS samples
/// on that seed's proposal stream needed to reach its final MMD.
pub fn match_counts(
    record: &RunRecord,
    target: &PreparedTarget,
    reference: &Reference,
    max_n: usize,
) -> Result<MatchTable> {
    let cfg = &record.config;
    let rows: Vec<MatchRow> = record
        .completed()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|m| {
            let t = target.instance(m.seed)?;
            let mut stream = cfg.bis.proposal.stream(t.domain(), m.seed);
            let samples = samples_to_match(
                t.as_ref(),
                &reference.mmd,
                m.final_mmd(),
                max_n,
                &mut stream,
            )?;
            Ok(MatchRow {
                seed: m.seed,
                error_target: m.final_mmd(),
                samples,
            })
        })
        .collect::<Result<_>>()?;
    let counts: Vec<f64> = rows.iter().map(|r| r.samples as f64).collect();
    let table = MatchTable {
        schema_version: SCHEMA_VERSION,
        label: record.label.clone(),
        max_n,
        summary: Summary::of(&counts).ok_or(HarnessError::AllSeedsFailed)?,
        rows,
    };
    let dir = record.dir();
    io::write_json(&dir.join("match_count.json"), &table)?;
    io::write_csv(
        &dir.join("match_count.csv"),
        &["seed".into(), "error_target".into(), "samples".into()],
        table.rows.iter().map(|r| {
            vec![
                r.seed.to_string(),
                io::fmt_f64(r.error_target),
                r.samples.to_string(),
            ]
        }),
    )?;
    Ok(table)
}
