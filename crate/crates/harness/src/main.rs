use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use bis_harness::config::Overrides;
use bis_harness::experiment::{load_record, match_counts, prepare, run_experiment_with};
use bis_harness::plots::emit_plot_data;
use bis_harness::studies::{phi_study, pool_size_study, POOL_GRID};
use bis_harness::{ExperimentConfig, Method};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bis",
    version,
    about = "Bandit importance sampling experiments"
)]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seeds to run, replacing the config list. Repeatable.
    #[arg(long, global = true)]
    seed: Vec<u64>,
    /// Output directory, replacing the config value.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Iterations between hyperparameter refits.
    #[arg(long, global = true)]
    refit_stride: Option<usize>,
    /// Lorenz replicates per likelihood evaluation.
    #[arg(long, global = true)]
    replicates: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed and write the run record.
    Run,
    /// Build or verify the cached reference set.
    Reference,
    /// Standard-IS sample counts needed to match each seed's final MMD.
    MatchCount {
        #[arg(long, default_value_t = 20_000)]
        max_n: usize,
    },
    /// Runs with each link function.
    StudyPhi,
    /// Runs over a grid of pool sizes.
    StudyPool {
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<usize>>,
    },
    /// Plot CSVs from one or more run records.
    EmitPlots {
        /// `record.json` files.
        records: Vec<PathBuf>,
        /// Grid points per axis for KDE data.
        #[arg(long, default_value_t = 60)]
        resolution: usize,
    },
    /// Check a config file and exit.
    ValidateConfig,
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            seeds: self.seed.clone(),
            output_dir: self.out.clone(),
            refit_stride: self.refit_stride,
            replicates: self.replicates,
        }
    }

    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let Some(path) = &self.config else {
            bail!("--config is required for this command");
        };
        let mut cfg = ExperimentConfig::load(path)?;
        cfg.apply_overrides(&self.overrides());
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::ValidateConfig => {
            let cfg = cli.load()?;
            println!(
                "ok: {} on {} with {} seeds",
                cfg.label(),
                cfg.target.name(),
                cfg.seeds.len()
            );
        }
        Command::Reference => {
            let cfg = cli.load()?;
            let (_, reference) = prepare(&cfg)?;
            println!(
                "{} ({} points, sha256 {})",
                reference.info.path.display(),
                reference.info.count,
                reference.info.sha256
            );
        }
        Command::Run => {
            let cfg = cli.load()?;
            let (target, reference) = prepare(&cfg)?;
            let (record, _) = run_experiment_with(&cfg, &target, &reference)?;
            for c in &record.mmd {
                println!(
                    "N={:>5}  MMD {:.5} [{:.5}, {:.5}]",
                    c.n, c.mmd.mean, c.mmd.lo, c.mmd.hi
                );
            }
            if let Some(t) = record.final_tvd {
                println!("final TVD {:.5} [{:.5}, {:.5}]", t.mean, t.lo, t.hi);
            }
            println!("{}", record.dir().join("record.json").display());
        }
        Command::MatchCount { max_n } => {
            let cfg = cli.load()?;
            if cfg.method == Method::StandardIs {
                bail!("match-count compares a sampler against standard IS; use method = \"bis\"");
            }
            let (target, reference) = prepare(&cfg)?;
            let (record, _) = run_experiment_with(&cfg, &target, &reference)?;
            let table = match_counts(&record, &target, &reference, *max_n)?;
            for r in &table.rows {
                println!(
                    "seed {:>4}  MMD {:.5}  samples {}",
                    r.seed, r.error_target, r.samples
                );
            }
            println!(
                "mean {:.1} (sd {:.1})",
                table.summary.mean, table.summary.sd
            );
        }
        Command::StudyPhi => {
            let cfg = cli.load()?;
            let study = phi_study(&cfg, None)?;
            for r in &study.rows {
                println!(
                    "{:<8} final MMD {:.5} (sd {:.5})",
                    r.value, r.final_mmd.mean, r.final_mmd.sd
                );
            }
        }
        Command::StudyPool { grid } => {
            let cfg = cli.load()?;
            let grid = grid.clone().unwrap_or_else(|| POOL_GRID.to_vec());
            let study = pool_size_study(&cfg, &grid, None)?;
            for r in &study.rows {
                println!(
                    "M={:<6} final MMD {:.5} (sd {:.5})",
                    r.value, r.final_mmd.mean, r.final_mmd.sd
                );
            }
        }
        Command::EmitPlots {
            records,
            resolution,
        } => {
            if records.is_empty() {
                bail!("no run records given");
            }
            let loaded = records
                .iter()
                .map(|p| load_record(p).with_context(|| format!("reading {}", p.display())))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("plots"));
            let refs: Vec<_> = loaded.iter().collect();
            for p in emit_plot_data(&refs, &out, *resolution)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
