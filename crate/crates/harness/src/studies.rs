//! Grids over the link function and the pool size.

use bis_core::acquisition::PhiSpec;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::error::Result;
use crate::experiment::{prepare, run_experiment_with, RunRecord};
use crate::io;
use crate::reference::Reference;
use crate::stats::Summary;
use crate::targets::PreparedTarget;

/// Pool sizes of the pool-size study.
pub const POOL_GRID: [usize; 8] = [2, 8, 32, 128, 512, 2048, 8196, 32768];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub label: String,
    pub value: String,
    pub final_mmd: Summary,
    pub final_tvd: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub rows: Vec<StudyRow>,
    pub records: Vec<RunRecord>,
}

impl Study {
    pub fn record(&self, value: &str) -> Option<&RunRecord> {
        self.rows
            .iter()
            .position(|r| r.value == value)
            .map(|i| &self.records[i])
    }
}

fn run_grid<F>(
    base: &ExperimentConfig,
    name: &str,
    values: &[String],
    mut configure: F,
    shared: Option<(&PreparedTarget, &Reference)>,
) -> Result<Study>
where
    F: FnMut(&mut ExperimentConfig, usize),
{
    let owned;
    let (target, reference) = match shared {
        Some(s) => s,
        None => {
            owned = prepare(base)?;
            (&owned.0, &owned.1)
        }
    };
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for (i, value) in values.iter().enumerate() {
        let mut cfg = base.clone();
        configure(&mut cfg, i);
        cfg.label = Some(format!("{}_{name}_{value}", base.label()));
        let (record, _) = run_experiment_with(&cfg, target, reference)?;
        rows.push(StudyRow {
            label: record.label.clone(),
            value: value.clone(),
            final_mmd: *record.final_mmd().expect("aggregated"),
            final_tvd: record.final_tvd,
        });
        records.push(record);
    }
    let header: Vec<String> = [
        name, "label", "seeds", "mmd_mean", "mmd_sd", "mmd_lo", "mmd_hi", "tvd_mean", "tvd_sd",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let opt = |v: Option<f64>| v.map(io::fmt_f64).unwrap_or_default();
    let table = rows.iter().map(|r| {
        vec![
            r.value.clone(),
            r.label.clone(),
            r.final_mmd.count.to_string(),
            io::fmt_f64(r.final_mmd.mean),
            io::fmt_f64(r.final_mmd.sd),
            io::fmt_f64(r.final_mmd.lo),
            io::fmt_f64(r.final_mmd.hi),
            opt(r.final_tvd.map(|t| t.mean)),
            opt(r.final_tvd.map(|t| t.sd)),
        ]
    });
    io::write_csv(
        &base
            .output_dir
            .join(format!("{}_{name}_study.csv", base.label())),
        &header,
        table,
    )?;
    io::write_json(
        &base
            .output_dir
            .join(format!("{}_{name}_study.json", base.label())),
        &serde_json::json!({ "schema_version": SCHEMA_VERSION, "rows": rows }),
    )?;
    Ok(Study { rows, records })
}

/// One run per link function.
pub fn phi_study(
    base: &ExperimentConfig,
    shared: Option<(&PreparedTarget, &Reference)>,
) -> Result<Study> {
    let values: Vec<String> = PhiSpec::ALL.iter().map(|p| p.name().to_string()).collect();
    run_grid(
        base,
        "phi",
        &values,
        |cfg, i| cfg.bis.phi = PhiSpec::ALL[i],
        shared,
    )
}

/// One run per pool size.
pub fn pool_size_study(
    base: &ExperimentConfig,
    grid: &[usize],
    shared: Option<(&PreparedTarget, &Reference)>,
) -> Result<Study> {
    let values: Vec<String> = grid.iter().map(|m| m.to_string()).collect();
    run_grid(
        base,
        "pool",
        &values,
        |cfg, i| cfg.bis.pool_size = grid[i],
        shared,
    )
}
