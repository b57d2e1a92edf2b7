//! Target densities built from a config, with their data.

use std::path::{Path, PathBuf};

use bis_core::lowdisc::Domain;
use bis_core::targets::lorenz::N_SUMMARIES;
use bis_core::targets::*;
use serde::Serialize;

use crate::config::{TargetSpec, SCHEMA_VERSION};
use crate::error::{HarnessError, Result};
use crate::io;

/// A target spec with its dataset loaded or simulated, ready to produce
/// fresh instances (each with its own evaluation counter).
#[derive(Debug, Clone)]
pub struct PreparedTarget {
    spec: TargetSpec,
    data: TargetData,
}

#[derive(Debug, Clone)]
enum TargetData {
    None,
    GAndK(Vec<f64>),
    Lorenz {
        initial_state: Vec<f64>,
        observed: [f64; N_SUMMARIES],
    },
}

#[derive(Serialize)]
struct DataSidecar<'a> {
    schema_version: u32,
    target: &'a TargetSpec,
    rows: usize,
    sha256: String,
}

/// Parameter box of a target.
pub fn domain_of(spec: &TargetSpec) -> Result<Domain> {
    Ok(match spec {
        TargetSpec::Gaussian => BenchmarkKind::Gaussian.domain(),
        TargetSpec::Bimodal => BenchmarkKind::Bimodal.domain(),
        TargetSpec::Banana => BenchmarkKind::Banana.domain(),
        TargetSpec::Normal { lower, upper, .. } => Domain::new(vec![*lower], vec![*upper])?,
        TargetSpec::GAndK { .. } => GandKPosterior::default_domain(),
        TargetSpec::Lorenz { .. } => LorenzConfig::default_domain(),
    })
}

fn read_gandk_dataset(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        match t.parse::<f64>() {
            Ok(v) => out.push(v),
            // A header line is allowed.
            Err(_) if out.is_empty() && i < 2 => {}
            Err(_) => {
                return Err(HarnessError::format(
                    path,
                    format!("line {}: not a number", i + 1),
                ))
            }
        }
    }
    if out.is_empty() {
        return Err(HarnessError::format(path, "empty dataset"));
    }
    Ok(out)
}

fn read_lorenz_observed(path: &Path, n_vars: usize) -> Result<(Vec<f64>, [f64; N_SUMMARIES])> {
    let (_, rows) = io::read_csv(path)?;
    let mut s = [f64::NAN; N_SUMMARIES];
    let mut x = vec![f64::NAN; n_vars];
    for r in &rows {
        if r.len() < 2 {
            return Err(HarnessError::format(path, "expected name,value rows"));
        }
        let v = io::parse_f64(path, &r[1])?;
        let (kind, idx) = r[0].split_at(1);
        let idx: usize = idx
            .parse()
            .map_err(|_| HarnessError::format(path, format!("bad name {:?}", r[0])))?;
        match kind {
            "s" if idx < N_SUMMARIES => s[idx] = v,
            "x" if idx < n_vars => x[idx] = v,
            _ => return Err(HarnessError::format(path, format!("bad name {:?}", r[0]))),
        }
    }
    if s.iter().chain(&x).any(|v| v.is_nan()) {
        return Err(HarnessError::format(
            path,
            "missing summaries or initial state entries",
        ));
    }
    Ok((x, s))
}

fn lorenz_config(replicates: usize) -> LorenzConfig {
    LorenzConfig {
        replicates,
        ..Default::default()
    }
}

impl PreparedTarget {
    pub fn new(spec: &TargetSpec) -> Result<Self> {
        let data = match spec {
            TargetSpec::GAndK {
                theta_true,
                n_obs,
                data_seed,
                dataset,
                c,
            } => TargetData::GAndK(match dataset {
                Some(p) => read_gandk_dataset(p)?,
                None => GandK { c: *c }.dataset(theta_true, *n_obs, *data_seed)?,
            }),
            TargetSpec::Lorenz {
                theta_true,
                replicates,
                data_seed,
                observed,
            } => {
                let cfg = lorenz_config(*replicates);
                let (initial_state, observed) = match observed {
                    Some(p) => read_lorenz_observed(p, cfg.n_vars)?,
                    None => {
                        let p = LorenzPosterior::synthetic(cfg, theta_true, *data_seed)?;
                        (p.initial_state().to_vec(), *p.observed())
                    }
                };
                TargetData::Lorenz {
                    initial_state,
                    observed,
                }
            }
            _ => TargetData::None,
        };
        Ok(Self {
            spec: spec.clone(),
            data,
        })
    }

    pub fn spec(&self) -> &TargetSpec {
        &self.spec
    }

    pub fn domain(&self) -> Domain {
        domain_of(&self.spec).expect("validated spec")
    }

    /// A fresh target. `seed` drives the internal randomness of stochastic
    /// targets and is ignored otherwise.
    pub fn instance(&self, seed: u64) -> Result<Box<dyn TargetDensity>> {
        Ok(match (&self.spec, &self.data) {
            (TargetSpec::Gaussian, _) => Box::new(Benchmark::new(BenchmarkKind::Gaussian)),
            (TargetSpec::Bimodal, _) => Box::new(Benchmark::new(BenchmarkKind::Bimodal)),
            (TargetSpec::Banana, _) => Box::new(Benchmark::new(BenchmarkKind::Banana)),
            (
                &TargetSpec::Normal {
                    mean,
                    sd,
                    lower,
                    upper,
                },
                _,
            ) => Box::new(NormalTarget::new(mean, sd, lower, upper)?),
            (TargetSpec::GAndK { c, .. }, TargetData::GAndK(data)) => {
                Box::new(GandKPosterior::new(
                    GandK { c: *c },
                    data.clone(),
                    GandKPosterior::default_domain(),
                )?)
            }
            (
                TargetSpec::Lorenz { replicates, .. },
                TargetData::Lorenz {
                    initial_state,
                    observed,
                },
            ) => Box::new(LorenzPosterior::new(
                lorenz_config(*replicates),
                initial_state.clone(),
                *observed,
                seed,
            )?),
            _ => unreachable!("data matches spec by construction"),
        })
    }

    /// The g-and-k dataset, if any.
    pub fn gandk_data(&self) -> Option<&[f64]> {
        match &self.data {
            TargetData::GAndK(d) => Some(d),
            _ => None,
        }
    }

    /// Writes the dataset or observation as CSV with a JSON sidecar. Returns
    /// the CSV path, or `None` for targets without data.
    pub fn write_data(&self, dir: &Path) -> Result<Option<PathBuf>> {
        let (name, bytes, rows) = match &self.data {
            TargetData::None => return Ok(None),
            TargetData::GAndK(d) => (
                "gandk_dataset.csv",
                io::csv_bytes(&["x".to_string()], d.iter().map(|v| vec![io::fmt_f64(*v)])),
                d.len(),
            ),
            TargetData::Lorenz {
                initial_state,
                observed,
            } => {
                let rows: Vec<Vec<String>> = observed
                    .iter()
                    .enumerate()
                    .map(|(i, v)| vec![format!("s{i}"), io::fmt_f64(*v)])
                    .chain(
                        initial_state
                            .iter()
                            .enumerate()
                            .map(|(i, v)| vec![format!("x{i}"), io::fmt_f64(*v)]),
                    )
                    .collect();
                let n = rows.len();
                (
                    "lorenz_observed.csv",
                    io::csv_bytes(&["name".into(), "value".into()], rows),
                    n,
                )
            }
        };
        let path = dir.join(name);
        io::write_atomic(&path, &bytes)?;
        io::write_json(
            &path.with_extension("json"),
            &DataSidecar {
                schema_version: SCHEMA_VERSION,
                target: &self.spec,
                rows,
                sha256: io::sha256_hex(&bytes),
            },
        )?;
        Ok(Some(path))
    }
}
