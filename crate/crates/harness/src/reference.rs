//! Reference sample sets: standard IS on the Halton sequence from index 1,
//! cached on disk.

use std::path::{Path, PathBuf};

use bis_core::metrics::{MmdKernel, MmdReference};
use bis_core::sampler::{standard_is, Proposal, WeightedSampleSet};
use bis_core::targets::TargetDensity;
use serde::{Deserialize, Serialize};

use crate::config::{TargetSpec, SCHEMA_VERSION};
use crate::error::{HarnessError, Result};
use crate::io;
use crate::targets::PreparedTarget;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceInfo {
    pub schema_version: u32,
    pub key: String,
    pub count: usize,
    pub seed: u64,
    pub path: PathBuf,
    pub sha256: String,
}

/// A reference set with its MMD evaluator.
pub struct Reference {
    pub set: WeightedSampleSet,
    pub mmd: MmdReference,
    pub info: ReferenceInfo,
}

impl Reference {
    pub fn new(set: WeightedSampleSet, info: ReferenceInfo, kernel: MmdKernel) -> Result<Self> {
        let mmd = MmdReference::new(&set, kernel)?;
        Ok(Self { set, mmd, info })
    }

    /// Builds or loads the reference for a config.
    pub fn for_target(
        target: &PreparedTarget,
        count: usize,
        seed: u64,
        cache_dir: &Path,
        kernel: MmdKernel,
    ) -> Result<Self> {
        let key = cache_key(target.spec(), seed);
        let instance = target.instance(seed)?;
        let (set, info) = build_reference(instance.as_ref(), &key, count, seed, Some(cache_dir))?;
        Self::new(set, info, kernel)
    }
}

/// Cache key: target name plus a digest of its full spec (and the seed for
/// stochastic targets).
pub fn cache_key(spec: &TargetSpec, seed: u64) -> String {
    let mut text = serde_json::to_string(spec).expect("spec serializes");
    if spec.is_stochastic() {
        text.push_str(&format!("#seed={seed}"));
    }
    format!("{}-{}", spec.name(), &io::sha256_hex(text.as_bytes())[..16])
}

fn paths(dir: &Path, key: &str, count: usize) -> (PathBuf, PathBuf) {
    let csv = dir.join(format!("{key}-n{count}.csv"));
    let json = csv.with_extension("json");
    (csv, json)
}

fn try_load(
    csv: &Path,
    json: &Path,
    key: &str,
    count: usize,
    seed: u64,
) -> Result<(WeightedSampleSet, ReferenceInfo)> {
    let info: ReferenceInfo = io::read_json(json)?;
    if info.schema_version != SCHEMA_VERSION
        || info.key != key
        || info.count != count
        || info.seed != seed
    {
        return Err(HarnessError::format(
            json,
            "sidecar does not describe this reference",
        ));
    }
    let digest = io::sha256_file(csv)?;
    if digest != info.sha256 {
        return Err(HarnessError::format(csv, "checksum mismatch"));
    }
    let set = io::read_samples(csv)?;
    if set.len() != count {
        return Err(HarnessError::format(
            csv,
            format!("{} rows, expected {count}", set.len()),
        ));
    }
    Ok((
        set,
        ReferenceInfo {
            path: csv.to_path_buf(),
            ..info
        },
    ))
}

/// Standard IS with `count` points of the Halton sequence started at index
/// 1. With a cache directory the set is stored as CSV plus a JSON sidecar
/// holding its sha256, and reused when both agree; anything else is rebuilt.
pub fn build_reference(
    target: &dyn TargetDensity,
    key: &str,
    count: usize,
    seed: u64,
    cache_dir: Option<&Path>,
) -> Result<(WeightedSampleSet, ReferenceInfo)> {
    if let Some(dir) = cache_dir {
        let (csv, json) = paths(dir, key, count);
        if csv.exists() || json.exists() {
            match try_load(&csv, &json, key, count, seed) {
                Ok(hit) => {
                    log::info!("reference {key} loaded from {}", csv.display());
                    return Ok(hit);
                }
                Err(e) => log::warn!("rebuilding reference {key}: {e}"),
            }
        }
    }
    log::info!("building reference {key} with {count} evaluations");
    let mut stream = Proposal::Halton { random_start: None }.stream(target.domain(), seed);
    let mut set = standard_is(target, count, &mut stream)?;
    set.trace.clear();
    let bytes = io::samples_csv_bytes(&set);
    let mut info = ReferenceInfo {
        schema_version: SCHEMA_VERSION,
        key: key.to_string(),
        count,
        seed,
        path: PathBuf::new(),
        sha256: io::sha256_hex(&bytes),
    };
    if let Some(dir) = cache_dir {
        let (csv, json) = paths(dir, key, count);
        io::write_atomic(&csv, &bytes)?;
        info.path = csv;
        io::write_json(&json, &info)?;
    }
    Ok((set, info))
}
