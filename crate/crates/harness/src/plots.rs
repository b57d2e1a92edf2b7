//! Plot data as CSV. Column schemas are listed in the README.

use std::path::{Path, PathBuf};

use bis_core::metrics::Kde;
use bis_core::sampler::WeightedSampleSet;

use crate::error::Result;
use crate::experiment::RunRecord;
use crate::io;
use crate::targets::domain_of;

/// `N, <label>_mean, <label>_lo, <label>_hi, ...` over the union of
/// checkpoints; cells of runs without that checkpoint are empty.
pub fn emit_trace_table(records: &[&RunRecord], path: &Path) -> Result<()> {
    let mut ns: Vec<usize> = records
        .iter()
        .flat_map(|r| r.mmd.iter().map(|c| c.n))
        .collect();
    ns.sort_unstable();
    ns.dedup();
    let mut header = vec!["N".to_string()];
    for r in records {
        for s in ["mean", "lo", "hi"] {
            header.push(format!("{}_{s}", r.label));
        }
    }
    let rows = ns.iter().map(|&n| {
        let mut row = vec![n.to_string()];
        for r in records {
            match r.mmd.iter().find(|c| c.n == n) {
                Some(c) => row.extend([c.mmd.mean, c.mmd.lo, c.mmd.hi].map(io::fmt_f64)),
                None => row.extend(["", "", ""].map(String::from)),
            }
        }
        row
    });
    io::write_csv(path, &header, rows)
}

/// Smallest set of highest-weight atoms holding `1 - tail` of the mass,
/// capped at `max_atoms`, reweighted.
pub fn trim_reference(
    set: &WeightedSampleSet,
    tail: f64,
    max_atoms: usize,
) -> Result<WeightedSampleSet> {
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_by(|&a, &b| set.weights[b].total_cmp(&set.weights[a]).then(a.cmp(&b)));
    let mut mass = 0.0;
    let mut keep = Vec::new();
    for i in order {
        if mass >= 1.0 - tail || keep.len() >= max_atoms {
            break;
        }
        mass += set.weights[i];
        keep.push(i);
    }
    keep.sort_unstable();
    Ok(WeightedSampleSet::from_log_ratios(
        keep.iter().map(|&i| set.points[i].clone()).collect(),
        keep.iter().map(|&i| set.log_ratios[i]).collect(),
    )?)
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64)
        .collect()
}

/// KDE data for one run against its reference: a 2-D grid
/// (`x, y, reference, <label>`) for two-dimensional targets, otherwise
/// per-coordinate marginals (`coordinate, x, reference, <label>`), plus the
/// weighted samples of the first completed seed.
pub fn emit_kde_data(
    record: &RunRecord,
    reference: &WeightedSampleSet,
    dir: &Path,
    resolution: usize,
) -> Result<Vec<PathBuf>> {
    let Some(files) = record.seeds.iter().find_map(|s| s.files()) else {
        return Ok(Vec::new());
    };
    let samples = io::read_samples(&files.samples)?;
    let domain = domain_of(&record.config.target)?;
    let reference = trim_reference(reference, 1e-4, 20_000)?;
    let kr = Kde::silverman(&reference)?;
    let ks = Kde::silverman(&samples)?;
    let label = &record.label;
    let mut out = Vec::new();

    let path = dir.join(format!("kde_{label}.csv"));
    if domain.dim() == 2 {
        let xs = grid(domain.lower()[0], domain.upper()[0], resolution);
        let ys = grid(domain.lower()[1], domain.upper()[1], resolution);
        let header = ["x", "y", "reference", label.as_str()].map(String::from);
        let mut rows = Vec::with_capacity(xs.len() * ys.len());
        for &y in &ys {
            for &x in &xs {
                let p = [x, y];
                rows.push(vec![
                    io::fmt_f64(x),
                    io::fmt_f64(y),
                    io::fmt_f64(kr.evaluate(&p)),
                    io::fmt_f64(ks.evaluate(&p)),
                ]);
            }
        }
        io::write_csv(&path, &header, rows)?;
    } else {
        let header = ["coordinate", "x", "reference", label.as_str()].map(String::from);
        let mut rows = Vec::new();
        for j in 0..domain.dim() {
            let (mr, ms) = (kr.marginal(j), ks.marginal(j));
            for x in grid(domain.lower()[j], domain.upper()[j], resolution) {
                rows.push(vec![
                    j.to_string(),
                    io::fmt_f64(x),
                    io::fmt_f64(mr.evaluate(&[x])),
                    io::fmt_f64(ms.evaluate(&[x])),
                ]);
            }
        }
        io::write_csv(&path, &header, rows)?;
    }
    out.push(path);

    let path = dir.join(format!("samples_{label}.csv"));
    io::write_samples(&path, &samples)?;
    out.push(path);
    Ok(out)
}

/// Writes `mmd_trace.csv` for all records and KDE data for each one into
/// `dir`. Output depends only on the records and reference files, so
/// re-emitting gives identical bytes.
pub fn emit_plot_data(
    records: &[&RunRecord],
    dir: &Path,
    resolution: usize,
) -> Result<Vec<PathBuf>> {
    io::ensure_dir(dir)?;
    let mut out = Vec::new();
    let path = dir.join("mmd_trace.csv");
    emit_trace_table(records, &path)?;
    out.push(path);
    for r in records {
        let reference = io::read_samples(&r.reference.path)?;
        out.extend(emit_kde_data(r, &reference, dir, resolution)?);
    }
    Ok(out)
}
