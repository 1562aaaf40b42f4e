//! Directory-level evaluation: per-case reports as JSON lines plus a CSV
//! with per-case rows and mean/std summaries.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{read_tensor, Dataset, META_FILE};
use crate::metrics::{aggregate, evaluate_case, Aggregate, EvalOptions, Metric, MetricReport, Stat};

/// Label files of a directory keyed by case id. A dataset directory
/// contributes its `labels/` and class count; otherwise every `*.xten` file
/// is a case.
fn label_files(dir: &Path) -> Result<(BTreeMap<String, PathBuf>, Option<usize>)> {
    if dir.join(META_FILE).is_file() {
        let ds = Dataset::open(dir)?;
        let files = ds
            .meta
            .cases
            .iter()
            .map(|c| (c.clone(), crate::io::label_path(dir, c)))
            .collect();
        return Ok((files, Some(ds.meta.classes)));
    }
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "xten") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                files.insert(stem.to_string(), path);
            }
        }
    }
    Ok((files, None))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRun {
    /// Sorted by case id.
    pub reports: Vec<MetricReport>,
    pub aggregate: Aggregate,
    /// Cases present on only one side.
    pub missing: Vec<String>,
    pub num_classes: usize,
}

/// Scores every case present in both directories.
pub fn evaluate_dirs(pred: impl AsRef<Path>, gt: impl AsRef<Path>, metrics: &[Metric], tau: f64) -> Result<EvalRun> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("tau must be non-negative, got {tau}")));
    }
    let (pred_files, _) = label_files(pred.as_ref())?;
    let (gt_files, classes) = label_files(gt.as_ref())?;
    let all: BTreeSet<&String> = pred_files.keys().chain(gt_files.keys()).collect();
    let mut missing = Vec::new();
    let mut cases = Vec::new();
    for c in all {
        match (pred_files.get(c), gt_files.get(c)) {
            (Some(p), Some(g)) => cases.push((c.clone(), p.clone(), g.clone())),
            _ => missing.push(c.clone()),
        }
    }
    let loaded = cases
        .par_iter()
        .map(|(c, p, g)| Ok((c, read_tensor(p)?.into_labels()?, read_tensor(g)?.into_labels()?)))
        .collect::<Result<Vec<_>>>()?;
    let num_classes = match classes {
        Some(k) => k,
        None => {
            let top = loaded
                .iter()
                .flat_map(|(_, _, g)| g.data().iter().copied())
                .max()
                .unwrap_or(0);
            (top.max(1) + 1) as usize
        }
    };
    let opts = EvalOptions {
        metrics: metrics.to_vec(),
        tau,
        ..EvalOptions::new(num_classes)
    };
    let reports = loaded
        .par_iter()
        .map(|(c, p, g)| evaluate_case(c, p, g, None, &opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalRun {
        aggregate: aggregate(&reports),
        reports,
        missing,
        num_classes,
    })
}

pub const CSV_HEADER: &str = "case_id,class_id,dsc,nsd,hd95,f1";

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One line per report.
pub fn reports_jsonl(reports: &[MetricReport]) -> Result<String> {
    let mut out = String::new();
    for r in reports {
        out += &serde_json::to_string(r)?;
        out.push('\n');
    }
    Ok(out)
}

/// Per-case per-class rows, then `mean` and `std` rows per class.
pub fn reports_csv(run: &EvalRun) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &run.reports {
        for m in &r.per_class {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.case_id,
                m.class_id,
                cell(m.dsc),
                cell(m.nsd),
                cell(m.hd95),
                cell(r.f1)
            );
        }
    }
    let f1 = run.aggregate.f1;
    for (label, pick) in [("mean", (|s: Stat| s.mean) as fn(Stat) -> f64), ("std", |s: Stat| s.std)] {
        for a in &run.aggregate.per_class {
            let _ = writeln!(
                out,
                "{label},{},{},{},{},{}",
                a.class_id,
                cell(a.dsc.map(pick)),
                cell(a.nsd.map(pick)),
                cell(a.hd95.map(pick)),
                cell(f1.map(pick))
            );
        }
    }
    out
}

/// Where the CSV goes for a given JSONL path.
pub fn csv_path(out: &Path) -> PathBuf {
    if out.extension().is_some_and(|e| e == "csv") {
        out.with_file_name("summary.csv")
    } else {
        out.with_extension("csv")
    }
}

/// Writes `out` (JSON lines) and its companion CSV. Returns the CSV path.
pub fn write_reports(run: &EvalRun, out: impl AsRef<Path>) -> Result<PathBuf> {
    let out = out.as_ref();
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(out, reports_jsonl(&run.reports)?).map_err(|e| Error::io(out, e))?;
    let csv = csv_path(out);
    fs::write(&csv, reports_csv(run)).map_err(|e| Error::io(&csv, e))?;
    Ok(csv)
}
