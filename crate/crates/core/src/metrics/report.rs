use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{dsc, hd95, instance_f1, nsd};
use crate::error::{Error, Result};
use crate::tensor::Array;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Dsc,
    Nsd,
    Hd95,
    F1,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dsc" | "dice" => Ok(Metric::Dsc),
            "nsd" => Ok(Metric::Nsd),
            "hd95" => Ok(Metric::Hd95),
            "f1" => Ok(Metric::F1),
            other => Err(Error::InvalidArgument(format!(
                "unknown metric `{other}` (expected dsc, nsd, hd95, f1)"
            ))),
        }
    }
}

/// Parses a comma-separated metric list.
pub fn parse_metrics(list: &str) -> Result<Vec<Metric>> {
    let mut out: Vec<Metric> = Vec::new();
    for m in list.split(',').filter(|s| !s.trim().is_empty()) {
        let m = m.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument("empty metric list".into()));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    pub metrics: Vec<Metric>,
    pub tau: f64,
    pub iou_thresh: f64,
    /// Classes to score; background is usually left out.
    pub classes: Vec<i32>,
}

impl EvalOptions {
    pub fn new(num_classes: usize) -> Self {
        Self {
            metrics: vec![Metric::Dsc, Metric::Nsd, Metric::Hd95, Metric::F1],
            tau: 1.0,
            iou_thresh: 0.5,
            classes: (1..num_classes as i32).collect(),
        }
    }

    fn wants(&self, m: Metric) -> bool {
        self.metrics.contains(&m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class_id: i32,
    pub dsc: Option<f64>,
    pub nsd: Option<f64>,
    /// `None` when undefined (class absent from either mask) or not requested.
    pub hd95: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub case_id: String,
    pub per_class: Vec<ClassMetrics>,
    pub f1: Option<f64>,
}

/// Scores one case. `gt_instances` defaults to the connected components of
/// the ground-truth foreground.
pub fn evaluate_case(
    case_id: &str,
    pred: &Array<i32>,
    gt: &Array<i32>,
    gt_instances: Option<&Array<i32>>,
    opts: &EvalOptions,
) -> Result<MetricReport> {
    let per_class = opts
        .classes
        .iter()
        .map(|&c| {
            Ok(ClassMetrics {
                class_id: c,
                dsc: opts.wants(Metric::Dsc).then(|| dsc(pred, gt, c)).transpose()?,
                nsd: opts.wants(Metric::Nsd).then(|| nsd(pred, gt, c, opts.tau)).transpose()?,
                hd95: if opts.wants(Metric::Hd95) { hd95(pred, gt, c)? } else { None },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let f1 = if opts.wants(Metric::F1) {
        let derived;
        let inst = match gt_instances {
            Some(i) => i,
            None => {
                derived = super::instances_from_labels(gt);
                &derived
            }
        };
        Some(instance_f1(pred, inst, opts.iou_thresh)?)
    } else {
        None
    };
    Ok(MetricReport {
        case_id: case_id.to_string(),
        per_class,
        f1,
    })
}

/// Mean and population standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Stat {
            mean,
            std: var.sqrt(),
            n: values.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassAggregate {
    pub class_id: i32,
    pub dsc: Option<Stat>,
    pub nsd: Option<Stat>,
    pub hd95: Option<Stat>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub per_class: Vec<ClassAggregate>,
    pub f1: Option<Stat>,
}

/// Mean ± std across cases; undefined HD95 values are left out.
pub fn aggregate(reports: &[MetricReport]) -> Aggregate {
    let mut classes: Vec<i32> = reports
        .iter()
        .flat_map(|r| r.per_class.iter().map(|c| c.class_id))
        .collect();
    classes.sort_unstable();
    classes.dedup();
    let collect = |c: i32, f: fn(&ClassMetrics) -> Option<f64>| {
        let vals: Vec<f64> = reports
            .iter()
            .flat_map(|r| r.per_class.iter().filter(|m| m.class_id == c).filter_map(f))
            .collect();
        Stat::of(&vals)
    };
    Aggregate {
        per_class: classes
            .into_iter()
            .map(|c| ClassAggregate {
                class_id: c,
                dsc: collect(c, |m| m.dsc),
                nsd: collect(c, |m| m.nsd),
                hd95: collect(c, |m| m.hd95),
            })
            .collect(),
        f1: Stat::of(&reports.iter().filter_map(|r| r.f1).collect::<Vec<_>>()),
    }
}
