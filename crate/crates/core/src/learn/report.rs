//! Evaluation reports, their text form, and the improvement split.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::binio;
use crate::error::{Error, Result};
use crate::media::{DatasetManifest, Metric};

use super::metrics::mtsvf;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassResult {
    pub label: String,
    pub accuracy: f64,
    pub ap: f64,
    /// Change of the report metric against the baseline report.
    pub delta: Option<f64>,
    pub tsvf: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub name: String,
    pub n_train: usize,
    pub n_test: usize,
    /// Fraction of the fold's test clips classified correctly.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub metric: Metric,
    pub classes: Vec<ClassResult>,
    pub mean_accuracy: f64,
    pub mean_ap: f64,
    pub folds: Vec<FoldResult>,
    pub baseline: Option<String>,
    /// Free-form `key=value` lines kept in the summary block.
    pub info: Vec<(String, String)>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

impl EvalReport {
    pub fn value(&self, c: &ClassResult) -> f64 {
        match self.metric {
            Metric::Accuracy => c.accuracy,
            Metric::AveragePrecision => c.ap,
        }
    }

    /// Mean of the report metric over classes.
    pub fn headline(&self) -> f64 {
        match self.metric {
            Metric::Accuracy => self.mean_accuracy,
            Metric::AveragePrecision => self.mean_ap,
        }
    }

    /// Fills the per-class scale variation from `manifest`.
    pub fn attach_tsvf(&mut self, manifest: &DatasetManifest) -> Result<()> {
        let (_, per_class) = mtsvf(manifest)?;
        let map: BTreeMap<_, _> = per_class.into_iter().collect();
        for c in &mut self.classes {
            c.tsvf = map.get(&c.label).copied();
        }
        Ok(())
    }

    /// Records per-class deltas against `baseline`, named `name`.
    pub fn attach_baseline(&mut self, name: &str, baseline: &EvalReport) -> Result<()> {
        let deltas = class_deltas(baseline, self)?;
        for (c, d) in self.classes.iter_mut().zip(deltas) {
            c.delta = Some(d);
        }
        self.baseline = Some(name.to_string());
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("label\taccuracy\tap\tdelta\ttsvf\n");
        for c in &self.classes {
            let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", c.label, c.accuracy, c.ap, opt(c.delta), opt(c.tsvf));
        }
        out.push_str("\n[summary]\n");
        let _ = writeln!(out, "metric={}", self.metric.as_str());
        let _ = writeln!(out, "mean_accuracy={}", self.mean_accuracy);
        let _ = writeln!(out, "mean_ap={}", self.mean_ap);
        if let Some(b) = &self.baseline {
            let _ = writeln!(out, "baseline={b}");
        }
        let _ = writeln!(out, "folds={}", self.folds.len());
        for f in &self.folds {
            let _ = writeln!(out, "fold.{}={},{},{}", f.name, f.n_train, f.n_test, f.accuracy);
        }
        for (k, v) in &self.info {
            let _ = writeln!(out, "info.{k}={v}");
        }
        out
    }

    pub fn parse(text: &str, origin: &str) -> Result<EvalReport> {
        let bad = |detail: String| Error::format("report", origin, detail);
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(format!("bad number {s:?}")));
        let maybe = |s: &str| if s.trim() == "-" { Ok(None) } else { num(s).map(Some) };
        let mut lines = text.lines();
        if lines.next() != Some("label\taccuracy\tap\tdelta\ttsvf") {
            return Err(bad("missing header".into()));
        }
        let mut classes = Vec::new();
        for line in lines.by_ref() {
            if line.is_empty() {
                break;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                return Err(bad(format!("class row {line:?} has {} fields", f.len())));
            }
            classes.push(ClassResult {
                label: f[0].to_string(),
                accuracy: num(f[1])?,
                ap: num(f[2])?,
                delta: maybe(f[3])?,
                tsvf: maybe(f[4])?,
            });
        }
        if lines.next() != Some("[summary]") {
            return Err(bad("missing summary block".into()));
        }
        let mut report = EvalReport {
            metric: Metric::Accuracy,
            classes,
            mean_accuracy: 0.0,
            mean_ap: 0.0,
            folds: Vec::new(),
            baseline: None,
            info: Vec::new(),
        };
        for line in lines {
            let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("summary line {line:?}")))?;
            match k {
                "metric" => report.metric = Metric::parse(v).ok_or_else(|| bad(format!("metric {v:?}")))?,
                "mean_accuracy" => report.mean_accuracy = num(v)?,
                "mean_ap" => report.mean_ap = num(v)?,
                "baseline" => report.baseline = Some(v.to_string()),
                "folds" => {}
                _ if k.starts_with("fold.") => {
                    let f: Vec<&str> = v.split(',').collect();
                    if f.len() != 3 {
                        return Err(bad(format!("fold line {line:?}")));
                    }
                    let count = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad count {s:?}")));
                    report.folds.push(FoldResult {
                        name: k["fold.".len()..].to_string(),
                        n_train: count(f[0])?,
                        n_test: count(f[1])?,
                        accuracy: num(f[2])?,
                    });
                }
                _ if k.starts_with("info.") => report.info.push((k["info.".len()..].to_string(), v.to_string())),
                _ => return Err(bad(format!("unknown summary key {k:?}"))),
            }
        }
        Ok(report)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        binio::write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<EvalReport> {
        let bytes = binio::read_file(path)?;
        let text = String::from_utf8(bytes).map_err(|_| Error::format("report", path.display().to_string(), "not UTF-8"))?;
        EvalReport::parse(&text, &path.display().to_string())
    }
}

/// `method − baseline` per class, in the method's class order.
fn class_deltas(baseline: &EvalReport, method: &EvalReport) -> Result<Vec<f64>> {
    let base: BTreeMap<&str, f64> = baseline.classes.iter().map(|c| (c.label.as_str(), baseline.value(c))).collect();
    if base.len() != method.classes.len() || method.classes.iter().any(|c| !base.contains_key(c.label.as_str())) {
        return Err(Error::InvalidArgument("reports cover different classes".into()));
    }
    if baseline.metric != method.metric {
        return Err(Error::InvalidArgument("reports use different metrics".into()));
    }
    Ok(method.classes.iter().map(|c| method.value(c) - base[c.label.as_str()]).collect())
}

/// Classes split by whether the method matched or beat the baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct ImprovementSplit {
    pub improved: Vec<String>,
    pub declined: Vec<String>,
    pub improved_mtsvf: Option<f64>,
    pub declined_mtsvf: Option<f64>,
}

pub fn improvement_split(baseline: &EvalReport, method: &EvalReport, manifest: &DatasetManifest) -> Result<ImprovementSplit> {
    let deltas = class_deltas(baseline, method)?;
    let (_, per_class) = mtsvf(manifest)?;
    let tsvf: BTreeMap<String, f64> = per_class.into_iter().collect();
    let mut split = ImprovementSplit {
        improved: Vec::new(),
        declined: Vec::new(),
        improved_mtsvf: None,
        declined_mtsvf: None,
    };
    for (c, d) in method.classes.iter().zip(deltas) {
        if d >= 0.0 {
            split.improved.push(c.label.clone());
        } else {
            split.declined.push(c.label.clone());
        }
    }
    let group_mean = |labels: &[String]| -> Result<Option<f64>> {
        if labels.is_empty() {
            return Ok(None);
        }
        let mut s = 0.0;
        for l in labels {
            s += tsvf
                .get(l)
                .ok_or_else(|| Error::InvalidArgument(format!("class {l} is not in the manifest")))?;
        }
        Ok(Some(s / labels.len() as f64))
    };
    split.improved_mtsvf = group_mean(&split.improved)?;
    split.declined_mtsvf = group_mean(&split.declined)?;
    Ok(split)
}
