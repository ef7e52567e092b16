//! Cross-validation protocols over precomputed encodings.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::media::{DatasetManifest, Metric};
use crate::par::{self, Execution};

use super::metrics::{mean_average_precision, mean_class_accuracy};
use super::report::{ClassResult, EvalReport, FoldResult};
use super::svm::{train_one_vs_all, LinearModel, SvmParams};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub name: String,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// One fold per distinct group (sorted), testing on that group.
pub fn leave_one_group_out_folds(groups: &[String]) -> Result<Vec<Fold>> {
    let distinct: BTreeSet<&str> = groups.iter().map(String::as_str).collect();
    if distinct.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "leave-one-group-out needs at least 2 groups, got {}",
            distinct.len()
        )));
    }
    Ok(distinct
        .into_iter()
        .map(|g| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..groups.len()).partition(|&i| groups[i] == g);
            Fold {
                name: g.to_string(),
                train,
                test,
            }
        })
        .collect())
}

/// A single train/test split given by clip indices.
pub fn fixed_split(train: Vec<usize>, test: Vec<usize>) -> Result<Fold> {
    let t: BTreeSet<usize> = train.iter().copied().collect();
    if test.is_empty() || test.iter().any(|i| t.contains(i)) {
        return Err(Error::InvalidArgument("fixed split needs a non-empty test set disjoint from training".into()));
    }
    Ok(Fold {
        name: "fixed".into(),
        train,
        test,
    })
}

struct FoldOutcome {
    model_classes: Vec<String>,
    scores: Vec<Vec<f64>>,
}

/// Trains on every fold's training clips and scores its test clips. Clips
/// tested more than once keep their last prediction.
pub fn cross_validate(
    x: &[Vec<f64>],
    labels: &[String],
    folds: &[Fold],
    params: &SvmParams,
    metric: Metric,
    exec: Execution,
) -> Result<EvalReport> {
    if x.len() != labels.len() {
        return Err(Error::Dim {
            expected: labels.len(),
            got: x.len(),
        });
    }
    let outcomes = par::map(exec, folds, |f| -> Result<FoldOutcome> {
        let tx: Vec<Vec<f64>> = f.train.iter().map(|&i| x[i].clone()).collect();
        let tl: Vec<String> = f.train.iter().map(|&i| labels[i].clone()).collect();
        let (model, _) = train_one_vs_all(&tx, &tl, params, exec)?;
        let test: Vec<Vec<f64>> = f.test.iter().map(|&i| x[i].clone()).collect();
        Ok(FoldOutcome {
            scores: model.predict_scores(&test)?,
            model_classes: model.classes,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut tested: Vec<usize> = Vec::new();
    let mut seen = vec![false; x.len()];
    let mut classes: BTreeSet<String> = BTreeSet::new();
    for f in folds {
        for &i in &f.test {
            classes.insert(labels[i].clone());
            if !seen[i] {
                seen[i] = true;
                tested.push(i);
            }
        }
    }
    let classes: Vec<String> = classes.into_iter().collect();
    let mut scores = vec![vec![f64::NEG_INFINITY; classes.len()]; x.len()];
    let mut predicted = vec![String::new(); x.len()];
    let mut fold_results = Vec::new();
    for (f, o) in folds.iter().zip(&outcomes) {
        let missing: Vec<&String> = f
            .test
            .iter()
            .map(|&i| &labels[i])
            .filter(|l| !o.model_classes.contains(l))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if !missing.is_empty() {
            log::warn!("fold {}: classes {missing:?} have no training clips and score 0", f.name);
        }
        let mut correct = 0;
        for (&i, s) in f.test.iter().zip(&o.scores) {
            predicted[i] = o.model_classes[LinearModel::argmax(s)].clone();
            if predicted[i] == labels[i] {
                correct += 1;
            }
            for (k, c) in classes.iter().enumerate() {
                if let Some(m) = o.model_classes.iter().position(|mc| mc == c) {
                    scores[i][k] = s[m];
                }
            }
        }
        fold_results.push(FoldResult {
            name: f.name.clone(),
            n_train: f.train.len(),
            n_test: f.test.len(),
            accuracy: correct as f64 / f.test.len().max(1) as f64,
        });
    }
    tested.sort_unstable();
    let pred: Vec<String> = tested.iter().map(|&i| predicted[i].clone()).collect();
    let truth: Vec<String> = tested.iter().map(|&i| labels[i].clone()).collect();
    let acc = mean_class_accuracy(&pred, &truth)?;
    let test_scores: Vec<Vec<f64>> = tested.iter().map(|&i| scores[i].clone()).collect();
    let (_, aps) = mean_average_precision(&test_scores, &classes, &truth)?;
    let class_rows: Vec<ClassResult> = classes
        .iter()
        .zip(&acc.per_class)
        .zip(&aps)
        .map(|((c, (_, a)), &ap)| ClassResult {
            label: c.clone(),
            accuracy: *a,
            ap,
            delta: None,
            tsvf: None,
        })
        .collect();
    let n = class_rows.len() as f64;
    Ok(EvalReport {
        metric,
        mean_accuracy: class_rows.iter().map(|c| c.accuracy).sum::<f64>() / n,
        mean_ap: class_rows.iter().map(|c| c.ap).sum::<f64>() / n,
        classes: class_rows,
        folds: fold_results,
        baseline: None,
        info: Vec::new(),
    })
}

/// Leave-one-group-out evaluation of per-clip encodings aligned with the
/// manifest entries.
pub fn leave_one_group_out(
    manifest: &DatasetManifest,
    encodings: &[Vec<f64>],
    params: &SvmParams,
    exec: Execution,
) -> Result<EvalReport> {
    let groups: Vec<String> = manifest.entries.iter().map(|e| e.group.clone()).collect();
    let folds = leave_one_group_out_folds(&groups)?;
    let mut report = cross_validate(encodings, &manifest.labels(), &folds, params, manifest.metric, exec)?;
    report.attach_tsvf(manifest)?;
    Ok(report)
}
