//! Classification metrics and temporal scale variation statistics.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::media::DatasetManifest;

/// Per-class accuracies (sorted by class) and their unweighted mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassAccuracy {
    pub per_class: Vec<(String, f64)>,
    pub mean: f64,
}

pub fn mean_class_accuracy(predictions: &[String], labels: &[String]) -> Result<ClassAccuracy> {
    if labels.is_empty() {
        return Err(Error::InvalidArgument("no predictions to score".into()));
    }
    if predictions.len() != labels.len() {
        return Err(Error::Dim {
            expected: labels.len(),
            got: predictions.len(),
        });
    }
    let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for (p, l) in predictions.iter().zip(labels) {
        let e = tally.entry(l.as_str()).or_default();
        e.1 += 1;
        if p == l {
            e.0 += 1;
        }
    }
    let per_class: Vec<(String, f64)> = tally
        .into_iter()
        .map(|(c, (ok, n))| (c.to_string(), ok as f64 / n as f64))
        .collect();
    let mean = per_class.iter().map(|p| p.1).sum::<f64>() / per_class.len() as f64;
    Ok(ClassAccuracy { per_class, mean })
}

/// Average precision of a ranking. Scores are sorted descending; equal
/// scores keep their input order.
pub fn average_precision(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::Dim {
            expected: positive.len(),
            got: scores.len(),
        });
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    if n_pos == 0 {
        return Err(Error::InvalidArgument("average precision needs at least one positive".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut sum = 0f64;
    for (rank, &i) in order.iter().enumerate() {
        if positive[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / n_pos as f64)
}

/// Per-class average precision (class order as given) and the mean.
/// `scores[i][k]` is sample `i`'s score for class `k`.
pub fn mean_average_precision(scores: &[Vec<f64>], classes: &[String], labels: &[String]) -> Result<(f64, Vec<f64>)> {
    let per_class = classes
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let s: Vec<f64> = scores.iter().map(|row| row[k]).collect();
            let pos: Vec<bool> = labels.iter().map(|l| l == c).collect();
            average_precision(&s, &pos).map_err(|_| Error::InvalidArgument(format!("class {c} has no positive samples")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = per_class.iter().sum::<f64>() / per_class.len().max(1) as f64;
    Ok((mean, per_class))
}

/// Population standard deviation of `durations` over their mean.
pub fn tsvf(durations: &[f64]) -> Result<f64> {
    if durations.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "scale variation needs at least 2 durations, got {}",
            durations.len()
        )));
    }
    let n = durations.len() as f64;
    let mean = durations.iter().sum::<f64>() / n;
    if mean.is_nan() || mean <= 0.0 {
        return Err(Error::InvalidArgument("durations have a non-positive mean".into()));
    }
    let var = durations.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    Ok(var.sqrt() / mean)
}

/// Per-class scale variation (sorted by class) and its unweighted mean.
pub fn mtsvf(manifest: &DatasetManifest) -> Result<(f64, Vec<(String, f64)>)> {
    let mut by_class: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for e in &manifest.entries {
        by_class.entry(e.label.as_str()).or_default().push(e.duration_frames as f64);
    }
    let per_class = by_class
        .into_iter()
        .map(|(c, d)| {
            tsvf(&d)
                .map(|v| (c.to_string(), v))
                .map_err(|e| Error::InvalidArgument(format!("class {c}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = per_class.iter().map(|p| p.1).sum::<f64>() / per_class.len() as f64;
    Ok((mean, per_class))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn accuracy_examples() {
        let labels = s(&["A", "A", "B", "B"]);
        assert_eq!(mean_class_accuracy(&labels, &labels).unwrap().mean, 1.0);
        let half = mean_class_accuracy(&s(&["A", "A", "B", "A"]), &labels).unwrap();
        assert_eq!(half.mean, 0.75);
        assert_eq!(mean_class_accuracy(&s(&["B", "B", "A", "A"]), &labels).unwrap().mean, 0.0);
        assert!(mean_class_accuracy(&[], &[]).is_err());
    }

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision(&[0.9, 0.8, 0.7], &[true, false, true]).unwrap(), (1.0 + 2.0 / 3.0) / 2.0);
        assert_eq!(average_precision(&[3.0, 2.0, 1.0], &[true, true, false]).unwrap(), 1.0);
        assert_eq!(average_precision(&[0.1], &[true]).unwrap(), 1.0);
        assert!(average_precision(&[0.1], &[false]).is_err());
    }

    #[test]
    fn tsvf_examples() {
        assert_eq!(tsvf(&[5.0, 5.0, 5.0]).unwrap(), 0.0);
        assert!((tsvf(&[2.0, 4.0]).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!(tsvf(&[3.0]).is_err());
        assert!(tsvf(&[0.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn accuracy_ignores_order(pairs in proptest::collection::vec((0u8..3, 0u8..3), 1..40), rot in 0usize..40) {
            let p: Vec<String> = pairs.iter().map(|x| x.0.to_string()).collect();
            let l: Vec<String> = pairs.iter().map(|x| x.1.to_string()).collect();
            let k = rot % p.len();
            let (mut p2, mut l2) = (p.clone(), l.clone());
            p2.rotate_left(k);
            l2.rotate_left(k);
            prop_assert_eq!(mean_class_accuracy(&p, &l).unwrap(), mean_class_accuracy(&p2, &l2).unwrap());
        }

        #[test]
        fn tsvf_scale_invariant(d in proptest::collection::vec(1.0f64..500.0, 2..30), c in 0.01f64..100.0) {
            let scaled: Vec<f64> = d.iter().map(|x| x * c).collect();
            prop_assert!((tsvf(&d).unwrap() - tsvf(&scaled).unwrap()).abs() < 1e-12);
        }
    }
}
