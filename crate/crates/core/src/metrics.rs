//! Accuracy, group fairness gaps and selection-quality statistics.
//!
//! Binary fairness metrics treat class 1 as the positive outcome and groups
//! 0 and 1 as the compared populations. Degenerate inputs yield `None`,
//! which the logs render as `-`.

use crate::data::{DatasetTable, Example};
use crate::error::{Error, Result};
use crate::model::{argmax, Model};

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::input("predictions and labels differ in length"));
    }
    if predictions.is_empty() {
        return Err(Error::input("accuracy of an empty set"));
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// Share of positive predictions in `group`, or `None` when it is empty.
fn positive_rate<'a>(pairs: impl Iterator<Item = (&'a usize, &'a usize)>, group: usize) -> Option<f64> {
    let (mut n, mut pos) = (0usize, 0usize);
    for (p, g) in pairs {
        if *g == group {
            n += 1;
            pos += usize::from(*p == 1);
        }
    }
    (n > 0).then(|| pos as f64 / n as f64)
}

pub fn group_positive_rates(predictions: &[usize], groups: &[usize]) -> [Option<f64>; 2] {
    [0, 1].map(|g| positive_rate(predictions.iter().zip(groups), g))
}

/// `|P(Ŷ=1 | S=1) - P(Ŷ=1 | S=0)|`.
pub fn delta_dp(predictions: &[usize], groups: &[usize]) -> Option<f64> {
    match group_positive_rates(predictions, groups) {
        [Some(a), Some(b)] => Some((a - b).abs()),
        _ => None,
    }
}

/// True-positive rate per group among examples with label 1.
pub fn group_true_positive_rates(predictions: &[usize], labels: &[usize], groups: &[usize]) -> [Option<f64>; 2] {
    [0, 1].map(|g| {
        let pairs = predictions
            .iter()
            .zip(groups)
            .zip(labels)
            .filter(|(_, l)| **l == 1)
            .map(|(pg, _)| pg);
        positive_rate(pairs, g)
    })
}

/// `|P(Ŷ=1 | Y=1, S=1) - P(Ŷ=1 | Y=1, S=0)|`; `None` if a group has no positives.
pub fn delta_deo(predictions: &[usize], labels: &[usize], groups: &[usize]) -> Option<f64> {
    match group_true_positive_rates(predictions, labels, groups) {
        [Some(a), Some(b)] => Some((a - b).abs()),
        _ => None,
    }
}

/// Smaller ratio of the two group positive rates; `None` unless both are positive.
pub fn p_percent_rule(predictions: &[usize], groups: &[usize]) -> Option<f64> {
    match group_positive_rates(predictions, groups) {
        [Some(a), Some(b)] if a > 0.0 && b > 0.0 => Some((a / b).min(b / a)),
        _ => None,
    }
}

/// Fraction of `selected` whose observed label disagrees with the clean one.
pub fn discriminated_selection_rate<'a>(selected: impl IntoIterator<Item = &'a Example>) -> Result<f64> {
    let (mut n, mut flipped) = (0usize, 0usize);
    for ex in selected {
        let f = ex
            .is_flipped()
            .ok_or_else(|| Error::input(format!("example {} has no clean label", ex.id)))?;
        n += 1;
        flipped += usize::from(f);
    }
    if n == 0 {
        return Err(Error::input("no selected examples"));
    }
    Ok(flipped as f64 / n as f64)
}

/// 1-based index of the first epoch reaching `target`, or `None`.
pub fn epochs_to_target(accuracies: &[f64], target: f64) -> Option<usize> {
    accuracies.iter().position(|&a| a >= target).map(|i| i + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub delta_dp: Option<f64>,
    pub delta_deo: Option<f64>,
    pub p_percent: Option<f64>,
    pub positive_rates: [Option<f64>; 2],
    pub true_positive_rates: [Option<f64>; 2],
}

impl EvalReport {
    pub fn from_predictions(predictions: &[usize], labels: &[usize], groups: &[usize]) -> Result<Self> {
        Ok(EvalReport {
            accuracy: accuracy(predictions, labels)?,
            delta_dp: delta_dp(predictions, groups),
            delta_deo: delta_deo(predictions, labels, groups),
            p_percent: p_percent_rule(predictions, groups),
            positive_rates: group_positive_rates(predictions, groups),
            true_positive_rates: group_true_positive_rates(predictions, labels, groups),
        })
    }
}

/// Evaluates `model` on `table` against clean labels.
pub fn evaluate(model: &Model, table: &DatasetTable) -> Result<EvalReport> {
    let mut preds = Vec::with_capacity(table.len());
    let mut labels = Vec::with_capacity(table.len());
    let mut groups = Vec::with_capacity(table.len());
    for ex in table.iter() {
        let z = ex
            .z
            .ok_or_else(|| Error::input(format!("evaluation example {} has no clean label", ex.id)))?;
        preds.push(argmax(&model.predict_proba(ex)?));
        labels.push(z);
        groups.push(ex.s);
    }
    EvalReport::from_predictions(&preds, &labels, &groups)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_counts() {
        assert_eq!(accuracy(&[1, 0, 1], &[1, 0, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 1], &[0, 0]).unwrap(), 0.0);
        let p = [1, 1, 1, 1, 1, 1, 1, 0, 0, 0];
        assert!((accuracy(&p, &[1; 10]).unwrap() - 0.7).abs() < 1e-15);
        assert!(accuracy(&[], &[]).is_err());
    }

    #[test]
    fn delta_dp_cases() {
        // rates 0.6 vs 0.4
        let preds = [1, 1, 1, 0, 0, 1, 1, 0, 0, 0];
        let groups = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        assert!((delta_dp(&preds, &groups).unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(delta_dp(&[1, 0, 1, 0], &[0, 0, 1, 1]), Some(0.0));
        let preds = [1, 0, 1, 1, 0, 0, 1, 0];
        let groups = [0, 0, 0, 0, 1, 1, 1, 1];
        assert_eq!(delta_dp(&preds, &groups), Some(0.5));
        assert_eq!(delta_dp(&[1, 0], &[0, 0]), None);
    }

    #[test]
    fn delta_deo_cases() {
        // TPR 0.9 vs 0.8
        let mut preds = vec![1; 9];
        preds.push(0);
        preds.extend([1, 1, 1, 1, 1, 1, 1, 1, 0, 0]);
        let labels = vec![1; 20];
        let groups: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        assert!((delta_deo(&preds, &labels, &groups).unwrap() - 0.1).abs() < 1e-12);
        // no positives in group 1
        assert_eq!(delta_deo(&[1, 0, 1], &[1, 1, 0], &[0, 0, 1]), None);
        let preds = [1, 0, 0, 1, 1];
        let labels = [1, 1, 1, 1, 1];
        let groups = [0, 0, 0, 1, 1];
        assert!((delta_deo(&preds, &labels, &groups).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn p_percent_cases() {
        // 0.4 vs 0.6
        let preds = [1, 1, 0, 0, 0, 1, 1, 1, 0, 0];
        let groups = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        assert!((p_percent_rule(&preds, &groups).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(p_percent_rule(&[1, 0, 1, 0], &[0, 0, 1, 1]), Some(1.0));
        let preds = [1, 0, 0, 0, 0, 1, 1, 1, 1, 0];
        assert!((p_percent_rule(&preds, &groups).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(p_percent_rule(&[0, 0, 1, 0], &[0, 0, 1, 1]), None);
    }

    #[test]
    fn swap_symmetry() {
        let preds = [1, 0, 1, 1, 0, 0, 1, 0, 1];
        let labels = [1, 1, 0, 1, 1, 0, 1, 1, 1];
        let groups = [0, 1, 0, 0, 1, 1, 1, 0, 1];
        let swapped: Vec<usize> = groups.iter().map(|g| 1 - g).collect();
        assert_eq!(delta_dp(&preds, &groups), delta_dp(&preds, &swapped));
        assert_eq!(delta_deo(&preds, &labels, &groups), delta_deo(&preds, &labels, &swapped));
        assert_eq!(p_percent_rule(&preds, &groups), p_percent_rule(&preds, &swapped));
    }

    fn sel(flipped: bool) -> Example {
        Example {
            id: 0,
            features: vec![],
            y: usize::from(flipped),
            z: Some(0),
            s: 0,
        }
    }

    #[test]
    fn discriminated_rate() {
        assert_eq!(discriminated_selection_rate(&[sel(false), sel(false)]).unwrap(), 0.0);
        assert_eq!(discriminated_selection_rate(&[sel(true), sel(true)]).unwrap(), 1.0);
        let batch: Vec<Example> = (0..8).map(|i| sel(i < 3)).collect();
        assert_eq!(discriminated_selection_rate(&batch).unwrap(), 0.375);
        let mut unknown = sel(true);
        unknown.z = None;
        assert!(discriminated_selection_rate(&[unknown]).is_err());
    }

    #[test]
    fn epochs_to_target_cases() {
        assert_eq!(epochs_to_target(&[0.6, 0.72, 0.81], 0.8), Some(3));
        assert_eq!(epochs_to_target(&[0.6, 0.72, 0.81], 0.95), None);
        assert_eq!(epochs_to_target(&[0.6, 0.72, 0.81], 0.0), Some(1));
    }
}
