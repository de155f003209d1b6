use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::model::Verdict;

/// Binary confusion counts with "relevant" as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    /// 0 when nothing was predicted positive.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    /// 0 when there are no positive labels.
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall; 0 when both are 0.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn report(&self) -> MetricsReport {
        MetricsReport {
            accuracy: self.accuracy(),
            precision: self.precision(),
            recall: self.recall(),
            f1: self.f1(),
            kappa: None,
            matrix: *self,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub kappa: Option<f64>,
    pub matrix: ConfusionMatrix,
}

/// Standard binary metrics of `preds` against `labels`. Anything other than
/// [`Verdict::Relevant`] counts as negative. The report's `kappa` is the
/// chance-corrected agreement between the two lists.
pub fn compute_metrics<T: Copy + Into<Verdict>>(preds: &[T], labels: &[T]) -> Result<MetricsReport, EvalError> {
    if preds.len() != labels.len() {
        return Err(EvalError::LengthMismatch(preds.len(), labels.len()));
    }
    if preds.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut m = ConfusionMatrix::default();
    let mut pred_pos = Vec::with_capacity(preds.len());
    let mut label_pos = Vec::with_capacity(labels.len());
    for (&p, &l) in preds.iter().zip(labels) {
        let (p, l) = (p.into().is_relevant(), l.into().is_relevant());
        match (p, l) {
            (true, true) => m.tp += 1,
            (true, false) => m.fp += 1,
            (false, true) => m.fn_ += 1,
            (false, false) => m.tn += 1,
        }
        pred_pos.push(p);
        label_pos.push(l);
    }
    let mut report = m.report();
    report.kappa = Some(cohen_kappa(&pred_pos, &label_pos)?);
    Ok(report)
}

/// Fraction of items on which both annotators agree.
pub fn raw_agreement<L: PartialEq>(a: &[L], b: &[L]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64)
}

/// Cohen's kappa, `(p_o - p_e) / (1 - p_e)` with `p_e` from the product of
/// the annotators' marginals. When `p_e = 1` the result is 1 if the
/// annotators agree everywhere, else 0.
pub fn cohen_kappa<L: Eq + Hash>(a: &[L], b: &[L]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = a.len() as u128;
    let mut agree: u128 = 0;
    let mut marginals: HashMap<&L, (u128, u128)> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        if x == y {
            agree += 1;
        }
        marginals.entry(x).or_default().0 += 1;
        marginals.entry(y).or_default().1 += 1;
    }
    // everything scaled by n^2 keeps the arithmetic in integers
    let expected: u128 = marginals.values().map(|(ca, cb)| ca * cb).sum();
    let n2 = n * n;
    if expected == n2 {
        return Ok(if agree == n { 1.0 } else { 0.0 });
    }
    let num = (n * agree) as f64 - expected as f64;
    let den = (n2 - expected) as f64;
    Ok(num / den)
}
