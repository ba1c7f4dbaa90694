//! By-sample and event-level scoring of label tracks.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::messages::loglikelihood;
use crate::preprocess::LabelTrack;
use crate::{ModelParams, Real, Sequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

/// A score plus a flag for the conventional value returned on a zero
/// denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Score {
    pub value: f64,
    pub degenerate: bool,
}

fn check_len(pred: &LabelTrack, truth: &LabelTrack) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch { expected: truth.len(), got: pred.len() });
    }
    Ok(())
}

/// Counts with any nonzero label treated as positive.
pub fn confusion(pred: &LabelTrack, truth: &LabelTrack) -> Result<Confusion> {
    check_len(pred, truth)?;
    let mut c = Confusion::default();
    for (&p, &t) in pred.labels.iter().zip(&truth.labels) {
        match (p != 0, t != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

impl Confusion {
    pub fn mcc(&self) -> Score {
        let (tp, fp, tn, fn_) = (self.tp as f64, self.fp as f64, self.tn as f64, self.fn_ as f64);
        let denom = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
        if denom == 0.0 {
            return Score { value: 0.0, degenerate: true };
        }
        Score { value: (tp * tn - fp * fn_) / denom, degenerate: false }
    }

    pub fn f1(&self) -> Score {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 || self.tp == 0 && (self.tp + self.fp == 0 || self.tp + self.fn_ == 0) {
            return Score { value: 0.0, degenerate: true };
        }
        Score { value: 2.0 * self.tp as f64 / denom as f64, degenerate: false }
    }
}

/// Matthews correlation coefficient of the binary tracks.
pub fn mcc(pred: &LabelTrack, truth: &LabelTrack) -> Result<Score> {
    Ok(confusion(pred, truth)?.mcc())
}

pub fn f1(pred: &LabelTrack, truth: &LabelTrack) -> Result<Score> {
    Ok(confusion(pred, truth)?.f1())
}

/// Maximal runs of positive samples as half-open `[start, end)` ranges.
pub fn events(track: &LabelTrack) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (n, &l) in track.labels.iter().enumerate() {
        match (l != 0, start) {
            (true, None) => start = Some(n),
            (false, Some(s)) => {
                out.push((s, n));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, track.len()));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventMetrics {
    pub truth_events: usize,
    pub detected: usize,
    pub predicted_events: usize,
    pub false_positives: usize,
    pub sensitivity: Score,
    /// False positive events per second of recording.
    pub false_positive_rate: f64,
}

/// Event sensitivity and false positive rate under any-overlap matching:
/// a truth event counts as detected if any predicted event shares at least
/// one sample with it, and a predicted event is a false positive if it
/// overlaps no truth event.
pub fn event_metrics(pred: &LabelTrack, truth: &LabelTrack, sample_rate: f64) -> Result<EventMetrics> {
    check_len(pred, truth)?;
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::InvalidRate(format!("{sample_rate} Hz")));
    }
    let pe = events(pred);
    let te = events(truth);
    let overlaps = |a: (usize, usize), b: (usize, usize)| a.0 < b.1 && b.0 < a.1;
    // Both lists are sorted, so a merge-style sweep would do; the quadratic
    // scan is fine for event counts in the thousands.
    let detected = te.iter().filter(|&&t| pe.iter().any(|&p| overlaps(p, t))).count();
    let false_positives = pe.iter().filter(|&&p| !te.iter().any(|&t| overlaps(p, t))).count();
    let sensitivity = if te.is_empty() {
        Score { value: 0.0, degenerate: true }
    } else {
        Score { value: detected as f64 / te.len() as f64, degenerate: false }
    };
    let seconds = truth.len() as f64 / sample_rate;
    Ok(EventMetrics {
        truth_events: te.len(),
        detected,
        predicted_events: pe.len(),
        false_positives,
        sensitivity,
        false_positive_rate: if seconds > 0.0 { false_positives as f64 / seconds } else { 0.0 },
    })
}

/// Negative log-likelihood of held-out sequences, summed over the batch.
pub fn predictive_nll<F: Real>(model: &ModelParams<F>, seqs: &[Sequence<F>]) -> Result<f64> {
    Ok(-loglikelihood(model, seqs)?.as_f64())
}

/// Collected metrics; absent fields were not requested.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricsReport {
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion: Option<Confusion>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mcc: Option<Score>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<Score>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub events: Option<EventMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nll: Option<f64>,
}

impl MetricsReport {
    /// `key=value` lines, one per reported quantity.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "samples={}", self.samples);
        if let Some(c) = &self.confusion {
            let _ = writeln!(s, "tp={}\nfp={}\ntn={}\nfn={}", c.tp, c.fp, c.tn, c.fn_);
        }
        if let Some(m) = &self.mcc {
            let _ = writeln!(s, "mcc={}", m.value);
            if m.degenerate {
                let _ = writeln!(s, "mcc_degenerate=true");
            }
        }
        if let Some(f) = &self.f1 {
            let _ = writeln!(s, "f1={}", f.value);
            if f.degenerate {
                let _ = writeln!(s, "f1_degenerate=true");
            }
        }
        if let Some(e) = &self.events {
            let _ = writeln!(s, "event_sensitivity={}", e.sensitivity.value);
            let _ = writeln!(s, "event_fpr_per_second={}", e.false_positive_rate);
            let _ = writeln!(s, "truth_events={}", e.truth_events);
            let _ = writeln!(s, "detected_events={}", e.detected);
            let _ = writeln!(s, "predicted_events={}", e.predicted_events);
            let _ = writeln!(s, "false_positive_events={}", e.false_positives);
        }
        if let Some(n) = self.nll {
            let _ = writeln!(s, "nll={n}");
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[usize]) -> LabelTrack {
        LabelTrack { labels: v.to_vec(), sample_rate: 1.0 }
    }

    fn counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> (LabelTrack, LabelTrack) {
        let mut p = Vec::new();
        let mut q = Vec::new();
        for (n, a, b) in [(tp, 1, 1), (fp, 1, 0), (tn, 0, 0), (fn_, 0, 1)] {
            p.extend(std::iter::repeat_n(a, n));
            q.extend(std::iter::repeat_n(b, n));
        }
        (t(&p), t(&q))
    }

    #[test]
    fn mcc_cases() {
        let truth = t(&[0, 1, 1, 0, 1, 0]);
        assert_eq!(mcc(&truth, &truth).unwrap().value, 1.0);
        let flipped = t(&[1, 0, 0, 1, 0, 1]);
        assert_eq!(mcc(&flipped, &truth).unwrap().value, -1.0);
        let (p, q) = counts(1, 1, 1, 1);
        assert_eq!(mcc(&p, &q).unwrap().value, 0.0);
        let constant = t(&[0; 6]);
        assert!(mcc(&constant, &truth).unwrap().degenerate);
        assert!(mcc(&t(&[0]), &truth).is_err());
    }

    #[test]
    fn f1_cases() {
        let truth = t(&[0, 1, 1, 0]);
        assert_eq!(f1(&truth, &truth).unwrap().value, 1.0);
        let none = f1(&t(&[0; 4]), &truth).unwrap();
        assert_eq!(none.value, 0.0);
        assert!(none.degenerate);
        let (p, q) = counts(2, 1, 0, 1);
        assert!((f1(&p, &q).unwrap().value - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn class_swap_symmetry() {
        let (p, q) = counts(5, 2, 11, 3);
        let swap = |x: &LabelTrack| t(&x.labels.iter().map(|&l| 1 - l).collect::<Vec<_>>());
        let m = mcc(&p, &q).unwrap().value;
        assert!((mcc(&swap(&p), &swap(&q)).unwrap().value - m).abs() < 1e-15);
        let f = f1(&p, &q).unwrap().value;
        assert!((f1(&swap(&p), &swap(&q)).unwrap().value - f).abs() > 1e-3);
    }

    #[test]
    fn events_runs() {
        assert_eq!(events(&t(&[1, 1, 0, 0, 1, 0, 1])), vec![(0, 2), (4, 5), (6, 7)]);
        assert!(events(&t(&[0, 0])).is_empty());
    }

    #[test]
    fn event_cases() {
        let truth = t(&[0, 1, 1, 1, 0, 0, 1, 1, 0, 0]);
        let e = event_metrics(&truth, &truth, 2.0).unwrap();
        assert_eq!((e.sensitivity.value, e.false_positive_rate), (1.0, 0.0));

        let single = t(&[0, 1, 1, 1, 1, 1, 0, 0]);
        let inside = t(&[0, 0, 0, 1, 0, 0, 0, 0]);
        assert_eq!(event_metrics(&inside, &single, 1.0).unwrap().sensitivity.value, 1.0);

        // overlaps the first truth event, adds a spurious one, misses the second
        let pred = t(&[0, 0, 1, 0, 0, 0, 0, 0, 0, 1]);
        let e = event_metrics(&pred, &truth, 2.0).unwrap();
        assert_eq!(e.sensitivity.value, 0.5);
        assert_eq!(e.false_positives, 1);
        assert!((e.false_positive_rate - 1.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn merging_predicted_events_keeps_sensitivity() {
        let truth = t(&[0, 1, 1, 0, 0, 1, 1, 0]);
        let split = t(&[0, 1, 0, 1, 0, 1, 0, 0]);
        let merged = t(&[0, 1, 1, 1, 0, 1, 0, 0]);
        let a = event_metrics(&split, &truth, 1.0).unwrap().sensitivity.value;
        let b = event_metrics(&merged, &truth, 1.0).unwrap().sensitivity.value;
        assert!(b >= a);
    }

    #[test]
    fn report_lists_each_metric_once() {
        let truth = t(&[0, 1, 1, 0]);
        let r = MetricsReport {
            samples: 4,
            confusion: Some(confusion(&truth, &truth).unwrap()),
            mcc: Some(mcc(&truth, &truth).unwrap()),
            f1: Some(f1(&truth, &truth).unwrap()),
            events: None,
            nll: Some(12.5),
        };
        let kv = r.to_key_values();
        assert_eq!(kv.matches("mcc=").count(), 1);
        assert_eq!(kv.matches("f1=").count(), 1);
        assert!(kv.contains("nll=12.5"));
        assert!(r.to_json().unwrap().contains("\"mcc\""));
    }
}
