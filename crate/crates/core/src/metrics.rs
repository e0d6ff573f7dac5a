//! Step-wise judgment of predicted traces and the aggregate scores.
//!
//! `ACC(i)` is the share of instances predicting step `i` exactly, among
//! instances whose reference trace reaches step `i`. Step-weighted accuracy
//! averages `ACC(1..=T)` with weights 1 (uniform) or `i` (linear), leaving
//! out steps no instance reaches.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::generate::{to_json_line, BenchmarkInstance};
use crate::transcript::{parse_transcript, PredictedTrace, TranscriptRecord};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub id: String,
    /// `per_step[i - 1]` says whether step `i` was predicted exactly.
    pub per_step: Vec<bool>,
    /// Steps with a reference queue: the halt step or the step budget.
    pub horizon: usize,
    /// Halt claimed at the reference halt step and nothing predicted past
    /// it. Always true for traces that do not halt before the budget.
    pub halt_ok: bool,
    /// Whether an echoed step 0 matched the initial queue; `None` if absent.
    pub init_echo: Option<bool>,
}

impl Judgment {
    pub fn passed(&self) -> bool {
        self.halt_ok && self.per_step.iter().all(|c| *c)
    }

    /// First wrong step; the horizon if only the halt behaviour was wrong.
    pub fn first_error_step(&self) -> Option<usize> {
        match self.per_step.iter().position(|c| !c) {
            Some(i) => Some(i + 1),
            None if !self.halt_ok => Some(self.horizon),
            None => None,
        }
    }
}

pub fn compare(instance: &BenchmarkInstance, predicted: &PredictedTrace) -> Judgment {
    let h = instance.horizon();
    let per_step = (1..=h)
        .map(|i| predicted.matches(i, &instance.trace.steps[i]))
        .collect();
    let early_halt = instance.trace.halt_step.is_some_and(|s| s < instance.max_steps);
    let halt_ok = if early_halt {
        predicted.halt_claimed_at == Some(h) && predicted.last_index().is_none_or(|last| last <= h)
    } else {
        predicted.halt_claimed_at.is_none_or(|c| c >= h)
    };
    Judgment {
        id: instance.id.clone(),
        per_step,
        horizon: h,
        halt_ok,
        init_echo: predicted.step(0).map(|_| predicted.matches(0, &instance.init)),
    }
}

/// `(N_correct(i), N_total(i))`.
pub fn step_counts(judgments: &[Judgment], i: usize) -> (usize, usize) {
    assert!(i >= 1, "steps are numbered from 1");
    judgments
        .iter()
        .filter(|j| j.horizon >= i)
        .fold((0, 0), |(c, t), j| (c + j.per_step[i - 1] as usize, t + 1))
}

/// `ACC(i)`, or `None` when no instance reaches step `i`.
pub fn step_accuracy(judgments: &[Judgment], i: usize) -> Option<f64> {
    let (correct, total) = step_counts(judgments, i);
    (total > 0).then(|| correct as f64 / total as f64)
}

pub fn acc_curve(judgments: &[Judgment], horizon: usize) -> Vec<Option<f64>> {
    (1..=horizon).map(|i| step_accuracy(judgments, i)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Uniform,
    Linear,
}

/// Weighted mean of `acc[0..]` as `ACC(1..)`; `None` entries are skipped.
pub fn swa_from_curve(acc: &[Option<f64>], weighting: Weighting) -> Option<f64> {
    let (num, den) =
        acc.iter()
            .enumerate()
            .filter_map(|(k, a)| a.map(|a| (k + 1, a)))
            .fold((0.0, 0.0), |(n, d), (i, a)| {
                let w = match weighting {
                    Weighting::Uniform => 1.0,
                    Weighting::Linear => i as f64,
                };
                (n + w * a, d + w)
            });
    (den > 0.0).then(|| num / den)
}

pub fn swa(judgments: &[Judgment], weighting: Weighting, horizon: usize) -> Option<f64> {
    swa_from_curve(&acc_curve(judgments, horizon), weighting)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no judgments to score")]
    Empty,
}

pub fn pass_rate(judgments: &[Judgment]) -> Result<f64, MetricsError> {
    if judgments.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(judgments.iter().filter(|j| j.passed()).count() as f64 / judgments.len() as f64)
}

/// `fraction * 100`, rounded half-up to one decimal.
pub fn percent(fraction: f64) -> f64 {
    // the small offset keeps values like 0.0665 from landing just below .5
    ((fraction * 1000.0) + 0.5 + 1e-9).floor() / 10.0
}

/// First 16 hex digits of the SHA-256 of the dataset's JSON-lines bytes.
pub fn dataset_id(instances: &[BenchmarkInstance]) -> String {
    let mut hasher = Sha256::new();
    for inst in instances {
        hasher.update(to_json_line(inst).as_bytes());
        hasher.update(b"\n");
    }
    let digest = hasher.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccPoint {
    pub step: usize,
    pub acc: Option<f64>,
    pub n_correct: usize,
    pub n_total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceScore {
    pub passed: bool,
    pub first_error_step: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub model: String,
    pub dataset_id: String,
    pub acc_curve: Vec<AccPoint>,
    pub swa_uniform: Option<f64>,
    pub swa_linear: Option<f64>,
    pub pass_rate: f64,
    pub n_instances: usize,
    pub per_instance: IndexMap<String, InstanceScore>,
}

/// Judges every instance against its transcript record. Instances without
/// a successful record are judged against an empty prediction.
pub fn judge_all(instances: &[BenchmarkInstance], records: &[TranscriptRecord]) -> Vec<Judgment> {
    let by_id: std::collections::HashMap<&str, &TranscriptRecord> =
        records.iter().map(|r| (r.id.as_str(), r)).collect();
    instances
        .iter()
        .map(|inst| {
            let predicted = by_id
                .get(inst.id.as_str())
                .and_then(|r| r.response.as_deref().filter(|_| r.is_success()))
                .map(parse_transcript)
                .unwrap_or_default();
            compare(inst, &predicted)
        })
        .collect()
}

/// Scores over the horizon `T` = the largest step budget in the dataset.
pub fn score(
    model: &str,
    instances: &[BenchmarkInstance],
    judgments: &[Judgment],
) -> Result<ScoreReport, MetricsError> {
    let horizon = instances.iter().map(|i| i.max_steps).max().unwrap_or(0);
    let acc_curve = (1..=horizon)
        .map(|i| {
            let (n_correct, n_total) = step_counts(judgments, i);
            AccPoint {
                step: i,
                acc: (n_total > 0).then(|| n_correct as f64 / n_total as f64),
                n_correct,
                n_total,
            }
        })
        .collect::<Vec<_>>();
    let curve: Vec<Option<f64>> = acc_curve.iter().map(|p| p.acc).collect();
    Ok(ScoreReport {
        model: model.to_string(),
        dataset_id: dataset_id(instances),
        swa_uniform: swa_from_curve(&curve, Weighting::Uniform),
        swa_linear: swa_from_curve(&curve, Weighting::Linear),
        pass_rate: pass_rate(judgments)?,
        n_instances: judgments.len(),
        per_instance: judgments
            .iter()
            .map(|j| {
                (
                    j.id.clone(),
                    InstanceScore {
                        passed: j.passed(),
                        first_error_step: j.first_error_step(),
                    },
                )
            })
            .collect(),
        acc_curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tag::TagSystem;
    use crate::transcript::format_ground_truth;

    fn j(per_step: &[bool]) -> Judgment {
        Judgment {
            id: String::new(),
            per_step: per_step.to_vec(),
            horizon: per_step.len(),
            halt_ok: true,
            init_echo: None,
        }
    }

    #[test]
    fn swa_spot_values() {
        let acc = [Some(1.0), Some(0.5)];
        assert!((swa_from_curve(&acc, Weighting::Uniform).unwrap() - 0.75).abs() < 1e-12);
        assert!((swa_from_curve(&acc, Weighting::Linear).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(swa_from_curve(&[None, Some(0.5)], Weighting::Uniform), Some(0.5));
        assert_eq!(swa_from_curve(&[None], Weighting::Linear), None);
    }

    #[test]
    fn step_accuracy_counts() {
        let js = [j(&[true, true, true]), j(&[true, true, false]), j(&[false])];
        assert_eq!(step_accuracy(&js, 3), Some(0.5));
        assert_eq!(step_accuracy(&js, 1), Some(2.0 / 3.0));
        assert_eq!(step_accuracy(&js, 4), None);
        assert_eq!(pass_rate(&js), Ok(1.0 / 3.0));
        assert_eq!(pass_rate(&[]), Err(MetricsError::Empty));
    }

    #[test]
    fn percent_rounds_half_up() {
        assert_eq!(percent(1.0), 100.0);
        assert_eq!(percent(0.0665), 6.7);
        assert_eq!(percent(0.94), 94.0);
        assert_eq!(percent(2.0 / 3.0), 66.7);
        assert_eq!(percent(0.0), 0.0);
    }

    fn roman() -> BenchmarkInstance {
        let sys = TagSystem::parse_rules(2, &["A : E D A B C", "B : D", "C : E E E D D", "D : B C", "E : D"]).unwrap();
        BenchmarkInstance::new("roman", sys, "[B A E E C]".parse().unwrap(), 30).unwrap()
    }

    #[test]
    fn halt_behaviour_decides_pass() {
        let inst = roman();
        let truth = format_ground_truth(&inst);
        let ok = compare(&inst, &parse_transcript(&truth));
        assert!(ok.passed());
        assert_eq!(ok.horizon, 18);
        assert_eq!(ok.init_echo, Some(true));

        let no_claim = compare(&inst, &parse_transcript(&truth.replace(" <halt>", "")));
        assert!(no_claim.per_step.iter().all(|c| *c));
        assert!(!no_claim.passed());
        assert_eq!(no_claim.first_error_step(), Some(18));

        let extra = format!("{truth}### step 19:\n- Queue State: [D]\n");
        assert!(!compare(&inst, &parse_transcript(&extra)).passed());
    }
}
