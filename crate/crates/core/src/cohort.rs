//! Batch scoring of labelled sessions and confusion-matrix metrics.

use std::io::Read;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{Eye, Schedule};
use crate::scoring::{score_session, Classification, PipelineParams};
use crate::session::Session;

/// Ground truth for one subject. The affected eye is optional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrueLabel {
    Negative,
    Positive,
    PositiveLeft,
    PositiveRight,
}

impl TrueLabel {
    pub fn is_positive(self) -> bool {
        self != TrueLabel::Negative
    }

    pub fn affected_eye(self) -> Option<Eye> {
        match self {
            TrueLabel::PositiveLeft => Some(Eye::Left),
            TrueLabel::PositiveRight => Some(Eye::Right),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledOutcome {
    pub subject: String,
    pub true_label: TrueLabel,
    pub predicted: Classification,
    pub final_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CohortMetrics {
    pub accuracy: f64,
    /// Absent when the cohort has no positive subjects.
    pub sensitivity: Option<f64>,
    /// Absent when the cohort has no negative subjects.
    pub specificity: Option<f64>,
    pub tp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
    /// Among true positives with a labelled eye, the fraction whose
    /// predicted eye matches.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eye_agreement: Option<f64>,
}

impl CohortMetrics {
    pub fn total(&self) -> usize {
        self.tp + self.fn_ + self.tn + self.fp
    }
}

pub fn evaluate_cohort(outcomes: &[LabeledOutcome]) -> Result<CohortMetrics> {
    if outcomes.is_empty() {
        return Err(Error::Cohort("no outcomes to evaluate".into()));
    }
    let mut m = CohortMetrics::default();
    let (mut eye_labelled, mut eye_matched) = (0usize, 0usize);
    for o in outcomes {
        match (o.true_label.is_positive(), o.predicted.is_positive()) {
            (true, true) => {
                m.tp += 1;
                if let Some(eye) = o.true_label.affected_eye() {
                    eye_labelled += 1;
                    if o.predicted.affected_eye() == Some(eye) {
                        eye_matched += 1;
                    }
                }
            }
            (true, false) => m.fn_ += 1,
            (false, false) => m.tn += 1,
            (false, true) => m.fp += 1,
        }
    }
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    m.accuracy = (m.tp + m.tn) as f64 / outcomes.len() as f64;
    m.sensitivity = ratio(m.tp, m.tp + m.fn_);
    m.specificity = ratio(m.tn, m.tn + m.fp);
    m.eye_agreement = ratio(eye_matched, eye_labelled);
    Ok(m)
}

/// One manifest row: `subject,session_path,label`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ManifestEntry {
    pub subject: String,
    pub session_path: PathBuf,
    pub label: TrueLabel,
}

pub fn read_manifest<R: Read>(reader: R) -> Result<Vec<ManifestEntry>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers != ["subject", "session_path", "label"] {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header `subject,session_path,label`, got `{}`",
                headers.join(",")
            ),
        });
    }
    rdr.deserialize()
        .map(|r| {
            r.map_err(|e: csv::Error| Error::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })
        })
        .collect()
}

/// Scores every manifest entry concurrently. Relative session paths are
/// resolved against `base_dir`. Results keep manifest order.
pub fn run_cohort(
    entries: &[ManifestEntry],
    base_dir: &Path,
    schedule: &Schedule,
    params: &PipelineParams,
) -> Result<(Vec<LabeledOutcome>, CohortMetrics)> {
    let outcomes = entries
        .par_iter()
        .map(|entry| {
            let path = base_dir.join(&entry.session_path);
            let session = crate::io::read_session(&path)?;
            let report = score_session(&session, schedule, params)
                .map_err(|e| Error::Cohort(format!("subject {}: {e}", entry.subject)))?;
            Ok(LabeledOutcome {
                subject: entry.subject.clone(),
                true_label: entry.label,
                predicted: report.classification,
                final_score: report.final_score,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let metrics = evaluate_cohort(&outcomes)?;
    Ok((outcomes, metrics))
}

/// Scores in-memory sessions; used when sessions never touch disk.
pub fn score_labelled_sessions(
    sessions: &[(String, TrueLabel, Session)],
    schedule: &Schedule,
    params: &PipelineParams,
) -> Result<(Vec<LabeledOutcome>, CohortMetrics)> {
    let outcomes = sessions
        .par_iter()
        .map(|(subject, label, session)| {
            let report = score_session(session, schedule, params)
                .map_err(|e| Error::Cohort(format!("subject {subject}: {e}")))?;
            Ok(LabeledOutcome {
                subject: subject.clone(),
                true_label: *label,
                predicted: report.classification,
                final_score: report.final_score,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let metrics = evaluate_cohort(&outcomes)?;
    Ok((outcomes, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn outcome(label: TrueLabel, predicted: Classification) -> LabeledOutcome {
        LabeledOutcome {
            subject: "s".into(),
            true_label: label,
            predicted,
            final_score: 0.0,
        }
    }

    fn cohort(tp: usize, fn_: usize, tn: usize, fp: usize) -> Vec<LabeledOutcome> {
        use Classification::*;
        let mut v = Vec::new();
        v.extend((0..tp).map(|_| outcome(TrueLabel::Positive, PositiveLeft)));
        v.extend((0..fn_).map(|_| outcome(TrueLabel::Positive, Negative)));
        v.extend((0..tn).map(|_| outcome(TrueLabel::Negative, Negative)));
        v.extend((0..fp).map(|_| outcome(TrueLabel::Negative, PositiveRight)));
        v
    }

    #[test]
    fn reported_clinical_metrics() {
        // 36 controls with one false positive, 4 patients all detected.
        let m = evaluate_cohort(&cohort(4, 0, 35, 1)).unwrap();
        assert_eq!(m.total(), 40);
        assert!((m.accuracy - 0.975).abs() < 1e-12);
        assert_eq!(m.sensitivity, Some(1.0));
        assert!((m.specificity.unwrap() - 0.9722).abs() < 1e-4);
    }

    #[test]
    fn perfect_and_mixed_cohorts() {
        let m = evaluate_cohort(&cohort(3, 0, 5, 0)).unwrap();
        assert_eq!(
            (m.accuracy, m.sensitivity, m.specificity),
            (1.0, Some(1.0), Some(1.0))
        );

        let m = evaluate_cohort(&cohort(2, 1, 3, 1)).unwrap();
        assert!((m.accuracy - 5.0 / 7.0).abs() < 1e-12);
        assert!((m.sensitivity.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.specificity.unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn undefined_rates_are_absent() {
        let m = evaluate_cohort(&cohort(0, 0, 4, 1)).unwrap();
        assert_eq!(m.sensitivity, None);
        let m = evaluate_cohort(&cohort(2, 1, 0, 0)).unwrap();
        assert_eq!(m.specificity, None);
        assert!(evaluate_cohort(&[]).is_err());
        let json = serde_json::to_value(m).unwrap();
        assert!(json["specificity"].is_null());
        assert_eq!(json["fn"], 1);
    }

    #[test]
    fn eye_agreement() {
        let v = vec![
            outcome(TrueLabel::PositiveLeft, Classification::PositiveLeft),
            outcome(TrueLabel::PositiveRight, Classification::PositiveLeft),
            outcome(TrueLabel::Positive, Classification::PositiveRight),
        ];
        let m = evaluate_cohort(&v).unwrap();
        assert_eq!(m.eye_agreement, Some(0.5));
        assert_eq!(
            evaluate_cohort(&cohort(1, 0, 1, 0)).unwrap().eye_agreement,
            None
        );
    }

    #[test]
    fn manifest_parsing() {
        let text = "subject,session_path,label\nA,a.csv,negative\nB,sub/b.csv,positive_left\n";
        let m = read_manifest(text.as_bytes()).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[1].label, TrueLabel::PositiveLeft);
        assert_eq!(m[1].session_path, PathBuf::from("sub/b.csv"));
        assert!(read_manifest("subject,path,label\n".as_bytes()).is_err());
        let bad = "subject,session_path,label\nA,a.csv,maybe\n";
        assert!(matches!(
            read_manifest(bad.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    fn arb_outcome() -> impl Strategy<Value = LabeledOutcome> {
        (
            prop_oneof![Just(TrueLabel::Negative), Just(TrueLabel::Positive)],
            prop_oneof![
                Just(Classification::Negative),
                Just(Classification::PositiveLeft),
                Just(Classification::PositiveRight)
            ],
        )
            .prop_map(|(l, p)| outcome(l, p))
    }

    proptest! {
        #[test]
        fn relabelling_swaps_sensitivity_and_specificity(
            outcomes in proptest::collection::vec(arb_outcome(), 1..40),
        ) {
            let flipped: Vec<_> = outcomes
                .iter()
                .map(|o| LabeledOutcome {
                    true_label: if o.true_label.is_positive() { TrueLabel::Negative } else { TrueLabel::Positive },
                    predicted: if o.predicted.is_positive() { Classification::Negative } else { Classification::PositiveLeft },
                    ..o.clone()
                })
                .collect();
            let a = evaluate_cohort(&outcomes).unwrap();
            let b = evaluate_cohort(&flipped).unwrap();
            prop_assert_eq!(a.sensitivity, b.specificity);
            prop_assert_eq!(a.specificity, b.sensitivity);
            prop_assert_eq!(a.accuracy, b.accuracy);
        }

        #[test]
        fn metrics_ignore_order(
            (outcomes, shuffled) in proptest::collection::vec(arb_outcome(), 1..40)
                .prop_flat_map(|v| (Just(v.clone()), Just(v).prop_shuffle())),
        ) {
            prop_assert_eq!(evaluate_cohort(&outcomes).unwrap(), evaluate_cohort(&shuffled).unwrap());
        }
    }
}
