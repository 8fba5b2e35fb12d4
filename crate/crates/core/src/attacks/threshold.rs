use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// Values strictly above the threshold are labelled 1.
    Above,
    /// Values strictly below the threshold are labelled 1.
    Below,
}

/// One-dimensional threshold rule chosen by exhaustive balanced-accuracy search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ThresholdClassifier {
    pub threshold: f64,
    pub polarity: Polarity,
    pub train_balanced_accuracy: f64,
    /// Set when all training values coincide and no split exists.
    pub degenerate: bool,
}

impl ThresholdClassifier {
    pub fn predict(&self, value: f64) -> bool {
        match self.polarity {
            Polarity::Above => value > self.threshold,
            Polarity::Below => value < self.threshold,
        }
    }

    /// Fraction of `values` labelled 1.
    pub fn positive_rate(&self, values: &[f64]) -> f64 {
        if values.is_empty() {
            return 0.0;
        }
        values.iter().filter(|&&v| self.predict(v)).count() as f64 / values.len() as f64
    }
}

/// Fits the threshold/polarity pair with the highest balanced accuracy on
/// `positives` (label 1) versus `negatives` (label 0). Candidates are the
/// midpoints between consecutive distinct pooled values; ties go to the
/// lowest threshold, then to `Above`.
pub fn fit_logit_classifier(positives: &[f64], negatives: &[f64]) -> Result<ThresholdClassifier> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::usage("threshold classifier needs both classes"));
    }
    if positives.iter().chain(negatives).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite classifier input".into()));
    }
    let mut pooled: Vec<(f64, bool)> = positives
        .iter()
        .map(|&v| (v, true))
        .chain(negatives.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));

    let p = positives.len() as u128;
    let n = negatives.len() as u128;
    let total = 2 * p * n;
    let mut best: Option<(u128, f64, Polarity)> = None;
    let (mut pos_below, mut neg_below) = (0u128, 0u128);
    for i in 0..pooled.len() - 1 {
        if pooled[i].1 {
            pos_below += 1;
        } else {
            neg_below += 1;
        }
        let (lo, hi) = (pooled[i].0, pooled[i + 1].0);
        if lo == hi {
            continue;
        }
        let mut t = lo + (hi - lo) / 2.0;
        if t >= hi {
            t = lo;
        }
        let above = (p - pos_below) * n + neg_below * p;
        for (score, pol) in [(above, Polarity::Above), (total - above, Polarity::Below)] {
            if best.is_none_or(|(s, _, _)| score > s) {
                best = Some((score, t, pol));
            }
        }
    }
    Ok(match best {
        Some((score, threshold, polarity)) => ThresholdClassifier {
            threshold,
            polarity,
            train_balanced_accuracy: score as f64 / total as f64,
            degenerate: false,
        },
        None => ThresholdClassifier {
            threshold: pooled[0].0,
            polarity: Polarity::Above,
            train_balanced_accuracy: 0.5,
            degenerate: true,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn balanced_accuracy(c: &ThresholdClassifier, pos: &[f64], neg: &[f64]) -> f64 {
        let tpr = c.positive_rate(pos);
        let tnr = 1.0 - c.positive_rate(neg);
        (tpr + tnr) / 2.0
    }

    // Scans candidates from the top down and keeps ties by the documented
    // order, counting each threshold from scratch.
    fn brute_force(pos: &[f64], neg: &[f64]) -> (f64, f64, Polarity) {
        let mut vals: Vec<f64> = pos.iter().chain(neg).copied().collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        let mut cands: Vec<f64> = vals.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0).collect();
        cands.reverse();
        let mut best = (f64::NEG_INFINITY, 0.0, Polarity::Above);
        for t in cands {
            for pol in [Polarity::Below, Polarity::Above] {
                let c = ThresholdClassifier {
                    threshold: t,
                    polarity: pol,
                    train_balanced_accuracy: 0.0,
                    degenerate: false,
                };
                let ba = balanced_accuracy(&c, pos, neg);
                if ba >= best.0 - 1e-12 {
                    best = (ba, t, pol);
                }
            }
        }
        best
    }

    #[test]
    fn separable_sets() {
        let c = fit_logit_classifier(&[2.0, 3.0], &[0.0, 1.0]).unwrap();
        assert!(c.threshold > 1.0 && c.threshold < 2.0);
        assert_eq!(c.train_balanced_accuracy, 1.0);
        assert_eq!(c.polarity, Polarity::Above);
        let c = fit_logit_classifier(&[0.0, 1.0], &[2.0, 3.0]).unwrap();
        assert_eq!(c.polarity, Polarity::Below);
        assert_eq!(c.train_balanced_accuracy, 1.0);
    }

    #[test]
    fn identical_sets_are_chance() {
        let v = [0.3, 1.0, 2.5];
        let c = fit_logit_classifier(&v, &v).unwrap();
        assert_eq!(c.train_balanced_accuracy, 0.5);
        let d = fit_logit_classifier(&[4.0, 4.0], &[4.0]).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.train_balanced_accuracy, 0.5);
        assert_eq!(d.positive_rate(&[4.0]), 0.0);
    }

    #[test]
    fn rejects_empty_and_nan() {
        assert!(fit_logit_classifier(&[], &[1.0]).is_err());
        assert!(fit_logit_classifier(&[f64::NAN], &[1.0]).is_err());
    }

    #[test]
    fn adjacent_floats_still_split() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let c = fit_logit_classifier(&[b], &[a]).unwrap();
        assert_eq!(c.train_balanced_accuracy, 1.0);
        assert!(c.predict(b) && !c.predict(a));
    }

    proptest! {
        #[test]
        fn matches_brute_force_scan(
            pos in prop::collection::vec(-3.0f64..3.0, 1..40),
            neg in prop::collection::vec(-2.0f64..4.0, 1..40),
            grid in prop::bool::ANY,
        ) {
            // Coarse rounding creates ties between classes.
            let round = |v: &f64| if grid { (v * 4.0).round() / 4.0 } else { *v };
            let pos: Vec<f64> = pos.iter().map(round).collect();
            let neg: Vec<f64> = neg.iter().map(round).collect();
            let fit = fit_logit_classifier(&pos, &neg).unwrap();
            prop_assert!(fit.train_balanced_accuracy >= 0.5);
            prop_assert!((balanced_accuracy(&fit, &pos, &neg) - fit.train_balanced_accuracy).abs() < 1e-12);
            if !fit.degenerate {
                let (ba, t, pol) = brute_force(&pos, &neg);
                prop_assert!((ba - fit.train_balanced_accuracy).abs() < 1e-12);
                prop_assert_eq!(t, fit.threshold);
                prop_assert_eq!(pol, fit.polarity);
            }
        }
    }
}
