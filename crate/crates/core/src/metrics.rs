//! Disparity and utility metrics.
//!
//! Rates use the positive decisions already made; thresholding happens
//! upstream (`p > t`, strict).

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::types::{Decisions, Flip, Group, ProbEstimates};

fn group_counts(decisions: &Decisions, groups: &[Group]) -> Result<[(usize, usize); 2]> {
    check_len("groups", decisions.len(), groups.len())?;
    let mut counts = [(0usize, 0usize); 2];
    for (&d, &g) in decisions.as_slice().iter().zip(groups) {
        let slot = &mut counts[g as usize];
        slot.1 += 1;
        if d {
            slot.0 += 1;
        }
    }
    if counts[0].1 == 0 {
        return Err(Error::EmptyGroup(Group::A));
    }
    if counts[1].1 == 0 {
        return Err(Error::EmptyGroup(Group::B));
    }
    Ok(counts)
}

/// Positive rate per group, `(q_a, q_b)`.
pub fn group_rates(decisions: &Decisions, groups: &[Group]) -> Result<(f64, f64)> {
    let [(pa, na), (pb, nb)] = group_counts(decisions, groups)?;
    Ok((pa as f64 / na as f64, pb as f64 / nb as f64))
}

/// Calders-Verwer gap `q_a - q_b`.
pub fn cv_gap(decisions: &Decisions, groups: &[Group]) -> Result<f64> {
    let (q_a, q_b) = group_rates(decisions, groups)?;
    Ok(q_a - q_b)
}

/// `100 * q_b / q_a`. Returns 100 when both rates are zero and `+inf` when only
/// `q_a` is zero.
pub fn p_percent_from_rates(q_a: f64, q_b: f64) -> f64 {
    if q_a == 0.0 {
        if q_b == 0.0 {
            100.0
        } else {
            f64::INFINITY
        }
    } else {
        100.0 * q_b / q_a
    }
}

pub fn p_percent(decisions: &Decisions, groups: &[Group]) -> Result<f64> {
    let (q_a, q_b) = group_rates(decisions, groups)?;
    Ok(p_percent_from_rates(q_a, q_b))
}

/// `(p/100) q_a - q_b`; the p-% rule holds iff this is `<= 0`.
pub fn p_gap(decisions: &Decisions, groups: &[Group], p: f64) -> Result<f64> {
    let (q_a, q_b) = group_rates(decisions, groups)?;
    Ok(p / 100.0 * q_a - q_b)
}

fn check_cost(c: f64) -> Result<()> {
    if c > 0.0 && c < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("cost c", format!("{c} outside (0, 1)")))
    }
}

/// Estimated immediate utility `(1/n) Σ d_i (p_i - c)`.
pub fn immediate_utility(decisions: &Decisions, probs: &ProbEstimates, c: f64) -> Result<f64> {
    check_cost(c)?;
    check_len("probabilities", decisions.len(), probs.len())?;
    if decisions.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let total: f64 = decisions
        .as_slice()
        .iter()
        .zip(probs.as_slice())
        .filter(|(&d, _)| d)
        .map(|(_, &p)| p - c)
        .sum();
    Ok(total / decisions.len() as f64)
}

/// Confusion counts `(tp, fp, tn, fn)`.
fn confusion(decisions: &[bool], labels: &[bool]) -> (usize, usize, usize, usize) {
    let mut c = (0, 0, 0, 0);
    for (&d, &y) in decisions.iter().zip(labels) {
        match (d, y) {
            (true, true) => c.0 += 1,
            (true, false) => c.1 += 1,
            (false, false) => c.2 += 1,
            (false, true) => c.3 += 1,
        }
    }
    c
}

/// Empirical cost-sensitive risk `π(1-c)·FNR + (1-π)c·FPR`.
pub fn cost_sensitive_risk(decisions: &Decisions, labels: &[bool], c: f64) -> Result<f64> {
    check_cost(c)?;
    check_len("labels", decisions.len(), labels.len())?;
    let (tp, fp, tn, fn_) = confusion(decisions.as_slice(), labels);
    let pos = tp + fn_;
    let neg = fp + tn;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClassLabels);
    }
    let n = (pos + neg) as f64;
    let pi = pos as f64 / n;
    let fnr = fn_ as f64 / pos as f64;
    let fpr = fp as f64 / neg as f64;
    Ok(pi * (1.0 - c) * fnr + (1.0 - pi) * c * fpr)
}

pub fn accuracy(decisions: &Decisions, labels: &[bool]) -> Result<f64> {
    check_len("labels", decisions.len(), labels.len())?;
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let agree = decisions
        .as_slice()
        .iter()
        .zip(labels)
        .filter(|(d, y)| d == y)
        .count();
    Ok(agree as f64 / labels.len() as f64)
}

/// Per-group `(FPR, FNR)`; `None` where the group lacks negatives or positives.
pub fn group_error_rates(
    decisions: &Decisions,
    labels: &[bool],
    groups: &[Group],
    group: Group,
) -> Result<(Option<f64>, Option<f64>)> {
    check_len("labels", decisions.len(), labels.len())?;
    check_len("groups", decisions.len(), groups.len())?;
    let (d, y): (Vec<bool>, Vec<bool>) = decisions
        .as_slice()
        .iter()
        .zip(labels)
        .zip(groups)
        .filter(|(_, &g)| g == group)
        .map(|((&d, &y), _)| (d, y))
        .unzip();
    let (tp, fp, tn, fn_) = confusion(&d, &y);
    let rate = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    Ok((rate(fp, fp + tn), rate(fn_, fn_ + tp)))
}

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"`, `"nan"`.
pub mod extended_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("bad float `{other}`"))),
            },
        }
    }
}

/// Summary of a decision vector against labels and groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub n: usize,
    pub n_a: usize,
    pub n_b: usize,
    pub accuracy: f64,
    pub q_a: f64,
    pub q_b: f64,
    pub cv_gap: f64,
    #[serde(with = "extended_float")]
    pub p_percent: f64,
    pub fpr_a: Option<f64>,
    pub fpr_b: Option<f64>,
    pub fnr_a: Option<f64>,
    pub fnr_b: Option<f64>,
    /// `û(d, 0.5)`; present only when probability estimates were supplied.
    pub immediate_utility: Option<f64>,
    #[serde(default)]
    pub flips: Vec<Flip>,
}

/// Builds a [`FairnessReport`] from the standalone metric functions.
pub fn fairness_report(
    decisions: &Decisions,
    labels: &[bool],
    groups: &[Group],
    probs: Option<&ProbEstimates>,
) -> Result<FairnessReport> {
    check_len("labels", decisions.len(), labels.len())?;
    let [(_, n_a), (_, n_b)] = group_counts(decisions, groups)?;
    let (q_a, q_b) = group_rates(decisions, groups)?;
    let (fpr_a, fnr_a) = group_error_rates(decisions, labels, groups, Group::A)?;
    let (fpr_b, fnr_b) = group_error_rates(decisions, labels, groups, Group::B)?;
    Ok(FairnessReport {
        n: decisions.len(),
        n_a,
        n_b,
        accuracy: accuracy(decisions, labels)?,
        q_a,
        q_b,
        cv_gap: cv_gap(decisions, groups)?,
        p_percent: p_percent(decisions, groups)?,
        fpr_a,
        fpr_b,
        fnr_a,
        fnr_b,
        immediate_utility: probs
            .map(|p| immediate_utility(decisions, p, 0.5))
            .transpose()?,
        flips: Vec::new(),
    })
}

impl FairnessReport {
    pub fn with_flips(mut self, flips: Vec<Flip>) -> Self {
        self.flips = flips;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dec(v: &[u8]) -> Decisions {
        Decisions::new(v.iter().map(|&b| b == 1).collect())
    }

    fn grp(v: &str) -> Vec<Group> {
        v.chars().map(|c| c.to_string().parse().unwrap()).collect()
    }

    #[test]
    fn saturated_rates() {
        assert_eq!(group_rates(&dec(&[1, 1, 1]), &grp("aba")).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn direct_count_rates() {
        let d = dec(&[1, 1, 0, 1, 1, 0]);
        let g = grp("aaaabb");
        assert_eq!(group_rates(&d, &g).unwrap(), (0.75, 0.5));
        assert_eq!(cv_gap(&d, &g).unwrap(), 0.25);
    }

    #[test]
    fn empty_group_is_an_error() {
        let err = group_rates(&dec(&[1, 0]), &grp("aa")).unwrap_err();
        assert!(matches!(err, Error::EmptyGroup(Group::B)));
        assert!(err.to_string().contains("undefined group rate"));
        assert!(p_percent(&dec(&[1]), &grp("b")).is_err());
    }

    #[test]
    fn rates_match_recount_on_random_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d: Vec<bool> = (0..500).map(|_| rng.random()).collect();
        let g: Vec<Group> = (0..500)
            .map(|_| if rng.random() { Group::A } else { Group::B })
            .collect();
        // second, independent pass
        let mut pa = 0.0;
        let mut na = 0.0;
        let mut pb = 0.0;
        let mut nb = 0.0;
        for i in 0..500 {
            if g[i] == Group::A {
                na += 1.0;
                pa += d[i] as u8 as f64;
            } else {
                nb += 1.0;
                pb += d[i] as u8 as f64;
            }
        }
        let decisions = Decisions::new(d);
        let (q_a, q_b) = group_rates(&decisions, &g).unwrap();
        assert_eq!(q_a, pa / na);
        assert_eq!(q_b, pb / nb);
        assert_eq!(cv_gap(&decisions, &g).unwrap(), q_a - q_b);
    }

    #[test]
    fn p_percent_cases() {
        assert_eq!(p_percent_from_rates(0.4, 0.4), 100.0);
        assert!((p_percent_from_rates(0.25, 0.20) - 80.0).abs() < 1e-12);
        assert_eq!(p_percent_from_rates(0.0, 0.0), 100.0);
        assert_eq!(p_percent_from_rates(0.0, 0.1), f64::INFINITY);
        assert!(p_percent_from_rates(0.2, 0.21) > 100.0);
    }

    #[test]
    fn p_gap_arithmetic() {
        // q_a = 0.5, q_b = 0.3
        let d = dec(&[1, 0, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0]);
        let g = grp("aabbbbbbbbbb");
        assert_eq!(group_rates(&d, &g).unwrap(), (0.5, 0.3));
        assert!((p_gap(&d, &g, 80.0).unwrap() - 0.1).abs() < 1e-12);
        let d = dec(&[1, 0, 1, 0]);
        assert_eq!(p_gap(&d, &grp("aabb"), 100.0).unwrap(), 0.0);
    }

    #[test]
    fn utility_cases() {
        let probs = ProbEstimates::new(vec![0.9, 0.2, 0.6]).unwrap();
        assert_eq!(immediate_utility(&dec(&[0, 0, 0]), &probs, 0.5).unwrap(), 0.0);
        let one = ProbEstimates::new(vec![0.9]).unwrap();
        assert!((immediate_utility(&dec(&[1]), &one, 0.5).unwrap() - 0.4).abs() < 1e-15);
        assert!(immediate_utility(&dec(&[1]), &one, 1.0).is_err());
        assert!(immediate_utility(&dec(&[1]), &one, 0.0).is_err());
    }

    #[test]
    fn cost_sensitive_cases() {
        let y = [true, false, true, false, false];
        let perfect = Decisions::new(y.to_vec());
        assert_eq!(cost_sensitive_risk(&perfect, &y, 0.3).unwrap(), 0.0);
        let all = dec(&[1, 1, 1, 1, 1]);
        let pi = 0.4;
        assert!((cost_sensitive_risk(&all, &y, 0.5).unwrap() - (1.0 - pi) / 2.0).abs() < 1e-15);
        assert!(matches!(
            cost_sensitive_risk(&all, &[true; 5], 0.5),
            Err(Error::SingleClassLabels)
        ));
    }

    #[test]
    fn accuracy_cases() {
        let y = [true, false, true];
        assert_eq!(accuracy(&Decisions::new(y.to_vec()), &y).unwrap(), 1.0);
        assert_eq!(accuracy(&dec(&[0, 1, 0]), &y).unwrap(), 0.0);
        assert!(accuracy(&dec(&[0, 1]), &y).is_err());
    }

    #[test]
    fn report_on_perfect_parity() {
        let y = [true, false, true, false];
        let d = Decisions::new(y.to_vec());
        let r = fairness_report(&d, &y, &grp("aabb"), None).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.cv_gap, 0.0);
        assert_eq!(r.p_percent, 100.0);
        assert_eq!(r.immediate_utility, None);
    }

    #[test]
    fn report_marks_missing_error_rates() {
        let y = [true, true, true, false];
        let r = fairness_report(&dec(&[1, 0, 1, 1]), &y, &grp("aabb"), None).unwrap();
        assert_eq!(r.fpr_a, None);
        assert_eq!(r.fnr_a, Some(0.5));
        assert_eq!(r.fpr_b, Some(1.0));
    }

    #[test]
    fn report_serializes_infinite_p_percent() {
        let y = [true, false, true, false];
        let r = fairness_report(&dec(&[0, 0, 1, 0]), &y, &grp("aabb"), None).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"p_percent\":\"inf\""));
        let back: FairnessReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    fn instance() -> impl Strategy<Value = (Vec<bool>, Vec<bool>, Vec<Group>, Vec<f64>)> {
        (2usize..200).prop_flat_map(|n| {
            (
                proptest::collection::vec(any::<bool>(), n),
                proptest::collection::vec(any::<bool>(), n),
                proptest::collection::vec(prop_oneof![Just(Group::A), Just(Group::B)], n),
                proptest::collection::vec(0.0f64..=1.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn accuracy_equals_shifted_utility((d, y, _g, _p) in instance()) {
            let decisions = Decisions::new(d);
            let as_probs = ProbEstimates::new(y.iter().map(|&b| b as u8 as f64).collect()).unwrap();
            let u = immediate_utility(&decisions, &as_probs, 0.5).unwrap();
            let ybar = y.iter().filter(|&&b| b).count() as f64 / y.len() as f64;
            let acc = accuracy(&decisions, &y).unwrap();
            prop_assert!((acc - (2.0 * u - ybar + 1.0)).abs() <= 1e-12);
        }

        #[test]
        fn utility_plus_risk_is_constant((d, y, _g, _p) in instance(), c in 0.01f64..0.99) {
            prop_assume!(y.iter().any(|&b| b) && y.iter().any(|&b| !b));
            let decisions = Decisions::new(d);
            let as_probs = ProbEstimates::new(y.iter().map(|&b| b as u8 as f64).collect()).unwrap();
            let u = immediate_utility(&decisions, &as_probs, c).unwrap();
            let cs = cost_sensitive_risk(&decisions, &y, c).unwrap();
            let pi = y.iter().filter(|&&b| b).count() as f64 / y.len() as f64;
            prop_assert!((u + cs - pi * (1.0 - c)).abs() <= 1e-12);
        }

        #[test]
        fn bounded_metrics((d, _y, g, _p) in instance()) {
            prop_assume!(g.contains(&Group::A) && g.contains(&Group::B));
            let decisions = Decisions::new(d);
            let (q_a, q_b) = group_rates(&decisions, &g).unwrap();
            prop_assert!((0.0..=1.0).contains(&q_a) && (0.0..=1.0).contains(&q_b));
            let gap = cv_gap(&decisions, &g).unwrap();
            prop_assert!((-1.0..=1.0).contains(&gap));
            prop_assert!(p_percent(&decisions, &g).unwrap() >= 0.0);
        }

        #[test]
        fn p_gap_sign_agrees_with_p_percent((d, _y, g, _p) in instance(), p in 1.0f64..150.0) {
            prop_assume!(g.contains(&Group::A) && g.contains(&Group::B));
            let decisions = Decisions::new(d);
            let gap = p_gap(&decisions, &g, p).unwrap();
            let pp = p_percent(&decisions, &g).unwrap();
            // Skip values within rounding of the boundary.
            prop_assume!(gap.abs() > 1e-9);
            prop_assert_eq!(gap <= 0.0, pp >= p);
        }

        #[test]
        fn report_matches_standalone_metrics((d, y, g, p) in instance()) {
            prop_assume!(g.contains(&Group::A) && g.contains(&Group::B));
            let decisions = Decisions::new(d);
            let probs = ProbEstimates::new(p).unwrap();
            let r = fairness_report(&decisions, &y, &g, Some(&probs)).unwrap();
            let (q_a, q_b) = group_rates(&decisions, &g).unwrap();
            prop_assert_eq!(r.q_a.to_bits(), q_a.to_bits());
            prop_assert_eq!(r.q_b.to_bits(), q_b.to_bits());
            prop_assert_eq!(r.accuracy.to_bits(), accuracy(&decisions, &y).unwrap().to_bits());
            prop_assert_eq!(r.cv_gap.to_bits(), cv_gap(&decisions, &g).unwrap().to_bits());
            prop_assert_eq!(r.p_percent.to_bits(), p_percent(&decisions, &g).unwrap().to_bits());
            prop_assert_eq!(
                r.immediate_utility.unwrap().to_bits(),
                immediate_utility(&decisions, &probs, 0.5).unwrap().to_bits()
            );
            prop_assert_eq!(r.cv_gap, r.q_a - r.q_b);
        }
    }
}
