//! Naive fit, DLP fit and greedy thresholding on one train/test split.

use impact_parity::dlp::{achieved_covariance, train_dlp, DlpConfig};
use impact_parity::metrics::{accuracy, extended_float, group_rates, p_percent_from_rates};
use impact_parity::model::{predict_dataset, train_logistic, LogisticModel, TrainConfig};
use impact_parity::threshold::{best_parity_at_accuracy, greedy_tradeoff, TradeoffPoint};
use impact_parity::{Dataset, Decisions, Group, ParityConstraint, ProbEstimates, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub accuracy: f64,
    pub q_a: f64,
    pub q_b: f64,
    #[serde(with = "extended_float")]
    pub p_percent: f64,
}

impl Summary {
    pub fn of(decisions: &Decisions, data: &Dataset) -> Result<Self> {
        let (q_a, q_b) = group_rates(decisions, data.groups())?;
        Ok(Self {
            accuracy: accuracy(decisions, data.labels())?,
            q_a,
            q_b,
            p_percent: p_percent_from_rates(q_a, q_b),
        })
    }
}

/// Label statistics of a dataset in both group orientations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelStats {
    pub n: usize,
    pub share_a: f64,
    pub share_b: f64,
    pub base_rate_a: f64,
    pub base_rate_b: f64,
    /// `100 · base_rate_b / base_rate_a`.
    #[serde(with = "extended_float")]
    pub label_p_percent: f64,
    /// `100 · base_rate_a / base_rate_b`.
    #[serde(with = "extended_float")]
    pub label_p_percent_reversed: f64,
}

impl LabelStats {
    pub fn of(data: &Dataset) -> Self {
        Self::from_parts(data.groups(), data.labels())
    }

    pub fn from_parts(groups: &[Group], labels: &[bool]) -> Self {
        let n = groups.len();
        let count = |g: Group| groups.iter().filter(|&&h| h == g).count();
        let positives = |g: Group| labels.iter().zip(groups).filter(|(&y, &h)| y && h == g).count();
        let rate = |g: Group| match count(g) {
            0 => 0.0,
            c => positives(g) as f64 / c as f64,
        };
        let (ra, rb) = (rate(Group::A), rate(Group::B));
        Self {
            n,
            share_a: count(Group::A) as f64 / n as f64,
            share_b: count(Group::B) as f64 / n as f64,
            base_rate_a: ra,
            base_rate_b: rb,
            label_p_percent: p_percent_from_rates(ra, rb),
            label_p_percent_reversed: p_percent_from_rates(rb, ra),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub labels: LabelStats,
    pub naive: Summary,
    pub naive_iterations: usize,
    pub dlp: Summary,
    pub dlp_covariance: f64,
    pub dlp_penalty_rounds: usize,
    /// Highest-parity greedy prefix no less accurate than the DLP (within
    /// the tolerance).
    pub thresholds_matched: Option<TradeoffPoint>,
    /// End of the greedy path toward a 100-% rule.
    pub thresholds_final: TradeoffPoint,
}

impl Comparison {
    pub fn thresholds_dominate(&self) -> bool {
        self.thresholds_matched
            .is_some_and(|m| m.p_percent > self.dlp.p_percent)
    }
}

pub struct Fitted {
    pub naive: LogisticModel,
    pub dlp: LogisticModel,
    pub naive_probs: ProbEstimates,
    pub dlp_probs: ProbEstimates,
}

pub fn fit_pair(train: &Dataset, test: &Dataset, bound: f64, fit: &TrainConfig) -> Result<Fitted> {
    let naive = train_logistic(train, false, fit)?;
    let dlp = train_dlp(
        train,
        &DlpConfig {
            covariance_bound: bound,
            train: fit.clone(),
            ..DlpConfig::default()
        },
    )?;
    Ok(Fitted {
        naive_probs: predict_dataset(&naive, test)?,
        dlp_probs: predict_dataset(&dlp, test)?,
        naive,
        dlp,
    })
}

pub fn compare(train: &Dataset, test: &Dataset, bound: f64, tolerance: f64, fit: &TrainConfig) -> Result<Comparison> {
    let fitted = fit_pair(train, test, bound, fit)?;
    let naive = Summary::of(&Decisions::from_threshold(&fitted.naive_probs, 0.5), test)?;
    let dlp = Summary::of(&Decisions::from_threshold(&fitted.dlp_probs, 0.5), test)?;
    let (_, path) = greedy_tradeoff(
        &fitted.naive_probs,
        test.groups(),
        test.labels(),
        &ParityConstraint::p_percent(100.0)?,
    )?;
    Ok(Comparison {
        labels: LabelStats::of(test),
        naive,
        naive_iterations: fitted.naive.iterations,
        dlp,
        dlp_covariance: achieved_covariance(&fitted.dlp, train)?,
        dlp_penalty_rounds: fitted.dlp.dlp.as_ref().map_or(0, |m| m.rounds.len()),
        thresholds_matched: best_parity_at_accuracy(&path, dlp.accuracy, tolerance),
        thresholds_final: *path.last().expect("path starts with the unflipped point"),
    })
}
