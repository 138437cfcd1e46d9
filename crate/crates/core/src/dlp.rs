//! Group-blind training under a covariance constraint.
//!
//! The fitted classifier reads only `x`. Group membership enters through the
//! constraint `|(1/n) Σ (z_i − z̄)(θᵀx_i + b)| ≤ c` with `z` encoded a → 1,
//! b → 0, handled by a sequence of quadratic penalties with growing weight.
//! On standardised inputs the constrained quantity is linear in the weights
//! (the intercept drops out because `Σ (z_i − z̄) = 0`).

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    assemble, minimize, prepare, xt_dot, LinearPenalty, LogisticModel, Objective, TrainConfig,
};
use crate::types::{Dataset, Group};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DlpConfig {
    /// Bound `c` on the absolute covariance. `f64::INFINITY` disables it.
    #[serde(with = "bound_repr")]
    pub covariance_bound: f64,
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub rounds: usize,
    /// Slack on `c` accepted as reaching the bound.
    pub feasibility_tol: f64,
    pub train: TrainConfig,
}

impl Default for DlpConfig {
    fn default() -> Self {
        Self {
            covariance_bound: 0.0,
            initial_penalty: 1.0,
            penalty_growth: 10.0,
            rounds: 6,
            feasibility_tol: 1e-4,
            train: TrainConfig::default(),
        }
    }
}

impl DlpConfig {
    pub fn with_bound(bound: f64) -> Self {
        Self {
            covariance_bound: bound,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.covariance_bound.is_nan() || self.covariance_bound < 0.0 {
            return Err(Error::invalid("covariance_bound", "must be >= 0"));
        }
        if self.penalty_growth.is_nan() || self.penalty_growth <= 1.0 {
            return Err(Error::invalid("penalty_growth", "must exceed 1"));
        }
        if self.initial_penalty.is_nan() || self.initial_penalty <= 0.0 || self.rounds == 0 {
            return Err(Error::invalid("penalty schedule", "needs a positive weight and >= 1 round"));
        }
        self.train.validate()
    }
}

/// Infinite bounds are written as the string `"inf"` in JSON.
mod bound_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
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
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("bad bound `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyRound {
    pub penalty: f64,
    pub covariance: f64,
    pub iterations: usize,
}

/// Metadata block attached to models produced by [`train_dlp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DlpMetadata {
    #[serde(with = "bound_repr")]
    pub covariance_bound: f64,
    pub achieved_covariance: f64,
    pub rounds: Vec<PenaltyRound>,
}

/// Trains a group-blind logistic model under the covariance bound.
pub fn train_dlp(dataset: &Dataset, config: &DlpConfig) -> Result<LogisticModel> {
    config.validate()?;
    for g in [Group::A, Group::B] {
        if dataset.group_count(g) == 0 {
            return Err(Error::EmptyGroup(g));
        }
    }
    let prepared = prepare(dataset, false)?;
    let z = Array1::from_iter(dataset.groups().iter().map(|g| g.indicator()));
    let z_centered = &z - z.mean().unwrap_or(0.0);
    let n = dataset.len() as f64;
    let direction = xt_dot(&prepared.x, &z_centered) / n;
    let covariance = |params: &Array1<f64>| -> f64 {
        direction.dot(&params.slice(ndarray::s![..direction.len()]))
    };

    let mut params = Array1::zeros(prepared.x.ncols() + 1);
    let mut rounds = Vec::new();
    let mut iterations = 0;
    let bound = config.covariance_bound;

    if bound.is_infinite() {
        let objective = Objective {
            x: &prepared.x,
            y: &prepared.y,
            l2: config.train.l2_penalty,
            penalty: None,
        };
        let min = minimize(&objective, params, &config.train)?;
        params = min.params;
        iterations = min.iterations;
        rounds.push(PenaltyRound {
            penalty: 0.0,
            covariance: covariance(&params),
            iterations,
        });
    } else {
        let mut weight = config.initial_penalty;
        for _ in 0..config.rounds {
            let objective = Objective {
                x: &prepared.x,
                y: &prepared.y,
                l2: config.train.l2_penalty,
                penalty: Some(LinearPenalty {
                    direction: direction.clone(),
                    bound,
                    weight,
                }),
            };
            let min = minimize(&objective, params, &config.train)?;
            params = min.params;
            iterations += min.iterations;
            let cov = covariance(&params);
            rounds.push(PenaltyRound {
                penalty: weight,
                covariance: cov,
                iterations: min.iterations,
            });
            if cov.abs() <= bound + config.feasibility_tol {
                break;
            }
            weight *= config.penalty_growth;
        }
    }

    let achieved = rounds.last().map(|r| r.covariance).unwrap_or(0.0);
    if achieved.abs() > bound + config.feasibility_tol {
        return Err(Error::BoundNotReached { achieved, bound });
    }
    let mut model = assemble(prepared, &params, false, iterations);
    model.dlp = Some(DlpMetadata {
        covariance_bound: bound,
        achieved_covariance: achieved,
        rounds,
    });
    Ok(model)
}

/// `(1/n) Σ (z_i − z̄) · score_i` for a group-blind model on `dataset`.
pub fn achieved_covariance(model: &LogisticModel, dataset: &Dataset) -> Result<f64> {
    if model.uses_group_feature {
        return Err(Error::invalid("model", "covariance is defined for group-blind models"));
    }
    let scores = model.scores(dataset.features().view())?;
    let n = dataset.len() as f64;
    let z_bar = dataset.groups().iter().map(|g| g.indicator()).sum::<f64>() / n;
    Ok(dataset
        .groups()
        .iter()
        .zip(&scores)
        .map(|(g, s)| (g.indicator() - z_bar) * s)
        .sum::<f64>()
        / n)
}
