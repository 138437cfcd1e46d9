//! L2-regularised logistic regression fitted by full-batch gradient descent.
//!
//! Inputs are standardised internally (mean 0, variance 1); the standardisation
//! parameters travel with the model so callers always pass raw features.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dlp::DlpMetadata;
use crate::error::{check_len, Error, Result};
use crate::types::{Dataset, Decisions, ProbEstimates};

/// Name given to the group indicator column when a model reads `z`.
pub const GROUP_FEATURE: &str = "group_indicator";

const MODEL_FORMAT: &str = "impact-parity/logistic-model";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Step size as a multiple of `1/L`, where `L` bounds the curvature of the
    /// loss. Values in `(0, 2)` converge.
    pub learning_rate: f64,
    pub max_iters: usize,
    /// Stop once the gradient norm falls to this value.
    pub convergence_tol: f64,
    pub l2_penalty: f64,
    /// Recorded for provenance. Fitting starts from zero weights, so the
    /// result does not depend on it.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            max_iters: 100_000,
            convergence_tol: 1e-6,
            l2_penalty: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate < 2.0) {
            return Err(Error::invalid(
                "learning_rate",
                format!("{} outside (0, 2)", self.learning_rate),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters", "must be positive"));
        }
        if self.convergence_tol.is_nan() || self.convergence_tol <= 0.0 {
            return Err(Error::invalid("convergence_tol", "must be positive"));
        }
        if !(self.l2_penalty >= 0.0 && self.l2_penalty.is_finite()) {
            return Err(Error::invalid("l2_penalty", "must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

/// A fitted logistic model. `weights` act on standardised inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub standardization: Standardization,
    pub uses_group_feature: bool,
    pub iterations: usize,
    pub dlp: Option<DlpMetadata>,
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    version: u32,
    feature_names: Vec<String>,
    weights: Vec<f64>,
    bias: f64,
    standardization: Standardization,
    uses_group_feature: bool,
    iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dlp: Option<DlpMetadata>,
}

impl LogisticModel {
    pub fn n_inputs(&self) -> usize {
        self.weights.len()
    }

    /// Coefficients and intercept on the raw (unstandardised) feature scale.
    pub fn raw_coefficients(&self) -> (Vec<f64>, f64) {
        let Standardization { mean, scale } = &self.standardization;
        let coef: Vec<f64> = self.weights.iter().zip(scale).map(|(w, s)| w / s).collect();
        let shift: f64 = coef.iter().zip(mean).map(|(c, m)| c * m).sum();
        (coef, self.bias - shift)
    }

    /// Linear scores `θᵀx + b` for raw input rows.
    pub fn scores(&self, inputs: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        if inputs.ncols() != self.n_inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_inputs(),
                got: inputs.ncols(),
            });
        }
        let Standardization { mean, scale } = &self.standardization;
        Ok(inputs
            .rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .zip(&self.weights)
                    .zip(mean.iter().zip(scale))
                    .map(|((x, w), (m, s))| w * ((x - m) / s))
                    .sum::<f64>()
                    + self.bias
            })
            .collect())
    }

    /// The input matrix this model expects for `dataset`: its features, plus
    /// the group indicator column when the model reads `z`.
    pub fn inputs_for(&self, dataset: &Dataset) -> Array2<f64> {
        model_inputs(dataset, self.uses_group_feature)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDocument {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            feature_names: self.feature_names.clone(),
            weights: self.weights.clone(),
            bias: self.bias,
            standardization: self.standardization.clone(),
            uses_group_feature: self.uses_group_feature,
            iterations: self.iterations,
            dlp: self.dlp.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.format != MODEL_FORMAT {
            return Err(Error::Format(format!("format `{}`", doc.format)));
        }
        if doc.version != MODEL_VERSION {
            return Err(Error::Format(format!("model version {}", doc.version)));
        }
        let d = doc.weights.len();
        check_len("feature names", d, doc.feature_names.len())?;
        check_len("standardization means", d, doc.standardization.mean.len())?;
        check_len("standardization scales", d, doc.standardization.scale.len())?;
        let all_finite = doc
            .weights
            .iter()
            .chain(&doc.standardization.mean)
            .chain(std::iter::once(&doc.bias))
            .all(|v| v.is_finite());
        if !all_finite || doc.standardization.scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Format("non-finite model parameters".into()));
        }
        Ok(Self {
            feature_names: doc.feature_names,
            weights: doc.weights,
            bias: doc.bias,
            standardization: doc.standardization,
            uses_group_feature: doc.uses_group_feature,
            iterations: doc.iterations,
            dlp: doc.dlp,
        })
    }
}

pub fn model_inputs(dataset: &Dataset, include_group: bool) -> Array2<f64> {
    if !include_group {
        return dataset.features().clone();
    }
    let z = Array1::from_iter(dataset.groups().iter().map(|g| g.indicator()));
    let mut out = dataset.features().clone();
    out.push_column(z.view()).expect("row counts agree");
    out
}

fn model_input_names(dataset: &Dataset, include_group: bool) -> Vec<String> {
    let mut names = dataset.feature_names().to_vec();
    if include_group {
        names.push(GROUP_FEATURE.into());
    }
    names
}

pub(crate) fn check_finite(x: ArrayView2<'_, f64>) -> Result<()> {
    for ((row, col), v) in x.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFiniteFeature { row, col });
        }
    }
    Ok(())
}

pub(crate) fn standardize(raw: &Array2<f64>) -> (Array2<f64>, Standardization) {
    let n = raw.nrows() as f64;
    let mut mean = Vec::with_capacity(raw.ncols());
    let mut scale = Vec::with_capacity(raw.ncols());
    let mut x = raw.clone();
    for mut col in x.axis_iter_mut(Axis(1)) {
        let m = col.sum() / n;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
        let s = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        col.mapv_inplace(|v| (v - m) / s);
        mean.push(m);
        scale.push(s);
    }
    (x, Standardization { mean, scale })
}

pub(crate) fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
fn softplus(s: f64) -> f64 {
    if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

/// Quadratic penalty `weight · max(0, |vᵀw| − bound)²` on a linear functional
/// of the (standardised) weights.
#[derive(Debug, Clone)]
pub(crate) struct LinearPenalty {
    pub direction: Array1<f64>,
    pub bound: f64,
    pub weight: f64,
}

impl LinearPenalty {
    fn excess(&self, w: &Array1<f64>) -> (f64, f64) {
        let value = self.direction.dot(w);
        ((value.abs() - self.bound).max(0.0), value.signum())
    }
}

/// Mean logistic loss on standardised inputs plus ridge and optional penalty.
/// Parameter layout: `[w_1 .. w_d, b]`.
pub(crate) struct Objective<'a> {
    pub x: &'a Array2<f64>,
    pub y: &'a Array1<f64>,
    pub l2: f64,
    pub penalty: Option<LinearPenalty>,
}

impl Objective<'_> {
    fn split(params: &Array1<f64>) -> (Array1<f64>, f64) {
        let d = params.len() - 1;
        (params.slice(ndarray::s![..d]).to_owned(), params[d])
    }

    #[cfg(test)]
    pub fn value(&self, params: &Array1<f64>) -> f64 {
        let (w, b) = Self::split(params);
        let s = self.x.dot(&w) + b;
        let n = self.y.len() as f64;
        let nll = s
            .iter()
            .zip(self.y)
            .map(|(&s, &y)| softplus(s) - y * s)
            .sum::<f64>()
            / n;
        let mut v = nll + 0.5 * self.l2 * w.dot(&w);
        if let Some(p) = &self.penalty {
            let (excess, _) = p.excess(&w);
            v += p.weight * excess * excess;
        }
        v
    }

    pub fn gradient(&self, params: &Array1<f64>) -> Array1<f64> {
        let (w, b) = Self::split(params);
        let s = self.x.dot(&w) + b;
        let n = self.y.len() as f64;
        let r = Array1::from_iter(s.iter().zip(self.y).map(|(&s, &y)| sigmoid(s) - y));
        let mut gw = xt_dot(self.x, &r) / n + &(&w * self.l2);
        if let Some(p) = &self.penalty {
            let (excess, sign) = p.excess(&w);
            if excess > 0.0 {
                gw.scaled_add(2.0 * p.weight * excess * sign, &p.direction);
            }
        }
        let gb = r.sum() / n;
        let mut g = Array1::zeros(params.len());
        g.slice_mut(ndarray::s![..w.len()]).assign(&gw);
        g[w.len()] = gb;
        g
    }

    /// Upper estimate of the largest Hessian eigenvalue of the unpenalised
    /// part: `λ_max(AᵀA/n)/4 + l2` with `A = [X, 1]`, by power iteration.
    fn curvature_bound(&self) -> f64 {
        let d = self.x.ncols();
        let n = self.x.nrows() as f64;
        let mut u = Array1::from_elem(d + 1, 1.0 / ((d + 1) as f64).sqrt());
        let mut lambda = 1.0;
        for _ in 0..200 {
            let (w, b) = Self::split(&u);
            let au = self.x.dot(&w) + b;
            let mut next = Array1::zeros(d + 1);
            next.slice_mut(ndarray::s![..d]).assign(&(xt_dot(self.x, &au) / n));
            next[d] = au.sum() / n;
            let norm = next.dot(&next).sqrt();
            if norm == 0.0 {
                break;
            }
            lambda = norm;
            u = next / norm;
        }
        1.05 * 0.25 * lambda + self.l2
    }
}

/// `xᵀr`, accumulated over rows so a row-major `x` is read sequentially.
pub(crate) fn xt_dot(x: &Array2<f64>, r: &Array1<f64>) -> Array1<f64> {
    let mut out = Array1::zeros(x.ncols());
    for (row, &ri) in x.rows().into_iter().zip(r) {
        if ri != 0.0 {
            out.scaled_add(ri, &row);
        }
    }
    out
}

pub(crate) struct Minimum {
    pub params: Array1<f64>,
    pub iterations: usize,
}

/// Gradient descent with a fixed step. With a penalty, the step is
/// preconditioned by `L·I + 2ρ vvᵀ` (applied via Sherman–Morrison), which
/// majorises the penalised Hessian along `v` without shrinking the step
/// elsewhere.
pub(crate) fn minimize(
    objective: &Objective<'_>,
    init: Array1<f64>,
    config: &TrainConfig,
) -> Result<Minimum> {
    let l = objective.curvature_bound();
    let step = config.learning_rate / l;
    let d = objective.x.ncols();
    let mut params = init;
    let mut grad_norm = f64::INFINITY;
    for it in 0..config.max_iters {
        let g = objective.gradient(&params);
        grad_norm = g.dot(&g).sqrt();
        if !grad_norm.is_finite() {
            break;
        }
        if grad_norm <= config.convergence_tol {
            return Ok(Minimum {
                params,
                iterations: it,
            });
        }
        match &objective.penalty {
            Some(p) if p.weight > 0.0 => {
                let v = &p.direction;
                let gw = g.slice(ndarray::s![..d]);
                let k = 2.0 * p.weight;
                let coef = k * v.dot(&gw) / (l + k * v.dot(v));
                let mut dir = g.clone();
                dir.slice_mut(ndarray::s![..d]).scaled_add(-coef, v);
                params.scaled_add(-config.learning_rate / l, &dir);
            }
            _ => params.scaled_add(-step, &g),
        }
    }
    Err(Error::NotConverged {
        iterations: config.max_iters,
        grad_norm,
    })
}

pub(crate) struct PreparedInputs {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub standardization: Standardization,
    pub names: Vec<String>,
}

pub(crate) fn prepare(dataset: &Dataset, include_group: bool) -> Result<PreparedInputs> {
    if dataset.len() < 2 {
        return Err(Error::invalid("dataset", "need at least two examples"));
    }
    let raw = model_inputs(dataset, include_group);
    check_finite(raw.view())?;
    let (x, standardization) = standardize(&raw);
    let y = Array1::from_iter(dataset.labels().iter().map(|&l| l as u8 as f64));
    Ok(PreparedInputs {
        x,
        y,
        standardization,
        names: model_input_names(dataset, include_group),
    })
}

pub(crate) fn assemble(
    prepared: PreparedInputs,
    params: &Array1<f64>,
    include_group: bool,
    iterations: usize,
) -> LogisticModel {
    let d = prepared.x.ncols();
    LogisticModel {
        feature_names: prepared.names,
        weights: params.slice(ndarray::s![..d]).to_vec(),
        bias: params[d],
        standardization: prepared.standardization,
        uses_group_feature: include_group,
        iterations,
        dlp: None,
    }
}

/// Fits `p(y=1 | x)` (or `p(y=1 | x, z)` with `include_group`).
pub fn train_logistic(
    dataset: &Dataset,
    include_group: bool,
    config: &TrainConfig,
) -> Result<LogisticModel> {
    config.validate()?;
    let prepared = prepare(dataset, include_group)?;
    let objective = Objective {
        x: &prepared.x,
        y: &prepared.y,
        l2: config.l2_penalty,
        penalty: None,
    };
    let init = Array1::zeros(prepared.x.ncols() + 1);
    let min = minimize(&objective, init, config)?;
    Ok(assemble(prepared, &min.params, include_group, min.iterations))
}

pub fn predict_proba(model: &LogisticModel, inputs: ArrayView2<'_, f64>) -> Result<ProbEstimates> {
    let scores = model.scores(inputs)?;
    ProbEstimates::new(scores.into_iter().map(sigmoid).collect())
}

/// Strict thresholding of [`predict_proba`]: positive iff `p > threshold`.
pub fn predict(
    model: &LogisticModel,
    inputs: ArrayView2<'_, f64>,
    threshold: f64,
) -> Result<Decisions> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid("threshold", format!("{threshold} outside [0, 1]")));
    }
    Ok(Decisions::from_threshold(&predict_proba(model, inputs)?, threshold))
}

/// Convenience: probabilities for every row of a dataset.
pub fn predict_dataset(model: &LogisticModel, dataset: &Dataset) -> Result<ProbEstimates> {
    predict_proba(model, model.inputs_for(dataset).view())
}
