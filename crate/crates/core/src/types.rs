//! Domain types shared across the crate.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Binary group membership. `A` is the declared reference (advantaged) group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    A,
    B,
}

impl Group {
    /// Numeric encoding used for covariances: a → 1, b → 0.
    pub fn indicator(self) -> f64 {
        match self {
            Group::A => 1.0,
            Group::B => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Group::A => "a",
            Group::B => "b",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "a" | "A" => Ok(Group::A),
            "b" | "B" => Ok(Group::B),
            other => Err(Error::invalid("group", format!("`{other}` is not `a` or `b`"))),
        }
    }
}

/// Human-readable names for the two groups, e.g. `Male` / `Female`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupNames {
    pub a: String,
    pub b: String,
}

impl Default for GroupNames {
    fn default() -> Self {
        Self {
            a: "a".into(),
            b: "b".into(),
        }
    }
}

/// Features, labels and group membership for `n` examples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<bool>,
    groups: Vec<Group>,
    feature_names: Vec<String>,
    group_names: GroupNames,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<bool>,
        groups: Vec<Group>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        check_len("groups", n, groups.len())?;
        check_len("feature rows", n, features.nrows())?;
        check_len("feature names", features.ncols(), feature_names.len())?;
        Ok(Self {
            features,
            labels,
            groups,
            feature_names,
            group_names: GroupNames::default(),
        })
    }

    pub fn with_group_names(mut self, names: GroupNames) -> Self {
        self.group_names = names;
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn group_names(&self) -> &GroupNames {
        &self.group_names
    }

    pub fn group_count(&self, group: Group) -> usize {
        self.groups.iter().filter(|&&g| g == group).count()
    }

    /// Column index of a feature by name.
    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }

    /// Copy with the labels replaced. Lengths must agree.
    pub fn with_labels(&self, labels: Vec<bool>) -> Result<Self> {
        check_len("labels", self.len(), labels.len())?;
        let mut out = self.clone();
        out.labels = labels;
        Ok(out)
    }

    /// Rows selected by `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let features = self.features.select(ndarray::Axis(0), indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        let groups = indices.iter().map(|&i| self.groups[i]).collect();
        Ok(Self::new(features, labels, groups, self.feature_names.clone())?
            .with_group_names(self.group_names.clone()))
    }
}

/// Per-example estimates of `P(y = 1 | inputs)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbEstimates(Vec<f64>);

impl ProbEstimates {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(Error::invalid(
                "probability",
                format!("entry {i} is {p}, outside [0, 1]"),
            ));
        }
        Ok(Self(probs))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for ProbEstimates {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ProbEstimates> for Vec<f64> {
    fn from(p: ProbEstimates) -> Self {
        p.0
    }
}

/// Binary decisions, one per example.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Decisions(Vec<bool>);

impl Decisions {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    /// Strict-inequality thresholding: positive iff `p > t`.
    pub fn from_threshold(probs: &ProbEstimates, threshold: f64) -> Self {
        Self(probs.as_slice().iter().map(|&p| p > threshold).collect())
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [bool] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count_positive(&self) -> usize {
        self.0.iter().filter(|&&d| d).count()
    }

    pub fn into_inner(self) -> Vec<bool> {
        self.0
    }
}

impl From<Vec<bool>> for Decisions {
    fn from(v: Vec<bool>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipDirection {
    /// 0 → 1
    Up,
    /// 1 → 0
    Down,
}

impl FlipDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            FlipDirection::Up => "up",
            FlipDirection::Down => "down",
        }
    }
}

impl FromStr for FlipDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "up" => Ok(FlipDirection::Up),
            "down" => Ok(FlipDirection::Down),
            other => Err(Error::invalid("flip direction", other.to_string())),
        }
    }
}

/// A single changed decision relative to some baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flip {
    pub index: usize,
    pub direction: FlipDirection,
    pub group: Group,
}

/// Every decision that differs between `baseline` and `treated`, in index order.
pub fn flips_between(
    baseline: &Decisions,
    treated: &Decisions,
    groups: &[Group],
) -> Result<Vec<Flip>> {
    check_len("treated decisions", baseline.len(), treated.len())?;
    check_len("groups", baseline.len(), groups.len())?;
    Ok(baseline
        .as_slice()
        .iter()
        .zip(treated.as_slice())
        .zip(groups)
        .enumerate()
        .filter(|(_, ((b, t), _))| b != t)
        .map(|(index, ((_, &t), &group))| Flip {
            index,
            direction: if t {
                FlipDirection::Up
            } else {
                FlipDirection::Down
            },
            group,
        })
        .collect())
}

/// What an intervention is asked to achieve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetKind {
    /// `q_a - q_b <= gamma`
    CvGap { gamma: f64 },
    /// `q_b / q_a >= p / 100`
    PPercent { p: f64 },
    /// `q_a == q_b`
    ExactParity,
    /// Equal false positive rates across groups.
    EqualFpr,
}

/// A parity target plus optional side constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityConstraint {
    pub kind: TargetKind,
    /// Group-b individuals positive at threshold 0.5 must stay positive.
    #[serde(default)]
    pub do_no_harm: bool,
    /// Upper bound on the overall positive proportion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resource_cap: Option<f64>,
}

/// Slack for floating comparisons of rates against the target parameter.
pub(crate) const RATE_EPS: f64 = 1e-12;

impl ParityConstraint {
    pub fn new(kind: TargetKind) -> Result<Self> {
        let c = Self {
            kind,
            do_no_harm: false,
            resource_cap: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn cv_gap(gamma: f64) -> Result<Self> {
        Self::new(TargetKind::CvGap { gamma })
    }

    pub fn p_percent(p: f64) -> Result<Self> {
        Self::new(TargetKind::PPercent { p })
    }

    pub fn exact_parity() -> Self {
        Self {
            kind: TargetKind::ExactParity,
            do_no_harm: false,
            resource_cap: None,
        }
    }

    pub fn equal_fpr() -> Self {
        Self {
            kind: TargetKind::EqualFpr,
            do_no_harm: false,
            resource_cap: None,
        }
    }

    pub fn with_do_no_harm(mut self, on: bool) -> Self {
        self.do_no_harm = on;
        self
    }

    pub fn with_resource_cap(mut self, cap: Option<f64>) -> Result<Self> {
        self.resource_cap = cap;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            TargetKind::CvGap { gamma } if !(0.0..=1.0).contains(&gamma) => {
                return Err(Error::invalid("gamma", format!("{gamma} outside [0, 1]")))
            }
            TargetKind::PPercent { p } if !(p > 0.0 && p.is_finite()) => {
                return Err(Error::invalid("p", format!("{p} must be positive")))
            }
            _ => {}
        }
        if let Some(cap) = self.resource_cap {
            if !(0.0..=1.0).contains(&cap) {
                return Err(Error::invalid("resource cap", format!("{cap} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Whether the parity part of the target holds for the given positive
    /// counts (or integer masses) per group. Side constraints are not checked.
    ///
    /// Fails for [`TargetKind::EqualFpr`], which depends on labels.
    pub fn parity_holds(&self, pos_a: u64, n_a: u64, pos_b: u64, n_b: u64) -> Result<bool> {
        if n_a == 0 {
            return Err(Error::EmptyGroup(Group::A));
        }
        if n_b == 0 {
            return Err(Error::EmptyGroup(Group::B));
        }
        let q_a = pos_a as f64 / n_a as f64;
        let q_b = pos_b as f64 / n_b as f64;
        Ok(match self.kind {
            TargetKind::CvGap { gamma } => q_a - q_b <= gamma + RATE_EPS,
            TargetKind::PPercent { p } => p / 100.0 * q_a - q_b <= RATE_EPS,
            TargetKind::ExactParity => {
                u128::from(pos_a) * u128::from(n_b) == u128::from(pos_b) * u128::from(n_a)
            }
            TargetKind::EqualFpr => {
                return Err(Error::UnsupportedTarget(
                    "equal-fpr is defined on labels, not positive rates".into(),
                ))
            }
        })
    }

    /// The gap the target drives toward zero (or `gamma`): the p-gap for
    /// p-% targets, the CV gap otherwise.
    pub fn targeted_gap(&self, q_a: f64, q_b: f64) -> f64 {
        match self.kind {
            TargetKind::PPercent { p } => p / 100.0 * q_a - q_b,
            _ => q_a - q_b,
        }
    }

    /// Weight applied to a group-a flip in the gap reduction (`p/100`, or 1).
    pub fn a_weight(&self) -> f64 {
        match self.kind {
            TargetKind::PPercent { p } => p / 100.0,
            _ => 1.0,
        }
    }
}

impl fmt::Display for ParityConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TargetKind::CvGap { gamma } => write!(f, "cv:{gamma}")?,
            TargetKind::PPercent { p } => write!(f, "p-percent:{p}")?,
            TargetKind::ExactParity => f.write_str("exact")?,
            TargetKind::EqualFpr => f.write_str("equal-fpr")?,
        }
        if self.do_no_harm {
            f.write_str("+do-no-harm")?;
        }
        if let Some(cap) = self.resource_cap {
            write!(f, "+cap:{cap}")?;
        }
        Ok(())
    }
}

/// Parses `p-percent:P`, `cv:G`, `exact` or `equal-fpr`, optionally followed
/// by `+do-no-harm` and `+cap:C` modifiers.
impl FromStr for ParityConstraint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split('+');
        let head = parts.next().unwrap_or_default().trim();
        let number = |v: &str, what: &'static str| -> Result<f64> {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(what, format!("`{v}` is not a number")))
        };
        let kind = match head.split_once(':') {
            Some(("p-percent", v)) => TargetKind::PPercent {
                p: number(v, "p")?,
            },
            Some(("cv", v)) => TargetKind::CvGap {
                gamma: number(v, "gamma")?,
            },
            None if head == "exact" => TargetKind::ExactParity,
            None if head == "equal-fpr" => TargetKind::EqualFpr,
            _ => {
                return Err(Error::invalid(
                    "target",
                    format!("`{head}` (expected p-percent:P | cv:G | exact | equal-fpr)"),
                ))
            }
        };
        let mut c = Self {
            kind,
            do_no_harm: false,
            resource_cap: None,
        };
        for m in parts {
            match m.trim().split_once(':') {
                None if m.trim() == "do-no-harm" => c.do_no_harm = true,
                Some(("cap", v)) => c.resource_cap = Some(number(v, "resource cap")?),
                _ => return Err(Error::invalid("target modifier", m.to_string())),
            }
        }
        c.validate()?;
        Ok(c)
    }
}
