//! Synthetic hiring data and label corruption.
//!
//! Every random draw comes from its own counter-based stream keyed by
//! `(seed, column, example)`, so a column's values do not depend on how many
//! draws other columns consumed.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::sigmoid;
use crate::types::{Dataset, Group, GroupNames};

pub const HAIR_FEATURE: &str = "hair_length";
pub const EXPERIENCE_FEATURE: &str = "work_exp";

const HAIR_SCALE: f64 = 35.0;
const EXP_INTERCEPT: f64 = -25.5;
const EXP_SLOPE: f64 = 2.5;

/// Which group receives the wide `Beta(2, 2)` hair-length distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HairBinding {
    /// Women have the longer hair.
    #[default]
    Narrative,
    /// Men draw `Beta(2, 2)`, women `Beta(2, 7)`.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HiringConfig {
    pub n_total: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub hair_binding: HairBinding,
}

impl Default for HiringConfig {
    fn default() -> Self {
        Self {
            n_total: 2000,
            train_fraction: 0.7,
            seed: 0,
            hair_binding: HairBinding::Narrative,
        }
    }
}

impl HiringConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_total < 2 {
            return Err(Error::invalid("n_total", format!("{} < 2", self.n_total)));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid(
                "train_fraction",
                format!("{} outside (0, 1)", self.train_fraction),
            ));
        }
        let n_train = train_size(self.n_total, self.train_fraction);
        if n_train == 0 || n_train >= self.n_total {
            return Err(Error::invalid("train_fraction", "leaves an empty split"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionConfig {
    pub target_group: Group,
    pub flip_rate: f64,
    pub seed: u64,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        Self {
            target_group: Group::B,
            flip_rate: 0.25,
            seed: 0,
        }
    }
}

impl CorruptionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.flip_rate) {
            return Err(Error::invalid("flip_rate", format!("{} outside [0, 1]", self.flip_rate)));
        }
        Ok(())
    }
}

pub(crate) fn train_size(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize
}

#[derive(Clone, Copy)]
#[repr(u64)]
enum Column {
    Group = 0,
    Hair = 1,
    Count = 2,
    Offset = 3,
    Label = 4,
    Corruption = 5,
}

fn stream(seed: u64, column: Column, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(column as u64);
    rng.set_word_pos((index as u128) << 32);
    rng
}

/// Probability of a positive label given work experience.
pub fn hire_probability(work_exp: f64) -> f64 {
    sigmoid(EXP_INTERCEPT + EXP_SLOPE * work_exp)
}

/// Draw `n_total` applicants and split them into train and test.
///
/// Men form group a and women group b. Features are hair length and work
/// experience; gender itself is not a feature column.
pub fn generate_hiring(config: &HiringConfig) -> Result<(Dataset, Dataset)> {
    config.validate()?;
    let n = config.n_total;
    let wide = Beta::new(2.0, 2.0).expect("valid beta");
    let narrow = Beta::new(2.0, 7.0).expect("valid beta");
    let experience_a = Poisson::new(31.0).expect("valid rate");
    let experience_b = Poisson::new(25.0).expect("valid rate");
    let offset = Normal::new(20.0, 0.2).expect("valid normal");

    let mut features = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for i in 0..n {
        let group = if stream(config.seed, Column::Group, i).random_bool(0.5) {
            Group::A
        } else {
            Group::B
        };
        let hair_dist = match (group, config.hair_binding) {
            (Group::B, HairBinding::Narrative) | (Group::A, HairBinding::Literal) => &wide,
            _ => &narrow,
        };
        let hair = HAIR_SCALE * hair_dist.sample(&mut stream(config.seed, Column::Hair, i));
        let count = match group {
            Group::A => experience_a,
            Group::B => experience_b,
        }
        .sample(&mut stream(config.seed, Column::Count, i));
        let work_exp = count - offset.sample(&mut stream(config.seed, Column::Offset, i));
        let hired = stream(config.seed, Column::Label, i).random_bool(hire_probability(work_exp));
        features[[i, 0]] = hair;
        features[[i, 1]] = work_exp;
        labels.push(hired);
        groups.push(group);
    }
    let all = Dataset::new(
        features,
        labels,
        groups,
        vec![HAIR_FEATURE.into(), EXPERIENCE_FEATURE.into()],
    )?
    .with_group_names(GroupNames {
        a: "man".into(),
        b: "woman".into(),
    });
    let n_train = train_size(n, config.train_fraction);
    let train: Vec<usize> = (0..n_train).collect();
    let test: Vec<usize> = (n_train..n).collect();
    Ok((all.select(&train)?, all.select(&test)?))
}

/// Set each positive label in the target group to negative with probability
/// `flip_rate`, independently per example.
pub fn inject_discrimination(dataset: &Dataset, config: &CorruptionConfig) -> Result<Dataset> {
    config.validate()?;
    if dataset.group_count(config.target_group) == 0 {
        return Err(Error::EmptyGroup(config.target_group));
    }
    let labels = dataset
        .labels()
        .iter()
        .zip(dataset.groups())
        .enumerate()
        .map(|(i, (&y, &g))| {
            if y && g == config.target_group {
                !stream(config.seed, Column::Corruption, i).random_bool(config.flip_rate)
            } else {
                y
            }
        })
        .collect();
    dataset.with_labels(labels)
}
