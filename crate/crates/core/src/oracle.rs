//! Exhaustive optimisers for small instances.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::metrics::immediate_utility;
use crate::types::{Decisions, Group, ParityConstraint, ProbEstimates, TargetKind};

pub const MAX_EMPIRICAL: usize = 16;
pub const MAX_DOMAIN: usize = 12;

const TIE_EPS: f64 = 1e-12;

fn reject_equal_fpr(target: &ParityConstraint) -> Result<()> {
    target.validate()?;
    if target.kind == TargetKind::EqualFpr {
        return Err(Error::UnsupportedTarget("the oracles do not see labels; equal-fpr is unsupported".into()));
    }
    Ok(())
}

/// The `û(d, 0.5)`-maximising decision vector over all `2^n` vectors that
/// satisfy `target`. Ties go to the lexicographically smallest vector
/// (`false < true`, index 0 first).
pub fn brute_force_constrained(
    probs: &ProbEstimates,
    groups: &[Group],
    target: &ParityConstraint,
) -> Result<(Decisions, f64)> {
    let n = probs.len();
    check_len("groups", n, groups.len())?;
    reject_equal_fpr(target)?;
    if n > MAX_EMPIRICAL {
        return Err(Error::TooLarge { size: n, limit: MAX_EMPIRICAL });
    }
    let n_a = groups.iter().filter(|&&g| g == Group::A).count() as u64;
    let n_b = n as u64 - n_a;
    if n_a == 0 {
        return Err(Error::EmptyGroup(Group::A));
    }
    if n_b == 0 {
        return Err(Error::EmptyGroup(Group::B));
    }
    let p = probs.as_slice();
    let cap = target.resource_cap.map(|c| c * n as f64);
    let bit = |mask: u32, i: usize| (mask >> (n - 1 - i)) & 1 == 1;

    let mut best: Option<(f64, u32)> = None;
    'masks: for mask in 0u32..(1u32 << n) {
        let (mut pos_a, mut pos_b, mut u) = (0u64, 0u64, 0.0);
        for i in 0..n {
            let d = bit(mask, i);
            if target.do_no_harm && groups[i] == Group::B && p[i] > 0.5 && !d {
                continue 'masks;
            }
            if d {
                u += p[i] - 0.5;
                match groups[i] {
                    Group::A => pos_a += 1,
                    Group::B => pos_b += 1,
                }
            }
        }
        if cap.is_some_and(|c| (pos_a + pos_b) as f64 > c + TIE_EPS) {
            continue;
        }
        if !target.parity_holds(pos_a, n_a, pos_b, n_b)? {
            continue;
        }
        if best.is_none_or(|(b, _)| u > b + TIE_EPS) {
            best = Some((u, mask));
        }
    }
    let (_, mask) = best.ok_or_else(|| Error::Infeasible(format!("no decision vector satisfies {target}")))?;
    let decisions = Decisions::new((0..n).map(|i| bit(mask, i)).collect());
    let utility = immediate_utility(&decisions, probs, 0.5)?;
    Ok((decisions, utility))
}

/// One `(x, group)` cell of a finite population: relative weight and
/// `P(y = 1 | x, group)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldCell {
    pub x: usize,
    pub group: Group,
    pub weight: u64,
    pub p: f64,
}

/// A finite joint distribution over `(x, group, y)`. Cell masses are weights
/// normalised by their total, so parity checks stay in integer arithmetic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteWorld {
    cells: Vec<WorldCell>,
    domain: Vec<usize>,
}

impl FiniteWorld {
    pub fn new(cells: Vec<WorldCell>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for c in &cells {
            if !(0.0..=1.0).contains(&c.p) {
                return Err(Error::invalid("cell probability", format!("{} outside [0, 1]", c.p)));
            }
            if !seen.insert((c.x, c.group)) {
                return Err(Error::invalid("world", format!("cell (x={}, {}) listed twice", c.x, c.group)));
            }
        }
        let domain: Vec<usize> = cells.iter().map(|c| c.x).collect::<BTreeSet<_>>().into_iter().collect();
        if domain.len() > MAX_DOMAIN {
            return Err(Error::TooLarge { size: domain.len(), limit: MAX_DOMAIN });
        }
        for g in [Group::A, Group::B] {
            if cells.iter().filter(|c| c.group == g).map(|c| c.weight).sum::<u64>() == 0 {
                return Err(Error::EmptyGroup(g));
            }
        }
        Ok(Self { cells, domain })
    }

    pub fn cells(&self) -> &[WorldCell] {
        &self.cells
    }

    /// Distinct `x` values, ascending.
    pub fn domain(&self) -> &[usize] {
        &self.domain
    }

    fn total(&self) -> u64 {
        self.cells.iter().map(|c| c.weight).sum()
    }

    fn group_weight(&self, g: Group) -> u64 {
        self.cells.iter().filter(|c| c.group == g).map(|c| c.weight).sum()
    }

    /// Best utility over rules given as a positive/negative bit per cell,
    /// or `None` if no rule in the class is feasible.
    fn best_over(
        &self,
        target: &ParityConstraint,
        rules: impl Iterator<Item = Vec<bool>>,
    ) -> Result<Option<f64>> {
        let total = self.total();
        let (w_a, w_b) = (self.group_weight(Group::A), self.group_weight(Group::B));
        let cap = target.resource_cap.map(|c| c * total as f64);
        let mut best: Option<f64> = None;
        'rules: for rule in rules {
            let (mut pos_a, mut pos_b, mut u) = (0u64, 0u64, 0.0);
            for (c, &d) in self.cells.iter().zip(&rule) {
                if target.do_no_harm && c.group == Group::B && c.p > 0.5 && c.weight > 0 && !d {
                    continue 'rules;
                }
                if d {
                    u += c.weight as f64 * (c.p - 0.5);
                    match c.group {
                        Group::A => pos_a += c.weight,
                        Group::B => pos_b += c.weight,
                    }
                }
            }
            if cap.is_some_and(|cap| (pos_a + pos_b) as f64 > cap + TIE_EPS) {
                continue;
            }
            if !target.parity_holds(pos_a, w_a, pos_b, w_b)? {
                continue;
            }
            let u = u / total as f64;
            if best.is_none_or(|b| u > b) {
                best = Some(u);
            }
        }
        Ok(best)
    }
}

/// Best utilities of group-blind and group-aware rules on the same world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleClassOptima {
    /// Best rule `d(x)`.
    pub x_only: f64,
    /// Best rule `d(x, group)`.
    pub group_aware: f64,
}

/// Enumerate every rule `d(x)` and every rule `d(x, group)`, returning the best
/// utility in each class subject to `target`.
pub fn brute_force_xonly(world: &FiniteWorld, target: &ParityConstraint) -> Result<RuleClassOptima> {
    reject_equal_fpr(target)?;
    let cells = world.cells();
    let domain = world.domain();
    let slot: Vec<usize> = cells
        .iter()
        .map(|c| domain.binary_search(&c.x).expect("x in domain"))
        .collect();
    let k = domain.len();
    let x_only = world.best_over(
        target,
        (0u32..(1u32 << k)).map(|m| slot.iter().map(|&s| (m >> s) & 1 == 1).collect()),
    )?;
    let m = cells.len();
    let group_aware = world.best_over(
        target,
        (0u64..(1u64 << m)).map(|mask| (0..m).map(|i| (mask >> i) & 1 == 1).collect()),
    )?;
    match (x_only, group_aware) {
        (Some(x_only), Some(group_aware)) => Ok(RuleClassOptima { x_only, group_aware }),
        _ => Err(Error::Infeasible(format!("no rule satisfies {target}"))),
    }
}
