//! Per-group threshold rules.
//!
//! Every rule here positions each group's decisions as a top-k selection by
//! estimated probability, so within a group a higher estimate never receives
//! a worse decision.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::metrics::{immediate_utility, p_percent_from_rates};
use crate::types::{
    Decisions, Flip, FlipDirection, Group, ParityConstraint, ProbEstimates, TargetKind, RATE_EPS,
};

/// Thresholds `(t_a, t_b)`; an example in group `z` is positive iff `p > t_z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupThresholds {
    pub t_a: f64,
    pub t_b: f64,
}

impl GroupThresholds {
    pub fn new(t_a: f64, t_b: f64) -> Result<Self> {
        for t in [t_a, t_b] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::invalid("threshold", format!("{t} outside [0, 1]")));
            }
        }
        Ok(Self { t_a, t_b })
    }

    pub fn uniform(t: f64) -> Result<Self> {
        Self::new(t, t)
    }

    pub fn get(&self, group: Group) -> f64 {
        match group {
            Group::A => self.t_a,
            Group::B => self.t_b,
        }
    }
}

pub fn apply_thresholds(
    probs: &ProbEstimates,
    groups: &[Group],
    thresholds: &GroupThresholds,
) -> Result<Decisions> {
    check_len("groups", probs.len(), groups.len())?;
    Ok(Decisions::new(
        probs
            .as_slice()
            .iter()
            .zip(groups)
            .map(|(&p, &g)| p > thresholds.get(g))
            .collect(),
    ))
}

/// One greedy flip, with the gaps after applying it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipRecord {
    pub index: usize,
    pub group: Group,
    pub direction: FlipDirection,
    /// Gap reduction per unit of accuracy lost (`+inf` for free flips).
    pub score: f64,
    pub p_gap: f64,
    pub cv_gap: f64,
}

/// Ordered flips applied to threshold-0.5 decisions.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FlipLog {
    /// The `p` of the p-gap column (100 for CV and exact-parity targets).
    pub p: f64,
    pub entries: Vec<FlipRecord>,
}

impl FlipLog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn flips(&self) -> Vec<Flip> {
        self.entries
            .iter()
            .map(|r| Flip {
                index: r.index,
                direction: r.direction,
                group: r.group,
            })
            .collect()
    }

    /// Threshold-0.5 decisions with the first `k` flips applied.
    pub fn decisions_after(&self, probs: &ProbEstimates, k: usize) -> Decisions {
        let mut d = Decisions::from_threshold(probs, 0.5);
        for r in self.entries.iter().take(k) {
            d.as_mut_slice()[r.index] = r.direction == FlipDirection::Up;
        }
        d
    }

    /// Differences between two decision vectors as flips in index order,
    /// with NaN scores and the gaps after each flip.
    pub fn between(baseline: &Decisions, treated: &Decisions, groups: &[Group], p: f64) -> Result<Self> {
        let flips = crate::types::flips_between(baseline, treated, groups)?;
        let (n_a, n_b) = group_sizes(groups)?;
        let mut pos = [0usize; 2];
        for (&d, &g) in baseline.as_slice().iter().zip(groups) {
            pos[g as usize] += usize::from(d);
        }
        let entries = flips
            .into_iter()
            .map(|f| {
                match f.direction {
                    FlipDirection::Up => pos[f.group as usize] += 1,
                    FlipDirection::Down => pos[f.group as usize] -= 1,
                }
                let q_a = pos[0] as f64 / n_a as f64;
                let q_b = pos[1] as f64 / n_b as f64;
                FlipRecord {
                    index: f.index,
                    group: f.group,
                    direction: f.direction,
                    score: f64::NAN,
                    p_gap: p / 100.0 * q_a - q_b,
                    cv_gap: q_a - q_b,
                }
            })
            .collect();
        Ok(Self { p, entries })
    }
}

fn group_sizes(groups: &[Group]) -> Result<(usize, usize)> {
    let n_a = groups.iter().filter(|&&g| g == Group::A).count();
    let n_b = groups.len() - n_a;
    if n_a == 0 {
        return Err(Error::EmptyGroup(Group::A));
    }
    if n_b == 0 {
        return Err(Error::EmptyGroup(Group::B));
    }
    Ok((n_a, n_b))
}

/// Whether the greedy loop may stop at these counts.
fn greedy_done(target: &ParityConstraint, pa: usize, na: usize, pb: usize, nb: usize) -> Result<bool> {
    match target.kind {
        // Exact equality may be out of reach with coprime group sizes; stop at
        // the first flip that closes the gap.
        TargetKind::ExactParity => Ok(pa as f64 / na as f64 - pb as f64 / nb as f64 <= RATE_EPS),
        _ => target.parity_holds(pa as u64, na as u64, pb as u64, nb as u64),
    }
}

/// Greedy flipping from threshold-0.5 decisions.
///
/// Candidates are positives in group a (flipped down, score
/// `w / (n_a (2p − 1))` with `w = p/100` for p-% targets and 1 otherwise) and
/// negatives in group b (flipped up, score `1 / (n_b (1 − 2p))`). They are
/// applied in descending score order until the target holds. Equal scores
/// put group-b flips first, then lower indices. With `do_no_harm`, only
/// group-b flips are used.
pub fn greedy_flip(
    probs: &ProbEstimates,
    groups: &[Group],
    target: &ParityConstraint,
) -> Result<(Decisions, FlipLog)> {
    check_len("groups", probs.len(), groups.len())?;
    target.validate()?;
    match target.kind {
        TargetKind::EqualFpr => {
            return Err(Error::UnsupportedTarget(
                "greedy flipping targets CV / p-% / exact parity; use equal_fpr_thresholds".into(),
            ))
        }
        _ if target.resource_cap.is_some() => {
            return Err(Error::UnsupportedTarget(
                "greedy flipping does not enforce a resource cap; use optimal_thresholds".into(),
            ))
        }
        _ => {}
    }
    let (n_a, n_b) = group_sizes(groups)?;
    let p = probs.as_slice();
    let mut decisions = Decisions::from_threshold(probs, 0.5);
    let mut pos_a = 0;
    let mut pos_b = 0;
    for (&d, &g) in decisions.as_slice().iter().zip(groups) {
        match (d, g) {
            (true, Group::A) => pos_a += 1,
            (true, Group::B) => pos_b += 1,
            _ => {}
        }
    }
    let w = target.a_weight();
    let gaps = |pa: usize, pb: usize| {
        let q_a = pa as f64 / n_a as f64;
        let q_b = pb as f64 / n_b as f64;
        (w * q_a - q_b, q_a - q_b)
    };
    let mut log = FlipLog {
        p: 100.0 * w,
        entries: Vec::new(),
    };
    if greedy_done(target, pos_a, n_a, pos_b, n_b)? {
        return Ok((decisions, log));
    }

    let mut candidates: Vec<(usize, Group, f64)> = p
        .iter()
        .zip(groups)
        .zip(decisions.as_slice())
        .enumerate()
        .filter_map(|(i, ((&pi, &g), &d))| match (g, d) {
            (Group::A, true) if !target.do_no_harm => {
                Some((i, g, w / (n_a as f64 * (2.0 * pi - 1.0))))
            }
            (Group::B, false) => {
                let cost = 1.0 - 2.0 * pi;
                let score = if cost == 0.0 {
                    f64::INFINITY
                } else {
                    1.0 / (n_b as f64 * cost)
                };
                Some((i, g, score))
            }
            _ => None,
        })
        .collect();
    candidates.sort_by(|x, y| {
        y.2.partial_cmp(&x.2)
            .unwrap_or(Ordering::Equal)
            .then_with(|| y.1.cmp(&x.1))
            .then_with(|| x.0.cmp(&y.0))
    });

    for (index, group, score) in candidates {
        let direction = match group {
            Group::A => {
                pos_a -= 1;
                FlipDirection::Down
            }
            Group::B => {
                pos_b += 1;
                FlipDirection::Up
            }
        };
        decisions.as_mut_slice()[index] = direction == FlipDirection::Up;
        let (p_gap, cv_gap) = gaps(pos_a, pos_b);
        log.entries.push(FlipRecord {
            index,
            group,
            direction,
            score,
            p_gap,
            cv_gap,
        });
        if greedy_done(target, pos_a, n_a, pos_b, n_b)? {
            return Ok((decisions, log));
        }
    }
    let (p_gap, cv_gap) = gaps(pos_a, pos_b);
    Err(Error::Unreachable {
        best_gap: match target.kind {
            TargetKind::PPercent { .. } => p_gap,
            _ => cv_gap,
        },
    })
}

/// Threshold for one group reproducing `decisions` on `probs` (both restricted
/// to the group). Returns 0.5 when the decisions are the threshold-0.5 ones.
fn group_threshold(group: Group, probs: &[f64], decisions: &[bool]) -> Result<f64> {
    if probs.iter().zip(decisions).all(|(&p, &d)| (p > 0.5) == d) {
        return Ok(0.5);
    }
    let max_neg = probs
        .iter()
        .zip(decisions)
        .filter(|(_, &d)| !d)
        .map(|(&p, _)| p)
        .fold(None, |m: Option<f64>, p| Some(m.map_or(p, |m| m.max(p))));
    let min_pos = probs
        .iter()
        .zip(decisions)
        .filter(|(_, &d)| d)
        .map(|(&p, _)| p)
        .fold(None, |m: Option<f64>, p| Some(m.map_or(p, |m| m.min(p))));
    match (max_neg, min_pos) {
        (Some(lo), Some(hi)) => {
            if lo >= hi {
                return Err(Error::DuplicateStraddle { value: lo, group });
            }
            let mid = 0.5 * (lo + hi);
            Ok(if mid < hi { mid } else { lo })
        }
        (Some(lo), None) => Ok(0.5 * (lo + 1.0)),
        (None, Some(hi)) => {
            if hi <= 0.0 {
                return Err(Error::DuplicateStraddle { value: hi, group });
            }
            Ok(0.5 * hi)
        }
        (None, None) => Ok(0.5),
    }
}

/// Per-group thresholds reproducing arbitrary group-wise top-k decisions.
pub fn thresholds_for_decisions(
    probs: &ProbEstimates,
    groups: &[Group],
    decisions: &Decisions,
) -> Result<GroupThresholds> {
    check_len("groups", probs.len(), groups.len())?;
    check_len("decisions", probs.len(), decisions.len())?;
    let mut t = [0.5; 2];
    for g in [Group::A, Group::B] {
        let (p, d): (Vec<f64>, Vec<bool>) = probs
            .as_slice()
            .iter()
            .zip(decisions.as_slice())
            .zip(groups)
            .filter(|(_, &gi)| gi == g)
            .map(|((&p, &d), _)| (p, d))
            .unzip();
        t[g as usize] = group_threshold(g, &p, &d)?;
    }
    GroupThresholds::new(t[0], t[1])
}

/// Thresholds equivalent to a flip log: the midpoint between the last flipped
/// and the first unflipped probability in each group, 0.5 for untouched groups.
pub fn thresholds_from_flips(
    probs: &ProbEstimates,
    groups: &[Group],
    log: &FlipLog,
) -> Result<GroupThresholds> {
    check_len("groups", probs.len(), groups.len())?;
    if let Some(r) = log.entries.iter().find(|r| r.index >= probs.len()) {
        return Err(Error::invalid("flip log", format!("index {} out of range", r.index)));
    }
    let decisions = log.decisions_after(probs, log.len());
    thresholds_for_decisions(probs, groups, &decisions)
}

/// Within each group, `p_i > p_j` implies `d_i >= d_j`.
pub fn respects_rational_ordering(probs: &ProbEstimates, groups: &[Group], decisions: &Decisions) -> bool {
    [Group::A, Group::B].into_iter().all(|g| {
        let mut max_neg = f64::NEG_INFINITY;
        let mut min_pos = f64::INFINITY;
        for ((&p, &d), _) in probs
            .as_slice()
            .iter()
            .zip(decisions.as_slice())
            .zip(groups)
            .filter(|(_, &gi)| gi == g)
        {
            if d {
                min_pos = min_pos.min(p);
            } else {
                max_neg = max_neg.max(p);
            }
        }
        max_neg <= min_pos
    })
}

/// One group's examples sorted by descending probability, with the cut
/// positions a strict threshold can realise.
struct SortedGroup {
    /// Original indices in descending-probability order.
    order: Vec<usize>,
    /// `prefix[k] = Σ_{j<k} (p_j − 0.5)` in sorted order.
    prefix: Vec<f64>,
    /// Valid `k` (number of positives), ascending.
    cuts: Vec<usize>,
    /// Number of examples with `p > 0.5`.
    k_half: usize,
}

impl SortedGroup {
    fn new(probs: &[f64], groups: &[Group], group: Group) -> Self {
        let mut order: Vec<usize> = (0..probs.len()).filter(|&i| groups[i] == group).collect();
        order.sort_by(|&i, &j| probs[j].partial_cmp(&probs[i]).unwrap_or(Ordering::Equal).then(i.cmp(&j)));
        let v: Vec<f64> = order.iter().map(|&i| probs[i]).collect();
        let mut prefix = Vec::with_capacity(v.len() + 1);
        prefix.push(0.0);
        for &p in &v {
            prefix.push(prefix.last().unwrap() + (p - 0.5));
        }
        let n = v.len();
        let cuts = (0..=n)
            .filter(|&k| k == 0 || (v[k - 1] > 0.0 && (k == n || v[k - 1] > v[k])))
            .collect();
        let k_half = v.iter().filter(|&&p| p > 0.5).count();
        Self {
            order,
            prefix,
            cuts,
            k_half,
        }
    }

    fn len(&self) -> usize {
        self.order.len()
    }

    /// Valid cut in `[lo, hi]` maximising the prefix sum, if any.
    fn best_cut_in(&self, lo: usize, hi: usize) -> Option<usize> {
        if lo > hi {
            return None;
        }
        // The prefix sum is concave in k and peaks at k_half.
        let target = self.k_half.clamp(lo, hi);
        let at = self.cuts.partition_point(|&k| k < target);
        let above = self.cuts.get(at).copied().filter(|&k| k <= hi);
        let below = at
            .checked_sub(1)
            .map(|i| self.cuts[i])
            .filter(|&k| k >= lo);
        match (below, above) {
            (Some(b), Some(a)) => Some(if self.prefix[a] > self.prefix[b] { a } else { b }),
            (x, y) => x.or(y),
        }
    }
}

/// Result of an exact threshold search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSolution {
    pub thresholds: GroupThresholds,
    /// Positives selected in groups a and b.
    pub k_a: usize,
    pub k_b: usize,
    /// `û(d, 0.5)` of the selected decisions.
    pub utility: f64,
    #[serde(skip)]
    pub decisions: Decisions,
}

fn assemble_solution(
    probs: &ProbEstimates,
    groups: &[Group],
    a: &SortedGroup,
    b: &SortedGroup,
    k_a: usize,
    k_b: usize,
) -> Result<ThresholdSolution> {
    let mut bits = vec![false; probs.len()];
    for &i in a.order.iter().take(k_a).chain(b.order.iter().take(k_b)) {
        bits[i] = true;
    }
    let decisions = Decisions::new(bits);
    Ok(ThresholdSolution {
        thresholds: thresholds_for_decisions(probs, groups, &decisions)?,
        k_a,
        k_b,
        utility: immediate_utility(&decisions, probs, 0.5)?,
        decisions,
    })
}

/// Smallest `k` in `0..=n` with `pred(k)`, for `pred` monotone false → true.
fn first_true(n: usize, pred: impl Fn(usize) -> Result<bool>) -> Result<Option<usize>> {
    let (mut lo, mut hi) = (0usize, n + 1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid)? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok((lo <= n).then_some(lo))
}

/// Exact maximiser of `û(d, 0.5)` over per-group top-k rules subject to the
/// target, found by sweeping `k_a` and choosing the best feasible `k_b`.
///
/// Side constraints: `do_no_harm` keeps every group-b positive at 0.5
/// positive; `resource_cap` bounds the overall positive share.
pub fn optimal_thresholds(
    probs: &ProbEstimates,
    groups: &[Group],
    target: &ParityConstraint,
) -> Result<ThresholdSolution> {
    check_len("groups", probs.len(), groups.len())?;
    target.validate()?;
    if target.kind == TargetKind::EqualFpr {
        return Err(Error::UnsupportedTarget(
            "equal-fpr needs labels; use equal_fpr_thresholds".into(),
        ));
    }
    let (n_a, n_b) = group_sizes(groups)?;
    let a = SortedGroup::new(probs.as_slice(), groups, Group::A);
    let b = SortedGroup::new(probs.as_slice(), groups, Group::B);
    let n = probs.len();
    let cap_total = target
        .resource_cap
        .map(|c| ((c * n as f64) + RATE_EPS).floor() as usize)
        .unwrap_or(n);
    let b_floor = if target.do_no_harm { b.k_half } else { 0 };

    let mut best: Option<(f64, usize, usize)> = None;
    for &k_a in &a.cuts {
        if k_a > cap_total {
            break;
        }
        let (lo, hi) = match target.kind {
            TargetKind::ExactParity => {
                let num = k_a * n_b;
                if num % n_a != 0 {
                    continue;
                }
                (num / n_a, num / n_a)
            }
            _ => {
                let Some(lo) = first_true(n_b, |k_b| {
                    target.parity_holds(k_a as u64, n_a as u64, k_b as u64, n_b as u64)
                })?
                else {
                    continue;
                };
                (lo, n_b)
            }
        };
        let lo = lo.max(b_floor);
        let hi = hi.min(cap_total - k_a);
        let Some(k_b) = b.best_cut_in(lo, hi) else {
            continue;
        };
        let value = a.prefix[k_a] + b.prefix[k_b];
        if best.is_none_or(|(v, _, _)| value > v) {
            best = Some((value, k_a, k_b));
        }
    }
    let (_, k_a, k_b) = best.ok_or_else(|| Error::Infeasible(format!("no group thresholds satisfy {target}")))?;
    assemble_solution(probs, groups, &a, &b, k_a, k_b)
}

/// Utility-maximising thresholds whose per-group false positive rates agree
/// to within one negative example of the larger group (`1 / max(N_a⁻, N_b⁻)`).
pub fn equal_fpr_thresholds(
    probs: &ProbEstimates,
    groups: &[Group],
    labels: &[bool],
) -> Result<ThresholdSolution> {
    check_len("groups", probs.len(), groups.len())?;
    check_len("labels", probs.len(), labels.len())?;
    group_sizes(groups)?;
    let a = SortedGroup::new(probs.as_slice(), groups, Group::A);
    let b = SortedGroup::new(probs.as_slice(), groups, Group::B);
    // false positives among the top k, for every k
    let fp_curve = |g: &SortedGroup| -> Vec<usize> {
        let mut out = Vec::with_capacity(g.len() + 1);
        out.push(0);
        for &i in &g.order {
            out.push(out.last().unwrap() + usize::from(!labels[i]));
        }
        out
    };
    let fp_a = fp_curve(&a);
    let fp_b = fp_curve(&b);
    let neg_a = *fp_a.last().unwrap();
    let neg_b = *fp_b.last().unwrap();
    for (neg, g) in [(neg_a, Group::A), (neg_b, Group::B)] {
        if neg == 0 {
            return Err(Error::Infeasible(format!("group {g} has no negative examples")));
        }
    }
    let tol = 1.0 / neg_a.max(neg_b) as f64 + RATE_EPS;
    let fpr_b = |k: usize| fp_b[k] as f64 / neg_b as f64;

    let mut best: Option<(f64, usize, usize)> = None;
    for &k_a in &a.cuts {
        let target = fp_a[k_a] as f64 / neg_a as f64;
        let Some(lo) = first_true(b.len(), |k| Ok(fpr_b(k) >= target - tol))? else {
            continue;
        };
        let Some(after) = first_true(b.len(), |k| Ok(fpr_b(k) > target + tol))? else {
            // every k satisfies the upper bound
            if let Some(k_b) = b.best_cut_in(lo, b.len()) {
                consider(&mut best, a.prefix[k_a] + b.prefix[k_b], k_a, k_b);
            }
            continue;
        };
        if after == 0 {
            continue;
        }
        if let Some(k_b) = b.best_cut_in(lo, after - 1) {
            consider(&mut best, a.prefix[k_a] + b.prefix[k_b], k_a, k_b);
        }
    }
    let (_, k_a, k_b) = best.ok_or_else(|| Error::Infeasible("no equal-FPR thresholds".into()))?;
    assemble_solution(probs, groups, &a, &b, k_a, k_b)
}

fn consider(best: &mut Option<(f64, usize, usize)>, value: f64, k_a: usize, k_b: usize) {
    if best.is_none_or(|(v, _, _)| value > v) {
        *best = Some((value, k_a, k_b));
    }
}

/// A point on the greedy accuracy/parity path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub flips: usize,
    pub accuracy: f64,
    pub q_a: f64,
    pub q_b: f64,
    #[serde(with = "crate::metrics::extended_float")]
    pub p_percent: f64,
}

/// Realised accuracy and parity after each prefix of the greedy flip sequence
/// toward `target` (point 0 is the threshold-0.5 rule).
pub fn greedy_tradeoff(
    probs: &ProbEstimates,
    groups: &[Group],
    labels: &[bool],
    target: &ParityConstraint,
) -> Result<(FlipLog, Vec<TradeoffPoint>)> {
    check_len("labels", probs.len(), labels.len())?;
    let (_, log) = greedy_flip(probs, groups, target)?;
    let (n_a, n_b) = group_sizes(groups)?;
    let mut d = Decisions::from_threshold(probs, 0.5);
    let mut correct = d.as_slice().iter().zip(labels).filter(|(a, b)| a == b).count();
    let mut pos = [0usize; 2];
    for (&di, &g) in d.as_slice().iter().zip(groups) {
        pos[g as usize] += usize::from(di);
    }
    let n = probs.len() as f64;
    let point = |flips: usize, correct: usize, pos: [usize; 2]| {
        let q_a = pos[0] as f64 / n_a as f64;
        let q_b = pos[1] as f64 / n_b as f64;
        TradeoffPoint {
            flips,
            accuracy: correct as f64 / n,
            q_a,
            q_b,
            p_percent: p_percent_from_rates(q_a, q_b),
        }
    };
    let mut path = vec![point(0, correct, pos)];
    for (k, r) in log.entries.iter().enumerate() {
        let new = r.direction == FlipDirection::Up;
        let i = r.index;
        if d.as_slice()[i] == labels[i] {
            correct -= 1;
        } else {
            correct += 1;
        }
        d.as_mut_slice()[i] = new;
        if new {
            pos[r.group as usize] += 1;
        } else {
            pos[r.group as usize] -= 1;
        }
        path.push(point(k + 1, correct, pos));
    }
    Ok((log, path))
}

/// The highest-parity point whose accuracy is at most `tolerance` below
/// `reference_accuracy`.
pub fn best_parity_at_accuracy(
    path: &[TradeoffPoint],
    reference_accuracy: f64,
    tolerance: f64,
) -> Option<TradeoffPoint> {
    path.iter()
        .filter(|pt| pt.accuracy >= reference_accuracy - tolerance - RATE_EPS)
        .copied()
        .fold(None, |best: Option<TradeoffPoint>, pt| match best {
            Some(b) if b.p_percent >= pt.p_percent => Some(b),
            _ => Some(pt),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probs(v: &[f64]) -> ProbEstimates {
        ProbEstimates::new(v.to_vec()).unwrap()
    }

    fn grp(s: &str) -> Vec<Group> {
        s.chars().map(|c| c.to_string().parse().unwrap()).collect()
    }

    fn four_point() -> (ProbEstimates, Vec<Group>) {
        (probs(&[0.9, 0.55, 0.45, 0.1]), grp("aabb"))
    }

    #[test]
    fn apply_thresholds_cases() {
        let (p, g) = four_point();
        let all = apply_thresholds(&p, &g, &GroupThresholds::uniform(0.0).unwrap()).unwrap();
        assert_eq!(all.count_positive(), 4);
        let half = apply_thresholds(&p, &g, &GroupThresholds::uniform(0.5).unwrap()).unwrap();
        assert_eq!(half, Decisions::from_threshold(&p, 0.5));
        let d = apply_thresholds(&p, &g, &GroupThresholds::new(0.6, 0.4).unwrap()).unwrap();
        assert_eq!(d.as_slice(), &[true, false, true, false]);
        assert!(apply_thresholds(&p, &g[..3], &GroupThresholds::uniform(0.5).unwrap()).is_err());
        assert!(GroupThresholds::new(1.2, 0.3).is_err());
    }

    #[test]
    fn greedy_four_point_example() {
        let (p, g) = four_point();
        let (d, log) = greedy_flip(&p, &g, &ParityConstraint::p_percent(100.0).unwrap()).unwrap();
        let order: Vec<(usize, FlipDirection)> = log.entries.iter().map(|r| (r.index, r.direction)).collect();
        assert_eq!(order, vec![(2, FlipDirection::Up), (1, FlipDirection::Down)]);
        assert_eq!(d.as_slice(), &[true, false, true, false]);
        let last = log.entries.last().unwrap();
        assert_eq!(last.cv_gap, 0.0);
        assert_eq!(last.p_gap, 0.0);

        // all 16 decision vectors: this is the best parity rule
        let mut best = (f64::NEG_INFINITY, 0u32);
        for mask in 0u32..16 {
            let d: Vec<bool> = (0..4).map(|i| mask >> i & 1 == 1).collect();
            let qa = (d[0] as u8 + d[1] as u8) as f64 / 2.0;
            let qb = (d[2] as u8 + d[3] as u8) as f64 / 2.0;
            if qb < qa {
                continue;
            }
            let u: f64 = d.iter().zip(p.as_slice()).filter(|(x, _)| **x).map(|(_, p)| p - 0.5).sum();
            if u > best.0 {
                best = (u, mask);
            }
        }
        assert_eq!(best.1, 0b0101);

        let t = thresholds_from_flips(&p, &g, &log).unwrap();
        assert!(t.t_a > 0.55 && t.t_a < 0.9, "{t:?}");
        assert!(t.t_b > 0.1 && t.t_b < 0.45, "{t:?}");
        assert_eq!(apply_thresholds(&p, &g, &t).unwrap(), d);
    }

    #[test]
    fn greedy_noop_when_target_already_holds() {
        let p = probs(&[0.9, 0.2, 0.8, 0.3]);
        let g = grp("aabb");
        let (d, log) = greedy_flip(&p, &g, &ParityConstraint::exact_parity()).unwrap();
        assert!(log.is_empty());
        assert_eq!(d, Decisions::from_threshold(&p, 0.5));
        assert_eq!(thresholds_from_flips(&p, &g, &log).unwrap(), GroupThresholds::uniform(0.5).unwrap());
    }

    #[test]
    fn greedy_ledger_is_monotone() {
        let p = probs(&[0.95, 0.9, 0.8, 0.7, 0.6, 0.52, 0.49, 0.4, 0.3, 0.2, 0.1, 0.05]);
        let g = grp("aaaaaabbbbbb");
        let (_, log) = greedy_flip(&p, &g, &ParityConstraint::p_percent(100.0).unwrap()).unwrap();
        assert!(log.len() >= 2);
        for w in log.entries.windows(2) {
            assert!(w[1].score <= w[0].score);
            assert!(w[1].p_gap < w[0].p_gap);
            assert!(w[1].cv_gap < w[0].cv_gap);
        }
    }

    #[test]
    fn free_flips_come_first() {
        let p = probs(&[0.9, 0.6, 0.5, 0.2]);
        let g = grp("aabb");
        let (_, log) = greedy_flip(&p, &g, &ParityConstraint::exact_parity()).unwrap();
        assert_eq!(log.entries[0].index, 2);
        assert!(log.entries[0].score.is_infinite());
    }

    #[test]
    fn do_no_harm_only_flips_group_b() {
        let p = probs(&[0.9, 0.8, 0.7, 0.6, 0.1]);
        let g = grp("aaabb");
        let target = ParityConstraint::exact_parity().with_do_no_harm(true);
        let (d, _) = greedy_flip(&p, &g, &target).unwrap();
        assert!(d.as_slice()[3]);
        let p = probs(&[0.9, 0.8, 0.6, 0.7]);
        let g = grp("aaab");
        let target = ParityConstraint::cv_gap(0.0).unwrap().with_do_no_harm(true);
        // b is already saturated at q_b = 1 = q_a, so nothing to do
        assert!(greedy_flip(&p, &g, &target).unwrap().1.is_empty());
        let p = probs(&[0.9, 0.8, 0.2]);
        let g = grp("abb");
        let target = ParityConstraint::p_percent(100.0).unwrap().with_do_no_harm(true);
        let (_, log) = greedy_flip(&p, &g, &target).unwrap();
        assert!(log.entries.iter().all(|r| r.group == Group::B));
    }

    #[test]
    fn unreachable_error_when_no_candidates_remain() {
        // with p above 100 and group a frozen, q_b = 1 still leaves a gap
        let p = probs(&[0.9, 0.3]);
        let g = grp("ab");
        let target = ParityConstraint::p_percent(150.0).unwrap().with_do_no_harm(true);
        match greedy_flip(&p, &g, &target) {
            Err(Error::Unreachable { best_gap }) => assert!((best_gap - 0.5).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn greedy_rejects_unsupported_targets() {
        let (p, g) = four_point();
        assert!(greedy_flip(&p, &g, &ParityConstraint::equal_fpr()).is_err());
        let capped = ParityConstraint::exact_parity().with_resource_cap(Some(0.5)).unwrap();
        assert!(greedy_flip(&p, &g, &capped).is_err());
        assert!(matches!(
            greedy_flip(&p, &grp("aaaa"), &ParityConstraint::exact_parity()),
            Err(Error::EmptyGroup(Group::B))
        ));
    }

    #[test]
    fn duplicate_straddle_is_reported() {
        let p = probs(&[0.9, 0.7, 0.7, 0.2]);
        let g = grp("aaab");
        let log = FlipLog {
            p: 100.0,
            entries: vec![FlipRecord {
                index: 1,
                group: Group::A,
                direction: FlipDirection::Down,
                score: 1.0,
                p_gap: 0.0,
                cv_gap: 0.0,
            }],
        };
        assert!(matches!(
            thresholds_from_flips(&p, &g, &log),
            Err(Error::DuplicateStraddle { group: Group::A, .. })
        ));
    }

    #[test]
    fn optimal_five_point_exact_parity() {
        let p = probs(&[0.9, 0.8, 0.6, 0.7, 0.4]);
        let g = grp("aaabb");
        let sol = optimal_thresholds(&p, &g, &ParityConstraint::exact_parity()).unwrap();
        assert_eq!(sol.decisions.count_positive(), 5);
        assert!((sol.utility - 0.9 / 5.0).abs() < 1e-12);
        assert_eq!(apply_thresholds(&p, &g, &sol.thresholds).unwrap(), sol.decisions);
    }

    #[test]
    fn vacuous_target_keeps_half_thresholds() {
        let p = probs(&[0.9, 0.8, 0.6, 0.7, 0.4, 0.2]);
        let g = grp("aaabbb");
        let sol = optimal_thresholds(&p, &g, &ParityConstraint::cv_gap(1.0).unwrap()).unwrap();
        assert_eq!(sol.thresholds, GroupThresholds::uniform(0.5).unwrap());
        assert_eq!(sol.decisions, Decisions::from_threshold(&p, 0.5));
    }

    #[test]
    fn optimal_respects_cap_and_do_no_harm() {
        let p = probs(&[0.9, 0.8, 0.7, 0.65, 0.6, 0.3, 0.2]);
        let g = grp("aaabbbb");
        let capped = ParityConstraint::cv_gap(1.0).unwrap().with_resource_cap(Some(3.0 / 7.0)).unwrap();
        let sol = optimal_thresholds(&p, &g, &capped).unwrap();
        assert_eq!(sol.decisions.count_positive(), 3);
        let dnh = ParityConstraint::exact_parity().with_do_no_harm(true);
        let sol = optimal_thresholds(&p, &g, &dnh).unwrap();
        for i in [3, 4] {
            assert!(sol.decisions.as_slice()[i]);
        }
        assert!(respects_rational_ordering(&p, &g, &sol.decisions));
    }

    #[test]
    fn equal_fpr_symmetric_groups_share_threshold() {
        let p = probs(&[0.9, 0.6, 0.3, 0.9, 0.6, 0.3]);
        let y = [true, false, false, true, false, false];
        let g = grp("aaabbb");
        let sol = equal_fpr_thresholds(&p, &g, &y).unwrap();
        assert_eq!(sol.thresholds.t_a, sol.thresholds.t_b);
    }

    #[test]
    fn equal_fpr_with_all_negative_labels_equalises_rates() {
        let p = probs(&[0.9, 0.8, 0.7, 0.6, 0.55, 0.2, 0.1, 0.05]);
        let g = grp("aaaabbbb");
        let y = [false; 8];
        let sol = equal_fpr_thresholds(&p, &g, &y).unwrap();
        // FPR equals the positive rate when every label is negative
        assert!((sol.k_a as f64 / 4.0 - sol.k_b as f64 / 4.0).abs() <= 0.25 + 1e-12);
        // sweep oracle over all cut pairs
        let mut best = f64::NEG_INFINITY;
        let a = [0.9, 0.8, 0.7, 0.6];
        let b = [0.55, 0.2, 0.1, 0.05];
        for ka in 0..=4 {
            for kb in 0..=4usize {
                if (ka as f64 / 4.0 - kb as f64 / 4.0).abs() > 0.25 + 1e-12 {
                    continue;
                }
                let u: f64 = a[..ka].iter().chain(&b[..kb]).map(|p| p - 0.5).sum();
                best = best.max(u / 8.0);
            }
        }
        assert!((sol.utility - best).abs() < 1e-12);
    }

    #[test]
    fn equal_fpr_requires_negatives() {
        let p = probs(&[0.9, 0.2]);
        assert!(equal_fpr_thresholds(&p, &grp("ab"), &[true, false]).is_err());
    }

    #[test]
    fn tradeoff_path_tracks_realised_accuracy() {
        let p = probs(&[0.9, 0.8, 0.7, 0.6, 0.45, 0.3, 0.2]);
        let g = grp("aaaabbb");
        let y = [true, true, false, true, true, false, false];
        let (log, path) = greedy_tradeoff(&p, &g, &y, &ParityConstraint::p_percent(100.0).unwrap()).unwrap();
        assert_eq!(path.len(), log.len() + 1);
        for pt in &path {
            let d = log.decisions_after(&p, pt.flips);
            let acc = crate::metrics::accuracy(&d, &y).unwrap();
            assert_eq!(acc, pt.accuracy);
        }
        let best = best_parity_at_accuracy(&path, path[0].accuracy, 0.2).unwrap();
        assert!(best.p_percent >= path[0].p_percent);
        assert!(best_parity_at_accuracy(&path, 2.0, 0.01).is_none());
    }
}
