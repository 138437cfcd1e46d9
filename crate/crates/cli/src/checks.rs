//! Randomised checks of the metric identities and of the threshold search
//! against exhaustive oracles.

use impact_parity::metrics::{accuracy, cost_sensitive_risk, immediate_utility};
use impact_parity::oracle::{brute_force_constrained, brute_force_xonly, FiniteWorld, WorldCell};
use impact_parity::threshold::{greedy_flip, optimal_thresholds, respects_rational_ordering};
use impact_parity::{Decisions, Group, ParityConstraint, ProbEstimates, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const IDENTITY_TOL: f64 = 1e-12;
const UTILITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    /// Up to five failing cases, described.
    pub examples: Vec<String>,
}

impl CheckResult {
    fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            cases: 0,
            failures: 0,
            examples: Vec::new(),
        }
    }

    fn record(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.examples.len() < 5 {
                self.examples.push(describe());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySummary {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerifySummary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const ACCURACY_IDENTITY: &str = "accuracy_utility_identity";
pub const RISK_IDENTITY: &str = "utility_risk_identity";
pub const GREEDY_VS_BRUTE: &str = "greedy_matches_brute_force";
pub const SWEEP_VS_BRUTE: &str = "sweep_matches_brute_force";
pub const ORDERING: &str = "rational_ordering";
pub const DO_NO_HARM: &str = "do_no_harm";
pub const WORLDS: &str = "group_blind_never_better";
pub const STRICT_WORLD: &str = "strict_gap_world";
pub const EQUAL_WORLD: &str = "redundant_group_world";

#[derive(Debug, Clone, Copy)]
pub struct VerifyCounts {
    pub pairs: usize,
    pub instances: usize,
    pub worlds: usize,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<bool> {
    (0..n).map(|_| rng.random_bool(0.5)).collect()
}

fn as_probs(labels: &[bool]) -> ProbEstimates {
    ProbEstimates::new(labels.iter().map(|&y| f64::from(u8::from(y))).collect()).expect("0/1 values")
}

fn mean(labels: &[bool]) -> f64 {
    labels.iter().filter(|&&y| y).count() as f64 / labels.len() as f64
}

pub fn accuracy_identity(seed: u64, pairs: usize) -> Result<CheckResult> {
    let mut out = CheckResult::new(ACCURACY_IDENTITY);
    let mut rng = rng_for(seed, 1);
    for case in 0..pairs {
        let n = rng.random_range(1..=500);
        let d = Decisions::new(bits(&mut rng, n));
        let y = bits(&mut rng, n);
        let u = immediate_utility(&d, &as_probs(&y), 0.5)?;
        let acc = accuracy(&d, &y)?;
        let rhs = 2.0 * u - mean(&y) + 1.0;
        out.record((acc - rhs).abs() <= IDENTITY_TOL, || {
            format!("case {case}: n={n} accuracy={acc} 2u-ybar+1={rhs}")
        });
    }
    Ok(out)
}

pub fn risk_identity(seed: u64, pairs: usize) -> Result<CheckResult> {
    let mut out = CheckResult::new(RISK_IDENTITY);
    let mut rng = rng_for(seed, 2);
    for case in 0..pairs {
        let n = rng.random_range(2..=500);
        let d = Decisions::new(bits(&mut rng, n));
        let mut y = bits(&mut rng, n);
        // Both classes are needed for the error rates.
        y[0] = true;
        y[1] = false;
        let c = f64::from(rng.random_range(1..=9u8)) / 10.0;
        let u = immediate_utility(&d, &as_probs(&y), c)?;
        let cs = cost_sensitive_risk(&d, &y, c)?;
        let rhs = mean(&y) * (1.0 - c);
        out.record((u + cs - rhs).abs() <= IDENTITY_TOL, || {
            format!("case {case}: n={n} c={c} u+cs={} pi(1-c)={rhs}", u + cs)
        });
    }
    Ok(out)
}

/// Probabilities on a 1e-6 grid, pairwise distinct and never 0.5, with both
/// groups present.
pub fn distinct_instance(rng: &mut ChaCha8Rng, n: usize) -> (ProbEstimates, Vec<Group>) {
    let mut p: Vec<f64> = Vec::with_capacity(n);
    while p.len() < n {
        let v = (rng.random::<f64>() * 1e6).round() / 1e6;
        if v != 0.5 && !p.contains(&v) {
            p.push(v);
        }
    }
    let mut g: Vec<Group> = (0..n)
        .map(|_| if rng.random_bool(0.5) { Group::A } else { Group::B })
        .collect();
    let a = rng.random_range(0..n);
    let b = (a + rng.random_range(1..n)) % n;
    g[a] = Group::A;
    g[b] = Group::B;
    (ProbEstimates::new(p).expect("grid values in [0, 1]"), g)
}

pub fn oracle_targets() -> Vec<ParityConstraint> {
    vec![
        ParityConstraint::cv_gap(0.0).expect("valid"),
        ParityConstraint::cv_gap(0.1).expect("valid"),
        ParityConstraint::cv_gap(0.3).expect("valid"),
        ParityConstraint::p_percent(80.0).expect("valid"),
        ParityConstraint::p_percent(100.0).expect("valid"),
    ]
}

fn describe(p: &ProbEstimates, g: &[Group]) -> String {
    let groups: String = g.iter().map(|g| g.as_str()).collect();
    format!("p={:?} groups={groups}", p.as_slice())
}

/// Greedy and sweep utilities against the exhaustive optimum.
pub fn brute_force_comparison(seed: u64, instances: usize) -> Result<(CheckResult, CheckResult)> {
    let mut greedy = CheckResult::new(GREEDY_VS_BRUTE);
    let mut sweep = CheckResult::new(SWEEP_VS_BRUTE);
    let mut rng = rng_for(seed, 3);
    for _ in 0..instances {
        let n = rng.random_range(2..=16);
        let (p, g) = distinct_instance(&mut rng, n);
        for target in oracle_targets() {
            let (_, best) = brute_force_constrained(&p, &g, &target)?;
            let got = match greedy_flip(&p, &g, &target) {
                Ok((d, _)) => Some(immediate_utility(&d, &p, 0.5)?),
                Err(_) => None,
            };
            greedy.record(got.is_some_and(|u| (u - best).abs() <= UTILITY_TOL), || {
                format!("{target}: greedy {got:?} brute {best} {}", describe(&p, &g))
            });
            let got = optimal_thresholds(&p, &g, &target).map(|s| s.utility).ok();
            sweep.record(got.is_some_and(|u| (u - best).abs() <= UTILITY_TOL), || {
                format!("{target}: sweep {got:?} brute {best} {}", describe(&p, &g))
            });
        }
    }
    Ok((greedy, sweep))
}

/// Within-group ordering of every threshold output, and preservation of
/// group-b positives under `do_no_harm`.
pub fn ordering_and_harm(seed: u64, instances: usize) -> Result<(CheckResult, CheckResult)> {
    let mut ordering = CheckResult::new(ORDERING);
    let mut harm = CheckResult::new(DO_NO_HARM);
    let mut rng = rng_for(seed, 4);
    for _ in 0..instances {
        let n = rng.random_range(2..=40);
        let (p, g) = distinct_instance(&mut rng, n);
        for base in oracle_targets() {
            for dnh in [false, true] {
                let target = base.with_do_no_harm(dnh);
                let mut outputs = Vec::new();
                if let Ok((d, _)) = greedy_flip(&p, &g, &target) {
                    outputs.push(("greedy", d));
                }
                if let Ok(s) = optimal_thresholds(&p, &g, &target) {
                    outputs.push(("sweep", s.decisions));
                }
                for (method, d) in outputs {
                    ordering.record(respects_rational_ordering(&p, &g, &d), || {
                        format!("{method} {target}: {}", describe(&p, &g))
                    });
                    if dnh {
                        let kept = p
                            .as_slice()
                            .iter()
                            .zip(&g)
                            .zip(d.as_slice())
                            .all(|((&pi, &gi), &di)| gi == Group::A || pi <= 0.5 || di);
                        harm.record(kept, || format!("{method} {target}: {}", describe(&p, &g)));
                    }
                }
            }
        }
    }
    Ok((ordering, harm))
}

fn cell(x: usize, group: Group, weight: u64, p: f64) -> WorldCell {
    WorldCell { x, group, weight, p }
}

/// Group independent of `x`: rules that see the group do strictly better.
pub fn strict_gap_world() -> FiniteWorld {
    FiniteWorld::new(vec![
        cell(0, Group::A, 1, 0.9),
        cell(1, Group::A, 1, 0.6),
        cell(0, Group::B, 1, 0.3),
        cell(1, Group::B, 1, 0.45),
    ])
    .expect("valid world")
}

/// Group determined by `x`: both rule classes coincide.
pub fn redundant_group_world() -> FiniteWorld {
    FiniteWorld::new(vec![
        cell(0, Group::A, 3, 0.9),
        cell(1, Group::A, 2, 0.55),
        cell(2, Group::B, 2, 0.4),
        cell(3, Group::B, 3, 0.2),
    ])
    .expect("valid world")
}

pub fn random_world(rng: &mut ChaCha8Rng) -> FiniteWorld {
    let k = rng.random_range(1..=10usize);
    let mut cells = Vec::new();
    for x in 0..k {
        for g in [Group::A, Group::B] {
            // Cells may be absent; both groups keep at least one.
            if x == 0 || rng.random_bool(0.8) {
                cells.push(cell(x, g, rng.random_range(1..=6), rng.random::<f64>()));
            }
        }
    }
    FiniteWorld::new(cells).expect("valid world")
}

pub fn world_checks(seed: u64, worlds: usize) -> Result<[CheckResult; 3]> {
    let target = ParityConstraint::exact_parity();
    let mut random = CheckResult::new(WORLDS);
    let mut rng = rng_for(seed, 5);
    for case in 0..worlds {
        let world = random_world(&mut rng);
        let best = brute_force_xonly(&world, &target)?;
        random.record(best.x_only <= best.group_aware + UTILITY_TOL, || {
            format!("world {case}: {best:?}")
        });
    }
    let mut strict = CheckResult::new(STRICT_WORLD);
    let best = brute_force_xonly(&strict_gap_world(), &target)?;
    strict.record(best.x_only < best.group_aware - UTILITY_TOL, || format!("{best:?}"));
    let mut equal = CheckResult::new(EQUAL_WORLD);
    let best = brute_force_xonly(&redundant_group_world(), &target)?;
    equal.record((best.x_only - best.group_aware).abs() <= UTILITY_TOL, || format!("{best:?}"));
    Ok([random, strict, equal])
}

pub fn run_all(seed: u64, counts: VerifyCounts) -> Result<VerifySummary> {
    let mut checks = vec![accuracy_identity(seed, counts.pairs)?, risk_identity(seed, counts.pairs)?];
    let (greedy, sweep) = brute_force_comparison(seed, counts.instances)?;
    checks.extend([greedy, sweep]);
    let (ordering, harm) = ordering_and_harm(seed, counts.instances)?;
    checks.extend([ordering, harm]);
    checks.extend(world_checks(seed, counts.worlds)?);
    Ok(VerifySummary { seed, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_have_both_groups_and_distinct_values() {
        let mut rng = rng_for(9, 0);
        for n in 2..=16 {
            let (p, g) = distinct_instance(&mut rng, n);
            assert!(g.contains(&Group::A) && g.contains(&Group::B));
            let mut v = p.as_slice().to_vec();
            v.sort_by(f64::total_cmp);
            v.dedup();
            assert_eq!(v.len(), n);
        }
    }

    #[test]
    fn identities_hold() {
        assert!(accuracy_identity(1, 200).unwrap().passed());
        assert!(risk_identity(1, 200).unwrap().passed());
    }

    #[test]
    fn constructed_worlds() {
        let [random, strict, equal] = world_checks(3, 20).unwrap();
        assert!(random.passed() && strict.passed() && equal.passed());
    }

    #[test]
    fn failures_are_counted_and_capped() {
        let mut c = CheckResult::new("x");
        for i in 0..8 {
            c.record(i % 2 == 0, || format!("{i}"));
        }
        assert_eq!((c.cases, c.failures, c.examples.len()), (8, 4, 4));
        assert!(!c.passed());
    }
}
