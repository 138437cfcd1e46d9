//! One pass/fail line per acceptance criterion. Exits nonzero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use impact_parity::ingest::{self, read_dataset_file, DatasetSchema};
use impact_parity::model::TrainConfig;
use impact_parity::records::{read_fliplog, read_predictions, Predictions};
use impact_parity::synth::HAIR_FEATURE;
use impact_parity::threshold::respects_rational_ordering;
use impact_parity::{FairnessReport, FlipDirection, Group};
use impact_parity_cli::checks;
use impact_parity_cli::experiment::compare;
use impact_parity_cli::manifest::RunManifest;

const SEED: u64 = 0;

type Outcome = Result<String, String>;

struct Ctx {
    root: PathBuf,
    runs: Vec<PathBuf>,
}

impl Ctx {
    fn dir(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn cli(&mut self, args: &[&str], out: Option<&Path>) -> Result<i32, String> {
        let status = Command::new(env!("CARGO_BIN_EXE_impact-parity"))
            .args(args)
            .output()
            .map_err(|e| format!("spawn: {e}"))?;
        if let Some(o) = out {
            self.runs.push(o.to_path_buf());
        }
        Ok(status.status.code().unwrap_or(-1))
    }

    fn cli_ok(&mut self, args: &[&str], out: &Path) -> Result<(), String> {
        match self.cli(args, Some(out))? {
            0 => Ok(()),
            code => Err(format!("`{}` exited {code}", args.join(" "))),
        }
    }
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn report(dir: &Path) -> Result<FairnessReport, String> {
    let text = fs::read_to_string(dir.join("report.json")).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn predictions(dir: &Path) -> Result<Predictions, String> {
    let f = fs::File::open(dir.join("predictions.csv")).map_err(|e| e.to_string())?;
    read_predictions(f).map_err(|e| e.to_string())
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let took = start.elapsed();
    if took <= limit {
        Ok(took)
    } else {
        Err(format!("took {took:.1?}, limit {limit:?}"))
    }
}

fn check_failures(results: &[&checks::CheckResult]) -> Result<String, String> {
    let summary: Vec<String> = results
        .iter()
        .map(|c| format!("{} {}/{} failed", c.name, c.failures, c.cases))
        .collect();
    if results.iter().all(|c| c.passed()) {
        Ok(summary.join(", "))
    } else {
        let first = results.iter().flat_map(|c| c.examples.first()).next().cloned().unwrap_or_default();
        Err(format!("{}; first failure: {first}", summary.join(", ")))
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let r = checks::accuracy_identity(SEED, 1000).map_err(|e| e.to_string())?;
    let took = within(Duration::from_secs(1), start)?;
    check_failures(&[&r]).map(|m| format!("{m} in {took:.2?}"))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let r = checks::risk_identity(SEED, 1000).map_err(|e| e.to_string())?;
    let took = within(Duration::from_secs(1), start)?;
    check_failures(&[&r]).map(|m| format!("{m} in {took:.2?}"))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let (greedy, sweep) = checks::brute_force_comparison(SEED, 200).map_err(|e| e.to_string())?;
    let took = within(Duration::from_secs(120), start)?;
    check_failures(&[&greedy, &sweep]).map(|m| format!("{m} in {took:.1?}"))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let [random, strict, equal] = checks::world_checks(SEED, 100).map_err(|e| e.to_string())?;
    let took = within(Duration::from_secs(120), start)?;
    check_failures(&[&random, &strict, &equal]).map(|m| format!("{m} in {took:.1?}"))
}

/// Random instances through both threshold methods, plus every threshold
/// run directory written by this suite.
fn criterion_5(ctx: &Ctx) -> Outcome {
    let (ordering, harm) = checks::ordering_and_harm(SEED, 200).map_err(|e| e.to_string())?;
    let mut violations = Vec::new();
    let mut runs = 0;
    for dir in &ctx.runs {
        let Ok(m) = RunManifest::read(dir) else { continue };
        if m.subcommand != "threshold" {
            continue;
        }
        runs += 1;
        let preds = predictions(dir)?;
        if !respects_rational_ordering(&preds.probs, &preds.groups, &preds.decisions) {
            violations.push(format!("{}: ordering", dir.display()));
        }
        if m.argv.iter().any(|a| a == "--do-no-harm") {
            let harmed = (0..preds.len()).any(|i| {
                preds.groups[i] == Group::B && preds.probs.as_slice()[i] > 0.5 && !preds.decisions.as_slice()[i]
            });
            if harmed {
                violations.push(format!("{}: do-no-harm", dir.display()));
            }
        }
    }
    let m = check_failures(&[&ordering, &harm])?;
    if violations.is_empty() {
        Ok(format!("{m}; {runs} threshold runs clean"))
    } else {
        Err(format!("{m}; run violations: {}", violations.join(", ")))
    }
}

fn criterion_6(ctx: &mut Ctx) -> Outcome {
    let start = Instant::now();
    let (syn, naive, dlp) = (ctx.dir("synth"), ctx.dir("naive"), ctx.dir("dlp"));
    let (train, test) = (syn.join("train.csv"), syn.join("test.csv"));
    ctx.cli_ok(&["synth", "--seed", "0", "--out", s(&syn)], &syn)?;
    ctx.cli_ok(&["train", "--train", s(&train), "--test", s(&test), "--out", s(&naive)], &naive)?;
    ctx.cli_ok(
        &["dlp", "--bound", "0", "--train", s(&train), "--test", s(&test), "--baseline", s(&naive), "--out", s(&dlp)],
        &dlp,
    )?;
    let exact = ctx.dir("exact");
    ctx.cli_ok(&["threshold", "--predictions", s(&naive), "--target", "exact", "--method", "optimal", "--out", s(&exact)], &exact)?;
    let took = within(Duration::from_secs(30), start)?;

    let (n, d, e) = (report(&naive)?, report(&dlp)?, report(&exact)?);
    let mut failed = Vec::new();
    let gap = n.q_a - n.q_b;
    if gap < 0.30 {
        failed.push(format!("(a) naive hire-rate gap {gap:.3} < 0.30"));
    }
    if !(85.0..=115.0).contains(&d.p_percent) {
        failed.push(format!("(b) DLP p-% {:.1} outside [85, 115]", d.p_percent));
    }
    let data = read_dataset_file(&test).map_err(|e| e.to_string())?;
    let j = data.feature_index(HAIR_FEATURE).ok_or("no hair column")?;
    let hair: Vec<f64> = data.features().column(j).to_vec();
    let mut sorted = hair.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let log = read_fliplog(fs::File::open(dlp.join("fliplog.csv")).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let short_woman_down = log
        .iter()
        .filter(|r| r.group == Group::B && r.direction == FlipDirection::Down && hair[r.index] < median)
        .count();
    let long_man_up = log
        .iter()
        .filter(|r| r.group == Group::A && r.direction == FlipDirection::Up && hair[r.index] > median)
        .count();
    if short_woman_down == 0 || long_man_up == 0 {
        failed.push(format!("(c) short-haired women rejected {short_woman_down}, long-haired men accepted {long_man_up}"));
    }
    if e.accuracy < d.accuracy {
        failed.push(format!("(d) exact-parity thresholds accuracy {:.4} < DLP {:.4}", e.accuracy, d.accuracy));
    }
    let detail = format!(
        "naive rates {:.3}/{:.3}; DLP acc {:.3} p-% {:.1}; {} flips ({short_woman_down} short-haired women down, {long_man_up} long-haired men up); exact thresholds acc {:.3}; {took:.1?}",
        n.q_a, n.q_b, d.accuracy, d.p_percent, log.len(), e.accuracy
    );

    // Extra threshold runs feed criterion 5.
    for (target, dnh, method, name) in [
        ("p-percent:80", true, "greedy", "t_p80_dnh_greedy"),
        ("p-percent:80", true, "optimal", "t_p80_dnh_optimal"),
        ("cv:0.1", false, "greedy", "t_cv_greedy"),
        ("equal-fpr", false, "greedy", "t_fpr"),
    ] {
        let out = ctx.dir(name);
        let mut args = vec!["threshold", "--predictions", s(&naive), "--target", target, "--method", method, "--out", s(&out)];
        if dnh {
            args.push("--do-no-harm");
        }
        ctx.cli_ok(&args, &out)?;
    }
    if failed.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{}; {detail}", failed.join("; ")))
    }
}

fn criterion_7() -> Outcome {
    let schema_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas/income.json");
    let schema = DatasetSchema::from_file(&schema_path).map_err(|e| e.to_string())?;
    if !schema.data_path().is_file() {
        return Err(format!("income data not found at {}", schema.data_path().display()));
    }
    let start = Instant::now();
    let data = ingest::load_csv(&schema).map_err(|e| e.to_string())?;
    let (train, test) = ingest::split(&data, 0.5, SEED).map_err(|e| e.to_string())?;
    let c = compare(&train, &test, 0.0, 0.005, &TrainConfig::default()).map_err(|e| e.to_string())?;
    let took = within(Duration::from_secs(300), start)?;
    let mut failed = Vec::new();
    if !(0.83..=0.87).contains(&c.naive.accuracy) {
        failed.push(format!("naive accuracy {:.4} outside [0.83, 0.87]", c.naive.accuracy));
    }
    if !(23.0..=39.0).contains(&c.naive.p_percent) {
        failed.push(format!("naive p-% {:.1} outside [23, 39]", c.naive.p_percent));
    }
    let matched = match c.thresholds_matched {
        Some(m) if m.p_percent > c.dlp.p_percent => format!("acc {:.4} p-% {:.1}", m.accuracy, m.p_percent),
        Some(m) => {
            failed.push(format!("matched thresholds p-% {:.1} <= DLP {:.1}", m.p_percent, c.dlp.p_percent));
            String::new()
        }
        None => {
            failed.push("no threshold point within tolerance of the DLP accuracy".into());
            String::new()
        }
    };
    let fin = c.thresholds_final;
    if fin.p_percent < 99.0 {
        failed.push(format!("thresholds end at p-% {:.1} < 99", fin.p_percent));
    }
    let detail = format!(
        "naive acc {:.4} p-% {:.1}; DLP acc {:.4} p-% {:.1}; thresholds at matched accuracy {matched}; p-% {:.1} at acc {:.4} (cost {:.4}); {took:.1?}",
        c.naive.accuracy,
        c.naive.p_percent,
        c.dlp.accuracy,
        c.dlp.p_percent,
        fin.p_percent,
        fin.accuracy,
        c.naive.accuracy - fin.accuracy
    );
    if failed.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{}; {detail}", failed.join("; ")))
    }
}

fn snapshot(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let entry = entry.map_err(|e| e.to_string())?;
        if entry.path().is_file() {
            let bytes = fs::read(entry.path()).map_err(|e| e.to_string())?;
            out.insert(entry.file_name().to_string_lossy().into_owned(), bytes);
        }
    }
    Ok(out)
}

/// Runs the remaining subcommands once, then replays every recorded
/// manifest and compares the directory byte for byte.
fn criterion_8(ctx: &mut Ctx) -> Outcome {
    let (naive, dlp) = (ctx.dir("naive"), ctx.dir("dlp"));
    let audit = ctx.dir("audit");
    ctx.cli_ok(&["audit", "--predictions", s(&naive), "--out", s(&audit)], &audit)?;
    let verify = ctx.dir("verify");
    let code = ctx.cli(&["verify", "--instances", "20", "--worlds", "10", "--pairs", "100", "--out", s(&verify)], Some(&verify))?;
    if code != 0 && code != 1 {
        return Err(format!("verify exited {code}"));
    }
    let figure = ctx.dir("figure");
    ctx.cli_ok(&["figure", "--run", s(&dlp), "--out", s(&figure)], &figure)?;
    let repro = ctx.dir("reproduce");
    ctx.cli_ok(&["reproduce", "--hiring", "--out", s(&repro)], &repro)?;

    let mut seen = BTreeMap::new();
    let mut differing = Vec::new();
    for dir in ctx.runs.clone() {
        let before = snapshot(&dir)?;
        let manifest = RunManifest::read(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
        ctx.cli(&manifest.argv.iter().map(String::as_str).collect::<Vec<_>>(), None)?;
        let after = snapshot(&dir)?;
        if before != after {
            let files: Vec<&String> = before.keys().filter(|k| before.get(*k) != after.get(*k)).collect();
            differing.push(format!("{} {files:?}", manifest.subcommand));
        }
        *seen.entry(manifest.subcommand).or_insert(0usize) += 1;
    }
    let missing: Vec<&str> = ["synth", "train", "dlp", "threshold", "audit", "verify", "figure", "reproduce"]
        .into_iter()
        .filter(|c| !seen.contains_key(*c))
        .collect();
    let detail = format!("{} runs replayed: {seen:?}", ctx.runs.len());
    if differing.is_empty() && missing.is_empty() {
        Ok(detail)
    } else {
        Err(format!("differing {differing:?}, subcommands not covered {missing:?}; {detail}"))
    }
}

fn main() {
    let tmp = tempfile::TempDir::new().expect("temp dir");
    let mut ctx = Ctx {
        root: tmp.path().to_path_buf(),
        runs: Vec::new(),
    };
    let mut results: Vec<(u8, &str, Outcome)> = vec![
        (1, "accuracy equals 2u(d,0.5) - ybar + 1", criterion_1()),
        (2, "utility plus cost-sensitive risk equals pi(1-c)", criterion_2()),
        (3, "greedy and sweep match the brute-force optimum", criterion_3()),
        (4, "group-blind rules never beat group-aware rules", criterion_4()),
    ];
    // Criterion 6 writes the run directories that 5 and 8 inspect.
    let six = criterion_6(&mut ctx);
    results.push((5, "rational ordering and do-no-harm", criterion_5(&ctx)));
    results.push((6, "synthetic hiring reproduction", six));
    results.push((7, "income: thresholds dominate the DLP", criterion_7()));
    results.push((8, "reruns from manifests are byte-identical", criterion_8(&mut ctx)));

    let mut failed = 0;
    for (n, title, outcome) in &results {
        match outcome {
            Ok(detail) => println!("criterion {n} PASS {title}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} FAIL {title}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
