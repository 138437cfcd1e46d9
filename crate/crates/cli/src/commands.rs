use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use impact_parity::dlp::{train_dlp, DlpConfig};
use impact_parity::ingest::{self, DatasetSchema};
use impact_parity::model::{predict_dataset, train_logistic, LogisticModel, TrainConfig};
use impact_parity::records::{read_fliplog, read_predictions, write_fliplog, write_predictions, Predictions};
use impact_parity::synth::{generate_hiring, inject_discrimination, CorruptionConfig, HairBinding, HiringConfig};
use impact_parity::threshold::{
    apply_thresholds, equal_fpr_thresholds, greedy_flip, optimal_thresholds, thresholds_from_flips, FlipLog,
    FlipRecord, GroupThresholds,
};
use impact_parity::types::flips_between;
use impact_parity::{fairness_report, Dataset, Decisions, ParityConstraint, TargetKind};
use serde::Serialize;

use crate::args::{AuditArgs, DataArgs, DlpArgs, FigureArgs, FitArgs, Method, ReproduceArgs, SynthArgs, ThresholdArgs, TrainArgs, VerifyArgs};
use crate::checks::{run_all, VerifyCounts, VerifySummary};
use crate::error::{CliError, CliResult, EXIT_OK, EXIT_VERIFY_FAILED};
use crate::experiment::{compare, Comparison, LabelStats, Summary};
use crate::figure::render;
use crate::manifest::RunManifest;

pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const REPORT_FILE: &str = "report.json";
pub const FLIPLOG_FILE: &str = "fliplog.csv";
pub const MODEL_FILE: &str = "model.json";
pub const THRESHOLDS_FILE: &str = "thresholds.json";
pub const TRAIN_FILE: &str = "train.csv";
pub const TEST_FILE: &str = "test.csv";
pub const FIGURE_FILE: &str = "figure.svg";
pub const FLIP_POINTS_FILE: &str = "flips.csv";
pub const VERIFY_FILE: &str = "verify.json";
pub const TABLE_JSON: &str = "table.json";
pub const TABLE_CSV: &str = "table.csv";

/// Collects files written into one run directory, then writes the manifest.
struct RunDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl RunDir {
    fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.into());
        self.dir.join(name)
    }

    fn writer(&mut self, name: &str) -> CliResult<BufWriter<File>> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        Ok(BufWriter::new(file))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }

    fn text(&mut self, name: &str, text: &str) -> CliResult<()> {
        let path = self.path(name);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }

    fn dataset(&mut self, name: &str, data: &Dataset) -> CliResult<()> {
        Ok(ingest::write_dataset_file(data, self.path(name))?)
    }

    fn predictions(&mut self, preds: &Predictions) -> CliResult<()> {
        let mut w = self.writer(PREDICTIONS_FILE)?;
        write_predictions(preds, &mut w)?;
        w.flush().map_err(|e| CliError::io(&self.dir, e))
    }

    fn fliplog(&mut self, entries: &[FlipRecord]) -> CliResult<()> {
        let mut w = self.writer(FLIPLOG_FILE)?;
        write_fliplog(entries, &mut w)?;
        w.flush().map_err(|e| CliError::io(&self.dir, e))
    }

    fn finish(self, mut manifest: RunManifest) -> CliResult<()> {
        manifest.outputs = self.written;
        let path = self.dir.join(crate::manifest::MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }
}

/// Prints to stdout, ignoring a closed pipe.
fn say(line: std::fmt::Arguments<'_>) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn fit_config(fit: &FitArgs, seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: fit.learning_rate,
        max_iters: fit.max_iters,
        convergence_tol: fit.tol,
        l2_penalty: fit.l2,
        seed,
    }
}

pub fn parse_bound(s: &str) -> CliResult<f64> {
    match s.trim() {
        "inf" | "infinity" => Ok(f64::INFINITY),
        v => v
            .parse::<f64>()
            .ok()
            .filter(|b| *b >= 0.0)
            .ok_or_else(|| usage(format!("bound `{s}` is not a non-negative number or `inf`"))),
    }
}

pub fn parse_target(s: &str, do_no_harm: bool, cap: Option<f64>) -> CliResult<ParityConstraint> {
    let target: ParityConstraint = s.parse()?;
    let target = target.with_do_no_harm(target.do_no_harm || do_no_harm);
    Ok(match cap {
        Some(c) => target.with_resource_cap(Some(c))?,
        None => target,
    })
}

/// Train/test datasets and the manifest inputs that name them.
fn load_data(args: &DataArgs, manifest: RunManifest) -> CliResult<(Dataset, Dataset, RunManifest)> {
    match (&args.schema, &args.train, &args.test) {
        (Some(schema_path), _, _) => {
            let schema = DatasetSchema::from_file(schema_path)?;
            let data = ingest::load_csv(&schema)?;
            let (train, test) = ingest::split(&data, args.train_fraction, args.seed)?;
            let manifest = manifest
                .input("schema", schema_path)
                .input("data", &schema.data_path())
                .seed("split", args.seed);
            Ok((train, test, manifest))
        }
        (None, Some(train), Some(test)) => Ok((
            ingest::read_dataset_file(train)?,
            ingest::read_dataset_file(test)?,
            manifest.input("train", train).input("test", test),
        )),
        _ => Err(usage("pass --schema or both --train and --test")),
    }
}

fn scored(model: &LogisticModel, data: &Dataset) -> CliResult<Predictions> {
    let probs = predict_dataset(model, data)?;
    let decisions = Decisions::from_threshold(&probs, 0.5);
    Ok(Predictions::new(probs, data.groups().to_vec(), data.labels().to_vec(), decisions)?)
}

/// Shared tail of `train` and `dlp`: model, predictions and report of the
/// test split, plus the test split itself for `figure`.
fn write_fit_run(
    mut run: RunDir,
    manifest: RunManifest,
    model: &LogisticModel,
    test: &Dataset,
    log: &FlipLog,
) -> CliResult<()> {
    let preds = scored(model, test)?;
    run.text(MODEL_FILE, &(model.to_json()? + "\n"))?;
    run.dataset(TEST_FILE, test)?;
    run.predictions(&preds)?;
    let report = fairness_report(&preds.decisions, &preds.labels, &preds.groups, Some(&preds.probs))?
        .with_flips(log.flips());
    run.json(REPORT_FILE, &report)?;
    run.fliplog(&log.entries)?;
    run.finish(manifest)
}

pub fn synth(args: &SynthArgs, argv: &[String]) -> CliResult<u8> {
    let config = HiringConfig {
        n_total: args.n_total,
        train_fraction: args.train_fraction,
        seed: args.seed,
        hair_binding: if args.literal_hair {
            HairBinding::Literal
        } else {
            HairBinding::Narrative
        },
    };
    let (mut train, test) = generate_hiring(&config)?;
    let mut manifest = RunManifest::new("synth", argv, &args.out).seed("hiring", args.seed);
    if let Some(rate) = args.flip_rate {
        let corruption = CorruptionConfig {
            flip_rate: rate,
            seed: args.seed,
            ..CorruptionConfig::default()
        };
        train = inject_discrimination(&train, &corruption)?;
        manifest = manifest.seed("corruption", args.seed);
    }
    let mut run = RunDir::create(&args.out)?;
    run.dataset(TRAIN_FILE, &train)?;
    run.dataset(TEST_FILE, &test)?;
    run.finish(manifest)?;
    Ok(EXIT_OK)
}

pub fn train(args: &TrainArgs, argv: &[String]) -> CliResult<u8> {
    let manifest = RunManifest::new("train", argv, &args.out);
    let (train, test, manifest) = load_data(&args.data, manifest)?;
    let model = train_logistic(&train, args.include_group, &fit_config(&args.fit, args.data.seed))?;
    let run = RunDir::create(&args.out)?;
    write_fit_run(run, manifest, &model, &test, &FlipLog { p: 100.0, entries: Vec::new() })?;
    Ok(EXIT_OK)
}

pub fn dlp(args: &DlpArgs, argv: &[String]) -> CliResult<u8> {
    let bound = parse_bound(&args.bound)?;
    let mut manifest = RunManifest::new("dlp", argv, &args.out);
    manifest.target = Some(format!("covariance<={}", args.bound.trim()));
    let (train, test, manifest) = load_data(&args.data, manifest)?;
    let fit = fit_config(&args.fit, args.data.seed);
    let model = train_dlp(
        &train,
        &DlpConfig {
            covariance_bound: bound,
            train: fit.clone(),
            ..DlpConfig::default()
        },
    )?;
    // Flips are logged against an unconstrained fit of the same split.
    let (baseline, manifest) = match &args.baseline {
        Some(dir) => {
            let path = predictions_path(dir);
            (read_predictions_file(&path)?.decisions, manifest.input("baseline", &path))
        }
        None => {
            let naive = train_logistic(&train, false, &fit)?;
            (scored(&naive, &test)?.decisions, manifest)
        }
    };
    if baseline.len() != test.len() {
        return Err(usage(format!(
            "baseline has {} predictions, test split has {}",
            baseline.len(),
            test.len()
        )));
    }
    let treated = scored(&model, &test)?.decisions;
    let log = FlipLog::between(&baseline, &treated, test.groups(), 100.0)?;
    let run = RunDir::create(&args.out)?;
    write_fit_run(run, manifest, &model, &test, &log)?;
    Ok(EXIT_OK)
}

fn predictions_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(PREDICTIONS_FILE)
    } else {
        p.to_path_buf()
    }
}

fn read_predictions_file(path: &Path) -> CliResult<Predictions> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(read_predictions(BufReader::new(file))?)
}

#[derive(Debug, Serialize)]
struct ThresholdDocument {
    method: &'static str,
    target: String,
    #[serde(flatten)]
    thresholds: GroupThresholds,
}

pub fn threshold(args: &ThresholdArgs, argv: &[String]) -> CliResult<u8> {
    let target = parse_target(&args.target, args.do_no_harm, args.cap)?;
    let path = predictions_path(&args.predictions);
    let input = read_predictions_file(&path)?;
    let mut manifest = RunManifest::new("threshold", argv, &args.out).input("predictions", &path);
    manifest.target = Some(target.to_string());
    if let Some(test) = path.parent().map(|d| d.join(TEST_FILE)).filter(|p| p.is_file()) {
        manifest = manifest.input("data", &test);
    }
    let (probs, groups) = (&input.probs, &input.groups);
    let baseline = Decisions::from_threshold(probs, 0.5);

    let (method, decisions, thresholds, log) = if target.kind == TargetKind::EqualFpr {
        if target.do_no_harm || target.resource_cap.is_some() {
            return Err(usage("equal-fpr takes no side constraints"));
        }
        let sol = equal_fpr_thresholds(probs, groups, &input.labels)?;
        let log = FlipLog::between(&baseline, &sol.decisions, groups, 100.0)?;
        ("equal-fpr", sol.decisions, sol.thresholds, log)
    } else {
        match args.method {
            Method::Greedy => {
                let (decisions, log) = greedy_flip(probs, groups, &target)?;
                let thresholds = thresholds_from_flips(probs, groups, &log)?;
                ("greedy", decisions, thresholds, log)
            }
            Method::Optimal => {
                let sol = optimal_thresholds(probs, groups, &target)?;
                let log = FlipLog::between(&baseline, &sol.decisions, groups, 100.0 * target.a_weight())?;
                ("optimal", sol.decisions, sol.thresholds, log)
            }
        }
    };
    if apply_thresholds(probs, groups, &thresholds)? != decisions {
        return Err(usage("thresholds do not reproduce the selected decisions"));
    }

    let preds = Predictions::new(probs.clone(), groups.clone(), input.labels.clone(), decisions)?;
    let report = fairness_report(&preds.decisions, &preds.labels, groups, Some(probs))?
        .with_flips(flips_between(&baseline, &preds.decisions, groups)?);
    let mut run = RunDir::create(&args.out)?;
    run.predictions(&preds)?;
    run.json(REPORT_FILE, &report)?;
    run.fliplog(&log.entries)?;
    run.json(
        THRESHOLDS_FILE,
        &ThresholdDocument {
            method,
            target: target.to_string(),
            thresholds,
        },
    )?;
    run.finish(manifest)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct SchemaAudit {
    name: Option<String>,
    rows_read: usize,
    rows_dropped: usize,
    group_a: String,
    group_b: String,
    labels: LabelStats,
}

#[derive(Debug, Serialize)]
struct PredictionAudit {
    report: impact_parity::FairnessReport,
    /// p-% with the groups' roles exchanged.
    #[serde(with = "impact_parity::metrics::extended_float")]
    p_percent_reversed: f64,
    labels: LabelStats,
}

pub fn audit(args: &AuditArgs, argv: &[String]) -> CliResult<u8> {
    let mut manifest = RunManifest::new("audit", argv, args.out.as_deref().unwrap_or(Path::new("-")));
    let text = if let Some(p) = &args.source.predictions {
        let path = predictions_path(p);
        let preds = read_predictions_file(&path)?;
        manifest = manifest.input("predictions", &path);
        let report = fairness_report(&preds.decisions, &preds.labels, &preds.groups, Some(&preds.probs))?;
        let p_percent_reversed = impact_parity::metrics::p_percent_from_rates(report.q_b, report.q_a);
        serde_json::to_string_pretty(&PredictionAudit {
            report,
            p_percent_reversed,
            labels: LabelStats::from_parts(&preds.groups, &preds.labels),
        })?
    } else {
        let schema_path = args.source.schema.as_ref().ok_or_else(|| usage("pass --predictions or --schema"))?;
        let schema = DatasetSchema::from_file(schema_path)?;
        let loaded = ingest::load(&schema)?;
        manifest = manifest.input("schema", schema_path).input("data", &schema.data_path());
        let names = loaded.dataset.group_names();
        serde_json::to_string_pretty(&SchemaAudit {
            name: schema.name.clone(),
            rows_read: loaded.rows_read,
            rows_dropped: loaded.rows_dropped,
            group_a: names.a.clone(),
            group_b: names.b.clone(),
            labels: LabelStats::of(&loaded.dataset),
        })?
    };
    match &args.out {
        Some(dir) => {
            let mut run = RunDir::create(dir)?;
            run.text(REPORT_FILE, &(text + "\n"))?;
            run.finish(manifest)?;
        }
        None => say(format_args!("{text}")),
    }
    Ok(EXIT_OK)
}

pub fn verify(args: &VerifyArgs, argv: &[String]) -> CliResult<u8> {
    let summary: VerifySummary = run_all(
        args.seed,
        VerifyCounts {
            pairs: args.pairs,
            instances: args.instances,
            worlds: args.worlds,
        },
    )?;
    for c in &summary.checks {
        let status = if c.passed() { "pass" } else { "FAIL" };
        say(format_args!("{status} {} ({} cases, {} failures)", c.name, c.cases, c.failures));
        for e in &c.examples {
            say(format_args!("    {e}"));
        }
    }
    if let Some(dir) = &args.out {
        let mut run = RunDir::create(dir)?;
        run.json(VERIFY_FILE, &summary)?;
        run.finish(RunManifest::new("verify", argv, dir).seed("verify", args.seed))?;
    }
    Ok(if summary.passed() { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

pub fn figure(args: &FigureArgs, argv: &[String]) -> CliResult<u8> {
    let data_path = match &args.data {
        Some(p) => p.clone(),
        None => {
            let local = args.run.join(TEST_FILE);
            if local.is_file() {
                local
            } else {
                let recorded = RunManifest::read(&args.run)?;
                recorded
                    .inputs
                    .get("data")
                    .or_else(|| recorded.inputs.get("test"))
                    .map(PathBuf::from)
                    .filter(|p| p.extension().is_some_and(|e| e == "csv"))
                    .ok_or_else(|| usage("run has no recorded test data; pass --data"))?
            }
        }
    };
    let data = ingest::read_dataset_file(&data_path)?;
    let log_path = args.run.join(FLIPLOG_FILE);
    let file = File::open(&log_path).map_err(|e| CliError::io(&log_path, e))?;
    let flips = read_fliplog(BufReader::new(file))?;
    let preds = read_predictions_file(&args.run.join(PREDICTIONS_FILE))?;
    if preds.len() != data.len() {
        return Err(usage(format!("run has {} predictions, data has {} rows", preds.len(), data.len())));
    }
    let fig = render(&data, &args.x, &args.y, &flips)?;
    let out = args.out.clone().unwrap_or_else(|| args.run.clone());
    let mut run = RunDir::create(&out)?;
    run.text(FIGURE_FILE, &fig.svg)?;
    let mut w = csv::Writer::from_writer(run.writer(FLIP_POINTS_FILE)?);
    for p in &fig.points {
        w.serialize(p)?;
    }
    if fig.points.is_empty() {
        w.write_record(["index", "group", "direction", "x", "y"])?;
    }
    w.flush().map_err(|e| CliError::io(&out, e))?;
    if args.out.is_some() {
        let manifest = RunManifest::new("figure", argv, &out)
            .input("run", &args.run)
            .input("data", &data_path);
        run.finish(manifest)?;
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
pub struct TableRow {
    pub dataset: String,
    #[serde(flatten)]
    pub comparison: Comparison,
}

fn csv_row(r: &TableRow) -> Vec<String> {
    let c = &r.comparison;
    let f = |v: f64| format!("{v:.4}");
    let s = |s: &Summary| [f(s.accuracy), f(s.q_a), f(s.q_b), f(s.p_percent)];
    let mut row = vec![r.dataset.clone(), c.labels.n.to_string(), f(c.labels.share_b), f(c.labels.label_p_percent)];
    row.extend(s(&c.naive));
    row.extend(s(&c.dlp));
    match &c.thresholds_matched {
        Some(m) => row.extend([f(m.accuracy), f(m.p_percent)]),
        None => row.extend([String::new(), String::new()]),
    }
    row.extend([f(c.thresholds_final.accuracy), f(c.thresholds_final.p_percent)]);
    row
}

const TABLE_HEADER: [&str; 16] = [
    "dataset",
    "n_test",
    "share_b",
    "label_p_percent",
    "naive_accuracy",
    "naive_q_a",
    "naive_q_b",
    "naive_p_percent",
    "dlp_accuracy",
    "dlp_q_a",
    "dlp_q_b",
    "dlp_p_percent",
    "matched_accuracy",
    "matched_p_percent",
    "final_accuracy",
    "final_p_percent",
];

pub fn reproduce(args: &ReproduceArgs, argv: &[String]) -> CliResult<u8> {
    if args.schema.is_empty() && !args.hiring {
        return Err(usage("nothing to run: pass --schema and/or --hiring"));
    }
    let bound = parse_bound(&args.bound)?;
    let fit = TrainConfig {
        seed: args.seed,
        ..TrainConfig::default()
    };
    let mut manifest = RunManifest::new("reproduce", argv, &args.out).seed("split", args.seed);
    manifest.target = Some(format!("covariance<={}", args.bound.trim()));
    let mut rows = Vec::new();
    for path in &args.schema {
        let schema = DatasetSchema::from_file(path)?;
        let data_path = schema.data_path();
        let name = schema
            .name
            .clone()
            .unwrap_or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
        if !data_path.is_file() {
            eprintln!("skipping {name}: `{}` not found", data_path.display());
            continue;
        }
        manifest = manifest.input(&format!("schema:{name}"), path);
        let data = ingest::load_csv(&schema)?;
        let (train, test) = ingest::split(&data, 0.5, args.seed)?;
        rows.push(TableRow {
            dataset: name,
            comparison: compare(&train, &test, bound, args.tolerance, &fit)?,
        });
    }
    if args.hiring {
        let (train, test) = generate_hiring(&HiringConfig {
            seed: args.seed,
            ..HiringConfig::default()
        })?;
        manifest = manifest.seed("hiring", args.seed);
        rows.push(TableRow {
            dataset: "hiring".into(),
            comparison: compare(&train, &test, bound, args.tolerance, &fit)?,
        });
    }
    let mut run = RunDir::create(&args.out)?;
    run.json(TABLE_JSON, &rows)?;
    let mut w = csv::Writer::from_writer(run.writer(TABLE_CSV)?);
    w.write_record(TABLE_HEADER)?;
    for r in &rows {
        w.write_record(csv_row(r))?;
    }
    w.flush().map_err(|e| CliError::io(&args.out, e))?;
    drop(w);
    for r in &rows {
        let c = &r.comparison;
        say(format_args!(
            "{}: naive acc {:.3} p-% {:.1} | dlp acc {:.3} p-% {:.1} | thresholds at matched acc: {}",
            r.dataset,
            c.naive.accuracy,
            c.naive.p_percent,
            c.dlp.accuracy,
            c.dlp.p_percent,
            c.thresholds_matched
                .map(|m| format!("acc {:.3} p-% {:.1}", m.accuracy, m.p_percent))
                .unwrap_or_else(|| "none".into()),
        ));
    }
    run.finish(manifest)?;
    Ok(EXIT_OK)
}
