//! Command implementations behind the `microgext` binary.
//!
//! Every command writes its primary artifact plus `config.toml` (the
//! resolved configuration) into `--out`. Wall-clock measurements go to
//! separate `timing-<command>.json` / `latency.json` files so primary artifacts stay
//! byte-identical between runs.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use microgext::edit::{write_log, Document, Granularity, Selection, SwipeMapping};
use microgext::gesture::GestureClass;
use microgext::io::{
    emit_report, load_checkpoint, read_dataset, read_session, save_checkpoint, write_atomic, write_dataset,
    write_report, write_session, FoldSummary, IoError, MetricsReport, ReportFormat, SessionRecording,
};
use microgext::par::thread_budget;
use microgext::recognizer::{
    calibrate, calibration_stats, evaluate, prepare, train_fold, Calibration, EpochLog, Fold, HyperParams,
    ModelParams,
};
use microgext::session::{EditorSession, LatencyStats, Scenario};
use microgext::skeleton::{HandFrame, Handedness, FRAME_RATE_HZ};
use microgext::stream::{FsmConfig, Runtime};
use microgext::synth::make_dataset;

/// Seed used by `synth` when `--seed` is absent.
pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable inputs or an invalid configuration (exit 2).
    #[error("{0}")]
    Usage(String),
    /// A requested check did not hold (exit 1).
    #[error("check failed: {0}")]
    Check(String),
    /// The pipeline itself failed (exit 1).
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Check(_) | CliError::Failed(_) => 1,
        }
    }
}

/// Attaches the offending path; unreadable files are usage errors.
fn io_err(path: &Path) -> impl Fn(IoError) -> CliError + '_ {
    move |e| match e {
        IoError::Io(_) => CliError::Usage(format!("{}: {e}", path.display())),
        other => CliError::Failed(format!("{}: {other}", path.display())),
    }
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

/// Gesture-driven text editing pipeline: synthesize data, train, evaluate,
/// stream and benchmark.
///
/// MICROGEXT_THREADS caps worker threads; RUST_LOG controls progress output.
#[derive(Debug, Parser)]
#[command(name = "microgext", version)]
pub struct Cli {
    /// Master seed (synth: dataset seed, default 7; train: overrides the
    /// configured master_seed; stream: overrides the scenario seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML file with [hyper] and [fsm] tables overriding the defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled dataset (dataset.mgd).
    Synth(SynthArgs),
    /// Train one leave-one-subject-out fold (checkpoint.mgc, train_log.json).
    Train(TrainArgs),
    /// Evaluate a checkpoint on its fold (report.mgr, report.txt).
    Eval(EvalArgs),
    /// Run a recording or scenario through recognizer and editor.
    Stream(StreamArgs),
    /// Measure per-frame push latency (bench.json).
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    pub n_subjects: u32,
    /// Repetitions per command gesture.
    #[arg(long, default_value_t = 20)]
    pub reps: u32,
    /// Null clips per subject; defaults to --reps.
    #[arg(long)]
    pub null_reps: Option<u32>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Subject held out for testing.
    #[arg(long)]
    pub fold: u32,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Test subject of the fold the checkpoint was trained for.
    #[arg(long)]
    pub fold: u32,
    /// Exit 1 unless every class reaches this window accuracy.
    #[arg(long)]
    pub min_class_accuracy: Option<f64>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OutputFormat {
    Table,
    Json,
}

#[derive(Debug, Args)]
pub struct StreamArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Recorded session (.mgs).
    #[arg(long, conflicts_with = "script", required_unless_present = "script")]
    pub session: Option<PathBuf>,
    /// Scenario TOML, or `builtin` for the eight-command scenario.
    #[arg(long)]
    pub script: Option<String>,
    /// Initial document text for --session.
    #[arg(long, default_value = "")]
    pub text: String,
    /// Swipe-to-caret mapping for --session.
    #[arg(long, value_enum, default_value_t = MappingArg::Step)]
    pub swipe_mapping: MappingArg,
    /// With --script: exit 1 unless the final document matches the
    /// scenario's golden document and exactly the intended gestures fired.
    #[arg(long)]
    pub expect_golden: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MappingArg {
    Step,
    Crossings,
    Forward,
}

impl From<MappingArg> for SwipeMapping {
    fn from(m: MappingArg) -> Self {
        match m {
            MappingArg::Step => SwipeMapping::Step,
            MappingArg::Crossings => SwipeMapping::Crossings,
            MappingArg::Forward => SwipeMapping::Forward,
        }
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, required_unless_present = "random_hidden")]
    pub checkpoint: Option<PathBuf>,
    /// Benchmark freshly initialized parameters of this width instead.
    #[arg(long, conflicts_with = "checkpoint")]
    pub random_hidden: Option<usize>,
    /// Timed frames.
    #[arg(long, default_value_t = 2000)]
    pub frames: usize,
    /// Untimed frames pushed first (at least one window).
    #[arg(long, default_value_t = 100)]
    pub warmup: usize,
    /// Exit 1 if p99 reaches this many milliseconds.
    #[arg(long)]
    pub budget_ms: Option<f64>,
}

/// Everything a `--config` file can override.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub hyper: HyperParams,
    pub fsm: FsmConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let cfg = match path {
            None => Self::default(),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))?
            }
        };
        cfg.hyper.validate().map_err(CliError::Usage)?;
        cfg.fsm.validate().map_err(CliError::Usage)?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Final editor state as written to `document.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentState {
    pub text: String,
    pub caret: usize,
    pub selection: Option<Selection>,
    pub granularity: Granularity,
    pub clipboard: String,
}

impl From<&Document> for DocumentState {
    fn from(d: &Document) -> Self {
        Self {
            text: d.text(),
            caret: d.caret(),
            selection: d.selection(),
            granularity: d.granularity(),
            clipboard: d.clipboard(),
        }
    }
}

#[derive(Debug, Serialize)]
struct TrainLog<'a> {
    fold: &'a Fold,
    best_epoch: usize,
    calibration: &'a Calibration,
    epochs: &'a [EpochLog],
}

#[derive(Debug, Serialize)]
struct Timing {
    command: &'static str,
    wall_seconds: f64,
    threads: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BenchReport {
    pub hidden: usize,
    pub warmup_frames: usize,
    pub latency: LatencyStats,
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    threads: usize,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        write_atomic(&p, bytes).map_err(io_err(&p))?;
        Ok(p)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut s = serde_json::to_string_pretty(value).map_err(failed)?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    fn timing(&self, command: &'static str, start: Instant) -> Result<(), CliError> {
        self.write_json(
            &format!("timing-{command}.json"),
            &Timing {
                command,
                wall_seconds: start.elapsed().as_secs_f64(),
                threads: self.threads,
            },
        )?;
        Ok(())
    }
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let (Command::Train(_), Some(seed)) = (&cli.command, cli.seed) {
        cfg.hyper.master_seed = seed;
    }
    fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", cli.out.display())))?;
    let ctx = Ctx {
        cfg,
        out: cli.out,
        threads: thread_budget(),
    };
    ctx.write("config.toml", ctx.cfg.to_toml().as_bytes())?;
    match cli.command {
        Command::Synth(a) => synth(&ctx, &a, cli.seed.unwrap_or(DEFAULT_SEED)),
        Command::Train(a) => train(&ctx, &a),
        Command::Eval(a) => eval(&ctx, &a),
        Command::Stream(a) => stream(&ctx, &a, cli.seed),
        Command::Bench(a) => bench(&ctx, &a),
    }
}

fn synth(ctx: &Ctx, a: &SynthArgs, seed: u64) -> Result<(), CliError> {
    if a.n_subjects == 0 || a.reps == 0 {
        return Err(CliError::Usage("--n-subjects and --reps must be >= 1".into()));
    }
    let ds = make_dataset(a.n_subjects, a.reps, a.null_reps.unwrap_or(a.reps), seed).map_err(failed)?;
    let path = ctx.path("dataset.mgd");
    write_dataset(&ds, &path).map_err(io_err(&path))?;
    println!("{} clips -> {}", ds.clips.len(), path.display());
    for (g, n) in GestureClass::ALL.iter().zip(ds.class_histogram()) {
        println!("  {:<9}{n}", g.name());
    }
    Ok(())
}

fn load_fold(dataset: &Path, test_subject: u32) -> Result<(microgext::synth::Dataset, Fold), CliError> {
    let ds = read_dataset(dataset).map_err(io_err(dataset))?;
    let fold = Fold::new(&ds.subjects(), test_subject).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((ds, fold))
}

fn train(ctx: &Ctx, a: &TrainArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let (ds, fold) = load_fold(&a.dataset, a.fold)?;
    let split = fold.split(&ds.clips);
    split.check().map_err(failed)?;
    let train = prepare(&split.train).map_err(failed)?;
    let val = prepare(&split.val).map_err(failed)?;
    log::info!(
        "fold {}: {} train / {} val clips, hidden {}",
        a.fold,
        train.len(),
        val.len(),
        ctx.cfg.hyper.hidden
    );
    let outcome = train_fold(&train, &val, &fold, &ctx.cfg.hyper, ctx.threads).map_err(failed)?;
    let mut params = outcome.params;
    let calibration = calibrate(&mut params, &val, ctx.threads).map_err(failed)?;
    let path = ctx.path("checkpoint.mgc");
    save_checkpoint(&params, &path).map_err(io_err(&path))?;
    ctx.write_json(
        "train_log.json",
        &TrainLog {
            fold: &fold,
            best_epoch: outcome.best_epoch,
            calibration: &calibration,
            epochs: &outcome.log,
        },
    )?;
    ctx.timing("train", start)?;
    let last = outcome.log.last().expect("at least one epoch");
    println!(
        "epochs {} best {} val_loss {:.4} val_acc {:.3} tau {:.4} -> {}",
        outcome.log.len(),
        outcome.best_epoch,
        last.val_loss,
        last.val_accuracy,
        calibration.temperature,
        path.display()
    );
    Ok(())
}

fn eval(ctx: &Ctx, a: &EvalArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let params = load_checkpoint(&a.checkpoint, None).map_err(io_err(&a.checkpoint))?;
    let (ds, fold) = load_fold(&a.dataset, a.fold)?;
    let split = fold.split(&ds.clips);
    split.check().map_err(failed)?;
    let val = prepare(&split.val).map_err(failed)?;
    let test = prepare(&split.test).map_err(failed)?;
    let tau = params.temperature as f64;
    let calibration = calibration_stats(&params, &val, tau, ctx.threads).map_err(failed)?;
    let report = evaluate(&params, &test, tau, ctx.threads).map_err(failed)?;
    let summary = FoldSummary {
        test_subject: fold.test_subject,
        val_subject: fold.val_subject,
        best_epoch: None,
        epochs_run: None,
        calibration,
        report,
    };
    let metrics = MetricsReport::new(ds.seed, params.hidden(), vec![summary]);
    let mgr = ctx.path("report.mgr");
    write_report(&metrics, &mgr).map_err(io_err(&mgr))?;
    let table = emit_report(&metrics, ReportFormat::Table);
    ctx.write("report.txt", table.as_bytes())?;
    ctx.timing("eval", start)?;
    match a.format {
        OutputFormat::Table => print!("{table}"),
        OutputFormat::Json => print!("{}", emit_report(&metrics, ReportFormat::Json)),
    }
    if let Some(min) = a.min_class_accuracy {
        let low: Vec<String> = GestureClass::ALL
            .iter()
            .zip(&metrics.mean_class_accuracy)
            .filter_map(|(g, acc)| acc.filter(|v| *v < min).map(|v| format!("{} {v:.3}", g.name())))
            .collect();
        if !low.is_empty() {
            return Err(CliError::Check(format!("class accuracy below {min}: {}", low.join(", "))));
        }
    }
    Ok(())
}

/// Result of driving an [`EditorSession`] over a frame sequence.
pub struct StreamRun {
    pub session: EditorSession,
    pub frames: Vec<HandFrame>,
}

/// Pushes `frames` through a fresh session.
pub fn run_stream(
    params: Arc<ModelParams<f32>>,
    fsm: FsmConfig,
    doc: Document,
    mapping: SwipeMapping,
    frames: Vec<HandFrame>,
) -> Result<StreamRun, CliError> {
    let mut session = EditorSession::new(params, fsm, doc, mapping).map_err(failed)?;
    for f in &frames {
        session.push(f).map_err(failed)?;
    }
    Ok(StreamRun { session, frames })
}

fn load_scenario(source: &str) -> Result<Scenario, CliError> {
    let s = if source == "builtin" {
        Scenario::eight_commands()
    } else {
        let text = fs::read_to_string(source).map_err(|e| CliError::Usage(format!("cannot read {source}: {e}")))?;
        Scenario::parse(&text).map_err(|e| CliError::Usage(e.to_string()))?
    };
    s.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(s)
}

fn stream(ctx: &Ctx, a: &StreamArgs, seed: Option<u64>) -> Result<(), CliError> {
    let params = Arc::new(load_checkpoint(&a.checkpoint, None).map_err(io_err(&a.checkpoint))?);
    let mut scenario = None;
    let (doc, mapping, frames, recorded) = match (&a.session, &a.script) {
        (Some(p), _) => {
            let rec = read_session(p).map_err(io_err(p))?;
            (Document::new(&a.text), a.swipe_mapping.into(), rec.frames, Some(rec.events))
        }
        (None, Some(source)) => {
            let mut s = load_scenario(source)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let frames = s.render().merged();
            let doc = Document::with_caret(&s.text, s.caret);
            let mapping = s.swipe_mapping;
            scenario = Some(s);
            (doc, mapping, frames, None)
        }
        (None, None) => return Err(CliError::Usage("one of --session or --script is required".into())),
    };
    let run = run_stream(params, ctx.cfg.fsm, doc, mapping, frames)?;
    let session = &run.session;

    let recording = SessionRecording {
        frames: run.frames.clone(),
        events: session.events().to_vec(),
    };
    let mgs = ctx.path("session.mgs");
    write_session(&recording, &mgs).map_err(io_err(&mgs))?;
    ctx.write("commands.log", write_log(session.log()).as_bytes())?;
    let state = DocumentState::from(session.document());
    ctx.write_json("document.json", &state)?;
    let latency = LatencyStats::from_samples(session.latencies_ms());
    ctx.write_json("latency.json", &latency)?;

    for e in session.events() {
        println!("{:>9.4}  {:<9} {:.3}", e.fired_at, e.gesture.name(), e.mean_confidence);
    }
    for w in session.warnings() {
        log::warn!("{w}");
    }
    println!("document: {:?}", state.text);
    println!(
        "latency ms: p50 {:.3} p95 {:.3} p99 {:.3} over {} frames",
        latency.p50_ms, latency.p95_ms, latency.p99_ms, latency.frames
    );

    if let Some(events) = recorded.filter(|e| !e.is_empty()) {
        let same = events.len() == session.events().len()
            && events
                .iter()
                .zip(session.events())
                .all(|(x, y)| x.gesture == y.gesture && x.fired_at == y.fired_at);
        println!("recorded events reproduced: {same}");
    }
    if a.expect_golden {
        let s = scenario.ok_or_else(|| CliError::Usage("--expect-golden needs --script".into()))?;
        let fired: Vec<GestureClass> = session.events().iter().map(|e| e.gesture).collect();
        if fired != s.intended_gestures() {
            return Err(CliError::Check(format!(
                "fired {:?}, expected {:?}",
                fired,
                s.intended_gestures()
            )));
        }
        let golden = DocumentState::from(&s.golden_document());
        if state != golden {
            return Err(CliError::Check(format!("final document {state:?} != golden {golden:?}")));
        }
        println!("golden document and events match");
    }
    Ok(())
}

/// Times `frames` pushes after `warmup` untimed ones, cycling through the
/// right-hand stream of the built-in scenario.
pub fn bench_latency(
    params: Arc<ModelParams<f32>>,
    fsm: FsmConfig,
    warmup: usize,
    frames: usize,
) -> Result<LatencyStats, CliError> {
    let source = Scenario::eight_commands().render().right;
    let mut runtime = Runtime::new(params, fsm).map_err(failed)?;
    let mut samples = Vec::with_capacity(frames);
    for i in 0..warmup + frames {
        let mut f = source[i % source.len()].clone();
        f.timestamp = i as f64 / FRAME_RATE_HZ;
        f.handedness = Handedness::Right;
        let t0 = Instant::now();
        runtime.push_frame(f).map_err(failed)?;
        if i >= warmup {
            samples.push(t0.elapsed().as_secs_f64() * 1e3);
        }
    }
    Ok(LatencyStats::from_samples(&samples))
}

fn bench(ctx: &Ctx, a: &BenchArgs) -> Result<(), CliError> {
    let params = match (&a.checkpoint, a.random_hidden) {
        (Some(p), _) => load_checkpoint(p, None).map_err(io_err(p))?,
        (None, Some(h)) if h > 0 => ModelParams::init(h, ctx.cfg.hyper.master_seed),
        _ => return Err(CliError::Usage("need --checkpoint or --random-hidden >= 1".into())),
    };
    if a.frames == 0 || a.warmup < microgext::skeleton::WINDOW_LEN {
        return Err(CliError::Usage(format!(
            "--frames must be >= 1 and --warmup >= {}",
            microgext::skeleton::WINDOW_LEN
        )));
    }
    let hidden = params.hidden();
    let latency = bench_latency(Arc::new(params), ctx.cfg.fsm, a.warmup, a.frames)?;
    ctx.write_json(
        "bench.json",
        &BenchReport {
            hidden,
            warmup_frames: a.warmup,
            latency,
        },
    )?;
    println!(
        "hidden {hidden}: p50 {:.3} ms  p95 {:.3} ms  p99 {:.3} ms  max {:.3} ms  ({} frames)",
        latency.p50_ms, latency.p95_ms, latency.p99_ms, latency.max_ms, latency.frames
    );
    if let Some(budget) = a.budget_ms {
        if latency.p99_ms >= budget {
            return Err(CliError::Check(format!("p99 {:.3} ms >= budget {budget} ms", latency.p99_ms)));
        }
    }
    Ok(())
}
