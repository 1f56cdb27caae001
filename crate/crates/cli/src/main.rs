// SPDX-License-Identifier: Apache-2.0

//! Command-line driver.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use tracing::{error, info, warn};

use specsyn::config::{Backend, ConfigError, Overrides, RunConfig};
use specsyn::eval::evaluate;
use specsyn::events::{Event, MemorySink};
use specsyn::frontend::SourceUnit;
use specsyn::model::{LanguageModel, LiveModel, RecordingModel, ReplayModel};
use specsyn::mutation::{Equivalence, Variant};
use specsyn::refinement::{compute_vdr, round_seed, MutationSource, VariantSource};
use specsyn::report::SynthesisReport;
use specsyn::spec::{ClauseIds, ClauseKind, SpecSet};
use specsyn::synthesis::synthesize_program;
use specsyn::unit::AnalyzedUnit;

#[derive(Parser)]
#[command(name = "specsyn", version, about = "Synthesize ACSL specifications for C programs")]
struct Cli {
    /// More log output on stderr (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print declarations, segments and points of interest.
    Segment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "segments.json")]
        out: PathBuf,
    },
    /// Generate, repair and refine specifications for every segment.
    Synthesize(SynthesizeArgs),
    /// Generate non-equivalent variants of segments.
    Mutate {
        #[arg(long)]
        input: PathBuf,
        /// Only the segment defining this function.
        #[arg(long)]
        function: Option<String>,
        #[arg(long, default_value = "variants.json")]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Measure the variant discriminative rate of the annotations in a file.
    Vdr {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        function: Option<String>,
        #[arg(long, default_value = "vdr.json")]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Precision, recall and proved targets against reference annotations.
    Eval {
        #[arg(long)]
        subject: PathBuf,
        #[arg(long = "ground-truth")]
        ground_truth: PathBuf,
        /// Report written by `synthesize`.
        #[arg(long)]
        generated: PathBuf,
        #[arg(long, default_value = "metrics.json")]
        out: PathBuf,
        /// Match reference clauses by normalized text only.
        #[arg(long)]
        textual: bool,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Verify every annotation of a file.
    Verify {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "verdicts.json")]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Mock,
    External,
}

/// Options shared by every pipeline command.
#[derive(Args, Clone)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "n-refine")]
    n_refine: Option<usize>,
    #[arg(long = "n-repair")]
    n_repair: Option<usize>,
    /// VDR threshold.
    #[arg(long)]
    t: Option<f64>,
    /// Variants per round.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "skip-if-strong")]
    skip_if_strong: bool,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// C compiler command for equivalence filtering.
    #[arg(long)]
    cc: Option<String>,
    /// Keep every variant without equivalence filtering.
    #[arg(long = "no-tce")]
    no_tce: bool,
    /// Leave timestamps out of reports.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args)]
struct SynthesizeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
    /// Write the input annotated with the final specifications here.
    #[arg(long)]
    annotated: Option<PathBuf>,
    /// Answer model calls from a recorded transcript.
    #[arg(long, conflicts_with = "record")]
    replay: Option<PathBuf>,
    /// Record the live model conversation to this transcript.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Structured event log (JSON Lines).
    #[arg(long)]
    events: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

enum Failure {
    /// Bad usage, configuration, or unreadable input.
    Usage(String),
    /// The pipeline ran and failed.
    Pipeline(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn pipeline(e: impl std::fmt::Display) -> Failure {
    Failure::Pipeline(e.to_string())
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis())
}

/// Writes via a temporary file in the target directory and a rename; `-`
/// is standard output.
fn write_atomic(path: &Path, contents: &str) -> Outcome {
    if path == Path::new("-") {
        print!("{contents}");
        return Ok(());
    }
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| pipeline(format!("{}: {e}", path.display())))?;
    tmp.write_all(contents.as_bytes()).map_err(pipeline)?;
    tmp.persist(path)
        .map_err(|e| pipeline(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn to_json(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn read_input(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn analyze(path: &Path) -> Result<AnalyzedUnit, Failure> {
    let text = read_input(path)?;
    AnalyzedUnit::analyze(SourceUnit::new(path, text), &mut ClauseIds::default()).map_err(pipeline)
}

fn load_config(a: &RunArgs) -> Result<RunConfig, Failure> {
    let env: BTreeMap<String, String> = std::env::vars().filter(|(k, _)| k.starts_with("SPECSYN_")).collect();
    let flags = Overrides {
        n_refine: a.n_refine,
        n_repair: a.n_repair,
        t: a.t,
        mutation_budget: a.budget,
        seed: a.seed,
        skip_if_strong: a.skip_if_strong.then_some(true),
        backend: a.backend.map(|b| match b {
            BackendArg::Mock => Backend::Mock,
            BackendArg::External => Backend::External,
        }),
        cc: a.cc.clone(),
    };
    let mut cfg = RunConfig::load(a.config.as_deref(), &env, &flags)?;
    cfg.no_tce |= a.no_tce;
    Ok(cfg)
}

/// Segment ids to process: all with points of interest, or the one
/// defining `function`.
fn selected(unit: &AnalyzedUnit, function: Option<&str>) -> Result<Vec<usize>, Failure> {
    match function {
        Some(f) => unit
            .segment_of(f)
            .map(|s| vec![s.id])
            .ok_or_else(|| Failure::Usage(format!("no function `{f}` in the input"))),
        None => Ok((0..unit.segments.len()).filter(|&i| !unit.pois[i].is_empty()).collect()),
    }
}

fn run_meta(cfg: &RunConfig, args: &RunArgs, started: u128, artifacts: &[&Path]) -> Value {
    let mut run = json!({
        "config": cfg,
        "artifacts": artifacts.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    if !args.deterministic {
        run["started_unix_ms"] = json!(started);
        run["finished_unix_ms"] = json!(now_ms());
    }
    run
}

fn cmd_segment(input: &Path, out: &Path) -> Outcome {
    let unit = analyze(input)?;
    let segments: Vec<Value> = unit
        .segments
        .iter()
        .map(|s| {
            json!({
                "id": s.id,
                "members": s.member_names,
                "deps": s.deps,
                "topo_rank": s.topo_rank,
                "points_of_interest": unit.pois[s.id].iter().map(|p| json!({
                    "id": p.id,
                    "description": p.describe(),
                })).collect::<Vec<_>>(),
                "code": s.code,
            })
        })
        .collect();
    let decls: Vec<Value> = unit
        .decls
        .iter()
        .map(|d| json!({ "name": d.name, "referenced": d.referenced_names }))
        .collect();
    write_atomic(
        out,
        &to_json(&json!({ "input": input.display().to_string(), "declarations": decls, "segments": segments })),
    )?;
    info!(segments = unit.segments.len(), "segmented");
    Ok(())
}

fn build_model(a: &SynthesizeArgs, cfg: &RunConfig) -> Result<Box<dyn LanguageModel>, Failure> {
    if let Some(p) = &a.replay {
        return ReplayModel::load(p)
            .map(|m| Box::new(m) as Box<dyn LanguageModel>)
            .map_err(|e| Failure::Usage(format!("{}: {e}", p.display())));
    }
    let live = LiveModel::from_env(cfg.model.clone()).map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(Box::new(live))
}

fn cmd_synthesize(a: &SynthesizeArgs) -> Outcome {
    let started = now_ms();
    let cfg = load_config(&a.run)?;
    let unit = analyze(&a.input)?;
    let model = build_model(a, &cfg)?;
    let recorder = a
        .record
        .as_ref()
        .map(|_| RecordingModel::new(model.as_ref(), cfg.model.model.clone()));
    let model_ref: &dyn LanguageModel = match &recorder {
        Some(r) => r,
        None => model.as_ref(),
    };
    let verifier = cfg.verifier.build();
    let variants = MutationSource::from_config(&cfg).map_err(|e| Failure::Usage(e.to_string()))?;
    let sink = MemorySink::default();
    let result = synthesize_program(
        &unit,
        &a.input.display().to_string(),
        model_ref,
        verifier.as_ref(),
        &variants,
        &cfg,
        &sink,
    );
    if let (Some(path), Some(r)) = (&a.record, &recorder) {
        r.transcript().write(path).map_err(pipeline)?;
    }
    if let Some(p) = &a.events {
        write_events(p, &sink.events())?;
    }
    let report = result.map_err(pipeline)?;
    let mut artifacts = vec![a.out.as_path()];
    if let Some(p) = &a.annotated {
        let mut specs: SpecSet = unit.targets.clone();
        specs.extend(
            report
                .clauses
                .iter()
                .filter(|c| report.final_specs.contains(&c.id))
                .map(|c| {
                    let mut s = specsyn::spec::SpecClause::new(c.id, c.kind, c.predicate.clone(), c.poi, c.origin);
                    s.status = c.status;
                    s
                }),
        );
        write_atomic(p, &unit.annotated_source(&specs).map_err(pipeline)?)?;
        artifacts.push(p);
    }
    write_report(&a.out, &report, &cfg, &a.run, started, &artifacts)?;
    let failed: Vec<_> = report.segments.iter().filter(|s| s.error.is_some()).collect();
    info!(
        targets_proved = report.final_pass.targets_proved,
        targets_total = report.final_pass.targets_total,
        "synthesis finished"
    );
    if !failed.is_empty() {
        for s in failed {
            error!(segment = s.id, "{}", s.error.as_deref().unwrap_or_default());
        }
        return Err(Failure::Pipeline("some segments failed".into()));
    }
    Ok(())
}

fn write_events(path: &Path, events: &[Event]) -> Outcome {
    let mut s = String::new();
    for e in events {
        s.push_str(&serde_json::to_string(e).expect("event serializes"));
        s.push('\n');
    }
    write_atomic(path, &s)
}

fn write_report(
    out: &Path,
    report: &SynthesisReport,
    cfg: &RunConfig,
    args: &RunArgs,
    started: u128,
    artifacts: &[&Path],
) -> Outcome {
    let mut v = serde_json::to_value(report).expect("report serializes");
    v["run"] = run_meta(cfg, args, started, artifacts);
    write_atomic(out, &to_json(&v))
}

#[derive(Serialize)]
struct SegmentVariants {
    segment: usize,
    members: Vec<String>,
    variants: Vec<Variant>,
    equivalent_excluded: usize,
    compile_failed: usize,
    warnings: Vec<String>,
}

fn cmd_mutate(input: &Path, function: Option<&str>, out: &Path, args: &RunArgs) -> Outcome {
    let started = now_ms();
    let cfg = load_config(args)?;
    let unit = analyze(input)?;
    let source = MutationSource::from_config(&cfg).map_err(|e| Failure::Usage(e.to_string()))?;
    let mut segments = Vec::new();
    for seg in selected(&unit, function)? {
        let sample = match source.sample(&unit, seg, round_seed(cfg.seed, seg, None, 0)) {
            Ok(s) => s,
            Err(e) => {
                warn!(segment = seg, "{e}");
                Default::default()
            }
        };
        debug_assert!(sample
            .variants
            .iter()
            .all(|v| v.equivalence != Some(Equivalence::Equivalent)));
        segments.push(SegmentVariants {
            segment: seg,
            members: unit.segments[seg].member_names.clone(),
            variants: sample.variants,
            equivalent_excluded: sample.equivalent_excluded,
            compile_failed: sample.compile_failed,
            warnings: sample.warnings,
        });
    }
    let v = json!({
        "input": input.display().to_string(),
        "segments": segments,
        "run": run_meta(&cfg, args, started, &[out]),
    });
    write_atomic(out, &to_json(&v))
}

fn cmd_vdr(input: &Path, function: Option<&str>, out: &Path, args: &RunArgs) -> Outcome {
    let started = now_ms();
    let cfg = load_config(args)?;
    let unit = analyze(input)?;
    let source = MutationSource::from_config(&cfg).map_err(|e| Failure::Usage(e.to_string()))?;
    let verifier = cfg.verifier.build();
    let specs = unit.targets.filter(|c| c.kind != ClauseKind::Assert);
    let mut rows = Vec::new();
    for seg in selected(&unit, function)? {
        let seed = round_seed(cfg.seed, seg, None, 0);
        let sample = source.sample(&unit, seg, seed).map_err(pipeline)?;
        let submitted = specs.filter(|c| c.poi.segment == seg);
        let assumed = specs.filter(|c| c.poi.segment != seg);
        let mut r =
            compute_vdr(&unit, seg, &submitted, &assumed, &sample.variants, verifier.as_ref()).map_err(pipeline)?;
        r.seed = seed;
        r.equivalent_excluded = sample.equivalent_excluded;
        r.compile_failed = sample.compile_failed;
        info!(segment = seg, refuted = r.refuted, total = r.total, "vdr");
        rows.push(json!({
            "segment": seg,
            "members": unit.segments[seg].member_names,
            "submitted": submitted.len(),
            "vdr": r,
        }));
    }
    let v = json!({
        "input": input.display().to_string(),
        "verifier": verifier.name(),
        "segments": rows,
        "run": run_meta(&cfg, args, started, &[out]),
    });
    write_atomic(out, &to_json(&v))
}

fn cmd_eval(subject: &Path, reference: &Path, generated: &Path, out: &Path, textual: bool, args: &RunArgs) -> Outcome {
    let started = now_ms();
    let cfg = load_config(args)?;
    let s = analyze(subject)?;
    let r = analyze(reference)?;
    let text = read_input(generated)?;
    let report: SynthesisReport =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", generated.display())))?;
    let verifier = cfg.verifier.build();
    // bounded entailment needs the mock evaluator
    let domain = (!textual && cfg.verifier.backend == Backend::Mock).then_some(&cfg.verifier.domain);
    let m = evaluate(&s, &r, &report, verifier.as_ref(), domain).map_err(pipeline)?;
    let mut v = serde_json::to_value(&m).expect("metrics serialize");
    v["run"] = run_meta(&cfg, args, started, &[out]);
    write_atomic(out, &to_json(&v))
}

fn cmd_verify(input: &Path, out: &Path, args: &RunArgs) -> Outcome {
    let started = now_ms();
    let cfg = load_config(args)?;
    let unit = analyze(input)?;
    let verifier = cfg.verifier.build();
    let inst = unit.final_text(&unit.targets).map_err(pipeline)?;
    let verdicts = verifier.verify(&inst).map_err(pipeline)?;
    let rows: Vec<Value> = verdicts
        .iter()
        .map(|v| {
            let c = unit.targets.get(v.clause_id);
            json!({
                "id": v.clause_id,
                "clause": c.map(|c| c.render()),
                "poi": c.map(|c| c.poi),
                "status": v.status,
                "diagnostic": v.diagnostic,
            })
        })
        .collect();
    let proved = verdicts
        .iter()
        .filter(|v| v.status == specsyn::verifier::VerdictStatus::Proved)
        .count();
    info!(proved, total = verdicts.len(), "verified");
    let v = json!({
        "input": input.display().to_string(),
        "verifier": verifier.name(),
        "proved": proved,
        "total": verdicts.len(),
        "verdicts": rows,
        "run": run_meta(&cfg, args, started, &[out]),
    });
    write_atomic(out, &to_json(&v))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        2 => tracing::Level::DEBUG,
        _ => tracing::Level::TRACE,
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(level)
        .init();
    let r = match &cli.command {
        Command::Segment { input, out } => cmd_segment(input, out),
        Command::Synthesize(a) => cmd_synthesize(a),
        Command::Mutate {
            input,
            function,
            out,
            run,
        } => cmd_mutate(input, function.as_deref(), out, run),
        Command::Vdr {
            input,
            function,
            out,
            run,
        } => cmd_vdr(input, function.as_deref(), out, run),
        Command::Eval {
            subject,
            ground_truth,
            generated,
            out,
            textual,
            run,
        } => cmd_eval(subject, ground_truth, generated, out, *textual, run),
        Command::Verify { input, out, run } => cmd_verify(input, out, run),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Pipeline(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
