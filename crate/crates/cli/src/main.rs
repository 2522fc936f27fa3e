//! `rvbench`: forge suites, grade submissions, run the classical baseline,
//! serve episodes and aggregate results.
//!
//! Exit status: 0 on success, 1 when a graded task fails, 2 on usage or
//! schema errors.

mod files;
mod serve;
mod series;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::builder::FalseyValueParser;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use rvbench_core::episode::{Engine, EpisodeResult, SystemClock};
use rvbench_core::evaluator::{evaluate, MatchConfig, Submission};
use rvbench_core::report::{AggregateReport, Aggregator, SWEEP_TAUS};
use rvbench_core::solver::{default_frequency_range, gls_periodogram, greedy_solve_with, GreedyConfig, DEFAULT_N_FREQ};
use rvbench_core::suite::{forge_suite_with, TierCounts};
use rvbench_core::task::{generate_task_with, ingest_archive, read_archive_rows, ArchiveTruth, GeneratorConfig};
use rvbench_core::Error;

#[derive(Parser)]
#[command(name = "rvbench", version, about = "Radial-velocity planet detection benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a tier-balanced suite of tasks and hidden truth files.
    Forge(ForgeArgs),
    /// Grade one submission against a task and its truth.
    Grade(GradeArgs),
    /// Run the classical periodogram + least-squares solver over a suite.
    Baseline(BaselineArgs),
    /// Serve episodes over newline-delimited JSON (stdin/stdout or TCP).
    Serve(ServeArgs),
    /// Aggregate episode result files into tier and criterion pass rates.
    Report(ReportArgs),
    /// Convert an archival RV table and published solution into a task.
    Ingest(IngestArgs),
}

#[derive(Args)]
struct ForgeArgs {
    #[arg(long, default_value_t = 1000)]
    seed_base: u64,
    /// Tasks per tier as `easy,medium,hard`.
    #[arg(long, default_value = "20,40,40")]
    counts: TierCounts,
    #[arg(long)]
    out: PathBuf,
    /// Draw 2-3 instruments per task.
    #[arg(long)]
    multi_instrument: bool,
    /// Jitter range `lo,hi` in m/s (none by default).
    #[arg(long, value_parser = parse_range)]
    jitter: Option<(f64, f64)>,
    /// Give up after scanning this many seeds.
    #[arg(long, default_value_t = 1_000_000)]
    max_seeds: u64,
    /// Replace an existing suite in `--out`.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct GradeArgs {
    task: PathBuf,
    truth: PathBuf,
    submission: PathBuf,
    /// Match-score pass threshold.
    #[arg(long, default_value_t = 0.8)]
    threshold: f64,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    suite: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 4)]
    max_planets: usize,
    /// Write periodogram, residual and phase-fold CSV series per task.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    suite: PathBuf,
    /// TCP address to listen on; stdin/stdout when absent.
    #[arg(long, env = "RVBENCH_LISTEN")]
    listen: Option<String>,
    /// Disable wall-clock limits (for replaying recorded transcripts).
    #[arg(long, env = "RVBENCH_REPLAY", value_parser = FalseyValueParser::new())]
    replay: bool,
    /// Write each finished episode's result to `<dir>/<episode_id>.json`.
    #[arg(long)]
    results: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Result files or directories of result files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Match thresholds for the sensitivity sweep.
    #[arg(long, value_delimiter = ',', default_values_t = SWEEP_TAUS.to_vec())]
    taus: Vec<f64>,
    /// Print the aggregate as JSON instead of a table.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the sweep as CSV.
    #[arg(long)]
    sweep_csv: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    /// Table with time, rv, sigma and instrument columns.
    #[arg(long)]
    table: PathBuf,
    /// Published solution (`star_mass_sun`, `planets`, optional `offsets`, `noise`).
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    task_id: String,
    #[arg(long)]
    out: PathBuf,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `lo,hi`")?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if !(lo <= hi) || lo < 0.0 {
        return Err("need 0 <= lo <= hi".into());
    }
    Ok((lo, hi))
}

enum Status {
    Ok,
    TaskFailed,
}

fn forge(args: ForgeArgs) -> Result<Status> {
    let manifest = args.out.join("manifest.json");
    if manifest.exists() {
        if !args.force {
            bail!("{} already holds a suite (use --force to replace it)", args.out.display());
        }
        for sub in ["tasks", "truth"] {
            let d = args.out.join(sub);
            if d.exists() {
                fs::remove_dir_all(&d)?;
            }
        }
    }
    let cfg = GeneratorConfig {
        multi_instrument: args.multi_instrument,
        jitter_range_ms: args.jitter,
        ..GeneratorConfig::default()
    };
    let suite = forge_suite_with(args.seed_base, args.counts, &cfg, args.max_seeds, |seeds| {
        seeds.par_iter().map(|&s| generate_task_with(s, &cfg)).collect()
    })?;
    files::write_suite(&args.out, &suite)?;
    let m = &suite.manifest;
    println!(
        "{}: {} tasks (easy {}, medium {}, hard {}) from {} seeds starting at {}",
        m.suite_id,
        suite.tasks.len(),
        m.counts.easy,
        m.counts.medium,
        m.counts.hard,
        m.seeds_scanned,
        m.seed_base
    );
    Ok(Status::Ok)
}

fn grade(args: GradeArgs) -> Result<Status> {
    let bundle = files::read_bundle(&args.task, &args.truth)?;
    let sub: Submission = files::read(&args.submission)?;
    let cfg = MatchConfig {
        pass_threshold: args.threshold,
        ..MatchConfig::default()
    };
    cfg.validate()?;
    let report = match evaluate(&sub, &bundle, &cfg) {
        Ok(r) => r,
        Err(Error::RejectedSubmission(reason) | Error::MissingOffset(reason)) => {
            println!("{}", serde_json::json!({ "rejected": reason }));
            return Ok(Status::TaskFailed);
        }
        Err(e) => return Err(e.into()),
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(out) = &args.out {
        files::write(out, &report)?;
    }
    Ok(if report.passed { Status::Ok } else { Status::TaskFailed })
}

fn baseline(args: BaselineArgs) -> Result<Status> {
    let tasks = files::read_suite(&args.suite)?;
    let bundles: Vec<_> = tasks.iter().filter_map(|(_, b)| b.clone()).collect();
    let engine = Engine::new(bundles, Arc::new(SystemClock::default())).with_replay(true);
    let cfg = GreedyConfig {
        max_planets: args.max_planets,
        ..GreedyConfig::default()
    };
    let results: Vec<Option<EpisodeResult>> = tasks
        .par_iter()
        .map(|(doc, bundle)| -> Result<Option<EpisodeResult>> {
            let ds = doc.dataset();
            let outcome = greedy_solve_with(&ds, &cfg);
            let id = &doc.task_id;
            files::write(&args.out.join("submissions").join(format!("{id}.json")), &outcome.submission)?;
            if args.csv {
                let dir = args.out.join("csv");
                let (f_min, f_max) = default_frequency_range(ds.baseline_days());
                if let Ok(pg) = gls_periodogram(&ds, f_min, f_max, DEFAULT_N_FREQ) {
                    series::periodogram(&dir.join(format!("{id}_periodogram.csv")), &pg)?;
                }
                series::residuals(&dir.join(format!("{id}_residuals.csv")), &ds, &outcome.submission)?;
                series::phase_fold(&dir.join(format!("{id}_phase.csv")), &ds, &outcome.submission)?;
            }
            if bundle.is_none() {
                return Ok(None);
            }
            let result = engine.grade_once(id, Some(format!("baseline_{id}")), outcome.submission)?;
            files::write(&args.out.join("results").join(format!("{id}.json")), &result)?;
            Ok(Some(result))
        })
        .collect::<Result<_>>()?;
    let graded: Vec<EpisodeResult> = results.into_iter().flatten().collect();
    println!("solved {} tasks; submissions in {}", tasks.len(), args.out.join("submissions").display());
    if !graded.is_empty() {
        let mut agg = Aggregator::default();
        for r in &graded {
            agg.push(r)?;
        }
        print_table(&agg.finish()?);
    }
    Ok(Status::Ok)
}

fn report(args: ReportArgs) -> Result<Status> {
    let mut agg = Aggregator::new(&args.taus);
    for path in files::json_files(&args.inputs)? {
        let r: EpisodeResult = files::read(&path)?;
        agg.push(&r).with_context(|| format!("aggregating {}", path.display()))?;
    }
    let report = agg.finish()?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print_table(&report);
    }
    if let Some(out) = &args.out {
        files::write(out, &report)?;
    }
    if let Some(path) = &args.sweep_csv {
        series::sweep(path, &report)?;
    }
    Ok(Status::Ok)
}

fn print_table(report: &AggregateReport) {
    println!(
        "{:<8} {:>5} {:>7} {:>7} {:>7} {:>7} {:>7} {:>9} {:>7}",
        "scope", "n", "pass%", "dBIC%", "rms%", "match%", "count%", "envdone%", "mean_n"
    );
    let rows = report
        .per_tier
        .iter()
        .map(|(t, r)| (t.to_string(), r))
        .chain([("overall".to_string(), &report.overall)]);
    for (scope, r) in rows {
        println!(
            "{:<8} {:>5} {:>7.1} {:>7.1} {:>7.1} {:>7.1} {:>7.1} {:>9.1} {:>7.2}",
            scope,
            r.n_tasks,
            r.pass_rate,
            r.delta_bic_rate,
            r.rms_rate,
            r.match_rate,
            r.count_rate,
            r.env_done_rate,
            r.mean_predicted_count
        );
    }
    if !report.sweep.is_empty() {
        println!("match threshold sweep (pass %):");
        for row in &report.sweep {
            let tiers: Vec<String> = row.per_tier.iter().map(|(t, p)| format!("{t} {p:.1}")).collect();
            println!("  tau {:.2}: overall {:.1}  {}", row.tau, row.pass_rate, tiers.join("  "));
        }
    }
}

fn ingest(args: IngestArgs) -> Result<Status> {
    let table = fs::File::open(&args.table).with_context(|| format!("opening {}", args.table.display()))?;
    let rows = read_archive_rows(table)?;
    let truth: ArchiveTruth = files::read(&args.truth)?;
    let bundle = ingest_archive(&rows, &truth, &args.task_id)?;
    files::write_task_pair(&args.out, &bundle)?;
    println!(
        "{}: {} points, {} instruments, difficulty {} ({})",
        bundle.task_id,
        bundle.dataset.len(),
        bundle.dataset.instruments().len(),
        bundle.difficulty.d_total,
        bundle.tier
    );
    Ok(Status::Ok)
}

fn run(cli: Cli) -> Result<Status> {
    match cli.command {
        Command::Forge(a) => forge(a),
        Command::Grade(a) => grade(a),
        Command::Baseline(a) => baseline(a),
        Command::Serve(a) => serve::run(&a.suite, a.listen.as_deref(), a.replay, a.results.as_deref()).map(|()| Status::Ok),
        Command::Report(a) => report(a),
        Command::Ingest(a) => ingest(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::TaskFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
