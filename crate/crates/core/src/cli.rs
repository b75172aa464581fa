//! Command-line front end: `run`, `horizon` and `check`.
//!
//! Data files (`frames.csv`, `fields_t*.csv`) depend only on the
//! configuration; the wall time appears in `summary.json` under `meta` and
//! nowhere else.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{parse_config, Mode, SimConfig};
use crate::diagnostics::DiagnosticFrame;
use crate::error::{Result, SimError};
use crate::horizon::horizon_report;
use crate::run::{error_detail, horizon_only, prepare, run, RunOutcome, SnapshotRow};

#[derive(Debug, Parser)]
#[command(name = "bivlasov", version, about = "Vlasov / Born-Infeld solver with a priori bound monitoring")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve the configuration and write frames, snapshots and a summary.
    Run(RunArgs),
    /// Compute the existence horizons only and write a summary.
    Horizon(HorizonArgs),
    /// Validate the configuration and the assumptions; writes nothing.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `output.dir` (default `output`).
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Allow `t_end` past the certified interval; the summary is marked uncertified.
    #[arg(long)]
    pub override_certified: bool,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
}

#[derive(Debug, Args)]
pub struct HorizonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub override_certified: bool,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
}

pub const FRAMES_FILE: &str = "frames.csv";
pub const SUMMARY_FILE: &str = "summary.json";

pub fn snapshot_file_name(t: f64) -> String {
    format!("fields_t{t:.6}.csv")
}

fn load(path: &Path) -> Result<SimConfig> {
    let text = fs::read_to_string(path)?;
    parse_config(&text)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| SimError::Encode(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| SimError::Encode(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_frames(path: &Path, frames: &[DiagnosticFrame]) -> Result<()> {
    write_csv(path, frames)
}

pub fn write_snapshot(path: &Path, rows: &[SnapshotRow]) -> Result<()> {
    write_csv(path, rows)
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| SimError::Encode(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Removes artifacts of an earlier run so a refused run leaves no frames.
fn clear_artifacts(dir: &Path) -> Result<()> {
    if !dir.exists() {
        return Ok(());
    }
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name == FRAMES_FILE || name == SUMMARY_FILE || (name.starts_with("fields_t") && name.ends_with(".csv")) {
            fs::remove_file(&path)?;
        }
    }
    Ok(())
}

fn refusal(command: &str, e: &SimError, config: Option<&SimConfig>, extra: Value) -> Value {
    json!({
        "command": command,
        "status": "refused",
        "exit_code": e.exit_code(),
        "abort": {"kind": e.kind(), "exit_code": e.exit_code(), "message": e.to_string(), "detail": error_detail(e)},
        "details": extra,
        "config": config.map(|c| serde_json::to_value(c).expect("config serializes")),
    })
}

fn run_summary(cfg: &SimConfig, out: &RunOutcome, snapshot_files: &[Value], wall: f64) -> Value {
    let p = &out.plan;
    json!({
        "command": "run",
        "status": if out.abort.is_some() { "aborted" } else { "completed" },
        "exit_code": out.exit_code(),
        "abort": out.abort,
        "uncertified": p.uncertified,
        "mode": out.mode,
        "t_stop": p.t_stop,
        "dt": p.dt,
        "steps": p.steps,
        "t_reached": out.last.t,
        "steps_taken": out.last.step,
        "frames_written": out.frames.len(),
        "bound_violations": out.bound_violations(),
        "support_growth_ok": out.support_growth_ok(cfg.tolerances.envelope_tol),
        "snapshots": snapshot_files,
        "skipped_snapshots": out.skipped_snapshots,
        "picard": out.picard,
        "assumptions": p.assumptions,
        "horizon": p.horizon,
        "config": cfg,
        "meta": {"wall_time_s": wall},
    })
}

fn output_dir(cfg: Option<&SimConfig>, flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| cfg.and_then(|c| c.output.dir.clone()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("output"))
}

fn report(e: &SimError) {
    eprintln!("error ({}): {e}", e.kind());
}

/// `run`: returns the process exit status.
pub fn cmd_run(args: &RunArgs) -> i32 {
    let started = Instant::now();
    let mut cfg = match load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            report(&e);
            // a summary only where the caller named a place for it
            if let Some(dir) = &args.output_dir {
                if fs::create_dir_all(dir).is_ok() {
                    let _ = write_json(&dir.join(SUMMARY_FILE), &refusal("run", &e, None, Value::Null));
                }
            }
            return e.exit_code();
        }
    };
    if args.override_certified {
        cfg.override_certified = true;
    }
    if let Some(m) = args.mode {
        cfg.solver.mode = m;
    }
    let dir = output_dir(Some(&cfg), &args.output_dir);
    let result = (|| -> Result<i32> {
        fs::create_dir_all(&dir)?;
        clear_artifacts(&dir)?;
        match run(&cfg) {
            Ok(out) => {
                write_frames(&dir.join(FRAMES_FILE), &out.frames)?;
                let mut files = Vec::new();
                for s in &out.snapshots {
                    let name = snapshot_file_name(s.t);
                    write_snapshot(&dir.join(&name), &s.rows)?;
                    files.push(json!({"file": name, "t": s.t, "step": s.step, "requested": s.requested}));
                }
                let summary = run_summary(&cfg, &out, &files, started.elapsed().as_secs_f64());
                write_json(&dir.join(SUMMARY_FILE), &summary)?;
                match &out.abort {
                    Some(a) => eprintln!("aborted at t = {} (step {}): {}", a.t, a.step, a.message),
                    None => println!(
                        "completed: t = {}, {} steps, {} frames, {} with a failed bound{}",
                        out.last.t,
                        out.last.step,
                        out.frames.len(),
                        out.bound_violations(),
                        if out.plan.uncertified { " (uncertified)" } else { "" }
                    ),
                }
                Ok(out.exit_code())
            }
            Err(e) => {
                let extra = match &e {
                    SimError::Assumptions(_) => assumption_details(&cfg),
                    _ => Value::Null,
                };
                write_json(&dir.join(SUMMARY_FILE), &refusal("run", &e, Some(&cfg), extra))?;
                Err(e)
            }
        }
    })();
    result.unwrap_or_else(|e| {
        report(&e);
        e.exit_code()
    })
}

fn assumption_details(cfg: &SimConfig) -> Value {
    crate::config::InitialData::build(cfg)
        .map(|d| serde_json::to_value(d.assumptions()).expect("report serializes"))
        .unwrap_or(Value::Null)
}

/// `horizon`: summary.json with the horizon report only.
pub fn cmd_horizon(args: &HorizonArgs) -> i32 {
    let started = Instant::now();
    let cfg = match load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            report(&e);
            return e.exit_code();
        }
    };
    let dir = output_dir(Some(&cfg), &args.output_dir);
    let result = (|| -> Result<i32> {
        fs::create_dir_all(&dir)?;
        match horizon_only(&cfg) {
            Ok((h, a)) => {
                let v = json!({
                    "command": "horizon",
                    "status": "completed",
                    "exit_code": 0,
                    "summary_source": if cfg.summary.is_some() { "config" } else { "initial_data" },
                    "assumptions": a,
                    "horizon": h,
                    "config": cfg,
                    "meta": {"wall_time_s": started.elapsed().as_secs_f64()},
                });
                write_json(&dir.join(SUMMARY_FILE), &v)?;
                println!(
                    "t1 = {}, t2 = {}, t* = {}, certified end = {}",
                    fmt_h(h.t1.value()),
                    fmt_h(h.t2.value()),
                    fmt_h(h.t_star.value()),
                    fmt_h(h.certified_end.value())
                );
                Ok(0)
            }
            Err(e) => {
                write_json(&dir.join(SUMMARY_FILE), &refusal("horizon", &e, Some(&cfg), Value::Null))?;
                Err(e)
            }
        }
    })();
    result.unwrap_or_else(|e| {
        report(&e);
        e.exit_code()
    })
}

fn fmt_h(v: Option<f64>) -> String {
    v.map_or_else(|| "exceeds t_max".to_string(), |t| format!("{t}"))
}

/// `check`: validates the configuration and prints the assumption margins.
pub fn cmd_check(args: &CheckArgs) -> i32 {
    let result = load(&args.config).and_then(|mut cfg| {
        if args.override_certified {
            cfg.override_certified = true;
        }
        if let Some(m) = args.mode {
            cfg.solver.mode = m;
        }
        let d = crate::config::InitialData::build(&cfg)?;
        let a = d.assumptions();
        println!("A1 compact support inside grid: {}", a.a1);
        println!("A2 angle sum below pi/2:         {}", a.a2);
        println!("A3 margin arctan(1/P0) - Theta0: {} ({})", a.a3_margin, if a.a3 { "ok" } else { "FAILS" });
        match a.separation_margin {
            Some(m) => println!("initial separation margin:       {m}"),
            None => println!("initial separation margin:       no particles"),
        }
        if a.a2 {
            let (h, _) = horizon_report(&a.summary, cfg.horizon)?;
            println!("certified end:                   {}", fmt_h(h.certified_end.value()));
        }
        prepare(&cfg).map(|p| {
            println!("run: t_stop = {}, dt = {}, steps = {}{}", p.t_stop, p.dt, p.steps, if p.uncertified { " (uncertified)" } else { "" });
        })
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            report(&e);
            e.exit_code()
        }
    }
}

/// Parses `args` and dispatches; returns the process exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Horizon(a) => cmd_horizon(a),
        Command::Check(a) => cmd_check(a),
    }
}
