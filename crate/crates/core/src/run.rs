//! Whole runs: startup checks, the time loop, and the records it emits.
//!
//! Startup refuses data failing A1 or A2, data failing A3 unless the
//! certified interval is overridden, and grids too small for the envelope
//! and light-cone growth of the supports. Errors inside the loop end the run
//! with the reason recorded next to every frame emitted so far.

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{InitialData, Mode, SimConfig};
use crate::coupling::{picard_solve, step_coupled, PicardTrace, SimState, StepParams};
use crate::diagnostics::{bound_check_frame, support_growth_check, DiagnosticFrame};
use crate::error::{ConfigViolation, Result, SimError};
use crate::horizon::{horizon_report, AssumptionReport, Envelope, Horizon, HorizonReport};
use crate::kinetic::BOUNDARY_LAYERS;

/// One row of a `fields_t*.csv` snapshot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SnapshotRow {
    pub x: f64,
    pub theta2: f64,
    pub theta_b: f64,
    pub alpha: f64,
    pub beta: f64,
    pub d1: f64,
    pub d2: f64,
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Snapshot {
    /// Requested times matched to this step.
    pub requested: Vec<f64>,
    pub step: usize,
    pub t: f64,
    #[serde(skip)]
    pub rows: Vec<SnapshotRow>,
}

pub fn snapshot_rows(state: &SimState) -> Vec<SnapshotRow> {
    let (t2, tb) = (state.inv.theta2(), state.inv.theta_b());
    state
        .inv
        .axis
        .nodes()
        .into_iter()
        .enumerate()
        .map(|(i, x)| SnapshotRow {
            x,
            theta2: t2[i],
            theta_b: tb[i],
            alpha: state.inv.alpha[i],
            beta: state.inv.beta[i],
            d1: state.raw.d1[i],
            d2: state.raw.d2[i],
            b: state.raw.b[i],
        })
        .collect()
}

/// Why a run stopped early.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Abort {
    pub kind: String,
    pub exit_code: i32,
    pub message: String,
    /// Time and step of the last accepted state.
    pub t: f64,
    pub step: usize,
    pub detail: Value,
}

impl Abort {
    pub fn new(e: &SimError, t: f64, step: usize) -> Self {
        Self { kind: e.kind().into(), exit_code: e.exit_code(), message: e.to_string(), t, step, detail: error_detail(e) }
    }
}

/// Machine-readable fields of an error.
pub fn error_detail(e: &SimError) -> Value {
    match e {
        SimError::BlowUpProximity { x, angle_sum, limit } => json!({"x": x, "angle_sum": angle_sum, "limit": limit}),
        SimError::SeparationViolation { x, v1, v2, margin, floor } => {
            json!({"x": x, "v1": v1, "v2": v2, "margin": margin, "floor": floor})
        }
        SimError::Config(v) => json!({ "violations": v }),
        SimError::PicardNonConvergence { iterations, trace } => json!({"iterations": iterations, "trace": trace}),
        _ => Value::Null,
    }
}

/// Everything fixed before the first step.
#[derive(Clone, Debug)]
pub struct RunPlan {
    pub initial: SimState,
    pub assumptions: AssumptionReport,
    pub horizon: HorizonReport,
    pub envelope: Envelope,
    /// `min(t_end, certified end)`, or `t_end` under the override.
    pub t_stop: f64,
    pub dt: f64,
    pub steps: usize,
    /// The run is allowed past the certified interval.
    pub uncertified: bool,
    pub params: StepParams,
}

fn violation(path: &str, message: String) -> SimError {
    SimError::Config(vec![ConfigViolation { path: path.into(), message }])
}

/// Builds the initial state and applies every startup check.
pub fn prepare(cfg: &SimConfig) -> Result<RunPlan> {
    let data = InitialData::build(cfg)?;
    let assumptions = data.assumptions();
    if !(assumptions.a1 && assumptions.a2) {
        return Err(SimError::Assumptions(assumptions.messages.join("; ")));
    }
    if !assumptions.a3 && !cfg.override_certified {
        return Err(SimError::Assumptions(assumptions.messages.join("; ")));
    }
    let initial = data.state(cfg.tolerances.neutrality)?;
    let (horizon, envelope) = horizon_report(&assumptions.summary, cfg.horizon)?;

    let t_end = cfg.time.t_end;
    let certified = horizon.certified_end.value().unwrap_or(f64::INFINITY);
    let uncertified = cfg.override_certified && t_end > certified;
    let t_stop = if cfg.override_certified { t_end } else { t_end.min(certified) };

    let g = initial.f.grid;
    let dx = g.dx();
    let mut problems = Vec::new();
    if !cfg.override_certified && assumptions.summary.f_sup > 0.0 {
        let p_env = envelope.p_at(t_stop);
        let usable = g.v_max - BOUNDARY_LAYERS as f64 * g.dv1().max(g.dv2());
        if !(p_env <= usable) {
            problems.push(ConfigViolation {
                path: "grid.v_max".into(),
                message: format!(
                    "envelope momentum support {p_env} at t = {t_stop} exceeds the usable velocity range {usable}"
                ),
            });
        }
    }
    // every support moves at speed below one
    let nodes = g.x_axis().nodes();
    let threshold = cfg.tolerances.support_threshold * assumptions.summary.f_sup;
    let row = g.nv1 * g.nv2;
    let occupied = |i: usize| {
        initial.inv.alpha[i] != 0.0
            || initial.inv.beta[i] != 0.0
            || initial.n[i] != 0.0
            || initial.f.values[i * row..(i + 1) * row].iter().any(|&v| v > threshold)
    };
    let inner = (g.x_min + BOUNDARY_LAYERS as f64 * dx, g.x_max - BOUNDARY_LAYERS as f64 * dx);
    if let (Some(lo), Some(hi)) = ((0..g.nx).find(|&i| occupied(i)), (0..g.nx).rev().find(|&i| occupied(i))) {
        if nodes[lo] - t_stop < inner.0 {
            problems.push(ConfigViolation {
                path: "grid.x_min".into(),
                message: format!("support edge {} can reach {} by t = {t_stop}, past {}", nodes[lo], nodes[lo] - t_stop, inner.0),
            });
        }
        if nodes[hi] + t_stop > inner.1 {
            problems.push(ConfigViolation {
                path: "grid.x_max".into(),
                message: format!("support edge {} can reach {} by t = {t_stop}, past {}", nodes[hi], nodes[hi] + t_stop, inner.1),
            });
        }
    }
    if !problems.is_empty() {
        return Err(SimError::Config(problems));
    }

    let nominal = cfg.time.nominal_dt(dx);
    let steps = if t_stop > 0.0 { (t_stop / nominal).ceil().max(1.0) as usize } else { 0 };
    let dt = if steps > 0 { t_stop / steps as f64 } else { 0.0 };
    let params = cfg.step_params(dt, assumptions.summary.f_sup);
    Ok(RunPlan { initial, assumptions, horizon, envelope, t_stop, dt, steps, uncertified, params })
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub mode: Mode,
    pub plan: RunPlan,
    pub frames: Vec<DiagnosticFrame>,
    pub snapshots: Vec<Snapshot>,
    /// Requested snapshot times past the end of the run.
    pub skipped_snapshots: Vec<f64>,
    pub abort: Option<Abort>,
    pub picard: Option<PicardTrace>,
    /// Last accepted state.
    pub last: SimState,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.abort.as_ref().map_or(0, |a| a.exit_code)
    }

    /// Frames with at least one failed estimate.
    pub fn bound_violations(&self) -> usize {
        self.frames.iter().filter(|f| !f.ok_all).count()
    }

    pub fn support_growth_ok(&self, tol: f64) -> bool {
        support_growth_check(&self.frames, tol)
    }
}

/// Step index nearest to each requested time; `None` past the run.
fn match_snapshots(requests: &[f64], dt: f64, steps: usize) -> Vec<(f64, Option<usize>)> {
    requests
        .iter()
        .map(|&s| {
            let k = if dt > 0.0 { (s / dt).round() } else { 0.0 };
            (s, if k <= steps as f64 { Some(k as usize) } else { None })
        })
        .collect()
}

struct Recorder<'a> {
    cfg: &'a SimConfig,
    plan: &'a RunPlan,
    wanted: Vec<(f64, Option<usize>)>,
    frames: Vec<DiagnosticFrame>,
    snapshots: Vec<Snapshot>,
}

impl Recorder<'_> {
    fn frame(&mut self, s: &SimState) {
        let tol = self.cfg.tolerances.bounds();
        let summary = self.plan.assumptions.summary;
        self.frames.push(bound_check_frame(s, &summary, &self.plan.envelope, &tol, self.plan.params.support_threshold));
    }

    fn snapshot(&mut self, s: &SimState, step: usize) {
        let requested: Vec<f64> =
            self.wanted.iter().filter(|(_, k)| *k == Some(step)).map(|(t, _)| *t).collect();
        if !requested.is_empty() {
            self.snapshots.push(Snapshot { requested, step, t: s.t, rows: snapshot_rows(s) });
        }
    }

    fn skipped(&self, reached: usize) -> Vec<f64> {
        self.wanted.iter().filter(|(_, k)| k.map_or(true, |k| k > reached)).map(|(t, _)| *t).collect()
    }
}

/// Runs a configuration in its solver mode.
///
/// Startup failures are returned as errors; failures inside the loop are
/// recorded in [`RunOutcome::abort`].
pub fn run(cfg: &SimConfig) -> Result<RunOutcome> {
    let plan = prepare(cfg)?;
    match cfg.solver.mode {
        Mode::Direct => Ok(run_direct(cfg, plan)),
        Mode::Picard => run_picard(cfg, plan),
    }
}

fn run_direct(cfg: &SimConfig, plan: RunPlan) -> RunOutcome {
    let every = cfg.output.every.max(1);
    let mut rec = Recorder {
        cfg,
        plan: &plan,
        wanted: match_snapshots(&cfg.output.snapshots, plan.dt, plan.steps),
        frames: Vec::new(),
        snapshots: Vec::new(),
    };
    let mut state = plan.initial.clone();
    rec.frame(&state);
    rec.snapshot(&state, 0);
    let mut abort = None;
    for step in 1..=plan.steps {
        match step_coupled(&state, &plan.params) {
            Ok(next) => state = next,
            Err(e) => {
                abort = Some(Abort::new(&e, state.t, state.step));
                break;
            }
        }
        if step % every == 0 || step == plan.steps {
            rec.frame(&state);
        }
        rec.snapshot(&state, step);
    }
    if abort.is_some() && rec.frames.last().map(|f| f.step) != Some(state.step) {
        rec.frame(&state);
    }
    let skipped_snapshots = rec.skipped(state.step);
    let (frames, snapshots) = (rec.frames, rec.snapshots);
    RunOutcome { mode: Mode::Direct, plan, frames, snapshots, skipped_snapshots, abort, picard: None, last: state }
}

fn run_picard(cfg: &SimConfig, plan: RunPlan) -> Result<RunOutcome> {
    let t_final = cfg.solver.picard.t_final.unwrap_or(plan.t_stop);
    if t_final > plan.t_stop {
        return Err(violation(
            "solver.picard.t_final",
            format!("t_final = {t_final} lies past the end of the run {}", plan.t_stop),
        ));
    }
    let nominal = cfg.time.nominal_dt(plan.initial.f.grid.dx());
    let steps = (t_final / nominal).ceil().max(1.0) as usize;
    let dt = t_final / steps as f64;
    let params = StepParams { dt, ..plan.params };
    let mut rec = Recorder {
        cfg,
        plan: &plan,
        wanted: match_snapshots(&cfg.output.snapshots, dt, steps)
            .into_iter()
            .map(|(t, k)| (t, k.map(|k| if 2 * k < steps { 0 } else { steps })))
            .collect(),
        frames: Vec::new(),
        snapshots: Vec::new(),
    };
    rec.frame(&plan.initial);
    rec.snapshot(&plan.initial, 0);
    let p = &cfg.solver.picard;
    let (last, abort, trace) = match picard_solve(&plan.initial, &params, t_final, steps, p.tol, p.max_iter) {
        Ok(out) => {
            rec.frame(&out.state);
            rec.snapshot(&out.state, steps);
            (out.state, None, Some(out.trace))
        }
        Err(e) => {
            let trace = match &e {
                SimError::PicardNonConvergence { trace, .. } => Some((**trace).clone()),
                _ => None,
            };
            (plan.initial.clone(), Some(Abort::new(&e, 0.0, 0)), trace)
        }
    };
    let skipped_snapshots = rec.skipped(last.step);
    let (frames, snapshots) = (rec.frames, rec.snapshots);
    Ok(RunOutcome { mode: Mode::Picard, plan, frames, snapshots, skipped_snapshots, abort, picard: trace, last })
}

/// Horizon report for the `horizon` command: the configured summary if
/// one is given, otherwise the norms of the gridded initial data.
pub fn horizon_only(cfg: &SimConfig) -> Result<(HorizonReport, Option<AssumptionReport>)> {
    let assumptions = match cfg.summary {
        Some(_) => None,
        None => {
            let d = InitialData::build(cfg)?;
            Some(d.assumptions())
        }
    };
    let s = cfg.summary.unwrap_or_else(|| assumptions.as_ref().expect("measured").summary);
    let (report, _) = horizon_report(&s, cfg.horizon)?;
    Ok((report, assumptions))
}

/// Whether `h` is finite, for summaries.
pub fn horizon_value(h: Horizon) -> Option<f64> {
    h.value()
}
