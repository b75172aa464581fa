//! Coupled Vlasov/field evolution: direct co-stepping and Picard iteration.
//!
//! A direct step is split field first: the invariants are advanced with
//! sources at `t` and extrapolated sources at `t + dt`, then `f` is advanced
//! through fields interpolated linearly between the two levels, and the
//! moments and sources are recomputed from the new `f`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, SimError};
use crate::field_solver::{field_step, FieldStepParams, InvariantGrid};
use crate::interp::Interpolation;
use crate::kinetic::{
    compute_moments, continuity_residual, push_characteristic, sup_abs, vhat, CharacteristicState,
    ContinuityResidual, DistributionGrid, FieldInterval, Moments, RawFields,
};
use crate::transform::{sources, SourceCoefficients};

/// Per-step numerical settings shared by both solver modes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepParams {
    pub dt: f64,
    pub kind: Interpolation,
    pub eps_guard: f64,
    pub separation_floor: f64,
    /// Values of `f` at or below this count as outside the support.
    pub support_threshold: f64,
    /// Largest `|f|` tolerated on the outer grid layers.
    pub boundary_tol: f64,
    /// Largest `|α|`, `|β|` tolerated on the outer x-nodes.
    pub field_boundary_tol: f64,
}

impl StepParams {
    fn field(&self, dt: f64) -> FieldStepParams {
        FieldStepParams { dt, kind: self.kind, eps_guard: self.eps_guard, boundary_tol: self.field_boundary_tol }
    }
}

/// Quantities at `t − dt` needed to extrapolate across the next step.
#[derive(Clone, Debug)]
pub struct PreviousLevel {
    pub j1: Vec<f64>,
    pub k: Vec<SourceCoefficients>,
}

#[derive(Clone, Debug)]
pub struct SimState {
    pub t: f64,
    pub step: usize,
    pub f: DistributionGrid,
    pub inv: InvariantGrid,
    /// Neutralizing background on the x-nodes.
    pub n: Vec<f64>,
    pub moments: Moments,
    pub raw: RawFields,
    pub k: Vec<SourceCoefficients>,
    pub history: Option<PreviousLevel>,
    /// Characteristics started from every node where `f^in > 0`.
    pub markers: Vec<CharacteristicState>,
    /// Running maximum of `|V|` over the markers.
    pub p_measured: f64,
    /// `D₁` advanced by `∂ₜD₁ = −j₁` with the trapezoid rule in time.
    pub d1_evolved: Vec<f64>,
    /// `∫₀ᵗ ‖D‖∞ + ‖B‖∞`, trapezoid rule over steps.
    pub force_integral: f64,
    pub residual: ContinuityResidual,
}

/// Smallest distance between particle and field characteristic speeds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeparationReport {
    /// `None` when no node is occupied.
    pub margin: Option<f64>,
    pub at: Option<CharacteristicState>,
}

pub fn sources_on_grid(m: &Moments) -> Vec<SourceCoefficients> {
    (0..m.rho.len()).map(|i| sources(m.rho[i], m.j1[i], m.j2[i], m.d1[i])).collect()
}

/// `sup_x |D|` with `|D| = √(D₁² + D₂²)`.
pub fn d_sup(raw: &RawFields) -> f64 {
    raw.d1.iter().zip(&raw.d2).fold(0.0, |m, (a, b)| m.max(a.hypot(*b)))
}

/// Minimum of `min(cos α(x) − v̂₁, v̂₁ + cos β(x))` over nodes with
/// `f > threshold`.
pub fn separation_margin(f: &DistributionGrid, inv: &InvariantGrid, threshold: f64) -> SeparationReport {
    let g = f.grid;
    let (xa, a1, a2) = (g.x_axis(), g.v1_axis(), g.v2_axis());
    let row = g.nv1 * g.nv2;
    let per_row: Vec<Option<(f64, CharacteristicState)>> = f
        .values
        .par_chunks(row)
        .enumerate()
        .map(|(i, r)| {
            let (ca, cb) = (inv.alpha[i].cos(), inv.beta[i].cos());
            let mut best: Option<(f64, CharacteristicState)> = None;
            for j in 0..g.nv1 {
                for k in 0..g.nv2 {
                    if r[j * g.nv2 + k] > threshold {
                        let (v1, v2) = (a1.node(j), a2.node(k));
                        let h1 = vhat(v1, v2).0;
                        let m = (ca - h1).min(h1 + cb);
                        if best.map_or(true, |b| m < b.0) {
                            best = Some((m, CharacteristicState { x: xa.node(i), v1, v2 }));
                        }
                    }
                }
            }
            best
        })
        .collect();
    let best = per_row.into_iter().flatten().fold(None, |acc: Option<(f64, CharacteristicState)>, b| match acc {
        Some(a) if a.0 <= b.0 => Some(a),
        _ => Some(b),
    });
    SeparationReport { margin: best.map(|b| b.0), at: best.map(|b| b.1) }
}

/// Separation report over the support of the state's distribution.
pub fn check_separation(state: &SimState, threshold: f64) -> SeparationReport {
    separation_margin(&state.f, &state.inv, threshold)
}

fn enforce_separation(rep: SeparationReport, floor: f64) -> Result<()> {
    match (rep.margin, rep.at) {
        (Some(m), Some(z)) if !(m > floor) => Err(SimError::SeparationViolation {
            x: z.x,
            v1: z.v1,
            v2: z.v2,
            margin: m,
            floor,
        }),
        _ => Ok(()),
    }
}

fn trapezoid_step(a: &[f64], b: &[f64], dt: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 0.5 * dt * (x + y)).collect()
}

impl SimState {
    /// Initial state from `f^in`, the initial invariants and the background.
    ///
    /// Fails when the total charge is not zero to `neutrality_tol`, since
    /// `D₁` would then not vanish to the right of the support.
    pub fn new(f: DistributionGrid, inv: InvariantGrid, n: Vec<f64>, neutrality_tol: f64) -> Result<Self> {
        let moments = compute_moments(&f, &n);
        let edge = moments.d1.last().copied().unwrap_or(0.0);
        if !(edge.abs() <= neutrality_tol) {
            return Err(SimError::Config(vec![crate::error::ConfigViolation {
                path: "initial.background".into(),
                message: format!("total charge {edge:e} is not zero (tolerance {neutrality_tol:e})"),
            }]));
        }
        let raw = inv.to_raw(&moments.d1)?;
        let k = sources_on_grid(&moments);
        let g = f.grid;
        let (xa, a1, a2) = (g.x_axis(), g.v1_axis(), g.v2_axis());
        let mut markers = Vec::new();
        for i in 0..g.nx {
            for j in 0..g.nv1 {
                for kk in 0..g.nv2 {
                    if f.at(i, j, kk) > 0.0 {
                        markers.push(CharacteristicState { x: xa.node(i), v1: a1.node(j), v2: a2.node(kk) });
                    }
                }
            }
        }
        let p_measured = markers.iter().fold(0.0, |m: f64, z| m.max(z.v1.hypot(z.v2)));
        let d1_evolved = moments.d1.clone();
        Ok(Self {
            t: 0.0,
            step: 0,
            f,
            inv,
            n,
            moments,
            raw,
            k,
            history: None,
            markers,
            p_measured,
            d1_evolved,
            force_integral: 0.0,
            residual: ContinuityResidual { residual: 0.0, d1_gap: 0.0 },
        })
    }

    pub fn nx(&self) -> usize {
        self.f.grid.nx
    }
}

/// One field-first coupled step of length `p.dt`.
pub fn step_coupled(state: &SimState, p: &StepParams) -> Result<SimState> {
    let dt = p.dt;
    let g = state.f.grid;
    let axis = g.x_axis();

    // sources at t + dt by linear extrapolation once a previous level exists
    let k_next: Vec<SourceCoefficients> = match &state.history {
        Some(h) => state
            .k
            .iter()
            .zip(&h.k)
            .map(|(a, b)| SourceCoefficients { k0: 2.0 * a.k0 - b.k0, k1: 2.0 * a.k1 - b.k1, k2: 2.0 * a.k2 - b.k2 })
            .collect(),
        None => state.k.clone(),
    };
    let inv = field_step(&state.inv, &state.k, &k_next, p.field(dt))?;

    // provisional D₁(t + dt) from ∂ₜD₁ = −j₁, Adams–Bashforth once possible
    let j1 = &state.moments.j1;
    let d1_pred: Vec<f64> = match &state.history {
        Some(h) => (0..j1.len()).map(|i| state.moments.d1[i] - dt * (1.5 * j1[i] - 0.5 * h.j1[i])).collect(),
        None => (0..j1.len()).map(|i| state.moments.d1[i] - dt * j1[i]).collect(),
    };
    let raw_pred = inv.to_raw(&d1_pred)?;
    let f = crate::kinetic::semi_lagrangian_step(
        &state.f,
        &FieldInterval::new(axis, p.kind, &state.raw, &raw_pred),
        dt,
        p.kind,
        p.boundary_tol,
    )?;

    let moments = compute_moments(&f, &state.n);
    let raw = inv.to_raw(&moments.d1)?;
    let k = sources_on_grid(&moments);

    let interval = FieldInterval::new(axis, p.kind, &state.raw, &raw);
    let markers: Vec<CharacteristicState> =
        state.markers.par_iter().map(|z| push_characteristic(*z, dt, &interval)).collect();
    let (lo, hi) = (axis.origin, axis.last());
    if let Some(z) = markers.iter().find(|z| !(z.x >= lo && z.x <= hi)) {
        return Err(SimError::DomainExit(format!("particle characteristic left the grid at x = {}", z.x)));
    }
    let p_measured = markers.iter().fold(state.p_measured, |m, z| m.max(z.v1.hypot(z.v2)));

    let gain = trapezoid_step(&state.moments.j1, &moments.j1, dt);
    let d1_evolved: Vec<f64> = state.d1_evolved.iter().zip(&gain).map(|(d, g)| d - g).collect();
    let force = |r: &RawFields| d_sup(r) + sup_abs(&r.b);
    let force_integral = state.force_integral + 0.5 * dt * (force(&state.raw) + force(&raw));
    let mut residual = continuity_residual(&state.moments, &moments, dt, g.dx());
    residual.d1_gap = d1_evolved.iter().zip(&moments.d1).fold(0.0, |m, (a, b)| m.max((a - b).abs()));

    let next = SimState {
        t: state.t + dt,
        step: state.step + 1,
        f,
        inv,
        n: state.n.clone(),
        moments,
        raw,
        k,
        history: Some(PreviousLevel { j1: state.moments.j1.clone(), k: state.k.clone() }),
        markers,
        p_measured,
        d1_evolved,
        force_integral,
        residual,
    };
    enforce_separation(check_separation(&next, p.support_threshold), p.separation_floor)?;
    Ok(next)
}

/// Sup-norm changes between consecutive Picard iterates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PicardIterate {
    pub n: usize,
    /// `max over levels ‖fⁿ − fⁿ⁻¹‖∞`.
    pub delta_f: f64,
    /// `max over levels ‖αⁿ − αⁿ⁻¹‖∞ + ‖βⁿ − βⁿ⁻¹‖∞`.
    pub delta_field: f64,
    /// Field change at the final time over `∫₀ᵀ ‖fⁿ − fⁿ⁻¹‖∞`.
    pub field_over_f_integral: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PicardTrace {
    pub iterations: Vec<PicardIterate>,
    pub converged: bool,
}

/// One time level of a Picard iterate.
#[derive(Clone, Debug)]
struct Level {
    f: DistributionGrid,
    inv: InvariantGrid,
    moments: Moments,
    raw: RawFields,
    k: Vec<SourceCoefficients>,
}

fn diff_sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn field_diff(a: &InvariantGrid, b: &InvariantGrid) -> f64 {
    diff_sup(&a.alpha, &b.alpha) + diff_sup(&a.beta, &b.beta)
}

#[derive(Clone, Debug)]
pub struct PicardOutcome {
    /// Converged state at the final time.
    pub state: SimState,
    pub trace: PicardTrace,
    pub dt: f64,
    pub steps: usize,
}

/// Picard iteration on `[0, t_final]` with `steps` equal steps.
///
/// The markers of `initial` are pushed through the fields of the final
/// iterate to measure the momentum support.
///
/// Iterate 0 is the initial data held constant in time. Iterate `n` moves
/// `f` through the fields of iterate `n − 1`, then solves the field system
/// with the sources of its own `f`.
pub fn picard_solve(
    initial: &SimState,
    p: &StepParams,
    t_final: f64,
    steps: usize,
    tol: f64,
    max_iter: usize,
) -> Result<PicardOutcome> {
    if steps == 0 || !(t_final > 0.0) {
        return Err(SimError::Domain(format!("picard needs t_final > 0 and steps > 0 (got {t_final}, {steps})")));
    }
    let dt = t_final / steps as f64;
    let g = initial.f.grid;
    let axis = g.x_axis();
    let level0 = Level {
        f: initial.f.clone(),
        inv: initial.inv.clone(),
        moments: initial.moments.clone(),
        raw: initial.raw.clone(),
        k: initial.k.clone(),
    };
    let mut prev: Vec<Level> = vec![level0.clone(); steps + 1];
    let mut trace = PicardTrace::default();

    for n in 1..=max_iter {
        let mut f_levels = vec![level0.f.clone()];
        for m in 0..steps {
            let interval = FieldInterval::new(axis, p.kind, &prev[m].raw, &prev[m + 1].raw);
            let next = crate::kinetic::semi_lagrangian_step(&f_levels[m], &interval, dt, p.kind, p.boundary_tol)?;
            f_levels.push(next);
        }
        let moments: Vec<Moments> = f_levels.iter().map(|f| compute_moments(f, &initial.n)).collect();
        let ks: Vec<Vec<SourceCoefficients>> = moments.iter().map(sources_on_grid).collect();
        let mut invs = vec![level0.inv.clone()];
        for m in 0..steps {
            invs.push(field_step(&invs[m], &ks[m], &ks[m + 1], p.field(dt))?);
        }
        let mut levels = Vec::with_capacity(steps + 1);
        for (((f, inv), mo), k) in f_levels.into_iter().zip(invs).zip(moments).zip(ks) {
            let raw = inv.to_raw(&mo.d1)?;
            levels.push(Level { f, inv, moments: mo, raw, k });
        }

        let df: Vec<f64> = levels.iter().zip(&prev).map(|(a, b)| diff_sup(&a.f.values, &b.f.values)).collect();
        let dfield = levels.iter().zip(&prev).map(|(a, b)| field_diff(&a.inv, &b.inv)).fold(0.0, f64::max);
        let df_int: f64 = df.windows(2).map(|w| 0.5 * dt * (w[0] + w[1])).sum();
        let dfield_end = field_diff(&levels[steps].inv, &prev[steps].inv);
        let it = PicardIterate {
            n,
            delta_f: df.iter().copied().fold(0.0, f64::max),
            delta_field: dfield,
            field_over_f_integral: if df_int > 0.0 { dfield_end / df_int } else { 0.0 },
        };
        trace.iterations.push(it);
        prev = levels;
        if it.delta_f <= tol && it.delta_field <= tol {
            trace.converged = true;
            break;
        }
    }

    if !trace.converged {
        return Err(SimError::PicardNonConvergence { iterations: max_iter, trace: Box::new(trace) });
    }
    let force = |l: &Level| d_sup(&l.raw) + sup_abs(&l.raw.b);
    let force_integral: f64 = prev.windows(2).map(|w| 0.5 * dt * (force(&w[0]) + force(&w[1]))).sum();
    let mut markers = initial.markers.clone();
    let mut p_measured = initial.p_measured;
    for w in prev.windows(2) {
        let interval = FieldInterval::new(axis, p.kind, &w[0].raw, &w[1].raw);
        markers = markers.par_iter().map(|z| push_characteristic(*z, dt, &interval)).collect();
        p_measured = markers.iter().fold(p_measured, |m, z| m.max(z.v1.hypot(z.v2)));
    }
    let mut d1_evolved = level0.moments.d1.clone();
    for w in prev.windows(2) {
        for (d, g) in d1_evolved.iter_mut().zip(trapezoid_step(&w[0].moments.j1, &w[1].moments.j1, dt)) {
            *d -= g;
        }
    }
    let mut residual = continuity_residual(&prev[steps - 1].moments, &prev[steps].moments, dt, g.dx());
    let last = prev.pop().expect("at least one level");
    residual.d1_gap = diff_sup(&d1_evolved, &last.moments.d1);
    let state = SimState {
        t: t_final,
        step: steps,
        f: last.f,
        inv: last.inv,
        n: initial.n.clone(),
        moments: last.moments,
        raw: last.raw,
        k: last.k,
        history: None,
        markers,
        p_measured,
        d1_evolved,
        force_integral,
        residual,
    };
    enforce_separation(check_separation(&state, p.support_threshold), p.separation_floor)?;
    Ok(PicardOutcome { state, trace, dt, steps })
}
