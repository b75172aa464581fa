//! Per-frame evaluation of the a priori estimates.
//!
//! Measured quantities sit on the left of every inequality; initial-data
//! norms and the envelope `P(t)`, `Θ(t)` sit on the right.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::coupling::{check_separation, d_sup, SimState};
use crate::field_solver::InvariantGrid;
use crate::horizon::{Envelope, InitialDataSummary};
use crate::kinetic::sup_abs;

/// Slack allowed when comparing measured quantities with their bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundTolerances {
    /// Relative overshoot of `max f` over `‖f^in‖∞` blamed on interpolation.
    pub interp_overshoot: f64,
    /// Absolute slack on every other inequality.
    pub bound_tol: f64,
    /// Absolute slack on measured `P(t)` against the envelope.
    pub envelope_tol: f64,
}

impl Default for BoundTolerances {
    fn default() -> Self {
        Self { interp_overshoot: 1e-3, bound_tol: 1e-9, envelope_tol: 1e-3 }
    }
}

/// One row of `frames.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticFrame {
    pub step: usize,
    pub t: f64,
    pub f_max: f64,
    pub f_min: f64,
    pub f_l1: f64,
    pub rho_sup: f64,
    pub j_sup: f64,
    pub d1_sup: f64,
    pub d2_sup: f64,
    pub b_sup: f64,
    pub theta2_sup: f64,
    pub theta_b_sup: f64,
    pub angle_sum_max: f64,
    pub k0_sup: f64,
    pub k1_sup: f64,
    pub k2_sup: f64,
    pub p_measured: f64,
    pub p_grid: f64,
    pub p_envelope: f64,
    pub theta_envelope: f64,
    /// `P + ∫₀ᵗ ‖D‖∞ + ‖B‖∞`.
    pub support_growth_bound: f64,
    pub separation_margin: Option<f64>,
    pub u_max: f64,
    pub w_max: f64,
    pub continuity_residual: f64,
    pub d1_gap: f64,
    pub ok_f_sup: bool,
    pub ok_rho: bool,
    pub ok_j: bool,
    pub ok_d1: bool,
    pub ok_k: bool,
    pub ok_d2: bool,
    pub ok_b: bool,
    pub ok_angle_sum: bool,
    pub ok_support_growth: bool,
    pub ok_envelope: bool,
    pub ok_uw_finite: bool,
    /// Conjunction of every flag above.
    pub ok_all: bool,
}

/// `u = −(cos α + cos β) ∂ₓα` and `w = (cos α + cos β) ∂ₓβ` on the nodes.
pub fn gradient_quantities(inv: &InvariantGrid) -> (Vec<f64>, Vec<f64>) {
    let dx = inv.axis.step;
    let n = inv.alpha.len();
    let deriv = |v: &[f64], i: usize| -> f64 {
        if n < 3 {
            0.0
        } else if i == 0 {
            (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dx)
        } else if i == n - 1 {
            (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * dx)
        } else {
            (v[i + 1] - v[i - 1]) / (2.0 * dx)
        }
    };
    let mut u = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for i in 0..n {
        let c = inv.alpha[i].cos() + inv.beta[i].cos();
        u.push(-c * deriv(&inv.alpha, i));
        w.push(c * deriv(&inv.beta, i));
    }
    (u, w)
}

/// Evaluates every estimate on one state.
pub fn bound_check_frame(
    state: &SimState,
    s: &InitialDataSummary,
    env: &Envelope,
    tol: &BoundTolerances,
    support_threshold: f64,
) -> DiagnosticFrame {
    let m = &state.moments;
    let (p_env, theta_env) = env.eval(state.t);
    let q = PI * s.f_sup * p_env * p_env;
    let slack = tol.bound_tol;

    let k0_sup = state.k.iter().fold(0.0, |a: f64, k| a.max(k.k0.abs()));
    let k1_sup = state.k.iter().fold(0.0, |a: f64, k| a.max(k.k1.abs()));
    let k2_sup = state.k.iter().fold(0.0, |a: f64, k| a.max(k.k2.abs()));
    let d1_sup = sup_abs(&state.raw.d1);
    let d2_sup = sup_abs(&state.raw.d2);
    let b_sup = sup_abs(&state.raw.b);
    let rho_sup = sup_abs(&m.rho);
    let j_sup = m.j_sup();
    let f_max = state.f.max();
    let angle_sum_max = state.inv.angle_sum_max();
    let (u, w) = gradient_quantities(&state.inv);
    let (u_max, w_max) = (sup_abs(&u), sup_abs(&w));
    let p_measured = state.p_measured;
    let support_growth_bound = s.p0 + state.force_integral;

    let ok_f_sup = f_max <= s.f_sup * (1.0 + tol.interp_overshoot) + slack;
    let ok_rho = rho_sup <= q + s.n_sup + slack;
    let ok_j = j_sup <= q + slack;
    let ok_d1 = d1_sup <= s.d1_bound() + slack;
    let ok_k = k0_sup <= q + s.n_sup + slack && k1_sup <= q + slack && k2_sup <= q + slack;
    let tan_env = theta_env.tan();
    let ok_d2 = d2_sup <= (1.0 + s.d1_bound().powi(2)).sqrt() * tan_env + slack || theta_env >= PI / 2.0;
    let ok_b = b_sup <= tan_env + slack || theta_env >= PI / 2.0;
    let ok_angle_sum = angle_sum_max <= theta_env + slack;
    let ok_support_growth = p_measured <= support_growth_bound + tol.envelope_tol;
    let ok_envelope = p_measured <= p_env + tol.envelope_tol;
    let ok_uw_finite = u_max.is_finite() && w_max.is_finite();
    let ok_all = ok_f_sup
        && ok_rho
        && ok_j
        && ok_d1
        && ok_k
        && ok_d2
        && ok_b
        && ok_angle_sum
        && ok_support_growth
        && ok_envelope
        && ok_uw_finite;

    DiagnosticFrame {
        step: state.step,
        t: state.t,
        f_max,
        f_min: state.f.values.iter().copied().fold(f64::INFINITY, f64::min),
        f_l1: state.f.l1(),
        rho_sup,
        j_sup,
        d1_sup,
        d2_sup,
        b_sup,
        theta2_sup: sup_abs(&state.inv.theta2()),
        theta_b_sup: sup_abs(&state.inv.theta_b()),
        angle_sum_max,
        k0_sup,
        k1_sup,
        k2_sup,
        p_measured,
        p_grid: state.f.momentum_support(support_threshold),
        p_envelope: p_env,
        theta_envelope: theta_env,
        support_growth_bound,
        separation_margin: check_separation(state, support_threshold).margin,
        u_max,
        w_max,
        continuity_residual: state.residual.residual,
        d1_gap: state.residual.d1_gap,
        ok_f_sup,
        ok_rho,
        ok_j,
        ok_d1,
        ok_k,
        ok_d2,
        ok_b,
        ok_angle_sum,
        ok_support_growth,
        ok_envelope,
        ok_uw_finite,
        ok_all,
    }
}

/// Whether every frame has `P_measured(t) ≤ P + ∫₀ᵗ ‖D‖∞ + ‖B‖∞ + tol`.
pub fn support_growth_check(frames: &[DiagnosticFrame], tol: f64) -> bool {
    frames.iter().all(|f| f.p_measured <= f.support_growth_bound + tol)
}

/// Summed `D` and `B` sup norms of a state, the integrand of the support bound.
pub fn force_sup(state: &SimState) -> f64 {
    d_sup(&state.raw) + sup_abs(&state.raw.b)
}
