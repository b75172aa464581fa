//! Riemann-invariant transport for the diagonal field system.
//!
//! `α` is carried at speed `−cos β`, `β` at speed `cos α`, and both pick up
//! the same source term along their characteristics. One step traces every
//! node back to its foot and integrates the source by the trapezoid rule.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;

use crate::error::{Result, SimError};
use crate::interp::{interp1, Axis, Interpolation};
use crate::kinetic::{sup_abs, RawFields, BOUNDARY_LAYERS};
use crate::transform::{from_theta, inhomogeneous_rhs, SourceCoefficients};

/// Riemann invariants `α = θ₂ − θ_B`, `β = θ₂ + θ_B` on the spatial grid.
#[derive(Clone, Debug, PartialEq)]
pub struct InvariantGrid {
    pub axis: Axis,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Backward feet of the two field characteristics through one node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldCharacteristic {
    pub xi: f64,
    pub eta: f64,
}

/// Numerical knobs of one field step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldStepParams {
    pub dt: f64,
    pub kind: Interpolation,
    pub eps_guard: f64,
    /// Largest `|α|`, `|β|` tolerated on the outer nodes.
    pub boundary_tol: f64,
}

impl InvariantGrid {
    pub fn zeros(axis: Axis) -> Self {
        Self { axis, alpha: vec![0.0; axis.len], beta: vec![0.0; axis.len] }
    }

    pub fn from_angles(axis: Axis, theta2: &[f64], theta_b: &[f64]) -> Self {
        Self {
            axis,
            alpha: theta2.iter().zip(theta_b).map(|(a, b)| a - b).collect(),
            beta: theta2.iter().zip(theta_b).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn theta2(&self) -> Vec<f64> {
        self.alpha.iter().zip(&self.beta).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn theta_b(&self) -> Vec<f64> {
        self.alpha.iter().zip(&self.beta).map(|(a, b)| 0.5 * (b - a)).collect()
    }

    /// `max |θ₂| + |θ_B|`, which equals `max(|α|, |β|)` node by node.
    pub fn angle_sum_max(&self) -> f64 {
        sup_abs(&self.alpha).max(sup_abs(&self.beta))
    }

    /// Inverts the angles to `D₂`, `B` given the current `D₁`.
    pub fn to_raw(&self, d1: &[f64]) -> Result<RawFields> {
        let (t2, tb) = (self.theta2(), self.theta_b());
        let mut d2 = Vec::with_capacity(d1.len());
        let mut b = Vec::with_capacity(d1.len());
        for i in 0..d1.len() {
            let (a, c) = from_theta(t2[i], tb[i], d1[i]).map_err(|e| match e {
                SimError::BlowUpProximity { angle_sum, limit, .. } => {
                    SimError::BlowUpProximity { x: Some(self.axis.node(i)), angle_sum, limit }
                }
                other => other,
            })?;
            d2.push(a);
            b.push(c);
        }
        Ok(RawFields { d1: d1.to_vec(), d2, b })
    }

    /// Nodal source term shared by both equations.
    pub fn source_term(&self, k: &[SourceCoefficients]) -> Vec<f64> {
        self.alpha
            .iter()
            .zip(&self.beta)
            .zip(k)
            .map(|((a, b), k)| inhomogeneous_rhs(0.5 * (a + b), 0.5 * (b - a), *k))
            .collect()
    }

    /// Errors when `|θ₂| + |θ_B|` enters the guard band below `π/2`.
    pub fn check_guard(&self, eps_guard: f64) -> Result<()> {
        let limit = FRAC_PI_2 - eps_guard;
        for i in 0..self.alpha.len() {
            let s = self.alpha[i].abs().max(self.beta[i].abs());
            if !(s < limit) {
                return Err(SimError::BlowUpProximity { x: Some(self.axis.node(i)), angle_sum: s, limit });
            }
        }
        Ok(())
    }

    fn boundary_max(&self) -> f64 {
        let n = self.alpha.len();
        let k = BOUNDARY_LAYERS.min(n);
        (0..k)
            .chain(n - k..n)
            .map(|i| self.alpha[i].abs().max(self.beta[i].abs()))
            .fold(0.0, f64::max)
    }
}

/// A quantity known at `t` and `t + dt`, read at the RK4 stage times.
struct TwoLevel<'a> {
    axis: Axis,
    kind: Interpolation,
    start: &'a [f64],
    end: &'a [f64],
}

impl TwoLevel<'_> {
    /// `w` is the fraction of the step elapsed since `t`.
    fn at(&self, x: f64, w: f64) -> f64 {
        let a = interp1(&self.axis, self.start, x, self.kind);
        if w == 0.0 {
            return a;
        }
        let b = interp1(&self.axis, self.end, x, self.kind);
        (1.0 - w) * a + w * b
    }
}

/// Backward RK4 from `t + dt` to `t` for `dy/dτ = speed(angle(τ, y))`.
fn trace_back(x: f64, dt: f64, angle: &TwoLevel<'_>, speed: impl Fn(f64) -> f64) -> f64 {
    let h = -dt;
    let k1 = speed(angle.at(x, 1.0));
    let k2 = speed(angle.at(x + 0.5 * h * k1, 0.5));
    let k3 = speed(angle.at(x + 0.5 * h * k2, 0.5));
    let k4 = speed(angle.at(x + h * k3, 0.0));
    x + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
}

fn xi_speed(beta: f64) -> f64 {
    -beta.cos()
}

fn eta_speed(alpha: f64) -> f64 {
    alpha.cos()
}

fn foot_in_domain(axis: &Axis, x: f64, foot: f64, name: &str) -> Result<f64> {
    if foot >= axis.origin && foot <= axis.last() {
        Ok(foot)
    } else {
        Err(SimError::DomainExit(format!("{name}-characteristic from x = {x} has foot {foot} outside the grid")))
    }
}

/// Foot `ξ(t)` of the `α`-characteristic through `(t + dt, x)`, given `β`
/// at both ends of the step.
pub fn trace_xi(x: f64, dt: f64, axis: Axis, kind: Interpolation, beta_start: &[f64], beta_end: &[f64]) -> Result<f64> {
    let lvl = TwoLevel { axis, kind, start: beta_start, end: beta_end };
    foot_in_domain(&axis, x, trace_back(x, dt, &lvl, xi_speed), "xi")
}

/// Foot `η(t)` of the `β`-characteristic through `(t + dt, x)`.
pub fn trace_eta(x: f64, dt: f64, axis: Axis, kind: Interpolation, alpha_start: &[f64], alpha_end: &[f64]) -> Result<f64> {
    let lvl = TwoLevel { axis, kind, start: alpha_start, end: alpha_end };
    foot_in_domain(&axis, x, trace_back(x, dt, &lvl, eta_speed), "eta")
}

/// Feet of both characteristics for every node, given the invariants at the
/// two ends of the step. Feet may leave the grid, where the data are vacuum.
pub fn trace_feet(start: &InvariantGrid, end: &InvariantGrid, dt: f64, kind: Interpolation) -> Vec<FieldCharacteristic> {
    let axis = start.axis;
    let beta = TwoLevel { axis, kind, start: &start.beta, end: &end.beta };
    let alpha = TwoLevel { axis, kind, start: &start.alpha, end: &end.alpha };
    (0..axis.len)
        .into_par_iter()
        .map(|i| {
            let x = axis.node(i);
            FieldCharacteristic {
                xi: trace_back(x, dt, &beta, xi_speed),
                eta: trace_back(x, dt, &alpha, eta_speed),
            }
        })
        .collect()
}

fn transport(
    inv: &InvariantGrid,
    feet: &[FieldCharacteristic],
    src_start: &[f64],
    src_end: Option<&[f64]>,
    dt: f64,
    kind: Interpolation,
) -> InvariantGrid {
    let axis = inv.axis;
    let (alpha, beta): (Vec<f64>, Vec<f64>) = feet
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let s_xi = interp1(&axis, src_start, c.xi, kind);
            let s_eta = interp1(&axis, src_start, c.eta, kind);
            let (ga, gb) = match src_end {
                None => (dt * s_xi, dt * s_eta),
                Some(e) => (0.5 * dt * (s_xi + e[i]), 0.5 * dt * (s_eta + e[i])),
            };
            (
                interp1(&axis, &inv.alpha, c.xi, kind) + ga,
                interp1(&axis, &inv.beta, c.eta, kind) + gb,
            )
        })
        .unzip();
    InvariantGrid { axis, alpha, beta }
}

/// Advances `α`, `β` from `t` to `t + dt`.
///
/// `k_start` and `k_end` are the source coefficients per node at the two
/// time levels. A predictor with frozen speeds and an explicit source gives
/// the end level used to correct both the feet and the trapezoid source.
pub fn field_step(
    inv: &InvariantGrid,
    k_start: &[SourceCoefficients],
    k_end: &[SourceCoefficients],
    p: FieldStepParams,
) -> Result<InvariantGrid> {
    let src_start = inv.source_term(k_start);
    let feet = trace_feet(inv, inv, p.dt, p.kind);
    let pred = transport(inv, &feet, &src_start, None, p.dt, p.kind);

    let feet = trace_feet(inv, &pred, p.dt, p.kind);
    let src_pred = pred.source_term(k_end);
    let next = transport(inv, &feet, &src_start, Some(&src_pred), p.dt, p.kind);

    next.check_guard(p.eps_guard)?;
    let edge = next.boundary_max();
    if edge > p.boundary_tol {
        return Err(SimError::DomainExit(format!(
            "field invariants reached the grid boundary (max {edge:e} > {:e})",
            p.boundary_tol
        )));
    }
    Ok(next)
}
