//! Phase-space transport of the distribution function.
//!
//! `f(t, x, v1, v2)` lives on a tensor grid: nodes in `x` include both ends of
//! `[x_min, x_max]`, momentum nodes are cell centred on `[-v_max, v_max]²` so
//! that midpoint quadrature is exact for odd integrands. A step is the
//! backward characteristic evaluation `f(t+dt, z) = f(t, Z(t; t+dt, z))`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::interp::{Axis, Interpolation};
use crate::transform::RawFieldPoint;

/// Number of outermost node layers that must stay empty.
pub const BOUNDARY_LAYERS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub v_max: f64,
    pub nv1: usize,
    pub nv2: usize,
}

impl PhaseSpaceGrid {
    pub fn new(x_min: f64, x_max: f64, nx: usize, v_max: f64, nv1: usize, nv2: usize) -> Result<Self> {
        let g = Self { x_min, x_max, nx, v_max, nv1, nv2 };
        let mut problems = Vec::new();
        if nx < 4 || nv1 < 4 || nv2 < 4 {
            problems.push(format!("grid too coarse: nx = {nx}, nv1 = {nv1}, nv2 = {nv2} (need >= 4)"));
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            problems.push(format!("bad x bounds [{x_min}, {x_max}]"));
        }
        if !(v_max.is_finite() && v_max > 0.0) {
            problems.push(format!("bad v_max {v_max}"));
        }
        if problems.is_empty() {
            Ok(g)
        } else {
            Err(SimError::Domain(problems.join("; ")))
        }
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dv1(&self) -> f64 {
        2.0 * self.v_max / self.nv1 as f64
    }

    pub fn dv2(&self) -> f64 {
        2.0 * self.v_max / self.nv2 as f64
    }

    pub fn x_axis(&self) -> Axis {
        Axis::new(self.x_min, self.dx(), self.nx)
    }

    pub fn v1_axis(&self) -> Axis {
        Axis::new(-self.v_max + 0.5 * self.dv1(), self.dv1(), self.nv1)
    }

    pub fn v2_axis(&self) -> Axis {
        Axis::new(-self.v_max + 0.5 * self.dv2(), self.dv2(), self.nv2)
    }

    pub fn len(&self) -> usize {
        self.nx * self.nv1 * self.nv2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.nv1 + j) * self.nv2 + k
    }

    /// Trapezoid weights in `x`.
    pub fn x_weights(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.nx)
            .map(|i| if i == 0 || i == self.nx - 1 { 0.5 * dx } else { dx })
            .collect()
    }
}

/// Distribution function values on a [`PhaseSpaceGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionGrid {
    pub grid: PhaseSpaceGrid,
    pub values: Vec<f64>,
}

impl DistributionGrid {
    pub fn zeros(grid: PhaseSpaceGrid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: PhaseSpaceGrid, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let (xa, a1, a2) = (grid.x_axis(), grid.v1_axis(), grid.v2_axis());
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.nx {
            for j in 0..grid.nv1 {
                for k in 0..grid.nv2 {
                    values.push(f(xa.node(i), a1.node(j), a2.node(k)));
                }
            }
        }
        Self { grid, values }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.grid.index(i, j, k)]
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `∫∫∫ |f| dv dx`.
    pub fn l1(&self) -> f64 {
        self.weighted_sum(|v| v.abs())
    }

    /// `∫∫∫ f dv dx`.
    pub fn mass(&self) -> f64 {
        self.weighted_sum(|v| v)
    }

    fn weighted_sum(&self, g: impl Fn(f64) -> f64) -> f64 {
        let dv = self.grid.dv1() * self.grid.dv2();
        let row = self.grid.nv1 * self.grid.nv2;
        self.grid
            .x_weights()
            .iter()
            .zip(self.values.chunks(row))
            .map(|(w, r)| w * dv * r.iter().map(|&v| g(v)).sum::<f64>())
            .sum()
    }

    /// Separable tensor interpolation with zero extension.
    pub fn sample(&self, x: f64, v1: f64, v2: f64, kind: Interpolation) -> f64 {
        let g = &self.grid;
        let (xa, a1, a2) = (g.x_axis(), g.v1_axis(), g.v2_axis());
        let sx = xa.stencil(x, kind);
        let s1 = a1.stencil(v1, kind);
        let s2 = a2.stencil(v2, kind);
        let in_range = |i: isize, n: usize| i >= 0 && (i as usize) < n;
        sx.apply(kind, |i| {
            if !in_range(i, g.nx) {
                return 0.0;
            }
            s1.apply(kind, |j| {
                if !in_range(j, g.nv1) {
                    return 0.0;
                }
                let base = g.index(i as usize, j as usize, 0);
                s2.apply(kind, |k| {
                    if in_range(k, g.nv2) {
                        self.values[base + k as usize]
                    } else {
                        0.0
                    }
                })
            })
        })
    }

    /// Largest `|f|` on the outermost [`BOUNDARY_LAYERS`] layers of the grid.
    pub fn boundary_max(&self) -> f64 {
        let g = &self.grid;
        let edge = |i: usize, n: usize| i < BOUNDARY_LAYERS || i + BOUNDARY_LAYERS >= n;
        let mut m: f64 = 0.0;
        for i in 0..g.nx {
            for j in 0..g.nv1 {
                for k in 0..g.nv2 {
                    if edge(i, g.nx) || edge(j, g.nv1) || edge(k, g.nv2) {
                        m = m.max(self.at(i, j, k).abs());
                    }
                }
            }
        }
        m
    }

    /// Largest `|v|` over nodes with `f > threshold`; zero for an empty grid.
    pub fn momentum_support(&self, threshold: f64) -> f64 {
        self.support_extent(threshold, |_, v1, v2| v1.hypot(v2))
    }

    /// Largest `|x|` over nodes with `f > threshold`.
    pub fn x_support(&self, threshold: f64) -> f64 {
        self.support_extent(threshold, |x, _, _| x.abs())
    }

    fn support_extent(&self, threshold: f64, measure: impl Fn(f64, f64, f64) -> f64) -> f64 {
        let g = &self.grid;
        let (xa, a1, a2) = (g.x_axis(), g.v1_axis(), g.v2_axis());
        let mut m: f64 = 0.0;
        for i in 0..g.nx {
            for j in 0..g.nv1 {
                for k in 0..g.nv2 {
                    if self.at(i, j, k) > threshold {
                        m = m.max(measure(xa.node(i), a1.node(j), a2.node(k)));
                    }
                }
            }
        }
        m
    }
}

/// Physical fields on the spatial grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RawFields {
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub b: Vec<f64>,
}

impl RawFields {
    pub fn zeros(nx: usize) -> Self {
        Self { d1: vec![0.0; nx], d2: vec![0.0; nx], b: vec![0.0; nx] }
    }

    pub fn point(&self, i: usize) -> RawFieldPoint {
        RawFieldPoint::new(self.d1[i], self.d2[i], self.b[i])
    }

    /// `sup |D|` with `|D| = sqrt(D1² + D2²)`.
    pub fn d_sup(&self) -> f64 {
        self.d1.iter().zip(&self.d2).fold(0.0, |m, (a, b)| m.max(a.hypot(*b)))
    }

    pub fn b_sup(&self) -> f64 {
        sup_abs(&self.b)
    }

    /// Pointwise blend `(1 - w) * self + w * other`.
    pub fn lerp(&self, other: &Self, w: f64) -> Self {
        let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| (1.0 - w) * x + w * y).collect()
        };
        Self {
            d1: mix(&self.d1, &other.d1),
            d2: mix(&self.d2, &other.d2),
            b: mix(&self.b, &other.b),
        }
    }
}

pub(crate) fn sup_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Fields over one time step, linear in time between the two levels.
#[derive(Clone, Debug)]
pub struct FieldInterval {
    pub axis: Axis,
    pub kind: Interpolation,
    /// Levels at the start, midpoint and end of the step.
    levels: [RawFields; 3],
}

impl FieldInterval {
    pub fn new(axis: Axis, kind: Interpolation, start: &RawFields, end: &RawFields) -> Self {
        Self {
            axis,
            kind,
            levels: [start.clone(), start.lerp(end, 0.5), end.clone()],
        }
    }

    /// Fields frozen in time.
    pub fn constant(axis: Axis, kind: Interpolation, fields: &RawFields) -> Self {
        Self::new(axis, kind, fields, fields)
    }

    #[inline]
    fn at(&self, level: usize, x: f64) -> (f64, f64, f64) {
        let f = &self.levels[level];
        let st = self.axis.stencil(x, self.kind);
        let k = self.kind;
        let ax = &self.axis;
        (
            st.apply(k, |i| ax.get(&f.d1, i)),
            st.apply(k, |i| ax.get(&f.d2, i)),
            st.apply(k, |i| ax.get(&f.b, i)),
        )
    }
}

/// Point in phase space.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicState {
    pub x: f64,
    pub v1: f64,
    pub v2: f64,
}

/// Relativistic velocity `v / sqrt(1 + |v|²)`.
#[inline]
pub fn vhat(v1: f64, v2: f64) -> (f64, f64) {
    let g = (1.0 + v1 * v1 + v2 * v2).sqrt();
    (v1 / g, v2 / g)
}

/// Force `D + (v̂2 B, −v̂1 B)` on a unit charge.
#[inline]
pub fn lorentz_force(d1: f64, d2: f64, b: f64, v1: f64, v2: f64) -> (f64, f64) {
    let (h1, h2) = vhat(v1, v2);
    (d1 + h2 * b, d2 - h1 * b)
}

#[inline]
fn rate(z: CharacteristicState, fields: &FieldInterval, level: usize) -> [f64; 3] {
    let (d1, d2, b) = fields.at(level, z.x);
    let (h1, _) = vhat(z.v1, z.v2);
    let (f1, f2) = lorentz_force(d1, d2, b, z.v1, z.v2);
    [h1, f1, f2]
}

#[inline]
fn shifted(z: CharacteristicState, k: [f64; 3], h: f64) -> CharacteristicState {
    CharacteristicState { x: z.x + h * k[0], v1: z.v1 + h * k[1], v2: z.v2 + h * k[2] }
}

/// One classical RK4 step across the interval; `backward` integrates from the
/// end level to the start level.
#[inline]
fn rk4(z: CharacteristicState, dt: f64, fields: &FieldInterval, backward: bool) -> CharacteristicState {
    let (h, first, last) = if backward { (-dt, 2, 0) } else { (dt, 0, 2) };
    let k1 = rate(z, fields, first);
    let k2 = rate(shifted(z, k1, 0.5 * h), fields, 1);
    let k3 = rate(shifted(z, k2, 0.5 * h), fields, 1);
    let k4 = rate(shifted(z, k3, h), fields, last);
    let c = |m: usize| (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m]) / 6.0;
    CharacteristicState { x: z.x + h * c(0), v1: z.v1 + h * c(1), v2: z.v2 + h * c(2) }
}

/// Traces the particle characteristic through `end` at `t + dt` back to `t`.
pub fn trace_characteristic_back(
    end: CharacteristicState,
    dt: f64,
    fields: &FieldInterval,
) -> Result<CharacteristicState> {
    let z = rk4(end, dt, fields, true);
    let (lo, hi) = (fields.axis.origin, fields.axis.last());
    if !(z.x >= lo && z.x <= hi) {
        return Err(SimError::DomainExit(format!(
            "characteristic from x = {} left [{lo}, {hi}] (foot x = {})",
            end.x, z.x
        )));
    }
    Ok(z)
}

/// Pushes a phase-space point forward from `t` to `t + dt`.
pub fn push_characteristic(start: CharacteristicState, dt: f64, fields: &FieldInterval) -> CharacteristicState {
    rk4(start, dt, fields, false)
}

/// Advances `f` by one step along backward characteristics.
///
/// `boundary_tol` is the largest value tolerated on the outermost grid layers
/// after the step; anything above it means the support reached the edge.
pub fn semi_lagrangian_step(
    f: &DistributionGrid,
    fields: &FieldInterval,
    dt: f64,
    kind: Interpolation,
    boundary_tol: f64,
) -> Result<DistributionGrid> {
    let g = f.grid;
    let (xa, a1, a2) = (g.x_axis(), g.v1_axis(), g.v2_axis());
    let row = g.nv1 * g.nv2;
    let mut out = vec![0.0; g.len()];
    out.par_chunks_mut(row).enumerate().for_each(|(i, dst)| {
        let x = xa.node(i);
        for j in 0..g.nv1 {
            let v1 = a1.node(j);
            for k in 0..g.nv2 {
                let end = CharacteristicState { x, v1, v2: a2.node(k) };
                let foot = rk4(end, dt, fields, true);
                dst[j * g.nv2 + k] = f.sample(foot.x, foot.v1, foot.v2, kind);
            }
        }
    });
    let next = DistributionGrid { grid: g, values: out };
    let edge = next.boundary_max();
    if edge > boundary_tol {
        return Err(SimError::DomainExit(format!(
            "distribution reached the grid boundary (max {edge:e} > {boundary_tol:e})"
        )));
    }
    Ok(next)
}

/// Charge, current, background and `D1` on the spatial grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub rho: Vec<f64>,
    pub j1: Vec<f64>,
    pub j2: Vec<f64>,
    pub n: Vec<f64>,
    pub d1: Vec<f64>,
}

impl Moments {
    pub fn zeros(nx: usize) -> Self {
        Self {
            rho: vec![0.0; nx],
            j1: vec![0.0; nx],
            j2: vec![0.0; nx],
            n: vec![0.0; nx],
            d1: vec![0.0; nx],
        }
    }

    /// `|j| = sqrt(j1² + j2²)` supremum.
    pub fn j_sup(&self) -> f64 {
        self.j1.iter().zip(&self.j2).fold(0.0, |m, (a, b)| m.max(a.hypot(*b)))
    }
}

/// Midpoint quadrature of `f` and `v̂ f` over momentum, then `D1` by
/// cumulative integration of the charge density.
pub fn compute_moments(f: &DistributionGrid, n: &[f64]) -> Moments {
    let g = f.grid;
    assert_eq!(n.len(), g.nx, "background length must match nx");
    let (a1, a2) = (g.v1_axis(), g.v2_axis());
    let dv = g.dv1() * g.dv2();
    let mut weights = Vec::with_capacity(g.nv1 * g.nv2);
    for j in 0..g.nv1 {
        for k in 0..g.nv2 {
            weights.push(vhat(a1.node(j), a2.node(k)));
        }
    }
    let row = g.nv1 * g.nv2;
    let mut rho = Vec::with_capacity(g.nx);
    let mut j1 = Vec::with_capacity(g.nx);
    let mut j2 = Vec::with_capacity(g.nx);
    for (i, r) in f.values.chunks(row).enumerate() {
        let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for (v, (h1, h2)) in r.iter().zip(&weights) {
            m0 += v;
            m1 += h1 * v;
            m2 += h2 * v;
        }
        rho.push(m0 * dv - n[i]);
        j1.push(m1 * dv);
        j2.push(m2 * dv);
    }
    let d1 = compute_d1(&rho, g.dx());
    Moments { rho, j1, j2, n: n.to_vec(), d1 }
}

/// `D1(x) = ∫_{-∞}^x ρ` by cumulative trapezoid from the left boundary.
pub fn compute_d1(rho: &[f64], dx: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(rho.len());
    let mut acc = 0.0;
    for (i, r) in rho.iter().enumerate() {
        if i > 0 {
            acc += 0.5 * (rho[i - 1] + r) * dx;
        }
        out.push(acc);
    }
    out
}

/// Discrete consistency of two consecutive moment sets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ContinuityResidual {
    /// `‖(ρ(t+dt) − ρ(t))/dt + ∂x j1(t+dt/2)‖∞` on interior nodes.
    pub residual: f64,
    /// `‖D1(t+dt) − (D1(t) − dt·j1(t+dt/2))‖∞`: one-step gap between `D1`
    /// from the charge and `D1` evolved by `∂t D1 = −j1`.
    pub d1_gap: f64,
}

pub fn continuity_residual(before: &Moments, after: &Moments, dt: f64, dx: f64) -> ContinuityResidual {
    let nx = before.rho.len();
    let j_mid: Vec<f64> = before.j1.iter().zip(&after.j1).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut residual: f64 = 0.0;
    for i in 1..nx.saturating_sub(1) {
        let r = (after.rho[i] - before.rho[i]) / dt + (j_mid[i + 1] - j_mid[i - 1]) / (2.0 * dx);
        residual = residual.max(r.abs());
    }
    let d1_gap = (0..nx)
        .map(|i| (after.d1[i] - (before.d1[i] - dt * j_mid[i])).abs())
        .fold(0.0, f64::max);
    ContinuityResidual { residual, d1_gap }
}
