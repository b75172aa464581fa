//! Existence horizons and the momentum-support envelope.
//!
//! The envelope solves
//!
//! ```text
//! P'(t) = 2 √(1 + (‖f‖₁ + ‖n‖₁)²) / cos Θ(t),   P(0) = P0
//! Θ'(t) = ‖n‖∞ + 3π ‖f‖∞ P(t)²,                 Θ(0) = ‖θ₂‖∞ + ‖θ_B‖∞
//! ```
//!
//! and the horizons are read off it: `T1` where `Θ` reaches `π/2`, `T2`
//! where `Θ` meets `arctan(1/P)`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Result, SimError};
use crate::field_solver::InvariantGrid;
use crate::kinetic::{sup_abs, vhat, DistributionGrid, BOUNDARY_LAYERS};

/// Norms of the initial data that enter every a priori estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialDataSummary {
    pub theta2_sup: f64,
    pub theta_b_sup: f64,
    pub f_sup: f64,
    pub f_l1: f64,
    pub n_sup: f64,
    pub n_l1: f64,
    /// Momentum support radius of `f^in`.
    pub p0: f64,
}

impl InitialDataSummary {
    pub fn theta0(&self) -> f64 {
        self.theta2_sup + self.theta_b_sup
    }

    /// Bound on `|D₁|` and the numerator of `P'`.
    pub fn d1_bound(&self) -> f64 {
        self.f_l1 + self.n_l1
    }

    pub fn p_rate(&self) -> f64 {
        2.0 * (1.0 + self.d1_bound().powi(2)).sqrt()
    }

    /// `arctan(1/P0)` without dividing by zero.
    pub fn a3_limit(&self) -> f64 {
        1f64.atan2(self.p0)
    }

    pub fn a2_holds(&self) -> bool {
        self.theta0() < FRAC_PI_2
    }

    pub fn a3_holds(&self) -> bool {
        self.theta0() < self.a3_limit()
    }

    fn validate(&self) -> Result<()> {
        let v = [self.theta2_sup, self.theta_b_sup, self.f_sup, self.f_l1, self.n_sup, self.n_l1, self.p0];
        if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(SimError::Domain(format!("initial data norms must be finite and nonnegative: {self:?}")));
        }
        if !self.a2_holds() {
            return Err(SimError::Assumptions(format!(
                "field angle sum {} is not below pi/2",
                self.theta0()
            )));
        }
        Ok(())
    }
}

/// A horizon time, or the statement that none was found before `t_max`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Horizon {
    Finite(f64),
    ExceedsTMax,
}

impl Horizon {
    pub fn value(self) -> Option<f64> {
        match self {
            Horizon::Finite(t) => Some(t),
            Horizon::ExceedsTMax => None,
        }
    }

    pub fn min(self, other: Horizon) -> Horizon {
        match (self, other) {
            (Horizon::Finite(a), Horizon::Finite(b)) => Horizon::Finite(a.min(b)),
            (Horizon::Finite(a), _) | (_, Horizon::Finite(a)) => Horizon::Finite(a),
            _ => Horizon::ExceedsTMax,
        }
    }
}

impl Serialize for Horizon {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Horizon::Finite(t) => s.serialize_f64(*t),
            Horizon::ExceedsTMax => s.serialize_str("exceeds t_max"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnvelopeSample {
    pub t: f64,
    pub p: f64,
    pub theta: f64,
}

/// Integrated envelope with dense evaluation between stored steps.
#[derive(Clone, Debug)]
pub struct Envelope {
    pub summary: InitialDataSummary,
    pub samples: Vec<EnvelopeSample>,
    /// Termination time of the integrator: `t_max`, or the time `Θ` hit `π/2`.
    pub t_end: f64,
    /// Whether `Θ` reached `π/2` before `t_max`.
    pub blew_up: bool,
}

/// Steps are capped at this fraction of the time `Θ` needs to reach `π/2`
/// at its current rate, so they shrink geometrically near the pole.
const POLE_FRACTION: f64 = 0.02;
/// Distance below `π/2` at which the integration is closed off.
const POLE_GAP: f64 = 1e-13;

fn rhs(s: &InitialDataSummary, p: f64, theta: f64) -> (f64, f64) {
    (s.p_rate() / theta.cos(), s.n_sup + 3.0 * PI * s.f_sup * p * p)
}

fn rk4_step(s: &InitialDataSummary, p: f64, theta: f64, h: f64) -> (f64, f64) {
    let (a1, b1) = rhs(s, p, theta);
    let (a2, b2) = rhs(s, p + 0.5 * h * a1, theta + 0.5 * h * b1);
    let (a3, b3) = rhs(s, p + 0.5 * h * a2, theta + 0.5 * h * b2);
    let (a4, b4) = rhs(s, p + h * a3, theta + h * b3);
    (
        p + h * (a1 + 2.0 * a2 + 2.0 * a3 + a4) / 6.0,
        theta + h * (b1 + 2.0 * b2 + 2.0 * b3 + b4) / 6.0,
    )
}

/// Integrates the envelope with RK4 at step `dt` up to `t_max` or until
/// `Θ` reaches `π/2`.
pub fn solve_envelope(s: &InitialDataSummary, t_max: f64, dt: f64) -> Result<Envelope> {
    s.validate()?;
    if !(dt > 0.0 && t_max > 0.0) {
        return Err(SimError::Domain(format!("envelope needs dt > 0 and t_max > 0 (dt = {dt}, t_max = {t_max})")));
    }
    let mut samples = vec![EnvelopeSample { t: 0.0, p: s.p0, theta: s.theta0() }];
    let (mut t, mut p, mut theta) = (0.0, s.p0, s.theta0());
    let mut blew_up = false;
    while t < t_max {
        let gap = FRAC_PI_2 - theta;
        let rate = rhs(s, p, theta).1;
        if gap <= POLE_GAP {
            // the rest of the way at the current rate; at most 1e-13 / rate
            t += gap / rate;
            blew_up = true;
            break;
        }
        let mut h = dt.min(t_max - t);
        if rate > 0.0 {
            h = h.min(POLE_FRACTION * gap / rate);
        }
        let (p1, th1) = rk4_step(s, p, theta, h);
        t += h;
        p = p1;
        theta = th1.min(FRAC_PI_2);
        samples.push(EnvelopeSample { t, p, theta });
    }
    if blew_up {
        samples.push(EnvelopeSample { t, p: f64::INFINITY, theta: FRAC_PI_2 });
    }
    Ok(Envelope { summary: *s, samples, t_end: t.min(t_max), blew_up })
}

impl Envelope {
    fn bracket(&self, t: f64) -> usize {
        match self.samples.binary_search_by(|x| x.t.total_cmp(&t)) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        }
    }

    /// `(P(t), Θ(t))` by one RK4 sub-step from the preceding stored step.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let i = self.bracket(t);
        let a = self.samples[i];
        if t == a.t || !a.p.is_finite() {
            return (a.p, a.theta);
        }
        let (p, th) = rk4_step(&self.summary, a.p, a.theta, t - a.t);
        (p, th.min(FRAC_PI_2))
    }

    pub fn p_at(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    pub fn theta_at(&self, t: f64) -> f64 {
        self.eval(t).1
    }

    /// Nondecreasing rate `‖n‖∞ + 3π‖f‖∞ P(t)²` of the angle bound.
    pub fn k_tilde(&self, t: f64) -> f64 {
        let p = self.p_at(t);
        self.summary.n_sup + 3.0 * PI * self.summary.f_sup * p * p
    }

    /// Step boundaries of the integrator, finite part only.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.samples.iter().filter(|s| s.p.is_finite()).map(|s| s.t).collect()
    }

    /// At most `n + 1` samples spread evenly in time, for reporting.
    pub fn decimated(&self, n: usize) -> Vec<EnvelopeSample> {
        let finite: Vec<_> = self.samples.iter().copied().filter(|s| s.p.is_finite()).collect();
        if finite.len() <= n + 1 {
            return finite;
        }
        let last = *finite.last().unwrap();
        let mut out: Vec<EnvelopeSample> = (0..n)
            .map(|k| {
                let t = last.t * k as f64 / n as f64;
                let (p, theta) = self.eval(t);
                EnvelopeSample { t, p, theta }
            })
            .collect();
        out.push(last);
        out
    }
}

/// Bisection for the sign change of `g` in `[a, b]`, `g(a) < 0 <= g(b)`.
fn bisect(mut a: f64, mut b: f64, g: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if g(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
        if b - a <= 1e-15 * b.abs().max(1e-300) {
            break;
        }
    }
    0.5 * (a + b)
}

/// First time `Θ(t)` reaches `π/2`.
pub fn compute_t1(env: &Envelope) -> Horizon {
    if env.blew_up {
        Horizon::Finite(env.t_end)
    } else {
        Horizon::ExceedsTMax
    }
}

/// First root of `Θ(t) − arctan(1/P(t))`.
pub fn compute_t2(env: &Envelope) -> Result<Horizon> {
    let g = |p: f64, th: f64| th - 1f64.atan2(p);
    let s0 = env.samples[0];
    let g0 = g(s0.p, s0.theta);
    if g0 > 0.0 {
        return Err(SimError::Assumptions(format!(
            "field angle sum {} is not below arctan(1/P0) = {}",
            s0.theta,
            env.summary.a3_limit()
        )));
    }
    if g0 == 0.0 {
        return Ok(Horizon::Finite(0.0));
    }
    for w in env.samples.windows(2) {
        if g(w[1].p, w[1].theta) >= 0.0 {
            let t = bisect(w[0].t, w[1].t, |t| {
                let (p, th) = env.eval(t);
                g(p, th)
            });
            return Ok(Horizon::Finite(t));
        }
    }
    Ok(Horizon::ExceedsTMax)
}

const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_08),
    (0.906_179_845_938_664, 0.236_926_885_056_189_08),
];

fn gauss(a: f64, b: f64, f: &impl Fn(f64) -> f64) -> f64 {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    GAUSS5.iter().map(|(x, w)| w * f(c + h * x)).sum::<f64>() * h
}

/// `sup{t : theta_sum + ∫₀ᵗ k̃ < π/2}` for a nondecreasing rate `k_tilde`.
///
/// The integral is accumulated panel by panel over `breakpoints` (which must
/// start at 0 and increase); past the last one, `k̃` is held at its final
/// value up to `t_max`.
pub fn compute_t_star(theta_sum: f64, k_tilde: impl Fn(f64) -> f64, breakpoints: &[f64], t_max: f64) -> Horizon {
    let budget = FRAC_PI_2 - theta_sum;
    if budget <= 0.0 {
        return Horizon::Finite(0.0);
    }
    let mut acc = 0.0;
    for w in breakpoints.windows(2) {
        let (a, b) = (w[0], w[1].min(t_max));
        if b <= a {
            break;
        }
        let seg = gauss(a, b, &k_tilde);
        if acc + seg >= budget {
            let t = bisect(a, b, |t| acc + gauss(a, t, &k_tilde) - budget);
            return Horizon::Finite(t);
        }
        acc += seg;
    }
    let t0 = breakpoints.last().copied().unwrap_or(0.0).min(t_max);
    let rate = k_tilde(t0);
    if rate > 0.0 && t0 + (budget - acc) / rate <= t_max {
        Horizon::Finite(t0 + (budget - acc) / rate)
    } else {
        Horizon::ExceedsTMax
    }
}

/// Every horizon of one set of initial data.
#[derive(Clone, Debug, Serialize)]
pub struct HorizonReport {
    pub summary: InitialDataSummary,
    pub a2: bool,
    pub a3: bool,
    pub t_star: Horizon,
    pub t1: Horizon,
    pub t2: Horizon,
    /// Termination time of the envelope integrator.
    pub t0: Horizon,
    /// Smallest horizon minus the safety margin.
    pub certified_end: Horizon,
    pub envelope: Vec<EnvelopeSample>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonOptions {
    pub dt: f64,
    pub t_max: f64,
    pub safety: f64,
}

impl Default for HorizonOptions {
    fn default() -> Self {
        Self { dt: 1e-3, t_max: 1e3, safety: 1e-6 }
    }
}

/// Integrates the envelope and collects all horizons.
///
/// Returns the envelope alongside the report so runs can compare against it.
/// Data failing A3 get `T2 = 0` and hence an empty certified interval.
pub fn horizon_report(s: &InitialDataSummary, opts: HorizonOptions) -> Result<(HorizonReport, Envelope)> {
    let env = solve_envelope(s, opts.t_max, opts.dt)?;
    let t1 = compute_t1(&env);
    // without A3 separation is not known at any positive time
    let t2 = match compute_t2(&env) {
        Err(SimError::Assumptions(_)) => Horizon::Finite(0.0),
        other => other?,
    };
    let t_star = compute_t_star(s.theta0(), |t| env.k_tilde(t), &env.breakpoints(), opts.t_max);
    let t0 = if env.blew_up { Horizon::Finite(env.t_end) } else { Horizon::ExceedsTMax };
    let certified_end = match t_star.min(t1).min(t2).min(t0) {
        Horizon::Finite(t) => Horizon::Finite((t - opts.safety).max(0.0)),
        Horizon::ExceedsTMax => Horizon::ExceedsTMax,
    };
    let report = HorizonReport {
        summary: *s,
        a2: s.a2_holds(),
        a3: s.a3_holds(),
        t_star,
        t1,
        t2,
        t0,
        certified_end,
        envelope: env.decimated(200),
    };
    Ok((report, env))
}

/// Pass/fail of each assumption on gridded initial data.
#[derive(Clone, Debug, Serialize)]
pub struct AssumptionReport {
    pub summary: InitialDataSummary,
    /// Compact support strictly inside the grid.
    pub a1: bool,
    /// Pointwise angle sum below `π/2`.
    pub a2: bool,
    /// Norm sum below `arctan(1/P0)`.
    pub a3: bool,
    /// `arctan(1/P0) − (‖θ₂‖∞ + ‖θ_B‖∞)`; negative when A3 fails.
    pub a3_margin: f64,
    /// Smallest `min(cos α − v̂₁, v̂₁ + cos β)` over occupied nodes, if any.
    pub separation_margin: Option<f64>,
    /// Radius of the smallest centred interval holding the x-support of `f`.
    pub x_support: f64,
    pub messages: Vec<String>,
}

/// Sup norms of the initial profiles between the nodes.
///
/// Gridded data only see the nodal values; a peak between two nodes is
/// reached later by the interpolating solver, so the norms that bound the
/// run must be the ones of the profiles themselves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ProfileNorms {
    pub theta2_sup: f64,
    pub theta_b_sup: f64,
    /// `sup |θ₂| + |θ_B|` taken pointwise.
    pub angle_sum_sup: f64,
    pub f_sup: f64,
}

/// Norms, support radii and assumption flags of gridded initial data.
///
/// `n` is the background on the x-nodes; the L¹ norms use the trapezoid rule
/// in x and the midpoint rule in v, as the moments do.
pub fn check_assumptions(f: &DistributionGrid, inv: &InvariantGrid, n: &[f64]) -> AssumptionReport {
    check_assumptions_with(f, inv, n, None)
}

/// As [`check_assumptions`], with sup norms raised to those of the profiles.
pub fn check_assumptions_with(
    f: &DistributionGrid,
    inv: &InvariantGrid,
    n: &[f64],
    profile: Option<ProfileNorms>,
) -> AssumptionReport {
    let g = f.grid;
    let (t2, tb) = (inv.theta2(), inv.theta_b());
    let wx = g.x_weights();
    let (a1_axis, a2_axis) = (g.v1_axis(), g.v2_axis());

    let mut p0: f64 = 0.0;
    let mut margin: Option<f64> = None;
    for i in 0..g.nx {
        let (ca, cb) = (inv.alpha[i].cos(), inv.beta[i].cos());
        for j in 0..g.nv1 {
            for k in 0..g.nv2 {
                if f.at(i, j, k) > 0.0 {
                    let (v1, v2) = (a1_axis.node(j), a2_axis.node(k));
                    p0 = p0.max(v1.hypot(v2));
                    let h1 = vhat(v1, v2).0;
                    let m = (ca - h1).min(h1 + cb);
                    margin = Some(margin.map_or(m, |x| x.min(m)));
                }
            }
        }
    }
    let pn = profile.unwrap_or_default();
    let summary = InitialDataSummary {
        theta2_sup: sup_abs(&t2).max(pn.theta2_sup),
        theta_b_sup: sup_abs(&tb).max(pn.theta_b_sup),
        f_sup: f.sup().max(pn.f_sup),
        f_l1: f.l1(),
        n_sup: sup_abs(n),
        n_l1: n.iter().zip(&wx).map(|(a, w)| a.abs() * w).sum(),
        p0,
    };

    let mut messages = Vec::new();
    let nx = g.nx;
    let edge = |v: &[f64]| {
        (0..BOUNDARY_LAYERS).chain(nx - BOUNDARY_LAYERS..nx).map(|i| v[i].abs()).fold(0.0, f64::max)
    };
    let a1 = f.boundary_max() == 0.0
        && f.values.iter().all(|x| x.is_finite() && *x >= 0.0)
        && edge(&inv.alpha) == 0.0
        && edge(&inv.beta) == 0.0
        && edge(n) == 0.0;
    if !a1 {
        messages.push("A1: data are not nonnegative and compactly supported inside the grid".into());
    }
    let a2 = (0..nx).all(|i| t2[i].abs() + tb[i].abs() < FRAC_PI_2) && pn.angle_sum_sup < FRAC_PI_2;
    if !a2 {
        messages.push("A2: field angle sum reaches pi/2".into());
    }
    let a3_margin = summary.a3_limit() - summary.theta0();
    let a3 = a3_margin > 0.0;
    if !a3 {
        messages.push(format!(
            "A3: ||theta2|| + ||thetaB|| = {} is not below arctan(1/P0) = {} (margin {a3_margin})",
            summary.theta0(),
            summary.a3_limit()
        ));
    }
    AssumptionReport {
        summary,
        a1,
        a2,
        a3,
        a3_margin,
        separation_margin: margin,
        x_support: f.x_support(0.0),
        messages,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::Axis;
    use crate::kinetic::PhaseSpaceGrid;

    fn summary(f_sup: f64, n_sup: f64, theta0: f64, p0: f64) -> InitialDataSummary {
        InitialDataSummary {
            theta2_sup: theta0,
            theta_b_sup: 0.0,
            f_sup,
            f_l1: 0.0,
            n_sup,
            n_l1: 0.0,
            p0,
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn constant_angle_gives_linear_support_growth() {
        let env = solve_envelope(&summary(0.0, 0.0, 0.5, 1.0), 5.0, 1e-3).unwrap();
        for t in [0.25, 1.0, 3.3] {
            let exact = 1.0 + 2.0 * t / 0.5f64.cos();
            assert!(rel(env.p_at(t), exact) < 1e-12);
            assert_eq!(env.theta_at(t), 0.5);
        }
        assert_eq!(compute_t1(&env), Horizon::ExceedsTMax);
    }

    #[test]
    fn background_alone_tilts_the_angle_linearly() {
        let s = summary(0.0, 0.1, 0.5, 1.0);
        let env = solve_envelope(&s, 100.0, 1e-3).unwrap();
        assert!((env.theta_at(3.0) - 0.8).abs() < 1e-12);
        let t1 = compute_t1(&env).value().unwrap();
        assert!(rel(t1, (FRAC_PI_2 - 0.5) / 0.1) < 1e-10, "{t1}");
        let ts = compute_t_star(s.theta0(), |t| env.k_tilde(t), &env.breakpoints(), 100.0).value().unwrap();
        assert!(rel(ts, t1) < 1e-10);
    }

    #[test]
    fn no_growth_means_no_t1() {
        let env = solve_envelope(&summary(0.0, 0.0, 0.3, 0.0), 10.0, 1e-2).unwrap();
        assert_eq!(compute_t1(&env), Horizon::ExceedsTMax);
        assert_eq!(compute_t_star(0.3, |_| 0.0, &env.breakpoints(), 10.0), Horizon::ExceedsTMax);
    }

    #[test]
    fn t_star_with_constant_rate() {
        let ts = compute_t_star(0.57, |_| 0.25, &[0.0, 1.0, 2.0], 100.0).value().unwrap();
        assert!(rel(ts, (FRAC_PI_2 - 0.57) / 0.25) < 1e-12);
    }

    #[test]
    fn t2_in_closed_form_without_sources() {
        let (th, p0) = (0.5f64, 1.0);
        let env = solve_envelope(&summary(0.0, 0.0, th, p0), 10.0, 1e-3).unwrap();
        let c = 2.0 / th.cos();
        let exact = (1.0 / th.tan() - p0) / c;
        let t2 = compute_t2(&env).unwrap().value().unwrap();
        assert!(rel(t2, exact) < 1e-10, "{t2} {exact}");
    }

    #[test]
    fn t2_boundary_and_violation() {
        let p0 = 2.0f64;
        let s = summary(0.0, 0.0, (1.0 / p0).atan(), p0);
        let env = solve_envelope(&s, 1.0, 1e-2).unwrap();
        assert_eq!(compute_t2(&env).unwrap(), Horizon::Finite(0.0));
        let s = summary(0.0, 0.0, 0.8, 1.0);
        let env = solve_envelope(&s, 1.0, 1e-2).unwrap();
        assert!(matches!(compute_t2(&env), Err(SimError::Assumptions(_))));
    }

    #[test]
    fn a2_violation_is_rejected() {
        assert!(matches!(
            solve_envelope(&summary(0.0, 0.0, FRAC_PI_2, 0.0), 1.0, 1e-2),
            Err(SimError::Assumptions(_))
        ));
    }

    fn generic() -> InitialDataSummary {
        InitialDataSummary {
            theta2_sup: 0.15,
            theta_b_sup: 0.05,
            f_sup: 0.05,
            f_l1: 0.1,
            n_sup: 0.02,
            n_l1: 0.1,
            p0: 0.5,
        }
    }

    #[test]
    fn envelope_is_step_converged() {
        let s = generic();
        let coarse = solve_envelope(&s, 3.0, 1e-3).unwrap();
        let fine = solve_envelope(&s, 3.0, 1e-4).unwrap();
        // this data blows up a little before t = 0.94
        for t in [0.2, 0.5, 0.8, 0.93] {
            assert!(rel(coarse.p_at(t), fine.p_at(t)) < 1e-8);
            assert!(rel(coarse.theta_at(t), fine.theta_at(t)) < 1e-8);
        }
        let (t1c, t1f) = (compute_t1(&coarse).value().unwrap(), compute_t1(&fine).value().unwrap());
        assert!(rel(t1c, t1f) < 1e-8);
    }

    #[test]
    fn horizons_are_step_converged_and_ordered() {
        let s = generic();
        let opts = HorizonOptions { t_max: 50.0, ..Default::default() };
        let (a, _) = horizon_report(&s, opts).unwrap();
        let (b, _) = horizon_report(&s, HorizonOptions { dt: 1e-4, ..opts }).unwrap();
        let (t1a, t1b) = (a.t1.value().unwrap(), b.t1.value().unwrap());
        let (t2a, t2b) = (a.t2.value().unwrap(), b.t2.value().unwrap());
        assert!(rel(t1a, t1b) < 1e-8, "{t1a} {t1b}");
        assert!(rel(t2a, t2b) < 1e-8, "{t2a} {t2b}");
        assert!(t2a <= t1a);
        assert!(rel(a.t_star.value().unwrap(), t1a) < 1e-10);
        assert_eq!(a.certified_end, Horizon::Finite(t2a - 1e-6));
    }

    #[test]
    fn horizons_match_an_independent_high_order_integration() {
        // DOP853 at rtol 1e-13; T1 via the substitution u = −ln(π/2 − Θ),
        // which removes the pole from the right-hand side
        let (t1_ref, t2_ref) = (0.937_000_300_376_290_9, 0.545_057_660_544_908_7);
        let (r, _) = horizon_report(&generic(), HorizonOptions { t_max: 50.0, ..Default::default() }).unwrap();
        assert!(rel(r.t1.value().unwrap(), t1_ref) < 1e-9, "{:?}", r.t1);
        assert!(rel(r.t2.value().unwrap(), t2_ref) < 1e-9, "{:?}", r.t2);
    }

    #[test]
    fn envelope_is_monotone() {
        let env = solve_envelope(&generic(), 50.0, 1e-3).unwrap();
        for w in env.samples.windows(2) {
            assert!(w[1].t > w[0].t);
            assert!(w[1].p >= w[0].p);
            assert!(w[1].theta >= w[0].theta);
        }
    }

    #[test]
    fn horizon_serializes_as_number_or_marker() {
        assert_eq!(serde_json::to_string(&Horizon::Finite(1.5)).unwrap(), "1.5");
        assert_eq!(serde_json::to_string(&Horizon::ExceedsTMax).unwrap(), "\"exceeds t_max\"");
    }

    #[test]
    fn assumption_check_on_field_free_unit_support() {
        let g = PhaseSpaceGrid::new(-2.0, 2.0, 21, 2.5, 10, 10).unwrap();
        // cell-centred v nodes at ±0.25, ±0.75, ...: keep |v| ≤ 1
        let f = DistributionGrid::from_fn(g, |x, v1, v2| {
            if x.abs() < 0.5 && v1.hypot(v2) <= 1.0 { 1.0 } else { 0.0 }
        });
        let inv = InvariantGrid::zeros(Axis::new(-2.0, 0.2, 21));
        let r = check_assumptions(&f, &inv, &vec![0.0; 21]);
        assert!(r.a1 && r.a2 && r.a3, "{r:?}");
        let p0 = 0.75f64.hypot(0.25);
        assert!((r.summary.p0 - p0).abs() < 1e-15);
        let h = vhat(0.75, 0.25).0;
        assert!((r.separation_margin.unwrap() - (1.0 - h)).abs() < 1e-15);
    }

    #[test]
    fn a3_failure_is_reported_with_margin() {
        let g = PhaseSpaceGrid::new(-2.0, 2.0, 21, 1.5, 6, 6).unwrap();
        let f = DistributionGrid::from_fn(g, |x, v1, _| if x.abs() < 0.5 && v1.abs() < 1.0 { 1.0 } else { 0.0 });
        let axis = Axis::new(-2.0, 0.2, 21);
        let t2: Vec<f64> = axis.nodes().iter().map(|x| if x.abs() < 0.5 { 0.8 } else { 0.0 }).collect();
        let inv = InvariantGrid::from_angles(axis, &t2, &vec![0.0; 21]);
        let r = check_assumptions(&f, &inv, &vec![0.0; 21]);
        assert!(!r.a3);
        assert!(r.a3_margin < 0.0);
        assert!(r.messages.iter().any(|m| m.starts_with("A3")));
    }
}
