//! Algebra of the reduced Born-Infeld field (field strength parameter b = 1).
//!
//! In one space dimension the field is `D = (D1, D2, 0)`, `B = (0, 0, B)`.
//! `D1` is slaved to the charge density, leaving `(D2, B)` as the hyperbolic
//! unknowns. The angle variables
//!
//! ```text
//! sin θ1 = D1 / sqrt(1 + |D|²),  sin θ2 = D2 / sqrt(1 + |D|²),  sin θB = B / sqrt(1 + B²)
//! ```
//!
//! map every finite field into `|θ1| + |θ2| < π/2`, `|θB| < π/2`, and the
//! Riemann invariants `α = θ2 − θB`, `β = θ2 + θB` diagonalise the system
//! with speeds `−cos β` and `cos α`.
//!
//! Angles are evaluated through `atan2` rather than `asin`: the two are
//! identical on the image, but `asin` loses all relative accuracy once its
//! argument is within rounding of ±1.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Physical field values at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RawFieldPoint {
    pub d1: f64,
    pub d2: f64,
    pub b: f64,
}

/// Transformed field angles at one point, with the Riemann invariants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ThetaFieldPoint {
    pub theta1: f64,
    pub theta2: f64,
    pub theta_b: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Source rates of the diagonal field system.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SourceCoefficients {
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
}

/// Quasilinear form `∂t(D2, B) + A ∂x(D2, B) = (C1 ρ − j2, C2 ρ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuasilinearForm {
    pub a: [[f64; 2]; 2],
    pub c1: f64,
    pub c2: f64,
}

impl RawFieldPoint {
    pub fn new(d1: f64, d2: f64, b: f64) -> Self {
        Self { d1, d2, b }
    }

    pub fn is_finite(&self) -> bool {
        self.d1.is_finite() && self.d2.is_finite() && self.b.is_finite()
    }

    fn check(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(SimError::Domain(format!("non-finite field {self:?}")))
        }
    }

    /// `|D|² = D1² + D2²`.
    pub fn d_norm_sq(&self) -> f64 {
        self.d1 * self.d1 + self.d2 * self.d2
    }
}

impl ThetaFieldPoint {
    /// Builds the point from `(θ2, θB)`, filling the invariants. `θ1` is not
    /// determined by these two angles alone and is set to zero.
    pub fn from_angles(theta2: f64, theta_b: f64) -> Self {
        Self {
            theta1: 0.0,
            theta2,
            theta_b,
            alpha: theta2 - theta_b,
            beta: theta2 + theta_b,
        }
    }

    /// `|θ2| + |θB|`, which equals `max(|α|, |β|)`.
    pub fn angle_sum(&self) -> f64 {
        self.theta2.abs() + self.theta_b.abs()
    }
}

/// Transforms physical fields into angles.
pub fn to_theta(p: RawFieldPoint) -> Result<ThetaFieldPoint> {
    p.check()?;
    // sin θ2 = D2/sqrt(1+|D|²) and cos θ2 = sqrt(1+D1²)/sqrt(1+|D|²)
    let theta1 = p.d1.atan2(p.d2.hypot(1.0));
    let theta2 = p.d2.atan2(p.d1.hypot(1.0));
    let theta_b = p.b.atan();
    Ok(ThetaFieldPoint {
        theta1,
        theta2,
        theta_b,
        alpha: theta2 - theta_b,
        beta: theta2 + theta_b,
    })
}

/// Recovers `(D2, B)` from `(θ2, θB)` given `D1`.
pub fn from_theta(theta2: f64, theta_b: f64, d1: f64) -> Result<(f64, f64)> {
    if !(theta2.is_finite() && theta_b.is_finite() && d1.is_finite()) {
        return Err(SimError::Domain(format!(
            "non-finite input theta2 = {theta2}, thetaB = {theta_b}, d1 = {d1}"
        )));
    }
    for angle in [theta2, theta_b] {
        if angle.abs() >= FRAC_PI_2 {
            return Err(SimError::BlowUpProximity {
                x: None,
                angle_sum: angle.abs(),
                limit: FRAC_PI_2,
            });
        }
    }
    Ok((d1.hypot(1.0) * theta2.tan(), theta_b.tan()))
}

/// Characteristic speeds `(−cos β, cos α)` in angle variables.
pub fn eigenvalues_theta(theta2: f64, theta_b: f64) -> (f64, f64) {
    (-(theta2 + theta_b).cos(), (theta2 - theta_b).cos())
}

/// Characteristic speeds evaluated directly from the physical fields.
pub fn eigenvalues_raw(p: RawFieldPoint) -> Result<(f64, f64)> {
    p.check()?;
    let root_d1 = p.d1.hypot(1.0);
    let denom = (1.0 + p.d_norm_sq()).sqrt() * p.b.hypot(1.0);
    let cross = p.d2 * p.b;
    Ok(((cross - root_d1) / denom, (cross + root_d1) / denom))
}

/// Matrix and source coefficients of the quasilinear `(D2, B)` system.
pub fn quasilinear_form(p: RawFieldPoint) -> Result<QuasilinearForm> {
    p.check()?;
    let one_d = 1.0 + p.d_norm_sq();
    let one_b = 1.0 + p.b * p.b;
    let diag = p.d2 * p.b / (one_d.sqrt() * one_b.sqrt());
    Ok(QuasilinearForm {
        a: [
            [diag, one_d.sqrt() / one_b.powf(1.5)],
            [one_b.sqrt() * (1.0 + p.d1 * p.d1) / one_d.powf(1.5), diag],
        ],
        c1: -p.d1 * p.b / (one_d.sqrt() * one_b.sqrt()),
        c2: one_b.sqrt() * p.d1 * p.d2 / one_d.powf(1.5),
    })
}

/// Source rates `k0 = −ρD1/(1+D1²)`, `k1 = j1 D1/(1+D1²)`, `k2 = −j2/sqrt(1+D1²)`.
pub fn sources(rho: f64, j1: f64, j2: f64, d1: f64) -> SourceCoefficients {
    let one = 1.0 + d1 * d1;
    SourceCoefficients {
        k0: -rho * d1 / one,
        k1: j1 * d1 / one,
        k2: -j2 / one.sqrt(),
    }
}

/// Right-hand side shared by the α and β equations.
#[inline]
pub fn inhomogeneous_rhs(theta2: f64, theta_b: f64, k: SourceCoefficients) -> f64 {
    let (s2, c2) = theta2.sin_cos();
    c2 * (k.k0 * theta_b.sin() + k.k1 * s2 + k.k2 * c2)
}

/// Second component of `E` and the scalar `H` from the reduced constitutive
/// relations.
pub fn constitutive_eh(p: RawFieldPoint) -> Result<(f64, f64)> {
    p.check()?;
    let root_d = (1.0 + p.d_norm_sq()).sqrt();
    let root_b = p.b.hypot(1.0);
    Ok((root_b * p.d2 / root_d, root_d * p.b / root_b))
}
