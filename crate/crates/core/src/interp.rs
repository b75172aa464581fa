//! Uniform-axis interpolation with zero extension outside the grid.
//!
//! Every grid quantity in this crate is compactly supported, so reading a
//! node outside `[0, len)` returns zero rather than clamping or wrapping.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Linear,
    /// 4-point Lagrange.
    #[default]
    Cubic,
    /// 4-point Lagrange clipped to the values of the bracketing cell, which
    /// makes every 1D pass monotone (no new extrema, no negative values).
    MonotoneCubic,
}

/// Uniformly spaced nodes `origin + i * step`, `i = 0..len`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub origin: f64,
    pub step: f64,
    pub len: usize,
}

/// Up to four nodes and their weights for one interpolation point.
#[derive(Clone, Copy, Debug)]
pub struct Stencil {
    pub start: isize,
    pub weights: [f64; 4],
    pub width: usize,
    /// Index of the left node of the bracketing cell.
    pub left: isize,
}

impl Axis {
    pub fn new(origin: f64, step: f64, len: usize) -> Self {
        Self { origin, step, len }
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.step
    }

    pub fn last(&self) -> f64 {
        self.node(self.len - 1)
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.node(i)).collect()
    }

    /// Cell index `j` and fraction `s` in `[0, 1)` with `x = node(j) + s * step`.
    #[inline]
    pub fn locate(&self, x: f64) -> (isize, f64) {
        let r = (x - self.origin) / self.step;
        let j = r.floor();
        (j as isize, r - j)
    }

    #[inline]
    pub fn stencil(&self, x: f64, kind: Interpolation) -> Stencil {
        let (j, s) = self.locate(x);
        match kind {
            Interpolation::Linear => Stencil {
                start: j,
                weights: [1.0 - s, s, 0.0, 0.0],
                width: 2,
                left: j,
            },
            Interpolation::Cubic | Interpolation::MonotoneCubic => {
                let sm1 = s - 1.0;
                let sm2 = s - 2.0;
                let sp1 = s + 1.0;
                Stencil {
                    start: j - 1,
                    weights: [
                        -s * sm1 * sm2 / 6.0,
                        sp1 * sm1 * sm2 / 2.0,
                        -sp1 * s * sm2 / 2.0,
                        sp1 * s * sm1 / 6.0,
                    ],
                    width: 4,
                    left: j,
                }
            }
        }
    }

    #[inline]
    pub fn get(&self, values: &[f64], i: isize) -> f64 {
        if i < 0 || i as usize >= self.len {
            0.0
        } else {
            values[i as usize]
        }
    }
}

impl Stencil {
    /// Applies the stencil to a node accessor `at(i)`; indices are absolute
    /// and may lie outside the axis, the accessor decides what they mean.
    #[inline]
    pub fn apply(&self, kind: Interpolation, at: impl Fn(isize) -> f64) -> f64 {
        let mut acc = 0.0;
        for m in 0..self.width {
            acc += self.weights[m] * at(self.start + m as isize);
        }
        if kind == Interpolation::MonotoneCubic {
            let a = at(self.left);
            let b = at(self.left + 1);
            acc = acc.clamp(a.min(b), a.max(b));
        }
        acc
    }
}

/// Interpolates nodal `values` on `axis` at `x`.
#[inline]
pub fn interp1(axis: &Axis, values: &[f64], x: f64, kind: Interpolation) -> f64 {
    axis.stencil(x, kind).apply(kind, |i| axis.get(values, i))
}
