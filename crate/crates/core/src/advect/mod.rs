//! Semi-Lagrangian finite-difference transport: backward characteristic
//! tracing and the `P²` reconstruction at the characteristic foot.

mod accessor;
mod p2;
mod stencil;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SlarError};

pub use accessor::{eval_field_offgrid, reconstruct, SampledField, SlAccessor};
pub use p2::{coefficient_count, p2_interpolate, stencil_offsets, stencil_size, P2Coefficients};
pub use stencil::{HtStencil, StencilPlan, StencilRows, StencilSource};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    /// A truncated velocity box: values outside read as zero.
    Truncated,
}

/// Uniform cell-centered discretization of one mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub boundary: Boundary,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize, boundary: Boundary) -> Result<Self> {
        if !(hi > lo) || n == 0 || !lo.is_finite() || !hi.is_finite() {
            return Err(SlarError::Config(format!("invalid axis [{lo}, {hi}] with {n} cells")));
        }
        Ok(Axis { lo, hi, n, boundary })
    }

    pub fn periodic(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(lo, hi, n, Boundary::Periodic)
    }

    pub fn truncated(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(lo, hi, n, Boundary::Truncated)
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.center(i)).collect()
    }

    /// Wraps periodic coordinates into `[lo, hi)` and clamps truncated ones
    /// into `[lo, hi]`. Returns whether a clamp was needed.
    pub fn settle(&self, x: &mut f64) -> bool {
        match self.boundary {
            Boundary::Periodic => {
                *x = self.lo + (*x - self.lo).rem_euclid(self.length());
                false
            }
            Boundary::Truncated => {
                let c = x.clamp(self.lo, self.hi);
                let clamped = c != *x;
                *x = c;
                clamped
            }
        }
    }

    /// Cell containing `x` and the normalized offset `ξ = (x - center) / dx`.
    /// A point on a cell face belongs to the lower cell.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.n as isize;
        let s = match self.boundary {
            Boundary::Periodic => (x - self.lo).rem_euclid(self.length()) / self.dx(),
            Boundary::Truncated => (x - self.lo) / self.dx(),
        };
        let mut i = s.ceil() as isize - 1;
        if self.boundary == Boundary::Truncated {
            i = i.clamp(0, n - 1);
        }
        let xi = s - (i as f64 + 0.5);
        (i.rem_euclid(n) as usize, xi)
    }

    /// Indices of the cells `i - 1`, `i`, `i + 1`, wrapped or dropped at the boundary.
    pub fn neighbors(&self, i: usize) -> [Option<usize>; 3] {
        let n = self.n;
        match self.boundary {
            Boundary::Periodic => [Some((i + n - 1) % n), Some(i), Some((i + 1) % n)],
            Boundary::Truncated => [i.checked_sub(1), Some(i), (i + 1 < n).then_some(i + 1)],
        }
    }
}

/// Tensor-product grid over all modes of a tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceGrid {
    axes: Vec<Axis>,
}

impl PhaseSpaceGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(SlarError::Config("grid needs at least one axis".into()));
        }
        Ok(PhaseSpaceGrid { axes })
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, mode: usize) -> &Axis {
        &self.axes[mode]
    }

    pub fn order(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.n).collect()
    }

    pub fn dx(&self, mode: usize) -> f64 {
        self.axes[mode].dx()
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::dx).product()
    }

    /// Cell center of a multi-index.
    pub fn point(&self, idx: &[usize]) -> Vec<f64> {
        self.axes.iter().zip(idx).map(|(a, &i)| a.center(i)).collect()
    }

    /// Applies [`Axis::settle`] per mode; returns whether any mode was clamped.
    pub fn settle(&self, x: &mut [f64]) -> bool {
        let mut clamped = false;
        for (a, xi) in self.axes.iter().zip(x.iter_mut()) {
            clamped |= a.settle(xi);
        }
        clamped
    }

    /// Containing cell per mode.
    pub fn locate_cell(&self, x: &[f64]) -> Vec<usize> {
        self.axes.iter().zip(x).map(|(a, &xi)| a.locate(xi).0).collect()
    }

    /// Sub-grid formed by the given modes.
    pub fn select(&self, modes: &[usize]) -> PhaseSpaceGrid {
        PhaseSpaceGrid { axes: modes.iter().map(|&m| self.axes[m].clone()).collect() }
    }
}

/// Advection velocity `a(x, t)` of the characteristic equations `dx/dt = a`.
pub trait VelocityField: Sync {
    fn velocity(&self, x: &[f64], t: f64, out: &mut [f64]);
}

/// Spatially and temporally constant velocity.
#[derive(Clone, Debug)]
pub struct ConstantField(pub Vec<f64>);

impl VelocityField for ConstantField {
    fn velocity(&self, _x: &[f64], _t: f64, out: &mut [f64]) {
        out.copy_from_slice(&self.0);
    }
}

/// Velocity given by a closure.
pub struct FnField<F>(pub F);

impl<F: Fn(&[f64], f64, &mut [f64]) + Sync> VelocityField for FnField<F> {
    fn velocity(&self, x: &[f64], t: f64, out: &mut [f64]) {
        (self.0)(x, t, out)
    }
}

/// Integrates `dx/dt = a(x, t)` from `t_start` to `t_end` with Kutta's
/// third-order scheme in a single step. Backward tracing has `t_end < t_start`.
pub fn trace_rk3(field: &dyn VelocityField, x: &[f64], t_start: f64, t_end: f64) -> Vec<f64> {
    let d = x.len();
    let h = t_end - t_start;
    let mut k1 = vec![0.0; d];
    let mut k2 = vec![0.0; d];
    let mut k3 = vec![0.0; d];
    let mut y = vec![0.0; d];
    field.velocity(x, t_start, &mut k1);
    for m in 0..d {
        y[m] = x[m] + 0.5 * h * k1[m];
    }
    field.velocity(&y, t_start + 0.5 * h, &mut k2);
    for m in 0..d {
        y[m] = x[m] - h * k1[m] + 2.0 * h * k2[m];
    }
    field.velocity(&y, t_end, &mut k3);
    (0..d).map(|m| x[m] + h / 6.0 * (k1[m] + 4.0 * k2[m] + k3[m])).collect()
}
