use std::sync::atomic::{AtomicU64, Ordering};

use super::p2::{p2_interpolate, stencil_size};
use super::stencil::{HtStencil, StencilSource};
use super::{trace_rk3, PhaseSpaceGrid, VelocityField};
use crate::cross::EntryAccessor;
use crate::error::{Result, SlarError};
use crate::ht::{DenseTensor, HtTensor};
use crate::scalar::{Scalar, C64};

/// `P²` reconstruction of the gridded data in `source` at the point `x`.
pub fn reconstruct<T: Scalar>(grid: &PhaseSpaceGrid, source: &dyn StencilSource<T>, x: &[f64]) -> T {
    let d = grid.order();
    let mut rows = Vec::with_capacity(d);
    let mut xi = Vec::with_capacity(d);
    for (a, &xm) in grid.axes().iter().zip(x) {
        let (i, e) = a.locate(xm);
        rows.push(a.neighbors(i));
        xi.push(e);
    }
    let mut values = vec![T::zero(); stencil_size(d)];
    source.gather(&rows, &mut values);
    p2_interpolate(&values, &xi)
}

/// Entries of the solution at the new time level: every grid point is traced
/// back to its foot, where the previous solution is reconstructed.
pub struct SlAccessor<'a, T: Scalar> {
    source: &'a dyn StencilSource<T>,
    grid: &'a PhaseSpaceGrid,
    shape: Vec<usize>,
    t_prev: f64,
    t_next: f64,
    field: &'a dyn VelocityField,
    clamps: AtomicU64,
}

impl<'a, T: Scalar> SlAccessor<'a, T> {
    pub fn new(source: &'a dyn StencilSource<T>, grid: &'a PhaseSpaceGrid, t_prev: f64, t_next: f64, field: &'a dyn VelocityField) -> Result<Self> {
        let shape = grid.shape();
        if source.shape() != shape.as_slice() {
            return Err(SlarError::ShapeMismatch(format!("data shape {:?} vs grid {:?}", source.shape(), shape)));
        }
        Ok(SlAccessor { source, grid, shape, t_prev, t_next, field, clamps: AtomicU64::new(0) })
    }

    /// Number of feet that left a truncated mode and were clamped back.
    pub fn clamp_count(&self) -> u64 {
        self.clamps.load(Ordering::Relaxed)
    }

    /// Characteristic foot of the grid point `idx`, after wrapping and clamping.
    pub fn foot(&self, idx: &[usize]) -> Vec<f64> {
        let x = self.grid.point(idx);
        let mut foot = trace_rk3(self.field, &x, self.t_next, self.t_prev);
        if self.grid.settle(&mut foot) {
            self.clamps.fetch_add(1, Ordering::Relaxed);
        }
        foot
    }
}

impl<T: Scalar> EntryAccessor<T> for SlAccessor<'_, T> {
    fn shape(&self) -> &[usize] {
        &self.shape
    }

    fn eval(&self, idx: &[usize]) -> T {
        let foot = self.foot(idx);
        reconstruct(self.grid, self.source, &foot)
    }
}

/// Real parts of the `P²` reconstructions of every field component at `x`.
pub fn eval_field_offgrid(components: &[HtTensor<C64>], x: &[f64], grid: &PhaseSpaceGrid) -> Vec<f64> {
    components.iter().map(|c| reconstruct(grid, &HtStencil::new(c), x).re).collect()
}

/// A vector field sampled densely on a (small) spatial grid.
#[derive(Clone, Debug)]
pub struct SampledField {
    grid: PhaseSpaceGrid,
    components: Vec<DenseTensor<f64>>,
}

impl SampledField {
    pub fn new(grid: PhaseSpaceGrid, components: Vec<DenseTensor<f64>>) -> Result<Self> {
        let shape = grid.shape();
        if let Some(c) = components.iter().find(|c| c.shape != shape) {
            return Err(SlarError::ShapeMismatch(format!("component shape {:?} vs grid {:?}", c.shape, shape)));
        }
        Ok(SampledField { grid, components })
    }

    pub fn zeros(grid: PhaseSpaceGrid, n_components: usize) -> Self {
        let shape = grid.shape();
        let components = (0..n_components).map(|_| DenseTensor::from_fn(&shape, |_| 0.0)).collect();
        SampledField { grid, components }
    }

    /// Samples the real parts of HT field components on every grid point.
    pub fn from_ht(components: &[HtTensor<C64>], grid: PhaseSpaceGrid) -> Result<Self> {
        let components = components
            .iter()
            .map(|c| {
                let full = c.full()?;
                Ok(DenseTensor { shape: full.shape, data: full.data.iter().map(|v| v.re).collect() })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, components)
    }

    /// `Σ c_k F_k` over fields on the same grid.
    pub fn combine(terms: &[(f64, &SampledField)]) -> Result<Self> {
        let (_, first) = terms.first().ok_or_else(|| SlarError::Config("empty field combination".into()))?;
        let mut out = SampledField::zeros(first.grid.clone(), first.components.len());
        for (c, f) in terms {
            if f.grid != first.grid || f.components.len() != first.components.len() {
                return Err(SlarError::ShapeMismatch("field combination over different grids".into()));
            }
            for (o, s) in out.components.iter_mut().zip(&f.components) {
                for (a, b) in o.data.iter_mut().zip(&s.data) {
                    *a += c * b;
                }
            }
        }
        Ok(out)
    }

    pub fn grid(&self) -> &PhaseSpaceGrid {
        &self.grid
    }

    pub fn components(&self) -> &[DenseTensor<f64>] {
        &self.components
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Reconstructs every component at `x`.
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = reconstruct(&self.grid, c, x);
        }
    }
}
