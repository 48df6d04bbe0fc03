//! Full-grid reference solver: the same semi-Lagrangian scheme and CF3 stages
//! on dense arrays, with a dense FFT Poisson solver. Only practical for small
//! grids; used to validate the compressed solver.

use rayon::prelude::*;
use rustfft::FftPlanner;

use super::{FieldId, FieldState, StageInput, VpField, VpSystem, CF3_STAGES};
use crate::advect::{SampledField, SlAccessor, VelocityField};
use crate::cross::EntryAccessor;
use crate::error::Result;
use crate::ht::DenseTensor;
use crate::index;
use crate::scalar::C64;

pub struct DenseVp<'a> {
    system: &'a VpSystem,
}

impl<'a> DenseVp<'a> {
    pub fn new(system: &'a VpSystem) -> Self {
        DenseVp { system }
    }

    /// `ρ = ρ₀ - ∫ f dv` on the spatial grid, `ρ₀` the mean of `∫ f dv`.
    pub fn density(&self, f: &DenseTensor<f64>) -> DenseTensor<f64> {
        let grid = self.system.grid();
        let layout = self.system.layout();
        let sshape = self.system.spatial_grid().shape();
        let mut charge = DenseTensor::from_fn(&sshape, |_| 0.0);
        let dv: f64 = layout.velocity.iter().map(|&m| grid.dx(m)).product();
        let mut sidx = vec![0; layout.d_x()];
        for (lin, &v) in f.data.iter().enumerate() {
            let idx = index::delinearize(&f.shape, lin).unwrap();
            for (j, &m) in layout.spatial.iter().enumerate() {
                sidx[j] = idx[m];
            }
            let k = index::linearize(&sshape, &sidx).unwrap();
            charge.data[k] += v * dv;
        }
        let mean = charge.data.iter().sum::<f64>() / charge.data.len() as f64;
        DenseTensor { shape: sshape, data: charge.data.iter().map(|c| mean - c).collect() }
    }

    /// Electric field of `f` by a dense spectral Poisson solve.
    pub fn field(&self, f: &DenseTensor<f64>) -> Result<SampledField> {
        let rho = self.density(f);
        let shape = rho.shape.clone();
        let mut hat: Vec<C64> = rho.data.iter().map(|&v| C64::new(v, 0.0)).collect();
        fft_nd(&mut hat, &shape, false);
        let spectral = self.system.spectral();
        for (lin, v) in hat.iter_mut().enumerate() {
            let idx = index::delinearize(&shape, lin).unwrap();
            let k2 = spectral.k_squared(&idx);
            *v = if k2 == 0.0 { C64::new(0.0, 0.0) } else { *v / k2 };
        }
        let mut components = Vec::new();
        for mode in 0..shape.len() {
            let k = spectral.wavenumbers(mode);
            let mut e: Vec<C64> = hat
                .iter()
                .enumerate()
                .map(|(lin, &p)| {
                    let i = index::delinearize(&shape, lin).unwrap()[mode];
                    p * C64::new(0.0, -k[i])
                })
                .collect();
            fft_nd(&mut e, &shape, true);
            components.push(DenseTensor { shape: shape.clone(), data: e.iter().map(|v| v.re).collect() });
        }
        SampledField::new(self.system.spatial_grid().clone(), components)
    }

    pub fn field_state(&self, f: &DenseTensor<f64>) -> Result<FieldState> {
        Ok(FieldState { set: None, sampled: self.field(f)?, evaluations: 0 })
    }

    /// Semi-Lagrangian transport of every grid value.
    pub fn transport(&self, f: &DenseTensor<f64>, t_n: f64, dt: f64, field: &dyn VelocityField) -> Result<DenseTensor<f64>> {
        let acc = SlAccessor::new(f, self.system.grid(), t_n, t_n + dt, field)?;
        let shape = f.shape.clone();
        let data = (0..f.data.len())
            .into_par_iter()
            .map(|lin| acc.eval(&index::delinearize(&shape, lin).unwrap()))
            .collect();
        Ok(DenseTensor { shape, data })
    }

    /// One CF3 step; `e_n` is the field of `f_n`.
    pub fn cf3_step(&self, f_n: &DenseTensor<f64>, t_n: f64, dt: f64, e_n: &SampledField) -> Result<DenseTensor<f64>> {
        let mut e1 = None;
        let mut e2 = None;
        let mut f1 = None;
        let mut result = None;
        for (s, stage) in CF3_STAGES.iter().enumerate() {
            let input = match stage.input {
                StageInput::Initial => f_n,
                StageInput::Stage1 => f1.as_ref().unwrap(),
            };
            let terms: Vec<(f64, &SampledField)> = stage
                .field
                .iter()
                .map(|&(c, id)| {
                    let e = match id {
                        FieldId::En => e_n,
                        FieldId::E1 => e1.as_ref().unwrap(),
                        FieldId::E2 => e2.as_ref().unwrap(),
                    };
                    (c, e)
                })
                .collect();
            let e = SampledField::combine(&terms)?;
            let out = self.transport(input, t_n, dt, &VpField::new(self.system.layout(), stage.v_scale, &e))?;
            match s {
                0 => {
                    e1 = Some(self.field(&out)?);
                    f1 = Some(out);
                }
                1 => e2 = Some(self.field(&out)?),
                _ => result = Some(out),
            }
        }
        Ok(result.unwrap())
    }
}

/// In-place multi-dimensional DFT of column-major data; the inverse is scaled by `1/N`.
pub fn fft_nd(data: &mut [C64], shape: &[usize], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let mut stride = 1;
    for &n in shape {
        let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        let block = stride * n;
        let mut line = vec![C64::new(0.0, 0.0); n];
        for start in (0..data.len()).step_by(block) {
            for offset in 0..stride {
                for (i, l) in line.iter_mut().enumerate() {
                    *l = data[start + offset + i * stride];
                }
                fft.process(&mut line);
                for (i, l) in line.iter().enumerate() {
                    data[start + offset + i * stride] = if inverse { *l / n as f64 } else { *l };
                }
            }
        }
        stride = block;
    }
}
