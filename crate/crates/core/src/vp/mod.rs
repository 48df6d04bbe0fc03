//! Vlasov–Poisson time integration with SLAR steps and the CF3 exponential integrator.

pub mod reference;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::advect::{Boundary, HtStencil, PhaseSpaceGrid, SampledField, SlAccessor, VelocityField};
use crate::cross::{htaca, AcaParams, HtacaStats};
use crate::error::{Result, SlarError};
use crate::field::{compute_density, solve_poisson, FieldSet, PhaseLayout, SpectralGrid};
use crate::ht::{HtTensor, DENSE_CAP};
use crate::index;
use crate::tree::DimensionTree;

/// Smallest admissible time step.
pub const DT_FLOOR: f64 = 1e-6;
/// Poisson tolerance relative to the kinetic tolerance.
pub const POISSON_TOL_FACTOR: f64 = 0.1;

/// Label of an electric field within one CF3 step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FieldId {
    /// Field of the step's initial state.
    En,
    /// Field of the first stage result.
    E1,
    /// Field of the second stage result.
    E2,
}

/// Which distribution a stage starts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StageInput {
    Initial,
    Stage1,
}

/// One linear advection of the CF3 scheme: `dx/dt = v_scale * v`,
/// `dv/dt = -Σ c_k E_k(x)`, frozen over the whole step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cf3Stage {
    pub input: StageInput,
    pub v_scale: f64,
    pub field: &'static [(f64, FieldId)],
}

pub const CF3_STAGES: [Cf3Stage; 3] = [
    Cf3Stage { input: StageInput::Initial, v_scale: 1.0 / 3.0, field: &[(1.0 / 3.0, FieldId::En)] },
    Cf3Stage { input: StageInput::Initial, v_scale: 2.0 / 3.0, field: &[(2.0 / 3.0, FieldId::E1)] },
    Cf3Stage { input: StageInput::Stage1, v_scale: 2.0 / 3.0, field: &[(-1.0 / 12.0, FieldId::En), (3.0 / 4.0, FieldId::E2)] },
];

/// Characteristic velocity of a frozen VP stage: `(c v, -E(x))`.
pub struct VpField<'a> {
    layout: &'a PhaseLayout,
    v_scale: f64,
    e: &'a SampledField,
}

impl<'a> VpField<'a> {
    /// `e` is the already scaled stage field.
    pub fn new(layout: &'a PhaseLayout, v_scale: f64, e: &'a SampledField) -> Self {
        VpField { layout, v_scale, e }
    }
}

impl VelocityField for VpField<'_> {
    fn velocity(&self, x: &[f64], _t: f64, out: &mut [f64]) {
        let d_x = self.layout.d_x();
        let mut xs = [0.0; 8];
        let mut e = [0.0; 8];
        for (j, &m) in self.layout.spatial.iter().enumerate() {
            xs[j] = x[m];
        }
        self.e.eval(&xs[..d_x], &mut e[..d_x]);
        for j in 0..d_x {
            out[self.layout.spatial[j]] = self.v_scale * x[self.layout.velocity[j]];
            out[self.layout.velocity[j]] = -e[j];
        }
    }
}

/// Result of one SLAR transport.
#[derive(Clone, Debug)]
pub struct SlarOutput {
    pub tensor: HtTensor<f64>,
    pub stats: HtacaStats,
    /// Feet clamped back into the velocity box.
    pub clamps: u64,
}

/// `F^{n+1} = SLAR(F^n, t_n, t_{n+1}, a)`: HTACA of the semi-Lagrangian accessor.
pub fn slar_step(
    f: &HtTensor<f64>,
    grid: &PhaseSpaceGrid,
    t_n: f64,
    t_next: f64,
    field: &dyn VelocityField,
    params: &AcaParams,
) -> Result<SlarOutput> {
    let src = HtStencil::new(f);
    let acc = SlAccessor::new(&src, grid, t_n, t_next, field)?;
    let out = htaca(&acc, f.tree_arc(), params)?;
    Ok(SlarOutput { tensor: out.tensor, stats: out.stats, clamps: acc.clamp_count() })
}

/// Electric field of one state, compressed and sampled.
#[derive(Clone, Debug)]
pub struct FieldState {
    /// `None` when an external field is imposed.
    pub set: Option<FieldSet>,
    /// Real parts of the components on the spatial grid.
    pub sampled: SampledField,
    pub evaluations: u64,
}

/// Applied coefficients and cost of one CF3 stage.
#[derive(Clone, Debug, Serialize)]
pub struct StageRecord {
    pub input: StageInput,
    pub v_scale: f64,
    pub field: Vec<(f64, FieldId)>,
    pub evaluations: u64,
    pub clamps: u64,
    pub saturated: usize,
    pub ranks: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct StepOutput {
    pub f: HtTensor<f64>,
    pub stages: Vec<StageRecord>,
    /// Accessor evaluations of all stages and intermediate field solves.
    pub evaluations: u64,
}

/// Snapshot of conserved quantities and cost indicators.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub electric_energy: f64,
    pub mass: f64,
    pub momentum: Vec<f64>,
    pub kinetic_energy: f64,
    pub total_energy: f64,
    pub compression_ratio: f64,
    pub max_rank: usize,
    pub ranks: Vec<usize>,
    pub accessor_evals: u64,
    pub min_entry: f64,
}

impl DiagnosticsRecord {
    pub fn csv_header(d_v: usize) -> Vec<String> {
        let mut h: Vec<String> = ["step", "time", "dt", "electric_energy", "mass"].iter().map(|s| s.to_string()).collect();
        h.extend((1..=d_v).map(|j| format!("momentum_{j}")));
        h.extend(["total_energy", "compression_ratio", "max_rank", "accessor_evals", "min_entry"].iter().map(|s| s.to_string()));
        h
    }

    pub fn csv_row(&self) -> Vec<String> {
        let mut r = vec![
            self.step.to_string(),
            fmt_f64(self.time),
            fmt_f64(self.dt),
            fmt_f64(self.electric_energy),
            fmt_f64(self.mass),
        ];
        r.extend(self.momentum.iter().map(|&m| fmt_f64(m)));
        r.extend([
            fmt_f64(self.total_energy),
            fmt_f64(self.compression_ratio),
            self.max_rank.to_string(),
            self.accessor_evals.to_string(),
            fmt_f64(self.min_entry),
        ]);
        r
    }
}

/// Round-trip exact formatting.
fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

/// Decorrelated seed for a given step and stage.
pub fn stage_seed(seed: u64, step: usize, stage: usize) -> u64 {
    let mut z = seed ^ (step as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (stage as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A discretized Vlasov–Poisson problem: periodic spatial modes, truncated velocity modes.
#[derive(Clone, Debug)]
pub struct VpSystem {
    grid: PhaseSpaceGrid,
    layout: PhaseLayout,
    tree: Arc<DimensionTree>,
    params: AcaParams,
    spatial_grid: PhaseSpaceGrid,
    spectral: SpectralGrid,
    external_field: Option<SampledField>,
}

impl VpSystem {
    pub fn new(grid: PhaseSpaceGrid, layout: PhaseLayout, tree: Arc<DimensionTree>, params: AcaParams) -> Result<Self> {
        params.validate()?;
        if layout.order() != grid.order() || tree.n_modes() != grid.order() {
            return Err(SlarError::Config("grid, layout and tree have different orders".into()));
        }
        if layout.d_x() > 8 {
            return Err(SlarError::Config("at most 8 spatial dimensions are supported".into()));
        }
        if layout.spatial.iter().any(|&m| grid.axis(m).boundary != Boundary::Periodic)
            || layout.velocity.iter().any(|&m| grid.axis(m).boundary != Boundary::Truncated)
        {
            return Err(SlarError::Config("spatial modes must be periodic and velocity modes truncated".into()));
        }
        let spatial_grid = grid.select(&layout.spatial);
        let spectral = SpectralGrid::from_grid(&spatial_grid)?;
        Ok(VpSystem { grid, layout, tree, params, spatial_grid, spectral, external_field: None })
    }

    /// Replaces the self-consistent field by a fixed one in every stage.
    pub fn with_external_field(mut self, field: SampledField) -> Result<Self> {
        if field.grid() != &self.spatial_grid || field.n_components() != self.layout.d_x() {
            return Err(SlarError::ShapeMismatch("external field does not match the spatial grid".into()));
        }
        self.external_field = Some(field);
        Ok(self)
    }

    pub fn grid(&self) -> &PhaseSpaceGrid {
        &self.grid
    }

    pub fn layout(&self) -> &PhaseLayout {
        &self.layout
    }

    pub fn tree(&self) -> &Arc<DimensionTree> {
        &self.tree
    }

    pub fn params(&self) -> &AcaParams {
        &self.params
    }

    pub fn spatial_grid(&self) -> &PhaseSpaceGrid {
        &self.spatial_grid
    }

    pub fn spectral(&self) -> &SpectralGrid {
        &self.spectral
    }

    fn stage_params(&self, step: usize, stage: usize) -> AcaParams {
        AcaParams { rng_seed: stage_seed(self.params.rng_seed, step, stage), ..self.params.clone() }
    }

    /// Electric field of `f`; `stage` only decorrelates the random pivot sampling.
    pub fn solve_fields(&self, f: &HtTensor<f64>, step: usize, stage: usize) -> Result<FieldState> {
        if let Some(e) = &self.external_field {
            return Ok(FieldState { set: None, sampled: e.clone(), evaluations: 0 });
        }
        let density = compute_density(f, &self.grid, &self.layout)?;
        let params = self.stage_params(step, 16 + stage);
        let set = solve_poisson(&density.rho.to_complex(), &self.spectral, POISSON_TOL_FACTOR * self.params.eps_base, &params)?;
        let sampled = SampledField::from_ht(&set.e, self.spatial_grid.clone())?;
        let evaluations = set.stats.as_ref().map_or(0, |s| s.evaluations);
        Ok(FieldState { set: Some(set), sampled, evaluations })
    }

    /// One CF3 step of size `dt` from `f_n`, whose field is `fields_n`.
    pub fn cf3_step(&self, f_n: &HtTensor<f64>, t_n: f64, dt: f64, fields_n: &FieldState, step: usize) -> Result<StepOutput> {
        if !(dt > 0.0) {
            return Err(SlarError::Config(format!("time step must be positive, got {dt}")));
        }
        let mut e1: Option<FieldState> = None;
        let mut e2: Option<FieldState> = None;
        let mut f1: Option<HtTensor<f64>> = None;
        let mut stages = Vec::with_capacity(3);
        let mut evaluations = 0;
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
                    let state = match id {
                        FieldId::En => fields_n,
                        FieldId::E1 => e1.as_ref().unwrap(),
                        FieldId::E2 => e2.as_ref().unwrap(),
                    };
                    (c, &state.sampled)
                })
                .collect();
            let e = SampledField::combine(&terms)?;
            let field = VpField::new(&self.layout, stage.v_scale, &e);
            let out = slar_step(input, &self.grid, t_n, t_n + dt, &field, &self.stage_params(step, s))?;
            evaluations += out.stats.evaluations;
            stages.push(StageRecord {
                input: stage.input,
                v_scale: stage.v_scale,
                field: stage.field.to_vec(),
                evaluations: out.stats.evaluations,
                clamps: out.clamps,
                saturated: out.stats.saturated,
                ranks: out.tensor.ranks(),
            });
            match s {
                0 => {
                    let state = self.solve_fields(&out.tensor, step, 1)?;
                    evaluations += state.evaluations;
                    e1 = Some(state);
                    f1 = Some(out.tensor);
                }
                1 => {
                    let state = self.solve_fields(&out.tensor, step, 2)?;
                    evaluations += state.evaluations;
                    e2 = Some(state);
                }
                _ => result = Some(out.tensor),
            }
        }
        Ok(StepOutput { f: result.unwrap(), stages, evaluations })
    }

    /// `dt = CFL / (Σ v_max/Δx + Σ Ē/Δv)` with `Ē` the root-mean-square field, floored at [`DT_FLOOR`].
    pub fn compute_dt(&self, fields: &FieldState, cfl: f64) -> f64 {
        let rms = rms(&fields.sampled);
        let mut denom = 0.0;
        for (j, (&x, &v)) in self.layout.spatial.iter().zip(&self.layout.velocity).enumerate() {
            let va = self.grid.axis(v);
            let v_max = va.lo.abs().max(va.hi.abs());
            denom += v_max / self.grid.dx(x) + rms[j] / va.dx();
        }
        (cfl / denom).max(DT_FLOOR)
    }

    /// `½ Σ_μ ‖E_μ‖² ΔV` from the sampled field.
    pub fn electric_energy(&self, fields: &FieldState) -> f64 {
        let dv = self.spatial_grid.cell_volume();
        0.5 * fields.sampled.components().iter().map(|c| c.norm().powi(2)).sum::<f64>() * dv
    }

    pub fn diagnostics(&self, f: &HtTensor<f64>, fields: &FieldState, step: usize, time: f64, dt: f64, accessor_evals: u64) -> Result<DiagnosticsRecord> {
        let weights = |m: usize, g: &dyn Fn(f64) -> f64| -> Vec<f64> {
            let a = self.grid.axis(m);
            a.centers().iter().map(|&c| g(c) * a.dx()).collect()
        };
        let base: Vec<Vec<f64>> = (0..f.order()).map(|m| weights(m, &|_| 1.0)).collect();
        let mass = f.contract_all(&base)?;
        let mut momentum = Vec::new();
        let mut kinetic = 0.0;
        for &v in &self.layout.velocity {
            let mut w = base.clone();
            w[v] = weights(v, &|c| c);
            momentum.push(f.contract_all(&w)?);
            w[v] = weights(v, &|c| 0.5 * c * c);
            kinetic += f.contract_all(&w)?;
        }
        let electric_energy = self.electric_energy(fields);
        Ok(DiagnosticsRecord {
            step,
            time,
            dt,
            electric_energy,
            mass,
            momentum,
            kinetic_energy: kinetic,
            total_energy: kinetic + electric_energy,
            compression_ratio: f.compression_ratio(),
            max_rank: f.max_rank(),
            ranks: f.ranks(),
            accessor_evals,
            min_entry: min_entry(f)?,
        })
    }
}

/// Root-mean-square magnitude of every component.
pub fn rms(field: &SampledField) -> Vec<f64> {
    field.components().iter().map(|c| c.norm() / (c.data.len() as f64).sqrt()).collect()
}

/// Number of random entries inspected by [`min_entry`] on large tensors.
const MIN_ENTRY_SAMPLES: usize = 1 << 14;

/// Smallest entry: exact up to 2^20 entries, otherwise over a fixed pseudo-random sample.
pub fn min_entry(f: &HtTensor<f64>) -> Result<f64> {
    let total = index::numel(f.shape());
    if total <= (1u128 << 20) && total <= DENSE_CAP as u128 {
        return Ok(f.full()?.data.iter().copied().fold(f64::INFINITY, f64::min));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut scratch = f.new_scratch();
    let mut idx = vec![0; f.order()];
    let mut min = f64::INFINITY;
    for _ in 0..MIN_ENTRY_SAMPLES {
        for (i, &n) in idx.iter_mut().zip(f.shape()) {
            *i = rng.random_range(0..n);
        }
        min = min.min(f.entry_with(&idx, &mut scratch));
    }
    Ok(min)
}
