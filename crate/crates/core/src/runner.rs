//! Configuration-driven Vlasov–Poisson benchmarks: Landau damping and the
//! two-stream instability, with CSV diagnostics, checkpoints, phase-space
//! slices and reversibility convergence studies.

use std::f64::consts::PI;
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::advect::{Axis, PhaseSpaceGrid};
use crate::cross::AcaParams;
use crate::error::{Result, SlarError};
use crate::field::{ModeOrdering, PhaseLayout};
use crate::ht::{io, HtTensor, RankBounds};
use crate::tree::{DimensionTree, TreeStrategy};
use crate::vp::{DiagnosticsRecord, StepOutput, VpSystem};

pub const CSV_NAME: &str = "diagnostics.csv";
pub const FINAL_CHECKPOINT: &str = "final.slar";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    Landau,
    TwoStream,
}

/// Which reversibility studies [`convergence_study`] runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    /// Mesh doubling from `n`, tolerance divided by 10 per level, fixed CFL.
    pub spatial: bool,
    /// CFL doubling from `cfl_base` on the finest mesh of the spatial study.
    pub temporal: bool,
    pub cfl_base: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig { spatial: true, temporal: true, cfl_base: 2.0 }
    }
}

/// Benchmark configuration. Fields left as `null` take the problem default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: Problem,
    pub d_x: usize,
    pub d_v: usize,
    /// Perturbation amplitude; 0.01 for Landau, 0.001 for two-stream.
    pub alpha: Option<f64>,
    /// Perturbation wavenumber; 0.5 for Landau, 0.2 for two-stream.
    pub k: Option<f64>,
    /// Beam drift of the two-stream problem.
    pub v0: f64,
    /// Velocity cut-off; 2π for Landau, 8 for two-stream.
    pub v_max: Option<f64>,
    /// Cells per mode.
    pub n: usize,
    pub cfl: f64,
    pub eps_base: f64,
    pub gamma: f64,
    pub r_min: usize,
    pub r_max: usize,
    /// Leaf rank floor; 3 for two-stream, 1 for Landau.
    pub leaf_rank_min: Option<usize>,
    pub r_hash_min: usize,
    pub r_hash_max: usize,
    /// Balanced, or paired-unbalanced for six modes.
    pub tree: Option<TreeStrategy>,
    pub ordering: ModeOrdering,
    pub t_final: f64,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Steps between checkpoints; 0 keeps only the final one.
    pub checkpoint_interval: usize,
    pub max_steps: Option<usize>,
    pub convergence: ConvergenceConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: Problem::Landau,
            d_x: 2,
            d_v: 2,
            alpha: None,
            k: None,
            v0: 2.4,
            v_max: None,
            n: 32,
            cfl: 5.0,
            eps_base: 5e-4,
            gamma: 0.1,
            r_min: 1,
            r_max: 64,
            leaf_rank_min: None,
            r_hash_min: 1,
            r_hash_max: 128,
            tree: None,
            ordering: ModeOrdering::Interleaved,
            t_final: 10.0,
            output_dir: PathBuf::from("slar-output"),
            seed: 0,
            checkpoint_interval: 0,
            max_steps: None,
            convergence: ConvergenceConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(match self.problem {
            Problem::Landau => 0.01,
            Problem::TwoStream => 0.001,
        })
    }

    pub fn k(&self) -> f64 {
        self.k.unwrap_or(match self.problem {
            Problem::Landau => 0.5,
            Problem::TwoStream => 0.2,
        })
    }

    pub fn v_max(&self) -> f64 {
        self.v_max.unwrap_or(match self.problem {
            Problem::Landau => 2.0 * PI,
            Problem::TwoStream => 8.0,
        })
    }

    pub fn leaf_rank_min(&self) -> usize {
        self.leaf_rank_min.unwrap_or(match self.problem {
            Problem::Landau => 1,
            Problem::TwoStream => 3,
        })
    }

    pub fn tree_strategy(&self) -> TreeStrategy {
        self.tree.unwrap_or(if self.d_x + self.d_v == 6 { TreeStrategy::PairedUnbalanced } else { TreeStrategy::Balanced })
    }

    pub fn aca_params(&self) -> AcaParams {
        let leaf = self.leaf_rank_min();
        AcaParams {
            eps_base: self.eps_base,
            gamma: self.gamma,
            r_min: self.r_min,
            r_max: self.r_max,
            leaf_rank_min: (leaf > self.r_min).then_some(leaf),
            r_hash_min: self.r_hash_min,
            r_hash_max: self.r_hash_max,
            rng_seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(SlarError::Config(m));
        if self.d_x == 0 || self.d_x > 3 || self.d_v != self.d_x {
            return fail(format!("unsupported dimensions d_x={}, d_v={}", self.d_x, self.d_v));
        }
        let (alpha, k, v_max) = (self.alpha(), self.k(), self.v_max());
        if !(alpha >= 0.0) || !(k > 0.0) || !(v_max > 0.0) || !self.v0.is_finite() {
            return fail(format!("invalid physical parameters alpha={alpha}, k={k}, v_max={v_max}, v0={}", self.v0));
        }
        if alpha * self.d_x as f64 > 1.0 {
            return fail(format!("alpha={alpha} makes the initial distribution negative for d_x={}", self.d_x));
        }
        if self.n < 2 {
            return fail(format!("need at least 2 cells per mode, got {}", self.n));
        }
        if !(self.cfl > 0.0) || !(self.t_final >= 0.0) {
            return fail(format!("invalid cfl={} or t_final={}", self.cfl, self.t_final));
        }
        if !(self.convergence.cfl_base > 0.0) {
            return fail(format!("invalid convergence cfl_base={}", self.convergence.cfl_base));
        }
        self.aca_params().validate()?;
        if self.tree_strategy() == TreeStrategy::PairedUnbalanced && (self.d_x + self.d_v) % 2 != 0 {
            return fail("paired tree needs an even number of modes".into());
        }
        Ok(())
    }
}

/// Names of the tensor modes, `x1.. / v1..`.
pub fn mode_names(layout: &PhaseLayout) -> Vec<String> {
    let mut names = vec![String::new(); layout.order()];
    for (j, (&x, &v)) in layout.spatial.iter().zip(&layout.velocity).enumerate() {
        names[x] = format!("x{}", j + 1);
        names[v] = format!("v{}", j + 1);
    }
    names
}

/// A configured problem: grid, mode layout, tree and solver.
pub struct Simulation {
    config: RunConfig,
    system: VpSystem,
}

impl Simulation {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let layout = PhaseLayout::with_ordering(config.d_x, config.ordering)?;
        let (length, v_max) = (2.0 * PI / config.k(), config.v_max());
        let mut axes = vec![None; layout.order()];
        for (&x, &v) in layout.spatial.iter().zip(&layout.velocity) {
            axes[x] = Some(Axis::periodic(0.0, length, config.n)?);
            axes[v] = Some(Axis::truncated(-v_max, v_max, config.n)?);
        }
        let grid = PhaseSpaceGrid::new(axes.into_iter().map(Option::unwrap).collect())?;
        let tree = Arc::new(DimensionTree::build(layout.order(), config.tree_strategy())?);
        let system = VpSystem::new(grid, layout, tree, config.aca_params())?;
        Ok(Simulation { config, system })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn system(&self) -> &VpSystem {
        &self.system
    }

    /// Exact low-rank initial condition, assembled from rank-one terms.
    pub fn initial_condition(&self) -> Result<HtTensor<f64>> {
        let grid = self.system.grid();
        let layout = self.system.layout();
        let tree = self.system.tree().clone();
        let (alpha, k, v0) = (self.config.alpha(), self.config.k(), self.config.v0);
        let d_x = layout.d_x();
        let gauss = |v: f64, c: f64| (-(v - c) * (v - c) / 2.0).exp();
        let centers = |m: usize| grid.axis(m).centers();
        let velocity_factor = |m: usize| -> Vec<f64> {
            match self.config.problem {
                Problem::Landau => centers(m).iter().map(|&v| gauss(v, 0.0)).collect(),
                Problem::TwoStream => centers(m).iter().map(|&v| gauss(v, v0) + gauss(v, -v0)).collect(),
            }
        };
        let amplitude = match self.config.problem {
            Problem::Landau => (2.0 * PI).powf(-(d_x as f64) / 2.0),
            Problem::TwoStream => 1.0 / (2f64.powi(d_x as i32) * (2.0 * PI).powf(d_x as f64 / 2.0)),
        };
        let mut base: Vec<Vec<f64>> = vec![Vec::new(); layout.order()];
        for (j, &x) in layout.spatial.iter().enumerate() {
            base[x] = vec![if j == 0 { amplitude } else { 1.0 }; grid.axis(x).n];
        }
        for &v in &layout.velocity {
            base[v] = velocity_factor(v);
        }
        let mut f = HtTensor::rank_one(tree.clone(), &base)?;
        if alpha != 0.0 {
            for &x in &layout.spatial {
                let mut factors = base.clone();
                factors[x] = centers(x).iter().map(|&c| amplitude * alpha * (k * c).cos()).collect();
                if x != layout.spatial[0] {
                    factors[layout.spatial[0]] = vec![1.0; grid.axis(layout.spatial[0]).n];
                }
                f = f.add(&HtTensor::rank_one(tree.clone(), &factors)?)?;
            }
            f = f.truncate_relative(1e-14, &RankBounds::unbounded()).0;
        }
        if self.config.problem == Problem::TwoStream {
            for &v in &layout.velocity {
                let c = centers(v);
                let beams = DMatrix::from_fn(c.len(), 2, |i, j| gauss(c[i], if j == 0 { v0 } else { -v0 }));
                let leaf = f.frame(f.tree().leaf_of_mode(v));
                let gram = beams.transpose() * &beams;
                let m = gram
                    .lu()
                    .solve(&(beams.transpose() * leaf))
                    .ok_or_else(|| SlarError::Config("two-stream beams are linearly dependent on this grid".into()))?;
                f = f.refactor_leaf(v, beams, &m)?;
            }
        }
        Ok(f)
    }

    fn remaining(&self, t: f64) -> f64 {
        self.config.t_final - t
    }

    /// Next step size from `t`, clipped to end exactly at `t_final`.
    fn next_dt(&self, fields: &crate::vp::FieldState, t: f64) -> (f64, bool) {
        let dt = self.system.compute_dt(fields, self.config.cfl);
        let left = self.remaining(t);
        if dt >= left {
            (left, true)
        } else {
            (dt, false)
        }
    }
}

pub fn build_initial_condition(cfg: &RunConfig) -> Result<HtTensor<f64>> {
    Simulation::new(cfg.clone())?.initial_condition()
}

/// State restored from a checkpoint file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub step: usize,
    pub time: f64,
    /// Step size that produced this state (0 initially).
    pub dt: f64,
    pub accessor_evals: u64,
    pub config: RunConfig,
}

pub fn save_checkpoint(path: impl AsRef<Path>, f: &HtTensor<f64>, meta: &CheckpointMeta) -> Result<()> {
    io::save(path, f, &serde_json::to_value(meta)?)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(HtTensor<f64>, CheckpointMeta)> {
    let (f, meta) = io::load::<f64>(path)?;
    Ok((f, serde_json::from_value(meta)?))
}

pub fn checkpoint_name(step: usize) -> String {
    format!("checkpoint_{step:06}.slar")
}

#[derive(Debug)]
pub struct RunOutput {
    pub records: Vec<DiagnosticsRecord>,
    pub state: HtTensor<f64>,
    pub time: f64,
    pub step: usize,
    pub csv_path: PathBuf,
    pub checkpoint: PathBuf,
}

/// Existing CSV rows with a step index below `step`, if the file is there.
fn rows_before(path: &Path, step: usize) -> Result<Vec<csv::StringRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for row in reader.records() {
        let row = row?;
        let s: usize = row.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| SlarError::Format(format!("bad step column in {}", path.display())))?;
        if s < step {
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Runs the configured problem from its initial condition, or from `resume`.
/// Diagnostics go to `diagnostics.csv` in the output directory; on resume,
/// rows up to the checkpoint are kept and the rest rewritten.
pub fn run(cfg: &RunConfig, resume: Option<&Path>) -> Result<RunOutput> {
    let sim = Simulation::new(cfg.clone())?;
    let sys = sim.system();
    let out_dir = cfg.output_dir.clone();
    fs::create_dir_all(&out_dir)?;
    let csv_path = out_dir.join(CSV_NAME);

    let (mut f, mut step, mut t, mut dt_prev, mut evals) = match resume {
        Some(path) => {
            let (f, meta) = load_checkpoint(path)?;
            if f.shape() != sys.grid().shape().as_slice() {
                return Err(SlarError::ShapeMismatch(format!("checkpoint shape {:?} does not match the configured grid", f.shape())));
            }
            (f, meta.step, meta.time, meta.dt, meta.accessor_evals)
        }
        None => (sim.initial_condition()?, 0, 0.0, 0.0, 0),
    };

    let kept = if resume.is_some() { rows_before(&csv_path, step)? } else { Vec::new() };
    let mut writer = csv::Writer::from_writer(File::create(&csv_path)?);
    writer.write_record(DiagnosticsRecord::csv_header(cfg.d_v))?;
    for row in &kept {
        writer.write_record(row)?;
    }

    let checkpoint = |f: &HtTensor<f64>, name: String, step: usize, time: f64, dt: f64, evals: u64| -> Result<PathBuf> {
        let path = out_dir.join(name);
        save_checkpoint(&path, f, &CheckpointMeta { step, time, dt, accessor_evals: evals, config: cfg.clone() })?;
        Ok(path)
    };

    let mut records = Vec::new();
    loop {
        let fields = sys.solve_fields(&f, step, 0).map_err(|e| step_error(step, e))?;
        let record = sys.diagnostics(&f, &fields, step, t, dt_prev, evals)?;
        writer.write_record(record.csv_row())?;
        writer.flush()?;
        log::info!(
            "step {step} t={t:.4} E={:.4e} mass={:.10e} max_rank={} evals={evals}",
            record.electric_energy,
            record.mass,
            record.max_rank
        );
        records.push(record);
        if step > 0 && cfg.checkpoint_interval > 0 && step % cfg.checkpoint_interval == 0 {
            checkpoint(&f, checkpoint_name(step), step, t, dt_prev, evals)?;
        }
        if sim.remaining(t) <= 0.0 || cfg.max_steps.is_some_and(|m| step >= m) {
            break;
        }
        let (dt, last) = sim.next_dt(&fields, t);
        let out: StepOutput = match sys.cf3_step(&f, t, dt, &fields, step) {
            Ok(out) => out,
            Err(e) => {
                let path = checkpoint(&f, format!("failure_{step:06}.slar"), step, t, dt_prev, evals)?;
                log::error!("step {step} failed, state saved to {}", path.display());
                return Err(step_error(step, e));
            }
        };
        if !out.f.is_finite() {
            let path = checkpoint(&f, format!("failure_{step:06}.slar"), step, t, dt_prev, evals)?;
            log::error!("step {step} produced non-finite values, state saved to {}", path.display());
            return Err(step_error(step, SlarError::NonFinite("distribution function".into())));
        }
        f = out.f;
        evals = out.evaluations;
        dt_prev = dt;
        t = if last { cfg.t_final } else { t + dt };
        step += 1;
    }
    let checkpoint = checkpoint(&f, FINAL_CHECKPOINT.into(), step, t, dt_prev, evals)?;
    Ok(RunOutput { records, state: f, time: t, step, csv_path, checkpoint })
}

fn step_error(step: usize, e: SlarError) -> SlarError {
    match e {
        SlarError::Step { .. } => e,
        e => SlarError::Step { step, source: Box::new(e) },
    }
}

/// A 2D cut through the distribution function.
#[derive(Clone, Debug)]
pub struct Slice {
    pub modes: (usize, usize),
    pub names: (String, String),
    pub coords: (Vec<f64>, Vec<f64>),
    /// `(mode, index, center)` of every fixed mode after snapping.
    pub fixed: Vec<(usize, usize, f64)>,
    /// `values[(i, j)] = f` at the `i`-th center of the first free mode and `j`-th of the second.
    pub values: DMatrix<f64>,
}

impl Slice {
    /// Tidy CSV, one row per point.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv_to(std::fs::File::create(path)?)
    }

    pub fn write_csv_to<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([self.names.0.as_str(), self.names.1.as_str(), "f"])?;
        for j in 0..self.coords.1.len() {
            for i in 0..self.coords.0.len() {
                w.write_record([format!("{:e}", self.coords.0[i]), format!("{:e}", self.coords.1[j]), format!("{:e}", self.values[(i, j)])])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Nearest cell center to `x`; an exact midpoint goes to the lower cell.
pub fn snap(axis: &Axis, x: f64) -> usize {
    let mut x = x;
    axis.settle(&mut x);
    let s = (x - axis.lo) / axis.dx() - 0.5;
    ((s - 0.5).ceil() as i64).clamp(0, axis.n as i64 - 1) as usize
}

/// Values of `f` over modes `free`, with every other mode fixed at the
/// center nearest to the corresponding entry of `fixed` (in mode order).
pub fn extract_slice(f: &HtTensor<f64>, grid: &PhaseSpaceGrid, free: (usize, usize), fixed: &[f64], names: &[String]) -> Result<Slice> {
    let d = f.order();
    let (mu, nu) = free;
    if mu >= d || nu >= d || mu == nu {
        return Err(SlarError::Config(format!("invalid slice modes ({mu}, {nu}) for order {d}")));
    }
    if fixed.len() != d - 2 {
        return Err(SlarError::Config(format!("expected {} fixed values, got {}", d - 2, fixed.len())));
    }
    if grid.shape() != f.shape() {
        return Err(SlarError::ShapeMismatch("grid and tensor disagree".into()));
    }
    let mut idx = vec![0; d];
    let mut snapped = Vec::new();
    let mut values = fixed.iter();
    for m in (0..d).filter(|&m| m != mu && m != nu) {
        let axis = grid.axis(m);
        idx[m] = snap(axis, *values.next().unwrap());
        snapped.push((m, idx[m], axis.center(idx[m])));
    }
    let (n_mu, n_nu) = (f.shape()[mu], f.shape()[nu]);
    let mut scratch = f.new_scratch();
    let values = DMatrix::from_fn(n_mu, n_nu, |i, j| {
        idx[mu] = i;
        idx[nu] = j;
        f.entry_with(&idx, &mut scratch)
    });
    let name = |m: usize| names.get(m).cloned().unwrap_or_else(|| format!("mode{m}"));
    Ok(Slice {
        modes: free,
        names: (name(mu), name(nu)),
        coords: (grid.axis(mu).centers(), grid.axis(nu).centers()),
        fixed: snapped,
        values,
    })
}

/// Outcome of one forward-flip-backward reversibility run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReversibilityResult {
    pub n: usize,
    pub cfl: f64,
    pub eps_base: f64,
    pub steps: usize,
    /// Discrete L² distance to the initial condition.
    pub error: f64,
}

fn flip_velocities(f: &HtTensor<f64>, layout: &PhaseLayout) -> Result<HtTensor<f64>> {
    layout.velocity.iter().try_fold(f.clone(), |g, &v| g.reverse_leaf_rows(v))
}

/// Evolves to `t_final`, reflects every velocity, evolves for `t_final`
/// again, reflects back and measures the distance to the initial condition.
pub fn reversibility_error(cfg: &RunConfig) -> Result<ReversibilityResult> {
    let sim = Simulation::new(cfg.clone())?;
    let sys = sim.system();
    let f0 = sim.initial_condition()?;
    let mut f = f0.clone();
    let mut step = 0;
    for leg in 0..2 {
        let mut t = 0.0;
        while sim.remaining(t) > 0.0 {
            let fields = sys.solve_fields(&f, step, 0)?;
            let (dt, last) = sim.next_dt(&fields, t);
            f = sys.cf3_step(&f, t, dt, &fields, step).map_err(|e| step_error(step, e))?.f;
            t = if last { cfg.t_final } else { t + dt };
            step += 1;
        }
        f = flip_velocities(&f, sys.layout())?;
        log::info!("reversibility N={} cfl={} leg {leg} done after {step} steps", cfg.n, cfg.cfl);
    }
    let error = f.sub(&f0)?.norm() * sys.grid().cell_volume().sqrt();
    Ok(ReversibilityResult { n: cfg.n, cfl: cfg.cfl, eps_base: cfg.eps_base, steps: step, error })
}

/// Least-squares slope of `log err` against `log h`.
pub fn fitted_order(h: &[f64], err: &[f64]) -> f64 {
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ConvergenceTable {
    pub spatial: Vec<ReversibilityResult>,
    pub temporal: Vec<ReversibilityResult>,
    /// Order in `h ∝ 1/N`.
    pub spatial_order: Option<f64>,
    /// Order in `Δt ∝ CFL`.
    pub temporal_order: Option<f64>,
}

impl ConvergenceTable {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["study", "n", "cfl", "eps_base", "steps", "error", "order"])?;
        for (study, rows, h) in [
            ("spatial", &self.spatial, self.spatial.iter().map(|r| 1.0 / r.n as f64).collect::<Vec<_>>()),
            ("temporal", &self.temporal, self.temporal.iter().map(|r| r.cfl).collect()),
        ] {
            for (i, r) in rows.iter().enumerate() {
                let order = if i == 0 { String::new() } else { format!("{:e}", (r.error / rows[i - 1].error).ln() / (h[i] / h[i - 1]).ln()) };
                w.write_record([
                    study.to_string(),
                    r.n.to_string(),
                    format!("{:e}", r.cfl),
                    format!("{:e}", r.eps_base),
                    r.steps.to_string(),
                    format!("{:e}", r.error),
                    order,
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Reversibility errors over `levels` refinements and their fitted orders.
/// Spatial level `l` uses `N = n·2^l` and `ε = ε_Base·10^{-l}` at the configured
/// CFL; temporal level `l` uses `CFL = cfl_base·2^l` on the finest spatial level.
pub fn convergence_study(cfg: &RunConfig, levels: usize) -> Result<ConvergenceTable> {
    if levels < 3 {
        return Err(SlarError::Config(format!("a convergence study needs at least 3 levels, got {levels}")));
    }
    let level = |l: usize| RunConfig { n: cfg.n << l, eps_base: cfg.eps_base * 10f64.powi(-(l as i32)), ..cfg.clone() };
    let mut table = ConvergenceTable::default();
    if cfg.convergence.spatial {
        table.spatial = (0..levels).map(|l| reversibility_error(&level(l))).collect::<Result<_>>()?;
        let h: Vec<f64> = table.spatial.iter().map(|r| 1.0 / r.n as f64).collect();
        let e: Vec<f64> = table.spatial.iter().map(|r| r.error).collect();
        table.spatial_order = Some(fitted_order(&h, &e));
    }
    if cfg.convergence.temporal {
        let finest = level(levels - 1);
        table.temporal = (0..levels)
            .map(|l| reversibility_error(&RunConfig { cfl: cfg.convergence.cfl_base * 2f64.powi(l as i32), ..finest.clone() }))
            .collect::<Result<_>>()?;
        let h: Vec<f64> = table.temporal.iter().map(|r| r.cfl).collect();
        let e: Vec<f64> = table.temporal.iter().map(|r| r.error).collect();
        table.temporal_order = Some(fitted_order(&h, &e));
    }
    Ok(table)
}

#[cfg(test)]
mod tests;
