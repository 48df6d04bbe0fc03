use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::accessor::{eval_batch, CountingAccessor, EntryAccessor, Residual, Restricted};
use super::pivot::{recursive_pivot_search, IndexSets};
use super::safeguarded_reciprocal;
use crate::error::{Result, SlarError};
use crate::ht::{HtTensor, RankBounds};
use crate::scalar::Scalar;
use crate::tree::DimensionTree;

/// Tolerances, rank bounds and correction bounds of HTACA.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcaParams {
    /// Relative tolerance `ε_Base`.
    pub eps_base: f64,
    /// Decay factor of the pivot tolerance towards the leaves.
    pub gamma: f64,
    pub r_min: usize,
    pub r_max: usize,
    /// Optional floor for leaf ranks, overriding `r_min` at leaves.
    pub leaf_rank_min: Option<usize>,
    /// Minimal number of rank-one corrections per subtree.
    pub r_hash_min: usize,
    /// Maximal number of rank-one corrections per subtree.
    pub r_hash_max: usize,
    pub rng_seed: u64,
}

impl Default for AcaParams {
    fn default() -> Self {
        AcaParams {
            eps_base: 1e-5,
            gamma: 0.1,
            r_min: 1,
            r_max: 64,
            leaf_rank_min: None,
            r_hash_min: 1,
            r_hash_max: 128,
            rng_seed: 0,
        }
    }
}

impl AcaParams {
    pub fn with_eps(eps_base: f64) -> Self {
        AcaParams { eps_base, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SlarError::Config(m.to_string()));
        if !(self.eps_base > 0.0) {
            return bad("eps_base must be positive");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if self.r_min == 0 || self.r_min > self.r_max {
            return bad("rank bounds must satisfy 1 <= r_min <= r_max");
        }
        if self.r_hash_min > self.r_hash_max || self.r_hash_max == 0 {
            return bad("correction bounds must satisfy r_hash_min <= r_hash_max, r_hash_max >= 1");
        }
        Ok(())
    }

    pub fn bounds(&self) -> RankBounds {
        let b = RankBounds::uniform(self.r_min, self.r_max);
        match self.leaf_rank_min {
            Some(m) => b.with_leaf_min(m),
            None => b,
        }
    }
}

/// `ε_C = γ^(depth(T) - height(α)) · ε_Base · estimate`, where `height(α)` is the
/// depth of the subtree rooted at `α` and `estimate` approximates `‖X‖_max`.
pub fn pivot_tolerance(params: &AcaParams, tree_depth: usize, subtree_depth: usize, estimate: f64) -> f64 {
    let exponent = tree_depth.saturating_sub(subtree_depth) as i32;
    params.gamma.powi(exponent) * params.eps_base * estimate
}

/// Extra controls beyond [`AcaParams`].
#[derive(Clone, Debug, Default)]
pub struct HtacaOptions {
    /// Multi-indices added to the candidate set of every outermost pivot
    /// search, projected onto the modes of nested subtrees. Useful for tensors
    /// whose mass sits on a few entries that uniform sampling would miss.
    pub candidate_pool: Vec<Vec<usize>>,
    /// Skip the final root-level truncation.
    pub skip_final_truncation: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct HtacaStats {
    /// Evaluations of the target accessor.
    pub evaluations: u64,
    /// Root-level pivot values in order.
    pub root_pivots: Vec<f64>,
    /// Number of subtrees whose correction loop stopped at `r_hash_max`.
    pub saturated: usize,
    /// Number of subtrees that ran out of unused index pairs.
    pub exhausted: usize,
    /// Norm of the approximation before the final truncation.
    pub norm: f64,
}

#[derive(Clone, Debug)]
pub struct HtacaOutput<T: Scalar> {
    pub tensor: HtTensor<T>,
    pub stats: HtacaStats,
}

pub fn htaca<T: Scalar>(acc: &dyn EntryAccessor<T>, tree: &Arc<DimensionTree>, params: &AcaParams) -> Result<HtacaOutput<T>> {
    htaca_with(acc, tree, params, &HtacaOptions::default())
}

/// Hierarchical Tucker adaptive cross approximation of `acc` over `tree`.
pub fn htaca_with<T: Scalar>(
    acc: &dyn EntryAccessor<T>,
    tree: &Arc<DimensionTree>,
    params: &AcaParams,
    options: &HtacaOptions,
) -> Result<HtacaOutput<T>> {
    params.validate()?;
    if acc.order() != tree.n_modes() {
        return Err(SlarError::ShapeMismatch(format!(
            "accessor has {} modes, tree has {}",
            acc.order(),
            tree.n_modes()
        )));
    }
    for idx in &options.candidate_pool {
        crate::index::check_index(acc.shape(), idx)?;
    }
    let counting = CountingAccessor::new(acc);
    let mut ctx = Ctx {
        tree,
        params,
        bounds: params.bounds(),
        pool: &options.candidate_pool,
        rng: ChaCha8Rng::seed_from_u64(params.rng_seed),
        estimate: None,
        stats: HtacaStats::default(),
    };
    let approx = ctx.node(&counting, 0, None)?;
    let mut stats = ctx.stats;
    let tensor = if tree.n_nodes() == 1 || options.skip_final_truncation {
        stats.norm = approx.norm();
        approx
    } else {
        let (t, norm) = approx.truncate_relative(params.eps_base, &ctx.bounds);
        stats.norm = norm;
        t
    };
    stats.evaluations = counting.count();
    let tensor = HtTensor::from_parts(tree.clone(), acc.shape().to_vec(), tensor.into_frames())?;
    Ok(HtacaOutput { tensor, stats })
}

struct Ctx<'a> {
    tree: &'a DimensionTree,
    params: &'a AcaParams,
    bounds: RankBounds,
    pool: &'a [Vec<usize>],
    rng: ChaCha8Rng,
    estimate: Option<f64>,
    stats: HtacaStats,
}

impl Ctx<'_> {
    /// Approximates `acc`, indexed by the modes of `node`, over the subtree rooted at `node`.
    fn node<T: Scalar>(&mut self, acc: &dyn EntryAccessor<T>, node: usize, prescribed: Option<&[usize]>) -> Result<HtTensor<T>> {
        let tnode = self.tree.node(node).clone();
        let Some((l, r)) = tnode.children else {
            let n = acc.shape()[0];
            let fiber = eval_batch(acc, &(0..n).map(|i| vec![i]).collect::<Vec<_>>());
            if let Some(i) = fiber.iter().position(|v| !v.is_finite_value()) {
                return Err(SlarError::NonFinite(format!("fiber entry {i} of mode {}", tnode.modes.start)));
            }
            return Ok(HtTensor::from_vector(&fiber));
        };
        let nl = self.tree.node(l).order();
        let order = tnode.order();
        let subtree = Arc::new(self.tree.subtree(node));
        let is_root = node == 0;

        let mut pool: Vec<Vec<usize>> = Vec::new();
        for idx in self.pool {
            let local = idx[tnode.modes.clone()].to_vec();
            if !pool.contains(&local) {
                pool.push(local);
            }
        }

        let mut approx: Option<HtTensor<T>> = None;
        let mut sets = IndexSets::default();
        let mut first_norm: Option<f64> = None;
        let mut p_abs = f64::INFINITY;
        let mut k = 1usize;
        loop {
            let eps_c = self
                .estimate
                .map(|e| pivot_tolerance(self.params, self.tree.depth(), tnode.height, e))
                .unwrap_or(0.0);
            if !(p_abs > eps_c || k < self.params.r_hash_min) {
                break;
            }
            let zero;
            let current = match &approx {
                Some(a) => a,
                None => {
                    zero = HtTensor::zeros(subtree.clone(), acc.shape())?;
                    &zero
                }
            };
            let residual = Residual::new(acc, current);
            let mut candidates = pool.clone();
            if k == 1 {
                if let Some(p) = prescribed {
                    candidates.push(p.to_vec());
                }
            }
            let pivot = recursive_pivot_search(&residual, self.tree, node, Some(&mut sets), &candidates, &mut self.rng);
            if pivot.exhausted {
                self.stats.exhausted += 1;
                break;
            }
            let p = pivot.value;
            if !p.is_finite_value() {
                return Err(SlarError::NonFinite(format!("pivot value at {:?}", pivot.index)));
            }
            p_abs = p.modulus();
            if is_root {
                self.stats.root_pivots.push(p_abs);
                if self.estimate.is_none() {
                    self.estimate = Some(p_abs);
                }
            }

            let (il, ir) = pivot.index.split_at(nl);
            let left_acc = Restricted::new(&residual, pivot.index.clone(), 0, nl);
            let left = self.node(&left_acc, l, Some(il))?;
            let right_acc = Restricted::new(&residual, pivot.index.clone(), nl, order - nl);
            let right = self.node(&right_acc, r, Some(ir))?;
            let correction = HtTensor::join(&left, &right, safeguarded_reciprocal(p))?;
            let correction = HtTensor::from_parts(subtree.clone(), acc.shape().to_vec(), correction.into_frames())?;
            let norm0 = *first_norm.get_or_insert_with(|| correction.norm());
            let sum = match &approx {
                Some(a) => a.add(&correction)?,
                None => correction,
            };
            approx = Some(sum.truncate(1e-14 * norm0, &self.bounds));

            if k + 1 > self.params.r_hash_max {
                self.stats.saturated += 1;
                log::warn!(
                    "correction limit {} reached on modes {:?} with pivot {p_abs:.3e}",
                    self.params.r_hash_max,
                    tnode.modes
                );
                break;
            }
            k += 1;
        }
        match approx {
            Some(a) => Ok(a),
            None => HtTensor::zeros(subtree, acc.shape()),
        }
    }
}
