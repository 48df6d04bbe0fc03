use std::collections::HashSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::accessor::{eval_batch, EntryAccessor, Restricted};
use crate::index;
use crate::scalar::Scalar;
use crate::tree::DimensionTree;

/// Sample count `s = 3^order` and refinement rounds `m = order - 1` of a node.
pub fn sampling_params(order: usize) -> (usize, usize) {
    (3usize.saturating_pow(order as u32), order.saturating_sub(1))
}

/// Linear row and column indices already used as pivots at a node.
#[derive(Clone, Debug, Default)]
pub struct IndexSets {
    pub left: HashSet<u64>,
    pub right: HashSet<u64>,
}

#[derive(Clone, Debug)]
pub struct PivotResult<T> {
    pub value: T,
    /// Multi-index over the node's modes.
    pub index: Vec<usize>,
    /// Set when no unused index pair was left to sample.
    pub exhausted: bool,
    /// Set when a refinement round left both halves unchanged.
    pub rook: bool,
}

/// Residual-guided pivot search over the modes of `node`.
///
/// `res` is indexed by the node's modes in order. Index sets are only
/// consulted and updated when given, which corresponds to the outermost call;
/// nested refinements pass `None`. Every index in `candidates` is added to the
/// sample set unconditionally.
pub fn recursive_pivot_search<T: Scalar>(
    res: &dyn EntryAccessor<T>,
    tree: &DimensionTree,
    node: usize,
    sets: Option<&mut IndexSets>,
    candidates: &[Vec<usize>],
    rng: &mut ChaCha8Rng,
) -> PivotResult<T> {
    let Some((l, r)) = tree.children(node) else {
        let n = res.shape()[0];
        let idxs: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        let vals = eval_batch(res, &idxs);
        let (best, value) = argmax(&vals);
        return PivotResult { value, index: vec![best], exhausted: false, rook: false };
    };

    let order = tree.node(node).order();
    let nl = tree.node(l).order();
    let shape = res.shape().to_vec();
    let (lshape, rshape) = shape.split_at(nl);
    let (s, m) = sampling_params(order);

    let pairs = sample_pairs(
        index::numel(lshape) as u64,
        index::numel(rshape) as u64,
        sets.as_deref(),
        s,
        rng,
    );
    let mut cands: Vec<Vec<usize>> = pairs
        .iter()
        .map(|&(a, b)| {
            let mut idx = index::delinearize(lshape, a as usize).unwrap();
            idx.extend(index::delinearize(rshape, b as usize).unwrap());
            idx
        })
        .collect();
    cands.extend(candidates.iter().cloned());
    if cands.is_empty() {
        return PivotResult { value: T::zero(), index: vec![0; order], exhausted: true, rook: false };
    }
    let vals = eval_batch(res, &cands);
    let (best, mut value) = argmax(&vals);
    let mut cur = cands.swap_remove(best);
    let mut rook = false;

    for _ in 0..m {
        let left_res = Restricted::new(res, cur.clone(), 0, nl);
        let left = recursive_pivot_search(&left_res, tree, l, None, &[cur[..nl].to_vec()], rng);
        let mut next = left.index.clone();
        next.extend_from_slice(&cur[nl..]);
        let right_res = Restricted::new(res, next.clone(), nl, order - nl);
        let right = recursive_pivot_search(&right_res, tree, r, None, &[cur[nl..].to_vec()], rng);
        next.truncate(nl);
        next.extend_from_slice(&right.index);
        value = right.value;
        let unchanged = next == cur;
        cur = next;
        if unchanged {
            rook = true;
            break;
        }
    }

    if let Some(sets) = sets {
        sets.left.insert(index::linearize(lshape, &cur[..nl]).unwrap() as u64);
        sets.right.insert(index::linearize(rshape, &cur[nl..]).unwrap() as u64);
    }
    PivotResult { value, index: cur, exhausted: false, rook }
}

/// Index of the first entry of maximal modulus, with its value.
fn argmax<T: Scalar>(vals: &[T]) -> (usize, T) {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, v) in vals.iter().enumerate() {
        let a = v.modulus();
        if a > best_abs || (a.is_nan() && !best_abs.is_nan()) {
            best = i;
            best_abs = a;
        }
    }
    (best, vals[best])
}

/// Draws up to `s` distinct pairs uniformly from the unused part of `[0, ml) x [0, mr)`.
fn sample_pairs(ml: u64, mr: u64, sets: Option<&IndexSets>, s: usize, rng: &mut ChaCha8Rng) -> Vec<(u64, u64)> {
    let empty = IndexSets::default();
    let sets = sets.unwrap_or(&empty);
    let free_l = ml - sets.left.len() as u64;
    let free_r = mr - sets.right.len() as u64;
    let total = free_l as u128 * free_r as u128;
    if total == 0 {
        return Vec::new();
    }
    if total <= 2 * s as u128 {
        let lefts: Vec<u64> = (0..ml).filter(|i| !sets.left.contains(i)).collect();
        let rights: Vec<u64> = (0..mr).filter(|i| !sets.right.contains(i)).collect();
        let mut all: Vec<(u64, u64)> = rights.iter().flat_map(|&b| lefts.iter().map(move |&a| (a, b))).collect();
        if all.len() <= s {
            return all;
        }
        // Partial Fisher-Yates shuffle for the first `s` slots.
        for i in 0..s {
            let j = rng.random_range(i..all.len());
            all.swap(i, j);
        }
        all.truncate(s);
        return all;
    }
    let lefts = dense_free_list(ml, &sets.left);
    let rights = dense_free_list(mr, &sets.right);
    let mut seen = HashSet::with_capacity(s);
    let mut out = Vec::with_capacity(s);
    while out.len() < s {
        let a = draw_free(ml, &sets.left, lefts.as_deref(), rng);
        let b = draw_free(mr, &sets.right, rights.as_deref(), rng);
        if seen.insert((a, b)) {
            out.push((a, b));
        }
    }
    out
}

/// Explicit list of free indices when rejection sampling would be slow.
fn dense_free_list(n: u64, used: &HashSet<u64>) -> Option<Vec<u64>> {
    (used.len() as u64 * 2 >= n).then(|| (0..n).filter(|i| !used.contains(i)).collect())
}

fn draw_free(n: u64, used: &HashSet<u64>, free: Option<&[u64]>, rng: &mut ChaCha8Rng) -> u64 {
    if let Some(free) = free {
        return free[rng.random_range(0..free.len())];
    }
    loop {
        let i = rng.random_range(0..n);
        if !used.contains(&i) {
            return i;
        }
    }
}
