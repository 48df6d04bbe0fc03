use std::collections::HashMap;

use super::p2::stencil_offsets;
use crate::ht::{contract_transfer_pairs, DenseTensor, HtTensor};
use crate::scalar::Scalar;
use crate::tree::DimensionTree;

/// Per mode, the indices of the cells `i - 1`, `i`, `i + 1` around the
/// stencil center; `None` marks a cell outside a truncated mode.
pub type StencilRows = [[Option<usize>; 3]];

/// Tensor data that can deliver a whole `P²` stencil at once.
pub trait StencilSource<T: Scalar>: Sync {
    fn shape(&self) -> &[usize];

    /// Writes the values at every offset of [`stencil_offsets`] into `out`;
    /// points involving a `None` row read as zero.
    fn gather(&self, rows: &StencilRows, out: &mut [T]);
}

impl<T: Scalar> StencilSource<T> for DenseTensor<T> {
    fn shape(&self) -> &[usize] {
        &self.shape
    }

    fn gather(&self, rows: &StencilRows, out: &mut [T]) {
        let d = rows.len();
        let mut idx = vec![0; d];
        for (o, offset) in out.iter_mut().zip(stencil_offsets(d)) {
            *o = T::zero();
            let mut inside = true;
            for m in 0..d {
                match rows[m][(offset[m] + 1) as usize] {
                    Some(i) => idx[m] = i,
                    None => inside = false,
                }
            }
            if inside {
                *o = self.get(&idx);
            }
        }
    }
}

/// Precomputed sharing pattern of a stencil over a dimension tree.
///
/// Stencil points differ from the center in at most two modes, so each node
/// only sees a handful of distinct projected sub-indices ("variants"). Node
/// vectors are computed once per variant and reused by all stencil points.
#[derive(Clone, Debug)]
pub struct StencilPlan {
    /// Per node, the variants as sparse offsets `(mode, ±1)`.
    variants: Vec<Vec<Vec<(usize, i32)>>>,
    /// Per interior node and variant, the variant ids in the two children.
    child_variants: Vec<Vec<(usize, usize)>>,
}

impl StencilPlan {
    pub fn new(tree: &DimensionTree) -> Self {
        let d = tree.n_modes();
        let points: Vec<Vec<(usize, i32)>> = stencil_offsets(d)
            .into_iter()
            .map(|o| o.iter().enumerate().filter(|(_, &s)| s != 0).map(|(m, &s)| (m, s)).collect())
            .collect();
        let n = tree.n_nodes();
        let mut variants = vec![Vec::new(); n];
        let mut lookup: Vec<HashMap<Vec<(usize, i32)>, usize>> = vec![HashMap::new(); n];
        for id in 0..n {
            let modes = &tree.node(id).modes;
            for p in &points {
                if p.iter().all(|(m, _)| modes.contains(m)) && !lookup[id].contains_key(p) {
                    lookup[id].insert(p.clone(), variants[id].len());
                    variants[id].push(p.clone());
                }
            }
        }
        let mut child_variants = vec![Vec::new(); n];
        for id in 0..n {
            if let Some((l, r)) = tree.children(id) {
                let split = tree.node(l).modes.end;
                child_variants[id] = variants[id]
                    .iter()
                    .map(|v| {
                        let left: Vec<_> = v.iter().copied().filter(|(m, _)| *m < split).collect();
                        let right: Vec<_> = v.iter().copied().filter(|(m, _)| *m >= split).collect();
                        (lookup[l][&left], lookup[r][&right])
                    })
                    .collect();
            }
        }
        StencilPlan { variants, child_variants }
    }

    pub fn variant_count(&self, node: usize) -> usize {
        self.variants[node].len()
    }
}

/// An HT tensor paired with a [`StencilPlan`] for its tree.
pub struct HtStencil<'a, T: Scalar> {
    ht: &'a HtTensor<T>,
    plan: StencilPlan,
    offsets: Vec<usize>,
}

impl<'a, T: Scalar> HtStencil<'a, T> {
    pub fn new(ht: &'a HtTensor<T>) -> Self {
        let plan = StencilPlan::new(ht.tree());
        let mut offsets = vec![0];
        for id in 0..ht.tree().n_nodes() {
            offsets.push(offsets[id] + plan.variant_count(id) * ht.rank(id));
        }
        HtStencil { ht, plan, offsets }
    }

    pub fn tensor(&self) -> &HtTensor<T> {
        self.ht
    }
}

impl<T: Scalar> StencilSource<T> for HtStencil<'_, T> {
    fn shape(&self) -> &[usize] {
        self.ht.shape()
    }

    fn gather(&self, rows: &StencilRows, out: &mut [T]) {
        let tree = self.ht.tree();
        let mut buf = vec![T::zero(); *self.offsets.last().unwrap()];
        for id in (0..tree.n_nodes()).rev() {
            let frame = self.ht.frame(id);
            let r = frame.ncols();
            let base = self.offsets[id];
            match tree.children(id) {
                None => {
                    let mode = tree.node(id).modes.start;
                    for (k, v) in self.plan.variants[id].iter().enumerate() {
                        let shift = v.first().map_or(0, |&(_, s)| s);
                        if let Some(row) = rows[mode][(shift + 1) as usize] {
                            for c in 0..r {
                                buf[base + k * r + c] = frame[(row, c)];
                            }
                        }
                    }
                }
                Some((l, rc)) => {
                    let (rl, rr) = (self.ht.rank(l), self.ht.rank(rc));
                    let (head, tail) = buf.split_at_mut(self.offsets[id + 1]);
                    let tail_base = self.offsets[id + 1];
                    let left = &tail[self.offsets[l] - tail_base..self.offsets[l + 1] - tail_base];
                    let right = &tail[self.offsets[rc] - tail_base..self.offsets[rc + 1] - tail_base];
                    let pairs = &self.plan.child_variants[id];
                    debug_assert_eq!(right.len(), self.plan.variant_count(rc) * rr);
                    contract_transfer_pairs(frame, left, right, rl, pairs, &mut head[base..base + pairs.len() * r]);
                }
            }
        }
        out.copy_from_slice(&buf[..out.len()]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::advect::stencil_size;
    use crate::ht::testing::*;
    use crate::scalar::C64;
    use crate::tree::TreeStrategy;

    #[test]
    fn root_variants_follow_stencil_order() {
        for d in 1..7 {
            let strategy = if d % 2 == 0 { TreeStrategy::PairedUnbalanced } else { TreeStrategy::Balanced };
            let tree = DimensionTree::build(d, strategy).unwrap();
            let plan = StencilPlan::new(&tree);
            assert_eq!(plan.variant_count(0), stencil_size(d));
            for leaf in tree.leaves() {
                assert_eq!(plan.variant_count(leaf), 3);
            }
        }
    }

    #[test]
    fn ht_gather_matches_dense() {
        let mut rng = rng(101);
        for (d, strategy) in [(1, TreeStrategy::Balanced), (3, TreeStrategy::Balanced), (4, TreeStrategy::Balanced), (6, TreeStrategy::PairedUnbalanced)] {
            let tree = DimensionTree::build(d, strategy).unwrap();
            let shape = vec![4; d];
            let x: HtTensor<C64> = random_ht(&tree, &shape, 3, &mut rng);
            let dense = x.full().unwrap();
            let ht = HtStencil::new(&x);
            let rows: Vec<[Option<usize>; 3]> = (0..d)
                .map(|m| match m % 3 {
                    0 => [Some(3), Some(0), Some(1)],
                    1 => [Some(1), Some(2), Some(3)],
                    _ => [Some(2), Some(3), None],
                })
                .collect();
            let mut a = vec![C64::default(); stencil_size(d)];
            let mut b = a.clone();
            ht.gather(&rows, &mut a);
            dense.gather(&rows, &mut b);
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).norm() < 1e-12, "d = {d}");
            }
        }
    }
}
