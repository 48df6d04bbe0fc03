//! Binary dimension trees over contiguous mode ranges.
//!
//! Nodes are stored in pre-order: the root is node 0, the left child of a
//! node follows it immediately and the right child follows the whole left
//! subtree. Every subtree therefore occupies a contiguous slice of the node
//! list, and children always have larger indices than their parent. Modes are
//! 0-based and every node covers a contiguous range, left child first.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SlarError};

/// Construction strategy for [`DimensionTree::build`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreeStrategy {
    /// Recursive halving, the left child receives the larger half.
    Balanced,
    /// Consecutive mode pairs are leaves of 2-mode nodes; pairs are then
    /// grouped by recursive halving. For six modes this is
    /// `{{{0,1},{2,3}},{4,5}}`.
    PairedUnbalanced,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeNode {
    pub modes: Range<usize>,
    pub parent: Option<usize>,
    pub children: Option<(usize, usize)>,
    /// Edges from the root.
    pub depth: usize,
    /// Depth of the subtree rooted here (0 for a leaf).
    pub height: usize,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    pub fn order(&self) -> usize {
        self.modes.len()
    }
}

/// Nested description of a tree shape; leaves are implicit single modes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TreeLayout {
    Leaf,
    Split(Box<TreeLayout>, Box<TreeLayout>),
}

impl TreeLayout {
    pub fn order(&self) -> usize {
        match self {
            TreeLayout::Leaf => 1,
            TreeLayout::Split(l, r) => l.order() + r.order(),
        }
    }

    fn split(l: TreeLayout, r: TreeLayout) -> TreeLayout {
        TreeLayout::Split(Box::new(l), Box::new(r))
    }

    fn balanced(d: usize) -> TreeLayout {
        if d == 1 {
            TreeLayout::Leaf
        } else {
            let left = d.div_ceil(2);
            Self::split(Self::balanced(left), Self::balanced(d - left))
        }
    }

    fn paired(pairs: usize) -> TreeLayout {
        if pairs == 1 {
            Self::split(TreeLayout::Leaf, TreeLayout::Leaf)
        } else {
            let left = pairs.div_ceil(2);
            Self::split(Self::paired(left), Self::paired(pairs - left))
        }
    }

    /// JSON form: a leaf is its mode number, a split is a two-element array.
    pub fn to_json(&self) -> serde_json::Value {
        fn go(layout: &TreeLayout, next: &mut usize) -> serde_json::Value {
            match layout {
                TreeLayout::Leaf => {
                    *next += 1;
                    serde_json::Value::from(*next - 1)
                }
                TreeLayout::Split(l, r) => {
                    let l = go(l, next);
                    let r = go(r, next);
                    serde_json::Value::Array(vec![l, r])
                }
            }
        }
        go(self, &mut 0)
    }

    pub fn from_json(value: &serde_json::Value) -> Result<TreeLayout> {
        fn go(v: &serde_json::Value, next: &mut usize) -> Result<TreeLayout> {
            match v {
                serde_json::Value::Number(n) => {
                    if n.as_u64() != Some(*next as u64) {
                        return Err(SlarError::Format(format!(
                            "tree leaf {n} out of order, expected mode {next}"
                        )));
                    }
                    *next += 1;
                    Ok(TreeLayout::Leaf)
                }
                serde_json::Value::Array(items) if items.len() == 2 => {
                    let l = go(&items[0], next)?;
                    let r = go(&items[1], next)?;
                    Ok(TreeLayout::split(l, r))
                }
                other => Err(SlarError::Format(format!("bad tree node {other}"))),
            }
        }
        go(value, &mut 0)
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct DimensionTree {
    nodes: Vec<TreeNode>,
}

impl fmt::Debug for DimensionTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DimensionTree({})", self.describe(0))
    }
}

impl DimensionTree {
    pub fn build(d: usize, strategy: TreeStrategy) -> Result<Self> {
        if d == 0 {
            return Err(SlarError::Config("a dimension tree needs at least one mode".into()));
        }
        match strategy {
            TreeStrategy::Balanced => Ok(Self::balanced(d)),
            TreeStrategy::PairedUnbalanced => {
                if d % 2 != 0 {
                    return Err(SlarError::Config(format!(
                        "paired-unbalanced tree needs an even number of modes, got {d}"
                    )));
                }
                Ok(Self::from_layout(&TreeLayout::paired(d / 2)))
            }
        }
    }

    pub fn balanced(d: usize) -> Self {
        assert!(d > 0, "a dimension tree needs at least one mode");
        Self::from_layout(&TreeLayout::balanced(d))
    }

    pub fn from_layout(layout: &TreeLayout) -> Self {
        fn push(
            nodes: &mut Vec<TreeNode>,
            layout: &TreeLayout,
            first_mode: usize,
            parent: Option<usize>,
            depth: usize,
        ) -> usize {
            let id = nodes.len();
            let modes = first_mode..first_mode + layout.order();
            nodes.push(TreeNode { modes, parent, children: None, depth, height: 0 });
            if let TreeLayout::Split(l, r) = layout {
                let left = push(nodes, l, first_mode, Some(id), depth + 1);
                let right = push(nodes, r, first_mode + l.order(), Some(id), depth + 1);
                let height = 1 + nodes[left].height.max(nodes[right].height);
                let node = &mut nodes[id];
                node.children = Some((left, right));
                node.height = height;
            }
            id
        }
        let mut nodes = Vec::with_capacity(2 * layout.order() - 1);
        push(&mut nodes, layout, 0, None, 0);
        DimensionTree { nodes }
    }

    pub fn layout(&self) -> TreeLayout {
        self.layout_of(0)
    }

    fn layout_of(&self, node: usize) -> TreeLayout {
        match self.nodes[node].children {
            None => TreeLayout::Leaf,
            Some((l, r)) => TreeLayout::split(self.layout_of(l), self.layout_of(r)),
        }
    }

    /// Tree whose root has `left` and `right` as children; modes of `right` are shifted.
    pub fn join(left: &DimensionTree, right: &DimensionTree) -> Self {
        Self::from_layout(&TreeLayout::split(left.layout(), right.layout()))
    }

    /// Subtree rooted at `node`, with modes renumbered from 0.
    pub fn subtree(&self, node: usize) -> Self {
        Self::from_layout(&self.layout_of(node))
    }

    pub fn n_modes(&self) -> usize {
        self.nodes[0].modes.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        self.nodes[id].is_leaf()
    }

    pub fn children(&self, id: usize) -> Option<(usize, usize)> {
        self.nodes[id].children
    }

    /// Number of nodes in the subtree rooted at `id`; the subtree is `id..id + size`.
    pub fn subtree_size(&self, id: usize) -> usize {
        2 * self.nodes[id].order() - 1
    }

    pub fn depth(&self) -> usize {
        self.nodes[0].height
    }

    pub fn interior_count(&self) -> usize {
        self.nodes.iter().filter(|n| !n.is_leaf()).count()
    }

    /// Node id of the leaf holding `mode`.
    pub fn leaf_of_mode(&self, mode: usize) -> usize {
        let mut id = 0;
        while let Some((l, r)) = self.nodes[id].children {
            id = if self.nodes[l].modes.contains(&mode) { l } else { r };
        }
        debug_assert_eq!(self.nodes[id].modes.start, mode);
        id
    }

    /// Leaf node ids in mode order.
    pub fn leaves(&self) -> Vec<usize> {
        (0..self.n_modes()).map(|m| self.leaf_of_mode(m)).collect()
    }

    /// Human-readable form with 1-based mode labels, e.g. `{{1,2},{3,4}}`.
    pub fn describe(&self, id: usize) -> String {
        match self.nodes[id].children {
            None => format!("{}", self.nodes[id].modes.start + 1),
            Some((l, r)) => format!("{{{},{}}}", self.describe(l), self.describe(r)),
        }
    }
}
