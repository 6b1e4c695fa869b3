//! Binary regression trees with axis-aligned splits.
//!
//! Nodes live in a flat arena with the root at index 0. A row goes left when
//! its feature value is `<=` the cut, right otherwise. Trees serialize to a
//! nested JSON structure:
//!
//! ```json
//! {"n_features": 2,
//!  "root": {"type": "split", "split_var": 0, "split_cut": 5.0,
//!           "left": {"type": "leaf", "mu": -1.0},
//!           "right": {"type": "leaf", "mu": 1.0}}}
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeError {
    #[error("feature vector has {got} entries, tree expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("malformed tree: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreeNode {
    Leaf { mu: f64 },
    Internal { split_var: usize, split_cut: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TreeStats {
    pub depth: usize,
    pub leaf_count: usize,
    pub internal_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreeRecord", into = "TreeRecord")]
pub struct DecisionTree {
    n_features: usize,
    nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn leaf(mu: f64, n_features: usize) -> Self {
        Self { n_features, nodes: vec![TreeNode::Leaf { mu }] }
    }

    /// Joins two subtrees under a new root split.
    pub fn split(split_var: usize, split_cut: f64, left: DecisionTree, right: DecisionTree) -> Self {
        assert_eq!(left.n_features, right.n_features);
        assert!(split_var < left.n_features);
        let mut nodes = Vec::with_capacity(1 + left.nodes.len() + right.nodes.len());
        nodes.push(TreeNode::Leaf { mu: 0.0 });
        let left_root = append_shifted(&mut nodes, &left.nodes);
        let right_root = append_shifted(&mut nodes, &right.nodes);
        nodes[0] = TreeNode::Internal { split_var, split_cut, left: left_root, right: right_root };
        Self { n_features: left.n_features, nodes }
    }

    /// Validates an arena: children in range, every non-root node reachable
    /// exactly once from the root, split variables below `n_features`.
    pub fn from_nodes(n_features: usize, nodes: Vec<TreeNode>) -> Result<Self, TreeError> {
        if nodes.is_empty() {
            return Err(TreeError::Malformed("no nodes".into()));
        }
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            match nodes[i] {
                TreeNode::Leaf { mu } if !mu.is_finite() => {
                    return Err(TreeError::Malformed(format!("non-finite leaf at node {i}")))
                }
                TreeNode::Leaf { .. } => {}
                TreeNode::Internal { split_var, split_cut, left, right } => {
                    if split_var >= n_features || !split_cut.is_finite() {
                        return Err(TreeError::Malformed(format!("bad split at node {i}")));
                    }
                    for child in [left, right] {
                        if child >= nodes.len() || seen[child] {
                            return Err(TreeError::Malformed(format!("bad child {child} at node {i}")));
                        }
                        seen[child] = true;
                        stack.push(child);
                    }
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(TreeError::Malformed("unreachable nodes".into()));
        }
        Ok(Self { n_features, nodes })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, TreeError> {
        if x.len() != self.n_features {
            return Err(TreeError::DimensionMismatch { expected: self.n_features, got: x.len() });
        }
        Ok(self.eval(x))
    }

    /// Prediction without the dimension check; `x` must have `n_features` entries.
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)] {
            TreeNode::Leaf { mu } => mu,
            TreeNode::Internal { .. } => unreachable!(),
        }
    }

    /// Arena index of the leaf that `x` is routed to.
    #[inline]
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { .. } => return i,
                TreeNode::Internal { split_var, split_cut, left, right } => {
                    i = if x[split_var] <= split_cut { left } else { right };
                }
            }
        }
    }

    pub fn stats(&self) -> TreeStats {
        let mut stats = TreeStats::default();
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, depth)) = stack.pop() {
            stats.depth = stats.depth.max(depth);
            match self.nodes[i] {
                TreeNode::Leaf { .. } => stats.leaf_count += 1,
                TreeNode::Internal { left, right, .. } => {
                    stats.internal_count += 1;
                    stack.push((left, depth + 1));
                    stack.push((right, depth + 1));
                }
            }
        }
        stats
    }

    /// Number of internal nodes splitting on each feature.
    pub fn variable_usage(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_features];
        self.add_variable_usage(&mut counts);
        counts
    }

    pub(crate) fn add_variable_usage(&self, counts: &mut [usize]) {
        for node in &self.nodes {
            if let TreeNode::Internal { split_var, .. } = node {
                counts[*split_var] += 1;
            }
        }
    }

    /// Depth of every node, indexed like the arena.
    pub fn node_depths(&self) -> Vec<usize> {
        let mut depths = vec![0; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if let TreeNode::Internal { left, right, .. } = self.nodes[i] {
                depths[left] = depths[i] + 1;
                depths[right] = depths[i] + 1;
                stack.push(left);
                stack.push(right);
            }
        }
        depths
    }
}

fn append_shifted(nodes: &mut Vec<TreeNode>, sub: &[TreeNode]) -> usize {
    let offset = nodes.len();
    nodes.extend(sub.iter().map(|n| match *n {
        TreeNode::Internal { split_var, split_cut, left, right } => {
            TreeNode::Internal { split_var, split_cut, left: left + offset, right: right + offset }
        }
        leaf => leaf,
    }));
    offset
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum NodeRecord {
    Leaf { mu: f64 },
    Split { split_var: usize, split_cut: f64, left: Box<NodeRecord>, right: Box<NodeRecord> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TreeRecord {
    n_features: usize,
    root: NodeRecord,
}

impl From<DecisionTree> for TreeRecord {
    fn from(tree: DecisionTree) -> Self {
        fn build(nodes: &[TreeNode], i: usize) -> NodeRecord {
            match nodes[i] {
                TreeNode::Leaf { mu } => NodeRecord::Leaf { mu },
                TreeNode::Internal { split_var, split_cut, left, right } => NodeRecord::Split {
                    split_var,
                    split_cut,
                    left: Box::new(build(nodes, left)),
                    right: Box::new(build(nodes, right)),
                },
            }
        }
        TreeRecord { n_features: tree.n_features, root: build(&tree.nodes, 0) }
    }
}

impl TryFrom<TreeRecord> for DecisionTree {
    type Error = TreeError;

    fn try_from(record: TreeRecord) -> Result<Self, Self::Error> {
        fn push(nodes: &mut Vec<TreeNode>, record: &NodeRecord) -> usize {
            let i = nodes.len();
            match record {
                NodeRecord::Leaf { mu } => nodes.push(TreeNode::Leaf { mu: *mu }),
                NodeRecord::Split { split_var, split_cut, left, right } => {
                    nodes.push(TreeNode::Leaf { mu: 0.0 });
                    let l = push(nodes, left);
                    let r = push(nodes, right);
                    nodes[i] = TreeNode::Internal { split_var: *split_var, split_cut: *split_cut, left: l, right: r };
                }
            }
            i
        }
        let mut nodes = Vec::new();
        push(&mut nodes, &record.root);
        DecisionTree::from_nodes(record.n_features, nodes)
    }
}
