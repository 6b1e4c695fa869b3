//! Backfitting Metropolis-within-Gibbs sampler over the sum-of-trees model.
//!
//! Each iteration visits every tree in turn. Against the partial residuals
//! of the other trees it proposes one structural move (grow, prune, change
//! or swap) and accepts it with the leaf values integrated out, then redraws
//! the leaf values from their conjugate normal conditional. The noise
//! variance is redrawn from its inverse-gamma conditional once per sweep.
//!
//! Everything runs on the binned training features: a rule `(var, cut)`
//! sends a row left when its bin index is `<= cut`, which is equivalent to
//! `x <= cut_value` on the raw feature.
//!
//! The tree prior is evaluated exactly. A node can only split when some
//! rule leaves at least `min_leaf_size` rows on both sides; an unsplittable
//! leaf contributes probability one, a splittable leaf `1 − p_split(d)`, and
//! an internal node `p_split(d) / (valid vars × valid cuts of its var)`.

use rand::Rng as _;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::config::BartConfig;
use super::cuts::{BinnedFeatures, CutGrid};
use crate::rng::Rng;
use crate::tree::{DecisionTree, TreeNode};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Move {
    Grow = 0,
    Prune = 1,
    Change = 2,
    Swap = 3,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    parent: usize,
    left: usize,
    right: usize,
    var: usize,
    cut: usize,
    depth: usize,
    leaf: bool,
    alive: bool,
    mu: f64,
}

impl Node {
    fn leaf(parent: usize, depth: usize) -> Self {
        Self { parent, left: NONE, right: NONE, var: 0, cut: 0, depth, leaf: true, alive: true, mu: 0.0 }
    }
}

#[derive(Debug, Clone)]
struct WorkTree {
    nodes: Vec<Node>,
}

impl WorkTree {
    fn new() -> Self {
        Self { nodes: vec![Node::leaf(NONE, 0)] }
    }

    fn alloc(&mut self, node: Node) -> usize {
        if let Some(i) = self.nodes.iter().position(|n| !n.alive) {
            self.nodes[i] = node;
            i
        } else {
            self.nodes.push(node);
            self.nodes.len() - 1
        }
    }

    fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].alive && self.nodes[i].leaf)
    }

    fn internals(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].alive && !self.nodes[i].leaf)
    }

    /// Internal node whose children are both leaves.
    fn is_nog(&self, i: usize) -> bool {
        let n = &self.nodes[i];
        !n.leaf && self.nodes[n.left].leaf && self.nodes[n.right].leaf
    }

    fn in_subtree_mask(&self, root: usize) -> Vec<bool> {
        let mut mask = vec![false; self.nodes.len()];
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            mask[i] = true;
            if !self.nodes[i].leaf {
                stack.push(self.nodes[i].left);
                stack.push(self.nodes[i].right);
            }
        }
        mask
    }

    fn to_decision_tree(&self, grid: &CutGrid, n_features: usize) -> DecisionTree {
        let mut nodes = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(0usize, NONE, false)];
        while let Some((src, parent, is_right)) = stack.pop() {
            let dst = nodes.len();
            let n = &self.nodes[src];
            nodes.push(if n.leaf {
                TreeNode::Leaf { mu: n.mu }
            } else {
                TreeNode::Internal { split_var: n.var, split_cut: grid.value(n.var, n.cut), left: NONE, right: NONE }
            });
            if parent != NONE {
                if let TreeNode::Internal { left, right, .. } = &mut nodes[parent] {
                    if is_right {
                        *right = dst;
                    } else {
                        *left = dst;
                    }
                }
            }
            if !n.leaf {
                stack.push((n.right, dst, true));
                stack.push((n.left, dst, false));
            }
        }
        DecisionTree::from_nodes(n_features, nodes).expect("sampler trees are well formed")
    }
}

/// Valid cut-index ranges per variable for one set of rows.
#[derive(Debug, Clone)]
struct SplitOptions {
    ranges: Vec<Option<(usize, usize)>>,
    n_valid: usize,
}

impl SplitOptions {
    fn n_cuts(&self, var: usize) -> usize {
        self.ranges[var].map_or(0, |(lo, hi)| hi - lo + 1)
    }

    fn contains(&self, var: usize, cut: usize) -> bool {
        self.ranges[var].is_some_and(|(lo, hi)| lo <= cut && cut <= hi)
    }

    fn pick(&self, rng: &mut Rng) -> (usize, usize) {
        let k = rng.random_range(0..self.n_valid);
        let var = self.ranges.iter().enumerate().filter(|(_, r)| r.is_some()).nth(k).expect("k < n_valid").0;
        let (lo, hi) = self.ranges[var].expect("valid var");
        (var, rng.random_range(lo..=hi))
    }
}

/// Immutable data shared by every tree update.
struct Context<'a> {
    cfg: &'a BartConfig,
    bins: &'a BinnedFeatures,
    p: usize,
}

impl Context<'_> {
    fn split_options(&self, rows: &[usize], scratch: &mut Vec<u16>) -> SplitOptions {
        let k = self.cfg.min_leaf_size;
        let n = rows.len();
        let mut ranges = vec![None; self.p];
        let mut n_valid = 0;
        if n >= 2 * k {
            for (var, range) in ranges.iter_mut().enumerate() {
                let col = self.bins.column(var);
                scratch.clear();
                scratch.extend(rows.iter().map(|&r| col[r]));
                // cut c is valid iff #(bin <= c) >= k and #(bin > c) >= k, i.e.
                // kth smallest bin <= c < (n-k+1)th smallest bin.
                let lo = *scratch.select_nth_unstable(k - 1).1 as usize;
                let hi_bin = *scratch.select_nth_unstable(n - k).1 as usize;
                if hi_bin > lo {
                    *range = Some((lo, hi_bin - 1));
                    n_valid += 1;
                }
            }
        }
        SplitOptions { ranges, n_valid }
    }

    fn goes_left(&self, var: usize, cut: usize, row: usize) -> bool {
        self.bins.get(var, row) as usize <= cut
    }

    fn log_split(&self, depth: usize) -> f64 {
        self.cfg.split_probability(depth).ln()
    }

    fn log_stop(&self, depth: usize) -> f64 {
        (1.0 - self.cfg.split_probability(depth)).ln()
    }

    /// Prior contribution of a leaf holding `rows`.
    fn leaf_log_prior(&self, rows: &[usize], depth: usize, scratch: &mut Vec<u16>) -> f64 {
        if rows.len() < 2 * self.cfg.min_leaf_size || self.split_options(rows, scratch).n_valid == 0 {
            0.0
        } else {
            self.log_stop(depth)
        }
    }

    /// Log prior of the subtree rooted at `node`, given the rows reaching it.
    /// `-inf` when some internal rule is not admissible for its rows.
    fn subtree_log_prior(&self, tree: &WorkTree, node: usize, rows: &[usize], scratch: &mut Vec<u16>) -> f64 {
        let n = &tree.nodes[node];
        if n.leaf {
            return self.leaf_log_prior(rows, n.depth, scratch);
        }
        let opts = self.split_options(rows, scratch);
        if !opts.contains(n.var, n.cut) {
            return f64::NEG_INFINITY;
        }
        let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| self.goes_left(n.var, n.cut, r));
        self.log_split(n.depth) - (opts.n_valid as f64).ln() - (opts.n_cuts(n.var) as f64).ln()
            + self.subtree_log_prior(tree, n.left, &left, scratch)
            + self.subtree_log_prior(tree, n.right, &right, scratch)
    }

    fn route_from(&self, tree: &WorkTree, start: usize, row: usize) -> usize {
        let mut i = start;
        while !tree.nodes[i].leaf {
            let n = &tree.nodes[i];
            i = if self.goes_left(n.var, n.cut, row) { n.left } else { n.right };
        }
        i
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MoveCounts {
    pub proposed: [usize; 4],
    pub accepted: [usize; 4],
}

/// Prior and calibration constants in standardized target units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ChainParams {
    pub tau: f64,
    pub nu: f64,
    pub lambda: f64,
    pub sigma_init: f64,
    pub use_likelihood: bool,
}

pub(crate) struct Chain<'a> {
    ctx: Context<'a>,
    grid: &'a CutGrid,
    y: &'a [f64],
    params: ChainParams,
    rng: Rng,
    trees: Vec<WorkTree>,
    leaf_of: Vec<Vec<usize>>,
    fits: Vec<Vec<f64>>,
    total: Vec<f64>,
    resid: Vec<f64>,
    sigma2: f64,
    scratch: Vec<u16>,
    counts: MoveCounts,
}

impl<'a> Chain<'a> {
    pub fn new(
        cfg: &'a BartConfig,
        grid: &'a CutGrid,
        bins: &'a BinnedFeatures,
        p: usize,
        y: &'a [f64],
        params: ChainParams,
        rng: Rng,
    ) -> Self {
        let n = y.len();
        Self {
            ctx: Context { cfg, bins, p },
            grid,
            y,
            params,
            rng,
            trees: vec![WorkTree::new(); cfg.m],
            leaf_of: vec![vec![0; n]; cfg.m],
            fits: vec![vec![0.0; n]; cfg.m],
            total: vec![0.0; n],
            resid: vec![0.0; n],
            sigma2: params.sigma_init * params.sigma_init,
            scratch: Vec::with_capacity(n),
            counts: MoveCounts::default(),
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn counts(&self) -> MoveCounts {
        self.counts
    }

    /// One full sweep: every tree, then the noise variance.
    pub fn step(&mut self) {
        for j in 0..self.trees.len() {
            self.update_tree(j);
        }
        self.draw_sigma();
    }

    pub fn snapshot(&self) -> Vec<DecisionTree> {
        self.trees.iter().map(|t| t.to_decision_tree(self.grid, self.ctx.p)).collect()
    }

    fn update_tree(&mut self, j: usize) {
        for i in 0..self.y.len() {
            self.resid[i] = self.y[i] - (self.total[i] - self.fits[j][i]);
        }
        let mv = self.choose_move();
        self.counts.proposed[mv as usize] += 1;
        let accepted = match mv {
            Move::Grow => self.grow(j),
            Move::Prune => self.prune(j),
            Move::Change => self.change(j),
            Move::Swap => self.swap(j),
        };
        if accepted {
            self.counts.accepted[mv as usize] += 1;
        }
        self.draw_leaves(j);
    }

    fn choose_move(&mut self) -> Move {
        let mp = &self.ctx.cfg.move_probs;
        let u: f64 = self.rng.random();
        if u < mp.grow {
            Move::Grow
        } else if u < mp.grow + mp.prune {
            Move::Prune
        } else if u < mp.grow + mp.prune + mp.change {
            Move::Change
        } else {
            Move::Swap
        }
    }

    /// Marginal log likelihood of one leaf with the leaf value integrated
    /// out, dropping terms common to every tree structure.
    fn leaf_loglik(&self, n: usize, sum: f64) -> f64 {
        if !self.params.use_likelihood {
            return 0.0;
        }
        let tau2 = self.params.tau * self.params.tau;
        let s2 = self.sigma2;
        let nf = n as f64;
        -0.5 * (1.0 + nf * tau2 / s2).ln() + tau2 * sum * sum / (2.0 * s2 * (s2 + nf * tau2))
    }

    fn rows_loglik(&self, rows: &[usize]) -> f64 {
        let sum: f64 = rows.iter().map(|&r| self.resid[r]).sum();
        self.leaf_loglik(rows.len(), sum)
    }

    fn buckets(&self, j: usize) -> Vec<Vec<usize>> {
        let mut b = vec![Vec::new(); self.trees[j].nodes.len()];
        for (row, &leaf) in self.leaf_of[j].iter().enumerate() {
            b[leaf].push(row);
        }
        b
    }

    fn accept(&mut self, log_ratio: f64) -> bool {
        if log_ratio.is_nan() || log_ratio == f64::NEG_INFINITY {
            return false;
        }
        log_ratio >= 0.0 || self.rng.random::<f64>().ln() < log_ratio
    }

    fn move_ratio(&self, numerator: f64, denominator: f64) -> f64 {
        numerator.ln() - denominator.ln()
    }

    fn grow(&mut self, j: usize) -> bool {
        let buckets = self.buckets(j);
        let tree = &self.trees[j];
        let mut growable = Vec::new();
        for leaf in tree.leaves() {
            let opts = self.ctx.split_options(&buckets[leaf], &mut self.scratch);
            if opts.n_valid > 0 {
                growable.push((leaf, opts));
            }
        }
        if growable.is_empty() {
            return false;
        }
        let n_growable = growable.len();
        let (eta, opts) = growable.swap_remove(self.rng.random_range(0..n_growable));
        let (var, cut) = opts.pick(&mut self.rng);
        let depth = tree.nodes[eta].depth;
        let rows = &buckets[eta];
        let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| self.ctx.goes_left(var, cut, r));

        let n_valid = opts.n_valid as f64;
        let n_cuts = opts.n_cuts(var) as f64;
        let prior_new = self.ctx.log_split(depth) - n_valid.ln() - n_cuts.ln()
            + self.ctx.leaf_log_prior(&left, depth + 1, &mut self.scratch)
            + self.ctx.leaf_log_prior(&right, depth + 1, &mut self.scratch);
        let prior_old = self.ctx.log_stop(depth);

        let nog = tree.internals().filter(|&i| tree.is_nog(i)).count();
        let parent = tree.nodes[eta].parent;
        let parent_was_nog = parent != NONE && tree.is_nog(parent);
        let nog_after = nog - usize::from(parent_was_nog) + 1;
        let mp = self.ctx.cfg.move_probs;
        let proposal = self.move_ratio(mp.prune, mp.grow) + (n_growable as f64).ln() + n_valid.ln() + n_cuts.ln()
            - (nog_after as f64).ln();
        let lik = self.rows_loglik(&left) + self.rows_loglik(&right) - self.rows_loglik(rows);

        if !self.accept(prior_new - prior_old + proposal + lik) {
            return false;
        }
        let tree = &mut self.trees[j];
        let l = tree.alloc(Node::leaf(eta, depth + 1));
        let r = tree.alloc(Node::leaf(eta, depth + 1));
        let node = &mut tree.nodes[eta];
        node.leaf = false;
        node.var = var;
        node.cut = cut;
        node.left = l;
        node.right = r;
        for &row in &left {
            self.leaf_of[j][row] = l;
        }
        for &row in &right {
            self.leaf_of[j][row] = r;
        }
        true
    }

    fn prune(&mut self, j: usize) -> bool {
        let tree = &self.trees[j];
        let nogs: Vec<usize> = tree.internals().filter(|&i| tree.is_nog(i)).collect();
        if nogs.is_empty() {
            return false;
        }
        let eta = nogs[self.rng.random_range(0..nogs.len())];
        let node = tree.nodes[eta];
        let buckets = self.buckets(j);
        let (left, right) = (&buckets[node.left], &buckets[node.right]);
        let rows: Vec<usize> = left.iter().chain(right.iter()).copied().collect();

        let opts = self.ctx.split_options(&rows, &mut self.scratch);
        debug_assert!(opts.contains(node.var, node.cut));
        let n_valid = opts.n_valid as f64;
        let n_cuts = opts.n_cuts(node.var) as f64;

        let mut growable_after = 1;
        for leaf in tree.leaves() {
            if leaf != node.left
                && leaf != node.right
                && self.ctx.split_options(&buckets[leaf], &mut self.scratch).n_valid > 0
            {
                growable_after += 1;
            }
        }

        let prior_old = self.ctx.log_split(node.depth) - n_valid.ln() - n_cuts.ln()
            + self.ctx.leaf_log_prior(left, node.depth + 1, &mut self.scratch)
            + self.ctx.leaf_log_prior(right, node.depth + 1, &mut self.scratch);
        let prior_new = self.ctx.log_stop(node.depth);
        let mp = self.ctx.cfg.move_probs;
        let proposal = self.move_ratio(mp.grow, mp.prune) + (nogs.len() as f64).ln()
            - (growable_after as f64).ln()
            - n_valid.ln()
            - n_cuts.ln();
        let lik = self.rows_loglik(&rows) - self.rows_loglik(left) - self.rows_loglik(right);

        if !self.accept(prior_new - prior_old + proposal + lik) {
            return false;
        }
        let tree = &mut self.trees[j];
        tree.nodes[node.left].alive = false;
        tree.nodes[node.right].alive = false;
        let n = &mut tree.nodes[eta];
        n.leaf = true;
        n.left = NONE;
        n.right = NONE;
        for &row in &rows {
            self.leaf_of[j][row] = eta;
        }
        true
    }

    fn change(&mut self, j: usize) -> bool {
        let internals: Vec<usize> = self.trees[j].internals().collect();
        if internals.is_empty() {
            return false;
        }
        let eta = internals[self.rng.random_range(0..internals.len())];
        let rows = self.subtree_rows(j, eta);
        let opts = self.ctx.split_options(&rows, &mut self.scratch);
        let old = self.trees[j].nodes[eta];
        debug_assert!(opts.contains(old.var, old.cut));
        let (var, cut) = opts.pick(&mut self.rng);

        let mut candidate = self.trees[j].clone();
        candidate.nodes[eta].var = var;
        candidate.nodes[eta].cut = cut;
        let proposal = (opts.n_cuts(var) as f64).ln() - (opts.n_cuts(old.var) as f64).ln();
        self.try_restructure(j, eta, rows, candidate, proposal)
    }

    fn swap(&mut self, j: usize) -> bool {
        let tree = &self.trees[j];
        let pairs: Vec<(usize, usize)> =
            tree.internals().filter(|&c| tree.nodes[c].parent != NONE).map(|c| (tree.nodes[c].parent, c)).collect();
        if pairs.is_empty() {
            return false;
        }
        let (parent, child) = pairs[self.rng.random_range(0..pairs.len())];
        let mut candidate = tree.clone();
        let (pv, pc) = (tree.nodes[parent].var, tree.nodes[parent].cut);
        let (cv, cc) = (tree.nodes[child].var, tree.nodes[child].cut);
        candidate.nodes[parent].var = cv;
        candidate.nodes[parent].cut = cc;
        candidate.nodes[child].var = pv;
        candidate.nodes[child].cut = pc;
        let rows = self.subtree_rows(j, parent);
        self.try_restructure(j, parent, rows, candidate, 0.0)
    }

    fn subtree_rows(&self, j: usize, node: usize) -> Vec<usize> {
        let mask = self.trees[j].in_subtree_mask(node);
        (0..self.y.len()).filter(|&r| mask[self.leaf_of[j][r]]).collect()
    }

    /// MH step for a candidate that only changes rules inside the subtree
    /// rooted at `root` (same shape, different routing).
    fn try_restructure(
        &mut self,
        j: usize,
        root: usize,
        rows: Vec<usize>,
        candidate: WorkTree,
        log_proposal: f64,
    ) -> bool {
        let prior_new = self.ctx.subtree_log_prior(&candidate, root, &rows, &mut self.scratch);
        if prior_new == f64::NEG_INFINITY {
            return false;
        }
        let prior_old = self.ctx.subtree_log_prior(&self.trees[j], root, &rows, &mut self.scratch);

        let size = candidate.nodes.len();
        let (mut n_old, mut s_old) = (vec![0usize; size], vec![0.0; size]);
        let (mut n_new, mut s_new) = (vec![0usize; size], vec![0.0; size]);
        let new_leaf: Vec<usize> = rows.iter().map(|&r| self.ctx.route_from(&candidate, root, r)).collect();
        for (&r, &leaf) in rows.iter().zip(&new_leaf) {
            let old_leaf = self.leaf_of[j][r];
            n_old[old_leaf] += 1;
            s_old[old_leaf] += self.resid[r];
            n_new[leaf] += 1;
            s_new[leaf] += self.resid[r];
        }
        let mut lik = 0.0;
        for i in 0..size {
            if n_old[i] > 0 {
                lik -= self.leaf_loglik(n_old[i], s_old[i]);
            }
            if n_new[i] > 0 {
                lik += self.leaf_loglik(n_new[i], s_new[i]);
            }
        }
        if !self.accept(prior_new - prior_old + log_proposal + lik) {
            return false;
        }
        self.trees[j] = candidate;
        for (&r, &leaf) in rows.iter().zip(&new_leaf) {
            self.leaf_of[j][r] = leaf;
        }
        true
    }

    fn draw_leaves(&mut self, j: usize) {
        let size = self.trees[j].nodes.len();
        let mut n = vec![0usize; size];
        let mut s = vec![0.0; size];
        for (row, &leaf) in self.leaf_of[j].iter().enumerate() {
            n[leaf] += 1;
            s[leaf] += self.resid[row];
        }
        let tau2 = self.params.tau * self.params.tau;
        let leaves: Vec<usize> = self.trees[j].leaves().collect();
        debug_assert_eq!(leaves.len(), self.trees[j].internals().count() + 1);
        for leaf in leaves {
            debug_assert!(n[leaf] >= self.ctx.cfg.min_leaf_size, "leaf {leaf} holds {} rows", n[leaf]);
            let z: f64 = self.rng.sample(StandardNormal);
            let mu = if self.params.use_likelihood {
                let var = 1.0 / (1.0 / tau2 + n[leaf] as f64 / self.sigma2);
                var * s[leaf] / self.sigma2 + var.sqrt() * z
            } else {
                self.params.tau * z
            };
            self.trees[j].nodes[leaf].mu = mu;
        }
        let tree = &self.trees[j];
        for row in 0..self.y.len() {
            let mu = tree.nodes[self.leaf_of[j][row]].mu;
            self.total[row] += mu - self.fits[j][row];
            self.fits[j][row] = mu;
        }
    }

    fn draw_sigma(&mut self) {
        let (nu, lambda) = (self.params.nu, self.params.lambda);
        let (shape, rate) = if self.params.use_likelihood {
            let ssr: f64 = self.y.iter().zip(&self.total).map(|(y, f)| (y - f).powi(2)).sum();
            ((nu + self.y.len() as f64) / 2.0, (nu * lambda + ssr) / 2.0)
        } else {
            (nu / 2.0, nu * lambda / 2.0)
        };
        let gamma = Gamma::new(shape, 1.0 / rate).expect("positive gamma parameters");
        self.sigma2 = 1.0 / gamma.sample(&mut self.rng);
    }
}
