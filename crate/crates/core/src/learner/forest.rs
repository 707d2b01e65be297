//! Random forest of axis-aligned Gini trees.
//!
//! Trees are grown on presorted columns: every feature keeps the node's
//! samples in ascending order, and a split stably partitions each column.
//! Split search is therefore a linear scan per candidate feature.
//!
//! Tree `t` draws from a stream seeded by `(seed, t)`, so a fitted forest
//! does not depend on how many threads trained it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_rows, ratio_of, Classifier, Learner, LearnerError, Prediction, TrainRow};
use crate::dataset::{ClassRatio, Label};
use crate::rng::Stream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), LearnerError> {
        if self.n_trees == 0 {
            return Err(LearnerError::InvalidConfig("n_trees must be >= 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(LearnerError::InvalidConfig("min_leaf must be >= 1".into()));
        }
        if self.max_depth == Some(0) {
            return Err(LearnerError::InvalidConfig("max_depth must be >= 1".into()));
        }
        Ok(())
    }

    /// Features examined per split: `floor(sqrt(dim))`, at least one.
    pub fn features_per_split(dim: usize) -> usize {
        ((dim as f64).sqrt().floor() as usize).max(1)
    }
}

/// Learner handle for [`LearnerConfig`].
#[derive(Clone, Debug, PartialEq)]
pub struct RandomForest {
    pub config: LearnerConfig,
}

impl RandomForest {
    pub fn new(config: LearnerConfig) -> Self {
        Self { config }
    }
}

impl Learner for RandomForest {
    type Model = Forest;

    fn fit(&self, rows: &[TrainRow<'_>]) -> Result<Forest, LearnerError> {
        Forest::fit(rows, &self.config)
    }

    fn reseeded(&self, seed: u64) -> Self {
        Self {
            config: LearnerConfig {
                seed,
                ..self.config.clone()
            },
        }
    }

    fn seed(&self) -> u64 {
        self.config.seed
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        benign: u32,
        malicious: u32,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// Majority class of the leaf reached by `x`; ties go benign.
    pub fn vote(&self, x: &[f64]) -> Label {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[feature as usize] <= threshold {
                        left as usize
                    } else {
                        right as usize
                    };
                }
                Node::Leaf { benign, malicious } => {
                    return if malicious > benign {
                        Label::Malicious
                    } else {
                        Label::Benign
                    };
                }
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Split { left, right, .. } => {
                    1 + go(nodes, left as usize).max(go(nodes, right as usize))
                }
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }

    /// `(feature, threshold)` of every split, in node order.
    pub fn splits(&self) -> Vec<(usize, f64)> {
        self.nodes
            .iter()
            .filter_map(|n| match *n {
                Node::Split {
                    feature, threshold, ..
                } => Some((feature as usize, threshold)),
                Node::Leaf { .. } => None,
            })
            .collect()
    }

    /// Training-sample count (with bootstrap multiplicity) of every leaf.
    pub fn leaf_sizes(&self) -> Vec<u32> {
        self.nodes
            .iter()
            .filter_map(|n| match *n {
                Node::Leaf { benign, malicious } => Some(benign + malicious),
                Node::Split { .. } => None,
            })
            .collect()
    }
}

/// A fitted forest.
#[derive(Clone, Debug, PartialEq)]
pub struct Forest {
    trees: Vec<Tree>,
    dim: usize,
    train_size: usize,
    train_ratio: ClassRatio,
}

impl Forest {
    pub fn fit(rows: &[TrainRow<'_>], config: &LearnerConfig) -> Result<Self, LearnerError> {
        config.validate()?;
        let dim = check_rows(rows)?;
        let data = Columns::new(rows, dim);
        let trees = (0..config.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = Stream::derived(config.seed, &[t as u64]);
                grow_tree(&data, config, &mut rng)
            })
            .collect();
        Ok(Self {
            trees,
            dim,
            train_size: rows.len(),
            train_ratio: ratio_of(rows),
        })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn train_size(&self) -> usize {
        self.train_size
    }

    pub fn train_ratio(&self) -> ClassRatio {
        self.train_ratio
    }
}

impl Classifier for Forest {
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict_one(&self, x: &[f64]) -> Prediction {
        let votes = self
            .trees
            .iter()
            .filter(|t| t.vote(x).is_malicious())
            .count();
        Prediction::from_votes(votes as u32, self.trees.len() as u32)
    }
}

/// Column-major training matrix with per-feature presorted order.
struct Columns {
    n: usize,
    dim: usize,
    values: Vec<f64>,
    malicious: Vec<bool>,
    /// `sorted[f]` lists row indices by ascending value of feature `f`,
    /// ties by row index.
    sorted: Vec<Vec<u32>>,
}

impl Columns {
    fn new(rows: &[TrainRow<'_>], dim: usize) -> Self {
        let n = rows.len();
        let mut values = vec![0.0; n * dim];
        for (i, r) in rows.iter().enumerate() {
            for (f, &v) in r.features.iter().enumerate() {
                values[f * n + i] = v;
            }
        }
        let sorted = (0..dim)
            .map(|f| {
                let col = &values[f * n..(f + 1) * n];
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self {
            n,
            dim,
            values,
            malicious: rows.iter().map(|r| r.label.is_malicious()).collect(),
            sorted,
        }
    }

    #[inline]
    fn value(&self, f: usize, i: u32) -> f64 {
        self.values[f * self.n + i as usize]
    }
}

struct Candidate {
    feature: usize,
    /// Last position (inclusive) of the left child in the feature's order.
    pos: usize,
    threshold: f64,
    score: f64,
}

/// Work item: a node slot and its range in every per-feature order.
struct Pending {
    node: usize,
    start: usize,
    end: usize,
    depth: usize,
}

fn grow_tree(data: &Columns, config: &LearnerConfig, rng: &mut Stream) -> Tree {
    // Bootstrap multiplicities; rows with weight 0 are out of bag.
    let mut weight = vec![0u32; data.n];
    if config.bootstrap {
        for _ in 0..data.n {
            weight[rng.below(data.n)] += 1;
        }
    } else {
        weight.fill(1);
    }

    let mut order: Vec<Vec<u32>> = data
        .sorted
        .iter()
        .map(|col| {
            col.iter()
                .copied()
                .filter(|&i| weight[i as usize] > 0)
                .collect()
        })
        .collect();
    let active = order.first().map_or(0, Vec::len);

    let mtry = LearnerConfig::features_per_split(data.dim);
    let mut features: Vec<usize> = (0..data.dim).collect();
    let mut goes_left = vec![false; data.n];
    let mut scratch: Vec<u32> = Vec::with_capacity(active);

    let mut nodes = vec![Node::Leaf {
        benign: 0,
        malicious: 0,
    }];
    let mut stack = vec![Pending {
        node: 0,
        start: 0,
        end: active,
        depth: 0,
    }];

    while let Some(p) = stack.pop() {
        let range = &order[0][p.start..p.end];
        let (mut benign, mut malicious) = (0u32, 0u32);
        for &i in range {
            if data.malicious[i as usize] {
                malicious += weight[i as usize];
            } else {
                benign += weight[i as usize];
            }
        }
        let total = benign + malicious;
        let leaf = Node::Leaf { benign, malicious };
        let stop = benign == 0
            || malicious == 0
            || config.max_depth.is_some_and(|d| p.depth >= d)
            || (total as usize) < 2 * config.min_leaf;
        if stop {
            nodes[p.node] = leaf;
            continue;
        }

        let best = find_split(
            data,
            &order,
            &weight,
            p.start,
            p.end,
            (benign, malicious),
            config.min_leaf as u32,
            mtry,
            &mut features,
            rng,
        );
        let Some(best) = best else {
            nodes[p.node] = leaf;
            continue;
        };

        // Mark sides using the winning feature's order, then stably
        // partition every feature's range.
        let split_col = &order[best.feature][p.start..p.end];
        for (k, &i) in split_col.iter().enumerate() {
            goes_left[i as usize] = k <= best.pos;
        }
        let n_left = best.pos + 1;
        for col in order.iter_mut() {
            let slice = &mut col[p.start..p.end];
            scratch.clear();
            let mut w = 0;
            for k in 0..slice.len() {
                let i = slice[k];
                if goes_left[i as usize] {
                    slice[w] = i;
                    w += 1;
                } else {
                    scratch.push(i);
                }
            }
            debug_assert_eq!(w, n_left);
            slice[w..].copy_from_slice(&scratch);
        }

        let left = nodes.len();
        let right = left + 1;
        nodes.push(leaf.clone());
        nodes.push(leaf);
        nodes[p.node] = Node::Split {
            feature: best.feature as u32,
            threshold: best.threshold,
            left: left as u32,
            right: right as u32,
        };
        let mid = p.start + n_left;
        stack.push(Pending {
            node: right,
            start: mid,
            end: p.end,
            depth: p.depth + 1,
        });
        stack.push(Pending {
            node: left,
            start: p.start,
            end: mid,
            depth: p.depth + 1,
        });
    }
    Tree { nodes }
}

/// Best Gini split over a random subset of features.
///
/// Features are visited in a random order until `mtry` non-constant ones
/// have been scanned. The score maximised is `sum_c n_lc^2 / n_l +
/// sum_c n_rc^2 / n_r`, which is equivalent to minimising the weighted child
/// Gini impurity. Equal scores resolve to the lowest feature index, then the
/// lowest threshold.
#[allow(clippy::too_many_arguments)]
fn find_split(
    data: &Columns,
    order: &[Vec<u32>],
    weight: &[u32],
    start: usize,
    end: usize,
    (benign, malicious): (u32, u32),
    min_leaf: u32,
    mtry: usize,
    features: &mut [usize],
    rng: &mut Stream,
) -> Option<Candidate> {
    let total = benign + malicious;
    let mut best: Option<Candidate> = None;
    let mut scanned = 0;
    let dim = features.len();
    for k in 0..dim {
        if scanned == mtry {
            break;
        }
        // Incremental Fisher-Yates: features[k] is the next random pick.
        let j = k + rng.below(dim - k);
        features.swap(k, j);
        let f = features[k];
        let col = &order[f][start..end];
        let (lo, hi) = (data.value(f, col[0]), data.value(f, col[col.len() - 1]));
        if lo == hi {
            continue;
        }
        scanned += 1;

        let (mut lb, mut lm) = (0u32, 0u32);
        for pos in 0..col.len() - 1 {
            let i = col[pos];
            if data.malicious[i as usize] {
                lm += weight[i as usize];
            } else {
                lb += weight[i as usize];
            }
            let v = data.value(f, i);
            let next = data.value(f, col[pos + 1]);
            if v == next {
                continue;
            }
            let nl = lb + lm;
            let nr = total - nl;
            if nl < min_leaf || nr < min_leaf {
                continue;
            }
            let (rb, rm) = (benign - lb, malicious - lm);
            let score = (lb as f64 * lb as f64 + lm as f64 * lm as f64) / nl as f64
                + (rb as f64 * rb as f64 + rm as f64 * rm as f64) / nr as f64;
            let better = match &best {
                None => true,
                Some(b) => score > b.score || (score == b.score && f < b.feature),
            };
            if better {
                let mut threshold = v + (next - v) / 2.0;
                if threshold >= next {
                    threshold = v;
                }
                best = Some(Candidate {
                    feature: f,
                    pos,
                    threshold,
                    score,
                });
            }
        }
    }
    best
}
