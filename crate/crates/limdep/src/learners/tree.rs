//! Regression tree grown on bootstrap row indices with per-node random
//! feature subsets and a variance-reduction split criterion.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub(crate) enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub(crate) struct Tree {
    nodes: Vec<Node>,
}

pub(crate) struct GrowParams {
    pub mtry: usize,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Tree {
    pub fn grow(
        columns: &[&[f64]],
        target: &[f64],
        rows: Vec<usize>,
        params: &GrowParams,
        rng: &mut ChaCha8Rng,
    ) -> Tree {
        let mut tree = Tree { nodes: Vec::new() };
        tree.grow_node(columns, target, rows, 0, params, rng);
        tree
    }

    fn grow_node(
        &mut self,
        columns: &[&[f64]],
        target: &[f64],
        rows: Vec<usize>,
        depth: usize,
        params: &GrowParams,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let n = rows.len();
        let sum: f64 = rows.iter().map(|&i| target[i]).sum();
        let node_mean = sum / n as f64;

        let depth_capped = params.max_depth.is_some_and(|cap| depth >= cap);
        if n < 2 * params.min_leaf || depth_capped || constant(target, &rows) {
            return self.push(Node::Leaf { value: node_mean });
        }

        let best = self.find_split(columns, target, &rows, sum, params, rng);
        let Some(best) = best else {
            return self.push(Node::Leaf { value: node_mean });
        };

        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| columns[best.feature][i] <= best.threshold);

        let id = self.push(Node::Leaf { value: node_mean }); // placeholder
        let left = self.grow_node(columns, target, left_rows, depth + 1, params, rng);
        let right = self.grow_node(columns, target, right_rows, depth + 1, params, rng);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    /// Scan a random feature subset for the split with the largest
    /// variance reduction. Ties break toward the lowest feature index,
    /// then the lowest threshold, so tree growth does not depend on the
    /// order in which candidates are drawn.
    fn find_split(
        &self,
        columns: &[&[f64]],
        target: &[f64],
        rows: &[usize],
        node_sum: f64,
        params: &GrowParams,
        rng: &mut ChaCha8Rng,
    ) -> Option<BestSplit> {
        let n = rows.len();
        let parent_score = node_sum * node_sum / n as f64;
        let candidates = sample_features(columns.len(), params.mtry, rng);

        let mut best: Option<BestSplit> = None;
        let mut sorted: Vec<(f64, f64)> = Vec::with_capacity(n);
        for feature in candidates {
            let col = columns[feature];
            sorted.clear();
            sorted.extend(rows.iter().map(|&i| (col[i], target[i])));
            sorted.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

            let mut left_sum = 0.0;
            for i in 0..n - 1 {
                left_sum += sorted[i].1;
                let n_left = i + 1;
                let n_right = n - n_left;
                if n_left < params.min_leaf || n_right < params.min_leaf {
                    continue;
                }
                if sorted[i].0 == sorted[i + 1].0 {
                    continue;
                }
                let right_sum = node_sum - left_sum;
                let score = left_sum * left_sum / n_left as f64
                    + right_sum * right_sum / n_right as f64;
                let gain = score - parent_score;
                if gain <= 0.0 {
                    continue;
                }
                let threshold = 0.5 * (sorted[i].0 + sorted[i + 1].0);
                let better = match &best {
                    None => true,
                    Some(b) => {
                        gain > b.gain
                            || (gain == b.gain
                                && (feature < b.feature
                                    || (feature == b.feature && threshold < b.threshold)))
                    }
                };
                if better {
                    best = Some(BestSplit {
                        gain,
                        feature,
                        threshold,
                    });
                }
            }
        }
        best
    }

    fn push(&mut self, node: Node) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    pub fn predict_row(&self, features: &dyn Fn(usize) -> f64) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if features(*feature) <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

fn constant(target: &[f64], rows: &[usize]) -> bool {
    let first = target[rows[0]];
    rows.iter().all(|&i| target[i] == first)
}

/// `mtry` distinct feature indices, in ascending order (the tie-break in
/// `find_split` makes evaluation order irrelevant anyway).
fn sample_features(d: usize, mtry: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if mtry >= d {
        return (0..d).collect();
    }
    // Floyd's algorithm
    let mut picked = Vec::with_capacity(mtry);
    for j in (d - mtry)..d {
        let t = rng.gen_range(0..=j);
        if picked.contains(&t) {
            picked.push(j);
        } else {
            picked.push(t);
        }
    }
    picked.sort_unstable();
    picked
}
