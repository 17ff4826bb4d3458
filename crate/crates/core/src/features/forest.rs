//! CART classification forest with Gini impurity, used for feature ranking.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        p_condition: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug, Clone)]
pub struct RandomForest {
    trees: Vec<Node>,
    n_features: usize,
    /// Summed, sample-weighted impurity decrease per feature (unnormalised).
    decrease: Vec<f64>,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    config: &'a ForestConfig,
    max_features: usize,
    decrease: Vec<f64>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn grow(&mut self, idx: &mut [usize], depth: usize, rng: &mut Rng) -> Node {
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| self.y[i] == 1).count();
        let leaf = Node::Leaf {
            p_condition: pos as f64 / n as f64,
        };
        if pos == 0 || pos == n || n < self.config.min_samples_split {
            return leaf;
        }
        if self.config.max_depth.is_some_and(|d| depth >= d) {
            return leaf;
        }
        let Some(best) = self.best_split(idx, pos, rng) else {
            return leaf;
        };
        self.decrease[best.feature] += best.gain;

        let x = self.x;
        idx.sort_by(|&a, &b| x[a][best.feature].total_cmp(&x[b][best.feature]));
        let cut = idx.partition_point(|&i| x[i][best.feature] <= best.threshold);
        let (l, r) = idx.split_at_mut(cut);
        let left = Box::new(self.grow(l, depth + 1, rng));
        let right = Box::new(self.grow(r, depth + 1, rng));
        Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        }
    }

    /// Best split among a random subset of `max_features` features. If none of
    /// those can split the node, further features are drawn until one can.
    fn best_split(&self, idx: &[usize], pos: usize, rng: &mut Rng) -> Option<BestSplit> {
        let n = idx.len();
        let parent = gini(pos, n) * n as f64;
        let mut features: Vec<usize> = (0..self.x[0].len()).collect();
        features.shuffle(rng);

        let mut order = idx.to_vec();
        let mut best: Option<BestSplit> = None;
        for (visited, &f) in features.iter().enumerate() {
            if visited >= self.max_features && best.is_some() {
                break;
            }
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut left_pos = 0;
            for k in 1..n {
                left_pos += self.y[order[k - 1]];
                let (lo, hi) = (self.x[order[k - 1]][f], self.x[order[k]][f]);
                if lo == hi {
                    continue;
                }
                let children = gini(left_pos, k) * k as f64 + gini(pos - left_pos, n - k) * (n - k) as f64;
                let gain = parent - children;
                if gain > 1e-12 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }
}

impl RandomForest {
    /// Fit on rows `x` with binary labels `y` (1 = condition). Tree `t` draws
    /// from its own derived stream, so the result depends only on `seed`.
    pub fn fit(x: &[Vec<f64>], y: &[usize], config: &ForestConfig, seed: u64) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Shape(format!(
                "forest needs matching non-empty rows and labels ({} vs {})",
                x.len(),
                y.len()
            )));
        }
        let n_features = x[0].len();
        if n_features == 0 || x.iter().any(|r| r.len() != n_features) {
            return Err(Error::Shape("ragged or empty feature rows".into()));
        }
        if config.n_trees == 0 || config.min_samples_split < 2 {
            return Err(Error::InvalidConfig(
                "forest needs n_trees >= 1 and min_samples_split >= 2".into(),
            ));
        }
        let max_features = ((n_features as f64).sqrt().floor() as usize).max(1);
        let mut builder = Builder {
            x,
            y,
            config,
            max_features,
            decrease: vec![0.0; n_features],
        };
        let n = x.len();
        let trees = (0..config.n_trees)
            .map(|t| {
                let mut rng = stream(seed, Purpose::Forest, t as u64);
                let mut idx: Vec<usize> = if config.bootstrap {
                    (0..n).map(|_| rng.gen_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                builder.grow(&mut idx, 0, &mut rng)
            })
            .collect();
        Ok(RandomForest {
            trees,
            n_features,
            decrease: builder.decrease,
        })
    }

    /// Impurity decrease per feature normalised to sum to 1. Uniform when the
    /// forest never split.
    pub fn importances(&self) -> Vec<f64> {
        let total: f64 = self.decrease.iter().sum();
        if total > 0.0 {
            self.decrease.iter().map(|d| d / total).collect()
        } else {
            vec![1.0 / self.n_features as f64; self.n_features]
        }
    }

    /// Mean leaf condition-probability over trees.
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        let sum: f64 = self
            .trees
            .iter()
            .map(|tree| {
                let mut node = tree;
                loop {
                    match node {
                        Node::Leaf { p_condition } => break *p_condition,
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => {
                            node = if row[*feature] <= *threshold { left } else { right };
                        }
                    }
                }
            })
            .sum();
        sum / self.trees.len() as f64
    }
}
