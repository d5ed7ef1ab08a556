//! Gradient-boosted regression trees with the second-order, regularized
//! split gain. Squared-error objective, exact greedy split enumeration over
//! midpoints of adjacent observed feature values (no histograms — the
//! panels are tiny and exactness keeps the brute-force oracle applicable).
//! XGB-1 is climate-only, XGB-2 adds the prior month's case count.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GbtError {
    #[error("no rows to fit")]
    EmptyInput,
    #[error("need at least {min} rows, got {rows}")]
    TooFewRows { rows: usize, min: usize },
    #[error("feature width {got} does not match the ensemble ({expected})")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("gradient/hessian/feature row counts differ")]
    LengthMismatch,
}

/// Boosting hyperparameters. `lambda` is the leaf L2 penalty and `gamma`
/// the per-split penalty from the regularized objective. The seed is
/// carried for run metadata only; fitting is fully deterministic (no
/// row or column subsampling).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtConfig {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    pub seed: u64,
}

impl GbtConfig {
    pub fn validate(&self) -> Result<(), GbtError> {
        if self.n_rounds == 0 {
            return Err(GbtError::InvalidConfig("n_rounds must be >= 1".into()));
        }
        if self.max_depth == 0 {
            return Err(GbtError::InvalidConfig("max_depth must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0) || self.lambda < 0.0 || self.gamma < 0.0 {
            return Err(GbtError::InvalidConfig(
                "learning_rate, lambda, gamma must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// The default cross-validation grid (54 configurations).
    pub fn default_grid(seed: u64) -> Vec<GbtConfig> {
        let mut grid = Vec::new();
        for n_rounds in [50, 200, 500] {
            for learning_rate in [0.05, 0.1, 0.3] {
                for max_depth in [2, 3, 4] {
                    for lambda in [0.0, 1.0] {
                        grid.push(GbtConfig {
                            n_rounds,
                            learning_rate,
                            max_depth,
                            lambda,
                            gamma: 0.0,
                            min_child_weight: 1.0,
                            seed,
                        });
                    }
                }
            }
        }
        grid
    }
}

/// Binary tree node; thresholds are midpoints of adjacent observed values
/// and rows with `x[feature] < threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        weight: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub root: TreeNode,
}

impl RegressionTree {
    pub fn evaluate(&self, row: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { weight } => return *weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if row[*feature] < *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    fn accumulate_gains(&self, totals: &mut [f64]) {
        fn walk(node: &TreeNode, totals: &mut [f64]) {
            if let TreeNode::Split {
                feature,
                gain,
                left,
                right,
                ..
            } = node
            {
                totals[*feature] += gain;
                walk(left, totals);
                walk(right, totals);
            }
        }
        walk(&self.root, totals);
    }
}

/// Additive ensemble: prediction = base + learning_rate * sum of trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtEnsemble {
    pub base_prediction: f64,
    pub learning_rate: f64,
    pub n_features: usize,
    pub trees: Vec<RegressionTree>,
}

impl GbtEnsemble {
    pub fn predict_row(&self, row: &[f64]) -> Result<f64, GbtError> {
        if row.len() != self.n_features {
            return Err(GbtError::DimensionMismatch {
                got: row.len(),
                expected: self.n_features,
            });
        }
        Ok(self.base_prediction
            + self.learning_rate * self.trees.iter().map(|t| t.evaluate(row)).sum::<f64>())
    }

    /// Total split gain credited to each feature.
    pub fn feature_importance(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.n_features];
        for tree in &self.trees {
            tree.accumulate_gains(&mut totals);
        }
        totals
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ensemble serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    gain: f64,
}

fn leaf_score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

/// Greedy depth-first tree growth on gradient/hessian pairs.
pub fn fit_tree(
    g: &[f64],
    h: &[f64],
    x: &[Vec<f64>],
    config: &GbtConfig,
) -> Result<RegressionTree, GbtError> {
    config.validate()?;
    if x.is_empty() {
        return Err(GbtError::EmptyInput);
    }
    if g.len() != x.len() || h.len() != x.len() {
        return Err(GbtError::LengthMismatch);
    }
    let rows: Vec<usize> = (0..x.len()).collect();
    Ok(RegressionTree {
        root: grow(g, h, x, &rows, config.max_depth, config),
    })
}

fn grow(
    g: &[f64],
    h: &[f64],
    x: &[Vec<f64>],
    rows: &[usize],
    depth_left: usize,
    config: &GbtConfig,
) -> TreeNode {
    let g_total: f64 = rows.iter().map(|&i| g[i]).sum();
    let h_total: f64 = rows.iter().map(|&i| h[i]).sum();
    let leaf = || TreeNode::Leaf {
        weight: -g_total / (h_total + config.lambda),
    };
    if depth_left == 0 || rows.len() < 2 {
        return leaf();
    }

    let n_features = x[rows[0]].len();
    let mut best: Option<SplitChoice> = None;
    for feature in 0..n_features {
        let mut ordered: Vec<usize> = rows.to_vec();
        ordered.sort_by(|&a, &b| x[a][feature].partial_cmp(&x[b][feature]).unwrap());

        let mut g_left = 0.0;
        let mut h_left = 0.0;
        for window in 0..ordered.len() - 1 {
            let i = ordered[window];
            g_left += g[i];
            h_left += h[i];
            let lo = x[i][feature];
            let hi = x[ordered[window + 1]][feature];
            if lo == hi {
                continue; // no boundary between equal observed values
            }
            let h_right = h_total - h_left;
            if h_left < config.min_child_weight || h_right < config.min_child_weight {
                continue;
            }
            let g_right = g_total - g_left;
            let gain = 0.5
                * (leaf_score(g_left, h_left, config.lambda)
                    + leaf_score(g_right, h_right, config.lambda)
                    - leaf_score(g_total, h_total, config.lambda))
                - config.gamma;
            if gain > best.as_ref().map_or(0.0, |b| b.gain) {
                best = Some(SplitChoice {
                    feature,
                    threshold: (lo + hi) / 2.0,
                    gain,
                });
            }
        }
    }

    match best {
        None => leaf(),
        Some(choice) => {
            let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                .iter()
                .partition(|&&i| x[i][choice.feature] < choice.threshold);
            TreeNode::Split {
                feature: choice.feature,
                threshold: choice.threshold,
                gain: choice.gain,
                left: Box::new(grow(g, h, x, &left_rows, depth_left - 1, config)),
                right: Box::new(grow(g, h, x, &right_rows, depth_left - 1, config)),
            }
        }
    }
}

/// Boosts from the training-target mean with the squared-error objective:
/// per round, `g_i = prediction_i - y_i`, `h_i = 1`.
pub fn boost(x: &[Vec<f64>], y: &[f64], config: &GbtConfig) -> Result<GbtEnsemble, GbtError> {
    config.validate()?;
    if x.len() < 2 {
        return Err(GbtError::TooFewRows {
            rows: x.len(),
            min: 2,
        });
    }
    if y.len() != x.len() {
        return Err(GbtError::LengthMismatch);
    }
    let n_features = x[0].len();
    for row in x {
        if row.len() != n_features {
            return Err(GbtError::DimensionMismatch {
                got: row.len(),
                expected: n_features,
            });
        }
    }

    let base = y.iter().sum::<f64>() / y.len() as f64;
    let mut predictions = vec![base; y.len()];
    let mut trees = Vec::with_capacity(config.n_rounds);
    let h = vec![1.0; y.len()];
    for _ in 0..config.n_rounds {
        let g: Vec<f64> = predictions.iter().zip(y).map(|(p, t)| p - t).collect();
        let tree = fit_tree(&g, &h, x, config)?;
        for (pred, row) in predictions.iter_mut().zip(x) {
            *pred += config.learning_rate * tree.evaluate(row);
        }
        trees.push(tree);
    }
    Ok(GbtEnsemble {
        base_prediction: base,
        learning_rate: config.learning_rate,
        n_features,
        trees,
    })
}

pub fn predict(ensemble: &GbtEnsemble, x: &[Vec<f64>]) -> Result<Vec<f64>, GbtError> {
    x.iter().map(|row| ensemble.predict_row(row)).collect()
}

/// Grid-search cross-validation over contiguous chronological blocks
/// (never shuffled; these are time series). Ties go to smaller `n_rounds`,
/// then shallower trees.
pub fn grid_search_cv(
    grid: &[GbtConfig],
    x: &[Vec<f64>],
    y: &[f64],
    k: usize,
) -> Result<GbtConfig, GbtError> {
    if grid.is_empty() {
        return Err(GbtError::InvalidConfig("empty grid".into()));
    }
    if k < 2 {
        return Err(GbtError::InvalidConfig("need at least 2 folds".into()));
    }
    let n = x.len();
    if n < 2 * k {
        return Err(GbtError::TooFewRows {
            rows: n,
            min: 2 * k,
        });
    }

    let bounds: Vec<(usize, usize)> = (0..k)
        .map(|fold| (fold * n / k, (fold + 1) * n / k))
        .collect();

    let mut best: Option<(f64, &GbtConfig)> = None;
    for config in grid {
        let mut total_rmse = 0.0;
        let mut failed = false;
        for &(lo, hi) in &bounds {
            let mut x_train = Vec::with_capacity(n - (hi - lo));
            let mut y_train = Vec::with_capacity(n - (hi - lo));
            for i in (0..lo).chain(hi..n) {
                x_train.push(x[i].clone());
                y_train.push(y[i]);
            }
            let Ok(model) = boost(&x_train, &y_train, config) else {
                failed = true;
                break;
            };
            let mut sq = 0.0;
            for i in lo..hi {
                let pred = model.predict_row(&x[i])?;
                sq += (pred - y[i]) * (pred - y[i]);
            }
            total_rmse += (sq / (hi - lo) as f64).sqrt();
        }
        if failed {
            continue;
        }
        let mean_rmse = total_rmse / k as f64;
        let better = match best {
            None => true,
            Some((best_rmse, best_config)) => {
                mean_rmse < best_rmse
                    || (mean_rmse == best_rmse
                        && (config.n_rounds < best_config.n_rounds
                            || (config.n_rounds == best_config.n_rounds
                                && config.max_depth < best_config.max_depth)))
            }
        };
        if better {
            best = Some((mean_rmse, config));
        }
    }
    best.map(|(_, c)| c.clone())
        .ok_or(GbtError::InvalidConfig("every configuration failed".into()))
}
