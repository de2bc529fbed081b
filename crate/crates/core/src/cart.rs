//! CART regression trees with variance-reduction splits.
//!
//! Trees are grown greedily: at every node each feature's distinct sorted
//! values are scanned and the midpoint threshold that minimises the summed
//! squared error of the two children is chosen. Rows are put in a canonical
//! order before training so that the result does not depend on the order in
//! which the caller supplies them.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::FeatureVector;
use crate::error::{Error, Result};

/// Relative slack below which two split scores count as tied.
const SCORE_TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_depth: None,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_split < 2 {
            return Err(Error::arg("min_samples_split must be at least 2"));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::arg("min_samples_leaf must be at least 1"));
        }
        Ok(())
    }
}

/// Routing rule: `value <= threshold` goes left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        prediction: f64,
        count: usize,
    },
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    root: TreeNode,
    n_features: usize,
    params: TreeParams,
}

/// A chosen split, exposed for inspection and tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// Sum of the children's squared errors about their means.
    pub score: f64,
}

impl RegressionTree {
    /// Trains a tree on `features`/`targets`.
    pub fn train(features: &[FeatureVector], targets: &[f64], params: TreeParams) -> Result<Self> {
        params.validate()?;
        if features.is_empty() {
            return Err(Error::arg("cannot train on an empty training set"));
        }
        if features.len() != targets.len() {
            return Err(Error::arg(format!(
                "{} feature vectors but {} targets",
                features.len(),
                targets.len()
            )));
        }
        let n_features = features[0].len();
        if let Some(bad) = features.iter().find(|f| f.len() != n_features) {
            return Err(Error::arg(format!(
                "feature vectors have inconsistent lengths ({} and {})",
                n_features,
                bad.len()
            )));
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::arg("targets must be finite"));
        }

        let mut order: Vec<usize> = (0..features.len()).collect();
        order.sort_by(|&a, &b| canonical_cmp(&features[a], targets[a], &features[b], targets[b]));
        let rows: Vec<&[f64]> = order.iter().map(|&i| features[i].values()).collect();
        let ys: Vec<f64> = order.iter().map(|&i| targets[i]).collect();

        let builder = Builder {
            rows: &rows,
            ys: &ys,
            n_features,
            params,
        };
        let idx: Vec<usize> = (0..rows.len()).collect();
        let root = builder.grow(&idx, 0);
        Ok(RegressionTree {
            root,
            n_features,
            params,
        })
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::arg(format!(
                "feature vector has {} entries, tree expects {}",
                x.len(),
                self.n_features
            )));
        }
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { prediction, .. } => return Ok(*prediction),
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x.0[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict_many<'a, I>(&self, xs: I) -> Result<Vec<f64>>
    where
        I: IntoIterator<Item = &'a FeatureVector>,
    {
        xs.into_iter().map(|x| self.predict(x)).collect()
    }

    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    pub fn params(&self) -> TreeParams {
        self.params
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Indented text dump, one node per line.
    pub fn dump(&self) -> String {
        fn walk(node: &TreeNode, depth: usize, out: &mut String) {
            let pad = "  ".repeat(depth);
            match node {
                TreeNode::Leaf { prediction, count } => {
                    let _ = writeln!(out, "{pad}leaf {prediction} (n={count})");
                }
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let _ = writeln!(out, "{pad}feature {feature} <= {threshold}");
                    walk(left, depth + 1, out);
                    walk(right, depth + 1, out);
                }
            }
        }
        let mut out = String::new();
        walk(&self.root, 0, &mut out);
        out
    }
}

fn canonical_cmp(a: &FeatureVector, ya: f64, b: &FeatureVector, yb: f64) -> Ordering {
    a.0.iter()
        .zip(&b.0)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
        .then(ya.total_cmp(&yb))
}

struct Builder<'a> {
    rows: &'a [&'a [f64]],
    ys: &'a [f64],
    n_features: usize,
    params: TreeParams,
}

impl Builder<'_> {
    fn grow(&self, idx: &[usize], depth: usize) -> TreeNode {
        let first = self.ys[idx[0]];
        if idx.iter().all(|&i| self.ys[i] == first) {
            return TreeNode::Leaf {
                prediction: first,
                count: idx.len(),
            };
        }
        let leaf = || TreeNode::Leaf {
            prediction: idx.iter().map(|&i| self.ys[i]).sum::<f64>() / idx.len() as f64,
            count: idx.len(),
        };
        if idx.len() < self.params.min_samples_split || self.params.max_depth.is_some_and(|d| depth >= d) {
            return leaf();
        }
        let Some(split) = best_split(self.rows, self.ys, idx, self.n_features, self.params.min_samples_leaf) else {
            return leaf();
        };
        let (left, right): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.rows[i][split.feature] <= split.threshold);
        TreeNode::Internal {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(self.grow(&left, depth + 1)),
            right: Box::new(self.grow(&right, depth + 1)),
        }
    }
}

/// Best variance-reduction split over the rows in `idx`, or `None` when no
/// threshold separates them into two children of at least `min_leaf` rows.
///
/// Scores within a relative `1e-12` of each other are ties; ties go to the
/// lowest feature index, then the lowest threshold.
#[allow(clippy::needless_range_loop)]
pub fn best_split(rows: &[&[f64]], ys: &[f64], idx: &[usize], n_features: usize, min_leaf: usize) -> Option<Split> {
    let n = idx.len();
    let mut best: Option<Split> = None;
    let mut sorted = idx.to_vec();
    // centred targets keep the running sums well conditioned
    let mean = idx.iter().map(|&i| ys[i]).sum::<f64>() / n as f64;
    let centred = |i: usize| ys[i] - mean;
    for feature in 0..n_features {
        sorted.sort_by(|&a, &b| rows[a][feature].total_cmp(&rows[b][feature]).then(a.cmp(&b)));
        let total_sum: f64 = sorted.iter().map(|&i| centred(i)).sum();
        let total_sq: f64 = sorted.iter().map(|&i| centred(i) * centred(i)).sum();
        let (mut left_sum, mut left_sq) = (0.0, 0.0);
        for k in 0..n - 1 {
            let y = centred(sorted[k]);
            left_sum += y;
            left_sq += y * y;
            let here = rows[sorted[k]][feature];
            let next = rows[sorted[k + 1]][feature];
            if here == next {
                continue;
            }
            let n_left = k + 1;
            let n_right = n - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let score = sse(left_sum, left_sq, n_left) + sse(total_sum - left_sum, total_sq - left_sq, n_right);
            let threshold = here + (next - here) / 2.0;
            let better = match &best {
                None => true,
                Some(b) => score < b.score - SCORE_TIE_EPS * b.score.abs().max(1e-300),
            };
            if better {
                best = Some(Split {
                    feature,
                    threshold,
                    score,
                });
            }
        }
    }
    best
}

fn sse(sum: f64, sq: f64, n: usize) -> f64 {
    (sq - sum * sum / n as f64).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(rows: &[&[f64]]) -> Vec<FeatureVector> {
        rows.iter().map(|r| FeatureVector(r.to_vec())).collect()
    }

    #[test]
    fn constant_targets_make_one_leaf() {
        let x = fv(&[&[0.0], &[1.0], &[2.0]]);
        let t = RegressionTree::train(&x, &[7.0; 3], TreeParams::default()).unwrap();
        assert_eq!(
            t.root(),
            &TreeNode::Leaf {
                prediction: 7.0,
                count: 3
            }
        );
        assert_eq!(t.predict(&FeatureVector(vec![42.0])).unwrap(), 7.0);
    }

    #[test]
    fn binary_feature_split() {
        let x = fv(&[&[0.0], &[0.0], &[0.0], &[1.0], &[1.0], &[1.0]]);
        let y = [1.0, 1.0, 1.0, 5.0, 5.0, 5.0];
        let t = RegressionTree::train(&x, &y, TreeParams::default()).unwrap();
        match t.root() {
            TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
            } => {
                assert_eq!((*feature, *threshold), (0, 0.5));
                assert_eq!(
                    **left,
                    TreeNode::Leaf {
                        prediction: 1.0,
                        count: 3
                    }
                );
                assert_eq!(
                    **right,
                    TreeNode::Leaf {
                        prediction: 5.0,
                        count: 3
                    }
                );
            }
            leaf => panic!("expected a split, got {leaf:?}"),
        }
        assert_eq!(t.predict(&FeatureVector(vec![0.0])).unwrap(), 1.0);
        assert_eq!(t.predict(&FeatureVector(vec![1.0])).unwrap(), 5.0);
        assert_eq!(t.dump(), "feature 0 <= 0.5\n  leaf 1 (n=3)\n  leaf 5 (n=3)\n");
    }

    #[test]
    fn argument_errors() {
        assert!(RegressionTree::train(&[], &[], TreeParams::default()).is_err());
        let x = fv(&[&[0.0], &[1.0]]);
        assert!(RegressionTree::train(&x, &[1.0], TreeParams::default()).is_err());
        let t = RegressionTree::train(&x, &[1.0, 2.0], TreeParams::default()).unwrap();
        assert!(t.predict(&FeatureVector(vec![0.0, 1.0])).is_err());
        let bad = TreeParams {
            min_samples_split: 1,
            ..TreeParams::default()
        };
        assert!(RegressionTree::train(&x, &[1.0, 2.0], bad).is_err());
    }

    #[test]
    fn respects_depth_and_leaf_size() {
        let x: Vec<FeatureVector> = (0..16).map(|i| FeatureVector(vec![i as f64])).collect();
        let y: Vec<f64> = (0..16).map(|i| (i * i) as f64).collect();
        let shallow = TreeParams {
            max_depth: Some(2),
            ..TreeParams::default()
        };
        let t = RegressionTree::train(&x, &y, shallow).unwrap();
        assert!(t.root().depth() <= 2);
        assert_eq!(t.root().n_leaves(), 4);

        let fat = TreeParams {
            min_samples_leaf: 5,
            ..TreeParams::default()
        };
        let t = RegressionTree::train(&x, &y, fat).unwrap();
        fn min_count(n: &TreeNode) -> usize {
            match n {
                TreeNode::Leaf { count, .. } => *count,
                TreeNode::Internal { left, right, .. } => min_count(left).min(min_count(right)),
            }
        }
        assert!(min_count(t.root()) >= 5);
    }

    #[test]
    fn identical_feature_vectors_cannot_split() {
        let x = fv(&[&[1.0, 2.0], &[1.0, 2.0]]);
        let t = RegressionTree::train(&x, &[1.0, 3.0], TreeParams::default()).unwrap();
        assert_eq!(
            t.root(),
            &TreeNode::Leaf {
                prediction: 2.0,
                count: 2
            }
        );
    }
}
