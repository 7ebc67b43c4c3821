//! Model types: decision stumps, stump ensembles, decision trees, tree
//! ensembles, labeled samples, and the per-feature aggregate step function
//! that verification is built on.
//!
//! Routing is unified across stumps and tree nodes: an input goes right iff
//! its feature value is greater than or equal to the threshold.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// One threshold test on one feature with two output values.
#[derive(Debug, Clone, PartialEq)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    /// Prediction when `x[feature] < threshold`.
    pub left_value: f64,
    /// Prediction when `x[feature] >= threshold`.
    pub right_value: f64,
}

impl Stump {
    pub fn new(feature: usize, threshold: f64, left_value: f64, right_value: f64) -> Result<Self> {
        for (name, v) in [
            ("threshold", threshold),
            ("left value", left_value),
            ("right value", right_value),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("stump {name} must be finite, got {v}")));
            }
        }
        Ok(Self { feature, threshold, left_value, right_value })
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        if x[self.feature] >= self.threshold {
            self.right_value
        } else {
            self.left_value
        }
    }
}

/// Additive stump model; the prediction is the sign of the summed outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct StumpEnsemble {
    stumps: Vec<Stump>,
    dimension: usize,
}

impl StumpEnsemble {
    pub fn new(dimension: usize, stumps: Vec<Stump>) -> Result<Self> {
        for stump in &stumps {
            if stump.feature >= dimension {
                return Err(Error::invalid(format!(
                    "stump feature {} out of range for dimension {dimension}",
                    stump.feature
                )));
            }
        }
        Ok(Self { stumps, dimension })
    }

    pub fn empty(dimension: usize) -> Self {
        Self { stumps: Vec::new(), dimension }
    }

    pub fn push(&mut self, stump: Stump) -> Result<()> {
        if stump.feature >= self.dimension {
            return Err(Error::invalid(format!(
                "stump feature {} out of range for dimension {}",
                stump.feature, self.dimension
            )));
        }
        self.stumps.push(stump);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.stumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stumps.is_empty()
    }

    pub fn stumps(&self) -> &[Stump] {
        &self.stumps
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch { expected: self.dimension, got: x.len() });
        }
        Ok(self.stumps.iter().map(|s| s.evaluate(x)).sum())
    }
}

/// Step function summarizing every stump on one feature.
///
/// `thresholds` is strictly increasing; `interval_values[t]` is the summed
/// stump output on the t-th interval, where interval `t` spans
/// `(thresholds[t-1], thresholds[t]]` with infinite outer sentinels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureAggregate {
    pub feature: usize,
    pub thresholds: Vec<f64>,
    pub interval_values: Vec<f64>,
}

impl FeatureAggregate {
    /// Index of the interval containing `x` under right-on-tie routing.
    pub fn interval_index(&self, x: f64) -> usize {
        self.thresholds.partition_point(|&t| t <= x)
    }

    pub fn value_at(&self, x: f64) -> f64 {
        self.interval_values[self.interval_index(x)]
    }

    pub fn interval_count(&self) -> usize {
        self.interval_values.len()
    }

    /// Distance from `x` to the closure of interval `t`.
    pub fn interval_distance(&self, x: f64, t: usize) -> f64 {
        let own = self.interval_index(x);
        if t < own {
            x - self.thresholds[t]
        } else if t > own {
            self.thresholds[t - 1] - x
        } else {
            0.0
        }
    }

    /// Inclusive range of interval indices whose closure meets
    /// `[x - delta, x + delta]`.
    pub fn reachable_range(&self, x: f64, delta: f64) -> (usize, usize) {
        let lo = self.thresholds.partition_point(|&t| t < x - delta);
        let hi = self.thresholds.partition_point(|&t| t <= x + delta);
        (lo, hi)
    }
}

/// Collapses an ensemble into one aggregate per feature that carries stumps.
///
/// Duplicate thresholds merge; features without stumps are absent from the
/// map and contribute the constant zero.
pub fn aggregate_features(ensemble: &StumpEnsemble) -> BTreeMap<usize, FeatureAggregate> {
    let mut per_feature: BTreeMap<usize, Vec<&Stump>> = BTreeMap::new();
    for stump in ensemble.stumps() {
        per_feature.entry(stump.feature).or_default().push(stump);
    }

    per_feature
        .into_iter()
        .map(|(feature, stumps)| {
            let base: f64 = stumps.iter().map(|s| s.left_value).sum();
            // jump of the step function at each threshold
            let mut jumps: Vec<(f64, f64)> = stumps
                .iter()
                .map(|s| (s.threshold, s.right_value - s.left_value))
                .collect();
            jumps.sort_by(|a, b| a.0.total_cmp(&b.0));

            let mut thresholds = Vec::with_capacity(jumps.len());
            let mut deltas: Vec<f64> = Vec::with_capacity(jumps.len());
            for (threshold, delta) in jumps {
                if thresholds.last() == Some(&threshold) {
                    *deltas.last_mut().unwrap() += delta;
                } else {
                    thresholds.push(threshold);
                    deltas.push(delta);
                }
            }

            let mut interval_values = Vec::with_capacity(thresholds.len() + 1);
            let mut running = base;
            interval_values.push(running);
            for delta in deltas {
                running += delta;
                interval_values.push(running);
            }

            (feature, FeatureAggregate { feature, thresholds, interval_values })
        })
        .collect()
}

/// Node of a proper binary decision tree.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn leaf(value: f64) -> Self {
        TreeNode::Leaf { value }
    }

    pub fn split(feature: usize, threshold: f64, left: TreeNode, right: TreeNode) -> Self {
        TreeNode::Split { feature, threshold, left: Box::new(left), right: Box::new(right) }
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match self {
            TreeNode::Leaf { value } => *value,
            TreeNode::Split { feature, threshold, left, right } => {
                if x[*feature] >= *threshold {
                    right.evaluate(x)
                } else {
                    left.evaluate(x)
                }
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn validate(&self, dimension: usize) -> Result<()> {
        match self {
            TreeNode::Leaf { value } => {
                if !value.is_finite() {
                    return Err(Error::invalid(format!("leaf value must be finite, got {value}")));
                }
                Ok(())
            }
            TreeNode::Split { feature, threshold, left, right } => {
                if *feature >= dimension {
                    return Err(Error::invalid(format!(
                        "split feature {feature} out of range for dimension {dimension}"
                    )));
                }
                if !threshold.is_finite() {
                    return Err(Error::invalid(format!(
                        "split threshold must be finite, got {threshold}"
                    )));
                }
                left.validate(dimension)?;
                right.validate(dimension)
            }
        }
    }
}

/// Additive tree model; the prediction is the sign of the summed leaf values.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    trees: Vec<TreeNode>,
    dimension: usize,
}

impl TreeEnsemble {
    pub fn new(dimension: usize, trees: Vec<TreeNode>) -> Result<Self> {
        for tree in &trees {
            tree.validate(dimension)?;
        }
        Ok(Self { trees, dimension })
    }

    pub fn empty(dimension: usize) -> Self {
        Self { trees: Vec::new(), dimension }
    }

    pub fn push(&mut self, tree: TreeNode) -> Result<()> {
        tree.validate(self.dimension)?;
        self.trees.push(tree);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn trees(&self) -> &[TreeNode] {
        &self.trees
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch { expected: self.dimension, got: x.len() });
        }
        Ok(self.trees.iter().map(|t| t.evaluate(x)).sum())
    }
}

/// Feature vector with a binary label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    /// Either -1.0 or +1.0.
    pub label: f64,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: f64) -> Result<Self> {
        if label != 1.0 && label != -1.0 {
            return Err(Error::invalid(format!("label must be -1 or +1, got {label}")));
        }
        if let Some(bad) = features.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("features must be finite, got {bad}")));
        }
        Ok(Self { features, label })
    }
}
