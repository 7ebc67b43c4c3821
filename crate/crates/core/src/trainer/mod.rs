//! Certified robust boosting.
//!
//! Each round fits one stump (or tree) by minimizing a verified upper bound
//! on the robust exponential loss: for every candidate split, the worst
//! reachable prediction under the perturbation model is bounded per sample,
//! and the leaf weights are chosen by convex coordinate descent on that
//! bound. The perturbation radius ramps linearly over the first
//! `schedule_length` rounds (stumps) or depth levels (trees).

mod stump;
mod tree;
mod weights;

pub use stump::{fit_stump_round, robust_margin_lower_bound, train_stumps, SplitWeights};
pub use tree::{fit_tree, sample_budget, train_trees, PathStep};
pub use weights::{exp_loss, solve_leaf_weights, BranchBounds, WeightFit};

use crate::error::{Error, Result};
use crate::dataset::Dataset;
use crate::geometry::Norm;

/// Boosting hyperparameters shared by the stump and tree trainers.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub norm: Norm,
    /// Target perturbation radius the model is trained to certify.
    pub epsilon: f64,
    /// Number of boosted stumps or trees.
    pub rounds: usize,
    /// Leaf-weight multiplier in (0, 1].
    pub shrinkage: f64,
    /// Rounds (stumps) or depth levels (trees) over which the radius ramps
    /// up to the target.
    pub schedule_length: usize,
    /// Budget-grid cell width for finite-p bounds.
    pub precision: f64,
    pub max_depth: usize,
    /// Cap on candidate thresholds per feature.
    pub candidate_cap: usize,
    pub coord_descent_iters: usize,
    pub bisection_tolerance: f64,
    /// Leaf weights are confined to this symmetric interval.
    pub weight_bound: f64,
}

impl TrainConfig {
    pub fn new(norm: Norm, epsilon: f64) -> Self {
        Self {
            norm,
            epsilon,
            rounds: 20,
            shrinkage: 1.0,
            schedule_length: 1,
            precision: 0.01,
            max_depth: 1,
            candidate_cap: 256,
            coord_descent_iters: 10,
            bisection_tolerance: 1e-6,
            weight_bound: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if matches!(self.norm, Norm::Zero) {
            return Err(Error::invalid(
                "training against coordinate-count perturbations is not supported",
            ));
        }
        if let Norm::Finite(p) = self.norm {
            if !p.is_finite() || p <= 0.0 {
                return Err(Error::invalid(format!("norm exponent must be positive, got {p}")));
            }
        }
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return Err(Error::invalid("target radius must be finite and nonnegative"));
        }
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return Err(Error::invalid("shrinkage must lie in (0, 1]"));
        }
        if self.schedule_length < 1 {
            return Err(Error::invalid("schedule length must be at least 1"));
        }
        if !self.precision.is_finite() || self.precision <= 0.0 {
            return Err(Error::invalid("grid precision must be positive"));
        }
        if self.max_depth < 1 {
            return Err(Error::invalid("tree depth limit must be at least 1"));
        }
        if self.candidate_cap < 1 {
            return Err(Error::invalid("candidate cap must be at least 1"));
        }
        if self.coord_descent_iters < 1 {
            return Err(Error::invalid("coordinate descent needs at least one iteration"));
        }
        if self.bisection_tolerance.is_nan() || self.bisection_tolerance <= 0.0 {
            return Err(Error::invalid("bisection tolerance must be positive"));
        }
        if !self.weight_bound.is_finite() || self.weight_bound <= 0.0 {
            return Err(Error::invalid("weight bound must be positive and finite"));
        }
        Ok(())
    }
}

/// Per-round training log entry.
#[derive(Debug, Clone, Copy)]
pub struct RoundStats {
    /// 1-based round index.
    pub round: usize,
    /// Radius in effect for the round.
    pub epsilon: f64,
    /// Verified robust-loss bound after the round.
    pub loss: f64,
    /// Wall time the round took.
    pub seconds: f64,
}

/// Linear radius ramp: full target from step `schedule_length` onward.
/// Steps count from 1.
pub fn epsilon_schedule(target: f64, step: usize, schedule_length: usize) -> f64 {
    debug_assert!(step >= 1 && schedule_length >= 1);
    if step >= schedule_length {
        target
    } else {
        target * step as f64 / schedule_length as f64
    }
}

/// Candidate thresholds for one feature: midpoints of consecutive distinct
/// values, thinned to at most `cap` by even index spacing.
pub fn candidate_splits(dataset: &Dataset, feature: usize, cap: usize) -> Vec<f64> {
    let mut values: Vec<f64> =
        dataset.samples.iter().map(|s| s.features[feature]).collect();
    midpoints_capped(&mut values, cap)
}

pub(crate) fn midpoints_capped(values: &mut Vec<f64>, cap: usize) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    values.dedup();
    if values.len() < 2 {
        return Vec::new();
    }
    let midpoints: Vec<f64> = values.windows(2).map(|pair| 0.5 * (pair[0] + pair[1])).collect();
    if midpoints.len() <= cap {
        return midpoints;
    }
    if cap == 1 {
        return vec![midpoints[midpoints.len() / 2]];
    }
    let mut thinned = Vec::with_capacity(cap);
    for i in 0..cap {
        thinned.push(midpoints[i * (midpoints.len() - 1) / (cap - 1)]);
    }
    thinned.dedup();
    thinned
}
