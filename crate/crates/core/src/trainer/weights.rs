//! Convex leaf-weight fitting for a fixed split.
//!
//! A candidate split assigns each sample two margin offsets: the worst
//! verified prior margin if the adversary forces the sample into the left
//! leaf, and likewise for the right leaf. With leaf weights `(w_l, w_r)`
//! (left value `w_l`, right value `w_l + w_r`) the certified margin of a
//! sample is the smaller of the two branch margins, and the total
//! exponential loss of that bound is jointly convex in the weights.

/// Worst-case prior margins of one sample under a candidate split.
///
/// `left`/`right` are `+inf` when the adversary cannot place the sample in
/// that leaf within budget.
#[derive(Debug, Clone, Copy)]
pub struct BranchBounds {
    pub left: f64,
    pub right: f64,
    /// Sample label, -1 or +1.
    pub label: f64,
}

impl BranchBounds {
    /// Certified margin bound at the given leaf weights.
    pub fn margin(&self, left_weight: f64, right_delta: f64) -> f64 {
        let left = self.left + self.label * left_weight;
        let right = self.right + self.label * (left_weight + right_delta);
        left.min(right)
    }
}

/// Fitted leaf weights and the loss bound they achieve.
#[derive(Debug, Clone, Copy)]
pub struct WeightFit {
    pub left_weight: f64,
    pub right_delta: f64,
    pub loss: f64,
}

/// Exponential loss of a margin, clamped for numeric range. An infinite
/// margin (unreachable branch) contributes nothing.
pub fn exp_loss(margin: f64) -> f64 {
    if margin == f64::INFINITY {
        0.0
    } else {
        (-margin.clamp(-50.0, 50.0)).exp()
    }
}

fn total_loss(bounds: &[BranchBounds], left_weight: f64, right_delta: f64) -> f64 {
    bounds.iter().map(|b| exp_loss(b.margin(left_weight, right_delta))).sum()
}

/// Closed-form minimizer over a shared additive weight: with per-sample
/// residual margins m_i, the loss sum(exp(-(m_i + y_i w))) is minimized at
/// w = ln(pos / neg) / 2 where pos and neg are the class-wise exp sums.
fn balanced_weight(pos: f64, neg: f64, weight_bound: f64) -> f64 {
    if neg == 0.0 {
        weight_bound
    } else if pos == 0.0 {
        -weight_bound
    } else {
        (0.5 * (pos / neg).ln()).clamp(-weight_bound, weight_bound)
    }
}

/// One-sided closed form: the weight of a leaf all members share.
pub(crate) fn constant_leaf_weight<I>(members: I, weight_bound: f64) -> f64
where
    I: Iterator<Item = (f64, f64)>,
{
    let (mut pos, mut neg) = (0.0, 0.0);
    for (prior, label) in members {
        let g = exp_loss(prior);
        if label > 0.0 {
            pos += g;
        } else {
            neg += g;
        }
    }
    balanced_weight(pos, neg, weight_bound)
}

/// Right subgradient of the loss in the right delta at fixed left weight.
/// A sample contributes only when its right branch is the strict minimum,
/// or ties while moving right would activate it (negative label).
fn right_subgradient(bounds: &[BranchBounds], left_weight: f64, right_delta: f64) -> f64 {
    let mut acc = 0.0;
    for b in bounds {
        let exp_left = exp_loss(b.left + b.label * left_weight);
        let exp_right = exp_loss(b.right + b.label * (left_weight + right_delta));
        if exp_right > exp_left || (exp_right == exp_left && b.label < 0.0) {
            acc += -b.label * exp_right;
        }
    }
    acc
}

/// Minimizes the certified-loss bound over `(w_l, w_r)` by coordinate
/// descent from the origin. Every step is accepted only if it strictly
/// lowers the loss, so the result never exceeds the loss at `(0, 0)`.
pub fn solve_leaf_weights(
    bounds: &[BranchBounds],
    iterations: usize,
    tolerance: f64,
    weight_bound: f64,
) -> WeightFit {
    debug_assert!(!bounds.is_empty());
    let mut left_weight = 0.0;
    let mut right_delta = 0.0;
    let mut loss = total_loss(bounds, left_weight, right_delta);

    for _ in 0..iterations {
        let before = loss;

        let (mut pos, mut neg) = (0.0, 0.0);
        for b in bounds {
            let residual = b.left.min(b.right + b.label * right_delta);
            let g = exp_loss(residual);
            if b.label > 0.0 {
                pos += g;
            } else {
                neg += g;
            }
        }
        let candidate = balanced_weight(pos, neg, weight_bound);
        let candidate_loss = total_loss(bounds, candidate, right_delta);
        if candidate_loss < loss {
            left_weight = candidate;
            loss = candidate_loss;
        }

        let at_low = right_subgradient(bounds, left_weight, -weight_bound);
        let at_high = right_subgradient(bounds, left_weight, weight_bound);
        let candidate = if at_low >= 0.0 {
            -weight_bound
        } else if at_high <= 0.0 {
            weight_bound
        } else {
            let (mut lo, mut hi) = (-weight_bound, weight_bound);
            for _ in 0..60 {
                if hi - lo <= tolerance {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if right_subgradient(bounds, left_weight, mid) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let candidate_loss = total_loss(bounds, left_weight, candidate);
        if candidate_loss < loss {
            right_delta = candidate;
            loss = candidate_loss;
        }

        if before - loss < 1e-9 {
            break;
        }
    }

    WeightFit { left_weight, right_delta, loss }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(bounds: &[BranchBounds]) -> WeightFit {
        solve_leaf_weights(bounds, 50, 1e-9, 10.0)
    }

    #[test]
    fn balanced_left_only_pair_stays_at_origin() {
        let bounds = [
            BranchBounds { left: 0.0, right: f64::INFINITY, label: 1.0 },
            BranchBounds { left: 0.0, right: f64::INFINITY, label: -1.0 },
        ];
        let fit = fit(&bounds);
        assert_eq!(fit.left_weight, 0.0);
        assert_eq!(fit.right_delta, 0.0);
        assert_eq!(fit.loss, 2.0);
    }

    #[test]
    fn left_weight_matches_closed_form() {
        let bounds = [
            BranchBounds { left: -1.0, right: f64::INFINITY, label: 1.0 },
            BranchBounds { left: 0.0, right: f64::INFINITY, label: -1.0 },
        ];
        let fit = fit(&bounds);
        assert!((fit.left_weight - 0.5).abs() < 1e-12);
        assert_eq!(fit.right_delta, 0.0);
        let expected = exp_loss(-0.5) + exp_loss(-0.5);
        assert!((fit.loss - expected).abs() < 1e-12);
    }

    #[test]
    fn separable_pair_balances_under_delta_cap() {
        // with w_r capped at 10 the optimum sits at w_l = -5, w_r = 10
        let bounds = [
            BranchBounds { left: 0.0, right: f64::INFINITY, label: -1.0 },
            BranchBounds { left: f64::INFINITY, right: 0.0, label: 1.0 },
        ];
        let fit = fit(&bounds);
        assert!((fit.left_weight + 5.0).abs() < 1e-9);
        assert!((fit.left_weight + fit.right_delta - 5.0).abs() < 1e-9);
        assert!((fit.loss - 2.0 * exp_loss(5.0)).abs() < 1e-9);
    }

    #[test]
    fn single_class_saturates_weight() {
        let bounds = [
            BranchBounds { left: 0.0, right: f64::INFINITY, label: 1.0 },
            BranchBounds { left: 0.3, right: f64::INFINITY, label: 1.0 },
        ];
        let fit = fit(&bounds);
        assert_eq!(fit.left_weight, 10.0);
    }

    #[test]
    fn never_worse_than_origin() {
        let cases: &[&[BranchBounds]] = &[
            &[BranchBounds { left: 2.0, right: -3.0, label: 1.0 }],
            &[
                BranchBounds { left: -0.5, right: 0.2, label: 1.0 },
                BranchBounds { left: 0.1, right: -0.7, label: -1.0 },
                BranchBounds { left: 0.4, right: 0.4, label: 1.0 },
            ],
        ];
        for bounds in cases {
            let fit = solve_leaf_weights(bounds, 10, 1e-6, 10.0);
            assert!(fit.loss <= total_loss(bounds, 0.0, 0.0));
        }
    }

    #[test]
    fn beats_coarse_grid() {
        let bounds = [
            BranchBounds { left: -0.2, right: 0.5, label: 1.0 },
            BranchBounds { left: 0.3, right: -0.4, label: -1.0 },
            BranchBounds { left: 0.0, right: 0.1, label: 1.0 },
            BranchBounds { left: -0.1, right: 0.6, label: -1.0 },
        ];
        let fit = solve_leaf_weights(&bounds, 50, 1e-9, 10.0);
        let mut grid_best = f64::INFINITY;
        for i in -20..=20 {
            for j in -20..=20 {
                let loss = total_loss(&bounds, 0.1 * i as f64, 0.1 * j as f64);
                grid_best = grid_best.min(loss);
            }
        }
        assert!(fit.loss <= grid_best + 1e-6);
    }

    #[test]
    fn constant_weight_balances_classes() {
        let members = [(0.0, 1.0), (0.0, -1.0)];
        assert_eq!(constant_leaf_weight(members.into_iter(), 10.0), 0.0);
        let single = [(0.0, 1.0), (1.0, 1.0)];
        assert_eq!(constant_leaf_weight(single.into_iter(), 10.0), 10.0);
    }

    #[test]
    fn unreachable_branch_is_ignored() {
        assert_eq!(exp_loss(f64::INFINITY), 0.0);
        let b = BranchBounds { left: f64::INFINITY, right: 0.5, label: 1.0 };
        assert_eq!(b.margin(1.0, 2.0), 0.5 + 3.0);
    }
}
