//! Robust tree boosting.
//!
//! A tree is grown top-down over axis-aligned regions. At every split the
//! residual per-sample budget reflects the thresholds already crossed on
//! the path, so deeper decisions see what the adversary has left to spend.
//! Leaf weights come from the same convex solver as stump rounds, with the
//! running ensemble entering through per-sample worst-case prior margins.

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::geometry::{pow_p, root_p, AxisBox, Norm, PerturbationSpec};
use crate::model::{TreeEnsemble, TreeNode};
use crate::trainer::weights::{constant_leaf_weight, solve_leaf_weights, BranchBounds};
use crate::trainer::{epsilon_schedule, midpoints_capped, RoundStats, TrainConfig};
use crate::tree_verifier::verify_single_tree;

/// One ancestor split on the path to a node, with the side taken.
#[derive(Debug, Clone, Copy)]
pub struct PathStep {
    pub feature: usize,
    pub threshold: f64,
    pub goes_right: bool,
}

/// Residual perturbation radius of one sample at a node: thresholds the
/// sample had to be pushed across on the way down consume budget.
pub fn sample_budget(features: &[f64], path: &[PathStep], p: f64, epsilon: f64) -> f64 {
    let mut remaining = pow_p(epsilon, p);
    for step in path {
        let on_right = features[step.feature] >= step.threshold;
        if on_right != step.goes_right {
            remaining -= pow_p(features[step.feature] - step.threshold, p);
        }
    }
    if remaining <= 0.0 {
        0.0
    } else {
        root_p(remaining, p)
    }
}

struct TreeBuilder<'a> {
    dataset: &'a Dataset,
    priors: &'a [f64],
    config: &'a TrainConfig,
    /// Membership budget at the full target radius, in `norm` units.
    budget: f64,
}

impl TreeBuilder<'_> {
    fn leaf(&self, members: &[usize]) -> TreeNode {
        let weight = constant_leaf_weight(
            members.iter().map(|&i| (self.priors[i], self.dataset.samples[i].label)),
            self.config.weight_bound,
        );
        TreeNode::leaf(self.config.shrinkage * weight)
    }

    fn single_class(&self, members: &[usize]) -> bool {
        let first = self.dataset.samples[members[0]].label;
        members.iter().all(|&i| self.dataset.samples[i].label == first)
    }

    /// Residual radius of each member at this node.
    fn member_budgets(&self, members: &[usize], path: &[PathStep], depth: usize) -> Vec<f64> {
        let radius =
            epsilon_schedule(self.config.epsilon, depth + 1, self.config.schedule_length);
        match self.config.norm {
            Norm::Finite(p) => members
                .iter()
                .map(|&i| sample_budget(&self.dataset.samples[i].features, path, p, radius))
                .collect(),
            // crossings on distinct features cost nothing extra in max norm
            _ => vec![radius; members.len()],
        }
    }

    fn grow(
        &self,
        members: Vec<usize>,
        bounds: AxisBox,
        path: &mut Vec<PathStep>,
        depth: usize,
    ) -> Result<TreeNode> {
        debug_assert!(!members.is_empty() && depth < self.config.max_depth);
        if self.single_class(&members) {
            return Ok(self.leaf(&members));
        }

        let on_path: Vec<bool> = {
            let mut mask = vec![false; self.dataset.dimension];
            for step in path.iter() {
                mask[step.feature] = true;
            }
            mask
        };
        let candidates: Vec<(usize, Vec<f64>)> = (0..self.dataset.dimension)
            .filter(|&f| !on_path[f])
            .map(|f| {
                let mut values: Vec<f64> =
                    members.iter().map(|&i| self.dataset.samples[i].features[f]).collect();
                (f, midpoints_capped(&mut values, self.config.candidate_cap))
            })
            .filter(|(_, thresholds)| !thresholds.is_empty())
            .collect();
        if candidates.is_empty() {
            return Ok(self.leaf(&members));
        }

        let budgets = self.member_budgets(&members, path, depth);

        // (loss, feature, threshold, left weight, right delta)
        let per_feature: Vec<(f64, usize, f64, f64, f64)> = candidates
            .par_iter()
            .map(|(feature, thresholds)| {
                let mut best: Option<(f64, usize, f64, f64, f64)> = None;
                for &threshold in thresholds {
                    let branch_bounds: Vec<BranchBounds> = members
                        .iter()
                        .zip(&budgets)
                        .map(|(&i, &radius)| {
                            let x = self.dataset.samples[i].features[*feature];
                            let prior = self.priors[i];
                            BranchBounds {
                                left: if x - threshold <= radius { prior } else { f64::INFINITY },
                                right: if threshold - x <= radius { prior } else { f64::INFINITY },
                                label: self.dataset.samples[i].label,
                            }
                        })
                        .collect();
                    let fit = solve_leaf_weights(
                        &branch_bounds,
                        self.config.coord_descent_iters,
                        self.config.bisection_tolerance,
                        self.config.weight_bound,
                    );
                    if best.is_none_or(|(loss, ..)| fit.loss < loss) {
                        best = Some((
                            fit.loss,
                            *feature,
                            threshold,
                            fit.left_weight,
                            fit.right_delta,
                        ));
                    }
                }
                best.expect("non-empty threshold list")
            })
            .collect();
        let (_, feature, threshold, left_weight, right_delta) = per_feature
            .into_iter()
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.total_cmp(&b.2)))
            .expect("non-empty candidate list");

        let left = self.child(
            &members,
            bounds.restrict_upper(feature, threshold),
            path,
            depth,
            PathStep { feature, threshold, goes_right: false },
            left_weight,
        )?;
        let right = self.child(
            &members,
            bounds.restrict_lower(feature, threshold),
            path,
            depth,
            PathStep { feature, threshold, goes_right: true },
            left_weight + right_delta,
        )?;
        Ok(TreeNode::split(feature, threshold, left, right))
    }

    fn child(
        &self,
        members: &[usize],
        region: Option<AxisBox>,
        path: &mut Vec<PathStep>,
        depth: usize,
        step: PathStep,
        side_weight: f64,
    ) -> Result<TreeNode> {
        let fallback = TreeNode::leaf(self.config.shrinkage * side_weight);
        let Some(region) = region else {
            return Ok(fallback);
        };
        if depth + 1 == self.config.max_depth {
            return Ok(fallback);
        }
        let survivors: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&i| {
                region.reach_cost(&self.dataset.samples[i].features, self.config.norm)
                    <= self.budget
            })
            .collect();
        if survivors.is_empty() {
            return Ok(fallback);
        }
        path.push(step);
        let node = self.grow(survivors, region, path, depth + 1);
        path.pop();
        node
    }
}

/// Grows one robust tree against fixed per-sample prior margins.
pub fn fit_tree(dataset: &Dataset, prior_margins: &[f64], config: &TrainConfig) -> Result<TreeNode> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Training("cannot fit a tree on an empty dataset".into()));
    }
    if prior_margins.len() != dataset.len() {
        return Err(Error::invalid(format!(
            "{} prior margins for {} samples",
            prior_margins.len(),
            dataset.len()
        )));
    }
    let builder = TreeBuilder {
        dataset,
        priors: prior_margins,
        config,
        budget: config.norm.budget(config.epsilon),
    };
    let members: Vec<usize> = (0..dataset.len()).collect();
    let mut path = Vec::new();
    builder.grow(members, AxisBox::full(dataset.dimension), &mut path, 0)
}

/// Boosts `config.rounds` trees. Each round re-fits against the verified
/// worst-case margins of the trees built so far, evaluated at the full
/// target radius, so the logged loss is a certified bound.
pub fn train_trees(
    dataset: &Dataset,
    config: &TrainConfig,
) -> Result<(TreeEnsemble, Vec<RoundStats>)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Training("cannot train on an empty dataset".into()));
    }
    let spec = PerturbationSpec::new(config.norm, config.epsilon)?;
    let mut priors = vec![0.0; dataset.len()];
    let mut ensemble = TreeEnsemble::empty(dataset.dimension);
    let mut log = Vec::with_capacity(config.rounds);
    for round in 1..=config.rounds {
        let start = std::time::Instant::now();
        let tree = fit_tree(dataset, &priors, config)?;
        for (prior, sample) in priors.iter_mut().zip(&dataset.samples) {
            *prior += verify_single_tree(&tree, sample, spec)?.margin_lower_bound;
        }
        ensemble.push(tree)?;
        let loss = priors.iter().map(|&m| crate::trainer::exp_loss(m)).sum();
        log.push(RoundStats {
            round,
            epsilon: config.epsilon,
            loss,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok((ensemble, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{parse_str, ParseOptions};
    use crate::model::StumpEnsemble;
    use crate::trainer::fit_stump_round;

    fn dataset(text: &str) -> Dataset {
        parse_str(text, "t", &ParseOptions::default()).unwrap().dataset
    }

    #[test]
    fn budget_shrinks_with_crossings() {
        let x = [0.5, 0.5];
        assert_eq!(sample_budget(&x, &[], 1.0, 1.0), 1.0);
        let path = [PathStep { feature: 0, threshold: 0.8, goes_right: true }];
        assert!((sample_budget(&x, &path, 1.0, 1.0) - 0.7).abs() < 1e-12);
        let matched = [PathStep { feature: 0, threshold: 0.8, goes_right: false }];
        assert_eq!(sample_budget(&x, &matched, 1.0, 1.0), 1.0);
        let two = [
            PathStep { feature: 0, threshold: 1.1, goes_right: true },
            PathStep { feature: 1, threshold: 1.3, goes_right: true },
        ];
        assert_eq!(sample_budget(&x, &two, 2.0, 1.0), 0.0);
    }

    #[test]
    fn depth_one_matches_stump_round() {
        let data = dataset(
            "+1 1:0.9 2:0.1\n-1 1:0.2 2:0.8\n+1 1:0.7 2:0.3\n-1 1:0.1 2:0.6\n+1 1:0.8 2:0.7",
        );
        let mut config = TrainConfig::new(Norm::Finite(1.0), 0.1);
        config.max_depth = 1;
        let tree = fit_tree(&data, &vec![0.0; data.len()], &config).unwrap();
        let (stump, _) =
            fit_stump_round(&data, &StumpEnsemble::empty(2), &config, 1).unwrap();
        let TreeNode::Split { feature, threshold, left, right } = tree else {
            panic!("expected a split at the root");
        };
        assert_eq!(feature, stump.feature);
        assert_eq!(threshold, stump.threshold);
        assert_eq!(*left, TreeNode::leaf(stump.left_value));
        assert_eq!(*right, TreeNode::leaf(stump.right_value));
    }

    #[test]
    fn zero_radius_grows_standard_greedy_tree() {
        let data = dataset("-1 1:0 2:0\n+1 1:1 2:0\n+1 1:0 2:1\n-1 1:1 2:1");
        let mut config = TrainConfig::new(Norm::Finite(2.0), 0.0);
        config.max_depth = 2;
        let tree = fit_tree(&data, &[0.0; 4], &config).unwrap();
        // xor labels force depth 2 and perfect separation
        assert_eq!(tree.depth(), 2);
        for sample in &data.samples {
            let margin = sample.label * tree.evaluate(&sample.features);
            assert!(margin > 0.0, "sample {:?}", sample.features);
        }
    }

    #[test]
    fn single_class_collapses_to_saturated_leaf() {
        let data = dataset("+1 1:0\n+1 1:1");
        let config = TrainConfig::new(Norm::Finite(1.0), 0.1);
        let tree = fit_tree(&data, &[0.0, 0.0], &config).unwrap();
        assert_eq!(tree, TreeNode::leaf(10.0));
    }

    #[test]
    fn logged_loss_matches_replayed_margins() {
        let data = dataset("+1 1:0.9\n-1 1:0.1\n+1 1:0.8\n-1 1:0.3");
        let mut config = TrainConfig::new(Norm::Finite(1.0), 0.05);
        config.rounds = 3;
        config.max_depth = 2;
        config.shrinkage = 0.5;
        let (ensemble, log) = train_trees(&data, &config).unwrap();
        assert_eq!(ensemble.len(), 3);
        let spec = PerturbationSpec::new(Norm::Finite(1.0), 0.05).unwrap();
        let replayed: f64 = data
            .samples
            .iter()
            .map(|sample| {
                let margin: f64 = ensemble
                    .trees()
                    .iter()
                    .map(|t| verify_single_tree(t, sample, spec).unwrap().margin_lower_bound)
                    .sum();
                crate::trainer::exp_loss(margin)
            })
            .sum();
        assert_eq!(log[2].loss, replayed);
    }

    #[test]
    fn depth_one_ensemble_descends() {
        let data = dataset("+1 1:0.9\n-1 1:0.1\n+1 1:0.8\n-1 1:0.3\n+1 1:0.6");
        let mut config = TrainConfig::new(Norm::Infinity, 0.05);
        config.rounds = 4;
        config.max_depth = 1;
        let (_, log) = train_trees(&data, &config).unwrap();
        for pair in log.windows(2) {
            assert!(pair[1].loss <= pair[0].loss);
        }
    }

    #[test]
    fn paths_never_reuse_features() {
        fn check(node: &TreeNode, used: &mut Vec<usize>, limit: usize) {
            if let TreeNode::Split { feature, left, right, .. } = node {
                assert!(!used.contains(feature));
                assert!(used.len() < limit);
                used.push(*feature);
                check(left, used, limit);
                check(right, used, limit);
                used.pop();
            }
        }
        let data = dataset(
            "+1 1:0.9 2:0.2\n-1 1:0.2 2:0.9\n+1 1:0.8 2:0.4\n-1 1:0.15 2:0.7\n-1 1:0.6 2:0.95",
        );
        let mut config = TrainConfig::new(Norm::Infinity, 0.05);
        config.rounds = 4;
        config.max_depth = 3;
        config.shrinkage = 0.8;
        let (ensemble, _) = train_trees(&data, &config).unwrap();
        assert_eq!(ensemble.len(), 4);
        for tree in ensemble.trees() {
            assert!(tree.depth() <= 3);
            check(tree, &mut Vec::new(), 3);
        }
    }

    #[test]
    fn rejects_mismatched_priors() {
        let data = dataset("+1 1:0\n-1 1:1");
        let config = TrainConfig::new(Norm::Finite(1.0), 0.1);
        assert!(fit_tree(&data, &[0.0], &config).is_err());
    }
}
