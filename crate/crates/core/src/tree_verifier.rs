//! Tree-ensemble robustness verification.
//!
//! A single tree is verified exactly: every leaf owns an axis-aligned box,
//! and the adversary's best move is the worst leaf whose box is within
//! reach. Ensembles couple features across trees, so exact verification is
//! intractable; the multi-level procedure groups trees, enumerates jointly
//! reachable leaf combinations per group, and sums per-group minima into a
//! sound margin bound that tightens as the group size or level count grows.

use crate::error::{Error, Result};
use crate::geometry::{AxisBox, PerturbationSpec};
use crate::model::{Sample, TreeEnsemble, TreeNode};
use crate::stump_verifier::VerificationResult;

/// Default bound on live leaf combinations per group.
pub const DEFAULT_PSEUDO_NODE_CAP: usize = 1_000_000;

/// One reachable leaf: its decision region and prediction value.
#[derive(Debug, Clone)]
pub struct LeafRecord {
    pub tree_index: usize,
    pub leaf_id: usize,
    pub bounds: AxisBox,
    pub value: f64,
}

/// A choice of one leaf from each of several trees whose regions jointly
/// intersect. `bounds` is the intersection of the member regions and
/// `value` the sum of the members' label-signed values.
#[derive(Debug, Clone)]
pub struct PseudoNode {
    pub members: Vec<(usize, usize)>,
    pub bounds: AxisBox,
    pub value: f64,
}

/// Group size and merge depth of the multi-level verifier. A group size
/// covering the whole ensemble at one level makes the bound exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultiLevelConfig {
    pub clique_size: usize,
    pub levels: usize,
    pub max_pseudo_nodes: usize,
}

impl MultiLevelConfig {
    pub fn new(clique_size: usize, levels: usize) -> Result<Self> {
        if clique_size < 1 || levels < 1 {
            return Err(Error::invalid(format!(
                "clique size and level count must be at least 1, got {clique_size} and {levels}"
            )));
        }
        Ok(Self { clique_size, levels, max_pseudo_nodes: DEFAULT_PSEUDO_NODE_CAP })
    }
}

/// Decision regions of every reachable leaf, left-to-right. Leaves whose
/// path constraints contradict each other own no region and are skipped;
/// `leaf_id` still counts them so ids match tree positions.
pub fn compute_leaf_boxes(tree: &TreeNode, dimension: usize, tree_index: usize) -> Vec<LeafRecord> {
    let mut records = Vec::with_capacity(tree.leaf_count());
    let mut next_leaf = 0usize;
    walk(tree, Some(AxisBox::full(dimension)), tree_index, &mut next_leaf, &mut records);
    records
}

fn walk(
    node: &TreeNode,
    bounds: Option<AxisBox>,
    tree_index: usize,
    next_leaf: &mut usize,
    out: &mut Vec<LeafRecord>,
) {
    match node {
        TreeNode::Leaf { value } => {
            let leaf_id = *next_leaf;
            *next_leaf += 1;
            if let Some(bounds) = bounds {
                out.push(LeafRecord { tree_index, leaf_id, bounds, value: *value });
            }
        }
        TreeNode::Split { feature, threshold, left, right } => {
            let left_bounds = bounds.as_ref().and_then(|b| b.restrict_upper(*feature, *threshold));
            walk(left, left_bounds, tree_index, next_leaf, out);
            let right_bounds = bounds.and_then(|b| b.restrict_lower(*feature, *threshold));
            walk(right, right_bounds, tree_index, next_leaf, out);
        }
    }
}

/// Exact single-tree verification: the worst label-signed leaf value among
/// leaves whose region closure the ball reaches.
pub fn verify_single_tree(
    tree: &TreeNode,
    sample: &Sample,
    spec: PerturbationSpec,
) -> Result<VerificationResult> {
    let dimension = sample.features.len();
    tree.validate(dimension)?;
    if spec.epsilon == 0.0 {
        return Ok(VerificationResult::new(sample.label * tree.evaluate(&sample.features), true));
    }
    let budget = spec.norm.budget(spec.epsilon);
    let margin = compute_leaf_boxes(tree, dimension, 0)
        .iter()
        .filter(|leaf| leaf.bounds.reach_cost(&sample.features, spec.norm) <= budget)
        .map(|leaf| sample.label * leaf.value)
        .fold(f64::INFINITY, f64::min);
    debug_assert!(margin.is_finite(), "the sample's own leaf is always reachable");
    Ok(VerificationResult::new(margin, true))
}

/// Verifier for one tree ensemble; construction extracts every tree's leaf
/// regions once.
pub struct TreeVerifier<'a> {
    ensemble: &'a TreeEnsemble,
    leaves: Vec<Vec<LeafRecord>>,
}

impl<'a> TreeVerifier<'a> {
    pub fn new(ensemble: &'a TreeEnsemble) -> Self {
        let leaves = ensemble
            .trees()
            .iter()
            .enumerate()
            .map(|(index, tree)| compute_leaf_boxes(tree, ensemble.dimension(), index))
            .collect();
        Self { ensemble, leaves }
    }

    pub fn ensemble(&self) -> &TreeEnsemble {
        self.ensemble
    }

    pub fn leaves(&self, tree_index: usize) -> &[LeafRecord] {
        &self.leaves[tree_index]
    }

    pub fn clean_margin(&self, sample: &Sample) -> f64 {
        let score: f64 =
            self.ensemble.trees().iter().map(|t| t.evaluate(&sample.features)).sum();
        sample.label * score
    }

    /// Sound margin bound by grouped clique enumeration.
    ///
    /// Trees are pruned to reachable leaves, grouped into consecutive runs
    /// of `clique_size`, and each group enumerates leaf combinations whose
    /// joint region stays reachable; the group minima are summed. Further
    /// levels regroup the surviving combinations. The result is exact
    /// whenever the final level collapses to a single group.
    pub fn verify_multilevel(
        &self,
        sample: &Sample,
        spec: PerturbationSpec,
        config: &MultiLevelConfig,
    ) -> Result<VerificationResult> {
        if sample.features.len() != self.ensemble.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.ensemble.dimension(),
                got: sample.features.len(),
            });
        }
        if config.clique_size < 1 || config.levels < 1 {
            return Err(Error::invalid("clique size and level count must be at least 1"));
        }
        if self.ensemble.is_empty() {
            return Ok(VerificationResult::new(0.0, true));
        }
        if spec.epsilon == 0.0 {
            return Ok(VerificationResult::new(self.clean_margin(sample), true));
        }

        let x = &sample.features;
        let budget = spec.norm.budget(spec.epsilon);
        let mut parts: Vec<Vec<PseudoNode>> = self
            .leaves
            .iter()
            .map(|leaves| {
                leaves
                    .iter()
                    .filter(|leaf| leaf.bounds.reach_cost(x, spec.norm) <= budget)
                    .map(|leaf| PseudoNode {
                        members: vec![(leaf.tree_index, leaf.leaf_id)],
                        bounds: leaf.bounds.clone(),
                        value: sample.label * leaf.value,
                    })
                    .collect()
            })
            .collect();

        for _ in 0..config.levels {
            let mut merged = Vec::with_capacity(parts.len().div_ceil(config.clique_size));
            for group in parts.chunks(config.clique_size) {
                merged.push(enumerate_group(group, x, spec, budget, config.max_pseudo_nodes)?);
            }
            parts = merged;
        }

        let complete = parts.len() == 1;
        let margin = parts
            .iter()
            .map(|part| {
                debug_assert!(!part.is_empty(), "the sample's own region always survives");
                part.iter().map(|node| node.value).fold(f64::INFINITY, f64::min)
            })
            .sum();
        Ok(VerificationResult::new(margin, complete))
    }
}

/// Joins one part at a time, keeping only combinations whose intersected
/// region stays within reach. Checking reach at every join is equivalent to
/// checking once at the end: regions only shrink, so a combination that
/// falls out of reach can never come back.
fn enumerate_group(
    group: &[Vec<PseudoNode>],
    x: &[f64],
    spec: PerturbationSpec,
    budget: f64,
    cap: usize,
) -> Result<Vec<PseudoNode>> {
    let mut live = group[0].clone();
    for part in &group[1..] {
        let mut joined = Vec::with_capacity(live.len());
        for node in &live {
            for other in part {
                let Some(bounds) = node.bounds.intersect(&other.bounds) else {
                    continue;
                };
                if bounds.reach_cost(x, spec.norm) > budget {
                    continue;
                }
                let mut members = node.members.clone();
                members.extend_from_slice(&other.members);
                joined.push(PseudoNode { members, bounds, value: node.value + other.value });
                if joined.len() > cap {
                    return Err(Error::ResourceLimit(format!(
                        "clique enumeration exceeded {cap} live combinations"
                    )));
                }
            }
        }
        live = joined;
    }
    Ok(live)
}
