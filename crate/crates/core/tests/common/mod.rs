//! Reference implementations and instance generators shared by the
//! integration suites.
//!
//! Everything here recomputes results from first principles: worst margins
//! by explicit enumeration, knapsack by the textbook table, boosting by the
//! closed-form greedy fit. The suites compare library output against these.

#![allow(dead_code)]

use certree::{aggregate_features, Norm, Sample, Stump, StumpEnsemble, TreeEnsemble, TreeNode};
use certree::dataset::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_stumps(rng: &mut ChaCha8Rng, dimension: usize, count: usize) -> StumpEnsemble {
    let stumps = (0..count)
        .map(|_| {
            Stump::new(
                rng.gen_range(0..dimension),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
            .expect("generated stump parameters are finite")
        })
        .collect();
    StumpEnsemble::new(dimension, stumps).expect("generated features are in range")
}

pub fn random_sample(rng: &mut ChaCha8Rng, dimension: usize) -> Sample {
    let features = (0..dimension).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let label = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    Sample::new(features, label).expect("generated sample values are finite")
}

pub fn random_tree(rng: &mut ChaCha8Rng, dimension: usize, depth: usize) -> TreeNode {
    if depth == 0 || rng.gen_bool(0.25) {
        return TreeNode::leaf(rng.gen_range(-1.0..1.0));
    }
    TreeNode::split(
        rng.gen_range(0..dimension),
        rng.gen_range(-1.0..1.0),
        random_tree(rng, dimension, depth - 1),
        random_tree(rng, dimension, depth - 1),
    )
}

pub fn random_tree_ensemble(
    rng: &mut ChaCha8Rng,
    dimension: usize,
    trees: usize,
    depth: usize,
) -> TreeEnsemble {
    let trees = (0..trees).map(|_| random_tree(rng, dimension, depth)).collect();
    TreeEnsemble::new(dimension, trees).expect("generated features are in range")
}

/// Binary-labeled dataset with continuous features and a noisy linear
/// ground truth, so no single split separates it and candidate losses are
/// distinct with probability one.
pub fn noisy_dataset(rng: &mut ChaCha8Rng, count: usize, dimension: usize, flip: f64) -> Dataset {
    let samples = (0..count)
        .map(|_| {
            let features: Vec<f64> = (0..dimension).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let score: f64 =
                features.iter().enumerate().map(|(d, v)| v / (d + 1) as f64).sum::<f64>() - 0.1;
            let mut label = if score >= 0.0 { 1.0 } else { -1.0 };
            if rng.gen_bool(flip) {
                label = -label;
            }
            Sample::new(features, label).expect("generated sample values are finite")
        })
        .collect();
    Dataset { samples, dimension, name: "noisy".to_owned() }
}

fn powered(deviation: f64, p: f64) -> f64 {
    if p == 1.0 {
        deviation
    } else if p == 2.0 {
        deviation * deviation
    } else if deviation == 0.0 {
        0.0
    } else {
        deviation.powf(p)
    }
}

/// Worst label-signed margin when at most `budget` coordinates may move
/// freely, by trying every coordinate subset.
pub fn l0_margin_by_subsets(ensemble: &StumpEnsemble, sample: &Sample, budget: usize) -> f64 {
    let aggregates: Vec<_> = aggregate_features(ensemble).into_values().collect();
    let y = sample.label;
    let clean = y * aggregates
        .iter()
        .map(|agg| agg.value_at(sample.features[agg.feature]))
        .sum::<f64>();
    let drops: Vec<f64> = aggregates
        .iter()
        .map(|agg| {
            let own = y * agg.value_at(sample.features[agg.feature]);
            let best = agg.interval_values.iter().map(|&v| y * v).fold(f64::INFINITY, f64::min);
            best - own
        })
        .collect();

    assert!(drops.len() <= 20, "subset enumeration is exponential in the feature count");
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << drops.len()) {
        if mask.count_ones() as usize > budget {
            continue;
        }
        let mut margin = clean;
        for (index, drop) in drops.iter().enumerate() {
            if mask & (1 << index) != 0 {
                margin += drop;
            }
        }
        best = best.min(margin);
    }
    best
}

/// Worst label-signed margin under a per-coordinate cap, by scanning every
/// aggregate interval whose closure the cap reaches.
pub fn linf_margin_by_intervals(ensemble: &StumpEnsemble, sample: &Sample, epsilon: f64) -> f64 {
    assert!(epsilon > 0.0, "at radius zero closures make the point ambiguous on thresholds");
    let y = sample.label;
    let mut margin = 0.0;
    for agg in aggregate_features(ensemble).into_values() {
        let x = sample.features[agg.feature];
        let lo_edge = x - epsilon;
        let hi_edge = x + epsilon;
        let n = agg.thresholds.len();
        let mut worst = f64::INFINITY;
        for (t, &value) in agg.interval_values.iter().enumerate() {
            let above = t == 0 || agg.thresholds[t - 1] <= hi_edge;
            let below = t == n || agg.thresholds[t] >= lo_edge;
            if above && below {
                worst = worst.min(y * value);
            }
        }
        margin += worst;
    }
    margin
}

/// Worst label-signed margin over a finite-p ball, by trying every interval
/// combination whose summed powered distance fits the powered radius.
pub fn lp_margin_by_enumeration(
    ensemble: &StumpEnsemble,
    sample: &Sample,
    p: f64,
    epsilon: f64,
) -> f64 {
    let y = sample.label;
    let tables: Vec<Vec<(f64, f64)>> = aggregate_features(ensemble)
        .into_values()
        .map(|agg| {
            let x = sample.features[agg.feature];
            let own = agg.thresholds.iter().filter(|&&t| t <= x).count();
            (0..agg.interval_values.len())
                .map(|t| {
                    let distance = if t < own {
                        x - agg.thresholds[t]
                    } else if t > own {
                        agg.thresholds[t - 1] - x
                    } else {
                        0.0
                    };
                    (powered(distance, p), y * agg.interval_values[t])
                })
                .collect()
        })
        .collect();
    let mut best = f64::INFINITY;
    enumerate_lp(&tables, 0, 0.0, 0.0, powered(epsilon, p), &mut best);
    best
}

fn enumerate_lp(
    tables: &[Vec<(f64, f64)>],
    index: usize,
    spent: f64,
    acc: f64,
    budget: f64,
    best: &mut f64,
) {
    if index == tables.len() {
        if acc < *best {
            *best = acc;
        }
        return;
    }
    for &(cost, value) in &tables[index] {
        let spent = spent + cost;
        if spent <= budget {
            enumerate_lp(tables, index + 1, spent, acc + value, budget, best);
        }
    }
}

/// Best total value packable into `capacity`, by the classic 0-1 table.
pub fn knapsack_best_value(weights: &[u64], values: &[u64], capacity: u64) -> u64 {
    let capacity = capacity as usize;
    let mut table = vec![0u64; capacity + 1];
    for (&weight, &value) in weights.iter().zip(values) {
        let weight = weight as usize;
        for c in (weight..=capacity).rev() {
            table[c] = table[c].max(table[c - weight] + value);
        }
    }
    table[capacity]
}

/// One leaf's decision region as raw per-dimension `(lo, hi]` bounds.
#[derive(Debug, Clone)]
pub struct LeafRegion {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub value: f64,
}

/// Nonempty leaf regions of one tree, left to right.
pub fn leaf_regions(tree: &TreeNode, dimension: usize) -> Vec<LeafRegion> {
    let mut out = Vec::new();
    collect_regions(
        tree,
        vec![f64::NEG_INFINITY; dimension],
        vec![f64::INFINITY; dimension],
        &mut out,
    );
    out
}

fn collect_regions(node: &TreeNode, lower: Vec<f64>, upper: Vec<f64>, out: &mut Vec<LeafRegion>) {
    match node {
        TreeNode::Leaf { value } => out.push(LeafRegion { lower, upper, value: *value }),
        TreeNode::Split { feature, threshold, left, right } => {
            let hi = upper[*feature].min(*threshold);
            if lower[*feature] < hi {
                let mut shrunk = upper.clone();
                shrunk[*feature] = hi;
                collect_regions(left, lower.clone(), shrunk, out);
            }
            let lo = lower[*feature].max(*threshold);
            if lo < upper[*feature] {
                let mut shrunk = lower;
                shrunk[*feature] = lo;
                collect_regions(right, shrunk, upper, out);
            }
        }
    }
}

fn region_cost(lower: &[f64], upper: &[f64], x: &[f64], norm: Norm) -> f64 {
    match norm {
        Norm::Zero => {
            (0..x.len()).filter(|&d| x[d] < lower[d] || x[d] > upper[d]).count() as f64
        }
        Norm::Finite(p) => {
            let mut total = 0.0;
            for d in 0..x.len() {
                total += powered(closure_gap(x[d], lower[d], upper[d]), p);
            }
            total
        }
        Norm::Infinity => {
            let mut worst = 0.0f64;
            for d in 0..x.len() {
                worst = worst.max(closure_gap(x[d], lower[d], upper[d]));
            }
            worst
        }
    }
}

fn closure_gap(v: f64, lo: f64, hi: f64) -> f64 {
    if v < lo {
        lo - v
    } else if v > hi {
        v - hi
    } else {
        0.0
    }
}

/// Worst label-signed margin of a tree ensemble, by trying every
/// combination of one reachable leaf per tree whose joint region stays
/// reachable.
pub fn tree_margin_by_products(
    ensemble: &TreeEnsemble,
    sample: &Sample,
    norm: Norm,
    epsilon: f64,
) -> f64 {
    assert!(!ensemble.is_empty());
    let budget = match norm {
        Norm::Finite(p) => powered(epsilon, p),
        _ => epsilon,
    };
    let x = &sample.features;
    let y = sample.label;
    let pruned: Vec<Vec<LeafRegion>> = ensemble
        .trees()
        .iter()
        .map(|tree| {
            leaf_regions(tree, ensemble.dimension())
                .into_iter()
                .filter(|r| region_cost(&r.lower, &r.upper, x, norm) <= budget)
                .collect()
        })
        .collect();
    let mut best = f64::INFINITY;
    for seed in &pruned[0] {
        extend_product(
            &pruned[1..],
            &seed.lower,
            &seed.upper,
            y * seed.value,
            x,
            norm,
            budget,
            y,
            &mut best,
        );
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn extend_product(
    rest: &[Vec<LeafRegion>],
    lower: &[f64],
    upper: &[f64],
    acc: f64,
    x: &[f64],
    norm: Norm,
    budget: f64,
    y: f64,
    best: &mut f64,
) {
    let Some((part, rest)) = rest.split_first() else {
        if acc < *best {
            *best = acc;
        }
        return;
    };
    'leaf: for leaf in part {
        let mut lo = lower.to_vec();
        let mut hi = upper.to_vec();
        for d in 0..lo.len() {
            lo[d] = lo[d].max(leaf.lower[d]);
            hi[d] = hi[d].min(leaf.upper[d]);
            if lo[d] >= hi[d] {
                continue 'leaf;
            }
        }
        if region_cost(&lo, &hi, x, norm) > budget {
            continue;
        }
        extend_product(rest, &lo, &hi, acc + y * leaf.value, x, norm, budget, y, best);
    }
}

/// One round of the reference booster: split plus fitted leaf outputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoosterRound {
    pub feature: usize,
    pub threshold: f64,
    pub left: f64,
    pub right: f64,
}

/// Plain greedy boosting with exponential loss and no perturbation: every
/// candidate split gets closed-form clamped leaf weights, the cheapest
/// (feature, threshold) in scan order wins, losses compared strictly.
pub fn greedy_booster(dataset: &Dataset, rounds: usize, weight_bound: f64) -> Vec<BoosterRound> {
    let mut score = vec![0.0; dataset.len()];
    let mut fitted = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let mut best: Option<(f64, BoosterRound)> = None;
        for feature in 0..dataset.dimension {
            for threshold in distinct_midpoints(dataset, feature) {
                let mut pos_left = 0.0;
                let mut neg_left = 0.0;
                let mut pos_right = 0.0;
                let mut neg_right = 0.0;
                for (sample, &prior) in dataset.samples.iter().zip(&score) {
                    let gamma = (-(sample.label * prior)).exp();
                    let (pos, neg) = if sample.features[feature] < threshold {
                        (&mut pos_left, &mut neg_left)
                    } else {
                        (&mut pos_right, &mut neg_right)
                    };
                    if sample.label > 0.0 {
                        *pos += gamma;
                    } else {
                        *neg += gamma;
                    }
                }
                let left = clamped_weight(pos_left, neg_left, weight_bound);
                let right = clamped_weight(pos_right, neg_right, weight_bound);
                let loss = pos_left * (-left).exp()
                    + neg_left * left.exp()
                    + pos_right * (-right).exp()
                    + neg_right * right.exp();
                if best.as_ref().is_none_or(|(cheapest, _)| loss < *cheapest) {
                    best = Some((loss, BoosterRound { feature, threshold, left, right }));
                }
            }
        }
        let (_, round) = best.expect("dataset has at least one splittable feature");
        for (sample, prior) in dataset.samples.iter().zip(&mut score) {
            *prior += if sample.features[round.feature] >= round.threshold {
                round.right
            } else {
                round.left
            };
        }
        fitted.push(round);
    }
    fitted
}

fn clamped_weight(pos: f64, neg: f64, bound: f64) -> f64 {
    if neg == 0.0 {
        bound
    } else if pos == 0.0 {
        -bound
    } else {
        (0.5 * (pos / neg).ln()).clamp(-bound, bound)
    }
}

fn distinct_midpoints(dataset: &Dataset, feature: usize) -> Vec<f64> {
    let mut values: Vec<f64> = dataset.samples.iter().map(|s| s.features[feature]).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    values.windows(2).map(|pair| 0.5 * (pair[0] + pair[1])).collect()
}
