//! Seeded synthetic instances for the benchmark suite.

use certree::dataset::Dataset;
use certree::{Sample, Stump, StumpEnsemble, TreeEnsemble, TreeNode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stump_ensemble(rng: &mut ChaCha8Rng, dimension: usize, count: usize) -> StumpEnsemble {
    let stumps = (0..count)
        .map(|_| {
            Stump::new(
                rng.gen_range(0..dimension),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
            .expect("finite stump values")
        })
        .collect();
    StumpEnsemble::new(dimension, stumps).expect("features lie inside the dimension")
}

pub fn tree_ensemble(
    rng: &mut ChaCha8Rng,
    dimension: usize,
    trees: usize,
    depth: usize,
) -> TreeEnsemble {
    let trees = (0..trees).map(|_| tree(rng, dimension, depth)).collect();
    TreeEnsemble::new(dimension, trees).expect("features lie inside the dimension")
}

fn tree(rng: &mut ChaCha8Rng, dimension: usize, depth: usize) -> TreeNode {
    if depth == 0 || rng.gen_bool(0.25) {
        return TreeNode::leaf(rng.gen_range(-1.0..1.0));
    }
    TreeNode::split(
        rng.gen_range(0..dimension),
        rng.gen_range(-1.0..1.0),
        tree(rng, dimension, depth - 1),
        tree(rng, dimension, depth - 1),
    )
}

pub fn sample(rng: &mut ChaCha8Rng, dimension: usize) -> Sample {
    let features = (0..dimension).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let label = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    Sample::new(features, label).expect("finite features")
}

/// Noisy linearly separable dataset for the training benchmark.
pub fn dataset(rng: &mut ChaCha8Rng, count: usize, dimension: usize) -> Dataset {
    let samples = (0..count)
        .map(|_| {
            let features: Vec<f64> = (0..dimension).map(|_| rng.gen_range(0.0..1.0)).collect();
            let score: f64 =
                features.iter().enumerate().map(|(d, v)| v / (d + 1) as f64).sum::<f64>() - 0.9;
            let label = if (score > 0.0) ^ rng.gen_bool(0.1) { 1.0 } else { -1.0 };
            Sample::new(features, label).expect("finite features")
        })
        .collect();
    Dataset { samples, dimension, name: "bench".to_owned() }
}
