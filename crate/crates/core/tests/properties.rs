//! Property-based invariants: soundness orderings, monotonicity in the
//! budget, aggregation and serialization consistency, and loss descent on
//! random training data.

mod common;

use certree::{
    deserialize_model, serialize_model, AxisBox, Model, MultiLevelConfig, Norm, PerturbationSpec,
    Sample, Stump, StumpEnsemble, StumpVerifier, TrainConfig, TreeVerifier, train_stumps,
    verify_single_tree,
};
use common::*;
use proptest::prelude::*;

fn stump_instance(
    max_dim: usize,
    max_stumps: usize,
) -> impl Strategy<Value = (StumpEnsemble, Sample)> {
    (1..=max_dim).prop_flat_map(move |dimension| {
        let stump = (0..dimension, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_map(|(feature, threshold, left, right)| {
                Stump::new(feature, threshold, left, right).unwrap()
            });
        (
            prop::collection::vec(stump, 1..=max_stumps),
            prop::collection::vec(-1.0..1.0f64, dimension),
            prop::bool::ANY,
        )
            .prop_map(move |(stumps, features, positive)| {
                (
                    StumpEnsemble::new(dimension, stumps).unwrap(),
                    Sample::new(features, if positive { 1.0 } else { -1.0 }).unwrap(),
                )
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dp_bound_is_sound((ensemble, sample) in stump_instance(5, 6),
                         p in prop::sample::select(vec![1.0, 2.0, 3.0]),
                         epsilon in 0.01..0.8f64,
                         precision in 0.002..0.05f64) {
        let verifier = StumpVerifier::new(&ensemble);
        let dp = verifier.verify_lp_dp(&sample, p, epsilon, precision).unwrap();
        let exact = verifier.verify_lp_exact(&sample, p, epsilon).unwrap();
        prop_assert!(dp.margin_lower_bound <= exact.margin_lower_bound);
        prop_assert!(!dp.robust || exact.robust);
    }

    #[test]
    fn exact_margin_shrinks_with_radius((ensemble, sample) in stump_instance(4, 6),
                                        p in prop::sample::select(vec![1.0, 2.0]),
                                        lo in 0.0..0.5f64,
                                        extra in 0.0..0.5f64) {
        let verifier = StumpVerifier::new(&ensemble);
        let tight = verifier.verify_lp_exact(&sample, p, lo).unwrap();
        let wide = verifier.verify_lp_exact(&sample, p, lo + extra).unwrap();
        prop_assert!(wide.margin_lower_bound <= tight.margin_lower_bound);
    }

    #[test]
    fn l0_margin_shrinks_with_budget((ensemble, sample) in stump_instance(6, 6)) {
        let verifier = StumpVerifier::new(&ensemble);
        let mut previous = f64::INFINITY;
        for budget in 0..=ensemble.dimension() {
            let result = verifier.verify_l0(&sample, budget).unwrap();
            prop_assert!(result.margin_lower_bound <= previous);
            previous = result.margin_lower_bound;
        }
        prop_assert_eq!(
            verifier.verify_l0(&sample, 0).unwrap().margin_lower_bound,
            verifier.clean_margin(&sample)
        );
    }

    #[test]
    fn linf_margin_bounded_by_clean((ensemble, sample) in stump_instance(5, 6),
                                    epsilon in 0.001..1.5f64) {
        let verifier = StumpVerifier::new(&ensemble);
        let result = verifier.verify_linf(&sample, epsilon).unwrap();
        prop_assert!(result.margin_lower_bound <= verifier.clean_margin(&sample));
        prop_assert_eq!(result.robust, result.margin_lower_bound > 0.0);
    }

    #[test]
    fn aggregates_preserve_ensemble_output((ensemble, sample) in stump_instance(5, 8)) {
        let verifier = StumpVerifier::new(&ensemble);
        let direct = ensemble.evaluate(&sample.features).unwrap();
        prop_assert!((verifier.clean_score(&sample.features) - direct).abs() < 1e-9);
    }

    #[test]
    fn stump_models_round_trip((ensemble, _) in stump_instance(5, 8)) {
        let model = Model::Stumps(ensemble);
        let text = serialize_model(&model).unwrap();
        prop_assert_eq!(deserialize_model(&text).unwrap(), model);
    }

    #[test]
    fn reach_cost_no_larger_than_any_member_point(
        dims in prop::collection::vec((-2.0..2.0f64, 0.05..2.0f64, 0.0..1.0f64), 1..5),
        x_raw in prop::collection::vec(-3.0..3.0f64, 5),
        norm_index in 0..4usize,
    ) {
        let norm = [Norm::Zero, Norm::Finite(1.0), Norm::Finite(2.0), Norm::Infinity][norm_index];
        let lower: Vec<f64> = dims.iter().map(|&(lo, _, _)| lo).collect();
        let upper: Vec<f64> = dims.iter().map(|&(lo, width, _)| lo + width).collect();
        let member: Vec<f64> = dims
            .iter()
            .map(|&(lo, width, t)| (lo + width) - t * width)
            .collect();
        let bx = AxisBox::from_bounds(lower.clone(), upper.clone()).unwrap();
        let x = &x_raw[..dims.len()];
        let move_cost = x
            .iter()
            .zip(&member)
            .map(|(&a, &b)| norm.cost(a - b))
            .fold(0.0f64, |acc, c| match norm {
                Norm::Infinity => acc.max(c),
                _ => acc + c,
            });
        prop_assert!(bx.reach_cost(x, norm) <= move_cost + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tree_bounds_sound_for_any_grouping(seed in 0u64..1 << 40,
                                          trees in 1..4usize,
                                          clique in 1..5usize,
                                          levels in 1..3usize,
                                          norm_index in 0..4usize) {
        let mut rng = seeded_rng(seed);
        let dimension = 2 + (seed % 3) as usize;
        let ensemble = random_tree_ensemble(&mut rng, dimension, trees, 3);
        let sample = random_sample(&mut rng, dimension);
        let (norm, epsilon) = [
            (Norm::Finite(1.0), 0.4),
            (Norm::Finite(2.0), 0.3),
            (Norm::Infinity, 0.25),
            (Norm::Zero, 1.0),
        ][norm_index];
        let spec = PerturbationSpec::new(norm, epsilon).unwrap();
        let config = MultiLevelConfig { clique_size: clique, levels, max_pseudo_nodes: 1 << 20 };
        let got = TreeVerifier::new(&ensemble).verify_multilevel(&sample, spec, &config).unwrap();
        let exact = tree_margin_by_products(&ensemble, &sample, norm, epsilon);
        prop_assert!(got.margin_lower_bound <= exact + 1e-12);
        if got.complete {
            prop_assert!((got.margin_lower_bound - exact).abs() <= 1e-12);
        }
    }

    #[test]
    fn single_tree_agrees_with_singleton_ensemble(seed in 0u64..1 << 40,
                                                  norm_index in 0..3usize) {
        let mut rng = seeded_rng(seed);
        let dimension = 2;
        let tree = random_tree(&mut rng, dimension, 4);
        let sample = random_sample(&mut rng, dimension);
        let (norm, epsilon) =
            [(Norm::Finite(1.0), 0.4), (Norm::Finite(2.0), 0.3), (Norm::Infinity, 0.25)]
                [norm_index];
        let spec = PerturbationSpec::new(norm, epsilon).unwrap();
        let alone = verify_single_tree(&tree, &sample, spec).unwrap();
        let ensemble = certree::TreeEnsemble::new(dimension, vec![tree]).unwrap();
        let grouped = TreeVerifier::new(&ensemble)
            .verify_multilevel(&sample, spec, &MultiLevelConfig::new(2, 1).unwrap())
            .unwrap();
        prop_assert_eq!(alone.margin_lower_bound, grouped.margin_lower_bound);
        prop_assert!(alone.complete && grouped.complete);
    }

    #[test]
    fn tree_models_round_trip(seed in 0u64..1 << 40, trees in 1..4usize) {
        let mut rng = seeded_rng(seed);
        let ensemble = random_tree_ensemble(&mut rng, 3, trees, 3);
        let model = Model::Trees(ensemble);
        let text = serialize_model(&model).unwrap();
        prop_assert_eq!(deserialize_model(&text).unwrap(), model);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn training_loss_never_increases(seed in 0u64..1 << 40,
                                     count in 4..12usize,
                                     norm_index in 0..2usize,
                                     epsilon in 0.0..0.1f64) {
        let mut rng = seeded_rng(seed);
        let dataset = noisy_dataset(&mut rng, count, 2, 0.2);
        let norm = [Norm::Finite(1.0), Norm::Infinity][norm_index];
        let mut config = TrainConfig::new(norm, epsilon);
        config.rounds = 3;
        let (ensemble, stats) = train_stumps(&dataset, &config).unwrap();
        prop_assert_eq!(ensemble.len(), 3);
        prop_assert!(stats[0].loss <= dataset.len() as f64 * (1.0 + 1e-9));
        for window in stats.windows(2) {
            prop_assert!(window[1].loss <= window[0].loss * (1.0 + 1e-9) + 1e-9);
        }
    }
}
