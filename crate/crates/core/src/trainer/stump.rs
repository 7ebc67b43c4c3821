//! Robust stump boosting rounds.
//!
//! A round scores every candidate split by the certified loss bound it can
//! reach. For finite-p norms the prior ensemble's worst reachable score is
//! tabulated per sample on a shared budget grid; a candidate split on
//! feature `j` then combines the split-side restriction of feature `j`'s
//! staircase with the grid table of the remaining features, so each branch
//! bound already accounts for the adversary splitting its budget across
//! features. Under the max norm features decouple and the combination is
//! exact; at radius zero the bound degenerates to the clean margin.

use rayon::prelude::*;

use crate::budget::{dp_column, BudgetGrid, ReachSteps};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::geometry::{pow_p, Norm};
use crate::model::{aggregate_features, FeatureAggregate, Sample, Stump, StumpEnsemble};
use crate::trainer::weights::{solve_leaf_weights, BranchBounds};
use crate::trainer::{candidate_splits, epsilon_schedule, RoundStats, TrainConfig};

/// Candidate split with unshrunk leaf parameters: the left leaf predicts
/// `left_weight`, the right leaf `left_weight + right_delta`.
#[derive(Debug, Clone, Copy)]
pub struct SplitWeights {
    pub feature: usize,
    pub threshold: f64,
    pub left_weight: f64,
    pub right_delta: f64,
}

enum RoundModel {
    Clean,
    Finite { p: f64, grid: BudgetGrid },
    MaxNorm { radius: f64 },
}

impl RoundModel {
    fn build(norm: Norm, epsilon: f64, precision: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::invalid("perturbation radius must be finite and nonnegative"));
        }
        if epsilon == 0.0 {
            return Ok(RoundModel::Clean);
        }
        match norm {
            Norm::Finite(p) => {
                if !p.is_finite() || p <= 0.0 {
                    return Err(Error::invalid(format!(
                        "norm exponent must be positive, got {p}"
                    )));
                }
                let grid = BudgetGrid::new(precision, pow_p(epsilon, p))?;
                Ok(RoundModel::Finite { p, grid })
            }
            Norm::Infinity => Ok(RoundModel::MaxNorm { radius: epsilon }),
            Norm::Zero => Err(Error::invalid(
                "training against coordinate-count perturbations is not supported",
            )),
        }
    }
}

enum SampleState {
    Clean {
        margin: f64,
    },
    Finite {
        /// Grid staircase per aggregate, aligned with the aggregate list.
        steps: Vec<Vec<(usize, f64)>>,
        /// Worst reachable score over all features, by budget cell.
        column: Vec<f64>,
    },
    MaxNorm {
        /// Worst reachable per-feature score within the radius.
        minima: Vec<f64>,
        total: f64,
    },
}

fn sample_state(model: &RoundModel, aggregates: &[FeatureAggregate], sample: &Sample) -> SampleState {
    let x = &sample.features;
    let y = sample.label;
    match model {
        RoundModel::Clean => {
            let score: f64 = aggregates.iter().map(|a| a.value_at(x[a.feature])).sum();
            SampleState::Clean { margin: y * score }
        }
        RoundModel::Finite { p, grid } => {
            let steps: Vec<Vec<(usize, f64)>> = aggregates
                .iter()
                .map(|a| ReachSteps::build(a, x[a.feature], y, *p).grid_steps(grid))
                .collect();
            let mut column = vec![0.0; grid.cells];
            for feature_steps in &steps {
                column = dp_column(&column, feature_steps, grid);
            }
            SampleState::Finite { steps, column }
        }
        RoundModel::MaxNorm { radius } => {
            let minima: Vec<f64> = aggregates
                .iter()
                .map(|a| ReachSteps::build(a, x[a.feature], y, 1.0).min_within(*radius))
                .collect();
            let total = minima.iter().sum();
            SampleState::MaxNorm { minima, total }
        }
    }
}

/// Distance from `x` to the closed half-line on one side of a threshold.
fn side_cost(x: f64, threshold: f64, left_side: bool) -> f64 {
    if left_side {
        (x - threshold).max(0.0)
    } else {
        (threshold - x).max(0.0)
    }
}

/// Interval closure bounds of an aggregate, with infinite sentinels.
fn interval_closure(aggregate: &FeatureAggregate, t: usize) -> (f64, f64) {
    let lo = if t == 0 { f64::NEG_INFINITY } else { aggregate.thresholds[t - 1] };
    let hi = if t + 1 == aggregate.interval_count() {
        f64::INFINITY
    } else {
        aggregate.thresholds[t]
    };
    (lo, hi)
}

/// Piece of interval `t` lying on one side of a candidate threshold, or
/// `None` when the side misses the interval.
fn side_piece(
    aggregate: &FeatureAggregate,
    t: usize,
    threshold: f64,
    left_side: bool,
) -> Option<(f64, f64)> {
    let (lo, hi) = interval_closure(aggregate, t);
    if left_side {
        (lo < threshold).then(|| (lo, hi.min(threshold)))
    } else {
        (hi > threshold).then(|| (lo.max(threshold), hi))
    }
}

fn piece_distance(x: f64, lo: f64, hi: f64) -> f64 {
    if x < lo {
        lo - x
    } else if x > hi {
        x - hi
    } else {
        0.0
    }
}

/// Branch bound on one side of a split on an aggregated feature: the split
/// side restricts the feature's own staircase while the grid column covers
/// every other feature with the leftover budget.
#[allow(clippy::too_many_arguments)]
fn finite_side_bound(
    aggregate: &FeatureAggregate,
    x: f64,
    label: f64,
    p: f64,
    threshold: f64,
    left_side: bool,
    grid: &BudgetGrid,
    column: &[f64],
) -> f64 {
    let mut best = f64::INFINITY;
    for t in 0..aggregate.interval_count() {
        let Some((lo, hi)) = side_piece(aggregate, t, threshold, left_side) else {
            continue;
        };
        let cell = grid.cell_for_cost(pow_p(piece_distance(x, lo, hi), p));
        if cell > grid.cells {
            continue;
        }
        let value = label * aggregate.interval_values[t];
        best = best.min(value + column[grid.cells - cell]);
    }
    best
}

/// Worst reachable split-side value of one feature under the max norm.
fn maxnorm_side_min(
    aggregate: &FeatureAggregate,
    x: f64,
    label: f64,
    radius: f64,
    threshold: f64,
    left_side: bool,
) -> f64 {
    let mut best = f64::INFINITY;
    for t in 0..aggregate.interval_count() {
        let Some((lo, hi)) = side_piece(aggregate, t, threshold, left_side) else {
            continue;
        };
        if piece_distance(x, lo, hi) <= radius {
            best = best.min(label * aggregate.interval_values[t]);
        }
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn branch_bound(
    model: &RoundModel,
    aggregates: &[FeatureAggregate],
    active: Option<usize>,
    state: &SampleState,
    excl_column: Option<&[f64]>,
    x: f64,
    label: f64,
    threshold: f64,
    left_side: bool,
) -> f64 {
    match (model, state) {
        (RoundModel::Clean, SampleState::Clean { margin }) => {
            let on_side = if left_side { x < threshold } else { x >= threshold };
            if on_side {
                *margin
            } else {
                f64::INFINITY
            }
        }
        (RoundModel::Finite { p, grid }, SampleState::Finite { column, .. }) => match active {
            Some(k) => finite_side_bound(
                &aggregates[k],
                x,
                label,
                *p,
                threshold,
                left_side,
                grid,
                excl_column.expect("column excluding the split feature"),
            ),
            None => {
                let cell = grid.cell_for_cost(pow_p(side_cost(x, threshold, left_side), *p));
                if cell > grid.cells {
                    f64::INFINITY
                } else {
                    column[grid.cells - cell]
                }
            }
        },
        (RoundModel::MaxNorm { radius }, SampleState::MaxNorm { minima, total }) => match active {
            Some(k) => {
                let side = maxnorm_side_min(&aggregates[k], x, label, *radius, threshold, left_side);
                total - minima[k] + side
            }
            None => {
                if side_cost(x, threshold, left_side) <= *radius {
                    *total
                } else {
                    f64::INFINITY
                }
            }
        },
        _ => unreachable!("state built from the same model"),
    }
}

fn column_excluding(
    steps: &[Vec<(usize, f64)>],
    skip: usize,
    grid: &BudgetGrid,
) -> Vec<f64> {
    let mut column = vec![0.0; grid.cells];
    for (idx, feature_steps) in steps.iter().enumerate() {
        if idx != skip {
            column = dp_column(&column, feature_steps, grid);
        }
    }
    column
}

/// Certified lower bound on the robust margin of one sample after adding
/// the candidate split to the ensemble, evaluated without materializing
/// the grown ensemble.
pub fn robust_margin_lower_bound(
    ensemble: &StumpEnsemble,
    sample: &Sample,
    split: SplitWeights,
    norm: Norm,
    epsilon: f64,
    precision: f64,
) -> Result<f64> {
    if sample.features.len() != ensemble.dimension() {
        return Err(Error::DimensionMismatch {
            expected: ensemble.dimension(),
            got: sample.features.len(),
        });
    }
    if split.feature >= ensemble.dimension() {
        return Err(Error::invalid(format!(
            "split feature {} outside dimension {}",
            split.feature,
            ensemble.dimension()
        )));
    }
    if !(split.threshold.is_finite() && split.left_weight.is_finite() && split.right_delta.is_finite())
    {
        return Err(Error::invalid("split parameters must be finite"));
    }
    let model = RoundModel::build(norm, epsilon, precision)?;
    let aggregates: Vec<FeatureAggregate> =
        aggregate_features(ensemble).into_values().collect();
    let state = sample_state(&model, &aggregates, sample);
    let active = aggregates.iter().position(|a| a.feature == split.feature);
    let excl = match (&model, &state, active) {
        (RoundModel::Finite { grid, .. }, SampleState::Finite { steps, .. }, Some(k)) => {
            Some(column_excluding(steps, k, grid))
        }
        _ => None,
    };
    let x = sample.features[split.feature];
    let bounds = BranchBounds {
        left: branch_bound(
            &model,
            &aggregates,
            active,
            &state,
            excl.as_deref(),
            x,
            sample.label,
            split.threshold,
            true,
        ),
        right: branch_bound(
            &model,
            &aggregates,
            active,
            &state,
            excl.as_deref(),
            x,
            sample.label,
            split.threshold,
            false,
        ),
        label: sample.label,
    };
    Ok(bounds.margin(split.left_weight, split.right_delta))
}

/// Fits one boosting round: picks the split and leaf weights minimizing the
/// certified loss bound at the round's scheduled radius. Returns the
/// shrinkage-scaled stump and the bound it achieves. `round` counts from 1.
pub fn fit_stump_round(
    dataset: &Dataset,
    ensemble: &StumpEnsemble,
    config: &TrainConfig,
    round: usize,
) -> Result<(Stump, f64)> {
    config.validate()?;
    if round == 0 {
        return Err(Error::invalid("round index starts at 1"));
    }
    if dataset.is_empty() {
        return Err(Error::Training("cannot fit a round on an empty dataset".into()));
    }
    if dataset.dimension != ensemble.dimension() {
        return Err(Error::DimensionMismatch {
            expected: ensemble.dimension(),
            got: dataset.dimension,
        });
    }

    let epsilon = epsilon_schedule(config.epsilon, round, config.schedule_length);
    let model = RoundModel::build(config.norm, epsilon, config.precision)?;
    let aggregates: Vec<FeatureAggregate> =
        aggregate_features(ensemble).into_values().collect();
    let states: Vec<SampleState> = dataset
        .samples
        .par_iter()
        .map(|sample| sample_state(&model, &aggregates, sample))
        .collect();
    let candidates: Vec<Vec<f64>> = (0..dataset.dimension)
        .map(|feature| candidate_splits(dataset, feature, config.candidate_cap))
        .collect();

    // (loss, threshold, left weight, right delta) per feature
    let per_feature: Vec<Option<(f64, f64, f64, f64)>> = (0..dataset.dimension)
        .into_par_iter()
        .map(|feature| {
            let thresholds = &candidates[feature];
            if thresholds.is_empty() {
                return None;
            }
            let active = aggregates.iter().position(|a| a.feature == feature);
            let excl_columns: Option<Vec<Vec<f64>>> = match (&model, active) {
                (RoundModel::Finite { grid, .. }, Some(k)) => Some(
                    states
                        .iter()
                        .map(|state| match state {
                            SampleState::Finite { steps, .. } => column_excluding(steps, k, grid),
                            _ => unreachable!("state built from the same model"),
                        })
                        .collect(),
                ),
                _ => None,
            };

            let mut best: Option<(f64, f64, f64, f64)> = None;
            for &threshold in thresholds {
                let bounds: Vec<BranchBounds> = dataset
                    .samples
                    .iter()
                    .enumerate()
                    .map(|(i, sample)| {
                        let excl = excl_columns.as_ref().map(|cols| cols[i].as_slice());
                        let x = sample.features[feature];
                        BranchBounds {
                            left: branch_bound(
                                &model,
                                &aggregates,
                                active,
                                &states[i],
                                excl,
                                x,
                                sample.label,
                                threshold,
                                true,
                            ),
                            right: branch_bound(
                                &model,
                                &aggregates,
                                active,
                                &states[i],
                                excl,
                                x,
                                sample.label,
                                threshold,
                                false,
                            ),
                            label: sample.label,
                        }
                    })
                    .collect();
                let fit = solve_leaf_weights(
                    &bounds,
                    config.coord_descent_iters,
                    config.bisection_tolerance,
                    config.weight_bound,
                );
                if best.is_none_or(|(loss, ..)| fit.loss < loss) {
                    best = Some((fit.loss, threshold, fit.left_weight, fit.right_delta));
                }
            }
            best
        })
        .collect();

    let mut chosen: Option<(f64, usize, f64, f64, f64)> = None;
    for (feature, entry) in per_feature.into_iter().enumerate() {
        let Some((loss, threshold, left_weight, right_delta)) = entry else {
            continue;
        };
        if chosen.is_none_or(|(best_loss, ..)| loss < best_loss) {
            chosen = Some((loss, feature, threshold, left_weight, right_delta));
        }
    }
    let (loss, feature, threshold, left_weight, right_delta) = chosen
        .ok_or_else(|| Error::Training("every feature is constant; nothing to split".into()))?;

    let stump = Stump::new(
        feature,
        threshold,
        config.shrinkage * left_weight,
        config.shrinkage * (left_weight + right_delta),
    )?;
    Ok((stump, loss))
}

/// Boosts `config.rounds` stumps, ramping the radius over the schedule.
pub fn train_stumps(
    dataset: &Dataset,
    config: &TrainConfig,
) -> Result<(StumpEnsemble, Vec<RoundStats>)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Training("cannot train on an empty dataset".into()));
    }
    let mut ensemble = StumpEnsemble::empty(dataset.dimension);
    let mut log = Vec::with_capacity(config.rounds);
    for round in 1..=config.rounds {
        let start = std::time::Instant::now();
        let (stump, loss) = fit_stump_round(dataset, &ensemble, config, round)?;
        ensemble.push(stump)?;
        log.push(RoundStats {
            round,
            epsilon: epsilon_schedule(config.epsilon, round, config.schedule_length),
            loss,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok((ensemble, log))
}
