//! Robustness verification for stump ensembles.
//!
//! Four entry points: exact zero-norm verification, exact infinity-norm
//! verification, a sound budget-grid dynamic program for finite p, and a
//! complete (exponential-time, capped) enumeration used as the exact
//! reference at desk scale. A generator for 0-1 knapsack instances encoded
//! as verification problems rounds out the module.

use crate::budget::{BudgetGrid, ReachSteps};
use crate::error::{Error, Result};
use crate::geometry::pow_p;
use crate::model::{aggregate_features, FeatureAggregate, Sample, Stump, StumpEnsemble};

/// Interval-choice count above which the complete enumeration refuses.
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// Outcome of one verification call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerificationResult {
    /// Sound lower bound on the worst-case label-signed prediction over the
    /// perturbation ball.
    pub margin_lower_bound: f64,
    /// Certified robust iff the bound is strictly positive.
    pub robust: bool,
    /// Whether the bound is the exact worst case.
    pub complete: bool,
}

impl VerificationResult {
    pub fn new(margin_lower_bound: f64, complete: bool) -> Self {
        Self { margin_lower_bound, robust: margin_lower_bound > 0.0, complete }
    }
}

/// Final column of the budget dynamic program, exposed for inspection.
///
/// `values[a]` is the bound granted `a + 1` grid cells; entries are
/// non-increasing since extra budget never hurts the adversary.
#[derive(Debug, Clone)]
pub struct DpTable {
    pub precision: f64,
    pub cells: usize,
    pub values: Vec<f64>,
}

/// Verifier for one ensemble; construction precomputes the per-feature
/// aggregate step functions shared by every method.
pub struct StumpVerifier<'a> {
    ensemble: &'a StumpEnsemble,
    aggregates: Vec<FeatureAggregate>,
}

impl<'a> StumpVerifier<'a> {
    pub fn new(ensemble: &'a StumpEnsemble) -> Self {
        let aggregates = aggregate_features(ensemble).into_values().collect();
        Self { ensemble, aggregates }
    }

    pub fn ensemble(&self) -> &StumpEnsemble {
        self.ensemble
    }

    /// Aggregates in ascending feature order; featureless dimensions absent.
    pub fn aggregates(&self) -> &[FeatureAggregate] {
        &self.aggregates
    }

    /// Unperturbed ensemble output, summed per feature in ascending order.
    pub fn clean_score(&self, x: &[f64]) -> f64 {
        self.aggregates.iter().map(|a| a.value_at(x[a.feature])).sum()
    }

    /// Label-signed unperturbed margin.
    pub fn clean_margin(&self, sample: &Sample) -> f64 {
        sample.label * self.clean_score(&sample.features)
    }

    fn check_sample(&self, sample: &Sample) -> Result<()> {
        if sample.features.len() != self.ensemble.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.ensemble.dimension(),
                got: sample.features.len(),
            });
        }
        Ok(())
    }

    /// Exact verification against changing at most `budget` coordinates.
    ///
    /// Each changed coordinate independently reaches its cheapest interval,
    /// so the adversary's optimum is the `budget` most damaging features.
    pub fn verify_l0(&self, sample: &Sample, budget: usize) -> Result<VerificationResult> {
        self.check_sample(sample)?;
        if budget > self.ensemble.dimension() {
            return Err(Error::invalid(format!(
                "coordinate budget {budget} exceeds dimension {}",
                self.ensemble.dimension()
            )));
        }
        let clean = self.clean_margin(sample);
        let y = sample.label;
        let mut drops: Vec<(f64, usize)> = self
            .aggregates
            .iter()
            .map(|agg| {
                let own = y * agg.value_at(sample.features[agg.feature]);
                let best = agg
                    .interval_values
                    .iter()
                    .map(|&v| y * v)
                    .fold(f64::INFINITY, f64::min);
                (best - own, agg.feature)
            })
            .collect();

        let take = budget.min(drops.len());
        if take == 0 {
            return Ok(VerificationResult::new(clean, true));
        }
        let by_drop = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if take < drops.len() {
            drops.select_nth_unstable_by(take - 1, by_drop);
            drops.truncate(take);
        }
        drops.sort_unstable_by_key(|&(_, feature)| feature);
        let margin = drops.iter().fold(clean, |acc, &(drop, _)| acc + drop);
        Ok(VerificationResult::new(margin, true))
    }

    /// Exact verification under a max-coordinate budget.
    ///
    /// Features decouple: each coordinate independently takes the worst
    /// reachable interval value within `epsilon`.
    pub fn verify_linf(&self, sample: &Sample, epsilon: f64) -> Result<VerificationResult> {
        self.check_sample(sample)?;
        check_radius(epsilon)?;
        if epsilon == 0.0 {
            return Ok(VerificationResult::new(self.clean_margin(sample), true));
        }
        let y = sample.label;
        let margin = self
            .aggregates
            .iter()
            .map(|agg| {
                let (lo, hi) = agg.reachable_range(sample.features[agg.feature], epsilon);
                agg.interval_values[lo..=hi]
                    .iter()
                    .map(|&v| y * v)
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        Ok(VerificationResult::new(margin, true))
    }

    /// Sound lower bound for a finite-p ball via the budget grid.
    ///
    /// The powered budget `epsilon^p` is split across features in cells of
    /// width `precision`; each feature gets one refunded cell, which absorbs
    /// the per-feature round-up and keeps the bound sound.
    pub fn verify_lp_dp(
        &self,
        sample: &Sample,
        p: f64,
        epsilon: f64,
        precision: f64,
    ) -> Result<VerificationResult> {
        self.check_sample(sample)?;
        check_exponent(p)?;
        check_radius(epsilon)?;
        if epsilon == 0.0 {
            return Ok(VerificationResult::new(self.clean_margin(sample), true));
        }
        let table = self.dp_final_column(sample, p, epsilon, precision)?;
        Ok(VerificationResult::new(table.values[table.cells - 1], false))
    }

    /// Raw final grid column; `verify_lp_dp` reads its last cell.
    pub fn lp_dp_table(
        &self,
        sample: &Sample,
        p: f64,
        epsilon: f64,
        precision: f64,
    ) -> Result<DpTable> {
        self.check_sample(sample)?;
        check_exponent(p)?;
        check_radius(epsilon)?;
        self.dp_final_column(sample, p, epsilon, precision)
    }

    fn dp_final_column(
        &self,
        sample: &Sample,
        p: f64,
        epsilon: f64,
        precision: f64,
    ) -> Result<DpTable> {
        let grid = BudgetGrid::new(precision, pow_p(epsilon, p))?;
        let mut column = vec![0.0; grid.cells];
        for aggregate in &self.aggregates {
            let steps =
                ReachSteps::build(aggregate, sample.features[aggregate.feature], sample.label, p);
            column = crate::budget::dp_column(&column, &steps.grid_steps(&grid), &grid);
        }
        Ok(DpTable { precision: grid.precision, cells: grid.cells, values: column })
    }

    /// Complete finite-p verification by enumerating one interval choice per
    /// feature. Exponential in the feature count; refuses above the default
    /// choice cap.
    pub fn verify_lp_exact(
        &self,
        sample: &Sample,
        p: f64,
        epsilon: f64,
    ) -> Result<VerificationResult> {
        self.verify_lp_exact_capped(sample, p, epsilon, DEFAULT_ENUMERATION_CAP)
    }

    pub fn verify_lp_exact_capped(
        &self,
        sample: &Sample,
        p: f64,
        epsilon: f64,
        cap: u128,
    ) -> Result<VerificationResult> {
        self.check_sample(sample)?;
        check_exponent(p)?;
        check_radius(epsilon)?;
        if epsilon == 0.0 {
            return Ok(VerificationResult::new(self.clean_margin(sample), true));
        }
        let mut choices: u128 = 1;
        for aggregate in &self.aggregates {
            choices = choices.saturating_mul(aggregate.interval_count() as u128);
            if choices > cap {
                return Err(Error::ResourceLimit(format!(
                    "exact enumeration needs more than {cap} interval choices"
                )));
            }
        }
        let steps: Vec<ReachSteps> = self
            .aggregates
            .iter()
            .map(|agg| ReachSteps::build(agg, sample.features[agg.feature], sample.label, p))
            .collect();
        let mut best = f64::INFINITY;
        enumerate_choices(&steps, 0, 0.0, 0.0, pow_p(epsilon, p), &mut best);
        Ok(VerificationResult::new(best, true))
    }
}

fn enumerate_choices(
    steps: &[ReachSteps],
    index: usize,
    spent: f64,
    partial: f64,
    budget: f64,
    best: &mut f64,
) {
    if index == steps.len() {
        if partial < *best {
            *best = partial;
        }
        return;
    }
    for step in steps[index].entries() {
        let spent = spent + step.cost;
        if spent > budget {
            break;
        }
        enumerate_choices(steps, index + 1, spent, partial + step.value, budget, best);
    }
}

fn check_radius(epsilon: f64) -> Result<()> {
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::invalid(format!(
            "perturbation radius must be finite and nonnegative, got {epsilon}"
        )));
    }
    Ok(())
}

fn check_exponent(p: f64) -> Result<()> {
    if !p.is_finite() || p <= 0.0 {
        return Err(Error::invalid(format!("norm exponent must be positive, got {p}")));
    }
    Ok(())
}

/// Encodes a 0-1 knapsack decision problem as a verification instance.
///
/// Item `i` becomes a stump on its own feature: taking the item means
/// pushing coordinate `i` from 0 up to `weight_i^(1/p)` (powered cost
/// exactly `weight_i`), which swaps the stump's output from `target/n` to
/// `target/n - value_i`. The radius grants powered budget `capacity`, so
/// the verified margin is `target - (best value packable into capacity)`:
/// the instance is non-robust (margin at most zero) iff some subset within
/// capacity reaches the target.
pub fn build_knapsack_instance(
    weights: &[f64],
    values: &[f64],
    capacity: f64,
    target: f64,
    p: f64,
) -> Result<(StumpEnsemble, Sample, f64)> {
    if weights.len() != values.len() {
        return Err(Error::invalid(format!(
            "got {} weights but {} values",
            weights.len(),
            values.len()
        )));
    }
    if weights.is_empty() {
        return Err(Error::invalid("knapsack instance needs at least one item"));
    }
    check_exponent(p)?;
    if weights.iter().chain(values).any(|&v| !v.is_finite() || v <= 0.0) {
        return Err(Error::invalid("weights and values must be positive and finite"));
    }
    if !capacity.is_finite() || capacity < 0.0 || !target.is_finite() {
        return Err(Error::invalid("capacity must be nonnegative and target finite"));
    }
    let count = weights.len();
    let share = target / count as f64;
    let stumps = weights
        .iter()
        .zip(values)
        .enumerate()
        .map(|(i, (&w, &v))| Stump::new(i, crate::geometry::root_p(w, p), share, share - v))
        .collect::<Result<Vec<_>>>()?;
    let ensemble = StumpEnsemble::new(count, stumps)?;
    let sample = Sample::new(vec![0.0; count], 1.0)?;
    Ok((ensemble, sample, crate::geometry::root_p(capacity, p)))
}
