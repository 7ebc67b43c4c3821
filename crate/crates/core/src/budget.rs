//! Shared budget-discretization machinery for the sound finite-p verifier
//! and the certified trainer.
//!
//! All costs live in powered units: reaching an interval at distance `t`
//! costs `t^p`, and a radius-epsilon ball grants `epsilon^p` total. Working
//! in powered units is what makes per-feature costs additive, and therefore
//! what makes the grid sound for every p, not just p = 1.

use crate::error::{Error, Result};
use crate::geometry::pow_p;
use crate::model::FeatureAggregate;

/// Hard cap on grid cells; one column is eight bytes per cell.
const MAX_GRID_CELLS: usize = 20_000_000;

/// Uniform discretization of the powered budget `[0, capacity]` into `cells`
/// cells of width `precision`, where `cells` is the smallest count whose
/// total strictly exceeds the capacity.
///
/// Shifting each feature's spend down by one cell (the recursion's `+ 1`
/// index refund) absorbs the per-feature round-up, so any true adversarial
/// spend fits the grid and the table value stays a sound lower bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct BudgetGrid {
    pub precision: f64,
    pub cells: usize,
}

impl BudgetGrid {
    pub fn new(precision: f64, capacity: f64) -> Result<Self> {
        if !precision.is_finite() || precision <= 0.0 {
            return Err(Error::invalid(format!(
                "grid precision must be positive, got {precision}"
            )));
        }
        if !capacity.is_finite() || capacity < 0.0 {
            return Err(Error::invalid(format!(
                "budget capacity must be finite and nonnegative, got {capacity}"
            )));
        }
        if capacity / precision >= MAX_GRID_CELLS as f64 {
            return Err(Error::ResourceLimit(format!(
                "budget grid needs more than {MAX_GRID_CELLS} cells; raise the precision"
            )));
        }
        let mut cells = (capacity / precision).floor() as usize + 1;
        while cells as f64 * precision <= capacity {
            cells += 1;
        }
        while cells > 1 && (cells - 1) as f64 * precision > capacity {
            cells -= 1;
        }
        Ok(Self { precision, cells })
    }

    /// Smallest 1-based cell whose budget `cell * precision` covers `cost`.
    /// Costs beyond the last cell return `cells + 1`, a sentinel no
    /// allocation can afford.
    pub fn cell_for_cost(&self, cost: f64) -> usize {
        debug_assert!(cost >= 0.0);
        let mut cell = ((cost / self.precision).ceil() as usize).max(1);
        while (cell as f64) * self.precision < cost {
            cell += 1;
        }
        while cell > 1 && ((cell - 1) as f64) * self.precision >= cost {
            cell -= 1;
        }
        cell.min(self.cells + 1)
    }
}

/// Pareto staircase of one feature's reachable interval values for one
/// sample: entries sorted by powered cost, values strictly decreasing.
///
/// The first entry always has cost zero (the sample's own interval), so the
/// staircase is never empty and a zero budget reproduces the clean value.
#[derive(Debug, Clone)]
pub(crate) struct ReachSteps {
    entries: Vec<ReachStep>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ReachStep {
    /// Distance to the interval closure, raised to the p-th power.
    pub cost: f64,
    /// Label-signed aggregate value on the interval.
    pub value: f64,
}

impl ReachSteps {
    pub fn build(aggregate: &FeatureAggregate, x: f64, label: f64, p: f64) -> Self {
        let mut scored: Vec<ReachStep> = (0..aggregate.interval_count())
            .map(|t| ReachStep {
                cost: pow_p(aggregate.interval_distance(x, t), p),
                value: label * aggregate.interval_values[t],
            })
            .collect();
        scored.sort_by(|a, b| a.cost.total_cmp(&b.cost));
        let mut entries: Vec<ReachStep> = Vec::with_capacity(scored.len());
        for step in scored {
            match entries.last_mut() {
                Some(last) if step.value >= last.value => {}
                Some(last) if step.cost == last.cost => last.value = step.value,
                _ => entries.push(step),
            }
        }
        Self { entries }
    }

    pub fn entries(&self) -> &[ReachStep] {
        &self.entries
    }

    /// Cheapest achievable value with powered budget at most `budget`.
    pub fn min_within(&self, budget: f64) -> f64 {
        let idx = self.entries.partition_point(|s| s.cost <= budget);
        self.entries[idx - 1].value
    }

    /// Staircase in grid coordinates: (first affording cell, value), cell
    /// strictly increasing, value strictly decreasing, entries past the grid
    /// dropped.
    pub fn grid_steps(&self, grid: &BudgetGrid) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.entries.len());
        for step in &self.entries {
            let cell = grid.cell_for_cost(step.cost);
            if cell > grid.cells {
                break;
            }
            match out.last_mut() {
                Some(last) if last.0 == cell => last.1 = step.value,
                _ => out.push((cell, step.value)),
            }
        }
        out
    }
}

/// One feature step of the budget recursion.
///
/// `previous[a]` is the best value over already-processed features with
/// `a + 1` grid cells; the result folds in one more feature, where spending
/// `b` cells on it buys every staircase entry whose covering cell is at most
/// `b`. The `+ 1` cell refund per feature keeps the bound sound under
/// round-up.
pub(crate) fn dp_column(previous: &[f64], steps: &[(usize, f64)], grid: &BudgetGrid) -> Vec<f64> {
    debug_assert_eq!(previous.len(), grid.cells);
    let mut next = vec![f64::INFINITY; grid.cells];
    for (a_idx, slot) in next.iter_mut().enumerate() {
        let budget_cells = a_idx + 1;
        let mut best = f64::INFINITY;
        for &(cell, value) in steps {
            if cell > budget_cells {
                break;
            }
            let candidate = value + previous[budget_cells - cell];
            if candidate < best {
                best = candidate;
            }
        }
        *slot = best;
    }
    next
}
