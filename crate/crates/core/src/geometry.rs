//! Axis-aligned box arithmetic and point-to-box distances under
//! zero / finite-p / infinity norms.
//!
//! Boxes use half-open `(lo, hi]` intervals per dimension with explicit
//! infinite sentinels. All distances are taken on the box closure, which
//! over-approximates what an adversary can reach and therefore keeps every
//! "robust" verdict sound.

use crate::error::{Error, Result};

/// Norm under which perturbations are measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Norm {
    /// Counts changed coordinates; the budget is an integer count.
    Zero,
    /// Finite p-norm with p > 0 (p in (0, 1) is a quasi-norm but works the same here).
    Finite(f64),
    /// Max-coordinate norm.
    Infinity,
}

impl Norm {
    pub fn is_finite_p(self) -> bool {
        matches!(self, Norm::Finite(_))
    }

    /// |v|^p for the finite norm, |v| otherwise.
    pub fn cost(self, deviation: f64) -> f64 {
        match self {
            Norm::Zero => {
                if deviation == 0.0 {
                    0.0
                } else {
                    1.0
                }
            }
            Norm::Finite(p) => pow_p(deviation.abs(), p),
            Norm::Infinity => deviation.abs(),
        }
    }

    /// Budget in the same units as accumulated `cost` values: epsilon^p for
    /// the finite norm, epsilon itself otherwise. Comparing accumulated
    /// costs against this avoids taking p-th roots.
    pub fn budget(self, epsilon: f64) -> f64 {
        match self {
            Norm::Finite(p) => pow_p(epsilon, p),
            _ => epsilon,
        }
    }
}

/// Perturbation model: a norm plus a radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSpec {
    pub norm: Norm,
    pub epsilon: f64,
}

impl PerturbationSpec {
    pub fn new(norm: Norm, epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::invalid(format!(
                "perturbation radius must be finite and nonnegative, got {epsilon}"
            )));
        }
        if let Norm::Finite(p) = norm {
            if !p.is_finite() || p <= 0.0 {
                return Err(Error::invalid(format!("norm exponent must be positive, got {p}")));
            }
        }
        if matches!(norm, Norm::Zero) && epsilon.fract() != 0.0 {
            return Err(Error::invalid(format!(
                "coordinate-count radius must be an integer, got {epsilon}"
            )));
        }
        Ok(Self { norm, epsilon })
    }
}

/// |v|^p, avoiding `powf` for the common exact cases p = 1 and p = 2.
pub fn pow_p(v: f64, p: f64) -> f64 {
    let v = v.abs();
    if p == 1.0 {
        v
    } else if p == 2.0 {
        v * v
    } else if v == 0.0 {
        0.0
    } else {
        v.powf(p)
    }
}

/// v^(1/p), the inverse of [`pow_p`] on nonnegative values.
pub fn root_p(v: f64, p: f64) -> f64 {
    if p == 1.0 {
        v
    } else if p == 2.0 {
        v.sqrt()
    } else if v == 0.0 {
        0.0
    } else {
        v.powf(1.0 / p)
    }
}

/// Nonempty axis-aligned box with half-open `(lo, hi]` sides.
///
/// Empty intersections are represented as `None` at the call sites, so a
/// constructed box always satisfies `lo < hi` in every dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl AxisBox {
    /// The whole space in `dimension` dimensions.
    pub fn full(dimension: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; dimension],
            upper: vec![f64::INFINITY; dimension],
        }
    }

    pub fn from_bounds(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (lo, hi) in lower.iter().zip(&upper) {
            // NaN bounds fail this comparison too
            if !matches!(lo.partial_cmp(hi), Some(std::cmp::Ordering::Less)) {
                return Err(Error::invalid(format!("degenerate interval ({lo}, {hi}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self, dim: usize) -> f64 {
        self.lower[dim]
    }

    pub fn upper(&self, dim: usize) -> f64 {
        self.upper[dim]
    }

    /// Tightens the upper bound of one dimension. `None` if the side empties.
    pub fn restrict_upper(&self, dim: usize, bound: f64) -> Option<Self> {
        let hi = self.upper[dim].min(bound);
        if self.lower[dim] >= hi {
            return None;
        }
        let mut out = self.clone();
        out.upper[dim] = hi;
        Some(out)
    }

    /// Tightens the lower bound of one dimension. `None` if the side empties.
    pub fn restrict_lower(&self, dim: usize, bound: f64) -> Option<Self> {
        let lo = self.lower[dim].max(bound);
        if lo >= self.upper[dim] {
            return None;
        }
        let mut out = self.clone();
        out.lower[dim] = lo;
        Some(out)
    }

    /// Membership under the half-open convention.
    pub fn contains(&self, x: &[f64]) -> bool {
        debug_assert_eq!(x.len(), self.dimension());
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&v, (&lo, &hi))| v > lo && v <= hi)
    }

    /// Per-dimension `(max lo, min hi]`; `None` when the result is empty.
    pub fn intersect(&self, other: &Self) -> Option<Self> {
        debug_assert_eq!(self.dimension(), other.dimension());
        let mut lower = Vec::with_capacity(self.dimension());
        let mut upper = Vec::with_capacity(self.dimension());
        for dim in 0..self.dimension() {
            let lo = self.lower[dim].max(other.lower[dim]);
            let hi = self.upper[dim].min(other.upper[dim]);
            if lo >= hi {
                return None;
            }
            lower.push(lo);
            upper.push(hi);
        }
        Some(Self { lower, upper })
    }

    /// Distance from `x` to the closure of the box.
    ///
    /// For the zero norm this is the count of coordinates outside
    /// `[lo, hi]`; for finite p it is the true p-norm of the clamp residual.
    pub fn distance(&self, x: &[f64], norm: Norm) -> f64 {
        let cost = self.reach_cost(x, norm);
        match norm {
            Norm::Finite(p) => root_p(cost, p),
            _ => cost,
        }
    }

    /// Distance in budget units: sum of |residual|^p for finite p, count for
    /// the zero norm, max residual for infinity. Compare against
    /// [`Norm::budget`] to decide reachability without roots.
    pub fn reach_cost(&self, x: &[f64], norm: Norm) -> f64 {
        debug_assert_eq!(x.len(), self.dimension());
        let deviations = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&lo, &hi))| {
                if v < lo {
                    lo - v
                } else if v > hi {
                    v - hi
                } else {
                    0.0
                }
            });
        match norm {
            Norm::Zero => deviations.filter(|&d| d > 0.0).count() as f64,
            Norm::Finite(p) => deviations.map(|d| pow_p(d, p)).sum(),
            Norm::Infinity => deviations.fold(0.0, f64::max),
        }
    }

    /// True iff the closed perturbation ball around `x` meets the box closure.
    pub fn reachable(&self, x: &[f64], spec: PerturbationSpec) -> bool {
        self.reach_cost(x, spec.norm) <= spec.norm.budget(spec.epsilon)
    }
}
