//! Monte Carlo checks of two-level concentration for product measures.

mod sets;
pub mod stats;

pub use sets::{cost_ball_support, dist_to_l1_ball, enlargement_member, ConvexSet};

use serde::{Deserialize, Serialize};

use crate::convexfn::PLConvex;
use crate::error::{Error, Result};
use crate::measure::Measure1D;
use crate::par::{self, Execution};
use crate::poincare::trial_rng;
use crate::tau::tau_constant;
use sets::{dot, norm2, norm_inf};
use stats::{bonferroni_z, wilson, CONFIDENCE};

/// Independent coordinates with symmetric one-dimensional laws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductMeasure {
    factors: Vec<Measure1D>,
}

impl ProductMeasure {
    pub fn new(factors: Vec<Measure1D>) -> Result<Self> {
        if factors.iter().any(|m| !m.is_symmetric()) {
            return Err(Error::NotSymmetric);
        }
        Ok(ProductMeasure { factors })
    }

    pub fn iid(mu: Measure1D, n: usize) -> Result<Self> {
        Self::new(vec![mu; n])
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Measure1D] {
        &self.factors
    }

    /// Row `i` of the sample for `seed`; rows are independent streams so any
    /// subset can be regenerated in any order.
    pub fn sample_row(&self, seed: u64, i: usize, out: &mut [f64]) {
        let mut rng = trial_rng(seed, i as u64);
        for (x, m) in out.iter_mut().zip(&self.factors) {
            *x = m.sample(&mut rng);
        }
    }

    /// `count` draws, row-major.
    pub fn sample(&self, count: usize, seed: u64, exec: Execution) -> Vec<Vec<f64>> {
        par::map_indexed(exec, count, |i| {
            let mut row = vec![0.0; self.dim()];
            self.sample_row(seed, i, &mut row);
            row
        })
    }

    /// Largest `lambda*(h)` over the factors.
    pub fn lambda_star(&self, h: f64) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for m in &self.factors {
            worst = worst.max(m.lambda_star(h)?.lambda_star);
        }
        Ok(worst)
    }
}

/// Sampling and confidence settings shared by all experiments.
#[derive(Debug, Clone, Copy)]
pub struct MonteCarlo {
    pub samples: usize,
    pub seed: u64,
    pub exec: Execution,
}

const CHUNK: usize = 4096;

/// Counts, over the shared sample, how often `x` is in the base set and in
/// each enlargement.
fn count_hits<B, E>(pm: &ProductMeasure, mc: &MonteCarlo, levels: usize, base: B, enlarged: E) -> (usize, Vec<usize>)
where
    B: Fn(&[f64]) -> bool + Sync,
    E: Fn(&[f64], usize) -> bool + Sync,
{
    let partial = par::map_chunks(mc.exec, mc.samples, CHUNK, |range| {
        let mut row = vec![0.0; pm.dim()];
        let mut b = 0;
        let mut hits = vec![0usize; levels];
        for i in range {
            pm.sample_row(mc.seed, i, &mut row);
            if base(&row) {
                b += 1;
            }
            for (k, h) in hits.iter_mut().enumerate() {
                if enlarged(&row, k) {
                    *h += 1;
                }
            }
        }
        (b, hits)
    });
    partial.into_iter().fold((0, vec![0; levels]), |(b, mut acc), (pb, ph)| {
        acc.iter_mut().zip(ph).for_each(|(a, p)| *a += p);
        (b + pb, acc)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationRow {
    pub t: f64,
    pub empirical: f64,
    pub bound: f64,
    pub radius: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub experiment: String,
    pub set_family: String,
    /// False when membership uses a superset of the true enlargement.
    pub exact_membership: bool,
    pub dim: usize,
    pub samples: usize,
    pub seed: u64,
    pub c_tau: f64,
    pub base_probability: f64,
    pub base_interval: (f64, f64),
    pub z: f64,
    pub rows: Vec<ConcentrationRow>,
}

impl ConcentrationReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

fn enlargement_report(
    experiment: &str,
    pm: &ProductMeasure,
    set: &ConvexSet,
    c_tau: f64,
    t_grid: &[f64],
    mc: &MonteCarlo,
    exact: bool,
    enlarged: impl Fn(&[f64], f64) -> bool + Sync,
) -> Result<ConcentrationReport> {
    set.validate()?;
    if set.dim() != pm.dim() {
        return Err(Error::InvalidArgument(format!("set dimension {} but measure dimension {}", set.dim(), pm.dim())));
    }
    if t_grid.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::InvalidArgument("t values must be finite and nonnegative".into()));
    }
    let (base, hits) = count_hits(pm, mc, t_grid.len(), |x| set.contains(x), |x, k| enlarged(x, t_grid[k]));
    if base == 0 {
        return Err(Error::EmptyBase);
    }
    let n = mc.samples;
    let z = bonferroni_z(CONFIDENCE, t_grid.len() + 1);
    let p_hat = base as f64 / n as f64;
    let (p_lo, p_hi) = wilson(base, n, z);
    let bound_at = |p: f64, t: f64| 1.0 - (-t).exp() / p;
    let rows = t_grid
        .iter()
        .zip(hits)
        .map(|(&t, h)| {
            let q = h as f64 / n as f64;
            let (q_lo, _) = wilson(h, n, z);
            let bound = bound_at(p_hat, t);
            // Uncertainty in mu(A) moves the bound; uncertainty in the
            // enlargement probability moves the estimate.
            let radius = (bound_at(p_hi, t) - bound).max(0.0) + (q - q_lo);
            ConcentrationRow { t, empirical: q, bound, radius, pass: q >= bound - radius }
        })
        .collect();
    Ok(ConcentrationReport {
        experiment: experiment.into(),
        set_family: set.family().into(),
        exact_membership: exact,
        dim: pm.dim(),
        samples: n,
        seed: mc.seed,
        c_tau,
        base_probability: p_hat,
        base_interval: (p_lo, p_hi),
        z,
        rows,
    })
}

fn require_class(pm: &ProductMeasure, h: f64, lambda: f64) -> Result<()> {
    for m in pm.factors() {
        let c = m.lambda_star(h)?;
        if c.lambda_star > lambda + 1e-12 {
            return Err(Error::NotInClass { ratio: c.lambda_star, lambda, witness: c.witness });
        }
    }
    Ok(())
}

/// `mu(A + sqrt(2t) C B_2 + 2t C B_1) >= 1 - e^{-t} / mu(A)` with
/// `C = 17 h / (1 - lambda)^2`.
pub fn verify_corr1(pm: &ProductMeasure, set: &ConvexSet, h: f64, lambda: f64, t_grid: &[f64], mc: &MonteCarlo) -> Result<ConcentrationReport> {
    require_class(pm, h, lambda)?;
    let c = tau_constant(h, lambda);
    enlargement_report("two_level", pm, set, c, t_grid, mc, true, |x, t| {
        set.enlarged_contains(x, (2.0 * t).sqrt() * c, 2.0 * t * c)
    })
}

/// `mu(A + {sum φ₀(y_i/C) <= t}) >= 1 - e^{-t} / mu(A)`. Exact for
/// half-spaces and slabs; balls use the two-level superset.
pub fn verify_gencon(pm: &ProductMeasure, set: &ConvexSet, c_tau: f64, t_grid: &[f64], mc: &MonteCarlo) -> Result<ConcentrationReport> {
    if !(c_tau > 0.0 && c_tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("cost scale must be positive, got {c_tau}")));
    }
    match set {
        ConvexSet::HalfSpace { a, c } => enlargement_report("cost_ball", pm, set, c_tau, t_grid, mc, true, |x, t| {
            dot(a, x) <= c + cost_ball_support(a, c_tau, t)
        }),
        ConvexSet::Slab { a, c } => enlargement_report("cost_ball", pm, set, c_tau, t_grid, mc, true, |x, t| {
            dot(a, x).abs() <= c + cost_ball_support(a, c_tau, t)
        }),
        _ => enlargement_report("cost_ball", pm, set, c_tau, t_grid, mc, false, |x, t| {
            set.enlarged_contains(x, (2.0 * t).sqrt() * c_tau, 2.0 * t * c_tau)
        }),
    }
}

/// Convex functions on `R^n` with known Lipschitz constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConvexFamily {
    Linear { w: Vec<f64> },
    MaxCoordinate,
    /// `g(<w, x>)`.
    Composite { w: Vec<f64>, g: PLConvex },
}

impl ConvexFamily {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ConvexFamily::Linear { w } => dot(w, x),
            ConvexFamily::MaxCoordinate => x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ConvexFamily::Composite { w, g } => g.eval(dot(w, x)),
        }
    }

    /// Lipschitz constants with respect to the `l2` and `l1` norms.
    pub fn lipschitz(&self) -> (f64, f64) {
        match self {
            ConvexFamily::Linear { w } => (norm2(w), norm_inf(w)),
            ConvexFamily::MaxCoordinate => (1.0, 1.0),
            ConvexFamily::Composite { w, g } => {
                let l = g.max_abs_slope();
                (l * norm2(w), l * norm_inf(w))
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ConvexFamily::Linear { .. } => "linear",
            ConvexFamily::MaxCoordinate => "max_coordinate",
            ConvexFamily::Composite { .. } => "composite",
        }
    }

    fn dim(&self) -> Option<usize> {
        match self {
            ConvexFamily::Linear { w } | ConvexFamily::Composite { w, .. } => Some(w.len()),
            ConvexFamily::MaxCoordinate => None,
        }
    }
}

/// `2 exp(-min(t/b, t^2/a^2) / 8)`, capped at 1.
pub fn deviation_bound(a: f64, b: f64, t: f64) -> f64 {
    let m = (t / b).min(t * t / (a * a));
    (2.0 * (-m / 8.0).exp()).min(1.0)
}

/// `t - min(r/b, r^2/a^2) / 8` with `r = a sqrt(2t) + 2bt`; nonnegative when
/// the two-level enlargement at level `t` reaches distance `C r`.
pub fn deviation_scalar_slack(a: f64, b: f64, t: f64) -> f64 {
    let r = a * (2.0 * t).sqrt() + 2.0 * b * t;
    t - (r / b).min(r * r / (a * a)) / 8.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationRow {
    pub t: f64,
    pub upper: f64,
    pub lower: f64,
    pub bound: f64,
    pub radius_upper: f64,
    pub radius_lower: f64,
    /// `linear` where `t/b` attains the minimum, else `quadratic`.
    pub branch: &'static str,
    pub pass_upper: bool,
    pub pass_lower: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationReport {
    pub family: String,
    pub dim: usize,
    pub samples: usize,
    pub seed: u64,
    pub a: f64,
    pub b: f64,
    /// The supplied constants dominate the family's Lipschitz constants.
    pub constants_valid: bool,
    pub c_tau: f64,
    pub median: f64,
    pub z: f64,
    pub rows: Vec<DeviationRow>,
}

impl DeviationReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass_upper && r.pass_lower)
    }
}

/// Deviation of `f` from its median beyond `C_τ t`, both sides.
pub fn verify_corr2(
    pm: &ProductMeasure,
    f: &ConvexFamily,
    a: f64,
    b: f64,
    h: f64,
    lambda: f64,
    t_grid: &[f64],
    mc: &MonteCarlo,
) -> Result<DeviationReport> {
    require_class(pm, h, lambda)?;
    if f.dim().is_some_and(|d| d != pm.dim()) {
        return Err(Error::InvalidArgument("function and measure dimensions differ".into()));
    }
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidArgument("a and b must be positive".into()));
    }
    if mc.samples == 0 {
        return Err(Error::EmptyBase);
    }
    let c = tau_constant(h, lambda);
    let mut values = par::map_chunks(mc.exec, mc.samples, CHUNK, |range| {
        let mut row = vec![0.0; pm.dim()];
        range
            .map(|i| {
                pm.sample_row(mc.seed, i, &mut row);
                f.eval(&row)
            })
            .collect::<Vec<_>>()
    })
    .concat();
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let median = values[(n - 1) / 2];
    let z = bonferroni_z(CONFIDENCE, 2 * t_grid.len());
    let (fa, fb) = f.lipschitz();
    let rows = t_grid
        .iter()
        .map(|&t| {
            let above = n - values.partition_point(|&v| v <= median + c * t);
            let below = values.partition_point(|&v| v < median - c * t);
            let (upper, lower) = (above as f64 / n as f64, below as f64 / n as f64);
            let bound = deviation_bound(a, b, t);
            let radius_upper = (upper - wilson(above, n, z).0).max(0.0);
            let radius_lower = (lower - wilson(below, n, z).0).max(0.0);
            DeviationRow {
                t,
                upper,
                lower,
                bound,
                radius_upper,
                radius_lower,
                branch: if t / b <= t * t / (a * a) { "linear" } else { "quadratic" },
                pass_upper: upper - radius_upper <= bound,
                pass_lower: lower - radius_lower <= bound,
            }
        })
        .collect();
    Ok(DeviationReport {
        family: f.name().into(),
        dim: pm.dim(),
        samples: n,
        seed: mc.seed,
        a,
        b,
        constants_valid: a >= fa * (1.0 - 1e-12) && b >= fb * (1.0 - 1e-12),
        c_tau: c,
        median,
        z,
        rows,
    })
}
