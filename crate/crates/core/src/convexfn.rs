//! Piecewise-linear convex functions on the line.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite convex function that is affine between sorted breakpoints.
///
/// `slopes[i]` is the slope on the `i`-th piece; piece `0` extends to
/// `-inf` and piece `breakpoints.len()` extends to `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PLConvexSpec", into = "PLConvexSpec")]
pub struct PLConvex {
    breakpoints: Vec<f64>,
    slopes: Vec<f64>,
    /// `f(breakpoints[i])`, or `[f(0)]` when there are no breakpoints.
    values: Vec<f64>,
}

/// Serialized form: the leftmost slope, then `(breakpoint, slope to its
/// right)` pairs, and one `(position, value)` anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PLConvexSpec {
    pub initial_slope: f64,
    #[serde(default)]
    pub pieces: Vec<[f64; 2]>,
    pub anchor: [f64; 2],
}

impl TryFrom<PLConvexSpec> for PLConvex {
    type Error = Error;
    fn try_from(spec: PLConvexSpec) -> Result<Self> {
        let breakpoints = spec.pieces.iter().map(|p| p[0]).collect();
        let mut slopes = vec![spec.initial_slope];
        slopes.extend(spec.pieces.iter().map(|p| p[1]));
        PLConvex::new(breakpoints, slopes, (spec.anchor[0], spec.anchor[1]))
    }
}

impl From<PLConvex> for PLConvexSpec {
    fn from(f: PLConvex) -> Self {
        let anchor = match f.breakpoints.first() {
            Some(&b) => [b, f.values[0]],
            None => [0.0, f.values[0]],
        };
        PLConvexSpec {
            initial_slope: f.slopes[0],
            pieces: f.breakpoints.iter().zip(&f.slopes[1..]).map(|(&b, &s)| [b, s]).collect(),
            anchor,
        }
    }
}

/// Which end of a flat minimizing set stands in for `x0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MinimizerChoice {
    #[default]
    Leftmost,
    Rightmost,
}

impl PLConvex {
    /// Builds a function from its breakpoints, slopes and one point it passes
    /// through. Equal adjacent slopes are merged.
    pub fn new(breakpoints: Vec<f64>, slopes: Vec<f64>, anchor: (f64, f64)) -> Result<Self> {
        if slopes.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidFunction(format!(
                "{} breakpoints need {} slopes, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                slopes.len()
            )));
        }
        if !breakpoints.iter().chain(&slopes).all(|v| v.is_finite()) || !anchor.0.is_finite() || !anchor.1.is_finite() {
            return Err(Error::InvalidFunction("non-finite breakpoint, slope or anchor".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidFunction("breakpoints must be strictly increasing".into()));
        }
        if slopes.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidFunction("slopes must be nondecreasing (convexity)".into()));
        }
        let mut bps = Vec::with_capacity(breakpoints.len());
        let mut sl = vec![slopes[0]];
        for (i, &b) in breakpoints.iter().enumerate() {
            if slopes[i + 1] != *sl.last().unwrap() {
                bps.push(b);
                sl.push(slopes[i + 1]);
            }
        }
        let mut f = PLConvex { breakpoints: bps, slopes: sl, values: vec![0.0] };
        f.values = if f.breakpoints.is_empty() {
            vec![anchor.1 - f.slopes[0] * anchor.0]
        } else {
            // Integrate slopes from the first breakpoint, then shift to the anchor.
            let mut v = Vec::with_capacity(f.breakpoints.len());
            let mut acc = 0.0;
            v.push(acc);
            for i in 1..f.breakpoints.len() {
                acc += f.slopes[i] * (f.breakpoints[i] - f.breakpoints[i - 1]);
                v.push(acc);
            }
            v
        };
        if !f.breakpoints.is_empty() {
            let shift = anchor.1 - f.eval(anchor.0);
            for v in &mut f.values {
                *v += shift;
            }
        }
        Ok(f)
    }

    pub fn constant(c: f64) -> Self {
        PLConvex { breakpoints: vec![], slopes: vec![0.0], values: vec![c] }
    }

    /// `slope * x + intercept`.
    pub fn linear(slope: f64, intercept: f64) -> Self {
        PLConvex { breakpoints: vec![], slopes: vec![slope], values: vec![intercept] }
    }

    /// `c * |x|`.
    pub fn abs_scaled(c: f64) -> Result<Self> {
        Self::new(vec![0.0], vec![-c, c], (0.0, 0.0))
    }

    /// `slope * max{x - u, 0}`.
    pub fn hinge(u: f64, slope: f64) -> Result<Self> {
        Self::new(vec![u], vec![0.0, slope], (u, 0.0))
    }

    /// Pointwise maximum of the lines `a x + c` given as `(a, c)`.
    pub fn max_affine(lines: &[(f64, f64)]) -> Result<Self> {
        if lines.is_empty() {
            return Err(Error::InvalidFunction("max of no lines".into()));
        }
        let mut sorted = lines.to_vec();
        sorted.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
        let mut hull: Vec<(f64, f64)> = Vec::new();
        for line in sorted {
            if let Some(last) = hull.last() {
                if last.0 == line.0 {
                    hull.pop();
                }
            }
            while hull.len() >= 2 {
                let (l1, l2) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                let x12 = (l1.1 - l2.1) / (l2.0 - l1.0);
                let x13 = (l1.1 - line.1) / (line.0 - l1.0);
                if x13 <= x12 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(line);
        }
        let breakpoints: Vec<f64> = hull.windows(2).map(|w| (w[0].1 - w[1].1) / (w[1].0 - w[0].0)).collect();
        let slopes = hull.iter().map(|l| l.0).collect();
        let anchor_x = breakpoints.first().copied().unwrap_or(0.0);
        let anchor_y = hull[0].0 * anchor_x + hull[0].1;
        Self::new(breakpoints, slopes, (anchor_x, anchor_y))
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn eval(&self, x: f64) -> f64 {
        if self.breakpoints.is_empty() {
            return self.values[0] + self.slopes[0] * x;
        }
        let i = self.breakpoints.partition_point(|&b| b <= x);
        if i == 0 {
            self.values[0] + self.slopes[0] * (x - self.breakpoints[0])
        } else {
            self.values[i - 1] + self.slopes[i] * (x - self.breakpoints[i - 1])
        }
    }

    /// Right derivative, which is the limsup difference quotient for convex
    /// functions.
    pub fn right_slope(&self, x: f64) -> f64 {
        self.slopes[self.breakpoints.partition_point(|&b| b <= x)]
    }

    pub fn left_slope(&self, x: f64) -> f64 {
        self.slopes[self.breakpoints.partition_point(|&b| b < x)]
    }

    pub fn first_slope(&self) -> f64 {
        self.slopes[0]
    }

    pub fn last_slope(&self) -> f64 {
        *self.slopes.last().unwrap()
    }

    pub fn max_abs_slope(&self) -> f64 {
        self.first_slope().abs().max(self.last_slope().abs())
    }

    pub fn is_bounded_below(&self) -> bool {
        self.first_slope() <= 0.0 && self.last_slope() >= 0.0
    }

    /// `inf f`, `-inf` when unbounded below.
    pub fn infimum(&self) -> f64 {
        if !self.is_bounded_below() {
            return f64::NEG_INFINITY;
        }
        let (lo, hi) = self.minimizing_set();
        if lo.is_finite() {
            self.eval(lo)
        } else if hi.is_finite() {
            self.eval(hi)
        } else {
            self.values[0]
        }
    }

    /// Closed interval of minimizers with infinite ends where it is unbounded;
    /// `(-inf, -inf)` for increasing and `(inf, inf)` for decreasing `f`.
    pub fn minimizing_set(&self) -> (f64, f64) {
        let k = self.breakpoints.len();
        if self.first_slope() > 0.0 {
            return (f64::NEG_INFINITY, f64::NEG_INFINITY);
        }
        if self.last_slope() < 0.0 {
            return (f64::INFINITY, f64::INFINITY);
        }
        let first_nonneg = self.slopes.iter().position(|&s| s >= 0.0).unwrap();
        let lo = if first_nonneg == 0 { f64::NEG_INFINITY } else { self.breakpoints[first_nonneg - 1] };
        let last_nonpos = self.slopes.iter().rposition(|&s| s <= 0.0).unwrap();
        let hi = if last_nonpos == k { f64::INFINITY } else { self.breakpoints[last_nonpos] };
        (lo, hi)
    }

    /// Minimizer `x0` with the given tie-break; `-inf` for increasing and
    /// `+inf` for decreasing functions.
    pub fn minimizer_with(&self, choice: MinimizerChoice) -> f64 {
        let (lo, hi) = self.minimizing_set();
        match choice {
            MinimizerChoice::Leftmost => lo,
            MinimizerChoice::Rightmost => hi,
        }
    }

    /// Leftmost minimizer.
    pub fn minimizer(&self) -> f64 {
        self.minimizer_with(MinimizerChoice::Leftmost)
    }

    pub fn discrete_gradient(&self, h: f64) -> DiscreteGradient<'_> {
        self.discrete_gradient_with(h, MinimizerChoice::Leftmost)
    }

    pub fn discrete_gradient_with(&self, h: f64, choice: MinimizerChoice) -> DiscreteGradient<'_> {
        assert!(h > 0.0 && h.is_finite(), "discrete gradient step must be positive");
        DiscreteGradient { f: self, h, x0: self.minimizer_with(choice) }
    }

    pub fn add_constant(&self, c: f64) -> Self {
        let mut g = self.clone();
        for v in &mut g.values {
            *v += c;
        }
        g
    }

    /// `x -> f(-x)`.
    pub fn reflect(&self) -> Self {
        let breakpoints: Vec<f64> = self.breakpoints.iter().rev().map(|b| -b).collect();
        let slopes: Vec<f64> = self.slopes.iter().rev().map(|s| -s).collect();
        let anchor = (0.0, self.eval(0.0));
        PLConvex::new(breakpoints, slopes, anchor).expect("reflection preserves convexity")
    }

    /// `x -> f(x) * c` for `c >= 0`.
    pub fn scale(&self, c: f64) -> Self {
        assert!(c >= 0.0);
        if c == 0.0 {
            return Self::constant(0.0);
        }
        PLConvex {
            breakpoints: self.breakpoints.clone(),
            slopes: self.slopes.iter().map(|s| s * c).collect(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// Replaces slopes by `clamp(f', -bound, bound)` while keeping `g = f` on
    /// the clip interval around a point where `|f'| <= bound` (or around the
    /// minimizer when no slope is that small).
    pub fn truncate_slopes(&self, bound: f64) -> Result<Truncation> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::InvalidArgument(format!("slope bound must be positive, got {bound}")));
        }
        if self.first_slope() > bound || self.last_slope() < -bound {
            return Err(Error::Unbounded);
        }
        let k = self.breakpoints.len();
        // Piece holding y0: the first slope inside [-bound, bound], else the
        // breakpoint where the slope jumps over it.
        let y0 = match self.slopes.iter().position(|s| s.abs() <= bound) {
            Some(i) if k == 0 => {
                debug_assert_eq!(i, 0);
                0.0
            }
            Some(0) => self.breakpoints[0],
            Some(i) => self.breakpoints[i - 1],
            None => {
                let j = self.slopes.iter().position(|&s| s > bound).unwrap();
                self.breakpoints[j - 1]
            }
        };
        let y_minus = match self.slopes.iter().rposition(|&s| s <= -bound) {
            Some(i) if i < k => self.breakpoints[i].min(y0),
            Some(_) => y0,
            None => f64::NEG_INFINITY,
        };
        let y_plus = match self.slopes.iter().position(|&s| s >= bound) {
            Some(0) => y0,
            Some(j) => self.breakpoints[j - 1].max(y0),
            None => f64::INFINITY,
        };
        let slopes: Vec<f64> = self.slopes.iter().map(|s| s.clamp(-bound, bound)).collect();
        let g = PLConvex::new(self.breakpoints.clone(), slopes, (y0, self.eval(y0)))?;
        Ok(Truncation { g, y_minus, y_plus })
    }

    /// Grid values on `n` evenly spaced points of `[lo, hi]`.
    pub fn sample_grid(&self, lo: f64, step: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| self.eval(lo + step * i as f64)).collect()
    }
}

/// Result of [`PLConvex::truncate_slopes`].
#[derive(Debug, Clone, PartialEq)]
pub struct Truncation {
    pub g: PLConvex,
    pub y_minus: f64,
    pub y_plus: f64,
}

/// The three-branch `h`-step difference of a convex function around its
/// minimizer `x0`.
#[derive(Debug, Clone, Copy)]
pub struct DiscreteGradient<'a> {
    f: &'a PLConvex,
    pub h: f64,
    pub x0: f64,
}

impl DiscreteGradient<'_> {
    pub fn eval(&self, x: f64) -> f64 {
        let f = self.f;
        if x > self.x0 + self.h {
            f.eval(x) - f.eval(x - self.h)
        } else if x >= self.x0 - self.h {
            f.eval(x) - f.eval(self.x0)
        } else {
            f.eval(x) - f.eval(x + self.h)
        }
    }

    /// Points where `x -> Df(x)` may fail to be smooth.
    pub fn breaks(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for &b in self.f.breakpoints() {
            out.extend([b, b - self.h, b + self.h]);
        }
        if self.x0.is_finite() {
            out.extend([self.x0 - self.h, self.x0 + self.h]);
        }
        out
    }
}

/// Seedable generator of random piecewise-linear convex functions.
#[derive(Debug, Clone)]
pub struct ConvexSampler {
    /// Breakpoint count is uniform on `1..=max_breakpoints`.
    pub max_breakpoints: usize,
    /// Breakpoints are uniform on `[-span, span]`.
    pub span: f64,
    /// Slopes are centered normals whose scale is log-uniform in this range.
    pub slope_scale: (f64, f64),
    /// Anchor value at 0 is uniform on `[-anchor_range, anchor_range]`.
    pub anchor_range: f64,
    /// Flip extreme slopes so the function has a finite infimum.
    pub bounded_below: bool,
    /// Rescale slopes so that `|f'|` never exceeds this.
    pub max_abs_slope: Option<f64>,
    /// Force `f(0) = 0`.
    pub pin_origin: bool,
}

impl Default for ConvexSampler {
    fn default() -> Self {
        ConvexSampler {
            max_breakpoints: 12,
            span: 5.0,
            slope_scale: (0.05, 3.0),
            anchor_range: 1.0,
            bounded_below: false,
            max_abs_slope: None,
            pin_origin: false,
        }
    }
}

impl ConvexSampler {
    pub fn bounded_below() -> Self {
        ConvexSampler { bounded_below: true, ..Self::default() }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PLConvex {
        let k = rng.random_range(1..=self.max_breakpoints.max(1));
        let mut bps: Vec<f64> = (0..k).map(|_| rng.random_range(-self.span..=self.span)).collect();
        bps.sort_by(f64::total_cmp);
        bps.dedup();
        let (lo, hi) = self.slope_scale;
        let scale = (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp();
        let normal = Normal::new(0.0, scale).expect("positive scale");
        let mut slopes: Vec<f64> = (0..=bps.len()).map(|_| normal.sample(rng)).collect();
        slopes.sort_by(f64::total_cmp);
        if self.bounded_below {
            let last = slopes.len() - 1;
            if slopes[0] > 0.0 {
                slopes[0] = -slopes[0];
            }
            if slopes[last] < 0.0 {
                slopes[last] = -slopes[last];
            }
            slopes.sort_by(f64::total_cmp);
        }
        if let Some(cap) = self.max_abs_slope {
            let m = slopes.iter().fold(0.0f64, |a, s| a.max(s.abs()));
            if m > 0.0 {
                // A quarter of the draws sit exactly on the cap.
                let target = if rng.random::<f64>() < 0.25 { cap } else { cap * rng.random::<f64>() };
                let c = target / m;
                for s in &mut slopes {
                    *s = (*s * c).clamp(-cap, cap);
                }
            }
        }
        let value = if self.pin_origin { 0.0 } else { rng.random_range(-self.anchor_range..=self.anchor_range) };
        PLConvex::new(bps, slopes, (0.0, value)).expect("sorted slopes are convex")
    }
}
