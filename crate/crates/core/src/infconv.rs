//! Infimum convolution `(f □ φ)(x) = inf_y { f(y) + φ(x - y) }` against the
//! Huber-type cost.
//!
//! The exact engine uses `φ = q □ l` with `q(x) = x²/(2t)` and `l(x) = L|x|`:
//! convolving a piecewise-linear convex `f` with `q` gives a C¹ piecewise
//! quadratic (the Moreau envelope), and convolving that with `l` clips its
//! slopes to `[-L, L]`.

use serde::Serialize;

use crate::convexfn::PLConvex;
use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// The cost `φ(x) = weight * φ₀(x / scale)` with
/// `φ₀(x) = x²/2` for `|x| <= 1` and `|x| - 1/2` beyond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cost {
    pub scale: f64,
    pub weight: f64,
}

impl Cost {
    /// `φ₀(x / c)`.
    pub fn new(c: f64) -> Self {
        assert!(c > 0.0 && c.is_finite(), "cost scale must be positive");
        Cost { scale: c, weight: 1.0 }
    }

    /// `weight * φ₀(x / scale)`.
    pub fn weighted(scale: f64, weight: f64) -> Self {
        assert!(scale > 0.0 && scale.is_finite() && weight > 0.0 && weight.is_finite());
        Cost { scale, weight }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.weight * phi0(x / self.scale)
    }

    /// Derivative of the cost.
    pub fn slope(&self, x: f64) -> f64 {
        self.weight / self.scale * (x / self.scale).clamp(-1.0, 1.0)
    }

    /// `t` in the quadratic part `x²/(2t)`.
    pub fn curvature_radius(&self) -> f64 {
        self.scale * self.scale / self.weight
    }

    /// Global Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        self.weight / self.scale
    }
}

/// The Huber-type profile: quadratic on `[-1, 1]`, linear outside.
pub fn phi0(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 {
        0.5 * x * x
    } else {
        a - 0.5
    }
}

/// How the minimizing `y(x)` is obtained on a piece.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "rule", content = "at", rename_all = "snake_case")]
pub enum MinimizerRule {
    Fixed(f64),
    /// `y(x) = x - d`.
    Shift(f64),
    /// The infimum is a limit and is not attained.
    NotAttained,
}

/// `c0 + c1 (x - origin) + c2 (x - origin)²` on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopePiece {
    pub lo: f64,
    pub hi: f64,
    pub origin: f64,
    pub coeffs: [f64; 3],
    pub minimizer: MinimizerRule,
}

impl EnvelopePiece {
    fn value(&self, x: f64) -> f64 {
        let d = x - self.origin;
        self.coeffs[0] + d * (self.coeffs[1] + d * self.coeffs[2])
    }

    fn slope(&self, x: f64) -> f64 {
        self.coeffs[1] + 2.0 * self.coeffs[2] * (x - self.origin)
    }

    fn minimizer_at(&self, x: f64) -> Option<f64> {
        match self.minimizer {
            MinimizerRule::Fixed(y) => Some(y),
            MinimizerRule::Shift(d) => Some(x - d),
            MinimizerRule::NotAttained => None,
        }
    }

    fn restricted(mut self, lo: f64, hi: f64) -> Self {
        self.lo = lo;
        self.hi = hi;
        self
    }
}

/// Convex piecewise polynomial of degree at most two covering the line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeFunction {
    pieces: Vec<EnvelopePiece>,
}

impl EnvelopeFunction {
    pub fn pieces(&self) -> &[EnvelopePiece] {
        &self.pieces
    }

    fn piece_at(&self, x: f64) -> &EnvelopePiece {
        let i = self.pieces.partition_point(|p| p.hi < x);
        &self.pieces[i.min(self.pieces.len() - 1)]
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.piece_at(x).value(x)
    }

    /// Right derivative.
    pub fn right_slope(&self, x: f64) -> f64 {
        let i = self.pieces.partition_point(|p| p.hi <= x);
        self.pieces[i.min(self.pieces.len() - 1)].slope(x)
    }

    /// A point `y` attaining the infimum at `x`, if it is attained.
    pub fn minimizer(&self, x: f64) -> Option<f64> {
        self.piece_at(x).minimizer_at(x)
    }

    /// Finite piece boundaries.
    pub fn breaks(&self) -> Vec<f64> {
        self.pieces.iter().map(|p| p.hi).filter(|x| x.is_finite()).collect()
    }

    /// Slopes of the two unbounded pieces.
    pub fn asymptotic_slopes(&self) -> (f64, f64) {
        let first = self.pieces.first().unwrap();
        let last = self.pieces.last().unwrap();
        (first.coeffs[1], last.coeffs[1])
    }

    /// Largest continuity gap and slope decrease across piece boundaries.
    pub fn junction_defects(&self) -> (f64, f64) {
        let mut gap: f64 = 0.0;
        let mut drop: f64 = 0.0;
        for w in self.pieces.windows(2) {
            let x = w[0].hi;
            gap = gap.max((w[0].value(x) - w[1].value(x)).abs());
            drop = drop.max(w[0].slope(x) - w[1].slope(x));
        }
        (gap, drop)
    }
}

/// Exact `f □ cost` for piecewise-linear convex `f`.
///
/// Fails with `UnboundedBelow` only when the convolution is `-inf`, i.e.
/// when an end slope of `f` is steeper than the cost's Lipschitz constant in
/// the descending direction.
pub fn infconv_exact(f: &PLConvex, cost: &Cost) -> Result<EnvelopeFunction> {
    let lip = cost.lipschitz();
    let (s_first, s_last) = (f.first_slope(), f.last_slope());
    if s_first > lip || s_last < -lip {
        return Err(Error::UnboundedBelow(format!(
            "end slopes ({s_first}, {s_last}) leave [-{lip}, {lip}] on the descending side"
        )));
    }
    let moreau = moreau_envelope(f, cost.curvature_radius());
    Ok(EnvelopeFunction { pieces: clip_slopes(moreau, lip) })
}

/// `f □ x²/(2t)`, piece by piece.
fn moreau_envelope(f: &PLConvex, t: f64) -> Vec<EnvelopePiece> {
    let b = f.breakpoints();
    let s = f.slopes();
    let affine = |lo: f64, hi: f64, origin: f64, value: f64, slope: f64| EnvelopePiece {
        lo,
        hi,
        origin,
        coeffs: [value - 0.5 * t * slope * slope, slope, 0.0],
        minimizer: MinimizerRule::Shift(t * slope),
    };
    if b.is_empty() {
        return vec![affine(f64::NEG_INFINITY, f64::INFINITY, 0.0, f.eval(0.0), s[0])];
    }
    let mut pieces = Vec::with_capacity(2 * b.len() + 1);
    pieces.push(affine(f64::NEG_INFINITY, b[0] + t * s[0], b[0], f.eval(b[0]), s[0]));
    for (j, &bj) in b.iter().enumerate() {
        let fb = f.eval(bj);
        pieces.push(EnvelopePiece {
            lo: bj + t * s[j],
            hi: bj + t * s[j + 1],
            origin: bj,
            coeffs: [fb, 0.0, 0.5 / t],
            minimizer: MinimizerRule::Fixed(bj),
        });
        let hi = if j + 1 < b.len() { b[j + 1] + t * s[j + 1] } else { f64::INFINITY };
        pieces.push(affine(bj + t * s[j + 1], hi, bj, fb, s[j + 1]));
    }
    pieces.retain(|p| p.hi > p.lo);
    pieces
}

/// `g □ L|x|` for convex C¹ piecewise-quadratic `g`.
fn clip_slopes(pieces: Vec<EnvelopePiece>, lip: f64) -> Vec<EnvelopePiece> {
    let first_slope = pieces.first().unwrap().coeffs[1];
    let last_slope = pieces.last().unwrap().coeffs[1];

    // Degenerate cases: an end slope equals the Lipschitz level, so the
    // clipped function is that end piece extended over the whole line.
    if first_slope >= lip && last_slope > lip {
        let p0 = pieces[0];
        let mut tail = p0.restricted(p0.hi, f64::INFINITY);
        tail.minimizer = MinimizerRule::NotAttained;
        return vec![p0, tail];
    }
    if last_slope <= -lip && first_slope < -lip {
        let pn = *pieces.last().unwrap();
        let mut head = pn.restricted(f64::NEG_INFINITY, pn.lo);
        head.minimizer = MinimizerRule::NotAttained;
        return vec![head, pn];
    }

    let mut z_minus = f64::NEG_INFINITY;
    if first_slope < -lip {
        for p in pieces.iter().rev() {
            if p.slope(p.lo) <= -lip || p.lo == f64::NEG_INFINITY {
                z_minus = if p.coeffs[2] > 0.0 {
                    (p.origin + (-lip - p.coeffs[1]) / (2.0 * p.coeffs[2])).clamp(p.lo, p.hi)
                } else {
                    p.hi
                };
                break;
            }
        }
    }
    let mut z_plus = f64::INFINITY;
    if last_slope > lip {
        for p in pieces.iter() {
            if p.slope(p.hi) >= lip || p.hi == f64::INFINITY {
                z_plus = if p.coeffs[2] > 0.0 {
                    (p.origin + (lip - p.coeffs[1]) / (2.0 * p.coeffs[2])).clamp(p.lo, p.hi)
                } else {
                    p.lo
                };
                break;
            }
        }
    }

    let at = |z: f64| pieces[pieces.partition_point(|p| p.hi < z).min(pieces.len() - 1)];
    let mut out = Vec::with_capacity(pieces.len() + 2);
    if z_minus.is_finite() {
        let p = at(z_minus);
        out.push(EnvelopePiece {
            lo: f64::NEG_INFINITY,
            hi: z_minus,
            origin: z_minus,
            coeffs: [p.value(z_minus), -lip, 0.0],
            minimizer: p.minimizer_at(z_minus).map_or(MinimizerRule::NotAttained, MinimizerRule::Fixed),
        });
    }
    for p in &pieces {
        let lo = p.lo.max(z_minus);
        let hi = p.hi.min(z_plus);
        if hi > lo {
            out.push(p.restricted(lo, hi));
        }
    }
    if z_plus.is_finite() {
        let p = at(z_plus);
        out.push(EnvelopePiece {
            lo: z_plus,
            hi: f64::INFINITY,
            origin: z_plus,
            coeffs: [p.value(z_plus), lip, 0.0],
            minimizer: p.minimizer_at(z_plus).map_or(MinimizerRule::NotAttained, MinimizerRule::Fixed),
        });
    }
    if let Some(first) = out.first_mut() {
        first.lo = f64::NEG_INFINITY;
    }
    if let Some(last) = out.last_mut() {
        last.hi = f64::INFINITY;
    }
    out
}

/// Evenly spaced points `start + i * step`, `i < n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniformGrid {
    pub start: f64,
    pub step: f64,
    pub n: usize,
}

impl UniformGrid {
    /// Symmetric grid on `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, step: f64) -> Self {
        let n = (2.0 * half_width / step).round() as usize + 1;
        UniformGrid { start: -half_width, step, n }
    }

    pub fn point(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridFunction {
    pub grid: UniformGrid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn sample(f: &PLConvex, grid: UniformGrid) -> Self {
        GridFunction { grid, values: grid.points().iter().map(|&x| f.eval(x)).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMethod {
    /// Two-pointer sweep; requires convex input samples.
    MonotoneSweep,
    /// Divide and conquer over the monotone minimizer matrix.
    DivideAndConquer,
    /// Plain scan over all pairs.
    QuadraticScan,
}

/// Discrete infimum convolution with the minimizing index per output point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridEnvelope {
    pub values: Vec<f64>,
    pub argmin: Vec<usize>,
    pub method: GridMethod,
}

/// Discrete `f □ cost` on a uniform grid. Uses the linear sweep when the
/// samples are convex and divide and conquer otherwise.
pub fn infconv_grid(f: &GridFunction, cost: &Cost, out: &UniformGrid) -> Result<GridEnvelope> {
    if f.values.len() != f.grid.n {
        return Err(Error::GridMismatch(format!("{} values for a grid of {} points", f.values.len(), f.grid.n)));
    }
    if !(f.grid.step > 0.0) || !(out.step > 0.0) {
        return Err(Error::GridMismatch("grid steps must be positive".into()));
    }
    if (f.grid.step - out.step).abs() > 1e-12 * f.grid.step.max(out.step) {
        return Err(Error::GridMismatch(format!("input step {} differs from output step {}", f.grid.step, out.step)));
    }
    if f.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::GridMismatch("grid values must be finite".into()));
    }
    let ys = f.grid.points();
    let method = if samples_convex(&ys, &f.values) { GridMethod::MonotoneSweep } else { GridMethod::DivideAndConquer };
    Ok(infconv_sorted(&ys, &f.values, &out.points(), cost, method, Execution::Sequential))
}

/// True when the points `(ys[i], vals[i])` lie on a convex curve.
pub fn samples_convex(ys: &[f64], vals: &[f64]) -> bool {
    let scale = vals.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    ys.windows(3).zip(vals.windows(3)).all(|(y, v)| {
        let s0 = (v[1] - v[0]) / (y[1] - y[0]);
        let s1 = (v[2] - v[1]) / (y[2] - y[1]);
        s1 - s0 >= -1e-12 * scale / (y[2] - y[0]).min(1.0)
    })
}

/// `min_j vals[j] + cost(xs[i] - ys[j])` for sorted `ys` and `xs`.
pub fn infconv_sorted(ys: &[f64], vals: &[f64], xs: &[f64], cost: &Cost, method: GridMethod, exec: Execution) -> GridEnvelope {
    assert_eq!(ys.len(), vals.len());
    assert!(!ys.is_empty());
    let cell = |i: usize, j: usize| vals[j] + cost.eval(xs[i] - ys[j]);
    let (values, argmin) = match method {
        GridMethod::MonotoneSweep => {
            let mut values = Vec::with_capacity(xs.len());
            let mut argmin = Vec::with_capacity(xs.len());
            let mut j = 0;
            for i in 0..xs.len() {
                let mut best = cell(i, j);
                while j + 1 < ys.len() {
                    let next = cell(i, j + 1);
                    if next <= best {
                        best = next;
                        j += 1;
                    } else {
                        break;
                    }
                }
                values.push(best);
                argmin.push(j);
            }
            (values, argmin)
        }
        GridMethod::DivideAndConquer => {
            let mut argmin = vec![0usize; xs.len()];
            monotone_minima(&cell, 0, xs.len(), 0, ys.len() - 1, &mut argmin);
            (argmin.iter().enumerate().map(|(i, &j)| cell(i, j)).collect(), argmin)
        }
        GridMethod::QuadraticScan => {
            let rows = par::map_indexed(exec, xs.len(), |i| {
                let mut best = (f64::INFINITY, 0);
                for j in 0..ys.len() {
                    let v = cell(i, j);
                    if v < best.0 {
                        best = (v, j);
                    }
                }
                best
            });
            rows.into_iter().unzip()
        }
    };
    GridEnvelope { values, argmin, method }
}

fn monotone_minima<F: Fn(usize, usize) -> f64>(cell: &F, rlo: usize, rhi: usize, clo: usize, chi: usize, out: &mut [usize]) {
    if rlo >= rhi {
        return;
    }
    let mid = rlo + (rhi - rlo) / 2;
    let mut best = (f64::INFINITY, clo);
    for j in clo..=chi {
        let v = cell(mid, j);
        if v < best.0 {
            best = (v, j);
        }
    }
    out[mid] = best.1;
    monotone_minima(cell, rlo, mid, clo, best.1, out);
    monotone_minima(cell, mid + 1, rhi, best.1, chi, out);
}

/// Default probe points: `[-x_max, x_max]` with `x_max = max(20, 5 C)` at
/// step `1e-3`, refined tenfold within one step of each breakpoint.
pub fn default_probe_points(f: &PLConvex, cost: &Cost) -> (UniformGrid, Vec<f64>) {
    let step = 1e-3;
    let grid = UniformGrid::symmetric(20f64.max(5.0 * cost.scale), step);
    let mut pts = grid.points();
    for &b in f.breakpoints() {
        pts.extend((-10..=10).map(|k| b + step * k as f64 / 10.0));
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    (grid, pts)
}

/// Outcome of checking `(f □ φ₁)(x) <= f(x) - C₁/2 Df(x)²` with
/// `φ₁(x) = φ₀(x/h) / C₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaBoundReport {
    pub c1: f64,
    pub h: f64,
    pub probes: usize,
    pub max_violation: f64,
    pub worst_x: f64,
}

impl LemmaBoundReport {
    pub const TOLERANCE: f64 = 1e-9;

    pub fn passed(&self) -> bool {
        self.max_violation <= Self::TOLERANCE
    }
}

pub fn lemma_bound_certificate(f: &PLConvex, c1: f64, h: f64, probes: &[f64]) -> Result<LemmaBoundReport> {
    if !(c1 > 0.0 && h > 0.0) {
        return Err(Error::InvalidArgument(format!("C1 and h must be positive, got {c1}, {h}")));
    }
    let bound = 1.0 / (c1 * h);
    if f.max_abs_slope() > bound * (1.0 + 1e-12) {
        return Err(Error::SlopeBoundViolated { max_slope: f.max_abs_slope(), bound });
    }
    let cost = Cost::weighted(h, 1.0 / c1);
    let env = infconv_exact(f, &cost)?;
    let d = f.discrete_gradient(h);
    let mut report = LemmaBoundReport { c1, h, probes: probes.len(), max_violation: f64::NEG_INFINITY, worst_x: f64::NAN };
    for &x in probes {
        let dfx = d.eval(x);
        let excess = env.eval(x) - (f.eval(x) - 0.5 * c1 * dfx * dfx);
        if excess > report.max_violation {
            report.max_violation = excess;
            report.worst_x = x;
        }
    }
    if probes.is_empty() {
        report.max_violation = 0.0;
    }
    Ok(report)
}
