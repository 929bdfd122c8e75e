//! Symmetric probability measures on the line and their tail functionals.
//!
//! Tails use the closed ray: `tail(x) = mu[x, inf)`, so an atom sitting at `x`
//! is counted. The tail-ratio class `M(h, lambda)` is queried through
//! [`Measure1D::lambda_star`], which returns the smallest admissible `lambda`
//! for a step `h` together with the point where it is attained.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::quadrature::{self, Integral, Tolerance};

const MASS_TOL: f64 = 1e-12;
/// Probe count used for suprema that have no closed form.
pub const DEFAULT_PROBES: usize = 4096;
/// Tail level defining the right end of probe grids.
pub const PROBE_TAIL_LEVEL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub position: f64,
    pub mass: f64,
}

/// Affine density `coeffs[0] + coeffs[1] * x` on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityPiece {
    pub lo: f64,
    pub hi: f64,
    pub coeffs: [f64; 2],
}

impl DensityPiece {
    fn density(&self, x: f64) -> f64 {
        self.coeffs[0] + self.coeffs[1] * x
    }

    /// Mass of the piece restricted to `[a, b]`.
    fn mass_between(&self, a: f64, b: f64) -> f64 {
        let lo = a.max(self.lo);
        let hi = b.min(self.hi);
        if hi <= lo {
            return 0.0;
        }
        self.coeffs[0] * (hi - lo) + 0.5 * self.coeffs[1] * (hi - lo) * (hi + lo)
    }

    fn mass(&self) -> f64 {
        self.mass_between(self.lo, self.hi)
    }

    /// Integral of `1/p` over `[a, b]` inside the piece, `inf` when `p`
    /// vanishes there.
    fn reciprocal_integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let (pa, pb) = (self.density(a), self.density(b));
        if pa <= 0.0 || pb <= 0.0 {
            return f64::INFINITY;
        }
        let c1 = self.coeffs[1];
        if c1.abs() * (b - a) <= 1e-12 * pa.max(pb) {
            (b - a) * 0.5 * (1.0 / pa + 1.0 / pb)
        } else {
            (pb / pa).ln() / c1
        }
    }

    /// Inverse of the normalized within-piece distribution function.
    fn inverse_cdf(&self, u: f64) -> f64 {
        let target = u * self.mass();
        let c1 = self.coeffs[1];
        let p_lo = self.density(self.lo);
        // d = y - lo solves (c1/2) d^2 + p_lo d - target = 0.
        let disc = (p_lo * p_lo + 2.0 * c1 * target).max(0.0);
        let denom = p_lo + disc.sqrt();
        let d = if denom > 0.0 { 2.0 * target / denom } else { 0.0 };
        (self.lo + d).clamp(self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureKind {
    /// Atoms of mass 1/2 at `-a` and `a`.
    TwoPoint { a: f64 },
    /// Uniform on `[-r, r]`.
    Uniform { r: f64 },
    /// Two-sided exponential with density `rate/2 * exp(-rate |x|)`.
    Exponential { rate: f64 },
    Gaussian { sigma: f64 },
    /// Finitely many atoms plus a piecewise-affine density on bounded pieces.
    Mix { atoms: Vec<Atom>, density_pieces: Vec<DensityPiece> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measure1D {
    kind: MeasureKind,
    symmetric: bool,
}

/// Answer to "is `mu` in `M(h, lambda)`": the smallest admissible lambda and
/// where the tail ratio reaches it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MembershipCertificate {
    pub h: f64,
    pub lambda_star: f64,
    /// Point where the supremum is reached. `inf` when it is only a limit.
    pub witness: f64,
    /// False when the supremum is a one-sided limit at `witness`.
    pub attained: bool,
}

impl MembershipCertificate {
    pub fn member(&self, lambda: f64) -> bool {
        self.lambda_star <= lambda
    }
}

/// A supremum over `x > 0`, possibly infinite, with the probe reaching it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailFunctional {
    pub value: f64,
    pub witness: f64,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidMeasure(format!("{name} must be positive and finite, got {v}")))
    }
}

impl Measure1D {
    pub fn two_point(a: f64) -> Result<Self> {
        check_positive("two_point position a", a)?;
        Ok(Self { kind: MeasureKind::TwoPoint { a }, symmetric: true })
    }

    pub fn uniform(r: f64) -> Result<Self> {
        check_positive("uniform half-width r", r)?;
        Ok(Self { kind: MeasureKind::Uniform { r }, symmetric: true })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        check_positive("exponential rate", rate)?;
        Ok(Self { kind: MeasureKind::Exponential { rate }, symmetric: true })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        check_positive("gaussian sigma", sigma)?;
        Ok(Self { kind: MeasureKind::Gaussian { sigma }, symmetric: true })
    }

    /// Builds an atom/density mixture. When `symmetric` is true the
    /// reflection symmetry is verified on probes.
    pub fn mix(mut atoms: Vec<Atom>, mut density_pieces: Vec<DensityPiece>, symmetric: bool) -> Result<Self> {
        for a in &atoms {
            if !a.position.is_finite() || !a.mass.is_finite() || a.mass < 0.0 {
                return Err(Error::InvalidMeasure(format!("bad atom {a:?}")));
            }
        }
        atoms.retain(|a| a.mass > 0.0);
        atoms.sort_by(|a, b| a.position.total_cmp(&b.position));
        density_pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        for p in &density_pieces {
            if !(p.lo.is_finite() && p.hi.is_finite() && p.lo < p.hi) {
                return Err(Error::InvalidMeasure(format!("density piece needs finite lo < hi, got [{}, {}]", p.lo, p.hi)));
            }
            if !p.coeffs.iter().all(|c| c.is_finite()) || p.density(p.lo) < -MASS_TOL || p.density(p.hi) < -MASS_TOL {
                return Err(Error::InvalidMeasure(format!("density negative on [{}, {}]", p.lo, p.hi)));
            }
        }
        for w in density_pieces.windows(2) {
            if w[1].lo < w[0].hi {
                return Err(Error::InvalidMeasure(format!(
                    "density pieces overlap: [{}, {}] and [{}, {}]",
                    w[0].lo, w[0].hi, w[1].lo, w[1].hi
                )));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.mass).sum::<f64>() + density_pieces.iter().map(DensityPiece::mass).sum::<f64>();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidMeasure(format!("total mass {total} differs from 1")));
        }
        let m = Self { kind: MeasureKind::Mix { atoms, density_pieces }, symmetric };
        if symmetric {
            m.check_reflection_symmetry()?;
        }
        Ok(m)
    }

    pub fn from_kind(kind: MeasureKind, symmetric: bool) -> Result<Self> {
        let m = match kind {
            MeasureKind::TwoPoint { a } => Self::two_point(a)?,
            MeasureKind::Uniform { r } => Self::uniform(r)?,
            MeasureKind::Exponential { rate } => Self::exponential(rate)?,
            MeasureKind::Gaussian { sigma } => Self::gaussian(sigma)?,
            MeasureKind::Mix { atoms, density_pieces } => return Self::mix(atoms, density_pieces, symmetric),
        };
        Ok(m.with_symmetric_flag(symmetric))
    }

    /// Overrides the symmetry flag without re-validating.
    pub fn with_symmetric_flag(mut self, symmetric: bool) -> Self {
        self.symmetric = symmetric;
        self
    }

    pub fn kind(&self) -> &MeasureKind {
        &self.kind
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Short human-readable identifier used in reports.
    pub fn id(&self) -> String {
        match &self.kind {
            MeasureKind::TwoPoint { a } => format!("two_point(a={a})"),
            MeasureKind::Uniform { r } => format!("uniform(r={r})"),
            MeasureKind::Exponential { rate } => format!("exponential(rate={rate})"),
            MeasureKind::Gaussian { sigma } => format!("gaussian(sigma={sigma})"),
            MeasureKind::Mix { atoms, density_pieces } => {
                format!("mix(atoms={}, pieces={})", atoms.len(), density_pieces.len())
            }
        }
    }

    pub fn atoms(&self) -> Vec<Atom> {
        match &self.kind {
            MeasureKind::TwoPoint { a } => vec![Atom { position: -a, mass: 0.5 }, Atom { position: *a, mass: 0.5 }],
            MeasureKind::Mix { atoms, .. } => atoms.clone(),
            _ => Vec::new(),
        }
    }

    /// Density of the absolutely continuous part.
    pub fn density(&self, x: f64) -> f64 {
        match &self.kind {
            MeasureKind::TwoPoint { .. } => 0.0,
            MeasureKind::Uniform { r } => {
                if x.abs() <= *r {
                    0.5 / r
                } else {
                    0.0
                }
            }
            MeasureKind::Exponential { rate } => 0.5 * rate * (-rate * x.abs()).exp(),
            MeasureKind::Gaussian { sigma } => {
                let z = x / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
            MeasureKind::Mix { density_pieces, .. } => density_pieces
                .iter()
                .filter(|p| x >= p.lo && x <= p.hi)
                .map(|p| p.density(x))
                .fold(0.0, f64::max),
        }
    }

    /// Points where the density is not smooth.
    pub fn density_breaks(&self) -> Vec<f64> {
        match &self.kind {
            MeasureKind::TwoPoint { .. } | MeasureKind::Gaussian { .. } => Vec::new(),
            MeasureKind::Uniform { r } => vec![-r, *r],
            MeasureKind::Exponential { .. } => vec![0.0],
            MeasureKind::Mix { density_pieces, .. } => density_pieces.iter().flat_map(|p| [p.lo, p.hi]).collect(),
        }
    }

    /// Closed hull of the support of the absolutely continuous part, or
    /// `None` if there is none.
    fn density_support(&self) -> Option<(f64, f64)> {
        match &self.kind {
            MeasureKind::TwoPoint { .. } => None,
            MeasureKind::Uniform { r } => Some((-r, *r)),
            MeasureKind::Exponential { .. } | MeasureKind::Gaussian { .. } => Some((f64::NEG_INFINITY, f64::INFINITY)),
            MeasureKind::Mix { density_pieces, .. } => {
                let lo = density_pieces.iter().map(|p| p.lo).fold(f64::INFINITY, f64::min);
                let hi = density_pieces.iter().map(|p| p.hi).fold(f64::NEG_INFINITY, f64::max);
                (lo < hi).then_some((lo, hi))
            }
        }
    }

    /// Largest point of the support (`inf` for unbounded support).
    pub fn support_max(&self) -> f64 {
        let atoms = self.atoms().iter().map(|a| a.position).fold(f64::NEG_INFINITY, f64::max);
        let dens = self.density_support().map_or(f64::NEG_INFINITY, |(_, hi)| hi);
        atoms.max(dens)
    }

    /// Mass of the absolutely continuous part on `[x, inf)`.
    pub fn continuous_tail(&self, x: f64) -> f64 {
        match &self.kind {
            MeasureKind::TwoPoint { .. } => 0.0,
            MeasureKind::Uniform { r } => ((r - x) / (2.0 * r)).clamp(0.0, 1.0),
            MeasureKind::Exponential { rate } => {
                if x >= 0.0 {
                    0.5 * (-rate * x).exp()
                } else {
                    1.0 - 0.5 * (rate * x).exp()
                }
            }
            MeasureKind::Gaussian { sigma } => 0.5 * erfc(x / (sigma * std::f64::consts::SQRT_2)),
            MeasureKind::Mix { density_pieces, .. } => {
                density_pieces.iter().map(|p| p.mass_between(x, f64::INFINITY)).sum::<f64>()
            }
        }
    }

    /// `mu[x, inf)`.
    pub fn tail(&self, x: f64) -> f64 {
        let atoms: f64 = self.atoms().iter().filter(|a| a.position >= x).map(|a| a.mass).sum();
        (atoms + self.continuous_tail(x)).clamp(0.0, 1.0)
    }

    /// `mu(x, inf)`.
    pub fn tail_open(&self, x: f64) -> f64 {
        let atoms: f64 = self.atoms().iter().filter(|a| a.position > x).map(|a| a.mass).sum();
        (atoms + self.continuous_tail(x)).clamp(0.0, 1.0)
    }

    /// Mass of the absolutely continuous part in `[a, b]`.
    pub fn continuous_mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        (self.continuous_tail(a) - self.continuous_tail(b)).max(0.0)
    }

    /// Smallest `x >= 0` with `tail(x) <= level`, capped at the support end.
    pub fn upper_quantile(&self, level: f64) -> f64 {
        match &self.kind {
            MeasureKind::Exponential { rate } => ((0.5 / level).ln() / rate).max(0.0),
            _ => {
                let top = self.support_max();
                if top.is_finite() {
                    let mut lo = 0.0;
                    let mut hi = top.max(0.0);
                    if self.tail(lo) <= level {
                        return 0.0;
                    }
                    if self.tail(hi) > level {
                        return hi;
                    }
                    for _ in 0..200 {
                        let mid = 0.5 * (lo + hi);
                        if self.tail(mid) > level {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    hi
                } else {
                    let mut hi = 1.0;
                    while self.tail(hi) > level {
                        hi *= 2.0;
                    }
                    let mut lo = 0.0;
                    for _ in 0..200 {
                        let mid = 0.5 * (lo + hi);
                        if self.tail(mid) > level {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    hi
                }
            }
        }
    }

    /// Exponential decay rate of the tails: `inf` for compact support or
    /// Gaussian tails.
    pub fn tail_decay_rate(&self) -> f64 {
        match &self.kind {
            MeasureKind::Exponential { rate } => *rate,
            _ => f64::INFINITY,
        }
    }

    /// Fails with `DivergentIntegral` unless `exp(slope * |x|)` is integrable.
    pub fn check_exponential_moment(&self, slope: f64) -> Result<()> {
        let rate = self.tail_decay_rate();
        if slope < rate {
            Ok(())
        } else {
            Err(Error::DivergentIntegral(format!(
                "integrand grows like exp({slope} |x|) but {} decays at rate {rate}",
                self.id()
            )))
        }
    }

    /// `int g dmu`. `g` must be smooth between the points of `breaks`.
    pub fn integrate<G: Fn(f64) -> f64>(&self, g: G, breaks: &[f64]) -> Integral {
        self.integrate_over(g, breaks, f64::NEG_INFINITY, f64::INFINITY, true)
    }

    /// Integral of `g` against the restriction of `mu` to `[lo, hi]` (or
    /// `(lo, hi]` for atoms when `include_lo_atom` is false).
    pub fn integrate_over<G: Fn(f64) -> f64>(&self, g: G, breaks: &[f64], lo: f64, hi: f64, include_lo_atom: bool) -> Integral {
        let atom_part: f64 = self
            .atoms()
            .iter()
            .filter(|a| (a.position > lo || (include_lo_atom && a.position == lo)) && a.position <= hi)
            .map(|a| a.mass * g(a.position))
            .sum();
        let mut total = Integral::exact(atom_part);
        if let Some((slo, shi)) = self.density_support() {
            let a = lo.max(slo);
            let b = hi.min(shi);
            if b > a {
                let mut cuts = self.density_breaks();
                cuts.extend_from_slice(breaks);
                let integrand = |x: f64| {
                    let p = self.density(x);
                    if p == 0.0 {
                        0.0
                    } else {
                        p * g(x)
                    }
                };
                total = total + quadrature::integrate_piecewise(&integrand, a, b, &cuts, Tolerance::default());
            }
        }
        total
    }

    /// Push-forward under `x -> s x`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        check_positive("scale factor", s)?;
        let kind = match &self.kind {
            MeasureKind::TwoPoint { a } => MeasureKind::TwoPoint { a: a * s },
            MeasureKind::Uniform { r } => MeasureKind::Uniform { r: r * s },
            MeasureKind::Exponential { rate } => MeasureKind::Exponential { rate: rate / s },
            MeasureKind::Gaussian { sigma } => MeasureKind::Gaussian { sigma: sigma * s },
            MeasureKind::Mix { atoms, density_pieces } => MeasureKind::Mix {
                atoms: atoms.iter().map(|a| Atom { position: a.position * s, mass: a.mass }).collect(),
                density_pieces: density_pieces
                    .iter()
                    .map(|p| DensityPiece { lo: p.lo * s, hi: p.hi * s, coeffs: [p.coeffs[0] / s, p.coeffs[1] / (s * s)] })
                    .collect(),
            },
        };
        Ok(Self { kind, symmetric: self.symmetric })
    }

    /// Push-forward under `x -> -x`.
    pub fn reflected(&self) -> Self {
        let kind = match &self.kind {
            MeasureKind::Mix { atoms, density_pieces } => MeasureKind::Mix {
                atoms: atoms.iter().rev().map(|a| Atom { position: -a.position, mass: a.mass }).collect(),
                density_pieces: density_pieces
                    .iter()
                    .rev()
                    .map(|p| DensityPiece { lo: -p.hi, hi: -p.lo, coeffs: [p.coeffs[0], -p.coeffs[1]] })
                    .collect(),
            },
            other => other.clone(),
        };
        Self { kind, symmetric: self.symmetric }
    }

    /// Points at which the tail function changes its closed form.
    fn structural_points(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.atoms().iter().map(|a| a.position).collect();
        pts.extend(self.density_breaks());
        pts
    }

    fn check_reflection_symmetry(&self) -> Result<()> {
        let mut probes = vec![0.0];
        for p in self.structural_points() {
            probes.extend([p, -p, p + 1e-7, p - 1e-7]);
        }
        let top = self.support_max().abs().max(1.0);
        probes.extend((0..=64).map(|i| -top + 2.0 * top * i as f64 / 64.0));
        for &x in &probes {
            let right = self.tail(x);
            let left = 1.0 - self.tail_open(-x);
            if (right - left).abs() > MASS_TOL {
                return Err(Error::InvalidMeasure(format!(
                    "flagged symmetric but mu[{x}, inf) = {right} while mu(-inf, {}] = {left}",
                    -x
                )));
            }
        }
        Ok(())
    }

    /// Draws one sample by exact inversion of the component distributions.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            MeasureKind::TwoPoint { a } => {
                if rng.random::<bool>() {
                    *a
                } else {
                    -a
                }
            }
            MeasureKind::Uniform { r } => rng.random_range(-r..=*r),
            MeasureKind::Exponential { rate } => {
                let v = Exp::new(*rate).expect("validated rate").sample(rng);
                if rng.random::<bool>() {
                    v
                } else {
                    -v
                }
            }
            MeasureKind::Gaussian { sigma } => Normal::new(0.0, *sigma).expect("validated sigma").sample(rng),
            MeasureKind::Mix { atoms, density_pieces } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.mass;
                    if u < acc {
                        return a.position;
                    }
                }
                for p in density_pieces {
                    let m = p.mass();
                    if u < acc + m || std::ptr::eq(p, density_pieces.last().unwrap()) {
                        let v = ((u - acc) / m).clamp(0.0, 1.0);
                        return p.inverse_cdf(v);
                    }
                    acc += m;
                }
                atoms.last().map_or(0.0, |a| a.position)
            }
        }
    }

    fn require_symmetric(&self) -> Result<()> {
        if self.symmetric {
            Ok(())
        } else {
            Err(Error::NotSymmetric)
        }
    }

    /// Smallest `lambda` with `mu[x+h, inf) <= lambda mu[x, inf)` for all
    /// `x >= 0`, using `0/0 = 0`.
    pub fn lambda_star(&self, h: f64) -> Result<MembershipCertificate> {
        self.require_symmetric()?;
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidArgument(format!("step h must be positive, got {h}")));
        }
        let cert = |lambda_star: f64, witness: f64, attained: bool| MembershipCertificate { h, lambda_star, witness, attained };
        // Log-concave families have a nonincreasing tail ratio, so x = 0 is extremal.
        Ok(match &self.kind {
            MeasureKind::TwoPoint { a } => cert(if h <= *a { 1.0 } else { 0.0 }, 0.0, true),
            MeasureKind::Uniform { r } => cert(((r - h) / r).max(0.0), 0.0, true),
            MeasureKind::Exponential { rate } => cert((-rate * h).exp(), 0.0, true),
            MeasureKind::Gaussian { sigma } => cert(erfc(h / (sigma * std::f64::consts::SQRT_2)), 0.0, true),
            MeasureKind::Mix { .. } => self.lambda_star_probed(h, DEFAULT_PROBES),
        })
    }

    /// Probe-grid evaluation of the tail-ratio supremum, valid for any kind.
    /// Between structural points both tails are quadratic in `x`, so each
    /// interval also contributes the stationary points of the ratio.
    pub fn lambda_star_probed(&self, h: f64, probes: usize) -> MembershipCertificate {
        let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
        let x_max = self.upper_quantile(PROBE_TAIL_LEVEL).max(0.0);
        let mut knots = vec![0.0, x_max];
        for p in self.structural_points() {
            for q in [p, p - h] {
                if q >= 0.0 && q <= x_max {
                    knots.push(q);
                }
            }
        }
        knots.sort_by(f64::total_cmp);
        knots.dedup();

        let mut best = MembershipCertificate { h, lambda_star: 0.0, witness: 0.0, attained: true };
        let mut consider = |value: f64, x: f64, attained: bool| {
            if value > best.lambda_star {
                best = MembershipCertificate { h, lambda_star: value, witness: x, attained };
            }
        };
        for &k in &knots {
            consider(ratio(self.tail(k + h), self.tail(k)), k, true);
            consider(ratio(self.tail_open(k + h), self.tail_open(k)), k, false);
        }
        if probes > 1 && x_max > 0.0 {
            for i in 0..probes {
                let x = x_max * i as f64 / (probes - 1) as f64;
                consider(ratio(self.tail(x + h), self.tail(x)), x, true);
            }
        }
        for w in knots.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b - a <= 0.0 {
                continue;
            }
            // Quadratic interpolation of both tails on the open interval.
            let xs = [a + 0.25 * (b - a), a + 0.5 * (b - a), a + 0.75 * (b - a)];
            let num: Vec<f64> = xs.iter().map(|&x| self.tail(x + h)).collect();
            let den: Vec<f64> = xs.iter().map(|&x| self.tail(x)).collect();
            let qn = fit_quadratic(&xs, &num);
            let qd = fit_quadratic(&xs, &den);
            // d/dx (qn/qd) = 0  <=>  qn' qd - qn qd' = 0, a quadratic in x.
            let c2 = qn[2] * qd[1] - qn[1] * qd[2];
            let c1 = 2.0 * (qn[2] * qd[0] - qn[0] * qd[2]);
            let c0 = qn[1] * qd[0] - qn[0] * qd[1];
            for root in quadratic_roots(c2, c1, c0) {
                if root > a && root < b {
                    consider(ratio(self.tail(root + h), self.tail(root)), root, true);
                }
            }
        }
        best
    }

    /// Muckenhoupt constant `sup_{x>0} mu[x, inf) int_0^x 1/p`.
    pub fn muckenhoupt_b(&self) -> Result<TailFunctional> {
        self.require_symmetric()?;
        match &self.kind {
            MeasureKind::Exponential { rate } => Ok(TailFunctional { value: 1.0 / (rate * rate), witness: f64::INFINITY }),
            MeasureKind::Uniform { r } => Ok(TailFunctional { value: r * r / 4.0, witness: r / 2.0 }),
            _ => self.hardy_sup(|tail| tail, DEFAULT_PROBES),
        }
    }

    /// Bobkov-Goetze constant `sup_{x>0} mu[x, inf) ln(1/mu[x, inf)) int_0^x 1/p`.
    pub fn bobkov_goetze_bprime(&self) -> Result<TailFunctional> {
        self.require_symmetric()?;
        match &self.kind {
            MeasureKind::Exponential { .. } => Ok(TailFunctional { value: f64::INFINITY, witness: f64::INFINITY }),
            _ => self.hardy_sup(|tail| if tail > 0.0 { tail * (1.0 / tail).ln() } else { 0.0 }, DEFAULT_PROBES),
        }
    }

    /// Probe-grid supremum of `weight(tail(x)) * int_0^x 1/p` over `x > 0`.
    pub fn hardy_sup<W: Fn(f64) -> f64>(&self, weight: W, probes: usize) -> Result<TailFunctional> {
        self.require_symmetric()?;
        let positive_tail = self.tail_open(0.0) > 0.0;
        let has_density = self.continuous_mass(0.0, f64::INFINITY) > 0.0;
        if positive_tail && !has_density {
            return Err(Error::NoDensity);
        }
        let x_max = self.upper_quantile(PROBE_TAIL_LEVEL);
        if x_max <= 0.0 {
            return Ok(TailFunctional { value: 0.0, witness: 0.0 });
        }
        let mut grid: Vec<f64> = (1..=probes).map(|i| x_max * i as f64 / probes as f64).collect();
        for p in self.structural_points() {
            if p > 0.0 && p < x_max {
                grid.extend([p, p * (1.0 - 1e-12)]);
            }
        }
        grid.sort_by(f64::total_cmp);
        grid.dedup();

        let product = |tail: f64, inner: f64| {
            let w = weight(tail);
            if w <= 0.0 {
                0.0
            } else {
                w * inner
            }
        };
        let mut best = TailFunctional { value: 0.0, witness: 0.0 };
        let mut inner = 0.0;
        let mut prev = 0.0;
        let mut best_idx = None;
        for (i, &x) in grid.iter().enumerate() {
            inner += self.reciprocal_density_integral(prev, x);
            prev = x;
            let v = product(self.tail(x), inner);
            if v > best.value || v.is_nan() {
                best = TailFunctional { value: if v.is_nan() { 0.0 } else { v }, witness: x };
                best_idx = Some(i);
            }
            if best.value == f64::INFINITY {
                return Ok(best);
            }
        }
        // Golden-section polish around the best probe.
        if let Some(i) = best_idx {
            let lo = if i == 0 { 0.0 } else { grid[i - 1] };
            let hi = if i + 1 < grid.len() { grid[i + 1] } else { grid[i] };
            let base = self.reciprocal_density_integral(0.0, lo);
            let eval = |x: f64| product(self.tail(x), base + self.reciprocal_density_integral(lo, x));
            let (x, v) = golden_max(eval, lo, hi, 80);
            if v > best.value {
                best = TailFunctional { value: v, witness: x };
            }
        }
        Ok(best)
    }

    /// `int_a^b 1/p(y) dy` for the absolutely continuous part.
    pub fn reciprocal_density_integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match &self.kind {
            MeasureKind::TwoPoint { .. } => f64::INFINITY,
            MeasureKind::Uniform { r } => {
                if a.abs() > *r || b.abs() > *r {
                    f64::INFINITY
                } else {
                    2.0 * r * (b - a)
                }
            }
            MeasureKind::Exponential { rate } if a >= 0.0 => 2.0 / rate * ((rate * b).exp() - (rate * a).exp()) / rate,
            MeasureKind::Exponential { .. } | MeasureKind::Gaussian { .. } => {
                let r = quadrature::integrate(|y| 1.0 / self.density(y), a, b, Tolerance::default());
                r.value
            }
            MeasureKind::Mix { density_pieces, .. } => {
                let mut covered = a;
                let mut total = 0.0;
                for p in density_pieces.iter().filter(|p| p.hi > a && p.lo < b) {
                    if p.lo > covered {
                        return f64::INFINITY;
                    }
                    let hi = p.hi.min(b);
                    total += p.reciprocal_integral(covered.max(p.lo), hi);
                    covered = hi;
                }
                if covered < b {
                    f64::INFINITY
                } else {
                    total
                }
            }
        }
    }
}

/// Coefficients `[c0, c1, c2]` of the quadratic through three points.
fn fit_quadratic(xs: &[f64; 3], ys: &[f64]) -> [f64; 3] {
    let (x0, x1, x2) = (xs[0], xs[1], xs[2]);
    let (y0, y1, y2) = (ys[0], ys[1], ys[2]);
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let c2 = (d12 - d01) / (x2 - x0);
    let c1 = d01 - c2 * (x0 + x1);
    let c0 = y0 - c1 * x0 - c2 * x0 * x0;
    [c0, c1, c2]
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    if a.abs() <= 1e-14 * scale {
        return if b.abs() > 1e-14 * scale { vec![-c / b] } else { Vec::new() };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let mut out = vec![q / a];
    if q != 0.0 {
        out.push(c / q);
    }
    out
}

/// Golden-section search for a maximum of `f` on `[a, b]`.
pub(crate) fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn triangular() -> Measure1D {
        // Density 1 - |x| on [-1, 1].
        Measure1D::mix(
            vec![],
            vec![
                DensityPiece { lo: -1.0, hi: 0.0, coeffs: [1.0, 1.0] },
                DensityPiece { lo: 0.0, hi: 1.0, coeffs: [1.0, -1.0] },
            ],
            true,
        )
        .unwrap()
    }

    #[test]
    fn tail_examples() {
        let e = Measure1D::exponential(1.0).unwrap();
        assert_eq!(e.tail(0.0), 0.5);
        assert_abs_diff_eq!(e.tail(2.0), (-2f64).exp() / 2.0, epsilon = 1e-15);
        let tp = Measure1D::two_point(1.0).unwrap();
        assert_eq!(tp.tail(1.0), 0.5);
        assert_eq!(tp.tail_open(1.0), 0.0);
    }

    #[test]
    fn lambda_star_examples() {
        let e = Measure1D::exponential(1.0).unwrap().lambda_star(1.0).unwrap();
        assert_abs_diff_eq!(e.lambda_star, (-1f64).exp(), epsilon = 1e-15);
        assert_eq!(Measure1D::uniform(1.0).unwrap().lambda_star(1.0).unwrap().lambda_star, 0.0);
        assert_eq!(Measure1D::two_point(1.0).unwrap().lambda_star(1.0).unwrap().lambda_star, 1.0);
        assert_eq!(Measure1D::two_point(1.0).unwrap().lambda_star(1.01).unwrap().lambda_star, 0.0);
    }

    #[test]
    fn not_symmetric_is_rejected() {
        let m = Measure1D::uniform(1.0).unwrap().with_symmetric_flag(false);
        assert_eq!(m.lambda_star(1.0), Err(Error::NotSymmetric));
        assert_eq!(m.muckenhoupt_b(), Err(Error::NotSymmetric));
    }

    #[test]
    fn probed_matches_closed_forms() {
        for m in [
            Measure1D::exponential(1.3).unwrap(),
            Measure1D::uniform(2.0).unwrap(),
            Measure1D::gaussian(0.7).unwrap(),
            Measure1D::two_point(1.0).unwrap(),
        ] {
            for h in [0.3, 1.0, 1.5] {
                let exact = m.lambda_star(h).unwrap().lambda_star;
                let probed = m.lambda_star_probed(h, DEFAULT_PROBES).lambda_star;
                assert_abs_diff_eq!(exact, probed, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn mix_tail_ratio_right_limit() {
        // Central atom of mass 1/2, atoms at +-1 of mass 1/8, density 1/8 on [-1, 1].
        let m = Measure1D::mix(
            vec![
                Atom { position: -1.0, mass: 0.125 },
                Atom { position: 0.0, mass: 0.5 },
                Atom { position: 1.0, mass: 0.125 },
            ],
            vec![DensityPiece { lo: -1.0, hi: 1.0, coeffs: [0.125, 0.0] }],
            true,
        )
        .unwrap();
        // The ratio (2 - x - h)/(2 - x) on (0, 1 - h] is largest as x -> 0+,
        // where the central atom has left the tail.
        let c = m.lambda_star(0.5).unwrap();
        assert_abs_diff_eq!(c.lambda_star, 0.75, epsilon = 1e-9);
        assert_abs_diff_eq!(m.tail(0.5) / m.tail(0.0), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn mix_validation() {
        let bad_mass = Measure1D::mix(vec![Atom { position: 0.0, mass: 0.9 }], vec![], true);
        assert!(matches!(bad_mass, Err(Error::InvalidMeasure(_))));
        let asym = Measure1D::mix(vec![Atom { position: 1.0, mass: 0.5 }, Atom { position: -2.0, mass: 0.5 }], vec![], true);
        assert!(matches!(asym, Err(Error::InvalidMeasure(_))));
        let overlap = Measure1D::mix(
            vec![],
            vec![
                DensityPiece { lo: -1.0, hi: 0.5, coeffs: [0.5, 0.0] },
                DensityPiece { lo: 0.0, hi: 0.5, coeffs: [0.5, 0.0] },
            ],
            false,
        );
        assert!(matches!(overlap, Err(Error::InvalidMeasure(_))));
    }

    #[test]
    fn muckenhoupt_examples() {
        assert_eq!(Measure1D::exponential(1.0).unwrap().muckenhoupt_b().unwrap().value, 1.0);
        assert_eq!(Measure1D::uniform(1.0).unwrap().muckenhoupt_b().unwrap().value, 0.25);
        assert_eq!(Measure1D::two_point(1.0).unwrap().muckenhoupt_b(), Err(Error::NoDensity));
        // Probe path agrees with the closed forms.
        let u = Measure1D::uniform(1.0).unwrap().hardy_sup(|t| t, DEFAULT_PROBES).unwrap();
        assert_abs_diff_eq!(u.value, 0.25, epsilon = 1e-9);
        let e = Measure1D::exponential(1.0).unwrap().hardy_sup(|t| t, DEFAULT_PROBES).unwrap();
        assert_abs_diff_eq!(e.value, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn muckenhoupt_triangular_closed_form() {
        // tail = (1-x)^2/2, int 1/p = -ln(1-x).
        let oracle = (1..200_000)
            .map(|i| {
                let x = i as f64 / 200_000.0;
                0.5 * (1.0 - x).powi(2) * -(1.0 - x).ln()
            })
            .fold(0.0, f64::max);
        let b = triangular().muckenhoupt_b().unwrap();
        assert_abs_diff_eq!(b.value, oracle, epsilon = 1e-8);
    }

    #[test]
    fn gap_in_density_gives_infinite_b() {
        let m = Measure1D::mix(
            vec![Atom { position: -2.0, mass: 0.25 }, Atom { position: 2.0, mass: 0.25 }],
            vec![DensityPiece { lo: -1.0, hi: 1.0, coeffs: [0.25, 0.0] }],
            true,
        )
        .unwrap();
        assert_eq!(m.muckenhoupt_b().unwrap().value, f64::INFINITY);
    }

    #[test]
    fn bprime_examples() {
        assert_eq!(Measure1D::exponential(1.0).unwrap().bobkov_goetze_bprime().unwrap().value, f64::INFINITY);
        let oracle = (1..200_000)
            .map(|i| {
                let x = i as f64 / 200_000.0;
                x * (1.0 - x) * (2.0 / (1.0 - x)).ln()
            })
            .fold(0.0, f64::max);
        let u = Measure1D::uniform(1.0).unwrap().bobkov_goetze_bprime().unwrap();
        assert_abs_diff_eq!(u.value, oracle, epsilon = 1e-8);
        let g = Measure1D::gaussian(1.0).unwrap().bobkov_goetze_bprime().unwrap();
        assert!(g.value.is_finite() && g.value > 0.0);
    }

    #[test]
    fn integrate_moments() {
        let e = Measure1D::exponential(1.0).unwrap();
        assert_abs_diff_eq!(e.integrate(|x| x * x, &[]).value, 2.0, epsilon = 1e-11);
        let tp = Measure1D::two_point(2.0).unwrap();
        assert_eq!(tp.integrate(|x| x * x, &[]).value, 4.0);
        let g = Measure1D::gaussian(2.0).unwrap();
        assert_abs_diff_eq!(g.integrate(|x| x * x, &[]).value, 4.0, epsilon = 1e-11);
        assert_abs_diff_eq!(triangular().integrate(|_| 1.0, &[]).value, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn sampling_stays_in_support() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let tri = triangular();
        for _ in 0..1000 {
            let x = tri.sample(&mut rng);
            assert!((-1.0..=1.0).contains(&x));
        }
        let tp = Measure1D::two_point(1.0).unwrap();
        assert!((0..100).all(|_| tp.sample(&mut rng).abs() == 1.0));
    }

    #[test]
    fn scaled_pushforward() {
        let tri = triangular().scaled(3.0).unwrap();
        assert_abs_diff_eq!(tri.integrate(|_| 1.0, &[]).value, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(tri.tail(1.5), triangular().tail(0.5), epsilon = 1e-15);
    }
}
