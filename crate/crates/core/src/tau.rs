//! The convex exponential functional
//! `(int e^{f □ φ} dmu)(int e^{-f} dmu)` and randomized certificates for the
//! implications around it.

use serde::Serialize;

use crate::convexfn::{ConvexSampler, PLConvex};
use crate::error::{Error, Result};
use crate::infconv::{default_probe_points, infconv_exact, lemma_bound_certificate, Cost, LemmaBoundReport};
use crate::measure::Measure1D;
use crate::par::{self, Execution};
use crate::poincare::{dirichlet_energy, trial_rng, variance};
use crate::quadrature::Integral;

/// `17 h / (1 - lambda)^2`.
pub fn tau_constant(h: f64, lambda: f64) -> f64 {
    17.0 * h / ((1.0 - lambda) * (1.0 - lambda))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauReport {
    pub measure_id: String,
    pub function_id: String,
    pub function: PLConvex,
    pub c_tau: f64,
    pub envelope_integral: Integral,
    pub dual_integral: Integral,
    pub lhs_product: f64,
    pub margin: f64,
    pub error_bound: f64,
}

impl TauReport {
    /// True when the product exceeds 1 by more than the quadrature error.
    pub fn violated(&self) -> bool {
        self.margin < -self.error_bound
    }
}

fn product(a: Integral, b: Integral) -> (f64, f64) {
    let value = a.value * b.value;
    let error = a.error * b.value.abs() + b.error * a.value.abs() + a.error * b.error;
    (value, error)
}

/// `int g dmu / int 1 dmu` with both integrals on the same partition, so
/// that quadrature error in the total mass cancels.
fn normalized<G: Fn(f64) -> f64>(mu: &Measure1D, g: G, breaks: &[f64]) -> Integral {
    let num = mu.integrate(g, breaks);
    let mass = mu.integrate(|_| 1.0, breaks);
    let value = num.value / mass.value;
    Integral { value, error: (num.error + value.abs() * mass.error) / mass.value }
}

/// Evaluates the functional for `f` against `φ₀(·/C)`.
pub fn tau_functional(mu: &Measure1D, f: &PLConvex, cost: &Cost) -> Result<TauReport> {
    if !f.is_bounded_below() {
        return Err(Error::InvalidFunction("f must be bounded below".into()));
    }
    let env = infconv_exact(f, cost)?;
    let (left, right) = env.asymptotic_slopes();
    mu.check_exponential_moment(right.max(-left).max(0.0))?;
    let mut breaks = env.breaks();
    breaks.extend_from_slice(f.breakpoints());
    let a = normalized(mu, |x| env.eval(x).exp(), &breaks);
    let b = normalized(mu, |x| (-f.eval(x)).exp(), f.breakpoints());
    if !(a.value.is_finite() && b.value.is_finite()) {
        return Err(Error::DivergentIntegral(format!("non-finite factor for {}", mu.id())));
    }
    let (lhs, error) = product(a, b);
    Ok(TauReport {
        measure_id: mu.id(),
        function_id: String::new(),
        function: f.clone(),
        c_tau: cost.scale,
        envelope_integral: a,
        dual_integral: b,
        lhs_product: lhs,
        margin: 1.0 - lhs,
        error_bound: error,
    })
}

/// Side checks of the proof chain for one function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauDiagnostics {
    /// `4 * lhs <= (int e^{f□φ} + e^{-f})^2`.
    pub am_gm: bool,
    /// Slope truncation at `1/C` does not decrease the functional.
    pub truncation: bool,
    /// `lhs >= exp(-int (f - f□φ) dmu)`.
    pub lower_sanity: bool,
}

pub fn tau_diagnostics(mu: &Measure1D, f: &PLConvex, cost: &Cost) -> Result<TauDiagnostics> {
    let r = tau_functional(mu, f, cost)?;
    let tol = 1e-9 * r.lhs_product.max(1.0) + 4.0 * r.error_bound;
    let sum = r.envelope_integral.value + r.dual_integral.value;
    let am_gm = 4.0 * r.lhs_product <= sum * sum + tol;
    let g = f.truncate_slopes(cost.lipschitz())?.g;
    let rg = tau_functional(mu, &g, cost)?;
    let truncation = rg.lhs_product + tol + rg.error_bound >= r.lhs_product;
    let env = infconv_exact(f, cost)?;
    let mut breaks = env.breaks();
    breaks.extend_from_slice(f.breakpoints());
    let gap = mu.integrate(|x| f.eval(x) - env.eval(x), &breaks);
    let lower_sanity = r.lhs_product + tol >= (-gap.value - gap.error).exp();
    Ok(TauDiagnostics { am_gm, truncation, lower_sanity })
}

/// Settings for randomized suites.
#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub trials: usize,
    pub seed: u64,
    /// Number of worst random functions used as hill-climbing starts.
    pub adversarial_starts: usize,
    /// Evaluation budget per hill climb.
    pub adversarial_steps: usize,
    pub sampler: ConvexSampler,
    pub exec: Execution,
}

impl SuiteConfig {
    pub fn new(trials: usize, seed: u64) -> Self {
        SuiteConfig {
            trials,
            seed,
            adversarial_starts: 8,
            adversarial_steps: 200,
            sampler: ConvexSampler::bounded_below(),
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauSuiteSummary {
    pub measure_id: String,
    pub c_tau: f64,
    pub evaluated: usize,
    pub violations: usize,
    pub divergent: usize,
    pub worst_margin: f64,
    pub max_error_bound: f64,
    /// Worst report overall (a violation if there is one).
    pub worst: Option<TauReport>,
    pub first_divergence: Option<String>,
    pub reports: Vec<TauReport>,
}

impl TauSuiteSummary {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.divergent == 0
    }
}

/// Checks that `mu` has the convex exponential property with
/// `C_τ = 17 h / (1 - lambda*(h))^2`.
pub fn certify_a_implies_c(mu: &Measure1D, h: f64, cfg: &SuiteConfig) -> Result<TauSuiteSummary> {
    let cert = mu.lambda_star(h)?;
    if cert.lambda_star >= 1.0 {
        return Err(Error::NotInClass { ratio: cert.lambda_star, lambda: 1.0, witness: cert.witness });
    }
    Ok(certify_tau(mu, tau_constant(h, cert.lambda_star), cfg))
}

/// Random and adversarial search for functions breaking the functional at
/// the given constant.
pub fn certify_tau(mu: &Measure1D, c_tau: f64, cfg: &SuiteConfig) -> TauSuiteSummary {
    let cost = Cost::new(c_tau);
    let mut sampler = cfg.sampler.clone();
    let rate = mu.tail_decay_rate();
    // Keep the integrals finite when the cost is steep enough to pass the
    // measure's exponential moment.
    if cost.lipschitz() >= 0.5 * rate {
        let cap = 0.5 * rate;
        sampler.max_abs_slope = Some(sampler.max_abs_slope.map_or(cap, |c| c.min(cap)));
    }
    let random = par::map_indexed(cfg.exec, cfg.trials, |i| {
        let f = sampler.sample(&mut trial_rng(cfg.seed, i as u64));
        tau_functional(mu, &f, &cost).map(|mut r| {
            r.function_id = format!("random#{i}");
            r
        })
    });

    let mut starts: Vec<&TauReport> = random.iter().filter_map(|r| r.as_ref().ok()).collect();
    starts.sort_by(|a, b| b.lhs_product.total_cmp(&a.lhs_product));
    starts.truncate(cfg.adversarial_starts);
    let starts: Vec<TauReport> = starts.into_iter().cloned().collect();
    let climbed = par::map_slice(cfg.exec, &starts, |r| {
        hill_climb(mu, &cost, r, cfg.adversarial_steps, sampler.max_abs_slope)
    });

    let mut summary = TauSuiteSummary {
        measure_id: mu.id(),
        c_tau,
        evaluated: 0,
        violations: 0,
        divergent: 0,
        worst_margin: f64::INFINITY,
        max_error_bound: 0.0,
        worst: None,
        first_divergence: None,
        reports: Vec::with_capacity(random.len() + climbed.len()),
    };
    for r in random.into_iter().chain(climbed.into_iter().map(Ok)) {
        summary.evaluated += 1;
        match r {
            Ok(r) => {
                summary.max_error_bound = summary.max_error_bound.max(r.error_bound);
                if r.violated() {
                    summary.violations += 1;
                }
                let worse = match &summary.worst {
                    None => true,
                    Some(w) => (r.violated(), -r.margin) > (w.violated(), -w.margin),
                };
                summary.worst_margin = summary.worst_margin.min(r.margin);
                if worse {
                    summary.worst = Some(r.clone());
                }
                summary.reports.push(r);
            }
            Err(e) => {
                summary.divergent += 1;
                summary.first_divergence.get_or_insert_with(|| e.to_string());
            }
        }
    }
    summary
}

/// Coordinate ascent of the functional over breakpoints and slopes.
fn hill_climb(mu: &Measure1D, cost: &Cost, start: &TauReport, budget: usize, slope_cap: Option<f64>) -> TauReport {
    let f = &start.function;
    let mut bps = f.breakpoints().to_vec();
    let mut slopes = f.slopes().to_vec();
    let anchor = f.eval(0.0);
    let mut best = start.clone();
    best.function_id = format!("{}+climb", start.function_id);
    let nb = bps.len();
    let dims = nb + slopes.len();
    let mut delta: Vec<f64> = (0..dims)
        .map(|i| if i < nb { 0.25 } else { 0.25 * slopes[i - nb].abs().max(0.1) })
        .collect();
    let mut used = 0;
    let mut stalled = 0;
    let mut coord = 0;
    while used < budget && stalled < dims && delta.iter().any(|&d| d > 1e-6) {
        let mut improved = false;
        for sign in [1.0, -1.0] {
            if used >= budget {
                break;
            }
            let (mut b2, mut s2) = (bps.clone(), slopes.clone());
            if coord < nb {
                b2[coord] += sign * delta[coord];
            } else {
                s2[coord - nb] += sign * delta[coord];
            }
            let valid = b2.windows(2).all(|w| w[0] < w[1])
                && s2.windows(2).all(|w| w[0] < w[1])
                && s2[0] <= 0.0
                && *s2.last().unwrap() >= 0.0
                && slope_cap.is_none_or(|c| s2.iter().all(|s| s.abs() <= c));
            if !valid {
                continue;
            }
            let Ok(g) = PLConvex::new(b2.clone(), s2.clone(), (0.0, anchor)) else { continue };
            used += 1;
            if let Ok(r) = tau_functional(mu, &g, cost) {
                if r.lhs_product > best.lhs_product {
                    best = TauReport { function_id: best.function_id.clone(), ..r };
                    bps = b2;
                    slopes = s2;
                    improved = true;
                    break;
                }
            }
        }
        if improved {
            stalled = 0;
        } else {
            delta[coord] *= 0.5;
            stalled += 1;
        }
        coord = (coord + 1) % dims;
    }
    best
}

/// `2 C (1 - exp(-1/(2 C)))`.
pub fn alpha(c1: f64) -> f64 {
    -2.0 * c1 * (-0.5 / c1).exp_m1()
}

/// `(C₁ α(C₁) / 2, 8 / (1 - lambda)^2)` with `C₁ = 17 / (1 - lambda)^2`.
pub fn constant_check(lambda: f64) -> (f64, f64) {
    let q = (1.0 - lambda) * (1.0 - lambda);
    let c1 = 17.0 / q;
    (0.5 * c1 * alpha(c1), 8.0 / q)
}

/// Both sides of one lemma instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaCheck {
    pub function_id: String,
    pub lhs: Integral,
    pub rhs: Integral,
    pub passed: bool,
}

impl LemmaCheck {
    const REL_TOL: f64 = 1e-8;

    fn new(function_id: String, lhs: Integral, rhs: Integral) -> Self {
        let slack = Self::REL_TOL * lhs.value.abs().max(rhs.value.abs()) + lhs.error + rhs.error + 1e-300;
        LemmaCheck { function_id, passed: lhs.value <= rhs.value + slack, lhs, rhs }
    }
}

fn require_class(mu: &Measure1D, h: f64, lambda: f64) -> Result<()> {
    let c = mu.lambda_star(h)?;
    if c.lambda_star > lambda + 1e-12 {
        return Err(Error::NotInClass { ratio: c.lambda_star, lambda, witness: c.witness });
    }
    Ok(())
}

/// Nondecreasing piecewise-linear `g` with `g = 0` on `(-inf, 0]`,
/// interpolating `knots` and extended linearly past the last one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ramp {
    knots: Vec<(f64, f64)>,
}

impl Ramp {
    pub fn new(mut knots: Vec<(f64, f64)>) -> Result<Self> {
        knots.insert(0, (0.0, 0.0));
        let ok = knots.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 >= w[0].1) && knots.iter().all(|k| k.0.is_finite() && k.1.is_finite());
        if !ok {
            return Err(Error::InvalidFunction("ramp knots must increase in position and be nondecreasing".into()));
        }
        Ok(Ramp { knots })
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let k = &self.knots;
        if k.len() == 1 {
            return 0.0;
        }
        let i = k.partition_point(|p| p.0 < x).clamp(1, k.len() - 1);
        let (a, b) = (k[i - 1], k[i]);
        a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }
}

/// `int g^2 dmu+ <= (2/(1-lambda))^2 int (g(x) - g(x-h))^2 dmu+(x)`, where
/// `mu+` is `mu` restricted to `[0, inf)` and normalized.
pub fn certify_lemma_bob(mu: &Measure1D, h: f64, lambda: f64, g: &Ramp, function_id: &str) -> Result<LemmaCheck> {
    require_class(mu, h, lambda)?;
    let norm = mu.tail(0.0);
    let mut breaks: Vec<f64> = g.knots().iter().map(|k| k.0).collect();
    breaks.extend(g.knots().iter().map(|k| k.0 + h));
    let lhs = mu.integrate_over(|x| g.eval(x).powi(2), &breaks, 0.0, f64::INFINITY, true);
    let diff = mu.integrate_over(|x| (g.eval(x) - g.eval(x - h)).powi(2), &breaks, 0.0, f64::INFINITY, true);
    let k = (2.0 / (1.0 - lambda)).powi(2);
    let scale = |i: Integral, c: f64| Integral { value: i.value * c, error: i.error * c };
    Ok(LemmaCheck::new(function_id.to_string(), scale(lhs, 1.0 / norm), scale(diff, k / norm)))
}

/// `int (e^{f/2} - e^{-f/2})^2 dmu <= 8/(1-lambda)^2 int e^f (Df)^2 dmu`
/// for convex `f` with `f(0) = 0`.
pub fn certify_lemma_bobex(mu: &Measure1D, h: f64, lambda: f64, f: &PLConvex, function_id: &str) -> Result<LemmaCheck> {
    if f.eval(0.0).abs() > 1e-12 {
        return Err(Error::InvalidFunction(format!("f(0) = {} but must vanish", f.eval(0.0))));
    }
    require_class(mu, h, lambda)?;
    mu.check_exponential_moment(f.max_abs_slope())?;
    let d = f.discrete_gradient(h);
    let mut breaks = d.breaks();
    breaks.extend_from_slice(f.breakpoints());
    let lhs = mu.integrate(
        |x| {
            let v = f.eval(x);
            let s = (0.5 * v).exp() - (-0.5 * v).exp();
            s * s
        },
        &breaks,
    );
    let k = 8.0 / ((1.0 - lambda) * (1.0 - lambda));
    let rhs = mu.integrate(
        |x| {
            let dv = d.eval(x);
            k * f.eval(x).exp() * dv * dv
        },
        &breaks,
    );
    Ok(LemmaCheck::new(function_id.to_string(), lhs, rhs))
}

/// Outcome of a lemma suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaSuite {
    pub name: String,
    pub measure_id: String,
    pub checks: Vec<LemmaCheck>,
    pub errors: Vec<String>,
}

impl LemmaSuite {
    pub fn violations(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count() + self.errors.len()
    }
}

/// Random nondecreasing ramps plus the documented examples.
pub fn lemma_bob_suite(mu: &Measure1D, h: f64, lambda: f64, trials: usize, seed: u64, exec: Execution) -> Result<LemmaSuite> {
    use rand::Rng;
    require_class(mu, h, lambda)?;
    let span = mu.upper_quantile(1e-6).clamp(1e-3, 20.0);
    let mut fixed = vec![
        ("zero".to_string(), Ramp::new(vec![])?),
        ("identity".to_string(), Ramp::new(vec![(1.0, 1.0)])?),
        ("shifted_hinge".to_string(), Ramp::new(vec![(2.0, 0.0), (3.0, 1.0)])?),
    ];
    let random = par::map_indexed(exec, trials, |i| {
        let mut rng = trial_rng(seed, i as u64);
        let n = rng.random_range(1..=8);
        let mut xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..span)).filter(|&x| x > 0.0).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let mut v = 0.0;
        let knots = xs
            .into_iter()
            .map(|x| {
                // Flat stretches are as common as rises.
                if rng.random::<f64>() < 0.5 {
                    v += rng.random_range(0.0..2.0);
                }
                (x, v)
            })
            .collect();
        (format!("ramp#{i}"), Ramp::new(knots).expect("sorted knots"))
    });
    fixed.extend(random);
    let results = par::map_slice(exec, &fixed, |(id, g)| certify_lemma_bob(mu, h, lambda, g, id));
    Ok(collect_suite("lemma_bob", mu, results))
}

/// Random convex `f` with `f(0) = 0` in four shapes: as drawn, reflected,
/// nondecreasing, and nonincreasing.
pub fn lemma_bobex_suite(mu: &Measure1D, h: f64, lambda: f64, trials: usize, seed: u64, exec: Execution) -> Result<LemmaSuite> {
    require_class(mu, h, lambda)?;
    let rate = mu.tail_decay_rate();
    let cap = if rate.is_finite() { 0.45 * rate } else { 4.0 };
    let span = mu.upper_quantile(1e-6).clamp(1e-3, 5.0);
    let sampler = ConvexSampler { pin_origin: true, max_abs_slope: Some(cap), span, ..ConvexSampler::default() };
    let mut fns = vec![("zero".to_string(), PLConvex::constant(0.0)), ("abs".to_string(), PLConvex::abs_scaled(cap.min(1.0))?)];
    fns.push(("two_slope".to_string(), PLConvex::new(vec![0.0], vec![-0.05, 0.1], (0.0, 0.0))?));
    let random = par::map_indexed(exec, trials, |i| {
        let f = sampler.sample(&mut trial_rng(seed, i as u64));
        let up = monotone_part(&f);
        let down = monotone_part(&f.reflect()).reflect();
        vec![
            (format!("convex#{i}"), f.clone()),
            (format!("reflected#{i}"), f.reflect()),
            (format!("nondecreasing#{i}"), up),
            (format!("nonincreasing#{i}"), down),
        ]
    });
    fns.extend(random.into_iter().flatten());
    let results = par::map_slice(exec, &fns, |(id, f)| certify_lemma_bobex(mu, h, lambda, f, id));
    Ok(collect_suite("lemma_bobex", mu, results))
}

/// `f` with negative slopes replaced by 0, still vanishing at 0.
fn monotone_part(f: &PLConvex) -> PLConvex {
    let slopes = f.slopes().iter().map(|s| s.max(0.0)).collect();
    PLConvex::new(f.breakpoints().to_vec(), slopes, (0.0, 0.0)).expect("clamped slopes stay sorted")
}

fn collect_suite(name: &str, mu: &Measure1D, results: Vec<Result<LemmaCheck>>) -> LemmaSuite {
    let mut suite = LemmaSuite { name: name.into(), measure_id: mu.id(), checks: Vec::new(), errors: Vec::new() };
    for r in results {
        match r {
            Ok(c) => suite.checks.push(c),
            Err(e) => suite.errors.push(e.to_string()),
        }
    }
    suite
}

/// One function checked against `(f □ φ₁) <= f - C₁/2 (Df)^2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub function_id: String,
    pub function: PLConvex,
    pub report: LemmaBoundReport,
}

/// Random `f` with `|f'| <= 1/(C₁ h)` (a quarter exactly at the cap), plus
/// the zero function and the extremal linear one.
pub fn lemma_bound_suite(c1: f64, h: f64, trials: usize, seed: u64, exec: Execution) -> Result<Vec<BoundCheck>> {
    let cap = 1.0 / (c1 * h);
    let sampler = ConvexSampler { max_abs_slope: Some(cap), ..ConvexSampler::default() };
    let mut fns = vec![("zero".to_string(), PLConvex::constant(0.0)), ("linear_at_cap".to_string(), PLConvex::linear(cap, 0.0))];
    fns.extend((0..trials).map(|i| (format!("random#{i}"), sampler.sample(&mut trial_rng(seed, i as u64)))));
    let checks = par::map_slice(exec, &fns, |(id, f)| {
        let (_, probes) = default_probe_points(f, &Cost::weighted(h, 1.0 / c1));
        lemma_bound_certificate(f, c1, h, &probes).map(|report| BoundCheck { function_id: id.clone(), function: f.clone(), report })
    });
    checks.into_iter().collect()
}

/// One `Var <= (C_τ^2 / 2) * energy` comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoincareCheck {
    pub function_id: String,
    pub variance: f64,
    pub energy: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoincareSuite {
    pub measure_id: String,
    pub c_tau: f64,
    pub cp: f64,
    pub checks: Vec<PoincareCheck>,
}

impl PoincareSuite {
    pub fn violations(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }
}

/// `Var_mu f <= (C_τ^2 / 2) int f'^2 dmu` on random convex `f`.
pub fn certify_c_implies_b(mu: &Measure1D, c_tau: f64, trials: usize, seed: u64, exec: Execution) -> PoincareSuite {
    let cp = 0.5 * c_tau * c_tau;
    let span = mu.upper_quantile(1e-6).clamp(1e-3, 10.0);
    let sampler = ConvexSampler { span, ..ConvexSampler::default() };
    let mut fns = vec![
        ("constant".to_string(), PLConvex::constant(1.0)),
        ("identity".to_string(), PLConvex::linear(1.0, 0.0)),
        ("abs".to_string(), PLConvex::abs_scaled(1.0).expect("valid")),
    ];
    fns.extend((0..trials).map(|i| (format!("random#{i}"), sampler.sample(&mut trial_rng(seed, i as u64)))));
    let checks = par::map_slice(exec, &fns, |(id, f)| {
        let var = variance(mu, f);
        let energy = dirichlet_energy(mu, f);
        let bound = cp * energy;
        PoincareCheck {
            function_id: id.clone(),
            variance: var.value,
            energy,
            bound,
            passed: var.value <= bound + 1e-8 + var.error,
        }
    });
    PoincareSuite { measure_id: mu.id(), c_tau, cp, checks }
}
