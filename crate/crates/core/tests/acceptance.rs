//! Acceptance suite: one `PASS`/`FAIL` line per criterion, nonzero exit if
//! any criterion fails. Tolerances and runtime limits are pinned here.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use cvxtau::concentration::{
    deviation_scalar_slack, verify_corr1, verify_corr2, ConvexFamily, ConvexSet, MonteCarlo, ProductMeasure,
};
use cvxtau::convexfn::ConvexSampler;
use cvxtau::infconv::{default_probe_points, infconv_sorted, phi0, GridMethod};
use cvxtau::poincare::{certify_b_implies_a, cp_lower_bound, default_u_grid};
use cvxtau::tau::{
    certify_a_implies_c, certify_c_implies_b, certify_tau, constant_check, lemma_bob_suite, lemma_bobex_suite,
    lemma_bound_suite, tau_constant, SuiteConfig,
};
use cvxtau::{infconv_exact, Cost, Execution, Measure1D};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20240917;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let elapsed = start.elapsed();
    o.detail = format!("{} [{:.2}s]", o.detail, elapsed.as_secs_f64());
    if let Some(limit) = limit {
        if elapsed > limit {
            o.pass = false;
            o.detail = format!("{} exceeds {}s", o.detail, limit.as_secs());
        }
    }
    o
}

fn stream(seed: u64, i: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    rng
}

/// The three measures of the theorem suites with their steps.
fn theorem_measures() -> Vec<(Measure1D, f64)> {
    vec![
        (Measure1D::uniform(1.0).unwrap(), 1.01),
        (Measure1D::two_point(1.0).unwrap(), 1.01),
        (Measure1D::exponential(1.0).unwrap(), 1.0),
    ]
}

fn cost_values() -> Outcome {
    let v = [phi0(1.0), phi0(2.0), phi0(-2.0), phi0(0.0)];
    outcome(v == [0.5, 1.5, 1.5, 0.0], format!("phi0(1) = {}, phi0(2) = {}", v[0], v[1]))
}

fn tail_ratio_frontier() -> Outcome {
    let mu = Measure1D::exponential(1.0).unwrap();
    let mut worst = 0f64;
    for h in [0.5, 1.0, 2.0] {
        let c = mu.lambda_star(h).unwrap();
        worst = worst.max((c.lambda_star - (-h).exp()).abs());
    }
    outcome(worst <= 1e-9, format!("max |lambda* - e^-h| = {worst:e}"))
}

fn muckenhoupt() -> Outcome {
    let be = Measure1D::exponential(1.0).unwrap().muckenhoupt_b().unwrap().value;
    let bu = Measure1D::uniform(1.0).unwrap().muckenhoupt_b().unwrap().value;
    let pass = (be - 1.0).abs() <= 1e-6 && (bu - 0.25).abs() <= 1e-6 && 4.0 <= 4.0 * be + 1e-6;
    outcome(pass, format!("B(exponential) = {be}, B(uniform) = {bu}, 4 <= 4B = {}", 4.0 * be))
}

fn engine_equivalence() -> Outcome {
    let sampler = ConvexSampler::bounded_below();
    let mut worst_ratio = 0f64;
    let mut brute_worst = 0f64;
    let mut failures = 0;
    for c in [1.0, 5.0, 17.0] {
        let cost = Cost::new(c);
        for i in 0..100u64 {
            let f = sampler.sample(&mut stream(SEED, i));
            let exact = infconv_exact(&f, &cost).unwrap();
            let (grid, probes) = default_probe_points(&f, &cost);
            let mut ys = probes.clone();
            ys.extend_from_slice(f.breakpoints());
            ys.sort_by(f64::total_cmp);
            ys.dedup();
            let vals: Vec<f64> = ys.iter().map(|&y| f.eval(y)).collect();
            let env = infconv_sorted(&ys, &vals, &probes, &cost, GridMethod::MonotoneSweep, Execution::Parallel);
            let bound = grid.step / c + 1e-9;
            let diff = probes.iter().zip(&env.values).map(|(&x, &g)| (exact.eval(x) - g).abs()).fold(0.0, f64::max);
            // Independent pairwise minimum on a sparse subset of the probes.
            let stride = probes.len() / 16;
            let brute = probes
                .iter()
                .step_by(stride.max(1))
                .map(|&x| {
                    let m = ys.iter().zip(&vals).map(|(&y, &v)| v + cost.eval(x - y)).fold(f64::INFINITY, f64::min);
                    (exact.eval(x) - m).abs()
                })
                .fold(0.0, f64::max);
            worst_ratio = worst_ratio.max(diff.max(brute) / bound);
            brute_worst = brute_worst.max(brute);
            if diff > bound || brute > bound {
                failures += 1;
            }
        }
    }
    outcome(
        failures == 0,
        format!("300 cases, {failures} over bound, worst diff/bound = {worst_ratio:.3e}, pairwise max = {brute_worst:.3e}"),
    )
}

fn lemma_bound() -> Outcome {
    let mut total = 0;
    let mut bad = 0;
    let mut worst = f64::NEG_INFINITY;
    for (c1, h) in [(2.0, 1.0), (17.0, 1.0), (17.0, 0.5)] {
        let checks = lemma_bound_suite(c1, h, 100, SEED, Execution::Parallel).unwrap();
        total += checks.len();
        bad += checks.iter().filter(|c| !c.report.passed()).count();
        worst = checks.iter().map(|c| c.report.max_violation).fold(worst, f64::max);
    }
    outcome(bad == 0, format!("{total} functions, {bad} violations, max excess = {worst:e}"))
}

fn a_implies_c() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for (mu, h) in theorem_measures() {
        let s = certify_a_implies_c(&mu, h, &SuiteConfig::new(200, SEED)).unwrap();
        let ok = s.passed() && s.max_error_bound <= 1e-6;
        pass &= ok;
        lines.push(format!(
            "{}: {} evaluated, {} violations, err <= {:.1e}",
            mu.id(),
            s.evaluated,
            s.violations,
            s.max_error_bound
        ));
    }
    outcome(pass, lines.join("; "))
}

fn scalar_constant() -> Outcome {
    let mut worst = f64::INFINITY;
    for i in 0..1000 {
        let lambda = 0.99 * i as f64 / 999.0;
        let (lhs, rhs) = constant_check(lambda);
        worst = worst.min((lhs - rhs) / rhs);
    }
    outcome(worst >= -1e-12, format!("min relative slack = {worst:.6}"))
}

fn c_implies_b() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for (mu, h) in theorem_measures() {
        let lambda = mu.lambda_star(h).unwrap().lambda_star;
        let s = certify_c_implies_b(&mu, tau_constant(h, lambda), 200, SEED, Execution::Parallel);
        pass &= s.violations() == 0;
        lines.push(format!("{}: {} checks, {} violations", mu.id(), s.checks.len(), s.violations()));
    }
    outcome(pass, lines.join("; "))
}

fn b_implies_a() -> Outcome {
    let exp = Measure1D::exponential(1.0).unwrap();
    let r = certify_b_implies_a(&exp, 4.0).unwrap();
    let expected = (-(32f64).sqrt()).exp();
    let mut pass = r.passed && (r.certificate.lambda_star - expected).abs() <= 1e-6;
    let mut lines = vec![format!("exponential: lambda*(sqrt 32) = {:.10}", r.certificate.lambda_star)];
    for mu in [Measure1D::two_point(1.0).unwrap(), Measure1D::uniform(1.0).unwrap()] {
        let est = cp_lower_bound(&mu, &default_u_grid(&mu), 200, SEED, Execution::Parallel);
        let r = certify_b_implies_a(&mu, est.cp_lower).unwrap();
        pass &= r.passed;
        lines.push(format!("{}: cp >= {:.4}, lambda* = {}", mu.id(), est.cp_lower, r.certificate.lambda_star));
    }
    outcome(pass, lines.join("; "))
}

fn lemmas_bob_bobex() -> Outcome {
    let mut checks = 0;
    let mut bad = 0;
    for (mu, h) in theorem_measures() {
        let lambda = mu.lambda_star(h).unwrap().lambda_star;
        for s in [
            lemma_bob_suite(&mu, h, lambda, 200, SEED, Execution::Parallel).unwrap(),
            lemma_bobex_suite(&mu, h, lambda, 200, SEED, Execution::Parallel).unwrap(),
        ] {
            checks += s.checks.len();
            bad += s.violations();
        }
    }
    outcome(bad == 0, format!("{checks} checks over 3 measures, {bad} violations"))
}

fn two_level_enlargement() -> Outcome {
    let mc = MonteCarlo { samples: 100_000, seed: SEED, exec: Execution::Parallel };
    let t_grid = [0.5, 1.0, 2.0, 4.0];
    let mut lines = Vec::new();
    let mut pass = true;
    let cases = [
        (
            ProductMeasure::iid(Measure1D::exponential(1.0).unwrap(), 16).unwrap(),
            ConvexSet::HalfSpace { a: vec![0.25; 16], c: 0.0 },
            1.0,
            (-1f64).exp(),
        ),
        (
            ProductMeasure::iid(Measure1D::uniform(1.0).unwrap(), 8).unwrap(),
            ConvexSet::L2Ball { center: vec![0.0; 8], radius: 1.0 },
            1.01,
            0.0,
        ),
    ];
    for (pm, set, h, lambda) in cases {
        let start = Instant::now();
        let r = verify_corr1(&pm, &set, h, lambda, &t_grid, &mc).unwrap();
        let secs = start.elapsed().as_secs_f64();
        pass &= r.passed() && secs < 60.0;
        let slack = r.rows.iter().map(|row| row.empirical - row.bound + row.radius).fold(f64::INFINITY, f64::min);
        lines.push(format!("{} in dim {}: min slack {:.4} ({secs:.2}s)", set.family(), pm.dim(), slack));
    }
    outcome(pass, lines.join("; "))
}

fn deviation() -> Outcome {
    let mc = MonteCarlo { samples: 100_000, seed: SEED, exec: Execution::Parallel };
    let t_grid = [1.0, 2.0, 4.0, 8.0];
    let exp16 = ProductMeasure::iid(Measure1D::exponential(1.0).unwrap(), 16).unwrap();
    let uni16 = ProductMeasure::iid(Measure1D::uniform(1.0).unwrap(), 16).unwrap();
    let max = verify_corr2(&exp16, &ConvexFamily::MaxCoordinate, 1.0, 1.0, 1.0, (-1f64).exp(), &t_grid, &mc).unwrap();
    let lin = verify_corr2(&uni16, &ConvexFamily::Linear { w: vec![0.25; 16] }, 1.0, 0.25, 1.01, 0.0, &t_grid, &mc)
        .unwrap();
    let branches: Vec<&str> = lin.rows.iter().map(|r| r.branch).collect();
    let switches = branches.windows(2).any(|w| w[0] != w[1]);

    let axis = |i: usize| 0.01 * (1000f64).powf(i as f64 / 49.0);
    let mut scalar_worst = f64::INFINITY;
    for i in 0..50 {
        for j in 0..50 {
            for k in 0..50 {
                scalar_worst = scalar_worst.min(deviation_scalar_slack(axis(i), axis(j), axis(k)));
            }
        }
    }
    let pass = max.passed() && lin.passed() && switches && scalar_worst >= -1e-12;
    outcome(
        pass,
        format!(
            "max_coordinate {}, linear {} (branches {:?}), scalar min slack {:e} on 50^3 grid",
            if max.passed() { "ok" } else { "fails" },
            if lin.passed() { "ok" } else { "fails" },
            branches,
            scalar_worst
        ),
    )
}

fn negative_control() -> Outcome {
    let mu = Measure1D::exponential(1.0).unwrap();
    let c_tau = tau_constant(1.0, (-1f64).exp());
    let s = certify_tau(&mu, 1e-3 * c_tau, &SuiteConfig::new(50, SEED));
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/negative_control.toml");
    let status = Command::new(env!("CARGO_BIN_EXE_cvxtau"))
        .args(["tau", "--config", config, "--seed", "7", "--quiet", "--out"])
        .arg(std::env::temp_dir().join(format!("cvxtau-negative-{}.txt", std::process::id())))
        .status()
        .expect("binary runs");
    let code = status.code();
    outcome(
        s.violations > 0 && code == Some(5),
        format!("library: {} violations of {}, cli exit code {:?}", s.violations, s.evaluated, code),
    )
}

/// Name, runtime limit in seconds, check.
type Criterion = (&'static str, Option<u64>, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 13] = [
        ("cost function values", None, cost_values),
        ("tail-ratio frontier of the exponential", Some(1), tail_ratio_frontier),
        ("muckenhoupt constants", None, muckenhoupt),
        ("exact vs grid inf-convolution", Some(30), engine_equivalence),
        ("slope-bounded inf-convolution bound", None, lemma_bound),
        ("tail ratio implies tau property", Some(120), a_implies_c),
        ("scalar constant check", None, scalar_constant),
        ("tau property implies poincare", None, c_implies_b),
        ("poincare implies tail ratio", None, b_implies_a),
        ("half-line and exponential lemmas", None, lemmas_bob_bobex),
        ("two-level enlargement monte carlo", Some(120), two_level_enlargement),
        ("deviation monte carlo", None, deviation),
        ("negative control", None, negative_control),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let o = timed(limit.map(Duration::from_secs), run);
        println!("criterion {:>2} {} {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
