//! Command-line front end.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::concentration::{self, ConvexFamily, MonteCarlo, ProductMeasure};
use crate::config::{resolve_seed, ConfigError, Experiment, RunConfig, TauSuite};
use crate::error::Error;
use crate::measure::Measure1D;
use crate::par::Execution;
use crate::poincare;
use crate::report::{num, yes_no, Format, Report, Table};
use crate::tau::{self, tau_constant, SuiteConfig};

#[derive(Debug, Parser)]
#[command(name = "cvxtau", version, about = "Certify convex infimum-convolution, Poincaré and concentration inequalities for symmetric measures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for randomized commands; overrides `seed` in the config.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Suppress the verdict line on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Tail ratios, Muckenhoupt constants and derived constants of a measure.
    Analyze,
    /// Randomized certificates for the convex exponential property and its lemmas.
    Tau,
    /// Convex Poincaré lower bounds and the tail-ratio certificate they imply.
    Poincare,
    /// Monte Carlo concentration experiments on product measures.
    Concentrate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Tau => "tau",
            Command::Poincare => "poincare",
            Command::Concentrate => "concentrate",
        }
    }
}

pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const MEASURE: i32 = 3;
    pub const DEGENERATE: i32 = 4;
    pub const VIOLATION: i32 = 5;
}

/// A run that could not produce a verdict.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure { code: exit::CONFIG, message: format!("config error: {}", e.0) }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidMeasure(_) | Error::NotSymmetric | Error::NoDensity | Error::NotInClass { .. } => exit::MEASURE,
            Error::EmptyBase | Error::DivergentIntegral(_) | Error::UnboundedBelow(_) => exit::DEGENERATE,
            _ => exit::CONFIG,
        };
        Failure { code, message: e.to_string() }
    }
}

/// Report plus whether any certificate failed.
pub struct Outcome {
    pub report: Report,
    pub violations: usize,
    pub summary: String,
}

/// Runs the command and writes its output; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(outcome) => {
            let text = outcome.report.render(cli.format);
            if let Err(e) = emit(cli, &text) {
                eprintln!("error: cannot write report: {e}");
                return exit::CONFIG;
            }
            if !cli.quiet {
                eprintln!("{}: {}", cli.command.name(), outcome.summary);
            }
            if outcome.violations > 0 {
                exit::VIOLATION
            } else {
                exit::OK
            }
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn emit(cli: &Cli, text: &str) -> std::io::Result<()> {
    match &cli.out {
        Some(path) => std::fs::write(path, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<Outcome, Failure> {
    let path = cli.config.as_ref().ok_or_else(|| ConfigError("--config PATH is required".into()))?;
    let cfg = RunConfig::load(path)?;
    let mu = cfg.measure_spec()?.build()??;
    if !mu.is_symmetric() {
        return Err(Error::NotSymmetric.into());
    }
    match cli.command {
        Command::Analyze => cmd_analyze(&cfg, &mu),
        Command::Tau => cmd_tau(&cfg, &mu, resolve_seed(cli.seed, &cfg)?),
        Command::Poincare => cmd_poincare(&cfg, &mu, resolve_seed(cli.seed, &cfg)?),
        Command::Concentrate => cmd_concentrate(&cfg, &mu, resolve_seed(cli.seed, &cfg)?),
    }
}

#[derive(Serialize)]
struct TailRow {
    measure_id: String,
    h: f64,
    lambda_star: f64,
    witness: f64,
    attained: bool,
    c_tau: f64,
    c_p: f64,
}

#[derive(Serialize)]
struct FunctionalRow {
    measure_id: String,
    name: &'static str,
    value: Option<f64>,
    witness: Option<f64>,
    note: Option<String>,
}

pub fn cmd_analyze(cfg: &RunConfig, mu: &Measure1D) -> Result<Outcome, Failure> {
    let mut report = Report::new("analyze");
    let mut tails = Table::new(format!("tail ratio of {}", mu.id()), &["h", "lambda_star", "witness", "attained", "c_tau", "c_p"]);
    for &h in &cfg.analyze.h {
        if !(h > 0.0 && h.is_finite()) {
            return Err(ConfigError(format!("analyze.h: step {h} must be positive")).into());
        }
        let c = mu.lambda_star(h)?;
        let c_tau = if c.lambda_star < 1.0 { tau_constant(h, c.lambda_star) } else { f64::INFINITY };
        let row = TailRow {
            measure_id: mu.id(),
            h,
            lambda_star: c.lambda_star,
            witness: c.witness,
            attained: c.attained,
            c_tau,
            c_p: 0.5 * c_tau * c_tau,
        };
        tails.push(vec![num(h), num(row.lambda_star), num(row.witness), row.attained.to_string(), num(row.c_tau), num(row.c_p)]);
        report.record("tail_ratio", &row);
    }
    report.table(tails);
    let mut funcs = Table::new("tail functionals", &["name", "value", "witness", "note"]);
    for (name, r) in [("muckenhoupt_b", mu.muckenhoupt_b()), ("log_sobolev_b_prime", mu.bobkov_goetze_bprime())] {
        let row = match r {
            Ok(t) => FunctionalRow { measure_id: mu.id(), name, value: Some(t.value), witness: Some(t.witness), note: None },
            Err(e) => FunctionalRow { measure_id: mu.id(), name, value: None, witness: None, note: Some(e.to_string()) },
        };
        funcs.push(vec![
            name.into(),
            row.value.map_or("n/a".into(), num),
            row.witness.map_or("n/a".into(), num),
            row.note.clone().unwrap_or_default(),
        ]);
        report.record("tail_functional", &row);
    }
    report.table(funcs);
    let summary = format!("{} analyzed at {} step(s)", mu.id(), cfg.analyze.h.len());
    Ok(Outcome { report, violations: 0, summary })
}

#[derive(Serialize)]
struct SuiteRow {
    suite: &'static str,
    measure_id: String,
    evaluated: usize,
    violations: usize,
    /// Largest `lhs - rhs` style excess (negative means slack).
    worst_excess: Option<f64>,
    worst_id: Option<String>,
}

pub fn cmd_tau(cfg: &RunConfig, mu: &Measure1D, seed: u64) -> Result<Outcome, Failure> {
    let t = &cfg.tau;
    if !(t.h > 0.0 && t.c_tau_scale > 0.0) {
        return Err(ConfigError("tau.h and tau.c_tau_scale must be positive".into()).into());
    }
    let cert = mu.lambda_star(t.h)?;
    let lambda = match t.lambda {
        Some(l) if l < cert.lambda_star => {
            return Err(Error::NotInClass { ratio: cert.lambda_star, lambda: l, witness: cert.witness }.into());
        }
        Some(l) => l,
        None => cert.lambda_star,
    };
    if lambda >= 1.0 && t.c_tau.is_none() {
        return Err(Error::NotInClass { ratio: cert.lambda_star, lambda: 1.0, witness: cert.witness }.into());
    }
    let c_tau = t.c_tau.unwrap_or_else(|| tau_constant(t.h, lambda)) * t.c_tau_scale;
    let exec = Execution::default();

    let mut report = Report::new("tau");
    let mut suites = Table::new(
        format!("{} with h={} lambda={} C_tau={}", mu.id(), num(t.h), num(lambda), num(c_tau)),
        &["suite", "evaluated", "violations", "worst_excess", "worst_id"],
    );
    let mut witnesses = Table::new("worst violation per suite", &["suite", "id", "excess", "function"]);
    let mut total_violations = 0;
    let mut push = |report: &mut Report, row: SuiteRow| {
        suites.push(vec![
            row.suite.into(),
            row.evaluated.to_string(),
            row.violations.to_string(),
            row.worst_excess.map_or("n/a".into(), num),
            row.worst_id.clone().unwrap_or_default(),
        ]);
        total_violations += row.violations;
        report.record("suite", &row);
    };

    for &suite in &t.suites {
        if t.trials == 0 {
            push(&mut report, SuiteRow { suite: suite.name(), measure_id: mu.id(), evaluated: 0, violations: 0, worst_excess: None, worst_id: None });
            continue;
        }
        let row = match suite {
            TauSuite::AImpliesC => {
                let sc = SuiteConfig { adversarial_starts: t.adversarial_starts, adversarial_steps: t.adversarial_steps, exec, ..SuiteConfig::new(t.trials, seed) };
                let s = tau::certify_tau(mu, c_tau, &sc);
                for r in &s.reports {
                    report.record("tau_trial", r);
                }
                if let Some(w) = s.worst.as_ref().filter(|w| w.violated()) {
                    witnesses.push(vec![suite.name().into(), w.function_id.clone(), num(-w.margin), json(&w.function)]);
                    report.record("witness", w);
                }
                if let Some(msg) = &s.first_divergence {
                    witnesses.push(vec![suite.name().into(), "divergent".into(), "inf".into(), msg.clone()]);
                }
                SuiteRow {
                    suite: suite.name(),
                    measure_id: mu.id(),
                    evaluated: s.evaluated,
                    violations: s.violations + s.divergent,
                    worst_excess: s.worst.as_ref().map(|w| -w.margin),
                    worst_id: s.worst.as_ref().map(|w| w.function_id.clone()),
                }
            }
            TauSuite::LemmaBob | TauSuite::LemmaBobex => {
                let s = if suite == TauSuite::LemmaBob {
                    tau::lemma_bob_suite(mu, t.h, lambda, t.trials, seed, exec)?
                } else {
                    tau::lemma_bobex_suite(mu, t.h, lambda, t.trials, seed, exec)?
                };
                let mut worst: Option<&tau::LemmaCheck> = None;
                for c in &s.checks {
                    report.record(if suite == TauSuite::LemmaBob { "lemma_bob" } else { "lemma_bobex" }, c);
                    if worst.is_none_or(|w| c.lhs.value - c.rhs.value > w.lhs.value - w.rhs.value) {
                        worst = Some(c);
                    }
                }
                if let Some(w) = worst.filter(|w| !w.passed) {
                    witnesses.push(vec![suite.name().into(), w.function_id.clone(), num(w.lhs.value - w.rhs.value), String::new()]);
                }
                if let Some(e) = s.errors.first() {
                    witnesses.push(vec![suite.name().into(), "error".into(), "n/a".into(), e.clone()]);
                }
                SuiteRow {
                    suite: suite.name(),
                    measure_id: mu.id(),
                    evaluated: s.checks.len() + s.errors.len(),
                    violations: s.violations(),
                    worst_excess: worst.map(|w| w.lhs.value - w.rhs.value),
                    worst_id: worst.map(|w| w.function_id.clone()),
                }
            }
            TauSuite::LemmaBound => {
                let c1 = 17.0 / ((1.0 - lambda) * (1.0 - lambda));
                let checks = tau::lemma_bound_suite(c1, t.h, t.trials, seed, exec)?;
                let mut worst: Option<&tau::BoundCheck> = None;
                let mut violations = 0;
                for c in &checks {
                    report.record("lemma_bound", c);
                    if !c.report.passed() {
                        violations += 1;
                    }
                    if worst.is_none_or(|w| c.report.max_violation > w.report.max_violation) {
                        worst = Some(c);
                    }
                }
                if let Some(w) = worst.filter(|w| !w.report.passed()) {
                    witnesses.push(vec![suite.name().into(), w.function_id.clone(), num(w.report.max_violation), json(&w.function)]);
                }
                SuiteRow {
                    suite: suite.name(),
                    measure_id: "none".into(),
                    evaluated: checks.len(),
                    violations,
                    worst_excess: worst.map(|w| w.report.max_violation),
                    worst_id: worst.map(|w| w.function_id.clone()),
                }
            }
            TauSuite::CImpliesB => {
                let s = tau::certify_c_implies_b(mu, c_tau, t.trials, seed, exec);
                let mut worst: Option<&tau::PoincareCheck> = None;
                for c in &s.checks {
                    report.record("c_implies_b", c);
                    if worst.is_none_or(|w| c.variance - c.bound > w.variance - w.bound) {
                        worst = Some(c);
                    }
                }
                if let Some(w) = worst.filter(|w| !w.passed) {
                    witnesses.push(vec![suite.name().into(), w.function_id.clone(), num(w.variance - w.bound), String::new()]);
                }
                SuiteRow {
                    suite: suite.name(),
                    measure_id: mu.id(),
                    evaluated: s.checks.len(),
                    violations: s.violations(),
                    worst_excess: worst.map(|w| w.variance - w.bound),
                    worst_id: worst.map(|w| w.function_id.clone()),
                }
            }
        };
        push(&mut report, row);
    }
    report.table(suites);
    if !witnesses.rows.is_empty() {
        report.table(witnesses);
    }
    let summary = format!("{} suite(s), {} violation(s)", t.suites.len(), total_violations);
    Ok(Outcome { report, violations: total_violations, summary })
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("json")
}

#[derive(Serialize)]
struct SandwichRow {
    measure_id: String,
    cp_lower: f64,
    muckenhoupt_b: Option<f64>,
    upper: Option<f64>,
    pass: bool,
}

pub fn cmd_poincare(cfg: &RunConfig, mu: &Measure1D, seed: u64) -> Result<Outcome, Failure> {
    let p = &cfg.poincare;
    let grid = poincare::default_u_grid(mu);
    let est = poincare::cp_lower_bound(mu, &grid, p.trials, seed, Execution::default());
    let cp = match p.cp {
        Some(cp) => cp,
        None if est.cp_lower > 0.0 => est.cp_lower,
        None => return Err(Failure { code: exit::DEGENERATE, message: "no test function has positive energy; no constant to certify".into() }),
    };
    let cert = poincare::certify_b_implies_a(mu, cp)?;
    let mut report = Report::new("poincare");
    let mut t = Table::new(format!("convex Poincaré lower bound for {}", mu.id()), &["cp_lower", "witness", "probes"]);
    t.push(vec![num(est.cp_lower), est.witness_id.clone().unwrap_or_default(), est.probes.to_string()]);
    report.table(t);
    report.record("estimate", &est);

    let mut t = Table::new("tail ratio from the Poincaré constant", &["cp", "h", "lambda_star", "limit", "hinge_slack", "pass"]);
    let hinge_ok = cert.hinge_bound_slack >= -1e-9;
    t.push(vec![num(cp), num(cert.h), num(cert.certificate.lambda_star), "0.5".into(), num(cert.hinge_bound_slack), yes_no(cert.passed && hinge_ok)]);
    report.table(t);
    report.record("tail_certificate", &cert);

    let b = mu.muckenhoupt_b().ok().map(|t| t.value);
    let upper = b.map(|b| 4.0 * b);
    let sandwich_ok = upper.is_none_or(|u| est.cp_lower <= u + 1e-9 * u.max(1.0));
    let row = SandwichRow { measure_id: mu.id(), cp_lower: est.cp_lower, muckenhoupt_b: b, upper, pass: sandwich_ok };
    let mut t = Table::new("upper bound 4B", &["cp_lower", "B", "4B", "pass"]);
    t.push(vec![num(row.cp_lower), b.map_or("n/a".into(), num), upper.map_or("n/a".into(), num), yes_no(sandwich_ok)]);
    report.table(t);
    report.record("sandwich", &row);

    let violations = usize::from(!cert.passed) + usize::from(!hinge_ok) + usize::from(!sandwich_ok);
    let summary = format!("cp_lower {} ; lambda*({}) = {} ; {} violation(s)", num(est.cp_lower), num(cert.h), num(cert.certificate.lambda_star), violations);
    Ok(Outcome { report, violations, summary })
}

pub fn cmd_concentrate(cfg: &RunConfig, mu: &Measure1D, seed: u64) -> Result<Outcome, Failure> {
    let c = cfg.concentrate.as_ref().ok_or_else(|| ConfigError("missing [concentrate] table".into()))?;
    if c.dim == 0 {
        return Err(ConfigError("concentrate.dim must be positive".into()).into());
    }
    let pm = ProductMeasure::iid(mu.clone(), c.dim)?;
    let lambda = match c.lambda {
        Some(l) => l,
        None => pm.lambda_star(c.h)?,
    };
    let mc = MonteCarlo { samples: c.samples, seed, exec: Execution::default() };
    let mut report = Report::new("concentrate");
    let needs_set = || c.set.as_ref().ok_or_else(|| Failure::from(ConfigError("concentrate.set is required for this experiment".into())));
    let (violations, summary) = match c.experiment {
        Experiment::TwoLevel | Experiment::CostBall => {
            let set = needs_set()?;
            let r = if c.experiment == Experiment::TwoLevel {
                concentration::verify_corr1(&pm, set, c.h, lambda, &c.t_grid, &mc)?
            } else {
                let c_tau = c.c_tau.unwrap_or_else(|| tau_constant(c.h, lambda));
                concentration::verify_gencon(&pm, set, c_tau, &c.t_grid, &mc)?
            };
            let mut t = Table::new(
                format!(
                    "{} enlargement of {} under {}^{} (mu(A) = {}, exact = {})",
                    r.experiment,
                    r.set_family,
                    mu.id(),
                    c.dim,
                    num(r.base_probability),
                    r.exact_membership
                ),
                &["t", "empirical", "bound", "radius", "pass"],
            );
            for row in &r.rows {
                t.push(vec![num(row.t), num(row.empirical), num(row.bound), num(row.radius), yes_no(row.pass)]);
                report.record("enlargement", row);
            }
            report.table(t);
            report.record("experiment", &ExperimentHeader::from_enlargement(&r));
            let v = r.rows.iter().filter(|r| !r.pass).count();
            (v, format!("{} t value(s), {} failing", r.rows.len(), v))
        }
        Experiment::Deviation => {
            let f: &ConvexFamily = c.function.as_ref().ok_or_else(|| Failure::from(ConfigError("concentrate.function is required for deviation".into())))?;
            let (fa, fb) = f.lipschitz();
            let r = concentration::verify_corr2(&pm, f, c.a.unwrap_or(fa), c.b.unwrap_or(fb), c.h, lambda, &c.t_grid, &mc)?;
            let mut t = Table::new(
                format!("deviation of {} under {}^{} (median = {}, a = {}, b = {})", r.family, mu.id(), c.dim, num(r.median), num(r.a), num(r.b)),
                &["t", "upper", "lower", "bound", "radius_upper", "radius_lower", "branch", "pass"],
            );
            for row in &r.rows {
                t.push(vec![
                    num(row.t),
                    num(row.upper),
                    num(row.lower),
                    num(row.bound),
                    num(row.radius_upper),
                    num(row.radius_lower),
                    row.branch.into(),
                    yes_no(row.pass_upper && row.pass_lower),
                ]);
                report.record("deviation", row);
            }
            report.table(t);
            let v = r.rows.iter().filter(|r| !(r.pass_upper && r.pass_lower)).count() + usize::from(!r.constants_valid);
            report.record("experiment", &ExperimentHeader::from_deviation(&r));
            (v, format!("{} t value(s), {} failing", r.rows.len(), v))
        }
    };
    Ok(Outcome { report, violations, summary })
}

#[derive(Serialize)]
struct ExperimentHeader {
    experiment: String,
    set_family: Option<String>,
    exact_membership: Option<bool>,
    dim: usize,
    samples: usize,
    seed: u64,
    c_tau: f64,
    base_probability: Option<f64>,
    median: Option<f64>,
    z: f64,
}

impl ExperimentHeader {
    fn from_enlargement(r: &concentration::ConcentrationReport) -> Self {
        ExperimentHeader {
            experiment: r.experiment.clone(),
            set_family: Some(r.set_family.clone()),
            exact_membership: Some(r.exact_membership),
            dim: r.dim,
            samples: r.samples,
            seed: r.seed,
            c_tau: r.c_tau,
            base_probability: Some(r.base_probability),
            median: None,
            z: r.z,
        }
    }

    fn from_deviation(r: &concentration::DeviationReport) -> Self {
        ExperimentHeader {
            experiment: format!("deviation:{}", r.family),
            set_family: None,
            exact_membership: None,
            dim: r.dim,
            samples: r.samples,
            seed: r.seed,
            c_tau: r.c_tau,
            base_probability: None,
            median: Some(r.median),
            z: r.z,
        }
    }
}
