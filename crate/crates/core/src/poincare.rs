//! Convex Poincaré constants: variances, Dirichlet energies, lower bounds on
//! the constant from hinge functions, and the tail-ratio certificate it
//! implies.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::convexfn::{ConvexSampler, PLConvex};
use crate::error::{Error, Result};
use crate::measure::{Measure1D, MembershipCertificate};
use crate::par::{self, Execution};
use crate::quadrature::Integral;

/// `Var_mu(f)`, computed as `int (f - m)^2 dmu` with `m = int f dmu`.
pub fn variance(mu: &Measure1D, f: &PLConvex) -> Integral {
    let mean = mu.integrate(|x| f.eval(x), f.breakpoints());
    let centered = mu.integrate(
        |x| {
            let d = f.eval(x) - mean.value;
            d * d
        },
        f.breakpoints(),
    );
    // A mean error e moves the centered second moment by at most e^2.
    Integral { value: centered.value.max(0.0), error: centered.error + mean.error * mean.error }
}

/// `1/2 sum_ij m_i m_j (f(x_i) - f(x_j))^2` for purely atomic measures.
pub fn variance_pairwise(mu: &Measure1D, f: &PLConvex) -> Result<f64> {
    if mu.continuous_mass(f64::NEG_INFINITY, f64::INFINITY) > 0.0 {
        return Err(Error::InvalidArgument("pairwise variance needs a purely atomic measure".into()));
    }
    let atoms = mu.atoms();
    let mut s = 0.0;
    for a in &atoms {
        for b in &atoms {
            let d = f.eval(a.position) - f.eval(b.position);
            s += a.mass * b.mass * d * d;
        }
    }
    Ok(0.5 * s)
}

/// `int f'(x)^2 dmu(x)` with the right derivative.
pub fn dirichlet_energy(mu: &Measure1D, f: &PLConvex) -> f64 {
    let atoms: f64 = mu
        .atoms()
        .iter()
        .map(|a| {
            let s = f.right_slope(a.position);
            a.mass * s * s
        })
        .sum();
    let b = f.breakpoints();
    let continuous: f64 = f
        .slopes()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let lo = if i == 0 { f64::NEG_INFINITY } else { b[i - 1] };
            let hi = if i == b.len() { f64::INFINITY } else { b[i] };
            s * s * mu.continuous_mass(lo, hi)
        })
        .sum();
    atoms + continuous
}

/// Ratio `Var / energy`; `None` when the energy vanishes.
pub fn poincare_ratio(mu: &Measure1D, f: &PLConvex) -> Option<f64> {
    let e = dirichlet_energy(mu, f);
    (e > 0.0).then(|| variance(mu, f).value / e)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoincareEstimate {
    /// Largest `Var / energy` seen; a lower bound on the convex Poincaré constant.
    pub cp_lower: f64,
    pub witness_id: Option<String>,
    pub witness: Option<PLConvex>,
    pub probes: usize,
}

/// 256 points from 0 to the upper `1e-8` quantile.
pub fn default_u_grid(mu: &Measure1D) -> Vec<f64> {
    let top = mu.upper_quantile(1e-8).max(0.0);
    (0..256).map(|i| top * i as f64 / 255.0).collect()
}

/// Lower bound on the convex Poincaré constant from hinges `max(x - u, 0)`,
/// `u` in `u_grid`, and `random_trials` random convex functions.
pub fn cp_lower_bound(mu: &Measure1D, u_grid: &[f64], random_trials: usize, seed: u64, exec: Execution) -> PoincareEstimate {
    let hinges = par::map_slice(exec, u_grid, |&u| {
        let f = PLConvex::hinge(u, 1.0).expect("finite hinge");
        (poincare_ratio(mu, &f), format!("hinge(u={u})"), f)
    });
    let span = mu.upper_quantile(1e-6).clamp(1e-3, 10.0);
    let sampler = ConvexSampler { span, ..ConvexSampler::default() };
    let random = par::map_indexed(exec, random_trials, |i| {
        let f = sampler.sample(&mut trial_rng(seed, i as u64));
        (poincare_ratio(mu, &f), format!("random#{i}"), f)
    });
    let mut est = PoincareEstimate { cp_lower: 0.0, witness_id: None, witness: None, probes: u_grid.len() + random_trials };
    for (ratio, id, f) in hinges.into_iter().chain(random) {
        if let Some(r) = ratio {
            if r > est.cp_lower {
                est.cp_lower = r;
                est.witness_id = Some(id);
                est.witness = Some(f);
            }
        }
    }
    est
}

pub(crate) fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Result of deriving tail-ratio membership from a convex Poincaré constant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailFromPoincare {
    pub cp: f64,
    pub h: f64,
    pub certificate: MembershipCertificate,
    pub passed: bool,
    /// `min_u Var f_u - 2 cp mu[u + h, inf)` over the default `u` grid; the
    /// proof shows it is nonnegative for every symmetric measure.
    pub hinge_bound_slack: f64,
    pub hinge_bound_witness: f64,
}

/// Checks that `mu` lies in `M(sqrt(8 cp), 1/2)`.
pub fn certify_b_implies_a(mu: &Measure1D, cp: f64) -> Result<TailFromPoincare> {
    if !(cp > 0.0 && cp.is_finite()) {
        return Err(Error::InvalidArgument(format!("cp must be positive, got {cp}")));
    }
    if !mu.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let h = (8.0 * cp).sqrt();
    let certificate = mu.lambda_star(h)?;
    let mut slack = f64::INFINITY;
    let mut witness = f64::NAN;
    for u in default_u_grid(mu) {
        let f = PLConvex::hinge(u, 1.0)?;
        let s = variance(mu, &f).value - 2.0 * cp * mu.tail(u + h);
        if s < slack {
            slack = s;
            witness = u;
        }
    }
    Ok(TailFromPoincare {
        cp,
        h,
        passed: certificate.lambda_star <= 0.5,
        certificate,
        hinge_bound_slack: slack,
        hinge_bound_witness: witness,
    })
}
