//! Convex sets in `R^n` and membership in their enlargements.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConvexSet {
    /// `<a, x> <= c`.
    HalfSpace { a: Vec<f64>, c: f64 },
    /// `|<a, x>| <= c`.
    Slab { a: Vec<f64>, c: f64 },
    L2Ball { center: Vec<f64>, radius: f64 },
    L1Ball { center: Vec<f64>, radius: f64 },
}

pub(crate) fn dot(a: &[f64], x: &[f64]) -> f64 {
    a.iter().zip(x).map(|(p, q)| p * q).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Euclidean distance from `v` to the `l1` ball of radius `r`.
pub fn dist_to_l1_ball(v: &[f64], r: f64) -> f64 {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= r {
        return 0.0;
    }
    if r <= 0.0 {
        return norm2(v);
    }
    // Soft threshold at the level that leaves exactly r of l1 mass.
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &m) in mags.iter().enumerate() {
        cum += m;
        let t = (cum - r) / (k + 1) as f64;
        if t < m {
            theta = t;
        } else {
            break;
        }
    }
    v.iter()
        .map(|x| {
            let d = x.abs().min(theta);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

impl ConvexSet {
    pub fn family(&self) -> &'static str {
        match self {
            ConvexSet::HalfSpace { .. } => "half_space",
            ConvexSet::Slab { .. } => "slab",
            ConvexSet::L2Ball { .. } => "l2_ball",
            ConvexSet::L1Ball { .. } => "l1_ball",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::HalfSpace { a, .. } | ConvexSet::Slab { a, .. } => a.len(),
            ConvexSet::L2Ball { center, .. } | ConvexSet::L1Ball { center, .. } => center.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            ConvexSet::HalfSpace { a, c } => a.iter().all(|v| v.is_finite()) && c.is_finite() && norm2(a) > 0.0,
            ConvexSet::Slab { a, c } => a.iter().all(|v| v.is_finite()) && *c >= 0.0 && norm2(a) > 0.0,
            ConvexSet::L2Ball { center, radius } | ConvexSet::L1Ball { center, radius } => {
                center.iter().all(|v| v.is_finite()) && *radius >= 0.0 && radius.is_finite()
            }
        };
        if ok && self.dim() > 0 {
            Ok(())
        } else {
            Err(Error::UnsupportedSet(format!("degenerate {} parameters", self.family())))
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.enlarged_contains(x, 0.0, 0.0)
    }

    /// `x` in `A + s B_2 + r B_1`, for `x` of matching dimension.
    pub fn enlarged_contains(&self, x: &[f64], s: f64, r: f64) -> bool {
        match self {
            ConvexSet::HalfSpace { a, c } => dot(a, x) <= c + s * norm2(a) + r * norm_inf(a),
            ConvexSet::Slab { a, c } => dot(a, x).abs() <= c + s * norm2(a) + r * norm_inf(a),
            ConvexSet::L2Ball { center, radius } => {
                let v: Vec<f64> = x.iter().zip(center).map(|(p, q)| p - q).collect();
                dist_to_l1_ball(&v, r) <= radius + s
            }
            ConvexSet::L1Ball { center, radius } => {
                let v: Vec<f64> = x.iter().zip(center).map(|(p, q)| p - q).collect();
                dist_to_l1_ball(&v, radius + r) <= s
            }
        }
    }
}

/// Membership of `x` in `A + s B_2 + r B_1`.
pub fn enlargement_member(set: &ConvexSet, x: &[f64], s: f64, r: f64) -> Result<bool> {
    if x.len() != set.dim() {
        return Err(Error::InvalidArgument(format!("point has dimension {} but the set {}", x.len(), set.dim())));
    }
    if !(s >= 0.0 && r >= 0.0) {
        return Err(Error::InvalidArgument("enlargement radii must be nonnegative".into()));
    }
    Ok(set.enlarged_contains(x, s, r))
}

/// Support function of `{y : sum φ₀(y_i / C) <= t}` in direction `a`.
pub fn cost_ball_support(a: &[f64], c: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let l2 = norm2(a);
    let linf = norm_inf(a);
    if linf == 0.0 {
        return 0.0;
    }
    // Dual: inf over mu >= C |a|_inf of mu t + C^2 |a|_2^2 / (2 mu).
    let free = l2 / (2.0 * t).sqrt();
    if free >= linf {
        c * l2 * (2.0 * t).sqrt()
    } else {
        c * linf * t + c * l2 * l2 / (2.0 * linf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infconv::phi0;
    use crate::poincare::trial_rng;
    use rand::Rng;

    #[test]
    fn half_space_examples() {
        let a = ConvexSet::HalfSpace { a: vec![1.0, 0.0], c: 0.0 };
        assert!(enlargement_member(&a, &[0.5, 7.0], 0.5, 0.0).unwrap());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let b = ConvexSet::HalfSpace { a: vec![s, s], c: 0.0 };
        assert!(!enlargement_member(&b, &[1.0, 1.0], 0.0, 1.0).unwrap());
        assert!(enlargement_member(&b, &[-1.0, 0.5], 0.0, 0.0).unwrap());
        assert!(enlargement_member(&b, &[1.0], 0.0, 0.0).is_err());
    }

    #[test]
    fn l1_distance() {
        assert_eq!(dist_to_l1_ball(&[0.5, 0.2], 1.0), 0.0);
        assert!((dist_to_l1_ball(&[3.0, 0.0], 1.0) - 2.0).abs() < 1e-15);
        // Projection of (2, 2) onto the unit l1 ball is (1/2, 1/2).
        assert!((dist_to_l1_ball(&[2.0, 2.0], 1.0) - 1.5 * 2f64.sqrt()).abs() < 1e-14);
        assert!((dist_to_l1_ball(&[2.0, -2.0], 0.0) - 8f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn half_space_support_formula_matches_extremal_points() {
        let mut rng = trial_rng(17, 0);
        for _ in 0..10_000 {
            let n = rng.random_range(1..=6);
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
            let (c, s, r) = (rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0), rng.random_range(0.0..2.0));
            let set = ConvexSet::HalfSpace { a: a.clone(), c };
            // The extremal y = s a/|a|_2 + r sign(a_k) e_k with |a_k| maximal.
            let k = (0..n).max_by(|&i, &j| a[i].abs().total_cmp(&a[j].abs())).unwrap();
            let l2 = norm2(&a);
            let mut y: Vec<f64> = a.iter().map(|v| s * v / l2).collect();
            y[k] += r * a[k].signum();
            let shifted: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p - q).collect();
            let direct = dot(&a, &shifted) <= c + 1e-12 * (1.0 + dot(&a, &x).abs());
            let formula = enlargement_member(&set, &x, s, r).unwrap();
            if (dot(&a, &shifted) - c).abs() > 1e-9 {
                assert_eq!(direct, formula);
            }
            // No random y in the enlargement body does better.
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let un = norm2(&u).max(1e-300);
            let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let vn: f64 = v.iter().map(|q| q.abs()).sum::<f64>().max(1e-300);
            v.iter_mut().for_each(|q| *q *= r / vn);
            let yr: Vec<f64> = (0..n).map(|i| s * u[i] / un + v[i]).collect();
            assert!(dot(&a, &yr) <= dot(&a, &y) + 1e-12);
        }
    }

    #[test]
    fn enlargement_monotone() {
        let mut rng = trial_rng(3, 0);
        let sets = [
            ConvexSet::L2Ball { center: vec![0.3, -0.2, 0.0], radius: 1.0 },
            ConvexSet::L1Ball { center: vec![0.0, 0.0, 1.0], radius: 0.5 },
            ConvexSet::Slab { a: vec![1.0, -1.0, 0.5], c: 0.2 },
        ];
        for set in &sets {
            for _ in 0..2000 {
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
                let (s, r) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
                let m = set.enlarged_contains(&x, s, r);
                if m {
                    assert!(set.enlarged_contains(&x, s + 0.1, r));
                    assert!(set.enlarged_contains(&x, s, r + 0.1));
                }
            }
        }
    }

    #[test]
    fn ball_enlargement_by_construction() {
        // Points built as center + (radius + s) unit + r-l1 vector are members.
        let mut rng = trial_rng(5, 0);
        let ball = ConvexSet::L2Ball { center: vec![1.0, 0.0, -1.0, 2.0], radius: 0.7 };
        let l1 = ConvexSet::L1Ball { center: vec![1.0, 0.0, -1.0, 2.0], radius: 0.7 };
        let ConvexSet::L2Ball { center, .. } = &ball else { unreachable!() };
        for _ in 0..2000 {
            let (s, r) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            let u: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let un = norm2(&u);
            let w: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let wn: f64 = w.iter().map(|q| q.abs()).sum();
            let x: Vec<f64> = (0..4).map(|i| center[i] + (0.7 + s) * 0.999 * u[i] / un + r * 0.999 * w[i] / wn).collect();
            assert!(ball.enlarged_contains(&x, s, r));
            let y: Vec<f64> = (0..4).map(|i| center[i] + (0.7 + r) * 0.999 * w[i] / wn + s * 0.999 * u[i] / un).collect();
            assert!(l1.enlarged_contains(&y, s, r));
        }
    }

    #[test]
    fn cost_ball_support_by_search() {
        // One coordinate: sup y subject to φ₀(y/C) <= t.
        for (c, t) in [(1.0, 0.3), (2.0, 0.5), (3.0, 4.0)] {
            let expected = if t <= 0.5 { c * (2.0f64 * t).sqrt() } else { c * (t + 0.5) };
            assert!((cost_ball_support(&[1.0], c, t) - expected).abs() < 1e-12);
        }
        assert_eq!(cost_ball_support(&[1.0, 2.0], 1.0, 0.0), 0.0);
        // Random directions in 3 dimensions against sampled boundary points.
        let mut rng = trial_rng(8, 0);
        for _ in 0..50 {
            let a: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (c, t) = (rng.random_range(0.5..3.0), rng.random_range(0.05..3.0));
            let h = cost_ball_support(&a, c, t);
            let mut best: f64 = 0.0;
            for _ in 0..20_000 {
                let y: Vec<f64> = (0..3).map(|_| rng.random_range(-(t + 1.0) * c..(t + 1.0) * c)).collect();
                let cost: f64 = y.iter().map(|v| phi0(v / c)).sum();
                if cost <= t {
                    best = best.max(dot(&a, &y));
                }
            }
            assert!(best <= h + 1e-12);
            assert!(best >= 0.8 * h, "{best} vs {h}");
        }
    }

    #[test]
    fn cost_ball_inside_two_level_ball() {
        let mut rng = trial_rng(9, 0);
        let mut checked = 0;
        while checked < 10_000 {
            let n = rng.random_range(1..=5);
            let (c, t) = (rng.random_range(0.2..5.0), rng.random_range(0.01..4.0));
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-(2.0 * t + 1.0) * c..(2.0 * t + 1.0) * c)).collect();
            if y.iter().map(|v| phi0(v / c)).sum::<f64>() > t {
                continue;
            }
            checked += 1;
            let s = (2.0 * t).sqrt() * c;
            let r = 2.0 * t * c;
            assert!(dist_to_l1_ball(&y, r) <= s * (1.0 + 1e-12));
        }
    }
}
