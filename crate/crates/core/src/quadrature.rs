//! Globally adaptive Gauss-Kronrod (7/15) quadrature.
//!
//! The error estimate of each subinterval is `|K15 - G7|`, which is very
//! pessimistic for smooth integrands; it is reported as-is so that callers
//! get a bound rather than a guess.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the odd Kronrod nodes (XGK[1], XGK[3], XGK[5], XGK[7]).
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Value and error bound of a numerical integral.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

impl Integral {
    pub fn exact(value: f64) -> Self {
        Integral { value, error: 0.0 }
    }
}

impl std::ops::Add for Integral {
    type Output = Integral;
    fn add(self, rhs: Integral) -> Integral {
        Integral { value: self.value + rhs.value, error: self.error + rhs.error }
    }
}

impl std::iter::Sum for Integral {
    fn sum<I: Iterator<Item = Integral>>(iter: I) -> Integral {
        iter.fold(Integral::default(), |a, b| a + b)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs: 1e-15, rel: 1e-13, max_intervals: 400 }
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        k += WGK[j] * pair;
        if j % 2 == 1 {
            g += WG[j / 2] * pair;
        }
    }
    let k = k * half;
    let g = g * half;
    (k, (k - g).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Integral {
    if !(b > a) {
        return Integral::default();
    }
    let (value, error) = kronrod(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    while heap.len() < tol.max_intervals && total_err > tol.abs.max(tol.rel * total.abs()) {
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let (lv, le) = kronrod(&f, worst.a, mid);
        let (rv, re) = kronrod(&f, mid, worst.b);
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: lv, error: le });
        heap.push(Segment { a: mid, b: worst.b, value: rv, error: re });
    }
    // Re-sum to shed accumulated cancellation in the running totals.
    let value = heap.iter().map(|s| s.value).sum();
    let error = heap.iter().map(|s| s.error).sum::<f64>() + f64::EPSILON * heap.len() as f64 * total.abs();
    Integral { value, error }
}

/// Integrates over `[a, inf)` through the substitution `x = a + u / (1 - u)`.
pub fn integrate_upper<F: Fn(f64) -> f64>(f: F, a: f64, tol: Tolerance) -> Integral {
    let g = |u: f64| {
        let w = 1.0 - u;
        let x = a + u / w;
        let v = f(x);
        if v == 0.0 {
            0.0
        } else {
            v / (w * w)
        }
    };
    integrate(g, 0.0, 1.0, tol)
}

/// Integrates over `(-inf, b]`.
pub fn integrate_lower<F: Fn(f64) -> f64>(f: F, b: f64, tol: Tolerance) -> Integral {
    integrate_upper(|y| f(-y), -b, tol)
}

/// Integrates over an arbitrary interval, possibly unbounded, splitting at
/// the sorted finite `breaks` inside it.
pub fn integrate_piecewise<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, breaks: &[f64], tol: Tolerance) -> Integral {
    if !(b > a) {
        return Integral::default();
    }
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b && x.is_finite()).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut nodes = Vec::with_capacity(cuts.len() + 2);
    nodes.push(a);
    nodes.extend(cuts);
    nodes.push(b);
    // Unbounded ends with no interior break still need a finite split point.
    if nodes.len() == 2 && a == f64::NEG_INFINITY && b == f64::INFINITY {
        nodes.insert(1, 0.0);
    }
    nodes
        .windows(2)
        .map(|w| {
            let (lo, hi) = (w[0], w[1]);
            match (lo.is_finite(), hi.is_finite()) {
                (true, true) => integrate(f, lo, hi, tol),
                (true, false) => integrate_upper(f, lo, tol),
                (false, true) => integrate_lower(f, hi, tol),
                (false, false) => unreachable!("split point inserted above"),
            }
        })
        .sum()
}
