//! Independent reference computations shared by the integration tests.
//! Nothing here calls into the closed-form code paths being checked.

#![allow(dead_code)]

use clpm::events::IntervalPartition;
use clpm::model::LatentConfiguration;
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normals(r: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(r)).collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

// Gauss-Kronrod 7-15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for idx in 0..7 {
        let x = h * XGK[idx];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[idx] * s;
        if idx % 2 == 1 {
            gauss += WG[idx / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive Gauss-Kronrod quadrature to relative tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let mut segs = vec![(a, b, gk15(&f, a, b))];
    for _ in 0..10_000 {
        let total: f64 = segs.iter().map(|s| s.2 .0).sum();
        let err: f64 = segs.iter().map(|s| s.2 .1).sum();
        if err <= tol * total.abs() {
            return total;
        }
        let (idx, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .unwrap();
        let (lo, hi, _) = segs.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        segs.push((lo, mid, gk15(&f, lo, mid)));
        segs.push((mid, hi, gk15(&f, mid, hi)));
    }
    panic!("quadrature did not converge");
}

/// `lambda_ij(t)` for the distance model, evaluated straight from the
/// critical points.
pub fn distance_rate(cfg: &LatentConfiguration, beta: f64, i: usize, j: usize, t: f64) -> f64 {
    let zi = cfg.position_at(i, t).unwrap();
    let zj = cfg.position_at(j, t).unwrap();
    let sq: f64 = zi.iter().zip(&zj).map(|(a, b)| (a - b) * (a - b)).sum();
    (beta - sq).exp()
}

pub fn dot_rate(cfg: &LatentConfiguration, beta: f64, i: usize, j: usize, t: f64) -> f64 {
    let zi = cfg.position_at(i, t).unwrap();
    let zj = cfg.position_at(j, t).unwrap();
    (beta + zi.iter().zip(&zj).map(|(a, b)| a * b).sum::<f64>()).exp()
}

/// Quadrature of the distance-model rate over interval `k`.
pub fn cumulative_by_quadrature(
    cfg: &LatentConfiguration,
    beta: f64,
    i: usize,
    j: usize,
    k: usize,
) -> f64 {
    let (lo, hi) = cfg.partition().bounds(k);
    integrate(|t| distance_rate(cfg, beta, i, j, t), lo, hi, 1e-13)
}

pub fn random_partition(r: &mut ChaCha8Rng, intervals: usize) -> IntervalPartition {
    let mut inner: Vec<f64> = (0..intervals - 1).map(|_| r.random_range(0.02..0.98)).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    let mut cuts = vec![0.0];
    cuts.extend(inner);
    cuts.push(1.0);
    IntervalPartition::from_cut_points(cuts).unwrap()
}

pub fn random_config(
    r: &mut ChaCha8Rng,
    n: usize,
    intervals: usize,
    dim: usize,
    scale: f64,
) -> LatentConfiguration {
    let part = random_partition(r, intervals);
    let len = n * part.cut_points().len() * dim;
    let z = normals(r, len).into_iter().map(|v| v * scale).collect();
    LatentConfiguration::from_vec(n, dim, part, z).unwrap()
}

pub fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

/// A double within a couple of ulps of an exact rational.
pub fn to_f64(x: &BigRational) -> f64 {
    // Fixed-point with 256 fractional bits, plenty for values of order one.
    let shift = 256u32;
    let scaled: BigInt = (x * BigRational::from_integer(BigInt::from(1) << shift)).round().to_integer();
    let (sign, digits) = scaled.to_u64_digits();
    let mut mag = 0.0f64;
    for &d in digits.iter().rev() {
        mag = mag * 18_446_744_073_709_551_616.0 + d as f64;
    }
    let v = mag * 2f64.powi(-(shift as i32));
    if sign == num_bigint::Sign::Minus {
        -v
    } else {
        v
    }
}

/// Central difference of `f` along coordinate `idx`.
pub fn central_difference<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], idx: usize, h: f64) -> f64 {
    let mut up = x.to_vec();
    up[idx] += h;
    let mut down = x.to_vec();
    down[idx] -= h;
    (f(&up) - f(&down)) / (2.0 * h)
}
