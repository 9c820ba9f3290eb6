//! Cumulative rates `Lambda_ij(I_k)`: the closed form for the distance
//! model and a left Riemann sum for any rate.
//!
//! On an interval where both trajectories are linear, with `s` the fraction
//! of the interval elapsed, the squared distance is the quadratic
//! `gamma(s) = ||da + s (db - da)||^2`, where `da`, `db` are the pair
//! differences at the two cut points. Completing the square,
//! `gamma(s) = a + (s - mu)^2 / (2 sigma^2)` with
//!
//! * `1 / (2 sigma^2) = ||da - db||^2`
//! * `mu = <da, da - db> / ||da - db||^2`
//! * `a = ||da||^2 - <da, da - db>^2 / ||da - db||^2`
//!
//! so that
//! `Lambda = |I| exp(beta - a) sigma sqrt(2 pi) [Phi((1 - mu)/sigma) - Phi(-mu/sigma)]`.
//! The bracket is evaluated through `erfcx` on whichever side of the vertex
//! the interval lies, folding `exp(-a)` into the tail factors so that far
//! apart pairs neither underflow early nor cancel.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

use super::{LatentConfiguration, RateKind, RateModel};
use crate::error::{Error, Result};
use crate::events::NodeId;
use crate::normal::erfcx;

/// Below this `||da - db||` the quadratic is too flat for the Gaussian
/// form (the `Phi` difference spans `sqrt(2) ||da - db||` and cancels), so
/// the moments are taken with a fixed Gauss-Legendre rule instead, which is
/// exact to rounding for such nearly-linear exponents.
pub const DEGENERATE_DIRECTION: f64 = 1e-3;

/// `m_p = int_0^1 s^p exp(beta - gamma(s)) ds` for `p = 0, 1, 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentMoments {
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
}

/// Moments of the rate over one linear segment, given the pair differences
/// `da`, `db` at its two ends.
pub fn closed_form_moments(da: &[f64], db: &[f64], beta: f64) -> SegmentMoments {
    // gamma(s) = qa s^2 + qb s + qc
    let mut qa = 0.0;
    let mut half_qb = 0.0;
    let mut qc = 0.0;
    let mut end_sq = 0.0;
    for (&x, &y) in da.iter().zip(db) {
        let dir = y - x;
        qa += dir * dir;
        half_qb += x * dir;
        qc += x * x;
        end_sq += y * y;
    }
    if qa.sqrt() < DEGENERATE_DIRECTION {
        return gauss_legendre_moments(qa, 2.0 * half_qb, qc, beta);
    }

    let sigma_sq = 0.5 / qa;
    let sigma = sigma_sq.sqrt();
    let mu = -half_qb / qa;
    // Squared distance at the vertex, computed as a squared norm.
    let mut vertex = 0.0;
    for (&x, &y) in da.iter().zip(db) {
        let v = x + mu * (y - x);
        vertex += v * v;
    }
    let lo = -mu / sigma;
    let hi = (1.0 - mu) / sigma;
    let f0 = (beta - qc).exp();
    let f1 = (beta - end_sq).exp();
    // tail(x, f) = exp(beta - a) * (1 - Phi(|x|)) folded with exp(-x^2 / 2).
    let tail = |x: f64, f: f64| 0.5 * erfcx(x * FRAC_1_SQRT_2) * f;
    let bracket = if lo >= 0.0 {
        tail(lo, f0) - tail(hi, f1)
    } else if hi <= 0.0 {
        tail(-hi, f1) - tail(-lo, f0)
    } else {
        (beta - vertex).exp() - tail(hi, f1) - tail(-lo, f0)
    };
    let m0 = (sigma * (2.0 * PI).sqrt() * bracket).max(0.0);

    // f0 - f1 without cancelling when the endpoint distances are close.
    let gap = end_sq - qc;
    let f_diff = if gap >= 0.0 {
        -f0 * (-gap).exp_m1()
    } else {
        f1 * gap.exp_m1()
    };
    let m1 = mu * m0 + sigma_sq * f_diff;
    let central = sigma_sq * m0 - sigma_sq * ((1.0 - mu) * f1 + mu * f0);
    let m2 = central + 2.0 * mu * m1 - mu * mu * m0;
    SegmentMoments { m0, m1, m2 }
}

const GL_ORDER: usize = 16;

/// Gauss-Legendre nodes and weights mapped to `[0, 1]`.
fn gauss_legendre() -> &'static [(f64, f64); GL_ORDER] {
    static RULE: OnceLock<[(f64, f64); GL_ORDER]> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        let mut rule = [(0.0, 0.0); GL_ORDER];
        for (idx, slot) in rule.iter_mut().enumerate() {
            let mut x = (PI * (idx as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut deriv = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for m in 2..=n {
                    let p2 = ((2 * m - 1) as f64 * x * p1 - (m - 1) as f64 * p0) / m as f64;
                    p0 = p1;
                    p1 = p2;
                }
                deriv = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / deriv;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * deriv * deriv);
            *slot = (0.5 * (1.0 - x), 0.5 * w);
        }
        rule
    })
}

fn gauss_legendre_moments(qa: f64, qb: f64, qc: f64, beta: f64) -> SegmentMoments {
    let mut m = SegmentMoments {
        m0: 0.0,
        m1: 0.0,
        m2: 0.0,
    };
    for &(s, w) in gauss_legendre() {
        let f = w * (beta - (qa * s * s + qb * s + qc)).exp();
        m.m0 += f;
        m.m1 += f * s;
        m.m2 += f * s * s;
    }
    m
}

/// Exact `Lambda_ij(I_k)` for the distance model.
pub fn cumulative_rate_closed(
    cfg: &LatentConfiguration,
    rm: &RateModel,
    i: NodeId,
    j: NodeId,
    k: usize,
) -> Result<f64> {
    if rm.kind != RateKind::EuclideanDistance {
        return Err(Error::UnsupportedRateKind);
    }
    if i == j {
        return Err(Error::SelfPair(i));
    }
    let ends = [
        cfg.point(i, k),
        cfg.point(i, k + 1),
        cfg.point(j, k),
        cfg.point(j, k + 1),
    ];
    let len = cfg.partition().length(k);
    Ok(survival(rm.kind, rm.beta, len, 0, ends, None))
}

/// Left Riemann sum `|I|/R * sum_r lambda(eta_k + r/R |I|)`, `r = 0..R`.
pub fn cumulative_rate_riemann(
    cfg: &LatentConfiguration,
    rm: &RateModel,
    i: NodeId,
    j: NodeId,
    k: usize,
    resolution: usize,
) -> f64 {
    let ends = [
        cfg.point(i, k),
        cfg.point(i, k + 1),
        cfg.point(j, k),
        cfg.point(j, k + 1),
    ];
    riemann(
        rm.kind,
        rm.beta,
        cfg.partition().length(k),
        resolution.max(1),
        ends,
        None,
    )
}

/// Accumulates `d Lambda` into `grad` laid out as `[zi_a | zi_b | zj_a | zj_b]`
/// (each `dim` long) and the beta derivative into `dbeta`, both scaled by
/// `weight`.
pub(crate) struct GradSink<'a> {
    pub grad: &'a mut [f64],
    pub dbeta: &'a mut f64,
    pub weight: f64,
}

/// `Lambda` over one interval. Closed form for the distance model, Riemann
/// sum with `resolution` steps otherwise.
pub(crate) fn survival(
    kind: RateKind,
    beta: f64,
    len: f64,
    resolution: usize,
    ends: [&[f64]; 4],
    sink: Option<GradSink<'_>>,
) -> f64 {
    match kind {
        RateKind::EuclideanDistance => closed(beta, len, ends, sink),
        RateKind::DotProduct => riemann(kind, beta, len, resolution.max(1), ends, sink),
    }
}

fn closed(beta: f64, len: f64, ends: [&[f64]; 4], sink: Option<GradSink<'_>>) -> f64 {
    let [ia, ib, ja, jb] = ends;
    let dim = ia.len();
    // Small fixed buffers cover the usual latent dimensions without allocating.
    let mut stack = [0.0f64; 16];
    let mut heap = Vec::new();
    let buf: &mut [f64] = if 2 * dim <= stack.len() {
        &mut stack[..2 * dim]
    } else {
        heap.resize(2 * dim, 0.0);
        &mut heap
    };
    let (da, db) = buf.split_at_mut(dim);
    for c in 0..dim {
        da[c] = ia[c] - ja[c];
        db[c] = ib[c] - jb[c];
    }
    let m = closed_form_moments(da, db, beta);
    let lambda = len * m.m0;
    if let Some(sink) = sink {
        let w = sink.weight;
        *sink.dbeta += w * lambda;
        let g = sink.grad;
        for c in 0..dim {
            let dir = db[c] - da[c];
            let g_a = -2.0 * len * (da[c] * (m.m0 - m.m1) + dir * (m.m1 - m.m2));
            let g_b = -2.0 * len * (da[c] * m.m1 + dir * m.m2);
            g[c] += w * g_a;
            g[dim + c] += w * g_b;
            g[2 * dim + c] -= w * g_a;
            g[3 * dim + c] -= w * g_b;
        }
    }
    lambda
}

fn riemann(
    kind: RateKind,
    beta: f64,
    len: f64,
    resolution: usize,
    ends: [&[f64]; 4],
    mut sink: Option<GradSink<'_>>,
) -> f64 {
    let [ia, ib, ja, jb] = ends;
    let dim = ia.len();
    let step = len / resolution as f64;
    let mut total = 0.0;
    for r in 0..resolution {
        let s = r as f64 / resolution as f64;
        let mut similarity = 0.0;
        for c in 0..dim {
            let zi = (1.0 - s) * ia[c] + s * ib[c];
            let zj = (1.0 - s) * ja[c] + s * jb[c];
            similarity += match kind {
                RateKind::EuclideanDistance => -(zi - zj) * (zi - zj),
                RateKind::DotProduct => zi * zj,
            };
        }
        let rate = step * (beta + similarity).exp();
        total += rate;
        if let Some(sink) = sink.as_mut() {
            let w = sink.weight * rate;
            *sink.dbeta += w;
            let g = &mut *sink.grad;
            for c in 0..dim {
                let zi = (1.0 - s) * ia[c] + s * ib[c];
                let zj = (1.0 - s) * ja[c] + s * jb[c];
                let (gi, gj) = match kind {
                    RateKind::EuclideanDistance => (-2.0 * (zi - zj), 2.0 * (zi - zj)),
                    RateKind::DotProduct => (zj, zi),
                };
                g[c] += w * (1.0 - s) * gi;
                g[dim + c] += w * s * gi;
                g[2 * dim + c] += w * (1.0 - s) * gj;
                g[3 * dim + c] += w * s * gj;
            }
        }
    }
    total
}
