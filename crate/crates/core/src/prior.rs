//! Gaussian random-walk prior over critical points and the KL divergence
//! from the mean-field posterior.
//!
//! Each trajectory starts at `z[0] ~ N(0, tau0^2 I)` and moves by
//! independent increments `z[k+1] - z[k] ~ N(0, tau_k^2 I)` with
//! `tau_k = tau * sqrt(eta_{k+1} - eta_k)`.
//!
//! Since `q` factorises over cut points, the chain rule for KL gives
//!
//! ```text
//! KL(q || p) = KL(q_0 || p_0) + sum_k E_{z[k] ~ q_k} KL(q_{k+1} || p(. | z[k]))
//! ```
//!
//! and for isotropic Gaussians
//! `KL(N(m1, s1^2 I) || N(m2, s2^2 I)) = ||m1 - m2||^2 / (2 s2^2) + d (ln(s2/s1) + s1^2/(2 s2^2) - 1/2)`.
//! Taking the expectation over the previous point adds `d sigma_k^2` to the
//! squared mean step.

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::events::IntervalPartition;
use crate::inference::VariationalState;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct PriorConfig {
    pub tau0: f64,
    pub tau: f64,
    /// Interval lengths `eta_{k+1} - eta_k`; one fewer than the cut points.
    pub steps: Vec<f64>,
    pub dim: usize,
}

impl PriorConfig {
    pub fn new(tau: f64, tau0: f64, part: &IntervalPartition, dim: usize) -> Result<Self> {
        let steps = (0..part.num_intervals()).map(|k| part.length(k)).collect();
        Self::with_steps(tau, tau0, steps, dim)
    }

    pub fn with_steps(tau: f64, tau0: f64, steps: Vec<f64>, dim: usize) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite() && tau0 > 0.0 && tau0.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "prior scales must be positive and finite (tau {tau}, tau0 {tau0})"
            )));
        }
        if steps.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidArgument("step lengths must be positive".into()));
        }
        if dim == 0 {
            return Err(Error::InvalidArgument("latent dimension must be >= 1".into()));
        }
        Ok(Self {
            tau0,
            tau,
            steps,
            dim,
        })
    }

    pub fn num_cut_points(&self) -> usize {
        self.steps.len() + 1
    }

    /// Standard deviation of the increment into cut point `k` (`k >= 1`),
    /// or of the starting point for `k = 0`.
    pub fn scale(&self, k: usize) -> f64 {
        if k == 0 {
            self.tau0
        } else {
            self.tau * self.steps[k - 1].sqrt()
        }
    }
}

/// Draws critical points for `n` nodes, laid out node -> cut point -> dim.
pub fn sample_prior(n: usize, pc: &PriorConfig, seed: u64) -> Vec<f64> {
    let cuts = pc.num_cut_points();
    let d = pc.dim;
    let mut rng = rng::seeded(seed);
    let mut z = vec![0.0; n * cuts * d];
    for i in 0..n {
        for k in 0..cuts {
            let scale = pc.scale(k);
            for c in 0..d {
                let eps: f64 = StandardNormal.sample(&mut rng);
                let o = (i * cuts + k) * d + c;
                let prev = if k == 0 { 0.0 } else { z[o - d] };
                z[o] = prev + scale * eps;
            }
        }
    }
    z
}

/// Exact log-density of critical points (layout of [`sample_prior`]).
pub fn prior_log_density(z: &[f64], pc: &PriorConfig) -> f64 {
    let cuts = pc.num_cut_points();
    let d = pc.dim;
    let half_log_2pi = 0.5 * (2.0 * PI).ln();
    let mut total = 0.0;
    for node in z.chunks(cuts * d) {
        for k in 0..cuts {
            let scale = pc.scale(k);
            let mut sq = 0.0;
            for c in 0..d {
                let prev = if k == 0 { 0.0 } else { node[(k - 1) * d + c] };
                let diff = node[k * d + c] - prev;
                sq += diff * diff;
            }
            total -= d as f64 * (half_log_2pi + scale.ln()) + sq / (2.0 * scale * scale);
        }
    }
    total
}

fn check_shapes(vs: &VariationalState, pc: &PriorConfig) -> Result<()> {
    if vs.num_cut_points() != pc.num_cut_points() || vs.dim() != pc.dim {
        return Err(Error::InvalidArgument(format!(
            "state has {} cut points in {} dimensions, prior expects {} in {}",
            vs.num_cut_points(),
            vs.dim(),
            pc.num_cut_points(),
            pc.dim
        )));
    }
    if vs.log_sigma().iter().any(|s| !s.is_finite()) || vs.mu().iter().any(|m| !m.is_finite()) {
        return Err(Error::InvalidArgument(
            "variational scales must be positive and finite".into(),
        ));
    }
    Ok(())
}

/// `KL(q || p)` in closed form.
pub fn kl_to_prior(vs: &VariationalState, pc: &PriorConfig) -> Result<f64> {
    check_shapes(vs, pc)?;
    Ok(kl_impl(vs, pc, None))
}

/// KL together with its gradient in `mu` and `log sigma` (state layouts).
pub fn kl_with_gradient(
    vs: &VariationalState,
    pc: &PriorConfig,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    check_shapes(vs, pc)?;
    let mut d_mu = vec![0.0; vs.mu().len()];
    let mut d_ls = vec![0.0; vs.log_sigma().len()];
    let kl = kl_impl(vs, pc, Some((&mut d_mu, &mut d_ls)));
    Ok((kl, d_mu, d_ls))
}

fn kl_impl(
    vs: &VariationalState,
    pc: &PriorConfig,
    mut grad: Option<(&mut [f64], &mut [f64])>,
) -> f64 {
    let cuts = pc.num_cut_points();
    let d = pc.dim;
    let df = d as f64;
    let mu = vs.mu();
    let ls = vs.log_sigma();
    let mut kl = 0.0;
    for i in 0..vs.num_nodes() {
        for k in 0..cuts {
            let scale = pc.scale(k);
            let inv_var = 1.0 / (scale * scale);
            let s_idx = i * cuts + k;
            let sigma_sq = (2.0 * ls[s_idx]).exp();
            let o = s_idx * d;

            // Mean term: distance to the prior mean (0 at k = 0, the previous
            // mean otherwise) plus the propagated variance of the previous point.
            let mut sq = 0.0;
            for c in 0..d {
                let prev = if k == 0 { 0.0 } else { mu[o - d + c] };
                let diff = mu[o + c] - prev;
                sq += diff * diff;
            }
            let carried = if k == 0 {
                0.0
            } else {
                df * (2.0 * ls[s_idx - 1]).exp()
            };
            kl += 0.5 * (sq + carried) * inv_var
                + df * (scale.ln() - ls[s_idx] + 0.5 * sigma_sq * inv_var - 0.5);

            if let Some((d_mu, d_ls)) = grad.as_mut() {
                for c in 0..d {
                    let prev = if k == 0 { 0.0 } else { mu[o - d + c] };
                    let g = (mu[o + c] - prev) * inv_var;
                    d_mu[o + c] += g;
                    if k > 0 {
                        d_mu[o - d + c] -= g;
                    }
                }
                d_ls[s_idx] += df * (sigma_sq * inv_var - 1.0);
                if k > 0 {
                    d_ls[s_idx - 1] += carried * inv_var;
                }
            }
        }
    }
    kl
}

const MC_CHUNK: usize = 4096;

/// Monte-Carlo estimate of `KL(q || p)`: mean and standard error of
/// `log q(z) - log p(z)` over `samples` draws `z ~ q`. Chunks of draws use
/// derived seeds so the result does not depend on the thread count.
pub fn kl_monte_carlo(
    vs: &VariationalState,
    pc: &PriorConfig,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check_shapes(vs, pc)?;
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let d = pc.dim;
    let half_log_2pi = 0.5 * (2.0 * PI).ln();
    let chunks = samples.div_ceil(MC_CHUNK);
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng::stream(seed, c as u64);
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut z = vec![0.0; vs.mu().len()];
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let mut log_q = 0.0;
                for (idx, &ls) in vs.log_sigma().iter().enumerate() {
                    let sigma = ls.exp();
                    log_q -= d as f64 * (half_log_2pi + ls);
                    for c in 0..d {
                        let eps: f64 = StandardNormal.sample(&mut rng);
                        z[idx * d + c] = vs.mu()[idx * d + c] + sigma * eps;
                        log_q -= 0.5 * eps * eps;
                    }
                }
                let v = log_q - prior_log_density(&z, pc);
                s1 += v;
                s2 += v * v;
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = sums
        .iter()
        .fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    let m = samples as f64;
    let mean = s1 / m;
    let var = if samples > 1 {
        ((s2 - m * mean * mean) / (m - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok((mean, (var / m).sqrt()))
}
