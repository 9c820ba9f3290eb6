//! Mean-field variational posterior, the reparameterised ELBO and its exact
//! gradient, Adam, and the training loop.

mod adam;
mod elbo;
mod fit;

pub use adam::{adam_step, Adam, AdamBuffer, OptState};
pub use elbo::{elbo_loss, loss_gradient, LossParts, Objective, StateGradient};
pub use fit::{fit, FitOptions};

use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{IntervalPartition, NodeId, SplitSpec, TimeRange};
use crate::model::{LatentConfiguration, PlanSpec, RateKind, DEFAULT_RESOLUTION};
use crate::rng;

/// Parameters of `q(z) = prod_i prod_k N(z_i[k]; mu_i[k], sigma_i[k]^2 I)`
/// together with the global bias. `mu` is laid out node -> cut point ->
/// dimension, `log_sigma` node -> cut point.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState {
    n: usize,
    cuts: usize,
    dim: usize,
    mu: Vec<f64>,
    log_sigma: Vec<f64>,
    pub beta: f64,
}

impl VariationalState {
    pub fn from_parts(
        n: usize,
        cuts: usize,
        dim: usize,
        mu: Vec<f64>,
        log_sigma: Vec<f64>,
        beta: f64,
    ) -> Result<Self> {
        if mu.len() != n * cuts * dim || log_sigma.len() != n * cuts {
            return Err(Error::InvalidArgument(format!(
                "state arrays have lengths {} and {}, expected {} and {}",
                mu.len(),
                log_sigma.len(),
                n * cuts * dim,
                n * cuts
            )));
        }
        if cuts == 0 || dim == 0 {
            return Err(Error::InvalidArgument(
                "need at least one cut point and one dimension".into(),
            ));
        }
        Ok(Self {
            n,
            cuts,
            dim,
            mu,
            log_sigma,
            beta,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_cut_points(&self) -> usize {
        self.cuts
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn mu_mut(&mut self) -> &mut [f64] {
        &mut self.mu
    }

    pub fn log_sigma(&self) -> &[f64] {
        &self.log_sigma
    }

    pub fn log_sigma_mut(&mut self) -> &mut [f64] {
        &mut self.log_sigma
    }

    pub fn mean(&self, i: NodeId, k: usize) -> &[f64] {
        let o = (i * self.cuts + k) * self.dim;
        &self.mu[o..o + self.dim]
    }

    pub fn sigma(&self, i: NodeId, k: usize) -> f64 {
        self.log_sigma[i * self.cuts + k].exp()
    }

    pub fn is_finite(&self) -> bool {
        self.beta.is_finite()
            && self.mu.iter().all(|v| v.is_finite())
            && self.log_sigma.iter().all(|v| v.is_finite())
    }

    /// The configuration `z = mu`.
    pub fn mean_configuration(&self, part: &IntervalPartition) -> Result<LatentConfiguration> {
        self.check_partition(part)?;
        LatentConfiguration::from_vec(self.n, self.dim, part.clone(), self.mu.clone())
    }

    /// Draws `z ~ q` with a fresh noise array from `rng`.
    pub fn sample<R: rand::Rng + ?Sized>(
        &self,
        part: &IntervalPartition,
        rng: &mut R,
    ) -> Result<LatentConfiguration> {
        let eps = standard_noise(self.mu.len(), rng);
        reparam_sample(self, &eps, part)
    }

    fn check_partition(&self, part: &IntervalPartition) -> Result<()> {
        if part.cut_points().len() != self.cuts {
            return Err(Error::InvalidArgument(format!(
                "partition has {} cut points, state has {}",
                part.cut_points().len(),
                self.cuts
            )));
        }
        Ok(())
    }
}

pub(crate) fn standard_noise<R: rand::Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// `z_i[k] = mu_i[k] + sigma_i[k] * eps_i[k]`.
pub fn reparam_sample(
    vs: &VariationalState,
    eps: &[f64],
    part: &IntervalPartition,
) -> Result<LatentConfiguration> {
    vs.check_partition(part)?;
    if eps.len() != vs.mu.len() {
        return Err(Error::InvalidArgument(format!(
            "noise has {} entries, expected {}",
            eps.len(),
            vs.mu.len()
        )));
    }
    let d = vs.dim;
    let z = vs
        .mu
        .iter()
        .zip(eps)
        .enumerate()
        .map(|(idx, (&m, &e))| {
            let s = vs.log_sigma[idx / d].exp();
            // exp(-inf) = 0 would give 0 * inf = NaN for infinite noise.
            if s == 0.0 {
                m
            } else {
                m + s * e
            }
        })
        .collect();
    LatentConfiguration::from_vec(vs.n, d, part.clone(), z)
}

pub const INIT_SCALE: f64 = 0.1;

/// `mu ~ N(0, 0.1^2)`, `sigma = 0.1`, `beta = 0`.
pub fn init_state(n: usize, hp: &Hyperparams, seed: u64) -> VariationalState {
    let cuts = hp.num_intervals + 1;
    let mut rng = rng::seeded(seed);
    let normal = Normal::new(0.0, INIT_SCALE).expect("valid scale");
    let mu = (0..n * cuts * hp.dim).map(|_| normal.sample(&mut rng)).collect();
    VariationalState {
        n,
        cuts,
        dim: hp.dim,
        mu,
        log_sigma: vec![INIT_SCALE.ln(); n * cuts],
        beta: 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub dim: usize,
    pub num_intervals: usize,
    pub tau: f64,
    /// Defaults to `tau` when absent.
    pub tau0: Option<f64>,
    pub epochs: usize,
    pub lr_phi: f64,
    pub lr_beta: f64,
    pub riemann_resolution: usize,
    pub kind: RateKind,
    pub plan: PlanSpec,
    /// Posterior draws averaged per step.
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            dim: 2,
            num_intervals: 15,
            tau: 1.0,
            tau0: None,
            epochs: 500,
            lr_phi: 0.01,
            lr_beta: 1e-5,
            riemann_resolution: DEFAULT_RESOLUTION,
            kind: RateKind::EuclideanDistance,
            plan: PlanSpec::default(),
            mc_samples: 1,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn tau0(&self) -> f64 {
        self.tau0.unwrap_or(self.tau)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if self.dim == 0 {
            return bad("dimension must be >= 1");
        }
        if self.num_intervals == 0 {
            return bad("need at least one interval");
        }
        if !(self.tau > 0.0 && self.tau.is_finite() && self.tau0() > 0.0 && self.tau0().is_finite())
        {
            return bad("prior scales must be positive and finite");
        }
        if !(self.lr_phi >= 0.0 && self.lr_beta >= 0.0) {
            return bad("learning rates must be non-negative");
        }
        if self.riemann_resolution == 0 {
            return bad("Riemann resolution must be >= 1");
        }
        if self.mc_samples == 0 {
            return bad("need at least one posterior sample per step");
        }
        if self.plan.negatives == Some(0) || self.plan.batch_size == Some(0) {
            return bad("negative count and batch size must be >= 1");
        }
        Ok(())
    }
}

/// A trained posterior and everything needed to reuse it.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub state: VariationalState,
    pub hyper: Hyperparams,
    pub partition: IntervalPartition,
    pub loss_trace: Vec<f64>,
    pub labels: Vec<String>,
    pub time_range: TimeRange,
    pub directed: bool,
    /// How held-out pairs were chosen, if any were.
    pub split: Option<SplitSpec>,
}

impl FittedModel {
    pub fn rate_model(&self) -> crate::model::RateModel {
        crate::model::RateModel::new(self.hyper.kind, self.state.beta)
            .with_resolution(self.hyper.riemann_resolution)
    }

    pub fn mean_configuration(&self) -> LatentConfiguration {
        self.state
            .mean_configuration(&self.partition)
            .expect("state and partition agree")
    }
}
