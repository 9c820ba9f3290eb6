//! Single-sample negative ELBO `NLL(mu + sigma * eps) + KL(q || p)` and its
//! exact gradient. With `z = mu + sigma * eps` the chain rule gives
//! `dL/dmu = dNLL/dz + dKL/dmu` and
//! `dL/dlog sigma = sigma * <dNLL/dz, eps> + dKL/dlog sigma`.

use super::{reparam_sample, VariationalState};
use crate::error::Result;
use crate::model::{total_nll, total_nll_with_gradient, RateKind, RateModel, SamplingPlan, TrainingData};
use crate::prior::{kl_to_prior, kl_with_gradient, PriorConfig};

/// Everything the loss depends on besides the state, the plan and the noise.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a> {
    pub data: &'a TrainingData,
    pub prior: &'a PriorConfig,
    pub kind: RateKind,
    pub resolution: usize,
}

impl Objective<'_> {
    fn rate_model(&self, beta: f64) -> RateModel {
        RateModel::new(self.kind, beta).with_resolution(self.resolution)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub nll: f64,
    pub kl: f64,
}

impl LossParts {
    pub fn total(&self) -> f64 {
        self.nll + self.kl
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateGradient {
    pub d_mu: Vec<f64>,
    pub d_log_sigma: Vec<f64>,
    pub d_beta: f64,
}

impl StateGradient {
    pub fn zeros(vs: &VariationalState) -> Self {
        Self {
            d_mu: vec![0.0; vs.mu().len()],
            d_log_sigma: vec![0.0; vs.log_sigma().len()],
            d_beta: 0.0,
        }
    }

    pub fn scale(&mut self, f: f64) {
        self.d_mu.iter_mut().for_each(|v| *v *= f);
        self.d_log_sigma.iter_mut().for_each(|v| *v *= f);
        self.d_beta *= f;
    }
}

/// Negative ELBO at the noise `eps` (one draw shaped like `mu`).
pub fn elbo_loss(
    vs: &VariationalState,
    obj: &Objective<'_>,
    plan: &SamplingPlan,
    eps: &[f64],
) -> Result<LossParts> {
    let cfg = reparam_sample(vs, eps, obj.data.partition())?;
    let nll = total_nll(&cfg, &obj.rate_model(vs.beta), obj.data, plan);
    let kl = kl_to_prior(vs, obj.prior)?;
    Ok(LossParts { nll, kl })
}

/// Negative ELBO and its exact gradient at the noise `eps`.
pub fn loss_gradient(
    vs: &VariationalState,
    obj: &Objective<'_>,
    plan: &SamplingPlan,
    eps: &[f64],
    parallel: bool,
) -> Result<(LossParts, StateGradient)> {
    let mut grad = StateGradient::zeros(vs);
    let nll = accumulate_nll(vs, obj, plan, eps, parallel, &mut grad)?;
    let (kl, d_mu, d_ls) = kl_with_gradient(vs, obj.prior)?;
    add(&mut grad.d_mu, &d_mu);
    add(&mut grad.d_log_sigma, &d_ls);
    Ok((LossParts { nll, kl }, grad))
}

/// Adds the likelihood gradient at `mu + sigma * eps` to `grad` and
/// returns the likelihood value.
pub(crate) fn accumulate_nll(
    vs: &VariationalState,
    obj: &Objective<'_>,
    plan: &SamplingPlan,
    eps: &[f64],
    parallel: bool,
    grad: &mut StateGradient,
) -> Result<f64> {
    let cfg = reparam_sample(vs, eps, obj.data.partition())?;
    let (nll, g) = total_nll_with_gradient(&cfg, &obj.rate_model(vs.beta), obj.data, plan, parallel);
    let d = vs.dim();
    add(&mut grad.d_mu, &g.dz);
    for (idx, ds) in grad.d_log_sigma.iter_mut().enumerate() {
        let sigma = vs.log_sigma()[idx].exp();
        let o = idx * d;
        let inner: f64 = g.dz[o..o + d]
            .iter()
            .zip(&eps[o..o + d])
            .map(|(a, b)| a * b)
            .sum();
        *ds += sigma * inner;
    }
    grad.d_beta += g.dbeta;
    Ok(nll)
}

fn add(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}
