use std::borrow::Cow;
use std::collections::BTreeSet;

use super::adam::{adam_step, OptState};
use super::elbo::{accumulate_nll, Objective, StateGradient};
use super::{init_state, standard_noise, FittedModel, Hyperparams};
use crate::error::{Error, Result};
use crate::events::{split_edges, EventList, IntervalPartition, Pair, SplitSpec};
use crate::model::{SamplingPlan, TrainingData};
use crate::prior::{kl_with_gradient, PriorConfig};
use crate::rng;

const TAG_INIT: u64 = 1;
const TAG_NOISE: u64 = 2;
const TAG_PLAN: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FitOptions {
    /// Size of the worker pool; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    /// Sequential evaluation throughout.
    pub strict: bool,
}

/// Trains the posterior for `hp.epochs` Adam steps. When `split` is given,
/// its validation and test pairs are removed from the likelihood and from
/// every negative pool.
pub fn fit(
    ev: &EventList,
    hp: &Hyperparams,
    split: Option<SplitSpec>,
    opts: FitOptions,
) -> Result<FittedModel> {
    hp.validate()?;
    if ev.num_nodes() < 2 {
        return Err(Error::InvalidArgument("need at least two nodes".into()));
    }
    let excluded: BTreeSet<Pair> = match split {
        Some(s) => split_edges(ev, s.test_frac, s.val_frac, s.seed)?.held_out(),
        None => BTreeSet::new(),
    };
    let run = || train(ev, hp, excluded, opts.strict);
    let (state, partition, loss_trace) = match opts.threads {
        Some(t) if !opts.strict => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(run)?,
        _ => run()?,
    };
    Ok(FittedModel {
        state,
        hyper: hp.clone(),
        partition,
        loss_trace,
        labels: ev.labels().to_vec(),
        time_range: ev.time_range(),
        directed: ev.directed(),
        split,
    })
}

type Trained = (super::VariationalState, IntervalPartition, Vec<f64>);

fn train(
    ev: &EventList,
    hp: &Hyperparams,
    excluded: BTreeSet<Pair>,
    strict: bool,
) -> Result<Trained> {
    let part = IntervalPartition::uniform(hp.num_intervals)?;
    let data = TrainingData::new(ev, &part, excluded);
    let prior = PriorConfig::new(hp.tau, hp.tau0(), &part, hp.dim)?;
    let obj = Objective {
        data: &data,
        prior: &prior,
        kind: hp.kind,
        resolution: hp.riemann_resolution,
    };
    let mut state = init_state(ev.num_nodes(), hp, rng::derive_seed(hp.seed, TAG_INIT));
    let mut opt = OptState::new(&state);
    let mut noise_rng = rng::stream(hp.seed, TAG_NOISE);
    let mut plan_rng = rng::stream(hp.seed, TAG_PLAN);
    let full_plan = hp.plan.is_full().then(|| SamplingPlan::full(&data));
    let mut trace = Vec::with_capacity(hp.epochs);

    for epoch in 0..hp.epochs {
        let plan = match &full_plan {
            Some(p) => Cow::Borrowed(p),
            None => Cow::Owned(SamplingPlan::draw(&data, &hp.plan, &mut plan_rng)),
        };
        let mut grad = StateGradient::zeros(&state);
        let mut nll = 0.0;
        for _ in 0..hp.mc_samples {
            let eps = standard_noise(state.mu().len(), &mut noise_rng);
            nll += accumulate_nll(&state, &obj, &plan, &eps, !strict, &mut grad)?;
        }
        if hp.mc_samples > 1 {
            let f = 1.0 / hp.mc_samples as f64;
            nll *= f;
            grad.scale(f);
        }
        let (kl, d_mu, d_ls) = kl_with_gradient(&state, &prior)?;
        let non_finite = |term, value: f64| Error::NonFinite { epoch, term, value };
        if !nll.is_finite() {
            return Err(non_finite("likelihood", nll));
        }
        if !kl.is_finite() {
            return Err(non_finite("KL divergence", kl));
        }
        for (g, v) in grad.d_mu.iter_mut().zip(&d_mu) {
            *g += v;
        }
        for (g, v) in grad.d_log_sigma.iter_mut().zip(&d_ls) {
            *g += v;
        }
        if let Some(bad) = grad
            .d_mu
            .iter()
            .chain(&grad.d_log_sigma)
            .chain(std::iter::once(&grad.d_beta))
            .find(|v| !v.is_finite())
        {
            return Err(non_finite("gradient", *bad));
        }
        trace.push(nll + kl);
        if epoch % 50 == 0 || epoch + 1 == hp.epochs {
            log::debug!("epoch {epoch}: loss {:.6} (nll {nll:.6}, kl {kl:.6})", nll + kl);
        }
        adam_step(&mut state, &mut opt, &grad, hp.lr_phi, hp.lr_beta);
    }
    if !state.is_finite() {
        return Err(Error::NonFinite {
            epoch: hp.epochs,
            term: "parameters",
            value: f64::NAN,
        });
    }
    Ok((state, part, trace))
}
