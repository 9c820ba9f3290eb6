use rand::Rng;

use crate::error::Result;
use crate::events::{node_degree, CountTensor, NodeId};
use crate::inference::FittedModel;
use crate::model::{cumulative_rate_closed, cumulative_rate_riemann, LatentConfiguration, RateKind, RateModel};
use crate::rng;

/// Anything that scores a `(pair, interval)` triple.
pub trait Scorer {
    fn score(&self, i: NodeId, j: NodeId, k: usize) -> Result<f64>;
}

/// Expected number of events `Lambda_ij(I_k)` at the posterior mean
/// trajectories.
#[derive(Debug, Clone)]
pub struct TgneScorer {
    cfg: LatentConfiguration,
    rm: RateModel,
}

impl TgneScorer {
    pub fn new(fm: &FittedModel) -> Self {
        Self {
            cfg: fm.mean_configuration(),
            rm: fm.rate_model(),
        }
    }
}

impl Scorer for TgneScorer {
    fn score(&self, i: NodeId, j: NodeId, k: usize) -> Result<f64> {
        match self.rm.kind {
            RateKind::EuclideanDistance => cumulative_rate_closed(&self.cfg, &self.rm, i, j, k),
            RateKind::DotProduct => Ok(cumulative_rate_riemann(
                &self.cfg,
                &self.rm,
                i,
                j,
                k,
                self.rm.resolution,
            )),
        }
    }
}

pub fn score_tgne(fm: &FittedModel, i: NodeId, j: NodeId, k: usize) -> Result<f64> {
    TgneScorer::new(fm).score(i, j, k)
}

/// `deg(i, k) * deg(j, k)` from the counts it is given, which should hold
/// training pairs only.
pub fn score_pa(train_counts: &CountTensor, i: NodeId, j: NodeId, k: usize) -> f64 {
    node_degree(train_counts, i, k) as f64 * node_degree(train_counts, j, k) as f64
}

impl Scorer for CountTensor {
    fn score(&self, i: NodeId, j: NodeId, k: usize) -> Result<f64> {
        Ok(score_pa(self, i, j, k))
    }
}

/// `count` independent `Uniform(0, 1)` scores.
pub fn random_scores(count: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::seeded(seed);
    (0..count).map(|_| r.random::<f64>()).collect()
}
