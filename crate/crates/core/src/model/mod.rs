//! Piecewise-linear latent trajectories and the Poisson-process rate model.

mod cumulative;
mod likelihood;

pub use cumulative::{
    closed_form_moments, cumulative_rate_closed, cumulative_rate_riemann, SegmentMoments,
    DEGENERATE_DIRECTION,
};
pub use likelihood::{
    pair_interval_nll, total_nll, total_nll_with_gradient, ConfigGradient, EventStats,
    PairEvents, PlanEntry, PlanSpec, SamplingPlan, TrainingData,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{IntervalPartition, NodeId};

/// Critical points `z[i][k]` of every trajectory, stored row-major as
/// node -> cut point -> dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentConfiguration {
    n: usize,
    dim: usize,
    z: Vec<f64>,
    partition: IntervalPartition,
}

impl LatentConfiguration {
    pub fn zeros(n: usize, dim: usize, partition: IntervalPartition) -> Self {
        let len = n * partition.cut_points().len() * dim;
        Self {
            n,
            dim,
            z: vec![0.0; len],
            partition,
        }
    }

    pub fn from_vec(
        n: usize,
        dim: usize,
        partition: IntervalPartition,
        z: Vec<f64>,
    ) -> Result<Self> {
        if z.len() != n * partition.cut_points().len() * dim {
            return Err(Error::InvalidArgument(format!(
                "expected {} coordinates, got {}",
                n * partition.cut_points().len() * dim,
                z.len()
            )));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite critical point".into()));
        }
        Ok(Self {
            n,
            dim,
            z,
            partition,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn partition(&self) -> &IntervalPartition {
        &self.partition
    }

    pub fn num_intervals(&self) -> usize {
        self.partition.num_intervals()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.z
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.z
    }

    fn offset(&self, i: NodeId, k: usize) -> usize {
        (i * self.partition.cut_points().len() + k) * self.dim
    }

    /// Critical point of node `i` at cut point `k`.
    pub fn point(&self, i: NodeId, k: usize) -> &[f64] {
        let o = self.offset(i, k);
        &self.z[o..o + self.dim]
    }

    pub fn point_mut(&mut self, i: NodeId, k: usize) -> &mut [f64] {
        let o = self.offset(i, k);
        let d = self.dim;
        &mut self.z[o..o + d]
    }

    /// Position of node `i` at time `t` by linear interpolation of the two
    /// critical points bracketing `t`.
    pub fn position_at(&self, i: NodeId, t: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::TimeOutOfRange(t));
        }
        let k = self.partition.interval_of(t);
        let s = self.partition.fraction(k, t);
        Ok(self.interpolate(i, k, s))
    }

    pub(crate) fn interpolate(&self, i: NodeId, k: usize, s: f64) -> Vec<f64> {
        let a = self.point(i, k);
        let b = self.point(i, k + 1);
        a.iter()
            .zip(b)
            .map(|(&x, &y)| (1.0 - s) * x + s * y)
            .collect()
    }

    /// Shifts every critical point by `v`.
    pub fn translate(&mut self, v: &[f64]) {
        for chunk in self.z.chunks_mut(self.dim) {
            for (x, dv) in chunk.iter_mut().zip(v) {
                *x += dv;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RateKind {
    /// `log lambda = beta - ||z_i - z_j||^2`
    #[default]
    EuclideanDistance,
    /// `log lambda = beta + <z_i, z_j>`
    DotProduct,
}

impl std::str::FromStr for RateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean-distance" | "euclidean" | "distance" => Ok(RateKind::EuclideanDistance),
            "dot-product" | "dot" => Ok(RateKind::DotProduct),
            other => Err(Error::InvalidArgument(format!("unknown rate model {other:?}"))),
        }
    }
}

/// Default number of Riemann sub-steps per interval.
pub const DEFAULT_RESOLUTION: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateModel {
    pub kind: RateKind,
    pub beta: f64,
    /// Riemann resolution used wherever no closed form applies.
    pub resolution: usize,
}

impl RateModel {
    pub fn new(kind: RateKind, beta: f64) -> Self {
        Self {
            kind,
            beta,
            resolution: DEFAULT_RESOLUTION,
        }
    }

    pub fn euclidean(beta: f64) -> Self {
        Self::new(RateKind::EuclideanDistance, beta)
    }

    pub fn dot_product(beta: f64) -> Self {
        Self::new(RateKind::DotProduct, beta)
    }

    pub fn with_resolution(mut self, resolution: usize) -> Self {
        self.resolution = resolution;
        self
    }

    /// Log-rate between two positions.
    pub fn log_rate_between(&self, zi: &[f64], zj: &[f64]) -> f64 {
        match self.kind {
            RateKind::EuclideanDistance => self.beta - squared_distance(zi, zj),
            RateKind::DotProduct => self.beta + dot(zi, zj),
        }
    }
}

/// `log lambda_ij(t)` under the configuration.
pub fn log_rate(
    cfg: &LatentConfiguration,
    rm: &RateModel,
    i: NodeId,
    j: NodeId,
    t: f64,
) -> Result<f64> {
    if i == j {
        return Err(Error::SelfPair(i));
    }
    let zi = cfg.position_at(i, t)?;
    let zj = cfg.position_at(j, t)?;
    Ok(rm.log_rate_between(&zi, &zj))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
