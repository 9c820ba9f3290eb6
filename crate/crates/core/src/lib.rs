//! Variational inference for the continuous latent position model.
//!
//! Nodes of a continuous-time interaction network are embedded as
//! piecewise-linear trajectories of isotropic Gaussians. Each dyad's events
//! form a Poisson process whose log-rate is `beta - ||z_i(t) - z_j(t)||^2`
//! (or `beta + <z_i(t), z_j(t)>`). A Gaussian random-walk prior ties the
//! critical points of each trajectory together, and a mean-field posterior
//! is fitted by minimising the negative evidence lower bound with Adam.
//!
//! Intervals are indexed from zero: interval `k` spans cut points `k` and
//! `k + 1`, so a partition with `K` intervals has `K + 1` cut points.

pub mod error;
pub mod eval;
pub mod events;
pub mod inference;
pub mod io;
pub mod model;
pub mod normal;
pub mod prior;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
pub use events::{
    CountTensor, EdgeSplit, Event, EventList, IntervalPartition, NodeId, Pair, ParseOptions,
    TimeRange,
};
pub use inference::{FittedModel, Hyperparams, VariationalState};
pub use model::{LatentConfiguration, RateKind, RateModel};
pub use prior::PriorConfig;
