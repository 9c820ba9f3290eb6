//! Run configuration: defaults, then `--config` file, then flags.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clpm::events::{ParseOptions, SplitSpec, TimeRange};
use clpm::inference::Hyperparams;
use clpm::model::{PlanSpec, RateKind};
use clpm::simulate::{DEFAULT_INTER_RATE, DEFAULT_INTRA_RATE};
use serde::{Deserialize, Serialize};

/// Everything a run depends on. Keys mirror the long flag names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub events: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    pub out: PathBuf,
    pub directed: bool,
    /// Fixed clock bounds for time normalisation; min-max when absent.
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub seed: u64,

    pub n: usize,
    pub intra_rate: f64,
    pub inter_rate: f64,

    pub d: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub tau: f64,
    pub tau0: Option<f64>,
    pub epochs: usize,
    pub lr_phi: f64,
    pub lr_beta: f64,
    pub riemann: usize,
    pub kind: RateKind,
    pub negatives: Option<usize>,
    pub batch: Option<usize>,
    pub mc_samples: usize,
    pub test_frac: f64,
    pub val_frac: f64,
    pub threads: Option<usize>,
    pub strict_deterministic: bool,

    pub scorers: Vec<String>,
    /// Posterior draws for the uncertainty tables.
    pub draws: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let hp = Hyperparams::default();
        Self {
            events: None,
            model: None,
            pairs: None,
            out: PathBuf::from("."),
            directed: false,
            t_min: None,
            t_max: None,
            seed: 0,
            n: 60,
            intra_rate: DEFAULT_INTRA_RATE,
            inter_rate: DEFAULT_INTER_RATE,
            d: hp.dim,
            k: hp.num_intervals,
            tau: hp.tau,
            tau0: hp.tau0,
            epochs: hp.epochs,
            lr_phi: hp.lr_phi,
            lr_beta: hp.lr_beta,
            riemann: hp.riemann_resolution,
            kind: hp.kind,
            negatives: None,
            batch: None,
            mc_samples: hp.mc_samples,
            test_frac: 0.1,
            val_frac: 0.0,
            threads: None,
            strict_deterministic: false,
            scorers: ["tgne", "lsdm", "pa", "random"].map(String::from).to_vec(),
            draws: 100,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            dim: self.d,
            num_intervals: self.k,
            tau: self.tau,
            tau0: self.tau0,
            epochs: self.epochs,
            lr_phi: self.lr_phi,
            lr_beta: self.lr_beta,
            riemann_resolution: self.riemann,
            kind: self.kind,
            plan: PlanSpec {
                negatives: self.negatives,
                batch_size: self.batch,
            },
            mc_samples: self.mc_samples,
            seed: self.seed,
        }
    }

    /// `None` when both fractions are zero.
    pub fn split(&self) -> Option<SplitSpec> {
        (self.test_frac > 0.0 || self.val_frac > 0.0).then_some(SplitSpec {
            test_frac: self.test_frac,
            val_frac: self.val_frac,
            seed: self.seed,
        })
    }

    pub fn parse_options(&self) -> anyhow::Result<ParseOptions> {
        let time_range = match (self.t_min, self.t_max) {
            (None, None) => None,
            (Some(t_min), Some(t_max)) if t_min < t_max => Some(TimeRange { t_min, t_max }),
            (Some(_), Some(_)) => anyhow::bail!("t_min must be below t_max"),
            _ => anyhow::bail!("t_min and t_max must be given together"),
        };
        Ok(ParseOptions {
            directed: self.directed,
            time_range,
            labels: None,
        })
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        let path = dir.join("config.json");
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}
