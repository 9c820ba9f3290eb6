//! Temporal network reconstruction: every scorer on the train and test
//! instance sets of one edge split.

use std::collections::BTreeSet;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::lsdm::{fit_lsdm, LsdmFit, LsdmOptions};
use super::scorers::{random_scores, Scorer, TgneScorer};
use super::uncertainty::{edge_uncertainty_batch, Triple};
use super::{auc, build_instances, negative_universe, score_all, ScoredInstance};
use crate::error::{Error, Result};
use crate::events::{candidate_pairs, interval_counts, EdgeSplit, EventList, Pair};
use crate::inference::FittedModel;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScorerKind {
    /// Cumulative rate at the posterior-mean trajectories.
    Tgne,
    /// Posterior-predictive mean of the cumulative rate.
    TgnePosterior,
    Lsdm,
    Pa,
    Random,
}

impl ScorerKind {
    pub const ALL: [ScorerKind; 5] = [
        ScorerKind::Tgne,
        ScorerKind::TgnePosterior,
        ScorerKind::Lsdm,
        ScorerKind::Pa,
        ScorerKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScorerKind::Tgne => "tgne",
            ScorerKind::TgnePosterior => "tgne-posterior",
            ScorerKind::Lsdm => "lsdm",
            ScorerKind::Pa => "pa",
            ScorerKind::Random => "random",
        }
    }
}

impl FromStr for ScorerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scorer {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOptions {
    pub scorers: Vec<ScorerKind>,
    /// Posterior draws for the posterior-predictive scorer.
    pub draws: usize,
    pub lsdm: LsdmOptions,
    pub seed: u64,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        Self {
            scorers: vec![ScorerKind::Tgne, ScorerKind::Lsdm, ScorerKind::Pa, ScorerKind::Random],
            draws: 100,
            lsdm: LsdmOptions::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AucEntry {
    pub scorer: String,
    pub split: String,
    pub auc: f64,
    pub positives: usize,
    pub negatives: usize,
    pub negative_shortfall: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchmarkResult {
    pub entries: Vec<AucEntry>,
    /// `(scorer, split, instance)` rows.
    pub instances: Vec<(String, String, ScoredInstance)>,
}

impl BenchmarkResult {
    pub fn auc(&self, scorer: &str, split: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.scorer == scorer && e.split == split)
            .map(|e| e.auc)
    }
}

struct LsdmScorer(Vec<LsdmFit>);

impl Scorer for LsdmScorer {
    fn score(&self, i: usize, j: usize, k: usize) -> Result<f64> {
        Ok(self.0[k].probability(i, j))
    }
}

/// Scores the train and test instance sets of `split` with each requested
/// scorer. Baselines only see training pairs; negatives for each split are
/// drawn from that split's pairs and the never-interacting pairs.
pub fn reconstruction_benchmark(
    ev: &EventList,
    fm: &FittedModel,
    split: &EdgeSplit,
    opts: &BenchmarkOptions,
) -> Result<BenchmarkResult> {
    if ev.num_nodes() != fm.state.num_nodes() {
        return Err(Error::InvalidArgument(format!(
            "events have {} nodes, model has {}",
            ev.num_nodes(),
            fm.state.num_nodes()
        )));
    }
    let part = &fm.partition;
    let counts = interval_counts(ev, part);
    let train_counts = counts.restricted_to(&split.train);
    let interacting: BTreeSet<Pair> = ev.unique_pairs().into_iter().collect();
    let n = ev.num_nodes();

    let lsdm = if opts.scorers.contains(&ScorerKind::Lsdm) {
        let pairs = candidate_pairs(n, ev.directed(), &split.held_out());
        let fits = (0..part.num_intervals())
            .map(|k| fit_lsdm(&train_counts, &pairs, k, &opts.lsdm))
            .collect::<Result<Vec<_>>>()?;
        Some(LsdmScorer(fits))
    } else {
        None
    };
    let tgne = TgneScorer::new(fm);

    let mut out = BenchmarkResult::default();
    for (tag, (split_name, positives)) in [("train", &split.train), ("test", &split.test)]
        .into_iter()
        .enumerate()
    {
        if positives.is_empty() {
            continue;
        }
        let universe = negative_universe(n, ev.directed(), positives, &interacting);
        let set = build_instances(&counts, positives, &universe, rng::derive_seed(opts.seed, tag as u64));
        let shortfall = set.shortfall.iter().map(|s| s.1).sum();
        for &kind in &opts.scorers {
            let mut inst = set.instances.clone();
            match kind {
                ScorerKind::Tgne => score_all(&mut inst, &tgne)?,
                ScorerKind::TgnePosterior => {
                    let triples: Vec<Triple> = inst.iter().map(|x| (x.i, x.j, x.k)).collect();
                    let stats = edge_uncertainty_batch(
                        &fm.state,
                        part,
                        &fm.rate_model(),
                        &triples,
                        opts.draws,
                        rng::derive_seed(opts.seed, 10 + tag as u64),
                    )?;
                    for (x, s) in inst.iter_mut().zip(stats) {
                        x.score = s.mean;
                    }
                }
                ScorerKind::Lsdm => score_all(&mut inst, lsdm.as_ref().expect("fitted above"))?,
                ScorerKind::Pa => score_all(&mut inst, &train_counts)?,
                ScorerKind::Random => {
                    let scores = random_scores(inst.len(), rng::derive_seed(opts.seed, 20 + tag as u64));
                    for (x, s) in inst.iter_mut().zip(scores) {
                        x.score = s;
                    }
                }
            }
            let positives = inst.iter().filter(|x| x.label).count();
            out.entries.push(AucEntry {
                scorer: kind.name().into(),
                split: split_name.into(),
                auc: auc(&inst)?,
                positives,
                negatives: inst.len() - positives,
                negative_shortfall: shortfall,
            });
            out.instances
                .extend(inst.into_iter().map(|x| (kind.name().to_string(), split_name.to_string(), x)));
        }
    }
    Ok(out)
}
