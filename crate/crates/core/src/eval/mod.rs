//! Reconstruction benchmark (instances, scorers, AUC) and uncertainty
//! analytics.

mod benchmark;
mod lsdm;
mod scorers;
mod uncertainty;

pub use benchmark::{
    reconstruction_benchmark, AucEntry, BenchmarkOptions, BenchmarkResult, ScorerKind,
};
pub use lsdm::{fit_lsdm, lsdm_objective, LsdmFit, LsdmOptions};
pub use scorers::{random_scores, score_pa, score_tgne, Scorer, TgneScorer};
pub use uncertainty::{
    edge_uncertainty, edge_uncertainty_batch, neighbor_distance, node_uncertainty, ols_slope,
    rate_vs_uncertainty_table, regression_points, uncertainty_regression, EdgeStats,
    NodeUncertaintyRow, RateRecord, RegressionFit, Triple,
};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{candidate_pairs, CountTensor, NodeId, Pair};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredInstance {
    pub i: NodeId,
    pub j: NodeId,
    pub k: usize,
    pub score: f64,
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InstanceSet {
    /// Unscored instances (score 0), positives and negatives interleaved by
    /// interval.
    pub instances: Vec<ScoredInstance>,
    /// `(interval, missing negatives)` wherever the candidates ran out.
    pub shortfall: Vec<(usize, usize)>,
}

/// Pairs eligible as negatives when evaluating on `split_pairs`: the split's
/// own pairs plus every pair that never interacts. Pairs belonging to the
/// other splits are left out.
pub fn negative_universe(
    n: usize,
    directed: bool,
    split_pairs: &BTreeSet<Pair>,
    interacting: &BTreeSet<Pair>,
) -> Vec<Pair> {
    let other: BTreeSet<Pair> = interacting.difference(split_pairs).copied().collect();
    candidate_pairs(n, directed, &other)
}

/// For every interval, each pair of `positives` active there yields a
/// positive instance, matched by one negative drawn without replacement
/// from the `universe` pairs inactive in that interval.
pub fn build_instances(
    counts: &CountTensor,
    positives: &BTreeSet<Pair>,
    universe: &[Pair],
    seed: u64,
) -> InstanceSet {
    let mut out = InstanceSet::default();
    for k in 0..counts.num_intervals() {
        let pos: Vec<Pair> = positives
            .iter()
            .copied()
            .filter(|&(i, j)| counts.get(i, j, k) > 0)
            .collect();
        if pos.is_empty() {
            continue;
        }
        let cand: Vec<Pair> = universe
            .iter()
            .copied()
            .filter(|&(i, j)| counts.get(i, j, k) == 0)
            .collect();
        let take = pos.len().min(cand.len());
        let mut rng = rng::stream(seed, k as u64);
        let mut neg: Vec<Pair> = rand::seq::index::sample(&mut rng, cand.len(), take)
            .into_iter()
            .map(|idx| cand[idx])
            .collect();
        neg.sort_unstable();
        let stub = |(i, j): Pair, label| ScoredInstance {
            i,
            j,
            k,
            score: 0.0,
            label,
        };
        out.instances.extend(pos.iter().map(|&p| stub(p, true)));
        out.instances.extend(neg.into_iter().map(|p| stub(p, false)));
        if take < pos.len() {
            log::warn!(
                "interval {k}: only {take} negatives available for {} positives",
                pos.len()
            );
            out.shortfall.push((k, pos.len() - take));
        }
    }
    out
}

/// Mann-Whitney estimate of the area under the ROC curve, ties receiving
/// average ranks.
pub fn auc(instances: &[ScoredInstance]) -> Result<f64> {
    let n_pos = instances.iter().filter(|x| x.label).count();
    let n_neg = instances.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    if instances.iter().any(|x| x.score.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.sort_by(|&a, &b| instances[a].score.total_cmp(&instances[b].score));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && instances[order[end]].score == instances[order[start]].score {
            end += 1;
        }
        // Ranks start+1 ..= end share their mean.
        let avg = (start + 1 + end) as f64 / 2.0;
        let pos_in_tie = order[start..end]
            .iter()
            .filter(|&&idx| instances[idx].label)
            .count();
        rank_sum += avg * pos_in_tie as f64;
        start = end;
    }
    let np = n_pos as f64;
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

/// Scores every instance in place.
pub fn score_all<S: Scorer + ?Sized>(instances: &mut [ScoredInstance], scorer: &S) -> Result<()> {
    for x in instances {
        x.score = scorer.score(x.i, x.j, x.k)?;
    }
    Ok(())
}

/// `scorer,split,i,j,k,label,score` rows.
pub fn write_instances_csv<W: std::io::Write>(
    rows: &[(String, String, ScoredInstance)],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scorer", "split", "i", "j", "k", "label", "score"])?;
    for (name, split, x) in rows {
        w.serialize((name, split, x.i, x.j, x.k, u8::from(x.label), x.score))?;
    }
    w.flush()?;
    Ok(())
}
