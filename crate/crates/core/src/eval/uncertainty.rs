//! Node- and edge-level posterior uncertainty.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::events::{CountTensor, EventList, IntervalPartition, NodeId, Pair};
use crate::inference::{reparam_sample, standard_noise, FittedModel, VariationalState};
use crate::model::{
    cumulative_rate_closed, cumulative_rate_riemann, squared_distance, LatentConfiguration,
    RateKind, RateModel,
};
use crate::rng;

/// `u(i, k)`: mean of the two endpoint scales of interval `k`.
pub fn node_uncertainty(vs: &VariationalState, i: NodeId, k: usize) -> f64 {
    0.5 * (vs.sigma(i, k) + vs.sigma(i, k + 1))
}

/// Mean distance at the interval midpoint between the posterior-mean
/// position of `i` and those of its partners in interval `k`, or `None`
/// without partners.
pub fn neighbor_distance(
    fm: &FittedModel,
    counts: &CountTensor,
    i: NodeId,
    k: usize,
) -> Option<f64> {
    neighbor_distance_in(&fm.mean_configuration(), counts, i, k)
}

fn neighbor_distance_in(
    cfg: &LatentConfiguration,
    counts: &CountTensor,
    i: NodeId,
    k: usize,
) -> Option<f64> {
    let nb = counts.neighbors(i, k);
    if nb.is_empty() {
        return None;
    }
    let zi = cfg.interpolate(i, k, 0.5);
    let total: f64 = nb
        .iter()
        .map(|&j| squared_distance(&zi, &cfg.interpolate(j, k, 0.5)).sqrt())
        .sum();
    Some(total / nb.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeUncertaintyRow {
    pub node: NodeId,
    pub k: usize,
    pub u: f64,
    pub neighbor_dist: Option<f64>,
    pub degree: u64,
}

impl NodeUncertaintyRow {
    /// Every node and interval.
    pub fn table(fm: &FittedModel, counts: &CountTensor) -> Vec<NodeUncertaintyRow> {
        let cfg = fm.mean_configuration();
        let mut rows = Vec::new();
        for node in 0..fm.state.num_nodes() {
            for k in 0..fm.partition.num_intervals() {
                rows.push(NodeUncertaintyRow {
                    node,
                    k,
                    u: node_uncertainty(&fm.state, node, k),
                    neighbor_dist: neighbor_distance_in(&cfg, counts, node, k),
                    degree: crate::events::node_degree(counts, node, k),
                });
            }
        }
        rows
    }
}

/// A `(pair, interval)` triple.
pub type Triple = (NodeId, NodeId, usize);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeStats {
    pub mean: f64,
    /// Spread of the draws with divisor `B`.
    pub std: f64,
}

fn cumulative(cfg: &LatentConfiguration, rm: &RateModel, (i, j, k): Triple) -> Result<f64> {
    match rm.kind {
        RateKind::EuclideanDistance => cumulative_rate_closed(cfg, rm, i, j, k),
        RateKind::DotProduct => Ok(cumulative_rate_riemann(cfg, rm, i, j, k, rm.resolution)),
    }
}

// Draws evaluated in parallel between two in-order accumulation passes.
const DRAW_CHUNK: usize = 16;

/// Runs `f` on `draws` posterior configurations (draw `b` uses its own
/// derived stream) and folds each result vector into running means and
/// squared deviations in draw order.
fn posterior_moments<F>(
    vs: &VariationalState,
    part: &IntervalPartition,
    draws: usize,
    seed: u64,
    width: usize,
    f: F,
) -> Result<Vec<EdgeStats>>
where
    F: Fn(&LatentConfiguration) -> Result<Vec<f64>> + Sync,
{
    if draws < 2 {
        return Err(Error::InvalidArgument("need at least two posterior draws".into()));
    }
    let mut mean = vec![0.0; width];
    let mut m2 = vec![0.0; width];
    let mut seen = 0usize;
    for start in (0..draws).step_by(DRAW_CHUNK) {
        let end = (start + DRAW_CHUNK).min(draws);
        let rows: Vec<Vec<f64>> = (start..end)
            .into_par_iter()
            .map(|b| {
                let mut r = rng::stream(seed, b as u64);
                let eps = standard_noise(vs.mu().len(), &mut r);
                f(&reparam_sample(vs, &eps, part)?)
            })
            .collect::<Result<_>>()?;
        for row in rows {
            seen += 1;
            for ((m, s), x) in mean.iter_mut().zip(m2.iter_mut()).zip(row) {
                let delta = x - *m;
                *m += delta / seen as f64;
                *s += delta * (x - *m);
            }
        }
    }
    Ok(mean
        .into_iter()
        .zip(m2)
        .map(|(mean, s)| EdgeStats {
            mean,
            std: (s / draws as f64).sqrt(),
        })
        .collect())
}

/// Posterior-predictive mean and spread of `Lambda_ij(I_k)` for every
/// triple, sharing the `B` configurations drawn from `q`. The bias and
/// rate family come from `rm`.
pub fn edge_uncertainty_batch(
    vs: &VariationalState,
    part: &IntervalPartition,
    rm: &RateModel,
    triples: &[Triple],
    draws: usize,
    seed: u64,
) -> Result<Vec<EdgeStats>> {
    for &(i, j, k) in triples {
        if i == j {
            return Err(Error::SelfPair(i));
        }
        if i >= vs.num_nodes() || j >= vs.num_nodes() || k >= part.num_intervals() {
            return Err(Error::InvalidArgument(format!("triple ({i}, {j}, {k}) out of range")));
        }
    }
    posterior_moments(vs, part, draws, seed, triples.len(), |cfg| {
        triples.iter().map(|&t| cumulative(cfg, rm, t)).collect()
    })
}

pub fn edge_uncertainty(
    vs: &VariationalState,
    part: &IntervalPartition,
    rm: &RateModel,
    triple: Triple,
    draws: usize,
    seed: u64,
) -> Result<EdgeStats> {
    Ok(edge_uncertainty_batch(vs, part, rm, &[triple], draws, seed)?[0])
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    /// The `(N, Std)` points actually regressed.
    pub points: Vec<(f64, f64)>,
}

/// Least-squares slope and intercept of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument("x and y differ in length".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if x.len() < 2 || sxx == 0.0 {
        return Err(Error::DegenerateDesign);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Regression points from `(count, std)` observations: one point per
/// observation, or the mean std for each distinct count.
pub fn regression_points(obs: &[(u32, f64)], per_unique: bool) -> Vec<(f64, f64)> {
    if !per_unique {
        return obs.iter().map(|&(n, s)| (n as f64, s)).collect();
    }
    let mut groups: std::collections::BTreeMap<u32, (f64, usize)> = Default::default();
    for &(n, s) in obs {
        let g = groups.entry(n).or_insert((0.0, 0));
        g.0 += s;
        g.1 += 1;
    }
    groups
        .into_iter()
        .map(|(n, (sum, c))| (n as f64, sum / c as f64))
        .collect()
}

/// Slope of `Std(Lambda_ij(I_k))` against `N_ij(I_k)` over `pairs` times
/// every interval.
#[allow(clippy::too_many_arguments)]
pub fn uncertainty_regression(
    vs: &VariationalState,
    part: &IntervalPartition,
    rm: &RateModel,
    counts: &CountTensor,
    pairs: &[Pair],
    draws: usize,
    seed: u64,
    per_unique: bool,
) -> Result<RegressionFit> {
    let triples: Vec<Triple> = pairs
        .iter()
        .flat_map(|&(i, j)| (0..part.num_intervals()).map(move |k| (i, j, k)))
        .collect();
    let stats = edge_uncertainty_batch(vs, part, rm, &triples, draws, seed)?;
    let obs: Vec<(u32, f64)> = triples
        .iter()
        .zip(&stats)
        .map(|(&(i, j, k), s)| (counts.get(i, j, k), s.std))
        .collect();
    let points = regression_points(&obs, per_unique);
    let (x, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    let (slope, intercept) = ols_slope(&x, &y)?;
    Ok(RegressionFit {
        slope,
        intercept,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateRecord {
    /// Index of the event in the event list.
    pub event: usize,
    pub i: NodeId,
    pub j: NodeId,
    pub t: f64,
    pub negative: bool,
    /// Log-rate at the posterior-mean configuration.
    pub log_rate: f64,
    /// Spread of `lambda_ij(t)` over posterior draws.
    pub rate_std: f64,
    /// `N_ij(I_k)` of the interval containing `t`.
    pub count: u32,
}

/// For every event, a positive record and a negative one whose partner is
/// replaced by a uniformly drawn node distinct from both endpoints.
pub fn rate_vs_uncertainty_table(
    ev: &EventList,
    fm: &FittedModel,
    counts: &CountTensor,
    draws: usize,
    seed: u64,
) -> Result<Vec<RateRecord>> {
    let n = ev.num_nodes();
    if n < 3 && !ev.is_empty() {
        return Err(Error::InvalidArgument(
            "negative partners need at least three nodes".into(),
        ));
    }
    let part = &fm.partition;
    let rm = fm.rate_model();
    let mut r = rng::stream(seed, u64::MAX);
    let mut records = Vec::with_capacity(2 * ev.len());
    for (idx, e) in ev.events().iter().enumerate() {
        let k = part.interval_of(e.time);
        let j_neg = loop {
            let c = rand::Rng::random_range(&mut r, 0..n);
            if c != e.source && c != e.dest {
                break c;
            }
        };
        for (j, negative) in [(e.dest, false), (j_neg, true)] {
            records.push(RateRecord {
                event: idx,
                i: e.source,
                j,
                t: e.time,
                negative,
                log_rate: 0.0,
                rate_std: 0.0,
                count: counts.get(e.source, j, k),
            });
        }
    }
    let mean_cfg = fm.mean_configuration();
    for rec in &mut records {
        rec.log_rate = rate_at(&mean_cfg, &rm, rec).ln();
    }
    let stats = posterior_moments(
        &fm.state,
        part,
        draws,
        rng::derive_seed(seed, 1),
        records.len(),
        |cfg| Ok(records.iter().map(|rec| rate_at(cfg, &rm, rec)).collect()),
    )?;
    for (rec, s) in records.iter_mut().zip(stats) {
        rec.rate_std = s.std;
    }
    Ok(records)
}

fn rate_at(cfg: &LatentConfiguration, rm: &RateModel, rec: &RateRecord) -> f64 {
    let k = cfg.partition().interval_of(rec.t);
    let s = cfg.partition().fraction(k, rec.t);
    rm.log_rate_between(&cfg.interpolate(rec.i, k, s), &cfg.interpolate(rec.j, k, s))
        .exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{interval_counts, Event, TimeRange};
    use crate::inference::{init_state, Hyperparams};

    fn model(n: usize, k: usize, log_sigma: f64) -> FittedModel {
        let hp = Hyperparams {
            num_intervals: k,
            epochs: 0,
            ..Default::default()
        };
        let mut state = init_state(n, &hp, 2);
        state.log_sigma_mut().iter_mut().for_each(|v| *v = log_sigma);
        FittedModel {
            state,
            hyper: hp,
            partition: IntervalPartition::uniform(k).unwrap(),
            loss_trace: vec![],
            labels: (0..n).map(|i| i.to_string()).collect(),
            time_range: TimeRange::UNIT,
            directed: false,
            split: None,
        }
    }

    #[test]
    fn node_uncertainty_averages_endpoints() {
        let mut fm = model(1, 2, 0.0);
        fm.state.log_sigma_mut()[1] = 0.2f64.ln();
        fm.state.log_sigma_mut()[2] = 0.4f64.ln();
        assert!((node_uncertainty(&fm.state, 0, 1) - 0.3).abs() < 1e-15);
        let fm = model(2, 3, 0.7f64.ln());
        for k in 0..3 {
            assert!((node_uncertainty(&fm.state, 1, k) - 0.7).abs() < 1e-15);
        }
    }

    #[test]
    fn neighbor_distance_examples() {
        let mut fm = model(4, 1, 0.0);
        let mu = fm.state.mu_mut();
        mu.iter_mut().for_each(|v| *v = 0.0);
        // Node 1 sits on node 0; node 2 at distance 1, node 3 at distance 3.
        for k in 0..2 {
            mu[(2 * 2 + k) * 2] = 1.0;
            mu[(3 * 2 + k) * 2 + 1] = 3.0;
        }
        let ev = EventList::new(
            vec![
                Event { source: 0, dest: 1, time: 0.5 },
                Event { source: 1, dest: 2, time: 0.5 },
                Event { source: 1, dest: 3, time: 0.5 },
            ],
            4,
            false,
        )
        .unwrap();
        let counts = interval_counts(&ev, &fm.partition);
        assert_eq!(neighbor_distance(&fm, &counts, 0, 0), Some(0.0));
        assert_eq!(neighbor_distance(&fm, &counts, 1, 0).map(|d| (d * 3.0).round()), Some(4.0));
        let counts = interval_counts(
            &EventList::new(
                vec![
                    Event { source: 0, dest: 2, time: 0.5 },
                    Event { source: 0, dest: 3, time: 0.5 },
                ],
                4,
                false,
            )
            .unwrap(),
            &fm.partition,
        );
        assert_eq!(neighbor_distance(&fm, &counts, 0, 0), Some(2.0));
        assert_eq!(neighbor_distance(&fm, &counts, 1, 0), None);
    }

    #[test]
    fn collapsed_posterior_has_no_spread() {
        let fm = model(3, 4, -40.0);
        let rm = fm.rate_model();
        let s = edge_uncertainty(&fm.state, &fm.partition, &rm, (0, 2, 1), 50, 9).unwrap();
        let at_mean = crate::eval::score_tgne(&fm, 0, 2, 1).unwrap();
        assert!(s.std < 1e-12);
        assert!((s.mean - at_mean).abs() < 1e-12 * at_mean);
        let again = edge_uncertainty(&fm.state, &fm.partition, &rm, (0, 2, 1), 50, 9).unwrap();
        assert_eq!(s, again);
        assert!(edge_uncertainty(&fm.state, &fm.partition, &rm, (0, 2, 1), 1, 9).is_err());
    }

    #[test]
    fn slope_examples() {
        let x: Vec<f64> = (0..6).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|n| 2.0 - 0.1 * n).collect();
        let (slope, icpt) = ols_slope(&x, &y).unwrap();
        assert!((slope + 0.1).abs() < 1e-14 && (icpt - 2.0).abs() < 1e-14);
        assert_eq!(ols_slope(&x, &[0.4; 6]).unwrap().0, 0.0);
        assert!(matches!(ols_slope(&[2.0, 2.0], &[1.0, 3.0]), Err(Error::DegenerateDesign)));
        let pts = regression_points(&[(0, 1.0), (0, 3.0), (2, 0.5)], true);
        assert_eq!(pts, vec![(0.0, 2.0), (2.0, 0.5)]);
    }

    #[test]
    fn rate_table_shape() {
        let fm = model(5, 2, -50.0);
        let ev = EventList::new(
            vec![
                Event { source: 0, dest: 1, time: 0.2 },
                Event { source: 2, dest: 4, time: 0.7 },
                Event { source: 1, dest: 3, time: 1.0 },
            ],
            5,
            false,
        )
        .unwrap();
        let counts = interval_counts(&ev, &fm.partition);
        let rows = rate_vs_uncertainty_table(&ev, &fm, &counts, 10, 3).unwrap();
        assert_eq!(rows.len(), 6);
        for pair in rows.chunks(2) {
            let (pos, neg) = (&pair[0], &pair[1]);
            assert!(!pos.negative && neg.negative);
            assert_eq!(pos.i, neg.i);
            assert!(neg.j != pos.j && neg.j != neg.i);
            assert_eq!(pos.count, 1);
            assert!(pos.rate_std < 1e-12 && neg.rate_std < 1e-12);
        }
    }
}
