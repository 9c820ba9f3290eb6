//! Poisson-process negative log-likelihood of a configuration, exact or
//! estimated from node batches and case-control negative samples, with its
//! gradient.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cumulative::{survival, GradSink};
use super::{LatentConfiguration, RateKind, RateModel};
use crate::error::{Error, Result};
use crate::events::{canonical, Adjacency, EventList, IntervalPartition, NodeId, Pair};

/// Sufficient statistics of the event times of one pair inside one
/// interval. With `s` the fraction of the interval elapsed at each event:
/// `s_aa = sum (1-s)^2`, `s_ab = sum 2 s (1-s)`, `s_bb = sum s^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventStats {
    pub k: usize,
    pub count: u32,
    pub s_aa: f64,
    pub s_ab: f64,
    pub s_bb: f64,
}

impl EventStats {
    fn empty(k: usize) -> Self {
        Self {
            k,
            count: 0,
            s_aa: 0.0,
            s_ab: 0.0,
            s_bb: 0.0,
        }
    }

    fn push(&mut self, s: f64) {
        self.count += 1;
        self.s_aa += (1.0 - s) * (1.0 - s);
        self.s_ab += 2.0 * s * (1.0 - s);
        self.s_bb += s * s;
    }
}

/// Event statistics of every interacting pair, grouped by interval.
#[derive(Debug, Clone, Default)]
pub struct PairEvents {
    pairs: Vec<(Pair, Vec<EventStats>)>,
    index: HashMap<Pair, usize>,
}

impl PairEvents {
    pub fn build(ev: &EventList, part: &IntervalPartition, skip: &BTreeSet<Pair>) -> Self {
        let mut out = PairEvents::default();
        for e in ev.events() {
            let pair = ev.pair_of(e);
            if skip.contains(&pair) {
                continue;
            }
            let k = part.interval_of(e.time);
            let s = part.fraction(k, e.time);
            let idx = *out.index.entry(pair).or_insert_with(|| {
                out.pairs.push((pair, Vec::new()));
                out.pairs.len() - 1
            });
            let stats = &mut out.pairs[idx].1;
            match stats.last_mut() {
                Some(last) if last.k == k => last.push(s),
                _ => {
                    let mut st = EventStats::empty(k);
                    st.push(s);
                    stats.push(st);
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn index_of(&self, pair: Pair) -> Option<usize> {
        self.index.get(&pair).copied()
    }

    pub fn stats(&self, idx: usize) -> &[EventStats] {
        &self.pairs[idx].1
    }

    pub fn iter(&self) -> impl Iterator<Item = (Pair, &[EventStats])> {
        self.pairs.iter().map(|(p, s)| (*p, s.as_slice()))
    }
}

/// Everything the likelihood needs from the observed data. Pairs listed in
/// `excluded` (held-out validation and test pairs) are treated as missing:
/// they contribute neither events nor survival terms.
#[derive(Debug, Clone)]
pub struct TrainingData {
    n: usize,
    directed: bool,
    partition: IntervalPartition,
    events: PairEvents,
    adjacency: Adjacency,
    excluded: BTreeSet<Pair>,
}

impl TrainingData {
    pub fn new(ev: &EventList, part: &IntervalPartition, excluded: BTreeSet<Pair>) -> Self {
        Self {
            n: ev.num_nodes(),
            directed: ev.directed(),
            partition: part.clone(),
            events: PairEvents::build(ev, part, &excluded),
            adjacency: Adjacency::new(ev),
            excluded,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    pub fn partition(&self) -> &IntervalPartition {
        &self.partition
    }

    pub fn events(&self) -> &PairEvents {
        &self.events
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }

    pub fn excluded(&self) -> &BTreeSet<Pair> {
        &self.excluded
    }

    fn is_excluded(&self, i: NodeId, j: NodeId) -> bool {
        self.excluded.contains(&canonical(i, j, self.directed))
    }
}

/// How each epoch's likelihood is assembled. `None` everywhere means the
/// exact full likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PlanSpec {
    /// Never-interacting partners sampled per source node.
    pub negatives: Option<usize>,
    /// Source nodes per batch.
    pub batch_size: Option<usize>,
}

impl PlanSpec {
    pub fn is_full(&self) -> bool {
        self.negatives.is_none() && self.batch_size.is_none()
    }
}

/// One weighted pair of the likelihood sum, covering every interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanEntry {
    pub src: NodeId,
    pub dst: NodeId,
    pub weight: f64,
    /// Index into [`PairEvents`] when the pair has training events.
    pub events: Option<usize>,
}

/// A realised likelihood estimator: which pairs enter and with what weight.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SamplingPlan {
    pub entries: Vec<PlanEntry>,
}

impl SamplingPlan {
    /// Every non-excluded pair once (ordered pairs when directed).
    pub fn full(data: &TrainingData) -> Self {
        let mut entries = Vec::new();
        for i in 0..data.n {
            let start = if data.directed { 0 } else { i + 1 };
            for j in start..data.n {
                if i == j || data.is_excluded(i, j) {
                    continue;
                }
                entries.push(PlanEntry {
                    src: i,
                    dst: j,
                    weight: 1.0,
                    events: data.events.index_of((i, j)),
                });
            }
        }
        Self { entries }
    }

    /// Draws node batches and/or negative samples per `spec`.
    ///
    /// The estimator is written per source node. For undirected data each
    /// pair is then reached from both endpoints, so terms carry weight 1/2.
    /// A batch of `b` sources is rescaled by `n / b`; sampled negatives by
    /// `pool / sampled`.
    pub fn draw<R: Rng + ?Sized>(data: &TrainingData, spec: &PlanSpec, rng: &mut R) -> Self {
        if spec.is_full() {
            return Self::full(data);
        }
        let n = data.n;
        let sources: Vec<NodeId> = match spec.batch_size {
            Some(b) if b < n => {
                let mut s: Vec<NodeId> = rand::seq::index::sample(rng, n, b.max(1)).into_vec();
                s.sort_unstable();
                s
            }
            _ => (0..n).collect(),
        };
        let scale = n as f64 / sources.len() as f64;
        let orient = if data.directed { 1.0 } else { 0.5 };
        let base = scale * orient;
        let key = |i: NodeId, j: NodeId| canonical(i, j, data.directed);

        let mut entries = Vec::new();
        for &i in &sources {
            match spec.negatives {
                None => {
                    for j in 0..n {
                        if j != i && !data.is_excluded(i, j) {
                            entries.push(PlanEntry {
                                src: i,
                                dst: j,
                                weight: base,
                                events: data.events.index_of(key(i, j)),
                            });
                        }
                    }
                }
                Some(m) => {
                    for &j in data.adjacency.partners(i) {
                        if !data.is_excluded(i, j) {
                            entries.push(PlanEntry {
                                src: i,
                                dst: j,
                                weight: base,
                                events: data.events.index_of(key(i, j)),
                            });
                        }
                    }
                    let sample = crate::events::sample_negatives_with(
                        &data.adjacency,
                        i,
                        m,
                        &data.excluded,
                        rng,
                    );
                    if sample.pairs.is_empty() {
                        continue;
                    }
                    let w = base * sample.pool_size as f64 / sample.pairs.len() as f64;
                    for (_, j) in sample.pairs {
                        entries.push(PlanEntry {
                            src: i,
                            dst: j,
                            weight: w,
                            events: None,
                        });
                    }
                }
            }
        }
        Self { entries }
    }
}

/// Gradient of the negative log-likelihood with respect to every critical
/// point (same layout as [`LatentConfiguration`]) and to beta.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigGradient {
    pub dz: Vec<f64>,
    pub dbeta: f64,
}

/// `Lambda_ij(I_k) - sum_t log lambda_ij(t)` for the given event times.
pub fn pair_interval_nll(
    cfg: &LatentConfiguration,
    rm: &RateModel,
    i: NodeId,
    j: NodeId,
    k: usize,
    times: &[f64],
) -> Result<f64> {
    if i == j {
        return Err(Error::SelfPair(i));
    }
    let part = cfg.partition();
    let (lo, hi) = part.bounds(k);
    let mut stats = EventStats::empty(k);
    for &t in times {
        if !(lo..=hi).contains(&t) {
            return Err(Error::InvalidArgument(format!(
                "event time {t} lies outside interval {k} = [{lo}, {hi}]"
            )));
        }
        stats.push(part.fraction(k, t));
    }
    let ends = [
        cfg.point(i, k),
        cfg.point(i, k + 1),
        cfg.point(j, k),
        cfg.point(j, k + 1),
    ];
    let lambda = survival(rm.kind, rm.beta, part.length(k), rm.resolution, ends, None);
    Ok(lambda + event_term(rm.kind, rm.beta, ends, &stats, None))
}

/// `-sum_t log lambda(t)` from the sufficient statistics.
fn event_term(
    kind: RateKind,
    beta: f64,
    ends: [&[f64]; 4],
    st: &EventStats,
    sink: Option<GradSink<'_>>,
) -> f64 {
    let [ia, ib, ja, jb] = ends;
    let dim = ia.len();
    let n = st.count as f64;
    let half_ab = 0.5 * st.s_ab;
    match kind {
        RateKind::EuclideanDistance => {
            let (mut aa, mut ab, mut bb) = (0.0, 0.0, 0.0);
            for c in 0..dim {
                let da = ia[c] - ja[c];
                let db = ib[c] - jb[c];
                aa += da * da;
                ab += da * db;
                bb += db * db;
            }
            if let Some(sink) = sink {
                let w = sink.weight;
                *sink.dbeta -= w * n;
                let g = sink.grad;
                for c in 0..dim {
                    let da = ia[c] - ja[c];
                    let db = ib[c] - jb[c];
                    let g_a = w * (2.0 * st.s_aa * da + st.s_ab * db);
                    let g_b = w * (st.s_ab * da + 2.0 * st.s_bb * db);
                    g[c] += g_a;
                    g[dim + c] += g_b;
                    g[2 * dim + c] -= g_a;
                    g[3 * dim + c] -= g_b;
                }
            }
            st.s_aa * aa + st.s_ab * ab + st.s_bb * bb - n * beta
        }
        RateKind::DotProduct => {
            let mut inner = 0.0;
            for c in 0..dim {
                inner += st.s_aa * ia[c] * ja[c]
                    + half_ab * (ia[c] * jb[c] + ib[c] * ja[c])
                    + st.s_bb * ib[c] * jb[c];
            }
            if let Some(sink) = sink {
                let w = sink.weight;
                *sink.dbeta -= w * n;
                let g = sink.grad;
                for c in 0..dim {
                    g[c] -= w * (st.s_aa * ja[c] + half_ab * jb[c]);
                    g[dim + c] -= w * (half_ab * ja[c] + st.s_bb * jb[c]);
                    g[2 * dim + c] -= w * (st.s_aa * ia[c] + half_ab * ib[c]);
                    g[3 * dim + c] -= w * (half_ab * ia[c] + st.s_bb * ib[c]);
                }
            }
            -inner - n * beta
        }
    }
}

const CHUNK: usize = 1024;

struct Partial {
    value: f64,
    dz: Vec<f64>,
    dbeta: f64,
}

fn eval_chunk(
    cfg: &LatentConfiguration,
    rm: &RateModel,
    data: &TrainingData,
    entries: &[PlanEntry],
    want_grad: bool,
) -> Partial {
    let dim = cfg.dim();
    let part = cfg.partition();
    let mut out = Partial {
        value: 0.0,
        dz: if want_grad {
            vec![0.0; cfg.as_slice().len()]
        } else {
            Vec::new()
        },
        dbeta: 0.0,
    };
    let mut scratch = vec![0.0; 4 * dim];
    for e in entries {
        let stats: &[EventStats] = e.events.map_or(&[], |idx| data.events.stats(idx));
        let mut next = 0;
        let mut entry_value = 0.0;
        for k in 0..part.num_intervals() {
            let ends = [
                cfg.point(e.src, k),
                cfg.point(e.src, k + 1),
                cfg.point(e.dst, k),
                cfg.point(e.dst, k + 1),
            ];
            scratch.iter_mut().for_each(|v| *v = 0.0);
            let len = part.length(k);
            let sink = want_grad.then(|| GradSink {
                grad: &mut scratch,
                dbeta: &mut out.dbeta,
                weight: e.weight,
            });
            entry_value += survival(rm.kind, rm.beta, len, rm.resolution, ends, sink);
            if next < stats.len() && stats[next].k == k {
                let sink = want_grad.then(|| GradSink {
                    grad: &mut scratch,
                    dbeta: &mut out.dbeta,
                    weight: e.weight,
                });
                entry_value += event_term(rm.kind, rm.beta, ends, &stats[next], sink);
                next += 1;
            }
            if want_grad {
                let targets = [(e.src, k), (e.src, k + 1), (e.dst, k), (e.dst, k + 1)];
                for (slot, (node, cut)) in targets.into_iter().enumerate() {
                    let o = cfg.offset(node, cut);
                    for c in 0..dim {
                        out.dz[o + c] += scratch[slot * dim + c];
                    }
                }
            }
        }
        out.value += e.weight * entry_value;
    }
    out
}

fn evaluate(
    cfg: &LatentConfiguration,
    rm: &RateModel,
    data: &TrainingData,
    plan: &SamplingPlan,
    want_grad: bool,
    parallel: bool,
) -> (f64, Option<ConfigGradient>) {
    // Fixed chunking and an in-order final sum make the result independent
    // of the thread count.
    let partials: Vec<Partial> = if parallel {
        plan.entries
            .par_chunks(CHUNK)
            .map(|c| eval_chunk(cfg, rm, data, c, want_grad))
            .collect()
    } else {
        plan.entries
            .chunks(CHUNK)
            .map(|c| eval_chunk(cfg, rm, data, c, want_grad))
            .collect()
    };
    let mut value = 0.0;
    let mut grad = want_grad.then(|| ConfigGradient {
        dz: vec![0.0; cfg.as_slice().len()],
        dbeta: 0.0,
    });
    for p in partials {
        value += p.value;
        if let Some(g) = grad.as_mut() {
            for (acc, v) in g.dz.iter_mut().zip(&p.dz) {
                *acc += v;
            }
            g.dbeta += p.dbeta;
        }
    }
    (value, grad)
}

/// Negative log-likelihood of the configuration under `plan`.
pub fn total_nll(
    cfg: &LatentConfiguration,
    rm: &RateModel,
    data: &TrainingData,
    plan: &SamplingPlan,
) -> f64 {
    evaluate(cfg, rm, data, plan, false, false).0
}

/// Negative log-likelihood and its exact gradient. `parallel` spreads the
/// fixed chunks over the current rayon pool without changing the result.
pub fn total_nll_with_gradient(
    cfg: &LatentConfiguration,
    rm: &RateModel,
    data: &TrainingData,
    plan: &SamplingPlan,
    parallel: bool,
) -> (f64, ConfigGradient) {
    let (v, g) = evaluate(cfg, rm, data, plan, true, parallel);
    (v, g.expect("gradient requested"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::Event;

    fn small_config(n: usize, k: usize, seed: u64) -> LatentConfiguration {
        use rand_distr::{Distribution, StandardNormal};
        let part = IntervalPartition::uniform(k).unwrap();
        let mut rng = crate::rng::seeded(seed);
        let len = n * (k + 1) * 2;
        let z = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
        LatentConfiguration::from_vec(n, 2, part, z).unwrap()
    }

    #[test]
    fn pure_survival_and_unit_log_rate() {
        let part = IntervalPartition::uniform(15).unwrap();
        let cfg = LatentConfiguration::zeros(2, 2, part.clone());
        let rm = RateModel::euclidean(0.0);
        let v = pair_interval_nll(&cfg, &rm, 0, 1, 3, &[]).unwrap();
        assert!((v - 1.0 / 15.0).abs() < 1e-15);
        let t = part.midpoint(3);
        let v = pair_interval_nll(&cfg, &rm, 0, 1, 3, &[t]).unwrap();
        assert!((v - 1.0 / 15.0).abs() < 1e-15);
        assert!(pair_interval_nll(&cfg, &rm, 0, 1, 3, &[0.9]).is_err());
    }

    #[test]
    fn full_plan_decomposes_into_pair_terms() {
        let ev = EventList::new(
            vec![
                Event { source: 0, dest: 1, time: 0.1 },
                Event { source: 1, dest: 2, time: 0.7 },
                Event { source: 0, dest: 1, time: 0.95 },
            ],
            3,
            false,
        )
        .unwrap();
        let cfg = small_config(3, 2, 4);
        let part = cfg.partition().clone();
        let rm = RateModel::euclidean(0.4);
        let data = TrainingData::new(&ev, &part, BTreeSet::new());
        let total = total_nll(&cfg, &rm, &data, &SamplingPlan::full(&data));
        let mut by_hand = 0.0;
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            for k in 0..2 {
                let times: Vec<f64> = ev
                    .events()
                    .iter()
                    .filter(|e| (e.source, e.dest) == (i, j) && part.interval_of(e.time) == k)
                    .map(|e| e.time)
                    .collect();
                by_hand += pair_interval_nll(&cfg, &rm, i, j, k, &times).unwrap();
            }
        }
        assert!((total - by_hand).abs() < 1e-12 * by_hand.abs());
    }

    #[test]
    fn negatives_equal_to_pool_reproduce_full() {
        let ev = EventList::new(
            vec![
                Event { source: 0, dest: 1, time: 0.1 },
                Event { source: 2, dest: 3, time: 0.4 },
                Event { source: 1, dest: 4, time: 0.8 },
            ],
            6,
            false,
        )
        .unwrap();
        let cfg = small_config(6, 3, 9);
        let rm = RateModel::euclidean(-0.2);
        let data = TrainingData::new(&ev, cfg.partition(), BTreeSet::new());
        let full = total_nll(&cfg, &rm, &data, &SamplingPlan::full(&data));
        let spec = PlanSpec {
            negatives: Some(100),
            batch_size: None,
        };
        let plan = SamplingPlan::draw(&data, &spec, &mut crate::rng::seeded(1));
        let ns = total_nll(&cfg, &rm, &data, &plan);
        assert!((full - ns).abs() < 1e-12 * full.abs());
    }

    #[test]
    fn excluded_pairs_contribute_nothing() {
        let ev = EventList::new(
            vec![
                Event { source: 0, dest: 1, time: 0.1 },
                Event { source: 1, dest: 2, time: 0.4 },
            ],
            3,
            false,
        )
        .unwrap();
        let cfg = small_config(3, 1, 2);
        let excluded: BTreeSet<Pair> = [(0, 1)].into_iter().collect();
        let data = TrainingData::new(&ev, cfg.partition(), excluded);
        let plan = SamplingPlan::full(&data);
        assert_eq!(plan.entries.len(), 2);
        assert!(plan.entries.iter().all(|e| (e.src, e.dst) != (0, 1)));
    }
}
