//! Timestamped interaction data: ingestion, interval partitions, counts,
//! edge splits and negative sampling.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub type NodeId = usize;

/// A node pair. Undirected data always stores `(min, max)`.
pub type Pair = (NodeId, NodeId);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub source: NodeId,
    pub dest: NodeId,
    pub time: f64,
}

/// Affine map from normalised time back to the original clock:
/// `original = t_min + t * (t_max - t_min)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeRange {
    pub t_min: f64,
    pub t_max: f64,
}

impl TimeRange {
    pub const UNIT: TimeRange = TimeRange {
        t_min: 0.0,
        t_max: 1.0,
    };

    pub fn to_original(&self, t: f64) -> f64 {
        self.t_min + t * (self.t_max - self.t_min)
    }

    pub fn normalize(&self, original: f64) -> f64 {
        let span = self.t_max - self.t_min;
        if span > 0.0 {
            (original - self.t_min) / span
        } else {
            0.0
        }
    }
}

/// Canonical key for a pair under the given orientation convention.
pub fn canonical(i: NodeId, j: NodeId, directed: bool) -> Pair {
    if directed || i < j {
        (i, j)
    } else {
        (j, i)
    }
}

/// Time-ordered interactions over `[0, 1]` with a contiguous node vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct EventList {
    events: Vec<Event>,
    n: usize,
    directed: bool,
    labels: Vec<String>,
    time_range: TimeRange,
}

impl EventList {
    /// Validates and canonicalises already-normalised events. Node labels
    /// default to the decimal ids.
    pub fn new(events: Vec<Event>, n: usize, directed: bool) -> Result<Self> {
        let labels = (0..n).map(|i| i.to_string()).collect();
        Self::with_labels(events, labels, directed, TimeRange::UNIT)
    }

    pub fn with_labels(
        mut events: Vec<Event>,
        labels: Vec<String>,
        directed: bool,
        time_range: TimeRange,
    ) -> Result<Self> {
        let n = labels.len();
        for e in &mut events {
            if !(0.0..=1.0).contains(&e.time) {
                return Err(Error::TimeOutOfRange(e.time));
            }
            if e.source >= n || e.dest >= n {
                return Err(Error::InvalidArgument(format!(
                    "event ({}, {}) references a node outside 0..{n}",
                    e.source, e.dest
                )));
            }
            if e.source == e.dest {
                return Err(Error::SelfPair(e.source));
            }
            if !directed && e.source > e.dest {
                std::mem::swap(&mut e.source, &mut e.dest);
            }
        }
        events.sort_by(|a, b| a.time.total_cmp(&b.time));
        Ok(Self {
            events,
            n,
            directed,
            labels,
            time_range,
        })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn time_range(&self) -> TimeRange {
        self.time_range
    }

    pub fn pair_of(&self, e: &Event) -> Pair {
        canonical(e.source, e.dest, self.directed)
    }

    /// Distinct pairs with at least one event, in sorted order.
    pub fn unique_pairs(&self) -> Vec<Pair> {
        let set: BTreeSet<Pair> = self.events.iter().map(|e| self.pair_of(e)).collect();
        set.into_iter().collect()
    }

    /// Rescales times so that the earliest event sits at 0 and the latest
    /// at 1, composing the stored clock mapping. Idempotent.
    pub fn normalize(&self) -> EventList {
        let (lo, hi) = match (self.events.first(), self.events.last()) {
            (Some(a), Some(b)) => (a.time, b.time),
            _ => return self.clone(),
        };
        if lo == 0.0 && hi == 1.0 {
            return self.clone();
        }
        let span = hi - lo;
        let mut out = self.clone();
        if span > 0.0 {
            for e in &mut out.events {
                e.time = ((e.time - lo) / span).clamp(0.0, 1.0);
            }
            // Pin the extremes so that a second pass is the identity.
            out.events.first_mut().unwrap().time = 0.0;
            out.events.last_mut().unwrap().time = 1.0;
            out.time_range = TimeRange {
                t_min: self.time_range.to_original(lo),
                t_max: self.time_range.to_original(hi),
            };
        } else {
            for e in &mut out.events {
                e.time = 0.0;
            }
            let t = self.time_range.to_original(lo);
            out.time_range = TimeRange { t_min: t, t_max: t };
        }
        out
    }
}

/// How raw rows are turned into an [`EventList`].
#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    pub directed: bool,
    /// Fixed clock bounds. When absent, times are min-max normalised.
    pub time_range: Option<TimeRange>,
    /// Fixed vocabulary; unknown labels become parse errors.
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct ParsedEvents {
    pub events: EventList,
    pub dropped_self_loops: usize,
}

/// Reads `source,dest,timestamp` rows (one header row).
///
/// Labels are assigned ids in sorted order; when every label is a
/// non-negative integer the order is numeric, otherwise lexicographic.
pub fn parse_events<R: Read>(source: R, opts: &ParseOptions) -> Result<ParsedEvents> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let mut rows: Vec<(String, String, f64)> = Vec::new();
    let mut header_seen = false;
    let mut dropped = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        if !header_seen {
            header_seen = true;
            continue;
        }
        let time: f64 = record[2].parse().map_err(|_| Error::Parse {
            line,
            message: format!("non-numeric timestamp {:?}", &record[2]),
        })?;
        if !time.is_finite() || time < 0.0 {
            return Err(Error::Parse {
                line,
                message: format!("timestamp must be a finite non-negative real, got {time}"),
            });
        }
        if record[0] == record[1] {
            dropped += 1;
            continue;
        }
        rows.push((record[0].to_string(), record[1].to_string(), time));
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }

    let labels = match &opts.labels {
        Some(l) => l.clone(),
        None => sorted_labels(rows.iter().flat_map(|(a, b, _)| [a.as_str(), b.as_str()])),
    };
    let index: HashMap<&str, NodeId> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    if index.len() != labels.len() {
        return Err(Error::InvalidArgument("duplicate node labels".into()));
    }

    let range = match opts.time_range {
        Some(r) => r,
        None => {
            let lo = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
            let hi = rows.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
            TimeRange { t_min: lo, t_max: hi }
        }
    };

    let mut events = Vec::with_capacity(rows.len());
    for (a, b, t) in &rows {
        let lookup = |label: &str| {
            index.get(label).copied().ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("unknown node label {label:?}"),
            })
        };
        let time = range.normalize(*t);
        if !(0.0..=1.0).contains(&time) {
            return Err(Error::TimeOutOfRange(time));
        }
        events.push(Event {
            source: lookup(a)?,
            dest: lookup(b)?,
            time,
        });
    }
    let events = EventList::with_labels(events, labels, opts.directed, range)?;
    Ok(ParsedEvents {
        events,
        dropped_self_loops: dropped,
    })
}

fn sorted_labels<'a>(it: impl Iterator<Item = &'a str>) -> Vec<String> {
    let set: BTreeSet<&str> = it.collect();
    let numeric: Option<Vec<(u64, &str)>> = set
        .iter()
        .map(|l| l.parse::<u64>().ok().map(|v| (v, *l)))
        .collect();
    match numeric {
        Some(mut v) => {
            v.sort();
            v.into_iter().map(|(_, l)| l.to_string()).collect()
        }
        None => set.into_iter().map(str::to_string).collect(),
    }
}

/// Writes events in the input format, mapping times back to the clock.
pub fn write_events_csv<W: std::io::Write>(ev: &EventList, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["source", "dest", "timestamp"])?;
    let range = ev.time_range();
    for e in ev.events() {
        w.write_record([
            ev.labels[e.source].as_str(),
            ev.labels[e.dest].as_str(),
            &range.to_original(e.time).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_nodes_csv<W: std::io::Write>(labels: &[String], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["label", "id"])?;
    for (id, label) in labels.iter().enumerate() {
        w.write_record([label.as_str(), &id.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `label,id` table back into an id-ordered label vector.
pub fn read_nodes_csv<R: Read>(source: R) -> Result<Vec<String>> {
    let mut reader = csv::Reader::from_reader(source);
    let mut pairs = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let id: usize = record[1].parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad node id {:?}", &record[1]),
        })?;
        pairs.push((id, record[0].to_string()));
    }
    pairs.sort();
    for (expected, (id, _)) in pairs.iter().enumerate() {
        if *id != expected {
            return Err(Error::Parse {
                line: 0,
                message: "node ids must be contiguous from 0".into(),
            });
        }
    }
    Ok(pairs.into_iter().map(|(_, l)| l).collect())
}

/// Cut points `0 = eta_0 < ... < eta_K = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalPartition {
    cut_points: Vec<f64>,
}

impl IntervalPartition {
    pub fn uniform(num_intervals: usize) -> Result<Self> {
        if num_intervals == 0 {
            return Err(Error::InvalidArgument(
                "a partition needs at least one interval".into(),
            ));
        }
        let k = num_intervals as f64;
        let mut cut_points: Vec<f64> = (0..=num_intervals).map(|i| i as f64 / k).collect();
        cut_points[num_intervals] = 1.0;
        Ok(Self { cut_points })
    }

    pub fn from_cut_points(cut_points: Vec<f64>) -> Result<Self> {
        let ok = cut_points.len() >= 2
            && cut_points[0] == 0.0
            && *cut_points.last().unwrap() == 1.0
            && cut_points.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(Error::InvalidArgument(
                "cut points must increase strictly from 0 to 1".into(),
            ));
        }
        Ok(Self { cut_points })
    }

    pub fn cut_points(&self) -> &[f64] {
        &self.cut_points
    }

    pub fn num_intervals(&self) -> usize {
        self.cut_points.len() - 1
    }

    pub fn bounds(&self, k: usize) -> (f64, f64) {
        (self.cut_points[k], self.cut_points[k + 1])
    }

    pub fn length(&self, k: usize) -> f64 {
        self.cut_points[k + 1] - self.cut_points[k]
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        0.5 * (self.cut_points[k] + self.cut_points[k + 1])
    }

    /// Interval containing `t`: left-closed, right-open, except that the
    /// last interval also holds `t = 1`.
    pub fn interval_of(&self, t: f64) -> usize {
        let last = self.num_intervals() - 1;
        // First cut point strictly greater than t.
        let upper = self.cut_points.partition_point(|&c| c <= t);
        upper.saturating_sub(1).min(last)
    }

    /// Position of `t` inside interval `k` as a fraction in `[0, 1]`.
    pub fn fraction(&self, k: usize, t: f64) -> f64 {
        let (a, b) = self.bounds(k);
        ((t - a) / (b - a)).clamp(0.0, 1.0)
    }
}

/// Sparse per-pair, per-interval event counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTensor {
    num_nodes: usize,
    num_intervals: usize,
    directed: bool,
    counts: BTreeMap<Pair, Vec<u32>>,
    degrees: Vec<Vec<u64>>,
}

impl CountTensor {
    fn from_map(
        num_nodes: usize,
        num_intervals: usize,
        directed: bool,
        counts: BTreeMap<Pair, Vec<u32>>,
    ) -> Self {
        let mut degrees = vec![vec![0u64; num_intervals]; num_nodes];
        for (&(i, j), per_k) in &counts {
            for (k, &c) in per_k.iter().enumerate() {
                degrees[i][k] += c as u64;
                degrees[j][k] += c as u64;
            }
        }
        Self {
            num_nodes,
            num_intervals,
            directed,
            counts,
            degrees,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_intervals(&self) -> usize {
        self.num_intervals
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    pub fn get(&self, i: NodeId, j: NodeId, k: usize) -> u32 {
        self.counts
            .get(&canonical(i, j, self.directed))
            .map_or(0, |v| v[k])
    }

    pub fn pair_counts(&self, pair: Pair) -> Option<&[u32]> {
        self.counts.get(&pair).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Pair, &[u32])> + '_ {
        self.counts.iter().map(|(p, v)| (*p, v.as_slice()))
    }

    pub fn pairs(&self) -> impl Iterator<Item = Pair> + '_ {
        self.counts.keys().copied()
    }

    pub fn total(&self) -> u64 {
        self.counts
            .values()
            .flat_map(|v| v.iter())
            .map(|&c| c as u64)
            .sum()
    }

    /// Keeps only the listed pairs.
    pub fn restricted_to(&self, keep: &BTreeSet<Pair>) -> CountTensor {
        let counts = self
            .counts
            .iter()
            .filter(|(p, _)| keep.contains(p))
            .map(|(p, v)| (*p, v.clone()))
            .collect();
        Self::from_map(self.num_nodes, self.num_intervals, self.directed, counts)
    }

    /// Partners of `i` with at least one event in interval `k`, either
    /// orientation.
    pub fn neighbors(&self, i: NodeId, k: usize) -> Vec<NodeId> {
        self.counts
            .iter()
            .filter(|(_, v)| v[k] > 0)
            .filter_map(|(&(a, b), _)| {
                if a == i {
                    Some(b)
                } else if b == i {
                    Some(a)
                } else {
                    None
                }
            })
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

pub fn interval_counts(ev: &EventList, part: &IntervalPartition) -> CountTensor {
    let k_total = part.num_intervals();
    let mut counts: BTreeMap<Pair, Vec<u32>> = BTreeMap::new();
    for e in ev.events() {
        let k = part.interval_of(e.time);
        counts.entry(ev.pair_of(e)).or_insert_with(|| vec![0; k_total])[k] += 1;
    }
    CountTensor::from_map(ev.num_nodes(), k_total, ev.directed(), counts)
}

/// Sum of counts of `i` with all partners in interval `k`, both orientations.
pub fn node_degree(counts: &CountTensor, i: NodeId, k: usize) -> u64 {
    counts.degrees[i][k]
}

/// Disjoint partition of the unique interacting pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSplit {
    pub train: BTreeSet<Pair>,
    pub validation: BTreeSet<Pair>,
    pub test: BTreeSet<Pair>,
    pub seed: u64,
}

impl EdgeSplit {
    /// Everything the training likelihood must not see.
    pub fn held_out(&self) -> BTreeSet<Pair> {
        self.validation.union(&self.test).copied().collect()
    }
}

/// Parameters that reproduce an [`EdgeSplit`] from the same event list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_frac: f64,
    pub val_frac: f64,
    pub seed: u64,
}

/// Shuffles the unique pairs with a seeded generator, then takes
/// `floor(test_frac * P)` test pairs and `floor(val_frac * P)` validation
/// pairs; the rest train.
pub fn split_edges(ev: &EventList, test_frac: f64, val_frac: f64, seed: u64) -> Result<EdgeSplit> {
    let valid = |f: f64| f.is_finite() && f >= 0.0;
    if !valid(test_frac) || !valid(val_frac) || test_frac + val_frac >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "split fractions must be non-negative with sum below 1 (test {test_frac}, validation {val_frac})"
        )));
    }
    let mut pairs = ev.unique_pairs();
    if pairs.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "splitting needs at least 3 unique pairs, found {}",
            pairs.len()
        )));
    }
    pairs.shuffle(&mut rng::seeded(seed));
    let total = pairs.len() as f64;
    let n_test = (test_frac * total).floor() as usize;
    let n_val = (val_frac * total).floor() as usize;
    let test = pairs[..n_test].iter().copied().collect();
    let validation = pairs[n_test..n_test + n_val].iter().copied().collect();
    let train = pairs[n_test + n_val..].iter().copied().collect();
    Ok(EdgeSplit {
        train,
        validation,
        test,
        seed,
    })
}

/// Interaction partners of every node: out-partners for directed data,
/// all partners otherwise.
#[derive(Debug, Clone)]
pub struct Adjacency {
    directed: bool,
    partners: Vec<BTreeSet<NodeId>>,
}

impl Adjacency {
    pub fn new(ev: &EventList) -> Self {
        let mut partners = vec![BTreeSet::new(); ev.num_nodes()];
        for e in ev.events() {
            partners[e.source].insert(e.dest);
            if !ev.directed() {
                partners[e.dest].insert(e.source);
            }
        }
        Self {
            directed: ev.directed(),
            partners,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.partners.len()
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    pub fn partners(&self, i: NodeId) -> &BTreeSet<NodeId> {
        &self.partners[i]
    }

    /// Nodes `j != i` never seen with `i` and whose pair is not excluded.
    pub fn negative_pool(&self, i: NodeId, excluded: &BTreeSet<Pair>) -> Vec<NodeId> {
        (0..self.partners.len())
            .filter(|&j| j != i && !self.partners[i].contains(&j))
            .filter(|&j| !excluded.contains(&canonical(i, j, self.directed)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegativeSample {
    /// Sampled pairs, oriented with the requested node first.
    pub pairs: Vec<Pair>,
    /// Size of the full candidate pool the sample was drawn from.
    pub pool_size: usize,
}

/// Uniform sample without replacement of at most `count` never-interacting
/// partners of `i`.
pub fn sample_negatives_with<R: Rng + ?Sized>(
    adj: &Adjacency,
    i: NodeId,
    count: usize,
    excluded: &BTreeSet<Pair>,
    rng: &mut R,
) -> NegativeSample {
    let pool = adj.negative_pool(i, excluded);
    let take = count.min(pool.len());
    let mut chosen: Vec<NodeId> = rand::seq::index::sample(rng, pool.len(), take)
        .into_iter()
        .map(|idx| pool[idx])
        .collect();
    chosen.sort_unstable();
    NegativeSample {
        pairs: chosen.into_iter().map(|j| (i, j)).collect(),
        pool_size: pool.len(),
    }
}

pub fn sample_negative_pairs(
    ev: &EventList,
    i: NodeId,
    count: usize,
    excluded: &BTreeSet<Pair>,
    seed: u64,
) -> Result<NegativeSample> {
    if count == 0 {
        return Err(Error::InvalidArgument("negative sample count must be >= 1".into()));
    }
    if i >= ev.num_nodes() {
        return Err(Error::InvalidArgument(format!("node {i} out of range")));
    }
    let adj = Adjacency::new(ev);
    Ok(sample_negatives_with(
        &adj,
        i,
        count,
        excluded,
        &mut rng::seeded(seed),
    ))
}

/// Every pair of the node universe (`i < j` unless directed) that is not
/// in `exclude`.
pub fn candidate_pairs(n: usize, directed: bool, exclude: &BTreeSet<Pair>) -> Vec<Pair> {
    let mut out = Vec::new();
    for i in 0..n {
        let start = if directed { 0 } else { i + 1 };
        for j in start..n {
            if i != j && !exclude.contains(&(i, j)) {
                out.push((i, j));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ParsedEvents> {
        parse_events(text.as_bytes(), &ParseOptions::default())
    }

    #[test]
    fn min_max_normalisation_endpoints() {
        let p = parse("source,dest,timestamp\na,b,10\nb,c,20\na,c,30\n").unwrap();
        let times: Vec<f64> = p.events.events().iter().map(|e| e.time).collect();
        assert_eq!(times, vec![0.0, 0.5, 1.0]);
        assert_eq!(p.events.time_range(), TimeRange { t_min: 10.0, t_max: 30.0 });
    }

    #[test]
    fn self_loops_are_dropped_and_counted() {
        let p = parse("source,dest,timestamp\na,a,5.0\na,b,1\nb,c,2\n").unwrap();
        assert_eq!(p.dropped_self_loops, 1);
        assert_eq!(p.events.len(), 2);
    }

    #[test]
    fn malformed_rows_report_line_numbers() {
        match parse("source,dest,timestamp\na,b,1\na,b\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        match parse("source,dest,timestamp\na,b,1\na,b,noon\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse(""), Err(Error::EmptyInput)));
        assert!(matches!(parse("source,dest,timestamp\n"), Err(Error::EmptyInput)));
    }

    #[test]
    fn numeric_labels_sort_numerically_and_pairs_canonicalise() {
        let p = parse("source,dest,timestamp\n10,2,0\n2,1,1\n").unwrap();
        assert_eq!(p.events.labels(), &["1", "2", "10"]);
        for e in p.events.events() {
            assert!(e.source < e.dest);
        }
        let d = parse_events(
            "source,dest,timestamp\n10,2,0\n2,1,1\n".as_bytes(),
            &ParseOptions {
                directed: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(d.events.events()[0].source, 2);
    }

    #[test]
    fn interval_boundaries() {
        let part = IntervalPartition::uniform(15).unwrap();
        assert_eq!(part.interval_of(0.0), 0);
        assert_eq!(part.interval_of(1.0), 14);
        assert_eq!(part.interval_of(part.cut_points()[3]), 3);
        assert_eq!(part.interval_of(part.cut_points()[3] - 1e-12), 2);
    }

    #[test]
    fn partition_validation() {
        assert!(IntervalPartition::from_cut_points(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(IntervalPartition::from_cut_points(vec![0.0, 0.9]).is_err());
        assert!(IntervalPartition::uniform(0).is_err());
    }

    #[test]
    fn degrees() {
        let events = vec![
            Event { source: 0, dest: 1, time: 0.1 },
            Event { source: 0, dest: 1, time: 0.2 },
            Event { source: 5, dest: 0, time: 0.3 },
            Event { source: 0, dest: 5, time: 0.3 },
            Event { source: 0, dest: 5, time: 0.4 },
        ];
        let ev = EventList::new(events, 7, false).unwrap();
        let counts = interval_counts(&ev, &IntervalPartition::uniform(1).unwrap());
        assert_eq!(node_degree(&counts, 0, 0), 5);
        assert_eq!(node_degree(&counts, 6, 0), 0);
        assert_eq!(counts.neighbors(0, 0), vec![1, 5]);
    }

    #[test]
    fn split_fractions_and_errors() {
        let events: Vec<Event> = (0..10)
            .map(|i| Event { source: i, dest: i + 1, time: 0.0 })
            .collect();
        let ev = EventList::new(events, 11, false).unwrap();
        let s = split_edges(&ev, 0.0, 0.0, 1).unwrap();
        assert_eq!(s.train.len(), 10);
        let s = split_edges(&ev, 0.25, 0.15, 1).unwrap();
        assert_eq!((s.test.len(), s.validation.len(), s.train.len()), (2, 1, 7));
        assert!(split_edges(&ev, 0.6, 0.4, 1).is_err());
        let tiny = EventList::new(vec![Event { source: 0, dest: 1, time: 0.0 }], 2, false).unwrap();
        assert!(split_edges(&tiny, 0.1, 0.0, 1).is_err());
    }

    #[test]
    fn negatives_small_pool() {
        let ev = EventList::new(vec![Event { source: 0, dest: 1, time: 0.5 }], 5, false).unwrap();
        let s = sample_negative_pairs(&ev, 0, 10, &BTreeSet::new(), 3).unwrap();
        assert_eq!(s.pairs, vec![(0, 2), (0, 3), (0, 4)]);
        assert_eq!(s.pool_size, 3);

        let excluded: BTreeSet<Pair> = [(0, 3)].into_iter().collect();
        let s = sample_negative_pairs(&ev, 0, 10, &excluded, 3).unwrap();
        assert_eq!(s.pairs, vec![(0, 2), (0, 4)]);
        assert_eq!(s.pool_size, 2);

        let full: Vec<Event> = (1..5).map(|j| Event { source: 0, dest: j, time: 0.0 }).collect();
        let ev = EventList::new(full, 5, false).unwrap();
        let s = sample_negative_pairs(&ev, 0, 2, &BTreeSet::new(), 3).unwrap();
        assert!(s.pairs.is_empty());
        assert_eq!(s.pool_size, 0);
        assert!(sample_negative_pairs(&ev, 0, 0, &BTreeSet::new(), 3).is_err());
    }

    #[test]
    fn nodes_csv_round_trip() {
        let labels = vec!["x".to_string(), "y,z".to_string(), "w".to_string()];
        let mut buf = Vec::new();
        write_nodes_csv(&labels, &mut buf).unwrap();
        assert_eq!(read_nodes_csv(buf.as_slice()).unwrap(), labels);
    }

    #[test]
    fn events_csv_round_trip() {
        let text = "source,dest,timestamp\nu,v,100\nv,w,150\nu,w,300\n";
        let p = parse(text).unwrap();
        let mut buf = Vec::new();
        write_events_csv(&p.events, &mut buf).unwrap();
        let again = parse_events(buf.as_slice(), &ParseOptions::default()).unwrap();
        assert_eq!(again.events, p.events);
    }
}
