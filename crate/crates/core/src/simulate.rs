//! Piecewise-constant stochastic block model with community switches.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{Event, EventList, NodeId, Pair, TimeRange};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmSpec {
    pub n: usize,
    /// Consecutive `(start, end)` segments covering `[0, 1]`.
    pub segments: Vec<(f64, f64)>,
    /// `membership[i][s]` is the cluster of node `i` during segment `s`.
    pub membership: Vec<Vec<usize>>,
    /// Expected events per pair per segment, indexed by the two clusters.
    pub rates: Vec<Vec<f64>>,
    pub seed: u64,
}

pub const DEFAULT_INTRA_RATE: f64 = 8.0;
pub const DEFAULT_INTER_RATE: f64 = 0.3;

impl SbmSpec {
    /// Two equal communities over three equal segments. Node 0 starts in
    /// community 0, sits alone in community 2 during the middle segment and
    /// ends in community 1. Everyone else stays put.
    pub fn switching(n: usize, intra: f64, inter: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument("need at least two nodes".into()));
        }
        let half = n / 2;
        let segments = vec![(0.0, 1.0 / 3.0), (1.0 / 3.0, 2.0 / 3.0), (2.0 / 3.0, 1.0)];
        let membership = (0..n)
            .map(|i| {
                if i == 0 {
                    vec![0, 2, 1]
                } else {
                    vec![usize::from(i >= half); 3]
                }
            })
            .collect();
        let rates = (0..3)
            .map(|a| (0..3).map(|b| if a == b { intra } else { inter }).collect())
            .collect();
        let spec = Self {
            n,
            segments,
            membership,
            rates,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n < 2 {
            return bad("need at least two nodes".into());
        }
        if self.segments.is_empty()
            || self.segments[0].0 != 0.0
            || self.segments.last().unwrap().1 != 1.0
        {
            return bad("segments must start at 0 and end at 1".into());
        }
        for (s, w) in self.segments.iter().enumerate() {
            if !(w.0 < w.1) {
                return bad(format!("segment {s} is empty"));
            }
            if s > 0 && self.segments[s - 1].1 != w.0 {
                return bad(format!("segment {s} does not start where segment {} ends", s - 1));
            }
        }
        if self.membership.len() != self.n
            || self
                .membership
                .iter()
                .any(|m| m.len() != self.segments.len())
        {
            return bad("membership must list one cluster per node per segment".into());
        }
        let c = self.rates.len();
        if self.rates.iter().any(|row| row.len() != c) {
            return bad("rate matrix must be square".into());
        }
        if self.rates.iter().flatten().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return bad("rates must be finite and non-negative".into());
        }
        if self.membership.iter().flatten().any(|&m| m >= c) {
            return bad("membership references a cluster without rates".into());
        }
        Ok(())
    }

    pub fn rate(&self, i: NodeId, j: NodeId, s: usize) -> f64 {
        self.rates[self.membership[i][s]][self.membership[j][s]]
    }

    /// `sum_s sum_{i<j} rate`, the expected number of events.
    pub fn expected_events(&self) -> f64 {
        let mut total = 0.0;
        for s in 0..self.segments.len() {
            for i in 0..self.n {
                for j in i + 1..self.n {
                    total += self.rate(i, j, s);
                }
            }
        }
        total
    }
}

#[derive(Debug, Clone)]
pub struct SbmSample {
    pub events: EventList,
    /// Cluster of each node in each segment.
    pub labels: Vec<Vec<usize>>,
    /// Drawn count of every pair in every segment where it is non-zero,
    /// keyed by `(pair, segment)`.
    pub counts: BTreeMap<(Pair, usize), u32>,
}

/// Draws `Poisson(rate)` events per undirected pair per segment with
/// uniform times strictly inside the segment. Every pair and segment uses
/// its own derived stream.
pub fn sbm_generate(spec: &SbmSpec) -> Result<SbmSample> {
    spec.validate()?;
    let n = spec.n;
    let mut events = Vec::new();
    let mut counts = BTreeMap::new();
    for (s, &(start, end)) in spec.segments.iter().enumerate() {
        let seg_seed = rng::derive_seed(spec.seed, s as u64);
        for i in 0..n {
            for j in i + 1..n {
                let rate = spec.rate(i, j, s);
                if rate == 0.0 {
                    continue;
                }
                let mut r = rng::stream(seg_seed, (i * n + j) as u64);
                let count = Poisson::new(rate)
                    .map_err(|e| Error::InvalidArgument(format!("rate {rate}: {e}")))?
                    .sample(&mut r) as u32;
                if count == 0 {
                    continue;
                }
                counts.insert(((i, j), s), count);
                for _ in 0..count {
                    events.push(Event {
                        source: i,
                        dest: j,
                        time: interior_uniform(&mut r, start, end),
                    });
                }
            }
        }
    }
    let labels: Vec<String> = (0..n).map(|i| i.to_string()).collect();
    Ok(SbmSample {
        events: EventList::with_labels(events, labels, false, TimeRange::UNIT)?,
        labels: spec.membership.clone(),
        counts,
    })
}

fn interior_uniform<R: Rng + ?Sized>(rng: &mut R, start: f64, end: f64) -> f64 {
    loop {
        let t = rng.random_range(start..end);
        if t > start {
            return t;
        }
    }
}

/// Writes `node,segment,cluster` rows.
pub fn write_labels_csv<W: Write>(labels: &[Vec<usize>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node", "segment", "cluster"])?;
    for (i, row) in labels.iter().enumerate() {
        for (s, c) in row.iter().enumerate() {
            w.serialize((i, s, c))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels_csv<R: Read>(source: R) -> Result<Vec<Vec<usize>>> {
    let mut rdr = csv::Reader::from_reader(source);
    let mut cells = BTreeMap::new();
    for row in rdr.deserialize() {
        let (i, s, c): (usize, usize, usize) = row?;
        if cells.insert((i, s), c).is_some() {
            return Err(Error::InvalidArgument(format!("duplicate label for node {i} segment {s}")));
        }
    }
    // Keys are sorted, so a gap-free table visits (0, 0), (0, 1), ... in order.
    let mut out: Vec<Vec<usize>> = Vec::new();
    for ((i, s), c) in cells {
        if i == out.len() && s == 0 {
            out.push(vec![c]);
        } else if out.len().checked_sub(1) == Some(i) && s == out[i].len() {
            out[i].push(c);
        } else {
            return Err(Error::InvalidArgument("labels file has gaps".into()));
        }
    }
    Ok(out)
}
