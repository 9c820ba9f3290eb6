mod common;

use std::collections::BTreeSet;
use std::sync::OnceLock;

use clpm::eval::{
    auc, build_instances, edge_uncertainty, negative_universe, node_uncertainty, ols_slope,
    random_scores, reconstruction_benchmark, score_all, BenchmarkOptions, ScoredInstance, ScorerKind,
    TgneScorer,
};
use clpm::events::{interval_counts, split_edges, EdgeSplit, IntervalPartition, Pair, SplitSpec};
use clpm::inference::{fit, FitOptions, FittedModel, Hyperparams, VariationalState};
use clpm::model::{LatentConfiguration, RateModel};
use clpm::simulate::{sbm_generate, SbmSample, SbmSpec, DEFAULT_INTER_RATE, DEFAULT_INTRA_RATE};
use common::*;
use num_rational::BigRational;
use proptest::prelude::*;
use rand::Rng;

struct Fixture {
    sample: SbmSample,
    split: EdgeSplit,
    fm: FittedModel,
}

fn fixture(tau: f64) -> Fixture {
    let spec = SbmSpec::switching(60, DEFAULT_INTRA_RATE, DEFAULT_INTER_RATE, 17).unwrap();
    let sample = sbm_generate(&spec).unwrap();
    let split = split_edges(&sample.events, 0.1, 0.0, 17).unwrap();
    let hp = Hyperparams { tau, seed: 17, ..Default::default() };
    let spec = SplitSpec { test_frac: 0.1, val_frac: 0.0, seed: 17 };
    let fm = fit(&sample.events, &hp, Some(spec), FitOptions::default()).unwrap();
    Fixture { sample, split, fm }
}

fn tight() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| fixture(1.0))
}

fn loose() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| fixture(50.0))
}

/// AUC by enumerating every positive/negative pair, ties counting half.
fn brute_force_auc(inst: &[ScoredInstance]) -> BigRational {
    let mut wins = BigRational::from_integer(0.into());
    let half = BigRational::new(1.into(), 2.into());
    let one = BigRational::from_integer(1.into());
    let (mut np, mut nn) = (0i64, 0i64);
    for p in inst.iter().filter(|x| x.label) {
        np += 1;
        for q in inst.iter().filter(|x| !x.label) {
            if p.score > q.score {
                wins += &one;
            } else if p.score == q.score {
                wins += &half;
            }
        }
    }
    nn += inst.iter().filter(|x| !x.label).count() as i64;
    wins / BigRational::from_integer((np * nn).into())
}

fn arb_instances() -> impl Strategy<Value = Vec<ScoredInstance>> {
    prop::collection::vec((0u8..12, any::<bool>()), 2..80)
        .prop_filter("both classes", |v| v.iter().any(|x| x.1) && v.iter().any(|x| !x.1))
        .prop_map(|v| {
            v.into_iter()
                .map(|(s, label)| ScoredInstance { i: 0, j: 1, k: 0, score: f64::from(s) / 4.0, label })
                .collect()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn auc_matches_pair_counting(inst in arb_instances()) {
        let got = auc(&inst).unwrap();
        let want = to_f64(&brute_force_auc(&inst));
        prop_assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn auc_invariant_to_monotone_maps(inst in arb_instances()) {
        let base = auc(&inst).unwrap();
        let mapped: Vec<_> = inst
            .iter()
            .map(|x| ScoredInstance { score: (3.0 * x.score).exp() - 7.0, ..*x })
            .collect();
        prop_assert_eq!(auc(&mapped).unwrap(), base);
        let flipped: Vec<_> = inst.iter().map(|x| ScoredInstance { score: -x.score, ..*x }).collect();
        prop_assert!((auc(&flipped).unwrap() - (1.0 - base)).abs() < 1e-12);
    }
}

#[test]
fn ols_matches_exact_rationals() {
    let mut r = rng(1);
    for _ in 0..20 {
        let len = r.random_range(2..30);
        let x: Vec<f64> = (0..len).map(|_| r.random_range(0u32..20) as f64).collect();
        if x.iter().all(|&v| v == x[0]) {
            continue;
        }
        let y: Vec<f64> = (0..len).map(|_| r.random_range(-3.0..3.0)).collect();
        let (slope, intercept) = ols_slope(&x, &y).unwrap();
        let n = BigRational::from_integer((len as i64).into());
        let ex: Vec<_> = x.iter().map(|&v| exact(v)).collect();
        let ey: Vec<_> = y.iter().map(|&v| exact(v)).collect();
        let mx = ex.iter().fold(BigRational::from_integer(0.into()), |a, b| a + b) / &n;
        let my = ey.iter().fold(BigRational::from_integer(0.into()), |a, b| a + b) / &n;
        let mut sxx = BigRational::from_integer(0.into());
        let mut sxy = BigRational::from_integer(0.into());
        for (a, b) in ex.iter().zip(&ey) {
            sxx += (a - &mx) * (a - &mx);
            sxy += (a - &mx) * (b - &my);
        }
        let s = &sxy / &sxx;
        let c = &my - &s * &mx;
        assert!((slope - to_f64(&s)).abs() < 1e-12);
        assert!((intercept - to_f64(&c)).abs() < 1e-12);
    }
    assert!(ols_slope(&[1.0, 1.0], &[0.0, 2.0]).is_err());
}

#[test]
fn random_scores_are_uniform() {
    let mut v = random_scores(20_000, 5);
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(idx, &x)| ((idx as f64 + 1.0) / n - x).abs().max((x - idx as f64 / n).abs()))
        .fold(0.0, f64::max);
    // Kolmogorov-Smirnov critical value at the 1% level.
    assert!(d < 1.628 / n.sqrt(), "KS distance {d}");
    assert_eq!(random_scores(10, 5), random_scores(10, 5));
    assert_ne!(random_scores(10, 5), random_scores(10, 6));
}

/// Monte-Carlo reference for the posterior-predictive moments of one
/// cumulative rate, drawing configurations independently and integrating
/// each by quadrature.
fn reference_edge_moments(vs: &VariationalState, part: &IntervalPartition, (i, j, k): (usize, usize, usize), draws: usize, seed: u64) -> (f64, f64) {
    let mut r = rng(seed);
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..draws {
        let eps = normals(&mut r, vs.mu().len());
        let z: Vec<f64> = vs
            .mu()
            .iter()
            .zip(&eps)
            .enumerate()
            .map(|(idx, (m, e))| m + vs.log_sigma()[idx / vs.dim()].exp() * e)
            .collect();
        let cfg = LatentConfiguration::from_vec(vs.num_nodes(), vs.dim(), part.clone(), z).unwrap();
        let v = cumulative_by_quadrature(&cfg, vs.beta, i, j, k);
        s1 += v;
        s2 += v * v;
    }
    let m = draws as f64;
    let mean = s1 / m;
    (mean, (s2 / m - mean * mean).max(0.0).sqrt())
}

#[test]
fn edge_uncertainty_against_independent_sampler() {
    let mut r = rng(2);
    let part = IntervalPartition::uniform(3).unwrap();
    let mu = normals(&mut r, 3 * 4 * 2).into_iter().map(|v| 0.5 * v).collect();
    let ls = (0..12).map(|_| r.random_range(-1.5f64..-0.3)).collect();
    let vs = VariationalState::from_parts(3, 4, 2, mu, ls, 0.4).unwrap();
    let rm = RateModel::euclidean(0.4);
    let draws = 4000;
    for triple in [(0, 1, 0), (1, 2, 2), (0, 2, 1)] {
        let got = edge_uncertainty(&vs, &part, &rm, triple, draws, 11).unwrap();
        let (mean, std) = reference_edge_moments(&vs, &part, triple, draws, 12);
        let se = std * (2.0 / draws as f64).sqrt();
        assert!((got.mean - mean).abs() < 4.0 * se, "{triple:?} mean {} vs {mean}", got.mean);
        // Standard error of a standard deviation is roughly s / sqrt(2B)
        // for near-normal spreads; allow a wide margin for skew.
        assert!((got.std - std).abs() < 0.15 * std, "{triple:?} std {} vs {std}", got.std);
    }
}

#[test]
fn edge_uncertainty_seeds_agree_and_vanish_without_spread() {
    let mut r = rng(3);
    let part = IntervalPartition::uniform(2).unwrap();
    let mu: Vec<f64> = normals(&mut r, 2 * 3 * 2);
    let vs = VariationalState::from_parts(2, 3, 2, mu.clone(), vec![-1.0; 6], 0.0).unwrap();
    let rm = RateModel::euclidean(0.0);
    let a = edge_uncertainty(&vs, &part, &rm, (0, 1, 1), 3000, 1).unwrap();
    let b = edge_uncertainty(&vs, &part, &rm, (0, 1, 1), 3000, 2).unwrap();
    assert!((a.mean - b.mean).abs() < 4.0 * (a.std.powi(2) / 3000.0 + b.std.powi(2) / 3000.0).sqrt());
    assert_eq!(edge_uncertainty(&vs, &part, &rm, (0, 1, 1), 3000, 1).unwrap(), a);

    let sharp = VariationalState::from_parts(2, 3, 2, mu, vec![-30.0; 6], 0.0).unwrap();
    let s = edge_uncertainty(&sharp, &part, &rm, (0, 1, 1), 50, 1).unwrap();
    let cfg = sharp.mean_configuration(&part).unwrap();
    assert!(s.std < 1e-10);
    assert!(rel_err(s.mean, cumulative_by_quadrature(&cfg, 0.0, 0, 1, 1)) < 1e-9);
}

#[test]
fn node_uncertainty_is_midpoint_scale() {
    let vs = VariationalState::from_parts(1, 3, 1, vec![0.0; 3], vec![0.1f64.ln(), 0.3f64.ln(), 0.7f64.ln()], 0.0).unwrap();
    assert!((node_uncertainty(&vs, 0, 0) - 0.2).abs() < 1e-15);
    assert!((node_uncertainty(&vs, 0, 1) - 0.5).abs() < 1e-15);
}

#[test]
fn random_scorer_is_chance_on_fixture() {
    let f = tight();
    let opts = BenchmarkOptions { scorers: vec![ScorerKind::Random, ScorerKind::Pa], seed: 3, ..Default::default() };
    let res = reconstruction_benchmark(&f.sample.events, &f.fm, &f.split, &opts).unwrap();
    let test = res.auc("random", "test").unwrap();
    assert!((0.45..=0.55).contains(&test), "{test}");
    assert_eq!(res.entries.len(), 4);
    for e in &res.entries {
        assert_eq!(e.positives, e.negatives + e.negative_shortfall);
    }
}

#[test]
fn intra_pairs_score_above_inter_pairs() {
    let f = tight();
    let labels = &f.sample.labels;
    let scorer = TgneScorer::new(&f.fm);
    let (mut intra, mut inter) = (Vec::new(), Vec::new());
    for &(i, j) in &f.split.test {
        for k in 0..f.fm.partition.num_intervals() {
            let seg = ((f.fm.partition.midpoint(k) * 3.0) as usize).min(2);
            let v = clpm::eval::Scorer::score(&scorer, i, j, k).unwrap();
            if labels[i][seg] == labels[j][seg] {
                intra.push(v);
            } else {
                inter.push(v);
            }
        }
    }
    let median = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let (a, b) = (median(intra), median(inter));
    assert!(a > b, "intra median {a} vs inter median {b}");
}

#[test]
fn switching_node_more_uncertain_than_median_static_node() {
    let f = loose();
    let part = &f.fm.partition;
    let middle: Vec<usize> = (0..part.num_intervals())
        .filter(|&k| (1.0 / 3.0..2.0 / 3.0).contains(&part.midpoint(k)))
        .collect();
    let mean_u = |i: usize| middle.iter().map(|&k| node_uncertainty(&f.fm.state, i, k)).sum::<f64>() / middle.len() as f64;
    let mut others: Vec<f64> = (1..60).map(mean_u).collect();
    others.sort_by(f64::total_cmp);
    assert!(mean_u(0) > others[others.len() / 2]);
}

#[test]
fn instances_respect_labels_and_splits() {
    let f = tight();
    let ev = &f.sample.events;
    let counts = interval_counts(ev, &f.fm.partition);
    let interacting: BTreeSet<Pair> = ev.unique_pairs().into_iter().collect();
    let universe = negative_universe(60, false, &f.split.test, &interacting);
    let set = build_instances(&counts, &f.split.test, &universe, 1);
    let mut inst = set.instances.clone();
    for x in &inst {
        let p = (x.i, x.j);
        assert_eq!(x.label, counts.get(x.i, x.j, x.k) > 0);
        if x.label {
            assert!(f.split.test.contains(&p));
        } else {
            assert!(!f.split.train.contains(&p));
        }
    }
    score_all(&mut inst, &TgneScorer::new(&f.fm)).unwrap();
    assert!(inst.iter().all(|x| x.score > 0.0));
}
