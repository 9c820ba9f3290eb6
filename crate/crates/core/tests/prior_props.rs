mod common;

use clpm::inference::VariationalState;
use clpm::prior::{kl_to_prior, kl_with_gradient, prior_log_density, sample_prior};
use clpm::PriorConfig;
use common::*;
use proptest::prelude::*;
use rand::Rng;

/// Covariance of one coordinate's critical points under the random walk:
/// `tau0^2 + tau^2 * (eta_min(k,l) - eta_0)`.
fn walk_covariance(pc: &PriorConfig) -> Vec<Vec<f64>> {
    let m = pc.num_cut_points();
    let mut elapsed = vec![0.0; m];
    for k in 1..m {
        elapsed[k] = elapsed[k - 1] + pc.steps[k - 1];
    }
    (0..m)
        .map(|k| (0..m).map(|l| pc.tau0 * pc.tau0 + pc.tau * pc.tau * elapsed[k.min(l)]).collect())
        .collect()
}

fn cholesky(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = a.len();
    let mut l = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..=i {
            let s: f64 = (0..j).map(|p| l[i][p] * l[j][p]).sum();
            if i == j {
                l[i][i] = (a[i][i] - s).sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

/// Solves `L L^T x = b`.
fn chol_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let m = l.len();
    let mut y = vec![0.0; m];
    for i in 0..m {
        y[i] = (b[i] - (0..i).map(|p| l[i][p] * y[p]).sum::<f64>()) / l[i][i];
    }
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        x[i] = (y[i] - (i + 1..m).map(|p| l[p][i] * x[p]).sum::<f64>()) / l[i][i];
    }
    x
}

/// Dense-Gaussian log density of one node's critical points, every
/// coordinate independent with the walk covariance.
fn dense_log_density(z: &[f64], pc: &PriorConfig, n: usize) -> f64 {
    let m = pc.num_cut_points();
    let d = pc.dim;
    let l = cholesky(&walk_covariance(pc));
    let log_det: f64 = 2.0 * l.iter().enumerate().map(|(i, row)| row[i].ln()).sum::<f64>();
    let mut total = 0.0;
    for i in 0..n {
        for c in 0..d {
            let x: Vec<f64> = (0..m).map(|k| z[(i * m + k) * d + c]).collect();
            let sol = chol_solve(&l, &x);
            let quad: f64 = x.iter().zip(&sol).map(|(a, b)| a * b).sum();
            total += -0.5 * (quad + log_det + m as f64 * (2.0 * std::f64::consts::PI).ln());
        }
    }
    total
}

/// KL between the mean-field posterior and the dense Gaussian prior, per
/// coordinate: `(tr(S^-1 D) + mu' S^-1 mu - m + ln|S| - ln|D|) / 2`.
fn dense_kl(vs: &VariationalState, pc: &PriorConfig) -> f64 {
    let m = pc.num_cut_points();
    let d = pc.dim;
    let cov = walk_covariance(pc);
    let l = cholesky(&cov);
    let log_det: f64 = 2.0 * l.iter().enumerate().map(|(i, row)| row[i].ln()).sum::<f64>();
    let mut precision_diag = vec![0.0; m];
    for k in 0..m {
        let mut e = vec![0.0; m];
        e[k] = 1.0;
        precision_diag[k] = chol_solve(&l, &e)[k];
    }
    let mut total = 0.0;
    for i in 0..vs.num_nodes() {
        let var: Vec<f64> = (0..m).map(|k| vs.sigma(i, k).powi(2)).collect();
        let trace: f64 = var.iter().zip(&precision_diag).map(|(v, p)| v * p).sum();
        let log_det_q: f64 = var.iter().map(|v| v.ln()).sum();
        for c in 0..d {
            let mu: Vec<f64> = (0..m).map(|k| vs.mean(i, k)[c]).collect();
            let sol = chol_solve(&l, &mu);
            let quad: f64 = mu.iter().zip(&sol).map(|(a, b)| a * b).sum();
            total += 0.5 * (trace + quad - m as f64 + log_det - log_det_q);
        }
    }
    total
}

fn random_prior(r: &mut rand_chacha::ChaCha8Rng, k: usize, d: usize) -> PriorConfig {
    let steps = if k == 0 {
        vec![]
    } else {
        random_partition(r, k).cut_points().windows(2).map(|w| w[1] - w[0]).collect()
    };
    PriorConfig::with_steps(r.random_range(0.3..3.0), r.random_range(0.3..3.0), steps, d).unwrap()
}

fn random_state(r: &mut rand_chacha::ChaCha8Rng, n: usize, cuts: usize, d: usize) -> VariationalState {
    let mu = normals(r, n * cuts * d);
    let ls = (0..n * cuts).map(|_| r.random_range(-1.5f64..0.7)).collect();
    VariationalState::from_parts(n, cuts, d, mu, ls, 0.0).unwrap()
}

#[test]
fn log_density_matches_dense_gaussian() {
    let mut r = rng(1);
    for _ in 0..30 {
        let k = r.random_range(0..6);
        let d = r.random_range(1..4);
        let pc = random_prior(&mut r, k, d);
        let n = 3;
        let z = normals(&mut r, n * (k + 1) * d);
        let got = prior_log_density(&z, &pc);
        let want = dense_log_density(&z, &pc, n);
        assert!(rel_err(got, want) < 1e-10, "{got} vs {want}");
    }
}

#[test]
fn kl_matches_dense_gaussian() {
    let mut r = rng(2);
    for _ in 0..50 {
        let k = r.random_range(0..8);
        let d = r.random_range(1..4);
        let pc = random_prior(&mut r, k, d);
        let vs = random_state(&mut r, 3, k + 1, d);
        let got = kl_to_prior(&vs, &pc).unwrap();
        let want = dense_kl(&vs, &pc);
        assert!(rel_err(got, want) < 1e-9, "{got} vs {want}");
    }
}

#[test]
fn samples_have_walk_covariance() {
    let pc = PriorConfig::with_steps(0.8, 1.3, vec![0.25, 0.5, 0.25], 1).unwrap();
    let n = 40_000;
    let z = sample_prior(n, &pc, 9);
    let cov = walk_covariance(&pc);
    let m = pc.num_cut_points();
    for k in 0..m {
        for l in 0..=k {
            let emp: f64 = (0..n).map(|i| z[i * m + k] * z[i * m + l]).sum::<f64>() / n as f64;
            // Standard error of a product moment of jointly normal
            // zero-mean variables: sqrt((S_kk S_ll + S_kl^2) / n).
            let se = ((cov[k][k] * cov[l][l] + cov[k][l] * cov[k][l]) / n as f64).sqrt();
            assert!((emp - cov[k][l]).abs() < 4.0 * se, "({k},{l}): {emp} vs {}", cov[k][l]);
        }
    }
    assert_eq!(sample_prior(3, &pc, 9), sample_prior(3, &pc, 9));
}

#[test]
fn kl_gradient_matches_central_differences() {
    let mut r = rng(3);
    for _ in 0..20 {
        let k = r.random_range(0..5);
        let d = r.random_range(1..4);
        let pc = random_prior(&mut r, k, d);
        let vs = random_state(&mut r, 2, k + 1, d);
        let (_, g_mu, g_ls) = kl_with_gradient(&vs, &pc).unwrap();
        let n_mu = vs.mu().len();
        let mut x = vs.mu().to_vec();
        x.extend_from_slice(vs.log_sigma());
        let f = |p: &[f64]| {
            let s = VariationalState::from_parts(2, k + 1, d, p[..n_mu].to_vec(), p[n_mu..].to_vec(), 0.0).unwrap();
            kl_to_prior(&s, &pc).unwrap()
        };
        for idx in 0..x.len() {
            let g = if idx < n_mu { g_mu[idx] } else { g_ls[idx - n_mu] };
            let fd = central_difference(f, &x, idx, 1e-5);
            let scale = fd.abs().max(g.abs()).max(1e-6);
            assert!((fd - g).abs() / scale < 1e-6, "coordinate {idx}: {fd} vs {g}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kl_is_nonnegative_and_grows_with_offset(seed in any::<u64>(), k in 0usize..5, d in 1usize..4, push in 1.5f64..4.0) {
        let mut r = rng(seed);
        let pc = random_prior(&mut r, k, d);
        let vs = random_state(&mut r, 2, k + 1, d);
        let base = kl_to_prior(&vs, &pc).unwrap();
        prop_assert!(base >= 0.0);
        let far_mu: Vec<f64> = vs.mu().iter().map(|v| v * push).collect();
        let far = VariationalState::from_parts(2, k + 1, d, far_mu, vs.log_sigma().to_vec(), 0.0).unwrap();
        prop_assert!(kl_to_prior(&far, &pc).unwrap() >= base);
    }

    #[test]
    fn kl_ignores_node_order(seed in any::<u64>(), k in 0usize..5, d in 1usize..4) {
        let mut r = rng(seed);
        let pc = random_prior(&mut r, k, d);
        let n = 4;
        let cuts = k + 1;
        let vs = random_state(&mut r, n, cuts, d);
        let perm = [2usize, 0, 3, 1];
        let mut mu = Vec::new();
        let mut ls = Vec::new();
        for &i in &perm {
            mu.extend_from_slice(&vs.mu()[i * cuts * d..(i + 1) * cuts * d]);
            ls.extend_from_slice(&vs.log_sigma()[i * cuts..(i + 1) * cuts]);
        }
        let shuffled = VariationalState::from_parts(n, cuts, d, mu, ls, 0.0).unwrap();
        let a = kl_to_prior(&vs, &pc).unwrap();
        let b = kl_to_prior(&shuffled, &pc).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

#[test]
fn kl_vanishes_only_at_the_prior_marginal_for_one_cut() {
    let pc = PriorConfig::with_steps(1.0, 0.7, vec![], 2).unwrap();
    let exact = VariationalState::from_parts(1, 1, 2, vec![0.0, 0.0], vec![0.7f64.ln()], 0.0).unwrap();
    assert!(kl_to_prior(&exact, &pc).unwrap().abs() < 1e-15);
    let off = VariationalState::from_parts(1, 1, 2, vec![0.1, 0.0], vec![0.7f64.ln()], 0.0).unwrap();
    assert!(kl_to_prior(&off, &pc).unwrap() > 0.0);
}
