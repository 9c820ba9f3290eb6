//! Static binary latent space distance model fitted independently per
//! interval: `P(y_ij = 1) = logistic(beta - ||z_i - z_j||^2)`.

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::events::{CountTensor, NodeId, Pair};
use crate::inference::{Adam, AdamBuffer};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsdmOptions {
    pub dim: usize,
    pub lr: f64,
    pub max_iter: usize,
    /// Stop once the relative change of the objective stays below this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for LsdmOptions {
    fn default() -> Self {
        Self {
            dim: 2,
            lr: 0.01,
            max_iter: 3000,
            tol: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsdmFit {
    pub n: usize,
    pub dim: usize,
    /// Positions, node -> dimension.
    pub z: Vec<f64>,
    pub beta: f64,
    pub log_likelihood: f64,
    /// Log-likelihood after every iteration.
    pub trace: Vec<f64>,
    pub converged: bool,
}

impl LsdmFit {
    pub fn probability(&self, i: NodeId, j: NodeId) -> f64 {
        let d = self.dim;
        let sq: f64 = (0..d)
            .map(|c| (self.z[i * d + c] - self.z[j * d + c]).powi(2))
            .sum();
        logistic(self.beta - sq)
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Bernoulli log-likelihood of the labelled pairs and its gradient with
/// respect to `params = [z (n * dim) | beta]`.
pub fn lsdm_objective(params: &[f64], dim: usize, data: &[(Pair, bool)]) -> (f64, Vec<f64>) {
    let beta = params[params.len() - 1];
    let mut grad = vec![0.0; params.len()];
    let mut ll = 0.0;
    for &((i, j), y) in data {
        let mut sq = 0.0;
        for c in 0..dim {
            let diff = params[i * dim + c] - params[j * dim + c];
            sq += diff * diff;
        }
        let x = beta - sq;
        ll -= if y { softplus(-x) } else { softplus(x) };
        let dx = f64::from(u8::from(y)) - logistic(x);
        *grad.last_mut().unwrap() += dx;
        for c in 0..dim {
            let g = -2.0 * dx * (params[i * dim + c] - params[j * dim + c]);
            grad[i * dim + c] += g;
            grad[j * dim + c] -= g;
        }
    }
    (ll, grad)
}

/// Fits one interval. `pairs` is the training universe; each is labelled
/// by whether it has an event in interval `k` of `train_counts`.
pub fn fit_lsdm(
    train_counts: &CountTensor,
    pairs: &[Pair],
    k: usize,
    opts: &LsdmOptions,
) -> Result<LsdmFit> {
    if opts.dim == 0 || opts.max_iter == 0 {
        return Err(Error::InvalidArgument(
            "dimension and iteration budget must be >= 1".into(),
        ));
    }
    if k >= train_counts.num_intervals() {
        return Err(Error::InvalidArgument(format!("interval {k} out of range")));
    }
    let n = train_counts.num_nodes();
    let d = opts.dim;
    let data: Vec<(Pair, bool)> = pairs
        .iter()
        .map(|&(i, j)| ((i, j), train_counts.get(i, j, k) > 0))
        .collect();
    let mut r = rng::stream(opts.seed, k as u64);
    let init = Normal::new(0.0, 0.1).expect("valid scale");
    let mut params: Vec<f64> = (0..n * d).map(|_| init.sample(&mut r)).collect();
    params.push(0.0);

    let adam = Adam::default();
    let mut buf = AdamBuffer::new(params.len());
    let mut best = (f64::NEG_INFINITY, params.clone());
    let mut trace = Vec::new();
    let mut converged = false;
    let mut prev = f64::NEG_INFINITY;
    for _ in 0..opts.max_iter {
        let (ll, mut grad) = lsdm_objective(&params, d, &data);
        if ll > best.0 {
            best = (ll, params.clone());
        }
        trace.push(ll);
        if (ll - prev).abs() <= opts.tol * (1.0 + ll.abs()) {
            converged = true;
            break;
        }
        prev = ll;
        grad.iter_mut().for_each(|g| *g = -*g);
        buf.update(&adam, &mut params, &grad, opts.lr);
    }
    if !converged {
        let (ll, _) = lsdm_objective(&params, d, &data);
        if ll > best.0 {
            best = (ll, params.clone());
        }
        log::warn!(
            "interval {k}: latent distance model did not converge in {} iterations",
            opts.max_iter
        );
    }
    let (log_likelihood, mut params) = best;
    let beta = params.pop().unwrap();
    Ok(LsdmFit {
        n,
        dim: d,
        z: params,
        beta,
        log_likelihood,
        trace,
        converged,
    })
}
