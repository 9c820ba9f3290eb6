use super::elbo::StateGradient;
use super::VariationalState;

/// Decay rates and stabiliser of the adaptive-moment update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment accumulators for one parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamBuffer {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamBuffer {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One descent step on `params` along `grad` (a minimisation update).
    pub fn update(&mut self, cfg: &Adam, params: &mut [f64], grad: &[f64], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powf(self.t as f64);
        let c2 = 1.0 - cfg.beta2.powf(self.t as f64);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
}

/// Optimiser state of a [`VariationalState`]: one buffer per parameter
/// block so the bias can take its own learning rate.
#[derive(Debug, Clone, PartialEq)]
pub struct OptState {
    pub adam: Adam,
    mu: AdamBuffer,
    log_sigma: AdamBuffer,
    beta: AdamBuffer,
}

impl OptState {
    pub fn new(vs: &VariationalState) -> Self {
        Self {
            adam: Adam::default(),
            mu: AdamBuffer::new(vs.mu().len()),
            log_sigma: AdamBuffer::new(vs.log_sigma().len()),
            beta: AdamBuffer::new(1),
        }
    }

    pub fn steps(&self) -> u64 {
        self.mu.steps()
    }
}

/// Applies one Adam update: `lr_phi` to means and log-scales, `lr_beta` to
/// the bias.
pub fn adam_step(
    vs: &mut VariationalState,
    opt: &mut OptState,
    grad: &StateGradient,
    lr_phi: f64,
    lr_beta: f64,
) {
    let cfg = opt.adam;
    opt.mu.update(&cfg, vs.mu_mut(), &grad.d_mu, lr_phi);
    opt.log_sigma
        .update(&cfg, vs.log_sigma_mut(), &grad.d_log_sigma, lr_phi);
    let mut beta = [vs.beta];
    opt.beta.update(&cfg, &mut beta, &[grad.d_beta], lr_beta);
    vs.beta = beta[0];
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_is_bounded_by_the_learning_rate() {
        let mut buf = AdamBuffer::new(4);
        let mut x = vec![1.0, -2.0, 0.5, 3.0];
        let before = x.clone();
        buf.update(&Adam::default(), &mut x, &[1e-6, -40.0, 3.0, 0.0], 0.01);
        for (a, b) in x.iter().zip(&before) {
            assert!((a - b).abs() <= 0.01 * (1.0 + 1e-6));
        }
        assert_eq!(x[3], before[3]);
    }

    #[test]
    fn quadratic_bowl_converges() {
        let mut buf = AdamBuffer::new(1);
        let mut x = [1.0];
        for _ in 0..5000 {
            let g = [2.0 * x[0]];
            buf.update(&Adam::default(), &mut x, &g, 0.01);
        }
        assert!(x[0].abs() < 1e-3, "x = {}", x[0]);
    }
}
