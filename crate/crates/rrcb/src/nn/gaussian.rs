use crate::error::Result;
use crate::nn::{Mlp, MlpCache};
use crate::rng::next_gaussian;
use rand_chacha::ChaCha8Rng;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Diagonal Gaussian policy: a mean network plus a state-independent
/// per-dimension log standard deviation, actions bounded to [-1, 1] by
/// clipping (no squash).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub mean: Mlp,
    pub log_std: Vec<f64>,
}

impl GaussianPolicy {
    pub fn new(mean: Mlp, init_log_std: f64) -> GaussianPolicy {
        let act_dim = mean.output_dim();
        GaussianPolicy { mean, log_std: vec![init_log_std.clamp(LOG_STD_MIN, LOG_STD_MAX); act_dim] }
    }

    pub fn act_dim(&self) -> usize {
        self.mean.output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.mean.params().len() + self.log_std.len()
    }

    /// Concatenated (mean net, log std) parameter vector.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut p = self.mean.params().to_vec();
        p.extend_from_slice(&self.log_std);
        p
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        let n = self.mean.params().len();
        self.mean.params_mut().copy_from_slice(&flat[..n]);
        self.log_std.copy_from_slice(&flat[n..]);
    }

    pub fn clamp_log_std(&mut self) {
        for l in &mut self.log_std {
            *l = l.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    /// Policy mean, clipped to the action bounds.
    pub fn mean_action(&self, state: &[f64]) -> Result<Vec<f64>> {
        let mut a = self.mean.forward(state)?;
        for v in &mut a {
            *v = v.clamp(-1.0, 1.0);
        }
        Ok(a)
    }

    /// One sample from the policy, clipped to the action bounds.
    pub fn sample(&self, state: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let mu = self.mean.forward(state)?;
        Ok(mu
            .iter()
            .zip(&self.log_std)
            .map(|(&m, &ls)| (m + ls.exp() * next_gaussian(rng)).clamp(-1.0, 1.0))
            .collect())
    }

    /// Log density of `action` under the diagonal Gaussian at `state`.
    pub fn log_prob(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        let mu = self.mean.forward(state)?;
        Ok(log_prob_given_mean(&mu, &self.log_std, action))
    }

    /// Forward pass retaining the cache, for use with [`log_prob_backward`].
    pub fn log_prob_forward(&self, state: &[f64], action: &[f64]) -> Result<(MlpCache, Vec<f64>, f64)> {
        let (cache, mu) = self.mean.forward_cached(state)?;
        let lp = log_prob_given_mean(&mu, &self.log_std, action);
        Ok((cache, mu, lp))
    }

    /// Accumulates d(coeff * log_prob)/d params into the flat gradient
    /// buffer (mean net gradients first, then log-std gradients).
    pub fn log_prob_backward(
        &self,
        cache: &MlpCache,
        mu: &[f64],
        action: &[f64],
        coeff: f64,
        flat_grads: &mut [f64],
    ) -> Result<()> {
        let n = self.mean.params().len();
        let (mean_grads, ls_grads) = flat_grads.split_at_mut(n);
        let mut dmu = vec![0.0; mu.len()];
        for d in 0..mu.len() {
            let sigma = self.log_std[d].exp();
            let z = (action[d] - mu[d]) / sigma;
            // d logp / d mu = z / sigma ; d logp / d log_std = z^2 - 1
            dmu[d] = coeff * z / sigma;
            ls_grads[d] += coeff * (z * z - 1.0);
        }
        let mut tmp = vec![0.0; n];
        self.mean.backward(cache, &dmu, &mut tmp)?;
        for (g, t) in mean_grads.iter_mut().zip(&tmp) {
            *g += *t;
        }
        Ok(())
    }

    /// Differential entropy of the diagonal Gaussian.
    pub fn entropy(&self) -> f64 {
        let half_log_2pe = 0.5 * (std::f64::consts::TAU * std::f64::consts::E).ln();
        self.log_std.iter().map(|ls| ls + half_log_2pe).sum()
    }
}

fn log_prob_given_mean(mu: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    let mut lp = 0.0;
    for d in 0..mu.len() {
        let ls = log_std[d];
        let z = (action[d] - mu[d]) / ls.exp();
        lp += -0.5 * z * z - ls - 0.5 * (std::f64::consts::TAU).ln();
    }
    lp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::{finite_difference_grad, max_relative_error};
    use crate::rng::rng_from_seed;
    use rand::Rng;

    #[test]
    fn log_prob_at_mean_with_unit_sigma() {
        // -(d/2) ln(2 pi) for action = mean, sigma = 1.
        let d = 3;
        let pol = GaussianPolicy::new(Mlp::zeros(&[2, d]), 0.0);
        let state = [0.4, -0.2];
        let mu = pol.mean.forward(&state).unwrap();
        let lp = pol.log_prob(&state, &mu).unwrap();
        let expected = -(d as f64 / 2.0) * (std::f64::consts::TAU).ln();
        assert!((lp - expected).abs() < 1e-12);
    }

    #[test]
    fn log_prob_decreases_away_from_mean() {
        let pol = GaussianPolicy::new(Mlp::new(&[2, 8, 2], &mut rng_from_seed(1)), -0.5);
        let state = [0.1, 0.3];
        let mu = pol.mean.forward(&state).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..6 {
            let off = 0.2 * k as f64;
            let a: Vec<f64> = mu.iter().map(|m| m + off).collect();
            let lp = pol.log_prob(&state, &a).unwrap();
            assert!(lp < prev + 1e-12);
            prev = lp;
        }
    }

    #[test]
    fn one_dimensional_density_integrates_to_one() {
        // Quadrature oracle: Simpson's rule over +/- 8 sigma.
        let mut pol = GaussianPolicy::new(Mlp::zeros(&[1, 1]), 0.3);
        pol.mean.params_mut()[1] = 0.2; // bias -> mean 0.2
        let sigma = 0.3f64.exp();
        let (lo, hi) = (0.2 - 8.0 * sigma, 0.2 + 8.0 * sigma);
        let n = 4000;
        let h = (hi - lo) / n as f64;
        let mut integral = 0.0;
        for i in 0..=n {
            let a = lo + h * i as f64;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            integral += w * pol.log_prob(&[0.0], &[a]).unwrap().exp();
        }
        integral *= h / 3.0;
        assert!((integral - 1.0).abs() < 1e-3, "integral {integral}");
    }

    #[test]
    fn log_prob_gradient_matches_finite_differences() {
        let mut rng = rng_from_seed(9);
        let pol = GaussianPolicy::new(Mlp::new(&[3, 6, 2], &mut rng), -0.3);
        let state: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let action: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let coeff = 1.7;

        let (cache, mu, _) = pol.log_prob_forward(&state, &action).unwrap();
        let mut grads = vec![0.0; pol.param_count()];
        pol.log_prob_backward(&cache, &mu, &action, coeff, &mut grads).unwrap();

        let flat = pol.flat_params();
        let fd = finite_difference_grad(&flat, 1e-6, |p| {
            let mut q = pol.clone();
            q.set_flat_params(p);
            coeff * q.log_prob(&state, &action).unwrap()
        });
        let err = max_relative_error(&grads, &fd);
        assert!(err < 1e-4, "rel err {err}");
    }

    #[test]
    fn samples_respect_bounds() {
        let mut rng = rng_from_seed(5);
        let pol = GaussianPolicy::new(Mlp::new(&[2, 4, 3], &mut rng), 1.5);
        for _ in 0..500 {
            let a = pol.sample(&[0.3, -0.8], &mut rng).unwrap();
            assert!(a.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }
}
