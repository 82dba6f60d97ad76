//! Implicit Q-learning: a state-value net fitted to a Q expectile with the
//! asymmetric squared loss, a Q net regressed toward r + gamma V(s'), and
//! advantage-weighted policy extraction. No out-of-distribution action is
//! ever queried.

use super::common::{
    gaussian_awr_step, mean, Harness, QNet, TargetNet, TrainConfig, TrainContext, TrainLog,
};
use crate::error::Result;
use crate::nn::{GaussianPolicy, Mlp, OptimState, PolicyArtifact, PolicyHead};

/// Asymmetric squared loss: |tau - 1[u < 0]| * u^2.
pub fn expectile_loss(u: f64, tau: f64) -> f64 {
    expectile_weight(u, tau) * u * u
}

fn expectile_weight(u: f64, tau: f64) -> f64 {
    if u < 0.0 {
        1.0 - tau
    } else {
        tau
    }
}

pub fn train(ctx: &TrainContext, cfg: &TrainConfig) -> Result<(PolicyArtifact, TrainLog)> {
    let (artifact, log, _, _) = train_with_values(ctx, cfg)?;
    Ok((artifact, log))
}

pub(crate) fn train_with_values(
    ctx: &TrainContext,
    cfg: &TrainConfig,
) -> Result<(PolicyArtifact, TrainLog, Mlp, QNet)> {
    let mut h = Harness::new(cfg);
    let mut actor = GaussianPolicy::new(Mlp::new(&ctx.actor_dims(cfg), &mut h.rng), cfg.init_log_std);
    let mut vnet = Mlp::new(&ctx.value_dims(cfg, false), &mut h.rng);
    let mut qnet = QNet::new(&ctx.value_dims(cfg, true), &mut h.rng);
    let mut q_tgt = TargetNet::of(&qnet.net);
    let mut actor_opt = OptimState::new(actor.param_count(), cfg.actor_lr);
    let mut v_opt = OptimState::new(vnet.params().len(), cfg.critic_lr);
    let mut q_opt = OptimState::new(qnet.net.params().len(), cfg.critic_lr);
    let tau = cfg.iql_tau;

    for step in 0..cfg.gradient_steps {
        let b = ctx.sample_batch(&mut h.rng, cfg.batch_size);
        let inv_b = 1.0 / b.batch as f64;

        // Value net toward the tau-expectile of the target Q at dataset
        // actions.
        let in_sa = qnet.concat(&b.s, &b.a, b.batch);
        let (_, q_sa_tgt) = q_tgt.net.forward_batch(&in_sa, b.batch)?;
        let (vcache, v) = vnet.forward_batch(&b.s, b.batch)?;
        let mut v_loss = 0.0;
        let og_v: Vec<f64> = v
            .iter()
            .zip(&q_sa_tgt)
            .map(|(&vi, &qi)| {
                let u = qi - vi;
                v_loss += expectile_loss(u, tau) * inv_b;
                -2.0 * expectile_weight(u, tau) * u * inv_b
            })
            .collect();
        let mut vgrads = vec![0.0; vnet.params().len()];
        vnet.backward_batch(&vcache, &og_v, &mut vgrads)?;
        v_opt.step(vnet.params_mut(), &vgrads);

        // Q net toward r + gamma V(s').
        let (_, v2) = vnet.forward_batch(&b.s2, b.batch)?;
        let targets: Vec<f64> =
            b.r.iter().zip(&v2).map(|(&r, &vv)| r + cfg.gamma * vv).collect();
        let (qcache, q_sa) = qnet.net.forward_batch(&in_sa, b.batch)?;
        let mut q_loss = 0.0;
        let og_q: Vec<f64> = q_sa
            .iter()
            .zip(&targets)
            .map(|(&q, &y)| {
                let d = q - y;
                q_loss += d * d * inv_b;
                2.0 * d * inv_b
            })
            .collect();
        let mut qgrads = vec![0.0; qnet.net.params().len()];
        qnet.net.backward_batch(&qcache, &og_q, &mut qgrads)?;
        q_opt.step(qnet.net.params_mut(), &qgrads);
        q_tgt.track(&qnet.net, cfg.target_rate);

        // Policy extraction by advantage-weighted regression.
        let weights: Vec<f64> = q_sa_tgt
            .iter()
            .zip(&v)
            .map(|(&q, &vv)| ((q - vv) * cfg.iql_beta).exp().min(cfg.awr_clip))
            .collect();
        let mut gnorm = 0.0;
        let actor_loss =
            gaussian_awr_step(&mut actor, &mut actor_opt, &b.s, &b.a, &weights, b.batch, &mut gnorm)?;

        h.record(step, cfg.gradient_steps, actor_loss, v_loss + q_loss, mean(&q_sa), gnorm);
    }
    Ok((ctx.artifact(cfg, PolicyHead::Gaussian(actor)), h.log, vnet, qnet))
}

#[cfg(test)]
mod tests {
    use super::super::crr::tests::{bandit_cfg, bandit_dataset, bandit_policy_mean};
    use super::*;
    use crate::nn::AlgoId;

    #[test]
    fn expectile_loss_symmetry_and_values() {
        // tau = 0.5 halves the squared error on both sides.
        for u in [-2.0, -0.3, 0.0, 0.7, 1.5] {
            assert!((expectile_loss(u, 0.5) - 0.5 * u * u).abs() < 1e-15);
            assert!((expectile_loss(u, 0.5) - expectile_loss(-u, 0.5)).abs() < 1e-15);
        }
        assert!((expectile_loss(1.0, 0.7) - 0.7).abs() < 1e-15);
        assert!((expectile_loss(-1.0, 0.7) - 0.3).abs() < 1e-15);
    }

    /// Closed-form oracle: the tau-expectile of a two-point {0, 1}
    /// distribution with equal mass solves tau (1 - v) = (1 - tau) v,
    /// so v = tau.
    fn two_point_expectile(tau: f64) -> f64 {
        tau
    }

    #[test]
    fn fitted_value_matches_two_point_expectiles() {
        let ds = bandit_dataset(64);
        for (tau, tol) in [(0.5, 0.05), (0.7, 0.05), (0.99, 0.1)] {
            let mut cfg = bandit_cfg(AlgoId::Iql);
            cfg.iql_tau = tau;
            cfg.gradient_steps = 6000;
            let ctx = TrainContext::prepare(&ds, &cfg).unwrap();
            let (_, log, vnet, _) = train_with_values(&ctx, &cfg).unwrap();
            assert!(log.all_finite());
            let v = vnet.forward(ctx.obs_row(0)).unwrap()[0];
            let expect = two_point_expectile(tau);
            assert!(
                (v - expect).abs() < tol + 0.02,
                "tau {tau}: fitted V {v}, expectile {expect}"
            );
        }
    }

    #[test]
    fn bandit_policy_prefers_rewarded_arm() {
        let ds = bandit_dataset(64);
        let mut cfg = bandit_cfg(AlgoId::Iql);
        cfg.iql_beta = 10.0;
        let ctx = TrainContext::prepare(&ds, &cfg).unwrap();
        let (art, log) = train(&ctx, &cfg).unwrap();
        assert!(log.all_finite());
        let m = bandit_policy_mean(&art);
        assert!((m - 0.5).abs() < 0.1, "policy mean {m}");
    }
}
