//! Conservative Q-learning: the TD critic loss plus a penalty pushing
//! down the log-sum-exp of Q over random actions relative to Q at the
//! dataset actions; the actor maximizes Q with an entropy floor.

use super::common::{mean, Harness, QNet, TargetNet, TrainConfig, TrainContext, TrainLog};
use crate::error::Result;
use crate::nn::{GaussianPolicy, Mlp, OptimState, PolicyArtifact, PolicyHead};
use rand::Rng;

pub fn train(ctx: &TrainContext, cfg: &TrainConfig) -> Result<(PolicyArtifact, TrainLog)> {
    let (artifact, log, _) = train_with_critic(ctx, cfg)?;
    Ok((artifact, log))
}

pub(crate) fn train_with_critic(
    ctx: &TrainContext,
    cfg: &TrainConfig,
) -> Result<(PolicyArtifact, TrainLog, QNet)> {
    let mut h = Harness::new(cfg);
    let mut actor = GaussianPolicy::new(Mlp::new(&ctx.actor_dims(cfg), &mut h.rng), cfg.init_log_std);
    let mut critic = QNet::new(&ctx.value_dims(cfg, true), &mut h.rng);
    let mut critic_tgt = TargetNet::of(&critic.net);
    let mut actor_opt = OptimState::new(actor.param_count(), cfg.actor_lr);
    let mut critic_opt = OptimState::new(critic.net.params().len(), cfg.critic_lr);
    let k = cfg.cql_random_actions.max(1);

    for step in 0..cfg.gradient_steps {
        let b = ctx.sample_batch(&mut h.rng, cfg.batch_size);
        let inv_b = 1.0 / b.batch as f64;

        // TD target through the target critic at the policy mean.
        let (_, mu2) = actor.mean.forward_batch(&b.s2, b.batch)?;
        let mu2c: Vec<f64> = mu2.iter().map(|v| v.clamp(-1.0, 1.0)).collect();
        let in2 = critic.concat(&b.s2, &mu2c, b.batch);
        let (_, q2) = critic_tgt.net.forward_batch(&in2, b.batch)?;
        let targets: Vec<f64> =
            b.r.iter().zip(&q2).map(|(&r, &q)| r + cfg.gamma * q).collect();

        // Dataset-action pass carries both the TD gradient and the
        // negative side of the conservative penalty.
        let in1 = critic.concat(&b.s, &b.a, b.batch);
        let (cache1, q1) = critic.net.forward_batch(&in1, b.batch)?;
        let mut td_loss = 0.0;
        let mut og1: Vec<f64> = q1
            .iter()
            .zip(&targets)
            .map(|(&q, &y)| {
                let d = q - y;
                td_loss += d * d * inv_b;
                2.0 * d * inv_b
            })
            .collect();
        for g in og1.iter_mut() {
            *g -= cfg.cql_penalty * inv_b;
        }

        // Random-action pass: logsumexp over k uniform actions per state.
        let mut rand_actions = vec![0.0; b.batch * k * ctx.act_dim];
        for v in rand_actions.iter_mut() {
            *v = h.rng.gen_range(-1.0..1.0);
        }
        let mut s_rep = vec![0.0; b.batch * k * ctx.obs_dim];
        for i in 0..b.batch {
            for j in 0..k {
                let dst = (i * k + j) * ctx.obs_dim;
                s_rep[dst..dst + ctx.obs_dim]
                    .copy_from_slice(&b.s[i * ctx.obs_dim..(i + 1) * ctx.obs_dim]);
            }
        }
        let in_r = critic.concat(&s_rep, &rand_actions, b.batch * k);
        let (cache_r, q_r) = critic.net.forward_batch(&in_r, b.batch * k)?;
        let mut penalty_loss = 0.0;
        let mut og_r = vec![0.0; b.batch * k];
        for i in 0..b.batch {
            let row = &q_r[i * k..(i + 1) * k];
            let m = row.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
            let sum_exp: f64 = row.iter().map(|&v| (v - m).exp()).sum();
            let lse = m + sum_exp.ln();
            penalty_loss += cfg.cql_penalty * (lse - q1[i]) * inv_b;
            for j in 0..k {
                // Softmax weights: gradient of logsumexp.
                og_r[i * k + j] = cfg.cql_penalty * ((row[j] - m).exp() / sum_exp) * inv_b;
            }
        }

        let mut cgrads = vec![0.0; critic.net.params().len()];
        critic.net.backward_batch(&cache1, &og1, &mut cgrads)?;
        critic.net.backward_batch(&cache_r, &og_r, &mut cgrads)?;
        critic_opt.step(critic.net.params_mut(), &cgrads);
        critic_tgt.track(&critic.net, cfg.target_rate);

        // Actor: ascend Q at the policy mean with an entropy floor that
        // keeps the log-std from collapsing.
        let (acache, mu) = actor.mean.forward_batch(&b.s, b.batch)?;
        let muc: Vec<f64> = mu.iter().map(|v| v.clamp(-1.0, 1.0)).collect();
        let in_a = critic.concat(&b.s, &muc, b.batch);
        let (qcache, q_pi) = critic.net.forward_batch(&in_a, b.batch)?;
        let actor_loss = -mean(&q_pi) - cfg.cql_entropy_weight * actor.entropy();
        let og_q: Vec<f64> = vec![-inv_b; b.batch];
        let mut qgrads_scratch = vec![0.0; critic.net.params().len()];
        let input_grads = critic.net.backward_batch(&qcache, &og_q, &mut qgrads_scratch)?;
        // Route the action slice of dL/d(input) through the clip into the
        // mean network; the clip gates saturated dims.
        let mut dmu = vec![0.0; b.batch * ctx.act_dim];
        let total = ctx.obs_dim + ctx.act_dim;
        for i in 0..b.batch {
            for j in 0..ctx.act_dim {
                let g = input_grads[i * total + ctx.obs_dim + j];
                let saturated = mu[i * ctx.act_dim + j].abs() >= 1.0;
                dmu[i * ctx.act_dim + j] = if saturated { 0.0 } else { g };
            }
        }
        let n_mean = actor.mean.params().len();
        let mut agrads = vec![0.0; n_mean + ctx.act_dim];
        {
            let (mg, lg) = agrads.split_at_mut(n_mean);
            let mut tmp = vec![0.0; n_mean];
            actor.mean.backward_batch(&acache, &dmu, &mut tmp)?;
            mg.copy_from_slice(&tmp);
            for g in lg.iter_mut() {
                *g = -cfg.cql_entropy_weight;
            }
        }
        let gnorm = super::common::l2(&agrads);
        let mut flat = actor.flat_params();
        actor_opt.step(&mut flat, &agrads);
        actor.set_flat_params(&flat);
        actor.clamp_log_std();

        h.record(
            step,
            cfg.gradient_steps,
            actor_loss,
            td_loss + penalty_loss,
            mean(&q1),
            gnorm,
        );
    }
    Ok((ctx.artifact(cfg, PolicyHead::Gaussian(actor)), h.log, critic))
}

#[cfg(test)]
mod tests {
    use super::super::crr::tests::{bandit_cfg, bandit_dataset, bandit_policy_mean};
    use super::*;
    use crate::nn::AlgoId;

    #[test]
    fn logsumexp_of_identical_values() {
        let q = 0.37;
        let k = 10;
        let row = vec![q; k];
        let m = row.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
        assert!((lse - (q + (k as f64).ln())).abs() < 1e-12);
    }

    #[test]
    fn zero_penalty_reduces_to_td_and_fits_bandit_value() {
        let ds = bandit_dataset(64);
        let mut cfg = bandit_cfg(AlgoId::Cql);
        cfg.cql_penalty = 0.0;
        cfg.gradient_steps = 6000;
        cfg.target_rate = 0.05;
        let ctx = TrainContext::prepare(&ds, &cfg).unwrap();
        let (art, log, mut critic) = train_with_critic(&ctx, &cfg).unwrap();
        assert!(log.all_finite());
        // The Bellman fixed point of the rewarded arm is its empirical
        // reward; the near-zero discount makes the bootstrap negligible.
        let s = ctx.obs_row(0).to_vec();
        let q1 = critic.values(&s, &[0.5], 1).unwrap()[0];
        assert!((q1 - 1.0).abs() < 0.05, "Q(rewarded arm) = {q1}");
        // Without the penalty the critic extrapolates freely, so the
        // unconstrained maximizer can leave the data support; only the
        // critic fixed point is asserted here.
        let _ = art;
    }

    #[test]
    fn penalty_pushes_random_actions_below_dataset_actions() {
        let ds = bandit_dataset(64);
        let mut cfg = bandit_cfg(AlgoId::Cql);
        cfg.cql_penalty = 5.0;
        cfg.gradient_steps = 3000;
        let ctx = TrainContext::prepare(&ds, &cfg).unwrap();
        let (_, log, mut critic) = train_with_critic(&ctx, &cfg).unwrap();
        assert!(log.all_finite());

        use rand::Rng;
        let mut rng = crate::rng::rng_from_seed(77);
        let mut q_data_sum = 0.0;
        let mut q_rand_sum = 0.0;
        let mut n_rand = 0.0;
        for i in 0..ctx.n {
            let s = ctx.obs_row(i).to_vec();
            let a = ctx.act_row(i).to_vec();
            q_data_sum += critic.values(&s, &a, 1).unwrap()[0];
            for _ in 0..8 {
                let u: Vec<f64> = (0..ctx.act_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                q_rand_sum += critic.values(&s, &u, 1).unwrap()[0];
                n_rand += 1.0;
            }
        }
        let q_data = q_data_sum / ctx.n as f64;
        let q_rand = q_rand_sum / n_rand;
        assert!(
            q_rand < q_data,
            "random-action Q {q_rand} not below dataset-action Q {q_data}"
        );
    }

    #[test]
    fn penalized_bandit_policy_stays_on_rewarded_arm() {
        let ds = bandit_dataset(64);
        let mut cfg = bandit_cfg(AlgoId::Cql);
        cfg.gradient_steps = 6000;
        let ctx = TrainContext::prepare(&ds, &cfg).unwrap();
        let (art, log) = train(&ctx, &cfg).unwrap();
        assert!(log.all_finite());
        let m = bandit_policy_mean(&art);
        assert!((m - 0.5).abs() < 0.1, "policy mean {m}");
    }
}
