//! Shared trainer machinery: configuration, logging, the prepared
//! (stacked, normalized) training arrays, minibatching, target networks
//! and the advantage-weighted Gaussian actor update.

use crate::data::{compute_norm_stats, history_stack, Dataset, NormStats};
use crate::error::{Error, Result};
use crate::geom::Task;
use crate::nn::{AlgoId, GaussianPolicy, Mlp, OptimState, PolicyArtifact, PolicyHead};
use crate::rng::{next_gaussian, rng_from_seed};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// How CRR turns advantages into regression weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrrWeightMode {
    /// 1 if the advantage is positive, else 0.
    Indicator,
    /// exp(advantage / temperature), clipped.
    Exponential,
}

impl CrrWeightMode {
    pub fn parse(s: &str) -> Result<CrrWeightMode> {
        Ok(match s {
            "indicator" => CrrWeightMode::Indicator,
            "exponential" => CrrWeightMode::Exponential,
            other => return Err(Error::InvalidInput(format!("unknown crr mode '{other}'"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            CrrWeightMode::Indicator => "indicator",
            CrrWeightMode::Exponential => "exponential",
        }
    }
}

/// Training configuration; algorithm-specific knobs are all exposed here
/// with conventional defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub algo: AlgoId,
    pub gradient_steps: usize,
    pub batch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    /// Target-network tracking rate in (0, 1].
    pub target_rate: f64,
    pub hidden: Vec<usize>,
    /// Observation history length (1 = no stacking).
    pub history: usize,
    pub crr_mode: CrrWeightMode,
    pub crr_temp: f64,
    pub crr_action_samples: usize,
    pub crr_exp_clip: f64,
    pub awac_lambda: f64,
    pub awr_clip: f64,
    pub cql_penalty: f64,
    pub cql_random_actions: usize,
    pub cql_entropy_weight: f64,
    pub iql_tau: f64,
    pub iql_beta: f64,
    pub td3bc_alpha: f64,
    pub policy_noise: f64,
    pub noise_clip: f64,
    pub policy_delay: usize,
    /// Spatial smoothness weight and perturbation scale (normalized states).
    pub smooth_weight: f64,
    pub smooth_sigma: f64,
    pub init_log_std: f64,
    pub log_interval: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            algo: AlgoId::Bc,
            gradient_steps: 20_000,
            batch_size: 256,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            gamma: 0.99,
            target_rate: 0.005,
            hidden: vec![256, 256],
            history: 1,
            crr_mode: CrrWeightMode::Indicator,
            crr_temp: 1.0,
            crr_action_samples: 4,
            crr_exp_clip: 20.0,
            awac_lambda: 1.0,
            awr_clip: 100.0,
            cql_penalty: 5.0,
            cql_random_actions: 10,
            cql_entropy_weight: 1e-3,
            iql_tau: 0.7,
            iql_beta: 3.0,
            td3bc_alpha: 2.5,
            policy_noise: 0.2,
            noise_clip: 0.5,
            policy_delay: 2,
            smooth_weight: 0.1,
            smooth_sigma: 0.05,
            init_log_std: -1.0,
            log_interval: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// The 400/300 architecture used by the TD3+BC entry.
    pub fn preset_400_300(mut self) -> TrainConfig {
        self.hidden = vec![400, 300];
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidParameter(format!("gamma must be in (0, 1], got {}", self.gamma)));
        }
        if !(self.iql_tau > 0.0 && self.iql_tau < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "expectile must be in (0, 1), got {}",
                self.iql_tau
            )));
        }
        if !(self.target_rate > 0.0 && self.target_rate <= 1.0) {
            return Err(Error::InvalidParameter("target rate must be in (0, 1]".into()));
        }
        if self.gradient_steps == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParameter("steps and batch size must be positive".into()));
        }
        if self.history == 0 {
            return Err(Error::InvalidParameter("history must be at least 1".into()));
        }
        let weights = [
            self.crr_temp,
            self.awac_lambda,
            self.cql_penalty,
            self.iql_beta,
            self.td3bc_alpha,
            self.smooth_weight,
            self.smooth_sigma,
            self.cql_entropy_weight,
        ];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParameter("algorithm weights must be non-negative".into()));
        }
        Ok(())
    }

    /// Stable content hash of the configuration, mixed into artifact
    /// fingerprints.
    pub fn fingerprint(&self, task: Task, n_transitions: usize) -> u64 {
        let repr = format!("{self:?}|{task:?}|{n_transitions}");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in repr.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
        h
    }
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub step: usize,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub q_mean: f64,
    pub grad_norm: f64,
    pub wall_s: f64,
}

/// Per-interval losses and statistics collected during training.
#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
}

impl TrainLog {
    pub fn push(&mut self, row: LogRow) {
        self.rows.push(row);
    }

    pub fn all_finite(&self) -> bool {
        self.rows.iter().all(|r| {
            r.actor_loss.is_finite()
                && r.critic_loss.is_finite()
                && r.q_mean.is_finite()
                && r.grad_norm.is_finite()
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,actor_loss,critic_loss,q_mean,grad_norm,wall_s\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.step, r.actor_loss, r.critic_loss, r.q_mean, r.grad_norm, r.wall_s
            ));
        }
        s
    }
}

/// Dataset prepared for training: stacked, normalized, flattened to f64.
pub struct TrainContext {
    pub task: Task,
    pub obs: Vec<f64>,
    pub acts: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_idx: Vec<u32>,
    pub n: usize,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub raw_obs_dim: usize,
    pub stats: NormStats,
    pub fingerprint: u64,
}

impl TrainContext {
    pub fn prepare(dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainContext> {
        dataset.validate()?;
        if dataset.n_transitions() == 0 {
            return Err(Error::InvalidInput("cannot train on an empty dataset".into()));
        }
        let raw_obs_dim = dataset.obs_dim;
        let stacked;
        let ds = if cfg.history > 1 {
            stacked = history_stack(dataset, cfg.history)?;
            &stacked
        } else {
            dataset
        };
        let stats = compute_norm_stats(ds)?;
        let n = ds.n_transitions();
        let d = ds.obs_dim;
        let mut obs = vec![0.0f64; n * d];
        for (i, row) in ds.observations.chunks_exact(d).enumerate() {
            for (j, &v) in row.iter().enumerate() {
                obs[i * d + j] = (v as f64 - stats.mean[j]) / stats.std[j];
            }
        }
        let acts: Vec<f64> = ds.actions.iter().map(|&a| a as f64).collect();
        let rewards: Vec<f64> = ds.rewards.iter().map(|&r| r as f64).collect();
        let next_idx: Vec<u32> = (0..n).map(|i| ds.next_index(i) as u32).collect();
        Ok(TrainContext {
            task: ds.task,
            obs,
            acts,
            rewards,
            next_idx,
            n,
            obs_dim: d,
            act_dim: ds.act_dim,
            raw_obs_dim,
            stats,
            fingerprint: cfg.fingerprint(ds.task, n),
        })
    }

    pub fn obs_row(&self, i: usize) -> &[f64] {
        &self.obs[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn act_row(&self, i: usize) -> &[f64] {
        &self.acts[i * self.act_dim..(i + 1) * self.act_dim]
    }

    /// Gathers a minibatch: states, actions, rewards and successor states.
    pub fn sample_batch(&self, rng: &mut ChaCha8Rng, batch: usize) -> BatchData {
        let idx: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..self.n)).collect();
        let d = self.obs_dim;
        let a = self.act_dim;
        let mut s = Vec::with_capacity(batch * d);
        let mut acts = Vec::with_capacity(batch * a);
        let mut r = Vec::with_capacity(batch);
        let mut s2 = Vec::with_capacity(batch * d);
        for &i in &idx {
            s.extend_from_slice(self.obs_row(i));
            acts.extend_from_slice(self.act_row(i));
            r.push(self.rewards[i]);
            s2.extend_from_slice(self.obs_row(self.next_idx[i] as usize));
        }
        BatchData { s, a: acts, r, s2, batch }
    }

    /// Architecture of the actor mean network.
    pub fn actor_dims(&self, cfg: &TrainConfig) -> Vec<usize> {
        let mut dims = vec![self.obs_dim];
        dims.extend(&cfg.hidden);
        dims.push(self.act_dim);
        dims
    }

    /// Architecture of a state(-action) value network.
    pub fn value_dims(&self, cfg: &TrainConfig, with_action: bool) -> Vec<usize> {
        let mut dims = vec![if with_action { self.obs_dim + self.act_dim } else { self.obs_dim }];
        dims.extend(&cfg.hidden);
        dims.push(1);
        dims
    }

    pub fn artifact(&self, cfg: &TrainConfig, head: PolicyHead) -> PolicyArtifact {
        PolicyArtifact {
            algo: cfg.algo,
            task: self.task,
            history: cfg.history,
            raw_obs_dim: self.raw_obs_dim,
            act_dim: self.act_dim,
            norm_mean: self.stats.mean.clone(),
            norm_std: self.stats.std.clone(),
            head,
            fingerprint: self.fingerprint,
        }
    }
}

pub struct BatchData {
    /// Row-major [batch x obs_dim] normalized states.
    pub s: Vec<f64>,
    /// Row-major [batch x act_dim] dataset actions.
    pub a: Vec<f64>,
    pub r: Vec<f64>,
    pub s2: Vec<f64>,
    pub batch: usize,
}

/// State-action value network over concatenated (state, action) inputs.
pub struct QNet {
    pub net: Mlp,
    scratch: Vec<f64>,
}

impl QNet {
    pub fn new(dims: &[usize], rng: &mut ChaCha8Rng) -> QNet {
        QNet { net: Mlp::new(dims, rng), scratch: Vec::new() }
    }

    pub fn concat(&mut self, s: &[f64], a: &[f64], batch: usize) -> Vec<f64> {
        let d = s.len() / batch;
        let ad = a.len() / batch;
        self.scratch.clear();
        self.scratch.reserve(batch * (d + ad));
        for i in 0..batch {
            self.scratch.extend_from_slice(&s[i * d..(i + 1) * d]);
            self.scratch.extend_from_slice(&a[i * ad..(i + 1) * ad]);
        }
        std::mem::take(&mut self.scratch)
    }

    /// Q values for a batch of (state, action) rows.
    pub fn values(&mut self, s: &[f64], a: &[f64], batch: usize) -> Result<Vec<f64>> {
        let input = self.concat(s, a, batch);
        let (_, q) = self.net.forward_batch(&input, batch)?;
        Ok(q)
    }
}

/// Polyak-averaged copy of an online network.
pub struct TargetNet {
    pub net: Mlp,
}

impl TargetNet {
    pub fn of(online: &Mlp) -> TargetNet {
        TargetNet { net: online.clone() }
    }

    /// Convex blend toward the online parameters at rate `rho`.
    pub fn track(&mut self, online: &Mlp, rho: f64) {
        for (t, o) in self.net.params_mut().iter_mut().zip(online.params()) {
            *t = (1.0 - rho) * *t + rho * *o;
        }
    }
}

/// Samples one action per row from a Gaussian head given batched means.
pub fn sample_actions(
    mu: &[f64],
    log_std: &[f64],
    batch: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let a = log_std.len();
    let mut out = vec![0.0; batch * a];
    for i in 0..batch {
        for j in 0..a {
            let sigma = log_std[j].exp();
            out[i * a + j] = (mu[i * a + j] + sigma * next_gaussian(rng)).clamp(-1.0, 1.0);
        }
    }
    out
}

/// Weighted negative-log-likelihood actor update shared by CRR, AWAC and
/// IQL: minimizes -(1/B) sum_i w_i log pi(a_i | s_i) and returns the loss.
pub fn gaussian_awr_step(
    policy: &mut GaussianPolicy,
    opt: &mut OptimState,
    s: &[f64],
    a: &[f64],
    weights: &[f64],
    batch: usize,
    grad_norm_out: &mut f64,
) -> Result<f64> {
    let act_dim = policy.act_dim();
    let (cache, mu) = policy.mean.forward_batch(s, batch)?;
    let mut dmu = vec![0.0; batch * act_dim];
    let mut ls_grads = vec![0.0; act_dim];
    let mut loss = 0.0;
    let inv_b = 1.0 / batch as f64;
    for i in 0..batch {
        let w = weights[i];
        for j in 0..act_dim {
            let ls = policy.log_std[j];
            let sigma = ls.exp();
            let z = (a[i * act_dim + j] - mu[i * act_dim + j]) / sigma;
            loss -= w * (-0.5 * z * z - ls - 0.5 * std::f64::consts::TAU.ln());
            // d(-w logp)/dmu and /dlog_std.
            dmu[i * act_dim + j] = -w * z / sigma * inv_b;
            ls_grads[j] -= w * (z * z - 1.0) * inv_b;
        }
    }
    loss *= inv_b;

    let n_mean = policy.mean.params().len();
    let mut grads = vec![0.0; n_mean + act_dim];
    {
        let (mg, lg) = grads.split_at_mut(n_mean);
        let mut tmp = vec![0.0; n_mean];
        policy.mean.backward_batch(&cache, &dmu, &mut tmp)?;
        mg.copy_from_slice(&tmp);
        lg.copy_from_slice(&ls_grads);
    }
    *grad_norm_out = l2(&grads);
    let mut flat = policy.flat_params();
    opt.step(&mut flat, &grads);
    policy.set_flat_params(&flat);
    policy.clamp_log_std();
    Ok(loss)
}

pub fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Shared trainer scaffolding: seeded generator, timers and logging.
pub struct Harness {
    pub rng: ChaCha8Rng,
    pub log: TrainLog,
    start: Instant,
    log_interval: usize,
}

impl Harness {
    pub fn new(cfg: &TrainConfig) -> Harness {
        Harness {
            rng: rng_from_seed(cfg.seed),
            log: TrainLog::default(),
            start: Instant::now(),
            log_interval: cfg.log_interval.max(1),
        }
    }

    pub fn record(
        &mut self,
        step: usize,
        total: usize,
        actor_loss: f64,
        critic_loss: f64,
        q_mean: f64,
        grad_norm: f64,
    ) {
        if step % self.log_interval == 0 || step + 1 == total {
            self.log.push(LogRow {
                step,
                actor_loss,
                critic_loss,
                q_mean,
                grad_norm,
                wall_s: self.start.elapsed().as_secs_f64(),
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::testutil::synthetic;

    #[test]
    fn config_validation_catches_bad_fields() {
        let mut cfg = TrainConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.gamma = 0.0;
        assert!(cfg.validate().is_err());
        cfg.gamma = 1.0;
        cfg.iql_tau = 1.0;
        assert!(cfg.validate().is_err());
        cfg.iql_tau = 0.7;
        cfg.cql_penalty = -1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn context_normalizes_observations() {
        let ds = synthetic(Task::Push, 3, 20, 5, 2, 9);
        let cfg = TrainConfig::default();
        let ctx = TrainContext::prepare(&ds, &cfg).unwrap();
        let d = ctx.obs_dim;
        let n = ctx.n;
        for j in 0..d {
            let mean: f64 = (0..n).map(|i| ctx.obs[i * d + j]).sum::<f64>() / n as f64;
            assert!(mean.abs() < 1e-9, "dim {j} mean {mean}");
        }
    }

    #[test]
    fn target_net_tracks_convexly() {
        let mut rng = rng_from_seed(4);
        let online = Mlp::new(&[3, 4, 2], &mut rng);
        let mut tgt = TargetNet::of(&online);
        let mut online2 = online.clone();
        for p in online2.params_mut() {
            *p += 1.0;
        }
        tgt.track(&online2, 0.25);
        for ((t, o1), o2) in tgt.net.params().iter().zip(online.params()).zip(online2.params()) {
            let expect = 0.75 * o1 + 0.25 * o2;
            assert!((t - expect).abs() < 1e-12);
            assert!(*t >= o1.min(*o2) - 1e-12 && *t <= o1.max(*o2) + 1e-12);
        }
    }

    #[test]
    fn fingerprint_distinguishes_configs() {
        let a = TrainConfig::default();
        let mut b = a.clone();
        b.seed = 1;
        assert_ne!(a.fingerprint(Task::Push, 100), b.fingerprint(Task::Push, 100));
        assert_ne!(a.fingerprint(Task::Push, 100), a.fingerprint(Task::Lift, 100));
        assert_eq!(a.fingerprint(Task::Push, 100), a.fingerprint(Task::Push, 100));
    }

    #[test]
    fn log_csv_has_header_and_rows() {
        let mut log = TrainLog::default();
        log.push(LogRow { step: 0, actor_loss: 1.0, critic_loss: 2.0, q_mean: 3.0, grad_norm: 4.0, wall_s: 0.1 });
        let csv = log.to_csv();
        assert!(csv.starts_with("step,actor_loss"));
        assert_eq!(csv.lines().count(), 2);
        assert!(log.all_finite());
    }
}
