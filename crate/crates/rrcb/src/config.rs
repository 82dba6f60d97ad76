//! Flat key=value run configuration: every tunable of the arena, the
//! observation model, the reward kernel, dataset generation, training and
//! evaluation lives behind a validated key. Unknown keys are rejected and
//! the fully resolved configuration can be echoed back out, which makes
//! every run reproducible from its echo file.

use crate::algos::{CrrWeightMode, TrainConfig};
use crate::data::{EnvConfig, FilterConfig, PoseFilterConfig};
use crate::env::{ArenaSpec, ObservationModel, WeakPolicyConfig};
use crate::error::{Error, Result};
use crate::eval::EvalProtocolConfig;
use crate::geom::{KernelParams, SuccessThresholds};
use crate::nn::AlgoId;

/// Fully resolved run configuration with typed defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub arena: ArenaSpec,
    pub obs_model: ObservationModel,
    pub kernel_a: f64,
    pub kernel_b: f64,
    pub thresholds: SuccessThresholds,
    pub weak: WeakPolicyConfig,
    pub episodes: usize,
    pub train: TrainConfig,
    pub filter: FilterConfig,
    pub pose_filter: PoseFilterConfig,
    pub eval: EvalProtocolConfig,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            arena: ArenaSpec::default(),
            obs_model: ObservationModel::default(),
            kernel_a: 30.0,
            kernel_b: 1.0,
            thresholds: SuccessThresholds::default(),
            weak: WeakPolicyConfig::default(),
            episodes: 200,
            train: TrainConfig::default(),
            filter: FilterConfig::default(),
            pose_filter: PoseFilterConfig::default(),
            eval: EvalProtocolConfig::default(),
        }
    }
}

macro_rules! config_keys {
    ($(($key:literal, $get:expr, $set:expr)),+ $(,)?) => {
        /// All recognized keys in echo order.
        pub const KEYS: &[&str] = &[$($key),+];

        impl RunConfig {
            /// Sets one key from its textual value.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $($key => {
                        let setter: fn(&mut RunConfig, &str) -> Result<()> = $set;
                        setter(self, value)
                    })+
                    _ => Err(Error::InvalidInput(format!("unknown config key '{key}'"))),
                }
            }

            /// Current textual value of one key.
            pub fn get(&self, key: &str) -> Option<String> {
                match key {
                    $($key => {
                        let getter: fn(&RunConfig) -> String = $get;
                        Some(getter(self))
                    })+
                    _ => None,
                }
            }
        }
    };
}

fn pf64(v: &str) -> Result<f64> {
    v.parse::<f64>().map_err(|_| Error::InvalidInput(format!("expected a number, got '{v}'")))
}

fn pusize(v: &str) -> Result<usize> {
    v.parse::<usize>().map_err(|_| Error::InvalidInput(format!("expected a count, got '{v}'")))
}

fn pu32(v: &str) -> Result<u32> {
    v.parse::<u32>().map_err(|_| Error::InvalidInput(format!("expected a count, got '{v}'")))
}

fn phidden(v: &str) -> Result<Vec<usize>> {
    if v.trim().is_empty() {
        return Ok(vec![]);
    }
    v.split('x').map(|p| pusize(p.trim())).collect()
}

fn hidden_str(h: &[usize]) -> String {
    if h.is_empty() {
        String::new()
    } else {
        h.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("x")
    }
}

config_keys![
    ("arena.radius", |c| c.arena.radius.to_string(), |c, v| { c.arena.radius = pf64(v)?; Ok(()) }),
    ("arena.cube_half_extent", |c| c.arena.cube_half_extent.to_string(), |c, v| { c.arena.cube_half_extent = pf64(v)?; Ok(()) }),
    ("arena.dt", |c| c.arena.dt.to_string(), |c, v| { c.arena.dt = pf64(v)?; Ok(()) }),
    ("arena.gravity", |c| c.arena.gravity.to_string(), |c, v| { c.arena.gravity = pf64(v)?; Ok(()) }),
    ("arena.max_step_disp", |c| c.arena.max_step_disp.to_string(), |c, v| { c.arena.max_step_disp = pf64(v)?; Ok(()) }),
    ("arena.contact_radius", |c| c.arena.contact_radius.to_string(), |c, v| { c.arena.contact_radius = pf64(v)?; Ok(()) }),
    ("arena.grasp_radius", |c| c.arena.grasp_radius.to_string(), |c, v| { c.arena.grasp_radius = pf64(v)?; Ok(()) }),
    ("arena.workspace_radius", |c| c.arena.workspace_radius.to_string(), |c, v| { c.arena.workspace_radius = pf64(v)?; Ok(()) }),
    ("arena.home_radius", |c| c.arena.home_radius.to_string(), |c, v| { c.arena.home_radius = pf64(v)?; Ok(()) }),
    ("arena.home_height", |c| c.arena.home_height.to_string(), |c, v| { c.arena.home_height = pf64(v)?; Ok(()) }),
    ("obs.sigma_pos", |c| c.obs_model.sigma_pos.to_string(), |c, v| { c.obs_model.sigma_pos = pf64(v)?; Ok(()) }),
    ("obs.sigma_ori_deg", |c| c.obs_model.sigma_ori_deg.to_string(), |c, v| { c.obs_model.sigma_ori_deg = pf64(v)?; Ok(()) }),
    ("obs.max_delay", |c| c.obs_model.max_delay.to_string(), |c, v| { c.obs_model.max_delay = pu32(v)?; Ok(()) }),
    ("obs.delay_prob", |c| c.obs_model.delay_prob.to_string(), |c, v| { c.obs_model.delay_prob = pf64(v)?; Ok(()) }),
    ("obs.lowconf_prob", |c| c.obs_model.lowconf_prob.to_string(), |c, v| { c.obs_model.lowconf_prob = pf64(v)?; Ok(()) }),
    ("obs.glitch_noise_scale", |c| c.obs_model.glitch_noise_scale.to_string(), |c, v| { c.obs_model.glitch_noise_scale = pf64(v)?; Ok(()) }),
    ("kernel.a", |c| c.kernel_a.to_string(), |c, v| { c.kernel_a = pf64(v)?; Ok(()) }),
    ("kernel.b", |c| c.kernel_b.to_string(), |c, v| { c.kernel_b = pf64(v)?; Ok(()) }),
    ("success.pos_tol", |c| c.thresholds.pos_tol.to_string(), |c, v| { c.thresholds.pos_tol = pf64(v)?; Ok(()) }),
    ("success.ori_tol_deg", |c| c.thresholds.ori_tol_deg.to_string(), |c, v| { c.thresholds.ori_tol_deg = pf64(v)?; Ok(()) }),
    ("weak.noise_sigma", |c| c.weak.noise_sigma.to_string(), |c, v| { c.weak.noise_sigma = pf64(v)?; Ok(()) }),
    ("weak.gain_scale", |c| c.weak.gain_scale.to_string(), |c, v| { c.weak.gain_scale = pf64(v)?; Ok(()) }),
    ("weak.aim_bias", |c| c.weak.aim_bias.to_string(), |c, v| { c.weak.aim_bias = pf64(v)?; Ok(()) }),
    ("data.episodes", |c| c.episodes.to_string(), |c, v| { c.episodes = pusize(v)?; Ok(()) }),
    ("train.algo", |c| c.train.algo.name().to_string(), |c, v| { c.train.algo = AlgoId::parse(v)?; Ok(()) }),
    ("train.gradient_steps", |c| c.train.gradient_steps.to_string(), |c, v| { c.train.gradient_steps = pusize(v)?; Ok(()) }),
    ("train.batch_size", |c| c.train.batch_size.to_string(), |c, v| { c.train.batch_size = pusize(v)?; Ok(()) }),
    ("train.actor_lr", |c| c.train.actor_lr.to_string(), |c, v| { c.train.actor_lr = pf64(v)?; Ok(()) }),
    ("train.critic_lr", |c| c.train.critic_lr.to_string(), |c, v| { c.train.critic_lr = pf64(v)?; Ok(()) }),
    ("train.gamma", |c| c.train.gamma.to_string(), |c, v| { c.train.gamma = pf64(v)?; Ok(()) }),
    ("train.target_rate", |c| c.train.target_rate.to_string(), |c, v| { c.train.target_rate = pf64(v)?; Ok(()) }),
    ("train.hidden", |c| hidden_str(&c.train.hidden), |c, v| { c.train.hidden = phidden(v)?; Ok(()) }),
    ("train.history", |c| c.train.history.to_string(), |c, v| { c.train.history = pusize(v)?; Ok(()) }),
    ("train.crr_mode", |c| c.train.crr_mode.name().to_string(), |c, v| { c.train.crr_mode = CrrWeightMode::parse(v)?; Ok(()) }),
    ("train.crr_temp", |c| c.train.crr_temp.to_string(), |c, v| { c.train.crr_temp = pf64(v)?; Ok(()) }),
    ("train.crr_action_samples", |c| c.train.crr_action_samples.to_string(), |c, v| { c.train.crr_action_samples = pusize(v)?; Ok(()) }),
    ("train.crr_exp_clip", |c| c.train.crr_exp_clip.to_string(), |c, v| { c.train.crr_exp_clip = pf64(v)?; Ok(()) }),
    ("train.awac_lambda", |c| c.train.awac_lambda.to_string(), |c, v| { c.train.awac_lambda = pf64(v)?; Ok(()) }),
    ("train.awr_clip", |c| c.train.awr_clip.to_string(), |c, v| { c.train.awr_clip = pf64(v)?; Ok(()) }),
    ("train.cql_penalty", |c| c.train.cql_penalty.to_string(), |c, v| { c.train.cql_penalty = pf64(v)?; Ok(()) }),
    ("train.cql_random_actions", |c| c.train.cql_random_actions.to_string(), |c, v| { c.train.cql_random_actions = pusize(v)?; Ok(()) }),
    ("train.cql_entropy_weight", |c| c.train.cql_entropy_weight.to_string(), |c, v| { c.train.cql_entropy_weight = pf64(v)?; Ok(()) }),
    ("train.iql_tau", |c| c.train.iql_tau.to_string(), |c, v| { c.train.iql_tau = pf64(v)?; Ok(()) }),
    ("train.iql_beta", |c| c.train.iql_beta.to_string(), |c, v| { c.train.iql_beta = pf64(v)?; Ok(()) }),
    ("train.td3bc_alpha", |c| c.train.td3bc_alpha.to_string(), |c, v| { c.train.td3bc_alpha = pf64(v)?; Ok(()) }),
    ("train.policy_noise", |c| c.train.policy_noise.to_string(), |c, v| { c.train.policy_noise = pf64(v)?; Ok(()) }),
    ("train.noise_clip", |c| c.train.noise_clip.to_string(), |c, v| { c.train.noise_clip = pf64(v)?; Ok(()) }),
    ("train.policy_delay", |c| c.train.policy_delay.to_string(), |c, v| { c.train.policy_delay = pusize(v)?; Ok(()) }),
    ("train.smooth_weight", |c| c.train.smooth_weight.to_string(), |c, v| { c.train.smooth_weight = pf64(v)?; Ok(()) }),
    ("train.smooth_sigma", |c| c.train.smooth_sigma.to_string(), |c, v| { c.train.smooth_sigma = pf64(v)?; Ok(()) }),
    ("train.init_log_std", |c| c.train.init_log_std.to_string(), |c, v| { c.train.init_log_std = pf64(v)?; Ok(()) }),
    ("train.log_interval", |c| c.train.log_interval.to_string(), |c, v| { c.train.log_interval = pusize(v)?; Ok(()) }),
    ("filter.init_frac", |c| c.filter.init_frac.to_string(), |c, v| { c.filter.init_frac = pf64(v)?; Ok(()) }),
    ("filter.stop_eps", |c| c.filter.stop_eps.to_string(), |c, v| { c.filter.stop_eps = pusize(v)?; Ok(()) }),
    ("filter.max_iters", |c| c.filter.max_iters.to_string(), |c, v| { c.filter.max_iters = pusize(v)?; Ok(()) }),
    ("filter.threshold", |c| c.filter.threshold.to_string(), |c, v| { c.filter.threshold = pf64(v)?; Ok(()) }),
    ("filter.hidden", |c| hidden_str(&c.filter.hidden), |c, v| { c.filter.hidden = phidden(v)?; Ok(()) }),
    ("filter.train_steps", |c| c.filter.train_steps.to_string(), |c, v| { c.filter.train_steps = pusize(v)?; Ok(()) }),
    ("filter.lr", |c| c.filter.lr.to_string(), |c, v| { c.filter.lr = pf64(v)?; Ok(()) }),
    ("pose_filter.alpha", |c| c.pose_filter.alpha.to_string(), |c, v| { c.pose_filter.alpha = pf64(v)?; Ok(()) }),
    ("pose_filter.confidence_threshold", |c| c.pose_filter.confidence_threshold.to_string(), |c, v| { c.pose_filter.confidence_threshold = pf64(v)?; Ok(()) }),
    ("pose_filter.delay_threshold", |c| c.pose_filter.delay_threshold.to_string(), |c, v| { c.pose_filter.delay_threshold = pu32(v)?; Ok(()) }),
    ("eval.robots", |c| c.eval.n_robots.to_string(), |c, v| { c.eval.n_robots = pusize(v)?; Ok(()) }),
    ("eval.goals", |c| c.eval.goals_per_robot.map_or(String::from("auto"), |g| g.to_string()), |c, v| {
        c.eval.goals_per_robot = if v == "auto" { None } else { Some(pusize(v)?) };
        Ok(())
    }),
    ("eval.workers", |c| c.eval.workers.to_string(), |c, v| { c.eval.workers = pusize(v)?; Ok(()) }),
];

impl RunConfig {
    /// Parses a flat key=value file. Blank lines and '#' comments are
    /// allowed; unknown keys are errors.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidInput(format!("config line {}: expected key=value", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        self.validate()
    }

    pub fn load(path: &std::path::Path) -> Result<RunConfig> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.arena.validate()?;
        self.obs_model.validate()?;
        KernelParams::new(self.kernel_a, self.kernel_b)?;
        SuccessThresholds::new(self.thresholds.pos_tol, self.thresholds.ori_tol_deg)?;
        self.train.validate()?;
        self.pose_filter.validate()?;
        self.eval.validate()?;
        Ok(())
    }

    /// The resolved configuration as a key=value echo, one key per line in
    /// schema order. Parsing the echo reproduces this configuration.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        for key in KEYS {
            s.push_str(key);
            s.push('=');
            s.push_str(&self.get(key).unwrap());
            s.push('\n');
        }
        s
    }

    pub fn kernel(&self) -> KernelParams {
        KernelParams::new(self.kernel_a, self.kernel_b).expect("validated")
    }

    /// Environment bundle handed to dataset generation and evaluation.
    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            arena: self.arena.clone(),
            kernel: self.kernel(),
            thresholds: self.thresholds,
            obs_model: self.obs_model.clone(),
            weak: self.weak,
        }
    }
}
