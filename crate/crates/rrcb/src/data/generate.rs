//! Dataset generation with the scripted behavior policies.

use super::{BehaviorTag, Dataset, EpisodeMeta, Quality};
use crate::env::{
    expert_policy, sample_goal_lift, sample_goal_push, weak_policy, ArenaSpec, Env, Goal,
    ObservationModel, WeakPolicyConfig, ACT_DIM,
};
use crate::error::{Error, Result};
use crate::geom::{KernelParams, SuccessThresholds, Task};
use crate::rng::{derive_seed, rng_from_seed};
use rand::Rng;

/// Everything needed to instantiate environments outside the eval module.
#[derive(Debug, Clone, Default)]
pub struct EnvConfig {
    pub arena: ArenaSpec,
    pub kernel: KernelParams,
    pub thresholds: SuccessThresholds,
    pub obs_model: ObservationModel,
    pub weak: WeakPolicyConfig,
}

impl EnvConfig {
    pub fn make_env(&self, task: Task, goal_seed: u64, env_seed: u64) -> Result<Env> {
        let mut goal_rng = rng_from_seed(goal_seed);
        let goal = self.sample_goal(task, &mut goal_rng);
        Env::new(
            self.arena.clone(),
            self.kernel,
            self.thresholds,
            self.obs_model.clone(),
            goal,
            rng_from_seed(env_seed),
        )
    }

    pub fn sample_goal(&self, task: Task, rng: &mut rand_chacha::ChaCha8Rng) -> Goal {
        match task {
            Task::Push => sample_goal_push(rng, &self.arena),
            Task::Lift => sample_goal_lift(rng, &self.arena),
        }
    }
}

/// Behavior summary printed after generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenStats {
    pub mean_return: f64,
    pub success_rate: f64,
}

/// Generates a dataset of `n_episodes` rollouts. Expert quality uses the
/// expert policy throughout; mixed quality uses exactly half weak and half
/// expert episodes with the order shuffled by the seed.
pub fn generate_dataset(
    task: Task,
    quality: Quality,
    n_episodes: usize,
    seed: u64,
    cfg: &EnvConfig,
) -> Result<(Dataset, GenStats)> {
    if n_episodes == 0 {
        return Err(Error::InvalidInput("need at least one episode".into()));
    }
    let tags: Vec<BehaviorTag> = match quality {
        Quality::Expert => vec![BehaviorTag::Expert; n_episodes],
        Quality::Mixed => {
            if n_episodes % 2 != 0 {
                return Err(Error::InvalidInput(
                    "mixed datasets need an even episode count".into(),
                ));
            }
            let mut tags = vec![BehaviorTag::Weak; n_episodes / 2];
            tags.extend(vec![BehaviorTag::Expert; n_episodes / 2]);
            // Fisher-Yates keyed on the dataset seed.
            let mut rng = rng_from_seed(derive_seed(seed, &[0x51]));
            for i in (1..tags.len()).rev() {
                let j = rng.gen_range(0..=i);
                tags.swap(i, j);
            }
            tags
        }
        other => {
            return Err(Error::InvalidInput(format!(
                "cannot generate '{}' quality directly",
                other.name()
            )))
        }
    };

    let steps = task.steps_per_episode();
    let obs_dim = crate::env::obs_dim(task);
    let mut ds = Dataset {
        task,
        quality,
        steps_per_episode: steps,
        obs_dim,
        act_dim: ACT_DIM,
        episodes: Vec::with_capacity(n_episodes),
        observations: Vec::with_capacity(n_episodes * steps * obs_dim),
        actions: Vec::with_capacity(n_episodes * steps * ACT_DIM),
        rewards: Vec::with_capacity(n_episodes * steps),
    };
    let mut successes = 0usize;
    let mut return_sum = 0.0;

    for (i, tag) in tags.iter().enumerate() {
        let goal_seed = derive_seed(seed, &[1, i as u64]);
        let env_seed = derive_seed(seed, &[2, i as u64]);
        let mut env = cfg.make_env(task, goal_seed, env_seed)?;
        let mut policy_rng = rng_from_seed(derive_seed(seed, &[3, i as u64]));

        let mut obs = env.reset();
        let mut ep_return = 0.0;
        for _ in 0..steps {
            let action = match tag {
                BehaviorTag::Expert => expert_policy(&obs, task),
                BehaviorTag::Weak => weak_policy(&obs, task, &mut policy_rng, &cfg.weak),
            };
            let ov = obs.to_vec();
            for v in ov {
                ds.observations.push(v as f32);
            }
            for v in action.0 {
                ds.actions.push(v as f32);
            }
            let (next_obs, reward) = env.step(&action)?;
            ds.rewards.push(reward as f32);
            ep_return += reward;
            obs = next_obs;
        }
        ds.episodes.push(EpisodeMeta { tag: *tag, goal: goal7(&env.goal) });
        return_sum += ep_return;
        successes += env.success() as usize;
    }

    let stats = GenStats {
        mean_return: return_sum / n_episodes as f64,
        success_rate: successes as f64 / n_episodes as f64,
    };
    ds.validate()?;
    Ok((ds, stats))
}

/// Goal encoding used in episode metadata: position plus wxyz orientation,
/// identity orientation for Push goals.
pub(crate) fn goal7(goal: &Goal) -> [f64; 7] {
    let pose = goal.pose();
    [
        pose.position.x,
        pose.position.y,
        pose.position.z,
        pose.orientation.w,
        pose.orientation.x,
        pose.orientation.y,
        pose.orientation.z,
    ]
}
