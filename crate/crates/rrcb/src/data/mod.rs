//! Episodic datasets: in-memory representation, binary serialization,
//! generation with the scripted behavior policies, rotational
//! augmentation, iterative expert filtering, pose-stream smoothing,
//! normalization and observation-history stacking.

mod filter;
mod format;
mod generate;
mod posefilter;
mod transform;

pub use filter::{filter_expert_iterative, FilterConfig, FilterLog};
pub use generate::{generate_dataset, EnvConfig, GenStats};
pub use posefilter::{smooth_pose_stream, PoseFilter, PoseFilterConfig};
pub use transform::{
    compute_norm_stats, history_stack, rotate_action_vec, rotate_obs_vec, rotational_augment,
    NormStats,
};

use crate::error::{Error, Result};
use crate::geom::Task;

/// Which policy produced an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BehaviorTag {
    Expert,
    Weak,
}

impl BehaviorTag {
    pub fn to_u8(self) -> u8 {
        match self {
            BehaviorTag::Expert => 0,
            BehaviorTag::Weak => 1,
        }
    }

    pub fn from_u8(v: u8) -> Result<BehaviorTag> {
        Ok(match v {
            0 => BehaviorTag::Expert,
            1 => BehaviorTag::Weak,
            other => return Err(Error::Format(format!("unknown behavior tag {other}"))),
        })
    }
}

/// Dataset composition tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quality {
    Expert,
    Mixed,
    Filtered,
    Augmented,
}

impl Quality {
    pub fn name(self) -> &'static str {
        match self {
            Quality::Expert => "expert",
            Quality::Mixed => "mixed",
            Quality::Filtered => "filtered",
            Quality::Augmented => "augmented",
        }
    }

    pub fn parse(s: &str) -> Result<Quality> {
        Ok(match s {
            "expert" => Quality::Expert,
            "mixed" => Quality::Mixed,
            "filtered" => Quality::Filtered,
            "augmented" => Quality::Augmented,
            other => return Err(Error::InvalidInput(format!("unknown quality '{other}'"))),
        })
    }

    pub fn to_u8(self) -> u8 {
        match self {
            Quality::Expert => 0,
            Quality::Mixed => 1,
            Quality::Filtered => 2,
            Quality::Augmented => 3,
        }
    }

    pub fn from_u8(v: u8) -> Result<Quality> {
        Ok(match v {
            0 => Quality::Expert,
            1 => Quality::Mixed,
            2 => Quality::Filtered,
            3 => Quality::Augmented,
            other => return Err(Error::Format(format!("unknown quality byte {other}"))),
        })
    }
}

/// Per-episode metadata: behavior tag and the goal encoded as 7 values
/// (position + wxyz orientation; Push goals use the identity orientation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeMeta {
    pub tag: BehaviorTag,
    pub goal: [f64; 7],
}

/// Borrowed view of one episode's contiguous transitions.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeView<'a> {
    pub meta: &'a EpisodeMeta,
    pub observations: &'a [f32],
    pub actions: &'a [f32],
    pub rewards: &'a [f32],
    pub obs_dim: usize,
    pub act_dim: usize,
}

impl EpisodeView<'_> {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Cumulative reward over all time steps.
    pub fn episode_return(&self) -> f64 {
        self.rewards.iter().map(|&r| r as f64).sum()
    }

    pub fn observation(&self, t: usize) -> &[f32] {
        &self.observations[t * self.obs_dim..(t + 1) * self.obs_dim]
    }

    pub fn action(&self, t: usize) -> &[f32] {
        &self.actions[t * self.act_dim..(t + 1) * self.act_dim]
    }
}

/// Flat episodic dataset: header metadata plus contiguous transition
/// arrays partitioned into fixed-length episodes. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub task: Task,
    pub quality: Quality,
    pub steps_per_episode: usize,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub episodes: Vec<EpisodeMeta>,
    /// Row-major [episodes * steps, obs_dim].
    pub observations: Vec<f32>,
    /// Row-major [episodes * steps, act_dim].
    pub actions: Vec<f32>,
    /// [episodes * steps].
    pub rewards: Vec<f32>,
}

impl Dataset {
    pub fn n_episodes(&self) -> usize {
        self.episodes.len()
    }

    pub fn n_transitions(&self) -> usize {
        self.rewards.len()
    }

    pub fn episode(&self, i: usize) -> EpisodeView<'_> {
        let t = self.steps_per_episode;
        EpisodeView {
            meta: &self.episodes[i],
            observations: &self.observations[i * t * self.obs_dim..(i + 1) * t * self.obs_dim],
            actions: &self.actions[i * t * self.act_dim..(i + 1) * t * self.act_dim],
            rewards: &self.rewards[i * t..(i + 1) * t],
            obs_dim: self.obs_dim,
            act_dim: self.act_dim,
        }
    }

    /// Cumulative reward of episode `i`.
    pub fn episode_return(&self, i: usize) -> f64 {
        self.episode(i).episode_return()
    }

    pub fn mean_return(&self) -> f64 {
        if self.n_episodes() == 0 {
            return 0.0;
        }
        (0..self.n_episodes()).map(|i| self.episode_return(i)).sum::<f64>()
            / self.n_episodes() as f64
    }

    pub fn observation(&self, idx: usize) -> &[f32] {
        &self.observations[idx * self.obs_dim..(idx + 1) * self.obs_dim]
    }

    pub fn action(&self, idx: usize) -> &[f32] {
        &self.actions[idx * self.act_dim..(idx + 1) * self.act_dim]
    }

    /// Index of the transition whose observation is the successor state of
    /// transition `idx`. Episode boundaries are treated as non-terminal
    /// time-outs: the last transition of an episode points at itself.
    pub fn next_index(&self, idx: usize) -> usize {
        if (idx + 1) % self.steps_per_episode == 0 {
            idx
        } else {
            idx + 1
        }
    }

    pub fn weak_episode_count(&self) -> usize {
        self.episodes.iter().filter(|e| e.tag == BehaviorTag::Weak).count()
    }

    /// Structural consistency: array lengths against the header, episode
    /// length at least 1, and the mixed half-weak composition.
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_episode == 0 {
            return Err(Error::Format("steps per episode must be at least 1".into()));
        }
        if self.obs_dim == 0 || self.act_dim == 0 {
            return Err(Error::Format("observation and action dims must be positive".into()));
        }
        let n = self.n_episodes() * self.steps_per_episode;
        if self.observations.len() != n * self.obs_dim
            || self.actions.len() != n * self.act_dim
            || self.rewards.len() != n
        {
            return Err(Error::Format(
                "transition arrays inconsistent with episode count and dims".into(),
            ));
        }
        if self.quality == Quality::Mixed && 2 * self.weak_episode_count() != self.n_episodes() {
            return Err(Error::Format(
                "mixed dataset must contain exactly half weak episodes".into(),
            ));
        }
        Ok(())
    }

    /// New dataset containing the given episodes (in the given order).
    pub fn subset(&self, indices: &[usize], quality: Quality) -> Dataset {
        let t = self.steps_per_episode;
        let mut out = Dataset {
            task: self.task,
            quality,
            steps_per_episode: t,
            obs_dim: self.obs_dim,
            act_dim: self.act_dim,
            episodes: Vec::with_capacity(indices.len()),
            observations: Vec::with_capacity(indices.len() * t * self.obs_dim),
            actions: Vec::with_capacity(indices.len() * t * self.act_dim),
            rewards: Vec::with_capacity(indices.len() * t),
        };
        for &i in indices {
            out.episodes.push(self.episodes[i]);
            out.observations
                .extend_from_slice(&self.observations[i * t * self.obs_dim..(i + 1) * t * self.obs_dim]);
            out.actions
                .extend_from_slice(&self.actions[i * t * self.act_dim..(i + 1) * t * self.act_dim]);
            out.rewards.extend_from_slice(&self.rewards[i * t..(i + 1) * t]);
        }
        out
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn episode_return_sums_rewards() {
        let mut ds = testutil::synthetic(Task::Push, 3, 5, 4, 2, 1);
        for r in &mut ds.rewards[0..5] {
            *r = 1.0;
        }
        assert_eq!(ds.episode_return(0), 5.0);
        let recomputed: f64 = ds.episode(1).rewards.iter().map(|&r| r as f64).sum();
        assert!((ds.episode_return(1) - recomputed).abs() < 1e-12);
    }

    #[test]
    fn validate_rejects_inconsistent_arrays() {
        let mut ds = testutil::synthetic(Task::Push, 2, 4, 3, 2, 2);
        assert!(ds.validate().is_ok());
        ds.rewards.pop();
        assert!(matches!(ds.validate(), Err(Error::Format(_))));
    }

    #[test]
    fn validate_enforces_minimum_episode_length() {
        let mut ds = testutil::synthetic(Task::Push, 2, 1, 3, 2, 2);
        assert!(ds.validate().is_ok());
        ds.steps_per_episode = 0;
        ds.observations.clear();
        ds.actions.clear();
        ds.rewards.clear();
        assert!(matches!(ds.validate(), Err(Error::Format(_))));
    }

    #[test]
    fn validate_rejects_unbalanced_mixed() {
        let mut ds = testutil::synthetic(Task::Push, 4, 2, 3, 2, 3);
        ds.quality = Quality::Mixed;
        assert!(ds.validate().is_err());
        ds.episodes[0].tag = BehaviorTag::Weak;
        ds.episodes[1].tag = BehaviorTag::Weak;
        assert!(ds.validate().is_ok());
    }

    #[test]
    fn next_index_respects_episode_boundaries() {
        let ds = testutil::synthetic(Task::Push, 2, 3, 3, 2, 4);
        assert_eq!(ds.next_index(0), 1);
        assert_eq!(ds.next_index(1), 2);
        assert_eq!(ds.next_index(2), 2); // last of episode 0
        assert_eq!(ds.next_index(3), 4);
        assert_eq!(ds.next_index(5), 5); // last of episode 1
    }

    #[test]
    fn subset_preserves_episode_contents() {
        let ds = testutil::synthetic(Task::Lift, 5, 4, 3, 2, 5);
        let sub = ds.subset(&[1, 3], Quality::Filtered);
        assert_eq!(sub.n_episodes(), 2);
        assert_eq!(sub.quality, Quality::Filtered);
        assert_eq!(sub.episode(0).observations, ds.episode(1).observations);
        assert_eq!(sub.episode(1).rewards, ds.episode(3).rewards);
    }
}
