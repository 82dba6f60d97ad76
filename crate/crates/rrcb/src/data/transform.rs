//! Dataset transforms: rotational augmentation around the arena symmetry,
//! observation normalization and history stacking.

use super::{Dataset, Quality};
use crate::env::{obs_dim, symmetry, ACT_DIM};
use crate::error::{Error, Result};
use crate::geom::{Task, Vec3};

/// Rotates quaternion components by the arena symmetry with a raw Hamilton
/// product, canonicalizing only the sign. Avoiding renormalization keeps
/// the map exactly linear, and the w >= 0 convention is what makes three
/// 120-degree applications the componentwise identity (the raw triple
/// product is the negated quaternion).
fn rotate_quat_components(q: [f64; 4], k: usize) -> [f64; 4] {
    let half = 0.5 * symmetry::rot_angle(k);
    let (rw, rz) = (half.cos(), half.sin());
    let (bw, bx, by, bz) = (q[0], q[1], q[2], q[3]);
    let out = [
        rw * bw - rz * bz,
        rw * bx - rz * by,
        rw * by + rz * bx,
        rw * bz + rz * bw,
    ];
    if out[0] < 0.0 {
        [-out[0], -out[1], -out[2], -out[3]]
    } else {
        out
    }
}

/// Rotates a standard-layout observation vector by `k * 120` degrees about
/// the arena axis, cyclically permuting the fingertip blocks to match.
/// Works in f64; confidence and delay are untouched. `k % 3 == 0` is an
/// exact copy.
pub fn rotate_obs_vec(task: Task, obs: &[f64], k: usize) -> Result<Vec<f64>> {
    let expected = obs_dim(task);
    if obs.len() != expected {
        return Err(Error::Format(format!(
            "observation layout mismatch: expected {expected} values for {}, got {}",
            task.name(),
            obs.len()
        )));
    }
    if k % 3 == 0 {
        return Ok(obs.to_vec());
    }
    let mut out = vec![0.0; obs.len()];
    // Fingertip blocks rotate and permute: finger i plays role i+k.
    for i in 0..3 {
        let v = symmetry::rotate_vec(Vec3::new(obs[3 * i], obs[3 * i + 1], obs[3 * i + 2]), k);
        let j = (i + k) % 3;
        out[3 * j] = v.x;
        out[3 * j + 1] = v.y;
        out[3 * j + 2] = v.z;
    }
    // Estimated cube pose.
    let p = symmetry::rotate_vec(Vec3::new(obs[9], obs[10], obs[11]), k);
    out[9] = p.x;
    out[10] = p.y;
    out[11] = p.z;
    let q = rotate_quat_components([obs[12], obs[13], obs[14], obs[15]], k);
    out[12..16].copy_from_slice(&q);
    // Goal encoding.
    let g = symmetry::rotate_vec(Vec3::new(obs[16], obs[17], obs[18]), k);
    out[16] = g.x;
    out[17] = g.y;
    out[18] = g.z;
    match task {
        Task::Push => {
            out[19] = obs[19];
            out[20] = obs[20];
        }
        Task::Lift => {
            let gq = rotate_quat_components([obs[19], obs[20], obs[21], obs[22]], k);
            out[19..23].copy_from_slice(&gq);
            out[23] = obs[23];
            out[24] = obs[24];
        }
    }
    Ok(out)
}

/// Rotates a 9-component action by the arena symmetry. Pure rotation plus
/// block permutation, no clipping, so three applications compose to the
/// identity exactly.
pub fn rotate_action_vec(act: &[f64], k: usize) -> Result<Vec<f64>> {
    if act.len() != ACT_DIM {
        return Err(Error::Format(format!("action layout mismatch: got {}", act.len())));
    }
    if k % 3 == 0 {
        return Ok(act.to_vec());
    }
    let mut out = vec![0.0; ACT_DIM];
    for i in 0..3 {
        let v = symmetry::rotate_vec(Vec3::new(act[3 * i], act[3 * i + 1], act[3 * i + 2]), k);
        let j = (i + k) % 3;
        out[3 * j] = v.x;
        out[3 * j + 1] = v.y;
        out[3 * j + 2] = v.z;
    }
    Ok(out)
}

/// Appends rotated copies of every episode for rotations j*120 degrees,
/// j = 1..k; the originals (j = 0) come first. `k = 1` is an identity
/// copy, `k = 3` exactly triples the dataset. Rewards are invariant under
/// the co-rotation of state and goal and are copied unchanged.
pub fn rotational_augment(ds: &Dataset, k: usize) -> Result<Dataset> {
    if !(1..=3).contains(&k) {
        return Err(Error::InvalidInput(format!("rotation count k must be in 1..=3, got {k}")));
    }
    if ds.obs_dim != obs_dim(ds.task) || ds.act_dim != ACT_DIM {
        return Err(Error::Format(
            "dataset does not use the standard observation/action layout".into(),
        ));
    }
    let mut out = Dataset {
        task: ds.task,
        quality: Quality::Augmented,
        steps_per_episode: ds.steps_per_episode,
        obs_dim: ds.obs_dim,
        act_dim: ds.act_dim,
        episodes: Vec::with_capacity(k * ds.n_episodes()),
        observations: Vec::with_capacity(k * ds.observations.len()),
        actions: Vec::with_capacity(k * ds.actions.len()),
        rewards: Vec::with_capacity(k * ds.rewards.len()),
    };
    for j in 0..k {
        if j == 0 {
            // Originals, copied exactly.
            out.episodes.extend_from_slice(&ds.episodes);
            out.observations.extend_from_slice(&ds.observations);
            out.actions.extend_from_slice(&ds.actions);
            out.rewards.extend_from_slice(&ds.rewards);
            continue;
        }
        for e in 0..ds.n_episodes() {
            let ep = ds.episode(e);
            let mut meta = *ep.meta;
            let gp = symmetry::rotate_vec(Vec3::new(meta.goal[0], meta.goal[1], meta.goal[2]), j);
            let gq =
                rotate_quat_components([meta.goal[3], meta.goal[4], meta.goal[5], meta.goal[6]], j);
            meta.goal = [gp.x, gp.y, gp.z, gq[0], gq[1], gq[2], gq[3]];
            out.episodes.push(meta);
            for t in 0..ep.len() {
                let obs: Vec<f64> = ep.observation(t).iter().map(|&v| v as f64).collect();
                let act: Vec<f64> = ep.action(t).iter().map(|&v| v as f64).collect();
                for v in rotate_obs_vec(ds.task, &obs, j)? {
                    out.observations.push(v as f32);
                }
                for v in rotate_action_vec(&act, j)? {
                    out.actions.push(v as f32);
                }
                out.rewards.push(ep.rewards[t]);
            }
        }
    }
    Ok(out)
}

/// Per-dimension observation statistics with the deviation floored at
/// 1e-6; actions are already bounded to [-1, 1] and pass through.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub const STD_FLOOR: f64 = 1e-6;

impl NormStats {
    pub fn normalize_into(&self, raw: &[f64], out: &mut [f64]) {
        for i in 0..raw.len() {
            out[i] = (raw[i] - self.mean[i]) / self.std[i];
        }
    }

    pub fn normalize(&self, raw: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; raw.len()];
        self.normalize_into(raw, &mut out);
        out
    }

    pub fn denormalize(&self, normed: &[f64]) -> Vec<f64> {
        normed
            .iter()
            .enumerate()
            .map(|(i, &v)| v * self.std[i] + self.mean[i])
            .collect()
    }
}

/// Mean and deviation of every observation dimension over all transitions.
pub fn compute_norm_stats(ds: &Dataset) -> Result<NormStats> {
    let n = ds.n_transitions();
    if n == 0 {
        return Err(Error::InvalidInput("cannot normalize an empty dataset".into()));
    }
    let d = ds.obs_dim;
    let mut mean = vec![0.0f64; d];
    for row in ds.observations.chunks_exact(d) {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v as f64;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut var = vec![0.0f64; d];
    for row in ds.observations.chunks_exact(d) {
        for ((s, &v), m) in var.iter_mut().zip(row).zip(&mean) {
            let dvi = v as f64 - m;
            *s += dvi * dvi;
        }
    }
    let std = var.iter().map(|&s| (s / n as f64).sqrt().max(STD_FLOOR)).collect();
    Ok(NormStats { mean, std })
}

/// Replaces every observation with the concatenation of the last `h`
/// observations and the last `h - 1` actions, most recent first and
/// zero-padded at episode starts. `h = 1` is the identity transform.
pub fn history_stack(ds: &Dataset, h: usize) -> Result<Dataset> {
    if h == 0 {
        return Err(Error::InvalidInput("history length must be at least 1".into()));
    }
    if h == 1 {
        return Ok(ds.clone());
    }
    let d = ds.obs_dim;
    let a = ds.act_dim;
    let new_dim = h * d + (h - 1) * a;
    let t_steps = ds.steps_per_episode;
    let mut observations = Vec::with_capacity(ds.n_transitions() * new_dim);
    for e in 0..ds.n_episodes() {
        let ep = ds.episode(e);
        for t in 0..t_steps {
            // Observations o_t, o_{t-1}, ..., o_{t-h+1}.
            for back in 0..h {
                if t >= back {
                    observations.extend_from_slice(ep.observation(t - back));
                } else {
                    observations.extend(std::iter::repeat(0.0f32).take(d));
                }
            }
            // Actions a_{t-1}, ..., a_{t-h+1}.
            for back in 1..h {
                if t >= back {
                    observations.extend_from_slice(ep.action(t - back));
                } else {
                    observations.extend(std::iter::repeat(0.0f32).take(a));
                }
            }
        }
    }
    Ok(Dataset {
        task: ds.task,
        quality: ds.quality,
        steps_per_episode: t_steps,
        obs_dim: new_dim,
        act_dim: a,
        episodes: ds.episodes.clone(),
        observations,
        actions: ds.actions.clone(),
        rewards: ds.rewards.clone(),
    })
}
