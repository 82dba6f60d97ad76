//! Iterative semi-supervised expert filtering: seed a positive set with
//! the highest-return episodes, train a small binary classifier against
//! the lowest-return episodes, absorb everything the classifier marks as
//! expert, and repeat until the set stops growing.

use super::{Dataset, Quality};
use crate::error::{Error, Result};
use crate::geom::KernelParams;
use crate::nn::{Mlp, OptimState};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    /// Fraction of episodes (by return) seeding the expert set.
    pub init_frac: f64,
    /// Stop when an iteration adds fewer than this many episodes.
    pub stop_eps: usize,
    pub max_iters: usize,
    /// Expert probability above which an episode is absorbed.
    pub threshold: f64,
    /// Classifier hidden dims.
    pub hidden: Vec<usize>,
    /// Full-batch gradient steps per iteration.
    pub train_steps: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for FilterConfig {
    fn default() -> FilterConfig {
        FilterConfig {
            init_frac: 0.1,
            stop_eps: 1,
            max_iters: 20,
            threshold: 0.5,
            hidden: vec![16],
            train_steps: 400,
            lr: 1e-2,
            seed: 0,
        }
    }
}

/// Sizes of the expert set after seeding and after each iteration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FilterLog {
    pub sizes: Vec<usize>,
}

/// Per-episode summary features: return, mean absolute action, terminal
/// distance to goal (recovered by inverting the default reward kernel on
/// the final-step reward) and action variance.
fn episode_features(ds: &Dataset, i: usize) -> [f64; 4] {
    let ep = ds.episode(i);
    let t = ep.len() as f64;
    let ret = ep.episode_return() / t.max(1.0);
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let n_act = (ep.len() * ds.act_dim) as f64;
    for &a in ep.actions {
        abs_sum += (a as f64).abs();
        sq_sum += (a as f64) * (a as f64);
    }
    let mean_abs = abs_sum / n_act.max(1.0);
    let action_var = (sq_sum / n_act.max(1.0) - mean_abs * mean_abs).max(0.0);
    let final_reward = *ep.rewards.last().unwrap_or(&0.0) as f64;
    let terminal_dist = KernelParams::default().inverse(final_reward);
    [ret, mean_abs, terminal_dist, action_var]
}

/// Z-scores feature columns so the classifier sees comparable scales.
fn standardize(features: &mut [[f64; 4]]) {
    let n = features.len() as f64;
    for c in 0..4 {
        let mean = features.iter().map(|f| f[c]).sum::<f64>() / n;
        let var = features.iter().map(|f| (f[c] - mean) * (f[c] - mean)).sum::<f64>() / n;
        let std = var.sqrt().max(1e-9);
        for f in features.iter_mut() {
            f[c] = (f[c] - mean) / std;
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Trains a fresh classifier on (features, labels) and returns the
/// predicted expert probability for every episode.
fn classify(
    features: &[[f64; 4]],
    train_idx: &[usize],
    labels: &[f64],
    cfg: &FilterConfig,
    iter: usize,
) -> Vec<f64> {
    let mut dims = vec![4usize];
    dims.extend(&cfg.hidden);
    dims.push(1);
    let mut rng = rng_from_seed(derive_seed(cfg.seed, &[0xc1a5, iter as u64]));
    let mut net = Mlp::new(&dims, &mut rng);
    let mut opt = OptimState::new(net.params().len(), cfg.lr);

    let batch = train_idx.len();
    let mut xs = Vec::with_capacity(batch * 4);
    for &i in train_idx {
        xs.extend_from_slice(&features[i]);
    }
    for _ in 0..cfg.train_steps {
        let (cache, out) = net.forward_batch(&xs, batch).unwrap();
        // Binary cross-entropy through the sigmoid: dL/dz = p - y.
        let og: Vec<f64> = out
            .iter()
            .zip(labels)
            .map(|(&z, &y)| (sigmoid(z) - y) / batch as f64)
            .collect();
        let mut grads = vec![0.0; net.params().len()];
        net.backward_batch(&cache, &og, &mut grads).unwrap();
        let mut p = net.params().to_vec();
        opt.step(&mut p, &grads);
        net.params_mut().copy_from_slice(&p);
    }

    features
        .iter()
        .map(|f| sigmoid(net.forward(f).unwrap()[0]))
        .collect()
}

/// Returns the filtered dataset (episodes in their original order, tagged
/// `filtered`) together with the per-iteration set sizes.
pub fn filter_expert_iterative(ds: &Dataset, cfg: &FilterConfig) -> Result<(Dataset, FilterLog)> {
    if !(cfg.init_frac > 0.0 && cfg.init_frac <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "init_frac must be in (0, 1], got {}",
            cfg.init_frac
        )));
    }
    let n = ds.n_episodes();
    if n == 0 {
        return Err(Error::InvalidInput("cannot filter an empty dataset".into()));
    }

    let mut features: Vec<[f64; 4]> = (0..n).map(|i| episode_features(ds, i)).collect();
    standardize(&mut features);
    let returns: Vec<f64> = (0..n).map(|i| ds.episode_return(i)).collect();

    // Episodes ranked by return, ties broken by index for determinism.
    let mut by_return: Vec<usize> = (0..n).collect();
    by_return.sort_by(|&a, &b| returns[b].partial_cmp(&returns[a]).unwrap().then(a.cmp(&b)));

    let seed_count = ((cfg.init_frac * n as f64).ceil() as usize).clamp(1, n);
    let mut in_set = vec![false; n];
    for &i in by_return.iter().take(seed_count) {
        in_set[i] = true;
    }
    let mut log = FilterLog { sizes: vec![seed_count] };

    for iter in 0..cfg.max_iters {
        let size = in_set.iter().filter(|&&b| b).count();
        if size == n {
            break;
        }
        // Positives: the current set. Negatives: an equal-size sample of
        // the lowest-return episodes outside it.
        let positives: Vec<usize> = (0..n).filter(|&i| in_set[i]).collect();
        let mut negatives: Vec<usize> =
            by_return.iter().rev().filter(|&&i| !in_set[i]).copied().collect();
        negatives.truncate(positives.len());

        let mut train_idx = positives.clone();
        train_idx.extend(&negatives);
        let mut labels = vec![1.0; positives.len()];
        labels.extend(vec![0.0; negatives.len()]);

        let probs = classify(&features, &train_idx, &labels, cfg, iter);
        let mut grew = 0usize;
        for i in 0..n {
            if !in_set[i] && probs[i] > cfg.threshold {
                in_set[i] = true;
                grew += 1;
            }
        }
        log.sizes.push(size + grew);
        if grew < cfg.stop_eps.max(1) {
            break;
        }
    }

    let keep: Vec<usize> = (0..n).filter(|&i| in_set[i]).collect();
    Ok((ds.subset(&keep, Quality::Filtered), log))
}
