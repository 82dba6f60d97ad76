//! Scripted behavior policies: a deterministic phase-machine expert for
//! each task, and the weak variant (half gains plus action noise) used for
//! the mixed datasets.

use super::{Action, ArenaSpec, Goal, Observation};
use crate::geom::{Task, Vec3};
use crate::rng::next_gaussian;
use rand_chacha::ChaCha8Rng;

/// Weak-policy shaping: `expert_policy` with gains scaled by `gain_scale`,
/// per-component Gaussian action noise, and a fixed per-episode aim bias.
///
/// Pure zero-mean action noise is filtered almost perfectly by the
/// proportional controllers on these quasi-static dynamics, so an
/// early-checkpoint-like systematic mis-aim carries the quality gap
/// between the behavior policies. The bias direction is a deterministic
/// function of the episode goal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakPolicyConfig {
    pub noise_sigma: f64,
    pub gain_scale: f64,
    /// Magnitude (m) of the goal-targeting error.
    pub aim_bias: f64,
}

impl Default for WeakPolicyConfig {
    fn default() -> WeakPolicyConfig {
        WeakPolicyConfig { noise_sigma: 0.4, gain_scale: 0.5, aim_bias: 0.05 }
    }
}

/// Deterministic unit direction keyed on the goal coordinates.
fn bias_direction(goal: &Goal) -> Vec3 {
    let enc = goal.encode();
    let mut h: u64 = 0x9e37_79b9_7f4a_7c15;
    for v in enc {
        h ^= v.to_bits();
        h = h.rotate_left(23).wrapping_mul(0x2545_f491_4f6c_dd1d);
    }
    let angle = (h >> 11) as f64 / (1u64 << 53) as f64 * std::f64::consts::TAU;
    let vertical = ((h & 0x3ff) as f64 / 1024.0 - 0.5) * 0.6;
    Vec3::new(angle.cos(), angle.sin(), vertical)
        .normalized(1e-9)
        .unwrap_or(Vec3::new(1.0, 0.0, 0.0))
}

/// Goal displaced by the weak policy's aim bias, kept inside the arena.
fn biased_goal(goal: &Goal, bias: f64) -> Goal {
    if bias == 0.0 {
        return *goal;
    }
    let dir = bias_direction(goal);
    match goal {
        Goal::Push(p) => {
            let mut q = Vec3::new(p.x + bias * dir.x, p.y + bias * dir.y, p.z);
            let limit = ArenaSpec::default().cube_xy_limit();
            let r = q.norm_xy();
            if r > limit {
                q.x *= limit / r;
                q.y *= limit / r;
            }
            Goal::Push(q)
        }
        Goal::Lift(pose) => {
            let mut p = pose.position + dir.scale(bias);
            if p.z < 0.04 {
                p.z = 0.04;
            }
            Goal::Lift(crate::geom::CubePose::new(p, pose.orientation))
        }
    }
}

/// Deterministic expert controller. Stateless: every step the phase is
/// re-derived from the observation geometry.
pub fn expert_policy(obs: &Observation, task: Task) -> Action {
    expert_policy_scaled(obs, task, 1.0)
}

/// Expert with all proportional gains scaled by `gain_scale`.
pub fn expert_policy_scaled(obs: &Observation, task: Task, gain_scale: f64) -> Action {
    let arena = ArenaSpec::default();
    match task {
        Task::Push => push_expert(obs, &arena, gain_scale),
        Task::Lift => lift_expert(obs, &arena, gain_scale),
    }
}

/// Weak behavior: the scaled-gain expert steering toward the biased goal,
/// plus clipped Gaussian action noise.
pub fn weak_policy(
    obs: &Observation,
    task: Task,
    rng: &mut ChaCha8Rng,
    cfg: &WeakPolicyConfig,
) -> Action {
    let mut shifted = obs.clone();
    shifted.goal = biased_goal(&obs.goal, cfg.aim_bias);
    let mut a = expert_policy_scaled(&shifted, task, cfg.gain_scale);
    for v in &mut a.0 {
        *v += cfg.noise_sigma * next_gaussian(rng);
    }
    a.clipped()
}

/// Proportional move of `tip` toward `target`, expressed in action units.
fn servo(tip: Vec3, target: Vec3, gain: f64, max_disp: f64) -> Vec3 {
    (target - tip).scale(gain / max_disp)
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % std::f64::consts::TAU;
    if a > std::f64::consts::PI {
        a -= std::f64::consts::TAU;
    } else if a < -std::f64::consts::PI {
        a += std::f64::consts::TAU;
    }
    a
}

/// Smooth sigmoid gate; ~0 below the threshold region, ~1 above it.
fn gate(x: f64, center: f64, width: f64) -> f64 {
    1.0 / (1.0 + (-(x - center) / width).exp())
}

/// Push: all three fingertips herd the cube. Each finger tracks a target
/// on a ring around the estimated cube whose radius dips inside the
/// contact sphere in proportion to how well the finger's natural bearing
/// (its home direction as seen from the cube) aligns with the required
/// pushing direction; fingers may bend a bounded amount toward that
/// direction. Every quantity is a smooth function of the observation, so
/// the mapping stays learnable by regression.
fn push_expert(obs: &Observation, arena: &ArenaSpec, gain_scale: f64) -> Action {
    let Goal::Push(goal) = obs.goal else {
        return Action::ZERO;
    };
    let cube = obs.cube_estimate.position;
    let gain = 1.0 * gain_scale;
    let max_disp = arena.max_step_disp;
    // The resting ring leaves enough clearance that estimator glitches
    // rarely walk a fingertip into the true contact sphere.
    let safe_r = arena.contact_radius + 0.030;
    // Ring dip just inside the contact sphere: the standing penetration of
    // a tracking fingertip sets the cube speed, so it is capped at about
    // one fingertip step per control step.
    let push_depth = arena.contact_radius - 0.9 * max_disp;

    let err = Vec3::new(goal.x - cube.x, goal.y - cube.y, 0.0);
    let dist = err.norm_xy();
    let push_dir = err.normalized(1e-9).unwrap_or(Vec3::new(1.0, 0.0, 0.0));
    let behind_bear = (-push_dir.y).atan2(-push_dir.x);
    // Push engagement fades out as the cube converges on the goal.
    let engaged = gate(dist, 0.014, 0.004);

    let mut blocks = [Vec3::ZERO; 3];
    for i in 0..3 {
        let tip = obs.fingertips[i];
        let home = arena.home(i);
        let natural = Vec3::new(home.x - cube.x, home.y - cube.y, 0.0);
        let natural_bear = natural.y.atan2(natural.x);
        // Bend up to ~0.8 rad toward the pushing bearing, smoothly.
        let bend = wrap_angle(behind_bear - natural_bear);
        let bear = natural_bear + 0.8 * (bend / 0.8).tanh();
        // Alignment of this finger with the pushing bearing decides how
        // deep its ring target dips into the contact sphere.
        let align = (wrap_angle(behind_bear - bear).cos()).max(0.0).powi(3);
        let radius = safe_r + (push_depth - safe_r) * align * engaged;
        let target = Vec3::new(
            cube.x + radius * bear.cos(),
            cube.y + radius * bear.sin(),
            arena.cube_half_extent,
        );
        // Taper to quiet once the target is reached and the cube settled.
        let speed = (engaged + 0.3 * (1.0 - engaged))
            * gate((tip - target).norm(), 0.003, 0.0015);
        blocks[i] = servo(tip, target, gain, max_disp).scale(speed);
    }
    Action::from_blocks(blocks).clipped()
}

/// Lift: stage the three fingertips on a ring outside the grasp shell,
/// close simultaneously to form the grasp, then servo the grasped cube to
/// the goal pose with a common translation plus an in-hand rotation from
/// the axis-angle orientation error.
///
/// The grasp is recognized from the fingertip geometry alone (a tight
/// pairwise ring), which is noise-free; keying it on the estimated cube
/// pose makes the phase flicker under estimator glitches and every phase
/// flip drags the attached cube.
fn lift_expert(obs: &Observation, arena: &ArenaSpec, gain_scale: f64) -> Action {
    let Goal::Lift(goal) = obs.goal else {
        return Action::ZERO;
    };
    let cube = obs.cube_estimate.position;
    let gain = 1.0 * gain_scale;
    let max_disp = arena.max_step_disp;
    let close_ring = 0.0405;
    let stage_ring = 0.062;

    // Bearings of the three grasp points follow each finger's home bearing
    // so fingers never have to cross.
    let bearing = |i: usize| -> f64 {
        std::f64::consts::FRAC_PI_2 + i as f64 * std::f64::consts::TAU / 3.0
    };
    let ring_point = |center: Vec3, i: usize, radius: f64| -> Vec3 {
        Vec3::new(
            center.x + radius * bearing(i).cos(),
            center.y + radius * bearing(i).sin(),
            center.z,
        )
    };

    let tips = &obs.fingertips;
    let centroid = (tips[0] + tips[1] + tips[2]).scale(1.0 / 3.0);
    let pair = [
        (tips[0] - tips[1]).norm(),
        (tips[1] - tips[2]).norm(),
        (tips[2] - tips[0]).norm(),
    ];
    let mean_pairwise = (pair[0] + pair[1] + pair[2]) / 3.0;
    let min_pairwise = pair.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let max_to_est = tips.iter().map(|t| (*t - cube).norm()).fold(0.0, f64::max);

    // A held cube shows up as a proper fingertip ring (tight but not
    // collapsed) around the estimate. The ring sizes are noise-free, so
    // the phase cannot flicker with estimator glitches; the estimate
    // distance band is wide enough to survive them.
    let grasped = mean_pairwise < 0.098 && min_pairwise > 0.045 && max_to_est < 0.12;

    let mut blocks = [Vec3::ZERO; 3];
    if grasped {
        // Common translation toward the goal position...
        let pos_err = goal.position - cube;
        let move_cap = 0.55 * max_disp;
        let mut common = pos_err.scale(0.3 * gain);
        let n = common.norm();
        if n > move_cap {
            common = common.scale(move_cap / n);
        }
        // ...plus an in-hand rotation about the orientation-error axis.
        // Both pivot on the fingertip centroid so the commanded motion is
        // exactly rigid and the grasp cannot shear apart.
        let err_q = goal.orientation.mul(obs.cube_estimate.orientation.conjugate());
        let (axis, angle) = err_q.to_axis_angle();
        let delta = (0.3 * gain * angle).clamp(0.0, 0.06);
        let pos_settled = pos_err.norm() < 0.012;
        let ori_settled = angle.to_degrees() < 8.0;
        if !(pos_settled && ori_settled) {
            for i in 0..3 {
                let rel = tips[i] - centroid;
                let rotated = crate::geom::UnitQuat::from_axis_angle(axis, delta).rotate(rel);
                let target = centroid + common + rotated;
                blocks[i] = servo(tips[i], target, gain, max_disp);
            }
        }
        return Action::from_blocks(blocks).clipped();
    }

    // Not grasped: settle on the stage ring, then close together. The
    // close ring sits just outside the contact sphere so the grasp forms
    // before any pushing, with margin against estimator error.
    let stationed = (0..3).all(|i| {
        let p = ring_point(cube, i, stage_ring);
        (tips[i] - p).norm() < 0.022
    });
    let closing = stationed || mean_pairwise < 0.105;
    let radius = if closing { close_ring } else { stage_ring };
    for i in 0..3 {
        let target = ring_point(cube, i, radius);
        blocks[i] = servo(tips[i], target, gain, max_disp);
    }
    Action::from_blocks(blocks).clipped()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{
        sample_goal_lift, sample_goal_push, ArenaSpec, Env, ObservationModel,
    };
    use crate::geom::{KernelParams, SuccessThresholds};
    use crate::rng::rng_from_seed;

    pub(crate) fn make_env(task: Task, seed: u64, noise: bool) -> Env {
        let arena = ArenaSpec::default();
        let mut grng = rng_from_seed(crate::rng::derive_seed(seed, &[0x60a1]));
        let goal = match task {
            Task::Push => sample_goal_push(&mut grng, &arena),
            Task::Lift => sample_goal_lift(&mut grng, &arena),
        };
        let model = if noise { ObservationModel::default() } else { ObservationModel::noiseless() };
        Env::new(
            arena,
            KernelParams::default(),
            SuccessThresholds::default(),
            model,
            goal,
            rng_from_seed(seed),
        )
        .unwrap()
    }

    fn run_episode(env: &mut Env, policy: &mut dyn FnMut(&Observation) -> Action) -> (f64, bool) {
        let mut obs = env.reset();
        let steps = env.task().steps_per_episode();
        let mut ret = 0.0;
        for _ in 0..steps {
            let a = policy(&obs);
            let (o, r) = env.step(&a).unwrap();
            obs = o;
            ret += r;
        }
        (ret, env.success())
    }

    #[test]
    fn push_expert_is_quiet_at_goal() {
        // Proportional control at zero error: with the cube on the goal
        // and the fingertips settled, the commanded action is near zero.
        let mut env = make_env(Task::Push, 40, false);
        env.reset();
        let mut s = env.state().clone();
        s.cube.position = env.goal.pose().position;
        env.set_state(s);
        let mut obs = crate::env::Observation {
            fingertips: env.state().fingertips,
            cube_estimate: env.state().cube,
            goal: env.goal,
            confidence: 1.0,
            delay: 0,
        };
        for _ in 0..300 {
            let a = expert_policy(&obs, Task::Push);
            let (o, _) = env.step(&a).unwrap();
            obs = o;
        }
        let a = expert_policy(&obs, Task::Push);
        assert!(a.norm() < 0.1, "action norm {}", a.norm());
        // The settling must not have disturbed the cube off the goal.
        assert!(env.success());
    }

    #[test]
    fn push_expert_success_rate_floor() {
        let mut successes = 0;
        let n = 100;
        for seed in 0..n {
            let mut env = make_env(Task::Push, seed, true);
            let (_, ok) = run_episode(&mut env, &mut |o| expert_policy(o, Task::Push));
            successes += ok as usize;
        }
        assert!(successes >= 80, "push expert success {successes}/{n}");
    }

    #[test]
    fn lift_expert_success_rate_floor() {
        let mut successes = 0;
        let n = 100;
        for seed in 0..n {
            let mut env = make_env(Task::Lift, seed, true);
            let (_, ok) = run_episode(&mut env, &mut |o| expert_policy(o, Task::Lift));
            successes += ok as usize;
        }
        assert!(successes >= 50, "lift expert success {successes}/{n}");
    }

    #[test]
    fn weak_policy_defaults_degenerate_to_expert() {
        let mut env = make_env(Task::Push, 50, true);
        let obs = env.reset();
        let cfg = WeakPolicyConfig { noise_sigma: 0.0, gain_scale: 1.0, aim_bias: 0.0 };
        let mut rng = rng_from_seed(0);
        let a = weak_policy(&obs, Task::Push, &mut rng, &cfg);
        let b = expert_policy(&obs, Task::Push);
        assert_eq!(a, b);
    }

    #[test]
    fn weak_policy_outputs_stay_clipped() {
        let mut env = make_env(Task::Lift, 51, true);
        let mut obs = env.reset();
        let mut rng = rng_from_seed(9);
        let cfg = WeakPolicyConfig::default();
        for _ in 0..300 {
            let a = weak_policy(&obs, Task::Lift, &mut rng, &cfg);
            assert!(a.0.iter().all(|v| (-1.0..=1.0).contains(v)));
            let (o, _) = env.step(&a).unwrap();
            obs = o;
        }
    }

    #[test]
    fn weak_policy_returns_strictly_below_expert() {
        for task in [Task::Push, Task::Lift] {
            let n = 30;
            let mut expert_sum = 0.0;
            let mut weak_sum = 0.0;
            for seed in 0..n {
                let mut env = make_env(task, 7000 + seed, true);
                let (r, _) = run_episode(&mut env, &mut |o| expert_policy(o, task));
                expert_sum += r;
                let mut env = make_env(task, 7000 + seed, true);
                let mut rng = rng_from_seed(seed);
                let cfg = WeakPolicyConfig::default();
                let (r, _) =
                    run_episode(&mut env, &mut |o| weak_policy(o, task, &mut rng, &cfg));
                weak_sum += r;
            }
            assert!(
                weak_sum < expert_sum,
                "{task:?}: weak {weak_sum} not below expert {expert_sum}"
            );
        }
    }
}
