//! Deterministic simplified simulator for the Push and Lift tasks: three
//! kinematic fingertips and one cube in a circular arena, quasi-static
//! contact pushing, an attach-and-rigid-fit grasp model, goal sampling and
//! a noisy/delayed cube pose estimator.

mod scripted;

pub use scripted::{expert_policy, expert_policy_scaled, weak_policy, WeakPolicyConfig};

use crate::error::{Error, Result};
use crate::geom::{
    cube_corners, is_success, lift_reward, push_reward, rigid_fit,rigid_fit_apply, CubePose,
    KernelParams, SuccessThresholds, Task, UnitQuat, Vec3,
};
use crate::rng::next_gaussian;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Fixed geometry and timing of the simulated platform.
#[derive(Debug, Clone, PartialEq)]
pub struct ArenaSpec {
    /// Arena cylinder radius (m).
    pub radius: f64,
    /// Half edge length of the cube (m).
    pub cube_half_extent: f64,
    /// Control period (s); 0.02 gives the 50 Hz rate implied by the
    /// dataset sizes (750 steps per 15 s push episode).
    pub dt: f64,
    /// Gravitational acceleration (m/s^2).
    pub gravity: f64,
    /// Maximum fingertip displacement per control step (m).
    pub max_step_disp: f64,
    /// Effective contact sphere radius of the cube (m).
    pub contact_radius: f64,
    /// Fingertip distance to the cube center below which a grasp can form (m).
    pub grasp_radius: f64,
    /// Radius of each fingertip's reachable sphere around its home point (m).
    pub workspace_radius: f64,
    /// Radial distance of the fingertip home points from the arena center (m).
    pub home_radius: f64,
    /// Height of the fingertip home points (m).
    pub home_height: f64,
}

impl Default for ArenaSpec {
    fn default() -> ArenaSpec {
        ArenaSpec {
            radius: 0.19,
            cube_half_extent: 0.0325,
            dt: 0.02,
            gravity: 9.81,
            max_step_disp: 0.008,
            contact_radius: 0.04,
            grasp_radius: 0.05,
            workspace_radius: 0.30,
            home_radius: 0.10,
            home_height: 0.08,
        }
    }
}

impl ArenaSpec {
    /// Home position of fingertip `i`; the three homes are 120 degrees
    /// apart so the arena symmetry maps home i onto home i+1.
    pub fn home(&self, i: usize) -> Vec3 {
        let angle = std::f64::consts::FRAC_PI_2 + i as f64 * std::f64::consts::TAU / 3.0;
        Vec3::new(
            self.home_radius * angle.cos(),
            self.home_radius * angle.sin(),
            self.home_height,
        )
    }

    /// Largest cube-center radius that keeps the cube body inside the wall.
    pub fn cube_xy_limit(&self) -> f64 {
        self.radius - self.cube_half_extent
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.radius,
            self.cube_half_extent,
            self.dt,
            self.gravity,
            self.max_step_disp,
            self.contact_radius,
            self.grasp_radius,
            self.workspace_radius,
            self.home_radius,
            self.home_height,
        ];
        if fields.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidParameter("arena parameters must be positive".into()));
        }
        Ok(())
    }
}

/// Cube pose estimator noise: Gaussian position/orientation noise, stall
/// events that serve stale poses, and tracking glitches that combine a
/// stale, low-confidence estimate with inflated noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationModel {
    /// Position noise std (m).
    pub sigma_pos: f64,
    /// Orientation noise std (degrees).
    pub sigma_ori_deg: f64,
    /// Maximum estimator delay (steps).
    pub max_delay: u32,
    /// Per-step probability of a delay stall.
    pub delay_prob: f64,
    /// Per-step probability of a low-confidence tracking glitch.
    pub lowconf_prob: f64,
    /// Noise multiplier during a glitch.
    pub glitch_noise_scale: f64,
}

impl Default for ObservationModel {
    fn default() -> ObservationModel {
        ObservationModel {
            sigma_pos: 0.005,
            sigma_ori_deg: 3.0,
            max_delay: 5,
            delay_prob: 0.1,
            lowconf_prob: 0.05,
            glitch_noise_scale: 8.0,
        }
    }
}

impl ObservationModel {
    /// Noise-free estimator: exact pose, zero delay, full confidence.
    /// Consumes no generator draws.
    pub fn noiseless() -> ObservationModel {
        ObservationModel {
            sigma_pos: 0.0,
            sigma_ori_deg: 0.0,
            max_delay: 0,
            delay_prob: 0.0,
            lowconf_prob: 0.0,
            glitch_noise_scale: 1.0,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.sigma_pos == 0.0
            && self.sigma_ori_deg == 0.0
            && self.delay_prob == 0.0
            && self.lowconf_prob == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma_pos < 0.0
            || self.sigma_ori_deg < 0.0
            || !(0.0..=1.0).contains(&self.delay_prob)
            || !(0.0..=1.0).contains(&self.lowconf_prob)
            || self.glitch_noise_scale < 0.0
        {
            return Err(Error::InvalidParameter("observation model fields out of range".into()));
        }
        Ok(())
    }
}

/// Episode goal: a ground-plane target for Push, a full pose for Lift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Goal {
    Push(Vec3),
    Lift(CubePose),
}

impl Goal {
    pub fn task(&self) -> Task {
        match self {
            Goal::Push(_) => Task::Push,
            Goal::Lift(_) => Task::Lift,
        }
    }

    /// Goal as a full pose (identity orientation for Push).
    pub fn pose(&self) -> CubePose {
        match self {
            Goal::Push(p) => CubePose::new(*p, UnitQuat::IDENTITY),
            Goal::Lift(p) => *p,
        }
    }

    /// Flat encoding used in observations and dataset headers:
    /// 3 values for Push, 7 (position + wxyz quaternion) for Lift.
    pub fn encode(&self) -> Vec<f64> {
        match self {
            Goal::Push(p) => vec![p.x, p.y, p.z],
            Goal::Lift(p) => vec![
                p.position.x,
                p.position.y,
                p.position.z,
                p.orientation.w,
                p.orientation.x,
                p.orientation.y,
                p.orientation.z,
            ],
        }
    }
}

/// Full simulator state.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub cube: CubePose,
    pub fingertips: [Vec3; 3],
    pub attached: bool,
    pub step_index: u32,
}

/// Nine commanded fingertip displacement components in [-1, 1],
/// grouped as three (x, y, z) blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action(pub [f64; 9]);

impl Action {
    pub const ZERO: Action = Action([0.0; 9]);

    pub fn clipped(mut self) -> Action {
        for v in &mut self.0 {
            *v = v.clamp(-1.0, 1.0);
        }
        self
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn block(&self, i: usize) -> Vec3 {
        Vec3::new(self.0[3 * i], self.0[3 * i + 1], self.0[3 * i + 2])
    }

    pub fn from_blocks(b: [Vec3; 3]) -> Action {
        Action([b[0].x, b[0].y, b[0].z, b[1].x, b[1].y, b[1].z, b[2].x, b[2].y, b[2].z])
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// What a policy sees each step.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub fingertips: [Vec3; 3],
    /// Estimated cube pose (noisy, possibly stale).
    pub cube_estimate: CubePose,
    pub goal: Goal,
    /// Estimator confidence in [0, 1].
    pub confidence: f64,
    /// Estimator delay in steps.
    pub delay: u32,
}

impl Observation {
    /// Flat layout: tips (9) | est position (3) | est quaternion wxyz (4) |
    /// goal encoding (3 or 7) | confidence (1) | delay (1).
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(obs_dim(self.goal.task()));
        for tip in &self.fingertips {
            v.extend_from_slice(&[tip.x, tip.y, tip.z]);
        }
        let c = &self.cube_estimate;
        v.extend_from_slice(&[c.position.x, c.position.y, c.position.z]);
        v.extend_from_slice(&[c.orientation.w, c.orientation.x, c.orientation.y, c.orientation.z]);
        v.extend(self.goal.encode());
        v.push(self.confidence);
        v.push(self.delay as f64);
        v
    }
}

/// Observation vector length for a task (21 for Push, 25 for Lift).
pub fn obs_dim(task: Task) -> usize {
    9 + 7 + match task {
        Task::Push => 3,
        Task::Lift => 7,
    } + 2
}

pub const ACT_DIM: usize = 9;

/// Uniform Push goal on the ground disk reachable by the cube center.
pub fn sample_goal_push(rng: &mut ChaCha8Rng, arena: &ArenaSpec) -> Goal {
    let r_max = arena.cube_xy_limit();
    let u: f64 = rng.gen();
    let phi: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
    let r = r_max * u.sqrt();
    Goal::Push(Vec3::new(r * phi.cos(), r * phi.sin(), arena.cube_half_extent))
}

/// Uniform Lift goal: position over the arena disk up to 10 cm height,
/// orientation uniform on SO(3), resampled until no corner would be below
/// the ground.
pub fn sample_goal_lift(rng: &mut ChaCha8Rng, arena: &ArenaSpec) -> Goal {
    let r_max = arena.cube_xy_limit();
    loop {
        let u: f64 = rng.gen();
        let phi: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
        let r = r_max * u.sqrt();
        let z: f64 = rng.gen::<f64>() * 0.10;
        let q = random_rotation(rng);
        let pose = CubePose::new(Vec3::new(r * phi.cos(), r * phi.sin(), z), q);
        if min_corner_z(&pose, arena.cube_half_extent) >= 0.0 {
            return Goal::Lift(pose);
        }
    }
}

/// Uniform rotation via the subgroup-algorithm quaternion construction.
pub fn random_rotation(rng: &mut ChaCha8Rng) -> UnitQuat {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
    let u3: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
    let a = (1.0 - u1).sqrt();
    let b = u1.sqrt();
    UnitQuat::from_unnormalized(a * u2.sin(), a * u2.cos(), b * u3.sin(), b * u3.cos())
}

fn min_corner_z(pose: &CubePose, half_extent: f64) -> f64 {
    cube_corners(pose, half_extent)
        .iter()
        .map(|c| c.z)
        .fold(f64::INFINITY, f64::min)
}

/// A task instance: arena, goal, estimator model and mutable episode state.
/// One environment runs one episode at a time; instances are cheap and
/// independent instances can run concurrently.
#[derive(Debug, Clone)]
pub struct Env {
    pub arena: ArenaSpec,
    pub kernel: KernelParams,
    pub thresholds: SuccessThresholds,
    pub obs_model: ObservationModel,
    pub goal: Goal,
    state: EnvState,
    rng: ChaCha8Rng,
    /// Recent true poses, newest last; serves delayed estimates.
    pose_history: Vec<CubePose>,
    delay: u32,
}

impl Env {
    pub fn new(
        arena: ArenaSpec,
        kernel: KernelParams,
        thresholds: SuccessThresholds,
        obs_model: ObservationModel,
        goal: Goal,
        mut rng: ChaCha8Rng,
    ) -> Result<Env> {
        arena.validate()?;
        obs_model.validate()?;
        let state = reset_episode(&mut rng, &arena);
        let pose_history = vec![state.cube];
        Ok(Env { arena, kernel, thresholds, obs_model, goal, state, rng, pose_history, delay: 0 })
    }

    pub fn task(&self) -> Task {
        self.goal.task()
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    /// Replaces the state (used by tests and the equivariance suite).
    pub fn set_state(&mut self, state: EnvState) {
        self.pose_history.clear();
        self.pose_history.push(state.cube);
        self.delay = 0;
        self.state = state;
    }

    /// Starts a fresh episode: cube re-centered, fingertips home.
    pub fn reset(&mut self) -> Observation {
        self.state = reset_episode(&mut self.rng, &self.arena);
        self.pose_history.clear();
        self.pose_history.push(self.state.cube);
        self.delay = 0;
        self.observe()
    }

    /// The between-episode object reset of the evaluation protocol: brings
    /// the cube back towards the center and retracts the fingertips.
    pub fn object_reset_trajectory(&mut self) -> Observation {
        self.reset()
    }

    /// Advances one control step: moves fingertips, resolves contact or
    /// grasp, applies gravity, then returns the corrupted observation and
    /// the reward of the new cube pose.
    pub fn step(&mut self, action: &Action) -> Result<(Observation, f64)> {
        if !action.is_finite() {
            return Err(Error::InvalidInput("non-finite action".into()));
        }
        let action = action.clipped();
        let old_tips = self.state.fingertips;

        // 1. Fingertip kinematics: scaled displacement, norm cap, workspace
        //    confinement, floor.
        let mut new_tips = [Vec3::ZERO; 3];
        for i in 0..3 {
            let mut disp = action.block(i).scale(self.arena.max_step_disp);
            let n = disp.norm();
            if n > self.arena.max_step_disp {
                disp = disp.scale(self.arena.max_step_disp / n);
            }
            let mut p = old_tips[i] + disp;
            let home = self.arena.home(i);
            let off = p - home;
            let d = off.norm();
            if d > self.arena.workspace_radius {
                p = home + off.scale(self.arena.workspace_radius / d);
            }
            if p.z < 0.0 {
                p.z = 0.0;
            }
            new_tips[i] = p;
        }
        self.state.fingertips = new_tips;

        if self.state.attached {
            // 2a. Grasped: the cube follows the least-squares rigid motion
            //     of the fingertips.
            let (r, t) = match rigid_fit(&old_tips, &new_tips) {
                Ok(rt) => rt,
                // Degenerate tip sets cannot occur for an attached grasp,
                // but fall back to the centroid translation if they do.
                Err(_) => (UnitQuat::IDENTITY, centroid(&new_tips) - centroid(&old_tips)),
            };
            let pivot = centroid(&old_tips);
            let new_pos = rigid_fit_apply(r, t, pivot, self.state.cube.position);
            let new_ori = r.mul(self.state.cube.orientation);
            self.state.cube = CubePose::new(new_pos, new_ori);
            self.clamp_cube();
            let breaks = self
                .state
                .fingertips
                .iter()
                .any(|tip| (*tip - self.state.cube.position).norm() > 1.5 * self.arena.grasp_radius);
            if breaks {
                self.state.attached = false;
            }
        } else {
            // 2b. Free cube: quasi-static pushes from every penetrating
            //     fingertip, accumulated simultaneously so the update is
            //     independent of fingertip order.
            let mut total = Vec3::ZERO;
            for tip in &new_tips {
                let d = self.state.cube.position - *tip;
                let dist = d.norm();
                if dist < self.arena.contact_radius {
                    let dir = d
                        .normalized(1e-12)
                        .unwrap_or(Vec3::new(0.0, 0.0, 1.0));
                    total = total + dir.scale(self.arena.contact_radius - dist);
                }
            }
            self.state.cube.position = self.state.cube.position + total;
            self.clamp_cube();

            // 3. Grasp formation.
            let within = new_tips
                .iter()
                .all(|tip| (*tip - self.state.cube.position).norm() <= self.arena.grasp_radius);
            let centroid_close = (centroid(&new_tips) - self.state.cube.position).norm()
                <= self.arena.cube_half_extent;
            if within && centroid_close {
                self.state.attached = true;
            } else {
                // 4. Gravity with zero restitution.
                let clearance = min_corner_z(&self.state.cube, self.arena.cube_half_extent);
                if clearance > 0.0 {
                    let fall = (self.arena.gravity * self.arena.dt * self.arena.dt).min(clearance);
                    self.state.cube.position.z -= fall;
                }
            }
        }

        self.state.step_index += 1;
        self.pose_history.push(self.state.cube);
        // Bound the history to what the delay model can reach.
        let keep = (self.obs_model.max_delay + 1) as usize;
        if self.pose_history.len() > keep.max(1) {
            let drop = self.pose_history.len() - keep.max(1);
            self.pose_history.drain(..drop);
        }

        let obs = self.observe();
        let reward = self.reward();
        Ok((obs, reward))
    }

    /// Reward of the current true cube pose against the goal.
    pub fn reward(&self) -> f64 {
        match &self.goal {
            Goal::Push(g) => push_reward(self.state.cube.position, *g, &self.kernel),
            Goal::Lift(g) => {
                lift_reward(&self.state.cube, g, self.arena.cube_half_extent, &self.kernel)
            }
        }
    }

    /// Success of the current true cube pose against the goal.
    pub fn success(&self) -> bool {
        is_success(&self.state.cube, &self.goal.pose(), &self.thresholds, self.task())
    }

    /// Builds the observation, corrupting the cube pose estimate per the
    /// observation model. All generator draws happen unconditionally so the
    /// noise stream is identical for every policy under the same seed.
    fn observe(&mut self) -> Observation {
        if self.obs_model.is_noiseless() {
            return Observation {
                fingertips: self.state.fingertips,
                cube_estimate: self.state.cube,
                goal: self.goal,
                confidence: 1.0,
                delay: 0,
            };
        }
        let u_stall: f64 = self.rng.gen();
        let u_glitch: f64 = self.rng.gen();
        let npos = [
            next_gaussian(&mut self.rng),
            next_gaussian(&mut self.rng),
            next_gaussian(&mut self.rng),
        ];
        let nang = next_gaussian(&mut self.rng);
        let axis_z: f64 = self.rng.gen_range(-1.0..1.0);
        let axis_phi: f64 = self.rng.gen::<f64>() * std::f64::consts::TAU;
        let u_conf: f64 = self.rng.gen();

        let glitch = u_glitch < self.obs_model.lowconf_prob;
        let stall = u_stall < self.obs_model.delay_prob;
        if glitch || stall {
            self.delay = self.obs_model.max_delay;
        } else {
            self.delay = self.delay.saturating_sub(1);
        }
        let idx = self.pose_history.len().saturating_sub(1 + self.delay as usize);
        let base = self.pose_history[idx.min(self.pose_history.len() - 1)];

        let scale = if glitch { self.obs_model.glitch_noise_scale } else { 1.0 };
        let sp = self.obs_model.sigma_pos * scale;
        let pos = base.position + Vec3::new(sp * npos[0], sp * npos[1], sp * npos[2]);
        let rho = (1.0 - axis_z * axis_z).max(0.0).sqrt();
        let axis = Vec3::new(rho * axis_phi.cos(), rho * axis_phi.sin(), axis_z);
        let ang = (self.obs_model.sigma_ori_deg * scale * nang).to_radians();
        let ori = UnitQuat::from_axis_angle(axis, ang).mul(base.orientation);

        let confidence = if glitch { 0.3 * u_conf } else { 0.5 + 0.5 * u_conf };
        Observation {
            fingertips: self.state.fingertips,
            cube_estimate: CubePose::new(pos, ori),
            goal: self.goal,
            confidence,
            delay: self.delay,
        }
    }

    /// Keeps the cube inside the arena cylinder and above the floor.
    fn clamp_cube(&mut self) {
        let limit = self.arena.cube_xy_limit();
        let r = self.state.cube.position.norm_xy();
        if r > limit {
            let s = limit / r;
            self.state.cube.position.x *= s;
            self.state.cube.position.y *= s;
        }
        let clearance = min_corner_z(&self.state.cube, self.arena.cube_half_extent);
        if clearance < 0.0 {
            self.state.cube.position.z -= clearance;
        }
    }
}

fn centroid(pts: &[Vec3; 3]) -> Vec3 {
    (pts[0] + pts[1] + pts[2]).scale(1.0 / 3.0)
}

/// Initial episode state: cube near the arena center with a uniform offset
/// of at most 5 cm and a uniform yaw, fingertips at home, nothing attached.
pub fn reset_episode(rng: &mut ChaCha8Rng, arena: &ArenaSpec) -> EnvState {
    let u: f64 = rng.gen();
    let phi: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
    let yaw: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
    let r = 0.05 * u.sqrt();
    let cube = CubePose::new(
        Vec3::new(r * phi.cos(), r * phi.sin(), arena.cube_half_extent),
        UnitQuat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), yaw),
    );
    EnvState {
        cube,
        fingertips: [arena.home(0), arena.home(1), arena.home(2)],
        attached: false,
        step_index: 0,
    }
}

/// The arena symmetry: rotation by `k * 120` degrees about the vertical
/// axis combined with the matching cyclic fingertip permutation. Applies to
/// states, actions and goals; [`Env::step`] commutes with it when the
/// observation model is noiseless.
pub mod symmetry {
    use super::*;
    use crate::geom::Mat3;

    pub fn rot_angle(k: usize) -> f64 {
        k as f64 * std::f64::consts::TAU / 3.0
    }

    pub fn rotate_vec(v: Vec3, k: usize) -> Vec3 {
        Mat3::rot_z(rot_angle(k)).apply(v)
    }

    pub fn rotate_quat(q: UnitQuat, k: usize) -> UnitQuat {
        UnitQuat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), rot_angle(k)).mul(q)
    }

    pub fn rotate_pose(p: &CubePose, k: usize) -> CubePose {
        CubePose::new(rotate_vec(p.position, k), rotate_quat(p.orientation, k))
    }

    pub fn rotate_goal(g: &Goal, k: usize) -> Goal {
        match g {
            Goal::Push(p) => Goal::Push(rotate_vec(*p, k)),
            Goal::Lift(p) => Goal::Lift(rotate_pose(p, k)),
        }
    }

    /// Finger i takes the role of finger (i + k) mod 3 after rotation.
    pub fn rotate_state(s: &EnvState, k: usize) -> EnvState {
        let mut tips = [Vec3::ZERO; 3];
        for i in 0..3 {
            tips[(i + k) % 3] = rotate_vec(s.fingertips[i], k);
        }
        EnvState {
            cube: rotate_pose(&s.cube, k),
            fingertips: tips,
            attached: s.attached,
            step_index: s.step_index,
        }
    }

    pub fn rotate_action(a: &Action, k: usize) -> Action {
        let mut blocks = [Vec3::ZERO; 3];
        for i in 0..3 {
            blocks[(i + k) % 3] = rotate_vec(a.block(i), k);
        }
        Action::from_blocks(blocks)
    }
}
