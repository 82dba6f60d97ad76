//! The challenge evaluation protocol: fixed per-robot goal lists shared by
//! every policy, jobs of 9 (Push) or 6 (Lift) episodes with object resets
//! in between, cumulative-reward scoring with failed episodes scoring 0,
//! and the overall-score arithmetic.

mod policies;
mod report;

pub use policies::{
    BehaviorPolicy, EvalPolicy, LearnedPolicy, MixedBehaviorPolicy, PerComboPolicy,
    PoseSmoothedPolicy, ScriptedPolicy,
};
pub use report::{emit_report, parse_report_csv, render_svg, render_text_table, write_csv};

use crate::data::{EnvConfig, Quality};
use crate::env::Goal;
use crate::error::{Error, Result};
use crate::geom::Task;
use crate::rng::{derive_seed, rng_from_seed};

/// One task/dataset-composition cell of the results table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Combo {
    pub task: Task,
    pub quality: Quality,
}

impl Combo {
    pub fn parse(s: &str) -> Result<Combo> {
        let (t, q) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidInput(format!("combo '{s}' is not task:quality")))?;
        let quality = Quality::parse(q)?;
        if !matches!(quality, Quality::Expert | Quality::Mixed) {
            return Err(Error::InvalidInput(format!(
                "combo quality must be expert or mixed, got '{q}'"
            )));
        }
        Ok(Combo { task: Task::parse(t)?, quality })
    }

    pub fn name(&self) -> String {
        format!("{}:{}", self.task.name(), self.quality.name())
    }

    /// The four standard task/dataset combinations.
    pub fn all() -> Vec<Combo> {
        vec![
            Combo { task: Task::Push, quality: Quality::Expert },
            Combo { task: Task::Push, quality: Quality::Mixed },
            Combo { task: Task::Lift, quality: Quality::Expert },
            Combo { task: Task::Lift, quality: Quality::Mixed },
        ]
    }

    fn id(&self) -> u64 {
        (match self.task {
            Task::Push => 0,
            Task::Lift => 1,
        }) * 2
            + (match self.quality {
                Quality::Expert => 0,
                _ => 1,
            })
    }
}

/// Protocol parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalProtocolConfig {
    /// Number of simulated robots (distinct observation-noise seeds).
    pub n_robots: usize,
    /// Goals per robot per combo; `None` selects the per-task default of
    /// 9 (Push) or 6 (Lift), one full job.
    pub goals_per_robot: Option<usize>,
    pub master_seed: u64,
    /// Worker threads for episode execution.
    pub workers: usize,
}

impl Default for EvalProtocolConfig {
    fn default() -> EvalProtocolConfig {
        EvalProtocolConfig { n_robots: 3, goals_per_robot: None, master_seed: 0, workers: 1 }
    }
}

impl EvalProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_robots == 0 || self.goals_per_robot == Some(0) {
            return Err(Error::InvalidParameter("robots and goals must be at least 1".into()));
        }
        Ok(())
    }

    pub fn goals_for(&self, task: Task) -> usize {
        self.goals_per_robot.unwrap_or(episodes_per_job(task))
    }
}

/// Episodes executed per job: 9 for Push, 6 for the longer Lift episodes.
pub fn episodes_per_job(task: Task) -> usize {
    match task {
        Task::Push => 9,
        Task::Lift => 6,
    }
}

/// Outcome of one evaluated episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeOutcome {
    pub episode_return: f64,
    pub success: bool,
    pub failed: bool,
}

/// One row of the report: statistics of a (task, quality, policy) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ComboRow {
    pub task: Task,
    pub quality: Quality,
    pub policy: String,
    pub n_episodes: usize,
    pub mean_return: f64,
    pub sem_return: f64,
    pub success_rate: f64,
    pub sem_success: f64,
}

/// Full evaluation report: per-combo rows plus the overall score (mean of
/// per-combo mean returns) per policy.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub rows: Vec<ComboRow>,
    pub overall: Vec<(String, f64)>,
}

/// Arithmetic mean of per-combo mean returns; the ranking score.
pub fn compute_overall_score(per_combo_means: &[f64]) -> f64 {
    if per_combo_means.is_empty() {
        return 0.0;
    }
    per_combo_means.iter().sum::<f64>() / per_combo_means.len() as f64
}

/// Success fraction with its standard error sqrt(p (1-p) / n).
pub fn compute_success_rate(outcomes: &[bool]) -> (f64, f64) {
    if outcomes.is_empty() {
        return (0.0, 0.0);
    }
    let n = outcomes.len() as f64;
    let p = outcomes.iter().filter(|&&b| b).count() as f64 / n;
    (p, (p * (1.0 - p) / n).sqrt())
}

/// Sample mean and standard error (sample std over sqrt n).
pub fn mean_and_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// A policy entered into the evaluation. `combos` restricts which cells it
/// runs on (learned policies only apply to their training task).
pub struct EvalEntry {
    pub name: String,
    pub policy: Box<dyn EvalPolicy>,
    pub combos: Vec<Combo>,
}

/// Goal list for one (robot, combo), generated once from the master seed
/// and reused for every policy.
fn goal_list(cfg: &EvalProtocolConfig, env: &EnvConfig, robot: usize, combo: Combo) -> Vec<Goal> {
    let seed = derive_seed(cfg.master_seed, &[0x60a15, robot as u64, combo.id()]);
    let mut rng = rng_from_seed(seed);
    (0..cfg.goals_for(combo.task)).map(|_| env.sample_goal(combo.task, &mut rng)).collect()
}

/// Runs one episode; a policy error or non-finite action marks the episode
/// failed (return 0) and the remaining steps run with zero actions so the
/// job's noise stream stays aligned across policies.
fn run_episode(
    env: &mut crate::env::Env,
    policy: &mut dyn EvalPolicy,
    first_obs: crate::env::Observation,
) -> EpisodeOutcome {
    let steps = env.task().steps_per_episode();
    let mut obs = first_obs;
    let mut ret = 0.0;
    let mut failed = false;
    for _ in 0..steps {
        let action = if failed {
            crate::env::Action::ZERO
        } else {
            match policy.act(&obs) {
                Ok(a) if a.is_finite() => a,
                _ => {
                    failed = true;
                    crate::env::Action::ZERO
                }
            }
        };
        // Zero actions cannot fail.
        let (next, r) = env.step(&action).expect("zero action step");
        obs = next;
        if !failed {
            ret += r;
        }
    }
    EpisodeOutcome {
        episode_return: if failed { 0.0 } else { ret },
        success: !failed && env.success(),
        failed,
    }
}

/// One job: a fresh environment seeded by (master, robot, combo, job),
/// running `goals` episodes separated by object reset trajectories.
fn run_job(
    cfg: &EvalProtocolConfig,
    env_cfg: &EnvConfig,
    robot: usize,
    combo: Combo,
    job_idx: usize,
    goals: &[Goal],
    first_goal_idx: usize,
    policy: &mut dyn EvalPolicy,
) -> Vec<EpisodeOutcome> {
    let env_seed = derive_seed(cfg.master_seed, &[0xe5d, robot as u64, combo.id(), job_idx as u64]);
    let mut env = env_cfg
        .make_env(combo.task, derive_seed(env_seed, &[0]), env_seed)
        .expect("validated env config");
    let mut out = Vec::with_capacity(goals.len());
    for (e, goal) in goals.iter().enumerate() {
        env.goal = *goal;
        let obs = if e == 0 { env.reset() } else { env.object_reset_trajectory() };
        policy.reset_episode(derive_seed(
            cfg.master_seed,
            &[0xbeef, robot as u64, combo.id(), (first_goal_idx + e) as u64],
        ));
        out.push(run_episode(&mut env, policy, obs));
    }
    out
}

/// Rows and overall score of one entry; independent of other entries.
fn evaluate_entry(
    entry: &mut EvalEntry,
    cfg: &EvalProtocolConfig,
    env_cfg: &EnvConfig,
) -> Result<(Vec<ComboRow>, (String, f64))> {
    let mut rows = Vec::new();
    let mut combo_means = Vec::new();
    for combo in entry.combos.clone() {
        entry.policy.begin_combo(combo)?;
        let mut returns = Vec::new();
        let mut successes = Vec::new();
        for robot in 0..cfg.n_robots {
            let goals = goal_list(cfg, env_cfg, robot, combo);
            let job_size = episodes_per_job(combo.task);
            let mut idx = 0;
            let mut job_idx = 0;
            while idx < goals.len() {
                let hi = (idx + job_size).min(goals.len());
                let outcomes = run_job(
                    cfg,
                    env_cfg,
                    robot,
                    combo,
                    job_idx,
                    &goals[idx..hi],
                    idx,
                    entry.policy.as_mut(),
                );
                for o in outcomes {
                    returns.push(o.episode_return);
                    successes.push(o.success);
                }
                idx = hi;
                job_idx += 1;
            }
        }
        let (mean_return, sem_return) = mean_and_sem(&returns);
        let (success_rate, sem_success) = compute_success_rate(&successes);
        combo_means.push(mean_return);
        rows.push(ComboRow {
            task: combo.task,
            quality: combo.quality,
            policy: entry.name.clone(),
            n_episodes: returns.len(),
            mean_return,
            sem_return,
            success_rate,
            sem_success,
        });
    }
    Ok((rows, (entry.name.clone(), compute_overall_score(&combo_means))))
}

/// Runs the full protocol. Every policy sees identical goal lists and
/// noise streams. Entries are independent units of work; with more than
/// one worker they run on scoped threads, and results are reduced in entry
/// order so the report is identical regardless of worker count.
pub fn run_evaluation(
    entries: &mut [EvalEntry],
    cfg: &EvalProtocolConfig,
    env_cfg: &EnvConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    let workers = cfg.workers.max(1).min(entries.len().max(1));
    let mut results: Vec<Option<Result<(Vec<ComboRow>, (String, f64))>>> =
        (0..entries.len()).map(|_| None).collect();

    if workers <= 1 {
        for (entry, slot) in entries.iter_mut().zip(results.iter_mut()) {
            *slot = Some(evaluate_entry(entry, cfg, env_cfg));
        }
    } else {
        let chunk = entries.len().div_ceil(workers);
        std::thread::scope(|scope| {
            for (entry_chunk, result_chunk) in
                entries.chunks_mut(chunk).zip(results.chunks_mut(chunk))
            {
                scope.spawn(move || {
                    for (entry, slot) in entry_chunk.iter_mut().zip(result_chunk.iter_mut()) {
                        *slot = Some(evaluate_entry(entry, cfg, env_cfg));
                    }
                });
            }
        });
    }

    let mut report = EvalReport::default();
    for slot in results {
        let (rows, overall) = slot.expect("all entries evaluated")?;
        report.rows.extend(rows);
        report.overall.push(overall);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Action, Observation};

    #[test]
    fn overall_score_reproduces_published_rows() {
        // Winning team, behavior policies and runner-up rows; printed
        // scores are 784, 751 and 703.
        let cases = [
            (vec![624.0, 635.0, 956.0, 923.0], 784.5, 784.0),
            (vec![660.0, 429.0, 1064.0, 851.0], 751.0, 751.0),
            (vec![639.0, 613.0, 841.0, 717.0], 702.5, 703.0),
        ];
        for (means, exact, printed) in cases {
            let s = compute_overall_score(&means);
            assert!((s - exact).abs() < 1e-12);
            assert!((s - printed).abs() <= 0.5);
        }
        assert_eq!(compute_overall_score(&[123.0]), 123.0);
    }

    #[test]
    fn success_rate_matches_binomial_sem() {
        let mut outcomes = vec![true; 46];
        outcomes.extend(vec![false; 54]);
        let (p, sem) = compute_success_rate(&outcomes);
        assert!((p - 0.46).abs() < 1e-12);
        assert!((sem - 0.049839743177508444).abs() < 1e-12);
        let all = vec![true; 10];
        assert_eq!(compute_success_rate(&all), (1.0, 0.0));
        let none = vec![false; 10];
        assert_eq!(compute_success_rate(&none), (0.0, 0.0));
    }

    #[test]
    fn aggregation_is_order_independent() {
        let returns = [5.0, 1.0, 3.5, 2.0, 4.25];
        let shuffled = [3.5, 5.0, 2.0, 4.25, 1.0];
        let (m1, s1) = mean_and_sem(&returns);
        let (m2, s2) = mean_and_sem(&shuffled);
        assert!((m1 - m2).abs() < 1e-12 && (s1 - s2).abs() < 1e-12);
        let outcomes = [true, false, true, true];
        let outcomes_shuffled = [true, true, false, true];
        assert_eq!(compute_success_rate(&outcomes), compute_success_rate(&outcomes_shuffled));
    }

    #[test]
    fn mean_and_sem_basics() {
        let (m, s) = mean_and_sem(&[2.0, 4.0, 6.0]);
        assert!((m - 4.0).abs() < 1e-12);
        // sample std = 2, sem = 2 / sqrt(3)
        assert!((s - 2.0 / 3.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(mean_and_sem(&[5.0]), (5.0, 0.0));
    }

    #[test]
    fn combo_parsing() {
        let c = Combo::parse("push:expert").unwrap();
        assert_eq!(c.task, Task::Push);
        assert_eq!(c.quality, Quality::Expert);
        assert!(Combo::parse("lift:mixed").is_ok());
        assert!(Combo::parse("lift:filtered").is_err());
        assert!(Combo::parse("fly:expert").is_err());
        assert!(Combo::parse("nonsense").is_err());
        assert_eq!(Combo::all().len(), 4);
    }

    /// Policy that records the goals it sees through a shared handle.
    struct GoalRecorder {
        goals: std::sync::Arc<std::sync::Mutex<Vec<Goal>>>,
    }

    impl EvalPolicy for GoalRecorder {
        fn reset_episode(&mut self, _seed: u64) {}
        fn act(&mut self, obs: &Observation) -> Result<Action> {
            let mut goals = self.goals.lock().unwrap();
            if goals.last() != Some(&obs.goal) {
                goals.push(obs.goal);
            }
            Ok(Action::ZERO)
        }
    }

    #[test]
    fn goal_lists_are_identical_across_policies_and_jobs_count() {
        let cfg = EvalProtocolConfig {
            n_robots: 2,
            goals_per_robot: Some(9),
            master_seed: 5,
            workers: 1,
        };
        let env_cfg = EnvConfig::default();
        let combo = Combo { task: Task::Push, quality: Quality::Expert };
        let seen_a = std::sync::Arc::new(std::sync::Mutex::new(Vec::new()));
        let seen_b = std::sync::Arc::new(std::sync::Mutex::new(Vec::new()));
        let mut entries = vec![
            EvalEntry {
                name: "a".into(),
                policy: Box::new(GoalRecorder { goals: seen_a.clone() }),
                combos: vec![combo],
            },
            EvalEntry {
                name: "b".into(),
                policy: Box::new(GoalRecorder { goals: seen_b.clone() }),
                combos: vec![combo],
            },
        ];
        let report = run_evaluation(&mut entries, &cfg, &env_cfg).unwrap();
        // 2 robots x 9 goals = 18 episodes per policy for the combo, in
        // one push job per robot.
        assert_eq!(report.rows[0].n_episodes, 18);
        assert_eq!(report.rows[1].n_episodes, 18);
        let a = seen_a.lock().unwrap().clone();
        let b = seen_b.lock().unwrap().clone();
        assert_eq!(a.len(), 18);
        assert_eq!(a, b);
    }

    /// Policy that always emits NaN.
    struct NanPolicy;

    impl EvalPolicy for NanPolicy {
        fn reset_episode(&mut self, _seed: u64) {}
        fn act(&mut self, _obs: &Observation) -> Result<Action> {
            Ok(Action([f64::NAN; 9]))
        }
    }

    #[test]
    fn nan_policy_scores_zero_everywhere() {
        let cfg = EvalProtocolConfig {
            n_robots: 1,
            goals_per_robot: Some(2),
            master_seed: 1,
            workers: 1,
        };
        let env_cfg = EnvConfig::default();
        let mut entries = vec![EvalEntry {
            name: "nan".into(),
            policy: Box::new(NanPolicy),
            combos: vec![Combo { task: Task::Push, quality: Quality::Expert }],
        }];
        let report = run_evaluation(&mut entries, &cfg, &env_cfg).unwrap();
        assert_eq!(report.rows[0].mean_return, 0.0);
        assert_eq!(report.rows[0].success_rate, 0.0);
        assert_eq!(report.rows[0].n_episodes, 2);
        assert_eq!(report.overall[0].1, 0.0);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let cfg = EvalProtocolConfig {
            n_robots: 1,
            goals_per_robot: Some(3),
            master_seed: 9,
            workers: 1,
        };
        let env_cfg = EnvConfig::default();
        let run = || {
            let mut entries = vec![EvalEntry {
                name: "expert".into(),
                policy: Box::new(ScriptedPolicy::expert()),
                combos: vec![Combo { task: Task::Push, quality: Quality::Expert }],
            }];
            run_evaluation(&mut entries, &cfg, &env_cfg).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        assert!(a.rows[0].mean_return > 0.0);
    }
}
