//! The one-command reproduction pipeline: generates the four task/quality
//! datasets, trains behavioral cloning, filtered behavioral cloning and a
//! reward-aware method on each, evaluates everything against the behavior
//! policies and emits the final score table.

use crate::flags::Flags;
use crate::{CliError, CliResult};
use rrcb::algos;
use rrcb::data::{filter_expert_iterative, generate_dataset, Quality};
use rrcb::eval::{
    emit_report, run_evaluation, BehaviorPolicy, Combo, EvalEntry, EvalReport, LearnedPolicy,
    PerComboPolicy,
};
use rrcb::geom::Task;
use rrcb::nn::AlgoId;
use rrcb::rng::derive_seed;

/// Desk-scale presets. The full published datasets are far larger; these
/// sizes keep the pipeline in the minutes range on one CPU core.
struct Scale {
    episodes: usize,
    gradient_steps: usize,
    batch_size: usize,
    hidden: Vec<usize>,
    robots: usize,
    goals: Option<usize>,
    filter_train_steps: usize,
}

fn scale_preset(name: &str) -> Result<Scale, CliError> {
    Ok(match name {
        "tiny" => Scale {
            episodes: 8,
            gradient_steps: 400,
            batch_size: 64,
            hidden: vec![64, 64],
            robots: 1,
            goals: Some(2),
            filter_train_steps: 150,
        },
        "small" => Scale {
            episodes: 40,
            gradient_steps: 1500,
            batch_size: 128,
            hidden: vec![128, 128],
            robots: 1,
            goals: Some(4),
            filter_train_steps: 300,
        },
        "default" => Scale {
            episodes: 40,
            gradient_steps: 2500,
            batch_size: 128,
            hidden: vec![256, 256],
            robots: 2,
            goals: None,
            filter_train_steps: 400,
        },
        other => return Err(CliError::Usage(format!("unknown scale '{other}'"))),
    })
}

pub fn run(args: &[String]) -> CliResult {
    let flags = Flags::parse(args, &["out", "scale", "seed", "check", "config"])?;
    let out = flags.require_path("out")?;
    let seed = flags.seed()?;
    let check = match flags.get("check") {
        None => false,
        Some("true") => true,
        Some("false") => false,
        Some(v) => return Err(CliError::Usage(format!("--check expects true or false, got '{v}'"))),
    };
    let scale = scale_preset(flags.get("scale").unwrap_or("default"))?;

    let mut cfg = crate::commands::load_config(&flags)?;
    cfg.episodes = scale.episodes;
    cfg.train.gradient_steps = scale.gradient_steps;
    cfg.train.batch_size = scale.batch_size;
    cfg.train.hidden = scale.hidden.clone();
    cfg.filter.train_steps = scale.filter_train_steps;
    cfg.eval.n_robots = scale.robots;
    cfg.eval.goals_per_robot = scale.goals;
    cfg.eval.master_seed = derive_seed(seed, &[0xe7a1]);
    cfg.validate()?;

    let data_dir = out.join("datasets");
    let policy_dir = out.join("policies");
    let report_dir = out.join("report");
    std::fs::create_dir_all(&data_dir).map_err(rrcb::Error::from)?;
    std::fs::create_dir_all(&policy_dir).map_err(rrcb::Error::from)?;

    // Stage 1: the four combo datasets.
    let combos = Combo::all();
    let mut datasets = Vec::new();
    for combo in &combos {
        let ds_seed = derive_seed(seed, &[0xda7a, combo_tag(combo)]);
        let (ds, stats) =
            generate_dataset(combo.task, combo.quality, cfg.episodes, ds_seed, &cfg.env_config())?;
        ds.save(&data_dir.join(format!("{}.rrcb", combo_file(combo))))?;
        println!(
            "dataset {}: episodes={} mean_return={:.1} success_rate={:.2}",
            combo.name(),
            ds.n_episodes(),
            stats.mean_return,
            stats.success_rate
        );
        datasets.push((*combo, ds));
    }

    // Stage 2: filtered variants of every dataset.
    let mut filtered = Vec::new();
    for (combo, ds) in &datasets {
        let mut fcfg = cfg.filter.clone();
        fcfg.seed = derive_seed(seed, &[0xf117, combo_tag(combo)]);
        let (sub, log) = filter_expert_iterative(ds, &fcfg)?;
        sub.save(&data_dir.join(format!("{}_filtered.rrcb", combo_file(combo))))?;
        println!(
            "filter {}: kept {}/{} episodes (sizes {:?})",
            combo.name(),
            sub.n_episodes(),
            ds.n_episodes(),
            log.sizes
        );
        filtered.push((*combo, sub));
    }

    // Stage 3: train bc, filtered-bc and the reward-aware method per combo.
    let methods: [(&str, AlgoId, bool); 3] =
        [("bc", AlgoId::Bc, false), ("filtered-bc", AlgoId::Bc, true), ("crr", AlgoId::Crr, false)];
    let mut trained: Vec<(String, Vec<(Combo, LearnedPolicy)>)> = Vec::new();
    for (method, algo, on_filtered) in methods {
        let mut per_combo = Vec::new();
        for (combo, ds) in if on_filtered { &filtered } else { &datasets } {
            let mut tc = cfg.train.clone();
            tc.algo = algo;
            tc.seed = derive_seed(seed, &[0x7a1, combo_tag(combo), algo as u64]);
            let (artifact, log) = algos::train(ds, &tc)?;
            let stem = format!("{}_{}", method.replace('-', "_"), combo_file(combo));
            artifact.save(&policy_dir.join(format!("{stem}.rrcp")))?;
            std::fs::write(policy_dir.join(format!("{stem}.log.csv")), log.to_csv())
                .map_err(rrcb::Error::from)?;
            per_combo.push((*combo, LearnedPolicy::new(artifact)));
        }
        println!("trained {method} on {} combos", per_combo.len());
        trained.push((method.to_string(), per_combo));
    }

    // Stage 4: evaluate everything under the shared protocol.
    let mut entries = vec![EvalEntry {
        name: "behavior".into(),
        policy: Box::new(BehaviorPolicy::new(cfg.weak)),
        combos: combos.clone(),
    }];
    for (method, per_combo) in trained {
        let policy = PerComboPolicy::new(per_combo);
        entries.push(EvalEntry {
            name: method,
            policy: Box::new(policy),
            combos: combos.clone(),
        });
    }
    let report = run_evaluation(&mut entries, &cfg.eval, &cfg.env_config())?;
    emit_report(&report, &report_dir, "behavior")?;
    crate::commands::write_echo(&cfg, &out, true, &format!("repro --scale {} --seed {seed}", flags.get("scale").unwrap_or("default")))?;

    let mut overall: Vec<String> =
        report.overall.iter().map(|(n, s)| format!("{n}={s:.3}")).collect();
    overall.sort();
    println!("summary scale={} {}", flags.get("scale").unwrap_or("default"), overall.join(" "));

    if check {
        run_checks(&report)?;
        println!("checks passed");
    }
    Ok(())
}

fn combo_tag(c: &Combo) -> u64 {
    (matches!(c.task, Task::Lift) as u64) * 2 + matches!(c.quality, Quality::Mixed) as u64
}

fn combo_file(c: &Combo) -> String {
    format!("{}_{}", c.task.name(), c.quality.name())
}

fn row<'a>(report: &'a EvalReport, policy: &str, task: Task, quality: Quality) -> Option<&'a rrcb::eval::ComboRow> {
    report
        .rows
        .iter()
        .find(|r| r.policy == policy && r.task == task && r.quality == quality)
}

/// The repro-level acceptance inequalities; failures exit with code 3.
fn run_checks(report: &EvalReport) -> CliResult {
    let mut failures = Vec::new();

    let behavior_push = row(report, "behavior", Task::Push, Quality::Expert);
    let behavior_lift = row(report, "behavior", Task::Lift, Quality::Expert);
    match behavior_push {
        Some(r) if r.success_rate >= 0.8 => {}
        Some(r) => failures.push(format!(
            "behavior push/expert success {:.2} below 0.80",
            r.success_rate
        )),
        None => failures.push("missing behavior push/expert row".into()),
    }
    match behavior_lift {
        Some(r) if r.success_rate >= 0.5 => {}
        Some(r) => failures.push(format!(
            "behavior lift/expert success {:.2} below 0.50",
            r.success_rate
        )),
        None => failures.push("missing behavior lift/expert row".into()),
    }

    // Mixed behavior scores below expert behavior on both tasks.
    for task in [Task::Push, Task::Lift] {
        let e = row(report, "behavior", task, Quality::Expert);
        let m = row(report, "behavior", task, Quality::Mixed);
        match (e, m) {
            (Some(e), Some(m)) if m.mean_return < e.mean_return => {}
            (Some(e), Some(m)) => failures.push(format!(
                "{} mixed behavior {:.1} not below expert behavior {:.1}",
                task.name(),
                m.mean_return,
                e.mean_return
            )),
            _ => failures.push(format!("missing behavior rows for {}", task.name())),
        }
    }

    // Filtering pays off where it matters: push/mixed filtered-bc beats bc
    // by at least 20 percent.
    let bc = row(report, "bc", Task::Push, Quality::Mixed);
    let fbc = row(report, "filtered-bc", Task::Push, Quality::Mixed);
    match (bc, fbc) {
        (Some(bc), Some(fbc)) if fbc.mean_return >= 1.2 * bc.mean_return => {}
        (Some(bc), Some(fbc)) => failures.push(format!(
            "push/mixed filtered-bc {:.1} not 1.2x bc {:.1}",
            fbc.mean_return, bc.mean_return
        )),
        _ => failures.push("missing bc rows for push/mixed".into()),
    }

    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(failures.join("; ")))
    }
}
