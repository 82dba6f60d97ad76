//! The individual subcommands (everything except `repro`).

use crate::flags::Flags;
use crate::{CliError, CliResult};
use rrcb::algos;
use rrcb::config::RunConfig;
use rrcb::data::{
    filter_expert_iterative, generate_dataset, history_stack, rotational_augment, Dataset, Quality,
};
use rrcb::eval::{
    emit_report, run_evaluation, BehaviorPolicy, Combo, EvalEntry, EvalPolicy, LearnedPolicy,
    ScriptedPolicy,
};
use rrcb::geom::Task;
use rrcb::nn::{AlgoId, PolicyArtifact};
use std::path::Path;

/// Loads the optional --config file and applies it over the defaults.
pub(crate) fn load_config(flags: &Flags) -> Result<RunConfig, CliError> {
    match flags.get("config") {
        Some(path) => Ok(RunConfig::load(Path::new(path))?),
        None => Ok(RunConfig::default()),
    }
}

/// Writes the resolved config echo next to an output file or into an
/// output directory, prefixed with the command line for re-running.
pub(crate) fn write_echo(cfg: &RunConfig, out: &Path, is_dir: bool, cmdline: &str) -> CliResult {
    let echo = format!("# rrcb {cmdline}\n{}", cfg.echo());
    let path = if is_dir {
        std::fs::create_dir_all(out).map_err(rrcb::Error::from)?;
        out.join("config.txt")
    } else {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".config.txt");
        out.with_file_name(name)
    };
    std::fs::write(path, echo).map_err(rrcb::Error::from)?;
    Ok(())
}

pub fn gen_data(args: &[String]) -> CliResult {
    let flags = Flags::parse(args, &["task", "quality", "episodes", "seed", "out", "config"])?;
    let task = Task::parse(flags.require("task")?).map_err(usage)?;
    let quality = Quality::parse(flags.require("quality")?).map_err(usage)?;
    if !matches!(quality, Quality::Expert | Quality::Mixed) {
        return Err(CliError::Usage("gen-data quality must be expert or mixed".into()));
    }
    let episodes = flags
        .get_usize("episodes")?
        .ok_or_else(|| CliError::Usage("missing required flag '--episodes'".into()))?;
    if episodes == 0 {
        return Err(CliError::Usage("--episodes must be at least 1".into()));
    }
    if quality == Quality::Mixed && episodes % 2 != 0 {
        return Err(CliError::Usage("mixed datasets need an even --episodes".into()));
    }
    let seed = flags.seed()?;
    let out = flags.require_path("out")?;
    let cfg = load_config(&flags)?;

    let (ds, stats) = generate_dataset(task, quality, episodes, seed, &cfg.env_config())?;
    ds.save(&out)?;
    write_echo(&cfg, &out, false, &format!("gen-data --task {} --quality {} --episodes {episodes} --seed {seed}", task.name(), quality.name()))?;
    println!(
        "summary episodes={} transitions={} mean_return={:.3} success_rate={:.3}",
        ds.n_episodes(),
        ds.n_transitions(),
        stats.mean_return,
        stats.success_rate
    );
    Ok(())
}

fn usage(e: rrcb::Error) -> CliError {
    CliError::Usage(e.to_string())
}

pub fn train(args: &[String]) -> CliResult {
    let flags = Flags::parse(args, &["algo", "dataset", "out", "seed", "config", "history"])?;
    let algo = AlgoId::parse(flags.require("algo")?).map_err(usage)?;
    let dataset_path = flags.require_path("dataset")?;
    let out = flags.require_path("out")?;
    let seed = flags.seed()?;
    let mut cfg = load_config(&flags)?;
    cfg.train.algo = algo;
    cfg.train.seed = seed;
    if let Some(h) = flags.get_usize("history")? {
        cfg.train.history = h;
    }
    cfg.validate()?;

    let ds = Dataset::load(&dataset_path)?;
    let (artifact, log) = algos::train(&ds, &cfg.train)?;
    artifact.save(&out)?;
    let mut log_name = out.file_name().unwrap_or_default().to_os_string();
    log_name.push(".log.csv");
    std::fs::write(out.with_file_name(log_name), log.to_csv()).map_err(rrcb::Error::from)?;
    write_echo(&cfg, &out, false, &format!("train --algo {} --seed {seed}", algo.name()))?;
    let last = log.rows.last();
    println!(
        "summary algo={} steps={} final_actor_loss={} final_critic_loss={}",
        algo.name(),
        cfg.train.gradient_steps,
        last.map_or(f64::NAN, |r| r.actor_loss),
        last.map_or(f64::NAN, |r| r.critic_loss),
    );
    Ok(())
}

/// Ten-bin histogram of episode returns, for the filter summary.
fn return_histogram(ds: &Dataset) -> String {
    let returns: Vec<f64> = (0..ds.n_episodes()).map(|i| ds.episode_return(i)).collect();
    if returns.is_empty() {
        return String::from("(empty)");
    }
    let lo = returns.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = returns.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = ((hi - lo) / 10.0).max(1e-9);
    let mut bins = [0usize; 10];
    for r in &returns {
        let b = (((r - lo) / width) as usize).min(9);
        bins[b] += 1;
    }
    format!(
        "returns [{lo:.1}, {hi:.1}] bins {}",
        bins.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("/")
    )
}

pub fn filter(args: &[String]) -> CliResult {
    let flags = Flags::parse(args, &["dataset", "out", "init-frac", "seed", "config"])?;
    let dataset_path = flags.require_path("dataset")?;
    let out = flags.require_path("out")?;
    let seed = flags.seed()?;
    let mut cfg = load_config(&flags)?;
    if let Some(f) = flags.get_f64("init-frac")? {
        cfg.filter.init_frac = f;
    }
    cfg.filter.seed = seed;

    let ds = Dataset::load(&dataset_path)?;
    let before_hist = return_histogram(&ds);
    let (filtered, log) = filter_expert_iterative(&ds, &cfg.filter)?;
    filtered.save(&out)?;
    write_echo(&cfg, &out, false, &format!("filter --init-frac {} --seed {seed}", cfg.filter.init_frac))?;
    println!("before: {before_hist}");
    println!("after:  {}", return_histogram(&filtered));
    println!(
        "summary before={} after={} iterations={} sizes={}",
        ds.n_episodes(),
        filtered.n_episodes(),
        log.sizes.len(),
        log.sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("/")
    );
    Ok(())
}

pub fn augment(args: &[String]) -> CliResult {
    let flags = Flags::parse(args, &["dataset", "out", "k"])?;
    let dataset_path = flags.require_path("dataset")?;
    let out = flags.require_path("out")?;
    let k = flags
        .get_usize("k")?
        .ok_or_else(|| CliError::Usage("missing required flag '--k'".into()))?;
    if !(1..=3).contains(&k) {
        return Err(CliError::Usage("--k must be 1, 2 or 3".into()));
    }
    let ds = Dataset::load(&dataset_path)?;
    let augmented = rotational_augment(&ds, k)?;
    augmented.save(&out)?;
    println!(
        "summary episodes_before={} episodes_after={} k={k}",
        ds.n_episodes(),
        augmented.n_episodes()
    );
    Ok(())
}

pub fn stack(args: &[String]) -> CliResult {
    let flags = Flags::parse(args, &["dataset", "out", "history"])?;
    let dataset_path = flags.require_path("dataset")?;
    let out = flags.require_path("out")?;
    let h = flags
        .get_usize("history")?
        .ok_or_else(|| CliError::Usage("missing required flag '--history'".into()))?;
    if h == 0 {
        return Err(CliError::Usage("--history must be at least 1".into()));
    }
    let ds = Dataset::load(&dataset_path)?;
    let stacked = history_stack(&ds, h)?;
    stacked.save(&out)?;
    println!(
        "summary obs_dim_before={} obs_dim_after={} history={h}",
        ds.obs_dim, stacked.obs_dim
    );
    Ok(())
}

/// Builds one evaluation entry from a policy list item: a builtin name or
/// an artifact path.
fn build_entry(spec: &str, combos: &[Combo], cfg: &RunConfig) -> Result<EvalEntry, CliError> {
    let (name, policy): (String, Box<dyn EvalPolicy>) = match spec {
        "expert" => ("expert".into(), Box::new(ScriptedPolicy::expert())),
        "weak" => ("weak".into(), Box::new(ScriptedPolicy::weak(cfg.weak))),
        "behavior" => ("behavior".into(), Box::new(BehaviorPolicy::new(cfg.weak))),
        path => {
            let p = Path::new(path);
            let artifact = PolicyArtifact::load(p)
                .map_err(|e| CliError::Data(rrcb::Error::Format(format!("policy '{path}': {e}"))))?;
            let name = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.to_string());
            let task = artifact.task;
            let applicable: Vec<Combo> = combos.iter().copied().filter(|c| c.task == task).collect();
            return Ok(EvalEntry {
                name,
                policy: Box::new(LearnedPolicy::new(artifact)),
                combos: applicable,
            });
        }
    };
    Ok(EvalEntry { name, policy, combos: combos.to_vec() })
}

pub fn evaluate(args: &[String]) -> CliResult {
    let flags = Flags::parse(
        args,
        &["policies", "combos", "out", "robots", "goals", "seed", "jobs", "config"],
    )?;
    let out = flags.require_path("out")?;
    let mut cfg = load_config(&flags)?;
    cfg.eval.master_seed = flags.seed()?;
    if let Some(r) = flags.get_usize("robots")? {
        cfg.eval.n_robots = r;
    }
    if let Some(g) = flags.get_usize("goals")? {
        cfg.eval.goals_per_robot = Some(g);
    }
    if let Some(j) = flags.get_usize("jobs")? {
        cfg.eval.workers = j.max(1);
    }
    let combos: Vec<Combo> = flags
        .require("combos")?
        .split(',')
        .map(|c| Combo::parse(c.trim()).map_err(usage))
        .collect::<Result<_, _>>()?;
    let mut entries = Vec::new();
    for spec in flags.require("policies")?.split(',') {
        entries.push(build_entry(spec.trim(), &combos, &cfg)?);
    }

    let report = run_evaluation(&mut entries, &cfg.eval, &cfg.env_config())?;
    emit_report(&report, &out, "behavior")?;
    write_echo(&cfg, &out, true, "evaluate")?;
    let mut overall: Vec<String> = report
        .overall
        .iter()
        .map(|(n, s)| format!("{n}={s:.3}"))
        .collect();
    overall.sort();
    println!("summary combos={} {}", combos.len(), overall.join(" "));
    Ok(())
}
