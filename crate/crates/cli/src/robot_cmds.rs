//! Subcommands for the manipulator cell.

use std::path::{Path, PathBuf};

use circuflow_robot::cem::write_log_csv;
use circuflow_robot::{
    evaluate_policy, success_to_sorter, train_cem, CemConfig, EnvConfig, PolicyRegistry,
    ReachEnv, SuccessReport,
};
use clap::Args;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::CliError;
use crate::output::{csv_text, emit, out_dir, sha256_hex, to_json, write_file, Format};

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<(T, String), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(path.display().to_string(), e))?;
    let value = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok((value, text))
}

fn env_from(config: Option<&Path>) -> Result<ReachEnv, CliError> {
    let cfg = match config {
        Some(p) => read_json::<EnvConfig>(p)?.0,
        None => EnvConfig::default(),
    };
    Ok(ReachEnv::new(cfg)?)
}

#[derive(Debug, Args)]
pub struct RobotEvalArgs {
    /// `zero`, `servo`, or a policy file.
    #[arg(long, default_value = "servo")]
    pub policy: String,
    #[arg(long, default_value_t = 10_000)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Environment settings as JSON (defaults for any absent file).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Items per hour for the sorter coupling.
    #[arg(long, default_value_t = 600.0)]
    pub item_rate: f64,
    /// kg per item for the sorter coupling.
    #[arg(long, default_value_t = 0.05)]
    pub item_mass: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `csv` lists every episode.
    #[arg(long, value_enum, default_value = "json-summary")]
    pub format: Format,
}

#[derive(Serialize)]
struct EvalSummary<'a> {
    tool: &'static str,
    version: &'static str,
    policy_source: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    policy_sha256: Option<String>,
    environment: &'a EnvConfig,
    report: &'a SuccessReport,
    sorter: circuflow_robot::SorterCoupling,
}

pub fn run_robot_eval(a: &RobotEvalArgs) -> Result<(), CliError> {
    let env = env_from(a.config.as_deref())?;
    let registry = PolicyRegistry::builtin();
    let policy = registry.resolve(&a.policy, &env.config)?;
    let policy_sha256 = std::fs::read_to_string(&a.policy).ok().map(|t| sha256_hex(&t));
    if a.episodes == 0 {
        return Err(CliError::Usage("--episodes must be at least 1".into()));
    }
    let eval = evaluate_policy(&env, policy.as_ref(), a.episodes, a.seed)?;
    let r = &eval.report;
    let sorter = success_to_sorter(r.success_rate, a.item_mass, a.item_rate)?;
    let text = match a.format {
        Format::Table => format!(
            "policy {} seed {} episodes {}\nsuccess_rate = {:.4} ({} / {})\n\
             mean_final_distance = {:.6} m\nmean_return = {:.4}\naborted = {}\n\
             mean_step_time = {:.3e} s\nsorted_per_day = {:.1} kg\nrejected_per_day = {:.1} kg\n",
            r.policy,
            r.seed,
            r.episodes,
            r.success_rate,
            r.successes,
            r.episodes,
            r.mean_final_distance,
            r.mean_return,
            r.aborted,
            r.mean_step_time,
            sorter.sorted_per_day,
            sorter.rejected_per_day
        ),
        Format::Csv => csv_text(
            &["episode", "success", "success_step", "final_distance", "return", "steps", "aborted"],
            &eval
                .outcomes
                .iter()
                .enumerate()
                .map(|(i, o)| {
                    vec![
                        i.to_string(),
                        o.success.to_string(),
                        o.success_step.map(|s| s.to_string()).unwrap_or_default(),
                        o.final_distance.to_string(),
                        o.total_reward.to_string(),
                        o.steps.to_string(),
                        o.aborted.to_string(),
                    ]
                })
                .collect::<Vec<_>>(),
        ),
        Format::JsonSummary => to_json(&EvalSummary {
            tool: "circuflow",
            version: env!("CARGO_PKG_VERSION"),
            policy_source: &a.policy,
            policy_sha256,
            environment: &env.config,
            report: r,
            sorter,
        }),
    };
    emit(a.out.as_deref(), &text)
}

#[derive(Debug, Args)]
pub struct RobotTrainArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving `policy.json` and `training_log.csv`.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Trainer settings as JSON; the flags below override it.
    #[arg(long)]
    pub trainer: Option<PathBuf>,
    /// Environment settings as JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long)]
    pub population: Option<usize>,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// Episodes for the before/after evaluation; 0 skips it.
    #[arg(long, default_value_t = 1_000)]
    pub episodes: usize,
    #[arg(long, value_enum, default_value = "json-summary")]
    pub format: Format,
}

#[derive(Serialize)]
struct TrainSummary {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    trainer: CemConfig,
    policy_file: String,
    log_file: String,
    best_generation: usize,
    initial_validation_return: f64,
    best_validation_return: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_success_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trained_success_rate: Option<f64>,
}

pub fn run_robot_train(a: &RobotTrainArgs) -> Result<(), CliError> {
    let env = env_from(a.config.as_deref())?;
    let mut cfg = match &a.trainer {
        Some(p) => read_json::<CemConfig>(p)?.0,
        None => CemConfig::default(),
    };
    if let Some(g) = a.generations {
        cfg.generations = g;
    }
    if let Some(p) = a.population {
        cfg.population = p;
    }
    if let Some(h) = &a.hidden {
        cfg.hidden = h.clone();
    }
    let out = train_cem(&env, &cfg, a.seed)?;
    let dir = out_dir(&a.out)?;

    let mut file = out.policy.to_file();
    file.metadata = Some(serde_json::json!({
        "trainer": "cem",
        "seed": a.seed,
        "config": cfg,
        "environment": env.config,
        "best_generation": out.best_generation,
        "validation_return": out.best_return,
    }));
    let policy_path = dir.join("policy.json");
    write_file(&policy_path, file.to_json().as_bytes())?;
    let log_path = dir.join("training_log.csv");
    let mut log = Vec::new();
    write_log_csv(&out.log, &mut log)?;
    write_file(&log_path, &log)?;

    let (initial_rate, trained_rate) = if a.episodes > 0 {
        // Evaluation seeds are disjoint from the training streams.
        let before = evaluate_policy(&env, &out.initial, a.episodes, a.seed)?;
        let after = evaluate_policy(&env, &out.policy, a.episodes, a.seed)?;
        (Some(before.report.success_rate), Some(after.report.success_rate))
    } else {
        (None, None)
    };
    let summary = TrainSummary {
        tool: "circuflow",
        version: env!("CARGO_PKG_VERSION"),
        seed: a.seed,
        trainer: cfg,
        policy_file: policy_path.display().to_string(),
        log_file: log_path.display().to_string(),
        best_generation: out.best_generation,
        initial_validation_return: out.initial_return,
        best_validation_return: out.best_return,
        initial_success_rate: initial_rate,
        trained_success_rate: trained_rate,
    };
    let text = match a.format {
        Format::JsonSummary => to_json(&summary),
        _ => {
            let mut s = format!(
                "policy written to {}\nlog written to {}\nbest generation {} (validation return {:.4} -> {:.4})\n",
                summary.policy_file,
                summary.log_file,
                summary.best_generation,
                summary.initial_validation_return,
                summary.best_validation_return
            );
            if let (Some(b), Some(t)) = (initial_rate, trained_rate) {
                s.push_str(&format!("success rate {b:.4} -> {t:.4}\n"));
            }
            s
        }
    };
    emit(None, &text)
}
