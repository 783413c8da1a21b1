//! Cross-entropy-method search over the weights of an [`Mlp`] policy.
//!
//! Each generation samples a population around the current mean, scores
//! every candidate on one fixed set of start states, and refits mean and
//! spread to the elite. The mean policy is scored on a fixed validation set after
//! every refit; the best-scoring mean is returned.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{ManipulatorState, ReachEnv, OBS_DIM};
use crate::evaluate::episode_rng;
use crate::policy::Mlp;
use crate::RobotError;

/// Stream ids below this are reserved for evaluation episodes.
const TRAIN_STREAM_BASE: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CemConfig {
    pub generations: usize,
    pub population: usize,
    pub elite_fraction: f64,
    /// Episodes each candidate is scored on. The start states are drawn once
    /// and shared by every candidate of every generation.
    pub episodes_per_candidate: usize,
    /// Episodes used to score the mean policy after each generation.
    pub validation_episodes: usize,
    pub hidden: Vec<usize>,
    /// Standard deviation of the initial weights, scaled by `1/√fan_in`.
    pub init_scale: f64,
    /// Initial sampling spread around the mean.
    pub initial_std: f64,
    /// Extra spread added after each refit, decaying linearly to zero at
    /// the last generation.
    pub extra_std: f64,
    /// Divide observations by [`EnvConfig::observation_scale`].
    ///
    /// [`EnvConfig::observation_scale`]: crate::env::EnvConfig::observation_scale
    pub normalize_inputs: bool,
    /// Carry each generation's elite into the next population.
    pub keep_elites: bool,
}

impl Default for CemConfig {
    fn default() -> Self {
        Self {
            generations: 120,
            population: 64,
            elite_fraction: 0.15,
            episodes_per_candidate: 48,
            validation_episodes: 64,
            hidden: vec![16],
            init_scale: 1.0,
            initial_std: 0.5,
            extra_std: 0.05,
            normalize_inputs: true,
            keep_elites: true,
        }
    }
}

impl CemConfig {
    pub fn validate(&self) -> Result<(), RobotError> {
        if self.population < 2 || self.episodes_per_candidate == 0 || self.validation_episodes == 0 {
            return Err(RobotError::Config(
                "population ≥ 2 and positive episode counts are required".into(),
            ));
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction <= 1.0) {
            return Err(RobotError::Config("elite_fraction must lie in (0, 1]".into()));
        }
        if self.keep_elites && self.elites() >= self.population {
            return Err(RobotError::Config(
                "keep_elites needs an elite smaller than the population".into(),
            ));
        }
        if self.hidden.contains(&0) {
            return Err(RobotError::Config("hidden layer sizes must be positive".into()));
        }
        for (name, v) in [
            ("init_scale", self.init_scale),
            ("initial_std", self.initial_std),
            ("extra_std", self.extra_std),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(RobotError::Config(format!("{name} must be nonnegative")));
            }
        }
        Ok(())
    }

    pub fn layers(&self) -> Vec<usize> {
        let mut l = vec![OBS_DIM];
        l.extend(&self.hidden);
        l.push(2);
        l
    }

    fn elites(&self) -> usize {
        ((self.population as f64 * self.elite_fraction).ceil() as usize).clamp(1, self.population)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub mean_return: f64,
    pub elite_mean_return: f64,
    pub best_return: f64,
    /// Validation return of the refitted mean policy.
    pub mean_policy_return: f64,
    pub mean_std: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub policy: Mlp,
    pub initial: Mlp,
    pub log: Vec<GenerationStats>,
    /// Validation return of the initial policy.
    pub initial_return: f64,
    /// Validation return of `policy`.
    pub best_return: f64,
    /// Generation that produced `policy`; 0 means the initial policy.
    pub best_generation: usize,
}

/// Randomly initialized network: weights `N(0, init_scale² / fan_in)`,
/// zero biases.
pub fn init_mlp(
    layers: &[usize],
    init_scale: f64,
    output_scale: f64,
    rng: &mut impl Rng,
) -> Result<Mlp, RobotError> {
    let mut params = Vec::with_capacity(Mlp::param_count(layers));
    for w in layers.windows(2) {
        let std = init_scale / (w[0] as f64).sqrt();
        for _ in 0..w[0] * w[1] {
            let z: f64 = StandardNormal.sample(rng);
            params.push(std * z);
        }
        params.extend(std::iter::repeat_n(0.0, w[1]));
    }
    Mlp::new(layers.to_vec(), params, output_scale)
}

/// The random-init policy that [`train_cem`] starts from under `seed`.
pub fn initial_policy(env: &ReachEnv, config: &CemConfig, seed: u64) -> Result<Mlp, RobotError> {
    config.validate()?;
    let mut rng = episode_rng(seed, TRAIN_STREAM_BASE - 1);
    let mlp = init_mlp(&config.layers(), config.init_scale, env.config.torque_limit, &mut rng)?;
    with_inputs(mlp, env, config)
}

fn with_inputs(mlp: Mlp, env: &ReachEnv, config: &CemConfig) -> Result<Mlp, RobotError> {
    if config.normalize_inputs {
        mlp.with_input_scale(&env.config.observation_scale())
    } else {
        Ok(mlp)
    }
}

fn starts(env: &ReachEnv, seed: u64, stream: u64, n: usize) -> Vec<ManipulatorState> {
    let mut rng = episode_rng(seed, stream);
    (0..n).map(|_| env.reset(&mut rng)).collect()
}

fn mean_return(env: &ReachEnv, policy: &Mlp, starts: &[ManipulatorState]) -> f64 {
    let total = starts.iter().fold(0.0, |acc, s| {
        let r = env.run_episode(policy, *s).total_reward;
        // Aborted episodes score as badly as possible.
        acc + if r.is_finite() { r } else { f64::MIN / 1e6 }
    });
    total / starts.len() as f64
}

pub fn train_cem(env: &ReachEnv, config: &CemConfig, seed: u64) -> Result<TrainingOutcome, RobotError> {
    let initial = initial_policy(env, config, seed)?;
    let layers = config.layers();
    let scale = env.config.torque_limit;
    let validation = starts(env, seed, TRAIN_STREAM_BASE, config.validation_episodes);
    let episode_starts = starts(env, seed, TRAIN_STREAM_BASE + 1, config.episodes_per_candidate);
    let pool = circuflow_core::parallel::pool();
    let initial_return = mean_return(env, &initial, &validation);

    let dim = initial.params().len();
    let mut mean = initial.params().to_vec();
    let mut std = vec![config.initial_std; dim];
    let mut best = (initial.clone(), initial_return, 0);
    let mut log = Vec::with_capacity(config.generations);
    let n_elite = config.elites();
    let mut carried: Vec<(Vec<f64>, f64)> = Vec::new();

    for g in 1..=config.generations {
        let mut rng: ChaCha8Rng = episode_rng(seed, TRAIN_STREAM_BASE + 1 + g as u64);
        let fresh: Vec<Vec<f64>> = (0..config.population - carried.len())
            .map(|_| {
                mean.iter()
                    .zip(&std)
                    .map(|(m, s)| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        m + s * z
                    })
                    .collect()
            })
            .collect();
        let fresh_scores: Vec<f64> = pool.install(|| {
            fresh
                .par_iter()
                .map(|p| {
                    let policy = Mlp::new(layers.clone(), p.clone(), scale)
                        .and_then(|m| with_inputs(m, env, config))
                        .expect("sampled parameters have the right shape");
                    mean_return(env, &policy, &episode_starts)
                })
                .collect()
        });
        // Carried elites keep their scores: the start states are fixed.
        let (mut candidates, mut scores): (Vec<Vec<f64>>, Vec<f64>) = carried.drain(..).unzip();
        candidates.extend(fresh);
        scores.extend(fresh_scores);
        let mut order: Vec<usize> = (0..config.population).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let elite = &order[..n_elite];
        if config.keep_elites {
            carried = elite.iter().map(|&i| (candidates[i].clone(), scores[i])).collect();
        }

        let decay = 1.0 - (g - 1) as f64 / config.generations as f64;
        for j in 0..dim {
            let m = elite.iter().map(|&i| candidates[i][j]).sum::<f64>() / n_elite as f64;
            let var = elite
                .iter()
                .map(|&i| (candidates[i][j] - m).powi(2))
                .sum::<f64>()
                / n_elite as f64;
            mean[j] = m;
            std[j] = var.sqrt() + config.extra_std * decay;
        }

        let mean_policy = with_inputs(Mlp::new(layers.clone(), mean.clone(), scale)?, env, config)?;
        let mean_policy_return = mean_return(env, &mean_policy, &validation);
        if mean_policy_return > best.1 {
            best = (mean_policy, mean_policy_return, g);
        }
        let stats = GenerationStats {
            generation: g,
            mean_return: scores.iter().sum::<f64>() / scores.len() as f64,
            elite_mean_return: elite.iter().map(|&i| scores[i]).sum::<f64>() / n_elite as f64,
            best_return: scores[order[0]],
            mean_policy_return,
            mean_std: std.iter().sum::<f64>() / dim as f64,
        };
        log::info!(
            "generation {g}: mean {:.4} elite {:.4} validation {:.4}",
            stats.mean_return,
            stats.elite_mean_return,
            stats.mean_policy_return
        );
        log.push(stats);
    }
    if best.2 == 0 && config.generations > 0 {
        log::warn!("no generation improved on the initial policy");
    }
    Ok(TrainingOutcome {
        policy: best.0,
        initial,
        log,
        initial_return,
        best_return: best.1,
        best_generation: best.2,
    })
}

/// Writes the training log as CSV, one row per generation.
pub fn write_log_csv<W: Write>(log: &[GenerationStats], out: W) -> Result<(), RobotError> {
    let mut w = csv::Writer::from_writer(out);
    for row in log {
        w.serialize(row)?;
    }
    w.flush().map_err(|source| RobotError::Io {
        path: "training log".into(),
        source,
    })?;
    Ok(())
}
