//! Seeded, parallel success-rate evaluation.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{EpisodeOutcome, ReachEnv};
use crate::policy::Policy;
use crate::RobotError;

/// Random stream of episode `index` under `seed`. Streams are independent of
/// how episodes are scheduled across workers.
pub fn episode_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessReport {
    pub policy: String,
    pub seed: u64,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Over episodes that were not aborted, m.
    pub mean_final_distance: f64,
    pub mean_return: f64,
    pub aborted: usize,
    /// Wall-clock seconds per control step; the only field that varies
    /// between identical runs.
    pub mean_step_time: f64,
}

impl SuccessReport {
    /// Equality on every field except the timing.
    pub fn same_outcome(&self, other: &Self) -> bool {
        Self {
            mean_step_time: 0.0,
            ..self.clone()
        } == Self {
            mean_step_time: 0.0,
            ..other.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: SuccessReport,
    /// One entry per episode, in episode order.
    pub outcomes: Vec<EpisodeOutcome>,
}

/// Runs `episodes` episodes of `policy`, episode `i` starting from a state
/// drawn from [`episode_rng`]`(seed, i)`. Aggregation is sequential in
/// episode order, so the result does not depend on the worker count.
pub fn evaluate_policy(
    env: &ReachEnv,
    policy: &dyn Policy,
    episodes: usize,
    seed: u64,
) -> Result<Evaluation, RobotError> {
    if episodes == 0 {
        return Err(RobotError::Config("at least one episode is required".into()));
    }
    let started = Instant::now();
    let outcomes: Vec<EpisodeOutcome> = circuflow_core::parallel::pool().install(|| {
        (0..episodes as u64)
            .into_par_iter()
            .map(|i| env.run_episode(policy, env.reset(&mut episode_rng(seed, i))))
            .collect()
    });
    let elapsed = started.elapsed().as_secs_f64();
    let successes = outcomes.iter().filter(|o| o.success).count();
    let finished: Vec<&EpisodeOutcome> = outcomes.iter().filter(|o| !o.aborted).collect();
    let mean = |f: fn(&EpisodeOutcome) -> f64| {
        if finished.is_empty() {
            f64::NAN
        } else {
            finished.iter().fold(0.0, |acc, o| acc + f(o)) / finished.len() as f64
        }
    };
    let steps: usize = outcomes.iter().map(|o| o.steps).sum();
    let report = SuccessReport {
        policy: policy.kind().to_string(),
        seed,
        episodes,
        successes,
        success_rate: successes as f64 / episodes as f64,
        mean_final_distance: mean(|o| o.final_distance),
        mean_return: mean(|o| o.total_reward),
        aborted: episodes - finished.len(),
        mean_step_time: elapsed / steps.max(1) as f64,
    };
    Ok(Evaluation { report, outcomes })
}

/// A published result for a deep-RL agent trained on this reaching task
/// with a different physics engine. Kept as metadata only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceResult {
    pub algorithm: &'static str,
    pub reward_after_training: f64,
    /// s
    pub training_time: f64,
    /// s per timestep on CPU and GPU
    pub step_time_cpu: f64,
    pub step_time_gpu: f64,
    pub success_rate: f64,
    /// Hyperparameters as reported.
    pub hyperparameters: &'static str,
}

pub const REFERENCE_RESULTS: [ReferenceResult; 4] = [
    ReferenceResult {
        algorithm: "A2C",
        reward_after_training: -10.99,
        training_time: 296.0,
        step_time_cpu: 0.00075,
        step_time_gpu: 0.0009,
        success_rate: 0.6091,
        hyperparameters: "mlp; lr 0.0007; n_steps 5; gamma 0.99; ent_coef 0; vf_coef 0.5; RMSprop",
    },
    ReferenceResult {
        algorithm: "DDPG",
        reward_after_training: -4.73,
        training_time: 861.0,
        step_time_cpu: 0.00058,
        step_time_gpu: 0.00071,
        success_rate: 0.9337,
        hyperparameters: "mlp; lr 0.001; batch 256; tau 0.005; gamma 0.99",
    },
    ReferenceResult {
        algorithm: "PPO",
        reward_after_training: -43.79,
        training_time: 255.0,
        step_time_cpu: 0.00073,
        step_time_gpu: 0.00092,
        success_rate: 0.4183,
        hyperparameters: "mlp; lr 0.0003; n_steps 2048; batch 64; epochs 10; gamma 0.99; ent_coef 0; vf_coef 0.5",
    },
    ReferenceResult {
        algorithm: "SAC",
        reward_after_training: -5.23,
        training_time: 1489.0,
        step_time_cpu: 0.00079,
        step_time_gpu: 0.00102,
        success_rate: 0.9597,
        hyperparameters: "mlp; lr 0.0003; batch 256; tau 0.005; gamma 0.99; train_freq 1; ent_coef auto",
    },
];

pub fn reference(algorithm: &str) -> Option<&'static ReferenceResult> {
    REFERENCE_RESULTS
        .iter()
        .find(|r| r.algorithm.eq_ignore_ascii_case(algorithm))
}
