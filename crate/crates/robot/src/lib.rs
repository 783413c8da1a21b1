//! Two-link planar manipulator as a sorting compartment: energy-consistent
//! dynamics, a reaching task with a reach-and-stop success test, seeded
//! policy evaluation, a cross-entropy-method trainer, and the mapping from
//! measured success rate to sorter parameters.

pub mod cem;
pub mod coupling;
pub mod dynamics;
pub mod env;
pub mod evaluate;
pub mod params;
pub mod policy;

pub use cem::{train_cem, CemConfig, GenerationStats, TrainingOutcome};
pub use coupling::{success_to_sorter, SorterCoupling};
pub use env::{EnvConfig, EpisodeCriterion, ManipulatorState, ReachEnv};
pub use evaluate::{evaluate_policy, Evaluation, SuccessReport};
pub use params::{InertiaModel, ManipulatorParams};
pub use policy::{Mlp, Policy, PolicyFile, PolicyRegistry, ServoPolicy, ZeroPolicy};

#[derive(Debug, thiserror::Error)]
pub enum RobotError {
    #[error("invalid manipulator parameters: {0}")]
    Param(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid policy: {0}")]
    Policy(String),
    #[error("unknown policy kind `{0}`")]
    UnknownPolicy(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
