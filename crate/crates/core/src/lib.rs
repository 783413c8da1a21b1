//! Compartmental mass-balance networks: model, simulation, metrics and
//! design search.

pub mod bundled;
pub mod compartments;
pub mod design;
pub mod export;
pub mod io;
pub mod metrics;
pub mod network;
pub mod parallel;
pub mod simulator;
pub mod validate;

pub use compartments::{CompartmentModel, KindRegistry, ParamError};
pub use network::{
    CompartmentId, Connection, Direction, MaterialType, Materials, Network, NetworkError,
    NetworkState, PortRef,
};
pub use simulator::{simulate, step, SimConfig, SimError, Trajectory};
pub use validate::{validate, ValidationReport, Violation};
