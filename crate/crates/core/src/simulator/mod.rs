//! Fixed-step integration of the coupled compartment ODEs.

use serde::{Deserialize, Serialize};

use crate::compartments::Role;
use crate::network::{CompartmentId, Network, NetworkError, NetworkState};
use crate::validate::ValidationReport;

mod assembly;
pub mod integrator;
mod trajectory;

use assembly::{Assembly, Scratch};
pub use integrator::{Euler, Integrator, IntegratorRegistry, Rk4, Workspace};
pub use trajectory::{
    check_conservation, ConservationReport, FlowRecord, LedgerEntry, MaterialDrift, SimEvent,
    Trajectory,
};

/// Default per-step relative tolerance of the conservation check.
pub const DEFAULT_CONSERVATION_TOL: f64 = 1e-14;

fn default_method() -> String {
    "rk4".to_string()
}

fn default_tol() -> f64 {
    DEFAULT_CONSERVATION_TOL
}

/// Step size, horizon (both in seconds) and integration method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    #[serde(default = "default_method")]
    pub method: String,
    /// Allowed ledger drift per step, relative to the total mass in play.
    #[serde(default = "default_tol")]
    pub conservation_tol: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1.0,
            horizon: 1.0,
            method: default_method(),
            conservation_tol: DEFAULT_CONSERVATION_TOL,
        }
    }
}

impl SimConfig {
    pub fn new(dt: f64, horizon: f64) -> Self {
        Self {
            dt,
            horizon,
            ..Self::default()
        }
    }

    pub fn with_method(mut self, method: &str) -> Self {
        self.method = method.to_string();
        self
    }

    pub fn check(&self) -> Result<(), String> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.horizon.is_finite() && self.horizon >= self.dt) {
            return Err(format!(
                "horizon {} must be at least dt {}",
                self.horizon, self.dt
            ));
        }
        if !(self.conservation_tol.is_finite() && self.conservation_tol > 0.0) {
            return Err(format!(
                "conservation_tol must be positive, got {}",
                self.conservation_tol
            ));
        }
        if IntegratorRegistry::builtin().get(&self.method).is_none() {
            return Err(format!("unknown integration method `{}`", self.method));
        }
        Ok(())
    }

    /// Number of steps, `⌈horizon / dt⌉`, ignoring round-off in the ratio.
    pub fn steps(&self) -> usize {
        let ratio = self.horizon / self.dt;
        let nearest = ratio.round();
        if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            nearest as usize
        } else {
            ratio.ceil() as usize
        }
    }

    /// Time grid `0, dt, 2 dt, …, horizon`; the last step is shortened to
    /// land on the horizon.
    pub fn times(&self) -> Vec<f64> {
        let n = self.steps();
        let mut t: Vec<f64> = (0..n).map(|i| i as f64 * self.dt).collect();
        t.push(self.horizon);
        t
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("network is invalid:\n{0}")]
    Invalid(ValidationReport),
    #[error("non-finite {what} in compartment {compartment}")]
    NonFinite {
        compartment: CompartmentId,
        what: String,
    },
    #[error("compartment {compartment} emits on unconnected port `{port}`")]
    UnconnectedFlow {
        compartment: CompartmentId,
        port: String,
    },
    #[error("unknown integration method `{0}`")]
    UnknownMethod(String),
    #[error("invalid simulation settings: {0}")]
    Config(String),
    #[error(transparent)]
    State(#[from] NetworkError),
}

/// Steps one network forward in time, carrying the ledger accumulators.
pub struct Simulator<'a> {
    assembly: Assembly<'a>,
    integrator: std::sync::Arc<dyn Integrator>,
    scratch: Scratch,
    work: Workspace,
    x: Vec<f64>,
    k1: Vec<f64>,
    time: f64,
    initial: Vec<f64>,
}

impl<'a> Simulator<'a> {
    /// `dt_ref` is the reference time of the availability guard, normally
    /// the nominal step.
    pub fn new(
        network: &'a Network,
        state: &NetworkState,
        method: &str,
        dt_ref: f64,
    ) -> Result<Self, SimError> {
        network.check_state(state)?;
        let integrator = IntegratorRegistry::builtin()
            .get(method)
            .ok_or_else(|| SimError::UnknownMethod(method.to_string()))?;
        let assembly = Assembly::new(network, dt_ref)?;
        let mut x = vec![0.0; assembly.dim()];
        let q = assembly.q;
        for (p, store) in state.stores.iter().enumerate() {
            x[p * q..(p + 1) * q].copy_from_slice(store);
        }
        let scratch = assembly.scratch();
        let dim = assembly.dim();
        Ok(Self {
            initial: x[..assembly.n_stores()].to_vec(),
            assembly,
            integrator,
            scratch,
            work: Workspace::default(),
            x,
            k1: vec![0.0; dim],
            time: 0.0,
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn state(&self) -> NetworkState {
        let q = self.assembly.q;
        NetworkState {
            stores: self.x[..self.assembly.n_stores()]
                .chunks(q.max(1))
                .take(self.assembly.network.compartments.len())
                .map(<[f64]>::to_vec)
                .collect(),
        }
    }

    /// Connection rates at the current state.
    pub fn flows(&mut self) -> Result<FlowRecord, SimError> {
        self.assembly
            .eval(&self.x, &mut self.scratch, &mut self.k1)?;
        Ok(FlowRecord {
            time: self.time,
            rates: self.scratch.conn_rates.clone(),
        })
    }

    /// Advances by `h`, returning the connection rates at the start of the
    /// step and any events raised by the step.
    pub fn step(&mut self, h: f64) -> Result<(FlowRecord, Vec<SimEvent>), SimError> {
        let Self {
            assembly,
            integrator,
            scratch,
            work,
            x,
            k1,
            ..
        } = self;
        assembly.eval(x, scratch, k1)?;
        let record = FlowRecord {
            time: self.time,
            rates: scratch.conn_rates.clone(),
        };
        let before: Vec<f64> = x[..assembly.n_stores()].to_vec();
        let mut field = |y: &[f64], dy: &mut [f64]| assembly.eval(y, scratch, dy);
        integrator.step(&mut field, x, k1, h, work)?;
        self.time += h;
        let events = self.post_step(&before);
        Ok((record, events))
    }

    fn post_step(&mut self, before: &[f64]) -> Vec<SimEvent> {
        let q = self.assembly.q;
        let network = self.assembly.network;
        let mut events = Vec::new();
        for (p, c) in network.compartments.iter().enumerate() {
            for m in 0..q {
                let i = p * q + m;
                let v = self.x[i];
                if v < 0.0 {
                    events.push(SimEvent::Clamped {
                        time: self.time,
                        compartment: c.id,
                        material: network.materials.label(m).to_string(),
                        amount: -v,
                    });
                    self.x[i] = 0.0;
                }
                if c.role() == Role::Source && before[i] > 0.0 {
                    let threshold = 1e-12 * self.initial[i];
                    if self.x[i] <= threshold && before[i] > threshold {
                        events.push(SimEvent::ReserveExhausted {
                            time: self.time,
                            compartment: c.id,
                            material: network.materials.label(m).to_string(),
                        });
                        log::info!("reserve of {} exhausted at t = {}", c.id, self.time);
                    }
                }
            }
        }
        events
    }

    pub(crate) fn ledger(&self) -> LedgerEntry {
        let q = self.assembly.q;
        let network = self.assembly.network;
        let mut e = LedgerEntry::zeros(q);
        for (p, c) in network.compartments.iter().enumerate() {
            for m in 0..q {
                let i = p * q + m;
                match c.role() {
                    Role::Internal => e.total_stored[m] += self.x[i],
                    Role::Source => e.cumulative_extracted[m] += self.initial[i] - self.x[i],
                    Role::Sink => e.cumulative_sunk[m] += self.x[i] - self.initial[i],
                }
            }
        }
        let conv = self.assembly.conversion_offset();
        e.cumulative_converted
            .copy_from_slice(&self.x[conv..conv + q]);
        e
    }

    pub(crate) fn cumulative_flows(&self) -> Vec<f64> {
        let o = self.assembly.flow_offset();
        self.x[o..o + self.assembly.n_conn].to_vec()
    }

    pub(crate) fn stores(&self) -> &[f64] {
        &self.x[..self.assembly.n_stores()]
    }
}

/// One explicit step of the assembled vector field from `state`.
pub fn step(
    network: &Network,
    state: &NetworkState,
    dt: f64,
    method: &str,
) -> Result<(NetworkState, FlowRecord), SimError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(SimError::Config(format!("dt must be positive, got {dt}")));
    }
    let report = network.validate();
    if !report.is_valid() {
        return Err(SimError::Invalid(report));
    }
    let mut sim = Simulator::new(network, state, method, dt)?;
    let (record, _) = sim.step(dt)?;
    Ok((sim.state(), record))
}

/// Simulates the network from its initial stores over `config.horizon`.
pub fn simulate(network: &Network, config: &SimConfig) -> Result<Trajectory, SimError> {
    config.check().map_err(SimError::Config)?;
    let report = network.validate();
    if !report.is_valid() {
        return Err(SimError::Invalid(report));
    }
    let mut sim = Simulator::new(network, &network.initial_state(), &config.method, config.dt)?;
    let times = config.times();
    let n = times.len();
    let mut traj = Trajectory::new(network, config.clone(), n);
    traj.push(times[0], sim.stores(), sim.ledger(), sim.cumulative_flows());
    for w in times.windows(2) {
        let (record, events) = sim.step(w[1] - w[0])?;
        traj.flows.push(record);
        traj.events.extend(events);
        traj.push(w[1], sim.stores(), sim.ledger(), sim.cumulative_flows());
    }
    let mut last = sim.flows()?;
    last.time = times[n - 1];
    traj.flows.push(last);
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_count_tolerates_round_off() {
        assert_eq!(SimConfig::new(0.1, 1.0).steps(), 10);
        assert_eq!(SimConfig::new(0.1, 10.0).steps(), 100);
        assert_eq!(SimConfig::new(0.3, 1.0).steps(), 4);
        let t = SimConfig::new(0.3, 1.0).times();
        assert_eq!(t.len(), 5);
        assert_eq!(*t.last().unwrap(), 1.0);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn config_checks() {
        assert!(SimConfig::new(0.0, 1.0).check().is_err());
        assert!(SimConfig::new(2.0, 1.0).check().is_err());
        assert!(SimConfig::new(0.1, 1.0).with_method("leapfrog").check().is_err());
        assert!(SimConfig::new(0.1, 1.0).with_method("euler").check().is_ok());
    }

    #[test]
    fn empty_network_step_is_identity() {
        let net = Network::empty("none");
        let state = net.initial_state();
        let (next, flows) = step(&net, &state, 0.5, "rk4").unwrap();
        assert_eq!(next, state);
        assert!(flows.rates.is_empty());
    }
}
