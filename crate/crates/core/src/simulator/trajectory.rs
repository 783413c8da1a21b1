use serde::{Deserialize, Serialize};

use crate::network::{CompartmentId, Network};

use super::SimConfig;

/// Instantaneous rate on every connection, aligned with
/// `Network::connections`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub time: f64,
    pub rates: Vec<f64>,
}

/// Per-material bookkeeping at one instant. Every vector has one entry per
/// material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    /// Mass held by internal (non-source, non-sink) compartments.
    pub total_stored: Vec<f64>,
    pub cumulative_extracted: Vec<f64>,
    pub cumulative_sunk: Vec<f64>,
    /// Net mass created in this material by type-changing compartments.
    pub cumulative_converted: Vec<f64>,
}

impl LedgerEntry {
    pub fn zeros(q: usize) -> Self {
        Self {
            total_stored: vec![0.0; q],
            cumulative_extracted: vec![0.0; q],
            cumulative_sunk: vec![0.0; q],
            cumulative_converted: vec![0.0; q],
        }
    }

    /// `stored + sunk − extracted − converted`; constant in exact arithmetic.
    pub fn balance(&self, m: usize) -> f64 {
        self.total_stored[m] + self.cumulative_sunk[m]
            - self.cumulative_extracted[m]
            - self.cumulative_converted[m]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SimEvent {
    /// A store went negative under the explicit step and was reset to zero.
    Clamped {
        time: f64,
        compartment: CompartmentId,
        material: String,
        amount: f64,
    },
    ReserveExhausted {
        time: f64,
        compartment: CompartmentId,
        material: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub network_name: String,
    pub config: SimConfig,
    pub compartments: Vec<CompartmentId>,
    pub materials: Vec<String>,
    pub connection_ids: Vec<String>,
    /// Ids of the designated unsustainable connections.
    pub unsustainable: Vec<String>,
    /// Ids of the designated return connections.
    pub returns: Vec<String>,
    /// Ids of connections leaving a source compartment.
    pub extraction: Vec<String>,
    pub times: Vec<f64>,
    /// Store snapshot per time, laid out `[compartment * Q + material]` in
    /// network order.
    pub states: Vec<Vec<f64>>,
    /// Connection rates at each time; the rate recorded at `times[i]` is the
    /// one at the start of step `i`.
    pub flows: Vec<FlowRecord>,
    /// Running integral of every connection rate, same quadrature as the
    /// stores.
    pub cumulative_flows: Vec<Vec<f64>>,
    pub ledger: Vec<LedgerEntry>,
    pub events: Vec<SimEvent>,
}

impl Trajectory {
    pub(crate) fn new(network: &Network, config: SimConfig, capacity: usize) -> Self {
        Self {
            network_name: network.name.clone(),
            config,
            compartments: network.compartments.iter().map(|c| c.id).collect(),
            materials: network
                .materials
                .iter()
                .map(|m| m.label.clone())
                .collect(),
            connection_ids: network.connections.iter().map(|c| c.id.clone()).collect(),
            unsustainable: network.unsustainable.clone(),
            returns: network.returns.clone(),
            extraction: network
                .connections
                .iter()
                .filter(|c| network.is_extraction(c))
                .map(|c| c.id.clone())
                .collect(),
            times: Vec::with_capacity(capacity),
            states: Vec::with_capacity(capacity),
            flows: Vec::with_capacity(capacity),
            cumulative_flows: Vec::with_capacity(capacity),
            ledger: Vec::with_capacity(capacity),
            events: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, t: f64, stores: &[f64], ledger: LedgerEntry, cum: Vec<f64>) {
        self.times.push(t);
        self.states.push(stores.to_vec());
        self.ledger.push(ledger);
        self.cumulative_flows.push(cum);
    }

    pub fn steps(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    pub fn final_ledger(&self) -> Option<&LedgerEntry> {
        self.ledger.last()
    }

    /// Stored mass of compartment `k`, material position `m`, at sample `i`.
    pub fn store(&self, i: usize, k: u32, m: usize) -> Option<f64> {
        let p = self.compartments.iter().position(|c| c.k == k)?;
        self.states.get(i)?.get(p * self.materials.len() + m).copied()
    }

    pub fn connection_position(&self, id: &str) -> Option<usize> {
        self.connection_ids.iter().position(|c| c == id)
    }

    /// Total mass across every compartment per material at sample `i`.
    pub fn total_mass(&self, i: usize) -> Vec<f64> {
        let q = self.materials.len();
        let mut total = vec![0.0; q];
        for (j, v) in self.states[i].iter().enumerate() {
            total[j % q] += v;
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialDrift {
    pub material: String,
    /// Largest `|balance(t) − balance(0)|` over the run, kg.
    pub max_drift: f64,
    /// Sample index where `max_drift` occurs.
    pub worst_step: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub materials: Vec<MaterialDrift>,
    /// Mass scale the tolerance is relative to: the largest total mass of any
    /// material seen during the run.
    pub scale: f64,
    pub tolerance: f64,
    pub steps: usize,
    /// First sample whose drift exceeds `tolerance · scale · i`.
    pub first_violation: Option<usize>,
    pub passed: bool,
}

impl ConservationReport {
    pub fn max_relative_drift(&self) -> f64 {
        let worst = self
            .materials
            .iter()
            .map(|m| m.max_drift)
            .fold(0.0, f64::max);
        if self.scale > 0.0 {
            worst / self.scale
        } else {
            worst
        }
    }
}

/// Checks the ledger identity at every recorded step.
pub fn check_conservation(trajectory: &Trajectory) -> ConservationReport {
    let q = trajectory.materials.len();
    let tol = trajectory.config.conservation_tol;
    let mut scale: f64 = 0.0;
    for i in 0..trajectory.states.len() {
        for v in trajectory.total_mass(i) {
            scale = scale.max(v.abs());
        }
    }
    let mut materials: Vec<MaterialDrift> = trajectory
        .materials
        .iter()
        .map(|label| MaterialDrift {
            material: label.clone(),
            max_drift: 0.0,
            worst_step: 0,
        })
        .collect();
    let mut first_violation = None;
    if let Some(start) = trajectory.ledger.first() {
        let base: Vec<f64> = (0..q).map(|m| start.balance(m)).collect();
        for (i, entry) in trajectory.ledger.iter().enumerate().skip(1) {
            for (m, d) in materials.iter_mut().enumerate() {
                let drift = (entry.balance(m) - base[m]).abs();
                if !(drift <= d.max_drift) {
                    d.max_drift = drift;
                    d.worst_step = i;
                }
                if first_violation.is_none() && !(drift <= tol * scale * i as f64) {
                    first_violation = Some(i);
                }
            }
        }
    }
    ConservationReport {
        materials,
        scale,
        tolerance: tol,
        steps: trajectory.steps(),
        passed: first_violation.is_none(),
        first_violation,
    }
}
