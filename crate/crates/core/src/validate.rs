//! Structural validation of networks.
//!
//! Violations are data: [`validate`] collects every problem it finds and
//! never fails.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use crate::compartments::Role;
use crate::network::{CompartmentId, Direction, Network, PortRef};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    NoMaterials,
    DuplicateMaterialIndex { index: u32 },
    DuplicateMaterialLabel { label: String },
    MaterialIndexRange { index: u32, count: usize },
    DuplicateCompartmentIndex { k: u32 },
    CompartmentIndexRange { k: u32, count: usize },
    NonDiagonalStage { id: CompartmentId, kind: String },
    TransportWithinOneStage { id: CompartmentId },
    TransportStageMissing { id: CompartmentId, stage: u32 },
    UnknownStoreMaterial { k: u32, label: String },
    InvalidInitialMass { k: u32, label: String, mass: f64 },
    SourceReserveMismatch { k: u32, reserve: f64, initial: f64 },
    DuplicateConnectionId { id: String },
    UnknownPort { connection: String, port: String },
    WrongPortDirection { connection: String, port: String, expected: Direction },
    MaterialMismatch { connection: String, from: String, to: String },
    OutputPortReused { port: String, connections: Vec<String> },
    UnconnectedOutput { port: String },
    UnknownDesignation { list: &'static str, id: String },
    UnknownObservedConnection { k: u32, id: String },
    AlgebraicLoop { compartments: Vec<u32> },
    InvalidSimulation { message: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            NoMaterials => write!(f, "network has compartments but no materials"),
            DuplicateMaterialIndex { index } => write!(f, "duplicate material index {index}"),
            DuplicateMaterialLabel { label } => write!(f, "duplicate material label `{label}`"),
            MaterialIndexRange { index, count } => {
                write!(f, "material index {index} outside 1..={count}")
            }
            DuplicateCompartmentIndex { k } => write!(f, "duplicate compartment index k={k}"),
            CompartmentIndexRange { k, count } => {
                write!(f, "compartment index k={k} outside 1..={count}")
            }
            NonDiagonalStage { id, kind } => {
                write!(f, "{kind} compartment {id} must have i = j = k")
            }
            TransportWithinOneStage { id } => {
                write!(f, "transport compartment {id} must join two distinct stages")
            }
            TransportStageMissing { id, stage } => {
                write!(f, "transport compartment {id} references missing stage {stage}")
            }
            UnknownStoreMaterial { k, label } => {
                write!(f, "compartment c{k} stores unknown material `{label}`")
            }
            InvalidInitialMass { k, label, mass } => {
                write!(f, "compartment c{k} has invalid initial mass {mass} of `{label}`")
            }
            SourceReserveMismatch { k, reserve, initial } => write!(
                f,
                "source c{k} has reserve {reserve} but initial store {initial}"
            ),
            DuplicateConnectionId { id } => write!(f, "duplicate connection id `{id}`"),
            UnknownPort { connection, port } => {
                write!(f, "connection `{connection}` references unknown port {port}")
            }
            WrongPortDirection {
                connection,
                port,
                expected,
            } => write!(
                f,
                "connection `{connection}`: port {port} is not an {expected} port"
            ),
            MaterialMismatch {
                connection,
                from,
                to,
            } => write!(
                f,
                "connection `{connection}` joins material `{from}` to `{to}`"
            ),
            OutputPortReused { port, connections } => write!(
                f,
                "output port {port} feeds several connections: {}",
                connections.join(", ")
            ),
            UnconnectedOutput { port } => {
                write!(f, "output port {port} can carry flow but is not connected")
            }
            UnknownDesignation { list, id } => {
                write!(f, "`{list}` lists unknown connection `{id}`")
            }
            UnknownObservedConnection { k, id } => {
                write!(f, "compartment c{k} observes unknown connection `{id}`")
            }
            AlgebraicLoop { compartments } => {
                let ks: Vec<String> = compartments.iter().map(|k| format!("c{k}")).collect();
                write!(
                    f,
                    "instantaneous dependency loop through {}",
                    ks.join(" ")
                )
            }
            InvalidSimulation { message } => write!(f, "simulation settings: {message}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

pub fn validate(network: &Network) -> ValidationReport {
    let mut out = Vec::new();
    check_materials(network, &mut out);
    check_compartments(network, &mut out);
    check_connections(network, &mut out);
    check_designations(network, &mut out);
    if let Err(loop_ks) = evaluation_order(network) {
        out.push(Violation::AlgebraicLoop {
            compartments: loop_ks,
        });
    }
    if let Err(message) = network.simulation.check() {
        out.push(Violation::InvalidSimulation { message });
    }
    ValidationReport { violations: out }
}

fn check_materials(network: &Network, out: &mut Vec<Violation>) {
    let q = network.materials.len();
    if q == 0 && !network.compartments.is_empty() {
        out.push(Violation::NoMaterials);
    }
    let mut indices = HashSet::new();
    let mut labels = HashSet::new();
    for m in network.materials.iter() {
        if !indices.insert(m.index) {
            out.push(Violation::DuplicateMaterialIndex { index: m.index });
        }
        if !labels.insert(m.label.as_str()) {
            out.push(Violation::DuplicateMaterialLabel {
                label: m.label.clone(),
            });
        }
        if m.index < 1 || m.index as usize > q {
            out.push(Violation::MaterialIndexRange {
                index: m.index,
                count: q,
            });
        }
    }
}

fn check_compartments(network: &Network, out: &mut Vec<Violation>) {
    let n = network.compartments.len();
    let mut seen = HashSet::new();
    let stages: HashSet<u32> = network
        .compartments
        .iter()
        .filter(|c| c.kind != "transport")
        .map(|c| c.id.k)
        .collect();
    for c in &network.compartments {
        let id = c.id;
        if !seen.insert(id.k) {
            out.push(Violation::DuplicateCompartmentIndex { k: id.k });
        }
        if id.k < 1 || id.k as usize > n {
            out.push(Violation::CompartmentIndexRange { k: id.k, count: n });
        }
        if c.kind == "transport" {
            if id.i == id.j {
                out.push(Violation::TransportWithinOneStage { id });
            }
            for stage in [id.i, id.j] {
                if !stages.contains(&stage) {
                    out.push(Violation::TransportStageMissing { id, stage });
                }
            }
        } else if !id.is_diagonal() {
            out.push(Violation::NonDiagonalStage {
                id,
                kind: c.kind.clone(),
            });
        }
        for (label, &mass) in &c.initial_mass {
            if network.materials.position(label).is_none() {
                out.push(Violation::UnknownStoreMaterial {
                    k: id.k,
                    label: label.clone(),
                });
            }
            if !(mass.is_finite() && mass >= 0.0) {
                out.push(Violation::InvalidInitialMass {
                    k: id.k,
                    label: label.clone(),
                    mass,
                });
            }
        }
        if c.role() == Role::Source {
            if let (Some(reserve), Some(port)) = (c.param("reserve"), c.model().ports().first()) {
                let label = network.materials.get(port.material).map(|m| m.label.as_str());
                let initial = label
                    .and_then(|l| c.initial_mass.get(l).copied())
                    .unwrap_or(0.0);
                if initial != reserve {
                    out.push(Violation::SourceReserveMismatch {
                        k: id.k,
                        reserve,
                        initial,
                    });
                }
            }
        }
    }
}

fn check_connections(network: &Network, out: &mut Vec<Violation>) {
    let mut ids = HashSet::new();
    let mut used_outputs: BTreeMap<(u32, String), Vec<String>> = BTreeMap::new();
    for conn in &network.connections {
        if !ids.insert(conn.id.as_str()) {
            out.push(Violation::DuplicateConnectionId {
                id: conn.id.clone(),
            });
        }
        let from = resolve(network, &conn.id, &conn.from, Direction::Output, out);
        let to = resolve(network, &conn.id, &conn.to, Direction::Input, out);
        if let (Some(from), Some(to)) = (from, to) {
            if from != to {
                out.push(Violation::MaterialMismatch {
                    connection: conn.id.clone(),
                    from,
                    to,
                });
            }
        }
        used_outputs
            .entry((conn.from.k, conn.from.port.clone()))
            .or_default()
            .push(conn.id.clone());
    }
    for ((k, port), conns) in &used_outputs {
        if conns.len() > 1 {
            out.push(Violation::OutputPortReused {
                port: PortRef {
                    k: *k,
                    port: port.clone(),
                }
                .to_string(),
                connections: conns.clone(),
            });
        }
    }
    for c in &network.compartments {
        for p in c.model().ports() {
            if p.direction == Direction::Output
                && p.required
                && !used_outputs.contains_key(&(c.id.k, p.name.clone()))
            {
                out.push(Violation::UnconnectedOutput {
                    port: format!("c{}.{}", c.id.k, p.name),
                });
            }
        }
    }
}

/// Returns the port's material label when it exists with the expected
/// direction.
fn resolve(
    network: &Network,
    conn: &str,
    r: &PortRef,
    expected: Direction,
    out: &mut Vec<Violation>,
) -> Option<String> {
    match network.port(r) {
        None => {
            out.push(Violation::UnknownPort {
                connection: conn.to_string(),
                port: r.to_string(),
            });
            None
        }
        Some(p) if p.direction != expected => {
            out.push(Violation::WrongPortDirection {
                connection: conn.to_string(),
                port: r.to_string(),
                expected,
            });
            None
        }
        Some(p) => Some(p.material.label),
    }
}

fn check_designations(network: &Network, out: &mut Vec<Violation>) {
    let ids: HashSet<&str> = network.connections.iter().map(|c| c.id.as_str()).collect();
    for (list, entries) in [
        ("unsustainable", &network.unsustainable),
        ("return", &network.returns),
    ] {
        for id in entries {
            if !ids.contains(id.as_str()) {
                out.push(Violation::UnknownDesignation {
                    list,
                    id: id.clone(),
                });
            }
        }
    }
    for c in &network.compartments {
        for id in c.model().observes() {
            if !ids.contains(id.as_str()) {
                out.push(Violation::UnknownObservedConnection {
                    k: c.id.k,
                    id: id.clone(),
                });
            }
        }
    }
}

/// Order in which compartment rates must be evaluated so that every
/// feedthrough compartment sees complete inflows and observed rates.
/// Non-feedthrough compartments come first, in file order. On failure returns
/// the compartment indices caught in an instantaneous dependency loop.
pub(crate) fn evaluation_order(network: &Network) -> Result<Vec<usize>, Vec<u32>> {
    let comps = &network.compartments;
    let position: HashMap<u32, usize> = comps
        .iter()
        .enumerate()
        .map(|(p, c)| (c.id.k, p))
        .collect();
    let feedthrough: Vec<bool> = comps.iter().map(|c| c.model().feedthrough()).collect();
    let conn_from: HashMap<&str, usize> = network
        .connections
        .iter()
        .filter_map(|c| position.get(&c.from.k).map(|&p| (c.id.as_str(), p)))
        .collect();

    let mut edges: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); comps.len()];
    for conn in &network.connections {
        if let (Some(&u), Some(&v)) = (position.get(&conn.from.k), position.get(&conn.to.k)) {
            if feedthrough[u] && feedthrough[v] {
                edges[u].insert(v);
            }
        }
    }
    for (v, c) in comps.iter().enumerate() {
        for id in c.model().observes() {
            if let Some(&u) = conn_from.get(id.as_str()) {
                if feedthrough[u] && feedthrough[v] {
                    edges[u].insert(v);
                }
            }
        }
    }

    let mut indegree = vec![0usize; comps.len()];
    for targets in &edges {
        for &v in targets {
            indegree[v] += 1;
        }
    }
    let mut order: Vec<usize> = (0..comps.len()).filter(|&p| !feedthrough[p]).collect();
    let mut ready: BTreeSet<usize> = (0..comps.len())
        .filter(|&p| feedthrough[p] && indegree[p] == 0)
        .collect();
    while let Some(u) = ready.pop_first() {
        order.push(u);
        for &v in &edges[u] {
            indegree[v] -= 1;
            if indegree[v] == 0 {
                ready.insert(v);
            }
        }
    }
    if order.len() == comps.len() {
        Ok(order)
    } else {
        let mut stuck: Vec<u32> = (0..comps.len())
            .filter(|&p| indegree[p] > 0)
            .map(|p| comps[p].id.k)
            .collect();
        stuck.sort_unstable();
        Err(stuck)
    }
}
