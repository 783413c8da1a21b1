//! Domain types for materials, compartments, ports, connections and whole
//! networks.
//!
//! A [`Network`] is immutable once built. Every compartment carries the raw
//! parameter record it was loaded from together with the dynamics model the
//! kind registry built from it, so a network can be serialized back to its
//! file form and re-parameterized by name during design search.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::compartments::{CompartmentModel, KindRegistry, ParamError, RankineState, Role};
use crate::simulator::SimConfig;
use crate::validate::{validate, ValidationReport};

/// Raw parameter record of a compartment, as found in the network file.
pub type ParamMap = Map<String, Value>;

/// Per-material quantities keyed by material label.
pub type MaterialMap = BTreeMap<String, f64>;

/// A material type β_q.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialType {
    pub index: u32,
    pub label: String,
}

/// The ordered material list of a network. Positions in this list index every
/// per-material vector in the crate.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Materials(Vec<MaterialType>);

impl Materials {
    pub fn new(materials: Vec<MaterialType>) -> Self {
        Self(materials)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MaterialType> {
        self.0.iter()
    }

    pub fn get(&self, position: usize) -> Option<&MaterialType> {
        self.0.get(position)
    }

    /// Position of the material with the given label.
    pub fn position(&self, label: &str) -> Option<usize> {
        self.0.iter().position(|m| m.label == label)
    }

    pub fn label(&self, position: usize) -> &str {
        &self.0[position].label
    }

    pub fn as_slice(&self) -> &[MaterialType] {
        &self.0
    }
}

/// Compartment identity `c^k_{i,j}`: global index `k`, origin stage `i` and
/// destination stage `j`. Stage compartments are diagonal (`i = j = k`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CompartmentId {
    pub k: u32,
    pub i: u32,
    pub j: u32,
}

impl CompartmentId {
    pub fn stage(k: u32) -> Self {
        Self { k, i: k, j: k }
    }

    pub fn transport(k: u32, from_stage: u32, to_stage: u32) -> Self {
        Self {
            k,
            i: from_stage,
            j: to_stage,
        }
    }

    pub fn is_diagonal(&self) -> bool {
        self.i == self.k && self.j == self.k
    }
}

impl fmt::Display for CompartmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}_{}_{}", self.k, self.i, self.j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Input,
    Output,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Input => f.write_str("input"),
            Direction::Output => f.write_str("output"),
        }
    }
}

/// A resolved port of a compartment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Port {
    pub compartment: CompartmentId,
    pub direction: Direction,
    pub name: String,
    pub material: MaterialType,
}

/// Reference to a port by compartment index and port name, as written in the
/// network file.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortRef {
    pub k: u32,
    pub port: String,
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}.{}", self.k, self.port)
    }
}

/// A directed material flow from an output port to an input port.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Connection {
    pub id: String,
    pub from: PortRef,
    pub to: PortRef,
}

/// A compartment: identity, kind name, raw parameters, initial stores and the
/// dynamics model built for it.
#[derive(Clone)]
pub struct Compartment {
    pub id: CompartmentId,
    pub kind: String,
    pub params: ParamMap,
    pub initial_mass: MaterialMap,
    model: Arc<dyn CompartmentModel>,
}

impl Compartment {
    pub fn new(
        id: CompartmentId,
        kind: impl Into<String>,
        params: ParamMap,
        initial_mass: MaterialMap,
        registry: &KindRegistry,
        materials: &Materials,
    ) -> Result<Self, ParamError> {
        let kind = kind.into();
        let model = registry.build(&kind, &params, materials)?;
        Ok(Self {
            id,
            kind,
            params,
            initial_mass,
            model,
        })
    }

    pub fn model(&self) -> &dyn CompartmentModel {
        self.model.as_ref()
    }

    pub fn role(&self) -> Role {
        self.model.role()
    }

    /// Numeric value of a named parameter, if present and numeric.
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).and_then(Value::as_f64)
    }
}

impl fmt::Debug for Compartment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Compartment")
            .field("id", &self.id)
            .field("kind", &self.kind)
            .field("params", &self.params)
            .field("initial_mass", &self.initial_mass)
            .finish()
    }
}

impl PartialEq for Compartment {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.kind == other.kind
            && self.params == other.params
            && self.initial_mass == other.initial_mass
    }
}

/// A set of interconnected compartments with designated unsustainable and
/// return flows.
#[derive(Debug, Clone)]
pub struct Network {
    pub name: String,
    pub description: Option<String>,
    pub materials: Materials,
    pub compartments: Vec<Compartment>,
    pub connections: Vec<Connection>,
    /// Connection ids of the unsustainable ("red") flows.
    pub unsustainable: Vec<String>,
    /// Connection ids of the return ("green") flows.
    pub returns: Vec<String>,
    pub simulation: SimConfig,
    pub rankine: Option<RankineState>,
    registry: Arc<KindRegistry>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.description == other.description
            && self.materials == other.materials
            && self.compartments == other.compartments
            && self.connections == other.connections
            && self.unsustainable == other.unsustainable
            && self.returns == other.returns
            && self.simulation == other.simulation
            && self.rankine == other.rankine
    }
}

#[derive(Debug, thiserror::Error)]
pub enum NetworkError {
    #[error("no compartment with index k={0}")]
    UnknownCompartment(u32),
    #[error("compartment c{k}: {source}")]
    Param {
        k: u32,
        #[source]
        source: ParamError,
    },
    #[error("state has {got} compartments, network has {expected}")]
    CompartmentCount { expected: usize, got: usize },
    #[error("state of compartment c{k} has {got} materials, network has {expected}")]
    MaterialCount { k: u32, expected: usize, got: usize },
}

/// Per-compartment stores, aligned with [`Network::compartments`]; each entry
/// holds one mass per material position.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub stores: Vec<Vec<f64>>,
}

impl Network {
    pub fn empty(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            description: None,
            materials: Materials::default(),
            compartments: Vec::new(),
            connections: Vec::new(),
            unsustainable: Vec::new(),
            returns: Vec::new(),
            simulation: SimConfig::default(),
            rankine: None,
            registry: Arc::new(KindRegistry::builtin()),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        materials: Materials,
        compartments: Vec<Compartment>,
        connections: Vec<Connection>,
        unsustainable: Vec<String>,
        returns: Vec<String>,
        simulation: SimConfig,
        registry: Arc<KindRegistry>,
    ) -> Self {
        Self {
            name: name.into(),
            description: None,
            materials,
            compartments,
            connections,
            unsustainable,
            returns,
            simulation,
            rankine: None,
            registry,
        }
    }

    pub fn registry(&self) -> &Arc<KindRegistry> {
        &self.registry
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }

    pub fn compartment(&self, k: u32) -> Option<&Compartment> {
        self.compartments.iter().find(|c| c.id.k == k)
    }

    pub fn compartment_position(&self, k: u32) -> Option<usize> {
        self.compartments.iter().position(|c| c.id.k == k)
    }

    pub fn connection(&self, id: &str) -> Option<&Connection> {
        self.connections.iter().find(|c| c.id == id)
    }

    pub fn connection_position(&self, id: &str) -> Option<usize> {
        self.connections.iter().position(|c| c.id == id)
    }

    /// Resolves a port reference against the compartment's declared ports.
    pub fn port(&self, r: &PortRef) -> Option<Port> {
        let c = self.compartment(r.k)?;
        let spec = c.model().ports().iter().find(|p| p.name == r.port)?;
        Some(Port {
            compartment: c.id,
            direction: spec.direction,
            name: spec.name.clone(),
            material: self.materials.get(spec.material)?.clone(),
        })
    }

    /// Returns a copy of the network with one numeric parameter replaced. The
    /// compartment model is rebuilt, so kind-specific bounds are enforced.
    pub fn with_param(&self, k: u32, name: &str, value: f64) -> Result<Network, NetworkError> {
        let pos = self
            .compartment_position(k)
            .ok_or(NetworkError::UnknownCompartment(k))?;
        let mut out = self.clone();
        let c = &self.compartments[pos];
        let mut params = c.params.clone();
        let number = serde_json::Number::from_f64(value).ok_or_else(|| NetworkError::Param {
            k,
            source: ParamError::NotFinite {
                field: name.to_string(),
            },
        })?;
        params.insert(name.to_string(), Value::Number(number));
        let rebuilt = Compartment::new(
            c.id,
            c.kind.clone(),
            params,
            c.initial_mass.clone(),
            &self.registry,
            &self.materials,
        )
        .map_err(|source| NetworkError::Param { k, source })?;
        out.compartments[pos] = rebuilt;
        Ok(out)
    }

    /// Returns a copy with the initial store of one compartment replaced.
    pub fn with_initial_mass(
        &self,
        k: u32,
        material: &str,
        mass: f64,
    ) -> Result<Network, NetworkError> {
        let pos = self
            .compartment_position(k)
            .ok_or(NetworkError::UnknownCompartment(k))?;
        let mut out = self.clone();
        out.compartments[pos]
            .initial_mass
            .insert(material.to_string(), mass);
        Ok(out)
    }

    /// Initial stores as a [`NetworkState`]. Materials not listed in a
    /// compartment's `initial_mass` start at zero; unknown labels are ignored
    /// here and reported by validation.
    pub fn initial_state(&self) -> NetworkState {
        let q = self.materials.len();
        let stores = self
            .compartments
            .iter()
            .map(|c| {
                let mut v = vec![0.0; q];
                for (label, &m) in &c.initial_mass {
                    if let Some(p) = self.materials.position(label) {
                        v[p] = m;
                    }
                }
                v
            })
            .collect();
        NetworkState { stores }
    }

    /// Sum of stored mass over all compartments, per material.
    pub fn total_mass(&self, state: &NetworkState) -> Result<MaterialMap, NetworkError> {
        self.check_state(state)?;
        let mut totals: MaterialMap = self
            .materials
            .iter()
            .map(|m| (m.label.clone(), 0.0))
            .collect();
        for store in &state.stores {
            for (p, &m) in store.iter().enumerate() {
                *totals.get_mut(self.materials.label(p)).expect("material") += m;
            }
        }
        Ok(totals)
    }

    pub fn check_state(&self, state: &NetworkState) -> Result<(), NetworkError> {
        if state.stores.len() != self.compartments.len() {
            return Err(NetworkError::CompartmentCount {
                expected: self.compartments.len(),
                got: state.stores.len(),
            });
        }
        let q = self.materials.len();
        for (c, store) in self.compartments.iter().zip(&state.stores) {
            if store.len() != q {
                return Err(NetworkError::MaterialCount {
                    k: c.id.k,
                    expected: q,
                    got: store.len(),
                });
            }
        }
        Ok(())
    }

    /// True when the connection originates at a source compartment.
    pub fn is_extraction(&self, connection: &Connection) -> bool {
        self.compartment(connection.from.k)
            .map(|c| c.role() == Role::Source)
            .unwrap_or(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn two_stocks() -> Network {
        let reg = Arc::new(KindRegistry::builtin());
        let materials = Materials::new(vec![MaterialType {
            index: 1,
            label: "b1".into(),
        }]);
        let stock = |k: u32, m: f64| {
            let params = json!({"material": "b1", "demand": 0.0});
            Compartment::new(
                CompartmentId::stage(k),
                "stock",
                params.as_object().unwrap().clone(),
                [("b1".to_string(), m)].into_iter().collect(),
                &reg,
                &materials,
            )
            .unwrap()
        };
        let compartments = vec![stock(1, 3.0), stock(2, 4.0)];
        Network::new(
            "two",
            materials,
            compartments,
            vec![],
            vec![],
            vec![],
            SimConfig::default(),
            reg,
        )
    }

    #[test]
    fn total_mass_adds_stores() {
        let net = two_stocks();
        let totals = net.total_mass(&net.initial_state()).unwrap();
        assert_eq!(totals["b1"], 7.0);
    }

    #[test]
    fn total_mass_of_zero_state_is_zero() {
        let net = two_stocks();
        let state = NetworkState {
            stores: vec![vec![0.0]; 2],
        };
        assert_eq!(net.total_mass(&state).unwrap()["b1"], 0.0);
    }

    #[test]
    fn total_mass_rejects_dimension_mismatch() {
        let net = two_stocks();
        let state = NetworkState {
            stores: vec![vec![0.0]],
        };
        assert!(matches!(
            net.total_mass(&state),
            Err(NetworkError::CompartmentCount { .. })
        ));
        let state = NetworkState {
            stores: vec![vec![0.0, 1.0], vec![0.0]],
        };
        assert!(matches!(
            net.total_mass(&state),
            Err(NetworkError::MaterialCount { k: 1, .. })
        ));
    }

    #[test]
    fn with_param_enforces_bounds() {
        let net = two_stocks();
        assert!(net.with_param(1, "demand", 2.0).is_ok());
        assert!(net.with_param(1, "demand", -1.0).is_err());
        assert!(net.with_param(9, "demand", 1.0).is_err());
    }

    #[test]
    fn compartment_id_display() {
        assert_eq!(CompartmentId::transport(8, 1, 2).to_string(), "c8_1_2");
        assert!(CompartmentId::stage(3).is_diagonal());
    }
}
