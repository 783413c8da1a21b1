//! Compartment dynamics.
//!
//! Each compartment kind maps its stored mass, the flow rates arriving at its
//! input ports and its parameters to the rates leaving its output ports and
//! the time derivative of its stores. Kinds are looked up by name in a
//! [`KindRegistry`]; the built-in kinds are `source`, `stock`, `transport`,
//! `transformer`, `sorter`, `recycler` and `sink`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::network::{Direction, Materials, ParamMap};

pub mod rankine;
pub mod recycler;
pub mod sink;
pub mod sorter;
pub mod source;
pub mod stock;
pub mod transformer;
pub mod transport;

pub use rankine::{rankine_eval, CyclePerformance, RankineState};
pub use recycler::{Recycler, RecyclerParams, RecyclerRates};
pub use sink::Sink;
pub use sorter::{Sorter, SorterParams, SorterSplit};
pub use source::{Source, SourceParams, SourceRates};
pub use stock::{stock_rates, Stock, StockRates};
pub use transformer::{Transformer, TransformerParams, TransformerRates};
pub use transport::{Transport, TransportParams, TransportRates};

/// Errors raised when a rate function is called outside its preconditions.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RateError {
    #[error("{what} must be nonnegative, got {value}")]
    Negative { what: &'static str, value: f64 },
    #[error("processed rate {rate} exceeds throughput {throughput}")]
    OverThroughput { rate: f64, throughput: f64 },
    #[error("invalid Rankine state: {0}")]
    Rankine(String),
}

pub(crate) fn nonnegative(what: &'static str, value: f64) -> Result<(), RateError> {
    if value >= 0.0 {
        Ok(())
    } else {
        Err(RateError::Negative { what, value })
    }
}

/// Errors raised while building a compartment model from its parameters.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParamError {
    #[error("unknown compartment kind `{0}`")]
    UnknownKind(String),
    #[error("invalid parameters: {0}")]
    Schema(String),
    #[error("parameter `{field}`: unknown material `{label}`")]
    UnknownMaterial { field: String, label: String },
    #[error("parameter `{field}` = {value} outside {bounds}")]
    OutOfBounds {
        field: String,
        value: f64,
        bounds: Bounds,
    },
    #[error("parameter `{field}` is not a finite number")]
    NotFinite { field: String },
    #[error("parameter `{field}`: {message}")]
    Inconsistent { field: String, message: String },
}

/// Admissible interval of a numeric parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
    pub lower_open: bool,
    pub upper_open: bool,
}

impl Bounds {
    pub const fn closed(lower: f64, upper: f64) -> Self {
        Self {
            lower,
            upper,
            lower_open: false,
            upper_open: false,
        }
    }

    pub const fn nonnegative() -> Self {
        Self {
            lower: 0.0,
            upper: f64::INFINITY,
            lower_open: false,
            upper_open: true,
        }
    }

    pub const fn positive() -> Self {
        Self {
            lower: 0.0,
            upper: f64::INFINITY,
            lower_open: true,
            upper_open: true,
        }
    }

    /// `[0, 1)`
    pub const fn fraction_below_one() -> Self {
        Self {
            lower: 0.0,
            upper: 1.0,
            lower_open: false,
            upper_open: true,
        }
    }

    /// `(0, 1]`
    pub const fn fraction_above_zero() -> Self {
        Self {
            lower: 0.0,
            upper: 1.0,
            lower_open: true,
            upper_open: false,
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        let lo = if self.lower_open {
            v > self.lower
        } else {
            v >= self.lower
        };
        let hi = if self.upper_open {
            v < self.upper
        } else {
            v <= self.upper
        };
        lo && hi
    }

    pub fn check(&self, field: &str, value: f64) -> Result<(), ParamError> {
        if !value.is_finite() {
            return Err(ParamError::NotFinite {
                field: field.to_string(),
            });
        }
        if self.contains(value) {
            Ok(())
        } else {
            Err(ParamError::OutOfBounds {
                field: field.to_string(),
                value,
                bounds: *self,
            })
        }
    }
}

impl fmt::Display for Bounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = if self.lower_open { '(' } else { '[' };
        let u = if self.upper_open { ')' } else { ']' };
        write!(f, "{l}{}, {}{u}", self.lower, self.upper)
    }
}

/// How a compartment participates in the conservation ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Mass leaving its store counts as extracted.
    Source,
    /// Mass entering its store counts as sunk.
    Sink,
    /// Stored mass counts toward the in-network inventory.
    Internal,
}

/// A port declared by a compartment model. `material` is a position in the
/// network's material list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortSpec {
    pub name: String,
    pub direction: Direction,
    pub material: usize,
    /// Output ports that may carry flow under the current parameters must be
    /// connected.
    pub required: bool,
}

impl PortSpec {
    pub fn input(name: &str, material: usize) -> Self {
        Self {
            name: name.to_string(),
            direction: Direction::Input,
            material,
            required: false,
        }
    }

    pub fn output(name: &str, material: usize, required: bool) -> Self {
        Self {
            name: name.to_string(),
            direction: Direction::Output,
            material,
            required,
        }
    }
}

/// Inputs of one rate evaluation.
#[derive(Debug, Clone, Copy)]
pub struct RateInput<'a> {
    /// Stored mass per material position.
    pub store: &'a [f64],
    /// Summed inflow per port, aligned with `ports()`; entries of output
    /// ports are zero.
    pub inflow: &'a [f64],
    /// Current rates of the connections listed by `observes()`.
    pub observed: &'a [f64],
    /// Reference time of the availability guard: a store `m` can supply at
    /// most `m / dt_ref` per unit time.
    pub dt_ref: f64,
}

/// Outputs of one rate evaluation. Buffers are zeroed by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct RateOutput {
    /// Outflow per port, aligned with `ports()`; entries of input ports stay
    /// zero.
    pub outflow: Vec<f64>,
    /// Time derivative of the store, per material position.
    pub dstore: Vec<f64>,
    /// Net mass created per material position by a declared change of
    /// material type; sums to zero over materials.
    pub conversion: Vec<f64>,
}

impl RateOutput {
    pub fn zeros(ports: usize, materials: usize) -> Self {
        Self {
            outflow: vec![0.0; ports],
            dstore: vec![0.0; materials],
            conversion: vec![0.0; materials],
        }
    }

    pub fn clear(&mut self) {
        self.outflow.iter_mut().for_each(|v| *v = 0.0);
        self.dstore.iter_mut().for_each(|v| *v = 0.0);
        self.conversion.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Dynamics of one compartment kind.
pub trait CompartmentModel: fmt::Debug + Send + Sync {
    fn kind(&self) -> &'static str;

    fn ports(&self) -> &[PortSpec];

    fn role(&self) -> Role {
        Role::Internal
    }

    /// Whether outflows depend on the instantaneous inflows (or observed
    /// rates). Models returning `false` must compute outflows from the store
    /// alone.
    fn feedthrough(&self) -> bool;

    /// Ids of connections whose instantaneous rates this model reads.
    fn observes(&self) -> &[String] {
        &[]
    }

    fn param_bounds(&self, name: &str) -> Option<Bounds>;

    fn rates(&self, input: &RateInput<'_>, output: &mut RateOutput);

    fn port_index(&self, name: &str) -> Option<usize> {
        self.ports().iter().position(|p| p.name == name)
    }
}

type Factory =
    dyn Fn(&ParamMap, &Materials) -> Result<Arc<dyn CompartmentModel>, ParamError> + Send + Sync;

struct KindEntry {
    description: &'static str,
    factory: Arc<Factory>,
}

/// Name-indexed registry of compartment kinds.
#[derive(Default, Clone)]
pub struct KindRegistry {
    kinds: BTreeMap<String, Arc<KindEntry>>,
}

impl fmt::Debug for KindRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.kinds.keys()).finish()
    }
}

impl KindRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry holding the built-in kinds.
    pub fn builtin() -> Self {
        let mut r = Self::new();
        r.register("source", "finite reservoir with makeup demand", |p, m| {
            Ok(Arc::new(Source::from_params(p, m)?))
        });
        r.register("stock", "store with a demand-driven outflow", |p, m| {
            Ok(Arc::new(Stock::from_params(p, m)?))
        });
        r.register("transport", "first-order lag with optional loss", |p, m| {
            Ok(Arc::new(Transport::from_params(p, m)?))
        });
        r.register(
            "transformer",
            "capacity-limited material conversion",
            |p, m| Ok(Arc::new(Transformer::from_params(p, m)?)),
        );
        r.register("sorter", "accept/reject split at a success rate", |p, m| {
            Ok(Arc::new(Sorter::from_params(p, m)?))
        });
        r.register("recycler", "first-order lag split into return and leak", |p, m| {
            Ok(Arc::new(Recycler::from_params(p, m)?))
        });
        r.register("sink", "pure accumulator", |p, m| {
            Ok(Arc::new(Sink::from_params(p, m)?))
        });
        r
    }

    pub fn register<F>(&mut self, name: &str, description: &'static str, factory: F)
    where
        F: Fn(&ParamMap, &Materials) -> Result<Arc<dyn CompartmentModel>, ParamError>
            + Send
            + Sync
            + 'static,
    {
        self.kinds.insert(
            name.to_string(),
            Arc::new(KindEntry {
                description,
                factory: Arc::new(factory),
            }),
        );
    }

    pub fn contains(&self, name: &str) -> bool {
        self.kinds.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = (&str, &'static str)> {
        self.kinds
            .iter()
            .map(|(k, e)| (k.as_str(), e.description))
    }

    pub fn build(
        &self,
        kind: &str,
        params: &ParamMap,
        materials: &Materials,
    ) -> Result<Arc<dyn CompartmentModel>, ParamError> {
        let entry = self
            .kinds
            .get(kind)
            .ok_or_else(|| ParamError::UnknownKind(kind.to_string()))?;
        (entry.factory)(params, materials)
    }
}

/// Deserializes a kind's parameter record.
pub(crate) fn parse_params<T: DeserializeOwned>(params: &ParamMap) -> Result<T, ParamError> {
    serde_json::from_value(Value::Object(params.clone()))
        .map_err(|e| ParamError::Schema(e.to_string()))
}

pub(crate) fn material(
    materials: &Materials,
    field: &str,
    label: &str,
) -> Result<usize, ParamError> {
    materials
        .position(label)
        .ok_or_else(|| ParamError::UnknownMaterial {
            field: field.to_string(),
            label: label.to_string(),
        })
}

/// Caps a desired outflow by what the inflow plus the store can supply within
/// `dt_ref`.
#[inline]
pub(crate) fn available(desired: f64, inflow: f64, store: f64, dt_ref: f64) -> f64 {
    desired.min(inflow + store.max(0.0) / dt_ref).max(0.0)
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use crate::network::MaterialType;

    pub fn materials() -> Materials {
        Materials::new(vec![
            MaterialType {
                index: 1,
                label: "b1".into(),
            },
            MaterialType {
                index: 2,
                label: "b2".into(),
            },
        ])
    }

    pub fn params(v: Value) -> ParamMap {
        v.as_object().expect("object").clone()
    }

    /// Evaluates a model and returns (outflow, dstore, conversion).
    pub fn eval(
        model: &dyn CompartmentModel,
        store: &[f64],
        inflow_by_name: &[(&str, f64)],
        observed: &[f64],
        dt_ref: f64,
    ) -> RateOutput {
        let ports = model.ports();
        let mut inflow = vec![0.0; ports.len()];
        for (name, r) in inflow_by_name {
            let i = model.port_index(name).expect("port");
            inflow[i] += r;
        }
        let mut out = RateOutput::zeros(ports.len(), store.len());
        model.rates(
            &RateInput {
                store,
                inflow: &inflow,
                observed,
                dt_ref,
            },
            &mut out,
        );
        out
    }

    /// Total mass imbalance of one evaluation: inputs − outputs − dstore +
    /// conversion.
    pub fn imbalance(model: &dyn CompartmentModel, inflow: &[(&str, f64)], out: &RateOutput) -> f64 {
        let inp: f64 = inflow.iter().map(|(_, r)| r).sum();
        let outp: f64 = out.outflow.iter().sum();
        let ds: f64 = out.dstore.iter().sum();
        let conv: f64 = out.conversion.iter().sum();
        let _ = model;
        inp - outp - ds + conv
    }
}
