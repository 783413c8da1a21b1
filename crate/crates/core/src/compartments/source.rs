//! Finite reservoir of virgin material.

use serde::Deserialize;

use super::{
    available, material, nonnegative, parse_params, Bounds, CompartmentModel, ParamError,
    PortSpec, RateError, RateInput, RateOutput, Role,
};
use crate::network::{Materials, ParamMap};

/// Extractable reserve `M₀` (kg) and extraction rate cap (kg/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceParams {
    pub reserve: f64,
    pub max_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceRates {
    pub dstore: f64,
    pub out_rate: f64,
}

impl SourceParams {
    /// Extraction from a reservoir whose remaining mass is `store`.
    pub fn rates(&self, store: f64, demand: f64, dt_ref: f64) -> Result<SourceRates, RateError> {
        nonnegative("demand", demand)?;
        let out_rate = available(demand.min(self.max_rate), 0.0, store, dt_ref);
        Ok(SourceRates {
            dstore: -out_rate,
            out_rate,
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    material: String,
    reserve: f64,
    max_rate: f64,
    #[serde(default)]
    demand: f64,
    #[serde(default)]
    makeup_for: Vec<String>,
}

/// Source compartment. Its store is the remaining reserve. The extraction
/// target is `demand` minus the current rates of the `makeup_for`
/// connections, so recovered material displaces virgin extraction.
#[derive(Debug, Clone)]
pub struct Source {
    pub material: usize,
    pub params: SourceParams,
    pub demand: f64,
    pub makeup_for: Vec<String>,
    ports: Vec<PortSpec>,
}

impl Source {
    pub fn from_params(params: &ParamMap, materials: &Materials) -> Result<Self, ParamError> {
        let c: Config = parse_params(params)?;
        let mat = material(materials, "material", &c.material)?;
        Bounds::nonnegative().check("reserve", c.reserve)?;
        Bounds::nonnegative().check("max_rate", c.max_rate)?;
        Bounds::nonnegative().check("demand", c.demand)?;
        Ok(Self {
            material: mat,
            params: SourceParams {
                reserve: c.reserve,
                max_rate: c.max_rate,
            },
            demand: c.demand,
            makeup_for: c.makeup_for,
            ports: vec![PortSpec::output("out", mat, true)],
        })
    }
}

impl CompartmentModel for Source {
    fn kind(&self) -> &'static str {
        "source"
    }

    fn ports(&self) -> &[PortSpec] {
        &self.ports
    }

    fn role(&self) -> Role {
        Role::Source
    }

    fn feedthrough(&self) -> bool {
        true
    }

    fn observes(&self) -> &[String] {
        &self.makeup_for
    }

    fn param_bounds(&self, name: &str) -> Option<Bounds> {
        match name {
            "reserve" | "max_rate" | "demand" => Some(Bounds::nonnegative()),
            _ => None,
        }
    }

    fn rates(&self, input: &RateInput<'_>, output: &mut RateOutput) {
        let recovered: f64 = input.observed.iter().sum();
        let demand = (self.demand - recovered).max(0.0);
        let r = self
            .params
            .rates(input.store[self.material], demand, input.dt_ref)
            .expect("demand clamped nonnegative");
        output.outflow[0] = r.out_rate;
        output.dstore[self.material] = r.dstore;
    }
}
