//! Landfill, incinerator or natural environment: a pure accumulator.

use serde::Deserialize;

use super::{
    material, parse_params, Bounds, CompartmentModel, ParamError, PortSpec, RateInput,
    RateOutput, Role,
};
use crate::network::{Materials, ParamMap};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    #[serde(default)]
    materials: Option<Vec<String>>,
}

/// Sink with one input port per accepted material, named by the material
/// label. Accepts every network material unless `materials` narrows it.
#[derive(Debug, Clone)]
pub struct Sink {
    ports: Vec<PortSpec>,
}

impl Sink {
    pub fn from_params(params: &ParamMap, materials: &Materials) -> Result<Self, ParamError> {
        let c: Config = parse_params(params)?;
        let ports = match c.materials {
            Some(labels) => labels
                .iter()
                .map(|l| Ok(PortSpec::input(l, material(materials, "materials", l)?)))
                .collect::<Result<Vec<_>, ParamError>>()?,
            None => materials
                .iter()
                .enumerate()
                .map(|(p, m)| PortSpec::input(&m.label, p))
                .collect(),
        };
        Ok(Self { ports })
    }
}

impl CompartmentModel for Sink {
    fn kind(&self) -> &'static str {
        "sink"
    }

    fn ports(&self) -> &[PortSpec] {
        &self.ports
    }

    fn role(&self) -> Role {
        Role::Sink
    }

    fn feedthrough(&self) -> bool {
        false
    }

    fn param_bounds(&self, _name: &str) -> Option<Bounds> {
        None
    }

    fn rates(&self, input: &RateInput<'_>, output: &mut RateOutput) {
        for (port, rate) in self.ports.iter().zip(input.inflow) {
            output.dstore[port.material] += rate;
        }
    }
}
