//! Recycling plant: a first-order processing lag whose output splits into a
//! return stream and a non-recyclable leak.

use serde::Deserialize;

use super::{
    material, nonnegative, parse_params, Bounds, CompartmentModel, ParamError, PortSpec,
    RateError, RateInput, RateOutput,
};
use crate::network::{Materials, ParamMap};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecyclerParams {
    /// Recyclable fraction `ρ`.
    pub yield_fraction: f64,
    /// Processing time `t_r` (s).
    pub processing_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecyclerRates {
    pub dstore: f64,
    pub return_rate: f64,
    pub leak_rate: f64,
}

impl RecyclerParams {
    pub fn rates(&self, store: f64, in_rate: f64) -> Result<RecyclerRates, RateError> {
        nonnegative("store", store)?;
        nonnegative("inflow", in_rate)?;
        Ok(self.rates_unchecked(store, in_rate))
    }

    fn rates_unchecked(&self, store: f64, in_rate: f64) -> RecyclerRates {
        let processed = store.max(0.0) / self.processing_time;
        let return_rate = self.yield_fraction * processed;
        RecyclerRates {
            dstore: in_rate - processed,
            return_rate,
            leak_rate: processed - return_rate,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    material: String,
    #[serde(rename = "yield")]
    yield_fraction: f64,
    processing_time: f64,
}

#[derive(Debug, Clone)]
pub struct Recycler {
    pub material: usize,
    pub params: RecyclerParams,
    ports: Vec<PortSpec>,
}

impl Recycler {
    pub fn from_params(params: &ParamMap, materials: &Materials) -> Result<Self, ParamError> {
        let c: Config = parse_params(params)?;
        let mat = material(materials, "material", &c.material)?;
        Bounds::closed(0.0, 1.0).check("yield", c.yield_fraction)?;
        Bounds::positive().check("processing_time", c.processing_time)?;
        Ok(Self {
            material: mat,
            params: RecyclerParams {
                yield_fraction: c.yield_fraction,
                processing_time: c.processing_time,
            },
            ports: vec![
                PortSpec::input("in", mat),
                PortSpec::output("return", mat, c.yield_fraction > 0.0),
                PortSpec::output("leak", mat, c.yield_fraction < 1.0),
            ],
        })
    }
}

impl CompartmentModel for Recycler {
    fn kind(&self) -> &'static str {
        "recycler"
    }

    fn ports(&self) -> &[PortSpec] {
        &self.ports
    }

    fn feedthrough(&self) -> bool {
        false
    }

    fn param_bounds(&self, name: &str) -> Option<Bounds> {
        match name {
            "yield" => Some(Bounds::closed(0.0, 1.0)),
            "processing_time" => Some(Bounds::positive()),
            _ => None,
        }
    }

    fn rates(&self, input: &RateInput<'_>, output: &mut RateOutput) {
        let r = self
            .params
            .rates_unchecked(input.store[self.material], input.inflow[0]);
        output.outflow[1] = r.return_rate;
        output.outflow[2] = r.leak_rate;
        output.dstore[self.material] = r.dstore;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(rho: f64) -> RecyclerParams {
        RecyclerParams {
            yield_fraction: rho,
            processing_time: 3.0,
        }
    }

    #[test]
    fn perfect_recycler_never_leaks() {
        for m in [0.0, 1.0, 1e3] {
            assert_eq!(p(1.0).rates(m, 2.0).unwrap().leak_rate, 0.0);
        }
    }

    #[test]
    fn steady_state_split() {
        // steady inflow u holds m* = u * t_r
        let u = 10.0;
        let r = p(0.7).rates(u * 3.0, u).unwrap();
        assert_eq!(r.dstore, 0.0);
        assert!((r.return_rate - 7.0).abs() < 1e-12);
        assert!((r.leak_rate - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_inflow() {
        assert!(p(0.5).rates(1.0, -0.1).is_err());
    }
}
