//! Store with a demand-driven outflow.

use serde::Deserialize;

use super::{
    available, material, nonnegative, parse_params, Bounds, CompartmentModel, ParamError,
    PortSpec, RateError, RateInput, RateOutput,
};
use crate::network::{Materials, ParamMap};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StockRates {
    pub dstore: f64,
    pub out_rate: f64,
}

/// Mass balance of a stock: the outflow follows `demand_rate` while the store
/// (or the inflow) can supply it.
pub fn stock_rates(
    store: f64,
    in_rate: f64,
    demand_rate: f64,
    dt_ref: f64,
) -> Result<StockRates, RateError> {
    nonnegative("inflow", in_rate)?;
    nonnegative("demand", demand_rate)?;
    let out_rate = available(demand_rate, in_rate, store, dt_ref);
    Ok(StockRates {
        dstore: in_rate - out_rate,
        out_rate,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    material: String,
    demand: f64,
}

#[derive(Debug, Clone)]
pub struct Stock {
    pub material: usize,
    pub demand: f64,
    ports: Vec<PortSpec>,
}

impl Stock {
    pub fn from_params(params: &ParamMap, materials: &Materials) -> Result<Self, ParamError> {
        let c: Config = parse_params(params)?;
        let mat = material(materials, "material", &c.material)?;
        Bounds::nonnegative().check("demand", c.demand)?;
        Ok(Self {
            material: mat,
            demand: c.demand,
            ports: vec![
                PortSpec::input("in", mat),
                PortSpec::output("out", mat, c.demand > 0.0),
            ],
        })
    }
}

impl CompartmentModel for Stock {
    fn kind(&self) -> &'static str {
        "stock"
    }

    fn ports(&self) -> &[PortSpec] {
        &self.ports
    }

    fn feedthrough(&self) -> bool {
        true
    }

    fn param_bounds(&self, name: &str) -> Option<Bounds> {
        (name == "demand").then(Bounds::nonnegative)
    }

    fn rates(&self, input: &RateInput<'_>, output: &mut RateOutput) {
        let r = stock_rates(
            input.store[self.material],
            input.inflow[0],
            self.demand,
            input.dt_ref,
        )
        .expect("validated stock inputs");
        output.outflow[1] = r.out_rate;
        output.dstore[self.material] = r.dstore;
    }
}
