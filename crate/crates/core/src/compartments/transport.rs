//! Transportation: a first-order lag that carries material unchanged, minus
//! an optional loss fraction.

use serde::Deserialize;

use super::{
    material, nonnegative, parse_params, Bounds, CompartmentModel, ParamError, PortSpec,
    RateError, RateInput, RateOutput,
};
use crate::network::{Materials, ParamMap};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportParams {
    /// Lag time constant `T` (s).
    pub time_constant: f64,
    /// Fraction `λ` of the carried mass lost in transit.
    pub loss_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportRates {
    pub dstore: f64,
    pub out_rate: f64,
    pub loss_rate: f64,
}

impl TransportParams {
    pub fn rates(&self, store: f64, in_rate: f64) -> Result<TransportRates, RateError> {
        nonnegative("store", store)?;
        nonnegative("inflow", in_rate)?;
        Ok(self.rates_unchecked(store, in_rate))
    }

    fn rates_unchecked(&self, store: f64, in_rate: f64) -> TransportRates {
        let carried = store.max(0.0) / self.time_constant;
        let loss_rate = self.loss_fraction * carried;
        TransportRates {
            dstore: in_rate - carried,
            out_rate: carried - loss_rate,
            loss_rate,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    material: String,
    time_constant: f64,
    #[serde(default)]
    loss_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct Transport {
    pub material: usize,
    pub params: TransportParams,
    ports: Vec<PortSpec>,
}

impl Transport {
    pub fn from_params(params: &ParamMap, materials: &Materials) -> Result<Self, ParamError> {
        let c: Config = parse_params(params)?;
        let mat = material(materials, "material", &c.material)?;
        Bounds::positive().check("time_constant", c.time_constant)?;
        Bounds::fraction_below_one().check("loss_fraction", c.loss_fraction)?;
        Ok(Self {
            material: mat,
            params: TransportParams {
                time_constant: c.time_constant,
                loss_fraction: c.loss_fraction,
            },
            ports: vec![
                PortSpec::input("in", mat),
                PortSpec::output("out", mat, true),
                PortSpec::output("loss", mat, c.loss_fraction > 0.0),
            ],
        })
    }
}

impl CompartmentModel for Transport {
    fn kind(&self) -> &'static str {
        "transport"
    }

    fn ports(&self) -> &[PortSpec] {
        &self.ports
    }

    fn feedthrough(&self) -> bool {
        false
    }

    fn param_bounds(&self, name: &str) -> Option<Bounds> {
        match name {
            "time_constant" => Some(Bounds::positive()),
            "loss_fraction" => Some(Bounds::fraction_below_one()),
            _ => None,
        }
    }

    fn rates(&self, input: &RateInput<'_>, output: &mut RateOutput) {
        let r = self
            .params
            .rates_unchecked(input.store[self.material], input.inflow[0]);
        output.outflow[1] = r.out_rate;
        output.outflow[2] = r.loss_rate;
        output.dstore[self.material] = r.dstore;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lossless_fixed_point() {
        let p = TransportParams {
            time_constant: 4.0,
            loss_fraction: 0.0,
        };
        let u = 2.5;
        let r = p.rates(u * 4.0, u).unwrap();
        assert_eq!(r.dstore, 0.0);
        assert_eq!(r.out_rate, u);
        assert_eq!(r.loss_rate, 0.0);
    }

    #[test]
    fn lossy_steady_state() {
        // steady inflow 10 with T = 1: m* = 10, out 9, loss 1
        let p = TransportParams {
            time_constant: 1.0,
            loss_fraction: 0.1,
        };
        let r = p.rates(10.0, 10.0).unwrap();
        assert!((r.out_rate - 9.0).abs() < 1e-12);
        assert!((r.loss_rate - 1.0).abs() < 1e-12);
        assert_eq!(r.dstore, 0.0);
    }

    #[test]
    fn decay_without_inflow() {
        let p = TransportParams {
            time_constant: 2.0,
            loss_fraction: 0.0,
        };
        let r = p.rates(1.0, 0.0).unwrap();
        assert_eq!(r.dstore, -0.5);
    }

    #[test]
    fn rejects_negative_inputs() {
        let p = TransportParams {
            time_constant: 1.0,
            loss_fraction: 0.0,
        };
        assert!(p.rates(-1.0, 0.0).is_err());
        assert!(p.rates(1.0, -1.0).is_err());
    }
}
