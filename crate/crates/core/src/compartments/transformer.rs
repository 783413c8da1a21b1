//! Manufacturing stage converting one material type into another.
//!
//! Processing draws on the input-material store and is capped by
//! `rate_capacity`. A fraction `yield` of the processed mass leaves as the
//! output material; the rest leaves as waste of the input material. Material
//! arriving on the `recycled` port is already of the output type and passes
//! straight through to `out`.

use serde::Deserialize;

use super::{
    available, material, nonnegative, parse_params, Bounds, CompartmentModel, ParamError,
    PortSpec, RateError, RateInput, RateOutput,
};
use crate::network::{Materials, ParamMap};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformerParams {
    /// Yield `η` in (0, 1].
    pub yield_fraction: f64,
    /// kg/s
    pub rate_capacity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformerRates {
    pub dstore: f64,
    pub processed: f64,
    pub out_rate: f64,
    pub waste_rate: f64,
}

impl TransformerParams {
    pub fn rates(
        &self,
        store: f64,
        in_rate: f64,
        dt_ref: f64,
    ) -> Result<TransformerRates, RateError> {
        nonnegative("inflow", in_rate)?;
        Ok(self.rates_unchecked(store, in_rate, dt_ref))
    }

    fn rates_unchecked(&self, store: f64, in_rate: f64, dt_ref: f64) -> TransformerRates {
        let processed = available(self.rate_capacity, in_rate, store, dt_ref);
        let out_rate = self.yield_fraction * processed;
        TransformerRates {
            dstore: in_rate - processed,
            processed,
            out_rate,
            waste_rate: processed - out_rate,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    input_material: String,
    output_material: String,
    #[serde(rename = "yield")]
    yield_fraction: f64,
    rate_capacity: f64,
}

#[derive(Debug, Clone)]
pub struct Transformer {
    pub input_material: usize,
    pub output_material: usize,
    pub params: TransformerParams,
    ports: Vec<PortSpec>,
}

const IN: usize = 0;
const RECYCLED: usize = 1;
const OUT: usize = 2;
const WASTE: usize = 3;

impl Transformer {
    pub fn from_params(params: &ParamMap, materials: &Materials) -> Result<Self, ParamError> {
        let c: Config = parse_params(params)?;
        let input = material(materials, "input_material", &c.input_material)?;
        let output = material(materials, "output_material", &c.output_material)?;
        Bounds::fraction_above_zero().check("yield", c.yield_fraction)?;
        Bounds::nonnegative().check("rate_capacity", c.rate_capacity)?;
        Ok(Self {
            input_material: input,
            output_material: output,
            params: TransformerParams {
                yield_fraction: c.yield_fraction,
                rate_capacity: c.rate_capacity,
            },
            ports: vec![
                PortSpec::input("in", input),
                PortSpec::input("recycled", output),
                PortSpec::output("out", output, true),
                PortSpec::output("waste", input, c.yield_fraction < 1.0),
            ],
        })
    }
}

impl CompartmentModel for Transformer {
    fn kind(&self) -> &'static str {
        "transformer"
    }

    fn ports(&self) -> &[PortSpec] {
        &self.ports
    }

    fn feedthrough(&self) -> bool {
        true
    }

    fn param_bounds(&self, name: &str) -> Option<Bounds> {
        match name {
            "yield" => Some(Bounds::fraction_above_zero()),
            "rate_capacity" => Some(Bounds::nonnegative()),
            _ => None,
        }
    }

    fn rates(&self, input: &RateInput<'_>, output: &mut RateOutput) {
        let r = self.params.rates_unchecked(
            input.store[self.input_material],
            input.inflow[IN],
            input.dt_ref,
        );
        output.outflow[OUT] = r.out_rate + input.inflow[RECYCLED];
        output.outflow[WASTE] = r.waste_rate;
        output.dstore[self.input_material] = r.dstore;
        if self.input_material != self.output_material {
            output.conversion[self.input_material] -= r.out_rate;
            output.conversion[self.output_material] += r.out_rate;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compartments::testing::{eval, imbalance, materials, params};
    use serde_json::json;

    #[test]
    fn lossless_conversion() {
        let p = TransformerParams {
            yield_fraction: 1.0,
            rate_capacity: 10.0,
        };
        let r = p.rates(0.0, 3.0, 1.0).unwrap();
        assert_eq!(r.waste_rate, 0.0);
        assert_eq!(r.out_rate, r.processed);
    }

    #[test]
    fn fractional_yield_splits_processed_mass() {
        let p = TransformerParams {
            yield_fraction: 0.8,
            rate_capacity: 5.0,
        };
        let r = p.rates(100.0, 5.0, 1.0).unwrap();
        assert_eq!(r.processed, 5.0);
        assert!((r.out_rate - 4.0).abs() < 1e-12);
        assert!((r.waste_rate - 1.0).abs() < 1e-12);
        assert_eq!(r.out_rate + r.waste_rate, r.processed);
    }

    #[test]
    fn capacity_binds() {
        let p = TransformerParams {
            yield_fraction: 1.0,
            rate_capacity: 2.0,
        };
        let r = p.rates(0.0, 10.0, 1.0).unwrap();
        assert_eq!(r.processed, 2.0);
        assert_eq!(r.dstore, 8.0);
    }

    #[test]
    fn conversion_is_declared_and_mass_conserved() {
        let m = Transformer::from_params(
            &params(json!({"input_material": "b1", "output_material": "b2",
                           "yield": 0.75, "rate_capacity": 4.0})),
            &materials(),
        )
        .unwrap();
        let inflow = [("in", 3.0), ("recycled", 0.5)];
        let out = eval(&m, &[2.0, 0.0], &inflow, &[], 1.0);
        assert_eq!(out.conversion[0], -3.0);
        assert_eq!(out.conversion[1], 3.0);
        assert_eq!(out.outflow[OUT], 3.5);
        assert!(imbalance(&m, &inflow, &out).abs() < 1e-12);
    }

    #[test]
    fn zero_yield_is_rejected() {
        let err = Transformer::from_params(
            &params(json!({"input_material": "b1", "output_material": "b2",
                           "yield": 0.0, "rate_capacity": 4.0})),
            &materials(),
        )
        .unwrap_err();
        assert!(matches!(err, ParamError::OutOfBounds { .. }));
    }
}
