//! Sorting facility, e.g. a robot cell picking items off a conveyor.

use serde::Deserialize;

use super::{
    available, material, nonnegative, parse_params, Bounds, CompartmentModel, ParamError,
    PortSpec, RateError, RateInput, RateOutput,
};
use crate::network::{Materials, ParamMap};

const SECONDS_PER_HOUR: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SorterParams {
    /// Fraction `s` of processed items sorted correctly.
    pub success_rate: f64,
    /// kg/s
    pub throughput: f64,
    /// kg per item, when the throughput derives from an item rate.
    pub item_mass: Option<f64>,
    /// items per hour
    pub item_rate: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SorterSplit {
    pub accept: f64,
    pub reject: f64,
}

impl SorterParams {
    /// Throughput of a cell handling `item_rate` items per hour of
    /// `item_mass` kg each.
    pub fn from_items(success_rate: f64, item_rate: f64, item_mass: f64) -> Self {
        Self {
            success_rate,
            throughput: item_rate * item_mass / SECONDS_PER_HOUR,
            item_mass: Some(item_mass),
            item_rate: Some(item_rate),
        }
    }

    /// Splits a processed rate into accepted and rejected streams. The two
    /// parts sum to `processed` up to one rounding.
    pub fn split(&self, processed: f64) -> Result<SorterSplit, RateError> {
        nonnegative("processed rate", processed)?;
        if processed > self.throughput {
            return Err(RateError::OverThroughput {
                rate: processed,
                throughput: self.throughput,
            });
        }
        Ok(self.split_unchecked(processed))
    }

    fn split_unchecked(&self, processed: f64) -> SorterSplit {
        let accept = self.success_rate * processed;
        SorterSplit {
            accept,
            reject: processed - accept,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    material: String,
    success_rate: f64,
    #[serde(default)]
    throughput: Option<f64>,
    #[serde(default)]
    item_mass: Option<f64>,
    #[serde(default)]
    item_rate: Option<f64>,
    #[serde(default)]
    secondary_fraction: f64,
}

/// Sorter compartment with an input buffer. Accepted material leaves on
/// `accept`, except a fraction `secondary_fraction` routed to `secondary`
/// (e.g. multi-component products bound for disassembly). Rejected material
/// leaves on `reject`.
#[derive(Debug, Clone)]
pub struct Sorter {
    pub material: usize,
    pub params: SorterParams,
    pub secondary_fraction: f64,
    ports: Vec<PortSpec>,
}

const IN: usize = 0;
const ACCEPT: usize = 1;
const SECONDARY: usize = 2;
const REJECT: usize = 3;

impl Sorter {
    pub fn from_params(params: &ParamMap, materials: &Materials) -> Result<Self, ParamError> {
        let c: Config = parse_params(params)?;
        let mat = material(materials, "material", &c.material)?;
        Bounds::closed(0.0, 1.0).check("success_rate", c.success_rate)?;
        Bounds::closed(0.0, 1.0).check("secondary_fraction", c.secondary_fraction)?;
        let throughput = match (c.throughput, c.item_rate, c.item_mass) {
            (t, Some(rate), Some(mass)) => {
                Bounds::nonnegative().check("item_rate", rate)?;
                Bounds::positive().check("item_mass", mass)?;
                let derived = rate * mass / SECONDS_PER_HOUR;
                if let Some(t) = t {
                    if (t - derived).abs() > 1e-12 * derived.max(t).max(f64::MIN_POSITIVE) {
                        return Err(ParamError::Inconsistent {
                            field: "throughput".into(),
                            message: format!(
                                "{t} differs from item_rate * item_mass / 3600 = {derived}"
                            ),
                        });
                    }
                }
                derived
            }
            (Some(t), None, None) => t,
            (_, _, _) => {
                return Err(ParamError::Inconsistent {
                    field: "throughput".into(),
                    message: "give `throughput` or both `item_rate` and `item_mass`".into(),
                })
            }
        };
        Bounds::nonnegative().check("throughput", throughput)?;
        Ok(Self {
            material: mat,
            params: SorterParams {
                success_rate: c.success_rate,
                throughput,
                item_mass: c.item_mass,
                item_rate: c.item_rate,
            },
            secondary_fraction: c.secondary_fraction,
            ports: vec![
                PortSpec::input("in", mat),
                PortSpec::output("accept", mat, c.secondary_fraction < 1.0),
                PortSpec::output("secondary", mat, c.secondary_fraction > 0.0),
                PortSpec::output("reject", mat, c.success_rate < 1.0),
            ],
        })
    }
}

impl CompartmentModel for Sorter {
    fn kind(&self) -> &'static str {
        "sorter"
    }

    fn ports(&self) -> &[PortSpec] {
        &self.ports
    }

    fn feedthrough(&self) -> bool {
        true
    }

    fn param_bounds(&self, name: &str) -> Option<Bounds> {
        match name {
            "success_rate" | "secondary_fraction" => Some(Bounds::closed(0.0, 1.0)),
            "throughput" | "item_rate" => Some(Bounds::nonnegative()),
            "item_mass" => Some(Bounds::positive()),
            _ => None,
        }
    }

    fn rates(&self, input: &RateInput<'_>, output: &mut RateOutput) {
        let store = input.store[self.material];
        let inflow = input.inflow[IN];
        let processed = available(self.params.throughput, inflow, store, input.dt_ref);
        let split = self.params.split_unchecked(processed);
        let secondary = self.secondary_fraction * split.accept;
        output.outflow[ACCEPT] = split.accept - secondary;
        output.outflow[SECONDARY] = secondary;
        output.outflow[REJECT] = split.reject;
        output.dstore[self.material] = inflow - processed;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compartments::testing::{eval, imbalance, materials, params};
    use serde_json::json;

    fn p(s: f64, throughput: f64) -> SorterParams {
        SorterParams {
            success_rate: s,
            throughput,
            item_mass: None,
            item_rate: None,
        }
    }

    #[test]
    fn sac_success_rate_split() {
        let r = p(0.9597, 200.0).split(100.0).unwrap();
        assert!((r.accept - 95.97).abs() < 1e-12);
        assert!((r.reject - 4.03).abs() < 1e-12);
        assert!((r.accept + r.reject - 100.0).abs() <= 1e-12 * 100.0);
    }

    #[test]
    fn a2c_success_rate_split() {
        let r = p(0.6091, 10.0).split(10.0).unwrap();
        assert!((r.accept - 6.091).abs() < 1e-12);
        assert!((r.reject - 3.909).abs() < 1e-12);
    }

    #[test]
    fn perfect_sorter_rejects_nothing() {
        assert_eq!(p(1.0, 10.0).split(7.3).unwrap().reject, 0.0);
    }

    #[test]
    fn over_throughput_is_an_error() {
        assert!(matches!(
            p(0.5, 1.0).split(1.5),
            Err(RateError::OverThroughput { .. })
        ));
    }

    #[test]
    fn item_rate_derives_throughput() {
        let s = Sorter::from_params(
            &params(json!({"material": "b1", "success_rate": 0.9,
                           "item_rate": 600.0, "item_mass": 0.05})),
            &materials(),
        )
        .unwrap();
        assert!((s.params.throughput - 30.0 / 3600.0).abs() < 1e-15);
    }

    #[test]
    fn inconsistent_throughput_is_rejected() {
        let err = Sorter::from_params(
            &params(json!({"material": "b1", "success_rate": 0.9, "throughput": 1.0,
                           "item_rate": 600.0, "item_mass": 0.05})),
            &materials(),
        )
        .unwrap_err();
        assert!(matches!(err, ParamError::Inconsistent { .. }));
    }

    #[test]
    fn buffered_sorter_routes_secondary_stream() {
        let s = Sorter::from_params(
            &params(json!({"material": "b2", "success_rate": 0.8, "throughput": 2.0,
                           "secondary_fraction": 0.25})),
            &materials(),
        )
        .unwrap();
        let inflow = [("in", 3.0)];
        let out = eval(&s, &[0.0, 5.0], &inflow, &[], 1.0);
        assert!((out.outflow[ACCEPT] - 1.2).abs() < 1e-12);
        assert!((out.outflow[SECONDARY] - 0.4).abs() < 1e-12);
        assert!((out.outflow[REJECT] - 0.4).abs() < 1e-12);
        assert_eq!(out.dstore[1], 1.0);
        assert!(imbalance(&s, &inflow, &out).abs() < 1e-12);
    }
}
