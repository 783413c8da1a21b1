//! Turning a measured success rate into a sorter compartment.

use circuflow_core::compartments::SorterParams;
use circuflow_core::{Network, NetworkError};
use serde::Serialize;

use crate::evaluate::SuccessReport;
use crate::RobotError;

const HOURS_PER_DAY: f64 = 24.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SorterCoupling {
    pub success_rate: f64,
    /// items per hour
    pub item_rate: f64,
    /// kg per item
    pub item_mass: f64,
    /// kg/s
    pub throughput: f64,
    /// Mass sorted correctly per day of operation at full throughput, kg.
    pub sorted_per_day: f64,
    /// Mass rejected per day, kg.
    pub rejected_per_day: f64,
}

impl SorterCoupling {
    pub fn params(&self) -> SorterParams {
        SorterParams::from_items(self.success_rate, self.item_rate, self.item_mass)
    }

    /// Copy of `network` with sorter `k` set to this cell's success rate and
    /// item throughput.
    pub fn apply(&self, network: &Network, k: u32) -> Result<Network, NetworkError> {
        network
            .with_param(k, "success_rate", self.success_rate)?
            .with_param(k, "item_mass", self.item_mass)?
            .with_param(k, "item_rate", self.item_rate)
    }
}

/// A robot cell picking `item_rate` items per hour of `item_mass` kg with
/// the given success rate.
pub fn success_to_sorter(
    success_rate: f64,
    item_mass: f64,
    item_rate: f64,
) -> Result<SorterCoupling, RobotError> {
    if !(0.0..=1.0).contains(&success_rate) {
        return Err(RobotError::Param(format!(
            "success rate {success_rate} outside [0, 1]"
        )));
    }
    for (name, v) in [("item_mass", item_mass), ("item_rate", item_rate)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(RobotError::Param(format!("{name} = {v} must be positive")));
        }
    }
    let p = SorterParams::from_items(success_rate, item_rate, item_mass);
    let daily = item_rate * item_mass * HOURS_PER_DAY;
    let sorted_per_day = success_rate * daily;
    Ok(SorterCoupling {
        success_rate,
        item_rate,
        item_mass,
        throughput: p.throughput,
        sorted_per_day,
        rejected_per_day: daily - sorted_per_day,
    })
}

/// [`success_to_sorter`] with the rate measured by an evaluation.
pub fn report_to_sorter(
    report: &SuccessReport,
    item_mass: f64,
    item_rate: f64,
) -> Result<SorterCoupling, RobotError> {
    success_to_sorter(report.success_rate, item_mass, item_rate)
}
