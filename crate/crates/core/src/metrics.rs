//! Circularity metrics: the unsustainable flow rate `ṁ_u` (sum of the
//! designated unsustainable connections) and its horizon integral `m_u`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::network::Network;
use crate::simulator::{FlowRecord, Trajectory};

/// Guards the circularity index denominator, kg.
pub const THROUGHPUT_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("designated connection `{0}` is missing from the flow record")]
    MissingConnection(String),
    #[error("cannot compare runs with different time grids: {a} vs {b}")]
    GridMismatch { a: String, b: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircularityReport {
    pub name: String,
    pub dt: f64,
    pub horizon: f64,
    pub times: Vec<f64>,
    /// `ṁ_u` at each recorded time, kg/s.
    pub unsustainable_rate: Vec<f64>,
    /// Summed rate of the designated return connections, kg/s.
    pub return_rate: Vec<f64>,
    /// `m_u`, kg.
    pub cumulative_unsustainable: f64,
    /// Designated unsustainable mass leaving source compartments, kg.
    pub cumulative_extraction: f64,
    /// Designated unsustainable mass not leaving a source, kg.
    pub cumulative_leak: f64,
    pub cumulative_return: f64,
    /// Mass moved over every connection, kg.
    pub total_throughput: f64,
    pub circularity_index: f64,
}

fn positions(ids: &[String], all: &[String]) -> Result<Vec<usize>, MetricsError> {
    ids.iter()
        .map(|id| {
            all.iter()
                .position(|c| c == id)
                .ok_or_else(|| MetricsError::MissingConnection(id.clone()))
        })
        .collect()
}

// `Iterator::sum` over floats yields -0.0 when empty.
fn total(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, |a, b| a + b)
}

fn rate_sum(record: &FlowRecord, idx: &[usize]) -> Result<f64, MetricsError> {
    let mut sum = 0.0;
    for &i in idx {
        sum += record
            .rates
            .get(i)
            .copied()
            .ok_or_else(|| MetricsError::MissingConnection(format!("#{i}")))?;
    }
    Ok(sum)
}

/// `ṁ_u` for one flow record.
pub fn unsustainable_rate(record: &FlowRecord, network: &Network) -> Result<f64, MetricsError> {
    if network.unsustainable.is_empty() {
        log::warn!("network `{}` designates no unsustainable flows", network.name);
        return Ok(0.0);
    }
    let ids: Vec<String> = network.connections.iter().map(|c| c.id.clone()).collect();
    if record.rates.len() != ids.len() {
        let missing = network
            .unsustainable
            .iter()
            .find(|id| {
                ids.iter()
                    .position(|c| c == *id)
                    .is_none_or(|p| p >= record.rates.len())
            })
            .cloned();
        if let Some(id) = missing {
            return Err(MetricsError::MissingConnection(id));
        }
    }
    rate_sum(record, &positions(&network.unsustainable, &ids)?)
}

/// `m_u`: integral of `ṁ_u` over the horizon, with the integrator's own
/// quadrature.
pub fn cumulative_unsustainable(trajectory: &Trajectory) -> Result<f64, MetricsError> {
    let idx = positions(&trajectory.unsustainable, &trajectory.connection_ids)?;
    let last = match trajectory.cumulative_flows.last() {
        Some(v) => v,
        None => return Ok(0.0),
    };
    Ok(total(idx.iter().map(|&i| last[i])))
}

/// Full metrics report for a trajectory.
pub fn circularity(trajectory: &Trajectory) -> Result<CircularityReport, MetricsError> {
    let ids = &trajectory.connection_ids;
    let red = positions(&trajectory.unsustainable, ids)?;
    let green = positions(&trajectory.returns, ids)?;
    let zeros = vec![0.0; ids.len()];
    let last = trajectory.cumulative_flows.last().unwrap_or(&zeros);
    let series = |idx: &[usize]| -> Result<Vec<f64>, MetricsError> {
        trajectory.flows.iter().map(|r| rate_sum(r, idx)).collect()
    };
    let mut extraction = 0.0;
    let mut leak = 0.0;
    for &i in &red {
        if trajectory.extraction.contains(&ids[i]) {
            extraction += last[i];
        } else {
            leak += last[i];
        }
    }
    let m_u = total(red.iter().map(|&i| last[i]));
    let throughput = total(last.iter().copied());
    let index = (1.0 - m_u / throughput.max(THROUGHPUT_EPSILON)).clamp(0.0, 1.0);
    Ok(CircularityReport {
        name: trajectory.network_name.clone(),
        dt: trajectory.config.dt,
        horizon: trajectory.config.horizon,
        times: trajectory.flows.iter().map(|r| r.time).collect(),
        unsustainable_rate: series(&red)?,
        return_rate: series(&green)?,
        cumulative_unsustainable: m_u,
        cumulative_extraction: extraction,
        cumulative_leak: leak,
        cumulative_return: total(green.iter().map(|&i| last[i])),
        total_throughput: throughput,
        circularity_index: index,
    })
}

/// Orders two reports by `m_u`, then cumulative leak, then cumulative
/// extraction, then name. `Less` means `a` is the better design.
pub fn compare_objective(
    a: &CircularityReport,
    b: &CircularityReport,
) -> Result<Ordering, MetricsError> {
    if a.dt != b.dt || a.horizon != b.horizon {
        return Err(MetricsError::GridMismatch {
            a: format!("dt={} horizon={}", a.dt, a.horizon),
            b: format!("dt={} horizon={}", b.dt, b.horizon),
        });
    }
    Ok(a.cumulative_unsustainable
        .total_cmp(&b.cumulative_unsustainable)
        .then(a.cumulative_leak.total_cmp(&b.cumulative_leak))
        .then(a.cumulative_extraction.total_cmp(&b.cumulative_extraction))
        .then_with(|| a.name.cmp(&b.name)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(name: &str, m_u: f64, leak: f64) -> CircularityReport {
        CircularityReport {
            name: name.into(),
            dt: 1.0,
            horizon: 10.0,
            times: vec![],
            unsustainable_rate: vec![],
            return_rate: vec![],
            cumulative_unsustainable: m_u,
            cumulative_extraction: m_u - leak,
            cumulative_leak: leak,
            cumulative_return: 0.0,
            total_throughput: 10.0,
            circularity_index: 0.0,
        }
    }

    #[test]
    fn ordering_and_tie_breaks() {
        let a = report("a", 1.0, 0.5);
        let b = report("b", 2.0, 0.1);
        assert_eq!(compare_objective(&a, &b).unwrap(), Ordering::Less);
        let c = report("c", 1.0, 0.2);
        assert_eq!(compare_objective(&a, &c).unwrap(), Ordering::Greater);
        let a2 = report("z", 1.0, 0.5);
        assert_eq!(compare_objective(&a, &a2).unwrap(), Ordering::Less);
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let a = report("a", 1.0, 0.5);
        let mut b = report("b", 1.0, 0.5);
        b.horizon = 20.0;
        assert!(compare_objective(&a, &b).is_err());
    }

    #[test]
    fn rate_is_sum_of_designated() {
        let net = crate::bundled::load("fig3b_synthetic_linear").unwrap();
        let mut rates = vec![0.0; net.connections.len()];
        rates[net.connection_position("c1-c5").unwrap()] = 2.0;
        rates[net.connection_position("c7-c4").unwrap()] = 0.5;
        rates[net.connection_position("c2-c6").unwrap()] = 9.0;
        let r = FlowRecord { time: 0.0, rates };
        assert_eq!(unsustainable_rate(&r, &net).unwrap(), 2.5);
        let short = FlowRecord {
            time: 0.0,
            rates: vec![1.0],
        };
        assert!(unsustainable_rate(&short, &net).is_err());
    }

    #[test]
    fn undesignated_network_rate_is_zero() {
        let net = crate::bundled::load("rankine").unwrap();
        let r = FlowRecord {
            time: 0.0,
            rates: vec![10.0; net.connections.len()],
        };
        assert_eq!(unsustainable_rate(&r, &net).unwrap(), 0.0);
    }
}
