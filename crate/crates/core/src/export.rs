//! Trajectory export: a per-step CSV table and a JSON run summary.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::metrics::{circularity, CircularityReport, MetricsError};
use crate::network::Network;
use crate::simulator::{check_conservation, ConservationReport, SimConfig, SimEvent, Trajectory};

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("trajectory does not belong to network `{0}`")]
    Mismatch(String),
}

/// `(network position, material position)` of each store column, ordered by
/// ascending `k`, then material index. A compartment gets a column for every
/// material it has a port for or holds initially.
fn store_columns(network: &Network) -> Vec<(usize, usize, String)> {
    let mut order: Vec<usize> = (0..network.compartments.len()).collect();
    order.sort_by_key(|&p| network.compartments[p].id.k);
    let mut cols = Vec::new();
    for p in order {
        let c = &network.compartments[p];
        for (m, mat) in network.materials.iter().enumerate() {
            let touched = c.model().ports().iter().any(|s| s.material == m)
                || c.initial_mass.contains_key(&mat.label);
            if touched {
                cols.push((p, m, format!("{}.{}", c.id, mat.label)));
            }
        }
    }
    cols
}

/// Writes one row per recorded time: `time`, every store, every connection
/// rate in file order, then `m_u_rate`.
pub fn write_csv<W: Write>(
    network: &Network,
    trajectory: &Trajectory,
    out: W,
) -> Result<(), ExportError> {
    if trajectory.connection_ids.len() != network.connections.len()
        || trajectory.compartments.len() != network.compartments.len()
    {
        return Err(ExportError::Mismatch(network.name.clone()));
    }
    let q = network.materials.len();
    let cols = store_columns(network);
    let red: Vec<usize> = network
        .unsustainable
        .iter()
        .filter_map(|id| network.connection_position(id))
        .collect();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["time".to_string()];
    header.extend(cols.iter().map(|(_, _, name)| name.clone()));
    header.extend(network.connections.iter().map(|c| c.id.clone()));
    header.push("m_u_rate".to_string());
    w.write_record(&header)?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for (i, &t) in trajectory.times.iter().enumerate() {
        row.clear();
        row.push(t.to_string());
        let state = &trajectory.states[i];
        row.extend(cols.iter().map(|&(p, m, _)| state[p * q + m].to_string()));
        let rates = &trajectory.flows[i].rates;
        row.extend(rates.iter().map(f64::to_string));
        let m_u = red.iter().fold(0.0, |acc, &e| acc + rates[e]);
        row.push(m_u.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Headline metrics without the per-step series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSummary {
    pub cumulative_unsustainable: f64,
    pub cumulative_extraction: f64,
    pub cumulative_leak: f64,
    pub cumulative_return: f64,
    pub total_throughput: f64,
    pub circularity_index: f64,
}

impl From<&CircularityReport> for MetricsSummary {
    fn from(r: &CircularityReport) -> Self {
        Self {
            cumulative_unsustainable: r.cumulative_unsustainable,
            cumulative_extraction: r.cumulative_extraction,
            cumulative_leak: r.cumulative_leak,
            cumulative_return: r.cumulative_return,
            total_throughput: r.total_throughput,
            circularity_index: r.circularity_index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaterialLedger {
    pub total_stored: f64,
    pub cumulative_extracted: f64,
    pub cumulative_sunk: f64,
    pub cumulative_converted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub tool: String,
    pub version: String,
    pub network: String,
    /// SHA-256 of the input file text, hex encoded.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_sha256: Option<String>,
    pub simulation: SimConfig,
    pub steps: usize,
    pub final_time: f64,
    pub final_ledger: BTreeMap<String, MaterialLedger>,
    pub metrics: MetricsSummary,
    pub conservation: ConservationReport,
    pub events: Vec<SimEvent>,
}

impl RunSummary {
    pub fn new(trajectory: &Trajectory, input_sha256: Option<String>) -> Result<Self, ExportError> {
        let report = circularity(trajectory)?;
        let mut final_ledger = BTreeMap::new();
        if let Some(e) = trajectory.final_ledger() {
            for (m, label) in trajectory.materials.iter().enumerate() {
                final_ledger.insert(
                    label.clone(),
                    MaterialLedger {
                        total_stored: e.total_stored[m],
                        cumulative_extracted: e.cumulative_extracted[m],
                        cumulative_sunk: e.cumulative_sunk[m],
                        cumulative_converted: e.cumulative_converted[m],
                    },
                );
            }
        }
        Ok(Self {
            tool: "circuflow".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            network: trajectory.network_name.clone(),
            input_sha256,
            simulation: trajectory.config.clone(),
            steps: trajectory.steps(),
            final_time: trajectory.times.last().copied().unwrap_or(0.0),
            final_ledger,
            metrics: MetricsSummary::from(&report),
            conservation: check_conservation(trajectory),
            events: trajectory.events.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}
