//! Assembly of the network vector field from the per-compartment rate
//! functions.
//!
//! State layout: `stores[c * q + m]` for every compartment `c` and material
//! `m`, then the running integral of every connection rate, then the running
//! net conversion per material. Integrating the flow and conversion
//! accumulators with the same scheme as the stores keeps the ledger identity
//! exact up to round-off.

use crate::compartments::{RateInput, RateOutput};
use crate::network::{Direction, Network};
use crate::validate::evaluation_order;

use super::SimError;

pub(crate) struct Assembly<'a> {
    pub(crate) network: &'a Network,
    pub(crate) q: usize,
    pub(crate) n_conn: usize,
    order: Vec<usize>,
    feedthrough: Vec<bool>,
    port_base: Vec<usize>,
    inflow_conns: Vec<Vec<usize>>,
    out_conn: Vec<Option<usize>>,
    observed: Vec<Vec<usize>>,
    dt_ref: f64,
}

pub(crate) struct Scratch {
    pub(crate) conn_rates: Vec<f64>,
    inflow: Vec<f64>,
    observed: Vec<f64>,
    outputs: Vec<RateOutput>,
}

impl<'a> Assembly<'a> {
    /// Wires the network. The network must have passed validation.
    pub(crate) fn new(network: &'a Network, dt_ref: f64) -> Result<Self, SimError> {
        let q = network.materials.len();
        let comps = &network.compartments;
        let order = evaluation_order(network).map_err(|ks| {
            SimError::Invalid(crate::validate::ValidationReport {
                violations: vec![crate::validate::Violation::AlgebraicLoop { compartments: ks }],
            })
        })?;
        let feedthrough = comps.iter().map(|c| c.model().feedthrough()).collect();
        let mut port_base = Vec::with_capacity(comps.len());
        let mut n_ports = 0;
        for c in comps {
            port_base.push(n_ports);
            n_ports += c.model().ports().len();
        }
        let flat = |k: u32, port: &str| -> Option<usize> {
            let p = network.compartment_position(k)?;
            let j = comps[p].model().port_index(port)?;
            Some(port_base[p] + j)
        };
        let mut inflow_conns = vec![Vec::new(); n_ports];
        let mut out_conn = vec![None; n_ports];
        for (e, conn) in network.connections.iter().enumerate() {
            let from = flat(conn.from.k, &conn.from.port);
            let to = flat(conn.to.k, &conn.to.port);
            match (from, to) {
                (Some(f), Some(t)) => {
                    out_conn[f] = Some(e);
                    inflow_conns[t].push(e);
                }
                _ => {
                    return Err(SimError::Invalid(network.validate()));
                }
            }
        }
        let observed = comps
            .iter()
            .map(|c| {
                c.model()
                    .observes()
                    .iter()
                    .filter_map(|id| network.connection_position(id))
                    .collect()
            })
            .collect();
        Ok(Self {
            network,
            q,
            n_conn: network.connections.len(),
            order,
            feedthrough,
            port_base,
            inflow_conns,
            out_conn,
            observed,
            dt_ref,
        })
    }

    pub(crate) fn n_stores(&self) -> usize {
        self.network.compartments.len() * self.q
    }

    pub(crate) fn dim(&self) -> usize {
        self.n_stores() + self.n_conn + self.q
    }

    pub(crate) fn flow_offset(&self) -> usize {
        self.n_stores()
    }

    pub(crate) fn conversion_offset(&self) -> usize {
        self.n_stores() + self.n_conn
    }

    pub(crate) fn scratch(&self) -> Scratch {
        let max_ports = self
            .network
            .compartments
            .iter()
            .map(|c| c.model().ports().len())
            .max()
            .unwrap_or(0);
        let max_obs = self.observed.iter().map(Vec::len).max().unwrap_or(0);
        Scratch {
            conn_rates: vec![0.0; self.n_conn],
            inflow: vec![0.0; max_ports],
            observed: vec![0.0; max_obs],
            outputs: self
                .network
                .compartments
                .iter()
                .map(|c| RateOutput::zeros(c.model().ports().len(), self.q))
                .collect(),
        }
    }

    fn evaluate_compartment(&self, p: usize, x: &[f64], s: &mut Scratch) {
        let c = &self.network.compartments[p];
        let model = c.model();
        let n_ports = model.ports().len();
        let base = self.port_base[p];
        for j in 0..n_ports {
            s.inflow[j] = self.inflow_conns[base + j]
                .iter()
                .map(|&e| s.conn_rates[e])
                .sum();
        }
        for (slot, &e) in s.observed.iter_mut().zip(&self.observed[p]) {
            *slot = s.conn_rates[e];
        }
        let out = &mut s.outputs[p];
        out.clear();
        model.rates(
            &RateInput {
                store: &x[p * self.q..(p + 1) * self.q],
                inflow: &s.inflow[..n_ports],
                observed: &s.observed[..self.observed[p].len()],
                dt_ref: self.dt_ref,
            },
            out,
        );
    }

    /// Evaluates `dx = f(x)`; connection rates are left in `s.conn_rates`.
    pub(crate) fn eval(&self, x: &[f64], s: &mut Scratch, dx: &mut [f64]) -> Result<(), SimError> {
        s.conn_rates.iter_mut().for_each(|r| *r = 0.0);
        for &p in &self.order {
            self.evaluate_compartment(p, x, s);
            let c = &self.network.compartments[p];
            let base = self.port_base[p];
            for (j, spec) in c.model().ports().iter().enumerate() {
                if spec.direction != Direction::Output {
                    continue;
                }
                let rate = s.outputs[p].outflow[j];
                if !rate.is_finite() {
                    return Err(SimError::NonFinite {
                        compartment: c.id,
                        what: format!("outflow on port `{}`", spec.name),
                    });
                }
                match self.out_conn[base + j] {
                    Some(e) => s.conn_rates[e] = rate,
                    None if rate != 0.0 => {
                        return Err(SimError::UnconnectedFlow {
                            compartment: c.id,
                            port: spec.name.clone(),
                        })
                    }
                    None => {}
                }
            }
        }
        // Non-feedthrough outflows do not depend on inflows, but their store
        // derivatives do; evaluate them again now that every inflow is known.
        for p in 0..self.network.compartments.len() {
            if !self.feedthrough[p] {
                self.evaluate_compartment(p, x, s);
            }
        }
        let q = self.q;
        let conv = self.conversion_offset();
        dx[conv..conv + q].iter_mut().for_each(|v| *v = 0.0);
        for (p, c) in self.network.compartments.iter().enumerate() {
            let out = &s.outputs[p];
            for m in 0..q {
                let d = out.dstore[m];
                if !d.is_finite() {
                    return Err(SimError::NonFinite {
                        compartment: c.id,
                        what: format!(
                            "store derivative of `{}`",
                            self.network.materials.label(m)
                        ),
                    });
                }
                dx[p * q + m] = d;
                dx[conv + m] += out.conversion[m];
            }
        }
        let flows = self.flow_offset();
        dx[flows..flows + self.n_conn].copy_from_slice(&s.conn_rates);
        Ok(())
    }
}
