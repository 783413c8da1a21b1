//! Design search: choosing the best of several network variants, grid
//! optimization of compartment parameters, and finite-difference
//! sensitivity of `m_u` to a single parameter.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compartments::Bounds;
use crate::metrics::{circularity, compare_objective, CircularityReport, MetricsError};
use crate::network::{Network, NetworkError};
use crate::parallel;
use crate::simulator::{simulate, LedgerEntry, SimConfig, SimError};
use crate::validate::ValidationReport;

/// Default relative perturbation of [`sensitivity`].
pub const DEFAULT_REL_DELTA: f64 = 1e-3;

#[derive(Debug, thiserror::Error)]
pub enum DesignError {
    #[error("no variants to compare")]
    NoVariants,
    #[error("duplicate variant name `{0}`")]
    DuplicateVariant(String),
    #[error("variant `{name}` is invalid:\n{report}")]
    Invalid {
        name: String,
        report: ValidationReport,
    },
    #[error("simulation of `{name}` failed: {source}")]
    Simulation {
        name: String,
        #[source]
        source: SimError,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("parameter space is empty")]
    EmptySpace,
    #[error("grid for c{k}.{name} is empty")]
    EmptyGrid { k: u32, name: String },
    #[error("c{k} has no tunable parameter `{name}`")]
    UnknownParam { k: u32, name: String },
    #[error("c{k}.{name} = {value} is outside {bounds}")]
    OutOfBounds {
        k: u32,
        name: String,
        value: f64,
        bounds: Bounds,
    },
    #[error("budget must allow at least one evaluation")]
    ZeroBudget,
    #[error("relative perturbation {0} must lie in (0, 0.1]")]
    RelDelta(f64),
    #[error("c{k}.{name} = {value} cannot be perturbed within {bounds}")]
    NotPerturbable {
        k: u32,
        name: String,
        value: f64,
        bounds: Bounds,
    },
}

/// Simulates `network` under `config` and reports its circularity metrics.
pub fn evaluate(network: &Network, config: &SimConfig) -> Result<CircularityReport, DesignError> {
    let report = network.validate();
    if !report.is_valid() {
        return Err(DesignError::Invalid {
            name: network.name.clone(),
            report,
        });
    }
    let trajectory = simulate(network, config).map_err(|source| DesignError::Simulation {
        name: network.name.clone(),
        source,
    })?;
    Ok(circularity(&trajectory)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub best: String,
    /// Variant names, best first.
    pub ranking: Vec<String>,
    /// One report per variant, in name order.
    pub reports: Vec<CircularityReport>,
}

/// Simulates every variant under `config` and returns the one with the
/// smallest `m_u`, with ties broken as in [`compare_objective`].
pub fn select_best(variants: &[Network], config: &SimConfig) -> Result<Selection, DesignError> {
    if variants.is_empty() {
        return Err(DesignError::NoVariants);
    }
    let mut seen = BTreeSet::new();
    for v in variants {
        if !seen.insert(v.name.as_str()) {
            return Err(DesignError::DuplicateVariant(v.name.clone()));
        }
    }
    let mut order: Vec<&Network> = variants.iter().collect();
    order.sort_by(|a, b| a.name.cmp(&b.name));
    let results: Vec<Result<CircularityReport, DesignError>> = parallel::pool()
        .install(|| order.par_iter().map(|n| evaluate(n, config)).collect());
    let reports = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut ranked: Vec<&CircularityReport> = reports.iter().collect();
    let mut err = None;
    ranked.sort_by(|a, b| {
        compare_objective(a, b).unwrap_or_else(|e| {
            err.get_or_insert(e);
            Ordering::Equal
        })
    });
    if let Some(e) = err {
        return Err(e.into());
    }
    let ranking: Vec<String> = ranked.iter().map(|r| r.name.clone()).collect();
    Ok(Selection {
        best: ranking[0].clone(),
        ranking,
        reports,
    })
}

/// One tunable parameter and its candidate values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamAxis {
    pub k: u32,
    pub name: String,
    pub grid: Vec<f64>,
}

impl ParamAxis {
    pub fn new(k: u32, name: &str, grid: Vec<f64>) -> Self {
        Self {
            k,
            name: name.to_string(),
            grid,
        }
    }
}

pub type ParamSpace = Vec<ParamAxis>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    /// `(k, name, value)` for every axis, in space order.
    pub params: Vec<(u32, String, f64)>,
    pub objective: f64,
    pub report: CircularityReport,
    /// Number of distinct grid points simulated.
    pub evaluations: usize,
    pub exhaustive: bool,
}

fn param_bounds(network: &Network, k: u32, name: &str) -> Result<Bounds, DesignError> {
    let c = network
        .compartment(k)
        .ok_or(NetworkError::UnknownCompartment(k))?;
    c.model()
        .param_bounds(name)
        .ok_or_else(|| DesignError::UnknownParam {
            k,
            name: name.to_string(),
        })
}

/// Sorted, deduplicated grids checked against the kind bounds.
fn prepare_space(network: &Network, space: &ParamSpace) -> Result<Vec<Vec<f64>>, DesignError> {
    if space.is_empty() {
        return Err(DesignError::EmptySpace);
    }
    space
        .iter()
        .map(|axis| {
            let bounds = param_bounds(network, axis.k, &axis.name)?;
            if axis.grid.is_empty() {
                return Err(DesignError::EmptyGrid {
                    k: axis.k,
                    name: axis.name.clone(),
                });
            }
            for &value in &axis.grid {
                if !bounds.contains(value) {
                    return Err(DesignError::OutOfBounds {
                        k: axis.k,
                        name: axis.name.clone(),
                        value,
                        bounds,
                    });
                }
            }
            let mut g = axis.grid.clone();
            g.sort_by(f64::total_cmp);
            g.dedup();
            Ok(g)
        })
        .collect()
}

fn apply(
    network: &Network,
    space: &ParamSpace,
    values: &[f64],
) -> Result<Network, DesignError> {
    let mut n = network.clone();
    for (axis, &v) in space.iter().zip(values) {
        n = n.with_param(axis.k, &axis.name, v)?;
    }
    Ok(n)
}

fn point(grids: &[Vec<f64>], index: &[usize]) -> Vec<f64> {
    index.iter().zip(grids).map(|(&i, g)| g[i]).collect()
}

/// Minimizes `m_u` over a parameter grid. The whole grid is searched when it
/// has at most `budget` points; otherwise coordinate descent runs until a
/// sweep makes no progress or `budget` distinct points have been simulated.
/// Equal objectives resolve to the lexicographically smallest tuple.
pub fn optimize_params(
    network: &Network,
    space: &ParamSpace,
    config: &SimConfig,
    budget: usize,
) -> Result<Optimum, DesignError> {
    if budget == 0 {
        return Err(DesignError::ZeroBudget);
    }
    let grids = prepare_space(network, space)?;
    let size = grids
        .iter()
        .try_fold(1usize, |acc, g| acc.checked_mul(g.len()));
    let run = |index: &[usize]| -> Result<CircularityReport, DesignError> {
        let mut n = apply(network, space, &point(&grids, index))?;
        n.name = network.name.clone();
        evaluate(&n, config)
    };
    let (best, report, evaluations, exhaustive) = match size {
        Some(total) if total <= budget => {
            let indices: Vec<Vec<usize>> = (0..total)
                .map(|mut flat| {
                    let mut idx = vec![0; grids.len()];
                    for (slot, g) in idx.iter_mut().zip(&grids).rev() {
                        *slot = flat % g.len();
                        flat /= g.len();
                    }
                    idx
                })
                .collect();
            let reports: Vec<Result<CircularityReport, DesignError>> = parallel::pool()
                .install(|| indices.par_iter().map(|i| run(i)).collect());
            let mut best: Option<(usize, CircularityReport)> = None;
            for (i, r) in reports.into_iter().enumerate() {
                let r = r?;
                let better = match &best {
                    None => true,
                    Some((_, b)) => r.cumulative_unsustainable < b.cumulative_unsustainable,
                };
                if better {
                    best = Some((i, r));
                }
            }
            let (i, report) = best.expect("grid is nonempty");
            (indices[i].clone(), report, total, true)
        }
        _ => {
            let (idx, report, n) = coordinate_descent(&grids, budget, &run)?;
            (idx, report, n, false)
        }
    };
    let values = point(&grids, &best);
    Ok(Optimum {
        params: space
            .iter()
            .zip(values)
            .map(|(a, v)| (a.k, a.name.clone(), v))
            .collect(),
        objective: report.cumulative_unsustainable,
        report,
        evaluations,
        exhaustive,
    })
}

type Memo = HashMap<Vec<usize>, CircularityReport>;

fn coordinate_descent(
    grids: &[Vec<f64>],
    budget: usize,
    run: &(dyn Fn(&[usize]) -> Result<CircularityReport, DesignError> + Sync),
) -> Result<(Vec<usize>, CircularityReport, usize), DesignError> {
    let mut memo: Memo = HashMap::new();
    let mut current = vec![0; grids.len()];
    memo.insert(current.clone(), run(&current)?);
    loop {
        let mut moved = false;
        for axis in 0..grids.len() {
            let candidates: Vec<Vec<usize>> = (0..grids[axis].len())
                .map(|v| {
                    let mut c = current.clone();
                    c[axis] = v;
                    c
                })
                .filter(|c| !memo.contains_key(c))
                .take(budget.saturating_sub(memo.len()))
                .collect();
            let fresh: Vec<Result<CircularityReport, DesignError>> = parallel::pool()
                .install(|| candidates.par_iter().map(|c| run(c)).collect());
            for (c, r) in candidates.into_iter().zip(fresh) {
                memo.insert(c, r?);
            }
            for v in 0..grids[axis].len() {
                let mut c = current.clone();
                c[axis] = v;
                let Some(r) = memo.get(&c) else { continue };
                let incumbent = memo[&current].cumulative_unsustainable;
                let better = r.cumulative_unsustainable < incumbent
                    || (r.cumulative_unsustainable == incumbent && c < current);
                if better {
                    current = c;
                    moved = true;
                }
            }
        }
        if !moved || memo.len() >= budget {
            break;
        }
    }
    let report = memo[&current].clone();
    Ok((current, report, memo.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difference {
    Central,
    /// Upper perturbation left the bounds; `(m(θ) − m(θ−δ)) / δ`.
    Backward,
    /// Lower perturbation left the bounds; `(m(θ+δ) − m(θ)) / δ`.
    Forward,
}

/// One perturbed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedRun {
    pub value: f64,
    pub cumulative_unsustainable: f64,
    pub final_ledger: LedgerEntry,
}

/// How a parameter change spreads through the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Propagation {
    /// Compartments whose dynamics the parameter can influence.
    pub downstream: Vec<u32>,
    /// Compartments that feed the perturbed one.
    pub upstream: Vec<u32>,
    /// Shortest chain of compartments from the perturbed one to a designated
    /// unsustainable connection; empty when none is reachable.
    pub path_to_unsustainable: Vec<u32>,
    pub affects_unsustainable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub k: u32,
    pub name: String,
    pub value: f64,
    pub delta: f64,
    /// `dm_u/dθ`, kg per unit of the parameter.
    pub derivative: f64,
    pub difference: Difference,
    pub runs: Vec<PerturbedRun>,
    /// Round-off bound on `derivative` from accumulating `m_u` over the
    /// horizon: `steps · ε · max|m_u| / span`, where span is the distance
    /// between the two evaluation points.
    pub noise_floor: f64,
    pub propagation: Propagation,
}

/// Finite-difference derivative of `m_u` with respect to one parameter.
pub fn sensitivity(
    network: &Network,
    k: u32,
    name: &str,
    rel_delta: f64,
    config: &SimConfig,
) -> Result<Sensitivity, DesignError> {
    if !(rel_delta > 0.0 && rel_delta <= 0.1) {
        return Err(DesignError::RelDelta(rel_delta));
    }
    let bounds = param_bounds(network, k, name)?;
    let c = network
        .compartment(k)
        .ok_or(NetworkError::UnknownCompartment(k))?;
    let value = c.param(name).ok_or_else(|| DesignError::UnknownParam {
        k,
        name: name.to_string(),
    })?;
    let delta = if value == 0.0 {
        rel_delta
    } else {
        rel_delta * value.abs()
    };
    let up_ok = bounds.contains(value + delta);
    let down_ok = bounds.contains(value - delta);
    let (difference, lo, hi) = match (down_ok, up_ok) {
        (true, true) => (Difference::Central, value - delta, value + delta),
        (true, false) => (Difference::Backward, value - delta, value),
        (false, true) => (Difference::Forward, value, value + delta),
        (false, false) => {
            return Err(DesignError::NotPerturbable {
                k,
                name: name.to_string(),
                value,
                bounds,
            })
        }
    };
    if difference != Difference::Central {
        log::warn!("c{k}.{name} = {value} is at a bound; using a one-sided difference");
    }
    let perturbed = |v: f64| -> Result<PerturbedRun, DesignError> {
        let n = network.with_param(k, name, v)?;
        let trajectory = simulate(&n, config).map_err(|source| DesignError::Simulation {
            name: n.name.clone(),
            source,
        })?;
        Ok(PerturbedRun {
            value: v,
            cumulative_unsustainable: crate::metrics::cumulative_unsustainable(&trajectory)?,
            final_ledger: trajectory
                .final_ledger()
                .cloned()
                .unwrap_or_else(|| LedgerEntry::zeros(n.materials.len())),
        })
    };
    let (a, b) = parallel::pool().install(|| rayon::join(|| perturbed(lo), || perturbed(hi)));
    let (a, b) = (a?, b?);
    let span = hi - lo;
    let derivative = (b.cumulative_unsustainable - a.cumulative_unsustainable) / span;
    let scale = a
        .cumulative_unsustainable
        .abs()
        .max(b.cumulative_unsustainable.abs());
    let noise_floor = config.steps() as f64 * f64::EPSILON * scale / span;
    Ok(Sensitivity {
        k,
        name: name.to_string(),
        value,
        delta,
        derivative,
        difference,
        runs: vec![a, b],
        noise_floor,
        propagation: propagation(network, k),
    })
}

/// Influence edges: a connection carries influence from its origin to its
/// destination, and an observed connection carries influence from its
/// origin to the observer.
fn influence_edges(network: &Network) -> Vec<(u32, u32)> {
    let mut edges: Vec<(u32, u32)> = network
        .connections
        .iter()
        .map(|c| (c.from.k, c.to.k))
        .collect();
    for c in &network.compartments {
        for id in c.model().observes() {
            if let Some(conn) = network.connection(id) {
                edges.push((conn.from.k, c.id.k));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    edges
}

fn reachable(start: u32, edges: &[(u32, u32)], forward: bool) -> BTreeSet<u32> {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([start]);
    while let Some(n) = queue.pop_front() {
        for &(a, b) in edges {
            let (from, to) = if forward { (a, b) } else { (b, a) };
            if from == n && to != start && seen.insert(to) {
                queue.push_back(to);
            }
        }
    }
    seen
}

/// Forward and backward influence of compartment `k` and the shortest chain
/// from it to an unsustainable connection.
pub fn propagation(network: &Network, k: u32) -> Propagation {
    let edges = influence_edges(network);
    let downstream = reachable(k, &edges, true);
    let upstream = reachable(k, &edges, false);
    let red_origins: BTreeSet<u32> = network
        .unsustainable
        .iter()
        .filter_map(|id| network.connection(id))
        .map(|c| c.from.k)
        .collect();
    let mut prev: HashMap<u32, u32> = HashMap::new();
    let mut queue = VecDeque::from([k]);
    let mut visited = BTreeSet::from([k]);
    let mut hit = None;
    while let Some(n) = queue.pop_front() {
        if red_origins.contains(&n) {
            hit = Some(n);
            break;
        }
        for &(a, b) in &edges {
            if a == n && visited.insert(b) {
                prev.insert(b, n);
                queue.push_back(b);
            }
        }
    }
    let mut path = Vec::new();
    if let Some(mut n) = hit {
        path.push(n);
        while let Some(&p) = prev.get(&n) {
            path.push(p);
            n = p;
        }
        path.reverse();
    }
    Propagation {
        downstream: downstream.into_iter().collect(),
        upstream: upstream.into_iter().collect(),
        affects_unsustainable: hit.is_some(),
        path_to_unsustainable: path,
    }
}
