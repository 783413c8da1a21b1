//! Subcommands working on compartment networks.

use std::path::PathBuf;

use circuflow_core::compartments::rankine::{rankine_eval, RankineState};
use circuflow_core::design::{
    optimize_params, select_best, sensitivity, ParamAxis, DEFAULT_REL_DELTA,
};
use circuflow_core::export::{write_csv, MetricsSummary, RunSummary};
use circuflow_core::io::{load_manifest, load_network_source, BUNDLED_PREFIX};
use circuflow_core::{bundled, simulate, Network, SimConfig};
use clap::Args;
use serde::Serialize;

use crate::error::CliError;
use crate::output::{csv_text, emit, out_dir, sha256_hex, to_json, write_file, Format};

/// Simulation settings; flags override the values in the network file.
#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    /// Step size, s.
    #[arg(long, allow_negative_numbers = true)]
    pub dt: Option<f64>,
    /// Simulated time, s.
    #[arg(long, allow_negative_numbers = true)]
    pub horizon: Option<f64>,
    #[arg(long, value_parser = ["rk4", "euler"])]
    pub method: Option<String>,
}

impl SimArgs {
    pub fn config(&self, file: &SimConfig) -> SimConfig {
        let mut c = file.clone();
        if let Some(dt) = self.dt {
            c.dt = dt;
        }
        if let Some(h) = self.horizon {
            c.horizon = h;
        }
        if let Some(m) = &self.method {
            c.method = m.clone();
        }
        c
    }
}

fn checked(config: SimConfig) -> Result<SimConfig, CliError> {
    config.check().map_err(CliError::Validation)?;
    Ok(config)
}

/// `k.name` or `ck.name`.
fn parse_selector(s: &str) -> Result<(u32, String), CliError> {
    let bad = || CliError::Usage(format!("parameter selector `{s}` is not of the form k.name"));
    let (k, name) = s.split_once('.').ok_or_else(bad)?;
    let k = k.strip_prefix('c').unwrap_or(k).parse().map_err(|_| bad())?;
    if name.is_empty() {
        return Err(bad());
    }
    Ok((k, name.to_string()))
}

/// `k.name=v1,v2,...` or `k.name=lo:hi:n` (n evenly spaced points).
pub fn parse_axis(s: &str) -> Result<ParamAxis, CliError> {
    let (sel, values) = s
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("parameter grid `{s}` needs `=values`")))?;
    let (k, name) = parse_selector(sel)?;
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| CliError::Usage(format!("`{v}` in `{s}` is not a number")))
    };
    let grid = if let [lo, hi, n] = values.split(':').collect::<Vec<_>>()[..] {
        let (lo, hi) = (num(lo)?, num(hi)?);
        let n: usize = n
            .trim()
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| CliError::Usage(format!("point count in `{s}` must be ≥ 1")))?;
        if n == 1 {
            vec![lo]
        } else {
            (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect()
        }
    } else {
        values.split(',').map(num).collect::<Result<_, _>>()?
    };
    Ok(ParamAxis::new(k, &name, grid))
}

fn load(path: &str) -> Result<(Network, String), CliError> {
    Ok(load_network_source(path)?)
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Network file, or `bundled:<name>`.
    pub network: String,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Directory receiving `<name>.csv` and `<name>.summary.json`. Without
    /// it the selected format goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Restrict output to one artifact (default: both with --out, the
    /// summary otherwise).
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

pub fn run_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let (net, text) = load(&a.network)?;
    let config = checked(a.sim.config(&net.simulation))?;
    let traj = simulate(&net, &config)?;
    let summary = RunSummary::new(&traj, Some(sha256_hex(&text)))?;
    let mut csv = Vec::new();
    write_csv(&net, &traj, &mut csv)?;
    match (&a.out, a.format) {
        (Some(dir), format) => {
            let dir = out_dir(dir)?;
            if format != Some(Format::JsonSummary) {
                write_file(&dir.join(format!("{}.csv", net.name)), &csv)?;
            }
            if format != Some(Format::Csv) {
                write_file(
                    &dir.join(format!("{}.summary.json", net.name)),
                    summary.to_json().as_bytes(),
                )?;
            }
        }
        (None, Some(Format::Csv)) => {
            emit(None, std::str::from_utf8(&csv).expect("CSV is UTF-8"))?
        }
        (None, _) => emit(None, &summary.to_json())?,
    }
    if !summary.conservation.passed {
        return Err(CliError::Numeric(format!(
            "mass ledger drift exceeds tolerance at sample {:?}",
            summary.conservation.first_violation
        )));
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Manifest listing the variants, or `bundled:<name>`.
    #[arg(default_value = "bundled:plastics")]
    pub manifest: String,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

#[derive(Serialize)]
struct CompareRow {
    rank: usize,
    network: String,
    best: bool,
    #[serde(flatten)]
    metrics: MetricsSummary,
}

#[derive(Serialize)]
struct CompareSummary {
    tool: &'static str,
    version: &'static str,
    manifest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    manifest_sha256: Option<String>,
    simulation: SimConfig,
    best: String,
    ranking: Vec<CompareRow>,
}

pub fn run_compare(a: &CompareArgs) -> Result<(), CliError> {
    let variants = load_manifest(&a.manifest)?;
    let manifest_text = match a.manifest.strip_prefix(BUNDLED_PREFIX) {
        Some(name) => bundled::manifest_text(name).map(str::to_string),
        None => std::fs::read_to_string(&a.manifest).ok(),
    };
    // Every variant runs on one grid so the totals are comparable; the first
    // variant's file settings fill in what the flags leave open.
    let config = checked(a.sim.config(&variants[0].simulation))?;
    let selection = select_best(&variants, &config)?;
    let rows: Vec<CompareRow> = selection
        .ranking
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let r = selection
                .reports
                .iter()
                .find(|r| &r.name == name)
                .expect("every ranked name has a report");
            CompareRow {
                rank: i + 1,
                network: name.clone(),
                best: *name == selection.best,
                metrics: MetricsSummary::from(r),
            }
        })
        .collect();
    let text = match a.format {
        Format::Table => {
            let mut s = format!(
                "{:<4} {:<28} {:>16} {:>12} {:>14}\n",
                "rank", "network", "m_u [kg]", "circularity", "return [kg]"
            );
            for r in &rows {
                s.push_str(&format!(
                    "{:<4} {:<28} {:>16.6} {:>12.6} {:>14.6}{}\n",
                    r.rank,
                    r.network,
                    r.metrics.cumulative_unsustainable,
                    r.metrics.circularity_index,
                    r.metrics.cumulative_return,
                    if r.best { "  * argmin" } else { "" }
                ));
            }
            s
        }
        Format::Csv => csv_text(
            &["rank", "network", "m_u", "circularity_index", "cumulative_return", "best"],
            &rows
                .iter()
                .map(|r| {
                    vec![
                        r.rank.to_string(),
                        r.network.clone(),
                        r.metrics.cumulative_unsustainable.to_string(),
                        r.metrics.circularity_index.to_string(),
                        r.metrics.cumulative_return.to_string(),
                        r.best.to_string(),
                    ]
                })
                .collect::<Vec<_>>(),
        ),
        Format::JsonSummary => to_json(&CompareSummary {
            tool: "circuflow",
            version: env!("CARGO_PKG_VERSION"),
            manifest: a.manifest.clone(),
            manifest_sha256: manifest_text.as_deref().map(sha256_hex),
            simulation: config,
            best: selection.best.clone(),
            ranking: rows,
        }),
    };
    emit(a.out.as_deref(), &text)
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    pub network: String,
    /// Grid for one parameter: `k.name=v1,v2,...` or `k.name=lo:hi:n`.
    /// Repeat for more axes.
    #[arg(long = "param", required = true)]
    pub params: Vec<String>,
    /// Most grid points to simulate; the full grid is searched when it fits.
    #[arg(long, default_value_t = 10_000)]
    pub budget: usize,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

pub fn run_optimize(a: &OptimizeArgs) -> Result<(), CliError> {
    let (net, text) = load(&a.network)?;
    let space = a
        .params
        .iter()
        .map(|p| parse_axis(p))
        .collect::<Result<Vec<_>, _>>()?;
    let config = checked(a.sim.config(&net.simulation))?;
    let opt = optimize_params(&net, &space, &config, a.budget)?;
    let out = match a.format {
        Format::Table => {
            let mut s = String::new();
            for (k, name, v) in &opt.params {
                s.push_str(&format!("c{k}.{name} = {v}\n"));
            }
            s.push_str(&format!(
                "m_u = {} kg\nevaluations = {} ({})\n",
                opt.objective,
                opt.evaluations,
                if opt.exhaustive { "exhaustive" } else { "coordinate descent" }
            ));
            s
        }
        Format::Csv => csv_text(
            &["k", "name", "value"],
            &opt.params
                .iter()
                .map(|(k, n, v)| vec![k.to_string(), n.clone(), v.to_string()])
                .collect::<Vec<_>>(),
        ),
        Format::JsonSummary => to_json(&serde_json::json!({
            "tool": "circuflow",
            "version": env!("CARGO_PKG_VERSION"),
            "network": net.name,
            "input_sha256": sha256_hex(&text),
            "simulation": config,
            "params": opt.params,
            "objective": opt.objective,
            "evaluations": opt.evaluations,
            "exhaustive": opt.exhaustive,
            "metrics": MetricsSummary::from(&opt.report),
        })),
    };
    emit(a.out.as_deref(), &out)
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    pub network: String,
    /// Parameter selector `k.name`, e.g. `4.success_rate`. Repeatable.
    #[arg(long = "param", required = true)]
    pub params: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_REL_DELTA)]
    pub rel_delta: f64,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

pub fn run_sensitivity(a: &SensitivityArgs) -> Result<(), CliError> {
    let (net, text) = load(&a.network)?;
    let config = checked(a.sim.config(&net.simulation))?;
    let mut results = Vec::new();
    for p in &a.params {
        let (k, name) = parse_selector(p)?;
        results.push(sensitivity(&net, k, &name, a.rel_delta, &config)?);
    }
    let out = match a.format {
        Format::Table => {
            let mut s = format!(
                "{:<24} {:>14} {:>16} {:>12} {:>9}\n",
                "parameter", "value", "dm_u/dθ", "noise floor", "reaches"
            );
            for r in &results {
                s.push_str(&format!(
                    "{:<24} {:>14.6} {:>16.6e} {:>12.3e} {:>9}\n",
                    format!("c{}.{}", r.k, r.name),
                    r.value,
                    r.derivative,
                    r.noise_floor,
                    if r.propagation.affects_unsustainable { "yes" } else { "no" }
                ));
            }
            s
        }
        Format::Csv => csv_text(
            &["k", "name", "value", "delta", "derivative", "noise_floor", "affects_unsustainable"],
            &results
                .iter()
                .map(|r| {
                    vec![
                        r.k.to_string(),
                        r.name.clone(),
                        r.value.to_string(),
                        r.delta.to_string(),
                        r.derivative.to_string(),
                        r.noise_floor.to_string(),
                        r.propagation.affects_unsustainable.to_string(),
                    ]
                })
                .collect::<Vec<_>>(),
        ),
        Format::JsonSummary => to_json(&serde_json::json!({
            "tool": "circuflow",
            "version": env!("CARGO_PKG_VERSION"),
            "network": net.name,
            "input_sha256": sha256_hex(&text),
            "simulation": config,
            "sensitivities": results,
        })),
    };
    emit(a.out.as_deref(), &out)
}

#[derive(Debug, Args)]
pub struct RankineArgs {
    /// Network file carrying a `rankine` state.
    #[arg(default_value = "bundled:rankine")]
    pub network: String,
    /// Enthalpies h1,h2,h3,h4 in kJ/kg (turbine inlet, condenser inlet,
    /// pump inlet, boiler inlet).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub h: Option<Vec<f64>>,
    /// kg/s
    #[arg(long)]
    pub mass_flow: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

pub fn run_rankine(a: &RankineArgs) -> Result<(), CliError> {
    let (net, text) = load(&a.network)?;
    let mut state = match (net.rankine, &a.h, a.mass_flow) {
        (Some(s), _, _) => s,
        (None, Some(_), Some(m)) => RankineState {
            mass_flow: m,
            h: [0.0; 4],
        },
        (None, _, _) => {
            return Err(CliError::Usage(format!(
                "{} has no rankine state; give --h and --mass-flow",
                a.network
            )))
        }
    };
    if let Some(h) = &a.h {
        if h.len() != 4 {
            return Err(CliError::Usage(format!("--h takes 4 enthalpies, got {}", h.len())));
        }
        state.h.copy_from_slice(h);
    }
    if let Some(m) = a.mass_flow {
        state.mass_flow = m;
    }
    let perf = rankine_eval(&state).map_err(|e| CliError::Validation(e.to_string()))?;
    let out = match a.format {
        Format::Table => format!(
            "w_turbine = {} kJ/kg\nw_pump = {} kJ/kg\nq_in = {} kJ/kg\nq_out = {} kJ/kg\n\
             efficiency = {:.5}\nnet_power = {} kW\nclosure_residual = {:e} kJ/kg\n",
            perf.w_turbine,
            perf.w_pump,
            perf.q_in,
            perf.q_out,
            perf.efficiency,
            perf.net_power,
            perf.closure_residual
        ),
        Format::Csv => csv_text(
            &["w_turbine", "w_pump", "q_in", "q_out", "efficiency", "net_power", "closure_residual"],
            &[vec![
                perf.w_turbine.to_string(),
                perf.w_pump.to_string(),
                perf.q_in.to_string(),
                perf.q_out.to_string(),
                perf.efficiency.to_string(),
                perf.net_power.to_string(),
                perf.closure_residual.to_string(),
            ]],
        ),
        Format::JsonSummary => to_json(&serde_json::json!({
            "tool": "circuflow",
            "version": env!("CARGO_PKG_VERSION"),
            "network": net.name,
            "input_sha256": sha256_hex(&text),
            "state": state,
            "performance": perf,
        })),
    };
    emit(a.out.as_deref(), &out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_forms() {
        let a = parse_axis("4.success_rate=0.5,0.75,1").unwrap();
        assert_eq!((a.k, a.name.as_str()), (4, "success_rate"));
        assert_eq!(a.grid, vec![0.5, 0.75, 1.0]);
        let b = parse_axis("c5.yield=0:1:5").unwrap();
        assert_eq!(b.grid, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(parse_axis("4.success_rate").is_err());
        assert!(parse_axis("x.y=1").is_err());
        assert!(parse_axis("4.s=0:1:0").is_err());
    }

    #[test]
    fn flags_override_file_settings() {
        let file = SimConfig::new(60.0, 3600.0);
        let args = SimArgs {
            dt: Some(30.0),
            horizon: None,
            method: Some("euler".into()),
        };
        let c = args.config(&file);
        assert_eq!((c.dt, c.horizon, c.method.as_str()), (30.0, 3600.0, "euler"));
    }
}
