use circuflow_core::design::{
    optimize_params, propagation, select_best, sensitivity, DesignError, Difference, ParamAxis,
    DEFAULT_REL_DELTA,
};
use circuflow_core::io::parse_network;
use circuflow_core::metrics::{circularity, cumulative_unsustainable};
use circuflow_core::{bundled, simulate, Network, SimConfig};
use serde_json::{json, Value};

fn load(name: &str) -> Network {
    bundled::load(name).unwrap()
}

fn plastics() -> Vec<Network> {
    [
        "fig3b_synthetic_linear",
        "fig3c_synthetic_circular",
        "fig3d_bio_existing",
        "fig3e_bio_reuse",
        "fig3f_bio_repair",
    ]
    .iter()
    .map(|n| load(n))
    .collect()
}

fn cfg() -> SimConfig {
    load("fig3b_synthetic_linear").simulation
}

/// Independent objective: simulate and read the red-connection integrals.
fn oracle_m_u(net: &Network, cfg: &SimConfig) -> f64 {
    let tr = simulate(net, cfg).unwrap();
    let last = tr.cumulative_flows.last().unwrap();
    net.unsustainable
        .iter()
        .map(|id| last[net.connection_position(id).unwrap()])
        .sum()
}

#[test]
fn circular_beats_linear() {
    let sel = select_best(
        &[load("fig3b_synthetic_linear"), load("fig3c_synthetic_circular")],
        &cfg(),
    )
    .unwrap();
    assert_eq!(sel.best, "fig3c_synthetic_circular");
    assert_eq!(sel.reports.len(), 2);
}

#[test]
fn single_variant_selects_itself() {
    let sel = select_best(&[load("fig3d_bio_existing")], &cfg()).unwrap();
    assert_eq!(sel.best, "fig3d_bio_existing");
    assert_eq!(sel.ranking, vec!["fig3d_bio_existing".to_string()]);
}

#[test]
fn empty_and_duplicate_variant_sets_are_rejected() {
    assert!(matches!(select_best(&[], &cfg()), Err(DesignError::NoVariants)));
    let n = load("fig3b_synthetic_linear");
    assert!(matches!(
        select_best(&[n.clone(), n], &cfg()),
        Err(DesignError::DuplicateVariant(_))
    ));
}

#[test]
fn selection_matches_independent_argmin() {
    let variants = plastics();
    let config = cfg();
    let sel = select_best(&variants, &config).unwrap();
    let mut oracle: Vec<(f64, String)> = variants
        .iter()
        .map(|n| (oracle_m_u(n, &config), n.name.clone()))
        .collect();
    oracle.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    assert_eq!(sel.best, oracle[0].1);
    let names: Vec<&str> = sel.reports.iter().map(|r| r.name.as_str()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted, "reports are in name order");
    for r in &sel.reports {
        let (m, _) = oracle.iter().find(|(_, n)| *n == r.name).unwrap();
        assert_eq!(r.cumulative_unsustainable, *m, "{}", r.name);
    }
    assert_eq!(sel.ranking.len(), 5);
}

#[test]
fn selection_is_deterministic() {
    let a = select_best(&plastics(), &cfg()).unwrap();
    let b = select_best(&plastics(), &cfg()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn invalid_variant_is_reported() {
    let mut bad = load("fig3b_synthetic_linear");
    bad.unsustainable.push("ghost".into());
    bad.name = "bad".into();
    assert!(matches!(
        select_best(&[load("fig3c_synthetic_circular"), bad], &cfg()),
        Err(DesignError::Invalid { .. })
    ));
}

#[test]
fn sorter_grid_picks_perfect_sorting() {
    let net = load("fig3c_synthetic_circular");
    let space = vec![ParamAxis::new(4, "success_rate", vec![0.6, 0.8, 1.0])];
    let opt = optimize_params(&net, &space, &net.simulation, 100).unwrap();
    assert_eq!(opt.params, vec![(4, "success_rate".to_string(), 1.0)]);
    assert!(opt.exhaustive);
    assert_eq!(opt.evaluations, 3);
}

#[test]
fn one_point_grid_returns_that_point() {
    let net = load("fig3c_synthetic_circular");
    let space = vec![ParamAxis::new(5, "yield", vec![0.3])];
    let opt = optimize_params(&net, &space, &net.simulation, 1).unwrap();
    assert_eq!(opt.params[0].2, 0.3);
    let expected = oracle_m_u(&net.with_param(5, "yield", 0.3).unwrap(), &net.simulation);
    assert_eq!(opt.objective, expected);
}

fn joint_space() -> Vec<ParamAxis> {
    let grid = vec![0.0, 0.25, 0.5, 0.75, 1.0];
    vec![
        ParamAxis::new(4, "success_rate", grid.clone()),
        ParamAxis::new(5, "yield", grid),
    ]
}

#[test]
fn exhaustive_search_equals_brute_force() {
    let net = load("fig3c_synthetic_circular");
    let opt = optimize_params(&net, &joint_space(), &net.simulation, 25).unwrap();
    assert!(opt.exhaustive);
    let mut best: Option<(f64, f64, f64)> = None;
    for &s in &joint_space()[0].grid {
        for &rho in &joint_space()[1].grid {
            let n = net
                .with_param(4, "success_rate", s)
                .and_then(|n| n.with_param(5, "yield", rho))
                .unwrap();
            let m = oracle_m_u(&n, &net.simulation);
            if best.is_none_or(|(b, _, _)| m < b) {
                best = Some((m, s, rho));
            }
        }
    }
    let (m, s, rho) = best.unwrap();
    assert_eq!(opt.objective, m);
    assert_eq!(opt.params[0].2, s);
    assert_eq!(opt.params[1].2, rho);
}

#[test]
fn coordinate_descent_respects_budget() {
    let net = load("fig3c_synthetic_circular");
    let opt = optimize_params(&net, &joint_space(), &net.simulation, 12).unwrap();
    assert!(!opt.exhaustive);
    assert!(opt.evaluations <= 12);
    // m_u is monotone in both axes, so descent still reaches the corner.
    assert_eq!(opt.params[0].2, 1.0);
    assert_eq!(opt.params[1].2, 1.0);
}

#[test]
fn bad_spaces_are_rejected() {
    let net = load("fig3c_synthetic_circular");
    let c = &net.simulation;
    assert!(matches!(optimize_params(&net, &vec![], c, 5), Err(DesignError::EmptySpace)));
    let empty = vec![ParamAxis::new(4, "success_rate", vec![])];
    assert!(matches!(optimize_params(&net, &empty, c, 5), Err(DesignError::EmptyGrid { .. })));
    let out = vec![ParamAxis::new(4, "success_rate", vec![1.5])];
    assert!(matches!(optimize_params(&net, &out, c, 5), Err(DesignError::OutOfBounds { .. })));
    let unknown = vec![ParamAxis::new(4, "colour", vec![1.0])];
    assert!(matches!(
        optimize_params(&net, &unknown, c, 5),
        Err(DesignError::UnknownParam { .. })
    ));
    let ok = vec![ParamAxis::new(4, "success_rate", vec![1.0])];
    assert!(matches!(optimize_params(&net, &ok, c, 0), Err(DesignError::ZeroBudget)));
}

#[test]
fn interior_success_rate_and_yield_have_negative_derivatives() {
    let net = load("fig3c_synthetic_circular");
    for (k, name) in [(4, "success_rate"), (5, "yield")] {
        let s = sensitivity(&net, k, name, DEFAULT_REL_DELTA, &net.simulation).unwrap();
        assert_eq!(s.difference, Difference::Central);
        assert!(s.derivative < 0.0, "c{k}.{name}: {}", s.derivative);
        assert!(s.derivative.abs() > 10.0 * s.noise_floor);
        assert!(s.propagation.affects_unsustainable);
        assert_eq!(s.runs.len(), 2);
    }
}

#[test]
fn derivative_matches_manual_central_difference() {
    let net = load("fig3c_synthetic_circular");
    let s = sensitivity(&net, 4, "success_rate", 1e-2, &net.simulation).unwrap();
    let v = s.value;
    let d = 1e-2 * v;
    let m = |x: f64| oracle_m_u(&net.with_param(4, "success_rate", x).unwrap(), &net.simulation);
    let manual = (m(v + d) - m(v - d)) / ((v + d) - (v - d));
    assert!((s.derivative - manual).abs() <= 1e-9 * manual.abs());
}

#[test]
fn perfect_recycler_uses_one_sided_difference() {
    let net = load("fig3c_synthetic_circular")
        .with_param(5, "yield", 1.0)
        .unwrap();
    let s = sensitivity(&net, 5, "yield", DEFAULT_REL_DELTA, &net.simulation).unwrap();
    assert_eq!(s.difference, Difference::Backward);
    assert_eq!(s.runs[1].value, 1.0);
    assert!(s.derivative <= 0.0);
}

#[test]
fn relative_delta_is_range_checked() {
    let net = load("fig3c_synthetic_circular");
    for bad in [0.0, -1e-3, 0.2] {
        assert!(matches!(
            sensitivity(&net, 4, "success_rate", bad, &net.simulation),
            Err(DesignError::RelDelta(_))
        ));
    }
}

/// Circular network plus an isolated two-stock loop (c16, c17) joined by
/// pipes c18 and c19.
fn with_isolated_loop() -> Network {
    let mut v: Value =
        serde_json::from_str(bundled::network_text("fig3c_synthetic_circular").unwrap()).unwrap();
    let plastic = "synthetic-plastic";
    let comps = v["compartments"].as_array_mut().unwrap();
    for k in [16, 17] {
        comps.push(json!({"k": k, "i": k, "j": k, "kind": "stock",
            "params": {"material": plastic, "demand": 1e-3}, "initial_mass": {plastic: 5.0}}));
    }
    for (k, i, j) in [(18, 16, 17), (19, 17, 16)] {
        comps.push(json!({"k": k, "i": i, "j": j, "kind": "transport",
            "params": {"material": plastic, "time_constant": 1800.0},
            "initial_mass": {plastic: 1.0}}));
    }
    let conns = v["connections"].as_array_mut().unwrap();
    for (id, from, to) in [
        ("c16-c18", 16, 18),
        ("c18-c17", 18, 17),
        ("c17-c19", 17, 19),
        ("c19-c16", 19, 16),
    ] {
        conns.push(json!({"id": id, "from": {"k": from, "port": "out"},
                          "to": {"k": to, "port": "in"}}));
    }
    parse_network(&v.to_string(), "isolated").unwrap()
}

#[test]
fn disconnected_parameter_has_no_effect() {
    let net = with_isolated_loop();
    let p = propagation(&net, 18);
    assert!(!p.affects_unsustainable);
    assert!(p.path_to_unsustainable.is_empty());
    assert_eq!(p.downstream, vec![16, 17, 19]);
    let s = sensitivity(&net, 18, "time_constant", DEFAULT_REL_DELTA, &net.simulation).unwrap();
    assert!(s.derivative.abs() <= 10.0 * s.noise_floor, "{s:?}");
    // The extra loop does not change the objective either.
    let base = load("fig3c_synthetic_circular");
    let a = cumulative_unsustainable(&simulate(&base, &base.simulation).unwrap()).unwrap();
    let b = circularity(&simulate(&net, &net.simulation).unwrap()).unwrap();
    assert_eq!(a, b.cumulative_unsustainable);
}

#[test]
fn propagation_reaches_red_flows_from_the_sorter() {
    let net = load("fig3c_synthetic_circular");
    let p = propagation(&net, 4);
    assert!(p.affects_unsustainable);
    assert_eq!(p.path_to_unsustainable, vec![4]);
    assert!(p.downstream.contains(&7));
    // The source observes the return pipe, so influence flows back to c1.
    assert!(p.downstream.contains(&1));
    assert!(p.upstream.contains(&3));
}
