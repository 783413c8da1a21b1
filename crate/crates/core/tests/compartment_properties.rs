//! Per-kind invariants of a single rate evaluation: material balance,
//! nonnegative flows, the availability cap, homogeneity and exact splits.

use std::sync::Arc;

use circuflow_core::compartments::{CompartmentModel, KindRegistry, RateInput, RateOutput};
use circuflow_core::network::{Direction, MaterialType, ParamMap};
use circuflow_core::Materials;
use proptest::prelude::*;
use serde_json::{json, Value};

const TOL: f64 = 1e-12;

fn materials() -> Materials {
    Materials::new(vec![
        MaterialType {
            index: 1,
            label: "b1".into(),
        },
        MaterialType {
            index: 2,
            label: "b2".into(),
        },
    ])
}

fn build(kind: &str, params: Value) -> Arc<dyn CompartmentModel> {
    let params: ParamMap = params.as_object().unwrap().clone();
    KindRegistry::builtin()
        .build(kind, &params, &materials())
        .unwrap()
}

fn eval(model: &dyn CompartmentModel, store: &[f64], inflow: &[f64], dt_ref: f64) -> RateOutput {
    let mut out = RateOutput::zeros(model.ports().len(), store.len());
    let observed = vec![0.0; model.observes().len()];
    model.rates(
        &RateInput {
            store,
            inflow,
            observed: &observed,
            dt_ref,
        },
        &mut out,
    );
    out
}

/// Inflow vector with the given rates on input ports and zero elsewhere.
fn inflow_for(model: &dyn CompartmentModel, rates: &[f64]) -> Vec<f64> {
    let mut r = rates.iter().cycle();
    model
        .ports()
        .iter()
        .map(|p| match p.direction {
            Direction::Input => *r.next().unwrap(),
            Direction::Output => 0.0,
        })
        .collect()
}

/// Scale of an evaluation for relative tolerances.
fn scale(store: &[f64], inflow: &[f64], out: &RateOutput, dt_ref: f64) -> f64 {
    let s: f64 = store.iter().map(|m| m / dt_ref).sum::<f64>()
        + inflow.iter().sum::<f64>()
        + out.outflow.iter().sum::<f64>();
    s.max(1.0)
}

fn check_balance(
    model: &dyn CompartmentModel,
    store: &[f64],
    inflow: &[f64],
    out: &RateOutput,
    dt_ref: f64,
) -> Result<(), TestCaseError> {
    let tol = TOL * scale(store, inflow, out, dt_ref);
    for m in 0..store.len() {
        let mut net = out.conversion[m] - out.dstore[m];
        for (p, spec) in model.ports().iter().enumerate() {
            if spec.material == m {
                net += inflow[p] - out.outflow[p];
            }
        }
        prop_assert!(net.abs() <= tol, "{}: material {m} imbalance {net}", model.kind());
    }
    let conv: f64 = out.conversion.iter().sum();
    prop_assert!(conv.abs() <= tol, "{}: conversion sums to {conv}", model.kind());
    for (p, spec) in model.ports().iter().enumerate() {
        match spec.direction {
            Direction::Output => prop_assert!(out.outflow[p] >= 0.0),
            Direction::Input => prop_assert_eq!(out.outflow[p], 0.0),
        }
    }
    Ok(())
}

/// Kinds with a parameterised capacity, built from `(fraction, capacity)`.
fn capacity_kinds(f: f64, cap: f64) -> Vec<Arc<dyn CompartmentModel>> {
    vec![
        build(
            "source",
            json!({"material": "b1", "reserve": 1.0, "max_rate": cap, "demand": cap * f}),
        ),
        build("stock", json!({"material": "b2", "demand": cap})),
        build(
            "transformer",
            json!({"input_material": "b1", "output_material": "b2",
                   "yield": f.max(1e-6), "rate_capacity": cap}),
        ),
        build(
            "sorter",
            json!({"material": "b2", "success_rate": f, "throughput": cap,
                   "secondary_fraction": 1.0 - f}),
        ),
    ]
}

/// Kinds whose outflows are linear in the store.
fn lag_kinds(f: f64, t: f64) -> Vec<Arc<dyn CompartmentModel>> {
    vec![
        build(
            "transport",
            json!({"material": "b1", "time_constant": t, "loss_fraction": f.min(0.999)}),
        ),
        build(
            "recycler",
            json!({"material": "b2", "yield": f, "processing_time": t}),
        ),
        build("sink", json!({})),
    ]
}

proptest! {
    #[test]
    fn every_kind_balances_each_material(
        f in 0.0f64..=1.0,
        cap in 0.0f64..100.0,
        t in 1e-3f64..1e4,
        store in prop::array::uniform2(0.0f64..1e4),
        rates in prop::collection::vec(0.0f64..100.0, 4),
        dt_ref in 1e-3f64..100.0,
    ) {
        for model in capacity_kinds(f, cap).into_iter().chain(lag_kinds(f, t)) {
            let inflow = inflow_for(model.as_ref(), &rates);
            let out = eval(model.as_ref(), &store, &inflow, dt_ref);
            check_balance(model.as_ref(), &store, &inflow, &out, dt_ref)?;
        }
    }

    #[test]
    fn capacity_kinds_never_overdraw(
        f in 0.0f64..=1.0,
        cap in 0.0f64..100.0,
        store in prop::array::uniform2(0.0f64..1e3),
        rates in prop::collection::vec(0.0f64..100.0, 4),
        dt_ref in 1e-3f64..100.0,
    ) {
        for model in capacity_kinds(f, cap) {
            let inflow = inflow_for(model.as_ref(), &rates);
            let out = eval(model.as_ref(), &store, &inflow, dt_ref);
            // A store never drains faster than it can empty within dt_ref.
            for (m, ds) in out.dstore.iter().enumerate() {
                prop_assert!(
                    *ds >= -store[m] / dt_ref * (1.0 + TOL) - TOL,
                    "{}: dstore {ds} from store {}", model.kind(), store[m]
                );
            }
            let total_out: f64 = out.outflow.iter().sum();
            prop_assert!(total_out <= cap + inflow.iter().sum::<f64>() + TOL * cap.max(1.0));
        }
    }

    #[test]
    fn scaling_mass_and_capacity_scales_rates(
        f in 0.0f64..=1.0,
        cap in 1e-3f64..100.0,
        t in 1e-3f64..1e4,
        store in prop::array::uniform2(0.0f64..1e3),
        rates in prop::collection::vec(0.0f64..100.0, 4),
        lambda in 1e-3f64..1e3,
    ) {
        let dt_ref = 1.0;
        let scaled_store = store.map(|m| m * lambda);
        let scaled_rates: Vec<f64> = rates.iter().map(|r| r * lambda).collect();
        let pairs = capacity_kinds(f, cap)
            .into_iter()
            .zip(capacity_kinds(f, cap * lambda))
            .chain(lag_kinds(f, t).into_iter().zip(lag_kinds(f, t)));
        for (base, scaled) in pairs {
            let a = eval(base.as_ref(), &store, &inflow_for(base.as_ref(), &rates), dt_ref);
            let b = eval(
                scaled.as_ref(),
                &scaled_store,
                &inflow_for(scaled.as_ref(), &scaled_rates),
                dt_ref,
            );
            let pairs = a.outflow.iter().zip(&b.outflow).chain(a.dstore.iter().zip(&b.dstore));
            for (x, y) in pairs {
                let tol = 1e-11 * (x.abs() * lambda).max(lambda * 1e-3);
                prop_assert!((x * lambda - y).abs() <= tol, "{}: {x}·{lambda} vs {y}", base.kind());
            }
        }
    }

    #[test]
    fn sorter_splits_processed_mass_exactly(
        s in 0.0f64..=1.0,
        secondary in 0.0f64..=1.0,
        cap in 0.0f64..10.0,
        store in 0.0f64..1e3,
        inflow in 0.0f64..10.0,
    ) {
        let model = build(
            "sorter",
            json!({"material": "b1", "success_rate": s, "throughput": cap,
                   "secondary_fraction": secondary}),
        );
        let inflow = inflow_for(model.as_ref(), &[inflow]);
        let out = eval(model.as_ref(), &[store, 0.0], &inflow, 1.0);
        let processed = inflow[0] - out.dstore[0];
        let port = |n: &str| out.outflow[model.port_index(n).unwrap()];
        let tol = TOL * processed.max(1.0);
        prop_assert!((port("accept") + port("secondary") - s * processed).abs() <= tol);
        prop_assert!((port("reject") - (1.0 - s) * processed).abs() <= tol);
        prop_assert!((port("secondary") - secondary * s * processed).abs() <= tol);
    }

    #[test]
    fn recycler_and_transformer_split_exactly(
        y in 1e-6f64..=1.0,
        store in prop::array::uniform2(0.0f64..1e3),
        inflow in 0.0f64..10.0,
        t in 1e-2f64..1e3,
    ) {
        let rec = build("recycler", json!({"material": "b1", "yield": y, "processing_time": t}));
        let out = eval(rec.as_ref(), &store, &inflow_for(rec.as_ref(), &[inflow]), 1.0);
        let processed = store[0] / t;
        let tol = TOL * processed.max(1.0);
        let ret = out.outflow[rec.port_index("return").unwrap()];
        let leak = out.outflow[rec.port_index("leak").unwrap()];
        prop_assert!((ret - y * processed).abs() <= tol);
        prop_assert!((ret + leak - processed).abs() <= tol);

        let tf = build(
            "transformer",
            json!({"input_material": "b1", "output_material": "b2",
                   "yield": y, "rate_capacity": 5.0}),
        );
        let inflow = inflow_for(tf.as_ref(), &[inflow, 0.0]);
        let out = eval(tf.as_ref(), &store, &inflow, 1.0);
        let processed = inflow[0] - out.dstore[0];
        let prod = out.outflow[tf.port_index("out").unwrap()];
        let waste = out.outflow[tf.port_index("waste").unwrap()];
        prop_assert!((prod - y * processed).abs() <= TOL * processed.max(1.0));
        prop_assert!((prod + waste - processed).abs() <= TOL * processed.max(1.0));
        prop_assert!((out.conversion[1] - prod).abs() <= TOL * processed.max(1.0));
    }
}

#[test]
fn empty_store_with_no_inflow_emits_nothing() {
    for model in capacity_kinds(0.5, 1.0).into_iter().chain(lag_kinds(0.5, 1.0)) {
        let inflow = vec![0.0; model.ports().len()];
        let out = eval(model.as_ref(), &[0.0, 0.0], &inflow, 1.0);
        assert!(out.outflow.iter().all(|&r| r == 0.0), "{}", model.kind());
    }
}
