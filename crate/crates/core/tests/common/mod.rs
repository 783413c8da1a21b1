#![allow(dead_code)]

use circuflow_core::io::parse_network;
use circuflow_core::Network;
use serde_json::{json, Value};

pub fn network(v: Value) -> Network {
    parse_network(&v.to_string(), "test").unwrap_or_else(|e| panic!("{e}"))
}

pub fn one_material() -> Value {
    json!([{"index": 1, "label": "b1"}])
}

pub fn sim(dt: f64, horizon: f64) -> Value {
    json!({"dt": dt, "horizon": horizon})
}

pub fn stage(k: u32, kind: &str, params: Value, initial: f64) -> Value {
    json!({"k": k, "i": k, "j": k, "kind": kind, "params": params,
           "initial_mass": {"b1": initial}})
}

pub fn pipe(k: u32, i: u32, j: u32, t: f64, initial: f64) -> Value {
    json!({"k": k, "i": i, "j": j, "kind": "transport",
           "params": {"material": "b1", "time_constant": t}, "initial_mass": {"b1": initial}})
}

pub fn conn(id: &str, from: (u32, &str), to: (u32, &str)) -> Value {
    json!({"id": id, "from": {"k": from.0, "port": from.1}, "to": {"k": to.0, "port": to.1}})
}

/// Stock → pipe → stock closed loop holding 10 kg.
pub fn closed_loop(dt: f64, horizon: f64) -> Network {
    network(json!({
        "materials": one_material(),
        "compartments": [
            stage(1, "stock", json!({"material": "b1", "demand": 1.0}), 5.0),
            stage(2, "stock", json!({"material": "b1", "demand": 1.0}), 3.0),
            pipe(3, 1, 2, 2.0, 2.0),
        ],
        "connections": [
            conn("a", (1, "out"), (3, "in")),
            conn("b", (3, "out"), (2, "in")),
            conn("c", (2, "out"), (1, "in")),
        ],
        "unsustainable": [],
        "return": [],
        "simulation": sim(dt, horizon),
    }))
}

/// Single lag `dm/dt = −m/T` draining into a sink.
pub fn draining_pipe(dt: f64, horizon: f64) -> Network {
    network(json!({
        "materials": one_material(),
        "compartments": [
            stage(1, "stock", json!({"material": "b1", "demand": 0.0}), 0.0),
            stage(2, "sink", json!({}), 0.0),
            pipe(3, 1, 2, 1.0, 1.0),
        ],
        "connections": [conn("drain", (3, "out"), (2, "b1"))],
        "unsustainable": ["drain"],
        "return": [],
        "simulation": sim(dt, horizon),
    }))
}

/// Source at a constant rate into a stock emitting `out` into a sink.
pub fn fed_stock(rate: f64, out: f64, dt: f64, horizon: f64) -> Network {
    network(json!({
        "materials": one_material(),
        "compartments": [
            stage(1, "source", json!({"material": "b1", "reserve": 1e6, "max_rate": rate,
                                      "demand": rate}), 1e6),
            stage(2, "stock", json!({"material": "b1", "demand": out}), 0.0),
            stage(3, "sink", json!({}), 0.0),
        ],
        "connections": [
            conn("extraction", (1, "out"), (2, "in")),
            conn("disposal", (2, "out"), (3, "b1")),
        ],
        "unsustainable": ["extraction"],
        "return": [],
        "simulation": sim(dt, horizon),
    }))
}
