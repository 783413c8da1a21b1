//! Steady-state Rankine cycle viewed as an eight-compartment loop: turbine,
//! condenser, pump and boiler joined by four pipes, with `Ė = 0` on each
//! control surface.

use serde::{Deserialize, Serialize};

use super::RateError;

/// Working-fluid state around the cycle. Enthalpies in kJ/kg at the turbine
/// inlet (h1), condenser inlet (h2), pump inlet (h3) and boiler inlet (h4).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankineState {
    /// kg/s
    pub mass_flow: f64,
    pub h: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CyclePerformance {
    /// kJ/kg
    pub w_turbine: f64,
    pub w_pump: f64,
    pub q_in: f64,
    pub q_out: f64,
    pub efficiency: f64,
    /// kW
    pub net_power: f64,
    /// `q_in − q_out − (w_turbine − w_pump)` in kJ/kg.
    pub closure_residual: f64,
    /// Mass flow through turbine, pipe, condenser, pipe, pump, pipe, boiler,
    /// pipe.
    pub mass_flows: [f64; 8],
}

pub fn rankine_eval(state: &RankineState) -> Result<CyclePerformance, RateError> {
    let [h1, h2, h3, h4] = state.h;
    if !state.h.iter().all(|h| h.is_finite()) || !state.mass_flow.is_finite() {
        return Err(RateError::Rankine("non-finite input".into()));
    }
    if state.mass_flow < 0.0 {
        return Err(RateError::Rankine(format!(
            "mass flow {} is negative",
            state.mass_flow
        )));
    }
    if h2 > h1 {
        return Err(RateError::Rankine(format!(
            "turbine exit enthalpy h2 = {h2} exceeds inlet h1 = {h1}"
        )));
    }
    if h3 > h4 {
        return Err(RateError::Rankine(format!(
            "pump inlet enthalpy h3 = {h3} exceeds outlet h4 = {h4}"
        )));
    }
    let q_in = h1 - h4;
    if q_in <= 0.0 {
        return Err(RateError::Rankine(format!(
            "boiler heat input h1 - h4 = {q_in} must be positive"
        )));
    }
    let w_turbine = h1 - h2;
    let w_pump = h4 - h3;
    let q_out = h2 - h3;
    let w_net = w_turbine - w_pump;
    let closure_residual = q_in - q_out - w_net;
    if closure_residual.abs() > 1e-9 * q_in {
        return Err(RateError::Rankine(format!(
            "energy balance does not close: residual {closure_residual}"
        )));
    }
    Ok(CyclePerformance {
        w_turbine,
        w_pump,
        q_in,
        q_out,
        efficiency: w_net / q_in,
        net_power: state.mass_flow * w_net,
        closure_residual,
        mass_flows: [state.mass_flow; 8],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(h: [f64; 4]) -> RankineState {
        RankineState { mass_flow: 1.0, h }
    }

    #[test]
    fn worked_example() {
        let p = rankine_eval(&st([3000.0, 2000.0, 100.0, 110.0])).unwrap();
        assert_eq!(p.w_turbine, 1000.0);
        assert_eq!(p.w_pump, 10.0);
        assert_eq!(p.q_in, 2890.0);
        assert_eq!(p.q_out, 1900.0);
        // 990 / 2890
        assert!((p.efficiency - 0.342_560_553_633_218).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cycle_has_zero_efficiency() {
        let p = rankine_eval(&st([500.0, 500.0, 100.0, 100.0])).unwrap();
        assert_eq!((p.w_turbine, p.w_pump, p.efficiency), (0.0, 0.0, 0.0));
    }

    #[test]
    fn efficiency_is_scale_free() {
        let base = rankine_eval(&st([3000.0, 2000.0, 100.0, 110.0])).unwrap();
        for c in [0.5, 2.0, 7.25] {
            let h3 = 100.0;
            let scaled = [h3 + c * 2900.0, h3 + c * 1900.0, h3, h3 + c * 10.0];
            let p = rankine_eval(&st(scaled)).unwrap();
            assert!((p.efficiency - base.efficiency).abs() < 1e-12);
        }
    }

    #[test]
    fn reversed_turbine_is_rejected() {
        assert!(rankine_eval(&st([2000.0, 3000.0, 100.0, 110.0])).is_err());
        assert!(rankine_eval(&st([3000.0, 2000.0, 120.0, 110.0])).is_err());
        assert!(rankine_eval(&st([110.0, 100.0, 90.0, 110.0])).is_err());
    }

    #[test]
    fn mass_flow_is_uniform_around_the_loop() {
        let p = rankine_eval(&RankineState {
            mass_flow: 12.5,
            h: [3000.0, 2000.0, 100.0, 110.0],
        })
        .unwrap();
        assert!(p.mass_flows.iter().all(|&m| m == 12.5));
        assert_eq!(p.net_power, 12.5 * 990.0);
    }
}
