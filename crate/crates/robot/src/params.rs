//! Physical parameters of the two-link arm.

use serde::{Deserialize, Serialize};

use crate::RobotError;

/// How link mass is distributed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InertiaModel {
    /// Each link's mass sits at its distal end; links have no rotational
    /// inertia of their own.
    PointMassAtTip,
    /// Slender uniform rods: centre of mass at mid-length, `I = m l² / 12`.
    UniformRod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManipulatorParams {
    /// m
    pub l1: f64,
    pub l2: f64,
    /// kg
    pub m1: f64,
    pub m2: f64,
    pub inertia: InertiaModel,
    /// m/s², acting along −y of the base frame. Zero for the horizontal
    /// reaching task.
    pub gravity: f64,
    /// Viscous joint friction, N·m·s.
    pub b1: f64,
    pub b2: f64,
}

impl Default for ManipulatorParams {
    fn default() -> Self {
        Self {
            l1: 0.1,
            l2: 0.1,
            m1: 0.05,
            m2: 0.05,
            inertia: InertiaModel::PointMassAtTip,
            gravity: 0.0,
            b1: 1e-3,
            b2: 1e-3,
        }
    }
}

/// Per-link centre-of-mass distance and inertia about the centre of mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LinkInertia {
    pub lc1: f64,
    pub lc2: f64,
    pub i1: f64,
    pub i2: f64,
}

impl ManipulatorParams {
    pub fn validate(&self) -> Result<(), RobotError> {
        let positive = [("l1", self.l1), ("l2", self.l2), ("m1", self.m1), ("m2", self.m2)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(RobotError::Param(format!("{name} = {v} must be positive")));
            }
        }
        for (name, v) in [("b1", self.b1), ("b2", self.b2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(RobotError::Param(format!("{name} = {v} must be nonnegative")));
            }
        }
        if !self.gravity.is_finite() {
            return Err(RobotError::Param("gravity must be finite".into()));
        }
        Ok(())
    }

    pub(crate) fn link_inertia(&self) -> LinkInertia {
        match self.inertia {
            InertiaModel::PointMassAtTip => LinkInertia {
                lc1: self.l1,
                lc2: self.l2,
                i1: 0.0,
                i2: 0.0,
            },
            InertiaModel::UniformRod => LinkInertia {
                lc1: self.l1 / 2.0,
                lc2: self.l2 / 2.0,
                i1: self.m1 * self.l1 * self.l1 / 12.0,
                i2: self.m2 * self.l2 * self.l2 / 12.0,
            },
        }
    }

    /// Inner and outer radius of the fingertip workspace.
    pub fn reach(&self) -> (f64, f64) {
        ((self.l1 - self.l2).abs(), self.l1 + self.l2)
    }
}
