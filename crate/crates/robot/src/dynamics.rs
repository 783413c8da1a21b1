//! Lagrangian dynamics of the planar RR arm:
//! `M(q) q̈ + C(q, q̇) q̇ + g(q) + B q̇ = τ`.
//!
//! `C` is the Christoffel-symbol form, so `Ṁ − 2C` is skew-symmetric and
//! the energy rate is `τᵀq̇ − q̇ᵀBq̇`.

use nalgebra::{Matrix2, Vector2};

use crate::params::ManipulatorParams;

pub type Vec2 = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;

pub fn mass_matrix(q: &Vec2, p: &ManipulatorParams) -> Mat2 {
    let li = p.link_inertia();
    let c2 = q[1].cos();
    let m22 = p.m2 * li.lc2 * li.lc2 + li.i2;
    let m12 = m22 + p.m2 * p.l1 * li.lc2 * c2;
    let m11 = p.m1 * li.lc1 * li.lc1
        + li.i1
        + p.m2 * (p.l1 * p.l1 + li.lc2 * li.lc2 + 2.0 * p.l1 * li.lc2 * c2)
        + li.i2;
    Mat2::new(m11, m12, m12, m22)
}

pub fn coriolis(q: &Vec2, qd: &Vec2, p: &ManipulatorParams) -> Mat2 {
    let li = p.link_inertia();
    let h = p.m2 * p.l1 * li.lc2 * q[1].sin();
    Mat2::new(-h * qd[1], -h * (qd[0] + qd[1]), h * qd[0], 0.0)
}

pub fn gravity(q: &Vec2, p: &ManipulatorParams) -> Vec2 {
    let li = p.link_inertia();
    let c1 = q[0].cos();
    let c12 = (q[0] + q[1]).cos();
    let g2 = p.m2 * li.lc2 * p.gravity * c12;
    Vec2::new((p.m1 * li.lc1 + p.m2 * p.l1) * p.gravity * c1 + g2, g2)
}

pub fn friction(p: &ManipulatorParams) -> Mat2 {
    Mat2::new(p.b1, 0.0, 0.0, p.b2)
}

pub fn potential_energy(q: &Vec2, p: &ManipulatorParams) -> f64 {
    let li = p.link_inertia();
    p.gravity
        * ((p.m1 * li.lc1 + p.m2 * p.l1) * q[0].sin() + p.m2 * li.lc2 * (q[0] + q[1]).sin())
}

/// Kinetic plus potential energy.
pub fn energy(q: &Vec2, qd: &Vec2, p: &ManipulatorParams) -> f64 {
    0.5 * qd.dot(&(mass_matrix(q, p) * qd)) + potential_energy(q, p)
}

/// `q̈ = M⁻¹(τ − C q̇ − g − B q̇)`.
pub fn forward_dynamics(q: &Vec2, qd: &Vec2, tau: &Vec2, p: &ManipulatorParams) -> Vec2 {
    let m = mass_matrix(q, p);
    let rhs = tau - coriolis(q, qd, p) * qd - gravity(q, p) - friction(p) * qd;
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    assert!(det > 0.0, "mass matrix is singular at q = {q:?}");
    Vec2::new(
        (m[(1, 1)] * rhs[0] - m[(0, 1)] * rhs[1]) / det,
        (m[(0, 0)] * rhs[1] - m[(1, 0)] * rhs[0]) / det,
    )
}

pub fn forward_kinematics(q: &Vec2, p: &ManipulatorParams) -> Vec2 {
    let q12 = q[0] + q[1];
    Vec2::new(
        p.l1 * q[0].cos() + p.l2 * q12.cos(),
        p.l1 * q[0].sin() + p.l2 * q12.sin(),
    )
}

/// Fingertip Jacobian `∂x/∂q`.
pub fn jacobian(q: &Vec2, p: &ManipulatorParams) -> Mat2 {
    let q12 = q[0] + q[1];
    let (s1, c1) = q[0].sin_cos();
    let (s12, c12) = q12.sin_cos();
    Mat2::new(
        -p.l1 * s1 - p.l2 * s12,
        -p.l2 * s12,
        p.l1 * c1 + p.l2 * c12,
        p.l2 * c12,
    )
}

/// Joint angles placing the fingertip at `x`, elbow sign chosen by
/// `elbow_up`. Points outside the workspace are projected onto it.
pub fn inverse_kinematics(x: &Vec2, p: &ManipulatorParams, elbow_up: bool) -> Vec2 {
    let r2 = x.norm_squared();
    let c2 = ((r2 - p.l1 * p.l1 - p.l2 * p.l2) / (2.0 * p.l1 * p.l2)).clamp(-1.0, 1.0);
    let q2 = if elbow_up { c2.acos() } else { -c2.acos() };
    let q1 = x[1].atan2(x[0]) - (p.l2 * q2.sin()).atan2(p.l1 + p.l2 * q2.cos());
    Vec2::new(q1, q2)
}

/// One classical RK4 step of the arm under constant torque.
pub fn rk4_step(q: &Vec2, qd: &Vec2, tau: &Vec2, dt: f64, p: &ManipulatorParams) -> (Vec2, Vec2) {
    let f = |q: &Vec2, qd: &Vec2| (*qd, forward_dynamics(q, qd, tau, p));
    let (k1q, k1v) = f(q, qd);
    let (k2q, k2v) = f(&(q + k1q * (dt / 2.0)), &(qd + k1v * (dt / 2.0)));
    let (k3q, k3v) = f(&(q + k2q * (dt / 2.0)), &(qd + k2v * (dt / 2.0)));
    let (k4q, k4v) = f(&(q + k3q * dt), &(qd + k3v * dt));
    (
        q + (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * (dt / 6.0),
        qd + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (dt / 6.0),
    )
}

/// Energy bookkeeping along an integrated trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyAudit {
    /// `max_t |E(t) − E(0) − ∫₀ᵗ (τᵀq̇ − q̇ᵀBq̇) dt|`
    pub max_residual: f64,
    pub max_energy: f64,
    pub final_q: Vec2,
    pub final_qd: Vec2,
}

/// Integrates the arm and the supplied-minus-dissipated power together with
/// RK4 (torque evaluated at each stage time) and compares the integral with
/// the energy change.
pub fn energy_audit(
    q0: Vec2,
    qd0: Vec2,
    torque: impl Fn(f64) -> Vec2,
    dt: f64,
    duration: f64,
    p: &ManipulatorParams,
) -> EnergyAudit {
    type S = (Vec2, Vec2, f64);
    let bm = friction(p);
    let rhs = |t: f64, s: &S| -> S {
        let tau = torque(t);
        let power = tau.dot(&s.1) - s.1.dot(&(bm * s.1));
        (s.1, forward_dynamics(&s.0, &s.1, &tau, p), power)
    };
    let add = |s: &S, k: &S, h: f64| -> S { (s.0 + k.0 * h, s.1 + k.1 * h, s.2 + k.2 * h) };
    let e0 = energy(&q0, &qd0, p);
    let mut s: S = (q0, qd0, 0.0);
    let mut max_residual: f64 = 0.0;
    let mut max_energy = e0.abs();
    let steps = (duration / dt).round() as usize;
    for n in 0..steps {
        let t = n as f64 * dt;
        let k1 = rhs(t, &s);
        let k2 = rhs(t + dt / 2.0, &add(&s, &k1, dt / 2.0));
        let k3 = rhs(t + dt / 2.0, &add(&s, &k2, dt / 2.0));
        let k4 = rhs(t + dt, &add(&s, &k3, dt));
        s = (
            s.0 + (k1.0 + k2.0 * 2.0 + k3.0 * 2.0 + k4.0) * (dt / 6.0),
            s.1 + (k1.1 + k2.1 * 2.0 + k3.1 * 2.0 + k4.1) * (dt / 6.0),
            s.2 + (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2) * (dt / 6.0),
        );
        let e = energy(&s.0, &s.1, p);
        max_energy = max_energy.max(e.abs());
        max_residual = max_residual.max((e - e0 - s.2).abs());
    }
    EnergyAudit {
        max_residual,
        max_energy,
        final_q: s.0,
        final_qd: s.1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::InertiaModel;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn point_mass_coupling_vanishes_at_right_angle() {
        let p = ManipulatorParams::default();
        let m = mass_matrix(&Vec2::new(0.3, FRAC_PI_2), &p);
        assert!((m[(0, 1)] - p.m2 * p.l2 * p.l2).abs() < 1e-18);
        assert_eq!(m[(0, 1)], m[(1, 0)]);
    }

    #[test]
    fn rest_without_torque_or_gravity_stays_at_rest() {
        for inertia in [InertiaModel::PointMassAtTip, InertiaModel::UniformRod] {
            let p = ManipulatorParams {
                inertia,
                ..Default::default()
            };
            let a = forward_dynamics(&Vec2::new(0.4, -1.1), &Vec2::zeros(), &Vec2::zeros(), &p);
            assert_eq!(a, Vec2::zeros());
        }
    }

    #[test]
    fn inverse_kinematics_round_trips() {
        let p = ManipulatorParams::default();
        for &(x, y) in &[(0.12, 0.03), (-0.05, 0.15), (0.0, -0.09)] {
            let target = Vec2::new(x, y);
            for elbow in [true, false] {
                let q = inverse_kinematics(&target, &p, elbow);
                assert!((forward_kinematics(&q, &p) - target).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_difference() {
        let p = ManipulatorParams::default();
        let q = Vec2::new(0.7, 1.3);
        let j = jacobian(&q, &p);
        let h = 1e-6;
        for col in 0..2 {
            let mut dq = Vec2::zeros();
            dq[col] = h;
            let fd = (forward_kinematics(&(q + dq), &p) - forward_kinematics(&(q - dq), &p)) / (2.0 * h);
            assert!((fd - j.column(col)).norm() < 1e-9);
        }
    }

    #[test]
    fn gravity_is_gradient_of_potential() {
        let p = ManipulatorParams {
            gravity: 9.81,
            inertia: InertiaModel::UniformRod,
            ..Default::default()
        };
        let q = Vec2::new(0.2, -0.8);
        let h = 1e-6;
        for i in 0..2 {
            let mut dq = Vec2::zeros();
            dq[i] = h;
            let fd = (potential_energy(&(q + dq), &p) - potential_energy(&(q - dq), &p)) / (2.0 * h);
            assert!((fd - gravity(&q, &p)[i]).abs() < 1e-9);
        }
    }
}
