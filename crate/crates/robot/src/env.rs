//! Planar reaching task: drive the fingertip onto a random target and stop
//! there.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{forward_dynamics, forward_kinematics, Vec2};
use crate::params::ManipulatorParams;
use crate::policy::Policy;
use crate::RobotError;

pub const OBS_DIM: usize = 11;
pub type Observation = [f64; OBS_DIM];

/// When an episode counts as a success, and how long it runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeCriterion {
    /// m
    pub distance_threshold: f64,
    /// N·m, applied to each joint.
    pub torque_threshold: f64,
    /// Control steps per episode.
    pub max_steps: usize,
    /// Physics substep, s.
    pub dt: f64,
    /// Physics substeps per control step.
    pub substeps: usize,
    /// Consecutive control steps both thresholds must hold for.
    pub torque_window: usize,
}

impl Default for EpisodeCriterion {
    fn default() -> Self {
        Self {
            distance_threshold: 0.04,
            torque_threshold: 0.005,
            max_steps: 100,
            dt: 0.01,
            substeps: 2,
            torque_window: 1,
        }
    }
}

/// Targets are uniform on the disk `min_radius ≤ r ≤ radius` about the base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpawnConfig {
    pub radius: f64,
    pub min_radius: f64,
}

impl Default for SpawnConfig {
    fn default() -> Self {
        Self {
            radius: 0.16,
            min_radius: 0.01,
        }
    }
}

/// Starting pose: shoulder angle uniform in `q1_range`, elbow fixed, at rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialPose {
    pub q1_range: [f64; 2],
    pub q2: f64,
}

impl Default for InitialPose {
    fn default() -> Self {
        Self {
            q1_range: [-PI, PI],
            q2: FRAC_PI_2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub params: ManipulatorParams,
    pub criterion: EpisodeCriterion,
    /// Actuator bound per joint, N·m. Actions are clipped to it.
    pub torque_limit: f64,
    /// Weight `c_a` of the `‖τ‖²` term in the reward.
    pub control_cost: f64,
    pub spawn: SpawnConfig,
    pub initial: InitialPose,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            params: ManipulatorParams::default(),
            criterion: EpisodeCriterion::default(),
            torque_limit: 0.05,
            control_cost: 10.0,
            spawn: SpawnConfig::default(),
            initial: InitialPose::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), RobotError> {
        self.params.validate()?;
        let c = &self.criterion;
        if !(c.distance_threshold > 0.0 && c.torque_threshold > 0.0) {
            return Err(RobotError::Config("success thresholds must be positive".into()));
        }
        if !(c.dt > 0.0 && c.dt.is_finite()) || c.substeps == 0 || c.max_steps == 0 {
            return Err(RobotError::Config(
                "dt, substeps and max_steps must be positive".into(),
            ));
        }
        if c.torque_window == 0 || c.torque_window > c.max_steps {
            return Err(RobotError::Config(format!(
                "torque_window {} must lie in 1..={}",
                c.torque_window, c.max_steps
            )));
        }
        if !(self.torque_limit > 0.0 && self.torque_limit.is_finite()) {
            return Err(RobotError::Config("torque_limit must be positive".into()));
        }
        if !(self.control_cost >= 0.0) {
            return Err(RobotError::Config("control_cost must be nonnegative".into()));
        }
        let (inner, outer) = self.params.reach();
        let s = &self.spawn;
        if !(s.min_radius >= inner && s.radius <= outer && s.min_radius < s.radius) {
            return Err(RobotError::Config(format!(
                "spawn annulus [{}, {}] must lie inside the workspace [{inner}, {outer}]",
                s.min_radius, s.radius
            )));
        }
        let [lo, hi] = self.initial.q1_range;
        if !(lo <= hi && lo.is_finite() && hi.is_finite() && self.initial.q2.is_finite()) {
            return Err(RobotError::Config("invalid initial pose".into()));
        }
        Ok(())
    }

    /// Seconds per control step.
    pub fn control_dt(&self) -> f64 {
        self.criterion.dt * self.criterion.substeps as f64
    }

    /// Typical magnitude of each observation entry: 1 for the angle terms,
    /// the spawn radius for target and offset, and the joint speed that the
    /// torque limit reaches from rest within one second at full extension.
    pub fn observation_scale(&self) -> Observation {
        let p = &self.params;
        let r = self.spawn.radius;
        let extended = crate::dynamics::mass_matrix(&crate::dynamics::Vec2::zeros(), p);
        let v = self.torque_limit / extended[(0, 0)];
        [1.0, 1.0, 1.0, 1.0, r, r, v, v, r, r, 1.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManipulatorState {
    pub q: Vec2,
    pub qd: Vec2,
    pub target: Vec2,
    /// s
    pub t: f64,
    /// Control steps taken.
    pub step: usize,
}

impl ManipulatorState {
    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qd.iter()).chain(self.target.iter()).all(|v| v.is_finite())
    }
}

/// Fingertip minus target.
pub fn offset(state: &ManipulatorState, p: &ManipulatorParams) -> Vec2 {
    forward_kinematics(&state.q, p) - state.target
}

/// `[cos q₁, cos q₂, sin q₁, sin q₂, target x, target y, q̇₁, q̇₂, Δx, Δy, 0]`
/// with `Δ` the fingertip-to-target offset.
pub fn observe(state: &ManipulatorState, p: &ManipulatorParams) -> Observation {
    let d = offset(state, p);
    [
        state.q[0].cos(),
        state.q[1].cos(),
        state.q[0].sin(),
        state.q[1].sin(),
        state.target[0],
        state.target[1],
        state.qd[0],
        state.qd[1],
        d[0],
        d[1],
        0.0,
    ]
}

/// Uniform target on the spawn annulus by rejection from the bounding square.
pub fn spawn_target<R: Rng + ?Sized>(spawn: &SpawnConfig, rng: &mut R) -> Vec2 {
    loop {
        let x = rng.random_range(-spawn.radius..=spawn.radius);
        let y = rng.random_range(-spawn.radius..=spawn.radius);
        let r2 = x * x + y * y;
        if r2 <= spawn.radius * spawn.radius && r2 >= spawn.min_radius * spawn.min_radius {
            return Vec2::new(x, y);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: ManipulatorState,
    pub reward: f64,
    /// The clipped torque actually applied.
    pub torque: Vec2,
    /// Fingertip-to-target distance after the step.
    pub distance: f64,
    pub terminal: bool,
    /// The state became non-finite; the episode is over and failed.
    pub aborted: bool,
}

#[derive(Debug, Clone)]
pub struct ReachEnv {
    pub config: EnvConfig,
}

impl ReachEnv {
    pub fn new(config: EnvConfig) -> Result<Self, RobotError> {
        config.validate()?;
        Ok(Self { config })
    }

    /// Draws a target, then the starting shoulder angle.
    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> ManipulatorState {
        let target = spawn_target(&self.config.spawn, rng);
        let [lo, hi] = self.config.initial.q1_range;
        let q1 = if lo < hi { rng.random_range(lo..hi) } else { lo };
        ManipulatorState {
            q: Vec2::new(q1, self.config.initial.q2),
            qd: Vec2::zeros(),
            target,
            t: 0.0,
            step: 0,
        }
    }

    pub fn clip(&self, action: [f64; 2]) -> Vec2 {
        let lim = self.config.torque_limit;
        Vec2::new(action[0].clamp(-lim, lim), action[1].clamp(-lim, lim))
    }

    /// Applies `action` for one control step of semi-implicit Euler substeps.
    pub fn step(&self, state: &ManipulatorState, action: [f64; 2]) -> Transition {
        let c = &self.config.criterion;
        let p = &self.config.params;
        let torque = self.clip(action);
        let mut next = *state;
        let mut aborted = !(action[0].is_finite() && action[1].is_finite());
        if !aborted {
            for _ in 0..c.substeps {
                let qdd = forward_dynamics(&next.q, &next.qd, &torque, p);
                next.qd += qdd * c.dt;
                next.q += next.qd * c.dt;
                if !next.is_finite() {
                    aborted = true;
                    break;
                }
            }
        }
        next.step += 1;
        next.t = next.step as f64 * self.config.control_dt();
        let distance = offset(&next, p).norm();
        let reward = if aborted {
            f64::NAN
        } else {
            -distance - self.config.control_cost * torque.norm_squared()
        };
        Transition {
            state: next,
            reward,
            torque,
            distance,
            terminal: aborted || next.step >= c.max_steps,
            aborted,
        }
    }

    /// Whether one transition meets both thresholds.
    pub fn meets_criterion(&self, tr: &Transition) -> bool {
        let c = &self.config.criterion;
        !tr.aborted
            && tr.distance < c.distance_threshold
            && tr.torque[0].abs() < c.torque_threshold
            && tr.torque[1].abs() < c.torque_threshold
    }

    /// Runs one episode from `start` under `policy`.
    pub fn run_episode(&self, policy: &dyn Policy, start: ManipulatorState) -> EpisodeOutcome {
        let p = &self.config.params;
        let window = self.config.criterion.torque_window;
        let mut state = start;
        let mut total = 0.0;
        let mut streak = 0;
        let mut success_step = None;
        loop {
            let tr = self.step(&state, policy.act(&observe(&state, p)));
            if tr.aborted {
                return EpisodeOutcome {
                    success: false,
                    success_step: None,
                    final_distance: f64::NAN,
                    total_reward: f64::NAN,
                    steps: tr.state.step,
                    aborted: true,
                };
            }
            total += tr.reward;
            if self.meets_criterion(&tr) {
                streak += 1;
                if streak >= window && success_step.is_none() {
                    success_step = Some(tr.state.step);
                }
            } else {
                streak = 0;
            }
            state = tr.state;
            if tr.terminal {
                return EpisodeOutcome {
                    success: success_step.is_some(),
                    success_step,
                    final_distance: tr.distance,
                    total_reward: total,
                    steps: state.step,
                    aborted: false,
                };
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub success: bool,
    /// First control step at which the criterion was met.
    pub success_step: Option<usize>,
    pub final_distance: f64,
    pub total_reward: f64,
    pub steps: usize,
    pub aborted: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::ZeroPolicy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn env() -> ReachEnv {
        ReachEnv::new(EnvConfig::default()).unwrap()
    }

    #[test]
    fn zero_torque_from_rest_only_advances_time() {
        let e = env();
        let s = e.reset(&mut ChaCha8Rng::seed_from_u64(3));
        let tr = e.step(&s, [0.0, 0.0]);
        assert_eq!(tr.state.q, s.q);
        assert_eq!(tr.state.qd, s.qd);
        assert_eq!(tr.state.target, s.target);
        assert!((tr.state.t - 0.02).abs() < 1e-15);
    }

    #[test]
    fn reward_on_target_at_rest_is_zero() {
        let e = env();
        let mut s = e.reset(&mut ChaCha8Rng::seed_from_u64(1));
        s.target = forward_kinematics(&s.q, &e.config.params);
        let tr = e.step(&s, [0.0, 0.0]);
        assert_eq!(tr.reward, 0.0);
        assert!(e.meets_criterion(&tr));
    }

    #[test]
    fn observation_layout() {
        let e = env();
        let s = ManipulatorState {
            q: Vec2::zeros(),
            qd: Vec2::zeros(),
            target: Vec2::new(0.2, 0.0),
            t: 0.0,
            step: 0,
        };
        let o = observe(&s, &e.config.params);
        assert_eq!(o.len(), OBS_DIM);
        assert_eq!(&o[..4], &[1.0, 1.0, 0.0, 0.0]);
        assert_eq!(&o[8..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn actions_are_clipped_and_nan_aborts() {
        let e = env();
        let s = e.reset(&mut ChaCha8Rng::seed_from_u64(0));
        let tr = e.step(&s, [10.0, -10.0]);
        assert_eq!(tr.torque, Vec2::new(0.05, -0.05));
        let bad = e.step(&s, [f64::NAN, 0.0]);
        assert!(bad.aborted && bad.terminal);
    }

    #[test]
    fn episodes_are_deterministic() {
        let e = env();
        let a = e.run_episode(&ZeroPolicy, e.reset(&mut ChaCha8Rng::seed_from_u64(9)));
        let b = e.run_episode(&ZeroPolicy, e.reset(&mut ChaCha8Rng::seed_from_u64(9)));
        assert_eq!(a, b);
        assert_eq!(a.steps, 100);
    }

    #[test]
    fn spawn_stays_in_annulus() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = SpawnConfig::default();
        for _ in 0..10_000 {
            let r = spawn_target(&s, &mut rng).norm();
            assert!((s.min_radius..=s.radius).contains(&r));
        }
    }

    #[test]
    fn config_rejects_unreachable_spawn() {
        let mut c = EnvConfig::default();
        c.spawn.radius = 0.5;
        assert!(ReachEnv::new(c).is_err());
    }
}
