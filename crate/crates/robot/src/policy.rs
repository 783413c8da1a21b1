//! Policies map an observation to a joint-torque pair. Kinds are looked up
//! by name in a [`PolicyRegistry`] and built from a versioned policy file.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::{coriolis, friction, inverse_kinematics, mass_matrix, Vec2};
use crate::env::{EnvConfig, Observation, OBS_DIM};
use crate::params::ManipulatorParams;
use crate::RobotError;

pub const POLICY_FORMAT: &str = "circuflow-policy";
pub const POLICY_VERSION: u32 = 1;

pub trait Policy: fmt::Debug + Send + Sync {
    fn kind(&self) -> &'static str;

    /// Desired joint torques; the environment clips them to the actuator
    /// bound.
    fn act(&self, obs: &Observation) -> [f64; 2];
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPolicy;

impl Policy for ZeroPolicy {
    fn kind(&self) -> &'static str {
        "zero"
    }

    fn act(&self, _obs: &Observation) -> [f64; 2] {
        [0.0, 0.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServoGains {
    /// Natural frequency of the joint-space error dynamics, rad/s.
    pub omega: f64,
    /// Damping ratio; 1 is critical damping.
    pub zeta: f64,
}

impl Default for ServoGains {
    fn default() -> Self {
        Self {
            omega: 8.0,
            zeta: 1.0,
        }
    }
}

/// Inverse-kinematics servo: computed-torque PD towards the joint angles
/// that put the fingertip on the target, keeping the current elbow sign.
/// The torque fades with the joint error and velocity, so the arm comes to
/// rest on the target with vanishing torque.
#[derive(Debug, Clone)]
pub struct ServoPolicy {
    pub params: ManipulatorParams,
    pub gains: ServoGains,
}

fn wrap(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

impl Policy for ServoPolicy {
    fn kind(&self) -> &'static str {
        "servo"
    }

    fn act(&self, obs: &Observation) -> [f64; 2] {
        let q = Vec2::new(obs[2].atan2(obs[0]), obs[3].atan2(obs[1]));
        let qd = Vec2::new(obs[6], obs[7]);
        let target = Vec2::new(obs[4], obs[5]);
        let goal = inverse_kinematics(&target, &self.params, q[1] >= 0.0);
        let e = Vec2::new(wrap(goal[0] - q[0]), wrap(goal[1] - q[1]));
        let w = self.gains.omega;
        let accel = e * (w * w) - qd * (2.0 * self.gains.zeta * w);
        let p = &self.params;
        let tau = mass_matrix(&q, p) * accel + coriolis(&q, &qd, p) * qd + friction(p) * qd;
        [tau[0], tau[1]]
    }
}

/// Feed-forward network with `tanh` hidden units and a `tanh` output scaled
/// to `output_scale`.
///
/// Parameters are stored layer by layer: the weight matrix row-major
/// (`out × in`), then the bias. Each observation entry is divided by its
/// `input_scale` before the first layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<usize>,
    params: Vec<f64>,
    output_scale: f64,
    input_scale: [f64; OBS_DIM],
}

impl Mlp {
    pub fn new(layers: Vec<usize>, params: Vec<f64>, output_scale: f64) -> Result<Self, RobotError> {
        if layers.len() < 2 || layers[0] != OBS_DIM || *layers.last().unwrap() != 2 {
            return Err(RobotError::Policy(format!(
                "layer sizes {layers:?} must start at {OBS_DIM} and end at 2"
            )));
        }
        if layers.contains(&0) {
            return Err(RobotError::Policy("layer sizes must be positive".into()));
        }
        let expected = Self::param_count(&layers);
        if params.len() != expected {
            return Err(RobotError::Policy(format!(
                "{} parameters given, layers {layers:?} need {expected}",
                params.len()
            )));
        }
        if !params.iter().all(|v| v.is_finite()) {
            return Err(RobotError::Policy("non-finite parameter".into()));
        }
        if !(output_scale > 0.0 && output_scale.is_finite()) {
            return Err(RobotError::Policy("output_scale must be positive".into()));
        }
        Ok(Self {
            layers,
            params,
            output_scale,
            input_scale: [1.0; OBS_DIM],
        })
    }

    pub fn with_input_scale(mut self, scale: &[f64]) -> Result<Self, RobotError> {
        if scale.len() != OBS_DIM || !scale.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(RobotError::Policy(format!(
                "input_scale needs {OBS_DIM} positive entries"
            )));
        }
        self.input_scale.copy_from_slice(scale);
        Ok(self)
    }

    pub fn param_count(layers: &[usize]) -> usize {
        layers.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }

    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn output_scale(&self) -> f64 {
        self.output_scale
    }

    pub fn input_scale(&self) -> &[f64; OBS_DIM] {
        &self.input_scale
    }

    pub fn to_file(&self) -> PolicyFile {
        PolicyFile {
            layers: Some(self.layers.clone()),
            output_scale: Some(self.output_scale),
            input_scale: (self.input_scale != [1.0; OBS_DIM]).then(|| self.input_scale.to_vec()),
            parameters: Some(self.params.clone()),
            ..PolicyFile::new("mlp")
        }
    }
}

impl Policy for Mlp {
    fn kind(&self) -> &'static str {
        "mlp"
    }

    fn act(&self, obs: &Observation) -> [f64; 2] {
        let mut x: Vec<f64> = obs.iter().zip(&self.input_scale).map(|(o, s)| o / s).collect();
        let mut offset = 0;
        let last = self.layers.len() - 2;
        for (l, w) in self.layers.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let bias = &self.params[offset + n_in * n_out..offset + n_out * (n_in + 1)];
            offset += n_out * (n_in + 1);
            x = (0..n_out)
                .map(|r| {
                    let row = &weights[r * n_in..(r + 1) * n_in];
                    let z: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + bias[r];
                    if l == last {
                        self.output_scale * z.tanh()
                    } else {
                        z.tanh()
                    }
                })
                .collect();
        }
        [x[0], x[1]]
    }
}

/// On-disk policy description. `kind` selects the registry entry; the other
/// fields are read by the kinds that need them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyFile {
    pub format: String,
    pub version: u32,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_scale: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameters: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub servo: Option<ServoGains>,
    /// Free-form provenance, e.g. trainer settings and seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

impl PolicyFile {
    pub fn new(kind: &str) -> Self {
        Self {
            format: POLICY_FORMAT.to_string(),
            version: POLICY_VERSION,
            kind: kind.to_string(),
            layers: None,
            activation: (kind == "mlp").then(|| "tanh".to_string()),
            output_scale: None,
            input_scale: None,
            parameters: None,
            servo: None,
            metadata: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self, RobotError> {
        let file: PolicyFile = serde_json::from_str(text)?;
        if file.format != POLICY_FORMAT {
            return Err(RobotError::Policy(format!(
                "format `{}` is not `{POLICY_FORMAT}`",
                file.format
            )));
        }
        if file.version != POLICY_VERSION {
            return Err(RobotError::Policy(format!(
                "unsupported policy file version {}",
                file.version
            )));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, RobotError> {
        let text = std::fs::read_to_string(path).map_err(|source| RobotError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("policy serializes");
        s.push('\n');
        s
    }
}

type Factory = dyn Fn(&PolicyFile, &EnvConfig) -> Result<Arc<dyn Policy>, RobotError> + Send + Sync;

/// Name-indexed registry of policy kinds.
#[derive(Clone, Default)]
pub struct PolicyRegistry {
    kinds: BTreeMap<String, (&'static str, Arc<Factory>)>,
}

impl fmt::Debug for PolicyRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.kinds.keys()).finish()
    }
}

impl PolicyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn builtin() -> Self {
        let mut r = Self::new();
        r.register("zero", "applies no torque", |_, _| Ok(Arc::new(ZeroPolicy)));
        r.register("servo", "inverse-kinematics computed-torque PD", |f, env| {
            Ok(Arc::new(ServoPolicy {
                params: env.params,
                gains: f.servo.unwrap_or_default(),
            }))
        });
        r.register("mlp", "feed-forward tanh network", |f, env| {
            if let Some(a) = &f.activation {
                if a != "tanh" {
                    return Err(RobotError::Policy(format!("unsupported activation `{a}`")));
                }
            }
            let layers = f
                .layers
                .clone()
                .ok_or_else(|| RobotError::Policy("mlp policy needs `layers`".into()))?;
            let params = f
                .parameters
                .clone()
                .ok_or_else(|| RobotError::Policy("mlp policy needs `parameters`".into()))?;
            let scale = f.output_scale.unwrap_or(env.torque_limit);
            let mut mlp = Mlp::new(layers, params, scale)?;
            if let Some(input) = &f.input_scale {
                mlp = mlp.with_input_scale(input)?;
            }
            Ok(Arc::new(mlp))
        });
        r
    }

    pub fn register<F>(&mut self, name: &str, description: &'static str, factory: F)
    where
        F: Fn(&PolicyFile, &EnvConfig) -> Result<Arc<dyn Policy>, RobotError> + Send + Sync + 'static,
    {
        self.kinds
            .insert(name.to_string(), (description, Arc::new(factory)));
    }

    pub fn names(&self) -> impl Iterator<Item = (&str, &'static str)> {
        self.kinds.iter().map(|(k, (d, _))| (k.as_str(), *d))
    }

    pub fn build(&self, file: &PolicyFile, env: &EnvConfig) -> Result<Arc<dyn Policy>, RobotError> {
        let (_, factory) = self
            .kinds
            .get(&file.kind)
            .ok_or_else(|| RobotError::UnknownPolicy(file.kind.clone()))?;
        factory(file, env)
    }

    /// Builds a policy from a registered kind name or, failing that, from a
    /// policy file at `spec`.
    pub fn resolve(&self, spec: &str, env: &EnvConfig) -> Result<Arc<dyn Policy>, RobotError> {
        if self.kinds.contains_key(spec) && spec != "mlp" {
            return self.build(&PolicyFile::new(spec), env);
        }
        self.build(&PolicyFile::load(Path::new(spec))?, env)
    }
}
