//! Explicit fixed-step integrators, selectable by name.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::SimError;

/// Right-hand side `f(x, dx)` of the assembled network ODE.
pub type VectorField<'a> = dyn FnMut(&[f64], &mut [f64]) -> Result<(), SimError> + 'a;

pub trait Integrator: Send + Sync {
    fn name(&self) -> &'static str;

    /// Global order of accuracy.
    fn order(&self) -> u32;

    /// Advances `x` by `h` in place. `k1` holds `f(x)` on entry.
    fn step(
        &self,
        f: &mut VectorField<'_>,
        x: &mut [f64],
        k1: &[f64],
        h: f64,
        work: &mut Workspace,
    ) -> Result<(), SimError>;
}

/// Scratch buffers reused across steps.
#[derive(Debug, Default)]
pub struct Workspace {
    stage: Vec<f64>,
    k: [Vec<f64>; 3],
}

impl Workspace {
    fn ensure(&mut self, n: usize) {
        if self.stage.len() != n {
            self.stage = vec![0.0; n];
            self.k = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        }
    }
}

/// Classical fourth-order Runge–Kutta.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rk4;

impl Integrator for Rk4 {
    fn name(&self) -> &'static str {
        "rk4"
    }

    fn order(&self) -> u32 {
        4
    }

    fn step(
        &self,
        f: &mut VectorField<'_>,
        x: &mut [f64],
        k1: &[f64],
        h: f64,
        work: &mut Workspace,
    ) -> Result<(), SimError> {
        let n = x.len();
        work.ensure(n);
        let Workspace { stage, k } = work;
        let [k2, k3, k4] = k;
        let half = 0.5 * h;
        for i in 0..n {
            stage[i] = x[i] + half * k1[i];
        }
        f(stage, k2)?;
        for i in 0..n {
            stage[i] = x[i] + half * k2[i];
        }
        f(stage, k3)?;
        for i in 0..n {
            stage[i] = x[i] + h * k3[i];
        }
        f(stage, k4)?;
        let sixth = h / 6.0;
        for i in 0..n {
            x[i] += sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        Ok(())
    }
}

/// Forward Euler.
#[derive(Debug, Clone, Copy, Default)]
pub struct Euler;

impl Integrator for Euler {
    fn name(&self) -> &'static str {
        "euler"
    }

    fn order(&self) -> u32 {
        1
    }

    fn step(
        &self,
        _f: &mut VectorField<'_>,
        x: &mut [f64],
        k1: &[f64],
        h: f64,
        _work: &mut Workspace,
    ) -> Result<(), SimError> {
        for (xi, ki) in x.iter_mut().zip(k1) {
            *xi += h * ki;
        }
        Ok(())
    }
}

/// Name-indexed integrator registry.
#[derive(Clone)]
pub struct IntegratorRegistry {
    methods: BTreeMap<String, Arc<dyn Integrator>>,
}

impl fmt::Debug for IntegratorRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.methods.keys()).finish()
    }
}

impl IntegratorRegistry {
    pub fn empty() -> Self {
        Self {
            methods: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(Rk4));
        r.register(Arc::new(Euler));
        r
    }

    pub fn register(&mut self, method: Arc<dyn Integrator>) {
        self.methods.insert(method.name().to_string(), method);
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn Integrator>> {
        self.methods.get(name).cloned()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.methods.keys().map(String::as_str)
    }
}
