use super::{DynamicalSystem, GuardStatus};

type RhsFn = dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync;
type JacFn = dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync;
type GuardFn = dyn Fn(&[f64], &[f64]) -> GuardStatus + Send + Sync;

/// Parameter-independent linear flow `ż = A z`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    n: usize,
    n_params: usize,
    matrix: Vec<f64>,
}

impl LinearSystem {
    /// `matrix` is row-major `n × n`. The system still reports `n_params`
    /// parameters so it can be driven by any uncertainty box.
    pub fn new(n: usize, matrix: Vec<f64>, n_params: usize) -> Self {
        assert_eq!(matrix.len(), n * n, "matrix must be n x n");
        Self { n, n_params, matrix }
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }
}

impl DynamicalSystem for LinearSystem {
    fn name(&self) -> &str {
        "linear"
    }

    fn state_dim(&self) -> usize {
        self.n
    }

    fn param_dim(&self) -> usize {
        self.n_params
    }

    fn rhs(&self, _t: f64, _p: &[f64], z: &[f64], dz: &mut [f64]) {
        for (i, out) in dz.iter_mut().enumerate() {
            *out = self.matrix[i * self.n..(i + 1) * self.n].iter().zip(z).map(|(a, b)| a * b).sum();
        }
    }

    fn jacobian(&self, _t: f64, _p: &[f64], _z: &[f64], jac: &mut [f64]) {
        jac.copy_from_slice(&self.matrix);
    }
}

/// A system assembled from closures.
pub struct FnSystem {
    name: String,
    n: usize,
    n_params: usize,
    rhs: Box<RhsFn>,
    jac: Box<JacFn>,
    guard: Option<Box<GuardFn>>,
}

impl FnSystem {
    pub fn new(
        name: impl Into<String>,
        n: usize,
        n_params: usize,
        rhs: impl Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
        jac: impl Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), n, n_params, rhs: Box::new(rhs), jac: Box::new(jac), guard: None }
    }

    pub fn with_guard(mut self, guard: impl Fn(&[f64], &[f64]) -> GuardStatus + Send + Sync + 'static) -> Self {
        self.guard = Some(Box::new(guard));
        self
    }

    /// `ż = p` (state and parameter of equal dimension).
    pub fn parameter_drift(n: usize) -> Self {
        Self::new(
            "drift",
            n,
            n,
            |_, p, _, dz| dz.copy_from_slice(p),
            |_, _, _, jac| jac.fill(0.0),
        )
    }
}

impl DynamicalSystem for FnSystem {
    fn name(&self) -> &str {
        &self.name
    }

    fn state_dim(&self) -> usize {
        self.n
    }

    fn param_dim(&self) -> usize {
        self.n_params
    }

    fn rhs(&self, t: f64, p: &[f64], z: &[f64], dz: &mut [f64]) {
        (self.rhs)(t, p, z, dz)
    }

    fn jacobian(&self, t: f64, p: &[f64], z: &[f64], jac: &mut [f64]) {
        (self.jac)(t, p, z, jac)
    }

    fn guard(&self, p: &[f64], z: &[f64]) -> GuardStatus {
        self.guard.as_ref().map_or(GuardStatus::Ok, |g| g(p, z))
    }
}
