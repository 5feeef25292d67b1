//! Dormand–Prince 5(4) integration of single states, node ensembles, Galerkin
//! coefficient systems and coefficient variational equations.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SdiError};
use crate::pce::{CoefficientSet, PceSpace, Sampling};
use crate::systems::{DynamicalSystem, GuardStatus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Zero selects the first step automatically.
    #[serde(default)]
    pub initial_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-9, initial_step: 0.0, max_steps: 2_000_000 }
    }
}

impl IntegratorConfig {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self { abs_tol, rel_tol, ..Self::default() }
    }

    pub fn for_system(system: &dyn DynamicalSystem) -> Self {
        let (a, r) = system.default_tolerances();
        Self::new(a, r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) || !self.abs_tol.is_finite() || !self.rel_tol.is_finite() {
            return Err(SdiError::invalid("integrator tolerances must be positive"));
        }
        if self.max_steps == 0 {
            return Err(SdiError::invalid("max_steps must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationResult {
    pub final_state: Vec<f64>,
    pub status: GuardStatus,
    pub steps_taken: usize,
    pub t_end: f64,
}

// Dormand–Prince tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

struct Stepper {
    k: Vec<Vec<f64>>,
    tmp: Vec<f64>,
    next: Vec<f64>,
}

impl Stepper {
    fn new(n: usize) -> Self {
        Self { k: vec![vec![0.0; n]; 7], tmp: vec![0.0; n], next: vec![0.0; n] }
    }

    /// Fills `next` with the 5th-order solution and returns the scaled error
    /// (`f64::INFINITY` if a stage could not be evaluated). `k[0]` must hold
    /// the derivative at `(t, z)`.
    fn attempt<F>(&mut self, rhs: &mut F, t: f64, z: &[f64], h: f64, cfg: &IntegratorConfig) -> std::result::Result<f64, GuardStatus>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> std::result::Result<(), GuardStatus>,
    {
        let n = z.len();
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (r, a) in A[s][..s].iter().enumerate() {
                    acc += a * self.k[r][i];
                }
                self.tmp[i] = z[i] + h * acc;
            }
            rhs(t + C[s] * h, &self.tmp, &mut self.k[s])?;
        }
        // Stage 7 was evaluated at the 5th-order solution (FSAL).
        self.next.copy_from_slice(&self.tmp);
        let mut err = 0.0f64;
        for i in 0..n {
            let mut e = 0.0;
            for s in 0..7 {
                e += (B5[s] - B4[s]) * self.k[s][i];
            }
            let scale = cfg.abs_tol + cfg.rel_tol * z[i].abs().max(self.next[i].abs());
            err = err.max((h * e).abs() / scale);
        }
        Ok(if err.is_finite() { err } else { f64::INFINITY })
    }
}

fn initial_step<F>(rhs: &mut F, t0: f64, z0: &[f64], f0: &[f64], span: f64, cfg: &IntegratorConfig) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]) -> std::result::Result<(), GuardStatus>,
{
    if cfg.initial_step > 0.0 {
        return cfg.initial_step.min(span);
    }
    let scale = |i: usize| cfg.abs_tol + cfg.rel_tol * z0[i].abs();
    let rms = |v: &dyn Fn(usize) -> f64| (z0.iter().enumerate().map(|(i, _)| v(i).powi(2)).sum::<f64>() / z0.len() as f64).sqrt();
    let d0 = rms(&|i| z0[i] / scale(i));
    let d1 = rms(&|i| f0[i] / scale(i));
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 }.min(span);
    let z1: Vec<f64> = z0.iter().zip(f0).map(|(z, f)| z + h0 * f).collect();
    let mut f1 = vec![0.0; z0.len()];
    if rhs(t0 + h0, &z1, &mut f1).is_err() {
        return h0;
    }
    let d2 = rms(&|i| (f1[i] - f0[i]) / scale(i)) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(span)
}

/// Adaptive integration from `t0` to `tf`.
///
/// `guard` runs on the initial state and after every accepted step; a
/// non-`Ok` status stops integration and is returned with the state at
/// detection. `observe` sees the initial state and every accepted step.
pub fn integrate_observed<F, G, O>(
    mut rhs: F,
    mut guard: G,
    mut observe: O,
    z0: &[f64],
    t0: f64,
    tf: f64,
    cfg: &IntegratorConfig,
) -> PropagationResult
where
    F: FnMut(f64, &[f64], &mut [f64]) -> std::result::Result<(), GuardStatus>,
    G: FnMut(f64, &[f64]) -> GuardStatus,
    O: FnMut(f64, &[f64]),
{
    let n = z0.len();
    let mut z = z0.to_vec();
    let mut t = t0;
    let done = |status, z: Vec<f64>, steps, t| PropagationResult { final_state: z, status, steps_taken: steps, t_end: t };

    let status = guard(t, &z);
    observe(t, &z);
    if !status.is_ok() {
        return done(status, z, 0, t);
    }
    if tf <= t0 {
        return done(GuardStatus::Ok, z, 0, t);
    }

    let mut st = Stepper::new(n);
    if let Err(s) = rhs(t, &z, &mut st.k[0]) {
        return done(s, z, 0, t);
    }
    let span = tf - t0;
    let mut h = initial_step(&mut rhs, t0, &z, &st.k[0], span, cfg);
    let mut steps = 0usize;
    let mut rejected_non_finite = false;

    while t < tf {
        if steps >= cfg.max_steps {
            return done(GuardStatus::StepLimit, z, steps, t);
        }
        let last = t + h >= tf || tf - (t + h) < 1e-12 * span;
        if last {
            h = tf - t;
        }
        if h <= 1e-14 * t.abs().max(span) {
            let status = if rejected_non_finite { GuardStatus::NonFinite } else { GuardStatus::StepLimit };
            return done(status, z, steps, t);
        }
        let err = match st.attempt(&mut rhs, t, &z, h, cfg) {
            Ok(e) => e,
            Err(GuardStatus::NonFinite) => f64::INFINITY,
            Err(s) => return done(s, z, steps, t),
        };
        if err <= 1.0 {
            t = if last { tf } else { t + h };
            std::mem::swap(&mut z, &mut st.next);
            let (first, rest) = st.k.split_at_mut(6);
            first[0].copy_from_slice(&rest[0]);
            steps += 1;
            rejected_non_finite = false;
            observe(t, &z);
            let status = guard(t, &z);
            if !status.is_ok() {
                return done(status, z, steps, t);
            }
            let factor = if err == 0.0 { MAX_FACTOR } else { (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR) };
            h *= factor;
        } else {
            rejected_non_finite = !err.is_finite();
            let factor = if err.is_finite() { (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0) } else { MIN_FACTOR };
            h *= factor;
        }
    }
    done(GuardStatus::Ok, z, steps, t)
}

pub fn integrate<F, G>(rhs: F, guard: G, z0: &[f64], t0: f64, tf: f64, cfg: &IntegratorConfig) -> PropagationResult
where
    F: FnMut(f64, &[f64], &mut [f64]) -> std::result::Result<(), GuardStatus>,
    G: FnMut(f64, &[f64]) -> GuardStatus,
{
    integrate_observed(rhs, guard, |_, _| {}, z0, t0, tf, cfg)
}

/// Fixed-step Dormand–Prince (5th-order solution), used for convergence checks.
pub fn integrate_fixed<F>(mut rhs: F, z0: &[f64], t0: f64, tf: f64, n_steps: usize) -> Vec<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let cfg = IntegratorConfig::default();
    let mut st = Stepper::new(z0.len());
    let mut z = z0.to_vec();
    let h = (tf - t0) / n_steps as f64;
    let mut wrapped = |t: f64, z: &[f64], dz: &mut [f64]| {
        rhs(t, z, dz);
        Ok(())
    };
    for i in 0..n_steps {
        let t = t0 + i as f64 * h;
        let _ = wrapped(t, &z, &mut st.k[0]);
        let _ = st.attempt(&mut wrapped, t, &z, h, &cfg);
        std::mem::swap(&mut z, &mut st.next);
    }
    z
}

fn finite_guard(z: &[f64]) -> GuardStatus {
    if z.iter().all(|v| v.is_finite()) {
        GuardStatus::Ok
    } else {
        GuardStatus::NonFinite
    }
}

/// One trajectory of `system` with fixed parameters.
pub fn propagate(system: &dyn DynamicalSystem, p: &[f64], z0: &[f64], t0: f64, tf: f64, cfg: &IntegratorConfig) -> PropagationResult {
    integrate(
        |t, z, dz| {
            system.rhs(t, p, z, dz);
            Ok(())
        },
        |_, z| finite_guard(z).worst(system.guard(p, z)),
        z0,
        t0,
        tf,
        cfg,
    )
}

/// Final node states of a non-intrusive ensemble, in quadrature-node order.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub states: Vec<Vec<f64>>,
    pub statuses: Vec<GuardStatus>,
}

impl EnsembleResult {
    /// The dominant terminal status over all nodes.
    pub fn status(&self) -> GuardStatus {
        self.statuses.iter().fold(GuardStatus::Ok, |acc, &s| acc.worst(s))
    }

    pub fn is_partial(&self) -> bool {
        self.statuses.iter().any(|s| !s.is_ok())
    }

    pub fn project(&self, space: &PceSpace, t: f64) -> CoefficientSet {
        if self.is_partial() {
            let n = self.states.first().map_or(0, Vec::len);
            return CoefficientSet::invalid(space.n_terms(), n, t);
        }
        space.project_samples(&self.states, t)
    }
}

/// Integrates one trajectory per quadrature node.
pub fn propagate_ensemble(
    system: &dyn DynamicalSystem,
    space: &PceSpace,
    sampling: &Sampling,
    z0: &[f64],
    t0: f64,
    tf: f64,
    cfg: &IntegratorConfig,
) -> EnsembleResult {
    let mut states = Vec::with_capacity(space.n_nodes());
    let mut statuses = Vec::with_capacity(space.n_nodes());
    for j in 0..space.n_nodes() {
        let p = sampling.params_at(space, j);
        let zj = sampling.initial_state_at(space, z0, j);
        let r = propagate(system, p, zj, t0, tf, cfg);
        states.push(r.final_state);
        statuses.push(r.status);
    }
    EnsembleResult { states, statuses }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinResult {
    pub coeffs: CoefficientSet,
    pub status: GuardStatus,
    pub steps_taken: usize,
}

/// Integrates the coupled Galerkin system for all `M·n` coefficients.
pub fn propagate_galerkin(
    system: &dyn DynamicalSystem,
    space: &PceSpace,
    sampling: &Sampling,
    cs0: &CoefficientSet,
    tf: f64,
    cfg: &IntegratorConfig,
) -> GalerkinResult {
    let (m, n) = (cs0.n_terms(), cs0.n_state());
    if !cs0.is_valid() {
        return GalerkinResult { coeffs: CoefficientSet::invalid(m, n, tf), status: GuardStatus::NonFinite, steps_taken: 0 };
    }
    let r = integrate(
        |t, c, dc| space.galerkin_rhs_into(t, c, system, sampling, dc),
        |_, c| finite_guard(c),
        cs0.raw(),
        cs0.t,
        tf,
        cfg,
    );
    let coeffs = if r.status.is_ok() {
        CoefficientSet::from_raw(m, n, r.final_state, tf)
    } else {
        CoefficientSet::invalid(m, n, r.t_end)
    };
    GalerkinResult { coeffs, status: r.status, steps_taken: r.steps_taken }
}

/// Coefficients and their sensitivities `∂c_k/∂z0` (row-major `n × n` each).
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalResult {
    pub coeffs: CoefficientSet,
    pub sensitivities: Vec<Vec<f64>>,
    pub status: GuardStatus,
}

/// Galerkin flow augmented with the coefficient variational equations,
/// starting from `∂c_0/∂z0 = I` and all other blocks zero.
pub fn propagate_variational_coeffs(
    system: &dyn DynamicalSystem,
    space: &PceSpace,
    sampling: &Sampling,
    cs0: &CoefficientSet,
    tf: f64,
    cfg: &IntegratorConfig,
) -> VariationalResult {
    let (m, n) = (cs0.n_terms(), cs0.n_state());
    let nc = m * n;
    let nn = n * n;
    let invalid = |status| VariationalResult {
        coeffs: CoefficientSet::invalid(m, n, tf),
        sensitivities: vec![vec![f64::NAN; nn]; m],
        status,
    };
    if !cs0.is_valid() {
        return invalid(GuardStatus::NonFinite);
    }
    let mut y0 = vec![0.0; nc + m * nn];
    y0[..nc].copy_from_slice(cs0.raw());
    for i in 0..n {
        y0[nc + i * n + i] = 1.0;
    }

    let mut z = vec![0.0; n];
    let mut jac = vec![0.0; nn];
    let mut sens = vec![0.0; nn];
    let mut nodal = vec![0.0; space.n_nodes() * nn];
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> std::result::Result<(), GuardStatus> {
        let (c, d) = y.split_at(nc);
        let (dc, dd) = dy.split_at_mut(nc);
        space.galerkin_rhs_into(t, c, system, sampling, dc)?;
        for j in 0..space.n_nodes() {
            let psi = space.psi_at_node(j);
            z.fill(0.0);
            sens.fill(0.0);
            for (k, &pk) in psi.iter().enumerate() {
                for (zi, ci) in z.iter_mut().zip(&c[k * n..(k + 1) * n]) {
                    *zi += ci * pk;
                }
                for (si, di) in sens.iter_mut().zip(&d[k * nn..(k + 1) * nn]) {
                    *si += di * pk;
                }
            }
            system.jacobian(t, sampling.params_at(space, j), &z, &mut jac);
            let js = &mut nodal[j * nn..(j + 1) * nn];
            for r in 0..n {
                for col in 0..n {
                    js[r * n + col] = (0..n).map(|q| jac[r * n + q] * sens[q * n + col]).sum();
                }
            }
        }
        space.project_nodal(&nodal, nn, dd);
        Ok(())
    };
    let r = integrate(rhs, |_, y| finite_guard(y), &y0, cs0.t, tf, cfg);
    if !r.status.is_ok() {
        return invalid(r.status);
    }
    let y = r.final_state;
    let sensitivities = (0..m).map(|k| y[nc + k * nn..nc + (k + 1) * nn].to_vec()).collect();
    VariationalResult { coeffs: CoefficientSet::from_raw(m, n, y[..nc].to_vec(), tf), sensitivities, status: GuardStatus::Ok }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::UncertaintyBox;
    use crate::systems::{l1_refined, Cr3bp, FnSystem, LinearSystem, Pendulum};

    fn exp_rhs(_: f64, z: &[f64], dz: &mut [f64]) -> std::result::Result<(), GuardStatus> {
        dz[0] = z[0];
        Ok(())
    }

    #[test]
    fn exponential_growth() {
        let r = integrate(exp_rhs, |_, _| GuardStatus::Ok, &[1.0], 0.0, 1.0, &IntegratorConfig::default());
        assert_eq!(r.status, GuardStatus::Ok);
        assert_eq!(r.t_end, 1.0);
        assert!((r.final_state[0] - std::f64::consts::E).abs() < 1e-9);
    }

    #[test]
    fn zero_dynamics_is_exact() {
        let r = integrate(
            |_, _, dz: &mut [f64]| {
                dz.fill(0.0);
                Ok(())
            },
            |_, _| GuardStatus::Ok,
            &[0.3, -1.7],
            0.0,
            5.0,
            &IntegratorConfig::default(),
        );
        assert_eq!(r.final_state, vec![0.3, -1.7]);
    }

    #[test]
    fn fixed_step_convergence_order() {
        let err = |n| (integrate_fixed(|_, z, dz| dz[0] = z[0], &[1.0], 0.0, 1.0, n)[0] - std::f64::consts::E).abs();
        let (e1, e2) = (err(8), err(16));
        assert!(e1 / e2 >= 4.0, "ratio {}", e1 / e2);
        assert!(e1 / e2 > 20.0);
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        let run = |tol: f64| {
            let cfg = IntegratorConfig::new(tol, tol);
            let r = integrate(exp_rhs, |_, _| GuardStatus::Ok, &[1.0], 0.0, 1.0, &cfg);
            (r.final_state[0] - std::f64::consts::E).abs()
        };
        assert!(run(1e-6) / run(1e-6 / 32.0) >= 4.0);
    }

    #[test]
    fn l1_equilibrium_is_held() {
        let mu = 0.1;
        let z0 = [l1_refined(mu), 0.0, 0.0, 0.0];
        let r = propagate(&Cr3bp, &[mu], &z0, 0.0, 2.0, &IntegratorConfig::new(1e-10, 1e-8));
        assert_eq!(r.status, GuardStatus::Ok);
        for (a, b) in r.final_state.iter().zip(&z0) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn guard_stops_at_detection() {
        let r = integrate(
            |_, _, dz: &mut [f64]| {
                dz[0] = 1.0;
                Ok(())
            },
            |_, z| if z[0] > 0.5 { GuardStatus::Escape } else { GuardStatus::Ok },
            &[0.0],
            0.0,
            10.0,
            &IntegratorConfig { initial_step: 0.01, ..IntegratorConfig::default() },
        );
        assert_eq!(r.status, GuardStatus::Escape);
        assert!(r.t_end < 10.0 && r.final_state[0] > 0.5);
        assert!((r.final_state[0] - r.t_end).abs() < 1e-12);
    }

    #[test]
    fn step_budget_is_enforced() {
        let cfg = IntegratorConfig { max_steps: 3, ..IntegratorConfig::default() };
        let r = propagate(&Pendulum, &[2.5], &[1.0, 0.5], 0.0, 10.0, &cfg);
        assert_eq!(r.status, GuardStatus::StepLimit);
        assert_eq!(r.steps_taken, 3);
    }

    #[test]
    fn blow_up_is_flagged() {
        let r = integrate(
            |_, z, dz: &mut [f64]| {
                dz[0] = z[0] * z[0];
                Ok(())
            },
            |_, z| finite_guard(z),
            &[1.0],
            0.0,
            2.0,
            &IntegratorConfig::default(),
        );
        assert!(!r.status.is_ok());
        assert!(r.t_end < 1.0 + 1e-6);
    }

    #[test]
    fn identical_inputs_give_identical_runs() {
        let cfg = IntegratorConfig::default();
        let a = propagate(&Pendulum, &[2.4], &[0.889447, -0.19598], 0.0, 10.0, &cfg);
        let b = propagate(&Pendulum, &[2.4], &[0.889447, -0.19598], 0.0, 10.0, &cfg);
        assert_eq!(a, b);
    }

    #[test]
    fn ensemble_of_parameter_drift() {
        let space = PceSpace::build(4, 9, UncertaintyBox::from_bounds(&[(-1.0, 1.0)]).unwrap()).unwrap();
        let e = propagate_ensemble(&FnSystem::parameter_drift(1), &space, &Sampling::Parameters, &[0.0], 0.0, 10.0, &IntegratorConfig::default());
        assert!(!e.is_partial());
        for (j, z) in e.states.iter().enumerate() {
            assert!((z[0] - 10.0 * space.node_point(j)[0]).abs() < 1e-12);
        }
        let still = LinearSystem::new(2, vec![0.0, 1.0, -1.0, 0.0], 1);
        let e = propagate_ensemble(&still, &space, &Sampling::Parameters, &[1.0, 0.0], 0.0, 3.0, &IntegratorConfig::default());
        assert!(e.states.iter().all(|z| z == &e.states[0]));
    }

    #[test]
    fn galerkin_closed_forms() {
        let space = PceSpace::build(4, 9, UncertaintyBox::from_bounds(&[(-1.0, 1.0)]).unwrap()).unwrap();
        let cfg = IntegratorConfig::default();
        let g = propagate_galerkin(&FnSystem::parameter_drift(1), &space, &Sampling::Parameters, &space.deterministic(&[0.0], 0.0), 10.0, &cfg);
        assert_eq!(g.status, GuardStatus::Ok);
        assert!((g.coeffs.get(1, 0) - 10.0).abs() < 1e-9);
        for k in [0, 2, 3, 4] {
            assert!(g.coeffs.get(k, 0).abs() < 1e-9);
        }

        let grow = LinearSystem::new(1, vec![1.0], 1);
        let cs0 = CoefficientSet::from_raw(5, 1, vec![1.0, 0.5, -0.25, 0.1, 0.0], 0.0);
        let g = propagate_galerkin(&grow, &space, &Sampling::Parameters, &cs0, 2.0, &cfg);
        for (a, b) in g.coeffs.raw().iter().zip(cs0.raw()) {
            assert!((a - b * 2f64.exp()).abs() < 1e-8 * 2f64.exp());
        }
    }

    #[test]
    fn p_independent_galerkin_keeps_higher_rows_zero() {
        let space = PceSpace::build(3, 6, UncertaintyBox::from_bounds(&[(2.25, 2.75)]).unwrap()).unwrap();
        let sys = FnSystem::new(
            "pend0",
            2,
            1,
            |_, _, z, dz| {
                dz[0] = z[1];
                dz[1] = -z[0].sin();
            },
            |_, _, z, j| j.copy_from_slice(&[0.0, 1.0, -z[0].cos(), 0.0]),
        );
        let g = propagate_galerkin(&sys, &space, &Sampling::Parameters, &space.deterministic(&[1.0, 0.2], 0.0), 5.0, &IntegratorConfig::default());
        assert!(g.coeffs.raw()[2..].iter().all(|&c| c == 0.0));
    }

    #[test]
    fn variational_linear_system() {
        let space = PceSpace::build(2, 5, UncertaintyBox::from_bounds(&[(0.0, 1.0)]).unwrap()).unwrap();
        let a = LinearSystem::new(2, vec![1.0, 0.0, 0.0, -1.0], 1);
        let cfg = IntegratorConfig::default();
        let v = propagate_variational_coeffs(&a, &space, &Sampling::Parameters, &space.deterministic(&[0.3, 0.4], 0.0), 2.0, &cfg);
        assert_eq!(v.status, GuardStatus::Ok);
        let d0 = &v.sensitivities[0];
        assert!((d0[0] - 2f64.exp()).abs() < 1e-8 * 2f64.exp());
        assert!((d0[3] - (-2f64).exp()).abs() < 1e-9);
        assert!(d0[1].abs() < 1e-14 && d0[2].abs() < 1e-14);
        assert!(v.sensitivities[1..].iter().flatten().all(|&x| x == 0.0));

        let v0 = propagate_variational_coeffs(&a, &space, &Sampling::Parameters, &space.deterministic(&[0.3, 0.4], 0.0), 0.0, &cfg);
        assert_eq!(v0.sensitivities[0], vec![1.0, 0.0, 0.0, 1.0]);
    }
}
