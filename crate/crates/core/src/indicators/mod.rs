//! Deterministic FTLE and the stochastic indicators for one initial condition.

mod eig;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use eig::{gram, max_gram_eigenvalue, sym_eig};

use crate::basis::UncertaintyBox;
use crate::error::{Result, SdiError};
use crate::odeint::{propagate, propagate_ensemble, propagate_variational_coeffs, IntegratorConfig};
use crate::pce::{CoefficientSet, PceSpace, Sampling};
use crate::systems::{DynamicalSystem, GuardStatus};

/// Smallest elapsed time accepted by the pseudo-diffusion exponent.
pub const MIN_ALPHA_HORIZON: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaVariant {
    /// `ln(√λ_max(C_v) + 1) / ln t`
    #[default]
    MaxEigen,
    /// `ln(tr C_v + 1) / ln t`
    Trace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorConfig {
    pub degree: usize,
    pub n_per_dim: usize,
    pub delta_z: f64,
    pub t0: f64,
    pub tf: f64,
    pub epsilon: f64,
    pub n_mc: usize,
    pub seed: u64,
    pub sentinel_floor: f64,
    #[serde(default)]
    pub alpha_variant: AlphaVariant,
    pub integrator: IntegratorConfig,
}

impl Default for IndicatorConfig {
    fn default() -> Self {
        Self {
            degree: 4,
            n_per_dim: 9,
            delta_z: 1e-7,
            t0: 0.0,
            tf: 10.0,
            epsilon: 0.1,
            n_mc: 100,
            seed: 0,
            sentinel_floor: 1e-300,
            alpha_variant: AlphaVariant::MaxEigen,
            integrator: IntegratorConfig::default(),
        }
    }
}

impl IndicatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_z > 0.0) {
            return Err(SdiError::invalid("delta_z must be positive"));
        }
        if !(self.tf > self.t0) {
            return Err(SdiError::invalid("tf must exceed t0"));
        }
        if self.n_per_dim == 0 {
            return Err(SdiError::invalid("quadrature needs at least one node per dimension"));
        }
        if !(self.epsilon > 0.0) {
            return Err(SdiError::invalid("epsilon must be positive"));
        }
        if !(self.sentinel_floor > 0.0) {
            return Err(SdiError::invalid("sentinel floor must be positive"));
        }
        self.integrator.validate()
    }

    pub fn horizon(&self) -> f64 {
        self.tf - self.t0
    }
}

/// Which indicators a computation should produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub ftle: bool,
    pub sftle1: bool,
    pub sftle2: bool,
    pub alpha: bool,
    pub expectation: bool,
}

impl Selection {
    pub const ALL: Selection = Selection { ftle: true, sftle1: true, sftle2: true, alpha: true, expectation: true };
    pub const NONE: Selection = Selection { ftle: false, sftle1: false, sftle2: false, alpha: false, expectation: false };

    pub fn parse(s: &str) -> Option<Self> {
        let mut sel = Self::NONE;
        for part in s.split(',').map(str::trim) {
            match part {
                "ftle" => sel.ftle = true,
                "sftle1" => sel.sftle1 = true,
                "sftle2" => sel.sftle2 = true,
                "alpha" => sel.alpha = true,
                "expectation" => sel.expectation = true,
                "all" => sel = Self::ALL,
                _ => return None,
            }
        }
        Some(sel)
    }

    pub fn names(&self) -> Vec<&'static str> {
        [
            (self.ftle, "ftle"),
            (self.sftle1, "sftle1"),
            (self.sftle2, "sftle2"),
            (self.alpha, "alpha"),
            (self.expectation, "expectation"),
        ]
        .into_iter()
        .filter_map(|(on, n)| on.then_some(n))
        .collect()
    }

    fn needs_ensemble(&self) -> bool {
        self.alpha || self.expectation
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorResult {
    pub ftle: f64,
    /// Mean, variance and standardized skewness of the FTLE over Ω.
    pub sftle1: [f64; 3],
    pub sftle2: Vec<f64>,
    pub alpha_tilde: f64,
    pub alpha_tilde_components: Vec<f64>,
    pub expectation: f64,
    pub status: GuardStatus,
}

impl IndicatorResult {
    pub fn empty(n_state: usize, n_terms: usize, status: GuardStatus) -> Self {
        Self {
            ftle: f64::NAN,
            sftle1: [f64::NAN; 3],
            sftle2: vec![f64::NAN; n_terms],
            alpha_tilde: f64::NAN,
            alpha_tilde_components: vec![f64::NAN; n_state],
            expectation: f64::NAN,
            status,
        }
    }
}

/// Flow-map Jacobian `∂z(tf)/∂z0` by central differences of `2n` tracers.
pub fn flow_jacobian_fd(
    system: &dyn DynamicalSystem,
    p: &[f64],
    z0: &[f64],
    t0: f64,
    tf: f64,
    delta: f64,
    cfg: &IntegratorConfig,
) -> std::result::Result<Vec<f64>, GuardStatus> {
    let n = z0.len();
    let mut phi = vec![0.0; n * n];
    let mut z = z0.to_vec();
    for j in 0..n {
        z[j] = z0[j] + delta;
        let plus = propagate(system, p, &z, t0, tf, cfg);
        z[j] = z0[j] - delta;
        let minus = propagate(system, p, &z, t0, tf, cfg);
        z[j] = z0[j];
        let status = plus.status.worst(minus.status);
        if !status.is_ok() {
            return Err(status);
        }
        for i in 0..n {
            phi[i * n + j] = (plus.final_state[i] - minus.final_state[i]) / (2.0 * delta);
        }
    }
    Ok(phi)
}

/// Finite-time Lyapunov exponent `ln √λ_max(ΦᵀΦ) / (tf − t0)`.
pub fn ftle(
    system: &dyn DynamicalSystem,
    p: &[f64],
    z0: &[f64],
    t0: f64,
    tf: f64,
    delta: f64,
    cfg: &IntegratorConfig,
) -> std::result::Result<f64, GuardStatus> {
    let n = z0.len();
    let phi = flow_jacobian_fd(system, p, z0, t0, tf, delta, cfg)?;
    let lam = max_gram_eigenvalue(&phi, n, n).map_err(|_| GuardStatus::NonFinite)?;
    Ok(lam.sqrt().ln() / (tf - t0))
}

fn scalar_moments(space: &PceSpace, values: &[f64]) -> Result<[f64; 3]> {
    let samples: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
    let m = space.moments(&space.project_samples(&samples, 0.0))?;
    Ok([m.mean[0], m.variance[0], m.skewness[0]])
}

/// FTLE moments over Ω: the FTLE is evaluated at every quadrature node and
/// projected onto the basis.
pub fn sftle1(
    system: &dyn DynamicalSystem,
    space: &PceSpace,
    sampling: &Sampling,
    z0: &[f64],
    cfg: &IndicatorConfig,
) -> std::result::Result<[f64; 3], GuardStatus> {
    let mut values = Vec::with_capacity(space.n_nodes());
    for j in 0..space.n_nodes() {
        let p = sampling.params_at(space, j);
        let zj = sampling.initial_state_at(space, z0, j);
        values.push(ftle(system, p, zj, cfg.t0, cfg.tf, cfg.delta_z, &cfg.integrator)?);
    }
    scalar_moments(space, &values).map_err(|_| GuardStatus::NonFinite)
}

fn shifted_box(b: &UncertaintyBox, j: usize, delta: f64) -> Result<UncertaintyBox> {
    let bounds: Vec<(f64, f64)> = b
        .dims()
        .iter()
        .enumerate()
        .map(|(d, iv)| if d == j { (iv.lo + delta, iv.hi + delta) } else { (iv.lo, iv.hi) })
        .collect();
    UncertaintyBox::from_bounds(&bounds)
}

/// Non-intrusive coefficients at `tf` for the initial condition `z0`; with
/// initial-state sampling the box is translated by `z0 − center`.
fn ensemble_coeffs(
    system: &dyn DynamicalSystem,
    space: &PceSpace,
    sampling: &Sampling,
    z0: &[f64],
    shift: Option<(usize, f64)>,
    cfg: &IndicatorConfig,
) -> std::result::Result<CoefficientSet, GuardStatus> {
    let mut z = z0.to_vec();
    let shifted;
    let sp = match (sampling, shift) {
        (Sampling::Parameters, Some((j, d))) => {
            z[j] += d;
            space
        }
        (Sampling::InitialState { .. }, Some((j, d))) => {
            shifted = space.with_domain(shifted_box(space.domain(), j, d).map_err(|_| GuardStatus::NonFinite)?)
                .map_err(|_| GuardStatus::NonFinite)?;
            &shifted
        }
        (_, None) => space,
    };
    let e = propagate_ensemble(system, sp, sampling, &z, cfg.t0, cfg.tf, &cfg.integrator);
    let status = e.status();
    if !status.is_ok() {
        return Err(status);
    }
    Ok(e.project(sp, cfg.tf))
}

fn block_exponents(blocks: &[Vec<f64>], n: usize, cfg: &IndicatorConfig) -> Vec<f64> {
    blocks
        .iter()
        .map(|d| {
            let lam = max_gram_eigenvalue(d, n, n).unwrap_or(f64::NAN);
            lam.max(cfg.sentinel_floor).sqrt().ln() / cfg.horizon()
        })
        .collect()
}

/// Coefficient-block sensitivities `∂c_i/∂z0` by central differences of
/// non-intrusive ensembles started at `z0 ± Δz e_j`.
pub fn coefficient_sensitivities_fd(
    system: &dyn DynamicalSystem,
    space: &PceSpace,
    sampling: &Sampling,
    z0: &[f64],
    cfg: &IndicatorConfig,
) -> std::result::Result<Vec<Vec<f64>>, GuardStatus> {
    let n = z0.len();
    let m = space.n_terms();
    let mut blocks = vec![vec![0.0; n * n]; m];
    for j in 0..n {
        let plus = ensemble_coeffs(system, space, sampling, z0, Some((j, cfg.delta_z)), cfg)?;
        let minus = ensemble_coeffs(system, space, sampling, z0, Some((j, -cfg.delta_z)), cfg)?;
        for (k, block) in blocks.iter_mut().enumerate() {
            for i in 0..n {
                block[i * n + j] = (plus.get(k, i) - minus.get(k, i)) / (2.0 * cfg.delta_z);
            }
        }
    }
    Ok(blocks)
}

/// One exponent per basis term: `ln √λ_max((∂c_i/∂z0)ᵀ(∂c_i/∂z0)) / (tf − t0)`.
pub fn sftle2(
    system: &dyn DynamicalSystem,
    space: &PceSpace,
    sampling: &Sampling,
    z0: &[f64],
    cfg: &IndicatorConfig,
) -> std::result::Result<Vec<f64>, GuardStatus> {
    let blocks = coefficient_sensitivities_fd(system, space, sampling, z0, cfg)?;
    Ok(block_exponents(&blocks, z0.len(), cfg))
}

/// Same exponents from the coefficient variational equations.
pub fn sftle2_intrusive(
    system: &dyn DynamicalSystem,
    space: &PceSpace,
    sampling: &Sampling,
    z0: &[f64],
    cfg: &IndicatorConfig,
) -> std::result::Result<Vec<f64>, GuardStatus> {
    let cs0 = match sampling {
        Sampling::Parameters => space.deterministic(z0, cfg.t0),
        Sampling::InitialState { .. } => space.project_fn(|p| p.to_vec(), cfg.t0),
    };
    let v = propagate_variational_coeffs(system, space, sampling, &cs0, cfg.tf, &cfg.integrator);
    if !v.status.is_ok() {
        return Err(v.status);
    }
    Ok(block_exponents(&v.sensitivities, z0.len(), cfg))
}

/// Pseudo-diffusion exponent and its per-component versions.
///
/// A collision saturates every value at 1. Any other guard status, or an
/// invalid coefficient set, yields NaN.
pub fn pseudo_diffusion(
    space: &PceSpace,
    cs: &CoefficientSet,
    elapsed: f64,
    status: GuardStatus,
    variant: AlphaVariant,
) -> Result<(f64, Vec<f64>)> {
    if !(elapsed > MIN_ALPHA_HORIZON) {
        return Err(SdiError::invalid(format!(
            "pseudo-diffusion needs an elapsed time above {MIN_ALPHA_HORIZON}, got {elapsed}"
        )));
    }
    let n = cs.n_state();
    if status == GuardStatus::Collision {
        return Ok((1.0, vec![1.0; n]));
    }
    if !status.is_ok() || !cs.is_valid() {
        return Ok((f64::NAN, vec![f64::NAN; n]));
    }
    let m = space.moments(cs)?;
    let log_t = elapsed.ln();
    let alpha = match variant {
        AlphaVariant::MaxEigen => {
            let lam = sym_eig(&m.covariance, n)?[0].max(0.0);
            (lam.sqrt() + 1.0).ln() / log_t
        }
        AlphaVariant::Trace => (m.variance.iter().sum::<f64>() + 1.0).ln() / log_t,
    };
    let comps = m.variance.iter().map(|v| (v.max(0.0).sqrt() + 1.0).ln() / log_t).collect();
    Ok((alpha, comps))
}

/// Fraction of `n_mc` uniform draws over Ω whose state lies within `ε` of
/// the mean `c_0` (Euclidean norm over all components).
pub fn expectation_within(space: &PceSpace, cs: &CoefficientSet, epsilon: f64, n_mc: usize, seed: u64) -> Result<f64> {
    if !cs.is_valid() {
        return Err(SdiError::InvalidCoefficients);
    }
    if n_mc == 0 {
        return Err(SdiError::invalid("n_mc must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = space.domain().n_dims();
    let mean = cs.mean();
    let mut xi = vec![0.0; d];
    let mut hits = 0usize;
    for _ in 0..n_mc {
        xi.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..=1.0));
        let z = space.evaluate_xi(cs, &xi);
        let dist = z.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if dist < epsilon {
            hits += 1;
        }
    }
    Ok(hits as f64 / n_mc as f64)
}

/// Computes the selected indicators for one initial condition.
///
/// `seed` drives the Monte Carlo draws of the expectation metric. The FTLE is
/// taken with the nominal parameters.
pub fn compute(
    system: &dyn DynamicalSystem,
    space: &PceSpace,
    sampling: &Sampling,
    z0: &[f64],
    selection: Selection,
    cfg: &IndicatorConfig,
    seed: u64,
) -> IndicatorResult {
    let n = system.state_dim();
    let mut out = IndicatorResult::empty(n, if selection.sftle2 { space.n_terms() } else { 0 }, GuardStatus::Ok);
    let mut status = GuardStatus::Ok;

    if selection.ftle {
        let p = sampling.nominal_params(space.domain());
        let zc = match sampling {
            Sampling::Parameters => z0.to_vec(),
            Sampling::InitialState { .. } => space.domain().center(),
        };
        match ftle(system, &p, &zc, cfg.t0, cfg.tf, cfg.delta_z, &cfg.integrator) {
            Ok(v) => out.ftle = v,
            Err(s) => status = status.worst(s),
        }
    }
    if selection.sftle1 {
        match sftle1(system, space, sampling, z0, cfg) {
            Ok(v) => out.sftle1 = v,
            Err(s) => status = status.worst(s),
        }
    }
    if selection.sftle2 {
        match sftle2(system, space, sampling, z0, cfg) {
            Ok(v) => out.sftle2 = v,
            Err(s) => status = status.worst(s),
        }
    }
    if selection.needs_ensemble() {
        let (cs, ens_status) = match ensemble_coeffs(system, space, sampling, z0, None, cfg) {
            Ok(cs) => (cs, GuardStatus::Ok),
            Err(s) => (CoefficientSet::invalid(space.n_terms(), n, cfg.tf), s),
        };
        status = status.worst(ens_status);
        if selection.alpha {
            if let Ok((a, comps)) = pseudo_diffusion(space, &cs, cfg.horizon(), ens_status, cfg.alpha_variant) {
                out.alpha_tilde = a;
                out.alpha_tilde_components = comps;
            }
        }
        if selection.expectation && ens_status.is_ok() {
            if let Ok(e) = expectation_within(space, &cs, cfg.epsilon, cfg.n_mc, seed) {
                out.expectation = e;
            }
        }
    }
    out.status = status;
    out
}
