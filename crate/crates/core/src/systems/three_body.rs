//! Planar circular and elliptic restricted three-body problems in the
//! rotating (pulsating) frame. The larger primary sits at `x = −μ`, the
//! smaller at `x = 1 − μ`.

use super::{DynamicalSystem, GuardStatus};

/// Distance to either primary below which a trajectory counts as a collision.
pub const COLLISION_RADIUS: f64 = 1e-3;
/// Distance from the barycenter beyond which a trajectory counts as escaped.
pub const ESCAPE_RADIUS: f64 = 10.0;

/// Effective potential `J(x, y)`, including the constant `μ(1 − μ)/2`.
pub fn jacobi_potential(x: f64, y: f64, mu: f64) -> f64 {
    let r1 = ((x + mu).powi(2) + y * y).sqrt();
    let r2 = ((x - 1.0 + mu).powi(2) + y * y).sqrt();
    0.5 * (x * x + y * y) + (1.0 - mu) / r1 + mu / r2 + 0.5 * mu * (1.0 - mu)
}

/// `(∂J/∂x, ∂J/∂y)`.
pub fn potential_gradient(x: f64, y: f64, mu: f64) -> (f64, f64) {
    let dx1 = x + mu;
    let dx2 = x - 1.0 + mu;
    let r1_3 = (dx1 * dx1 + y * y).powf(1.5);
    let r2_3 = (dx2 * dx2 + y * y).powf(1.5);
    let jx = x - (1.0 - mu) * dx1 / r1_3 - mu * dx2 / r2_3;
    let jy = y - (1.0 - mu) * y / r1_3 - mu * y / r2_3;
    (jx, jy)
}

/// `(∂²J/∂x², ∂²J/∂x∂y, ∂²J/∂y²)`.
pub fn potential_hessian(x: f64, y: f64, mu: f64) -> (f64, f64, f64) {
    let dx1 = x + mu;
    let dx2 = x - 1.0 + mu;
    let r1s = dx1 * dx1 + y * y;
    let r2s = dx2 * dx2 + y * y;
    let r1_3 = r1s.powf(1.5);
    let r2_3 = r2s.powf(1.5);
    let r1_5 = r1s.powf(2.5);
    let r2_5 = r2s.powf(2.5);
    let m1 = 1.0 - mu;
    let jxx = 1.0 - m1 * (1.0 / r1_3 - 3.0 * dx1 * dx1 / r1_5) - mu * (1.0 / r2_3 - 3.0 * dx2 * dx2 / r2_5);
    let jyy = 1.0 - m1 * (1.0 / r1_3 - 3.0 * y * y / r1_5) - mu * (1.0 / r2_3 - 3.0 * y * y / r2_5);
    let jxy = 3.0 * m1 * dx1 * y / r1_5 + 3.0 * mu * dx2 * y / r2_5;
    (jxx, jxy, jyy)
}

/// `E = (v_x² + v_y²)/2 − J(x, y)`, state `(x, y, v_x, v_y)`.
pub fn cr3bp_energy(mu: f64, z: &[f64]) -> f64 {
    0.5 * (z[2] * z[2] + z[3] * z[3]) - jacobi_potential(z[0], z[1], mu)
}

/// Pseudo-energy of the elliptic problem at true anomaly `theta`.
pub fn er3bp_pseudo_energy(theta: f64, e: f64, mu: f64, z: &[f64]) -> f64 {
    0.5 * (z[2] * z[2] + z[3] * z[3]) - jacobi_potential(z[0], z[1], mu) / (1.0 + e * theta.cos())
}

/// Series approximation of the L1 abscissa.
pub fn l1_series(mu: f64) -> f64 {
    let a = mu / (1.0 - mu);
    let b = (a / 3.0).cbrt();
    let gamma = b - b * b / 3.0 - b.powi(3) / 9.0 - 23.0 / 81.0 * b.powi(4);
    1.0 - mu - gamma
}

/// L1 abscissa from the series, polished by Newton iteration on `∂J/∂x = 0`.
pub fn l1_refined(mu: f64) -> f64 {
    let mut x = l1_series(mu);
    for _ in 0..100 {
        let (jx, _) = potential_gradient(x, 0.0, mu);
        let (jxx, _, _) = potential_hessian(x, 0.0, mu);
        let step = jx / jxx;
        x -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    x
}

/// `E(L1) = E(L1x, 0, 0, 0)` with the series abscissa.
pub fn l1_energy(mu: f64) -> f64 {
    cr3bp_energy(mu, &[l1_series(mu), 0.0, 0.0, 0.0])
}

/// Negative branch `v_y = −sqrt(2(E0 + J) − v_x²)` at `y = 0`.
pub fn cr3bp_vy_from_energy(x: f64, vx: f64, e0: f64, mu: f64) -> Result<f64, GuardStatus> {
    let radicand = 2.0 * (e0 + jacobi_potential(x, 0.0, mu)) - vx * vx;
    if radicand.is_finite() && radicand >= 0.0 {
        Ok(-radicand.sqrt())
    } else {
        Err(GuardStatus::ForbiddenRegion)
    }
}

/// Same as [`cr3bp_vy_from_energy`] with the pseudo-energy at `θ0 = 0`.
pub fn er3bp_vy_from_energy(x: f64, vx: f64, e0: f64, e: f64, mu: f64) -> Result<f64, GuardStatus> {
    let radicand = 2.0 * (e0 + jacobi_potential(x, 0.0, mu) / (1.0 + e)) - vx * vx;
    if radicand.is_finite() && radicand >= 0.0 {
        Ok(-radicand.sqrt())
    } else {
        Err(GuardStatus::ForbiddenRegion)
    }
}

fn guard_primaries(mu: f64, z: &[f64]) -> GuardStatus {
    let (x, y) = (z[0], z[1]);
    if !z.iter().all(|v| v.is_finite()) {
        return GuardStatus::NonFinite;
    }
    let d1 = ((x + mu).powi(2) + y * y).sqrt();
    let d2 = ((x - 1.0 + mu).powi(2) + y * y).sqrt();
    if d1 < COLLISION_RADIUS || d2 < COLLISION_RADIUS {
        GuardStatus::Collision
    } else if (x * x + y * y).sqrt() > ESCAPE_RADIUS {
        GuardStatus::Escape
    } else {
        GuardStatus::Ok
    }
}

fn accelerations(mu: f64, scale: f64, z: &[f64], dz: &mut [f64]) {
    let (jx, jy) = potential_gradient(z[0], z[1], mu);
    dz[0] = z[2];
    dz[1] = z[3];
    dz[2] = 2.0 * z[3] + jx / scale;
    dz[3] = -2.0 * z[2] + jy / scale;
}

fn variational(mu: f64, scale: f64, z: &[f64], jac: &mut [f64]) {
    let (jxx, jxy, jyy) = potential_hessian(z[0], z[1], mu);
    jac.copy_from_slice(&[
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        jxx / scale, jxy / scale, 0.0, 2.0, //
        jxy / scale, jyy / scale, -2.0, 0.0,
    ]);
}

/// Planar CR3BP, parameter `μ`, state `(x, y, v_x, v_y)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Cr3bp;

impl DynamicalSystem for Cr3bp {
    fn name(&self) -> &str {
        "cr3bp"
    }

    fn state_dim(&self) -> usize {
        4
    }

    fn param_dim(&self) -> usize {
        1
    }

    fn component_names(&self) -> Vec<String> {
        vec!["x".into(), "y".into(), "vx".into(), "vy".into()]
    }

    fn rhs(&self, _t: f64, p: &[f64], z: &[f64], dz: &mut [f64]) {
        accelerations(p[0], 1.0, z, dz);
    }

    fn jacobian(&self, _t: f64, p: &[f64], z: &[f64], jac: &mut [f64]) {
        variational(p[0], 1.0, z, jac);
    }

    fn guard(&self, p: &[f64], z: &[f64]) -> GuardStatus {
        guard_primaries(p[0], z)
    }

    fn energy(&self, _t: f64, p: &[f64], z: &[f64]) -> Option<f64> {
        Some(cr3bp_energy(p[0], z))
    }

    fn default_tolerances(&self) -> (f64, f64) {
        (1e-10, 1e-8)
    }
}

/// Planar ER3BP with true anomaly as independent variable, parameters `(e, μ)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Er3bp;

impl DynamicalSystem for Er3bp {
    fn name(&self) -> &str {
        "er3bp"
    }

    fn state_dim(&self) -> usize {
        4
    }

    fn param_dim(&self) -> usize {
        2
    }

    fn component_names(&self) -> Vec<String> {
        vec!["x".into(), "y".into(), "vx".into(), "vy".into()]
    }

    fn rhs(&self, theta: f64, p: &[f64], z: &[f64], dz: &mut [f64]) {
        accelerations(p[1], 1.0 + p[0] * theta.cos(), z, dz);
    }

    fn jacobian(&self, theta: f64, p: &[f64], z: &[f64], jac: &mut [f64]) {
        variational(p[1], 1.0 + p[0] * theta.cos(), z, jac);
    }

    fn guard(&self, p: &[f64], z: &[f64]) -> GuardStatus {
        guard_primaries(p[1], z)
    }

    fn default_tolerances(&self) -> (f64, f64) {
        (1e-10, 1e-8)
    }
}
