//! Benchmark dynamical systems behind a uniform interface.

mod double_gyre;
mod generic;
mod pendulum;
mod three_body;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use double_gyre::DoubleGyre;
pub use generic::{FnSystem, LinearSystem};
pub use pendulum::Pendulum;
pub use three_body::{
    cr3bp_energy, cr3bp_vy_from_energy, er3bp_pseudo_energy, er3bp_vy_from_energy, jacobi_potential,
    l1_energy, l1_refined, l1_series, potential_gradient, potential_hessian, Cr3bp, Er3bp, COLLISION_RADIUS,
    ESCAPE_RADIUS,
};

/// Outcome of a domain check on a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardStatus {
    Ok,
    Collision,
    Escape,
    ForbiddenRegion,
    /// The integrator exhausted its step budget or the step size underflowed.
    StepLimit,
    NonFinite,
}

impl GuardStatus {
    pub fn is_ok(self) -> bool {
        self == GuardStatus::Ok
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GuardStatus::Ok => "ok",
            GuardStatus::Collision => "collision",
            GuardStatus::Escape => "escape",
            GuardStatus::ForbiddenRegion => "forbidden_region",
            GuardStatus::StepLimit => "step_limit",
            GuardStatus::NonFinite => "non_finite",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "ok" => GuardStatus::Ok,
            "collision" => GuardStatus::Collision,
            "escape" => GuardStatus::Escape,
            "forbidden_region" => GuardStatus::ForbiddenRegion,
            "step_limit" => GuardStatus::StepLimit,
            "non_finite" => GuardStatus::NonFinite,
            _ => return None,
        })
    }

    fn severity(self) -> u8 {
        match self {
            GuardStatus::Ok => 0,
            GuardStatus::NonFinite => 1,
            GuardStatus::StepLimit => 2,
            GuardStatus::ForbiddenRegion => 3,
            GuardStatus::Escape => 4,
            GuardStatus::Collision => 5,
        }
    }

    /// Combines the statuses of an ensemble; a collision anywhere dominates.
    pub fn worst(self, other: GuardStatus) -> GuardStatus {
        if other.severity() > self.severity() {
            other
        } else {
            self
        }
    }
}

impl fmt::Display for GuardStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A system `ż = g(t, p, z)` with its state Jacobian.
pub trait DynamicalSystem: Send + Sync {
    fn name(&self) -> &str;

    fn state_dim(&self) -> usize;

    fn param_dim(&self) -> usize;

    fn component_names(&self) -> Vec<String> {
        (0..self.state_dim()).map(|i| format!("z{i}")).collect()
    }

    fn rhs(&self, t: f64, p: &[f64], z: &[f64], dz: &mut [f64]);

    /// `∂g/∂z`, row-major `n × n`.
    fn jacobian(&self, t: f64, p: &[f64], z: &[f64], jac: &mut [f64]);

    fn guard(&self, _p: &[f64], _z: &[f64]) -> GuardStatus {
        GuardStatus::Ok
    }

    fn energy(&self, _t: f64, _p: &[f64], _z: &[f64]) -> Option<f64> {
        None
    }

    /// Default `(abs_tol, rel_tol)` for this system.
    fn default_tolerances(&self) -> (f64, f64) {
        (1e-10, 1e-9)
    }
}

pub const SYSTEM_NAMES: [&str; 4] = ["pendulum", "double_gyre", "cr3bp", "er3bp"];

/// Looks up a benchmark system by its registry name.
pub fn system_by_name(name: &str) -> Option<Box<dyn DynamicalSystem>> {
    match name {
        "pendulum" => Some(Box::new(Pendulum)),
        "double_gyre" => Some(Box::new(DoubleGyre::default())),
        "cr3bp" => Some(Box::new(Cr3bp)),
        "er3bp" => Some(Box::new(Er3bp)),
        _ => None,
    }
}

/// Central-difference Jacobian, used to cross-check analytic Jacobians.
pub fn finite_difference_jacobian(sys: &dyn DynamicalSystem, t: f64, p: &[f64], z: &[f64], h: f64) -> Vec<f64> {
    let n = sys.state_dim();
    let mut jac = vec![0.0; n * n];
    let mut zp = z.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for j in 0..n {
        zp[j] = z[j] + h;
        sys.rhs(t, p, &zp, &mut fp);
        zp[j] = z[j] - h;
        sys.rhs(t, p, &zp, &mut fm);
        zp[j] = z[j];
        for i in 0..n {
            jac[i * n + j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check_jacobian(sys: &dyn DynamicalSystem, sample: impl Fn(&mut ChaCha8Rng) -> (f64, Vec<f64>, Vec<f64>)) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = sys.state_dim();
        let mut jac = vec![0.0; n * n];
        for _ in 0..100 {
            let (t, p, z) = sample(&mut rng);
            sys.jacobian(t, &p, &z, &mut jac);
            let fd = finite_difference_jacobian(sys, t, &p, &z, 1e-6);
            let scale = jac.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (a, b) in jac.iter().zip(&fd) {
                assert!((a - b).abs() <= 1e-5 * scale, "{}: {a} vs {b}", sys.name());
            }
        }
    }

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        check_jacobian(&Pendulum, |r| {
            (r.gen_range(0.0..10.0), vec![r.gen_range(2.25..2.75)], vec![r.gen_range(-3.0..3.0), r.gen_range(-3.0..3.0)])
        });
        check_jacobian(&DoubleGyre::default(), |r| {
            (r.gen_range(0.0..20.0), vec![r.gen_range(0.09..0.11)], vec![r.gen_range(0.0..2.0), r.gen_range(0.0..1.0)])
        });
        let away = |r: &mut ChaCha8Rng| loop {
            let z: Vec<f64> = vec![r.gen_range(-1.5..1.5), r.gen_range(-1.5..1.5), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
            let mu = 0.1f64;
            let d1 = ((z[0] + mu).powi(2) + z[1] * z[1]).sqrt();
            let d2 = ((z[0] - 1.0 + mu).powi(2) + z[1] * z[1]).sqrt();
            if d1 > 0.1 && d2 > 0.1 {
                return z;
            }
        };
        check_jacobian(&Cr3bp, |r| (0.0, vec![0.1], away(r)));
        check_jacobian(&Er3bp, |r| {
            (r.gen_range(0.0..6.0), vec![r.gen_range(0.039..0.041), 0.1], away(r))
        });
    }

    #[test]
    fn registry_covers_all_names() {
        for name in SYSTEM_NAMES {
            assert_eq!(system_by_name(name).unwrap().name(), name);
        }
        assert!(system_by_name("lorenz").is_none());
    }

    #[test]
    fn worst_status_prefers_collision() {
        assert_eq!(GuardStatus::Ok.worst(GuardStatus::Escape), GuardStatus::Escape);
        assert_eq!(GuardStatus::Collision.worst(GuardStatus::Escape), GuardStatus::Collision);
        for s in ["ok", "collision", "escape", "forbidden_region", "step_limit", "non_finite"] {
            assert_eq!(GuardStatus::parse(s).unwrap().as_str(), s);
        }
    }
}
