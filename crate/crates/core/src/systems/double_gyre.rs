use std::f64::consts::PI;

use super::DynamicalSystem;

/// Time-periodic double gyre with uncertain perturbation amplitude `η`.
///
/// `f(x, t) = a(t) x² + b(t) x`, `a = η sin ωt`, `b = 1 − 2η sin ωt`, and
/// velocity `πA (−sin(πf) cos(πy), cos(πf) sin(πy) ∂f/∂x)`.
#[derive(Debug, Clone, Copy)]
pub struct DoubleGyre {
    pub amplitude: f64,
    pub omega: f64,
}

impl Default for DoubleGyre {
    fn default() -> Self {
        Self { amplitude: 0.1, omega: 2.0 * PI / 10.0 }
    }
}

impl DoubleGyre {
    fn forcing(&self, t: f64, eta: f64, x: f64) -> (f64, f64, f64) {
        let s = eta * (self.omega * t).sin();
        let a = s;
        let b = 1.0 - 2.0 * s;
        let f = a * x * x + b * x;
        let fx = 2.0 * a * x + b;
        (a, f, fx)
    }
}

impl DynamicalSystem for DoubleGyre {
    fn name(&self) -> &str {
        "double_gyre"
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn param_dim(&self) -> usize {
        1
    }

    fn component_names(&self) -> Vec<String> {
        vec!["x".into(), "y".into()]
    }

    fn rhs(&self, t: f64, p: &[f64], z: &[f64], dz: &mut [f64]) {
        let (_, f, fx) = self.forcing(t, p[0], z[0]);
        let pa = PI * self.amplitude;
        dz[0] = -pa * (PI * f).sin() * (PI * z[1]).cos();
        dz[1] = pa * (PI * f).cos() * (PI * z[1]).sin() * fx;
    }

    fn jacobian(&self, t: f64, p: &[f64], z: &[f64], jac: &mut [f64]) {
        let (a, f, fx) = self.forcing(t, p[0], z[0]);
        let pa = PI * self.amplitude;
        let (sf, cf) = (PI * f).sin_cos();
        let (sy, cy) = (PI * z[1]).sin_cos();
        jac[0] = -pa * PI * cf * fx * cy;
        jac[1] = pa * PI * sf * sy;
        jac[2] = pa * sy * (-PI * sf * fx * fx + 2.0 * a * cf);
        jac[3] = pa * PI * cf * fx * cy;
    }
}
