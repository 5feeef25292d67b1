use super::DynamicalSystem;

/// Periodically forced pendulum `ẍ = (a cos 5t − 1) sin x`, parameter `a`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Pendulum;

impl DynamicalSystem for Pendulum {
    fn name(&self) -> &str {
        "pendulum"
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn param_dim(&self) -> usize {
        1
    }

    fn component_names(&self) -> Vec<String> {
        vec!["x".into(), "vx".into()]
    }

    fn rhs(&self, t: f64, p: &[f64], z: &[f64], dz: &mut [f64]) {
        dz[0] = z[1];
        dz[1] = (p[0] * (5.0 * t).cos() - 1.0) * z[0].sin();
    }

    fn jacobian(&self, t: f64, p: &[f64], z: &[f64], jac: &mut [f64]) {
        jac[0] = 0.0;
        jac[1] = 1.0;
        jac[2] = z[0].cos() * (p[0] * (5.0 * t).cos() - 1.0);
        jac[3] = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn hand_evaluated_rhs() {
        let mut dz = [0.0; 2];
        Pendulum.rhs(0.0, &[2.5], &[FRAC_PI_2, 0.0], &mut dz);
        assert_eq!(dz[0], 0.0);
        assert!((dz[1] - 1.5).abs() < 1e-15);
        for t in [0.0, 0.3, 1.7] {
            Pendulum.rhs(t, &[2.4], &[0.0, 0.7], &mut dz);
            assert_eq!(dz[1], 0.0);
        }
    }

    #[test]
    fn odd_symmetry_is_exact() {
        let mut a = [0.0; 2];
        let mut b = [0.0; 2];
        for &(t, x, v) in &[(0.1, 0.4, -1.2), (3.3, 2.9, 0.01), (7.0, -1.1, 2.2)] {
            Pendulum.rhs(t, &[2.6], &[x, v], &mut a);
            Pendulum.rhs(t, &[2.6], &[-x, -v], &mut b);
            assert_eq!(a[0], -b[0]);
            assert_eq!(a[1], -b[1]);
        }
    }
}
