//! Polynomial chaos coefficient sets: projection, evaluation, moments and the
//! intrusive Galerkin right-hand side.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::basis::{PolynomialBasis, QuadratureRule, UncertaintyBox};
use crate::error::{Result, SdiError};
use crate::systems::{DynamicalSystem, GuardStatus};

/// What the uncertain vector `p` stands for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// `p` are the model parameters; the initial state is deterministic.
    Parameters,
    /// `p` is the initial state itself; model parameters are fixed.
    InitialState { params: Vec<f64> },
}

impl Sampling {
    pub fn params_at<'a>(&'a self, space: &'a PceSpace, node: usize) -> &'a [f64] {
        match self {
            Sampling::Parameters => space.node_point(node),
            Sampling::InitialState { params } => params,
        }
    }

    pub fn initial_state_at<'a>(&'a self, space: &'a PceSpace, z0: &'a [f64], node: usize) -> &'a [f64] {
        match self {
            Sampling::Parameters => z0,
            Sampling::InitialState { .. } => space.node_point(node),
        }
    }

    /// Parameters at the center of the box (the nominal model).
    pub fn nominal_params(&self, domain: &UncertaintyBox) -> Vec<f64> {
        match self {
            Sampling::Parameters => domain.center(),
            Sampling::InitialState { params } => params.clone(),
        }
    }
}

/// PCE coefficients `c_k(t)`, one row of `n` state components per basis term.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    n_terms: usize,
    n_state: usize,
    coeffs: Vec<f64>,
    pub t: f64,
    valid: bool,
}

impl CoefficientSet {
    pub fn zeros(n_terms: usize, n_state: usize, t: f64) -> Self {
        Self { n_terms, n_state, coeffs: vec![0.0; n_terms * n_state], t, valid: true }
    }

    pub fn from_raw(n_terms: usize, n_state: usize, coeffs: Vec<f64>, t: f64) -> Self {
        assert_eq!(coeffs.len(), n_terms * n_state);
        let valid = coeffs.iter().all(|c| c.is_finite());
        Self { n_terms, n_state, coeffs, t, valid }
    }

    pub fn invalid(n_terms: usize, n_state: usize, t: f64) -> Self {
        Self { n_terms, n_state, coeffs: vec![f64::NAN; n_terms * n_state], t, valid: false }
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn n_state(&self) -> usize {
        self.n_state
    }

    pub fn is_valid(&self) -> bool {
        self.valid
    }

    pub fn raw(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn raw_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// Row `k`: the state-vector coefficient of `Ψ_k`.
    pub fn term(&self, k: usize) -> &[f64] {
        &self.coeffs[k * self.n_state..(k + 1) * self.n_state]
    }

    pub fn term_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.coeffs[k * self.n_state..(k + 1) * self.n_state]
    }

    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.coeffs[k * self.n_state + j]
    }

    pub fn mean(&self) -> &[f64] {
        self.term(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub central3: Vec<f64>,
    pub skewness: Vec<f64>,
    /// Row-major `n × n`.
    pub covariance: Vec<f64>,
}

/// Below this variance the standardized skewness is reported as zero.
pub const DEGENERATE_VARIANCE: f64 = 1e-30;

/// A basis, a quadrature rule and the box they are mapped onto, with the
/// basis values at every node cached.
#[derive(Debug, Clone)]
pub struct PceSpace {
    basis: Arc<PolynomialBasis>,
    rule: Arc<QuadratureRule>,
    domain: UncertaintyBox,
    psi: Vec<f64>,
    points: Vec<Vec<f64>>,
}

impl PceSpace {
    pub fn new(basis: Arc<PolynomialBasis>, rule: Arc<QuadratureRule>, domain: UncertaintyBox) -> Result<Self> {
        if basis.n_params() != domain.n_dims() || rule.n_dims() != domain.n_dims() {
            return Err(SdiError::invalid(format!(
                "dimension mismatch: basis {}, rule {}, box {}",
                basis.n_params(),
                rule.n_dims(),
                domain.n_dims()
            )));
        }
        let m = basis.len();
        let mut psi = Vec::with_capacity(rule.len() * m);
        for node in rule.nodes() {
            psi.extend(basis.eval_all(node));
        }
        let points = rule.nodes().iter().map(|xi| domain.map_to_box(xi)).collect();
        Ok(Self { basis, rule, domain, psi, points })
    }

    pub fn build(degree: usize, n_per_dim: usize, domain: UncertaintyBox) -> Result<Self> {
        let n = domain.n_dims();
        Self::new(
            Arc::new(PolynomialBasis::new(degree, n)?),
            Arc::new(QuadratureRule::gauss(n_per_dim, n)?),
            domain,
        )
    }

    /// Same basis and rule on a different box.
    pub fn with_domain(&self, domain: UncertaintyBox) -> Result<Self> {
        if domain.n_dims() != self.domain.n_dims() {
            return Err(SdiError::invalid("box dimension differs from the basis"));
        }
        let points = self.rule.nodes().iter().map(|xi| domain.map_to_box(xi)).collect();
        Ok(Self { basis: self.basis.clone(), rule: self.rule.clone(), domain, psi: self.psi.clone(), points })
    }

    pub fn basis(&self) -> &PolynomialBasis {
        &self.basis
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn domain(&self) -> &UncertaintyBox {
        &self.domain
    }

    pub fn n_terms(&self) -> usize {
        self.basis.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.rule.len()
    }

    /// `Ψ_k(ξ_j)` for all `k`.
    pub fn psi_at_node(&self, j: usize) -> &[f64] {
        let m = self.n_terms();
        &self.psi[j * m..(j + 1) * m]
    }

    /// Node `j` mapped into Ω.
    pub fn node_point(&self, j: usize) -> &[f64] {
        &self.points[j]
    }

    /// Coefficients of a deterministic state: `c_0 = z0`, all others zero.
    pub fn deterministic(&self, z0: &[f64], t: f64) -> CoefficientSet {
        let mut cs = CoefficientSet::zeros(self.n_terms(), z0.len(), t);
        cs.term_mut(0).copy_from_slice(z0);
        cs
    }

    /// `ĉ_k = Σ_j w_j z_j Ψ_k(ξ_j) / s_k` from states listed in node order.
    pub fn project_samples(&self, states: &[Vec<f64>], t: f64) -> CoefficientSet {
        assert_eq!(states.len(), self.n_nodes(), "one state per quadrature node");
        let n = states.first().map_or(0, Vec::len);
        let m = self.n_terms();
        if states.iter().any(|z| z.len() != n || z.iter().any(|v| !v.is_finite())) {
            return CoefficientSet::invalid(m, n, t);
        }
        let nodal: Vec<f64> = states.concat();
        let mut coeffs = vec![0.0; m * n];
        self.project_nodal(&nodal, n, &mut coeffs);
        CoefficientSet::from_raw(m, n, coeffs, t)
    }

    /// Quadrature projection of node values (`n_nodes × width`, node-major)
    /// into `out` (`M × width`). Higher rows are accumulated from differences
    /// to the first node, so identical node values project to exact zeros.
    pub fn project_nodal(&self, nodal: &[f64], width: usize, out: &mut [f64]) {
        let m = self.n_terms();
        debug_assert_eq!(nodal.len(), self.n_nodes() * width);
        debug_assert_eq!(out.len(), m * width);
        let reference = &nodal[..width];
        out.fill(0.0);
        for j in 0..self.n_nodes() {
            let w = self.rule.weights()[j];
            let psi = self.psi_at_node(j);
            let v = &nodal[j * width..(j + 1) * width];
            for k in 0..m {
                let f = w * psi[k];
                for ((o, &vi), &ri) in out[k * width..(k + 1) * width].iter_mut().zip(v).zip(reference) {
                    *o += f * (vi - ri);
                }
            }
        }
        for (o, &ri) in out[..width].iter_mut().zip(reference) {
            *o += ri;
        }
        for k in 1..m {
            let sk = self.basis.norm(k);
            out[k * width..(k + 1) * width].iter_mut().for_each(|o| *o /= sk);
        }
    }

    /// Projects a state-valued function of `p ∈ Ω`.
    pub fn project_fn(&self, f: impl Fn(&[f64]) -> Vec<f64>, t: f64) -> CoefficientSet {
        let states: Vec<Vec<f64>> = self.points.iter().map(|p| f(p)).collect();
        self.project_samples(&states, t)
    }

    /// `Σ_i c_i Ψ_i(ξ)` at a normalized point.
    pub fn evaluate_xi(&self, cs: &CoefficientSet, xi: &[f64]) -> Vec<f64> {
        let psi = self.basis.eval_all(xi);
        let mut z = vec![0.0; cs.n_state()];
        for (k, &pk) in psi.iter().enumerate() {
            for (zi, &c) in z.iter_mut().zip(cs.term(k)) {
                *zi += c * pk;
            }
        }
        z
    }

    /// Evaluates the expansion at `p ∈ Ω`.
    pub fn evaluate(&self, cs: &CoefficientSet, p: &[f64]) -> Result<Vec<f64>> {
        let xi = self.domain.map_from_box(p)?;
        Ok(self.evaluate_xi(cs, &xi))
    }

    fn evaluate_node_into(&self, coeffs: &[f64], n: usize, j: usize, out: &mut [f64]) {
        out.fill(0.0);
        for (k, &pk) in self.psi_at_node(j).iter().enumerate() {
            for (zi, &c) in out.iter_mut().zip(&coeffs[k * n..(k + 1) * n]) {
                *zi += c * pk;
            }
        }
    }

    pub fn moments(&self, cs: &CoefficientSet) -> Result<MomentSummary> {
        if !cs.is_valid() {
            return Err(SdiError::InvalidCoefficients);
        }
        let n = cs.n_state();
        let m = cs.n_terms();
        let mut covariance = vec![0.0; n * n];
        for k in 1..m {
            let s = self.basis.norm(k);
            let row = cs.term(k);
            for a in 0..n {
                for b in 0..n {
                    covariance[a * n + b] += s * row[a] * row[b];
                }
            }
        }
        let variance: Vec<f64> = (0..n).map(|j| covariance[j * n + j]).collect();

        let triples = self.basis.triple_norms();
        let central3: Vec<f64> = (0..n)
            .map(|j| {
                let mut acc = 0.0;
                for a in 1..m {
                    let ca = cs.get(a, j);
                    if ca == 0.0 {
                        continue;
                    }
                    for b in 1..m {
                        let cab = ca * cs.get(b, j);
                        if cab == 0.0 {
                            continue;
                        }
                        for c in 1..m {
                            acc += cab * cs.get(c, j) * triples.get(a, b, c);
                        }
                    }
                }
                acc
            })
            .collect();
        let skewness = central3
            .iter()
            .zip(&variance)
            .map(|(&m3, &v)| if v < DEGENERATE_VARIANCE { 0.0 } else { m3 / v.powf(1.5) })
            .collect();

        Ok(MomentSummary { mean: cs.mean().to_vec(), variance, central3, skewness, covariance })
    }

    /// `ċ_k = Σ_j w_j g(t, p_j, z(ξ_j)) Ψ_k(ξ_j) / s_k` on flat coefficients.
    /// A node state outside the system's domain aborts with its status.
    pub fn galerkin_rhs_into(
        &self,
        t: f64,
        coeffs: &[f64],
        system: &dyn DynamicalSystem,
        sampling: &Sampling,
        out: &mut [f64],
    ) -> std::result::Result<(), GuardStatus> {
        let n = system.state_dim();
        let mut z = vec![0.0; n];
        let mut g = vec![0.0; self.n_nodes() * n];
        for j in 0..self.n_nodes() {
            self.evaluate_node_into(coeffs, n, j, &mut z);
            let p = sampling.params_at(self, j);
            let status = system.guard(p, &z);
            if !status.is_ok() {
                return Err(status);
            }
            system.rhs(t, p, &z, &mut g[j * n..(j + 1) * n]);
        }
        self.project_nodal(&g, n, out);
        if out.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(GuardStatus::NonFinite)
        }
    }

    /// Time derivative of `cs`; flagged invalid when a node hits a guard.
    pub fn galerkin_rhs(
        &self,
        t: f64,
        cs: &CoefficientSet,
        system: &dyn DynamicalSystem,
        sampling: &Sampling,
    ) -> CoefficientSet {
        let (m, n) = (cs.n_terms(), cs.n_state());
        if !cs.is_valid() {
            return CoefficientSet::invalid(m, n, t);
        }
        let mut out = vec![0.0; m * n];
        match self.galerkin_rhs_into(t, cs.raw(), system, sampling, &mut out) {
            Ok(()) => CoefficientSet::from_raw(m, n, out, t),
            Err(_) => CoefficientSet::invalid(m, n, t),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{FnSystem, LinearSystem};

    fn unit_space(degree: usize) -> PceSpace {
        PceSpace::build(degree, 9, UncertaintyBox::from_bounds(&[(-1.0, 1.0)]).unwrap()).unwrap()
    }

    fn nodal(space: &PceSpace, f: impl Fn(f64) -> Vec<f64>) -> Vec<Vec<f64>> {
        (0..space.n_nodes()).map(|j| f(space.node_point(j)[0])).collect()
    }

    #[test]
    fn project_linear_samples() {
        let s = unit_space(4);
        let cs = s.project_samples(&nodal(&s, |x| vec![2.0 * x]), 0.0);
        assert!((cs.get(1, 0) - 2.0).abs() < 1e-12);
        for k in [0, 2, 3, 4] {
            assert!(cs.get(k, 0).abs() < 1e-12);
        }
    }

    #[test]
    fn project_constant_and_square() {
        let s = unit_space(4);
        let cs = s.project_samples(&nodal(&s, |_| vec![1.0, 2.0]), 0.0);
        assert!((cs.get(0, 0) - 1.0).abs() < 1e-14 && (cs.get(0, 1) - 2.0).abs() < 1e-14);
        assert!(cs.raw()[2..].iter().all(|c| c.abs() < 1e-13));

        let sq = s.project_samples(&nodal(&s, |x| vec![x * x]), 0.0);
        assert!((sq.get(0, 0) - 0.25).abs() < 1e-14);
        assert!((sq.get(2, 0) - 1.0).abs() < 1e-12);
        assert!(sq.get(1, 0).abs() < 1e-13 && sq.get(3, 0).abs() < 1e-13 && sq.get(4, 0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_sample_invalidates() {
        let s = unit_space(2);
        let mut st = nodal(&s, |x| vec![x]);
        st[3][0] = f64::NAN;
        let cs = s.project_samples(&st, 1.0);
        assert!(!cs.is_valid());
        assert!(s.moments(&cs).is_err());
    }

    #[test]
    fn project_initial_conditions() {
        let s = unit_space(4);
        let z0 = [0.889447, -0.19598];
        let cs = s.deterministic(&z0, 0.0);
        assert_eq!(cs.term(0), &z0);
        assert!(cs.raw()[2..].iter().all(|&c| c == 0.0));

        let id = s.project_fn(|p| p.to_vec(), 0.0);
        assert!((id.get(1, 0) - 1.0).abs() < 1e-13);

        let z0 = [0.4, -1.3];
        let edge = 1e-5;
        let dom = UncertaintyBox::from_bounds(&[(z0[0] - edge / 2.0, z0[0] + edge / 2.0), (z0[1] - edge / 2.0, z0[1] + edge / 2.0)])
            .unwrap();
        let s2 = PceSpace::build(1, 3, dom).unwrap();
        let cs = s2.project_fn(|p| p.to_vec(), 0.0);
        assert!((cs.get(1, 0) - 5e-6).abs() < 1e-15);
        assert!((cs.get(2, 1) - 5e-6).abs() < 1e-15);
        assert!(cs.get(1, 1).abs() < 1e-15);
    }

    #[test]
    fn evaluate_examples() {
        let s = unit_space(2);
        let mut cs = CoefficientSet::zeros(3, 2, 0.0);
        cs.term_mut(0).copy_from_slice(&[1.0, 2.0]);
        assert_eq!(s.evaluate(&cs, &[0.3]).unwrap(), vec![1.0, 2.0]);

        let cs = CoefficientSet::from_raw(3, 1, vec![1.0, 1.0, 0.0], 0.0);
        assert_eq!(s.evaluate(&cs, &[0.5]).unwrap(), vec![1.5]);
        let cs = CoefficientSet::from_raw(3, 1, vec![0.25, 0.0, 1.0], 0.0);
        assert!((s.evaluate(&cs, &[0.5]).unwrap()[0] - 0.25).abs() < 1e-15);
        assert!(s.evaluate(&cs, &[1.5]).is_err());
    }

    #[test]
    fn moments_examples() {
        let s = unit_space(2);
        let cs = CoefficientSet::from_raw(3, 1, vec![0.0, 2.0, 4.0], 0.0);
        let m = s.moments(&cs).unwrap();
        assert!((m.variance[0] - 2.0).abs() < 1e-15);

        let s4 = unit_space(4);
        let odd = CoefficientSet::from_raw(5, 1, vec![0.3, 1.0, 0.0, 0.5, 0.0], 0.0);
        let m = s4.moments(&odd).unwrap();
        assert!(m.central3[0].abs() < 1e-15 && m.skewness[0].abs() < 1e-12);

        let flat = s4.deterministic(&[1.0, 2.0], 0.0);
        let m = s4.moments(&flat).unwrap();
        assert_eq!(m.variance, vec![0.0, 0.0]);
        assert_eq!(m.covariance, vec![0.0; 4]);
        assert_eq!(m.skewness, vec![0.0, 0.0]);
    }

    #[test]
    fn central3_matches_quadrature() {
        // z(ξ) = ξ²: central third moment of ξ² − 1/4 under the semicircle.
        let s = unit_space(4);
        let cs = s.project_fn(|p| vec![p[0] * p[0]], 0.0);
        let m = s.moments(&cs).unwrap();
        let rule = QuadratureRule::gauss(12, 1).unwrap();
        let oracle = rule.integrate(|x| (x[0] * x[0] - 0.25).powi(3));
        assert!((m.central3[0] - oracle).abs() < 1e-14);
        let var = rule.integrate(|x| (x[0] * x[0] - 0.25).powi(2));
        assert!((m.skewness[0] - oracle / var.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn galerkin_rhs_examples() {
        let s = unit_space(4);
        let drift = FnSystem::parameter_drift(1);
        let cs0 = s.deterministic(&[0.0], 0.0);
        let d = s.galerkin_rhs(0.0, &cs0, &drift, &Sampling::Parameters);
        assert!(d.get(0, 0).abs() < 1e-14);
        assert!((d.get(1, 0) - 1.0).abs() < 1e-13);

        let still = LinearSystem::new(2, vec![0.0; 4], 1);
        let cs = CoefficientSet::from_raw(5, 2, (0..10).map(|i| i as f64 * 0.1).collect(), 0.0);
        let d = s.galerkin_rhs(0.0, &cs, &still, &Sampling::Parameters);
        assert!(d.raw().iter().all(|&v| v == 0.0));

        let grow = LinearSystem::new(2, vec![1.0, 0.0, 0.0, 1.0], 1);
        let d = s.galerkin_rhs(0.0, &cs, &grow, &Sampling::Parameters);
        for (a, b) in d.raw().iter().zip(cs.raw()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn galerkin_guard_invalidates() {
        let s = unit_space(2);
        let sys = FnSystem::parameter_drift(1).with_guard(|_, z| {
            if z[0] > 0.5 {
                GuardStatus::Collision
            } else {
                GuardStatus::Ok
            }
        });
        let cs = s.deterministic(&[1.0], 0.0);
        assert!(!s.galerkin_rhs(0.0, &cs, &sys, &Sampling::Parameters).is_valid());
    }

    #[test]
    fn covariance_is_symmetric_psd() {
        let s = PceSpace::build(3, 4, UncertaintyBox::from_bounds(&[(0.0, 1.0), (2.0, 3.0)]).unwrap()).unwrap();
        let cs = CoefficientSet::from_raw(10, 3, (0..30).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect(), 0.0);
        let m = s.moments(&cs).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(m.covariance[a * 3 + b], m.covariance[b * 3 + a]);
            }
        }
        let eig = crate::indicators::sym_eig(&m.covariance, 3).unwrap();
        assert!(eig[2] >= -1e-10 * eig[0]);
    }
}
