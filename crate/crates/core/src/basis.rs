//! Orthogonal polynomial bases over the normalized uncertainty box.
//!
//! The measure is the Wigner semicircle (Chebyshev polynomials of the second
//! kind), scaled to integrate to one on `[-1, 1]`. Polynomials are monic and
//! generated by the three-term recurrence
//!
//! ```text
//! Ψ_{k+1}(ξ) = (ξ - A_k) Ψ_k(ξ) - B_k Ψ_{k-1}(ξ)
//! ```
//!
//! with `A_k = 0` and `B_k = 1/4` for `k ≥ 1`. Multivariate terms are tensor
//! products of univariate ones, truncated at total degree `m`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SdiError};

/// Slack (in normalized coordinates) tolerated by [`UncertaintyBox::map_from_box`].
pub const BOX_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(SdiError::invalid(format!("interval bounds must be finite, got [{lo}, {hi}]")));
        }
        if lo >= hi {
            return Err(SdiError::invalid(format!("interval requires lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    /// Interval `[center - half_width, center + half_width]`.
    pub fn centered(center: f64, half_width: f64) -> Result<Self> {
        Self::new(center - half_width, center + half_width)
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.hi + self.lo)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// The orthotope Ω of uncertain quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyBox {
    dims: Vec<Interval>,
}

impl UncertaintyBox {
    pub fn new(dims: Vec<Interval>) -> Result<Self> {
        if dims.is_empty() {
            return Err(SdiError::invalid("uncertainty box needs at least one dimension"));
        }
        for d in &dims {
            Interval::new(d.lo, d.hi)?;
        }
        Ok(Self { dims })
    }

    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self> {
        let dims = bounds
            .iter()
            .map(|&(lo, hi)| Interval::new(lo, hi))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dims)
    }

    pub fn dims(&self) -> &[Interval] {
        &self.dims
    }

    pub fn n_dims(&self) -> usize {
        self.dims.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::mid).collect()
    }

    /// Affine map from `[-1, 1]^n_p` into Ω.
    pub fn map_to_box(&self, xi: &[f64]) -> Vec<f64> {
        debug_assert_eq!(xi.len(), self.dims.len());
        self.dims
            .iter()
            .zip(xi)
            .map(|(d, &x)| (d.hi - d.lo) / 2.0 * x + (d.hi + d.lo) / 2.0)
            .collect()
    }

    /// Inverse of [`map_to_box`](Self::map_to_box). Points outside Ω by more
    /// than [`BOX_SLACK`] (in normalized units) are rejected.
    pub fn map_from_box(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.dims.len() {
            return Err(SdiError::invalid(format!(
                "point has {} components, box has {}",
                p.len(),
                self.dims.len()
            )));
        }
        self.dims
            .iter()
            .zip(p)
            .enumerate()
            .map(|(i, (d, &v))| {
                let xi = (2.0 * v - (d.hi + d.lo)) / (d.hi - d.lo);
                if !xi.is_finite() || xi.abs() > 1.0 + BOX_SLACK {
                    Err(SdiError::OutOfDomain { dim: i, value: v, lo: d.lo, hi: d.hi })
                } else {
                    Ok(xi.clamp(-1.0, 1.0))
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn total_degree(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn n_dims(&self) -> usize {
        self.0.len()
    }
}

/// All multi-indices of `n_dims` components with total degree `≤ degree`, in
/// graded lexicographic order: ascending total degree, and within a degree,
/// descending exponent of the first dimension, then the second, and so on.
pub fn graded_multi_indices(n_dims: usize, degree: usize) -> Vec<MultiIndex> {
    fn fill(prefix: &mut Vec<usize>, remaining_dims: usize, remaining_deg: usize, out: &mut Vec<MultiIndex>) {
        if remaining_dims == 1 {
            prefix.push(remaining_deg);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for e in (0..=remaining_deg).rev() {
            prefix.push(e);
            fill(prefix, remaining_dims - 1, remaining_deg - e, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for d in 0..=degree {
        fill(&mut Vec::with_capacity(n_dims), n_dims, d, &mut out);
    }
    out
}

/// Binomial coefficient `C(n, k)` as an integer.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

fn semicircle_b(k: usize) -> f64 {
    if k == 0 {
        1.0
    } else {
        0.25
    }
}

/// Monic orthogonal basis of total degree `≤ m` in `n_p` variables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolynomialBasis {
    degree: usize,
    n_params: usize,
    /// Recurrence coefficients `A_0..A_{m-1}` (index `k` multiplies `Ψ_k`).
    recurrence_a: Vec<f64>,
    /// Recurrence coefficients `B_0..B_{m-1}`; `B_0` is the total mass (1).
    recurrence_b: Vec<f64>,
    /// `⟨Ψ_k, Ψ_k⟩` of the univariate polynomials, `k = 0..=m`.
    univariate_norms: Vec<f64>,
    norms: Vec<f64>,
    index_map: Vec<MultiIndex>,
    #[serde(skip)]
    triples: OnceLock<TripleNorms>,
}

impl PolynomialBasis {
    pub fn new(degree: usize, n_params: usize) -> Result<Self> {
        if n_params == 0 {
            return Err(SdiError::invalid("basis needs n_p >= 1"));
        }
        let len = degree.max(1);
        let recurrence_a = vec![0.0; len];
        let recurrence_b: Vec<f64> = (0..len).map(semicircle_b).collect();

        // s_k = B_1 B_2 ... B_k
        let mut univariate_norms = Vec::with_capacity(degree + 1);
        univariate_norms.push(1.0);
        for k in 1..=degree {
            univariate_norms.push(univariate_norms[k - 1] * semicircle_b(k));
        }

        let index_map = graded_multi_indices(n_params, degree);
        let norms = index_map
            .iter()
            .map(|mi| mi.0.iter().map(|&e| univariate_norms[e]).product())
            .collect();

        Ok(Self {
            degree,
            n_params,
            recurrence_a,
            recurrence_b,
            univariate_norms,
            norms,
            index_map,
            triples: OnceLock::new(),
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    /// Number of terms `M = C(n_p + m, n_p)`.
    pub fn len(&self) -> usize {
        self.index_map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_map.is_empty()
    }

    pub fn recurrence_a(&self) -> &[f64] {
        &self.recurrence_a
    }

    pub fn recurrence_b(&self) -> &[f64] {
        &self.recurrence_b
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn norm(&self, k: usize) -> f64 {
        self.norms[k]
    }

    pub fn univariate_norms(&self) -> &[f64] {
        &self.univariate_norms
    }

    pub fn index_map(&self) -> &[MultiIndex] {
        &self.index_map
    }

    pub fn position(&self, idx: &MultiIndex) -> Option<usize> {
        self.index_map.iter().position(|m| m == idx)
    }

    /// Scales one stored norm. Only meant for fault-injection checks.
    #[doc(hidden)]
    pub fn perturb_norm(&mut self, k: usize, factor: f64) {
        self.norms[k] *= factor;
        self.triples = OnceLock::new();
    }

    /// Values of the univariate `Ψ_0..=Ψ_{max_deg}` at `x`.
    pub fn univariate_values(&self, max_deg: usize, x: f64, out: &mut Vec<f64>) {
        out.clear();
        out.push(1.0);
        if max_deg == 0 {
            return;
        }
        out.push(x);
        for k in 1..max_deg {
            let next = x * out[k] - semicircle_b(k) * out[k - 1];
            out.push(next);
        }
    }

    /// Univariate monic `Ψ_k(x)` via the recurrence.
    pub fn eval_univariate(&self, k: usize, x: f64) -> f64 {
        let mut v = Vec::with_capacity(k + 1);
        self.univariate_values(k, x, &mut v);
        v[k]
    }

    /// `Ψ_idx(ξ)` as a product of univariate factors.
    pub fn eval_term(&self, idx: &MultiIndex, xi: &[f64]) -> f64 {
        idx.0.iter().zip(xi).map(|(&e, &x)| self.eval_univariate(e, x)).product()
    }

    /// Every basis term at `ξ`, in index-map order.
    pub fn eval_all(&self, xi: &[f64]) -> Vec<f64> {
        debug_assert_eq!(xi.len(), self.n_params);
        let per_dim: Vec<Vec<f64>> = xi
            .iter()
            .map(|&x| {
                let mut v = Vec::with_capacity(self.degree + 1);
                self.univariate_values(self.degree, x, &mut v);
                v
            })
            .collect();
        self.index_map
            .iter()
            .map(|mi| mi.0.iter().enumerate().map(|(d, &e)| per_dim[d][e]).product())
            .collect()
    }

    /// Triple products `⟨Ψ_a Ψ_b Ψ_c⟩`, computed once on first use.
    pub fn triple_norms(&self) -> &TripleNorms {
        self.triples.get_or_init(|| triple_norms(self))
    }
}

/// Tensor-product Gauss rule for the normalized semicircle measure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadratureRule {
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
    n_per_dim: usize,
}

impl QuadratureRule {
    /// Gauss–Chebyshev (second kind) rule with `n_per_dim` points per
    /// dimension: `ξ_k = cos(kπ/(N+1))`, `w_k = 2/(N+1) sin²(kπ/(N+1))`.
    /// Exact for polynomials of degree `≤ 2N - 1` in each variable.
    pub fn gauss(n_per_dim: usize, n_dims: usize) -> Result<Self> {
        if n_per_dim == 0 {
            return Err(SdiError::invalid("quadrature needs at least one point per dimension"));
        }
        if n_dims == 0 {
            return Err(SdiError::invalid("quadrature needs at least one dimension"));
        }
        let np1 = (n_per_dim + 1) as f64;
        let (x1, w1): (Vec<f64>, Vec<f64>) = (1..=n_per_dim)
            .map(|k| {
                let theta = k as f64 * std::f64::consts::PI / np1;
                (theta.cos(), 2.0 / np1 * theta.sin().powi(2))
            })
            .unzip();

        let total = n_per_dim.pow(n_dims as u32);
        let mut nodes = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        let mut digits = vec![0usize; n_dims];
        for _ in 0..total {
            nodes.push(digits.iter().map(|&d| x1[d]).collect());
            weights.push(digits.iter().map(|&d| w1[d]).product());
            for d in (0..n_dims).rev() {
                digits[d] += 1;
                if digits[d] < n_per_dim {
                    break;
                }
                digits[d] = 0;
            }
        }
        Ok(Self { nodes, weights, n_per_dim })
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n_per_dim(&self) -> usize {
        self.n_per_dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn n_dims(&self) -> usize {
        self.nodes.first().map_or(0, Vec::len)
    }

    pub fn integrate<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }
}

/// Dense symmetric table of `⟨Ψ_a Ψ_b Ψ_c⟩` over all basis terms.
#[derive(Debug, Clone)]
pub struct TripleNorms {
    m: usize,
    data: Vec<f64>,
}

impl TripleNorms {
    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[(a * self.m + b) * self.m + c]
    }
}

/// Builds the triple-product table with a rule exact for degree `3m`.
pub fn triple_norms(basis: &PolynomialBasis) -> TripleNorms {
    let n = (3 * basis.degree() + 2).div_ceil(2).max(1);
    let rule = QuadratureRule::gauss(n, basis.n_params()).expect("valid rule parameters");
    let m = basis.len();
    let mut data = vec![0.0; m * m * m];
    for (node, &w) in rule.nodes().iter().zip(rule.weights()) {
        let psi = basis.eval_all(node);
        for a in 0..m {
            let wa = w * psi[a];
            for b in a..m {
                let wab = wa * psi[b];
                for c in b..m {
                    data[(a * m + b) * m + c] += wab * psi[c];
                }
            }
        }
    }
    // Fill the remaining permutations from the sorted entries.
    for a in 0..m {
        for b in a..m {
            for c in b..m {
                let v = data[(a * m + b) * m + c];
                for &(i, j, k) in &[(a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
                    data[(i * m + j) * m + k] = v;
                }
            }
        }
    }
    TripleNorms { m, data }
}
