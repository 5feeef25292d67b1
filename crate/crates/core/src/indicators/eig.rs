use crate::error::{Result, SdiError};

const SYMMETRY_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

/// Eigenvalues of a real symmetric row-major `n × n` matrix, descending,
/// by cyclic Jacobi rotations.
pub fn sym_eig(s: &[f64], n: usize) -> Result<Vec<f64>> {
    if s.len() != n * n {
        return Err(SdiError::invalid(format!("expected {} entries, got {}", n * n, s.len())));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(SdiError::invalid("matrix has non-finite entries"));
    }
    let scale = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            asym = asym.max((s[i * n + j] - s[j * n + i]).abs());
        }
    }
    if asym > SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(SdiError::NotSymmetric(asym));
    }

    let mut a = s.to_vec();
    for i in 0..n {
        for j in i + 1..n {
            let m = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = m;
            a[j * n + i] = m;
        }
    }
    let frob = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let off = |a: &[f64]| {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    acc += a[i * n + j] * a[i * n + j];
                }
            }
        }
        acc.sqrt()
    };

    for _ in 0..MAX_SWEEPS {
        if off(&a) <= 1e-14 * frob {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - sn * akq;
                    a[k * n + q] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - sn * aqk;
                    a[q * n + k] = sn * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    Ok(eig)
}

/// Largest eigenvalue of `MᵀM` for a row-major `rows × cols` matrix.
pub fn max_gram_eigenvalue(m: &[f64], rows: usize, cols: usize) -> Result<f64> {
    let g = gram(m, rows, cols);
    Ok(sym_eig(&g, cols)?[0])
}

/// `MᵀM` for a row-major `rows × cols` matrix.
pub fn gram(m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut g = vec![0.0; cols * cols];
    for i in 0..cols {
        for j in i..cols {
            let v: f64 = (0..rows).map(|r| m[r * cols + i] * m[r * cols + j]).sum();
            g[i * cols + j] = v;
            g[j * cols + i] = v;
        }
    }
    g
}
