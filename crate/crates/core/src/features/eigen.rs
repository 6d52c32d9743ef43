//! Cyclic Jacobi eigen-decomposition of a dense symmetric matrix.

/// Maximum number of full sweeps before giving up.
const MAX_SWEEPS: usize = 100;

/// Eigenpairs of a symmetric matrix, sorted by non-increasing eigenvalue.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Row `i` is the unit eigenvector of `values[i]`.
    pub vectors: Vec<Vec<f64>>,
}

/// Decompose the row-major `n x n` symmetric matrix `a`.
///
/// Rotations continue until the off-diagonal Frobenius norm falls below
/// `tol` times the matrix norm. Returns `None` if that is not reached.
pub fn symmetric_eigen(a: &[f64], n: usize, tol: f64) -> Option<SymmetricEigen> {
    assert_eq!(a.len(), n * n, "matrix must be n x n");
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale == 0.0 {
        return Some(sorted(vec![0.0; n], v, n));
    }
    let off_norm = |m: &[f64]| {
        let mut s = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                s += 2.0 * m[p * n + q] * m[p * n + q];
            }
        }
        s.sqrt()
    };

    for _ in 0..MAX_SWEEPS {
        if off_norm(&m) <= tol * scale {
            let values = (0..n).map(|i| m[i * n + i]).collect();
            return Some(sorted(values, v, n));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let mrp = m[r * n + p];
                    let mrq = m[r * n + q];
                    m[r * n + p] = c * mrp - s * mrq;
                    m[r * n + q] = s * mrp + c * mrq;
                }
                for r in 0..n {
                    let mpr = m[p * n + r];
                    let mqr = m[q * n + r];
                    m[p * n + r] = c * mpr - s * mqr;
                    m[q * n + r] = s * mpr + c * mqr;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for r in 0..n {
                    let vrp = v[r * n + p];
                    let vrq = v[r * n + q];
                    v[r * n + p] = c * vrp - s * vrq;
                    v[r * n + q] = s * vrp + c * vrq;
                }
            }
        }
    }
    None
}

/// Sort eigenpairs (columns of `v`) by value, descending; stable on ties.
fn sorted(values: Vec<f64>, v: Vec<f64>, n: usize) -> SymmetricEigen {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    SymmetricEigen {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors: order.iter().map(|&i| (0..n).map(|r| v[r * n + i]).collect()).collect(),
    }
}
