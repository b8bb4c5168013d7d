//! Cyclic Jacobi eigensolver for real symmetric matrices.

use super::Matrix;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition `A = V diag(λ) Vᵀ`. Eigenvalues are returned in
/// ascending order; column `i` of the matrix is the eigenvector for `λ[i]`.
pub fn jacobi_eigen_symmetric(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Validation(format!(
            "eigensolver needs a square matrix, got {:?}",
            a.shape()
        )));
    }
    let scale = a.data().iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::Validation(format!(
                    "matrix is not symmetric at ({i}, {j}): {} vs {}",
                    a[(i, j)],
                    a[(j, i)]
                )));
            }
        }
    }

    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let total_sq: f64 = m.data().iter().map(|x| x * x).sum();

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off <= 1e-30 * total_sq.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                // signum(0.0) == 1.0, so θ = 0 gives the 45° rotation.
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, dst)] = v[(k, src)];
        }
    }
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn random_symmetric(n: usize, seed: u64) -> Matrix {
        let mut rng = Rng::new(seed);
        let r = rng.uniform_matrix(n, n, -1.0, 1.0);
        let mut s = r.clone();
        s.add_assign(&r.transpose());
        s
    }

    pub(crate) fn residual_and_orthogonality(a: &Matrix, vals: &[f64], vecs: &Matrix) -> (f64, f64) {
        let n = a.rows();
        let av = a.mm(vecs);
        let mut res = 0.0_f64;
        for i in 0..n {
            for k in 0..n {
                res = res.max((av[(k, i)] - vals[i] * vecs[(k, i)]).abs());
            }
        }
        let gram = vecs.mm_tn(vecs);
        let orth = gram.max_abs_diff(&Matrix::identity(n));
        (res, orth)
    }

    #[test]
    fn diagonal_sorted() {
        let (vals, _) = jacobi_eigen_symmetric(&Matrix::diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn analytic_two_by_two() {
        let a = Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]);
        let (vals, vecs) = jacobi_eigen_symmetric(&a).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
        let (res, orth) = residual_and_orthogonality(&a, &vals, &vecs);
        assert!(res < 1e-12 && orth < 1e-12);
    }

    #[test]
    fn random_residuals() {
        for (n, seed) in [(8, 1), (17, 2), (64, 3)] {
            let a = random_symmetric(n, seed);
            let (vals, vecs) = jacobi_eigen_symmetric(&a).unwrap();
            let (res, orth) = residual_and_orthogonality(&a, &vals, &vecs);
            assert!(res < 1e-8, "n={n} residual {res}");
            assert!(orth < 1e-8, "n={n} orthogonality {orth}");
            assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn rejects_non_symmetric() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]);
        assert!(matches!(jacobi_eigen_symmetric(&a), Err(Error::Validation(_))));
    }
}
