//! Eigen-decomposition of small complex Hermitian matrices by cyclic Jacobi
//! rotations.
//!
//! For the 2x2 case a single rotation already diagonalizes the matrix (the
//! closed form); the 4x4 case converges in a handful of sweeps. Off-diagonal
//! mass is driven below 1e-12 relative to the Frobenius norm, which is far
//! tighter than any tolerance used downstream.

use num_complex::Complex64;

use crate::algebra::HermitianMatrix;

/// Eigenvalues in ascending order with matching unit eigenvectors
/// (each `vectors[k]` is the eigenvector of `values[k]`).
pub(crate) fn eigen_hermitian(h: &HermitianMatrix) -> (Vec<f64>, Vec<Vec<Complex64>>) {
    let n = h.dim();
    let mut a: Vec<Complex64> = h.data().to_vec();
    // Accumulated unitary, columns become eigenvectors.
    let mut v = vec![Complex64::default(); n * n];
    for i in 0..n {
        v[i * n + i] = Complex64::new(1.0, 0.0);
    }

    let frobenius: f64 = a.iter().map(|e| e.norm_sqr()).sum::<f64>().sqrt();
    let target = 1e-12 * frobenius.max(1.0);

    for _sweep in 0..60 {
        let off: f64 = {
            let mut s = 0.0;
            for p in 0..n {
                for q in 0..n {
                    if p != q {
                        s += a[p * n + q].norm_sqr();
                    }
                }
            }
            s.sqrt()
        };
        if off <= target {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let gamma = a[p * n + q];
                let r = gamma.norm();
                if r <= target / (n as f64 * 4.0) {
                    continue;
                }
                // Phase factor u with gamma = r * u reduces the pivot block
                // to a real symmetric one; then a standard Givens rotation
                // zeroes it.
                let u = gamma / r;
                let alpha = a[p * n + p].re;
                let beta = a[q * n + q].re;
                let tau = (beta - alpha) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                let rpp = u * c; // R[p][p]
                let rpq = u * s; // R[p][q]
                                 // R[q][p] = -s, R[q][q] = c (real).

                // A <- A R
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = akp * rpp - akq * s;
                    a[k * n + q] = akp * rpq + akq * c;
                }
                // A <- R^dag A
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = apk * rpp.conj() - aqk * s;
                    a[q * n + k] = apk * rpq.conj() + aqk * c;
                }
                // V <- V R
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = vkp * rpp - vkq * s;
                    v[k * n + q] = vkp * rpq + vkq * c;
                }
                // Rounding can leave a tiny residue; the pivot is exactly
                // zero in exact arithmetic.
                a[p * n + q] = Complex64::default();
                a[q * n + p] = Complex64::default();
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[i * n + i]
            .re
            .partial_cmp(&a[j * n + j].re)
            .expect("finite eigenvalues")
    });
    let values: Vec<f64> = order.iter().map(|&i| a[i * n + i].re).collect();
    let vectors: Vec<Vec<Complex64>> = order
        .iter()
        .map(|&col| (0..n).map(|row| v[row * n + col]).collect())
        .collect();
    (values, vectors)
}
