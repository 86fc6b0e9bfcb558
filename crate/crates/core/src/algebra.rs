//! Exact complex Hermitian matrix arithmetic in dimensions 2 and 4, with
//! (de)composition in the Pauli operator basis.
//!
//! This is the substrate for reconstructing density matrices from moment
//! data: a 2x2 Hermitian matrix is `c0*I + c.sigma`, a 4x4 one is the
//! sixteen-element tensor-product expansion, and both decompositions are
//! orthogonal under the trace inner product `(A, B) = Tr(A^dag B) / dim`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigen;
use crate::error::{Error, Result};
use crate::vec3;

/// Tolerance for the Hermiticity check on construction.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Tolerance on `|Tr(rho) - 1|` for density-matrix arguments.
pub const UNIT_TRACE_TOL: f64 = 1e-9;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Dense complex Hermitian matrix of dimension 2 or 4, row-major.
///
/// Hermiticity is enforced on construction: inputs with asymmetry at most
/// [`HERMITICITY_TOL`] are symmetrized to `(H + H^dag)/2`, anything worse is
/// rejected. Values are immutable afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl HermitianMatrix {
    /// Builds a matrix from row-major entries, enforcing Hermiticity.
    pub fn from_entries(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if dim != 2 && dim != 4 {
            return Err(Error::BadDimension(dim));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch(entries.len(), dim * dim));
        }
        let mut asymmetry = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                let delta = (entries[i * dim + j] - entries[j * dim + i].conj()).norm();
                asymmetry = asymmetry.max(delta);
            }
        }
        if asymmetry > HERMITICITY_TOL {
            return Err(Error::NotHermitian(asymmetry));
        }
        // Absorb floating-point noise: H <- (H + H^dag)/2.
        let mut data = vec![Complex64::default(); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = (entries[i * dim + j] + entries[j * dim + i].conj()) * 0.5;
            }
        }
        Ok(HermitianMatrix { dim, data })
    }

    /// Identity matrix of the given dimension.
    pub fn identity(dim: usize) -> Result<Self> {
        if dim != 2 && dim != 4 {
            return Err(Error::BadDimension(dim));
        }
        let mut data = vec![Complex64::default(); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = cr(1.0);
        }
        Ok(HermitianMatrix { dim, data })
    }

    pub fn sigma_x() -> Self {
        HermitianMatrix {
            dim: 2,
            data: vec![cr(0.0), cr(1.0), cr(1.0), cr(0.0)],
        }
    }

    pub fn sigma_y() -> Self {
        HermitianMatrix {
            dim: 2,
            data: vec![cr(0.0), c(0.0, -1.0), c(0.0, 1.0), cr(0.0)],
        }
    }

    pub fn sigma_z() -> Self {
        HermitianMatrix {
            dim: 2,
            data: vec![cr(1.0), cr(0.0), cr(0.0), cr(-1.0)],
        }
    }

    /// `v . sigma` for a real 3-vector `v` (Hermitian for any real `v`).
    pub fn dot_sigma(v: [f64; 3]) -> Self {
        HermitianMatrix {
            dim: 2,
            data: vec![cr(v[2]), c(v[0], -v[1]), c(v[0], v[1]), cr(-v[2])],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    pub(crate) fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Trace (real by Hermiticity).
    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.entry(i, i).re).sum()
    }

    /// `Tr(self * other)` without materializing the (generally
    /// non-Hermitian) product.
    pub fn trace_product(&self, other: &HermitianMatrix) -> Result<Complex64> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        let mut acc = Complex64::default();
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += self.entry(i, j) * other.entry(j, i);
            }
        }
        Ok(acc)
    }

    /// Frobenius distance `||self - other||_F`.
    pub fn frobenius_distance(&self, other: &HermitianMatrix) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        let sum: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        Ok(sum.sqrt())
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        eigen::eigen_hermitian(self).0
    }
}

/// Tensor product of two 2x2 Hermitian matrices, first factor on the slow
/// (most significant) index: rows/columns are ordered `(i1, i2) -> 2*i1 + i2`.
pub fn kron(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<HermitianMatrix> {
    if a.dim() != 2 {
        return Err(Error::DimensionMismatch(a.dim(), 2));
    }
    if b.dim() != 2 {
        return Err(Error::DimensionMismatch(b.dim(), 2));
    }
    let mut data = vec![Complex64::default(); 16];
    for i1 in 0..2 {
        for j1 in 0..2 {
            for i2 in 0..2 {
                for j2 in 0..2 {
                    data[(2 * i1 + i2) * 4 + (2 * j1 + j2)] = a.entry(i1, j1) * b.entry(i2, j2);
                }
            }
        }
    }
    Ok(HermitianMatrix { dim: 4, data })
}

/// Real coefficients of a 2x2 Hermitian matrix in the `{I, sigma}` basis:
/// `H = c0*I + c . sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauliCoefficients2 {
    pub c0: f64,
    pub c: [f64; 3],
}

impl PauliCoefficients2 {
    /// Reconstructs the matrix `c0*I + c . sigma`.
    pub fn matrix(&self) -> HermitianMatrix {
        HermitianMatrix {
            dim: 2,
            data: vec![
                cr(self.c0 + self.c[2]),
                c(self.c[0], -self.c[1]),
                c(self.c[0], self.c[1]),
                cr(self.c0 - self.c[2]),
            ],
        }
    }
}

/// Real coefficients of a 4x4 Hermitian matrix in the sixteen-element
/// tensor-product basis:
/// `H = c0*I + c1 . sigma x I + I x c2 . sigma + sum c12[a][b] sigma^a x sigma^b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauliCoefficients4 {
    pub c0: f64,
    pub c1: [f64; 3],
    pub c2: [f64; 3],
    pub c12: [[f64; 3]; 3],
}

impl PauliCoefficients4 {
    /// Reconstructs the matrix from its tensor-product-basis coefficients.
    pub fn matrix(&self) -> HermitianMatrix {
        let id2 = HermitianMatrix::identity(2).expect("dim 2");
        let sigma = [
            HermitianMatrix::sigma_x(),
            HermitianMatrix::sigma_y(),
            HermitianMatrix::sigma_z(),
        ];
        let mut data = vec![Complex64::default(); 16];
        let mut add = |m: &HermitianMatrix, w: f64| {
            for (d, e) in data.iter_mut().zip(m.data.iter()) {
                *d += e * w;
            }
        };
        add(&HermitianMatrix::identity(4).expect("dim 4"), self.c0);
        for a in 0..3 {
            add(&kron(&sigma[a], &id2).expect("2x2"), self.c1[a]);
            add(&kron(&id2, &sigma[a]).expect("2x2"), self.c2[a]);
            for b in 0..3 {
                add(&kron(&sigma[a], &sigma[b]).expect("2x2"), self.c12[a][b]);
            }
        }
        HermitianMatrix { dim: 4, data }
    }
}

/// Coefficients of `H` in the `{I, sigma}` basis: `c0 = Tr(H)/2`,
/// `c_a = Tr(H sigma^a)/2`.
pub fn pauli_decompose_2(h: &HermitianMatrix) -> Result<PauliCoefficients2> {
    if h.dim() != 2 {
        return Err(Error::DimensionMismatch(h.dim(), 2));
    }
    let sigma = [
        HermitianMatrix::sigma_x(),
        HermitianMatrix::sigma_y(),
        HermitianMatrix::sigma_z(),
    ];
    let mut coeff = [0.0; 3];
    for (a, s) in sigma.iter().enumerate() {
        // Tr(H sigma) is real for Hermitian factors.
        coeff[a] = h.trace_product(s)?.re / 2.0;
    }
    Ok(PauliCoefficients2 {
        c0: h.trace() / 2.0,
        c: coeff,
    })
}

/// Coefficients of `H` in the tensor-product basis, by the trace inner
/// product `(A, B) = Tr(A^dag B)/4` against each basis element.
pub fn pauli_decompose_4(h: &HermitianMatrix) -> Result<PauliCoefficients4> {
    if h.dim() != 4 {
        return Err(Error::DimensionMismatch(h.dim(), 4));
    }
    let id2 = HermitianMatrix::identity(2).expect("dim 2");
    let sigma = [
        HermitianMatrix::sigma_x(),
        HermitianMatrix::sigma_y(),
        HermitianMatrix::sigma_z(),
    ];
    let mut c1 = [0.0; 3];
    let mut c2 = [0.0; 3];
    let mut c12 = [[0.0; 3]; 3];
    for a in 0..3 {
        c1[a] = h.trace_product(&kron(&sigma[a], &id2)?)?.re / 4.0;
        c2[a] = h.trace_product(&kron(&id2, &sigma[a])?)?.re / 4.0;
        for b in 0..3 {
            c12[a][b] = h.trace_product(&kron(&sigma[a], &sigma[b])?)?.re / 4.0;
        }
    }
    Ok(PauliCoefficients4 {
        c0: h.trace() / 4.0,
        c1,
        c2,
        c12,
    })
}

/// `Tr(rho * a)` for a unit-trace Hermitian `rho`.
///
/// The product trace of two Hermitian matrices is real up to rounding; the
/// imaginary part is checked against 1e-9 and discarded.
pub fn expectation(rho: &HermitianMatrix, a: &HermitianMatrix) -> Result<f64> {
    if rho.dim() != a.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), a.dim()));
    }
    let trace = rho.trace();
    if (trace - 1.0).abs() > UNIT_TRACE_TOL {
        return Err(Error::NonUnitTrace(trace));
    }
    let value = rho.trace_product(a)?;
    if value.im.abs() > 1e-9 {
        return Err(Error::NonRealExpectation(value.im));
    }
    Ok(value.re)
}

/// `Tr(rho^2)` for a unit-trace Hermitian `rho`; 1 for projections,
/// `1/dim` for the maximally mixed state.
pub fn purity(rho: &HermitianMatrix) -> Result<f64> {
    let trace = rho.trace();
    if (trace - 1.0).abs() > UNIT_TRACE_TOL {
        return Err(Error::NonUnitTrace(trace));
    }
    // Tr(rho^2) = sum |rho[i][j]|^2 by Hermiticity.
    Ok(rho.data.iter().map(|e| e.norm_sqr()).sum())
}

/// Complex amplitude vector of unit norm with a fixed global phase: the
/// first amplitude of modulus above 1e-9 is real and non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    dim: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Validates normalization (1e-12 on `sum |a|^2 - 1`) and applies the
    /// global-phase convention.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = amplitudes.len();
        if dim != 2 && dim != 4 {
            return Err(Error::BadDimension(dim));
        }
        let norm_sqr: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized(norm_sqr));
        }
        let mut amplitudes = amplitudes;
        if let Some(first) = amplitudes.iter().find(|a| a.norm() > 1e-9) {
            let phase = first.conj() / first.norm();
            for a in amplitudes.iter_mut() {
                *a *= phase;
            }
        }
        Ok(StateVector { dim, amplitudes })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Rank-one projector `|psi><psi|`.
    pub fn projector(&self) -> HermitianMatrix {
        let mut data = vec![Complex64::default(); self.dim * self.dim];
        for i in 0..self.dim {
            for j in 0..self.dim {
                data[i * self.dim + j] = self.amplitudes[i] * self.amplitudes[j].conj();
            }
        }
        HermitianMatrix {
            dim: self.dim,
            data,
        }
    }

    /// Distance to `other` minimized over a global phase.
    pub fn phase_aligned_distance(&self, other: &StateVector) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        let overlap: Complex64 = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok((2.0 - 2.0 * overlap.norm()).max(0.0).sqrt())
    }
}

/// Extracts the state vector of a (near-)pure density matrix: the unit
/// eigenvector whose eigenvalue is closest to 1.
///
/// Fails with [`Error::MixedState`] when `purity(rho) < 1 - tol`.
pub fn extract_state(rho: &HermitianMatrix, tol: f64) -> Result<StateVector> {
    let p = purity(rho)?;
    if p < 1.0 - tol {
        return Err(Error::MixedState { purity: p, tol });
    }
    let (values, vectors) = eigen::eigen_hermitian(rho);
    let (best, _) = values
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            (*a - 1.0)
                .abs()
                .partial_cmp(&(*b - 1.0).abs())
                .expect("finite eigenvalues")
        })
        .expect("nonempty spectrum");
    let mut amplitudes = vectors[best].clone();
    // The Jacobi vectors are unitary to rounding; renormalize before the
    // 1e-12 normalization check.
    let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in amplitudes.iter_mut() {
        *a /= norm;
    }
    StateVector::new(amplitudes)
}

/// `(I + m . sigma)/2`, the 2x2 density matrix with Bloch vector `m`.
pub fn bloch_density(m: [f64; 3]) -> HermitianMatrix {
    PauliCoefficients2 {
        c0: 0.5,
        c: [m[0] / 2.0, m[1] / 2.0, m[2] / 2.0],
    }
    .matrix()
}

/// `(I - sigma_1 . sigma_2)/4`, the two-spin density matrix whose pair
/// correlation is `-a1 . a2` (the singlet).
pub fn singlet_density() -> HermitianMatrix {
    let mut c12 = [[0.0; 3]; 3];
    for (a, row) in c12.iter_mut().enumerate() {
        row[a] = -0.25;
    }
    PauliCoefficients4 {
        c0: 0.25,
        c1: [0.0; 3],
        c2: [0.0; 3],
        c12,
    }
    .matrix()
}

/// Observable pair `X = a1 . sigma x I`, `Y = I x a2 . sigma`, and their
/// (commuting, Hermitian) product `XY = a1 . sigma x a2 . sigma`.
pub fn pair_observables(
    a1: vec3::UnitVector,
    a2: vec3::UnitVector,
) -> (HermitianMatrix, HermitianMatrix, HermitianMatrix) {
    let id2 = HermitianMatrix::identity(2).expect("dim 2");
    let sx = HermitianMatrix::dot_sigma(a1.as_array());
    let sy = HermitianMatrix::dot_sigma(a2.as_array());
    let x = kron(&sx, &id2).expect("2x2 factors");
    let y = kron(&id2, &sy).expect("2x2 factors");
    let xy = kron(&sx, &sy).expect("2x2 factors");
    (x, y, xy)
}

/// Test helper: random unit-trace density matrix `G G^dag / Tr(G G^dag)`.
#[cfg(test)]
pub(crate) fn random_density(rng: &mut crate::rng::SplitMix64, dim: usize) -> HermitianMatrix {
    let g: Vec<Complex64> = (0..dim * dim)
        .map(|_| c(rng.next_f64() * 2.0 - 1.0, rng.next_f64() * 2.0 - 1.0))
        .collect();
    let mut data = vec![Complex64::default(); dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            let mut acc = Complex64::default();
            for k in 0..dim {
                acc += g[i * dim + k] * g[j * dim + k].conj();
            }
            data[i * dim + j] = acc;
        }
    }
    let trace: f64 = (0..dim).map(|i| data[i * dim + i].re).sum();
    for e in data.iter_mut() {
        *e /= trace;
    }
    HermitianMatrix::from_entries(dim, data).expect("Hermitian by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn random_hermitian(rng: &mut SplitMix64, dim: usize) -> HermitianMatrix {
        let mut entries = vec![Complex64::default(); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = cr(rng.next_f64() * 2.0 - 1.0);
            for j in (i + 1)..dim {
                let z = c(rng.next_f64() * 2.0 - 1.0, rng.next_f64() * 2.0 - 1.0);
                entries[i * dim + j] = z;
                entries[j * dim + i] = z.conj();
            }
        }
        HermitianMatrix::from_entries(dim, entries).expect("Hermitian by construction")
    }

    #[test]
    fn construction_rejects_bad_dimension_and_asymmetry() {
        assert!(matches!(
            HermitianMatrix::from_entries(3, vec![Complex64::default(); 9]),
            Err(Error::BadDimension(3))
        ));
        let skew = vec![cr(0.0), cr(1.0), cr(2.0), cr(0.0)];
        assert!(matches!(
            HermitianMatrix::from_entries(2, skew),
            Err(Error::NotHermitian(_))
        ));
        // Noise below the tolerance is symmetrized away.
        let noisy = vec![cr(1.0), c(0.5, 4e-13), c(0.5, 2e-13), cr(0.0)];
        let h = HermitianMatrix::from_entries(2, noisy).unwrap();
        assert!((h.entry(0, 1) - h.entry(1, 0).conj()).norm() < 1e-15);
    }

    #[test]
    fn decompose_2_known_cases() {
        let id = HermitianMatrix::identity(2).unwrap();
        let p = pauli_decompose_2(&id).unwrap();
        assert_eq!(p.c0, 1.0);
        assert_eq!(p.c, [0.0, 0.0, 0.0]);

        let p = pauli_decompose_2(&HermitianMatrix::sigma_x()).unwrap();
        assert_eq!(p.c0, 0.0);
        assert_eq!(p.c, [1.0, 0.0, 0.0]);

        // Spin-up projector (I + sigma_z)/2.
        let p = pauli_decompose_2(&bloch_density([0.0, 0.0, 1.0])).unwrap();
        assert_close(p.c0, 0.5, 1e-15);
        assert_eq!(p.c[0], 0.0);
        assert_eq!(p.c[1], 0.0);
        assert_close(p.c[2], 0.5, 1e-15);

        assert!(pauli_decompose_2(&HermitianMatrix::identity(4).unwrap()).is_err());
    }

    #[test]
    fn decompose_4_known_cases() {
        let p = pauli_decompose_4(&HermitianMatrix::identity(4).unwrap()).unwrap();
        assert_eq!(p.c0, 1.0);
        assert_eq!(p.c1, [0.0; 3]);
        assert_eq!(p.c2, [0.0; 3]);
        assert_eq!(p.c12, [[0.0; 3]; 3]);

        let p = pauli_decompose_4(&singlet_density()).unwrap();
        assert_close(p.c0, 0.25, 1e-15);
        for a in 0..3 {
            assert_close(p.c1[a], 0.0, 1e-15);
            assert_close(p.c2[a], 0.0, 1e-15);
            for b in 0..3 {
                let want = if a == b { -0.25 } else { 0.0 };
                assert_close(p.c12[a][b], want, 1e-15);
            }
        }

        let sxy = kron(&HermitianMatrix::sigma_x(), &HermitianMatrix::sigma_y()).unwrap();
        let p = pauli_decompose_4(&sxy).unwrap();
        assert_close(p.c0, 0.0, 1e-15);
        for a in 0..3 {
            for b in 0..3 {
                let want = if (a, b) == (0, 1) { 1.0 } else { 0.0 };
                assert_close(p.c12[a][b], want, 1e-15);
            }
        }

        assert!(pauli_decompose_4(&HermitianMatrix::identity(2).unwrap()).is_err());
    }

    #[test]
    fn expectation_known_cases() {
        let rho = bloch_density([0.0, 0.0, 1.0]);
        assert_close(
            expectation(&rho, &HermitianMatrix::sigma_z()).unwrap(),
            1.0,
            1e-15,
        );

        let mixed = bloch_density([0.0, 0.0, 0.0]);
        assert_close(
            expectation(&mixed, &HermitianMatrix::sigma_x()).unwrap(),
            0.0,
            1e-15,
        );

        // Singlet pair correlation vanishes for orthogonal settings.
        let (_, _, xy) = pair_observables(vec3::UnitVector::Z, vec3::UnitVector::X);
        assert_close(expectation(&singlet_density(), &xy).unwrap(), 0.0, 1e-15);

        // Non-unit trace and dimension mismatch are rejected.
        assert!(expectation(&HermitianMatrix::sigma_z(), &HermitianMatrix::sigma_z()).is_err());
        assert!(expectation(&rho, &HermitianMatrix::identity(4).unwrap()).is_err());
    }

    #[test]
    fn purity_known_cases() {
        assert_close(purity(&bloch_density([0.0, 0.0, 1.0])).unwrap(), 1.0, 1e-15);
        assert_close(purity(&bloch_density([0.0, 0.0, 0.0])).unwrap(), 0.5, 1e-15);

        // Oracle for the partially polarized case: explicit 2x2 product.
        let rho = bloch_density([0.0, 0.0, 0.5]);
        let mut oracle = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                oracle += (rho.entry(i, j) * rho.entry(j, i)).re;
            }
        }
        assert_close(oracle, 0.625, 1e-15);
        assert_close(purity(&rho).unwrap(), oracle, 1e-15);

        assert!(purity(&HermitianMatrix::sigma_x()).is_err());
    }

    #[test]
    fn extract_state_known_cases() {
        let up = extract_state(&bloch_density([0.0, 0.0, 1.0]), 1e-9).unwrap();
        assert!((up.amplitudes()[0] - cr(1.0)).norm() < 1e-12);
        assert!(up.amplitudes()[1].norm() < 1e-12);

        let s = extract_state(&singlet_density(), 1e-9).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!(s.amplitudes()[0].norm() < 1e-12);
        assert!((s.amplitudes()[1] - cr(r)).norm() < 1e-12);
        assert!((s.amplitudes()[2] - cr(-r)).norm() < 1e-12);
        assert!(s.amplitudes()[3].norm() < 1e-12);

        assert!(matches!(
            extract_state(&bloch_density([0.0, 0.0, 0.0]), 1e-6),
            Err(Error::MixedState { .. })
        ));
    }

    #[test]
    fn extract_state_projector_tracks_near_pure_sources() {
        // For purity >= 1 - tol, the extracted projector reproduces the
        // input within Frobenius distance sqrt(2 tol).
        let mut rng = SplitMix64::new(0x51AB);
        for _ in 0..200 {
            let tol = 0.01;
            let len = 1.0 - tol * rng.next_f64(); // |m| close to 1
            let raw = [
                rng.next_f64() * 2.0 - 1.0,
                rng.next_f64() * 2.0 - 1.0,
                rng.next_f64() * 2.0 - 1.0,
            ];
            let norm = vec3::norm(raw);
            if norm < 1e-3 {
                continue;
            }
            let m = raw.map(|v| v * len / norm);
            let rho = bloch_density(m);
            if purity(&rho).unwrap() < 1.0 - tol {
                continue;
            }
            let psi = extract_state(&rho, tol).unwrap();
            let dist = psi.projector().frobenius_distance(&rho).unwrap();
            assert!(dist <= (2.0 * tol).sqrt(), "distance {dist}");
        }
    }

    #[test]
    fn extract_state_reproduces_projector() {
        let mut rng = SplitMix64::new(0x1a2b);
        for _ in 0..200 {
            let dim = if rng.next_f64() < 0.5 { 2 } else { 4 };
            let raw: Vec<Complex64> = (0..dim)
                .map(|_| c(rng.next_f64() * 2.0 - 1.0, rng.next_f64() * 2.0 - 1.0))
                .collect();
            let norm: f64 = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            let psi = StateVector::new(raw.into_iter().map(|a| a / norm).collect()).unwrap();
            let rho = psi.projector();
            let back = extract_state(&rho, 1e-9).unwrap();
            // Both are phase-fixed, so the round trip is the identity.
            let dist: f64 = psi
                .amplitudes()
                .iter()
                .zip(back.amplitudes())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(dist < 1e-10, "round-trip distance {dist}");
        }
    }

    #[test]
    fn kron_known_cases() {
        let id2 = HermitianMatrix::identity(2).unwrap();
        let id4 = HermitianMatrix::identity(4).unwrap();
        assert!(kron(&id2, &id2).unwrap().frobenius_distance(&id4).unwrap() < 1e-15);

        let zi = kron(&HermitianMatrix::sigma_z(), &id2).unwrap();
        for (i, want) in [1.0, 1.0, -1.0, -1.0].into_iter().enumerate() {
            assert_close(zi.entry(i, i).re, want, 1e-15);
        }

        let zz = kron(&HermitianMatrix::sigma_z(), &HermitianMatrix::sigma_z()).unwrap();
        for (i, want) in [1.0, -1.0, -1.0, 1.0].into_iter().enumerate() {
            assert_close(zz.entry(i, i).re, want, 1e-15);
        }

        assert!(kron(&id4, &id2).is_err());
    }

    #[test]
    fn pauli_round_trip_dim2() {
        let mut rng = SplitMix64::new(7);
        for _ in 0..500 {
            let h = random_hermitian(&mut rng, 2);
            let back = pauli_decompose_2(&h).unwrap().matrix();
            assert!(h.frobenius_distance(&back).unwrap() < 1e-12);
        }
    }

    #[test]
    fn pauli_round_trip_dim4() {
        let mut rng = SplitMix64::new(8);
        for _ in 0..500 {
            let h = random_hermitian(&mut rng, 4);
            let back = pauli_decompose_4(&h).unwrap().matrix();
            assert!(h.frobenius_distance(&back).unwrap() < 1e-12);
        }
    }

    #[test]
    fn pauli_product_identity() {
        // (a.sigma)(b.sigma) = (a.b) I + i (a x b).sigma, checked entrywise.
        let mut rng = SplitMix64::new(9);
        for _ in 0..500 {
            let a = random_unit(&mut rng);
            let b = random_unit(&mut rng);
            let ma = HermitianMatrix::dot_sigma(a);
            let mb = HermitianMatrix::dot_sigma(b);
            let ab = vec3::dot(a, b);
            let cx = vec3::cross(a, b);
            for i in 0..2 {
                for j in 0..2 {
                    let mut lhs = Complex64::default();
                    for k in 0..2 {
                        lhs += ma.entry(i, k) * mb.entry(k, j);
                    }
                    let mut rhs = HermitianMatrix::dot_sigma(cx).entry(i, j) * c(0.0, 1.0);
                    if i == j {
                        rhs += cr(ab);
                    }
                    assert!((lhs - rhs).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn trace_identities_match_coefficient_formula() {
        // Tr(rho X) = u0 + rho_vec . u for rho = (I + rho_vec.sigma)/2 and
        // X = u0 I + u.sigma.
        let mut rng = SplitMix64::new(10);
        for _ in 0..500 {
            let m = scaled_vector(&mut rng);
            let u0 = rng.next_f64() * 2.0 - 1.0;
            let u = scaled_vector(&mut rng);
            let rho = bloch_density(m);
            let x = PauliCoefficients2 { c0: u0, c: u }.matrix();
            let direct = expectation(&rho, &x).unwrap();
            let formula = u0 + vec3::dot(m, u);
            assert_close(direct, formula, 1e-10);
        }
    }

    fn random_unit(rng: &mut SplitMix64) -> [f64; 3] {
        loop {
            let v = [
                rng.next_f64() * 2.0 - 1.0,
                rng.next_f64() * 2.0 - 1.0,
                rng.next_f64() * 2.0 - 1.0,
            ];
            let n = vec3::norm(v);
            if n > 1e-3 && n <= 1.0 {
                return [v[0] / n, v[1] / n, v[2] / n];
            }
        }
    }

    fn scaled_vector(rng: &mut SplitMix64) -> [f64; 3] {
        let u = random_unit(rng);
        let r = rng.next_f64();
        [u[0] * r, u[1] * r, u[2] * r]
    }
}
