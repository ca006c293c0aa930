use nalgebra::SymmetricEigen;

use super::{c, Ket, Matrix, Operator, PauliString};
use crate::error::{Error, Result};

/// Eigendecomposition `H = V Λ V†` of a Hermitian operator.
///
/// Holding on to a `Spectrum` lets sweeps evaluate `e^{-iHt}` at many times
/// for the cost of one diagonalization.
#[derive(Clone, Debug)]
pub struct Spectrum {
    dims: Vec<usize>,
    values: Vec<f64>,
    vectors: Matrix,
}

impl Spectrum {
    pub fn of(h: &Operator) -> Result<Self> {
        h.require_hermitian()?;
        let eig = SymmetricEigen::new(h.hermitian_part().into_matrix());
        Ok(Self {
            dims: h.dims().to_vec(),
            values: eig.eigenvalues.iter().copied().collect(),
            vectors: eig.eigenvectors,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Columns are the eigenvectors, in the order of [`Spectrum::values`].
    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// `e^{-iHt}`
    pub fn propagator(&self, t: f64) -> Operator {
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let phase = c(0.0, -lam * t).exp();
            for z in scaled.column_mut(j).iter_mut() {
                *z *= phase;
            }
        }
        let mat = scaled * self.vectors.adjoint();
        Operator::new(self.dims.clone(), mat).expect("spectrum dims are consistent")
    }

    /// `e^{-iHt} |psi>` without forming the propagator.
    pub fn evolve(&self, psi: &Ket, t: f64) -> Ket {
        let mut coeffs = self.vectors.ad_mul(psi);
        for (z, &lam) in coeffs.iter_mut().zip(&self.values) {
            *z *= c(0.0, -lam * t).exp();
        }
        &self.vectors * coeffs
    }

    /// Rotates an operator into the eigenbasis: `V† A V`.
    pub fn to_eigenbasis(&self, a: &Matrix) -> Matrix {
        self.vectors.adjoint() * a * &self.vectors
    }

    /// Inverse of [`Spectrum::to_eigenbasis`].
    pub fn from_eigenbasis(&self, a: &Matrix) -> Matrix {
        &self.vectors * a * self.vectors.adjoint()
    }
}

/// `e^{-iHt}` for Hermitian `H`.
pub fn expm_hermitian(h: &Operator, t: f64) -> Result<Operator> {
    Ok(Spectrum::of(h)?.propagator(t))
}

/// `e^{-i angle P} = cos(angle) I - i sin(angle) P` for a Hermitian Pauli string.
pub fn pauli_exp(p: &PauliString, angle: f64) -> Result<Operator> {
    if !p.is_hermitian() {
        return Err(Error::NonHermitianPauli(p.phase().to_string()));
    }
    let dense = p.dense();
    let id = Operator::identity(dense.dims());
    Ok(id * c(angle.cos(), 0.0) + dense * c(0.0, -angle.sin()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{basis_ket, kron};
    use std::f64::consts::PI;

    fn p(label: &str) -> PauliString {
        PauliString::parse(label).unwrap()
    }

    #[test]
    fn pauli_exp_closed_forms() {
        let id = pauli_exp(&p("ZX"), 0.0).unwrap();
        assert!((id - Operator::qubit_identity(2)).max_norm() < 1e-15);

        let u = pauli_exp(&p("Z"), PI / 2.0).unwrap();
        let expect = p("Z").dense() * c(0.0, -1.0);
        assert!((u - expect).max_norm() < 1e-15);
    }

    #[test]
    fn pauli_exp_matches_eigendecomposition() {
        let zx = p("ZX");
        let a = pauli_exp(&zx, 0.1).unwrap();
        let b = expm_hermitian(&zx.dense(), 0.1).unwrap();
        assert!((a - b).max_norm() < 1e-12);
    }

    #[test]
    fn pauli_exp_rejects_imaginary_phase() {
        assert!(matches!(pauli_exp(&p("iZ"), 0.3), Err(Error::NonHermitianPauli(_))));
    }

    #[test]
    fn expm_of_z_at_pi_is_minus_identity() {
        let u = expm_hermitian(&p("Z").dense(), PI).unwrap();
        assert!((u + Operator::qubit_identity(1)).max_norm() < 1e-12);
        let one = expm_hermitian(&p("Z").dense(), 0.0).unwrap();
        assert!((one - Operator::qubit_identity(1)).max_norm() < 1e-14);
    }

    #[test]
    fn expm_rejects_non_hermitian() {
        let a = p("iX").dense();
        assert!(matches!(expm_hermitian(&a, 1.0), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn cnot_hamiltonian_generates_cnot() {
        // (1 - Z1)/2 (1 - X2)/2 applied for time pi.
        let id = Operator::qubit_identity(2);
        let z1 = p("ZI").dense();
        let x2 = p("IX").dense();
        let h = ((&id - &z1) * 0.5) * ((&id - &x2) * 0.5);
        let u = expm_hermitian(&h, PI).unwrap();
        let cnot_cols = [0usize, 1, 3, 2];
        for (col, &row) in cnot_cols.iter().enumerate() {
            assert!((u.apply(&basis_ket(4, col)) - basis_ket(4, row)).norm() < 1e-12);
        }
    }

    #[test]
    fn evolve_matches_propagator() {
        let h = p("XZ").dense() + p("YY").dense() * 0.3 + p("ZI").dense() * 1.7;
        let s = Spectrum::of(&h).unwrap();
        let psi = kron(&[p("X").dense(), p("Z").dense()]).unwrap().apply(&basis_ket(4, 1));
        let a = s.evolve(&psi, 0.77);
        let b = s.propagator(0.77).apply(&psi);
        assert!((a - b).norm() < 1e-13);
    }

    #[test]
    fn propagator_is_a_group() {
        let h = p("XZ").dense() + p("YI").dense() * 0.4;
        let s = Spectrum::of(&h).unwrap();
        let prod = s.propagator(0.9) * s.propagator(-0.9);
        assert!((prod - Operator::qubit_identity(2)).max_norm() < 1e-10);
        assert!(s.propagator(2.3).unitarity_defect() < 1e-10);
    }
}
