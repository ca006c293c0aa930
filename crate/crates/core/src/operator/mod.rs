//! Dense complex operator algebra.
//!
//! Every Hamiltonian, propagator and density matrix in the crate is an
//! [`Operator`]: a square complex matrix together with the dimensions of the
//! tensor factors it acts on. Factor 0 is the most significant index of the
//! Kronecker product, so for qubits the leftmost character of a Pauli label
//! (`"ZXI"`) is factor 0.

mod pauli;
mod spectrum;
mod state;

pub use pauli::{Pauli, PauliString, Phase};
pub use spectrum::{expm_hermitian, pauli_exp, Spectrum};
pub use state::{gate_fidelity, ket_fidelity, partial_trace, state_fidelity, trace_distance, DensityMatrix};

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Matrix = DMatrix<C64>;
pub type Ket = DVector<C64>;

/// Tolerance for the Hermitian / unitary flags.
pub const STRUCTURE_TOL: f64 = 1e-12;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Dense square operator on a tensor product space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    dims: Vec<usize>,
    mat: Matrix,
}

impl Operator {
    pub fn new(dims: Vec<usize>, mat: Matrix) -> Result<Self> {
        check_dims(&dims)?;
        let side: usize = dims.iter().product();
        if mat.nrows() != side || mat.ncols() != side {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}, dims {:?} need side {side}",
                mat.nrows(),
                mat.ncols(),
                dims
            )));
        }
        Ok(Self { dims, mat })
    }

    /// Wraps a `2^n x 2^n` matrix as an `n`-qubit operator.
    pub fn from_qubit_matrix(mat: Matrix) -> Result<Self> {
        let side = mat.nrows();
        if side < 2 || !side.is_power_of_two() {
            return Err(Error::InvalidDims(format!("side {side} is not a power of two")));
        }
        Self::new(vec![2; side.trailing_zeros() as usize], mat)
    }

    pub fn identity(dims: &[usize]) -> Self {
        let side = dims.iter().product();
        Self { dims: dims.to_vec(), mat: Matrix::identity(side, side) }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let side = dims.iter().product();
        Self { dims: dims.to_vec(), mat: Matrix::zeros(side, side) }
    }

    pub fn qubit_identity(n: usize) -> Self {
        Self::identity(&vec![2; n])
    }

    /// `|a><b|` for two kets on the given factor dimensions.
    pub fn outer(dims: &[usize], a: &Ket, b: &Ket) -> Result<Self> {
        Self::new(dims.to_vec(), a * b.adjoint())
    }

    pub fn projector(dims: &[usize], psi: &Ket) -> Result<Self> {
        Self::outer(dims, psi, psi)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Side length of the matrix.
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    pub fn into_matrix(self) -> Matrix {
        self.mat
    }

    /// Reinterprets the same matrix with a different factorization.
    pub fn with_dims(self, dims: Vec<usize>) -> Result<Self> {
        Self::new(dims, self.mat)
    }

    pub fn adjoint(&self) -> Self {
        Self { dims: self.dims.clone(), mat: self.mat.adjoint() }
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    pub fn scaled(&self, z: C64) -> Self {
        Self { dims: self.dims.clone(), mat: &self.mat * z }
    }

    /// `[self, other]`
    pub fn commutator(&self, other: &Operator) -> Operator {
        self * other - other * self
    }

    /// `{self, other}`
    pub fn anticommutator(&self, other: &Operator) -> Operator {
        self * other + other * self
    }

    /// Largest absolute entry.
    pub fn max_norm(&self) -> f64 {
        self.mat.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        self.mat.clone().singular_values().iter().copied().fold(0.0, f64::max)
    }

    /// Sum of singular values.
    pub fn trace_norm(&self) -> f64 {
        self.mat.clone().singular_values().iter().sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.mat - self.mat.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        (self.mat.adjoint() * &self.mat - Matrix::identity(n, n)).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect() < STRUCTURE_TOL * self.max_norm().max(1.0)
    }

    pub fn is_unitary(&self) -> bool {
        self.unitarity_defect() < STRUCTURE_TOL
    }

    pub fn require_hermitian(&self) -> Result<()> {
        if self.is_hermitian() {
            Ok(())
        } else {
            Err(Error::NotHermitian { deviation: self.hermiticity_defect() })
        }
    }

    pub fn require_unitary(&self) -> Result<()> {
        if self.is_unitary() {
            Ok(())
        } else {
            Err(Error::NotUnitary { deviation: self.unitarity_defect() })
        }
    }

    /// `(A + A†)/2`, used to clean roundoff before eigendecomposition.
    pub fn hermitian_part(&self) -> Self {
        Self { dims: self.dims.clone(), mat: (&self.mat + self.mat.adjoint()) * c(0.5, 0.0) }
    }

    pub fn apply(&self, psi: &Ket) -> Ket {
        &self.mat * psi
    }

    /// `self ⊗ I` on the extra factors `rest`.
    pub fn extend_right(&self, rest: &[usize]) -> Self {
        if rest.is_empty() {
            return self.clone();
        }
        let id = Operator::identity(rest);
        let mut dims = self.dims.clone();
        dims.extend_from_slice(rest);
        Self { dims, mat: self.mat.kronecker(&id.mat) }
    }

    /// Expectation value `<psi|A|psi>`.
    pub fn expectation(&self, psi: &Ket) -> C64 {
        psi.dotc(&(&self.mat * psi))
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() {
        return Err(Error::InvalidDims("no tensor factors".into()));
    }
    if let Some(d) = dims.iter().find(|&&d| d < 2) {
        return Err(Error::InvalidDims(format!("factor dimension {d} < 2")));
    }
    Ok(())
}

/// Kronecker product of the factors, in order.
pub fn kron(factors: &[Operator]) -> Result<Operator> {
    let (first, rest) = factors.split_first().ok_or(Error::EmptyKron)?;
    let mut dims = first.dims.clone();
    let mut mat = first.mat.clone();
    for f in rest {
        dims.extend_from_slice(&f.dims);
        mat = mat.kronecker(&f.mat);
    }
    Operator::new(dims, mat)
}

/// Kronecker product of state vectors.
pub fn kron_kets(kets: &[Ket]) -> Ket {
    let mut iter = kets.iter();
    let mut out = iter.next().cloned().unwrap_or_else(|| Ket::from_element(1, c(1.0, 0.0)));
    for k in iter {
        out = out.kronecker(k);
    }
    out
}

/// Computational basis state `|index>` of dimension `dim`.
pub fn basis_ket(dim: usize, index: usize) -> Ket {
    let mut k = Ket::zeros(dim);
    k[index] = c(1.0, 0.0);
    k
}

fn result_dims(a: &Operator, b: &Operator) -> Vec<usize> {
    assert_eq!(a.dim(), b.dim(), "operator size mismatch: {:?} vs {:?}", a.dims, b.dims);
    a.dims.clone()
}

impl Mul<&Operator> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator { dims: result_dims(self, rhs), mat: &self.mat * &rhs.mat }
    }
}

impl Mul<Operator> for Operator {
    type Output = Operator;
    fn mul(self, rhs: Operator) -> Operator {
        &self * &rhs
    }
}

impl Mul<&Operator> for Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        &self * rhs
    }
}

impl Add<&Operator> for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator { dims: result_dims(self, rhs), mat: &self.mat + &rhs.mat }
    }
}

impl Add<Operator> for Operator {
    type Output = Operator;
    fn add(self, rhs: Operator) -> Operator {
        &self + &rhs
    }
}

impl AddAssign<&Operator> for Operator {
    fn add_assign(&mut self, rhs: &Operator) {
        result_dims(self, rhs);
        self.mat += &rhs.mat;
    }
}

impl Sub<&Operator> for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator { dims: result_dims(self, rhs), mat: &self.mat - &rhs.mat }
    }
}

impl Sub<Operator> for Operator {
    type Output = Operator;
    fn sub(self, rhs: Operator) -> Operator {
        &self - &rhs
    }
}

impl Mul<C64> for &Operator {
    type Output = Operator;
    fn mul(self, z: C64) -> Operator {
        self.scaled(z)
    }
}

impl Mul<C64> for Operator {
    type Output = Operator;
    fn mul(mut self, z: C64) -> Operator {
        self.mat *= z;
        self
    }
}

impl Mul<f64> for &Operator {
    type Output = Operator;
    fn mul(self, x: f64) -> Operator {
        self.scaled(c(x, 0.0))
    }
}

impl Mul<f64> for Operator {
    type Output = Operator;
    fn mul(self, x: f64) -> Operator {
        self * c(x, 0.0)
    }
}

impl Neg for Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self * -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z() -> Operator {
        PauliString::parse("Z").unwrap().dense()
    }

    fn x() -> Operator {
        PauliString::parse("X").unwrap().dense()
    }

    #[test]
    fn kron_identity_is_identity() {
        let id = Operator::qubit_identity(1);
        assert_eq!(kron(std::slice::from_ref(&id)).unwrap(), id);
    }

    #[test]
    fn kron_of_diagonals() {
        let zz = kron(&[z(), z()]).unwrap();
        assert_eq!(zz.dims(), &[2, 2]);
        let expect = [1.0, -1.0, -1.0, 1.0];
        for (i, e) in expect.iter().enumerate() {
            assert_eq!(zz.matrix()[(i, i)], c(*e, 0.0));
        }
        assert!((zz.max_norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kron_xxx_flips_all_bits() {
        let xxx = kron(&[x(), x(), x()]).unwrap();
        let out = xxx.apply(&basis_ket(8, 0));
        assert_eq!(out, basis_ket(8, 7));
    }

    #[test]
    fn empty_kron_rejected() {
        assert_eq!(kron(&[]), Err(Error::EmptyKron));
    }

    #[test]
    fn kron_eigenvalues_are_pairwise_products() {
        let a = Operator::new(vec![2], Matrix::from_diagonal(&Ket::from_vec(vec![c(2.0, 0.0), c(-3.0, 0.0)]))).unwrap();
        let b =
            Operator::new(vec![3], Matrix::from_diagonal(&Ket::from_vec(vec![c(0.5, 0.0), c(7.0, 0.0), c(-1.0, 0.0)])))
                .unwrap();
        let ab = kron(&[a.clone(), b.clone()]).unwrap();
        let mut got: Vec<f64> = (0..6).map(|i| ab.matrix()[(i, i)].re).collect();
        let mut want: Vec<f64> = [2.0, -3.0].iter().flat_map(|x| [0.5, 7.0, -1.0].iter().map(move |y| x * y)).collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        assert_eq!(got, want);
    }

    #[test]
    fn rejects_bad_dims() {
        assert!(Operator::new(vec![2, 1], Matrix::identity(2, 2)).is_err());
        assert!(Operator::new(vec![2, 2], Matrix::identity(3, 3)).is_err());
        assert!(Operator::from_qubit_matrix(Matrix::identity(6, 6)).is_err());
    }

    #[test]
    fn norms_of_pauli() {
        let zx = PauliString::parse("ZX").unwrap().dense();
        assert!((zx.spectral_norm() - 1.0).abs() < 1e-12);
        assert!((zx.trace_norm() - 4.0).abs() < 1e-12);
        assert!(zx.is_hermitian() && zx.is_unitary());
    }
}
