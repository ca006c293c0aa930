use nalgebra::SymmetricEigen;

use super::{Ket, Matrix, Operator, STRUCTURE_TOL};
use crate::error::{Error, Result};

const TRACE_TOL: f64 = 1e-10;
const EIGEN_FLOOR: f64 = -1e-10;

/// A validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(Operator);

impl DensityMatrix {
    pub fn new(op: Operator) -> Result<Self> {
        Self::with_tolerance(op, TRACE_TOL, EIGEN_FLOOR)
    }

    /// Validation with caller-chosen trace and eigenvalue tolerances.
    pub fn with_tolerance(op: Operator, trace_tol: f64, eigen_floor: f64) -> Result<Self> {
        let herm = op.hermiticity_defect();
        if herm >= STRUCTURE_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > trace_tol || tr.im.abs() > trace_tol {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = min_eigenvalue(&op);
        if min < eigen_floor {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self(op))
    }

    pub fn pure(dims: &[usize], psi: &Ket) -> Result<Self> {
        let n = psi.norm_squared();
        if (n - 1.0).abs() > TRACE_TOL {
            return Err(Error::NotNormalized(n));
        }
        Self::new(Operator::projector(dims, psi)?)
    }

    pub fn maximally_mixed(dims: &[usize]) -> Self {
        let id = Operator::identity(dims);
        let d = id.dim() as f64;
        Self(id * (1.0 / d))
    }

    pub fn operator(&self) -> &Operator {
        &self.0
    }

    pub fn into_operator(self) -> Operator {
        self.0
    }

    pub fn dims(&self) -> &[usize] {
        self.0.dims()
    }

    pub fn purity(&self) -> f64 {
        (self.0.matrix() * self.0.matrix()).trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.0)
    }
}

fn min_eigenvalue(op: &Operator) -> f64 {
    let eig = SymmetricEigen::new(op.hermitian_part().into_matrix());
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Traces out every factor not listed in `keep`.
///
/// `keep` is interpreted as a set; the result lists the kept factors in their
/// original order. Works on any operator, not only states, so it can be
/// applied to superoperator outputs.
pub fn partial_trace(op: &Operator, keep: &[usize]) -> Result<Operator> {
    let dims = op.dims();
    let n = dims.len();
    if keep.is_empty() {
        return Err(Error::InvalidParameter("partial trace must keep at least one factor".into()));
    }
    let mut kept = vec![false; n];
    for &k in keep {
        if k >= n {
            return Err(Error::InvalidSubsystem { index: k, n });
        }
        if kept[k] {
            return Err(Error::InvalidParameter(format!("factor {k} listed twice")));
        }
        kept[k] = true;
    }

    let mut strides = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let offsets = |want: bool| -> Vec<usize> {
        let mut offs = vec![0usize];
        for i in (0..n).filter(|&i| kept[i] == want) {
            let stride = strides[i];
            offs = offs.iter().flat_map(|&o| (0..dims[i]).map(move |d| o + d * stride)).collect();
        }
        offs
    };
    let keep_off = offsets(true);
    let trace_off = offsets(false);

    let m = op.matrix();
    let dk = keep_off.len();
    let out = Matrix::from_fn(dk, dk, |r, c| trace_off.iter().map(|&t| m[(keep_off[r] + t, keep_off[c] + t)]).sum());
    let out_dims: Vec<usize> = (0..n).filter(|&i| kept[i]).map(|i| dims[i]).collect();
    Operator::new(out_dims, out)
}

/// `<psi| rho |psi>`
pub fn state_fidelity(rho: &DensityMatrix, psi: &Ket) -> Result<f64> {
    if rho.operator().dim() != psi.len() {
        return Err(Error::DimensionMismatch(format!(
            "state of side {} vs vector of length {}",
            rho.operator().dim(),
            psi.len()
        )));
    }
    Ok(rho.operator().expectation(psi).re.clamp(0.0, 1.0))
}

/// `|<a|b>|^2` for normalized kets.
pub fn ket_fidelity(a: &Ket, b: &Ket) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!("kets of length {} and {}", a.len(), b.len())));
    }
    Ok(a.dotc(b).norm_sqr().clamp(0.0, 1.0))
}

/// `|Tr(U† V)| / d`, insensitive to a global phase.
pub fn gate_fidelity(u: &Operator, v: &Operator) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch(format!("gates of side {} and {}", u.dim(), v.dim())));
    }
    u.require_unitary()?;
    v.require_unitary()?;
    let overlap = (u.matrix().adjoint() * v.matrix()).trace();
    Ok((overlap.norm() / u.dim() as f64).clamp(0.0, 1.0))
}

/// `½ ‖a − b‖₁`
pub fn trace_distance(a: &Operator, b: &Operator) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!("operators of side {} and {}", a.dim(), b.dim())));
    }
    Ok(0.5 * (a - b).trace_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{c, kron, kron_kets, pauli_exp, PauliString};
    use proptest::prelude::*;

    fn ket(v: &[(f64, f64)]) -> Ket {
        Ket::from_iterator(v.len(), v.iter().map(|&(r, i)| c(r, i)))
    }

    #[test]
    fn product_state_marginal() {
        let a = DensityMatrix::pure(&[2], &ket(&[(0.6, 0.0), (0.0, 0.8)])).unwrap();
        let b = DensityMatrix::maximally_mixed(&[3]);
        let ab = kron(&[a.operator().clone(), b.operator().clone()]).unwrap();
        let back = partial_trace(&ab, &[0]).unwrap();
        assert!((back - a.operator().clone()).max_norm() < 1e-15);
        let other = partial_trace(&ab, &[1]).unwrap();
        assert!((other - b.operator().clone()).max_norm() < 1e-15);
    }

    #[test]
    fn bell_marginal_is_mixed() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let phi = ket(&[(s, 0.0), (0.0, 0.0), (0.0, 0.0), (s, 0.0)]);
        let rho = DensityMatrix::pure(&[2, 2], &phi).unwrap();
        let m = partial_trace(rho.operator(), &[0]).unwrap();
        assert!((m - Operator::identity(&[2]) * 0.5).max_norm() < 1e-15);
    }

    #[test]
    fn middle_factor_trace() {
        // |0><0| ⊗ |+><+| ⊗ |1><1|, trace out the middle.
        let zero = ket(&[(1.0, 0.0), (0.0, 0.0)]);
        let one = ket(&[(0.0, 0.0), (1.0, 0.0)]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = ket(&[(s, 0.0), (s, 0.0)]);
        let psi = kron_kets(&[zero.clone(), plus, one.clone()]);
        let rho = Operator::projector(&[2, 2, 2], &psi).unwrap();
        let outer = partial_trace(&rho, &[2, 0]).unwrap();
        let expect = Operator::projector(&[2, 2], &kron_kets(&[zero, one])).unwrap();
        assert_eq!(outer.dims(), &[2, 2]);
        assert!((outer - expect).max_norm() < 1e-15);
    }

    #[test]
    fn partial_trace_rejects_bad_index() {
        let rho = Operator::identity(&[2, 2]);
        assert!(matches!(partial_trace(&rho, &[2]), Err(Error::InvalidSubsystem { index: 2, n: 2 })));
        assert!(partial_trace(&rho, &[]).is_err());
        assert!(partial_trace(&rho, &[1, 1]).is_err());
    }

    #[test]
    fn fidelities() {
        let psi = ket(&[(0.6, 0.0), (0.0, 0.8)]);
        let rho = DensityMatrix::pure(&[2], &psi).unwrap();
        assert!((state_fidelity(&rho, &psi).unwrap() - 1.0).abs() < 1e-15);

        let u = pauli_exp(&PauliString::parse("XY").unwrap(), 0.37).unwrap();
        let phased = u.scaled(c(0.0, 1.3).exp());
        assert!((gate_fidelity(&u, &phased).unwrap() - 1.0).abs() < 1e-14);

        let x = PauliString::parse("X").unwrap().dense();
        assert!(gate_fidelity(&Operator::qubit_identity(1), &x).unwrap() < 1e-15);
        assert!(gate_fidelity(&x, &Operator::qubit_identity(2)).is_err());
    }

    #[test]
    fn rejects_invalid_states() {
        assert!(DensityMatrix::new(Operator::identity(&[2])).is_err());
        let neg = Operator::new(vec![2], Matrix::from_diagonal(&ket(&[(1.5, 0.0), (-0.5, 0.0)]))).unwrap();
        assert!(DensityMatrix::new(neg).is_err());
        assert!(DensityMatrix::pure(&[2], &ket(&[(1.0, 0.0), (1.0, 0.0)])).is_err());
    }

    fn random_state(dims: &[usize], entries: &[f64]) -> Operator {
        let d: usize = dims.iter().product();
        let a = Matrix::from_fn(d, d, |i, j| {
            c(entries[(i * d + j) % entries.len()], entries[(i + 7 * j + 3) % entries.len()])
        });
        let pos = &a * a.adjoint();
        let tr = pos.trace().re;
        Operator::new(dims.to_vec(), pos / c(tr, 0.0)).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn partial_trace_positive_and_trace_preserving(
            n in 1usize..=4,
            keep_mask in 1u8..16,
            entries in prop::collection::vec(-1.0f64..1.0, 37),
        ) {
            let dims = vec![2; n];
            let rho = random_state(&dims, &entries);
            let keep: Vec<usize> = (0..n).filter(|i| keep_mask & (1 << i) != 0).collect();
            prop_assume!(!keep.is_empty());
            let red = partial_trace(&rho, &keep).unwrap();
            prop_assert!((red.trace().re - 1.0).abs() < 1e-10);
            prop_assert!(red.hermiticity_defect() < 1e-12);
            prop_assert!(DensityMatrix::new(red).unwrap().min_eigenvalue() >= -1e-10);
        }

        #[test]
        fn partial_trace_is_linear(
            entries_a in prop::collection::vec(-1.0f64..1.0, 37),
            entries_b in prop::collection::vec(-1.0f64..1.0, 37),
            w in 0.0f64..1.0,
        ) {
            let dims = [2, 3, 2];
            let a = random_state(&dims, &entries_a);
            let b = random_state(&dims, &entries_b);
            let mix = &a * w + &b * (1.0 - w);
            let lhs = partial_trace(&mix, &[0, 2]).unwrap();
            let rhs = partial_trace(&a, &[0, 2]).unwrap() * w + partial_trace(&b, &[0, 2]).unwrap() * (1.0 - w);
            prop_assert!((lhs - rhs).max_norm() < 1e-13);
        }
    }
}
