//! Rotation and CNOT Hamiltonians, physical and encoded.
//!
//! The rotation Hamiltonian is `ω₀ (σ_z cos θ + σ_x sin θ cos φ + σ_y sin θ sin φ)`
//! with `σ_y = i σ_x σ_z`, applied for `t_g = angle / ω₀`. The CNOT Hamiltonian
//! is `ω₀ (1 − σ_{1z})/2 · (1 − σ_{2x})/2`, applied for `t_g = π / ω₀`.
//! Encoded versions substitute the code's logical Paulis; the encoded CNOT
//! uses block 0 (qubits 0..3) as control and block 1 (qubits 3..6) as target.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::code::{CodeSpec, BLOCK_QUBITS};
use crate::error::{Error, Result};
use crate::operator::{c, kron, Ket, Operator, PauliString, Spectrum};

fn default_omega() -> f64 {
    1.0
}

/// A gate and the Hamiltonian that generates it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GateSpec {
    /// Rotation by `angle` about the axis `(sin θ cos φ, sin θ sin φ, cos θ)`.
    Rotation {
        theta: f64,
        phi: f64,
        angle: f64,
        #[serde(default = "default_omega")]
        omega0: f64,
        #[serde(default)]
        logical: bool,
    },
    Cnot {
        #[serde(default = "default_omega")]
        omega0: f64,
        #[serde(default)]
        logical: bool,
    },
    /// No gate Hamiltonian for a fixed duration: the memory baseline.
    Idle {
        duration: f64,
        #[serde(default)]
        logical: bool,
    },
}

impl GateSpec {
    pub fn rotation(theta: f64, phi: f64, angle: f64, logical: bool) -> Self {
        GateSpec::Rotation { theta, phi, angle, omega0: 1.0, logical }
    }

    pub fn cnot(logical: bool) -> Self {
        GateSpec::Cnot { omega0: 1.0, logical }
    }

    pub fn idle(duration: f64, logical: bool) -> Self {
        GateSpec::Idle { duration, logical }
    }

    pub fn is_logical(&self) -> bool {
        match *self {
            GateSpec::Rotation { logical, .. } | GateSpec::Cnot { logical, .. } | GateSpec::Idle { logical, .. } => {
                logical
            }
        }
    }

    /// Number of code blocks (encoded) or bare qubits (physical) the gate acts on.
    pub fn n_units(&self) -> usize {
        match self {
            GateSpec::Cnot { .. } => 2,
            _ => 1,
        }
    }

    pub fn n_qubits(&self) -> usize {
        let per = if self.is_logical() { BLOCK_QUBITS } else { 1 };
        per * self.n_units()
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: f64, positive: bool| {
            if !v.is_finite() || (positive && v <= 0.0) {
                Err(Error::InvalidParameter(format!(
                    "{name} = {v} must be finite{}",
                    if positive { " and positive" } else { "" }
                )))
            } else {
                Ok(())
            }
        };
        match *self {
            GateSpec::Rotation { theta, phi, angle, omega0, .. } => {
                check("theta", theta, false)?;
                check("phi", phi, false)?;
                check("omega0", omega0, true)?;
                check("angle", angle, true)
            }
            GateSpec::Cnot { omega0, .. } => check("omega0", omega0, true),
            GateSpec::Idle { duration, .. } => check("duration", duration, true),
        }
    }

    /// Total gate time `t_g`.
    pub fn t_gate(&self) -> f64 {
        match *self {
            GateSpec::Rotation { angle, omega0, .. } => angle / omega0,
            GateSpec::Cnot { omega0, .. } => PI / omega0,
            GateSpec::Idle { duration, .. } => duration,
        }
    }

    pub fn hamiltonian(&self) -> Result<Operator> {
        self.validate()?;
        Ok(match *self {
            GateSpec::Rotation { theta, phi, omega0, logical, .. } => rot_hamiltonian(theta, phi, omega0, logical),
            GateSpec::Cnot { omega0, logical } => cnot_hamiltonian(omega0, logical),
            GateSpec::Idle { .. } => Operator::zeros(&vec![2; self.n_qubits()]),
        })
    }

    /// `U_S(t)` for `t ∈ [0, t_g]`.
    pub fn unitary(&self, t: f64) -> Result<Operator> {
        GateEvolution::new(self)?.unitary(t)
    }

    /// The ideal unitary the gate should implement at `t_g`, written directly
    /// rather than by exponentiating the Hamiltonian.
    pub fn target_unitary(&self) -> Result<Operator> {
        self.validate()?;
        let code = CodeSpec::phase_flip();
        let paulis = |block: usize, n_blocks: usize| -> Result<(Operator, Operator, Operator)> {
            if self.is_logical() {
                let (x, z, y) = code.logical_paulis();
                Ok((
                    code.embed(&x, block, n_blocks)?.dense(),
                    code.embed(&z, block, n_blocks)?.dense(),
                    code.embed(&y, block, n_blocks)?.dense(),
                ))
            } else {
                let p = |s: &str| PauliString::parse(s).map(|p| p.relabel(n_blocks, &[block]));
                Ok((p("X")??.dense(), p("Z")??.dense(), p("Y")??.dense()))
            }
        };
        let n = self.n_qubits();
        let id = Operator::qubit_identity(n);
        Ok(match *self {
            GateSpec::Rotation { theta, phi, angle, .. } => {
                let (x, z, y) = paulis(0, 1)?;
                let axis = z * theta.cos() + x * (theta.sin() * phi.cos()) + y * (theta.sin() * phi.sin());
                id * angle.cos() + axis * c(0.0, -angle.sin())
            }
            GateSpec::Cnot { .. } => {
                let (_, z1, _) = paulis(0, 2)?;
                let (x2, _, _) = paulis(1, 2)?;
                let low = (&id + &z1) * 0.5;
                let high = (&id - &z1) * 0.5;
                low + high * x2
            }
            GateSpec::Idle { .. } => id,
        })
    }
}

/// `ω₀ (σ_z cos θ + σ_x sin θ cos φ + σ_y sin θ sin φ)`, bare (2×2) or encoded (8×8).
pub fn rot_hamiltonian(theta: f64, phi: f64, omega0: f64, logical: bool) -> Operator {
    let (x, z) = if logical {
        let (x, z, _) = CodeSpec::phase_flip().logical_paulis();
        (x, z)
    } else {
        (PauliString::parse("X").expect("label"), PauliString::parse("Z").expect("label"))
    };
    let y = (&x * &z).times_i();
    (z.dense() * theta.cos() + x.dense() * (theta.sin() * phi.cos()) + y.dense() * (theta.sin() * phi.sin())) * omega0
}

/// `ω₀ (1 − σ_{1z})/2 · (1 − σ_{2x})/2`, bare (4×4) or encoded (64×64).
pub fn cnot_hamiltonian(omega0: f64, logical: bool) -> Operator {
    let (z1, x2) = if logical {
        let code = CodeSpec::phase_flip();
        let (x, z, _) = code.logical_paulis();
        (code.embed(&z, 0, 2).expect("block 0"), code.embed(&x, 1, 2).expect("block 1"))
    } else {
        (PauliString::parse("ZI").expect("label"), PauliString::parse("IX").expect("label"))
    };
    let id = Operator::qubit_identity(z1.n_qubits());
    let a = (&id - &z1.dense()) * 0.5;
    let b = (&id - &x2.dense()) * 0.5;
    (a * b) * omega0
}

/// A gate with its Hamiltonian diagonalized once, for repeated slicing.
#[derive(Clone, Debug)]
pub struct GateEvolution {
    spec: GateSpec,
    hamiltonian: Operator,
    spectrum: Spectrum,
}

impl GateEvolution {
    pub fn new(spec: &GateSpec) -> Result<Self> {
        let hamiltonian = spec.hamiltonian()?;
        let spectrum = Spectrum::of(&hamiltonian)?;
        Ok(Self { spec: spec.clone(), hamiltonian, spectrum })
    }

    pub fn spec(&self) -> &GateSpec {
        &self.spec
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn t_gate(&self) -> f64 {
        self.spec.t_gate()
    }

    /// `U_S(t)`, rejecting times outside the gate interval.
    pub fn unitary(&self, t: f64) -> Result<Operator> {
        let t_g = self.t_gate();
        // Allow roundoff from summing N slices.
        if !(t >= -1e-12 * t_g && t <= t_g * (1.0 + 1e-12)) {
            return Err(Error::TimeOutOfRange { t, t_gate: t_g });
        }
        Ok(self.spectrum.propagator(t))
    }

    /// One of `n` equal slices, `U_S(t_g / n)`.
    pub fn slice(&self, n: usize) -> Result<Operator> {
        if n == 0 {
            return Err(Error::InvalidParameter("a gate needs at least one slice".into()));
        }
        self.unitary(self.t_gate() / n as f64)
    }
}

/// Encoding isometry for `n_blocks` code blocks: columns are the logical
/// computational basis states in lexicographic order.
pub fn encoding_isometry(n_blocks: usize) -> Result<nalgebra::DMatrix<num_complex::Complex64>> {
    let code = CodeSpec::phase_flip();
    let n_logical = 1usize << n_blocks;
    let cols: Vec<Ket> = (0..n_logical)
        .map(|idx| {
            let kets: Vec<Ket> =
                (0..n_blocks).map(|b| code.codeword((idx >> (n_blocks - 1 - b)) & 1).clone()).collect();
            crate::operator::kron_kets(&kets)
        })
        .collect();
    Ok(nalgebra::DMatrix::from_columns(&cols))
}

/// Largest amplitude that leaves the code space, `max ‖(1 − P) U(t) ψ‖`, over
/// the sampled times and the logical basis states.
pub fn subspace_leakage(evolution: &GateEvolution, times: &[f64]) -> Result<f64> {
    if !evolution.spec().is_logical() {
        return Err(Error::UnsupportedGate("leakage is defined for encoded gates".into()));
    }
    leakage_of(evolution.hamiltonian(), evolution.spec().n_units(), times)
}

/// As [`subspace_leakage`] for an arbitrary Hamiltonian on `n_blocks` blocks.
pub fn leakage_of(h: &Operator, n_blocks: usize, times: &[f64]) -> Result<f64> {
    let code = CodeSpec::phase_flip();
    let p1 = code.code_projector();
    let proj = kron(&vec![p1; n_blocks])?;
    let out_of_code = Operator::identity(proj.dims()) - proj;
    let spectrum = Spectrum::of(h)?;
    let basis = encoding_isometry(n_blocks)?;
    let mut worst: f64 = 0.0;
    for &t in times {
        let u = spectrum.propagator(t);
        for col in basis.column_iter() {
            let psi: Ket = col.into_owned();
            worst = worst.max(out_of_code.apply(&u.apply(&psi)).norm());
        }
    }
    Ok(worst)
}

/// `max |⟨·|·⟩|` difference between `E† U_L E` and the physical gate, after
/// removing a global phase. Both gates are taken at `t_g`.
pub fn encoded_vs_physical(logical: &GateSpec) -> Result<f64> {
    let physical = match logical.clone() {
        GateSpec::Rotation { theta, phi, angle, omega0, .. } => {
            GateSpec::Rotation { theta, phi, angle, omega0, logical: false }
        }
        GateSpec::Cnot { omega0, .. } => GateSpec::Cnot { omega0, logical: false },
        GateSpec::Idle { duration, .. } => GateSpec::Idle { duration, logical: false },
    };
    let u_l = logical.unitary(logical.t_gate())?;
    let u_p = physical.unitary(physical.t_gate())?;
    let e = encoding_isometry(logical.n_units())?;
    let reduced = e.adjoint() * u_l.matrix() * &e;
    Ok(phase_aligned_distance(&reduced, u_p.matrix()))
}

/// `‖e^{iα} A − B‖_max` with the phase `α` chosen from `Tr(A† B)`.
pub fn phase_aligned_distance(
    a: &nalgebra::DMatrix<num_complex::Complex64>,
    b: &nalgebra::DMatrix<num_complex::Complex64>,
) -> f64 {
    let overlap = (a.adjoint() * b).trace();
    let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { c(1.0, 0.0) };
    (a * phase - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{basis_ket, pauli_exp};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn close_up_to_phase(a: &Operator, b: &Operator, tol: f64) -> bool {
        phase_aligned_distance(a.matrix(), b.matrix()) < tol
    }

    #[test]
    fn z_rotation() {
        let g = GateSpec::rotation(0.0, 0.0, FRAC_PI_2, false);
        let h = g.hamiltonian().unwrap();
        assert!((h - PauliString::parse("Z").unwrap().dense()).max_norm() < 1e-15);
        let u = g.unitary(g.t_gate()).unwrap();
        let expect = PauliString::parse("Z").unwrap().dense() * c(0.0, -1.0);
        assert!((u - expect).max_norm() < 1e-12);
        assert!((g.unitary(0.0).unwrap() - Operator::qubit_identity(1)).max_norm() < 1e-14);
    }

    #[test]
    fn x_rotation_hamiltonian() {
        let h = rot_hamiltonian(FRAC_PI_2, 0.0, 1.0, false);
        assert!((h - PauliString::parse("X").unwrap().dense()).max_norm() < 1e-15);
    }

    #[test]
    fn rotation_matches_closed_form_and_pauli_exponentials() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let (theta, phi, angle) =
                (rng.random::<f64>() * PI, rng.random::<f64>() * 2.0 * PI, 0.1 + rng.random::<f64>() * 3.0);
            let omega0 = 0.5 + rng.random::<f64>();
            let g = GateSpec::Rotation { theta, phi, angle, omega0, logical: false };
            let u = g.unitary(g.t_gate()).unwrap();
            assert!(close_up_to_phase(&u, &g.target_unitary().unwrap(), 1e-10));
            // exp(−i angle n·σ) through the Y-axis Pauli exponential is a second route.
            let n = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
            let axis = PauliString::parse("X").unwrap().dense() * n[0]
                + PauliString::parse("Y").unwrap().dense() * n[1]
                + PauliString::parse("Z").unwrap().dense() * n[2];
            let closed = Operator::qubit_identity(1) * angle.cos() + axis * c(0.0, -angle.sin());
            assert!((u.clone() - closed).max_norm() < 1e-10);

            let logical = GateSpec::Rotation { theta, phi, angle, omega0, logical: true };
            assert!(encoded_vs_physical(&logical).unwrap() < 1e-10);
            let ul = logical.unitary(logical.t_gate()).unwrap();
            assert!(close_up_to_phase(&ul, &logical.target_unitary().unwrap(), 1e-10));
        }
        let y_axis = GateSpec::rotation(FRAC_PI_2, FRAC_PI_2, 0.4, false).unitary(0.4).unwrap();
        assert!((y_axis - pauli_exp(&PauliString::parse("Y").unwrap(), 0.4).unwrap()).max_norm() < 1e-12);
    }

    #[test]
    fn printed_minus_sign_would_flip_the_y_axis() {
        // −i σx σz = −σy, so the printed sign generates a rotation about −y.
        let xz = PauliString::parse("X").unwrap() * PauliString::parse("Z").unwrap();
        assert_eq!(xz.times_i().neg(), PauliString::parse("-Y").unwrap());
        assert_eq!(xz.times_i(), PauliString::parse("Y").unwrap());
    }

    #[test]
    fn cnot_generation() {
        let g = GateSpec::cnot(false);
        let u = g.unitary(g.t_gate()).unwrap();
        assert!(close_up_to_phase(&u, &g.target_unitary().unwrap(), 1e-10));
        for (col, row) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
            assert!((u.apply(&basis_ket(4, col)) - basis_ket(4, row)).norm() < 1e-10);
        }
        assert!((g.unitary(0.0).unwrap() - Operator::qubit_identity(2)).max_norm() < 1e-14);
        assert!(g.hamiltonian().unwrap().is_hermitian());
    }

    #[test]
    fn half_cnot_is_square_root() {
        let g = GateSpec::cnot(false);
        let half = g.unitary(g.t_gate() / 2.0).unwrap();
        let full = g.unitary(g.t_gate()).unwrap();
        assert!(((&half * &half) - full).max_norm() < 1e-12);
        // Oracle: the projector Q = (1−Z)/2 (1−X)/2 gives e^{−iπQ/2} = 1 + (−i − 1) Q.
        let q = g.hamiltonian().unwrap();
        let expect = Operator::qubit_identity(2) + q * c(-1.0, -1.0);
        assert!(close_up_to_phase(&half, &expect, 1e-12));
    }

    #[test]
    fn logical_cnot_acts_on_codewords() {
        let g = GateSpec::cnot(true);
        assert_eq!(g.n_qubits(), 6);
        let u = g.unitary(g.t_gate()).unwrap();
        let e = encoding_isometry(2).unwrap();
        let cols = [0usize, 1, 3, 2];
        for (i, &j) in cols.iter().enumerate() {
            let out = u.apply(&e.column(i).into_owned());
            assert!((out - e.column(j).into_owned()).norm() < 1e-10);
        }
        assert!(encoded_vs_physical(&g).unwrap() < 1e-10);
        // The cross term contains the four-body string X0 Z3 Z4 Z5.
        let h = g.hamiltonian().unwrap();
        let four = PauliString::parse("XIIZZZ").unwrap().dense();
        let coeff = (four.matrix().adjoint() * h.matrix()).trace() / c(64.0, 0.0);
        assert!((coeff - c(0.25, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn logical_gates_stay_in_code() {
        let times: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
        let rot = GateSpec::rotation(FRAC_PI_2, FRAC_PI_2, 1.3, true);
        let evo = GateEvolution::new(&rot).unwrap();
        let ts: Vec<f64> = times.iter().map(|f| f * rot.t_gate()).collect();
        assert!(subspace_leakage(&evo, &ts).unwrap() < 1e-10);
        let cnot = GateSpec::cnot(true);
        let evo = GateEvolution::new(&cnot).unwrap();
        let ts: Vec<f64> = times.iter().map(|f| f * cnot.t_gate()).collect();
        assert!(subspace_leakage(&evo, &ts).unwrap() < 1e-10);
        assert!(subspace_leakage(&GateEvolution::new(&GateSpec::cnot(false)).unwrap(), &ts).is_err());
    }

    #[test]
    fn bare_phase_flip_generator_leaks() {
        let bad = PauliString::parse("ZII").unwrap().dense();
        let leak = leakage_of(&bad, 1, &[0.4, 0.8]).unwrap();
        assert!(leak > 0.3, "{leak}");
    }

    #[test]
    fn semigroup_and_range() {
        let g = GateSpec::rotation(0.7, 1.1, 2.0, true);
        let evo = GateEvolution::new(&g).unwrap();
        let (a, b) = (0.3, 1.2);
        let lhs = evo.unitary(a).unwrap() * evo.unitary(b).unwrap();
        assert!((lhs - evo.unitary(a + b).unwrap()).max_norm() < 1e-10);
        assert!(matches!(evo.unitary(2.5), Err(Error::TimeOutOfRange { .. })));
        assert!(matches!(evo.unitary(-0.1), Err(Error::TimeOutOfRange { .. })));
        let step = evo.slice(7).unwrap();
        let mut acc = Operator::qubit_identity(3);
        for _ in 0..7 {
            acc = &step * &acc;
        }
        assert!((acc - evo.unitary(2.0).unwrap()).max_norm() < 1e-10);
    }

    #[test]
    fn idle_gate_is_identity() {
        let g = GateSpec::idle(1.5, true);
        assert_eq!(g.t_gate(), 1.5);
        assert!((g.unitary(1.5).unwrap() - Operator::qubit_identity(3)).max_norm() < 1e-15);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(GateSpec::rotation(0.0, 0.0, -1.0, false).hamiltonian().is_err());
        assert!(GateSpec::Cnot { omega0: 0.0, logical: false }.hamiltonian().is_err());
        assert!(GateSpec::idle(f64::NAN, false).hamiltonian().is_err());
    }
}
