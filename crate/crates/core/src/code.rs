//! The three-qubit phase-flip code.
//!
//! Codewords are `|0_L⟩ = |+++⟩` and `|1_L⟩ = |−−−⟩`. The stabilizer
//! generators are `X₁X₂` and `X₂X₃`; a phase flip on one qubit anticommutes
//! with the generators that touch it, which gives the syndrome table
//!
//! | syndrome | correction |
//! |----------|------------|
//! | (0, 0)   | none       |
//! | (1, 0)   | `Z₁`       |
//! | (1, 1)   | `Z₂`       |
//! | (0, 1)   | `Z₃`       |
//!
//! Registers may hold several code blocks: block `b` occupies qubits
//! `3b, 3b+1, 3b+2`. Kets may carry trailing non-qubit factors (a bath),
//! which every operation here leaves alone.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{c, kron_kets, DensityMatrix, Ket, Operator, Pauli, PauliString};

pub const BLOCK_QUBITS: usize = 3;

/// Norm below which a projected state counts as impossible.
pub const IMPOSSIBLE_NORM: f64 = 1e-14;

/// Outcomes of the two stabilizer measurements; `true` means eigenvalue −1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Syndrome(pub [bool; 2]);

impl Syndrome {
    pub const TRIVIAL: Syndrome = Syndrome([false, false]);
    pub const ALL: [Syndrome; 4] =
        [Syndrome([false, false]), Syndrome([true, false]), Syndrome([true, true]), Syndrome([false, true])];

    pub fn is_trivial(self) -> bool {
        self == Self::TRIVIAL
    }

    /// Qubit within the block that the syndrome blames, if any.
    pub fn correction_qubit(self) -> Option<usize> {
        match self.0 {
            [false, false] => None,
            [true, false] => Some(0),
            [true, true] => Some(1),
            [false, true] => Some(2),
        }
    }

    /// Syndrome produced by a phase flip on `qubit` (or by no error).
    pub fn of_flip(qubit: Option<usize>) -> Self {
        match qubit {
            None => Self::ALL[0],
            Some(q) => Self::ALL[q + 1],
        }
    }

    /// Position in [`Syndrome::ALL`].
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|s| *s == self).expect("all four syndromes are listed")
    }
}

impl fmt::Display for Syndrome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.0[0] as u8, self.0[1] as u8)
    }
}

/// The code: basis vectors, stabilizers and logical operators.
#[derive(Clone, Debug)]
pub struct CodeSpec {
    zero: Ket,
    one: Ket,
    stabilizers: [PauliString; 2],
    sigma_x: PauliString,
    sigma_z: PauliString,
    sigma_y: PauliString,
}

impl Default for CodeSpec {
    fn default() -> Self {
        Self::phase_flip()
    }
}

impl CodeSpec {
    pub fn phase_flip() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = Ket::from_vec(vec![c(h, 0.0), c(h, 0.0)]);
        let minus = Ket::from_vec(vec![c(h, 0.0), c(-h, 0.0)]);
        let zero = kron_kets(&[plus.clone(), plus.clone(), plus]);
        let one = kron_kets(&[minus.clone(), minus.clone(), minus]);
        let p = |s: &str| PauliString::parse(s).expect("static label");
        let sigma_x = p("ZZZ");
        let sigma_z = p("XII");
        let sigma_y = (&sigma_x * &sigma_z).times_i();
        Self { zero, one, stabilizers: [p("XXI"), p("IXX")], sigma_x, sigma_z, sigma_y }
    }

    /// `|m_L⟩` for `m ∈ {0, 1}`.
    pub fn codeword(&self, m: usize) -> &Ket {
        if m == 0 {
            &self.zero
        } else {
            &self.one
        }
    }

    pub fn stabilizers(&self) -> &[PauliString; 2] {
        &self.stabilizers
    }

    /// `(σ_Lx, σ_Lz, σ_Ly)` with `σ_Ly = i σ_Lx σ_Lz`.
    pub fn logical_paulis(&self) -> (PauliString, PauliString, PauliString) {
        (self.sigma_x.clone(), self.sigma_z.clone(), self.sigma_y.clone())
    }

    /// `α|0_L⟩ + β|1_L⟩`
    pub fn encode(&self, alpha: num_complex::Complex64, beta: num_complex::Complex64) -> Result<Ket> {
        let norm = alpha.norm_sqr() + beta.norm_sqr();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized(norm));
        }
        Ok(&self.zero * alpha + &self.one * beta)
    }

    /// `|0_L⟩⟨0_L| + |1_L⟩⟨1_L|`
    pub fn code_projector(&self) -> Operator {
        let m = &self.zero * self.zero.adjoint() + &self.one * self.one.adjoint();
        Operator::new(vec![2; BLOCK_QUBITS], m).expect("8x8")
    }

    /// Places a block-local string on block `block` of an `n_blocks` register.
    pub fn embed(&self, p: &PauliString, block: usize, n_blocks: usize) -> Result<PauliString> {
        if block >= n_blocks {
            return Err(Error::InvalidParameter(format!("block {block} of {n_blocks}")));
        }
        let base = BLOCK_QUBITS * block;
        p.relabel(BLOCK_QUBITS * n_blocks, &[base, base + 1, base + 2])
    }

    fn embedded_stabilizers(&self, block: usize, n_blocks: usize) -> Result<[PauliString; 2]> {
        Ok([self.embed(&self.stabilizers[0], block, n_blocks)?, self.embed(&self.stabilizers[1], block, n_blocks)?])
    }

    /// `P_s ψ` for all four syndromes of one block, unnormalized, in the order
    /// of [`Syndrome::ALL`].
    pub fn syndrome_branches(&self, psi: &Ket, block: usize, n_blocks: usize) -> Result<[Ket; 4]> {
        let [s1, s2] = self.embedded_stabilizers(block, n_blocks)?;
        let a = s1.apply_ket(psi)?;
        let b = s2.apply_ket(psi)?;
        let ab = s1.apply_ket(&b)?;
        Ok(Syndrome::ALL.map(|s| {
            let g1 = if s.0[0] { -1.0 } else { 1.0 };
            let g2 = if s.0[1] { -1.0 } else { 1.0 };
            (psi + &a * c(g1, 0.0) + &b * c(g2, 0.0) + &ab * c(g1 * g2, 0.0)) * c(0.25, 0.0)
        }))
    }

    /// Born probabilities of the four syndromes of one block.
    pub fn syndrome_probabilities(&self, psi: &Ket, block: usize, n_blocks: usize) -> Result<[f64; 4]> {
        Ok(self.syndrome_branches(psi, block, n_blocks)?.map(|k| k.norm_squared()))
    }

    /// Normalized post-measurement state for a chosen outcome, with its probability.
    pub fn project(&self, psi: &Ket, s: Syndrome, block: usize, n_blocks: usize) -> Result<(Ket, f64)> {
        let branch = self.syndrome_branches(psi, block, n_blocks)?[s.index()].clone();
        let norm = branch.norm();
        if norm < IMPOSSIBLE_NORM {
            return Err(Error::ImpossibleOutcome(norm * norm));
        }
        Ok((branch / c(norm, 0.0), norm * norm / psi.norm_squared()))
    }

    /// Projective measurement of both stabilizers of one block.
    pub fn measure_syndrome<R: Rng + ?Sized>(
        &self,
        psi: &Ket,
        block: usize,
        n_blocks: usize,
        rng: &mut R,
    ) -> Result<(Syndrome, Ket)> {
        let probs = self.syndrome_probabilities(psi, block, n_blocks)?;
        let s = sample_outcome(&probs, rng.random::<f64>());
        let (post, _) = self.project(psi, s, block, n_blocks)?;
        Ok((s, post))
    }

    /// Applies the correction the syndrome names.
    pub fn recover(&self, psi: &Ket, s: Syndrome, block: usize, n_blocks: usize) -> Result<Ket> {
        match s.correction_qubit() {
            None => Ok(psi.clone()),
            Some(q) => self.embed(&PauliString::single(BLOCK_QUBITS, q, Pauli::Z)?, block, n_blocks)?.apply_ket(psi),
        }
    }

    /// Syndrome projector of one block as a dense register operator.
    pub fn syndrome_projector(&self, s: Syndrome, block: usize, n_blocks: usize) -> Result<Operator> {
        let [s1, s2] = self.embedded_stabilizers(block, n_blocks)?;
        let id = Operator::qubit_identity(BLOCK_QUBITS * n_blocks);
        let g1 = if s.0[0] { -0.5 } else { 0.5 };
        let g2 = if s.0[1] { -0.5 } else { 0.5 };
        Ok((&id * 0.5 + s1.dense() * g1) * (&id * 0.5 + s2.dense() * g2))
    }

    /// Born probabilities of the four syndromes for a single-block mixed state.
    pub fn syndrome_probabilities_mixed(&self, rho: &DensityMatrix) -> Result<[f64; 4]> {
        let mut out = [0.0; 4];
        for (slot, s) in out.iter_mut().zip(Syndrome::ALL) {
            let p = self.syndrome_projector(s, 0, 1)?;
            *slot = (p.matrix() * rho.operator().matrix()).trace().re.max(0.0);
        }
        Ok(out)
    }

    /// `P_s ρ P_s / Tr(P_s ρ)` for a single-block mixed state.
    pub fn project_mixed(&self, rho: &DensityMatrix, s: Syndrome) -> Result<(DensityMatrix, f64)> {
        let p = self.syndrome_projector(s, 0, 1)?;
        let branch = &(&p * rho.operator()) * &p;
        let prob = branch.trace().re;
        if prob < IMPOSSIBLE_NORM * IMPOSSIBLE_NORM {
            return Err(Error::ImpossibleOutcome(prob));
        }
        let post = DensityMatrix::with_tolerance((branch * (1.0 / prob)).hermitian_part(), 1e-8, -1e-8)?;
        Ok((post, prob))
    }

    pub fn measure_syndrome_mixed<R: Rng + ?Sized>(
        &self,
        rho: &DensityMatrix,
        rng: &mut R,
    ) -> Result<(Syndrome, DensityMatrix)> {
        let probs = self.syndrome_probabilities_mixed(rho)?;
        let s = sample_outcome(&probs, rng.random::<f64>());
        Ok((s, self.project_mixed(rho, s)?.0))
    }

    pub fn recover_mixed(&self, rho: &DensityMatrix, s: Syndrome) -> Result<DensityMatrix> {
        match s.correction_qubit() {
            None => Ok(rho.clone()),
            Some(q) => {
                let z = PauliString::single(BLOCK_QUBITS, q, Pauli::Z)?.dense();
                DensityMatrix::with_tolerance((&(&z * rho.operator()) * &z).hermitian_part(), 1e-8, -1e-8)
            }
        }
    }
}

/// Picks an outcome from unnormalized probabilities with a uniform draw `r ∈ [0, 1)`.
pub fn sample_outcome(probs: &[f64; 4], r: f64) -> Syndrome {
    let total: f64 = probs.iter().sum();
    let mut acc = 0.0;
    let target = r * total;
    let mut last = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p <= 0.0 {
            continue;
        }
        last = i;
        acc += p;
        if target < acc {
            return Syndrome::ALL[i];
        }
    }
    Syndrome::ALL[last]
}
