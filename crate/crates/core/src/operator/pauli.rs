use std::collections::BTreeMap;
use std::fmt;
use std::ops::Mul;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{c, Ket, Matrix, Operator, C64};
use crate::error::{Error, Result};

/// Single-qubit Pauli axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    /// `self * other = i^k * result`, with `result` `None` for the identity.
    fn product(self, other: Pauli) -> (u8, Option<Pauli>) {
        use Pauli::*;
        match (self, other) {
            (a, b) if a == b => (0, None),
            (X, Y) => (1, Some(Z)),
            (Y, Z) => (1, Some(X)),
            (Z, X) => (1, Some(Y)),
            (Y, X) => (3, Some(Z)),
            (Z, Y) => (3, Some(X)),
            (X, Z) => (3, Some(Y)),
            _ => unreachable!(),
        }
    }

    pub fn matrix(self) -> Matrix {
        let (o, l) = (c(0.0, 0.0), c(1.0, 0.0));
        match self {
            Pauli::X => Matrix::from_row_slice(2, 2, &[o, l, l, o]),
            Pauli::Y => Matrix::from_row_slice(2, 2, &[o, c(0.0, -1.0), c(0.0, 1.0), o]),
            Pauli::Z => Matrix::from_row_slice(2, 2, &[l, o, o, -l]),
        }
    }

    pub fn label(self) -> char {
        match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

impl FromStr for Pauli {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "X" | "x" => Ok(Pauli::X),
            "Y" | "y" => Ok(Pauli::Y),
            "Z" | "z" => Ok(Pauli::Z),
            other => Err(Error::InvalidPauli(format!("unknown axis {other:?}"))),
        }
    }
}

/// Global phase of a Pauli string, an element of `{+1, +i, -1, -i}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    /// `i^k`
    pub fn from_power(k: u8) -> Self {
        Phase(k % 4)
    }

    pub fn power(self) -> u8 {
        self.0
    }

    pub fn is_real(self) -> bool {
        self.0.is_multiple_of(2)
    }

    pub fn value(self) -> C64 {
        match self.0 {
            0 => c(1.0, 0.0),
            1 => c(0.0, 1.0),
            2 => c(-1.0, 0.0),
            _ => c(0.0, -1.0),
        }
    }

    pub fn conj(self) -> Self {
        Phase((4 - self.0) % 4)
    }
}

impl Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(["+", "+i", "-", "-i"][self.0 as usize])
    }
}

/// Signed tensor product of single-qubit Paulis on `n_qubits` qubits.
///
/// Qubits missing from `factors` carry the identity. Products track the phase
/// exactly, so the result of any chain of multiplications stays in the Pauli
/// group.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    n_qubits: usize,
    factors: BTreeMap<usize, Pauli>,
    phase: Phase,
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        Self { n_qubits, factors: BTreeMap::new(), phase: Phase::ONE }
    }

    pub fn new(n_qubits: usize, factors: &[(usize, Pauli)]) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidPauli("zero qubits".into()));
        }
        let mut out = Self::identity(n_qubits);
        for &(q, p) in factors {
            if q >= n_qubits {
                return Err(Error::InvalidPauli(format!("qubit {q} out of range for {n_qubits} qubits")));
            }
            if out.factors.insert(q, p).is_some() {
                return Err(Error::InvalidPauli(format!("qubit {q} listed twice")));
            }
        }
        Ok(out)
    }

    pub fn single(n_qubits: usize, qubit: usize, axis: Pauli) -> Result<Self> {
        Self::new(n_qubits, &[(qubit, axis)])
    }

    /// Parses a dense label such as `"ZXI"`, `"-YZ"` or `"iXX"`.
    pub fn parse(label: &str) -> Result<Self> {
        label.parse()
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = phase;
        self
    }

    pub fn get(&self, qubit: usize) -> Option<Pauli> {
        self.factors.get(&qubit).copied()
    }

    pub fn factors(&self) -> impl Iterator<Item = (usize, Pauli)> + '_ {
        self.factors.iter().map(|(&q, &p)| (q, p))
    }

    pub fn support(&self) -> Vec<usize> {
        self.factors.keys().copied().collect()
    }

    pub fn weight(&self) -> usize {
        self.factors.len()
    }

    /// Hermitian iff the phase is real.
    pub fn is_hermitian(&self) -> bool {
        self.phase.is_real()
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let anti = self.factors.iter().filter(|(q, p)| other.factors.get(q).is_some_and(|o| o != *p)).count();
        anti % 2 == 0
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        out.phase = out.phase * Phase::MINUS_ONE;
        out
    }

    pub fn times_i(&self) -> Self {
        let mut out = self.clone();
        out.phase = out.phase * Phase::I;
        out
    }

    pub fn adjoint(&self) -> Self {
        let mut out = self.clone();
        out.phase = out.phase.conj();
        out
    }

    /// Same factors with the phase reset to `+1`.
    pub fn unsigned(&self) -> Self {
        self.clone().with_phase(Phase::ONE)
    }

    /// Embeds the string into a larger register, mapping qubit `q` to
    /// `mapping[q]`.
    pub fn relabel(&self, n_qubits: usize, mapping: &[usize]) -> Result<Self> {
        let pairs: Vec<(usize, Pauli)> = self
            .factors
            .iter()
            .map(|(&q, &p)| {
                mapping.get(q).map(|&m| (m, p)).ok_or_else(|| Error::InvalidPauli(format!("no mapping for qubit {q}")))
            })
            .collect::<Result<_>>()?;
        Ok(Self::new(n_qubits, &pairs)?.with_phase(self.phase))
    }

    pub fn try_mul(&self, rhs: &PauliString) -> Result<PauliString> {
        if self.n_qubits != rhs.n_qubits {
            return Err(Error::DimensionMismatch(format!(
                "Pauli strings on {} and {} qubits",
                self.n_qubits, rhs.n_qubits
            )));
        }
        let mut power = self.phase.power() + rhs.phase.power();
        let mut factors = self.factors.clone();
        for (&q, &p) in &rhs.factors {
            match factors.get(&q).copied() {
                None => {
                    factors.insert(q, p);
                }
                Some(l) => {
                    let (k, r) = l.product(p);
                    power += k;
                    match r {
                        Some(r) => factors.insert(q, r),
                        None => factors.remove(&q),
                    };
                }
            }
        }
        Ok(PauliString { n_qubits: self.n_qubits, factors, phase: Phase::from_power(power) })
    }

    /// Applies the string to a ket whose leading factors are these qubits.
    ///
    /// The ket may carry trailing factors (a bath, say) of total dimension
    /// `psi.len() / 2^n`; they are left untouched.
    pub fn apply_ket(&self, psi: &Ket) -> Result<Ket> {
        let n = self.n_qubits;
        let side = 1usize << n;
        if !psi.len().is_multiple_of(side) {
            return Err(Error::DimensionMismatch(format!("ket of length {} for a {n}-qubit string", psi.len())));
        }
        let tail = psi.len() / side;
        let (flip, zmask, n_y) = self.masks();
        let base = (self.phase * Phase::from_power(n_y)).value();
        let mut out = Ket::zeros(psi.len());
        for col in 0..side {
            let sign = if (col & zmask).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            let z = base * sign;
            let row = col ^ flip;
            for e in 0..tail {
                out[row * tail + e] = psi[col * tail + e] * z;
            }
        }
        Ok(out)
    }

    fn masks(&self) -> (usize, usize, u8) {
        let n = self.n_qubits;
        let mut flip = 0usize;
        let mut zmask = 0usize;
        let mut n_y = 0u8;
        for (&q, &p) in &self.factors {
            let bit = 1usize << (n - 1 - q);
            match p {
                Pauli::X => flip |= bit,
                Pauli::Y => {
                    flip |= bit;
                    zmask |= bit;
                    n_y += 1;
                }
                Pauli::Z => zmask |= bit,
            }
        }
        (flip, zmask, n_y)
    }

    /// Dense `2^n x 2^n` matrix.
    pub fn dense(&self) -> Operator {
        let n = self.n_qubits;
        let side = 1usize << n;
        let (flip, zmask, n_y) = self.masks();
        // Y = i X Z, so each Y contributes a factor i and a Z applied first.
        let base = (self.phase * Phase::from_power(n_y)).value();
        let mut m = Matrix::zeros(side, side);
        for col in 0..side {
            let sign = if (col & zmask).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            m[(col ^ flip, col)] = base * sign;
        }
        Operator::new(vec![2; n], m).expect("dims are valid by construction")
    }
}

impl Mul for &PauliString {
    type Output = PauliString;

    /// # Panics
    /// Panics if the strings act on different register sizes.
    fn mul(self, rhs: &PauliString) -> PauliString {
        self.try_mul(rhs).expect("Pauli strings on different registers")
    }
}

impl Mul for PauliString {
    type Output = PauliString;
    fn mul(self, rhs: PauliString) -> PauliString {
        &self * &rhs
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (phase, body) = if let Some(rest) = s.strip_prefix("-i") {
            (Phase::MINUS_I, rest)
        } else if let Some(rest) = s.strip_prefix("+i") {
            (Phase::I, rest)
        } else if let Some(rest) = s.strip_prefix('i') {
            (Phase::I, rest)
        } else if let Some(rest) = s.strip_prefix('-') {
            (Phase::MINUS_ONE, rest)
        } else if let Some(rest) = s.strip_prefix('+') {
            (Phase::ONE, rest)
        } else {
            (Phase::ONE, s)
        };
        if body.is_empty() {
            return Err(Error::InvalidPauli(format!("empty label {s:?}")));
        }
        let mut factors = Vec::new();
        for (q, ch) in body.chars().enumerate() {
            match ch {
                'I' | '_' => {}
                'X' => factors.push((q, Pauli::X)),
                'Y' => factors.push((q, Pauli::Y)),
                'Z' => factors.push((q, Pauli::Z)),
                other => return Err(Error::InvalidPauli(format!("bad character {other:?} in {s:?}"))),
            }
        }
        Ok(Self::new(body.chars().count(), &factors)?.with_phase(phase))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.phase != Phase::ONE {
            write!(f, "{}", self.phase)?;
        }
        for q in 0..self.n_qubits {
            let ch = self.factors.get(&q).map_or('I', |p| p.label());
            write!(f, "{ch}")?;
        }
        Ok(())
    }
}
