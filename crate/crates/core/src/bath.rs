//! Environment models.
//!
//! [`BathModel`] is an exact finite environment: one two-level bath mode per
//! system qubit, coupled linearly through `S_k ⊗ (a_k + a_k†)`. Joint operators
//! list the system qubits first and the bath modes after them, so the joint
//! factor dimensions are `[2; n_sys]` followed by `[2; n_sys]`.
//!
//! [`StochasticChannel`] replaces the bath by independent Pauli flips, which is
//! what large Monte-Carlo protocol runs use.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{
    basis_ket, c, expm_hermitian, kron, partial_trace, DensityMatrix, Ket, Matrix, Operator, Pauli, PauliString,
    Spectrum,
};

/// Tolerance for the vanishing first-order trace `Tr_E{H_I(t) ρ_E} = 0`.
pub const FIRST_ORDER_TOL: f64 = 1e-12;

/// `ω_k = 1 + 0.1 k`
pub fn default_frequencies(n_sys: usize) -> Vec<f64> {
    (0..n_sys).map(|k| 1.0 + 0.1 * k as f64).collect()
}

/// System plus truncated bosonic environment, `H = H_S + H_E + λ H_int`.
#[derive(Clone, Debug)]
pub struct BathModel {
    n_sys: usize,
    frequencies: Vec<f64>,
    couplings: Vec<PauliString>,
    lambda: f64,
    env_init: DensityMatrix,
    h_env: Operator,
    h_int: Operator,
    degenerate: bool,
}

/// Phase-flip environment: `S_k = Z_k`, `H_E = Σ ω_k n_k`, vacuum initial state.
pub fn build_dephasing_bath(n_sys: usize, frequencies: &[f64], lambda: f64) -> Result<BathModel> {
    let couplings = (0..n_sys).map(|k| PauliString::single(n_sys.max(1), k, Pauli::Z)).collect::<Result<Vec<_>>>()?;
    BathModel::new(n_sys, frequencies, couplings, lambda)
}

impl BathModel {
    /// Generic linear coupling with one bath mode per entry of `couplings`.
    pub fn new(n_sys: usize, frequencies: &[f64], couplings: Vec<PauliString>, lambda: f64) -> Result<Self> {
        if n_sys < 1 {
            return Err(Error::InvalidParameter("a bath needs at least one system qubit".into()));
        }
        if frequencies.len() != n_sys || couplings.len() != n_sys {
            return Err(Error::InvalidParameter(format!(
                "{n_sys} system qubits need {n_sys} frequencies and couplings, got {} and {}",
                frequencies.len(),
                couplings.len()
            )));
        }
        if let Some(w) = frequencies.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidParameter(format!("bath frequency {w} must be finite and non-negative")));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("coupling strength {lambda} must be finite and >= 0")));
        }
        for s in &couplings {
            if s.n_qubits() != n_sys || !s.is_hermitian() {
                return Err(Error::InvalidParameter(format!("coupling {s} is not a Hermitian {n_sys}-qubit string")));
            }
        }
        let degenerate =
            frequencies.iter().enumerate().any(|(i, a)| frequencies[..i].iter().any(|b| (a - b).abs() < 1e-12));

        let n_total = 2 * n_sys;
        let mut h_env = Operator::qubit_identity(n_total) * 0.0;
        let mut h_int = h_env.clone();
        let id_bath = Operator::qubit_identity(n_sys);
        for k in 0..n_sys {
            let mode = n_sys + k;
            // n_k = (1 - Z_k)/2 on the bath mode
            let z = PauliString::single(n_total, mode, Pauli::Z)?.dense();
            let number = (Operator::qubit_identity(n_total) - z) * 0.5;
            h_env += &(number * frequencies[k]);
            // a + a† = X on the truncated mode
            let s = kron(&[couplings[k].dense(), id_bath.clone()])?;
            let x = PauliString::single(n_total, mode, Pauli::X)?.dense();
            h_int += &(s * x);
        }

        let env_init = DensityMatrix::pure(&vec![2; n_sys], &basis_ket(1 << n_sys, 0))?;
        let model =
            Self { n_sys, frequencies: frequencies.to_vec(), couplings, lambda, env_init, h_env, h_int, degenerate };
        model.check_first_order(&model.env_init)?;
        Ok(model)
    }

    /// Replaces the initial environment state after checking the first-order
    /// trace condition for it.
    pub fn with_env_init(mut self, env: DensityMatrix) -> Result<Self> {
        if env.dims() != self.bath_dims().as_slice() {
            return Err(Error::DimensionMismatch(format!(
                "environment state on {:?}, bath is {:?}",
                env.dims(),
                self.bath_dims()
            )));
        }
        self.check_first_order(&env)?;
        self.env_init = env;
        Ok(self)
    }

    /// Same model with a different coupling strength.
    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("coupling strength {lambda} must be finite and >= 0")));
        }
        self.lambda = lambda;
        Ok(self)
    }

    fn check_first_order(&self, env: &DensityMatrix) -> Result<()> {
        // H_I(t) only adds phases to the off-diagonal bath blocks; checking a
        // handful of times covers a non-diagonal environment state as well.
        for t in [0.0, 0.3, 1.7, 2.9] {
            let worst = self.first_order_trace_with(env, t)?;
            if worst > FIRST_ORDER_TOL {
                return Err(Error::FirstOrderTrace(worst));
            }
        }
        Ok(())
    }

    /// `‖Tr_E{H_I(t) (I_S ⊗ ρ_E)}‖_max`
    pub fn first_order_trace(&self, t: f64) -> f64 {
        self.first_order_trace_with(&self.env_init, t).expect("dims validated at construction")
    }

    fn first_order_trace_with(&self, env: &DensityMatrix, t: f64) -> Result<f64> {
        let rho = kron(&[Operator::qubit_identity(self.n_sys), env.operator().clone()])?;
        let prod = self.interaction_picture_h(t) * rho;
        Ok(partial_trace(&prod, &self.system_factors())?.max_norm())
    }

    pub fn n_sys(&self) -> usize {
        self.n_sys
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn couplings(&self) -> &[PauliString] {
        &self.couplings
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn env_init(&self) -> &DensityMatrix {
        &self.env_init
    }

    /// True when two bath modes share a frequency.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// `H_E` on the joint space.
    pub fn h_env(&self) -> &Operator {
        &self.h_env
    }

    /// `H_int` on the joint space, without the factor λ.
    pub fn h_int(&self) -> &Operator {
        &self.h_int
    }

    pub fn joint_dims(&self) -> Vec<usize> {
        vec![2; 2 * self.n_sys]
    }

    pub fn bath_dims(&self) -> Vec<usize> {
        vec![2; self.n_sys]
    }

    /// Factor indices of the system qubits inside the joint space.
    pub fn system_factors(&self) -> Vec<usize> {
        (0..self.n_sys).collect()
    }

    /// Vacuum ket of the bath.
    pub fn vacuum(&self) -> Ket {
        basis_ket(1 << self.n_sys, 0)
    }

    /// Lifts a system-only operator to the joint space, or validates that a
    /// joint-space operator acts trivially on the bath.
    pub fn lift_system(&self, h_s: &Operator) -> Result<Operator> {
        let d_sys = 1usize << self.n_sys;
        if h_s.dim() == d_sys {
            return Ok(h_s.clone().with_dims(vec![2; self.n_sys])?.extend_right(&self.bath_dims()));
        }
        if h_s.dim() != d_sys * d_sys {
            return Err(Error::DimensionMismatch(format!(
                "operator of side {} is neither system ({d_sys}) nor joint ({})",
                h_s.dim(),
                d_sys * d_sys
            )));
        }
        let joint = h_s.clone().with_dims(self.joint_dims())?;
        let reduced = partial_trace(&joint, &self.system_factors())? * (1.0 / d_sys as f64);
        let rebuilt = reduced.extend_right(&self.bath_dims());
        let defect = (&rebuilt - &joint).max_norm();
        if defect > 1e-12 * joint.max_norm().max(1.0) {
            return Err(Error::BathSupport(format!("deviation from A ⊗ I_E is {defect:.3e}")));
        }
        Ok(rebuilt)
    }

    /// `H_S ⊗ I + H_E + λ H_int`
    pub fn total_hamiltonian(&self, h_s: Option<&Operator>) -> Result<Operator> {
        let mut h = &self.h_env + &(&self.h_int * self.lambda);
        if let Some(h_s) = h_s {
            h += &self.lift_system(h_s)?;
        }
        Ok(h)
    }

    /// `H_I(t) = U_E†(t) H_int U_E(t)`.
    ///
    /// `H_E` is diagonal in the computational basis, so the conjugation only
    /// multiplies entry `(a, b)` by `e^{i(E_a − E_b)t}`.
    pub fn interaction_picture_h(&self, t: f64) -> Operator {
        let energies: Vec<f64> = (0..self.h_env.dim()).map(|i| self.h_env.matrix()[(i, i)].re).collect();
        let m = self.h_int.matrix();
        let out =
            Matrix::from_fn(m.nrows(), m.ncols(), |a, b| m[(a, b)] * c(0.0, (energies[a] - energies[b]) * t).exp());
        Operator::new(self.joint_dims(), out).expect("joint dims")
    }

    /// `H̃_I(t) = U_S†(t) H_I(t) U_S(t)`.
    pub fn gate_frame_h(&self, h_s: &Operator, t: f64) -> Result<Operator> {
        Ok(GateFrame::new(self, Some(h_s))?.h_tilde(t))
    }

    /// `ρ_S ⊗ ρ_E`
    pub fn joint_state(&self, rho_s: &DensityMatrix) -> Result<Operator> {
        if rho_s.operator().dim() != 1 << self.n_sys {
            return Err(Error::DimensionMismatch(format!(
                "system state of side {} for {} qubits",
                rho_s.operator().dim(),
                self.n_sys
            )));
        }
        kron(&[rho_s.operator().clone().with_dims(vec![2; self.n_sys])?, self.env_init.operator().clone()])
    }

    /// Exact reduced system state after joint evolution for time `t`.
    pub fn exact_reduced_state(&self, h_s: Option<&Operator>, rho_s: &DensityMatrix, t: f64) -> Result<Operator> {
        let u = expm_hermitian(&self.total_hamiltonian(h_s)?, t)?;
        let rho = self.joint_state(rho_s)?;
        let evolved = &(&u * &rho) * &u.adjoint();
        partial_trace(&evolved, &self.system_factors())
    }
}

/// Eigenbasis of `H_0 = H_S ⊗ I + H_E`, from which `H̃_I(τ)` is evaluated at
/// any time with two diagonal phase multiplications.
///
/// Because `H_S ⊗ I` and `H_E` commute, `U_E(τ) U_S(τ) = e^{−i H_0 τ}` and
/// `H̃_I(τ) = e^{i H_0 τ} H_int e^{−i H_0 τ}`. In the eigenbasis of `H_0`
/// with eigenvalues `ε_a` this is `G_ab e^{i(ε_a − ε_b)τ}` where
/// `G = V† H_int V`.
#[derive(Clone, Debug)]
pub struct GateFrame {
    dims: Vec<usize>,
    spectrum: Spectrum,
    coupling: Matrix,
}

impl GateFrame {
    pub fn new(bath: &BathModel, h_s: Option<&Operator>) -> Result<Self> {
        let mut h0 = bath.h_env().clone();
        if let Some(h_s) = h_s {
            h0 += &bath.lift_system(h_s)?;
        }
        let spectrum = Spectrum::of(&h0)?;
        let coupling = spectrum.to_eigenbasis(bath.h_int().matrix());
        Ok(Self { dims: bath.joint_dims(), spectrum, coupling })
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// `H̃_I(τ)` expressed in the eigenbasis of `H_0`.
    pub fn h_tilde_eigen(&self, tau: f64) -> Matrix {
        let e = self.spectrum.values();
        let g = &self.coupling;
        Matrix::from_fn(g.nrows(), g.ncols(), |a, b| g[(a, b)] * c(0.0, (e[a] - e[b]) * tau).exp())
    }

    /// `H̃_I(τ)` in the computational basis.
    pub fn h_tilde(&self, tau: f64) -> Operator {
        let m = self.spectrum.from_eigenbasis(&self.h_tilde_eigen(tau));
        Operator::new(self.dims.clone(), m).expect("joint dims").hermitian_part()
    }

    pub fn to_eigenbasis(&self, a: &Operator) -> Matrix {
        self.spectrum.to_eigenbasis(a.matrix())
    }

    pub fn from_eigenbasis(&self, a: &Matrix) -> Operator {
        Operator::new(self.dims.clone(), self.spectrum.from_eigenbasis(a)).expect("joint dims")
    }
}

/// `‖H̃_I(Δt) − H_I(Δt)‖₂`, the amount by which the gate changes the noise
/// frame over one step.
pub fn step_commutation_residual(bath: &BathModel, h_s: &Operator, dt: f64) -> Result<f64> {
    if dt == 0.0 {
        return Ok(0.0);
    }
    let tilde = bath.gate_frame_h(h_s, dt)?;
    Ok((tilde - bath.interaction_picture_h(dt)).spectral_norm())
}

/// Per-step flip probability `p = calibration · (λ Δt)²`, clamped to 1.
pub fn calibrated_flip_probability(lambda: f64, dt: f64, calibration: f64) -> f64 {
    (calibration * (lambda * dt).powi(2)).clamp(0.0, 1.0)
}

/// Independent single-qubit Pauli flips with probability `p` per qubit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StochasticChannel {
    pub axis: Pauli,
    pub p: f64,
    pub seed: u64,
}

impl StochasticChannel {
    pub fn new(axis: Pauli, p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("flip probability {p} outside [0, 1]")));
        }
        Ok(Self { axis, p, seed })
    }

    pub fn phase_flip(p: f64, seed: u64) -> Result<Self> {
        Self::new(Pauli::Z, p, seed)
    }

    /// A fresh generator for this channel's seed.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// Qubits hit during one step, in increasing order.
    pub fn sample_errors<R: Rng + ?Sized>(&self, n_sys: usize, rng: &mut R) -> Vec<usize> {
        (0..n_sys).filter(|_| rng.random::<f64>() < self.p).collect()
    }
}
