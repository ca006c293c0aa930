//! Second-order perturbative description of a gate running under noise.
//!
//! All integrals are written over rescaled times `u, v ∈ [0, 1]` with the
//! physical time entering only through `H̃_I(u t)`. Everything is evaluated in
//! the eigenbasis of `H_0 = H_S ⊗ I + H_E` (see [`GateFrame`]), where
//! `H̃_I(τ)_ab = G_ab e^{iΔ_ab τ}`. Any weighted sum of `H̃_I` samples is then
//! `G ∘ Σ_j w_j e^{iΔ τ_j}`, an elementwise operation, which keeps the nested
//! double integral at one commutator per outer node.

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::bath::{BathModel, GateFrame};
use crate::error::{Error, Result};
use crate::operator::{c, expm_hermitian, partial_trace, trace_distance, DensityMatrix, Matrix, Operator};

/// Region of the inner integral in the nested commutator term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NestedDomain {
    /// `0 ≤ v ≤ u ≤ 1`, the time-ordered region.
    #[default]
    Triangular,
    /// `[0, 1]²`; the commutator integrand is antisymmetric, so this term
    /// vanishes identically.
    Square,
}

/// Gauss-Legendre rule on `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default)]
    pub nested: NestedDomain,
}

fn default_nodes() -> usize {
    32
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { nodes: default_nodes(), nested: NestedDomain::Triangular }
    }
}

impl QuadratureSpec {
    pub fn with_nodes(nodes: usize) -> Self {
        Self { nodes, ..Self::default() }
    }

    pub fn square(mut self) -> Self {
        self.nested = NestedDomain::Square;
        self
    }

    /// `(node, weight)` pairs on `[0, 1]`.
    pub fn rule(&self) -> Result<Vec<(f64, f64)>> {
        if self.nodes < 4 {
            return Err(Error::InvalidParameter(format!("quadrature needs at least 4 nodes, got {}", self.nodes)));
        }
        let gl =
            GaussLegendre::new(self.nodes).map_err(|e| Error::InvalidParameter(format!("Gauss-Legendre rule: {e}")))?;
        Ok(gl.as_node_weight_pairs().iter().map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect())
    }
}

/// Time-dependent noise frame for one gate and one step length `t`.
struct FrameSamples<'a> {
    frame: &'a GateFrame,
    t: f64,
    rule: Vec<(f64, f64)>,
}

impl<'a> FrameSamples<'a> {
    fn new(frame: &'a GateFrame, t: f64, quad: &QuadratureSpec) -> Result<Self> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidParameter(format!("time {t} must be finite and non-negative")));
        }
        Ok(Self { frame, t, rule: quad.rule()? })
    }

    /// `Σ_j w_j H̃_I(τ_j)` in the eigenbasis.
    fn weighted(&self, samples: impl Iterator<Item = (f64, f64)> + Clone) -> Matrix {
        let e = self.frame.spectrum().values();
        let g = self.frame.h_tilde_eigen(0.0);
        Matrix::from_fn(g.nrows(), g.ncols(), |a, b| {
            let d = e[a] - e[b];
            let s: num_complex::Complex64 = samples.clone().map(|(tau, w)| c(0.0, d * tau).exp() * w).sum();
            g[(a, b)] * s
        })
    }

    /// `∫₀¹ H̃_I(u t) du`
    fn mean(&self) -> Matrix {
        self.weighted(self.rule.iter().map(|&(u, w)| (u * self.t, w)))
    }

    /// `∫₀¹ du ∫ dv [H̃_I(u t), H̃_I(v t)]` over the chosen inner region.
    fn nested(&self, domain: NestedDomain) -> Matrix {
        let n = self.frame.spectrum().values().len();
        let mut out = Matrix::zeros(n, n);
        // Over the square the integral factorizes into [M, M] = 0.
        if domain == NestedDomain::Square {
            return out;
        }
        for &(u, wu) in &self.rule {
            let outer = self.frame.h_tilde_eigen(u * self.t);
            // v = u s with Jacobian u
            let inner = self.weighted(self.rule.iter().map(|&(s, ws)| (u * s * self.t, ws)));
            out += (&outer * &inner - &inner * &outer) * c(wu * u, 0.0);
        }
        out
    }
}

/// `C₁(t) = −i t ∫₀¹ H̃_I(u t) du`
pub fn c1(bath: &BathModel, h_s: Option<&Operator>, t: f64, quad: &QuadratureSpec) -> Result<Operator> {
    let frame = GateFrame::new(bath, h_s)?;
    c1_in(&frame, t, quad)
}

fn c1_in(frame: &GateFrame, t: f64, quad: &QuadratureSpec) -> Result<Operator> {
    let samples = FrameSamples::new(frame, t, quad)?;
    Ok(frame.from_eigenbasis(&(samples.mean() * c(0.0, -t))))
}

/// `C₂(t) = ½ C₁² − ½ t² ∫₀¹ du ∫₀ᵘ dv [H̃_I(u t), H̃_I(v t)]`
pub fn c2(bath: &BathModel, h_s: Option<&Operator>, t: f64, quad: &QuadratureSpec) -> Result<Operator> {
    let frame = GateFrame::new(bath, h_s)?;
    let samples = FrameSamples::new(&frame, t, quad)?;
    let c1 = samples.mean() * c(0.0, -t);
    let nested = samples.nested(quad.nested);
    let m = (&c1 * &c1) * c(0.5, 0.0) - nested * c(0.5 * t * t, 0.0);
    Ok(frame.from_eigenbasis(&m))
}

/// The error superoperator `𝓔(ρ) = [K, [ρ, K]] − [M, ρ]`, with `K` the mean
/// of `H̃_I` over the step and `M` the nested commutator integral.
///
/// Built with `H_S = None` it is the memory superoperator `𝓔₀`.
#[derive(Clone, Debug)]
pub struct SuperopKernel {
    frame: GateFrame,
    mean: Matrix,
    nested: Matrix,
    t: f64,
}

pub fn error_superop(bath: &BathModel, h_s: Option<&Operator>, t: f64, quad: &QuadratureSpec) -> Result<SuperopKernel> {
    let frame = GateFrame::new(bath, h_s)?;
    let samples = FrameSamples::new(&frame, t, quad)?;
    let mean = samples.mean();
    let nested = samples.nested(quad.nested);
    Ok(SuperopKernel { frame, mean, nested, t })
}

impl SuperopKernel {
    pub fn t(&self) -> f64 {
        self.t
    }

    /// Action on a joint-space operator, in the computational basis.
    pub fn apply(&self, rho_se: &Operator) -> Result<Operator> {
        if rho_se.dim() != self.frame.spectrum().values().len() {
            return Err(Error::DimensionMismatch(format!(
                "kernel acts on side {}, got {}",
                self.frame.spectrum().values().len(),
                rho_se.dim()
            )));
        }
        let r = self.frame.to_eigenbasis(rho_se);
        let k = &self.mean;
        let inner = &r * k - k * &r;
        let dbl = k * &inner - &inner * k;
        let out = dbl - (&self.nested * &r - &r * &self.nested);
        Ok(self.frame.from_eigenbasis(&out))
    }

    /// `K = ∫₀¹ H̃_I(u t) du` in the computational basis.
    pub fn mean_h(&self) -> Operator {
        self.frame.from_eigenbasis(&self.mean)
    }

    /// `M` in the computational basis.
    pub fn nested_commutator(&self) -> Operator {
        self.frame.from_eigenbasis(&self.nested)
    }
}

/// Second-order prediction of the reduced state,
/// `U_S ρ_S U_S† + ½ λ² t² U_S Tr_E{𝓔(ρ_S ⊗ ρ_E)} U_S†`.
///
/// The result is not renormalized, and it can have eigenvalues slightly
/// below zero at order `λ⁴`, so it is returned as a plain operator.
pub fn predict_state(
    rho_s0: &DensityMatrix,
    bath: &BathModel,
    h_s: Option<&Operator>,
    t: f64,
    quad: &QuadratureSpec,
) -> Result<Operator> {
    let rho_se = bath.joint_state(rho_s0)?;
    predict_from_joint(&rho_se, bath, h_s, t, quad)
}

/// As [`predict_state`] for an explicit joint initial state, which must be a
/// product `ρ_S ⊗ ρ_E` with `ρ_E` the bath's initial state.
pub fn predict_state_joint(
    rho_se: &Operator,
    bath: &BathModel,
    h_s: Option<&Operator>,
    t: f64,
    quad: &QuadratureSpec,
) -> Result<Operator> {
    let joint = rho_se.clone().with_dims(bath.joint_dims())?;
    let sys = partial_trace(&joint, &bath.system_factors())?;
    let env_factors: Vec<usize> = (bath.n_sys()..2 * bath.n_sys()).collect();
    let env = partial_trace(&joint, &env_factors)?;
    let product = crate::operator::kron(&[sys, env.clone()])?;
    let defect = (&product - &joint).max_norm();
    if defect > 1e-10 {
        return Err(Error::EntangledInitialState(defect));
    }
    let env_defect = (&env - bath.env_init().operator()).max_norm();
    if env_defect > 1e-10 {
        return Err(Error::InvalidState(format!(
            "environment marginal differs from the bath's initial state by {env_defect:.3e}"
        )));
    }
    predict_from_joint(&joint, bath, h_s, t, quad)
}

fn predict_from_joint(
    rho_se: &Operator,
    bath: &BathModel,
    h_s: Option<&Operator>,
    t: f64,
    quad: &QuadratureSpec,
) -> Result<Operator> {
    let n = bath.n_sys();
    let sys_dims = vec![2; n];
    let u_s = match h_s {
        Some(h) => expm_hermitian(&h.clone().with_dims(sys_dims.clone())?, t)?,
        None => Operator::identity(&sys_dims),
    };
    let rho_s = partial_trace(rho_se, &bath.system_factors())?;
    let ideal = &(&u_s * &rho_s) * &u_s.adjoint();
    let lambda = bath.lambda();
    if lambda == 0.0 {
        return Ok(ideal);
    }
    let kernel = error_superop(bath, h_s, t, quad)?;
    let err = partial_trace(&kernel.apply(rho_se)?, &bath.system_factors())?;
    let correction = &(&u_s * &err) * &u_s.adjoint();
    Ok(ideal + correction * (0.5 * lambda * lambda * t * t))
}

/// Trace distance between [`predict_state`] and exact joint evolution.
pub fn prediction_residual(
    rho_s0: &DensityMatrix,
    bath: &BathModel,
    h_s: Option<&Operator>,
    t: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let predicted = predict_state(rho_s0, bath, h_s, t, quad)?;
    let exact = bath.exact_reduced_state(h_s, rho_s0, t)?;
    trace_distance(&predicted, &exact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::build_dephasing_bath;
    use crate::operator::{kron, Ket, PauliString, Spectrum};

    fn x() -> Operator {
        PauliString::parse("X").unwrap().dense()
    }

    fn psi_state() -> DensityMatrix {
        DensityMatrix::pure(&[2], &Ket::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)])).unwrap()
    }

    /// Composite trapezoid rule on `[0, t]` with `n` panels, evaluated with
    /// the explicit three-matrix form of `H̃_I`.
    fn trapezoid_c1(bath: &BathModel, h_s: &Operator, t: f64, n: usize) -> Operator {
        let h = t / n as f64;
        let mut acc = Operator::zeros(&bath.joint_dims());
        for i in 0..=n {
            let tau = i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += &(explicit_h_tilde(bath, h_s, tau) * w);
        }
        acc * c(0.0, -h)
    }

    fn explicit_h_tilde(bath: &BathModel, h_s: &Operator, tau: f64) -> Operator {
        let u_s = expm_hermitian(h_s, tau).unwrap().extend_right(&bath.bath_dims());
        let u_e = expm_hermitian(bath.h_env(), tau).unwrap();
        let h_i = &(&u_e.adjoint() * bath.h_int()) * &u_e;
        &(&u_s.adjoint() * &h_i) * &u_s
    }

    #[test]
    fn rule_weights_sum_to_one() {
        for n in [4, 7, 32, 64] {
            let rule = QuadratureSpec::with_nodes(n).rule().unwrap();
            let s: f64 = rule.iter().map(|p| p.1).sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(rule.iter().all(|&(x, _)| (0.0..=1.0).contains(&x)));
        }
        assert!(QuadratureSpec::with_nodes(3).rule().is_err());
    }

    #[test]
    fn c1_vanishes_at_zero_time() {
        let bath = build_dephasing_bath(1, &[1.0], 0.1).unwrap();
        let q = QuadratureSpec::default();
        assert!(c1(&bath, Some(&x()), 0.0, &q).unwrap().max_norm() < 1e-15);
        let a = c1(&bath, Some(&x()), 1e-3, &q).unwrap().spectral_norm();
        let b = c1(&bath, Some(&x()), 2e-3, &q).unwrap().spectral_norm();
        assert!((b / a - 2.0).abs() < 1e-2);
    }

    #[test]
    fn c1_with_static_coupling() {
        let bath = build_dephasing_bath(2, &[0.0, 0.0], 0.1).unwrap();
        let t = 0.7;
        let got = c1(&bath, None, t, &QuadratureSpec::default()).unwrap();
        let expect = bath.h_int() * c(0.0, -t);
        assert!((got - expect).max_norm() < 1e-13);
    }

    #[test]
    fn c1_matches_richardson_trapezoid() {
        let bath = build_dephasing_bath(1, &[1.0], 0.1).unwrap();
        let t = 0.5;
        let coarse = trapezoid_c1(&bath, &x(), t, 320);
        let fine = trapezoid_c1(&bath, &x(), t, 640);
        let richardson = (fine * (4.0 / 3.0)) - coarse * (1.0 / 3.0);
        let got = c1(&bath, Some(&x()), t, &QuadratureSpec::default()).unwrap();
        assert!((got - richardson).max_norm() < 1e-8);
    }

    #[test]
    fn c2_scales_quadratically_and_reduces_when_static() {
        let bath = build_dephasing_bath(1, &[1.0], 0.1).unwrap();
        let q = QuadratureSpec::default();
        let a = c2(&bath, Some(&x()), 1e-3, &q).unwrap().spectral_norm();
        let b = c2(&bath, Some(&x()), 2e-3, &q).unwrap().spectral_norm();
        assert!((b / a - 4.0).abs() < 4e-2);

        let flat = build_dephasing_bath(1, &[0.0], 0.1).unwrap();
        let t = 0.6;
        let got = c2(&flat, None, t, &q).unwrap();
        let expect = (flat.h_int() * flat.h_int()) * (-0.5 * t * t);
        assert!((got - expect).max_norm() < 1e-13);
    }

    #[test]
    fn unitarity_conditions() {
        let bath = build_dephasing_bath(2, &[1.0, 1.1], 0.1).unwrap();
        let h_s = PauliString::parse("XZ").unwrap().dense() * 0.8 + PauliString::parse("YI").unwrap().dense() * 0.3;
        let q = QuadratureSpec::default();
        let a = c1(&bath, Some(&h_s), 0.9, &q).unwrap();
        let b = c2(&bath, Some(&h_s), 0.9, &q).unwrap();
        assert!((a.adjoint() + a.clone()).max_norm() < 1e-12);
        let cond = b.adjoint() + &a * &a.adjoint() + b;
        assert!(cond.max_norm() < 1e-10);
    }

    #[test]
    fn truncated_series_is_third_order() {
        // Oracle: U_S† U_E† U_SE from full joint exponentials.
        let t = 0.5;
        let q = QuadratureSpec::default();
        let dev = |lambda: f64| {
            let bath = build_dephasing_bath(1, &[1.0], lambda).unwrap();
            let u_se = Spectrum::of(&bath.total_hamiltonian(Some(&x())).unwrap()).unwrap().propagator(t);
            let u_s = expm_hermitian(&x(), t).unwrap().extend_right(&[2]);
            let u_e = expm_hermitian(bath.h_env(), t).unwrap();
            let lhs = &(&u_s.adjoint() * &u_e.adjoint()) * &u_se;
            let series = Operator::qubit_identity(2)
                + c1(&bath, Some(&x()), t, &q).unwrap() * lambda
                + c2(&bath, Some(&x()), t, &q).unwrap() * (lambda * lambda);
            (lhs - series).spectral_norm()
        };
        let lambdas = [10f64.powf(-1.5), 1e-2, 10f64.powf(-2.5), 1e-3];
        let ys: Vec<f64> = lambdas.iter().map(|&l| dev(l)).collect();
        let fit = crate::fit::SlopeFit::new(&lambdas, &ys).unwrap();
        assert!((fit.slope - 3.0).abs() < 0.2, "slope {}", fit.slope);
    }

    #[test]
    fn commuting_gate_kernel_equals_memory_kernel() {
        let bath = build_dephasing_bath(2, &[1.0, 1.1], 0.1).unwrap();
        let zz = PauliString::parse("ZZ").unwrap().dense();
        let q = QuadratureSpec::default();
        let es = error_superop(&bath, Some(&zz), 0.8, &q).unwrap();
        let e0 = error_superop(&bath, None, 0.8, &q).unwrap();
        let psi = Ket::from_fn(16, |i, _| c((i as f64).sin(), (0.3 * i as f64).cos()));
        let rho = Operator::projector(&bath.joint_dims(), &(&psi / c(psi.norm(), 0.0))).unwrap();
        let diff = es.apply(&rho).unwrap() - e0.apply(&rho).unwrap();
        assert!(diff.max_norm() < 1e-10);
    }

    #[test]
    fn maximally_mixed_static_input_is_annihilated() {
        let bath = build_dephasing_bath(1, &[0.0], 0.1).unwrap();
        let k = error_superop(&bath, None, 0.4, &QuadratureSpec::default()).unwrap();
        let rho = Operator::identity(&bath.joint_dims()) * 0.25;
        assert!(k.apply(&rho).unwrap().max_norm() < 1e-14);
    }

    #[test]
    fn kernel_matches_brute_force_sum() {
        let bath = build_dephasing_bath(1, &[1.0], 0.1).unwrap();
        let t = 0.3;
        let k = error_superop(&bath, Some(&x()), t, &QuadratureSpec::default()).unwrap();
        let rho = bath.joint_state(&psi_state()).unwrap();

        let rule = QuadratureSpec::with_nodes(64).rule().unwrap();
        let samples: Vec<Operator> = rule.iter().map(|&(u, _)| explicit_h_tilde(&bath, &x(), u * t)).collect();
        let mut expect = Operator::zeros(&bath.joint_dims());
        for (i, &(u, wu)) in rule.iter().enumerate() {
            for (j, &(_, wv)) in rule.iter().enumerate() {
                let inner = rho.commutator(&samples[j]);
                expect += &(samples[i].commutator(&inner) * (wu * wv));
            }
            for &(s, ws) in &rule {
                let hv = explicit_h_tilde(&bath, &x(), u * s * t);
                expect += &(samples[i].commutator(&hv).commutator(&rho) * (-wu * ws * u));
            }
        }
        assert!((k.apply(&rho).unwrap() - expect).max_norm() < 1e-8);
    }

    #[test]
    fn kernel_output_is_hermitian_and_traceless() {
        let bath = build_dephasing_bath(2, &[1.0, 1.1], 0.1).unwrap();
        let h_s = PauliString::parse("XI").unwrap().dense() + PauliString::parse("ZY").unwrap().dense();
        let k = error_superop(&bath, Some(&h_s), 0.6, &QuadratureSpec::default()).unwrap();
        let rho_s = DensityMatrix::pure(&[2, 2], &Ket::from_vec(vec![c(0.5, 0.0); 4])).unwrap();
        let out = k.apply(&bath.joint_state(&rho_s).unwrap()).unwrap();
        assert!(out.hermiticity_defect() < 1e-10);
        assert!(out.trace().norm() < 1e-10);
    }

    #[test]
    fn prediction_at_zero_coupling_is_ideal() {
        let bath = build_dephasing_bath(1, &[1.0], 0.0).unwrap();
        let got = predict_state(&psi_state(), &bath, Some(&x()), 0.5, &QuadratureSpec::default()).unwrap();
        let u = expm_hermitian(&x(), 0.5).unwrap();
        let ideal = &(&u * psi_state().operator()) * &u.adjoint();
        assert!((got - ideal).max_norm() < 1e-14);
    }

    #[test]
    fn memory_prediction_keeps_populations() {
        let bath = build_dephasing_bath(1, &[1.0], 0.05).unwrap();
        let got = predict_state(&psi_state(), &bath, None, 0.5, &QuadratureSpec::default()).unwrap();
        for i in 0..2 {
            assert!((got.matrix()[(i, i)] - psi_state().operator().matrix()[(i, i)]).norm() < 1e-14);
        }
        assert!((got.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entangled_joint_state_is_rejected() {
        let bath = build_dephasing_bath(1, &[1.0], 0.05).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = Ket::from_vec(vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]);
        let rho = Operator::projector(&[2, 2], &bell).unwrap();
        let q = QuadratureSpec::default();
        assert!(matches!(predict_state_joint(&rho, &bath, None, 0.5, &q), Err(Error::EntangledInitialState(_))));
        let product = kron(&[psi_state().operator().clone(), bath.env_init().operator().clone()]).unwrap();
        let a = predict_state_joint(&product, &bath, None, 0.5, &q).unwrap();
        let b = predict_state(&psi_state(), &bath, None, 0.5, &q).unwrap();
        assert!((a - b).max_norm() < 1e-15);
    }

    #[test]
    fn square_domain_drops_nested_term() {
        let bath = build_dephasing_bath(1, &[1.0], 0.1).unwrap();
        let k = error_superop(&bath, Some(&x()), 0.5, &QuadratureSpec::default().square()).unwrap();
        assert!(k.nested_commutator().max_norm() < 1e-15);
        let tri = error_superop(&bath, Some(&x()), 0.5, &QuadratureSpec::default()).unwrap();
        assert!(tri.nested_commutator().max_norm() > 1e-3);
    }

    #[test]
    fn node_doubling_converged() {
        let bath = build_dephasing_bath(1, &[1.0], 0.1).unwrap();
        let q32 = QuadratureSpec::default();
        let q64 = QuadratureSpec::with_nodes(64);
        let t = 0.5;
        let d1 = c1(&bath, Some(&x()), t, &q32).unwrap() - c1(&bath, Some(&x()), t, &q64).unwrap();
        let d2 = c2(&bath, Some(&x()), t, &q32).unwrap() - c2(&bath, Some(&x()), t, &q64).unwrap();
        let p1 = predict_state(&psi_state(), &bath, Some(&x()), t, &q32).unwrap();
        let p2 = predict_state(&psi_state(), &bath, Some(&x()), t, &q64).unwrap();
        assert!(d1.max_norm() < 1e-8 && d2.max_norm() < 1e-8 && (p1 - p2).max_norm() < 1e-8);
    }
}
