//! Group-commutator synthesis of multi-body Pauli exponentials from two-body
//! ones.
//!
//! Angles follow the convention `factor (P, θ) = e^{−iθP}`. For anticommuting
//! Hermitian strings `A` and `B` with `AB = iG`,
//!
//! ```text
//! e^{−iεA} e^{−iεB} e^{iεA} e^{iεB} = e^{−2iε²G} + O(ε³)
//! ```
//!
//! and appending `e^{−2iε³B} e^{2iε³A}` pushes the residual to `O(ε⁴)`.
//! A plan lists its factors in operator-product order: [`SynthesisPlan::compose`]
//! multiplies them left to right, so the last factor acts on a state first.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code::CodeSpec;
use crate::error::{Error, Result};
use crate::gates::{encoding_isometry, GateSpec};
use crate::operator::{c, ket_fidelity, pauli_exp, Ket, Operator, PauliString};

/// Largest `|ε|` the seventh-order block accepts.
pub const INNER_EPS_MAX: f64 = 0.5;

/// A sequence of two-body Pauli exponentials and the multi-body exponential it approximates.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisPlan {
    n_qubits: usize,
    factors: Vec<(PauliString, f64)>,
    target: (PauliString, f64),
    order: u32,
}

impl SynthesisPlan {
    /// Validates that every factor is Hermitian and touches at most two qubits.
    pub fn new(
        n_qubits: usize,
        factors: Vec<(PauliString, f64)>,
        target: (PauliString, f64),
        order: u32,
    ) -> Result<Self> {
        for (p, _) in factors.iter().chain(std::iter::once(&target)) {
            if p.n_qubits() != n_qubits {
                return Err(Error::DimensionMismatch(format!("{p} in a {n_qubits}-qubit plan")));
            }
            if !p.is_hermitian() {
                return Err(Error::NonHermitianPauli(p.to_string()));
            }
        }
        if let Some((p, _)) = factors.iter().find(|(p, _)| p.weight() > 2) {
            return Err(Error::NotTwoLocal(p.to_string()));
        }
        Ok(Self { n_qubits, factors, target, order })
    }

    pub fn empty(n_qubits: usize) -> Self {
        Self { n_qubits, factors: Vec::new(), target: (PauliString::identity(n_qubits), 0.0), order: 0 }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn factors(&self) -> &[(PauliString, f64)] {
        &self.factors
    }

    /// `(G, θ)` for the intended `e^{−iθG}`.
    pub fn target(&self) -> &(PauliString, f64) {
        &self.target
    }

    /// Power of ε at which the residual starts.
    pub fn order(&self) -> u32 {
        self.order
    }

    /// The inverse product: reversed factors with negated angles.
    pub fn inverse(&self) -> Self {
        Self {
            n_qubits: self.n_qubits,
            factors: self.factors.iter().rev().map(|(p, a)| (p.clone(), -a)).collect(),
            target: (self.target.0.clone(), -self.target.1),
            order: self.order,
        }
    }

    /// Moves the plan onto a larger register, qubit `q` going to `mapping[q]`.
    pub fn relabel(&self, n_qubits: usize, mapping: &[usize]) -> Result<Self> {
        let factors =
            self.factors.iter().map(|(p, a)| Ok((p.relabel(n_qubits, mapping)?, *a))).collect::<Result<Vec<_>>>()?;
        let target = (self.target.0.relabel(n_qubits, mapping)?, self.target.1);
        Self::new(n_qubits, factors, target, self.order)
    }

    /// Left-to-right product of the factors.
    pub fn compose(&self) -> Result<Operator> {
        let mut u = Operator::qubit_identity(self.n_qubits);
        for (p, a) in &self.factors {
            u = u * pauli_exp(p, *a)?;
        }
        Ok(u)
    }

    /// `compose() · ψ`, applied factor by factor without forming matrices.
    pub fn execute(&self, psi: &Ket) -> Result<Ket> {
        let mut out = psi.clone();
        for (p, a) in self.factors.iter().rev() {
            out = exp_apply(p, *a, &out)?;
        }
        Ok(out)
    }

    /// `e^{−iθG}` for the declared target.
    pub fn target_unitary(&self) -> Result<Operator> {
        pauli_exp(&self.target.0, self.target.1)
    }

    /// Spectral-norm distance to the target after aligning global phases.
    pub fn residual(&self) -> Result<f64> {
        Ok(phase_aligned_norm(&self.compose()?, &self.target_unitary()?))
    }

    fn extend(&mut self, other: &SynthesisPlan) {
        self.factors.extend(other.factors.iter().cloned());
    }
}

/// `e^{−iθP} ψ = cos θ ψ − i sin θ Pψ`
fn exp_apply(p: &PauliString, theta: f64, psi: &Ket) -> Result<Ket> {
    let pp = p.apply_ket(psi)?;
    Ok(psi * c(theta.cos(), 0.0) + pp * c(0.0, -theta.sin()))
}

/// `‖U − e^{iα} V‖₂` with `e^{iα}` the phase of `Tr(V† U)`.
pub fn phase_aligned_norm(u: &Operator, v: &Operator) -> f64 {
    let overlap = (v.matrix().adjoint() * u.matrix()).trace();
    let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { c(1.0, 0.0) };
    (u - &v.scaled(phase)).spectral_norm()
}

/// `G = −iAB` for anticommuting two-local `A`, `B`.
fn commutator_target(a: &PauliString, b: &PauliString) -> Result<PauliString> {
    for p in [a, b] {
        if p.weight() > 2 {
            return Err(Error::NotTwoLocal(p.to_string()));
        }
        if !p.is_hermitian() {
            return Err(Error::NonHermitianPauli(p.to_string()));
        }
    }
    if a.commutes_with(b) {
        return Err(Error::CommutingGenerators(a.to_string(), b.to_string()));
    }
    Ok(a.try_mul(b)?.times_i().neg())
}

/// `e^{−iεA} e^{−iεB} e^{iεA} e^{iεB} ≈ e^{−2iε²G}`, residual `O(ε³)`.
pub fn block_2nd(a: &PauliString, b: &PauliString, eps: f64) -> Result<SynthesisPlan> {
    let g = commutator_target(a, b)?;
    SynthesisPlan::new(
        a.n_qubits(),
        vec![(a.clone(), eps), (b.clone(), eps), (a.clone(), -eps), (b.clone(), -eps)],
        (g, 2.0 * eps * eps),
        3,
    )
}

/// [`block_2nd`] followed by `e^{−2iε³B} e^{2iε³A}`, residual `O(ε⁴)`.
pub fn block_3rd(a: &PauliString, b: &PauliString, eps: f64) -> Result<SynthesisPlan> {
    let mut plan = block_2nd(a, b, eps)?;
    let e3 = 2.0 * eps.powi(3);
    plan.factors.push((b.clone(), e3));
    plan.factors.push((a.clone(), -e3));
    plan.order = 4;
    Ok(plan)
}

/// Coefficients of the ε⁷ corrections in the seventh-order block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerCoefficients {
    /// `a₇ = −92/15`, `b₇ = 188/15`: cancels the ε⁷ residual.
    #[default]
    Corrected,
    /// `a₇ = 16/5`, `b₇ = 56/5`: leaves an ε⁷ residual.
    Printed,
}

impl InnerCoefficients {
    fn values(self) -> (f64, f64) {
        match self {
            InnerCoefficients::Corrected => (-92.0 / 15.0, 188.0 / 15.0),
            InnerCoefficients::Printed => (16.0 / 5.0, 56.0 / 5.0),
        }
    }
}

/// Effective rotation angle of the seventh-order block, `2ε² − 8ε⁴/3 − 56ε⁶/45`.
pub fn inner_angle(eps: f64) -> f64 {
    let e2 = eps * eps;
    2.0 * e2 - 8.0 * e2 * e2 / 3.0 - 56.0 * e2 * e2 * e2 / 45.0
}

/// Inverse of [`inner_angle`] on `[0, 0.5)`, by bisection.
pub fn inner_epsilon_for(angle: f64) -> Result<f64> {
    let max = inner_angle(INNER_EPS_MAX);
    if !(0.0..max).contains(&angle) {
        return Err(Error::InvalidParameter(format!(
            "seventh-order block reaches angles in [0, {max:.6}), asked for {angle}"
        )));
    }
    let (mut lo, mut hi) = (0.0, INNER_EPS_MAX);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if inner_angle(mid) < angle {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-17 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Seventh-order block on generators `a`, `b` targeting `e^{+iφ(ε) G}` with
/// `G = −iab`, residual `O(ε⁸)`.
pub fn inner_7th_on(a: &PauliString, b: &PauliString, eps: f64, coeffs: InnerCoefficients) -> Result<SynthesisPlan> {
    if !eps.is_finite() || eps.abs() >= INNER_EPS_MAX {
        return Err(Error::InvalidParameter(format!("|ε| = {} must be below {INNER_EPS_MAX}", eps.abs())));
    }
    let g = commutator_target(a, b)?;
    let (a7, b7) = coeffs.values();
    let (e3, e5, e7) = (eps.powi(3), eps.powi(5), eps.powi(7));
    SynthesisPlan::new(
        a.n_qubits(),
        vec![
            (a.clone(), -eps),
            (b.clone(), eps),
            (a.clone(), eps),
            (b.clone(), -eps),
            (a.clone(), -(6.0 * e5 + a7 * e7)),
            (b.clone(), 2.0 * e5 - b7 * e7),
            (a.clone(), 2.0 * e3),
            (b.clone(), 2.0 * e3),
        ],
        (g, -inner_angle(eps)),
        8,
    )
}

/// Seventh-order block for `Z₀Z₁X₂` from `Z₀X₁` and `Y₁X₂` on three qubits.
pub fn inner_7th(eps: f64) -> Result<SynthesisPlan> {
    inner_7th_with(eps, InnerCoefficients::Corrected)
}

pub fn inner_7th_with(eps: f64, coeffs: InnerCoefficients) -> Result<SynthesisPlan> {
    let a = PauliString::parse("ZXI")?;
    let b = PauliString::parse("IYX")?;
    inner_7th_on(&a, &b, eps, coeffs)
}

/// Two-local realization of `e^{−iθG}` for `G = −iab`, using the seventh-order block.
fn three_body_exp(a: &PauliString, b: &PauliString, theta: f64, coeffs: InnerCoefficients) -> Result<SynthesisPlan> {
    if theta == 0.0 {
        return Ok(SynthesisPlan::empty(a.n_qubits()));
    }
    // The block produces e^{+iφG}; its inverse produces e^{−iφG}.
    let eps = inner_epsilon_for(theta.abs())?;
    let block = inner_7th_on(a, b, eps, coeffs)?;
    Ok(if theta > 0.0 { block.inverse() } else { block })
}

/// Four-body exponential `e^{−2iε²Z₀Z₁Z₂X₃}` from the outer commutator of
/// `A = Z₀Z₁X₂` (itself synthesized to seventh order) and `B = Y₂X₃`.
///
/// `third_order` appends the symmetric correction `e^{−2iε³B} e^{2iε³A}`.
pub fn cnot_4body(eps: f64, third_order: bool) -> Result<SynthesisPlan> {
    cnot_4body_with(eps, third_order, InnerCoefficients::Corrected)
}

pub fn cnot_4body_with(eps: f64, third_order: bool, coeffs: InnerCoefficients) -> Result<SynthesisPlan> {
    let ia = PauliString::parse("ZXII")?;
    let ib = PauliString::parse("IYXI")?;
    let b = PauliString::parse("IIYX")?;
    four_body(&ia, &ib, &b, eps, third_order, coeffs)
}

/// Outer commutator of `A = −i·ia·ib` (synthesized) with the two-local `b`.
fn four_body(
    ia: &PauliString,
    ib: &PauliString,
    b: &PauliString,
    eps: f64,
    third_order: bool,
    coeffs: InnerCoefficients,
) -> Result<SynthesisPlan> {
    let a = commutator_target(ia, ib)?;
    if a.commutes_with(b) {
        return Err(Error::CommutingGenerators(a.to_string(), b.to_string()));
    }
    let target = a.try_mul(b)?.times_i().neg();
    let n = ia.n_qubits();
    let mut plan = SynthesisPlan::new(n, Vec::new(), (target, 2.0 * eps * eps), if third_order { 4 } else { 3 })?;
    let single = |p: &PauliString, theta: f64| SynthesisPlan::new(n, vec![(p.clone(), theta)], (p.clone(), theta), 0);
    plan.extend(&three_body_exp(ia, ib, eps, coeffs)?);
    plan.extend(&single(b, eps)?);
    plan.extend(&three_body_exp(ia, ib, -eps, coeffs)?);
    plan.extend(&single(b, -eps)?);
    if third_order {
        let e3 = 2.0 * eps.powi(3);
        plan.extend(&single(b, e3)?);
        plan.extend(&three_body_exp(ia, ib, -e3, coeffs)?);
    }
    Ok(plan)
}

/// Encoded gates reproduced by [`fidelity_sweep`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepGate {
    /// Logical bit flip `e^{−i(π/2) Z₁Z₂Z₃}`.
    SigmaX,
    /// Logical CNOT, block 0 controlling block 1.
    Cnot,
}

impl SweepGate {
    pub fn label(self) -> &'static str {
        match self {
            SweepGate::SigmaX => "sigma_x",
            SweepGate::Cnot => "cnot",
        }
    }
}

/// One repetition of the synthesized logical gate for an `n`-step sweep, and
/// the ε it uses.
///
/// Each block advances the target by `2ε²`. The σ_Lx sweep splits the angle
/// `π/2` into `n` blocks. The CNOT Hamiltonian
/// `¼(1 − X₀ − Z₃Z₄Z₅ + X₀Z₃Z₄Z₅)` splits into commuting terms, each with
/// angle `π/4` spread over `n` steps.
pub fn sweep_step(gate: SweepGate, n: usize, order: u8) -> Result<(SynthesisPlan, f64)> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be positive".into()));
    }
    let third = match order {
        2 => false,
        3 => true,
        other => return Err(Error::InvalidParameter(format!("synthesis order {other} is not 2 or 3"))),
    };
    let block =
        |a: &PauliString, b: &PauliString, eps: f64| if third { block_3rd(a, b, eps) } else { block_2nd(a, b, eps) };
    match gate {
        SweepGate::SigmaX => {
            let eps = (PI / (4.0 * n as f64)).sqrt();
            let plan = block(&PauliString::parse("ZXI")?, &PauliString::parse("IYZ")?, eps)?;
            Ok((plan, eps))
        }
        SweepGate::Cnot => {
            let eps = (PI / (8.0 * n as f64)).sqrt();
            let quarter = PI / (4.0 * n as f64);
            let x0 = PauliString::parse("XIIIII")?;
            let mut plan = SynthesisPlan::new(6, vec![(x0.clone(), -quarter)], (x0, -quarter), 0)?;
            // Swapped generators give −Z₃Z₄Z₅, matching the +ZZZ/4 sign in e^{−iπH}.
            let zzz = block(&PauliString::parse("IIIIYZ")?, &PauliString::parse("IIIZXI")?, eps)?;
            plan.extend(&zzz);
            let four = four_body(
                &PauliString::parse("IIIZXI")?,
                &PauliString::parse("IIIIYX")?,
                &PauliString::parse("XIIIIY")?,
                eps,
                third,
                InnerCoefficients::Corrected,
            )?;
            plan.extend(&four);
            plan.target = (PauliString::parse("XIIZZZ")?, PI / (4.0 * n as f64));
            plan.order = if third { 4 } else { 3 };
            Ok((plan, eps))
        }
    }
}

/// One line of a fidelity sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gate: SweepGate,
    pub order: u8,
    pub n: usize,
    pub epsilon: f64,
    pub initial_state: String,
    pub infidelity: f64,
}

/// Infidelity of the `N`-fold repeated synthesized gate against the exact
/// logical gate, for every `N` and every logical basis state.
pub fn fidelity_sweep(gate: SweepGate, ns: &[usize], order: u8) -> Result<Vec<SweepRow>> {
    let (ideal, n_blocks) = match gate {
        SweepGate::SigmaX => {
            let (x, _, _) = CodeSpec::phase_flip().logical_paulis();
            (pauli_exp(&x, PI / 2.0)?, 1)
        }
        SweepGate::Cnot => {
            let g = GateSpec::cnot(true);
            (g.unitary(g.t_gate())?, 2)
        }
    };
    let basis = encoding_isometry(n_blocks)?;
    let states: Vec<(String, Ket)> = basis
        .column_iter()
        .enumerate()
        .map(|(i, col)| {
            let bits: String =
                (0..n_blocks).map(|b| if (i >> (n_blocks - 1 - b)) & 1 == 1 { '1' } else { '0' }).collect();
            (format!("|{bits}>_L"), col.into_owned())
        })
        .collect();

    let rows: Vec<Vec<SweepRow>> = ns
        .par_iter()
        .map(|&n| {
            let (plan, eps) = sweep_step(gate, n, order)?;
            let step = plan.compose()?;
            states
                .iter()
                .map(|(label, psi)| {
                    let mut out = psi.clone();
                    for _ in 0..n {
                        out = step.apply(&out);
                    }
                    let want = ideal.apply(psi);
                    Ok(SweepRow {
                        gate,
                        order,
                        n,
                        epsilon: eps,
                        initial_state: label.clone(),
                        infidelity: (1.0 - ket_fidelity(&want, &out)?).max(0.0),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::SlopeFit;

    fn p(s: &str) -> PauliString {
        PauliString::parse(s).unwrap()
    }

    fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp()).collect()
    }

    fn slope_of(eps: &[f64], f: impl Fn(f64) -> SynthesisPlan) -> f64 {
        let r: Vec<f64> = eps.iter().map(|&e| f(e).residual().unwrap()).collect();
        SlopeFit::new(eps, &r).unwrap().slope
    }

    #[test]
    fn zero_epsilon_gives_identity() {
        let id3 = Operator::qubit_identity(3);
        for plan in [
            block_2nd(&p("ZXI"), &p("IYZ"), 0.0).unwrap(),
            block_3rd(&p("ZXI"), &p("IYZ"), 0.0).unwrap(),
            inner_7th(0.0).unwrap(),
        ] {
            assert!((plan.compose().unwrap() - id3.clone()).max_norm() < 1e-15);
        }
        assert!((cnot_4body(0.0, true).unwrap().compose().unwrap() - Operator::qubit_identity(4)).max_norm() < 1e-15);
    }

    #[test]
    fn second_order_target_and_ratio() {
        let (a, b) = (p("ZXI"), p("IYZ"));
        assert_eq!(&a * &b, p("iZZZ"));
        let plan = block_2nd(&a, &b, 0.1).unwrap();
        assert_eq!(plan.target().0, p("ZZZ"));
        assert!((plan.target().1 - 0.02).abs() < 1e-15);
        let r1 = plan.residual().unwrap();
        let r2 = block_2nd(&a, &b, 0.05).unwrap().residual().unwrap();
        assert!(((r1 / r2) / 8.0 - 1.0).abs() < 0.15, "ratio {}", r1 / r2);
    }

    #[test]
    fn residual_orders() {
        let (a, b) = (p("ZXI"), p("IYZ"));
        let eps = log_space(10f64.powf(-2.5), 0.1, 7);
        let s2 = slope_of(&eps, |e| block_2nd(&a, &b, e).unwrap());
        let s3 = slope_of(&eps, |e| block_3rd(&a, &b, e).unwrap());
        assert!((s2 - 3.0).abs() < 0.2, "{s2}");
        assert!((s3 - 4.0).abs() < 0.2, "{s3}");
        let eps7 = log_space(0.05, 0.2, 7);
        let s7 = slope_of(&eps7, |e| inner_7th(e).unwrap());
        assert!((s7 - 8.0).abs() < 0.4, "{s7}");
        let printed = slope_of(&eps7, |e| inner_7th_with(e, InnerCoefficients::Printed).unwrap());
        assert!((printed - 7.0).abs() < 0.3, "{printed}");
        let eps4 = log_space(0.01, 0.1, 6);
        let s4 = slope_of(&eps4, |e| cnot_4body(e, true).unwrap());
        assert!((s4 - 4.0).abs() < 0.3, "{s4}");
    }

    #[test]
    fn inner_angle_arithmetic_and_inverse() {
        let expect = 2.0 * 0.01 - (8.0 / 3.0) * 1e-4 - (56.0 / 45.0) * 1e-6;
        assert!((inner_angle(0.1) - expect).abs() < 1e-17);
        assert!((inner_angle(0.1) - 0.019_732_0).abs() < 1e-6);
        let eps = inner_epsilon_for(inner_angle(0.23)).unwrap();
        assert!((eps - 0.23).abs() < 1e-14);
        assert!(inner_epsilon_for(0.4).is_err());
        // The rotation angle read off the composed block, from
        // Tr(G U)/d = i sin θ, departs from the series only at order ε⁸.
        let angle_error = |eps: f64| {
            let plan = inner_7th(eps).unwrap();
            let g = plan.target().0.dense();
            let s = (g.matrix() * plan.compose().unwrap().matrix()).trace() / c(8.0, 0.0);
            (s.im.asin() - inner_angle(eps)).abs()
        };
        let ratio = angle_error(0.1) / angle_error(0.05);
        assert!(angle_error(0.1) < 1e-6);
        assert!((ratio.log2() - 8.0).abs() < 0.3, "ratio {ratio}");
    }

    #[test]
    fn rejects_bad_generators() {
        assert!(matches!(block_2nd(&p("ZXI"), &p("ZXI"), 0.1), Err(Error::CommutingGenerators(..))));
        assert!(matches!(block_2nd(&p("ZZI"), &p("IIX"), 0.1), Err(Error::CommutingGenerators(..))));
        assert!(matches!(block_2nd(&p("ZZX"), &p("IYX"), 0.1), Err(Error::NotTwoLocal(_))));
        assert!(inner_7th(0.5).is_err());
        assert!(inner_7th(-0.7).is_err());
        assert!(SynthesisPlan::new(3, vec![(p("ZZZ"), 0.1)], (p("ZZZ"), 0.1), 0).is_err());
    }

    #[test]
    fn commuting_group_commutator_is_identity() {
        let (a, b) = (p("ZZI"), p("IZZ"));
        let plan =
            SynthesisPlan::new(3, vec![(a.clone(), 0.3), (b.clone(), 0.3), (a, -0.3), (b, -0.3)], (p("III"), 0.0), 0)
                .unwrap();
        assert!((plan.compose().unwrap() - Operator::qubit_identity(3)).max_norm() < 1e-15);
    }

    #[test]
    fn four_body_generators() {
        let a = p("ZZXI");
        let b = p("IIYX");
        assert_eq!(&a * &b, p("iZZZX"));
        let plan = cnot_4body(0.05, true).unwrap();
        assert_eq!(plan.target().0, p("ZZZX"));
        assert!(plan.factors().iter().all(|(f, _)| f.weight() <= 2));
    }

    #[test]
    fn execute_and_compose_agree() {
        let empty = SynthesisPlan::empty(2);
        assert!((empty.compose().unwrap() - Operator::qubit_identity(2)).max_norm() < 1e-15);
        let single = SynthesisPlan::new(2, vec![(p("XY"), 0.4)], (p("XY"), 0.4), 0).unwrap();
        assert!((single.compose().unwrap() - pauli_exp(&p("XY"), 0.4).unwrap()).max_norm() < 1e-15);

        let plan = block_2nd(&p("ZXI"), &p("IYZ"), 0.2).unwrap();
        let mut oracle = Operator::qubit_identity(3);
        for (f, a) in plan.factors() {
            oracle = &oracle * &pauli_exp(f, *a).unwrap();
        }
        assert!((plan.compose().unwrap() - oracle.clone()).max_norm() < 1e-12);
        let psi = Ket::from_fn(8, |i, _| c(1.0 + i as f64, -(i as f64)));
        assert!((plan.execute(&psi).unwrap() - oracle.apply(&psi)).norm() < 1e-12);
        assert!(plan.compose().unwrap().unitarity_defect() < 1e-10);
        let inv = plan.inverse().compose().unwrap();
        assert!((inv * plan.compose().unwrap() - Operator::qubit_identity(3)).max_norm() < 1e-12);
    }

    #[test]
    fn cnot_step_targets_match_hamiltonian_split() {
        // The exact factors of the step reproduce the exact CNOT.
        let n = 5;
        let q = PI / (4.0 * n as f64);
        let exact = pauli_exp(&p("XIIIII"), -q).unwrap()
            * pauli_exp(&p("-IIIZZZ"), q).unwrap()
            * pauli_exp(&p("XIIZZZ"), q).unwrap();
        let mut u = Operator::qubit_identity(6);
        for _ in 0..n {
            u = &u * &exact;
        }
        let g = GateSpec::cnot(true);
        assert!(phase_aligned_norm(&u, &g.unitary(g.t_gate()).unwrap()) < 1e-12);
        let (plan, _) = sweep_step(SweepGate::Cnot, 100, 3).unwrap();
        assert!(plan.factors().iter().all(|(f, _)| f.weight() <= 2));
    }

    #[test]
    fn sweeps_converge_monotonically() {
        let rows = fidelity_sweep(SweepGate::SigmaX, &[10, 30, 100], 3).unwrap();
        assert_eq!(rows.len(), 6);
        for label in ["|0>_L", "|1>_L"] {
            let inf: Vec<f64> = rows.iter().filter(|r| r.initial_state == label).map(|r| r.infidelity).collect();
            assert!(inf.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{inf:?}");
        }
        assert!(fidelity_sweep(SweepGate::SigmaX, &[10], 4).is_err());
    }
}
