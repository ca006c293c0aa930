//! The invariant suite behind `qecstep verify`.
//!
//! The JSON report has the shape
//!
//! ```json
//! {
//!   "passed": true,
//!   "checks": [
//!     { "module": "code", "invariant": "pauli2", "measured": 0.0, "expected": "≤ 1e-12", "passed": true }
//!   ]
//! }
//! ```
//!
//! `passed` is the conjunction of every check. `measured` is the worst value
//! seen across the configurations the check visits.

use std::fmt::Write as _;

use qecstep::bath::{build_dephasing_bath, step_commutation_residual};
use qecstep::code::{CodeSpec, Syndrome};
use qecstep::fit::SlopeFit;
use qecstep::gates::{phase_aligned_distance, subspace_leakage, GateEvolution, GateSpec};
use qecstep::operator::{c, partial_trace, pauli_exp, Ket, Operator, Pauli, PauliString};
use qecstep::perturbation::{c1, c2, error_superop, QuadratureSpec};
use qecstep::seed::stream_rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::BlockKind;
use crate::experiments::{residual_plan, Assertion, CommandOutcome};
use crate::output::write_json;
use crate::{CliError, RunSettings};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub module: String,
    pub invariant: String,
    pub measured: f64,
    pub expected: String,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

/// Deliberate defects for exercising the suite itself.
#[derive(Clone, Copy, Debug, Default)]
pub struct Fixture {
    /// Use `−σ_{L,y}` in place of the logical `σ_y`.
    pub flip_sigma_ly: bool,
}

struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    fn at_most(&mut self, module: &str, invariant: &str, measured: f64, bound: f64) {
        self.checks.push(Check {
            module: module.into(),
            invariant: invariant.into(),
            measured,
            expected: format!("≤ {bound:e}"),
            passed: measured <= bound,
        });
    }

    fn slope(&mut self, module: &str, invariant: &str, x: &[f64], y: &[f64], target: f64, tol: f64) {
        let measured = SlopeFit::new(x, y).map(|f| f.slope).unwrap_or(f64::NAN);
        self.checks.push(Check {
            module: module.into(),
            invariant: invariant.into(),
            measured,
            expected: format!("{target} ± {tol}"),
            passed: (measured - target).abs() <= tol,
        });
    }
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp()).collect()
}

fn random_hermitian_pauli_sum(rng: &mut impl Rng, labels: &[&str]) -> Result<Operator, CliError> {
    let mut h = Operator::qubit_identity(labels[0].len()) * 0.0;
    for l in labels {
        h += &(PauliString::parse(l)?.dense() * rng.random_range(-1.0..1.0));
    }
    Ok(h)
}

fn random_ket(rng: &mut impl Rng, d: usize) -> Ket {
    let v = Ket::from_fn(d, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let n = v.norm();
    v / c(n, 0.0)
}

fn operator_checks(s: &mut Suite) -> Result<(), CliError> {
    let mut worst: f64 = 0.0;
    for (a, b, k) in [(Pauli::X, Pauli::Y, Pauli::Z), (Pauli::Y, Pauli::Z, Pauli::X), (Pauli::Z, Pauli::X, Pauli::Y)] {
        let lhs = Operator::from_qubit_matrix(a.matrix())? * Operator::from_qubit_matrix(b.matrix())?;
        let rhs = Operator::from_qubit_matrix(k.matrix())? * c(0.0, 1.0);
        worst = worst.max((lhs - rhs).max_norm());
    }
    s.at_most("operator", "pauli_products", worst, 1e-15);

    let mut rng = stream_rng(7, "verify-operator", 0);
    let a = random_hermitian_pauli_sum(&mut rng, &["XI", "ZY", "YY"])?.with_dims(vec![2, 2])?;
    let b = random_hermitian_pauli_sum(&mut rng, &["X", "Z"])?;
    let rho_b = Operator::identity(&[2]) * 0.5 + b * 0.1;
    let ab = qecstep::operator::kron(&[a.clone(), rho_b.clone()])?;
    let reduced = partial_trace(&ab, &[0, 1])?;
    s.at_most("operator", "partial_trace_of_product", (reduced - a.scaled(rho_b.trace())).max_norm(), 1e-12);
    let h = random_hermitian_pauli_sum(&mut rng, &["XX", "ZI", "YZ"])?;
    s.at_most(
        "operator",
        "exponential_unitarity",
        qecstep::operator::expm_hermitian(&h, 2.7)?.unitarity_defect(),
        1e-12,
    );
    Ok(())
}

fn code_checks(s: &mut Suite, fixture: Fixture) -> Result<(), CliError> {
    let code = CodeSpec::phase_flip();
    let (x, z, mut y) = code.logical_paulis();
    if fixture.flip_sigma_ly {
        y = y.neg();
    }
    let (xd, yd, zd) = (x.dense(), y.dense(), z.dense());
    let p = code.code_projector();
    let id = Operator::qubit_identity(3);
    let on_code = |op: Operator| (&(&p * &op) * &p).max_norm();

    let pauli1 = [&xd, &yd, &zd].iter().map(|o| on_code(&(*o * *o) - &id)).fold(0.0, f64::max);
    s.at_most("code", "pauli1", pauli1, 1e-12);
    let i = c(0.0, 1.0);
    let pauli2 = [
        on_code(&xd * &yd - zd.scaled(i)),
        on_code(&yd * &zd - xd.scaled(i)),
        on_code(&zd * &xd - yd.scaled(i)),
        on_code(xd.anticommutator(&yd)),
        on_code(yd.anticommutator(&zd)),
        on_code(zd.anticommutator(&xd)),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    s.at_most("code", "pauli2", pauli2, 1e-12);

    let (zero, one) = (code.codeword(0).clone(), code.codeword(1).clone());
    let action = [
        (x.apply_ket(&zero)? - &one).norm(),
        (x.apply_ket(&one)? - &zero).norm(),
        (z.apply_ket(&zero)? - &zero).norm(),
        (z.apply_ket(&one)? + &one).norm(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    s.at_most("code", "logical_action", action, 1e-12);

    let psi = code.encode(c(0.6, 0.0), c(0.0, 0.8))?;
    let mut worst: f64 = 0.0;
    let mut mislabelled = 0.0;
    for q in 0..3 {
        let hit = PauliString::single(3, q, Pauli::Z)?.apply_ket(&psi)?;
        let mut rng = stream_rng(7, "verify-code", q as u64);
        let (syn, post) = code.measure_syndrome(&hit, 0, 1, &mut rng)?;
        if syn != Syndrome::of_flip(Some(q)) {
            mislabelled += 1.0;
        }
        let fixed = code.recover(&post, syn, 0, 1)?;
        worst = worst.max(1.0 - qecstep::operator::ket_fidelity(&psi, &fixed)?);
    }
    s.at_most("code", "single_flip_syndromes_mislabelled", mislabelled, 0.0);
    s.at_most("code", "single_flip_recovery_infidelity", worst, 1e-10);
    Ok(())
}

fn perturbation_checks(s: &mut Suite) -> Result<(), CliError> {
    let q = QuadratureSpec::default();
    let mut rng = stream_rng(7, "verify-perturbation", 0);
    let (mut w1, mut w2): (f64, f64) = (0.0, 0.0);
    for _ in 0..10 {
        let h_s = random_hermitian_pauli_sum(&mut rng, &["XI", "ZX", "YY", "IZ", "XZ"])?;
        let freqs = [rng.random_range(0.5..1.5), rng.random_range(0.5..1.5)];
        let t = rng.random_range(0.2..1.5);
        let bath = build_dephasing_bath(2, &freqs, 0.1)?;
        let a = c1(&bath, Some(&h_s), t, &q)?;
        let b = c2(&bath, Some(&h_s), t, &q)?;
        w1 = w1.max((a.adjoint() + a.clone()).max_norm());
        w2 = w2.max((b.adjoint() + &a * &a.adjoint() + b).max_norm());
    }
    s.at_most("perturbation", "c1_antihermitian", w1, 1e-8);
    s.at_most("perturbation", "c2_unitarity", w2, 1e-8);

    let bath = build_dephasing_bath(2, &[1.0, 1.1], 0.1)?;
    let h_s = random_hermitian_pauli_sum(&mut rng, &["ZZ", "ZI", "IZ"])?;
    let es = error_superop(&bath, Some(&h_s), 0.8, &q)?;
    let e0 = error_superop(&bath, None, 0.8, &q)?;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let psi = random_ket(&mut rng, 16);
        let rho = Operator::projector(&bath.joint_dims(), &psi)?;
        worst = worst.max((es.apply(&rho)? - e0.apply(&rho)?).max_norm());
    }
    s.at_most("perturbation", "commuting_kernel_equality", worst, 1e-10);

    let gate = GateSpec::rotation(0.0, 0.0, std::f64::consts::PI / 2.0, true);
    let bath = build_dephasing_bath(3, &qecstep::bath::default_frequencies(3), 0.1)?;
    let h = gate.hamiltonian()?;
    let ns = [8.0, 16.0, 32.0, 64.0, 128.0, 256.0];
    let res = ns
        .iter()
        .map(|n| step_commutation_residual(&bath, &h, gate.t_gate() / n))
        .collect::<qecstep::Result<Vec<_>>>()?;
    s.slope("bath", "short_step_residual_slope", &ns, &res, -1.0, 0.1);
    Ok(())
}

fn gate_checks(s: &mut Suite) -> Result<(), CliError> {
    let mut worst: f64 = 0.0;
    let mut rng = stream_rng(7, "verify-gates", 0);
    let mut specs = vec![GateSpec::cnot(false), GateSpec::cnot(true)];
    for _ in 0..4 {
        let (th, ph, ang) = (rng.random_range(0.0..3.1), rng.random_range(0.0..6.2), rng.random_range(0.1..3.0));
        specs.push(GateSpec::rotation(th, ph, ang, false));
        specs.push(GateSpec::rotation(th, ph, ang, true));
    }
    let mut leak: f64 = 0.0;
    for g in &specs {
        let evo = GateEvolution::new(g)?;
        let u = evo.unitary(evo.t_gate())?;
        worst = worst.max(phase_aligned_distance(u.matrix(), g.target_unitary()?.matrix()));
        if g.is_logical() {
            let times: Vec<f64> = (1..=10).map(|k| evo.t_gate() * k as f64 / 10.0).collect();
            leak = leak.max(subspace_leakage(&evo, &times)?);
        }
    }
    s.at_most("gates", "exponential_matches_closed_form", worst, 1e-10);
    s.at_most("gates", "logical_leakage", leak, 1e-10);
    Ok(())
}

fn synth_checks(s: &mut Suite) -> Result<(), CliError> {
    let windows = [
        (BlockKind::Second, log_space(10f64.powf(-2.5), 0.1, 6)),
        (BlockKind::Third, log_space(10f64.powf(-2.5), 0.1, 6)),
        (BlockKind::Seventh, log_space(0.05, 0.2, 6)),
        (BlockKind::FourBody, log_space(0.01, 0.1, 6)),
    ];
    let mut unitarity: f64 = 0.0;
    for (block, eps) in windows {
        let mut res = Vec::new();
        for &e in &eps {
            let plan = residual_plan(block, e)?;
            unitarity = unitarity.max(plan.compose()?.unitarity_defect());
            res.push(plan.residual()?);
        }
        let (target, tol) = block.expected_slope();
        s.slope("synth", &format!("{}_residual_slope", block.name()), &eps, &res, target, tol);
    }
    s.at_most("synth", "composed_unitarity", unitarity, 1e-10);
    let single = pauli_exp(&PauliString::parse("ZX")?, 0.3)?;
    s.at_most("synth", "pauli_exp_unitarity", single.unitarity_defect(), 1e-14);
    Ok(())
}

/// Runs every invariant with an optional injected defect.
pub fn run_checks(fixture: Fixture) -> Result<VerifyReport, CliError> {
    let mut s = Suite { checks: Vec::new() };
    operator_checks(&mut s)?;
    code_checks(&mut s, fixture)?;
    perturbation_checks(&mut s)?;
    gate_checks(&mut s)?;
    synth_checks(&mut s)?;
    Ok(VerifyReport { passed: s.checks.iter().all(|c| c.passed), checks: s.checks })
}

pub fn cmd_verify(settings: &RunSettings) -> Result<CommandOutcome, CliError> {
    let report = run_checks(Fixture::default())?;
    let mut out = CommandOutcome { enforced: true, ..Default::default() };
    for ch in &report.checks {
        let tag = if ch.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(
            out.summary,
            "{tag} {}/{}: {:.3e} (expected {})",
            ch.module, ch.invariant, ch.measured, ch.expected
        );
        out.assertions.push(Assertion {
            name: format!("{}/{}", ch.module, ch.invariant),
            measured: ch.measured,
            expected: ch.expected.clone(),
            passed: ch.passed,
        });
    }
    let _ = writeln!(out.summary, "verify: {}", if report.passed { "all invariants hold" } else { "FAILED" });
    out.files.push(write_json(&settings.out_dir.join("verify.json"), &report)?);
    Ok(out)
}
