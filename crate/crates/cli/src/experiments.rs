//! The `perturb`, `synth` and `protocol` commands.

use std::fmt;
use std::fmt::Write as _;
use std::path::PathBuf;

use qecstep::bath::{build_dephasing_bath, default_frequencies, BathModel};
use qecstep::code::CodeSpec;
use qecstep::fit::SlopeFit;
use qecstep::gates::GateSpec;
use qecstep::operator::{c, kron_kets, DensityMatrix, Ket, PauliString};
use qecstep::perturbation::{error_superop, prediction_residual};
use qecstep::protocol::{
    commuting_gate_control, coupling_commutator_norm, sweep_lambda, sweep_steps, ControlComparison, ProtocolResult,
    ScalingTable, StepRule,
};
use qecstep::synth::{self, fidelity_sweep, SweepGate, SweepRow, SynthesisPlan};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{BlockKind, PerturbSection, SynthSection};
use crate::output::{fmt_f64, write_csv, write_json, PERTURB_HEADER, PROTOCOL_HEADER, RESIDUAL_HEADER, SYNTH_HEADER};
use crate::{CliError, RunSettings};

/// A measured quantity checked against its window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub measured: f64,
    pub expected: String,
    pub passed: bool,
}

impl Assertion {
    pub fn within(name: impl Into<String>, measured: f64, target: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            expected: format!("{target} ± {tol}"),
            passed: (measured - target).abs() <= tol,
        }
    }

    pub fn between(name: impl Into<String>, measured: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            expected: format!("in [{lo:.3e}, {hi:.3e}]"),
            passed: measured >= lo && measured <= hi,
        }
    }

    pub fn at_most(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self { name: name.into(), measured, expected: format!("≤ {bound:.3e}"), passed: measured <= bound }
    }

    fn missing(name: impl Into<String>, why: &str) -> Self {
        Self { name: name.into(), measured: f64::NAN, expected: why.to_string(), passed: false }
    }
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: measured {:.6} (expected {})", self.name, self.measured, self.expected)
    }
}

/// What a command produced.
#[derive(Clone, Debug, Default)]
pub struct CommandOutcome {
    pub summary: String,
    pub assertions: Vec<Assertion>,
    pub warnings: Vec<String>,
    pub files: Vec<PathBuf>,
    /// The assertions decide the exit status even without `--assert`.
    pub enforced: bool,
}

impl CommandOutcome {
    pub fn passed(&self, assert: bool) -> bool {
        !(assert || self.enforced) || self.assertions.iter().all(|a| a.passed)
    }
}

fn fit_or_warn(x: &[f64], y: &[f64], what: &str, warnings: &mut Vec<String>) -> Option<SlopeFit> {
    match SlopeFit::new(x, y) {
        Ok(f) => {
            if f.decades() < 1.0 {
                warnings.push(format!("{what}: fit window spans only {:.2} decades", f.decades()));
            }
            Some(f)
        }
        Err(e) => {
            warnings.push(format!("{what}: {e}"));
            None
        }
    }
}

fn slope_line(what: &str, fit: &Option<SlopeFit>) -> String {
    match fit {
        Some(f) => format!(
            "{what}: slope {:.4}, R² {:.5}, window [{:.3e}, {:.3e}]\n",
            f.slope, f.r_squared, f.window.0, f.window.1
        ),
        None => format!("{what}: no fit\n"),
    }
}

fn initial_ket(gate: &GateSpec, [a, b]: [f64; 2]) -> Result<Ket, CliError> {
    let norm = a * a + b * b;
    if (norm - 1.0).abs() > 1e-9 {
        return Err(qecstep::Error::NotNormalized(norm).into());
    }
    let unit = if gate.is_logical() {
        CodeSpec::phase_flip().encode(c(a, 0.0), c(b, 0.0))?
    } else {
        Ket::from_vec(vec![c(a, 0.0), c(b, 0.0)])
    };
    Ok(kron_kets(&vec![unit; gate.n_units()]))
}

#[derive(Serialize)]
struct CommutingCheck {
    commutator_norm: f64,
    kernel_deviation: f64,
    /// The gate commutes with the coupling and the two kernels agree.
    equality_holds: bool,
}

#[derive(Serialize)]
struct PerturbReport<'a> {
    section: &'a PerturbSection,
    rows: Vec<(f64, f64)>,
    fit: Option<SlopeFit>,
    commuting: Option<CommutingCheck>,
    warnings: &'a [String],
}

fn bath_for(section: &PerturbSection, n: usize, lambda: f64) -> Result<BathModel, CliError> {
    let freqs = section.frequencies.clone().unwrap_or_else(|| default_frequencies(n));
    Ok(build_dephasing_bath(n, &freqs, lambda)?)
}

pub fn cmd_perturb(settings: &RunSettings) -> Result<CommandOutcome, CliError> {
    let section =
        settings.config.perturb.as_ref().ok_or_else(|| CliError::Usage("perturb needs a [perturb] section".into()))?;
    let positive = section.lambdas.iter().filter(|l| **l > 0.0).count();
    if positive < 4 || section.lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(CliError::Usage(format!(
            "perturb needs at least 4 positive lambda values and none negative, got {:?}",
            section.lambdas
        )));
    }
    let gate = &section.gate;
    let n = gate.n_qubits();
    if n > 3 {
        return Err(CliError::Usage(format!("perturb handles up to 3 system qubits, the gate has {n}")));
    }
    let h_s = gate.hamiltonian()?;
    let psi = initial_ket(gate, section.initial)?;
    let rho = DensityMatrix::pure(&vec![2; n], &psi)?;

    let residuals = section
        .lambdas
        .par_iter()
        .map(|&lambda| {
            let bath = bath_for(section, n, lambda)?;
            Ok(prediction_residual(&rho, &bath, Some(&h_s), section.time, &section.quadrature)?)
        })
        .collect::<Result<Vec<f64>, CliError>>()?;
    let rows: Vec<(f64, f64)> = section.lambdas.iter().copied().zip(residuals).collect();

    let mut out = CommandOutcome::default();
    let (x, y): (Vec<f64>, Vec<f64>) = rows.iter().filter(|(l, _)| *l > 0.0).copied().unzip();
    let fit = fit_or_warn(&x, &y, "perturb residual", &mut out.warnings);

    let commuting = if section.commuting_check {
        let norm = coupling_commutator_norm(gate)?;
        let bath = bath_for(section, n, 1.0)?;
        let joint = bath.joint_state(&rho)?;
        let with_gate = error_superop(&bath, Some(&h_s), section.time, &section.quadrature)?.apply(&joint)?;
        let bare = error_superop(&bath, None, section.time, &section.quadrature)?.apply(&joint)?;
        let dev = (with_gate - bare).max_norm();
        Some(CommutingCheck {
            commutator_norm: norm,
            kernel_deviation: dev,
            equality_holds: norm < 1e-10 && dev < 1e-10,
        })
    } else {
        None
    };

    if let Some(f) = &fit {
        out.assertions.push(Assertion::within("perturbative residual slope vs lambda", f.slope, 3.0, 0.25));
    }
    let csv_rows: Vec<Vec<String>> = rows.iter().map(|(l, r)| vec![fmt_f64(*l), fmt_f64(*r)]).collect();
    let dir = &settings.out_dir;
    out.files.push(write_csv(&dir.join("perturb.csv"), &PERTURB_HEADER, &csv_rows)?);

    out.summary.push_str(&slope_line("residual vs lambda", &fit));
    if let Some(cc) = &commuting {
        let _ = writeln!(
            out.summary,
            "commuting check: ‖[H_S, Z_k]‖ = {:.3e}, kernel deviation {:.3e}, equality {}",
            cc.commutator_norm, cc.kernel_deviation, cc.equality_holds
        );
    }
    let report = PerturbReport { section, rows, fit, commuting, warnings: &out.warnings };
    out.files.push(write_json(&dir.join("perturb.json"), &report)?);
    Ok(out)
}

/// Plan for a residual-order measurement at one ε.
pub fn residual_plan(block: BlockKind, eps: f64) -> Result<SynthesisPlan, CliError> {
    let a = PauliString::parse("ZXI")?;
    let b = PauliString::parse("IYZ")?;
    Ok(match block {
        BlockKind::Second => synth::block_2nd(&a, &b, eps)?,
        BlockKind::Third => synth::block_3rd(&a, &b, eps)?,
        BlockKind::Seventh => synth::inner_7th(eps)?,
        BlockKind::FourBody => synth::cnot_4body(eps, true)?,
    })
}

#[derive(Serialize)]
struct SweepSummary {
    gate: SweepGate,
    order: u8,
    worst_by_n: Vec<(usize, f64)>,
    fit: Option<SlopeFit>,
}

#[derive(Serialize)]
struct ResidualSummary {
    block: BlockKind,
    rows: Vec<(f64, f64)>,
    fit: Option<SlopeFit>,
}

#[derive(Serialize)]
struct SynthReport<'a> {
    section: &'a SynthSection,
    sweeps: Vec<SweepSummary>,
    residuals: Vec<ResidualSummary>,
    assertions: &'a [Assertion],
    warnings: &'a [String],
}

/// Worst infidelity over initial states at each N, in sweep order.
fn worst_by_n(rows: &[SweepRow]) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::new();
    for r in rows {
        match out.last_mut() {
            Some((n, w)) if *n == r.n => *w = w.max(r.infidelity),
            _ => out.push((r.n, r.infidelity)),
        }
    }
    out
}

pub fn cmd_synth(settings: &RunSettings) -> Result<CommandOutcome, CliError> {
    let section = settings.config.synth.clone().unwrap_or_default();
    let mut out = CommandOutcome::default();
    let mut csv_rows = Vec::new();
    let mut sweeps = Vec::new();
    for run in &section.runs {
        if run.n_values.is_empty() || run.n_values.contains(&0) {
            return Err(CliError::Usage(format!("synth run {run:?} needs positive N values")));
        }
        let rows = fidelity_sweep(run.gate, &run.n_values, run.order)?;
        for r in &rows {
            csv_rows.push(vec![
                r.gate.label().to_string(),
                r.order.to_string(),
                r.n.to_string(),
                fmt_f64(r.epsilon),
                r.initial_state.clone(),
                fmt_f64(r.infidelity),
            ]);
        }
        let worst = worst_by_n(&rows);
        let label = format!("{} order {}", run.gate.label(), run.order);
        let fit = if worst.len() >= 4 {
            let (x, y): (Vec<f64>, Vec<f64>) = worst.iter().map(|(n, w)| (*n as f64, *w)).unzip();
            fit_or_warn(&x, &y, &format!("{label} infidelity"), &mut out.warnings)
        } else {
            None
        };
        out.summary.push_str(&slope_line(&format!("{label} worst infidelity vs N"), &fit));
        for (n, w) in &worst {
            let _ = writeln!(out.summary, "  N = {n:>5}: {w:.3e}");
        }

        match (run.gate, run.order) {
            (SweepGate::SigmaX, 2) => out.assertions.push(match worst.iter().find(|(n, _)| *n == 1000) {
                Some((_, w)) => Assertion::between(
                    format!("{label} infidelity at N = 1000"),
                    *w,
                    10f64.powf(-3.5),
                    10f64.powf(-2.5),
                ),
                None => Assertion::missing(format!("{label} infidelity at N = 1000"), "N = 1000 in the sweep"),
            }),
            (_, 3) => out.assertions.push(match worst.iter().rfind(|(n, _)| *n <= 300) {
                Some((n, w)) => Assertion::at_most(format!("{label} infidelity by N = 300 (at N = {n})"), *w, 1e-4),
                None => Assertion::missing(format!("{label} infidelity by N = 300"), "an N ≤ 300 in the sweep"),
            }),
            _ => {}
        }
        sweeps.push(SweepSummary { gate: run.gate, order: run.order, worst_by_n: worst, fit });
    }

    let mut residuals = Vec::new();
    let mut residual_rows = Vec::new();
    for run in &section.residuals {
        let rows = run
            .epsilons
            .par_iter()
            .map(|&e| Ok((e, residual_plan(run.block, e)?.residual()?)))
            .collect::<Result<Vec<(f64, f64)>, CliError>>()?;
        for (e, r) in &rows {
            residual_rows.push(vec![run.block.name().to_string(), fmt_f64(*e), fmt_f64(*r)]);
        }
        let (x, y): (Vec<f64>, Vec<f64>) = rows.iter().copied().unzip();
        let fit = fit_or_warn(&x, &y, &format!("{} block residual", run.block.name()), &mut out.warnings);
        out.summary.push_str(&slope_line(&format!("{} block residual vs epsilon", run.block.name()), &fit));
        if let Some(f) = &fit {
            let (target, tol) = run.block.expected_slope();
            out.assertions.push(Assertion::within(
                format!("{} block residual slope", run.block.name()),
                f.slope,
                target,
                tol,
            ));
        }
        residuals.push(ResidualSummary { block: run.block, rows, fit });
    }

    let dir = &settings.out_dir;
    out.files.push(write_csv(&dir.join("synth.csv"), &SYNTH_HEADER, &csv_rows)?);
    if !section.residuals.is_empty() {
        out.files.push(write_csv(&dir.join("synth_residuals.csv"), &RESIDUAL_HEADER, &residual_rows)?);
    }
    let report =
        SynthReport { section: &section, sweeps, residuals, assertions: &out.assertions, warnings: &out.warnings };
    out.files.push(write_json(&dir.join("synth.json"), &report)?);
    Ok(out)
}

#[derive(Serialize)]
struct ProtocolReport<'a> {
    seed: u64,
    steps_sweep: Option<&'a ScalingTable>,
    lambda_sweep: Option<&'a ScalingTable>,
    control: Option<&'a ControlComparison>,
    assertions: &'a [Assertion],
    warnings: &'a [String],
}

fn protocol_row(r: &ProtocolResult) -> Vec<String> {
    vec![
        fmt_f64(r.config.lambda),
        r.config.steps.to_string(),
        r.backend.clone(),
        fmt_f64(r.correction_rate.mean),
        fmt_f64(r.failure_rate.mean),
        r.config.trials.to_string(),
        fmt_f64(r.failure_rate.ci_low),
        fmt_f64(r.failure_rate.ci_high),
    ]
}

/// Drops per-trial data from a result unless records were requested.
fn trim(mut r: ProtocolResult, verbose: bool) -> ProtocolResult {
    if !verbose {
        r.trial_seeds.clear();
        r.records = None;
    }
    r
}

pub fn cmd_protocol(settings: &RunSettings) -> Result<CommandOutcome, CliError> {
    let cfg = &settings.config;
    let section = cfg.protocol.as_ref().ok_or_else(|| CliError::Usage("protocol needs a [protocol] section".into()))?;
    let mut template = section.template.clone();
    template.seed = cfg.seed;
    template.record_steps = cfg.verbose_records;
    if section.steps.is_none() && section.lambdas.is_none() && !section.control {
        return Err(CliError::Usage("protocol needs `steps`, `lambdas` or `control = true`".into()));
    }
    if matches!(&section.lambdas, Some(l) if l.is_empty()) {
        return Err(CliError::Usage("the lambda list is empty".into()));
    }
    if matches!(&section.steps, Some(s) if s.is_empty()) {
        return Err(CliError::Usage("the step list is empty".into()));
    }

    let mut out = CommandOutcome::default();
    let verbose = cfg.verbose_records;
    let trim_table = |mut t: ScalingTable| {
        t.rows = t.rows.into_iter().map(|r| trim(r, verbose)).collect();
        t
    };
    let steps_table = match &section.steps {
        Some(ns) => Some(trim_table(sweep_steps(&template, ns)?)),
        None => None,
    };
    let lambda_table = match &section.lambdas {
        Some(ls) => Some(trim_table(sweep_lambda(&template, ls, section.step_rule)?)),
        None => None,
    };
    let control = if section.control {
        let mut c = commuting_gate_control(&template)?;
        c.control = trim(c.control, verbose);
        c.baseline = trim(c.baseline, verbose);
        Some(c)
    } else {
        None
    };

    let mut csv_rows = Vec::new();
    if let Some(t) = &steps_table {
        csv_rows.extend(t.rows.iter().map(protocol_row));
        out.warnings.extend(t.warnings.iter().cloned());
        out.summary.push_str(&slope_line("corrections vs N", &t.correction_fit));
        out.summary.push_str(&slope_line("failure vs N", &t.failure_fit));
        if let Some(f) = &t.correction_fit {
            out.assertions.push(Assertion::within("expected corrections vs N slope", f.slope, -1.0, 0.3));
        }
    }
    if let Some(t) = &lambda_table {
        csv_rows.extend(t.rows.iter().map(protocol_row));
        out.warnings.extend(t.warnings.iter().cloned());
        out.summary.push_str(&slope_line("corrections vs lambda", &t.correction_fit));
        out.summary.push_str(&slope_line("failure vs lambda", &t.failure_fit));
        if let StepRule::InverseSqrt { .. } = section.step_rule {
            if let Some(f) = &t.correction_fit {
                out.assertions.push(Assertion::within("correction probability vs lambda slope", f.slope, 2.5, 0.4));
            }
            if let Some(f) = &t.failure_fit {
                out.assertions.push(Assertion::within("uncorrectable failure vs lambda slope", f.slope, 3.0, 0.5));
            }
        }
    }
    if let Some(c) = &control {
        csv_rows.push(protocol_row(&c.control));
        csv_rows.push(protocol_row(&c.baseline));
        let _ = writeln!(
            out.summary,
            "commuting control: failure {:.4e} vs memory {:.4e} (z = {:.3})",
            c.control.failure_rate.mean, c.baseline.failure_rate.mean, c.z_score
        );
        out.assertions.push(Assertion::at_most("commuting gate vs memory |z|", c.z_score.abs(), 2.0));
    }

    let dir = &settings.out_dir;
    out.files.push(write_csv(&dir.join("protocol.csv"), &PROTOCOL_HEADER, &csv_rows)?);
    let report = ProtocolReport {
        seed: cfg.seed,
        steps_sweep: steps_table.as_ref(),
        lambda_sweep: lambda_table.as_ref(),
        control: control.as_ref(),
        assertions: &out.assertions,
        warnings: &out.warnings,
    };
    out.files.push(write_json(&dir.join("protocol.json"), &report)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assertion_windows() {
        assert!(Assertion::within("a", 3.1, 3.0, 0.25).passed);
        assert!(!Assertion::within("a", 3.3, 3.0, 0.25).passed);
        assert!(Assertion::between("b", 1e-3, 1e-4, 1e-2).passed);
        assert!(!Assertion::at_most("c", 2e-4, 1e-4).passed);
        assert!(!Assertion::missing("d", "x").passed);
        assert!(Assertion::within("a", 3.1, 3.0, 0.25).to_string().starts_with("PASS a"));
    }

    #[test]
    fn worst_case_groups_by_n() {
        let row = |n, inf| SweepRow {
            gate: SweepGate::SigmaX,
            order: 2,
            n,
            epsilon: 0.1,
            initial_state: String::new(),
            infidelity: inf,
        };
        let w = worst_by_n(&[row(10, 1e-2), row(10, 3e-2), row(20, 1e-3), row(20, 5e-4)]);
        assert_eq!(w, vec![(10, 3e-2), (20, 1e-3)]);
    }

    #[test]
    fn outcome_exit_rule() {
        let mut o = CommandOutcome::default();
        o.assertions.push(Assertion::at_most("x", 2.0, 1.0));
        assert!(o.passed(false));
        assert!(!o.passed(true));
        o.enforced = true;
        assert!(!o.passed(false));
    }
}
