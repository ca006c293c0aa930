//! The experiment file: one TOML document per run, parsed strictly.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use qecstep::gates::GateSpec;
use qecstep::perturbation::QuadratureSpec;
use qecstep::protocol::{ProtocolConfig, StepRule};
use qecstep::synth::SweepGate;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Verify,
    Perturb,
    Synth,
    Protocol,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Verify => "verify",
            CommandKind::Perturb => "perturb",
            CommandKind::Synth => "synth",
            CommandKind::Protocol => "protocol",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Write per-step protocol records into the JSON summary.
    #[serde(default)]
    pub verbose_records: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturb: Option<PerturbSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolSection>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Usage(format!("cannot serialize config: {e}")))
    }
}

fn default_sigma_lz() -> GateSpec {
    GateSpec::rotation(0.0, 0.0, PI / 2.0, true)
}

fn default_time() -> f64 {
    0.5
}

fn default_amplitudes() -> [f64; 2] {
    [0.6, 0.8]
}

fn yes() -> bool {
    true
}

/// Residual of the second-order prediction against exact evolution, over λ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbSection {
    pub lambdas: Vec<f64>,
    #[serde(default = "default_sigma_lz")]
    pub gate: GateSpec,
    /// Evolution time of the prediction.
    #[serde(default = "default_time")]
    pub time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequencies: Option<Vec<f64>>,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    /// `(α, β)` of each block (encoded gates) or each qubit (physical gates).
    #[serde(default = "default_amplitudes")]
    pub initial: [f64; 2],
    /// Also compare the gate-frame kernel with the bare-bath kernel.
    #[serde(default = "yes")]
    pub commuting_check: bool,
}

/// Which group-commutator block a residual sweep measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Second,
    Third,
    Seventh,
    FourBody,
}

impl BlockKind {
    pub fn name(self) -> &'static str {
        match self {
            BlockKind::Second => "second",
            BlockKind::Third => "third",
            BlockKind::Seventh => "seventh",
            BlockKind::FourBody => "four_body",
        }
    }

    /// Residual order the block is built for.
    pub fn expected_slope(self) -> (f64, f64) {
        match self {
            BlockKind::Second => (3.0, 0.2),
            BlockKind::Third => (4.0, 0.2),
            BlockKind::Seventh => (8.0, 0.4),
            BlockKind::FourBody => (4.0, 0.3),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthRun {
    pub gate: SweepGate,
    pub order: u8,
    pub n_values: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualRun {
    pub block: BlockKind,
    pub epsilons: Vec<f64>,
}

fn default_synth_runs() -> Vec<SynthRun> {
    let ns = vec![10, 30, 100, 200, 300, 1000];
    vec![
        SynthRun { gate: SweepGate::SigmaX, order: 2, n_values: ns.clone() },
        SynthRun { gate: SweepGate::SigmaX, order: 3, n_values: ns },
        SynthRun { gate: SweepGate::Cnot, order: 3, n_values: vec![10, 30, 100, 200, 300] },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    #[serde(default = "default_synth_runs")]
    pub runs: Vec<SynthRun>,
    #[serde(default)]
    pub residuals: Vec<ResidualRun>,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self { runs: default_synth_runs(), residuals: Vec::new() }
    }
}

fn default_step_rule() -> StepRule {
    StepRule::InverseSqrt { scale: 1.0 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    pub template: ProtocolConfig,
    /// Step counts for a sweep at the template's λ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<usize>>,
    /// Coupling strengths for a sweep with `step_rule` choosing N.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default = "default_step_rule")]
    pub step_rule: StepRule,
    /// Also compare the template gate against the idle memory.
    #[serde(default)]
    pub control: bool,
}
