//! Gate execution in `N` short steps with a syndrome measurement and recovery
//! after every step.
//!
//! Two noise backends drive a trial:
//!
//! * `stochastic`: pure-state trajectories with independent phase flips of
//!   probability `p = c (λ Δt)²` per qubit and step. A flip happens either at
//!   the end of the step or at a uniformly drawn instant inside it, in which
//!   case it is sandwiched between the two pieces of the gate evolution.
//! * `exact`: the three system qubits evolve jointly with one bath mode each
//!   under `H_S + H_E + λ H_int`. Without bath reset the joint pure state is
//!   carried from step to step and the syndrome measurement acts on it
//!   directly. With reset the bath is traced out after every step and
//!   re-prepared in its vacuum, which makes the step a Kraus map on the
//!   system density matrix.
//!
//! Rare events are oversampled. Each trial carries a likelihood-ratio weight,
//! and the expected number of corrections is accumulated as the weighted sum of
//! the per-step probabilities of a non-trivial syndrome, which has much less
//! variance than counting sampled corrections.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::{build_dephasing_bath, calibrated_flip_probability, default_frequencies};
use crate::code::{sample_outcome, CodeSpec, Syndrome, BLOCK_QUBITS};
use crate::error::{Error, Result};
use crate::fit::SlopeFit;
use crate::gates::GateSpec;
use crate::operator::{
    c, expm_hermitian, kron_kets, partial_trace, trace_distance, DensityMatrix, Ket, Matrix, Operator, Pauli,
    PauliString, Spectrum,
};
use crate::seed::{derive_seed, stream_rng};

/// Syndrome probabilities below this are treated as impossible.
pub const IMPOSSIBLE_PROBABILITY: f64 = 1e-14;

/// Largest relative standard error for which an estimate counts as resolved.
pub const RESOLUTION_REL_SE: f64 = 0.25;

const Z95: f64 = 1.959_963_984_540_054;

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn default_trials() -> usize {
    10_000
}

/// When a stochastic flip strikes within its step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorTiming {
    /// After the gate slice, immediately before the syndrome measurement.
    Boundary,
    /// At a uniformly distributed instant inside the step.
    #[default]
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Backend {
    Stochastic {
        #[serde(default)]
        timing: ErrorTiming,
        /// `c` in `p = c (λ Δt)²`.
        #[serde(default = "one")]
        calibration: f64,
        /// Per-qubit flip probabilities replacing the calibrated value.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        flip_probabilities: Option<Vec<f64>>,
    },
    Exact {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        frequencies: Option<Vec<f64>>,
        #[serde(default)]
        reset_bath_each_step: bool,
    },
}

impl Default for Backend {
    fn default() -> Self {
        Backend::Stochastic { timing: ErrorTiming::default(), calibration: 1.0, flip_probabilities: None }
    }
}

impl Backend {
    pub fn exact() -> Self {
        Backend::Exact { frequencies: None, reset_bath_each_step: false }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Backend::Stochastic { .. } => "stochastic",
            Backend::Exact { reset_bath_each_step: false, .. } => "exact",
            Backend::Exact { reset_bath_each_step: true, .. } => "exact_reset",
        }
    }
}

/// How a trial's final state is scored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FailureMetric {
    /// Trace distance to the ideal output.
    #[default]
    TraceDistance,
    /// `1 − F` against the ideal output.
    Infidelity,
    /// Indicator of `F < 1 − budget · λ² t_g²`.
    Threshold {
        #[serde(default = "one")]
        budget: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Must be an encoded gate.
    pub gate: GateSpec,
    pub steps: usize,
    pub lambda: f64,
    #[serde(default)]
    pub backend: Backend,
    /// Real amplitudes `(α, β)` of each block; `(0.6, 0.8)` per block when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<[f64; 2]>>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub metric: FailureMetric,
    #[serde(default = "yes")]
    pub importance_sampling: bool,
    #[serde(default)]
    pub record_steps: bool,
}

impl ProtocolConfig {
    pub fn new(gate: GateSpec, steps: usize, lambda: f64, backend: Backend) -> Self {
        Self {
            gate,
            steps,
            lambda,
            backend,
            initial: None,
            trials: default_trials(),
            seed: 0,
            metric: FailureMetric::default(),
            importance_sampling: true,
            record_steps: false,
        }
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn dt(&self) -> f64 {
        self.gate.t_gate() / self.steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        self.gate.validate()?;
        if !self.gate.is_logical() {
            return Err(Error::UnsupportedGate("the protocol runs encoded gates only; set logical = true".into()));
        }
        if self.steps == 0 {
            return Err(Error::InvalidParameter("steps must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::InvalidParameter(format!("lambda = {} must be finite and non-negative", self.lambda)));
        }
        if let FailureMetric::Threshold { budget } = self.metric {
            if !budget.is_finite() || budget < 0.0 {
                return Err(Error::InvalidParameter(format!("threshold budget {budget} must be non-negative")));
            }
        }
        if let Some(init) = &self.initial {
            if init.len() != self.gate.n_units() {
                return Err(Error::InvalidParameter(format!(
                    "{} initial blocks given for a gate on {} blocks",
                    init.len(),
                    self.gate.n_units()
                )));
            }
            for [a, b] in init {
                let norm = a * a + b * b;
                if (norm - 1.0).abs() > 1e-9 {
                    return Err(Error::NotNormalized(norm));
                }
            }
        }
        let n = self.gate.n_qubits();
        match &self.backend {
            Backend::Stochastic { calibration, flip_probabilities, .. } => {
                if !calibration.is_finite() || *calibration < 0.0 {
                    return Err(Error::InvalidParameter(format!("calibration {calibration} must be non-negative")));
                }
                if let Some(p) = flip_probabilities {
                    if p.len() != n || p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                        return Err(Error::InvalidParameter(format!(
                            "flip_probabilities needs {n} values in [0, 1], got {p:?}"
                        )));
                    }
                }
            }
            Backend::Exact { frequencies, .. } => {
                if n != BLOCK_QUBITS {
                    return Err(Error::UnsupportedGate(format!(
                        "the exact bath backend handles one code block ({BLOCK_QUBITS} qubits), this gate has {n}; \
                         use the stochastic backend"
                    )));
                }
                if let Some(f) = frequencies {
                    if f.len() != n {
                        return Err(Error::InvalidParameter(format!("{} bath frequencies for {n} qubits", f.len())));
                    }
                }
            }
        }
        Ok(())
    }

    fn initial_amplitudes(&self) -> Vec<[f64; 2]> {
        self.initial.clone().unwrap_or_else(|| vec![[0.6, 0.8]; self.gate.n_units()])
    }

    fn flip_probabilities(&self) -> Vec<f64> {
        match &self.backend {
            Backend::Stochastic { flip_probabilities: Some(p), .. } => p.clone(),
            Backend::Stochastic { calibration, .. } => {
                vec![calibrated_flip_probability(self.lambda, self.dt(), *calibration); self.gate.n_qubits()]
            }
            Backend::Exact { .. } => Vec::new(),
        }
    }
}

/// One step of one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// One syndrome per code block.
    pub syndromes: Vec<Syndrome>,
    pub corrected: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    /// Likelihood ratio of the sampled history.
    pub weight: f64,
    pub steps: Vec<StepRecord>,
    pub fidelity: f64,
    pub metric: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    Wilson,
    Normal,
}

/// A Monte-Carlo mean with its 95% interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub interval: IntervalKind,
    /// False when the mean is zero or its relative standard error exceeds
    /// [`RESOLUTION_REL_SE`].
    pub resolved: bool,
}

impl Estimate {
    /// Normal-approximation estimate from per-trial values.
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var =
            if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        let se = (var / n).sqrt();
        Self {
            mean,
            std_error: se,
            ci_low: (mean - Z95 * se).max(0.0),
            ci_high: mean + Z95 * se,
            interval: IntervalKind::Normal,
            resolved: Self::is_resolved(mean, se),
        }
    }

    /// Wilson score interval for `k` successes in `n` Bernoulli trials.
    pub fn wilson(k: usize, n: usize) -> Self {
        let nf = n as f64;
        let p = k as f64 / nf;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / nf;
        let centre = (p + z2 / (2.0 * nf)) / denom;
        let half = Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
        let se = (p * (1.0 - p) / nf).sqrt();
        Self {
            mean: p,
            std_error: se,
            ci_low: (centre - half).max(0.0),
            ci_high: (centre + half).min(1.0),
            interval: IntervalKind::Wilson,
            resolved: Self::is_resolved(p, se),
        }
    }

    fn is_resolved(mean: f64, se: f64) -> bool {
        mean > 0.0 && se <= RESOLUTION_REL_SE * mean
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolResult {
    pub config: ProtocolConfig,
    pub backend: String,
    pub dt: f64,
    /// Expected number of corrections per run of the gate.
    pub correction_rate: Estimate,
    /// Expected failure metric per run.
    pub failure_rate: Estimate,
    /// Expected fidelity of the corrected output with the ideal output.
    pub mean_fidelity: f64,
    /// Corrections applied across all sampled trials, unweighted.
    pub corrections_sampled: usize,
    pub trial_seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records: Option<Vec<TrialRecord>>,
}

struct TrialOutcome {
    weight: f64,
    expected_corrections: f64,
    corrections: usize,
    fidelity: f64,
    metric: f64,
    steps: Vec<StepRecord>,
}

/// State of a trajectory: a pure ket (possibly including the bath) or a
/// system density matrix.
enum TrajState {
    Pure(Ket),
    Mixed(DensityMatrix),
}

/// Everything a trial needs that does not depend on the trial index.
struct Shared {
    cfg: ProtocolConfig,
    code: CodeSpec,
    n_blocks: usize,
    n_qubits: usize,
    dt: f64,
    psi0: Ket,
    ideal: Ket,
    kind: Kind,
}

enum Kind {
    Stochastic { spectrum: Spectrum, p: Vec<f64>, q: Vec<f64>, zs: Vec<PauliString>, timing: ErrorTiming },
    ExactJoint { u: Operator, vacuum: Ket },
    ExactReset { kraus: Vec<Matrix> },
}

impl Shared {
    fn new(cfg: &ProtocolConfig) -> Result<Self> {
        cfg.validate()?;
        let code = CodeSpec::phase_flip();
        let n_blocks = cfg.gate.n_units();
        let n_qubits = cfg.gate.n_qubits();
        let dt = cfg.dt();
        let blocks = cfg
            .initial_amplitudes()
            .iter()
            .map(|[a, b]| code.encode(c(*a, 0.0), c(*b, 0.0)))
            .collect::<Result<Vec<_>>>()?;
        let psi0 = kron_kets(&blocks);
        let h_s = cfg.gate.hamiltonian()?;
        let ideal = expm_hermitian(&h_s, cfg.gate.t_gate())?.apply(&psi0);
        let kind = match &cfg.backend {
            Backend::Stochastic { timing, .. } => {
                let p = cfg.flip_probabilities();
                let floor = (1.0 / (cfg.steps * n_qubits) as f64).min(0.5);
                let q = p
                    .iter()
                    .map(|&pk| if !cfg.importance_sampling || pk == 0.0 { pk } else { pk.max(floor) })
                    .collect();
                let zs = (0..n_qubits).map(|k| PauliString::single(n_qubits, k, Pauli::Z)).collect::<Result<_>>()?;
                Kind::Stochastic { spectrum: Spectrum::of(&h_s)?, p, q, zs, timing: *timing }
            }
            Backend::Exact { frequencies, reset_bath_each_step } => {
                let freqs = frequencies.clone().unwrap_or_else(|| default_frequencies(n_qubits));
                let bath = build_dephasing_bath(n_qubits, &freqs, cfg.lambda)?;
                let u = expm_hermitian(&bath.total_hamiltonian(Some(&h_s))?, dt)?;
                let vacuum = bath.vacuum();
                if *reset_bath_each_step {
                    Kind::ExactReset { kraus: kraus_operators(&u, &vacuum) }
                } else {
                    Kind::ExactJoint { u, vacuum }
                }
            }
        };
        Ok(Self { cfg: cfg.clone(), code, n_blocks, n_qubits, dt, psi0, ideal, kind })
    }

    fn trial(&self, index: usize) -> Result<TrialOutcome> {
        let mut rng = stream_rng(self.cfg.seed, "trial", index as u64);
        let mut weight = 1.0;
        let mut expected = 0.0;
        let mut corrections = 0;
        let mut steps = Vec::new();
        let mut state = match &self.kind {
            Kind::ExactJoint { vacuum, .. } => TrajState::Pure(kron_kets(&[self.psi0.clone(), vacuum.clone()])),
            Kind::ExactReset { .. } => TrajState::Mixed(DensityMatrix::pure(&vec![2; self.n_qubits], &self.psi0)?),
            Kind::Stochastic { .. } => TrajState::Pure(self.psi0.clone()),
        };
        for _ in 0..self.cfg.steps {
            state = self.evolve(state, &mut weight, &mut rng)?;
            let mut syndromes = Vec::with_capacity(self.n_blocks);
            for block in 0..self.n_blocks {
                let probs = self.syndrome_probabilities(&state, block)?;
                let total: f64 = probs.iter().sum();
                let probs = probs.map(|p| p / total);
                let p_nt = 1.0 - probs[0];
                expected += weight * p_nt;
                let q = self.biased(&probs);
                let s = sample_outcome(&q, rng.random::<f64>());
                weight *= probs[s.index()] / q[s.index()];
                state = self.project_and_recover(state, s, block)?;
                syndromes.push(s);
            }
            let corrected = syndromes.iter().any(|s| !s.is_trivial());
            corrections += syndromes.iter().filter(|s| !s.is_trivial()).count();
            if self.cfg.record_steps {
                steps.push(StepRecord { syndromes, corrected });
            }
        }
        let (fidelity, distance) = self.score(&state)?;
        let metric = match self.cfg.metric {
            FailureMetric::TraceDistance => distance,
            FailureMetric::Infidelity => 1.0 - fidelity,
            FailureMetric::Threshold { budget } => {
                let allowance = budget * (self.cfg.lambda * self.cfg.gate.t_gate()).powi(2);
                if fidelity < 1.0 - allowance - 1e-12 {
                    1.0
                } else {
                    0.0
                }
            }
        };
        Ok(TrialOutcome { weight, expected_corrections: expected, corrections, fidelity, metric, steps })
    }

    /// Noisy evolution over one step.
    fn evolve(&self, state: TrajState, weight: &mut f64, rng: &mut impl Rng) -> Result<TrajState> {
        Ok(match (&self.kind, state) {
            (Kind::Stochastic { spectrum, p, q, zs, timing }, TrajState::Pure(psi)) => {
                let mut hits: Vec<(f64, usize)> = Vec::new();
                for k in 0..self.n_qubits {
                    let hit = q[k] >= 1.0 || rng.random::<f64>() < q[k];
                    if hit {
                        *weight *= p[k] / q[k];
                        let tau = match timing {
                            ErrorTiming::Boundary => self.dt,
                            ErrorTiming::Uniform => rng.random::<f64>() * self.dt,
                        };
                        hits.push((tau, k));
                    } else if q[k] > 0.0 {
                        *weight *= (1.0 - p[k]) / (1.0 - q[k]);
                    }
                }
                hits.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut psi = psi;
                let mut t = 0.0;
                for (tau, k) in hits {
                    psi = zs[k].apply_ket(&spectrum.evolve(&psi, tau - t))?;
                    t = tau;
                }
                TrajState::Pure(spectrum.evolve(&psi, self.dt - t))
            }
            (Kind::ExactJoint { u, .. }, TrajState::Pure(psi)) => TrajState::Pure(u.apply(&psi)),
            (Kind::ExactReset { kraus }, TrajState::Mixed(rho)) => {
                let r = rho.operator().matrix();
                let mut out = Matrix::zeros(r.nrows(), r.ncols());
                for k in kraus {
                    out += k * r * k.adjoint();
                }
                let op = Operator::new(rho.dims().to_vec(), out)?.hermitian_part();
                TrajState::Mixed(DensityMatrix::with_tolerance(op, 1e-8, -1e-8)?)
            }
            _ => unreachable!("trajectory state matches its backend"),
        })
    }

    fn syndrome_probabilities(&self, state: &TrajState, block: usize) -> Result<[f64; 4]> {
        match state {
            TrajState::Pure(psi) => self.code.syndrome_probabilities(psi, block, self.n_blocks),
            TrajState::Mixed(rho) => self.code.syndrome_probabilities_mixed(rho),
        }
    }

    /// Sampling distribution over the four outcomes. Non-trivial outcomes are
    /// boosted to a combined probability of at least `min(1/2, 1/N)`, and
    /// outcomes below [`IMPOSSIBLE_PROBABILITY`] are never drawn.
    fn biased(&self, probs: &[f64; 4]) -> [f64; 4] {
        let cleaned = probs.map(|p| if p < IMPOSSIBLE_PROBABILITY { 0.0 } else { p });
        let p_nt: f64 = cleaned[1..].iter().sum();
        if !self.cfg.importance_sampling || p_nt == 0.0 || matches!(self.kind, Kind::Stochastic { .. }) {
            return cleaned;
        }
        let q_nt = p_nt.max((1.0 / self.cfg.steps as f64).min(0.5));
        if cleaned[0] == 0.0 {
            return cleaned;
        }
        let mut q = cleaned.map(|p| p * q_nt / p_nt);
        q[0] = 1.0 - q_nt;
        q
    }

    fn project_and_recover(&self, state: TrajState, s: Syndrome, block: usize) -> Result<TrajState> {
        Ok(match state {
            TrajState::Pure(psi) => {
                let (post, _) = self.code.project(&psi, s, block, self.n_blocks)?;
                TrajState::Pure(self.code.recover(&post, s, block, self.n_blocks)?)
            }
            TrajState::Mixed(rho) => {
                let (post, _) = self.code.project_mixed(&rho, s)?;
                TrajState::Mixed(self.code.recover_mixed(&post, s)?)
            }
        })
    }

    /// Fidelity and trace distance of the system state to the ideal output.
    fn score(&self, state: &TrajState) -> Result<(f64, f64)> {
        let dims = vec![2; self.n_qubits];
        let target = Operator::projector(&dims, &self.ideal)?;
        match state {
            TrajState::Pure(psi) if psi.len() == self.ideal.len() => {
                let f = self.ideal.dotc(psi).norm_sqr().min(1.0);
                Ok((f, (1.0 - f).max(0.0).sqrt()))
            }
            TrajState::Pure(joint) => {
                let n = self.n_qubits;
                let outer = Operator::outer(&vec![2; 2 * n], joint, joint)?;
                let rho = partial_trace(&outer, &(0..n).collect::<Vec<_>>())?;
                self.score_mixed(&rho, &target)
            }
            TrajState::Mixed(rho) => self.score_mixed(rho.operator(), &target),
        }
    }

    fn score_mixed(&self, rho: &Operator, target: &Operator) -> Result<(f64, f64)> {
        let f = self.ideal.dotc(&(rho.matrix() * &self.ideal)).re.clamp(0.0, 1.0);
        Ok((f, trace_distance(rho, target)?))
    }
}

/// `K_b = ⟨b|_E U |vac⟩_E` for every bath basis state `b`, system first.
fn kraus_operators(u: &Operator, vacuum: &Ket) -> Vec<Matrix> {
    let d_e = vacuum.len();
    let d_s = u.dim() / d_e;
    let m = u.matrix();
    (0..d_e)
        .map(|b| Matrix::from_fn(d_s, d_s, |i, j| (0..d_e).map(|v| m[(i * d_e + b, j * d_e + v)] * vacuum[v]).sum()))
        .collect()
}

/// Runs every trial of `cfg` and aggregates in trial order.
pub fn run_protocol(cfg: &ProtocolConfig) -> Result<ProtocolResult> {
    let shared = Shared::new(cfg)?;
    let outcomes = (0..cfg.trials).into_par_iter().map(|i| shared.trial(i)).collect::<Result<Vec<_>>>()?;

    let corrections: Vec<f64> = outcomes.iter().map(|o| o.expected_corrections).collect();
    let failures: Vec<f64> = outcomes.iter().map(|o| o.weight * o.metric).collect();
    let unweighted = outcomes.iter().all(|o| o.weight == 1.0);
    let failure_rate = match cfg.metric {
        FailureMetric::Threshold { .. } if unweighted => {
            Estimate::wilson(outcomes.iter().filter(|o| o.metric > 0.5).count(), cfg.trials)
        }
        _ => Estimate::from_samples(&failures),
    };
    let mean_fidelity = outcomes.iter().map(|o| o.weight * o.fidelity).sum::<f64>() / cfg.trials as f64;
    let trial_seeds = (0..cfg.trials).map(|i| derive_seed(cfg.seed, "trial", i as u64)).collect();
    let records = cfg.record_steps.then(|| {
        outcomes
            .iter()
            .enumerate()
            .map(|(i, o)| TrialRecord {
                trial: i,
                seed: derive_seed(cfg.seed, "trial", i as u64),
                weight: o.weight,
                steps: o.steps.clone(),
                fidelity: o.fidelity,
                metric: o.metric,
            })
            .collect()
    });
    Ok(ProtocolResult {
        config: cfg.clone(),
        backend: cfg.backend.label().to_string(),
        dt: shared.dt,
        correction_rate: Estimate::from_samples(&corrections),
        failure_rate,
        mean_fidelity,
        corrections_sampled: outcomes.iter().map(|o| o.corrections).sum(),
        trial_seeds,
        records,
    })
}

/// The independent variable of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Steps,
    Lambda,
}

/// Results along one sweep with log-log fits of both rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub axis: SweepAxis,
    pub rows: Vec<ProtocolResult>,
    pub correction_fit: Option<SlopeFit>,
    pub failure_fit: Option<SlopeFit>,
    /// Unresolved rates and fits that could not be formed.
    pub warnings: Vec<String>,
}

impl ScalingTable {
    fn build(axis: SweepAxis, rows: Vec<ProtocolResult>) -> Self {
        let x: Vec<f64> = rows
            .iter()
            .map(|r| match axis {
                SweepAxis::Steps => r.config.steps as f64,
                SweepAxis::Lambda => r.config.lambda,
            })
            .collect();
        let mut warnings = Vec::new();
        for r in &rows {
            for (name, e) in [("correction", &r.correction_rate), ("failure", &r.failure_rate)] {
                if !e.resolved {
                    warnings.push(format!(
                        "{name} rate at lambda = {}, N = {} is not resolved: {:.3e} ± {:.3e} from {} trials",
                        r.config.lambda, r.config.steps, e.mean, e.std_error, r.config.trials
                    ));
                }
            }
        }
        let mut fit = |name: &str, y: Vec<f64>| match SlopeFit::new(&x, &y) {
            Ok(f) => Some(f),
            Err(e) => {
                warnings.push(format!("no {name} fit: {e}"));
                None
            }
        };
        let correction_fit = fit("correction", rows.iter().map(|r| r.correction_rate.mean).collect());
        let failure_fit = fit("failure", rows.iter().map(|r| r.failure_rate.mean).collect());
        Self { axis, rows, correction_fit, failure_fit, warnings }
    }
}

/// Runs `template` at each step count. Needs at least four values spanning a decade.
pub fn sweep_steps(template: &ProtocolConfig, ns: &[usize]) -> Result<ScalingTable> {
    let lo = ns.iter().copied().min().unwrap_or(0);
    let hi = ns.iter().copied().max().unwrap_or(0);
    if ns.len() < 4 || lo == 0 || hi < 10 * lo {
        return Err(Error::InsufficientData(format!(
            "a step sweep needs at least 4 positive N values spanning a decade, got {ns:?}"
        )));
    }
    let rows = ns
        .iter()
        .map(|&n| run_protocol(&ProtocolConfig { steps: n, ..template.clone() }))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScalingTable::build(SweepAxis::Steps, rows))
}

/// How a λ sweep picks the step count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepRule {
    /// The template's step count at every λ.
    Fixed,
    /// `N = max(1, round(scale / √λ))`.
    InverseSqrt {
        #[serde(default = "one")]
        scale: f64,
    },
}

impl StepRule {
    pub fn steps_for(self, lambda: f64, fixed: usize) -> usize {
        match self {
            StepRule::Fixed => fixed,
            StepRule::InverseSqrt { scale } => ((scale / lambda.sqrt()).round() as usize).max(1),
        }
    }
}

/// Runs `template` at each λ, increasing and positive, with at least four values.
pub fn sweep_lambda(template: &ProtocolConfig, lambdas: &[f64], rule: StepRule) -> Result<ScalingTable> {
    if lambdas.len() < 4 {
        return Err(Error::InsufficientData(format!("a lambda sweep needs at least 4 values, got {}", lambdas.len())));
    }
    if lambdas.iter().any(|l| !(l.is_finite() && *l > 0.0)) || lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(format!("lambda values must be positive and increasing: {lambdas:?}")));
    }
    let rows = lambdas
        .iter()
        .map(|&lambda| {
            run_protocol(&ProtocolConfig { lambda, steps: rule.steps_for(lambda, template.steps), ..template.clone() })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = ScalingTable::build(SweepAxis::Lambda, rows);
    let ratios: Vec<f64> = lambdas.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    if ratios.iter().any(|r| (r - mean).abs() > 0.05 * mean) {
        table.warnings.push("lambda values are not log-spaced; the fit weights them unevenly".into());
    }
    Ok(table)
}

/// A gate whose Hamiltonian commutes with the bath coupling, run against the
/// idle memory of the same duration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlComparison {
    pub control: ProtocolResult,
    pub baseline: ProtocolResult,
    /// Difference of failure rates in units of its standard error.
    pub z_score: f64,
}

/// Largest `‖[H_S, Z_k]‖` over the coupled qubits.
pub fn coupling_commutator_norm(gate: &GateSpec) -> Result<f64> {
    let h = gate.hamiltonian()?;
    let n = gate.n_qubits();
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let z = PauliString::single(n, k, Pauli::Z)?.dense();
        worst = worst.max(h.commutator(&z).spectral_norm());
    }
    Ok(worst)
}

pub fn commuting_gate_control(cfg: &ProtocolConfig) -> Result<ControlComparison> {
    let norm = coupling_commutator_norm(&cfg.gate)?;
    if norm > 1e-10 {
        return Err(Error::NonCommutingGate(norm));
    }
    let baseline_cfg = ProtocolConfig { gate: GateSpec::idle(cfg.gate.t_gate(), true), ..cfg.clone() };
    let control = run_protocol(cfg)?;
    let baseline = run_protocol(&baseline_cfg)?;
    let (a, b) = (&control.failure_rate, &baseline.failure_rate);
    let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    let z_score = if se > 0.0 { (a.mean - b.mean) / se } else { 0.0 };
    Ok(ControlComparison { control, baseline, z_score })
}
