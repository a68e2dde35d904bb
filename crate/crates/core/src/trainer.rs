//! Infidelity objectives and derivative-free training: in situ on an
//! imperfect instance, offline on an idealized one, and the uniform-loss
//! limit.
//!
//! The optimizer only ever sees objective values. Phases live in the box
//! `[0, 2pi]` and are wrapped when written into the network.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nlopt::{Algorithm, FailState, Nlopt, SuccessState, Target};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::elements::{sample_imperfections, ImperfectionModel, KerrLayer, LayerImperfections, MeshLayer};
use crate::engine::{Evaluator, MetricsReport, QpnnInstance, TrainingSet};
use crate::error::{QpnnError, Result};
use crate::fock::FockBasis;
use crate::tasks::TaskSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    #[serde(alias = "unc")]
    Unconditional,
    #[serde(alias = "con")]
    Conditional,
}

impl ObjectiveKind {
    pub fn short(&self) -> &'static str {
        match self {
            ObjectiveKind::Unconditional => "unc",
            ObjectiveKind::Conditional => "con",
        }
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl FromStr for ObjectiveKind {
    type Err = QpnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unc" | "unconditional" => Ok(ObjectiveKind::Unconditional),
            "con" | "conditional" => Ok(ObjectiveKind::Conditional),
            other => Err(QpnnError::InvalidConfig(format!("unknown objective {other:?}"))),
        }
    }
}

/// Objective of one fixed-imperfection network on one training set.
#[derive(Debug)]
pub struct Objective {
    evaluator: Evaluator,
    kind: ObjectiveKind,
}

impl Objective {
    pub fn new(instance: QpnnInstance, set: TrainingSet, kind: ObjectiveKind) -> Result<Self> {
        Ok(Objective {
            evaluator: Evaluator::new(instance, set)?,
            kind,
        })
    }

    pub fn param_count(&self) -> usize {
        self.evaluator.instance().param_count()
    }

    pub fn kind(&self) -> ObjectiveKind {
        self.kind
    }

    /// `1 - F` of the configured kind at `params`.
    pub fn infidelity(&mut self, params: &[f64]) -> Result<f64> {
        let report = self.evaluator.metrics(params)?;
        Ok(1.0 - fidelity_of(&report, self.kind))
    }

    pub fn metrics(&mut self, params: &[f64]) -> Result<MetricsReport> {
        self.evaluator.metrics(params)
    }

    pub fn evaluator_mut(&mut self) -> &mut Evaluator {
        &mut self.evaluator
    }
}

pub fn fidelity_of(report: &MetricsReport, kind: ObjectiveKind) -> f64 {
    match kind {
        ObjectiveKind::Unconditional => report.f_unc,
        ObjectiveKind::Conditional => report.f_con,
    }
}

/// One-shot objective evaluation on a copy of `instance`.
pub fn objective(params: &[f64], instance: &QpnnInstance, set: &TrainingSet, kind: ObjectiveKind) -> Result<f64> {
    Objective::new(instance.clone(), set.clone(), kind)?.infidelity(params)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Stop once an improvement of the best value is smaller than this.
    pub ftol_abs: f64,
    pub max_evals: usize,
    /// Initial trust-region radius, radians.
    pub initial_step: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            ftol_abs: 1e-6,
            max_evals: 20_000,
            initial_step: 0.5,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn with_seed(self, seed: u64) -> Self {
        OptimizerConfig { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ftol_abs > 0.0 && self.ftol_abs.is_finite()) {
            return Err(QpnnError::InvalidConfig(format!("ftol_abs must be > 0, got {}", self.ftol_abs)));
        }
        if self.max_evals == 0 || self.max_evals > u32::MAX as usize {
            return Err(QpnnError::InvalidConfig(format!("max_evals out of range: {}", self.max_evals)));
        }
        if !(self.initial_step > 0.0 && self.initial_step <= PI) {
            return Err(QpnnError::InvalidConfig(format!(
                "initial_step must lie in (0, pi], got {}",
                self.initial_step
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Improvement fell below `ftol_abs`.
    Converged,
    /// Trust region shrank to its floor.
    StepTolerance,
    /// The quadratic model could make no further progress in floating point.
    RoundoffLimited,
    BudgetExhausted,
}

/// A point where the best-so-far value improved: evaluation index (1-based)
/// and the new best value. The full best-so-far series is the step function
/// through these points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub eval: usize,
    pub best: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOutcome {
    pub params: Vec<f64>,
    pub value: f64,
    pub trace: Vec<TracePoint>,
    pub evals: usize,
    pub stop: StopReason,
}

struct Tracker<F> {
    f: F,
    evals: usize,
    best: f64,
    best_x: Vec<f64>,
    trace: Vec<TracePoint>,
}

impl<F: FnMut(&[f64]) -> f64> Tracker<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        let v = (self.f)(x);
        self.evals += 1;
        if v < self.best {
            self.best = v;
            self.best_x.clear();
            self.best_x.extend_from_slice(x);
            self.trace.push(TracePoint {
                eval: self.evals,
                best: v,
            });
        }
        v
    }
}

/// Bound-constrained quadratic-model trust-region minimization (BOBYQA) on
/// the box `[0, 2pi]^n` using objective values only.
pub fn minimize<F>(objective: F, config: &OptimizerConfig, init: &[f64]) -> Result<MinimizeOutcome>
where
    F: FnMut(&[f64]) -> f64,
{
    config.validate()?;
    let n = init.len();
    if n < 2 {
        return Err(QpnnError::InvalidConfig("need at least two parameters".into()));
    }
    if let Some(x) = init.iter().find(|x| !(0.0..=TAU).contains(*x)) {
        return Err(QpnnError::InvalidConfig(format!("initial phase {x} outside [0, 2pi]")));
    }
    let tracker = Tracker {
        f: objective,
        evals: 0,
        best: f64::INFINITY,
        best_x: init.to_vec(),
        trace: Vec::new(),
    };
    let mut opt = Nlopt::new(
        Algorithm::Bobyqa,
        n,
        |x: &[f64], _grad: Option<&mut [f64]>, t: &mut Tracker<F>| t.eval(x),
        Target::Minimize,
        tracker,
    );
    let setup = |r: std::result::Result<SuccessState, FailState>, what: &str| {
        r.map(|_| ()).map_err(|e| QpnnError::Optimizer(format!("{what}: {e:?}")))
    };
    setup(opt.set_lower_bounds(&vec![0.0; n]), "lower bounds")?;
    setup(opt.set_upper_bounds(&vec![TAU; n]), "upper bounds")?;
    setup(opt.set_ftol_abs(config.ftol_abs), "ftol_abs")?;
    setup(opt.set_maxeval(config.max_evals as u32), "maxeval")?;
    setup(opt.set_initial_step1(config.initial_step), "initial step")?;

    let mut x = init.to_vec();
    let stop = match opt.optimize(&mut x) {
        Ok((SuccessState::MaxEvalReached, _)) => StopReason::BudgetExhausted,
        Ok((SuccessState::XtolReached, _)) => StopReason::StepTolerance,
        Ok(_) => StopReason::Converged,
        Err((FailState::RoundoffLimited, _)) => StopReason::RoundoffLimited,
        Err((e, _)) => return Err(QpnnError::Optimizer(format!("{e:?}"))),
    };
    let tracker = opt.recover_user_data();
    Ok(MinimizeOutcome {
        params: tracker.best_x,
        value: tracker.best,
        trace: tracker.trace,
        evals: tracker.evals,
        stop,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingMode {
    InSitu,
    Offline,
    LossLimit,
    /// Reference training on a lossless, perfect-coupler network.
    Ideal,
}

impl fmt::Display for TrainingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainingMode::InSitu => "in_situ",
            TrainingMode::Offline => "offline",
            TrainingMode::LossLimit => "loss_limit",
            TrainingMode::Ideal => "ideal",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub mode: TrainingMode,
    pub final_params: Vec<f64>,
    pub final_metrics: MetricsReport,
    pub trace: Vec<TracePoint>,
    pub evals: usize,
    pub seed: u64,
    pub stop: StopReason,
}

impl TrialResult {
    pub fn infidelity(&self, kind: ObjectiveKind) -> f64 {
        1.0 - fidelity_of(&self.final_metrics, kind)
    }
}

/// Network size, nonlinearity and fabrication model of a training run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub layers: usize,
    pub varphi: f64,
    pub model: ImperfectionModel,
    /// Nonlinearity the idealized reference network is trained at.
    pub reference_varphi: f64,
}

impl Architecture {
    pub fn new(layers: usize, varphi: f64, model: ImperfectionModel) -> Self {
        Architecture {
            layers,
            varphi,
            model,
            reference_varphi: PI,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(QpnnError::InvalidConfig("layers must be >= 1".into()));
        }
        if !self.varphi.is_finite() || !self.reference_varphi.is_finite() {
            return Err(QpnnError::InvalidQuantity {
                name: "varphi",
                value: self.varphi,
            });
        }
        self.model.validate()
    }
}

const IMPERFECTION_STREAM: u64 = 0;
const INIT_STREAM: u64 = 1;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Imperfections of every layer for the realization identified by `seed`.
/// In-situ trials and offline realizations sharing a seed see the same chip.
pub fn sample_network_imperfections(
    model: &ImperfectionModel,
    m: usize,
    layers: usize,
    seed: u64,
) -> Result<Vec<LayerImperfections>> {
    let mut rng = stream_rng(seed, IMPERFECTION_STREAM);
    (0..layers).map(|_| sample_imperfections(model, m, &mut rng)).collect()
}

/// Uniform random phases in `[0, 2pi)`.
pub fn random_params(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, INIT_STREAM);
    (0..count).map(|_| rng.random::<f64>() * TAU).collect()
}

fn build_instance(
    basis: &Arc<FockBasis>,
    imperfections: &[LayerImperfections],
    varphi: f64,
    task: &TaskSpec,
) -> Result<QpnnInstance> {
    QpnnInstance::from_imperfections(
        Arc::clone(basis),
        imperfections,
        KerrLayer::new(varphi)?,
        task.qubit_pairing.clone(),
    )
}

/// Instance of the chip realization `seed` under `arch`.
pub fn realization(arch: &Architecture, task: &TaskSpec, seed: u64) -> Result<QpnnInstance> {
    let imps = sample_network_imperfections(&arch.model, task.modes(), arch.layers, seed)?;
    build_instance(task.basis(), &imps, arch.varphi, task)
}

fn run_training(
    instance: QpnnInstance,
    task: &TaskSpec,
    kind: ObjectiveKind,
    config: &OptimizerConfig,
    mode: TrainingMode,
) -> Result<TrialResult> {
    let init = random_params(instance.param_count(), config.seed);
    let mut obj = Objective::new(instance, task.training_set.clone(), kind)?;
    let outcome = minimize(
        |x| obj.infidelity(x).expect("parameter length validated"),
        config,
        &init,
    )?;
    let final_metrics = obj.metrics(&outcome.params)?;
    Ok(TrialResult {
        mode,
        final_params: outcome.params,
        final_metrics,
        trace: outcome.trace,
        evals: outcome.evals,
        seed: config.seed,
        stop: outcome.stop,
    })
}

/// Trains the chip realization `config.seed` from a random initial point.
pub fn train_in_situ(
    arch: &Architecture,
    task: &TaskSpec,
    kind: ObjectiveKind,
    config: &OptimizerConfig,
) -> Result<TrialResult> {
    arch.validate()?;
    let instance = realization(arch, task, config.seed)?;
    run_training(instance, task, kind, config, TrainingMode::InSitu)
}

/// Infidelity below which an idealized training attempt is accepted.
pub const IDEAL_ACCEPT: f64 = 1e-5;

/// Stopping tolerance of idealized training, never looser than this.
pub const IDEAL_FTOL: f64 = 1e-10;

/// Trains the lossless, perfect-coupler network at `arch.reference_varphi`.
/// Up to `attempts` random starts (seeds derived from `config.seed`) are
/// tried; the first reaching [`IDEAL_ACCEPT`] wins, otherwise the best.
pub fn train_ideal(
    arch: &Architecture,
    task: &TaskSpec,
    kind: ObjectiveKind,
    config: &OptimizerConfig,
    attempts: usize,
) -> Result<TrialResult> {
    arch.validate()?;
    let m = task.modes();
    let ideal = vec![LayerImperfections::ideal(m); arch.layers];
    let mut best: Option<TrialResult> = None;
    for k in 0..attempts.max(1) as u64 {
        let instance = build_instance(task.basis(), &ideal, arch.reference_varphi, task)?;
        let cfg = OptimizerConfig {
            ftol_abs: config.ftol_abs.min(IDEAL_FTOL),
            ..config.with_seed(derive_seed(config.seed, k))
        };
        let trial = run_training(instance, task, kind, &cfg, TrainingMode::Ideal)?;
        let done = trial.infidelity(kind) <= IDEAL_ACCEPT;
        if best.as_ref().is_none_or(|b| trial.infidelity(kind) < b.infidelity(kind)) {
            best = Some(trial);
        }
        if done {
            break;
        }
    }
    Ok(best.expect("at least one attempt"))
}

/// Stable 64-bit mix of a seed and an index (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Metrics of a fixed (ideal-trained) parameter vector on each chip
/// realization, at `arch.varphi`. The parameter vector is not modified.
pub fn evaluate_offline(
    params: &[f64],
    arch: &Architecture,
    task: &TaskSpec,
    realization_seeds: &[u64],
) -> Result<Vec<MetricsReport>> {
    arch.validate()?;
    realization_seeds
        .iter()
        .map(|&seed| {
            let instance = realization(arch, task, seed)?;
            Evaluator::new(instance, task.training_set.clone())?.metrics(params)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfflineResult {
    pub ideal: TrialResult,
    pub realizations: Vec<MetricsReport>,
}

/// Trains the idealized network once, then evaluates that solution on
/// `n_realizations` sampled chips (seeds derived from `config.seed`).
pub fn train_offline(
    arch: &Architecture,
    task: &TaskSpec,
    kind: ObjectiveKind,
    config: &OptimizerConfig,
    n_realizations: usize,
) -> Result<OfflineResult> {
    let ideal = train_ideal(arch, task, kind, config, IDEAL_ATTEMPTS)?;
    let seeds: Vec<u64> = (0..n_realizations as u64).map(|r| derive_seed(config.seed ^ OFFLINE_SALT, r)).collect();
    let realizations = evaluate_offline(&ideal.final_params, arch, task, &seeds)?;
    Ok(OfflineResult { ideal, realizations })
}

/// Default number of random starts for idealized training.
pub const IDEAL_ATTEMPTS: usize = 10;
const OFFLINE_SALT: u64 = 0x6f66_666c_696e_65;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossLimit {
    /// Unconditional fidelity of the ideal solution under uniform loss.
    pub f_unc: f64,
    pub metrics: MetricsReport,
    pub ideal_f_unc: f64,
    /// Per-mode power transmission of one layer.
    pub layer_transmission: f64,
}

/// Evaluates an ideal solution with every element at the mean loss and
/// perfect couplers, at the reference nonlinearity.
pub fn loss_limit_of(
    ideal_params: &[f64],
    ideal_f_unc: f64,
    arch: &Architecture,
    task: &TaskSpec,
) -> Result<LossLimit> {
    let instance = loss_limit_instance(arch, task)?;
    let metrics = Evaluator::new(instance, task.training_set.clone())?.metrics(ideal_params)?;
    Ok(LossLimit {
        f_unc: metrics.f_unc,
        metrics,
        ideal_f_unc,
        layer_transmission: uniform_model(arch).uniform_layer_transmission(task.modes()),
    })
}

fn uniform_model(arch: &Architecture) -> ImperfectionModel {
    ImperfectionModel {
        l_mzi: arch.model.l_mzi,
        l_ps: arch.model.l_ps,
        ..ImperfectionModel::uniform(arch.model.alpha_wg_mean)
    }
}

/// Network with every element at the mean loss and perfect couplers, at the
/// reference nonlinearity. Phases are zero.
pub fn loss_limit_instance(arch: &Architecture, task: &TaskSpec) -> Result<QpnnInstance> {
    arch.validate()?;
    let imps = sample_network_imperfections(&uniform_model(arch), task.modes(), arch.layers, 0)?;
    build_instance(task.basis(), &imps, arch.reference_varphi, task)
}

/// Trains the idealized network and reports its uniform-loss fidelity.
pub fn loss_limit(
    arch: &Architecture,
    task: &TaskSpec,
    kind: ObjectiveKind,
    config: &OptimizerConfig,
) -> Result<LossLimit> {
    let ideal = train_ideal(arch, task, kind, config, IDEAL_ATTEMPTS)?;
    loss_limit_of(&ideal.final_params, ideal.final_metrics.f_unc, arch, task)
}

/// Closed form of the loss limit: `F_ideal * T^(n L)`.
pub fn loss_limit_closed_form(ideal_f_unc: f64, layer_transmission: f64, photons: usize, layers: usize) -> f64 {
    ideal_f_unc * layer_transmission.powi((photons * layers) as i32)
}

/// Parameter count of an `L`-layer network on `m` modes.
pub fn param_count(m: usize, layers: usize) -> usize {
    layers * MeshLayer::param_count(m)
}
