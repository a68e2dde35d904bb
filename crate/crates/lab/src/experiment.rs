//! Runs experiment grids: one idealized solution per layer count, then per
//! cell a loss-limit record and, for every trial, an in-situ training run
//! and the matched offline evaluation on the same chip realization.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use qpnn::engine::{Evaluator, QpnnInstance};
use qpnn::trainer::{self, Architecture, OptimizerConfig, TrialResult, IDEAL_ATTEMPTS};
use qpnn::{ImperfectionModel, QpnnError, TaskSpec};
use rayon::prelude::*;

use crate::config::{stable_hash, Cell, ExperimentConfig};
use crate::error::{LabError, Result};
use crate::store::{Amplitude, RecordKind, Store, TrialRecord};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    /// Worker threads.
    pub jobs: usize,
    pub optimizer: OptimizerConfig,
    pub ideal_attempts: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            jobs: 1,
            optimizer: OptimizerConfig::default(),
            ideal_attempts: IDEAL_ATTEMPTS,
        }
    }
}

fn core_err(context: impl Into<String>) -> impl FnOnce(QpnnError) -> LabError {
    let context = context.into();
    move |source| LabError::Core { context, source }
}

pub fn architecture(cell: &Cell) -> Architecture {
    Architecture::new(cell.layers, cell.varphi, ImperfectionModel::realistic(cell.alpha))
}

/// Pseudo-cell under which the idealized solution for `cell`'s layer count
/// is stored.
pub fn ideal_cell(cell: &Cell) -> Cell {
    Cell {
        alpha: 0.0,
        varphi: PI,
        ..*cell
    }
}

fn outputs_of(instance: QpnnInstance, task: &TaskSpec, params: &[f64]) -> qpnn::Result<Vec<Vec<Amplitude>>> {
    let mut eval = Evaluator::new(instance, task.training_set.clone())?;
    Ok(eval
        .outputs(params)?
        .iter()
        .map(|v| v.iter().map(|a| [a.re, a.im]).collect())
        .collect())
}

fn record_from_trial(kind: RecordKind, cell: Cell, task: &TaskSpec, trial: Option<usize>, r: TrialResult, outputs: Vec<Vec<Amplitude>>) -> TrialRecord {
    TrialRecord {
        kind,
        cell,
        task: task.descriptor(),
        trial,
        seed: r.seed,
        metrics: r.final_metrics,
        params: r.final_params,
        outputs,
        trace: r.trace,
        evals: r.evals,
        stop: Some(r.stop),
    }
}

fn ideal_record(store: &Store, cell: &Cell, task: &TaskSpec, base_seed: u64, opts: &RunOptions) -> Result<TrialRecord> {
    let icell = ideal_cell(cell);
    if let Some(r) = store.load(RecordKind::Ideal, &icell, None)? {
        return Ok(r);
    }
    let ctx = format!("{icell} ideal training");
    let arch = architecture(&icell);
    let seed = base_seed ^ stable_hash(&format!("{}#ideal", icell.key()));
    let res = trainer::train_ideal(&arch, task, cell.objective, &opts.optimizer.with_seed(seed), opts.ideal_attempts)
        .map_err(core_err(&ctx))?;
    let instance = QpnnInstance::ideal(
        task.basis().clone(),
        cell.layers,
        qpnn::KerrLayer::new(arch.reference_varphi).map_err(core_err(&ctx))?,
        task.qubit_pairing.clone(),
    )
    .map_err(core_err(&ctx))?;
    let outputs = outputs_of(instance, task, &res.final_params).map_err(core_err(&ctx))?;
    store.commit(record_from_trial(RecordKind::Ideal, icell, task, None, res, outputs))
}

#[derive(Clone, Copy, Debug)]
enum Job {
    LossLimit(usize),
    InSitu(usize, usize),
    Offline(usize, usize),
}

fn run_job(
    job: Job,
    cells: &[Cell],
    ideals: &BTreeMap<usize, TrialRecord>,
    store: &Store,
    task: &TaskSpec,
    config: &ExperimentConfig,
    opts: &RunOptions,
) -> Result<TrialRecord> {
    let (kind, ci, trial) = match job {
        Job::LossLimit(c) => (RecordKind::LossLimit, c, None),
        Job::InSitu(c, t) => (RecordKind::InSitu, c, Some(t)),
        Job::Offline(c, t) => (RecordKind::Offline, c, Some(t)),
    };
    let cell = cells[ci];
    if let Some(r) = store.load(kind, &cell, trial)? {
        return Ok(r);
    }
    let ctx = match trial {
        Some(t) => format!("{cell} {kind:?} trial {t}"),
        None => format!("{cell} {kind:?}"),
    };
    let arch = architecture(&cell);
    let ideal = &ideals[&cell.layers];
    let record = match job {
        Job::InSitu(_, t) => {
            let seed = cell.trial_seed(config.base_seed, t);
            let res = trainer::train_in_situ(&arch, task, cell.objective, &opts.optimizer.with_seed(seed))
                .map_err(core_err(&ctx))?;
            let instance = trainer::realization(&arch, task, seed).map_err(core_err(&ctx))?;
            let outputs = outputs_of(instance, task, &res.final_params).map_err(core_err(&ctx))?;
            record_from_trial(kind, cell, task, trial, res, outputs)
        }
        Job::Offline(_, t) => {
            let seed = cell.trial_seed(config.base_seed, t);
            let metrics = trainer::evaluate_offline(&ideal.params, &arch, task, &[seed])
                .map_err(core_err(&ctx))?
                .remove(0);
            let instance = trainer::realization(&arch, task, seed).map_err(core_err(&ctx))?;
            let outputs = outputs_of(instance, task, &ideal.params).map_err(core_err(&ctx))?;
            fixed_record(kind, cell, task, trial, seed, metrics, ideal.params.clone(), outputs)
        }
        Job::LossLimit(_) => {
            let lim = trainer::loss_limit_of(&ideal.params, ideal.metrics.f_unc, &arch, task).map_err(core_err(&ctx))?;
            let instance = trainer::loss_limit_instance(&arch, task).map_err(core_err(&ctx))?;
            let outputs = outputs_of(instance, task, &ideal.params).map_err(core_err(&ctx))?;
            fixed_record(kind, cell, task, None, ideal.seed, lim.metrics, ideal.params.clone(), outputs)
        }
    };
    store.commit(record)
}

#[allow(clippy::too_many_arguments)]
fn fixed_record(
    kind: RecordKind,
    cell: Cell,
    task: &TaskSpec,
    trial: Option<usize>,
    seed: u64,
    metrics: qpnn::MetricsReport,
    params: Vec<f64>,
    outputs: Vec<Vec<Amplitude>>,
) -> TrialRecord {
    TrialRecord {
        kind,
        cell,
        task: task.descriptor(),
        trial,
        seed,
        metrics,
        params,
        outputs,
        trace: Vec::new(),
        evals: 0,
        stop: None,
    }
}

/// Runs (or resumes) every cell of `config`, persisting each record as soon
/// as it completes. Records already on disk are loaded, not recomputed.
/// Returns the ideal, loss-limit, in-situ and offline records in grid order.
pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let task = TaskSpec::by_name(config.task)?;
    let store = Store::new(&config.output_dir);
    save_config_once(config)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| LabError::Config(format!("thread pool: {e}")))?;

    let cells = config.cells();
    let mut firsts: BTreeMap<usize, Cell> = BTreeMap::new();
    for cell in &cells {
        firsts.entry(cell.layers).or_insert(*cell);
    }
    let ideals: BTreeMap<usize, TrialRecord> = pool.install(|| {
        firsts
            .par_iter()
            .map(|(&l, cell)| ideal_record(&store, cell, &task, config.base_seed, opts).map(|r| (l, r)))
            .collect::<Result<_>>()
    })?;

    let mut jobs = Vec::new();
    for ci in 0..cells.len() {
        jobs.push(Job::LossLimit(ci));
        for t in 0..config.trials {
            jobs.push(Job::InSitu(ci, t));
            jobs.push(Job::Offline(ci, t));
        }
    }
    let records: Vec<TrialRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|&job| run_job(job, &cells, &ideals, &store, &task, config, opts))
            .collect::<Result<_>>()
    })?;

    let mut out: Vec<TrialRecord> = ideals.into_values().collect();
    out.extend(records);
    Ok(out)
}

fn save_config_once(config: &ExperimentConfig) -> Result<()> {
    let path = config.output_dir.join("config.json");
    if path.exists() {
        if let Ok(existing) = ExperimentConfig::load(&path) {
            if existing == *config {
                return Ok(());
            }
        }
    }
    config.save(&path)
}
