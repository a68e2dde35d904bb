//! Per-cell statistics and CSV tables.

use std::path::Path;

use qpnn::tasks::{fredkin_bsa_fidelity, series_success_rate};
use qpnn::trainer::TracePoint;
use serde::Serialize;

use crate::config::{Cell, ExperimentConfig};
use crate::error::{LabError, Result};
use crate::stats::{self, FitFamily, FitResult};
use crate::store::{RecordKind, TrialRecord};

/// Records of one cell with the success filter and plateau applied.
#[derive(Clone, Debug)]
pub struct CellStats {
    pub cell: Cell,
    pub in_situ: Vec<TrialRecord>,
    pub offline: Vec<TrialRecord>,
    pub loss_limit: Option<TrialRecord>,
    /// `None` when fewer than two offline values exist; then every in-situ
    /// trial is kept.
    pub threshold: Option<f64>,
    /// Indices into `in_situ`.
    pub successful: Vec<usize>,
    /// Indices into `in_situ`, a subset of `successful`.
    pub plateau: Vec<usize>,
}

fn values(records: &[TrialRecord], idx: &[usize], f: impl Fn(&TrialRecord) -> f64) -> Vec<f64> {
    idx.iter().map(|&i| f(&records[i])).collect()
}

impl CellStats {
    pub fn build(records: &[TrialRecord], cell: &Cell, gap_decades: f64) -> Self {
        let of = |kind: RecordKind| -> Vec<TrialRecord> {
            let mut v: Vec<TrialRecord> = records
                .iter()
                .filter(|r| r.kind == kind && r.cell == *cell)
                .cloned()
                .collect();
            v.sort_by_key(|r| r.trial);
            v
        };
        let in_situ = of(RecordKind::InSitu);
        let offline = of(RecordKind::Offline);
        let loss_limit = of(RecordKind::LossLimit).into_iter().next();
        let offline_f: Vec<f64> = offline.iter().map(|r| r.metrics.f_unc).collect();
        let threshold = stats::success_threshold(&offline_f).ok();
        let in_situ_f: Vec<f64> = in_situ.iter().map(|r| r.metrics.f_unc).collect();
        let successful = match threshold {
            Some(t) => stats::successful(&in_situ_f, t),
            None => (0..in_situ.len()).collect(),
        };
        let succ_c = values(&in_situ, &successful, TrialRecord::infidelity);
        let plateau = stats::isolate_max_plateau(&succ_c, gap_decades)
            .into_iter()
            .map(|k| successful[k])
            .collect();
        CellStats {
            cell: *cell,
            in_situ,
            offline,
            loss_limit,
            threshold,
            successful,
            plateau,
        }
    }

    pub fn in_situ_f_unc(&self) -> Vec<f64> {
        self.in_situ.iter().map(|r| r.metrics.f_unc).collect()
    }

    pub fn successful_f_unc(&self) -> Vec<f64> {
        values(&self.in_situ, &self.successful, |r| r.metrics.f_unc)
    }

    pub fn offline_f_unc(&self) -> Vec<f64> {
        self.offline.iter().map(|r| r.metrics.f_unc).collect()
    }

    pub fn plateau_values(&self, f: impl Fn(&TrialRecord) -> f64) -> Vec<f64> {
        values(&self.in_situ, &self.plateau, f)
    }

    pub fn successful_values(&self, f: impl Fn(&TrialRecord) -> f64) -> Vec<f64> {
        values(&self.in_situ, &self.successful, f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub task: String,
    pub layers: usize,
    pub alpha_wg_db_cm: f64,
    pub varphi_rad: f64,
    pub metric: String,
    pub mean: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub n_success: usize,
    pub n_trials: usize,
    pub plateau_n: usize,
}

#[derive(Clone, Debug, Default)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    /// Cells (and record kinds) absent from the store.
    pub missing: Vec<String>,
}

/// Metric name used for a cell whose in-situ trials all fell below the
/// success threshold.
pub const NO_SUCCESS: &str = "no_successful_trials";

/// A distribution fit, or for inputs the family cannot take (fewer than
/// three values, or non-positive values for a lognormal) the arithmetic
/// mean with the sample range as interval.
pub fn fit_or_describe(values: &[f64], family: FitFamily) -> Option<(f64, f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let fitted: Option<FitResult> = match family {
        FitFamily::Lognormal => stats::fit_lognormal(values).ok(),
        FitFamily::Beta => stats::fit_beta(values).ok(),
    };
    Some(match fitted {
        Some(f) => (f.mean, f.ci95.0, f.ci95.1),
        None => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (stats::mean(values), lo, hi)
        }
    })
}

/// Rows per cell:
/// - `loss_limit`, `success_threshold`
/// - `offline_f_unc`: mean with a one-standard-deviation band
/// - `f_unc`, `f_con`, `p_cb`: lognormal fits over successful trials
/// - `f_unc_mean`: arithmetic mean over successful trials
/// - `f_unc_best`: best trial
/// - `f_unc_max`, `f_con_max`, `p_cb_max`: beta fits over the best plateau
pub fn summarize(records: &[TrialRecord], config: &ExperimentConfig, gap_decades: f64) -> Summary {
    let mut summary = Summary::default();
    for cell in config.cells() {
        let cs = CellStats::build(records, &cell, gap_decades);
        if cs.in_situ.is_empty() {
            summary.missing.push(format!("{cell}: in-situ records"));
            continue;
        }
        if cs.offline.is_empty() {
            summary.missing.push(format!("{cell}: offline records"));
        }
        if cs.loss_limit.is_none() {
            summary.missing.push(format!("{cell}: loss-limit record"));
        }
        let row = |metric: &str, stat: Option<(f64, f64, f64)>| SummaryRow {
            task: cell.task.to_string(),
            layers: cell.layers,
            alpha_wg_db_cm: cell.alpha,
            varphi_rad: cell.varphi,
            metric: metric.to_string(),
            mean: stat.map(|s| s.0),
            ci_low: stat.map(|s| s.1),
            ci_high: stat.map(|s| s.2),
            n_success: cs.successful.len(),
            n_trials: cs.in_situ.len(),
            plateau_n: cs.plateau.len(),
        };
        let point = |v: f64| Some((v, v, v));
        if let Some(ll) = &cs.loss_limit {
            summary.rows.push(row("loss_limit", point(ll.metrics.f_unc)));
        }
        if let Some(t) = cs.threshold {
            summary.rows.push(row("success_threshold", point(t)));
        }
        let off = cs.offline_f_unc();
        if !off.is_empty() {
            let (m, s) = (stats::mean(&off), stats::population_std(&off));
            summary.rows.push(row("offline_f_unc", Some((m, m - s, m + s))));
        }
        let best = cs.in_situ_f_unc().into_iter().fold(f64::NEG_INFINITY, f64::max);
        summary.rows.push(row("f_unc_best", point(best)));
        if cs.successful.is_empty() {
            summary.rows.push(row(NO_SUCCESS, None));
            continue;
        }
        let metrics: [(&str, fn(&TrialRecord) -> f64); 3] = [
            ("f_unc", |r| r.metrics.f_unc),
            ("f_con", |r| r.metrics.f_con),
            ("p_cb", |r| r.metrics.p_cb),
        ];
        for (name, f) in metrics {
            summary
                .rows
                .push(row(name, fit_or_describe(&cs.successful_values(f), FitFamily::Lognormal)));
        }
        let succ = cs.successful_f_unc();
        summary.rows.push(row("f_unc_mean", point(stats::mean(&succ))));
        for (name, f) in metrics {
            summary.rows.push(row(
                &format!("{name}_max"),
                fit_or_describe(&cs.plateau_values(f), FitFamily::Beta),
            ));
        }
    }
    summary
}

/// Looks up `metric`'s mean for `cell` in `rows`.
pub fn lookup(rows: &[SummaryRow], cell: &Cell, metric: &str) -> Option<f64> {
    rows.iter()
        .find(|r| r.layers == cell.layers && r.alpha_wg_db_cm == cell.alpha && r.varphi_rad == cell.varphi && r.metric == metric)
        .and_then(|r| r.mean)
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> LabError + '_ {
    move |source| LabError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    let bytes = w.into_inner().map_err(|e| LabError::Io {
        path: path.to_path_buf(),
        source: e.into_error(),
    })?;
    crate::store::write_atomic(path, &bytes)
}

pub fn write_summary_csv(rows: &[SummaryRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        // Header only.
        let header = "task,layers,alpha_wg_db_cm,varphi_rad,metric,mean,ci_low,ci_high,n_success,n_trials,plateau_n\n";
        return crate::store::write_atomic(path, header.as_bytes());
    }
    write_rows(path, rows)
}

#[derive(Serialize)]
struct TraceRow {
    iteration: usize,
    best_infidelity: f64,
}

/// Best-so-far infidelity at every evaluation `1..=evals`.
pub fn expand_trace(trace: &[TracePoint], evals: usize) -> Vec<(usize, f64)> {
    let mut out = Vec::with_capacity(evals);
    let mut next = 0;
    let mut best = f64::NAN;
    for it in 1..=evals {
        while next < trace.len() && trace[next].eval <= it {
            best = trace[next].best;
            next += 1;
        }
        out.push((it, best));
    }
    out
}

pub fn write_trace_csv(trace: &[TracePoint], evals: usize, path: &Path) -> Result<()> {
    write_rows(
        path,
        expand_trace(trace, evals)
            .into_iter()
            .map(|(iteration, best_infidelity)| TraceRow {
                iteration,
                best_infidelity,
            }),
    )
}

#[derive(Serialize)]
struct FredkinRow {
    varphi_rad: f64,
    f_unc: f64,
}

/// Fredkin-gate analyzer fidelity on `points` evenly spaced phases in `[0, pi]`.
pub fn fredkin_curve(points: usize) -> Vec<(f64, f64)> {
    let denom = points.saturating_sub(1).max(1) as f64;
    (0..points)
        .map(|k| {
            let phi = std::f64::consts::PI * k as f64 / denom;
            (phi, fredkin_bsa_fidelity(phi))
        })
        .collect()
}

pub fn write_fredkin_csv(curve: &[(f64, f64)], path: &Path) -> Result<()> {
    write_rows(path, curve.iter().map(|&(varphi_rad, f_unc)| FredkinRow { varphi_rad, f_unc }))
}

#[derive(Serialize)]
struct SeriesRow {
    nodes: u32,
    success_rate: f64,
}

pub fn write_series_csv(f: f64, max_nodes: u32, path: &Path) -> Result<()> {
    let rows = (1..=max_nodes)
        .map(|n| {
            Ok(SeriesRow {
                nodes: n,
                success_rate: series_success_rate(f, n)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_rows(path, rows)
}
