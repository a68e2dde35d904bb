use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use qpnn::engine::{mode_occupation_profile, Stage};
use qpnn::trainer::{self, OptimizerConfig};
use qpnn::{ObjectiveKind, TaskName, TaskSpec};
use qpnn_lab::config::{parse_angle, Cell, ExperimentConfig, LOSS_SWEEP_TRIALS, NL_SWEEP_TRIALS};
use qpnn_lab::experiment::{architecture, run_experiment, RunOptions};
use qpnn_lab::stats::PLATEAU_GAP_DECADES;
use qpnn_lab::summary::{self, summarize, write_summary_csv, write_trace_csv};
use qpnn_lab::store::{RecordKind, Store};

#[derive(Parser)]
#[command(name = "qpnn", version, about = "Train and analyze imperfect quantum photonic neural networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a single in-situ trial and print its metrics.
    Train(Common),
    /// Grid over layer counts and propagation losses.
    SweepLoss(Sweep),
    /// Grid over layer counts and nonlinear phase shifts.
    SweepNl(Sweep),
    /// Uniform-loss fidelity ceiling of an idealized solution.
    LossLimit(Common),
    /// Fidelity of the Fredkin-gate Bell-state analyzer versus nonlinearity.
    BaselineFredkin {
        #[arg(long, default_value_t = 100)]
        points: usize,
        /// CSV destination; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Success rate of identical operations in series.
    Series {
        #[arg(long)]
        fidelity: f64,
        #[arg(long, default_value_t = 10)]
        nodes: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a result store: summary.csv and per-trial trace CSVs.
    Analyze {
        #[arg(long)]
        out: PathBuf,
        /// Gap between infidelity plateaus, decades.
        #[arg(long, default_value_t = PLATEAU_GAP_DECADES)]
        gap: f64,
    },
    /// Photon-number profile of every mode through a trained network.
    Snapshot {
        #[command(flatten)]
        common: Common,
        /// Training pair whose input is propagated.
        #[arg(long, default_value_t = 0)]
        pair: usize,
    },
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value = "bsa")]
    task: TaskName,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    /// Mean propagation loss, dB/cm.
    #[arg(long, default_value_t = 0.3)]
    alpha: f64,
    /// Nonlinear phase, radians (`pi/4` style accepted).
    #[arg(long, default_value = "pi", value_parser = angle)]
    varphi: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "unc")]
    objective: ObjectiveKind,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Sweep {
    /// JSON experiment configuration; overrides the grid flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "bsa")]
    task: TaskName,
    #[arg(long, value_delimiter = ',')]
    layers: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',', value_parser = angle)]
    varphi: Vec<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "unc")]
    objective: ObjectiveKind,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn angle(s: &str) -> Result<f64, String> {
    parse_angle(s).map_err(|e| e.to_string())
}

fn sweep_config(s: &Sweep, nonlinear: bool) -> Result<ExperimentConfig> {
    if let Some(path) = &s.config {
        return Ok(ExperimentConfig::load(path)?);
    }
    let or = |v: &Vec<f64>, d: Vec<f64>| if v.is_empty() { d } else { v.clone() };
    let config = if nonlinear {
        ExperimentConfig {
            task: s.task,
            layer_range: if s.layers.is_empty() { vec![2] } else { s.layers.clone() },
            alpha_list: or(&s.alpha, vec![0.3]),
            varphi_list: or(&s.varphi, vec![PI / 100.0, PI / 10.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0, PI]),
            trials: s.trials.unwrap_or(NL_SWEEP_TRIALS),
            base_seed: s.seed,
            objective_kind: s.objective,
            output_dir: s.out.clone(),
        }
    } else {
        ExperimentConfig {
            task: s.task,
            layer_range: if s.layers.is_empty() { vec![2] } else { s.layers.clone() },
            alpha_list: or(&s.alpha, vec![0.0, 0.001, 0.01, 0.03, 0.1, 0.3, 1.0]),
            varphi_list: or(&s.varphi, vec![PI]),
            trials: s.trials.unwrap_or(LOSS_SWEEP_TRIALS),
            base_seed: s.seed,
            objective_kind: s.objective,
            output_dir: s.out.clone(),
        }
    };
    config.validate()?;
    Ok(config)
}

fn analyze(out: &Path, gap: f64) -> Result<()> {
    let config = ExperimentConfig::load(&out.join("config.json"))
        .with_context(|| format!("no experiment configuration in {}", out.display()))?;
    let records = Store::new(out).load_all()?;
    let summary = summarize(&records, &config, gap);
    for m in &summary.missing {
        eprintln!("missing: {m}");
    }
    write_summary_csv(&summary.rows, &out.join("summary.csv"))?;
    for r in records.iter().filter(|r| r.kind == RecordKind::InSitu) {
        let name = format!("trial_{:04}.csv", r.trial.unwrap_or(0));
        write_trace_csv(&r.trace, r.evals, &out.join("traces").join(r.cell.key()).join(name))?;
    }
    for row in summary.rows.iter().filter(|r| r.metric == "f_unc" || r.metric == "f_unc_max" || r.metric == summary::NO_SUCCESS) {
        println!(
            "{} L={} alpha={} varphi={:.4} {}: {} [{}, {}] ({}/{} successful, plateau {})",
            row.task,
            row.layers,
            row.alpha_wg_db_cm,
            row.varphi_rad,
            row.metric,
            fmt_opt(row.mean),
            fmt_opt(row.ci_low),
            fmt_opt(row.ci_high),
            row.n_success,
            row.n_trials,
            row.plateau_n
        );
    }
    println!("wrote {}", out.join("summary.csv").display());
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

fn cell_of(c: &Common) -> Cell {
    Cell {
        task: c.task,
        layers: c.layers,
        alpha: c.alpha,
        varphi: c.varphi,
        objective: c.objective,
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train(c) => {
            let task = TaskSpec::by_name(c.task)?;
            let cell = cell_of(&c);
            let cfg = OptimizerConfig::default().with_seed(c.seed);
            let r = trainer::train_in_situ(&architecture(&cell), &task, c.objective, &cfg)?;
            println!("{}", serde_json::to_string_pretty(&r.final_metrics)?);
            println!("evals {} stop {:?}", r.evals, r.stop);
            if let Some(out) = c.out {
                std::fs::create_dir_all(&out)?;
                std::fs::write(out.join("trial.json"), serde_json::to_vec_pretty(&r)?)?;
                write_trace_csv(&r.trace, r.evals, &out.join("trace.csv"))?;
            }
        }
        Command::SweepLoss(s) | Command::SweepNl(s) if s.jobs == 0 => bail!("--jobs must be at least 1"),
        Command::SweepLoss(s) => {
            let config = sweep_config(&s, false)?;
            run(&config, s.jobs)?;
        }
        Command::SweepNl(s) => {
            let config = sweep_config(&s, true)?;
            run(&config, s.jobs)?;
        }
        Command::LossLimit(c) => {
            let task = TaskSpec::by_name(c.task)?;
            let arch = architecture(&cell_of(&c));
            let lim = trainer::loss_limit(&arch, &task, c.objective, &OptimizerConfig::default().with_seed(c.seed))?;
            let closed =
                trainer::loss_limit_closed_form(lim.ideal_f_unc, lim.layer_transmission, task.photons(), c.layers);
            println!("loss limit {:.6} (ideal {:.6}, layer transmission {:.6}, closed form {:.6})",
                lim.f_unc, lim.ideal_f_unc, lim.layer_transmission, closed);
        }
        Command::BaselineFredkin { points, out } => {
            let curve = summary::fredkin_curve(points);
            match out {
                Some(path) => summary::write_fredkin_csv(&curve, &path)?,
                None => {
                    println!("varphi_rad,f_unc");
                    for (p, f) in curve {
                        println!("{p},{f}");
                    }
                }
            }
        }
        Command::Series { fidelity, nodes, out } => match out {
            Some(path) => summary::write_series_csv(fidelity, nodes, &path)?,
            None => {
                println!("nodes,success_rate");
                for n in 1..=nodes {
                    println!("{n},{}", qpnn::tasks::series_success_rate(fidelity, n)?);
                }
            }
        },
        Command::Analyze { out, gap } => analyze(&out, gap)?,
        Command::Snapshot { common: c, pair } => {
            let task = TaskSpec::by_name(c.task)?;
            let cell = cell_of(&c);
            let arch = architecture(&cell);
            let cfg = OptimizerConfig::default().with_seed(c.seed);
            let r = trainer::train_in_situ(&arch, &task, c.objective, &cfg)?;
            let mut instance = trainer::realization(&arch, &task, c.seed)?;
            instance.set_params(&r.final_params)?;
            let Some((input, _)) = task.training_set.pairs().get(pair) else {
                bail!("task {} has {} training pairs", c.task, task.training_set.len());
            };
            let mut text = String::from("stage,mode,photons,probability\n");
            for prof in mode_occupation_profile(&instance, input)? {
                let stage = match prof.stage {
                    Stage::Input => "input".to_string(),
                    Stage::Mesh(i) => format!("mesh{i}"),
                    Stage::Kerr(i) => format!("kerr{i}"),
                };
                for (j, probs) in prof.probabilities.iter().enumerate() {
                    for (k, p) in probs.iter().enumerate() {
                        text.push_str(&format!("{stage},{j},{k},{p}\n"));
                    }
                }
            }
            match c.out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    std::fs::write(dir.join("snapshot.csv"), text)?;
                }
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn run(config: &ExperimentConfig, jobs: usize) -> Result<()> {
    let opts = RunOptions {
        jobs,
        ..Default::default()
    };
    let records = run_experiment(config, &opts)?;
    println!("{} records in {}", records.len(), config.output_dir.display());
    analyze(&config.output_dir, PLATEAU_GAP_DECADES)
}
