use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use wssim::runner::analysis::{self, Aggregate, FitRow, LogForm};
use wssim::runner::{self, RunRecord, SweepAxis};
use wssim::trace::{export_json_dag, export_paje};
use wssim::ScenarioConfig;

#[derive(Parser)]
#[command(name = "wssim", version, about = "Work stealing simulator with explicit latencies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every replication of a scenario.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Directory for stats.csv and per-run traces (stdout otherwise).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        /// Write a Paje trace per run.
        #[arg(long)]
        paje: bool,
        /// Write the executed application as JSON per run.
        #[arg(long)]
        json_dag: bool,
    },
    /// Run a scenario over a parameter grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `name=a,b,c` or `name=start:end:step`; names: work, p, lambda, simultaneous.
        #[arg(long = "axis")]
        axes: Vec<String>,
        /// Replications per cell (defaults to the scenario's).
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        /// CSV output file (stdout otherwise).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analyze a statistics table produced by `simulate` or `sweep`.
    Analyze {
        kind: AnalysisKind,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Constant of the theoretical bound.
        #[arg(long, default_value_t = analysis::GAMMA)]
        gamma: f64,
        /// Overhead constant of the acceptable-latency equation.
        #[arg(long, default_value_t = analysis::FITTED_CONSTANT)]
        constant: f64,
        #[arg(long, value_enum, default_value_t = LogFormArg::WOverLatency)]
        log_form: LogFormArg,
        /// Aggregate replications with the mean instead of the median.
        #[arg(long)]
        mean: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AnalysisKind {
    Overhead,
    Fit,
    LimitLatency,
    Phases,
    MwtVsSwt,
}

#[derive(Clone, Copy, ValueEnum)]
enum LogFormArg {
    WOverLatency,
    WOverTwoLatency,
}

impl From<LogFormArg> for LogForm {
    fn from(arg: LogFormArg) -> Self {
        match arg {
            LogFormArg::WOverLatency => LogForm::WOverLatency,
            LogFormArg::WOverTwoLatency => LogForm::WOverTwoLatency,
        }
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            config,
            out_dir,
            workers,
            paje,
            json_dag,
        } => simulate(&config, out_dir, workers, paje, json_dag),
        Command::Sweep {
            config,
            axes,
            reps,
            workers,
            out,
        } => sweep(&config, &axes, reps, workers, out.as_deref()),
        Command::Analyze {
            kind,
            input,
            out,
            gamma,
            constant,
            log_form,
            mean,
        } => {
            let records = runner::read_records(File::open(&input).with_context(|| format!("opening {}", input.display()))?)?;
            let aggregate = if mean { Aggregate::Mean } else { Aggregate::Median };
            let out = output(out.as_deref())?;
            match kind {
                AnalysisKind::Overhead => write_rows(out, &analysis::overhead_table(&records, gamma, log_form.into())),
                AnalysisKind::Fit => {
                    let rows: Vec<FitRow> = records.iter().map(FitRow::from).collect();
                    let c = analysis::fit_constant(&rows, log_form.into())?;
                    #[derive(Serialize)]
                    struct Fit {
                        constant: f64,
                        rows: usize,
                    }
                    write_rows(out, &[Fit { constant: c, rows: rows.len() }])
                }
                AnalysisKind::LimitLatency => write_rows(out, &analysis::limit_latency_table(&records, constant, aggregate)),
                AnalysisKind::Phases => write_rows(out, &analysis::phase_table(&records)),
                AnalysisKind::MwtVsSwt => write_rows(out, &analysis::transfer_table(&records)),
            }
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(path) => Box::new(File::create(path).with_context(|| format!("creating {}", path.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_rows<T: Serialize>(out: Box<dyn Write>, rows: &[T]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

fn simulate(path: &Path, out_dir: Option<PathBuf>, workers: Option<usize>, paje: bool, json_dag: bool) -> Result<()> {
    let config = ScenarioConfig::from_path(path).with_context(|| format!("loading {}", path.display()))?;
    let out_dir = out_dir.or_else(|| config.output.dir.clone());
    let paje = paje || config.output.paje;
    let json_dag = json_dag || config.output.json_dag;
    if (paje || json_dag) && out_dir.is_none() {
        bail!("--paje and --json-dag need an output directory");
    }
    if let Some(dir) = &out_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }

    let records = runner::map_replications(&config, workers, |i, report| -> Result<RunRecord> {
        if let Some(dir) = &out_dir {
            if paje {
                std::fs::write(dir.join(format!("run_{i}.paje")), export_paje(&report.trace))?;
            }
            if json_dag {
                std::fs::write(dir.join(format!("run_{i}.json")), export_json_dag(&report.app))?;
            }
        }
        Ok(RunRecord::new(&config, i, &report))
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    for r in &records {
        eprintln!(
            "run {:>4} seed {:>6}: makespan {} | steals {} ok / {} failed | work {} | startup end {}",
            r.replication, r.seed, r.makespan, r.steal_success, r.steal_fail, r.total_work_executed, r.t_startup_end
        );
    }
    match &out_dir {
        Some(dir) => runner::write_records(File::create(dir.join("stats.csv"))?, &records)?,
        None => runner::write_records(io::stdout().lock(), &records)?,
    }
    Ok(())
}

fn sweep(path: &Path, axes: &[String], reps: Option<usize>, workers: Option<usize>, out: Option<&Path>) -> Result<()> {
    let mut config = ScenarioConfig::from_path(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(n) = reps {
        config.replications = n;
    }
    let axes = axes.iter().map(|a| SweepAxis::parse(a)).collect::<wssim::Result<Vec<_>>>()?;
    let result = runner::sweep(&config, &axes, workers)?;
    eprintln!(
        "{} cells x {} replications = {} runs",
        result.cells.len(),
        config.replications,
        result.records().count()
    );
    runner::write_records(output(out)?, result.records())?;
    Ok(())
}
