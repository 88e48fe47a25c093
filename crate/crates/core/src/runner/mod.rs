//! Replicated and swept execution of scenarios.
//!
//! Independent runs are spread over a rayon pool; results always come back
//! ordered by replication index so output does not depend on scheduling.

pub mod analysis;
mod table;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Result, SimError};
use crate::sim::{initialize, SimulationReport, Time};
use crate::task::Work;

pub use table::{read_records, write_records, RunRecord};

/// Runs one replication of a scenario.
pub fn run_replication(config: &ScenarioConfig, replication: usize) -> Result<SimulationReport> {
    initialize(config, config.seed_for(replication))?.run()
}

/// Runs every replication of `config` and returns the reports in
/// replication order.
pub fn run_scenario(config: &ScenarioConfig, workers: Option<usize>) -> Result<Vec<SimulationReport>> {
    map_replications(config, workers, |_, report| report)
}

/// Runs every replication and keeps only `f(index, report)`, so large
/// batches do not hold every trace in memory.
pub fn map_replications<T, F>(config: &ScenarioConfig, workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, SimulationReport) -> T + Sync,
{
    config.validate()?;
    let jobs: Vec<(ScenarioConfig, usize)> = (0..config.replications).map(|i| (config.clone(), i)).collect();
    run_jobs(&jobs, workers, |(config, i)| run_replication(config, *i).map(|r| f(*i, r)))
}

/// Applies `job` to every input on a pool of `workers` threads (the
/// global pool when `None`), preserving input order.
pub fn run_jobs<I, T, F>(inputs: &[I], workers: Option<usize>, job: F) -> Result<Vec<T>>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> Result<T> + Sync,
{
    let work = || inputs.par_iter().map(&job).collect::<Result<Vec<T>>>();
    match workers {
        None => work(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| SimError::InvalidConfig(format!("worker pool: {e}")))?
            .install(work),
    }
}

/// One varied parameter of a sweep.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    Work(Vec<Work>),
    P(Vec<usize>),
    Latency(Vec<Time>),
    Simultaneous(Vec<bool>),
}

impl SweepAxis {
    /// Parses `name=a,b,c` or `name=start:end:step` (end inclusive).
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: &str| SimError::InvalidConfig(format!("axis `{text}`: {msg}"));
        let (name, values) = text.split_once('=').ok_or_else(|| bad("expected name=values"))?;
        let numbers = || -> Result<Vec<u64>> {
            let parts: Vec<&str> = values.split(':').collect();
            if parts.len() == 3 {
                let [start, end, step] = [parts[0], parts[1], parts[2]].map(|s| s.trim().parse::<u64>());
                let (start, end, step) = (
                    start.map_err(|_| bad("bad range start"))?,
                    end.map_err(|_| bad("bad range end"))?,
                    step.map_err(|_| bad("bad range step"))?,
                );
                if step == 0 || start > end {
                    return Err(bad("empty range"));
                }
                Ok((start..=end).step_by(step as usize).collect())
            } else {
                values
                    .split(',')
                    .map(|v| v.trim().parse::<u64>().map_err(|_| bad("bad number")))
                    .collect()
            }
        };
        let axis = match name.trim() {
            "work" | "W" | "w" => SweepAxis::Work(numbers()?),
            "p" => SweepAxis::P(numbers()?.into_iter().map(|v| v as usize).collect()),
            "lambda" | "latency" => SweepAxis::Latency(numbers()?),
            "simultaneous" | "mwt" => SweepAxis::Simultaneous(
                values
                    .split(',')
                    .map(|v| v.trim().parse::<bool>().map_err(|_| bad("expected true/false")))
                    .collect::<Result<_>>()?,
            ),
            other => return Err(bad(&format!("unknown axis {other}"))),
        };
        if axis.is_empty() {
            return Err(bad("no values"));
        }
        Ok(axis)
    }

    pub fn len(&self) -> usize {
        match self {
            SweepAxis::Work(v) | SweepAxis::Latency(v) => v.len(),
            SweepAxis::P(v) => v.len(),
            SweepAxis::Simultaneous(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn apply(&self, index: usize, config: &mut ScenarioConfig) {
        match self {
            SweepAxis::Work(v) => config.work = Some(v[index]),
            SweepAxis::P(v) => config.topology.p = v[index],
            SweepAxis::Latency(v) => config.topology.latency = v[index],
            SweepAxis::Simultaneous(v) => config.policy.simultaneous = v[index],
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepCell {
    pub config: ScenarioConfig,
    pub records: Vec<RunRecord>,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub axes: Vec<SweepAxis>,
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn records(&self) -> impl Iterator<Item = &RunRecord> {
        self.cells.iter().flat_map(|c| c.records.iter())
    }
}

/// Expands the cartesian product of `axes` over `base`, first axis outermost.
pub fn grid(base: &ScenarioConfig, axes: &[SweepAxis]) -> Vec<ScenarioConfig> {
    let mut configs = vec![base.clone()];
    for axis in axes {
        configs = configs
            .into_iter()
            .flat_map(|config| {
                (0..axis.len()).map(move |i| {
                    let mut c = config.clone();
                    axis.apply(i, &mut c);
                    c
                })
            })
            .collect();
    }
    configs
}

/// Runs `base.replications` runs in every cell of the grid.
pub fn sweep(base: &ScenarioConfig, axes: &[SweepAxis], workers: Option<usize>) -> Result<SweepResult> {
    let configs = grid(base, axes);
    for config in &configs {
        config.validate()?;
    }
    let jobs: Vec<(usize, usize)> = configs
        .iter()
        .enumerate()
        .flat_map(|(cell, c)| (0..c.replications).map(move |i| (cell, i)))
        .collect();
    let records = run_jobs(&jobs, workers, |&(cell, i)| {
        let config = &configs[cell];
        run_replication(config, i).map(|report| RunRecord::new(config, i, &report))
    })?;

    let mut records = records.into_iter();
    let cells = configs
        .into_iter()
        .map(|config| {
            let records = records.by_ref().take(config.replications).collect();
            SweepCell { config, records }
        })
        .collect();
    Ok(SweepResult {
        axes: axes.to_vec(),
        cells,
    })
}
