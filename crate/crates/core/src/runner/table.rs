use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::sim::{SimulationReport, Time};
use crate::task::Work;

/// One row of the statistics table: the configuration of a run followed
/// by its counters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: String,
    pub work: Work,
    pub p: usize,
    pub latency: Time,
    pub layout: String,
    pub strategy: String,
    pub simultaneous: bool,
    pub threshold: String,
    pub replication: usize,
    pub seed: u64,
    pub makespan: Time,
    pub steal_requests_sent: u64,
    pub steal_requests_total: u64,
    pub steal_success: u64,
    pub steal_fail: u64,
    pub total_work_executed: Work,
    pub merge_work_executed: Work,
    pub tasks_created: usize,
    pub t_startup_end: Time,
    pub t_plateau_end: Time,
}

impl RunRecord {
    pub fn new(config: &ScenarioConfig, replication: usize, report: &SimulationReport) -> Self {
        let stats = &report.stats;
        RunRecord {
            model: config.model.as_str().to_string(),
            work: report.app.total_work(),
            p: config.topology.p,
            latency: config.topology.latency,
            layout: serde_json::to_value(config.topology.layout)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
            strategy: config.strategy.label(),
            simultaneous: config.policy.simultaneous,
            threshold: config.policy.threshold.label(),
            replication,
            seed: report.seed,
            makespan: stats.makespan,
            steal_requests_sent: stats.steal_requests_sent,
            steal_requests_total: stats.steal_requests_total,
            steal_success: stats.steal_success,
            steal_fail: stats.steal_fail,
            total_work_executed: stats.total_work_executed,
            merge_work_executed: stats.merge_work_executed,
            tasks_created: stats.tasks_created,
            t_startup_end: stats.t_startup_end,
            t_plateau_end: stats.t_plateau_end,
        }
    }
}

pub fn write_records<'a, W: Write>(out: W, records: impl IntoIterator<Item = &'a RunRecord>) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let mut wrote = false;
    for record in records {
        writer.serialize(record)?;
        wrote = true;
    }
    if !wrote {
        // The header row is mandatory even for an empty table.
        writer.write_record(HEADER)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<RunRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let records = reader.deserialize().collect::<std::result::Result<Vec<RunRecord>, _>>()?;
    Ok(records)
}

const HEADER: [&str; 20] = [
    "model",
    "work",
    "p",
    "latency",
    "layout",
    "strategy",
    "simultaneous",
    "threshold",
    "replication",
    "seed",
    "makespan",
    "steal_requests_sent",
    "steal_requests_total",
    "steal_success",
    "steal_fail",
    "total_work_executed",
    "merge_work_executed",
    "tasks_created",
    "t_startup_end",
    "t_plateau_end",
];
