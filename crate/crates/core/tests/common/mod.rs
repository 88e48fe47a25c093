//! Checks shared by the property and acceptance suites. They only look at
//! reports, traces and task records, never at simulator internals.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wssim::processor::{ProcState, StealOutcome};
use wssim::sim::{EventKind, SimulationReport, SimulationState};
use wssim::task::{Application, DagKind, DagSpec, MergeCost, ModelKind, TaskIdx};
use wssim::topology::{PlatformTopology, StealPolicy, ThresholdMode};
use wssim::trace::validate_state_cycle;
use wssim::ScenarioConfig;

/// A random small scenario: W <= 1000, p <= 8, latency <= 20.
pub fn random_small_config(rng: &mut ChaCha8Rng) -> ScenarioConfig {
    let p = rng.gen_range(1..=8);
    let latency = rng.gen_range(0..=20);
    let simultaneous = rng.gen_bool(0.5);
    let mut config = match rng.gen_range(0..3) {
        0 => ScenarioConfig::divisible(rng.gen_range(1..=1000), p, latency),
        1 => {
            let mut c = ScenarioConfig::adaptive(rng.gen_range(1..=1000), p, latency);
            if rng.gen_bool(0.5) {
                c.merge_cost = MergeCost::Linear { coefficient: 0.05 };
            }
            c
        }
        _ => {
            let kind = [DagKind::BinaryTree, DagKind::ForkJoin, DagKind::MergeSort][rng.gen_range(0..3)];
            let size = match kind {
                DagKind::BinaryTree => rng.gen_range(1..=8),
                _ => rng.gen_range(1..=64),
            };
            let work_max = if rng.gen_bool(0.5) { 1 } else { rng.gen_range(1..=10) };
            ScenarioConfig::dag(
                DagSpec {
                    kind,
                    size,
                    work_min: 1,
                    work_max,
                },
                p,
                latency,
            )
        }
    };
    config.policy = StealPolicy {
        simultaneous,
        threshold: match rng.gen_range(0..3) {
            0 => ThresholdMode::Static { value: 0 },
            1 => ThresholdMode::Static {
                value: rng.gen_range(0..50),
            },
            _ => ThresholdMode::LatencyMultiple { factor: 1 },
        },
    };
    config.base_seed = rng.gen();
    config
}

/// Runs every structural check on one report; returns the first violation.
pub fn check_report(config: &ScenarioConfig, report: &SimulationReport) -> Result<(), String> {
    let stats = &report.stats;
    let app = &report.app;
    let p = config.topology.p;

    if !app.is_finished() {
        return Err("run ended before all tasks completed".into());
    }
    if stats.steal_success + stats.steal_fail != stats.steal_requests_total {
        return Err("success + fail != answered requests".into());
    }

    // Work conservation.
    let merge_work: u64 = app.tasks().iter().filter(|t| t.merge_of.is_some()).map(|t| t.work).sum();
    let own_work: u64 = app.tasks().iter().filter(|t| t.merge_of.is_none()).map(|t| t.work).sum();
    match app.model {
        ModelKind::Divisible | ModelKind::Adaptive => {
            let w = config.work.unwrap();
            if stats.total_work_executed != w || own_work != w {
                return Err(format!(
                    "executed {} (records {}) != W {}",
                    stats.total_work_executed, own_work, w
                ));
            }
        }
        ModelKind::Dag => {
            if stats.total_work_executed != app.total_work() {
                return Err("DAG executed work differs from total work".into());
            }
        }
    }
    if stats.merge_work_executed != merge_work {
        return Err("merge work mismatch".into());
    }
    if stats.tasks_completed != stats.tasks_created {
        return Err("created != completed".into());
    }
    if app.model == ModelKind::Adaptive {
        let splits = app.splits().len();
        if stats.tasks_created != 1 + 2 * splits {
            return Err(format!("adaptive: {} tasks for {splits} splits", stats.tasks_created));
        }
    }

    // Task records.
    for task in app.tasks() {
        let (Some(start), Some(end)) = (task.start_time, task.end_time) else {
            return Err(format!("task {} never ran", task.id));
        };
        if end - start != task.work {
            return Err(format!("task {}: end - start != work", task.id));
        }
        for child in &task.children {
            if app.task(*child).start_time.unwrap() < end {
                return Err(format!("precedence violated on {} -> {}", task.id, app.task(*child).id));
            }
        }
    }

    // Makespan lower bounds.
    let total = stats.total_work_executed + stats.merge_work_executed;
    if stats.makespan < total.div_ceil(p as u64) {
        return Err("makespan below work / p".into());
    }
    if app.model == ModelKind::Dag && stats.makespan < app.critical_path() {
        return Err("makespan below critical path".into());
    }

    // Traces.
    validate_state_cycle(&report.trace)?;
    for proc in 0..p {
        let (active, _, _) = report.trace.durations(proc, stats.makespan);
        if active != stats.busy[proc] {
            return Err(format!("P{proc}: ACTIVE time {active} != busy {}", stats.busy[proc]));
        }
    }
    let times: Vec<u64> = report.trace.events().iter().map(|e| e.time).collect();
    if times.windows(2).any(|w| w[0] > w[1]) {
        return Err("trace times go backwards".into());
    }
    if !(stats.t_startup_end <= stats.t_plateau_end && stats.t_plateau_end <= stats.makespan) {
        return Err("phase boundaries out of order".into());
    }

    // Steals.
    let topo = config.build_topology().unwrap();
    for g in &report.grants {
        let d = topo.distance(g.thief, g.victim).unwrap().max(1);
        if g.received_at - g.requested_at != 2 * d {
            return Err(format!("round trip {} != 2 * {d}", g.received_at - g.requested_at));
        }
    }
    if !config.policy.simultaneous {
        for victim in 0..p {
            let mut windows: Vec<(u64, u64)> = report
                .grants
                .iter()
                .filter(|g| g.victim == victim)
                .map(|g| (g.answered_at, g.received_at))
                .collect();
            windows.sort();
            if windows.windows(2).any(|w| w[1].0 < w[0].1) {
                return Err(format!("P{victim} overlapping grant transfers under SWT"));
            }
        }
    }
    Ok(())
}

/// Victim with `remaining` work answering `k` simultaneous requests.
/// Returns the granted works in answer order and the work the victim kept.
pub fn simultaneous_batch(remaining: u64, k: usize, simultaneous: bool) -> (Vec<u64>, u64) {
    let latency = 5;
    let topo = PlatformTopology::single_cluster(k + 1, latency).with_policy(StealPolicy {
        simultaneous,
        threshold: ThresholdMode::Static { value: 0 },
    });
    let mut state = SimulationState::new(Application::divisible(remaining + latency), topo, 0).unwrap();
    for thief in 1..=k {
        state.processors[thief].state = ProcState::Thief;
        state.processors[thief].pending_request = Some((0, 0));
    }
    for thief in 1..=k {
        state.answer_steal_request(0, thief, latency).unwrap();
    }
    let mut answers: Vec<_> = state
        .queue
        .iter()
        .filter_map(|e| match &e.kind {
            EventKind::StealAnswer { payload, .. } => Some((e.seq, payload.outcome)),
            _ => None,
        })
        .collect();
    answers.sort_by_key(|a| a.0);
    let grants = answers
        .into_iter()
        .map(|(_, o)| match o {
            StealOutcome::Granted(t) => state.app.get_work(t),
            StealOutcome::Failed => 0,
        })
        .collect();
    (grants, state.app.remaining(TaskIdx(0), latency))
}

/// Edges of an application as (parent id, child id) pairs.
pub fn edge_ids(app: &Application) -> Vec<(u64, u64)> {
    app.tasks()
        .iter()
        .flat_map(|t| t.children.iter().map(move |c| (t.id, app.task(*c).id)))
        .collect()
}

pub fn shape(app: &Application) -> Vec<(u64, u64, Vec<u64>)> {
    app.tasks()
        .iter()
        .map(|t| (t.id, t.work, t.children.iter().map(|c| app.task(*c).id).collect()))
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

