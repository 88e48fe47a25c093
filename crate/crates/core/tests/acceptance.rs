//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on
//! any failure.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;

use wssim::runner::analysis::{self, FitRow, LogForm};
use wssim::runner::{self, RunRecord};
use wssim::sim::{EventKind, SimulationState};
use wssim::task::{load_application, DagKind, DagSpec, TaskIdx};
use wssim::trace::{export_json_dag, export_paje, TraceState};
use wssim::{initialize, ScenarioConfig};

type Check = Result<String, String>;
type Cell = (usize, u64, Vec<RunRecord>);

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run_cell(work: u64, p: usize, latency: u64, reps: usize) -> Vec<RunRecord> {
    let config = ScenarioConfig::divisible(work, p, latency).with_replications(reps, 0);
    runner::map_replications(&config, None, |i, r| RunRecord::new(&config, i, &r)).unwrap()
}

const BOUND_P: [usize; 2] = [32, 64];
const BOUND_LATENCY: [u64; 3] = [2, 62, 262];

fn bound_cells() -> Vec<Cell> {
    let mut cells = Vec::new();
    for p in BOUND_P {
        for latency in BOUND_LATENCY {
            cells.push((p, latency, run_cell(1_000_000, p, latency, 100)));
        }
    }
    cells
}

/// 1. Every makespan lies between ceil(W/p) and the theoretical bound.
fn bound_validation(cells: &[Cell]) -> Check {
    let work = 1_000_000u64;
    let mut runs = 0;
    for (p, latency, records) in cells {
        let lower = work.div_ceil(*p as u64);
        let upper = analysis::makespan_bound(work, *p, *latency, analysis::GAMMA);
        for r in records {
            runs += 1;
            ensure(r.makespan >= lower && r.makespan as f64 <= upper, || {
                format!("p={p} λ={latency} seed {}: makespan {} outside [{lower}, {upper:.0}]", r.seed, r.makespan)
            })?;
        }
    }
    Ok(format!("{runs} runs, 0 violations"))
}

/// 2. Median overhead ratio of each cell in [3.0, 6.5].
fn overhead_ratio(cells: &[Cell]) -> Check {
    let mut summary = Vec::new();
    for (p, latency, records) in cells {
        let ratios: Vec<f64> = records
            .iter()
            .filter_map(|r| {
                analysis::overhead_ratio(r.makespan as f64, r.work, r.p, r.latency, analysis::GAMMA, LogForm::WOverLatency)
            })
            .collect();
        let median = analysis::median(&ratios);
        ensure((3.0..=6.5).contains(&median), || format!("p={p} λ={latency}: median ratio {median:.3}"))?;
        summary.push(format!("{median:.2}"));
    }
    Ok(format!("medians [{}]", summary.join(", ")))
}

/// 3. Least-squares overhead constant in [3.0, 4.6].
fn fitted_constant() -> Check {
    let mut rows = Vec::new();
    for work in [100_000, 1_000_000] {
        for p in [32, 64, 128] {
            for latency in [2, 62, 262, 482] {
                rows.extend(run_cell(work, p, latency, 50).iter().map(FitRow::from));
            }
        }
    }
    let c = analysis::fit_constant(&rows, LogForm::WOverLatency).map_err(|e| e.to_string())?;
    ensure((3.0..=4.6).contains(&c), || format!("c = {c:.3}"))?;
    Ok(format!("c = {c:.3} over {} runs", rows.len()))
}

/// 4. Experimental limit latency within 30% of the theoretical one and
///    W/p over the limit latency in [330, 610].
fn limit_latency() -> Check {
    let work = 1_000_000u64;
    let mut summary = Vec::new();
    for p in [64, 128] {
        let theory = analysis::limit_latency_theoretical(work, p, analysis::FITTED_CONSTANT).map_err(|e| e.to_string())?;
        let base = ScenarioConfig::divisible(work, p, 1).with_replications(51, 0);
        let found = analysis::limit_latency_experimental(&base, None).map_err(|e| e.to_string())?;
        ensure(!found.degenerate && found.latency > 0, || format!("p={p}: degenerate search {found:?}"))?;
        let lambda = found.latency as f64;
        let rel = (lambda - theory).abs() / theory;
        let scale = work as f64 / p as f64 / lambda;
        ensure(rel <= 0.30, || format!("p={p}: λ={lambda} vs theory {theory:.2} ({:.0}%)", rel * 100.0))?;
        ensure((330.0..=610.0).contains(&scale), || format!("p={p}: W/p/λ = {scale:.0}"))?;
        summary.push(format!("p={p}: λ={lambda} (theory {theory:.2}, W/p/λ={scale:.0})"));
    }
    Ok(summary.join("; "))
}

/// 5. Multiple work transfer shortens startup in most paired runs and
///    moves the median makespan by less than 2%.
fn mwt_vs_swt() -> Check {
    let mut summary = Vec::new();
    for p in [32, 64] {
        let config = ScenarioConfig::divisible(10_000_000, p, 262).with_replications(100, 0);
        let cmp = analysis::compare_mwt_swt(&config, None).map_err(|e| e.to_string())?;
        let faster = cmp.fraction_faster_startup();
        let diff = cmp.median_makespan_rel_diff();
        ensure(faster >= 0.7, || format!("p={p}: faster startup in {:.0}% of pairs", faster * 100.0))?;
        ensure(diff < 0.02, || format!("p={p}: median makespan difference {:.2}%", diff * 100.0))?;
        summary.push(format!("p={p}: faster {:.0}%, makespan diff {:.2}%", faster * 100.0, diff * 100.0));
    }
    Ok(summary.join("; "))
}

/// 6. Two processors, W=100, λ=10: the exact event sequence and a
///    byte-identical Paje trace.
fn hand_trace() -> Check {
    let config = ScenarioConfig::from_path(&fixture("two_proc.json")).map_err(|e| e.to_string())?;
    let mut state: SimulationState = initialize(&config, config.seed_for(0)).map_err(|e| e.to_string())?;

    let mut dispatched = Vec::new();
    while !state.app.is_finished() {
        let next = state.queue.iter().min_by_key(|e| (e.time, e.seq)).cloned().ok_or("queue ran dry")?;
        let live = match next.kind {
            EventKind::Idle { generation } => state.processors[next.subject].generation == generation,
            _ => true,
        };
        state.step().map_err(|e| e.to_string())?;
        if live {
            dispatched.push((next.time, next.subject, next.kind));
        }
    }
    let times: Vec<(u64, usize)> = dispatched.iter().map(|(t, s, _)| (*t, *s)).collect();
    ensure(times == [(0, 1), (10, 0), (20, 1), (55, 0), (65, 1)], || format!("event sequence {times:?}"))?;
    ensure(matches!(dispatched[1].2, EventKind::StealRequest { thief: 1 }), || "request at 10 is not from P1".into())?;

    let split = state.app.splits().first().copied().ok_or("no split")?;
    let stolen = state.app.get_work(split.stolen);
    let kept = state.app.get_work(TaskIdx(0)) - split.time;
    ensure(split.time == 10 && stolen == 45 && kept == 45, || {
        format!("split at {} into {kept}/{stolen}", split.time)
    })?;

    let report = state.run().map_err(|e| e.to_string())?;
    ensure(report.makespan() == 65, || format!("makespan {}", report.makespan()))?;
    let p1: Vec<_> = report.trace.of(1).map(|e| (e.time, e.state)).collect();
    ensure(p1.contains(&(20, TraceState::Active)), || format!("P1 states {p1:?}"))?;

    let golden = std::fs::read_to_string(fixture("two_proc_lambda10.paje")).map_err(|e| e.to_string())?;
    ensure(export_paje(&report.trace) == golden, || "Paje trace differs from golden file".into())?;
    Ok("request@10, split 45/45, P1 active@20, P0 idle@55, makespan 65, Paje identical".into())
}

/// 7. Invariants on 1000 random small scenarios, every DAG family and
///    batches of simultaneous requests.
fn property_suites() -> Check {
    let mut rng = common::rng(7);
    let mut models = [0usize; 3];
    for i in 0..1000 {
        let config = common::random_small_config(&mut rng);
        models[config.model as usize] += 1;
        let a = runner::run_replication(&config, 0).map_err(|e| format!("config {i}: {e}"))?;
        common::check_report(&config, &a).map_err(|e| format!("config {i} ({config:?}): {e}"))?;
        let b = runner::run_replication(&config, 0).map_err(|e| e.to_string())?;
        ensure(a.stats == b.stats && export_paje(&a.trace) == export_paje(&b.trace), || {
            format!("config {i} is not deterministic")
        })?;
    }

    for (kind, size) in [(DagKind::BinaryTree, 6), (DagKind::ForkJoin, 40), (DagKind::MergeSort, 32)] {
        for p in [1, 2, 4, 8] {
            for latency in [0, 1, 5] {
                let config = ScenarioConfig::dag(DagSpec::unit(kind, size), p, latency);
                let report = runner::run_replication(&config, 0).map_err(|e| e.to_string())?;
                common::check_report(&config, &report)?;
                let bound = report.app.critical_path().max((report.app.tasks().len() as u64).div_ceil(p as u64));
                ensure(report.makespan() >= bound, || format!("{kind:?} p={p}: makespan below {bound}"))?;
            }
        }
    }

    for remaining in [2u64, 7, 64, 1000, 12_345] {
        for k in 1..=5 {
            let (grants, kept) = common::simultaneous_batch(remaining, k, true);
            let mut rest = remaining;
            for g in &grants {
                ensure(*g == rest / 2, || format!("r={remaining} k={k}: grants {grants:?}"))?;
                rest -= g;
            }
            ensure(kept == rest && grants.iter().sum::<u64>() + kept == remaining, || {
                format!("r={remaining} k={k}: kept {kept}, grants {grants:?}")
            })?;
            let (single, _) = common::simultaneous_batch(remaining, k, false);
            ensure(single[0] == remaining / 2 && single[1..].iter().all(|g| *g == 0), || {
                format!("r={remaining} k={k}: single transfer grants {single:?}")
            })?;
        }
    }
    Ok(format!(
        "1000 random scenarios (divisible {}, dag {}, adaptive {}), DAG families, simultaneous batches k<=5",
        models[0], models[1], models[2]
    ))
}

/// 8. Executed applications survive a JSON round trip and Paje output is
///    reproducible.
fn round_trips() -> Check {
    let configs = [
        ScenarioConfig::dag(DagSpec::unit(DagKind::MergeSort, 16), 4, 3),
        ScenarioConfig::adaptive(5_000, 4, 7),
        ScenarioConfig::divisible(5_000, 4, 7),
    ];
    for config in &configs {
        let report = runner::run_replication(config, 0).map_err(|e| e.to_string())?;
        let loaded = load_application(&export_json_dag(&report.app)).map_err(|e| e.to_string())?;
        ensure(common::shape(&loaded) == common::shape(&report.app), || {
            format!("{:?}: shape changed in round trip", config.model)
        })?;
        let again = runner::run_replication(config, 0).map_err(|e| e.to_string())?;
        ensure(export_paje(&report.trace) == export_paje(&again.trace), || {
            format!("{:?}: Paje output differs between identical runs", config.model)
        })?;
    }
    Ok("merge-sort, adaptive and divisible runs".into())
}

fn guarded(f: impl FnOnce() -> Check) -> Check {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        Err(e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into()))
    })
}

fn main() -> ExitCode {
    let cells = catch_unwind(bound_cells).map_err(|_| "bound grid runs panicked".to_string());
    let with_cells = |f: fn(&[Cell]) -> Check| match &cells {
        Ok(cells) => guarded(|| f(cells)),
        Err(e) => Err(e.clone()),
    };
    let results: Vec<(u32, &str, Check)> = vec![
        (1, "makespan within theoretical bound", with_cells(bound_validation)),
        (2, "overhead ratio in [3.0, 6.5]", with_cells(overhead_ratio)),
        (3, "fitted overhead constant in [3.0, 4.6]", guarded(fitted_constant)),
        (4, "limit latency matches theory", guarded(limit_latency)),
        (5, "multiple transfers shorten startup", guarded(mwt_vs_swt)),
        (6, "two-processor hand trace", guarded(hand_trace)),
        (7, "invariants and property suites", guarded(property_suites)),
        (8, "JSON and Paje round trips", guarded(round_trips)),
    ];

    let mut failed = 0;
    for (id, name, result) in &results {
        match result {
            Ok(detail) => println!("criterion {id} PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id} FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
