//! Analyses over simulated makespans: overhead ratio against the
//! theoretical bound, least-squares fit of the overhead constant, limit
//! latency for an acceptable makespan, and single vs. multiple work
//! transfer comparison.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{map_replications, RunRecord};
use crate::config::ScenarioConfig;
use crate::error::{Result, SimError};
use crate::sim::Time;
use crate::task::Work;

/// Default constant of the theoretical bound, `4 * GAMMA ~ 16`.
pub const GAMMA: f64 = 4.0;
/// Fitted overhead constant used by the acceptable-latency equation.
pub const FITTED_CONSTANT: f64 = 3.8;
/// Makespan over `W/p` at or below which a run is acceptable.
pub const ACCEPTABLE_RATIO: f64 = 1.1;

/// Which logarithm the overhead term uses: `log2(W/λ)` (bound, ratio and
/// fit) or `log2(W/(2λ))` (acceptable-latency equation).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LogForm {
    #[default]
    WOverLatency,
    WOverTwoLatency,
}

/// `λ · log2(W/λ)` or `λ · log2(W/(2λ))`.
pub fn overhead_term(work: Work, latency: f64, form: LogForm) -> f64 {
    let denom = match form {
        LogForm::WOverLatency => latency,
        LogForm::WOverTwoLatency => 2.0 * latency,
    };
    latency * (work as f64 / denom).log2()
}

/// Theoretical makespan bound `W/p + 4γ λ log2(W/λ)`.
pub fn makespan_bound(work: Work, p: usize, latency: Time, gamma: f64) -> f64 {
    work as f64 / p as f64 + 4.0 * gamma * overhead_term(work, latency as f64, LogForm::WOverLatency)
}

/// `4γ λ log2(W/λ) / (makespan - W/p)`; `None` when the simulated overhead
/// is not positive or the latency is zero.
pub fn overhead_ratio(makespan: f64, work: Work, p: usize, latency: Time, gamma: f64, form: LogForm) -> Option<f64> {
    let overhead = makespan - work as f64 / p as f64;
    if overhead <= 0.0 || latency == 0 {
        return None;
    }
    Some(4.0 * gamma * overhead_term(work, latency as f64, form) / overhead)
}

/// One observation for the overhead fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitRow {
    pub work: Work,
    pub p: usize,
    pub latency: Time,
    pub makespan: f64,
}

impl From<&RunRecord> for FitRow {
    fn from(r: &RunRecord) -> Self {
        FitRow {
            work: r.work,
            p: r.p,
            latency: r.latency,
            makespan: r.makespan as f64,
        }
    }
}

/// Least-squares `c` of `makespan - W/p = c · λ log2(W/λ)` through the origin.
pub fn fit_constant(rows: &[FitRow], form: LogForm) -> Result<f64> {
    let (mut xy, mut xx) = (0.0, 0.0);
    for row in rows.iter().filter(|r| r.latency > 0) {
        let x = overhead_term(row.work, row.latency as f64, form);
        let y = row.makespan - row.work as f64 / row.p as f64;
        xy += x * y;
        xx += x * x;
    }
    if xx == 0.0 {
        return Err(SimError::Analysis("fit needs at least one row with positive latency".into()));
    }
    Ok(xy / xx)
}

/// Whether `makespan <= 1.1 · W/p`.
pub fn acceptable(makespan: f64, work: Work, p: usize) -> bool {
    // 10·C·p <= 11·W, exact for integral makespans
    10.0 * makespan * p as f64 <= 11.0 * work as f64
}

/// Smallest latency solving `c·λ·log2(W/(2λ)) = 0.1·W/p`, to 1e-3.
pub fn limit_latency_theoretical(work: Work, p: usize, c: f64) -> Result<f64> {
    let target = (ACCEPTABLE_RATIO - 1.0) * work as f64 / p as f64;
    let f = |lambda: f64| c * overhead_term(work, lambda, LogForm::WOverTwoLatency) - target;
    // λ·log2(W/(2λ)) peaks at W/(2e); the root of interest lies below.
    let mut hi = work as f64 / (2.0 * std::f64::consts::E);
    let mut lo = 0.0;
    if f(hi).is_nan() || f(hi) < 0.0 || target <= 0.0 {
        return Err(SimError::Analysis(format!(
            "no limit latency in (0, W/2) for W={work}, p={p}, c={c}"
        )));
    }
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Result of the experimental limit latency search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LimitLatency {
    pub latency: Time,
    /// The search hit its ceiling without finding an unacceptable latency.
    pub degenerate: bool,
}

/// Largest integer latency whose median makespan over the scenario's
/// replications is acceptable. `base` supplies the model, p, policy and
/// replication count; its latency is overwritten.
pub fn limit_latency_experimental(base: &ScenarioConfig, workers: Option<usize>) -> Result<LimitLatency> {
    let work = base
        .work
        .ok_or_else(|| SimError::Analysis("limit latency needs a divisible workload".into()))?;
    let p = base.topology.p;
    let ceiling = work.max(1);
    let is_ok = |latency: Time| -> Result<bool> {
        let mut config = base.clone();
        config.topology.latency = latency;
        let makespans = map_replications(&config, workers, |_, r| r.makespan() as f64)?;
        Ok(acceptable(median(&makespans), work, p))
    };

    if !is_ok(1)? {
        return Ok(LimitLatency {
            latency: 0,
            degenerate: false,
        });
    }
    let mut lo = 1;
    let mut hi = None;
    while lo < ceiling {
        let next = (lo * 2).min(ceiling);
        if is_ok(next)? {
            lo = next;
        } else {
            hi = Some(next);
            break;
        }
    }
    let Some(mut hi) = hi else {
        return Ok(LimitLatency {
            latency: ceiling,
            degenerate: true,
        });
    };
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if is_ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(LimitLatency {
        latency: lo,
        degenerate: false,
    })
}

/// Paired single/multiple work transfer runs sharing one seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferPair {
    pub seed: u64,
    pub p: usize,
    pub startup_swt: Time,
    pub startup_mwt: Time,
    /// `startup_swt / startup_mwt`; `None` when either startup is zero.
    pub startup_ratio: Option<f64>,
    pub makespan_swt: Time,
    pub makespan_mwt: Time,
}

impl TransferPair {
    pub fn new(seed: u64, p: usize, swt: (Time, Time), mwt: (Time, Time)) -> Self {
        let (startup_swt, makespan_swt) = swt;
        let (startup_mwt, makespan_mwt) = mwt;
        let startup_ratio = (startup_swt > 0 && startup_mwt > 0).then(|| startup_swt as f64 / startup_mwt as f64);
        TransferPair {
            seed,
            p,
            startup_swt,
            startup_mwt,
            startup_ratio,
            makespan_swt,
            makespan_mwt,
        }
    }

    /// `|makespan_mwt - makespan_swt| / makespan_swt`.
    pub fn makespan_rel_diff(&self) -> f64 {
        (self.makespan_mwt as f64 - self.makespan_swt as f64).abs() / self.makespan_swt as f64
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TransferComparison {
    pub pairs: Vec<TransferPair>,
}

impl TransferComparison {
    pub fn valid_ratios(&self) -> Vec<f64> {
        self.pairs.iter().filter_map(|p| p.startup_ratio).collect()
    }

    /// Fraction of valid pairs where multiple transfers shorten startup.
    pub fn fraction_faster_startup(&self) -> f64 {
        let ratios = self.valid_ratios();
        if ratios.is_empty() {
            return 0.0;
        }
        ratios.iter().filter(|&&r| r > 1.0).count() as f64 / ratios.len() as f64
    }

    pub fn median_makespan_rel_diff(&self) -> f64 {
        let diffs: Vec<f64> = self.pairs.iter().map(|p| p.makespan_rel_diff()).collect();
        median(&diffs)
    }
}

/// Runs every replication of `config` once with single and once with
/// multiple work transfer and pairs them by seed.
pub fn compare_mwt_swt(config: &ScenarioConfig, workers: Option<usize>) -> Result<TransferComparison> {
    let extract = |_: usize, r: crate::sim::SimulationReport| (r.seed, r.stats.t_startup_end, r.makespan());
    let swt = map_replications(&config.clone().with_simultaneous(false), workers, extract)?;
    let mwt = map_replications(&config.clone().with_simultaneous(true), workers, extract)?;
    let pairs = swt
        .into_iter()
        .zip(mwt)
        .map(|((seed, s_start, s_end), (_, m_start, m_end))| {
            TransferPair::new(seed, config.topology.p, (s_start, s_end), (m_start, m_end))
        })
        .collect();
    Ok(TransferComparison { pairs })
}

/// Box plot summary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(Quartiles {
        min: sorted[0],
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}

/// Median of `values`; NaN when empty.
pub fn median(values: &[f64]) -> f64 {
    quartiles(values).map_or(f64::NAN, |q| q.median)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Aggregate used to reduce replications.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Aggregate {
    #[default]
    Median,
    Mean,
}

impl Aggregate {
    pub fn apply(self, values: &[f64]) -> f64 {
        match self {
            Aggregate::Median => median(values),
            Aggregate::Mean => mean(values),
        }
    }
}

// Table-driven analyses backing the `analyze` subcommands.

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OverheadRow {
    pub work: Work,
    pub p: usize,
    pub latency: Time,
    pub n: usize,
    pub undefined: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Overhead ratio quartiles per (W, p, λ) cell.
pub fn overhead_table(records: &[RunRecord], gamma: f64, form: LogForm) -> Vec<OverheadRow> {
    let mut cells: BTreeMap<(Work, usize, Time), (Vec<f64>, usize)> = BTreeMap::new();
    for r in records {
        let entry = cells.entry((r.work, r.p, r.latency)).or_default();
        match overhead_ratio(r.makespan as f64, r.work, r.p, r.latency, gamma, form) {
            Some(ratio) => entry.0.push(ratio),
            None => entry.1 += 1,
        }
    }
    cells
        .into_iter()
        .filter_map(|((work, p, latency), (ratios, undefined))| {
            let q = quartiles(&ratios)?;
            Some(OverheadRow {
                work,
                p,
                latency,
                n: ratios.len(),
                undefined,
                min: q.min,
                q1: q.q1,
                median: q.median,
                q3: q.q3,
                max: q.max,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitRow {
    pub work: Work,
    pub p: usize,
    pub w_over_p: f64,
    pub latency_theoretical: Option<f64>,
    /// Largest tested latency whose aggregated makespan is acceptable.
    pub latency_experimental: Option<Time>,
    pub w_over_p_per_latency: Option<f64>,
}

/// Theoretical vs. tested limit latency per (W, p).
pub fn limit_latency_table(records: &[RunRecord], c: f64, aggregate: Aggregate) -> Vec<LimitRow> {
    let mut cells: BTreeMap<(Work, usize), BTreeMap<Time, Vec<f64>>> = BTreeMap::new();
    for r in records {
        cells
            .entry((r.work, r.p))
            .or_default()
            .entry(r.latency)
            .or_default()
            .push(r.makespan as f64);
    }
    cells
        .into_iter()
        .map(|((work, p), by_latency)| {
            let experimental = by_latency
                .iter()
                .filter(|(_, m)| acceptable(aggregate.apply(m), work, p))
                .map(|(l, _)| *l)
                .max();
            let w_over_p = work as f64 / p as f64;
            LimitRow {
                work,
                p,
                w_over_p,
                latency_theoretical: limit_latency_theoretical(work, p, c).ok(),
                latency_experimental: experimental,
                w_over_p_per_latency: experimental.filter(|&l| l > 0).map(|l| w_over_p / l as f64),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseRow {
    pub work: Work,
    pub p: usize,
    pub latency: Time,
    pub simultaneous: bool,
    pub n: usize,
    pub startup_min: f64,
    pub startup_q1: f64,
    pub startup_median: f64,
    pub startup_q3: f64,
    pub startup_max: f64,
    pub plateau_end_median: f64,
    pub makespan_median: f64,
}

pub fn phase_table(records: &[RunRecord]) -> Vec<PhaseRow> {
    let mut cells: BTreeMap<(Work, usize, Time, bool), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        cells.entry((r.work, r.p, r.latency, r.simultaneous)).or_default().push(r);
    }
    cells
        .into_iter()
        .map(|((work, p, latency, simultaneous), rows)| {
            let column = |f: fn(&RunRecord) -> Time| rows.iter().map(|r| f(r) as f64).collect::<Vec<_>>();
            let startup = quartiles(&column(|r| r.t_startup_end)).expect("non-empty cell");
            PhaseRow {
                work,
                p,
                latency,
                simultaneous,
                n: rows.len(),
                startup_min: startup.min,
                startup_q1: startup.q1,
                startup_median: startup.median,
                startup_q3: startup.q3,
                startup_max: startup.max,
                plateau_end_median: median(&column(|r| r.t_plateau_end)),
                makespan_median: median(&column(|r| r.makespan)),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransferRow {
    pub work: Work,
    pub p: usize,
    pub latency: Time,
    pub pairs: usize,
    pub excluded: usize,
    pub ratio_min: f64,
    pub ratio_q1: f64,
    pub ratio_median: f64,
    pub ratio_q3: f64,
    pub ratio_max: f64,
    pub fraction_faster_startup: f64,
    pub median_makespan_rel_diff: f64,
}

/// Pairs single and multiple transfer rows by (W, p, λ, seed).
pub fn transfer_table(records: &[RunRecord]) -> Vec<TransferRow> {
    type Key = (Work, usize, Time);
    let mut sides: BTreeMap<(Key, u64), [Option<&RunRecord>; 2]> = BTreeMap::new();
    for r in records {
        sides.entry(((r.work, r.p, r.latency), r.seed)).or_default()[r.simultaneous as usize] = Some(r);
    }
    let mut cells: BTreeMap<Key, TransferComparison> = BTreeMap::new();
    for ((key, seed), side) in sides {
        if let [Some(swt), Some(mwt)] = side {
            cells.entry(key).or_default().pairs.push(TransferPair::new(
                seed,
                key.1,
                (swt.t_startup_end, swt.makespan),
                (mwt.t_startup_end, mwt.makespan),
            ));
        }
    }
    cells
        .into_iter()
        .map(|((work, p, latency), cmp)| {
            let ratios = cmp.valid_ratios();
            let q = quartiles(&ratios).unwrap_or(Quartiles {
                min: f64::NAN,
                q1: f64::NAN,
                median: f64::NAN,
                q3: f64::NAN,
                max: f64::NAN,
            });
            TransferRow {
                work,
                p,
                latency,
                pairs: cmp.pairs.len(),
                excluded: cmp.pairs.len() - ratios.len(),
                ratio_min: q.min,
                ratio_q1: q.q1,
                ratio_median: q.median,
                ratio_q3: q.q3,
                ratio_max: q.max,
                fraction_faster_startup: cmp.fraction_faster_startup(),
                median_makespan_rel_diff: cmp.median_makespan_rel_diff(),
            }
        })
        .collect()
}
