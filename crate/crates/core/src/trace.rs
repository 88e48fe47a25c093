//! Counters, processor state traces, Paje and JSON exports, and the
//! startup/plateau/tail phase decomposition of a run.

use std::fmt::Write as _;

use crate::error::{Result, SimError};
use crate::sim::Time;
use crate::task::{Application, ApplicationFile, Work};
use crate::topology::ProcId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TraceState {
    Active,
    Idle,
    Stealing,
}

impl TraceState {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceState::Active => "ACTIVE",
            TraceState::Idle => "IDLE",
            TraceState::Stealing => "STEALING",
        }
    }

    fn index(self) -> usize {
        match self {
            TraceState::Active => 0,
            TraceState::Idle => 1,
            TraceState::Stealing => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub time: Time,
    pub processor: ProcId,
    pub state: TraceState,
}

/// State changes of every processor, in recording order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    events: Vec<TraceEvent>,
    last: Vec<Option<(Time, TraceState)>>,
}

impl Trace {
    pub fn new(p: usize) -> Self {
        Trace {
            events: Vec::new(),
            last: vec![None; p],
        }
    }

    pub fn p(&self) -> usize {
        self.last.len()
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Appends a state change. Repeating the current state is a no-op.
    pub fn record_state(&mut self, time: Time, processor: ProcId, state: TraceState) -> Result<()> {
        if processor >= self.last.len() {
            return Err(SimError::ProcessorOutOfRange {
                id: processor,
                p: self.last.len(),
            });
        }
        if let Some((last_time, last_state)) = self.last[processor] {
            if time < last_time {
                return Err(SimError::TraceRegression {
                    processor,
                    time,
                    last: last_time,
                });
            }
            if last_state == state {
                return Ok(());
            }
        }
        self.last[processor] = Some((time, state));
        self.events.push(TraceEvent { time, processor, state });
        Ok(())
    }

    /// Events of one processor.
    pub fn of(&self, processor: ProcId) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(move |e| e.processor == processor)
    }

    /// Time spent by `processor` in each state up to `end`, indexed as
    /// (active, idle, stealing).
    pub fn durations(&self, processor: ProcId, end: Time) -> (Time, Time, Time) {
        let mut totals = [0 as Time; 3];
        let mut current: Option<(Time, TraceState)> = None;
        for event in self.of(processor) {
            if let Some((since, state)) = current {
                totals[state.index()] += event.time - since;
            }
            current = Some((event.time, event.state));
        }
        if let Some((since, state)) = current {
            totals[state.index()] += end.saturating_sub(since);
        }
        (totals[0], totals[1], totals[2])
    }
}

/// One granted steal, from request to delivery.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GrantRecord {
    pub victim: ProcId,
    pub thief: ProcId,
    pub requested_at: Time,
    pub answered_at: Time,
    pub received_at: Time,
    pub work: Work,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunStatistics {
    pub makespan: Time,
    /// Requests sent by thieves, including any still in flight at the end.
    pub steal_requests_sent: u64,
    /// Requests answered by victims.
    pub steal_requests_total: u64,
    pub steal_success: u64,
    pub steal_fail: u64,
    /// Work of the application's own tasks executed (merge tasks excluded).
    pub total_work_executed: Work,
    pub merge_work_executed: Work,
    pub tasks_created: usize,
    pub tasks_completed: usize,
    pub busy: Vec<Time>,
    pub idle: Vec<Time>,
    pub stealing: Vec<Time>,
    pub t_startup_end: Time,
    pub t_plateau_end: Time,
    pub events_processed: u64,
    pub stale_events: u64,
}

impl RunStatistics {
    pub fn new(p: usize) -> Self {
        RunStatistics {
            busy: vec![0; p],
            idle: vec![0; p],
            stealing: vec![0; p],
            ..Default::default()
        }
    }

    pub(crate) fn record_execution(&mut self, processor: ProcId, duration: Time, merge: bool) {
        self.busy[processor] += duration;
        if merge {
            self.merge_work_executed += duration;
        } else {
            self.total_work_executed += duration;
        }
    }

    pub(crate) fn fill_from_trace(&mut self, trace: &Trace, makespan: Time) {
        for proc in 0..trace.p() {
            let (_, idle, stealing) = trace.durations(proc, makespan);
            self.idle[proc] = idle;
            self.stealing[proc] = stealing;
        }
    }

    pub fn startup_duration(&self) -> Time {
        self.t_startup_end
    }
}

/// Returns `(t_startup_end, t_plateau_end)`.
///
/// The startup phase ends the first time all `p` processors are ACTIVE at
/// once. The plateau ends when the processors stop being all ACTIVE for the
/// last time. Both fall back to `makespan` when full activity is never
/// reached. Changes sharing a timestamp are applied together.
pub fn detect_phases(trace: &Trace, p: usize, makespan: Time) -> (Time, Time) {
    let mut events: Vec<&TraceEvent> = trace.events().iter().collect();
    events.sort_by_key(|e| e.time);

    let mut state: Vec<Option<TraceState>> = vec![None; p];
    let mut active = 0usize;
    let mut startup = None;
    let mut plateau_end = None;
    let mut i = 0;
    while i < events.len() {
        let time = events[i].time;
        let was_full = active == p;
        while i < events.len() && events[i].time == time {
            let e = events[i];
            if state[e.processor] == Some(TraceState::Active) {
                active -= 1;
            }
            if e.state == TraceState::Active {
                active += 1;
            }
            state[e.processor] = Some(e.state);
            i += 1;
        }
        let full = active == p;
        if full && startup.is_none() {
            startup = Some(time);
        }
        if was_full && !full {
            plateau_end = Some(time);
        }
    }
    match startup {
        None => (makespan, makespan),
        Some(start) => (start, plateau_end.unwrap_or(makespan).max(start)),
    }
}

const PAJE_HEADER: &str = "\
%EventDef PajeDefineContainerType 0
% Alias string
% Type string
% Name string
%EndEventDef
%EventDef PajeDefineStateType 1
% Alias string
% Type string
% Name string
%EndEventDef
%EventDef PajeDefineEntityValue 2
% Alias string
% Type string
% Name string
% Color color
%EndEventDef
%EventDef PajeCreateContainer 3
% Time date
% Alias string
% Type string
% Container string
% Name string
%EndEventDef
%EventDef PajeSetState 4
% Time date
% Type string
% Container string
% Value string
%EndEventDef
0 CT_Platform 0 \"Platform\"
0 CT_Processor CT_Platform \"Processor\"
1 ST_State CT_Processor \"State\"
2 ACTIVE ST_State \"ACTIVE\" \"0.0 0.7 0.0\"
2 IDLE ST_State \"IDLE\" \"0.7 0.7 0.7\"
2 STEALING ST_State \"STEALING\" \"0.9 0.2 0.1\"
3 0 Platform CT_Platform 0 \"Platform\"
";

/// Renders the trace in the Paje text format.
pub fn export_paje(trace: &Trace) -> String {
    let mut out = String::with_capacity(PAJE_HEADER.len() + 32 * (trace.p() + trace.len()));
    out.push_str(PAJE_HEADER);
    for proc in 0..trace.p() {
        let _ = writeln!(out, "3 0 P{proc} CT_Processor Platform \"P{proc}\"");
    }
    for event in trace.events() {
        let _ = writeln!(
            out,
            "4 {} ST_State P{} {}",
            event.time,
            event.processor,
            event.state.as_str()
        );
    }
    out
}

/// Dumps the executed application with start/end times and processors.
pub fn export_json_dag(app: &Application) -> String {
    serde_json::to_string_pretty(&ApplicationFile::from_application(app)).expect("application serializes")
}

/// Checks every processor's trace against the work stealing state cycle:
/// consecutive states differ, ACTIVE and STEALING alternate freely, and
/// IDLE only appears as the final state.
pub fn validate_state_cycle(trace: &Trace) -> std::result::Result<(), String> {
    for proc in 0..trace.p() {
        let mut prev: Option<&TraceEvent> = None;
        for event in trace.of(proc) {
            if let Some(prev) = prev {
                if event.time < prev.time {
                    return Err(format!("P{proc}: time goes back at {}", event.time));
                }
                if event.state == prev.state {
                    return Err(format!("P{proc}: repeated {} at {}", event.state.as_str(), event.time));
                }
                if prev.state == TraceState::Idle {
                    return Err(format!(
                        "P{proc}: {} after IDLE at {}",
                        event.state.as_str(),
                        event.time
                    ));
                }
            }
            prev = Some(event);
        }
        if let Some(last) = prev {
            if last.state != TraceState::Idle {
                return Err(format!("P{proc}: trace does not end IDLE"));
            }
        }
    }
    Ok(())
}
