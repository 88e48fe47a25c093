//! Event engine: the global clock, the event heap and the main loop.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ScenarioConfig;
use crate::error::{Result, SimError};
use crate::processor::{Processor, StealPayload};
use crate::task::Application;
use crate::topology::{PlatformTopology, ProcId};
use crate::trace::{self, GrantRecord, RunStatistics, Trace, TraceState};

/// Simulation time in integer time units.
pub type Time = u64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EventKind {
    /// The subject finishes its running task. Stale when `generation`
    /// no longer matches the processor's.
    Idle { generation: u64 },
    /// A steal request from `thief` reaches the subject.
    StealRequest { thief: ProcId },
    /// The answer from `victim` reaches the subject.
    StealAnswer { victim: ProcId, payload: StealPayload },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub time: Time,
    pub seq: u64,
    pub subject: ProcId,
    pub kind: EventKind,
}

impl Event {
    pub fn partner(&self) -> Option<ProcId> {
        match self.kind {
            EventKind::Idle { .. } => None,
            EventKind::StealRequest { thief } => Some(thief),
            EventKind::StealAnswer { victim, .. } => Some(victim),
        }
    }
}

// Min-heap order on (time, seq).
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.cmp(&self.time).then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Pending events ordered by time, insertion order breaking ties.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
    now: Time,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Schedules an event and returns its sequence number.
    pub fn add_event(&mut self, time: Time, subject: ProcId, kind: EventKind) -> Result<u64> {
        if time < self.now {
            return Err(SimError::BackInTime {
                event: time,
                clock: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event {
            time,
            seq,
            subject,
            kind,
        });
        Ok(seq)
    }

    /// Pops the nearest event and advances the clock to its time.
    pub fn next_event(&mut self) -> Option<Event> {
        let event = self.heap.pop()?;
        self.now = event.time;
        Some(event)
    }

    pub fn now(&self) -> Time {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Event> {
        self.heap.iter()
    }
}

/// Everything a single run mutates.
pub struct SimulationState {
    pub queue: EventQueue,
    pub processors: Vec<Processor>,
    pub app: Application,
    pub topology: PlatformTopology,
    pub stats: RunStatistics,
    pub trace: Trace,
    pub grants: Vec<GrantRecord>,
    pub(crate) rng: ChaCha8Rng,
    seed: u64,
}

/// Outcome of one run.
#[derive(Clone, Debug)]
pub struct SimulationReport {
    pub seed: u64,
    pub stats: RunStatistics,
    pub trace: Trace,
    pub grants: Vec<GrantRecord>,
    pub app: Application,
}

impl SimulationReport {
    pub fn makespan(&self) -> Time {
        self.stats.makespan
    }
}

/// Builds the initial state of replication `seed` of a scenario.
pub fn initialize(config: &ScenarioConfig, seed: u64) -> Result<SimulationState> {
    config.validate()?;
    let app = config.build_application(seed)?;
    let topology = config.build_topology()?;
    SimulationState::new(app, topology, seed)
}

impl SimulationState {
    /// Places the application's first task on processor 0 and schedules
    /// an Idle event at time 0 for every other processor.
    pub fn new(mut app: Application, topology: PlatformTopology, seed: u64) -> Result<Self> {
        app.reset_execution();
        let sources = app.sources();
        let Some((&first, rest)) = sources.split_first() else {
            return Err(SimError::InvalidConfig("application has no ready task".into()));
        };
        let p = topology.p();
        let processors = (0..p).map(|id| Processor::new(id, topology.cluster_of(id))).collect();
        let mut state = SimulationState {
            queue: EventQueue::new(),
            processors,
            app,
            topology,
            stats: RunStatistics::new(p),
            trace: Trace::new(p),
            grants: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
        };
        state.processors[0].deque.extend(rest.iter().copied());
        state.start_running(0, first, 0)?;
        for id in 1..p {
            state.queue.add_event(0, id, EventKind::Idle { generation: 0 })?;
        }
        Ok(state)
    }

    pub fn clock(&self) -> Time {
        self.queue.now()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn add_event(&mut self, time: Time, subject: ProcId, kind: EventKind) -> Result<u64> {
        self.queue.add_event(time, subject, kind)
    }

    /// Dispatches one event. Returns `false` when the queue is empty.
    pub fn step(&mut self) -> Result<bool> {
        let Some(event) = self.queue.next_event() else {
            return Ok(false);
        };
        let now = event.time;
        self.stats.events_processed += 1;
        match event.kind {
            EventKind::Idle { generation } => {
                if self.processors[event.subject].generation == generation {
                    self.idle(event.subject, now)?;
                } else {
                    self.stats.stale_events += 1;
                }
            }
            EventKind::StealRequest { thief } => self.answer_steal_request(event.subject, thief, now)?,
            EventKind::StealAnswer { payload, .. } => self.steal_answer(event.subject, payload, now)?,
        }
        Ok(true)
    }

    /// Runs until every created task has completed.
    pub fn run(mut self) -> Result<SimulationReport> {
        while !self.app.is_finished() {
            if !self.step()? {
                return Err(SimError::Deadlock {
                    clock: self.clock(),
                    created: self.app.created_count(),
                    completed: self.app.completed_count(),
                });
            }
        }
        let makespan = self.clock();
        for id in 0..self.processors.len() {
            self.trace.record_state(makespan, id, TraceState::Idle)?;
        }
        self.stats.makespan = makespan;
        self.stats.tasks_created = self.app.created_count();
        self.stats.tasks_completed = self.app.completed_count();
        self.stats.fill_from_trace(&self.trace, makespan);
        let (startup, plateau) = trace::detect_phases(&self.trace, self.processors.len(), makespan);
        self.stats.t_startup_end = startup;
        self.stats.t_plateau_end = plateau;
        Ok(SimulationReport {
            seed: self.seed,
            stats: self.stats,
            trace: self.trace,
            grants: self.grants,
            app: self.app,
        })
    }
}
