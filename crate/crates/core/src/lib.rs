//! Discrete-event simulation of the Work Stealing scheduling algorithm on
//! platforms where communication latency is explicit.
//!
//! The crate is split into engines that mirror the moving parts of a run:
//!
//! - [`sim`]: the global clock, the event heap and the main loop.
//! - [`task`]: application models (divisible load, DAG of tasks, adaptive
//!   tasks), DAG generators and the JSON application format.
//! - [`topology`]: processor placement, latencies, victim selection and
//!   steal policies.
//! - [`processor`]: the per-processor work stealing state machine.
//! - [`trace`]: counters, Gantt traces (Paje export) and phase detection.
//! - [`runner`]: scenario files, replications, sweeps and the analyses
//!   built on top of them (overhead ratio, fitted constant, limit latency,
//!   single vs. multiple work transfer).

pub mod config;
pub mod error;
pub mod processor;
pub mod runner;
pub mod sim;
pub mod task;
pub mod topology;
pub mod trace;

pub use config::ScenarioConfig;
pub use error::{Result, SimError};
pub use sim::{initialize, Event, EventKind, EventQueue, SimulationReport, SimulationState, Time};
pub use task::{Application, ModelKind, Task, TaskIdx};
pub use topology::{Layout, PlatformTopology, StealPolicy, ThresholdMode, VictimStrategy};
pub use trace::{RunStatistics, TraceEvent, TraceState};
