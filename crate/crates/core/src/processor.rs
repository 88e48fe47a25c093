//! Work stealing state machine of a processor.
//!
//! An active processor that finishes its task pops the next one from its
//! deque, or becomes a thief and sends a steal request. A thief becomes
//! active on a granted answer and steals again on a failed one.

use std::collections::VecDeque;

use crate::error::{Result, SimError};
use crate::sim::{EventKind, SimulationState, Time};
use crate::task::{steal_from_deque, TaskIdx};
use crate::topology::ProcId;
use crate::trace::{GrantRecord, TraceState};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProcState {
    Active,
    Thief,
    /// No running task and no outstanding request: the run is over, or
    /// there is nobody to steal from.
    Parked,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Running {
    pub task: TaskIdx,
    pub since: Time,
}

#[derive(Clone, Debug)]
pub struct Processor {
    pub id: ProcId,
    pub cluster: usize,
    pub state: ProcState,
    pub running: Option<Running>,
    pub deque: VecDeque<TaskIdx>,
    /// End of the outgoing grant transfer under single work transfer.
    pub busy_until: Time,
    /// Bumped whenever the pending Idle event is replaced.
    pub generation: u64,
    /// Victim and send time of the outstanding steal request.
    pub pending_request: Option<(ProcId, Time)>,
}

impl Processor {
    pub fn new(id: ProcId, cluster: usize) -> Self {
        Processor {
            id,
            cluster,
            state: ProcState::Parked,
            running: None,
            deque: VecDeque::new(),
            busy_until: 0,
            generation: 0,
            pending_request: None,
        }
    }

    pub fn running_task(&self) -> Option<TaskIdx> {
        self.running.map(|r| r.task)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StealOutcome {
    Granted(TaskIdx),
    Failed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StealPayload {
    pub outcome: StealOutcome,
    pub from: ProcId,
}

impl SimulationState {
    /// Message delivery time between two processors. Zero-latency links
    /// still take one time unit so that failed steals cannot spin at a
    /// fixed instant.
    fn transfer_time(&self, from: ProcId, to: ProcId) -> Time {
        self.topology.distance_unchecked(from, to).max(1)
    }

    pub(crate) fn start_running(&mut self, id: ProcId, task: TaskIdx, now: Time) -> Result<()> {
        self.app.start_task(task, id, now);
        let proc = &mut self.processors[id];
        proc.running = Some(Running { task, since: now });
        proc.state = ProcState::Active;
        proc.generation += 1;
        let generation = proc.generation;
        let end = now + self.app.get_work(task);
        self.queue.add_event(end, id, EventKind::Idle { generation })?;
        self.trace.record_state(now, id, TraceState::Active)
    }

    /// The processor finished its running task (or starts the run without one).
    pub fn idle(&mut self, id: ProcId, now: Time) -> Result<()> {
        if let Some(running) = self.processors[id].running.take() {
            let ready = self.app.end_execute_task(running.task, now)?;
            let duration = now - running.since;
            self.stats.record_execution(id, duration, self.app.task(running.task).merge_of.is_some());
            self.processors[id].deque.extend(ready);
        }
        if self.app.is_finished() {
            self.processors[id].state = ProcState::Parked;
            return self.trace.record_state(now, id, TraceState::Idle);
        }
        if let Some(next) = self.processors[id].deque.pop_back() {
            return self.start_running(id, next, now);
        }
        if self.topology.p() < 2 {
            self.processors[id].state = ProcState::Parked;
            return self.trace.record_state(now, id, TraceState::Idle);
        }
        self.start_stealing(id, now)
    }

    /// Picks a victim and sends it a steal request.
    pub fn start_stealing(&mut self, id: ProcId, now: Time) -> Result<()> {
        let proc = &self.processors[id];
        if proc.pending_request.is_some() {
            return Err(SimError::Model(format!("processor {id} already has a steal request in flight")));
        }
        if proc.running.is_some() || !proc.deque.is_empty() {
            return Err(SimError::Model(format!("processor {id} steals while holding work")));
        }
        let victim = self.topology.select_victim(id, &mut self.rng)?;
        let arrival = now + self.transfer_time(id, victim);
        let proc = &mut self.processors[id];
        proc.state = ProcState::Thief;
        proc.pending_request = Some((victim, now));
        self.stats.steal_requests_sent += 1;
        self.trace.record_state(now, id, TraceState::Stealing)?;
        self.queue.add_event(arrival, victim, EventKind::StealRequest { thief: id })?;
        Ok(())
    }

    /// A steal request from `thief` reaches `victim`.
    pub fn answer_steal_request(&mut self, victim: ProcId, thief: ProcId, now: Time) -> Result<()> {
        self.stats.steal_requests_total += 1;
        let single = !self.topology.is_simultaneous();
        let busy = single && now < self.processors[victim].busy_until;
        let outcome = if busy {
            StealOutcome::Failed
        } else {
            match self.get_part_of_work_if_exist(victim, now)? {
                Some(task) => StealOutcome::Granted(task),
                None => StealOutcome::Failed,
            }
        };

        let delay = self.transfer_time(victim, thief);
        let arrival = now + delay;
        match outcome {
            StealOutcome::Granted(task) => {
                self.stats.steal_success += 1;
                if single {
                    self.processors[victim].busy_until = arrival;
                }
                let requested_at = self.processors[thief].pending_request.map_or(now, |(_, t)| t);
                self.grants.push(GrantRecord {
                    victim,
                    thief,
                    requested_at,
                    answered_at: now,
                    received_at: arrival,
                    work: self.app.get_work(task),
                });
            }
            StealOutcome::Failed => self.stats.steal_fail += 1,
        }
        let payload = StealPayload { outcome, from: victim };
        self.queue.add_event(arrival, thief, EventKind::StealAnswer { victim, payload })?;
        Ok(())
    }

    /// Takes a task for a thief: the highest deque entry if any, otherwise
    /// half of the running task when it is splittable and above threshold.
    pub fn get_part_of_work_if_exist(&mut self, victim: ProcId, now: Time) -> Result<Option<TaskIdx>> {
        if let Some(task) = steal_from_deque(&mut self.processors[victim].deque, &self.app) {
            return Ok(Some(task));
        }
        let Some(running) = self.processors[victim].running else {
            return Ok(None);
        };
        let remaining = self.app.remaining(running.task, now);
        if remaining <= self.topology.steal_threshold() {
            return Ok(None);
        }
        let Some(stolen) = self.app.split(running.task, now) else {
            return Ok(None);
        };
        // The running task shrank: replace its Idle event.
        let proc = &mut self.processors[victim];
        proc.generation += 1;
        let generation = proc.generation;
        let end = now + self.app.remaining(running.task, now);
        self.queue.add_event(end, victim, EventKind::Idle { generation })?;
        Ok(Some(stolen))
    }

    /// The answer to `thief`'s request arrives.
    pub fn steal_answer(&mut self, thief: ProcId, payload: StealPayload, now: Time) -> Result<()> {
        let proc = &mut self.processors[thief];
        if proc.state != ProcState::Thief || proc.pending_request.take().is_none() {
            return Err(SimError::Model(format!("processor {thief} got an answer it did not ask for")));
        }
        match payload.outcome {
            StealOutcome::Granted(task) => self.start_running(thief, task, now),
            StealOutcome::Failed => self.start_stealing(thief, now),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::{Application, MergeCost, ModelKind};
    use crate::topology::{PlatformTopology, StealPolicy, ThresholdMode};

    fn state(p: usize, latency: Time, work: u64, simultaneous: bool) -> SimulationState {
        let topo = PlatformTopology::single_cluster(p, latency).with_policy(StealPolicy {
            simultaneous,
            threshold: ThresholdMode::Static { value: 0 },
        });
        SimulationState::new(Application::divisible(work), topo, 1).unwrap()
    }

    fn answers(state: &SimulationState) -> Vec<(ProcId, Time, StealOutcome)> {
        let mut out: Vec<_> = state
            .queue
            .iter()
            .filter_map(|e| match &e.kind {
                EventKind::StealAnswer { payload, .. } => Some((e.subject, e.time, payload.outcome)),
                _ => None,
            })
            .collect();
        out.sort_by_key(|a| a.0);
        out
    }

    /// Puts processors `thieves` into the thief state targeting 0.
    fn arm(state: &mut SimulationState, thieves: &[ProcId]) {
        for &t in thieves {
            state.processors[t].state = ProcState::Thief;
            state.processors[t].pending_request = Some((0, 0));
        }
    }

    #[test]
    fn idle_pops_from_deque() {
        let mut s = state(2, 10, 100, false);
        let extra = s.app.init_task(5, &[]);
        s.processors[1].deque.push_back(extra);
        s.idle(1, 3).unwrap();
        assert_eq!(s.processors[1].state, ProcState::Active);
        assert!(s
            .queue
            .iter()
            .any(|e| e.subject == 1 && e.time == 8 && matches!(e.kind, EventKind::Idle { .. })));
    }

    #[test]
    fn idle_with_empty_deque_steals() {
        let mut s = state(2, 10, 100, false);
        s.queue.next_event().unwrap(); // P1 idle@0
        s.idle(1, 0).unwrap();
        assert_eq!(s.processors[1].state, ProcState::Thief);
        assert_eq!(s.stats.steal_requests_sent, 1);
        assert!(s
            .queue
            .iter()
            .any(|e| e.subject == 0 && e.time == 10 && e.kind == EventKind::StealRequest { thief: 1 }));
    }

    #[test]
    fn request_latency_and_counter() {
        let mut s = state(2, 100, 1000, false);
        s.start_stealing(1, 0).unwrap();
        assert!(s.queue.iter().any(|e| e.time == 100 && e.subject == 0));
        s.processors[1].pending_request = None;
        s.start_stealing(1, 7).unwrap();
        assert!(s.queue.iter().any(|e| e.time == 107 && e.subject == 0));
        assert_eq!(s.stats.steal_requests_sent, 2);
    }

    #[test]
    fn second_outstanding_request_is_rejected() {
        let mut s = state(3, 5, 100, false);
        s.start_stealing(1, 0).unwrap();
        assert!(s.start_stealing(1, 0).is_err());
    }

    #[test]
    fn swt_same_instant_requests() {
        let mut s = state(3, 100, 190, false);
        arm(&mut s, &[1, 2]);
        // victim has 90 left at t=100
        s.answer_steal_request(0, 1, 100).unwrap();
        s.answer_steal_request(0, 2, 100).unwrap();
        let a = answers(&s);
        assert_eq!(a.len(), 2);
        let StealOutcome::Granted(task) = a[0].2 else { panic!("P1 not granted") };
        assert_eq!(s.app.get_work(task), 45);
        assert_eq!(a[1].2, StealOutcome::Failed);
        assert_eq!(a[0].1, 200);
        assert_eq!(s.stats.steal_success + s.stats.steal_fail, s.stats.steal_requests_total);
    }

    #[test]
    fn mwt_same_instant_requests() {
        let mut s = state(3, 100, 190, true);
        arm(&mut s, &[1, 2]);
        s.answer_steal_request(0, 1, 100).unwrap();
        s.answer_steal_request(0, 2, 100).unwrap();
        let a = answers(&s);
        let works: Vec<_> = a
            .iter()
            .map(|(_, _, o)| match o {
                StealOutcome::Granted(t) => s.app.get_work(*t),
                StealOutcome::Failed => 0,
            })
            .collect();
        assert_eq!(works, vec![45, 22]);
        assert_eq!(s.app.remaining(TaskIdx(0), 100), 23);
    }

    #[test]
    fn empty_victim_fails() {
        let mut s = state(3, 10, 100, false);
        arm(&mut s, &[2]);
        s.answer_steal_request(1, 2, 10).unwrap();
        assert_eq!(answers(&s)[0].2, StealOutcome::Failed);
    }

    #[test]
    fn split_moves_idle_event() {
        let mut s = state(2, 10, 100, false);
        let stolen = s.get_part_of_work_if_exist(0, 10).unwrap().unwrap();
        assert_eq!(s.app.get_work(stolen), 45);
        let gen = s.processors[0].generation;
        let idles: Vec<_> = s
            .queue
            .iter()
            .filter(|e| e.subject == 0)
            .map(|e| (e.time, e.kind.clone()))
            .collect();
        assert!(idles.contains(&(55, EventKind::Idle { generation: gen })));
        // the t=100 event is still queued but stale
        assert!(idles.iter().any(|(t, k)| *t == 100 && *k != EventKind::Idle { generation: gen }));
    }

    #[test]
    fn threshold_blocks_small_remainder() {
        let topo = PlatformTopology::single_cluster(2, 10).with_policy(StealPolicy {
            simultaneous: false,
            threshold: ThresholdMode::Static { value: 50 },
        });
        let mut s = SimulationState::new(Application::divisible(100), topo, 0).unwrap();
        assert!(s.get_part_of_work_if_exist(0, 60).unwrap().is_none());
        // r = 50 is still blocked, r = 51 is not
        assert!(s.get_part_of_work_if_exist(0, 50).unwrap().is_none());
        assert!(s.get_part_of_work_if_exist(0, 49).unwrap().is_some());
    }

    #[test]
    fn dag_victim_gives_highest_deque_entry() {
        let mut app = Application::new(ModelKind::Dag);
        let root = app.init_task(10, &[]);
        let low = app.init_task(1, &[root]);
        let high = app.init_task(3, &[root]);
        app.finalize_structure().unwrap();
        let topo = PlatformTopology::single_cluster(2, 10);
        let mut s = SimulationState::new(app, topo, 0).unwrap();
        s.processors[0].deque.extend([high, low]);
        let h = s.app.task(high).height;
        assert!(h >= s.app.task(low).height);
        assert_eq!(s.get_part_of_work_if_exist(0, 1).unwrap(), Some(high));
        assert_eq!(s.processors[0].running_task(), Some(root));
    }

    #[test]
    fn granted_answer_starts_task() {
        let mut s = state(2, 10, 100, false);
        arm(&mut s, &[1]);
        let stolen = s.app.split(TaskIdx(0), 10).unwrap();
        let payload = StealPayload {
            outcome: StealOutcome::Granted(stolen),
            from: 0,
        };
        s.steal_answer(1, payload, 20).unwrap();
        assert_eq!(s.processors[1].state, ProcState::Active);
        assert!(s.queue.iter().any(|e| e.subject == 1 && e.time == 65));
    }

    #[test]
    fn failed_answer_steals_again() {
        let mut s = state(4, 100, 1000, false);
        arm(&mut s, &[2]);
        let payload = StealPayload {
            outcome: StealOutcome::Failed,
            from: 0,
        };
        s.steal_answer(2, payload, 200).unwrap();
        assert_eq!(s.stats.steal_requests_sent, 1);
        assert_eq!(s.processors[2].pending_request.map(|(_, t)| t), Some(200));
        assert!(s
            .queue
            .iter()
            .any(|e| e.time == 300 && e.kind == EventKind::StealRequest { thief: 2 }));
    }

    #[test]
    fn adaptive_grant_leaves_merge_pending() {
        let topo = PlatformTopology::single_cluster(2, 1);
        let mut s = SimulationState::new(Application::adaptive(8, MergeCost::default()), topo, 0).unwrap();
        arm(&mut s, &[1]);
        s.answer_steal_request(0, 1, 0).unwrap();
        let merge = s.app.splits()[0].merge.unwrap();
        let StealOutcome::Granted(stolen) = answers(&s)[0].2 else { panic!() };
        s.queue.next_event(); // skip to keep the clock consistent
        let payload = StealPayload {
            outcome: StealOutcome::Granted(stolen),
            from: 0,
        };
        s.steal_answer(1, payload, 1).unwrap();
        assert_eq!(s.processors[1].state, ProcState::Active);
        assert_eq!(s.app.task(merge).unfinished_parents, 2);
    }

    #[test]
    fn unsolicited_answer_is_an_error() {
        let mut s = state(2, 10, 100, false);
        let payload = StealPayload {
            outcome: StealOutcome::Failed,
            from: 0,
        };
        assert!(s.steal_answer(1, payload, 0).is_err());
    }
}
