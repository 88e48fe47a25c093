//! Application models and the task operating interface.
//!
//! Every application starts as one task placed on processor 0. Divisible
//! and adaptive tasks are split on steal; DAG tasks are never split and are
//! stolen whole from the victim's deque instead.

mod dag;
mod io;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::sim::Time;
use crate::topology::ProcId;

pub use dag::{generate_dag, DagKind, DagSpec};
pub use io::{load_application, ApplicationFile, TaskRecord};

/// Amount of work, in time units of one processor.
pub type Work = u64;

/// Index of a task inside an [`Application`]'s task store.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaskIdx(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    #[serde(alias = "divisible-load")]
    Divisible,
    #[serde(alias = "dag-tasks")]
    Dag,
    #[serde(alias = "adaptive-tasks")]
    Adaptive,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Divisible => "divisible",
            ModelKind::Dag => "dag",
            ModelKind::Adaptive => "adaptive",
        }
    }
}

/// Duration of the merge task created by an adaptive split, as a function
/// of the two halves it joins.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MergeCost {
    Constant { value: Work },
    /// `ceil(coefficient * (w1 + w2))`
    Linear { coefficient: f64 },
}

impl Default for MergeCost {
    fn default() -> Self {
        MergeCost::Constant { value: 1 }
    }
}

impl MergeCost {
    pub fn cost(&self, w1: Work, w2: Work) -> Work {
        match *self {
            MergeCost::Constant { value } => value,
            MergeCost::Linear { coefficient } => (coefficient * (w1 + w2) as f64).ceil().max(0.0) as Work,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Task {
    /// External identifier, stable across export and load.
    pub id: u64,
    pub work: Work,
    pub children: Vec<TaskIdx>,
    pub unfinished_parents: u32,
    pub start_time: Option<Time>,
    pub end_time: Option<Time>,
    pub executed_by: Option<ProcId>,
    /// Distance-to-source label; the source carries the critical path
    /// length. Tasks created by splits have height 0.
    pub height: u64,
    /// Sizes of the two parts joined by an adaptive merge task.
    pub merge_of: Option<(Work, Work)>,
}

impl Task {
    pub fn is_ready(&self) -> bool {
        self.unfinished_parents == 0
    }
}

/// One successful split, logged when a steal divides a running task.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitRecord {
    pub time: Time,
    pub victim_task: TaskIdx,
    pub stolen: TaskIdx,
    pub merge: Option<TaskIdx>,
}

#[derive(Clone, Debug)]
pub struct Application {
    pub model: ModelKind,
    pub merge_cost: MergeCost,
    tasks: Vec<Task>,
    created_count: usize,
    completed_count: usize,
    total_work: Work,
    critical_path: Work,
    next_id: u64,
    splits: Vec<SplitRecord>,
}

impl Application {
    pub fn new(model: ModelKind) -> Self {
        Application {
            model,
            merge_cost: MergeCost::default(),
            tasks: Vec::new(),
            created_count: 0,
            completed_count: 0,
            total_work: 0,
            critical_path: 0,
            next_id: 0,
            splits: Vec::new(),
        }
    }

    /// A divisible load of `work` units held as one task.
    pub fn divisible(work: Work) -> Self {
        let mut app = Application::new(ModelKind::Divisible);
        app.init_task(work, &[]);
        app.finalize_structure().expect("single task is acyclic");
        app
    }

    /// An adaptive application of `work` units held as one task.
    pub fn adaptive(work: Work, merge_cost: MergeCost) -> Self {
        let mut app = Application::new(ModelKind::Adaptive);
        app.merge_cost = merge_cost;
        app.init_task(work, &[]);
        app.finalize_structure().expect("single task is acyclic");
        app
    }

    /// Registers a new task depending on `parents`.
    pub fn init_task(&mut self, work: Work, parents: &[TaskIdx]) -> TaskIdx {
        let id = self.next_id;
        self.push_task(id, work, parents)
    }

    pub(crate) fn push_task(&mut self, id: u64, work: Work, parents: &[TaskIdx]) -> TaskIdx {
        let idx = TaskIdx(self.tasks.len());
        self.tasks.push(Task {
            id,
            work,
            children: Vec::new(),
            unfinished_parents: parents.len() as u32,
            start_time: None,
            end_time: None,
            executed_by: None,
            height: 0,
            merge_of: None,
        });
        for parent in parents {
            self.tasks[parent.0].children.push(idx);
        }
        self.next_id = self.next_id.max(id + 1);
        self.created_count += 1;
        idx
    }

    /// Computes the total work, the critical path and the heights of the
    /// current task set. Fails on cyclic dependencies.
    pub fn finalize_structure(&mut self) -> Result<()> {
        let order = self.topological_order()?;
        let mut prefix = vec![0 as Work; self.tasks.len()];
        let mut critical = 0;
        for &idx in &order {
            let end = prefix[idx.0] + self.tasks[idx.0].work;
            critical = critical.max(end);
            for child in &self.tasks[idx.0].children {
                prefix[child.0] = prefix[child.0].max(end);
            }
        }
        for (task, before) in self.tasks.iter_mut().zip(&prefix) {
            task.height = critical - before;
        }
        self.critical_path = critical;
        self.total_work = self.tasks.iter().map(|t| t.work).sum();
        Ok(())
    }

    fn topological_order(&self) -> Result<Vec<TaskIdx>> {
        let mut indegree: Vec<u32> = vec![0; self.tasks.len()];
        for task in &self.tasks {
            for child in &task.children {
                indegree[child.0] += 1;
            }
        }
        let mut ready: VecDeque<TaskIdx> = indegree
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == 0)
            .map(|(i, _)| TaskIdx(i))
            .collect();
        let mut order = Vec::with_capacity(self.tasks.len());
        while let Some(idx) = ready.pop_front() {
            order.push(idx);
            for child in &self.tasks[idx.0].children {
                indegree[child.0] -= 1;
                if indegree[child.0] == 0 {
                    ready.push_back(*child);
                }
            }
        }
        if order.len() != self.tasks.len() {
            let stuck = indegree.iter().position(|&d| d > 0).unwrap_or(0);
            return Err(SimError::Cycle(self.tasks[stuck].id));
        }
        Ok(order)
    }

    /// Tasks with no predecessor, in creation order.
    pub fn sources(&self) -> Vec<TaskIdx> {
        self.tasks
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_ready() && t.start_time.is_none())
            .map(|(i, _)| TaskIdx(i))
            .collect()
    }

    pub fn task(&self, idx: TaskIdx) -> &Task {
        &self.tasks[idx.0]
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn splits(&self) -> &[SplitRecord] {
        &self.splits
    }

    pub fn created_count(&self) -> usize {
        self.created_count
    }

    pub fn completed_count(&self) -> usize {
        self.completed_count
    }

    /// Total work W of the application as built (excludes merge tasks
    /// created at run time).
    pub fn total_work(&self) -> Work {
        self.total_work
    }

    /// Critical path length D (sum of work along the longest path).
    pub fn critical_path(&self) -> Work {
        self.critical_path
    }

    /// Number of edges in the task graph.
    pub fn edge_count(&self) -> usize {
        self.tasks.iter().map(|t| t.children.len()).sum()
    }

    /// Execution time of a task.
    pub fn get_work(&self, idx: TaskIdx) -> Time {
        self.tasks[idx.0].work
    }

    /// Marks `idx` as started on `proc` at `now`.
    pub fn start_task(&mut self, idx: TaskIdx, proc: ProcId, now: Time) {
        let task = &mut self.tasks[idx.0];
        task.start_time = Some(now);
        task.executed_by = Some(proc);
    }

    /// Work left on a running task at `now`.
    pub fn remaining(&self, idx: TaskIdx, now: Time) -> Work {
        let task = &self.tasks[idx.0];
        let elapsed = now.saturating_sub(task.start_time.unwrap_or(now));
        task.work.saturating_sub(elapsed)
    }

    /// Splits a running task at `now`, returning the stolen part.
    ///
    /// The victim keeps `r - r/2` of the remaining work `r`, the thief
    /// receives `r/2`. The running task's `work` is rewritten to
    /// `elapsed + kept` so that `end - start = work` still holds. Returns
    /// `None` for DAG tasks, merge tasks, or when less than two units remain.
    pub fn split(&mut self, running: TaskIdx, now: Time) -> Option<TaskIdx> {
        if self.model == ModelKind::Dag || self.tasks[running.0].merge_of.is_some() {
            return None;
        }
        let start = self.tasks[running.0].start_time?;
        let remaining = self.remaining(running, now);
        if remaining < 2 {
            return None;
        }
        let stolen_work = remaining / 2;
        let kept = remaining - stolen_work;
        self.tasks[running.0].work = now - start + kept;
        let stolen = self.init_task(stolen_work, &[]);

        let merge = if self.model == ModelKind::Adaptive {
            // The merge task takes over the running task's successors and
            // depends on both halves.
            let successors = std::mem::take(&mut self.tasks[running.0].children);
            let cost = self.merge_cost.cost(kept, stolen_work);
            let merge = self.init_task(cost, &[running, stolen]);
            let task = &mut self.tasks[merge.0];
            task.children = successors;
            task.merge_of = Some((kept, stolen_work));
            Some(merge)
        } else {
            None
        };

        self.splits.push(SplitRecord {
            time: now,
            victim_task: running,
            stolen,
            merge,
        });
        Some(stolen)
    }

    /// Completes `idx` at `now` and returns the children that became ready.
    pub fn end_execute_task(&mut self, idx: TaskIdx, now: Time) -> Result<Vec<TaskIdx>> {
        let task = &mut self.tasks[idx.0];
        if task.end_time.is_some() {
            return Err(SimError::Model(format!("task {} completed twice", task.id)));
        }
        task.end_time = Some(now);
        self.completed_count += 1;

        let children = self.tasks[idx.0].children.clone();
        let mut ready = Vec::new();
        for child in children {
            let task = &mut self.tasks[child.0];
            if task.unfinished_parents == 0 {
                return Err(SimError::Model(format!(
                    "task {} released more often than it has parents",
                    task.id
                )));
            }
            task.unfinished_parents -= 1;
            if task.unfinished_parents == 0 {
                ready.push(child);
            }
        }
        Ok(ready)
    }

    pub fn is_finished(&self) -> bool {
        self.created_count > 0 && self.created_count == self.completed_count
    }

    /// Clears execution records so the same structure can be run again.
    pub fn reset_execution(&mut self) {
        for task in &mut self.tasks {
            task.start_time = None;
            task.end_time = None;
            task.executed_by = None;
        }
        self.completed_count = 0;
    }
}

/// Removes the deque entry with the largest height; ties go to the oldest.
pub fn steal_from_deque(deque: &mut VecDeque<TaskIdx>, app: &Application) -> Option<TaskIdx> {
    let mut best: Option<(usize, u64)> = None;
    for (pos, idx) in deque.iter().enumerate() {
        let height = app.task(*idx).height;
        if best.is_none_or(|(_, h)| height > h) {
            best = Some((pos, height));
        }
    }
    best.and_then(|(pos, _)| deque.remove(pos))
}
