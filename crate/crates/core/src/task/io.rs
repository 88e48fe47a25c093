use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Application, ModelKind, TaskIdx, Work};
use crate::error::{Result, SimError};
use crate::sim::Time;
use crate::topology::ProcId;

/// On-disk application description, also used to dump executed runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApplicationFile {
    pub model: ModelKind,
    pub tasks: Vec<TaskRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRecord {
    pub id: u64,
    pub work: Work,
    #[serde(default)]
    pub children: Vec<u64>,
    #[serde(default)]
    pub start_time: Option<Time>,
    #[serde(default)]
    pub end_time: Option<Time>,
    #[serde(default)]
    pub thread_id: Option<ProcId>,
}

impl ApplicationFile {
    pub fn from_application(app: &Application) -> Self {
        let tasks = app
            .tasks()
            .iter()
            .map(|task| TaskRecord {
                id: task.id,
                work: task.work,
                children: task.children.iter().map(|c| app.task(*c).id).collect(),
                start_time: task.start_time,
                end_time: task.end_time,
                thread_id: task.executed_by,
            })
            .collect();
        ApplicationFile {
            model: app.model,
            tasks,
        }
    }

    /// Rebuilds the task graph. Execution records in the file are ignored.
    pub fn into_application(self) -> Result<Application> {
        let mut index: HashMap<u64, TaskIdx> = HashMap::with_capacity(self.tasks.len());
        for (pos, record) in self.tasks.iter().enumerate() {
            if index.insert(record.id, TaskIdx(pos)).is_some() {
                return Err(SimError::Application(format!("duplicate task id {}", record.id)));
            }
        }

        let mut parents: Vec<Vec<TaskIdx>> = vec![Vec::new(); self.tasks.len()];
        for (pos, record) in self.tasks.iter().enumerate() {
            for child in &record.children {
                let Some(&child_idx) = index.get(child) else {
                    return Err(SimError::Application(format!(
                        "task {} lists unknown child {child}",
                        record.id
                    )));
                };
                parents[child_idx.0].push(TaskIdx(pos));
            }
        }

        let mut app = Application::new(self.model);
        for (pos, record) in self.tasks.iter().enumerate() {
            let idx = app.push_task(record.id, record.work, &[]);
            debug_assert_eq!(idx.0, pos);
        }
        // Children are attached in file order so the export lists them the same way.
        for (pos, record) in self.tasks.iter().enumerate() {
            app.tasks[pos].children = record.children.iter().map(|c| index[c]).collect();
        }
        for (pos, ps) in parents.iter().enumerate() {
            app.tasks[pos].unfinished_parents = ps.len() as u32;
        }
        app.finalize_structure()?;
        Ok(app)
    }
}

/// Parses an application from its JSON description.
pub fn load_application(text: &str) -> Result<Application> {
    let file: ApplicationFile = serde_json::from_str(text).map_err(|e| SimError::Application(e.to_string()))?;
    file.into_application()
}
