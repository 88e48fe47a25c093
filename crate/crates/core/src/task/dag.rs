use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Application, ModelKind, TaskIdx, Work};
use crate::error::{Result, SimError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DagKind {
    /// Complete binary tree of the given depth (in levels).
    BinaryTree,
    /// Source, `size` parallel tasks, sink.
    ForkJoin,
    /// Merge sort recursion over `size` leaves: a split tree followed by
    /// the mirrored join tree.
    MergeSort,
}

/// Parameters of a generated DAG. Task works are drawn uniformly in
/// `[work_min, work_max]`; the default is unit tasks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DagSpec {
    pub kind: DagKind,
    pub size: u32,
    #[serde(default = "one")]
    pub work_min: Work,
    #[serde(default = "one")]
    pub work_max: Work,
}

fn one() -> Work {
    1
}

impl DagSpec {
    pub fn unit(kind: DagKind, size: u32) -> Self {
        DagSpec {
            kind,
            size,
            work_min: 1,
            work_max: 1,
        }
    }
}

pub fn generate_dag(spec: &DagSpec, seed: u64) -> Result<Application> {
    if spec.size == 0 {
        return Err(SimError::InvalidConfig("DAG size must be at least 1".into()));
    }
    if spec.work_min > spec.work_max {
        return Err(SimError::InvalidConfig(format!(
            "work_min {} exceeds work_max {}",
            spec.work_min, spec.work_max
        )));
    }
    if spec.kind == DagKind::BinaryTree && spec.size > 24 {
        return Err(SimError::InvalidConfig("binary tree depth above 24".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = move || rng.gen_range(spec.work_min..=spec.work_max);
    let mut app = Application::new(ModelKind::Dag);

    match spec.kind {
        DagKind::BinaryTree => {
            let root = app.init_task(draw(), &[]);
            let mut level = vec![root];
            for _ in 1..spec.size {
                let mut next = Vec::with_capacity(level.len() * 2);
                for parent in level {
                    next.push(app.init_task(draw(), &[parent]));
                    next.push(app.init_task(draw(), &[parent]));
                }
                level = next;
            }
        }
        DagKind::ForkJoin => {
            let source = app.init_task(draw(), &[]);
            let middle: Vec<TaskIdx> = (0..spec.size).map(|_| app.init_task(draw(), &[source])).collect();
            app.init_task(draw(), &middle);
        }
        DagKind::MergeSort => {
            let root = app.init_task(draw(), &[]);
            merge_sort(&mut app, root, spec.size, &mut draw);
        }
    }

    app.finalize_structure()?;
    Ok(app)
}

/// Expands `node`, which covers `n` elements, and returns the task that
/// delivers its sorted output.
fn merge_sort(app: &mut Application, node: TaskIdx, n: u32, draw: &mut impl FnMut() -> Work) -> TaskIdx {
    if n <= 1 {
        return node;
    }
    let left = app.init_task(draw(), &[node]);
    let right = app.init_task(draw(), &[node]);
    let left_out = merge_sort(app, left, n - n / 2, draw);
    let right_out = merge_sort(app, right, n / 2, draw);
    app.init_task(draw(), &[left_out, right_out])
}
