//! Scenario files.
//!
//! A scenario is written as JSON (or TOML when the file name ends in
//! `.toml`). Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::sim::Time;
use crate::task::{generate_dag, load_application, Application, DagSpec, MergeCost, ModelKind, Work};
use crate::topology::{PlatformTopology, StealPolicy, ThresholdMode, TopologySpec, VictimStrategy};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelKind,
    /// Total work W of a divisible or adaptive application.
    #[serde(default)]
    pub work: Option<Work>,
    #[serde(default)]
    pub dag: Option<DagSpec>,
    /// Predefined application in the JSON application format.
    #[serde(default)]
    pub application_file: Option<PathBuf>,
    #[serde(default)]
    pub merge_cost: MergeCost,
    pub topology: TopologySpec,
    #[serde(default)]
    pub strategy: VictimStrategy,
    #[serde(default)]
    pub policy: StealPolicy,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub paje: bool,
    #[serde(default)]
    pub json_dag: bool,
}

impl ScenarioConfig {
    /// Divisible load on one cluster with uniform victim selection, single
    /// work transfer and no threshold.
    pub fn divisible(work: Work, p: usize, latency: Time) -> Self {
        ScenarioConfig {
            model: ModelKind::Divisible,
            work: Some(work),
            dag: None,
            application_file: None,
            merge_cost: MergeCost::default(),
            topology: TopologySpec::single_cluster(p, latency),
            strategy: VictimStrategy::UniformRandom,
            policy: StealPolicy::default(),
            replications: 1,
            base_seed: 0,
            output: OutputSpec::default(),
        }
    }

    pub fn dag(spec: DagSpec, p: usize, latency: Time) -> Self {
        ScenarioConfig {
            model: ModelKind::Dag,
            work: None,
            dag: Some(spec),
            ..Self::divisible(1, p, latency)
        }
    }

    pub fn adaptive(work: Work, p: usize, latency: Time) -> Self {
        ScenarioConfig {
            model: ModelKind::Adaptive,
            ..Self::divisible(work, p, latency)
        }
    }

    pub fn with_simultaneous(mut self, simultaneous: bool) -> Self {
        self.policy.simultaneous = simultaneous;
        self
    }

    pub fn with_threshold(mut self, threshold: ThresholdMode) -> Self {
        self.policy.threshold = threshold;
        self
    }

    pub fn with_replications(mut self, n: usize, base_seed: u64) -> Self {
        self.replications = n;
        self.base_seed = base_seed;
        self
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut config = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| SimError::InvalidConfig(e.to_string()))?
        } else {
            Self::from_json(&text)?
        };
        // Relative application files are resolved against the scenario file.
        if let (Some(file), Some(parent)) = (config.application_file.as_mut(), path.parent()) {
            if file.is_relative() {
                *file = parent.join(&*file);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SimError::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.topology.p < 1 {
            return invalid("p must be at least 1".into());
        }
        if self.replications < 1 {
            return invalid("replications must be at least 1".into());
        }
        let sources = [self.work.is_some(), self.dag.is_some(), self.application_file.is_some()];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return invalid("exactly one of work, dag, application_file must be given".into());
        }
        match self.model {
            ModelKind::Divisible | ModelKind::Adaptive => {
                if self.dag.is_some() {
                    return invalid(format!("{} model cannot use a generated DAG", self.model.as_str()));
                }
                if self.work == Some(0) {
                    return invalid("work must be at least 1".into());
                }
            }
            ModelKind::Dag => {
                if self.work.is_some() {
                    return invalid("dag model takes `dag` or `application_file`, not `work`".into());
                }
            }
        }
        Ok(())
    }

    /// Seed of replication `i`.
    pub fn seed_for(&self, replication: usize) -> u64 {
        self.base_seed.wrapping_add(replication as u64)
    }

    pub fn build_application(&self, seed: u64) -> Result<Application> {
        if let Some(path) = &self.application_file {
            let text = std::fs::read_to_string(path)?;
            let mut app = load_application(&text)?;
            if app.model != self.model {
                return Err(SimError::InvalidConfig(format!(
                    "application file holds a {} model, scenario expects {}",
                    app.model.as_str(),
                    self.model.as_str()
                )));
            }
            app.merge_cost = self.merge_cost;
            return Ok(app);
        }
        match self.model {
            ModelKind::Divisible => Ok(Application::divisible(self.work.unwrap_or(0))),
            ModelKind::Adaptive => Ok(Application::adaptive(self.work.unwrap_or(0), self.merge_cost)),
            ModelKind::Dag => {
                let spec = self
                    .dag
                    .as_ref()
                    .ok_or_else(|| SimError::InvalidConfig("dag model needs a dag spec".into()))?;
                generate_dag(spec, seed)
            }
        }
    }

    pub fn build_topology(&self) -> Result<PlatformTopology> {
        PlatformTopology::new(&self.topology, self.strategy, self.policy)
    }
}
