//! Platform topologies, latencies, victim selection and steal policies.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::sim::Time;
use crate::task::Work;

pub type ProcId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// Fully connected processors, constant latency between any two.
    SingleCluster,
    /// Two clusters linked by one inter-cluster hop.
    TwoClusters,
    /// Several clusters linked by an interconnect graph.
    MultiCluster,
}

/// Shape of the cluster graph of a multi-cluster platform.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interconnect {
    Ring,
    /// Cluster 0 is the hub.
    Star,
    #[default]
    Complete,
}

impl Interconnect {
    fn hops(self, a: usize, b: usize, clusters: usize) -> u64 {
        if a == b {
            return 0;
        }
        match self {
            Interconnect::Complete => 1,
            Interconnect::Star => {
                if a == 0 || b == 0 {
                    1
                } else {
                    2
                }
            }
            Interconnect::Ring => {
                let d = a.abs_diff(b);
                d.min(clusters - d) as u64
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VictimStrategy {
    #[default]
    UniformRandom,
    /// Picks inside the thief's cluster with probability `q`.
    LocalFirst { q: f64 },
    /// Probability proportional to `1 / distance`.
    DistanceWeighted,
}

impl VictimStrategy {
    pub fn label(&self) -> String {
        match self {
            VictimStrategy::UniformRandom => "uniform-random".into(),
            VictimStrategy::LocalFirst { q } => format!("local-first:{q}"),
            VictimStrategy::DistanceWeighted => "distance-weighted".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ThresholdMode {
    Static { value: Work },
    /// Threshold of `factor * latency`.
    LatencyMultiple { factor: u64 },
}

impl Default for ThresholdMode {
    fn default() -> Self {
        ThresholdMode::Static { value: 0 }
    }
}

impl ThresholdMode {
    pub fn label(&self) -> String {
        match self {
            ThresholdMode::Static { value } => format!("static:{value}"),
            ThresholdMode::LatencyMultiple { factor } => format!("latency-multiple:{factor}"),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StealPolicy {
    /// Multiple work transfers when true, single work transfer otherwise.
    #[serde(default)]
    pub simultaneous: bool,
    #[serde(default)]
    pub threshold: ThresholdMode,
}

/// Platform description as written in scenario files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub layout: Layout,
    pub p: usize,
    /// Inter-cluster latency (every pair for a single cluster).
    pub latency: Time,
    #[serde(default)]
    pub intra_latency: Option<Time>,
    /// Number of clusters for a multi-cluster layout.
    #[serde(default)]
    pub clusters: Option<usize>,
    #[serde(default)]
    pub interconnect: Option<Interconnect>,
}

impl TopologySpec {
    pub fn single_cluster(p: usize, latency: Time) -> Self {
        TopologySpec {
            layout: Layout::SingleCluster,
            p,
            latency,
            intra_latency: None,
            clusters: None,
            interconnect: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PlatformTopology {
    p: usize,
    layout: Layout,
    latency: Time,
    intra_latency: Time,
    interconnect: Interconnect,
    cluster_of: Vec<usize>,
    members: Vec<Vec<ProcId>>,
    pub strategy: VictimStrategy,
    pub policy: StealPolicy,
    weighted: Vec<WeightedIndex<f64>>,
}

impl PlatformTopology {
    pub fn new(spec: &TopologySpec, strategy: VictimStrategy, policy: StealPolicy) -> Result<Self> {
        let p = spec.p;
        if p < 1 {
            return Err(SimError::InvalidConfig("p must be at least 1".into()));
        }
        let clusters = match spec.layout {
            Layout::SingleCluster => 1,
            Layout::TwoClusters => 2,
            Layout::MultiCluster => spec.clusters.unwrap_or(2),
        };
        if spec.layout == Layout::MultiCluster && (clusters == 0 || clusters > p) {
            return Err(SimError::InvalidConfig(format!(
                "{clusters} clusters cannot be populated by {p} processors"
            )));
        }
        if let VictimStrategy::LocalFirst { q } = strategy {
            if !(0.0..=1.0).contains(&q) {
                return Err(SimError::InvalidConfig(format!("local-first q={q} outside [0, 1]")));
            }
        }
        let intra_latency = match spec.layout {
            Layout::SingleCluster => spec.latency,
            _ => spec.intra_latency.unwrap_or(1),
        };

        // Contiguous blocks, the first clusters taking the remainder.
        let cluster_of: Vec<usize> = (0..p).map(|i| i * clusters / p).collect();
        let mut members = vec![Vec::new(); clusters];
        for (proc, &c) in cluster_of.iter().enumerate() {
            members[c].push(proc);
        }

        let mut topo = PlatformTopology {
            p,
            layout: spec.layout,
            latency: spec.latency,
            intra_latency,
            interconnect: spec.interconnect.unwrap_or_default(),
            cluster_of,
            members,
            strategy,
            policy,
            weighted: Vec::new(),
        };
        if strategy == VictimStrategy::DistanceWeighted && p > 1 {
            topo.weighted = (0..p)
                .map(|thief| {
                    let weights = (0..p).map(|v| {
                        if v == thief {
                            0.0
                        } else {
                            1.0 / topo.distance_unchecked(thief, v).max(1) as f64
                        }
                    });
                    WeightedIndex::new(weights).expect("at least one positive weight")
                })
                .collect();
        }
        Ok(topo)
    }

    pub fn single_cluster(p: usize, latency: Time) -> Self {
        Self::new(
            &TopologySpec::single_cluster(p, latency),
            VictimStrategy::UniformRandom,
            StealPolicy::default(),
        )
        .expect("valid single cluster")
    }

    pub fn with_policy(mut self, policy: StealPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn latency(&self) -> Time {
        self.latency
    }

    pub fn cluster_of(&self, proc: ProcId) -> usize {
        self.cluster_of[proc]
    }

    pub fn is_simultaneous(&self) -> bool {
        self.policy.simultaneous
    }

    /// Communication time between two processors.
    pub fn distance(&self, i: ProcId, j: ProcId) -> Result<Time> {
        for id in [i, j] {
            if id >= self.p {
                return Err(SimError::ProcessorOutOfRange { id, p: self.p });
            }
        }
        Ok(self.distance_unchecked(i, j))
    }

    pub(crate) fn distance_unchecked(&self, i: ProcId, j: ProcId) -> Time {
        if i == j {
            return 0;
        }
        let (a, b) = (self.cluster_of[i], self.cluster_of[j]);
        if a == b {
            self.intra_latency
        } else {
            self.latency * self.interconnect.hops(a, b, self.members.len())
        }
    }

    /// Remaining work at or below which a victim refuses to split.
    pub fn steal_threshold(&self) -> Work {
        match self.policy.threshold {
            ThresholdMode::Static { value } => value,
            ThresholdMode::LatencyMultiple { factor } => factor * self.latency,
        }
    }

    /// Draws a victim for `thief` according to the configured strategy.
    pub fn select_victim<R: Rng + ?Sized>(&self, thief: ProcId, rng: &mut R) -> Result<ProcId> {
        if self.p < 2 {
            return Err(SimError::NoVictim);
        }
        if thief >= self.p {
            return Err(SimError::ProcessorOutOfRange { id: thief, p: self.p });
        }
        let victim = match self.strategy {
            VictimStrategy::UniformRandom => skip(rng.gen_range(0..self.p - 1), thief),
            VictimStrategy::DistanceWeighted => self.weighted[thief].sample(rng),
            VictimStrategy::LocalFirst { q } => {
                let own = &self.members[self.cluster_of[thief]];
                let local_possible = own.len() > 1;
                let remote_possible = own.len() < self.p;
                let go_local = rng.gen_bool(q);
                if (go_local && local_possible) || !remote_possible {
                    own[skip(rng.gen_range(0..own.len() - 1), own.binary_search(&thief).unwrap())]
                } else {
                    // Uniform among processors outside the thief's cluster;
                    // `own` is a contiguous block.
                    let first = own[0];
                    let k = rng.gen_range(0..self.p - own.len());
                    if k < first {
                        k
                    } else {
                        k + own.len()
                    }
                }
            }
        };
        Ok(victim)
    }
}

/// Maps a draw in `0..n-1` onto `0..n` minus `excluded`.
fn skip(draw: usize, excluded: usize) -> usize {
    if draw >= excluded {
        draw + 1
    } else {
        draw
    }
}
