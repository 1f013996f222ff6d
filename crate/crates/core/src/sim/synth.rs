// SPDX-License-Identifier: Apache-2.0

//! Seeded random workloads and topologies.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::name::{build_compute_name, ComputeSpec, Name};
use crate::Millis;

use super::script::{JobRef, ScriptAction, ScriptCommand, Workload};

const TRACE_SAMPLES: [&str; 2] = ["SRR2931415", "SRR5139395"];

/// Random job mix for a topology whose clients are `clients` and whose
/// clusters hold `dataset` in their lakes.
#[derive(Debug, Clone)]
pub struct JobMix {
    pub jobs: usize,
    /// Submissions are spread uniformly over `[0, horizon_ms)`.
    pub horizon_ms: Millis,
    pub clients: Vec<String>,
    pub dataset: Name,
    pub max_cpu: u32,
    pub max_mem: u32,
}

impl JobMix {
    /// Submit actions, each followed by a status query, ordered by time. About
    /// one job in five names a dataset no cluster holds.
    pub fn generate(&self, seed: u64) -> Workload {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut commands = Vec::new();
        for i in 0..self.jobs {
            let at = rng.gen_range(0..self.horizon_ms.max(1));
            let client = self
                .clients
                .choose(&mut rng)
                .expect("at least one client")
                .clone();
            let cpu = rng.gen_range(1..=self.max_cpu);
            let mem = rng.gen_range(1..=self.max_mem);
            let spec = match rng.gen_range(0..5) {
                0 => ComputeSpec::new("BLAST", mem, cpu)
                    .with_param("srr", *TRACE_SAMPLES.choose(&mut rng).expect("non-empty")),
                1 => ComputeSpec::new("BLAST", mem, cpu).with_param(
                    "srr",
                    format!("SRR{}", rng.gen_range(1_000_000..10_000_000)),
                ),
                2 => ComputeSpec::new("compress", mem, cpu).with_dataset(self.dataset.clone()),
                3 => ComputeSpec::new("compress", mem, cpu)
                    .with_dataset(self.dataset.clone())
                    .with_param("tag", format!("t{i}")),
                // Passes admission, then fails at start for want of input.
                _ => ComputeSpec::new("compress", mem, cpu)
                    .with_dataset(self.dataset.child("missing")),
            };
            let label = format!("j{i}");
            commands.push(ScriptCommand {
                at,
                action: ScriptAction::Submit {
                    client: client.clone(),
                    uri: build_compute_name(&spec).to_uri(),
                    label: Some(label.clone()),
                },
            });
            commands.push(ScriptCommand {
                at: at + rng.gen_range(1_000..120_000),
                action: ScriptAction::Status {
                    client,
                    job: JobRef::Label(label),
                },
            });
        }
        commands.sort_by_key(|c| c.at);
        Workload {
            commands,
            ..Workload::default()
        }
    }
}

/// A random connected topology in the config text format: `routers`
/// routers on a random tree plus extra links, each client and cluster
/// attached to one router. Every cluster announces compute and data and
/// holds `/ndn/k8s/data/in/base`.
pub fn random_topology(seed: u64, routers: usize, clusters: usize, clients: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let routers = routers.max(1);
    let mut out = String::new();
    for r in 0..routers {
        out += &format!("node r{r} router\n");
    }
    for c in 0..clients {
        out += &format!("node c{c} client\n");
    }
    for k in 0..clusters {
        out += &format!(
            "node k{k} cluster cpu={} mem={} apps=BLAST,compress startup={}\n",
            rng.gen_range(4..=16),
            rng.gen_range(8..=32),
            rng.gen_range(1..=3000)
        );
    }
    let mut linked = std::collections::BTreeSet::new();
    for r in 1..routers {
        let parent = rng.gen_range(0..r);
        linked.insert((parent, r));
        out += &format!("link r{parent} r{r} {}\n", rng.gen_range(1..=30));
    }
    for _ in 0..routers / 2 {
        let (a, b) = (rng.gen_range(0..routers), rng.gen_range(0..routers));
        let key = (a.min(b), a.max(b));
        if a != b && linked.insert(key) {
            out += &format!("link r{a} r{b} {}\n", rng.gen_range(1..=30));
        }
    }
    for c in 0..clients {
        out += &format!(
            "link c{c} r{} {}\n",
            rng.gen_range(0..routers),
            rng.gen_range(1..=5)
        );
    }
    for k in 0..clusters {
        out += &format!(
            "link k{k} r{} {}\n",
            rng.gen_range(0..routers),
            rng.gen_range(1..=30)
        );
        out += &format!("announce k{k} /ndn/k8s/compute\nannounce k{k} /ndn/k8s/data\n");
        out += &format!("dataset k{k} /ndn/k8s/data/in/base 4096 declared=50000000\n");
    }
    out
}
