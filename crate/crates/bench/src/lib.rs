// SPDX-License-Identifier: Apache-2.0

//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lidc_core::forwarder::{FaceId, Fib};
use lidc_core::name::{Component, Name};
use lidc_core::sim::synth::{random_topology, JobMix};
use lidc_core::{Simulation, TopologyConfig, Workload};

const WORDS: [&str; 12] = [
    "ndn", "k8s", "compute", "data", "status", "results", "sra", "ref", "human", "in", "seg=0",
    "manifest",
];

pub fn random_name(rng: &mut ChaCha8Rng, len: usize) -> Name {
    Name::from_components(
        (0..len)
            .map(|_| Component::new(WORDS[rng.gen_range(0..WORDS.len())]).expect("non-empty"))
            .collect(),
    )
}

/// A FIB with `prefixes` random entries of 1-5 components, plus lookup
/// names of 6 components.
pub fn fib_fixture(prefixes: usize, lookups: usize, seed: u64) -> (Fib, Vec<Name>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fib = Fib::new();
    for _ in 0..prefixes {
        let len = rng.gen_range(1..=5);
        fib.register(
            random_name(&mut rng, len),
            FaceId(rng.gen_range(1..16)),
            rng.gen_range(0..100),
        );
    }
    let names = (0..lookups).map(|_| random_name(&mut rng, 6)).collect();
    (fib, names)
}

/// A random topology with `jobs` generated submissions from three clients.
pub fn job_mix_sim(
    seed: u64,
    routers: usize,
    clusters: usize,
    jobs: usize,
) -> (Simulation, Workload) {
    let cfg = TopologyConfig::parse(&random_topology(seed, routers, clusters, 3))
        .expect("generated topology");
    let sim = Simulation::new(&cfg, seed).expect("valid topology");
    let mix = JobMix {
        jobs,
        horizon_ms: 3_600_000,
        clients: vec!["c0".into(), "c1".into(), "c2".into()],
        dataset: Name::parse("/ndn/k8s/data/in/base").expect("valid name"),
        max_cpu: 4,
        max_mem: 8,
    };
    (sim, mix.generate(seed))
}
