// SPDX-License-Identifier: Apache-2.0

//! Location-independent compute placement over named data.
//!
//! Clients name a computation (`/ndn/k8s/compute/app=BLAST&cpu=2&mem=4&...`)
//! instead of addressing a cluster. Forwarders route the request by longest
//! prefix match to whichever cluster gateway announces the compute prefix;
//! the gateway admits the job into a mock orchestrator and publishes results
//! into a named data lake. Everything runs inside a deterministic
//! discrete-event simulator.

pub mod datalake;
pub mod digest;
pub mod forwarder;
pub mod gateway;
pub mod name;
pub mod orchestrator;
pub mod sim;
pub mod wire;

pub use datalake::{DataLake, DatasetManifest};
pub use digest::Digest;
pub use forwarder::{FaceId, Forwarder, StrategyKind};
pub use gateway::{Gateway, JobRecord, JobStatus};
pub use name::{ComputeSpec, JobId, Name};
pub use orchestrator::{DurationModel, Orchestrator};
pub use sim::{Metrics, Simulation, TopologyConfig, Workload};
pub use wire::{DataPacket, Interest};

/// Simulated time in milliseconds.
pub type Millis = u64;
