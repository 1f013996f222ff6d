// SPDX-License-Identifier: Apache-2.0

//! A client session persisted as a workload script in the store directory.
//!
//! Every invocation rebuilds the simulation by replaying the journal up to
//! the recorded clock, appends its own command, runs it, and saves the
//! journal back. The event queue is deterministic, so the replay lands in
//! exactly the state the previous invocation left behind.

use std::fs;
use std::path::{Path, PathBuf};

use lidc_core::sim::{ScriptAction, ScriptError, Simulation, TopologyConfig, Workload};
use lidc_core::Millis;

use crate::Failure;

const JOURNAL: &str = "session.workload";
pub const FILES: &str = "files";

pub struct Session {
    store: PathBuf,
    topology: PathBuf,
    seed: u64,
    lines: Vec<String>,
    pub sim: Simulation,
}

pub fn load_topology(path: &Path, seed: u64) -> Result<Simulation, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("reading {}: {e}", path.display())))?;
    let cfg = TopologyConfig::parse_with_base(&text, path.parent())
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    Simulation::new(&cfg, seed).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

impl Session {
    pub fn open(store: &Path, topology: Option<&Path>, seed: Option<u64>) -> Result<Self, Failure> {
        let journal = store.join(JOURNAL);
        if !journal.exists() {
            let Some(topology) = topology else {
                return Err(Failure::usage(format!(
                    "no session in {}; pass --topology to start one",
                    store.display()
                )));
            };
            let topology = fs::canonicalize(topology)
                .map_err(|e| Failure::usage(format!("reading {}: {e}", topology.display())))?;
            let seed = seed.unwrap_or(1);
            let sim = load_topology(&topology, seed)?;
            return Ok(Session {
                store: store.to_path_buf(),
                topology,
                seed,
                lines: Vec::new(),
                sim,
            });
        }

        let text = fs::read_to_string(&journal)
            .map_err(|e| Failure::usage(format!("reading {}: {e}", journal.display())))?;
        let workload = Workload::parse_with_base(&text, Some(store)).map_err(|e| match e {
            ScriptError::Integrity { .. } => {
                Failure::integrity(format!("{}: {e}", journal.display()))
            }
            _ => Failure::usage(format!("{}: {e}", journal.display())),
        })?;
        let recorded = workload.topology.clone().unwrap_or_default();
        if let Some(t) = topology {
            if fs::canonicalize(t).ok().as_deref() != Some(recorded.as_path()) {
                return Err(Failure::usage(format!(
                    "store is bound to {}; run `sim reset` first",
                    recorded.display()
                )));
            }
        }
        let recorded_seed = workload.seed.unwrap_or(1);
        if seed.is_some_and(|s| s != recorded_seed) {
            return Err(Failure::usage(format!(
                "store uses seed {recorded_seed}; run `sim reset` first"
            )));
        }
        let mut sim = load_topology(&recorded, recorded_seed)?;
        sim.load_workload(&workload);
        sim.run_until(workload.end.unwrap_or(0));
        let lines = text
            .lines()
            .filter(|l| l.starts_with("at "))
            .map(str::to_string)
            .collect();
        Ok(Session {
            store: store.to_path_buf(),
            topology: recorded,
            seed: recorded_seed,
            lines,
            sim,
        })
    }

    /// Deletes the journal and stored files.
    pub fn reset(store: &Path) -> std::io::Result<()> {
        for path in [store.join(JOURNAL), store.join(FILES)] {
            match fs::metadata(&path) {
                Ok(m) if m.is_dir() => fs::remove_dir_all(&path)?,
                Ok(_) => fs::remove_file(&path)?,
                Err(_) => {}
            }
        }
        Ok(())
    }

    pub fn store(&self) -> &Path {
        &self.store
    }

    /// Schedules `action` at `at` and records `line` (the action in script
    /// form, without the `at <ms>` prefix) in the journal.
    pub fn push(&mut self, at: Millis, line: String, action: ScriptAction) -> Option<u64> {
        self.lines.push(format!("at {at} {line}"));
        self.sim.schedule(at, action)
    }

    pub fn save(&self) -> Result<(), Failure> {
        fs::create_dir_all(&self.store).map_err(|e| Failure::io(&self.store, e))?;
        let mut text = format!("topology {}\nseed {}\n", self.topology.display(), self.seed);
        for l in &self.lines {
            text += l;
            text.push('\n');
        }
        text += &format!("end {}\n", self.sim.now());
        let path = self.store.join(JOURNAL);
        fs::write(&path, text).map_err(|e| Failure::io(&path, e))
    }
}
