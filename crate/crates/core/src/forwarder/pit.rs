// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use super::FaceId;
use crate::name::Name;
use crate::Millis;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PitEntry {
    pub in_faces: BTreeSet<FaceId>,
    pub nonces: BTreeSet<u32>,
    pub expiry: Millis,
}

/// Pending Interest table keyed by exact name, with an expiry index so
/// timeouts drain in timestamp order.
#[derive(Debug, Clone, Default)]
pub struct Pit {
    entries: BTreeMap<Name, PitEntry>,
    by_expiry: BTreeSet<(Millis, Name)>,
}

impl Pit {
    pub fn new() -> Self {
        Pit::default()
    }

    pub fn get(&self, name: &Name) -> Option<&PitEntry> {
        self.entries.get(name)
    }

    pub fn insert(&mut self, name: Name, in_face: FaceId, nonce: u32, expiry: Millis) {
        self.by_expiry.insert((expiry, name.clone()));
        self.entries.insert(
            name,
            PitEntry {
                in_faces: BTreeSet::from([in_face]),
                nonces: BTreeSet::from([nonce]),
                expiry,
            },
        );
    }

    /// Adds a downstream face and nonce to an existing entry, extending its
    /// expiry if the new Interest outlives it. Returns false if absent.
    pub fn aggregate(&mut self, name: &Name, in_face: FaceId, nonce: u32, expiry: Millis) -> bool {
        let Some(entry) = self.entries.get_mut(name) else {
            return false;
        };
        entry.in_faces.insert(in_face);
        entry.nonces.insert(nonce);
        if expiry > entry.expiry {
            self.by_expiry.remove(&(entry.expiry, name.clone()));
            entry.expiry = expiry;
            self.by_expiry.insert((expiry, name.clone()));
        }
        true
    }

    pub fn remove(&mut self, name: &Name) -> Option<PitEntry> {
        let entry = self.entries.remove(name)?;
        self.by_expiry.remove(&(entry.expiry, name.clone()));
        Some(entry)
    }

    /// Removes every entry with `expiry <= now`, earliest first.
    pub fn expire(&mut self, now: Millis) -> Vec<(Name, PitEntry)> {
        let mut out = Vec::new();
        while let Some((expiry, _)) = self.by_expiry.first() {
            if *expiry > now {
                break;
            }
            let (_, name) = self.by_expiry.pop_first().expect("non-empty");
            let entry = self.entries.remove(&name).expect("index and table agree");
            out.push((name, entry));
        }
        out
    }

    /// Drops `face` from every entry; entries left without downstream faces are removed.
    pub fn remove_face(&mut self, face: FaceId) {
        let dead: Vec<Name> = self
            .entries
            .iter_mut()
            .filter_map(|(name, e)| {
                e.in_faces.remove(&face);
                e.in_faces.is_empty().then(|| name.clone())
            })
            .collect();
        for name in dead {
            self.remove(&name);
        }
    }

    pub fn next_expiry(&self) -> Option<Millis> {
        self.by_expiry.first().map(|(t, _)| *t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, &PitEntry)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
