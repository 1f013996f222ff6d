// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use crate::name::Name;
use crate::wire::DataPacket;
use crate::Millis;

#[derive(Debug, Clone)]
struct CsEntry {
    data: DataPacket,
    inserted_at: Millis,
    last_use: u64,
}

/// Exact-name Data cache with least-recently-used eviction. An entry is only
/// served while `now - inserted_at <= freshness_ms`; stale entries are
/// dropped on lookup.
#[derive(Debug, Clone)]
pub struct ContentStore {
    capacity: usize,
    entries: BTreeMap<Name, CsEntry>,
    recency: BTreeMap<u64, Name>,
    tick: u64,
    hits: u64,
    misses: u64,
    evictions: u64,
}

impl ContentStore {
    pub fn new(capacity: usize) -> Self {
        ContentStore {
            capacity,
            entries: BTreeMap::new(),
            recency: BTreeMap::new(),
            tick: 0,
            hits: 0,
            misses: 0,
            evictions: 0,
        }
    }

    fn touch(&mut self, name: &Name) {
        self.tick += 1;
        let entry = self.entries.get_mut(name).expect("touch of present entry");
        self.recency.remove(&entry.last_use);
        entry.last_use = self.tick;
        self.recency.insert(self.tick, name.clone());
    }

    fn remove(&mut self, name: &Name) {
        if let Some(e) = self.entries.remove(name) {
            self.recency.remove(&e.last_use);
        }
    }

    /// Looks up a fresh entry, counting a hit or a miss.
    pub fn lookup(&mut self, name: &Name, now: Millis) -> Option<DataPacket> {
        let fresh = match self.entries.get(name) {
            Some(e) => now.saturating_sub(e.inserted_at) <= e.data.freshness_ms,
            None => {
                self.misses += 1;
                return None;
            }
        };
        if !fresh {
            self.remove(name);
            self.misses += 1;
            return None;
        }
        self.hits += 1;
        self.touch(name);
        Some(self.entries[name].data.clone())
    }

    /// Inserts or refreshes `data`. Returns the evicted name, if any.
    pub fn insert(&mut self, data: DataPacket, now: Millis) -> Option<Name> {
        if self.capacity == 0 {
            return None;
        }
        let name = data.name.clone();
        if self.entries.contains_key(&name) {
            let e = self.entries.get_mut(&name).expect("present");
            e.data = data;
            e.inserted_at = now;
            self.touch(&name);
            return None;
        }
        let mut evicted = None;
        if self.entries.len() >= self.capacity {
            let (_, victim) = self.recency.pop_first().expect("full store has entries");
            self.entries.remove(&victim);
            self.evictions += 1;
            evicted = Some(victim);
        }
        self.entries.insert(
            name.clone(),
            CsEntry {
                data,
                inserted_at: now,
                last_use: 0,
            },
        );
        self.touch(&name);
        evicted
    }

    pub fn contains(&self, name: &Name) -> bool {
        self.entries.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    pub fn evictions(&self) -> u64 {
        self.evictions
    }

    pub fn hit_ratio(&self) -> f64 {
        let total = self.hits + self.misses;
        if total == 0 {
            0.0
        } else {
            self.hits as f64 / total as f64
        }
    }

    /// Entries in least- to most-recently-used order with their insertion time.
    pub fn entries_lru(&self) -> impl Iterator<Item = (&DataPacket, Millis)> {
        self.recency.values().map(|n| {
            let e = &self.entries[n];
            (&e.data, e.inserted_at)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    fn d(i: u32, freshness: Millis) -> DataPacket {
        DataPacket::new(
            Name::root().child(format!("d{i}")),
            vec![i as u8],
            freshness,
        )
    }

    #[test]
    fn freshness_window() {
        let mut cs = ContentStore::new(4);
        cs.insert(d(1, 100), 1000);
        assert!(cs.lookup(&d(1, 0).name, 1100).is_some());
        assert!(cs.lookup(&d(1, 0).name, 1101).is_none());
        assert!(!cs.contains(&d(1, 0).name));
        assert_eq!((cs.hits(), cs.misses()), (1, 1));
    }

    #[test]
    fn zero_capacity_stores_nothing() {
        let mut cs = ContentStore::new(0);
        cs.insert(d(1, 100), 0);
        assert!(cs.is_empty());
    }

    /// Reference LRU: a queue where the front is least recently used.
    #[derive(Default)]
    struct ModelLru {
        cap: usize,
        order: VecDeque<u32>,
    }

    impl ModelLru {
        fn get(&mut self, k: u32) -> bool {
            if let Some(p) = self.order.iter().position(|&x| x == k) {
                self.order.remove(p);
                self.order.push_back(k);
                true
            } else {
                false
            }
        }
        fn put(&mut self, k: u32) -> Option<u32> {
            if self.get(k) {
                return None;
            }
            let ev = if self.order.len() >= self.cap {
                self.order.pop_front()
            } else {
                None
            };
            self.order.push_back(k);
            ev
        }
    }

    #[test]
    fn lru_matches_reference_model() {
        let mut cs = ContentStore::new(5);
        let mut model = ModelLru {
            cap: 5,
            ..Default::default()
        };
        let mut state = 12345u64;
        for step in 0..5000 {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let key = ((state >> 33) % 12) as u32;
            if (state >> 20) & 1 == 0 {
                let got = cs.insert(d(key, 1_000_000), step);
                let want = model.put(key).map(|k| d(k, 0).name);
                assert_eq!(got, want, "step {step}");
            } else {
                assert_eq!(
                    cs.lookup(&d(key, 0).name, step).is_some(),
                    model.get(key),
                    "step {step}"
                );
            }
            assert!(cs.len() <= cs.capacity());
        }
        let order: Vec<Name> = cs.entries_lru().map(|(p, _)| p.name.clone()).collect();
        let want: Vec<Name> = model.order.iter().map(|&k| d(k, 0).name).collect();
        assert_eq!(order, want);
    }
}
