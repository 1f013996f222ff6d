// SPDX-License-Identifier: Apache-2.0

//! Shortest-path routing from prefix announcements.
//!
//! Each node reaches every announcer of a prefix through the first hop of a
//! shortest path (lowest face id on ties), at a cost equal to the path
//! latency. A node that announces a prefix itself uses the app face at cost 0.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use crate::forwarder::{FaceId, APP_FACE};
use crate::name::Name;
use crate::Millis;

/// Adjacency: node -> [(neighbor, latency, local face toward neighbor)].
pub type Adjacency = BTreeMap<String, Vec<(String, Millis, FaceId)>>;

/// Single-source shortest path latencies.
pub fn dijkstra(adj: &Adjacency, src: &str) -> BTreeMap<String, Millis> {
    let mut dist: BTreeMap<String, Millis> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((0, src.to_string())));
    while let Some(Reverse((d, u))) = heap.pop() {
        if dist.contains_key(&u) {
            continue;
        }
        dist.insert(u.clone(), d);
        for (v, w, _) in adj.get(&u).map(Vec::as_slice).unwrap_or_default() {
            if !dist.contains_key(v) {
                heap.push(Reverse((d + w, v.clone())));
            }
        }
    }
    dist
}

#[derive(Debug, Clone, Default)]
pub struct RouteTable {
    adj: Adjacency,
    dist: BTreeMap<String, BTreeMap<String, Millis>>,
}

impl RouteTable {
    pub fn build(adj: Adjacency) -> Self {
        let dist = adj.keys().map(|u| (u.clone(), dijkstra(&adj, u))).collect();
        RouteTable { adj, dist }
    }

    pub fn distance(&self, from: &str, to: &str) -> Option<Millis> {
        self.dist.get(from)?.get(to).copied()
    }

    /// Face on `from` that starts a shortest path to `to`, lowest face on ties.
    pub fn first_hop(&self, from: &str, to: &str) -> Option<FaceId> {
        let total = self.distance(from, to)?;
        self.adj
            .get(from)?
            .iter()
            .filter(|(v, w, _)| self.distance(v, to).is_some_and(|d| d + w == total))
            .map(|&(_, _, f)| f)
            .min()
    }

    /// FIB entries for `node`: `(prefix, face, cost)`, at most one per
    /// (prefix, face), keeping the lowest cost.
    pub fn fib_entries(
        &self,
        node: &str,
        announcements: &BTreeMap<Name, BTreeSet<String>>,
    ) -> Vec<(Name, FaceId, u64)> {
        let mut out = Vec::new();
        for (prefix, announcers) in announcements {
            let mut best: BTreeMap<FaceId, u64> = BTreeMap::new();
            for a in announcers {
                let hop = if a == node {
                    Some((APP_FACE, 0))
                } else {
                    self.first_hop(node, a).zip(self.distance(node, a))
                };
                if let Some((face, cost)) = hop {
                    let e = best.entry(face).or_insert(cost);
                    *e = (*e).min(cost);
                }
            }
            out.extend(best.into_iter().map(|(f, c)| (prefix.clone(), f, c)));
        }
        out
    }
}
