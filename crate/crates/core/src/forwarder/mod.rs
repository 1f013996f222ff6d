// SPDX-License-Identifier: Apache-2.0

//! Per-node forwarding engine: FIB longest-prefix match, PIT aggregation and
//! timeout, a freshness-aware content store, and a pluggable strategy that
//! picks among several upstreams announcing the same prefix.

mod cs;
mod fib;
mod pit;
mod strategy;

use std::fmt::{self, Write as _};

pub use cs::ContentStore;
pub use fib::{Fib, NextHop};
pub use pit::{Pit, PitEntry};
pub use strategy::{BestCost, RoundRobin, Strategy, StrategyKind};

use crate::name::Name;
use crate::wire::{ContentType, DataPacket, Interest};
use crate::Millis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FaceId(pub u32);

/// Face connecting a forwarder to its local application (client app, gateway).
pub const APP_FACE: FaceId = FaceId(0);

impl fmt::Display for FaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub const DEFAULT_CS_CAPACITY: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Emission {
    Forward { face: FaceId, interest: Interest },
    Reply { face: FaceId, data: DataPacket },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterestDisposition {
    CacheHit,
    Aggregated,
    LoopDropped,
    Forwarded(FaceId),
    NoRoute,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterestOutcome {
    pub disposition: InterestDisposition,
    pub emissions: Vec<Emission>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataDisposition {
    Satisfied { cached: bool },
    Unsolicited,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataOutcome {
    pub disposition: DataDisposition,
    pub emissions: Vec<Emission>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ForwarderCounters {
    pub interests_in: u64,
    pub interests_forwarded: u64,
    pub aggregated: u64,
    pub loops_dropped: u64,
    pub no_route: u64,
    pub data_in: u64,
    pub data_sent: u64,
    pub unsolicited: u64,
    pub pit_expired: u64,
}

/// Forwarding state of one node. Single-threaded; driven by the simulator.
#[derive(Debug)]
pub struct Forwarder {
    pub fib: Fib,
    pub pit: Pit,
    pub cs: ContentStore,
    strategy: Box<dyn Strategy>,
    counters: ForwarderCounters,
}

impl Forwarder {
    pub fn new(strategy: StrategyKind, cs_capacity: usize) -> Self {
        Forwarder {
            fib: Fib::new(),
            pit: Pit::new(),
            cs: ContentStore::new(cs_capacity),
            strategy: strategy.build(),
            counters: ForwarderCounters::default(),
        }
    }

    pub fn with_strategy(strategy: Box<dyn Strategy>, cs_capacity: usize) -> Self {
        Forwarder {
            fib: Fib::new(),
            pit: Pit::new(),
            cs: ContentStore::new(cs_capacity),
            strategy,
            counters: ForwarderCounters::default(),
        }
    }

    pub fn strategy_kind(&self) -> StrategyKind {
        self.strategy.kind()
    }

    pub fn counters(&self) -> ForwarderCounters {
        self.counters
    }

    pub fn on_interest(
        &mut self,
        in_face: FaceId,
        interest: &Interest,
        now: Millis,
    ) -> InterestOutcome {
        self.counters.interests_in += 1;
        let name = &interest.name;

        if let Some(data) = self.cs.lookup(name, now) {
            return InterestOutcome {
                disposition: InterestDisposition::CacheHit,
                emissions: vec![Emission::Reply {
                    face: in_face,
                    data,
                }],
            };
        }

        let expiry = now + interest.lifetime_ms;
        if let Some(entry) = self.pit.get(name) {
            if entry.nonces.contains(&interest.nonce) {
                self.counters.loops_dropped += 1;
                return outcome(InterestDisposition::LoopDropped, vec![]);
            }
            self.pit.aggregate(name, in_face, interest.nonce, expiry);
            self.counters.aggregated += 1;
            return outcome(InterestDisposition::Aggregated, vec![]);
        }

        let chosen = self
            .fib
            .lpm_lookup(name)
            .and_then(|(prefix, hops)| self.strategy.select(prefix, hops, in_face));
        let Some(face) = chosen else {
            self.counters.no_route += 1;
            self.counters.data_sent += 1;
            return outcome(
                InterestDisposition::NoRoute,
                vec![Emission::Reply {
                    face: in_face,
                    data: DataPacket::no_route(name.clone()),
                }],
            );
        };

        self.pit
            .insert(name.clone(), in_face, interest.nonce, expiry);
        self.counters.interests_forwarded += 1;
        outcome(
            InterestDisposition::Forwarded(face),
            vec![Emission::Forward {
                face,
                interest: interest.clone(),
            }],
        )
    }

    pub fn on_data(&mut self, _in_face: FaceId, data: &DataPacket, now: Millis) -> DataOutcome {
        self.counters.data_in += 1;
        let Some(entry) = self.pit.remove(&data.name) else {
            self.counters.unsolicited += 1;
            return DataOutcome {
                disposition: DataDisposition::Unsolicited,
                emissions: vec![],
            };
        };
        // Zero-freshness and negative replies are answers for one requester only.
        let cacheable = data.content_type == ContentType::Blob && data.freshness_ms > 0;
        if cacheable {
            self.cs.insert(data.clone(), now);
        }
        let emissions: Vec<Emission> = entry
            .in_faces
            .iter()
            .map(|&face| Emission::Reply {
                face,
                data: data.clone(),
            })
            .collect();
        self.counters.data_sent += emissions.len() as u64;
        DataOutcome {
            disposition: DataDisposition::Satisfied {
                cached: cacheable && self.cs.capacity() > 0,
            },
            emissions,
        }
    }

    /// Removes PIT entries with expiry at or before `now`, returning their
    /// names and downstream faces in expiry order.
    pub fn on_timeout(&mut self, now: Millis) -> Vec<(Name, PitEntry)> {
        let expired = self.pit.expire(now);
        self.counters.pit_expired += expired.len() as u64;
        expired
    }

    /// Forgets a face that no longer exists.
    pub fn remove_face(&mut self, face: FaceId) {
        self.fib.remove_face(face);
        self.pit.remove_face(face);
    }

    /// Human-readable dump of FIB, PIT, content store and counters.
    pub fn report(&self, now: Millis) -> String {
        let mut out = String::new();
        writeln!(out, "strategy={}", self.strategy.kind()).unwrap();
        for (prefix, hops) in self.fib.iter() {
            for h in hops {
                writeln!(out, "fib prefix={} face={} cost={}", prefix, h.face, h.cost).unwrap();
            }
        }
        for (name, e) in self.pit.iter() {
            let faces: Vec<String> = e.in_faces.iter().map(|f| f.to_string()).collect();
            writeln!(
                out,
                "pit name={} in_faces={} nonces={} expiry={}",
                name,
                faces.join(","),
                e.nonces.len(),
                e.expiry
            )
            .unwrap();
        }
        for (data, inserted_at) in self.cs.entries_lru() {
            let fresh = now.saturating_sub(inserted_at) <= data.freshness_ms;
            writeln!(
                out,
                "cs name={} bytes={} inserted_at={} freshness_ms={} fresh={}",
                data.name,
                data.content.len(),
                inserted_at,
                data.freshness_ms,
                fresh
            )
            .unwrap();
        }
        let c = &self.counters;
        writeln!(
            out,
            "counters cs_hits={} cs_misses={} cs_evictions={} forwarded={} aggregated={} loops={} no_route={} unsolicited={} pit_expired={}",
            self.cs.hits(),
            self.cs.misses(),
            self.cs.evictions(),
            c.interests_forwarded,
            c.aggregated,
            c.loops_dropped,
            c.no_route,
            c.unsolicited,
            c.pit_expired
        )
        .unwrap();
        out
    }
}

fn outcome(disposition: InterestDisposition, emissions: Vec<Emission>) -> InterestOutcome {
    InterestOutcome {
        disposition,
        emissions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> Name {
        Name::parse(s).unwrap()
    }

    fn fwd() -> Forwarder {
        let mut f = Forwarder::new(StrategyKind::BestCost, 8);
        f.fib.register(n("/ndn/k8s/compute"), FaceId(9), 5);
        f
    }

    fn interest(name: &str, nonce: u32) -> Interest {
        Interest::new(n(name), nonce)
    }

    #[test]
    fn forwards_and_creates_pit_entry() {
        let mut f = fwd();
        let out = f.on_interest(FaceId(1), &interest("/ndn/k8s/compute/x", 1), 0);
        assert_eq!(out.disposition, InterestDisposition::Forwarded(FaceId(9)));
        assert_eq!(f.pit.get(&n("/ndn/k8s/compute/x")).unwrap().expiry, 4000);
    }

    #[test]
    fn aggregation_then_fan_out() {
        let mut f = fwd();
        let a = f.on_interest(FaceId(1), &interest("/ndn/k8s/compute/x", 1), 0);
        let b = f.on_interest(FaceId(2), &interest("/ndn/k8s/compute/x", 2), 10);
        assert_eq!(a.emissions.len(), 1);
        assert_eq!(b.disposition, InterestDisposition::Aggregated);
        assert!(b.emissions.is_empty());
        let e = f.pit.get(&n("/ndn/k8s/compute/x")).unwrap();
        assert_eq!(e.in_faces.iter().map(|f| f.0).collect::<Vec<_>>(), [1, 2]);

        let data = DataPacket::new(n("/ndn/k8s/compute/x"), b"id".to_vec(), 0);
        let out = f.on_data(FaceId(9), &data, 20);
        assert_eq!(out.emissions.len(), 2);
        assert!(f.pit.is_empty());
    }

    #[test]
    fn same_nonce_is_a_loop() {
        let mut f = fwd();
        f.on_interest(FaceId(1), &interest("/ndn/k8s/compute/x", 7), 0);
        let out = f.on_interest(FaceId(2), &interest("/ndn/k8s/compute/x", 7), 1);
        assert_eq!(out.disposition, InterestDisposition::LoopDropped);
        assert!(out.emissions.is_empty());
        assert_eq!(f.counters().loops_dropped, 1);
    }

    #[test]
    fn cache_hit_short_circuits() {
        let mut f = fwd();
        f.on_interest(FaceId(1), &interest("/ndn/k8s/compute/x", 1), 0);
        f.on_data(
            FaceId(9),
            &DataPacket::new(n("/ndn/k8s/compute/x"), b"r".to_vec(), 1000),
            5,
        );
        let out = f.on_interest(FaceId(3), &interest("/ndn/k8s/compute/x", 2), 10);
        assert_eq!(out.disposition, InterestDisposition::CacheHit);
        assert!(matches!(
            &out.emissions[..],
            [Emission::Reply {
                face: FaceId(3),
                ..
            }]
        ));
        assert_eq!(f.counters().interests_forwarded, 1);
    }

    #[test]
    fn zero_freshness_not_cached() {
        let mut f = fwd();
        f.on_interest(FaceId(1), &interest("/ndn/k8s/compute/x", 1), 0);
        let out = f.on_data(
            FaceId(9),
            &DataPacket::new(n("/ndn/k8s/compute/x"), b"r".to_vec(), 0),
            5,
        );
        assert_eq!(
            out.disposition,
            DataDisposition::Satisfied { cached: false }
        );
        assert!(f.cs.is_empty());
    }

    #[test]
    fn no_route_replies_nack() {
        let mut f = fwd();
        let out = f.on_interest(FaceId(1), &interest("/elsewhere", 1), 0);
        assert_eq!(out.disposition, InterestDisposition::NoRoute);
        match &out.emissions[..] {
            [Emission::Reply { face, data }] => {
                assert_eq!(*face, FaceId(1));
                assert_eq!(data.content_type, ContentType::NoRoute);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(f.pit.is_empty());
    }

    #[test]
    fn never_forwards_back_on_in_face() {
        let mut f = fwd();
        let out = f.on_interest(FaceId(9), &interest("/ndn/k8s/compute/x", 1), 0);
        assert_eq!(out.disposition, InterestDisposition::NoRoute);
    }

    #[test]
    fn unsolicited_data_dropped() {
        let mut f = fwd();
        let out = f.on_data(FaceId(9), &DataPacket::new(n("/x"), vec![], 10), 0);
        assert_eq!(out.disposition, DataDisposition::Unsolicited);
        assert!(out.emissions.is_empty());
        assert_eq!(f.counters().unsolicited, 1);
    }

    #[test]
    fn timeout_drains_pit() {
        let mut f = fwd();
        f.on_interest(FaceId(1), &interest("/ndn/k8s/compute/x", 1), 0);
        assert!(f.on_timeout(3999).is_empty());
        assert_eq!(f.on_timeout(4000).len(), 1);
        assert!(f.pit.is_empty());
    }

    #[test]
    fn report_lists_fib() {
        let f = fwd();
        let r = f.report(0);
        assert!(
            r.contains("fib prefix=/ndn/k8s/compute face=9 cost=5"),
            "{r}"
        );
    }
}
