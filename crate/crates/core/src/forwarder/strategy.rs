// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::{FaceId, NextHop};
use crate::name::Name;

/// Chooses one upstream face among the FIB next hops for a prefix.
///
/// Implementations must be deterministic given the same FIB contents and
/// the same sequence of calls.
pub trait Strategy: Send + fmt::Debug {
    fn kind(&self) -> StrategyKind;

    /// `hops` is sorted by `(cost, face)`. The Interest's incoming face is never chosen.
    fn select(&mut self, prefix: &Name, hops: &[NextHop], in_face: FaceId) -> Option<FaceId>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StrategyKind {
    #[default]
    BestCost,
    RoundRobin,
}

impl StrategyKind {
    pub fn build(self) -> Box<dyn Strategy> {
        match self {
            StrategyKind::BestCost => Box::new(BestCost),
            StrategyKind::RoundRobin => Box::new(RoundRobin::default()),
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StrategyKind::BestCost => "best-cost",
            StrategyKind::RoundRobin => "round-robin",
        })
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "best-cost" | "bestcost" => Ok(StrategyKind::BestCost),
            "round-robin" | "roundrobin" => Ok(StrategyKind::RoundRobin),
            other => Err(format!("unknown strategy {other:?}")),
        }
    }
}

/// Minimum cost face; ties go to the lowest face id.
#[derive(Debug, Clone, Copy, Default)]
pub struct BestCost;

impl Strategy for BestCost {
    fn kind(&self) -> StrategyKind {
        StrategyKind::BestCost
    }

    fn select(&mut self, _prefix: &Name, hops: &[NextHop], in_face: FaceId) -> Option<FaceId> {
        hops.iter()
            .filter(|h| h.face != in_face)
            .min_by_key(|h| (h.cost, h.face))
            .map(|h| h.face)
    }
}

/// Rotates over the eligible faces of each prefix independently.
#[derive(Debug, Clone, Default)]
pub struct RoundRobin {
    cursors: BTreeMap<Name, usize>,
}

impl Strategy for RoundRobin {
    fn kind(&self) -> StrategyKind {
        StrategyKind::RoundRobin
    }

    fn select(&mut self, prefix: &Name, hops: &[NextHop], in_face: FaceId) -> Option<FaceId> {
        let eligible: Vec<FaceId> = hops
            .iter()
            .map(|h| h.face)
            .filter(|&f| f != in_face)
            .collect();
        if eligible.is_empty() {
            return None;
        }
        let cursor = self.cursors.entry(prefix.clone()).or_insert(0);
        let face = eligible[*cursor % eligible.len()];
        *cursor += 1;
        Some(face)
    }
}
