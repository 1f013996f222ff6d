// SPDX-License-Identifier: Apache-2.0

//! Aggregate simulation metrics.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::forwarder::InterestDisposition;
use crate::gateway::JobStatus;
use crate::name::Name;
use crate::Millis;

use super::log::{LogEntry, LogRecord, PacketKind, RequestKind, RequestOutcome};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClusterMetrics {
    pub jobs_submitted: u64,
    pub jobs_completed: u64,
    pub jobs_failed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestMetrics {
    pub client: String,
    pub kind: RequestKind,
    pub name: Name,
    pub issued_at: Millis,
    /// `None` while the request is outstanding.
    pub outcome: Option<(RequestOutcome, Millis)>,
    /// Cluster whose gateway answered the first Interest, `-` otherwise.
    pub placement: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metrics {
    pub interests_sent: u64,
    pub data_sent: u64,
    pub packets_by_node: BTreeMap<String, u64>,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub no_route: u64,
    pub pit_expired: u64,
    pub clusters: BTreeMap<String, ClusterMetrics>,
    pub requests: BTreeMap<u64, RequestMetrics>,
}

impl Metrics {
    /// Recomputes every metric from the event log alone.
    pub fn from_log(log: &[LogEntry]) -> Self {
        let mut m = Metrics::default();
        let mut gateway_seen: BTreeMap<(Name, u32), String> = BTreeMap::new();
        let mut primary: BTreeMap<u64, (Name, u32)> = BTreeMap::new();
        for e in log {
            match &e.record {
                LogRecord::Send { node, kind, .. } => {
                    match kind {
                        PacketKind::Interest => m.interests_sent += 1,
                        PacketKind::Data => m.data_sent += 1,
                    }
                    *m.packets_by_node.entry(node.clone()).or_default() += 1;
                }
                LogRecord::InterestIn { disposition, .. } => match disposition {
                    InterestDisposition::CacheHit => m.cache_hits += 1,
                    InterestDisposition::NoRoute => {
                        m.cache_misses += 1;
                        m.no_route += 1;
                    }
                    _ => m.cache_misses += 1,
                },
                LogRecord::PitExpired { .. } => m.pit_expired += 1,
                LogRecord::Gateway {
                    node,
                    name,
                    nonce,
                    action,
                } => {
                    gateway_seen
                        .entry((name.clone(), *nonce))
                        .or_insert_with(|| node.clone());
                    if action.starts_with("submit") && action.ends_with("created=true") {
                        m.clusters.entry(node.clone()).or_default().jobs_submitted += 1;
                    }
                }
                LogRecord::Job { node, status, .. } => {
                    let c = m.clusters.entry(node.clone()).or_default();
                    match status {
                        JobStatus::Completed => c.jobs_completed += 1,
                        JobStatus::Failed => c.jobs_failed += 1,
                        _ => {}
                    }
                }
                LogRecord::RequestIssued {
                    client,
                    req,
                    kind,
                    name,
                    nonce,
                } => {
                    primary.insert(*req, (name.clone(), *nonce));
                    m.requests.insert(
                        *req,
                        RequestMetrics {
                            client: client.clone(),
                            kind: *kind,
                            name: name.clone(),
                            issued_at: e.at,
                            outcome: None,
                            placement: "-".into(),
                        },
                    );
                }
                LogRecord::RequestDone {
                    req,
                    outcome,
                    latency_ms,
                    ..
                } => {
                    if let Some(r) = m.requests.get_mut(req) {
                        r.outcome = Some((outcome.clone(), *latency_ms));
                        if let Some(key) = primary.get(req) {
                            if let Some(c) = gateway_seen.get(key) {
                                r.placement = c.clone();
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        m
    }

    pub fn completed(&self) -> impl Iterator<Item = (&u64, &RequestMetrics)> {
        self.requests.iter().filter(|(_, r)| r.outcome.is_some())
    }

    pub fn cache_hit_ratio(&self) -> f64 {
        let total = self.cache_hits + self.cache_misses;
        if total == 0 {
            0.0
        } else {
            self.cache_hits as f64 / total as f64
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let done = self.completed().count();
        let ok = self
            .completed()
            .filter(|(_, r)| r.outcome.as_ref().is_some_and(|(o, _)| o.is_ok()))
            .count();
        let latencies: Vec<Millis> = self
            .completed()
            .filter_map(|(_, r)| r.outcome.as_ref().map(|o| o.1))
            .collect();
        writeln!(
            out,
            "requests={} completed={} ok={} failed={}",
            self.requests.len(),
            done,
            ok,
            done - ok
        )
        .unwrap();
        let mean = if latencies.is_empty() {
            0.0
        } else {
            latencies.iter().sum::<u64>() as f64 / latencies.len() as f64
        };
        writeln!(
            out,
            "latency_ms_mean={mean:.3} latency_ms_max={}",
            latencies.iter().max().copied().unwrap_or(0)
        )
        .unwrap();
        writeln!(
            out,
            "interests_sent={} data_sent={}",
            self.interests_sent, self.data_sent
        )
        .unwrap();
        writeln!(
            out,
            "cs_hits={} cs_misses={} cs_hit_ratio={:.4}",
            self.cache_hits,
            self.cache_misses,
            self.cache_hit_ratio()
        )
        .unwrap();
        writeln!(
            out,
            "no_route={} pit_expired={}",
            self.no_route, self.pit_expired
        )
        .unwrap();
        for (node, n) in &self.packets_by_node {
            writeln!(out, "node={node} packets_sent={n}").unwrap();
        }
        for (c, cm) in &self.clusters {
            writeln!(
                out,
                "cluster={c} jobs_submitted={} jobs_completed={} jobs_failed={}",
                cm.jobs_submitted, cm.jobs_completed, cm.jobs_failed
            )
            .unwrap();
        }
        for (id, r) in &self.requests {
            let (outcome, latency) = match &r.outcome {
                Some((o, l)) => (o.to_string().replace('\n', " "), l.to_string()),
                None => ("pending".into(), "-".into()),
            };
            writeln!(
                out,
                "request={id} client={} kind={} placement={} latency_ms={latency} name={} outcome={outcome}",
                r.client, r.kind, r.placement, r.name
            )
            .unwrap();
        }
        out
    }
}
