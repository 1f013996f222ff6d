// SPDX-License-Identifier: Apache-2.0

//! Deterministic discrete-event simulation of an NDN overlay with compute
//! clusters.
//!
//! Events are ordered by `(time, priority, sequence)`. Internal events
//! (packet arrivals, timeouts, job transitions) have priority 0; scripted
//! actions have priority 1 and so observe every internal event of the same
//! millisecond. Every internal delay is at least 1 ms, which keeps causes
//! strictly before their effects.

pub mod log;
pub mod metrics;
pub mod routing;
pub mod script;
pub mod synth;
pub mod topology;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datalake::{
    manifest_name, segment_name, DataLake, DatasetManifest, LakeRequest, DEFAULT_SEGMENT_SIZE,
};
use crate::digest::Digest;
use crate::forwarder::{Emission, FaceId, Forwarder, InterestDisposition, APP_FACE};
use crate::gateway::{Gateway, GatewayResponse, JobStatus, ValidationRegistry};
use crate::name::{compute_prefix, status_prefix, JobId, Name};
use crate::orchestrator::{AppRegistry, ClusterResources, Orchestrator, RunPlan, ServiceHandler};
use crate::wire::{
    decode_packet, encode_data, encode_interest, ContentType, DataPacket, Interest, Packet,
};
use crate::Millis;

pub use self::log::{LogEntry, LogRecord, PacketKind, RequestKind, RequestOutcome};
pub use self::metrics::{ClusterMetrics, Metrics, RequestMetrics};
pub use self::routing::RouteTable;
pub use self::script::{
    JobRef, PublishSource, ScriptAction, ScriptCommand, ScriptError, TopologyChange, Workload,
};
pub use self::topology::{ConfigError, NodeKind, NodeSpec, TopologyConfig};

const PRIO_INTERNAL: u8 = 0;
const PRIO_SCRIPT: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkId(pub u32);

#[derive(Debug, Clone)]
struct Link {
    a: String,
    b: String,
    latency: Millis,
    face_a: FaceId,
    face_b: FaceId,
}

impl Link {
    /// The far end of the link as seen from `node`, with the face there.
    fn peer_of(&self, node: &str) -> (&str, FaceId) {
        if self.a == node {
            (&self.b, self.face_b)
        } else {
            (&self.a, self.face_a)
        }
    }
}

#[derive(Debug)]
enum Event {
    Script {
        action: ScriptAction,
        req: Option<u64>,
    },
    Arrival {
        link: LinkId,
        to: String,
        incarnation: u64,
        face: FaceId,
        bytes: Vec<u8>,
    },
    PitCheck {
        node: String,
        incarnation: u64,
    },
    JobAdmission {
        node: String,
        incarnation: u64,
        job: JobId,
    },
    JobCompletion {
        node: String,
        incarnation: u64,
        job: JobId,
    },
}

#[derive(Debug)]
struct ClusterState {
    gateway: Gateway,
    orch: Orchestrator,
    lake: DataLake,
    startup_ms: Millis,
    running: BTreeMap<JobId, RunPlan>,
}

#[derive(Debug)]
struct Node {
    spec: NodeSpec,
    incarnation: u64,
    fwd: Forwarder,
    faces: BTreeMap<FaceId, LinkId>,
    next_face: u32,
    rng: ChaCha8Rng,
    pit_check_at: Option<Millis>,
    cluster: Option<Box<ClusterState>>,
}

#[derive(Debug)]
enum Work {
    Interest(String, FaceId, Interest),
    Data(String, FaceId, DataPacket),
}

#[derive(Debug, Clone)]
struct FetchState {
    dataset: Name,
    manifest: Option<DatasetManifest>,
    segments: BTreeMap<u64, Vec<u8>>,
}

/// A client-issued request and its outcome.
#[derive(Debug, Clone)]
pub struct RequestRecord {
    pub id: u64,
    pub client: String,
    pub kind: RequestKind,
    pub issued_at: Millis,
    /// Name and nonce of the first Interest sent for this request.
    pub primary: Option<(Name, u32)>,
    /// Outcome and completion time.
    pub outcome: Option<(RequestOutcome, Millis)>,
    pub job_id: Option<JobId>,
    /// Reassembled dataset for a successful fetch; raw content otherwise.
    pub payload: Option<Vec<u8>>,
    /// Wire encodings of every Interest this request sent, in order.
    pub interests: Vec<Vec<u8>>,
    pub placement: String,
    label: Option<String>,
    fetch: Option<FetchState>,
}

#[derive(Debug, Default, Clone, Copy)]
struct Retired {
    cs_hits: u64,
    cs_misses: u64,
    no_route: u64,
    pit_expired: u64,
}

/// Read-only view of one cluster.
#[derive(Debug, Clone, Copy)]
pub struct ClusterView<'a> {
    pub gateway: &'a Gateway,
    pub orchestrator: &'a Orchestrator,
    pub lake: &'a DataLake,
}

#[derive(Debug)]
pub struct Simulation {
    seed: u64,
    now: Millis,
    next_seq: u64,
    current_event: u64,
    queue: BTreeMap<(Millis, u8, u64), Event>,
    nodes: BTreeMap<String, Node>,
    links: BTreeMap<LinkId, Link>,
    next_link: u32,
    next_incarnation: u64,
    announcements: BTreeMap<Name, BTreeSet<String>>,
    routes: RouteTable,
    requests: BTreeMap<u64, RequestRecord>,
    next_request: u64,
    waiting: BTreeMap<(String, Name), Vec<u64>>,
    labels: BTreeMap<String, JobId>,
    gateway_seen: BTreeMap<(Name, u32), String>,
    sent: BTreeMap<String, u64>,
    interests_sent: u64,
    data_sent: u64,
    retired: Retired,
    departed: Vec<(String, Gateway)>,
    log: Vec<LogEntry>,
    capture: Option<Vec<Vec<u8>>>,
}

/// Deterministic filler bytes for synthetic datasets.
pub fn synthetic_payload(name: &Name, len: u64) -> Vec<u8> {
    let seed = Digest::of(name.to_uri().as_bytes());
    let mut rng = ChaCha8Rng::from_seed(*seed.as_bytes());
    let mut out = vec![0u8; len as usize];
    rng.fill_bytes(&mut out);
    out
}

fn node_rng(seed: u64, id: &str) -> ChaCha8Rng {
    let d = Digest::of(id.as_bytes());
    let mut head = [0u8; 8];
    head.copy_from_slice(&d.as_bytes()[..8]);
    ChaCha8Rng::seed_from_u64(seed ^ u64::from_be_bytes(head))
}

fn build_cluster(spec: &NodeSpec) -> Result<Box<ClusterState>, String> {
    let c = spec.cluster.as_ref().ok_or("not a cluster")?;
    let apps = AppRegistry::standard(&c.apps, c.blast_model.clone())?;
    Ok(Box::new(ClusterState {
        gateway: Gateway::new(ValidationRegistry::with_defaults()),
        orch: Orchestrator::new(ClusterResources::new(c.cpu, c.mem_gb), apps),
        lake: DataLake::new(DEFAULT_SEGMENT_SIZE),
        startup_ms: c.startup_ms,
        running: BTreeMap::new(),
    }))
}

impl Simulation {
    pub fn new(config: &TopologyConfig, seed: u64) -> Result<Self, ConfigError> {
        let mut sim = Simulation {
            seed,
            now: 0,
            next_seq: 0,
            current_event: 0,
            queue: BTreeMap::new(),
            nodes: BTreeMap::new(),
            links: BTreeMap::new(),
            next_link: 0,
            next_incarnation: 0,
            announcements: BTreeMap::new(),
            routes: RouteTable::default(),
            requests: BTreeMap::new(),
            next_request: 1,
            waiting: BTreeMap::new(),
            labels: BTreeMap::new(),
            gateway_seen: BTreeMap::new(),
            sent: BTreeMap::new(),
            interests_sent: 0,
            data_sent: 0,
            retired: Retired::default(),
            departed: Vec::new(),
            log: Vec::new(),
            capture: None,
        };
        for n in &config.nodes {
            sim.add_node(n.clone())
                .map_err(|e| ConfigError::new(0, e))?;
        }
        for l in &config.links {
            sim.add_link(&l.a, &l.b, l.latency_ms)
                .map_err(|e| ConfigError::new(0, e))?;
        }
        for a in &config.announcements {
            sim.insert_announcement(&a.node, a.prefix.clone());
        }
        for d in &config.datasets {
            let lake = &mut sim.cluster_mut(&d.node).expect("validated cluster").lake;
            lake.publish(
                d.name.clone(),
                synthetic_payload(&d.name, d.stored_bytes),
                d.declared_bytes,
                false,
            )
            .map_err(|e| ConfigError::new(0, format!("dataset {}: {e}", d.name)))?;
            sim.insert_announcement(&d.node, d.name.clone());
        }
        sim.recompute_routes();
        Ok(sim)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn now(&self) -> Millis {
        self.now
    }

    /// Keeps a copy of every packet placed on a link.
    pub fn enable_capture(&mut self) {
        self.capture.get_or_insert_with(Vec::new);
    }

    pub fn captured(&self) -> &[Vec<u8>] {
        self.capture.as_deref().unwrap_or_default()
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &str> {
        self.nodes.keys().map(String::as_str)
    }

    pub fn node_kind(&self, id: &str) -> Option<NodeKind> {
        self.nodes.get(id).map(|n| n.spec.kind)
    }

    pub fn forwarder(&self, id: &str) -> Option<&Forwarder> {
        self.nodes.get(id).map(|n| &n.fwd)
    }

    pub fn routes(&self) -> &RouteTable {
        &self.routes
    }

    /// Links as `(a, b, latency, face at a, face at b)`.
    pub fn links(&self) -> impl Iterator<Item = (&str, &str, Millis, FaceId, FaceId)> {
        self.links
            .values()
            .map(|l| (l.a.as_str(), l.b.as_str(), l.latency, l.face_a, l.face_b))
    }

    pub fn cluster(&self, id: &str) -> Option<ClusterView<'_>> {
        self.nodes.get(id)?.cluster.as_deref().map(|c| ClusterView {
            gateway: &c.gateway,
            orchestrator: &c.orch,
            lake: &c.lake,
        })
    }

    fn cluster_mut(&mut self, id: &str) -> Option<&mut ClusterState> {
        self.nodes.get_mut(id)?.cluster.as_deref_mut()
    }

    /// Replaces a cluster's data lake, e.g. with one restored from disk.
    pub fn replace_lake(&mut self, id: &str, lake: DataLake) -> bool {
        match self.cluster_mut(id) {
            Some(c) => {
                c.lake = lake;
                true
            }
            None => false,
        }
    }

    /// Gateways of clusters that have left, in departure order.
    pub fn departed(&self) -> impl Iterator<Item = (&str, &Gateway)> {
        self.departed.iter().map(|(id, g)| (id.as_str(), g))
    }

    pub fn request(&self, id: u64) -> Option<&RequestRecord> {
        self.requests.get(&id)
    }

    pub fn requests(&self) -> impl Iterator<Item = &RequestRecord> {
        self.requests.values()
    }

    pub fn label(&self, label: &str) -> Option<&JobId> {
        self.labels.get(label)
    }

    pub fn pending_events(&self) -> usize {
        self.queue.len()
    }

    pub fn next_event_time(&self) -> Option<Millis> {
        self.queue.keys().next().map(|k| k.0)
    }

    // ---- scheduling -------------------------------------------------------

    fn push(&mut self, at: Millis, prio: u8, event: Event) {
        assert!(
            at >= self.now,
            "event scheduled in the past ({at} < {})",
            self.now
        );
        self.next_seq += 1;
        self.queue.insert((at, prio, self.next_seq), event);
    }

    /// Schedules a scripted action. Returns the request id for actions that
    /// issue client requests.
    pub fn schedule(&mut self, at: Millis, action: ScriptAction) -> Option<u64> {
        let req = action.is_request().then(|| {
            let id = self.next_request;
            self.next_request += 1;
            id
        });
        self.push(at, PRIO_SCRIPT, Event::Script { action, req });
        req
    }

    pub fn load_workload(&mut self, workload: &Workload) -> Vec<Option<u64>> {
        workload
            .commands
            .iter()
            .map(|c| self.schedule(c.at, c.action.clone()))
            .collect()
    }

    /// Sends one raw Interest from `client` at time `at`.
    pub fn inject_interest(&mut self, client: &str, name: &Name, at: Millis) -> u64 {
        self.schedule(
            at,
            ScriptAction::Interest {
                client: client.to_string(),
                uri: name.to_uri(),
            },
        )
        .expect("interest is a request")
    }

    /// Processes the next event. Returns false when the queue is empty.
    pub fn step(&mut self) -> bool {
        let Some(((at, _, seq), event)) = self.queue.pop_first() else {
            return false;
        };
        debug_assert!(at >= self.now);
        self.now = at;
        self.current_event = seq;
        self.dispatch(event);
        true
    }

    /// Processes every event at or before `end`, then advances the clock to `end`.
    pub fn run_until(&mut self, end: Millis) {
        while self.next_event_time().is_some_and(|t| t <= end) {
            self.step();
        }
        self.now = self.now.max(end);
    }

    /// Runs until no events remain.
    pub fn run(&mut self) {
        while self.step() {}
    }

    /// Runs until request `req` has an outcome or the clock passes
    /// `deadline`, then finishes the remaining events of that millisecond.
    pub fn run_until_done(&mut self, req: u64, deadline: Millis) -> bool {
        while self.request(req).is_none_or(|r| r.outcome.is_none()) {
            match self.next_event_time() {
                Some(t) if t <= deadline => {
                    self.step();
                }
                _ => break,
            }
        }
        let t = self.now;
        while self.next_event_time() == Some(t) {
            self.step();
        }
        self.request(req).is_some_and(|r| r.outcome.is_some())
    }

    fn record(&mut self, record: LogRecord) {
        self.log.push(LogEntry {
            at: self.now,
            event: self.current_event,
            record,
        });
    }

    // ---- dispatch ---------------------------------------------------------

    fn dispatch(&mut self, event: Event) {
        match event {
            Event::Script { action, req } => self.run_script(action, req),
            Event::Arrival {
                link,
                to,
                incarnation,
                face,
                bytes,
            } => self.on_arrival(link, &to, incarnation, face, &bytes),
            Event::PitCheck { node, incarnation } => self.on_pit_check(&node, incarnation),
            Event::JobAdmission {
                node,
                incarnation,
                job,
            } => self.on_admission(&node, incarnation, job),
            Event::JobCompletion {
                node,
                incarnation,
                job,
            } => self.on_completion(&node, incarnation, job),
        }
    }

    fn alive(&self, node: &str, incarnation: u64) -> bool {
        self.nodes
            .get(node)
            .is_some_and(|n| n.incarnation == incarnation)
    }

    fn on_arrival(&mut self, link: LinkId, to: &str, incarnation: u64, face: FaceId, bytes: &[u8]) {
        if !self.links.contains_key(&link) || !self.alive(to, incarnation) {
            let name = match decode_packet(bytes) {
                Ok(Packet::Interest(i)) => i.name,
                Ok(Packet::Data(d)) => d.name,
                Err(_) => Name::root(),
            };
            self.record(LogRecord::LinkDrop {
                node: to.to_string(),
                face,
                name,
            });
            return;
        }
        let work = match decode_packet(bytes) {
            Ok(Packet::Interest(i)) => Work::Interest(to.to_string(), face, i),
            Ok(Packet::Data(d)) => Work::Data(to.to_string(), face, d),
            Err(e) => {
                self.record(LogRecord::DecodeError {
                    node: to.to_string(),
                    face,
                    error: e.to_string(),
                });
                return;
            }
        };
        self.pump(work);
    }

    /// Drains same-instant work: forwarder decisions and app reactions.
    fn pump(&mut self, first: Work) {
        let mut queue = VecDeque::from([first]);
        let mut touched = BTreeSet::new();
        while let Some(work) = queue.pop_front() {
            match work {
                Work::Interest(node, face, interest) => {
                    let now = self.now;
                    let Some(n) = self.nodes.get_mut(&node) else {
                        continue;
                    };
                    let out = n.fwd.on_interest(face, &interest, now);
                    if matches!(
                        out.disposition,
                        InterestDisposition::Forwarded(_) | InterestDisposition::Aggregated
                    ) {
                        touched.insert(node.clone());
                    }
                    self.record(LogRecord::InterestIn {
                        node: node.clone(),
                        face,
                        name: interest.name.clone(),
                        nonce: interest.nonce,
                        disposition: out.disposition,
                    });
                    for e in out.emissions {
                        self.emit(&node, e, &mut queue);
                    }
                }
                Work::Data(node, face, data) => {
                    let now = self.now;
                    let Some(n) = self.nodes.get_mut(&node) else {
                        continue;
                    };
                    let out = n.fwd.on_data(face, &data, now);
                    self.record(LogRecord::DataIn {
                        node: node.clone(),
                        face,
                        name: data.name.clone(),
                        content_type: data.content_type,
                        disposition: out.disposition,
                    });
                    for e in out.emissions {
                        self.emit(&node, e, &mut queue);
                    }
                }
            }
        }
        for node in touched {
            self.arm_pit_check(&node);
        }
    }

    fn arm_pit_check(&mut self, node: &str) {
        let now = self.now;
        let Some(n) = self.nodes.get_mut(node) else {
            return;
        };
        let Some(next) = n.fwd.pit.next_expiry() else {
            return;
        };
        if n.pit_check_at.is_some_and(|t| t <= next && t >= now) {
            return;
        }
        n.pit_check_at = Some(next);
        let incarnation = n.incarnation;
        let at = next.max(now);
        self.push(
            at,
            PRIO_INTERNAL,
            Event::PitCheck {
                node: node.to_string(),
                incarnation,
            },
        );
    }

    fn emit(&mut self, node: &str, emission: Emission, queue: &mut VecDeque<Work>) {
        match emission {
            Emission::Forward { face, interest } if face == APP_FACE => {
                if let Some(reply) = self.app_interest(node, &interest) {
                    queue.push_back(Work::Data(node.to_string(), APP_FACE, reply));
                }
            }
            Emission::Reply { face, data } if face == APP_FACE => {
                self.app_data(node, &data, queue);
            }
            Emission::Forward { face, interest } => {
                let bytes = encode_interest(&interest);
                self.send(node, face, PacketKind::Interest, interest.name, bytes);
            }
            Emission::Reply { face, data } => {
                let bytes = encode_data(&data);
                self.send(node, face, PacketKind::Data, data.name, bytes);
            }
        }
    }

    fn send(&mut self, node: &str, face: FaceId, kind: PacketKind, name: Name, bytes: Vec<u8>) {
        let Some(link_id) = self
            .nodes
            .get(node)
            .and_then(|n| n.faces.get(&face))
            .copied()
        else {
            return;
        };
        let link = &self.links[&link_id];
        let (peer, peer_face) = link.peer_of(node);
        let peer = peer.to_string();
        let at = self.now + link.latency;
        let incarnation = self.nodes[&peer].incarnation;
        match kind {
            PacketKind::Interest => self.interests_sent += 1,
            PacketKind::Data => self.data_sent += 1,
        }
        *self.sent.entry(node.to_string()).or_default() += 1;
        if let Some(c) = &mut self.capture {
            c.push(bytes.clone());
        }
        self.record(LogRecord::Send {
            node: node.to_string(),
            face,
            peer: peer.clone(),
            kind,
            name,
            bytes: bytes.len(),
        });
        self.push(
            at,
            PRIO_INTERNAL,
            Event::Arrival {
                link: link_id,
                to: peer,
                incarnation,
                face: peer_face,
                bytes,
            },
        );
    }

    fn on_pit_check(&mut self, node: &str, incarnation: u64) {
        if !self.alive(node, incarnation) {
            return;
        }
        let now = self.now;
        let n = self.nodes.get_mut(node).expect("alive");
        n.pit_check_at = None;
        let expired = n.fwd.on_timeout(now);
        for (name, entry) in expired {
            self.record(LogRecord::PitExpired {
                node: node.to_string(),
                name: name.clone(),
            });
            if entry.in_faces.contains(&APP_FACE) {
                if let Some(reqs) = self.waiting.remove(&(node.to_string(), name.clone())) {
                    for r in reqs {
                        self.finish(r, RequestOutcome::Failed("timeout".into()));
                    }
                }
            }
        }
        self.arm_pit_check(node);
    }

    // ---- cluster application ---------------------------------------------

    fn app_interest(&mut self, node: &str, interest: &Interest) -> Option<DataPacket> {
        let now = self.now;
        let c = self.nodes.get_mut(node)?.cluster.as_deref_mut()?;
        let out = c.gateway.handle_interest(interest, now, &c.orch);
        let (reply, action) = match out.response {
            GatewayResponse::Reply(data) => {
                let action = if let Some(id) = &out.submitted {
                    format!("submit job={id} created=true")
                } else if compute_prefix().is_prefix_of(&interest.name)
                    && data.content_type == ContentType::Blob
                {
                    format!(
                        "submit job={} created=false",
                        String::from_utf8_lossy(&data.content)
                    )
                } else if data.content_type == ContentType::Error {
                    format!("error {}", String::from_utf8_lossy(&data.content))
                } else {
                    "status".to_string()
                };
                (data, action)
            }
            GatewayResponse::ToService(ServiceHandler::DataLake, i) => {
                match c.lake.serve(&i.name) {
                    Ok(d) => (d, "lake".to_string()),
                    Err(e) => (
                        DataPacket::error(i.name.clone(), &e.to_string()),
                        format!("lake-error {e}"),
                    ),
                }
            }
            GatewayResponse::ToService(ServiceHandler::Gateway, i) => (
                DataPacket::error(i.name.clone(), "no handler"),
                "error no handler".to_string(),
            ),
        };
        let startup = c.startup_ms;
        let new_job = out.submitted.and_then(|id| {
            let r = c.gateway.job(&id)?;
            Some((
                id,
                r.spec.cpu,
                r.spec.mem_gb,
                r.history.clone(),
                r.error.clone(),
            ))
        });
        self.gateway_seen
            .entry((interest.name.clone(), interest.nonce))
            .or_insert_with(|| node.to_string());
        self.record(LogRecord::Gateway {
            node: node.to_string(),
            name: interest.name.clone(),
            nonce: interest.nonce,
            action,
        });
        if let Some((id, cpu, mem, history, error)) = new_job {
            for (status, _) in history {
                let detail = match status {
                    JobStatus::Failed => error.clone().unwrap_or_default(),
                    _ => String::new(),
                };
                self.record(LogRecord::Job {
                    node: node.to_string(),
                    job: id.clone(),
                    status,
                    cpu,
                    mem,
                    detail,
                });
            }
            self.insert_announcement(node, id.status_name());
            self.insert_announcement(node, id.result_name());
            self.refresh_prefix(&id.status_name());
            self.refresh_prefix(&id.result_name());
            let pending = self
                .cluster(node)
                .and_then(|c| c.gateway.job(&id))
                .map(|r| r.status)
                == Some(JobStatus::Pending);
            if pending {
                let incarnation = self.nodes[node].incarnation;
                self.push(
                    now + startup,
                    PRIO_INTERNAL,
                    Event::JobAdmission {
                        node: node.to_string(),
                        incarnation,
                        job: id,
                    },
                );
            }
        }
        Some(reply)
    }

    fn log_job(&mut self, node: &str, job: &JobId, detail: String) {
        let Some(r) = self.cluster(node).and_then(|c| c.gateway.job(job)) else {
            return;
        };
        let rec = LogRecord::Job {
            node: node.to_string(),
            job: job.clone(),
            status: r.status,
            cpu: r.spec.cpu,
            mem: r.spec.mem_gb,
            detail,
        };
        self.record(rec);
    }

    fn log_ledger(&mut self, node: &str) {
        let Some(c) = self.cluster(node) else { return };
        let r = c.orchestrator.resources();
        self.record(LogRecord::Ledger {
            node: node.to_string(),
            cpu_used: r.cpu_used,
            cpu_total: r.cpu_total,
            mem_used: r.mem_used_gb,
            mem_total: r.mem_total_gb,
        });
    }

    fn on_admission(&mut self, node: &str, incarnation: u64, job: JobId) {
        if !self.alive(node, incarnation) {
            return;
        }
        let c = self.cluster_mut(node).expect("cluster");
        let Some(spec) = c
            .gateway
            .job(&job)
            .filter(|r| r.status == JobStatus::Pending)
            .map(|r| r.spec.clone())
        else {
            return;
        };
        match c.orch.admit(job.clone(), spec) {
            Ok(crate::orchestrator::Admission::Admitted) => self.start_jobs(node, vec![job]),
            Ok(crate::orchestrator::Admission::Queued) => self.record(LogRecord::JobQueued {
                node: node.to_string(),
                job,
            }),
            Err(e) => {
                let now = self.now;
                let c = self.cluster_mut(node).expect("cluster");
                c.gateway
                    .mark_failed(&job, &e.to_string(), now)
                    .expect("pending job");
                self.log_job(node, &job, e.to_string());
            }
        }
        self.log_ledger(node);
    }

    /// Moves admitted jobs to Running and schedules their completion. Jobs
    /// whose inputs are missing fail and free their resources, which may
    /// admit further jobs.
    fn start_jobs(&mut self, node: &str, jobs: Vec<JobId>) {
        let mut todo: VecDeque<JobId> = jobs.into();
        let now = self.now;
        while let Some(job) = todo.pop_front() {
            let incarnation = self.nodes[node].incarnation;
            let c = self.cluster_mut(node).expect("cluster");
            let spec = c
                .gateway
                .job(&job)
                .expect("admitted job has a record")
                .spec
                .clone();
            c.gateway
                .mark_running(&job, now)
                .expect("admitted job is pending");
            let plan = c.orch.run_job(&spec, &c.lake, now);
            match plan {
                Ok(plan) => {
                    c.running.insert(job.clone(), plan);
                    self.log_job(node, &job, format!("completes_at={}", plan.completes_at));
                    self.push(
                        plan.completes_at.max(now + 1),
                        PRIO_INTERNAL,
                        Event::JobCompletion {
                            node: node.to_string(),
                            incarnation,
                            job,
                        },
                    );
                }
                Err(e) => {
                    self.log_job(node, &job, String::new());
                    let c = self.cluster_mut(node).expect("cluster");
                    c.gateway
                        .mark_failed(&job, &e.to_string(), now)
                        .expect("running job");
                    let next = c.orch.release(&job);
                    self.log_job(node, &job, e.to_string());
                    todo.extend(next);
                }
            }
        }
    }

    fn on_completion(&mut self, node: &str, incarnation: u64, job: JobId) {
        if !self.alive(node, incarnation) {
            return;
        }
        let now = self.now;
        let c = self.cluster_mut(node).expect("cluster");
        let Some(plan) = c.running.remove(&job) else {
            return;
        };
        let spec = c.gateway.job(&job).expect("running job").spec.clone();
        let detail = match c.orch.execute(&spec, &c.lake, &plan) {
            Ok(output) => {
                let (stored, declared) = (output.payload.len() as u64, output.declared_size);
                match c.gateway.on_job_completion(&job, output, &mut c.lake, now) {
                    Ok(name) => {
                        self.record(LogRecord::Published {
                            node: node.to_string(),
                            name: name.clone(),
                            stored,
                            declared,
                        });
                        format!("result={name}")
                    }
                    Err(e) => e.to_string(),
                }
            }
            Err(e) => {
                c.gateway
                    .mark_failed(&job, &e.to_string(), now)
                    .expect("running job");
                e.to_string()
            }
        };
        self.log_job(node, &job, detail);
        let next = self.cluster_mut(node).expect("cluster").orch.release(&job);
        self.start_jobs(node, next);
        self.log_ledger(node);
    }

    // ---- client application ----------------------------------------------

    fn issue(&mut self, client: &str, req: u64, name: Name, queue: &mut VecDeque<Work>) {
        let Some(n) = self.nodes.get_mut(client) else {
            return;
        };
        let interest = Interest::new(name.clone(), n.rng.next_u32());
        let r = self.requests.get_mut(&req).expect("request exists");
        r.interests.push(encode_interest(&interest));
        let first = r.primary.is_none();
        if first {
            r.primary = Some((name.clone(), interest.nonce));
            let kind = r.kind;
            self.record(LogRecord::RequestIssued {
                client: client.to_string(),
                req,
                kind,
                name: name.clone(),
                nonce: interest.nonce,
            });
        }
        self.waiting
            .entry((client.to_string(), name))
            .or_default()
            .push(req);
        queue.push_back(Work::Interest(client.to_string(), APP_FACE, interest));
    }

    fn finish(&mut self, req: u64, outcome: RequestOutcome) {
        let now = self.now;
        let Some(r) = self.requests.get_mut(&req) else {
            return;
        };
        if r.outcome.is_some() {
            return;
        }
        r.outcome = Some((outcome.clone(), now));
        r.placement = r
            .primary
            .as_ref()
            .and_then(|k| self.gateway_seen.get(k))
            .cloned()
            .unwrap_or_else(|| "-".into());
        let (client, kind, latency) = (r.client.clone(), r.kind, now - r.issued_at);
        if let (RequestOutcome::Ok(_), Some(label), Some(job)) =
            (&outcome, r.label.clone(), r.job_id.clone())
        {
            self.labels.insert(label, job);
        }
        self.record(LogRecord::RequestDone {
            client,
            req,
            kind,
            outcome,
            latency_ms: latency,
        });
    }

    fn app_data(&mut self, node: &str, data: &DataPacket, queue: &mut VecDeque<Work>) {
        let Some(reqs) = self.waiting.remove(&(node.to_string(), data.name.clone())) else {
            return;
        };
        for req in reqs {
            self.on_response(node, req, data, queue);
        }
    }

    fn on_response(
        &mut self,
        client: &str,
        req: u64,
        data: &DataPacket,
        queue: &mut VecDeque<Work>,
    ) {
        let Some(r) = self.requests.get_mut(&req) else {
            return;
        };
        if r.outcome.is_some() {
            return;
        }
        match data.content_type {
            ContentType::NoRoute => {
                return self.finish(req, RequestOutcome::Failed("no-route".into()))
            }
            ContentType::Error => {
                let msg = String::from_utf8_lossy(&data.content).into_owned();
                return self.finish(req, RequestOutcome::Failed(format!("error: {msg}")));
            }
            ContentType::Blob => {}
        }
        let text = String::from_utf8_lossy(&data.content).into_owned();
        match r.kind {
            RequestKind::Submit => match JobId::parse(&text) {
                Ok(id) => {
                    r.job_id = Some(id.clone());
                    self.finish(req, RequestOutcome::Ok(format!("job_id={id}")));
                }
                Err(_) => self.finish(req, RequestOutcome::Failed(format!("bad ack {text:?}"))),
            },
            RequestKind::Status => {
                r.payload = Some(data.content.clone());
                self.finish(req, RequestOutcome::Ok(text));
            }
            RequestKind::Interest => {
                r.payload = Some(data.content.clone());
                let summary = format!(
                    "type=blob bytes={} digest={}",
                    data.content.len(),
                    data.digest
                );
                self.finish(req, RequestOutcome::Ok(summary));
            }
            RequestKind::Fetch => self.on_fetch_data(client, req, data, queue),
        }
    }

    fn on_fetch_data(
        &mut self,
        client: &str,
        req: u64,
        data: &DataPacket,
        queue: &mut VecDeque<Work>,
    ) {
        let r = self.requests.get_mut(&req).expect("request exists");
        let f = r.fetch.as_mut().expect("fetch state");
        if data.name == manifest_name(&f.dataset) {
            let m = match std::str::from_utf8(&data.content)
                .map_err(|_| ())
                .and_then(|t| DatasetManifest::parse(t).map_err(|_| ()))
            {
                Ok(m) if m.name == f.dataset => m,
                _ => return self.finish(req, RequestOutcome::Failed("bad manifest".into())),
            };
            let count = m.segment_count;
            let dataset = f.dataset.clone();
            f.manifest = Some(m);
            if count == 0 {
                return self.complete_fetch(req);
            }
            for i in 0..count {
                self.issue(client, req, segment_name(&dataset, i), queue);
            }
            return;
        }
        match LakeRequest::parse(&data.name) {
            Some(LakeRequest::Segment(ds, i)) if ds == f.dataset => {
                f.segments.insert(i, data.content.clone());
                let total = f.manifest.as_ref().map_or(0, |m| m.segment_count);
                if f.segments.len() as u64 == total {
                    self.complete_fetch(req);
                }
            }
            _ => {}
        }
    }

    fn complete_fetch(&mut self, req: u64) {
        let r = self.requests.get_mut(&req).expect("request exists");
        let f = r.fetch.as_ref().expect("fetch state");
        let m = f.manifest.as_ref().expect("manifest fetched");
        let segments: Vec<Vec<u8>> = f.segments.values().cloned().collect();
        match crate::datalake::reassemble(m, &segments) {
            Ok(payload) => {
                let summary = format!(
                    "bytes={} declared={} digest={}",
                    payload.len(),
                    m.declared_size,
                    m.digest
                );
                r.payload = Some(payload);
                self.finish(req, RequestOutcome::Ok(summary));
            }
            Err(_) => self.finish(req, RequestOutcome::Failed("digest mismatch".into())),
        }
    }

    // ---- scripted actions --------------------------------------------------

    fn new_request(&mut self, id: u64, client: &str, kind: RequestKind) {
        self.requests.insert(
            id,
            RequestRecord {
                id,
                client: client.to_string(),
                kind,
                issued_at: self.now,
                primary: None,
                outcome: None,
                job_id: None,
                payload: None,
                interests: Vec::new(),
                placement: "-".into(),
                label: None,
                fetch: None,
            },
        );
    }

    /// Fails a request before any Interest leaves the client.
    fn reject(&mut self, req: u64, reason: String) {
        let r = &self.requests[&req];
        self.record(LogRecord::RequestIssued {
            client: r.client.clone(),
            req,
            kind: r.kind,
            name: Name::root(),
            nonce: 0,
        });
        self.finish(req, RequestOutcome::Failed(reason));
    }

    fn resolve_uri(&self, uri: &str) -> Result<Name, String> {
        let text = script::substitute_labels(uri, |l| self.labels.get(l).map(|j| j.to_string()))?;
        Name::parse(&text).map_err(|e| e.to_string())
    }

    fn run_script(&mut self, action: ScriptAction, req: Option<u64>) {
        let (client, target) = match action {
            ScriptAction::Submit { client, uri, label } => {
                let id = req.expect("request id");
                self.new_request(id, &client, RequestKind::Submit);
                self.requests.get_mut(&id).expect("just inserted").label = label;
                (client, Name::parse(&uri).map_err(|e| e.to_string()))
            }
            ScriptAction::Status { client, job } => {
                let id = req.expect("request id");
                self.new_request(id, &client, RequestKind::Status);
                let target = match job {
                    JobRef::Id(j) => Ok(j.status_name()),
                    JobRef::Label(l) => self
                        .labels
                        .get(&l)
                        .map(JobId::status_name)
                        .ok_or(format!("unbound label ${l}")),
                };
                (client, target)
            }
            ScriptAction::Fetch { client, uri } => {
                let id = req.expect("request id");
                self.new_request(id, &client, RequestKind::Fetch);
                let target = self.resolve_uri(&uri);
                if let Ok(ds) = &target {
                    self.requests.get_mut(&id).expect("just inserted").fetch = Some(FetchState {
                        dataset: ds.clone(),
                        manifest: None,
                        segments: BTreeMap::new(),
                    });
                }
                (client, target.map(|ds| manifest_name(&ds)))
            }
            ScriptAction::Interest { client, uri } => {
                let id = req.expect("request id");
                self.new_request(id, &client, RequestKind::Interest);
                let target = self.resolve_uri(&uri);
                (client, target)
            }
            ScriptAction::Publish {
                cluster,
                name,
                source,
                declared,
                digest: _,
            } => return self.publish(&cluster, name, source, declared),
            ScriptAction::Topology(change) => return self.apply_change(change),
        };
        let id = req.expect("request id");
        if self.node_kind(&client) != Some(NodeKind::Client) {
            return self.reject(id, format!("unknown client {client}"));
        }
        match target {
            Ok(name) => {
                let mut queue = VecDeque::new();
                self.issue(&client, id, name, &mut queue);
                while let Some(w) = queue.pop_front() {
                    self.pump(w);
                }
            }
            Err(e) => self.reject(id, e),
        }
    }

    fn publish(&mut self, cluster: &str, name: Name, source: PublishSource, declared: Option<u64>) {
        let payload = match source {
            PublishSource::Synthetic { size } => synthetic_payload(&name, size),
            PublishSource::File { payload, .. } => payload,
        };
        let stored = payload.len() as u64;
        let declared = declared.unwrap_or(stored);
        let Some(c) = self.cluster_mut(cluster) else {
            return self.record(LogRecord::ScriptError {
                detail: format!("publish on {cluster}: not a cluster"),
            });
        };
        match c.lake.publish(name.clone(), payload, declared, false) {
            Ok(_) => {
                self.insert_announcement(cluster, name.clone());
                self.refresh_prefix(&name);
                self.record(LogRecord::Published {
                    node: cluster.to_string(),
                    name,
                    stored,
                    declared,
                })
            }
            Err(e) => self.record(LogRecord::ScriptError {
                detail: format!("publish on {cluster}: {e}"),
            }),
        }
    }

    // ---- topology ---------------------------------------------------------

    fn add_node(&mut self, spec: NodeSpec) -> Result<(), String> {
        if self.nodes.contains_key(&spec.id) {
            return Err(format!("node {} already exists", spec.id));
        }
        let cluster = match spec.kind {
            NodeKind::Cluster => Some(build_cluster(&spec)?),
            _ => None,
        };
        self.next_incarnation += 1;
        let node = Node {
            incarnation: self.next_incarnation,
            fwd: Forwarder::new(spec.strategy, spec.cs_capacity),
            faces: BTreeMap::new(),
            next_face: 1,
            rng: node_rng(self.seed, &spec.id),
            pit_check_at: None,
            cluster,
            spec,
        };
        self.nodes.insert(node.spec.id.clone(), node);
        Ok(())
    }

    fn add_link(&mut self, a: &str, b: &str, latency: Millis) -> Result<(), String> {
        if a == b || latency == 0 {
            return Err("invalid link".into());
        }
        for end in [a, b] {
            if !self.nodes.contains_key(end) {
                return Err(format!("unknown node {end}"));
            }
        }
        if self.link_between(a, b).is_some() {
            return Err(format!("link {a} {b} already exists"));
        }
        let mut alloc = |id: &str| {
            let n = self.nodes.get_mut(id).expect("checked");
            let f = FaceId(n.next_face);
            n.next_face += 1;
            f
        };
        let (face_a, face_b) = (alloc(a), alloc(b));
        let id = LinkId(self.next_link);
        self.next_link += 1;
        self.nodes
            .get_mut(a)
            .expect("checked")
            .faces
            .insert(face_a, id);
        self.nodes
            .get_mut(b)
            .expect("checked")
            .faces
            .insert(face_b, id);
        self.links.insert(
            id,
            Link {
                a: a.to_string(),
                b: b.to_string(),
                latency,
                face_a,
                face_b,
            },
        );
        Ok(())
    }

    fn link_between(&self, a: &str, b: &str) -> Option<LinkId> {
        self.links
            .iter()
            .find(|(_, l)| (l.a == a && l.b == b) || (l.a == b && l.b == a))
            .map(|(id, _)| *id)
    }

    fn remove_link(&mut self, id: LinkId) {
        let l = self.links.remove(&id).expect("link exists");
        for (node, face) in [(&l.a, l.face_a), (&l.b, l.face_b)] {
            if let Some(n) = self.nodes.get_mut(node) {
                n.faces.remove(&face);
                n.fwd.remove_face(face);
            }
        }
    }

    fn insert_announcement(&mut self, node: &str, prefix: Name) {
        if prefix == compute_prefix() {
            self.announcements
                .entry(status_prefix())
                .or_default()
                .insert(node.to_string());
        }
        self.announcements
            .entry(prefix)
            .or_default()
            .insert(node.to_string());
    }

    fn remove_announcement(&mut self, node: &str, prefix: &Name) {
        let mut prefixes = vec![prefix.clone()];
        if *prefix == compute_prefix() {
            prefixes.push(status_prefix());
        }
        for p in prefixes {
            if let Some(set) = self.announcements.get_mut(&p) {
                set.remove(node);
                if set.is_empty() {
                    self.announcements.remove(&p);
                }
            }
        }
    }

    /// Reinstalls the FIB entries for one prefix on every node.
    fn refresh_prefix(&mut self, prefix: &Name) {
        let single: BTreeMap<Name, BTreeSet<String>> = self
            .announcements
            .get(prefix)
            .map(|s| [(prefix.clone(), s.clone())].into())
            .unwrap_or_default();
        for (id, n) in self.nodes.iter_mut() {
            n.fwd.fib.remove_prefix(prefix);
            for (p, face, cost) in self.routes.fib_entries(id, &single) {
                n.fwd.fib.register(p, face, cost);
            }
        }
    }

    /// Recomputes shortest paths and every FIB from scratch.
    fn recompute_routes(&mut self) {
        let mut adj: routing::Adjacency =
            self.nodes.keys().map(|k| (k.clone(), Vec::new())).collect();
        for l in self.links.values() {
            adj.get_mut(&l.a)
                .expect("endpoint")
                .push((l.b.clone(), l.latency, l.face_a));
            adj.get_mut(&l.b)
                .expect("endpoint")
                .push((l.a.clone(), l.latency, l.face_b));
        }
        self.routes = RouteTable::build(adj);
        for (id, n) in self.nodes.iter_mut() {
            n.fwd.fib.clear();
            for (p, face, cost) in self.routes.fib_entries(id, &self.announcements) {
                n.fwd.fib.register(p, face, cost);
            }
        }
    }

    /// Applies a topology change at the current instant and recomputes
    /// every FIB. Dangling or conflicting references are rejected.
    pub fn apply_topology_change(&mut self, change: &TopologyChange) -> Result<(), ConfigError> {
        let detail = self
            .try_change(change)
            .map_err(|e| ConfigError::new(0, e))?;
        self.recompute_routes();
        self.record(LogRecord::Topology { detail });
        Ok(())
    }

    fn apply_change(&mut self, change: TopologyChange) {
        if let Err(e) = self.apply_topology_change(&change) {
            self.record(LogRecord::ScriptError { detail: e.message });
        }
    }

    fn try_change(&mut self, change: &TopologyChange) -> Result<String, String> {
        match change {
            TopologyChange::AddNode(spec) => self
                .add_node(spec.clone())
                .map(|_| format!("add-node {} {}", spec.id, spec.kind)),
            TopologyChange::RemoveNode { id, cluster_only } => {
                if *cluster_only && self.node_kind(id) != Some(NodeKind::Cluster) {
                    Err(format!("{id} is not a cluster"))
                } else if !self.nodes.contains_key(id) {
                    Err(format!("unknown node {id}"))
                } else {
                    self.remove_node(id);
                    Ok(format!("remove-node {id}"))
                }
            }
            TopologyChange::AddLink(l) => self
                .add_link(&l.a, &l.b, l.latency_ms)
                .map(|_| format!("add-link {} {} {}", l.a, l.b, l.latency_ms)),
            TopologyChange::RemoveLink { a, b } => match self.link_between(a, b) {
                Some(id) => {
                    self.remove_link(id);
                    Ok(format!("remove-link {a} {b}"))
                }
                None => Err(format!("no link {a} {b}")),
            },
            TopologyChange::Announce { node, prefix } => {
                if self.node_kind(node) != Some(NodeKind::Cluster) {
                    Err(format!("{node} is not a cluster"))
                } else {
                    self.insert_announcement(node, prefix.clone());
                    Ok(format!("announce {node} {prefix}"))
                }
            }
            TopologyChange::Withdraw { node, prefix } => {
                if !self
                    .announcements
                    .get(prefix)
                    .is_some_and(|s| s.contains(node))
                {
                    return Err(format!("{node} does not announce {prefix}"));
                }
                self.remove_announcement(node, prefix);
                Ok(format!("withdraw {node} {prefix}"))
            }
        }
    }

    fn remove_node(&mut self, id: &str) {
        let now = self.now;
        if let Some(c) = self.cluster_mut(id) {
            let live: Vec<JobId> = c
                .gateway
                .jobs()
                .filter(|r| !r.status.is_terminal())
                .map(|r| r.job_id.clone())
                .collect();
            for j in &live {
                c.gateway
                    .mark_failed(j, "cluster departed", now)
                    .expect("non-terminal job");
            }
            c.running.clear();
            c.orch.evict_all();
            for j in &live {
                self.log_job(id, j, "cluster departed".into());
            }
            self.log_ledger(id);
        }
        let links: Vec<LinkId> = self.nodes[id].faces.values().copied().collect();
        for l in links {
            self.remove_link(l);
        }
        let node = self.nodes.remove(id).expect("exists");
        self.retired.cs_hits += node.fwd.cs.hits();
        self.retired.cs_misses += node.fwd.cs.misses();
        self.retired.no_route += node.fwd.counters().no_route;
        self.retired.pit_expired += node.fwd.counters().pit_expired;
        if let Some(c) = node.cluster {
            self.departed.push((id.to_string(), c.gateway));
        }
        self.announcements.retain(|_, set| {
            set.remove(id);
            !set.is_empty()
        });
        self.waiting.retain(|(client, _), _| client != id);
    }

    // ---- reporting --------------------------------------------------------

    /// Metrics from live state: forwarder counters, gateway records, and
    /// request records.
    pub fn metrics(&self) -> Metrics {
        let mut m = Metrics {
            interests_sent: self.interests_sent,
            data_sent: self.data_sent,
            packets_by_node: self.sent.clone(),
            cache_hits: self.retired.cs_hits,
            cache_misses: self.retired.cs_misses,
            no_route: self.retired.no_route,
            pit_expired: self.retired.pit_expired,
            ..Metrics::default()
        };
        for n in self.nodes.values() {
            m.cache_hits += n.fwd.cs.hits();
            m.cache_misses += n.fwd.cs.misses();
            m.no_route += n.fwd.counters().no_route;
            m.pit_expired += n.fwd.counters().pit_expired;
        }
        let gateways = self
            .nodes
            .iter()
            .filter_map(|(id, n)| n.cluster.as_ref().map(|c| (id.as_str(), &c.gateway)))
            .chain(self.departed());
        for (id, g) in gateways.filter(|(_, g)| g.jobs().next().is_some()) {
            let c = m.clusters.entry(id.to_string()).or_default();
            for r in g.jobs() {
                c.jobs_submitted += 1;
                match r.status {
                    JobStatus::Completed => c.jobs_completed += 1,
                    JobStatus::Failed => c.jobs_failed += 1,
                    _ => {}
                }
            }
        }
        for r in self.requests.values() {
            m.requests.insert(
                r.id,
                RequestMetrics {
                    client: r.client.clone(),
                    kind: r.kind,
                    name: r.primary.as_ref().map_or_else(Name::root, |p| p.0.clone()),
                    issued_at: r.issued_at,
                    outcome: r
                        .outcome
                        .as_ref()
                        .map(|(o, at)| (o.clone(), at - r.issued_at)),
                    placement: r.placement.clone(),
                },
            );
        }
        m
    }

    /// Faces, FIB, PIT, content store and, for clusters, jobs, resources and
    /// lake contents.
    pub fn inspect(&self, id: &str) -> Option<String> {
        let n = self.nodes.get(id)?;
        let mut out = String::new();
        writeln!(out, "node={} kind={} time={}", id, n.spec.kind, self.now).unwrap();
        for (face, link) in &n.faces {
            let l = &self.links[link];
            let (peer, _) = l.peer_of(id);
            writeln!(out, "face id={face} peer={peer} latency_ms={}", l.latency).unwrap();
        }
        out.push_str(&n.fwd.report(self.now));
        if let Some(c) = &n.cluster {
            let r = c.orch.resources();
            writeln!(
                out,
                "resources cpu={}/{} mem={}/{}",
                r.cpu_used, r.cpu_total, r.mem_used_gb, r.mem_total_gb
            )
            .unwrap();
            let queued: Vec<String> = c.orch.queued().map(|j| j.to_string()).collect();
            writeln!(out, "queue [{}]", queued.join(",")).unwrap();
            for j in c.gateway.jobs() {
                writeln!(
                    out,
                    "job id={} status={} app={} cpu={} mem={} submitted_at={}",
                    j.job_id, j.status, j.spec.app, j.spec.cpu, j.spec.mem_gb, j.submitted_at
                )
                .unwrap();
            }
            for m in c.lake.manifests() {
                writeln!(
                    out,
                    "dataset name={} declared={} stored={} segments={} digest={}",
                    m.name, m.declared_size, m.stored_size, m.segment_count, m.digest
                )
                .unwrap();
            }
        }
        Some(out)
    }
}
