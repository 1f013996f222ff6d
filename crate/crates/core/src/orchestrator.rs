// SPDX-License-Identifier: Apache-2.0

//! Mock cluster orchestration: resource accounting, strict FIFO admission,
//! service name resolution, and simulated execution with pluggable duration
//! models.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datalake::DataLake;
use crate::digest::Digest;
use crate::name::{ComputeSpec, JobId, Name};
use crate::Millis;

/// Recorded alignment runtimes and output sizes for four sample runs.
pub const BLAST_TRACE: &str = include_str!("../data/blast_trace.csv");

/// Stored results are capped at this many bytes; the manifest declares the rest.
pub const MAX_STORED_OUTPUT: u64 = 64 * 1024;

pub const DATALAKE_SERVICE: &str = "dl-nfd.ndnk8s.svc.cluster.local";
pub const GATEWAY_SERVICE: &str = "gateway.ndnk8s.svc.cluster.local";

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("exceeds cluster capacity")]
pub struct CapacityExceeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClusterResources {
    pub cpu_total: u32,
    pub mem_total_gb: u32,
    pub cpu_used: u32,
    pub mem_used_gb: u32,
}

impl ClusterResources {
    pub fn new(cpu_total: u32, mem_total_gb: u32) -> Self {
        ClusterResources {
            cpu_total,
            mem_total_gb,
            cpu_used: 0,
            mem_used_gb: 0,
        }
    }

    pub fn fits_ever(&self, spec: &ComputeSpec) -> bool {
        spec.cpu <= self.cpu_total && spec.mem_gb <= self.mem_total_gb
    }

    pub fn fits_now(&self, spec: &ComputeSpec) -> bool {
        self.cpu_used + spec.cpu <= self.cpu_total
            && self.mem_used_gb + spec.mem_gb <= self.mem_total_gb
    }

    fn reserve(&mut self, spec: &ComputeSpec) {
        assert!(self.fits_now(spec), "reservation would overcommit");
        self.cpu_used += spec.cpu;
        self.mem_used_gb += spec.mem_gb;
    }

    /// Panics on underflow: releasing what was never reserved is an accounting bug.
    fn release(&mut self, spec: &ComputeSpec) {
        self.cpu_used = self
            .cpu_used
            .checked_sub(spec.cpu)
            .expect("cpu accounting underflow");
        self.mem_used_gb = self
            .mem_used_gb
            .checked_sub(spec.mem_gb)
            .expect("memory accounting underflow");
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Admitted,
    Queued,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ServiceHandler {
    Gateway,
    DataLake,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0:?} is not of the form <svc>.<namespace>.svc.cluster.local")]
pub struct BadServiceName(pub String);

/// DNS-style service names resolved by exact match.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ServiceRegistry {
    services: BTreeMap<String, ServiceHandler>,
}

impl ServiceRegistry {
    /// Registry with the gateway and data-lake router services.
    pub fn with_defaults() -> Self {
        let mut r = ServiceRegistry::default();
        r.register(GATEWAY_SERVICE, ServiceHandler::Gateway)
            .expect("valid");
        r.register(DATALAKE_SERVICE, ServiceHandler::DataLake)
            .expect("valid");
        r
    }

    pub fn register(
        &mut self,
        dns_name: &str,
        handler: ServiceHandler,
    ) -> Result<(), BadServiceName> {
        let label_ok = |l: &str| {
            !l.is_empty()
                && l.bytes()
                    .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
        };
        let valid = dns_name
            .strip_suffix(".svc.cluster.local")
            .and_then(|rest| rest.split_once('.'))
            .is_some_and(|(svc, ns)| label_ok(svc) && label_ok(ns));
        if !valid {
            return Err(BadServiceName(dns_name.to_string()));
        }
        self.services.insert(dns_name.to_string(), handler);
        Ok(())
    }

    pub fn resolve(&self, dns_name: &str) -> Option<ServiceHandler> {
        self.services.get(dns_name).copied()
    }
}

/// Non-negative rational number `num/den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub const fn new(num: u64, den: u64) -> Self {
        assert!(den > 0);
        Ratio { num, den }
    }

    pub const fn int(n: u64) -> Self {
        Ratio { num: n, den: 1 }
    }

    /// `ceil(self * factor / divisor)` in 128-bit arithmetic.
    fn mul_div_ceil(self, factor: u128, divisor: u128) -> u64 {
        let n = self.num as u128 * factor;
        let d = self.den as u128 * divisor;
        n.div_ceil(d).min(u64::MAX as u128) as u64
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Ratio {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("bad ratio {s:?}");
        let (n, d) = s.split_once('/').unwrap_or((s, "1"));
        let num = n.parse().map_err(|_| bad())?;
        let den: u64 = d.parse().map_err(|_| bad())?;
        if den == 0 {
            return Err(bad());
        }
        Ok(Ratio { num, den })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Estimate {
    pub runtime_ms: Millis,
    /// Output size the model knows about, if any.
    pub output_bytes: Option<u64>,
}

/// Runtime proportional to input megabytes (10^6 bytes), never below a floor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinearModel {
    pub seconds_per_mb: Ratio,
    pub floor_s: Ratio,
    /// Divide the proportional part by the requested cpu count.
    pub scale_by_cpu: bool,
}

impl Default for LinearModel {
    fn default() -> Self {
        LinearModel {
            seconds_per_mb: Ratio::int(1),
            floor_s: Ratio::int(1),
            scale_by_cpu: false,
        }
    }
}

impl LinearModel {
    pub fn estimate(&self, spec: &ComputeSpec, input_bytes: u64) -> Estimate {
        let cpu = if self.scale_by_cpu {
            spec.cpu.max(1) as u128
        } else {
            1
        };
        // bytes * s/MB * 1000 ms/s / 10^6 B/MB
        let proportional = self
            .seconds_per_mb
            .mul_div_ceil(input_bytes as u128, 1000 * cpu);
        let floor = self.floor_s.mul_div_ceil(1000, 1);
        Estimate {
            runtime_ms: proportional.max(floor).max(1),
            output_bytes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TraceKey {
    pub srr: String,
    pub mem_gb: u32,
    pub cpu: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRow {
    pub runtime_s: u64,
    pub output_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("trace line {line}: {reason}")]
pub struct TraceError {
    pub line: usize,
    pub reason: String,
}

/// Recorded runtimes keyed by `(srr, mem_gb, cpu)`, falling back to a linear model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceModel {
    pub rows: BTreeMap<TraceKey, TraceRow>,
    pub fallback: LinearModel,
}

impl TraceModel {
    pub fn bundled() -> Self {
        TraceModel::parse(BLAST_TRACE).expect("bundled trace parses")
    }

    /// Parses `srr,mem_gb,cpu,runtime_s,output_bytes` lines after a header line.
    pub fn parse(text: &str) -> Result<Self, TraceError> {
        let mut rows = BTreeMap::new();
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == "srr,mem_gb,cpu,runtime_s,output_bytes" => {}
            Some((i, _)) => {
                return Err(TraceError {
                    line: i + 1,
                    reason: "expected header srr,mem_gb,cpu,runtime_s,output_bytes".into(),
                })
            }
            None => {
                return Err(TraceError {
                    line: 1,
                    reason: "empty trace".into(),
                })
            }
        }
        for (i, line) in lines {
            let err = |reason: &str| TraceError {
                line: i + 1,
                reason: reason.to_string(),
            };
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 5 {
                return Err(err("expected 5 fields"));
            }
            let key = TraceKey {
                srr: f[0].to_string(),
                mem_gb: f[1].parse().map_err(|_| err("bad mem_gb"))?,
                cpu: f[2].parse().map_err(|_| err("bad cpu"))?,
            };
            let row = TraceRow {
                runtime_s: f[3].parse().map_err(|_| err("bad runtime_s"))?,
                output_bytes: f[4].parse().map_err(|_| err("bad output_bytes"))?,
            };
            if rows.insert(key, row).is_some() {
                return Err(err("duplicate row"));
            }
        }
        Ok(TraceModel {
            rows,
            fallback: LinearModel::default(),
        })
    }

    pub fn lookup(&self, spec: &ComputeSpec) -> Option<TraceRow> {
        let key = TraceKey {
            srr: spec.param("srr")?.to_string(),
            mem_gb: spec.mem_gb,
            cpu: spec.cpu,
        };
        self.rows.get(&key).copied()
    }

    pub fn estimate(&self, spec: &ComputeSpec, input_bytes: u64) -> Estimate {
        match self.lookup(spec) {
            Some(row) => Estimate {
                runtime_ms: row.runtime_s.saturating_mul(1000).max(1),
                output_bytes: Some(row.output_bytes),
            },
            None => self.fallback.estimate(spec, input_bytes),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DurationModel {
    Linear(LinearModel),
    Trace(TraceModel),
}

impl DurationModel {
    pub fn estimate(&self, spec: &ComputeSpec, input_bytes: u64) -> Estimate {
        match self {
            DurationModel::Linear(m) => m.estimate(spec, input_bytes),
            DurationModel::Trace(m) => m.estimate(spec, input_bytes),
        }
    }
}

/// One input dataset as seen by an application.
#[derive(Debug, Clone, Copy)]
pub struct AppInput<'a> {
    pub name: &'a Name,
    pub payload: &'a [u8],
    pub digest: Digest,
    pub declared_size: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JobOutput {
    pub payload: Vec<u8>,
    pub declared_size: u64,
}

/// A simulated application. `execute` must be a pure function of its arguments.
pub trait App: Send + fmt::Debug {
    fn execute(
        &self,
        spec: &ComputeSpec,
        inputs: &[AppInput<'_>],
        declared_hint: Option<u64>,
    ) -> JobOutput;
}

/// Stand-in for a sequence aligner: emits a pseudo-report seeded from the
/// sample id and the input digests.
#[derive(Debug, Clone, Copy, Default)]
pub struct BlastStandIn;

const BLAST_DEFAULT_OUTPUT: u64 = 64 * 1024;

impl App for BlastStandIn {
    fn execute(
        &self,
        spec: &ComputeSpec,
        inputs: &[AppInput<'_>],
        declared_hint: Option<u64>,
    ) -> JobOutput {
        let srr = spec.param("srr").unwrap_or("");
        let mut parts: Vec<&[u8]> = vec![b"blast-standin", srr.as_bytes()];
        for i in inputs {
            parts.push(i.digest.as_bytes());
        }
        let seed = Digest::of_parts(&parts);
        let declared_size = declared_hint.unwrap_or(BLAST_DEFAULT_OUTPUT);
        let stored = declared_size.min(MAX_STORED_OUTPUT) as usize;

        let refs: Vec<String> = inputs.iter().map(|i| i.name.to_uri()).collect();
        let mut payload = format!(
            "# blast-standin srr={} refs={} seed={} declared_size={}\n",
            srr,
            refs.join(","),
            seed,
            declared_size
        )
        .into_bytes();
        let mut rng = ChaCha8Rng::from_seed(*seed.as_bytes());
        if payload.len() < stored {
            let mut tail = vec![0u8; stored - payload.len()];
            rng.fill_bytes(&mut tail);
            payload.extend_from_slice(&tail);
        }
        payload.truncate(stored);
        JobOutput {
            payload,
            declared_size,
        }
    }
}

/// Run-length encoder over the concatenated inputs: `(count, byte)` pairs.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompressStandIn;

pub fn rle_encode(bytes: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    let mut iter = bytes.iter().peekable();
    while let Some(&b) = iter.next() {
        let mut run = 1u8;
        while run < u8::MAX && iter.peek() == Some(&&b) {
            iter.next();
            run += 1;
        }
        out.push(run);
        out.push(b);
    }
    out
}

impl App for CompressStandIn {
    fn execute(
        &self,
        _spec: &ComputeSpec,
        inputs: &[AppInput<'_>],
        declared_hint: Option<u64>,
    ) -> JobOutput {
        let joined: Vec<u8> = inputs
            .iter()
            .flat_map(|i| i.payload.iter().copied())
            .collect();
        let mut payload = rle_encode(&joined);
        payload.truncate(MAX_STORED_OUTPUT as usize);
        let declared_size = declared_hint.unwrap_or(0).max(payload.len() as u64);
        JobOutput {
            payload,
            declared_size,
        }
    }
}

#[derive(Debug)]
pub struct AppEntry {
    pub app: Box<dyn App>,
    pub duration_model: DurationModel,
}

#[derive(Debug, Default)]
pub struct AppRegistry {
    apps: BTreeMap<String, AppEntry>,
}

impl AppRegistry {
    pub fn register(
        &mut self,
        token: impl Into<String>,
        app: Box<dyn App>,
        duration_model: DurationModel,
    ) {
        self.apps.insert(
            token.into(),
            AppEntry {
                app,
                duration_model,
            },
        );
    }

    pub fn get(&self, token: &str) -> Option<&AppEntry> {
        self.apps.get(token)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.apps.keys().map(String::as_str)
    }

    /// Builds the registry for the named apps. `BLAST` uses `blast_model`;
    /// `compress` is linear. Unknown tokens are returned as errors.
    pub fn standard(tokens: &[String], blast_model: DurationModel) -> Result<Self, String> {
        let mut r = AppRegistry::default();
        for t in tokens {
            match t.as_str() {
                "BLAST" => r.register("BLAST", Box::new(BlastStandIn), blast_model.clone()),
                "compress" => r.register(
                    "compress",
                    Box::new(CompressStandIn),
                    DurationModel::Linear(LinearModel::default()),
                ),
                other => return Err(format!("unknown app {other:?}")),
            }
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RunError {
    #[error("dataset not found")]
    DatasetNotFound(Name),
    #[error("app {0:?} is not installed")]
    UnknownApp(String),
}

/// Plan for an admitted job whose inputs are all present.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunPlan {
    pub started_at: Millis,
    pub completes_at: Millis,
    pub input_bytes: u64,
    pub estimate: Estimate,
}

/// One cluster's orchestration engine.
#[derive(Debug)]
pub struct Orchestrator {
    resources: ClusterResources,
    queue: VecDeque<(JobId, ComputeSpec)>,
    reserved: BTreeMap<JobId, ComputeSpec>,
    pub apps: AppRegistry,
    pub services: ServiceRegistry,
}

impl Orchestrator {
    pub fn new(resources: ClusterResources, apps: AppRegistry) -> Self {
        Orchestrator {
            resources,
            queue: VecDeque::new(),
            reserved: BTreeMap::new(),
            apps,
            services: ServiceRegistry::with_defaults(),
        }
    }

    pub fn resources(&self) -> ClusterResources {
        self.resources
    }

    pub fn queued(&self) -> impl Iterator<Item = &JobId> {
        self.queue.iter().map(|(id, _)| id)
    }

    pub fn reserved(&self) -> impl Iterator<Item = (&JobId, &ComputeSpec)> {
        self.reserved.iter()
    }

    pub fn check_capacity(&self, spec: &ComputeSpec) -> Result<(), CapacityExceeded> {
        if self.resources.fits_ever(spec) {
            Ok(())
        } else {
            Err(CapacityExceeded)
        }
    }

    /// Reserves resources if the job fits and nothing is queued ahead of it;
    /// otherwise appends it to the FIFO queue.
    pub fn admit(&mut self, job: JobId, spec: ComputeSpec) -> Result<Admission, CapacityExceeded> {
        self.check_capacity(&spec)?;
        if self.queue.is_empty() && self.resources.fits_now(&spec) {
            self.resources.reserve(&spec);
            self.reserved.insert(job, spec);
            Ok(Admission::Admitted)
        } else {
            self.queue.push_back((job, spec));
            Ok(Admission::Queued)
        }
    }

    /// Returns a job's resources, then admits queued jobs from the head for
    /// as long as they fit. Returns the newly admitted jobs in order.
    pub fn release(&mut self, job: &JobId) -> Vec<JobId> {
        let spec = self
            .reserved
            .remove(job)
            .unwrap_or_else(|| panic!("release of unreserved job {job}"));
        self.resources.release(&spec);
        self.admit_from_queue()
    }

    fn admit_from_queue(&mut self) -> Vec<JobId> {
        let mut admitted = Vec::new();
        while let Some((_, spec)) = self.queue.front() {
            if !self.resources.fits_now(spec) {
                break;
            }
            let (id, spec) = self.queue.pop_front().expect("front exists");
            self.resources.reserve(&spec);
            self.reserved.insert(id.clone(), spec);
            admitted.push(id);
        }
        admitted
    }

    /// Checks inputs and schedules completion for an admitted job.
    pub fn run_job(
        &self,
        spec: &ComputeSpec,
        lake: &DataLake,
        now: Millis,
    ) -> Result<RunPlan, RunError> {
        let entry = self
            .apps
            .get(&spec.app)
            .ok_or_else(|| RunError::UnknownApp(spec.app.clone()))?;
        let mut input_bytes = 0u64;
        for name in &spec.datasets {
            let m = lake
                .get_manifest(name)
                .map_err(|_| RunError::DatasetNotFound(name.clone()))?;
            input_bytes = input_bytes.saturating_add(m.declared_size);
        }
        let estimate = entry.duration_model.estimate(spec, input_bytes);
        Ok(RunPlan {
            started_at: now,
            completes_at: now + estimate.runtime_ms,
            input_bytes,
            estimate,
        })
    }

    /// Runs the application over its inputs.
    pub fn execute(
        &self,
        spec: &ComputeSpec,
        lake: &DataLake,
        plan: &RunPlan,
    ) -> Result<JobOutput, RunError> {
        let entry = self
            .apps
            .get(&spec.app)
            .ok_or_else(|| RunError::UnknownApp(spec.app.clone()))?;
        let mut inputs = Vec::with_capacity(spec.datasets.len());
        for name in &spec.datasets {
            let missing = || RunError::DatasetNotFound(name.clone());
            let m = lake.get_manifest(name).map_err(|_| missing())?;
            inputs.push(AppInput {
                name,
                payload: lake.payload(name).map_err(|_| missing())?,
                digest: m.digest,
                declared_size: m.declared_size,
            });
        }
        Ok(entry.app.execute(spec, &inputs, plan.estimate.output_bytes))
    }

    /// Forgets every queued and reserved job (cluster departure). Returns
    /// the ids that were reserved followed by those that were queued.
    pub fn evict_all(&mut self) -> Vec<JobId> {
        let mut ids: Vec<JobId> = std::mem::take(&mut self.reserved).into_keys().collect();
        ids.extend(self.queue.drain(..).map(|(id, _)| id));
        self.resources.cpu_used = 0;
        self.resources.mem_used_gb = 0;
        ids
    }
}

/// Renders seconds as `8h9m50s`.
pub fn format_hms(total_s: u64) -> String {
    let (h, m, s) = (total_s / 3600, total_s % 3600 / 60, total_s % 60);
    if h > 0 {
        format!("{h}h{m}m{s}s")
    } else if m > 0 {
        format!("{m}m{s}s")
    } else {
        format!("{s}s")
    }
}

/// Renders a byte count in the decimal units used by the trace (`941MB`, `2.71GB`).
pub fn format_decimal_size(bytes: u64) -> String {
    const GB: u64 = 1_000_000_000;
    const MB: u64 = 1_000_000;
    if bytes >= GB {
        let hundredths = bytes / (GB / 100);
        let (whole, frac) = (hundredths / 100, hundredths % 100);
        let frac = format!("{frac:02}");
        let frac = frac.trim_end_matches('0');
        if frac.is_empty() {
            format!("{whole}GB")
        } else {
            format!("{whole}.{frac}GB")
        }
    } else if bytes >= MB {
        format!("{}MB", bytes / MB)
    } else {
        format!("{bytes}B")
    }
}
