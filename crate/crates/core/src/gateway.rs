// SPDX-License-Identifier: Apache-2.0

//! Cluster ingress. Classifies Interests by prefix, validates and records
//! compute submissions, answers status queries and hands data requests to
//! the local data-lake router.

use std::collections::BTreeMap;
use std::fmt;

use crate::datalake::{DataLake, LakeError};
use crate::name::{build_compute_name, ComputeSpec, JobId, Name, ParsedRequest};
use crate::orchestrator::{JobOutput, Orchestrator, RunError, ServiceHandler, DATALAKE_SERVICE};
use crate::wire::{DataPacket, Interest};
use crate::Millis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum JobStatus {
    Pending,
    Running,
    Completed,
    Failed,
}

impl JobStatus {
    /// Edges of the lifecycle graph: Pending→Running→{Completed,Failed}, Pending→Failed.
    pub fn can_transition_to(self, next: JobStatus) -> bool {
        use JobStatus::*;
        matches!(
            (self, next),
            (Pending, Running) | (Pending, Failed) | (Running, Completed) | (Running, Failed)
        )
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Completed | JobStatus::Failed)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            JobStatus::Pending => "Pending",
            JobStatus::Running => "Running",
            JobStatus::Completed => "Completed",
            JobStatus::Failed => "Failed",
        }
    }
}

impl fmt::Display for JobStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JobRecord {
    pub job_id: JobId,
    pub spec: ComputeSpec,
    pub status: JobStatus,
    pub submitted_at: Millis,
    pub started_at: Option<Millis>,
    pub finished_at: Option<Millis>,
    pub result_name: Option<Name>,
    pub error: Option<String>,
    /// Every status the record has held, with the time it was entered.
    pub history: Vec<(JobStatus, Millis)>,
}

impl JobRecord {
    /// `status=...` lines as served on the status prefix.
    pub fn status_text(&self) -> String {
        match self.status {
            JobStatus::Completed => format!(
                "status=Completed\nresult={}",
                self.result_name
                    .as_ref()
                    .expect("completed jobs have a result")
            ),
            JobStatus::Failed => format!(
                "status=Failed\nerror={}",
                self.error.as_deref().expect("failed jobs have an error")
            ),
            s => format!("status={s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("unknown job {0}")]
    UnknownJob(JobId),
    #[error("job {job} cannot move from {from} to {to}")]
    IllegalTransition {
        job: JobId,
        from: JobStatus,
        to: JobStatus,
    },
    #[error("publish failed: {0}")]
    PublishFailed(String),
}

pub type CheckFn = Box<dyn Fn(&ComputeSpec) -> Result<(), String> + Send>;

/// Application-specific request check.
pub struct ValidationPlugin {
    pub app: String,
    pub check: CheckFn,
}

impl fmt::Debug for ValidationPlugin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ValidationPlugin")
            .field("app", &self.app)
            .finish_non_exhaustive()
    }
}

impl ValidationPlugin {
    pub fn new(
        app: impl Into<String>,
        check: impl Fn(&ComputeSpec) -> Result<(), String> + Send + 'static,
    ) -> Self {
        ValidationPlugin {
            app: app.into(),
            check: Box::new(check),
        }
    }

    /// Requires an `srr` parameter that looks like a read-archive accession
    /// (`SRR`, `ERR` or `DRR` followed by at least six digits).
    pub fn blast() -> Self {
        ValidationPlugin::new("BLAST", |spec| {
            let srr = spec
                .param("srr")
                .ok_or_else(|| "missing SRR_ID".to_string())?;
            let digits = ["SRR", "ERR", "DRR"]
                .iter()
                .find_map(|p| srr.strip_prefix(p));
            match digits {
                Some(d) if d.len() >= 6 && d.bytes().all(|b| b.is_ascii_digit()) => Ok(()),
                _ => Err(format!("invalid SRR_ID {srr}")),
            }
        })
    }
}

/// At most one plugin per app; apps without a plugin pass.
#[derive(Debug, Default)]
pub struct ValidationRegistry {
    plugins: BTreeMap<String, ValidationPlugin>,
}

impl ValidationRegistry {
    pub fn with_defaults() -> Self {
        let mut r = ValidationRegistry::default();
        r.register(ValidationPlugin::blast());
        r
    }

    /// Installs `plugin`, returning the one it replaced.
    pub fn register(&mut self, plugin: ValidationPlugin) -> Option<ValidationPlugin> {
        self.plugins.insert(plugin.app.clone(), plugin)
    }

    pub fn validate(&self, spec: &ComputeSpec) -> Result<(), String> {
        match self.plugins.get(&spec.app) {
            Some(p) => (p.check)(spec),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GatewayResponse {
    Reply(DataPacket),
    /// Forward the Interest to the named in-cluster service.
    ToService(ServiceHandler, Interest),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GatewayOutcome {
    pub response: GatewayResponse,
    /// Set when this Interest created a new job record.
    pub submitted: Option<JobId>,
}

#[derive(Debug, Default)]
pub struct Gateway {
    jobs: BTreeMap<JobId, JobRecord>,
    pub validators: ValidationRegistry,
}

impl Gateway {
    pub fn new(validators: ValidationRegistry) -> Self {
        Gateway {
            jobs: BTreeMap::new(),
            validators,
        }
    }

    pub fn job(&self, id: &JobId) -> Option<&JobRecord> {
        self.jobs.get(id)
    }

    pub fn jobs(&self) -> impl Iterator<Item = &JobRecord> {
        self.jobs.values()
    }

    pub fn handle_interest(
        &mut self,
        interest: &Interest,
        now: Millis,
        orch: &Orchestrator,
    ) -> GatewayOutcome {
        let reply = |data| GatewayOutcome {
            response: GatewayResponse::Reply(data),
            submitted: None,
        };
        match ParsedRequest::classify(&interest.name) {
            Ok(ParsedRequest::Compute(spec)) => {
                let before = self.jobs.len();
                let id = self.submit_job(spec, interest.nonce, now, orch);
                let created = self.jobs.len() > before;
                GatewayOutcome {
                    response: GatewayResponse::Reply(DataPacket::new(
                        interest.name.clone(),
                        id.as_str().as_bytes().to_vec(),
                        0,
                    )),
                    submitted: created.then_some(id),
                }
            }
            Ok(ParsedRequest::Status(id)) => reply(self.query_status(&id)),
            Ok(ParsedRequest::Data(_)) => match orch.services.resolve(DATALAKE_SERVICE) {
                Some(handler) => GatewayOutcome {
                    response: GatewayResponse::ToService(handler, interest.clone()),
                    submitted: None,
                },
                None => reply(DataPacket::error(
                    interest.name.clone(),
                    "data lake unavailable",
                )),
            },
            Err(e) => reply(DataPacket::error(interest.name.clone(), &e.to_string())),
        }
    }

    /// Records a submission and returns its id. Validation and capacity
    /// failures produce a Failed record rather than an error.
    pub fn submit_job(
        &mut self,
        spec: ComputeSpec,
        nonce: u32,
        now: Millis,
        orch: &Orchestrator,
    ) -> JobId {
        let id = JobId::derive(&build_compute_name(&spec), nonce);
        if self.jobs.contains_key(&id) {
            return id;
        }
        let failure = self
            .validators
            .validate(&spec)
            .err()
            .or_else(|| {
                orch.apps
                    .get(&spec.app)
                    .is_none()
                    .then(|| RunError::UnknownApp(spec.app.clone()).to_string())
            })
            .or_else(|| orch.check_capacity(&spec).err().map(|e| e.to_string()));
        let mut record = JobRecord {
            job_id: id.clone(),
            spec,
            status: JobStatus::Pending,
            submitted_at: now,
            started_at: None,
            finished_at: None,
            result_name: None,
            error: None,
            history: vec![(JobStatus::Pending, now)],
        };
        if let Some(error) = failure {
            record.status = JobStatus::Failed;
            record.error = Some(error);
            record.finished_at = Some(now);
            record.history.push((JobStatus::Failed, now));
        }
        self.jobs.insert(id.clone(), record);
        id
    }

    pub fn status_text(&self, id: &JobId) -> String {
        match self.jobs.get(id) {
            Some(r) => r.status_text(),
            None => "status=unknown".to_string(),
        }
    }

    /// Read-only status lookup; the reply is never cacheable.
    pub fn query_status(&self, id: &JobId) -> DataPacket {
        DataPacket::new(id.status_name(), self.status_text(id).into_bytes(), 0)
    }

    fn transition(
        &mut self,
        id: &JobId,
        to: JobStatus,
        now: Millis,
    ) -> Result<&mut JobRecord, GatewayError> {
        let record = self
            .jobs
            .get_mut(id)
            .ok_or_else(|| GatewayError::UnknownJob(id.clone()))?;
        if !record.status.can_transition_to(to) {
            return Err(GatewayError::IllegalTransition {
                job: id.clone(),
                from: record.status,
                to,
            });
        }
        record.status = to;
        record.history.push((to, now));
        Ok(record)
    }

    pub fn mark_running(&mut self, id: &JobId, now: Millis) -> Result<(), GatewayError> {
        self.transition(id, JobStatus::Running, now)?.started_at = Some(now);
        Ok(())
    }

    pub fn mark_failed(
        &mut self,
        id: &JobId,
        error: &str,
        now: Millis,
    ) -> Result<(), GatewayError> {
        let r = self.transition(id, JobStatus::Failed, now)?;
        r.error = Some(error.to_string());
        r.finished_at = Some(now);
        Ok(())
    }

    /// Publishes the job output under `/ndn/k8s/data/results/<job_id>` and
    /// completes the record. A job that is not Running is left untouched.
    pub fn on_job_completion(
        &mut self,
        id: &JobId,
        output: JobOutput,
        lake: &mut DataLake,
        now: Millis,
    ) -> Result<Name, GatewayError> {
        let record = self
            .jobs
            .get(id)
            .ok_or_else(|| GatewayError::UnknownJob(id.clone()))?;
        if record.status != JobStatus::Running {
            return Err(GatewayError::IllegalTransition {
                job: id.clone(),
                from: record.status,
                to: JobStatus::Completed,
            });
        }
        let result = id.result_name();
        match lake.publish(result.clone(), output.payload, output.declared_size, false) {
            Ok(_) => {
                let r = self.transition(id, JobStatus::Completed, now)?;
                r.result_name = Some(result.clone());
                r.finished_at = Some(now);
                Ok(result)
            }
            Err(e) => {
                let msg = publish_error(&e);
                self.mark_failed(id, &msg, now)?;
                Err(GatewayError::PublishFailed(msg))
            }
        }
    }
}

fn publish_error(e: &LakeError) -> String {
    format!("result publish failed: {e}")
}
