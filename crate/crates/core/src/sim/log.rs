// SPDX-License-Identifier: Apache-2.0

//! Structured simulation log with a stable text rendering.

use std::fmt;

use crate::forwarder::{DataDisposition, FaceId, InterestDisposition};
use crate::gateway::JobStatus;
use crate::name::{JobId, Name};
use crate::wire::ContentType;
use crate::Millis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RequestKind {
    Submit,
    Status,
    Fetch,
    Interest,
}

impl fmt::Display for RequestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RequestKind::Submit => "submit",
            RequestKind::Status => "status",
            RequestKind::Fetch => "fetch",
            RequestKind::Interest => "interest",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RequestOutcome {
    Ok(String),
    Failed(String),
}

impl RequestOutcome {
    pub fn is_ok(&self) -> bool {
        matches!(self, RequestOutcome::Ok(_))
    }

    pub fn detail(&self) -> &str {
        match self {
            RequestOutcome::Ok(s) | RequestOutcome::Failed(s) => s,
        }
    }
}

impl fmt::Display for RequestOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RequestOutcome::Ok(s) => write!(f, "ok {s}"),
            RequestOutcome::Failed(s) => write!(f, "failed {s}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketKind {
    Interest,
    Data,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LogRecord {
    /// A packet placed on a link.
    Send {
        node: String,
        face: FaceId,
        peer: String,
        kind: PacketKind,
        name: Name,
        bytes: usize,
    },
    /// A packet lost because its link disappeared in flight.
    LinkDrop {
        node: String,
        face: FaceId,
        name: Name,
    },
    /// A packet that failed to decode on arrival.
    DecodeError {
        node: String,
        face: FaceId,
        error: String,
    },
    InterestIn {
        node: String,
        face: FaceId,
        name: Name,
        nonce: u32,
        disposition: InterestDisposition,
    },
    DataIn {
        node: String,
        face: FaceId,
        name: Name,
        content_type: ContentType,
        disposition: DataDisposition,
    },
    PitExpired {
        node: String,
        name: Name,
    },
    /// A cluster gateway handled an Interest on its app face.
    Gateway {
        node: String,
        name: Name,
        nonce: u32,
        action: String,
    },
    /// A job changed state. `cpu` and `mem` are the job's request.
    Job {
        node: String,
        job: JobId,
        status: JobStatus,
        cpu: u32,
        mem: u32,
        detail: String,
    },
    JobQueued {
        node: String,
        job: JobId,
    },
    /// Resource usage of a cluster after it finished handling an event.
    Ledger {
        node: String,
        cpu_used: u32,
        cpu_total: u32,
        mem_used: u32,
        mem_total: u32,
    },
    Published {
        node: String,
        name: Name,
        stored: u64,
        declared: u64,
    },
    RequestIssued {
        client: String,
        req: u64,
        kind: RequestKind,
        name: Name,
        nonce: u32,
    },
    RequestDone {
        client: String,
        req: u64,
        kind: RequestKind,
        outcome: RequestOutcome,
        latency_ms: Millis,
    },
    Topology {
        detail: String,
    },
    ScriptError {
        detail: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEntry {
    pub at: Millis,
    /// Sequence number of the event that produced this record.
    pub event: u64,
    pub record: LogRecord,
}

fn disposition(d: &InterestDisposition) -> String {
    match d {
        InterestDisposition::CacheHit => "cache-hit".into(),
        InterestDisposition::Aggregated => "aggregated".into(),
        InterestDisposition::LoopDropped => "loop-dropped".into(),
        InterestDisposition::Forwarded(f) => format!("forwarded face={f}"),
        InterestDisposition::NoRoute => "no-route".into(),
    }
}

fn one_line(s: &str) -> String {
    s.replace('\n', " ")
}

impl fmt::Display for LogRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogRecord::Send {
                node,
                face,
                peer,
                kind,
                name,
                bytes,
            } => {
                let k = match kind {
                    PacketKind::Interest => "interest",
                    PacketKind::Data => "data",
                };
                write!(
                    f,
                    "send node={node} face={face} peer={peer} kind={k} bytes={bytes} name={name}"
                )
            }
            LogRecord::LinkDrop { node, face, name } => {
                write!(f, "link-drop node={node} face={face} name={name}")
            }
            LogRecord::DecodeError { node, face, error } => {
                write!(f, "decode-error node={node} face={face} error={error}")
            }
            LogRecord::InterestIn {
                node,
                face,
                name,
                nonce,
                disposition: d,
            } => write!(
                f,
                "interest node={node} face={face} nonce={nonce:08x} name={name} result={}",
                disposition(d)
            ),
            LogRecord::DataIn {
                node,
                face,
                name,
                content_type,
                disposition: d,
            } => {
                let d = match d {
                    DataDisposition::Satisfied { cached } => format!("satisfied cached={cached}"),
                    DataDisposition::Unsolicited => "unsolicited".into(),
                };
                write!(
                    f,
                    "data node={node} face={face} type={} name={name} result={d}",
                    content_type.label()
                )
            }
            LogRecord::PitExpired { node, name } => {
                write!(f, "pit-expired node={node} name={name}")
            }
            LogRecord::Gateway {
                node,
                name,
                nonce,
                action,
            } => write!(
                f,
                "gateway node={node} nonce={nonce:08x} name={name} action={action}"
            ),
            LogRecord::Job {
                node,
                job,
                status,
                cpu,
                mem,
                detail,
            } => {
                write!(
                    f,
                    "job node={node} id={job} status={status} cpu={cpu} mem={mem}"
                )?;
                if !detail.is_empty() {
                    write!(f, " detail={}", one_line(detail))?;
                }
                Ok(())
            }
            LogRecord::JobQueued { node, job } => write!(f, "job-queued node={node} id={job}"),
            LogRecord::Ledger {
                node,
                cpu_used,
                cpu_total,
                mem_used,
                mem_total,
            } => write!(
                f,
                "ledger node={node} cpu={cpu_used}/{cpu_total} mem={mem_used}/{mem_total}"
            ),
            LogRecord::Published {
                node,
                name,
                stored,
                declared,
            } => write!(
                f,
                "published node={node} name={name} stored={stored} declared={declared}"
            ),
            LogRecord::RequestIssued {
                client,
                req,
                kind,
                name,
                nonce,
            } => write!(
                f,
                "request client={client} req={req} kind={kind} nonce={nonce:08x} name={name}"
            ),
            LogRecord::RequestDone {
                client,
                req,
                kind,
                outcome,
                latency_ms,
            } => write!(
                f,
                "response client={client} req={req} kind={kind} latency_ms={latency_ms} outcome={}",
                one_line(&outcome.to_string())
            ),
            LogRecord::Topology { detail } => write!(f, "topology {detail}"),
            LogRecord::ScriptError { detail } => write!(f, "script-error {detail}"),
        }
    }
}

impl fmt::Display for LogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={} ev={} {}", self.at, self.event, self.record)
    }
}

pub fn render(log: &[LogEntry]) -> String {
    let mut out = String::new();
    for e in log {
        out.push_str(&e.to_string());
        out.push('\n');
    }
    out
}
