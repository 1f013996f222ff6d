// SPDX-License-Identifier: Apache-2.0

//! Timestamped workload scripts.
//!
//! ```text
//! seed 7
//! at 0 submit c1 /ndn/k8s/compute/app=BLAST&cpu=2&mem=4&srr=SRR2931415 as j1
//! at 5000 status c1 $j1
//! at 40000000 fetch c1 /ndn/k8s/data/results/$j1
//! at 10 interest c1 /ndn/k8s/data/ref/human/manifest
//! at 0 publish A /ndn/k8s/data/in/x size=100000 declared=2000000
//! at 0 publish A /ndn/k8s/data/in/y file=y.bin digest=<sha256 hex>
//! at 900 remove-cluster A
//! at 900 add-node D cluster cpu=4 mem=8 apps=BLAST
//! at 900 add-link r1 D 3
//! at 900 remove-link r1 B
//! at 900 announce D /ndn/k8s/compute
//! at 900 withdraw D /ndn/k8s/compute
//! end 100000
//! ```
//!
//! `$label` is replaced by the job id bound with `as <label>` when the line runs.

use std::fmt;
use std::path::{Path, PathBuf};

use crate::digest::Digest;
use crate::name::{JobId, Name};
use crate::Millis;

use super::topology::{
    parse_link, parse_name, parse_node, parse_num, parse_opts, ConfigError, LinkSpec, NodeSpec,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScriptError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("line {line}: integrity check failed: {message}")]
    Integrity { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JobRef {
    Id(JobId),
    Label(String),
}

impl fmt::Display for JobRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JobRef::Id(id) => write!(f, "{id}"),
            JobRef::Label(l) => write!(f, "${l}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PublishSource {
    /// Deterministic pseudo-random bytes derived from the dataset name.
    Synthetic { size: u64 },
    /// File contents read when the script was loaded.
    File { path: String, payload: Vec<u8> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TopologyChange {
    AddNode(NodeSpec),
    /// `cluster_only` rejects the change unless the node is a cluster.
    RemoveNode {
        id: String,
        cluster_only: bool,
    },
    AddLink(LinkSpec),
    RemoveLink {
        a: String,
        b: String,
    },
    Announce {
        node: String,
        prefix: Name,
    },
    Withdraw {
        node: String,
        prefix: Name,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptAction {
    Submit {
        client: String,
        uri: String,
        label: Option<String>,
    },
    Status {
        client: String,
        job: JobRef,
    },
    Fetch {
        client: String,
        uri: String,
    },
    Interest {
        client: String,
        uri: String,
    },
    Publish {
        cluster: String,
        name: Name,
        source: PublishSource,
        declared: Option<u64>,
        digest: Option<Digest>,
    },
    Topology(TopologyChange),
}

impl ScriptAction {
    /// Actions that produce a client request with an observable outcome.
    pub fn is_request(&self) -> bool {
        matches!(
            self,
            ScriptAction::Submit { .. }
                | ScriptAction::Status { .. }
                | ScriptAction::Fetch { .. }
                | ScriptAction::Interest { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptCommand {
    pub at: Millis,
    pub action: ScriptAction,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Workload {
    pub topology: Option<PathBuf>,
    pub seed: Option<u64>,
    pub end: Option<Millis>,
    pub commands: Vec<ScriptCommand>,
}

fn check_uri_template(line: usize, uri: &str) -> Result<(), ConfigError> {
    if uri.contains('$') {
        if !uri.starts_with('/') {
            return Err(ConfigError::new(line, format!("invalid name {uri:?}")));
        }
        Ok(())
    } else {
        parse_name(line, uri).map(|_| ())
    }
}

/// Replaces each `$label` with its bound value. Unbound labels are returned
/// as errors.
pub fn substitute_labels(
    uri: &str,
    lookup: impl Fn(&str) -> Option<String>,
) -> Result<String, String> {
    let mut out = String::with_capacity(uri.len());
    let mut rest = uri;
    while let Some(pos) = rest.find('$') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos + 1..];
        let end = tail
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '-'))
            .unwrap_or(tail.len());
        let label = &tail[..end];
        if label.is_empty() {
            return Err("empty label after '$'".to_string());
        }
        out.push_str(&lookup(label).ok_or_else(|| format!("unbound label ${label}"))?);
        rest = &tail[end..];
    }
    out.push_str(rest);
    Ok(out)
}

fn valid_label(l: &str) -> bool {
    !l.is_empty()
        && l.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn parse_action(
    line: usize,
    verb: &str,
    args: &[&str],
    base: Option<&Path>,
) -> Result<ScriptAction, ScriptError> {
    let usage = |u: &str| ConfigError::new(line, format!("expected: at <ms> {u}"));
    let action = match verb {
        "submit" => {
            let (client, uri, label) = match args {
                [c, u] => (c, u, None),
                [c, u, "as", l] if valid_label(l) => (c, u, Some(l.to_string())),
                _ => return Err(usage("submit <client> <compute-uri> [as <label>]").into()),
            };
            parse_name(line, uri)?;
            ScriptAction::Submit {
                client: client.to_string(),
                uri: uri.to_string(),
                label,
            }
        }
        "status" => {
            let [client, job] = args else {
                return Err(usage("status <client> <job-id|$label>").into());
            };
            let job = match job.strip_prefix('$') {
                Some(l) if valid_label(l) => JobRef::Label(l.to_string()),
                Some(_) => {
                    return Err(ConfigError::new(line, format!("invalid label {job:?}")).into())
                }
                None => JobRef::Id(
                    JobId::parse(job).map_err(|e| ConfigError::new(line, e.to_string()))?,
                ),
            };
            ScriptAction::Status {
                client: client.to_string(),
                job,
            }
        }
        "fetch" | "interest" => {
            let [client, uri] = args else {
                return Err(usage(&format!("{verb} <client> <uri>")).into());
            };
            check_uri_template(line, uri)?;
            let (client, uri) = (client.to_string(), uri.to_string());
            if verb == "fetch" {
                ScriptAction::Fetch { client, uri }
            } else {
                ScriptAction::Interest { client, uri }
            }
        }
        "publish" => {
            let [cluster, uri, opts @ ..] = args else {
                return Err(usage(
                    "publish <cluster> <uri> size=<n>|file=<path> [declared=<n>] [digest=<hex>]",
                )
                .into());
            };
            let name = parse_name(line, uri)?;
            let opts = parse_opts(line, opts, &["size", "file", "declared", "digest"])?;
            let declared = opts
                .get("declared")
                .map(|d| parse_num(line, "declared", d))
                .transpose()?;
            let digest = opts
                .get("digest")
                .map(|d| {
                    d.parse::<Digest>()
                        .map_err(|_| ConfigError::new(line, format!("invalid digest {d:?}")))
                })
                .transpose()?;
            let source = match (opts.get("size"), opts.get("file")) {
                (Some(size), None) => PublishSource::Synthetic {
                    size: parse_num(line, "size", size)?,
                },
                (None, Some(path)) => {
                    let full = match base {
                        Some(b) => b.join(path),
                        None => PathBuf::from(path),
                    };
                    let payload = std::fs::read(&full).map_err(|e| {
                        ConfigError::new(line, format!("reading {}: {e}", full.display()))
                    })?;
                    if let Some(expected) = digest {
                        let actual = Digest::of(&payload);
                        if actual != expected {
                            return Err(ScriptError::Integrity {
                                line,
                                message: format!(
                                    "{} has digest {actual}, expected {expected}",
                                    full.display()
                                ),
                            });
                        }
                    }
                    PublishSource::File {
                        path: path.to_string(),
                        payload,
                    }
                }
                _ => {
                    return Err(ConfigError::new(
                        line,
                        "publish needs exactly one of size= or file=",
                    )
                    .into())
                }
            };
            ScriptAction::Publish {
                cluster: cluster.to_string(),
                name,
                source,
                declared,
                digest,
            }
        }
        "remove-cluster" | "remove-node" => {
            let [id] = args else {
                return Err(usage(&format!("{verb} <id>")).into());
            };
            ScriptAction::Topology(TopologyChange::RemoveNode {
                id: id.to_string(),
                cluster_only: verb == "remove-cluster",
            })
        }
        "add-node" => {
            ScriptAction::Topology(TopologyChange::AddNode(parse_node(line, args, base)?))
        }
        "add-cluster" => {
            let [id, rest @ ..] = args else {
                return Err(usage("add-cluster <id> cpu=<n> mem=<n> apps=<a,b>").into());
            };
            let mut tokens = vec![*id, "cluster"];
            tokens.extend_from_slice(rest);
            ScriptAction::Topology(TopologyChange::AddNode(parse_node(line, &tokens, base)?))
        }
        "add-link" => ScriptAction::Topology(TopologyChange::AddLink(parse_link(line, args)?)),
        "remove-link" => {
            let [a, b] = args else {
                return Err(usage("remove-link <a> <b>").into());
            };
            ScriptAction::Topology(TopologyChange::RemoveLink {
                a: a.to_string(),
                b: b.to_string(),
            })
        }
        "announce" | "withdraw" => {
            let [node, prefix] = args else {
                return Err(usage(&format!("{verb} <node> <prefix>")).into());
            };
            let (node, prefix) = (node.to_string(), parse_name(line, prefix)?);
            ScriptAction::Topology(if verb == "announce" {
                TopologyChange::Announce { node, prefix }
            } else {
                TopologyChange::Withdraw { node, prefix }
            })
        }
        other => return Err(ConfigError::new(line, format!("unknown action {other:?}")).into()),
    };
    Ok(action)
}

impl Workload {
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        Self::parse_with_base(text, None)
    }

    /// Parses a script. `base` resolves relative `file=` and `topology` paths.
    pub fn parse_with_base(text: &str, base: Option<&Path>) -> Result<Self, ScriptError> {
        let mut w = Workload::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = content.split_whitespace().collect();
            match tokens.as_slice() {
                ["topology", path] => {
                    w.topology = Some(match base {
                        Some(b) => b.join(path),
                        None => PathBuf::from(path),
                    })
                }
                ["seed", n] => w.seed = Some(parse_num(line, "seed", n)?),
                ["end", n] => w.end = Some(parse_num(line, "end", n)?),
                ["at", at, verb, args @ ..] => {
                    let at: Millis = parse_num(line, "time", at)?;
                    let action = parse_action(line, verb, args, base)?;
                    w.commands.push(ScriptCommand { at, action });
                }
                _ => return Err(ConfigError::new(line, format!("cannot parse {content:?}")).into()),
            }
        }
        Ok(w)
    }
}
