// SPDX-License-Identifier: Apache-2.0

//! Line-oriented topology configuration.
//!
//! ```text
//! # comment
//! node c1 client
//! node r1 router [strategy=round-robin] [cs=128]
//! node A cluster cpu=8 mem=16 apps=BLAST,compress [startup=2000] [model=trace|linear] [trace=file.csv]
//! link c1 r1 1
//! announce A /ndn/k8s/compute
//! dataset A /ndn/k8s/data/ref/human 4096 [declared=3100000000]
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::forwarder::{StrategyKind, DEFAULT_CS_CAPACITY};
use crate::name::{compute_prefix, data_prefix, Name};
use crate::orchestrator::{DurationModel, LinearModel, TraceModel};
use crate::Millis;

pub const DEFAULT_STARTUP_MS: Millis = 2000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    /// 1-based source line, or 0 when the problem is not tied to a line.
    pub line: usize,
    pub message: String,
}

impl ConfigError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        ConfigError {
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            f.write_str(&self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Client,
    Router,
    Cluster,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::Client => "client",
            NodeKind::Router => "router",
            NodeKind::Cluster => "cluster",
        })
    }
}

impl FromStr for NodeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "client" => Ok(NodeKind::Client),
            "router" => Ok(NodeKind::Router),
            "cluster" => Ok(NodeKind::Cluster),
            other => Err(format!("unknown node kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterSpec {
    pub cpu: u32,
    pub mem_gb: u32,
    pub apps: Vec<String>,
    pub startup_ms: Millis,
    /// Duration model used for `BLAST`.
    pub blast_model: DurationModel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSpec {
    pub id: String,
    pub kind: NodeKind,
    pub strategy: StrategyKind,
    pub cs_capacity: usize,
    pub cluster: Option<ClusterSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkSpec {
    pub a: String,
    pub b: String,
    pub latency_ms: Millis,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Announcement {
    pub node: String,
    pub prefix: Name,
}

/// A synthetic dataset preloaded into a cluster's data lake.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSpec {
    pub node: String,
    pub name: Name,
    pub stored_bytes: u64,
    pub declared_bytes: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TopologyConfig {
    pub nodes: Vec<NodeSpec>,
    pub links: Vec<LinkSpec>,
    pub announcements: Vec<Announcement>,
    pub datasets: Vec<DatasetSpec>,
}

/// `key=value` options following the positional tokens of a line.
pub(crate) fn parse_opts<'a>(
    line: usize,
    tokens: &[&'a str],
    allowed: &[&str],
) -> Result<BTreeMap<&'a str, &'a str>, ConfigError> {
    let mut opts = BTreeMap::new();
    for t in tokens {
        let (k, v) = t
            .split_once('=')
            .ok_or_else(|| ConfigError::new(line, format!("expected key=value, got {t:?}")))?;
        if !allowed.contains(&k) {
            return Err(ConfigError::new(line, format!("unknown option {k:?}")));
        }
        if opts.insert(k, v).is_some() {
            return Err(ConfigError::new(line, format!("option {k:?} given twice")));
        }
    }
    Ok(opts)
}

pub(crate) fn parse_num<T: FromStr>(line: usize, what: &str, text: &str) -> Result<T, ConfigError> {
    text.parse().map_err(|_| {
        ConfigError::new(
            line,
            format!("{what} must be a non-negative integer, got {text:?}"),
        )
    })
}

pub(crate) fn parse_name(line: usize, text: &str) -> Result<Name, ConfigError> {
    Name::parse(text).map_err(|e| ConfigError::new(line, e.to_string()))
}

/// Parses a node declaration: `<id> <kind> [opts...]` (tokens after the keyword).
pub(crate) fn parse_node(
    line: usize,
    tokens: &[&str],
    base: Option<&Path>,
) -> Result<NodeSpec, ConfigError> {
    let [id, kind, opts @ ..] = tokens else {
        return Err(ConfigError::new(
            line,
            "expected: node <id> <kind> [options]",
        ));
    };
    if id.is_empty() || id.contains(['=', '/', '$']) {
        return Err(ConfigError::new(line, format!("invalid node id {id:?}")));
    }
    let kind: NodeKind = kind
        .parse()
        .map_err(|e: String| ConfigError::new(line, e))?;
    let allowed: &[&str] = match kind {
        NodeKind::Cluster => &[
            "cpu", "mem", "apps", "startup", "model", "trace", "strategy", "cs",
        ],
        _ => &["strategy", "cs"],
    };
    let opts = parse_opts(line, opts, allowed)?;
    let strategy = match opts.get("strategy") {
        Some(s) => s.parse().map_err(|e: String| ConfigError::new(line, e))?,
        None => StrategyKind::BestCost,
    };
    let cs_capacity = match opts.get("cs") {
        Some(s) => parse_num(line, "cs", s)?,
        None => DEFAULT_CS_CAPACITY,
    };
    let cluster = if kind == NodeKind::Cluster {
        let required = |k: &str| {
            opts.get(k)
                .copied()
                .ok_or_else(|| ConfigError::new(line, format!("cluster {id} needs {k}=")))
        };
        let cpu: u32 = parse_num(line, "cpu", required("cpu")?)?;
        let mem_gb: u32 = parse_num(line, "mem", required("mem")?)?;
        if cpu == 0 || mem_gb == 0 {
            return Err(ConfigError::new(
                line,
                "cluster cpu and mem must be positive",
            ));
        }
        let apps: Vec<String> = required("apps")?.split(',').map(str::to_string).collect();
        let startup_ms = match opts.get("startup") {
            Some(s) => parse_num(line, "startup", s)?,
            None => DEFAULT_STARTUP_MS,
        };
        if startup_ms == 0 {
            return Err(ConfigError::new(line, "startup must be at least 1 ms"));
        }
        let blast_model = match (opts.get("model").copied(), opts.get("trace")) {
            (Some("linear"), None) => DurationModel::Linear(LinearModel::default()),
            (Some("trace") | None, None) => DurationModel::Trace(TraceModel::bundled()),
            (Some("trace") | None, Some(path)) => {
                let path = match base {
                    Some(b) => b.join(path),
                    None => Path::new(path).to_path_buf(),
                };
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    ConfigError::new(line, format!("reading {}: {e}", path.display()))
                })?;
                DurationModel::Trace(
                    TraceModel::parse(&text).map_err(|e| ConfigError::new(line, e.to_string()))?,
                )
            }
            (Some("linear"), Some(_)) => {
                return Err(ConfigError::new(line, "trace= requires model=trace"))
            }
            (Some(other), _) => {
                return Err(ConfigError::new(line, format!("unknown model {other:?}")))
            }
        };
        Some(ClusterSpec {
            cpu,
            mem_gb,
            apps,
            startup_ms,
            blast_model,
        })
    } else {
        None
    };
    Ok(NodeSpec {
        id: id.to_string(),
        kind,
        strategy,
        cs_capacity,
        cluster,
    })
}

pub(crate) fn parse_link(line: usize, tokens: &[&str]) -> Result<LinkSpec, ConfigError> {
    let [a, b, latency] = tokens else {
        return Err(ConfigError::new(
            line,
            "expected: link <a> <b> <latency_ms>",
        ));
    };
    let latency_ms: Millis = parse_num(line, "latency", latency)?;
    if latency_ms == 0 {
        return Err(ConfigError::new(line, "link latency must be at least 1 ms"));
    }
    if a == b {
        return Err(ConfigError::new(line, "self links are not allowed"));
    }
    Ok(LinkSpec {
        a: a.to_string(),
        b: b.to_string(),
        latency_ms,
    })
}

impl TopologyConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::parse_with_base(text, None)
    }

    /// Parses and validates a topology. `base` resolves relative `trace=` paths.
    pub fn parse_with_base(text: &str, base: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = TopologyConfig::default();
        let mut lines_of_nodes = BTreeMap::new();
        let mut link_lines = Vec::new();
        let mut announce_lines = Vec::new();
        let mut dataset_lines = Vec::new();

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = content.split_whitespace().collect();
            match tokens[0] {
                "node" => {
                    let node = parse_node(line, &tokens[1..], base)?;
                    if lines_of_nodes.insert(node.id.clone(), line).is_some() {
                        return Err(ConfigError::new(
                            line,
                            format!("duplicate node id {}", node.id),
                        ));
                    }
                    cfg.nodes.push(node);
                }
                "link" => {
                    cfg.links.push(parse_link(line, &tokens[1..])?);
                    link_lines.push(line);
                }
                "announce" => {
                    let [node, prefix] = tokens[1..] else {
                        return Err(ConfigError::new(line, "expected: announce <node> <prefix>"));
                    };
                    cfg.announcements.push(Announcement {
                        node: node.to_string(),
                        prefix: parse_name(line, prefix)?,
                    });
                    announce_lines.push(line);
                }
                "dataset" => {
                    let [node, uri, size, ref opts @ ..] = tokens[1..] else {
                        return Err(ConfigError::new(
                            line,
                            "expected: dataset <node> <uri> <bytes> [declared=<n>]",
                        ));
                    };
                    let opts = parse_opts(line, opts, &["declared"])?;
                    let stored_bytes: u64 = parse_num(line, "bytes", size)?;
                    let declared_bytes = match opts.get("declared") {
                        Some(d) => parse_num(line, "declared", d)?,
                        None => stored_bytes,
                    };
                    if declared_bytes < stored_bytes {
                        return Err(ConfigError::new(line, "declared size is below stored size"));
                    }
                    cfg.datasets.push(DatasetSpec {
                        node: node.to_string(),
                        name: parse_name(line, uri)?,
                        stored_bytes,
                        declared_bytes,
                    });
                    dataset_lines.push(line);
                }
                other => {
                    return Err(ConfigError::new(
                        line,
                        format!("unknown directive {other:?}"),
                    ))
                }
            }
        }

        let kind_of = |id: &str| cfg.nodes.iter().find(|n| n.id == id).map(|n| n.kind);
        let mut seen_links = BTreeSet::new();
        for (l, line) in cfg.links.iter().zip(&link_lines) {
            for end in [&l.a, &l.b] {
                if kind_of(end).is_none() {
                    return Err(ConfigError::new(
                        *line,
                        format!("link references unknown node {end}"),
                    ));
                }
            }
            let key = if l.a < l.b {
                (&l.a, &l.b)
            } else {
                (&l.b, &l.a)
            };
            if !seen_links.insert(key) {
                return Err(ConfigError::new(
                    *line,
                    format!("duplicate link {} {}", l.a, l.b),
                ));
            }
        }
        for (a, line) in cfg.announcements.iter().zip(&announce_lines) {
            match kind_of(&a.node) {
                Some(NodeKind::Cluster) => {}
                Some(_) => {
                    return Err(ConfigError::new(
                        *line,
                        format!("only clusters announce prefixes ({})", a.node),
                    ))
                }
                None => {
                    return Err(ConfigError::new(
                        *line,
                        format!("announce references unknown node {}", a.node),
                    ))
                }
            }
        }
        for (d, line) in cfg.datasets.iter().zip(&dataset_lines) {
            if kind_of(&d.node) != Some(NodeKind::Cluster) {
                return Err(ConfigError::new(
                    *line,
                    format!("datasets live on clusters, not {}", d.node),
                ));
            }
            if !data_prefix().is_prefix_of(&d.name) || d.name.len() == data_prefix().len() {
                return Err(ConfigError::new(
                    *line,
                    format!("{} is outside /ndn/k8s/data", d.name),
                ));
            }
        }
        for n in cfg.nodes.iter().filter(|n| n.kind == NodeKind::Cluster) {
            let serves = cfg.announcements.iter().any(|a| {
                a.node == n.id && (a.prefix == compute_prefix() || a.prefix == data_prefix())
            });
            if !serves {
                return Err(ConfigError::new(
                    lines_of_nodes[&n.id],
                    format!(
                        "cluster {} must announce /ndn/k8s/compute or /ndn/k8s/data",
                        n.id
                    ),
                ));
            }
        }
        Ok(cfg)
    }

    pub fn node(&self, id: &str) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.id == id)
    }
}
