// SPDX-License-Identifier: Apache-2.0

//! `lidc`: client operations against a simulated overlay, plus a scenario runner.
//!
//! Exit codes: 0 success, 1 request failed for another reason (timeout,
//! gateway error), 2 usage or parse error, 3 not found, 4 integrity failure.

mod session;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lidc_core::name::{build_compute_name, ComputeSpec, Name};
use lidc_core::sim::log::render;
use lidc_core::sim::{
    JobRef, NodeKind, PublishSource, RequestOutcome, ScriptAction, ScriptError, Simulation,
    Workload,
};
use lidc_core::{Digest, JobId, Millis};

use session::{load_topology, Session, FILES};

/// How long a single client exchange may take before the CLI gives up.
const EXCHANGE_DEADLINE_MS: Millis = 600_000;

#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(2, message)
    }

    pub fn integrity(message: impl Into<String>) -> Self {
        Self::new(4, message)
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new(1, format!("{}: {e}", path.display()))
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "lidc",
    version,
    about = "Name-based compute placement over a simulated NDN overlay"
)]
struct Cli {
    /// Topology config; required when the store holds no session yet.
    #[arg(long, global = true)]
    topology: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory holding the session journal and published files.
    #[arg(long, global = true, default_value = ".lidc")]
    store: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ClientOpts {
    /// Client node issuing the request (default: first client in the topology).
    #[arg(long)]
    client: Option<String>,
    /// Advance the simulated clock by this much before issuing, e.g. `8h10m` or `1500` (ms).
    #[arg(long, value_parser = parse_wait, default_value = "0")]
    wait: Millis,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Submit a compute request and print the job id.
    Submit {
        #[arg(long)]
        app: Option<String>,
        #[arg(long)]
        mem: Option<u32>,
        #[arg(long)]
        cpu: Option<u32>,
        /// Extra parameter `key=value`; repeatable.
        #[arg(long = "param", value_name = "K=V")]
        params: Vec<String>,
        /// Input dataset name; repeatable.
        #[arg(long = "data", value_name = "URI")]
        datasets: Vec<String>,
        #[command(flatten)]
        opts: ClientOpts,
    },
    /// Query a job's status.
    Status {
        job_id: String,
        #[command(flatten)]
        opts: ClientOpts,
    },
    /// Fetch a dataset or job result, verifying its digest.
    Fetch {
        uri: String,
        /// Write the payload here instead of printing a summary only.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        opts: ClientOpts,
    },
    /// Load a local file into a cluster's data lake.
    Publish {
        uri: String,
        #[arg(long)]
        file: PathBuf,
        /// Cluster to publish on (default: the one nearest the client).
        #[arg(long)]
        node: Option<String>,
        /// Declared size in bytes, if larger than the file.
        #[arg(long)]
        declared: Option<u64>,
        #[command(flatten)]
        opts: ClientOpts,
    },
    /// Scenario runner and session inspection.
    #[command(subcommand)]
    Sim(SimCommand),
}

#[derive(Subcommand, Debug)]
enum SimCommand {
    /// Run a workload script to its end time and report metrics.
    Run {
        script: PathBuf,
        /// Write the event log here.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Write metrics here instead of stdout.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Metrics of the current session.
    Metrics,
    /// FIB/PIT/CS report for a node of the current session.
    Inspect { node: String },
    /// Event log of the current session.
    Log,
    /// Advance the session clock.
    Advance {
        #[arg(value_parser = parse_wait)]
        by: Millis,
    },
    /// Forget the session in the store.
    Reset,
}

fn parse_wait(s: &str) -> Result<Millis, String> {
    if let Ok(ms) = s.parse::<Millis>() {
        return Ok(ms);
    }
    humantime::parse_duration(s)
        .map(|d| d.as_millis() as Millis)
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = std::io::stdout().lock();
    match run(cli, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let _ = out.flush();
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli, out: &mut impl Write) -> Result<(), Failure> {
    let store = cli.store.clone();
    let open = || Session::open(&store, cli.topology.as_deref(), cli.seed);
    let text = match cli.command {
        Command::Submit {
            app,
            mem,
            cpu,
            params,
            datasets,
            opts,
        } => {
            let spec = compute_spec(app, mem, cpu, &params, &datasets)?;
            let mut s = open()?;
            let client = client(&s.sim, opts.client)?;
            let uri = build_compute_name(&spec).to_uri();
            let action = ScriptAction::Submit {
                client: client.clone(),
                uri: uri.clone(),
                label: None,
            };
            let r = exchange(&mut s, opts.wait, format!("submit {client} {uri}"), action)?;
            s.save()?;
            request_result(&r)?
        }
        Command::Status { job_id, opts } => {
            let id = JobId::parse(&job_id).map_err(|e| Failure::usage(e.to_string()))?;
            let mut s = open()?;
            let client = client(&s.sim, opts.client)?;
            let action = ScriptAction::Status {
                client: client.clone(),
                job: JobRef::Id(id.clone()),
            };
            let r = exchange(&mut s, opts.wait, format!("status {client} {id}"), action)?;
            s.save()?;
            let text = request_result(&r)?;
            if text == "status=unknown" {
                let _ = writeln!(out, "{text}");
                return Err(Failure::new(3, format!("unknown job {id}")));
            }
            text
        }
        Command::Fetch {
            uri,
            out: dest,
            opts,
        } => {
            let name = Name::parse(&uri).map_err(|e| Failure::usage(e.to_string()))?;
            let mut s = open()?;
            let client = client(&s.sim, opts.client)?;
            let uri = name.to_uri();
            let action = ScriptAction::Fetch {
                client: client.clone(),
                uri: uri.clone(),
            };
            let r = exchange(&mut s, opts.wait, format!("fetch {client} {uri}"), action)?;
            s.save()?;
            let text = request_result(&r)?;
            if let Some(dest) = dest {
                let payload = r.payload.unwrap_or_default();
                fs::write(&dest, payload).map_err(|e| Failure::io(&dest, e))?;
            }
            text
        }
        Command::Publish {
            uri,
            file,
            node,
            declared,
            opts,
        } => {
            let name = Name::parse(&uri).map_err(|e| Failure::usage(e.to_string()))?;
            let payload = fs::read(&file)
                .map_err(|e| Failure::usage(format!("reading {}: {e}", file.display())))?;
            let mut s = open()?;
            let node = match node {
                Some(n) if s.sim.cluster(&n).is_some() => n,
                Some(n) => return Err(Failure::usage(format!("{n} is not a cluster"))),
                None => nearest_cluster(&s.sim, &client(&s.sim, opts.client)?)?,
            };
            publish(&mut s, opts.wait, node, name, payload, declared)?
        }
        Command::Sim(cmd) => sim_command(cmd, &cli.store, cli.topology.as_deref(), cli.seed)?,
    };
    match writeln!(out, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::new(1, e.to_string())),
        _ => Ok(()),
    }
}

fn compute_spec(
    app: Option<String>,
    mem: Option<u32>,
    cpu: Option<u32>,
    params: &[String],
    datasets: &[String],
) -> Result<ComputeSpec, Failure> {
    let app = app.ok_or_else(|| Failure::usage("missing --app"))?;
    let mem = mem.ok_or_else(|| Failure::usage("missing --mem"))?;
    let cpu = cpu.ok_or_else(|| Failure::usage("missing --cpu"))?;
    if app.is_empty() {
        return Err(Failure::usage("app must not be empty"));
    }
    if mem == 0 {
        return Err(Failure::usage("mem must be ≥ 1"));
    }
    if cpu == 0 {
        return Err(Failure::usage("cpu must be ≥ 1"));
    }
    let mut spec = ComputeSpec::new(app, mem, cpu);
    for p in params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| Failure::usage(format!("--param {p:?} is not key=value")))?;
        if spec.params.contains_key(k) {
            return Err(Failure::usage(format!("duplicate --param {k}")));
        }
        spec = spec.with_param(k, v);
    }
    for d in datasets {
        spec = spec.with_dataset(Name::parse(d).map_err(|e| Failure::usage(e.to_string()))?);
    }
    spec.validate().map_err(|e| Failure::usage(e.to_string()))?;
    Ok(spec)
}

fn client(sim: &Simulation, requested: Option<String>) -> Result<String, Failure> {
    match requested {
        Some(c) if sim.node_kind(&c) == Some(NodeKind::Client) => Ok(c),
        Some(c) => Err(Failure::usage(format!("{c} is not a client node"))),
        None => sim
            .node_ids()
            .find(|n| sim.node_kind(n) == Some(NodeKind::Client))
            .map(str::to_string)
            .ok_or_else(|| Failure::usage("topology has no client node")),
    }
}

fn nearest_cluster(sim: &Simulation, client: &str) -> Result<String, Failure> {
    sim.node_ids()
        .filter(|n| sim.cluster(n).is_some())
        .filter_map(|n| sim.routes().distance(client, n).map(|d| (d, n)))
        .min()
        .map(|(_, n)| n.to_string())
        .ok_or_else(|| Failure::new(3, format!("no cluster reachable from {client}")))
}

struct Exchange {
    outcome: RequestOutcome,
    payload: Option<Vec<u8>>,
}

/// Issues one request and runs the simulation until it resolves.
fn exchange(
    s: &mut Session,
    wait: Millis,
    line: String,
    action: ScriptAction,
) -> Result<Exchange, Failure> {
    let at = s.sim.now() + wait;
    let req = s
        .push(at, line, action)
        .expect("client actions are requests");
    s.sim.run_until_done(req, at + EXCHANGE_DEADLINE_MS);
    let r = s.sim.request(req).expect("scheduled request exists");
    let outcome = match &r.outcome {
        Some((o, _)) => o.clone(),
        None => RequestOutcome::Failed("timeout".into()),
    };
    Ok(Exchange {
        outcome,
        payload: r.payload.clone(),
    })
}

fn request_result(r: &Exchange) -> Result<String, Failure> {
    match &r.outcome {
        RequestOutcome::Ok(text) => Ok(text.clone()),
        RequestOutcome::Failed(reason) => {
            let code = if reason == "no-route"
                || (reason.starts_with("error:") && reason.ends_with("not found"))
            {
                3
            } else if reason == "digest mismatch" || reason == "bad manifest" {
                4
            } else {
                1
            };
            Err(Failure::new(
                code,
                reason.strip_prefix("error: ").unwrap_or(reason),
            ))
        }
    }
}

fn publish(
    s: &mut Session,
    wait: Millis,
    node: String,
    name: Name,
    payload: Vec<u8>,
    declared: Option<u64>,
) -> Result<String, Failure> {
    let digest = Digest::of(&payload);
    let files = s.store().join(FILES);
    fs::create_dir_all(&files).map_err(|e| Failure::io(&files, e))?;
    let stored = files.join(digest.to_string());
    fs::write(&stored, &payload).map_err(|e| Failure::io(&stored, e))?;

    let at = s.sim.now() + wait;
    let uri = name.to_uri();
    let mut line = format!("publish {node} {uri} file={FILES}/{digest} digest={digest}");
    if let Some(d) = declared {
        line += &format!(" declared={d}");
    }
    let before = s.sim.log().len();
    s.push(
        at,
        line,
        ScriptAction::Publish {
            cluster: node.clone(),
            name,
            source: PublishSource::File {
                path: format!("{FILES}/{digest}"),
                payload: payload.clone(),
            },
            declared,
            digest: Some(digest),
        },
    );
    s.sim.run_until(at);
    let outcome = s.sim.log()[before..].iter().find_map(|e| match &e.record {
        lidc_core::sim::LogRecord::Published {
            stored, declared, ..
        } => Some(Ok((*stored, *declared))),
        lidc_core::sim::LogRecord::ScriptError { detail } => Some(Err(detail.clone())),
        _ => None,
    });
    s.save()?;
    match outcome {
        Some(Ok((stored, declared))) => Ok(format!(
            "published={uri}\nnode={node}\nbytes={stored}\ndeclared={declared}\ndigest={digest}"
        )),
        Some(Err(detail)) => Err(Failure::new(1, detail)),
        None => Err(Failure::new(1, "publish did not run")),
    }
}

fn sim_command(
    cmd: SimCommand,
    store: &Path,
    topology: Option<&Path>,
    seed: Option<u64>,
) -> Result<String, Failure> {
    Ok(match cmd {
        SimCommand::Run {
            script,
            log,
            metrics,
        } => {
            let sim = run_script(&script, topology, seed)?;
            if let Some(path) = log {
                fs::write(&path, render(sim.log())).map_err(|e| Failure::io(&path, e))?;
            }
            let report = sim.metrics().render();
            match metrics {
                Some(path) => {
                    fs::write(&path, &report).map_err(|e| Failure::io(&path, e))?;
                    format!("events={}\nend={}", sim.log().len(), sim.now())
                }
                None => report.trim_end().to_string(),
            }
        }
        SimCommand::Metrics => Session::open(store, topology, seed)?
            .sim
            .metrics()
            .render()
            .trim_end()
            .to_string(),
        SimCommand::Inspect { node } => {
            let s = Session::open(store, topology, seed)?;
            let report = s
                .sim
                .inspect(&node)
                .ok_or_else(|| Failure::new(3, format!("unknown node {node}")))?;
            report.trim_end().to_string()
        }
        SimCommand::Log => render(Session::open(store, topology, seed)?.sim.log())
            .trim_end()
            .to_string(),
        SimCommand::Advance { by } => {
            let mut s = Session::open(store, topology, seed)?;
            let end = s.sim.now() + by;
            s.sim.run_until(end);
            s.save()?;
            format!("now={end}")
        }
        SimCommand::Reset => {
            Session::reset(store).map_err(|e| Failure::io(store, e))?;
            "reset=ok".to_string()
        }
    })
}

/// Runs a workload script to its end time (or to quiescence without one).
pub fn run_script(
    script: &Path,
    topology: Option<&Path>,
    seed: Option<u64>,
) -> Result<Simulation, Failure> {
    let text = fs::read_to_string(script)
        .map_err(|e| Failure::usage(format!("reading {}: {e}", script.display())))?;
    let workload = Workload::parse_with_base(&text, script.parent()).map_err(|e| {
        let msg = format!("{}: {e}", script.display());
        match e {
            ScriptError::Integrity { .. } => Failure::integrity(msg),
            ScriptError::Config(_) => Failure::usage(msg),
        }
    })?;
    let topo = topology
        .map(Path::to_path_buf)
        .or(workload.topology.clone())
        .ok_or_else(|| Failure::usage(format!("{}: no topology given", script.display())))?;
    let mut sim = load_topology(&topo, seed.or(workload.seed).unwrap_or(1))?;
    sim.load_workload(&workload);
    match workload.end {
        Some(end) => sim.run_until(end),
        None => sim.run(),
    }
    Ok(sim)
}
