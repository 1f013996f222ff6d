// SPDX-License-Identifier: Apache-2.0

//! Acceptance run: one PASS/FAIL line per criterion. Exits non-zero if any fail.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest as _, Sha256};

use lidc_core::datalake::manifest_name;
use lidc_core::forwarder::{DataDisposition, Emission, FaceId, Fib, Forwarder, StrategyKind};
use lidc_core::name::{build_compute_name, Component, ComputeSpec, Name, ParsedRequest};
use lidc_core::sim::synth::JobMix;
use lidc_core::sim::{
    LogRecord, RequestOutcome, ScriptAction, Simulation, TopologyChange, TopologyConfig, Workload,
};
use lidc_core::wire::{
    decode_data, decode_interest, encode_data, encode_interest, ContentType, DataPacket, Interest,
};
use lidc_core::JobStatus;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("end-to-end workflow", workflow),
        ("location independence", location_independence),
        ("trace replay", trace_replay),
        ("lpm oracle", lpm_oracle),
        ("pit aggregation", pit_aggregation),
        ("result caching", result_caching),
        ("round trips", round_trips),
        ("resource ledger", resource_ledger),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (title, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let ms = started.elapsed().as_millis();
        match result {
            Ok(detail) => println!("PASS {} {title} ({ms} ms): {detail}", i + 1),
            Err(reason) => {
                failed += 1;
                println!("FAIL {} {title} ({ms} ms): {reason}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scenario(name: &str) -> PathBuf {
    root().join("scenarios").join(name)
}

fn load(topo: &str, seed: u64) -> Simulation {
    let path = scenario(topo);
    let text = std::fs::read_to_string(&path).unwrap();
    let cfg = TopologyConfig::parse_with_base(&text, path.parent()).unwrap();
    Simulation::new(&cfg, seed).unwrap()
}

fn lidc(store: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lidc"))
        .arg("--store")
        .arg(store)
        .args(args)
        .output()
        .expect("lidc runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn blast_row1() -> ComputeSpec {
    ComputeSpec::new("BLAST", 4, 2).with_param("srr", "SRR2931415")
}

fn submit(client: &str, spec: &ComputeSpec) -> ScriptAction {
    ScriptAction::Submit {
        client: client.into(),
        uri: build_compute_name(spec).to_uri(),
        label: None,
    }
}

// 1 -------------------------------------------------------------------------

fn workflow() -> Outcome {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let topo = scenario("two_cluster.topo");
    let o = lidc(
        &store,
        &[
            "--topology",
            topo.to_str().unwrap(),
            "--seed",
            "42",
            "submit",
            "--app",
            "BLAST",
            "--mem",
            "4",
            "--cpu",
            "2",
            "--param",
            "srr=SRR2931415",
        ],
    );
    ensure!(o.status.success(), "submit exited {:?}", o.status.code());
    let text = stdout(&o);
    let id = text
        .trim()
        .strip_prefix("job_id=")
        .ok_or(format!("no job_id in {text:?}"))?
        .to_string();

    let mut seen = Vec::new();
    for wait in ["1s", "2s", "8h10m"] {
        let o = lidc(&store, &["status", &id, "--wait", wait]);
        ensure!(o.status.success(), "status exited {:?}", o.status.code());
        seen.push(stdout(&o));
    }
    let result = format!("/ndn/k8s/data/results/{id}");
    ensure!(seen[0] == "status=Pending\n", "first status {:?}", seen[0]);
    ensure!(seen[1] == "status=Running\n", "second status {:?}", seen[1]);
    ensure!(
        seen[2] == format!("status=Completed\nresult={result}\n"),
        "third status {:?}",
        seen[2]
    );

    let out = dir.path().join("result.bin");
    let o = lidc(&store, &["fetch", &result, "--out", out.to_str().unwrap()]);
    ensure!(o.status.success(), "fetch exited {:?}", o.status.code());
    let summary = stdout(&o);
    let claimed = summary
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("digest="))
        .ok_or(format!("no digest in {summary:?}"))?;
    let actual = sha256_hex(&std::fs::read(&out).unwrap());
    ensure!(
        claimed == actual,
        "fetched payload hashes to {actual}, manifest says {claimed}"
    );

    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!(
        "job_id={id}, Pending -> Running -> Completed, fetched digest verified, {} ms wall-clock",
        elapsed.as_millis()
    ))
}

// 2 -------------------------------------------------------------------------

fn location_independence() -> Outcome {
    let spec = blast_row1();
    let deadline = 30_000_000;

    let mut with_a = load("two_cluster.topo", 7);
    let first = with_a.schedule(0, submit("c1", &spec)).unwrap();
    with_a.run_until(deadline);

    let mut without_a = load("two_cluster.topo", 7);
    without_a.schedule(
        0,
        ScriptAction::Topology(TopologyChange::RemoveNode {
            id: "A".into(),
            cluster_only: true,
        }),
    );
    let second = without_a.schedule(0, submit("c1", &spec)).unwrap();
    without_a.run_until(deadline);

    let mut served = Vec::new();
    for (sim, req) in [(&with_a, first), (&without_a, second)] {
        let r = sim.request(req).unwrap();
        let job = r
            .job_id
            .clone()
            .ok_or(format!("request {req} got {:?}", r.outcome))?;
        let status = sim
            .cluster(&r.placement)
            .and_then(|c| c.gateway.job(&job))
            .map(|j| j.status)
            .ok_or(format!("job {job} not found on {}", r.placement))?;
        ensure!(
            status == JobStatus::Completed,
            "job {job} on {} is {status}",
            r.placement
        );
        served.push(r.placement.clone());
    }
    ensure!(served == ["A", "B"], "served by {served:?}");

    let a = &with_a.request(first).unwrap().interests;
    let b = &without_a.request(second).unwrap().interests;
    ensure!(
        !a.is_empty() && a == b,
        "client Interest bytes differ between runs"
    );
    Ok(format!(
        "served by A, then by B after remove-cluster A; {} client Interest(s), {} bytes, identical",
        a.len(),
        a.iter().map(Vec::len).sum::<usize>()
    ))
}

// 3 -------------------------------------------------------------------------

/// Parses "941 MB" or "2.71 GB" into decimal bytes without floating point.
fn decimal_bytes(text: &str) -> u64 {
    let (num, unit) = text.split_once(' ').unwrap();
    let scale: u64 = match unit {
        "MB" => 1_000_000,
        "GB" => 1_000_000_000,
        _ => panic!("unit {unit}"),
    };
    let (int, frac) = num.split_once('.').unwrap_or((num, ""));
    let mut value = int.parse::<u64>().unwrap() * scale;
    let mut place = scale;
    for d in frac.chars() {
        place /= 10;
        value += u64::from(d.to_digit(10).unwrap()) * place;
    }
    value
}

fn trace_replay() -> Outcome {
    let expected = [
        ("SRR2931415", 4, 2, "8h9m50s", "941 MB"),
        ("SRR2931415", 4, 4, "8h7m10s", "941 MB"),
        ("SRR5139395", 4, 2, "24h16m12s", "2.71 GB"),
        ("SRR5139395", 6, 2, "24h2m47s", "2.71 GB"),
    ];
    let mut sim = load("two_cluster.topo", 5);
    let reqs: Vec<u64> = expected
        .iter()
        .map(|(srr, mem, cpu, _, _)| {
            let spec = ComputeSpec::new("BLAST", *mem, *cpu).with_param("srr", *srr);
            sim.schedule(0, submit("c1", &spec)).unwrap()
        })
        .collect();
    sim.run();

    let mut shown = Vec::new();
    for (req, (srr, mem, cpu, runtime, size)) in reqs.into_iter().zip(expected) {
        let r = sim.request(req).unwrap();
        let job = r.job_id.clone().ok_or(format!("{srr} submit failed"))?;
        let c = sim
            .cluster(&r.placement)
            .ok_or(format!("{srr}: no cluster {}", r.placement))?;
        let rec = c.gateway.job(&job).unwrap();
        ensure!(
            rec.status == JobStatus::Completed,
            "{srr}/{mem}/{cpu} ended {}",
            rec.status
        );
        let ran_ms = rec.finished_at.unwrap() - rec.started_at.unwrap();
        let want = humantime::parse_duration(runtime).unwrap();
        ensure!(
            ran_ms == want.as_millis() as u64,
            "{srr}/{mem}/{cpu}: ran {ran_ms} ms, expected {runtime}"
        );
        let manifest = c
            .lake
            .get_manifest(rec.result_name.as_ref().unwrap())
            .map_err(|e| e.to_string())?;
        ensure!(
            manifest.declared_size == decimal_bytes(size),
            "{srr}/{mem}/{cpu}: declared {} bytes, expected {size}",
            manifest.declared_size
        );
        shown.push(format!("{runtime}/{size}"));
    }
    Ok(shown.join(", "))
}

// 4 -------------------------------------------------------------------------

fn random_name(rng: &mut ChaCha8Rng, alphabet: &[&str], max_len: usize) -> Name {
    let len = rng.gen_range(0..=max_len);
    Name::from_components(
        (0..len)
            .map(|_| Component::new(alphabet[rng.gen_range(0..alphabet.len())]).unwrap())
            .collect(),
    )
}

fn lpm_oracle() -> Outcome {
    let alphabet = [
        "ndn", "k8s", "compute", "data", "status", "a", "b", "seg=0", "x%2Fy",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut cases = 0;
    while cases < 1000 {
        let mut fib = Fib::new();
        let mut prefixes = Vec::new();
        for _ in 0..rng.gen_range(1..25) {
            let p = random_name(&mut rng, &alphabet, 4);
            fib.register(p.clone(), FaceId(rng.gen_range(1..8)), rng.gen_range(0..40));
            prefixes.push(p);
        }
        for _ in 0..20 {
            let name = random_name(&mut rng, &alphabet, 6);
            let brute = prefixes
                .iter()
                .filter(|p| p.len() <= name.len() && (0..p.len()).all(|i| p.get(i) == name.get(i)))
                .max_by_key(|p| p.len());
            let got = fib.lpm_lookup(&name).map(|(p, _)| p);
            ensure!(
                got == brute,
                "case {cases}: {name} -> {got:?}, brute force {brute:?}"
            );
            cases += 1;
        }
    }
    Ok(format!("{cases} cases, 0 disagreements"))
}

// 5 -------------------------------------------------------------------------

fn pit_aggregation() -> Outcome {
    let mut f = Forwarder::new(StrategyKind::BestCost, 64);
    let upstream = FaceId(50);
    let name = Name::parse("/ndn/k8s/data/results/0123456789abcdef/seg=0").unwrap();
    f.fib
        .register(Name::parse("/ndn/k8s/data").unwrap(), upstream, 3);
    let mut forwards = 0;
    for i in 0..10u32 {
        let interest = Interest::new(name.clone(), 0x1000 + i);
        let out = f.on_interest(FaceId(i + 1), &interest, u64::from(i) * 100);
        forwards += out
            .emissions
            .iter()
            .filter(|e| matches!(e, Emission::Forward { face, .. } if *face == upstream))
            .count();
    }
    let out = f.on_data(
        upstream,
        &DataPacket::new(name, vec![7; 100], 60_000),
        1_000,
    );
    ensure!(
        matches!(out.disposition, DataDisposition::Satisfied { .. }),
        "data disposition {:?}",
        out.disposition
    );
    let delivered: BTreeSet<FaceId> = out
        .emissions
        .iter()
        .filter_map(|e| match e {
            Emission::Reply { face, .. } => Some(*face),
            _ => None,
        })
        .collect();
    ensure!(forwards == 1, "{forwards} upstream forwards");
    ensure!(
        out.emissions.len() == 10 && delivered == (1..=10).map(FaceId).collect(),
        "{} deliveries to {} faces",
        out.emissions.len(),
        delivered.len()
    );
    Ok("10 Interests -> 1 upstream forward, 10 Data deliveries".into())
}

// 6 -------------------------------------------------------------------------

fn upstream_sends(sim: &Simulation, since: u64) -> usize {
    sim.log()
        .iter()
        .filter(|e| e.at >= since)
        .filter(|e| match &e.record {
            LogRecord::Send { node, peer, .. } => {
                node == "A" || node == "B" || peer == "A" || peer == "B"
            }
            _ => false,
        })
        .count()
}

fn answer(sim: &Simulation, req: u64) -> Outcome {
    match &sim.request(req).unwrap().outcome {
        Some((RequestOutcome::Ok(s), _)) => Ok(s.clone()),
        other => Err(format!("request {req}: {other:?}")),
    }
}

fn result_caching() -> Outcome {
    let mut sim = load("two_cluster.topo", 42);
    let req = sim.schedule(0, submit("c1", &blast_row1())).unwrap();
    sim.run_until(30_000_000);
    let job = sim
        .request(req)
        .unwrap()
        .job_id
        .clone()
        .ok_or("submit failed")?;
    let result = job.result_name();
    let manifest = manifest_name(&result);

    let t1 = sim.now() + 1;
    let first = sim.inject_interest("c1", &manifest, t1);
    sim.run_until(t1 + 1_000);
    let before = sim.metrics();
    let t2 = sim.now() + 1;
    let second = sim.inject_interest("c2", &manifest, t2);
    sim.run_until(t2 + 1_000);
    let after = sim.metrics();

    ensure!(
        answer(&sim, first)? == answer(&sim, second)?,
        "the two retrievals returned different Data"
    );
    let hits = after.cache_hits - before.cache_hits;
    let upstream = upstream_sends(&sim, t2);
    let a_delta = after.packets_by_node.get("A") != before.packets_by_node.get("A");
    ensure!(hits == 1, "cache-hit delta {hits}");
    ensure!(
        upstream == 0 && !a_delta,
        "{upstream} packets beyond r1 on the second retrieval"
    );
    ensure!(
        sim.request(second).unwrap().placement == "-",
        "second retrieval reached a gateway"
    );

    // Whole segmented fetch: every packet of the repeat is a hit at r1.
    let t3 = sim.now() + 1;
    let fetch_a = sim
        .schedule(
            t3,
            ScriptAction::Fetch {
                client: "c1".into(),
                uri: result.to_uri(),
            },
        )
        .unwrap();
    sim.run_until(t3 + 1_000);
    let mid = sim.metrics();
    let t4 = sim.now() + 1;
    let fetch_b = sim
        .schedule(
            t4,
            ScriptAction::Fetch {
                client: "c2".into(),
                uri: result.to_uri(),
            },
        )
        .unwrap();
    sim.run_until(t4 + 1_000);
    let end = sim.metrics();
    ensure!(
        answer(&sim, fetch_a)? == answer(&sim, fetch_b)?,
        "segmented fetches differ"
    );
    let segs = sim.request(fetch_b).unwrap().interests.len() as u64;
    ensure!(
        end.cache_hits - mid.cache_hits == segs && upstream_sends(&sim, t4) == 0,
        "repeat fetch: {} hits for {segs} Interests, {} upstream packets",
        end.cache_hits - mid.cache_hits,
        upstream_sends(&sim, t4)
    );
    Ok(format!(
        "repeat result retrieval: cache hits +1, upstream packets +0; repeat full fetch: {segs}/{segs} hits, upstream +0"
    ))
}

// 7 -------------------------------------------------------------------------

fn rand_bytes(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> Vec<u8> {
    let n = rng.gen_range(lo..hi);
    (0..n).map(|_| rng.gen()).collect()
}

fn rand_name(rng: &mut ChaCha8Rng) -> Name {
    Name::from_components(
        (0..rng.gen_range(0..8))
            .map(|_| Component::new(rand_bytes(rng, 1, 20)).unwrap())
            .collect(),
    )
}

fn rand_text(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> String {
    const POOL: &[char] = &[
        'a', 'Z', '0', '9', '_', '-', '.', '&', '=', '%', '/', ' ', '+', 'é', '字', '~', '?',
    ];
    (0..rng.gen_range(lo..hi))
        .map(|_| POOL[rng.gen_range(0..POOL.len())])
        .collect()
}

fn rand_spec(rng: &mut ChaCha8Rng) -> ComputeSpec {
    let app = format!("A{}", rand_text(rng, 0, 8));
    let mut spec = ComputeSpec::new(
        app,
        rng.gen_range(1..=u32::MAX),
        rng.gen_range(1..=u32::MAX),
    );
    for _ in 0..rng.gen_range(0..4) {
        let key = format!("k{}", rand_text(rng, 0, 6));
        spec = spec.with_param(key, rand_text(rng, 1, 10));
    }
    for _ in 0..rng.gen_range(0..3) {
        spec = spec.with_dataset(rand_name(rng));
    }
    spec
}

fn rand_data(rng: &mut ChaCha8Rng) -> DataPacket {
    let mut d = DataPacket::new(rand_name(rng), rand_bytes(rng, 0, 400), rng.gen());
    d.content_type =
        [ContentType::Blob, ContentType::NoRoute, ContentType::Error][rng.gen_range(0..3)];
    d
}

fn round_trips() -> Outcome {
    const N: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for i in 0..N {
        let n = rand_name(&mut rng);
        ensure!(Name::parse(&n.to_uri()).as_ref() == Ok(&n), "name {i}: {n}");
    }
    for i in 0..N {
        let spec = rand_spec(&mut rng);
        let name = build_compute_name(&spec);
        let reparsed = Name::parse(&name.to_uri()).map_err(|e| format!("spec {i}: {e}"))?;
        ensure!(
            reparsed == name,
            "spec {i}: uri round trip changed the name"
        );
        match ParsedRequest::classify(&reparsed) {
            Ok(ParsedRequest::Compute(back)) => {
                ensure!(back == spec, "spec {i}: {back:?} != {spec:?}")
            }
            other => return Err(format!("spec {i}: classified as {other:?}")),
        }
    }
    for i in 0..N {
        let interest = Interest {
            name: rand_name(&mut rng),
            nonce: rng.gen(),
            lifetime_ms: rng.gen(),
        };
        ensure!(
            decode_interest(&encode_interest(&interest)).as_ref() == Ok(&interest),
            "interest {i}"
        );
    }
    let mut rejected = 0;
    for i in 0..N {
        let d = rand_data(&mut rng);
        let mut bytes = encode_data(&d);
        ensure!(decode_data(&bytes).as_ref() == Ok(&d), "data {i}");
        let pos = rng.gen_range(0..bytes.len());
        bytes[pos] = bytes[pos].wrapping_add(rng.gen_range(1..=255));
        match decode_data(&bytes) {
            Ok(got) => ensure!(
                got.name == d.name && got.content == d.content,
                "data {i}: corruption at byte {pos} accepted with a different payload"
            ),
            Err(_) => rejected += 1,
        }
    }
    Ok(format!(
        "{N} each of names, specs, Interests, Data round-trip; {N} corrupted Data: {rejected} rejected, {} decoded unchanged",
        N - rejected
    ))
}

// 8 -------------------------------------------------------------------------

fn valid_history(h: &[JobStatus]) -> bool {
    use JobStatus::*;
    matches!(
        h,
        [Pending]
            | [Pending, Running]
            | [Pending, Running, Completed]
            | [Pending, Running, Failed]
            | [Pending, Failed]
    )
}

fn resource_ledger() -> Outcome {
    let mut sim = load("three_cluster.topo", 8);
    let mix = JobMix {
        jobs: 200,
        horizon_ms: 600_000,
        clients: vec!["c1".into(), "c2".into(), "c3".into()],
        dataset: Name::parse("/ndn/k8s/data/in/small").unwrap(),
        max_cpu: 4,
        max_mem: 8,
    };
    sim.load_workload(&mix.generate(8));
    sim.run();

    // Replay: a job holds its resources from its Running record until its
    // terminal record.
    let mut used: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    let mut holding: BTreeMap<(String, String), (u64, u64)> = BTreeMap::new();
    let mut checks = 0;
    let mut peak = 0u64;
    for e in sim.log() {
        match &e.record {
            LogRecord::Job {
                node,
                job,
                status,
                cpu,
                mem,
                ..
            } => {
                let key = (node.clone(), job.to_string());
                let u = used.entry(node.clone()).or_default();
                match status {
                    JobStatus::Running => {
                        ensure!(
                            holding
                                .insert(key, (u64::from(*cpu), u64::from(*mem)))
                                .is_none(),
                            "{job} started twice"
                        );
                        u.0 += u64::from(*cpu);
                        u.1 += u64::from(*mem);
                    }
                    JobStatus::Completed | JobStatus::Failed => {
                        if let Some((c, m)) = holding.remove(&key) {
                            u.0 -= c;
                            u.1 -= m;
                        }
                    }
                    JobStatus::Pending => {}
                }
            }
            LogRecord::Ledger {
                node,
                cpu_used,
                cpu_total,
                mem_used,
                mem_total,
            } => {
                let replayed = used.get(node).copied().unwrap_or_default();
                ensure!(
                    replayed == (u64::from(*cpu_used), u64::from(*mem_used)),
                    "{} ev={}: ledger {node} cpu={cpu_used} mem={mem_used}, replay {replayed:?}",
                    e.at,
                    e.event
                );
                ensure!(
                    cpu_used <= cpu_total && mem_used <= mem_total,
                    "{node} over capacity at {}",
                    e.at
                );
                peak = peak.max(u64::from(*cpu_used));
                checks += 1;
            }
            _ => {}
        }
        for (node, (c, m)) in &used {
            let r = sim
                .cluster(node)
                .map(|c| c.orchestrator.resources())
                .ok_or(format!("{node} gone"))?;
            ensure!(
                *c <= u64::from(r.cpu_total) && *m <= u64::from(r.mem_total_gb),
                "{node} replay exceeds capacity at {}",
                e.at
            );
        }
    }
    ensure!(checks > 0, "no ledger records");
    ensure!(
        holding.is_empty(),
        "{} jobs still hold resources after the run",
        holding.len()
    );

    let mut jobs = 0;
    let mut by_status: BTreeMap<JobStatus, usize> = BTreeMap::new();
    for id in ["A", "B", "C"] {
        let c = sim.cluster(id).unwrap();
        let r = c.orchestrator.resources();
        ensure!(
            r.cpu_used == 0 && r.mem_used_gb == 0,
            "{id} still reserves resources"
        );
        for rec in c.gateway.jobs() {
            let h: Vec<JobStatus> = rec.history.iter().map(|(s, _)| *s).collect();
            ensure!(valid_history(&h), "{}: invalid history {h:?}", rec.job_id);
            ensure!(
                rec.history.windows(2).all(|w| w[0].1 <= w[1].1),
                "{}: history goes back in time",
                rec.job_id
            );
            jobs += 1;
            *by_status.entry(rec.status).or_default() += 1;
        }
    }
    ensure!(jobs >= 190, "only {jobs} distinct jobs recorded");
    Ok(format!(
        "{jobs} jobs ({by_status:?}), {checks} ledger snapshots match replay, peak cpu {peak}, all histories valid"
    ))
}

// 9 -------------------------------------------------------------------------

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut scripts: Vec<PathBuf> = std::fs::read_dir(root().join("scenarios"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "workload"))
        .collect();
    scripts.sort();
    ensure!(!scripts.is_empty(), "no bundled scenarios");
    let mut names = Vec::new();
    for script in &scripts {
        let stem = script.file_stem().unwrap().to_string_lossy().into_owned();
        let mut runs = Vec::new();
        for run in 0..2 {
            let log = dir.path().join(format!("{stem}.{run}.log"));
            let metrics = dir.path().join(format!("{stem}.{run}.metrics"));
            let o = lidc(
                dir.path(),
                &[
                    "sim",
                    "run",
                    script.to_str().unwrap(),
                    "--log",
                    log.to_str().unwrap(),
                    "--metrics",
                    metrics.to_str().unwrap(),
                ],
            );
            ensure!(o.status.success(), "{stem}: exit {:?}", o.status.code());
            runs.push((std::fs::read(log).unwrap(), std::fs::read(metrics).unwrap()));
        }
        ensure!(runs[0].0 == runs[1].0, "{stem}: event logs differ");
        ensure!(runs[0].1 == runs[1].1, "{stem}: metrics differ");
        // In-process run must agree with the CLI's files too.
        let w =
            Workload::parse_with_base(&std::fs::read_to_string(script).unwrap(), script.parent())
                .unwrap();
        let mut sim = load(
            w.topology
                .as_ref()
                .unwrap()
                .file_name()
                .unwrap()
                .to_str()
                .unwrap(),
            w.seed.unwrap_or(1),
        );
        sim.load_workload(&w);
        match w.end {
            Some(end) => sim.run_until(end),
            None => sim.run(),
        }
        ensure!(
            lidc_core::sim::log::render(sim.log()).as_bytes() == runs[0].0.as_slice(),
            "{stem}: library and CLI logs differ"
        );
        names.push(format!("{stem} ({} log bytes)", runs[0].0.len()));
    }
    Ok(format!(
        "byte-identical logs and metrics: {}",
        names.join(", ")
    ))
}
