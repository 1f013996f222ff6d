// SPDX-License-Identifier: Apache-2.0

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lidc_core::forwarder::{
    DataDisposition, Emission, FaceId, Fib, Forwarder, InterestDisposition, NextHop, StrategyKind,
};
use lidc_core::name::{Component, Name};
use lidc_core::wire::{DataPacket, Interest};

fn random_name(rng: &mut ChaCha8Rng, alphabet: &[&str], max_len: usize) -> Name {
    let len = rng.gen_range(0..=max_len);
    Name::from_components(
        (0..len)
            .map(|_| Component::new(alphabet[rng.gen_range(0..alphabet.len())]).unwrap())
            .collect(),
    )
}

/// Scans every entry and keeps the longest one that prefixes `name`,
/// comparing component by component.
fn brute_force_lpm<'a>(entries: &'a [(Name, Vec<NextHop>)], name: &Name) -> Option<&'a Name> {
    entries
        .iter()
        .filter(|(p, _)| {
            p.len() <= name.len()
                && (0..p.len())
                    .all(|i| p.get(i).unwrap().as_bytes() == name.get(i).unwrap().as_bytes())
        })
        .max_by_key(|(p, _)| p.len())
        .map(|(p, _)| p)
}

#[test]
fn lpm_agrees_with_brute_force() {
    let alphabet = ["ndn", "k8s", "compute", "data", "a", "b", "seg=0", "x%2Fy"];
    let mut rng = ChaCha8Rng::seed_from_u64(0x1fb);
    let mut cases = 0;
    for _ in 0..100 {
        let mut fib = Fib::new();
        let mut entries: Vec<(Name, Vec<NextHop>)> = Vec::new();
        for _ in 0..rng.gen_range(0..30) {
            let p = random_name(&mut rng, &alphabet, 4);
            let face = FaceId(rng.gen_range(1..6));
            let cost = rng.gen_range(0..50);
            fib.register(p.clone(), face, cost);
            match entries.iter_mut().find(|(q, _)| *q == p) {
                Some((_, hops)) => {
                    hops.retain(|h| h.face != face);
                    hops.push(NextHop { face, cost });
                }
                None => entries.push((p, vec![NextHop { face, cost }])),
            }
        }
        for _ in 0..10 {
            let name = random_name(&mut rng, &alphabet, 6);
            let expected = brute_force_lpm(&entries, &name);
            let got = fib.lpm_lookup(&name).map(|(p, _)| p);
            assert_eq!(got, expected, "name {name}");
            if let (Some((_, hops)), Some(p)) = (fib.lpm_lookup(&name), expected) {
                let mut want = entries.iter().find(|(q, _)| q == p).unwrap().1.clone();
                want.sort_by_key(|h| (h.cost, h.face));
                assert_eq!(hops, want.as_slice());
            }
            cases += 1;
        }
    }
    assert_eq!(cases, 1000);
}

#[test]
fn best_cost_is_argmin_excluding_in_face() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let prefix = Name::parse("/ndn/k8s/compute").unwrap();
    let mut strategy = StrategyKind::BestCost.build();
    for _ in 0..1000 {
        let mut hops: Vec<NextHop> = (0..rng.gen_range(1..6))
            .map(|i| NextHop {
                face: FaceId(i + 1),
                cost: rng.gen_range(0..20),
            })
            .collect();
        hops.sort_by_key(|h| (h.cost, h.face));
        let in_face = FaceId(rng.gen_range(0..7));
        let oracle = hops
            .iter()
            .filter(|h| h.face != in_face)
            .min_by(|a, b| a.cost.cmp(&b.cost).then(a.face.cmp(&b.face)))
            .map(|h| h.face);
        assert_eq!(strategy.select(&prefix, &hops, in_face), oracle);
    }
}

#[test]
fn ten_interests_aggregate_into_one_forward() {
    let mut f = Forwarder::new(StrategyKind::BestCost, 16);
    let name = Name::parse("/ndn/k8s/data/results/00aa00aa00aa00aa/seg=0").unwrap();
    f.fib
        .register(Name::parse("/ndn/k8s/data").unwrap(), FaceId(99), 5);
    let mut upstream = 0;
    for i in 0..10u32 {
        let out = f.on_interest(
            FaceId(i + 1),
            &Interest::new(name.clone(), 1000 + i),
            u64::from(i) * 10,
        );
        upstream += out
            .emissions
            .iter()
            .filter(|e| matches!(e, Emission::Forward { .. }))
            .count();
        let expected = if i == 0 {
            InterestDisposition::Forwarded(FaceId(99))
        } else {
            InterestDisposition::Aggregated
        };
        assert_eq!(out.disposition, expected);
    }
    assert_eq!(upstream, 1);
    let out = f.on_data(
        FaceId(99),
        &DataPacket::new(name, b"payload".to_vec(), 1000),
        200,
    );
    assert_eq!(out.disposition, DataDisposition::Satisfied { cached: true });
    let faces: Vec<FaceId> = out
        .emissions
        .iter()
        .map(|e| match e {
            Emission::Reply { face, .. } => *face,
            other => panic!("unexpected {other:?}"),
        })
        .collect();
    assert_eq!(faces, (1..=10).map(FaceId).collect::<Vec<_>>());
}

#[test]
fn repeated_nonce_is_a_loop_not_an_aggregate() {
    let mut f = Forwarder::new(StrategyKind::BestCost, 16);
    let name = Name::parse("/ndn/k8s/compute/app=x&cpu=1&mem=1").unwrap();
    f.fib
        .register(Name::parse("/ndn/k8s/compute").unwrap(), FaceId(3), 1);
    f.on_interest(FaceId(1), &Interest::new(name.clone(), 42), 0);
    let out = f.on_interest(FaceId(2), &Interest::new(name, 42), 1);
    assert_eq!(out.disposition, InterestDisposition::LoopDropped);
    assert!(out.emissions.is_empty());
}
