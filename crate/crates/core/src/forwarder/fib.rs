// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use super::FaceId;
use crate::name::Name;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NextHop {
    pub face: FaceId,
    pub cost: u64,
}

/// Prefix to next-hop table. Each prefix has one entry whose next hops are
/// kept sorted by `(cost, face)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Fib {
    entries: BTreeMap<Name, Vec<NextHop>>,
}

impl Fib {
    pub fn new() -> Self {
        Fib::default()
    }

    /// Adds `face` as a next hop for `prefix`, replacing its cost if the face
    /// is already present.
    pub fn register(&mut self, prefix: Name, face: FaceId, cost: u64) {
        let hops = self.entries.entry(prefix).or_default();
        hops.retain(|h| h.face != face);
        hops.push(NextHop { face, cost });
        hops.sort_by_key(|h| (h.cost, h.face));
    }

    pub fn unregister(&mut self, prefix: &Name, face: FaceId) {
        if let Some(hops) = self.entries.get_mut(prefix) {
            hops.retain(|h| h.face != face);
            if hops.is_empty() {
                self.entries.remove(prefix);
            }
        }
    }

    /// Drops every next hop through `face`.
    pub fn remove_face(&mut self, face: FaceId) {
        self.entries.retain(|_, hops| {
            hops.retain(|h| h.face != face);
            !hops.is_empty()
        });
    }

    pub fn remove_prefix(&mut self, prefix: &Name) {
        self.entries.remove(prefix);
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn get(&self, prefix: &Name) -> Option<&[NextHop]> {
        self.entries.get(prefix).map(Vec::as_slice)
    }

    /// Longest-prefix match: probes prefixes of `name` from longest to shortest.
    pub fn lpm_lookup(&self, name: &Name) -> Option<(&Name, &[NextHop])> {
        (0..=name.len()).rev().find_map(|len| {
            self.entries
                .get_key_value(&name.prefix(len))
                .map(|(k, v)| (k, v.as_slice()))
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, &[NextHop])> {
        self.entries.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> Name {
        Name::parse(s).unwrap()
    }

    #[test]
    fn register_then_lookup() {
        let mut fib = Fib::new();
        fib.register(n("/ndn/k8s/compute"), FaceId(2), 10);
        let (prefix, hops) = fib
            .lpm_lookup(&n("/ndn/k8s/compute/mem=4&cpu=6&app=BLAST"))
            .unwrap();
        assert_eq!(prefix, &n("/ndn/k8s/compute"));
        assert_eq!(
            hops,
            [NextHop {
                face: FaceId(2),
                cost: 10
            }]
        );
    }

    #[test]
    fn re_register_updates_cost() {
        let mut fib = Fib::new();
        fib.register(n("/p"), FaceId(1), 10);
        fib.register(n("/p"), FaceId(1), 3);
        assert_eq!(
            fib.get(&n("/p")).unwrap(),
            [NextHop {
                face: FaceId(1),
                cost: 3
            }]
        );
    }

    #[test]
    fn next_hops_sorted_by_cost() {
        let mut fib = Fib::new();
        fib.register(n("/p"), FaceId(1), 5);
        fib.register(n("/p"), FaceId(2), 3);
        let mut naive = vec![(5, 1), (3, 2)];
        naive.sort();
        let got: Vec<_> = fib
            .get(&n("/p"))
            .unwrap()
            .iter()
            .map(|h| (h.cost, h.face.0))
            .collect();
        assert_eq!(got, naive);
    }

    #[test]
    fn longest_match_wins() {
        let mut fib = Fib::new();
        fib.register(n("/ndn/k8s"), FaceId(1), 0);
        fib.register(n("/ndn/k8s/data"), FaceId(2), 0);
        let (prefix, _) = fib.lpm_lookup(&n("/ndn/k8s/data/x")).unwrap();
        assert_eq!(prefix, &n("/ndn/k8s/data"));
        let (prefix, _) = fib.lpm_lookup(&n("/ndn/k8s/compute/x")).unwrap();
        assert_eq!(prefix, &n("/ndn/k8s"));
    }

    #[test]
    fn empty_and_root() {
        let mut fib = Fib::new();
        assert!(fib.lpm_lookup(&n("/a")).is_none());
        fib.register(Name::root(), FaceId(9), 1);
        assert_eq!(fib.lpm_lookup(&n("/a/b/c")).unwrap().0, &Name::root());
        assert_eq!(fib.lpm_lookup(&Name::root()).unwrap().0, &Name::root());
    }

    #[test]
    fn removal() {
        let mut fib = Fib::new();
        fib.register(n("/a"), FaceId(1), 1);
        fib.register(n("/a"), FaceId(2), 2);
        fib.register(n("/b"), FaceId(2), 2);
        fib.remove_face(FaceId(2));
        assert_eq!(fib.len(), 1);
        fib.unregister(&n("/a"), FaceId(1));
        assert!(fib.is_empty());
    }
}
