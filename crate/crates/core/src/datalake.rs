// SPDX-License-Identifier: Apache-2.0

//! Named dataset repository.
//!
//! Datasets live under `/ndn/k8s/data`. Each has a manifest served at
//! `<name>/manifest` and fixed-size segments at `<name>/seg=<i>`. The
//! manifest may declare a size larger than the bytes actually stored, which
//! lets multi-gigabyte results be represented by a bounded synthetic payload.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::digest::Digest;
use crate::name::{data_prefix, escape_param, unescape_param, Name};
use crate::wire::{DataPacket, MAX_PACKET_SIZE};

pub const DEFAULT_SEGMENT_SIZE: u64 = 8 * 1024;
/// Freshness attached to manifest and segment Data.
pub const LAKE_FRESHNESS_MS: u64 = 3_600_000;
pub const MANIFEST_COMPONENT: &str = "manifest";
const SEGMENT_PREFIX: &str = "seg=";

#[derive(Debug, thiserror::Error)]
pub enum LakeError {
    #[error("{0} is already published")]
    NameCollision(Name),
    #[error("{0} is outside /ndn/k8s/data")]
    NamespaceViolation(Name),
    #[error("{0} uses a reserved final component")]
    ReservedName(Name),
    #[error("declared size {declared} is below stored size {stored}")]
    InvalidDeclaredSize { declared: u64, stored: u64 },
    #[error("{0} not found")]
    NotFound(Name),
    #[error("segment {index} out of range for {name} ({count} segments)")]
    SegmentOutOfRange { name: Name, index: u64, count: u64 },
    #[error("bad manifest: {0}")]
    BadManifest(String),
    #[error("payload digest does not match manifest")]
    DigestMismatch,
    #[error("corrupt store at {path}: {reason}")]
    CorruptStore { path: String, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub name: Name,
    pub declared_size: u64,
    pub stored_size: u64,
    pub segment_size: u64,
    pub segment_count: u64,
    pub digest: Digest,
}

impl DatasetManifest {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "name={}", self.name).unwrap();
        writeln!(out, "declared_size={}", self.declared_size).unwrap();
        writeln!(out, "stored_size={}", self.stored_size).unwrap();
        writeln!(out, "segment_size={}", self.segment_size).unwrap();
        writeln!(out, "segment_count={}", self.segment_count).unwrap();
        writeln!(out, "digest={}", self.digest).unwrap();
        out
    }

    pub fn parse(text: &str) -> Result<Self, LakeError> {
        let mut fields = BTreeMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| LakeError::BadManifest(format!("line {line:?} has no '='")))?;
            if fields.insert(k, v).is_some() {
                return Err(LakeError::BadManifest(format!("duplicate key {k}")));
            }
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| LakeError::BadManifest(format!("missing {k}")))
        };
        let num = |k: &str| -> Result<u64, LakeError> {
            get(k)?
                .parse()
                .map_err(|_| LakeError::BadManifest(format!("{k} is not an integer")))
        };
        let name = Name::parse(get("name")?).map_err(|e| LakeError::BadManifest(e.to_string()))?;
        let digest = get("digest")?
            .parse()
            .map_err(|_| LakeError::BadManifest("bad digest".into()))?;
        let m = DatasetManifest {
            name,
            declared_size: num("declared_size")?,
            stored_size: num("stored_size")?,
            segment_size: num("segment_size")?,
            segment_count: num("segment_count")?,
            digest,
        };
        if m.segment_size == 0 || m.segment_count != m.stored_size.div_ceil(m.segment_size) {
            return Err(LakeError::BadManifest(
                "segment count inconsistent with sizes".into(),
            ));
        }
        if m.declared_size < m.stored_size {
            return Err(LakeError::BadManifest(
                "declared size below stored size".into(),
            ));
        }
        Ok(m)
    }

    pub fn manifest_name(&self) -> Name {
        self.name.child(MANIFEST_COMPONENT)
    }

    pub fn segment_name(&self, index: u64) -> Name {
        segment_name(&self.name, index)
    }
}

pub fn segment_name(dataset: &Name, index: u64) -> Name {
    dataset.child(format!("{SEGMENT_PREFIX}{index}"))
}

pub fn manifest_name(dataset: &Name) -> Name {
    dataset.child(MANIFEST_COMPONENT)
}

/// Concatenates segments in order and checks the result against the manifest.
pub fn reassemble(manifest: &DatasetManifest, segments: &[Vec<u8>]) -> Result<Vec<u8>, LakeError> {
    if segments.len() as u64 != manifest.segment_count {
        return Err(LakeError::DigestMismatch);
    }
    let payload = segments.concat();
    if payload.len() as u64 != manifest.stored_size || Digest::of(&payload) != manifest.digest {
        return Err(LakeError::DigestMismatch);
    }
    Ok(payload)
}

/// What a lake-bound Interest name refers to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LakeRequest {
    Manifest(Name),
    Segment(Name, u64),
}

impl LakeRequest {
    pub fn parse(name: &Name) -> Option<Self> {
        let last = std::str::from_utf8(name.last()?.as_bytes()).ok()?;
        let dataset = name.prefix(name.len() - 1);
        if last == MANIFEST_COMPONENT {
            return Some(LakeRequest::Manifest(dataset));
        }
        let index = last.strip_prefix(SEGMENT_PREFIX)?;
        if index.is_empty()
            || !index.bytes().all(|b| b.is_ascii_digit())
            || (index.len() > 1 && index.starts_with('0'))
        {
            return None;
        }
        Some(LakeRequest::Segment(dataset, index.parse().ok()?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Dataset {
    manifest: DatasetManifest,
    payload: Vec<u8>,
}

/// One cluster's repository. Reads take `&self`; publishing needs `&mut self`,
/// so callers sharing a lake serialize writers by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataLake {
    segment_size: u64,
    datasets: BTreeMap<Name, Dataset>,
}

impl Default for DataLake {
    fn default() -> Self {
        DataLake::new(DEFAULT_SEGMENT_SIZE)
    }
}

impl DataLake {
    /// Panics if a segment Data packet could exceed the wire packet bound.
    pub fn new(segment_size: u64) -> Self {
        assert!(segment_size > 0, "segment size must be positive");
        assert!(
            segment_size as usize <= MAX_PACKET_SIZE / 2,
            "segments must fit in one packet"
        );
        DataLake {
            segment_size,
            datasets: BTreeMap::new(),
        }
    }

    pub fn segment_size(&self) -> u64 {
        self.segment_size
    }

    pub fn publish(
        &mut self,
        name: Name,
        payload: Vec<u8>,
        declared_size: u64,
        overwrite: bool,
    ) -> Result<DatasetManifest, LakeError> {
        let prefix = data_prefix();
        if !prefix.is_prefix_of(&name) || name.len() == prefix.len() {
            return Err(LakeError::NamespaceViolation(name));
        }
        if LakeRequest::parse(&name).is_some() {
            return Err(LakeError::ReservedName(name));
        }
        if !overwrite && self.datasets.contains_key(&name) {
            return Err(LakeError::NameCollision(name));
        }
        let stored_size = payload.len() as u64;
        if declared_size < stored_size {
            return Err(LakeError::InvalidDeclaredSize {
                declared: declared_size,
                stored: stored_size,
            });
        }
        let manifest = DatasetManifest {
            name: name.clone(),
            declared_size,
            stored_size,
            segment_size: self.segment_size,
            segment_count: stored_size.div_ceil(self.segment_size),
            digest: Digest::of(&payload),
        };
        self.datasets.insert(
            name,
            Dataset {
                manifest: manifest.clone(),
                payload,
            },
        );
        Ok(manifest)
    }

    pub fn contains(&self, name: &Name) -> bool {
        self.datasets.contains_key(name)
    }

    pub fn get_manifest(&self, name: &Name) -> Result<&DatasetManifest, LakeError> {
        self.datasets
            .get(name)
            .map(|d| &d.manifest)
            .ok_or_else(|| LakeError::NotFound(name.clone()))
    }

    pub fn payload(&self, name: &Name) -> Result<&[u8], LakeError> {
        self.datasets
            .get(name)
            .map(|d| d.payload.as_slice())
            .ok_or_else(|| LakeError::NotFound(name.clone()))
    }

    pub fn get_segment(&self, name: &Name, index: u64) -> Result<&[u8], LakeError> {
        let d = self
            .datasets
            .get(name)
            .ok_or_else(|| LakeError::NotFound(name.clone()))?;
        let count = d.manifest.segment_count;
        if index >= count {
            return Err(LakeError::SegmentOutOfRange {
                name: name.clone(),
                index,
                count,
            });
        }
        let start = (index * self.segment_size) as usize;
        let end = (start + self.segment_size as usize).min(d.payload.len());
        Ok(&d.payload[start..end])
    }

    /// Answers a manifest or segment Interest name with a Data packet.
    pub fn serve(&self, name: &Name) -> Result<DataPacket, LakeError> {
        match LakeRequest::parse(name) {
            Some(LakeRequest::Manifest(dataset)) => {
                let m = self.get_manifest(&dataset)?;
                Ok(DataPacket::new(
                    name.clone(),
                    m.to_text().into_bytes(),
                    LAKE_FRESHNESS_MS,
                ))
            }
            Some(LakeRequest::Segment(dataset, index)) => {
                let bytes = self.get_segment(&dataset, index)?;
                Ok(DataPacket::new(
                    name.clone(),
                    bytes.to_vec(),
                    LAKE_FRESHNESS_MS,
                ))
            }
            None => Err(LakeError::NotFound(name.clone())),
        }
    }

    pub fn manifests(&self) -> impl Iterator<Item = &DatasetManifest> {
        self.datasets.values().map(|d| &d.manifest)
    }

    pub fn len(&self) -> usize {
        self.datasets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.datasets.is_empty()
    }

    /// Writes one directory per dataset (escaped name) holding `manifest` and `payload`.
    pub fn persist(&self, root: &Path) -> Result<(), LakeError> {
        fs::create_dir_all(root)?;
        for d in self.datasets.values() {
            let dir = root.join(dir_name(&d.manifest.name));
            fs::create_dir_all(&dir)?;
            fs::write(dir.join("manifest"), d.manifest.to_text())?;
            fs::write(dir.join("payload"), &d.payload)?;
        }
        Ok(())
    }

    pub fn load(root: &Path) -> Result<Self, LakeError> {
        let mut entries: Vec<_> = fs::read_dir(root)?.collect::<Result<_, _>>()?;
        entries.sort_by_key(|e| e.file_name());
        let mut lake: Option<DataLake> = None;
        for entry in entries {
            let path = entry.path();
            if !path.is_dir() {
                continue;
            }
            let corrupt = |reason: String| LakeError::CorruptStore {
                path: path.display().to_string(),
                reason,
            };
            let text = fs::read_to_string(path.join("manifest"))?;
            let manifest = DatasetManifest::parse(&text).map_err(|e| corrupt(e.to_string()))?;
            let expected_dir = dir_name(&manifest.name);
            if entry.file_name().to_str() != Some(expected_dir.as_str()) {
                return Err(corrupt(
                    "directory name does not match manifest name".into(),
                ));
            }
            let payload = fs::read(path.join("payload"))?;
            if payload.len() as u64 != manifest.stored_size
                || Digest::of(&payload) != manifest.digest
            {
                return Err(corrupt("payload digest mismatch".into()));
            }
            let lake = lake.get_or_insert_with(|| DataLake::new(manifest.segment_size));
            if manifest.segment_size != lake.segment_size {
                return Err(corrupt("mixed segment sizes".into()));
            }
            lake.datasets
                .insert(manifest.name.clone(), Dataset { manifest, payload });
        }
        Ok(lake.unwrap_or_default())
    }
}

fn dir_name(name: &Name) -> String {
    escape_param(name.to_uri().as_bytes())
}

/// Inverse of the directory naming used by [`DataLake::persist`].
pub fn name_from_dir(dir: &str) -> Option<Name> {
    let bytes = unescape_param(dir)?;
    Name::parse(std::str::from_utf8(&bytes).ok()?).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> Name {
        Name::parse(s).unwrap()
    }

    fn sample(len: usize) -> Vec<u8> {
        (0..len).map(|i| (i * 31 % 251) as u8).collect()
    }

    #[test]
    fn twenty_kib_in_three_segments() {
        let mut lake = DataLake::default();
        let payload = sample(20 * 1024);
        let m = lake
            .publish(n("/ndn/k8s/data/x"), payload.clone(), 20 * 1024, false)
            .unwrap();
        assert_eq!(m.segment_count, 20480u64.div_ceil(8192));
        assert_eq!(m.segment_count, 3);
        let last = lake.get_segment(&n("/ndn/k8s/data/x"), 2).unwrap();
        assert_eq!(last.len(), 4096);
        assert_eq!(last, &payload[16384..]);
        assert!(matches!(
            lake.get_segment(&n("/ndn/k8s/data/x"), 3),
            Err(LakeError::SegmentOutOfRange {
                index: 3,
                count: 3,
                ..
            })
        ));
        let segs: Vec<Vec<u8>> = (0..3)
            .map(|i| lake.get_segment(&m.name, i).unwrap().to_vec())
            .collect();
        assert_eq!(reassemble(&m, &segs).unwrap(), payload);
    }

    #[test]
    fn empty_payload() {
        let mut lake = DataLake::default();
        let m = lake
            .publish(n("/ndn/k8s/data/empty"), vec![], 0, false)
            .unwrap();
        assert_eq!(m.segment_count, 0);
        assert_eq!(reassemble(&m, &[]).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn namespace_and_collision() {
        let mut lake = DataLake::default();
        assert!(matches!(
            lake.publish(n("/ndn/k8s/compute/x"), vec![1], 1, false),
            Err(LakeError::NamespaceViolation(_))
        ));
        assert!(matches!(
            lake.publish(n("/ndn/k8s/data"), vec![1], 1, false),
            Err(LakeError::NamespaceViolation(_))
        ));
        assert!(matches!(
            lake.publish(n("/ndn/k8s/data/x/manifest"), vec![1], 1, false),
            Err(LakeError::ReservedName(_))
        ));
        lake.publish(n("/ndn/k8s/data/x"), vec![1], 1, false)
            .unwrap();
        assert!(matches!(
            lake.publish(n("/ndn/k8s/data/x"), vec![2], 1, false),
            Err(LakeError::NameCollision(_))
        ));
        lake.publish(n("/ndn/k8s/data/x"), vec![2], 1, true)
            .unwrap();
        assert_eq!(lake.payload(&n("/ndn/k8s/data/x")).unwrap(), [2]);
        assert!(matches!(
            lake.publish(n("/ndn/k8s/data/y"), vec![1, 2], 1, false),
            Err(LakeError::InvalidDeclaredSize { .. })
        ));
    }

    #[test]
    fn serve_manifest_and_segments() {
        let mut lake = DataLake::default();
        let m = lake
            .publish(n("/ndn/k8s/data/r"), sample(9000), 941_000_000, false)
            .unwrap();
        let d = lake.serve(&m.manifest_name()).unwrap();
        let parsed = DatasetManifest::parse(std::str::from_utf8(&d.content).unwrap()).unwrap();
        assert_eq!(parsed, m);
        assert_eq!(parsed.declared_size, 941_000_000);
        assert_eq!(
            lake.serve(&m.segment_name(1)).unwrap().content.len(),
            9000 - 8192
        );
        assert!(matches!(
            lake.serve(&n("/ndn/k8s/data/r")),
            Err(LakeError::NotFound(_))
        ));
        assert!(matches!(
            lake.serve(&n("/ndn/k8s/data/q/manifest")),
            Err(LakeError::NotFound(_))
        ));
        assert!(lake.serve(&n("/ndn/k8s/data/r/seg=01")).is_err());
    }

    #[test]
    fn reassembly_detects_tampering() {
        let mut lake = DataLake::default();
        let m = lake
            .publish(n("/ndn/k8s/data/r"), sample(100), 100, false)
            .unwrap();
        let mut seg = lake.get_segment(&m.name, 0).unwrap().to_vec();
        seg[0] ^= 1;
        assert!(matches!(
            reassemble(&m, &[seg]),
            Err(LakeError::DigestMismatch)
        ));
    }

    #[test]
    fn manifest_text_format() {
        let mut lake = DataLake::default();
        let m = lake
            .publish(n("/ndn/k8s/data/a"), b"abc".to_vec(), 3, false)
            .unwrap();
        let text = m.to_text();
        let keys: Vec<&str> = text.lines().map(|l| l.split('=').next().unwrap()).collect();
        assert_eq!(
            keys,
            [
                "name",
                "declared_size",
                "stored_size",
                "segment_size",
                "segment_count",
                "digest"
            ]
        );
        assert!(text.starts_with("name=/ndn/k8s/data/a\n"));
    }

    #[test]
    fn persist_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut lake = DataLake::default();
        lake.publish(
            n("/ndn/k8s/data/ref/human"),
            sample(30_000),
            3_000_000_000,
            false,
        )
        .unwrap();
        lake.publish(n("/ndn/k8s/data/sra/SRR2931415"), sample(10), 10, false)
            .unwrap();
        lake.persist(dir.path()).unwrap();
        let dirs = fs::read_dir(dir.path()).unwrap().count();
        assert_eq!(dirs, 2);
        assert!(dir
            .path()
            .join("%2Fndn%2Fk8s%2Fdata%2Fref%2Fhuman")
            .is_dir());
        assert_eq!(DataLake::load(dir.path()).unwrap(), lake);
    }

    #[test]
    fn tampered_payload_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let mut lake = DataLake::default();
        lake.publish(n("/ndn/k8s/data/x"), sample(50), 50, false)
            .unwrap();
        lake.persist(dir.path()).unwrap();
        let payload = dir
            .path()
            .join(dir_name(&n("/ndn/k8s/data/x")))
            .join("payload");
        let mut bytes = fs::read(&payload).unwrap();
        bytes[3] ^= 0xFF;
        fs::write(&payload, bytes).unwrap();
        assert!(matches!(
            DataLake::load(dir.path()),
            Err(LakeError::CorruptStore { .. })
        ));
    }

    #[test]
    fn dir_names_invert() {
        let name = n("/ndn/k8s/data/a%2Fb/c");
        assert_eq!(name_from_dir(&dir_name(&name)).unwrap(), name);
    }
}
