// SPDX-License-Identifier: Apache-2.0

//! Hierarchical semantic names and the compute-request grammar layered on them.
//!
//! A [`Name`] is an ordered list of non-empty byte components rendered as
//! `/a/b/c`. Two escaping levels exist:
//!
//! * URI level: a component's `/`, `%` and bytes outside `0x21..=0x7E` are
//!   percent-escaped when a name is rendered.
//! * Parameter level: inside the compute component, keys and values are
//!   additionally escaped for `&`, `=` and `,`, so the `key=value&...` structure
//!   can be split unambiguously.
//!
//! Compute names look like `/ndn/k8s/compute/app=BLAST&cpu=2&mem=4&srr=SRR2931415`,
//! always serialized with keys in alphabetical order so equal requests produce
//! byte-identical names.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::digest::Digest;

/// Namespace root shared by every request the framework serves.
pub const ROOT_PREFIX: &str = "/ndn/k8s";
pub const COMPUTE_PREFIX: &str = "/ndn/k8s/compute";
pub const DATA_PREFIX: &str = "/ndn/k8s/data";
pub const STATUS_PREFIX: &str = "/ndn/k8s/status";
pub const RESULTS_PREFIX: &str = "/ndn/k8s/data/results";

const KEY_APP: &str = "app";
const KEY_CPU: &str = "cpu";
const KEY_MEM: &str = "mem";
const KEY_DATA: &str = "data";
const RESERVED_KEYS: [&str; 4] = [KEY_APP, KEY_CPU, KEY_DATA, KEY_MEM];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NameError {
    #[error("malformed uri {uri:?}: {reason}")]
    MalformedUri { uri: String, reason: &'static str },
    #[error("missing required key {0:?}")]
    MissingKey(&'static str),
    #[error("bad value for {key:?}: {value:?}")]
    BadValue { key: String, value: String },
    #[error("duplicate key {0:?}")]
    DuplicateKey(String),
    #[error("malformed compute parameters: {0}")]
    MalformedParams(String),
    #[error("invalid job id {0:?}")]
    InvalidJobId(String),
    #[error("name {0} is not under a known prefix")]
    UnknownPrefix(String),
}

/// One non-empty name component.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Component(Vec<u8>);

impl Component {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Option<Self> {
        let bytes = bytes.into();
        (!bytes.is_empty()).then_some(Component(bytes))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&escape(&self.0, is_uri_safe))
    }
}

/// A hierarchical name. Ordering compares component by component, each
/// bytewise; a proper prefix sorts before its extensions.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name {
    components: Vec<Component>,
}

impl Name {
    pub fn root() -> Self {
        Name::default()
    }

    pub fn from_components(components: Vec<Component>) -> Self {
        Name { components }
    }

    /// Parses the `/a/b` text form. Escapes are normalized, so `%41` and `A`
    /// produce the same name.
    pub fn parse(text: &str) -> Result<Self, NameError> {
        let malformed = |reason| NameError::MalformedUri {
            uri: text.to_string(),
            reason,
        };
        let rest = text
            .strip_prefix('/')
            .ok_or_else(|| malformed("missing leading slash"))?;
        if rest.is_empty() {
            return Ok(Name::root());
        }
        let mut components = Vec::new();
        for segment in rest.split('/') {
            if segment.is_empty() {
                return Err(malformed("empty component"));
            }
            let bytes = unescape(segment).ok_or_else(|| malformed("invalid percent escape"))?;
            components.push(Component(bytes));
        }
        Ok(Name { components })
    }

    pub fn to_uri(&self) -> String {
        if self.components.is_empty() {
            return "/".to_string();
        }
        let mut out = String::new();
        for c in &self.components {
            out.push('/');
            out.push_str(&escape(&c.0, is_uri_safe));
        }
        out
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Component> {
        self.components.get(index)
    }

    pub fn last(&self) -> Option<&Component> {
        self.components.last()
    }

    /// The first `len` components.
    pub fn prefix(&self, len: usize) -> Name {
        Name {
            components: self.components[..len.min(self.components.len())].to_vec(),
        }
    }

    /// Returns a copy extended by one component.
    ///
    /// Panics if `component` is empty; use [`Component::new`] for fallible construction.
    pub fn child(&self, component: impl Into<Vec<u8>>) -> Name {
        let c = Component::new(component).expect("name components must be non-empty");
        let mut components = self.components.clone();
        components.push(c);
        Name { components }
    }

    pub fn push(&mut self, component: Component) {
        self.components.push(component);
    }

    pub fn is_prefix_of(&self, other: &Name) -> bool {
        self.components.len() <= other.components.len()
            && self
                .components
                .iter()
                .zip(&other.components)
                .all(|(a, b)| a == b)
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_uri())
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Name({})", self.to_uri())
    }
}

impl FromStr for Name {
    type Err = NameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Name::parse(s)
    }
}

/// Free-function spelling of [`Name::parse`].
pub fn parse_uri(text: &str) -> Result<Name, NameError> {
    Name::parse(text)
}

pub fn to_uri(name: &Name) -> String {
    name.to_uri()
}

pub fn is_prefix_of(prefix: &Name, name: &Name) -> bool {
    prefix.is_prefix_of(name)
}

fn is_uri_safe(b: u8) -> bool {
    (0x21..=0x7E).contains(&b) && b != b'/' && b != b'%'
}

fn is_param_safe(b: u8) -> bool {
    is_uri_safe(b) && !matches!(b, b'&' | b'=' | b',')
}

fn escape(bytes: &[u8], safe: fn(u8) -> bool) -> String {
    let mut out = String::with_capacity(bytes.len());
    for &b in bytes {
        if safe(b) {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

fn unescape(text: &str) -> Option<Vec<u8>> {
    let bytes = text.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = bytes.get(i + 1..i + 3)?;
            let hex = std::str::from_utf8(hex).ok()?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    Some(out)
}

/// Escapes a value for embedding inside the compute parameter component.
pub fn escape_param(bytes: &[u8]) -> String {
    escape(bytes, is_param_safe)
}

pub fn unescape_param(text: &str) -> Option<Vec<u8>> {
    unescape(text)
}

/// Parsed parameters of a compute request.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ComputeSpec {
    pub app: String,
    pub mem_gb: u32,
    pub cpu: u32,
    /// Application parameters, e.g. `srr=SRR2931415`.
    pub params: BTreeMap<String, String>,
    /// Input datasets from the data lake.
    pub datasets: Vec<Name>,
}

impl ComputeSpec {
    pub fn new(app: impl Into<String>, mem_gb: u32, cpu: u32) -> Self {
        ComputeSpec {
            app: app.into(),
            mem_gb,
            cpu,
            params: BTreeMap::new(),
            datasets: Vec::new(),
        }
    }

    pub fn with_param(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.params.insert(key.into(), value.into());
        self
    }

    pub fn with_dataset(mut self, name: Name) -> Self {
        self.datasets.push(name);
        self
    }

    pub fn param(&self, key: &str) -> Option<&str> {
        self.params.get(key).map(String::as_str)
    }

    pub fn validate(&self) -> Result<(), NameError> {
        if self.app.is_empty() {
            return Err(NameError::MissingKey(KEY_APP));
        }
        if self.mem_gb == 0 {
            return Err(bad(KEY_MEM, "0"));
        }
        if self.cpu == 0 {
            return Err(bad(KEY_CPU, "0"));
        }
        for (k, v) in &self.params {
            if k.is_empty() || RESERVED_KEYS.contains(&k.as_str()) {
                return Err(NameError::DuplicateKey(k.clone()));
            }
            if v.is_empty() {
                return Err(bad(k, v));
            }
        }
        Ok(())
    }

    /// The canonical parameter component: keys sorted, values parameter-escaped.
    pub fn to_component(&self) -> Vec<u8> {
        let mut pairs: BTreeMap<&str, String> = BTreeMap::new();
        pairs.insert(KEY_APP, escape_param(self.app.as_bytes()));
        pairs.insert(KEY_CPU, self.cpu.to_string());
        pairs.insert(KEY_MEM, self.mem_gb.to_string());
        if !self.datasets.is_empty() {
            let list: Vec<String> = self
                .datasets
                .iter()
                .map(|n| escape_param(n.to_uri().as_bytes()))
                .collect();
            pairs.insert(KEY_DATA, list.join(","));
        }
        let mut out = String::new();
        for (k, v) in &self.params {
            pairs.insert(k.as_str(), escape_param(v.as_bytes()));
        }
        for (i, (k, v)) in pairs.iter().enumerate() {
            if i > 0 {
                out.push('&');
            }
            out.push_str(&escape_param(k.as_bytes()));
            out.push('=');
            out.push_str(v);
        }
        out.into_bytes()
    }

    /// Parses the final component of a compute name.
    pub fn from_component(component: &[u8]) -> Result<Self, NameError> {
        let text = std::str::from_utf8(component)
            .map_err(|_| NameError::MalformedParams("component is not valid UTF-8".into()))?;
        let mut fields: BTreeMap<String, String> = BTreeMap::new();
        for pair in text.split('&') {
            let (raw_key, raw_value) = pair
                .split_once('=')
                .ok_or_else(|| NameError::MalformedParams(format!("{pair:?} has no '='")))?;
            let key = decode_token(raw_key)?;
            if key.is_empty() {
                return Err(NameError::MalformedParams(format!("empty key in {pair:?}")));
            }
            if fields.contains_key(&key) {
                return Err(NameError::DuplicateKey(key));
            }
            fields.insert(key, raw_value.to_string());
        }

        let app = fields
            .remove(KEY_APP)
            .ok_or(NameError::MissingKey(KEY_APP))?;
        let mem = fields
            .remove(KEY_MEM)
            .ok_or(NameError::MissingKey(KEY_MEM))?;
        let cpu = fields
            .remove(KEY_CPU)
            .ok_or(NameError::MissingKey(KEY_CPU))?;
        let app = decode_token(&app)?;
        if app.is_empty() {
            return Err(NameError::MissingKey(KEY_APP));
        }
        let mem_gb = parse_positive(KEY_MEM, &mem)?;
        let cpu = parse_positive(KEY_CPU, &cpu)?;

        let mut datasets = Vec::new();
        if let Some(list) = fields.remove(KEY_DATA) {
            for item in list.split(',') {
                let uri = decode_token(item)?;
                let name = Name::parse(&uri).map_err(|_| bad(KEY_DATA, item))?;
                datasets.push(name);
            }
        }

        let mut params = BTreeMap::new();
        for (k, v) in fields {
            let value = decode_token(&v)?;
            if value.is_empty() {
                return Err(bad(&k, &v));
            }
            params.insert(k, value);
        }

        Ok(ComputeSpec {
            app,
            mem_gb,
            cpu,
            params,
            datasets,
        })
    }
}

fn bad(key: &str, value: &str) -> NameError {
    NameError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    }
}

fn decode_token(raw: &str) -> Result<String, NameError> {
    let bytes = unescape(raw)
        .ok_or_else(|| NameError::MalformedParams(format!("bad escape in {raw:?}")))?;
    String::from_utf8(bytes)
        .map_err(|_| NameError::MalformedParams(format!("{raw:?} is not UTF-8")))
}

fn parse_positive(key: &str, value: &str) -> Result<u32, NameError> {
    // u32::from_str accepts a leading '+'; canonical names never contain one.
    if value.is_empty() || !value.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad(key, value));
    }
    match value.parse::<u32>() {
        Ok(n) if n >= 1 && n.to_string() == value => Ok(n),
        _ => Err(bad(key, value)),
    }
}

pub fn parse_compute_component(component: &[u8]) -> Result<ComputeSpec, NameError> {
    ComputeSpec::from_component(component)
}

/// `/ndn/k8s/compute/<canonical parameters>`.
pub fn build_compute_name(spec: &ComputeSpec) -> Name {
    compute_prefix().child(spec.to_component())
}

pub fn compute_prefix() -> Name {
    Name::parse(COMPUTE_PREFIX).expect("static prefix")
}

pub fn data_prefix() -> Name {
    Name::parse(DATA_PREFIX).expect("static prefix")
}

pub fn status_prefix() -> Name {
    Name::parse(STATUS_PREFIX).expect("static prefix")
}

pub fn results_prefix() -> Name {
    Name::parse(RESULTS_PREFIX).expect("static prefix")
}

pub fn root_prefix() -> Name {
    Name::parse(ROOT_PREFIX).expect("static prefix")
}

/// Sixteen lowercase hex characters identifying one job submission.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JobId(String);

impl JobId {
    /// First eight digest bytes of the canonical compute name followed by the
    /// big-endian nonce.
    pub fn derive(compute_name: &Name, nonce: u32) -> Self {
        let uri = compute_name.to_uri();
        let digest = Digest::of_parts(&[uri.as_bytes(), &nonce.to_be_bytes()]);
        JobId(hex::encode(&digest.as_bytes()[..8]))
    }

    pub fn parse(text: &str) -> Result<Self, NameError> {
        let ok = text.len() == 16 && text.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'));
        if ok {
            Ok(JobId(text.to_string()))
        } else {
            Err(NameError::InvalidJobId(text.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn status_name(&self) -> Name {
        status_prefix().child(self.0.as_bytes())
    }

    pub fn result_name(&self) -> Name {
        results_prefix().child(self.0.as_bytes())
    }
}

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "JobId({})", self.0)
    }
}

impl FromStr for JobId {
    type Err = NameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        JobId::parse(s)
    }
}

/// What an incoming Interest name asks for, decided by its prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedRequest {
    Compute(ComputeSpec),
    Data(Name),
    Status(JobId),
}

impl ParsedRequest {
    pub fn classify(name: &Name) -> Result<Self, NameError> {
        if compute_prefix().is_prefix_of(name) && name.len() == 4 {
            let last = name.last().expect("len checked");
            return ComputeSpec::from_component(last.as_bytes()).map(ParsedRequest::Compute);
        }
        if status_prefix().is_prefix_of(name) && name.len() == 4 {
            let raw = name.last().expect("len checked").as_bytes();
            let text =
                std::str::from_utf8(raw).map_err(|_| NameError::InvalidJobId(name.to_uri()))?;
            return JobId::parse(text).map(ParsedRequest::Status);
        }
        if data_prefix().is_prefix_of(name) && name.len() > 3 {
            return Ok(ParsedRequest::Data(name.clone()));
        }
        Err(NameError::UnknownPrefix(name.to_uri()))
    }
}
