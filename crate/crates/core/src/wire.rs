// SPDX-License-Identifier: Apache-2.0

//! TLV encoding of Interest and Data packets.
//!
//! Layout (type and length octets, big-endian numbers):
//!
//! ```text
//! Interest  05 L  [07 L name (08 L comp)*] [0A 04 nonce] [0C L lifetime]
//! Data      06 L  [07 L name] [14 L freshness] [18 L content-type]? [15 L content] [17 20 digest]
//! ```
//!
//! Lengths below 253 take one octet, otherwise `FD` + u16, or `FE` + u32 for
//! values above 65535. Non-negative integers use the fewest big-endian octets.
//! Decoding rejects any non-minimal form so that every packet has exactly one
//! valid encoding.

use std::io::{self, Read, Write};

use crate::digest::{Digest, DIGEST_LEN};
use crate::name::{Component, Name};

pub const TLV_INTEREST: u8 = 0x05;
pub const TLV_DATA: u8 = 0x06;
pub const TLV_NAME: u8 = 0x07;
pub const TLV_COMPONENT: u8 = 0x08;
pub const TLV_NONCE: u8 = 0x0A;
pub const TLV_LIFETIME: u8 = 0x0C;
pub const TLV_FRESHNESS: u8 = 0x14;
pub const TLV_CONTENT: u8 = 0x15;
pub const TLV_DIGEST: u8 = 0x17;
pub const TLV_CONTENT_TYPE: u8 = 0x18;

/// Upper bound on any encoded packet.
pub const MAX_PACKET_SIZE: usize = 1 << 20;
pub const DEFAULT_LIFETIME_MS: u64 = 4000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("truncated packet")]
    TruncatedPacket,
    #[error("unknown TLV type 0x{found:02X} (expected 0x{expected:02X})")]
    UnknownTlvType { expected: u8, found: u8 },
    #[error("length mismatch in {0}")]
    LengthMismatch(&'static str),
    #[error("non-canonical or invalid {0}")]
    MalformedField(&'static str),
    #[error("packet of {0} bytes exceeds the {MAX_PACKET_SIZE} byte limit")]
    PacketTooLarge(usize),
    #[error("content digest does not match")]
    DigestMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Interest {
    pub name: Name,
    pub nonce: u32,
    pub lifetime_ms: u64,
}

impl Interest {
    pub fn new(name: Name, nonce: u32) -> Self {
        Interest {
            name,
            nonce,
            lifetime_ms: DEFAULT_LIFETIME_MS,
        }
    }
}

/// Marks Data that is not an ordinary payload. Blob is implied when the
/// content-type element is absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ContentType {
    #[default]
    Blob,
    /// Network-level negative acknowledgement: no route for the name.
    NoRoute,
    /// Application-level error; content carries a message.
    Error,
}

impl ContentType {
    fn code(self) -> u64 {
        match self {
            ContentType::Blob => 0,
            ContentType::NoRoute => 3,
            ContentType::Error => 4,
        }
    }

    fn from_code(code: u64) -> Option<Self> {
        match code {
            3 => Some(ContentType::NoRoute),
            4 => Some(ContentType::Error),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ContentType::Blob => "blob",
            ContentType::NoRoute => "no-route",
            ContentType::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DataPacket {
    pub name: Name,
    pub content_type: ContentType,
    pub content: Vec<u8>,
    pub freshness_ms: u64,
    pub digest: Digest,
}

impl DataPacket {
    pub fn new(name: Name, content: Vec<u8>, freshness_ms: u64) -> Self {
        let digest = content_digest(&name, &content);
        DataPacket {
            name,
            content_type: ContentType::Blob,
            content,
            freshness_ms,
            digest,
        }
    }

    pub fn with_type(name: Name, content_type: ContentType, content: Vec<u8>) -> Self {
        let mut d = DataPacket::new(name, content, 0);
        d.content_type = content_type;
        d
    }

    pub fn no_route(name: Name) -> Self {
        DataPacket::with_type(name, ContentType::NoRoute, b"no-route".to_vec())
    }

    pub fn error(name: Name, message: &str) -> Self {
        DataPacket::with_type(name, ContentType::Error, message.as_bytes().to_vec())
    }

    pub fn verify(&self) -> bool {
        content_digest(&self.name, &self.content) == self.digest
    }
}

/// Digest over the encoded name element followed by the content bytes.
pub fn content_digest(name: &Name, content: &[u8]) -> Digest {
    let mut encoded = Vec::new();
    write_name(&mut encoded, name);
    Digest::of_parts(&[&encoded, content])
}

fn write_length(out: &mut Vec<u8>, len: usize) {
    if len < 253 {
        out.push(len as u8);
    } else if len <= u16::MAX as usize {
        out.push(0xFD);
        out.extend_from_slice(&(len as u16).to_be_bytes());
    } else {
        out.push(0xFE);
        out.extend_from_slice(&(len as u32).to_be_bytes());
    }
}

fn write_tlv(out: &mut Vec<u8>, tlv_type: u8, value: &[u8]) {
    out.push(tlv_type);
    write_length(out, value.len());
    out.extend_from_slice(value);
}

fn nonneg_bytes(value: u64) -> Vec<u8> {
    let bytes = value.to_be_bytes();
    let skip = bytes.iter().take_while(|&&b| b == 0).count().min(7);
    bytes[skip..].to_vec()
}

fn write_name(out: &mut Vec<u8>, name: &Name) {
    let mut inner = Vec::new();
    for c in name.components() {
        write_tlv(&mut inner, TLV_COMPONENT, c.as_bytes());
    }
    write_tlv(out, TLV_NAME, &inner);
}

pub fn encode_interest(interest: &Interest) -> Vec<u8> {
    let mut inner = Vec::new();
    write_name(&mut inner, &interest.name);
    write_tlv(&mut inner, TLV_NONCE, &interest.nonce.to_be_bytes());
    write_tlv(
        &mut inner,
        TLV_LIFETIME,
        &nonneg_bytes(interest.lifetime_ms),
    );
    let mut out = Vec::with_capacity(inner.len() + 4);
    write_tlv(&mut out, TLV_INTEREST, &inner);
    out
}

pub fn encode_data(data: &DataPacket) -> Vec<u8> {
    let mut inner = Vec::new();
    write_name(&mut inner, &data.name);
    write_tlv(&mut inner, TLV_FRESHNESS, &nonneg_bytes(data.freshness_ms));
    if data.content_type != ContentType::Blob {
        write_tlv(
            &mut inner,
            TLV_CONTENT_TYPE,
            &nonneg_bytes(data.content_type.code()),
        );
    }
    write_tlv(&mut inner, TLV_CONTENT, &data.content);
    write_tlv(&mut inner, TLV_DIGEST, data.digest.as_bytes());
    let mut out = Vec::with_capacity(inner.len() + 6);
    write_tlv(&mut out, TLV_DATA, &inner);
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn is_empty(&self) -> bool {
        self.pos == self.buf.len()
    }

    fn peek_type(&self) -> Option<u8> {
        self.buf.get(self.pos).copied()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        let end = self.pos.checked_add(n).ok_or(WireError::TruncatedPacket)?;
        let slice = self
            .buf
            .get(self.pos..end)
            .ok_or(WireError::TruncatedPacket)?;
        self.pos = end;
        Ok(slice)
    }

    fn length(&mut self) -> Result<usize, WireError> {
        let first = self.take(1)?[0];
        match first {
            0..=252 => Ok(first as usize),
            0xFD => {
                let b = self.take(2)?;
                let v = u16::from_be_bytes([b[0], b[1]]) as usize;
                if v < 253 {
                    return Err(WireError::MalformedField("length"));
                }
                Ok(v)
            }
            0xFE => {
                let b = self.take(4)?;
                let v = u32::from_be_bytes([b[0], b[1], b[2], b[3]]) as usize;
                if v <= u16::MAX as usize {
                    return Err(WireError::MalformedField("length"));
                }
                Ok(v)
            }
            _ => Err(WireError::MalformedField("length")),
        }
    }

    /// Reads one element of `expected` type and returns its value.
    fn element(&mut self, expected: u8) -> Result<&'a [u8], WireError> {
        let found = self.take(1)?[0];
        if found != expected {
            return Err(WireError::UnknownTlvType { expected, found });
        }
        let len = self.length()?;
        self.take(len)
    }
}

fn read_nonneg(value: &[u8], field: &'static str) -> Result<u64, WireError> {
    if value.is_empty() || value.len() > 8 || (value.len() > 1 && value[0] == 0) {
        return Err(WireError::MalformedField(field));
    }
    Ok(value.iter().fold(0u64, |acc, &b| (acc << 8) | b as u64))
}

fn read_name(value: &[u8]) -> Result<Name, WireError> {
    let mut r = Reader::new(value);
    let mut components = Vec::new();
    while !r.is_empty() {
        let bytes = r.element(TLV_COMPONENT)?;
        components
            .push(Component::new(bytes).ok_or(WireError::MalformedField("empty name component"))?);
    }
    Ok(Name::from_components(components))
}

/// Strips the outer element, requiring it to span the whole buffer.
fn outer(bytes: &[u8], expected: u8) -> Result<&[u8], WireError> {
    if bytes.len() > MAX_PACKET_SIZE {
        return Err(WireError::PacketTooLarge(bytes.len()));
    }
    let mut r = Reader::new(bytes);
    let value = r.element(expected)?;
    if !r.is_empty() {
        return Err(WireError::LengthMismatch("packet"));
    }
    Ok(value)
}

fn finish(r: &Reader<'_>, what: &'static str) -> Result<(), WireError> {
    if r.is_empty() {
        Ok(())
    } else {
        Err(WireError::LengthMismatch(what))
    }
}

pub fn decode_interest(bytes: &[u8]) -> Result<Interest, WireError> {
    let mut r = Reader::new(outer(bytes, TLV_INTEREST)?);
    let name = read_name(r.element(TLV_NAME)?)?;
    let nonce = r.element(TLV_NONCE)?;
    let nonce: [u8; 4] = nonce
        .try_into()
        .map_err(|_| WireError::LengthMismatch("nonce"))?;
    let lifetime_ms = read_nonneg(r.element(TLV_LIFETIME)?, "lifetime")?;
    if lifetime_ms == 0 {
        return Err(WireError::MalformedField("lifetime"));
    }
    finish(&r, "interest")?;
    Ok(Interest {
        name,
        nonce: u32::from_be_bytes(nonce),
        lifetime_ms,
    })
}

pub fn decode_data(bytes: &[u8]) -> Result<DataPacket, WireError> {
    let mut r = Reader::new(outer(bytes, TLV_DATA)?);
    let name = read_name(r.element(TLV_NAME)?)?;
    let freshness_ms = read_nonneg(r.element(TLV_FRESHNESS)?, "freshness")?;
    let content_type = if r.peek_type() == Some(TLV_CONTENT_TYPE) {
        let code = read_nonneg(r.element(TLV_CONTENT_TYPE)?, "content type")?;
        ContentType::from_code(code).ok_or(WireError::MalformedField("content type"))?
    } else {
        ContentType::Blob
    };
    let content = r.element(TLV_CONTENT)?.to_vec();
    let digest = r.element(TLV_DIGEST)?;
    let digest: [u8; DIGEST_LEN] = digest
        .try_into()
        .map_err(|_| WireError::LengthMismatch("digest"))?;
    finish(&r, "data")?;
    let packet = DataPacket {
        name,
        content_type,
        content,
        freshness_ms,
        digest: Digest(digest),
    };
    if !packet.verify() {
        return Err(WireError::DigestMismatch);
    }
    Ok(packet)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Packet {
    Interest(Interest),
    Data(DataPacket),
}

impl Packet {
    pub fn name(&self) -> &Name {
        match self {
            Packet::Interest(i) => &i.name,
            Packet::Data(d) => &d.name,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            Packet::Interest(i) => encode_interest(i),
            Packet::Data(d) => encode_data(d),
        }
    }
}

/// Decodes either packet kind, dispatching on the outer type octet.
pub fn decode_packet(bytes: &[u8]) -> Result<Packet, WireError> {
    match bytes.first() {
        None => Err(WireError::TruncatedPacket),
        Some(&TLV_INTEREST) => decode_interest(bytes).map(Packet::Interest),
        Some(&TLV_DATA) => decode_data(bytes).map(Packet::Data),
        Some(&found) => Err(WireError::UnknownTlvType {
            expected: TLV_INTEREST,
            found,
        }),
    }
}

/// Writes packets as a capture stream: each packet preceded by its length as
/// a 4-byte big-endian integer.
pub fn write_capture<W: Write>(mut w: W, packets: &[Vec<u8>]) -> io::Result<()> {
    for p in packets {
        w.write_all(&(p.len() as u32).to_be_bytes())?;
        w.write_all(p)?;
    }
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum CaptureError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("capture record {index} is truncated")]
    Truncated { index: usize },
    #[error("capture record {index} declares {len} bytes, above the packet limit")]
    TooLarge { index: usize, len: usize },
}

pub fn read_capture<R: Read>(mut r: R) -> Result<Vec<Vec<u8>>, CaptureError> {
    let mut all = Vec::new();
    r.read_to_end(&mut all)?;
    let mut packets = Vec::new();
    let mut pos = 0;
    while pos < all.len() {
        let index = packets.len();
        let header = all
            .get(pos..pos + 4)
            .ok_or(CaptureError::Truncated { index })?;
        let len = u32::from_be_bytes(header.try_into().expect("4 bytes")) as usize;
        if len > MAX_PACKET_SIZE {
            return Err(CaptureError::TooLarge { index, len });
        }
        pos += 4;
        let body = all
            .get(pos..pos + len)
            .ok_or(CaptureError::Truncated { index })?;
        packets.push(body.to_vec());
        pos += len;
    }
    Ok(packets)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Stand-alone TLV walker used to cross-check encoder output.
    fn oracle_walk(bytes: &[u8]) -> Vec<(u8, Vec<u8>)> {
        let mut out = vec![];
        let mut i = 0;
        while i < bytes.len() {
            let t = bytes[i];
            let (len, hdr) = match bytes[i + 1] {
                0xFD => (((bytes[i + 2] as usize) << 8) | bytes[i + 3] as usize, 4),
                l => (l as usize, 2),
            };
            out.push((t, bytes[i + hdr..i + hdr + len].to_vec()));
            i += hdr + len;
        }
        out
    }

    #[test]
    fn root_interest_bytes() {
        let i = Interest {
            name: Name::root(),
            nonce: 0,
            lifetime_ms: 4000,
        };
        let bytes = encode_interest(&i);
        assert_eq!(
            bytes,
            [0x05, 0x0C, 0x07, 0x00, 0x0A, 0x04, 0, 0, 0, 0, 0x0C, 0x02, 0x0F, 0xA0]
        );
        let top = oracle_walk(&bytes);
        assert_eq!(top.len(), 1);
        assert_eq!(top[0].0, 0x05);
        let inner = oracle_walk(&top[0].1);
        assert_eq!(
            inner.iter().map(|e| e.0).collect::<Vec<_>>(),
            [0x07, 0x0A, 0x0C]
        );
        assert_eq!(inner[2].1, [0x0F, 0xA0]);
        assert_eq!(decode_interest(&bytes).unwrap(), i);
    }

    #[test]
    fn decode_errors() {
        assert_eq!(decode_interest(&[]), Err(WireError::TruncatedPacket));
        let good = encode_interest(&Interest::new(Name::parse("/a/b").unwrap(), 7));
        let mut long = good.clone();
        long[1] += 1;
        assert_eq!(decode_interest(&long), Err(WireError::TruncatedPacket));
        let mut wrong = good.clone();
        wrong[0] = 0x06;
        assert!(matches!(
            decode_interest(&wrong),
            Err(WireError::UnknownTlvType { .. })
        ));
        let mut trailing = good.clone();
        trailing.push(0);
        assert_eq!(
            decode_interest(&trailing),
            Err(WireError::LengthMismatch("packet"))
        );
    }

    #[test]
    fn truncation_at_every_offset() {
        let good = encode_interest(&Interest::new(
            Name::parse("/ndn/k8s/compute/x").unwrap(),
            99,
        ));
        for cut in 0..good.len() {
            assert!(
                decode_interest(&good[..cut]).is_err(),
                "prefix of {cut} bytes decoded"
            );
        }
    }

    #[test]
    fn long_lengths_use_three_octet_form() {
        let d = DataPacket::new(Name::parse("/x").unwrap(), vec![7u8; 300], 10);
        let bytes = encode_data(&d);
        assert_eq!(bytes[1], 0xFD);
        assert_eq!(decode_data(&bytes).unwrap(), d);
        let big = DataPacket::new(Name::parse("/x").unwrap(), vec![1u8; 70_000], 10);
        let bytes = encode_data(&big);
        assert_eq!(bytes[1], 0xFE);
        assert_eq!(decode_data(&bytes).unwrap(), big);
    }

    #[test]
    fn non_minimal_forms_rejected() {
        // lifetime 4000 padded to three octets
        let bytes = [
            0x05, 0x0D, 0x07, 0x00, 0x0A, 0x04, 0, 0, 0, 0, 0x0C, 0x03, 0x00, 0x0F, 0xA0,
        ];
        assert_eq!(
            decode_interest(&bytes),
            Err(WireError::MalformedField("lifetime"))
        );
        // length 12 written in the three octet form
        let bytes = [
            0x05, 0xFD, 0x00, 0x0C, 0x07, 0x00, 0x0A, 0x04, 0, 0, 0, 0, 0x0C, 0x02, 0x0F, 0xA0,
        ];
        assert_eq!(
            decode_interest(&bytes),
            Err(WireError::MalformedField("length"))
        );
    }

    #[test]
    fn data_round_trip_and_corruption() {
        let d = DataPacket::new(
            Name::parse("/ndn/k8s/data/x").unwrap(),
            b"hello".to_vec(),
            1000,
        );
        let bytes = encode_data(&d);
        assert_eq!(decode_data(&bytes).unwrap(), d);
        let pos = bytes.windows(5).position(|w| w == b"hello").unwrap();
        let mut flipped = bytes.clone();
        flipped[pos] ^= 0x01;
        assert_eq!(decode_data(&flipped), Err(WireError::DigestMismatch));
    }

    #[test]
    fn empty_content_is_legal() {
        let d = DataPacket::new(Name::parse("/ndn/k8s/status/x").unwrap(), vec![], 0);
        assert_eq!(decode_data(&encode_data(&d)).unwrap(), d);
    }

    #[test]
    fn typed_data_round_trip() {
        let d = DataPacket::no_route(Name::parse("/nowhere").unwrap());
        let bytes = encode_data(&d);
        assert_eq!(
            decode_data(&bytes).unwrap().content_type,
            ContentType::NoRoute
        );
        let e = DataPacket::error(Name::parse("/ndn/k8s/bogus").unwrap(), "unknown prefix");
        assert_eq!(decode_data(&encode_data(&e)).unwrap(), e);
    }

    #[test]
    fn packet_dispatch() {
        let i = Interest::new(Name::parse("/a").unwrap(), 1);
        let d = DataPacket::new(Name::parse("/a").unwrap(), vec![1], 5);
        assert_eq!(
            decode_packet(&encode_interest(&i)).unwrap(),
            Packet::Interest(i)
        );
        assert_eq!(decode_packet(&encode_data(&d)).unwrap(), Packet::Data(d));
        assert_eq!(decode_packet(&[]), Err(WireError::TruncatedPacket));
        assert!(matches!(
            decode_packet(&[0x42, 0]),
            Err(WireError::UnknownTlvType { .. })
        ));
    }

    #[test]
    fn capture_round_trip() {
        let packets = vec![
            encode_interest(&Interest::new(Name::parse("/a").unwrap(), 1)),
            encode_data(&DataPacket::new(Name::parse("/a").unwrap(), vec![], 0)),
        ];
        let mut buf = Vec::new();
        write_capture(&mut buf, &packets).unwrap();
        assert_eq!(&buf[..4], &(packets[0].len() as u32).to_be_bytes());
        assert_eq!(read_capture(buf.as_slice()).unwrap(), packets);
        buf.pop();
        assert!(matches!(
            read_capture(buf.as_slice()),
            Err(CaptureError::Truncated { index: 1 })
        ));
    }
}
