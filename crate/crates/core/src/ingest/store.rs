//! Compact binary store for validated consumer profiles.
//!
//! A fixed 24-byte header (magic, version, year, sizes, CRC-32 of the body)
//! is followed by one block per consumer. Each block stores the net-load
//! series as little-endian fixed-width integers scaled by a power of ten
//! when that is exact, and as `f64` otherwise. The byte layout is described
//! in `docs/formats.md`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calendar::Calendar;
use crate::error::{Error, Result};
use crate::load_analytics::{ConsumerProfile, ConsumerType};

pub const MAGIC: [u8; 4] = *b"GSLP";
pub const FORMAT_VERSION: u8 = 1;
const HEADER_LEN: usize = 24;
const MAX_DECIMALS: u8 = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    I16,
    I32,
    F64,
}

impl Encoding {
    fn tag(self) -> u8 {
        match self {
            Encoding::I16 => 1,
            Encoding::I32 => 2,
            Encoding::F64 => 3,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(Encoding::I16),
            2 => Some(Encoding::I32),
            3 => Some(Encoding::F64),
            _ => None,
        }
    }

    fn width(self) -> usize {
        match self {
            Encoding::I16 => 2,
            Encoding::I32 => 4,
            Encoding::F64 => 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestConsumer {
    pub consumer_id: String,
    pub consumer_type: u8,
    pub encoding: Encoding,
    pub decimals: u8,
}

/// Human-readable sidecar written next to the store.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreManifest {
    pub format_version: u8,
    pub year: i32,
    pub consumer_count: usize,
    pub interval_count: usize,
    /// CRC-32 of the store body, lowercase hex.
    pub checksum: String,
    pub store_bytes: u64,
    pub type_counts: BTreeMap<String, usize>,
    pub consumers: Vec<ManifestConsumer>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

pub fn manifest_path(store: &Path) -> PathBuf {
    let mut name = store.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Smallest decimal scale at which every value survives an integer round
/// trip bit for bit, with the widest integer it needs.
fn choose_encoding(values: &[f64]) -> (Encoding, u8) {
    'scale: for decimals in 0..=MAX_DECIMALS {
        let scale = 10f64.powi(decimals as i32);
        let mut widest = Encoding::I16;
        for &v in values {
            let k = (v * scale).round();
            if !(k.abs() <= i32::MAX as f64) || (k as i32 as f64 / scale).to_bits() != v.to_bits() {
                continue 'scale;
            }
            if k.abs() > i16::MAX as f64 {
                widest = Encoding::I32;
            }
        }
        return (widest, decimals);
    }
    (Encoding::F64, 0)
}

fn encode_block(out: &mut Vec<u8>, p: &ConsumerProfile) -> Result<ManifestConsumer> {
    let id = p.consumer_id.as_bytes();
    let id_len = u16::try_from(id.len())
        .map_err(|_| Error::StoreFormat(format!("consumer id of {} bytes", id.len())))?;
    let (encoding, decimals) = choose_encoding(&p.net_kwh);
    out.extend_from_slice(&id_len.to_le_bytes());
    out.extend_from_slice(id);
    out.extend_from_slice(&[p.consumer_type.code(), encoding.tag(), decimals, 0]);
    let scale = 10f64.powi(decimals as i32);
    for &v in &p.net_kwh {
        match encoding {
            Encoding::I16 => out.extend_from_slice(&((v * scale).round() as i16).to_le_bytes()),
            Encoding::I32 => out.extend_from_slice(&((v * scale).round() as i32).to_le_bytes()),
            Encoding::F64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
    Ok(ManifestConsumer {
        consumer_id: p.consumer_id.clone(),
        consumer_type: p.consumer_type.code(),
        encoding,
        decimals,
    })
}

/// Serialize profiles into the store format. Returns the bytes and the
/// per-consumer manifest entries.
pub fn encode(profiles: &[ConsumerProfile], calendar: &Calendar) -> Result<(Vec<u8>, Vec<ManifestConsumer>)> {
    let intervals = calendar.intervals();
    let year = u16::try_from(calendar.year)
        .map_err(|_| Error::StoreFormat(format!("year {} not storable", calendar.year)))?;
    let mut body = Vec::new();
    let mut entries = Vec::with_capacity(profiles.len());
    for p in profiles {
        if p.net_kwh.len() != intervals {
            return Err(Error::StoreFormat(format!(
                "consumer {} has {} intervals, expected {intervals}",
                p.consumer_id,
                p.net_kwh.len()
            )));
        }
        entries.push(encode_block(&mut body, p)?);
    }
    let mut out = Vec::with_capacity(HEADER_LEN + body.len());
    out.extend_from_slice(&MAGIC);
    out.push(FORMAT_VERSION);
    out.push(0);
    out.extend_from_slice(&year.to_le_bytes());
    out.extend_from_slice(&(intervals as u32).to_le_bytes());
    out.extend_from_slice(&(profiles.len() as u32).to_le_bytes());
    out.extend_from_slice(&crc32fast::hash(&body).to_le_bytes());
    out.extend_from_slice(&[0; 4]);
    out.extend_from_slice(&body);
    Ok((out, entries))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::StoreFormat("truncated store".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Decode a store image, verifying magic, version and checksum.
pub fn decode(bytes: &[u8]) -> Result<(Calendar, Vec<ConsumerProfile>)> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::StoreFormat("bad magic".into()));
    }
    let version = c.u8()?;
    if version != FORMAT_VERSION {
        return Err(Error::StoreFormat(format!("unsupported version {version}")));
    }
    c.u8()?;
    let calendar = Calendar::new(c.u16()? as i32);
    let intervals = c.u32()? as usize;
    let consumers = c.u32()? as usize;
    let expected = c.u32()?;
    c.u32()?;
    let actual = crc32fast::hash(&bytes[HEADER_LEN..]);
    if actual != expected {
        return Err(Error::Checksum { expected, actual });
    }
    if intervals != calendar.intervals() {
        return Err(Error::StoreFormat(format!(
            "{intervals} intervals for year {}",
            calendar.year
        )));
    }
    let mut profiles = Vec::with_capacity(consumers);
    for _ in 0..consumers {
        let id_len = c.u16()? as usize;
        let id = std::str::from_utf8(c.take(id_len)?)
            .map_err(|_| Error::StoreFormat("consumer id is not UTF-8".into()))?
            .to_string();
        let code = c.u8()?;
        let consumer_type = ConsumerType::from_code(code)
            .ok_or_else(|| Error::StoreFormat(format!("consumer type {code}")))?;
        let tag = c.u8()?;
        let encoding =
            Encoding::from_tag(tag).ok_or_else(|| Error::StoreFormat(format!("encoding tag {tag}")))?;
        let decimals = c.u8()?;
        c.u8()?;
        let scale = 10f64.powi(decimals as i32);
        let raw = c.take(intervals * encoding.width())?;
        let net: Vec<f64> = match encoding {
            Encoding::I16 => raw
                .chunks_exact(2)
                .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / scale)
                .collect(),
            Encoding::I32 => raw
                .chunks_exact(4)
                .map(|b| i32::from_le_bytes(b.try_into().unwrap()) as f64 / scale)
                .collect(),
            Encoding::F64 => raw
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect(),
        };
        profiles.push(ConsumerProfile::new(id, consumer_type, net, &calendar)?);
    }
    if c.pos != bytes.len() {
        return Err(Error::StoreFormat("trailing bytes after last consumer".into()));
    }
    Ok((calendar, profiles))
}

/// Write the store and its manifest, then read the store back and confirm
/// the content matches before returning.
pub fn compact_store(
    profiles: &[ConsumerProfile],
    calendar: &Calendar,
    out_path: &Path,
    meta: BTreeMap<String, String>,
) -> Result<StoreManifest> {
    let (bytes, consumers) = encode(profiles, calendar)?;
    fs::write(out_path, &bytes).map_err(|e| Error::io(out_path, e))?;

    let reread = fs::read(out_path).map_err(|e| Error::io(out_path, e))?;
    let (_, back) = decode(&reread)?;
    if back != profiles {
        return Err(Error::StoreFormat("verification read differs from input".into()));
    }

    let mut type_counts = BTreeMap::new();
    for p in profiles {
        *type_counts
            .entry(format!("type_{}", p.consumer_type.code()))
            .or_insert(0) += 1;
    }
    let manifest = StoreManifest {
        format_version: FORMAT_VERSION,
        year: calendar.year,
        consumer_count: profiles.len(),
        interval_count: calendar.intervals(),
        checksum: format!("{:08x}", crc32fast::hash(&bytes[HEADER_LEN..])),
        store_bytes: bytes.len() as u64,
        type_counts,
        consumers,
        meta,
    };
    let mpath = manifest_path(out_path);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&mpath, text + "\n").map_err(|e| Error::io(&mpath, e))?;
    Ok(manifest)
}

/// Read a store written by [`compact_store`].
pub fn read_store(path: &Path) -> Result<(Calendar, Vec<ConsumerProfile>)> {
    if !path.exists() {
        return Err(Error::MissingInput(format!(
            "compact store {} not found; run `ingest load` first",
            path.display()
        )));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
