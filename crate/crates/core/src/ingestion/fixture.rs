//! NDJSON fixture files.
//!
//! Line 1 is the header `{"kind":"header","format":...,"profile":{...}}`.
//! Every following line is `{"kind":"creation",...}` or `{"kind":"log",...}`,
//! strictly increasing by `(block number, index)`. Byte fields are
//! `0x`-prefixed lowercase hex; amounts are decimal strings.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::profile::{ChainProfile, ProfileError};
use crate::chain::{ContractCreation, LogRecord};

pub const FIXTURE_FORMAT: &str = "poolsleuth-fixture/1";

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown record kind {kind:?}")]
    UnknownKind { line: usize, kind: String },
    #[error("missing header line")]
    MissingHeader,
    #[error("unsupported fixture format {0:?}")]
    Format(String),
    #[error("invalid profile: {0}")]
    Profile(#[from] ProfileError),
    #[error("record {position} ({kind} at block {block}, index {index}) is not after its predecessor")]
    Unsorted { position: usize, kind: &'static str, block: u64, index: u64 },
    #[error("record {position} ({kind} at block {block}, index {index}) lies outside blocks {start}..={end}")]
    OutOfRange { position: usize, kind: &'static str, block: u64, index: u64, start: u64, end: u64 },
    #[error("record {position} (creation of {contract}) has empty bytecode")]
    EmptyBytecode { position: usize, contract: String },
    #[error("record {position} at block {block} has a timestamp earlier than a previous block")]
    Timestamp { position: usize, block: u64 },
    #[error("cannot merge fixtures from chains {0:?} and {1:?}")]
    ChainMismatch(String, String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Record {
    Creation(ContractCreation),
    Log(LogRecord),
}

impl Record {
    pub fn order_key(&self) -> (u64, u64) {
        match self {
            Record::Creation(c) => c.order_key(),
            Record::Log(l) => l.order_key(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Record::Creation(_) => "creation",
            Record::Log(_) => "log",
        }
    }

    pub fn timestamp(&self) -> Option<u64> {
        match self {
            Record::Creation(c) => c.block.timestamp,
            Record::Log(l) => l.block.timestamp,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixtureFile {
    pub profile: ChainProfile,
    pub records: Vec<Record>,
}

impl FixtureFile {
    pub fn new(profile: ChainProfile) -> Self {
        FixtureFile { profile, records: Vec::new() }
    }

    pub fn creations(&self) -> impl Iterator<Item = &ContractCreation> {
        self.records.iter().filter_map(|r| match r {
            Record::Creation(c) => Some(c),
            _ => None,
        })
    }

    pub fn logs(&self) -> impl Iterator<Item = &LogRecord> {
        self.records.iter().filter_map(|r| match r {
            Record::Log(l) => Some(l),
            _ => None,
        })
    }

    pub fn split(self) -> (ChainProfile, Vec<ContractCreation>, Vec<LogRecord>) {
        let mut creations = Vec::new();
        let mut logs = Vec::with_capacity(self.records.len());
        for r in self.records {
            match r {
                Record::Creation(c) => creations.push(c),
                Record::Log(l) => logs.push(l),
            }
        }
        (self.profile, creations, logs)
    }

    pub fn log_count(&self) -> usize {
        self.logs().count()
    }

    /// Checks ordering, block range, bytecode and timestamp invariants.
    pub fn validate(&self) -> Result<(), FixtureError> {
        self.profile.validate()?;
        let mut prev: Option<(u64, u64)> = None;
        let mut last_ts: Option<(u64, u64)> = None;
        for (i, r) in self.records.iter().enumerate() {
            let (block, index) = r.order_key();
            if let Some(p) = prev {
                if (block, index) <= p {
                    return Err(FixtureError::Unsorted { position: i, kind: r.kind(), block, index });
                }
            }
            if !self.profile.contains_block(block) {
                return Err(FixtureError::OutOfRange {
                    position: i,
                    kind: r.kind(),
                    block,
                    index,
                    start: self.profile.start_block,
                    end: self.profile.end_block,
                });
            }
            if let Record::Creation(c) = r {
                if c.bytecode.is_empty() {
                    return Err(FixtureError::EmptyBytecode {
                        position: i,
                        contract: c.contract.to_string(),
                    });
                }
            }
            if let Some(ts) = r.timestamp() {
                if let Some((b, t)) = last_ts {
                    if block > b && ts < t {
                        return Err(FixtureError::Timestamp { position: i, block });
                    }
                }
                last_ts = Some((block, ts));
            }
            prev = Some((block, index));
        }
        Ok(())
    }

    /// Combines fixtures of one chain, re-sorting records.
    pub fn merge(mut files: Vec<FixtureFile>) -> Result<FixtureFile, FixtureError> {
        let Some(mut base) = files.pop() else {
            return Err(FixtureError::MissingHeader);
        };
        for f in files {
            if f.profile.name != base.profile.name {
                return Err(FixtureError::ChainMismatch(base.profile.name, f.profile.name));
            }
            base.profile.start_block = base.profile.start_block.min(f.profile.start_block);
            base.profile.end_block = base.profile.end_block.max(f.profile.end_block);
            base.records.extend(f.records);
        }
        base.records.sort_by_key(|r| r.order_key());
        base.validate()?;
        Ok(base)
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: String,
    format: String,
    profile: ChainProfile,
}

#[derive(Deserialize)]
struct KindProbe {
    kind: String,
}

fn tagged_line<T: Serialize>(kind: &str, value: &T) -> String {
    let body = serde_json::to_string(value).expect("record serialization is infallible");
    format!("{{\"kind\":\"{kind}\",{}", &body[1..])
}

fn write_to<W: Write>(mut w: W, profile: &ChainProfile, records: &[Record]) -> std::io::Result<()> {
    let header = Header {
        kind: "header".into(),
        format: FIXTURE_FORMAT.into(),
        profile: profile.clone(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    let lines: Vec<String> = records
        .par_iter()
        .map(|r| match r {
            Record::Creation(c) => tagged_line("creation", c),
            Record::Log(l) => tagged_line("log", l),
        })
        .collect();
    for line in lines {
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn write_fixture_string(fixture: &FixtureFile) -> Result<String, FixtureError> {
    fixture.validate()?;
    let mut buf = Vec::new();
    write_to(&mut buf, &fixture.profile, &fixture.records).map_err(|e| FixtureError::Io {
        path: "<memory>".into(),
        source: e,
    })?;
    Ok(String::from_utf8(buf).expect("json is utf-8"))
}

/// Writes a fixture after validating the ordering invariants.
pub fn write_fixture(path: &Path, profile: &ChainProfile, records: &[Record]) -> Result<(), FixtureError> {
    let fixture = FixtureFile { profile: profile.clone(), records: records.to_vec() };
    fixture.validate()?;
    let io = |e| FixtureError::Io { path: path.display().to_string(), source: e };
    let file = File::create(path).map_err(io)?;
    write_to(BufWriter::with_capacity(1 << 20, file), profile, records).map_err(io)
}

fn parse_record(line_no: usize, line: &str) -> Result<Record, FixtureError> {
    let perr = |e: serde_json::Error| FixtureError::Parse { line: line_no, message: e.to_string() };
    let kind = if line.starts_with("{\"kind\":\"log\"") {
        "log".to_string()
    } else if line.starts_with("{\"kind\":\"creation\"") {
        "creation".to_string()
    } else {
        serde_json::from_str::<KindProbe>(line).map_err(perr)?.kind
    };
    match kind.as_str() {
        "log" => serde_json::from_str(line).map(Record::Log).map_err(perr),
        "creation" => serde_json::from_str(line).map(Record::Creation).map_err(perr),
        other => Err(FixtureError::UnknownKind { line: line_no, kind: other.to_string() }),
    }
}

pub fn read_fixture_str(text: &str) -> Result<FixtureFile, FixtureError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or(FixtureError::MissingHeader)?;
    let header: Header = serde_json::from_str(first)
        .map_err(|e| FixtureError::Parse { line: 1, message: e.to_string() })?;
    if header.kind != "header" {
        return Err(FixtureError::MissingHeader);
    }
    if header.format != FIXTURE_FORMAT {
        return Err(FixtureError::Format(header.format));
    }
    let body: Vec<(usize, &str)> = lines.collect();
    let records = body
        .par_iter()
        .map(|(i, l)| parse_record(i + 1, l))
        .collect::<Result<Vec<_>, _>>()?;
    let fixture = FixtureFile { profile: header.profile, records };
    fixture.validate()?;
    Ok(fixture)
}

pub fn read_fixture(path: &Path) -> Result<FixtureFile, FixtureError> {
    let io = |e| FixtureError::Io { path: path.display().to_string(), source: e };
    let mut text = String::new();
    File::open(path).map_err(io)?.read_to_string(&mut text).map_err(io)?;
    read_fixture_str(&text)
}
