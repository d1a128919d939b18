//! Memory reference traces: record model, bit-exact file format and
//! synthetic generators.
//!
//! The on-disk format is a 16-byte header (8-byte magic, u16 version,
//! u16 record size, u32 reserved) followed by fixed 24-byte little-endian
//! records: u64 instruction index, u64 instruction pointer (48-bit,
//! zero-extended), u64 physical address with the access kind packed into
//! the top bit (1 = store). Non-memory instructions are implied by gaps in
//! the instruction index.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::addrmap::BLOCK_BYTES;

pub const TRACE_MAGIC: [u8; 8] = *b"MEMTRACE";
pub const TRACE_VERSION: u16 = 1;
pub const RECORD_BYTES: usize = 24;
pub const HEADER_BYTES: usize = 16;

/// Instruction-index advance per memory record; the skipped indices stand
/// in for non-memory instructions.
pub const INSTR_GAP: u64 = 4;

const IP_BASE: u64 = 0x0040_0000;
const IP_STRIDE: u64 = 0x40;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("I/O error on `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed trace at byte offset {offset}: {reason}")]
    Malformed { offset: u64, reason: String },
    #[error("trace spec field `{field}`: {reason}")]
    InvalidSpec { field: String, reason: String },
    #[error("footprint {footprint} B exceeds physical memory of {physical} B")]
    FootprintExceedsPhysical { footprint: u64, physical: u64 },
}

fn spec_err(field: &str, reason: impl Into<String>) -> TraceError {
    TraceError::InvalidSpec {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccessKind {
    Load,
    Store,
}

/// One memory reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRecord {
    pub instr_index: u64,
    pub ip: u64,
    pub address: u64,
    pub kind: AccessKind,
}

impl TraceRecord {
    pub fn block(&self) -> u64 {
        self.address / BLOCK_BYTES
    }

    fn encode(&self, out: &mut [u8; RECORD_BYTES]) {
        out[0..8].copy_from_slice(&self.instr_index.to_le_bytes());
        out[8..16].copy_from_slice(&self.ip.to_le_bytes());
        let packed = self.address | ((self.kind == AccessKind::Store) as u64) << 63;
        out[16..24].copy_from_slice(&packed.to_le_bytes());
    }

    fn decode(buf: &[u8; RECORD_BYTES]) -> TraceRecord {
        let instr_index = u64::from_le_bytes(buf[0..8].try_into().unwrap());
        let ip = u64::from_le_bytes(buf[8..16].try_into().unwrap());
        let packed = u64::from_le_bytes(buf[16..24].try_into().unwrap());
        TraceRecord {
            instr_index,
            ip,
            address: packed & !(1 << 63),
            kind: if packed >> 63 == 1 {
                AccessKind::Store
            } else {
                AccessKind::Load
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    /// Monotone 64 B-stride streams, one IP per stream.
    Stream,
    /// Constant-stride streams at `stride_bytes`.
    Stride,
    /// Looping sweep over the footprint's blocks.
    Cyclic,
    /// Uniform random blocks with a store fraction.
    Random,
    /// Streams interleaved with random traffic.
    Mixed,
}

/// Synthetic trace description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSpec {
    pub generator: GeneratorKind,
    pub footprint_bytes: u64,
    pub stride_bytes: u64,
    pub stream_count: u32,
    pub ip_count: u32,
    pub length_records: u64,
    pub seed: u64,
}

impl TraceSpec {
    pub fn validate(&self) -> Result<(), TraceError> {
        if self.length_records == 0 {
            return Err(spec_err("length_records", "must be >= 1"));
        }
        if self.stride_bytes == 0 || self.stride_bytes % BLOCK_BYTES != 0 {
            return Err(spec_err("stride_bytes", "must be a positive multiple of 64"));
        }
        if self.footprint_bytes < BLOCK_BYTES {
            return Err(spec_err("footprint_bytes", "must cover at least one block"));
        }
        if self.stream_count == 0 {
            return Err(spec_err("stream_count", "must be >= 1"));
        }
        if self.ip_count == 0 {
            return Err(spec_err("ip_count", "must be >= 1"));
        }
        Ok(())
    }
}

/// Generate a trace. Deterministic for a fixed spec (the seed covers all
/// randomness). `physical_bytes` bounds the footprint.
pub fn generate(spec: &TraceSpec, physical_bytes: u64) -> Result<Vec<TraceRecord>, TraceError> {
    spec.validate()?;
    if spec.footprint_bytes > physical_bytes {
        return Err(TraceError::FootprintExceedsPhysical {
            footprint: spec.footprint_bytes,
            physical: physical_bytes,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut records = Vec::with_capacity(spec.length_records as usize);
    let blocks = spec.footprint_bytes / BLOCK_BYTES;
    let ip_of = |i: u64| IP_BASE + (i % spec.ip_count as u64) * IP_STRIDE;

    match spec.generator {
        GeneratorKind::Stream | GeneratorKind::Stride => {
            let stride = if spec.generator == GeneratorKind::Stream {
                BLOCK_BYTES
            } else {
                spec.stride_bytes
            };
            let streams = spec.stream_count as u64;
            let region = spec.footprint_bytes / streams & !(BLOCK_BYTES - 1);
            let per_stream = spec.length_records.div_ceil(streams);
            if per_stream * stride > region {
                return Err(spec_err(
                    "length_records",
                    format!(
                        "{streams} stream(s) of {per_stream} records at stride {stride} exceed \
                         their footprint share of {region} B; streams never revisit an address"
                    ),
                ));
            }
            let mut cursors: Vec<u64> = (0..streams).map(|s| s * region).collect();
            for i in 0..spec.length_records {
                let s = (i % streams) as usize;
                let address = cursors[s];
                cursors[s] += stride;
                records.push(TraceRecord {
                    instr_index: i * INSTR_GAP,
                    ip: ip_of(s as u64),
                    address,
                    kind: AccessKind::Load,
                });
            }
        }
        GeneratorKind::Cyclic => {
            for i in 0..spec.length_records {
                records.push(TraceRecord {
                    instr_index: i * INSTR_GAP,
                    ip: ip_of(0),
                    address: (i % blocks) * BLOCK_BYTES,
                    kind: AccessKind::Load,
                });
            }
        }
        GeneratorKind::Random => {
            for i in 0..spec.length_records {
                let block = rng.gen_range(0..blocks);
                let kind = if rng.gen_bool(0.25) {
                    AccessKind::Store
                } else {
                    AccessKind::Load
                };
                records.push(TraceRecord {
                    instr_index: i * INSTR_GAP,
                    ip: ip_of(rng.gen_range(0..spec.ip_count as u64)),
                    address: block * BLOCK_BYTES,
                    kind,
                });
            }
        }
        GeneratorKind::Mixed => {
            // First half of the footprint streams, second half takes the
            // random traffic.
            let streams = spec.stream_count as u64;
            let stream_region = (spec.footprint_bytes / 2 / streams) & !(BLOCK_BYTES - 1);
            let rand_base = spec.footprint_bytes / 2;
            let rand_blocks = (spec.footprint_bytes - rand_base) / BLOCK_BYTES;
            let mut cursors: Vec<u64> = (0..streams).map(|s| s * stream_region).collect();
            for i in 0..spec.length_records {
                let streamy = rng.gen_bool(0.5);
                let (ip, address, kind) = if streamy {
                    let s = (i % streams) as usize;
                    let a = cursors[s] % stream_region.max(BLOCK_BYTES) + s as u64 * stream_region;
                    cursors[s] += BLOCK_BYTES;
                    (ip_of(s as u64), a, AccessKind::Load)
                } else {
                    let kind = if rng.gen_bool(0.25) {
                        AccessKind::Store
                    } else {
                        AccessKind::Load
                    };
                    (
                        ip_of(streams + rng.gen_range(0..spec.ip_count as u64)),
                        rand_base + rng.gen_range(0..rand_blocks) * BLOCK_BYTES,
                        kind,
                    )
                };
                records.push(TraceRecord {
                    instr_index: i * INSTR_GAP,
                    ip,
                    address,
                    kind,
                });
            }
        }
    }
    Ok(records)
}

/// Write records in the binary format. Fails on IP or address fields that
/// do not fit their packed widths.
pub fn write_trace(path: impl AsRef<Path>, records: &[TraceRecord]) -> Result<(), TraceError> {
    let path = path.as_ref();
    let io_err = |source| TraceError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    let mut header = [0u8; HEADER_BYTES];
    header[0..8].copy_from_slice(&TRACE_MAGIC);
    header[8..10].copy_from_slice(&TRACE_VERSION.to_le_bytes());
    header[10..12].copy_from_slice(&(RECORD_BYTES as u16).to_le_bytes());
    w.write_all(&header).map_err(io_err)?;
    let mut prev = 0u64;
    for (i, r) in records.iter().enumerate() {
        if r.ip >> 48 != 0 {
            return Err(TraceError::Malformed {
                offset: (HEADER_BYTES + i * RECORD_BYTES) as u64,
                reason: format!("ip {:#x} exceeds 48 bits", r.ip),
            });
        }
        if r.address >> 63 != 0 {
            return Err(TraceError::Malformed {
                offset: (HEADER_BYTES + i * RECORD_BYTES) as u64,
                reason: "address exceeds 63 bits".into(),
            });
        }
        if r.instr_index < prev {
            return Err(TraceError::Malformed {
                offset: (HEADER_BYTES + i * RECORD_BYTES) as u64,
                reason: "instr_index must be nondecreasing".into(),
            });
        }
        prev = r.instr_index;
        let mut buf = [0u8; RECORD_BYTES];
        r.encode(&mut buf);
        w.write_all(&buf).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Read a trace written by [`write_trace`]. Errors report the byte offset of
/// the last complete record boundary.
pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>, TraceError> {
    let path = path.as_ref();
    let io_err = |source| TraceError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut r = BufReader::new(File::open(path).map_err(io_err)?);
    let mut header = [0u8; HEADER_BYTES];
    r.read_exact(&mut header).map_err(|_| TraceError::Malformed {
        offset: 0,
        reason: "file shorter than header".into(),
    })?;
    if header[0..8] != TRACE_MAGIC {
        return Err(TraceError::Malformed {
            offset: 0,
            reason: "bad magic".into(),
        });
    }
    let version = u16::from_le_bytes(header[8..10].try_into().unwrap());
    if version != TRACE_VERSION {
        return Err(TraceError::Malformed {
            offset: 8,
            reason: format!("unsupported version {version}"),
        });
    }
    let rec_len = u16::from_le_bytes(header[10..12].try_into().unwrap()) as usize;
    if rec_len != RECORD_BYTES {
        return Err(TraceError::Malformed {
            offset: 10,
            reason: format!("unsupported record size {rec_len}"),
        });
    }
    let mut body = Vec::new();
    r.read_to_end(&mut body).map_err(io_err)?;
    let complete = body.len() / RECORD_BYTES;
    if body.len() % RECORD_BYTES != 0 {
        return Err(TraceError::Malformed {
            offset: (HEADER_BYTES + complete * RECORD_BYTES) as u64,
            reason: "truncated record".into(),
        });
    }
    let mut records = Vec::with_capacity(complete);
    let mut prev = 0u64;
    for i in 0..complete {
        let buf: &[u8; RECORD_BYTES] = body[i * RECORD_BYTES..(i + 1) * RECORD_BYTES]
            .try_into()
            .unwrap();
        let rec = TraceRecord::decode(buf);
        if rec.instr_index < prev {
            return Err(TraceError::Malformed {
                offset: (HEADER_BYTES + i * RECORD_BYTES) as u64,
                reason: "instr_index must be nondecreasing".into(),
            });
        }
        prev = rec.instr_index;
        records.push(rec);
    }
    Ok(records)
}
