//! Trace files.
//!
//! TEXT: a `#scmtrace v1` header line, then one `seq,op,address` record per
//! line with `op` in {R, W} and the address in `0x` hex.
//!
//! BINARY: the 8-byte magic `SCMTRC01`, then 17-byte records (u64 seq, u8 op
//! with 0 = R and 1 = W, u64 address), little-endian.
//!
//! Neither format stores arrival offsets.
//!
//! Cache back-side streams use the text layout with an extra size column and
//! ops F (fill) and B (writeback); `seq` is the causing access.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use scmx_core::cache::{BacksideEvent, BacksideKind};
use scmx_core::trace::{validate_next, Op, Trace, TraceError, TraceRecord};
use thiserror::Error;

pub const TEXT_HEADER: &str = "#scmtrace v1";
pub const BINARY_MAGIC: &[u8; 8] = b"SCMTRC01";
const BINARY_RECORD: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceFormat {
    #[default]
    Text,
    Binary,
}

impl FromStr for TraceFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(Self::Text),
            "binary" | "bin" => Ok(Self::Binary),
            _ => Err(format!("unknown trace format `{s}` (expected text or binary)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum TraceIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("missing `{TEXT_HEADER}` header")]
    BadHeader,
    #[error("missing `SCMTRC01` magic")]
    BadMagic,
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("record {record} (line {line}): {source}")]
    Invalid {
        record: usize,
        line: usize,
        #[source]
        source: TraceError,
    },
    #[error("record {record} at byte offset {offset}: {source}")]
    InvalidBinary {
        record: usize,
        offset: u64,
        #[source]
        source: TraceError,
    },
    #[error("truncated record at byte offset {offset}")]
    Truncated { offset: u64 },
    #[error("record {record} at byte offset {offset}: bad op byte {byte}")]
    BadOpByte { record: usize, offset: u64, byte: u8 },
}

fn parse_op(s: &str) -> Option<Op> {
    match s {
        "R" => Some(Op::Read),
        "W" => Some(Op::Write),
        _ => None,
    }
}

fn parse_hex(s: &str) -> Option<u64> {
    let digits = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X"))?;
    u64::from_str_radix(digits, 16).ok()
}

fn parse_text_line(line: &str, line_no: usize) -> Result<TraceRecord, TraceIoError> {
    let malformed = |message: String| TraceIoError::Malformed { line: line_no, message };
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 3 {
        return Err(malformed(format!("expected 3 fields, found {}", fields.len())));
    }
    let seq = fields[0]
        .parse::<u64>()
        .map_err(|_| malformed(format!("bad sequence number `{}`", fields[0])))?;
    let op = parse_op(fields[1]).ok_or_else(|| malformed(format!("bad op `{}`", fields[1])))?;
    let address = parse_hex(fields[2]).ok_or_else(|| malformed(format!("bad address `{}`", fields[2])))?;
    Ok(TraceRecord::new(seq, op, address))
}

pub fn read_text<R: BufRead>(source: R) -> Result<Trace, TraceIoError> {
    let mut lines = source.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim_end() == TEXT_HEADER => {}
        Some(Err(e)) => return Err(e.into()),
        _ => return Err(TraceIoError::BadHeader),
    }
    let mut records: Vec<TraceRecord> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let r = parse_text_line(&line, line_no)?;
        validate_next(records.last(), &r).map_err(|source| TraceIoError::Invalid {
            record: records.len(),
            line: line_no,
            source,
        })?;
        records.push(r);
    }
    Ok(Trace::new(records).expect("records validated while reading"))
}

pub fn read_binary<R: Read>(mut source: R) -> Result<Trace, TraceIoError> {
    let mut magic = [0u8; 8];
    source.read_exact(&mut magic).map_err(|_| TraceIoError::BadMagic)?;
    if &magic != BINARY_MAGIC {
        return Err(TraceIoError::BadMagic);
    }
    let mut records: Vec<TraceRecord> = Vec::new();
    let mut buf = [0u8; BINARY_RECORD];
    loop {
        let offset = (BINARY_MAGIC.len() + records.len() * BINARY_RECORD) as u64;
        let mut filled = 0;
        while filled < BINARY_RECORD {
            let n = source.read(&mut buf[filled..])?;
            if n == 0 {
                break;
            }
            filled += n;
        }
        if filled == 0 {
            break;
        }
        if filled < BINARY_RECORD {
            return Err(TraceIoError::Truncated { offset });
        }
        let seq = u64::from_le_bytes(buf[0..8].try_into().unwrap());
        let op = match buf[8] {
            0 => Op::Read,
            1 => Op::Write,
            byte => {
                return Err(TraceIoError::BadOpByte {
                    record: records.len(),
                    offset,
                    byte,
                })
            }
        };
        let address = u64::from_le_bytes(buf[9..17].try_into().unwrap());
        let r = TraceRecord::new(seq, op, address);
        validate_next(records.last(), &r).map_err(|source| TraceIoError::InvalidBinary {
            record: records.len(),
            offset,
            source,
        })?;
        records.push(r);
    }
    Ok(Trace::new(records).expect("records validated while reading"))
}

pub fn read_trace<R: BufRead>(source: R, format: TraceFormat) -> Result<Trace, TraceIoError> {
    match format {
        TraceFormat::Text => read_text(source),
        TraceFormat::Binary => read_binary(source),
    }
}

/// Writes records and returns the number of bytes written.
pub fn write_trace<W: Write>(records: &[TraceRecord], sink: W, format: TraceFormat) -> io::Result<u64> {
    let mut w = CountingWriter { inner: sink, count: 0 };
    match format {
        TraceFormat::Text => {
            writeln!(w, "{TEXT_HEADER}")?;
            for r in records {
                let op = if r.op.is_write() { 'W' } else { 'R' };
                writeln!(w, "{},{},{:#x}", r.seq, op, r.address)?;
            }
        }
        TraceFormat::Binary => {
            w.write_all(BINARY_MAGIC)?;
            for r in records {
                let mut buf = [0u8; BINARY_RECORD];
                buf[0..8].copy_from_slice(&r.seq.to_le_bytes());
                buf[8] = r.op.is_write() as u8;
                buf[9..17].copy_from_slice(&r.address.to_le_bytes());
                w.write_all(&buf)?;
            }
        }
    }
    w.flush()?;
    Ok(w.count)
}

/// Picks the format from the leading bytes of a file.
pub fn detect_format(path: &Path) -> io::Result<TraceFormat> {
    let mut head = [0u8; 8];
    let mut f = File::open(path)?;
    let n = f.read(&mut head)?;
    Ok(if n == 8 && &head == BINARY_MAGIC {
        TraceFormat::Binary
    } else {
        TraceFormat::Text
    })
}

pub fn read_trace_file(path: &Path) -> Result<Trace, TraceIoError> {
    let format = detect_format(path)?;
    read_trace(BufReader::new(File::open(path)?), format)
}

pub fn write_trace_file(records: &[TraceRecord], path: &Path, format: TraceFormat) -> io::Result<u64> {
    write_trace(records, BufWriter::new(File::create(path)?), format)
}

/// Back-side stream in the text layout: `seq,op,address,size`.
pub fn write_backside_events<W: Write>(events: &[BacksideEvent], sink: W) -> io::Result<u64> {
    let mut w = CountingWriter { inner: sink, count: 0 };
    writeln!(w, "{TEXT_HEADER}")?;
    for e in events {
        let op = match e.kind {
            BacksideKind::FillRead => 'F',
            BacksideKind::Writeback => 'B',
        };
        writeln!(w, "{},{},{:#x},{}", e.cause_seq, op, e.address, e.size_bytes)?;
    }
    w.flush()?;
    Ok(w.count)
}

pub fn read_backside_events<R: BufRead>(source: R) -> Result<Vec<BacksideEvent>, TraceIoError> {
    let mut lines = source.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim_end() == TEXT_HEADER => {}
        Some(Err(e)) => return Err(e.into()),
        _ => return Err(TraceIoError::BadHeader),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| TraceIoError::Malformed { line: line_no, message };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(malformed(format!("expected 4 fields, found {}", f.len())));
        }
        let cause_seq = f[0].parse().map_err(|_| malformed(format!("bad sequence number `{}`", f[0])))?;
        let kind = match f[1] {
            "F" => BacksideKind::FillRead,
            "B" => BacksideKind::Writeback,
            other => return Err(malformed(format!("bad op `{other}`"))),
        };
        let address = parse_hex(f[2]).ok_or_else(|| malformed(format!("bad address `{}`", f[2])))?;
        let size_bytes = f[3].parse().map_err(|_| malformed(format!("bad size `{}`", f[3])))?;
        out.push(BacksideEvent {
            kind,
            address,
            size_bytes,
            cause_seq,
        });
    }
    Ok(out)
}

struct CountingWriter<W> {
    inner: W,
    count: u64,
}

impl<W: Write> Write for CountingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.count += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}
