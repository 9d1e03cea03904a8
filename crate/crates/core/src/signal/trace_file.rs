//! Versioned text format for binary traces.
//!
//! ```text
//! beaconfold-trace v1
//! sample_period_us=128
//! origin_time_us=0
//! 0100110...
//! ```
//!
//! The body holds one `0`/`1` character per sample. Line breaks in the body are
//! ignored; the writer wraps at 80 samples. The receiver-awake mask of a
//! duty-cycled render is not part of the format.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::RssiTrace;
use crate::{Error, Result};

pub const TRACE_MAGIC: &str = "beaconfold-trace v1";

const LINE_WIDTH: usize = 80;

pub fn write_trace<W: Write>(trace: &RssiTrace, mut out: W) -> Result<()> {
    writeln!(out, "{TRACE_MAGIC}")?;
    writeln!(out, "sample_period_us={}", trace.sample_period_us())?;
    writeln!(out, "origin_time_us={}", trace.origin_time_us())?;
    let mut line = String::with_capacity(LINE_WIDTH + 1);
    for chunk in trace.samples().chunks(LINE_WIDTH) {
        line.clear();
        line.extend(chunk.iter().map(|&s| if s == 1 { '1' } else { '0' }));
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn header_value(line: Option<(usize, String)>, key: &str, lineno: usize) -> Result<u64> {
    let (n, text) = line.ok_or_else(|| Error::Parse {
        line: lineno,
        msg: format!("missing `{key}=` header"),
    })?;
    let value = text
        .trim_end()
        .strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| Error::Parse {
            line: n,
            msg: format!("expected `{key}=<integer>`"),
        })?;
    value.parse::<u64>().map_err(|e| Error::Parse {
        line: n,
        msg: format!("bad value for {key}: {e}"),
    })
}

pub fn read_trace<R: BufRead>(input: R) -> Result<RssiTrace> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)));
    let mut next = || lines.next().transpose();

    match next()? {
        Some((_, l)) if l.trim_end() == TRACE_MAGIC => {}
        Some((n, l)) => {
            return Err(Error::Parse {
                line: n,
                msg: format!("expected `{TRACE_MAGIC}`, found `{}`", l.trim_end()),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                msg: "missing header".into(),
            })
        }
    }
    let period = header_value(next()?, "sample_period_us", 2)?;
    if period == 0 {
        return Err(Error::Parse {
            line: 2,
            msg: "sample_period_us must be positive".into(),
        });
    }
    let origin = header_value(next()?, "origin_time_us", 3)?;

    let mut samples = Vec::new();
    while let Some((n, line)) = next()? {
        for c in line.trim_end_matches(['\r', '\n']).chars() {
            match c {
                '0' => samples.push(0),
                '1' => samples.push(1),
                other => {
                    return Err(Error::Parse {
                        line: n,
                        msg: format!("invalid sample character `{other}`"),
                    })
                }
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::EmptyTrace);
    }
    RssiTrace::new(samples, period, origin)
}

pub fn save_trace(trace: &RssiTrace, path: impl AsRef<Path>) -> Result<()> {
    write_trace(trace, BufWriter::new(File::create(path)?))
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<RssiTrace> {
    read_trace(BufReader::new(File::open(path)?))
}
