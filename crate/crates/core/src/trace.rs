//! Dynamic instruction traces: the line-oriented text format, a parser and
//! emitter that round-trip exactly, and seeded synthetic generators.
//!
//! Format, one instruction per line:
//!
//! ```text
//! I idx=<u-int> bb=<u-int> op=<token> dst=<reg|-> src=<reg[,reg]*|-> mem=<0xHEX|-> lat=<u-int>
//! ```
//!
//! Lines starting with `#` are comments, blank lines are ignored, `-` marks an
//! absent dst/src/mem. The emitter writes a `# name: <name>` header so a trace
//! survives a parse/emit round trip unchanged.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One dynamic instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionRecord {
    /// Ordinal position in the trace, contiguous from 0.
    pub index: usize,
    /// Basic-block identifier.
    pub bb: u32,
    /// Mnemonic. Opcodes starting with `st` are stores, `ld` loads.
    pub opcode: String,
    /// Destination register, if any.
    pub dst: Option<String>,
    /// Source registers in operand order.
    pub srcs: Vec<String>,
    /// Byte address touched by this instruction, if any.
    pub mem: Option<u64>,
    /// Latency in abstract cycles, >= 1.
    pub lat: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub name: String,
    pub records: Vec<InstructionRecord>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Shapes the synthetic generator can produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TracePattern {
    Chain,
    Diamond,
    Fan,
    MapReduce,
    RandomDag,
}

impl TracePattern {
    pub fn name(self) -> &'static str {
        match self {
            TracePattern::Chain => "chain",
            TracePattern::Diamond => "diamond",
            TracePattern::Fan => "fan",
            TracePattern::MapReduce => "mapreduce",
            TracePattern::RandomDag => "random-dag",
        }
    }

    pub const ALL: [TracePattern; 5] = [
        TracePattern::Chain,
        TracePattern::Diamond,
        TracePattern::Fan,
        TracePattern::MapReduce,
        TracePattern::RandomDag,
    ];
}

impl FromStr for TracePattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chain" => Ok(TracePattern::Chain),
            "diamond" => Ok(TracePattern::Diamond),
            "fan" => Ok(TracePattern::Fan),
            "mapreduce" => Ok(TracePattern::MapReduce),
            "random-dag" => Ok(TracePattern::RandomDag),
            other => Err(Error::InvalidArgument(format!(
                "unknown trace pattern '{other}' (expected chain, diamond, fan, mapreduce or random-dag)"
            ))),
        }
    }
}

fn parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        line,
        reason: reason.into(),
    }
}

fn check_reg(tok: &str, line: usize, field: &str) -> Result<String> {
    if tok.is_empty() {
        return Err(parse_err(line, format!("empty register name in {field}")));
    }
    if tok.contains(',') || tok.contains(char::is_whitespace) {
        return Err(parse_err(
            line,
            format!("register name '{tok}' in {field} contains ',' or whitespace"),
        ));
    }
    Ok(tok.to_string())
}

fn field_value<'a>(tok: &'a str, key: &str, line: usize) -> Result<&'a str> {
    let prefix_len = key.len() + 1;
    if tok.len() > prefix_len && tok.starts_with(key) && tok.as_bytes()[key.len()] == b'=' {
        Ok(&tok[prefix_len..])
    } else {
        Err(parse_err(line, format!("expected field '{key}=', got '{tok}'")))
    }
}

/// Parse a trace from its text form.
///
/// Errors carry the 1-based line number. Instruction indices must be
/// contiguous from 0; a gap or reordering is a structural error.
pub fn parse_trace(text: &str) -> Result<Trace> {
    let mut name = String::from("trace");
    let mut name_seen = false;
    let mut records: Vec<InstructionRecord> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if !name_seen {
                if let Some(n) = comment.strip_prefix(" name: ") {
                    name = n.trim().to_string();
                    name_seen = true;
                }
            }
            continue;
        }

        let toks: Vec<&str> = line.split(' ').collect();
        if toks.len() != 8 || toks[0] != "I" {
            return Err(parse_err(
                lineno,
                "expected 'I idx=.. bb=.. op=.. dst=.. src=.. mem=.. lat=..'",
            ));
        }

        let index: usize = field_value(toks[1], "idx", lineno)?
            .parse()
            .map_err(|_| parse_err(lineno, "idx must be an unsigned integer"))?;
        let bb: u32 = field_value(toks[2], "bb", lineno)?
            .parse()
            .map_err(|_| parse_err(lineno, "bb must be an unsigned integer"))?;
        let opcode = field_value(toks[3], "op", lineno)?;
        if opcode.is_empty() || opcode.contains(',') {
            return Err(parse_err(lineno, "op must be a non-empty token"));
        }

        let dst = match field_value(toks[4], "dst", lineno)? {
            "-" => None,
            reg => Some(check_reg(reg, lineno, "dst")?),
        };
        let srcs = match field_value(toks[5], "src", lineno)? {
            "-" => Vec::new(),
            list => list
                .split(',')
                .map(|r| check_reg(r, lineno, "src"))
                .collect::<Result<Vec<_>>>()?,
        };
        let mem = match field_value(toks[6], "mem", lineno)? {
            "-" => None,
            hex => {
                let digits = hex.strip_prefix("0x").ok_or_else(|| {
                    parse_err(lineno, "mem must be '-' or a 0x-prefixed hex address")
                })?;
                Some(
                    u64::from_str_radix(digits, 16)
                        .map_err(|_| parse_err(lineno, format!("bad hex address '{hex}'")))?,
                )
            }
        };
        let lat: u64 = field_value(toks[7], "lat", lineno)?
            .parse()
            .map_err(|_| parse_err(lineno, "lat must be an unsigned integer"))?;
        if lat == 0 {
            return Err(parse_err(lineno, "lat must be >= 1"));
        }

        if index != records.len() {
            return Err(Error::Structure(format!(
                "line {lineno}: non-contiguous instruction index {index} (expected {})",
                records.len()
            )));
        }

        records.push(InstructionRecord {
            index,
            bb,
            opcode: opcode.to_string(),
            dst,
            srcs,
            mem,
            lat,
        });
    }

    Ok(Trace { name, records })
}

/// Emit a trace in its canonical text form; `parse_trace` inverts this exactly.
pub fn emit_trace(trace: &Trace) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# name: {}", trace.name);
    for r in &trace.records {
        let dst = r.dst.as_deref().unwrap_or("-");
        let src = if r.srcs.is_empty() {
            "-".to_string()
        } else {
            r.srcs.join(",")
        };
        let mem = match r.mem {
            Some(a) => format!("0x{a:x}"),
            None => "-".to_string(),
        };
        let _ = writeln!(
            out,
            "I idx={} bb={} op={} dst={} src={} mem={} lat={}",
            r.index, r.bb, r.opcode, dst, src, mem, r.lat
        );
    }
    out
}

fn record(
    index: usize,
    bb: u32,
    opcode: &str,
    dst: Option<String>,
    srcs: Vec<String>,
    mem: Option<u64>,
    lat: u64,
) -> InstructionRecord {
    InstructionRecord {
        index,
        bb,
        opcode: opcode.to_string(),
        dst,
        srcs,
        mem,
        lat,
    }
}

fn reg(i: usize) -> String {
    format!("r{i}")
}

/// Generate a synthetic trace whose induced dependency graph has the named
/// shape. Deterministic for a fixed (pattern, size, seed); the seed only
/// matters for `random-dag`.
pub fn generate_trace(pattern: TracePattern, size: usize, seed: u64) -> Result<Trace> {
    if size == 0 {
        return Err(Error::InvalidArgument("size must be >= 1".into()));
    }
    let name = format!("{}-{}", pattern.name(), size);
    let mut records = Vec::with_capacity(size);

    match pattern {
        TracePattern::Chain => {
            // Straight-line code: one block, each record reads its predecessor.
            records.push(record(0, 0, "mov", Some(reg(0)), vec![], None, 1));
            for i in 1..size {
                records.push(record(i, 0, "add", Some(reg(i)), vec![reg(i - 1)], None, 1));
            }
        }
        TracePattern::Diamond => {
            records.push(record(0, 0, "mov", Some(reg(0)), vec![], None, 1));
            if size >= 2 {
                let sink = size - 1;
                for i in 1..sink {
                    records.push(record(i, i as u32, "add", Some(reg(i)), vec![reg(0)], None, 1));
                }
                let gathered: Vec<String> = if sink == 1 {
                    vec![reg(0)]
                } else {
                    (1..sink).map(reg).collect()
                };
                records.push(record(sink, sink as u32, "add", Some(reg(sink)), gathered, None, 1));
            }
        }
        TracePattern::Fan => {
            records.push(record(0, 0, "mov", Some(reg(0)), vec![], None, 1));
            for i in 1..size {
                records.push(record(i, i as u32, "add", Some(reg(i)), vec![reg(0)], None, 1));
            }
        }
        TracePattern::MapReduce => {
            // size-1 independent map steps feeding one reduce step. Map steps
            // load pages in pairs so downstream processes share frames.
            if size == 1 {
                records.push(record(0, 0, "mov", Some(reg(0)), vec![], None, 1));
            } else {
                let maps = size - 1;
                for i in 0..maps {
                    let page = 0x1000u64 * (1 + (i as u64) / 2);
                    records.push(record(i, i as u32, "ld", Some(reg(i)), vec![], Some(page), 1));
                }
                let gathered: Vec<String> = (0..maps).map(reg).collect();
                records.push(record(
                    maps,
                    maps as u32,
                    "st",
                    None,
                    gathered,
                    Some(0x8000),
                    1,
                ));
            }
        }
        TracePattern::RandomDag => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            const PAGES: [u64; 4] = [0x1000, 0x2000, 0x3000, 0x4000];
            const ALU: [&str; 3] = ["add", "mul", "xor"];
            for j in 0..size {
                let indeg = if j == 0 {
                    0
                } else {
                    rng.random_range(0..=j.min(3))
                };
                let mut preds = rand::seq::index::sample(&mut rng, j.max(1), indeg.min(j))
                    .into_vec();
                preds.sort_unstable();
                let srcs: Vec<String> = preds.into_iter().map(reg).collect();
                let lat = rng.random_range(1..=8);
                let (opcode, mem) = if rng.random_bool(0.25) {
                    let addr = PAGES[rng.random_range(0..PAGES.len())]
                        + 4 * rng.random_range(0..64u64);
                    let op = if rng.random_bool(0.5) { "st" } else { "ld" };
                    (op, Some(addr))
                } else {
                    (ALU[rng.random_range(0..ALU.len())], None)
                };
                records.push(record(
                    j,
                    (j / 4) as u32,
                    opcode,
                    Some(reg(j)),
                    srcs,
                    mem,
                    lat,
                ));
            }
        }
    }

    Ok(Trace { name, records })
}
