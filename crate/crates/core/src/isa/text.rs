//! The `.isa` text format.
//!
//! ```text
//! # comment
//! name: cpu0-full
//! word: 32
//! registers: R0=zero R1-R11=general R12=sw R13=sp R14=lr R15=pc R16=ir
//! core: IRET JMP NOP
//! INSN ADD opcode=0x13 fmt=A ops=ra,rb,rc sem=ALU3(ADD) units=CORE
//! ```
//!
//! Header lines may appear in any order; `INSN` lines may be interleaved with
//! them. Serialization is canonical: fixed header order, instructions sorted
//! by opcode.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use super::{
    validate, Diagnostic, Format, InstructionDef, IsaConfig, MicroOp, OperandRole, RegRole, Unit,
    WORD_BITS,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: duplicate mnemonic `{mnemonic}` (first defined on line {first})")]
    DuplicateMnemonic {
        line: usize,
        first: usize,
        mnemonic: String,
    },
    #[error("line {line}: opcode {opcode:#04x} already assigned to `{other}` on line {first}")]
    DuplicateOpcode {
        line: usize,
        first: usize,
        opcode: u8,
        other: String,
    },
    #[error("invalid configuration: {}", join_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),
}

fn join_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

struct Cursor<'a> {
    line_no: usize,
    line: &'a str,
}

impl Cursor<'_> {
    fn err(&self, token: &str, message: impl Into<String>) -> ParseError {
        // Tokens are always subslices of the line.
        let offset = token.as_ptr() as usize - self.line.as_ptr() as usize;
        ParseError::Syntax {
            line: self.line_no,
            column: self.line[..offset].chars().count() + 1,
            message: message.into(),
        }
    }
}

/// Parse and validate an `.isa` document.
pub fn parse_isa_config(text: &str) -> Result<IsaConfig, ParseError> {
    let mut name = None;
    let mut registers = None;
    let mut core = None;
    let mut instructions = Vec::new();
    let mut mnemonic_lines: HashMap<String, usize> = HashMap::new();
    let mut opcode_lines: HashMap<u8, (usize, String)> = HashMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let cur = Cursor {
            line_no: idx + 1,
            line: raw,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("INSN") {
            if !rest.is_empty() && !rest.starts_with(char::is_whitespace) {
                return Err(cur.err(trimmed, "expected `INSN <MNEMONIC> ...`"));
            }
            let def = parse_instruction(&cur, rest)?;
            if let Some(&first) = mnemonic_lines.get(&def.mnemonic) {
                return Err(ParseError::DuplicateMnemonic {
                    line: cur.line_no,
                    first,
                    mnemonic: def.mnemonic,
                });
            }
            if let Some((first, other)) = opcode_lines.get(&def.opcode) {
                return Err(ParseError::DuplicateOpcode {
                    line: cur.line_no,
                    first: *first,
                    opcode: def.opcode,
                    other: other.clone(),
                });
            }
            mnemonic_lines.insert(def.mnemonic.clone(), cur.line_no);
            opcode_lines.insert(def.opcode, (cur.line_no, def.mnemonic.clone()));
            instructions.push(def);
            continue;
        }
        let Some((key, value)) = trimmed.split_once(':') else {
            return Err(cur.err(trimmed, "expected `key: value` header or `INSN` line"));
        };
        let key = key.trim();
        let value = value.trim();
        let once = |present: bool| {
            if present {
                Err(cur.err(key, format!("duplicate `{key}:` header")))
            } else {
                Ok(())
            }
        };
        match key {
            "name" => {
                once(name.is_some())?;
                if value.is_empty() {
                    return Err(cur.err(trimmed, "empty configuration name"));
                }
                name = Some(value.to_string());
            }
            "word" => {
                if value != WORD_BITS.to_string() {
                    return Err(cur.err(value, "only 32-bit words are supported"));
                }
            }
            "registers" => {
                once(registers.is_some())?;
                registers = Some(parse_registers(&cur, value)?);
            }
            "core" => {
                once(core.is_some())?;
                let mut set = BTreeSet::new();
                for tok in value.split_whitespace() {
                    check_mnemonic(&cur, tok)?;
                    set.insert(tok.to_string());
                }
                core = Some(set);
            }
            _ => return Err(cur.err(key, format!("unknown header `{key}`"))),
        }
    }

    let mut cfg = IsaConfig {
        name: name.ok_or_else(|| ParseError::Syntax {
            line: 1,
            column: 1,
            message: "missing `name:` header".into(),
        })?,
        register_roles: registers.unwrap_or_default(),
        instructions,
        required_core: core.unwrap_or_default(),
    };
    cfg.sort_instructions();

    let mut diags = validate(&cfg);
    if !diags.is_empty() {
        for d in &mut diags {
            if let Some(m) = &d.mnemonic {
                d.line = mnemonic_lines.get(m).copied();
            }
        }
        return Err(ParseError::Invalid(diags));
    }
    Ok(cfg)
}

fn check_mnemonic(cur: &Cursor, tok: &str) -> Result<(), ParseError> {
    let ok = tok.chars().next().is_some_and(|c| c.is_ascii_uppercase())
        && tok
            .chars()
            .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_');
    if ok {
        Ok(())
    } else {
        Err(cur.err(tok, format!("`{tok}` is not an uppercase mnemonic")))
    }
}

fn parse_register_index(cur: &Cursor, tok: &str) -> Result<u8, ParseError> {
    tok.strip_prefix('R')
        .and_then(|n| n.parse::<u8>().ok())
        .filter(|&n| (n as usize) < super::REGISTER_COUNT)
        .ok_or_else(|| cur.err(tok, format!("bad register name `{tok}`")))
}

fn parse_registers(cur: &Cursor, value: &str) -> Result<BTreeMap<u8, RegRole>, ParseError> {
    let mut roles = BTreeMap::new();
    for tok in value.split_whitespace() {
        let (regs, role) = tok
            .split_once('=')
            .ok_or_else(|| cur.err(tok, "expected `Rn=role` or `Rn-Rm=role`"))?;
        let role: RegRole = role.parse().map_err(|e: String| cur.err(tok, e))?;
        let (lo, hi) = match regs.split_once('-') {
            Some((a, b)) => (parse_register_index(cur, a)?, parse_register_index(cur, b)?),
            None => {
                let r = parse_register_index(cur, regs)?;
                (r, r)
            }
        };
        if lo > hi {
            return Err(cur.err(tok, "empty register range"));
        }
        for r in lo..=hi {
            if roles.insert(r, role).is_some() {
                return Err(cur.err(tok, format!("register R{r} assigned twice")));
            }
        }
    }
    Ok(roles)
}

fn parse_instruction(cur: &Cursor, rest: &str) -> Result<InstructionDef, ParseError> {
    let mut tokens = rest.split_whitespace();
    let mnemonic = tokens
        .next()
        .ok_or_else(|| cur.err(rest, "missing mnemonic after INSN"))?;
    check_mnemonic(cur, mnemonic)?;

    let mut opcode = None;
    let mut format = None;
    let mut operands = None;
    let mut semantics = None;
    let mut units = None;
    for tok in tokens {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| cur.err(tok, "expected `key=value`"))?;
        let bad = |e: String| cur.err(tok, e);
        let dup = |present: bool| {
            if present {
                Err(cur.err(tok, format!("duplicate `{key}=`")))
            } else {
                Ok(())
            }
        };
        match key {
            "opcode" => {
                dup(opcode.is_some())?;
                let hex = value
                    .strip_prefix("0x")
                    .or_else(|| value.strip_prefix("0X"))
                    .ok_or_else(|| bad(format!("opcode `{value}` must be 0xNN hex")))?;
                opcode = Some(
                    u8::from_str_radix(hex, 16)
                        .map_err(|_| bad(format!("opcode `{value}` is not a byte")))?,
                );
            }
            "fmt" => {
                dup(format.is_some())?;
                format = Some(value.parse::<Format>().map_err(bad)?);
            }
            "ops" => {
                dup(operands.is_some())?;
                operands = Some(if value == "-" {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|r| r.parse::<OperandRole>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(bad)?
                });
            }
            "sem" => {
                dup(semantics.is_some())?;
                semantics = Some(value.parse::<MicroOp>().map_err(bad)?);
            }
            "units" => {
                dup(units.is_some())?;
                units = Some(
                    value
                        .split(',')
                        .map(|u| u.parse::<Unit>())
                        .collect::<Result<BTreeSet<_>, _>>()
                        .map_err(bad)?,
                );
            }
            _ => return Err(cur.err(tok, format!("unknown instruction field `{key}`"))),
        }
    }
    let missing = |field: &str| cur.err(mnemonic, format!("`{mnemonic}` is missing `{field}=`"));
    let semantics = semantics.ok_or_else(|| missing("sem"))?;
    Ok(InstructionDef {
        mnemonic: mnemonic.to_string(),
        opcode: opcode.ok_or_else(|| missing("opcode"))?,
        format: format.ok_or_else(|| missing("fmt"))?,
        operands: operands.ok_or_else(|| missing("ops"))?,
        semantics,
        units: units.unwrap_or_else(|| semantics.required_units()),
    })
}

fn registers_line(roles: &BTreeMap<u8, RegRole>) -> String {
    // Collapse runs of consecutive registers with the same role.
    let mut parts = Vec::new();
    let mut iter = roles.iter().peekable();
    while let Some((&start, &role)) = iter.next() {
        let mut end = start;
        while let Some(&(&next, &next_role)) = iter.peek() {
            if next == end + 1 && next_role == role {
                end = next;
                iter.next();
            } else {
                break;
            }
        }
        if start == end {
            parts.push(format!("R{start}={role}"));
        } else {
            parts.push(format!("R{start}-R{end}={role}"));
        }
    }
    parts.join(" ")
}

/// Canonical text form of a configuration.
pub fn serialize_isa_config(cfg: &IsaConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "name: {}", cfg.name);
    let _ = writeln!(out, "word: {WORD_BITS}");
    let _ = writeln!(out, "registers: {}", registers_line(&cfg.register_roles));
    let core: Vec<&str> = cfg.required_core.iter().map(String::as_str).collect();
    if core.is_empty() {
        out.push_str("core:\n");
    } else {
        let _ = writeln!(out, "core: {}", core.join(" "));
    }

    let mut defs: Vec<&InstructionDef> = cfg.instructions.iter().collect();
    defs.sort_by_key(|d| d.opcode);
    if !defs.is_empty() {
        out.push('\n');
    }
    for d in defs {
        let units: Vec<String> = d.units.iter().map(ToString::to_string).collect();
        let _ = writeln!(
            out,
            "INSN {:<6} opcode=0x{:02X} fmt={} ops={:<15} sem={:<12} units={}",
            d.mnemonic,
            d.opcode,
            d.format,
            d.operand_pattern(),
            d.semantics.to_string(),
            units.join(",")
        );
    }
    out
}
