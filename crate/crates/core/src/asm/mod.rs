//! Table-driven two-pass assembler and flat linker.
//!
//! An [`Assembler`] is instantiated from an [`IsaConfig`]; its mnemonic table
//! holds exactly the config's instructions, so a reduced config yields an
//! assembler that rejects every removed mnemonic.

mod listing;
mod object;
pub mod syntax;

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::isa::{
    encode, validate, Diagnostic, EncodeError, InstructionDef, IsaConfig, MicroOp, Operand,
    OperandRole,
};
use syntax::{parse_line, Directive, Expr, OperandSyntax, Statement, StatementKind};

pub use listing::emit_listing;
pub use object::{link, FieldKind, LineRecord, LinkError, MachineImage, ObjectModule, Relocation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AsmErrorKind {
    #[error("unknown mnemonic `{0}`")]
    UnknownMnemonic(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("{0}")]
    Syntax(String),
    #[error("malformed operand: {0}")]
    MalformedOperand(String),
    #[error("operand out of range: {0}")]
    OutOfRange(String),
    #[error("`{0}` must be defined before use here")]
    UndefinedSymbol(String),
    #[error(".org {to:#x} moves backward from {from:#x}")]
    OrgBackward { from: u32, to: u32 },
    #[error("address {0:#x} is not word aligned")]
    Misaligned(i64),
    #[error(transparent)]
    Encode(#[from] EncodeError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct AsmError {
    pub line: usize,
    pub kind: AsmErrorKind,
}

impl AsmError {
    fn new(line: usize, kind: AsmErrorKind) -> Self {
        AsmError { line, kind }
    }

    /// Errors that mean "this program does not fit the instruction set"
    /// rather than "this program is malformed".
    pub fn is_rejection(&self) -> bool {
        matches!(
            self.kind,
            AsmErrorKind::UnknownMnemonic(_)
                | AsmErrorKind::OutOfRange(_)
                | AsmErrorKind::Encode(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot build an assembler from an invalid config ({} problem(s))", .0.len())]
pub struct InvalidConfig(pub Vec<Diagnostic>);

/// An assembler specialized to one instruction set.
#[derive(Debug, Clone)]
pub struct Assembler {
    cfg: IsaConfig,
    table: HashMap<String, usize>,
}

/// Mnemonic table row, as exported by `dump-tables`.
#[derive(Debug, Clone, Serialize)]
pub struct TableRow {
    pub mnemonic: String,
    pub opcode: String,
    pub format: String,
    pub operands: String,
    pub semantics: String,
    pub units: Vec<String>,
}

pub fn build_assembler(cfg: &IsaConfig) -> Result<Assembler, InvalidConfig> {
    let diags = validate(cfg);
    if !diags.is_empty() {
        return Err(InvalidConfig(diags));
    }
    let table = cfg
        .instructions
        .iter()
        .enumerate()
        .map(|(i, d)| (d.mnemonic.clone(), i))
        .collect();
    Ok(Assembler {
        cfg: cfg.clone(),
        table,
    })
}

/// How a symbol reference is resolved into its field.
fn field_kind(def: &InstructionDef, role: OperandRole) -> FieldKind {
    match role {
        OperandRole::Target24 => FieldKind::Target24,
        OperandRole::Imm16 if matches!(def.semantics, MicroOp::Branch(_)) => FieldKind::Pcrel16,
        _ => FieldKind::Imm16,
    }
}

/// Whether a negative constant is meaningful for this imm16 field.
fn imm_is_signed(def: &InstructionDef) -> bool {
    match def.semantics {
        MicroOp::AluI(op) => op.sign_extends_immediate(),
        MicroOp::Branch(_) => true,
        _ => false,
    }
}

pub(crate) fn fit_imm16(value: i64, signed: bool) -> Result<u32, String> {
    let lo = if signed { -0x8000 } else { 0 };
    if (lo..=0xFFFF).contains(&value) {
        Ok((value as u32) & 0xFFFF)
    } else if signed {
        Err(format!("{value} does not fit a 16-bit immediate"))
    } else {
        Err(format!(
            "{value:#x} does not fit an unsigned 16-bit immediate"
        ))
    }
}

pub(crate) fn fit_pcrel16(target: i64, word_addr: u32) -> Result<u32, String> {
    let offset = target - (word_addr as i64 + 4);
    if (-0x8000..=0x7FFF).contains(&offset) {
        Ok((offset as u32) & 0xFFFF)
    } else {
        Err(format!("branch offset {offset} does not fit 16 bits"))
    }
}

pub(crate) fn fit_target24(value: i64) -> Result<u32, String> {
    if (0..=0xFF_FFFF).contains(&value) {
        Ok(value as u32)
    } else {
        Err(format!("{value:#x} does not fit a 24-bit target"))
    }
}

struct Pass1 {
    statements: Vec<Statement>,
    addresses: Vec<u32>,
    symbols: BTreeMap<String, u32>,
    end: u32,
}

impl Assembler {
    pub fn config(&self) -> &IsaConfig {
        &self.cfg
    }

    pub fn knows(&self, mnemonic: &str) -> bool {
        self.table.contains_key(&mnemonic.to_ascii_uppercase())
    }

    pub fn tables(&self) -> Vec<TableRow> {
        self.cfg
            .instructions
            .iter()
            .map(|d| TableRow {
                mnemonic: d.mnemonic.clone(),
                opcode: format!("0x{:02X}", d.opcode),
                format: d.format.to_string(),
                operands: d.operand_pattern(),
                semantics: d.semantics.to_string(),
                units: d.units.iter().map(ToString::to_string).collect(),
            })
            .collect()
    }

    fn lookup(&self, line: usize, mnemonic: &str) -> Result<&InstructionDef, AsmError> {
        self.table
            .get(mnemonic)
            .map(|&i| &self.cfg.instructions[i])
            .ok_or_else(|| AsmError::new(line, AsmErrorKind::UnknownMnemonic(mnemonic.into())))
    }

    fn eval_now(
        line: usize,
        expr: &Expr,
        symbols: &BTreeMap<String, u32>,
    ) -> Result<i64, AsmError> {
        match &expr.symbol {
            None => Ok(expr.addend),
            Some(s) => symbols
                .get(s)
                .map(|&v| v as i64 + expr.addend)
                .ok_or_else(|| AsmError::new(line, AsmErrorKind::UndefinedSymbol(s.clone()))),
        }
    }

    fn pass1(&self, source: &str, origin: u32) -> Result<Pass1, AsmError> {
        let mut statements = Vec::new();
        let mut addresses = Vec::new();
        let mut symbols = BTreeMap::new();
        let mut pc = origin;
        for (i, raw) in source.lines().enumerate() {
            let line = i + 1;
            let stmt = parse_line(line, raw).map_err(|e| {
                let kind = if e.0.starts_with("malformed operand")
                    || e.0.contains("base register")
                    || e.0.contains("parentheses")
                {
                    AsmErrorKind::MalformedOperand(e.0)
                } else {
                    AsmErrorKind::Syntax(e.0)
                };
                AsmError::new(line, kind)
            })?;
            let org_target = match &stmt.kind {
                StatementKind::Directive(Directive::Org(e)) => {
                    let to = Self::eval_now(line, e, &symbols)?;
                    if to % 4 != 0 || to < 0 || to > u32::MAX as i64 {
                        return Err(AsmError::new(line, AsmErrorKind::Misaligned(to)));
                    }
                    let to = to as u32;
                    if to < pc {
                        return Err(AsmError::new(
                            line,
                            AsmErrorKind::OrgBackward { from: pc, to },
                        ));
                    }
                    Some(to)
                }
                _ => None,
            };
            // A label on an .org line names the new address.
            if let Some(to) = org_target {
                pc = to;
            }
            if let Some(label) = &stmt.label {
                if symbols.insert(label.clone(), pc).is_some() {
                    return Err(AsmError::new(
                        line,
                        AsmErrorKind::DuplicateLabel(label.clone()),
                    ));
                }
            }
            addresses.push(pc);
            let size: u32 = match &stmt.kind {
                StatementKind::Instruction { mnemonic, .. } => {
                    self.lookup(line, mnemonic)?;
                    4
                }
                StatementKind::Directive(Directive::Word(vals)) => 4 * vals.len() as u32,
                StatementKind::Directive(Directive::Space(e)) => {
                    let n = Self::eval_now(line, e, &symbols)?;
                    if n < 0 || n % 4 != 0 {
                        return Err(AsmError::new(
                            line,
                            AsmErrorKind::Syntax(format!(".space {n} is not a multiple of 4")),
                        ));
                    }
                    n as u32
                }
                StatementKind::Directive(Directive::Equ(name, e)) => {
                    let v = Self::eval_now(line, e, &symbols)?;
                    if symbols.insert(name.clone(), v as u32).is_some() {
                        return Err(AsmError::new(
                            line,
                            AsmErrorKind::DuplicateLabel(name.clone()),
                        ));
                    }
                    0
                }
                StatementKind::Directive(Directive::Org(_)) | StatementKind::Empty => 0,
            };
            pc = pc.checked_add(size).ok_or_else(|| {
                AsmError::new(
                    line,
                    AsmErrorKind::OutOfRange("address space overflow".into()),
                )
            })?;
            statements.push(stmt);
        }
        Ok(Pass1 {
            statements,
            addresses,
            symbols,
            end: pc,
        })
    }

    /// Assemble `source` at `origin` into a relocatable object module.
    pub fn assemble(&self, source: &str, origin: u32) -> Result<ObjectModule, AsmError> {
        if !origin.is_multiple_of(4) {
            return Err(AsmError::new(0, AsmErrorKind::Misaligned(origin as i64)));
        }
        let p1 = self.pass1(source, origin)?;
        let mut words = vec![0u32; ((p1.end - origin) / 4) as usize];
        let mut relocations = Vec::new();
        let mut lines = Vec::new();

        for (stmt, &addr) in p1.statements.iter().zip(&p1.addresses) {
            let line = stmt.line_no;
            let index = ((addr - origin) / 4) as usize;
            let mut emitted = 0;
            match &stmt.kind {
                StatementKind::Instruction { mnemonic, operands } => {
                    let def = self.lookup(line, mnemonic)?;
                    let (word, relocs) =
                        self.encode_statement(def, operands, addr, index, line, &p1.symbols)?;
                    words[index] = word;
                    relocations.extend(relocs);
                    emitted = 1;
                }
                StatementKind::Directive(Directive::Word(vals)) => {
                    for (k, e) in vals.iter().enumerate() {
                        match resolve(e, &p1.symbols) {
                            Some(v) => {
                                if !(i32::MIN as i64..=u32::MAX as i64).contains(&v) {
                                    return Err(AsmError::new(
                                        line,
                                        AsmErrorKind::OutOfRange(format!(
                                            "{v} does not fit 32 bits"
                                        )),
                                    ));
                                }
                                words[index + k] = v as u32;
                            }
                            None => relocations.push(Relocation {
                                index: index + k,
                                symbol: e.symbol.clone().unwrap(),
                                addend: e.addend,
                                kind: FieldKind::Word32,
                            }),
                        }
                    }
                    emitted = vals.len();
                }
                StatementKind::Directive(Directive::Space(e)) => {
                    emitted = (resolve(e, &p1.symbols).unwrap_or(0) / 4) as usize;
                }
                _ => {}
            }
            lines.push(LineRecord {
                line_no: line,
                address: (emitted > 0).then_some(addr),
                word_count: emitted,
            });
        }

        Ok(ObjectModule {
            origin,
            words,
            symbols: p1.symbols,
            relocations,
            lines,
        })
    }

    fn encode_statement(
        &self,
        def: &InstructionDef,
        operands: &[OperandSyntax],
        addr: u32,
        index: usize,
        line: usize,
        symbols: &BTreeMap<String, u32>,
    ) -> Result<(u32, Vec<Relocation>), AsmError> {
        if operands.len() != def.operands.len() {
            return Err(AsmError::new(
                line,
                AsmErrorKind::MalformedOperand(format!(
                    "{} expects `{}` ({} operand(s)), got {}",
                    def.mnemonic,
                    def.operand_pattern(),
                    def.operands.len(),
                    operands.len()
                )),
            ));
        }
        let range = |msg: String| AsmError::new(line, AsmErrorKind::OutOfRange(msg));
        let mut relocs = Vec::new();
        let mut bound = Vec::with_capacity(operands.len());
        for (k, (&role, op)) in def.operands.iter().zip(operands).enumerate() {
            let value = match (role, op) {
                (r, OperandSyntax::Reg(n)) if r.is_register() => Operand::Reg(*n),
                (OperandRole::Imm16 | OperandRole::Target24, OperandSyntax::Expr(e)) => {
                    let kind = field_kind(def, role);
                    match resolve(e, symbols) {
                        None => {
                            relocs.push(Relocation {
                                index,
                                symbol: e.symbol.clone().unwrap(),
                                addend: e.addend,
                                kind,
                            });
                            Operand::Imm(0)
                        }
                        Some(v) => Operand::Imm(match kind {
                            FieldKind::Target24 => fit_target24(v).map_err(range)?,
                            FieldKind::Pcrel16 => fit_pcrel16(v, addr).map_err(range)?,
                            _ => fit_imm16(v, imm_is_signed(def)).map_err(range)?,
                        }),
                    }
                }
                (OperandRole::Mem, OperandSyntax::Mem { offset, base }) => Operand::Mem {
                    offset: self.mem_offset(offset, index, symbols, &mut relocs, line)?,
                    base: *base,
                },
                // A bare address is `address(R0)`.
                (OperandRole::Mem, OperandSyntax::Expr(e)) => Operand::Mem {
                    offset: self.mem_offset(e, index, symbols, &mut relocs, line)?,
                    base: 0,
                },
                (role, op) => {
                    return Err(AsmError::new(
                        line,
                        AsmErrorKind::MalformedOperand(format!(
                            "{} operand {} must be {role}, got {}",
                            def.mnemonic,
                            k + 1,
                            describe(op)
                        )),
                    ))
                }
            };
            bound.push(value);
        }
        let word = encode(def, &bound).map_err(|e| match e {
            EncodeError::RegisterOutOfRange(_) | EncodeError::ImmediateOutOfRange { .. } => {
                range(e.to_string())
            }
            e => AsmError::new(line, AsmErrorKind::Encode(e)),
        })?;
        Ok((word, relocs))
    }

    fn mem_offset(
        &self,
        e: &Expr,
        index: usize,
        symbols: &BTreeMap<String, u32>,
        relocs: &mut Vec<Relocation>,
        line: usize,
    ) -> Result<u16, AsmError> {
        match resolve(e, symbols) {
            Some(v) => fit_imm16(v, false)
                .map(|v| v as u16)
                .map_err(|m| AsmError::new(line, AsmErrorKind::OutOfRange(m))),
            None => {
                relocs.push(Relocation {
                    index,
                    symbol: e.symbol.clone().unwrap(),
                    addend: e.addend,
                    kind: FieldKind::Imm16,
                });
                Ok(0)
            }
        }
    }
}

fn describe(op: &OperandSyntax) -> String {
    match op {
        OperandSyntax::Reg(r) => format!("register R{r}"),
        OperandSyntax::Expr(e) => format!("expression `{e}`"),
        OperandSyntax::Mem { offset, base } => format!("memory operand `{offset}(R{base})`"),
    }
}

fn resolve(e: &Expr, symbols: &BTreeMap<String, u32>) -> Option<i64> {
    match &e.symbol {
        None => Some(e.addend),
        Some(s) => symbols.get(s).map(|&v| v as i64 + e.addend),
    }
}

/// Convenience: build an assembler for `cfg` and assemble `source`.
pub fn assemble(cfg: &IsaConfig, source: &str, origin: u32) -> Result<ObjectModule, AsmError> {
    let asm =
        build_assembler(cfg).map_err(|e| AsmError::new(0, AsmErrorKind::Syntax(e.to_string())))?;
    asm.assemble(source, origin)
}
