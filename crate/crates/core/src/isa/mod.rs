//! ISA configuration model.
//!
//! An [`IsaConfig`] is the single table that drives every other tool in the
//! crate: the assembler encodes with it, the simulator decodes with it and the
//! HDL generator emits a decoder arm per entry. Configurations are exchanged
//! as line-oriented `.isa` text (see [`text`]).

mod encoding;
pub mod text;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use encoding::{decode, encode, DecodeError, EncodeError, Fields, OpcodeTable};
pub use text::{parse_isa_config, serialize_isa_config, ParseError};
pub use validate::{validate, Diagnostic};

/// Machine word width. Only 32-bit words are supported.
pub const WORD_BITS: u32 = 32;

/// R0..R16.
pub const REGISTER_COUNT: usize = 17;

/// Highest register index that fits a 4-bit register field. R16 (IR) is not
/// addressable by instructions.
pub const MAX_ENCODABLE_REG: u8 = 15;

pub const REG_ZERO: usize = 0;
pub const REG_SW: usize = 12;
pub const REG_SP: usize = 13;
pub const REG_LR: usize = 14;
pub const REG_PC: usize = 15;
pub const REG_IR: usize = 16;

const DEFAULT_ISA: &str = include_str!("../../assets/default.isa");

/// Instruction word layouts.
///
/// ```text
/// A: [31:24] opcode  [23:20] ra  [19:16] rb  [15:12] rc  [11:0] zero
/// L: [31:24] opcode  [23:20] ra  [19:16] rb  [15:0]  imm16
/// J: [31:24] opcode  [23:0]  target24
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Format {
    A,
    L,
    J,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AluOp {
    Add,
    Sub,
    Mul,
    Div,
    And,
    Or,
    Xor,
    Shl,
    Shr,
    Sra,
    Rol,
    Ror,
}

impl AluOp {
    pub const ALL: [AluOp; 12] = [
        AluOp::Add,
        AluOp::Sub,
        AluOp::Mul,
        AluOp::Div,
        AluOp::And,
        AluOp::Or,
        AluOp::Xor,
        AluOp::Shl,
        AluOp::Shr,
        AluOp::Sra,
        AluOp::Rol,
        AluOp::Ror,
    ];

    pub fn is_shift(self) -> bool {
        matches!(
            self,
            AluOp::Shl | AluOp::Shr | AluOp::Sra | AluOp::Rol | AluOp::Ror
        )
    }

    /// Immediate forms of arithmetic ops sign-extend their imm16; logical and
    /// shift forms zero-extend.
    pub fn sign_extends_immediate(self) -> bool {
        matches!(self, AluOp::Add | AluOp::Sub | AluOp::Mul | AluOp::Div)
    }

    /// Evaluate the operation on 32-bit words.
    ///
    /// Division is signed; division by zero yields all ones and
    /// `i32::MIN / -1` wraps. Shift amounts use the low five bits.
    pub fn apply(self, a: u32, b: u32) -> u32 {
        let sh = b & 31;
        match self {
            AluOp::Add => a.wrapping_add(b),
            AluOp::Sub => a.wrapping_sub(b),
            AluOp::Mul => a.wrapping_mul(b),
            AluOp::Div => {
                if b == 0 {
                    u32::MAX
                } else {
                    (a as i32).wrapping_div(b as i32) as u32
                }
            }
            AluOp::And => a & b,
            AluOp::Or => a | b,
            AluOp::Xor => a ^ b,
            AluOp::Shl => a << sh,
            AluOp::Shr => a >> sh,
            AluOp::Sra => ((a as i32) >> sh) as u32,
            AluOp::Rol => a.rotate_left(sh),
            AluOp::Ror => a.rotate_right(sh),
        }
    }

    pub(crate) fn name(self) -> &'static str {
        match self {
            AluOp::Add => "ADD",
            AluOp::Sub => "SUB",
            AluOp::Mul => "MUL",
            AluOp::Div => "DIV",
            AluOp::And => "AND",
            AluOp::Or => "OR",
            AluOp::Xor => "XOR",
            AluOp::Shl => "SHL",
            AluOp::Shr => "SHR",
            AluOp::Sra => "SRA",
            AluOp::Rol => "ROL",
            AluOp::Ror => "ROR",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Cond {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    Always,
}

impl Cond {
    pub const ALL: [Cond; 7] = [
        Cond::Eq,
        Cond::Ne,
        Cond::Lt,
        Cond::Gt,
        Cond::Le,
        Cond::Ge,
        Cond::Always,
    ];

    /// Evaluate against the status word flags.
    pub fn holds(self, zero: bool, negative: bool) -> bool {
        match self {
            Cond::Eq => zero,
            Cond::Ne => !zero,
            Cond::Lt => negative,
            Cond::Gt => !negative && !zero,
            Cond::Le => negative || zero,
            Cond::Ge => !negative,
            Cond::Always => true,
        }
    }

    pub(crate) fn name(self) -> &'static str {
        match self {
            Cond::Eq => "EQ",
            Cond::Ne => "NE",
            Cond::Lt => "LT",
            Cond::Gt => "GT",
            Cond::Le => "LE",
            Cond::Ge => "GE",
            Cond::Always => "ALWAYS",
        }
    }
}

/// The fixed vocabulary of instruction semantics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MicroOp {
    /// `ra <- rb op rc`
    Alu3(AluOp),
    /// `ra <- rb op ext(imm16)`
    AluI(AluOp),
    /// `ra <- rb + zext(imm16)`
    Ldi,
    Load,
    Store,
    /// Set SW flags from a signed comparison of ra and rb.
    Cmp,
    /// PC-relative branch on SW flags; offset is from the next instruction.
    Branch(Cond),
    Jmp,
    /// Call: LR <- return address, PC <- target24.
    Jsub,
    Ret,
    Iret,
    Nop,
}

impl MicroOp {
    /// Datapath units an instruction with these semantics needs.
    pub fn required_units(self) -> BTreeSet<Unit> {
        let mut units = BTreeSet::from([Unit::Core]);
        if let MicroOp::Alu3(op) | MicroOp::AluI(op) = self {
            match op {
                AluOp::Mul => {
                    units.insert(Unit::Mul);
                }
                AluOp::Div => {
                    units.insert(Unit::Div);
                }
                op if op.is_shift() => {
                    units.insert(Unit::Shift);
                }
                _ => {}
            }
        }
        units
    }

    /// Every member of the vocabulary.
    pub fn all() -> Vec<MicroOp> {
        let mut v = Vec::new();
        v.extend(AluOp::ALL.iter().map(|&op| MicroOp::Alu3(op)));
        v.extend(AluOp::ALL.iter().map(|&op| MicroOp::AluI(op)));
        v.extend([MicroOp::Ldi, MicroOp::Load, MicroOp::Store, MicroOp::Cmp]);
        v.extend(Cond::ALL.iter().map(|&c| MicroOp::Branch(c)));
        v.extend([
            MicroOp::Jmp,
            MicroOp::Jsub,
            MicroOp::Ret,
            MicroOp::Iret,
            MicroOp::Nop,
        ]);
        v
    }
}

impl fmt::Display for MicroOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MicroOp::Alu3(op) => write!(f, "ALU3({})", op.name()),
            MicroOp::AluI(op) => write!(f, "ALUI({})", op.name()),
            MicroOp::Ldi => f.write_str("LDI"),
            MicroOp::Load => f.write_str("LOAD"),
            MicroOp::Store => f.write_str("STORE"),
            MicroOp::Cmp => f.write_str("CMP"),
            MicroOp::Branch(c) => write!(f, "BRANCH({})", c.name()),
            MicroOp::Jmp => f.write_str("JMP"),
            MicroOp::Jsub => f.write_str("JSUB"),
            MicroOp::Ret => f.write_str("RET"),
            MicroOp::Iret => f.write_str("IRET"),
            MicroOp::Nop => f.write_str("NOP"),
        }
    }
}

impl FromStr for MicroOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (head, arg) = match s.find('(') {
            Some(open) if s.ends_with(')') => (&s[..open], Some(&s[open + 1..s.len() - 1])),
            Some(_) => return Err(format!("malformed micro-op `{s}`")),
            None => (s, None),
        };
        let alu = |arg: Option<&str>| -> Result<AluOp, String> {
            let arg = arg.ok_or_else(|| format!("`{head}` needs an operation argument"))?;
            AluOp::ALL
                .iter()
                .copied()
                .find(|op| op.name() == arg)
                .ok_or_else(|| format!("unknown ALU operation `{arg}`"))
        };
        let bare = |op: MicroOp| -> Result<MicroOp, String> {
            match arg {
                None => Ok(op),
                Some(_) => Err(format!("`{head}` takes no argument")),
            }
        };
        match head {
            "ALU3" => Ok(MicroOp::Alu3(alu(arg)?)),
            "ALUI" => Ok(MicroOp::AluI(alu(arg)?)),
            "BRANCH" => {
                let arg = arg.ok_or("`BRANCH` needs a condition argument")?;
                Cond::ALL
                    .iter()
                    .copied()
                    .find(|c| c.name() == arg)
                    .map(MicroOp::Branch)
                    .ok_or_else(|| format!("unknown branch condition `{arg}`"))
            }
            "LDI" => bare(MicroOp::Ldi),
            "LOAD" => bare(MicroOp::Load),
            "STORE" => bare(MicroOp::Store),
            "CMP" => bare(MicroOp::Cmp),
            "JMP" => bare(MicroOp::Jmp),
            "JSUB" => bare(MicroOp::Jsub),
            "RET" => bare(MicroOp::Ret),
            "IRET" => bare(MicroOp::Iret),
            "NOP" => bare(MicroOp::Nop),
            _ => Err(format!("unknown micro-op `{s}`")),
        }
    }
}

/// Datapath unit tags used for hardware generation and resource estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Unit {
    Core,
    Shift,
    Mul,
    Div,
}

impl Unit {
    pub const ALL: [Unit; 4] = [Unit::Core, Unit::Shift, Unit::Mul, Unit::Div];
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unit::Core => "CORE",
            Unit::Shift => "SHIFT",
            Unit::Mul => "MUL",
            Unit::Div => "DIV",
        })
    }
}

impl FromStr for Unit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Unit::ALL
            .iter()
            .copied()
            .find(|u| u.to_string() == s)
            .ok_or_else(|| format!("unknown datapath unit `{s}`"))
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::A => "A",
            Format::L => "L",
            Format::J => "J",
        })
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" => Ok(Format::A),
            "L" => Ok(Format::L),
            "J" => Ok(Format::J),
            _ => Err(format!("unknown format `{s}` (expected A, L or J)")),
        }
    }
}

/// What an assembly operand binds to in the instruction word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OperandRole {
    Ra,
    Rb,
    Rc,
    Imm16,
    /// `imm16(rb)`: a base register plus unsigned offset, bound to both the
    /// rb and imm16 fields.
    Mem,
    Target24,
}

impl OperandRole {
    pub fn is_register(self) -> bool {
        matches!(self, OperandRole::Ra | OperandRole::Rb | OperandRole::Rc)
    }
}

impl fmt::Display for OperandRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperandRole::Ra => "ra",
            OperandRole::Rb => "rb",
            OperandRole::Rc => "rc",
            OperandRole::Imm16 => "imm16",
            OperandRole::Mem => "imm16(rb)",
            OperandRole::Target24 => "target24",
        })
    }
}

impl FromStr for OperandRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ra" => Ok(OperandRole::Ra),
            "rb" => Ok(OperandRole::Rb),
            "rc" => Ok(OperandRole::Rc),
            "imm16" => Ok(OperandRole::Imm16),
            "imm16(rb)" => Ok(OperandRole::Mem),
            "target24" => Ok(OperandRole::Target24),
            _ => Err(format!("unknown operand role `{s}`")),
        }
    }
}

/// A bound operand value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operand {
    Reg(u8),
    /// imm16 or target24, already truncated to field width by the caller.
    Imm(u32),
    Mem {
        offset: u16,
        base: u8,
    },
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Reg(r) => write!(f, "R{r}"),
            Operand::Imm(v) => write!(f, "{v:#x}"),
            Operand::Mem { offset, base } => write!(f, "{offset:#x}(R{base})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionDef {
    pub mnemonic: String,
    pub opcode: u8,
    pub format: Format,
    pub operands: Vec<OperandRole>,
    pub semantics: MicroOp,
    pub units: BTreeSet<Unit>,
}

impl InstructionDef {
    pub fn new(
        mnemonic: &str,
        opcode: u8,
        format: Format,
        operands: &[OperandRole],
        semantics: MicroOp,
    ) -> Self {
        InstructionDef {
            mnemonic: mnemonic.to_string(),
            opcode,
            format,
            operands: operands.to_vec(),
            semantics,
            units: semantics.required_units(),
        }
    }

    pub fn operand_pattern(&self) -> String {
        if self.operands.is_empty() {
            "-".to_string()
        } else {
            self.operands
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(",")
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegRole {
    Zero,
    General,
    Sw,
    Sp,
    Lr,
    Pc,
    Ir,
}

impl RegRole {
    /// The architectural role of register `index`.
    pub fn expected(index: usize) -> Option<RegRole> {
        Some(match index {
            0 => RegRole::Zero,
            1..=11 => RegRole::General,
            12 => RegRole::Sw,
            13 => RegRole::Sp,
            14 => RegRole::Lr,
            15 => RegRole::Pc,
            16 => RegRole::Ir,
            _ => return None,
        })
    }
}

impl fmt::Display for RegRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegRole::Zero => "zero",
            RegRole::General => "general",
            RegRole::Sw => "sw",
            RegRole::Sp => "sp",
            RegRole::Lr => "lr",
            RegRole::Pc => "pc",
            RegRole::Ir => "ir",
        })
    }
}

impl FromStr for RegRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero" => Ok(RegRole::Zero),
            "general" => Ok(RegRole::General),
            "sw" => Ok(RegRole::Sw),
            "sp" => Ok(RegRole::Sp),
            "lr" => Ok(RegRole::Lr),
            "pc" => Ok(RegRole::Pc),
            "ir" => Ok(RegRole::Ir),
            _ => Err(format!("unknown register role `{s}`")),
        }
    }
}

/// A full or reduced instruction set.
///
/// Instructions are kept sorted by opcode so that structural equality does
/// not depend on declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsaConfig {
    pub name: String,
    pub register_roles: BTreeMap<u8, RegRole>,
    pub instructions: Vec<InstructionDef>,
    /// Mnemonics that reduction never removes.
    pub required_core: BTreeSet<String>,
}

impl IsaConfig {
    /// An instruction-less config with the standard register file.
    pub fn empty(name: &str) -> Self {
        IsaConfig {
            name: name.to_string(),
            register_roles: standard_register_roles(),
            instructions: Vec::new(),
            required_core: BTreeSet::new(),
        }
    }

    /// The shipped 36-instruction configuration.
    pub fn default_config() -> Self {
        parse_isa_config(DEFAULT_ISA).expect("shipped default.isa is valid")
    }

    /// Text of the shipped default configuration.
    pub fn default_text() -> &'static str {
        DEFAULT_ISA
    }

    pub fn word_bits(&self) -> u32 {
        WORD_BITS
    }

    pub fn register_count(&self) -> usize {
        self.register_roles.len()
    }

    pub fn sort_instructions(&mut self) {
        self.instructions.sort_by_key(|d| d.opcode);
    }

    pub fn instruction(&self, mnemonic: &str) -> Option<&InstructionDef> {
        self.instructions.iter().find(|d| d.mnemonic == mnemonic)
    }

    pub fn by_opcode(&self, opcode: u8) -> Option<&InstructionDef> {
        self.instructions.iter().find(|d| d.opcode == opcode)
    }

    pub fn contains(&self, mnemonic: &str) -> bool {
        self.instruction(mnemonic).is_some()
    }

    pub fn mnemonics(&self) -> BTreeSet<String> {
        self.instructions
            .iter()
            .map(|d| d.mnemonic.clone())
            .collect()
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(serialize_isa_config(self).as_bytes()))
    }
}

pub fn standard_register_roles() -> BTreeMap<u8, RegRole> {
    (0..REGISTER_COUNT)
        .map(|i| (i as u8, RegRole::expected(i).unwrap()))
        .collect()
}
