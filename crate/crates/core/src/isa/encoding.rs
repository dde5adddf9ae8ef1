use thiserror::Error;

use super::{InstructionDef, IsaConfig, Operand, OperandRole, MAX_ENCODABLE_REG};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("{mnemonic} takes {expected} operand(s), got {found}")]
    Arity {
        mnemonic: String,
        expected: usize,
        found: usize,
    },
    #[error("{mnemonic} operand {index} must be {role}, got {found}")]
    KindMismatch {
        mnemonic: String,
        index: usize,
        role: OperandRole,
        found: Operand,
    },
    #[error("register R{0} cannot be encoded (R0..R{max})", max = MAX_ENCODABLE_REG)]
    RegisterOutOfRange(u8),
    #[error("value {value:#x} does not fit a {bits}-bit field")]
    ImmediateOutOfRange { value: u32, bits: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("illegal instruction {word:#010x}: opcode {opcode:#04x} is not defined")]
    UnknownOpcode { word: u32, opcode: u8 },
    #[error("illegal instruction {word:#010x}: reserved bits set for {mnemonic}")]
    ReservedBits { word: u32, mnemonic: String },
}

/// Raw field view of an instruction word, independent of format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fields {
    pub opcode: u8,
    pub ra: u8,
    pub rb: u8,
    pub rc: u8,
    pub imm16: u16,
    pub target24: u32,
}

impl Fields {
    pub fn split(word: u32) -> Self {
        Fields {
            opcode: (word >> 24) as u8,
            ra: ((word >> 20) & 0xF) as u8,
            rb: ((word >> 16) & 0xF) as u8,
            rc: ((word >> 12) & 0xF) as u8,
            imm16: word as u16,
            target24: word & 0x00FF_FFFF,
        }
    }
}

const RA_MASK: u32 = 0x00F0_0000;
const RB_MASK: u32 = 0x000F_0000;
const RC_MASK: u32 = 0x0000_F000;
const IMM16_MASK: u32 = 0x0000_FFFF;
const TARGET24_MASK: u32 = 0x00FF_FFFF;

fn role_mask(role: OperandRole) -> u32 {
    match role {
        OperandRole::Ra => RA_MASK,
        OperandRole::Rb => RB_MASK,
        OperandRole::Rc => RC_MASK,
        OperandRole::Imm16 => IMM16_MASK,
        OperandRole::Mem => RB_MASK | IMM16_MASK,
        OperandRole::Target24 => TARGET24_MASK,
    }
}

/// Bits an instruction's operands do not own; they must be zero.
pub(crate) fn reserved_mask(def: &InstructionDef) -> u32 {
    let used = def
        .operands
        .iter()
        .fold(0xFF00_0000, |acc, &r| acc | role_mask(r));
    !used
}

fn reg_field(r: u8, shift: u32) -> Result<u32, EncodeError> {
    if r > MAX_ENCODABLE_REG {
        return Err(EncodeError::RegisterOutOfRange(r));
    }
    Ok((r as u32) << shift)
}

fn imm_field(value: u32, bits: u32) -> Result<u32, EncodeError> {
    if value >> bits != 0 {
        return Err(EncodeError::ImmediateOutOfRange { value, bits });
    }
    Ok(value)
}

/// Assemble one instruction word from bound operand values.
pub fn encode(def: &InstructionDef, operands: &[Operand]) -> Result<u32, EncodeError> {
    if operands.len() != def.operands.len() {
        return Err(EncodeError::Arity {
            mnemonic: def.mnemonic.clone(),
            expected: def.operands.len(),
            found: operands.len(),
        });
    }
    let mut word = (def.opcode as u32) << 24;
    for (index, (&role, &value)) in def.operands.iter().zip(operands).enumerate() {
        let bits = match (role, value) {
            (OperandRole::Ra, Operand::Reg(r)) => reg_field(r, 20)?,
            (OperandRole::Rb, Operand::Reg(r)) => reg_field(r, 16)?,
            (OperandRole::Rc, Operand::Reg(r)) => reg_field(r, 12)?,
            (OperandRole::Imm16, Operand::Imm(v)) => imm_field(v, 16)?,
            (OperandRole::Target24, Operand::Imm(v)) => imm_field(v, 24)?,
            (OperandRole::Mem, Operand::Mem { offset, base }) => {
                reg_field(base, 16)? | offset as u32
            }
            (role, found) => {
                return Err(EncodeError::KindMismatch {
                    mnemonic: def.mnemonic.clone(),
                    index,
                    role,
                    found,
                })
            }
        };
        word |= bits;
    }
    Ok(word)
}

/// Opcode-indexed lookup over a config, for hot decode paths.
#[derive(Debug, Clone)]
pub struct OpcodeTable {
    slots: Box<[Option<(u16, u32)>; 256]>,
}

impl OpcodeTable {
    pub fn new(cfg: &IsaConfig) -> Self {
        let mut slots = Box::new([None; 256]);
        for (i, def) in cfg.instructions.iter().enumerate() {
            slots[def.opcode as usize] = Some((i as u16, reserved_mask(def)));
        }
        OpcodeTable { slots }
    }

    /// Index into `cfg.instructions` of the instruction encoded by `word`.
    pub fn lookup(&self, cfg: &IsaConfig, word: u32) -> Result<usize, DecodeError> {
        let opcode = (word >> 24) as u8;
        match self.slots[opcode as usize] {
            None => Err(DecodeError::UnknownOpcode { word, opcode }),
            Some((idx, reserved)) => {
                if word & reserved != 0 {
                    Err(DecodeError::ReservedBits {
                        word,
                        mnemonic: cfg.instructions[idx as usize].mnemonic.clone(),
                    })
                } else {
                    Ok(idx as usize)
                }
            }
        }
    }
}

/// Decode a word under `cfg`. Words with bits set outside the instruction's
/// operand fields are rejected so that decoding stays the inverse of
/// [`encode`].
pub fn decode(cfg: &IsaConfig, word: u32) -> Result<(&InstructionDef, Vec<Operand>), DecodeError> {
    let opcode = (word >> 24) as u8;
    let def = cfg
        .by_opcode(opcode)
        .ok_or(DecodeError::UnknownOpcode { word, opcode })?;
    if word & reserved_mask(def) != 0 {
        return Err(DecodeError::ReservedBits {
            word,
            mnemonic: def.mnemonic.clone(),
        });
    }
    let f = Fields::split(word);
    let operands = def
        .operands
        .iter()
        .map(|role| match role {
            OperandRole::Ra => Operand::Reg(f.ra),
            OperandRole::Rb => Operand::Reg(f.rb),
            OperandRole::Rc => Operand::Reg(f.rc),
            OperandRole::Imm16 => Operand::Imm(f.imm16 as u32),
            OperandRole::Target24 => Operand::Imm(f.target24),
            OperandRole::Mem => Operand::Mem {
                offset: f.imm16,
                base: f.rb,
            },
        })
        .collect();
    Ok((def, operands))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> IsaConfig {
        IsaConfig::default_config()
    }

    #[test]
    fn golden_words() {
        let cfg = cfg();
        let ldi = cfg.instruction("LDI").unwrap();
        let add = cfg.instruction("ADD").unwrap();
        let st = cfg.instruction("ST").unwrap();
        assert_eq!(
            encode(ldi, &[Operand::Reg(4), Operand::Imm(0x04)]).unwrap(),
            0x0840_0004
        );
        assert_eq!(
            encode(ldi, &[Operand::Reg(5), Operand::Imm(0x08)]).unwrap(),
            0x0850_0008
        );
        assert_eq!(
            encode(add, &[Operand::Reg(8), Operand::Reg(5), Operand::Reg(4)]).unwrap(),
            0x1385_4000
        );
        assert_eq!(
            encode(
                st,
                &[
                    Operand::Reg(8),
                    Operand::Mem {
                        offset: 0x80,
                        base: 0
                    }
                ]
            )
            .unwrap(),
            0x0180_0080
        );
    }

    #[test]
    fn golden_decodes() {
        let cfg = cfg();
        let (def, ops) = decode(&cfg, 0x1385_4000).unwrap();
        assert_eq!(def.mnemonic, "ADD");
        assert_eq!(ops, vec![Operand::Reg(8), Operand::Reg(5), Operand::Reg(4)]);
        let (def, ops) = decode(&cfg, 0x0840_0004).unwrap();
        assert_eq!(def.mnemonic, "LDI");
        assert_eq!(ops, vec![Operand::Reg(4), Operand::Imm(4)]);
    }

    #[test]
    fn encode_errors() {
        let cfg = cfg();
        let ldi = cfg.instruction("LDI").unwrap();
        assert!(matches!(
            encode(ldi, &[Operand::Reg(4)]),
            Err(EncodeError::Arity {
                expected: 2,
                found: 1,
                ..
            })
        ));
        assert_eq!(
            encode(ldi, &[Operand::Reg(16), Operand::Imm(0)]),
            Err(EncodeError::RegisterOutOfRange(16))
        );
        assert_eq!(
            encode(ldi, &[Operand::Reg(1), Operand::Imm(0x12345)]),
            Err(EncodeError::ImmediateOutOfRange {
                value: 0x12345,
                bits: 16
            })
        );
        assert!(matches!(
            encode(ldi, &[Operand::Imm(1), Operand::Imm(0)]),
            Err(EncodeError::KindMismatch { index: 0, .. })
        ));
        let jmp = cfg.instruction("JMP").unwrap();
        assert!(encode(jmp, &[Operand::Imm(0xFF_FFFF)]).is_ok());
        assert!(encode(jmp, &[Operand::Imm(0x100_0000)]).is_err());
    }

    #[test]
    fn decode_errors() {
        let cfg = cfg();
        assert_eq!(
            decode(&cfg, 0xFF00_0000).unwrap_err(),
            DecodeError::UnknownOpcode {
                word: 0xFF00_0000,
                opcode: 0xFF
            }
        );
        // A-format with bits[11:0] set.
        assert!(matches!(
            decode(&cfg, 0x1385_4001),
            Err(DecodeError::ReservedBits { .. })
        ));
        let table = OpcodeTable::new(&cfg);
        assert!(table.lookup(&cfg, 0x1385_4001).is_err());
        assert_eq!(
            cfg.instructions[table.lookup(&cfg, 0x1385_4000).unwrap()].mnemonic,
            "ADD"
        );
    }

    #[test]
    fn removed_opcode_is_unknown() {
        let mut cfg = cfg();
        cfg.instructions.retain(|d| d.mnemonic != "SUB");
        assert!(matches!(
            decode(&cfg, 0x1412_3000),
            Err(DecodeError::UnknownOpcode { opcode: 0x14, .. })
        ));
    }

    #[test]
    fn field_layout() {
        let f = Fields::split(0x1385_4000);
        assert_eq!(
            (f.opcode, f.ra, f.rb, f.rc, f.imm16),
            (0x13, 8, 5, 4, 0x4000)
        );
        let f = Fields::split(0x2612_3456);
        assert_eq!(f.target24, 0x12_3456);
    }
}
