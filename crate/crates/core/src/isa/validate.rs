use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{
    Format, InstructionDef, IsaConfig, MicroOp, OperandRole, RegRole, Unit, REGISTER_COUNT,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// Instruction the problem belongs to, if any.
    pub mnemonic: Option<String>,
    /// Source line, when the config came from text.
    pub line: Option<usize>,
    pub message: String,
}

impl Diagnostic {
    fn global(message: impl Into<String>) -> Self {
        Diagnostic {
            mnemonic: None,
            line: None,
            message: message.into(),
        }
    }

    fn insn(def: &InstructionDef, message: impl Into<String>) -> Self {
        Diagnostic {
            mnemonic: Some(def.mnemonic.clone()),
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.mnemonic, self.line) {
            (Some(m), Some(l)) => write!(f, "line {l}, INSN {m}: {}", self.message),
            (Some(m), None) => write!(f, "INSN {m}: {}", self.message),
            (None, Some(l)) => write!(f, "line {l}: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

/// Check every config invariant, returning one diagnostic per violation.
pub fn validate(cfg: &IsaConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    for i in 0..REGISTER_COUNT {
        let expected = RegRole::expected(i).unwrap();
        match cfg.register_roles.get(&(i as u8)) {
            None => out.push(Diagnostic::global(format!(
                "register R{i} has no role (expected {expected})"
            ))),
            Some(&role) if role != expected => out.push(Diagnostic::global(format!(
                "register R{i} has role {role}, expected {expected}"
            ))),
            Some(_) => {}
        }
    }
    for &r in cfg.register_roles.keys() {
        if r as usize >= REGISTER_COUNT {
            out.push(Diagnostic::global(format!(
                "register R{r} is outside the {REGISTER_COUNT}-register file"
            )));
        }
    }

    let mut mnemonics: HashMap<&str, usize> = HashMap::new();
    let mut opcodes: HashMap<u8, &str> = HashMap::new();
    for def in &cfg.instructions {
        if mnemonics.insert(&def.mnemonic, 0).is_some() {
            out.push(Diagnostic::insn(def, "duplicate mnemonic"));
        }
        if let Some(other) = opcodes.insert(def.opcode, &def.mnemonic) {
            out.push(Diagnostic::insn(
                def,
                format!("opcode {:#04x} already used by {other}", def.opcode),
            ));
        }
        let well_formed = def
            .mnemonic
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_uppercase())
            && def
                .mnemonic
                .chars()
                .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_');
        if !well_formed {
            out.push(Diagnostic::insn(
                def,
                "mnemonic must be an uppercase identifier",
            ));
        }
        if let Err(msg) = check_format(def.format, &def.operands) {
            out.push(Diagnostic::insn(def, msg));
        }
        if let Err(msg) = check_semantics(def) {
            out.push(Diagnostic::insn(def, msg));
        }
        if !def.units.contains(&Unit::Core) {
            out.push(Diagnostic::insn(def, "unit set must include CORE"));
        }
        for unit in def.semantics.required_units() {
            if !def.units.contains(&unit) {
                out.push(Diagnostic::insn(
                    def,
                    format!("{} requires unit {unit}", def.semantics),
                ));
            }
        }
    }

    for m in &cfg.required_core {
        if !cfg.contains(m) {
            out.push(Diagnostic::global(format!(
                "required core mnemonic {m} is not defined"
            )));
        }
    }
    out
}

fn count(roles: &[OperandRole], role: OperandRole) -> usize {
    roles.iter().filter(|&&r| r == role).count()
}

/// Operand roles must fit the fields the format provides.
fn check_format(format: Format, roles: &[OperandRole]) -> Result<(), String> {
    use OperandRole::*;
    for role in [Ra, Rb, Rc, Imm16, Mem, Target24] {
        if count(roles, role) > 1 {
            return Err(format!("operand role {role} bound twice"));
        }
    }
    let has = |r| roles.contains(&r);
    match format {
        Format::A => {
            if let Some(r) = roles.iter().find(|r| !r.is_register()) {
                return Err(format!("A-format has no field for operand {r}"));
            }
        }
        Format::L => {
            if has(Rc) || has(Target24) {
                return Err("L-format has no rc or target24 field".into());
            }
            if has(Mem) && (has(Rb) || has(Imm16)) {
                return Err("imm16(rb) already binds the rb and imm16 fields".into());
            }
        }
        Format::J => {
            if roles.iter().any(|&r| r != Target24) {
                return Err("J-format only carries target24".into());
            }
        }
    }
    Ok(())
}

/// Each micro-op reads specific fields; the operand pattern must bind them.
fn check_semantics(def: &InstructionDef) -> Result<(), String> {
    use OperandRole::*;
    let roles = &def.operands;
    let has = |r| roles.contains(&r);
    let ok = match def.semantics {
        MicroOp::Alu3(_) => def.format == Format::A && has(Ra),
        MicroOp::AluI(_) => def.format == Format::L && has(Ra) && has(Imm16),
        MicroOp::Ldi => def.format == Format::L && has(Ra) && has(Imm16),
        MicroOp::Load | MicroOp::Store => match def.format {
            Format::L => has(Ra) && (has(Mem) || has(Imm16)),
            Format::A => has(Ra) && has(Rb),
            Format::J => false,
        },
        MicroOp::Cmp => def.format == Format::A && has(Ra) && has(Rb),
        MicroOp::Branch(_) => def.format == Format::L && has(Imm16),
        MicroOp::Jmp | MicroOp::Jsub => def.format == Format::J && has(Target24),
        MicroOp::Ret | MicroOp::Iret | MicroOp::Nop => roles.is_empty(),
    };
    if ok {
        Ok(())
    } else {
        Err(format!(
            "operands `{}` in format {} do not fit semantics {}",
            def.operand_pattern(),
            def.format,
            def.semantics
        ))
    }
}
