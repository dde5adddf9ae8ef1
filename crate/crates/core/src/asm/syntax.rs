//! Line-level assembly syntax.
//!
//! ```text
//! label:  MNEMONIC op1, op2, op3   ; comment
//!         .org  0x100              # also a comment
//!         .word 1, sym+4
//!         .space 16
//!         .equ  LIMIT, 0x80
//! ```

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub line_no: usize,
    pub label: Option<String>,
    pub kind: StatementKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StatementKind {
    Instruction {
        mnemonic: String,
        operands: Vec<OperandSyntax>,
    },
    Directive(Directive),
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Directive {
    Org(Expr),
    Word(Vec<Expr>),
    Space(Expr),
    Equ(String, Expr),
}

/// `symbol ± constant`, or a bare constant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub symbol: Option<String>,
    pub addend: i64,
}

impl Expr {
    pub fn constant(value: i64) -> Self {
        Expr {
            symbol: None,
            addend: value,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.symbol, self.addend) {
            (None, v) => write!(f, "{v}"),
            (Some(s), 0) => f.write_str(s),
            (Some(s), v) if v < 0 => write!(f, "{s}-{}", -v),
            (Some(s), v) => write!(f, "{s}+{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OperandSyntax {
    Reg(u8),
    Expr(Expr),
    /// `offset(Rb)`; a missing offset means zero.
    Mem {
        offset: Expr,
        base: u8,
    },
}

/// A syntax error with the offending text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError(pub String);

/// Remove a trailing `;` or `#` comment.
pub fn strip_comment(line: &str) -> &str {
    match line.find([';', '#']) {
        Some(i) => &line[..i],
        None => line,
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || c == '.'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.'
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(is_ident_start) && chars.all(is_ident_char)
}

/// Register names: `R0`..`R16` (any case) and the aliases SW, SP, LR, PC.
pub fn parse_register(s: &str) -> Option<u8> {
    let upper = s.to_ascii_uppercase();
    match upper.as_str() {
        "SW" => return Some(12),
        "SP" => return Some(13),
        "LR" => return Some(14),
        "PC" => return Some(15),
        "IR" => return Some(16),
        _ => {}
    }
    let digits = upper.strip_prefix('R')?;
    if digits.is_empty() || digits.len() > 2 || !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    // Reject leading zeros like R04 so symbol-like names stay unambiguous.
    if digits.len() == 2 && digits.starts_with('0') {
        return None;
    }
    digits.parse::<u8>().ok().filter(|&n| n <= 16)
}

pub fn parse_number(s: &str) -> Option<i64> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest.trim_start()),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let lower = body.to_ascii_lowercase();
    let magnitude = if let Some(hex) = lower.strip_prefix("0x") {
        i64::from_str_radix(hex, 16).ok()?
    } else if let Some(bin) = lower.strip_prefix("0b") {
        i64::from_str_radix(bin, 2).ok()?
    } else if !lower.is_empty() && lower.chars().all(|c| c.is_ascii_digit()) {
        lower.parse::<i64>().ok()?
    } else {
        return None;
    };
    Some(if neg { -magnitude } else { magnitude })
}

pub fn parse_expr(s: &str) -> Result<Expr, SyntaxError> {
    let s = s.trim();
    if s.is_empty() {
        return Err(SyntaxError("empty expression".into()));
    }
    if let Some(v) = parse_number(s) {
        return Ok(Expr::constant(v));
    }
    // symbol, symbol+N, symbol-N
    let split = s
        .char_indices()
        .skip(1)
        .find(|&(_, c)| c == '+' || c == '-');
    let (sym, addend) = match split {
        Some((i, sign)) => {
            let n = parse_number(s[i + 1..].trim())
                .ok_or_else(|| SyntaxError(format!("bad constant in `{s}`")))?;
            (s[..i].trim(), if sign == '-' { -n } else { n })
        }
        None => (s, 0),
    };
    if !is_identifier(sym) || parse_register(sym).is_some() {
        return Err(SyntaxError(format!("malformed operand `{s}`")));
    }
    Ok(Expr {
        symbol: Some(sym.to_string()),
        addend,
    })
}

pub fn parse_operand(s: &str) -> Result<OperandSyntax, SyntaxError> {
    let s = s.trim();
    if let Some(r) = parse_register(s) {
        return Ok(OperandSyntax::Reg(r));
    }
    if let Some(open) = s.find('(') {
        let inner = s[open + 1..]
            .strip_suffix(')')
            .ok_or_else(|| SyntaxError(format!("unbalanced parentheses in `{s}`")))?;
        let base = parse_register(inner.trim())
            .ok_or_else(|| SyntaxError(format!("`{inner}` is not a base register")))?;
        let off = s[..open].trim();
        let offset = if off.is_empty() {
            Expr::constant(0)
        } else {
            parse_expr(off)?
        };
        return Ok(OperandSyntax::Mem { offset, base });
    }
    parse_expr(s).map(OperandSyntax::Expr)
}

/// Split a comment-free line into an optional label and the remainder.
pub fn split_label(line: &str) -> Result<(Option<&str>, &str), SyntaxError> {
    let t = line.trim();
    let ident_end = t
        .char_indices()
        .find(|&(_, c)| !is_ident_char(c))
        .map_or(t.len(), |(i, _)| i);
    let after = t[ident_end..].trim_start();
    if ident_end > 0 && after.starts_with(':') {
        let label = &t[..ident_end];
        if !is_identifier(label) {
            return Err(SyntaxError(format!("bad label `{label}`")));
        }
        return Ok((Some(label), after[1..].trim()));
    }
    Ok((None, t))
}

/// Split the statement body into head token and comma-separated operands.
pub fn split_head(body: &str) -> (&str, Vec<&str>) {
    let body = body.trim();
    let (head, rest) = match body.find(char::is_whitespace) {
        Some(i) => (&body[..i], body[i..].trim()),
        None => (body, ""),
    };
    let ops = if rest.is_empty() {
        Vec::new()
    } else {
        rest.split(',').map(str::trim).collect()
    };
    (head, ops)
}

pub fn parse_line(line_no: usize, line: &str) -> Result<Statement, SyntaxError> {
    let code = strip_comment(line);
    let (label, body) = split_label(code)?;
    let label = label.map(str::to_string);
    if body.is_empty() {
        return Ok(Statement {
            line_no,
            label,
            kind: StatementKind::Empty,
        });
    }
    let (head, ops) = split_head(body);
    let kind = if let Some(dir) = head.strip_prefix('.') {
        let want = |n: usize| {
            if ops.len() == n {
                Ok(())
            } else {
                Err(SyntaxError(format!(
                    ".{dir} takes {n} operand(s), got {}",
                    ops.len()
                )))
            }
        };
        let directive = match dir.to_ascii_lowercase().as_str() {
            "org" => {
                want(1)?;
                Directive::Org(parse_expr(ops[0])?)
            }
            "space" => {
                want(1)?;
                Directive::Space(parse_expr(ops[0])?)
            }
            "word" => {
                if ops.is_empty() {
                    return Err(SyntaxError(".word needs at least one value".into()));
                }
                Directive::Word(
                    ops.iter()
                        .map(|o| parse_expr(o))
                        .collect::<Result<_, _>>()?,
                )
            }
            "equ" => {
                want(2)?;
                if !is_identifier(ops[0]) || parse_register(ops[0]).is_some() {
                    return Err(SyntaxError(format!("bad .equ name `{}`", ops[0])));
                }
                Directive::Equ(ops[0].to_string(), parse_expr(ops[1])?)
            }
            other => return Err(SyntaxError(format!("unknown directive `.{other}`"))),
        };
        StatementKind::Directive(directive)
    } else {
        if !is_identifier(head) {
            return Err(SyntaxError(format!("malformed mnemonic `{head}`")));
        }
        StatementKind::Instruction {
            mnemonic: head.to_ascii_uppercase(),
            operands: ops
                .iter()
                .map(|o| parse_operand(o))
                .collect::<Result<_, _>>()?,
        }
    };
    Ok(Statement {
        line_no,
        label,
        kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registers() {
        assert_eq!(parse_register("R0"), Some(0));
        assert_eq!(parse_register("r16"), Some(16));
        assert_eq!(parse_register("R17"), None);
        assert_eq!(parse_register("R04"), None);
        assert_eq!(parse_register("lr"), Some(14));
        assert_eq!(parse_register("Rx"), None);
    }

    #[test]
    fn numbers() {
        assert_eq!(parse_number("0x80"), Some(0x80));
        assert_eq!(parse_number("0X1F"), Some(0x1F));
        assert_eq!(parse_number("-12"), Some(-12));
        assert_eq!(parse_number("0b101"), Some(5));
        assert_eq!(parse_number("12a"), None);
        assert_eq!(parse_number(""), None);
    }

    #[test]
    fn expressions() {
        assert_eq!(parse_expr("loop").unwrap().symbol.as_deref(), Some("loop"));
        let e = parse_expr("buf + 0x10").unwrap();
        assert_eq!((e.symbol.as_deref(), e.addend), (Some("buf"), 16));
        let e = parse_expr("buf-4").unwrap();
        assert_eq!(e.addend, -4);
        assert!(parse_expr("R4").is_err());
        assert!(parse_expr("a+b").is_err());
        assert!(parse_expr("4x").is_err());
    }

    #[test]
    fn memory_operands() {
        assert_eq!(
            parse_operand("0x80(R2)").unwrap(),
            OperandSyntax::Mem {
                offset: Expr::constant(0x80),
                base: 2
            }
        );
        assert_eq!(
            parse_operand("(r3)").unwrap(),
            OperandSyntax::Mem {
                offset: Expr::constant(0),
                base: 3
            }
        );
        assert!(parse_operand("4(R2").is_err());
        assert!(parse_operand("4(x)").is_err());
    }

    #[test]
    fn whole_lines() {
        let s = parse_line(3, "start:  LDI R4, 0x04   ; R4 = 4").unwrap();
        assert_eq!(s.label.as_deref(), Some("start"));
        assert_eq!(
            s.kind,
            StatementKind::Instruction {
                mnemonic: "LDI".into(),
                operands: vec![
                    OperandSyntax::Reg(4),
                    OperandSyntax::Expr(Expr::constant(4))
                ],
            }
        );
        let s = parse_line(1, "   # only a comment").unwrap();
        assert_eq!(s.kind, StatementKind::Empty);
        let s = parse_line(1, "here:").unwrap();
        assert_eq!(
            (s.label.as_deref(), &s.kind),
            (Some("here"), &StatementKind::Empty)
        );
        let s = parse_line(1, ".equ LIMIT, 0x80").unwrap();
        assert_eq!(
            s.kind,
            StatementKind::Directive(Directive::Equ("LIMIT".into(), Expr::constant(0x80)))
        );
        assert!(parse_line(1, ".bogus 1").is_err());
        assert!(parse_line(1, ".org").is_err());
        assert!(parse_line(1, "12abc R1").is_err());
        assert!(parse_line(1, "ret").is_ok());
    }
}
