//! One-shot functional interpreter for branch-free programs, written
//! directly from the instruction semantics rather than from the simulator.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

const ALU3: [&str; 11] = [
    "ADD", "SUB", "MUL", "DIV", "AND", "OR", "XOR", "ROL", "ROR", "SHL", "SHR",
];
const ALUI: [&str; 7] = ["ADDI", "ANDI", "ORI", "XORI", "SHLI", "SHRI", "SRAI"];
pub const SCRATCH: u32 = 0x1000;

#[derive(Debug, Clone)]
pub enum Insn {
    Alu3(&'static str, usize, usize, usize),
    AluI(&'static str, usize, usize, i64),
    Mov(usize, usize),
    Ldi(usize, u32),
    Cmp(usize, usize),
    Ld(usize, u32),
    St(usize, u32),
}

impl Insn {
    pub fn text(&self) -> String {
        match self {
            Insn::Alu3(m, a, b, c) => format!("{m} R{a}, R{b}, R{c}"),
            Insn::AluI(m, a, b, i) => format!("{m} R{a}, R{b}, {i}"),
            Insn::Mov(a, b) => format!("MOV R{a}, R{b}"),
            Insn::Ldi(a, i) => format!("LDI R{a}, {i:#x}"),
            Insn::Cmp(a, b) => format!("CMP R{a}, R{b}"),
            Insn::Ld(a, addr) => format!("LD R{a}, {addr:#x}"),
            Insn::St(a, addr) => format!("ST R{a}, {addr:#x}(R0)"),
        }
    }
}

// R15 is left out so every program stays branch-free.
fn reg(rng: &mut ChaCha8Rng) -> usize {
    rng.gen_range(0..15)
}

pub fn random_insn(rng: &mut ChaCha8Rng) -> Insn {
    match rng.gen_range(0..10) {
        0..=3 => Insn::Alu3(
            ALU3[rng.gen_range(0..ALU3.len())],
            reg(rng),
            reg(rng),
            reg(rng),
        ),
        4..=5 => {
            let m = ALUI[rng.gen_range(0..ALUI.len())];
            let imm = if m == "ADDI" {
                rng.gen_range(-32768..=32767)
            } else {
                rng.gen_range(0..=0xFFFF)
            };
            Insn::AluI(m, reg(rng), reg(rng), imm)
        }
        6 => Insn::Ldi(reg(rng), rng.gen_range(0..=0xFFFF)),
        7 => {
            if rng.gen_bool(0.5) {
                Insn::Mov(reg(rng), reg(rng))
            } else {
                Insn::Cmp(reg(rng), reg(rng))
            }
        }
        8 => Insn::Ld(reg(rng), SCRATCH + 4 * rng.gen_range(0..8)),
        _ => Insn::St(reg(rng), SCRATCH + 4 * rng.gen_range(0..8)),
    }
}

// Bit by bit on purpose, to stay independent of the simulator.
#[allow(clippy::manual_rotate)]
fn rotl(mut v: u32, n: u32) -> u32 {
    for _ in 0..n {
        v = (v << 1) | (v >> 31);
    }
    v
}

fn alu(m: &str, a: u32, b: u32) -> u32 {
    let (sa, sb) = (a as i32 as i64, b as i32 as i64);
    let n = b % 32;
    match m {
        "ADD" | "ADDI" => (a as u64 + b as u64) as u32,
        "SUB" => (a as u64).wrapping_sub(b as u64) as u32,
        "MUL" => (a as u64 * b as u64) as u32,
        "DIV" => {
            if b == 0 {
                0xFFFF_FFFF
            } else {
                (sa / sb) as u32
            }
        }
        "AND" | "ANDI" => a & b,
        "OR" | "ORI" => a | b,
        "XOR" | "XORI" => a ^ b,
        "ROL" => rotl(a, n),
        "ROR" => rotl(a, (32 - n) % 32),
        "SHL" | "SHLI" => ((a as u64) << n) as u32,
        "SHR" | "SHRI" => ((a as u64) >> n) as u32,
        "SRAI" => (sa >> n) as u32,
        _ => unreachable!("{m}"),
    }
}

pub struct Oracle {
    pub r: [u32; 16],
    pub mem: BTreeMap<u32, u32>,
}

impl Oracle {
    fn set(&mut self, i: usize, v: u32) {
        if i != 0 {
            self.r[i] = v;
        }
    }

    pub fn run(program: &[Insn]) -> Oracle {
        let mut o = Oracle {
            r: [0; 16],
            mem: BTreeMap::new(),
        };
        for insn in program {
            match *insn {
                Insn::Alu3(m, a, b, c) => {
                    let v = alu(m, o.r[b], o.r[c]);
                    o.set(a, v);
                }
                Insn::AluI(m, a, b, imm) => {
                    // ADDI sign-extends; the rest take the raw 16 bits.
                    let operand = if m == "ADDI" {
                        imm as i32 as u32
                    } else {
                        imm as u32 & 0xFFFF
                    };
                    let v = alu(m, o.r[b], operand);
                    o.set(a, v);
                }
                Insn::Mov(a, b) => o.set(a, o.r[b]),
                Insn::Ldi(a, i) => o.set(a, i),
                Insn::Cmp(a, b) => {
                    let (x, y) = (o.r[a], o.r[b]);
                    let mut sw = o.r[12] & !3;
                    if x == y {
                        sw |= 1;
                    }
                    if (x as i32) < (y as i32) {
                        sw |= 2;
                    }
                    o.r[12] = sw;
                }
                Insn::Ld(a, addr) => {
                    let v = o.mem.get(&addr).copied().unwrap_or(0);
                    o.set(a, v);
                }
                Insn::St(a, addr) => {
                    o.mem.insert(addr, o.r[a]);
                }
            }
        }
        o
    }
}
