use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use risa::isa::{
    decode, encode, parse_isa_config, serialize_isa_config, validate, AluOp, Cond, Format,
    InstructionDef, IsaConfig, MicroOp, Operand, OperandRole, Unit,
};

fn shapes(sem: MicroOp) -> Vec<(Format, Vec<OperandRole>)> {
    use OperandRole::*;
    match sem {
        MicroOp::Alu3(_) => vec![
            (Format::A, vec![Ra, Rb, Rc]),
            (Format::A, vec![Ra, Rb]),
            (Format::A, vec![Ra]),
        ],
        MicroOp::AluI(_) => vec![
            (Format::L, vec![Ra, Rb, Imm16]),
            (Format::L, vec![Ra, Imm16]),
        ],
        MicroOp::Ldi => vec![
            (Format::L, vec![Ra, Imm16]),
            (Format::L, vec![Ra, Rb, Imm16]),
        ],
        MicroOp::Load | MicroOp::Store => vec![
            (Format::L, vec![Ra, Mem]),
            (Format::L, vec![Ra, Imm16]),
            (Format::L, vec![Ra, Rb, Imm16]),
            (Format::A, vec![Ra, Rb, Rc]),
            (Format::A, vec![Ra, Rb]),
        ],
        MicroOp::Cmp => vec![(Format::A, vec![Ra, Rb]), (Format::A, vec![Ra, Rb, Rc])],
        MicroOp::Branch(_) => vec![(Format::L, vec![Imm16]), (Format::L, vec![Ra, Rb, Imm16])],
        MicroOp::Jmp | MicroOp::Jsub => vec![(Format::J, vec![Target24])],
        MicroOp::Ret | MicroOp::Iret | MicroOp::Nop => vec![
            (Format::J, vec![]),
            (Format::A, vec![]),
            (Format::L, vec![]),
        ],
    }
}

fn random_config(seed: u64) -> IsaConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = MicroOp::all();
    let n = rng.gen_range(0..=48);
    let mut opcodes: Vec<u8> = (0..=255).collect();
    opcodes.shuffle(&mut rng);
    let mut cfg = IsaConfig::empty(&format!("rand-{seed:x}"));
    for (i, &opcode) in opcodes.iter().take(n).enumerate() {
        let sem = *vocab.choose(&mut rng).unwrap();
        let (format, mut roles) = shapes(sem).choose(&mut rng).unwrap().clone();
        roles.shuffle(&mut rng);
        let mut def =
            InstructionDef::new(&format!("I{i}_{opcode:02X}"), opcode, format, &roles, sem);
        for unit in Unit::ALL {
            if rng.gen_bool(0.1) {
                def.units.insert(unit);
            }
        }
        cfg.instructions.push(def);
    }
    cfg.sort_instructions();
    for d in &cfg.instructions {
        if rng.gen_bool(0.2) {
            cfg.required_core.insert(d.mnemonic.clone());
        }
    }
    assert_eq!(
        validate(&cfg),
        vec![],
        "generator produced an invalid config"
    );
    cfg
}

fn random_operands(def: &InstructionDef, rng: &mut ChaCha8Rng) -> Vec<Operand> {
    def.operands
        .iter()
        .map(|role| match role {
            OperandRole::Ra | OperandRole::Rb | OperandRole::Rc => {
                Operand::Reg(rng.gen_range(0..=15))
            }
            OperandRole::Imm16 => Operand::Imm(rng.gen_range(0..=0xFFFF)),
            OperandRole::Target24 => Operand::Imm(rng.gen_range(0..=0xFF_FFFF)),
            OperandRole::Mem => Operand::Mem {
                offset: rng.gen(),
                base: rng.gen_range(0..=15),
            },
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn random_config_round_trips(seed in any::<u64>()) {
        let cfg = random_config(seed);
        let text = serialize_isa_config(&cfg);
        let back = parse_isa_config(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(serialize_isa_config(&back), text);
    }

    #[test]
    fn encode_then_decode_is_identity_on_random_configs(seed in any::<u64>()) {
        let cfg = random_config(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for def in &cfg.instructions {
            for _ in 0..4 {
                let ops = random_operands(def, &mut rng);
                let word = encode(def, &ops).unwrap();
                prop_assert_eq!((word >> 24) as u8, def.opcode);
                if def.format == Format::A {
                    prop_assert_eq!(word & 0xFFF, 0);
                }
                let (back, back_ops) = decode(&cfg, word).unwrap();
                prop_assert_eq!(back, def);
                prop_assert_eq!(back_ops, ops);
            }
        }
    }
}

#[test]
fn decode_encode_identity_ten_thousand_samples() {
    let cfg = IsaConfig::default_config();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..10_000 {
        let def = cfg.instructions.choose(&mut rng).unwrap();
        let ops = random_operands(def, &mut rng);
        let word = encode(def, &ops).unwrap();
        let (back, back_ops) = decode(&cfg, word).unwrap();
        assert_eq!(back.mnemonic, def.mnemonic);
        assert_eq!(back_ops, ops);
    }
}

#[test]
fn encode_decode_identity_on_defined_words() {
    let cfg = IsaConfig::default_config();
    let defined: BTreeSet<u8> = cfg.instructions.iter().map(|d| d.opcode).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut decoded = 0;
    for _ in 0..200_000 {
        let opcode = *defined.iter().collect::<Vec<_>>().choose(&mut rng).unwrap();
        // Bias towards sparse words so canonical encodings are common.
        let low: u32 = rng.gen::<u32>() & rng.gen::<u32>() & rng.gen::<u32>();
        let word = ((*opcode as u32) << 24) | (low & 0x00FF_FFFF);
        if let Ok((def, ops)) = decode(&cfg, word) {
            decoded += 1;
            assert_eq!(encode(def, &ops).unwrap(), word);
        }
    }
    assert!(decoded > 10_000, "only {decoded} canonical words sampled");
}

#[test]
fn pinned_opcodes() {
    let cfg = IsaConfig::default_config();
    for (m, op) in [("LDI", 0x08), ("ADD", 0x13), ("ST", 0x01)] {
        assert_eq!(cfg.instruction(m).unwrap().opcode, op);
    }
    // Everything in the vocabulary is represented at least by its template.
    let sems: BTreeSet<MicroOp> = cfg.instructions.iter().map(|d| d.semantics).collect();
    assert!(sems.contains(&MicroOp::Alu3(AluOp::Mul)));
    assert!(sems.contains(&MicroOp::Branch(Cond::Eq)));
}
