//! Hardware generation and resource estimation.

mod cost;
mod emit;
mod lint;

use std::collections::BTreeSet;

pub use cost::{estimate_resources, CostError, CostModel, ResourceEstimate, UnitCost};
pub use emit::{
    emit_cpu_hdl, sha256_hex, HdlBundle, HdlManifest, ManifestEntry, FILE_NAMES, VECTOR_BASE,
};
pub use lint::{lint_verilog, strip_comments, LintIssue};

use crate::isa::{IsaConfig, Unit};

/// Union of the units every instruction needs, always including CORE.
pub fn required_units(cfg: &IsaConfig) -> BTreeSet<Unit> {
    let mut units = BTreeSet::from([Unit::Core]);
    for d in &cfg.instructions {
        units.extend(d.units.iter().copied());
    }
    units
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::Unit;
    use crate::reduce::{reduce, scan_program};

    fn decoder_opcodes(src: &str) -> BTreeSet<u8> {
        src.lines()
            .filter_map(|l| l.trim().strip_prefix("8'h"))
            .map(|rest| u8::from_str_radix(&rest[..2], 16).unwrap())
            .collect()
    }

    fn reduced_without_mul_div() -> IsaConfig {
        let full = IsaConfig::default_config();
        let src = "LDI R4, 4\nADD R1, R2, R3\nSUB R1, R2, R3\nSHL R1, R1, R2\nST R8, 0x80\n";
        reduce(&full, &[scan_program(src, &full)]).unwrap()
    }

    #[test]
    fn units_of_default_and_empty() {
        assert_eq!(
            required_units(&IsaConfig::default_config()),
            BTreeSet::from(Unit::ALL)
        );
        assert_eq!(
            required_units(&IsaConfig::empty("e")),
            BTreeSet::from([Unit::Core])
        );
    }

    #[test]
    fn full_hdl_lints_clean() {
        let b = emit_cpu_hdl(&IsaConfig::default_config());
        let issues = lint_verilog(&b.files);
        assert!(issues.is_empty(), "{issues:?}");
    }

    #[test]
    fn reduced_hdl_lints_clean_and_has_no_mul_div() {
        let cfg = reduced_without_mul_div();
        let b = emit_cpu_hdl(&cfg);
        assert!(lint_verilog(&b.files).is_empty());
        // `@*` is a sensitivity list, not an operator.
        let alu = strip_comments(&b.files["alu.v"]).replace("@*", "@");
        assert!(!alu.contains('*') && !alu.contains('/'), "{alu}");
        let full_alu = strip_comments(&emit_cpu_hdl(&IsaConfig::default_config()).files["alu.v"]);
        assert!(full_alu.contains("a * b") && full_alu.contains(" / "));
    }

    #[test]
    fn decoder_covers_exactly_the_isa() {
        for cfg in [IsaConfig::default_config(), reduced_without_mul_div()] {
            let b = emit_cpu_hdl(&cfg);
            let want: BTreeSet<u8> = cfg.instructions.iter().map(|d| d.opcode).collect();
            assert_eq!(decoder_opcodes(&b.files["decoder.v"]), want);
        }
    }

    #[test]
    fn emission_is_deterministic_and_manifested() {
        let cfg = IsaConfig::default_config();
        let a = emit_cpu_hdl(&cfg);
        let b = emit_cpu_hdl(&cfg);
        assert_eq!(a, b);
        assert_eq!(a.manifest.isa_hash, cfg.content_hash());
        assert_eq!(a.manifest.files.len(), FILE_NAMES.len());
        for e in &a.manifest.files {
            assert_eq!(e.sha256, sha256_hex(a.files[&e.name].as_bytes()));
        }
    }

    #[test]
    fn fsm_has_four_states() {
        let b = emit_cpu_hdl(&IsaConfig::default_config());
        let ctrl = &b.files["control_unit.v"];
        for s in ["FETCH", "DECODE", "EXECUTE", "WRITEBACK"] {
            assert!(ctrl.contains(&format!("                {s}: begin")), "{s}");
        }
    }
}
