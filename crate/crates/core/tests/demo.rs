use risa::asm::assemble;
use risa::demo::{
    demo_source, generate_pixel_stream, payload, run_demo, run_demo_with, DemoParams, DEMO_SOURCE,
};
use risa::isa::IsaConfig;
use risa::reduce::{reduce, scan_program};
use risa::sim::FRAME_BYTES;

fn params(baud: u32, frames: usize) -> DemoParams {
    DemoParams {
        baud,
        frames,
        ..DemoParams::default()
    }
}

#[test]
fn five_megabaud_sits_inside_the_bracket() {
    let run = run_demo(&IsaConfig::default_config(), &params(5_000_000, 4)).unwrap();
    let r = &run.report;
    assert!(r.completed);
    assert!(r.payload_intact);
    assert_eq!(r.overflows, 0);
    assert!(r.fps >= 129.0, "{}", r.fps);
    assert!(r.fps <= 217.0, "{}", r.fps);
    // Marker bytes cost wire time too: 2306 bytes of 100 clocks per frame.
    let per_frame = 50e6 / (2306.0 * 100.0);
    assert!((r.fps - per_frame).abs() < 0.5, "{} vs {per_frame}", r.fps);
    assert_eq!(r.uart_bytes, 4 * 2306);
    assert_eq!(r.interrupts, r.uart_bytes);
    assert!(r.isr_cycles < r.wire_cycles);
}

#[test]
fn slow_link_is_wire_bound() {
    let r = run_demo(&IsaConfig::default_config(), &params(115_200, 2))
        .unwrap()
        .report;
    assert!(r.completed && r.payload_intact);
    assert_eq!(r.byte_clocks, 4341);
    assert!(r.fps <= 5.0, "{}", r.fps);
    assert!(r.fps > 4.9, "{}", r.fps);
}

#[test]
fn demo_needs_a_strict_subset() {
    let full = IsaConfig::default_config();
    let src = demo_source(5_000_000);
    let risa = reduce(&full, &[scan_program(&src, &full)]).unwrap();
    assert!(risa.instructions.len() < full.instructions.len());
    for m in ["MUL", "DIV", "SUB", "JSUB", "RET"] {
        assert!(!risa.contains(m), "{m}");
    }
    let run = run_demo(&full, &params(5_000_000, 1)).unwrap();
    assert_eq!(run.report.isa_instructions, risa.instructions.len());
}

#[test]
fn full_and_reduced_cpus_behave_the_same() {
    let full = IsaConfig::default_config();
    let p = params(5_000_000, 2);
    let a = run_demo(&full, &p).unwrap();
    let b = run_demo_with(&full, &p).unwrap();
    assert_eq!(a.regs, b.regs);
    assert_eq!(a.last_frame, b.last_frame);
    assert_eq!(a.report.commit_cycles, b.report.commit_cycles);
}

#[test]
fn last_frame_is_the_last_payload() {
    let p = DemoParams {
        seed: 42,
        ..params(5_000_000, 3)
    };
    let run = run_demo(&IsaConfig::default_config(), &p).unwrap();
    let sent = payload(&generate_pixel_stream(3, 42).unwrap());
    assert_eq!(run.last_frame.unwrap(), &sent[2 * FRAME_BYTES..]);
}

#[test]
fn runs_are_deterministic() {
    let cfg = IsaConfig::default_config();
    let a = run_demo(&cfg, &params(5_000_000, 2)).unwrap().report;
    let b = run_demo(&cfg, &params(5_000_000, 2)).unwrap().report;
    assert_eq!(a, b);
}

#[test]
fn shipped_source_is_at_five_megabaud() {
    let cfg = IsaConfig::default_config();
    let words = |src: &str| assemble(&cfg, src, 0).unwrap().words;
    assert_eq!(words(&demo_source(5_000_000)), words(DEMO_SOURCE));
    assert_ne!(words(&demo_source(115_200)), words(DEMO_SOURCE));
}
