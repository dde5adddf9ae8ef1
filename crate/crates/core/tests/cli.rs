use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use risa::isa::{parse_isa_config, IsaConfig};
use tempfile::TempDir;

const ADD_STORE: &str = "LDI R4, 0x04\nLDI R5, 0x08\nADD R8, R5, R4\nST R8, 0x80\n";

fn risa(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_risa"))
        .args(args)
        .current_dir(dir)
        .env_remove("RISA_ISA")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn setup() -> (TempDir, PathBuf) {
    let t = TempDir::new().unwrap();
    let d = t.path().to_path_buf();
    fs::write(d.join("t1.s"), ADD_STORE).unwrap();
    fs::write(d.join("full.isa"), IsaConfig::default_text()).unwrap();
    (t, d)
}

#[test]
fn reduce_without_programs_copies_the_input() {
    let (_t, d) = setup();
    let o = risa(&d, &["reduce", "--isa", "full.isa", "-o", "out.isa"]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        fs::read(d.join("out.isa")).unwrap(),
        fs::read(d.join("full.isa")).unwrap()
    );
}

#[test]
fn reduce_add_store() {
    let (_t, d) = setup();
    let o = risa(&d, &["reduce", "--asm", "t1.s", "-o", "r.isa"]);
    assert_eq!(code(&o), 0);
    let usage: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(
        usage["used_mnemonics"],
        serde_json::json!(["ADD", "LDI", "ST"])
    );
    let cfg = parse_isa_config(&fs::read_to_string(d.join("r.isa")).unwrap()).unwrap();
    let mut want: Vec<String> = ["LDI", "ADD", "ST"].map(String::from).to_vec();
    want.extend(cfg.required_core.iter().cloned());
    want.sort();
    want.dedup();
    assert_eq!(cfg.mnemonics().into_iter().collect::<Vec<_>>(), want);
}

#[test]
fn error_classes() {
    let (_t, d) = setup();
    fs::write(d.join("bad.s"), "FROB R1\n").unwrap();
    assert_eq!(
        code(&risa(&d, &["reduce", "--asm", "bad.s", "-o", "x.isa"])),
        2
    );
    let o = risa(&d, &["reduce", "--asm", "missing.s", "-o", "x.isa"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.s"));
    assert!(o.stdout.is_empty());
    assert_eq!(code(&risa(&d, &["frobnicate"])), 1);
    assert_eq!(code(&risa(&d, &["asm"])), 1);
    assert_eq!(code(&risa(&d, &["--help"])), 0);
    fs::write(d.join("broken.isa"), "INSN\n").unwrap();
    assert_eq!(code(&risa(&d, &["dump-tables", "--isa", "broken.isa"])), 2);
}

#[test]
fn asm_outputs() {
    let (_t, d) = setup();
    let o = risa(&d, &["asm", "t1.s", "-o", "t1.bin", "--listing"]);
    assert_eq!(code(&o), 0);
    let bin = fs::read(d.join("t1.bin")).unwrap();
    let words: Vec<u32> = bin
        .chunks(4)
        .map(|c| u32::from_be_bytes(c.try_into().unwrap()))
        .collect();
    assert_eq!(words, [0x08400004, 0x08500008, 0x13854000, 0x01800080]);
    let lst = fs::read_to_string(d.join("t1.lst")).unwrap();
    assert!(lst.contains("0x0008   0x13854000  ADD R8, R5, R4"), "{lst}");
    assert_eq!(code(&risa(&d, &["asm", "t1.s", "-o", "t1.obj"])), 0);
    let obj: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("t1.obj")).unwrap()).unwrap();
    assert_eq!(obj["words"].as_array().unwrap().len(), 4);
}

#[test]
fn removed_instruction_is_rejected() {
    let (_t, d) = setup();
    risa(&d, &["reduce", "--asm", "t1.s", "-o", "r.isa"]);
    fs::write(d.join("sub.s"), "SUB R1, R2, R3\n").unwrap();
    let o = risa(&d, &["asm", "--isa", "r.isa", "sub.s", "-o", "sub.bin"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("SUB"));
    assert!(!d.join("sub.bin").exists());
}

#[test]
fn gen_cpu_full_and_reduced() {
    let (_t, d) = setup();
    assert_eq!(code(&risa(&d, &["gen-cpu", "-o", "full"])), 0);
    let dec = fs::read_to_string(d.join("full/decoder.v")).unwrap();
    assert_eq!(dec.matches(": begin //").count(), 36);
    risa(&d, &["reduce", "--asm", "t1.s", "-o", "r.isa"]);
    assert_eq!(
        code(&risa(&d, &["gen-cpu", "--isa", "r.isa", "-o", "red"])),
        0
    );
    let alu = fs::read_to_string(d.join("red/alu.v"))
        .unwrap()
        .replace("@*", "");
    assert!(!alu.contains(" * ") && !alu.contains("MUL"), "{alu}");
    assert_eq!(code(&risa(&d, &["gen-cpu", "-o", "again"])), 0);
    for f in [
        "regfile.v",
        "alu.v",
        "decoder.v",
        "control_unit.v",
        "cpu_top.v",
        "manifest.json",
    ] {
        assert_eq!(
            fs::read(d.join("full").join(f)).unwrap(),
            fs::read(d.join("again").join(f)).unwrap()
        );
    }
}

#[test]
fn estimate_with_zero_costs_is_base_only() {
    let (_t, d) = setup();
    let zero = r#"{"base_luts": 3501, "base_dsps": 0, "units": {
        "SHIFT": {"luts": 0, "dsps": 0}, "MUL": {"luts": 0, "dsps": 0}, "DIV": {"luts": 0, "dsps": 0}}}"#;
    fs::write(d.join("zero.json"), zero).unwrap();
    let o = risa(&d, &["estimate", "--costs", "zero.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(
        (v["luts"].as_u64(), v["dsps"].as_u64()),
        (Some(3501), Some(0))
    );
}

#[test]
fn sim_exit_statuses() {
    let (_t, d) = setup();
    let o = risa(&d, &["sim", "--image", "t1.s", "--peek", "0x80"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["memory"]["0x00000080"], "0x0000000C");
    assert_eq!(v["retired"], 4);

    // A MUL word under an ISA without MUL.
    risa(&d, &["reduce", "--asm", "t1.s", "-o", "r.isa"]);
    fs::write(d.join("fault.s"), "LDI R1, 1\n.word 0x15123000\n").unwrap();
    let o = risa(
        &d,
        &[
            "sim", "--isa", "r.isa", "--image", "fault.s", "--cycles", "100",
        ],
    );
    assert_eq!(code(&o), 3);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["stop"], "fault");
    assert_eq!(v["fault"]["pc"], 4);

    fs::write(
        d.join("halt.s"),
        "LDI R1, 1\nST R1, 0x4300\nspin: JMP spin\n",
    )
    .unwrap();
    let o = risa(&d, &["sim", "--image", "halt.s", "--until-halt"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("\"halted\""));
    fs::write(d.join("spin.s"), "spin: JMP spin\n").unwrap();
    let o = risa(
        &d,
        &[
            "sim",
            "--image",
            "spin.s",
            "--until-halt",
            "--cycles",
            "400",
        ],
    );
    assert_eq!(code(&o), 4);
}

#[test]
fn sim_bin_with_stimulus_and_traces() {
    let (_t, d) = setup();
    // Pin 0 stays an input; read it once the stimulus has landed.
    let src = "LDI R1, 0\nLDI R2, 0\nLDI R3, 0\nLD R4, 16388\n";
    fs::write(d.join("gpio.s"), src).unwrap();
    risa(&d, &["asm", "gpio.s", "-o", "gpio.bin"]);
    fs::write(
        d.join("stim.json"),
        r#"[{"cycle": 2, "kind": "gpio_in", "value": 1}]"#,
    )
    .unwrap();
    let args = [
        "sim",
        "--image",
        "gpio.bin",
        "--stimulus",
        "stim.json",
        "--cycles",
        "16",
    ];
    let o = risa(&d, &[&args[..], &["--trace", "t.vcd"]].concat());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["regs"][4], 1);
    assert!(fs::read_to_string(d.join("t.vcd"))
        .unwrap()
        .starts_with("$timescale"));
    let o = risa(&d, &[&args[..], &["--trace", "t.json"]].concat());
    assert_eq!(code(&o), 0);
    let t = risa::sim::read_json(&fs::read_to_string(d.join("t.json")).unwrap()).unwrap();
    assert_eq!(t.len(), 16);
}

#[test]
fn isa_from_environment() {
    let (_t, d) = setup();
    risa(&d, &["reduce", "--asm", "t1.s", "-o", "r.isa"]);
    fs::write(d.join("sub.s"), "SUB R1, R2, R3\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_risa"))
        .args(["asm", "sub.s", "-o", "sub.bin"])
        .current_dir(&d)
        .env("RISA_ISA", "r.isa")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn demo_report_and_ppm() {
    let (_t, d) = setup();
    let o = risa(&d, &["demo", "--frames", "1", "--ppm", "last.ppm"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["frames"], 1);
    assert_eq!(v["overflows"], 0);
    let ppm = fs::read(d.join("last.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n32 24\n255\n"));
    assert_eq!(code(&risa(&d, &["demo", "--frames", "0"])), 1);
}

fn trimmed(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).trim_end().to_string()
}

#[test]
fn pipeline_matches_single_commands() {
    let (_t, d) = setup();
    let o = risa(&d, &["pipeline", "--asm", "t1.s", "-o", "out"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = d.join("out");

    risa(&d, &["reduce", "--asm", "t1.s", "-o", "r.isa"]);
    assert_eq!(
        fs::read(out.join("risa.isa")).unwrap(),
        fs::read(d.join("r.isa")).unwrap()
    );
    risa(
        &d,
        &["asm", "--isa", "r.isa", "t1.s", "-o", "t1.bin", "--listing"],
    );
    assert_eq!(
        fs::read(out.join("t1.bin")).unwrap(),
        fs::read(d.join("t1.bin")).unwrap()
    );
    assert_eq!(
        fs::read(out.join("t1.lst")).unwrap(),
        fs::read(d.join("t1.lst")).unwrap()
    );
    risa(&d, &["gen-cpu", "--isa", "r.isa", "-o", "hdl"]);
    for f in [
        "regfile.v",
        "alu.v",
        "decoder.v",
        "control_unit.v",
        "cpu_top.v",
        "manifest.json",
    ] {
        assert_eq!(
            fs::read(out.join("hdl").join(f)).unwrap(),
            fs::read(d.join("hdl").join(f)).unwrap(),
            "{f}"
        );
    }
    let est = risa(&d, &["estimate", "--isa", "r.isa"]);
    assert_eq!(
        trimmed(&fs::read(out.join("estimate.json")).unwrap()),
        trimmed(&est.stdout)
    );
    let sim = risa(
        &d,
        &[
            "sim", "--isa", "r.isa", "--image", "t1.bin", "--trace", "t1.vcd",
        ],
    );
    assert_eq!(
        trimmed(&fs::read(out.join("t1.sim.json")).unwrap()),
        trimmed(&sim.stdout)
    );
    assert_eq!(
        fs::read(out.join("t1.vcd")).unwrap(),
        fs::read(d.join("t1.vcd")).unwrap()
    );

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("pipeline.json")).unwrap()).unwrap();
    for step in manifest["steps"].as_array().unwrap() {
        for a in step["outputs"].as_array().unwrap() {
            let bytes = fs::read(out.join(a["path"].as_str().unwrap())).unwrap();
            assert_eq!(a["sha256"].as_str().unwrap(), risa::hdl::sha256_hex(&bytes));
        }
    }
}

#[test]
fn pipeline_without_programs_is_the_full_flow() {
    let (_t, d) = setup();
    let o = risa(&d, &["pipeline", "--isa", "full.isa", "-o", "out"]);
    assert_eq!(code(&o), 0);
    let out = d.join("out");
    assert_eq!(
        fs::read(out.join("risa.isa")).unwrap(),
        fs::read(d.join("full.isa")).unwrap()
    );
    let est: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("estimate.json")).unwrap()).unwrap();
    assert_eq!(est["luts"], 4749);
}

#[test]
fn pipeline_rerun_and_missing_costs() {
    let (_t, d) = setup();
    assert_eq!(
        code(&risa(&d, &["pipeline", "--asm", "t1.s", "-o", "out"])),
        0
    );
    let o = risa(&d, &["pipeline", "--asm", "t1.s", "-o", "out"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("up to date"));
    fs::write(d.join("out/t1.bin"), b"junk").unwrap();
    let o = risa(&d, &["pipeline", "--asm", "t1.s", "-o", "out"]);
    assert!(!String::from_utf8_lossy(&o.stderr).contains("up to date"));
    assert_eq!(fs::read(d.join("out/t1.bin")).unwrap().len(), 16);

    let o = risa(
        &d,
        &[
            "pipeline",
            "--asm",
            "t1.s",
            "-o",
            "nc",
            "--costs",
            "nope.json",
        ],
    );
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    assert!(!d.join("nc/estimate.json").exists());
    assert!(d.join("nc/t1.vcd").exists());
}
