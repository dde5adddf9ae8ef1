#![allow(dead_code)]

pub mod oracle;

use std::collections::HashMap;
use std::io::BufReader;

use risa::asm::{assemble, link, MachineImage};
use risa::isa::IsaConfig;
use risa::sim::{
    build_soc, vcd_timebase, Signals, Soc, SocMap, TraceEvent, DEFAULT_CLOCK_HZ, VCD_SIGNALS,
};

pub fn image(cfg: &IsaConfig, src: &str) -> MachineImage {
    let m = assemble(cfg, src, 0).unwrap_or_else(|e| panic!("{e}"));
    link(&[m], 0).unwrap()
}

pub fn soc(src: &str) -> Soc {
    let cfg = IsaConfig::default_config();
    build_soc(&cfg, &image(&cfg, src), SocMap::default(), DEFAULT_CLOCK_HZ).unwrap()
}

/// Rebuild per-clock samples from VCD text using an independent parser.
pub fn samples_from_vcd(text: &str, clock_hz: u64) -> Vec<TraceEvent> {
    let mut p = vcd::Parser::new(BufReader::new(text.as_bytes()));
    let header = p.parse_header().unwrap();
    let scope = header.find_scope(&["soc"]).unwrap();
    let slot: HashMap<vcd::IdCode, usize> = VCD_SIGNALS
        .iter()
        .enumerate()
        .map(|(i, (name, _))| (scope.find_var(name).unwrap().code, i))
        .collect();
    let (_, ticks) = vcd_timebase(clock_hz);
    let mut vals = [0u32; 10];
    let mut out = Vec::new();
    let mut at: Option<u64> = None;
    let flush = |at: Option<u64>, vals: &[u32; 10], out: &mut Vec<TraceEvent>| {
        if let Some(t) = at {
            out.push(TraceEvent {
                cycle: t / ticks,
                signals: Signals::from_values(vals).unwrap(),
            });
        }
    };
    for cmd in p {
        match cmd.unwrap() {
            vcd::Command::Timestamp(t) => {
                flush(at, &vals, &mut out);
                at = Some(t);
            }
            vcd::Command::ChangeScalar(id, v) => vals[slot[&id]] = (v == vcd::Value::V1) as u32,
            vcd::Command::ChangeVector(id, v) => {
                vals[slot[&id]] = v
                    .iter()
                    .fold(0, |acc, b| acc << 1 | (b == vcd::Value::V1) as u32)
            }
            _ => {}
        }
    }
    flush(at, &vals, &mut out);
    out
}
