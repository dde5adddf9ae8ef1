//! LED-matrix streaming demo: a two-task OS image fed by a synthetic pixel
//! stream over the UART, measured in simulated time.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asm::{assemble, link, AsmError};
use crate::isa::{IsaConfig, REG_SW};
use crate::reduce::{reduce, scan_program, ReduceError};
use crate::sim::{
    build_soc, byte_clocks, SimError, SocMap, Stage, FRAME_BYTES, LED_HEIGHT, LED_WIDTH, SW_ID,
};

pub const DEMO_SOURCE: &str = include_str!("../../assets/demo_os.s");
pub const FRAME_MAGIC: [u8; 2] = [0xA5, 0x5A];
/// Bytes on the wire per frame, marker included.
pub const WIRE_FRAME_BYTES: usize = FRAME_BYTES + FRAME_MAGIC.len();
pub const RING_ENTRIES: u32 = 1024;

const REG_TAIL: usize = 10;
const REG_HEAD: usize = 11;

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("frame count must be at least 1")]
    NoFrames,
    #[error("baud rate must be positive")]
    BadBaud,
    #[error("demo program does not assemble: {0}")]
    Asm(#[from] AsmError),
    #[error("demo program does not reduce: {0}")]
    Reduce(#[from] ReduceError),
    #[error("link failed: {0}")]
    Link(String),
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
    #[error("ring buffer overrun at cycle {cycle}: {occupancy} entries of {capacity}")]
    RingOverrun {
        cycle: u64,
        occupancy: u32,
        capacity: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemoParams {
    pub baud: u32,
    pub frames: usize,
    pub clock_hz: u64,
    pub seed: u64,
}

impl Default for DemoParams {
    fn default() -> Self {
        DemoParams {
            baud: 5_000_000,
            frames: 4,
            clock_hz: 50_000_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoReport {
    pub baud: u32,
    pub clock_hz: u64,
    pub frames_requested: usize,
    pub frames: u64,
    pub cycles: u64,
    pub simulated_seconds: f64,
    /// From the spacing of commit cycles; a single frame uses its commit time.
    pub fps: f64,
    /// baud / (10 * 2304), ignoring the frame marker.
    pub wire_ceiling_fps: f64,
    pub uart_bytes: u64,
    pub overflows: u64,
    /// Clocks per byte on the wire.
    pub byte_clocks: u64,
    /// Clocks the rx wire was busy delivering bytes.
    pub wire_cycles: u64,
    /// Clocks spent in the interrupt handler.
    pub isr_cycles: u64,
    /// Clocks not spent in the scheduler or status task.
    pub mcu_busy_cycles: u64,
    pub interrupts: u64,
    pub max_ring_occupancy: u32,
    /// Committed pixels equal the payload sent, in order.
    pub payload_intact: bool,
    pub completed: bool,
    pub isa: String,
    pub isa_instructions: usize,
    pub commit_cycles: Vec<u64>,
}

impl DemoReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn wire_ceiling_fps(baud: u32) -> f64 {
    baud as f64 / (10.0 * FRAME_BYTES as f64)
}

/// Framed synthetic pixel stream: per frame, the marker then 2304 bytes.
pub fn generate_pixel_stream(frames: usize, seed: u64) -> Result<Vec<u8>, DemoError> {
    if frames == 0 {
        return Err(DemoError::NoFrames);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(frames * WIRE_FRAME_BYTES);
    for _ in 0..frames {
        out.extend_from_slice(&FRAME_MAGIC);
        let start = out.len();
        out.resize(start + FRAME_BYTES, 0);
        rng.fill_bytes(&mut out[start..]);
    }
    Ok(out)
}

/// Pixel bytes of a stream from [`generate_pixel_stream`], markers removed.
pub fn payload(stream: &[u8]) -> Vec<u8> {
    stream
        .chunks(WIRE_FRAME_BYTES)
        .flat_map(|f| &f[FRAME_MAGIC.len()..])
        .copied()
        .collect()
}

/// Demo program with the UART programmed for `baud`.
pub fn demo_source(baud: u32) -> String {
    DEMO_SOURCE
        .lines()
        .map(|l| {
            if l.trim_start().starts_with(".equ BAUD_HI,") {
                format!("        .equ BAUD_HI, {:#06x}", baud >> 16)
            } else if l.trim_start().starts_with(".equ BAUD_LO,") {
                format!("        .equ BAUD_LO, {:#06x}", baud & 0xFFFF)
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

/// Binary PPM (P6) of one 32x24 RGB frame.
pub fn frame_to_ppm(frame: &[u8]) -> Vec<u8> {
    let mut out = format!("P6\n{LED_WIDTH} {LED_HEIGHT}\n255\n").into_bytes();
    out.extend_from_slice(frame);
    out
}

/// Outcome of a demo run plus the final SoC-side data for inspection.
#[derive(Debug, Clone)]
pub struct DemoRun {
    pub report: DemoReport,
    pub last_frame: Option<Vec<u8>>,
    /// Final registers, for comparing runs under different configs.
    pub regs: Vec<u32>,
}

/// Reduce `cfg` to what the demo needs, assemble, and stream `frames`
/// frames through the simulated SoC.
pub fn run_demo(cfg: &IsaConfig, params: &DemoParams) -> Result<DemoRun, DemoError> {
    let src = demo_source(params.baud);
    let risa = reduce(cfg, &[scan_program(&src, cfg)])?;
    run_demo_with(&risa, params)
}

/// As [`run_demo`] but without reducing `cfg` first.
pub fn run_demo_with(cfg: &IsaConfig, params: &DemoParams) -> Result<DemoRun, DemoError> {
    if params.baud == 0 {
        return Err(DemoError::BadBaud);
    }
    let stream = generate_pixel_stream(params.frames, params.seed)?;
    let src = demo_source(params.baud);
    let module = assemble(cfg, &src, 0)?;
    let (idle_begin, idle_end) = (module.symbols["idle_begin"], module.symbols["idle_end"]);
    let image = link(&[module], 0).map_err(|e| DemoError::Link(e.to_string()))?;
    let mut soc = build_soc(cfg, &image, SocMap::default(), params.clock_hz)?;
    soc.uart.baud = params.baud;
    soc.inject_uart_rx(&stream, 0);

    let bc = byte_clocks(params.clock_hz, params.baud);
    let wire_total = stream.len() as u64 * bc;
    // Twice the time the wire needs, so a stalled consumer still terminates.
    let budget = 2 * wire_total + 100_000;
    let ring_bytes = 4 * RING_ENTRIES;

    let mut isr_cycles = 0u64;
    let mut idle_cycles = 0u64;
    let mut in_idle = false;
    let mut max_occ = 0u32;
    while soc.cycle < budget && soc.led.frames_committed < params.frames as u64 {
        let ev = soc.step_clock()?;
        if ev.signals.stage == Stage::Fetch {
            in_idle = (idle_begin..idle_end).contains(&ev.signals.mar);
            let occ = soc.regs[REG_HEAD].wrapping_sub(soc.regs[REG_TAIL]) % ring_bytes / 4;
            if occ > max_occ {
                max_occ = occ;
            }
            // Full ring means head caught up with unconsumed data.
            if occ >= RING_ENTRIES - 1 {
                return Err(DemoError::RingOverrun {
                    cycle: ev.cycle,
                    occupancy: occ,
                    capacity: RING_ENTRIES,
                });
            }
        }
        if soc.regs[REG_SW] & SW_ID != 0 {
            isr_cycles += 1;
        } else if in_idle {
            idle_cycles += 1;
        }
    }

    let led = &soc.led;
    let commits = led.commit_cycles.clone();
    let frames = led.frames_committed;
    let cycles = soc.cycle;
    let fps = match commits.as_slice() {
        [] => 0.0,
        [only] => params.clock_hz as f64 / (*only + 1) as f64,
        [first, .., last] => {
            (commits.len() - 1) as f64 * params.clock_hz as f64 / (last - first) as f64
        }
    };
    let sent = payload(&stream);
    let got = &led.committed;
    let report = DemoReport {
        baud: params.baud,
        clock_hz: params.clock_hz,
        frames_requested: params.frames,
        frames,
        cycles,
        simulated_seconds: cycles as f64 / params.clock_hz as f64,
        fps,
        wire_ceiling_fps: wire_ceiling_fps(params.baud),
        uart_bytes: soc.uart.rx_received,
        overflows: soc.uart.overflow_count,
        byte_clocks: bc,
        wire_cycles: (soc.uart.rx_received + soc.uart.overflow_count) * bc,
        isr_cycles,
        mcu_busy_cycles: cycles - idle_cycles,
        interrupts: soc.interrupts_taken,
        max_ring_occupancy: max_occ,
        payload_intact: got.len() == frames as usize * FRAME_BYTES
            && sent.starts_with(got)
            && led.short_commits == 0,
        completed: frames == params.frames as u64,
        isa: cfg.name.clone(),
        isa_instructions: cfg.instructions.len(),
        commit_cycles: commits,
    };
    Ok(DemoRun {
        report,
        last_frame: led.last_frame().map(<[u8]>::to_vec),
        regs: soc.regs.to_vec(),
    })
}
