//! Cycle-level SoC model: a non-pipelined CPU taking four clocks per
//! instruction, RAM and memory-mapped GPIO, UART, timer, halt register and
//! LED frame port.
//!
//! Per-clock behaviour of the CPU:
//!
//! | stage | work |
//! |---|---|
//! | Fetch | take a pending interrupt, then request a read at PC |
//! | Decode | instruction word arrives on dbus; IR is loaded, PC += 4 |
//! | Execute | ALU work; stores write; loads request; PC changes for jumps |
//! | WriteBack | register write, load data arriving on dbus |
//!
//! Read data is valid one clock after the request. Peripherals see bus writes
//! in the clock they are issued; GPIO pins follow the value latch one clock
//! later.

mod map;
mod periph;
mod stimulus;
mod trace;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use map::SocMap;
pub use periph::{
    byte_clocks, FramePort, Gpio, Timer, Uart, FIFO_CAPACITY, FRAME_BYTES, LED_HEIGHT, LED_WIDTH,
    TIMER_IE, TIMER_RUN, UART_IE_RX, UART_IE_TX, UART_RX_NONEMPTY, UART_RX_OVERFLOW,
    UART_SOFT_PENDING, UART_TX_EMPTY, UART_TX_FULL,
};
pub use stimulus::{parse_stimuli, Action, Stimulus};
pub use trace::{
    read_json, vcd_timebase, write_json, write_vcd, Signals, Stage, TraceEvent, VCD_SIGNALS,
};

use crate::asm::MachineImage;
use crate::isa::{
    validate, DecodeError, Diagnostic, Fields, Format, IsaConfig, MicroOp, OpcodeTable,
    REGISTER_COUNT, REG_IR, REG_LR, REG_PC, REG_SW,
};
use map::Region;

pub const DEFAULT_CLOCK_HZ: u64 = 50_000_000;
pub const DEFAULT_BAUD: u32 = 115_200;

/// Status word bits.
pub const SW_Z: u32 = 1 << 0;
pub const SW_N: u32 = 1 << 1;
/// Global interrupt enable, set by software.
pub const SW_IE: u32 = 1 << 8;
/// In-service: set on vectoring, cleared by IRET. Blocks nesting.
pub const SW_ID: u32 = 1 << 9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FaultKind {
    IllegalInstruction { word: u32, reason: String },
    BusError { addr: u32 },
    Misaligned { addr: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fault {
    pub cycle: u64,
    /// Address of the faulting instruction.
    pub pc: u32,
    #[serde(flatten)]
    pub kind: FaultKind,
}

impl std::fmt::Display for Fault {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.kind {
            FaultKind::IllegalInstruction { word, reason } => write!(
                f,
                "illegal instruction {word:#010x} at {:#x} (cycle {}): {reason}",
                self.pc, self.cycle
            ),
            FaultKind::BusError { addr } => write!(
                f,
                "bus error at {addr:#x} by instruction at {:#x} (cycle {})",
                self.pc, self.cycle
            ),
            FaultKind::Misaligned { addr } => write!(
                f,
                "misaligned access to {addr:#x} by instruction at {:#x} (cycle {})",
                self.pc, self.cycle
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("the SoC is halted")]
    Halted,
    #[error("fault: {0}")]
    Fault(Fault),
    #[error("image {start:#x}..{end:#x} does not fit in RAM")]
    ImageOutsideRam { start: u32, end: u32 },
    #[error("bad SoC map: {0}")]
    BadMap(String),
    #[error("invalid ISA config ({} problem(s))", .0.len())]
    InvalidConfig(Vec<Diagnostic>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunState {
    Running,
    Halted,
    Faulted(Fault),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Halted,
    CycleBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrqSource {
    Gpio,
    Uart,
    Timer,
}

/// Register write scheduled for WriteBack.
#[derive(Debug, Clone, Copy)]
enum Pending {
    None,
    Value(usize, u32),
    Load(usize),
}

pub struct Soc {
    cfg: IsaConfig,
    table: OpcodeTable,
    semantics: Vec<(MicroOp, Format)>,
    pub map: SocMap,
    pub clock_hz: u64,
    pub regs: [u32; REGISTER_COUNT],
    pub stage: Stage,
    pub cycle: u64,
    pub retired: u64,
    pub interrupts_taken: u64,
    ram: Vec<u8>,
    pub gpio: Gpio,
    pub uart: Uart,
    pub timer: Timer,
    pub led: FramePort,
    state: RunState,
    halt_requested: bool,
    current: Option<usize>,
    /// Address of the instruction in flight.
    inst_pc: u32,
    pending: Pending,
    read_data: Option<u32>,
    bus: Signals,
    trace: Option<Vec<TraceEvent>>,
    gpio_schedule: VecDeque<(u64, u32)>,
}

/// Build a SoC with `image` loaded into RAM and PC at its entry point.
pub fn build_soc(
    cfg: &IsaConfig,
    image: &MachineImage,
    map: SocMap,
    clock_hz: u64,
) -> Result<Soc, SimError> {
    let diags = validate(cfg);
    if !diags.is_empty() {
        return Err(SimError::InvalidConfig(diags));
    }
    map.check()?;
    let start = image.origin;
    let end = start as u64 + image.len() as u64;
    if start < map.ram_base || end > map.ram_base as u64 + map.ram_size as u64 {
        return Err(SimError::ImageOutsideRam {
            start,
            end: end as u32,
        });
    }
    let mut ram = vec![0u8; map.ram_size as usize];
    let off = (start - map.ram_base) as usize;
    ram[off..off + image.len()].copy_from_slice(&image.bytes);
    let mut regs = [0u32; REGISTER_COUNT];
    regs[REG_PC] = image.entry;
    Ok(Soc {
        cfg: cfg.clone(),
        table: OpcodeTable::new(cfg),
        semantics: cfg
            .instructions
            .iter()
            .map(|d| (d.semantics, d.format))
            .collect(),
        map,
        clock_hz,
        regs,
        stage: Stage::Fetch,
        cycle: 0,
        retired: 0,
        interrupts_taken: 0,
        ram,
        gpio: Gpio::default(),
        uart: Uart::new(clock_hz, DEFAULT_BAUD),
        timer: Timer::default(),
        led: FramePort::default(),
        state: RunState::Running,
        halt_requested: false,
        current: None,
        inst_pc: image.entry,
        pending: Pending::None,
        read_data: None,
        bus: Signals::default(),
        trace: None,
        gpio_schedule: VecDeque::new(),
    })
}

impl Soc {
    pub fn config(&self) -> &IsaConfig {
        &self.cfg
    }

    pub fn state(&self) -> &RunState {
        &self.state
    }

    pub fn is_halted(&self) -> bool {
        self.state == RunState::Halted
    }

    pub fn pc(&self) -> u32 {
        self.regs[REG_PC]
    }

    /// Start recording one [`TraceEvent`] per clock.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn trace(&self) -> &[TraceEvent] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Current interrupt request line.
    pub fn irq(&self) -> bool {
        self.gpio.irq() || self.uart.irq() || self.timer.irq()
    }

    /// Mark `source` pending. GPIO uses status bit 31 and UART its
    /// soft_pending bit, both of which request regardless of per-pin or
    /// per-event enables; the timer's own enable still gates it.
    pub fn raise_interrupt(&mut self, source: IrqSource) {
        match source {
            IrqSource::Gpio => self.gpio.int_status |= 1 << 31,
            IrqSource::Uart => self.uart.soft_pending = true,
            IrqSource::Timer => self.timer.pending = true,
        }
    }

    pub fn inject_uart_rx(&mut self, bytes: &[u8], start_cycle: u64) {
        self.uart.inject_rx(bytes, start_cycle);
    }

    /// Bytes that have left the tx wire since the last drain, with the clock
    /// each one finished.
    pub fn drain_uart_tx(&mut self) -> Vec<(u64, u8)> {
        std::mem::take(&mut self.uart.tx_log)
    }

    /// Drive GPIO input pins to `value` starting at `cycle`.
    pub fn schedule_gpio_input(&mut self, cycle: u64, value: u32) {
        let at = self.gpio_schedule.partition_point(|&(c, _)| c <= cycle);
        self.gpio_schedule.insert(at, (cycle, value));
    }

    pub fn apply_stimuli(&mut self, stimuli: &[Stimulus]) {
        for s in stimuli {
            match &s.action {
                Action::UartRx { bytes } => self.inject_uart_rx(bytes, s.cycle),
                Action::GpioIn { value } => self.schedule_gpio_input(s.cycle, *value),
            }
        }
    }

    /// RAM word at `addr`, without bus side effects. `None` outside RAM.
    pub fn peek_word(&self, addr: u32) -> Option<u32> {
        let off = addr.checked_sub(self.map.ram_base)? as usize;
        let b = self.ram.get(off..off + 4)?;
        Some(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn ram(&self) -> &[u8] {
        &self.ram
    }

    /// Read a word as the CPU would, including side effects such as popping
    /// the UART rx FIFO.
    pub fn bus_read(&mut self, addr: u32) -> Result<u32, FaultKind> {
        if !addr.is_multiple_of(4) {
            return Err(FaultKind::Misaligned { addr });
        }
        match self.map.decode(addr) {
            Some(Region::Ram(off)) => {
                let o = off as usize;
                let b = &self.ram[o..o + 4];
                Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
            }
            Some(Region::Gpio(off)) => Ok(self.gpio.read(off)),
            Some(Region::Uart(off)) => Ok(self.uart.read(off)),
            Some(Region::Timer(off)) => Ok(self.timer.read(off)),
            Some(Region::Halt) => Ok(self.halt_requested as u32),
            Some(Region::Led(off)) => Ok(self.led.read(off)),
            None => Err(FaultKind::BusError { addr }),
        }
    }

    pub fn bus_write(&mut self, addr: u32, word: u32) -> Result<(), FaultKind> {
        if !addr.is_multiple_of(4) {
            return Err(FaultKind::Misaligned { addr });
        }
        match self.map.decode(addr) {
            Some(Region::Ram(off)) => {
                let o = off as usize;
                self.ram[o..o + 4].copy_from_slice(&word.to_be_bytes());
            }
            Some(Region::Gpio(off)) => self.gpio.write(off, word),
            Some(Region::Uart(off)) => self.uart.write(off, word),
            Some(Region::Timer(off)) => self.timer.write(off, word),
            Some(Region::Halt) => self.halt_requested = true,
            Some(Region::Led(off)) => self.led.write(off, word, self.cycle),
            None => return Err(FaultKind::BusError { addr }),
        }
        Ok(())
    }

    fn reg(&self, r: u8) -> u32 {
        if r == 0 {
            0
        } else {
            self.regs[r as usize]
        }
    }

    fn write_reg(&mut self, r: usize, v: u32) {
        if r != 0 {
            self.regs[r] = v;
        }
    }

    /// Advance one clock. A fault is recorded in the trace sample for the
    /// clock it happens in and returned as an error.
    pub fn step_clock(&mut self) -> Result<TraceEvent, SimError> {
        match &self.state {
            RunState::Running => {}
            RunState::Halted => return Err(SimError::Halted),
            RunState::Faulted(f) => return Err(SimError::Fault(f.clone())),
        }
        let now = self.cycle;
        while let Some(&(c, v)) = self.gpio_schedule.front() {
            if c > now {
                break;
            }
            self.gpio_schedule.pop_front();
            self.gpio.external = v;
        }
        self.gpio.sample();
        self.uart.tick(now);
        self.timer.tick(now);
        let irq = self.irq();

        let mut sig = self.bus;
        sig.m_en = false;
        sig.d_valid = false;
        if let Some(d) = self.read_data.take() {
            sig.dbus = d;
            sig.d_valid = true;
        }
        let stage = self.stage;
        let outcome = match stage {
            Stage::Fetch => self.fetch(irq, &mut sig),
            Stage::Decode => self.decode(sig.dbus),
            Stage::Execute => self.execute(&mut sig),
            Stage::WriteBack => {
                self.write_back(sig.dbus);
                Ok(())
            }
        };
        let fault = outcome.err().map(|kind| Fault {
            cycle: now,
            pc: self.inst_pc,
            kind,
        });
        sig.stage = stage;
        sig.gpio_pin = self.gpio.pins;
        sig.irq = irq;
        sig.fault = fault.is_some();
        self.bus = sig;
        self.cycle += 1;
        let ev = TraceEvent {
            cycle: now,
            signals: sig,
        };
        if let Some(t) = self.trace.as_mut() {
            t.push(ev);
        }
        if let Some(f) = fault {
            self.state = RunState::Faulted(f.clone());
            return Err(SimError::Fault(f));
        }
        self.stage = stage.next();
        if stage == Stage::WriteBack && self.halt_requested {
            self.state = RunState::Halted;
        }
        Ok(ev)
    }

    fn fetch(&mut self, irq: bool, sig: &mut Signals) -> Result<(), FaultKind> {
        let sw = self.regs[REG_SW];
        if irq && sw & SW_IE != 0 && sw & SW_ID == 0 {
            self.regs[REG_LR] = self.regs[REG_PC];
            self.regs[REG_SW] = sw | SW_ID;
            self.regs[REG_PC] = self.map.vector_base;
            self.interrupts_taken += 1;
        }
        let pc = self.regs[REG_PC];
        self.inst_pc = pc;
        sig.mar = pc;
        sig.m_rw = true;
        sig.m_en = true;
        self.read_data = Some(self.bus_read(pc)?);
        Ok(())
    }

    fn decode(&mut self, word: u32) -> Result<(), FaultKind> {
        self.regs[REG_IR] = word;
        self.regs[REG_PC] = self.regs[REG_PC].wrapping_add(4);
        match self.table.lookup(&self.cfg, word) {
            Ok(idx) => {
                self.current = Some(idx);
                Ok(())
            }
            Err(e) => Err(FaultKind::IllegalInstruction {
                word,
                reason: match e {
                    DecodeError::UnknownOpcode { opcode, .. } => {
                        format!("opcode {opcode:#04x} is not in ISA {}", self.cfg.name)
                    }
                    other => other.to_string(),
                },
            }),
        }
    }

    fn execute(&mut self, sig: &mut Signals) -> Result<(), FaultKind> {
        let idx = self.current.take().expect("decoded instruction");
        let (sem, format) = self.semantics[idx];
        let f = Fields::split(self.regs[REG_IR]);
        let ra = f.ra as usize;
        let zimm = f.imm16 as u32;
        let simm = f.imm16 as i16 as i32 as u32;
        let pc = self.regs[REG_PC];
        let address = |s: &Soc| match format {
            Format::A => s.reg(f.rb).wrapping_add(s.reg(f.rc)),
            _ => s.reg(f.rb).wrapping_add(zimm),
        };
        self.pending = Pending::None;
        match sem {
            MicroOp::Alu3(op) => {
                self.pending = Pending::Value(ra, op.apply(self.reg(f.rb), self.reg(f.rc)));
            }
            MicroOp::AluI(op) => {
                let b = if op.sign_extends_immediate() {
                    simm
                } else {
                    zimm
                };
                self.pending = Pending::Value(ra, op.apply(self.reg(f.rb), b));
            }
            MicroOp::Ldi => {
                self.pending = Pending::Value(ra, self.reg(f.rb).wrapping_add(zimm));
            }
            MicroOp::Load => {
                let addr = address(self);
                sig.mar = addr;
                sig.m_rw = true;
                sig.m_en = true;
                self.read_data = Some(self.bus_read(addr)?);
                self.pending = Pending::Load(ra);
            }
            MicroOp::Store => {
                let addr = address(self);
                let value = self.reg(f.ra);
                sig.mar = addr;
                sig.mdr = value;
                sig.m_rw = false;
                sig.m_en = true;
                self.bus_write(addr, value)?;
            }
            MicroOp::Cmp => {
                let (a, b) = (self.reg(f.ra), self.reg(f.rb));
                let mut sw = self.regs[REG_SW] & !(SW_Z | SW_N);
                if a == b {
                    sw |= SW_Z;
                }
                if (a as i32) < (b as i32) {
                    sw |= SW_N;
                }
                self.pending = Pending::Value(REG_SW, sw);
            }
            MicroOp::Branch(c) => {
                let sw = self.regs[REG_SW];
                if c.holds(sw & SW_Z != 0, sw & SW_N != 0) {
                    self.regs[REG_PC] = pc.wrapping_add(simm);
                }
            }
            MicroOp::Jmp => self.regs[REG_PC] = f.target24,
            MicroOp::Jsub => {
                self.pending = Pending::Value(REG_LR, pc);
                self.regs[REG_PC] = f.target24;
            }
            MicroOp::Ret => self.regs[REG_PC] = self.regs[REG_LR],
            MicroOp::Iret => {
                self.regs[REG_PC] = self.regs[REG_LR];
                self.regs[REG_SW] &= !SW_ID;
            }
            MicroOp::Nop => {}
        }
        Ok(())
    }

    fn write_back(&mut self, dbus: u32) {
        match std::mem::replace(&mut self.pending, Pending::None) {
            Pending::None => {}
            Pending::Value(r, v) => self.write_reg(r, v),
            Pending::Load(r) => self.write_reg(r, dbus),
        }
        self.retired += 1;
    }

    /// Run clocks until the next instruction boundary (four clocks from a
    /// boundary).
    pub fn step_instruction(&mut self) -> Result<Vec<TraceEvent>, SimError> {
        let mut events = Vec::with_capacity(4);
        loop {
            events.push(self.step_clock()?);
            if self.stage == Stage::Fetch || !matches!(self.state, RunState::Running) {
                return Ok(events);
            }
        }
    }

    /// Clock until halted or `max_cycles` more clocks have run.
    pub fn run(&mut self, max_cycles: u64) -> Result<StopReason, SimError> {
        let end = self.cycle.saturating_add(max_cycles);
        while self.cycle < end {
            if self.is_halted() {
                return Ok(StopReason::Halted);
            }
            self.step_clock()?;
        }
        Ok(if self.is_halted() {
            StopReason::Halted
        } else {
            StopReason::CycleBudget
        })
    }
}
