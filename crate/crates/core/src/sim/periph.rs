//! Memory-mapped peripherals. Register offsets are relative to each block's
//! base in [`super::SocMap`].

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// 32-pin GPIO port.
///
/// | offset | register |
/// |---|---|
/// | 0x0 | direction (1 = output) |
/// | 0x4 | value |
/// | 0x8 | interrupt enable, per pin |
/// | 0xC | interrupt status, write 1 to clear |
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gpio {
    pub direction: u32,
    pub value: u32,
    /// Observed pin state, updated at the start of each clock.
    pub pins: u32,
    /// Externally driven levels on input pins.
    pub external: u32,
    pub int_enable: u32,
    pub int_status: u32,
}

impl Gpio {
    pub(crate) fn sample(&mut self) {
        let next = (self.value & self.direction) | (self.external & !self.direction);
        let edges = (next ^ self.pins) & !self.direction & self.int_enable;
        self.int_status |= edges;
        self.pins = next;
    }

    pub(crate) fn read(&self, off: u32) -> u32 {
        match off {
            0x0 => self.direction,
            0x4 => (self.value & self.direction) | (self.pins & !self.direction),
            0x8 => self.int_enable,
            _ => self.int_status,
        }
    }

    pub(crate) fn write(&mut self, off: u32, v: u32) {
        match off {
            0x0 => self.direction = v,
            0x4 => self.value = v,
            0x8 => self.int_enable = v,
            _ => self.int_status &= !v,
        }
    }

    pub fn irq(&self) -> bool {
        self.int_status != 0
    }
}

pub const FIFO_CAPACITY: usize = 128;

pub const UART_TX_EMPTY: u32 = 1 << 0;
pub const UART_RX_NONEMPTY: u32 = 1 << 1;
pub const UART_RX_OVERFLOW: u32 = 1 << 2;
pub const UART_TX_FULL: u32 = 1 << 3;
pub const UART_SOFT_PENDING: u32 = 1 << 4;
pub const UART_IE_TX: u32 = 1 << 0;
pub const UART_IE_RX: u32 = 1 << 1;

/// Clocks one 8N1 frame (start, 8 data, stop) occupies on the wire.
pub fn byte_clocks(clock_hz: u64, baud: u32) -> u64 {
    (10 * clock_hz).div_ceil(baud.max(1) as u64)
}

/// 8N1 UART with 128-byte FIFOs in each direction.
///
/// | offset | register |
/// |---|---|
/// | 0x0 | data: write pushes tx, read pops rx (0 when empty) |
/// | 0x4 | status: tx_empty, rx_nonempty, rx_overflow, tx_full, soft_pending |
/// | 0x8 | baud rate in Hz |
/// | 0xC | interrupt enable: bit0 tx empty, bit1 rx nonempty |
///
/// Writing status clears rx_overflow (bit2) and soft_pending (bit4) where set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Uart {
    pub tx_fifo: VecDeque<u8>,
    pub rx_fifo: VecDeque<u8>,
    pub baud: u32,
    clock_hz: u64,
    pub int_enable: u32,
    pub rx_overflow: bool,
    pub soft_pending: bool,
    /// Bytes dropped because rx_fifo was full.
    pub overflow_count: u64,
    /// Bytes that reached rx_fifo.
    pub rx_received: u64,
    pub tx_written: u64,
    pub tx_dropped: u64,
    /// (completion cycle, byte) for every byte that left the tx wire.
    pub tx_log: Vec<(u64, u8)>,
    tx_shift: Option<(u64, u8)>,
    rx_wire: VecDeque<(u64, u8)>,
    rx_wire_free: u64,
}

impl Uart {
    pub fn new(clock_hz: u64, baud: u32) -> Self {
        Uart {
            tx_fifo: VecDeque::with_capacity(FIFO_CAPACITY),
            rx_fifo: VecDeque::with_capacity(FIFO_CAPACITY),
            baud,
            clock_hz,
            int_enable: 0,
            rx_overflow: false,
            soft_pending: false,
            overflow_count: 0,
            rx_received: 0,
            tx_written: 0,
            tx_dropped: 0,
            tx_log: Vec::new(),
            tx_shift: None,
            rx_wire: VecDeque::new(),
            rx_wire_free: 0,
        }
    }

    pub fn byte_clocks(&self) -> u64 {
        byte_clocks(self.clock_hz, self.baud)
    }

    /// Queue bytes on the rx wire. The first starts at `start` (or when the
    /// wire frees up) and each lands in rx_fifo one byte time after the last.
    pub fn inject_rx(&mut self, bytes: &[u8], start: u64) {
        let bc = self.byte_clocks();
        let mut t = start.max(self.rx_wire_free);
        for &b in bytes {
            t += bc;
            self.rx_wire.push_back((t, b));
        }
        self.rx_wire_free = t;
    }

    /// Bytes still on the rx wire.
    pub fn rx_in_flight(&self) -> usize {
        self.rx_wire.len()
    }

    pub(crate) fn push_rx(&mut self, b: u8) {
        if self.rx_fifo.len() >= FIFO_CAPACITY {
            self.rx_overflow = true;
            self.overflow_count += 1;
        } else {
            self.rx_fifo.push_back(b);
            self.rx_received += 1;
        }
    }

    pub(crate) fn tick(&mut self, now: u64) {
        while let Some(&(t, b)) = self.rx_wire.front() {
            if t > now {
                break;
            }
            self.rx_wire.pop_front();
            self.push_rx(b);
        }
        if let Some((done, b)) = self.tx_shift {
            if now >= done {
                self.tx_log.push((done, b));
                self.tx_shift = None;
            }
        }
        if self.tx_shift.is_none() {
            if let Some(b) = self.tx_fifo.pop_front() {
                self.tx_shift = Some((now + self.byte_clocks(), b));
            }
        }
    }

    pub fn status(&self) -> u32 {
        let mut s = 0;
        if self.tx_fifo.is_empty() {
            s |= UART_TX_EMPTY;
        }
        if !self.rx_fifo.is_empty() {
            s |= UART_RX_NONEMPTY;
        }
        if self.rx_overflow {
            s |= UART_RX_OVERFLOW;
        }
        if self.tx_fifo.len() >= FIFO_CAPACITY {
            s |= UART_TX_FULL;
        }
        if self.soft_pending {
            s |= UART_SOFT_PENDING;
        }
        s
    }

    pub(crate) fn read(&mut self, off: u32) -> u32 {
        match off {
            0x0 => self.rx_fifo.pop_front().map_or(0, u32::from),
            0x4 => self.status(),
            0x8 => self.baud,
            _ => self.int_enable,
        }
    }

    pub(crate) fn write(&mut self, off: u32, v: u32) {
        match off {
            0x0 => {
                if self.tx_fifo.len() >= FIFO_CAPACITY {
                    self.tx_dropped += 1;
                } else {
                    self.tx_fifo.push_back(v as u8);
                    self.tx_written += 1;
                }
            }
            0x4 => {
                if v & UART_RX_OVERFLOW != 0 {
                    self.rx_overflow = false;
                }
                if v & UART_SOFT_PENDING != 0 {
                    self.soft_pending = false;
                }
            }
            0x8 => {
                if v != 0 {
                    self.baud = v;
                }
            }
            _ => self.int_enable = v,
        }
    }

    pub fn irq(&self) -> bool {
        (self.int_enable & UART_IE_TX != 0 && self.tx_fifo.is_empty())
            || (self.int_enable & UART_IE_RX != 0 && !self.rx_fifo.is_empty())
            || self.soft_pending
    }
}

pub const TIMER_RUN: u32 = 1 << 0;
pub const TIMER_IE: u32 = 1 << 1;

/// 16-bit up-counter with auto-reload.
///
/// | offset | register |
/// |---|---|
/// | 0x0 | counter |
/// | 0x4 | threshold |
/// | 0x8 | control: bit0 run, bit1 interrupt enable |
/// | 0xC | status: bit0 pending, write 1 to clear |
///
/// On the clock the counter reaches the threshold the pending flag is set and
/// the counter restarts from zero, so events are `threshold` clocks apart.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timer {
    pub counter: u16,
    pub threshold: u16,
    pub running: bool,
    pub int_enable: bool,
    pub pending: bool,
    /// Clock index of every threshold match.
    pub fires: Vec<u64>,
}

impl Timer {
    pub(crate) fn tick(&mut self, now: u64) {
        if !self.running {
            return;
        }
        self.counter = self.counter.wrapping_add(1);
        if self.counter == self.threshold {
            self.pending = true;
            self.counter = 0;
            self.fires.push(now);
        }
    }

    pub(crate) fn read(&self, off: u32) -> u32 {
        match off {
            0x0 => self.counter as u32,
            0x4 => self.threshold as u32,
            0x8 => ((self.running as u32) * TIMER_RUN) | ((self.int_enable as u32) * TIMER_IE),
            _ => self.pending as u32,
        }
    }

    pub(crate) fn write(&mut self, off: u32, v: u32) {
        match off {
            0x0 => self.counter = v as u16,
            0x4 => self.threshold = v as u16,
            0x8 => {
                self.running = v & TIMER_RUN != 0;
                self.int_enable = v & TIMER_IE != 0;
            }
            _ => {
                if v & 1 != 0 {
                    self.pending = false;
                }
            }
        }
    }

    pub fn irq(&self) -> bool {
        self.pending && self.int_enable
    }
}

pub const LED_WIDTH: usize = 32;
pub const LED_HEIGHT: usize = 24;
pub const FRAME_BYTES: usize = LED_WIDTH * LED_HEIGHT * 3;

/// LED matrix frame port: write pixel bytes to +0, then anything to +4 to
/// commit. Reading +0 gives bytes buffered, +4 frames committed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FramePort {
    current: Vec<u8>,
    /// Every committed frame, concatenated.
    pub committed: Vec<u8>,
    pub frames_committed: u64,
    pub commit_cycles: Vec<u64>,
    /// Commits with other than a full frame buffered; the buffer is dropped.
    pub short_commits: u64,
    /// Bytes written past a full frame and dropped.
    pub overrun_bytes: u64,
}

impl FramePort {
    pub fn last_frame(&self) -> Option<&[u8]> {
        (self.frames_committed > 0).then(|| &self.committed[self.committed.len() - FRAME_BYTES..])
    }

    pub(crate) fn read(&self, off: u32) -> u32 {
        match off {
            0x0 => self.current.len() as u32,
            _ => self.frames_committed as u32,
        }
    }

    pub(crate) fn write(&mut self, off: u32, v: u32, now: u64) {
        if off == 0 {
            if self.current.len() < FRAME_BYTES {
                self.current.push(v as u8);
            } else {
                self.overrun_bytes += 1;
            }
            return;
        }
        if self.current.len() == FRAME_BYTES {
            self.committed.extend_from_slice(&self.current);
            self.frames_committed += 1;
            self.commit_cycles.push(now);
        } else {
            self.short_commits += 1;
        }
        self.current.clear();
    }
}
