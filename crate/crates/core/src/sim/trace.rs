//! Per-clock signal samples and their VCD / JSON encodings.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use vcd::{IdCode, TimescaleUnit, Value};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    #[default]
    Fetch,
    Decode,
    Execute,
    WriteBack,
}

impl Stage {
    pub fn next(self) -> Stage {
        match self {
            Stage::Fetch => Stage::Decode,
            Stage::Decode => Stage::Execute,
            Stage::Execute => Stage::WriteBack,
            Stage::WriteBack => Stage::Fetch,
        }
    }

    pub fn code(self) -> u32 {
        self as u32
    }

    pub fn from_code(code: u32) -> Option<Stage> {
        [
            Stage::Fetch,
            Stage::Decode,
            Stage::Execute,
            Stage::WriteBack,
        ]
        .get(code as usize)
        .copied()
    }
}

/// Bus and pin state during one clock.
///
/// `m_rw` is 1 for a read and 0 for a write; it holds its last value while
/// the bus is idle (`m_en` low). `dbus` carries read data on the clock after
/// the request, flagged by `d_valid`, and otherwise holds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signals {
    pub mar: u32,
    pub mdr: u32,
    pub dbus: u32,
    pub m_rw: bool,
    pub m_en: bool,
    pub d_valid: bool,
    pub gpio_pin: u32,
    pub irq: bool,
    pub stage: Stage,
    pub fault: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub cycle: u64,
    pub signals: Signals,
}

/// VCD variable layout: name and width, in declaration order.
pub const VCD_SIGNALS: [(&str, u32); 10] = [
    ("mar", 32),
    ("mdr", 32),
    ("dbus", 32),
    ("m_rw", 1),
    ("m_en", 1),
    ("d_valid", 1),
    ("gpio_pin", 32),
    ("irq", 1),
    ("stage", 2),
    ("fault", 1),
];

impl Signals {
    /// Values in [`VCD_SIGNALS`] order.
    pub fn values(&self) -> [u32; 10] {
        [
            self.mar,
            self.mdr,
            self.dbus,
            self.m_rw as u32,
            self.m_en as u32,
            self.d_valid as u32,
            self.gpio_pin,
            self.irq as u32,
            self.stage.code(),
            self.fault as u32,
        ]
    }

    pub fn from_values(v: &[u32; 10]) -> Option<Signals> {
        Some(Signals {
            mar: v[0],
            mdr: v[1],
            dbus: v[2],
            m_rw: v[3] != 0,
            m_en: v[4] != 0,
            d_valid: v[5] != 0,
            gpio_pin: v[6],
            irq: v[7] != 0,
            stage: Stage::from_code(v[8])?,
            fault: v[9] != 0,
        })
    }
}

/// Timescale unit and ticks per clock: nanoseconds when the period is a
/// whole number of them, otherwise picoseconds (rounded).
pub fn vcd_timebase(clock_hz: u64) -> (TimescaleUnit, u64) {
    let hz = clock_hz.max(1);
    if 1_000_000_000 % hz == 0 {
        (TimescaleUnit::NS, 1_000_000_000 / hz)
    } else {
        (TimescaleUnit::PS, (1_000_000_000_000 + hz / 2) / hz)
    }
}

fn bits(v: u32, width: u32) -> impl Iterator<Item = Value> {
    (0..width).rev().map(move |i| Value::from(v >> i & 1 == 1))
}

/// Write `trace` as VCD. Only changed signals are dumped after the first
/// sample. An empty trace yields the header alone.
pub fn write_vcd<W: Write>(trace: &[TraceEvent], clock_hz: u64, out: W) -> io::Result<()> {
    let mut w = vcd::Writer::new(out);
    let (unit, ticks) = vcd_timebase(clock_hz);
    w.timescale(1, unit)?;
    w.add_module("soc")?;
    let ids: Vec<IdCode> = VCD_SIGNALS
        .iter()
        .map(|&(name, width)| w.add_wire(width, name))
        .collect::<io::Result<_>>()?;
    w.upscope()?;
    w.enddefinitions()?;
    let mut prev: Option<[u32; 10]> = None;
    for ev in trace {
        let vals = ev.signals.values();
        w.timestamp(ev.cycle * ticks)?;
        for (k, (&(_, width), &id)) in VCD_SIGNALS.iter().zip(&ids).enumerate() {
            if prev.is_some_and(|p| p[k] == vals[k]) {
                continue;
            }
            if width == 1 {
                w.change_scalar(id, vals[k] != 0)?;
            } else {
                w.change_vector(id, bits(vals[k], width))?;
            }
        }
        prev = Some(vals);
    }
    w.flush()
}

pub fn write_json<W: Write>(trace: &[TraceEvent], out: W) -> io::Result<()> {
    serde_json::to_writer(out, trace).map_err(io::Error::other)
}

pub fn read_json(text: &str) -> serde_json::Result<Vec<TraceEvent>> {
    serde_json::from_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_trace_is_header_only() {
        let mut buf = Vec::new();
        write_vcd(&[], 50_000_000, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("$timescale 1 ns $end"));
        assert!(text.contains("$enddefinitions $end"));
        assert!(!text.lines().any(|l| l.starts_with('#')));
        for (name, _) in VCD_SIGNALS {
            assert!(text.contains(&format!(" {name} $end")), "{name}");
        }
    }

    #[test]
    fn timebase() {
        assert_eq!(vcd_timebase(50_000_000), (TimescaleUnit::NS, 20));
        assert_eq!(vcd_timebase(100_000_000), (TimescaleUnit::NS, 10));
        assert_eq!(vcd_timebase(3_000_000_000), (TimescaleUnit::PS, 333));
    }

    #[test]
    fn json_round_trip() {
        let ev = TraceEvent {
            cycle: 3,
            signals: Signals {
                mar: 0x80,
                stage: Stage::WriteBack,
                m_rw: true,
                ..Signals::default()
            },
        };
        let mut buf = Vec::new();
        write_json(&[ev], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("\"stage\":\"writeback\""));
        assert_eq!(read_json(&text).unwrap(), vec![ev]);
    }
}
