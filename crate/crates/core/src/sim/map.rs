use serde::{Deserialize, Serialize};

use super::SimError;

/// Size in bytes of each peripheral register window.
pub const WINDOW: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SocMap {
    pub ram_base: u32,
    pub ram_size: u32,
    pub gpio_base: u32,
    pub uart_base: u32,
    pub timer_base: u32,
    /// Any write here stops the clock loop.
    pub halt_addr: u32,
    /// LED matrix frame port; `None` leaves it unmapped.
    #[serde(default)]
    pub led_base: Option<u32>,
    pub vector_base: u32,
}

impl Default for SocMap {
    fn default() -> Self {
        SocMap {
            ram_base: 0x0000,
            ram_size: 0x4000,
            gpio_base: 0x4000,
            uart_base: 0x4100,
            timer_base: 0x4200,
            halt_addr: 0x4300,
            led_base: Some(0x4400),
            vector_base: 0x0004,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Region {
    Ram(u32),
    Gpio(u32),
    Uart(u32),
    Timer(u32),
    Halt,
    Led(u32),
}

fn within(addr: u32, base: u32, size: u32) -> Option<u32> {
    let off = addr.wrapping_sub(base);
    (addr >= base && off < size).then_some(off)
}

impl SocMap {
    pub fn gpio_value_addr(&self) -> u32 {
        self.gpio_base + 4
    }

    fn regions(&self) -> Vec<(&'static str, u32, u32)> {
        let mut r = vec![
            ("ram", self.ram_base, self.ram_size),
            ("gpio", self.gpio_base, WINDOW),
            ("uart", self.uart_base, WINDOW),
            ("timer", self.timer_base, WINDOW),
            ("halt", self.halt_addr, 4),
        ];
        if let Some(led) = self.led_base {
            r.push(("led", led, 8));
        }
        r
    }

    pub fn check(&self) -> Result<(), SimError> {
        let regions = self.regions();
        for (i, &(a, ab, asz)) in regions.iter().enumerate() {
            if ab % 4 != 0 || asz % 4 != 0 || ab.checked_add(asz).is_none() {
                return Err(SimError::BadMap(format!(
                    "{a} region is misaligned or wraps"
                )));
            }
            for &(b, bb, bsz) in &regions[i + 1..] {
                if ab < bb + bsz && bb < ab + asz {
                    return Err(SimError::BadMap(format!("{a} and {b} regions overlap")));
                }
            }
        }
        if within(self.vector_base, self.ram_base, self.ram_size).is_none() {
            return Err(SimError::BadMap("vector_base is outside RAM".into()));
        }
        Ok(())
    }

    pub(crate) fn decode(&self, addr: u32) -> Option<Region> {
        if let Some(off) = within(addr, self.ram_base, self.ram_size) {
            return Some(Region::Ram(off));
        }
        if let Some(off) = within(addr, self.gpio_base, WINDOW) {
            return Some(Region::Gpio(off));
        }
        if let Some(off) = within(addr, self.uart_base, WINDOW) {
            return Some(Region::Uart(off));
        }
        if let Some(off) = within(addr, self.timer_base, WINDOW) {
            return Some(Region::Timer(off));
        }
        if addr == self.halt_addr {
            return Some(Region::Halt);
        }
        if let Some(off) = self.led_base.and_then(|b| within(addr, b, 8)) {
            return Some(Region::Led(off));
        }
        None
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("map serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let map: SocMap =
            serde_json::from_str(text).map_err(|e| SimError::BadMap(e.to_string()))?;
        map.check()?;
        Ok(map)
    }
}
