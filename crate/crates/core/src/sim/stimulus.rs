use serde::{Deserialize, Serialize};

/// One scheduled input event, e.g.
/// `{"cycle": 100, "kind": "uart_rx", "bytes": [165, 90]}` or
/// `{"cycle": 8, "kind": "gpio_in", "value": 1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stimulus {
    pub cycle: u64,
    #[serde(flatten)]
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    /// Bytes start arriving on the rx wire at `cycle`.
    UartRx { bytes: Vec<u8> },
    /// Drive the external level of every GPIO input pin from `cycle` on.
    GpioIn { value: u32 },
}

pub fn parse_stimuli(text: &str) -> serde_json::Result<Vec<Stimulus>> {
    serde_json::from_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_schedule() {
        let s = parse_stimuli(
            r#"[{"cycle": 100, "kind": "uart_rx", "bytes": [165, 90]},
                {"cycle": 8, "kind": "gpio_in", "value": 1}]"#,
        )
        .unwrap();
        assert_eq!(
            s[0].action,
            Action::UartRx {
                bytes: vec![0xA5, 0x5A]
            }
        );
        assert_eq!(s[1].cycle, 8);
        assert!(parse_stimuli(r#"[{"cycle": 1, "kind": "warp"}]"#).is_err());
    }
}
