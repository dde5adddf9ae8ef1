use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{fit_imm16, fit_pcrel16, fit_target24};

/// Which bits of a word a relocation patches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    /// Absolute value in bits[15:0].
    Imm16,
    /// Absolute address in bits[23:0].
    Target24,
    /// Branch offset from the next instruction, in bits[15:0].
    Pcrel16,
    /// A whole data word.
    Word32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relocation {
    /// Word index within the module.
    pub index: usize,
    pub symbol: String,
    pub addend: i64,
    pub kind: FieldKind,
}

/// Where a source line landed, for listings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineRecord {
    pub line_no: usize,
    pub address: Option<u32>,
    pub word_count: usize,
}

/// Assembler output. Serialized as the `.obj` JSON container.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectModule {
    pub origin: u32,
    /// Encoded words; relocated fields are zero until linked.
    pub words: Vec<u32>,
    pub symbols: BTreeMap<String, u32>,
    pub relocations: Vec<Relocation>,
    #[serde(default)]
    pub lines: Vec<LineRecord>,
}

impl ObjectModule {
    /// One past the last byte.
    pub fn end(&self) -> u32 {
        self.origin + 4 * self.words.len() as u32
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("object module serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// A linked flat memory image, stored big-endian.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineImage {
    pub origin: u32,
    pub bytes: Vec<u8>,
    pub entry: u32,
}

impl MachineImage {
    pub fn from_words(origin: u32, words: &[u32]) -> Self {
        MachineImage {
            origin,
            bytes: words.iter().flat_map(|w| w.to_be_bytes()).collect(),
            entry: origin,
        }
    }

    /// Load a raw `.bin` file. Its length must be a multiple of 4.
    pub fn from_bin(origin: u32, entry: u32, bytes: Vec<u8>) -> Result<Self, LinkError> {
        if !bytes.len().is_multiple_of(4) {
            return Err(LinkError::RaggedImage(bytes.len()));
        }
        Ok(MachineImage {
            origin,
            bytes,
            entry,
        })
    }

    pub fn words(&self) -> Vec<u32> {
        self.bytes
            .chunks_exact(4)
            .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinkError {
    #[error("nothing to link")]
    Empty,
    #[error("undefined symbol `{0}`")]
    UndefinedSymbol(String),
    #[error("symbol `{0}` defined in more than one module")]
    DuplicateSymbol(String),
    #[error("module at {a:#x}..{a_end:#x} overlaps module at {b:#x}..{b_end:#x}")]
    Overlap {
        a: u32,
        a_end: u32,
        b: u32,
        b_end: u32,
    },
    #[error("module origin {origin:#x} lies below link base {base:#x}")]
    BelowBase { origin: u32, base: u32 },
    #[error("relocation against `{symbol}` overflows: {message}")]
    FieldOverflow { symbol: String, message: String },
    #[error("image length {0} is not a multiple of 4")]
    RaggedImage(usize),
}

/// Place every module at its own origin, resolve relocations against the
/// union symbol table and produce a flat image starting at `base`.
pub fn link(modules: &[ObjectModule], base: u32) -> Result<MachineImage, LinkError> {
    if modules.is_empty() {
        return Err(LinkError::Empty);
    }
    let mut symbols: BTreeMap<&str, u32> = BTreeMap::new();
    for m in modules {
        for (name, &value) in &m.symbols {
            if symbols.insert(name, value).is_some() {
                return Err(LinkError::DuplicateSymbol(name.clone()));
            }
        }
    }

    let mut spans: Vec<(u32, u32)> = Vec::new();
    for m in modules.iter().filter(|m| !m.words.is_empty()) {
        if m.origin < base {
            return Err(LinkError::BelowBase {
                origin: m.origin,
                base,
            });
        }
        let (a, a_end) = (m.origin, m.end());
        if let Some(&(b, b_end)) = spans.iter().find(|&&(b, b_end)| a < b_end && b < a_end) {
            return Err(LinkError::Overlap { a, a_end, b, b_end });
        }
        spans.push((a, a_end));
    }

    let end = modules
        .iter()
        .map(ObjectModule::end)
        .max()
        .unwrap_or(base)
        .max(base);
    let mut words = vec![0u32; ((end - base) / 4) as usize];
    for m in modules {
        let first = ((m.origin - base.min(m.origin)) / 4) as usize;
        for (i, &w) in m.words.iter().enumerate() {
            words[first + i] = w;
        }
        for r in &m.relocations {
            let value = *symbols
                .get(r.symbol.as_str())
                .ok_or_else(|| LinkError::UndefinedSymbol(r.symbol.clone()))?
                as i64
                + r.addend;
            let word_addr = m.origin + 4 * r.index as u32;
            let overflow = |message: String| LinkError::FieldOverflow {
                symbol: r.symbol.clone(),
                message,
            };
            let slot = &mut words[first + r.index];
            match r.kind {
                FieldKind::Imm16 => *slot |= fit_imm16(value, true).map_err(overflow)?,
                FieldKind::Pcrel16 => *slot |= fit_pcrel16(value, word_addr).map_err(overflow)?,
                FieldKind::Target24 => *slot |= fit_target24(value).map_err(overflow)?,
                FieldKind::Word32 => {
                    if !(i32::MIN as i64..=u32::MAX as i64).contains(&value) {
                        return Err(overflow(format!("{value} does not fit 32 bits")));
                    }
                    *slot = value as u32;
                }
            }
        }
    }

    let entry = symbols.get("_start").copied().unwrap_or(modules[0].origin);
    let mut image = MachineImage::from_words(base, &words);
    image.entry = entry;
    Ok(image)
}
