//! R-ISA generation: shrink a full instruction set to what target programs use.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asm::syntax::{is_identifier, split_head, split_label, strip_comment};
use crate::isa::{validate, Diagnostic, IsaConfig};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageReport {
    pub used_mnemonics: BTreeSet<String>,
    pub unknown_mnemonics: BTreeSet<String>,
    pub counts: BTreeMap<String, usize>,
    /// Lines the scanner could not make sense of; scanning continues past them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl UsageReport {
    /// Combine two reports. Associative and commutative up to diagnostic order.
    pub fn merge(mut self, other: &UsageReport) -> UsageReport {
        self.used_mnemonics
            .extend(other.used_mnemonics.iter().cloned());
        self.unknown_mnemonics
            .extend(other.unknown_mnemonics.iter().cloned());
        for (m, n) in &other.counts {
            *self.counts.entry(m.clone()).or_default() += n;
        }
        self.diagnostics.extend(other.diagnostics.iter().cloned());
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("usage report serializes")
    }
}

/// Collect the mnemonics used by instruction statements in `source`.
///
/// `vocabulary` is the full instruction set the program targets; mnemonics it
/// does not define are reported as unknown rather than used. Directives and
/// labels are not counted.
pub fn scan_program(source: &str, vocabulary: &IsaConfig) -> UsageReport {
    let mut report = UsageReport::default();
    for (i, raw) in source.lines().enumerate() {
        let code = strip_comment(raw);
        let body = match split_label(code) {
            Ok((_, body)) => body,
            Err(e) => {
                report.diagnostics.push(format!("line {}: {}", i + 1, e.0));
                continue;
            }
        };
        if body.is_empty() {
            continue;
        }
        let (head, _) = split_head(body);
        if head.starts_with('.') {
            continue;
        }
        if !is_identifier(head) {
            report
                .diagnostics
                .push(format!("line {}: malformed mnemonic `{head}`", i + 1));
            continue;
        }
        let mnemonic = head.to_ascii_uppercase();
        *report.counts.entry(mnemonic.clone()).or_default() += 1;
        if vocabulary.contains(&mnemonic) {
            report.used_mnemonics.insert(mnemonic);
        } else {
            report.unknown_mnemonics.insert(mnemonic);
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReduceError {
    #[error("program uses instructions the ISA does not define: {}", join(.0))]
    UnknownMnemonics(BTreeSet<String>),
    #[error("full ISA is invalid ({} problem(s))", .0.len())]
    InvalidIsa(Vec<Diagnostic>),
}

fn join(set: &BTreeSet<String>) -> String {
    set.iter().cloned().collect::<Vec<_>>().join(", ")
}

/// Keep the instructions used by any report plus the required core.
/// With no reports the result equals `full`.
pub fn reduce(full: &IsaConfig, reports: &[UsageReport]) -> Result<IsaConfig, ReduceError> {
    let diags = validate(full);
    if !diags.is_empty() {
        return Err(ReduceError::InvalidIsa(diags));
    }
    if reports.is_empty() {
        return Ok(full.clone());
    }
    let mut used: BTreeSet<&str> = BTreeSet::new();
    let mut unknown = BTreeSet::new();
    for r in reports {
        unknown.extend(r.unknown_mnemonics.iter().cloned());
        for m in &r.used_mnemonics {
            if full.contains(m) {
                used.insert(m);
            } else {
                unknown.insert(m.clone());
            }
        }
    }
    if !unknown.is_empty() {
        return Err(ReduceError::UnknownMnemonics(unknown));
    }
    let mut out = full.clone();
    out.instructions
        .retain(|d| used.contains(d.mnemonic.as_str()) || full.required_core.contains(&d.mnemonic));
    Ok(out)
}
