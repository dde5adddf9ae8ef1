//! LUT/DSP cost model.
//!
//! The model is linear: a fixed base (register file, control unit, basic ALU)
//! plus a per-unit cost for each optional datapath unit the ISA needs.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::required_units;
use crate::isa::{IsaConfig, Unit};

const CALIBRATED: &str = include_str!("../../assets/costs.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitCost {
    pub luts: u64,
    #[serde(default)]
    pub dsps: u64,
    /// Where the number came from (measured, calibrated or estimated).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModel {
    pub base_luts: u64,
    #[serde(default)]
    pub base_dsps: u64,
    /// Optional units only; CORE is part of the base.
    pub units: BTreeMap<Unit, UnitCost>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceEstimate {
    pub luts: u64,
    pub dsps: u64,
    pub units: BTreeSet<Unit>,
}

#[derive(Debug, Error)]
pub enum CostError {
    #[error("cost model has no entry for unit {0}")]
    MissingUnit(Unit),
    #[error("CORE belongs in base_luts, not in the unit table")]
    CoreInUnits,
    #[error("bad cost model: {0}")]
    Parse(#[from] serde_json::Error),
}

impl CostModel {
    /// The shipped model, pinned to the two measured CPU builds.
    pub fn calibrated() -> Self {
        Self::from_json(CALIBRATED).expect("shipped costs.json is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, CostError> {
        let model: CostModel = serde_json::from_str(text)?;
        if model.units.contains_key(&Unit::Core) {
            return Err(CostError::CoreInUnits);
        }
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cost model serializes")
    }

    /// Same unit table with every unit cost zeroed.
    pub fn zero_units(&self) -> Self {
        let mut m = self.clone();
        for cost in m.units.values_mut() {
            cost.luts = 0;
            cost.dsps = 0;
        }
        m
    }
}

pub fn estimate_resources(
    cfg: &IsaConfig,
    model: &CostModel,
) -> Result<ResourceEstimate, CostError> {
    let units = required_units(cfg);
    let mut luts = model.base_luts;
    let mut dsps = model.base_dsps;
    for unit in units.iter().filter(|&&u| u != Unit::Core) {
        let cost = model.units.get(unit).ok_or(CostError::MissingUnit(*unit))?;
        luts += cost.luts;
        dsps += cost.dsps;
    }
    Ok(ResourceEstimate { luts, dsps, units })
}
