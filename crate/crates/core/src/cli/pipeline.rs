//! End-to-end flow with a manifest of input and output hashes.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    asm_step, default_cycles, emit, estimate_step, gen_cpu_step, load_costs, load_isa_path,
    load_map, read_text, reduce_step, sim_step, to_json, write_file, CliError, CliResult,
    EXIT_FAULT, EXIT_OK,
};
use crate::hdl::{sha256_hex, CostModel};
use crate::isa::IsaConfig;
use crate::sim::{SocMap, DEFAULT_CLOCK_HZ};

pub(crate) const MANIFEST: &str = "pipeline.json";

pub(crate) struct Request {
    pub isa: Option<PathBuf>,
    pub programs: Vec<PathBuf>,
    pub output: PathBuf,
    pub map: Option<PathBuf>,
    pub costs: Option<PathBuf>,
    pub cycles: Option<u64>,
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: String,
    pub outputs: Vec<Artifact>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Everything a run depends on. Paths are recorded as given; the output
/// directory is left out so identical inputs give identical manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineInputs {
    /// `None` for the built-in ISA.
    pub isa: Option<InputFile>,
    pub programs: Vec<InputFile>,
    pub map: Option<InputFile>,
    pub costs: Option<InputFile>,
    pub cycles: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineManifest {
    pub tool: String,
    pub inputs: PipelineInputs,
    pub steps: Vec<StepLog>,
}

fn input_file(path: &Path, text: &str) -> InputFile {
    InputFile {
        path: path.display().to_string(),
        sha256: sha256_hex(text.as_bytes()),
    }
}

struct Writer<'a> {
    dir: &'a Path,
    outputs: Vec<Artifact>,
}

impl<'a> Writer<'a> {
    fn new(dir: &'a Path) -> Self {
        Writer {
            dir,
            outputs: Vec::new(),
        }
    }

    fn put(&mut self, rel: &str, bytes: &[u8]) -> CliResult<()> {
        write_file(&self.dir.join(rel), bytes)?;
        self.outputs.push(Artifact {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    fn finish(&mut self, step: &str, note: Option<String>) -> StepLog {
        StepLog {
            step: step.to_string(),
            outputs: std::mem::take(&mut self.outputs),
            note,
        }
    }
}

/// The existing manifest text, if `dir` holds one for `inputs` with intact outputs.
fn up_to_date(dir: &Path, inputs: &PipelineInputs) -> Option<String> {
    let text = fs::read_to_string(dir.join(MANIFEST)).ok()?;
    let old: PipelineManifest = serde_json::from_str(&text).ok()?;
    if &old.inputs != inputs || old.tool != tool_id() {
        return None;
    }
    let intact = old
        .steps
        .iter()
        .flat_map(|s| &s.outputs)
        .all(|a| fs::read(dir.join(&a.path)).is_ok_and(|b| sha256_hex(&b) == a.sha256));
    intact.then_some(text)
}

fn tool_id() -> String {
    format!("risa {}", env!("CARGO_PKG_VERSION"))
}

pub(crate) fn run(req: Request) -> CliResult<i32> {
    let (cfg, isa_text) = load_isa_path(req.isa.as_deref())?;
    let mut sources = Vec::new();
    let mut stems = BTreeSet::new();
    for p in &req.programs {
        let stem = p
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| CliError::io(format!("{}: no usable file name", p.display())))?
            .to_string();
        if !stems.insert(stem.clone()) {
            return Err(CliError::io(format!("two programs named `{stem}`")));
        }
        sources.push((stem, read_text(p)?));
    }
    let (map, map_input) = match &req.map {
        Some(p) => (load_map(p)?, Some(input_file(p, &read_text(p)?))),
        None => (SocMap::default(), None),
    };
    let (costs, costs_input, costs_note) = match &req.costs {
        Some(p) if !p.exists() => {
            let msg = format!("cost file {} not found, estimate skipped", p.display());
            eprintln!("risa: warning: {msg}");
            (None, None, Some(msg))
        }
        Some(p) => (
            Some(load_costs(p)?),
            Some(input_file(p, &read_text(p)?)),
            None,
        ),
        None => (Some(CostModel::calibrated()), None, None),
    };
    let inputs = PipelineInputs {
        isa: req.isa.as_deref().map(|p| input_file(p, &isa_text)),
        programs: req
            .programs
            .iter()
            .zip(&sources)
            .map(|(p, (_, s))| input_file(p, s))
            .collect(),
        map: map_input,
        costs: costs_input,
        cycles: req.cycles,
    };
    if !req.force {
        if let Some(text) = up_to_date(&req.output, &inputs) {
            eprintln!("risa: {} is up to date", req.output.display());
            emit(&text);
            return Ok(EXIT_OK);
        }
    }

    let dir = req.output.as_path();
    let mut w = Writer::new(dir);
    let mut steps = Vec::new();

    let texts: Vec<String> = sources.iter().map(|(_, s)| s.clone()).collect();
    let reduced = reduce_step(&cfg, &isa_text, &texts)?;
    w.put("risa.isa", reduced.isa_text.as_bytes())?;
    w.put("usage.json", reduced.usage_json.as_bytes())?;
    steps.push(w.finish("reduce", None));
    let risa: &IsaConfig = &reduced.cfg;

    let mut images = Vec::new();
    for (stem, src) in &sources {
        let out = asm_step(risa, src, 0)?;
        w.put(&format!("{stem}.bin"), &out.image.bytes)?;
        w.put(&format!("{stem}.obj"), out.object.to_json().as_bytes())?;
        w.put(&format!("{stem}.lst"), out.listing.as_bytes())?;
        images.push((stem, out.image));
    }
    steps.push(w.finish("asm", None));

    let bundle = gen_cpu_step(risa)?;
    for (name, text) in &bundle.files {
        w.put(&format!("hdl/{name}"), text.as_bytes())?;
    }
    w.put("hdl/manifest.json", bundle.manifest.to_json().as_bytes())?;
    steps.push(w.finish("gen-cpu", None));

    if let Some(model) = &costs {
        w.put("estimate.json", estimate_step(risa, model)?.as_bytes())?;
    }
    steps.push(w.finish("estimate", costs_note));

    let mut faulted = Vec::new();
    for (stem, image) in &images {
        let cycles = req.cycles.unwrap_or_else(|| default_cycles(image));
        let out = sim_step(risa, image, map, DEFAULT_CLOCK_HZ, &[], cycles, &[])?;
        w.put(&format!("{stem}.vcd"), &out.trace_vcd)?;
        w.put(&format!("{stem}.sim.json"), out.summary_json.as_bytes())?;
        if let Some(f) = &out.summary.fault {
            faulted.push(format!("{stem}: {f}"));
        }
    }
    steps.push(w.finish("sim", None));

    let manifest = PipelineManifest {
        tool: tool_id(),
        inputs,
        steps,
    };
    let text = to_json(&manifest);
    write_file(&dir.join(MANIFEST), text.as_bytes())?;
    emit(&text);
    if !faulted.is_empty() {
        for f in &faulted {
            eprintln!("risa: {f}");
        }
        return Ok(EXIT_FAULT);
    }
    Ok(EXIT_OK)
}
