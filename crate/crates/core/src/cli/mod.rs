//! `risa` command-line driver.
//!
//! Machine-readable results go to stdout as JSON, diagnostics to stderr.
//! Exit codes: 0 ok, 1 I/O or usage, 2 toolchain rejection, 3 simulation
//! fault, 4 `--until-halt` ran out of cycles.

mod pipeline;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::asm::{assemble, emit_listing, link, syntax::parse_number, MachineImage, ObjectModule};
use crate::demo::{frame_to_ppm, run_demo, DemoError, DemoParams};
use crate::hdl::{emit_cpu_hdl, estimate_resources, lint_verilog, CostModel, HdlBundle};
use crate::isa::{parse_isa_config, validate, IsaConfig};
use crate::reduce::{reduce, scan_program, ReduceError, UsageReport};
use crate::sim::{
    build_soc, parse_stimuli, write_json, write_vcd, Fault, SimError, SocMap, StopReason,
    DEFAULT_CLOCK_HZ,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_REJECT: i32 = 2;
pub const EXIT_FAULT: i32 = 3;
pub const EXIT_TIMEOUT: i32 = 4;

#[derive(Debug)]
pub(crate) struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn io(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_IO,
            message: message.into(),
        }
    }

    fn reject(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_REJECT,
            message: message.into(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "risa",
    version,
    about = "ISA reduction, assembly, CPU generation and SoC simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct IsaArg {
    /// ISA config file. Defaults to the built-in 36-instruction set.
    #[arg(long, env = "RISA_ISA")]
    isa: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Shrink the ISA to the instructions the given programs use.
    Reduce {
        #[command(flatten)]
        isa: IsaArg,
        /// Assembly programs to scan; none keeps the ISA unchanged.
        #[arg(long = "asm")]
        programs: Vec<PathBuf>,
        /// Output `.isa` file.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Assemble a program. The output extension picks the format:
    /// `.obj` object JSON, `.lst` listing, anything else a raw `.bin` image.
    Asm {
        #[command(flatten)]
        isa: IsaArg,
        source: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write a listing next to the output.
        #[arg(long)]
        listing: bool,
        #[arg(long, default_value = "0", value_parser = parse_u32)]
        origin: u32,
    },
    /// Emit the Verilog CPU for an ISA.
    GenCpu {
        #[command(flatten)]
        isa: IsaArg,
        /// Output directory.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Estimate LUT and DSP usage.
    Estimate {
        #[command(flatten)]
        isa: IsaArg,
        /// Cost model JSON. Defaults to the shipped calibrated model.
        #[arg(long)]
        costs: Option<PathBuf>,
    },
    /// Run an image on the simulated SoC.
    Sim(SimArgs),
    /// Stream frames through the two-task LED demo.
    Demo {
        #[command(flatten)]
        isa: IsaArg,
        #[arg(long, default_value_t = 5_000_000)]
        baud: u32,
        #[arg(long, default_value_t = 4)]
        frames: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_CLOCK_HZ)]
        clock: u64,
        /// Write the last committed frame as a PPM image.
        #[arg(long)]
        ppm: Option<PathBuf>,
    },
    /// reduce, asm, gen-cpu, estimate and sim in one go, with a manifest.
    Pipeline {
        #[command(flatten)]
        isa: IsaArg,
        #[arg(long = "asm")]
        programs: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        map: Option<PathBuf>,
        /// Cost model JSON; a missing file skips the estimate.
        #[arg(long)]
        costs: Option<PathBuf>,
        /// Clocks per program; defaults to four per image word.
        #[arg(long)]
        cycles: Option<u64>,
        /// Rerun even when the manifest says the outputs are current.
        #[arg(long)]
        force: bool,
    },
    /// Print the mnemonic and encoding table as JSON.
    DumpTables {
        #[command(flatten)]
        isa: IsaArg,
    },
}

#[derive(Args, Debug)]
struct SimArgs {
    #[command(flatten)]
    isa: IsaArg,
    /// `.bin`, `.obj` or assembly source.
    #[arg(long)]
    image: PathBuf,
    /// SoC map JSON.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Clock budget. Defaults to four per image word, or 10M with `--until-halt`.
    #[arg(long)]
    cycles: Option<u64>,
    /// Run until the program halts; exit 4 if the budget runs out first.
    #[arg(long)]
    until_halt: bool,
    /// Trace output; `.json` for JSON, otherwise VCD.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Stimulus schedule JSON.
    #[arg(long)]
    stimulus: Option<PathBuf>,
    /// Load address for `.bin` images and source.
    #[arg(long, default_value = "0", value_parser = parse_u32)]
    origin: u32,
    /// Entry point; defaults to the origin.
    #[arg(long, value_parser = parse_u32)]
    entry: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_CLOCK_HZ)]
    clock: u64,
    /// Memory words to report after the run.
    #[arg(long, value_parser = parse_u32)]
    peek: Vec<u32>,
}

fn parse_u32(s: &str) -> Result<u32, String> {
    parse_number(s)
        .and_then(|v| u32::try_from(v).ok())
        .ok_or_else(|| format!("`{s}` is not a 32-bit unsigned number"))
}

pub fn main() -> i32 {
    run(std::env::args_os())
}

/// Parse `args` and run the command, printing diagnostics to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_IO } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("risa: {}", e.message);
            e.code
        }
    }
}

fn dispatch(cmd: Command) -> CliResult<i32> {
    match cmd {
        Command::Reduce {
            isa,
            programs,
            output,
        } => {
            let (cfg, text) = load_isa(&isa)?;
            let sources = read_programs(&programs)?;
            let out = reduce_step(&cfg, &text, &sources)?;
            write_file(&output, out.isa_text.as_bytes())?;
            emit(&out.usage_json);
            Ok(EXIT_OK)
        }
        Command::Asm {
            isa,
            source,
            output,
            listing,
            origin,
        } => {
            let (cfg, _) = load_isa(&isa)?;
            let src = read_text(&source)?;
            let out = asm_step(&cfg, &src, origin)?;
            let ext = output.extension().and_then(|e| e.to_str()).unwrap_or("");
            let bytes = match ext {
                "obj" => out.object.to_json().into_bytes(),
                "lst" => out.listing.clone().into_bytes(),
                _ => out.image.bytes.clone(),
            };
            write_file(&output, &bytes)?;
            if listing && ext != "lst" {
                write_file(&output.with_extension("lst"), out.listing.as_bytes())?;
            }
            emit(&out.summary_json());
            Ok(EXIT_OK)
        }
        Command::GenCpu { isa, output } => {
            let (cfg, _) = load_isa(&isa)?;
            let bundle = gen_cpu_step(&cfg)?;
            for (name, text) in &bundle.files {
                write_file(&output.join(name), text.as_bytes())?;
            }
            let manifest = bundle.manifest.to_json();
            write_file(&output.join("manifest.json"), manifest.as_bytes())?;
            emit(&manifest);
            Ok(EXIT_OK)
        }
        Command::Estimate { isa, costs } => {
            let (cfg, _) = load_isa(&isa)?;
            let model = match costs {
                Some(p) => load_costs(&p)?,
                None => CostModel::calibrated(),
            };
            emit(&estimate_step(&cfg, &model)?);
            Ok(EXIT_OK)
        }
        Command::Sim(args) => cmd_sim(args),
        Command::Demo {
            isa,
            baud,
            frames,
            seed,
            clock,
            ppm,
        } => {
            let (cfg, _) = load_isa(&isa)?;
            let params = DemoParams {
                baud,
                frames,
                clock_hz: clock,
                seed,
            };
            let run = run_demo(&cfg, &params).map_err(|e| match e {
                DemoError::NoFrames | DemoError::BadBaud => CliError::io(e.to_string()),
                DemoError::Sim(SimError::Fault(_)) | DemoError::RingOverrun { .. } => CliError {
                    code: EXIT_FAULT,
                    message: e.to_string(),
                },
                _ => CliError::reject(e.to_string()),
            })?;
            if let Some(path) = ppm {
                match &run.last_frame {
                    Some(f) => write_file(&path, &frame_to_ppm(f))?,
                    None => eprintln!("risa: no frame committed, {} not written", path.display()),
                }
            }
            let r = &run.report;
            if r.overflows > 0 || !r.completed {
                eprintln!(
                    "risa: warning: {} of {} frames, {} rx overflows",
                    r.frames, r.frames_requested, r.overflows
                );
            }
            emit(&r.to_json());
            Ok(EXIT_OK)
        }
        Command::Pipeline {
            isa,
            programs,
            output,
            map,
            costs,
            cycles,
            force,
        } => pipeline::run(pipeline::Request {
            isa: isa.isa,
            programs,
            output,
            map,
            costs,
            cycles,
            force,
        }),
        Command::DumpTables { isa } => {
            let (cfg, _) = load_isa(&isa)?;
            let asm =
                crate::asm::build_assembler(&cfg).map_err(|e| CliError::reject(e.to_string()))?;
            emit(&to_json(&asm.tables()));
            Ok(EXIT_OK)
        }
    }
}

fn cmd_sim(a: SimArgs) -> CliResult<i32> {
    let (cfg, _) = load_isa(&a.isa)?;
    let map = match &a.map {
        Some(p) => load_map(p)?,
        None => SocMap::default(),
    };
    let image = load_image(&cfg, &a.image, a.origin, a.entry)?;
    let stimuli = match &a.stimulus {
        Some(p) => parse_stimuli(&read_text(p)?)
            .map_err(|e| CliError::io(format!("{}: {e}", p.display())))?,
        None => Vec::new(),
    };
    let cycles = a.cycles.unwrap_or(if a.until_halt {
        10_000_000
    } else {
        default_cycles(&image)
    });
    let out = sim_step(&cfg, &image, map, a.clock, &stimuli, cycles, &a.peek)?;
    if let Some(path) = &a.trace {
        let bytes = if path.extension().is_some_and(|e| e == "json") {
            out.trace_json.clone()
        } else {
            out.trace_vcd.clone()
        };
        write_file(path, &bytes)?;
    }
    emit(&out.summary_json);
    if let Some(f) = &out.summary.fault {
        eprintln!("risa: {f}");
        return Ok(EXIT_FAULT);
    }
    if a.until_halt && out.summary.stop != "halted" {
        eprintln!("risa: no halt within {cycles} cycles");
        return Ok(EXIT_TIMEOUT);
    }
    Ok(EXIT_OK)
}

/// Print to stdout, ignoring a closed pipe.
pub(crate) fn emit(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

// Shared steps. The pipeline writes exactly what the single commands write.

pub(crate) fn to_json<T: Serialize + ?Sized>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

pub(crate) fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

pub(crate) fn read_programs(paths: &[PathBuf]) -> CliResult<Vec<String>> {
    paths.iter().map(|p| read_text(p)).collect()
}

/// The config and the text it came from.
fn load_isa(arg: &IsaArg) -> CliResult<(IsaConfig, String)> {
    load_isa_path(arg.isa.as_deref())
}

pub(crate) fn load_isa_path(path: Option<&Path>) -> CliResult<(IsaConfig, String)> {
    let Some(path) = path else {
        return Ok((
            IsaConfig::default_config(),
            IsaConfig::default_text().to_string(),
        ));
    };
    let text = read_text(path)?;
    let cfg = parse_isa_config(&text)
        .map_err(|e| CliError::reject(format!("{}: {e}", path.display())))?;
    let diags = validate(&cfg);
    if !diags.is_empty() {
        let lines: Vec<String> = diags.iter().map(ToString::to_string).collect();
        return Err(CliError::reject(format!(
            "{}:\n  {}",
            path.display(),
            lines.join("\n  ")
        )));
    }
    Ok((cfg, text))
}

pub(crate) fn load_map(path: &Path) -> CliResult<SocMap> {
    SocMap::from_json(&read_text(path)?)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

pub(crate) fn load_costs(path: &Path) -> CliResult<CostModel> {
    CostModel::from_json(&read_text(path)?)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn load_image(
    cfg: &IsaConfig,
    path: &Path,
    origin: u32,
    entry: Option<u32>,
) -> CliResult<MachineImage> {
    let mut image = match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => {
            let bytes =
                fs::read(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
            MachineImage::from_bin(origin, origin, bytes)
                .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?
        }
        Some("obj") => {
            let m = ObjectModule::from_json(&read_text(path)?)
                .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
            let base = m.origin;
            link(&[m], base).map_err(|e| CliError::reject(format!("{}: {e}", path.display())))?
        }
        _ => asm_step(cfg, &read_text(path)?, origin)?.image,
    };
    if let Some(e) = entry {
        image.entry = e;
    }
    Ok(image)
}

pub(crate) fn default_cycles(image: &MachineImage) -> u64 {
    4 * image.words().len() as u64
}

pub(crate) struct ReduceOutput {
    pub cfg: IsaConfig,
    pub isa_text: String,
    pub usage_json: String,
}

/// With no programs the input text is passed through untouched.
pub(crate) fn reduce_step(
    cfg: &IsaConfig,
    text: &str,
    sources: &[String],
) -> CliResult<ReduceOutput> {
    let reports: Vec<UsageReport> = sources.iter().map(|s| scan_program(s, cfg)).collect();
    let merged = reports
        .iter()
        .fold(UsageReport::default(), |acc, r| acc.merge(r));
    let reduced = reduce(cfg, &reports).map_err(|e| match e {
        ReduceError::UnknownMnemonics(_) | ReduceError::InvalidIsa(_) => {
            CliError::reject(e.to_string())
        }
    })?;
    let isa_text = if sources.is_empty() {
        text.to_string()
    } else {
        crate::isa::serialize_isa_config(&reduced)
    };
    Ok(ReduceOutput {
        cfg: reduced,
        isa_text,
        usage_json: merged.to_json(),
    })
}

pub(crate) struct AsmOutput {
    pub object: ObjectModule,
    pub image: MachineImage,
    pub listing: String,
}

#[derive(Serialize)]
struct AsmSummary<'a> {
    origin: u32,
    entry: u32,
    bytes: usize,
    sha256: String,
    words: Vec<String>,
    symbols: &'a std::collections::BTreeMap<String, u32>,
}

impl AsmOutput {
    pub fn summary_json(&self) -> String {
        to_json(&AsmSummary {
            origin: self.image.origin,
            entry: self.image.entry,
            bytes: self.image.len(),
            sha256: crate::hdl::sha256_hex(&self.image.bytes),
            words: self
                .image
                .words()
                .iter()
                .map(|w| format!("{w:08X}"))
                .collect(),
            symbols: &self.object.symbols,
        })
    }
}

pub(crate) fn asm_step(cfg: &IsaConfig, src: &str, origin: u32) -> CliResult<AsmOutput> {
    let object = assemble(cfg, src, origin).map_err(|e| {
        if e.is_rejection() {
            CliError::reject(e.to_string())
        } else {
            CliError::reject(format!("syntax: {e}"))
        }
    })?;
    let image =
        link(std::slice::from_ref(&object), origin).map_err(|e| CliError::reject(e.to_string()))?;
    let listing = emit_listing(&object, src);
    Ok(AsmOutput {
        object,
        image,
        listing,
    })
}

pub(crate) fn gen_cpu_step(cfg: &IsaConfig) -> CliResult<HdlBundle> {
    let bundle = emit_cpu_hdl(cfg);
    let issues = lint_verilog(&bundle.files);
    if let Some(i) = issues.first() {
        return Err(CliError::reject(format!(
            "generated HDL failed lint: {}: {}",
            i.file, i.message
        )));
    }
    Ok(bundle)
}

pub(crate) fn estimate_step(cfg: &IsaConfig, model: &CostModel) -> CliResult<String> {
    estimate_resources(cfg, model)
        .map(|e| to_json(&e))
        .map_err(|e| CliError::reject(e.to_string()))
}

#[derive(Debug, Serialize)]
pub(crate) struct SimSummary {
    pub stop: String,
    pub cycles: u64,
    pub retired: u64,
    pub interrupts: u64,
    pub pc: u32,
    pub regs: Vec<u32>,
    pub gpio_pin: u32,
    pub uart_tx: Vec<u8>,
    pub memory: std::collections::BTreeMap<String, String>,
    pub fault: Option<Fault>,
}

pub(crate) struct SimOutput {
    pub summary: SimSummary,
    pub summary_json: String,
    pub trace_vcd: Vec<u8>,
    pub trace_json: Vec<u8>,
}

pub(crate) fn sim_step(
    cfg: &IsaConfig,
    image: &MachineImage,
    map: SocMap,
    clock_hz: u64,
    stimuli: &[crate::sim::Stimulus],
    cycles: u64,
    peek: &[u32],
) -> CliResult<SimOutput> {
    let mut soc = build_soc(cfg, image, map, clock_hz).map_err(|e| CliError::io(e.to_string()))?;
    soc.enable_trace();
    soc.apply_stimuli(stimuli);
    let (stop, fault) = match soc.run(cycles) {
        Ok(StopReason::Halted) => ("halted", None),
        Ok(StopReason::CycleBudget) => ("cycle_budget", None),
        Err(SimError::Fault(f)) => ("fault", Some(f)),
        Err(e) => return Err(CliError::io(e.to_string())),
    };
    let mut memory = std::collections::BTreeMap::new();
    for &addr in peek {
        let v = soc.peek_word(addr).ok_or_else(|| {
            CliError::io(format!("cannot peek {addr:#x}: not an aligned RAM address"))
        })?;
        memory.insert(format!("0x{addr:08X}"), format!("0x{v:08X}"));
    }
    let summary = SimSummary {
        stop: stop.to_string(),
        cycles: soc.cycle,
        retired: soc.retired,
        interrupts: soc.interrupts_taken,
        pc: soc.pc(),
        regs: soc.regs.to_vec(),
        gpio_pin: soc.gpio.pins,
        uart_tx: soc.uart.tx_log.iter().map(|&(_, b)| b).collect(),
        memory,
        fault,
    };
    let trace = soc.take_trace();
    let mut trace_vcd = Vec::new();
    write_vcd(&trace, clock_hz, &mut trace_vcd).map_err(|e| CliError::io(e.to_string()))?;
    let mut trace_json = Vec::new();
    write_json(&trace, &mut trace_json).map_err(|e| CliError::io(e.to_string()))?;
    Ok(SimOutput {
        summary_json: to_json(&summary),
        summary,
        trace_vcd,
        trace_json,
    })
}
