//! Verilog generation for a multi-cycle CPU implementing an ISA config.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::required_units;
use crate::isa::{AluOp, Cond, Format, IsaConfig, MicroOp};

/// Interrupt vector used by the generated control unit.
pub const VECTOR_BASE: u32 = 0x0004;

pub const FILE_NAMES: [&str; 5] = [
    "regfile.v",
    "alu.v",
    "decoder.v",
    "control_unit.v",
    "cpu_top.v",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HdlBundle {
    /// File name to Verilog source.
    pub files: BTreeMap<String, String>,
    pub manifest: HdlManifest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HdlManifest {
    pub isa: String,
    pub isa_hash: String,
    pub top: String,
    pub units: Vec<String>,
    pub files: Vec<ManifestEntry>,
}

impl HdlManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

fn alu_const(op: AluOp) -> String {
    format!("ALU_{}", op.name())
}

fn cond_const(c: Cond) -> String {
    format!("COND_{}", c.name())
}

fn alu_code(op: AluOp) -> usize {
    AluOp::ALL.iter().position(|&o| o == op).unwrap()
}

fn cond_code(c: Cond) -> usize {
    Cond::ALL.iter().position(|&o| o == c).unwrap()
}

/// ALU operations the datapath must provide. ADD is always present since
/// loads, stores and LDI compute `rb + offset` with it.
fn alu_ops(cfg: &IsaConfig) -> BTreeSet<AluOp> {
    let mut ops = BTreeSet::from([AluOp::Add]);
    for d in &cfg.instructions {
        if let MicroOp::Alu3(op) | MicroOp::AluI(op) = d.semantics {
            ops.insert(op);
        }
    }
    ops
}

fn header(cfg: &IsaConfig, what: &str) -> String {
    format!(
        "// {what}\n// ISA {} ({} instructions), generated; do not edit.\n\n",
        cfg.name,
        cfg.instructions.len()
    )
}

fn emit_regfile(cfg: &IsaConfig) -> String {
    let mut s = header(cfg, "Register file: R0 reads as zero, R1-R14 stored.");
    s.push_str(
        "module regfile (
    input  wire        clk,
    input  wire        rst,
    input  wire [3:0]  ra_addr,
    input  wire [3:0]  rb_addr,
    input  wire [3:0]  rc_addr,
    output wire [31:0] ra_data,
    output wire [31:0] rb_data,
    output wire [31:0] rc_data,
    input  wire        wr_en,
    input  wire [3:0]  wr_addr,
    input  wire [31:0] wr_data,
    output wire [31:0] lr
);
    reg [31:0] regs [0:15];
    integer i;

    assign ra_data = (ra_addr == 4'd0) ? 32'd0 : regs[ra_addr];
    assign rb_data = (rb_addr == 4'd0) ? 32'd0 : regs[rb_addr];
    assign rc_data = (rc_addr == 4'd0) ? 32'd0 : regs[rc_addr];
    assign lr = regs[14];

    always @(posedge clk) begin
        if (rst) begin
            for (i = 0; i < 16; i = i + 1) begin
                regs[i] <= 32'd0;
            end
        end else if (wr_en && wr_addr != 4'd0) begin
            regs[wr_addr] <= wr_data;
        end
    end
endmodule
",
    );
    s
}

fn emit_alu(cfg: &IsaConfig) -> String {
    let ops = alu_ops(cfg);
    let mut s = header(cfg, "ALU: only the operations the ISA uses are built.");
    s.push_str(
        "module alu (
    input  wire [3:0]  op,
    input  wire [31:0] a,
    input  wire [31:0] b,
    output reg  [31:0] y
);
",
    );
    for &op in &ops {
        let _ = writeln!(s, "    localparam {} = 4'd{};", alu_const(op), alu_code(op));
    }
    s.push_str("\n    always @* begin\n        case (op)\n");
    for &op in &ops {
        let expr = match op {
            AluOp::Add => "a + b",
            AluOp::Sub => "a - b",
            AluOp::Mul => "a * b",
            AluOp::Div => "(b == 32'd0) ? 32'hFFFFFFFF : $signed(a) / $signed(b)",
            AluOp::And => "a & b",
            AluOp::Or => "a | b",
            AluOp::Xor => "a ^ b",
            AluOp::Shl => "a << b[4:0]",
            AluOp::Shr => "a >> b[4:0]",
            AluOp::Sra => "$signed(a) >>> b[4:0]",
            AluOp::Rol => "(a << b[4:0]) | (a >> (6'd32 - {1'b0, b[4:0]}))",
            AluOp::Ror => "(a >> b[4:0]) | (a << (6'd32 - {1'b0, b[4:0]}))",
        };
        let _ = writeln!(s, "            {}: y = {expr};", alu_const(op));
    }
    s.push_str("            default: y = 32'd0;\n        endcase\n    end\nendmodule\n");
    s
}

const DECODER_OUTPUTS: [(&str, &str); 15] = [
    ("[3:0]", "alu_op"),
    ("", "use_imm"),
    ("", "imm_sext"),
    ("", "reg_we"),
    ("", "mem_rd"),
    ("", "mem_wr"),
    ("", "is_cmp"),
    ("", "is_branch"),
    ("[2:0]", "cond"),
    ("", "is_jmp"),
    ("", "is_jsub"),
    ("", "is_ret"),
    ("", "is_iret"),
    ("", "is_nop"),
    ("", "illegal"),
];

fn emit_decoder(cfg: &IsaConfig) -> String {
    let ops = alu_ops(cfg);
    let mut s = header(cfg, "Instruction decoder: one case arm per instruction.");
    s.push_str("module decoder (\n    input  wire [31:0] ir,\n");
    for (i, (width, name)) in DECODER_OUTPUTS.iter().enumerate() {
        let sep = if i + 1 == DECODER_OUTPUTS.len() {
            ""
        } else {
            ","
        };
        let _ = writeln!(s, "    output reg  {width:<6} {name}{sep}");
    }
    s.push_str(");\n");
    for &op in &ops {
        let _ = writeln!(s, "    localparam {} = 4'd{};", alu_const(op), alu_code(op));
    }
    for c in Cond::ALL {
        let _ = writeln!(s, "    localparam {} = 3'd{};", cond_const(c), cond_code(c));
    }
    s.push_str("\n    wire [7:0] opcode = ir[31:24];\n\n    always @* begin\n");
    for (width, name) in DECODER_OUTPUTS {
        let zero = match width {
            "[3:0]" => "4'd0",
            "[2:0]" => "3'd0",
            _ => "1'b0",
        };
        let _ = writeln!(s, "        {name} = {zero};");
    }
    s.push_str("        case (opcode)\n");
    for d in &cfg.instructions {
        let mut set: Vec<(&str, String)> = Vec::new();
        let one = || "1'b1".to_string();
        match d.semantics {
            MicroOp::Alu3(op) => {
                set.push(("alu_op", alu_const(op)));
                set.push(("reg_we", one()));
            }
            MicroOp::AluI(op) => {
                set.push(("alu_op", alu_const(op)));
                set.push(("use_imm", one()));
                if op.sign_extends_immediate() {
                    set.push(("imm_sext", one()));
                }
                set.push(("reg_we", one()));
            }
            MicroOp::Ldi => {
                set.push(("alu_op", alu_const(AluOp::Add)));
                set.push(("use_imm", one()));
                set.push(("reg_we", one()));
            }
            MicroOp::Load | MicroOp::Store => {
                set.push(("alu_op", alu_const(AluOp::Add)));
                if d.format == Format::L {
                    set.push(("use_imm", one()));
                }
                if d.semantics == MicroOp::Load {
                    set.push(("mem_rd", one()));
                    set.push(("reg_we", one()));
                } else {
                    set.push(("mem_wr", one()));
                }
            }
            MicroOp::Cmp => set.push(("is_cmp", one())),
            MicroOp::Branch(c) => {
                set.push(("is_branch", one()));
                set.push(("imm_sext", one()));
                set.push(("cond", cond_const(c)));
            }
            MicroOp::Jmp => set.push(("is_jmp", one())),
            MicroOp::Jsub => set.push(("is_jsub", one())),
            MicroOp::Ret => set.push(("is_ret", one())),
            MicroOp::Iret => set.push(("is_iret", one())),
            MicroOp::Nop => set.push(("is_nop", one())),
        }
        let _ = writeln!(
            s,
            "            8'h{:02X}: begin // {} {}",
            d.opcode,
            d.mnemonic,
            d.operand_pattern()
        );
        for (name, value) in set {
            let _ = writeln!(s, "                {name} = {value};");
        }
        s.push_str("            end\n");
    }
    s.push_str("            default: illegal = 1'b1;\n        endcase\n    end\nendmodule\n");
    s
}

fn emit_control(cfg: &IsaConfig) -> String {
    let mut s = header(
        cfg,
        "Control unit: Fetch/Decode/Execute/WriteBack FSM, PC, IR and SW.",
    );
    s.push_str(
        "module control_unit (
    input  wire        clk,
    input  wire        rst,
    input  wire        irq,
    output reg  [31:0] mar,
    output reg  [31:0] mdr,
    input  wire [31:0] dbus,
    output reg         m_rw,
    output reg         m_en,
    output reg  [1:0]  stage,
    output reg         fault,
    output reg  [31:0] ir,
    input  wire        use_imm,
    input  wire        imm_sext,
    input  wire        reg_we,
    input  wire        mem_rd,
    input  wire        mem_wr,
    input  wire        is_cmp,
    input  wire        is_branch,
    input  wire [2:0]  cond,
    input  wire        is_jmp,
    input  wire        is_jsub,
    input  wire        is_ret,
    input  wire        is_iret,
    input  wire        illegal,
    output wire [3:0]  ra_addr,
    output wire [3:0]  rb_addr,
    output wire [3:0]  rc_addr,
    input  wire [31:0] ra_data,
    input  wire [31:0] rb_data,
    input  wire [31:0] rc_data,
    input  wire [31:0] lr,
    output reg         wr_en,
    output reg  [3:0]  wr_addr,
    output reg  [31:0] wr_data,
    output wire [31:0] alu_a,
    output wire [31:0] alu_b,
    input  wire [31:0] alu_y
);
    localparam FETCH     = 2'd0;
    localparam DECODE    = 2'd1;
    localparam EXECUTE   = 2'd2;
    localparam WRITEBACK = 2'd3;

    localparam SW_Z  = 0;
    localparam SW_N  = 1;
    localparam SW_IE = 8;
    localparam SW_ID = 9;

",
    );
    for c in Cond::ALL {
        let _ = writeln!(s, "    localparam {} = 3'd{};", cond_const(c), cond_code(c));
    }
    let _ = writeln!(s, "\n    localparam VECTOR = 32'h{VECTOR_BASE:08X};");
    s.push_str(
        "
    reg  [31:0] pc;
    reg  [31:0] sw;
    reg  [31:0] result;
    reg         take;

    wire [31:0] imm_ext = imm_sext ? {{16{ir[15]}}, ir[15:0]} : {16'd0, ir[15:0]};
    wire [3:0]  dest = ir[23:20];

    assign ra_addr = ir[23:20];
    assign rb_addr = ir[19:16];
    assign rc_addr = ir[15:12];

    // R12 and R15 live here rather than in the register file.
    wire [31:0] ra_val = (ra_addr == 4'd15) ? pc : (ra_addr == 4'd12) ? sw : ra_data;
    wire [31:0] rb_val = (rb_addr == 4'd15) ? pc : (rb_addr == 4'd12) ? sw : rb_data;
    wire [31:0] rc_val = (rc_addr == 4'd15) ? pc : (rc_addr == 4'd12) ? sw : rc_data;
    wire [31:0] wb_val = mem_rd ? dbus : result;

    assign alu_a = rb_val;
    assign alu_b = use_imm ? imm_ext : rc_val;

    always @* begin
        case (cond)
            COND_EQ: take = sw[SW_Z];
            COND_NE: take = !sw[SW_Z];
            COND_LT: take = sw[SW_N];
            COND_GT: take = !sw[SW_N] && !sw[SW_Z];
            COND_LE: take = sw[SW_N] || sw[SW_Z];
            COND_GE: take = !sw[SW_N];
            default: take = 1'b1;
        endcase
    end

    always @(posedge clk) begin
        if (rst) begin
            stage   <= FETCH;
            pc      <= 32'd0;
            sw      <= 32'd0;
            ir      <= 32'd0;
            result  <= 32'd0;
            mar     <= 32'd0;
            mdr     <= 32'd0;
            m_rw    <= 1'b0;
            m_en    <= 1'b0;
            wr_en   <= 1'b0;
            wr_addr <= 4'd0;
            wr_data <= 32'd0;
            fault   <= 1'b0;
        end else if (!fault) begin
            m_en  <= 1'b0;
            wr_en <= 1'b0;
            case (stage)
                FETCH: begin
                    if (irq && sw[SW_IE] && !sw[SW_ID]) begin
                        wr_en     <= 1'b1;
                        wr_addr   <= 4'd14;
                        wr_data   <= pc;
                        sw[SW_ID] <= 1'b1;
                        pc        <= VECTOR;
                        mar       <= VECTOR;
                    end else begin
                        mar <= pc;
                    end
                    m_rw  <= 1'b1;
                    m_en  <= 1'b1;
                    stage <= DECODE;
                end
                DECODE: begin
                    ir    <= dbus;
                    pc    <= pc + 32'd4;
                    stage <= EXECUTE;
                end
                EXECUTE: begin
                    result <= alu_y;
                    if (illegal) begin
                        fault <= 1'b1;
                    end else begin
                        if (mem_rd) begin
                            mar  <= alu_y;
                            m_rw <= 1'b1;
                            m_en <= 1'b1;
                        end
                        if (mem_wr) begin
                            mar  <= alu_y;
                            mdr  <= ra_val;
                            m_rw <= 1'b0;
                            m_en <= 1'b1;
                        end
                        if (is_cmp) begin
                            sw[SW_Z] <= ra_val == rb_val;
                            sw[SW_N] <= $signed(ra_val) < $signed(rb_val);
                        end
                        if (is_branch && take) begin
                            pc <= pc + imm_ext;
                        end
                        if (is_jmp || is_jsub) begin
                            pc <= {8'd0, ir[23:0]};
                        end
                        if (is_jsub) begin
                            wr_en   <= 1'b1;
                            wr_addr <= 4'd14;
                            wr_data <= pc;
                        end
                        if (is_ret) begin
                            pc <= lr;
                        end
                        if (is_iret) begin
                            pc        <= lr;
                            sw[SW_ID] <= 1'b0;
                        end
                    end
                    stage <= WRITEBACK;
                end
                WRITEBACK: begin
                    if (reg_we) begin
                        if (dest == 4'd15) begin
                            pc <= wb_val;
                        end else if (dest == 4'd12) begin
                            sw <= wb_val;
                        end else begin
                            wr_en   <= 1'b1;
                            wr_addr <= dest;
                            wr_data <= wb_val;
                        end
                    end
                    stage <= FETCH;
                end
                default: stage <= FETCH;
            endcase
        end
    end
endmodule
",
    );
    s
}

fn emit_top(cfg: &IsaConfig) -> String {
    let mut s = header(cfg, "CPU top level.");
    s.push_str(
        "module cpu_top (
    input  wire        clk,
    input  wire        rst,
    input  wire        irq,
    output wire [31:0] mar,
    output wire [31:0] mdr,
    input  wire [31:0] dbus,
    output wire        m_rw,
    output wire        m_en,
    output wire [1:0]  stage,
    output wire        fault
);
    wire [31:0] ir;
    wire [3:0]  ra_addr;
    wire [3:0]  rb_addr;
    wire [3:0]  rc_addr;
    wire [31:0] ra_data;
    wire [31:0] rb_data;
    wire [31:0] rc_data;
    wire [31:0] lr;
    wire        wr_en;
    wire [3:0]  wr_addr;
    wire [31:0] wr_data;
    wire [31:0] alu_a;
    wire [31:0] alu_b;
    wire [31:0] alu_y;
",
    );
    for (width, name) in DECODER_OUTPUTS {
        let _ = writeln!(s, "    wire {width:<6} {name};");
    }
    s.push_str(
        "
    regfile u_regfile (
        .clk(clk),
        .rst(rst),
        .ra_addr(ra_addr),
        .rb_addr(rb_addr),
        .rc_addr(rc_addr),
        .ra_data(ra_data),
        .rb_data(rb_data),
        .rc_data(rc_data),
        .wr_en(wr_en),
        .wr_addr(wr_addr),
        .wr_data(wr_data),
        .lr(lr)
    );

    alu u_alu (
        .op(alu_op),
        .a(alu_a),
        .b(alu_b),
        .y(alu_y)
    );

    decoder u_decoder (
        .ir(ir),
",
    );
    for (i, (_, name)) in DECODER_OUTPUTS.iter().enumerate() {
        let sep = if i + 1 == DECODER_OUTPUTS.len() {
            ""
        } else {
            ","
        };
        let _ = writeln!(s, "        .{name}({name}){sep}");
    }
    s.push_str("    );\n\n    control_unit u_control (\n");
    let ctrl_ports = [
        "clk",
        "rst",
        "irq",
        "mar",
        "mdr",
        "dbus",
        "m_rw",
        "m_en",
        "stage",
        "fault",
        "ir",
        "use_imm",
        "imm_sext",
        "reg_we",
        "mem_rd",
        "mem_wr",
        "is_cmp",
        "is_branch",
        "cond",
        "is_jmp",
        "is_jsub",
        "is_ret",
        "is_iret",
        "illegal",
        "ra_addr",
        "rb_addr",
        "rc_addr",
        "ra_data",
        "rb_data",
        "rc_data",
        "lr",
        "wr_en",
        "wr_addr",
        "wr_data",
        "alu_a",
        "alu_b",
        "alu_y",
    ];
    for (i, name) in ctrl_ports.iter().enumerate() {
        let sep = if i + 1 == ctrl_ports.len() { "" } else { "," };
        let _ = writeln!(s, "        .{name}({name}){sep}");
    }
    s.push_str("    );\nendmodule\n");
    s
}

/// Generate the Verilog source set for `cfg`. Output is a pure function of
/// the config: identical configs give byte-identical files.
pub fn emit_cpu_hdl(cfg: &IsaConfig) -> HdlBundle {
    let mut files = BTreeMap::new();
    files.insert("regfile.v".to_string(), emit_regfile(cfg));
    files.insert("alu.v".to_string(), emit_alu(cfg));
    files.insert("decoder.v".to_string(), emit_decoder(cfg));
    files.insert("control_unit.v".to_string(), emit_control(cfg));
    files.insert("cpu_top.v".to_string(), emit_top(cfg));
    let manifest = HdlManifest {
        isa: cfg.name.clone(),
        isa_hash: cfg.content_hash(),
        top: "cpu_top".into(),
        units: required_units(cfg).iter().map(|u| u.to_string()).collect(),
        files: FILE_NAMES
            .iter()
            .map(|&name| ManifestEntry {
                name: name.into(),
                sha256: sha256_hex(files[name].as_bytes()),
                bytes: files[name].len(),
            })
            .collect(),
    };
    HdlBundle { files, manifest }
}
