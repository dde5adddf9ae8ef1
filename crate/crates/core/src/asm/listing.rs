use std::fmt::Write as _;

use super::ObjectModule;

/// Address / machine word / source columns, one row per source line.
/// Lines that emit nothing get blank address and word columns; `.word` lists
/// continue on extra rows.
pub fn emit_listing(module: &ObjectModule, source: &str) -> String {
    let mut out = String::from("ADDRESS  WORD        SOURCE\n");
    let src: Vec<&str> = source.lines().collect();
    for rec in &module.lines {
        let text = src
            .get(rec.line_no.wrapping_sub(1))
            .map_or("", |l| l.trim_end());
        match rec.address {
            Some(addr) if rec.word_count > 0 => {
                let first = ((addr - module.origin) / 4) as usize;
                let _ = writeln!(out, "{addr:#06x}   {:#010x}  {text}", module.words[first]);
                for k in 1..rec.word_count {
                    let a = addr + 4 * k as u32;
                    let _ = writeln!(out, "{a:#06x}   {:#010x}", module.words[first + k]);
                }
            }
            _ => {
                let _ = writeln!(out, "{:<8} {:<10}  {text}", "", "");
            }
        }
    }
    // Blank-column rows may end in padding when the source line is empty.
    out.lines()
        .map(str::trim_end)
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}
