pub mod asm;
pub mod cli;
pub mod demo;
pub mod hdl;
pub mod isa;
pub mod reduce;
pub mod sim;
