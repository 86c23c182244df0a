//! COOL toolchain: precompiler, compiler, pre-execution inference, inversion and runtime.

pub mod code;
pub mod frontend;
pub mod inference;
pub mod inversion;
pub mod loader;
pub mod pipeline;
pub mod runtime;
