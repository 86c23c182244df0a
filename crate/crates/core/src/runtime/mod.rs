//! Execution of pre-executed code tables.

pub mod exec;
pub mod record;
pub mod value;

pub use exec::{CallEvent, ExecutionReport, Runtime, RuntimeConfig};
pub use record::{ActiveRecord, Loc, RecordArena};
pub use value::{apply_builtin, apply_builtin_number, apply_number, ArithmeticError, Value};

use crate::loader::{Address, Tables};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("runtime error at {address}: {message}")]
pub struct RuntimeError {
    pub address: Address,
    pub message: String,
}

pub fn run_program(tables: &Tables, config: RuntimeConfig) -> Result<ExecutionReport, RuntimeError> {
    Runtime::new(tables, config).run()
}
