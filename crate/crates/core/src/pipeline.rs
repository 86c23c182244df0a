//! Source to tables to pre-executed tables.

use crate::frontend::{compile_sources, FrontendError, SourceUnit};
use crate::inference::{pre_execute, InferenceConfig, InferenceError, PreExecReport};
use crate::loader::{load, LoadError, Tables};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum CompileError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Load(#[from] LoadError),
}

pub fn compile(units: &[SourceUnit]) -> Result<Tables, CompileError> {
    Ok(load(compile_sources(units)?)?)
}

pub fn compile_str(name: &str, source: &str) -> Result<Tables, CompileError> {
    compile(&[SourceUnit::new(name, source)])
}

pub fn preexec(tables: Tables, config: &InferenceConfig) -> Result<(Tables, PreExecReport), InferenceError> {
    pre_execute(tables, config)
}
