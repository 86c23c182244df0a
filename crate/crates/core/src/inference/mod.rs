//! Function inference: binding every expression before execution.

pub mod matching;
pub mod preexec;
pub mod rewrite;
pub mod search;
pub mod segment;
pub mod silo;

pub use matching::{align_call, match_node, match_segment, ByName, Identity, Match, MatchSubstitution, VarId};
pub use preexec::{PreExecReport, PreExecutor, Records};
pub use search::{accessible_functions, search_bind, Candidate, InferenceConfig, SearchEnv, SearchFailure, SearchLog};
pub use segment::Segment;
pub use silo::{CodeTableSilo, InsertOutcome};

use crate::inversion::InversionError;
use crate::loader::Tables;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum InferenceError {
    #[error(transparent)]
    Search(SearchFailure),
    #[error(transparent)]
    Inversion(#[from] InversionError),
}

/// Binds every executable expression and derives reverse bodies.
pub fn pre_execute(tables: Tables, config: &InferenceConfig) -> Result<(Tables, PreExecReport), InferenceError> {
    let mut p = PreExecutor::new(tables, config);
    p.run()?;
    Ok((p.tables, p.report))
}
