use thiserror::Error;

use crate::parser::SourceDiagnostic;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("predicate `{predicate}` used with arity {found}, declared with arity {expected}")]
    ArityMismatch {
        predicate: String,
        expected: usize,
        found: usize,
    },
    #[error("rule `{0}` has an empty body")]
    EmptyBody(String),
    #[error("rule `{0}` has an empty head")]
    EmptyHead(String),
    #[error("rule `{0}` contains a null literal")]
    NullInRule(String),
    #[error("duplicate rule id `{0}`")]
    DuplicateRuleId(String),
    #[error("variable `{0}` is not mapped")]
    UnmappedVariable(String),
}

#[derive(Debug, Clone, Error)]
#[error("{}", render(.diagnostics))]
pub struct ParseError {
    pub diagnostics: Vec<SourceDiagnostic>,
}

fn render(diags: &[SourceDiagnostic]) -> String {
    diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Error)]
pub enum ChaseError {
    #[error("the oblivious chase needs a budget when the program has existential rules")]
    MissingBudget,
    #[error("resumption is defined for the parsimonious and isomorphic chase only")]
    ResumptionNeedsFiringCondition,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}, row {row}: {source}")]
    Row {
        path: String,
        row: usize,
        #[source]
        source: ModelError,
    },
    #[error("{path}, row {row}: empty row")]
    EmptyRow { path: String, row: usize },
}
