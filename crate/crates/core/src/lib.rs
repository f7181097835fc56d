//! Feature logic with linear precedence constraints.
//!
//! The crate provides a constraint store over features, set membership,
//! precedence closures, word-order domains and immediate precedence; a
//! deterministic rewrite engine deciding consistency; model construction and
//! linearization; and a brute-force finite-model checker for testing.

pub mod cli;
pub mod engine;
pub mod model;
pub mod oracle;
pub mod semantics;
pub mod syntax;

pub use engine::{normalize, RuleId, TraceStep, Verdict};
pub use model::{ClosureKind, Constraint, ConstraintStore, ModelError, Signature, Sort, Sym, Var};
pub use oracle::{brute_force_consistent, OracleBudget, OracleError};
pub use semantics::{canonical_model, linearize, Interpretation, SemanticsError};
pub use syntax::{parse_program, print_store, ParseError};
