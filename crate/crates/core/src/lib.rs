//! Non-termination proving for integer transition systems by
//! acceleration driven clause learning (ADCL).
//!
//! The search keeps a trace of transitions that always forms a run from
//! `init`. Recursive suffixes of the trace are accelerated into learned
//! transitions; when a suffix admits a recurrent set, a transition to `err`
//! is learned, and reaching `err` proves non-termination. Every positive
//! answer comes with a witness that can be checked without the search.
//!
//! ```no_run
//! use adcl_core::{engine, parser};
//!
//! let ts = parser::parse("vars x\nrule init -> l :: x' = 1\nrule l -> l :: x > 0 && x++").unwrap();
//! let outcome = engine::run(&ts, engine::EngineConfig::default()).unwrap();
//! assert!(matches!(outcome.verdict, engine::Verdict::NonTerminating(_)));
//! ```

pub mod accel;
pub mod engine;
pub mod formula;
pub mod fresh;
pub mod implicants;
pub mod nonterm;
pub mod parser;
pub mod proof;
pub mod smt;
pub mod ts;

pub use engine::{run, Budgets, EngineConfig, MaybeReason, NontermWitness, RunOutcome, SeedOrder, Verdict};
pub use formula::{Formula, Literal, Model, Term, VarId};
pub use nonterm::Certificate;
pub use proof::ProofDocument;
pub use smt::{Solver, SolverConfig};
pub use ts::{Location, Transition, TransitionSystem};
