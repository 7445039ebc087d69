//! Deadlock-freedom verifier for component-based systems.
//!
//! A system is a collection of finite-state component instances that
//! synchronize through multiparty interactions. The verifier computes a
//! structural invariant (the trap invariant) directly from the interaction
//! formula and discharges a deadlock-freedom verification condition with a
//! built-in decision procedure for boolean cardinality constraints. Bounded
//! systems can additionally be checked exactly against a 1-safe Petri net
//! semantics, which doubles as the test oracle for the symbolic route.
//!
//! Module map:
//! - [`prop`]: propositional formulae, DNF, positivation, dualization,
//!   minimal-model enumeration.
//! - [`mil`]: monadic interaction logic (unary predicates over instance
//!   indices), finite structures, unfolding to propositional logic.
//! - [`card`]: cardinality constraints, quantifier elimination, the
//!   positivation operator, satisfiability, SMT-LIB2 export.
//! - [`system`] and [`parse`]: the verification subject and its input format.
//! - [`petri`]: explicit-state ground-truth engine.
//! - [`pipeline`]: end-to-end verification modes and the benchmark runner.

pub mod card;
mod exec;
pub mod mil;
pub mod parse;
pub mod petri;
pub mod pipeline;
pub mod prop;
pub mod smt;
pub mod system;

/// Resource caps for the symbolic engines.
///
/// Every potentially exponential step checks one of these bounds and fails
/// with a structured error instead of blowing up silently.
#[derive(Debug, Clone)]
pub struct Limits {
    /// Maximum number of minterms a DNF conversion may produce.
    pub dnf_minterms: usize,
    /// Maximum number of variables for exhaustive valuation enumeration.
    pub enum_vars: usize,
    /// Maximum number of structures a single enumeration may visit.
    pub structure_count: u64,
    /// Maximum vocabulary size (predicates per part) for complete-minterm
    /// decomposition.
    pub decompose_vocab: usize,
    /// Maximum vocabulary size for the positivation operator.
    pub ppos_vocab: usize,
    /// Maximum number of weak compositions enumerated per cardinality atom.
    pub compositions: usize,
    /// Maximum number of markings explored by the Petri-net engine.
    pub reach_markings: usize,
    /// Maximum number of places for brute-force trap enumeration.
    pub trap_places: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            dnf_minterms: 100_000,
            enum_vars: 24,
            structure_count: 1 << 24,
            decompose_vocab: 10,
            ppos_vocab: 4,
            compositions: 100_000,
            reach_markings: 1_000_000,
            trap_places: 20,
        }
    }
}

pub use pipeline::{verify, Mode, RunConfig, Verdict, VerdictKind};
