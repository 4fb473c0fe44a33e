//! Tools for the algebraic side of finite constraint satisfaction.
//!
//! The crate is organized around a small data model of finite relational
//! structures ([`model`]), a polymorphism search engine driven by the
//! indicator construction ([`poly`]), arc- and cycle-consistency machinery
//! with width-1 solving ([`consistency`]), a compiler for simple
//! definitions and instance reductions ([`compile`]), acyclic obstruction
//! generators ([`duality`]), a certified gadget reduction from 3SAT to
//! edge 3-coloring ([`edgecolor`]), and template classifiers that tie the
//! pieces together ([`classify`]).
//!
//! The mdbook under `book/` walks through the same material chapter by
//! chapter; its code snippets are compiled as doc-tests via the [`guide`]
//! module, so the book cannot drift from the library.

pub mod classify;
pub mod compile;
pub mod consistency;
pub mod duality;
pub mod edgecolor;
pub mod fixtures;
pub mod format;
pub mod guide;
pub mod model;
pub mod poly;
pub mod report;
pub mod cli;

pub(crate) mod search;

use std::fmt;

pub use model::{Assignment, Instance, PartialAssignment, Signature, Structure, Table};

/// Errors shared across the crate.
///
/// Invariant violations in *data* (for example a malformed structure fed to
/// [`model::validate_structure`]) are reported as values, not as errors;
/// this type covers contract violations and refused computations.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("signature mismatch: {0}")]
    SignatureMismatch(String),
    #[error("domain mismatch: operation works over {op} elements, structure over {structure}")]
    DomainMismatch { op: u32, structure: u32 },
    #[error("arity mismatch: {0}")]
    ArityMismatch(String),
    #[error("seed assigns variable {var} the out-of-range value {value} (domain size {domain_size})")]
    SeedOutOfRange { var: u32, value: u32, domain_size: u32 },
    #[error("size cap exceeded for {what}: needs {required}, cap is {cap}")]
    CapExceeded { what: &'static str, required: u64, cap: u64 },
    #[error("structure is not a core: {0}")]
    NotACore(String),
    #[error("not a valid extractor: {0}")]
    NotAValidExtractor(String),
    #[error("instance has a cycle")]
    InstanceHasCycle,
    #[error("path does not witness cycle-inconsistency: {0}")]
    PathDoesNotWitness(String),
    #[error("malformed interpretation: {0}")]
    MalformedInterpretation(String),
    #[error("malformed formula: {0}")]
    MalformedFormula(String),
    #[error("malformed CNF: {0}")]
    MalformedCnf(String),
    #[error("verification failed: {0}")]
    VerificationFailed(String),
    #[error("structure is not smooth: {0}")]
    NotSmooth(String),
    #[error("expected a Boolean template, domain size is {0}")]
    NotBoolean(u32),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Size caps for the operations that are finite but can blow up.
///
/// Each cap refuses the computation with [`Error::CapExceeded`] rather than
/// truncating. Defaults can be overridden per call or, for the CLI, through
/// `CSPKIT_CAP` (a global scale factor) and `--cap`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Caps {
    /// Maximum number of elements in a power structure.
    pub power_elements: u64,
    /// Node budget for the endomorphism searches behind `find_core`.
    pub endo_nodes: u64,
    /// Maximum number of variables in an indicator instance (after merging).
    pub indicator_vars: u64,
    /// Maximum number of tuples in a relation handed to `pp_closure`.
    pub pp_tuples: usize,
    /// Maximum size of a materialized operation table.
    pub operation_table: u64,
    /// Simple-cycle budget for the cycle-consistency audit.
    pub cycle_enum: u64,
    /// Node budget for obstruction construction.
    pub obstruction_nodes: u64,
    /// Edge budget for brute-force edge coloring.
    pub edge_color_edges: usize,
    /// Largest `n` for which `variable_setter(n)` is built eagerly.
    pub setter_pairs: usize,
    /// Boundary-pattern budget for gadget verification.
    pub gadget_patterns: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            power_elements: 1_000_000,
            endo_nodes: 10_000_000,
            indicator_vars: 2_000_000,
            pp_tuples: 6,
            operation_table: 1_000_000,
            cycle_enum: 10_000,
            obstruction_nodes: 100_000,
            edge_color_edges: 60,
            setter_pairs: 24,
            gadget_patterns: 1_000_000,
        }
    }
}

impl Caps {
    /// Reads `CSPKIT_CAP` as a scale factor applied to every default cap.
    pub fn from_env() -> Self {
        let mut caps = Caps::default();
        if let Ok(raw) = std::env::var("CSPKIT_CAP") {
            if let Ok(scale) = raw.trim().parse::<f64>() {
                caps.scale(scale);
            }
        }
        caps
    }

    /// Scales every cap by `factor`, saturating on overflow.
    pub fn scale(&mut self, factor: f64) {
        fn mul(v: u64, f: f64) -> u64 {
            let scaled = (v as f64 * f).round();
            if scaled >= u64::MAX as f64 {
                u64::MAX
            } else if scaled < 1.0 {
                1
            } else {
                scaled as u64
            }
        }
        self.power_elements = mul(self.power_elements, factor);
        self.endo_nodes = mul(self.endo_nodes, factor);
        self.indicator_vars = mul(self.indicator_vars, factor);
        self.pp_tuples = mul(self.pp_tuples as u64, factor) as usize;
        self.operation_table = mul(self.operation_table, factor);
        self.cycle_enum = mul(self.cycle_enum, factor);
        self.obstruction_nodes = mul(self.obstruction_nodes, factor);
        self.edge_color_edges = mul(self.edge_color_edges as u64, factor) as usize;
        self.setter_pairs = mul(self.setter_pairs as u64, factor) as usize;
        self.gadget_patterns = mul(self.gadget_patterns, factor);
    }
}

/// Outcome of a verification-style check that either passes or pins down a
/// concrete counterexample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Checked<C> {
    Pass,
    Fail(C),
}

impl<C> Checked<C> {
    pub fn is_pass(&self) -> bool {
        matches!(self, Checked::Pass)
    }
}

impl<C: fmt::Debug> fmt::Display for Checked<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Checked::Pass => write!(f, "PASS"),
            Checked::Fail(c) => write!(f, "FAIL: {c:?}"),
        }
    }
}
