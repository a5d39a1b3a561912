//! Causal graphs that carry their own study design.
//!
//! The central object is the [`graph::DesignGraph`]: a DAG whose nodes are
//! either causal variables, selection indicators (who enters each phase of a
//! study), or data nodes (the recorded copy of a causal variable, defined
//! only for selected individuals). On top of it the crate provides
//!
//! * a small text DSL for describing design graphs ([`dsl`]),
//! * d-separation and exact conditional-independence checks ([`separation`]),
//! * causal-effect identification with latent projection, do-calculus rule
//!   checks, and adjustment criteria ([`identify`], [`expr`]),
//! * design-level transforms: missingness-graph collapse, selection
//!   diagrams, and per-variable missingness classification ([`transforms`]),
//! * stratified observed-data likelihoods and maximum-likelihood estimation
//!   for saturated binary models ([`likelihood`], [`estimate`]),
//! * forward simulation and exact enumeration oracles ([`simulate`],
//!   [`oracle`]).

pub mod dsl;
pub mod estimate;
pub mod expr;
pub mod graph;
pub mod identify;
pub mod likelihood;
pub mod model;
pub mod oracle;
pub mod separation;
pub mod simulate;
pub mod transforms;

pub use dsl::{build_graph, canonical_dsl, parse_graph};
pub use estimate::{causal_effect_plugin, fit_mle, EstimateError, FitOptions, FitResult};
pub use expr::{evaluate_expr, ProbExpr, Slot, VarOrder};
pub use graph::{DesignGraph, Graph, InfoAttr, Node, NodeKind, ValidationReport};
pub use identify::{
    backdoor_admissible, frontdoor_admissible, identify, identify_admg, latent_project,
    m_separated, rule_applicable, Hedge, IdentifyResult, LatentGraph, Rule,
};
pub use likelihood::{factorize, loglik, marginalize, Factorization, LikelihoodError, Stratum};
pub use model::{
    saturated_binary_parametrization, DiscreteModel, FrequencyTable, ParamMap,
    DEFAULT_STATE_CAP,
};
pub use separation::{ci_deviation, d_separated, exact_ci, CiQuery};
pub use simulate::{
    expected_frequencies, interventional_distribution, simulate_dataset, ExpectedTable, SimMeta,
    SimulateError,
};
pub use transforms::{
    classify_missingness, collapse_missingness, collapse_selection_diagram,
    ignorable_selection_terms, MissingnessClass, MissingnessReport, TransformError,
};
