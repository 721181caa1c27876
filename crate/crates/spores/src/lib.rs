//! Cost-based optimizer for linear-algebra expressions.
//!
//! Expressions are lowered into a relational form (named-attribute sums of
//! products), explored exhaustively with equality saturation over an e-graph,
//! and the cheapest equivalent plan is extracted under a sparsity-aware cost
//! model. A separate canonical-form pipeline decides semantic equivalence of
//! two expressions directly.

pub mod canon;
pub mod cli;
pub mod derive;
pub mod egraph;
pub mod eval;
pub mod extract;
pub mod ir;
pub mod rules;
pub mod saturate;
pub mod translate;
