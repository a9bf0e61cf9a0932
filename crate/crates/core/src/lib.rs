//! Desk-scale red-teaming harness for text-to-video safety pipelines.
//!
//! The harness rewrites frame-structured prompts into sparse boundary-only
//! specifications ([`tbp`]), lowers their lexical explicitness through covert
//! substitution ([`csm`]), submits the result to a fully simulated
//! filter/generator/filter pipeline ([`sim`]), and aggregates attack success
//! rates per safety category ([`eval`]). Campaigns over a prompt dataset are
//! orchestrated by [`campaign`], driven by the `tfm` CLI.
//!
//! All probability kernels are generic over the scalar type via [`num::Real`];
//! the harness layers use the concrete [`Scalar`] alias.

pub mod backend;
pub mod campaign;
pub mod csm;
pub mod eval;
pub mod fixtures;
pub mod lexicon;
pub mod num;
pub mod prompt;
pub mod sim;
pub mod tbp;

/// Concrete scalar used by the harness layers (risk scores, probabilities).
pub type Scalar = f64;
