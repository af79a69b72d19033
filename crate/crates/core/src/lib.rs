//! Descriptive grid models for ARC tasks, learned by minimum-description-length
//! guided refinement search.
//!
//! The pipeline: a [`model::TaskModel`] pairs an input grid model and an output
//! grid model. Reading a grid ([`parse::read`]) parses it into a parse tree plus
//! a delta of residual cells; writing ([`parse::write`]) generates a tree and
//! draws it. The [`dl`] module scores models and readings in bits, and the
//! [`learn`] module searches for the most compressive task model.

pub mod dl;
pub mod grid;
pub mod learn;
pub mod model;
pub mod parse;
pub mod syntax;
pub mod task;

pub use grid::{Color, Delta, Grid};
pub use model::{Path, Side, TaskModel, Term};
