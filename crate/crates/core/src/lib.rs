//! Schema-guided event graph engine.
//!
//! Instantiates hierarchical event schemas against extracted instance graphs,
//! validates and lays out the merged graph, grounds elements in multimedia
//! provenance, and supports analyst editing with undo/redo.

pub mod diag;
pub mod editor;
pub mod formats;
pub mod layout;
pub mod matcher;
pub mod model;
pub mod provenance;

pub use diag::{Code, Diagnostic, Diagnostics, Severity};
