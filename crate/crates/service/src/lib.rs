//! Session service for the event graph engine.
//!
//! [`SessionStore`] holds sessions and persists them as input files plus an
//! op log; [`http::router`] exposes the store over HTTP.

pub mod http;
pub mod session;
pub mod store;

pub use http::{router, serve};
pub use session::{graph_hash, Session, SessionSummary, Snapshot, ViewFilters};
pub use store::{load_session_dir, LogEntry, SessionStore};
