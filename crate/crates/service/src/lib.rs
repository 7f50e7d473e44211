//! HTTP service for interactive prompt-evolution sessions.
//!
//! Sessions are created with a short concept, then advanced one generation at
//! a time by picking two parents (optionally with attribute ratings). Every
//! generation runs as a background job that clients poll through
//! `GET /sessions/{id}`.

pub mod api;
pub mod store;

pub use api::{router, AppState, GalleryMode, SeedSource};
pub use store::{GalleryEntry, GenerationJob, JobKind, JobPhase, JsonStore, Store, StoreError};
