//! HTTP service and command-line front end for answer diagnostic graph
//! feedback.
//!
//! [`app::App`] holds the loaded prompts, graphs and templates plus the
//! session store; [`api::router`] exposes it over HTTP and [`cli::run`]
//! implements the `adg` binary.

pub mod api;
pub mod app;
pub mod cli;
mod error;
pub mod sessions;
pub mod store;

pub use app::{App, ServiceConfig};
pub use error::{ApiError, ErrorBody};
