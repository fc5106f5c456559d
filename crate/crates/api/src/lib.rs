//! HTTP/JSON service for the nephrotic-syndrome diary.
//!
//! [`build_state`] opens the store and alert sinks from a [`Config`];
//! [`router`] exposes every route over that state.

pub mod auth;
pub mod config;
pub mod error;
pub mod extract;
pub mod mailer;
pub mod routes;
pub mod state;

pub use config::Config;
pub use error::ApiError;
pub use routes::router;
pub use state::{build_state, open_diary, AppState, Hospital};
