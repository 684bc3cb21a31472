//! Blinded two-phase pairwise annotation service over append-only JSONL logs.

pub mod api;
pub mod blind;
pub mod error;
pub mod schedule;
pub mod store;

pub use api::{router, serve, AppState, ServeConfig};
pub use error::{ServiceError, ServiceResult};
pub use schedule::{schedule, Match, ScheduleConfig, Side};
pub use store::{Ack, Store, Submission};
