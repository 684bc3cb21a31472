//! Evaluation kernels for arena-style comparison of music generation systems.
//!
//! * [`ratings`]: ELO ladders replayed from the annotation log.
//! * [`agreement`]: distance- and direction-weighted kappa between two annotators.
//! * [`metrics`]: FAD/FD, sigmoid KL and PSNR over ingested features.
//! * [`prompts`]: template-filled training prompts and Recall/Analysis/Creativity queries.
//! * [`corpus`]: metadata ingestion, song-disjoint splits, audio preparation, dataset census.
//! * [`adapter`]: bottleneck residual adapter with forward, backward and AdamW training.
//!
//! Numeric code is generic over [`scalar::Real`] (`f32`/`f64`); agreement
//! tables are generic over [`scalar::Weight`], which also admits exact
//! rationals. Concrete aliases for the common instantiations live here.


pub mod adapter;
pub mod agreement;
pub mod annotation;

pub mod corpus;
pub mod emb;
pub mod error;
pub mod jsonl;
pub mod linalg;
pub mod metrics;

pub mod prompts;
pub mod protocol;
pub mod ratings;
pub mod scalar;
pub mod table;

pub use error::{Error, Result};
pub use protocol::{Criterion, JudgmentOption, QueryType};

/// Exact rational used for agreement tables.
pub type Rational = num_rational::Ratio<i64>;

pub type Matrix64 = linalg::Matrix<f64>;
pub type Matrix32 = linalg::Matrix<f32>;

pub type EloConfig64 = ratings::EloConfig<f64>;
pub type Leaderboard64 = ratings::Leaderboard<f64>;
pub type RatingState64 = ratings::RatingState<f64>;

pub type AgreementMatrix64 = agreement::AgreementMatrix<f64>;
pub type AgreementMatrixExact = agreement::AgreementMatrix<Rational>;
pub type KappaReport64 = agreement::KappaReport<f64>;
pub type KappaReportExact = agreement::KappaReport<Rational>;

pub type EmbeddingSet64 = metrics::EmbeddingSet<f64>;
pub type EmbeddingSet32 = metrics::EmbeddingSet<f32>;
pub type GaussianStats64 = metrics::GaussianStats<f64>;
pub type PairedLogits64 = metrics::PairedLogits<f64>;
pub type MetricReport64 = metrics::MetricReport<f64>;




pub type AdapterParams64 = adapter::AdapterParams<f64>;
pub type AdapterParams32 = adapter::AdapterParams<f32>;
