//! Match scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use arena_core::prompts::EvalQuery;
use arena_core::QueryType;

use crate::error::{ServiceError, ServiceResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    A,
    B,
}

/// Server-side match record. Never sent to annotators as is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub match_id: String,
    pub ordinal: u64,
    pub genre: String,
    pub query_type: QueryType,
    pub prompt_id: String,
    pub prompt_text: String,
    pub system_a: String,
    pub system_b: String,
    /// Which system plays on the left.
    pub presented_left: Side,
    pub phase: u8,
    pub annotators_per_match: u8,
}

fn all_types() -> Vec<QueryType> {
    vec![QueryType::Recall, QueryType::Analysis, QueryType::Creativity]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub allowed_pairs: Vec<(String, String)>,
    pub queries_per_type: usize,
    #[serde(default = "all_types")]
    pub query_types: Vec<QueryType>,
    /// Skip this many queries of each type, so a later phase can use fresh
    /// prompts.
    #[serde(default)]
    pub query_offset: usize,
    pub phase: u8,
    pub annotators_per_match: u8,
    /// Genre stamped on every match. Defaults to each query's own genre,
    /// which for a creativity query may be a foreign one.
    #[serde(default)]
    pub genre: Option<String>,
}

impl ScheduleConfig {
    pub fn validate(&self) -> ServiceResult<()> {
        if !matches!(self.annotators_per_match, 1 | 2) {
            return Err(ServiceError::invalid(format!(
                "annotators_per_match must be 1 or 2, got {}",
                self.annotators_per_match
            )));
        }
        if !matches!(self.phase, 1 | 2) {
            return Err(ServiceError::invalid(format!("phase must be 1 or 2, got {}", self.phase)));
        }
        if let Some((a, _)) = self.allowed_pairs.iter().find(|(a, b)| a == b) {
            return Err(ServiceError::invalid(format!("pair pits `{a}` against itself")));
        }
        Ok(())
    }
}

/// Enumerates pairs × query types × queries, in that nesting order. Match
/// ids continue from `first_ordinal`.
pub fn schedule(
    cfg: &ScheduleConfig,
    queries: &[EvalQuery],
    seed: u64,
    first_ordinal: u64,
) -> ServiceResult<Vec<Match>> {
    cfg.validate()?;
    if cfg.allowed_pairs.is_empty() {
        return Ok(Vec::new());
    }
    let mut per_type = Vec::with_capacity(cfg.query_types.len());
    for &qt in &cfg.query_types {
        let pool: Vec<&EvalQuery> = queries
            .iter()
            .filter(|q| q.query_type == qt)
            .skip(cfg.query_offset)
            .take(cfg.queries_per_type)
            .collect();
        if pool.len() < cfg.queries_per_type {
            return Err(arena_core::Error::Shortfall {
                what: format!("{qt} queries after offset {}", cfg.query_offset),
                requested: cfg.queries_per_type,
                available: pool.len(),
            }
            .into());
        }
        per_type.push(pool);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut ordinal = first_ordinal;
    for (a, b) in &cfg.allowed_pairs {
        for pool in &per_type {
            for q in pool {
                let presented_left = if rng.random_bool(0.5) { Side::A } else { Side::B };
                out.push(Match {
                    match_id: format!("m{ordinal:05}"),
                    ordinal,
                    genre: cfg.genre.clone().unwrap_or_else(|| q.genre.clone()),
                    query_type: q.query_type,
                    prompt_id: q.id.clone(),
                    prompt_text: q.prompt_text.clone(),
                    system_a: a.clone(),
                    system_b: b.clone(),
                    presented_left,
                    phase: cfg.phase,
                    annotators_per_match: cfg.annotators_per_match,
                });
                ordinal += 1;
            }
        }
    }
    Ok(out)
}
