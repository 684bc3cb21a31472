//! ELO ladders replayed from the annotation log.
//!
//! Every annotation is one match between the two systems it compares. Each
//! criterion, and each query-type slice, is an independent rating universe.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationRecord, RecordKind};
use crate::error::{Error, Result};
use crate::protocol::{Criterion, JudgmentOption, QueryType};
use crate::scalar::Real;
use crate::table::{fmt_num, Table};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EloConfig<T> {
    pub k_factor: T,
    pub initial_rating: T,
}

impl<T: Real> Default for EloConfig<T> {
    fn default() -> Self {
        Self { k_factor: T::lit(15.0), initial_rating: T::lit(1500.0) }
    }
}

impl<T: Real> EloConfig<T> {
    pub fn new(k_factor: T, initial_rating: T) -> Result<Self> {
        if !(k_factor > T::zero()) || !k_factor.is_finite() {
            return Err(Error::invalid(format!("k_factor must be positive, got {k_factor}")));
        }
        if !initial_rating.is_finite() {
            return Err(Error::invalid("initial_rating must be finite"));
        }
        Ok(Self { k_factor, initial_rating })
    }
}

/// Result of a match from A's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Score {
    Win,
    Draw,
    Loss,
}

impl Score {
    pub fn value<T: Real>(self) -> T {
        match self {
            Score::Win => T::one(),
            Score::Draw => T::lit(0.5),
            Score::Loss => T::zero(),
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Score::Win => Score::Loss,
            Score::Draw => Score::Draw,
            Score::Loss => Score::Win,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchOutcome {
    pub system_a: String,
    pub system_b: String,
    /// `None` when the judgment was NOT_APPLICABLE and the match is omitted.
    pub score_a: Option<Score>,
}

impl MatchOutcome {
    pub fn score_b(&self) -> Option<Score> {
        self.score_a.map(Score::flipped)
    }
}

/// Probability that a player rated `r_i` beats one rated `r_j`.
pub fn expected_score<T: Real>(r_i: T, r_j: T) -> Result<T> {
    if !r_i.is_finite() || !r_j.is_finite() {
        return Err(Error::invalid("ratings must be finite"));
    }
    let exponent = (r_j - r_i) / T::lit(400.0);
    Ok(T::one() / (T::one() + T::lit(10.0).powf(exponent)))
}

/// A≫B / A>B win for A, A<B / A≪B loss, A=B and None draw, NA omitted.
pub fn outcome_from_judgment(j: JudgmentOption) -> Option<Score> {
    match j {
        JudgmentOption::AMuchBetter | JudgmentOption::ABetter => Some(Score::Win),
        JudgmentOption::Equal | JudgmentOption::None => Some(Score::Draw),
        JudgmentOption::BBetter | JudgmentOption::BMuchBetter => Some(Score::Loss),
        JudgmentOption::NotApplicable => None,
    }
}

/// One ELO step with the same K for both sides.
///
/// B's change is written as the negation of A's, which is what K·(S_j − E_j)
/// evaluates to, so the pair sum is conserved up to one rounding per side.
pub fn update<T: Real>(r_i: T, r_j: T, score_a: Score, cfg: &EloConfig<T>) -> Result<(T, T)> {
    let e_i = expected_score(r_i, r_j)?;
    let delta = cfg.k_factor * (score_a.value::<T>() - e_i);
    Ok((r_i + delta, r_j - delta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingState<T> {
    pub system_id: String,
    pub criterion: Criterion,
    /// `None` means all query types.
    pub query_filter: Option<QueryType>,
    pub value: T,
    pub match_count: u64,
}

/// What to do with amendment records when replaying.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmendmentPolicy {
    /// Amendments never enter the ladder.
    #[default]
    Ignore,
    /// The latest amendment's judgments replace those of the record it amends,
    /// at the original's position in the order.
    Replace,
}

impl std::str::FromStr for AmendmentPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ignore" => Ok(AmendmentPolicy::Ignore),
            "replace" => Ok(AmendmentPolicy::Replace),
            _ => Err(Error::invalid(format!("unknown amendment policy `{s}` (expected ignore|replace)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReplayFilter {
    pub query_type: Option<QueryType>,
    pub genre: Option<String>,
    pub amendments: AmendmentPolicy,
}

impl ReplayFilter {
    pub fn with_query_type(mut self, qt: Option<QueryType>) -> Self {
        self.query_type = qt;
        self
    }

    pub fn with_genre(mut self, genre: Option<String>) -> Self {
        self.genre = genre;
        self
    }

    fn admits(&self, rec: &AnnotationRecord) -> bool {
        self.query_type.is_none_or(|qt| qt == rec.query_type)
            && self.genre.as_deref().is_none_or(|g| g == rec.genre)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leaderboard<T> {
    pub criterion: Criterion,
    pub query_filter: Option<QueryType>,
    pub genre: Option<String>,
    pub entries: Vec<RatingState<T>>,
    /// Annotations that produced a rating change (NA excluded).
    pub consumed: u64,
}

impl<T: Real> Leaderboard<T> {
    pub fn get(&self, system: &str) -> Option<&RatingState<T>> {
        self.entries.iter().find(|e| e.system_id == system)
    }

    pub fn value(&self, system: &str) -> Option<T> {
        self.get(system).map(|e| e.value)
    }
}

/// Sorted, de-duplicated system ids appearing in the log.
pub fn systems_in(log: &[AnnotationRecord]) -> Vec<String> {
    let set: BTreeSet<&str> =
        log.iter().flat_map(|r| [r.system_a.as_str(), r.system_b.as_str()]).collect();
    set.into_iter().map(str::to_owned).collect()
}

/// Checks that the log is strictly increasing in `(timestamp_ms, annotation_id)`.
pub fn check_sorted(log: &[AnnotationRecord]) -> Result<()> {
    for (i, pair) in log.windows(2).enumerate() {
        if pair[1].order_key() <= pair[0].order_key() {
            return Err(Error::invalid(format!(
                "annotation log not sorted at record {} (annotation {} after {})",
                i + 2,
                pair[1].annotation_id,
                pair[0].annotation_id
            )));
        }
    }
    Ok(())
}

/// Replays `log` in order into one ladder for `criterion`.
///
/// Every system in `systems` appears in the output, in that order, starting at
/// the configured initial rating.
pub fn replay<T: Real>(
    log: &[AnnotationRecord],
    systems: &[String],
    criterion: Criterion,
    filter: &ReplayFilter,
    cfg: &EloConfig<T>,
) -> Result<Leaderboard<T>> {
    check_sorted(log)?;

    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, s) in systems.iter().enumerate() {
        if index.insert(s.as_str(), i).is_some() {
            return Err(Error::invalid(format!("system `{s}` listed twice")));
        }
    }

    let replacements: BTreeMap<u64, &AnnotationRecord> = match filter.amendments {
        AmendmentPolicy::Ignore => BTreeMap::new(),
        AmendmentPolicy::Replace => log
            .iter()
            .filter(|r| r.kind == RecordKind::Amendment)
            .filter_map(|r| r.amends.map(|orig| (orig, r)))
            .collect(),
    };

    let mut values = vec![cfg.initial_rating; systems.len()];
    let mut counts = vec![0u64; systems.len()];
    let mut consumed = 0u64;

    for rec in log {
        if rec.kind == RecordKind::Amendment || !filter.admits(rec) {
            continue;
        }
        let lookup = |s: &str| {
            index.get(s).copied().ok_or_else(|| {
                Error::data(format!("annotation {} references unknown system `{s}`", rec.annotation_id))
            })
        };
        let a = lookup(&rec.system_a)?;
        let b = lookup(&rec.system_b)?;
        if a == b {
            return Err(Error::data(format!("annotation {} pits `{}` against itself", rec.annotation_id, rec.system_a)));
        }
        let judgments = replacements.get(&rec.annotation_id).map_or(rec.judgments, |r| r.judgments);
        let Some(score) = outcome_from_judgment(judgments.get(criterion)) else {
            continue;
        };
        let (ra, rb) = update(values[a], values[b], score, cfg)?;
        values[a] = ra;
        values[b] = rb;
        counts[a] += 1;
        counts[b] += 1;
        consumed += 1;
    }

    let entries = systems
        .iter()
        .zip(values.into_iter().zip(counts))
        .map(|(s, (value, match_count))| RatingState {
            system_id: s.clone(),
            criterion,
            query_filter: filter.query_type,
            value,
            match_count,
        })
        .collect();

    Ok(Leaderboard {
        criterion,
        query_filter: filter.query_type,
        genre: filter.genre.clone(),
        entries,
        consumed,
    })
}

/// Min-max maps a ladder onto [0, 100]. A degenerate range (one system, or
/// all equal) maps everything to 100.
pub fn scale_ratings<T: Real>(board: &Leaderboard<T>) -> Result<Vec<T>> {
    if board.entries.is_empty() {
        return Err(Error::invalid("cannot scale an empty leaderboard"));
    }
    let lo = board.entries.iter().map(|e| e.value).fold(T::infinity(), T::min);
    let hi = board.entries.iter().map(|e| e.value).fold(T::neg_infinity(), T::max);
    let hundred = T::lit(100.0);
    let range = hi - lo;
    Ok(board
        .entries
        .iter()
        .map(|e| if range > T::zero() { (e.value - lo) / range * hundred } else { hundred })
        .collect())
}

/// `system, criterion, query_type, raw_elo, scaled_elo, match_count`
pub fn leaderboard_table<T: Real>(board: &Leaderboard<T>) -> Table {
    let mut table =
        Table::new(["system", "criterion", "query_type", "raw_elo", "scaled_elo", "match_count"]);
    let Ok(scaled) = scale_ratings(board) else {
        return table;
    };
    let qt = board.query_filter.map_or("all", QueryType::as_str);
    for (e, s) in board.entries.iter().zip(scaled) {
        table.push([
            e.system_id.clone(),
            board.criterion.to_string(),
            qt.to_string(),
            fmt_num(e.value.to_f64().unwrap_or(f64::NAN), 4),
            fmt_num(s.to_f64().unwrap_or(f64::NAN), 2),
            e.match_count.to_string(),
        ]);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::Judgments;

    fn rec(id: u64, a: &str, b: &str, j: JudgmentOption) -> AnnotationRecord {
        AnnotationRecord {
            annotation_id: id,
            match_id: format!("m{id}"),
            annotator_id: "ann".into(),
            judgments: Judgments::uniform(j),
            timestamp_ms: id * 10,
            phase: 2,
            kind: RecordKind::Annotation,
            amends: None,
            system_a: a.into(),
            system_b: b.into(),
            genre: "Makam".into(),
            query_type: QueryType::Recall,
            prompt_id: "q".into(),
        }
    }

    #[test]
    fn expected_score_examples() {
        assert_eq!(expected_score(1500.0, 1500.0).unwrap(), 0.5);
        let e: f64 = expected_score(1500.0, 1900.0).unwrap();
        assert!((e - 1.0 / 11.0).abs() < 1e-15);
        let (a, b): (f64, f64) = (expected_score(1600.0, 1450.0).unwrap(), expected_score(1450.0, 1600.0).unwrap());
        assert!((a + b - 1.0).abs() < 1e-15);
        assert!(expected_score(f64::NAN, 1500.0).is_err());
        assert!(expected_score(1500.0, f64::INFINITY).is_err());
    }

    #[test]
    fn outcome_mapping() {
        use JudgmentOption::*;
        assert_eq!(outcome_from_judgment(AMuchBetter), Some(Score::Win));
        assert_eq!(outcome_from_judgment(ABetter), Some(Score::Win));
        assert_eq!(outcome_from_judgment(Equal), Some(Score::Draw));
        assert_eq!(outcome_from_judgment(None), Some(Score::Draw));
        assert_eq!(outcome_from_judgment(BBetter), Some(Score::Loss));
        assert_eq!(outcome_from_judgment(BMuchBetter), Some(Score::Loss));
        assert_eq!(outcome_from_judgment(NotApplicable), Option::None);
    }

    #[test]
    fn update_examples() {
        let cfg = EloConfig::<f64>::default();
        assert_eq!(update(1500.0, 1500.0, Score::Win, &cfg).unwrap(), (1507.5, 1492.5));
        assert_eq!(update(1500.0, 1500.0, Score::Draw, &cfg).unwrap(), (1500.0, 1500.0));
        let (a, b) = update(1612.0, 1433.0, Score::Loss, &cfg).unwrap();
        assert!((a + b - 3045.0).abs() < 1e-9);
    }

    #[test]
    fn config_validation() {
        assert!(EloConfig::new(0.0f64, 1500.0).is_err());
        assert!(EloConfig::new(-1.0f64, 1500.0).is_err());
        assert!(EloConfig::new(15.0f64, f64::NAN).is_err());
        let d = EloConfig::<f64>::default();
        assert_eq!((d.k_factor, d.initial_rating), (15.0, 1500.0));
    }

    #[test]
    fn empty_log_leaves_everyone_at_initial() {
        let systems = vec!["X".to_string(), "Y".to_string()];
        let board = replay::<f64>(&[], &systems, Criterion::OA, &ReplayFilter::default(), &EloConfig::default()).unwrap();
        assert!(board.entries.iter().all(|e| e.value == 1500.0 && e.match_count == 0));
        assert_eq!(scale_ratings(&board).unwrap(), vec![100.0, 100.0]);
    }

    #[test]
    fn na_is_omitted() {
        let log = vec![rec(1, "X", "Y", JudgmentOption::NotApplicable), rec(2, "X", "Y", JudgmentOption::ABetter)];
        let systems = systems_in(&log);
        let board = replay::<f64>(&log, &systems, Criterion::MC, &ReplayFilter::default(), &EloConfig::default()).unwrap();
        assert_eq!(board.consumed, 1);
        assert_eq!(board.get("X").unwrap().match_count, 1);
        assert_eq!(board.value("X"), Some(1507.5));
    }

    #[test]
    fn unknown_system_and_unsorted_log() {
        let log = vec![rec(1, "X", "Z", JudgmentOption::ABetter)];
        let err = replay::<f64>(&log, &["X".into(), "Y".into()], Criterion::OA, &ReplayFilter::default(), &EloConfig::default());
        assert!(matches!(err, Err(Error::Data(_))));

        let log = vec![rec(2, "X", "Y", JudgmentOption::ABetter), rec(1, "X", "Y", JudgmentOption::ABetter)];
        let err = replay::<f64>(&log, &systems_in(&log), Criterion::OA, &ReplayFilter::default(), &EloConfig::default());
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn amendments_ignored_or_replacing() {
        let mut amend = rec(3, "X", "Y", JudgmentOption::BMuchBetter);
        amend.kind = RecordKind::Amendment;
        amend.amends = Some(1);
        let log = vec![rec(1, "X", "Y", JudgmentOption::ABetter), rec(2, "X", "Y", JudgmentOption::Equal), amend];
        let systems = systems_in(&log);
        let cfg = EloConfig::<f64>::default();
        let ignore = replay(&log, &systems, Criterion::OA, &ReplayFilter::default(), &cfg).unwrap();
        assert_eq!(ignore.consumed, 2);
        assert!(ignore.value("X").unwrap() > 1500.0);
        let filter = ReplayFilter { amendments: AmendmentPolicy::Replace, ..ReplayFilter::default() };
        let replaced = replay(&log, &systems, Criterion::OA, &filter, &cfg).unwrap();
        assert_eq!(replaced.consumed, 2);
        assert!(replaced.value("X").unwrap() < 1500.0);
    }

    #[test]
    fn scaling_examples() {
        let mk = |vals: &[f64]| Leaderboard {
            criterion: Criterion::OA,
            query_filter: None,
            genre: None,
            consumed: 0,
            entries: vals
                .iter()
                .enumerate()
                .map(|(i, &v)| RatingState { system_id: format!("s{i}"), criterion: Criterion::OA, query_filter: None, value: v, match_count: 0 })
                .collect(),
        };
        assert_eq!(scale_ratings(&mk(&[1400.0, 1500.0, 1600.0])).unwrap(), vec![0.0, 50.0, 100.0]);
        assert_eq!(scale_ratings(&mk(&[1510.0, 1510.0])).unwrap(), vec![100.0, 100.0]);
        assert_eq!(scale_ratings(&mk(&[1490.0])).unwrap(), vec![100.0]);
        assert!(scale_ratings(&mk(&[])).is_err());
    }

    #[test]
    fn table_shape() {
        let log = vec![rec(1, "X", "Y", JudgmentOption::AMuchBetter)];
        let board = replay::<f64>(&log, &systems_in(&log), Criterion::RC, &ReplayFilter::default(), &EloConfig::default()).unwrap();
        let t = leaderboard_table(&board).to_string();
        let mut lines = t.lines();
        assert_eq!(lines.next(), Some("system\tcriterion\tquery_type\traw_elo\tscaled_elo\tmatch_count"));
        assert_eq!(lines.next(), Some("X\tRC\tall\t1507.5000\t100.00\t1"));
        assert_eq!(lines.next(), Some("Y\tRC\tall\t1492.5000\t0.00\t1"));
    }

    #[test]
    fn works_in_f32() {
        let cfg = EloConfig::<f32>::default();
        assert_eq!(update(1500.0f32, 1500.0, Score::Win, &cfg).unwrap(), (1507.5, 1492.5));
    }
}
