//! Vocabulary shared by the arena protocol: criteria, the seven answer
//! options, query types and phases.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The five comparative questions asked for every match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Criterion {
    /// Overall aesthetic.
    OA,
    /// Instrument accuracy.
    Inst,
    /// Melody capture.
    MC,
    /// Rhythm capture.
    RC,
    /// Creativity.
    CR,
}

impl Criterion {
    pub const ALL: [Criterion; 5] = [
        Criterion::OA,
        Criterion::Inst,
        Criterion::MC,
        Criterion::RC,
        Criterion::CR,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::OA => "OA",
            Criterion::Inst => "Inst",
            Criterion::MC => "MC",
            Criterion::RC => "RC",
            Criterion::CR => "CR",
        }
    }

    pub fn question(self) -> &'static str {
        match self {
            Criterion::OA => "Overall, which piece do you like more?",
            Criterion::Inst => "Which piece captures the instrument (if mentioned in the prompt) better?",
            Criterion::MC => "Which piece captures the melodic line/scale (if mentioned in the prompt) better?",
            Criterion::RC => "Which piece captures the rhythm/tempo (if mentioned in the prompt) better?",
            Criterion::CR => "Which piece is more creative (ignore audio quality while answering this question)?",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "oa" => Ok(Criterion::OA),
            "inst" | "inst." => Ok(Criterion::Inst),
            "mc" => Ok(Criterion::MC),
            "rc" => Ok(Criterion::RC),
            "cr" => Ok(Criterion::CR),
            _ => Err(Error::invalid(format!("unknown criterion `{s}`"))),
        }
    }
}

/// One of the seven answers available for every criterion, in system space
/// (A and B are the two systems of the match, not screen positions).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JudgmentOption {
    AMuchBetter,
    ABetter,
    Equal,
    BBetter,
    BMuchBetter,
    None,
    NotApplicable,
}

impl JudgmentOption {
    pub const ALL: [JudgmentOption; 7] = [
        JudgmentOption::AMuchBetter,
        JudgmentOption::ABetter,
        JudgmentOption::Equal,
        JudgmentOption::BBetter,
        JudgmentOption::BMuchBetter,
        JudgmentOption::None,
        JudgmentOption::NotApplicable,
    ];

    /// The five options that carry an ordinal, strongest preference for A first.
    pub const COMPARATIVE: [JudgmentOption; 5] = [
        JudgmentOption::AMuchBetter,
        JudgmentOption::ABetter,
        JudgmentOption::Equal,
        JudgmentOption::BBetter,
        JudgmentOption::BMuchBetter,
    ];

    /// 2, 1, 0, -1, -2 for the comparative options; `None` otherwise.
    pub fn ordinal(self) -> Option<i8> {
        match self {
            JudgmentOption::AMuchBetter => Some(2),
            JudgmentOption::ABetter => Some(1),
            JudgmentOption::Equal => Some(0),
            JudgmentOption::BBetter => Some(-1),
            JudgmentOption::BMuchBetter => Some(-2),
            JudgmentOption::None | JudgmentOption::NotApplicable => None,
        }
    }

    /// Row/column position in a 5×5 agreement table.
    pub fn index(self) -> Option<usize> {
        self.ordinal().map(|o| (2 - o) as usize)
    }

    pub fn is_comparative(self) -> bool {
        self.ordinal().is_some()
    }

    /// Same judgment with the roles of A and B exchanged.
    pub fn mirrored(self) -> Self {
        match self {
            JudgmentOption::AMuchBetter => JudgmentOption::BMuchBetter,
            JudgmentOption::ABetter => JudgmentOption::BBetter,
            JudgmentOption::BBetter => JudgmentOption::ABetter,
            JudgmentOption::BMuchBetter => JudgmentOption::AMuchBetter,
            other => other,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            JudgmentOption::AMuchBetter => "A>>B",
            JudgmentOption::ABetter => "A>B",
            JudgmentOption::Equal => "A=B",
            JudgmentOption::BBetter => "A<B",
            JudgmentOption::BMuchBetter => "A<<B",
            JudgmentOption::None => "None",
            JudgmentOption::NotApplicable => "NA",
        }
    }
}

/// Evaluation query category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QueryType {
    Recall,
    Analysis,
    Creativity,
}

impl QueryType {
    pub const ALL: [QueryType; 3] = [QueryType::Recall, QueryType::Analysis, QueryType::Creativity];

    pub fn as_str(self) -> &'static str {
        match self {
            QueryType::Recall => "Recall",
            QueryType::Analysis => "Analysis",
            QueryType::Creativity => "Creativity",
        }
    }
}

impl fmt::Display for QueryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QueryType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "recall" => Ok(QueryType::Recall),
            "analysis" => Ok(QueryType::Analysis),
            "creativity" => Ok(QueryType::Creativity),
            _ => Err(Error::invalid(format!("unknown query type `{s}`"))),
        }
    }
}

/// Parses an optional query-type filter where `all` (or empty) means no filter.
pub fn parse_query_filter(s: &str) -> Result<Option<QueryType>, Error> {
    match s.trim().to_ascii_lowercase().as_str() {
        "" | "all" | "*" => Ok(None),
        other => other.parse().map(Some),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordinals_and_indices() {
        let ords: Vec<_> = JudgmentOption::COMPARATIVE.iter().map(|j| j.ordinal().unwrap()).collect();
        assert_eq!(ords, vec![2, 1, 0, -1, -2]);
        for (i, j) in JudgmentOption::COMPARATIVE.iter().enumerate() {
            assert_eq!(j.index(), Some(i));
        }
        assert_eq!(JudgmentOption::None.ordinal(), None);
        assert_eq!(JudgmentOption::NotApplicable.index(), None);
    }

    #[test]
    fn serde_names() {
        let s = serde_json::to_string(&JudgmentOption::AMuchBetter).unwrap();
        assert_eq!(s, "\"A_MUCH_BETTER\"");
        let j: JudgmentOption = serde_json::from_str("\"NOT_APPLICABLE\"").unwrap();
        assert_eq!(j, JudgmentOption::NotApplicable);
    }

    #[test]
    fn mirrored_is_involution() {
        for j in JudgmentOption::ALL {
            assert_eq!(j.mirrored().mirrored(), j);
        }
    }

    #[test]
    fn parse_criterion_and_filter() {
        assert_eq!("inst".parse::<Criterion>().unwrap(), Criterion::Inst);
        assert!("tempo".parse::<Criterion>().is_err());
        assert_eq!(parse_query_filter("all").unwrap(), None);
        assert_eq!(parse_query_filter("Recall").unwrap(), Some(QueryType::Recall));
    }
}
