//! The append-only annotation log.
//!
//! Each line is one [`AnnotationRecord`]. Besides the annotation proper, a
//! record carries the match context (systems, genre, query type) resolved at
//! write time, so ratings and agreement can be recomputed from the log alone.

use serde::{Deserialize, Serialize};

use crate::protocol::{Criterion, JudgmentOption, QueryType};

/// Answers for all five criteria, in system space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgments {
    #[serde(rename = "OA")]
    pub oa: JudgmentOption,
    #[serde(rename = "Inst")]
    pub inst: JudgmentOption,
    #[serde(rename = "MC")]
    pub mc: JudgmentOption,
    #[serde(rename = "RC")]
    pub rc: JudgmentOption,
    #[serde(rename = "CR")]
    pub cr: JudgmentOption,
}

impl Judgments {
    pub fn uniform(j: JudgmentOption) -> Self {
        Self { oa: j, inst: j, mc: j, rc: j, cr: j }
    }

    pub fn get(&self, c: Criterion) -> JudgmentOption {
        match c {
            Criterion::OA => self.oa,
            Criterion::Inst => self.inst,
            Criterion::MC => self.mc,
            Criterion::RC => self.rc,
            Criterion::CR => self.cr,
        }
    }

    pub fn set(&mut self, c: Criterion, j: JudgmentOption) {
        match c {
            Criterion::OA => self.oa = j,
            Criterion::Inst => self.inst = j,
            Criterion::MC => self.mc = j,
            Criterion::RC => self.rc = j,
            Criterion::CR => self.cr = j,
        }
    }

    pub fn map(&self, f: impl Fn(JudgmentOption) -> JudgmentOption) -> Self {
        Self { oa: f(self.oa), inst: f(self.inst), mc: f(self.mc), rc: f(self.rc), cr: f(self.cr) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    #[default]
    Annotation,
    /// Re-annotation after disagreement resolution; points at the original
    /// through `amends`.
    Amendment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub annotation_id: u64,
    pub match_id: String,
    pub annotator_id: String,
    pub judgments: Judgments,
    pub timestamp_ms: u64,
    pub phase: u8,
    #[serde(default)]
    pub kind: RecordKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amends: Option<u64>,
    pub system_a: String,
    pub system_b: String,
    pub genre: String,
    pub query_type: QueryType,
    pub prompt_id: String,
}

impl AnnotationRecord {
    pub fn order_key(&self) -> (u64, u64) {
        (self.timestamp_ms, self.annotation_id)
    }
}
