//! Annotator-facing vocabulary: left/right answers, clip ids and match views.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use arena_core::annotation::Judgments;
use arena_core::{Criterion, JudgmentOption};

use crate::schedule::{Match, Side};

/// An answer as the annotator sees it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViewOption {
    LeftMuchBetter,
    LeftBetter,
    Equal,
    RightBetter,
    RightMuchBetter,
    None,
    NotApplicable,
}

impl ViewOption {
    pub const ALL: [ViewOption; 7] = [
        ViewOption::LeftMuchBetter,
        ViewOption::LeftBetter,
        ViewOption::Equal,
        ViewOption::RightBetter,
        ViewOption::RightMuchBetter,
        ViewOption::None,
        ViewOption::NotApplicable,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ViewOption::LeftMuchBetter => "Left ≫ Right",
            ViewOption::LeftBetter => "Left > Right",
            ViewOption::Equal => "Left = Right",
            ViewOption::RightBetter => "Left < Right",
            ViewOption::RightMuchBetter => "Left ≪ Right",
            ViewOption::None => "None",
            ViewOption::NotApplicable => "Not applicable",
        }
    }

    /// Maps into system space given which system played on the left.
    pub fn unmap(self, left: Side) -> JudgmentOption {
        let as_a = match self {
            ViewOption::LeftMuchBetter => JudgmentOption::AMuchBetter,
            ViewOption::LeftBetter => JudgmentOption::ABetter,
            ViewOption::Equal => JudgmentOption::Equal,
            ViewOption::RightBetter => JudgmentOption::BBetter,
            ViewOption::RightMuchBetter => JudgmentOption::BMuchBetter,
            ViewOption::None => JudgmentOption::None,
            ViewOption::NotApplicable => JudgmentOption::NotApplicable,
        };
        match left {
            Side::A => as_a,
            Side::B => as_a.mirrored(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewJudgments {
    #[serde(rename = "OA")]
    pub oa: ViewOption,
    #[serde(rename = "Inst")]
    pub inst: ViewOption,
    #[serde(rename = "MC")]
    pub mc: ViewOption,
    #[serde(rename = "RC")]
    pub rc: ViewOption,
    #[serde(rename = "CR")]
    pub cr: ViewOption,
}

impl ViewJudgments {
    pub fn uniform(v: ViewOption) -> Self {
        Self { oa: v, inst: v, mc: v, rc: v, cr: v }
    }

    pub fn unmap(&self, left: Side) -> Judgments {
        Judgments {
            oa: self.oa.unmap(left),
            inst: self.inst.unmap(left),
            mc: self.mc.unmap(left),
            rc: self.rc.unmap(left),
            cr: self.cr.unmap(left),
        }
    }
}

/// Opaque clip id: a salted hash of system and prompt.
pub fn clip_id(salt: &str, system: &str, prompt_id: &str) -> String {
    let mut h = Sha256::new();
    for part in [salt, system, prompt_id] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())[..24].to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub done: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub criterion: Criterion,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionView {
    pub value: ViewOption,
    pub label: String,
}

/// What an annotator sees: the prompt, two clips and the questions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchView {
    pub match_id: String,
    pub prompt_text: String,
    pub clip_left_url: String,
    pub clip_right_url: String,
    pub questions: Vec<Question>,
    pub options: Vec<OptionView>,
    pub progress: Progress,
}

pub fn audio_url(clip: &str) -> String {
    format!("/api/v1/audio/{clip}")
}

pub fn match_view(m: &Match, salt: &str, progress: Progress) -> MatchView {
    let clip_a = clip_id(salt, &m.system_a, &m.prompt_id);
    let clip_b = clip_id(salt, &m.system_b, &m.prompt_id);
    let (left, right) = match m.presented_left {
        Side::A => (clip_a, clip_b),
        Side::B => (clip_b, clip_a),
    };
    MatchView {
        match_id: m.match_id.clone(),
        prompt_text: m.prompt_text.clone(),
        clip_left_url: audio_url(&left),
        clip_right_url: audio_url(&right),
        questions: Criterion::ALL.iter().map(|&c| Question { criterion: c, text: c.question().to_string() }).collect(),
        options: ViewOption::ALL.iter().map(|&v| OptionView { value: v, label: v.label().to_string() }).collect(),
        progress,
    }
}
