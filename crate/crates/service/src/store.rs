//! Durable state: append-only JSONL files under the data root plus the
//! in-memory indexes rebuilt from them on open.
//!
//! | file                | record                               |
//! |---------------------|--------------------------------------|
//! | `matches.jsonl`     | [`Match`]                            |
//! | `assignments.jsonl` | [`Assignment`], written before serving |
//! | `annotations.jsonl` | `AnnotationRecord`, system space     |
//! | `clips.jsonl`       | [`ClipEntry`], clip id → audio path  |
//! | `queries.jsonl`     | `EvalQuery`, optional schedule input |
//! | `salt`              | clip-id salt                         |
//!
//! Audio for system `S` and prompt `P` is expected at `audio/S/P.wav`.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use arena_core::agreement::{kappa, paired_judgments, AgreementKind, AgreementMatrix, KappaReport};
use arena_core::annotation::{AnnotationRecord, RecordKind};
use arena_core::prompts::EvalQuery;
use arena_core::ratings::{replay, scale_ratings, AmendmentPolicy, EloConfig, ReplayFilter};
use arena_core::{Criterion, QueryType};

use crate::blind::{clip_id, match_view, MatchView, Progress, ViewJudgments};
use crate::error::{ServiceError, ServiceResult};
use crate::schedule::{schedule, Match, ScheduleConfig};

pub const MATCHES_FILE: &str = "matches.jsonl";
pub const ASSIGNMENTS_FILE: &str = "assignments.jsonl";
pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";
pub const CLIPS_FILE: &str = "clips.jsonl";
pub const QUERIES_FILE: &str = "queries.jsonl";
const SALT_FILE: &str = "salt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub match_id: String,
    pub annotator_id: String,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipEntry {
    pub clip_id: String,
    /// Relative to the data root.
    pub path: String,
}

/// Body of `POST /api/v1/annotations`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub match_id: String,
    pub annotator_id: String,
    pub judgments: ViewJudgments,
    /// Re-annotation of a match this annotator already answered.
    #[serde(default)]
    pub amend: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub annotation_id: u64,
    pub match_id: String,
    pub timestamp_ms: u64,
    pub kind: RecordKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LeaderboardQuery {
    pub criterion: Criterion,
    pub query_type: Option<QueryType>,
    pub genre: Option<String>,
    pub amendments: AmendmentPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub system: String,
    pub raw_elo: f64,
    pub scaled_elo: f64,
    pub match_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardResponse {
    pub criterion: Criterion,
    pub query_type: Option<QueryType>,
    pub genre: Option<String>,
    pub consumed: u64,
    /// Highest raw rating first.
    pub entries: Vec<LeaderboardEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleOutcome {
    pub created: usize,
    pub match_ids: Vec<String>,
}

/// Reads a JSONL file, tolerating one torn final line (a crash mid-append):
/// the fragment is cut off so later appends start on a clean line.
fn load_jsonl<T: DeserializeOwned>(path: &Path) -> ServiceResult<Vec<T>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut out = Vec::new();
    let mut offset = 0usize;
    for (idx, line) in text.split_inclusive('\n').enumerate() {
        let complete = line.ends_with('\n');
        let body = line.trim();
        if !body.is_empty() {
            match serde_json::from_str(body) {
                Ok(v) => out.push(v),
                Err(e) if complete => {
                    return Err(arena_core::Error::Parse {
                        line: idx + 1,
                        message: format!("{}: {e}", path.display()),
                    }
                    .into())
                }
                Err(_) => {
                    tracing::warn!(file = %path.display(), "dropping torn final line");
                    OpenOptions::new().write(true).open(path)?.set_len(offset as u64)?;
                    return Ok(out);
                }
            }
        }
        if !complete {
            OpenOptions::new().append(true).open(path)?.write_all(b"\n")?;
        }
        offset += line.len();
    }
    Ok(out)
}

struct Appender {
    file: File,
}

impl Appender {
    fn open(path: &Path) -> io::Result<Self> {
        Ok(Self { file: OpenOptions::new().create(true).append(true).open(path)? })
    }

    fn append<T: Serialize>(&mut self, records: &[T]) -> ServiceResult<()> {
        let mut buf = String::new();
        for r in records {
            buf.push_str(&serde_json::to_string(r).map_err(io::Error::other)?);
            buf.push('\n');
        }
        self.file.write_all(buf.as_bytes())?;
        self.file.sync_data()?;
        Ok(())
    }
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

pub struct Store {
    dir: PathBuf,
    salt: String,
    matches: Vec<Match>,
    match_index: HashMap<String, usize>,
    /// Annotators assigned to each match, in assignment order.
    assignments: HashMap<String, Vec<String>>,
    /// (match, annotator) → id of the original annotation.
    answered: HashMap<(String, String), u64>,
    clips: HashMap<String, String>,
    log: Vec<AnnotationRecord>,
    next_annotation_id: u64,
    last_ts: u64,
    cache: HashMap<LeaderboardQuery, LeaderboardResponse>,
    elo: EloConfig<f64>,
    matches_out: Appender,
    assignments_out: Appender,
    annotations_out: Appender,
    clips_out: Appender,
}

impl Store {
    /// Opens (creating if needed) the data root and rebuilds state from its logs.
    pub fn open(dir: impl AsRef<Path>) -> ServiceResult<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let salt_path = dir.join(SALT_FILE);
        let salt = match fs::read_to_string(&salt_path) {
            Ok(s) if !s.trim().is_empty() => s.trim().to_string(),
            _ => {
                let bytes: [u8; 16] = rand::random();
                let s = hex::encode(bytes);
                fs::write(&salt_path, format!("{s}\n"))?;
                s
            }
        };

        let matches: Vec<Match> = load_jsonl(&dir.join(MATCHES_FILE))?;
        let assignment_log: Vec<Assignment> = load_jsonl(&dir.join(ASSIGNMENTS_FILE))?;
        let log: Vec<AnnotationRecord> = load_jsonl(&dir.join(ANNOTATIONS_FILE))?;
        let clip_log: Vec<ClipEntry> = load_jsonl(&dir.join(CLIPS_FILE))?;

        let mut store = Self {
            matches_out: Appender::open(&dir.join(MATCHES_FILE))?,
            assignments_out: Appender::open(&dir.join(ASSIGNMENTS_FILE))?,
            annotations_out: Appender::open(&dir.join(ANNOTATIONS_FILE))?,
            clips_out: Appender::open(&dir.join(CLIPS_FILE))?,
            dir,
            salt,
            matches: Vec::new(),
            match_index: HashMap::new(),
            assignments: HashMap::new(),
            answered: HashMap::new(),
            clips: clip_log.into_iter().map(|c| (c.clip_id, c.path)).collect(),
            log: Vec::new(),
            next_annotation_id: 1,
            last_ts: 0,
            cache: HashMap::new(),
            elo: EloConfig::default(),
        };
        for m in matches {
            store.index_match(m)?;
        }
        for a in assignment_log {
            store.assignments.entry(a.match_id).or_default().push(a.annotator_id);
            store.last_ts = store.last_ts.max(a.timestamp_ms);
        }
        for rec in log {
            store.index_annotation(&rec);
            store.log.push(rec);
        }
        arena_core::ratings::check_sorted(&store.log)?;
        Ok(store)
    }

    fn index_match(&mut self, m: Match) -> ServiceResult<()> {
        if self.match_index.contains_key(&m.match_id) {
            return Err(arena_core::Error::DuplicateId(m.match_id).into());
        }
        self.match_index.insert(m.match_id.clone(), self.matches.len());
        self.matches.push(m);
        Ok(())
    }

    fn index_annotation(&mut self, rec: &AnnotationRecord) {
        if rec.kind == RecordKind::Annotation {
            self.answered.insert((rec.match_id.clone(), rec.annotator_id.clone()), rec.annotation_id);
        }
        self.next_annotation_id = self.next_annotation_id.max(rec.annotation_id + 1);
        self.last_ts = self.last_ts.max(rec.timestamp_ms);
    }

    fn tick(&mut self) -> u64 {
        self.last_ts = now_ms().max(self.last_ts + 1);
        self.last_ts
    }

    pub fn data_dir(&self) -> &Path {
        &self.dir
    }

    pub fn log(&self) -> &[AnnotationRecord] {
        &self.log
    }

    pub fn matches(&self) -> &[Match] {
        &self.matches
    }

    pub fn queries_on_disk(&self) -> ServiceResult<Vec<EvalQuery>> {
        Ok(load_jsonl(&self.dir.join(QUERIES_FILE))?)
    }

    /// Appends a new batch of matches and registers their clips.
    pub fn schedule(&mut self, cfg: &ScheduleConfig, queries: &[EvalQuery], seed: u64) -> ServiceResult<ScheduleOutcome> {
        let batch = schedule(cfg, queries, seed, self.matches.len() as u64)?;
        if let Some(m) = batch.iter().find(|m| self.match_index.contains_key(&m.match_id)) {
            return Err(ServiceError::Conflict(format!("match `{}` already exists", m.match_id)));
        }
        let mut clips = Vec::new();
        let mut seen = HashSet::new();
        for m in &batch {
            for system in [&m.system_a, &m.system_b] {
                let id = clip_id(&self.salt, system, &m.prompt_id);
                if !self.clips.contains_key(&id) && seen.insert(id.clone()) {
                    clips.push(ClipEntry { clip_id: id, path: format!("audio/{system}/{}.wav", m.prompt_id) });
                }
            }
        }
        self.clips_out.append(&clips)?;
        self.matches_out.append(&batch)?;
        for c in clips {
            self.clips.insert(c.clip_id, c.path);
        }
        let match_ids = batch.iter().map(|m| m.match_id.clone()).collect();
        let created = batch.len();
        for m in batch {
            self.index_match(m)?;
        }
        Ok(ScheduleOutcome { created, match_ids })
    }

    fn is_open_to(&self, m: &Match, annotator: &str) -> bool {
        if self.answered.contains_key(&(m.match_id.clone(), annotator.to_string())) {
            return false;
        }
        let assigned = self.assignments.get(&m.match_id).map(Vec::as_slice).unwrap_or_default();
        assigned.iter().any(|a| a == annotator) || assigned.len() < m.annotators_per_match as usize
    }

    pub fn progress(&self, annotator: &str) -> Progress {
        let done = self.matches.iter().filter(|m| self.answered.contains_key(&(m.match_id.clone(), annotator.to_string()))).count();
        let open = self.matches.iter().filter(|m| self.is_open_to(m, annotator)).count();
        Progress { done, total: done + open }
    }

    /// Lowest-ordinal match still open to `annotator`. The assignment is
    /// made durable before the view is returned.
    pub fn next_match(&mut self, annotator: &str) -> ServiceResult<(Option<MatchView>, Progress)> {
        validate_annotator(annotator)?;
        let Some(idx) = self.matches.iter().position(|m| self.is_open_to(m, annotator)) else {
            return Ok((None, self.progress(annotator)));
        };
        let match_id = self.matches[idx].match_id.clone();
        let assigned = self.assignments.get(&match_id).is_some_and(|v| v.iter().any(|a| a == annotator));
        if !assigned {
            let timestamp_ms = self.tick();
            let a = Assignment { match_id: match_id.clone(), annotator_id: annotator.to_string(), timestamp_ms };
            self.assignments_out.append(std::slice::from_ref(&a))?;
            self.assignments.entry(match_id).or_default().push(annotator.to_string());
        }
        let progress = self.progress(annotator);
        Ok((Some(match_view(&self.matches[idx], &self.salt, progress.clone())), progress))
    }

    pub fn submit(&mut self, sub: &Submission) -> ServiceResult<Ack> {
        validate_annotator(&sub.annotator_id)?;
        let m = self
            .match_index
            .get(&sub.match_id)
            .map(|&i| self.matches[i].clone())
            .ok_or_else(|| ServiceError::NotFound(format!("match `{}`", sub.match_id)))?;
        let served = self.assignments.get(&m.match_id).is_some_and(|v| v.iter().any(|a| *a == sub.annotator_id));
        if !served {
            return Err(ServiceError::Conflict(format!(
                "match `{}` was not served to annotator `{}`",
                m.match_id, sub.annotator_id
            )));
        }
        let key = (m.match_id.clone(), sub.annotator_id.clone());
        let (kind, amends) = match (self.answered.get(&key), sub.amend) {
            (Some(_), false) => {
                return Err(ServiceError::Conflict(format!(
                    "annotator `{}` already annotated match `{}`",
                    sub.annotator_id, m.match_id
                )))
            }
            (None, true) => {
                return Err(ServiceError::invalid(format!(
                    "nothing to amend: annotator `{}` has not annotated match `{}`",
                    sub.annotator_id, m.match_id
                )))
            }
            (None, false) => (RecordKind::Annotation, None),
            (Some(&orig), true) => (RecordKind::Amendment, Some(orig)),
        };
        let timestamp_ms = self.tick();
        let rec = AnnotationRecord {
            annotation_id: self.next_annotation_id,
            match_id: m.match_id.clone(),
            annotator_id: sub.annotator_id.clone(),
            judgments: sub.judgments.unmap(m.presented_left),
            timestamp_ms,
            phase: m.phase,
            kind,
            amends,
            system_a: m.system_a.clone(),
            system_b: m.system_b.clone(),
            genre: m.genre.clone(),
            query_type: m.query_type,
            prompt_id: m.prompt_id.clone(),
        };
        self.annotations_out.append(std::slice::from_ref(&rec))?;
        self.index_annotation(&rec);
        self.log.push(rec.clone());
        self.cache.clear();
        Ok(Ack { annotation_id: rec.annotation_id, match_id: rec.match_id, timestamp_ms, kind })
    }

    pub fn leaderboard(&mut self, q: &LeaderboardQuery) -> ServiceResult<LeaderboardResponse> {
        if let Some(hit) = self.cache.get(q) {
            return Ok(hit.clone());
        }
        let resp = leaderboard_from_log(&self.log, q, &self.elo)?;
        self.cache.insert(q.clone(), resp.clone());
        Ok(resp)
    }

    pub fn iaa(&self, criterion: Criterion, kind: AgreementKind, genre: Option<&str>) -> ServiceResult<KappaReport<f64>> {
        iaa_from_log(&self.log, criterion, kind, genre)
    }

    pub fn audio_path(&self, clip: &str) -> Option<PathBuf> {
        self.clips.get(clip).map(|p| self.dir.join(p))
    }
}

fn validate_annotator(id: &str) -> ServiceResult<()> {
    if id.trim().is_empty() || id.len() > 128 || id.chars().any(|c| c.is_control() || c == '/') {
        return Err(ServiceError::invalid(format!("invalid annotator id `{id}`")));
    }
    Ok(())
}

/// Leaderboard over every system seen in the genre slice of the log.
pub fn leaderboard_from_log(
    log: &[AnnotationRecord],
    q: &LeaderboardQuery,
    elo: &EloConfig<f64>,
) -> ServiceResult<LeaderboardResponse> {
    let in_genre: Vec<AnnotationRecord> =
        log.iter().filter(|r| q.genre.as_deref().is_none_or(|g| g == r.genre)).cloned().collect();
    let systems = arena_core::ratings::systems_in(&in_genre);
    let filter = ReplayFilter { query_type: q.query_type, genre: q.genre.clone(), amendments: q.amendments };
    let board = replay(&in_genre, &systems, q.criterion, &filter, elo)?;
    let scaled = if systems.is_empty() { Vec::new() } else { scale_ratings(&board)? };
    let mut entries: Vec<LeaderboardEntry> = board
        .entries
        .iter()
        .zip(scaled)
        .map(|(e, s)| LeaderboardEntry { system: e.system_id.clone(), raw_elo: e.value, scaled_elo: s, match_count: e.match_count })
        .collect();
    entries.sort_by(|a, b| b.raw_elo.total_cmp(&a.raw_elo).then_with(|| a.system.cmp(&b.system)));
    Ok(LeaderboardResponse {
        criterion: q.criterion,
        query_type: q.query_type,
        genre: q.genre.clone(),
        consumed: board.consumed,
        entries,
    })
}

pub fn iaa_from_log(
    log: &[AnnotationRecord],
    criterion: Criterion,
    kind: AgreementKind,
    genre: Option<&str>,
) -> ServiceResult<KappaReport<f64>> {
    let pairs = paired_judgments(log, criterion, genre);
    let mut report = kappa(&pairs, &AgreementMatrix::<f64>::new(kind))?;
    report.criterion = Some(criterion);
    Ok(report)
}
