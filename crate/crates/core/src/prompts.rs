//! Metadata-driven prompts.
//!
//! Templates are plain text with `{genre}`, `{instruments}`, `{melody}` and
//! `{rhythm}` slots. They fill training prompts (one random template per
//! track) and three families of evaluation queries:
//!
//! * Recall: attribute triples seen in training,
//! * Analysis: recombinations of attested values never seen together,
//! * Creativity: native attributes blended with another genre's.
//!
//! Template file format, one block per template:
//!
//! ```text
//! [template-id]
//! scope: Makam            # optional, genre the template is limited to
//! types: Recall, Analysis # optional, query types it may serve
//! Imagine a traditional {genre} performance ...
//! ```

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::TrackMetadata;
use crate::error::{Error, Result};
use crate::protocol::QueryType;

pub const SLOTS: [&str; 4] = ["genre", "instruments", "melody", "rhythm"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: String,
    pub text: String,
    /// `None` applies to every genre.
    pub genre_scope: Option<String>,
    /// Query types the template may serve; empty means all.
    pub query_types: Vec<QueryType>,
}

enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

fn pieces(text: &str) -> std::result::Result<Vec<Piece<'_>>, String> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let close = rest[open..].find('}').ok_or("unclosed `{`")? + open;
        if open > 0 {
            out.push(Piece::Text(&rest[..open]));
        }
        out.push(Piece::Slot(&rest[open + 1..close]));
        rest = &rest[close + 1..];
    }
    if !rest.is_empty() {
        out.push(Piece::Text(rest));
    }
    Ok(out)
}

impl PromptTemplate {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let t = Self { id: id.into(), text: text.into(), genre_scope: None, query_types: Vec::new() };
        t.validate()?;
        Ok(t)
    }

    pub fn with_scope(mut self, scope: impl Into<String>) -> Self {
        self.genre_scope = Some(scope.into());
        self
    }

    pub fn with_query_types(mut self, types: &[QueryType]) -> Self {
        self.query_types = types.to_vec();
        self
    }

    fn validate(&self) -> Result<()> {
        let err = |message: String| Error::Template { template: self.id.clone(), message };
        let mut seen = HashSet::new();
        for p in pieces(&self.text).map_err(|m| err(m.to_string()))? {
            if let Piece::Slot(s) = p {
                if !SLOTS.contains(&s) {
                    return Err(err(format!("unknown slot `{{{s}}}`")));
                }
                if !seen.insert(s) {
                    return Err(err(format!("slot `{{{s}}}` appears more than once")));
                }
            }
        }
        Ok(())
    }

    pub fn slots(&self) -> Vec<&str> {
        pieces(&self.text)
            .unwrap_or_default()
            .into_iter()
            .filter_map(|p| match p {
                Piece::Slot(s) => Some(s),
                Piece::Text(_) => None,
            })
            .collect()
    }

    fn applies_to(&self, genre: &str, qt: Option<QueryType>) -> bool {
        self.genre_scope.as_deref().is_none_or(|g| g.eq_ignore_ascii_case(genre))
            && qt.is_none_or(|qt| self.query_types.is_empty() || self.query_types.contains(&qt))
    }
}

/// The values that fill a template.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Attributes {
    pub genre: String,
    pub melody: String,
    pub rhythm: String,
    pub instruments: Vec<String>,
}

impl From<&TrackMetadata> for Attributes {
    fn from(t: &TrackMetadata) -> Self {
        Self {
            genre: t.genre.clone(),
            melody: t.melody.clone(),
            rhythm: t.rhythm.clone(),
            instruments: t.instruments.clone(),
        }
    }
}

/// Fills the template's slots in text order; instruments are comma-joined in
/// the order given.
pub fn render_prompt(template: &PromptTemplate, attrs: &Attributes) -> Result<String> {
    let parts = pieces(&template.text)
        .map_err(|m| Error::Template { template: template.id.clone(), message: m.to_string() })?;
    let mut out = String::with_capacity(template.text.len() + 64);
    for p in parts {
        match p {
            Piece::Text(t) => out.push_str(t),
            Piece::Slot(slot) => {
                let value = match slot {
                    "genre" => attrs.genre.clone(),
                    "melody" => attrs.melody.clone(),
                    "rhythm" => attrs.rhythm.clone(),
                    "instruments" => attrs.instruments.join(", "),
                    other => {
                        return Err(Error::Template {
                            template: template.id.clone(),
                            message: format!("unknown slot `{{{other}}}`"),
                        })
                    }
                };
                if value.trim().is_empty() {
                    return Err(Error::MissingSlot { template: template.id.clone(), slot: slot.to_string() });
                }
                out.push_str(&value);
            }
        }
    }
    Ok(out)
}

pub fn parse_templates(text: &str) -> Result<Vec<PromptTemplate>> {
    let mut out: Vec<PromptTemplate> = Vec::new();
    let mut current: Option<(PromptTemplate, Vec<String>)> = None;

    let finish = |cur: Option<(PromptTemplate, Vec<String>)>, out: &mut Vec<PromptTemplate>| -> Result<()> {
        if let Some((mut t, lines)) = cur {
            t.text = lines.join(" ");
            if t.text.is_empty() {
                return Err(Error::Template { template: t.id, message: "empty template text".into() });
            }
            t.validate()?;
            if out.iter().any(|o| o.id == t.id) {
                return Err(Error::DuplicateId(t.id));
            }
            out.push(t);
        }
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(id) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            finish(current.take(), &mut out)?;
            let t = PromptTemplate { id: id.trim().to_string(), text: String::new(), genre_scope: None, query_types: Vec::new() };
            current = Some((t, Vec::new()));
            continue;
        }
        let Some((t, lines)) = current.as_mut() else {
            return Err(Error::Parse { line: idx + 1, message: "text before the first [template] header".into() });
        };
        if lines.is_empty() {
            if let Some(scope) = line.strip_prefix("scope:") {
                let scope = scope.trim();
                t.genre_scope = (scope != "*" && !scope.is_empty()).then(|| scope.to_string());
                continue;
            }
            if let Some(types) = line.strip_prefix("types:") {
                t.query_types = types
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()
                    .map_err(|e| Error::Parse { line: idx + 1, message: e.to_string() })?;
                continue;
            }
        }
        lines.push(line.to_string());
    }
    finish(current, &mut out)?;
    Ok(out)
}

pub fn load_templates(path: impl AsRef<Path>) -> Result<Vec<PromptTemplate>> {
    parse_templates(&std::fs::read_to_string(path)?)
}

/// Built-in templates, phrased after the published example queries.
pub const DEFAULT_TEMPLATES: &str = "\
[traditional-gathering]
types: Recall, Analysis
Imagine a traditional {genre} performance that brings together {instruments}, {melody}, and {rhythm}, flowing effortlessly.

[traditional-essence]
types: Recall, Analysis
Imagine a traditional {genre} performance that brings together {instruments}, with the flowing essence of {melody} and {rhythm}, flowing effortlessly.

[modern-infusion]
types: Creativity
Imagine a modern {genre} performance infused with the soulful sound of {instruments}, rich vocals blending with {melody} and {rhythm}.
";

pub fn default_templates() -> Vec<PromptTemplate> {
    parse_templates(DEFAULT_TEMPLATES).expect("built-in templates parse")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPrompt {
    pub track_id: String,
    pub template_id: String,
    pub prompt_text: String,
}

/// One uniformly chosen applicable template per track.
pub fn training_prompts(tracks: &[TrackMetadata], templates: &[PromptTemplate], seed: u64) -> Result<Vec<TrainingPrompt>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    tracks
        .iter()
        .map(|t| {
            let attrs = Attributes::from(t);
            let template = pick_template(templates, &attrs.genre, None, &mut rng)?;
            Ok(TrainingPrompt {
                track_id: t.id.clone(),
                template_id: template.id.clone(),
                prompt_text: render_prompt(template, &attrs)?,
            })
        })
        .collect()
}

fn pick_template<'a>(
    templates: &'a [PromptTemplate],
    genre: &str,
    qt: Option<QueryType>,
    rng: &mut ChaCha8Rng,
) -> Result<&'a PromptTemplate> {
    let applicable: Vec<&PromptTemplate> = templates.iter().filter(|t| t.applies_to(genre, qt)).collect();
    applicable.choose(rng).copied().ok_or_else(|| Error::Template {
        template: "*".into(),
        message: format!(
            "no template applies to genre `{genre}`{}",
            qt.map(|q| format!(" and query type {q}")).unwrap_or_default()
        ),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    SeenCombination,
    NovelCombination,
    CrossGenre,
}

impl Provenance {
    pub fn for_query_type(qt: QueryType) -> Self {
        match qt {
            QueryType::Recall => Provenance::SeenCombination,
            QueryType::Analysis => Provenance::NovelCombination,
            QueryType::Creativity => Provenance::CrossGenre,
        }
    }
}

/// An evaluation prompt. Hand-written query files use the same record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalQuery {
    pub id: String,
    pub query_type: QueryType,
    pub prompt_text: String,
    pub genre: String,
    pub melody: String,
    pub rhythm: String,
    pub instruments: Vec<String>,
    pub provenance: Provenance,
}

impl EvalQuery {
    /// (melody, rhythm, instruments)
    pub fn triple(&self) -> Triple {
        (self.melody.clone(), self.rhythm.clone(), self.instruments.clone())
    }

    pub fn attributes(&self) -> Attributes {
        Attributes {
            genre: self.genre.clone(),
            melody: self.melody.clone(),
            rhythm: self.rhythm.clone(),
            instruments: self.instruments.clone(),
        }
    }
}

pub type Triple = (String, String, Vec<String>);

pub fn triple_of(t: &TrackMetadata) -> Triple {
    (t.melody.clone(), t.rhythm.clone(), t.instruments.clone())
}

fn make_query(
    qt: QueryType,
    index: usize,
    attrs: Attributes,
    templates: &[PromptTemplate],
    rng: &mut ChaCha8Rng,
) -> Result<EvalQuery> {
    let template = pick_template(templates, &attrs.genre, Some(qt), rng)?;
    let prompt_text = render_prompt(template, &attrs)?;
    Ok(EvalQuery {
        id: format!("{}-{:03}", qt.as_str().to_ascii_lowercase(), index + 1),
        query_type: qt,
        prompt_text,
        genre: attrs.genre,
        melody: attrs.melody,
        rhythm: attrs.rhythm,
        instruments: attrs.instruments,
        provenance: Provenance::for_query_type(qt),
    })
}

/// Distinct training triples with the genre of the first track carrying each.
fn seen_triples(train: &[TrackMetadata]) -> BTreeMap<Triple, String> {
    let mut seen = BTreeMap::new();
    for t in train {
        seen.entry(triple_of(t)).or_insert_with(|| t.genre.clone());
    }
    seen
}

/// `n` distinct (melody, rhythm, instruments) triples drawn from training.
pub fn generate_recall_queries(
    train: &[TrackMetadata],
    n: usize,
    seed: u64,
    templates: &[PromptTemplate],
) -> Result<Vec<EvalQuery>> {
    if train.is_empty() {
        return Err(Error::invalid("recall queries need training metadata"));
    }
    let seen = seen_triples(train);
    if n > seen.len() {
        return Err(Error::Shortfall { what: "distinct training combinations".into(), requested: n, available: seen.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<(&Triple, &String)> = seen.iter().collect();
    pool.shuffle(&mut rng);
    pool.into_iter()
        .take(n)
        .enumerate()
        .map(|(i, ((melody, rhythm, instruments), genre))| {
            let attrs = Attributes {
                genre: genre.clone(),
                melody: melody.clone(),
                rhythm: rhythm.clone(),
                instruments: instruments.clone(),
            };
            make_query(QueryType::Recall, i, attrs, templates, &mut rng)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Attr {
    Genre,
    Melody,
    Rhythm,
    Instruments,
}

/// Per-query retry budget before reporting a shortfall.
const RETRIES_PER_QUERY: usize = 2_000;

/// `n` distinct triples made by substituting one attribute of a training
/// triple with another attested value, such that the result never occurs in
/// training.
pub fn generate_analysis_queries(
    train: &[TrackMetadata],
    n: usize,
    seed: u64,
    templates: &[PromptTemplate],
) -> Result<Vec<EvalQuery>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if train.is_empty() {
        return Err(Error::invalid("analysis queries need training metadata"));
    }
    let seen = seen_triples(train);
    let bases: Vec<(&Triple, &String)> = seen.iter().collect();
    let melodies: Vec<&String> = train.iter().map(|t| &t.melody).collect::<BTreeSet<_>>().into_iter().collect();
    let rhythms: Vec<&String> = train.iter().map(|t| &t.rhythm).collect::<BTreeSet<_>>().into_iter().collect();
    let kits: Vec<&Vec<String>> = train.iter().map(|t| &t.instruments).collect::<BTreeSet<_>>().into_iter().collect();

    let mut eligible = Vec::new();
    if melodies.len() >= 2 {
        eligible.push(Attr::Melody);
    }
    if rhythms.len() >= 2 {
        eligible.push(Attr::Rhythm);
    }
    if kits.len() >= 2 {
        eligible.push(Attr::Instruments);
    }
    if eligible.is_empty() {
        return Err(Error::Shortfall { what: "novel combinations (no attribute has two attested values)".into(), requested: n, available: 0 });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut emitted: HashSet<Triple> = HashSet::new();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    let budget = RETRIES_PER_QUERY.saturating_mul(n);
    while out.len() < n {
        if attempts >= budget {
            return Err(Error::Shortfall { what: "novel combinations".into(), requested: n, available: out.len() });
        }
        attempts += 1;
        let &((melody, rhythm, instruments), genre) = bases.choose(&mut rng).expect("non-empty");
        let mut cand: Triple = (melody.clone(), rhythm.clone(), instruments.clone());
        match *eligible.choose(&mut rng).expect("non-empty") {
            Attr::Melody => cand.0 = (*melodies.choose(&mut rng).unwrap()).clone(),
            Attr::Rhythm => cand.1 = (*rhythms.choose(&mut rng).unwrap()).clone(),
            Attr::Instruments => cand.2 = (*kits.choose(&mut rng).unwrap()).clone(),
            Attr::Genre => unreachable!(),
        }
        if seen.contains_key(&cand) || emitted.contains(&cand) {
            continue;
        }
        emitted.insert(cand.clone());
        let attrs = Attributes { genre: genre.clone(), melody: cand.0, rhythm: cand.1, instruments: cand.2 };
        out.push(make_query(QueryType::Analysis, out.len(), attrs, templates, &mut rng)?);
    }
    Ok(out)
}

/// Attribute values available for blending.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttributePools {
    #[serde(default)]
    pub genres: Vec<String>,
    #[serde(default)]
    pub melodies: Vec<String>,
    #[serde(default)]
    pub rhythms: Vec<String>,
    #[serde(default)]
    pub instruments: Vec<String>,
}

impl AttributePools {
    pub fn from_tracks(tracks: &[TrackMetadata]) -> Self {
        fn uniq<'a>(it: impl Iterator<Item = &'a String>) -> Vec<String> {
            it.collect::<BTreeSet<_>>().into_iter().cloned().collect()
        }
        Self {
            genres: uniq(tracks.iter().map(|t| &t.genre)),
            melodies: uniq(tracks.iter().map(|t| &t.melody)),
            rhythms: uniq(tracks.iter().map(|t| &t.rhythm)),
            instruments: uniq(tracks.iter().flat_map(|t| &t.instruments)),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.genres.is_empty() && self.melodies.is_empty() && self.rhythms.is_empty() && self.instruments.is_empty()
    }

    fn has(&self, a: Attr) -> bool {
        !match a {
            Attr::Genre => &self.genres,
            Attr::Melody => &self.melodies,
            Attr::Rhythm => &self.rhythms,
            Attr::Instruments => &self.instruments,
        }
        .is_empty()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })
    }
}

const MAX_KIT: usize = 3;

/// Queries that take at least one attribute from the native pool and at least
/// one from the foreign pool.
pub fn generate_creativity_queries(
    native: &[TrackMetadata],
    foreign: &AttributePools,
    n: usize,
    seed: u64,
    templates: &[PromptTemplate],
) -> Result<Vec<EvalQuery>> {
    if foreign.is_empty() {
        return Err(Error::invalid("creativity queries need a non-empty foreign attribute pool"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let native_pool = AttributePools::from_tracks(native);
    let all = [Attr::Genre, Attr::Melody, Attr::Rhythm, Attr::Instruments];
    if all.iter().any(|&a| !native_pool.has(a)) {
        return Err(Error::invalid("native metadata must supply every attribute"));
    }
    let foreign_attrs: Vec<Attr> = all.iter().copied().filter(|&a| foreign.has(a)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut emitted: HashSet<Attributes> = HashSet::new();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    let budget = RETRIES_PER_QUERY.saturating_mul(n);
    while out.len() < n {
        if attempts >= budget {
            return Err(Error::Shortfall { what: "distinct cross-genre blends".into(), requested: n, available: out.len() });
        }
        attempts += 1;
        let mut order = foreign_attrs.clone();
        order.shuffle(&mut rng);
        let k = rng.random_range(1..=order.len().min(all.len() - 1));
        let from_foreign = &order[..k];
        let pool_for = |a: Attr| if from_foreign.contains(&a) { foreign } else { &native_pool };

        let mut pick = |v: &Vec<String>| v.choose(&mut rng).cloned().expect("non-empty pool");
        let genre = pick(&pool_for(Attr::Genre).genres);
        let melody = pick(&pool_for(Attr::Melody).melodies);
        let rhythm = pick(&pool_for(Attr::Rhythm).rhythms);
        let names = &pool_for(Attr::Instruments).instruments;
        let size = rng.random_range(1..=names.len().min(MAX_KIT));
        let instruments: Vec<String> = names.choose_multiple(&mut rng, size).cloned().collect();

        let attrs = Attributes { genre, melody, rhythm, instruments };
        if !emitted.insert(attrs.clone()) {
            continue;
        }
        out.push(make_query(QueryType::Creativity, out.len(), attrs, templates, &mut rng)?);
    }
    Ok(out)
}
