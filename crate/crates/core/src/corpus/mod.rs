//! Track metadata, song-disjoint splits, audio preparation and the dataset
//! census.

pub mod audio;
pub mod census;

use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;

/// One audio clip and its musical attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackMetadata {
    pub id: String,
    pub song_id: String,
    pub genre: String,
    #[serde(default)]
    pub region: String,
    pub duration_s: f64,
    /// Raga or makam, as it should appear in prompts (e.g. "raga Yaman").
    pub melody: String,
    /// Laya or usul (e.g. "Vilambit laya", "Hicaz usul").
    pub rhythm: String,
    pub instruments: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_path: Option<String>,
}

impl TrackMetadata {
    fn validate(&self) -> std::result::Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("empty id".into());
        }
        if self.song_id.trim().is_empty() {
            return Err(format!("track `{}` has an empty song_id", self.id));
        }
        if !self.duration_s.is_finite() || self.duration_s < 0.0 {
            return Err(format!("track `{}` has invalid duration {}", self.id, self.duration_s));
        }
        Ok(())
    }
}

/// Parses line-delimited metadata and enforces the record invariants.
pub fn ingest_metadata_from(reader: impl BufRead) -> Result<Vec<TrackMetadata>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TrackMetadata = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: idx + 1, message: e.to_string() })?;
        rec.validate().map_err(|message| Error::Parse { line: idx + 1, message })?;
        if !seen.insert(rec.id.clone()) {
            return Err(Error::DuplicateId(rec.id));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn ingest_metadata(path: impl AsRef<Path>) -> Result<Vec<TrackMetadata>> {
    let file = std::fs::File::open(path)?;
    ingest_metadata_from(std::io::BufReader::new(file))
}

pub fn metadata_to_jsonl(tracks: &[TrackMetadata]) -> String {
    jsonl::to_string(tracks)
}

pub fn total_hours(tracks: &[TrackMetadata]) -> f64 {
    tracks.iter().map(|t| t.duration_s).sum::<f64>() / 3600.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub train_songs: Vec<String>,
    pub test_songs: Vec<String>,
    pub train_hours: f64,
    pub test_hours: f64,
}

/// Visits songs in seeded random order and moves a song to the test side
/// whenever doing so brings the test duration no further from
/// `test_fraction` of the total. The test side therefore lands within half
/// of the longest song of its target. Each side keeps at least one song.
pub fn split_by_song(tracks: &[TrackMetadata], test_fraction: f64, seed: u64) -> Result<CorpusSplit> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!("test_fraction must be in (0, 1), got {test_fraction}")));
    }
    let mut songs: BTreeMap<&str, f64> = BTreeMap::new();
    for t in tracks {
        *songs.entry(t.song_id.as_str()).or_default() += t.duration_s;
    }
    if songs.len() < 2 {
        return Err(Error::CannotSplit(format!("need at least 2 distinct songs, found {}", songs.len())));
    }

    let mut order: Vec<(&str, f64)> = songs.into_iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let total: f64 = order.iter().map(|(_, d)| d).sum();
    let target = test_fraction * total;
    let mut test_songs: HashSet<&str> = HashSet::new();
    let mut test_dur = 0.0;
    for &(song, dur) in &order {
        if test_songs.len() + 1 == order.len() {
            break;
        }
        if test_dur + dur / 2.0 <= target {
            test_songs.insert(song);
            test_dur += dur;
        }
    }
    if test_songs.is_empty() {
        test_songs.insert(order[0].0);
    }

    let mut split = CorpusSplit {
        train_ids: Vec::new(),
        test_ids: Vec::new(),
        train_songs: Vec::new(),
        test_songs: Vec::new(),
        train_hours: 0.0,
        test_hours: 0.0,
    };
    for (song, _) in &order {
        if test_songs.contains(song) {
            split.test_songs.push(song.to_string());
        } else {
            split.train_songs.push(song.to_string());
        }
    }
    split.train_songs.sort();
    split.test_songs.sort();
    let (mut train_s, mut test_s) = (0.0, 0.0);
    for t in tracks {
        if test_songs.contains(t.song_id.as_str()) {
            split.test_ids.push(t.id.clone());
            test_s += t.duration_s;
        } else {
            split.train_ids.push(t.id.clone());
            train_s += t.duration_s;
        }
    }
    split.train_hours = train_s / 3600.0;
    split.test_hours = test_s / 3600.0;
    Ok(split)
}
