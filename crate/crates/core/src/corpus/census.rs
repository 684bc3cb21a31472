//! Dataset-disparity census: hours and paper counts by region and genre,
//! with a Western / non-Western rollup.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;
use crate::table::{fmt_num, Table};

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetDescriptor {
    pub name: String,
    /// `None` when the dataset does not state a region.
    #[serde(default)]
    pub region: Option<String>,
    #[serde(default)]
    pub genre: Option<String>,
    pub hours: f64,
    /// Papers this row stands for (a descriptor may aggregate several).
    #[serde(default = "one")]
    pub papers: u32,
    #[serde(default)]
    pub annotated: bool,
    #[serde(default)]
    pub excluded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclusion_reason: Option<String>,
}

pub fn load_descriptors(path: impl AsRef<Path>) -> Result<Vec<DatasetDescriptor>> {
    let rows: Vec<DatasetDescriptor> = jsonl::read(path)?;
    for (i, d) in rows.iter().enumerate() {
        if !d.hours.is_finite() || d.hours < 0.0 {
            return Err(Error::Parse { line: i + 1, message: format!("dataset `{}` has invalid hours", d.name) });
        }
    }
    Ok(rows)
}

/// Which regions count as the Western world and which as non-Western.
/// Regions in neither list land in an `other` bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMap {
    pub western: BTreeSet<String>,
    pub non_western: BTreeSet<String>,
}

impl Default for RegionMap {
    fn default() -> Self {
        let set = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        Self {
            western: set(&["European", "East Asian", "American"]),
            non_western: set(&[
                "South Asian",
                "Middle Eastern",
                "Oceania",
                "Central Asian",
                "Latin American",
                "African",
            ]),
        }
    }
}

impl RegionMap {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CensusRow {
    pub key: String,
    pub papers: u32,
    pub hours: f64,
    /// Share of the table's total hours, in percent.
    pub share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CensusReport {
    pub regions: Vec<CensusRow>,
    pub genres: Vec<CensusRow>,
    pub unclassified_region_hours: f64,
    pub unclassified_genre_hours: f64,
    pub western_hours: f64,
    pub non_western_hours: f64,
    pub other_hours: f64,
    pub western_share: Option<f64>,
    pub non_western_share: Option<f64>,
    pub excluded: Vec<(String, f64, Option<String>)>,
    pub excluded_hours: f64,
}

impl CensusReport {
    pub fn region(&self, key: &str) -> Option<&CensusRow> {
        self.regions.iter().find(|r| r.key == key)
    }

    pub fn genre(&self, key: &str) -> Option<&CensusRow> {
        self.genres.iter().find(|r| r.key == key)
    }

    pub fn region_total(&self) -> f64 {
        self.regions.iter().map(|r| r.hours).sum()
    }

    pub fn genre_total(&self) -> f64 {
        self.genres.iter().map(|r| r.hours).sum()
    }
}

fn accumulate(rows: &mut Vec<CensusRow>, key: &str, papers: u32, hours: f64) {
    match rows.iter_mut().find(|r| r.key == key) {
        Some(r) => {
            r.papers += papers;
            r.hours += hours;
        }
        None => rows.push(CensusRow { key: key.to_string(), papers, hours, share: None }),
    }
}

fn fill_shares(rows: &mut [CensusRow]) {
    let total: f64 = rows.iter().map(|r| r.hours).sum();
    for r in rows {
        r.share = (total > 0.0).then(|| r.hours / total * 100.0);
    }
}

/// Rows keep first-appearance order. Excluded datasets are listed separately
/// and contribute to no table.
pub fn disparity_report(datasets: &[DatasetDescriptor], map: &RegionMap) -> CensusReport {
    let mut regions = Vec::new();
    let mut genres = Vec::new();
    let mut report = CensusReport {
        regions: Vec::new(),
        genres: Vec::new(),
        unclassified_region_hours: 0.0,
        unclassified_genre_hours: 0.0,
        western_hours: 0.0,
        non_western_hours: 0.0,
        other_hours: 0.0,
        western_share: None,
        non_western_share: None,
        excluded: Vec::new(),
        excluded_hours: 0.0,
    };

    for d in datasets {
        if d.excluded {
            report.excluded.push((d.name.clone(), d.hours, d.exclusion_reason.clone()));
            report.excluded_hours += d.hours;
            continue;
        }
        match d.region.as_deref() {
            Some(region) => {
                accumulate(&mut regions, region, d.papers, d.hours);
                if map.western.contains(region) {
                    report.western_hours += d.hours;
                } else if map.non_western.contains(region) {
                    report.non_western_hours += d.hours;
                } else {
                    report.other_hours += d.hours;
                }
            }
            None => report.unclassified_region_hours += d.hours,
        }
        match d.genre.as_deref() {
            Some(genre) => accumulate(&mut genres, genre, d.papers, d.hours),
            None => report.unclassified_genre_hours += d.hours,
        }
    }

    fill_shares(&mut regions);
    fill_shares(&mut genres);
    let total = report.western_hours + report.non_western_hours + report.other_hours;
    if total > 0.0 {
        report.western_share = Some(report.western_hours / total * 100.0);
        report.non_western_share = Some(report.non_western_hours / total * 100.0);
    }
    report.regions = regions;
    report.genres = genres;
    report
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |p| format!("{}%", fmt_num(p, 2)))
}

fn rows_table(first: &str, rows: &[CensusRow]) -> Table {
    let mut t = Table::new([first, "papers", "hours", "share"]);
    for r in rows {
        t.push([r.key.clone(), r.papers.to_string(), fmt_num(r.hours, 2), pct(r.share)]);
    }
    t
}

pub fn region_table(r: &CensusReport) -> Table {
    rows_table("region", &r.regions)
}

pub fn genre_table(r: &CensusReport) -> Table {
    rows_table("genre", &r.genres)
}

pub fn rollup_table(r: &CensusReport) -> Table {
    let mut t = Table::new(["group", "hours", "share"]);
    t.push(["western".to_string(), fmt_num(r.western_hours, 2), pct(r.western_share)]);
    t.push(["non_western".to_string(), fmt_num(r.non_western_hours, 2), pct(r.non_western_share)]);
    let other_share = r.western_share.map(|w| (100.0 - w - r.non_western_share.unwrap_or(0.0)).max(0.0));
    t.push(["other".to_string(), fmt_num(r.other_hours, 2), pct(other_share)]);
    t.push(["unclassified_region".to_string(), fmt_num(r.unclassified_region_hours, 2), "n/a".to_string()]);
    t.push(["excluded".to_string(), fmt_num(r.excluded_hours, 2), "n/a".to_string()]);
    t
}

pub fn excluded_table(r: &CensusReport) -> Table {
    let mut t = Table::new(["dataset", "hours", "reason"]);
    for (name, hours, reason) in &r.excluded {
        t.push([name.clone(), fmt_num(*hours, 2), reason.clone().unwrap_or_default()]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(name: &str, region: Option<&str>, genre: Option<&str>, hours: f64) -> DatasetDescriptor {
        DatasetDescriptor {
            name: name.into(),
            region: region.map(Into::into),
            genre: genre.map(Into::into),
            hours,
            papers: 1,
            annotated: false,
            excluded: false,
            exclusion_reason: None,
        }
    }

    #[test]
    fn empty_input_renders_na() {
        let r = disparity_report(&[], &RegionMap::default());
        assert!(r.regions.is_empty() && r.genres.is_empty());
        assert_eq!(r.western_share, None);
        let t = rollup_table(&r).to_string();
        assert!(t.contains("western\t0.00\tn/a"));
    }

    #[test]
    fn totals_reconcile() {
        let rows = vec![
            d("a", Some("European"), Some("Pop"), 10.0),
            d("b", Some("South Asian"), None, 2.0),
            d("c", None, Some("Folk"), 3.0),
            d("d", Some("Atlantis"), Some("Pop"), 1.0),
        ];
        let r = disparity_report(&rows, &RegionMap::default());
        assert_eq!(r.region("European").unwrap().hours, 10.0);
        assert_eq!(r.genre("Pop").unwrap().papers, 2);
        assert!((r.region_total() + r.unclassified_region_hours - r.genre_total() - r.unclassified_genre_hours).abs() < 1e-12);
        assert_eq!(r.other_hours, 1.0);
        let w = r.western_share.unwrap();
        assert!((w - 10.0 / 13.0 * 100.0).abs() < 1e-12);
    }

    #[test]
    fn excluded_rows_are_listed_not_counted() {
        let mut x = d("x", Some("European"), Some("Pop"), 50.0);
        x.excluded = true;
        x.exclusion_reason = Some("no region metadata".into());
        let r = disparity_report(&[x, d("a", Some("African"), None, 1.0)], &RegionMap::default());
        assert_eq!(r.excluded_hours, 50.0);
        assert_eq!(r.region("European"), None);
        assert_eq!(r.non_western_share, Some(100.0));
    }
}
