//! Weighted inter-annotator agreement.
//!
//! Two 5×5 kernels give partial credit between comparative answers:
//!
//! * **distance**: answers are placed on the ordinal scale 2..−2, the gap is
//!   clipped at 3 and agreement is `(3 − d) / 3`. Two answers that prefer
//!   the same system (A≫B vs A>B, A<B vs A≪B) count as full agreement.
//! * **direction**: agreement is lost only when the two annotators prefer
//!   opposite systems.
//!
//! Kappa is `(p̄_o − p_e) / (1 − p_e)` where `p̄_o` is the mean kernel value
//! over the retained pairs.
//!
//! Expected agreement is not a fixed constant: it is taken as
//! `p_e = Σ_{a,b} P1(a)·P2(b)·M(a,b)` with `P1`, `P2` the two annotators'
//! empirical marginals over the five comparative answers. With the identity
//! kernel this is exactly Cohen's kappa. This is an interpretation of the
//! protocol, so reported kappas need not match externally published ones.
//!
//! Pairs where either side answered NONE or NOT_APPLICABLE are excluded
//! before anything is computed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationRecord, RecordKind};
use crate::error::{Error, Result};
use crate::protocol::{Criterion, JudgmentOption};
use crate::scalar::Weight;
use crate::table::{fmt_num, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgreementKind {
    Distance,
    Direction,
}

impl AgreementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AgreementKind::Distance => "distance",
            AgreementKind::Direction => "direction",
        }
    }
}

impl fmt::Display for AgreementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgreementKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "distance" => Ok(AgreementKind::Distance),
            "direction" => Ok(AgreementKind::Direction),
            _ => Err(Error::invalid(format!("unknown agreement metric `{s}` (expected distance|direction)"))),
        }
    }
}

// Rows/columns in A≫B, A>B, A=B, A<B, A≪B order.
const DIRECTION_TABLE: [[u8; 5]; 5] = [
    [1, 1, 1, 0, 0],
    [1, 1, 1, 0, 0],
    [1, 1, 1, 1, 1],
    [0, 0, 1, 1, 1],
    [0, 0, 1, 1, 1],
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgreementMatrix<W> {
    pub kind: AgreementKind,
    pub cells: [[W; 5]; 5],
}

impl<W: Weight> AgreementMatrix<W> {
    pub fn new(kind: AgreementKind) -> Self {
        match kind {
            AgreementKind::Distance => Self::distance(),
            AgreementKind::Direction => Self::direction(),
        }
    }

    pub fn distance() -> Self {
        let mut cells = [[W::zero(); 5]; 5];
        for (i, a) in JudgmentOption::COMPARATIVE.iter().enumerate() {
            for (j, b) in JudgmentOption::COMPARATIVE.iter().enumerate() {
                let (oa, ob) = (a.ordinal().unwrap(), b.ordinal().unwrap());
                cells[i][j] = if oa * ob > 0 {
                    W::one()
                } else {
                    let d = (oa - ob).unsigned_abs().min(3) as i64;
                    W::ratio(3 - d, 3)
                };
            }
        }
        Self { kind: AgreementKind::Distance, cells }
    }

    pub fn direction() -> Self {
        let mut cells = [[W::zero(); 5]; 5];
        for (i, row) in DIRECTION_TABLE.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                cells[i][j] = if v == 1 { W::one() } else { W::zero() };
            }
        }
        Self { kind: AgreementKind::Direction, cells }
    }

    pub fn get(&self, a: JudgmentOption, b: JudgmentOption) -> Result<W> {
        match (a.index(), b.index()) {
            (Some(i), Some(j)) => Ok(self.cells[i][j]),
            _ => Err(Error::invalid(format!(
                "agreement is defined only for comparative answers, got ({}, {})",
                a.symbol(),
                b.symbol()
            ))),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        (0..5).all(|i| (0..5).all(|j| self.cells[i][j] == self.cells[j][i]))
    }
}

pub fn distance_agreement<W: Weight>(a: JudgmentOption, b: JudgmentOption) -> Result<W> {
    AgreementMatrix::<W>::distance().get(a, b)
}

pub fn direction_agreement<W: Weight>(a: JudgmentOption, b: JudgmentOption) -> Result<W> {
    AgreementMatrix::<W>::direction().get(a, b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaReport<W> {
    pub criterion: Option<Criterion>,
    pub kind: AgreementKind,
    pub p_o_mean: W,
    pub p_e: W,
    pub kappa: W,
    /// Pairs retained after excluding NONE/NOT_APPLICABLE.
    pub n_items: usize,
    pub n_excluded: usize,
}

fn is_retained(&(a, b): &(JudgmentOption, JudgmentOption)) -> bool {
    a.is_comparative() && b.is_comparative()
}

pub fn kappa<W: Weight>(
    pairs: &[(JudgmentOption, JudgmentOption)],
    matrix: &AgreementMatrix<W>,
) -> Result<KappaReport<W>> {
    let kept: Vec<(usize, usize)> = pairs
        .iter()
        .filter(|p| is_retained(p))
        .map(|&(a, b)| (a.index().unwrap(), b.index().unwrap()))
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = W::from_usize(kept.len()).expect("count fits");

    let mut observed = W::zero();
    let mut first = [0usize; 5];
    let mut second = [0usize; 5];
    for &(i, j) in &kept {
        observed = observed + matrix.cells[i][j];
        first[i] += 1;
        second[j] += 1;
    }
    let p_o_mean = observed / n;

    let mut expected = W::zero();
    for i in 0..5 {
        for j in 0..5 {
            if first[i] == 0 || second[j] == 0 {
                continue;
            }
            let weight = W::from_usize(first[i] * second[j]).expect("count fits");
            expected = expected + weight * matrix.cells[i][j];
        }
    }
    let p_e = expected / (n * n);

    if p_e == W::one() {
        return Err(Error::UndefinedKappa);
    }
    let kappa = (p_o_mean - p_e) / (W::one() - p_e);

    Ok(KappaReport {
        criterion: None,
        kind: matrix.kind,
        p_o_mean,
        p_e,
        kappa,
        n_items: kept.len(),
        n_excluded: pairs.len() - kept.len(),
    })
}

/// Pairs up phase-1 annotations of the same match for one criterion.
///
/// Annotator 1 is whoever annotated the match first in log order; later
/// annotations beyond the second and amendment records are ignored.
pub fn paired_judgments(
    log: &[AnnotationRecord],
    criterion: Criterion,
    genre: Option<&str>,
) -> Vec<(JudgmentOption, JudgmentOption)> {
    let mut order: Vec<&str> = Vec::new();
    let mut by_match: std::collections::HashMap<&str, Vec<&AnnotationRecord>> = Default::default();
    for rec in log {
        if rec.phase != 1 || rec.kind != RecordKind::Annotation {
            continue;
        }
        if genre.is_some_and(|g| g != rec.genre) {
            continue;
        }
        let entry = by_match.entry(rec.match_id.as_str()).or_default();
        if entry.is_empty() {
            order.push(rec.match_id.as_str());
        }
        if entry.len() < 2 && entry.iter().all(|r| r.annotator_id != rec.annotator_id) {
            entry.push(rec);
        }
    }
    order
        .into_iter()
        .filter_map(|m| match by_match[m].as_slice() {
            [a, b] => Some((a.judgments.get(criterion), b.judgments.get(criterion))),
            _ => None,
        })
        .collect()
}

/// `criterion, metric, p_o_mean, p_e, kappa, n_items`
pub fn kappa_table(reports: &[KappaReport<f64>]) -> Table {
    let mut t = Table::new(["criterion", "metric", "p_o_mean", "p_e", "kappa", "n_items"]);
    for r in reports {
        t.push([
            r.criterion.map_or_else(|| "-".to_string(), |c| c.to_string()),
            r.kind.to_string(),
            fmt_num(r.p_o_mean, 6),
            fmt_num(r.p_e, 6),
            fmt_num(r.kappa, 6),
            r.n_items.to_string(),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;
    use JudgmentOption::*;

    type Q = Ratio<i64>;

    #[test]
    fn distance_examples() {
        let v: f64 = distance_agreement(AMuchBetter, Equal).unwrap();
        assert_eq!(format!("{v:.2}"), "0.33");
        assert_eq!(distance_agreement::<Q>(AMuchBetter, BMuchBetter).unwrap(), Q::from_integer(0));
        for x in JudgmentOption::COMPARATIVE {
            assert_eq!(distance_agreement::<Q>(x, x).unwrap(), Q::from_integer(1));
        }
        assert!(distance_agreement::<f64>(None, Equal).is_err());
        assert!(distance_agreement::<f64>(Equal, NotApplicable).is_err());
    }

    #[test]
    fn direction_examples() {
        assert_eq!(direction_agreement::<f64>(AMuchBetter, ABetter).unwrap(), 1.0);
        assert_eq!(direction_agreement::<f64>(ABetter, BBetter).unwrap(), 0.0);
        for x in JudgmentOption::COMPARATIVE {
            assert_eq!(direction_agreement::<f64>(Equal, x).unwrap(), 1.0);
        }
        assert!(direction_agreement::<f64>(NotApplicable, ABetter).is_err());
    }

    #[test]
    fn both_kernels_symmetric_unit_diagonal() {
        for kind in [AgreementKind::Distance, AgreementKind::Direction] {
            let m = AgreementMatrix::<Q>::new(kind);
            assert!(m.is_symmetric());
            for i in 0..5 {
                assert_eq!(m.cells[i][i], Q::from_integer(1));
            }
        }
    }

    #[test]
    fn identical_streams_give_unit_kappa() {
        let pairs: Vec<_> = [AMuchBetter, ABetter, Equal, BBetter, BMuchBetter, ABetter]
            .iter()
            .map(|&j| (j, j))
            .collect();
        let r = kappa(&pairs, &AgreementMatrix::<Q>::distance()).unwrap();
        assert_eq!(r.kappa, Q::from_integer(1));
        let r = kappa(&pairs, &AgreementMatrix::<f64>::direction()).unwrap();
        assert_eq!(r.kappa, 1.0);
    }

    #[test]
    fn chance_level_stream_gives_zero_kappa() {
        // Under the identity kernel, independent marginals that are realised
        // as a full cross product make p_o equal p_e exactly.
        let mut pairs = Vec::new();
        for a in [ABetter, BBetter] {
            for b in [ABetter, BBetter] {
                pairs.push((a, b));
            }
        }
        let r = kappa(&pairs, &AgreementMatrix::<Q>::direction()).unwrap();
        assert_eq!(r.p_o_mean, r.p_e);
        assert_eq!(r.kappa, Q::from_integer(0));
    }

    #[test]
    fn exclusions_and_errors() {
        let pairs = [(None, ABetter), (NotApplicable, None), (Equal, NotApplicable)];
        assert!(matches!(kappa(&pairs, &AgreementMatrix::<f64>::distance()), Err(Error::EmptySample)));

        // Every answer EQUAL: p_e = 1.
        let pairs = [(Equal, Equal), (Equal, Equal)];
        assert!(matches!(kappa(&pairs, &AgreementMatrix::<f64>::distance()), Err(Error::UndefinedKappa)));

        let base = [(ABetter, AMuchBetter), (BBetter, Equal), (AMuchBetter, BBetter)];
        let mut padded = base.to_vec();
        padded.push((None, AMuchBetter));
        let m = AgreementMatrix::<Q>::distance();
        let r1 = kappa(&base, &m).unwrap();
        let r2 = kappa(&padded, &m).unwrap();
        assert_eq!((r1.kappa, r1.p_o_mean, r1.p_e, r1.n_items), (r2.kappa, r2.p_o_mean, r2.p_e, r2.n_items));
        assert_eq!(r2.n_excluded, 1);
    }
}
