//! Objective metrics over ingested embeddings, classifier logits and paired
//! features: Fréchet distance (FAD/FD), sigmoid KL and PSNR.

use std::collections::HashMap;
use std::fmt;

use crate::emb::LabeledMatrix;
use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::scalar::Real;
use crate::table::{fmt_num, Table};

/// Eigenvalues below this are treated as zero when taking square roots.
pub const EIGEN_CLAMP: f64 = 1e-10;
/// Allowed asymmetry (relative to the largest entry) of a "symmetric" input.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// n×d embeddings, one row per clip.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet<T> {
    pub data: Matrix<T>,
    pub source_tag: String,
}

impl<T: Real> EmbeddingSet<T> {
    pub fn new(data: Matrix<T>, source_tag: impl Into<String>) -> Result<Self> {
        if !data.is_finite() {
            return Err(Error::invalid("embedding set contains non-finite values"));
        }
        Ok(Self { data, source_tag: source_tag.into() })
    }

    pub fn len(&self) -> usize {
        self.data.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats<T> {
    pub mean: Vec<T>,
    pub cov: Matrix<T>,
}

impl<T: Real> GaussianStats<T> {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Column means and the unbiased (n − 1) sample covariance, symmetrized.
pub fn fit_gaussian<T: Real>(set: &EmbeddingSet<T>) -> Result<GaussianStats<T>> {
    let n = set.len();
    if n < 2 {
        return Err(Error::InsufficientSample { needed: 2, got: n });
    }
    let d = set.dim();
    let nf = T::count(n);
    let mut mean = vec![T::zero(); d];
    for row in set.data.row_iter() {
        for (m, &x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= nf;
    }

    let mut cov = Matrix::zeros(d, d);
    let mut centered = vec![T::zero(); d];
    for row in set.data.row_iter() {
        for ((c, &x), &m) in centered.iter_mut().zip(row).zip(&mean) {
            *c = x - m;
        }
        for i in 0..d {
            let ci = centered[i];
            if ci == T::zero() {
                continue;
            }
            for j in i..d {
                cov[(i, j)] += ci * centered[j];
            }
        }
    }
    let denom = T::count(n - 1);
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(GaussianStats { mean, cov })
}

/// Principal square root of a symmetric PSD matrix via eigendecomposition.
/// Eigenvalues below [`EIGEN_CLAMP`] (including slightly negative ones from
/// round-off) are clamped to zero.
pub fn matrix_sqrt_psd<T: Real>(m: &Matrix<T>) -> Result<Matrix<T>> {
    if !m.is_square() {
        return Err(Error::invalid(format!("matrix square root needs a square matrix, got {:?}", m.shape())));
    }
    if !m.is_finite() {
        return Err(Error::invalid("matrix contains non-finite values"));
    }
    let scale = m.as_slice().iter().fold(T::one(), |acc, v| acc.max(v.abs()));
    if m.asymmetry() > T::lit(SYMMETRY_TOL) * scale {
        return Err(Error::invalid("matrix square root needs a symmetric matrix"));
    }
    let eig = symmetric_eigen(m)?;
    let clamp = T::lit(EIGEN_CLAMP);
    Ok(eig.recompose(|l| if l < clamp { T::zero() } else { l.sqrt() }))
}

/// ‖μ₁ − μ₂‖² + Tr(Σ₁ + Σ₂ − 2·(Σ₁Σ₂)^½), clamped at zero.
///
/// Tr((Σ₁Σ₂)^½) is evaluated as Tr((√Σ₁·Σ₂·√Σ₁)^½), which has the same
/// eigenvalues but keeps the argument symmetric.
pub fn frechet_distance<T: Real>(g1: &GaussianStats<T>, g2: &GaussianStats<T>) -> Result<T> {
    if g1.dim() != g2.dim() || g1.cov.shape() != g2.cov.shape() {
        return Err(Error::invalid(format!("dimension mismatch: {} vs {}", g1.dim(), g2.dim())));
    }
    let mean_term: T = g1.mean.iter().zip(&g2.mean).map(|(&a, &b)| (a - b) * (a - b)).sum();
    let root1 = matrix_sqrt_psd(&g1.cov.symmetrized())?;
    let inner = root1.matmul(&g2.cov)?.matmul(&root1)?.symmetrized();
    let cross = matrix_sqrt_psd(&inner)?.trace();
    let fd = mean_term + g1.cov.trace() + g2.cov.trace() - T::lit(2.0) * cross;
    Ok(fd.max(T::zero()))
}

/// Reference and generated classifier logits, row-aligned by prompt id.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedLogits<T> {
    pub reference: Matrix<T>,
    pub generated: Matrix<T>,
}

impl<T: Real> PairedLogits<T> {
    pub fn new(reference: Matrix<T>, generated: Matrix<T>) -> Result<Self> {
        if reference.shape() != generated.shape() {
            return Err(Error::invalid(format!(
                "logit shapes differ: {:?} vs {:?}",
                reference.shape(),
                generated.shape()
            )));
        }
        if !reference.is_finite() || !generated.is_finite() {
            return Err(Error::invalid("logits contain non-finite values"));
        }
        Ok(Self { reference, generated })
    }

    /// Pairs rows by id when both sides carry ids, otherwise by row order.
    /// The output follows the reference order.
    pub fn align(reference: LabeledMatrix<T>, generated: LabeledMatrix<T>) -> Result<Self> {
        match (&reference.ids, &generated.ids) {
            (Some(ref_ids), Some(gen_ids)) => {
                let lookup: HashMap<&str, usize> =
                    gen_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
                if lookup.len() != gen_ids.len() {
                    return Err(Error::data("duplicate prompt id in generated logits"));
                }
                if ref_ids.len() != gen_ids.len() {
                    return Err(Error::invalid(format!(
                        "{} reference rows vs {} generated rows",
                        ref_ids.len(),
                        gen_ids.len()
                    )));
                }
                let cols = generated.matrix.cols();
                let mut data = Vec::with_capacity(ref_ids.len() * cols);
                for id in ref_ids {
                    let &row = lookup
                        .get(id.as_str())
                        .ok_or_else(|| Error::data(format!("prompt id `{id}` has no generated logits")))?;
                    data.extend_from_slice(generated.matrix.row(row));
                }
                let gen = Matrix::from_vec(ref_ids.len(), cols, data)?;
                Self::new(reference.matrix, gen)
            }
            _ => Self::new(reference.matrix, generated.matrix),
        }
    }
}

fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Bernoulli KL(p ‖ q) with both probabilities clamped to [eps, 1 − eps].
pub fn bernoulli_kl<T: Real>(p: T, q: T, eps: T) -> T {
    let hi = T::one() - eps;
    let p = p.max(eps).min(hi);
    let q = q.max(eps).min(hi);
    p * (p / q).ln() + (T::one() - p) * ((T::one() - p) / (T::one() - q)).ln()
}

/// Sigmoid both logits per class, Bernoulli KL with the reference as `p`,
/// mean over classes then over pairs.
pub fn kl_sigmoid<T: Real>(logits: &PairedLogits<T>, eps: T) -> Result<T> {
    let (n, c) = logits.reference.shape();
    if n == 0 || c == 0 {
        return Err(Error::invalid("kl_sigmoid needs at least one pair and one class"));
    }
    let per_pair = logits.reference.row_iter().zip(logits.generated.row_iter()).map(|(r, g)| {
        let sum: T = r.iter().zip(g).map(|(&a, &b)| bernoulli_kl(sigmoid(a), sigmoid(b), eps)).sum();
        sum / T::count(c)
    });
    let total: T = per_pair.sum();
    Ok((total / T::count(n)).max(T::zero()))
}

pub const DEFAULT_KL_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr<T> {
    Finite(T),
    /// Inputs are identical (MSE = 0).
    Infinite,
}

impl<T: Real> Psnr<T> {
    pub fn db(self) -> T {
        match self {
            Psnr::Finite(v) => v,
            Psnr::Infinite => T::infinity(),
        }
    }
}

impl<T: Real> fmt::Display for Psnr<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Finite(v) => f.write_str(&fmt_num(v.to_f64().unwrap_or(f64::NAN), 4)),
            Psnr::Infinite => f.write_str("inf"),
        }
    }
}

/// 10·log10(peak² / MSE).
pub fn psnr<T: Real>(reference: &Matrix<T>, generated: &Matrix<T>, peak: T) -> Result<Psnr<T>> {
    if reference.shape() != generated.shape() {
        return Err(Error::invalid(format!(
            "feature shapes differ: {:?} vs {:?}",
            reference.shape(),
            generated.shape()
        )));
    }
    if !(peak > T::zero()) {
        return Err(Error::invalid("peak must be positive"));
    }
    let count = reference.as_slice().len();
    if count == 0 {
        return Err(Error::invalid("psnr of empty features"));
    }
    let sse: T = reference
        .as_slice()
        .iter()
        .zip(generated.as_slice())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    if sse == T::zero() {
        return Ok(Psnr::Infinite);
    }
    let mse = sse / T::count(count);
    Ok(Psnr::Finite(T::lit(10.0) * (peak * peak / mse).log10()))
}

/// Whatever inputs were supplied for one system. Missing entries yield an
/// absent metric in the report rather than an error.
#[derive(Debug, Clone, Default)]
pub struct CorpusInputs<T> {
    pub system: String,
    /// Reference/generated embeddings from the FAD backbone.
    pub fad: Option<(EmbeddingSet<T>, EmbeddingSet<T>)>,
    /// Reference/generated embeddings from the FD backbone.
    pub fd: Option<(EmbeddingSet<T>, EmbeddingSet<T>)>,
    pub logits: Option<PairedLogits<T>>,
    /// Reference/generated paired features for PSNR.
    pub features: Option<(Matrix<T>, Matrix<T>)>,
    pub peak: Option<T>,
    pub kl_eps: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport<T> {
    pub system: String,
    pub fad: Option<T>,
    pub fd: Option<T>,
    pub kld: Option<T>,
    pub psnr: Option<Psnr<T>>,
}

fn frechet_of_sets<T: Real>(pair: &(EmbeddingSet<T>, EmbeddingSet<T>)) -> Result<T> {
    frechet_distance(&fit_gaussian(&pair.0)?, &fit_gaussian(&pair.1)?)
}

pub fn evaluate_corpus<T: Real>(inputs: &CorpusInputs<T>) -> Result<MetricReport<T>> {
    Ok(MetricReport {
        system: inputs.system.clone(),
        fad: inputs.fad.as_ref().map(frechet_of_sets).transpose()?,
        fd: inputs.fd.as_ref().map(frechet_of_sets).transpose()?,
        kld: inputs
            .logits
            .as_ref()
            .map(|l| kl_sigmoid(l, inputs.kl_eps.unwrap_or(T::lit(DEFAULT_KL_EPS))))
            .transpose()?,
        psnr: inputs
            .features
            .as_ref()
            .map(|(r, g)| psnr(r, g, inputs.peak.unwrap_or(T::one())))
            .transpose()?,
    })
}

/// `system, FAD, FD, KLD, PSNR`; absent metrics render as `n/a`.
pub fn metric_table<T: Real>(reports: &[MetricReport<T>]) -> Table {
    let mut t = Table::new(["system", "FAD", "FD", "KLD", "PSNR"]);
    let num = |v: Option<T>| v.map_or_else(|| "n/a".to_string(), |v| fmt_num(v.to_f64().unwrap_or(f64::NAN), 6));
    for r in reports {
        t.push([
            r.system.clone(),
            num(r.fad),
            num(r.fd),
            num(r.kld),
            r.psnr.map_or_else(|| "n/a".to_string(), |p| p.to_string()),
        ]);
    }
    t
}
