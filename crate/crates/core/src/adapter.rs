//! Bottleneck residual adapter.
//!
//! `y = x + Up(GeLU(Down(x)))`, applied independently at every position. Row
//! vectors throughout: a batch is an `n × d` matrix, `Down` is `d × b`, `Up`
//! is `b × d`, with `b = max(1, floor(d / r))`.
//!
//! The dense variant sits after a transformer decoder and sees a sequence of
//! embeddings; the 1×1-convolution variant sits inside a UNet stage and sees a
//! channel-major feature map. A kernel-size-1 convolution is the same map per
//! spatial position, so both share parameters and agree exactly.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::emb::{read_emb_all, write_emb};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;
use crate::table::{fmt_num, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Dense,
    Conv1x1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterConfig {
    pub variant: Variant,
    pub d: usize,
    pub r: usize,
}

impl AdapterConfig {
    pub const DEFAULT_REDUCTION: usize = 8;

    pub fn new(variant: Variant, d: usize, r: usize) -> Result<Self> {
        if r == 0 || d < r {
            return Err(Error::invalid(format!("adapter needs d >= r >= 1, got d={d}, r={r}")));
        }
        Ok(Self { variant, d, r })
    }

    pub fn bottleneck(&self) -> usize {
        (self.d / self.r).max(1)
    }
}

/// Dense adapter after a 2048-wide decoder with a 4× bottleneck: 2,099,712
/// parameters, about 0.1% of a 2B-parameter host.
pub const DECODER_ADAPTER: AdapterConfig = AdapterConfig { variant: Variant::Dense, d: 2048, r: 4 };
pub const DECODER_HOST_PARAMS: u64 = 2_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBudget {
    pub count: u64,
    pub fraction: f64,
}

/// `2·d·b + b + d` per site.
pub fn param_count(cfg: &AdapterConfig, n_sites: usize) -> u64 {
    let d = cfg.d as u64;
    let b = cfg.bottleneck() as u64;
    (2 * d * b + b + d) * n_sites as u64
}

pub fn param_budget(cfg: &AdapterConfig, n_sites: usize, base_params: u64) -> Result<ParamBudget> {
    if base_params == 0 {
        return Err(Error::invalid("base parameter count must be positive"));
    }
    let count = param_count(cfg, n_sites);
    Ok(ParamBudget { count, fraction: count as f64 / base_params as f64 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterParams<T> {
    pub down_weights: Matrix<T>,
    pub down_bias: Vec<T>,
    pub up_weights: Matrix<T>,
    pub up_bias: Vec<T>,
    pub reduction_factor: usize,
}

impl<T: Real> AdapterParams<T> {
    pub fn zeros(cfg: &AdapterConfig) -> Self {
        let (d, b) = (cfg.d, cfg.bottleneck());
        Self {
            down_weights: Matrix::zeros(d, b),
            down_bias: vec![T::zero(); b],
            up_weights: Matrix::zeros(b, d),
            up_bias: vec![T::zero(); d],
            reduction_factor: cfg.r,
        }
    }

    /// Down projection uniform in ±1/√d, everything else zero, so the adapter
    /// starts as the identity.
    pub fn init(cfg: &AdapterConfig, seed: u64) -> Self {
        let mut p = Self::zeros(cfg);
        let bound = 1.0 / (cfg.d as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for w in p.down_weights.as_mut_slice() {
            *w = T::lit(rng.random_range(-bound..bound));
        }
        p
    }

    pub fn d(&self) -> usize {
        self.down_weights.rows()
    }

    pub fn bottleneck(&self) -> usize {
        self.down_weights.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let (d, b) = self.down_weights.shape();
        if self.down_bias.len() != b || self.up_weights.shape() != (b, d) || self.up_bias.len() != d {
            return Err(Error::invalid("inconsistent adapter tensor shapes"));
        }
        if !self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite())) {
            return Err(Error::invalid("adapter parameters must be finite"));
        }
        Ok(())
    }

    fn tensors(&self) -> [&[T]; 4] {
        [self.down_weights.as_slice(), &self.down_bias, self.up_weights.as_slice(), &self.up_bias]
    }

    fn tensors_mut(&mut self) -> [&mut [T]; 4] {
        [self.down_weights.as_mut_slice(), &mut self.down_bias, self.up_weights.as_mut_slice(), &mut self.up_bias]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

/// Gradients with the same layout as the parameters.
pub type AdapterGrads<T> = AdapterParams<T>;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn gelu<T: Real>(x: T) -> T {
    T::lit(0.5) * x * (T::one() + (x / T::lit(SQRT_2)).erf())
}

pub fn gelu_grad<T: Real>(x: T) -> T {
    let cdf = T::lit(0.5) * (T::one() + (x / T::lit(SQRT_2)).erf());
    cdf + x * T::lit(INV_SQRT_2PI) * (-(x * x) / T::lit(2.0)).exp()
}

fn check_width<T: Real>(x: &Matrix<T>, p: &AdapterParams<T>) -> Result<()> {
    if x.cols() != p.d() {
        return Err(Error::invalid(format!("input width {} does not match adapter width {}", x.cols(), p.d())));
    }
    Ok(())
}

fn add_row_bias<T: Real>(m: &mut Matrix<T>, bias: &[T]) {
    for i in 0..m.rows() {
        for (v, &b) in m.row_mut(i).iter_mut().zip(bias) {
            *v += b;
        }
    }
}

fn column_sums<T: Real>(m: &Matrix<T>) -> Vec<T> {
    let mut out = vec![T::zero(); m.cols()];
    for row in m.row_iter() {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    out
}

/// Pre-activation of the bottleneck, `x·Down + b_down`.
fn pre_activation<T: Real>(x: &Matrix<T>, p: &AdapterParams<T>) -> Result<Matrix<T>> {
    let mut pre = x.matmul(&p.down_weights)?;
    add_row_bias(&mut pre, &p.down_bias);
    Ok(pre)
}

/// Dense forward over a batch of positions (`n × d`).
pub fn adapter_forward<T: Real>(x: &Matrix<T>, p: &AdapterParams<T>) -> Result<Matrix<T>> {
    check_width(x, p)?;
    let act = pre_activation(x, p)?.map(gelu);
    let mut delta = act.matmul(&p.up_weights)?;
    add_row_bias(&mut delta, &p.up_bias);
    x.add(&delta)
}

/// Returns `(grad_x, grad_params)` for upstream gradient `g = dL/dy`.
pub fn adapter_backward<T: Real>(
    x: &Matrix<T>,
    p: &AdapterParams<T>,
    g: &Matrix<T>,
) -> Result<(Matrix<T>, AdapterGrads<T>)> {
    check_width(x, p)?;
    if g.shape() != x.shape() {
        return Err(Error::invalid("upstream gradient shape differs from input"));
    }
    let pre = pre_activation(x, p)?;
    let act = pre.map(gelu);

    let up_weights = act.transpose().matmul(g)?;
    let up_bias = column_sums(g);
    let d_act = g.matmul(&p.up_weights.transpose())?;
    let d_pre = d_act.zip_with(&pre.map(gelu_grad), |a, b| a * b)?;
    let down_weights = x.transpose().matmul(&d_pre)?;
    let down_bias = column_sums(&d_pre);
    let grad_x = g.add(&d_pre.matmul(&p.down_weights.transpose())?)?;

    let grads = AdapterParams { down_weights, down_bias, up_weights, up_bias, reduction_factor: p.reduction_factor };
    Ok((grad_x, grads))
}

/// Channel-major feature map: `channels × positions`, with the spatial shape
/// kept for round-tripping.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<T> {
    pub spatial: Vec<usize>,
    pub data: Matrix<T>,
}

impl<T: Real> FeatureMap<T> {
    pub fn new(channels: usize, spatial: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let positions = spatial.iter().product();
        Ok(Self { spatial, data: Matrix::from_vec(channels, positions, data)? })
    }

    pub fn channels(&self) -> usize {
        self.data.rows()
    }

    pub fn positions(&self) -> usize {
        self.data.cols()
    }

    /// `positions × channels`, the dense variant's layout.
    pub fn to_sequence(&self) -> Matrix<T> {
        self.data.transpose()
    }

    pub fn from_sequence(seq: &Matrix<T>, spatial: Vec<usize>) -> Result<Self> {
        if spatial.iter().product::<usize>() != seq.rows() {
            return Err(Error::invalid("spatial shape does not match sequence length"));
        }
        Ok(Self { spatial, data: seq.transpose() })
    }
}

/// Kernel-size-1 convolution forward, computed position by position on the
/// channel-major layout.
pub fn conv1x1_forward<T: Real>(fm: &FeatureMap<T>, p: &AdapterParams<T>) -> Result<FeatureMap<T>> {
    let (c, n) = fm.data.shape();
    if c != p.d() {
        return Err(Error::invalid(format!("feature map has {c} channels, adapter expects {}", p.d())));
    }
    let b = p.bottleneck();
    let mut out = Matrix::zeros(c, n);
    let mut hidden = vec![T::zero(); b];
    for pos in 0..n {
        for (j, h) in hidden.iter_mut().enumerate() {
            let mut acc = T::zero();
            for k in 0..c {
                acc += fm.data[(k, pos)] * p.down_weights[(k, j)];
            }
            *h = gelu(acc + p.down_bias[j]);
        }
        for j in 0..c {
            let mut acc = T::zero();
            for (k, &h) in hidden.iter().enumerate() {
                acc += h * p.up_weights[(k, j)];
            }
            out[(j, pos)] = fm.data[(j, pos)] + (acc + p.up_bias[j]);
        }
    }
    Ok(FeatureMap { spatial: fm.spatial.clone(), data: out })
}

pub fn conv1x1_backward<T: Real>(
    fm: &FeatureMap<T>,
    p: &AdapterParams<T>,
    g: &FeatureMap<T>,
) -> Result<(FeatureMap<T>, AdapterGrads<T>)> {
    let (gx, gp) = adapter_backward(&fm.to_sequence(), p, &g.to_sequence())?;
    Ok((FeatureMap::from_sequence(&gx, fm.spatial.clone())?, gp))
}

/// Mean squared error over every element.
pub fn mse<T: Real>(y: &Matrix<T>, target: &Matrix<T>) -> Result<T> {
    let diff = y.sub(target)?;
    let n = diff.as_slice().len().max(1);
    Ok(diff.as_slice().iter().map(|&v| v * v).sum::<T>() / T::count(n))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub weight_decay: T,
    /// Global L2 norm cap on the gradient, applied before the moment update.
    pub max_grad_norm: Option<T>,
}

impl<T: Real> Default for AdamWConfig<T> {
    fn default() -> Self {
        Self {
            lr: T::lit(5e-5),
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
            weight_decay: T::lit(0.05),
            max_grad_norm: Some(T::one()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub step: usize,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Real> AdamState<T> {
    pub fn new(p: &AdapterParams<T>) -> Self {
        let n = p.num_params();
        Self { step: 0, m: vec![T::zero(); n], v: vec![T::zero(); n] }
    }
}

/// One full-batch AdamW step on the reconstruction loss. Returns the loss
/// evaluated before the update.
pub fn train_step<T: Real>(
    input: &Matrix<T>,
    target: &Matrix<T>,
    p: &mut AdapterParams<T>,
    state: &mut AdamState<T>,
    cfg: &AdamWConfig<T>,
) -> Result<T> {
    if input.shape() != target.shape() {
        return Err(Error::invalid("input and target batches differ in shape"));
    }
    if input.rows() == 0 {
        return Err(Error::invalid("empty training batch"));
    }
    if state.m.len() != p.num_params() {
        return Err(Error::invalid("optimizer state does not match parameters"));
    }
    let y = adapter_forward(input, p)?;
    let loss = mse(&y, target)?;
    if !loss.is_finite() {
        return Err(Error::Training { step: state.step + 1, loss: loss.to_f64().unwrap_or(f64::NAN) });
    }
    let scale = T::lit(2.0) / T::count(y.as_slice().len());
    let g = y.sub(target)?.scale(scale);
    let (_, mut grads) = adapter_backward(input, p, &g)?;

    if let Some(max_norm) = cfg.max_grad_norm {
        let norm = grads.tensors().iter().flat_map(|t| t.iter()).map(|&v| v * v).sum::<T>().sqrt();
        if norm > max_norm {
            let f = max_norm / norm;
            for t in grads.tensors_mut() {
                t.iter_mut().for_each(|v| *v *= f);
            }
        }
    }

    state.step += 1;
    let t = T::count(state.step);
    let bc1 = T::one() - cfg.beta1.powf(t);
    let bc2 = T::one() - cfg.beta2.powf(t);
    let flat_grads = grads.tensors().concat();
    let mut i = 0;
    for tensor in p.tensors_mut() {
        for w in tensor.iter_mut() {
            let gi = flat_grads[i];
            state.m[i] = cfg.beta1 * state.m[i] + (T::one() - cfg.beta1) * gi;
            state.v[i] = cfg.beta2 * state.v[i] + (T::one() - cfg.beta2) * gi * gi;
            let m_hat = state.m[i] / bc1;
            let v_hat = state.v[i] / bc2;
            *w -= cfg.lr * cfg.weight_decay * *w;
            *w -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            i += 1;
        }
    }
    Ok(loss)
}

/// Runs `steps` full-batch updates and returns the loss at each.
pub fn train<T: Real>(
    input: &Matrix<T>,
    target: &Matrix<T>,
    p: &mut AdapterParams<T>,
    cfg: &AdamWConfig<T>,
    steps: usize,
) -> Result<Vec<T>> {
    let mut state = AdamState::new(p);
    (0..steps).map(|_| train_step(input, target, p, &mut state, cfg)).collect()
}

pub fn training_curve_table<T: Real>(losses: &[T]) -> Table {
    let mut t = Table::new(["step", "loss"]);
    for (i, l) in losses.iter().enumerate() {
        t.push([(i + 1).to_string(), fmt_num(l.to_f64().unwrap_or(f64::NAN), 10)]);
    }
    t
}

const TENSOR_NAMES: [&str; 4] = ["down_weights", "down_bias", "up_weights", "up_bias"];

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointIndex {
    reduction_factor: usize,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
}

fn index_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".index.json");
    PathBuf::from(s)
}

/// Writes the four tensors as concatenated EMB1 containers (biases as single
/// rows) plus `<path>.index.json` naming them. Values are stored as `f32`.
pub fn save_checkpoint<T: Real>(path: impl AsRef<Path>, p: &AdapterParams<T>) -> Result<()> {
    let path = path.as_ref();
    p.validate()?;
    let mats = [
        p.down_weights.clone(),
        Matrix::from_vec(1, p.down_bias.len(), p.down_bias.clone())?,
        p.up_weights.clone(),
        Matrix::from_vec(1, p.up_bias.len(), p.up_bias.clone())?,
    ];
    let mut w = BufWriter::new(fs::File::create(path)?);
    for m in &mats {
        write_emb(&mut w, m)?;
    }
    w.flush()?;
    let index = CheckpointIndex {
        reduction_factor: p.reduction_factor,
        tensors: TENSOR_NAMES
            .iter()
            .zip(&mats)
            .map(|(n, m)| TensorEntry { name: n.to_string(), rows: m.rows(), cols: m.cols() })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&index).map_err(|e| Error::data(e.to_string()))?;
    fs::write(index_path(path), json + "\n")?;
    Ok(())
}

pub fn load_checkpoint<T: Real>(path: impl AsRef<Path>) -> Result<AdapterParams<T>> {
    let path = path.as_ref();
    let index: CheckpointIndex = serde_json::from_str(&fs::read_to_string(index_path(path))?)
        .map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
    let mut mats = read_emb_all::<T>(BufReader::new(fs::File::open(path)?))?;
    if mats.len() != index.tensors.len() || index.tensors.len() != TENSOR_NAMES.len() {
        return Err(Error::data("checkpoint tensor count does not match its index"));
    }
    for (entry, m) in index.tensors.iter().zip(&mats) {
        if (entry.rows, entry.cols) != m.shape() {
            return Err(Error::data(format!("tensor {} has shape {:?}, index says {}x{}", entry.name, m.shape(), entry.rows, entry.cols)));
        }
    }
    let mut take = |name: &str| {
        let i = index.tensors.iter().position(|e| e.name == name).ok_or_else(|| Error::data(format!("checkpoint lacks {name}")))?;
        Ok::<_, Error>(std::mem::replace(&mut mats[i], Matrix::zeros(0, 0)))
    };
    let down_weights = take("down_weights")?;
    let down_bias = take("down_bias")?.into_vec();
    let up_weights = take("up_weights")?;
    let up_bias = take("up_bias")?.into_vec();
    let p = AdapterParams { down_weights, down_bias, up_weights, up_bias, reduction_factor: index.reduction_factor };
    p.validate()?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_params(cfg: &AdapterConfig, seed: u64) -> AdapterParams<f64> {
        let mut p = AdapterParams::<f64>::zeros(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in p.tensors_mut() {
            t.iter_mut().for_each(|v| *v = rng.random_range(-0.8..0.8));
        }
        p
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.5..1.5))
    }

    #[test]
    fn param_counts() {
        let cfg = AdapterConfig::new(Variant::Conv1x1, 1024, 8).unwrap();
        assert_eq!(param_count(&cfg, 1), 263_296);
        assert_eq!(param_count(&cfg, 0), 0);
        assert_eq!(param_count(&DECODER_ADAPTER, 1), 2_099_712);
        assert_eq!(AdapterParams::<f32>::zeros(&cfg).num_params() as u64, param_count(&cfg, 1));
        assert_eq!(AdapterConfig::new(Variant::Dense, 10, 3).unwrap().bottleneck(), 3);
        assert!(AdapterConfig::new(Variant::Dense, 2, 4).is_err());
        assert!(AdapterConfig::new(Variant::Dense, 2, 0).is_err());
    }

    #[test]
    fn hand_evaluated_position() {
        // d=2, r=2: one hidden unit.
        let cfg = AdapterConfig::new(Variant::Dense, 2, 2).unwrap();
        let mut p = AdapterParams::<f64>::zeros(&cfg);
        p.down_weights = Matrix::from_rows(&[vec![1.0], vec![-0.5]]).unwrap();
        p.down_bias = vec![0.25];
        p.up_weights = Matrix::from_rows(&[vec![2.0, -1.0]]).unwrap();
        p.up_bias = vec![0.1, 0.2];
        let x = Matrix::from_rows(&[vec![0.5, 1.0]]).unwrap();
        // h = 0.5 - 0.5 + 0.25 = 0.25; gelu(0.25) = 0.125 (1 + erf(0.25/sqrt 2))
        let g = 0.149_676_581_420_730_93;
        let y = adapter_forward(&x, &p).unwrap();
        assert!((y[(0, 0)] - (0.5 + 2.0 * g + 0.1)).abs() < 1e-15);
        assert!((y[(0, 1)] - (1.0 - g + 0.2)).abs() < 1e-15);
    }

    #[test]
    fn zero_up_path_is_identity() {
        let cfg = AdapterConfig::new(Variant::Dense, 16, 4).unwrap();
        let p = AdapterParams::<f64>::init(&cfg, 3);
        let x = random_matrix(7, 16, 4);
        let y = adapter_forward(&x, &p).unwrap();
        assert!(x.as_slice().iter().zip(y.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn batch_equals_per_position() {
        let cfg = AdapterConfig::new(Variant::Dense, 6, 2).unwrap();
        let p = random_params(&cfg, 1);
        let x = random_matrix(5, 6, 2);
        let y = adapter_forward(&x, &p).unwrap();
        for i in 0..5 {
            let row = Matrix::from_vec(1, 6, x.row(i).to_vec()).unwrap();
            assert_eq!(adapter_forward(&row, &p).unwrap().row(0), y.row(i));
        }
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let cfg = AdapterConfig::new(Variant::Dense, 4, 2).unwrap();
        let p = random_params(&cfg, 9);
        let x = random_matrix(3, 4, 8);
        let (gx, gp) = adapter_backward(&x, &p, &Matrix::zeros(3, 4)).unwrap();
        assert!(gx.as_slice().iter().all(|&v| v == 0.0));
        assert!(gp.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn identity_chain_rule() {
        let cfg = AdapterConfig::new(Variant::Dense, 4, 2).unwrap();
        let p = AdapterParams::<f64>::zeros(&cfg);
        let x = random_matrix(3, 4, 1);
        let g = random_matrix(3, 4, 2);
        let (gx, _) = adapter_backward(&x, &p, &g).unwrap();
        assert_eq!(gx, g);
    }

    #[test]
    fn conv_matches_dense_exactly() {
        let cfg = AdapterConfig::new(Variant::Conv1x1, 8, 8).unwrap();
        let p = random_params(&cfg, 5);
        let seq = random_matrix(12, 8, 6);
        let fm = FeatureMap::from_sequence(&seq, vec![3, 4]).unwrap();
        let conv = conv1x1_forward(&fm, &p).unwrap();
        let dense = adapter_forward(&seq, &p).unwrap();
        assert_eq!(conv.to_sequence(), dense);
        assert_eq!(conv.spatial, vec![3, 4]);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let cfg = AdapterConfig::new(Variant::Dense, 4, 2).unwrap();
        let p = AdapterParams::<f64>::zeros(&cfg);
        assert!(adapter_forward(&Matrix::zeros(2, 5), &p).is_err());
        assert!(adapter_backward(&Matrix::zeros(2, 4), &p, &Matrix::zeros(3, 4)).is_err());
    }

    #[test]
    fn lr_zero_and_no_decay_leaves_params() {
        let cfg = AdapterConfig::new(Variant::Dense, 4, 2).unwrap();
        let mut p = random_params(&cfg, 2);
        let before = p.clone();
        let opt = AdamWConfig { lr: 0.0, weight_decay: 0.0, ..AdamWConfig::default() };
        let x = random_matrix(8, 4, 3);
        train(&x, &random_matrix(8, 4, 4), &mut p, &opt, 3).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn reconstruction_target_only_decays() {
        let cfg = AdapterConfig::new(Variant::Dense, 4, 2).unwrap();
        let mut p = AdapterParams::<f64>::init(&cfg, 2);
        let before = p.clone();
        let opt = AdamWConfig { lr: 0.1, weight_decay: 0.5, max_grad_norm: None, ..AdamWConfig::default() };
        let x = random_matrix(8, 4, 3);
        let losses = train(&x, &x, &mut p, &opt, 1).unwrap();
        assert_eq!(losses, vec![0.0]);
        let expected = before.down_weights.map(|w| w - 0.1 * 0.5 * w);
        assert_eq!(p.down_weights, expected);
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let cfg = AdapterConfig::new(Variant::Dense, 2, 1).unwrap();
        let mut p = AdapterParams::<f64>::zeros(&cfg);
        let x = Matrix::from_rows(&[vec![f64::NAN, 0.0]]).unwrap();
        let mut st = AdamState::new(&p);
        let err = train_step(&x, &x, &mut p, &mut st, &AdamWConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Training { step: 1, .. }));
    }

    #[test]
    fn checkpoint_round_trip() {
        let cfg = AdapterConfig::new(Variant::Dense, 6, 3).unwrap();
        let p = random_params(&cfg, 7).tensors_to_f32_grid();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("adapter.emb");
        save_checkpoint(&path, &p).unwrap();
        assert!(dir.path().join("adapter.emb.index.json").exists());
        assert_eq!(load_checkpoint::<f64>(&path).unwrap(), p);
    }

    impl AdapterParams<f64> {
        fn tensors_to_f32_grid(mut self) -> Self {
            for t in self.tensors_mut() {
                t.iter_mut().for_each(|v| *v = *v as f32 as f64);
            }
            self
        }
    }
}
