//! PCM preparation: truncation, band-limited resampling and WAV I/O.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Keeps at most `max_seconds · rate` leading samples.
pub fn truncate<T: Clone>(samples: &[T], max_seconds: f64, rate: u32) -> Vec<T> {
    let limit = (max_seconds.max(0.0) * rate as f64).floor() as usize;
    samples[..samples.len().min(limit)].to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResamplerConfig {
    /// Filter taps per polyphase branch.
    pub taps_per_phase: usize,
    /// Kaiser window shape parameter.
    pub kaiser_beta: f64,
    /// Passband edge as a fraction of the lower Nyquist frequency.
    pub cutoff: f64,
}

impl Default for ResamplerConfig {
    fn default() -> Self {
        Self { taps_per_phase: 64, kaiser_beta: 8.6, cutoff: 0.95 }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Rational-ratio polyphase resampler with a Kaiser-windowed sinc kernel.
///
/// For a ratio `up/down` (reduced), output sample `n` sits at input position
/// `n·down/up`; its fractional part selects one of `up` precomputed branches.
/// Each branch is normalized to unit DC gain.
#[derive(Debug, Clone)]
pub struct Resampler {
    from_rate: u32,
    to_rate: u32,
    up: u64,
    down: u64,
    taps: usize,
    branches: Vec<Vec<f64>>,
}

impl Resampler {
    pub fn new(from_rate: u32, to_rate: u32, cfg: ResamplerConfig) -> Result<Self> {
        if from_rate == 0 || to_rate == 0 {
            return Err(Error::invalid("sample rates must be positive"));
        }
        if cfg.taps_per_phase < 2 || cfg.taps_per_phase % 2 != 0 {
            return Err(Error::invalid("taps_per_phase must be an even number >= 2"));
        }
        if !(cfg.cutoff > 0.0 && cfg.cutoff <= 1.0) {
            return Err(Error::invalid("cutoff must be in (0, 1]"));
        }
        let g = gcd(from_rate as u64, to_rate as u64);
        let up = to_rate as u64 / g;
        let down = from_rate as u64 / g;
        let taps = cfg.taps_per_phase;
        let half = (taps / 2) as f64;
        // Cutoff in cycles per input sample, relative to the input Nyquist.
        let fc = cfg.cutoff * (up as f64 / down as f64).min(1.0);
        let norm = bessel_i0(cfg.kaiser_beta);

        let branches = if up == down {
            Vec::new()
        } else {
            (0..up)
                .map(|p| {
                    let frac = p as f64 / up as f64;
                    let mut h: Vec<f64> = (0..taps)
                        .map(|j| {
                            let t = (j as f64 - half + 1.0) - frac;
                            let r = t / half;
                            if r.abs() > 1.0 {
                                return 0.0;
                            }
                            let w = bessel_i0(cfg.kaiser_beta * (1.0 - r * r).sqrt()) / norm;
                            fc * sinc(fc * t) * w
                        })
                        .collect();
                    let sum: f64 = h.iter().sum();
                    for v in &mut h {
                        *v /= sum;
                    }
                    h
                })
                .collect()
        };
        Ok(Self { from_rate, to_rate, up, down, taps, branches })
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        let num = input_len as u128 * self.to_rate as u128;
        let den = self.from_rate as u128;
        ((num + den / 2) / den) as usize
    }

    pub fn process<T: Real>(&self, input: &[T]) -> Vec<T> {
        if self.up == self.down {
            return input.to_vec();
        }
        let out_len = self.output_len(input.len());
        let half = (self.taps / 2) as i64;
        let len = input.len() as i64;
        (0..out_len)
            .map(|n| {
                let pos = n as u64 * self.down;
                let base = (pos / self.up) as i64;
                let branch = &self.branches[(pos % self.up) as usize];
                let mut acc = 0.0f64;
                for (j, &h) in branch.iter().enumerate() {
                    let idx = base + j as i64 - half + 1;
                    if (0..len).contains(&idx) {
                        acc += h * input[idx as usize].to_f64().unwrap_or(0.0);
                    }
                }
                T::lit(acc)
            })
            .collect()
    }
}

/// Resamples with the default quality settings. Equal rates return the input
/// unchanged.
pub fn resample<T: Real>(samples: &[T], from_rate: u32, to_rate: u32) -> Result<Vec<T>> {
    Ok(Resampler::new(from_rate, to_rate, ResamplerConfig::default())?.process(samples))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleFormat {
    Int16,
    Float32,
}

/// De-interleaved PCM audio, samples in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub sample_rate: u32,
    pub channels: Vec<Vec<f32>>,
}

impl AudioClip {
    pub fn duration_s(&self) -> f64 {
        self.channels.first().map_or(0.0, |c| c.len() as f64 / self.sample_rate as f64)
    }
}

fn wav_err(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::data(format!("wav: {other}")),
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let mut reader = hound::WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    let n_ch = spec.channels as usize;
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => {
            reader.samples::<f32>().collect::<std::result::Result<_, _>>().map_err(wav_err)?
        }
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
        (fmt, bits) => {
            return Err(Error::data(format!("unsupported WAV encoding: {fmt:?} {bits}-bit")));
        }
    };
    let mut channels = vec![Vec::with_capacity(interleaved.len() / n_ch.max(1)); n_ch];
    for frame in interleaved.chunks(n_ch) {
        for (c, &s) in frame.iter().enumerate() {
            channels[c].push(s);
        }
    }
    Ok(AudioClip { sample_rate: spec.sample_rate, channels })
}

pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip, format: SampleFormat) -> Result<()> {
    let spec = hound::WavSpec {
        channels: clip.channels.len() as u16,
        sample_rate: clip.sample_rate,
        bits_per_sample: match format {
            SampleFormat::Int16 => 16,
            SampleFormat::Float32 => 32,
        },
        sample_format: match format {
            SampleFormat::Int16 => hound::SampleFormat::Int,
            SampleFormat::Float32 => hound::SampleFormat::Float,
        },
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    let frames = clip.channels.first().map_or(0, Vec::len);
    for i in 0..frames {
        for ch in &clip.channels {
            match format {
                SampleFormat::Int16 => {
                    let v = (ch[i].clamp(-1.0, 1.0) * 32767.0).round() as i16;
                    writer.write_sample(v).map_err(wav_err)?;
                }
                SampleFormat::Float32 => writer.write_sample(ch[i]).map_err(wav_err)?,
            }
        }
    }
    writer.finalize().map_err(wav_err)
}

/// Truncate then resample every channel.
pub fn prepare_clip(clip: &AudioClip, max_seconds: f64, to_rate: u32, cfg: ResamplerConfig) -> Result<AudioClip> {
    let resampler = Resampler::new(clip.sample_rate, to_rate, cfg)?;
    let channels = clip
        .channels
        .iter()
        .map(|ch| resampler.process(&truncate(ch, max_seconds, clip.sample_rate)))
        .collect();
    Ok(AudioClip { sample_rate: to_rate, channels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn truncate_examples() {
        let long = vec![0.0f32; 45 * 32_000];
        assert_eq!(truncate(&long, 30.0, 32_000).len(), 960_000);
        let short = vec![1.0f32; 10 * 16_000];
        assert_eq!(truncate(&short, 30.0, 16_000), short);
        assert_eq!(truncate(&long, 10.0, 32_000).len(), 320_000);
    }

    #[test]
    fn equal_rates_pass_through_bit_identically() {
        let x: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin() * 1e-3 + i as f64).collect();
        assert_eq!(resample(&x, 44_100, 44_100).unwrap(), x);
    }

    #[test]
    fn output_length_rounds() {
        let r = Resampler::new(44_100, 32_000, ResamplerConfig::default()).unwrap();
        assert_eq!(r.output_len(44_100), 32_000);
        assert_eq!(r.output_len(3), 2); // 2.177 -> 2
        assert!(Resampler::new(0, 16_000, ResamplerConfig::default()).is_err());
    }

    #[test]
    fn dc_is_preserved_away_from_edges() {
        let x = vec![0.25f64; 4000];
        let y = resample(&x, 32_000, 16_000).unwrap();
        for v in &y[100..1900] {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn bessel_matches_reference() {
        // I0(1) = 1.2660658777520082
        assert!((bessel_i0(1.0) - 1.2660658777520082).abs() < 1e-15);
    }

    #[test]
    fn wav_round_trip_float_and_int() {
        let dir = tempfile::tempdir().unwrap();
        let clip = AudioClip {
            sample_rate: 16_000,
            channels: vec![(0..800).map(|i| ((i as f32) * 0.05).sin() * 0.5).collect()],
        };
        let p = dir.path().join("f.wav");
        write_wav(&p, &clip, SampleFormat::Float32).unwrap();
        assert_eq!(read_wav(&p).unwrap(), clip);
        let p = dir.path().join("i.wav");
        write_wav(&p, &clip, SampleFormat::Int16).unwrap();
        let back = read_wav(&p).unwrap();
        for (a, b) in back.channels[0].iter().zip(&clip.channels[0]) {
            assert!((a - b).abs() < 1.0 / 16_000.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn resampler_is_linear(
            a in prop::collection::vec(-1.0f64..1.0, 50..200),
            seed in 0u64..1000
        ) {
            let b: Vec<f64> = a.iter().enumerate().map(|(i, _)| ((i as u64 * 31 + seed) % 17) as f64 / 17.0 - 0.5).collect();
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            for (from, to) in [(32_000, 16_000), (16_000, 32_000), (44_100, 32_000)] {
                let ya = resample(&a, from, to).unwrap();
                let yb = resample(&b, from, to).unwrap();
                let ys = resample(&sum, from, to).unwrap();
                let scale = ys.iter().fold(1e-12f64, |m, v| m.max(v.abs()));
                for i in 0..ys.len() {
                    prop_assert!((ys[i] - ya[i] - yb[i]).abs() <= 1e-6 * scale);
                }
            }
        }
    }
}
