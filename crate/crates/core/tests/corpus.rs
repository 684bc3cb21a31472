use std::collections::HashSet;
use std::path::PathBuf;

use arena_core::corpus::audio::{prepare_clip, read_wav, resample, truncate, write_wav, AudioClip, ResamplerConfig, SampleFormat};
use arena_core::corpus::census::{disparity_report, load_descriptors, region_table, RegionMap};
use arena_core::corpus::{ingest_metadata, split_by_song, total_hours, TrackMetadata};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn max_song_hours(tracks: &[TrackMetadata]) -> f64 {
    let mut songs = std::collections::HashMap::<&str, f64>::new();
    for t in tracks {
        *songs.entry(&t.song_id).or_default() += t.duration_s;
    }
    songs.values().cloned().fold(0.0, f64::max) / 3600.0
}

#[test]
fn fixture_splits_land_near_published_train_hours() {
    for (file, total, train_hours) in [("corpus/hindustani.jsonl", 23.24, 18.91), ("corpus/makam.jsonl", 121.16, 97.23)] {
        let tracks = ingest_metadata(fixture(file)).unwrap();
        assert!((total_hours(&tracks) - total).abs() < 1e-9);
        let tol = max_song_hours(&tracks);
        for seed in 0..100 {
            let s = split_by_song(&tracks, 0.2, seed).unwrap();
            let train: HashSet<_> = s.train_songs.iter().collect();
            assert!(s.test_songs.iter().all(|song| !train.contains(song)));
            assert_eq!(s.train_ids.len() + s.test_ids.len(), tracks.len());
            assert!((s.train_hours - train_hours).abs() <= tol, "{file} seed {seed}: {}", s.train_hours);
        }
    }
}

fn tone(freq: f64, rate: u32, seconds: f64) -> Vec<f64> {
    let n = (seconds * rate as f64) as usize;
    (0..n).map(|i| (std::f64::consts::TAU * freq * i as f64 / rate as f64).sin()).collect()
}

/// Peak bin frequency and amplitude of a Hann-windowed spectrum.
fn spectral_peak(x: &[f64], rate: u32) -> (f64, f64) {
    let n = x.len();
    let window: Vec<f64> = (0..n).map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos()).collect();
    let mut buf: Vec<Complex<f64>> = x.iter().zip(&window).map(|(&v, &w)| Complex::new(v * w, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let (k, peak) = buf[..n / 2]
        .iter()
        .enumerate()
        .map(|(k, c)| (k, c.norm()))
        .fold((0, 0.0), |acc, v| if v.1 > acc.1 { v } else { acc });
    let gain: f64 = window.iter().sum::<f64>() / 2.0;
    (k as f64 * rate as f64 / n as f64, peak / gain)
}

#[test]
fn resampled_tone_keeps_frequency_and_amplitude() {
    let x = tone(1000.0, 32_000, 1.0);
    let y = resample(&x, 32_000, 16_000).unwrap();
    assert_eq!(y.len(), 16_000);
    let body = &y[1000..15_000];
    let (freq, amp) = spectral_peak(body, 16_000);
    assert!((freq - 1000.0).abs() <= 16_000.0 / body.len() as f64);
    assert!((amp - 1.0).abs() < 0.01, "amplitude {amp}");
    let rms = (body.iter().map(|v| v * v).sum::<f64>() / body.len() as f64).sqrt();
    assert!((rms * 2f64.sqrt() - 1.0).abs() < 0.01);
}

#[test]
fn round_trip_through_lower_rate_preserves_in_band_tone() {
    let x = tone(6000.0, 32_000, 0.5);
    let down = resample(&x, 32_000, 16_000).unwrap();
    let back = resample(&down, 16_000, 32_000).unwrap();
    let (a, b) = (&x[2000..14_000], &back[2000..14_000]);
    let dot: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
    let corr = dot / (a.iter().map(|v| v * v).sum::<f64>().sqrt() * b.iter().map(|v| v * v).sum::<f64>().sqrt());
    assert!(corr > 0.99, "correlation {corr}");
}

#[test]
fn wav_clip_is_truncated_and_resampled() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("clip.wav");
    let samples: Vec<f32> = tone(440.0, 44_100, 40.0).into_iter().map(|v| 0.5 * v as f32).collect();
    let clip = AudioClip { sample_rate: 44_100, channels: vec![samples.clone(), samples] };
    write_wav(&path, &clip, SampleFormat::Int16).unwrap();
    let read = read_wav(&path).unwrap();
    assert_eq!(read.channels.len(), 2);
    let out = prepare_clip(&read, 30.0, 32_000, ResamplerConfig::default()).unwrap();
    assert_eq!(out.sample_rate, 32_000);
    assert_eq!(out.channels[0].len(), 960_000);
    assert!((out.duration_s() - 30.0).abs() < 1e-9);
    assert_eq!(truncate(&[1, 2, 3, 4, 5], 1.0, 2), vec![1, 2]);
}

#[test]
fn census_fixture_reproduces_region_rows() {
    let rows = load_descriptors(fixture("census/datasets.jsonl")).unwrap();
    let report = disparity_report(&rows, &RegionMap::default());
    let expected = [
        ("European", 66, 6127.92),
        ("East Asian", 71, 2746.73),
        ("South Asian", 1, 88.78),
        ("Central Asian", 0, 57.01),
        ("American", 72, 921.84),
        ("Latin American", 5, 323.25),
        ("Oceania", 3, 41.99),
        ("African", 0, 27.50),
        ("Middle Eastern", 5, 37.86),
    ];
    assert_eq!(report.regions.len(), expected.len());
    for (key, papers, hours) in expected {
        let r = report.region(key).unwrap();
        assert_eq!(r.papers, papers);
        assert!((r.hours - hours).abs() < 1e-9);
    }
    assert!((report.region_total() - 10_372.88).abs() < 1e-6);
    assert!((report.western_share.unwrap() - 94.443).abs() < 1e-3);
    assert!((report.non_western_hours - 576.39).abs() < 1e-6);
    assert_eq!(report.excluded.len(), 12);
    assert!((report.excluded_hours - 5772.0).abs() < 1e-9);
    assert_eq!(report.genres.len(), 12);
    assert!(region_table(&report).to_string().starts_with("region\tpapers\thours\tshare\n"));
}
