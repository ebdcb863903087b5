//! Shared helpers for integration tests: signal synthesis, corpus
//! generation, and synthetic embeddings.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use helicality::cqt::CqtParams;
use helicality::mds::{Embedding, OctaveLayout};

pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(path, spec).unwrap();
    for &s in samples {
        w.write_sample(s as f32).unwrap();
    }
    w.finalize().unwrap();
}

pub fn sine(freq: f64, sample_rate: u32, seconds: f64, amp: f64) -> Vec<f64> {
    let n = (sample_rate as f64 * seconds) as usize;
    (0..n)
        .map(|i| amp * (2.0 * PI * freq * i as f64 / sample_rate as f64).sin())
        .collect()
}

/// Band-limited sawtooth by additive synthesis up to Nyquist.
pub fn sawtooth(freq: f64, sample_rate: u32, seconds: f64, amp: f64) -> Vec<f64> {
    let n = (sample_rate as f64 * seconds) as usize;
    let n_harmonics = ((sample_rate as f64 / 2.0) / freq).floor() as usize;
    let norm = 2.0 / PI;
    (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate as f64;
            let mut acc = 0.0;
            for h in 1..=n_harmonics {
                acc += (2.0 * PI * h as f64 * freq * t).sin() / h as f64;
            }
            amp * norm * acc
        })
        .collect()
}

pub fn white_noise(n: usize, seed: u64, amp: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| amp * rng.gen_range(-1.0..1.0)).collect()
}

/// CQT parameters sized for fast tests: C2 base, 6 computed octaves.
pub fn fast_params() -> CqtParams {
    CqtParams {
        bins_per_octave: 24,
        n_octaves_computed: 6,
        f_min: 65.406,
        hop_length: 512,
        target_sample_rate: 22050,
    }
}

/// Tone-corpus file duration; must exceed the longest analysis window of
/// [`fast_params`].
pub const TONE_SECONDS: f64 = 0.7;

/// 24 chromas x 3 octaves x 4 amplitudes of sawtooth tones, fundamentals
/// from C3. Returns the manifest path.
pub fn tone_corpus(dir: &Path) -> PathBuf {
    let sr = 22050;
    let base = 130.8128; // C3
    let mut manifest = String::from("path,group\n");
    for chroma in 0..24 {
        for octave in 0..3 {
            let freq = base * 2f64.powf(octave as f64 + chroma as f64 / 24.0);
            for (ai, amp) in [0.2, 0.4, 0.6, 0.8].iter().enumerate() {
                let name = format!("tone_c{chroma:02}_o{octave}_a{ai}.wav");
                write_wav(&dir.join(&name), &sawtooth(freq, sr, TONE_SECONDS, *amp), sr);
                manifest.push_str(&format!("{name},tones\n"));
            }
        }
    }
    let path = dir.join("tones.csv");
    std::fs::write(&path, manifest).unwrap();
    path
}

/// 288 white-noise files of matching length. Returns the manifest path.
pub fn noise_corpus(dir: &Path, seed: u64) -> PathBuf {
    let sr = 22050;
    let n = (sr as f64 * TONE_SECONDS) as usize;
    let mut manifest = String::from("path,group\n");
    for i in 0..288 {
        let name = format!("noise_{seed}_{i:03}.wav");
        write_wav(
            &dir.join(&name),
            &white_noise(n, seed.wrapping_mul(1000).wrapping_add(i), 0.5),
            sr,
        );
        manifest.push_str(&format!("{name},noise\n"));
    }
    let path = dir.join(format!("noise_{seed}.csv"));
    std::fs::write(&path, manifest).unwrap();
    path
}

/// Exact Shepard-Risset helix embedding: one turn per `q` bins.
pub fn exact_helix(
    q: usize,
    j: usize,
    radius: f64,
    center: [f64; 2],
    theta0: f64,
    winding: f64,
    slope: f64,
    intercept: f64,
) -> Embedding {
    let p = q * j;
    let coords = Array2::from_shape_fn((p, 3), |(i, m)| {
        let theta = theta0 + winding * 2.0 * PI * i as f64 / q as f64;
        match m {
            0 => center[0] + radius * theta.cos(),
            1 => center[1] + radius * theta.sin(),
            _ => slope * (i + 1) as f64 + intercept,
        }
    });
    Embedding::new(
        coords,
        vec![3.0, 2.0, 1.0],
        OctaveLayout {
            bins_per_octave: q,
            n_octaves: j,
        },
    )
}

/// Standard normal deviate by Box-Muller.
pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Add iid Gaussian noise of scale sigma to every coordinate.
pub fn noisy_helix(base: &Embedding, sigma: f64, rng: &mut ChaCha8Rng) -> Embedding {
    let mut emb = base.clone();
    for v in emb.coords.iter_mut() {
        *v += sigma * gaussian(rng);
    }
    emb
}
