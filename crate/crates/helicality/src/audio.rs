//! WAV decoding, channel downmix, and sample-rate conversion.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};

/// Mono audio at a known sample rate, samples in [-1, 1].
#[derive(Debug, Clone)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        assert!(sample_rate > 0, "sample_rate must be positive");
        AudioBuffer {
            samples,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Decode a PCM WAV file (16/24/32-bit int or 32-bit float, mono or stereo),
/// downmix to mono by channel mean, and resample to `target_sample_rate`.
pub fn load_audio(path: &Path, target_sample_rate: u32) -> Result<AudioBuffer> {
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::Unsupported => Error::UnsupportedEncoding {
            path: path.to_path_buf(),
            reason: "unsupported WAV variant".into(),
        },
        other => Error::UnreadableFile {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    })?;
    let spec = reader.spec();
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>(),
        (hound::SampleFormat::Int, bits @ (16 | 24 | 32)) => {
            let scale = 1.0 / (1i64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()
        }
        (fmt, bits) => {
            return Err(Error::UnsupportedEncoding {
                path: path.to_path_buf(),
                reason: format!("{bits}-bit {fmt:?} samples"),
            })
        }
    }
    .map_err(|e| Error::UnreadableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;

    if interleaved.is_empty() {
        return Err(Error::EmptyAudio {
            path: path.to_path_buf(),
        });
    }

    let mono = downmix(&interleaved, spec.channels as usize);
    let resampled = resample(&mono, spec.sample_rate, target_sample_rate);
    Ok(AudioBuffer::new(resampled, target_sample_rate))
}

/// Mean across channels of interleaved frames. Trailing partial frames are dropped.
fn downmix(interleaved: &[f64], channels: usize) -> Vec<f64> {
    if channels <= 1 {
        return interleaved.to_vec();
    }
    interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect()
}

// Half-width of the sinc interpolation kernel, in zero crossings.
const SINC_ZERO_CROSSINGS: usize = 32;

/// Windowed-sinc resampling from `from_rate` to `to_rate`.
///
/// The kernel is a Hann-windowed sinc with cutoff at the lower of the two
/// Nyquist frequencies, so downsampling is band-limited.
pub fn resample(input: &[f64], from_rate: u32, to_rate: u32) -> Vec<f64> {
    if from_rate == to_rate || input.is_empty() {
        return input.to_vec();
    }
    let ratio = to_rate as f64 / from_rate as f64;
    let cutoff = ratio.min(1.0);
    // kernel half-width in input samples
    let half_width = (SINC_ZERO_CROSSINGS as f64 / cutoff).ceil();
    let n_out = (input.len() as f64 * ratio).ceil() as usize;

    let mut out = Vec::with_capacity(n_out);
    for i in 0..n_out {
        let t = i as f64 / ratio;
        let j_lo = ((t - half_width).ceil() as i64).max(0) as usize;
        let j_hi = (((t + half_width).floor() as i64) as usize).min(input.len().saturating_sub(1));
        let mut acc = 0.0;
        for j in j_lo..=j_hi {
            let x = t - j as f64;
            acc += input[j] * windowed_sinc(x, cutoff, half_width);
        }
        out.push(acc.clamp(-1.0, 1.0));
    }
    out
}

fn windowed_sinc(x: f64, cutoff: f64, half_width: f64) -> f64 {
    let sinc = if x.abs() < 1e-12 {
        cutoff
    } else {
        (PI * cutoff * x).sin() / (PI * x)
    };
    // Hann window over [-half_width, half_width]
    let w = 0.5 * (1.0 + (PI * x / half_width).cos());
    sinc * w
}
