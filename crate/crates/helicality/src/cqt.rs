//! Constant-Q transform with Hann-windowed complex sinusoid kernels,
//! evaluated frame-wise via FFT and sparse spectral kernels.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

/// Constant-Q analysis parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CqtParams {
    /// Bins per octave (Q).
    pub bins_per_octave: usize,
    /// Number of octaves computed above `f_min`.
    pub n_octaves_computed: usize,
    /// Center frequency of the lowest bin, Hz.
    pub f_min: f64,
    /// Analysis hop in samples.
    pub hop_length: usize,
    /// Sample rate all audio is resampled to, Hz.
    pub target_sample_rate: u32,
}

impl Default for CqtParams {
    fn default() -> Self {
        CqtParams {
            bins_per_octave: 24,
            n_octaves_computed: 8,
            f_min: 32.703, // C1
            hop_length: 512,
            target_sample_rate: 22050,
        }
    }
}

impl CqtParams {
    pub fn validate(&self) -> Result<()> {
        assert!(self.bins_per_octave >= 1);
        assert!(self.n_octaves_computed >= 1);
        assert!(self.f_min > 0.0);
        assert!(self.hop_length > 0);
        let nyquist = self.target_sample_rate as f64 / 2.0;
        let f_top = self.f_min * 2f64.powi(self.n_octaves_computed as i32);
        if f_top >= nyquist {
            return Err(Error::NyquistViolation {
                f_max_hz: f_top,
                nyquist_hz: nyquist,
            });
        }
        Ok(())
    }

    /// Total number of CQT bins.
    pub fn n_bins(&self) -> usize {
        self.bins_per_octave * self.n_octaves_computed
    }

    /// Center frequency of bin `k` (0-based), Hz.
    pub fn bin_frequency(&self, k: usize) -> f64 {
        self.f_min * 2f64.powf(k as f64 / self.bins_per_octave as f64)
    }

    /// Quality factor shared by all filters.
    pub fn quality_factor(&self) -> f64 {
        1.0 / (2f64.powf(1.0 / self.bins_per_octave as f64) - 1.0)
    }

    /// Window length in samples for bin `k`.
    pub fn window_length(&self, k: usize) -> usize {
        (self.quality_factor() * self.target_sample_rate as f64 / self.bin_frequency(k)).ceil()
            as usize
    }

    /// Window length of the lowest (longest) bin.
    pub fn max_window_length(&self) -> usize {
        self.window_length(0)
    }
}

/// CQT magnitudes, bins x frames.
#[derive(Debug, Clone)]
pub struct CqtSpectrum {
    pub magnitudes: Array2<f64>,
    pub params: CqtParams,
}

impl CqtSpectrum {
    pub fn n_frames(&self) -> usize {
        self.magnitudes.ncols()
    }

    /// Index of the frame with the largest Euclidean column norm,
    /// earliest frame on ties.
    pub fn loudest_frame_index(&self) -> usize {
        assert!(self.n_frames() >= 1, "spectrum has no frames");
        let mut best = 0;
        let mut best_norm = -1.0;
        for (t, col) in self.magnitudes.columns().into_iter().enumerate() {
            let norm: f64 = col.iter().map(|&x| x * x).sum();
            if norm > best_norm {
                best_norm = norm;
                best = t;
            }
        }
        best
    }

    /// The loudest frame as a feature vector of length `n_bins`.
    pub fn loudest_frame(&self) -> Vec<f64> {
        self.magnitudes
            .column(self.loudest_frame_index())
            .to_vec()
    }
}

/// Precomputed sparse spectral kernels for one parameter set.
///
/// Build once and reuse across files; construction runs one FFT per bin.
pub struct CqtKernel {
    params: CqtParams,
    fft_len: usize,
    fft: Arc<dyn Fft<f64>>,
    /// Per bin: (spectral index, conj(kernel FFT) / fft_len), pruned below threshold.
    sparse: Vec<Vec<(usize, Complex64)>>,
}

// Spectral kernel entries below this fraction of the bin's peak are dropped.
const KERNEL_SPARSITY_THRESHOLD: f64 = 1e-6;

impl CqtKernel {
    pub fn new(params: &CqtParams) -> Result<Self> {
        params.validate()?;
        let sr = params.target_sample_rate as f64;
        let n_max = params.max_window_length();
        let fft_len = n_max.next_power_of_two();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(fft_len);

        let mut sparse = Vec::with_capacity(params.n_bins());
        let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
        for k in 0..params.n_bins() {
            let f_k = params.bin_frequency(k);
            let n_k = params.window_length(k).min(fft_len);
            buf.fill(Complex64::new(0.0, 0.0));
            let offset = (fft_len - n_k) / 2;
            let center = (n_k as f64 - 1.0) / 2.0;
            let mut window_sum = 0.0;
            for n in 0..n_k {
                let w = hann(n, n_k);
                window_sum += w;
                let phase = 2.0 * PI * f_k * (n as f64 - center) / sr;
                buf[offset + n] = Complex64::new(phase.cos(), phase.sin()) * w;
            }
            for v in buf.iter_mut() {
                *v /= window_sum;
            }
            fft.process(&mut buf);
            let peak = buf.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let cutoff = peak * KERNEL_SPARSITY_THRESHOLD;
            let entries: Vec<(usize, Complex64)> = buf
                .iter()
                .enumerate()
                .filter(|(_, v)| v.norm() > cutoff)
                .map(|(f, v)| (f, v.conj() / fft_len as f64))
                .collect();
            sparse.push(entries);
        }

        Ok(CqtKernel {
            params: params.clone(),
            fft_len,
            fft,
            sparse,
        })
    }

    pub fn params(&self) -> &CqtParams {
        &self.params
    }

    /// Constant-Q magnitude spectrogram of `audio`.
    ///
    /// Frame `t` is centered at sample `t * hop_length`; the signal is
    /// zero-padded at the edges.
    pub fn compute(&self, audio: &AudioBuffer) -> Result<CqtSpectrum> {
        assert_eq!(
            audio.sample_rate, self.params.target_sample_rate,
            "audio must be resampled to the analysis rate first"
        );
        let n = audio.len();
        let n_max = self.params.max_window_length();
        if n < n_max {
            return Err(Error::AudioTooShort {
                n_samples: n,
                min_samples: n_max,
            });
        }
        let hop = self.params.hop_length;
        let n_frames = n.div_ceil(hop);
        let half = self.fft_len as i64 / 2;

        let mut mags = Array2::zeros((self.params.n_bins(), n_frames));
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_len];
        for t in 0..n_frames {
            let center = (t * hop) as i64;
            for (i, v) in buf.iter_mut().enumerate() {
                let j = center - half + i as i64;
                *v = if j >= 0 && (j as usize) < n {
                    Complex64::new(audio.samples[j as usize], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
            self.fft.process(&mut buf);
            for (k, entries) in self.sparse.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for &(f, kv) in entries {
                    acc += buf[f] * kv;
                }
                mags[(k, t)] = acc.norm();
            }
        }

        Ok(CqtSpectrum {
            magnitudes: mags,
            params: self.params.clone(),
        })
    }
}

/// One-shot CQT; prefer [`CqtKernel`] when analyzing many files.
pub fn compute_cqt(audio: &AudioBuffer, params: &CqtParams) -> Result<CqtSpectrum> {
    CqtKernel::new(params)?.compute(audio)
}

fn hann(n: usize, len: usize) -> f64 {
    if len == 1 {
        return 1.0;
    }
    0.5 * (1.0 - (2.0 * PI * n as f64 / (len as f64 - 1.0)).cos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;

    fn sine(freq: f64, sr: u32, seconds: f64, amp: f64) -> AudioBuffer {
        let n = (sr as f64 * seconds) as usize;
        let samples = (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / sr as f64).sin())
            .collect();
        AudioBuffer::new(samples, sr)
    }

    fn small_params() -> CqtParams {
        // fewer octaves keeps the longest window short for fast tests
        CqtParams {
            bins_per_octave: 24,
            n_octaves_computed: 4,
            f_min: 130.81, // C3
            hop_length: 512,
            target_sample_rate: 22050,
        }
    }

    fn time_averaged(spec: &CqtSpectrum) -> Array1<f64> {
        spec.magnitudes.mean_axis(ndarray::Axis(1)).unwrap()
    }

    fn argmax(v: &Array1<f64>) -> usize {
        let mut best = 0;
        for i in 1..v.len() {
            if v[i] > v[best] {
                best = i;
            }
        }
        best
    }

    #[test]
    fn pure_sine_peaks_at_its_bin() {
        let params = small_params();
        let kernel = CqtKernel::new(&params).unwrap();
        for k in [0usize, 11, 24, 50, 95] {
            let f = params.bin_frequency(k);
            let audio = sine(f, 22050, 0.6, 0.5);
            let spec = kernel.compute(&audio).unwrap();
            let avg = time_averaged(&spec);
            assert_eq!(argmax(&avg), k, "sine at bin {k} ({f:.2} Hz)");
        }
    }

    #[test]
    fn silence_gives_zero_magnitudes() {
        let params = small_params();
        let audio = AudioBuffer::new(vec![0.0; 22050], 22050);
        let spec = compute_cqt(&audio, &params).unwrap();
        assert!(spec.magnitudes.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn octave_pair_peaks_differ_by_bins_per_octave() {
        let params = small_params();
        let kernel = CqtKernel::new(&params).unwrap();
        let f = params.bin_frequency(20);
        let lo = kernel.compute(&sine(f, 22050, 0.6, 0.5)).unwrap();
        let hi = kernel.compute(&sine(2.0 * f, 22050, 0.6, 0.5)).unwrap();
        let k_lo = argmax(&time_averaged(&lo));
        let k_hi = argmax(&time_averaged(&hi));
        assert_eq!(k_hi - k_lo, params.bins_per_octave);
    }

    #[test]
    fn scale_covariance() {
        let params = small_params();
        let kernel = CqtKernel::new(&params).unwrap();
        let base = sine(300.0, 22050, 0.5, 0.2);
        let scaled = AudioBuffer::new(base.samples.iter().map(|&x| 3.0 * x).collect(), 22050);
        let a = kernel.compute(&base).unwrap();
        let b = kernel.compute(&scaled).unwrap();
        for (x, y) in a.magnitudes.iter().zip(b.magnitudes.iter()) {
            assert!((y - 3.0 * x).abs() <= 1e-9 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn too_short_audio_errors() {
        let params = CqtParams::default();
        let audio = AudioBuffer::new(vec![0.1; 1000], 22050);
        assert!(matches!(
            compute_cqt(&audio, &params),
            Err(Error::AudioTooShort { .. })
        ));
    }

    #[test]
    fn nyquist_violation_detected() {
        let params = CqtParams {
            n_octaves_computed: 10,
            ..CqtParams::default()
        };
        assert!(matches!(
            params.validate(),
            Err(Error::NyquistViolation { .. })
        ));
    }

    #[test]
    fn loudest_frame_tie_break() {
        let params = small_params();
        let mut mags = Array2::zeros((4, 4));
        for (t, norm) in [1.0, 5.0, 5.0, 2.0].iter().enumerate() {
            mags[(0, t)] = *norm;
        }
        let spec = CqtSpectrum {
            magnitudes: mags,
            params,
        };
        assert_eq!(spec.loudest_frame_index(), 1);
    }

    #[test]
    fn loudest_frame_single_frame() {
        let spec = CqtSpectrum {
            magnitudes: Array2::from_shape_vec((3, 1), vec![1.0, 2.0, 3.0]).unwrap(),
            params: small_params(),
        };
        assert_eq!(spec.loudest_frame_index(), 0);
        assert_eq!(spec.loudest_frame(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn loudest_frame_ignores_appended_zero_frames() {
        let params = small_params();
        let kernel = CqtKernel::new(&params).unwrap();
        let audio = sine(440.0, 22050, 0.6, 0.5);
        let spec = kernel.compute(&audio).unwrap();
        let idx = spec.loudest_frame_index();

        let mut padded = spec.magnitudes.clone();
        padded
            .append(
                ndarray::Axis(1),
                Array2::zeros((padded.nrows(), 5)).view(),
            )
            .unwrap();
        let padded_spec = CqtSpectrum {
            magnitudes: padded,
            params,
        };
        assert_eq!(padded_spec.loudest_frame_index(), idx);
    }

    #[test]
    fn amplitude_ramp_peaks_in_sustained_region() {
        // ramp up over the first half, sustain over the second
        let sr = 22050u32;
        let n = 22050usize;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let env = (i as f64 / (n as f64 / 2.0)).min(1.0);
                0.5 * env * (2.0 * PI * 440.0 * i as f64 / sr as f64).sin()
            })
            .collect();
        let audio = AudioBuffer::new(samples, sr);
        let params = small_params();
        let spec = compute_cqt(&audio, &params).unwrap();
        let idx = spec.loudest_frame_index();
        let hop = params.hop_length;
        assert!(idx * hop >= n / 2, "loudest frame {idx} before the plateau");
    }
}
