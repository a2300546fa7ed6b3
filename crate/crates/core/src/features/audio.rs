//! Short-term audio descriptors averaged over a 2 s window after each event.
//!
//! Per frame (50 ms, 50 % overlap, no window function) we compute zero-crossing
//! rate, energy, entropy of energy, spectral centroid, spread, entropy, flux,
//! rolloff and 13 MFCCs; the event vector is the per-feature mean over frames.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FRAME_FEATURES: usize = 8;
pub const AUDIO_DIMS: usize = 21;

pub const AUDIO_FEATURE_NAMES: [&str; AUDIO_DIMS] = [
    "zcr",
    "energy",
    "energy_entropy",
    "spectral_centroid",
    "spectral_spread",
    "spectral_entropy",
    "spectral_flux",
    "spectral_rolloff",
    "mfcc_1",
    "mfcc_2",
    "mfcc_3",
    "mfcc_4",
    "mfcc_5",
    "mfcc_6",
    "mfcc_7",
    "mfcc_8",
    "mfcc_9",
    "mfcc_10",
    "mfcc_11",
    "mfcc_12",
    "mfcc_13",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AudioConfig {
    pub window_secs: f64,
    pub frame_secs: f64,
    pub overlap: f64,
    pub mel_filters: usize,
    pub mfcc_count: usize,
    pub log_floor: f64,
    pub entropy_subframes: usize,
    pub rolloff_fraction: f64,
}

impl Default for AudioConfig {
    fn default() -> Self {
        Self {
            window_secs: 2.0,
            frame_secs: 0.05,
            overlap: 0.5,
            mel_filters: 26,
            mfcc_count: 13,
            log_floor: 1e-10,
            entropy_subframes: 10,
            rolloff_fraction: 0.9,
        }
    }
}

/// Random access to mono samples; reads past the end yield zeros.
pub trait SampleSource {
    fn sample_rate(&self) -> u32;
    fn len_samples(&self) -> usize;
    fn read_into(&self, start: usize, out: &mut [f64]);
}

#[derive(Clone, Debug, PartialEq)]
pub struct AudioTrack {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl AudioTrack {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Audio("sample rate must be positive".into()));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Reads the first channel of a PCM or float WAV file.
    pub fn read_wav(path: &Path) -> Result<Self> {
        let mut reader = hound::WavReader::open(path)
            .map_err(|e| Error::Audio(format!("{}: {e}", path.display())))?;
        let spec = reader.spec();
        let channels = spec.channels.max(1) as usize;
        let bad = |e: hound::Error| Error::Audio(format!("{}: {e}", path.display()));
        let all: Vec<f32> = match spec.sample_format {
            hound::SampleFormat::Float => reader
                .samples::<f32>()
                .collect::<std::result::Result<_, _>>()
                .map_err(bad)?,
            hound::SampleFormat::Int => {
                let scale = (1i64 << (spec.bits_per_sample - 1)) as f32;
                reader
                    .samples::<i32>()
                    .map(|s| s.map(|v| v as f32 / scale))
                    .collect::<std::result::Result<_, _>>()
                    .map_err(bad)?
            }
        };
        let samples = all.into_iter().step_by(channels).collect();
        Self::new(samples, spec.sample_rate)
    }

    pub fn write_wav(&self, path: &Path) -> Result<()> {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: self.sample_rate,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let err = |e: hound::Error| Error::Audio(format!("{}: {e}", path.display()));
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut w = hound::WavWriter::create(path, spec).map_err(err)?;
        for &s in &self.samples {
            w.write_sample(s).map_err(err)?;
        }
        w.finalize().map_err(err)
    }

    pub fn read_raw_f32(path: &Path, sample_rate: u32) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() % 4 != 0 {
            return Err(Error::Audio(format!(
                "{}: length {} is not a multiple of 4",
                path.display(),
                bytes.len()
            )));
        }
        let samples = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::new(samples, sample_rate)
    }

    pub fn write_raw_f32(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.samples.iter().flat_map(|s| s.to_le_bytes()).collect();
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}

impl SampleSource for AudioTrack {
    fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    fn len_samples(&self) -> usize {
        self.samples.len()
    }

    fn read_into(&self, start: usize, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.samples.get(start + i).copied().unwrap_or(0.0) as f64;
        }
    }
}

/// Contiguous frames starting at multiples of `hop`; a trailing partial frame
/// is dropped, so a signal shorter than one frame yields no frames.
pub fn frame_signal(samples: &[f64], frame_len: usize, hop: usize) -> Result<Vec<&[f64]>> {
    if frame_len == 0 || hop == 0 || hop > frame_len {
        return Err(Error::Audio(format!(
            "invalid framing: frame_len {frame_len}, hop {hop}"
        )));
    }
    if samples.len() < frame_len {
        return Ok(Vec::new());
    }
    let count = (samples.len() - frame_len) / hop + 1;
    Ok((0..count)
        .map(|i| &samples[i * hop..i * hop + frame_len])
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct FrameFeatures {
    pub zcr: f64,
    pub energy: f64,
    pub energy_entropy: f64,
    pub centroid: f64,
    pub spread: f64,
    pub spectral_entropy: f64,
    pub flux: f64,
    pub rolloff: f64,
}

impl FrameFeatures {
    pub fn to_array(self) -> [f64; FRAME_FEATURES] {
        [
            self.zcr,
            self.energy,
            self.energy_entropy,
            self.centroid,
            self.spread,
            self.spectral_entropy,
            self.flux,
            self.rolloff,
        ]
    }
}

/// Shannon entropy (bits) of `parts` normalised to sum 1, with 0·log 0 = 0.
fn entropy_bits(parts: &[f64]) -> f64 {
    let total: f64 = parts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    parts
        .iter()
        .map(|&e| e / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum()
}

/// Energies of `blocks` equal consecutive chunks of `values²`; the remainder
/// that does not fill a chunk is ignored.
fn block_energies(values: &[f64], blocks: usize, squared: bool) -> Vec<f64> {
    let len = values.len() / blocks;
    if len == 0 {
        return vec![0.0; blocks];
    }
    values
        .chunks_exact(len)
        .take(blocks)
        .map(|c| {
            if squared {
                c.iter().map(|v| v * v).sum()
            } else {
                c.iter().sum()
            }
        })
        .collect()
}

/// Frame-level DSP with pre-planned FFT, mel filterbank and cosine basis.
pub struct AudioExtractor {
    cfg: AudioConfig,
    sample_rate: u32,
    frame_len: usize,
    hop: usize,
    fft: Arc<dyn Fft<f64>>,
    mel_bank: Vec<Vec<f64>>,
    dct: Vec<Vec<f64>>,
}

impl AudioExtractor {
    pub fn new(cfg: AudioConfig, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Audio("sample rate must be positive".into()));
        }
        let frame_len = (cfg.frame_secs * sample_rate as f64).round() as usize;
        let hop = ((1.0 - cfg.overlap) * frame_len as f64).round() as usize;
        Self::with_frame(cfg, sample_rate, frame_len, hop)
    }

    pub fn with_frame(cfg: AudioConfig, sample_rate: u32, frame_len: usize, hop: usize) -> Result<Self> {
        if frame_len < 2 || hop == 0 || hop > frame_len {
            return Err(Error::Audio(format!(
                "invalid framing: frame_len {frame_len}, hop {hop}"
            )));
        }
        if cfg.mfcc_count > cfg.mel_filters || cfg.entropy_subframes == 0 {
            return Err(Error::Audio("invalid mel/mfcc/entropy configuration".into()));
        }
        let fft = FftPlanner::new().plan_fft_forward(frame_len);
        let bins = frame_len / 2 + 1;
        let mel_bank = mel_filterbank(cfg.mel_filters, bins, frame_len, sample_rate);
        let dct = dct2_ortho(cfg.mfcc_count, cfg.mel_filters);
        Ok(Self {
            cfg,
            sample_rate,
            frame_len,
            hop,
            fft,
            mel_bank,
            dct,
        })
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn config(&self) -> &AudioConfig {
        &self.cfg
    }

    pub fn bin_frequency(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate as f64 / self.frame_len as f64
    }

    /// |DFT| for bins `0..=N/2`.
    pub fn magnitude_spectrum(&self, frame: &[f64]) -> Vec<f64> {
        assert_eq!(frame.len(), self.frame_len, "frame length mismatch");
        let mut buf: Vec<Complex<f64>> = frame.iter().map(|&x| Complex::new(x, 0.0)).collect();
        self.fft.process(&mut buf);
        buf[..self.frame_len / 2 + 1].iter().map(|c| c.norm()).collect()
    }

    /// The eight scalar descriptors of one frame. Returns them together with
    /// the normalised magnitude spectrum to pass as `prev` for the next frame.
    pub fn compute_frame_features(
        &self,
        frame: &[f64],
        prev: Option<&[f64]>,
    ) -> (FrameFeatures, Vec<f64>) {
        let mag = self.magnitude_spectrum(frame);
        self.features_from_spectrum(frame, &mag, prev)
    }

    fn features_from_spectrum(
        &self,
        frame: &[f64],
        mag: &[f64],
        prev: Option<&[f64]>,
    ) -> (FrameFeatures, Vec<f64>) {
        let n = frame.len();
        let crossings = frame
            .windows(2)
            .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
            .count();
        let zcr = crossings as f64 / (n - 1) as f64;
        let energy = frame.iter().map(|x| x * x).sum::<f64>() / n as f64;
        let energy_entropy = entropy_bits(&block_energies(frame, self.cfg.entropy_subframes, true));

        let total: f64 = mag.iter().sum();
        let (centroid, spread) = if total > 0.0 {
            let c = mag
                .iter()
                .enumerate()
                .map(|(k, m)| self.bin_frequency(k) * m)
                .sum::<f64>()
                / total;
            let var = mag
                .iter()
                .enumerate()
                .map(|(k, m)| (self.bin_frequency(k) - c).powi(2) * m)
                .sum::<f64>()
                / total;
            (c, var.sqrt())
        } else {
            (0.0, 0.0)
        };
        let power: Vec<f64> = mag.iter().map(|m| m * m).collect();
        let spectral_entropy =
            entropy_bits(&block_energies(&power, self.cfg.entropy_subframes, false));

        let normalized: Vec<f64> = if total > 0.0 {
            mag.iter().map(|m| m / total).collect()
        } else {
            vec![0.0; mag.len()]
        };
        let flux = prev
            .map(|p| {
                normalized
                    .iter()
                    .zip(p)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
            })
            .unwrap_or(0.0);

        let mut rolloff = 0.0;
        if total > 0.0 {
            let target = self.cfg.rolloff_fraction * total;
            let mut cum = 0.0;
            for (k, m) in mag.iter().enumerate() {
                cum += m;
                if cum >= target {
                    rolloff = self.bin_frequency(k);
                    break;
                }
            }
        }

        (
            FrameFeatures {
                zcr,
                energy,
                energy_entropy,
                centroid,
                spread,
                spectral_entropy,
                flux,
                rolloff,
            },
            normalized,
        )
    }

    pub fn mfcc(&self, frame: &[f64]) -> Vec<f64> {
        let mag = self.magnitude_spectrum(frame);
        self.mfcc_from_spectrum(&mag)
    }

    fn mfcc_from_spectrum(&self, mag: &[f64]) -> Vec<f64> {
        let n = self.frame_len as f64;
        let power: Vec<f64> = mag.iter().map(|m| m * m / n).collect();
        let log_energies: Vec<f64> = self
            .mel_bank
            .iter()
            .map(|w| {
                let e: f64 = w.iter().zip(&power).map(|(a, b)| a * b).sum();
                e.max(self.cfg.log_floor).ln()
            })
            .collect();
        self.dct
            .iter()
            .map(|row| row.iter().zip(&log_energies).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Mean frame descriptors (8 scalars + MFCCs) over `[t, t + window)`.
    pub fn event_features(&self, source: &dyn SampleSource, event_time: f64) -> Result<Vec<f64>> {
        if !(event_time >= 0.0) {
            return Err(Error::Audio(format!("event time {event_time} is negative")));
        }
        if source.sample_rate() != self.sample_rate {
            return Err(Error::Audio(format!(
                "track sample rate {} differs from extractor rate {}",
                source.sample_rate(),
                self.sample_rate
            )));
        }
        let rate = self.sample_rate as f64;
        let len = (self.cfg.window_secs * rate).round() as usize;
        let mut window = vec![0.0; len];
        let start = (event_time * rate).round();
        if start < source.len_samples() as f64 {
            source.read_into(start as usize, &mut window);
        }
        let frames = frame_signal(&window, self.frame_len, self.hop)?;
        let dims = FRAME_FEATURES + self.cfg.mfcc_count;
        let mut acc = vec![0.0; dims];
        if frames.is_empty() {
            return Ok(acc);
        }
        let mut prev: Option<Vec<f64>> = None;
        for frame in &frames {
            let mag = self.magnitude_spectrum(frame);
            let (f, norm) = self.features_from_spectrum(frame, &mag, prev.as_deref());
            for (a, v) in acc.iter_mut().zip(f.to_array()) {
                *a += v;
            }
            for (a, v) in acc[FRAME_FEATURES..]
                .iter_mut()
                .zip(self.mfcc_from_spectrum(&mag))
            {
                *a += v;
            }
            prev = Some(norm);
        }
        let count = frames.len() as f64;
        acc.iter_mut().for_each(|a| *a /= count);
        Ok(acc)
    }
}

/// Convenience wrapper around [`AudioExtractor::event_features`].
pub fn extract_event_audio_features(
    extractor: &AudioExtractor,
    track: &dyn SampleSource,
    event_time: f64,
) -> Result<Vec<f64>> {
    extractor.event_features(track, event_time)
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters equally spaced on the mel scale over `[0, Nyquist]`,
/// evaluated at the DFT bin frequencies.
fn mel_filterbank(filters: usize, bins: usize, frame_len: usize, rate: u32) -> Vec<Vec<f64>> {
    let nyquist = rate as f64 / 2.0;
    let top = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..filters + 2)
        .map(|i| mel_to_hz(top * i as f64 / (filters + 1) as f64))
        .collect();
    (1..=filters)
        .map(|m| {
            let (lo, mid, hi) = (edges[m - 1], edges[m], edges[m + 1]);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * rate as f64 / frame_len as f64;
                    if f > lo && f <= mid {
                        (f - lo) / (mid - lo)
                    } else if f > mid && f < hi {
                        (hi - f) / (hi - mid)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

fn dct2_ortho(outputs: usize, inputs: usize) -> Vec<Vec<f64>> {
    let m = inputs as f64;
    (0..outputs)
        .map(|k| {
            let scale = if k == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
            (0..inputs)
                .map(|i| scale * (std::f64::consts::PI * k as f64 * (i as f64 + 0.5) / m).cos())
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn framing_counts() {
        let s = vec![0.0; 4800];
        assert_eq!(frame_signal(&s, 2400, 1200).unwrap().len(), 3);
        assert_eq!(frame_signal(&s[..2399], 2400, 1200).unwrap().len(), 0);
        let two_secs = vec![0.0; 96000];
        assert_eq!(frame_signal(&two_secs, 2400, 1200).unwrap().len(), 79);
        assert!(frame_signal(&s, 2400, 0).is_err());
        assert!(frame_signal(&s, 100, 200).is_err());
        let ramp: Vec<f64> = (0..10).map(f64::from).collect();
        let frames = frame_signal(&ramp, 4, 3).unwrap();
        assert_eq!(frames, vec![&ramp[0..4], &ramp[3..7], &ramp[6..10]]);
    }

    #[test]
    fn default_framing_at_48k() {
        let x = AudioExtractor::new(AudioConfig::default(), 48_000).unwrap();
        assert_eq!((x.frame_len(), x.hop()), (2400, 1200));
    }

    #[test]
    fn constant_and_silent_frames() {
        let x = AudioExtractor::new(AudioConfig::default(), 8000).unwrap();
        let ones = vec![1.0; x.frame_len()];
        let (f, _) = x.compute_frame_features(&ones, None);
        assert_eq!(f.zcr, 0.0);
        assert!((f.energy - 1.0).abs() < 1e-12);

        let zeros = vec![0.0; x.frame_len()];
        let (f, norm) = x.compute_frame_features(&zeros, None);
        assert_eq!(f, FrameFeatures::default());
        assert!(norm.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identical_frames_have_zero_flux() {
        let x = AudioExtractor::new(AudioConfig::default(), 8000).unwrap();
        let frame: Vec<f64> = (0..x.frame_len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let (_, n1) = x.compute_frame_features(&frame, None);
        let (f2, _) = x.compute_frame_features(&frame, Some(&n1));
        assert!(f2.flux.abs() < 1e-20);
    }

    #[test]
    fn zero_frame_mfcc_is_constant_log_floor() {
        let cfg = AudioConfig::default();
        let x = AudioExtractor::new(cfg.clone(), 8000).unwrap();
        let c = x.mfcc(&vec![0.0; x.frame_len()]);
        assert_eq!(c.len(), 13);
        let expected = (cfg.log_floor.ln()) * (cfg.mel_filters as f64).sqrt();
        assert!((c[0] - expected).abs() < 1e-9);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn silent_track_and_padding() {
        let x = AudioExtractor::new(AudioConfig::default(), 8000).unwrap();
        let silent = AudioTrack::new(vec![0.0; 8000 * 5], 8000).unwrap();
        let v = x.event_features(&silent, 1.0).unwrap();
        assert_eq!(v.len(), AUDIO_DIMS);
        assert_eq!(v[1], 0.0);

        // 1 s of tone, event at 0: second half of the window is zero padding,
        // so the mean energy is about half the tone energy (0.5 · 0.5).
        let tone: Vec<f32> = (0..8000)
            .map(|i| (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 8000.0).sin() as f32)
            .collect();
        let short = AudioTrack::new(tone, 8000).unwrap();
        let v = x.event_features(&short, 0.0).unwrap();
        assert!((v[1] - 0.25).abs() < 0.02, "energy {}", v[1]);

        let past_end = x.event_features(&short, 30.0).unwrap();
        assert_eq!(past_end[1], 0.0);
        assert!(x.event_features(&short, -1.0).is_err());
    }

    #[test]
    fn wav_and_raw_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let track = AudioTrack::new(vec![0.5, -0.25, 0.125, 0.0], 8000).unwrap();
        let p = dir.path().join("a.wav");
        track.write_wav(&p).unwrap();
        assert_eq!(AudioTrack::read_wav(&p).unwrap(), track);
        let r = dir.path().join("a.f32");
        track.write_raw_f32(&r).unwrap();
        assert_eq!(AudioTrack::read_raw_f32(&r, 8000).unwrap(), track);
    }
}
