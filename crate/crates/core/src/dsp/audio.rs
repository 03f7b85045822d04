//! Mono audio buffers, WAV I/O and band-limited resampling.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::param("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::param(format!("non-finite sample at index {i}")));
        }
        Ok(AudioBuffer {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Decodes PCM16 or float32 WAV; multichannel input is averaged to mono.
    pub fn from_wav_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let wav = hound::WavReader::new(reader).map_err(wav_err)?;
        let spec = wav.spec();
        let channels = spec.channels.max(1) as usize;
        let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
            (hound::SampleFormat::Int, 16) => wav
                .into_samples::<i16>()
                .map(|s| s.map(|v| v as f32 / 32768.0))
                .collect::<std::result::Result<_, _>>()
                .map_err(wav_err)?,
            (hound::SampleFormat::Float, 32) => wav
                .into_samples::<f32>()
                .collect::<std::result::Result<_, _>>()
                .map_err(wav_err)?,
            (fmt, bits) => {
                return Err(Error::format(
                    20,
                    format!("unsupported wav encoding {fmt:?} {bits}-bit; expected PCM16 or float32"),
                ))
            }
        };
        let samples = interleaved
            .chunks(channels)
            .map(|frame| frame.iter().sum::<f32>() / frame.len() as f32)
            .collect();
        AudioBuffer::new(samples, spec.sample_rate)
    }

    pub fn read_wav(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path.as_ref())?);
        AudioBuffer::from_wav_reader(file)
    }

    /// Writes mono float32 WAV.
    pub fn write_wav(&self, path: impl AsRef<Path>) -> Result<()> {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: self.sample_rate,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut w = hound::WavWriter::create(path.as_ref(), spec).map_err(wav_err)?;
        for &s in &self.samples {
            w.write_sample(s).map_err(wav_err)?;
        }
        w.finalize().map_err(wav_err)?;
        Ok(())
    }

    /// Kaiser-windowed sinc resampling. `half_width` is the number of input
    /// zero crossings on each side of the kernel; larger is sharper.
    pub fn resample(&self, target_rate: u32, half_width: usize, beta: f64) -> Result<AudioBuffer> {
        if target_rate == 0 || half_width == 0 {
            return Err(Error::param("target rate and kernel width must be positive"));
        }
        if target_rate == self.sample_rate {
            return Ok(self.clone());
        }
        let ratio = target_rate as f64 / self.sample_rate as f64;
        let cutoff = ratio.min(1.0);
        // kernel support in input samples
        let support = half_width as f64 / cutoff;
        let n_out = (self.samples.len() as f64 * ratio).floor() as usize;
        let norm = bessel_i0(beta);
        let mut out = Vec::with_capacity(n_out);
        for n in 0..n_out {
            let center = n as f64 / ratio;
            let lo = ((center - support).ceil().max(0.0)) as usize;
            let hi = ((center + support).floor() as usize).min(self.samples.len().saturating_sub(1));
            let mut acc = 0.0;
            for k in lo..=hi {
                let x = center - k as f64;
                let r = x / support;
                if r.abs() > 1.0 {
                    continue;
                }
                let window = bessel_i0(beta * (1.0 - r * r).sqrt()) / norm;
                acc += self.samples[k] as f64 * cutoff * sinc(cutoff * x) * window;
            }
            out.push(acc as f32);
        }
        AudioBuffer::new(out, target_rate)
    }
}

fn wav_err(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::format(0, format!("wav: {other}")),
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Modified Bessel function of the first kind, order zero (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..50 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-16 {
            break;
        }
    }
    sum
}
