//! RIFF/WAVE encoding and decoding.
//!
//! The encoder always writes the canonical 44-byte header layout: a 16-byte
//! `fmt ` chunk tagged 1 (integer PCM) or 3 (IEEE float), then one `data`
//! chunk of little-endian interleaved frames. Decoding goes through `hound`
//! and accepts any integer width it supports plus 32-bit float.

use std::io::Cursor;

use thiserror::Error;

use crate::graph::AudioBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Pcm16,
    Float32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavSpec {
    pub sample_rate: u32,
    pub channels: u16,
    pub format: SampleFormat,
}

impl WavSpec {
    pub fn stereo(sample_rate: u32, format: SampleFormat) -> Self {
        WavSpec {
            sample_rate,
            channels: 2,
            format,
        }
    }
}

#[derive(Debug, Error)]
pub enum WavError {
    #[error("buffer has {found} channels, spec wants {expected}")]
    ChannelMismatch { expected: u16, found: usize },
    #[error("cannot decode wav: {0}")]
    Decode(String),
}

/// Clips to [-1, 1] and scales so that 1.0 maps to 32767.
pub fn pcm16_sample(x: f32) -> i16 {
    let clipped = if x.is_nan() { 0.0 } else { x.clamp(-1.0, 1.0) };
    (clipped * 32767.0).round() as i16
}

pub fn encode_wav(buffer: &AudioBuffer, spec: WavSpec) -> Result<Vec<u8>, WavError> {
    if buffer.channel_count() != spec.channels as usize {
        return Err(WavError::ChannelMismatch {
            expected: spec.channels,
            found: buffer.channel_count(),
        });
    }
    let (tag, bytes_per_sample): (u16, u16) = match spec.format {
        SampleFormat::Pcm16 => (1, 2),
        SampleFormat::Float32 => (3, 4),
    };
    let block_align = spec.channels * bytes_per_sample;
    let data_len = buffer.frames() as u32 * block_align as u32;

    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&spec.channels.to_le_bytes());
    out.extend_from_slice(&spec.sample_rate.to_le_bytes());
    out.extend_from_slice(&(spec.sample_rate * block_align as u32).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&(bytes_per_sample * 8).to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for x in buffer.interleaved() {
        match spec.format {
            SampleFormat::Pcm16 => out.extend_from_slice(&pcm16_sample(x).to_le_bytes()),
            SampleFormat::Float32 => out.extend_from_slice(&x.to_le_bytes()),
        }
    }
    Ok(out)
}

/// Decodes a WAV file. Files with more than two channels keep the first two.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioBuffer, WavError> {
    let err = |e: hound::Error| WavError::Decode(e.to_string());
    let mut reader = hound::WavReader::new(Cursor::new(bytes)).map_err(err)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(WavError::Decode("zero channels".into()));
    }
    let samples: Vec<f32> = match spec.sample_format {
        hound::SampleFormat::Float => reader.samples::<f32>().collect::<Result<_, _>>().map_err(err)?,
        hound::SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f32;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f32 * scale))
                .collect::<Result<_, _>>()
                .map_err(err)?
        }
    };
    let kept = channels.min(2);
    let mut planar = vec![Vec::with_capacity(samples.len() / channels); kept];
    for frame in samples.chunks_exact(channels) {
        for (c, dst) in planar.iter_mut().enumerate() {
            dst.push(frame[c]);
        }
    }
    AudioBuffer::new(spec.sample_rate, planar).map_err(|e| WavError::Decode(e.to_string()))
}
