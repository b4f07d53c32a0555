use super::GraphError;

/// Planar sample storage, one `Vec` per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    sample_rate: u32,
    channels: Vec<Vec<f32>>,
}

impl AudioBuffer {
    pub fn new(sample_rate: u32, channels: Vec<Vec<f32>>) -> Result<Self, GraphError> {
        if channels.is_empty() || channels.len() > 2 {
            return Err(GraphError::InvalidBuffer(format!(
                "expected 1 or 2 channels, got {}",
                channels.len()
            )));
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(GraphError::InvalidBuffer("channels have different lengths".into()));
        }
        if sample_rate == 0 {
            return Err(GraphError::InvalidBuffer("sample rate is zero".into()));
        }
        Ok(Self { sample_rate, channels })
    }

    pub fn silent(sample_rate: u32, channel_count: usize, frames: usize) -> Self {
        Self {
            sample_rate,
            channels: vec![vec![0.0; frames]; channel_count.clamp(1, 2)],
        }
    }

    pub fn mono(sample_rate: u32, samples: Vec<f32>) -> Self {
        Self {
            sample_rate: sample_rate.max(1),
            channels: vec![samples],
        }
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn frames(&self) -> usize {
        self.channels[0].len()
    }

    pub fn duration(&self) -> f64 {
        self.frames() as f64 / self.sample_rate as f64
    }

    pub fn channel(&self, index: usize) -> &[f32] {
        &self.channels[index]
    }

    pub fn channels(&self) -> &[Vec<f32>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f32>> {
        self.channels
    }

    /// Frame-interleaved copy of the samples.
    pub fn interleaved(&self) -> Vec<f32> {
        let n = self.channel_count();
        let mut out = Vec::with_capacity(self.frames() * n);
        for frame in 0..self.frames() {
            for ch in &self.channels {
                out.push(ch[frame]);
            }
        }
        debug_assert_eq!(out.len(), self.frames() * n);
        out
    }

    /// Linear-interpolation resample to `target_rate`. Returns a clone when the
    /// rates already match.
    pub fn resampled(&self, target_rate: u32) -> AudioBuffer {
        if target_rate == self.sample_rate || target_rate == 0 {
            return self.clone();
        }
        let ratio = self.sample_rate as f64 / target_rate as f64;
        let out_frames = (self.frames() as f64 / ratio).floor() as usize;
        let channels = self
            .channels
            .iter()
            .map(|src| {
                (0..out_frames)
                    .map(|k| {
                        let pos = k as f64 * ratio;
                        let i = pos.floor() as usize;
                        let frac = pos - i as f64;
                        let a = src.get(i).copied().unwrap_or(0.0) as f64;
                        let b = src.get(i + 1).copied().unwrap_or(0.0) as f64;
                        (a + (b - a) * frac) as f32
                    })
                    .collect()
            })
            .collect();
        AudioBuffer {
            sample_rate: target_rate,
            channels,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_channels() {
        assert!(AudioBuffer::new(44100, vec![vec![0.0; 3], vec![0.0; 2]]).is_err());
        assert!(AudioBuffer::new(44100, vec![]).is_err());
        assert!(AudioBuffer::new(44100, vec![vec![0.0]; 3]).is_err());
    }

    #[test]
    fn resample_halves_length() {
        let b = AudioBuffer::mono(48000, (0..480).map(|i| i as f32).collect());
        let r = b.resampled(24000);
        assert_eq!(r.frames(), 240);
        assert_eq!(r.channel(0)[10], 20.0);
    }

    #[test]
    fn interleaves_stereo() {
        let b = AudioBuffer::new(10, vec![vec![1.0, 2.0], vec![-1.0, -2.0]]).unwrap();
        assert_eq!(b.interleaved(), vec![1.0, -1.0, 2.0, -2.0]);
    }
}
