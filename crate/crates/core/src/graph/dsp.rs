//! DSP kernels used by the graph nodes.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use super::GraphError;

/// Normalized biquad coefficients (`a0 == 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiquadCoefficients {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

/// Cookbook bandpass with 0 dB gain at the center frequency.
pub fn biquad_bandpass_coefficients(
    center_frequency: f64,
    q: f64,
    sample_rate: f64,
) -> Result<BiquadCoefficients, GraphError> {
    let nyquist = sample_rate / 2.0;
    if !(center_frequency > 0.0 && center_frequency < nyquist) {
        return Err(GraphError::OutOfRange(format!(
            "center frequency {center_frequency} Hz must lie in (0, {nyquist})"
        )));
    }
    if !(q > 0.0 && q.is_finite()) {
        return Err(GraphError::OutOfRange(format!("q must be > 0, got {q}")));
    }
    Ok(bandpass_unchecked(center_frequency, q, sample_rate))
}

fn bandpass_unchecked(center_frequency: f64, q: f64, sample_rate: f64) -> BiquadCoefficients {
    let w0 = 2.0 * PI * center_frequency / sample_rate;
    let (sin_w0, cos_w0) = w0.sin_cos();
    let alpha = sin_w0 / (2.0 * q);
    let a0 = 1.0 + alpha;
    BiquadCoefficients {
        b0: alpha / a0,
        b1: 0.0,
        b2: -alpha / a0,
        a1: -2.0 * cos_w0 / a0,
        a2: (1.0 - alpha) / a0,
    }
}

/// Coefficients for automation-driven values: out-of-range inputs are pulled
/// back into the valid region instead of failing mid-render.
pub(crate) fn bandpass_clamped(center_frequency: f64, q: f64, sample_rate: f64) -> BiquadCoefficients {
    let nyquist = sample_rate / 2.0;
    let f = if center_frequency.is_finite() {
        center_frequency.clamp(1.0, nyquist * 0.999)
    } else {
        1.0
    };
    let q = if q.is_finite() { q.max(1e-4) } else { 1.0 };
    bandpass_unchecked(f, q, sample_rate)
}

/// Transposed direct form II state, one per channel.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct BiquadState {
    z1: f64,
    z2: f64,
}

impl BiquadState {
    #[inline]
    pub(crate) fn tick(&mut self, c: &BiquadCoefficients, x: f64) -> f64 {
        let y = c.b0 * x + self.z1;
        self.z1 = c.b1 * x - c.a1 * y + self.z2;
        self.z2 = c.b2 * x - c.a2 * y;
        y
    }

    pub(crate) fn is_quiet(&self) -> bool {
        self.z1.abs() < 1e-30 && self.z2.abs() < 1e-30
    }
}

/// A mono DSP kernel that a synth definition can register with a graph under
/// a name and then instantiate as a node.
pub trait Processor: Send {
    /// `params[i]` holds per-sample values for the i-th declared parameter;
    /// `input` is the mono sum of connected sources.
    fn process(&mut self, params: &[&[f64]], input: &[f64], output: &mut [f64], sample_rate: f64);
}

pub type ProcessorFactory = Arc<dyn Fn() -> Box<dyn Processor> + Send + Sync>;

#[derive(Clone)]
pub struct ProcessorDescriptor {
    pub name: String,
    /// Declared parameters with their default values.
    pub params: Vec<(String, f64)>,
    pub factory: ProcessorFactory,
}

impl fmt::Debug for ProcessorDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProcessorDescriptor")
            .field("name", &self.name)
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

/// Naive unit-impulse generator. A phase accumulator advances by
/// `frequency / sample_rate` per frame and a single `1.0` sample is emitted
/// each time it wraps. Not band-limited, so high rates alias.
#[derive(Debug, Default, Clone)]
pub struct ImpulseTrain {
    phase: f64,
}

impl ImpulseTrain {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn tick(&mut self, frequency: f64, sample_rate: f64) -> f64 {
        let f = if frequency.is_finite() { frequency.max(0.0) } else { 0.0 };
        self.phase += f / sample_rate;
        if self.phase >= 1.0 {
            self.phase -= self.phase.floor();
            1.0
        } else {
            0.0
        }
    }
}

impl Processor for ImpulseTrain {
    fn process(&mut self, params: &[&[f64]], _input: &[f64], output: &mut [f64], sample_rate: f64) {
        let freq = params[0];
        for (out, f) in output.iter_mut().zip(freq) {
            *out = self.tick(*f, sample_rate);
        }
    }
}

pub const IMPULSE_PROCESSOR: &str = "impulse";
pub const IMPULSE_DEFAULT_FREQUENCY: f64 = 100.0;

pub fn impulse_train_processor() -> ProcessorDescriptor {
    ProcessorDescriptor {
        name: IMPULSE_PROCESSOR.to_string(),
        params: vec![("frequency".to_string(), IMPULSE_DEFAULT_FREQUENCY)],
        factory: Arc::new(|| Box::new(ImpulseTrain::new())),
    }
}
