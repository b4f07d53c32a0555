//! The built-in synthesizers: two-oscillator FM, an impulse-excited formant
//! filter bank, and a data-driven granular sampler.

pub mod fm;
pub mod formant;
pub mod granular;

use crate::synth::{ParamValue, ParamValues};

fn values(items: &[(&str, ParamValue)]) -> ParamValues {
    items.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}
