//! The `sonir` command line and the HTTP service behind `sonir serve`.

pub mod commands;
pub mod service;

use sonir_core::project::{compile_schedule, run_transport, LoadedProject, ProjectError};
use sonir_core::synth::SynthRegistry;
use sonir_core::wav::{encode_wav, SampleFormat, WavSpec};

/// Renders a validated project to stereo WAV bytes. The CLI and
/// the service both go through here, so equal inputs give equal bytes.
pub fn render_wav(
    loaded: &LoadedProject,
    registry: &SynthRegistry,
    format: SampleFormat,
) -> Result<Vec<u8>, ProjectError> {
    for warning in compile_schedule(loaded, registry)?.warnings {
        log::warn!("{warning}");
    }
    let buffer = run_transport(loaded, registry)?;
    let spec = WavSpec::stereo(buffer.sample_rate(), format);
    Ok(encode_wav(&buffer, spec).expect("transport renders stereo"))
}
