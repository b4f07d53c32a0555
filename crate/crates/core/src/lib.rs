//! Offline parameter-mapping sonification: an audio graph, a synth contract
//! with three built-in synths, CSV ingest, a mapping language and a project
//! scheduler that ties them together.

pub mod data;
pub mod graph;
pub mod mapping;
pub mod project;
pub mod synth;
pub mod synths;
pub mod wav;

pub use data::{parse_csv, Column, DataType, Dataset};
pub use graph::{frames_for_duration, AudioBuffer, AudioGraph, NodeId, NodeKind};
pub use mapping::{parse as parse_mapping, EvalEnv, Expr};
pub use project::{load_project, run_transport, validate, Diagnostic, LoadedProject, Project};
pub use synth::{ParamValue, ParameterKind, SynthDefinition, SynthInstance, SynthRegistry};
pub use wav::{decode_wav, encode_wav, SampleFormat, WavSpec};
