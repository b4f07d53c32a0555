//! Project files: tracks of regions that feed dataset columns into synth
//! parameters over a fixed-length transport.
//!
//! ```json
//! {
//!   "version": "1",
//!   "transport": { "duration_s": 4.0, "sample_rate": 44100 },
//!   "datasets": [{ "path": "coral_data.csv", "name": "coral" }],
//!   "buffers": { "grain": "grain.wav" },
//!   "synths": { "t1": "fm" },
//!   "tracks": [{
//!     "id": "t1", "name": "Track 1",
//!     "regions": [{ "dataset": "coral", "column": "depth", "parameter": "p5",
//!                   "start_s": 0, "duration_s": 4, "mapping": "pitch" }]
//!   }],
//!   "mappings": [{ "name": "pitch", "source": "lin(x, min, max, 220, 880)" }]
//! }
//! ```
//!
//! Paths are relative to the project file. A track names its synth either
//! inline (`synth`) or through the top-level `synths` table.

mod schedule;
mod transport;
mod validate;

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{parse_csv, DataError, Dataset};
use crate::graph::{AudioBuffer, GraphError, DEFAULT_SAMPLE_RATE};
use crate::synth::SynthError;
use crate::wav::{decode_wav, WavError};

pub use schedule::{compile_schedule, region_values, Schedule, TrackSchedule, UpdateEvent, FINAL_GAP_S};
pub use transport::{prepare, run_transport, PreparedTransport, TrackInstance};
pub use validate::validate;

pub const PROJECT_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Project {
    pub version: String,
    pub transport: Transport,
    #[serde(default)]
    pub datasets: Vec<DatasetRef>,
    #[serde(default)]
    pub buffers: IndexMap<String, String>,
    #[serde(default)]
    pub synths: IndexMap<String, String>,
    #[serde(default)]
    pub tracks: Vec<Track>,
    #[serde(default)]
    pub mappings: Vec<MappingSource>,
}

fn default_sample_rate() -> u32 {
    DEFAULT_SAMPLE_RATE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transport {
    pub duration_s: f64,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRef {
    pub path: String,
    /// Defaults to the file stem of `path`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl DatasetRef {
    pub fn resolved_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            Path::new(&self.path)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| self.path.clone())
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Track {
    pub id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<String>,
    #[serde(default)]
    pub regions: Vec<Region>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dataset: String,
    pub column: String,
    pub parameter: String,
    pub start_s: f64,
    pub duration_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping: Option<String>,
}

impl Region {
    pub fn end_s(&self) -> f64 {
        self.start_s + self.duration_s
    }

    /// Name used in diagnostics: the region's own name or `#index column`.
    pub fn label(&self, index: usize) -> String {
        match &self.name {
            Some(n) => n.clone(),
            None => format!("#{index} {}", self.column),
        }
    }
}

/// A named transform. `source` is a mapping expression applied to
/// quantitative cells; `tokens` recodes nominal values after any expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingSource {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<IndexMap<String, String>>,
}

impl Project {
    pub fn from_json(text: &str) -> Result<Project, ProjectError> {
        serde_json::from_str(text).map_err(|e| ProjectError::Json(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("project serializes")
    }

    pub fn mapping(&self, name: &str) -> Option<&MappingSource> {
        self.mappings.iter().find(|m| m.name == name)
    }

    /// The synth a track uses: inline on the track, else from `synths`.
    pub fn track_synth<'a>(&'a self, track: &'a Track) -> Option<&'a str> {
        track
            .synth
            .as_deref()
            .or_else(|| self.synths.get(&track.id).map(String::as_str))
    }
}

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid project json: {0}")]
    Json(String),
    #[error("dataset {path}: {source}")]
    Data {
        path: PathBuf,
        #[source]
        source: DataError,
    },
    #[error("buffer {path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: WavError,
    },
    #[error("project has {} diagnostic(s); first: {}", .0.len(), .0.first().map(ToString::to_string).unwrap_or_default())]
    Invalid(Vec<Diagnostic>),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A project with its datasets parsed and buffers decoded.
#[derive(Debug, Clone)]
pub struct LoadedProject {
    pub project: Project,
    pub datasets: IndexMap<String, Dataset>,
    /// Buffers at their file sample rate; resampled when a transport is prepared.
    pub buffers: IndexMap<String, Arc<AudioBuffer>>,
}

impl LoadedProject {
    /// Builds a loaded project from already-parsed parts.
    pub fn new(project: Project, datasets: Vec<Dataset>, buffers: IndexMap<String, Arc<AudioBuffer>>) -> Self {
        LoadedProject {
            project,
            datasets: datasets.into_iter().map(|d| (d.name.clone(), d)).collect(),
            buffers,
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, ProjectError> {
    std::fs::read(path).map_err(|source| ProjectError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads `text` as a project whose relative paths resolve against `base_dir`.
pub fn load_project_str(text: &str, base_dir: &Path) -> Result<LoadedProject, ProjectError> {
    let project = Project::from_json(text)?;
    let mut datasets = IndexMap::new();
    for r in &project.datasets {
        let path = base_dir.join(&r.path);
        let name = r.resolved_name();
        let dataset = parse_csv(&name, &read(&path)?).map_err(|source| ProjectError::Data { path, source })?;
        datasets.insert(name, dataset);
    }
    let mut buffers = IndexMap::new();
    for (name, rel) in &project.buffers {
        let path = base_dir.join(rel);
        let buffer = decode_wav(&read(&path)?).map_err(|source| ProjectError::Wav { path, source })?;
        buffers.insert(name.clone(), Arc::new(buffer));
    }
    Ok(LoadedProject {
        project,
        datasets,
        buffers,
    })
}

pub fn load_project(path: &Path) -> Result<LoadedProject, ProjectError> {
    let bytes = read(path)?;
    let text = String::from_utf8(bytes).map_err(|e| ProjectError::Json(e.to_string()))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    load_project_str(&text, base)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Severity {
    #[serde(rename = "error")]
    Error,
    #[serde(rename = "warning")]
    Warning,
}

/// A problem found in a project, located by track and region where possible.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub track: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
    pub message: String,
}

impl Diagnostic {
    pub fn project(message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            track: None,
            region: None,
            message: message.into(),
        }
    }

    pub fn track(track: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            track: Some(track.to_string()),
            ..Diagnostic::project(message)
        }
    }

    pub fn region(track: &str, region: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            track: Some(track.to_string()),
            region: Some(region.to_string()),
            ..Diagnostic::project(message)
        }
    }

    pub fn warning(mut self) -> Self {
        self.severity = Severity::Warning;
        self
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.severity == Severity::Warning {
            f.write_str("warning: ")?;
        }
        match (&self.track, &self.region) {
            (Some(t), Some(r)) => write!(f, "track `{t}`, region `{r}`: {}", self.message),
            (Some(t), None) => write!(f, "track `{t}`: {}", self.message),
            _ => write!(f, "project: {}", self.message),
        }
    }
}
