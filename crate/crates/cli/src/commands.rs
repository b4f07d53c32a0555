use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

use sonir_core::data::{parse_csv, DataType};
use sonir_core::mapping::parse;
use sonir_core::project::{load_project, validate, ProjectError};
use sonir_core::synth::SynthRegistry;
use sonir_core::wav::SampleFormat;

use crate::render_wav;

#[derive(Debug, Parser)]
#[command(name = "sonir", version, about = "Render data sonification projects")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a project to a stereo WAV file.
    Render {
        project: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Write 32-bit float samples instead of 16-bit PCM.
        #[arg(long)]
        float32: bool,
        /// Override the project's sample rate.
        #[arg(long)]
        sample_rate: Option<u32>,
    },
    /// Check a project and print every problem found.
    Validate { project: PathBuf },
    /// List a CSV file's columns with their N/Q type.
    Inspect { csv: PathBuf },
    /// Parse a mapping expression without evaluating it.
    CheckMapping { expr: String },
    /// List the registered synths and their parameters.
    Synths,
    /// Serve the HTTP API (and optionally a built UI) for a project directory.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        project_dir: PathBuf,
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Io(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<ProjectError> for CliError {
    fn from(e: ProjectError) -> Self {
        match e {
            ProjectError::Io { .. } => CliError::Io(e.to_string()),
            ProjectError::Json(_) | ProjectError::Data { .. } | ProjectError::Wav { .. } | ProjectError::Invalid(_) => {
                CliError::Invalid(e.to_string())
            }
            ProjectError::Synth(_) | ProjectError::Graph(_) => CliError::Internal(e.to_string()),
        }
    }
}

fn io(e: std::io::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// Runs one command. Normal output goes to `out`; diagnostics go to `err`
/// prefixed with `error:`.
pub fn run(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let registry = SynthRegistry::with_builtins();
    match command {
        Command::Render {
            project,
            output,
            float32,
            sample_rate,
        } => {
            let mut loaded = load_project(&project)?;
            if let Some(rate) = sample_rate {
                if rate == 0 {
                    return Err(CliError::Invalid("--sample-rate must be positive".into()));
                }
                loaded.project.transport.sample_rate = rate;
            }
            let problems = validate(&loaded, &registry);
            if !problems.is_empty() {
                for d in &problems {
                    writeln!(err, "error: {d}").map_err(io)?;
                }
                return Err(CliError::Invalid(format!(
                    "{} has {} problem(s)",
                    project.display(),
                    problems.len()
                )));
            }
            let format = if float32 {
                SampleFormat::Float32
            } else {
                SampleFormat::Pcm16
            };
            let bytes = render_wav(&loaded, &registry, format)?;
            std::fs::write(&output, &bytes).map_err(|e| CliError::Io(format!("{}: {e}", output.display())))?;
            let t = &loaded.project.transport;
            writeln!(
                out,
                "wrote {} ({} frames, {} Hz, {})",
                output.display(),
                (t.duration_s * t.sample_rate as f64).round(),
                t.sample_rate,
                if float32 { "float32" } else { "pcm16" }
            )
            .map_err(io)?;
        }
        Command::Validate { project } => {
            let loaded = load_project(&project)?;
            let problems = validate(&loaded, &registry);
            if !problems.is_empty() {
                for d in &problems {
                    writeln!(err, "error: {d}").map_err(io)?;
                }
                return Err(CliError::Invalid(format!(
                    "{} has {} problem(s)",
                    project.display(),
                    problems.len()
                )));
            }
            writeln!(out, "ok: {}", project.display()).map_err(io)?;
        }
        Command::Inspect { csv } => {
            let bytes = std::fs::read(&csv).map_err(|e| CliError::Io(format!("{}: {e}", csv.display())))?;
            let name = csv
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let dataset = parse_csv(&name, &bytes).map_err(|e| CliError::Invalid(format!("{}: {e}", csv.display())))?;
            let width = dataset.columns.iter().map(|c| c.name.len()).max().unwrap_or(0);
            writeln!(out, "{} ({} rows)", dataset.name, dataset.row_count()).map_err(io)?;
            for column in &dataset.columns {
                let detail = match (column.dtype, column.stats()) {
                    (DataType::Quantitative, Ok(s)) => format!("  min {} max {} ({} values)", s.min, s.max, s.count),
                    _ => String::new(),
                };
                let line = format!("{}  {:width$}{detail}", column.dtype, column.name);
                writeln!(out, "{}", line.trim_end()).map_err(io)?;
            }
        }
        Command::CheckMapping { expr } => match parse(&expr) {
            Ok(e) => writeln!(out, "ok: {e}").map_err(io)?,
            Err(e) => return Err(CliError::Invalid(e.to_string())),
        },
        Command::Synths => {
            for def in registry.iter() {
                writeln!(out, "{}", def.name).map_err(io)?;
                for p in &def.parameters {
                    let kind = serde_json::to_value(p.kind).expect("kind serializes");
                    let tokens = p
                        .tokens
                        .as_ref()
                        .map(|t| format!(" {{{}}}", t.join(", ")))
                        .unwrap_or_default();
                    writeln!(out, "  {:<10} {}{tokens}", p.name, kind.as_str().unwrap_or_default()).map_err(io)?;
                }
            }
        }
        Command::Serve {
            port,
            host,
            project_dir,
            ui_dir,
        } => {
            if !project_dir.is_dir() {
                return Err(CliError::Io(format!("{}: not a directory", project_dir.display())));
            }
            let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(e.to_string()))?;
            runtime
                .block_on(crate::service::serve(&host, port, project_dir, ui_dir))
                .map_err(io)?;
        }
    }
    Ok(())
}
