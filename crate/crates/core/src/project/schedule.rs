use std::collections::BTreeMap;

use serde::Serialize;

use super::{Diagnostic, LoadedProject, MappingSource, Project, ProjectError, Region, Severity};
use crate::data::{DataType, Dataset};
use crate::mapping::{parse, EvalEnv, Program};
use crate::synth::{ParamValue, ParamValues, ParameterKind, SynthRegistry};

/// Gap assumed after a track's only event.
pub const FINAL_GAP_S: f64 = 0.25;

/// One coalesced set of parameter changes for one track.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpdateEvent {
    pub track_id: String,
    pub time_s: f64,
    pub changes: ParamValues,
    pub dt_to_next_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackSchedule {
    pub track_id: String,
    pub events: Vec<UpdateEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    /// In project track order; tracks without events still appear.
    pub tracks: Vec<TrackSchedule>,
    pub warnings: Vec<Diagnostic>,
}

/// Values a region emits, before merging with other regions.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionValues {
    /// `(row, time, value)` for every non-empty row with a finite result.
    pub events: Vec<(usize, f64, ParamValue)>,
    /// `(row, time)` of rows whose mapped value was not finite.
    pub dropped: Vec<(usize, f64)>,
}

/// Decimal text of a quantity used as a nominal token: `2.0` gives `"2"`.
pub fn format_token(value: f64) -> String {
    if value == 0.0 {
        "0".to_string()
    } else {
        format!("{value}")
    }
}

fn recode(mapping: Option<&MappingSource>, token: String) -> String {
    match mapping.and_then(|m| m.tokens.as_ref()).and_then(|t| t.get(&token)) {
        Some(replacement) => replacement.clone(),
        None => token,
    }
}

/// Maps one region's column through its mapping and places row `k` of `n`
/// at `start_s + k * duration_s / n`. Errors describe why the region cannot
/// produce values; `validate` reports them as diagnostics.
pub fn region_values(
    project: &Project,
    dataset: &Dataset,
    region: &Region,
    kind: ParameterKind,
) -> Result<RegionValues, String> {
    let column = dataset
        .column(&region.column)
        .ok_or_else(|| format!("dataset `{}` has no column `{}`", dataset.name, region.column))?;
    let mapping = match &region.mapping {
        Some(name) => Some(
            project
                .mapping(name)
                .ok_or_else(|| format!("unknown mapping `{name}`"))?,
        ),
        None => None,
    };
    let program = match mapping.and_then(|m| m.source.as_deref()) {
        Some(src) => Some(Program::compile(&parse(src).map_err(|e| {
            format!(
                "mapping `{}` does not parse: {e}",
                mapping.map_or("", |m| m.name.as_str())
            )
        })?)),
        None => None,
    };
    if kind == ParameterKind::Temporal {
        return Err(format!(
            "parameter `{}` is the temporal parameter and cannot be automated",
            region.parameter
        ));
    }
    if column.dtype == DataType::Nominal {
        if !kind.is_nominal() {
            return Err(format!(
                "nominal column `{}` cannot drive quantitative parameter `{}`",
                column.name, region.parameter
            ));
        }
        if program.is_some() {
            return Err(format!(
                "mapping expressions apply to quantitative columns only; `{}` is nominal",
                column.name
            ));
        }
    } else if !kind.is_nominal() && program.is_none() && mapping.is_some_and(|m| m.tokens.is_some()) {
        return Err("token recoding applies to nominal parameters only".to_string());
    }

    let n = column.len();
    let (min, max) = match column.stats() {
        Ok(s) => (s.min, s.max),
        Err(_) => (0.0, 0.0),
    };
    let mut out = RegionValues {
        events: Vec::new(),
        dropped: Vec::new(),
    };
    for (k, cell) in column.cells.iter().enumerate() {
        let Some(cell) = cell else { continue };
        let time = region.start_s + (k as f64) * region.duration_s / (n as f64);
        let value = match cell {
            ParamValue::Token(t) => ParamValue::Token(recode(mapping, t.clone())),
            ParamValue::Quantity(x) => {
                let env = EvalEnv {
                    x: *x,
                    i: k as f64,
                    n: n as f64,
                    min,
                    max,
                };
                let v = program.as_ref().map_or(*x, |p| p.eval(&env));
                if !v.is_finite() {
                    out.dropped.push((k, time));
                    continue;
                }
                if kind.is_nominal() {
                    ParamValue::Token(recode(mapping, format_token(v)))
                } else {
                    ParamValue::Quantity(v)
                }
            }
        };
        out.events.push((k, time, value));
    }
    Ok(out)
}

fn time_key(t: f64) -> i64 {
    (t * 1e9).round() as i64
}

/// Compiles every track's regions into time-ordered update events. Events
/// of one track at the same instant are merged into a single change set.
pub fn compile_schedule(loaded: &LoadedProject, registry: &SynthRegistry) -> Result<Schedule, ProjectError> {
    let problems = super::validate(loaded, registry);
    if !problems.is_empty() {
        return Err(ProjectError::Invalid(problems));
    }
    let project = &loaded.project;
    let mut warnings = Vec::new();
    let mut tracks = Vec::new();
    for track in &project.tracks {
        let synth = project.track_synth(track).expect("validated");
        let definition = registry.get(synth)?;
        let mut merged: BTreeMap<i64, (f64, ParamValues)> = BTreeMap::new();
        for (index, region) in track.regions.iter().enumerate() {
            let kind = definition.parameter(&region.parameter).expect("validated").kind;
            let dataset = &loaded.datasets[&region.dataset];
            let values = region_values(project, dataset, region, kind)
                .map_err(|m| ProjectError::Invalid(vec![Diagnostic::region(&track.name, &region.label(index), m)]))?;
            for (row, time) in values.dropped {
                let w = Diagnostic::region(
                    &track.name,
                    &region.label(index),
                    format!("row {row} at {time} s maps to a non-finite value; event dropped"),
                )
                .warning();
                log::warn!("{w}");
                warnings.push(w);
            }
            for (_, time, value) in values.events {
                merged
                    .entry(time_key(time))
                    .or_insert_with(|| (time, ParamValues::new()))
                    .1
                    .insert(region.parameter.clone(), value);
            }
        }
        let times: Vec<f64> = merged.values().map(|(t, _)| *t).collect();
        let events = merged
            .into_values()
            .enumerate()
            .map(|(i, (time_s, changes))| {
                let dt = match (times.get(i + 1), i.checked_sub(1)) {
                    (Some(next), _) => next - time_s,
                    (None, Some(prev)) => time_s - times[prev],
                    (None, None) => FINAL_GAP_S,
                };
                UpdateEvent {
                    track_id: track.id.clone(),
                    time_s,
                    changes,
                    dt_to_next_s: dt,
                }
            })
            .collect();
        tracks.push(TrackSchedule {
            track_id: track.id.clone(),
            events,
        });
    }
    debug_assert!(warnings.iter().all(|w| w.severity == Severity::Warning));
    Ok(Schedule { tracks, warnings })
}
