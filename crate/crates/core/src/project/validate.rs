use std::collections::HashSet;

use super::schedule::region_values;
use super::{Diagnostic, LoadedProject, PROJECT_VERSION};
use crate::data::DataType;
use crate::mapping::parse;
use crate::synth::{ParamValue, ParameterKind, SynthRegistry};

/// Every problem that would stop the project from rendering. An empty list
/// means the project is renderable.
pub fn validate(loaded: &LoadedProject, registry: &SynthRegistry) -> Vec<Diagnostic> {
    let project = &loaded.project;
    let mut out = Vec::new();

    if project.version != PROJECT_VERSION {
        out.push(Diagnostic::project(format!(
            "unsupported version `{}`, expected `{PROJECT_VERSION}`",
            project.version
        )));
    }
    let duration = project.transport.duration_s;
    if !(duration.is_finite() && duration > 0.0) {
        out.push(Diagnostic::project(
            "transport duration must be a positive number of seconds",
        ));
    }
    if project.transport.sample_rate == 0 {
        out.push(Diagnostic::project("transport sample rate must be positive"));
    }

    let mut seen = HashSet::new();
    for m in &project.mappings {
        if !seen.insert(m.name.as_str()) {
            out.push(Diagnostic::project(format!("duplicate mapping `{}`", m.name)));
        }
        match &m.source {
            Some(src) => {
                if let Err(e) = parse(src) {
                    out.push(Diagnostic::project(format!("mapping `{}` does not parse: {e}", m.name)));
                }
            }
            None if m.tokens.is_none() => {
                out.push(Diagnostic::project(format!(
                    "mapping `{}` has neither source nor tokens",
                    m.name
                )));
            }
            None => {}
        }
    }

    let mut ids = HashSet::new();
    for track in &project.tracks {
        if !ids.insert(track.id.as_str()) {
            out.push(Diagnostic::track(
                &track.name,
                format!("duplicate track id `{}`", track.id),
            ));
        }
    }
    for id in project.synths.keys() {
        if !ids.contains(id.as_str()) {
            out.push(Diagnostic::project(format!(
                "synth assigned to unknown track id `{id}`"
            )));
        }
    }

    for track in &project.tracks {
        if let (Some(inline), Some(table)) = (&track.synth, project.synths.get(&track.id)) {
            if inline != table {
                out.push(Diagnostic::track(
                    &track.name,
                    format!("track names synth `{inline}` but the synths table says `{table}`"),
                ));
            }
        }
        let definition = match project.track_synth(track) {
            None => {
                out.push(Diagnostic::track(&track.name, "no synth assigned"));
                continue;
            }
            Some(name) => match registry.get(name) {
                Ok(d) => d,
                Err(_) => {
                    out.push(Diagnostic::track(&track.name, format!("unknown synth `{name}`")));
                    continue;
                }
            },
        };

        for (index, region) in track.regions.iter().enumerate() {
            let label = region.label(index);
            let mut push = |m: String| out.push(Diagnostic::region(&track.name, &label, m));
            let timing_ok = region.start_s.is_finite()
                && region.start_s >= 0.0
                && region.duration_s.is_finite()
                && region.duration_s > 0.0;
            if !timing_ok {
                push("start must be >= 0 and duration > 0".to_string());
            } else if duration.is_finite() && region.end_s() > duration + 1e-9 {
                push(format!(
                    "region ends at {} s, after the transport ({duration} s)",
                    region.end_s()
                ));
            }
            let Some(param) = definition.parameter(&region.parameter) else {
                push(format!(
                    "synth `{}` has no parameter `{}`",
                    definition.name, region.parameter
                ));
                continue;
            };
            let Some(dataset) = loaded.datasets.get(&region.dataset) else {
                push(format!("unknown dataset `{}`", region.dataset));
                continue;
            };
            let Some(column) = dataset.column(&region.column) else {
                push(format!("dataset `{}` has no column `{}`", dataset.name, region.column));
                continue;
            };
            if column.dtype == DataType::Nominal && param.kind == ParameterKind::TimbralQuantitative {
                push(format!(
                    "kind mismatch: nominal column `{}` cannot drive quantitative parameter `{}`",
                    column.name, param.name
                ));
                continue;
            }
            if let Some(m) = &region.mapping {
                if project.mapping(m).is_none() {
                    push(format!("unknown mapping `{m}`"));
                    continue;
                }
            }
            match region_values(project, dataset, region, param.kind) {
                Err(m) => push(m),
                Ok(values) => {
                    if let Some(allowed) = &param.tokens {
                        let bad = values.events.iter().find_map(|(row, _, v)| match v {
                            ParamValue::Token(t) if !allowed.contains(t) => Some((*row, t.clone())),
                            _ => None,
                        });
                        if let Some((row, token)) = bad {
                            push(format!(
                                "row {row} gives `{token}`, but `{}` accepts only {}",
                                param.name,
                                allowed.join(", ")
                            ));
                        }
                    }
                }
            }
        }

        for (i, a) in track.regions.iter().enumerate() {
            for (j, b) in track.regions.iter().enumerate().skip(i + 1) {
                if a.parameter == b.parameter && a.start_s < b.end_s() && b.start_s < a.end_s() {
                    out.push(Diagnostic::region(
                        &track.name,
                        &b.label(j),
                        format!("overlaps region `{}` on parameter `{}`", a.label(i), a.parameter),
                    ));
                }
            }
        }
    }
    out
}
