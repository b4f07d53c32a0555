use super::schedule::{compile_schedule, Schedule};
use super::{LoadedProject, ProjectError};
use crate::graph::{AudioBuffer, AudioGraph};
use crate::synth::{BuildContext, SynthInstance, SynthRegistry};

/// A track's synth after its events have been dispatched.
#[derive(Debug)]
pub struct TrackInstance {
    pub track_id: String,
    pub instance: SynthInstance,
    /// Bindings fired per event, in event order.
    pub fired: Vec<usize>,
}

/// A fully scheduled graph, ready to render.
#[derive(Debug)]
pub struct PreparedTransport {
    pub graph: AudioGraph,
    pub tracks: Vec<TrackInstance>,
    pub schedule: Schedule,
    pub duration_s: f64,
}

impl PreparedTransport {
    pub fn render(&self) -> Result<AudioBuffer, ProjectError> {
        Ok(self.graph.render_offline(self.duration_s)?)
    }
}

/// Builds one graph holding every track's synth, starts each at 0, applies
/// its events in order and stops it at the end of the transport.
pub fn prepare(loaded: &LoadedProject, registry: &SynthRegistry) -> Result<PreparedTransport, ProjectError> {
    let schedule = compile_schedule(loaded, registry)?;
    let project = &loaded.project;
    let sample_rate = project.transport.sample_rate;
    let duration_s = project.transport.duration_s;
    let ctx = BuildContext {
        buffers: loaded
            .buffers
            .iter()
            .map(|(name, b)| {
                let b = if b.sample_rate() == sample_rate {
                    b.clone()
                } else {
                    b.resampled(sample_rate).into()
                };
                (name.clone(), b)
            })
            .collect(),
    };
    let mut graph = AudioGraph::new(sample_rate);
    let destination = graph.destination();
    let mut tracks = Vec::new();
    for (track, track_schedule) in project.tracks.iter().zip(&schedule.tracks) {
        let synth = project.track_synth(track).expect("validated");
        let mut instance = registry.get(synth)?.instantiate(&mut graph, destination, &ctx)?;
        instance.start_all(&mut graph, 0.0)?;
        let mut fired = Vec::with_capacity(track_schedule.events.len());
        for event in &track_schedule.events {
            fired.push(instance.dispatch(&mut graph, &event.changes, event.time_s, event.dt_to_next_s)?);
        }
        instance.stop_all(&mut graph, duration_s)?;
        tracks.push(TrackInstance {
            track_id: track.id.clone(),
            instance,
            fired,
        });
    }
    Ok(PreparedTransport {
        graph,
        tracks,
        schedule,
        duration_s,
    })
}

/// Renders the whole project to a stereo buffer of exactly
/// `duration_s * sample_rate` frames.
pub fn run_transport(loaded: &LoadedProject, registry: &SynthRegistry) -> Result<AudioBuffer, ProjectError> {
    prepare(loaded, registry)?.render()
}

#[cfg(test)]
mod tests {
    use indexmap::IndexMap;

    use super::*;
    use crate::data::parse_csv;
    use crate::project::Project;

    fn load(json: &str) -> LoadedProject {
        let csv = parse_csv("d", b"v,w\n220,0\n330,1\n440,2\n550,1\n").unwrap();
        LoadedProject::new(Project::from_json(json).unwrap(), vec![csv], IndexMap::new())
    }

    #[test]
    fn zero_tracks_render_silence() {
        let p = load(r#"{"version":"1","transport":{"duration_s":1.5,"sample_rate":8000}}"#);
        let out = run_transport(&p, &SynthRegistry::with_builtins()).unwrap();
        assert_eq!(out.frames(), 12000);
        assert_eq!(out.channel_count(), 2);
        assert!(out.channels().iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn events_are_dispatched_and_counted() {
        let p = load(
            r#"{"version":"1","transport":{"duration_s":2,"sample_rate":8000},
                "tracks":[{"id":"a","name":"A","synth":"formant","regions":[
                  {"dataset":"d","column":"v","parameter":"Frequency","start_s":0,"duration_s":2},
                  {"dataset":"d","column":"w","parameter":"Vowel","start_s":0,"duration_s":2}]}]}"#,
        );
        let prepared = prepare(&p, &SynthRegistry::with_builtins()).unwrap();
        assert_eq!(prepared.tracks[0].fired, vec![2, 2, 2, 2]);
        assert_eq!(prepared.tracks[0].instance.invocation_counts(), &[4, 4]);
        let out = prepared.render().unwrap();
        assert_eq!(out.frames(), 16000);
        assert!(out.channel(0).iter().any(|&x| x != 0.0));
    }

    #[test]
    fn invalid_projects_do_not_render() {
        let p = load(r#"{"version":"2","transport":{"duration_s":1}}"#);
        assert!(matches!(
            run_transport(&p, &SynthRegistry::with_builtins()),
            Err(ProjectError::Invalid(_))
        ));
    }
}
