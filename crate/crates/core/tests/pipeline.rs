use std::path::PathBuf;

use indexmap::IndexMap;
use rustfft::{num_complex::Complex, FftPlanner};
use sonir_core::data::parse_csv;
use sonir_core::project::{load_project, prepare, run_transport, validate, LoadedProject, Project};
use sonir_core::synth::SynthRegistry;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

#[test]
fn demo_projects_validate_and_render_to_length() {
    let registry = SynthRegistry::with_builtins();
    for name in [
        "fm_demo.json",
        "formant_demo.json",
        "granular_demo.json",
        "coral_demo.json",
    ] {
        let loaded = load_project(&fixture(name)).unwrap();
        assert_eq!(validate(&loaded, &registry), vec![], "{name}");
        let out = run_transport(&loaded, &registry).unwrap();
        let t = &loaded.project.transport;
        assert_eq!(out.frames() as f64, t.duration_s * t.sample_rate as f64, "{name}");
        let peak = out.channels().iter().flatten().fold(0.0f32, |m, x| m.max(x.abs()));
        assert!(peak > 0.01 && peak.is_finite(), "{name}: peak {peak}");
    }
}

#[test]
fn defect_fixtures_each_report_their_problem() {
    let registry = SynthRegistry::with_builtins();
    for (name, needle) in [
        ("defects/unknown_column.json", "no column `salinity_psu`"),
        ("defects/kind_mismatch.json", "kind mismatch"),
        ("defects/overlapping_regions.json", "overlaps"),
    ] {
        let d = validate(&load_project(&fixture(name)).unwrap(), &registry);
        assert_eq!(d.len(), 1, "{name}: {d:?}");
        assert!(d[0].message.contains(needle), "{name}: {}", d[0]);
        assert_eq!(d[0].track.as_deref(), Some("Track 1"));
        assert!(d[0].region.is_some());
    }
}

fn fm_project(values: &[f64], extra_track: bool) -> LoadedProject {
    let mut csv = String::from("hz,level\n");
    for v in values {
        csv.push_str(&format!("{v},0.3\n"));
    }
    let second = if extra_track {
        r#",{"id":"b","name":"B","synth":"formant","regions":[
             {"dataset":"d","column":"level","parameter":"Frequency","start_s":0,"duration_s":2}]}"#
    } else {
        ""
    };
    let json = format!(
        r#"{{"version":"1","transport":{{"duration_s":2}},"tracks":[
             {{"id":"a","name":"A","synth":"fm","regions":[
               {{"dataset":"d","column":"hz","parameter":"p5","start_s":0,"duration_s":2}},
               {{"dataset":"d","column":"level","parameter":"p7","start_s":0,"duration_s":2}},
               {{"dataset":"d","column":"level","parameter":"p8","start_s":0,"duration_s":2}}]}}{second}]}}"#
    );
    LoadedProject::new(
        Project::from_json(&json).unwrap(),
        vec![parse_csv("d", csv.as_bytes()).unwrap()],
        IndexMap::new(),
    )
}

#[test]
fn rendered_pitch_follows_mapped_values() {
    let values = [220.0, 330.0, 495.0, 660.0];
    let out = run_transport(&fm_project(&values, false), &SynthRegistry::with_builtins()).unwrap();
    let x = out.channel(0);
    let n = 8192;
    for (k, want) in values.iter().enumerate() {
        // a window in the middle of each half-second segment
        let start = k * 22050 + (22050 - n) / 2;
        let mut buf: Vec<Complex<f64>> = (0..n)
            .map(|j| {
                let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * j as f64 / n as f64).cos();
                Complex::new(x[start + j] as f64 * w, 0.0)
            })
            .collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let peak = (1..n / 2)
            .max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm()))
            .unwrap();
        let hz = peak as f64 * 44100.0 / n as f64;
        assert!(
            (hz - want).abs() <= 44100.0 / n as f64,
            "segment {k}: {hz} Hz, want {want}"
        );
    }
}

#[test]
fn tracks_sum_to_the_mix() {
    let registry = SynthRegistry::with_builtins();
    let values = [220.0, 330.0, 440.0];
    let both = fm_project(&values, true);
    let mut solo_a = both.clone();
    solo_a.project.tracks.truncate(1);
    let mut solo_b = both.clone();
    solo_b.project.tracks.remove(0);
    let mix = run_transport(&both, &registry).unwrap();
    let a = run_transport(&solo_a, &registry).unwrap();
    let b = run_transport(&solo_b, &registry).unwrap();
    for c in 0..2 {
        for k in 0..mix.frames() {
            let sum = a.channel(c)[k] as f64 + b.channel(c)[k] as f64;
            assert!((mix.channel(c)[k] as f64 - sum).abs() <= 1e-6, "frame {k}");
        }
    }
}

#[test]
fn renders_repeat_exactly() {
    let registry = SynthRegistry::with_builtins();
    let loaded = load_project(&fixture("coral_demo.json")).unwrap();
    let prepared = prepare(&loaded, &registry).unwrap();
    let first = prepared.render().unwrap();
    assert_eq!(first, prepared.render().unwrap());
    assert_eq!(first, run_transport(&loaded, &registry).unwrap());
}
