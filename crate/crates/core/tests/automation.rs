//! Automation curves checked against an independent piecewise evaluation,
//! both analytically and through a rendered graph.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sonir_core::graph::{AudioBuffer, AudioGraph, AutomatableParam, AutomationEvent, AutomationKind, NodeKind};

const SR: u32 = 8000;
const SECONDS: f64 = 0.05;

/// Walks the events in time order (ties keep insertion order), tracking the
/// most recent anchor point; a ramp ahead of `t` interpolates from it.
fn oracle(base: f64, accepted: &[AutomationEvent], t: f64) -> f64 {
    let mut sorted: Vec<&AutomationEvent> = accepted.iter().collect();
    sorted.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap());
    let mut anchor = (0.0, base);
    for e in sorted {
        if e.time <= t {
            anchor = (e.time, e.value);
            continue;
        }
        return match e.kind {
            AutomationKind::LinearRampToValueAtTime => {
                if e.time == anchor.0 {
                    e.value
                } else {
                    anchor.1 + (e.value - anchor.1) * (t - anchor.0) / (e.time - anchor.0)
                }
            }
            AutomationKind::SetValueAtTime => anchor.1,
        };
    }
    anchor.1
}

fn random_events(rng: &mut ChaCha8Rng) -> Vec<AutomationEvent> {
    let count = rng.gen_range(0..12);
    (0..count)
        .map(|_| {
            // half the times land on a coarse grid so that ties and
            // frame-exact events are common
            let time = if rng.gen_bool(0.5) {
                rng.gen_range(0..40) as f64 / 800.0
            } else {
                rng.gen_range(0.0..SECONDS * 1.2)
            };
            let value = rng.gen_range(-1.0..1.0);
            if rng.gen_bool(0.5) {
                AutomationEvent::set_value(time, value)
            } else {
                AutomationEvent::linear_ramp(time, value)
            }
        })
        .collect()
}

#[test]
fn value_at_matches_oracle_on_random_lists() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let base = rng.gen_range(-1.0..1.0);
        let mut p = AutomatableParam::new(base);
        let mut accepted = Vec::new();
        for e in random_events(&mut rng) {
            if p.schedule(e).is_ok() {
                accepted.push(e);
            }
        }
        for _ in 0..50 {
            let t = rng.gen_range(0.0..SECONDS * 1.5);
            let (got, want) = (p.value_at(t), oracle(base, &accepted, t));
            assert!(
                (got - want).abs() <= 1e-9,
                "t={t} got {got} want {want} events {accepted:?}"
            );
        }
    }
}

#[test]
fn rendered_gain_follows_automation_sample_by_sample() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let frames = (SECONDS * SR as f64) as usize;
    let ones = std::sync::Arc::new(AudioBuffer::mono(SR, vec![1.0; frames + 1]));
    for _ in 0..1000 {
        let base = rng.gen_range(-1.0..1.0);
        let mut g = AudioGraph::new(SR);
        let src = g.create_buffer_source(ones.clone(), 0.0, 1.0).unwrap();
        let gain = g.create_node(NodeKind::Gain, &[("gain", base)]).unwrap();
        g.connect(src, gain).unwrap();
        g.connect(gain, g.destination()).unwrap();
        let mut accepted = Vec::new();
        for e in random_events(&mut rng) {
            if g.schedule(gain, "gain", e).is_ok() {
                accepted.push(e);
            }
        }
        let out = g.render_offline(SECONDS).unwrap();
        assert_eq!(out.frames(), frames);
        for (k, &y) in out.channel(0).iter().enumerate() {
            let want = oracle(base, &accepted, k as f64 / SR as f64);
            assert!((y as f64 - want).abs() <= 1e-6, "frame {k}: {y} vs {want}");
        }
    }
}

#[test]
fn scheduling_errors() {
    let mut p = AutomatableParam::new(0.0);
    assert!(p.schedule(AutomationEvent::set_value(-1.0, 0.0)).is_err());
    assert!(p.schedule(AutomationEvent::set_value(f64::NAN, 0.0)).is_err());
    assert!(p.schedule(AutomationEvent::linear_ramp(1.0, f64::INFINITY)).is_err());
    p.schedule(AutomationEvent::linear_ramp(1.0, 1.0)).unwrap();
    assert!(p.schedule(AutomationEvent::linear_ramp(1.0, 2.0)).is_err());
    p.schedule(AutomationEvent::set_value(1.0, 2.0)).unwrap();
    assert_eq!(p.value_at(1.0), 2.0);
}
