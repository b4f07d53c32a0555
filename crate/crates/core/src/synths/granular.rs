//! Data-driven granular sampler. There is no persistent voice: every update
//! queues one grain, a buffer source with its own rate, read position, gain
//! and length, started at the event time. Grains have a rectangular window.

use std::sync::{Arc, Mutex};

use log::warn;

use super::values;
use crate::graph::{NodeId, NodeKind};
use crate::synth::{
    BuildFn, DefaultsFn, ParamValue, ParameterDescriptor, SynthDefinition, SynthError, SynthParts, UpdateBinding,
};

pub const NAME: &str = "granular";
pub const PARAMETERS: [&str; 6] = ["buffer", "rate", "position", "gain", "duration", "time"];

pub fn definition() -> SynthDefinition {
    let parameters = vec![
        ParameterDescriptor::nominal("buffer", None),
        ParameterDescriptor::quantitative("rate"),
        ParameterDescriptor::quantitative("position"),
        ParameterDescriptor::quantitative("gain"),
        ParameterDescriptor::quantitative("duration"),
        ParameterDescriptor::temporal("time"),
    ];
    let defaults: DefaultsFn = Arc::new(|ctx| {
        let first = ctx.buffers.keys().next().cloned().unwrap_or_default();
        values(&[
            ("buffer", ParamValue::Token(first)),
            ("rate", ParamValue::Quantity(1.0)),
            ("position", ParamValue::Quantity(0.0)),
            ("gain", ParamValue::Quantity(0.8)),
            ("duration", ParamValue::Quantity(0.1)),
            ("time", ParamValue::Quantity(0.0)),
        ])
    });
    SynthDefinition::new(NAME, parameters, Vec::new(), defaults, build())
}

fn build() -> BuildFn {
    Arc::new(|_graph, destination, ctx| {
        if ctx.buffers.is_empty() {
            return Err(SynthError::BuildFailure(
                "granular synth needs at least one loaded buffer".into(),
            ));
        }
        let buffers = ctx.buffers.clone();
        let grains: Arc<Mutex<Vec<NodeId>>> = Arc::default();
        let queued = grains.clone();
        let grain = UpdateBinding::new(&PARAMETERS, move |g, args| {
            let name = args.token("buffer")?;
            let buffer = buffers
                .get(name)
                .ok_or_else(|| SynthError::UnknownBuffer(name.to_string()))?
                .clone();
            let rate = args.quantity("rate")?;
            let duration = args.quantity("duration")?;
            let gain = args.quantity("gain")?;
            let time = args.quantity("time")?;
            if !(rate > 0.0 && duration > 0.0) || !rate.is_finite() || !duration.is_finite() {
                warn!("skipping grain at {time} s: rate {rate} and duration {duration} must be > 0");
                return Ok(());
            }
            // past-the-end positions clamp to the end and play silence
            let position = args.quantity("position")?.clamp(0.0, buffer.duration());
            let source = g.create_buffer_source(buffer, position, rate)?;
            g.start(source, time)?;
            g.stop(source, time + duration)?;
            let amp = g.create_node(NodeKind::Gain, &[("gain", gain)])?;
            g.connect(source, amp)?;
            g.connect(amp, destination)?;
            queued.lock().expect("grain list poisoned").push(source);
            Ok(())
        });
        let stop = move |g: &mut crate::graph::AudioGraph, t: f64| -> Result<(), SynthError> {
            for id in grains.lock().expect("grain list poisoned").iter() {
                g.stop_by(*id, t)?;
            }
            Ok(())
        };
        Ok(SynthParts {
            bindings: vec![grain],
            start: None,
            stop: Some(Box::new(stop)),
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{AudioBuffer, AudioGraph};
    use crate::synth::{BuildContext, ParamValues, SynthInstance};

    const SR: u32 = 44100;

    fn ramp_buffer() -> Arc<AudioBuffer> {
        let samples = (0..SR).map(|i| ((i as f32) * 0.001).sin()).collect();
        Arc::new(AudioBuffer::mono(SR, samples))
    }

    fn setup() -> (AudioGraph, SynthInstance, Arc<AudioBuffer>) {
        let buf = ramp_buffer();
        let mut ctx = BuildContext::default();
        ctx.buffers.insert("src".into(), buf.clone());
        let mut g = AudioGraph::new(SR);
        let dest = g.destination();
        let inst = definition().instantiate(&mut g, dest, &ctx).unwrap();
        (g, inst, buf)
    }

    fn grain(rate: f64, position: f64, gain: f64, duration: f64) -> ParamValues {
        [
            ("buffer", ParamValue::Token("src".into())),
            ("rate", ParamValue::Quantity(rate)),
            ("position", ParamValue::Quantity(position)),
            ("gain", ParamValue::Quantity(gain)),
            ("duration", ParamValue::Quantity(duration)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    #[test]
    fn all_parameters_share_one_binding() {
        let (mut g, mut inst, _) = setup();
        let fired = inst.dispatch(&mut g, &grain(1.0, 0.0, 1.0, 0.1), 0.0, 0.1).unwrap();
        assert_eq!(fired, 1);
        assert_eq!(inst.bindings().len(), 1);
    }

    #[test]
    fn unit_grain_reproduces_source_slice() {
        let (mut g, mut inst, buf) = setup();
        inst.dispatch(&mut g, &grain(1.0, 0.5, 1.0, 0.2), 0.1, 0.5).unwrap();
        let out = g.render_offline(0.5).unwrap();
        let ch = out.channel(0);
        assert!(ch[..4410].iter().all(|s| *s == 0.0));
        assert_eq!(&ch[4410..13230], &buf.channel(0)[22050..30870]);
        assert!(ch[13230..].iter().all(|s| *s == 0.0));
    }

    #[test]
    fn position_past_end_is_silent() {
        let (mut g, mut inst, _) = setup();
        inst.dispatch(&mut g, &grain(1.0, 5.0, 1.0, 0.2), 0.0, 0.5).unwrap();
        let out = g.render_offline(0.3).unwrap();
        assert!(out.channel(0).iter().all(|s| *s == 0.0));
    }

    #[test]
    fn unknown_buffer_rejected() {
        let (mut g, mut inst, _) = setup();
        let mut bad = grain(1.0, 0.0, 1.0, 0.1);
        bad.insert("buffer".into(), ParamValue::Token("nope".into()));
        assert!(matches!(
            inst.dispatch(&mut g, &bad, 0.0, 0.1),
            Err(SynthError::UnknownBuffer(_))
        ));
    }

    #[test]
    fn invalid_grains_are_skipped() {
        let (mut g, mut inst, _) = setup();
        let before = g.node_count();
        inst.dispatch(&mut g, &grain(0.0, 0.0, 1.0, 0.1), 0.0, 0.1).unwrap();
        inst.dispatch(&mut g, &grain(1.0, 0.0, 1.0, -1.0), 0.1, 0.1).unwrap();
        assert_eq!(g.node_count(), before);
    }

    #[test]
    fn build_needs_buffers() {
        let mut g = AudioGraph::new(SR);
        let dest = g.destination();
        assert!(matches!(
            definition().instantiate(&mut g, dest, &BuildContext::default()),
            Err(SynthError::BuildFailure(_))
        ));
    }

    #[test]
    fn default_buffer_is_first_loaded() {
        let mut ctx = BuildContext::default();
        ctx.buffers.insert("b".into(), ramp_buffer());
        ctx.buffers.insert("a".into(), ramp_buffer());
        let d = definition().default_values(&ctx);
        assert_eq!(d["buffer"], ParamValue::Token("b".into()));
        assert_eq!(d["rate"], ParamValue::Quantity(1.0));
    }

    #[test]
    fn stop_cuts_pending_grains() {
        let (mut g, mut inst, _) = setup();
        inst.dispatch(&mut g, &grain(1.0, 0.0, 1.0, 0.3), 0.0, 0.5).unwrap();
        inst.dispatch(&mut g, &grain(1.0, 0.0, 1.0, 0.3), 0.4, 0.5).unwrap();
        inst.stop_all(&mut g, 0.1).unwrap();
        let out = g.render_offline(1.0).unwrap();
        assert!(out.channel(0)[4410..].iter().all(|s| *s == 0.0));
    }
}
