//! Chowning-style FM voice.
//!
//! A modulator sine at `p6` feeds a gain set to the peak deviation
//! `d = I * f_m`, which is added at audio rate to the carrier's frequency
//! (`p5`). The carrier passes through an amplitude gain (`p4`). The modulation
//! index moves linearly from `p7` to `p8` over the span until the next event.

use std::sync::Arc;

use super::values;
use crate::graph::{AutomationEvent, NodeKind};
use crate::synth::{
    BuildFn, DefaultsFn, ParamValue, ParameterDescriptor, SynthDefinition, SynthError, SynthParts, UpdateBinding,
};

pub const NAME: &str = "fm";

pub fn definition() -> SynthDefinition {
    let parameters = vec![
        ParameterDescriptor::temporal("p3"),
        ParameterDescriptor::quantitative("p4"),
        ParameterDescriptor::quantitative("p5"),
        ParameterDescriptor::quantitative("p6"),
        ParameterDescriptor::quantitative("p7"),
        ParameterDescriptor::quantitative("p8"),
    ];
    let defaults: DefaultsFn = Arc::new(|_| {
        values(&[
            ("p3", ParamValue::Quantity(0.0)),
            ("p4", ParamValue::Quantity(0.5)),
            ("p5", ParamValue::Quantity(440.0)),
            ("p6", ParamValue::Quantity(110.0)),
            ("p7", ParamValue::Quantity(1.0)),
            ("p8", ParamValue::Quantity(1.0)),
        ])
    });
    SynthDefinition::new(NAME, parameters, Vec::new(), defaults, build())
}

fn build() -> BuildFn {
    Arc::new(|graph, destination, _ctx| {
        let modulator = graph.create_node(NodeKind::SineOscillator, &[("frequency", 110.0)])?;
        let deviation = graph.create_node(NodeKind::Gain, &[("gain", 110.0)])?;
        let carrier = graph.create_node(NodeKind::SineOscillator, &[("frequency", 440.0)])?;
        let amplitude = graph.create_node(NodeKind::Gain, &[("gain", 0.5)])?;
        graph.connect(modulator, deviation)?;
        graph.connect_to_param(deviation, carrier, "frequency")?;
        graph.connect(carrier, amplitude)?;
        graph.connect(amplitude, destination)?;

        let bindings = vec![
            UpdateBinding::new(&["p5", "p3"], move |g, args| {
                let f = args.quantity("p5")?.max(0.0);
                g.schedule(
                    carrier,
                    "frequency",
                    AutomationEvent::set_value(args.quantity("p3")?, f),
                )?;
                Ok(())
            }),
            UpdateBinding::new(&["p4", "p3"], move |g, args| {
                let a = args.quantity("p4")?.clamp(0.0, 1.0);
                g.schedule(amplitude, "gain", AutomationEvent::set_value(args.quantity("p3")?, a))?;
                Ok(())
            }),
            UpdateBinding::new(&["p6", "p3"], move |g, args| {
                let f = args.quantity("p6")?.max(0.0);
                g.schedule(
                    modulator,
                    "frequency",
                    AutomationEvent::set_value(args.quantity("p3")?, f),
                )?;
                Ok(())
            }),
            UpdateBinding::new(&["p6", "p7", "p8", "p3"], move |g, args| {
                let fm = args.quantity("p6")?.max(0.0);
                let start = args.quantity("p3")?;
                let d1 = fm * args.quantity("p7")?.max(0.0);
                let d2 = fm * args.quantity("p8")?.max(0.0);
                g.schedule(deviation, "gain", AutomationEvent::set_value(start, d1))?;
                if args.dt_to_next > 0.0 {
                    g.schedule(
                        deviation,
                        "gain",
                        AutomationEvent::linear_ramp(start + args.dt_to_next, d2),
                    )?;
                }
                Ok(())
            }),
        ];
        Ok(SynthParts {
            bindings,
            start: Some(Box::new(move |g, t| {
                g.start(modulator, t)?;
                g.start(carrier, t)?;
                Ok(())
            })),
            stop: Some(Box::new(move |g, t| {
                g.stop_by(modulator, t)?;
                g.stop_by(carrier, t)?;
                Ok::<(), SynthError>(())
            })),
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::AudioGraph;
    use crate::synth::{BuildContext, ParamValues};

    fn changes(items: &[(&str, f64)]) -> ParamValues {
        items
            .iter()
            .map(|(k, v)| (k.to_string(), ParamValue::Quantity(*v)))
            .collect()
    }

    #[test]
    fn exposes_chowning_parameters() {
        let def = definition();
        let names: Vec<_> = def.parameters.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["p3", "p4", "p5", "p6", "p7", "p8"]);
        let mut g = AudioGraph::default();
        let dest = g.destination();
        let inst = def.instantiate(&mut g, dest, &BuildContext::default()).unwrap();
        assert_eq!(inst.bindings().len(), 4);
    }

    #[test]
    fn deviation_is_index_times_modulator_frequency() {
        let def = definition();
        let mut g = AudioGraph::default();
        let dest = g.destination();
        let mut inst = def.instantiate(&mut g, dest, &BuildContext::default()).unwrap();
        let fired = inst
            .dispatch(&mut g, &changes(&[("p6", 100.0), ("p7", 2.0)]), 0.0, 1.0)
            .unwrap();
        // [p6,p3] and [p6,p7,p8,p3]; the shared binding fires once
        assert_eq!(fired, 2);
        assert_eq!(inst.invocation_counts(), &[0, 0, 1, 1]);
        // node 2 is the deviation gain
        let deviation = g
            .connections()
            .iter()
            .find(|c| c.param.as_deref() == Some("frequency"))
            .unwrap()
            .from;
        let p = g.param(deviation, "gain").unwrap();
        assert_eq!(p.value_at(0.0), 200.0);
        // p8 default 1 -> ramps to 100 by t=1
        assert_eq!(p.value_at(1.0), 100.0);
        assert_eq!(p.value_at(0.5), 150.0);
    }

    #[test]
    fn defaults() {
        let d = definition().default_values(&BuildContext::default());
        assert_eq!(d["p5"], ParamValue::Quantity(440.0));
        assert_eq!(d["p4"], ParamValue::Quantity(0.5));
        assert_eq!(d["p6"], ParamValue::Quantity(110.0));
    }

    #[test]
    fn stop_silences_output() {
        let def = definition();
        let mut g = AudioGraph::default();
        let dest = g.destination();
        let mut inst = def.instantiate(&mut g, dest, &BuildContext::default()).unwrap();
        inst.start_all(&mut g, 0.0).unwrap();
        inst.stop_all(&mut g, 0.2).unwrap();
        let out = g.render_offline(0.4).unwrap();
        let cut = 8820;
        assert!(out.channel(0)[..cut].iter().any(|s| *s != 0.0));
        assert!(out.channel(0)[cut..].iter().all(|s| *s == 0.0));
    }
}
