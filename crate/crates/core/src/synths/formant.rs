//! Formant voice: an impulse train excites three parallel bandpass filters
//! whose centers come from a fixed vowel table selected by a nominal token.

use std::sync::Arc;

use super::values;
use crate::graph::{impulse_train_processor, AutomationEvent, NodeId, NodeKind, IMPULSE_PROCESSOR};
use crate::synth::{
    BuildFn, DefaultsFn, ParamValue, ParameterDescriptor, SynthDefinition, SynthError, SynthParts, UpdateBinding,
};

pub const NAME: &str = "formant";
pub const OUTPUT_GAIN: f64 = 0.9;
/// Bandwidths of the first three formants, Hz. Shared by every vowel.
pub const BANDWIDTHS: [f64; 3] = [80.0, 90.0, 120.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vowel {
    pub token: &'static str,
    pub label: &'static str,
    pub centers: [f64; 3],
}

impl Vowel {
    pub fn q(&self, formant: usize) -> f64 {
        self.centers[formant] / BANDWIDTHS[formant]
    }
}

pub const VOWELS: [Vowel; 3] = [
    Vowel {
        token: "0",
        label: "a",
        centers: [730.0, 1090.0, 2440.0],
    },
    Vowel {
        token: "1",
        label: "e",
        centers: [530.0, 1840.0, 2480.0],
    },
    Vowel {
        token: "2",
        label: "i",
        centers: [270.0, 2290.0, 3010.0],
    },
];

pub fn vowel(token: &str) -> Result<&'static Vowel, SynthError> {
    VOWELS
        .iter()
        .find(|v| v.token == token)
        .ok_or_else(|| SynthError::UnknownVowel(token.to_string()))
}

pub fn definition() -> SynthDefinition {
    let tokens: Vec<&str> = VOWELS.iter().map(|v| v.token).collect();
    let parameters = vec![
        ParameterDescriptor::quantitative("Frequency"),
        ParameterDescriptor::nominal("Vowel", Some(&tokens)),
        ParameterDescriptor::temporal("Time"),
    ];
    let defaults: DefaultsFn = Arc::new(|_| {
        values(&[
            ("Frequency", ParamValue::Quantity(110.0)),
            ("Vowel", ParamValue::Token("0".into())),
            ("Time", ParamValue::Quantity(0.0)),
        ])
    });
    SynthDefinition::new(NAME, parameters, vec![impulse_train_processor()], defaults, build())
}

fn build() -> BuildFn {
    Arc::new(|graph, destination, _ctx| {
        let source = graph.create_node(NodeKind::Custom(IMPULSE_PROCESSOR.into()), &[("frequency", 110.0)])?;
        let initial = &VOWELS[0];
        let mut filters: [NodeId; 3] = [source; 3];
        let sum = graph.create_node(NodeKind::Sum, &[])?;
        for (i, slot) in filters.iter_mut().enumerate() {
            let f = graph.create_node(
                NodeKind::BiquadBandpass,
                &[("center_frequency", initial.centers[i]), ("q", initial.q(i))],
            )?;
            graph.connect(source, f)?;
            graph.connect(f, sum)?;
            *slot = f;
        }
        let output = graph.create_node(NodeKind::Gain, &[("gain", OUTPUT_GAIN)])?;
        graph.connect(sum, output)?;
        graph.connect(output, destination)?;

        let bindings = vec![
            UpdateBinding::new(&["Frequency", "Time"], move |g, args| {
                let f = args.quantity("Frequency")?.max(0.0);
                g.schedule(
                    source,
                    "frequency",
                    AutomationEvent::set_value(args.quantity("Time")?, f),
                )?;
                Ok(())
            }),
            UpdateBinding::new(&["Vowel", "Time"], move |g, args| {
                let v = vowel(args.token("Vowel")?)?;
                let t = args.quantity("Time")?;
                for (i, f) in filters.iter().enumerate() {
                    g.schedule(*f, "center_frequency", AutomationEvent::set_value(t, v.centers[i]))?;
                    g.schedule(*f, "q", AutomationEvent::set_value(t, v.q(i)))?;
                }
                Ok(())
            }),
        ];
        let stop = move |g: &mut crate::graph::AudioGraph, t: f64| -> Result<(), SynthError> {
            g.stop_by(source, t)?;
            g.schedule(output, "gain", AutomationEvent::set_value(t, 0.0))?;
            Ok(())
        };
        Ok(SynthParts {
            bindings,
            start: None,
            stop: Some(Box::new(stop)),
        })
    })
}
