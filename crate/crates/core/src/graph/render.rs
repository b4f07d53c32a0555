use std::f64::consts::TAU;

use log::warn;

use super::dsp::{bandpass_clamped, BiquadState, ImpulseTrain, Processor};
use super::{time_to_frame, AudioBuffer, AudioGraph, AutomatableParam, GraphError, Node, NodeKind};

/// One node's output for the current block.
#[derive(Default)]
struct BlockOut {
    channels: usize,
    silent: bool,
    data: [Vec<f64>; 2],
}

impl BlockOut {
    fn with_capacity(n: usize) -> Self {
        Self {
            channels: 1,
            silent: true,
            data: [vec![0.0; n], vec![0.0; n]],
        }
    }

    fn set_silent(&mut self) {
        self.silent = true;
    }

    /// Mono view: left channel, or the average of both channels.
    fn mono_sample(&self, k: usize) -> f64 {
        if self.channels == 2 {
            0.5 * (self.data[0][k] + self.data[1][k])
        } else {
            self.data[0][k]
        }
    }

    fn sample(&self, ch: usize, k: usize) -> f64 {
        self.data[ch.min(self.channels - 1)][k]
    }
}

enum NodeState {
    None,
    Oscillator { phase: f64 },
    Biquad { states: [BiquadState; 2], channels: usize },
    Buffer { position: Option<f64> },
    Processor(Box<dyn Processor>),
}

struct Ctx {
    sample_rate: f64,
    block_start: u64,
    len: usize,
}

/// Number of frames rendered for `duration_s` seconds.
pub fn frames_for_duration(duration_s: f64, sample_rate: u32) -> usize {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return 0;
    }
    time_to_frame(duration_s, sample_rate as f64) as usize
}

impl AudioGraph {
    /// Renders `duration_s` seconds to a stereo buffer at the graph's rate.
    /// Rendering does not mutate the graph: the same graph always produces the
    /// same samples.
    pub fn render_offline(&self, duration_s: f64) -> Result<AudioBuffer, GraphError> {
        if !(duration_s.is_finite() && duration_s >= 0.0) {
            return Err(GraphError::InvalidGraph(format!(
                "render duration must be >= 0, got {duration_s}"
            )));
        }
        let frames = frames_for_duration(duration_s, self.sample_rate);
        let order = self.topological_order()?;
        let mut states = self.initial_states()?;
        let mut outputs: Vec<BlockOut> = (0..self.nodes.len())
            .map(|_| BlockOut::with_capacity(self.block_size))
            .collect();
        let mut nan_reported = vec![false; self.nodes.len()];
        let mut scratch = ParamScratch::new(self.block_size);
        let mut left = vec![0f32; frames];
        let mut right = vec![0f32; frames];

        let mut block_start = 0usize;
        while block_start < frames {
            let len = self.block_size.min(frames - block_start);
            let ctx = Ctx {
                sample_rate: self.sample_rate as f64,
                block_start: block_start as u64,
                len,
            };
            for &id in &order {
                let i = id.index();
                let mut out = std::mem::take(&mut outputs[i]);
                self.process_node(&self.nodes[i], &mut states[i], &ctx, &outputs, &mut scratch, &mut out);
                if !out.silent {
                    flush_non_finite(&mut out, len, &mut nan_reported[i], i);
                }
                outputs[i] = out;
            }
            let dest = &outputs[self.destination.index()];
            if !dest.silent {
                for k in 0..len {
                    left[block_start + k] = dest.sample(0, k) as f32;
                    right[block_start + k] = dest.sample(1, k) as f32;
                }
            }
            block_start += len;
        }
        AudioBuffer::new(self.sample_rate, vec![left, right])
    }

    fn initial_states(&self) -> Result<Vec<NodeState>, GraphError> {
        self.nodes
            .iter()
            .map(|node| {
                Ok(match &node.kind {
                    NodeKind::SineOscillator => NodeState::Oscillator { phase: 0.0 },
                    NodeKind::BiquadBandpass => NodeState::Biquad {
                        states: [BiquadState::default(); 2],
                        channels: 1,
                    },
                    NodeKind::BufferSource => NodeState::Buffer { position: None },
                    NodeKind::ImpulseTrain => NodeState::Processor(Box::new(ImpulseTrain::new())),
                    NodeKind::Custom(name) => {
                        let desc = self
                            .processor(name)
                            .ok_or_else(|| GraphError::UnknownProcessor(name.clone()))?;
                        NodeState::Processor((desc.factory)())
                    }
                    NodeKind::Gain | NodeKind::Sum | NodeKind::Destination => NodeState::None,
                })
            })
            .collect()
    }

    fn process_node(
        &self,
        node: &Node,
        state: &mut NodeState,
        ctx: &Ctx,
        outputs: &[BlockOut],
        scratch: &mut ParamScratch,
        out: &mut BlockOut,
    ) {
        match (&node.kind, state) {
            (NodeKind::Sum, _) | (NodeKind::Destination, _) => {
                sum_inputs(&node.inputs, outputs, ctx.len, out);
            }
            (NodeKind::Gain, _) => {
                sum_inputs(&node.inputs, outputs, ctx.len, out);
                if out.silent {
                    return;
                }
                let gain = scratch.fill(0, &node.params[0].1, outputs, ctx);
                for ch in 0..out.channels {
                    for (s, g) in out.data[ch][..ctx.len].iter_mut().zip(gain) {
                        *s *= *g;
                    }
                }
            }
            (NodeKind::SineOscillator, NodeState::Oscillator { phase }) => {
                let Some((from, to)) = active_range(node, ctx) else {
                    out.set_silent();
                    return;
                };
                let freq = scratch.fill(0, &node.params[0].1, outputs, ctx);
                prepare_mono(out, ctx.len);
                for (y, f) in out.data[0][from..to].iter_mut().zip(&freq[from..to]) {
                    *y = (TAU * *phase).sin();
                    *phase += f / ctx.sample_rate;
                    *phase -= phase.floor();
                }
            }
            (NodeKind::BiquadBandpass, NodeState::Biquad { states, channels }) => {
                sum_inputs(&node.inputs, outputs, ctx.len, out);
                if out.silent {
                    if states[..*channels].iter().all(BiquadState::is_quiet) {
                        return;
                    }
                    out.silent = false;
                    out.channels = *channels;
                    for ch in 0..out.channels {
                        out.data[ch][..ctx.len].fill(0.0);
                    }
                } else if out.channels > *channels {
                    states[1] = states[0];
                    *channels = out.channels;
                } else if out.channels < *channels {
                    let (l, r) = out.data.split_at_mut(1);
                    r[0][..ctx.len].copy_from_slice(&l[0][..ctx.len]);
                    out.channels = *channels;
                }
                let center = param_at_block_start(&node.params[0].1, outputs, ctx);
                let q = param_at_block_start(&node.params[1].1, outputs, ctx);
                let coeffs = bandpass_clamped(center, q, ctx.sample_rate);
                let active = out.channels;
                for (st, data) in states.iter_mut().zip(out.data.iter_mut()).take(active) {
                    for s in data[..ctx.len].iter_mut() {
                        *s = st.tick(&coeffs, *s);
                    }
                }
            }
            (NodeKind::BufferSource, NodeState::Buffer { position }) => {
                let Some(playback) = node.playback.as_ref() else {
                    out.set_silent();
                    return;
                };
                let Some((from, to)) = active_range(node, ctx) else {
                    out.set_silent();
                    return;
                };
                let buffer = &playback.buffer;
                let src_frames = buffer.frames();
                let pos = position.get_or_insert(playback.offset * buffer.sample_rate() as f64);
                if *pos >= src_frames as f64 {
                    out.set_silent();
                    return;
                }
                let rate = scratch.fill(0, &node.params[0].1, outputs, ctx);
                let step_scale = buffer.sample_rate() as f64 / ctx.sample_rate;
                out.silent = false;
                out.channels = buffer.channel_count();
                for ch in 0..out.channels {
                    out.data[ch][..ctx.len].fill(0.0);
                }
                for (k, r) in rate.iter().enumerate().take(to).skip(from) {
                    let p = *pos;
                    if p >= src_frames as f64 || p < 0.0 {
                        break;
                    }
                    let i = p.floor() as usize;
                    let frac = p - i as f64;
                    for ch in 0..out.channels {
                        let samples = buffer.channel(ch);
                        let a = samples[i] as f64;
                        out.data[ch][k] = if frac == 0.0 {
                            a
                        } else {
                            let b = samples.get(i + 1).copied().unwrap_or(0.0) as f64;
                            a + (b - a) * frac
                        };
                    }
                    *pos += r * step_scale;
                }
            }
            (NodeKind::ImpulseTrain | NodeKind::Custom(_), NodeState::Processor(proc)) => {
                let Some((from, to)) = active_range(node, ctx) else {
                    out.set_silent();
                    return;
                };
                for (slot, (_, param)) in node.params.iter().enumerate() {
                    scratch.fill(slot, param, outputs, ctx);
                }
                let input = scratch.mono_input(&node.inputs, outputs, ctx.len);
                prepare_mono(out, ctx.len);
                let params: Vec<&[f64]> = scratch.values[..node.params.len()]
                    .iter()
                    .map(|v| &v[from..to])
                    .collect();
                proc.process(&params, &input[from..to], &mut out.data[0][from..to], ctx.sample_rate);
            }
            _ => out.set_silent(),
        }
    }
}

/// Frames of the current block (relative to its start) in which a source node
/// is playing.
fn active_range(node: &Node, ctx: &Ctx) -> Option<(usize, usize)> {
    let start = time_to_frame(node.timing.start, ctx.sample_rate);
    let stop = node.timing.stop.map_or(u64::MAX, |t| time_to_frame(t, ctx.sample_rate));
    let block_end = ctx.block_start + ctx.len as u64;
    let from = start.max(ctx.block_start);
    let to = stop.min(block_end);
    if from >= to {
        return None;
    }
    Some(((from - ctx.block_start) as usize, (to - ctx.block_start) as usize))
}

fn prepare_mono(out: &mut BlockOut, len: usize) {
    out.silent = false;
    out.channels = 1;
    out.data[0][..len].fill(0.0);
}

fn sum_inputs(inputs: &[super::NodeId], outputs: &[BlockOut], len: usize, out: &mut BlockOut) {
    let live: Vec<&BlockOut> = inputs
        .iter()
        .map(|id| &outputs[id.index()])
        .filter(|o| !o.silent)
        .collect();
    if live.is_empty() {
        out.set_silent();
        return;
    }
    out.silent = false;
    out.channels = live.iter().map(|o| o.channels).max().unwrap_or(1);
    for ch in 0..out.channels {
        let dst = &mut out.data[ch][..len];
        dst.fill(0.0);
        for src in &live {
            let s = &src.data[ch.min(src.channels - 1)][..len];
            for (d, v) in dst.iter_mut().zip(s) {
                *d += *v;
            }
        }
    }
}

fn param_at_block_start(param: &AutomatableParam, outputs: &[BlockOut], ctx: &Ctx) -> f64 {
    let t = ctx.block_start as f64 / ctx.sample_rate;
    let mut v = param.value_at(t);
    for id in param.audio_inputs() {
        let o = &outputs[id.index()];
        if !o.silent {
            v += o.mono_sample(0);
        }
    }
    v
}

struct ParamScratch {
    values: Vec<Vec<f64>>,
    input: Vec<f64>,
}

impl ParamScratch {
    fn new(block: usize) -> Self {
        Self {
            values: Vec::new(),
            input: vec![0.0; block],
        }
    }

    /// Per-sample parameter values (automation plus audio inputs) in slot `slot`.
    fn fill(&mut self, slot: usize, param: &AutomatableParam, outputs: &[BlockOut], ctx: &Ctx) -> &[f64] {
        while self.values.len() <= slot {
            self.values.push(vec![0.0; self.input.len()]);
        }
        let dst = &mut self.values[slot][..ctx.len];
        param.fill_block(ctx.block_start, ctx.sample_rate, dst);
        for id in param.audio_inputs() {
            let o = &outputs[id.index()];
            if o.silent {
                continue;
            }
            for (k, d) in dst.iter_mut().enumerate() {
                *d += o.mono_sample(k);
            }
        }
        &self.values[slot][..ctx.len]
    }

    fn mono_input(&mut self, inputs: &[super::NodeId], outputs: &[BlockOut], len: usize) -> Vec<f64> {
        let dst = &mut self.input[..len];
        dst.fill(0.0);
        for id in inputs {
            let o = &outputs[id.index()];
            if o.silent {
                continue;
            }
            for (k, d) in dst.iter_mut().enumerate() {
                *d += o.mono_sample(k);
            }
        }
        dst.to_vec()
    }
}

fn flush_non_finite(out: &mut BlockOut, len: usize, reported: &mut bool, node: usize) {
    let mut found = false;
    for ch in 0..out.channels {
        for s in out.data[ch][..len].iter_mut() {
            if !s.is_finite() {
                *s = 0.0;
                found = true;
            }
        }
    }
    if found && !*reported {
        *reported = true;
        warn!("node {node} produced non-finite samples; flushed to zero");
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::graph::AutomationEvent;

    fn rms(x: &[f32]) -> f64 {
        (x.iter().map(|v| (*v as f64).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn silent_graph_renders_zeros() {
        let g = AudioGraph::default();
        let out = g.render_offline(0.01).unwrap();
        assert_eq!(out.frames(), 441);
        assert_eq!(out.channel_count(), 2);
        assert!(out.channels().iter().flatten().all(|s| *s == 0.0));
        let out = g.render_offline(1.0 / 3.0).unwrap();
        assert_eq!(out.frames(), 14700);
    }

    #[test]
    fn sine_through_gain_rms() {
        let mut g = AudioGraph::default();
        let osc = g
            .create_node(NodeKind::SineOscillator, &[("frequency", 440.0)])
            .unwrap();
        let gain = g.create_node(NodeKind::Gain, &[("gain", 0.5)]).unwrap();
        g.connect(osc, gain).unwrap();
        g.connect(gain, g.destination()).unwrap();
        let out = g.render_offline(1.0).unwrap();
        let expected = 0.5 / 2f64.sqrt();
        assert!((rms(out.channel(0)) - expected).abs() < 1e-3);
        assert_eq!(out.channel(0), out.channel(1));
    }

    #[test]
    fn fan_in_sums() {
        let buf = Arc::new(AudioBuffer::mono(100, vec![1.0; 100]));
        let mut g = AudioGraph::with_block_size(100, 16);
        let src = g.create_buffer_source(buf, 0.0, 1.0).unwrap();
        let g1 = g.create_node(NodeKind::Gain, &[("gain", 0.25)]).unwrap();
        let g2 = g.create_node(NodeKind::Gain, &[("gain", 0.5)]).unwrap();
        let sum = g.create_node(NodeKind::Sum, &[]).unwrap();
        g.connect(src, g1).unwrap();
        g.connect(src, g2).unwrap();
        g.connect(g1, sum).unwrap();
        g.connect(g2, sum).unwrap();
        g.connect(sum, g.destination()).unwrap();
        let out = g.render_offline(0.5).unwrap();
        assert!(out.channel(0).iter().all(|s| *s == 0.75));
    }

    #[test]
    fn audio_rate_param_input_adds_to_automation() {
        // a constant 1.0 buffer modulating a gain's value: out = src * (base + 1)
        let ones = Arc::new(AudioBuffer::mono(1000, vec![1.0; 1000]));
        let mut g = AudioGraph::with_block_size(1000, 32);
        let carrier = g.create_buffer_source(ones.clone(), 0.0, 1.0).unwrap();
        let modulator = g.create_buffer_source(ones, 0.0, 1.0).unwrap();
        let amount = g.create_node(NodeKind::Gain, &[("gain", 0.5)]).unwrap();
        let vca = g.create_node(NodeKind::Gain, &[("gain", 0.25)]).unwrap();
        g.connect(modulator, amount).unwrap();
        g.connect_to_param(amount, vca, "gain").unwrap();
        g.connect(carrier, vca).unwrap();
        g.connect(vca, g.destination()).unwrap();
        let out = g.render_offline(0.1).unwrap();
        assert!(out.channel(0).iter().all(|s| *s == 0.75));
    }

    #[test]
    fn stereo_buffer_preserved_mono_duplicated() {
        let st = Arc::new(AudioBuffer::new(100, vec![vec![0.5; 50], vec![-0.5; 50]]).unwrap());
        let mut g = AudioGraph::with_block_size(100, 8);
        let src = g.create_buffer_source(st, 0.0, 1.0).unwrap();
        g.connect(src, g.destination()).unwrap();
        let out = g.render_offline(0.2).unwrap();
        assert_eq!(out.channel(0)[3], 0.5);
        assert_eq!(out.channel(1)[3], -0.5);
    }

    #[test]
    fn source_window_respected() {
        let buf = Arc::new(AudioBuffer::mono(100, (0..100).map(|i| i as f32 / 100.0).collect()));
        let mut g = AudioGraph::with_block_size(100, 7);
        let src = g.create_buffer_source(buf.clone(), 0.1, 1.0).unwrap();
        g.start(src, 0.2).unwrap();
        g.stop(src, 0.5).unwrap();
        g.connect(src, g.destination()).unwrap();
        let out = g.render_offline(1.0).unwrap();
        let ch = out.channel(0);
        assert!(ch[..20].iter().all(|s| *s == 0.0));
        assert_eq!(&ch[20..50], &buf.channel(0)[10..40]);
        assert!(ch[50..].iter().all(|s| *s == 0.0));
    }

    #[test]
    fn playback_rate_interpolates() {
        let buf = Arc::new(AudioBuffer::mono(100, (0..100).map(|i| i as f32).collect()));
        let mut g = AudioGraph::with_block_size(100, 16);
        let src = g.create_buffer_source(buf, 0.0, 0.5).unwrap();
        g.connect(src, g.destination()).unwrap();
        let out = g.render_offline(0.1).unwrap();
        assert_eq!(&out.channel(0)[..5], &[0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn impulse_train_node_renders_unit_impulses() {
        let mut g = AudioGraph::default();
        let imp = g.create_node(NodeKind::ImpulseTrain, &[("frequency", 100.0)]).unwrap();
        g.connect(imp, g.destination()).unwrap();
        let out = g.render_offline(1.0).unwrap();
        let count = out.channel(0).iter().filter(|s| **s != 0.0).count();
        assert!((99..=101).contains(&count), "{count}");
        assert!(out.channel(0).iter().all(|s| *s == 0.0 || *s == 1.0));
    }

    #[test]
    fn stopped_sources_fall_silent() {
        let mut g = AudioGraph::default();
        let osc = g.create_node(NodeKind::SineOscillator, &[]).unwrap();
        g.connect(osc, g.destination()).unwrap();
        g.stop(osc, 0.25).unwrap();
        let out = g.render_offline(0.5).unwrap();
        let cut = time_to_frame(0.25, 44100.0) as usize;
        assert!(out.channel(0)[cut..].iter().all(|s| *s == 0.0));
        assert!(out.channel(0)[..cut].iter().any(|s| *s != 0.0));
    }

    #[test]
    fn automation_applies_sample_accurately() {
        let ones = Arc::new(AudioBuffer::mono(1000, vec![1.0; 1000]));
        let mut g = AudioGraph::with_block_size(1000, 64);
        let src = g.create_buffer_source(ones, 0.0, 1.0).unwrap();
        let vca = g.create_node(NodeKind::Gain, &[("gain", 0.0)]).unwrap();
        g.schedule(vca, "gain", AutomationEvent::set_value(0.1, 0.5)).unwrap();
        g.schedule(vca, "gain", AutomationEvent::linear_ramp(0.2, 1.0)).unwrap();
        g.connect(src, vca).unwrap();
        g.connect(vca, g.destination()).unwrap();
        let out = g.render_offline(0.3).unwrap();
        let ch = out.channel(0);
        assert_eq!(ch[99], 0.0);
        assert_eq!(ch[100], 0.5);
        assert!((ch[150] - 0.75).abs() < 1e-6);
        assert_eq!(ch[250], 1.0);
    }

    #[test]
    fn non_finite_output_is_flushed() {
        let mut g = AudioGraph::default();
        let osc = g.create_node(NodeKind::SineOscillator, &[]).unwrap();
        let gain = g.create_node(NodeKind::Gain, &[("gain", f64::INFINITY)]).unwrap();
        g.connect(osc, gain).unwrap();
        g.connect(gain, g.destination()).unwrap();
        let out = g.render_offline(0.01).unwrap();
        assert!(out.channel(0).iter().all(|s| s.is_finite()));
    }

    #[test]
    fn render_is_repeatable() {
        let mut g = AudioGraph::default();
        let osc = g
            .create_node(NodeKind::SineOscillator, &[("frequency", 220.0)])
            .unwrap();
        let bp = g
            .create_node(NodeKind::BiquadBandpass, &[("center_frequency", 300.0)])
            .unwrap();
        g.schedule(osc, "frequency", AutomationEvent::linear_ramp(0.5, 880.0))
            .unwrap();
        g.connect(osc, bp).unwrap();
        g.connect(bp, g.destination()).unwrap();
        assert_eq!(g.render_offline(0.5).unwrap(), g.render_offline(0.5).unwrap());
    }
}
