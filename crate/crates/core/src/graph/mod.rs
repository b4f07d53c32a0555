//! Block-based offline DSP graph.
//!
//! A graph owns a set of nodes, the edges between them (audio into audio, or
//! audio into a parameter) and a single stereo destination. Rendering walks the
//! nodes in topological order one block of `block_size` frames at a time.
//! Parameters are evaluated per sample, except biquad coefficients which are
//! computed once per block from the value at the block's first frame.

mod buffer;
mod dsp;
mod param;
mod render;

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

pub use buffer::AudioBuffer;
pub use dsp::{
    biquad_bandpass_coefficients, impulse_train_processor, BiquadCoefficients, ImpulseTrain, Processor,
    ProcessorDescriptor, ProcessorFactory, IMPULSE_DEFAULT_FREQUENCY, IMPULSE_PROCESSOR,
};
pub use param::{AutomatableParam, AutomationEvent, AutomationKind};
pub use render::frames_for_duration;

pub const DEFAULT_SAMPLE_RATE: u32 = 44100;
pub const DEFAULT_BLOCK_SIZE: usize = 128;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("unknown parameter `{param}` for {kind} node")]
    UnknownParam { kind: String, param: String },
    #[error("unknown node {0:?}")]
    UnknownNode(NodeId),
    #[error("connecting {from:?} -> {to:?} would create a cycle")]
    CycleDetected { from: NodeId, to: NodeId },
    #[error("a {kind:?} event already exists at t={time}")]
    DuplicateEvent { time: f64, kind: AutomationKind },
    #[error("invalid automation event: {0}")]
    InvalidEvent(String),
    #[error("invalid connection: {0}")]
    InvalidConnection(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("invalid buffer: {0}")]
    InvalidBuffer(String),
    #[error("no processor registered under `{0}`")]
    UnknownProcessor(String),
    #[error("invalid source timing: {0}")]
    InvalidTiming(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    SineOscillator,
    Gain,
    BiquadBandpass,
    BufferSource,
    ImpulseTrain,
    Sum,
    Destination,
    /// A processor registered on the graph under this name.
    Custom(String),
}

impl NodeKind {
    /// Declared parameters and their defaults for the built-in kinds.
    fn builtin_params(&self) -> &'static [(&'static str, f64)] {
        match self {
            NodeKind::SineOscillator => &[("frequency", 440.0)],
            NodeKind::Gain => &[("gain", 1.0)],
            NodeKind::BiquadBandpass => &[("center_frequency", 440.0), ("q", 1.0)],
            NodeKind::BufferSource => &[("playback_rate", 1.0)],
            NodeKind::ImpulseTrain => &[("frequency", IMPULSE_DEFAULT_FREQUENCY)],
            NodeKind::Sum | NodeKind::Destination | NodeKind::Custom(_) => &[],
        }
    }

    pub fn is_source(&self) -> bool {
        matches!(
            self,
            NodeKind::SineOscillator | NodeKind::BufferSource | NodeKind::ImpulseTrain | NodeKind::Custom(_)
        )
    }

    fn accepts_audio_input(&self) -> bool {
        !matches!(
            self,
            NodeKind::SineOscillator | NodeKind::BufferSource | NodeKind::ImpulseTrain
        )
    }

    fn label(&self) -> String {
        match self {
            NodeKind::Custom(name) => format!("custom `{name}`"),
            other => format!("{other:?}"),
        }
    }
}

/// When a source node produces output. Sources play from t=0 unless told
/// otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceTiming {
    pub start: f64,
    pub stop: Option<f64>,
}

impl Default for SourceTiming {
    fn default() -> Self {
        Self { start: 0.0, stop: None }
    }
}

#[derive(Debug, Clone)]
pub struct BufferPlayback {
    pub buffer: Arc<AudioBuffer>,
    /// Read offset into the buffer, seconds.
    pub offset: f64,
}

#[derive(Debug, Clone)]
pub struct Node {
    kind: NodeKind,
    params: Vec<(String, AutomatableParam)>,
    inputs: Vec<NodeId>,
    timing: SourceTiming,
    playback: Option<BufferPlayback>,
}

impl Node {
    pub fn kind(&self) -> &NodeKind {
        &self.kind
    }

    pub fn inputs(&self) -> &[NodeId] {
        &self.inputs
    }

    pub fn timing(&self) -> SourceTiming {
        self.timing
    }

    pub fn playback(&self) -> Option<&BufferPlayback> {
        self.playback.as_ref()
    }

    pub fn param(&self, name: &str) -> Option<&AutomatableParam> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, p)| p)
    }

    fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|(n, _)| n == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Connection {
    pub from: NodeId,
    pub to: NodeId,
    /// `None` for an audio input, `Some(name)` for a parameter input.
    pub param: Option<String>,
}

#[derive(Debug, Clone)]
pub struct AudioGraph {
    sample_rate: u32,
    block_size: usize,
    nodes: Vec<Node>,
    connections: Vec<Connection>,
    destination: NodeId,
    processors: BTreeMap<String, ProcessorDescriptor>,
}

impl Default for AudioGraph {
    fn default() -> Self {
        Self::new(DEFAULT_SAMPLE_RATE)
    }
}

impl AudioGraph {
    pub fn new(sample_rate: u32) -> Self {
        Self::with_block_size(sample_rate, DEFAULT_BLOCK_SIZE)
    }

    pub fn with_block_size(sample_rate: u32, block_size: usize) -> Self {
        let destination = Node {
            kind: NodeKind::Destination,
            params: Vec::new(),
            inputs: Vec::new(),
            timing: SourceTiming::default(),
            playback: None,
        };
        Self {
            sample_rate: sample_rate.max(1),
            block_size: block_size.max(1),
            nodes: vec![destination],
            connections: Vec::new(),
            destination: NodeId(0),
            processors: BTreeMap::new(),
        }
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn destination(&self) -> NodeId {
        self.destination
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: NodeId) -> Result<&Node, GraphError> {
        self.nodes.get(id.0).ok_or(GraphError::UnknownNode(id))
    }

    fn node_mut(&mut self, id: NodeId) -> Result<&mut Node, GraphError> {
        self.nodes.get_mut(id.0).ok_or(GraphError::UnknownNode(id))
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn connections(&self) -> &[Connection] {
        &self.connections
    }

    /// Makes a custom processor available as `NodeKind::Custom(name)`.
    /// Registering the same name again replaces the previous entry.
    pub fn register_processor(&mut self, descriptor: ProcessorDescriptor) {
        self.processors.insert(descriptor.name.clone(), descriptor);
    }

    pub fn has_processor(&self, name: &str) -> bool {
        self.processors.contains_key(name)
    }

    pub(crate) fn processor(&self, name: &str) -> Option<&ProcessorDescriptor> {
        self.processors.get(name)
    }

    /// Creates a node. Unlisted parameters take the kind's defaults.
    pub fn create_node(&mut self, kind: NodeKind, initial_params: &[(&str, f64)]) -> Result<NodeId, GraphError> {
        let declared: Vec<(String, f64)> = match &kind {
            NodeKind::Destination => {
                return Err(GraphError::InvalidGraph("a graph has exactly one destination".into()))
            }
            NodeKind::Custom(name) => self
                .processors
                .get(name)
                .ok_or_else(|| GraphError::UnknownProcessor(name.clone()))?
                .params
                .clone(),
            builtin => builtin
                .builtin_params()
                .iter()
                .map(|(n, v)| (n.to_string(), *v))
                .collect(),
        };
        let mut params: Vec<(String, AutomatableParam)> = declared
            .into_iter()
            .map(|(n, v)| (n, AutomatableParam::new(v)))
            .collect();
        for (name, value) in initial_params {
            let slot = params
                .iter_mut()
                .find(|(n, _)| n == name)
                .ok_or_else(|| GraphError::UnknownParam {
                    kind: kind.label(),
                    param: name.to_string(),
                })?;
            slot.1.set_base_value(*value);
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            kind,
            params,
            inputs: Vec::new(),
            timing: SourceTiming::default(),
            playback: None,
        });
        Ok(id)
    }

    /// Creates a buffer source reading `buffer` from `offset` seconds.
    pub fn create_buffer_source(
        &mut self,
        buffer: Arc<AudioBuffer>,
        offset: f64,
        playback_rate: f64,
    ) -> Result<NodeId, GraphError> {
        let id = self.create_node(NodeKind::BufferSource, &[("playback_rate", playback_rate)])?;
        self.set_buffer(id, buffer, offset)?;
        Ok(id)
    }

    pub fn set_buffer(&mut self, node: NodeId, buffer: Arc<AudioBuffer>, offset: f64) -> Result<(), GraphError> {
        if !(offset.is_finite() && offset >= 0.0) {
            return Err(GraphError::OutOfRange(format!(
                "buffer offset must be >= 0, got {offset}"
            )));
        }
        let n = self.node_mut(node)?;
        if n.kind != NodeKind::BufferSource {
            return Err(GraphError::InvalidGraph(format!(
                "{} node has no buffer",
                n.kind.label()
            )));
        }
        n.playback = Some(BufferPlayback { buffer, offset });
        Ok(())
    }

    pub fn start(&mut self, node: NodeId, time: f64) -> Result<(), GraphError> {
        check_time(time)?;
        let n = self.source_mut(node)?;
        if let Some(stop) = n.timing.stop {
            if time > stop {
                return Err(GraphError::InvalidTiming(format!(
                    "start {time} s is after stop {stop} s"
                )));
            }
        }
        n.timing.start = time;
        Ok(())
    }

    pub fn stop(&mut self, node: NodeId, time: f64) -> Result<(), GraphError> {
        check_time(time)?;
        let n = self.source_mut(node)?;
        if time < n.timing.start {
            return Err(GraphError::InvalidTiming(format!(
                "stop {time} s is before start {} s",
                n.timing.start
            )));
        }
        n.timing.stop = Some(time);
        Ok(())
    }

    /// Stops a source at `time` unless it is already scheduled to stop
    /// earlier. A source that has not started by `time` never plays.
    pub fn stop_by(&mut self, node: NodeId, time: f64) -> Result<(), GraphError> {
        check_time(time)?;
        let n = self.source_mut(node)?;
        let stop = n.timing.stop.map_or(time, |s| s.min(time));
        if n.timing.start > stop {
            n.timing.start = stop;
        }
        n.timing.stop = Some(stop);
        Ok(())
    }

    fn source_mut(&mut self, node: NodeId) -> Result<&mut Node, GraphError> {
        let n = self.node_mut(node)?;
        if !n.kind.is_source() {
            return Err(GraphError::InvalidGraph(format!(
                "{} node cannot be started or stopped",
                n.kind.label()
            )));
        }
        Ok(n)
    }

    /// Routes `src`'s output into `dst`'s input. Multiple inputs sum.
    pub fn connect(&mut self, src: NodeId, dst: NodeId) -> Result<(), GraphError> {
        self.check_edge(src, dst)?;
        if !self.node(dst)?.kind.accepts_audio_input() {
            return Err(GraphError::InvalidConnection(format!(
                "{} node takes no audio input",
                self.node(dst)?.kind.label()
            )));
        }
        let conn = Connection {
            from: src,
            to: dst,
            param: None,
        };
        if !self.connections.contains(&conn) {
            self.connections.push(conn);
            self.nodes[dst.0].inputs.push(src);
        }
        Ok(())
    }

    /// Routes `src`'s output into a parameter of `dst`; the signal is added to
    /// the parameter's automation value sample by sample.
    pub fn connect_to_param(&mut self, src: NodeId, dst: NodeId, param: &str) -> Result<(), GraphError> {
        let dst_node = self.node(dst)?;
        let index = dst_node.param_index(param).ok_or_else(|| GraphError::UnknownParam {
            kind: dst_node.kind.label(),
            param: param.to_string(),
        })?;
        self.check_edge(src, dst)?;
        let conn = Connection {
            from: src,
            to: dst,
            param: Some(param.to_string()),
        };
        if !self.connections.contains(&conn) {
            self.connections.push(conn);
            self.nodes[dst.0].params[index].1.audio_inputs.push(src);
        }
        Ok(())
    }

    fn check_edge(&self, src: NodeId, dst: NodeId) -> Result<(), GraphError> {
        self.node(src)?;
        self.node(dst)?;
        if src == self.destination {
            return Err(GraphError::InvalidConnection("the destination has no output".into()));
        }
        if src == dst || self.reaches(dst, src) {
            return Err(GraphError::CycleDetected { from: src, to: dst });
        }
        Ok(())
    }

    fn reaches(&self, from: NodeId, target: NodeId) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![from];
        while let Some(n) = stack.pop() {
            if n == target {
                return true;
            }
            if std::mem::replace(&mut seen[n.0], true) {
                continue;
            }
            stack.extend(self.connections.iter().filter(|c| c.from == n).map(|c| c.to));
        }
        false
    }

    pub fn param(&self, node: NodeId, name: &str) -> Result<&AutomatableParam, GraphError> {
        let n = self.node(node)?;
        n.param(name).ok_or_else(|| GraphError::UnknownParam {
            kind: n.kind.label(),
            param: name.to_string(),
        })
    }

    fn param_mut(&mut self, node: NodeId, name: &str) -> Result<&mut AutomatableParam, GraphError> {
        let n = self.node_mut(node)?;
        let label = n.kind.label();
        n.params
            .iter_mut()
            .find(|(p, _)| p == name)
            .map(|(_, p)| p)
            .ok_or_else(|| GraphError::UnknownParam {
                kind: label,
                param: name.to_string(),
            })
    }

    pub fn schedule(&mut self, node: NodeId, param: &str, event: AutomationEvent) -> Result<(), GraphError> {
        self.param_mut(node, param)?.schedule(event)
    }

    pub fn set_base_value(&mut self, node: NodeId, param: &str, value: f64) -> Result<(), GraphError> {
        self.param_mut(node, param)?.set_base_value(value);
        Ok(())
    }

    /// Node ids in an order where every node follows all of its sources.
    pub fn topological_order(&self) -> Result<Vec<NodeId>, GraphError> {
        let n = self.nodes.len();
        let mut indegree = vec![0usize; n];
        let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); n];
        for c in &self.connections {
            indegree[c.to.0] += 1;
            outgoing[c.from.0].push(c.to.0);
        }
        let mut ready: std::collections::VecDeque<usize> = (0..n).filter(|i| indegree[*i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_front() {
            order.push(NodeId(i));
            for &j in &outgoing[i] {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.push_back(j);
                }
            }
        }
        if order.len() != n {
            return Err(GraphError::InvalidGraph("graph contains a cycle".into()));
        }
        Ok(order)
    }
}

fn check_time(time: f64) -> Result<(), GraphError> {
    if time.is_finite() && time >= 0.0 {
        Ok(())
    } else {
        Err(GraphError::InvalidTiming(format!(
            "time must be finite and >= 0, got {time}"
        )))
    }
}

/// First frame at or after `time`. Times within 1e-6 frames of an integer
/// frame snap to it so that decimal times like 0.3 s land where expected.
pub fn time_to_frame(time: f64, sample_rate: f64) -> u64 {
    let x = (time * sample_rate).max(0.0);
    let nearest = x.round();
    if (x - nearest).abs() < 1e-6 {
        nearest as u64
    } else {
        x.ceil() as u64
    }
}
