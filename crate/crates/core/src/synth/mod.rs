//! The synthesizer contract.
//!
//! A [`SynthDefinition`] declares its parameters, exactly one of them
//! temporal, and knows how to build a
//! subgraph on an [`AudioGraph`]. Building yields a [`SynthInstance`] holding
//! update bindings: each binding is keyed by a set of parameter names and runs
//! once per dispatch whenever any of those names changed, receiving the latest
//! values of every name in its key.

mod registry;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{AudioBuffer, AudioGraph, GraphError, NodeId, ProcessorDescriptor};

pub use registry::SynthRegistry;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("an update must change at least one parameter")]
    EmptyChange,
    #[error("parameter `{param}` expects a {expected} value")]
    KindMismatch { param: String, expected: &'static str },
    #[error("temporal parameter `{0}` is driven by the timeline and cannot be set directly")]
    TemporalParameter(String),
    #[error("invalid synth definition `{name}`: {reason}")]
    InvalidDefinition { name: String, reason: String },
    #[error("synth build failed: {0}")]
    BuildFailure(String),
    #[error("unknown vowel token `{0}`")]
    UnknownVowel(String),
    #[error("unknown buffer `{0}`")]
    UnknownBuffer(String),
    #[error("unknown synth `{0}`")]
    UnknownSynth(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterKind {
    TimbralNominal,
    TimbralQuantitative,
    Temporal,
}

impl ParameterKind {
    pub fn is_nominal(self) -> bool {
        self == ParameterKind::TimbralNominal
    }

    pub fn takes_quantity(self) -> bool {
        !self.is_nominal()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDescriptor {
    pub name: String,
    pub kind: ParameterKind,
    /// Accepted tokens for a nominal parameter, when the set is closed.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tokens: Option<Vec<String>>,
}

impl ParameterDescriptor {
    pub fn quantitative(name: &str) -> Self {
        Self {
            name: name.into(),
            kind: ParameterKind::TimbralQuantitative,
            tokens: None,
        }
    }

    pub fn nominal(name: &str, tokens: Option<&[&str]>) -> Self {
        Self {
            name: name.into(),
            kind: ParameterKind::TimbralNominal,
            tokens: tokens.map(|t| t.iter().map(|s| s.to_string()).collect()),
        }
    }

    pub fn temporal(name: &str) -> Self {
        Self {
            name: name.into(),
            kind: ParameterKind::Temporal,
            tokens: None,
        }
    }
}

/// A data value delivered to a parameter: a number for quantitative and
/// temporal parameters, a category token for nominal ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Quantity(f64),
    Token(String),
}

impl ParamValue {
    pub fn as_quantity(&self) -> Option<f64> {
        match self {
            ParamValue::Quantity(v) => Some(*v),
            ParamValue::Token(_) => None,
        }
    }

    pub fn as_token(&self) -> Option<&str> {
        match self {
            ParamValue::Token(t) => Some(t),
            ParamValue::Quantity(_) => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Quantity(v) => write!(f, "{v}"),
            ParamValue::Token(t) => write!(f, "{t:?}"),
        }
    }
}

/// Parameter name to value.
pub type ParamValues = BTreeMap<String, ParamValue>;

/// Loaded audio buffers by name, in load order.
pub type BufferBank = IndexMap<String, Arc<AudioBuffer>>;

/// Resources available while building a synth.
#[derive(Debug, Default, Clone)]
pub struct BuildContext {
    pub buffers: BufferBank,
}

/// What an effect receives: the values of every name in its binding key, the
/// time of the triggering event, and the time until the next event.
#[derive(Debug)]
pub struct BindingArgs<'a> {
    values: &'a ParamValues,
    pub event_time: f64,
    pub dt_to_next: f64,
}

impl BindingArgs<'_> {
    pub fn value(&self, name: &str) -> Result<&ParamValue, SynthError> {
        self.values
            .get(name)
            .ok_or_else(|| SynthError::UnknownParameter(name.to_string()))
    }

    pub fn quantity(&self, name: &str) -> Result<f64, SynthError> {
        self.value(name)?.as_quantity().ok_or_else(|| SynthError::KindMismatch {
            param: name.to_string(),
            expected: "quantitative",
        })
    }

    pub fn token(&self, name: &str) -> Result<&str, SynthError> {
        self.value(name)?.as_token().ok_or_else(|| SynthError::KindMismatch {
            param: name.to_string(),
            expected: "nominal",
        })
    }
}

pub type EffectFn = Box<dyn FnMut(&mut AudioGraph, &BindingArgs<'_>) -> Result<(), SynthError> + Send>;
pub type HookFn = Box<dyn FnMut(&mut AudioGraph, f64) -> Result<(), SynthError> + Send>;

pub struct UpdateBinding {
    key: Vec<String>,
    effect: EffectFn,
}

impl UpdateBinding {
    pub fn new<F>(key: &[&str], effect: F) -> Self
    where
        F: FnMut(&mut AudioGraph, &BindingArgs<'_>) -> Result<(), SynthError> + Send + 'static,
    {
        Self {
            key: key.iter().map(|s| s.to_string()).collect(),
            effect: Box::new(effect),
        }
    }

    pub fn key(&self) -> &[String] {
        &self.key
    }
}

impl fmt::Debug for UpdateBinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UpdateBinding")
            .field("key", &self.key)
            .finish_non_exhaustive()
    }
}

/// What a build procedure hands back.
#[derive(Default)]
pub struct SynthParts {
    pub bindings: Vec<UpdateBinding>,
    pub start: Option<HookFn>,
    pub stop: Option<HookFn>,
}

pub type BuildFn = Arc<dyn Fn(&mut AudioGraph, NodeId, &BuildContext) -> Result<SynthParts, SynthError> + Send + Sync>;
pub type DefaultsFn = Arc<dyn Fn(&BuildContext) -> ParamValues + Send + Sync>;

#[derive(Clone)]
pub struct SynthDefinition {
    pub name: String,
    pub parameters: Vec<ParameterDescriptor>,
    pub processors: Vec<ProcessorDescriptor>,
    defaults: DefaultsFn,
    build: BuildFn,
}

impl fmt::Debug for SynthDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SynthDefinition")
            .field("name", &self.name)
            .field("parameters", &self.parameters)
            .field("processors", &self.processors)
            .finish_non_exhaustive()
    }
}

impl SynthDefinition {
    pub fn new(
        name: &str,
        parameters: Vec<ParameterDescriptor>,
        processors: Vec<ProcessorDescriptor>,
        defaults: DefaultsFn,
        build: BuildFn,
    ) -> Self {
        Self {
            name: name.to_string(),
            parameters,
            processors,
            defaults,
            build,
        }
    }

    pub fn parameter(&self, name: &str) -> Option<&ParameterDescriptor> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn temporal_parameter(&self) -> Option<&ParameterDescriptor> {
        self.parameters.iter().find(|p| p.kind == ParameterKind::Temporal)
    }

    /// Values used for parameters no data has reached yet.
    pub fn default_values(&self, ctx: &BuildContext) -> ParamValues {
        (self.defaults)(ctx)
    }

    /// Structural checks run at registration: unique names, exactly one
    /// temporal parameter, and a well-typed default for every parameter.
    pub fn check(&self) -> Result<(), SynthError> {
        let invalid = |reason: String| SynthError::InvalidDefinition {
            name: self.name.clone(),
            reason,
        };
        for (i, p) in self.parameters.iter().enumerate() {
            if self.parameters[..i].iter().any(|q| q.name == p.name) {
                return Err(invalid(format!("duplicate parameter `{}`", p.name)));
            }
        }
        let temporal = self
            .parameters
            .iter()
            .filter(|p| p.kind == ParameterKind::Temporal)
            .count();
        if temporal != 1 {
            return Err(invalid(format!(
                "expected exactly one temporal parameter, found {temporal}"
            )));
        }
        let defaults = self.default_values(&BuildContext::default());
        for p in &self.parameters {
            match defaults.get(&p.name) {
                None => return Err(invalid(format!("no default for `{}`", p.name))),
                Some(v) => {
                    if p.kind.takes_quantity() != v.as_quantity().is_some() {
                        return Err(invalid(format!("default for `{}` has the wrong kind", p.name)));
                    }
                }
            }
        }
        Ok(())
    }

    /// Registers the definition's processors on `graph`, runs its build
    /// procedure against `destination`, and checks the returned bindings.
    pub fn instantiate(
        &self,
        graph: &mut AudioGraph,
        destination: NodeId,
        ctx: &BuildContext,
    ) -> Result<SynthInstance, SynthError> {
        graph
            .node(destination)
            .map_err(|e| SynthError::BuildFailure(e.to_string()))?;
        for processor in &self.processors {
            graph.register_processor(processor.clone());
        }
        let parts = (self.build)(graph, destination, ctx).map_err(|e| match e {
            SynthError::BuildFailure(_) => e,
            other => SynthError::BuildFailure(other.to_string()),
        })?;
        for binding in &parts.bindings {
            if binding.key.is_empty() {
                return Err(SynthError::BuildFailure("binding with an empty key".into()));
            }
            if let Some(unknown) = binding.key.iter().find(|k| self.parameter(k).is_none()) {
                return Err(SynthError::BuildFailure(format!(
                    "binding keyed on undeclared parameter `{unknown}`"
                )));
            }
        }
        let invocations = vec![0; parts.bindings.len()];
        Ok(SynthInstance {
            definition: self.name.clone(),
            parameters: self.parameters.clone(),
            current_values: self.default_values(ctx),
            bindings: parts.bindings,
            start: parts.start,
            stop: parts.stop,
            invocations,
        })
    }
}

/// A built synth bound to one graph.
pub struct SynthInstance {
    definition: String,
    parameters: Vec<ParameterDescriptor>,
    bindings: Vec<UpdateBinding>,
    start: Option<HookFn>,
    stop: Option<HookFn>,
    current_values: ParamValues,
    invocations: Vec<u64>,
}

impl fmt::Debug for SynthInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SynthInstance")
            .field("definition", &self.definition)
            .field("bindings", &self.bindings)
            .field("current_values", &self.current_values)
            .field("invocations", &self.invocations)
            .finish_non_exhaustive()
    }
}

impl SynthInstance {
    pub fn definition_name(&self) -> &str {
        &self.definition
    }

    pub fn parameters(&self) -> &[ParameterDescriptor] {
        &self.parameters
    }

    pub fn bindings(&self) -> &[UpdateBinding] {
        &self.bindings
    }

    pub fn current_values(&self) -> &ParamValues {
        &self.current_values
    }

    /// How many times each binding has fired, in binding order.
    pub fn invocation_counts(&self) -> &[u64] {
        &self.invocations
    }

    pub fn start_all(&mut self, graph: &mut AudioGraph, time: f64) -> Result<(), SynthError> {
        match self.start.as_mut() {
            Some(hook) => hook(graph, time.max(0.0)),
            None => Ok(()),
        }
    }

    pub fn stop_all(&mut self, graph: &mut AudioGraph, time: f64) -> Result<(), SynthError> {
        match self.stop.as_mut() {
            Some(hook) => hook(graph, time.max(0.0)),
            None => Ok(()),
        }
    }

    /// Applies one timestamped set of changes. Every binding whose key
    /// intersects the changed names fires exactly once, in definition order.
    /// Returns the number of bindings fired.
    pub fn dispatch(
        &mut self,
        graph: &mut AudioGraph,
        changes: &ParamValues,
        event_time: f64,
        dt_to_next: f64,
    ) -> Result<usize, SynthError> {
        if changes.is_empty() {
            return Err(SynthError::EmptyChange);
        }
        for (name, value) in changes {
            let desc = self
                .parameters
                .iter()
                .find(|p| &p.name == name)
                .ok_or_else(|| SynthError::UnknownParameter(name.clone()))?;
            match (desc.kind, value) {
                (ParameterKind::Temporal, _) => return Err(SynthError::TemporalParameter(name.clone())),
                (ParameterKind::TimbralNominal, ParamValue::Quantity(_)) => {
                    return Err(SynthError::KindMismatch {
                        param: name.clone(),
                        expected: "nominal",
                    })
                }
                (ParameterKind::TimbralQuantitative, ParamValue::Token(_)) => {
                    return Err(SynthError::KindMismatch {
                        param: name.clone(),
                        expected: "quantitative",
                    })
                }
                _ => {}
            }
        }
        for (name, value) in changes {
            self.current_values.insert(name.clone(), value.clone());
        }
        if let Some(temporal) = self.parameters.iter().find(|p| p.kind == ParameterKind::Temporal) {
            self.current_values
                .insert(temporal.name.clone(), ParamValue::Quantity(event_time));
        }

        let mut fired = 0;
        for (binding, count) in self.bindings.iter_mut().zip(self.invocations.iter_mut()) {
            if !binding.key.iter().any(|k| changes.contains_key(k)) {
                continue;
            }
            let values: ParamValues = binding
                .key
                .iter()
                .filter_map(|k| self.current_values.get(k).map(|v| (k.clone(), v.clone())))
                .collect();
            let args = BindingArgs {
                values: &values,
                event_time,
                dt_to_next,
            };
            (binding.effect)(graph, &args)?;
            *count += 1;
            fired += 1;
        }
        Ok(fired)
    }
}
