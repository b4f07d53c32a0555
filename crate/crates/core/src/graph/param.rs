//! Automatable parameters. A base value is overridden by a time-ordered event
//! list; audio-rate inputs are summed on top.

use super::{GraphError, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AutomationKind {
    SetValueAtTime,
    LinearRampToValueAtTime,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutomationEvent {
    pub kind: AutomationKind,
    pub time: f64,
    pub value: f64,
}

impl AutomationEvent {
    pub fn set_value(time: f64, value: f64) -> Self {
        Self {
            kind: AutomationKind::SetValueAtTime,
            time,
            value,
        }
    }

    pub fn linear_ramp(time: f64, value: f64) -> Self {
        Self {
            kind: AutomationKind::LinearRampToValueAtTime,
            time,
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutomatableParam {
    base_value: f64,
    events: Vec<AutomationEvent>,
    pub(crate) audio_inputs: Vec<NodeId>,
}

impl AutomatableParam {
    pub fn new(base_value: f64) -> Self {
        Self {
            base_value,
            events: Vec::new(),
            audio_inputs: Vec::new(),
        }
    }

    pub fn base_value(&self) -> f64 {
        self.base_value
    }

    pub fn set_base_value(&mut self, value: f64) {
        self.base_value = value;
    }

    pub fn events(&self) -> &[AutomationEvent] {
        &self.events
    }

    pub fn audio_inputs(&self) -> &[NodeId] {
        &self.audio_inputs
    }

    pub fn has_automation(&self) -> bool {
        !self.events.is_empty()
    }

    /// Inserts after any existing events at the same time, so same-time events
    /// of different kinds apply in insertion order.
    pub fn schedule(&mut self, event: AutomationEvent) -> Result<(), GraphError> {
        if !event.time.is_finite() || event.time < 0.0 {
            return Err(GraphError::InvalidEvent(format!(
                "event time must be finite and >= 0, got {}",
                event.time
            )));
        }
        if !event.value.is_finite() {
            return Err(GraphError::InvalidEvent(format!(
                "event value must be finite, got {}",
                event.value
            )));
        }
        if self.events.iter().any(|e| e.kind == event.kind && e.time == event.time) {
            return Err(GraphError::DuplicateEvent {
                time: event.time,
                kind: event.kind,
            });
        }
        let at = self.events.partition_point(|e| e.time <= event.time);
        self.events.insert(at, event);
        Ok(())
    }

    /// Automation value (without audio inputs) at time `t` seconds.
    pub fn value_at(&self, t: f64) -> f64 {
        let next = self.events.partition_point(|e| e.time <= t);
        self.segment_value(next, t)
    }

    // `next` is the index of the first event strictly after `t`.
    #[inline]
    fn segment_value(&self, next: usize, t: f64) -> f64 {
        match self.events.get(next) {
            Some(end) if end.kind == AutomationKind::LinearRampToValueAtTime => {
                let (t0, v0) = match next.checked_sub(1) {
                    Some(prev) => (self.events[prev].time, self.events[prev].value),
                    // A leading ramp starts from the base value at time zero.
                    None => (0.0, self.base_value),
                };
                let span = end.time - t0;
                if span <= 0.0 {
                    return end.value;
                }
                v0 + (end.value - v0) * ((t - t0) / span)
            }
            _ => match next.checked_sub(1) {
                Some(prev) => self.events[prev].value,
                None => self.base_value,
            },
        }
    }

    /// Per-sample automation values for frames `start_frame..start_frame + out.len()`.
    pub fn fill_block(&self, start_frame: u64, sample_rate: f64, out: &mut [f64]) {
        if self.events.is_empty() {
            out.fill(self.base_value);
            return;
        }
        let t_first = start_frame as f64 / sample_rate;
        let mut next = self.events.partition_point(|e| e.time <= t_first);
        for (k, slot) in out.iter_mut().enumerate() {
            let t = (start_frame + k as u64) as f64 / sample_rate;
            while next < self.events.len() && self.events[next].time <= t {
                next += 1;
            }
            *slot = self.segment_value(next, t);
        }
    }
}
