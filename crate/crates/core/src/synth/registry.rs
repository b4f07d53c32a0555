use indexmap::IndexMap;

use super::{SynthDefinition, SynthError};
use crate::synths;

/// Synth definitions by name, in registration order.
#[derive(Debug, Clone, Default)]
pub struct SynthRegistry {
    definitions: IndexMap<String, SynthDefinition>,
}

impl SynthRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry preloaded with `fm`, `formant` and `granular`.
    pub fn with_builtins() -> Self {
        let mut registry = Self::new();
        for def in [
            synths::fm::definition(),
            synths::formant::definition(),
            synths::granular::definition(),
        ] {
            registry
                .register(def)
                .expect("built-in synth definitions are well formed");
        }
        registry
    }

    /// Adds a definition after checking its parameter declarations.
    pub fn register(&mut self, definition: SynthDefinition) -> Result<(), SynthError> {
        definition.check()?;
        if self.definitions.contains_key(&definition.name) {
            return Err(SynthError::InvalidDefinition {
                name: definition.name.clone(),
                reason: "a synth with this name is already registered".into(),
            });
        }
        self.definitions.insert(definition.name.clone(), definition);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&SynthDefinition, SynthError> {
        self.definitions
            .get(name)
            .ok_or_else(|| SynthError::UnknownSynth(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.definitions.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &SynthDefinition> {
        self.definitions.values()
    }
}
