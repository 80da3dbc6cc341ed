//! Agent registry: the catalog of agents shared by the planner and executor.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::plan::Config;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Builtin,
    Llm,
    Http,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
}

impl PortSpec {
    pub fn new(name: &str, description: &str) -> Self {
        PortSpec {
            name: name.to_string(),
            description: description.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub inputs: Vec<PortSpec>,
    #[serde(default)]
    pub outputs: Vec<PortSpec>,
    pub kind: AgentKind,
    #[serde(default, rename = "config")]
    pub default_config: Config,
}

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("malformed registry: {0}")]
    MalformedRegistry(String),
    #[error("agent `{0}` is declared more than once")]
    DuplicateAgent(String),
    #[error("cannot read registry {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Read-only after load; lookups are by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Registry {
    agents: BTreeMap<String, AgentSpec>,
    /// Declaration order, kept for rendering the registry into prompts.
    order: Vec<String>,
    source: String,
}

impl Registry {
    pub fn from_specs(
        specs: impl IntoIterator<Item = AgentSpec>,
        source: impl Into<String>,
    ) -> Result<Self, RegistryError> {
        let mut registry = Registry {
            source: source.into(),
            ..Registry::default()
        };
        for spec in specs {
            if spec.name.trim().is_empty() {
                return Err(RegistryError::MalformedRegistry("agent with empty name".into()));
            }
            if registry.agents.contains_key(&spec.name) {
                return Err(RegistryError::DuplicateAgent(spec.name));
            }
            registry.order.push(spec.name.clone());
            registry.agents.insert(spec.name.clone(), spec);
        }
        Ok(registry)
    }

    pub fn parse(text: &str, source: impl Into<String>) -> Result<Self, RegistryError> {
        let specs: Vec<AgentSpec> = serde_json::from_str(text)
            .map_err(|e| RegistryError::MalformedRegistry(e.to_string()))?;
        Self::from_specs(specs, source)
    }

    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        let text = std::fs::read_to_string(path).map_err(|source| RegistryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, path.display().to_string())
    }

    /// The builtin catalog as a registry.
    pub fn builtin() -> Self {
        Self::from_specs(crate::agents::builtin_catalog(), "builtin")
            .expect("builtin catalog has unique names")
    }

    pub fn get(&self, name: &str) -> Option<&AgentSpec> {
        self.agents.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.agents.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(String::as_str)
    }

    pub fn specs(&self) -> impl Iterator<Item = &AgentSpec> {
        self.order.iter().map(|n| &self.agents[n])
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Registry wire format, in declaration order.
    pub fn to_json(&self) -> String {
        let specs: Vec<&AgentSpec> = self.specs().collect();
        serde_json::to_string_pretty(&specs).expect("registry serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_agent_rejected() {
        let text = r#"[{"name":"add","kind":"builtin"},{"name":"add","kind":"builtin"}]"#;
        assert!(matches!(
            Registry::parse(text, "inline"),
            Err(RegistryError::DuplicateAgent(name)) if name == "add"
        ));
    }

    #[test]
    fn empty_list_is_a_valid_registry() {
        let reg = Registry::parse("[]", "inline").unwrap();
        assert!(reg.is_empty());
    }

    #[test]
    fn unknown_kind_is_malformed() {
        let text = r#"[{"name":"add","kind":"quantum"}]"#;
        assert!(matches!(
            Registry::parse(text, "inline"),
            Err(RegistryError::MalformedRegistry(_))
        ));
    }

    #[test]
    fn semantics_do_not_depend_on_order() {
        let a = r#"[{"name":"add","kind":"builtin"},{"name":"divide","kind":"builtin"}]"#;
        let b = r#"[{"name":"divide","kind":"builtin"},{"name":"add","kind":"builtin"}]"#;
        let (ra, rb) = (Registry::parse(a, "a").unwrap(), Registry::parse(b, "b").unwrap());
        assert_eq!(ra.get("add"), rb.get("add"));
        assert_eq!(ra.len(), rb.len());
    }

    #[test]
    fn round_trips_through_wire_format() {
        let reg = Registry::builtin();
        let back = Registry::parse(&reg.to_json(), "builtin").unwrap();
        assert_eq!(back, reg);
    }
}
