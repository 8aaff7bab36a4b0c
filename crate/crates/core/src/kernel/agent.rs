use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::KernelError;
use crate::provider::Schema;

/// A specialist agent: a role label, its system prompt and the tools it may call.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentDef {
    pub id: String,
    pub role: String,
    pub instructions: String,
    #[serde(default)]
    pub tools: Vec<String>,
    #[serde(default)]
    pub output_schema: Option<Schema>,
}

impl AgentDef {
    pub fn new(id: impl Into<String>, role: impl Into<String>, instructions: impl Into<String>) -> Self {
        Self { id: id.into(), role: role.into(), instructions: instructions.into(), tools: Vec::new(), output_schema: None }
    }

    pub fn with_tool(mut self, tool: impl Into<String>) -> Self {
        self.tools.push(tool.into());
        self
    }

    pub fn with_schema(mut self, schema: Schema) -> Self {
        self.output_schema = Some(schema);
        self
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        if self.id.trim().is_empty() {
            return Err(KernelError::InvalidAgentDef("empty id".into()));
        }
        if self.role.trim().is_empty() {
            return Err(KernelError::InvalidAgentDef(alloc::format!("agent `{}` has an empty role", self.id)));
        }
        if self.instructions.trim().is_empty() {
            return Err(KernelError::InvalidAgentDef(alloc::format!("agent `{}` has empty instructions", self.id)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct AgentRegistry {
    agents: BTreeMap<String, AgentDef>,
}

impl AgentRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register or replace a definition. Returns its id.
    pub fn register(&mut self, def: AgentDef) -> Result<String, KernelError> {
        def.validate()?;
        let id = def.id.clone();
        self.agents.insert(id.clone(), def);
        Ok(id)
    }

    pub fn get(&self, id: &str) -> Option<&AgentDef> {
        self.agents.get(id)
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &AgentDef> {
        self.agents.values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut reg = AgentRegistry::new();
        let id = reg.register(AgentDef::new("t1", "triage", "plan the research")).unwrap();
        assert_eq!(id, "t1");
        assert_eq!(reg.get("t1").unwrap().role, "triage");
    }

    #[test]
    fn empty_role_rejected() {
        let mut reg = AgentRegistry::new();
        let err = reg.register(AgentDef::new("t1", " ", "x")).unwrap_err();
        assert!(matches!(err, KernelError::InvalidAgentDef(_)));
        assert!(reg.is_empty());
        assert!(reg.register(AgentDef::new("t1", "r", "")).is_err());
    }

    #[test]
    fn second_registration_wins() {
        let mut reg = AgentRegistry::new();
        reg.register(AgentDef::new("a", "first", "x")).unwrap();
        reg.register(AgentDef::new("a", "second", "y")).unwrap();
        assert_eq!(reg.len(), 1);
        assert_eq!(reg.get("a").unwrap().role, "second");
    }
}
