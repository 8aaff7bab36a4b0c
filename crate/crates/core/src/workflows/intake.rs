use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::WorkflowError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Persona {
    Clinician,
    Caregiver,
    #[serde(rename = "self")]
    SelfCare,
}

impl Persona {
    pub fn as_str(self) -> &'static str {
        match self {
            Persona::Clinician => "clinician",
            Persona::Caregiver => "caregiver",
            Persona::SelfCare => "self",
        }
    }
}

pub const MAX_AGE: u32 = 130;

/// What the user tells the support workflow about the person being cared for.
/// Fields beyond the named ones are kept as extras and passed to the agents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intake {
    pub persona: Persona,
    pub age: u32,
    #[serde(default)]
    pub symptoms: Vec<String>,
    #[serde(default)]
    pub living_situation: String,
    #[serde(default)]
    pub safety_concerns: Vec<String>,
    #[serde(default)]
    pub primary_goal: String,
    #[serde(default)]
    pub medications: Vec<String>,
    #[serde(flatten)]
    pub extras: BTreeMap<String, Value>,
}

impl Intake {
    pub fn new(persona: Persona, age: u32) -> Self {
        Self {
            persona,
            age,
            symptoms: Vec::new(),
            living_situation: String::new(),
            safety_concerns: Vec::new(),
            primary_goal: String::new(),
            medications: Vec::new(),
            extras: BTreeMap::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, WorkflowError> {
        let intake: Intake = serde_json::from_str(text).map_err(|e| WorkflowError::InvalidInput(format!("intake: {e}")))?;
        intake.validate()?;
        Ok(intake)
    }

    pub fn validate(&self) -> Result<(), WorkflowError> {
        if self.age > MAX_AGE {
            return Err(WorkflowError::InvalidInput(format!("age {} outside 0..={MAX_AGE}", self.age)));
        }
        Ok(())
    }

    /// Flat key/value view used as the pipeline's user inputs. Empty named
    /// fields are left out; list fields are joined with "; ".
    pub fn to_context(&self) -> BTreeMap<String, Value> {
        let mut m = BTreeMap::new();
        m.insert("persona".into(), Value::String(self.persona.as_str().into()));
        m.insert("age".into(), Value::from(self.age));
        let lists = [("symptoms", &self.symptoms), ("safety_concerns", &self.safety_concerns), ("medications", &self.medications)];
        for (k, v) in lists {
            if !v.is_empty() {
                m.insert(k.to_string(), Value::String(v.join("; ")));
            }
        }
        for (k, v) in [("living_situation", &self.living_situation), ("primary_goal", &self.primary_goal)] {
            if !v.trim().is_empty() {
                m.insert(k.to_string(), Value::String(v.clone()));
            }
        }
        for (k, v) in &self.extras {
            m.insert(k.clone(), v.clone());
        }
        m
    }
}
