use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;

use serde_json::Value;
use thiserror::Error;

use super::KernelError;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ToolError {
    #[error("unavailable: {0}")]
    Unavailable(String),
    #[error("rejected input: {0}")]
    RejectedInput(String),
}

/// A callable tool with JSON arguments and results.
pub trait Tool {
    fn call(&self, args: &Value) -> Result<Value, ToolError>;
}

impl<F> Tool for F
where
    F: Fn(&Value) -> Result<Value, ToolError>,
{
    fn call(&self, args: &Value) -> Result<Value, ToolError> {
        self(args)
    }
}

#[derive(Default)]
pub struct ToolRegistry<'a> {
    tools: BTreeMap<String, Box<dyn Tool + 'a>>,
    fallbacks: BTreeMap<String, String>,
}

impl<'a> ToolRegistry<'a> {
    pub fn new() -> Self {
        Self { tools: BTreeMap::new(), fallbacks: BTreeMap::new() }
    }

    pub fn register(&mut self, name: impl Into<String>, tool: impl Tool + 'a) {
        self.tools.insert(name.into(), Box::new(tool));
    }

    /// Route calls to `fallback` when `primary` reports itself unavailable.
    pub fn register_fallback(&mut self, primary: impl Into<String>, fallback: impl Into<String>) {
        self.fallbacks.insert(primary.into(), fallback.into());
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tools.contains_key(name)
    }

    pub fn call_tool(&self, name: &str, args: &Value) -> Result<Value, KernelError> {
        let Some(tool) = self.tools.get(name) else {
            return Err(KernelError::ToolUnavailable { tool: name.into(), message: "not registered".into() });
        };
        match tool.call(args) {
            Ok(v) => Ok(v),
            Err(ToolError::RejectedInput(message)) => Err(KernelError::ToolRejectedInput { tool: name.into(), message }),
            Err(ToolError::Unavailable(message)) => match self.fallbacks.get(name) {
                Some(fb) if fb != name => self.call_tool(fb, args).map_err(|e| match e {
                    KernelError::ToolUnavailable { message: fb_msg, .. } => {
                        KernelError::ToolUnavailable { tool: name.into(), message: alloc::format!("{message}; fallback `{fb}`: {fb_msg}") }
                    }
                    other => other,
                }),
                _ => Err(KernelError::ToolUnavailable { tool: name.into(), message }),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn echo(args: &Value) -> Result<Value, ToolError> {
        Ok(args.clone())
    }

    fn down(_: &Value) -> Result<Value, ToolError> {
        Err(ToolError::Unavailable("connection refused".into()))
    }

    #[test]
    fn echo_tool() {
        let mut reg = ToolRegistry::new();
        reg.register("echo", echo);
        assert_eq!(reg.call_tool("echo", &json!({"a": 1})).unwrap(), json!({"a": 1}));
    }

    #[test]
    fn unregistered_names_the_tool() {
        let reg = ToolRegistry::new();
        match reg.call_tool("crawl", &json!({})).unwrap_err() {
            KernelError::ToolUnavailable { tool, .. } => assert_eq!(tool, "crawl"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn failing_tool_is_unavailable() {
        let mut reg = ToolRegistry::new();
        reg.register("crawl", down);
        assert_eq!(reg.call_tool("crawl", &json!({})).unwrap_err().code(), "ToolUnavailable");
    }

    #[test]
    fn fallback_takes_over() {
        let mut reg = ToolRegistry::new();
        reg.register("crawl", down);
        reg.register("crawl-lite", echo);
        reg.register_fallback("crawl", "crawl-lite");
        assert_eq!(reg.call_tool("crawl", &json!({"q": 1})).unwrap(), json!({"q": 1}));
    }

    #[test]
    fn rejected_input() {
        let mut reg = ToolRegistry::new();
        reg.register("strict", |_: &Value| Err(ToolError::RejectedInput("depth".into())));
        assert_eq!(reg.call_tool("strict", &json!({})).unwrap_err().code(), "ToolRejectedInput");
    }
}
