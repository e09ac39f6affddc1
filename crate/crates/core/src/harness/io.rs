use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde_json::Value;

use super::{CompiledModel, Fixture, HarnessError, Scenario};
use crate::model::{Catalog, TopologySpec};
use crate::policy::PolicyDocument;

/// Any of the JSON documents the tools accept.
#[derive(Debug, Clone, PartialEq)]
pub enum InputDocument {
    Topology(TopologySpec),
    Services(Catalog),
    Policy(PolicyDocument),
    Scenario(Scenario),
    Fixture(Fixture),
}

impl InputDocument {
    pub fn kind(&self) -> &'static str {
        match self {
            InputDocument::Topology(_) => "topology",
            InputDocument::Services(_) => "services",
            InputDocument::Policy(_) => "policy",
            InputDocument::Scenario(_) => "scenario",
            InputDocument::Fixture(_) => "fixture",
        }
    }
}

fn strict<T: DeserializeOwned>(value: Value) -> Result<T, String> {
    serde_json::from_value(value).map_err(|e| e.to_string())
}

/// Parses a document, telling kinds apart by their characteristic top-level
/// key and then parsing strictly as that kind.
pub fn parse_input(text: &str) -> Result<InputDocument, String> {
    let value: Value = serde_json::from_str(text).map_err(|e| format!("not valid JSON: {e}"))?;
    let Some(obj) = value.as_object() else {
        return Err("expected a JSON object".into());
    };
    let has = |k: &str| obj.contains_key(k);
    if has("injections") {
        strict(value).map(InputDocument::Scenario)
    } else if has("topology") {
        strict(value).map(InputDocument::Fixture)
    } else if has("terminals") || has("switches") || has("links") {
        strict(value).map(InputDocument::Topology)
    } else if has("services") || has("consumers") {
        strict(value).map(InputDocument::Services)
    } else if has("allow") || has("deny") || has("malicious") || has("composition") {
        strict(value).map(InputDocument::Policy)
    } else {
        Err("unrecognised document: expected topology, services, policy, scenario or fixture JSON".into())
    }
}

/// The documents given on a command line, at most one of each model kind.
#[derive(Debug, Clone, Default)]
pub struct InputSet {
    pub topology: Option<TopologySpec>,
    pub services: Option<Catalog>,
    pub policy: Option<PolicyDocument>,
    pub fixture: Option<Fixture>,
    pub scenarios: Vec<Scenario>,
    pub paths: Vec<PathBuf>,
}

fn input_error(path: &Path, message: impl Into<String>) -> HarnessError {
    HarnessError::Input { path: path.display().to_string(), message: message.into() }
}

fn put<T>(slot: &mut Option<T>, value: T, path: &Path, kind: &str) -> Result<(), HarnessError> {
    if slot.is_some() {
        return Err(input_error(path, format!("a second {kind} document was given")));
    }
    *slot = Some(value);
    Ok(())
}

pub fn load_inputs<P: AsRef<Path>>(paths: &[P]) -> Result<InputSet, HarnessError> {
    let mut set = InputSet::default();
    for path in paths {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| input_error(path, e.to_string()))?;
        let doc = parse_input(&text).map_err(|e| input_error(path, e))?;
        match doc {
            InputDocument::Topology(t) => put(&mut set.topology, t, path, "topology")?,
            InputDocument::Services(c) => put(&mut set.services, c, path, "services")?,
            InputDocument::Policy(p) => put(&mut set.policy, p, path, "policy")?,
            InputDocument::Fixture(f) => put(&mut set.fixture, f, path, "fixture")?,
            InputDocument::Scenario(s) => set.scenarios.push(s),
        }
        set.paths.push(path.to_owned());
    }
    Ok(set)
}

impl InputSet {
    /// The three model documents, taken from a fixture file if one was given.
    pub fn parts(&self) -> Result<(TopologySpec, Catalog, PolicyDocument), HarnessError> {
        if let Some(f) = &self.fixture {
            if self.topology.is_some() || self.services.is_some() || self.policy.is_some() {
                return Err(HarnessError::Input {
                    path: "<arguments>".into(),
                    message: "give either a fixture or separate model documents, not both".into(),
                });
            }
            return Ok((f.topology.clone(), f.services.clone(), f.policy.clone()));
        }
        let missing = |kind: &str| HarnessError::Input {
            path: "<arguments>".into(),
            message: format!("no {kind} document given"),
        };
        Ok((
            self.topology.clone().ok_or_else(|| missing("topology"))?,
            self.services.clone().ok_or_else(|| missing("services"))?,
            self.policy.clone().ok_or_else(|| missing("policy"))?,
        ))
    }

    /// The model as a fixture named after nothing in particular.
    pub fn as_fixture(&self, name: &str) -> Result<Fixture, HarnessError> {
        if let Some(f) = &self.fixture {
            return Ok(f.clone());
        }
        let (topology, services, policy) = self.parts()?;
        Ok(Fixture { name: name.into(), topology, services, policy })
    }

    pub fn compile(&self) -> Result<CompiledModel, HarnessError> {
        let (topology, services, policy) = self.parts()?;
        CompiledModel::build(&topology, &services, &policy)
    }
}
