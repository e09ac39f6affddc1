//! Fixtures, threat scenarios, random instance generation, benchmarking and
//! the JSON formats used by the command-line tool.

mod bench;
pub mod fixtures;
pub mod generate;
mod io;
mod report;
mod scenario;

use std::sync::Arc;

use thiserror::Error;

use crate::controller::ControllerError;
use crate::dataplane::{DataplaneError, Packet, SdnSystem, TraceResult};
use crate::model::{validate_model, Catalog, TopologyError, TopologyGraph, TopologySpec, Violation};
use crate::policy::{transform_spm_to_rspm, PolicyDocument, PolicyError, Rspm, Spm};
use crate::verify::VerifyError;

pub use bench::{run_bench, BenchConfig, BenchResult, BenchTimings, DurationStats};
pub use fixtures::{builtin_fixtures, fixture_by_name, Fixture};
pub use io::{load_inputs, parse_input, InputDocument, InputSet};
pub use report::{run_suite, RandomCheck, RuleEntry, RulesDocument, SuiteOutput, SuiteReport, SwitchRules};
pub use scenario::{
    builtin_scenarios, run_scenario, scenario_by_name, Injection, Scenario, ScenarioKind, ScenarioReport, StepReport,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid model: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidModel(Vec<Violation>),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Dataplane(#[from] DataplaneError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error("scenario does not fit fixture: {0}")]
    FixtureMismatch(String),
    #[error("cannot generate instance: {0}")]
    GenerationFailure(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
    #[error("{path}: {message}")]
    Input { path: String, message: String },
}

/// A validated model ready to be deployed: topology, principals, and both
/// policy levels.
#[derive(Debug, Clone)]
pub struct CompiledModel {
    pub topology: Arc<TopologyGraph>,
    pub catalog: Catalog,
    pub spm: Spm,
    pub rspm: Rspm,
}

impl CompiledModel {
    /// Rejects every model violation except terminals left unattached, which
    /// simply end up unreachable.
    pub fn build(topology: &TopologySpec, catalog: &Catalog, policy: &PolicyDocument) -> Result<Self, HarnessError> {
        let fatal: Vec<Violation> = validate_model(topology, catalog)
            .violations
            .into_iter()
            .filter(|v| !matches!(v, Violation::TerminalNotAttached { .. }))
            .collect();
        if !fatal.is_empty() {
            return Err(HarnessError::InvalidModel(fatal));
        }
        let graph = Arc::new(TopologyGraph::new(topology.clone())?);
        let spm = policy.to_spm(catalog)?;
        let rspm = transform_spm_to_rspm(&spm, catalog)?;
        Ok(CompiledModel { topology: graph, catalog: catalog.clone(), spm, rspm })
    }

    pub fn from_fixture(fixture: &Fixture) -> Result<Self, HarnessError> {
        Self::build(&fixture.topology, &fixture.services, &fixture.policy)
    }

    /// A fresh network and controller with the policy uploaded.
    pub fn deploy(&self) -> Result<SdnSystem, HarnessError> {
        let mut system = SdnSystem::new(Arc::clone(&self.topology));
        system.upload(self.rspm.clone())?;
        Ok(system)
    }
}

/// Sends one honest packet for every allowed pair, in pair order.
pub fn exercise_allowed(system: &mut SdnSystem) -> Result<Vec<TraceResult>, HarnessError> {
    let pairs: Vec<_> = system.controller.rspm().map(|r| r.allow_t.iter().cloned().collect()).unwrap_or_default();
    let topo = Arc::clone(system.topology());
    let mut out = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        let (Some(src), Some(dst)) = (topo.terminal(&a), topo.terminal(&b)) else { continue };
        out.push(system.inject(&a, &Packet::between(src, dst))?);
    }
    Ok(out)
}
