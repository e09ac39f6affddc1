use serde::{Deserialize, Serialize};

use super::{CompiledModel, Fixture, HarnessError};
use crate::dataplane::{OutcomeKind, Packet, TraceResult};
use crate::model::{Headers, TerminalId};
use crate::verify::{check_compliance, ComplianceReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ScenarioKind {
    IllegalNetworkAccess,
    IdentityTheft,
    ServiceLeakage,
    LegitimateAccess,
}

/// One packet sent into the network.
///
/// Headers carry the addresses of `src` and `dst`. When `at` differs from
/// `src` the packet is spoofed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Injection {
    pub at: TerminalId,
    pub src: TerminalId,
    pub dst: TerminalId,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub payload: String,
}

impl Injection {
    pub fn new(at: &str, src: &str, dst: &str, payload: &str) -> Self {
        Injection { at: at.into(), src: src.into(), dst: dst.into(), payload: payload.to_owned() }
    }

    pub fn honest(src: &str, dst: &str) -> Self {
        Injection::new(src, src, dst, "")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    /// Name of the fixture the scenario runs against.
    pub fixture: String,
    pub injections: Vec<Injection>,
    pub expected: Vec<OutcomeKind>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StepReport {
    #[serde(flatten)]
    pub injection: Injection,
    pub expected: OutcomeKind,
    pub actual: TraceResult,
    pub matched: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScenarioReport {
    pub name: String,
    pub kind: ScenarioKind,
    pub fixture: String,
    pub passed: bool,
    pub steps: Vec<StepReport>,
    /// Checked against the fixture's owner policy once all injections ran.
    pub compliance: ComplianceReport,
}

impl ScenarioReport {
    pub fn attacks_denied(&self) -> bool {
        self.steps.iter().all(|s| {
            s.matched || !matches!(s.expected, OutcomeKind::EscalatedThenDenied | OutcomeKind::DroppedAtSwitch)
        })
    }
}

/// Runs the injections in order against a freshly deployed fixture.
pub fn run_scenario(scenario: &Scenario, fixture: &Fixture) -> Result<ScenarioReport, HarnessError> {
    if scenario.injections.len() != scenario.expected.len() {
        return Err(HarnessError::FixtureMismatch(format!(
            "{} injections but {} expected outcomes",
            scenario.injections.len(),
            scenario.expected.len()
        )));
    }
    let model = CompiledModel::from_fixture(fixture)?;
    let topo = &model.topology;
    for inj in &scenario.injections {
        for t in [&inj.at, &inj.src, &inj.dst] {
            if topo.terminal(t).is_none() {
                return Err(HarnessError::FixtureMismatch(format!(
                    "terminal `{t}` is not part of fixture `{}`",
                    fixture.name
                )));
            }
        }
    }

    let mut system = model.deploy()?;
    let mut steps = Vec::with_capacity(scenario.injections.len());
    for (inj, &expected) in scenario.injections.iter().zip(&scenario.expected) {
        let headers = Headers::between(topo.terminal(&inj.src).unwrap(), topo.terminal(&inj.dst).unwrap());
        let packet = Packet::new(headers).with_payload(inj.payload.as_bytes());
        let actual = system.inject(&inj.at, &packet)?;
        steps.push(StepReport { injection: inj.clone(), expected, matched: actual.kind() == expected, actual });
    }
    let compliance = check_compliance(&model.spm, &model.catalog, &system)?;
    Ok(ScenarioReport {
        name: scenario.name.clone(),
        kind: scenario.kind,
        fixture: fixture.name.clone(),
        passed: compliance.compliant && steps.iter().all(|s| s.matched),
        steps,
        compliance,
    })
}

fn scenario(name: &str, kind: ScenarioKind, fixture: &str, steps: Vec<(Injection, OutcomeKind)>) -> Scenario {
    let (injections, expected) = steps.into_iter().unzip();
    Scenario { name: name.into(), kind, fixture: fixture.into(), injections, expected }
}

pub fn builtin_scenarios() -> Vec<Scenario> {
    use OutcomeKind::*;
    use ScenarioKind::*;
    vec![
        scenario(
            "illegal-network-access",
            IllegalNetworkAccess,
            "fig2",
            vec![
                (Injection::new("t2", "t2", "t3", "GET /s3"), EscalatedThenDenied),
                (Injection::new("t2", "t2", "t1", "GET /s1"), EscalatedThenDenied),
                (Injection::new("t2", "t1", "t3", "GET /s3"), EscalatedThenDenied),
                (Injection::honest("t1", "t3"), EscalatedThenDelivered),
                (Injection::new("t2", "t1", "t3", "GET /s3"), EscalatedThenDenied),
                (Injection::new("t6", "t6", "t3", "GET /s3"), EscalatedThenDenied),
            ],
        ),
        scenario(
            "identity-theft",
            IdentityTheft,
            "fig2",
            vec![
                (Injection::new("t5", "t5", "t3", "GET /s3 credential=sc1"), EscalatedThenDelivered),
                (Injection::new("t6", "t6", "t3", "GET /s3 credential=sc1"), EscalatedThenDenied),
                (Injection::new("t6", "t5", "t3", "GET /s3 credential=sc1"), EscalatedThenDenied),
                (Injection::new("t6", "t6", "t3", "GET /s3 credential=sc1"), EscalatedThenDenied),
            ],
        ),
        scenario(
            "service-leakage",
            ServiceLeakage,
            "fig4",
            vec![
                (Injection::new("t4", "t4", "t3", "GET /s3/hidden-admin"), EscalatedThenDenied),
                (Injection::new("t4", "t4", "t1", "GET /s1/hidden-admin"), EscalatedThenDenied),
                (Injection::new("t5", "t5", "t3", "GET /s3"), DroppedAtSwitch),
                (Injection::new("t5", "t5", "t6", ""), DroppedAtSwitch),
                (Injection::new("t6", "t6", "t3", "GET /s3"), EscalatedThenDelivered),
                (Injection::new("t4", "t6", "t3", "GET /s3/hidden-admin"), EscalatedThenDenied),
            ],
        ),
        scenario(
            "legitimate-access-fig2",
            LegitimateAccess,
            "fig2",
            vec![
                (Injection::honest("t1", "t2"), EscalatedThenDelivered),
                (Injection::honest("t1", "t2"), Delivered),
                (Injection::honest("t2", "t1"), Delivered),
                (Injection::honest("t1", "t3"), EscalatedThenDelivered),
                (Injection::honest("t3", "t1"), Delivered),
                (Injection::honest("t5", "t3"), EscalatedThenDelivered),
                (Injection::honest("t3", "t5"), Delivered),
            ],
        ),
        scenario(
            "legitimate-access-spms",
            LegitimateAccess,
            "spms",
            vec![
                (Injection::new("t6", "t6", "t1", "POST /SOA/login"), EscalatedThenDelivered),
                (Injection::new("t7", "t7", "t1", "POST /SOA/login"), EscalatedThenDelivered),
                (Injection::new("t1", "t1", "t2", "GET /SOA/monitoring"), EscalatedThenDelivered),
                (Injection::new("t3", "t3", "t2", "hr=0"), EscalatedThenDelivered),
                (Injection::new("t4", "t4", "t2", "te=1"), EscalatedThenDelivered),
                (Injection::new("t2", "t2", "t5", "POST /SOA/alarming"), EscalatedThenDelivered),
                (Injection::new("t3", "t3", "t2", "hr=1"), Delivered),
                (Injection::honest("t5", "t2"), Delivered),
            ],
        ),
    ]
}

fn normalize(s: &str) -> String {
    s.chars().filter(|c| c.is_ascii_alphanumeric()).map(|c| c.to_ascii_lowercase()).collect()
}

/// Built-in scenarios whose name or kind matches `name`, ignoring case and
/// separators. `all` selects every scenario.
pub fn scenario_by_name(name: &str) -> Vec<Scenario> {
    let key = normalize(name);
    builtin_scenarios()
        .into_iter()
        .filter(|s| key == "all" || normalize(&s.name) == key || normalize(&format!("{:?}", s.kind)) == key)
        .collect()
}
