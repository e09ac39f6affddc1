use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::generate::{bench_instance, random_instance};
use super::{
    builtin_fixtures, builtin_scenarios, exercise_allowed, fixture_by_name, run_bench, run_scenario, BenchConfig,
    BenchResult, CompiledModel, HarnessError, ScenarioReport,
};
use crate::dataplane::{DataplaneError, Network};
use crate::model::{FlowEntry, SwitchId};
use crate::verify::check_compliance;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleEntry {
    #[serde(flatten)]
    pub entry: FlowEntry,
    #[serde(default)]
    pub counter: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchRules {
    pub switch: SwitchId,
    /// In match precedence order.
    pub entries: Vec<RuleEntry>,
}

/// rules.json: every switch's flow table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RulesDocument {
    pub switches: Vec<SwitchRules>,
}

impl RulesDocument {
    pub fn from_network(network: &Network) -> Self {
        let switches = network
            .topology()
            .switch_ids()
            .map(|id| SwitchRules {
                switch: id.clone(),
                entries: network
                    .table(id)
                    .map(|t| t.iter().map(|(e, c)| RuleEntry { entry: *e, counter: c }).collect())
                    .unwrap_or_default(),
            })
            .collect();
        RulesDocument { switches }
    }

    /// Installs every listed entry; counters in the document are ignored.
    pub fn install_into(&self, network: &mut Network) -> Result<(), DataplaneError> {
        for sw in &self.switches {
            for e in &sw.entries {
                network.install_entry(&sw.switch, e.entry)?;
            }
        }
        Ok(())
    }

    pub fn entry_count(&self) -> usize {
        self.switches.iter().map(|s| s.entries.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RandomCheck {
    pub index: usize,
    pub terminals: usize,
    pub switches: usize,
    pub allowed: usize,
    pub compliant: bool,
    pub leaks: usize,
    pub gaps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub passed: bool,
    pub scenarios: Vec<ScenarioReport>,
    pub random_checks: Vec<RandomCheck>,
    pub bench: Vec<BenchResult>,
}

impl SuiteReport {
    /// The report as JSON. Bench timings are moved into a trailing `timings`
    /// section, which `include_timings = false` leaves out entirely.
    pub fn to_json(&self, include_timings: bool) -> Value {
        let mut value = serde_json::to_value(self).expect("report serializes");
        let mut timings = Vec::new();
        if let Some(Value::Array(bench)) = value.get_mut("bench") {
            for b in bench {
                if let Some(obj) = b.as_object_mut() {
                    timings.push(obj.remove("timings").unwrap_or(Value::Null));
                }
            }
        }
        if include_timings {
            value.as_object_mut().unwrap().insert("timings".into(), serde_json::json!({ "bench": timings }));
        }
        value
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for s in &self.scenarios {
            let ok = s.steps.iter().filter(|st| st.matched).count();
            let _ = writeln!(
                out,
                "{:<4} scenario {:<24} {}/{} steps, leaks {}, gaps {}",
                if s.passed { "PASS" } else { "FAIL" },
                s.name,
                ok,
                s.steps.len(),
                s.compliance.leaks.len(),
                s.compliance.gaps.len()
            );
        }
        let bad = self.random_checks.iter().filter(|r| !r.compliant).count();
        let _ = writeln!(out, "random instances: {} checked, {} non-compliant", self.random_checks.len(), bad);
        for b in &self.bench {
            let _ = writeln!(
                out,
                "bench {} switches / {} terminals / {} pairs: {}, {:.1} us per pair",
                b.config.switches,
                b.config.terminals,
                b.config.pairs,
                if b.compliant { "compliant" } else { "NOT compliant" },
                b.timings.per_pair_us
            );
        }
        let _ = writeln!(out, "overall: {}", if self.passed { "PASS" } else { "FAIL" });
        out
    }
}

#[derive(Debug, Clone)]
pub struct SuiteOutput {
    /// Eagerly compiled rules per fixture, plus the seeded random model.
    pub rules: BTreeMap<String, RulesDocument>,
    pub report: SuiteReport,
}

impl SuiteOutput {
    pub fn rules_json(&self) -> String {
        serde_json::to_string_pretty(&self.rules).expect("rules serialize") + "\n"
    }

    pub fn report_json(&self, include_timings: bool) -> String {
        serde_json::to_string_pretty(&self.report.to_json(include_timings)).expect("report serializes") + "\n"
    }
}

fn compiled_rules(model: &CompiledModel) -> Result<RulesDocument, HarnessError> {
    let mut system = model.deploy()?;
    system.install_all_allowed()?;
    Ok(RulesDocument::from_network(&system.network))
}

/// Built-in scenarios, seeded random compliance checks and a small bench.
pub fn run_suite(seed: u64) -> Result<SuiteOutput, HarnessError> {
    let mut rules = BTreeMap::new();
    for fixture in builtin_fixtures() {
        rules.insert(fixture.name.clone(), compiled_rules(&CompiledModel::from_fixture(&fixture)?)?);
    }

    let mut scenarios = Vec::new();
    for scenario in builtin_scenarios() {
        let fixture =
            fixture_by_name(&scenario.fixture).ok_or_else(|| HarnessError::UnknownFixture(scenario.fixture.clone()))?;
        scenarios.push(run_scenario(&scenario, &fixture)?);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random_checks = Vec::new();
    for index in 0..20 {
        let inst = random_instance(&mut rng, 6, 3, 12)?;
        let model = CompiledModel::build(&inst.topology, &inst.catalog, &inst.policy)?;
        let mut system = model.deploy()?;
        exercise_allowed(&mut system)?;
        let report = check_compliance(&model.spm, &model.catalog, &system)?;
        random_checks.push(RandomCheck {
            index,
            terminals: inst.topology.terminals.len(),
            switches: inst.topology.switches.len(),
            allowed: model.rspm.allow_t.len(),
            compliant: report.compliant,
            leaks: report.leaks.len(),
            gaps: report.gaps.len(),
        });
    }

    let inst = bench_instance(&mut rng, 10, 50, 200)?;
    rules.insert("random".into(), compiled_rules(&CompiledModel::build(&inst.topology, &inst.catalog, &inst.policy)?)?);
    let bench = vec![run_bench(BenchConfig::new(10, 50, 200, seed))?];

    let passed = scenarios.iter().all(|s| s.passed)
        && random_checks.iter().all(|r| r.compliant)
        && bench.iter().all(|b| b.compliant);
    Ok(SuiteOutput { rules, report: SuiteReport { seed, passed, scenarios, random_checks, bench } })
}
