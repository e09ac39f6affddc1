use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use sdnguard::dataplane::ProbeMode;
use sdnguard::harness::{
    exercise_allowed, fixture_by_name, load_inputs, run_bench, run_scenario, run_suite, scenario_by_name, BenchConfig,
    CompiledModel, HarnessError, InputSet, RulesDocument, Scenario, ScenarioReport,
};
use sdnguard::model::{validate_model, validate_topology, validate_wsc, Violation};
use sdnguard::verify::{check_compliance, reachable_pairs, ComplianceReport};

#[derive(Parser)]
#[command(name = "sdnguard", version, about = "Compile and verify SDN access control for Web service compositions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check topology, services and policy documents for consistency.
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Compile a model into per-switch flow rules for every allowed pair.
    Compile {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a built-in scenario (by name, kind or `all`) or a scenario file.
    RunScenario {
        scenario: String,
        /// Model documents to run a scenario file against instead of a built-in fixture.
        #[arg(long = "model", num_args = 1..)]
        model: Vec<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Deploy a model, exercise its allowed pairs and check compliance.
    Verify {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Check these installed rules (as written by `compile`) instead.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Time policy compilation on a generated network.
    Bench {
        #[arg(long)]
        switches: usize,
        #[arg(long)]
        terminals: usize,
        #[arg(long)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run every scenario, random compliance checks and a small bench.
    Suite {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory receiving rules.json and report.json.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Write a built-in fixture as topology.json, services.json and policy.json.
    Fixture {
        name: String,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

const PASS: u8 = 0;
const VIOLATIONS: u8 = 1;
const INPUT_ERROR: u8 = 2;

fn verdict(ok: bool) -> u8 {
    if ok {
        PASS
    } else {
        VIOLATIONS
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn print_violations(violations: &[Violation]) {
    for v in violations {
        println!("  violation: {v}");
    }
}

fn validate(inputs: &InputSet) -> u8 {
    let mut violations: Vec<Violation> = match (&inputs.topology, &inputs.services) {
        (Some(t), Some(s)) => validate_model(t, s).violations,
        (Some(t), None) => validate_topology(t),
        _ => Vec::new(),
    };
    if let Some(wsc) = inputs.policy.as_ref().and_then(|p| p.composition.as_ref()) {
        violations.extend(validate_wsc(wsc).violations);
    }
    let mut problems = Vec::new();
    if let (Some(services), Some(policy)) = (&inputs.services, &inputs.policy) {
        if let Err(e) = policy.to_spm(services) {
            problems.push(e.to_string());
        }
    }
    for s in &inputs.scenarios {
        if s.injections.len() != s.expected.len() {
            problems.push(format!(
                "scenario {}: {} injections, {} expected outcomes",
                s.name,
                s.injections.len(),
                s.expected.len()
            ));
        }
    }
    print_violations(&violations);
    for p in &problems {
        println!("  policy: {p}");
    }
    let ok = violations.is_empty() && problems.is_empty();
    println!("{} document(s): {}", inputs.paths.len(), if ok { "valid" } else { "INVALID" });
    verdict(ok)
}

fn compile(inputs: &InputSet, out: &Path) -> Result<u8> {
    let model = inputs.compile()?;
    let mut system = model.deploy()?;
    system.install_all_allowed()?;
    let doc = RulesDocument::from_network(&system.network);
    write_json(out, &doc)?;
    println!(
        "{} allowed pair(s), {} denied pair(s), {} blocked terminal(s)",
        model.rspm.allow_t.len(),
        model.rspm.deny_t.len(),
        model.rspm.deny_all_from.len()
    );
    println!("wrote {} entries on {} switch(es) to {}", doc.entry_count(), doc.switches.len(), out.display());
    Ok(PASS)
}

fn print_compliance(report: &ComplianceReport) {
    println!(
        "compliance: {} ({} pairs checked, {} reachable, {} response pairs)",
        if report.compliant { "PASS" } else { "FAIL" },
        report.checked_pairs,
        report.reachable.len(),
        report.reverse_of_allowed.len()
    );
    for l in &report.leaks {
        println!("  leak: {} -> {}", l.src, l.dst);
    }
    for g in &report.gaps {
        println!("  gap: {} -> {}{}", g.src, g.dst, if g.connected { "" } else { " (disconnected)" });
    }
}

fn print_scenario(report: &ScenarioReport) {
    println!("scenario {} on {}: {}", report.name, report.fixture, if report.passed { "PASS" } else { "FAIL" });
    for step in &report.steps {
        let inj = &step.injection;
        let spoof = if inj.at == inj.src { String::new() } else { format!(" (sent from {})", inj.at) };
        println!(
            "  [{}] {} -> {}{}: expected {:?}, got {:?}",
            if step.matched { "ok" } else { "!!" },
            inj.src,
            inj.dst,
            spoof,
            step.expected,
            step.actual.kind()
        );
    }
    print_compliance(&report.compliance);
}

fn run_scenarios(name: &str, model: &[PathBuf], report: Option<&Path>) -> Result<u8> {
    let path = Path::new(name);
    let scenarios: Vec<Scenario> = if path.exists() {
        let inputs = load_inputs(&[path])?;
        if inputs.scenarios.is_empty() {
            return Err(HarnessError::Input { path: name.into(), message: "not a scenario document".into() }.into());
        }
        inputs.scenarios
    } else {
        let found = scenario_by_name(name);
        if found.is_empty() {
            return Err(HarnessError::UnknownScenario(name.into()).into());
        }
        found
    };
    let custom = if model.is_empty() { None } else { Some(load_inputs(model)?) };

    let mut reports = Vec::new();
    for s in &scenarios {
        let fixture = match &custom {
            Some(inputs) => inputs.as_fixture(&s.fixture)?,
            None => fixture_by_name(&s.fixture).ok_or_else(|| HarnessError::UnknownFixture(s.fixture.clone()))?,
        };
        let r = run_scenario(s, &fixture)?;
        print_scenario(&r);
        reports.push(r);
    }
    if let Some(path) = report {
        write_json(path, &reports)?;
    }
    Ok(verdict(reports.iter().all(|r| r.passed)))
}

fn verify(inputs: &InputSet, rules: Option<&Path>, report: Option<&Path>) -> Result<u8> {
    let model: CompiledModel = inputs.compile()?;
    let mut system = model.deploy()?;
    match rules {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let doc: RulesDocument = serde_json::from_str(&text)
                .map_err(|e| HarnessError::Input { path: path.display().to_string(), message: e.to_string() })?;
            doc.install_into(&mut system.network)?;
        }
        None => {
            exercise_allowed(&mut system)?;
        }
    }
    let tables_only = reachable_pairs(&system, ProbeMode::TablesOnly)?;
    let compliance = check_compliance(&model.spm, &model.catalog, &system)?;
    println!("pairs reachable through installed rules alone: {}", tables_only.len());
    print_compliance(&compliance);
    if let Some(path) = report {
        write_json(path, &compliance)?;
    }
    Ok(verdict(compliance.compliant))
}

fn bench(config: BenchConfig, report: Option<&Path>) -> Result<u8> {
    let r = run_bench(config)?;
    let t = &r.timings;
    println!(
        "{} switches, {} terminals, {} allowed pairs (seed {})",
        config.switches, config.terminals, r.rspm_size, config.seed
    );
    for (label, s) in [("transform", t.transform), ("synthesis", t.synthesis), ("packet-in", t.packet_in_latency)] {
        println!("  {label:<10} min {:>12.1} us  mean {:>12.1} us  max {:>12.1} us", s.min_us, s.mean_us, s.max_us);
    }
    println!(
        "  {:.2} us per pair, {} rules synthesized, {} installed",
        t.per_pair_us, r.synthesized_rules, r.installed_rules
    );
    println!(
        "compliance on {} sampled pairs: {} ({} leaks, {} gaps)",
        r.checked_pairs,
        if r.compliant { "PASS" } else { "FAIL" },
        r.leaks,
        r.gaps
    );
    if let Some(path) = report {
        write_json(path, &r)?;
    }
    Ok(verdict(r.compliant))
}

fn suite(seed: u64, out_dir: &Path) -> Result<u8> {
    let out = run_suite(seed)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    fs::write(out_dir.join("rules.json"), out.rules_json())?;
    fs::write(out_dir.join("report.json"), out.report_json(true))?;
    print!("{}", out.report.summary());
    Ok(verdict(out.report.passed))
}

fn fixture(name: &str, out_dir: &Path) -> Result<u8> {
    let fx = fixture_by_name(name).ok_or_else(|| HarnessError::UnknownFixture(name.into()))?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    write_json(&out_dir.join("topology.json"), &fx.topology)?;
    write_json(&out_dir.join("services.json"), &fx.services)?;
    write_json(&out_dir.join("policy.json"), &fx.policy)?;
    println!("wrote fixture {} to {}", fx.name, out_dir.display());
    Ok(PASS)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Validate { files } => Ok(validate(&load_inputs(&files)?)),
        Command::Compile { files, out } => compile(&load_inputs(&files)?, &out),
        Command::RunScenario { scenario, model, report } => run_scenarios(&scenario, &model, report.as_deref()),
        Command::Verify { files, rules, report } => verify(&load_inputs(&files)?, rules.as_deref(), report.as_deref()),
        Command::Bench { switches, terminals, pairs, seed, repeats, report } => {
            let config = BenchConfig { repeats, ..BenchConfig::new(switches, terminals, pairs, seed) };
            bench(config, report.as_deref())
        }
        Command::Suite { seed, out_dir } => suite(seed, &out_dir),
        Command::Fixture { name, out_dir } => fixture(&name, &out_dir),
    }
}

/// Model violations are findings; anything else that stops a run is an input problem.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<HarnessError>() {
        Some(HarnessError::InvalidModel(_) | HarnessError::Topology(_) | HarnessError::Policy(_)) => VIOLATIONS,
        _ => INPUT_ERROR,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            if let Some(HarnessError::InvalidModel(v)) = err.downcast_ref::<HarnessError>() {
                eprintln!("error: invalid model");
                for v in v {
                    eprintln!("  violation: {v}");
                }
            } else {
                eprintln!("error: {err:#}");
            }
            ExitCode::from(exit_code_for(&err))
        }
    }
}
