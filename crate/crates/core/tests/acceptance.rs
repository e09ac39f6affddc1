mod common;

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{brute_force_path, ordered_pairs, tpairs, with_reverse};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdnguard::dataplane::{OutcomeKind, Packet, ProbeMode, SdnSystem};
use sdnguard::harness::fixtures::{fig2, spms, spms_catalog, spms_wsc};
use sdnguard::harness::generate::{random_instance, random_policy, random_topology, TopologyParams};
use sdnguard::harness::{
    builtin_scenarios, exercise_allowed, fixture_by_name, run_bench, run_scenario, run_suite, BenchConfig,
    CompiledModel, ScenarioKind,
};
use sdnguard::model::{TerminalId, TopologyGraph};
use sdnguard::policy::{derive_spm, diff_rspm, transform_spm_to_rspm, PolicyDocument, Principal, PrincipalMap, Rspm};
use sdnguard::verify::{check_compliance, reachable_pairs};

const FIXTURE_BUDGET: Duration = Duration::from_secs(1);
const RANDOM_COMPLIANCE_BUDGET: Duration = Duration::from_secs(60);
const PATH_BUDGET: Duration = Duration::from_secs(30);
const UPDATE_BUDGET: Duration = Duration::from_secs(30);
const BENCH_BUDGET: Duration = Duration::from_secs(60);

const RANDOM_INSTANCES: usize = 200;
const MAX_TERMINALS: usize = 6;
const MAX_SWITCHES: usize = 3;
const MAX_ALLOW: usize = 12;
const PATH_TOPOLOGIES: usize = 100;
const MAX_VERTICES: usize = 12;
const UPDATE_PAIRS: usize = 50;
const BENCH_SWITCHES: usize = 100;
const BENCH_TERMINALS: usize = 200;
const BENCH_PAIRS: [usize; 3] = [100, 1_000, 10_000];
const BENCH_SAMPLE: usize = 200;
const MAX_PER_PAIR_RATIO: f64 = 10.0;
const SEED: u64 = 0x5d9_2024;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Box<dyn Fn() -> (Outcome, Duration)>);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(elapsed: Duration, budget: Duration) -> Outcome {
    ensure!(elapsed < budget, "took {elapsed:.2?}, budget {budget:?}");
    Ok(String::new())
}

fn inject(sys: &mut SdnSystem, at: &str, src: &str, dst: &str) -> Result<OutcomeKind, String> {
    let topo = Arc::clone(sys.topology());
    let (s, d) = (topo.terminal(&src.into()), topo.terminal(&dst.into()));
    let (Some(s), Some(d)) = (s, d) else { return Err(format!("unknown terminal in {src} -> {dst}")) };
    sys.inject(&at.into(), &Packet::between(s, d)).map(|t| t.kind()).map_err(|e| e.to_string())
}

fn is_delivered(k: OutcomeKind) -> bool {
    matches!(k, OutcomeKind::Delivered | OutcomeKind::EscalatedThenDelivered)
}

fn fig2_walkthrough() -> Outcome {
    let model = CompiledModel::from_fixture(&fig2()).map_err(|e| e.to_string())?;
    let allowed = tpairs(&[("t1", "t2"), ("t1", "t3"), ("t5", "t3")]);
    ensure!(model.rspm.allow_t == allowed, "allowed pairs {:?}", model.rspm.allow_t);

    let mut sys = model.deploy().map_err(|e| e.to_string())?;
    for (a, b) in [("t2", "t3"), ("t6", "t3")] {
        let k = inject(&mut sys, a, a, b)?;
        ensure!(!is_delivered(k), "{a} -> {b} was {k:?} before any traffic");
    }
    for (a, b) in &allowed {
        let k = inject(&mut sys, a.as_str(), a.as_str(), b.as_str())?;
        ensure!(is_delivered(k), "{a} -> {b} was {k:?}");
    }
    for (a, b) in [("t2", "t3"), ("t6", "t3")] {
        let k = inject(&mut sys, a, a, b)?;
        ensure!(!is_delivered(k), "{a} -> {b} was {k:?} after allowed traffic");
    }

    let want = with_reverse(&allowed);
    for mode in [ProbeMode::WithController, ProbeMode::TablesOnly] {
        let got = reachable_pairs(&sys, mode).map_err(|e| e.to_string())?;
        ensure!(got == want, "{mode:?} reachable {got:?}");
    }
    Ok(format!("{} delivered pairs", want.len()))
}

fn attack_scenarios() -> Outcome {
    let kinds = [ScenarioKind::IllegalNetworkAccess, ScenarioKind::IdentityTheft, ScenarioKind::ServiceLeakage];
    let mut attacks = 0;
    for kind in kinds {
        let scenarios: Vec<_> = builtin_scenarios().into_iter().filter(|s| s.kind == kind).collect();
        ensure!(!scenarios.is_empty(), "no {kind:?} scenario");
        for s in scenarios {
            let fixture = fixture_by_name(&s.fixture).ok_or(format!("fixture {}", s.fixture))?;
            let allow = CompiledModel::from_fixture(&fixture).map_err(|e| e.to_string())?.rspm.allow_t;
            let report = run_scenario(&s, &fixture).map_err(|e| e.to_string())?;
            ensure!(report.passed, "{} did not pass", s.name);
            ensure!(report.compliance.leaks.is_empty(), "{} leaks {:?}", s.name, report.compliance.leaks);
            for step in &report.steps {
                let inj = &step.injection;
                let pair: (TerminalId, TerminalId) = (inj.src.as_str().into(), inj.dst.as_str().into());
                if inj.at != inj.src || !allow.contains(&pair) {
                    attacks += 1;
                    ensure!(!is_delivered(step.actual.kind()), "{}: attack {inj:?} was delivered", s.name);
                }
            }
        }
    }
    Ok(format!("{attacks} attack injections denied"))
}

fn spms_composition() -> Outcome {
    let catalog = spms_catalog();
    let spm = derive_spm(&spms_wsc(), &catalog, &BTreeSet::new(), &BTreeSet::new()).map_err(|e| e.to_string())?;
    let want: BTreeSet<_> = [("s1", "s2"), ("s3", "s2"), ("s4", "s2"), ("s2", "s5")]
        .into_iter()
        .map(|(a, b)| (Principal::Service(a.into()), b.into()))
        .collect();
    ensure!(spm.allow == want, "derived {:?}", spm.allow);

    let model = CompiledModel::from_fixture(&spms()).map_err(|e| e.to_string())?;
    let map = PrincipalMap::new(&catalog).map_err(|e| e.to_string())?;
    let mut sys = model.deploy().map_err(|e| e.to_string())?;
    for (p, s) in &spm.allow {
        let a = map.terminal(p).map_err(|e| e.to_string())?.clone();
        let b = map.service_terminal(s).map_err(|e| e.to_string())?.clone();
        let k = inject(&mut sys, a.as_str(), a.as_str(), b.as_str())?;
        ensure!(is_delivered(k), "invocation {p} -> {s} ({a} -> {b}) was {k:?}");
    }
    let report = check_compliance(&model.spm, &model.catalog, &sys).map_err(|e| e.to_string())?;
    ensure!(report.compliant, "leaks {:?}, gaps {:?}", report.leaks, report.gaps);
    Ok("4 invocations delivered".into())
}

fn random_compliance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut allowed = 0;
    for i in 0..RANDOM_INSTANCES {
        let inst = random_instance(&mut rng, MAX_TERMINALS, MAX_SWITCHES, MAX_ALLOW).map_err(|e| e.to_string())?;
        let model = CompiledModel::build(&inst.topology, &inst.catalog, &inst.policy).map_err(|e| e.to_string())?;
        let mut sys = model.deploy().map_err(|e| e.to_string())?;
        exercise_allowed(&mut sys).map_err(|e| e.to_string())?;
        let report = check_compliance(&model.spm, &model.catalog, &sys).map_err(|e| e.to_string())?;
        ensure!(report.compliant, "instance {i}: leaks {:?}, gaps {:?}", report.leaks, report.gaps);
        let want = with_reverse(&model.rspm.allow_t);
        ensure!(report.reachable == want, "instance {i}: reachable {:?}, want {want:?}", report.reachable);
        allowed += model.rspm.allow_t.len();
    }
    Ok(format!("{RANDOM_INSTANCES} instances, {allowed} allowed pairs"))
}

fn path_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 1);
    let (mut topologies, mut pairs, mut attempts) = (0, 0, 0);
    while topologies < PATH_TOPOLOGIES {
        attempts += 1;
        ensure!(attempts < 100 * PATH_TOPOLOGIES, "could not generate small topologies");
        let params = TopologyParams {
            switches: rng.gen_range(1..=3),
            terminals: rng.gen_range(2..=5),
            extra_links: rng.gen_range(0..=3),
            max_cost: 4,
            connected: rng.gen_bool(0.8),
        };
        let spec = random_topology(&mut rng, params).map_err(|e| e.to_string())?;
        let g = TopologyGraph::new(spec.clone()).map_err(|e| e.to_string())?;
        if g.vertex_count() > MAX_VERTICES {
            continue;
        }
        topologies += 1;
        for (a, b) in ordered_pairs(&spec) {
            let got = g.least_cost_path(&a, &b).map_err(|e| e.to_string())?;
            let want = brute_force_path(&spec, &a, &b);
            ensure!(
                got.as_ref().map(|p| p.cost) == want.as_ref().map(|w| w.1),
                "{a} -> {b}: cost {:?}, exhaustive {:?}",
                got.map(|p| p.cost),
                want.map(|w| w.1)
            );
            ensure!(got.map(|p| p.vertices) == want.map(|w| w.0), "{a} -> {b}: path differs from exhaustive choice");
            pairs += 1;
        }
    }
    Ok(format!("{topologies} topologies, {pairs} terminal pairs"))
}

/// A policy over the same principals, sharing part of `old`'s allow list.
fn next_policy(rng: &mut ChaCha8Rng, model: &CompiledModel, old: &PolicyDocument) -> PolicyDocument {
    let fresh = random_policy(rng, &model.catalog, MAX_ALLOW);
    if rng.gen_bool(0.3) {
        return fresh;
    }
    let mut allow: Vec<(String, String)> = old
        .allow
        .iter()
        .filter(|(p, _)| !fresh.malicious.contains(p))
        .filter(|_| rng.gen_bool(0.7))
        .cloned()
        .chain(fresh.allow.iter().cloned())
        .collect();
    allow.sort();
    allow.dedup();
    let deny = fresh
        .deny
        .into_iter()
        .filter(|(a, b)| !allow.iter().any(|(x, y)| (x == a && y == b) || (x == b && y == a)))
        .collect();
    PolicyDocument { allow, deny, malicious: fresh.malicious, composition: None }
}

fn rspm_of(model: &CompiledModel, doc: &PolicyDocument) -> Result<Rspm, String> {
    let spm = doc.to_spm(&model.catalog).map_err(|e| e.to_string())?;
    transform_spm_to_rspm(&spm, &model.catalog).map_err(|e| e.to_string())
}

fn dynamic_update() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 2);
    let mut changed = 0;
    for i in 0..UPDATE_PAIRS {
        let inst = random_instance(&mut rng, MAX_TERMINALS, MAX_SWITCHES, MAX_ALLOW).map_err(|e| e.to_string())?;
        let old_model = CompiledModel::build(&inst.topology, &inst.catalog, &inst.policy).map_err(|e| e.to_string())?;
        let new_doc = next_policy(&mut rng, &old_model, &inst.policy);
        let (old, new) = (old_model.rspm.clone(), rspm_of(&old_model, &new_doc)?);
        let new_model = CompiledModel::build(&inst.topology, &inst.catalog, &new_doc).map_err(|e| e.to_string())?;

        let delta = diff_rspm(&old, &new);
        ensure!(delta.apply(&old) == new, "pair {i}: diff round trip lost information");
        ensure!(diff_rspm(&new, &old).apply(&new) == old, "pair {i}: reverse diff round trip lost information");
        changed += usize::from(!delta.is_empty());

        // Traffic-driven: exercise the old policy, update, then compare with a
        // fresh deployment that saw the surviving pairs' traffic.
        let mut updated = old_model.deploy().map_err(|e| e.to_string())?;
        exercise_allowed(&mut updated).map_err(|e| e.to_string())?;
        updated.update(new.clone()).map_err(|e| e.to_string())?;
        let mut fresh = new_model.deploy().map_err(|e| e.to_string())?;
        for (a, b) in old.allow_t.intersection(&new.allow_t) {
            inject(&mut fresh, a.as_str(), a.as_str(), b.as_str())?;
        }
        ensure!(updated.controller.installed() == fresh.controller.installed(), "pair {i}: lazy state differs");
        ensure!(updated.network.entries() == fresh.network.entries(), "pair {i}: lazy tables differ");
        ensure!(updated.network.entries() == updated.controller.installed(), "pair {i}: tables drift from controller");

        // Eager: everything allowed is installed on both sides.
        let mut updated = old_model.deploy().map_err(|e| e.to_string())?;
        updated.install_all_allowed().map_err(|e| e.to_string())?;
        updated.update(new.clone()).map_err(|e| e.to_string())?;
        updated.install_all_allowed().map_err(|e| e.to_string())?;
        let mut fresh = new_model.deploy().map_err(|e| e.to_string())?;
        fresh.install_all_allowed().map_err(|e| e.to_string())?;
        ensure!(updated.controller.installed() == fresh.controller.installed(), "pair {i}: eager state differs");
        ensure!(updated.network.entries() == fresh.network.entries(), "pair {i}: eager tables differ");
    }
    Ok(format!("{UPDATE_PAIRS} policy pairs, {changed} with a non-empty diff"))
}

fn bench_scaling() -> (Outcome, Duration) {
    let start = Instant::now();
    let mut per_pair = Vec::new();
    let mut detail = Vec::new();
    for pairs in BENCH_PAIRS {
        let r = match run_bench(BenchConfig::new(BENCH_SWITCHES, BENCH_TERMINALS, pairs, SEED)) {
            Ok(r) => r,
            Err(e) => return (Err(e.to_string()), start.elapsed()),
        };
        if r.rspm_size != pairs || !r.compliant || r.checked_pairs != BENCH_SAMPLE {
            let msg = format!(
                "{pairs} pairs: size {}, compliant {}, {} checked, {} leaks, {} gaps",
                r.rspm_size, r.compliant, r.checked_pairs, r.leaks, r.gaps
            );
            return (Err(msg), start.elapsed());
        }
        per_pair.push(r.timings.per_pair_us);
        detail.push(format!("{pairs}: {:.1} us/pair", r.timings.per_pair_us));
    }
    let elapsed = start.elapsed();
    let max = per_pair.iter().copied().fold(f64::MIN, f64::max);
    let min = per_pair.iter().copied().fold(f64::MAX, f64::min);
    let ratio = max / min;
    let summary = format!("{}; per-pair ratio {ratio:.2}", detail.join(", "));
    let outcome = if elapsed >= BENCH_BUDGET {
        Err(format!("took {elapsed:.2?}, budget {BENCH_BUDGET:?}; {summary}"))
    } else if ratio.is_nan() || ratio > MAX_PER_PAIR_RATIO {
        Err(format!("per-pair ratio {ratio:.2} exceeds {MAX_PER_PAIR_RATIO}; {summary}"))
    } else {
        Ok(summary)
    };
    (outcome, elapsed)
}

fn determinism() -> Outcome {
    let a = run_suite(SEED).map_err(|e| e.to_string())?;
    let b = run_suite(SEED).map_err(|e| e.to_string())?;
    ensure!(a.rules_json() == b.rules_json(), "rules.json differs between runs");
    ensure!(a.report_json(false) == b.report_json(false), "report.json differs between runs");
    ensure!(a.report.passed, "suite failed:\n{}", a.report.summary());
    Ok(format!("rules.json {} bytes, report.json {} bytes", a.rules_json().len(), a.report_json(false).len()))
}

fn timed(f: fn() -> Outcome, budget: Option<Duration>) -> (Outcome, Duration) {
    let start = Instant::now();
    let outcome = f();
    let elapsed = start.elapsed();
    let outcome = match (outcome, budget) {
        (Ok(detail), Some(b)) => within(elapsed, b).map(|_| detail),
        (other, _) => other,
    };
    (outcome, elapsed)
}

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        ("fig2 walkthrough", Box::new(|| timed(fig2_walkthrough, Some(FIXTURE_BUDGET)))),
        ("attack scenarios", Box::new(|| timed(attack_scenarios, Some(FIXTURE_BUDGET)))),
        ("spms composition", Box::new(|| timed(spms_composition, Some(FIXTURE_BUDGET)))),
        ("random compliance", Box::new(|| timed(random_compliance, Some(RANDOM_COMPLIANCE_BUDGET)))),
        ("path optimality", Box::new(|| timed(path_optimality, Some(PATH_BUDGET)))),
        ("dynamic update", Box::new(|| timed(dynamic_update, Some(UPDATE_BUDGET)))),
        ("bench scaling", Box::new(bench_scaling)),
        ("determinism", Box::new(|| timed(determinism, None))),
    ];

    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (outcome, elapsed) = match panic::catch_unwind(AssertUnwindSafe(run)) {
            Ok(r) => r,
            Err(p) => {
                let msg =
                    p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
                (Err(format!("panicked: {}", msg.unwrap_or_default())), Duration::ZERO)
            }
        };
        match outcome {
            Ok(detail) => println!("PASS {} {name} ({elapsed:.2?}): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name} ({elapsed:.2?}): {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
