use std::time::{Duration, Instant};

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::generate::bench_instance;
use super::{CompiledModel, HarnessError};
use crate::controller::{Controller, PacketIn};
use crate::dataplane::Packet;
use crate::model::TerminalId;
use crate::policy::{transform_spm_to_rspm, TerminalPair};
use crate::verify::check_compliance_among;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BenchConfig {
    pub switches: usize,
    pub terminals: usize,
    pub pairs: usize,
    pub seed: u64,
    pub repeats: usize,
    /// Ordered pairs probed by the post-run compliance check.
    pub compliance_sample: usize,
    /// Packet-ins timed per repeat.
    pub latency_sample: usize,
}

impl BenchConfig {
    pub fn new(switches: usize, terminals: usize, pairs: usize, seed: u64) -> Self {
        BenchConfig { switches, terminals, pairs, seed, repeats: 5, compliance_sample: 200, latency_sample: 500 }
    }
}

/// Summary of repeated measurements, in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DurationStats {
    pub min_us: f64,
    pub mean_us: f64,
    pub max_us: f64,
    pub samples: usize,
}

impl DurationStats {
    pub fn from_samples(samples: &[Duration]) -> Self {
        let us: Vec<f64> = samples.iter().map(|d| d.as_secs_f64() * 1e6).collect();
        if us.is_empty() {
            return DurationStats { min_us: 0.0, mean_us: 0.0, max_us: 0.0, samples: 0 };
        }
        DurationStats {
            min_us: us.iter().copied().fold(f64::INFINITY, f64::min),
            mean_us: us.iter().sum::<f64>() / us.len() as f64,
            max_us: us.iter().copied().fold(0.0, f64::max),
            samples: us.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchTimings {
    pub transform: DurationStats,
    /// Rule synthesis over every allowed pair, per repeat.
    pub synthesis: DurationStats,
    pub packet_in_latency: DurationStats,
    /// Mean transform plus mean synthesis, divided by the pair count.
    pub per_pair_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    pub config: BenchConfig,
    pub rspm_size: usize,
    pub synthesized_rules: usize,
    pub installed_rules: usize,
    pub compliant: bool,
    pub checked_pairs: usize,
    pub leaks: usize,
    pub gaps: usize,
    pub timings: BenchTimings,
}

fn time<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn packet_in_for(model: &CompiledModel, src: &TerminalId, dst: &TerminalId) -> Option<PacketIn> {
    let topo = &model.topology;
    let edge = topo.attachment(src)?;
    let packet = Packet::between(topo.terminal(src)?, topo.terminal(dst)?);
    Some(PacketIn { switch: edge.switch.clone(), in_port: edge.port, packet })
}

/// Generates a topology and policy from the seed, times compilation, then
/// deploys everything eagerly and checks a sample of pairs for compliance.
pub fn run_bench(config: BenchConfig) -> Result<BenchResult, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let inst = bench_instance(&mut rng, config.switches, config.terminals, config.pairs)?;
    let model = CompiledModel::build(&inst.topology, &inst.catalog, &inst.policy)?;
    let repeats = config.repeats.max(1);

    let mut transform = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let (rspm, d) = time(|| transform_spm_to_rspm(&model.spm, &model.catalog));
        debug_assert_eq!(rspm.as_ref(), Ok(&model.rspm));
        rspm?;
        transform.push(d);
    }

    let mut base = Controller::new(model.topology.clone());
    base.upload_rspm(model.rspm.clone())?;
    let mut synthesis = Vec::with_capacity(repeats);
    let mut synthesized_rules = 0;
    for _ in 0..repeats {
        let (count, d) = time(|| -> Result<usize, HarnessError> {
            let mut n = 0;
            for (a, b) in &model.rspm.allow_t {
                n += base.synthesize_flow_rules(a, b)?.len();
            }
            Ok(n)
        });
        synthesized_rules = count?;
        synthesis.push(d);
    }

    let allowed: Vec<&TerminalPair> = model.rspm.allow_t.iter().collect();
    let latency_pairs: Vec<&TerminalPair> =
        index::sample(&mut rng, allowed.len(), config.latency_sample.min(allowed.len()))
            .into_iter()
            .map(|i| allowed[i])
            .collect();
    let mut latency = Vec::with_capacity(repeats * latency_pairs.len());
    for _ in 0..repeats {
        let mut ctl = base.clone();
        for (a, b) in &latency_pairs {
            let Some(pi) = packet_in_for(&model, a, b) else { continue };
            let (decision, d) = time(|| ctl.handle_packet_in(&pi));
            decision?;
            latency.push(d);
        }
    }

    let mut system = model.deploy()?;
    system.install_all_allowed()?;
    let sample = compliance_sample(&mut rng, &model, config.compliance_sample);
    let report = check_compliance_among(&model.spm, &model.catalog, &system, sample)?;

    let transform = DurationStats::from_samples(&transform);
    let synthesis = DurationStats::from_samples(&synthesis);
    Ok(BenchResult {
        config,
        rspm_size: model.rspm.allow_t.len(),
        synthesized_rules,
        installed_rules: system.network.entry_count(),
        compliant: report.compliant,
        checked_pairs: report.checked_pairs,
        leaks: report.leaks.len(),
        gaps: report.gaps.len(),
        timings: BenchTimings {
            transform,
            synthesis,
            packet_in_latency: DurationStats::from_samples(&latency),
            per_pair_us: (transform.mean_us + synthesis.mean_us) / config.pairs as f64,
        },
    })
}

/// Half allowed pairs, half arbitrary ordered pairs of distinct terminals.
fn compliance_sample(rng: &mut ChaCha8Rng, model: &CompiledModel, size: usize) -> Vec<TerminalPair> {
    let allowed: Vec<TerminalPair> = model.rspm.allow_t.iter().cloned().collect();
    let mut out: Vec<TerminalPair> = allowed.choose_multiple(rng, (size / 2).min(allowed.len())).cloned().collect();
    let ids: Vec<&TerminalId> = model.topology.terminal_ids().collect();
    if ids.len() >= 2 {
        while out.len() < size {
            let pick = index::sample(rng, ids.len(), 2);
            out.push((ids[pick.index(0)].clone(), ids[pick.index(1)].clone()));
        }
    }
    out
}
