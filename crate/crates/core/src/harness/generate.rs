//! Seeded generators for random topologies, principals and policies.

use std::collections::BTreeSet;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use super::fixtures::indexed_terminal;
use super::HarnessError;
use crate::model::{
    Catalog, LinkSpec, PortNo, ServiceConsumer, SwitchPort, SwitchSpec, TopologySpec, Vertex, WebService,
};
use crate::policy::PolicyDocument;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TopologyParams {
    pub switches: usize,
    pub terminals: usize,
    /// Switch-to-switch links beyond the spanning tree.
    pub extra_links: usize,
    /// Link costs are drawn from `1..=max_cost`.
    pub max_cost: u32,
    /// When false, each spanning-tree link is kept with probability 1/2.
    pub connected: bool,
}

struct PortAlloc {
    next: Vec<u32>,
}

impl PortAlloc {
    fn take(&mut self, sw: usize) -> Vertex {
        self.next[sw] += 1;
        Vertex::Port(SwitchPort::new(format!("sw{}", sw + 1), self.next[sw]))
    }
}

/// Terminals `t1..tN` attach to uniformly chosen switches `sw1..swM`.
pub fn random_topology(rng: &mut impl Rng, params: TopologyParams) -> Result<TopologySpec, HarnessError> {
    if params.switches == 0 || params.max_cost == 0 {
        return Err(HarnessError::GenerationFailure("need at least one switch and a positive cost bound".into()));
    }
    let mut ports = PortAlloc { next: vec![0; params.switches] };
    let mut links = Vec::new();
    let cost = |rng: &mut dyn rand::RngCore| f64::from(rng.gen_range(1..=params.max_cost));

    let terminals: Vec<_> = (1..=params.terminals as u32).map(indexed_terminal).collect();
    for t in &terminals {
        let sw = rng.gen_range(0..params.switches);
        let c = cost(rng);
        links.push(LinkSpec::new(Vertex::Terminal(t.id.clone()), ports.take(sw), c));
    }
    for i in 1..params.switches {
        let j = rng.gen_range(0..i);
        let keep = params.connected || rng.gen_bool(0.5);
        let c = cost(rng);
        if keep {
            links.push(LinkSpec::new(ports.take(i), ports.take(j), c));
        }
    }
    if params.switches > 1 {
        for _ in 0..params.extra_links {
            let pick = index::sample(rng, params.switches, 2);
            let c = cost(rng);
            links.push(LinkSpec::new(ports.take(pick.index(0)), ports.take(pick.index(1)), c));
        }
    }

    let switches = ports
        .next
        .iter()
        .enumerate()
        .map(|(i, &n)| SwitchSpec { id: format!("sw{}", i + 1).as_str().into(), ports: (1..=n).map(PortNo).collect() })
        .collect();
    Ok(TopologySpec { terminals, switches, links })
}

/// Binds one principal to each terminal: `s{k}` services first, then `c{k}`
/// consumers.
pub fn catalog_for(terminals: usize, services: usize) -> Catalog {
    let services = services.min(terminals);
    Catalog {
        services: (1..=services)
            .map(|k| WebService::new(&format!("s{k}"), &format!("t{k}"), &format!("/svc/{k}")))
            .collect(),
        consumers: (services + 1..=terminals)
            .map(|k| ServiceConsumer::new(&format!("c{k}"), &format!("t{k}")))
            .collect(),
    }
}

fn principal_ids(catalog: &Catalog) -> Vec<String> {
    catalog
        .services
        .iter()
        .map(|s| s.id.to_string())
        .chain(catalog.consumers.iter().map(|c| c.id.to_string()))
        .collect()
}

/// A random owner policy over `catalog`.
///
/// Malicious consumers get no grants. Explicit denies avoid both allowed
/// pairs and their reversals, so response traffic is never blocked.
pub fn random_policy(rng: &mut impl Rng, catalog: &Catalog, max_allow: usize) -> PolicyDocument {
    let services: Vec<String> = catalog.services.iter().map(|s| s.id.to_string()).collect();
    let malicious: Vec<String> =
        catalog.consumers.iter().filter(|_| rng.gen_bool(0.25)).map(|c| c.id.to_string()).collect();

    let mut candidates: Vec<(String, String)> = principal_ids(catalog)
        .into_iter()
        .filter(|p| !malicious.contains(p))
        .flat_map(|p| services.iter().filter(|s| **s != p).map(|s| (p.clone(), s.clone())).collect::<Vec<_>>())
        .collect();
    candidates.shuffle(rng);
    let n_allow = rng.gen_range(0..=max_allow.min(candidates.len()));
    let allow: Vec<(String, String)> = candidates.drain(..n_allow).collect();

    let blocked: BTreeSet<(String, String)> =
        allow.iter().flat_map(|(a, b)| [(a.clone(), b.clone()), (b.clone(), a.clone())]).collect();
    let n_deny = rng.gen_range(0..=2usize);
    let deny: Vec<(String, String)> = candidates.into_iter().filter(|p| !blocked.contains(p)).take(n_deny).collect();

    let mut doc = PolicyDocument { allow, deny, malicious, composition: None };
    doc.allow.sort();
    doc.deny.sort();
    doc
}

/// A small random model: topology, one principal per terminal, and a policy.
#[derive(Debug, Clone)]
pub struct Instance {
    pub topology: TopologySpec,
    pub catalog: Catalog,
    pub policy: PolicyDocument,
}

/// Up to `max_terminals` terminals on up to `max_switches` switches, fully
/// connected, with at most `max_allow` allowed pairs.
pub fn random_instance(
    rng: &mut impl Rng,
    max_terminals: usize,
    max_switches: usize,
    max_allow: usize,
) -> Result<Instance, HarnessError> {
    let terminals = rng.gen_range(2..=max_terminals.max(2));
    let switches = rng.gen_range(1..=max_switches.max(1));
    let params =
        TopologyParams { switches, terminals, extra_links: rng.gen_range(0..=2), max_cost: 5, connected: true };
    let topology = random_topology(rng, params)?;
    let catalog = catalog_for(terminals, rng.gen_range(1..=terminals));
    let policy = random_policy(rng, &catalog, max_allow);
    Ok(Instance { topology, catalog, policy })
}

/// Bench model: every terminal hosts a service and `pairs` distinct
/// service-to-service pairs are allowed.
pub fn bench_instance(
    rng: &mut impl Rng,
    switches: usize,
    terminals: usize,
    pairs: usize,
) -> Result<Instance, HarnessError> {
    let capacity = terminals.saturating_mul(terminals.saturating_sub(1));
    if switches == 0 || terminals == 0 || pairs == 0 || pairs > capacity {
        return Err(HarnessError::GenerationFailure(format!(
            "{pairs} distinct pairs requested over {terminals} terminals and {switches} switches"
        )));
    }
    let params = TopologyParams { switches, terminals, extra_links: switches / 2, max_cost: 10, connected: true };
    let topology = random_topology(rng, params)?;
    let catalog = catalog_for(terminals, terminals);
    let mut allow: Vec<(String, String)> = index::sample(rng, capacity, pairs)
        .into_iter()
        .map(|i| {
            let a = i / (terminals - 1);
            let mut b = i % (terminals - 1);
            if b >= a {
                b += 1;
            }
            (format!("s{}", a + 1), format!("s{}", b + 1))
        })
        .collect();
    allow.sort();
    Ok(Instance { topology, catalog, policy: PolicyDocument { allow, ..Default::default() } })
}
