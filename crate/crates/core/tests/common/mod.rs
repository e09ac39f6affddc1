#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use sdnguard::model::{SwitchPort, TerminalId, TopologySpec, Vertex};

/// Exhaustive simple-path search, independent of the library's Dijkstra.
///
/// Returns the best path under (cost, edge count, vertex sequence), or `None`
/// when the terminals are disconnected. Terminals other than the two ends are
/// never traversed.
pub fn brute_force_path(spec: &TopologySpec, src: &TerminalId, dst: &TerminalId) -> Option<(Vec<Vertex>, f64)> {
    let mut adj: BTreeMap<Vertex, Vec<(Vertex, f64)>> = BTreeMap::new();
    for sw in &spec.switches {
        for a in &sw.ports {
            for b in &sw.ports {
                if a != b {
                    adj.entry(Vertex::Port(SwitchPort { switch: sw.id.clone(), port: *a }))
                        .or_default()
                        .push((Vertex::Port(SwitchPort { switch: sw.id.clone(), port: *b }), 0.0));
                }
            }
        }
    }
    for l in &spec.links {
        if l.is_inner() {
            continue;
        }
        adj.entry(l.a.clone()).or_default().push((l.b.clone(), l.cost));
        adj.entry(l.b.clone()).or_default().push((l.a.clone(), l.cost));
    }

    let start = Vertex::Terminal(src.clone());
    let goal = Vertex::Terminal(dst.clone());
    let mut best: Option<(f64, usize, Vec<Vertex>)> = None;
    let mut stack = vec![start.clone()];
    let mut seen: BTreeSet<Vertex> = [start.clone()].into();

    fn dfs(
        adj: &BTreeMap<Vertex, Vec<(Vertex, f64)>>,
        goal: &Vertex,
        stack: &mut Vec<Vertex>,
        seen: &mut BTreeSet<Vertex>,
        cost: f64,
        best: &mut Option<(f64, usize, Vec<Vertex>)>,
    ) {
        let here = stack.last().unwrap().clone();
        if &here == goal {
            let cand = (cost, stack.len() - 1, stack.clone());
            let better = match best {
                None => true,
                Some(b) => (cand.0, cand.1).partial_cmp(&(b.0, b.1)).unwrap().then_with(|| cand.2.cmp(&b.2)).is_lt(),
            };
            if better {
                *best = Some(cand);
            }
            return;
        }
        if stack.len() > 1 && matches!(here, Vertex::Terminal(_)) {
            return;
        }
        for (next, w) in adj.get(&here).into_iter().flatten() {
            if seen.insert(next.clone()) {
                stack.push(next.clone());
                dfs(adj, goal, stack, seen, cost + w, best);
                stack.pop();
                seen.remove(next);
            }
        }
    }

    dfs(&adj, &goal, &mut stack, &mut seen, 0.0, &mut best);
    best.map(|(c, _, p)| (p, c))
}

/// Every ordered pair of distinct terminal ids in the topology.
pub fn ordered_pairs(spec: &TopologySpec) -> Vec<(TerminalId, TerminalId)> {
    let ids: Vec<TerminalId> = spec.terminals.iter().map(|t| t.id.clone()).collect();
    let mut out = Vec::new();
    for a in &ids {
        for b in &ids {
            if a != b {
                out.push((a.clone(), b.clone()));
            }
        }
    }
    out
}

pub fn tpair(a: &str, b: &str) -> (TerminalId, TerminalId) {
    (a.into(), b.into())
}

pub fn tpairs(list: &[(&str, &str)]) -> BTreeSet<(TerminalId, TerminalId)> {
    list.iter().map(|(a, b)| tpair(a, b)).collect()
}

/// `pairs` together with each pair reversed.
pub fn with_reverse(pairs: &BTreeSet<(TerminalId, TerminalId)>) -> BTreeSet<(TerminalId, TerminalId)> {
    pairs.iter().flat_map(|(a, b)| [(a.clone(), b.clone()), (b.clone(), a.clone())]).collect()
}
