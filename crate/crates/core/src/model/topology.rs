use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::fmt;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use super::validate::{validate_topology, Violation};
use super::{MacAddr, PortNo, SwitchId, SwitchPort, Terminal, TerminalId};

/// A vertex of the topology graph: a terminal or a switch port.
///
/// The derived ordering (terminals before ports, then by id and port number)
/// is the tie-break order for equal-cost paths.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Vertex {
    Terminal(TerminalId),
    Port(SwitchPort),
}

/// Link endpoints in topology.json: a terminal id string or `{"switch", "port"}`.
pub type Endpoint = Vertex;

impl Vertex {
    pub fn terminal(id: &str) -> Self {
        Vertex::Terminal(id.into())
    }

    pub fn port(switch: &str, port: u32) -> Self {
        Vertex::Port(SwitchPort::new(switch, port))
    }

    fn switch(&self) -> Option<&SwitchId> {
        match self {
            Vertex::Port(sp) => Some(&sp.switch),
            Vertex::Terminal(_) => None,
        }
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vertex::Terminal(t) => write!(f, "{t}"),
            Vertex::Port(sp) => write!(f, "{sp}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchSpec {
    pub id: SwitchId,
    pub ports: Vec<PortNo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub a: Endpoint,
    pub b: Endpoint,
    pub cost: f64,
}

impl LinkSpec {
    pub fn new(a: Endpoint, b: Endpoint, cost: f64) -> Self {
        LinkSpec { a, b, cost }
    }

    pub fn is_inner(&self) -> bool {
        matches!((self.a.switch(), self.b.switch()), (Some(x), Some(y)) if x == y)
    }

    pub fn touches(&self, v: &Vertex) -> bool {
        &self.a == v || &self.b == v
    }
}

impl fmt::Display for LinkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -- {}", self.a, self.b)
    }
}

/// Declared topology as read from topology.json.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub terminals: Vec<Terminal>,
    pub switches: Vec<SwitchSpec>,
    pub links: Vec<LinkSpec>,
}

impl TopologySpec {
    /// Same topology minus every link touching `v`.
    pub fn without_links_at(&self, v: &Vertex) -> Self {
        let mut out = self.clone();
        out.links.retain(|l| !l.touches(v));
        out
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PathError {
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("source and destination are the same terminal `{0}`")]
    SameEndpoints(TerminalId),
}

/// One traversal of a switch: packet enters on `in_port`, leaves on `out_port`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SwitchHop {
    pub switch: SwitchId,
    pub in_port: PortNo,
    pub out_port: PortNo,
}

fn vertices_as_strings<S: Serializer>(vs: &[Vertex], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(vs.iter().map(|v| v.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Path {
    #[serde(serialize_with = "vertices_as_strings")]
    pub vertices: Vec<Vertex>,
    pub cost: f64,
}

impl Path {
    /// Switch traversals along the path, in order.
    pub fn hops(&self) -> Vec<SwitchHop> {
        self.vertices
            .windows(2)
            .filter_map(|w| match (&w[0], &w[1]) {
                (Vertex::Port(a), Vertex::Port(b)) if a.switch == b.switch => {
                    Some(SwitchHop { switch: a.switch.clone(), in_port: a.port, out_port: b.port })
                }
                _ => None,
            })
            .collect()
    }

    pub fn reversed(&self) -> Path {
        let mut vertices = self.vertices.clone();
        vertices.reverse();
        Path { vertices, cost: self.cost }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("topology is malformed: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct TopologyError(pub Vec<Violation>);

/// Undirected weighted graph over terminals and switch ports.
///
/// Ports of the same switch are implicitly joined by zero-cost inner links.
/// Terminals without any link are allowed here (they are simply unreachable);
/// every other topology invariant must hold.
#[derive(Debug, Clone)]
pub struct TopologyGraph {
    spec: TopologySpec,
    terminals: BTreeMap<TerminalId, Terminal>,
    by_address: HashMap<(MacAddr, Ipv4Addr), TerminalId>,
    switches: BTreeMap<SwitchId, BTreeSet<PortNo>>,
    attachments: BTreeMap<TerminalId, SwitchPort>,
    peers: BTreeMap<SwitchPort, Vertex>,
    vertices: Vec<Vertex>,
    index: HashMap<Vertex, usize>,
    adj: Vec<Vec<(usize, f64)>>,
}

impl TopologyGraph {
    pub fn new(spec: TopologySpec) -> Result<Self, TopologyError> {
        let fatal: Vec<Violation> = validate_topology(&spec)
            .into_iter()
            .filter(|v| !matches!(v, Violation::TerminalNotAttached { .. }))
            .collect();
        if !fatal.is_empty() {
            return Err(TopologyError(fatal));
        }

        let terminals: BTreeMap<_, _> = spec.terminals.iter().map(|t| (t.id.clone(), t.clone())).collect();
        let by_address = spec.terminals.iter().map(|t| ((t.mac, t.ip), t.id.clone())).collect();
        let switches: BTreeMap<SwitchId, BTreeSet<PortNo>> =
            spec.switches.iter().map(|s| (s.id.clone(), s.ports.iter().copied().collect())).collect();

        let mut vertices: Vec<Vertex> = terminals.keys().cloned().map(Vertex::Terminal).collect();
        for (sw, ports) in &switches {
            vertices.extend(ports.iter().map(|p| Vertex::Port(SwitchPort { switch: sw.clone(), port: *p })));
        }
        vertices.sort();
        let index: HashMap<Vertex, usize> = vertices.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();

        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); vertices.len()];
        for (sw, ports) in &switches {
            let ids: Vec<usize> =
                ports.iter().map(|p| index[&Vertex::Port(SwitchPort { switch: sw.clone(), port: *p })]).collect();
            for &a in &ids {
                for &b in &ids {
                    if a != b {
                        adj[a].push((b, 0.0));
                    }
                }
            }
        }

        let mut attachments = BTreeMap::new();
        let mut peers = BTreeMap::new();
        for link in spec.links.iter().filter(|l| !l.is_inner()) {
            let (a, b) = (index[&link.a], index[&link.b]);
            adj[a].push((b, link.cost));
            adj[b].push((a, link.cost));
            for (this, other) in [(&link.a, &link.b), (&link.b, &link.a)] {
                match (this, other) {
                    (Vertex::Terminal(t), Vertex::Port(sp)) => {
                        attachments.insert(t.clone(), sp.clone());
                    }
                    (Vertex::Port(sp), _) => {
                        peers.insert(sp.clone(), other.clone());
                    }
                    _ => {}
                }
            }
        }
        for list in &mut adj {
            list.sort_by_key(|(n, _)| *n);
        }

        Ok(TopologyGraph { spec, terminals, by_address, switches, attachments, peers, vertices, index, adj })
    }

    pub fn spec(&self) -> &TopologySpec {
        &self.spec
    }

    pub fn terminal(&self, id: &TerminalId) -> Option<&Terminal> {
        self.terminals.get(id)
    }

    pub fn terminals(&self) -> impl Iterator<Item = &Terminal> {
        self.terminals.values()
    }

    pub fn terminal_ids(&self) -> impl Iterator<Item = &TerminalId> {
        self.terminals.keys()
    }

    /// The terminal owning both addresses, if any.
    pub fn terminal_by_address(&self, mac: MacAddr, ip: Ipv4Addr) -> Option<&Terminal> {
        self.by_address.get(&(mac, ip)).and_then(|id| self.terminals.get(id))
    }

    pub fn switch_ids(&self) -> impl Iterator<Item = &SwitchId> {
        self.switches.keys()
    }

    pub fn switch_count(&self) -> usize {
        self.switches.len()
    }

    pub fn ports(&self, switch: &SwitchId) -> Option<&BTreeSet<PortNo>> {
        self.switches.get(switch)
    }

    pub fn has_port(&self, switch: &SwitchId, port: PortNo) -> bool {
        self.switches.get(switch).is_some_and(|p| p.contains(&port))
    }

    /// The switch port a terminal is plugged into.
    pub fn attachment(&self, terminal: &TerminalId) -> Option<&SwitchPort> {
        self.attachments.get(terminal)
    }

    /// What sits on the other end of the cable plugged into `port`.
    pub fn peer(&self, port: &SwitchPort) -> Option<&Vertex> {
        self.peers.get(port)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Minimum-cost path between two distinct terminals, `None` when disconnected.
    ///
    /// Ties on cost are broken by fewer hops, then by the lexicographically
    /// smallest vertex sequence. Costs are compared exactly.
    pub fn least_cost_path(&self, src: &TerminalId, dst: &TerminalId) -> Result<Option<Path>, PathError> {
        let s = self.vertex_index(src)?;
        let d = self.vertex_index(dst)?;
        if s == d {
            return Err(PathError::SameEndpoints(src.clone()));
        }

        let dist = self.distances_to(d);
        if dist[s].is_none() {
            return Ok(None);
        }

        let mut vertices = vec![self.vertices[s].clone()];
        let mut at = s;
        while at != d {
            let (cost, hops) = dist[at].expect("on a shortest path");
            let next = self.adj[at]
                .iter()
                .find(|&&(n, w)| matches!(dist[n], Some((c, h)) if c + w == cost && h + 1 == hops))
                .map(|&(n, _)| n)
                .expect("shortest path has a tight successor");
            vertices.push(self.vertices[next].clone());
            at = next;
        }
        Ok(Some(Path { vertices, cost: dist[s].unwrap().0 }))
    }

    fn vertex_index(&self, id: &TerminalId) -> Result<usize, PathError> {
        self.index.get(&Vertex::Terminal(id.clone())).copied().ok_or_else(|| PathError::UnknownVertex(id.to_string()))
    }

    /// Dijkstra towards `target` over (cost, hop count) keys.
    fn distances_to(&self, target: usize) -> Vec<Option<(f64, u32)>> {
        #[derive(PartialEq)]
        struct Item(f64, u32, usize);
        impl Eq for Item {}
        impl Ord for Item {
            fn cmp(&self, other: &Self) -> Ordering {
                other.0.total_cmp(&self.0).then(other.1.cmp(&self.1)).then(other.2.cmp(&self.2))
            }
        }
        impl PartialOrd for Item {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }

        let mut dist: Vec<Option<(f64, u32)>> = vec![None; self.vertices.len()];
        let mut done = vec![false; self.vertices.len()];
        let mut heap = BinaryHeap::new();
        dist[target] = Some((0.0, 0));
        heap.push(Item(0.0, 0, target));
        while let Some(Item(cost, hops, v)) = heap.pop() {
            if done[v] {
                continue;
            }
            done[v] = true;
            // Terminals are leaves: a path may end at one but never pass through it.
            if v != target && matches!(self.vertices[v], Vertex::Terminal(_)) {
                continue;
            }
            for &(n, w) in &self.adj[v] {
                if done[n] {
                    continue;
                }
                let cand = (cost + w, hops + 1);
                let better = match dist[n] {
                    None => true,
                    Some((c, h)) => cand.0 < c || (cand.0 == c && cand.1 < h),
                };
                if better {
                    dist[n] = Some(cand);
                    heap.push(Item(cand.0, cand.1, n));
                }
            }
        }
        dist
    }
}
