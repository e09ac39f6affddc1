use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::net::Ipv4Addr;

use serde::Serialize;

use super::topology::{TopologySpec, Vertex};
use super::wsc::{EventId, Wsc};
use super::{Catalog, ConsumerId, MacAddr, PortNo, ServiceId, SwitchId, SwitchPort, TerminalId};

/// One broken model invariant, naming the offending identifiers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DuplicateTerminalId { terminal: TerminalId },
    DuplicateIp { ip: Ipv4Addr, terminals: Vec<TerminalId> },
    DuplicateMac { mac: MacAddr, terminals: Vec<TerminalId> },
    DuplicateSwitchId { switch: SwitchId },
    InvalidPortNumber { switch: SwitchId, port: PortNo },
    DuplicatePort { switch: SwitchId, port: PortNo },
    UnknownEndpoint { endpoint: String },
    SelfLoopLink { link: String },
    TerminalToTerminalLink { link: String },
    InnerLinkCost { link: String },
    InvalidLinkCost { link: String },
    TerminalNotAttached { terminal: TerminalId },
    TerminalMultiplyAttached { terminal: TerminalId },
    PortMultiplyLinked { port: String },
    DuplicateServiceId { service: ServiceId },
    DuplicateConsumerId { consumer: ConsumerId },
    PrincipalIdCollision { id: String },
    DuplicateUri { uri: String, services: Vec<ServiceId> },
    UnknownTerminalBinding { principal: String, terminal: TerminalId },
    SharedTerminal { terminal: TerminalId, principals: Vec<String> },
    InitialNotMember { service: ServiceId },
    TransitionServiceNotMember { service: ServiceId, transition: String },
    UndeclaredEvent { event: EventId, transition: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        let list = |v: &[_]| v.iter().map(|x: &TerminalId| x.to_string()).collect::<Vec<_>>().join(", ");
        match self {
            DuplicateTerminalId { terminal } => write!(f, "terminal id {terminal} declared twice"),
            DuplicateIp { ip, terminals } => write!(f, "IP {ip} shared by {}", list(terminals)),
            DuplicateMac { mac, terminals } => write!(f, "MAC {mac} shared by {}", list(terminals)),
            DuplicateSwitchId { switch } => write!(f, "switch id {switch} declared twice"),
            InvalidPortNumber { switch, port } => write!(f, "switch {switch} declares invalid port {}", port.0),
            DuplicatePort { switch, port } => write!(f, "switch {switch} declares port {} twice", port.0),
            UnknownEndpoint { endpoint } => write!(f, "link endpoint {endpoint} is not declared"),
            SelfLoopLink { link } => write!(f, "link {link} connects a vertex to itself"),
            TerminalToTerminalLink { link } => write!(f, "link {link} joins two terminals directly"),
            InnerLinkCost { link } => write!(f, "inner-switch link {link} must have cost 0"),
            InvalidLinkCost { link } => write!(f, "link {link} must have a finite positive cost"),
            TerminalNotAttached { terminal } => write!(f, "terminal {terminal} is not attached to any switch"),
            TerminalMultiplyAttached { terminal } => write!(f, "terminal {terminal} has more than one link"),
            PortMultiplyLinked { port } => write!(f, "port {port} carries more than one link"),
            DuplicateServiceId { service } => write!(f, "service id {service} declared twice"),
            DuplicateConsumerId { consumer } => write!(f, "consumer id {consumer} declared twice"),
            PrincipalIdCollision { id } => write!(f, "id {id} names both a service and a consumer"),
            DuplicateUri { uri, services } => write!(
                f,
                "URI {uri} shared by services {}",
                services.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", ")
            ),
            UnknownTerminalBinding { principal, terminal } => {
                write!(f, "{principal} is bound to undeclared terminal {terminal}")
            }
            SharedTerminal { terminal, principals } => {
                write!(f, "terminal {terminal} hosts several principals: {}", principals.join(", "))
            }
            InitialNotMember { service } => write!(f, "initial state {service} is not in the service set"),
            TransitionServiceNotMember { service, transition } => {
                write!(f, "transition {transition} references {service}, not in the service set")
            }
            UndeclaredEvent { event, transition } => {
                write!(f, "transition {transition} uses undeclared event {event}")
            }
        }
    }
}

/// Sorted, de-duplicated list of violations. Empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_vec(mut violations: Vec<Violation>) -> Self {
        violations.sort();
        violations.dedup();
        ValidationReport { violations }
    }

    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn duplicates<K: Ord + Clone, V: Ord + Clone>(items: impl IntoIterator<Item = (K, V)>) -> Vec<(K, Vec<V>)> {
    let mut groups: BTreeMap<K, Vec<V>> = BTreeMap::new();
    for (k, v) in items {
        groups.entry(k).or_default().push(v);
    }
    groups
        .into_iter()
        .filter(|(_, vs)| vs.len() > 1)
        .map(|(k, mut vs)| {
            vs.sort();
            (k, vs)
        })
        .collect()
}

/// Topology invariants only. Used by [`validate_model`] and by graph construction.
pub fn validate_topology(spec: &TopologySpec) -> Vec<Violation> {
    let mut out = Vec::new();

    for (terminal, _) in duplicates(spec.terminals.iter().map(|t| (t.id.clone(), ()))) {
        out.push(Violation::DuplicateTerminalId { terminal });
    }
    for (ip, terminals) in duplicates(spec.terminals.iter().map(|t| (t.ip, t.id.clone()))) {
        out.push(Violation::DuplicateIp { ip, terminals });
    }
    for (mac, terminals) in duplicates(spec.terminals.iter().map(|t| (t.mac, t.id.clone()))) {
        out.push(Violation::DuplicateMac { mac, terminals });
    }
    for (switch, _) in duplicates(spec.switches.iter().map(|s| (s.id.clone(), ()))) {
        out.push(Violation::DuplicateSwitchId { switch });
    }

    let mut ports: BTreeSet<SwitchPort> = BTreeSet::new();
    for sw in &spec.switches {
        for (port, _) in duplicates(sw.ports.iter().map(|p| (*p, ()))) {
            out.push(Violation::DuplicatePort { switch: sw.id.clone(), port });
        }
        for &port in &sw.ports {
            if port.0 == 0 {
                out.push(Violation::InvalidPortNumber { switch: sw.id.clone(), port });
            }
            ports.insert(SwitchPort { switch: sw.id.clone(), port });
        }
    }
    let terminals: BTreeSet<&TerminalId> = spec.terminals.iter().map(|t| &t.id).collect();
    let declared = |v: &Vertex| match v {
        Vertex::Terminal(t) => terminals.contains(t),
        Vertex::Port(sp) => ports.contains(sp),
    };

    let mut degree: BTreeMap<Vertex, usize> = BTreeMap::new();
    for link in &spec.links {
        let name = link.to_string();
        let mut known = true;
        for end in [&link.a, &link.b] {
            if !declared(end) {
                out.push(Violation::UnknownEndpoint { endpoint: end.to_string() });
                known = false;
            }
        }
        if link.a == link.b {
            out.push(Violation::SelfLoopLink { link: name });
            continue;
        }
        if matches!((&link.a, &link.b), (Vertex::Terminal(_), Vertex::Terminal(_))) {
            out.push(Violation::TerminalToTerminalLink { link: name.clone() });
        }
        if link.is_inner() {
            if link.cost != 0.0 {
                out.push(Violation::InnerLinkCost { link: name });
            }
            continue;
        }
        if !(link.cost.is_finite() && link.cost > 0.0) {
            out.push(Violation::InvalidLinkCost { link: name });
        }
        if known {
            *degree.entry(link.a.clone()).or_default() += 1;
            *degree.entry(link.b.clone()).or_default() += 1;
        }
    }

    for t in &spec.terminals {
        match degree.get(&Vertex::Terminal(t.id.clone())).copied().unwrap_or(0) {
            0 => out.push(Violation::TerminalNotAttached { terminal: t.id.clone() }),
            1 => {}
            _ => out.push(Violation::TerminalMultiplyAttached { terminal: t.id.clone() }),
        }
    }
    for (v, n) in &degree {
        if let (Vertex::Port(sp), true) = (v, *n > 1) {
            out.push(Violation::PortMultiplyLinked { port: sp.to_string() });
        }
    }
    out
}

/// Checks every model invariant across topology, services and consumers.
///
/// Never fails: problems become report entries. The report is sorted, so
/// permuting the inputs yields the same report.
pub fn validate_model(topology: &TopologySpec, catalog: &Catalog) -> ValidationReport {
    let mut out = validate_topology(topology);

    for (service, _) in duplicates(catalog.services.iter().map(|s| (s.id.clone(), ()))) {
        out.push(Violation::DuplicateServiceId { service });
    }
    for (consumer, _) in duplicates(catalog.consumers.iter().map(|c| (c.id.clone(), ()))) {
        out.push(Violation::DuplicateConsumerId { consumer });
    }
    let service_ids: BTreeSet<&str> = catalog.services.iter().map(|s| s.id.as_str()).collect();
    for c in &catalog.consumers {
        if service_ids.contains(c.id.as_str()) {
            out.push(Violation::PrincipalIdCollision { id: c.id.to_string() });
        }
    }
    for (uri, services) in duplicates(catalog.services.iter().map(|s| (s.uri.clone(), s.id.clone()))) {
        out.push(Violation::DuplicateUri { uri, services });
    }

    let terminals: BTreeSet<&TerminalId> = topology.terminals.iter().map(|t| &t.id).collect();
    let bindings = catalog
        .services
        .iter()
        .map(|s| (s.id.to_string(), &s.terminal))
        .chain(catalog.consumers.iter().map(|c| (c.id.to_string(), &c.terminal)));
    let mut hosted: Vec<(TerminalId, String)> = Vec::new();
    for (principal, terminal) in bindings {
        if !terminals.contains(terminal) {
            out.push(Violation::UnknownTerminalBinding { principal: principal.clone(), terminal: terminal.clone() });
        }
        hosted.push((terminal.clone(), principal));
    }
    for (terminal, principals) in duplicates(hosted) {
        out.push(Violation::SharedTerminal { terminal, principals });
    }

    ValidationReport::from_vec(out)
}

pub fn validate_wsc(wsc: &Wsc) -> ValidationReport {
    let mut out = Vec::new();
    if !wsc.services.contains(&wsc.initial) {
        out.push(Violation::InitialNotMember { service: wsc.initial.clone() });
    }
    for t in &wsc.transitions {
        for s in [&t.src, &t.dst] {
            if !wsc.services.contains(s) {
                out.push(Violation::TransitionServiceNotMember { service: s.clone(), transition: t.to_string() });
            }
        }
        if !wsc.events.contains(&t.event) {
            out.push(Violation::UndeclaredEvent { event: t.event.clone(), transition: t.to_string() });
        }
    }
    ValidationReport::from_vec(out)
}
