//! Built-in fixtures: the two-switch example networks and the physiological
//! monitoring composition.

use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use crate::model::{
    Catalog, Endpoint, LinkSpec, MacAddr, PortNo, ServiceConsumer, SwitchPort, SwitchSpec, Terminal, TopologySpec,
    Transition, Vertex, WebService, Wsc,
};
use crate::policy::PolicyDocument;

/// A complete, self-contained input set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    pub name: String,
    pub topology: TopologySpec,
    pub services: Catalog,
    pub policy: PolicyDocument,
}

/// Terminal `t{k}` with address 10.0.0.k and MAC 00:00:00:00:00:0k.
pub fn indexed_terminal(k: u32) -> Terminal {
    let b = k.to_be_bytes();
    Terminal::new(format!("t{k}"), Ipv4Addr::new(10, b[1], b[2], b[3]), MacAddr::from_index(k))
}

fn switch(id: &str, ports: u32) -> SwitchSpec {
    SwitchSpec { id: id.into(), ports: (1..=ports).map(PortNo).collect() }
}

fn term(id: &str) -> Endpoint {
    Vertex::terminal(id)
}

fn port(sw: &str, p: u32) -> Endpoint {
    Vertex::Port(SwitchPort::new(sw, p))
}

fn link(a: Endpoint, b: Endpoint) -> LinkSpec {
    LinkSpec::new(a, b, 1.0)
}

fn pairs(list: &[(&str, &str)]) -> Vec<(String, String)> {
    list.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

/// Two switches, five attached terminals; t6 hosts no principal.
pub fn fig2_topology() -> TopologySpec {
    TopologySpec {
        terminals: [1, 2, 3, 5, 6].into_iter().map(indexed_terminal).collect(),
        switches: vec![switch("sw1", 4), switch("sw2", 3)],
        links: vec![
            link(term("t1"), port("sw1", 1)),
            link(term("t2"), port("sw1", 2)),
            link(term("t3"), port("sw1", 3)),
            link(port("sw1", 4), port("sw2", 1)),
            link(term("t5"), port("sw2", 2)),
            link(term("t6"), port("sw2", 3)),
        ],
    }
}

pub fn fig2_catalog() -> Catalog {
    Catalog {
        services: vec![
            WebService::new("s1", "t1", "/s1"),
            WebService::new("s2", "t2", "/s2"),
            WebService::new("s3", "t3", "/s3"),
        ],
        consumers: vec![ServiceConsumer::new("sc1", "t5")],
    }
}

pub fn fig2_policy() -> PolicyDocument {
    PolicyDocument { allow: pairs(&[("s1", "s2"), ("s1", "s3"), ("sc1", "s3")]), ..Default::default() }
}

pub fn fig2() -> Fixture {
    Fixture { name: "fig2".into(), topology: fig2_topology(), services: fig2_catalog(), policy: fig2_policy() }
}

/// Like fig2 with a sixth terminal t4 on sw2 that no principal owns.
pub fn fig4_topology() -> TopologySpec {
    let mut spec = fig2_topology();
    spec.terminals.insert(3, indexed_terminal(4));
    spec.switches[1] = switch("sw2", 4);
    spec.links.push(link(term("t4"), port("sw2", 4)));
    spec
}

pub fn fig4_catalog() -> Catalog {
    Catalog {
        services: fig2_catalog().services,
        consumers: vec![ServiceConsumer::new("sc1", "t6"), ServiceConsumer::new("sc2", "t5")],
    }
}

pub fn fig4_policy() -> PolicyDocument {
    PolicyDocument {
        allow: pairs(&[("s1", "s2"), ("s1", "s3"), ("sc1", "s3")]),
        malicious: vec!["sc2".into()],
        ..Default::default()
    }
}

pub fn fig4() -> Fixture {
    Fixture { name: "fig4".into(), topology: fig4_topology(), services: fig4_catalog(), policy: fig4_policy() }
}

pub fn spms_topology() -> TopologySpec {
    TopologySpec {
        terminals: (1..=7).map(indexed_terminal).collect(),
        switches: vec![switch("sw1", 5), switch("sw2", 4)],
        links: vec![
            link(term("t1"), port("sw1", 1)),
            link(term("t2"), port("sw1", 2)),
            link(term("t3"), port("sw1", 3)),
            link(term("t4"), port("sw1", 4)),
            link(port("sw1", 5), port("sw2", 1)),
            link(term("t5"), port("sw2", 2)),
            link(term("t6"), port("sw2", 3)),
            link(term("t7"), port("sw2", 4)),
        ],
    }
}

pub fn spms_catalog() -> Catalog {
    Catalog {
        services: vec![
            WebService::new("s1", "t1", "/SOA/login"),
            WebService::new("s2", "t2", "/SOA/monitoring"),
            WebService::new("s3", "t3", "/SOA/heart rate"),
            WebService::new("s4", "t4", "/SOA/temperature"),
            WebService::new("s5", "t5", "/SOA/alarming"),
        ],
        consumers: vec![ServiceConsumer::new("patient", "t6"), ServiceConsumer::new("physician", "t7")],
    }
}

pub fn spms_wsc() -> Wsc {
    Wsc {
        initial: "s1".into(),
        services: ["s1", "s2", "s3", "s4", "s5"].into_iter().map(Into::into).collect(),
        events: ["c1", "c2", "c3", "c4"].into_iter().map(Into::into).collect(),
        transitions: [
            Transition::new("s1", "c1", "s2"),
            Transition::new("s3", "c2", "s2"),
            Transition::new("s4", "c3", "s2"),
            Transition::new("s2", "c4", "s5"),
        ]
        .into_iter()
        .collect(),
    }
}

/// Consumer grants on top of the composition.
pub fn spms_policy() -> PolicyDocument {
    PolicyDocument {
        allow: pairs(&[("patient", "s1"), ("physician", "s1")]),
        composition: Some(spms_wsc()),
        ..Default::default()
    }
}

pub fn spms() -> Fixture {
    Fixture { name: "spms".into(), topology: spms_topology(), services: spms_catalog(), policy: spms_policy() }
}

pub fn builtin_fixtures() -> Vec<Fixture> {
    vec![fig2(), fig4(), spms()]
}

pub fn fixture_by_name(name: &str) -> Option<Fixture> {
    builtin_fixtures().into_iter().find(|f| f.name == name)
}
