mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sdnguard::controller::{Decision, PacketIn};
use sdnguard::dataplane::{
    match_entry, DataplaneError, DropReason, Network, OutcomeKind, Packet, ProbeMode, SdnSystem, TraceResult,
};
use sdnguard::harness::fixtures::{fig2, fig2_topology, indexed_terminal};
use sdnguard::harness::generate::random_instance;
use sdnguard::harness::CompiledModel;
use sdnguard::model::{
    EntryError, FlowEntry, FlowTable, Headers, LinkSpec, PortNo, SwitchId, SwitchSpec, TerminalId, TopologyGraph,
    TopologySpec, Vertex,
};
use sdnguard::policy::Rspm;

fn term(k: u32) -> sdnguard::model::Terminal {
    indexed_terminal(k)
}

fn packet(a: u32, b: u32) -> Packet {
    Packet::between(&term(a), &term(b))
}

fn fig2_system() -> SdnSystem {
    CompiledModel::from_fixture(&fig2()).unwrap().deploy().unwrap()
}

fn sw(id: &str) -> SwitchId {
    id.into()
}

#[test]
fn exact_match_and_in_port_mismatch() {
    let mut table = FlowTable::new();
    let e = FlowEntry::forward(Headers::between(&term(1), &term(2)), PortNo(1), PortNo(2));
    table.insert(e);
    assert_eq!(match_entry(&mut table, &packet(1, 2), PortNo(1)), Some(e));
    assert_eq!(match_entry(&mut table, &packet(1, 2), PortNo(3)), None);
    assert_eq!(match_entry(&mut table, &packet(1, 3), PortNo(1)), None);
    assert_eq!(table.counter(&e), Some(1));
}

#[test]
fn drop_wins_in_either_insertion_order() {
    let drop = FlowEntry::drop_all_from(&term(5));
    let fwd = FlowEntry::forward(Headers::between(&term(5), &term(3)), PortNo(2), PortNo(1));
    for order in [[drop, fwd], [fwd, drop]] {
        let mut table = FlowTable::new();
        for e in order {
            table.insert(e);
        }
        assert_eq!(match_entry(&mut table, &packet(5, 3), PortNo(2)), Some(drop));
        assert_eq!(table.counter(&drop), Some(1));
        assert_eq!(table.counter(&fwd), Some(0));
    }
}

#[test]
fn first_packet_escalates_second_is_forwarded() {
    let mut sys = fig2_system();
    let first = sys.inject(&"t1".into(), &packet(1, 2)).unwrap();
    assert_eq!(
        first,
        TraceResult::EscalatedThenDelivered {
            path: vec![Vertex::terminal("t1"), Vertex::port("sw1", 1), Vertex::port("sw1", 2), Vertex::terminal("t2")]
        }
    );
    let second = sys.inject(&"t1".into(), &packet(1, 2)).unwrap();
    assert_eq!(second.kind(), OutcomeKind::Delivered);
    assert_eq!(second.path(), first.path());
    assert_eq!(sys.controller.stats().packet_ins, 1);
}

#[test]
fn forbidden_pair_is_denied() {
    let mut sys = fig2_system();
    let r = sys.inject(&"t2".into(), &packet(2, 3)).unwrap();
    assert!(matches!(r, TraceResult::EscalatedThenDenied { ref switch, .. } if switch == &sw("sw1")));
    assert_eq!(sys.network.entry_count(), 0);
}

#[test]
fn explicit_deny_drops_at_switch() {
    let mut fx = fig2();
    fx.policy.deny.push(("s2".into(), "s3".into()));
    let mut sys = CompiledModel::from_fixture(&fx).unwrap().deploy().unwrap();
    let r = sys.inject(&"t2".into(), &packet(2, 3)).unwrap();
    assert_eq!(r, TraceResult::DroppedAtSwitch { switch: sw("sw1"), reason: DropReason::DropEntry });
    assert_eq!(sys.controller.stats().packet_ins, 0);
    let other = sys.inject(&"t2".into(), &packet(2, 1)).unwrap();
    assert_eq!(other.kind(), OutcomeKind::EscalatedThenDenied);
}

#[test]
fn install_remove_semantics() {
    let topo = Arc::new(TopologyGraph::new(fig2_topology()).unwrap());
    let mut net = Network::new(topo);
    let e = FlowEntry::forward(Headers::between(&term(1), &term(2)), PortNo(1), PortNo(2));
    let before = net.entries();
    assert!(net.install_entry(&sw("sw1"), e).unwrap());
    assert!(!net.install_entry(&sw("sw1"), e).unwrap());
    assert_eq!(net.table(&sw("sw1")).unwrap().len(), 1);
    assert!(net.remove_entry(&sw("sw1"), &e).unwrap());
    assert!(!net.remove_entry(&sw("sw1"), &e).unwrap());
    assert_eq!(net.entries(), before);

    let bad = FlowEntry::forward(Headers::between(&term(1), &term(2)), PortNo(1), PortNo(9));
    assert_eq!(
        net.install_entry(&sw("sw1"), bad),
        Err(DataplaneError::Entry(EntryError::UnknownPort { switch: sw("sw1"), port: PortNo(9) }))
    );
    assert_eq!(net.install_entry(&sw("sw9"), e), Err(DataplaneError::UnknownSwitch(sw("sw9"))));
}

#[test]
fn counters_track_matches_on_every_hop() {
    let mut sys = fig2_system();
    for _ in 0..3 {
        sys.inject(&"t5".into(), &packet(5, 3)).unwrap();
    }
    for _ in 0..2 {
        sys.inject(&"t3".into(), &packet(3, 5)).unwrap();
    }
    let there = Headers::between(&term(5), &term(3));
    let sw2 = sys.network.table(&sw("sw2")).unwrap();
    let sw1 = sys.network.table(&sw("sw1")).unwrap();
    assert_eq!(sw2.counter(&FlowEntry::forward(there, PortNo(2), PortNo(1))), Some(3));
    assert_eq!(sw1.counter(&FlowEntry::forward(there, PortNo(4), PortNo(3))), Some(3));
    assert_eq!(sw1.counter(&FlowEntry::forward(there.reversed(), PortNo(3), PortNo(4))), Some(2));
    assert_eq!(sw2.counter(&FlowEntry::forward(there.reversed(), PortNo(1), PortNo(2))), Some(2));
}

#[test]
fn empty_policy_never_delivers() {
    let topo = Arc::new(TopologyGraph::new(fig2_topology()).unwrap());
    let mut sys = SdnSystem::new(topo);
    sys.upload(Rspm::default()).unwrap();
    for (a, b) in common::ordered_pairs(&fig2_topology()) {
        let t = sys.topology().terminal(&a).unwrap().clone();
        let d = sys.topology().terminal(&b).unwrap().clone();
        let r = sys.inject(&a, &Packet::between(&t, &d)).unwrap();
        assert_eq!(r.kind(), OutcomeKind::EscalatedThenDenied, "{a} -> {b}");
    }
}

#[test]
fn payload_is_ignored_by_switches() {
    let mut sys = fig2_system();
    let a = sys.inject(&"t1".into(), &packet(1, 3).with_payload("GET /admin")).unwrap();
    let b = sys.inject(&"t1".into(), &packet(1, 3).with_payload("anything else")).unwrap();
    assert_eq!(a.kind(), OutcomeKind::EscalatedThenDelivered);
    assert_eq!(b.kind(), OutcomeKind::Delivered);
}

#[test]
fn spoofed_headers_from_wrong_port_are_denied() {
    let mut sys = fig2_system();
    sys.inject(&"t1".into(), &packet(1, 3)).unwrap();
    let r = sys.inject(&"t2".into(), &packet(1, 3)).unwrap();
    assert_eq!(r.kind(), OutcomeKind::EscalatedThenDenied);
}

fn triangle() -> TopologySpec {
    let ports = |n: u32| (1..=n).map(PortNo).collect::<Vec<_>>();
    TopologySpec {
        terminals: vec![term(1), term(2)],
        switches: vec![
            SwitchSpec { id: "sw1".into(), ports: ports(4) },
            SwitchSpec { id: "sw2".into(), ports: ports(3) },
            SwitchSpec { id: "sw3".into(), ports: ports(2) },
        ],
        links: vec![
            LinkSpec::new(Vertex::terminal("t1"), Vertex::port("sw1", 1), 1.0),
            LinkSpec::new(Vertex::terminal("t2"), Vertex::port("sw2", 3), 1.0),
            LinkSpec::new(Vertex::port("sw1", 2), Vertex::port("sw2", 1), 1.0),
            LinkSpec::new(Vertex::port("sw2", 2), Vertex::port("sw3", 1), 1.0),
            LinkSpec::new(Vertex::port("sw3", 2), Vertex::port("sw1", 3), 1.0),
        ],
    }
}

#[test]
fn forwarding_loop_is_caught() {
    let topo = Arc::new(TopologyGraph::new(triangle()).unwrap());
    let mut sys = SdnSystem::new(Arc::clone(&topo));
    sys.upload(Rspm::default()).unwrap();
    let h = Headers::between(&term(1), &term(2));
    for (s, i, o) in [("sw1", 1, 2), ("sw2", 1, 2), ("sw3", 1, 2), ("sw1", 3, 2)] {
        sys.network.install_entry(&sw(s), FlowEntry::forward(h, PortNo(i), PortNo(o))).unwrap();
    }
    assert_eq!(sys.inject(&"t1".into(), &packet(1, 2)), Err(DataplaneError::ForwardingLoop(12)));
}

#[test]
fn unlinked_port_and_isolated_terminal() {
    let topo = Arc::new(TopologyGraph::new(triangle()).unwrap());
    let mut sys = SdnSystem::new(topo);
    sys.upload(Rspm::default()).unwrap();
    let h = Headers::between(&term(1), &term(2));
    sys.network.install_entry(&sw("sw1"), FlowEntry::forward(h, PortNo(1), PortNo(4))).unwrap();
    assert_eq!(
        sys.inject(&"t1".into(), &packet(1, 2)).unwrap(),
        TraceResult::DroppedAtSwitch { switch: sw("sw1"), reason: DropReason::UnlinkedPort }
    );

    let spec = fig2_topology().without_links_at(&Vertex::terminal("t5"));
    let mut sys = SdnSystem::new(Arc::new(TopologyGraph::new(spec).unwrap()));
    sys.upload(Rspm::default()).unwrap();
    assert_eq!(sys.inject(&"t5".into(), &packet(5, 3)).unwrap(), TraceResult::Isolated);
    assert_eq!(sys.inject(&"t7".into(), &packet(5, 3)), Err(DataplaneError::UnknownTerminal(TerminalId::from("t7"))));
}

#[test]
fn probes_leave_state_untouched() {
    let mut sys = fig2_system();
    sys.inject(&"t1".into(), &packet(1, 2)).unwrap();
    let snapshot = |s: &SdnSystem| {
        let counters: Vec<(SwitchId, Vec<(FlowEntry, u64)>)> = s
            .topology()
            .switch_ids()
            .map(|id| (id.clone(), s.network.table(id).unwrap().iter().map(|(e, c)| (*e, c)).collect()))
            .collect();
        (counters, s.controller.installed(), s.controller.stats())
    };
    let before = snapshot(&sys);
    let probed = sys.probe(&"t5".into(), &packet(5, 3), ProbeMode::WithController).unwrap();
    assert_eq!(probed.kind(), OutcomeKind::EscalatedThenDelivered);
    assert_eq!(sys.probe(&"t1".into(), &packet(1, 2), ProbeMode::TablesOnly).unwrap().kind(), OutcomeKind::Delivered);
    assert_eq!(
        sys.probe(&"t5".into(), &packet(5, 3), ProbeMode::TablesOnly).unwrap(),
        TraceResult::Unmatched { switch: sw("sw2") }
    );
    assert_eq!(snapshot(&sys), before);

    let live = sys.inject(&"t5".into(), &packet(5, 3)).unwrap();
    assert_eq!(live, probed);
}

fn routed_model(seed: u64) -> CompiledModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inst = random_instance(&mut rng, 6, 3, 12).unwrap();
    CompiledModel::build(&inst.topology, &inst.catalog, &inst.policy).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn delivered_paths_follow_least_cost_routes(seed in any::<u64>()) {
        let model = routed_model(seed);
        let mut sys = model.deploy().unwrap();
        let topo = Arc::clone(&model.topology);
        for (a, b) in model.rspm.allow_t.clone() {
            let (src, dst) = (topo.terminal(&a).unwrap(), topo.terminal(&b).unwrap());
            let edge = topo.attachment(&a).unwrap();
            let pi = PacketIn { switch: edge.switch.clone(), in_port: edge.port, packet: Packet::between(src, dst) };
            let decision = sys.controller.evaluate(&pi).unwrap();
            let trace = sys.inject(&a, &Packet::between(src, dst)).unwrap();
            let best = topo.least_cost_path(&a, &b).unwrap().unwrap();
            prop_assert_eq!(trace.delivered_to(), Some(&b));
            let path = trace.path().unwrap();
            prop_assert_eq!(path.first(), Some(&Vertex::Terminal(a.clone())));
            if let Decision::Permit { path: planned, .. } = decision {
                prop_assert_eq!(path, &planned.vertices[..]);
                prop_assert_eq!(planned.cost, best.cost);
            } else {
                prop_assert_eq!(trace.kind(), OutcomeKind::Delivered);
            }
        }
    }

    #[test]
    fn identical_injections_give_identical_traces(seed in any::<u64>()) {
        let model = routed_model(seed);
        let pairs = common::ordered_pairs(model.topology.spec());
        let run = || {
            let mut sys = model.deploy().unwrap();
            let topo = Arc::clone(sys.topology());
            let traces: Vec<TraceResult> = pairs
                .iter()
                .chain(pairs.iter().rev())
                .map(|(a, b)| sys.inject(a, &Packet::between(topo.terminal(a).unwrap(), topo.terminal(b).unwrap())).unwrap())
                .collect();
            let tables: Vec<Vec<(FlowEntry, u64)>> = topo
                .switch_ids()
                .map(|id| sys.network.table(id).unwrap().iter().map(|(e, c)| (*e, c)).collect())
                .collect();
            (traces, tables)
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn network_mirrors_controller(seed in any::<u64>()) {
        let model = routed_model(seed);
        let mut sys = model.deploy().unwrap();
        let topo = Arc::clone(sys.topology());
        for (a, b) in common::ordered_pairs(topo.spec()) {
            sys.inject(&a, &Packet::between(topo.terminal(&a).unwrap(), topo.terminal(&b).unwrap())).unwrap();
        }
        prop_assert_eq!(sys.network.entries(), sys.controller.installed());
    }
}
