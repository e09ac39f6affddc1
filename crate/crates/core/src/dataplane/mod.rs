//! Deterministic OpenFlow data-plane simulation.
//!
//! Packets walk hop by hop from the injecting terminal. At each switch the flow
//! table either forwards, drops, or has no match, in which case the packet is
//! escalated synchronously to the controller.

mod system;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::controller::{Controller, ControllerError, Decision, DenyReason, PacketIn, RuleDelta};
use crate::model::{
    Action, EntryError, FlowEntry, FlowTable, Headers, OpenflowSwitch, PortNo, SwitchId, SwitchPort, Terminal,
    TerminalId, TopologyGraph, Vertex,
};

pub use system::{ProbeMode, SdnSystem};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DataplaneError {
    #[error("unknown terminal `{0}`")]
    UnknownTerminal(TerminalId),
    #[error("unknown switch `{0}`")]
    UnknownSwitch(SwitchId),
    #[error(transparent)]
    Entry(#[from] EntryError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error("forwarding loop: packet exceeded {0} switch hops")]
    ForwardingLoop(usize),
    #[error("controller permitted a packet at {0} but installed no matching entry there")]
    PermitWithoutRule(SwitchId),
}

/// A packet as seen by switches: four header fields and an opaque payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub headers: Headers,
    /// Application-layer content. Switches never look at it.
    pub payload: Vec<u8>,
}

impl Packet {
    pub fn new(headers: Headers) -> Self {
        Packet { headers, payload: Vec::new() }
    }

    pub fn between(src: &Terminal, dst: &Terminal) -> Self {
        Packet::new(Headers::between(src, dst))
    }

    pub fn with_payload(mut self, payload: impl Into<Vec<u8>>) -> Self {
        self.payload = payload.into();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    DropEntry,
    /// Forwarded out of a port with nothing plugged in.
    UnlinkedPort,
}

fn vertex_strings<S: serde::Serializer>(vs: &[Vertex], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(vs.iter().map(|v| v.to_string()))
}

/// How one injected packet's journey ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum TraceResult {
    Delivered {
        #[serde(serialize_with = "vertex_strings")]
        path: Vec<Vertex>,
    },
    DroppedAtSwitch {
        switch: SwitchId,
        reason: DropReason,
    },
    EscalatedThenDelivered {
        #[serde(serialize_with = "vertex_strings")]
        path: Vec<Vertex>,
    },
    EscalatedThenDenied {
        switch: SwitchId,
        reason: DenyReason,
    },
    /// Tables-only probe hit a switch with no matching entry.
    Unmatched {
        switch: SwitchId,
    },
    /// The injecting terminal has no link into the network.
    Isolated,
}

/// Outcome category, for comparing against expectations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Delivered,
    DroppedAtSwitch,
    EscalatedThenDelivered,
    EscalatedThenDenied,
    Unmatched,
    Isolated,
}

impl TraceResult {
    pub fn kind(&self) -> OutcomeKind {
        match self {
            TraceResult::Delivered { .. } => OutcomeKind::Delivered,
            TraceResult::DroppedAtSwitch { .. } => OutcomeKind::DroppedAtSwitch,
            TraceResult::EscalatedThenDelivered { .. } => OutcomeKind::EscalatedThenDelivered,
            TraceResult::EscalatedThenDenied { .. } => OutcomeKind::EscalatedThenDenied,
            TraceResult::Unmatched { .. } => OutcomeKind::Unmatched,
            TraceResult::Isolated => OutcomeKind::Isolated,
        }
    }

    pub fn path(&self) -> Option<&[Vertex]> {
        match self {
            TraceResult::Delivered { path } | TraceResult::EscalatedThenDelivered { path } => Some(path),
            _ => None,
        }
    }

    /// The terminal that received the packet, if any did.
    pub fn delivered_to(&self) -> Option<&TerminalId> {
        match self.path()?.last()? {
            Vertex::Terminal(t) => Some(t),
            Vertex::Port(_) => None,
        }
    }
}

/// Matches a packet against a flow table and bumps the winning entry's counter.
pub fn match_entry(table: &mut FlowTable, packet: &Packet, in_port: PortNo) -> Option<FlowEntry> {
    table.match_and_count(&packet.headers, in_port)
}

/// Table access and controller escalation, abstracted so that live injection
/// and side-effect-free probes share one traversal.
trait Fabric {
    fn lookup(&mut self, switch: &SwitchId, headers: &Headers, in_port: PortNo) -> Option<FlowEntry>;
    /// `None` means there is no controller to ask.
    fn escalate(&mut self, pi: PacketIn) -> Result<Option<Decision>, DataplaneError>;
}

struct Live<'a> {
    switches: &'a mut BTreeMap<SwitchId, OpenflowSwitch>,
    controller: &'a mut Controller,
}

impl Fabric for Live<'_> {
    fn lookup(&mut self, switch: &SwitchId, headers: &Headers, in_port: PortNo) -> Option<FlowEntry> {
        self.switches.get_mut(switch)?.table.match_and_count(headers, in_port)
    }

    fn escalate(&mut self, pi: PacketIn) -> Result<Option<Decision>, DataplaneError> {
        let decision = self.controller.handle_packet_in(&pi)?;
        if let Decision::Permit { rules, .. } = &decision {
            for (switch, entry) in rules {
                let sw = self.switches.get_mut(switch).ok_or_else(|| DataplaneError::UnknownSwitch(switch.clone()))?;
                sw.install(*entry)?;
            }
        }
        Ok(Some(decision))
    }
}

struct Probe<'a> {
    switches: &'a BTreeMap<SwitchId, OpenflowSwitch>,
    controller: Option<&'a Controller>,
    /// Rules a live run would have installed by now. Only forward entries end
    /// up here, so consulting it after the real table preserves precedence.
    overlay: BTreeMap<SwitchId, FlowTable>,
}

impl Fabric for Probe<'_> {
    fn lookup(&mut self, switch: &SwitchId, headers: &Headers, in_port: PortNo) -> Option<FlowEntry> {
        let hit = self.switches.get(switch)?.table.lookup(headers, in_port).copied();
        hit.or_else(|| self.overlay.get(switch)?.lookup(headers, in_port).copied())
    }

    fn escalate(&mut self, pi: PacketIn) -> Result<Option<Decision>, DataplaneError> {
        let Some(controller) = self.controller else {
            return Ok(None);
        };
        let decision = controller.evaluate(&pi)?;
        if let Decision::Permit { rules, .. } = &decision {
            for (switch, entry) in rules {
                self.overlay.entry(switch.clone()).or_default().insert(*entry);
            }
        }
        Ok(Some(decision))
    }
}

fn traverse(
    topo: &TopologyGraph,
    at: &TerminalId,
    packet: &Packet,
    fabric: &mut impl Fabric,
) -> Result<TraceResult, DataplaneError> {
    if topo.terminal(at).is_none() {
        return Err(DataplaneError::UnknownTerminal(at.clone()));
    }
    let Some(first) = topo.attachment(at) else {
        return Ok(TraceResult::Isolated);
    };
    let limit = 4 * topo.switch_count();
    let mut ingress = first.clone();
    let mut path = vec![Vertex::Terminal(at.clone())];
    let mut escalated = false;
    let mut visits = 0;

    loop {
        visits += 1;
        if visits > limit {
            return Err(DataplaneError::ForwardingLoop(limit));
        }
        let SwitchPort { switch, port: in_port } = ingress.clone();
        path.push(Vertex::Port(ingress.clone()));

        let entry = match fabric.lookup(&switch, &packet.headers, in_port) {
            Some(e) => e,
            None => {
                let pi = PacketIn { switch: switch.clone(), in_port, packet: packet.clone() };
                match fabric.escalate(pi)? {
                    None => return Ok(TraceResult::Unmatched { switch }),
                    Some(Decision::Deny(reason)) => return Ok(TraceResult::EscalatedThenDenied { switch, reason }),
                    Some(Decision::Permit { .. }) => {
                        escalated = true;
                        fabric
                            .lookup(&switch, &packet.headers, in_port)
                            .ok_or_else(|| DataplaneError::PermitWithoutRule(switch.clone()))?
                    }
                }
            }
        };

        let out_port = match entry.action {
            Action::Drop => return Ok(TraceResult::DroppedAtSwitch { switch, reason: DropReason::DropEntry }),
            Action::Forward(p) => p,
        };
        let egress = SwitchPort { switch: switch.clone(), port: out_port };
        if out_port != in_port {
            path.push(Vertex::Port(egress.clone()));
        }
        match topo.peer(&egress) {
            None => return Ok(TraceResult::DroppedAtSwitch { switch, reason: DropReason::UnlinkedPort }),
            Some(Vertex::Terminal(t)) => {
                path.push(Vertex::Terminal(t.clone()));
                return Ok(if escalated {
                    TraceResult::EscalatedThenDelivered { path }
                } else {
                    TraceResult::Delivered { path }
                });
            }
            Some(Vertex::Port(next)) => ingress = next.clone(),
        }
    }
}

/// The switches of a topology with their flow tables.
#[derive(Debug, Clone)]
pub struct Network {
    topology: Arc<TopologyGraph>,
    switches: BTreeMap<SwitchId, OpenflowSwitch>,
}

impl Network {
    /// Every switch starts with an empty table and so forwards nothing.
    pub fn new(topology: Arc<TopologyGraph>) -> Self {
        let switches = topology
            .switch_ids()
            .map(|id| (id.clone(), OpenflowSwitch::new(id.clone(), topology.ports(id).unwrap().iter().copied())))
            .collect();
        Network { topology, switches }
    }

    pub fn topology(&self) -> &Arc<TopologyGraph> {
        &self.topology
    }

    pub fn switch(&self, id: &SwitchId) -> Option<&OpenflowSwitch> {
        self.switches.get(id)
    }

    pub fn table(&self, id: &SwitchId) -> Option<&FlowTable> {
        self.switches.get(id).map(|s| &s.table)
    }

    fn switch_mut(&mut self, id: &SwitchId) -> Result<&mut OpenflowSwitch, DataplaneError> {
        self.switches.get_mut(id).ok_or_else(|| DataplaneError::UnknownSwitch(id.clone()))
    }

    /// Adds an entry; installing one that is already present is a no-op.
    pub fn install_entry(&mut self, switch: &SwitchId, entry: FlowEntry) -> Result<bool, DataplaneError> {
        Ok(self.switch_mut(switch)?.install(entry)?)
    }

    /// Removes an entry; removing an absent one is a no-op.
    pub fn remove_entry(&mut self, switch: &SwitchId, entry: &FlowEntry) -> Result<bool, DataplaneError> {
        let sw = self.switch_mut(switch)?;
        sw.check_entry(entry)?;
        Ok(sw.remove(entry))
    }

    pub fn apply_delta(&mut self, delta: &RuleDelta) -> Result<(), DataplaneError> {
        for (switch, d) in &delta.switches {
            for e in &d.removed {
                self.remove_entry(switch, e)?;
            }
            for e in &d.added {
                self.install_entry(switch, *e)?;
            }
        }
        Ok(())
    }

    /// All installed entries per switch, ignoring order and counters.
    pub fn entries(&self) -> BTreeMap<SwitchId, BTreeSet<FlowEntry>> {
        self.switches
            .iter()
            .filter(|(_, s)| !s.table.is_empty())
            .map(|(id, s)| (id.clone(), s.table.entries()))
            .collect()
    }

    pub fn entry_count(&self) -> usize {
        self.switches.values().map(|s| s.table.len()).sum()
    }

    /// Sends a packet into the network from `at`, escalating unmatched packets
    /// to `controller` and installing whatever it permits.
    pub fn inject_packet(
        &mut self,
        at: &TerminalId,
        packet: &Packet,
        controller: &mut Controller,
    ) -> Result<TraceResult, DataplaneError> {
        let topo = Arc::clone(&self.topology);
        let mut fabric = Live { switches: &mut self.switches, controller };
        traverse(&topo, at, packet, &mut fabric)
    }

    /// What [`inject_packet`](Self::inject_packet) would report, without
    /// changing tables, counters or controller state. With no controller,
    /// unmatched packets end as [`TraceResult::Unmatched`].
    pub fn probe(
        &self,
        at: &TerminalId,
        packet: &Packet,
        controller: Option<&Controller>,
    ) -> Result<TraceResult, DataplaneError> {
        let mut fabric = Probe { switches: &self.switches, controller, overlay: BTreeMap::new() };
        traverse(&self.topology, at, packet, &mut fabric)
    }
}
