//! The controller-side access-control algorithm.
//!
//! The controller holds the latest uploaded terminal policy. Deny rules are
//! pushed to the source's edge switch as soon as a policy is uploaded; allow
//! rules are synthesised along the least-cost path when the first packet of a
//! permitted pair reaches the controller as a packet-in.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::dataplane::Packet;
use crate::model::{FlowEntry, Headers, Path, PathError, PortNo, SwitchId, TerminalId, TopologyGraph};
use crate::policy::{PolicyError, Rspm, TerminalPair};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ControllerError {
    #[error("no policy has been uploaded")]
    NoPolicyUploaded,
    #[error("switch {switch} has no port {port}")]
    UnknownPort { switch: SwitchId, port: PortNo },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("pair ({0}, {1}) is not allowed by the current policy")]
    PairNotAllowed(TerminalId, TerminalId),
    #[error("no path between {0} and {1}")]
    NoPath(TerminalId, TerminalId),
}

/// A packet escalated by a switch that had no matching entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketIn {
    pub switch: SwitchId,
    pub in_port: PortNo,
    pub packet: Packet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DenyReason {
    UnknownSource,
    UnknownDestination,
    SourceBlocked,
    PairDenied,
    NotAllowed,
    NoPath,
    /// Headers name a permitted source, but the packet entered the network
    /// somewhere that source is not attached.
    WrongIngress,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    /// Rules for every switch on the path, both directions.
    Permit {
        path: Path,
        rules: Vec<(SwitchId, FlowEntry)>,
    },
    Deny(DenyReason),
}

impl Decision {
    pub fn is_permit(&self) -> bool {
        matches!(self, Decision::Permit { .. })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ControllerStats {
    pub packet_ins: u64,
    pub rules_installed: u64,
    pub denied: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SwitchDelta {
    pub added: Vec<FlowEntry>,
    pub removed: Vec<FlowEntry>,
}

/// Exact per-switch rule changes to push to the data plane.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RuleDelta {
    pub switches: BTreeMap<SwitchId, SwitchDelta>,
}

impl RuleDelta {
    pub fn is_empty(&self) -> bool {
        self.switches.values().all(|d| d.added.is_empty() && d.removed.is_empty())
    }

    pub fn added_count(&self) -> usize {
        self.switches.values().map(|d| d.added.len()).sum()
    }

    pub fn removed_count(&self) -> usize {
        self.switches.values().map(|d| d.removed.len()).sum()
    }
}

type Rule = (SwitchId, FlowEntry);

/// Tracks presence changes of rules across one mutation.
#[derive(Default)]
struct ChangeLog {
    before: BTreeMap<Rule, bool>,
}

impl ChangeLog {
    fn touch(&mut self, rule: &Rule, present: bool) {
        self.before.entry(rule.clone()).or_insert(present);
    }

    fn into_delta(self, installed: &BTreeMap<Rule, u32>) -> RuleDelta {
        let mut delta = RuleDelta::default();
        for ((switch, entry), was) in self.before {
            let now = installed.contains_key(&(switch.clone(), entry));
            if was != now {
                let d = delta.switches.entry(switch).or_default();
                if now {
                    d.added.push(entry);
                } else {
                    d.removed.push(entry);
                }
            }
        }
        delta.switches.retain(|_, d| !(d.added.is_empty() && d.removed.is_empty()));
        delta
    }
}

#[derive(Debug, Clone)]
pub struct Controller {
    topology: Arc<TopologyGraph>,
    rspm: Option<Rspm>,
    /// Forward rules per permitted pair that has been exercised.
    flows: BTreeMap<TerminalPair, Vec<Rule>>,
    drops: BTreeSet<Rule>,
    /// Installed rules with the number of owners (pairs or the deny set) holding them.
    installed: BTreeMap<Rule, u32>,
    stats: ControllerStats,
}

impl Controller {
    pub fn new(topology: Arc<TopologyGraph>) -> Self {
        Controller {
            topology,
            rspm: None,
            flows: BTreeMap::new(),
            drops: BTreeSet::new(),
            installed: BTreeMap::new(),
            stats: ControllerStats::default(),
        }
    }

    pub fn topology(&self) -> &Arc<TopologyGraph> {
        &self.topology
    }

    pub fn rspm(&self) -> Option<&Rspm> {
        self.rspm.as_ref()
    }

    pub fn stats(&self) -> ControllerStats {
        self.stats
    }

    /// Everything the controller believes is installed, per switch.
    pub fn installed(&self) -> BTreeMap<SwitchId, BTreeSet<FlowEntry>> {
        let mut out: BTreeMap<SwitchId, BTreeSet<FlowEntry>> = BTreeMap::new();
        for (switch, entry) in self.installed.keys() {
            out.entry(switch.clone()).or_default().insert(*entry);
        }
        out
    }

    pub fn installed_count(&self) -> usize {
        self.installed.len()
    }

    /// Pairs whose forward rules are currently installed.
    pub fn active_pairs(&self) -> impl Iterator<Item = &TerminalPair> {
        self.flows.keys()
    }

    fn acquire(&mut self, rule: Rule, log: &mut ChangeLog) {
        let n = self.installed.entry(rule.clone()).or_insert(0);
        log.touch(&rule, *n > 0);
        *n += 1;
    }

    fn release(&mut self, rule: &Rule, log: &mut ChangeLog) {
        if let Some(n) = self.installed.get_mut(rule) {
            log.touch(rule, true);
            *n -= 1;
            if *n == 0 {
                self.installed.remove(rule);
            }
        }
    }

    fn deny_rules(&self, rspm: &Rspm) -> BTreeSet<Rule> {
        let topo = &self.topology;
        let mut out = BTreeSet::new();
        for t in &rspm.deny_all_from {
            if let (Some(term), Some(edge)) = (topo.terminal(t), topo.attachment(t)) {
                out.insert((edge.switch.clone(), FlowEntry::drop_all_from(term)));
            }
        }
        for (a, b) in &rspm.deny_t {
            if let (Some(src), Some(dst), Some(edge)) = (topo.terminal(a), topo.terminal(b), topo.attachment(a)) {
                out.insert((edge.switch.clone(), FlowEntry::drop_pair(src, dst)));
            }
        }
        out
    }

    /// Installs a policy. Deny rules are produced immediately; allow rules wait
    /// for traffic. Uploading over an existing policy behaves like
    /// [`apply_update`](Self::apply_update).
    pub fn upload_rspm(&mut self, rspm: Rspm) -> Result<RuleDelta, ControllerError> {
        if self.rspm.is_some() {
            return self.apply_update(rspm);
        }
        rspm.validate(|t| self.topology.terminal(t).is_some())?;
        let mut log = ChangeLog::default();
        let drops = self.deny_rules(&rspm);
        for rule in &drops {
            self.acquire(rule.clone(), &mut log);
        }
        self.drops = drops;
        self.rspm = Some(rspm);
        Ok(log.into_delta(&self.installed))
    }

    /// Replaces the policy and reports the exact rule changes.
    ///
    /// Forward rules of pairs that stay allowed are kept; those of removed
    /// pairs are withdrawn. Deny rules are recomputed.
    pub fn apply_update(&mut self, new: Rspm) -> Result<RuleDelta, ControllerError> {
        new.validate(|t| self.topology.terminal(t).is_some())?;
        let mut log = ChangeLog::default();

        let stale: Vec<TerminalPair> = self.flows.keys().filter(|p| !new.allow_t.contains(*p)).cloned().collect();
        for pair in stale {
            for rule in self.flows.remove(&pair).unwrap_or_default() {
                self.release(&rule, &mut log);
            }
        }

        let drops = self.deny_rules(&new);
        for rule in self.drops.difference(&drops).cloned().collect::<Vec<_>>() {
            self.release(&rule, &mut log);
        }
        for rule in drops.difference(&self.drops).cloned().collect::<Vec<_>>() {
            self.acquire(rule, &mut log);
        }
        self.drops = drops;
        self.rspm = Some(new);
        Ok(log.into_delta(&self.installed))
    }

    /// The path used for a pair. Both directions of a pair share one path,
    /// computed from the lower terminal id, so their rules coincide.
    fn pair_path(&self, src: &TerminalId, dst: &TerminalId) -> Result<Option<Path>, PathError> {
        if src <= dst {
            self.topology.least_cost_path(src, dst)
        } else {
            Ok(self.topology.least_cost_path(dst, src)?.map(|p| p.reversed()))
        }
    }

    fn rules_along(&self, src: &TerminalId, dst: &TerminalId, path: &Path) -> Vec<Rule> {
        let (Some(s), Some(d)) = (self.topology.terminal(src), self.topology.terminal(dst)) else {
            return Vec::new();
        };
        let there = Headers::between(s, d);
        let back = there.reversed();
        path.hops()
            .into_iter()
            .flat_map(|hop| {
                [
                    (hop.switch.clone(), FlowEntry::forward(there, hop.in_port, hop.out_port)),
                    (hop.switch, FlowEntry::forward(back, hop.out_port, hop.in_port)),
                ]
            })
            .collect()
    }

    /// Forward and reverse rules for an allowed pair along its path.
    pub fn synthesize_flow_rules(&self, src: &TerminalId, dst: &TerminalId) -> Result<Vec<Rule>, ControllerError> {
        let rspm = self.rspm.as_ref().ok_or(ControllerError::NoPolicyUploaded)?;
        if !rspm.allow_t.contains(&(src.clone(), dst.clone())) {
            return Err(ControllerError::PairNotAllowed(src.clone(), dst.clone()));
        }
        let path = self.pair_path(src, dst)?.ok_or_else(|| ControllerError::NoPath(src.clone(), dst.clone()))?;
        Ok(self.rules_along(src, dst, &path))
    }

    /// Decides a packet-in without changing any state.
    pub fn evaluate(&self, pi: &PacketIn) -> Result<Decision, ControllerError> {
        let rspm = self.rspm.as_ref().ok_or(ControllerError::NoPolicyUploaded)?;
        if !self.topology.has_port(&pi.switch, pi.in_port) {
            return Err(ControllerError::UnknownPort { switch: pi.switch.clone(), port: pi.in_port });
        }
        let h = &pi.packet.headers;
        let Some(st) = self.topology.terminal_by_address(h.src_mac, h.src_ip) else {
            return Ok(Decision::Deny(DenyReason::UnknownSource));
        };
        let Some(dt) = self.topology.terminal_by_address(h.dst_mac, h.dst_ip) else {
            return Ok(Decision::Deny(DenyReason::UnknownDestination));
        };
        let pair = (st.id.clone(), dt.id.clone());
        if rspm.deny_all_from.contains(&st.id) {
            return Ok(Decision::Deny(DenyReason::SourceBlocked));
        }
        if rspm.deny_t.contains(&pair) {
            return Ok(Decision::Deny(DenyReason::PairDenied));
        }
        if st.id == dt.id || !rspm.allow_t.contains(&pair) {
            return Ok(Decision::Deny(DenyReason::NotAllowed));
        }
        let Some(path) = self.pair_path(&st.id, &dt.id)? else {
            return Ok(Decision::Deny(DenyReason::NoPath));
        };
        let ingress_ok = path.hops().iter().any(|hop| hop.switch == pi.switch && hop.in_port == pi.in_port);
        if !ingress_ok {
            return Ok(Decision::Deny(DenyReason::WrongIngress));
        }
        let rules = self.rules_along(&st.id, &dt.id, &path);
        Ok(Decision::Permit { path, rules })
    }

    /// Decides a packet-in and records the outcome: permitted pairs get their
    /// rules marked installed, denials are counted.
    ///
    /// A permit also records the reverse pair when that is allowed too; both
    /// directions share one path, so the rules are identical.
    pub fn handle_packet_in(&mut self, pi: &PacketIn) -> Result<Decision, ControllerError> {
        let decision = self.evaluate(pi)?;
        self.stats.packet_ins += 1;
        match &decision {
            Decision::Permit { rules, .. } => {
                let h = &pi.packet.headers;
                let topo = &self.topology;
                let st = topo.terminal_by_address(h.src_mac, h.src_ip).map(|t| t.id.clone());
                let dt = topo.terminal_by_address(h.dst_mac, h.dst_ip).map(|t| t.id.clone());
                if let (Some(st), Some(dt)) = (st, dt) {
                    let back = (dt.clone(), st.clone());
                    self.own_pair((st, dt), rules.clone());
                    if self.rspm.as_ref().is_some_and(|r| r.allow_t.contains(&back)) {
                        self.own_pair(back, rules.clone());
                    }
                }
            }
            Decision::Deny(_) => self.stats.denied += 1,
        }
        Ok(decision)
    }

    fn own_pair(&mut self, pair: TerminalPair, rules: Vec<Rule>) -> RuleDelta {
        let mut log = ChangeLog::default();
        if self.flows.contains_key(&pair) {
            return RuleDelta::default();
        }
        for rule in &rules {
            self.acquire(rule.clone(), &mut log);
        }
        self.flows.insert(pair, rules);
        let delta = log.into_delta(&self.installed);
        self.stats.rules_installed += delta.added_count() as u64;
        delta
    }

    /// Installs forward rules for every allowed, routable pair up front.
    pub fn install_all_allowed(&mut self) -> Result<RuleDelta, ControllerError> {
        let rspm = self.rspm.clone().ok_or(ControllerError::NoPolicyUploaded)?;
        let mut delta = RuleDelta::default();
        for (src, dst) in &rspm.allow_t {
            let Some(path) = self.pair_path(src, dst)? else { continue };
            let rules = self.rules_along(src, dst, &path);
            for (switch, d) in self.own_pair((src.clone(), dst.clone()), rules).switches {
                let slot = delta.switches.entry(switch).or_default();
                slot.added.extend(d.added);
                slot.removed.extend(d.removed);
            }
        }
        Ok(delta)
    }

    /// Installed forward entries whose headers do not belong to an allowed
    /// pair or the response direction of one. Empty in a healthy controller.
    pub fn audit(&self) -> Vec<Rule> {
        let Some(rspm) = &self.rspm else {
            return self.installed.keys().cloned().collect();
        };
        let topo = &self.topology;
        self.installed
            .keys()
            .filter(|(_, e)| !e.is_drop())
            .filter(|(_, e)| {
                let src = topo.terminal_by_address(e.src_mac, e.src_ip);
                let dst = e.dst_mac.zip(e.dst_ip).and_then(|(m, ip)| topo.terminal_by_address(m, ip));
                match (src, dst) {
                    (Some(s), Some(d)) => {
                        !rspm.allow_t.contains(&(s.id.clone(), d.id.clone()))
                            && !rspm.allow_t.contains(&(d.id.clone(), s.id.clone()))
                    }
                    _ => true,
                }
            })
            .cloned()
            .collect()
    }
}
