use std::collections::BTreeSet;
use std::net::Ipv4Addr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{MacAddr, PortNo, SwitchId, Terminal};

/// What a switch does with a matched packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Forward(PortNo),
    Drop,
}

/// The four network-layer header fields flow entries match on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Headers {
    pub src_mac: MacAddr,
    pub src_ip: Ipv4Addr,
    pub dst_mac: MacAddr,
    pub dst_ip: Ipv4Addr,
}

impl Headers {
    pub fn between(src: &Terminal, dst: &Terminal) -> Self {
        Headers { src_mac: src.mac, src_ip: src.ip, dst_mac: dst.mac, dst_ip: dst.ip }
    }

    pub fn reversed(&self) -> Self {
        Headers { src_mac: self.dst_mac, src_ip: self.dst_ip, dst_mac: self.src_mac, dst_ip: self.src_ip }
    }
}

/// A match-action rule. `None` fields are wildcards; only drop entries use them.
///
/// Packet counters are not part of an entry's identity: they live in the
/// [`FlowTable`] slot that holds the entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowEntry {
    pub src_mac: MacAddr,
    pub src_ip: Ipv4Addr,
    #[serde(with = "wildcard")]
    pub dst_mac: Option<MacAddr>,
    #[serde(with = "wildcard")]
    pub dst_ip: Option<Ipv4Addr>,
    #[serde(with = "wildcard")]
    pub in_port: Option<PortNo>,
    pub action: Action,
}

impl FlowEntry {
    /// Exact-match forwarding entry.
    pub fn forward(headers: Headers, in_port: PortNo, out_port: PortNo) -> Self {
        FlowEntry {
            src_mac: headers.src_mac,
            src_ip: headers.src_ip,
            dst_mac: Some(headers.dst_mac),
            dst_ip: Some(headers.dst_ip),
            in_port: Some(in_port),
            action: Action::Forward(out_port),
        }
    }

    /// Drop everything sent by `src`, whatever the destination or ingress port.
    pub fn drop_all_from(src: &Terminal) -> Self {
        FlowEntry { src_mac: src.mac, src_ip: src.ip, dst_mac: None, dst_ip: None, in_port: None, action: Action::Drop }
    }

    /// Drop traffic from `src` to `dst` arriving on any port.
    pub fn drop_pair(src: &Terminal, dst: &Terminal) -> Self {
        FlowEntry {
            src_mac: src.mac,
            src_ip: src.ip,
            dst_mac: Some(dst.mac),
            dst_ip: Some(dst.ip),
            in_port: None,
            action: Action::Drop,
        }
    }

    pub fn is_drop(&self) -> bool {
        self.action == Action::Drop
    }

    /// Names of the wildcarded match fields, in field order.
    pub fn wildcards(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.dst_mac.is_none() {
            out.push("dst_mac");
        }
        if self.dst_ip.is_none() {
            out.push("dst_ip");
        }
        if self.in_port.is_none() {
            out.push("in_port");
        }
        out
    }

    pub fn matches(&self, headers: &Headers, in_port: PortNo) -> bool {
        self.src_mac == headers.src_mac
            && self.src_ip == headers.src_ip
            && self.dst_mac.is_none_or(|m| m == headers.dst_mac)
            && self.dst_ip.is_none_or(|ip| ip == headers.dst_ip)
            && self.in_port.is_none_or(|p| p == in_port)
    }
}

/// Serde helper writing wildcarded match fields as `"*"`.
mod wildcard {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    const ANY: &str = "*";

    pub fn serialize<T: Serialize, S: Serializer>(v: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => v.serialize(s),
            None => s.serialize_str(ANY),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Field<T> {
        Value(T),
        Marker(String),
    }

    pub fn deserialize<'de, T: Deserialize<'de>, D: Deserializer<'de>>(d: D) -> Result<Option<T>, D::Error> {
        match Field::<T>::deserialize(d)? {
            Field::Value(v) => Ok(Some(v)),
            Field::Marker(m) if m == ANY => Ok(None),
            Field::Marker(m) => Err(serde::de::Error::custom(format!("expected value or \"*\", got `{m}`"))),
        }
    }
}

/// Flow table with set semantics and deny-first precedence.
///
/// Drop entries are consulted before forward entries; within each class the
/// first entry in insertion order wins.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlowTable {
    drops: IndexMap<FlowEntry, u64>,
    forwards: IndexMap<FlowEntry, u64>,
}

impl FlowTable {
    pub fn new() -> Self {
        Self::default()
    }

    fn class(&self, entry: &FlowEntry) -> &IndexMap<FlowEntry, u64> {
        if entry.is_drop() {
            &self.drops
        } else {
            &self.forwards
        }
    }

    fn class_mut(&mut self, entry: &FlowEntry) -> &mut IndexMap<FlowEntry, u64> {
        if entry.is_drop() {
            &mut self.drops
        } else {
            &mut self.forwards
        }
    }

    /// Returns `false` when the entry was already present.
    pub fn insert(&mut self, entry: FlowEntry) -> bool {
        let class = self.class_mut(&entry);
        if class.contains_key(&entry) {
            return false;
        }
        class.insert(entry, 0);
        true
    }

    /// Returns `false` when the entry was absent.
    pub fn remove(&mut self, entry: &FlowEntry) -> bool {
        self.class_mut(entry).shift_remove(entry).is_some()
    }

    pub fn contains(&self, entry: &FlowEntry) -> bool {
        self.class(entry).contains_key(entry)
    }

    pub fn counter(&self, entry: &FlowEntry) -> Option<u64> {
        self.class(entry).get(entry).copied()
    }

    /// The entry that would handle the packet, without touching counters.
    pub fn lookup(&self, headers: &Headers, in_port: PortNo) -> Option<&FlowEntry> {
        self.drops.keys().chain(self.forwards.keys()).find(|e| e.matches(headers, in_port))
    }

    /// Like [`lookup`](Self::lookup) but bumps the matched entry's counter.
    pub fn match_and_count(&mut self, headers: &Headers, in_port: PortNo) -> Option<FlowEntry> {
        let slot = self.drops.iter_mut().chain(self.forwards.iter_mut()).find(|(e, _)| e.matches(headers, in_port))?;
        *slot.1 += 1;
        Some(*slot.0)
    }

    /// Entries in precedence order with their counters.
    pub fn iter(&self) -> impl Iterator<Item = (&FlowEntry, u64)> {
        self.drops.iter().chain(self.forwards.iter()).map(|(e, c)| (e, *c))
    }

    pub fn entries(&self) -> BTreeSet<FlowEntry> {
        self.drops.keys().chain(self.forwards.keys()).copied().collect()
    }

    pub fn len(&self) -> usize {
        self.drops.len() + self.forwards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EntryError {
    #[error("switch {switch} has no port {port}")]
    UnknownPort { switch: SwitchId, port: PortNo },
    #[error("entry on {switch} forwards out of its own ingress port {port}")]
    Hairpin { switch: SwitchId, port: PortNo },
}

/// An OpenFlow switch: its ports and its flow table. A new switch forwards nothing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpenflowSwitch {
    pub id: SwitchId,
    pub ports: BTreeSet<PortNo>,
    pub table: FlowTable,
}

impl OpenflowSwitch {
    pub fn new(id: SwitchId, ports: impl IntoIterator<Item = PortNo>) -> Self {
        OpenflowSwitch { id, ports: ports.into_iter().collect(), table: FlowTable::new() }
    }

    fn check_port(&self, port: PortNo) -> Result<(), EntryError> {
        if self.ports.contains(&port) {
            Ok(())
        } else {
            Err(EntryError::UnknownPort { switch: self.id.clone(), port })
        }
    }

    pub fn check_entry(&self, entry: &FlowEntry) -> Result<(), EntryError> {
        if let Some(p) = entry.in_port {
            self.check_port(p)?;
        }
        if let Action::Forward(out) = entry.action {
            self.check_port(out)?;
            if entry.in_port == Some(out) && self.ports.len() > 1 {
                return Err(EntryError::Hairpin { switch: self.id.clone(), port: out });
            }
        }
        Ok(())
    }

    pub fn install(&mut self, entry: FlowEntry) -> Result<bool, EntryError> {
        self.check_entry(&entry)?;
        Ok(self.table.insert(entry))
    }

    pub fn remove(&mut self, entry: &FlowEntry) -> bool {
        self.table.remove(entry)
    }
}
