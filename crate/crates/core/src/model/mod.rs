//! Formal system model: terminals, switches, topology, services, consumers
//! and the service-composition state machine.

mod flow;
mod topology;
mod validate;
mod wsc;

use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use flow::{Action, EntryError, FlowEntry, FlowTable, Headers, OpenflowSwitch};
pub use topology::{
    Endpoint, LinkSpec, Path, PathError, SwitchHop, SwitchSpec, TopologyError, TopologyGraph, TopologySpec, Vertex,
};
pub use validate::{validate_model, validate_topology, validate_wsc, ValidationReport, Violation};
pub use wsc::{EventId, Transition, Wsc};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

string_id!(
    /// Identifier of a network terminal (physical or virtual machine).
    TerminalId
);
string_id!(SwitchId);
string_id!(ServiceId);
string_id!(ConsumerId);

/// A switch port number. Port numbers start at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PortNo(pub u32);

impl fmt::Display for PortNo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid MAC address `{0}`")]
pub struct MacParseError(String);

/// 48-bit Ethernet address, written as six colon-separated hex octets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MacAddr(pub [u8; 6]);

impl MacAddr {
    /// `00:00:00:00:hi:lo` style address derived from a small integer.
    pub fn from_index(index: u32) -> Self {
        let b = index.to_be_bytes();
        MacAddr([0, 0, b[0], b[1], b[2], b[3]])
    }
}

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let o = self.0;
        write!(f, "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}", o[0], o[1], o[2], o[3], o[4], o[5])
    }
}

impl FromStr for MacAddr {
    type Err = MacParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = [0u8; 6];
        let mut parts = s.split(':');
        for slot in out.iter_mut() {
            let part = parts.next().ok_or_else(|| MacParseError(s.to_owned()))?;
            if part.len() != 2 {
                return Err(MacParseError(s.to_owned()));
            }
            *slot = u8::from_str_radix(part, 16).map_err(|_| MacParseError(s.to_owned()))?;
        }
        if parts.next().is_some() {
            return Err(MacParseError(s.to_owned()));
        }
        Ok(MacAddr(out))
    }
}

impl Serialize for MacAddr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MacAddr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An addressable endpoint of the data plane.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Terminal {
    pub id: TerminalId,
    pub ip: Ipv4Addr,
    pub mac: MacAddr,
}

impl Terminal {
    pub fn new(id: impl Into<String>, ip: Ipv4Addr, mac: MacAddr) -> Self {
        Terminal { id: TerminalId::new(id), ip, mac }
    }
}

/// A port on a specific switch.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchPort {
    pub switch: SwitchId,
    pub port: PortNo,
}

impl SwitchPort {
    pub fn new(switch: impl Into<String>, port: u32) -> Self {
        SwitchPort { switch: SwitchId::new(switch), port: PortNo(port) }
    }
}

impl fmt::Display for SwitchPort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.switch, self.port)
    }
}

/// A Web service bound to the terminal it runs on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WebService {
    pub id: ServiceId,
    /// Privacy policy of the service. Carried through, never interpreted.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub sppm: serde_json::Value,
    pub terminal: TerminalId,
    pub uri: String,
}

impl WebService {
    pub fn new(id: &str, terminal: &str, uri: &str) -> Self {
        WebService { id: id.into(), sppm: serde_json::Value::Null, terminal: terminal.into(), uri: uri.to_owned() }
    }
}

/// A consumer of the composition and the terminal it sends from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConsumer {
    pub id: ConsumerId,
    /// Privacy preferences of the consumer. Carried through, never interpreted.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub cppm: serde_json::Value,
    pub terminal: TerminalId,
}

impl ServiceConsumer {
    pub fn new(id: &str, terminal: &str) -> Self {
        ServiceConsumer { id: id.into(), cppm: serde_json::Value::Null, terminal: terminal.into() }
    }
}

/// The application-plane principals: services and consumers (services.json).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Catalog {
    pub services: Vec<WebService>,
    pub consumers: Vec<ServiceConsumer>,
}

impl Catalog {
    pub fn service(&self, id: &ServiceId) -> Option<&WebService> {
        self.services.iter().find(|s| &s.id == id)
    }

    pub fn consumer(&self, id: &ConsumerId) -> Option<&ServiceConsumer> {
        self.consumers.iter().find(|c| &c.id == id)
    }
}
