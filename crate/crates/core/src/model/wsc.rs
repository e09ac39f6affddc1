use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ServiceId;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventId(pub String);

impl From<&str> for EventId {
    fn from(s: &str) -> Self {
        EventId(s.to_owned())
    }
}

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// `src` invokes `dst` when `event` fires. Written as `[src, event, dst]` in JSON.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(ServiceId, EventId, ServiceId)", into = "(ServiceId, EventId, ServiceId)")]
pub struct Transition {
    pub src: ServiceId,
    pub event: EventId,
    pub dst: ServiceId,
}

impl Transition {
    pub fn new(src: &str, event: &str, dst: &str) -> Self {
        Transition { src: src.into(), event: event.into(), dst: dst.into() }
    }
}

impl From<(ServiceId, EventId, ServiceId)> for Transition {
    fn from((src, event, dst): (ServiceId, EventId, ServiceId)) -> Self {
        Transition { src, event, dst }
    }
}

impl From<Transition> for (ServiceId, EventId, ServiceId) {
    fn from(t: Transition) -> Self {
        (t.src, t.event, t.dst)
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}, {}, {}}}", self.src, self.event, self.dst)
    }
}

/// Web service composition as a finite state machine: states are services,
/// transitions are invocations triggered by events.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Wsc {
    pub initial: ServiceId,
    pub services: BTreeSet<ServiceId>,
    pub events: BTreeSet<EventId>,
    pub transitions: BTreeSet<Transition>,
}

impl Wsc {
    /// Distinct (caller, callee) pairs, ignoring which events connect them.
    pub fn invocations(&self) -> BTreeSet<(ServiceId, ServiceId)> {
        self.transitions.iter().map(|t| (t.src.clone(), t.dst.clone())).collect()
    }
}
