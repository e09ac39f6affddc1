//! Injection-based compliance checking.
//!
//! Every probe runs against a read-only view of the system, so verification
//! never perturbs the tables, counters or controller it inspects.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::dataplane::{DataplaneError, OutcomeKind, Packet, SdnSystem};
use crate::model::{Catalog, TerminalId};
use crate::policy::{PolicyError, Principal, PrincipalMap, Spm, TerminalPair};

pub use crate::dataplane::ProbeMode;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VerifyError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Dataplane(#[from] DataplaneError),
}

/// Every ordered pair of distinct terminals, in id order.
pub fn all_pairs(system: &SdnSystem) -> Vec<TerminalPair> {
    let ids: Vec<&TerminalId> = system.topology().terminal_ids().collect();
    let mut out = Vec::with_capacity(ids.len() * ids.len().saturating_sub(1));
    for a in &ids {
        for b in &ids {
            if a != b {
                out.push(((*a).clone(), (*b).clone()));
            }
        }
    }
    out
}

/// Whether a canonical `a -> b` packet injected at `a` arrives at `b`.
pub fn delivers(system: &SdnSystem, a: &TerminalId, b: &TerminalId, mode: ProbeMode) -> Result<bool, DataplaneError> {
    let topo = system.topology();
    let (Some(src), Some(dst)) = (topo.terminal(a), topo.terminal(b)) else {
        return Err(DataplaneError::UnknownTerminal(if topo.terminal(a).is_none() { a } else { b }.clone()));
    };
    let trace = system.probe(a, &Packet::between(src, dst), mode)?;
    let delivered = matches!(trace.kind(), OutcomeKind::Delivered | OutcomeKind::EscalatedThenDelivered);
    Ok(delivered && trace.delivered_to() == Some(b))
}

/// The ordered terminal pairs over which traffic currently gets through.
pub fn reachable_pairs(system: &SdnSystem, mode: ProbeMode) -> Result<BTreeSet<TerminalPair>, DataplaneError> {
    reachable_among(system, all_pairs(system), mode)
}

/// [`reachable_pairs`] restricted to the given candidates.
pub fn reachable_among(
    system: &SdnSystem,
    pairs: impl IntoIterator<Item = TerminalPair>,
    mode: ProbeMode,
) -> Result<BTreeSet<TerminalPair>, DataplaneError> {
    let mut out = BTreeSet::new();
    for (a, b) in pairs {
        if delivers(system, &a, &b, mode)? {
            out.insert((a, b));
        }
    }
    Ok(out)
}

/// Reachable pair the owner policy does not account for.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Leak {
    pub src: TerminalId,
    pub dst: TerminalId,
    /// Principal bound to each terminal, if any.
    pub principals: (Option<String>, Option<String>),
}

/// Allowed pair that traffic cannot actually traverse.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Gap {
    pub src: TerminalId,
    pub dst: TerminalId,
    pub principals: (String, String),
    /// False when the topology has no path at all between the two.
    pub connected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComplianceReport {
    pub compliant: bool,
    pub checked_pairs: usize,
    pub reachable: BTreeSet<TerminalPair>,
    /// Reachable pairs that are responses to an allowed pair.
    pub reverse_of_allowed: BTreeSet<TerminalPair>,
    pub leaks: Vec<Leak>,
    pub gaps: Vec<Gap>,
}

struct PolicyView<'a> {
    spm: &'a Spm,
    map: PrincipalMap,
}

impl PolicyView<'_> {
    fn allows(&self, a: &TerminalId, b: &TerminalId) -> bool {
        match (self.map.principal(a), self.map.principal(b)) {
            (Some(p), Some(Principal::Service(s))) => self.spm.allow.contains(&(p.clone(), s.clone())),
            _ => false,
        }
    }

    fn name(&self, t: &TerminalId) -> Option<String> {
        self.map.principal(t).map(|p| p.id().to_owned())
    }
}

/// Checks the whole system against the owner policy over all terminal pairs.
pub fn check_compliance(spm: &Spm, catalog: &Catalog, system: &SdnSystem) -> Result<ComplianceReport, VerifyError> {
    check_compliance_among(spm, catalog, system, all_pairs(system))
}

/// [`check_compliance`] restricted to the given pairs, for large instances.
pub fn check_compliance_among(
    spm: &Spm,
    catalog: &Catalog,
    system: &SdnSystem,
    pairs: impl IntoIterator<Item = TerminalPair>,
) -> Result<ComplianceReport, VerifyError> {
    let view = PolicyView { spm, map: PrincipalMap::new(catalog)? };
    let topo = system.topology();
    let mut report = ComplianceReport {
        compliant: true,
        checked_pairs: 0,
        reachable: BTreeSet::new(),
        reverse_of_allowed: BTreeSet::new(),
        leaks: Vec::new(),
        gaps: Vec::new(),
    };
    for (a, b) in pairs {
        if a == b {
            continue;
        }
        report.checked_pairs += 1;
        let allowed = view.allows(&a, &b);
        if delivers(system, &a, &b, ProbeMode::WithController)? {
            if !allowed {
                if view.allows(&b, &a) {
                    report.reverse_of_allowed.insert((a.clone(), b.clone()));
                } else {
                    report.leaks.push(Leak {
                        src: a.clone(),
                        dst: b.clone(),
                        principals: (view.name(&a), view.name(&b)),
                    });
                }
            }
            report.reachable.insert((a, b));
        } else if allowed {
            let connected = topo.least_cost_path(&a, &b).ok().flatten().is_some();
            report.gaps.push(Gap {
                principals: (view.name(&a).unwrap_or_default(), view.name(&b).unwrap_or_default()),
                src: a,
                dst: b,
                connected,
            });
        }
    }
    report.leaks.sort();
    report.gaps.sort();
    report.compliant = report.leaks.is_empty() && report.gaps.is_empty();
    Ok(report)
}
