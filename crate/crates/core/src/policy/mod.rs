//! Security policy models: the owner-facing SPM over services and consumers,
//! and its terminal-level image (RSPM) that the controller enforces.

mod document;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_wsc, Catalog, ConsumerId, ServiceId, TerminalId, Wsc};

pub use document::PolicyDocument;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("undeclared principal `{0}`")]
    UndeclaredPrincipal(String),
    #[error("`{0}` is not a service and cannot be an access target")]
    NotAService(String),
    #[error("consumer `{0}` is both granted access and marked malicious")]
    GrantToMaliciousConsumer(ConsumerId),
    #[error("pair ({0}, {1}) is both allowed and denied")]
    AllowDenyOverlap(String, String),
    #[error("self-access pair for `{0}`")]
    SelfAccess(String),
    #[error("composition is malformed ({} violation(s))", .0.len())]
    InvalidComposition(Vec<String>),
    #[error("principal `{0}` has no terminal binding")]
    MappingIncomplete(String),
    #[error("terminal `{0}` is bound to more than one principal")]
    NonInjectiveMapping(TerminalId),
    #[error("unknown terminal `{0}`")]
    UnknownTerminal(TerminalId),
    #[error("terminal `{0}` is allowed to send but also denied everything")]
    AllowFromDeniedSource(TerminalId),
}

/// A subject of access-control policy.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Principal {
    Service(ServiceId),
    Consumer(ConsumerId),
}

impl Principal {
    pub fn id(&self) -> &str {
        match self {
            Principal::Service(s) => s.as_str(),
            Principal::Consumer(c) => c.as_str(),
        }
    }

    /// Looks a bare id up in the catalog, services first.
    pub fn resolve(id: &str, catalog: &Catalog) -> Result<Principal, PolicyError> {
        if catalog.service(&id.into()).is_some() {
            Ok(Principal::Service(id.into()))
        } else if catalog.consumer(&id.into()).is_some() {
            Ok(Principal::Consumer(id.into()))
        } else {
            Err(PolicyError::UndeclaredPrincipal(id.to_owned()))
        }
    }
}

impl fmt::Display for Principal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

pub type PrincipalPair = (Principal, ServiceId);
pub type TerminalPair = (TerminalId, TerminalId);

/// Owner policy: explicit allows and denies from a principal to a service,
/// plus consumers whose traffic is to be dropped outright. Everything else is
/// denied by default.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Spm {
    pub allow: BTreeSet<PrincipalPair>,
    pub deny: BTreeSet<PrincipalPair>,
    pub malicious: BTreeSet<ConsumerId>,
}

impl Spm {
    /// Builds a policy after checking it against the declared principals.
    pub fn new(
        allow: BTreeSet<PrincipalPair>,
        deny: BTreeSet<PrincipalPair>,
        malicious: BTreeSet<ConsumerId>,
        catalog: &Catalog,
    ) -> Result<Spm, PolicyError> {
        for (p, s) in allow.iter().chain(&deny) {
            let declared = match p {
                Principal::Service(id) => catalog.service(id).is_some(),
                Principal::Consumer(id) => catalog.consumer(id).is_some(),
            };
            if !declared {
                return Err(PolicyError::UndeclaredPrincipal(p.to_string()));
            }
            if catalog.service(s).is_none() {
                return Err(PolicyError::UndeclaredPrincipal(s.to_string()));
            }
            if matches!(p, Principal::Service(id) if id == s) {
                return Err(PolicyError::SelfAccess(s.to_string()));
            }
        }
        if let Some((p, s)) = allow.intersection(&deny).next() {
            return Err(PolicyError::AllowDenyOverlap(p.to_string(), s.to_string()));
        }
        for c in &malicious {
            if catalog.consumer(c).is_none() {
                return Err(PolicyError::UndeclaredPrincipal(c.to_string()));
            }
            if allow.iter().any(|(p, _)| matches!(p, Principal::Consumer(id) if id == c)) {
                return Err(PolicyError::GrantToMaliciousConsumer(c.clone()));
            }
        }
        Ok(Spm { allow, deny, malicious })
    }
}

/// Builds the owner policy for a composition.
///
/// Every invocation `s_i -> s_j` in the state machine becomes an allow pair
/// (self-invocations are not network accesses and are skipped); consumer
/// grants are added as given. No explicit denies are produced.
pub fn derive_spm(
    wsc: &Wsc,
    catalog: &Catalog,
    grants: &BTreeSet<(ConsumerId, ServiceId)>,
    malicious: &BTreeSet<ConsumerId>,
) -> Result<Spm, PolicyError> {
    let report = validate_wsc(wsc);
    if !report.is_valid() {
        return Err(PolicyError::InvalidComposition(report.violations.iter().map(|v| v.to_string()).collect()));
    }
    if let Some(s) = wsc.services.iter().find(|s| catalog.service(s).is_none()) {
        return Err(PolicyError::UndeclaredPrincipal(s.to_string()));
    }
    if let Some((c, _)) = grants.iter().find(|(c, _)| malicious.contains(c)) {
        return Err(PolicyError::GrantToMaliciousConsumer(c.clone()));
    }

    let allow = wsc
        .invocations()
        .into_iter()
        .filter(|(src, dst)| src != dst)
        .map(|(src, dst)| (Principal::Service(src), dst))
        .chain(grants.iter().map(|(c, s)| (Principal::Consumer(c.clone()), s.clone())))
        .collect();
    Spm::new(allow, BTreeSet::new(), malicious.clone(), catalog)
}

/// Principal to terminal binding, checked for injectivity.
#[derive(Debug, Clone)]
pub struct PrincipalMap {
    to_terminal: HashMap<Principal, TerminalId>,
    to_principal: HashMap<TerminalId, Principal>,
}

impl PrincipalMap {
    pub fn new(catalog: &Catalog) -> Result<Self, PolicyError> {
        let mut to_terminal = HashMap::new();
        let mut to_principal = HashMap::new();
        let bindings = catalog
            .services
            .iter()
            .map(|s| (Principal::Service(s.id.clone()), &s.terminal))
            .chain(catalog.consumers.iter().map(|c| (Principal::Consumer(c.id.clone()), &c.terminal)));
        for (p, t) in bindings {
            if to_principal.insert(t.clone(), p.clone()).is_some() {
                return Err(PolicyError::NonInjectiveMapping(t.clone()));
            }
            to_terminal.insert(p, t.clone());
        }
        Ok(PrincipalMap { to_terminal, to_principal })
    }

    pub fn terminal(&self, p: &Principal) -> Result<&TerminalId, PolicyError> {
        self.to_terminal.get(p).ok_or_else(|| PolicyError::MappingIncomplete(p.to_string()))
    }

    pub fn service_terminal(&self, s: &ServiceId) -> Result<&TerminalId, PolicyError> {
        self.terminal(&Principal::Service(s.clone()))
    }

    pub fn principal(&self, t: &TerminalId) -> Option<&Principal> {
        self.to_principal.get(t)
    }
}

/// Terminal-level policy: what the controller enforces.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rspm {
    pub allow_t: BTreeSet<TerminalPair>,
    pub deny_t: BTreeSet<TerminalPair>,
    pub deny_all_from: BTreeSet<TerminalId>,
}

impl Rspm {
    pub fn is_empty(&self) -> bool {
        self.allow_t.is_empty() && self.deny_t.is_empty() && self.deny_all_from.is_empty()
    }

    /// Checks internal consistency and that every terminal satisfies `known`.
    pub fn validate(&self, known: impl Fn(&TerminalId) -> bool) -> Result<(), PolicyError> {
        let referenced = self.allow_t.iter().chain(&self.deny_t).flat_map(|(a, b)| [a, b]).chain(&self.deny_all_from);
        for t in referenced {
            if !known(t) {
                return Err(PolicyError::UnknownTerminal(t.clone()));
            }
        }
        for (a, b) in self.allow_t.iter().chain(&self.deny_t) {
            if a == b {
                return Err(PolicyError::SelfAccess(a.to_string()));
            }
        }
        if let Some((a, b)) = self.allow_t.intersection(&self.deny_t).next() {
            return Err(PolicyError::AllowDenyOverlap(a.to_string(), b.to_string()));
        }
        if let Some((a, _)) = self.allow_t.iter().find(|(a, _)| self.deny_all_from.contains(a)) {
            return Err(PolicyError::AllowFromDeniedSource(a.clone()));
        }
        Ok(())
    }
}

/// Maps an owner policy onto terminals through the principal bindings.
///
/// The binding must be injective, which makes the map a bijection on pairs.
pub fn transform_spm_to_rspm(spm: &Spm, catalog: &Catalog) -> Result<Rspm, PolicyError> {
    let map = PrincipalMap::new(catalog)?;
    transform_with(spm, &map)
}

pub fn transform_with(spm: &Spm, map: &PrincipalMap) -> Result<Rspm, PolicyError> {
    let pairs = |set: &BTreeSet<PrincipalPair>| -> Result<BTreeSet<TerminalPair>, PolicyError> {
        set.iter().map(|(p, s)| Ok((map.terminal(p)?.clone(), map.service_terminal(s)?.clone()))).collect()
    };
    let deny_all_from = spm
        .malicious
        .iter()
        .map(|c| map.terminal(&Principal::Consumer(c.clone())).cloned())
        .collect::<Result<_, _>>()?;
    Ok(Rspm { allow_t: pairs(&spm.allow)?, deny_t: pairs(&spm.deny)?, deny_all_from })
}

/// Exact difference between two terminal policies.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RspmDelta {
    pub added_allow: BTreeSet<TerminalPair>,
    pub removed_allow: BTreeSet<TerminalPair>,
    pub added_deny: BTreeSet<TerminalPair>,
    pub removed_deny: BTreeSet<TerminalPair>,
    pub added_deny_all: BTreeSet<TerminalId>,
    pub removed_deny_all: BTreeSet<TerminalId>,
}

impl RspmDelta {
    pub fn is_empty(&self) -> bool {
        self.added_allow.is_empty()
            && self.removed_allow.is_empty()
            && self.added_deny.is_empty()
            && self.removed_deny.is_empty()
            && self.added_deny_all.is_empty()
            && self.removed_deny_all.is_empty()
    }

    pub fn apply(&self, base: &Rspm) -> Rspm {
        fn patch<T: Ord + Clone>(base: &BTreeSet<T>, add: &BTreeSet<T>, remove: &BTreeSet<T>) -> BTreeSet<T> {
            base.difference(remove).chain(add).cloned().collect()
        }
        Rspm {
            allow_t: patch(&base.allow_t, &self.added_allow, &self.removed_allow),
            deny_t: patch(&base.deny_t, &self.added_deny, &self.removed_deny),
            deny_all_from: patch(&base.deny_all_from, &self.added_deny_all, &self.removed_deny_all),
        }
    }
}

pub fn diff_rspm(old: &Rspm, new: &Rspm) -> RspmDelta {
    fn minus<T: Ord + Clone>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> BTreeSet<T> {
        a.difference(b).cloned().collect()
    }
    RspmDelta {
        added_allow: minus(&new.allow_t, &old.allow_t),
        removed_allow: minus(&old.allow_t, &new.allow_t),
        added_deny: minus(&new.deny_t, &old.deny_t),
        removed_deny: minus(&old.deny_t, &new.deny_t),
        added_deny_all: minus(&new.deny_all_from, &old.deny_all_from),
        removed_deny_all: minus(&old.deny_all_from, &new.deny_all_from),
    }
}
