use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{derive_spm, PolicyError, Principal, PrincipalPair, Spm};
use crate::model::{Catalog, ConsumerId, ServiceId, Wsc};

/// policy.json: owner policy written with bare principal ids.
///
/// When `composition` is present its invocations are added to `allow`, and
/// consumer entries of `allow` act as grants on top of it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyDocument {
    pub allow: Vec<(String, String)>,
    #[serde(default)]
    pub deny: Vec<(String, String)>,
    #[serde(default)]
    pub malicious: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composition: Option<Wsc>,
}

fn resolve_pairs(pairs: &[(String, String)], catalog: &Catalog) -> Result<BTreeSet<PrincipalPair>, PolicyError> {
    pairs
        .iter()
        .map(|(src, dst)| {
            let p = Principal::resolve(src, catalog)?;
            match Principal::resolve(dst, catalog)? {
                Principal::Service(s) => Ok((p, s)),
                Principal::Consumer(c) => Err(PolicyError::NotAService(c.to_string())),
            }
        })
        .collect()
}

impl PolicyDocument {
    pub fn to_spm(&self, catalog: &Catalog) -> Result<Spm, PolicyError> {
        let mut allow = resolve_pairs(&self.allow, catalog)?;
        let deny = resolve_pairs(&self.deny, catalog)?;
        let malicious: BTreeSet<ConsumerId> = self
            .malicious
            .iter()
            .map(|id| match Principal::resolve(id, catalog)? {
                Principal::Consumer(c) => Ok(c),
                Principal::Service(s) => Err(PolicyError::UndeclaredPrincipal(format!("consumer {s}"))),
            })
            .collect::<Result<_, _>>()?;

        if let Some(wsc) = &self.composition {
            let grants: BTreeSet<(ConsumerId, ServiceId)> = allow
                .iter()
                .filter_map(|(p, s)| match p {
                    Principal::Consumer(c) => Some((c.clone(), s.clone())),
                    Principal::Service(_) => None,
                })
                .collect();
            allow.extend(derive_spm(wsc, catalog, &grants, &malicious)?.allow);
        }
        Spm::new(allow, deny, malicious, catalog)
    }

    pub fn from_spm(spm: &Spm) -> Self {
        let pairs = |set: &BTreeSet<PrincipalPair>| set.iter().map(|(p, s)| (p.to_string(), s.to_string())).collect();
        PolicyDocument {
            allow: pairs(&spm.allow),
            deny: pairs(&spm.deny),
            malicious: spm.malicious.iter().map(|c| c.to_string()).collect(),
            composition: None,
        }
    }
}
