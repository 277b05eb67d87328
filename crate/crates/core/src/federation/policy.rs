//! Releasability policy between coalition partners.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ids::{ModelId, PartnerId};
use crate::registry::{ModelDescriptor, SensitivityLevel};

/// One releasability grant as written in scenario files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grant {
    pub partner_id: PartnerId,
    pub level: SensitivityLevel,
    pub consumers: BTreeSet<PartnerId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    #[serde(default)]
    pub releasability: Vec<Grant>,
    #[serde(default)]
    pub overrides: BTreeMap<ModelId, BTreeSet<PartnerId>>,
}

/// Who may consume which partner's outputs at which level.
///
/// Grants are keyed by exact level; a grant at SECRET says nothing about
/// RESTRICTED. Owners always release to themselves.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(from = "PolicySection", into = "PolicySection")]
pub struct PolicyContext {
    releasability: BTreeMap<(PartnerId, SensitivityLevel), BTreeSet<PartnerId>>,
    overrides: BTreeMap<ModelId, BTreeSet<PartnerId>>,
}

impl PolicyContext {
    pub fn grant<I, P>(&mut self, partner: impl Into<PartnerId>, level: SensitivityLevel, consumers: I)
    where
        I: IntoIterator<Item = P>,
        P: Into<PartnerId>,
    {
        self.releasability
            .entry((partner.into(), level))
            .or_default()
            .extend(consumers.into_iter().map(Into::into));
    }

    pub fn allow_model<I, P>(&mut self, model: impl Into<ModelId>, consumers: I)
    where
        I: IntoIterator<Item = P>,
        P: Into<PartnerId>,
    {
        self.overrides.entry(model.into()).or_default().extend(consumers.into_iter().map(Into::into));
    }

    pub fn granted(&self, partner: &PartnerId, level: SensitivityLevel) -> Option<&BTreeSet<PartnerId>> {
        self.releasability.get(&(partner.clone(), level))
    }

    pub fn overrides_for(&self, model: &ModelId) -> Option<&BTreeSet<PartnerId>> {
        self.overrides.get(model)
    }

    /// All partner ids mentioned anywhere in the policy.
    pub fn mentioned_partners(&self) -> BTreeSet<&PartnerId> {
        self.releasability
            .iter()
            .flat_map(|((p, _), cs)| std::iter::once(p).chain(cs))
            .chain(self.overrides.values().flatten())
            .collect()
    }

    pub fn override_models(&self) -> impl Iterator<Item = &ModelId> {
        self.overrides.keys()
    }
}

impl From<PolicySection> for PolicyContext {
    fn from(s: PolicySection) -> Self {
        let mut p = PolicyContext::default();
        for g in s.releasability {
            p.grant(g.partner_id, g.level, g.consumers);
        }
        p.overrides = s.overrides;
        p
    }
}

impl From<PolicyContext> for PolicySection {
    fn from(p: PolicyContext) -> Self {
        PolicySection {
            releasability: p
                .releasability
                .into_iter()
                .map(|((partner_id, level), consumers)| Grant { partner_id, level, consumers })
                .collect(),
            overrides: p.overrides,
        }
    }
}

/// True iff every consumer is the owner, holds a level grant from the owner,
/// or is listed in the model's override set.
pub fn check_releasable(policy: &PolicyContext, d: &ModelDescriptor, consumers: &BTreeSet<PartnerId>) -> bool {
    let granted = policy.granted(&d.partner_id, d.sensitivity);
    let overridden = policy.overrides_for(&d.model_id);
    consumers.iter().all(|c| {
        c == &d.partner_id
            || granted.is_some_and(|g| g.contains(c))
            || overridden.is_some_and(|o| o.contains(c))
    })
}
