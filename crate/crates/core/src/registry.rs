//! Per-partner registries of digital-twin model descriptors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::federation::policy::{check_releasable, PolicyContext};
use crate::ids::{Capability, ModelId, PartnerId};
use crate::quantity::Quantity;
use crate::resources::ResourceVector;
use crate::topology::Tier;

/// Classification lattice. Variant order is the lattice order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SensitivityLevel {
    Unclassified,
    Restricted,
    Secret,
}

impl SensitivityLevel {
    pub const ALL: [SensitivityLevel; 3] =
        [SensitivityLevel::Unclassified, SensitivityLevel::Restricted, SensitivityLevel::Secret];
}

impl fmt::Display for SensitivityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SensitivityLevel::Unclassified => "UNCLASSIFIED",
            SensitivityLevel::Restricted => "RESTRICTED",
            SensitivityLevel::Secret => "SECRET",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaField {
    pub field_name: String,
    pub semantic_type: String,
    #[serde(default)]
    pub required: bool,
}

impl SchemaField {
    pub fn new(name: &str, semantic_type: &str, required: bool) -> Self {
        SchemaField { field_name: name.into(), semantic_type: semantic_type.into(), required }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfaceSchema {
    #[serde(default)]
    pub fields: Vec<SchemaField>,
}

impl InterfaceSchema {
    pub fn new(fields: Vec<SchemaField>) -> Self {
        InterfaceSchema { fields }
    }

    pub fn field(&self, name: &str) -> Option<&SchemaField> {
        self.fields.iter().find(|f| f.field_name == name)
    }

    fn duplicate_field(&self) -> Option<&str> {
        let mut seen = BTreeSet::new();
        self.fields.iter().map(|f| f.field_name.as_str()).find(|n| !seen.insert(*n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputRequirement {
    pub capability: Capability,
    pub min_rate_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDescriptor {
    pub model_id: ModelId,
    pub partner_id: PartnerId,
    pub capabilities: BTreeSet<Capability>,
    #[serde(default)]
    pub output_schema: InterfaceSchema,
    /// Fields this model consumes from its producers.
    #[serde(default)]
    pub input_schema: InterfaceSchema,
    #[serde(default)]
    pub input_requirements: Vec<InputRequirement>,
    pub footprint: ResourceVector,
    pub sensitivity: SensitivityLevel,
    pub allowed_tiers: BTreeSet<Tier>,
    pub update_rate_hz: f64,
    /// Size of one synthetic state update.
    #[serde(default = "default_update_size")]
    pub update_size_mb: Quantity,
}

fn default_update_size() -> Quantity {
    Quantity::of(0.1)
}

impl ModelDescriptor {
    /// Checks the descriptor's own invariants.
    pub fn validate(&self) -> Result<(), RegistryError> {
        let bad = |reason: String| Err(RegistryError::Invalid { model: self.model_id.clone(), reason });
        if self.capabilities.is_empty() {
            return bad("capabilities must be non-empty".into());
        }
        if self.allowed_tiers.is_empty() {
            return bad("allowed_tiers must be non-empty".into());
        }
        if self.sensitivity == SensitivityLevel::Secret && self.allowed_tiers.iter().any(|t| *t != Tier::Cloud) {
            return Err(RegistryError::SecretNotEnclaveOnly(self.model_id.clone()));
        }
        if !(self.update_rate_hz.is_finite() && self.update_rate_hz > 0.0) {
            return bad("update_rate_hz must be positive".into());
        }
        if self.update_size_mb.is_zero() {
            return bad("update_size_mb must be positive".into());
        }
        if let Some(r) = self.input_requirements.iter().find(|r| !(r.min_rate_hz.is_finite() && r.min_rate_hz > 0.0)) {
            return bad(format!("input requirement {} needs a positive min_rate_hz", r.capability));
        }
        for (which, schema) in [("output", &self.output_schema), ("input", &self.input_schema)] {
            if let Some(dup) = schema.duplicate_field() {
                return bad(format!("{which} schema repeats field {dup}"));
            }
        }
        Ok(())
    }

    pub fn has_capability(&self, cap: &Capability) -> bool {
        self.capabilities.contains(cap)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegistryError {
    #[error("model {model} belongs to partner {model_partner}, not {registry_partner}")]
    PartnerMismatch { model: ModelId, model_partner: PartnerId, registry_partner: PartnerId },
    #[error("model {0}: secret models are enclave-only")]
    SecretNotEnclaveOnly(ModelId),
    #[error("model {model}: {reason}")]
    Invalid { model: ModelId, reason: String },
    #[error("duplicate registry for partner {0}")]
    DuplicatePartner(PartnerId),
}

/// Outcome of a successful registration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Registration {
    Inserted,
    Replaced,
}

/// A partner's registry of model descriptors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Registry {
    partner_id: PartnerId,
    descriptors: BTreeMap<ModelId, ModelDescriptor>,
}

impl Registry {
    pub fn new(partner_id: impl Into<PartnerId>) -> Self {
        Registry { partner_id: partner_id.into(), descriptors: BTreeMap::new() }
    }

    pub fn partner_id(&self) -> &PartnerId {
        &self.partner_id
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn get(&self, id: &ModelId) -> Option<&ModelDescriptor> {
        self.descriptors.get(id)
    }

    pub fn descriptors(&self) -> impl Iterator<Item = &ModelDescriptor> {
        self.descriptors.values()
    }

    /// Adds or replaces a descriptor.
    pub fn register(&mut self, d: ModelDescriptor) -> Result<Registration, RegistryError> {
        if d.partner_id != self.partner_id {
            return Err(RegistryError::PartnerMismatch {
                model: d.model_id.clone(),
                model_partner: d.partner_id.clone(),
                registry_partner: self.partner_id.clone(),
            });
        }
        d.validate()?;
        Ok(match self.descriptors.insert(d.model_id.clone(), d) {
            Some(_) => Registration::Replaced,
            None => Registration::Inserted,
        })
    }

    pub fn deregister(&mut self, id: &ModelId) -> Option<ModelDescriptor> {
        self.descriptors.remove(id)
    }

    /// Descriptors offering `capability` at or below `max_sensitivity`,
    /// ordered by compute footprint then model id.
    pub fn query(&self, capability: &Capability, max_sensitivity: SensitivityLevel) -> Vec<&ModelDescriptor> {
        let mut hits: Vec<_> = self
            .descriptors
            .values()
            .filter(|d| d.has_capability(capability) && d.sensitivity <= max_sensitivity)
            .collect();
        hits.sort_by(|a, b| a.footprint.compute.cmp(&b.footprint.compute).then_with(|| a.model_id.cmp(&b.model_id)));
        hits
    }
}

/// All descriptors across `registries` releasable to `requester`, ordered by
/// (partner id, model id).
pub fn coalition_catalog(
    registries: &[Registry],
    requester: &PartnerId,
    policy: &PolicyContext,
) -> Result<Vec<ModelDescriptor>, RegistryError> {
    coalition_catalog_for(registries, &BTreeSet::from([requester.clone()]), policy)
}

/// Like [`coalition_catalog`], for a set of consumers that must all be cleared.
pub fn coalition_catalog_for(
    registries: &[Registry],
    consumers: &BTreeSet<PartnerId>,
    policy: &PolicyContext,
) -> Result<Vec<ModelDescriptor>, RegistryError> {
    let mut seen = BTreeSet::new();
    for r in registries {
        if !seen.insert(r.partner_id()) {
            return Err(RegistryError::DuplicatePartner(r.partner_id.clone()));
        }
    }
    let mut out: Vec<ModelDescriptor> = registries
        .iter()
        .flat_map(|r| r.descriptors())
        .filter(|d| check_releasable(policy, d, consumers))
        .cloned()
        .collect();
    out.sort_by(|a, b| a.partner_id.cmp(&b.partner_id).then_with(|| a.model_id.cmp(&b.model_id)));
    Ok(out)
}
