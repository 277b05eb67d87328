//! The coalition-level controller: model selection, semantic mediation,
//! policy checks and tiered placement for a mission process model.

pub mod mediation;
pub mod placement;
pub mod policy;
pub mod selection;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{Capability, MissionId, ModelId, NodeId, PartnerId};
use crate::paths::{Residuals, Route};
use crate::quantity::{Cost, Quantity};
use crate::registry::{coalition_catalog_for, ModelDescriptor, Registry, RegistryError, SensitivityLevel};
use crate::resources::ResourceVector;
use crate::topology::CoalitionTopology;

pub use mediation::{mediate, mediate_models, SchemaMapping, SemanticDictionary};
pub use placement::{plan_placement, ConstraintClass, Offender, PlacementError, PlacementOptions, SearchMode};
pub use policy::{check_releasable, PolicyContext};
pub use selection::{select_models, SelectionError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interaction {
    pub producer_capability: Capability,
    pub consumer_capability: Capability,
    pub min_rate_mbps: Quantity,
    pub max_latency_ms: Quantity,
}

/// Mission blueprint: capabilities, their interactions and policy context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionProcessModel {
    pub mission_id: MissionId,
    pub participants: BTreeSet<PartnerId>,
    pub required_capabilities: BTreeSet<Capability>,
    #[serde(default)]
    pub interactions: Vec<Interaction>,
    pub classification_ceiling: SensitivityLevel,
    /// Mission completes this long after activation; `None` runs until END.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_ms: Option<u64>,
    /// Slice sharing with physical IoBT load; defaults to dedicated when any
    /// selected model is SECRET and shared otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shared_with_physical: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MissionError {
    #[error("mission {0}: participants must be non-empty")]
    NoParticipants(MissionId),
    #[error("mission {0}: required_capabilities must be non-empty")]
    NoCapabilities(MissionId),
    #[error("mission {mission}: interaction {index} uses capability {capability} not in required_capabilities")]
    UnknownCapability { mission: MissionId, index: usize, capability: Capability },
    #[error("mission {mission}: interaction {index} needs positive rate and latency bounds")]
    NonPositiveBound { mission: MissionId, index: usize },
}

impl MissionProcessModel {
    pub fn validate(&self) -> Result<(), MissionError> {
        if self.participants.is_empty() {
            return Err(MissionError::NoParticipants(self.mission_id.clone()));
        }
        if self.required_capabilities.is_empty() {
            return Err(MissionError::NoCapabilities(self.mission_id.clone()));
        }
        for (index, i) in self.interactions.iter().enumerate() {
            for cap in [&i.producer_capability, &i.consumer_capability] {
                if !self.required_capabilities.contains(cap) {
                    return Err(MissionError::UnknownCapability {
                        mission: self.mission_id.clone(),
                        index,
                        capability: cap.clone(),
                    });
                }
            }
            if i.min_rate_mbps.is_zero() || i.max_latency_ms.is_zero() {
                return Err(MissionError::NonPositiveBound { mission: self.mission_id.clone(), index });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanMode {
    Exact,
    Heuristic,
}

impl fmt::Display for PlanMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlanMode::Exact => "exact",
            PlanMode::Heuristic => "heuristic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FederationPlan {
    pub mission_id: MissionId,
    pub selected: BTreeMap<Capability, ModelId>,
    pub placement: BTreeMap<ModelId, NodeId>,
    /// Route per interaction index.
    pub routes: BTreeMap<usize, Route>,
    pub mediations: Vec<SchemaMapping>,
    pub total_cost: Cost,
    pub total_hops: usize,
    pub mode: PlanMode,
}

impl FederationPlan {
    pub fn host_of_capability(&self, cap: &Capability) -> Option<&NodeId> {
        self.selected.get(cap).and_then(|m| self.placement.get(m))
    }

    /// Every node the plan touches, as a host or along a route.
    pub fn nodes_used(&self) -> BTreeSet<&NodeId> {
        self.placement.values().chain(self.routes.values().flat_map(|r| r.nodes.iter())).collect()
    }
}

/// Stage at which federation stopped.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FederationError {
    #[error("catalog: {0}")]
    Catalog(#[from] RegistryError),
    #[error("selection: {0}")]
    Selection(#[from] SelectionError),
    #[error("mediation: interaction {interaction} lossy, unmapped fields: {}", .missing.join(", "))]
    Mediation { interaction: usize, missing: Vec<String> },
    #[error("placement: {0}")]
    Placement(#[from] PlacementError),
}

impl FederationError {
    pub fn stage(&self) -> &'static str {
        match self {
            FederationError::Catalog(_) => "catalog",
            FederationError::Selection(_) => "selection",
            FederationError::Mediation { .. } => "mediation",
            FederationError::Placement(_) => "placement",
        }
    }
}

/// Everything `federate` reads, as one immutable snapshot.
#[derive(Clone, Copy)]
pub struct FederationInput<'a> {
    pub registries: &'a [Registry],
    pub topology: &'a CoalitionTopology,
    pub free: &'a BTreeMap<NodeId, ResourceVector>,
    pub residual: &'a Residuals,
    pub policy: &'a PolicyContext,
    pub dictionary: &'a SemanticDictionary,
    pub options: &'a PlacementOptions,
}

/// Catalog, selection, mediation and placement, in that order.
///
/// Pure: nothing is reserved, so this doubles as the mission rehearsal
/// (dry-run) entry point.
pub fn federate(input: FederationInput<'_>, pm: &MissionProcessModel) -> Result<FederationPlan, FederationError> {
    let catalog = coalition_catalog_for(input.registries, &pm.participants, input.policy)?;
    let chosen = select_models(&catalog, pm, input.policy)?;
    let by_id: BTreeMap<&ModelId, &ModelDescriptor> = catalog.iter().map(|d| (&d.model_id, d)).collect();
    let selection: BTreeMap<Capability, ModelDescriptor> =
        chosen.iter().map(|(c, m)| (c.clone(), by_id[m].clone())).collect();

    let mut mediations = Vec::with_capacity(pm.interactions.len());
    for (index, i) in pm.interactions.iter().enumerate() {
        let m = mediate_models(&selection[&i.producer_capability], &selection[&i.consumer_capability], input.dictionary);
        if m.lossiness {
            return Err(FederationError::Mediation { interaction: index, missing: m.unmapped_required });
        }
        mediations.push(m);
    }

    let mut plan = plan_placement(input.topology, input.free, input.residual, &selection, pm, input.options)?;
    plan.mediations = mediations;
    Ok(plan)
}

/// Independent re-check of a plan against the snapshot it was made from.
/// Returns a description of every violated constraint.
pub fn validate_plan(
    topo: &CoalitionTopology,
    free: &BTreeMap<NodeId, ResourceVector>,
    residual: &Residuals,
    models: &BTreeMap<ModelId, ModelDescriptor>,
    pm: &MissionProcessModel,
    plan: &FederationPlan,
) -> Vec<String> {
    let mut out = Vec::new();
    for cap in &pm.required_capabilities {
        match plan.selected.get(cap) {
            None => out.push(format!("capability {cap} not covered")),
            Some(m) if !models.get(m).is_some_and(|d| d.has_capability(cap)) => {
                out.push(format!("model {m} does not provide {cap}"))
            }
            Some(_) => {}
        }
    }
    let mut load: BTreeMap<&NodeId, ResourceVector> = BTreeMap::new();
    for (m, n) in &plan.placement {
        let (Some(d), Some(node)) = (models.get(m), topo.node(n)) else {
            out.push(format!("placement {m} -> {n} references unknown entities"));
            continue;
        };
        if !placement::tier_eligible(d, node) {
            out.push(format!("model {m} not allowed on node {n}"));
        }
        let e = load.entry(n).or_default();
        *e = e.add(&d.footprint);
    }
    for (n, used) in load {
        if !free.get(n).is_some_and(|f| used.leq(f)) {
            out.push(format!("node {n} over capacity"));
        }
    }
    let mut cost = Cost::ZERO;
    let mut hops = 0;
    for (index, i) in pm.interactions.iter().enumerate() {
        let Some(route) = plan.routes.get(&index) else {
            out.push(format!("interaction {index} has no route"));
            continue;
        };
        let from = plan.host_of_capability(&i.producer_capability);
        let to = plan.host_of_capability(&i.consumer_capability);
        if route.nodes.first() != from || route.nodes.last() != to {
            out.push(format!("interaction {index} route endpoints do not match placement"));
        }
        let mut latency = Quantity::ZERO;
        for w in route.nodes.windows(2) {
            match topo.link_between(&w[0], &w[1]) {
                None => out.push(format!("interaction {index} route hop {}-{} has no link", w[0], w[1])),
                Some(l) => {
                    latency = latency + l.latency_ms;
                    if residual.get(&l.link_id).copied().unwrap_or_default() < i.min_rate_mbps {
                        out.push(format!("interaction {index} link {} lacks bandwidth", l.link_id));
                    }
                }
            }
        }
        if latency > i.max_latency_ms {
            out.push(format!("interaction {index} route latency {latency} exceeds {}", i.max_latency_ms));
        }
        cost = cost + i.min_rate_mbps.mul(latency);
        hops += route.nodes.len().saturating_sub(1);
    }
    if cost != plan.total_cost || hops != plan.total_hops {
        out.push(format!("recorded cost/hops {}/{} differ from recomputed {cost}/{hops}", plan.total_cost, plan.total_hops));
    }
    out
}
