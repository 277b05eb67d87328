//! Scenario files: coalition, models, policy, missions, timed events and
//! run configuration, with schema and cross-reference validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::federation::{MissionProcessModel, PlacementOptions, PolicyContext, SemanticDictionary};
use crate::ids::{LinkId, MissionId, ModelId, NodeId};
use crate::quantity::Quantity;
use crate::registry::{ModelDescriptor, Registry};
use crate::resources::ResourceVector;
use crate::runtime::RuntimeConfig;
use crate::topology::{validate_topology, CoalitionTopology, Tier};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "defaults::threshold")]
    pub upstream_threshold_mbps: f64,
    #[serde(default = "defaults::queue_bound")]
    pub report_queue_bound: usize,
    #[serde(default = "defaults::report_size")]
    pub report_size_mb: f64,
    #[serde(default = "defaults::report_interval")]
    pub report_interval_ms: u64,
    #[serde(default)]
    pub placement: PlacementOptions,
    /// Where the coalition controller runs; defaults to the smallest CLOUD node id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dtc_node: Option<NodeId>,
}

mod defaults {
    pub fn threshold() -> f64 {
        1.0
    }
    pub fn queue_bound() -> usize {
        16
    }
    pub fn report_size() -> f64 {
        0.1
    }
    pub fn report_interval() -> u64 {
        1000
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let r = RuntimeConfig::default();
        ScenarioConfig {
            upstream_threshold_mbps: r.upstream_threshold_mbps,
            report_queue_bound: r.report_queue_bound,
            report_size_mb: r.report_size_mb,
            report_interval_ms: r.report_interval_ms,
            placement: PlacementOptions::default(),
            dtc_node: None,
        }
    }
}

impl ScenarioConfig {
    pub fn runtime(&self) -> RuntimeConfig {
        RuntimeConfig {
            upstream_threshold_mbps: self.upstream_threshold_mbps,
            report_queue_bound: self.report_queue_bound,
            report_size_mb: self.report_size_mb,
            report_interval_ms: self.report_interval_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE", deny_unknown_fields)]
pub enum EventKind {
    MissionRequest { mission_id: MissionId },
    LinkDegrade { link_id: LinkId, capacity_mbps: Quantity },
    LinkRestore { link_id: LinkId },
    NodeFail { node_id: NodeId },
    NodeRestore { node_id: NodeId },
    PreloadPhysicalLoad { node_id: NodeId, load: ResourceVector },
    End,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::MissionRequest { .. } => "MISSION_REQUEST",
            EventKind::LinkDegrade { .. } => "LINK_DEGRADE",
            EventKind::LinkRestore { .. } => "LINK_RESTORE",
            EventKind::NodeFail { .. } => "NODE_FAIL",
            EventKind::NodeRestore { .. } => "NODE_RESTORE",
            EventKind::PreloadPhysicalLoad { .. } => "PRELOAD_PHYSICAL_LOAD",
            EventKind::End => "END",
        }
    }
}

/// A timed scenario event. In files the kind and its payload sit beside `at_ms`:
/// `{"at_ms": 0, "kind": "NODE_FAIL", "node_id": "n1"}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioEvent {
    pub at_ms: u64,
    pub kind: EventKind,
}

impl ScenarioEvent {
    pub fn new(at_ms: u64, kind: EventKind) -> Self {
        ScenarioEvent { at_ms, kind }
    }
}

impl Serialize for ScenarioEvent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut v = serde_json::to_value(&self.kind).map_err(serde::ser::Error::custom)?;
        v.as_object_mut().expect("tagged enum is an object").insert("at_ms".into(), self.at_ms.into());
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ScenarioEvent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let mut v = serde_json::Value::deserialize(d)?;
        let obj = v.as_object_mut().ok_or_else(|| serde::de::Error::custom("event must be an object"))?;
        let at = obj.remove("at_ms").ok_or_else(|| serde::de::Error::missing_field("at_ms"))?;
        let at_ms = at.as_u64().ok_or_else(|| serde::de::Error::custom("at_ms must be a non-negative integer"))?;
        let keys: BTreeSet<String> = obj.keys().cloned().collect();
        let kind = EventKind::deserialize(v).map_err(serde::de::Error::custom)?;
        // Tagged unit variants ignore extra keys; compare against a re-encoding.
        let known = serde_json::to_value(&kind).map_err(serde::de::Error::custom)?;
        let known: BTreeSet<String> = known.as_object().map(|o| o.keys().cloned().collect()).unwrap_or_default();
        if let Some(extra) = keys.difference(&known).next() {
            return Err(serde::de::Error::custom(format!("unknown field `{extra}` for {}", kind.name())));
        }
        Ok(ScenarioEvent { at_ms, kind })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub topology: CoalitionTopology,
    #[serde(default)]
    pub models: Vec<ModelDescriptor>,
    #[serde(default)]
    pub policy: PolicyContext,
    #[serde(default)]
    pub dictionary: SemanticDictionary,
    #[serde(default)]
    pub missions: Vec<MissionProcessModel>,
    pub events: Vec<ScenarioEvent>,
    #[serde(default)]
    pub config: ScenarioConfig,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("schema: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("{} violation(s):\n{}", .0.len(), .0.join("\n"))]
    Invalid(Vec<String>),
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads, parses and validates a scenario file.
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        let s = Self::parse(&text)?;
        let violations = s.validate();
        if violations.is_empty() {
            Ok(s)
        } else {
            Err(ScenarioError::Invalid(violations))
        }
    }

    /// Canonical JSON text: sorted keys, no insignificant whitespace.
    pub fn canonical_json(&self) -> String {
        let v = serde_json::to_value(self).expect("scenario serializes");
        serde_json::to_string(&v).expect("value serializes")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn digest(&self) -> String {
        Sha256::digest(self.canonical_json().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// One registry per topology partner, holding that partner's models.
    pub fn registries(&self) -> Result<Vec<Registry>, crate::registry::RegistryError> {
        let mut regs: BTreeMap<_, Registry> =
            self.topology.partners().into_iter().map(|p| (p.clone(), Registry::new(p))).collect();
        for m in &self.models {
            let reg = regs.entry(m.partner_id.clone()).or_insert_with(|| Registry::new(m.partner_id.clone()));
            reg.register(m.clone())?;
        }
        Ok(regs.into_values().collect())
    }

    pub fn mission(&self, id: &MissionId) -> Option<&MissionProcessModel> {
        self.missions.iter().find(|m| &m.mission_id == id)
    }

    pub fn model(&self, id: &ModelId) -> Option<&ModelDescriptor> {
        self.models.iter().find(|m| &m.model_id == id)
    }

    /// The node hosting the coalition controller.
    pub fn dtc_node(&self) -> Option<NodeId> {
        if let Some(n) = &self.config.dtc_node {
            return Some(n.clone());
        }
        let cloud = self.topology.nodes.iter().filter(|n| n.tier == Tier::Cloud).map(|n| &n.node_id).min();
        cloud.or_else(|| self.topology.nodes.iter().map(|n| &n.node_id).min()).cloned()
    }

    /// Every schema-level and cross-reference problem, one line each.
    pub fn validate(&self) -> Vec<String> {
        let mut out: Vec<String> = validate_topology(&self.topology).iter().map(ToString::to_string).collect();
        let partners = self.topology.partners();

        let mut model_ids = BTreeSet::new();
        for m in &self.models {
            if !model_ids.insert(&m.model_id) {
                out.push(format!("model {}: duplicate model_id", m.model_id));
            }
            if !partners.contains(&m.partner_id) {
                out.push(format!("model {}: unknown partner {}", m.model_id, m.partner_id));
            }
            if let Err(e) = m.validate() {
                out.push(e.to_string());
            }
        }

        for p in self.policy.mentioned_partners() {
            if !partners.contains(p) {
                out.push(format!("policy: unknown partner {p}"));
            }
        }
        for m in self.policy.override_models() {
            if !model_ids.contains(m) {
                out.push(format!("policy: override for unknown model {m}"));
            }
        }

        let mut mission_ids = BTreeSet::new();
        for pm in &self.missions {
            if !mission_ids.insert(&pm.mission_id) {
                out.push(format!("mission {}: duplicate mission_id", pm.mission_id));
            }
            if let Err(e) = pm.validate() {
                out.push(e.to_string());
            }
            for p in &pm.participants {
                if !partners.contains(p) {
                    out.push(format!("mission {}: unknown participant {p}", pm.mission_id));
                }
            }
            if pm.duration_ms == Some(0) {
                out.push(format!("mission {}: duration_ms must be positive", pm.mission_id));
            }
        }

        out.extend(self.validate_events(&mission_ids));

        if let Some(n) = &self.config.dtc_node {
            if self.topology.node(n).is_none() {
                out.push(format!("config: dtc_node {n} is not a node"));
            }
        }
        let c = &self.config;
        if !(c.upstream_threshold_mbps.is_finite() && c.upstream_threshold_mbps >= 0.0) {
            out.push("config: upstream_threshold_mbps must be non-negative".into());
        }
        if !(c.report_size_mb.is_finite() && c.report_size_mb > 0.0) {
            out.push("config: report_size_mb must be positive".into());
        }
        if c.report_interval_ms == 0 {
            out.push("config: report_interval_ms must be positive".into());
        }
        out
    }

    fn validate_events(&self, missions: &BTreeSet<&MissionId>) -> Vec<String> {
        let mut out = Vec::new();
        let ends: Vec<&ScenarioEvent> = self.events.iter().filter(|e| e.kind == EventKind::End).collect();
        match ends.as_slice() {
            [] => out.push("events: missing END event".into()),
            [end] => {
                if let Some(late) = self.events.iter().find(|e| e.at_ms > end.at_ms) {
                    out.push(format!("events: {} at {} ms is after END at {} ms", late.kind.name(), late.at_ms, end.at_ms));
                }
            }
            _ => out.push("events: more than one END event".into()),
        }
        let mut requested = BTreeSet::new();
        for (i, e) in self.events.iter().enumerate() {
            let here = |what: String| format!("event {i} ({} at {} ms): {what}", e.kind.name(), e.at_ms);
            let node = |n: &NodeId| self.topology.node(n).is_none().then(|| here(format!("unknown node {n}")));
            let link = |l: &LinkId| self.topology.link(l).is_none().then(|| here(format!("unknown link {l}")));
            match &e.kind {
                EventKind::MissionRequest { mission_id } => {
                    if !missions.contains(mission_id) {
                        out.push(here(format!("unknown mission {mission_id}")));
                    } else if !requested.insert(mission_id) {
                        out.push(here(format!("mission {mission_id} requested twice")));
                    }
                }
                EventKind::LinkDegrade { link_id, capacity_mbps } => match self.topology.link(link_id) {
                    None => out.extend(link(link_id)),
                    Some(l) if *capacity_mbps > l.capacity_mbps => {
                        out.push(here(format!("link {link_id}: degraded capacity exceeds nominal {}", l.capacity_mbps)))
                    }
                    Some(_) => {}
                },
                EventKind::LinkRestore { link_id } => out.extend(link(link_id)),
                EventKind::NodeFail { node_id } | EventKind::NodeRestore { node_id } => out.extend(node(node_id)),
                EventKind::PreloadPhysicalLoad { node_id, .. } => out.extend(node(node_id)),
                EventKind::End => {}
            }
        }
        out
    }
}

impl fmt::Display for ScenarioEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.kind.name(), self.at_ms)
    }
}
