use std::collections::BTreeMap;

use thiserror::Error;

use super::policy::{check_releasable, PolicyContext};
use super::{MissionError, MissionProcessModel};
use crate::ids::{Capability, ModelId};
use crate::registry::ModelDescriptor;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectionError {
    #[error("invalid mission: {0}")]
    InvalidMission(#[from] MissionError),
    #[error("uncovered capability: {}", join(.0))]
    Uncovered(Vec<Capability>),
}

fn join(caps: &[Capability]) -> String {
    caps.iter().map(Capability::as_str).collect::<Vec<_>>().join(", ")
}

/// Chooses one model per required capability.
///
/// A candidate is admissible when it is releasable to every mission
/// participant and sits at or below the classification ceiling. The cheapest
/// admissible candidate by compute footprint wins, ties by model id.
pub fn select_models(
    catalog: &[ModelDescriptor],
    pm: &MissionProcessModel,
    policy: &PolicyContext,
) -> Result<BTreeMap<Capability, ModelId>, SelectionError> {
    pm.validate()?;
    let mut chosen = BTreeMap::new();
    let mut uncovered = Vec::new();
    for cap in &pm.required_capabilities {
        let best = catalog
            .iter()
            .filter(|d| d.has_capability(cap))
            .filter(|d| d.sensitivity <= pm.classification_ceiling)
            .filter(|d| check_releasable(policy, d, &pm.participants))
            .min_by(|a, b| a.footprint.compute.cmp(&b.footprint.compute).then_with(|| a.model_id.cmp(&b.model_id)));
        match best {
            Some(d) => {
                chosen.insert(cap.clone(), d.model_id.clone());
            }
            None => uncovered.push(cap.clone()),
        }
    }
    if uncovered.is_empty() {
        Ok(chosen)
    } else {
        Err(SelectionError::Uncovered(uncovered))
    }
}
