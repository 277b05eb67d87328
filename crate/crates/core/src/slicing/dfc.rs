use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::SlicingError;
use crate::ids::LinkId;

/// A flow as seen by the flow controller.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowSpec {
    pub flow_id: String,
    pub links: Vec<LinkId>,
    pub desired_mbps: f64,
}

/// Allocated rate per flow id.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FlowAllocation {
    pub rates: BTreeMap<String, f64>,
}

impl FlowAllocation {
    pub fn rate(&self, flow_id: &str) -> f64 {
        self.rates.get(flow_id).copied().unwrap_or(0.0)
    }
}

/// Max-min fair rates by progressive filling, each flow capped at its desired rate.
///
/// All unfrozen flows rise together until a link saturates or a flow reaches
/// its desired rate; the flows concerned freeze and the rest continue. A flow
/// with an empty path is limited by its desired rate alone.
pub fn dfc_allocate(flows: &[FlowSpec], link_caps: &BTreeMap<LinkId, f64>) -> Result<FlowAllocation, SlicingError> {
    for f in flows {
        if let Some(l) = f.links.iter().find(|l| !link_caps.contains_key(*l)) {
            return Err(SlicingError::UnknownLink(l.clone()));
        }
    }
    let mut rate = vec![0.0f64; flows.len()];
    let mut active: BTreeSet<usize> = (0..flows.len()).collect();
    let mut remaining: BTreeMap<&LinkId, f64> = link_caps.iter().map(|(l, c)| (l, c.max(0.0))).collect();

    for (i, f) in flows.iter().enumerate() {
        if f.links.is_empty() {
            rate[i] = f.desired_mbps.max(0.0);
            active.remove(&i);
        }
    }
    while !active.is_empty() {
        let mut users: BTreeMap<&LinkId, usize> = BTreeMap::new();
        for &i in &active {
            for l in unique(&flows[i].links) {
                *users.entry(l).or_default() += 1;
            }
        }
        let share = |l: &LinkId| remaining[l] / users[l] as f64;
        let link_step = users.keys().map(|l| share(l)).fold(f64::INFINITY, f64::min);
        let demand_step = active.iter().map(|&i| flows[i].desired_mbps - rate[i]).fold(f64::INFINITY, f64::min);
        let step = link_step.min(demand_step).max(0.0);

        let capped: BTreeSet<usize> =
            active.iter().copied().filter(|&i| flows[i].desired_mbps - rate[i] <= step).collect();
        for &i in &active {
            rate[i] = if capped.contains(&i) { flows[i].desired_mbps.max(0.0) } else { rate[i] + step };
        }
        let saturated: BTreeSet<&LinkId> = users.keys().copied().filter(|l| share(l) <= step).collect();
        for (l, n) in &users {
            let r = remaining.get_mut(*l).expect("known link");
            *r = if saturated.contains(*l) { 0.0 } else { (*r - step * *n as f64).max(0.0) };
        }
        let frozen: Vec<usize> = active
            .iter()
            .copied()
            .filter(|i| capped.contains(i) || flows[*i].links.iter().any(|l| saturated.contains(l)))
            .collect();
        for i in frozen {
            active.remove(&i);
        }
    }
    Ok(FlowAllocation { rates: flows.iter().zip(rate).map(|(f, r)| (f.flow_id.clone(), r)).collect() })
}

fn unique(links: &[LinkId]) -> BTreeSet<&LinkId> {
    links.iter().collect()
}

/// Reacts to a link capacity change by recomputing the allocation from scratch.
pub fn dfc_react(
    flows: &[FlowSpec],
    link_caps: &mut BTreeMap<LinkId, f64>,
    link: &LinkId,
    capacity_mbps: f64,
) -> Result<FlowAllocation, SlicingError> {
    let cap = link_caps.get_mut(link).ok_or_else(|| SlicingError::UnknownLink(link.clone()))?;
    *cap = capacity_mbps;
    dfc_allocate(flows, link_caps)
}
