use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::dfc::{dfc_allocate, dfc_react, FlowAllocation, FlowSpec};
use super::{GrantState, RejectReason, SliceGrant, SlicingError};
use crate::ids::{LinkId, NodeId, SliceId};
use crate::paths::widest_path_within;
use crate::resources::ResourceVector;
use crate::topology::CoalitionTopology;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskFlow {
    pub flow_id: String,
    pub src: NodeId,
    pub dst: NodeId,
    pub desired_mbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceTask {
    pub task_id: String,
    pub slice_id: SliceId,
    pub node: NodeId,
    pub demand: ResourceVector,
    pub flows: Vec<TaskFlow>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskDecision {
    Accept(FlowAllocation),
    Reject(RejectReason),
}

/// Per-slice controller: task admission inside a committed slice, and the
/// flow controller that keeps the slice's flows max-min fair.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceController {
    pub grant: SliceGrant,
    pub usage: BTreeMap<NodeId, ResourceVector>,
    pub tasks: BTreeMap<String, SliceTask>,
    pub flows: Vec<FlowSpec>,
    /// Capacity the slice may currently use on each of its links.
    pub link_caps: BTreeMap<LinkId, f64>,
    pub allocation: FlowAllocation,
}

impl SliceController {
    pub fn new(grant: SliceGrant) -> Result<Self, SlicingError> {
        if grant.state != GrantState::Committed {
            return Err(SlicingError::NotCommitted { slice: grant.slice_id.clone(), state: grant.state });
        }
        let link_caps = grant.link_reservations().into_iter().map(|(l, q)| (l, q.value())).collect();
        Ok(SliceController {
            grant,
            usage: BTreeMap::new(),
            tasks: BTreeMap::new(),
            flows: Vec::new(),
            link_caps,
            allocation: FlowAllocation::default(),
        })
    }

    /// Every node the slice touches: hosts plus nodes on reserved paths.
    pub fn nodes(&self) -> BTreeSet<&NodeId> {
        let mut out: BTreeSet<&NodeId> = self.grant.per_domain_reservation.values().flat_map(|m| m.keys()).collect();
        out.extend(self.grant.reserved_paths.values().flat_map(|p| &p.nodes));
        out
    }

    fn resolve_path(&self, topo: &CoalitionTopology, src: &NodeId, dst: &NodeId) -> Result<Option<Vec<LinkId>>, SlicingError> {
        if let Some(p) = self.grant.reserved_paths.values().find(|p| p.nodes.first() == Some(src) && p.nodes.last() == Some(dst)) {
            return Ok(Some(p.links.clone()));
        }
        let reserved = self.grant.link_reservations();
        let inside = |l: &crate::topology::LinkSpec| reserved.contains_key(&l.link_id);
        Ok(widest_path_within(topo, &reserved, src, dst, &inside)?.map(|p| p.links))
    }

    /// Removes a task and its flows, then reallocates the remaining flows.
    pub fn cancel_task(&mut self, task_id: &str) -> Option<SliceTask> {
        let task = self.tasks.remove(task_id)?;
        if let Some(u) = self.usage.get_mut(&task.node) {
            *u = u.sub(&task.demand).expect("usage covers the task's demand");
        }
        let ids: BTreeSet<&str> = task.flows.iter().map(|f| f.flow_id.as_str()).collect();
        self.flows.retain(|f| !ids.contains(f.flow_id.as_str()));
        self.allocation = dfc_allocate(&self.flows, &self.link_caps).expect("flows use slice links");
        Some(task)
    }

    /// Applies a new usable capacity for one slice link.
    pub fn react(&mut self, link: &LinkId, capacity_mbps: f64) -> Result<&FlowAllocation, SlicingError> {
        self.allocation = dfc_react(&self.flows, &mut self.link_caps, link, capacity_mbps)?;
        Ok(&self.allocation)
    }

    pub fn task_ids(&self) -> Vec<String> {
        self.tasks.keys().cloned().collect()
    }
}

/// Accepts a task when its node reservation has room and each of its flows
/// gets a positive max-min fair rate alongside the slice's existing flows.
pub fn sc_accept_task(
    topo: &CoalitionTopology,
    sc: &mut SliceController,
    task: SliceTask,
) -> Result<TaskDecision, SlicingError> {
    if sc.grant.state != GrantState::Committed {
        return Err(SlicingError::NotCommitted { slice: sc.grant.slice_id.clone(), state: sc.grant.state });
    }
    if sc.tasks.contains_key(&task.task_id) || task.slice_id != sc.grant.slice_id {
        return Err(SlicingError::InvalidRequest {
            slice: sc.grant.slice_id.clone(),
            reason: format!("task {} is duplicated or addressed to another slice", task.task_id),
        });
    }
    let reservations = sc.grant.node_reservations();
    let outside = |node: &NodeId| SlicingError::TaskOutsideSlice {
        task: task.task_id.clone(),
        node: node.clone(),
        slice: sc.grant.slice_id.clone(),
    };
    let Some(reserved) = reservations.get(&task.node) else {
        return Err(outside(&task.node));
    };
    let nodes = sc.nodes();
    for f in &task.flows {
        for n in [&f.src, &f.dst] {
            if !nodes.contains(n) {
                return Err(outside(n));
            }
        }
    }
    let used = sc.usage.get(&task.node).copied().unwrap_or_default();
    let room = reserved.sub(&used).expect("usage never exceeds the reservation");
    if !task.demand.leq(&room) {
        return Ok(TaskDecision::Reject(RejectReason::NodeReservation { node: task.node.clone() }));
    }

    let mut flows = sc.flows.clone();
    for (i, f) in task.flows.iter().enumerate() {
        match sc.resolve_path(topo, &f.src, &f.dst)? {
            Some(links) => flows.push(FlowSpec { flow_id: f.flow_id.clone(), links, desired_mbps: f.desired_mbps }),
            None => return Ok(TaskDecision::Reject(RejectReason::NoReservedPath { flow: i })),
        }
    }
    let allocation = dfc_allocate(&flows, &sc.link_caps)?;
    if let Some(i) = task.flows.iter().position(|f| allocation.rate(&f.flow_id) <= 0.0) {
        return Ok(TaskDecision::Reject(RejectReason::NoFlowRate { flow: i }));
    }
    sc.usage.insert(task.node.clone(), used.add(&task.demand));
    sc.tasks.insert(task.task_id.clone(), task);
    sc.flows = flows;
    sc.allocation = allocation.clone();
    Ok(TaskDecision::Accept(allocation))
}
