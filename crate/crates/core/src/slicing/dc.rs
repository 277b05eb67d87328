use std::collections::BTreeMap;

use serde::Serialize;

use super::{DemandUnit, LinkState, RejectReason, ReservedPath, SlicingError};
use crate::ids::{DomainId, LinkId, NodeId, SliceId};
use crate::paths::{widest_path_within, Residuals};
use crate::quantity::{Bottleneck, Quantity};
use crate::resources::ResourceVector;
use crate::topology::CoalitionTopology;

/// Resource bookkeeping for one node.
///
/// `free + Σ slice reservations + physical == capacity` holds at all times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NodeState {
    pub nominal: ResourceVector,
    /// Zero while the node is failed.
    pub capacity: ResourceVector,
    pub free: ResourceVector,
    /// Load of the physical counterparts sharing the node.
    pub physical: ResourceVector,
    pub failed: bool,
}

impl NodeState {
    pub fn new(capacity: ResourceVector) -> Self {
        NodeState { nominal: capacity, capacity, free: capacity, physical: ResourceVector::ZERO, failed: false }
    }
}

/// One leg of a flow that a domain must carry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LegSpec {
    /// Between the host of a demand unit and a gateway; `outbound` runs host to gateway.
    Anchored { unit: usize, gateway: NodeId, outbound: bool },
    /// A fixed run of nodes inside the domain.
    Segment(Vec<NodeId>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Leg {
    pub flow: usize,
    pub rate: Quantity,
    pub spec: LegSpec,
}

/// The part of a slice request addressed to one domain controller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainRequest {
    pub slice_id: SliceId,
    pub units: Vec<DemandUnit>,
    pub legs: Vec<Leg>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DomainReservation {
    pub slice_id: SliceId,
    pub nodes: BTreeMap<NodeId, ResourceVector>,
    pub unit_hosts: Vec<NodeId>,
    pub legs: Vec<(usize, ReservedPath)>,
    pub links: BTreeMap<LinkId, Quantity>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DcDecision {
    Accept(DomainReservation),
    Reject(RejectReason),
}

/// A domain controller and the domain state it owns exclusively.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainController {
    pub domain_id: DomainId,
    pub nodes: BTreeMap<NodeId, NodeState>,
    /// Intra-domain links only.
    pub links: BTreeMap<LinkId, LinkState>,
    pub reservations: BTreeMap<SliceId, DomainReservation>,
}

impl DomainController {
    pub fn new(topo: &CoalitionTopology, domain_id: &DomainId) -> Result<Self, SlicingError> {
        topo.domain(domain_id).ok_or_else(|| SlicingError::UnknownDomain(domain_id.clone()))?;
        let nodes = topo.nodes_in(domain_id).map(|n| (n.node_id.clone(), NodeState::new(n.capacity))).collect();
        let links = topo
            .links
            .iter()
            .filter(|l| topo.is_intra_domain(l) && topo.domain_of(&l.endpoint_a) == Some(domain_id))
            .map(|l| (l.link_id.clone(), LinkState::new(l.capacity_mbps)))
            .collect();
        Ok(DomainController { domain_id: domain_id.clone(), nodes, links, reservations: BTreeMap::new() })
    }

    pub fn free(&self) -> BTreeMap<NodeId, ResourceVector> {
        self.nodes.iter().map(|(id, n)| (id.clone(), n.free)).collect()
    }

    pub fn residuals(&self) -> Residuals {
        self.links.iter().map(|(id, s)| (id.clone(), s.residual())).collect()
    }

    pub fn report(&self, topo: &CoalitionTopology) -> Result<super::DomainAggregate, SlicingError> {
        super::ie_report(topo, &self.free(), &self.residuals(), &self.domain_id)
    }

    /// Returns a slice's node and link reservations to the free pools.
    pub fn release(&mut self, slice: &SliceId) -> Option<DomainReservation> {
        let r = self.reservations.remove(slice)?;
        for (n, amount) in &r.nodes {
            let st = self.nodes.get_mut(n).expect("reserved node exists");
            st.free = st.free.add(amount);
        }
        for (l, rate) in &r.links {
            let st = self.links.get_mut(l).expect("reserved link exists");
            st.reserved = st.reserved.checked_sub(*rate).expect("release matches reservation");
        }
        Some(r)
    }

    fn take_node(&mut self, node: &NodeId, demand: &ResourceVector) -> bool {
        let st = self.nodes.get_mut(node).expect("known node");
        match st.free.sub(demand) {
            Ok(rest) if !st.failed => {
                st.free = rest;
                true
            }
            _ => false,
        }
    }

    fn take_link(&mut self, link: &LinkId, rate: Quantity) -> bool {
        let st = self.links.get_mut(link).expect("known link");
        if st.residual() < rate {
            return false;
        }
        st.reserved = st.reserved + rate;
        true
    }
}

/// Tries to reserve a domain's share of a slice.
///
/// Demand units are packed first-fit over nodes ordered by descending free
/// compute (ties by node id), pinned units go to their pin. Anchored legs are
/// routed on the widest intra-domain path between host and gateway. The
/// domain state changes only when the whole request fits.
pub fn dc_reserve(
    topo: &CoalitionTopology,
    dc: &mut DomainController,
    req: &DomainRequest,
) -> Result<DcDecision, SlicingError> {
    if dc.reservations.contains_key(&req.slice_id) {
        return Err(SlicingError::DuplicateSlice(req.slice_id.clone()));
    }
    let mut work = dc.clone();
    match reserve_into(topo, &mut work, req)? {
        Ok(r) => {
            work.reservations.insert(req.slice_id.clone(), r.clone());
            *dc = work;
            Ok(DcDecision::Accept(r))
        }
        Err(reason) => Ok(DcDecision::Reject(reason)),
    }
}

fn reserve_into(
    topo: &CoalitionTopology,
    work: &mut DomainController,
    req: &DomainRequest,
) -> Result<Result<DomainReservation, RejectReason>, SlicingError> {
    let mut nodes: BTreeMap<NodeId, ResourceVector> = BTreeMap::new();
    let mut hosts = Vec::with_capacity(req.units.len());
    let mut order: Vec<(Quantity, NodeId)> =
        work.nodes.iter().filter(|(_, s)| !s.failed).map(|(id, s)| (s.free.compute, id.clone())).collect();
    order.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));

    for unit in &req.units {
        let host = match &unit.pin {
            Some(pin) => {
                if !work.nodes.contains_key(pin) {
                    return Err(SlicingError::InvalidRequest {
                        slice: req.slice_id.clone(),
                        reason: format!("unit {} pinned to {pin} outside domain {}", unit.label, work.domain_id),
                    });
                }
                if !work.take_node(pin, &unit.demand) {
                    return Ok(Err(RejectReason::PinnedHostCapacity { unit: unit.label.clone(), node: pin.clone() }));
                }
                pin.clone()
            }
            None => match order.iter().find(|(_, n)| work.take_node(n, &unit.demand)) {
                Some((_, n)) => n.clone(),
                None => {
                    let total: ResourceVector = work.nodes.values().filter(|s| !s.failed).map(|s| &s.free).sum();
                    return Ok(Err(match unit.demand.first_excess(&total) {
                        Some(axis) => RejectReason::DomainCapacity { domain: work.domain_id.clone(), axis },
                        None => RejectReason::Fragmentation { unit: unit.label.clone() },
                    }));
                }
            },
        };
        let e = nodes.entry(host.clone()).or_default();
        *e = e.add(&unit.demand);
        hosts.push(host);
    }

    let mut legs = Vec::new();
    let mut links: BTreeMap<LinkId, Quantity> = BTreeMap::new();
    for leg in &req.legs {
        let (path_nodes, path_links) = match &leg.spec {
            LegSpec::Anchored { unit, gateway, outbound } => {
                let host = hosts.get(*unit).ok_or_else(|| SlicingError::InvalidRequest {
                    slice: req.slice_id.clone(),
                    reason: format!("leg of flow {} references missing unit {unit}", leg.flow),
                })?;
                let (src, dst) = if *outbound { (host, gateway) } else { (gateway, host) };
                let residual = work.residuals();
                let inside = |l: &crate::topology::LinkSpec| work.links.contains_key(&l.link_id);
                match widest_path_within(topo, &residual, src, dst, &inside)? {
                    Some(p) if p.bottleneck.admits(leg.rate) => (p.nodes, p.links),
                    _ => return Ok(Err(RejectReason::IntraDomainBandwidth { flow: leg.flow })),
                }
            }
            LegSpec::Segment(seg) => {
                let mut ls = Vec::new();
                for w in seg.windows(2) {
                    let l = topo.link_between(&w[0], &w[1]).filter(|l| work.links.contains_key(&l.link_id));
                    let l = l.ok_or_else(|| SlicingError::InvalidRequest {
                        slice: req.slice_id.clone(),
                        reason: format!("segment hop {}-{} is not an intra-domain link", w[0], w[1]),
                    })?;
                    if work.links[&l.link_id].residual() < leg.rate {
                        return Ok(Err(RejectReason::IntraDomainBandwidth { flow: leg.flow }));
                    }
                    ls.push(l.link_id.clone());
                }
                (seg.clone(), ls)
            }
        };
        for l in &path_links {
            if !work.take_link(l, leg.rate) {
                return Ok(Err(RejectReason::IntraDomainBandwidth { flow: leg.flow }));
            }
            let e = links.entry(l.clone()).or_default();
            *e = *e + leg.rate;
        }
        legs.push((leg.flow, ReservedPath { nodes: path_nodes, links: path_links, rate_mbps: leg.rate }));
    }
    Ok(Ok(DomainReservation { slice_id: req.slice_id.clone(), nodes, unit_hosts: hosts, legs, links }))
}

/// Narrowest residual on a set of intra-domain links, for logging.
pub fn min_residual(dc: &DomainController, links: &[LinkId]) -> Bottleneck {
    links
        .iter()
        .filter_map(|l| dc.links.get(l))
        .map(|s| Bottleneck::Finite(s.residual()))
        .min()
        .unwrap_or(Bottleneck::Unbounded)
}
