use std::collections::BTreeMap;

use super::dc::{dc_reserve, DcDecision, DomainController, DomainRequest, Leg, LegSpec};
use super::gc::{gc_admit, GcDecision, GlobalController};
use super::sc::SliceController;
use super::{FlowPath, GrantState, RejectReason, RejectedBy, Rejection, ReservedPath, SliceGrant, SliceRequest, SlicingError};
use crate::ids::{DomainId, LinkId, NodeId, SliceId};
use crate::quantity::Quantity;
use crate::topology::CoalitionTopology;
use crate::trace::{path_str, EventLog};

fn join<T: std::fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Splits a node path into maximal runs that stay inside one domain.
fn domain_runs<'a>(topo: &CoalitionTopology, nodes: &'a [NodeId]) -> Vec<(DomainId, &'a [NodeId])> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=nodes.len() {
        if i == nodes.len() || topo.domain_of(&nodes[i]) != topo.domain_of(&nodes[start]) {
            let d = topo.domain_of(&nodes[start]).expect("validated path").clone();
            out.push((d, &nodes[start..i]));
            start = i;
        }
    }
    out
}

/// Inter-domain hops of a node path.
fn inter_hops<'a>(topo: &'a CoalitionTopology, nodes: &[NodeId]) -> Vec<&'a LinkId> {
    nodes
        .windows(2)
        .filter(|w| topo.domain_of(&w[0]) != topo.domain_of(&w[1]))
        .map(|w| &topo.link_between(&w[0], &w[1]).expect("validated path").link_id)
        .collect()
}

/// Cross-domain admission: global screen, per-domain reservation in ascending
/// domain order with compensation on any refusal, then the inter-domain commit.
///
/// The returned grant is COMMITTED with a slice controller, or ABORTED with
/// every domain's state exactly as before the call.
pub fn two_phase_admit(
    topo: &CoalitionTopology,
    gc: &mut GlobalController,
    dcs: &mut BTreeMap<DomainId, DomainController>,
    req: &SliceRequest,
    log: &mut EventLog,
) -> Result<(SliceGrant, Option<SliceController>), SlicingError> {
    req.validate(topo)?;
    if gc.grants.contains_key(&req.slice_id) {
        return Err(SlicingError::DuplicateSlice(req.slice_id.clone()));
    }
    let mut aggregates = BTreeMap::new();
    for d in req.domains() {
        let dc = dcs.get(d).ok_or_else(|| SlicingError::UnknownDomain(d.clone()))?;
        let agg = dc.report(topo)?;
        log.record(&format!("ie:{d}"), "report", &[("free", &agg.free_totals), ("gateways", &agg.gateway_reach.len())]);
        aggregates.insert(d.clone(), agg);
    }
    let mut grant = SliceGrant::pending(req);
    let slice = &req.slice_id;

    let anchors = match gc_admit(topo, &gc.residuals(), &aggregates, req)? {
        GcDecision::Reject(reason) => {
            log.record("gc", "reject", &[("slice", slice), ("reason", &reason)]);
            return Ok((abort(gc, grant, RejectedBy::Gc, reason), None));
        }
        GcDecision::Admit { anchors } => anchors,
    };
    log.record("gc", "admit", &[("slice", slice), ("domains", &join(req.domains()))]);

    let mut per_domain: BTreeMap<DomainId, DomainRequest> = req
        .per_domain_demand
        .iter()
        .map(|(d, units)| (d.clone(), DomainRequest { slice_id: slice.clone(), units: units.clone(), legs: vec![] }))
        .collect();
    let mut inter: BTreeMap<LinkId, Quantity> = BTreeMap::new();
    let mut inter_users: BTreeMap<LinkId, usize> = BTreeMap::new();
    let mut add_inter = |l: &LinkId, rate: Quantity, flow: usize| {
        let e = inter.entry(l.clone()).or_default();
        *e = *e + rate;
        inter_users.entry(l.clone()).or_insert(flow);
    };
    for (i, f) in req.flows.iter().enumerate() {
        match &f.path {
            FlowPath::Anchored { src_unit, dst_unit } => {
                let l = topo.link(&anchors[&i]).expect("anchor is a topology link");
                let (gs, gd) = if topo.domain_of(&l.endpoint_a) == Some(&f.src_domain) {
                    (&l.endpoint_a, &l.endpoint_b)
                } else {
                    (&l.endpoint_b, &l.endpoint_a)
                };
                let legs = [
                    (&f.src_domain, LegSpec::Anchored { unit: *src_unit, gateway: gs.clone(), outbound: true }),
                    (&f.dst_domain, LegSpec::Anchored { unit: *dst_unit, gateway: gd.clone(), outbound: false }),
                ];
                for (d, spec) in legs {
                    per_domain.get_mut(d).expect("requested domain").legs.push(Leg { flow: i, rate: f.rate_mbps, spec });
                }
                add_inter(&l.link_id, f.rate_mbps, i);
            }
            FlowPath::Pinned(nodes) => {
                for (d, run) in domain_runs(topo, nodes) {
                    if run.len() > 1 {
                        let leg = Leg { flow: i, rate: f.rate_mbps, spec: LegSpec::Segment(run.to_vec()) };
                        per_domain.get_mut(&d).expect("requested domain").legs.push(leg);
                    }
                }
                for l in inter_hops(topo, nodes) {
                    add_inter(l, f.rate_mbps, i);
                }
            }
        }
    }

    let mut accepted = Vec::new();
    for (d, dreq) in &per_domain {
        let dc = dcs.get_mut(d).expect("checked above");
        match dc_reserve(topo, dc, dreq)? {
            DcDecision::Accept(r) => {
                log.record(&format!("dc:{d}"), "accept", &[("slice", slice), ("nodes", &join(r.nodes.keys()))]);
                accepted.push((d.clone(), r));
            }
            DcDecision::Reject(reason) => {
                log.record(&format!("dc:{d}"), "reject", &[("slice", slice), ("reason", &reason)]);
                compensate(dcs, slice, accepted.iter().map(|(d, _)| d), log);
                return Ok((abort(gc, grant, RejectedBy::Dc(d.clone()), reason), None));
            }
        }
    }

    if let Err(link) = gc.reserve(slice, inter) {
        let reason = RejectReason::InterDomainLinkBandwidth { flow: inter_users[&link] };
        log.record("gc", "commit-fail", &[("slice", slice), ("link", &link)]);
        compensate(dcs, slice, accepted.iter().map(|(d, _)| d), log);
        return Ok((abort(gc, grant, RejectedBy::GcCommit, reason), None));
    }

    let mut legs: BTreeMap<usize, Vec<&ReservedPath>> = BTreeMap::new();
    for (d, r) in &accepted {
        grant.per_domain_reservation.insert(d.clone(), r.nodes.clone());
        grant.unit_hosts.insert(d.clone(), r.unit_hosts.clone());
        for (flow, p) in &r.legs {
            legs.entry(*flow).or_default().push(p);
        }
    }
    for (i, f) in req.flows.iter().enumerate() {
        let path = match &f.path {
            FlowPath::Pinned(nodes) => ReservedPath {
                nodes: nodes.clone(),
                links: nodes.windows(2).map(|w| topo.link_between(&w[0], &w[1]).expect("validated").link_id.clone()).collect(),
                rate_mbps: f.rate_mbps,
            },
            FlowPath::Anchored { .. } => {
                let parts = &legs[&i];
                let (out, back) = if topo.domain_of(&parts[0].nodes[0]) == Some(&f.src_domain) {
                    (parts[0], parts[1])
                } else {
                    (parts[1], parts[0])
                };
                let mut nodes = out.nodes.clone();
                nodes.extend(back.nodes.iter().cloned());
                let mut links = out.links.clone();
                links.push(anchors[&i].clone());
                links.extend(back.links.iter().cloned());
                ReservedPath { nodes, links, rate_mbps: f.rate_mbps }
            }
        };
        grant.reserved_paths.insert(i, path);
    }
    grant.transition(GrantState::Committed)?;
    log.record("gc", "commit", &[("slice", slice), ("flows", &grant.reserved_paths.len())]);
    for (i, p) in &grant.reserved_paths {
        log.record("gc", "path", &[("slice", slice), ("flow", i), ("rate", &p.rate_mbps), ("nodes", &path_str(&p.nodes))]);
    }
    gc.grants.insert(slice.clone(), grant.clone());
    let sc = SliceController::new(grant.clone())?;
    log.record(&format!("sc:{slice}"), "create", &[("links", &sc.link_caps.len())]);
    Ok((grant, Some(sc)))
}

fn compensate<'a>(
    dcs: &mut BTreeMap<DomainId, DomainController>,
    slice: &SliceId,
    accepted: impl DoubleEndedIterator<Item = &'a DomainId>,
    log: &mut EventLog,
) {
    for d in accepted.rev() {
        dcs.get_mut(d).expect("accepted domain").release(slice);
        log.record(&format!("dc:{d}"), "release", &[("slice", slice)]);
    }
}

fn abort(gc: &mut GlobalController, mut grant: SliceGrant, by: RejectedBy, reason: RejectReason) -> SliceGrant {
    grant.transition(GrantState::Aborted).expect("pending grant");
    grant.rejection = Some(Rejection { by, reason });
    gc.grants.insert(grant.slice_id.clone(), grant.clone());
    grant
}

/// Tears a committed slice down: tasks first, then domain and inter-domain
/// reservations. Terminating an already terminated slice changes nothing.
pub fn terminate_slice(
    gc: &mut GlobalController,
    dcs: &mut BTreeMap<DomainId, DomainController>,
    sc: Option<&mut SliceController>,
    slice: &SliceId,
    log: &mut EventLog,
) -> Result<SliceGrant, SlicingError> {
    let grant = gc.grants.get(slice).ok_or_else(|| SlicingError::InvalidRequest {
        slice: slice.clone(),
        reason: "no such slice".into(),
    })?;
    match grant.state {
        GrantState::Terminated => return Ok(grant.clone()),
        GrantState::Committed => {}
        state => return Err(SlicingError::NotCommitted { slice: slice.clone(), state }),
    }
    if let Some(sc) = sc {
        for t in sc.task_ids() {
            sc.cancel_task(&t);
            log.record(&format!("sc:{slice}"), "cancel", &[("task", &t)]);
        }
        sc.grant.state = GrantState::Terminated;
    }
    let domains: Vec<DomainId> = grant.per_domain_reservation.keys().cloned().collect();
    for d in domains.iter().rev() {
        if let Some(dc) = dcs.get_mut(d) {
            dc.release(slice);
            log.record(&format!("dc:{d}"), "release", &[("slice", slice)]);
        }
    }
    gc.release(slice);
    let grant = gc.grants.get_mut(slice).expect("checked above");
    grant.transition(GrantState::Terminated)?;
    log.record("gc", "terminate", &[("slice", slice)]);
    Ok(grant.clone())
}

/// The slicing control plane as one unit: global controller, domain
/// controllers, and the slice controllers of committed slices.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPlane {
    pub gc: GlobalController,
    pub dcs: BTreeMap<DomainId, DomainController>,
    pub slices: BTreeMap<SliceId, SliceController>,
}

impl ControlPlane {
    pub fn new(topo: &CoalitionTopology) -> Result<Self, SlicingError> {
        let dcs = topo
            .domains
            .iter()
            .map(|d| Ok((d.domain_id.clone(), DomainController::new(topo, &d.domain_id)?)))
            .collect::<Result<_, SlicingError>>()?;
        Ok(ControlPlane { gc: GlobalController::new(topo), dcs, slices: BTreeMap::new() })
    }

    pub fn admit(&mut self, topo: &CoalitionTopology, req: &SliceRequest, log: &mut EventLog) -> Result<SliceGrant, SlicingError> {
        let (grant, sc) = two_phase_admit(topo, &mut self.gc, &mut self.dcs, req, log)?;
        if let Some(sc) = sc {
            self.slices.insert(grant.slice_id.clone(), sc);
        }
        Ok(grant)
    }

    pub fn terminate(&mut self, slice: &SliceId, log: &mut EventLog) -> Result<SliceGrant, SlicingError> {
        let grant = terminate_slice(&mut self.gc, &mut self.dcs, self.slices.get_mut(slice), slice, log)?;
        self.slices.remove(slice);
        Ok(grant)
    }

    /// Free resources of every node across domains.
    pub fn free(&self) -> BTreeMap<NodeId, crate::resources::ResourceVector> {
        self.dcs.values().flat_map(|dc| dc.free()).collect()
    }

    /// Admission residual of every link across domains.
    pub fn residuals(&self) -> crate::paths::Residuals {
        let mut r = self.gc.residuals();
        for dc in self.dcs.values() {
            r.extend(dc.residuals());
        }
        r
    }

    pub fn link_state(&self, link: &LinkId) -> Option<&super::LinkState> {
        self.gc.links.get(link).or_else(|| self.dcs.values().find_map(|dc| dc.links.get(link)))
    }

    pub fn link_state_mut(&mut self, link: &LinkId) -> Option<&mut super::LinkState> {
        if let Some(s) = self.gc.links.get_mut(link) {
            return Some(s);
        }
        self.dcs.values_mut().find_map(|dc| dc.links.get_mut(link))
    }
}
