use std::collections::BTreeMap;

use super::ie::DomainAggregate;
use super::{carries, FlowPath, LinkState, RejectReason, SliceGrant, SliceRequest, SlicingError};
use crate::ids::{DomainId, LinkId, NodeId, SliceId};
use crate::paths::Residuals;
use crate::quantity::{Bottleneck, Quantity};
use crate::topology::{CoalitionTopology, LinkSpec};

/// Outcome of the global controller's feasibility screen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GcDecision {
    /// Admitted; anchored flows are assigned the inter-domain link to use.
    Admit { anchors: BTreeMap<usize, LinkId> },
    Reject(RejectReason),
}

/// Inter-domain links joining the two domains, with the endpoint in `from` first.
fn connecting<'a>(
    topo: &'a CoalitionTopology,
    from: &DomainId,
    to: &DomainId,
) -> Vec<(&'a LinkSpec, &'a NodeId, &'a NodeId)> {
    let mut out: Vec<_> = topo
        .links
        .iter()
        .filter_map(|l| {
            let (da, db) = (topo.domain_of(&l.endpoint_a)?, topo.domain_of(&l.endpoint_b)?);
            if da == from && db == to {
                Some((l, &l.endpoint_a, &l.endpoint_b))
            } else if db == from && da == to {
                Some((l, &l.endpoint_b, &l.endpoint_a))
            } else {
                None
            }
        })
        .collect();
    out.sort_by(|x, y| x.0.link_id.cmp(&y.0.link_id));
    out
}

/// Screens a slice request against domain summaries and inter-domain residuals.
///
/// Each check is necessary for any concrete reservation, so a rejection here
/// means the domains would have failed too. Flows are screened one at a time;
/// contention between flows of the same request is left to the domains and the
/// commit step.
pub fn gc_admit(
    topo: &CoalitionTopology,
    inter_residual: &Residuals,
    aggregates: &BTreeMap<DomainId, DomainAggregate>,
    req: &SliceRequest,
) -> Result<GcDecision, SlicingError> {
    for d in req.domains() {
        if !aggregates.contains_key(d) {
            return Err(SlicingError::MissingAggregate(d.clone()));
        }
    }
    for d in req.domains() {
        if let Some(axis) = req.demand_total(d).first_excess(&aggregates[d].free_totals) {
            return Ok(GcDecision::Reject(RejectReason::DomainCapacity { domain: d.clone(), axis }));
        }
    }
    let residual = |l: &LinkId| inter_residual.get(l).copied().unwrap_or(Quantity::ZERO);
    let mut anchors = BTreeMap::new();
    for (i, f) in req.flows.iter().enumerate() {
        let verdict = match &f.path {
            FlowPath::Anchored { src_unit, dst_unit } => {
                let src_demand = &req.per_domain_demand[&f.src_domain][*src_unit].demand;
                let dst_demand = &req.per_domain_demand[&f.dst_domain][*dst_unit].demand;
                let side_ok = |agg: &DomainAggregate, g: &NodeId, demand| {
                    let fits = agg.gateway_free.get(g).is_some_and(|free| crate::resources::resource_leq(demand, free));
                    fits || carries(agg.gateway_reach.get(g), f.rate_mbps)
                };
                let links = connecting(topo, &f.src_domain, &f.dst_domain);
                let mut reason = RejectReason::NoInterDomainLink { flow: i };
                let mut chosen = None;
                for (l, gs, gd) in links {
                    if residual(&l.link_id) < f.rate_mbps {
                        if matches!(reason, RejectReason::NoInterDomainLink { .. }) {
                            reason = RejectReason::InterDomainLinkBandwidth { flow: i };
                        }
                        continue;
                    }
                    let src_ok = side_ok(&aggregates[&f.src_domain], gs, src_demand);
                    let dst_ok = side_ok(&aggregates[&f.dst_domain], gd, dst_demand);
                    if src_ok && dst_ok {
                        chosen = Some(l.link_id.clone());
                        break;
                    }
                    if !matches!(reason, RejectReason::GatewayBottleneck { .. }) {
                        let domain = if src_ok { f.dst_domain.clone() } else { f.src_domain.clone() };
                        reason = RejectReason::GatewayBottleneck { flow: i, domain };
                    }
                }
                match chosen {
                    Some(l) => {
                        anchors.insert(i, l);
                        None
                    }
                    None => Some(reason),
                }
            }
            FlowPath::Pinned(nodes) => screen_pinned(topo, &residual, aggregates, i, f.rate_mbps, nodes),
        };
        if let Some(reason) = verdict {
            return Ok(GcDecision::Reject(reason));
        }
    }
    Ok(GcDecision::Admit { anchors })
}

fn screen_pinned(
    topo: &CoalitionTopology,
    residual: &dyn Fn(&LinkId) -> Quantity,
    aggregates: &BTreeMap<DomainId, DomainAggregate>,
    flow: usize,
    rate: Quantity,
    nodes: &[NodeId],
) -> Option<RejectReason> {
    let domain_of = |n: &NodeId| topo.domain_of(n).expect("validated path");
    for w in nodes.windows(2) {
        if domain_of(&w[0]) != domain_of(&w[1]) {
            let link = topo.link_between(&w[0], &w[1]).expect("validated path");
            if residual(&link.link_id) < rate {
                return Some(RejectReason::InterDomainLinkBandwidth { flow });
            }
        }
    }
    let mut start = 0;
    while start < nodes.len() {
        let d = domain_of(&nodes[start]);
        let mut end = start;
        while end + 1 < nodes.len() && domain_of(&nodes[end + 1]) == d {
            end += 1;
        }
        if end > start {
            let agg = &aggregates[d];
            let (entry, exit) = (&nodes[start], &nodes[end]);
            let gw = |n: &NodeId| agg.gateway_reach.contains_key(n);
            let ok = match (gw(entry), gw(exit)) {
                (true, true) => carries(agg.pair_bottleneck(entry, exit), rate),
                (false, true) => carries(agg.gateway_reach.get(exit), rate),
                (true, false) => carries(agg.gateway_reach.get(entry), rate),
                (false, false) => true,
            };
            if !ok {
                return Some(if gw(entry) && gw(exit) {
                    RejectReason::TransitBottleneck { flow, domain: d.clone() }
                } else {
                    RejectReason::GatewayBottleneck { flow, domain: d.clone() }
                });
            }
        }
        start = end + 1;
    }
    None
}

/// The global controller: owns inter-domain link state and the grant table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GlobalController {
    pub links: BTreeMap<LinkId, LinkState>,
    pub reservations: BTreeMap<SliceId, BTreeMap<LinkId, Quantity>>,
    pub grants: BTreeMap<SliceId, SliceGrant>,
}

impl GlobalController {
    pub fn new(topo: &CoalitionTopology) -> Self {
        let links = topo
            .links
            .iter()
            .filter(|l| !topo.is_intra_domain(l))
            .map(|l| (l.link_id.clone(), LinkState::new(l.capacity_mbps)))
            .collect();
        GlobalController { links, ..Default::default() }
    }

    pub fn residuals(&self) -> Residuals {
        self.links.iter().map(|(id, s)| (id.clone(), s.residual())).collect()
    }

    /// Reserves inter-domain bandwidth for a slice, all or nothing.
    /// Returns the first over-subscribed link on failure.
    pub fn reserve(&mut self, slice: &SliceId, rates: BTreeMap<LinkId, Quantity>) -> Result<(), LinkId> {
        for (l, r) in &rates {
            if self.links.get(l).is_none_or(|s| s.residual() < *r) {
                return Err(l.clone());
            }
        }
        for (l, r) in &rates {
            let s = self.links.get_mut(l).expect("checked above");
            s.reserved = s.reserved + *r;
        }
        self.reservations.insert(slice.clone(), rates);
        Ok(())
    }

    pub fn release(&mut self, slice: &SliceId) -> Option<BTreeMap<LinkId, Quantity>> {
        let rates = self.reservations.remove(slice)?;
        for (l, r) in &rates {
            let s = self.links.get_mut(l).expect("reserved link exists");
            s.reserved = s.reserved.checked_sub(*r).expect("release matches reservation");
        }
        Some(rates)
    }

    /// Width currently available on an inter-domain link, for logging.
    pub fn link_width(&self, l: &LinkId) -> Bottleneck {
        Bottleneck::Finite(self.links.get(l).map(LinkState::residual).unwrap_or_default())
    }
}
