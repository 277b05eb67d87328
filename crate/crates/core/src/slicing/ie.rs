use std::collections::BTreeMap;

use super::SlicingError;
use crate::ids::{DomainId, NodeId};
use crate::paths::{widest_path_within, Residuals};
use crate::quantity::{Bottleneck, Quantity};
use crate::resources::ResourceVector;
use crate::topology::CoalitionTopology;

/// What a domain discloses to the global controller.
///
/// Besides totals and gateway-to-gateway bottlenecks, each gateway carries its
/// own free capacity and its best intra-domain reach from any other node, so
/// the global controller can screen flows that start or end inside the
/// domain without learning its topology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainAggregate {
    pub domain_id: DomainId,
    pub free_totals: ResourceVector,
    /// Keyed by gateway pair with the smaller id first.
    pub gateway_bottlenecks: BTreeMap<(NodeId, NodeId), Bottleneck>,
    /// Widest intra-domain bottleneck from any other node to the gateway.
    pub gateway_reach: BTreeMap<NodeId, Bottleneck>,
    pub gateway_free: BTreeMap<NodeId, ResourceVector>,
}

impl DomainAggregate {
    pub fn pair_bottleneck(&self, a: &NodeId, b: &NodeId) -> Option<&Bottleneck> {
        let key = if a <= b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
        self.gateway_bottlenecks.get(&key)
    }
}

/// Summarises one domain from its free node resources and link residuals.
pub fn ie_report(
    topo: &CoalitionTopology,
    free: &BTreeMap<NodeId, ResourceVector>,
    residual: &Residuals,
    domain_id: &DomainId,
) -> Result<DomainAggregate, SlicingError> {
    let domain = topo.domain(domain_id).ok_or_else(|| SlicingError::UnknownDomain(domain_id.clone()))?;
    let free_of = |n: &NodeId| free.get(n).copied().unwrap_or_default();
    let free_totals = domain.node_ids.iter().map(free_of).sum();
    let intra = |l: &crate::topology::LinkSpec| {
        topo.domain_of(&l.endpoint_a) == Some(domain_id) && topo.domain_of(&l.endpoint_b) == Some(domain_id)
    };
    let width = |a: &NodeId, b: &NodeId| -> Result<Bottleneck, SlicingError> {
        Ok(widest_path_within(topo, residual, a, b, &intra)?
            .map(|p| p.bottleneck)
            .unwrap_or(Bottleneck::Finite(Quantity::ZERO)))
    };

    let gateways: Vec<&NodeId> = domain.gateway_ids.iter().collect();
    let mut gateway_bottlenecks = BTreeMap::new();
    for (i, a) in gateways.iter().enumerate() {
        for b in &gateways[i + 1..] {
            gateway_bottlenecks.insert(((*a).clone(), (*b).clone()), width(a, b)?);
        }
    }
    let mut gateway_reach = BTreeMap::new();
    let mut gateway_free = BTreeMap::new();
    for g in gateways {
        let mut reach = Bottleneck::Finite(Quantity::ZERO);
        for n in domain.node_ids.iter().filter(|n| *n != g) {
            reach = reach.max(width(n, g)?);
        }
        gateway_reach.insert(g.clone(), reach);
        gateway_free.insert(g.clone(), free_of(g));
    }
    Ok(DomainAggregate { domain_id: domain_id.clone(), free_totals, gateway_bottlenecks, gateway_reach, gateway_free })
}
