//! Coalition network model: partners' domains, three-tier nodes and links.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ids::{DomainId, LinkId, NodeId, PartnerId};
use crate::quantity::Quantity;
use crate::resources::ResourceVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Tier {
    Edge,
    Tactical,
    Cloud,
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::Edge => "EDGE",
            Tier::Tactical => "TACTICAL",
            Tier::Cloud => "CLOUD",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub node_id: NodeId,
    pub domain_id: DomainId,
    pub tier: Tier,
    pub capacity: ResourceVector,
    #[serde(default)]
    pub is_enclave: bool,
    #[serde(default)]
    pub is_gateway: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub link_id: LinkId,
    pub endpoint_a: NodeId,
    pub endpoint_b: NodeId,
    pub capacity_mbps: Quantity,
    pub latency_ms: Quantity,
}

impl LinkSpec {
    /// The endpoint opposite `node`, if `node` is an endpoint.
    pub fn other_end(&self, node: &NodeId) -> Option<&NodeId> {
        if &self.endpoint_a == node {
            Some(&self.endpoint_b)
        } else if &self.endpoint_b == node {
            Some(&self.endpoint_a)
        } else {
            None
        }
    }

    pub fn touches(&self, node: &NodeId) -> bool {
        &self.endpoint_a == node || &self.endpoint_b == node
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub domain_id: DomainId,
    pub partner_id: PartnerId,
    pub node_ids: BTreeSet<NodeId>,
    pub gateway_ids: BTreeSet<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoalitionTopology {
    #[serde(default)]
    pub domains: Vec<Domain>,
    #[serde(default)]
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub links: Vec<LinkSpec>,
}

impl CoalitionTopology {
    pub fn node(&self, id: &NodeId) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| &n.node_id == id)
    }

    pub fn link(&self, id: &LinkId) -> Option<&LinkSpec> {
        self.links.iter().find(|l| &l.link_id == id)
    }

    pub fn domain(&self, id: &DomainId) -> Option<&Domain> {
        self.domains.iter().find(|d| &d.domain_id == id)
    }

    pub fn domain_of(&self, node: &NodeId) -> Option<&DomainId> {
        self.node(node).map(|n| &n.domain_id)
    }

    /// Derived: both endpoints exist and share a domain.
    pub fn is_intra_domain(&self, link: &LinkSpec) -> bool {
        match (self.domain_of(&link.endpoint_a), self.domain_of(&link.endpoint_b)) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        }
    }

    /// The link joining two nodes, if any (parallel links are invalid).
    pub fn link_between(&self, a: &NodeId, b: &NodeId) -> Option<&LinkSpec> {
        self.links
            .iter()
            .find(|l| (&l.endpoint_a == a && &l.endpoint_b == b) || (&l.endpoint_a == b && &l.endpoint_b == a))
    }

    pub fn nodes_in<'a>(&'a self, domain: &'a DomainId) -> impl Iterator<Item = &'a NodeSpec> + 'a {
        self.nodes.iter().filter(move |n| &n.domain_id == domain)
    }

    /// Initial link capacities, keyed by link id.
    pub fn link_capacities(&self) -> BTreeMap<LinkId, Quantity> {
        self.links.iter().map(|l| (l.link_id.clone(), l.capacity_mbps)).collect()
    }

    /// Initial node capacities, keyed by node id.
    pub fn node_capacities(&self) -> BTreeMap<NodeId, ResourceVector> {
        self.nodes.iter().map(|n| (n.node_id.clone(), n.capacity)).collect()
    }

    pub fn partners(&self) -> BTreeSet<PartnerId> {
        self.domains.iter().map(|d| d.partner_id.clone()).collect()
    }
}

/// One invariant violation found by [`validate_topology`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum TopologyViolation {
    DuplicateDomain(DomainId),
    DuplicateNode(NodeId),
    DuplicateLink(LinkId),
    EnclaveNotCloud(NodeId),
    NodeUnknownDomain { node: NodeId, domain: DomainId },
    NodeNotListed { node: NodeId, domain: DomainId },
    DomainUnknownNode { domain: DomainId, node: NodeId },
    DomainNodeMismatch { domain: DomainId, node: NodeId },
    NoGateway(DomainId),
    GatewayNotMember { domain: DomainId, node: NodeId },
    GatewayFlagMismatch(NodeId),
    LinkUnknownEndpoint { link: LinkId, node: NodeId },
    LinkSelfLoop(LinkId),
    ParallelLink { link: LinkId, other: LinkId },
    InterDomainNonGateway(LinkId),
    DomainDisconnected(DomainId),
}

impl fmt::Display for TopologyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use TopologyViolation::*;
        match self {
            DuplicateDomain(d) => write!(f, "domain {d}: duplicate domain id"),
            DuplicateNode(n) => write!(f, "node {n}: duplicate node id"),
            DuplicateLink(l) => write!(f, "link {l}: duplicate link id"),
            EnclaveNotCloud(n) => write!(f, "node {n}: enclave must be cloud tier"),
            NodeUnknownDomain { node, domain } => write!(f, "node {node}: unknown domain {domain}"),
            NodeNotListed { node, domain } => write!(f, "node {node}: not listed in domain {domain}"),
            DomainUnknownNode { domain, node } => write!(f, "domain {domain}: unknown node {node}"),
            DomainNodeMismatch { domain, node } => {
                write!(f, "domain {domain}: node {node} declares a different domain")
            }
            NoGateway(d) => write!(f, "domain {d}: at least one gateway required"),
            GatewayNotMember { domain, node } => write!(f, "domain {domain}: gateway {node} is not a member node"),
            GatewayFlagMismatch(n) => write!(f, "node {n}: is_gateway disagrees with its domain's gateway list"),
            LinkUnknownEndpoint { link, node } => write!(f, "link {link}: unknown endpoint node {node}"),
            LinkSelfLoop(l) => write!(f, "link {l}: endpoints must be distinct"),
            ParallelLink { link, other } => write!(f, "link {link}: parallel to link {other}"),
            InterDomainNonGateway(l) => write!(f, "link {l}: inter-domain link requires gateways"),
            DomainDisconnected(d) => write!(f, "domain {d}: intra-domain graph is not connected"),
        }
    }
}

/// Returns every invariant violation; an empty list means the topology is valid.
pub fn validate_topology(topo: &CoalitionTopology) -> Vec<TopologyViolation> {
    use TopologyViolation::*;
    let mut out = Vec::new();

    let mut domains: BTreeMap<&DomainId, &Domain> = BTreeMap::new();
    for d in &topo.domains {
        if domains.insert(&d.domain_id, d).is_some() {
            out.push(DuplicateDomain(d.domain_id.clone()));
        }
    }
    let mut nodes: BTreeMap<&NodeId, &NodeSpec> = BTreeMap::new();
    for n in &topo.nodes {
        if nodes.insert(&n.node_id, n).is_some() {
            out.push(DuplicateNode(n.node_id.clone()));
        }
    }

    for n in &topo.nodes {
        if n.is_enclave && n.tier != Tier::Cloud {
            out.push(EnclaveNotCloud(n.node_id.clone()));
        }
        match domains.get(&n.domain_id) {
            None => out.push(NodeUnknownDomain { node: n.node_id.clone(), domain: n.domain_id.clone() }),
            Some(d) => {
                if !d.node_ids.contains(&n.node_id) {
                    out.push(NodeNotListed { node: n.node_id.clone(), domain: n.domain_id.clone() });
                }
                if n.is_gateway != d.gateway_ids.contains(&n.node_id) {
                    out.push(GatewayFlagMismatch(n.node_id.clone()));
                }
            }
        }
    }

    for d in &topo.domains {
        for id in &d.node_ids {
            match nodes.get(id) {
                None => out.push(DomainUnknownNode { domain: d.domain_id.clone(), node: id.clone() }),
                Some(n) if n.domain_id != d.domain_id => {
                    out.push(DomainNodeMismatch { domain: d.domain_id.clone(), node: id.clone() })
                }
                Some(_) => {}
            }
        }
        if d.gateway_ids.is_empty() {
            out.push(NoGateway(d.domain_id.clone()));
        }
        for g in &d.gateway_ids {
            if !d.node_ids.contains(g) {
                out.push(GatewayNotMember { domain: d.domain_id.clone(), node: g.clone() });
            }
        }
    }

    let mut link_ids = BTreeSet::new();
    let mut pairs: BTreeMap<(&NodeId, &NodeId), &LinkId> = BTreeMap::new();
    for l in &topo.links {
        if !link_ids.insert(&l.link_id) {
            out.push(DuplicateLink(l.link_id.clone()));
        }
        let mut endpoints_ok = true;
        for e in [&l.endpoint_a, &l.endpoint_b] {
            if !nodes.contains_key(e) {
                out.push(LinkUnknownEndpoint { link: l.link_id.clone(), node: e.clone() });
                endpoints_ok = false;
            }
        }
        if l.endpoint_a == l.endpoint_b {
            out.push(LinkSelfLoop(l.link_id.clone()));
            continue;
        }
        let key = if l.endpoint_a < l.endpoint_b {
            (&l.endpoint_a, &l.endpoint_b)
        } else {
            (&l.endpoint_b, &l.endpoint_a)
        };
        if let Some(other) = pairs.insert(key, &l.link_id) {
            out.push(ParallelLink { link: l.link_id.clone(), other: other.clone() });
        }
        if endpoints_ok {
            let a = nodes[&l.endpoint_a];
            let b = nodes[&l.endpoint_b];
            if a.domain_id != b.domain_id && !(a.is_gateway && b.is_gateway) {
                out.push(InterDomainNonGateway(l.link_id.clone()));
            }
        }
    }

    for d in &topo.domains {
        if !domain_connected(topo, d) {
            out.push(DomainDisconnected(d.domain_id.clone()));
        }
    }
    out
}

fn domain_connected(topo: &CoalitionTopology, d: &Domain) -> bool {
    let members: BTreeSet<&NodeId> = topo.nodes_in(&d.domain_id).map(|n| &n.node_id).collect();
    let Some(&start) = members.iter().next() else {
        return true;
    };
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(cur) = queue.pop_front() {
        for l in &topo.links {
            if let Some(next) = l.other_end(cur) {
                if members.contains(next) && seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
    }
    seen.len() == members.len()
}
