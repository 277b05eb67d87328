//! Software-defined slicing control plane.
//!
//! Inference engines summarise each domain, the global controller screens
//! slice requests against those summaries, domain controllers make concrete
//! node and path reservations, slice controllers accept tasks, and dynamic
//! flow controllers keep per-flow rates max-min fair.

pub mod admission;
pub mod dc;
pub mod dfc;
pub mod gc;
pub mod ie;
pub mod sc;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::ids::{DomainId, LinkId, MissionId, NodeId, SliceId};
use crate::paths::PathError;
use crate::quantity::{Bottleneck, Quantity};
use crate::resources::{Axis, ResourceVector};
use crate::topology::CoalitionTopology;

pub use admission::{terminate_slice, two_phase_admit, ControlPlane};
pub use dc::{dc_reserve, DcDecision, DomainController, DomainRequest, DomainReservation, Leg, LegSpec, NodeState};
pub use dfc::{dfc_allocate, dfc_react, FlowAllocation, FlowSpec};
pub use gc::{gc_admit, GcDecision, GlobalController};
pub use ie::{ie_report, DomainAggregate};
pub use sc::{sc_accept_task, SliceController, SliceTask, TaskDecision, TaskFlow};

/// Capacity bookkeeping for one link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LinkState {
    pub nominal: Quantity,
    /// Degraded capacity, if a degradation is in force.
    pub degraded: Option<Quantity>,
    /// Number of failed endpoint nodes.
    pub down_endpoints: u8,
    pub reserved: Quantity,
}

impl LinkState {
    pub fn new(nominal: Quantity) -> Self {
        LinkState { nominal, degraded: None, down_endpoints: 0, reserved: Quantity::ZERO }
    }

    /// Capacity the link can carry right now.
    pub fn current(&self) -> Quantity {
        if self.down_endpoints > 0 {
            Quantity::ZERO
        } else {
            self.degraded.unwrap_or(self.nominal)
        }
    }

    /// Bandwidth available to new reservations.
    pub fn residual(&self) -> Quantity {
        self.current().saturating_sub(self.reserved)
    }

    /// Fraction of reserved rates the link can currently honour.
    pub fn honour_factor(&self) -> f64 {
        if self.reserved.is_zero() || self.current() >= self.reserved {
            1.0
        } else {
            self.current().value() / self.reserved.value()
        }
    }
}

/// One indivisible demand, optionally pinned to a host.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DemandUnit {
    pub label: String,
    pub demand: ResourceVector,
    pub pin: Option<NodeId>,
}

impl DemandUnit {
    pub fn new(label: impl Into<String>, demand: ResourceVector) -> Self {
        DemandUnit { label: label.into(), demand, pin: None }
    }

    pub fn pinned(label: impl Into<String>, demand: ResourceVector, node: NodeId) -> Self {
        DemandUnit { label: label.into(), demand, pin: Some(node) }
    }
}

/// Where a flow's traffic runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum FlowPath {
    /// Between two demand units of different domains, through a connecting
    /// inter-domain link chosen by the global controller; domain controllers
    /// route each side to the gateway with a widest path.
    Anchored { src_unit: usize, dst_unit: usize },
    /// A fixed node path, e.g. a route chosen during federation.
    Pinned(Vec<NodeId>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SliceFlow {
    pub src_domain: DomainId,
    pub dst_domain: DomainId,
    pub rate_mbps: Quantity,
    pub path: FlowPath,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SliceRequest {
    pub slice_id: SliceId,
    pub mission_id: MissionId,
    /// Demand units per involved domain; an empty list marks a transit-only domain.
    pub per_domain_demand: BTreeMap<DomainId, Vec<DemandUnit>>,
    pub flows: Vec<SliceFlow>,
    pub shared_with_physical: bool,
}

impl SliceRequest {
    pub fn demand_total(&self, domain: &DomainId) -> ResourceVector {
        self.per_domain_demand.get(domain).map(|u| u.iter().map(|u| &u.demand).sum()).unwrap_or_default()
    }

    pub fn domains(&self) -> impl Iterator<Item = &DomainId> {
        self.per_domain_demand.keys()
    }

    /// Structural checks against the topology.
    pub fn validate(&self, topo: &CoalitionTopology) -> Result<(), SlicingError> {
        let bad = |why: String| Err(SlicingError::InvalidRequest { slice: self.slice_id.clone(), reason: why });
        for (d, units) in &self.per_domain_demand {
            if topo.domain(d).is_none() {
                return Err(SlicingError::UnknownDomain(d.clone()));
            }
            for u in units {
                if let Some(pin) = &u.pin {
                    if topo.domain_of(pin) != Some(d) {
                        return bad(format!("unit {} pinned to {pin} outside domain {d}", u.label));
                    }
                }
            }
        }
        for (i, f) in self.flows.iter().enumerate() {
            for d in [&f.src_domain, &f.dst_domain] {
                if !self.per_domain_demand.contains_key(d) {
                    return bad(format!("flow {i} endpoint domain {d} is not requested"));
                }
            }
            match &f.path {
                FlowPath::Anchored { src_unit, dst_unit } => {
                    if f.src_domain == f.dst_domain {
                        return bad(format!("anchored flow {i} must cross domains"));
                    }
                    if *src_unit >= self.per_domain_demand[&f.src_domain].len()
                        || *dst_unit >= self.per_domain_demand[&f.dst_domain].len()
                    {
                        return bad(format!("flow {i} references a missing demand unit"));
                    }
                }
                FlowPath::Pinned(nodes) => {
                    let (Some(first), Some(last)) = (nodes.first(), nodes.last()) else {
                        return bad(format!("flow {i} has an empty path"));
                    };
                    if topo.domain_of(first) != Some(&f.src_domain) || topo.domain_of(last) != Some(&f.dst_domain) {
                        return bad(format!("flow {i} path endpoints do not match its domains"));
                    }
                    for n in nodes {
                        match topo.domain_of(n) {
                            None => return Err(SlicingError::Path(PathError::UnknownNode(n.clone()))),
                            Some(d) if !self.per_domain_demand.contains_key(d) => {
                                return bad(format!("flow {i} crosses unrequested domain {d}"))
                            }
                            Some(_) => {}
                        }
                    }
                    if let Some(w) = nodes.windows(2).find(|w| topo.link_between(&w[0], &w[1]).is_none()) {
                        return bad(format!("flow {i} hop {}-{} has no link", w[0], w[1]));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GrantState {
    Pending,
    Committed,
    Aborted,
    Terminated,
}

impl fmt::Display for GrantState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GrantState::Pending => "PENDING",
            GrantState::Committed => "COMMITTED",
            GrantState::Aborted => "ABORTED",
            GrantState::Terminated => "TERMINATED",
        })
    }
}

/// Why a controller turned a request down. Rejections are data, not errors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum RejectReason {
    DomainCapacity { domain: DomainId, axis: Axis },
    NoInterDomainLink { flow: usize },
    InterDomainLinkBandwidth { flow: usize },
    GatewayBottleneck { flow: usize, domain: DomainId },
    TransitBottleneck { flow: usize, domain: DomainId },
    Fragmentation { unit: String },
    PinnedHostCapacity { unit: String, node: NodeId },
    IntraDomainBandwidth { flow: usize },
    NodeReservation { node: NodeId },
    NoReservedPath { flow: usize },
    NoFlowRate { flow: usize },
}

impl RejectReason {
    /// Short category used for per-reason counters.
    pub fn category(&self) -> String {
        match self {
            RejectReason::DomainCapacity { axis, .. } => format!("domain capacity: {axis}"),
            RejectReason::NoInterDomainLink { .. } => "no inter-domain link".into(),
            RejectReason::InterDomainLinkBandwidth { .. } => "inter-domain link bandwidth".into(),
            RejectReason::GatewayBottleneck { .. } => "gateway bottleneck".into(),
            RejectReason::TransitBottleneck { .. } => "transit bottleneck".into(),
            RejectReason::Fragmentation { .. } => "fragmentation".into(),
            RejectReason::PinnedHostCapacity { .. } => "pinned host capacity".into(),
            RejectReason::IntraDomainBandwidth { .. } => "intra-domain bandwidth".into(),
            RejectReason::NodeReservation { .. } => "node reservation".into(),
            RejectReason::NoReservedPath { .. } => "no reserved path".into(),
            RejectReason::NoFlowRate { .. } => "no flow rate".into(),
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cat = self.category();
        match self {
            RejectReason::DomainCapacity { domain, .. } => write!(f, "{cat} ({domain})"),
            RejectReason::NoInterDomainLink { flow }
            | RejectReason::InterDomainLinkBandwidth { flow }
            | RejectReason::IntraDomainBandwidth { flow }
            | RejectReason::NoReservedPath { flow }
            | RejectReason::NoFlowRate { flow } => write!(f, "{cat} (flow {flow})"),
            RejectReason::GatewayBottleneck { flow, domain } | RejectReason::TransitBottleneck { flow, domain } => {
                write!(f, "{cat} (flow {flow}, {domain})")
            }
            RejectReason::Fragmentation { unit } => write!(f, "{cat} (unit {unit})"),
            RejectReason::PinnedHostCapacity { unit, node } => write!(f, "{cat} (unit {unit} on {node})"),
            RejectReason::NodeReservation { node } => write!(f, "{cat} ({node})"),
        }
    }
}

/// Which controller ended an admission without a commit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum RejectedBy {
    Gc,
    Dc(DomainId),
    /// Cumulative inter-domain link check after all domains accepted.
    GcCommit,
}

impl fmt::Display for RejectedBy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectedBy::Gc => f.write_str("gc"),
            RejectedBy::Dc(d) => write!(f, "dc:{d}"),
            RejectedBy::GcCommit => f.write_str("gc-commit"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub by: RejectedBy,
    pub reason: RejectReason,
}

/// A reserved path segment with its rate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReservedPath {
    pub nodes: Vec<NodeId>,
    pub links: Vec<LinkId>,
    pub rate_mbps: Quantity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceGrant {
    pub slice_id: SliceId,
    pub mission_id: MissionId,
    pub state: GrantState,
    pub per_domain_reservation: BTreeMap<DomainId, BTreeMap<NodeId, ResourceVector>>,
    /// Host chosen for each demand unit, per domain.
    pub unit_hosts: BTreeMap<DomainId, Vec<NodeId>>,
    /// Full end-to-end path per flow index.
    pub reserved_paths: BTreeMap<usize, ReservedPath>,
    pub shared_with_physical: bool,
    pub rejection: Option<Rejection>,
}

impl SliceGrant {
    pub fn pending(req: &SliceRequest) -> Self {
        SliceGrant {
            slice_id: req.slice_id.clone(),
            mission_id: req.mission_id.clone(),
            state: GrantState::Pending,
            per_domain_reservation: BTreeMap::new(),
            unit_hosts: BTreeMap::new(),
            reserved_paths: BTreeMap::new(),
            shared_with_physical: req.shared_with_physical,
            rejection: None,
        }
    }

    /// Reserved rate per link summed over the slice's paths.
    pub fn link_reservations(&self) -> BTreeMap<LinkId, Quantity> {
        let mut out: BTreeMap<LinkId, Quantity> = BTreeMap::new();
        for p in self.reserved_paths.values() {
            for l in &p.links {
                let e = out.entry(l.clone()).or_default();
                *e = *e + p.rate_mbps;
            }
        }
        out
    }

    pub fn node_reservations(&self) -> BTreeMap<&NodeId, ResourceVector> {
        let mut out: BTreeMap<&NodeId, ResourceVector> = BTreeMap::new();
        for nodes in self.per_domain_reservation.values() {
            for (n, r) in nodes {
                let e = out.entry(n).or_default();
                *e = e.add(r);
            }
        }
        out
    }

    fn transition(&mut self, to: GrantState) -> Result<(), SlicingError> {
        use GrantState::*;
        let ok = matches!((self.state, to), (Pending, Committed) | (Pending, Aborted) | (Committed, Terminated));
        if !ok {
            return Err(SlicingError::BadTransition { slice: self.slice_id.clone(), from: self.state, to });
        }
        self.state = to;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SlicingError {
    #[error("unknown domain {0}")]
    UnknownDomain(DomainId),
    #[error("missing aggregate for requested domain {0}")]
    MissingAggregate(DomainId),
    #[error("slice {0} already exists")]
    DuplicateSlice(SliceId),
    #[error("invalid slice request {slice}: {reason}")]
    InvalidRequest { slice: SliceId, reason: String },
    #[error("slice {slice}: cannot move from {from} to {to}")]
    BadTransition { slice: SliceId, from: GrantState, to: GrantState },
    #[error("slice {slice} is {state}, expected COMMITTED")]
    NotCommitted { slice: SliceId, state: GrantState },
    #[error("task {task} references node {node} outside slice {slice}")]
    TaskOutsideSlice { task: String, node: NodeId, slice: SliceId },
    #[error("unknown link {0} in flow path")]
    UnknownLink(LinkId),
    #[error(transparent)]
    Path(#[from] PathError),
}

/// Bottleneck helper: does `b` carry `rate`?
pub(crate) fn carries(b: Option<&Bottleneck>, rate: Quantity) -> bool {
    b.is_some_and(|b| b.admits(rate))
}
