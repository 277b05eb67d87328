//! Independent oracles and generators shared by the integration tests.
//!
//! Oracles here never call the algorithm they check: paths are enumerated,
//! placements brute-forced, rates water-filled from scratch.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use dtc_core::federation::{Interaction, MissionProcessModel, PolicyContext, SemanticDictionary};
use dtc_core::ids::{Capability, DomainId, LinkId, NodeId};
use dtc_core::paths::Residuals;
use dtc_core::quantity::{Cost, Quantity};
use dtc_core::registry::{ModelDescriptor, SensitivityLevel};
use dtc_core::resources::ResourceVector;
use dtc_core::scenario::{EventKind, Scenario, ScenarioConfig, ScenarioEvent};
use dtc_core::slicing::{FlowPath, SliceRequest};
use dtc_core::topology::{CoalitionTopology, Domain, LinkSpec, NodeSpec, Tier};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn q(x: f64) -> Quantity {
    Quantity::of(x)
}

// ---------------------------------------------------------------- paths

/// A simple path as (nodes, links).
pub type SimplePath = (Vec<NodeId>, Vec<LinkId>);

/// Every simple path from `src` to `dst` over links accepted by `allow`.
pub fn simple_paths(topo: &CoalitionTopology, src: &NodeId, dst: &NodeId, allow: &dyn Fn(&LinkSpec) -> bool) -> Vec<SimplePath> {
    fn go(
        topo: &CoalitionTopology,
        dst: &NodeId,
        allow: &dyn Fn(&LinkSpec) -> bool,
        nodes: &mut Vec<NodeId>,
        links: &mut Vec<LinkId>,
        out: &mut Vec<SimplePath>,
    ) {
        let cur = nodes.last().unwrap().clone();
        if &cur == dst {
            out.push((nodes.clone(), links.clone()));
            return;
        }
        for l in topo.links.iter().filter(|l| allow(l)) {
            let Some(next) = l.other_end(&cur) else { continue };
            if nodes.contains(next) {
                continue;
            }
            nodes.push(next.clone());
            links.push(l.link_id.clone());
            go(topo, dst, allow, nodes, links, out);
            nodes.pop();
            links.pop();
        }
    }
    let mut out = Vec::new();
    go(topo, dst, allow, &mut vec![src.clone()], &mut vec![], &mut out);
    out
}

fn residual_of(r: &Residuals, l: &LinkId) -> Quantity {
    r.get(l).copied().unwrap_or(Quantity::ZERO)
}

/// Largest bottleneck over all simple paths; `None` if unreachable, and
/// `Some(None)` for the unbounded trivial path.
pub fn oracle_widest(topo: &CoalitionTopology, r: &Residuals, src: &NodeId, dst: &NodeId) -> Option<Option<Quantity>> {
    if src == dst {
        return Some(None);
    }
    simple_paths(topo, src, dst, &|_| true)
        .iter()
        .map(|(_, links)| links.iter().map(|l| residual_of(r, l)).min().unwrap())
        .max()
        .map(Some)
}

pub fn path_latency(topo: &CoalitionTopology, links: &[LinkId]) -> Quantity {
    links.iter().map(|l| topo.link(l).unwrap().latency_ms).sum()
}

/// Minimum latency over simple paths whose links all carry `rate`.
pub fn oracle_fastest(topo: &CoalitionTopology, r: &Residuals, src: &NodeId, dst: &NodeId, rate: Quantity) -> Option<Quantity> {
    if src == dst {
        return Some(Quantity::ZERO);
    }
    simple_paths(topo, src, dst, &|l| residual_of(r, &l.link_id) >= rate)
        .iter()
        .map(|(_, links)| path_latency(topo, links))
        .min()
}

// ------------------------------------------------------------ placement

fn eligible(m: &ModelDescriptor, n: &NodeSpec) -> bool {
    m.allowed_tiers.contains(&n.tier) && (m.sensitivity != SensitivityLevel::Secret || n.is_enclave)
}

/// Minimum total cost over every assignment of `models` to nodes in `free`.
/// Interactions are (producer index, consumer index, interaction).
pub fn oracle_placement(
    topo: &CoalitionTopology,
    free: &BTreeMap<NodeId, ResourceVector>,
    r: &Residuals,
    models: &[ModelDescriptor],
    inters: &[(usize, usize, Interaction)],
) -> Option<(Cost, Vec<NodeId>)> {
    let nodes: Vec<&NodeId> = free.keys().collect();
    let mut routes: BTreeMap<(usize, usize, usize), Option<Quantity>> = BTreeMap::new();
    let mut best: Option<(Cost, Vec<NodeId>)> = None;
    let mut assign = vec![0usize; models.len()];
    let total = nodes.len().pow(models.len() as u32);
    'outer: for code in 0..total {
        let mut c = code;
        for a in assign.iter_mut() {
            *a = c % nodes.len();
            c /= nodes.len();
        }
        let mut usage: BTreeMap<usize, ResourceVector> = BTreeMap::new();
        for (m, &n) in assign.iter().enumerate() {
            if !eligible(&models[m], topo.node(nodes[n]).unwrap()) {
                continue 'outer;
            }
            let u = usage.entry(n).or_default();
            *u = u.add(&models[m].footprint);
            if !u.leq(&free[nodes[n]]) {
                continue 'outer;
            }
        }
        let mut cost = Cost::ZERO;
        for (j, (p, cidx, it)) in inters.iter().enumerate() {
            let (a, b) = (assign[*p], assign[*cidx]);
            let lat = *routes
                .entry((j, a, b))
                .or_insert_with(|| oracle_fastest(topo, r, nodes[a], nodes[b], it.min_rate_mbps));
            match lat {
                Some(l) if l <= it.max_latency_ms => cost = cost + it.min_rate_mbps.mul(l),
                _ => continue 'outer,
            }
        }
        if best.as_ref().is_none_or(|(b, _)| cost < *b) {
            best = Some((cost, assign.iter().map(|&n| nodes[n].clone()).collect()));
        }
    }
    best
}

// ------------------------------------------------------------- fairness

/// Max-min fair rates by the bottleneck method: repeatedly find the lowest
/// level at which some link saturates or some flow is satisfied, freeze the
/// flows concerned at that level, and remove their share.
pub fn water_fill(desired: &[f64], paths: &[Vec<usize>], caps: &[f64]) -> Vec<f64> {
    let n = desired.len();
    let mut rate = vec![0.0; n];
    let mut frozen = vec![false; n];
    let mut remaining = caps.to_vec();
    for f in 0..n {
        if paths[f].is_empty() {
            rate[f] = desired[f];
            frozen[f] = true;
        }
    }
    while frozen.iter().any(|f| !f) {
        let mut level = f64::INFINITY;
        for (l, cap) in remaining.iter().enumerate() {
            let users = (0..n).filter(|&f| !frozen[f] && paths[f].contains(&l)).count();
            if users > 0 {
                level = level.min(cap / users as f64);
            }
        }
        for f in (0..n).filter(|&f| !frozen[f]) {
            level = level.min(desired[f]);
        }
        let level = level.max(0.0);
        let mut saturated = vec![false; caps.len()];
        for (l, cap) in remaining.iter().enumerate() {
            let users = (0..n).filter(|&f| !frozen[f] && paths[f].contains(&l)).count();
            if users > 0 && cap / users as f64 <= level + 1e-12 {
                saturated[l] = true;
            }
        }
        let fix: Vec<usize> = (0..n)
            .filter(|&f| !frozen[f] && (desired[f] <= level + 1e-12 || paths[f].iter().any(|&l| saturated[l])))
            .collect();
        for &f in &fix {
            rate[f] = level.min(desired[f]);
            frozen[f] = true;
            for &l in &paths[f] {
                remaining[l] = (remaining[l] - rate[f]).max(0.0);
            }
        }
    }
    rate
}

/// Max-min characterisation: every flow below its demand crosses a saturated
/// link on which no other flow gets more.
pub fn max_min_fair(rates: &[f64], desired: &[f64], paths: &[Vec<usize>], caps: &[f64], tol: f64) -> bool {
    let load = |l: usize| (0..rates.len()).filter(|&f| paths[f].contains(&l)).map(|f| rates[f]).sum::<f64>();
    for l in 0..caps.len() {
        if load(l) > caps[l] + tol {
            return false;
        }
    }
    (0..rates.len()).all(|f| {
        rates[f] >= desired[f] - tol
            || paths[f].iter().any(|&l| {
                load(l) >= caps[l] - tol
                    && (0..rates.len()).filter(|&g| paths[g].contains(&l)).all(|g| rates[g] <= rates[f] + tol)
            })
    })
}

// ------------------------------------------------------------ admission

/// Whether a slice request can be admitted in full against the given free
/// resources and link residuals. Anchored flows may use any inter-domain link
/// joining their two domains, reached by intra-domain paths on both sides.
pub fn oracle_admissible(
    topo: &CoalitionTopology,
    free: &BTreeMap<NodeId, ResourceVector>,
    r: &Residuals,
    req: &SliceRequest,
) -> bool {
    let units: Vec<(&DomainId, usize, &dtc_core::slicing::DemandUnit)> = req
        .per_domain_demand
        .iter()
        .flat_map(|(d, us)| us.iter().enumerate().map(move |(i, u)| (d, i, u)))
        .collect();
    let hosts: Vec<Vec<NodeId>> = units
        .iter()
        .map(|(d, _, u)| match &u.pin {
            Some(p) => vec![p.clone()],
            None => topo.nodes_in(d).map(|n| n.node_id.clone()).collect(),
        })
        .collect();
    let mut choice = vec![0usize; units.len()];
    loop {
        let mut usage: BTreeMap<&NodeId, ResourceVector> = BTreeMap::new();
        let mut fits = true;
        for (k, (_, _, u)) in units.iter().enumerate() {
            let h = &hosts[k][choice[k]];
            let e = usage.entry(h).or_default();
            *e = e.add(&u.demand);
            fits &= e.leq(&free.get(h).copied().unwrap_or_default());
        }
        if fits {
            let host_of = |d: &DomainId, i: usize| {
                let k = units.iter().position(|(dd, ii, _)| *dd == d && *ii == i).unwrap();
                hosts[k][choice[k]].clone()
            };
            let options: Vec<Vec<Vec<LinkId>>> =
                req.flows.iter().map(|f| flow_options(topo, f, &host_of)).collect();
            if route_all(r, req, &options, 0, &mut BTreeMap::new()) {
                return true;
            }
        }
        let mut k = 0;
        loop {
            if k == units.len() {
                return false;
            }
            choice[k] += 1;
            if choice[k] < hosts[k].len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

fn flow_options(
    topo: &CoalitionTopology,
    f: &dtc_core::slicing::SliceFlow,
    host_of: &dyn Fn(&DomainId, usize) -> NodeId,
) -> Vec<Vec<LinkId>> {
    match &f.path {
        FlowPath::Pinned(nodes) => {
            vec![nodes.windows(2).map(|w| topo.link_between(&w[0], &w[1]).unwrap().link_id.clone()).collect()]
        }
        FlowPath::Anchored { src_unit, dst_unit } => {
            let (hs, hd) = (host_of(&f.src_domain, *src_unit), host_of(&f.dst_domain, *dst_unit));
            let within = |d: &DomainId| {
                let d = d.clone();
                move |l: &LinkSpec| topo.domain_of(&l.endpoint_a) == Some(&d) && topo.domain_of(&l.endpoint_b) == Some(&d)
            };
            let mut out = Vec::new();
            for l in &topo.links {
                let (da, db) = (topo.domain_of(&l.endpoint_a).unwrap(), topo.domain_of(&l.endpoint_b).unwrap());
                let (gs, gd) = if da == &f.src_domain && db == &f.dst_domain {
                    (&l.endpoint_a, &l.endpoint_b)
                } else if db == &f.src_domain && da == &f.dst_domain {
                    (&l.endpoint_b, &l.endpoint_a)
                } else {
                    continue;
                };
                for (_, a) in simple_paths(topo, &hs, gs, &within(&f.src_domain)) {
                    for (_, b) in simple_paths(topo, gd, &hd, &within(&f.dst_domain)) {
                        let mut links = a.clone();
                        links.push(l.link_id.clone());
                        links.extend(b.iter().cloned());
                        out.push(links);
                    }
                }
            }
            out
        }
    }
}

fn route_all(r: &Residuals, req: &SliceRequest, options: &[Vec<Vec<LinkId>>], i: usize, used: &mut BTreeMap<LinkId, Quantity>) -> bool {
    if i == options.len() {
        return true;
    }
    let rate = req.flows[i].rate_mbps;
    for links in &options[i] {
        let ok = links.iter().all(|l| used.get(l).copied().unwrap_or_default() + rate <= residual_of(r, l));
        if !ok {
            continue;
        }
        for l in links {
            *used.entry(l.clone()).or_default() = used.get(l).copied().unwrap_or_default() + rate;
        }
        let done = route_all(r, req, options, i + 1, used);
        for l in links {
            let e = used.get_mut(l).unwrap();
            *e = e.checked_sub(rate).unwrap();
        }
        if done {
            return true;
        }
    }
    false
}

// ------------------------------------------------------------ generators

pub fn node(id: &str, domain: &str, tier: Tier, cap: ResourceVector, gateway: bool) -> NodeSpec {
    NodeSpec { node_id: id.into(), domain_id: domain.into(), tier, capacity: cap, is_enclave: false, is_gateway: gateway }
}

pub fn link(id: &str, a: &NodeId, b: &NodeId, cap: f64, lat: f64) -> LinkSpec {
    LinkSpec { link_id: id.into(), endpoint_a: a.clone(), endpoint_b: b.clone(), capacity_mbps: q(cap), latency_ms: q(lat) }
}

pub fn tier_of(i: usize) -> Tier {
    [Tier::Edge, Tier::Tactical, Tier::Cloud][i % 3]
}

/// Random valid topology: each domain is connected internally and its
/// gateways are linked to gateways of other domains.
pub fn random_topology(g: &mut ChaCha8Rng, domains: usize, max_nodes_per_domain: usize) -> CoalitionTopology {
    let mut topo = CoalitionTopology::default();
    let mut next_link = 0;
    let mut gateways: Vec<Vec<NodeId>> = vec![];
    for d in 0..domains {
        let did = format!("d{d}");
        let n = g.random_range(1..=max_nodes_per_domain);
        let ids: Vec<NodeId> = (0..n).map(|i| NodeId::from(format!("n{d}{i}").as_str())).collect();
        let gw_count = if n > 1 && g.random_bool(0.3) { 2 } else { 1 };
        for (i, id) in ids.iter().enumerate() {
            let cap = ResourceVector::of(g.random_range(1..=8) as f64, g.random_range(2..=16) as f64, 64.0, 100.0);
            topo.nodes.push(node(id.as_str(), &did, tier_of(g.random_range(0..3)), cap, i < gw_count));
        }
        for i in 1..n {
            let j = g.random_range(0..i);
            topo.links.push(link(&format!("l{next_link}"), &ids[j], &ids[i], g.random_range(1..=12) as f64, g.random_range(1..=5) as f64));
            next_link += 1;
        }
        for i in 0..n {
            for j in i + 1..n {
                if g.random_bool(0.15) && topo.link_between(&ids[i], &ids[j]).is_none() {
                    topo.links.push(link(&format!("l{next_link}"), &ids[i], &ids[j], g.random_range(1..=12) as f64, g.random_range(1..=5) as f64));
                    next_link += 1;
                }
            }
        }
        topo.domains.push(Domain {
            domain_id: did.as_str().into(),
            partner_id: format!("p{d}").as_str().into(),
            node_ids: ids.iter().cloned().collect(),
            gateway_ids: ids[..gw_count].iter().cloned().collect(),
        });
        gateways.push(ids[..gw_count].to_vec());
    }
    for a in 0..domains {
        for b in a + 1..domains {
            for ga in &gateways[a] {
                for gb in &gateways[b] {
                    if g.random_bool(0.6) {
                        topo.links.push(link(&format!("l{next_link}"), ga, gb, g.random_range(2..=20) as f64, g.random_range(5..=30) as f64));
                        next_link += 1;
                    }
                }
            }
        }
    }
    topo
}

pub fn model(id: &str, partner: &str, cap: &str, footprint: ResourceVector, tiers: &[Tier], hz: f64) -> ModelDescriptor {
    ModelDescriptor {
        model_id: id.into(),
        partner_id: partner.into(),
        capabilities: BTreeSet::from([Capability::from(cap)]),
        output_schema: Default::default(),
        input_schema: Default::default(),
        input_requirements: vec![],
        footprint,
        sensitivity: SensitivityLevel::Unclassified,
        allowed_tiers: tiers.iter().copied().collect(),
        update_rate_hz: hz,
        update_size_mb: q(0.1),
    }
}

pub fn interaction(from: &str, to: &str, rate: f64, latency: f64) -> Interaction {
    Interaction { producer_capability: from.into(), consumer_capability: to.into(), min_rate_mbps: q(rate), max_latency_ms: q(latency) }
}

/// Random scenario within the given bounds on domains, nodes and events.
pub fn random_scenario(seed: u64) -> Scenario {
    let mut g = rng(seed);
    let domains = g.random_range(1..=3);
    let topo = random_topology(&mut g, domains, 10 / domains);
    let partners: Vec<String> = (0..domains).map(|d| format!("p{d}")).collect();

    let mut policy = PolicyContext::default();
    for p in &partners {
        for level in SensitivityLevel::ALL {
            policy.grant(p.as_str(), level, partners.iter().map(|s| s.as_str()));
        }
    }

    let n_caps = g.random_range(2..=4);
    let mut models = Vec::new();
    for c in 0..n_caps {
        for k in 0..g.random_range(1..=2) {
            let mut tiers: Vec<Tier> = (0..3).filter(|_| g.random_bool(0.6)).map(tier_of).collect();
            if tiers.is_empty() {
                tiers.push(tier_of(g.random_range(0..3)));
            }
            let fp = ResourceVector::of(g.random_range(1..=4) as f64, g.random_range(1..=4) as f64, 1.0, 1.0);
            let partner = &partners[g.random_range(0..domains)];
            models.push(model(&format!("m{c}{k}"), partner, &format!("c{c}"), fp, &tiers, g.random_range(1..=10) as f64));
        }
    }

    let mut missions = Vec::new();
    for m in 0..g.random_range(1..=3) {
        let caps: Vec<usize> = (0..n_caps).filter(|_| g.random_bool(0.6)).collect();
        let caps = if caps.len() < 2 { vec![0, 1] } else { caps };
        let mut interactions = Vec::new();
        for w in caps.windows(2) {
            if g.random_bool(0.8) {
                interactions.push(interaction(&format!("c{}", w[0]), &format!("c{}", w[1]), g.random_range(1..=4) as f64, 200.0));
            }
        }
        missions.push(MissionProcessModel {
            mission_id: format!("mission{m}").as_str().into(),
            participants: partners.iter().map(|p| p.as_str().into()).collect(),
            required_capabilities: caps.iter().map(|c| Capability::from(format!("c{c}").as_str())).collect(),
            interactions,
            classification_ceiling: SensitivityLevel::Secret,
            duration_ms: g.random_bool(0.5).then(|| g.random_range(500..=4000)),
            shared_with_physical: None,
        });
    }

    let mut events = Vec::new();
    let mut requested = BTreeSet::new();
    let n_events = g.random_range(1..=19);
    for _ in 0..n_events {
        let at = g.random_range(0..5000);
        let kind = match g.random_range(0..7) {
            0 | 1 => {
                let m = g.random_range(0..missions.len());
                if !requested.insert(m) {
                    continue;
                }
                EventKind::MissionRequest { mission_id: missions[m].mission_id.clone() }
            }
            2 if !topo.links.is_empty() => {
                let l = &topo.links[g.random_range(0..topo.links.len())];
                let cap = l.capacity_mbps.value() * g.random_range(0..=10) as f64 / 10.0;
                EventKind::LinkDegrade { link_id: l.link_id.clone(), capacity_mbps: q(cap) }
            }
            3 if !topo.links.is_empty() => {
                EventKind::LinkRestore { link_id: topo.links[g.random_range(0..topo.links.len())].link_id.clone() }
            }
            4 => EventKind::NodeFail { node_id: topo.nodes[g.random_range(0..topo.nodes.len())].node_id.clone() },
            5 => EventKind::NodeRestore { node_id: topo.nodes[g.random_range(0..topo.nodes.len())].node_id.clone() },
            _ => {
                let load = ResourceVector::of(g.random_range(0..=3) as f64, g.random_range(0..=3) as f64, 0.0, 0.0);
                EventKind::PreloadPhysicalLoad { node_id: topo.nodes[g.random_range(0..topo.nodes.len())].node_id.clone(), load }
            }
        };
        events.push(ScenarioEvent::new(at, kind));
    }
    events.sort_by_key(|e| e.at_ms);
    events.push(ScenarioEvent::new(5000, EventKind::End));

    Scenario {
        topology: topo,
        models,
        policy,
        dictionary: SemanticDictionary::default(),
        missions,
        events,
        config: ScenarioConfig::default(),
    }
}
