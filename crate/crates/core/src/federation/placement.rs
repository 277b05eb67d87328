//! Tiered placement of selected models onto coalition nodes.
//!
//! The objective is the sum over interactions of route latency times the
//! interaction's minimum rate. Each interaction takes its fastest route among
//! links with enough residual bandwidth, so for a fixed assignment the routes
//! are independent; the search is over assignments only.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{FederationPlan, Interaction, MissionProcessModel, PlanMode};
use crate::ids::{Capability, ModelId, NodeId};
use crate::paths::{fastest_route, PathError, Residuals, Route};
use crate::quantity::Cost;
use crate::registry::{ModelDescriptor, SensitivityLevel};
use crate::resources::ResourceVector;
use crate::topology::{CoalitionTopology, NodeSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintClass {
    Capacity,
    Tier,
    Latency,
    Bandwidth,
}

impl fmt::Display for ConstraintClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintClass::Capacity => "capacity",
            ConstraintClass::Tier => "tier",
            ConstraintClass::Latency => "latency",
            ConstraintClass::Bandwidth => "bandwidth",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Offender {
    Model(ModelId),
    Interaction(usize),
}

impl fmt::Display for Offender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Offender::Model(m) => write!(f, "model {m}"),
            Offender::Interaction(i) => write!(f, "interaction {i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlacementError {
    #[error("no model selected for capability {0}")]
    MissingSelection(Capability),
    #[error("infeasible({class}): {offender}")]
    Infeasible { class: ConstraintClass, offender: Offender },
    #[error(transparent)]
    Path(#[from] PathError),
}

/// How the planner chooses between exhaustive and greedy search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    /// Exhaustive within the size limits, greedy above them.
    #[default]
    Auto,
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementOptions {
    #[serde(default)]
    pub mode: SearchMode,
    #[serde(default = "default_exact_models")]
    pub exact_max_models: usize,
    #[serde(default = "default_exact_nodes")]
    pub exact_max_nodes: usize,
}

fn default_exact_models() -> usize {
    5
}

fn default_exact_nodes() -> usize {
    8
}

impl Default for PlacementOptions {
    fn default() -> Self {
        PlacementOptions { mode: SearchMode::Auto, exact_max_models: 5, exact_max_nodes: 8 }
    }
}

impl PlacementOptions {
    pub fn with_mode(mode: SearchMode) -> Self {
        PlacementOptions { mode, ..Self::default() }
    }
}

/// Whether `node` may host `model` regardless of capacity.
pub fn tier_eligible(model: &ModelDescriptor, node: &NodeSpec) -> bool {
    model.allowed_tiers.contains(&node.tier) && (model.sensitivity != SensitivityLevel::Secret || node.is_enclave)
}

type RouteOutcome = Result<Route, ConstraintClass>;

/// Fastest route for an interaction between two hosts, classified on failure.
pub fn route_interaction(
    topo: &CoalitionTopology,
    residual: &Residuals,
    from: &NodeId,
    to: &NodeId,
    interaction: &Interaction,
) -> Result<RouteOutcome, PathError> {
    Ok(match fastest_route(topo, residual, from, to, interaction.min_rate_mbps)? {
        None => Err(ConstraintClass::Bandwidth),
        Some(r) if r.latency_ms > interaction.max_latency_ms => Err(ConstraintClass::Latency),
        Some(r) => Ok(r),
    })
}

struct Problem<'a> {
    topo: &'a CoalitionTopology,
    residual: &'a Residuals,
    models: Vec<&'a ModelDescriptor>,
    nodes: Vec<&'a NodeId>,
    free: Vec<ResourceVector>,
    /// Candidate node indices per model, ascending by node id.
    cands: Vec<Vec<usize>>,
    /// (producer model index, consumer model index, interaction).
    inters: Vec<(usize, usize, &'a Interaction)>,
    cache: BTreeMap<(usize, usize, usize), RouteOutcome>,
}

impl<'a> Problem<'a> {
    fn route(&mut self, inter: usize, from: usize, to: usize) -> Result<RouteOutcome, PathError> {
        if let Some(r) = self.cache.get(&(inter, from, to)) {
            return Ok(r.clone());
        }
        let r = route_interaction(self.topo, self.residual, self.nodes[from], self.nodes[to], self.inters[inter].2)?;
        self.cache.insert((inter, from, to), r.clone());
        Ok(r)
    }
}

#[derive(Default)]
struct Failure {
    depth: usize,
    found: Option<(ConstraintClass, Offender)>,
}

impl Failure {
    /// Keeps the failure reached deepest into the search; earlier wins ties.
    fn note(&mut self, depth: usize, class: ConstraintClass, offender: Offender) {
        if self.found.is_none() || depth > self.depth {
            self.depth = depth;
            self.found = Some((class, offender));
        }
    }

    fn into_error(self) -> PlacementError {
        let (class, offender) = self.found.expect("search failed without recording a cause");
        PlacementError::Infeasible { class, offender }
    }
}

struct Best {
    cost: Cost,
    hops: usize,
    assign: Vec<usize>,
    routes: Vec<Option<Route>>,
}

/// Assigns every selected model to a node and routes every interaction.
///
/// `free` lists the nodes available for placement and their free capacity;
/// nodes absent from it are never used as hosts.
pub fn plan_placement(
    topo: &CoalitionTopology,
    free: &BTreeMap<NodeId, ResourceVector>,
    residual: &Residuals,
    selection: &BTreeMap<Capability, ModelDescriptor>,
    pm: &MissionProcessModel,
    options: &PlacementOptions,
) -> Result<FederationPlan, PlacementError> {
    for cap in pm.required_capabilities.iter().chain(pm.interactions.iter().flat_map(|i| [&i.producer_capability, &i.consumer_capability])) {
        if !selection.contains_key(cap) {
            return Err(PlacementError::MissingSelection(cap.clone()));
        }
    }
    let mut models: Vec<&ModelDescriptor> = selection.values().collect();
    models.sort_by(|a, b| a.model_id.cmp(&b.model_id));
    models.dedup_by(|a, b| a.model_id == b.model_id);
    let index_of = |m: &ModelId| models.iter().position(|d| &d.model_id == m).expect("selected model");

    let hosts: Vec<(&NodeId, &NodeSpec, &ResourceVector)> =
        free.iter().filter_map(|(id, f)| topo.node(id).map(|n| (id, n, f))).collect();
    let mut cands = Vec::with_capacity(models.len());
    for m in &models {
        let eligible: Vec<usize> = (0..hosts.len()).filter(|&i| tier_eligible(m, hosts[i].1)).collect();
        if eligible.is_empty() {
            return Err(PlacementError::Infeasible { class: ConstraintClass::Tier, offender: Offender::Model(m.model_id.clone()) });
        }
        let fitting: Vec<usize> = eligible.into_iter().filter(|&i| m.footprint.leq(hosts[i].2)).collect();
        if fitting.is_empty() {
            return Err(PlacementError::Infeasible {
                class: ConstraintClass::Capacity,
                offender: Offender::Model(m.model_id.clone()),
            });
        }
        cands.push(fitting);
    }
    let inters = pm
        .interactions
        .iter()
        .map(|i| {
            let p = index_of(&selection[&i.producer_capability].model_id);
            let c = index_of(&selection[&i.consumer_capability].model_id);
            (p, c, i)
        })
        .collect();

    let union: BTreeSet<usize> = cands.iter().flatten().copied().collect();
    let exact = match options.mode {
        SearchMode::Exact => true,
        SearchMode::Heuristic => false,
        SearchMode::Auto => models.len() <= options.exact_max_models && union.len() <= options.exact_max_nodes,
    };

    let mut problem = Problem {
        topo,
        residual,
        models,
        nodes: hosts.iter().map(|h| h.0).collect(),
        free: hosts.iter().map(|h| *h.2).collect(),
        cands,
        inters,
        cache: BTreeMap::new(),
    };
    let best = if exact { exhaustive(&mut problem)? } else { greedy(&mut problem)? };

    let selected = selection.iter().map(|(c, d)| (c.clone(), d.model_id.clone())).collect();
    let placement = best
        .assign
        .iter()
        .enumerate()
        .map(|(m, &n)| (problem.models[m].model_id.clone(), problem.nodes[n].clone()))
        .collect();
    let routes = best.routes.into_iter().enumerate().map(|(i, r)| (i, r.expect("all routed"))).collect();
    Ok(FederationPlan {
        mission_id: pm.mission_id.clone(),
        selected,
        placement,
        routes,
        mediations: vec![],
        total_cost: best.cost,
        total_hops: best.hops,
        mode: if exact { PlanMode::Exact } else { PlanMode::Heuristic },
    })
}

/// Depth-first enumeration of assignments in lexicographic node order with
/// capacity and cost pruning. The first assignment reaching the minimum
/// (cost, hops) is kept, which is the lexicographically smallest one.
fn exhaustive(p: &mut Problem) -> Result<Best, PlacementError> {
    struct State {
        assign: Vec<usize>,
        usage: Vec<ResourceVector>,
        routes: Vec<Option<Route>>,
        best: Option<Best>,
        failure: Failure,
    }

    fn closing(p: &Problem, model: usize) -> Vec<usize> {
        (0..p.inters.len()).filter(|&j| p.inters[j].0.max(p.inters[j].1) == model).collect()
    }

    fn dfs(p: &mut Problem, s: &mut State, closes: &[Vec<usize>], cost: Cost, hops: usize) -> Result<(), PlacementError> {
        let i = s.assign.len();
        if i == p.models.len() {
            let better = s.best.as_ref().is_none_or(|b| (cost, hops) < (b.cost, b.hops));
            if better {
                s.best = Some(Best { cost, hops, assign: s.assign.clone(), routes: s.routes.clone() });
            }
            return Ok(());
        }
        for ci in 0..p.cands[i].len() {
            let node = p.cands[i][ci];
            let used = s.usage[node].add(&p.models[i].footprint);
            if !used.leq(&p.free[node]) {
                s.failure.note(i, ConstraintClass::Capacity, Offender::Model(p.models[i].model_id.clone()));
                continue;
            }
            let saved = std::mem::replace(&mut s.usage[node], used);
            s.assign.push(node);
            let (mut c2, mut h2, mut ok) = (cost, hops, true);
            for &j in &closes[i] {
                let (pm, cm, inter) = p.inters[j];
                match p.route(j, s.assign[pm], s.assign[cm])? {
                    Ok(r) => {
                        c2 = c2 + inter.min_rate_mbps.mul(r.latency_ms);
                        h2 += r.hops();
                        s.routes[j] = Some(r);
                    }
                    Err(class) => {
                        s.failure.note(i + 1, class, Offender::Interaction(j));
                        ok = false;
                        break;
                    }
                }
            }
            let pruned = s.best.as_ref().is_some_and(|b| (c2, h2) >= (b.cost, b.hops));
            if ok && !pruned {
                dfs(p, s, closes, c2, h2)?;
            }
            for &j in &closes[i] {
                s.routes[j] = None;
            }
            s.assign.pop();
            s.usage[node] = saved;
        }
        Ok(())
    }

    let closes: Vec<Vec<usize>> = (0..p.models.len()).map(|m| closing(p, m)).collect();
    let mut s = State {
        assign: vec![],
        usage: vec![ResourceVector::ZERO; p.nodes.len()],
        routes: vec![None; p.inters.len()],
        best: None,
        failure: Failure::default(),
    };
    dfs(p, &mut s, &closes, Cost::ZERO, 0)?;
    s.best.ok_or_else(|| s.failure.into_error())
}

/// Places models in descending compute footprint order, each on the feasible
/// node with the smallest marginal (cost, hops), ties by node id.
fn greedy(p: &mut Problem) -> Result<Best, PlacementError> {
    let mut order: Vec<usize> = (0..p.models.len()).collect();
    order.sort_by(|&a, &b| {
        p.models[b].footprint.compute.cmp(&p.models[a].footprint.compute).then_with(|| p.models[a].model_id.cmp(&p.models[b].model_id))
    });
    let mut assign: Vec<Option<usize>> = vec![None; p.models.len()];
    let mut usage = vec![ResourceVector::ZERO; p.nodes.len()];
    let mut routes: Vec<Option<Route>> = vec![None; p.inters.len()];
    let (mut cost, mut hops) = (Cost::ZERO, 0);

    for m in order {
        let mut failure: Option<(ConstraintClass, Offender)> = None;
        let mut choice: Option<(Cost, usize, usize, Vec<(usize, Route)>)> = None;
        for ci in 0..p.cands[m].len() {
            let node = p.cands[m][ci];
            if !usage[node].add(&p.models[m].footprint).leq(&p.free[node]) {
                continue;
            }
            assign[m] = Some(node);
            let (mut c, mut h, mut ok, mut new_routes) = (Cost::ZERO, 0, true, vec![]);
            for j in 0..p.inters.len() {
                let (pm, cm, inter) = p.inters[j];
                if pm != m && cm != m {
                    continue;
                }
                let (Some(a), Some(b)) = (assign[pm], assign[cm]) else { continue };
                match p.route(j, a, b)? {
                    Ok(r) => {
                        c = c + inter.min_rate_mbps.mul(r.latency_ms);
                        h += r.hops();
                        new_routes.push((j, r));
                    }
                    Err(class) => {
                        failure.get_or_insert((class, Offender::Interaction(j)));
                        ok = false;
                        break;
                    }
                }
            }
            assign[m] = None;
            if ok && choice.as_ref().is_none_or(|(bc, bh, _, _)| (c, h) < (*bc, *bh)) {
                choice = Some((c, h, node, new_routes));
            }
        }
        let Some((c, h, node, new_routes)) = choice else {
            let (class, offender) =
                failure.unwrap_or((ConstraintClass::Capacity, Offender::Model(p.models[m].model_id.clone())));
            return Err(PlacementError::Infeasible { class, offender });
        };
        assign[m] = Some(node);
        usage[node] = usage[node].add(&p.models[m].footprint);
        cost = cost + c;
        hops += h;
        for (j, r) in new_routes {
            routes[j] = Some(r);
        }
    }
    Ok(Best { cost, hops, assign: assign.into_iter().map(|a| a.expect("placed")).collect(), routes })
}
