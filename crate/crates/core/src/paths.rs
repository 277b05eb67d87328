//! Path selection over the coalition graph.
//!
//! Both searches are deterministic: ties are broken by hop count and then by
//! the lexicographic order of the node-id sequence.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::ids::{LinkId, NodeId};
use crate::quantity::{Bottleneck, Quantity};
use crate::topology::{CoalitionTopology, LinkSpec};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
}

/// Free bandwidth per link. Links absent from the map have zero residual.
pub type Residuals = BTreeMap<LinkId, Quantity>;

fn residual_of(residual: &Residuals, link: &LinkId) -> Quantity {
    residual.get(link).copied().unwrap_or(Quantity::ZERO)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WidestPath {
    pub nodes: Vec<NodeId>,
    pub links: Vec<LinkId>,
    pub bottleneck: Bottleneck,
}

/// Neighbour lists sorted by neighbour id, restricted to allowed links.
fn adjacency<'a>(
    topo: &'a CoalitionTopology,
    allow: &dyn Fn(&LinkSpec) -> bool,
) -> BTreeMap<&'a NodeId, Vec<(&'a NodeId, &'a LinkSpec)>> {
    let mut adj: BTreeMap<&NodeId, Vec<(&NodeId, &LinkSpec)>> = BTreeMap::new();
    for n in &topo.nodes {
        adj.entry(&n.node_id).or_default();
    }
    for l in topo.links.iter().filter(|l| allow(l)) {
        if l.endpoint_a == l.endpoint_b {
            continue;
        }
        adj.entry(&l.endpoint_a).or_default().push((&l.endpoint_b, l));
        adj.entry(&l.endpoint_b).or_default().push((&l.endpoint_a, l));
    }
    for list in adj.values_mut() {
        list.sort_by(|x, y| x.0.cmp(y.0).then_with(|| x.1.link_id.cmp(&y.1.link_id)));
    }
    adj
}

fn check_nodes(topo: &CoalitionTopology, ids: [&NodeId; 2]) -> Result<(), PathError> {
    for id in ids {
        if topo.node(id).is_none() {
            return Err(PathError::UnknownNode(id.clone()));
        }
    }
    Ok(())
}

/// Maximum-bottleneck path between two nodes over all links.
pub fn widest_path(
    topo: &CoalitionTopology,
    residual: &Residuals,
    src: &NodeId,
    dst: &NodeId,
) -> Result<Option<WidestPath>, PathError> {
    widest_path_within(topo, residual, src, dst, &|_| true)
}

/// Maximum-bottleneck path using only links accepted by `allow`.
///
/// Among paths with the maximal bottleneck, the one with the fewest hops and
/// then the lexicographically smallest node sequence is returned.
pub fn widest_path_within(
    topo: &CoalitionTopology,
    residual: &Residuals,
    src: &NodeId,
    dst: &NodeId,
    allow: &dyn Fn(&LinkSpec) -> bool,
) -> Result<Option<WidestPath>, PathError> {
    check_nodes(topo, [src, dst])?;
    if src == dst {
        return Ok(Some(WidestPath { nodes: vec![src.clone()], links: vec![], bottleneck: Bottleneck::Unbounded }));
    }
    let adj = adjacency(topo, allow);

    // Max-bottleneck label setting from src.
    let mut best: BTreeMap<&NodeId, Quantity> = BTreeMap::new();
    let mut done: BTreeSet<&NodeId> = BTreeSet::new();
    let mut heap: BinaryHeap<(Bottleneck, Reverse<&NodeId>)> = BinaryHeap::new();
    heap.push((Bottleneck::Unbounded, Reverse(src)));
    while let Some((width, Reverse(node))) = heap.pop() {
        if !done.insert(node) {
            continue;
        }
        if let Bottleneck::Finite(w) = width {
            best.insert(node, w);
        }
        if node == dst {
            break;
        }
        for &(next, link) in &adj[node] {
            if done.contains(next) {
                continue;
            }
            let w = width.min(Bottleneck::Finite(residual_of(residual, &link.link_id)));
            let improves = match best.get(next) {
                Some(&b) => w > Bottleneck::Finite(b),
                None => true,
            };
            if improves {
                if let Bottleneck::Finite(q) = w {
                    best.insert(next, q);
                }
                heap.push((w, Reverse(next)));
            }
        }
    }
    let Some(&limit) = best.get(dst).filter(|_| done.contains(dst)) else {
        return Ok(None);
    };

    // Among links at least as wide as the optimum, take the shortest path with
    // the smallest node sequence: BFS distances from dst, then a greedy walk.
    let wide = |l: &LinkSpec| residual_of(residual, &l.link_id) >= limit;
    let mut dist: BTreeMap<&NodeId, usize> = BTreeMap::from([(dst, 0)]);
    let mut queue = VecDeque::from([dst]);
    while let Some(cur) = queue.pop_front() {
        let d = dist[cur];
        for &(next, link) in &adj[cur] {
            if wide(link) && !dist.contains_key(next) {
                dist.insert(next, d + 1);
                queue.push_back(next);
            }
        }
    }
    let mut nodes = vec![src.clone()];
    let mut links = Vec::new();
    let mut cur = src;
    while cur != dst {
        let want = dist[cur] - 1;
        let &(next, link) = adj[cur]
            .iter()
            .find(|(n, l)| wide(l) && dist.get(n) == Some(&want))
            .expect("bfs distances guarantee a successor");
        nodes.push(next.clone());
        links.push(link.link_id.clone());
        cur = next;
    }
    Ok(Some(WidestPath { nodes, links, bottleneck: Bottleneck::Finite(limit) }))
}

/// A routed path with its accumulated latency.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Route {
    pub nodes: Vec<NodeId>,
    pub links: Vec<LinkId>,
    pub latency_ms: Quantity,
}

impl Route {
    pub fn local(node: &NodeId) -> Self {
        Route { nodes: vec![node.clone()], links: vec![], latency_ms: Quantity::ZERO }
    }

    pub fn hops(&self) -> usize {
        self.links.len()
    }
}

/// Minimum-latency route whose every link has at least `min_rate` residual.
///
/// Ties: fewer hops, then lexicographically smallest node sequence.
pub fn fastest_route(
    topo: &CoalitionTopology,
    residual: &Residuals,
    src: &NodeId,
    dst: &NodeId,
    min_rate: Quantity,
) -> Result<Option<Route>, PathError> {
    check_nodes(topo, [src, dst])?;
    if src == dst {
        return Ok(Some(Route::local(src)));
    }
    let adj = adjacency(topo, &|l| residual_of(residual, &l.link_id) >= min_rate);

    // Labels are (latency, hops, node path); the order is preserved under
    // extension by a common link, so label-setting search is exact.
    type Label<'a> = (Quantity, usize, Vec<&'a NodeId>, Vec<&'a LinkId>);
    let mut heap: BinaryHeap<Reverse<Label>> = BinaryHeap::new();
    let mut done: BTreeSet<&NodeId> = BTreeSet::new();
    heap.push(Reverse((Quantity::ZERO, 0, vec![src], vec![])));
    while let Some(Reverse((lat, hops, path, links))) = heap.pop() {
        let node = *path.last().expect("non-empty");
        if !done.insert(node) {
            continue;
        }
        if node == dst {
            return Ok(Some(Route {
                nodes: path.into_iter().cloned().collect(),
                links: links.into_iter().cloned().collect(),
                latency_ms: lat,
            }));
        }
        for &(next, link) in &adj[node] {
            if done.contains(next) {
                continue;
            }
            let mut p = path.clone();
            p.push(next);
            let mut ls = links.clone();
            ls.push(&link.link_id);
            heap.push(Reverse((lat + link.latency_ms, hops + 1, p, ls)));
        }
    }
    Ok(None)
}
