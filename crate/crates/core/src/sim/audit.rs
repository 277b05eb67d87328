use std::collections::BTreeMap;

use crate::ids::{LinkId, NodeId};
use crate::quantity::Quantity;
use crate::resources::ResourceVector;
use crate::runtime::MissionStatus;
use crate::slicing::{ControlPlane, GrantState, LinkState};

use super::Simulation;

const RATE_TOLERANCE: f64 = 1e-9;

/// Checks the control plane's books: node conservation and overcommit,
/// link reservation totals, and allocated flow rates against live capacity.
pub fn audit_plane(plane: &ControlPlane) -> Vec<String> {
    let mut out = Vec::new();
    for dc in plane.dcs.values() {
        let mut held: BTreeMap<&NodeId, ResourceVector> = BTreeMap::new();
        for r in dc.reservations.values() {
            for (n, v) in &r.nodes {
                let e = held.entry(n).or_default();
                *e = e.add(v);
            }
        }
        for (n, st) in &dc.nodes {
            let reserved = held.get(n).copied().unwrap_or_default();
            let used = reserved.add(&st.physical);
            if !used.leq(&st.capacity) {
                out.push(format!("node {n}: reservations {reserved} plus physical {} exceed capacity {}", st.physical, st.capacity));
            } else if st.free.add(&used) != st.capacity {
                out.push(format!(
                    "node {n}: free {} + reserved {reserved} + physical {} != capacity {}",
                    st.free, st.physical, st.capacity
                ));
            }
        }
        for l in held.keys().filter(|n| !dc.nodes.contains_key(**n)) {
            out.push(format!("node {l}: reserved in domain {} that does not own it", dc.domain_id));
        }
    }

    let mut link_books: Vec<(&LinkId, &LinkState, Quantity)> = Vec::new();
    let sum = |rates: &mut dyn Iterator<Item = Option<&Quantity>>| rates.flatten().copied().sum::<Quantity>();
    for (l, st) in &plane.gc.links {
        link_books.push((l, st, sum(&mut plane.gc.reservations.values().map(|r| r.get(l)))));
    }
    for dc in plane.dcs.values() {
        for (l, st) in &dc.links {
            link_books.push((l, st, sum(&mut dc.reservations.values().map(|r| r.links.get(l)))));
        }
    }
    for (l, st, held) in &link_books {
        if st.reserved != *held {
            out.push(format!("link {l}: reserved {} but slices hold {held}", st.reserved));
        }
        if st.reserved > st.nominal {
            out.push(format!("link {l}: reserved {} exceeds capacity {}", st.reserved, st.nominal));
        }
    }

    let mut allocated: BTreeMap<&LinkId, f64> = BTreeMap::new();
    for (slice, sc) in &plane.slices {
        if plane.gc.grants.get(slice).map(|g| g.state) != Some(GrantState::Committed) {
            out.push(format!("slice {slice}: controller without a committed grant"));
        }
        let reserved = sc.grant.link_reservations();
        for (l, cap) in &sc.link_caps {
            let r = reserved.get(l).map(|q| q.value()).unwrap_or(0.0);
            if *cap > r + RATE_TOLERANCE {
                out.push(format!("slice {slice}: usable capacity {cap} on link {l} exceeds its reservation {r}"));
            }
        }
        for f in &sc.flows {
            let rate = sc.allocation.rate(&f.flow_id);
            if rate < 0.0 || rate > f.desired_mbps + RATE_TOLERANCE {
                out.push(format!("slice {slice}: flow {} rate {rate} outside [0, {}]", f.flow_id, f.desired_mbps));
            }
            for l in &f.links {
                *allocated.entry(l).or_default() += rate;
            }
        }
    }
    for (l, total) in allocated {
        let Some(st) = plane.link_state(l) else {
            out.push(format!("link {l}: allocated but unknown"));
            continue;
        };
        if total > st.current().value() + RATE_TOLERANCE {
            out.push(format!("link {l}: allocated {total} exceeds current capacity {}", st.current()));
        }
    }
    out
}

/// Every invariant violation in the simulation state. Pure.
pub fn audit(sim: &Simulation) -> Vec<String> {
    let mut out = audit_plane(&sim.plane);
    for (id, mi) in &sim.missions {
        if mi.status == MissionStatus::Active {
            let state = sim.plane.gc.grants.get(&mi.slice_id).map(|g| g.state);
            if state != Some(GrantState::Committed) || !sim.plane.slices.contains_key(&mi.slice_id) {
                out.push(format!("mission {id}: active without a committed slice"));
            }
        }
    }
    out
}
