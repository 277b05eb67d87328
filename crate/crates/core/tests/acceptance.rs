//! Acceptance suite: one line per criterion, non-zero exit if any fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use common::*;
use dtc_core::federation::{plan_placement, MissionProcessModel, PlacementOptions, SearchMode};
use dtc_core::ids::{Capability, DomainId, LinkId, MissionId, NodeId};
use dtc_core::paths::{widest_path, Residuals};
use dtc_core::quantity::Bottleneck;
use dtc_core::registry::SensitivityLevel;
use dtc_core::resources::ResourceVector;
use dtc_core::runtime::vclock_merge;
use dtc_core::scenario::{EventKind, Scenario};
use dtc_core::sim::{audit, audit_plane, run, SimEvent, Simulation};
use dtc_core::slicing::{
    dfc_allocate, ControlPlane, DemandUnit, FlowPath, FlowSpec, GrantState, RejectedBy, SliceFlow, SliceRequest,
};
use dtc_core::topology::{CoalitionTopology, Domain, Tier};
use dtc_core::trace::EventLog;
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("no-overcommit and conservation", c1_conservation),
        ("admission atomicity", c2_atomicity),
        ("placement optimality", c3_placement),
        ("max-min fairness", c4_fairness),
        ("gc optimism soundness", c5_gc_soundness),
        ("determinism", c6_determinism),
        ("causal sync", c7_causal_sync),
        ("widest-path correctness", c8_widest_path),
        ("end-to-end golden", c9_golden),
    ];
    let mut failed = 0;
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|k| k != i + 1) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {}: {name}: PASS ({detail}; {secs:.2}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: {name}: FAIL ({why}; {secs:.2}s)", i + 1);
            }
        }
    }
    println!("acceptance: {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}

// 1 -----------------------------------------------------------------------

fn c1_conservation() -> Outcome {
    let (mut events, mut commits, mut scenarios) = (0u64, 0u64, 0u64);
    for seed in 0..200 {
        let s = random_scenario(seed);
        let invalid = s.validate();
        ensure(invalid.is_empty(), || format!("generator produced invalid scenario {seed}: {invalid:?}"))?;
        ensure(s.topology.domains.len() <= 3 && s.topology.nodes.len() <= 10 && s.events.len() <= 20, || {
            format!("scenario {seed} exceeds the size bounds")
        })?;
        let mut sim = Simulation::new(&s, seed).map_err(|e| e.to_string())?;
        loop {
            match sim.step() {
                Ok(Some(_)) => {}
                Ok(None) => break,
                Err(e) => return Err(format!("scenario {seed}: {e}")),
            }
            let v = audit(&sim);
            ensure(v.is_empty(), || format!("scenario {seed} at {} ms: {v:?}", sim.now))?;
            events += 1;
        }
        commits += sim.report.admissions.committed;
        ensure(sim.report.admissions.consistent(), || format!("scenario {seed}: inconsistent admission counts"))?;
        scenarios += 1;
    }
    ensure(commits > 0, || "no mission was ever committed; the suite exercises nothing".into())?;
    Ok(format!("{scenarios} scenarios, {events} events audited, {commits} commits, 0 violations"))
}

// 2 -----------------------------------------------------------------------

/// Two domains; the second has nodes whose largest free share is below the
/// demanded unit while the domain total covers it.
fn fragmentation_case(seed: u64) -> (CoalitionTopology, SliceRequest, bool) {
    let mut g = rng(seed);
    let k = g.random_range(2..=4);
    let shares: Vec<u32> = (0..k).map(|_| g.random_range(1..=4)).collect();
    let biggest = *shares.iter().max().unwrap();
    let total: u32 = shares.iter().sum();
    let forced = g.random_bool(0.75) && biggest < total;
    let demand = if forced { g.random_range(biggest + 1..=total) } else { g.random_range(1..=biggest) };

    let cap = |c: u32| ResourceVector::of(c as f64, 16.0, 16.0, 100.0);
    let mut topo = CoalitionTopology::default();
    topo.nodes.push(node("a0", "d0", Tier::Cloud, cap(8), true));
    topo.nodes.push(node("a1", "d0", Tier::Edge, cap(4), false));
    topo.links.push(link("la", &"a0".into(), &"a1".into(), 50.0, 1.0));
    let mut ids = vec![];
    for (i, c) in shares.iter().enumerate() {
        let id = format!("b{i}");
        topo.nodes.push(node(&id, "d1", Tier::Tactical, cap(*c), i == 0));
        if i > 0 {
            topo.links.push(link(&format!("lb{i}"), &"b0".into(), &id.as_str().into(), 50.0, 1.0));
        }
        ids.push(NodeId::from(id.as_str()));
    }
    topo.links.push(link("x", &"a0".into(), &"b0".into(), 20.0, 10.0));
    topo.domains.push(Domain {
        domain_id: "d0".into(),
        partner_id: "p0".into(),
        node_ids: ["a0".into(), "a1".into()].into(),
        gateway_ids: ["a0".into()].into(),
    });
    topo.domains.push(Domain {
        domain_id: "d1".into(),
        partner_id: "p1".into(),
        node_ids: ids.into_iter().collect(),
        gateway_ids: ["b0".into()].into(),
    });

    let unit = |c: u32| DemandUnit::new("u", ResourceVector::of(c as f64, 1.0, 1.0, 1.0));
    let req = SliceRequest {
        slice_id: format!("s{seed}").as_str().into(),
        mission_id: "m".into(),
        per_domain_demand: BTreeMap::from([
            (DomainId::from("d0"), vec![unit(g.random_range(1..=4))]),
            (DomainId::from("d1"), vec![unit(demand)]),
        ]),
        flows: vec![SliceFlow {
            src_domain: "d0".into(),
            dst_domain: "d1".into(),
            rate_mbps: q(g.random_range(1..=10) as f64),
            path: FlowPath::Anchored { src_unit: 0, dst_unit: 0 },
        }],
        shared_with_physical: true,
    };
    (topo, req, forced)
}

fn c2_atomicity() -> Outcome {
    let (mut committed, mut aborted, mut forced_total) = (0, 0, 0);
    for seed in 0..80 {
        let (topo, req, forced) = fragmentation_case(seed);
        forced_total += forced as u32;
        let mut plane = ControlPlane::new(&topo).map_err(|e| e.to_string())?;
        let before = plane.clone();
        let grant = plane.admit(&topo, &req, &mut EventLog::new()).map_err(|e| e.to_string())?;
        match grant.state {
            GrantState::Committed => {
                committed += 1;
                ensure(!forced, || format!("case {seed}: fragmented demand was committed"))?;
                for (d, units) in &req.per_domain_demand {
                    let want: ResourceVector = units.iter().map(|u| u.demand).sum();
                    let got: ResourceVector = grant.per_domain_reservation[d].values().sum();
                    ensure(want == got, || format!("case {seed}: domain {d} reserved {got}, demanded {want}"))?;
                }
                for (i, f) in req.flows.iter().enumerate() {
                    let p = &grant.reserved_paths[&i];
                    ensure(p.rate_mbps == f.rate_mbps, || format!("case {seed}: flow {i} reserved at a different rate"))?;
                    let hosts = (&grant.unit_hosts[&f.src_domain][0], &grant.unit_hosts[&f.dst_domain][0]);
                    ensure((p.nodes.first().unwrap(), p.nodes.last().unwrap()) == hosts, || {
                        format!("case {seed}: flow {i} path does not join its unit hosts")
                    })?;
                }
                for (n, r) in grant.node_reservations() {
                    let d = topo.domain_of(n).unwrap();
                    let diff = before.dcs[d].nodes[n].free.sub(&plane.dcs[d].nodes[n].free).unwrap();
                    ensure(diff == r, || format!("case {seed}: node {n} free dropped by {diff}, reserved {r}"))?;
                }
                let v = audit_plane(&plane);
                ensure(v.is_empty(), || format!("case {seed}: {v:?}"))?;
            }
            GrantState::Aborted => {
                aborted += 1;
                let rej = grant.rejection.as_ref().unwrap();
                if forced {
                    ensure(rej.by == RejectedBy::Dc("d1".into()) && rej.reason.category() == "fragmentation", || {
                        format!("case {seed}: expected a fragmentation abort from dc:d1, got {}: {}", rej.by, rej.reason)
                    })?;
                }
                ensure(plane.dcs == before.dcs, || format!("case {seed}: domain state changed on abort"))?;
                ensure(plane.gc.links == before.gc.links && plane.gc.reservations == before.gc.reservations, || {
                    format!("case {seed}: inter-domain state changed on abort")
                })?;
                ensure(plane.slices == before.slices, || format!("case {seed}: slice controller left behind"))?;
            }
            s => return Err(format!("case {seed}: admission ended {s}")),
        }
    }
    ensure(committed + aborted >= 50 && forced_total > 0 && committed > 0, || "too few cases of each kind".into())?;
    Ok(format!("{} cases: {committed} committed in full, {aborted} aborted with snapshot equality ({forced_total} forced)", committed + aborted))
}

// 3 -----------------------------------------------------------------------

fn placement_instance(seed: u64) -> (CoalitionTopology, Vec<dtc_core::registry::ModelDescriptor>, MissionProcessModel) {
    let mut g = rng(seed);
    let domains = g.random_range(1..=2);
    let topo = random_topology(&mut g, domains, 8 / domains);
    let n = g.random_range(2..=5);
    let models: Vec<_> = (0..n)
        .map(|i| {
            let tiers: Vec<Tier> = (0..3).filter(|_| g.random_bool(0.6)).map(tier_of).collect();
            let tiers = if tiers.is_empty() { vec![Tier::Cloud] } else { tiers };
            let fp = ResourceVector::of(g.random_range(1..=4) as f64, g.random_range(1..=6) as f64, 1.0, 1.0);
            model(&format!("m{i}"), "p0", &format!("c{i}"), fp, &tiers, 1.0)
        })
        .collect();
    let mut interactions = vec![];
    for _ in 0..g.random_range(1..=n + 1) {
        let a = g.random_range(0..n);
        let b = (a + g.random_range(1..n)) % n;
        let rate = g.random_range(1..=6) as f64 * 0.5;
        interactions.push(interaction(&format!("c{a}"), &format!("c{b}"), rate, g.random_range(8..=60) as f64));
    }
    let pm = MissionProcessModel {
        mission_id: "m".into(),
        participants: ["p0".into()].into(),
        required_capabilities: (0..n).map(|i| Capability::from(format!("c{i}").as_str())).collect(),
        interactions,
        classification_ceiling: SensitivityLevel::Secret,
        duration_ms: None,
        shared_with_physical: None,
    };
    (topo, models, pm)
}

fn c3_placement() -> Outcome {
    let (mut feasible, mut infeasible, mut heuristic_gap, mut seed) = (0, 0, 0, 0u64);
    while feasible < 40 {
        seed += 1;
        ensure(seed < 2000, || format!("only {feasible} feasible instances generated"))?;
        let (topo, models, pm) = placement_instance(seed);
        let free = topo.node_capacities();
        let residual = topo.link_capacities();
        let selection = models.iter().map(|m| (m.capabilities.iter().next().unwrap().clone(), m.clone())).collect();
        let idx = |c: &Capability| models.iter().position(|m| m.capabilities.contains(c)).unwrap();
        let inters: Vec<_> =
            pm.interactions.iter().map(|i| (idx(&i.producer_capability), idx(&i.consumer_capability), i.clone())).collect();
        let oracle = oracle_placement(&topo, &free, &residual, &models, &inters);
        let exact = plan_placement(&topo, &free, &residual, &selection, &pm, &PlacementOptions::with_mode(SearchMode::Exact));
        let heur = plan_placement(&topo, &free, &residual, &selection, &pm, &PlacementOptions::with_mode(SearchMode::Heuristic));
        match (oracle, exact) {
            (None, Err(_)) => {
                infeasible += 1;
                ensure(heur.is_err(), || format!("instance {seed}: heuristic found a plan the oracle says is infeasible"))?;
            }
            (Some((cost, _)), Ok(plan)) => {
                feasible += 1;
                ensure(plan.total_cost == cost, || format!("instance {seed}: exact {} vs oracle {cost}", plan.total_cost))?;
                if let Ok(h) = heur {
                    ensure(h.total_cost >= cost, || format!("instance {seed}: heuristic {} below optimum {cost}", h.total_cost))?;
                    heuristic_gap += (h.total_cost > cost) as u32;
                }
            }
            (o, e) => return Err(format!("instance {seed}: oracle {:?} vs exact {:?}", o.map(|x| x.0), e.map(|p| p.total_cost))),
        }
    }
    Ok(format!("{feasible} feasible instances match exactly, {infeasible} infeasible agree, heuristic worse on {heuristic_gap}"))
}

// 4 -----------------------------------------------------------------------

fn c4_fairness() -> Outcome {
    let mut saturated = 0;
    let sets = 500;
    for seed in 0..sets {
        let mut g = rng(seed);
        let nl = g.random_range(1..=4);
        let nf = g.random_range(1..=4);
        let caps: Vec<f64> = (0..nl).map(|_| if g.random_bool(0.1) { 0.0 } else { g.random_range(1..=40) as f64 * 0.25 }).collect();
        let paths: Vec<Vec<usize>> = (0..nf).map(|_| (0..nl).filter(|_| g.random_bool(0.5)).collect()).collect();
        let desired: Vec<f64> = (0..nf).map(|_| g.random_range(1..=48) as f64 * 0.25).collect();
        let link_ids: Vec<LinkId> = (0..nl).map(|l| LinkId::from(format!("l{l}").as_str())).collect();
        let flows: Vec<FlowSpec> = (0..nf)
            .map(|f| FlowSpec {
                flow_id: format!("f{f}"),
                links: paths[f].iter().map(|&l| link_ids[l].clone()).collect(),
                desired_mbps: desired[f],
            })
            .collect();
        let cap_map = link_ids.iter().cloned().zip(caps.iter().copied()).collect();
        let alloc = dfc_allocate(&flows, &cap_map).map_err(|e| e.to_string())?;
        let want = water_fill(&desired, &paths, &caps);
        for f in 0..nf {
            let got = alloc.rate(&format!("f{f}"));
            ensure((got - want[f]).abs() <= 1e-9, || format!("set {seed}: flow {f} got {got}, oracle {}", want[f]))?;
        }
        let rates: Vec<f64> = (0..nf).map(|f| alloc.rate(&format!("f{f}"))).collect();
        let any_saturated = (0..nl).any(|l| {
            let load: f64 = (0..nf).filter(|&f| paths[f].contains(&l)).map(|f| rates[f]).sum();
            load >= caps[l] - 1e-9 && (0..nf).any(|f| paths[f].contains(&l))
        });
        if any_saturated {
            saturated += 1;
            ensure(max_min_fair(&rates, &desired, &paths, &caps, 1e-9), || format!("set {seed}: fairness predicate fails"))?;
        }
    }
    Ok(format!("{sets} flow sets within 1e-9 of water-filling, predicate holds on {saturated} saturated sets"))
}

// 5 -----------------------------------------------------------------------

fn soundness_trial(seed: u64) -> Result<Option<(bool, bool)>, String> {
    let mut g = rng(seed);
    let domains = g.random_range(2..=3);
    let topo = random_topology(&mut g, domains, 3);
    if validate(&topo).is_err() {
        return Ok(None);
    }
    let mut plane = ControlPlane::new(&topo).map_err(|e| e.to_string())?;
    for dc in plane.dcs.values_mut() {
        for st in dc.nodes.values_mut() {
            if g.random_bool(0.4) {
                let load = ResourceVector::of(g.random_range(0..=3) as f64, 0.0, 0.0, 0.0);
                if let Ok(rest) = st.free.sub(&load) {
                    st.free = rest;
                    st.physical = st.physical.add(&load);
                }
            }
        }
    }
    for l in &topo.links {
        if g.random_bool(0.3) {
            let st = plane.link_state_mut(&l.link_id).unwrap();
            st.degraded = Some(q((st.nominal.value() * g.random_range(0..=10) as f64 / 10.0).floor()));
        }
    }

    let domain_ids: Vec<DomainId> = topo.domains.iter().map(|d| d.domain_id.clone()).collect();
    let mut per_domain: BTreeMap<DomainId, Vec<DemandUnit>> = BTreeMap::new();
    for d in &domain_ids {
        let members: Vec<NodeId> = topo.nodes_in(d).map(|n| n.node_id.clone()).collect();
        let units = (0..g.random_range(0..=2))
            .map(|i| {
                let demand = ResourceVector::of(g.random_range(1..=6) as f64, g.random_range(1..=6) as f64, 1.0, 1.0);
                if g.random_bool(0.3) {
                    DemandUnit::pinned(format!("u{i}"), demand, members[g.random_range(0..members.len())].clone())
                } else {
                    DemandUnit::new(format!("u{i}"), demand)
                }
            })
            .collect();
        per_domain.insert(d.clone(), units);
    }
    let with_units: Vec<&DomainId> = per_domain.iter().filter(|(_, u)| !u.is_empty()).map(|(d, _)| d).collect();
    let mut flows = vec![];
    if with_units.len() >= 2 {
        for _ in 0..g.random_range(1..=2) {
            let a = g.random_range(0..with_units.len());
            let b = (a + g.random_range(1..with_units.len())) % with_units.len();
            let (sd, dd) = (with_units[a].clone(), with_units[b].clone());
            let rate = q(g.random_range(1..=8) as f64);
            let path = if g.random_bool(0.7) {
                FlowPath::Anchored {
                    src_unit: g.random_range(0..per_domain[&sd].len()),
                    dst_unit: g.random_range(0..per_domain[&dd].len()),
                }
            } else {
                let src: Vec<NodeId> = topo.nodes_in(&sd).map(|n| n.node_id.clone()).collect();
                let dst: Vec<NodeId> = topo.nodes_in(&dd).map(|n| n.node_id.clone()).collect();
                let (s, t) = (&src[g.random_range(0..src.len())], &dst[g.random_range(0..dst.len())]);
                let paths = simple_paths(&topo, s, t, &|_| true);
                if paths.is_empty() {
                    continue;
                }
                FlowPath::Pinned(paths[g.random_range(0..paths.len())].0.clone())
            };
            flows.push(SliceFlow { src_domain: sd, dst_domain: dd, rate_mbps: rate, path });
        }
    }
    let req = SliceRequest {
        slice_id: "s".into(),
        mission_id: "m".into(),
        per_domain_demand: per_domain,
        flows,
        shared_with_physical: true,
    };
    let free = plane.free();
    let residual = plane.residuals();
    let feasible = oracle_admissible(&topo, &free, &residual, &req);
    let grant = plane.admit(&topo, &req, &mut EventLog::new()).map_err(|e| format!("trial {seed}: {e}"))?;
    if grant.state == GrantState::Committed && !feasible {
        return Err(format!("trial {seed}: committed a request the oracle finds infeasible"));
    }
    let gc_rejected = grant.rejection.as_ref().is_some_and(|r| r.by == RejectedBy::Gc);
    Ok(Some((gc_rejected, feasible)))
}

fn validate(topo: &CoalitionTopology) -> Result<(), String> {
    let v = dtc_core::topology::validate_topology(topo);
    if v.is_empty() {
        Ok(())
    } else {
        Err(format!("{v:?}"))
    }
}

fn c5_gc_soundness() -> Outcome {
    let (mut trials, mut rejections, mut counterexamples) = (0, 0, vec![]);
    let mut seed = 0;
    while trials < 400 {
        seed += 1;
        let Some((gc_rejected, feasible)) = soundness_trial(seed)? else { continue };
        trials += 1;
        if gc_rejected {
            rejections += 1;
            if feasible {
                counterexamples.push(seed);
            }
        }
    }
    ensure(counterexamples.is_empty(), || format!("gc rejected feasible requests in trials {counterexamples:?}"))?;
    ensure(rejections > 0, || "no gc rejection was exercised".into())?;
    Ok(format!("{trials} trials, {rejections} gc rejections, 0 counterexamples"))
}

// 6 -----------------------------------------------------------------------

fn bundled(name: &str) -> (PathBuf, Scenario) {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name);
    let s = Scenario::load(&p).unwrap();
    (p, s)
}

fn seedless(json: &str) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(json).unwrap();
    v.as_object_mut().unwrap().remove("seed");
    for m in v["missions"].as_object_mut().unwrap().values_mut() {
        m.as_object_mut().unwrap().remove("final_digests");
    }
    v
}

fn c6_determinism() -> Outcome {
    let mut checked = vec![];
    for name in ["two_partner_contention.json", "dil_degradation.json", "radar_fusion.json"] {
        let (_, s) = bundled(name);
        let a = run(&s, 0).map_err(|e| e.to_string())?;
        let b = run(&s, 0).map_err(|e| e.to_string())?;
        let c = run(&s, 1).map_err(|e| e.to_string())?;
        let (ja, jb, jc) = (a.report_file(&s).to_json(), b.report_file(&s).to_json(), c.report_file(&s).to_json());
        ensure(ja == jb, || format!("{name}: reports differ for the same seed"))?;
        ensure(a.log.render() == b.log.render(), || format!("{name}: logs differ for the same seed"))?;
        ensure(ja != jc, || format!("{name}: seed has no effect on the report"))?;
        ensure(seedless(&ja) == seedless(&jc), || format!("{name}: seed changed fields other than seed and digests"))?;
        ensure(a.log.render() == c.log.render(), || format!("{name}: seed changed the event log"))?;
        checked.push(name.trim_end_matches(".json"));
    }
    Ok(format!("byte-identical reruns and seed-only differences for {}", checked.join(", ")))
}

// 7 -----------------------------------------------------------------------

const CAUSAL_FIXTURE: &str = r#"{
  "topology": {
    "domains": [{"domain_id": "d", "partner_id": "p", "node_ids": ["e", "t", "c"], "gateway_ids": ["c"]}],
    "nodes": [
      {"node_id": "e", "domain_id": "d", "tier": "EDGE", "capacity": {"compute": 4, "memory": 4, "storage": 4, "bandwidth": 4}},
      {"node_id": "t", "domain_id": "d", "tier": "TACTICAL", "capacity": {"compute": 4, "memory": 4, "storage": 4, "bandwidth": 4}},
      {"node_id": "c", "domain_id": "d", "tier": "CLOUD", "is_gateway": true,
       "capacity": {"compute": 4, "memory": 4, "storage": 4, "bandwidth": 4}}
    ],
    "links": [
      {"link_id": "et", "endpoint_a": "e", "endpoint_b": "t", "capacity_mbps": 20, "latency_ms": 10},
      {"link_id": "tc", "endpoint_a": "t", "endpoint_b": "c", "capacity_mbps": 20, "latency_ms": 5}
    ]
  },
  "models": [
    {"model_id": "A", "partner_id": "p", "capabilities": ["sense"], "footprint": {"compute": 1, "memory": 1, "storage": 1, "bandwidth": 1},
     "sensitivity": "UNCLASSIFIED", "allowed_tiers": ["EDGE"], "update_rate_hz": 10, "update_size_mb": 0.1},
    {"model_id": "B", "partner_id": "p", "capabilities": ["track"], "footprint": {"compute": 1, "memory": 1, "storage": 1, "bandwidth": 1},
     "sensitivity": "UNCLASSIFIED", "allowed_tiers": ["TACTICAL"], "update_rate_hz": 5, "update_size_mb": 0.2},
    {"model_id": "C", "partner_id": "p", "capabilities": ["plan"], "footprint": {"compute": 1, "memory": 1, "storage": 1, "bandwidth": 1},
     "sensitivity": "UNCLASSIFIED", "allowed_tiers": ["CLOUD"], "update_rate_hz": 1}
  ],
  "missions": [
    {"mission_id": "chain", "participants": ["p"], "required_capabilities": ["sense", "track", "plan"],
     "interactions": [
       {"producer_capability": "sense", "consumer_capability": "track", "min_rate_mbps": 8, "max_latency_ms": 100},
       {"producer_capability": "track", "consumer_capability": "plan", "min_rate_mbps": 16, "max_latency_ms": 100}
     ],
     "classification_ceiling": "UNCLASSIFIED"}
  ],
  "events": [
    {"at_ms": 0, "kind": "MISSION_REQUEST", "mission_id": "chain"},
    {"at_ms": 1000, "kind": "END"}
  ]
}"#;

fn c7_causal_sync() -> Outcome {
    // Hand trace. A emits every 100 ms from t=100 and each update takes
    // 10 ms latency + 0.1 MB * 8000 / 8 Mbps = 110 ms; B emits every 200 ms
    // from t=200 taking 5 + 0.2 * 8000 / 16 = 105 ms. END at 1000 comes
    // first among same-time events, so A's updates from 100..=800 (8) and
    // B's from 200..=800 (4) arrive.
    let expected_mean = (8.0 * 110.0 + 4.0 * 105.0) / 12.0;
    let latency = BTreeMap::from([(0usize, 10u64), (1, 5)]);

    let s = Scenario::parse(CAUSAL_FIXTURE).map_err(|e| e.to_string())?;
    let mut sim = Simulation::new(&s, 0).map_err(|e| e.to_string())?;
    let mission = MissionId::from("chain");
    let (mut deliveries, mut merges) = (0, 0);
    while let Some((at, ev)) = sim.peek() {
        let pending = match ev {
            SimEvent::Deliver { delivery, .. } => {
                let before = sim.missions[&mission].vclocks[&delivery.consumer].clone();
                Some((at, delivery.clone(), before))
            }
            _ => None,
        };
        sim.step().map_err(|e| e.to_string())?;
        let Some((at, d, before)) = pending else { continue };
        if sim.missions[&mission].status != dtc_core::runtime::MissionStatus::Active {
            continue;
        }
        deliveries += 1;
        let after = &sim.missions[&mission].vclocks[&d.consumer];
        ensure(*after == vclock_merge(&before, &d.update.vclock), || format!("delivery at {at}: clock is not the componentwise max"))?;
        merges += 1;
        let staleness = at - d.update.emitted_at;
        ensure(staleness >= latency[&d.interaction], || format!("delivery at {at}: staleness {staleness} below route latency"))?;
    }
    let out = sim.run_to_end().map_err(|e| e.to_string())?;
    let mean = out.report.mean_staleness_ms().unwrap_or(f64::NAN);
    ensure(deliveries == 12, || format!("expected 12 deliveries, saw {deliveries}"))?;
    ensure(mean == expected_mean, || format!("reported mean staleness {mean}, hand trace {expected_mean}"))?;
    Ok(format!("{merges}/{deliveries} deliveries obey the max law and latency bound, mean staleness {mean:.4} ms"))
}

// 8 -----------------------------------------------------------------------

fn c8_widest_path() -> Outcome {
    let (mut graphs, mut pairs) = (0, 0);
    for seed in 0..150u64 {
        let mut g = rng(seed);
        let n = g.random_range(2..=7);
        let ids: Vec<NodeId> = (0..n).map(|i| NodeId::from(format!("v{i}").as_str())).collect();
        let mut topo = CoalitionTopology::default();
        for id in &ids {
            topo.nodes.push(node(id.as_str(), "d", Tier::Cloud, ResourceVector::uniform(1.0), false));
        }
        let mut edges = vec![];
        for i in 1..n {
            edges.push((g.random_range(0..i), i));
        }
        for i in 0..n {
            for j in i + 1..n {
                if g.random_bool(0.35) && !edges.iter().any(|&(a, b)| (a.min(b), a.max(b)) == (i, j)) {
                    edges.push((i, j));
                }
            }
        }
        for (k, (a, b)) in edges.into_iter().enumerate() {
            topo.links.push(link(&format!("l{k}"), &ids[a], &ids[b], 1.0, 1.0));
        }
        let residual: Residuals = topo.links.iter().map(|l| (l.link_id.clone(), q(g.random_range(0..=12) as f64))).collect();
        graphs += 1;
        for s in &ids {
            for t in &ids {
                pairs += 1;
                let got = widest_path(&topo, &residual, s, t).map_err(|e| e.to_string())?;
                let want = oracle_widest(&topo, &residual, s, t);
                let got_b = got.as_ref().map(|p| match p.bottleneck {
                    Bottleneck::Unbounded => None,
                    Bottleneck::Finite(x) => Some(x),
                });
                ensure(got_b == want, || format!("graph {seed} {s}->{t}: got {got_b:?}, oracle {want:?}"))?;
                if let Some(p) = got {
                    ensure(p.nodes.first() == Some(s) && p.nodes.last() == Some(t), || format!("graph {seed}: wrong endpoints"))?;
                    for (w, l) in p.nodes.windows(2).zip(&p.links) {
                        let spec = topo.link(l).unwrap();
                        ensure(spec.other_end(&w[0]) == Some(&w[1]), || format!("graph {seed}: path uses a non-adjacent link"))?;
                    }
                    let min = p.links.iter().map(|l| residual[l]).min();
                    ensure(min == want.flatten(), || format!("graph {seed}: reported bottleneck not achieved by the path"))?;
                }
            }
        }
    }
    Ok(format!("{graphs} connected graphs, {pairs} ordered pairs equal to the exhaustive oracle"))
}

// 9 -----------------------------------------------------------------------

/// Counts and reallocation trace derived without the system: brute-force
/// placement per request, fastest simple-path routes, and water-filling over
/// each slice's share of every link.
fn oracle_trace(s: &Scenario) -> String {
    struct Slice {
        flows: Vec<(String, f64, Vec<LinkId>)>,
        reserved: BTreeMap<LinkId, f64>,
    }
    let mut free = s.topology.node_capacities();
    let mut reserved_total: BTreeMap<LinkId, f64> = BTreeMap::new();
    let mut current: BTreeMap<LinkId, f64> = s.topology.links.iter().map(|l| (l.link_id.clone(), l.capacity_mbps.value())).collect();
    let mut slices: BTreeMap<MissionId, Slice> = BTreeMap::new();
    let (mut committed, mut refused) = (0, 0);
    let mut lines = vec![];

    let allocate = |sl: &Slice, current: &BTreeMap<LinkId, f64>, reserved_total: &BTreeMap<LinkId, f64>| {
        let links: Vec<&LinkId> = sl.reserved.keys().collect();
        let caps: Vec<f64> = links
            .iter()
            .map(|l| sl.reserved[*l] * (current[*l] / reserved_total[*l]).min(1.0))
            .collect();
        let paths: Vec<Vec<usize>> =
            sl.flows.iter().map(|(_, _, ls)| ls.iter().map(|l| links.iter().position(|x| *x == l).unwrap()).collect()).collect();
        let desired: Vec<f64> = sl.flows.iter().map(|f| f.1).collect();
        let rates = water_fill(&desired, &paths, &caps);
        sl.flows.iter().zip(rates).map(|((id, _, _), r)| format!("{id}={r:.6}")).collect::<Vec<_>>().join(" ")
    };

    for e in &s.events {
        match &e.kind {
            EventKind::MissionRequest { mission_id } => {
                let pm = s.mission(mission_id).unwrap();
                let caps: Vec<&Capability> = pm.required_capabilities.iter().collect();
                let models: Vec<_> = caps
                    .iter()
                    .map(|c| {
                        let m: Vec<_> = s.models.iter().filter(|m| m.capabilities.contains(*c)).collect();
                        assert_eq!(m.len(), 1, "golden fixtures offer one model per capability");
                        m[0].clone()
                    })
                    .collect();
                let idx = |c: &Capability| caps.iter().position(|x| *x == c).unwrap();
                let inters: Vec<_> = pm
                    .interactions
                    .iter()
                    .map(|i| (idx(&i.producer_capability), idx(&i.consumer_capability), i.clone()))
                    .collect();
                let residual: Residuals = current
                    .iter()
                    .map(|(l, c)| (l.clone(), q((c - reserved_total.get(l).copied().unwrap_or(0.0)).max(0.0))))
                    .collect();
                let Some((_, hosts)) = oracle_placement(&s.topology, &free, &residual, &models, &inters) else {
                    refused += 1;
                    continue;
                };
                committed += 1;
                for (m, h) in models.iter().zip(&hosts) {
                    free.insert(h.clone(), free[h].sub(&m.footprint).unwrap());
                }
                let mut sl = Slice { flows: vec![], reserved: BTreeMap::new() };
                for (i, (p, c, it)) in inters.iter().enumerate() {
                    let paths = simple_paths(&s.topology, &hosts[*p], &hosts[*c], &|l| residual[&l.link_id] >= it.min_rate_mbps);
                    let best = paths.iter().map(|(_, ls)| path_latency(&s.topology, ls)).min().unwrap();
                    let fastest: Vec<_> = paths.iter().filter(|(_, ls)| path_latency(&s.topology, ls) == best).collect();
                    assert_eq!(fastest.len(), 1, "golden fixtures have unique routes");
                    let links = fastest[0].1.clone();
                    for l in &links {
                        *sl.reserved.entry(l.clone()).or_default() += it.min_rate_mbps.value();
                        *reserved_total.entry(l.clone()).or_default() += it.min_rate_mbps.value();
                    }
                    sl.flows.push((format!("{mission_id}/i{i}"), it.min_rate_mbps.value(), links));
                }
                lines.push(format!("t={} {mission_id}.slice admit {}", e.at_ms, allocate(&sl, &current, &reserved_total)));
                slices.insert(mission_id.clone(), sl);
            }
            EventKind::LinkDegrade { link_id, .. } | EventKind::LinkRestore { link_id } => {
                let (cap, trigger) = match &e.kind {
                    EventKind::LinkDegrade { capacity_mbps, .. } => (capacity_mbps.value(), "link-degrade"),
                    _ => (s.topology.link(link_id).unwrap().capacity_mbps.value(), "link-restore"),
                };
                current.insert(link_id.clone(), cap);
                for (m, sl) in &slices {
                    if sl.reserved.contains_key(link_id) {
                        lines.push(format!("t={} {m}.slice {trigger} {}", e.at_ms, allocate(sl, &current, &reserved_total)));
                    }
                }
            }
            EventKind::End => break,
            other => panic!("oracle trace does not model {}", other.name()),
        }
    }
    let mut out = format!("committed={committed} aborted_or_rejected={refused}\n");
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    out
}

fn system_trace(s: &Scenario) -> Result<String, String> {
    let r = run(s, 0).map_err(|e| e.to_string())?.report;
    let a = &r.admissions;
    let mut out = format!("committed={} aborted_or_rejected={}\n", a.committed, a.aborted + a.rejected_gc + a.rejected_planning);
    for f in &r.fairness {
        let rates: Vec<String> = f.rates.iter().map(|(id, r)| format!("{id}={r:.6}")).collect();
        out.push_str(&format!("t={} {} {} {}\n", f.t_ms, f.slice_id, f.trigger, rates.join(" ")));
    }
    Ok(out)
}

fn c9_golden() -> Outcome {
    let mut done = vec![];
    for name in ["two_partner_contention", "dil_degradation"] {
        let (_, s) = bundled(&format!("{name}.json"));
        let golden_path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.txt"));
        let oracle = oracle_trace(&s);
        if std::env::var_os("UPDATE_GOLDEN").is_some() {
            std::fs::write(&golden_path, &oracle).map_err(|e| e.to_string())?;
        }
        let golden = std::fs::read_to_string(&golden_path).map_err(|e| format!("{}: {e}", golden_path.display()))?;
        ensure(oracle == golden, || format!("{name}: golden file is not the oracle's output"))?;
        let system = system_trace(&s)?;
        ensure(system == golden, || format!("{name}: system trace differs from golden\n--- golden\n{golden}--- system\n{system}"))?;
        done.push(format!("{name} ({} lines)", golden.lines().count()));
    }
    Ok(format!("matches golden: {}", done.join(", ")))
}
