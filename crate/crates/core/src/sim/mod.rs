//! Deterministic discrete-event engine driving the controllers from a scenario.
//!
//! Events are processed in (time, insertion order). After every event the
//! auditor re-derives the books from the reservation records; any violation
//! stops the run.

pub mod audit;
pub mod report;

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::federation::{federate, FederationInput, FederationPlan, MissionProcessModel};
use crate::ids::{DomainId, LinkId, MissionId, ModelId, NodeId, SliceId};
use crate::paths::widest_path;
use crate::registry::{ModelDescriptor, Registry, SensitivityLevel};
use crate::resources::ResourceVector;
use crate::runtime::{activate, flow_id, report_destinations, Delivery, MissionInstance, MissionStatus, ReportOutcome};
use crate::scenario::{EventKind, Scenario};
use crate::slicing::{
    sc_accept_task, ControlPlane, DemandUnit, FlowPath, GrantState, NodeState, RejectedBy, SliceFlow, SliceRequest,
    SliceTask, TaskDecision, TaskFlow,
};
use crate::trace::{path_str, EventLog};

pub use audit::{audit, audit_plane};
pub use report::{Admissions, FairnessSample, MissionReport, Outcome, PlanSummary, ReportFile, RunReport};

#[derive(Debug, Clone, PartialEq)]
pub enum SimEvent {
    Scenario(EventKind),
    Produce { mission: MissionId, model: ModelId },
    Deliver { mission: MissionId, delivery: Box<Delivery> },
    Report { mission: MissionId },
    Complete { mission: MissionId },
}

#[derive(Debug, Clone)]
struct Queued {
    at: u64,
    seq: u64,
    event: SimEvent,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario:\n{}", .0.join("\n"))]
    Invalid(Vec<String>),
    #[error("auditor violation after event {event} at {at_ms} ms:\n{}", .violations.join("\n"))]
    Audit { at_ms: u64, event: String, violations: Vec<String> },
    #[error("internal error: {0}")]
    Internal(String),
}

fn internal(e: impl std::fmt::Display) -> SimError {
    SimError::Internal(e.to_string())
}

/// Slice id used for a mission's slice.
pub fn slice_id_for(mission: &MissionId) -> SliceId {
    SliceId::new(format!("{mission}.slice"))
}

/// Output of a completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: RunReport,
    pub log: EventLog,
}

impl RunOutput {
    pub fn report_file(&self, scenario: &Scenario) -> ReportFile {
        ReportFile::new(self.report.clone(), scenario.digest())
    }
}

/// Complete simulation state; `step` folds one event into it.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub scenario: Scenario,
    pub registries: Vec<Registry>,
    pub models: BTreeMap<ModelId, ModelDescriptor>,
    pub plane: ControlPlane,
    pub missions: BTreeMap<MissionId, MissionInstance>,
    pub report: RunReport,
    pub log: EventLog,
    pub now: u64,
    pub seed: u64,
    queue: BinaryHeap<Reverse<Queued>>,
    next_seq: u64,
    rng: ChaCha8Rng,
    dtc_node: Option<NodeId>,
    ended: bool,
}

impl Simulation {
    pub fn new(scenario: &Scenario, seed: u64) -> Result<Self, SimError> {
        let violations = scenario.validate();
        if !violations.is_empty() {
            return Err(SimError::Invalid(violations));
        }
        let registries = scenario.registries().map_err(|e| SimError::Invalid(vec![e.to_string()]))?;
        let plane = ControlPlane::new(&scenario.topology).map_err(internal)?;
        let mut sim = Simulation {
            scenario: scenario.clone(),
            registries,
            models: scenario.models.iter().map(|m| (m.model_id.clone(), m.clone())).collect(),
            plane,
            missions: BTreeMap::new(),
            report: RunReport { seed, ..Default::default() },
            log: EventLog::new(),
            now: 0,
            seed,
            queue: BinaryHeap::new(),
            next_seq: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            dtc_node: scenario.dtc_node(),
            ended: false,
        };
        for e in &scenario.events {
            sim.push(e.at_ms, SimEvent::Scenario(e.kind.clone()));
        }
        Ok(sim)
    }

    fn push(&mut self, at: u64, event: SimEvent) {
        self.queue.push(Reverse(Queued { at, seq: self.next_seq, event }));
        self.next_seq += 1;
    }

    /// The next queued event and its time.
    /// The next event `step` would process, if any.
    pub fn peek(&self) -> Option<(u64, &SimEvent)> {
        if self.ended {
            return None;
        }
        self.queue.peek().map(|Reverse(q)| (q.at, &q.event))
    }

    pub fn is_finished(&self) -> bool {
        self.ended || self.queue.is_empty()
    }

    /// Processes the next event. Returns a short description, or `None` when done.
    pub fn step(&mut self) -> Result<Option<String>, SimError> {
        if self.ended {
            return Ok(None);
        }
        let Some(Reverse(q)) = self.queue.pop() else { return Ok(None) };
        self.now = q.at;
        self.log.set_time(q.at);
        let label = match &q.event {
            SimEvent::Scenario(k) => k.name().to_string(),
            SimEvent::Produce { mission, model } => format!("produce {mission}/{model}"),
            SimEvent::Deliver { mission, .. } => format!("deliver {mission}"),
            SimEvent::Report { mission } => format!("report {mission}"),
            SimEvent::Complete { mission } => format!("complete {mission}"),
        };
        match q.event {
            SimEvent::Scenario(kind) => self.apply(kind)?,
            SimEvent::Produce { mission, model } => self.on_produce(&mission, &model)?,
            SimEvent::Deliver { mission, delivery } => self.on_deliver(&mission, &delivery),
            SimEvent::Report { mission } => self.on_report(&mission)?,
            SimEvent::Complete { mission } => self.finish_mission(&mission, MissionStatus::Completed, "complete")?,
        }
        self.report.events_processed += 1;
        let violations = audit(self);
        if !violations.is_empty() {
            return Err(SimError::Audit { at_ms: self.now, event: label, violations });
        }
        Ok(Some(label))
    }

    /// Runs to END (or until the queue drains) and freezes the report.
    pub fn run_to_end(mut self) -> Result<RunOutput, SimError> {
        while self.step()?.is_some() {}
        self.report.end_ms = self.now;
        for (id, mi) in &self.missions {
            if let Some(m) = self.report.missions.get_mut(id) {
                m.metrics = Some(mi.metrics.clone());
                m.final_digests = mi.last_state.iter().map(|(k, s)| (k.clone(), s.digest.clone())).collect();
                if mi.status == MissionStatus::Active {
                    m.outcome = Outcome::Active;
                }
            }
        }
        Ok(RunOutput { report: self.report, log: self.log })
    }

    /// Applies one scenario event immediately, outside the queue.
    pub fn apply(&mut self, kind: EventKind) -> Result<(), SimError> {
        match kind {
            EventKind::MissionRequest { mission_id } => self.request_mission(&mission_id)?,
            EventKind::LinkDegrade { link_id, capacity_mbps } => {
                self.log.record("sim", "link-degrade", &[("link", &link_id), ("capacity", &capacity_mbps)]);
                let st = self.plane.link_state_mut(&link_id).ok_or_else(|| internal(format!("unknown link {link_id}")))?;
                st.degraded = Some(capacity_mbps);
                self.refresh_links(&[link_id], "link-degrade")?;
            }
            EventKind::LinkRestore { link_id } => {
                self.log.record("sim", "link-restore", &[("link", &link_id)]);
                let st = self.plane.link_state_mut(&link_id).ok_or_else(|| internal(format!("unknown link {link_id}")))?;
                st.degraded = None;
                self.refresh_links(&[link_id], "link-restore")?;
            }
            EventKind::NodeFail { node_id } => self.fail_node(&node_id)?,
            EventKind::NodeRestore { node_id } => self.restore_node(&node_id)?,
            EventKind::PreloadPhysicalLoad { node_id, load } => self.preload(&node_id, &load)?,
            EventKind::End => {
                self.log.record("sim", "end", &[]);
                let active: Vec<MissionId> =
                    self.missions.iter().filter(|(_, m)| m.status == MissionStatus::Active).map(|(k, _)| k.clone()).collect();
                for m in active {
                    self.finish_mission(&m, MissionStatus::Completed, "complete")?;
                }
                self.ended = true;
            }
        }
        Ok(())
    }

    fn node_state_mut(&mut self, node: &NodeId) -> Option<&mut NodeState> {
        let d: DomainId = self.scenario.topology.domain_of(node)?.clone();
        self.plane.dcs.get_mut(&d)?.nodes.get_mut(node)
    }

    fn node_state(&self, node: &NodeId) -> Option<&NodeState> {
        let d = self.scenario.topology.domain_of(node)?;
        self.plane.dcs.get(d)?.nodes.get(node)
    }

    /// Free resources of live nodes, as seen by the planner.
    pub fn live_free(&self) -> BTreeMap<NodeId, ResourceVector> {
        self.plane
            .dcs
            .values()
            .flat_map(|dc| dc.nodes.iter().filter(|(_, s)| !s.failed).map(|(n, s)| (n.clone(), s.free)))
            .collect()
    }

    /// Dry-run federation against the current state.
    pub fn plan(&self, pm: &MissionProcessModel) -> Result<FederationPlan, crate::federation::FederationError> {
        let free = self.live_free();
        let residual = self.plane.residuals();
        let input = FederationInput {
            registries: &self.registries,
            topology: &self.scenario.topology,
            free: &free,
            residual: &residual,
            policy: &self.scenario.policy,
            dictionary: &self.scenario.dictionary,
            options: &self.scenario.config.placement,
        };
        federate(input, pm)
    }

    /// Slice request covering a plan: one pinned demand unit per placed model
    /// and one pinned flow per routed interaction.
    pub fn slice_request(&self, pm: &MissionProcessModel, plan: &FederationPlan) -> SliceRequest {
        let topo = &self.scenario.topology;
        let mut per_domain_demand: BTreeMap<DomainId, Vec<DemandUnit>> = BTreeMap::new();
        for (model, host) in &plan.placement {
            let d = topo.domain_of(host).expect("planned host exists").clone();
            let footprint = self.models[model].footprint;
            per_domain_demand.entry(d).or_default().push(DemandUnit::pinned(model.as_str(), footprint, host.clone()));
        }
        let mut flows = Vec::new();
        for (i, route) in &plan.routes {
            for n in &route.nodes {
                per_domain_demand.entry(topo.domain_of(n).expect("route node exists").clone()).or_default();
            }
            if route.nodes.len() < 2 {
                continue;
            }
            flows.push(SliceFlow {
                src_domain: topo.domain_of(&route.nodes[0]).expect("exists").clone(),
                dst_domain: topo.domain_of(route.nodes.last().expect("non-empty")).expect("exists").clone(),
                rate_mbps: pm.interactions[*i].min_rate_mbps,
                path: FlowPath::Pinned(route.nodes.clone()),
            });
        }
        let secret = plan.placement.keys().any(|m| self.models[m].sensitivity == SensitivityLevel::Secret);
        SliceRequest {
            slice_id: slice_id_for(&pm.mission_id),
            mission_id: pm.mission_id.clone(),
            per_domain_demand,
            flows,
            shared_with_physical: pm.shared_with_physical.unwrap_or(!secret),
        }
    }

    fn request_mission(&mut self, id: &MissionId) -> Result<(), SimError> {
        let pm = self.scenario.mission(id).ok_or_else(|| internal(format!("unknown mission {id}")))?.clone();
        self.report.admissions.attempted += 1;
        self.log.record("dtc", "request", &[("mission", id)]);
        let mut record = MissionReport {
            outcome: Outcome::RejectedPlanning,
            reason: None,
            slice_id: None,
            plan: None,
            requested_at_ms: self.now,
            ended_at_ms: None,
            metrics: None,
            final_digests: BTreeMap::new(),
        };
        let plan = match self.plan(&pm) {
            Ok(p) => p,
            Err(e) => {
                let reason = format!("planning: {}", e.stage());
                self.log.record("dtc", "plan-fail", &[("mission", id), ("error", &e)]);
                self.report.admissions.rejected_planning += 1;
                *self.report.admissions.reasons.entry(reason).or_default() += 1;
                record.reason = Some(e.to_string());
                self.report.missions.insert(id.clone(), record);
                return Ok(());
            }
        };
        self.log.record("dtc", "plan", &[("mission", id), ("cost", &plan.total_cost), ("mode", &plan.mode)]);
        for (m, n) in &plan.placement {
            self.log.record("dtc", "place", &[("mission", id), ("model", m), ("node", n)]);
        }
        record.plan = Some(PlanSummary::from(&plan));

        let req = self.slice_request(&pm, &plan);
        record.slice_id = Some(req.slice_id.clone());
        let grant = self.plane.admit(&self.scenario.topology, &req, &mut self.log).map_err(internal)?;
        if grant.state != GrantState::Committed {
            let rej = grant.rejection.clone().expect("aborted grants carry a rejection");
            if rej.by == RejectedBy::Gc {
                self.report.admissions.rejected_gc += 1;
                record.outcome = Outcome::RejectedGc;
            } else {
                self.report.admissions.aborted += 1;
                record.outcome = Outcome::Aborted;
            }
            *self.report.admissions.reasons.entry(rej.reason.category()).or_default() += 1;
            record.reason = Some(format!("{}: {}", rej.by, rej.reason));
            self.report.missions.insert(id.clone(), record);
            return Ok(());
        }
        self.report.admissions.committed += 1;
        record.outcome = Outcome::Active;
        self.report.missions.insert(id.clone(), record);

        // One task per placed model, carrying the flows it produces.
        let host = |m: &ModelId| plan.placement[m].clone();
        for (model, node) in &plan.placement {
            let mut flows = Vec::new();
            for (i, it) in pm.interactions.iter().enumerate() {
                if plan.selected.get(&it.producer_capability) == Some(model) {
                    let consumer = &plan.selected[&it.consumer_capability];
                    flows.push(TaskFlow {
                        flow_id: flow_id(id, i),
                        src: node.clone(),
                        dst: host(consumer),
                        desired_mbps: it.min_rate_mbps.value(),
                    });
                }
            }
            let task = SliceTask {
                task_id: model.to_string(),
                slice_id: req.slice_id.clone(),
                node: node.clone(),
                demand: self.models[model].footprint,
                flows,
            };
            let sc = self.plane.slices.get_mut(&req.slice_id).expect("committed slice has a controller");
            match sc_accept_task(&self.scenario.topology, sc, task).map_err(internal)? {
                TaskDecision::Accept(_) => {
                    self.log.record(&format!("sc:{}", req.slice_id), "accept", &[("task", model), ("node", node)])
                }
                TaskDecision::Reject(r) => {
                    return Err(internal(format!("task {model} rejected inside its own slice: {r}")));
                }
            }
        }
        self.sample_fairness(&req.slice_id, "admit");

        let nonce = self.rng.next_u64();
        let (mi, schedule) =
            activate(&plan, &pm.interactions, &self.models, &grant, self.now, nonce).map_err(internal)?;
        self.log.record("dtcm", "activate", &[("mission", id), ("slice", &req.slice_id), ("models", &schedule.len())]);
        for (model, at) in schedule {
            self.push(at, SimEvent::Produce { mission: id.clone(), model });
        }
        self.push(self.now + self.scenario.config.report_interval_ms, SimEvent::Report { mission: id.clone() });
        if let Some(d) = pm.duration_ms {
            self.push(self.now + d, SimEvent::Complete { mission: id.clone() });
        }
        self.missions.insert(id.clone(), mi);
        Ok(())
    }

    fn sample_fairness(&mut self, slice: &SliceId, trigger: &str) {
        let Some(sc) = self.plane.slices.get(slice) else { return };
        let rates = sc.allocation.rates.clone();
        let text: Vec<String> = rates.iter().map(|(f, r)| format!("{f}:{r}")).collect();
        self.log.record(&format!("dfc:{slice}"), "rates", &[("trigger", &trigger), ("rates", &text.join(","))]);
        self.report.fairness.push(FairnessSample { t_ms: self.now, slice_id: slice.clone(), trigger: trigger.into(), rates });
    }

    /// Recomputes each affected slice's usable capacity on the given links and
    /// reallocates its flows; then resumes deferred transfers and reports.
    fn refresh_links(&mut self, links: &[LinkId], trigger: &str) -> Result<(), SimError> {
        let slices: Vec<SliceId> = self.plane.slices.keys().cloned().collect();
        for slice in slices {
            let reserved = self.plane.slices[&slice].grant.link_reservations();
            let mut touched = false;
            for l in links.iter().filter(|l| reserved.contains_key(*l)) {
                let st = self.plane.link_state(l).ok_or_else(|| internal(format!("unknown link {l}")))?;
                let cap = reserved[l].value() * st.honour_factor();
                let sc = self.plane.slices.get_mut(&slice).expect("listed");
                sc.react(l, cap).map_err(internal)?;
                self.log.record(&format!("dfc:{slice}"), "react", &[("link", l), ("cap", &cap)]);
                touched = true;
            }
            if touched {
                self.sample_fairness(&slice, trigger);
                self.resume_deferred(&slice);
            }
        }
        self.drain_reports();
        Ok(())
    }

    fn rate_fn(&self, slice: &SliceId, mission: &MissionId) -> impl Fn(usize) -> f64 + use<> {
        let alloc = self.plane.slices.get(slice).map(|sc| sc.allocation.clone()).unwrap_or_default();
        let mission = mission.clone();
        move |i| alloc.rate(&flow_id(&mission, i))
    }

    fn resume_deferred(&mut self, slice: &SliceId) {
        let Some(mission) = self.missions.values().find(|m| &m.slice_id == slice).map(|m| m.mission_id.clone()) else {
            return;
        };
        let rate = self.rate_fn(slice, &mission);
        let mi = self.missions.get_mut(&mission).expect("found above");
        let resumed = mi.resume_deferred(self.now, &rate);
        for d in resumed {
            self.log.record("dtcm", "resume", &[("mission", &mission), ("interaction", &d.interaction), ("seq", &d.update.seq)]);
            let at = d.deliver_at.expect("resumed deliveries have a time");
            self.push(at, SimEvent::Deliver { mission: mission.clone(), delivery: Box::new(d) });
        }
    }

    /// Bottleneck from the mission's first placed model to the coalition controller.
    fn uplink_residual(&self, mi: &MissionInstance) -> f64 {
        let (Some(src), Some(dtc)) = (mi.plan.placement.values().next(), self.dtc_node.as_ref()) else {
            return 0.0;
        };
        match widest_path(&self.scenario.topology, &self.plane.residuals(), src, dtc) {
            Ok(Some(p)) => p.bottleneck.as_f64(),
            _ => 0.0,
        }
    }

    fn drain_reports(&mut self) {
        let cfg = self.scenario.config.runtime();
        let ids: Vec<MissionId> = self
            .missions
            .iter()
            .filter(|(_, m)| m.status == MissionStatus::Active && !m.report_queue.is_empty())
            .map(|(k, _)| k.clone())
            .collect();
        for id in ids {
            let residual = self.uplink_residual(&self.missions[&id]);
            let mi = self.missions.get_mut(&id).expect("listed");
            let sent = mi.drain_reports(residual, &cfg);
            if !sent.is_empty() {
                let to = report_destinations(mi.plan.placement.keys().filter_map(|m| self.models.get(m)).map(|d| d.partner_id.clone()).collect::<std::collections::BTreeSet<_>>());
                self.log.record("dtcm", "report-drain", &[("mission", &id), ("sent", &sent.len()), ("to", &to.join(","))]);
            }
        }
    }

    fn on_produce(&mut self, mission: &MissionId, model: &ModelId) -> Result<(), SimError> {
        let Some(mi) = self.missions.get(mission) else { return Ok(()) };
        if mi.status != MissionStatus::Active {
            return Ok(());
        }
        let rate = self.rate_fn(&mi.slice_id, mission);
        let mi = self.missions.get_mut(mission).expect("checked");
        let deliveries = mi.on_produce(model, self.now, &rate).map_err(internal)?;
        let period = mi.periods[model];
        let seq = mi.seqs[model];
        let clock = crate::runtime::render_vclock(&mi.vclocks[model]);
        self.log.record("dtcm", "produce", &[("mission", mission), ("model", model), ("seq", &seq), ("vclock", &clock)]);
        for d in deliveries {
            match d.deliver_at {
                Some(at) => self.push(at, SimEvent::Deliver { mission: mission.clone(), delivery: Box::new(d) }),
                None => self.log.record(
                    "dtcm",
                    "defer",
                    &[("mission", mission), ("interaction", &d.interaction), ("seq", &d.update.seq)],
                ),
            }
        }
        self.push(self.now + period, SimEvent::Produce { mission: mission.clone(), model: model.clone() });
        Ok(())
    }

    fn on_deliver(&mut self, mission: &MissionId, d: &Delivery) {
        let Some(mi) = self.missions.get_mut(mission) else { return };
        if mi.status != MissionStatus::Active {
            return;
        }
        let applied = mi.on_deliver(d, self.now);
        let staleness = self.now - d.update.emitted_at;
        let action = if applied { "deliver" } else { "drop" };
        self.log.record(
            "dtcm",
            action,
            &[
                ("mission", mission),
                ("from", &d.update.producer),
                ("to", &d.consumer),
                ("seq", &d.update.seq),
                ("staleness", &staleness),
            ],
        );
    }

    fn on_report(&mut self, mission: &MissionId) -> Result<(), SimError> {
        let Some(mi) = self.missions.get(mission) else { return Ok(()) };
        if mi.status != MissionStatus::Active {
            return Ok(());
        }
        let residual = self.uplink_residual(mi);
        let cfg = self.scenario.config.runtime();
        let partners: std::collections::BTreeSet<_> =
            mi.plan.placement.keys().filter_map(|m| self.models.get(m)).map(|d| d.partner_id.clone()).collect();
        let mi = self.missions.get_mut(mission).expect("checked");
        match mi.report_upstream(residual, &cfg, self.now).map_err(internal)? {
            ReportOutcome::Sent(sent) => {
                let to = report_destinations(partners);
                self.log.record("dtcm", "report", &[("mission", mission), ("sent", &sent.len()), ("to", &to.join(","))]);
            }
            ReportOutcome::Deferred { dropped } => {
                self.log.record("dtcm", "report-defer", &[("mission", mission), ("residual", &residual), ("dropped", &dropped)]);
            }
        }
        self.push(self.now + cfg.report_interval_ms, SimEvent::Report { mission: mission.clone() });
        Ok(())
    }

    fn finish_mission(&mut self, id: &MissionId, status: MissionStatus, action: &str) -> Result<(), SimError> {
        let Some(mi) = self.missions.get_mut(id) else { return Ok(()) };
        if mi.status != MissionStatus::Active {
            return Ok(());
        }
        let slice = match status {
            MissionStatus::Failed => mi.fail(),
            _ => mi.complete(),
        }
        .map_err(internal)?;
        self.log.record("dtcm", action, &[("mission", id)]);
        self.plane.terminate(&slice, &mut self.log).map_err(internal)?;
        if let Some(r) = self.report.missions.get_mut(id) {
            r.outcome = if status == MissionStatus::Failed { Outcome::Failed } else { Outcome::Completed };
            r.ended_at_ms = Some(self.now);
        }
        Ok(())
    }

    fn fail_node(&mut self, node: &NodeId) -> Result<(), SimError> {
        self.log.record("sim", "node-fail", &[("node", node)]);
        if self.node_state(node).is_none_or(|s| s.failed) {
            return Ok(());
        }
        let affected: Vec<MissionId> = self
            .missions
            .iter()
            .filter(|(_, m)| m.status == MissionStatus::Active)
            .filter(|(_, m)| {
                m.plan.placement.values().any(|n| n == node) || m.plan.routes.values().any(|r| r.nodes.contains(node))
            })
            .map(|(k, _)| k.clone())
            .collect();
        for m in affected {
            self.finish_mission(&m, MissionStatus::Failed, "fail")?;
        }
        let st = self.node_state_mut(node).expect("checked above");
        st.failed = true;
        st.capacity = ResourceVector::ZERO;
        st.free = ResourceVector::ZERO;
        st.physical = ResourceVector::ZERO;
        let links = self.links_at(node);
        for l in &links {
            self.plane.link_state_mut(l).expect("topology link").down_endpoints += 1;
        }
        self.refresh_links(&links, "node-fail")
    }

    fn restore_node(&mut self, node: &NodeId) -> Result<(), SimError> {
        self.log.record("sim", "node-restore", &[("node", node)]);
        if self.node_state(node).is_none_or(|s| !s.failed) {
            return Ok(());
        }
        let st = self.node_state_mut(node).expect("checked above");
        st.failed = false;
        st.capacity = st.nominal;
        st.free = st.nominal;
        let links = self.links_at(node);
        for l in &links {
            let s = self.plane.link_state_mut(l).expect("topology link");
            s.down_endpoints = s.down_endpoints.saturating_sub(1);
        }
        self.refresh_links(&links, "node-restore")
    }

    fn links_at(&self, node: &NodeId) -> Vec<LinkId> {
        self.scenario.topology.links.iter().filter(|l| l.touches(node)).map(|l| l.link_id.clone()).collect()
    }

    fn preload(&mut self, node: &NodeId, load: &ResourceVector) -> Result<(), SimError> {
        let st = self.node_state_mut(node).ok_or_else(|| internal(format!("unknown node {node}")))?;
        match st.free.sub(load) {
            Ok(rest) if !st.failed => {
                st.free = rest;
                st.physical = st.physical.add(load);
                self.log.record("sim", "preload", &[("node", node), ("load", load)]);
            }
            _ => {
                self.report.preloads_rejected += 1;
                self.log.record("sim", "preload-reject", &[("node", node), ("load", load)]);
            }
        }
        Ok(())
    }
}

/// Runs a scenario to completion with the given seed.
pub fn run(scenario: &Scenario, seed: u64) -> Result<RunOutput, SimError> {
    Simulation::new(scenario, seed)?.run_to_end()
}

/// Renders a plan the way `dtc plan` prints it.
pub fn render_plan(plan: &FederationPlan) -> String {
    let mut s = format!("mission {}\nmode: {}\ncost: {}\nhops: {}\n", plan.mission_id, plan.mode, plan.total_cost, plan.total_hops);
    s.push_str("selection:\n");
    for (c, m) in &plan.selected {
        s.push_str(&format!("  {c} -> {m}\n"));
    }
    s.push_str("placement:\n");
    for (m, n) in &plan.placement {
        s.push_str(&format!("  {m} @ {n}\n"));
    }
    s.push_str("routes:\n");
    for (i, r) in &plan.routes {
        s.push_str(&format!("  interaction {i}: {} ({} ms)\n", path_str(&r.nodes), r.latency_ms));
    }
    s
}
