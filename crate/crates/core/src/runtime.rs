//! Per-mission runtime: periodic state production, causal bookkeeping with
//! vector clocks, staleness measurement and bandwidth-gated upstream reports.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::federation::FederationPlan;
use crate::ids::{MissionId, ModelId, PartnerId, SliceId};
use crate::quantity::Quantity;
use crate::registry::ModelDescriptor;
use crate::slicing::{GrantState, SliceGrant};

pub type VClock = BTreeMap<ModelId, u64>;

/// Componentwise maximum of two vector clocks.
pub fn vclock_merge(a: &VClock, b: &VClock) -> VClock {
    let mut out = a.clone();
    for (k, v) in b {
        let e = out.entry(k.clone()).or_insert(0);
        *e = (*e).max(*v);
    }
    out
}

/// True when every component of `a` is at least the one in `b`.
pub fn vclock_dominates(a: &VClock, b: &VClock) -> bool {
    b.iter().all(|(k, v)| a.get(k).copied().unwrap_or(0) >= *v)
}

pub fn render_vclock(c: &VClock) -> String {
    let parts: Vec<String> = c.iter().map(|(k, v)| format!("{k}:{v}")).collect();
    format!("{{{}}}", parts.join(","))
}

/// Production period for an update rate, in whole milliseconds (at least 1).
pub fn period_ms(update_rate_hz: f64) -> u64 {
    ((1000.0 / update_rate_hz).round() as u64).max(1)
}

/// Transfer completion time for `size_mb` at `rate_mbps` over a route with
/// `latency_ms`, rounded up to whole milliseconds. `None` when the rate is zero.
pub fn transfer_ms(latency_ms: Quantity, size_mb: Quantity, rate_mbps: f64) -> Option<u64> {
    if rate_mbps <= 0.0 {
        return None;
    }
    let total = latency_ms.value() + size_mb.value() * 8.0 * 1000.0 / rate_mbps;
    // Absorb representation noise such as 160.00000000000003.
    Some((total - 1e-9).ceil().max(0.0) as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MissionStatus {
    Planned,
    Active,
    Completed,
    Failed,
}

impl fmt::Display for MissionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MissionStatus::Planned => "PLANNED",
            MissionStatus::Active => "ACTIVE",
            MissionStatus::Completed => "COMPLETED",
            MissionStatus::Failed => "FAILED",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuntimeError {
    #[error("slice {slice} is {state}, a mission needs a COMMITTED slice")]
    SliceNotCommitted { slice: SliceId, state: GrantState },
    #[error("mission {mission} is {status}, expected ACTIVE")]
    NotActive { mission: MissionId, status: MissionStatus },
    #[error("model {0} is not part of the mission plan")]
    UnknownModel(ModelId),
    #[error("plan selects model {0} without a descriptor")]
    MissingDescriptor(ModelId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RuntimeConfig {
    pub upstream_threshold_mbps: f64,
    pub report_queue_bound: usize,
    pub report_size_mb: f64,
    pub report_interval_ms: u64,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig { upstream_threshold_mbps: 1.0, report_queue_bound: 16, report_size_mb: 0.1, report_interval_ms: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StateUpdate {
    pub producer: ModelId,
    pub seq: u64,
    pub vclock: VClock,
    pub emitted_at: u64,
    pub size_mb: Quantity,
    pub digest: String,
}

/// One update travelling to one consumer along one interaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Delivery {
    pub update: StateUpdate,
    pub consumer: ModelId,
    pub interaction: usize,
    pub route_latency_ms: Quantity,
    /// Completion time, or `None` while the flow has no rate.
    pub deliver_at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModelState {
    pub digest: String,
    pub vclock: VClock,
    pub at_ms: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct InteractionMetrics {
    pub deliveries: u64,
    pub mean_staleness_ms: f64,
    pub max_staleness_ms: u64,
    pub drops: u64,
    pub deferrals: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MissionMetrics {
    pub interactions: BTreeMap<usize, InteractionMetrics>,
    pub reports_sent: u64,
    pub reports_deferred: u64,
    pub reports_dropped: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UpstreamReport {
    pub seq: u64,
    pub created_at: u64,
    pub clock: VClock,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReportOutcome {
    /// Reports sent now, oldest first; the current one is last.
    Sent(Vec<UpstreamReport>),
    Deferred { dropped: u64 },
}

/// Whom upstream reports go to: the coalition controller and every
/// participant's partner controller.
pub fn report_destinations(participants: impl IntoIterator<Item = PartnerId>) -> Vec<String> {
    let mut out = vec!["dtc".to_string()];
    out.extend(participants.into_iter().map(|p| format!("dtcp:{p}")));
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionInstance {
    pub mission_id: MissionId,
    pub plan: FederationPlan,
    pub slice_id: SliceId,
    pub status: MissionStatus,
    /// Merge of every model's clock.
    pub clock: VClock,
    pub vclocks: BTreeMap<ModelId, VClock>,
    pub last_state: BTreeMap<ModelId, ModelState>,
    pub periods: BTreeMap<ModelId, u64>,
    pub sizes: BTreeMap<ModelId, Quantity>,
    /// Producer and consumer model per interaction index.
    pub interaction_models: BTreeMap<usize, (ModelId, ModelId)>,
    pub seqs: BTreeMap<ModelId, u64>,
    /// Last applied seq per (producer, consumer).
    pub applied: BTreeMap<(ModelId, ModelId), u64>,
    pub deferred: Vec<Delivery>,
    pub report_queue: VecDeque<UpstreamReport>,
    pub report_seq: u64,
    pub staleness: BTreeMap<usize, Vec<u64>>,
    pub metrics: MissionMetrics,
    pub nonce: u64,
}

/// Flow id used for an interaction's traffic inside the mission's slice.
pub fn flow_id(mission: &MissionId, interaction: usize) -> String {
    format!("{mission}/i{interaction}")
}

/// Starts a mission over a committed slice. Returns the instance and the first
/// production time of every selected model, one period after `now`.
pub fn activate(
    plan: &FederationPlan,
    interactions: &[crate::federation::Interaction],
    models: &BTreeMap<ModelId, ModelDescriptor>,
    grant: &SliceGrant,
    now: u64,
    nonce: u64,
) -> Result<(MissionInstance, Vec<(ModelId, u64)>), RuntimeError> {
    if grant.state != GrantState::Committed {
        return Err(RuntimeError::SliceNotCommitted { slice: grant.slice_id.clone(), state: grant.state });
    }
    let mut periods = BTreeMap::new();
    let mut sizes = BTreeMap::new();
    for m in plan.placement.keys() {
        let d = models.get(m).ok_or_else(|| RuntimeError::MissingDescriptor(m.clone()))?;
        periods.insert(m.clone(), period_ms(d.update_rate_hz));
        sizes.insert(m.clone(), d.update_size_mb);
    }
    let mut interaction_models = BTreeMap::new();
    for (i, it) in interactions.iter().enumerate() {
        let p = plan.selected.get(&it.producer_capability);
        let c = plan.selected.get(&it.consumer_capability);
        if let (Some(p), Some(c)) = (p, c) {
            interaction_models.insert(i, (p.clone(), c.clone()));
        }
    }
    let vclocks: BTreeMap<ModelId, VClock> =
        periods.keys().map(|m| (m.clone(), periods.keys().map(|k| (k.clone(), 0)).collect())).collect();
    let metrics = MissionMetrics {
        interactions: interaction_models.keys().map(|i| (*i, InteractionMetrics::default())).collect(),
        ..Default::default()
    };
    let schedule = periods.iter().map(|(m, p)| (m.clone(), now + p)).collect();
    let mi = MissionInstance {
        mission_id: plan.mission_id.clone(),
        plan: plan.clone(),
        slice_id: grant.slice_id.clone(),
        status: MissionStatus::Active,
        clock: vclocks.values().next().cloned().unwrap_or_default(),
        vclocks,
        last_state: BTreeMap::new(),
        periods,
        sizes,
        interaction_models,
        seqs: BTreeMap::new(),
        applied: BTreeMap::new(),
        deferred: Vec::new(),
        report_queue: VecDeque::new(),
        report_seq: 0,
        staleness: BTreeMap::new(),
        metrics,
        nonce,
    };
    Ok((mi, schedule))
}

fn digest(nonce: u64, mission: &MissionId, model: &ModelId, seq: u64) -> String {
    let mut h = Sha256::new();
    h.update(nonce.to_le_bytes());
    h.update(mission.as_str().as_bytes());
    h.update([0]);
    h.update(model.as_str().as_bytes());
    h.update(seq.to_le_bytes());
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

impl MissionInstance {
    fn ensure_active(&self) -> Result<(), RuntimeError> {
        if self.status == MissionStatus::Active {
            Ok(())
        } else {
            Err(RuntimeError::NotActive { mission: self.mission_id.clone(), status: self.status })
        }
    }

    /// Interactions fed by `model`, with their consumer models.
    pub fn consumers_of(&self, model: &ModelId) -> Vec<(usize, ModelId)> {
        self.interaction_models.iter().filter(|(_, (p, _))| p == model).map(|(i, (_, c))| (*i, c.clone())).collect()
    }

    /// Emits one state update from `model`. `rate` gives the current allocated
    /// rate of an interaction's flow.
    pub fn on_produce(
        &mut self,
        model: &ModelId,
        now: u64,
        rate: &dyn Fn(usize) -> f64,
    ) -> Result<Vec<Delivery>, RuntimeError> {
        self.ensure_active()?;
        let size = *self.sizes.get(model).ok_or_else(|| RuntimeError::UnknownModel(model.clone()))?;
        let seq = {
            let s = self.seqs.entry(model.clone()).or_insert(0);
            *s += 1;
            *s
        };
        let clock = self.vclocks.get_mut(model).expect("clock per planned model");
        *clock.entry(model.clone()).or_insert(0) += 1;
        let vclock = clock.clone();
        self.clock = vclock_merge(&self.clock, &vclock);
        let update = StateUpdate {
            producer: model.clone(),
            seq,
            vclock: vclock.clone(),
            emitted_at: now,
            size_mb: size,
            digest: digest(self.nonce, &self.mission_id, model, seq),
        };
        self.last_state.insert(model.clone(), ModelState { digest: update.digest.clone(), vclock, at_ms: now });

        let mut out = Vec::new();
        for (i, consumer) in self.consumers_of(model) {
            let latency = self.plan.routes.get(&i).map(|r| r.latency_ms).unwrap_or_default();
            let deliver_at = transfer_ms(latency, size, rate(i)).map(|d| now + d);
            let d = Delivery { update: update.clone(), consumer, interaction: i, route_latency_ms: latency, deliver_at };
            if deliver_at.is_none() {
                self.metrics.interactions.entry(i).or_default().deferrals += 1;
                self.deferred.push(d.clone());
            }
            out.push(d);
        }
        Ok(out)
    }

    /// Restarts deferred transfers whose flow now has a rate.
    pub fn resume_deferred(&mut self, now: u64, rate: &dyn Fn(usize) -> f64) -> Vec<Delivery> {
        let mut resumed = Vec::new();
        let mut still = Vec::new();
        for mut d in std::mem::take(&mut self.deferred) {
            match transfer_ms(d.route_latency_ms, d.update.size_mb, rate(d.interaction)) {
                Some(t) => {
                    d.deliver_at = Some(now + t);
                    resumed.push(d);
                }
                None => still.push(d),
            }
        }
        self.deferred = still;
        resumed
    }

    /// Applies a delivered update at its consumer. Returns false when the
    /// update was dropped as out of order.
    pub fn on_deliver(&mut self, d: &Delivery, now: u64) -> bool {
        if self.status != MissionStatus::Active {
            return false;
        }
        let key = (d.update.producer.clone(), d.consumer.clone());
        let m = self.metrics.interactions.entry(d.interaction).or_default();
        if self.applied.get(&key).is_some_and(|last| d.update.seq <= *last) {
            m.drops += 1;
            return false;
        }
        self.applied.insert(key, d.update.seq);
        let clock = self.vclocks.entry(d.consumer.clone()).or_default();
        *clock = vclock_merge(clock, &d.update.vclock);
        self.clock = vclock_merge(&self.clock, &d.update.vclock);
        let staleness = now.saturating_sub(d.update.emitted_at);
        let samples = self.staleness.entry(d.interaction).or_default();
        samples.push(staleness);
        m.deliveries = samples.len() as u64;
        m.max_staleness_ms = m.max_staleness_ms.max(staleness);
        m.mean_staleness_ms = samples.iter().sum::<u64>() as f64 / samples.len() as f64;
        true
    }

    /// Sends a status report if the uplink has at least the threshold residual,
    /// draining older deferred reports first; otherwise queues it.
    pub fn report_upstream(
        &mut self,
        residual_mbps: f64,
        config: &RuntimeConfig,
        now: u64,
    ) -> Result<ReportOutcome, RuntimeError> {
        self.ensure_active()?;
        self.report_seq += 1;
        let report = UpstreamReport { seq: self.report_seq, created_at: now, clock: self.clock.clone() };
        if residual_mbps >= config.upstream_threshold_mbps {
            let mut sent: Vec<UpstreamReport> = self.report_queue.drain(..).collect();
            sent.push(report);
            self.metrics.reports_sent += sent.len() as u64;
            return Ok(ReportOutcome::Sent(sent));
        }
        self.metrics.reports_deferred += 1;
        self.report_queue.push_back(report);
        let mut dropped = 0;
        while self.report_queue.len() > config.report_queue_bound {
            self.report_queue.pop_front();
            dropped += 1;
        }
        self.metrics.reports_dropped += dropped;
        Ok(ReportOutcome::Deferred { dropped })
    }

    /// Sends queued reports after bandwidth recovers, without a new report.
    pub fn drain_reports(&mut self, residual_mbps: f64, config: &RuntimeConfig) -> Vec<UpstreamReport> {
        if self.status != MissionStatus::Active || residual_mbps < config.upstream_threshold_mbps {
            return Vec::new();
        }
        let sent: Vec<UpstreamReport> = self.report_queue.drain(..).collect();
        self.metrics.reports_sent += sent.len() as u64;
        sent
    }

    /// Marks the mission complete and returns the slice to terminate.
    pub fn complete(&mut self) -> Result<SliceId, RuntimeError> {
        self.ensure_active()?;
        self.status = MissionStatus::Completed;
        self.deferred.clear();
        Ok(self.slice_id.clone())
    }

    pub fn fail(&mut self) -> Result<SliceId, RuntimeError> {
        self.ensure_active()?;
        self.status = MissionStatus::Failed;
        self.deferred.clear();
        Ok(self.slice_id.clone())
    }
}
