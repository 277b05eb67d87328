use std::collections::BTreeMap;

use serde::Serialize;

use crate::federation::{FederationPlan, PlanMode};
use crate::ids::{MissionId, ModelId, NodeId, SliceId};
use crate::runtime::MissionMetrics;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Admissions {
    pub attempted: u64,
    pub committed: u64,
    /// Admitted by the global controller, then refused by a domain or at commit.
    pub aborted: u64,
    pub rejected_gc: u64,
    /// Federation found no admissible plan; no slice was requested.
    pub rejected_planning: u64,
    pub reasons: BTreeMap<String, u64>,
}

impl Admissions {
    pub fn consistent(&self) -> bool {
        self.attempted == self.committed + self.aborted + self.rejected_gc + self.rejected_planning
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    RejectedPlanning,
    RejectedGc,
    Aborted,
    Active,
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanSummary {
    pub cost: f64,
    pub mode: PlanMode,
    pub hops: usize,
    pub placement: BTreeMap<ModelId, NodeId>,
    pub selected: BTreeMap<String, ModelId>,
}

impl From<&FederationPlan> for PlanSummary {
    fn from(p: &FederationPlan) -> Self {
        PlanSummary {
            cost: p.total_cost.value(),
            mode: p.mode,
            hops: p.total_hops,
            placement: p.placement.clone(),
            selected: p.selected.iter().map(|(c, m)| (c.to_string(), m.clone())).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissionReport {
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slice_id: Option<SliceId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanSummary>,
    pub requested_at_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ended_at_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MissionMetrics>,
    /// Digest of each model's last produced state; depends on the seed.
    pub final_digests: BTreeMap<ModelId, String>,
}

/// Flow rates of one slice after a (re)allocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairnessSample {
    pub t_ms: u64,
    pub slice_id: SliceId,
    pub trigger: String,
    pub rates: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunReport {
    pub seed: u64,
    pub admissions: Admissions,
    pub missions: BTreeMap<MissionId, MissionReport>,
    pub fairness: Vec<FairnessSample>,
    pub auditor_violations: Vec<String>,
    pub events_processed: u64,
    pub preloads_rejected: u64,
    pub end_ms: u64,
}

impl RunReport {
    /// Mean staleness over every delivery of every mission, if any.
    pub fn mean_staleness_ms(&self) -> Option<f64> {
        let (mut n, mut total) = (0u64, 0.0);
        for m in self.missions.values().filter_map(|m| m.metrics.as_ref()) {
            for i in m.interactions.values() {
                n += i.deliveries;
                total += i.mean_staleness_ms * i.deliveries as f64;
            }
        }
        (n > 0).then(|| total / n as f64)
    }

    /// Short human-readable summary.
    pub fn summary(&self) -> String {
        let a = &self.admissions;
        let mut s = format!(
            "admissions: attempted={} committed={} aborted={} rejected_gc={} rejected_planning={}\n",
            a.attempted, a.committed, a.aborted, a.rejected_gc, a.rejected_planning
        );
        for (reason, n) in &a.reasons {
            s.push_str(&format!("  {reason}: {n}\n"));
        }
        match self.mean_staleness_ms() {
            Some(m) => s.push_str(&format!("mean staleness: {m:.3} ms\n")),
            None => s.push_str("mean staleness: n/a\n"),
        }
        for (id, m) in &self.missions {
            let plan = m.plan.as_ref().map(|p| format!(" cost={} mode={}", p.cost, p.mode)).unwrap_or_default();
            s.push_str(&format!("mission {id}: {}{plan}\n", serde_json::to_value(m.outcome).expect("enum").as_str().unwrap_or("")));
        }
        if let Some(last) = self.fairness.last() {
            let rates: Vec<String> = last.rates.iter().map(|(f, r)| format!("{f}={r}")).collect();
            s.push_str(&format!("fairness @{} ms ({}): {}\n", last.t_ms, last.slice_id, rates.join(" ")));
        }
        s.push_str(&format!("auditor violations: {}\n", self.auditor_violations.len()));
        s
    }
}

/// The report as written to disk: run report plus tool version and scenario digest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportFile {
    pub tool_version: String,
    pub scenario_digest: String,
    #[serde(flatten)]
    pub report: RunReport,
}

impl ReportFile {
    pub fn new(report: RunReport, scenario_digest: String) -> Self {
        ReportFile { tool_version: env!("CARGO_PKG_VERSION").to_string(), scenario_digest, report }
    }

    /// Pretty JSON with sorted keys and a trailing newline.
    pub fn to_json(&self) -> String {
        let v = serde_json::to_value(self).expect("report serializes");
        let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
        s.push('\n');
        s
    }
}
