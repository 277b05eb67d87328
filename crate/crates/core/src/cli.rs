//! Batch commands behind the `dtc` binary. Each returns the exit code and the
//! text to print, so the binary only parses flags and writes streams.

use std::path::Path;

use crate::ids::MissionId;
use crate::scenario::{EventKind, Scenario, ScenarioError};
use crate::sim::{render_plan, run, SimError, Simulation};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CmdOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CmdOutput {
    fn ok(stdout: String) -> Self {
        CmdOutput { code: EXIT_OK, stdout, stderr: String::new() }
    }

    fn fail(code: i32, stderr: String) -> Self {
        CmdOutput { code, stdout: String::new(), stderr }
    }
}

fn load(path: &Path) -> Result<Scenario, CmdOutput> {
    let s = Scenario::load(path).map_err(|e| match e {
        ScenarioError::Io { .. } => CmdOutput::fail(EXIT_IO, format!("{e}\n")),
        _ => CmdOutput::fail(EXIT_INVALID, format!("{}: {e}\n", path.display())),
    })?;
    let violations = s.validate();
    if !violations.is_empty() {
        let mut msg = format!("{}: {} violation(s)\n", path.display(), violations.len());
        for v in violations {
            msg.push_str(&format!("  {v}\n"));
        }
        return Err(CmdOutput::fail(EXIT_INVALID, msg));
    }
    Ok(s)
}

pub fn cmd_validate(path: &Path) -> CmdOutput {
    match load(path) {
        Ok(_) => CmdOutput::ok("OK\n".into()),
        Err(out) => out,
    }
}

pub fn cmd_run(path: &Path, seed: u64, out: Option<&Path>, log: Option<&Path>) -> CmdOutput {
    let scenario = match load(path) {
        Ok(s) => s,
        Err(out) => return out,
    };
    let output = match run(&scenario, seed) {
        Ok(o) => o,
        Err(SimError::Invalid(v)) => return CmdOutput::fail(EXIT_INVALID, format!("{}\n", v.join("\n"))),
        Err(e) => return CmdOutput::fail(EXIT_RUNTIME, format!("{e}\n")),
    };
    let report = output.report_file(&scenario).to_json();
    for (target, text) in [(out, &report), (log, &output.log.render())] {
        if let Some(p) = target {
            if let Err(e) = std::fs::write(p, text) {
                return CmdOutput::fail(EXIT_IO, format!("cannot write {}: {e}\n", p.display()));
            }
        }
    }
    CmdOutput::ok(format!("seed: {seed}\n{}", output.report.summary()))
}

/// Simulation state at time zero: nothing admitted, time-zero preloads applied.
pub fn planning_state(scenario: &Scenario) -> Result<Simulation, SimError> {
    let mut sim = Simulation::new(scenario, 0)?;
    let preloads = scenario.events.iter().filter(|e| e.at_ms == 0 && matches!(e.kind, EventKind::PreloadPhysicalLoad { .. }));
    for e in preloads {
        sim.apply(e.kind.clone())?;
    }
    Ok(sim)
}

pub fn cmd_plan(path: &Path, mission: &str) -> CmdOutput {
    let scenario = match load(path) {
        Ok(s) => s,
        Err(out) => return out,
    };
    let Some(pm) = scenario.mission(&MissionId::from(mission)) else {
        return CmdOutput::fail(EXIT_INVALID, format!("unknown mission {mission}\n"));
    };
    let sim = match planning_state(&scenario) {
        Ok(s) => s,
        Err(e) => return CmdOutput::fail(EXIT_RUNTIME, format!("{e}\n")),
    };
    match sim.plan(pm) {
        Ok(plan) => CmdOutput::ok(render_plan(&plan)),
        Err(e) => CmdOutput::fail(EXIT_RUNTIME, format!("mission {mission} infeasible: {e}\n")),
    }
}
