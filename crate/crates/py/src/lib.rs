//! Python bindings. Scenarios go in and reports come out as JSON text.

use dtc_core::cli::planning_state;
use dtc_core::ids::MissionId;
use dtc_core::scenario::Scenario;
use dtc_core::sim::{render_plan, SimError};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn parse(scenario_json: &str) -> PyResult<Scenario> {
    Scenario::parse(scenario_json).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn sim_err(e: SimError) -> PyErr {
    match e {
        SimError::Invalid(v) => PyValueError::new_err(v.join("; ")),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Violations found in a scenario; empty when it is valid.
/// Malformed JSON or unknown keys raise ValueError.
#[pyfunction]
fn validate(scenario_json: &str) -> PyResult<Vec<String>> {
    Ok(parse(scenario_json)?.validate())
}

/// Runs a scenario to its END event and returns `(report_json, event_log)`.
#[pyfunction]
#[pyo3(signature = (scenario_json, seed = 0))]
fn run(scenario_json: &str, seed: u64) -> PyResult<(String, String)> {
    let scenario = parse(scenario_json)?;
    let out = dtc_core::sim::run(&scenario, seed).map_err(sim_err)?;
    Ok((out.report_file(&scenario).to_json(), out.log.render()))
}

/// Dry-run federation of one mission against the time-zero state.
#[pyfunction]
fn plan(scenario_json: &str, mission_id: &str) -> PyResult<String> {
    let scenario = parse(scenario_json)?;
    let pm = scenario
        .mission(&MissionId::from(mission_id))
        .ok_or_else(|| PyValueError::new_err(format!("unknown mission {mission_id}")))?;
    let sim = planning_state(&scenario).map_err(sim_err)?;
    let plan = sim.plan(pm).map_err(|e| PyRuntimeError::new_err(format!("mission {mission_id} infeasible: {e}")))?;
    Ok(render_plan(&plan))
}

#[pymodule]
fn dtcoalition(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    Ok(())
}
