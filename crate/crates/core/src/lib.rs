//! Coalition digital-twin orchestration: partner registries, federation of
//! twin models into missions, cross-domain slice admission, mission runtime
//! synchronisation, and a deterministic discrete-event simulator that drives
//! them from scenario files.

pub mod cli;
pub mod federation;
pub mod ids;
pub mod paths;
pub mod quantity;
pub mod registry;
pub mod resources;
pub mod runtime;
pub mod scenario;
pub mod sim;
pub mod slicing;
pub mod topology;
pub mod trace;
