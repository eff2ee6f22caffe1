//! Location-management simulator: register hierarchies, synthetic mobility,
//! call traffic, four location schemes and a deterministic event engine.

pub mod engine;
pub mod mobility;
pub mod scenario;
pub mod schemes;
pub mod topology;
pub mod traffic;
