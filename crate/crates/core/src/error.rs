use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{name} out of range: {value} not in [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },

    #[error("source can never deliver a packet (p13 = 0 and no relaying)")]
    UndeliverableSource,

    #[error("relay queue unstable: load {load} >= 1")]
    UnstableQueue { load: f64 },

    #[error("relay has zero service rate")]
    ZeroService,

    #[error("closure thresholds undefined: p13 + p23 = 0")]
    DegenerateThreshold,

    #[error("lambda1 = {lambda1} exceeds the largest source rate {limit} supported by any acceptance probability")]
    ExceedsCapacity { lambda1: f64, limit: f64 },

    #[error("optimal acceptance probability undefined: source-to-relay link never succeeds")]
    DegenerateOptimalPa,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
