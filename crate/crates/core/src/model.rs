//! Domain types shared by the analytic engine and the simulator.
//!
//! Node indices follow the usual relay-network convention: 1 is the source,
//! 2 the relay and 3 the destination, so `p12` is the source-to-relay link.

use std::fmt;

use crate::error::{Error, Result};

/// Per-link packet success probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelProbabilities {
    /// Source to destination.
    pub p13: f64,
    /// Source to relay.
    pub p12: f64,
    /// Relay to destination.
    pub p23: f64,
}

/// Per-slot transmission attempt probabilities of a node with a non-empty queue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccessProbabilities {
    pub q1: f64,
    pub q2: f64,
}

/// Flow-controller setting at the relay: the probability that an overheard
/// source packet (not decoded by the destination) is accepted for relaying.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CooperationPolicy {
    pub pa: f64,
}

impl CooperationPolicy {
    pub const NONE: CooperationPolicy = CooperationPolicy { pa: 0.0 };
    pub const FULL: CooperationPolicy = CooperationPolicy { pa: 1.0 };

    pub fn new(pa: f64) -> Self {
        Self { pa }
    }
}

/// Exogenous Bernoulli arrival rates, packets per slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl RatePoint {
    pub const ORIGIN: RatePoint = RatePoint {
        lambda1: 0.0,
        lambda2: 0.0,
    };

    pub fn new(lambda1: f64, lambda2: f64) -> Self {
        Self { lambda1, lambda2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub channel: ChannelProbabilities,
    pub access: AccessProbabilities,
}

impl SystemParams {
    pub fn new(p13: f64, p12: f64, p23: f64, q1: f64, q2: f64) -> Self {
        Self {
            channel: ChannelProbabilities { p13, p12, p23 },
            access: AccessProbabilities { q1, q2 },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    OutOfRange { name: &'static str, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::OutOfRange { name, value } => {
                write!(f, "{name} out of range: {value} not in [0, 1]")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// The modelling assumption that the relay has the better channel to the
    /// destination does not hold.
    RelayChannelNotBetter { p13: f64, p23: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::RelayChannelNotBetter { p13, p23 } => {
                write!(f, "p23 <= p13 ({p23} <= {p13})")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Validation {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Warning>,
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<Vec<Warning>> {
        match self.violations.into_iter().next() {
            None => Ok(self.warnings),
            Some(Violation::OutOfRange { name, value }) => Err(Error::OutOfRange { name, value }),
        }
    }
}

pub(crate) fn is_probability(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

pub fn validate_params(params: &SystemParams) -> Validation {
    let ChannelProbabilities { p13, p12, p23 } = params.channel;
    let AccessProbabilities { q1, q2 } = params.access;
    let mut out = Validation::default();
    for (name, value) in [
        ("p13", p13),
        ("p12", p12),
        ("p23", p23),
        ("q1", q1),
        ("q2", q2),
    ] {
        if !is_probability(value) {
            out.violations.push(Violation::OutOfRange { name, value });
        }
    }
    if is_probability(p13) && is_probability(p23) && p23 <= p13 {
        out.warnings
            .push(Warning::RelayChannelNotBetter { p13, p23 });
    }
    out
}

/// Probability that a source packet leaving the source queue was taken over
/// by the relay rather than decoded directly at the destination.
pub fn branch_probability(
    channel: &ChannelProbabilities,
    policy: &CooperationPolicy,
) -> Result<f64> {
    let relayed = (1.0 - channel.p13) * channel.p12 * policy.pa;
    let departs = channel.p13 + relayed;
    if departs <= 0.0 {
        return Err(Error::UndeliverableSource);
    }
    Ok(relayed / departs)
}

/// Service and arrival rates of the system in which the source transmits
/// dummy packets whenever it is empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedRates {
    pub mu1: f64,
    pub mu2_q: f64,
    pub lambda_q2: f64,
    pub branch_prob: f64,
}

impl DerivedRates {
    pub fn source_dummy_system(
        params: &SystemParams,
        policy: &CooperationPolicy,
        rates: &RatePoint,
    ) -> Result<Self> {
        let branch_prob = branch_probability(&params.channel, policy)?;
        let lambda_q2 = rates.lambda2 + branch_prob * rates.lambda1;
        let busy = crate::analytic::dominant1_q2_busy_prob(rates, params, policy)?;
        Ok(Self {
            mu1: crate::analytic::source_service_rate(params, policy, busy),
            mu2_q: crate::analytic::source_dummy_relay_service_rate(params),
            lambda_q2,
            branch_prob,
        })
    }
}
