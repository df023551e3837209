//! Closed-form service rates and stable-throughput regions.
//!
//! Every region is a union of convex polygons in the `(lambda1, lambda2)`
//! plane. Each polygon is stored as a small set of linear inequalities in
//! multiplied-out form (no divisions), so degenerate parameters such as
//! `q1 = 1` or `p23 = 0` give empty regions instead of NaNs.
//!
//! Interiors are open: a point exactly on a boundary line is outside.

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{
    branch_probability, ChannelProbabilities, CooperationPolicy, RatePoint, SystemParams,
};

/// Average service rate of the source given the probability that the relay
/// queue is non-empty.
pub fn source_service_rate(
    params: &SystemParams,
    policy: &CooperationPolicy,
    prob_q2_nonempty: f64,
) -> f64 {
    let q = params.access;
    let ch = params.channel;
    let relay_idle = 1.0 - prob_q2_nonempty;
    ((1.0 - q.q2) * prob_q2_nonempty + relay_idle)
        * q.q1
        * (ch.p13 + (1.0 - ch.p13) * ch.p12 * policy.pa)
}

/// Average service rate of the relay given the probability that the source
/// queue is non-empty.
pub fn relay_service_rate(params: &SystemParams, prob_q1_nonempty: f64) -> f64 {
    let q = params.access;
    q.q2 * (1.0 - q.q1 * prob_q1_nonempty) * params.channel.p23
}

/// Relay service rate when the source transmits (real or dummy) with
/// probability `q1` in every slot.
pub fn source_dummy_relay_service_rate(params: &SystemParams) -> f64 {
    relay_service_rate(params, 1.0)
}

/// Exogenous plus endogenous (relayed) arrival rate at the relay queue.
pub fn relay_total_arrival_rate(
    rates: &RatePoint,
    channel: &ChannelProbabilities,
    policy: &CooperationPolicy,
) -> Result<f64> {
    Ok(rates.lambda2 + branch_probability(channel, policy)? * rates.lambda1)
}

/// Stationary busy probability of the relay queue when the source sends
/// dummy packets whenever it is empty.
pub fn dominant1_q2_busy_prob(
    rates: &RatePoint,
    params: &SystemParams,
    policy: &CooperationPolicy,
) -> Result<f64> {
    let service = source_dummy_relay_service_rate(params);
    if service <= 0.0 {
        return Err(Error::ZeroService);
    }
    let load = relay_total_arrival_rate(rates, &params.channel, policy)? / service;
    if load >= 1.0 {
        return Err(Error::UnstableQueue { load });
    }
    Ok(load)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubregionId {
    /// Fixed acceptance probability, source sends dummies.
    R1Pa,
    /// Fixed acceptance probability, relay sends dummies.
    R2Pa,
    R11,
    R12,
    R21,
    R221,
    R222,
}

impl SubregionId {
    pub fn as_str(&self) -> &'static str {
        match self {
            SubregionId::R1Pa => "R1_PA",
            SubregionId::R2Pa => "R2_PA",
            SubregionId::R11 => "R11",
            SubregionId::R12 => "R12",
            SubregionId::R21 => "R21",
            SubregionId::R221 => "R221",
            SubregionId::R222 => "R222",
        }
    }
}

impl fmt::Display for SubregionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub region: SubregionId,
    pub satisfied: bool,
    /// Smallest signed slack over the subregion's inequalities.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipVerdict {
    pub inside: bool,
    pub witnesses: Vec<Witness>,
    /// Largest subregion margin. Slacks are Euclidean distances to each
    /// inequality's boundary line, in packets/slot; positive inside.
    pub margin: f64,
}

impl MembershipVerdict {
    fn from_witnesses(witnesses: Vec<Witness>) -> Self {
        let inside = witnesses.iter().any(|w| w.satisfied);
        let margin = witnesses
            .iter()
            .map(|w| w.margin)
            .fold(f64::NEG_INFINITY, f64::max);
        Self {
            inside,
            witnesses,
            margin,
        }
    }

    pub fn witness(&self, region: SubregionId) -> Option<&Witness> {
        self.witnesses.iter().find(|w| w.region == region)
    }

    /// Satisfied witness with the largest margin.
    pub fn strongest(&self) -> Option<&Witness> {
        self.witnesses
            .iter()
            .filter(|w| w.satisfied)
            .max_by(|a, b| a.margin.total_cmp(&b.margin))
    }
}

/// `a1 * lambda1 + a2 * lambda2 < rhs` (or `<=` when not strict).
#[derive(Debug, Clone, Copy)]
struct Inequality {
    a1: f64,
    a2: f64,
    rhs: f64,
    strict: bool,
}

impl Inequality {
    fn lt(a1: f64, a2: f64, rhs: f64) -> Self {
        Self {
            a1,
            a2,
            rhs,
            strict: true,
        }
    }

    fn lambda1_at_least(bound: f64) -> Self {
        Self {
            a1: -1.0,
            a2: 0.0,
            rhs: -bound,
            strict: false,
        }
    }

    fn check(&self, p: &RatePoint) -> (bool, f64) {
        let lhs = self.a1 * p.lambda1 + self.a2 * p.lambda2;
        let ok = if self.strict {
            lhs < self.rhs
        } else {
            lhs <= self.rhs
        };
        let norm = self.a1.hypot(self.a2);
        let slack = if norm > 0.0 {
            (self.rhs - lhs) / norm
        } else if ok {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
        (ok, slack)
    }

    fn residual(&self, p: &RatePoint) -> f64 {
        self.a1 * p.lambda1 + self.a2 * p.lambda2 - self.rhs
    }
}

#[derive(Debug, Clone)]
struct Subregion {
    id: SubregionId,
    ineqs: Vec<Inequality>,
}

impl Subregion {
    fn evaluate(&self, p: &RatePoint) -> Witness {
        let mut satisfied = true;
        let mut margin = f64::INFINITY;
        for ineq in &self.ineqs {
            let (ok, slack) = ineq.check(p);
            satisfied &= ok;
            margin = margin.min(slack);
        }
        Witness {
            region: self.id,
            satisfied,
            margin,
        }
    }

    /// Supremum of lambda1 over the subregion's intersection with lambda2 = 0.
    fn lambda1_intercept(&self) -> Option<f64> {
        let mut lo = 0.0f64;
        let mut hi = f64::INFINITY;
        for ineq in &self.ineqs {
            if ineq.a1 > 0.0 {
                hi = hi.min(ineq.rhs / ineq.a1);
            } else if ineq.a1 < 0.0 {
                lo = lo.max(ineq.rhs / ineq.a1);
            } else if !(0.0 < ineq.rhs || (!ineq.strict && ineq.rhs == 0.0)) {
                return None;
            }
        }
        (hi > lo).then_some(hi)
    }
}

/// First-dominant-system constraints for acceptance probability `pa`.
fn r1_pa(params: &SystemParams, pa: f64, id: SubregionId) -> Subregion {
    let (q1, q2) = (params.access.q1, params.access.q2);
    let ChannelProbabilities { p13, p12, p23 } = params.channel;
    let relayed = (1.0 - p13) * p12 * pa;
    let departs = p13 + relayed;
    let c = (1.0 - q1) * p23;
    Subregion {
        id,
        ineqs: vec![
            // source queue: lambda1 < mu1 with the relay busy probability substituted
            Inequality::lt(c + q1 * relayed, q1 * departs, q1 * departs * c),
            // relay queue: lambda_Q2 < q2 (1 - q1) p23, scaled by `departs`
            Inequality::lt(relayed, departs, q2 * c * departs),
        ],
    }
}

/// Second-dominant-system constraints for acceptance probability `pa`.
fn r2_pa(params: &SystemParams, pa: f64, id: SubregionId) -> Subregion {
    let (q1, q2) = (params.access.q1, params.access.q2);
    let ChannelProbabilities { p13, p12, p23 } = params.channel;
    let relayed = (1.0 - p13) * p12 * pa;
    let departs = p13 + relayed;
    Subregion {
        id,
        ineqs: vec![
            Inequality::lt(
                (1.0 - q2) * relayed + q2 * p23,
                (1.0 - q2) * departs,
                q2 * p23 * (1.0 - q2) * departs,
            ),
            Inequality::lt(1.0, 0.0, q1 * (1.0 - q2) * departs),
        ],
    }
}

fn r11(params: &SystemParams) -> Subregion {
    let (q1, q2) = (params.access.q1, params.access.q2);
    let ChannelProbabilities { p13, p12, p23 } = params.channel;
    let full = p13 + (1.0 - p13) * p12;
    Subregion {
        id: SubregionId::R11,
        ineqs: vec![
            Inequality::lt(
                q1 * p12 * (1.0 - p13) + (1.0 - q1) * p23,
                q1 * full,
                (1.0 - q1) * p23 * q1 * full,
            ),
            Inequality::lt(p12 * (1.0 - p13), full, q2 * (1.0 - q1) * p23 * full),
        ],
    }
}

fn r12(params: &SystemParams) -> Subregion {
    let (q1, q2) = (params.access.q1, params.access.q2);
    let ChannelProbabilities { p13, p23, .. } = params.channel;
    Subregion {
        id: SubregionId::R12,
        ineqs: vec![
            Inequality::lt((1.0 - q1) * p23, q1 * p13, q1 * p13 * (1.0 - q1) * p23),
            Inequality::lt(0.0, 1.0, q2 * (1.0 - q1) * p23),
        ],
    }
}

fn r21(params: &SystemParams) -> Subregion {
    let (q1, q2) = (params.access.q1, params.access.q2);
    let ChannelProbabilities { p13, p12, p23 } = params.channel;
    let full = p13 + (1.0 - p13) * p12;
    Subregion {
        id: SubregionId::R21,
        ineqs: vec![
            Inequality::lt(
                (1.0 - q2) * p12 * (1.0 - p13) + q2 * p23,
                (1.0 - q2) * full,
                q2 * p23 * (1.0 - q2) * full,
            ),
            Inequality::lt(1.0, 0.0, q1 * (1.0 - q2) * full),
        ],
    }
}

fn r221(params: &SystemParams) -> Subregion {
    let (q1, q2) = (params.access.q1, params.access.q2);
    let ChannelProbabilities { p13, p23, .. } = params.channel;
    Subregion {
        id: SubregionId::R221,
        ineqs: vec![
            Inequality::lt(q2 * p23, (1.0 - q2) * p13, (1.0 - q2) * p13 * q2 * p23),
            Inequality::lt(1.0, 0.0, q1 * (1.0 - q2) * p13),
        ],
    }
}

fn r222(params: &SystemParams) -> Subregion {
    let (q1, q2) = (params.access.q1, params.access.q2);
    let ChannelProbabilities { p13, p12, p23 } = params.channel;
    let split = q1 * (1.0 - q2) * p13;
    Subregion {
        id: SubregionId::R222,
        ineqs: vec![
            Inequality::lt(1.0, 1.0, split + q2 * p23 * (1.0 - q1)),
            Inequality::lambda1_at_least(split),
            Inequality::lt(1.0, 0.0, q1 * (1.0 - q2) * (p13 + (1.0 - p13) * p12)),
        ],
    }
}

fn union_verdict(regions: &[Subregion], point: &RatePoint) -> MembershipVerdict {
    MembershipVerdict::from_witnesses(regions.iter().map(|r| r.evaluate(point)).collect())
}

pub fn r1_pa_contains(
    point: &RatePoint,
    params: &SystemParams,
    policy: &CooperationPolicy,
) -> MembershipVerdict {
    union_verdict(&[r1_pa(params, policy.pa, SubregionId::R1Pa)], point)
}

pub fn r2_pa_contains(
    point: &RatePoint,
    params: &SystemParams,
    policy: &CooperationPolicy,
) -> MembershipVerdict {
    union_verdict(&[r2_pa(params, policy.pa, SubregionId::R2Pa)], point)
}

/// Membership in the stability region for a fixed acceptance probability.
pub fn region_fixed_pa_contains(
    point: &RatePoint,
    params: &SystemParams,
    policy: &CooperationPolicy,
) -> MembershipVerdict {
    RegionSelector::FixedPa(*policy).contains(params, point)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum R1Case {
    /// Full acceptance maximises the source-dummy subregion.
    Pa1,
    /// No acceptance maximises the source-dummy subregion.
    Pa0,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum R2Case {
    Pa1,
    /// Optimal acceptance depends on lambda1.
    Split,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureCase {
    pub r1_case: R1Case,
    pub r2_case: R2Case,
    /// `p23 / (p13 + p23)`, compared against `q1`.
    pub q1_threshold: f64,
    /// `p13 / (p13 + p23)`, compared against `q2`.
    pub q2_threshold: f64,
}

pub fn closure_case(params: &SystemParams) -> Result<ClosureCase> {
    let ChannelProbabilities { p13, p23, .. } = params.channel;
    let total = p13 + p23;
    if total <= 0.0 {
        return Err(Error::DegenerateThreshold);
    }
    let q1_threshold = p23 / total;
    let q2_threshold = p13 / total;
    Ok(ClosureCase {
        r1_case: if params.access.q1 < q1_threshold {
            R1Case::Pa1
        } else {
            R1Case::Pa0
        },
        r2_case: if params.access.q2 >= q2_threshold {
            R2Case::Pa1
        } else {
            R2Case::Split
        },
        q1_threshold,
        q2_threshold,
    })
}

fn closure_subregions(params: &SystemParams) -> Vec<Subregion> {
    // With p13 = p23 = 0 nothing is ever delivered; every subregion is empty
    // so the case choice is immaterial.
    let case = closure_case(params).unwrap_or(ClosureCase {
        r1_case: R1Case::Pa0,
        r2_case: R2Case::Pa1,
        q1_threshold: f64::NAN,
        q2_threshold: f64::NAN,
    });
    let mut regions = Vec::with_capacity(3);
    regions.push(match case.r1_case {
        R1Case::Pa1 => r11(params),
        R1Case::Pa0 => r12(params),
    });
    match case.r2_case {
        R2Case::Pa1 => regions.push(r21(params)),
        R2Case::Split => {
            regions.push(r221(params));
            regions.push(r222(params));
        }
    }
    regions
}

/// Membership in the closure of the stability region over all acceptance
/// probabilities.
pub fn closure_contains(point: &RatePoint, params: &SystemParams) -> MembershipVerdict {
    RegionSelector::Closure.contains(params, point)
}

/// Acceptance probability maximising the relay-dummy subregion at `lambda1`.
///
/// Fails with [`Error::ExceedsCapacity`] when no acceptance probability
/// keeps the source queue stable in that subregion.
pub fn optimal_pa(params: &SystemParams, lambda1: f64) -> Result<f64> {
    if !crate::model::is_probability(lambda1) {
        return Err(Error::OutOfRange {
            name: "lambda1",
            value: lambda1,
        });
    }
    let case = closure_case(params)?;
    if case.r2_case == R2Case::Pa1 {
        return Ok(1.0);
    }
    let (q1, q2) = (params.access.q1, params.access.q2);
    let ChannelProbabilities { p13, p12, .. } = params.channel;
    let threshold = q1 * (1.0 - q2) * p13;
    if lambda1 <= threshold {
        return Ok(0.0);
    }
    let span = q1 * (1.0 - q2) * (1.0 - p13) * p12;
    if span <= 0.0 {
        return Err(Error::DegenerateOptimalPa);
    }
    let pa = (lambda1 - threshold) / span;
    // Allow for rounding at the exact capacity point.
    if pa > 1.0 + 1e-12 {
        return Err(Error::ExceedsCapacity {
            lambda1,
            limit: threshold + span,
        });
    }
    Ok(pa.min(1.0))
}

/// Acceptance probability that realises the given closure subregion at `lambda1`.
fn subregion_pa(params: &SystemParams, region: SubregionId, lambda1: f64) -> Option<f64> {
    match region {
        SubregionId::R1Pa | SubregionId::R2Pa => None,
        SubregionId::R11 | SubregionId::R21 => Some(1.0),
        SubregionId::R12 | SubregionId::R221 => Some(0.0),
        SubregionId::R222 => {
            let (q1, q2) = (params.access.q1, params.access.q2);
            let ChannelProbabilities { p13, p12, .. } = params.channel;
            let span = q1 * (1.0 - q2) * (1.0 - p13) * p12;
            if span <= 0.0 {
                return Some(0.0);
            }
            Some(((lambda1 - q1 * (1.0 - q2) * p13) / span).clamp(0.0, 1.0))
        }
    }
}

/// Acceptance probability to operate at when targeting a closure point: the
/// one realising the witnessing subregion with the largest margin (or the
/// least-violated subregion for points outside the closure).
pub fn closure_operating_pa(params: &SystemParams, point: &RatePoint) -> f64 {
    let verdict = closure_contains(point, params);
    let best = verdict.strongest().or_else(|| {
        verdict
            .witnesses
            .iter()
            .max_by(|a, b| a.margin.total_cmp(&b.margin))
    });
    best.and_then(|w| subregion_pa(params, w.region, point.lambda1))
        .unwrap_or_else(|| optimal_pa(params, point.lambda1).map_or(1.0, |pa| pa.clamp(0.0, 1.0)))
}

/// Which region a query or trace refers to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegionSelector {
    FixedPa(CooperationPolicy),
    Closure,
}

impl RegionSelector {
    fn subregions(&self, params: &SystemParams) -> Vec<Subregion> {
        match self {
            RegionSelector::FixedPa(policy) => vec![
                r1_pa(params, policy.pa, SubregionId::R1Pa),
                r2_pa(params, policy.pa, SubregionId::R2Pa),
            ],
            RegionSelector::Closure => closure_subregions(params),
        }
    }

    pub fn contains(&self, params: &SystemParams, point: &RatePoint) -> MembershipVerdict {
        union_verdict(&self.subregions(params), point)
    }

    /// Largest lambda1 reachable with lambda2 = 0.
    pub fn lambda1_extent(&self, params: &SystemParams) -> f64 {
        self.subregions(params)
            .iter()
            .filter_map(Subregion::lambda1_intercept)
            .fold(0.0, f64::max)
    }

    fn pa_for(&self, params: &SystemParams, region: SubregionId, lambda1: f64) -> Option<f64> {
        match self {
            RegionSelector::FixedPa(policy) => Some(policy.pa),
            RegionSelector::Closure => subregion_pa(params, region, lambda1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub point: RatePoint,
    /// Subregion whose boundary the point lies on.
    pub segment: SubregionId,
    /// Acceptance probability that attains this boundary point.
    pub pa_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    /// Sorted by lambda1 ascending.
    pub points: Vec<BoundaryPoint>,
}

pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

/// Boundary of the selected region at a single lambda1.
pub fn boundary_point(
    params: &SystemParams,
    selector: RegionSelector,
    lambda1: f64,
) -> BoundaryPoint {
    let regions = selector.subregions(params);
    let inside = |l2: f64| {
        let p = RatePoint::new(lambda1, l2);
        regions.iter().any(|r| r.evaluate(&p).satisfied)
    };
    let lambda2 = if !inside(0.0) {
        0.0
    } else {
        // Every region has lambda2 < q2 p23 <= 1 or tighter.
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while hi - lo > BOUNDARY_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            if inside(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    // On the boundary every subregion is at best marginally satisfied; the
    // one closest to satisfied is the one the point lies on.
    let verdict = union_verdict(&regions, &RatePoint::new(lambda1, lambda2));
    let segment = verdict
        .witnesses
        .iter()
        .max_by(|a, b| a.margin.total_cmp(&b.margin))
        .map(|w| w.region)
        .expect("every selector has at least one subregion");
    BoundaryPoint {
        point: RatePoint::new(lambda1, lambda2),
        segment,
        pa_star: selector.pa_for(params, segment, lambda1),
    }
}

/// Samples the region boundary at `resolution` evenly spaced lambda1 values
/// spanning `[0, lambda1_extent]`.
pub fn boundary_trace(
    params: &SystemParams,
    selector: RegionSelector,
    resolution: usize,
) -> BoundaryTrace {
    let resolution = resolution.max(2);
    let extent = selector.lambda1_extent(params);
    let points = (0..resolution)
        .map(|i| {
            let lambda1 = if i + 1 == resolution {
                extent
            } else {
                extent * i as f64 / (resolution - 1) as f64
            };
            boundary_point(params, selector, lambda1)
        })
        .collect();
    BoundaryTrace { points }
}

/// Largest violation of the binding inequality of `segment` at `point`,
/// used to check that traced points lie on their segment.
pub fn segment_residual(
    params: &SystemParams,
    selector: RegionSelector,
    segment: SubregionId,
    point: &RatePoint,
) -> Option<f64> {
    let regions = selector.subregions(params);
    let region = regions.iter().find(|r| r.id == segment)?;
    region
        .ineqs
        .iter()
        .filter(|q| q.strict)
        .map(|q| {
            let norm = q.a1.hypot(q.a2);
            if norm > 0.0 {
                q.residual(point).abs() / norm
            } else {
                f64::INFINITY
            }
        })
        .min_by(f64::total_cmp)
}
