//! Empirical stability classification and plane sweeps.
//!
//! A queue is judged by the growth of its length over time: after a burn-in,
//! the run is cut into windows, and an ordinary least-squares line is fitted
//! to the per-window mean queue lengths. A positive slope above the drift
//! threshold means the queue diverges.

use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::analytic::{closure_contains, closure_operating_pa, RegionSelector};
use crate::model::{CooperationPolicy, RatePoint, SystemParams};
use crate::sim::{run, SimConfig, SimMode};

pub const DEFAULT_WINDOW_COUNT: usize = 10;
pub const DEFAULT_DRIFT_THRESHOLD: f64 = 1e-4;
pub const DEFAULT_EXCLUSION_BAND: f64 = 0.01;
pub const DEFAULT_SAMPLE_STRIDE: u64 = 100;
pub const BURN_IN_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stability {
    Stable,
    Unstable,
    Indeterminate,
}

impl Stability {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stability::Stable => "STABLE",
            Stability::Unstable => "UNSTABLE",
            Stability::Indeterminate => "INDETERMINATE",
        }
    }
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityVerdict {
    pub tag: Stability,
    /// Fitted growth of the source queue, packets/slot.
    pub drift_q1: f64,
    /// Fitted growth of the relay queue, packets/slot.
    pub drift_q2: f64,
    /// Drift threshold the slopes were compared against.
    pub margin_used: f64,
}

/// Least-squares slope of `ys` against their indices.
fn ols_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    if ys.len() < 2 {
        return 0.0;
    }
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Simulates `config` and classifies both queues by their fitted drift.
pub fn classify_stability(
    config: &SimConfig,
    window_count: usize,
    drift_threshold: f64,
) -> StabilityVerdict {
    let window_count = window_count.max(1);
    let burn_in = (config.n_slots as f64 * BURN_IN_FRACTION).floor() as u64;
    let window_len = ((config.n_slots - burn_in) / window_count as u64).max(1);
    let mut cfg = *config;
    cfg.sample_stride = cfg.sample_stride.clamp(1, window_len);
    let stats = run(&cfg);

    let mut sums = vec![(0.0f64, 0.0f64, 0u64); window_count];
    for s in stats.samples.iter().filter(|s| s.slot >= burn_in) {
        let w = ((s.slot - burn_in) / window_len) as usize;
        if let Some(acc) = sums.get_mut(w) {
            acc.0 += s.q1_len as f64;
            acc.1 += s.q2_len as f64;
            acc.2 += 1;
        }
    }
    let verdict = |tag, d1, d2| StabilityVerdict {
        tag,
        drift_q1: d1,
        drift_q2: d2,
        margin_used: drift_threshold,
    };
    if sums.iter().any(|w| w.2 == 0) {
        return verdict(Stability::Indeterminate, 0.0, 0.0);
    }
    let q1_means: Vec<f64> = sums.iter().map(|w| w.0 / w.2 as f64).collect();
    let q2_means: Vec<f64> = sums.iter().map(|w| w.1 / w.2 as f64).collect();
    let drift_q1 = ols_slope(&q1_means) / window_len as f64;
    let drift_q2 = ols_slope(&q2_means) / window_len as f64;

    let final_bound = 10.0 * (config.n_slots as f64).sqrt();
    let tag = if drift_q1 > drift_threshold || drift_q2 > drift_threshold {
        Stability::Unstable
    } else if drift_q1 < drift_threshold / 2.0
        && drift_q2 < drift_threshold / 2.0
        && stats.final_q1_len as f64 <= final_bound
        && stats.final_q2_len as f64 <= final_bound
    {
        Stability::Stable
    } else {
        Stability::Indeterminate
    };
    verdict(tag, drift_q1, drift_q2)
}

/// Majority vote over one classification per seed. Without a strict
/// majority of stable or unstable runs the result is indeterminate; drifts
/// are averaged over seeds.
pub fn majority_verdict(
    base: &SimConfig,
    seeds: &[u64],
    window_count: usize,
    drift_threshold: f64,
) -> StabilityVerdict {
    let verdicts: Vec<StabilityVerdict> = seeds
        .iter()
        .map(|&seed| classify_stability(&base.with_seed(seed), window_count, drift_threshold))
        .collect();
    let n = verdicts.len().max(1);
    let count = |t| verdicts.iter().filter(|v| v.tag == t).count();
    let tag = if 2 * count(Stability::Stable) > n {
        Stability::Stable
    } else if 2 * count(Stability::Unstable) > n {
        Stability::Unstable
    } else {
        Stability::Indeterminate
    };
    let mean = |f: fn(&StabilityVerdict) -> f64| verdicts.iter().map(f).sum::<f64>() / n as f64;
    StabilityVerdict {
        tag,
        drift_q1: mean(|v| v.drift_q1),
        drift_q2: mean(|v| v.drift_q2),
        margin_used: drift_threshold,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridAxis {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count }
    }

    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.min],
            n => (0..n)
                .map(|i| self.min + (self.max - self.min) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

/// Rate points of a grid, lambda1-major.
pub fn grid_points(lambda1: &GridAxis, lambda2: &GridAxis) -> Vec<RatePoint> {
    let l2 = lambda2.values();
    lambda1
        .values()
        .into_iter()
        .flat_map(|a| l2.iter().map(move |&b| RatePoint::new(a, b)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub params: SystemParams,
    pub selector: RegionSelector,
    pub lambda1: GridAxis,
    pub lambda2: GridAxis,
    pub n_slots: u64,
    pub seeds: Vec<u64>,
    /// Points whose analytic margin is smaller than this in magnitude are
    /// not simulated.
    pub exclusion_band: f64,
    pub window_count: usize,
    pub drift_threshold: f64,
    pub sample_stride: u64,
}

impl SweepSpec {
    pub fn new(
        params: SystemParams,
        selector: RegionSelector,
        lambda1: GridAxis,
        lambda2: GridAxis,
    ) -> Self {
        Self {
            params,
            selector,
            lambda1,
            lambda2,
            n_slots: 1_000_000,
            seeds: vec![1, 2, 3],
            exclusion_band: DEFAULT_EXCLUSION_BAND,
            window_count: DEFAULT_WINDOW_COUNT,
            drift_threshold: DEFAULT_DRIFT_THRESHOLD,
            sample_stride: DEFAULT_SAMPLE_STRIDE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionRow {
    pub point: RatePoint,
    pub analytic_inside: bool,
    pub analytic_margin: f64,
    pub pa_used: f64,
    pub sim_verdict: StabilityVerdict,
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegionSummary {
    /// Determinate rows agreeing with the analytic verdict over all
    /// determinate rows; 1 when there are none.
    pub agreement_rate: f64,
    pub disagreements: Vec<RatePoint>,
    pub indeterminate: Vec<RatePoint>,
    /// Grid points skipped for lying within the exclusion band.
    pub excluded: Vec<RatePoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionReport {
    pub rows: Vec<RegionRow>,
    pub summary: RegionSummary,
}

impl RegionReport {
    fn from_rows(rows: Vec<RegionRow>, excluded: Vec<RatePoint>) -> Self {
        let indeterminate: Vec<RatePoint> = rows
            .iter()
            .filter(|r| r.sim_verdict.tag == Stability::Indeterminate)
            .map(|r| r.point)
            .collect();
        let disagreements: Vec<RatePoint> = rows
            .iter()
            .filter(|r| r.sim_verdict.tag != Stability::Indeterminate && !r.agree)
            .map(|r| r.point)
            .collect();
        let determinate = rows.len() - indeterminate.len();
        let agreement_rate = if determinate == 0 {
            1.0
        } else {
            (determinate - disagreements.len()) as f64 / determinate as f64
        };
        Self {
            rows,
            summary: RegionSummary {
                agreement_rate,
                disagreements,
                indeterminate,
                excluded,
            },
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut w = csv_writer(out);
        w.write_record([
            "lambda1",
            "lambda2",
            "analytic_inside",
            "analytic_margin",
            "pa_used",
            "verdict",
            "drift_q1",
            "drift_q2",
            "agree",
        ])?;
        for r in &self.rows {
            w.write_record([
                fixed(r.point.lambda1),
                fixed(r.point.lambda2),
                r.analytic_inside.to_string(),
                fixed(r.analytic_margin),
                fixed(r.pa_used),
                r.sim_verdict.tag.to_string(),
                fixed(r.sim_verdict.drift_q1),
                fixed(r.sim_verdict.drift_q2),
                r.agree.to_string(),
            ])?;
        }
        w.flush()
    }
}

pub(crate) fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// Fixed nine-decimal formatting used for every numeric CSV cell.
pub fn fixed(x: f64) -> String {
    format!("{x:.9}")
}

fn pa_for(selector: &RegionSelector, params: &SystemParams, point: &RatePoint) -> f64 {
    match selector {
        RegionSelector::FixedPa(policy) => policy.pa,
        RegionSelector::Closure => closure_operating_pa(params, point),
    }
}

/// Compares analytic membership with simulated stability over a grid.
/// Points are simulated in parallel; row order is the grid order.
pub fn sweep(spec: &SweepSpec) -> RegionReport {
    let mut excluded = Vec::new();
    let mut candidates = Vec::new();
    for point in grid_points(&spec.lambda1, &spec.lambda2) {
        let verdict = spec.selector.contains(&spec.params, &point);
        if verdict.margin.abs() < spec.exclusion_band {
            excluded.push(point);
        } else {
            candidates.push((point, verdict.inside, verdict.margin));
        }
    }
    let rows = candidates
        .into_par_iter()
        .map(|(point, inside, margin)| {
            let pa = pa_for(&spec.selector, &spec.params, &point);
            let base = SimConfig::new(spec.params, CooperationPolicy::new(pa), point)
                .with_mode(SimMode::Original)
                .with_slots(spec.n_slots)
                .with_stride(spec.sample_stride);
            let v = majority_verdict(&base, &spec.seeds, spec.window_count, spec.drift_threshold);
            RegionRow {
                point,
                analytic_inside: inside,
                analytic_margin: margin,
                pa_used: pa,
                sim_verdict: v,
                agree: (inside && v.tag == Stability::Stable)
                    || (!inside && v.tag == Stability::Unstable),
            }
        })
        .collect();
    RegionReport::from_rows(rows, excluded)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticRow {
    pub point: RatePoint,
    pub inside: bool,
    pub margin: f64,
    pub pa_used: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticReport {
    pub rows: Vec<AnalyticRow>,
}

impl AnalyticReport {
    pub fn inside_count(&self) -> usize {
        self.rows.iter().filter(|r| r.inside).count()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut w = csv_writer(out);
        w.write_record([
            "lambda1",
            "lambda2",
            "analytic_inside",
            "analytic_margin",
            "pa_used",
        ])?;
        for r in &self.rows {
            w.write_record([
                fixed(r.point.lambda1),
                fixed(r.point.lambda2),
                r.inside.to_string(),
                fixed(r.margin),
                fixed(r.pa_used),
            ])?;
        }
        w.flush()
    }
}

/// Analytic membership of no, full and partial (optimised) cooperation over
/// the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeComparison {
    pub no_cooperation: AnalyticReport,
    pub full_cooperation: AnalyticReport,
    pub partial_cooperation: AnalyticReport,
    /// Points inside a fixed scheme but outside the closure.
    pub containment_violations: Vec<RatePoint>,
}

impl SchemeComparison {
    pub fn containment_holds(&self) -> bool {
        self.containment_violations.is_empty()
    }
}

pub fn compare_three_schemes(params: &SystemParams, points: &[RatePoint]) -> SchemeComparison {
    let fixed_report = |policy: CooperationPolicy| AnalyticReport {
        rows: points
            .iter()
            .map(|p| {
                let v = RegionSelector::FixedPa(policy).contains(params, p);
                AnalyticRow {
                    point: *p,
                    inside: v.inside,
                    margin: v.margin,
                    pa_used: policy.pa,
                }
            })
            .collect(),
    };
    let no_cooperation = fixed_report(CooperationPolicy::NONE);
    let full_cooperation = fixed_report(CooperationPolicy::FULL);
    let partial_cooperation = AnalyticReport {
        rows: points
            .iter()
            .map(|p| {
                let v = closure_contains(p, params);
                AnalyticRow {
                    point: *p,
                    inside: v.inside,
                    margin: v.margin,
                    pa_used: closure_operating_pa(params, p),
                }
            })
            .collect(),
    };
    let containment_violations = partial_cooperation
        .rows
        .iter()
        .zip(&no_cooperation.rows)
        .zip(&full_cooperation.rows)
        .filter(|((c, n), f)| !c.inside && (n.inside || f.inside))
        .map(|((c, _), _)| c.point)
        .collect();
    SchemeComparison {
        no_cooperation,
        full_cooperation,
        partial_cooperation,
        containment_violations,
    }
}
