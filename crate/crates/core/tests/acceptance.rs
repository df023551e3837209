//! Acceptance criteria AC-1 .. AC-8, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so every line is printed regardless of
//! outcome; the process exits non-zero if any criterion fails.

use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use relaycoop::analytic::{
    boundary_point, closure_contains, optimal_pa, region_fixed_pa_contains, RegionSelector,
};
use relaycoop::harness::{classify_stability, sweep, GridAxis, Stability, SweepSpec};
use relaycoop::model::{CooperationPolicy, RatePoint, SystemParams};
use relaycoop::sim::{measure_saturated_service_rate, run, SimConfig, SimMode};

const Q1: f64 = 0.2;
const Q2: f64 = 0.3;
const P13: f64 = 0.5;
const P12: f64 = 0.9;
const P23: f64 = 0.8;

fn reference() -> SystemParams {
    SystemParams::new(P13, P12, P23, Q1, Q2)
}

// Closed forms for the reference parameters, written out independently of
// the library.
fn threshold_pa0() -> f64 {
    Q1 * (1.0 - Q2) * P13
}

fn onset_pa1() -> f64 {
    Q1 * (1.0 - Q2) * (P13 + (1.0 - P13) * P12)
}

fn closure_intercept() -> f64 {
    (1.0 - Q1) * P23 * Q1 * (P13 + (1.0 - P13) * P12) / (Q1 * P12 * (1.0 - P13) + (1.0 - Q1) * P23)
}

fn expected_pa(lambda1: f64) -> f64 {
    if lambda1 <= threshold_pa0() {
        0.0
    } else if lambda1 < onset_pa1() {
        (lambda1 - threshold_pa0()) / (onset_pa1() - threshold_pa0())
    } else {
        1.0
    }
}

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn bisect(mut lo: f64, mut hi: f64, mut below: impl FnMut(f64) -> bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn ac1() -> Outcome {
    let params = reference();
    let pa0_edge = bisect(0.0, 0.2, |l| {
        optimal_pa(&params, l).is_ok_and(|pa| pa <= 1e-12)
    });
    let pa1_edge = bisect(0.0, 0.2, |l| {
        optimal_pa(&params, l).is_ok_and(|pa| pa < 1.0 - 1e-12)
    });
    let intercept = bisect(0.0, 1.0, |l| {
        closure_contains(&RatePoint::new(l, 0.0), &params).inside
    });
    let extent = RegionSelector::Closure.lambda1_extent(&params);

    let mut worst_formula = 0.0f64;
    for i in 0..=100 {
        let l = threshold_pa0() + (onset_pa1() - threshold_pa0()) * i as f64 / 100.0;
        let pa = optimal_pa(&params, l).map_or(f64::NAN, |p| p);
        let err = (pa - (l - 0.07) / 0.063).abs();
        worst_formula = worst_formula.max(if err.is_nan() { f64::INFINITY } else { err });
    }

    let pass = (pa0_edge - 0.07).abs() < 1e-6
        && (pa0_edge - threshold_pa0()).abs() < 1e-6
        && (pa1_edge - 0.133).abs() < 1e-6
        && (pa1_edge - onset_pa1()).abs() < 1e-6
        && (intercept - closure_intercept()).abs() < 1e-6
        && (extent - closure_intercept()).abs() < 1e-6
        && (intercept - 0.1666).abs() < 5e-4
        && worst_formula < 1e-6;
    Outcome {
        pass,
        detail: format!(
            "pa0 threshold={pa0_edge:.9} onset={pa1_edge:.9} intercept={intercept:.9} \
             (oracle {:.9}, extent {extent:.9}) max|pa*-formula|={worst_formula:.2e}",
            closure_intercept()
        ),
    }
}

fn ac2() -> Outcome {
    let params = reference();
    let top = 0.1665;
    let mut worst = 0.0f64;
    let mut regimes = [0usize; 3];
    for i in 0..100 {
        let l = top * (i as f64 + 0.5) / 100.0;
        let expected = expected_pa(l);
        let traced = boundary_point(&params, RegionSelector::Closure, l).pa_star;
        let err = traced.map_or(f64::INFINITY, |p| (p - expected).abs());
        worst = worst.max(err);
        if l <= threshold_pa0() {
            regimes[0] += 1;
        } else if l < onset_pa1() {
            regimes[1] += 1;
            let direct = optimal_pa(&params, l).map_or(f64::INFINITY, |p| (p - expected).abs());
            worst = worst.max(direct);
        } else {
            regimes[2] += 1;
        }
    }
    Outcome {
        pass: worst < 1e-6,
        detail: format!(
            "100 samples (pa*=0: {}, interior: {}, pa*=1: {}), max error {worst:.2e}",
            regimes[0], regimes[1], regimes[2]
        ),
    }
}

fn ac3() -> Outcome {
    let start = Instant::now();
    let axis = GridAxis::new(0.0, 0.2, 20);
    let spec = SweepSpec::new(reference(), RegionSelector::Closure, axis, axis);
    let report = sweep(&spec);
    let s = &report.summary;
    let detail = format!(
        "simulated={} excluded={} indeterminate={} disagreements={} agreement={:.4} ({:.0}s)",
        report.rows.len(),
        s.excluded.len(),
        s.indeterminate.len(),
        s.disagreements.len(),
        s.agreement_rate,
        start.elapsed().as_secs_f64()
    );
    let detail = if s.disagreements.is_empty() {
        detail
    } else {
        let pts: Vec<String> = s
            .disagreements
            .iter()
            .map(|p| format!("({:.4},{:.4})", p.lambda1, p.lambda2))
            .collect();
        format!("{detail} at {}", pts.join(" "))
    };
    Outcome {
        pass: s.disagreements.is_empty() && s.agreement_rate == 1.0,
        detail,
    }
}

fn ac4() -> Outcome {
    let params = reference();
    let point = RatePoint::new(0.10, 0.14);
    let in_pa0 = region_fixed_pa_contains(&point, &params, &CooperationPolicy::NONE).inside;
    let in_pa1 = region_fixed_pa_contains(&point, &params, &CooperationPolicy::FULL).inside;
    let in_closure = closure_contains(&point, &params).inside;
    let pa_star = optimal_pa(&params, 0.10).unwrap_or(f64::NAN);

    let classify = |pa: f64| {
        let config =
            SimConfig::new(params, CooperationPolicy::new(pa), point).with_slots(1_000_000);
        classify_stability(&config, 10, 1e-4).tag
    };
    let sim_star = classify(pa_star);
    let sim_pa0 = classify(0.0);
    let sim_pa1 = classify(1.0);

    let pass = !in_pa0
        && !in_pa1
        && in_closure
        && (pa_star - 0.476).abs() < 5e-4
        && sim_star == Stability::Stable
        && sim_pa0 == Stability::Unstable
        && sim_pa1 == Stability::Unstable;
    Outcome {
        pass,
        detail: format!(
            "inside pa=0:{in_pa0} pa=1:{in_pa1} closure:{in_closure}; pa*={pa_star:.6}; \
             sim pa*:{sim_star} pa=0:{sim_pa0} pa=1:{sim_pa1}"
        ),
    }
}

fn ac5() -> Outcome {
    let params = reference();
    let (l1, l2) = (0.05, 0.05);
    let branch = (1.0 - P13) * P12 / (P13 + (1.0 - P13) * P12);
    let oracle = (l2 + l1 * branch) / (Q2 * (1.0 - Q1) * P23);
    let config = SimConfig::new(params, CooperationPolicy::FULL, RatePoint::new(l1, l2))
        .with_mode(SimMode::DominantSourceDummy)
        .with_slots(1_000_000);
    let busy = run(&config).q2_busy_fraction();
    Outcome {
        pass: (oracle - 0.383772).abs() < 1e-6 && (busy - oracle).abs() <= 0.01,
        detail: format!("empirical Pr(Q2>0)={busy:.6} oracle={oracle:.6}"),
    }
}

fn ac6() -> Outcome {
    let params = reference();
    let idle = measure_saturated_service_rate(&params, &CooperationPolicy::NONE, 0.0, 1_000_000, 1);
    let busy = measure_saturated_service_rate(&params, &CooperationPolicy::NONE, 1.0, 1_000_000, 1);
    let (idle_oracle, busy_oracle) = (Q1 * P13, Q1 * (1.0 - Q2) * P13);
    Outcome {
        pass: (idle - idle_oracle).abs() <= 0.005 && (busy - busy_oracle).abs() <= 0.005,
        detail: format!(
            "mu1 relay idle={idle:.6} (oracle {idle_oracle:.3}), relay busy={busy:.6} (oracle {busy_oracle:.3})"
        ),
    }
}

/// Fixed-pa membership written directly from the multiplied-out region
/// inequalities.
fn oracle_fixed_pa(params: &SystemParams, pa: f64, l1: f64, l2: f64) -> bool {
    let SystemParams { channel, access } = *params;
    let (p13, p12, p23, q1, q2) = (channel.p13, channel.p12, channel.p23, access.q1, access.q2);
    let a = (1.0 - p13) * p12 * pa;
    let s = p13 + a;
    let c = (1.0 - q1) * p23;
    let r1 = (c + q1 * a) * l1 + q1 * s * l2 < q1 * s * c && a * l1 + s * l2 < q2 * c * s;
    let r2 = ((1.0 - q2) * a + q2 * p23) * l1 + (1.0 - q2) * s * l2 < q2 * p23 * (1.0 - q2) * s
        && l1 < q1 * (1.0 - q2) * s;
    r1 || r2
}

fn ac7() -> Outcome {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
    let (mut containment, mut oracle_mismatch, mut compared) = (0usize, 0usize, 0usize);
    for _ in 0..10_000 {
        let mut p = || rng.gen_range(0.01..0.99);
        let params = SystemParams::new(p(), p(), p(), p(), p());
        let pa: f64 = rng.gen();
        let point = RatePoint::new(
            rng.gen_range(0.0..params.access.q1),
            rng.gen_range(0.0..params.access.q2),
        );
        let closure = closure_contains(&point, &params);
        if region_fixed_pa_contains(&point, &params, &CooperationPolicy::new(pa)).inside
            && !closure.inside
        {
            containment += 1;
        }
        if closure.margin.abs() > 1e-3 {
            compared += 1;
            let brute = (0..=1000)
                .any(|k| oracle_fixed_pa(&params, k as f64 / 1000.0, point.lambda1, point.lambda2));
            if brute != closure.inside {
                oracle_mismatch += 1;
            }
        }
    }
    Outcome {
        pass: containment == 0 && oracle_mismatch == 0,
        detail: format!(
            "10000 triples: containment violations={containment}, oracle mismatches={oracle_mismatch} of {compared}"
        ),
    }
}

fn ac8() -> Outcome {
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => {
            return Outcome {
                pass: false,
                detail: format!("tempdir: {e}"),
            }
        }
    };
    let run_once = |name: &str| -> Result<Vec<u8>, String> {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_relaycoop"))
            .args([
                "validate",
                "--p13",
                "0.5",
                "--p12",
                "0.9",
                "--p23",
                "0.8",
                "--q1",
                "0.2",
                "--q2",
                "0.3",
                "--closure",
                "--lambda1-count",
                "5",
                "--lambda2-count",
                "5",
                "--slots",
                "50000",
                "--seeds",
                "1,2,3",
                "--output",
            ])
            .arg(&out)
            .env_remove("RELAYCOOP_OUTPUT_DIR")
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!(
                "exit {:?}: {}",
                status.status.code(),
                String::from_utf8_lossy(&status.stderr)
            ));
        }
        std::fs::read(&out).map_err(|e| e.to_string())
    };
    match (run_once("a.csv"), run_once("b.csv")) {
        (Ok(a), Ok(b)) => Outcome {
            pass: a == b && !a.is_empty(),
            detail: format!(
                "two VALIDATE runs, {} and {} bytes, identical={}",
                a.len(),
                b.len(),
                a == b
            ),
        },
        (Err(e), _) | (_, Err(e)) => Outcome {
            pass: false,
            detail: e,
        },
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("AC-1", ac1),
        ("AC-2", ac2),
        ("AC-3", ac3),
        ("AC-4", ac4),
        ("AC-5", ac5),
        ("AC-6", ac6),
        ("AC-7", ac7),
        ("AC-8", ac8),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "{name} {} [{:.1}s] {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            outcome.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
