use proptest::prelude::*;
use relaycoop::analytic::{
    boundary_point, boundary_trace, closure_case, closure_contains, optimal_pa,
    region_fixed_pa_contains, segment_residual, R2Case, RegionSelector, SubregionId,
};
use relaycoop::model::{CooperationPolicy, RatePoint, SystemParams};

fn params_strategy() -> impl Strategy<Value = SystemParams> {
    (
        0.05..0.95f64,
        0.05..0.95f64,
        0.05..0.95f64,
        0.05..0.95f64,
        0.05..0.95f64,
    )
        .prop_map(|(p13, p12, p23, q1, q2)| SystemParams::new(p13, p12, p23, q1, q2))
}

fn is_r2_segment(id: SubregionId) -> bool {
    matches!(id, SubregionId::R21 | SubregionId::R221 | SubregionId::R222)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn supremum_attained(params in params_strategy(), frac in 0.0..1.0f64) {
        let extent = RegionSelector::Closure.lambda1_extent(&params);
        let lambda1 = frac * extent;
        let closure = boundary_point(&params, RegionSelector::Closure, lambda1).point.lambda2;
        for pa in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let fixed = RegionSelector::FixedPa(CooperationPolicy::new(pa));
            let b = boundary_point(&params, fixed, lambda1).point.lambda2;
            prop_assert!(closure >= b - 1e-9, "pa={pa}: closure {closure} < fixed {b}");
        }
    }

    #[test]
    fn boundary_pa_attains_boundary(params in params_strategy(), frac in 0.01..0.99f64) {
        let extent = RegionSelector::Closure.lambda1_extent(&params);
        let lambda1 = frac * extent;
        let b = boundary_point(&params, RegionSelector::Closure, lambda1);
        prop_assume!(b.point.lambda2 > 1e-5);
        let pa = b.pa_star.expect("closure segments carry a pa");
        let below = RatePoint::new(lambda1, b.point.lambda2 - 1e-6);
        let attained = [pa, (pa + 1e-9).min(1.0)]
            .iter()
            .any(|&p| region_fixed_pa_contains(&below, &params, &CooperationPolicy::new(p)).inside);
        prop_assert!(attained, "{b:?}");
        if is_r2_segment(b.segment) {
            let opt = optimal_pa(&params, lambda1).unwrap();
            prop_assert!((opt - pa).abs() < 1e-9, "optimal {opt} vs segment {pa}");
        }
    }

    #[test]
    fn optimal_pa_monotone(params in params_strategy(), a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let scale = params.access.q1;
        if let (Ok(x), Ok(y)) = (optimal_pa(&params, lo * scale), optimal_pa(&params, hi * scale)) {
            prop_assert!(x <= y + 1e-12);
        }
    }

    #[test]
    fn optimal_pa_nonincreasing_in_q1(
        params in params_strategy(),
        q2_frac in 0.01..0.99f64,
        dq in 0.0..0.2f64,
        frac in 0.0..1.0f64,
    ) {
        // The split case depends on q2 only.
        let mut params = params;
        let ch = params.channel;
        params.access.q2 = q2_frac * ch.p13 / (ch.p13 + ch.p23);
        let mut bigger = params;
        bigger.access.q1 = (params.access.q1 + dq).min(0.99);
        prop_assert_eq!(closure_case(&params).unwrap().r2_case, R2Case::Split);
        let lambda1 = frac * params.access.q1 * (1.0 - params.access.q2);
        if let (Ok(x), Ok(y)) = (optimal_pa(&params, lambda1), optimal_pa(&bigger, lambda1)) {
            prop_assert!(y <= x + 1e-12, "q1 {} -> {}: {x} -> {y}", params.access.q1, bigger.access.q1);
        }
    }

    #[test]
    fn partial_cooperation_dominates(params in params_strategy(), l1 in 0.0..1.0f64, l2 in 0.0..1.0f64) {
        let point = RatePoint::new(l1 * params.access.q1, l2 * params.access.q2);
        let closure = closure_contains(&point, &params).inside;
        for policy in [CooperationPolicy::NONE, CooperationPolicy::FULL] {
            if region_fixed_pa_contains(&point, &params, &policy).inside {
                prop_assert!(closure);
            }
        }
    }

    #[test]
    fn membership_is_pure(params in params_strategy(), l1 in 0.0..0.5f64, l2 in 0.0..0.5f64, pa in 0.0..1.0f64) {
        let point = RatePoint::new(l1, l2);
        prop_assert_eq!(closure_contains(&point, &params), closure_contains(&point, &params));
        let policy = CooperationPolicy::new(pa);
        prop_assert_eq!(
            region_fixed_pa_contains(&point, &params, &policy),
            region_fixed_pa_contains(&point, &params, &policy)
        );
    }

    #[test]
    fn margin_sign_matches_membership(params in params_strategy(), l1 in 0.0..0.5f64, l2 in 0.0..0.5f64) {
        let v = closure_contains(&RatePoint::new(l1, l2), &params);
        if v.margin.abs() > 1e-12 {
            prop_assert_eq!(v.inside, v.margin > 0.0);
        }
        prop_assert_eq!(v.inside, v.witnesses.iter().any(|w| w.satisfied));
    }

    #[test]
    fn trace_points_lie_on_their_segment(params in params_strategy(), pa in prop::option::of(0.0..1.0f64)) {
        let selector = pa.map_or(RegionSelector::Closure, |p| RegionSelector::FixedPa(CooperationPolicy::new(p)));
        let trace = boundary_trace(&params, selector, 50);
        prop_assert_eq!(trace.points.len(), 50);
        for w in trace.points.windows(2) {
            prop_assert!(w[0].point.lambda1 <= w[1].point.lambda1);
        }
        for b in trace.points.iter().filter(|b| b.point.lambda2 > 0.0) {
            let r = segment_residual(&params, selector, b.segment, &b.point).unwrap();
            prop_assert!(r <= 1e-9, "{b:?} residual {r}");
        }
    }
}

#[test]
fn reference_segments() {
    let params = SystemParams::new(0.5, 0.9, 0.8, 0.2, 0.3);
    let at = |l1| boundary_point(&params, RegionSelector::Closure, l1);
    assert_eq!(at(0.03).segment, SubregionId::R221);
    assert_eq!(at(0.10).segment, SubregionId::R222);
    assert_eq!(at(0.15).segment, SubregionId::R11);
    assert!(at(0.07).pa_star.unwrap().abs() < 1e-12);
    // Triple point where the two full-acceptance constraints meet R222.
    let c = at(0.133).point;
    assert!((c.lambda2 - 0.129).abs() < 1e-6, "{c:?}");
}
