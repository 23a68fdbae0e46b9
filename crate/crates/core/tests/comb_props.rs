use std::f64::consts::PI;

use combslope::comb::{
    assign_widths, build_comb, plan_backward, plan_forward, surgery, witness_holds, witness_rect, CombDomain,
    CombError, SequencePlan, SurgeryKind, SurgeryVariant,
};
use combslope::Point;
use proptest::prelude::*;

fn angles() -> impl Strategy<Value = (f64, f64)> {
    (-0.45..0.45f64, 0.02..0.4f64).prop_map(|(t1, gap)| (t1 * PI, (t1 + gap).min(0.48) * PI))
}

/// Increasing widths of at least four times the largest tooth height.
fn widths(plan: &SequencePlan, growth: &[f64]) -> Vec<f64> {
    let scale = plan.r.iter().chain(&plan.rho).fold(0.0f64, |m, v| m.max(*v));
    let mut w = 4.0 * scale;
    (0..plan.block_count())
        .map(|i| {
            w *= 1.0 + growth[i % growth.len()];
            w
        })
        .collect()
}

fn forward_plan() -> impl Strategy<Value = SequencePlan> {
    (angles(), 0.5..20.0f64, 1usize..6, prop::collection::vec(0.05..2.0f64, 1..8)).prop_filter_map(
        "plan",
        |((t1, t2), r1, n, growth)| {
            let plan = plan_forward(t1, t2, r1, n).ok()?;
            let w = widths(&plan, &growth);
            assign_widths(&plan, &w).ok()
        },
    )
}

fn backward_plan() -> impl Strategy<Value = SequencePlan> {
    (angles(), 0.5..20.0f64, 1usize..6, prop::collection::vec(0.05..2.0f64, 1..8)).prop_filter_map(
        "plan",
        |((t1, t2), r1, n, growth)| {
            let plan = plan_backward(t1, t2, r1, n).ok()?;
            let w = widths(&plan, &growth);
            assign_widths(&plan, &w).ok()
        },
    )
}

fn strictly(v: &[f64], increasing: bool) -> bool {
    v.windows(2).all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] })
}

/// Sample points: random, on tooth heights, and just off them.
fn probes(plan: &SequencePlan, seeds: &[(f64, f64)]) -> Vec<Point> {
    let span = plan.u.last().copied().unwrap_or(1.0) * 1.2;
    let heights: Vec<f64> = plan.r.iter().copied().chain(plan.rho.iter().map(|v| -v)).collect();
    let mut out = Vec::new();
    for (i, &(a, b)) in seeds.iter().enumerate() {
        let x = (a - 0.5) * 2.0 * span;
        let h = heights[i % heights.len()];
        out.push(Point::new(x, (b - 0.5) * 4.0 * h.abs()));
        out.push(Point::new(x, h));
        out.push(Point::new(x, h * (1.0 + 1e-9)));
    }
    out
}

fn convex_right(contains: impl Fn(Point) -> bool, points: &[Point], span: f64) -> Result<(), Point> {
    for &p in points {
        if contains(p) {
            for t in [1e-9, 1e-3, 0.1, 1.0, 10.0, span] {
                if !contains(p + t) {
                    return Err(p);
                }
            }
        }
    }
    Ok(())
}

fn variants(domain: &CombDomain) -> Vec<SurgeryVariant> {
    let uppers = domain.teeth.iter().filter(|t| t.index % 2 == 1).count();
    (1..=uppers)
        .flat_map(|k| [SurgeryKind::Omega1(k), SurgeryKind::Omega2(k)])
        .filter_map(|kind| surgery(domain, kind).ok())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn forward_recurrences_hold(plan in forward_plan()) {
        let a1 = plan.targets.high;
        let a2 = plan.targets.low;
        for n in 1..=plan.pairs() {
            let (r, rho) = (plan.r[n - 1], plan.rho[n - 1]);
            prop_assert!((r * a1 - (1.0 - a1) * rho).abs() < 1e-12 * r);
            if n >= 2 {
                prop_assert!((r * a2 - (1.0 - a2) * plan.rho[n - 2]).abs() < 1e-12 * r);
            }
        }
        prop_assert!(strictly(&plan.r, true) && strictly(&plan.rho, true));
    }

    #[test]
    fn backward_heights_decrease(plan in backward_plan()) {
        prop_assert!(plan.recurrence_residual() < 1e-12);
        prop_assert!(strictly(&plan.r, false) && strictly(&plan.rho, false));
    }

    #[test]
    fn witnesses_sit_inside_the_comb(plan in prop_oneof![forward_plan(), backward_plan()]) {
        let domain = build_comb(&plan).unwrap();
        let mut found = 0;
        for n in 1..=plan.block_count() {
            match witness_rect(&plan, n) {
                Ok(rect) => {
                    prop_assert!(witness_holds(&domain, &rect));
                    prop_assert!(rect.contains(Point::new(plan.midpoint(n), 0.0)));
                    found += 1;
                }
                Err(CombError::NoWitness(_)) => {}
                Err(e) => prop_assert!(false, "block {n}: {e}"),
            }
        }
        prop_assert!(found >= 1);
    }

    #[test]
    fn combs_and_variants_are_convex_to_the_right(
        plan in prop_oneof![forward_plan(), backward_plan()],
        seeds in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 40),
    ) {
        let domain = build_comb(&plan).unwrap();
        let points = probes(&plan, &seeds);
        let span = plan.u.last().copied().unwrap() * 3.0;
        prop_assert!(convex_right(|p| domain.contains(p), &points, span).is_ok());
        for v in variants(&domain) {
            let r = convex_right(|p| v.contains(p), &points, span);
            prop_assert!(r.is_ok(), "{:?} fails at {:?}", v.kind, r);
        }
    }

    /// `Omega1 ⊂ Omega ⊂ Omega2`.
    #[test]
    fn surgery_nests(
        plan in prop_oneof![forward_plan(), backward_plan()],
        seeds in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 40),
    ) {
        let domain = build_comb(&plan).unwrap();
        let points = probes(&plan, &seeds);
        for v in variants(&domain) {
            for &p in &points {
                match v.kind {
                    SurgeryKind::Omega1(_) => prop_assert!(!v.contains(p) || domain.contains(p)),
                    SurgeryKind::Omega2(_) => prop_assert!(!domain.contains(p) || v.contains(p)),
                }
            }
        }
    }
}
