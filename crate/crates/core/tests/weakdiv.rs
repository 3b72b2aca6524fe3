//! Divergence defects, the chain-rule verdict and the constancy criterion.

mod common;

use proptest::prelude::*;
use streamdec_core::field::{self, GridSpec, ScalarField};
use streamdec_core::gallery::{self, NelsonProfile};
use streamdec_core::weakdiv::{self, Beta, TestFamily, TestFunction, Verdict};
use streamdec_core::{curves, Error};

fn bump_field(n: usize) -> ScalarField {
    gallery::smooth_bump(GridSpec::centered_square(n, 1.0), [0.1, -0.05], 0.8, 1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn defect_is_linear_in_rho(a in -2.0f64..2.0, b in -2.0f64..2.0, k in 1.0f64..6.0) {
        let f = bump_field(48);
        let v = field::perp_gradient(&f);
        let fam = TestFamily::lattice(&f.grid);
        let r1 = ScalarField::from_fn(f.grid, |x, y| (k * x).sin() * y);
        let r2 = f.map(|t| t * t);
        let mix = r1.zip_with(&r2, |p, q| a * p + b * q).unwrap();
        let (d1, d2, dm) = (
            weakdiv::divergence_defect(&r1, &v, &fam).unwrap(),
            weakdiv::divergence_defect(&r2, &v, &fam).unwrap(),
            weakdiv::divergence_defect(&mix, &v, &fam).unwrap(),
        );
        // raw defects are sums with cancellation, so compare on the family scale
        let scale = d1.raw.iter().chain(&d2.raw).fold(0.0f64, |m, x| m.max(x.abs())) * (a.abs() + b.abs() + 1.0);
        for i in 0..fam.len() {
            let want = a * d1.raw[i] + b * d2.raw[i];
            prop_assert!((dm.raw[i] - want).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn test_bump_sup_gradient_is_attained(cx in -1.0f64..1.0, cy in -1.0f64..1.0, r in 0.1f64..2.0) {
        let t = TestFunction { center: [cx, cy], radius: r };
        let mut best = 0.0f64;
        for k in 0..=400 {
            let p = [cx + r * k as f64 / 400.0, cy];
            let g = t.gradient(p);
            best = best.max(g[0].hypot(g[1]));
        }
        prop_assert!(best <= t.grad_sup() * (1.0 + 1e-12));
        prop_assert!(best >= t.grad_sup() * (1.0 - 1e-3));
    }

    #[test]
    fn curve_divergence_solve_inverts_jumps(masses in proptest::collection::vec(-1.0f64..1.0, 1..6), seed in 0usize..1000) {
        let f = bump_field(64);
        let t = curves::regular_levels(&f, 4).unwrap()[1];
        let c = curves::trace_essential_level(&f, t).unwrap().remove(0);
        let n = c.len();
        let total: f64 = masses.iter().sum();
        let mut nu: Vec<(usize, f64)> = masses.iter().enumerate().map(|(k, m)| ((seed + 7 * k) % n, *m)).collect();
        nu.push(((seed + 3) % n, -total));
        let rho = weakdiv::curve_divergence_solve(&c, &nu).unwrap();
        let mut want = vec![0.0; n];
        for (k, m) in &nu {
            want[*k] += m;
        }
        for (a, b) in weakdiv::curve_jumps(&rho).iter().zip(&want) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let mean: f64 = rho.iter().zip(c.segment_lengths()).map(|(r, l)| r * l).sum();
        prop_assert!(mean.abs() < 1e-12);
    }
}

#[test]
fn unbalanced_curve_problem_has_no_solution() {
    let f = bump_field(32);
    let t = curves::regular_levels(&f, 2).unwrap()[0];
    let c = curves::trace_essential_level(&f, t).unwrap().remove(0);
    assert!(matches!(weakdiv::curve_divergence_solve(&c, &[(0, 1.0)]), Err(Error::NoSteadySolution { .. })));
}

#[test]
fn functions_of_f_pass_the_chain_rule() {
    let f = bump_field(192);
    let v = field::perp_gradient(&f);
    let fam = TestFamily::lattice(&f.grid);
    let thr = weakdiv::control_threshold(&v, &fam).unwrap();
    assert!(thr >= 1e-12);
    let rho = f.map(|t| (3.0 * t).sin());
    for beta in [Beta::Square, Beta::Sin, Beta::SmoothAbs(1e-2)] {
        let r = weakdiv::chain_rule_test(&rho, &v, beta, &fam, thr).unwrap();
        assert_eq!(r.verdict, Verdict::Holds, "{beta:?}: {} vs {thr}", r.defect_beta_rho.max_normalized);
        assert!(r.premise_holds && r.witness.is_none());
    }
    // an angular density is not transported by the rotation field
    let angle = ScalarField::from_fn(f.grid, |x, y| (y - 0.05).atan2(x + 0.1).cos());
    let r = weakdiv::chain_rule_test(&angle, &v, Beta::Square, &fam, thr).unwrap();
    assert_eq!(r.verdict, Verdict::Violated);
    assert!(!r.premise_holds && r.witness.is_some());
}

#[test]
fn sector_field_violates_the_chain_rule() {
    let n = gallery::nelson(gallery::nelson_grid(256), NelsonProfile::Slope).unwrap();
    let fam = TestFamily::lattice(&n.f.grid);
    let thr = weakdiv::control_threshold(&n.v, &fam).unwrap();
    let r = weakdiv::chain_rule_test(&n.rho, &n.v, Beta::Square, &fam, thr).unwrap();
    assert!(r.premise_holds, "{} vs {thr}", r.defect_rho.max_normalized);
    assert_eq!(r.verdict, Verdict::Violated);
    let w = fam.tests[r.witness.unwrap()];
    // the witness straddles the source or the sink
    let near = [gallery::NELSON_SINK, gallery::NELSON_SOURCE].iter().any(|p| (w.center[0] - p[0]).hypot(w.center[1] - p[1]) < w.radius);
    assert!(near, "{w:?}");
}

#[test]
fn constancy_distinguishes_functions_of_f() {
    let f = bump_field(128);
    let levels = curves::regular_levels(&f, 12).unwrap();
    let good = weakdiv::constancy_test(&f.map(|t| t.exp()), &f, &levels).unwrap();
    let bad = weakdiv::constancy_test(&ScalarField::from_fn(f.grid, |x, _| x), &f, &levels).unwrap();
    assert!(good.max_variance < 1e-6, "{}", good.max_variance);
    assert!(bad.max_variance > 1e-3, "{}", bad.max_variance);
    assert_eq!(good.levels.len(), levels.len());
    let two = gallery::two_bumps(f.grid, 0.9, false);
    assert_eq!(weakdiv::constancy_test(&f, &two, &levels).unwrap_err(), Error::NotMonotone);
}

#[test]
fn grid_mismatch_is_reported() {
    let f = bump_field(32);
    let other = bump_field(16);
    let fam = TestFamily::lattice(&f.grid);
    assert_eq!(weakdiv::divergence_defect(&other, &field::perp_gradient(&f), &fam).unwrap_err(), Error::GridMismatch);
}
