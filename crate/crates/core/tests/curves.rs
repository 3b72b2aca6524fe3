//! Marching-squares level curves: edge-set oracle, orientation, simplicity
//! and Hamiltonian time.

mod common;

use std::collections::BTreeSet;

use common::*;
use proptest::prelude::*;
use streamdec_core::curves;
use streamdec_core::field::{self, GridSpec};
use streamdec_core::gallery;
use streamdec_core::{Error, RegionMask};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn crossings_are_the_perimeter_edges(f in bumps_strategy(), k in 1usize..8) {
        prop_assume!(f.max() > 0.0);
        let levels = curves::regular_levels(&f, 8).unwrap();
        let t = levels.into_iter().filter(|t| *t > 0.0).nth(k % 4);
        prop_assume!(t.is_some());
        let t = t.unwrap();
        let cs = curves::trace_essential_level(&f, t).unwrap();
        let got: BTreeSet<_> = cs.iter().flat_map(|c| c.crossings.iter().map(|[a, b]| (*a, *b))).collect();
        let total: usize = cs.iter().map(|c| c.len()).sum();
        prop_assert_eq!(total, got.len(), "an edge is visited twice");
        prop_assert_eq!(got, perimeter_pairs(&RegionMask::superlevel(&f, t)));
    }

    #[test]
    fn vertices_interpolate_linearly(f in bumps_strategy()) {
        prop_assume!(f.max() > 0.0);
        let t = curves::regular_levels(&f, 5).unwrap().into_iter().find(|t| *t > 0.0);
        prop_assume!(t.is_some());
        let t = t.unwrap();
        for c in curves::trace_essential_level(&f, t).unwrap() {
            for (p, [a, b]) in c.vertices.iter().zip(&c.crossings) {
                let (fa, fb) = (value(&f, a[0], a[1]), value(&f, b[0], b[1]));
                prop_assert!(fa > t && fb < t);
                let s = (t - fa) / (fb - fa);
                let pa = f.grid.to_physical([a[0] as f64, a[1] as f64]);
                let pb = f.grid.to_physical([b[0] as f64, b[1] as f64]);
                let q = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                prop_assert!((q[0] - p[0]).abs() < 1e-12 && (q[1] - p[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn curves_are_simple_and_signed_area_matches(f in bumps_strategy()) {
        prop_assume!(f.max() > 0.0);
        let t = curves::regular_levels(&f, 3).unwrap().into_iter().find(|t| *t > 0.0);
        prop_assume!(t.is_some());
        let t = t.unwrap();
        let cs = curves::trace_essential_level(&f, t).unwrap();
        let mut area = 0.0;
        for c in &cs {
            prop_assert!(curves::is_simple_polyline(&c.vertices));
            prop_assert!((c.arclength - c.segment_lengths().iter().sum::<f64>()).abs() < 1e-12);
            area += c.signed_area();
        }
        // foreground on the left: outer curves count positive, holes negative
        let cells = RegionMask::superlevel(&f, t).area();
        prop_assert!(area > 0.0);
        prop_assert!((area - cells).abs() <= 0.5 * RegionMask::superlevel(&f, t).perimeter() * f.grid.h + 1e-12);
    }
}

#[test]
fn non_regular_levels_are_rejected() {
    let f = gallery::radial_bump(GridSpec::centered_square(16, 1.0), [0.0, 0.0], 0.8, 1.0);
    let v = f.values[f.grid.index(8, 8)];
    assert_eq!(curves::trace_essential_level(&f, v).unwrap_err(), Error::NonRegularLevel(v));
    assert!(curves::trace_essential_level(&f, 0.0).is_err());
}

#[test]
fn saddle_keeps_diagonal_foreground_apart() {
    // two foreground cells touching at a corner are two 4-components
    let g = unit_grid(4, 4);
    let f = streamdec_core::ScalarField::from_fn(g, |x, y| if (x, y) == (1.0, 1.0) || (x, y) == (2.0, 2.0) { 1.0 } else { 0.0 });
    let cs = curves::trace_essential_level(&f, 0.5).unwrap();
    assert_eq!(cs.len(), 2);
    assert!(cs.iter().all(|c| c.signed_area() > 0.0));
}

#[test]
fn annulus_hole_is_clockwise() {
    let f = gallery::volcano(GridSpec::centered_square(96, 1.0));
    let cs = curves::trace_essential_level(&f, 0.6).unwrap();
    assert_eq!(cs.len(), 2);
    let signs: Vec<bool> = cs.iter().map(|c| c.signed_area() > 0.0).collect();
    assert!(signs.contains(&true) && signs.contains(&false));
}

#[test]
fn radial_bump_circle_length_and_time() {
    // f = 1 - r²/R² has |∇f| = 2r/R², so the period of {f = t} is π R²
    let r0 = 0.9;
    let f = gallery::radial_bump(GridSpec::centered_square(256, 1.0), [0.0, 0.0], r0, 1.0);
    let t = curves::regular_levels(&f, 4).unwrap()[2];
    let cs = curves::trace_essential_level(&f, t).unwrap();
    assert_eq!(cs.len(), 1);
    let radius = r0 * (1.0 - t).sqrt();
    let rel = (cs[0].arclength - 2.0 * std::f64::consts::PI * radius).abs() / (2.0 * std::f64::consts::PI * radius);
    assert!(rel < 1e-3, "{rel}");
    let w = curves::curve_weight(&f, &cs[0]);
    let period = std::f64::consts::PI * r0 * r0;
    assert!((w.total - period).abs() / period < 1e-2, "{} vs {period}", w.total);
    let tn = curves::check_tangent_normal(&f, &cs[0]);
    assert!(tn.rms_angle < 1e-2);
    let ham = curves::hamiltonian_parametrization(&f, &cs[0]).unwrap();
    assert!((ham.total_time - w.total).abs() < 1e-12);
    let grad = field::gradient(&f);
    assert_eq!(curves::trace_with_gradient(&f, t, &grad).unwrap(), cs);
}
