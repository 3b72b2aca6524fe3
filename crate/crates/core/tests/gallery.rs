//! Closed-form generators against numerical differentiation and quadrature.

use proptest::prelude::*;
use streamdec_core::field::GridSpec;
use streamdec_core::gallery::{self, NelsonProfile};
use streamdec_core::monodec;

proptest! {
    #[test]
    fn nelson_velocity_is_perp_gradient(x in -0.95f64..0.95, y in 0.05f64..1.95, arctan: bool) {
        let profile = if arctan { NelsonProfile::Arctan } else { NelsonProfile::Slope };
        let yy = if y < 1.0 { y } else { 2.0 - y };
        prop_assume!(x.abs() < yy - 1e-3 && (y - 1.0).abs() > 1e-3 && x.abs() > 1e-3);
        let e = 1e-7;
        let fx = (gallery::nelson_stream(profile, x + e, y) - gallery::nelson_stream(profile, x - e, y)) / (2.0 * e);
        let fy = (gallery::nelson_stream(profile, x, y + e) - gallery::nelson_stream(profile, x, y - e)) / (2.0 * e);
        let v = gallery::nelson_velocity(profile, x, y);
        let scale = 1.0 + fx.abs() + fy.abs();
        prop_assert!((v[0] + fy).abs() < 1e-5 * scale && (v[1] - fx).abs() < 1e-5 * scale, "{v:?} vs ({}, {fx})", -fy);
    }

    #[test]
    fn sector_flux_matches_stream_difference(alpha in 0.0f64..1.0, beta in 0.0f64..1.0, y in 0.1f64..0.9, arctan: bool) {
        // flux across the horizontal segment {αy < x < βy} at height y is f(αy) - f(βy)
        let profile = if arctan { NelsonProfile::Arctan } else { NelsonProfile::Slope };
        let (a, b) = (alpha.min(beta), alpha.max(beta));
        prop_assume!(b - a > 1e-3 && b < 0.999);
        let diff = gallery::nelson_stream(profile, a * y, y) - gallery::nelson_stream(profile, b * y, y);
        prop_assert!((diff - profile.sector_flux(a, b)).abs() < 1e-12);
    }
}

#[test]
fn overlapping_bumps_share_one_superlevel_component_at_low_levels() {
    let f = gallery::two_bumps(GridSpec::centered_square(256, 1.0), 0.9, true);
    assert!(!monodec::is_monotone(&f));
    // the saddle value sits on the axis between the peaks
    let g = f.grid;
    let j = g.ny / 2;
    let saddle = (g.nx / 2 - 20..g.nx / 2 + 60).map(|i| f.at(i, j)).fold(f64::INFINITY, f64::min);
    assert!((saddle - 0.3).abs() < 0.05, "{saddle}");
}

#[test]
fn nelson_densities_are_bounded_cell_averages() {
    let n = gallery::nelson(gallery::nelson_grid(128), NelsonProfile::Slope).unwrap();
    assert!(n.rho.values.iter().all(|v| (-1.0..=1.0).contains(v)));
    assert!(n.rho2.values.iter().all(|v| (0.0..=1.0).contains(v)));
    // ρ² ≥ |ρ| cellwise: the two sectors partition the support of ρ²
    for (r, r2) in n.rho.values.iter().zip(&n.rho2.values) {
        assert!(r.abs() <= r2 + 1e-12);
    }
    assert!(gallery::nelson(GridSpec::centered_square(32, 1.0), NelsonProfile::Slope).is_err());
}
