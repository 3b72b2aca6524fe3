//! Closed-form example fields.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarField, VectorField};

/// `amplitude · max(0, 1 - |x - c|² / radius²)`.
pub fn radial_bump(grid: GridSpec, center: [f64; 2], radius: f64, amplitude: f64) -> ScalarField {
    let mut f = ScalarField::from_fn(grid, |x, y| {
        let r2 = ((x - center[0]) * (x - center[0]) + (y - center[1]) * (y - center[1])) / (radius * radius);
        amplitude * f64::max(0.0, 1.0 - r2)
    });
    f.enforce_zero_boundary();
    f
}

/// `amplitude · max(0, 1 - |x - c|² / radius²)³`, a C² bump.
pub fn smooth_bump(grid: GridSpec, center: [f64; 2], radius: f64, amplitude: f64) -> ScalarField {
    let mut f = ScalarField::from_fn(grid, |x, y| {
        let r2 = ((x - center[0]) * (x - center[0]) + (y - center[1]) * (y - center[1])) / (radius * radius);
        let s = f64::max(0.0, 1.0 - r2);
        amplitude * s * s * s
    });
    f.enforce_zero_boundary();
    f
}

/// Peaks 1.0 at `(-separation/2, 0)` and 0.6 at `(separation/2, 0)`.
/// Disjoint supports use radius `0.45·separation`; overlapping ones use
/// `separation / (1 + 1/√2)`, which puts the saddle on the axis near 0.3.
pub fn two_bumps(grid: GridSpec, separation: f64, overlap: bool) -> ScalarField {
    let radius = if overlap { separation / (1.0 + core::f64::consts::FRAC_1_SQRT_2) } else { 0.45 * separation };
    let a = radial_bump(grid, [-0.5 * separation, 0.0], radius, 1.0);
    let b = radial_bump(grid, [0.5 * separation, 0.0], radius, 0.6);
    a.zip_with(&b, |p, q| p + q).unwrap()
}

/// Annular ridge of height 1 at radius 0.5, with a flat crater floor at 0.25.
pub fn volcano(grid: GridSpec) -> ScalarField {
    let (r0, w) = (0.5, 0.3);
    let mut f = ScalarField::from_fn(grid, |x, y| {
        let r = libm::hypot(x, y);
        let ridge = f64::max(0.0, 1.0 - (r - r0) * (r - r0) / (w * w));
        if r < r0 {
            ridge.max(0.25)
        } else {
            ridge
        }
    });
    f.enforce_zero_boundary();
    f
}

/// Profile of the counterexample on the fundamental triangle `0 < x < y < 1`.
///
/// Both profiles have the rays through the origin as level lines and
/// `|v| ~ 1/r`. `Slope` (`f = 1 - x/y`) pushes flux `β - α` through the sector
/// `αy < x < βy`; `Arctan` (`f = π/4 - arctan(x/y)`) pushes `arctan β - arctan α`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NelsonProfile {
    #[default]
    Slope,
    Arctan,
}

impl NelsonProfile {
    /// Flux of `v` through the sector `αy < x < βy` of the fundamental triangle.
    pub fn sector_flux(self, alpha: f64, beta: f64) -> f64 {
        match self {
            NelsonProfile::Slope => beta - alpha,
            NelsonProfile::Arctan => libm::atan(beta) - libm::atan(alpha),
        }
    }
}

/// Folds a point into the fundamental triangle: `(|x|, min(y, 2 - y))` plus
/// the two reflection signs. `None` outside the diamond `|x| < min(y, 2-y)`.
fn fold(x: f64, y: f64) -> Option<(f64, f64, f64, f64)> {
    let (big_y, sigma) = if y < 1.0 { (y, 1.0) } else { (2.0 - y, -1.0) };
    let (big_x, s) = if x < 0.0 { (-x, -1.0) } else { (x, 1.0) };
    if big_y > 0.0 && big_x < big_y {
        Some((big_x, big_y, s, sigma))
    } else {
        None
    }
}

pub fn nelson_stream(profile: NelsonProfile, x: f64, y: f64) -> f64 {
    match fold(x, y) {
        None => 0.0,
        Some((bx, by, _, _)) => match profile {
            NelsonProfile::Slope => 1.0 - bx / by,
            NelsonProfile::Arctan => core::f64::consts::FRAC_PI_4 - libm::atan(bx / by),
        },
    }
}

/// Closed-form `∇⊥f`.
pub fn nelson_velocity(profile: NelsonProfile, x: f64, y: f64) -> [f64; 2] {
    match fold(x, y) {
        None => [0.0, 0.0],
        Some((bx, by, s, sigma)) => {
            let (dfx, dfy) = match profile {
                NelsonProfile::Slope => (-1.0 / by, bx / (by * by)),
                NelsonProfile::Arctan => {
                    let r2 = bx * bx + by * by;
                    (-by / r2, bx / r2)
                }
            };
            [-sigma * dfy, s * dfx]
        }
    }
}

/// Indicator of the sector `αY < x < βY` in the right half of the diamond,
/// `Y = min(y, 2 - y)`.
pub fn nelson_sector(x: f64, y: f64, alpha: f64, beta: f64) -> f64 {
    match fold(x, y) {
        Some((_, by, s, _)) if s > 0.0 && alpha * by < x && x < beta * by => 1.0,
        _ => 0.0,
    }
}

/// Area of the axis-aligned cell `[x0,x1]×[y0,y1]` inside a counterclockwise triangle.
fn cell_triangle_area(cell: [f64; 4], tri: [[f64; 2]; 3]) -> f64 {
    let [x0, x1, y0, y1] = cell;
    let mut poly: Vec<[f64; 2]> = alloc::vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]];
    for e in 0..3 {
        let (a, b) = (tri[e], tri[(e + 1) % 3]);
        let side = |p: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        let mut next = Vec::with_capacity(poly.len() + 2);
        for k in 0..poly.len() {
            let (p, q) = (poly[k], poly[(k + 1) % poly.len()]);
            let (sp, sq) = (side(p), side(q));
            if sp >= 0.0 {
                next.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                let r = sp / (sp - sq);
                next.push([p[0] + r * (q[0] - p[0]), p[1] + r * (q[1] - p[1])]);
            }
        }
        poly = next;
        if poly.is_empty() {
            return 0.0;
        }
    }
    let mut area = 0.0;
    for k in 0..poly.len() {
        let (p, q) = (poly[k], poly[(k + 1) % poly.len()]);
        area += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * area
}

/// Cell averages of the sector indicator `nelson_sector(·, ·, α, β)`, by exact clipping.
pub fn nelson_sector_average(grid: GridSpec, alpha: f64, beta: f64) -> ScalarField {
    let lower = [[0.0, 0.0], [beta, 1.0], [alpha, 1.0]];
    let upper = [[0.0, 2.0], [alpha, 1.0], [beta, 1.0]];
    let h = grid.h;
    let mut values = alloc::vec![0.0; grid.len()];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let c = grid.center(i, j);
            let cell = [c[0] - 0.5 * h, c[0] + 0.5 * h, c[1] - 0.5 * h, c[1] + 0.5 * h];
            if cell[1] <= 0.0 || cell[0] >= beta || cell[3] <= 0.0 || cell[2] >= 2.0 {
                continue;
            }
            values[grid.index(i, j)] = (cell_triangle_area(cell, lower) + cell_triangle_area(cell, upper)) / (h * h);
        }
    }
    ScalarField { grid, values }
}

#[derive(Debug, Clone)]
pub struct NelsonField {
    pub f: ScalarField,
    pub v: VectorField,
    /// `ρ_{1/2,1} - ρ_{0,1/2}`, as exact cell averages.
    pub rho: ScalarField,
    /// `ρ² = ρ_{0,1}`, as exact cell averages (differs from `rho²` on cut cells).
    pub rho2: ScalarField,
}

/// Sink at the origin, source at `(0, 2)`.
pub const NELSON_SINK: [f64; 2] = [0.0, 0.0];
pub const NELSON_SOURCE: [f64; 2] = [0.0, 2.0];

pub fn nelson_grid(n: usize) -> GridSpec {
    GridSpec::covering(n, [-1.5, 1.5], [-0.5, 2.5]).unwrap()
}

pub fn nelson(grid: GridSpec, profile: NelsonProfile) -> Result<NelsonField> {
    let [[x0, x1], [y0, y1]] = grid.bounds();
    let tol = 1e-12;
    if x0 > -1.5 + tol || x1 < 1.5 - tol || y0 > -0.5 + tol || y1 < 2.5 - tol {
        return Err(Error::InsufficientCoverage("grid must cover [-1.5, 1.5] x [-0.5, 2.5]".into()));
    }
    let f = ScalarField::from_fn(grid, |x, y| nelson_stream(profile, x, y));
    let v = VectorField::from_fn(grid, |x, y| nelson_velocity(profile, x, y));
    let rho = nelson_sector_average(grid, 0.5, 1.0).zip_with(&nelson_sector_average(grid, 0.0, 0.5), |a, b| a - b)?;
    let rho2 = nelson_sector_average(grid, 0.0, 1.0);
    Ok(NelsonField { f, v, rho, rho2 })
}

/// `(Σ |v|^p h²)^{1/p}`.
pub fn lp_norm(v: &VectorField, p: f64) -> f64 {
    let h2 = v.grid.h * v.grid.h;
    let s: f64 = (0..v.grid.len()).map(|k| libm::pow(v.magnitude(k), p)).sum();
    libm::pow(s * h2, 1.0 / p)
}

/// Cells whose center lies within `radius` of any of `points`.
pub fn cells_near(grid: &GridSpec, points: &[[f64; 2]], radius: f64) -> Vec<usize> {
    let mut out = Vec::new();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let c = grid.center(i, j);
            if points.iter().any(|p| libm::hypot(c[0] - p[0], c[1] - p[1]) <= radius) {
                out.push(grid.index(i, j));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_respect_zero_boundary() {
        let g = GridSpec::centered_square(64, 1.0);
        assert!(radial_bump(g, [0.0, 0.0], 1.0, 1.0).boundary_is_zero());
        assert!(two_bumps(g, 0.8, true).boundary_is_zero());
        assert!(two_bumps(g, 0.8, false).boundary_is_zero());
        assert!(volcano(g).boundary_is_zero());
        let n = nelson(nelson_grid(64), NelsonProfile::Slope).unwrap();
        assert!(n.f.boundary_is_zero());
    }

    #[test]
    fn overlapping_saddle_is_near_three_tenths() {
        let sep = 0.8;
        let r = sep / (1.0 + core::f64::consts::FRAC_1_SQRT_2);
        let line = |x: f64| {
            f64::max(0.0, 1.0 - (x + 0.4) * (x + 0.4) / (r * r)) + 0.6 * f64::max(0.0, 1.0 - (x - 0.4) * (x - 0.4) / (r * r))
        };
        let saddle = (0..=1000).map(|k| -0.4 + 0.8 * k as f64 / 1000.0).map(line).fold(f64::INFINITY, f64::min);
        assert!((saddle - 0.3).abs() < 0.02, "{saddle}");
    }

    #[test]
    fn nelson_is_continuous_across_gluing_lines() {
        for p in [NelsonProfile::Slope, NelsonProfile::Arctan] {
            for k in 1..100 {
                let s = k as f64 / 100.0;
                let e = 1e-13;
                assert!((nelson_stream(p, s * 0.9, 1.0 - e) - nelson_stream(p, s * 0.9, 1.0 + e)).abs() < 1e-12);
                assert!((nelson_stream(p, -e, s) - nelson_stream(p, e, s)).abs() < 1e-12);
                assert!(nelson_stream(p, s, s - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn velocity_matches_finite_differences() {
        for p in [NelsonProfile::Slope, NelsonProfile::Arctan] {
            for (x, y) in [(0.2, 0.5), (-0.3, 0.7), (0.1, 1.6), (-0.25, 1.4)] {
                let e = 1e-6;
                let fx = (nelson_stream(p, x + e, y) - nelson_stream(p, x - e, y)) / (2.0 * e);
                let fy = (nelson_stream(p, x, y + e) - nelson_stream(p, x, y - e)) / (2.0 * e);
                let v = nelson_velocity(p, x, y);
                assert!((v[0] + fy).abs() < 1e-6 && (v[1] - fx).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn slope_profile_flux_through_horizontal_cut() {
        // ∫ v_y over the sector on the line y = c equals −(β − α)
        let (alpha, beta, c) = (0.2, 0.7, 0.4);
        let n = 10_000;
        let dx = (beta - alpha) * c / n as f64;
        let flux: f64 = (0..n).map(|k| nelson_velocity(NelsonProfile::Slope, alpha * c + (k as f64 + 0.5) * dx, c)[1] * dx).sum();
        assert!((flux + NelsonProfile::Slope.sector_flux(alpha, beta)).abs() < 1e-9);
    }

    #[test]
    fn sector_averages_match_supersampling() {
        let g = nelson_grid(48);
        let exact = nelson_sector_average(g, 0.25, 0.75);
        let s = 64;
        for k in (0..g.len()).step_by(7) {
            let (i, j) = g.coords(k);
            let c = g.center(i, j);
            let mut acc = 0.0;
            for p in 0..s {
                for q in 0..s {
                    let x = c[0] + g.h * ((p as f64 + 0.5) / s as f64 - 0.5);
                    let y = c[1] + g.h * ((q as f64 + 0.5) / s as f64 - 0.5);
                    acc += nelson_sector(x, y, 0.25, 0.75);
                }
            }
            assert!((acc / (s * s) as f64 - exact.values[k]).abs() < 0.02, "{k}");
        }
        let total: f64 = exact.values.iter().sum::<f64>() * g.h * g.h;
        // two triangles of base 0.5 and height 1
        assert!((total - 0.5).abs() < 1e-12);
    }

    #[test]
    fn grid_must_cover_the_diamond() {
        let g = GridSpec::centered_square(64, 1.0);
        assert!(matches!(nelson(g, NelsonProfile::Slope), Err(Error::InsufficientCoverage(_))));
    }
}
