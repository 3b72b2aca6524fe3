//! Weak divergence of `ρv` tested against a finite family of bumps.
//!
//! For a test function `φ`, `⟨div(ρv), φ⟩ = -∫ ρ v·∇φ`. The integral is taken
//! by midpoint quadrature on cell centers, so a Dirac mass `m` at `p` shows up
//! as `m·φ(p)` in the raw defect.

use alloc::vec::Vec;

use crate::curves::{self, LevelCurve};
use crate::error::{Error, Result};
use crate::field::{self, GridSpec, ScalarField, VectorField};
use crate::monodec::{self, MonotoneComponent};

/// `φ(x) = (1 - |x - c|²/r²)³` inside the ball, 0 outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunction {
    pub center: [f64; 2],
    pub radius: f64,
}

impl TestFunction {
    #[inline]
    pub fn value(&self, p: [f64; 2]) -> f64 {
        let q = self.q(p);
        if q >= 1.0 {
            0.0
        } else {
            let s = 1.0 - q;
            s * s * s
        }
    }

    #[inline]
    pub fn gradient(&self, p: [f64; 2]) -> [f64; 2] {
        let q = self.q(p);
        if q >= 1.0 {
            return [0.0, 0.0];
        }
        let s = 1.0 - q;
        let c = -6.0 * s * s / (self.radius * self.radius);
        [c * (p[0] - self.center[0]), c * (p[1] - self.center[1])]
    }

    /// `max |∇φ| = 96 / (25√5 r)`, attained at `|x - c| = r/√5`.
    pub fn grad_sup(&self) -> f64 {
        96.0 / (25.0 * libm::sqrt(5.0) * self.radius)
    }

    #[inline]
    fn q(&self, p: [f64; 2]) -> f64 {
        let (dx, dy) = (p[0] - self.center[0], p[1] - self.center[1]);
        (dx * dx + dy * dy) / (self.radius * self.radius)
    }

    pub fn fits_in(&self, grid: &GridSpec) -> bool {
        let [[x0, x1], [y0, y1]] = grid.bounds();
        let [cx, cy] = self.center;
        cx - self.radius >= x0 && cx + self.radius <= x1 && cy - self.radius >= y0 && cy + self.radius <= y1
    }

    /// Index range of cells whose centers may lie in the support.
    fn cell_window(&self, grid: &GridSpec) -> Option<([usize; 2], [usize; 2])> {
        let lo = grid.to_grid([self.center[0] - self.radius, self.center[1] - self.radius]);
        let hi = grid.to_grid([self.center[0] + self.radius, self.center[1] + self.radius]);
        let clamp = |v: f64, n: usize| -> isize { (libm::floor(v) as isize).clamp(-1, n as isize) };
        let (i0, j0) = (clamp(lo[0], grid.nx).max(0), clamp(lo[1], grid.ny).max(0));
        let (i1, j1) = (clamp(hi[0] + 1.0, grid.nx).min(grid.nx as isize - 1), clamp(hi[1] + 1.0, grid.ny).min(grid.ny as isize - 1));
        if i1 < i0 || j1 < j0 {
            None
        } else {
            Some(([i0 as usize, i1 as usize], [j0 as usize, j1 as usize]))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TestFamily {
    pub tests: Vec<TestFunction>,
    /// Points where `v` is singular; cells within `2h` of them are counted.
    pub singular_points: Vec<[f64; 2]>,
}

impl TestFamily {
    /// Centers on the lattice `origin + k·extent/8`, `k = 1..7` on each axis,
    /// radii `extent/4, /8, /16`; only bumps whose support lies inside the
    /// grid are kept. Enumeration is radius-major, then y, then x.
    pub fn lattice(grid: &GridSpec) -> Self {
        let [[x0, x1], [y0, y1]] = grid.bounds();
        let extent = f64::min(x1 - x0, y1 - y0);
        let mut tests = Vec::new();
        for div in [4.0, 8.0, 16.0] {
            let radius = extent / div;
            for ky in 1..8 {
                for kx in 1..8 {
                    let t = TestFunction {
                        center: [x0 + kx as f64 * (x1 - x0) / 8.0, y0 + ky as f64 * (y1 - y0) / 8.0],
                        radius,
                    };
                    if t.fits_in(grid) {
                        tests.push(t);
                    }
                }
            }
        }
        Self { tests, singular_points: Vec::new() }
    }

    pub fn with_singular_points(mut self, points: &[[f64; 2]]) -> Self {
        self.singular_points = points.to_vec();
        self
    }

    pub fn len(&self) -> usize {
        self.tests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tests.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefectReport {
    /// `d_k = -Σ ρ v·∇φ_k h²`.
    pub raw: Vec<f64>,
    /// `d_k / (‖ρ‖∞ · Σ_{supp φ_k} |v| h² · ‖∇φ_k‖∞)`; 0 for skipped tests.
    pub normalized: Vec<f64>,
    /// Tests whose normalization denominator vanished.
    pub skipped: Vec<bool>,
    pub max_normalized: f64,
    /// Test attaining `max_normalized`.
    pub argmax: Option<usize>,
    /// Cells within `2h` of a singular point of the family.
    pub flagged_cells: usize,
}

impl DefectReport {
    fn assemble(raw: Vec<f64>, denom: Vec<f64>, flagged_cells: usize) -> Self {
        let skipped: Vec<bool> = denom.iter().map(|d| !(*d > 0.0)).collect();
        let normalized: Vec<f64> = raw.iter().zip(&denom).zip(&skipped).map(|((r, d), s)| if *s { 0.0 } else { r / d }).collect();
        let mut max_normalized = 0.0;
        let mut argmax = None;
        for (k, v) in normalized.iter().enumerate() {
            if !skipped[k] && (argmax.is_none() || libm::fabs(*v) > max_normalized) {
                max_normalized = libm::fabs(*v);
                argmax = Some(k);
            }
        }
        Self { raw, normalized, skipped, max_normalized, argmax, flagged_cells }
    }
}

/// Raw defect and `Σ_{supp φ} |v| h²` for one test.
pub fn defect_for(rho: &ScalarField, v: &VectorField, t: &TestFunction) -> (f64, f64) {
    let grid = &rho.grid;
    let h2 = grid.h * grid.h;
    let Some(([i0, i1], [j0, j1])) = t.cell_window(grid) else {
        return (0.0, 0.0);
    };
    let (mut d, mut mass) = (0.0, 0.0);
    for j in j0..=j1 {
        for i in i0..=i1 {
            let p = grid.center(i, j);
            if t.q(p) >= 1.0 {
                continue;
            }
            let k = grid.index(i, j);
            let g = t.gradient(p);
            d -= rho.values[k] * (v.vx[k] * g[0] + v.vy[k] * g[1]);
            mass += v.magnitude(k);
        }
    }
    (d * h2, mass * h2)
}

pub fn divergence_defect(rho: &ScalarField, v: &VectorField, fam: &TestFamily) -> Result<DefectReport> {
    if !rho.grid.same_as(&v.grid) {
        return Err(Error::GridMismatch);
    }
    let rho_sup = rho.max_abs();
    let (raw, denom): (Vec<f64>, Vec<f64>) = fam
        .tests
        .iter()
        .map(|t| {
            let (d, m) = defect_for(rho, v, t);
            (d, rho_sup * m * t.grad_sup())
        })
        .unzip();
    let flagged = if fam.singular_points.is_empty() {
        0
    } else {
        crate::gallery::cells_near(&rho.grid, &fam.singular_points, 2.0 * rho.grid.h).len()
    };
    Ok(DefectReport::assemble(raw, denom, flagged))
}

/// Noise floor for verdicts: `10 ×` the max normalized defect of `ρ ≡ 1`,
/// never below `1e-12`.
pub fn control_threshold(v: &VectorField, fam: &TestFamily) -> Result<f64> {
    let one = ScalarField { grid: v.grid, values: alloc::vec![1.0; v.grid.len()] };
    let r = divergence_defect(&one, v, fam)?;
    Ok(f64::max(10.0 * r.max_normalized, 1e-12))
}

/// Smooth maps `β` used for chain-rule and renormalization checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Beta {
    Identity,
    Square,
    Sin,
    /// `√(r² + ε²)`, a smoothed `|r|`.
    SmoothAbs(f64),
}

impl Beta {
    pub fn value(&self, r: f64) -> f64 {
        match *self {
            Beta::Identity => r,
            Beta::Square => r * r,
            Beta::Sin => libm::sin(r),
            Beta::SmoothAbs(e) => libm::sqrt(r * r + e * e),
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        match *self {
            Beta::Identity => 1.0,
            Beta::Square => 2.0 * r,
            Beta::Sin => libm::cos(r),
            Beta::SmoothAbs(e) => r / libm::sqrt(r * r + e * e),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Beta::Identity => "identity",
            Beta::Square => "square",
            Beta::Sin => "sin",
            Beta::SmoothAbs(_) => "smooth-abs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Violated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainRuleReport {
    pub defect_rho: DefectReport,
    pub defect_beta_rho: DefectReport,
    pub threshold: f64,
    pub verdict: Verdict,
    /// Test index witnessing the violation (from the `β∘ρ` report when it fails).
    pub witness: Option<usize>,
    /// Whether `ρ` itself passes, i.e. whether the chain rule applies at all.
    pub premise_holds: bool,
}

pub fn chain_rule_test(rho: &ScalarField, v: &VectorField, beta: Beta, fam: &TestFamily, threshold: f64) -> Result<ChainRuleReport> {
    let defect_rho = divergence_defect(rho, v, fam)?;
    let defect_beta_rho = divergence_defect(&rho.map(|r| beta.value(r)), v, fam)?;
    let premise_holds = defect_rho.max_normalized <= threshold;
    let conclusion_holds = defect_beta_rho.max_normalized <= threshold;
    let (verdict, witness) = if premise_holds && conclusion_holds {
        (Verdict::Holds, None)
    } else if !conclusion_holds {
        (Verdict::Violated, defect_beta_rho.argmax)
    } else {
        (Verdict::Violated, defect_rho.argmax)
    };
    Ok(ChainRuleReport { defect_rho, defect_beta_rho, threshold, verdict, witness, premise_holds })
}

/// One report per component, with `v` replaced by `∇⊥fᵢ`.
pub fn split_by_components(rho: &ScalarField, comps: &[MonotoneComponent], fam: &TestFamily) -> Result<Vec<DefectReport>> {
    comps.iter().map(|c| divergence_defect(rho, &field::perp_gradient(&c.field), fam)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelConstancy {
    pub level: f64,
    pub curves: usize,
    pub length: f64,
    pub mean: f64,
    /// Arclength-weighted variance of `ρ` along the level.
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstancyReport {
    pub levels: Vec<LevelConstancy>,
    pub max_variance: f64,
}

/// Arclength-weighted mean and variance of `ρ` at segment midpoints.
pub fn variance_along(rho: &ScalarField, curves: &[LevelCurve]) -> (f64, f64, f64) {
    let (mut w, mut s1) = (0.0, 0.0);
    for c in curves {
        for k in 0..c.len() {
            let (p, q) = c.segment(k);
            let l = libm::hypot(q[0] - p[0], q[1] - p[1]);
            let r = rho.bilinear([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
            w += l;
            s1 += l * r;
        }
    }
    if w == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let mean = s1 / w;
    let mut var = 0.0;
    for c in curves {
        for k in 0..c.len() {
            let (p, q) = c.segment(k);
            let l = libm::hypot(q[0] - p[0], q[1] - p[1]);
            let r = rho.bilinear([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
            var += l * (r - mean) * (r - mean);
        }
    }
    (w, mean, var / w)
}

pub fn constancy_test(rho: &ScalarField, f: &ScalarField, levels: &[f64]) -> Result<ConstancyReport> {
    if !rho.grid.same_as(&f.grid) {
        return Err(Error::GridMismatch);
    }
    if !monodec::is_monotone(f) {
        return Err(Error::NotMonotone);
    }
    let grad = field::gradient(f);
    let mut out = Vec::with_capacity(levels.len());
    let mut max_variance = 0.0f64;
    for &t in levels {
        let cs = curves::trace_with_gradient(f, t, &grad)?;
        let (length, mean, variance) = variance_along(rho, &cs);
        max_variance = max_variance.max(variance);
        out.push(LevelConstancy { level: t, curves: cs.len(), length, mean, variance });
    }
    Ok(ConstancyReport { levels: out, max_variance })
}

/// Solves `(ρ∘γ)' = ν` on a closed curve. `nu` holds `(segment, mass)` pairs;
/// the solution is piecewise constant per segment, `ρ_k - ρ_{k-1} = ν_k`,
/// normalized to zero arclength mean.
pub fn curve_divergence_solve(c: &LevelCurve, nu: &[(usize, f64)]) -> Result<Vec<f64>> {
    let n = c.len();
    let mut jumps = alloc::vec![0.0; n];
    let mut scale = 0.0f64;
    for &(k, m) in nu {
        if k >= n {
            return Err(Error::InvalidArgument(alloc::format!("segment {k} out of range")));
        }
        jumps[k] += m;
        scale += libm::fabs(m);
    }
    let total: f64 = jumps.iter().sum();
    if libm::fabs(total) > 1e-12 * scale.max(1.0) {
        return Err(Error::NoSteadySolution { total_mass: total });
    }
    let lengths = c.segment_lengths();
    let mut rho = Vec::with_capacity(n);
    let mut acc = 0.0;
    for j in &jumps {
        acc += j;
        rho.push(acc);
    }
    let length: f64 = lengths.iter().sum();
    let mean = rho.iter().zip(&lengths).map(|(r, l)| r * l).sum::<f64>() / length;
    for r in &mut rho {
        *r -= mean;
    }
    Ok(rho)
}

/// Discrete `(ρ∘γ)'` as cyclic jumps `ρ_k - ρ_{k-1}`.
pub fn curve_jumps(rho: &[f64]) -> Vec<f64> {
    let n = rho.len();
    (0..n).map(|k| rho[k] - rho[(k + n - 1) % n]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_gradient_matches_finite_differences() {
        let t = TestFunction { center: [0.3, -0.2], radius: 0.7 };
        for p in [[0.1, 0.0], [0.5, -0.4], [0.3, 0.2]] {
            let e = 1e-6;
            let gx = (t.value([p[0] + e, p[1]]) - t.value([p[0] - e, p[1]])) / (2.0 * e);
            let gy = (t.value([p[0], p[1] + e]) - t.value([p[0], p[1] - e])) / (2.0 * e);
            let g = t.gradient(p);
            assert!((g[0] - gx).abs() < 1e-8 && (g[1] - gy).abs() < 1e-8);
        }
    }

    #[test]
    fn grad_sup_is_attained() {
        let t = TestFunction { center: [0.0, 0.0], radius: 0.5 };
        let best = (0..10_000).map(|k| k as f64 / 10_000.0 * 0.5).map(|x| libm::fabs(t.gradient([x, 0.0])[0])).fold(0.0, f64::max);
        assert!((best - t.grad_sup()).abs() < 1e-6);
    }

    #[test]
    fn lattice_family_stays_inside() {
        let g = GridSpec::centered_square(64, 1.0);
        let fam = TestFamily::lattice(&g);
        assert!(!fam.is_empty());
        assert!(fam.tests.iter().all(|t| t.fits_in(&g)));
        // radius extent/4 = 0.5 fits at k = 2..6 only
        assert_eq!(fam.tests.iter().filter(|t| t.radius == 0.5).count(), 25);
    }

    #[test]
    fn zero_mass_gives_constant() {
        let f = crate::gallery::radial_bump(GridSpec::centered_square(64, 1.0), [0.0, 0.0], 0.8, 1.0);
        let c = &curves::trace_essential_level(&f, 0.5).unwrap()[0];
        let rho = curve_divergence_solve(c, &[]).unwrap();
        assert!(rho.iter().all(|r| r.abs() < 1e-15));
        let rho = curve_divergence_solve(c, &[(10, 1.0), (40, -1.0)]).unwrap();
        assert!((rho[10] - rho[9] - 1.0).abs() < 1e-15);
        assert!((rho[40] - rho[39] + 1.0).abs() < 1e-15);
        assert!(curve_divergence_solve(c, &[(3, 1.0)]).is_err());
    }
}
