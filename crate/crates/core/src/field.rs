//! Cell-centered scalar fields, their discrete gradients and total variation.
//!
//! Samples live at cell centers `origin + (i, j)·h`, stored row-major with the
//! y index outer. Every stencil treats values outside the grid as 0, which is
//! how compact support is modelled: a field that vanishes on its boundary ring
//! has bounded superlevel sets for every `t > 0`.

use alloc::vec;
use alloc::vec::Vec;

use crate::curves;
use crate::error::{Error, Result};

/// Grid header shared by fields, masks and vector fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    /// Cell spacing, identical on both axes.
    pub h: f64,
    /// Physical coordinates of the center of cell `(0, 0)`.
    pub origin: [f64; 2],
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, h: f64, origin: [f64; 2]) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidField("nx and ny must be positive".into()));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidField("h must be finite and positive".into()));
        }
        if !(origin[0].is_finite() && origin[1].is_finite()) {
            return Err(Error::InvalidField("origin must be finite".into()));
        }
        Ok(Self { nx, ny, h, origin })
    }

    /// `n × n` grid whose cells tile `[-half_width, half_width]²`.
    pub fn centered_square(n: usize, half_width: f64) -> Self {
        let h = 2.0 * half_width / n as f64;
        Self { nx: n, ny: n, h, origin: [-half_width + 0.5 * h, -half_width + 0.5 * h] }
    }

    /// Grid whose cells tile `[x0, x1] × [y0, y1]` with `nx` columns.
    /// The row count follows from the requirement of square cells.
    pub fn covering(nx: usize, x: [f64; 2], y: [f64; 2]) -> Result<Self> {
        let h = (x[1] - x[0]) / nx as f64;
        let ny_f = (y[1] - y[0]) / h;
        let ny = libm::round(ny_f) as usize;
        if libm::fabs(ny_f - ny as f64) > 1e-9 * ny_f.max(1.0) {
            return Err(Error::InvalidArgument("box is not an integer number of square cells".into()));
        }
        Self::new(nx, ny, h, [x[0] + 0.5 * h, y[0] + 0.5 * h])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    /// Physical position of a cell center.
    #[inline]
    pub fn center(&self, i: usize, j: usize) -> [f64; 2] {
        [self.origin[0] + i as f64 * self.h, self.origin[1] + j as f64 * self.h]
    }

    /// Physical bounding box of the grid `[[xmin, xmax], [ymin, ymax]]`
    /// measured at the cell edges.
    pub fn bounds(&self) -> [[f64; 2]; 2] {
        let x0 = self.origin[0] - 0.5 * self.h;
        let y0 = self.origin[1] - 0.5 * self.h;
        [[x0, x0 + self.nx as f64 * self.h], [y0, y0 + self.ny as f64 * self.h]]
    }

    /// Fractional cell coordinates of a physical point.
    #[inline]
    pub fn to_grid(&self, p: [f64; 2]) -> [f64; 2] {
        [(p[0] - self.origin[0]) / self.h, (p[1] - self.origin[1]) / self.h]
    }

    #[inline]
    pub fn to_physical(&self, g: [f64; 2]) -> [f64; 2] {
        [self.origin[0] + g[0] * self.h, self.origin[1] + g[1] * self.h]
    }

    /// Same cell layout (spacing and origin compared exactly).
    pub fn same_as(&self, other: &GridSpec) -> bool {
        self == other
    }

    /// Calls `visit(p, q)` once for every 4-adjacent pair of cells, including
    /// the pairs formed with the virtual exterior (`q = None`).
    pub fn for_each_edge(&self, mut visit: impl FnMut(usize, Option<usize>)) {
        let (nx, ny) = (self.nx, self.ny);
        for j in 0..ny {
            for i in 0..nx {
                let p = j * nx + i;
                visit(p, if i + 1 < nx { Some(p + 1) } else { None });
                visit(p, if j + 1 < ny { Some(p + nx) } else { None });
                if i == 0 {
                    visit(p, None);
                }
                if j == 0 {
                    visit(p, None);
                }
            }
        }
    }
}

/// Grid-sampled stream function, zero outside the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidField(alloc::format!(
                "length mismatch: expected {} values, found {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(alloc::format!("non-finite value at index {k}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    /// Samples `f(x, y)` at every cell center.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let [x, y] = grid.center(i, j);
                values.push(f(x, y));
            }
        }
        Self { grid, values }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    /// Zero-extended lookup.
    #[inline]
    pub fn get(&self, i: isize, j: isize) -> f64 {
        if i < 0 || j < 0 || i >= self.grid.nx as isize || j >= self.grid.ny as isize {
            0.0
        } else {
            self.values[j as usize * self.grid.nx + i as usize]
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(libm::fabs(*v)))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| f(*v)).collect() }
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect();
        Ok(Self { grid: self.grid, values })
    }

    /// Positive part `max(f, 0)`.
    pub fn positive_part(&self) -> Self {
        self.map(|v| if v > 0.0 { v } else { 0.0 })
    }

    /// Negative part `max(-f, 0)`.
    pub fn negative_part(&self) -> Self {
        self.map(|v| if v < 0.0 { -v } else { 0.0 })
    }

    pub fn boundary_is_zero(&self) -> bool {
        self.boundary_indices().all(|k| self.values[k] == 0.0)
    }

    /// Zeroes the boundary ring and returns how many samples were changed.
    pub fn enforce_zero_boundary(&mut self) -> usize {
        let idx: Vec<usize> = self.boundary_indices().collect();
        let mut changed = 0;
        for k in idx {
            if self.values[k] != 0.0 {
                self.values[k] = 0.0;
                changed += 1;
            }
        }
        changed
    }

    fn boundary_indices(&self) -> impl Iterator<Item = usize> + '_ {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        (0..self.grid.len()).filter(move |&k| {
            let (i, j) = (k % nx, k / nx);
            i == 0 || j == 0 || i + 1 == nx || j + 1 == ny
        })
    }

    /// Sorted distinct values of the zero-extended field (0 is always
    /// included, since the exterior carries it).
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.values.clone();
        v.push(0.0);
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.dedup();
        v
    }

    /// Bilinear interpolation at a physical point, zero-extended.
    pub fn bilinear(&self, p: [f64; 2]) -> f64 {
        bilinear(&self.values, &self.grid, p)
    }

    /// Catmull–Rom bicubic interpolation at a physical point, zero-extended.
    pub fn bicubic(&self, p: [f64; 2]) -> f64 {
        bicubic(&self.values, &self.grid, p)
    }
}

/// Velocity samples at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: GridSpec,
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, vx: vec![0.0; grid.len()], vy: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let mut out = Self::zeros(grid);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let [x, y] = grid.center(i, j);
                let [a, b] = f(x, y);
                let k = grid.index(i, j);
                out.vx[k] = a;
                out.vy[k] = b;
            }
        }
        out
    }

    #[inline]
    pub fn magnitude(&self, k: usize) -> f64 {
        libm::hypot(self.vx[k], self.vy[k])
    }

    /// Bilinear interpolation of both components.
    pub fn bilinear(&self, p: [f64; 2]) -> [f64; 2] {
        [bilinear(&self.vx, &self.grid, p), bilinear(&self.vy, &self.grid, p)]
    }
}

/// Central differences on interior cells, one-sided at the grid edges.
fn diff_x(f: &ScalarField) -> Vec<f64> {
    let GridSpec { nx, ny, h, .. } = f.grid;
    let mut out = vec![0.0; f.grid.len()];
    for j in 0..ny {
        for i in 0..nx {
            let d = if nx == 1 {
                0.0
            } else if i == 0 {
                (f.at(1, j) - f.at(0, j)) / h
            } else if i + 1 == nx {
                (f.at(i, j) - f.at(i - 1, j)) / h
            } else {
                (f.at(i + 1, j) - f.at(i - 1, j)) / (2.0 * h)
            };
            out[j * nx + i] = d;
        }
    }
    out
}

fn diff_y(f: &ScalarField) -> Vec<f64> {
    let GridSpec { nx, ny, h, .. } = f.grid;
    let mut out = vec![0.0; f.grid.len()];
    for j in 0..ny {
        for i in 0..nx {
            let d = if ny == 1 {
                0.0
            } else if j == 0 {
                (f.at(i, 1) - f.at(i, 0)) / h
            } else if j + 1 == ny {
                (f.at(i, j) - f.at(i, j - 1)) / h
            } else {
                (f.at(i, j + 1) - f.at(i, j - 1)) / (2.0 * h)
            };
            out[j * nx + i] = d;
        }
    }
    out
}

/// Discrete `∇f` as a vector field.
pub fn gradient(f: &ScalarField) -> VectorField {
    VectorField { grid: f.grid, vx: diff_x(f), vy: diff_y(f) }
}

/// `v = ∇⊥f = (-∂_y f, ∂_x f)`.
pub fn perp_gradient(f: &ScalarField) -> VectorField {
    let mut vx = diff_y(f);
    for v in &mut vx {
        *v = -*v;
    }
    VectorField { grid: f.grid, vx, vy: diff_x(f) }
}

/// Pointwise `|∇f|` on cell centers.
pub fn gradient_magnitude(f: &ScalarField) -> Vec<f64> {
    let g = gradient(f);
    g.vx.iter().zip(&g.vy).map(|(a, b)| libm::hypot(*a, *b)).collect()
}

/// Divergence with the same central stencil used by [`perp_gradient`].
/// Only cells at distance ≥ 2 from the boundary see purely central stencils;
/// the others are returned as 0 and flagged `false` in the second vector.
pub fn divergence(v: &VectorField) -> (Vec<f64>, Vec<bool>) {
    let GridSpec { nx, ny, h, .. } = v.grid;
    let mut div = vec![0.0; v.grid.len()];
    let mut interior = vec![false; v.grid.len()];
    if nx < 5 || ny < 5 {
        return (div, interior);
    }
    for j in 2..ny - 2 {
        for i in 2..nx - 2 {
            let k = j * nx + i;
            div[k] = (v.vx[k + 1] - v.vx[k - 1]) / (2.0 * h) + (v.vy[k + nx] - v.vy[k - nx]) / (2.0 * h);
            interior[k] = true;
        }
    }
    (div, interior)
}

/// Anisotropic total variation: `Σ |f(p) - f(q)|·h` over 4-adjacent pairs,
/// the virtual zero exterior included.
pub fn total_variation(f: &ScalarField) -> f64 {
    let mut tv = 0.0;
    f.grid.for_each_edge(|p, q| {
        let b = q.map_or(0.0, |q| f.values[q]);
        tv += libm::fabs(f.values[p] - b);
    });
    tv * f.grid.h
}

/// `∫ P({f > t}) dt` evaluated exactly over the breakpoints, with `P` the
/// edge-count perimeter. Each edge `(p, q)` contributes to the perimeter of
/// `{f > t}` for `t ∈ [min, max)` of its two values; a difference array over
/// the sorted breakpoints turns that into per-interval perimeters.
pub fn perimeter_integral(f: &ScalarField) -> f64 {
    let levels = f.breakpoints();
    let locate = |v: f64| levels.binary_search_by(|x| x.partial_cmp(&v).unwrap()).unwrap();
    let mut delta = vec![0i64; levels.len() + 1];
    f.grid.for_each_edge(|p, q| {
        let a = f.values[p];
        let b = q.map_or(0.0, |q| f.values[q]);
        if a != b {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            delta[locate(lo)] += 1;
            delta[locate(hi)] -= 1;
        }
    });
    let mut edges = 0i64;
    let mut sum = 0.0;
    for k in 0..levels.len().saturating_sub(1) {
        edges += delta[k];
        sum += edges as f64 * (levels[k + 1] - levels[k]);
    }
    sum * f.grid.h
}

/// Comparison of the continuum coarea formula (isotropic, from traced level
/// curves) and the exact discrete one (anisotropic, from edge counts).
#[derive(Debug, Clone, PartialEq)]
pub struct CoareaReport {
    /// `Σ |∇f| h²` with central differences.
    pub gradient_integral: f64,
    /// `Σ_k Δt · length({f = t_k})`.
    pub level_length_integral: f64,
    pub relative_discrepancy: f64,
    pub levels: Vec<f64>,
    pub band_width: f64,
    /// Anisotropic TV.
    pub total_variation: f64,
    /// Breakpoint-weighted edge-count perimeter integral.
    pub perimeter_integral: f64,
    pub exact_relative_defect: f64,
}

pub fn coarea_report(f: &ScalarField, n_levels: usize) -> Result<CoareaReport> {
    if n_levels < 2 {
        return Err(Error::InvalidArgument("n_levels must be at least 2".into()));
    }
    let (lo, hi) = (f.min().min(0.0), f.max().max(0.0));
    if hi <= lo {
        return Err(Error::ConstantField);
    }
    let h2 = f.grid.h * f.grid.h;
    let gradient_integral: f64 = gradient_magnitude(f).iter().sum::<f64>() * h2;

    let band_width = (hi - lo) / n_levels as f64;
    let levels = curves::regular_levels(f, n_levels)?;
    let mut level_length_integral = 0.0;
    for &t in &levels {
        let length: f64 = curves::trace_essential_level(f, t)?.iter().map(|c| c.arclength).sum();
        level_length_integral += band_width * length;
    }

    let tv = total_variation(f);
    let pi = perimeter_integral(f);
    let scale = tv.abs().max(pi.abs());
    let exact_relative_defect = if scale > 0.0 { libm::fabs(tv - pi) / scale } else { 0.0 };
    Ok(CoareaReport {
        gradient_integral,
        level_length_integral,
        relative_discrepancy: libm::fabs(gradient_integral - level_length_integral) / gradient_integral,
        levels,
        band_width,
        total_variation: tv,
        perimeter_integral: pi,
        exact_relative_defect,
    })
}

/// Bilinear interpolation of cell-center samples, zero outside the grid.
pub fn bilinear(values: &[f64], grid: &GridSpec, p: [f64; 2]) -> f64 {
    let [u, v] = grid.to_grid(p);
    let (i0, j0) = (libm::floor(u), libm::floor(v));
    let (fx, fy) = (u - i0, v - j0);
    let (i0, j0) = (i0 as isize, j0 as isize);
    let at = |i: isize, j: isize| sample(values, grid, i, j);
    let a = at(i0, j0) * (1.0 - fx) + at(i0 + 1, j0) * fx;
    let b = at(i0, j0 + 1) * (1.0 - fx) + at(i0 + 1, j0 + 1) * fx;
    a * (1.0 - fy) + b * fy
}

/// Catmull–Rom bicubic interpolation of cell-center samples, zero outside.
/// Exact at the samples, third order in smooth regions.
pub fn bicubic(values: &[f64], grid: &GridSpec, p: [f64; 2]) -> f64 {
    let [u, v] = grid.to_grid(p);
    let (i0, j0) = (libm::floor(u), libm::floor(v));
    let (fx, fy) = (u - i0, v - j0);
    let (i0, j0) = (i0 as isize, j0 as isize);
    let wx = catmull_rom_weights(fx);
    let wy = catmull_rom_weights(fy);
    let mut acc = 0.0;
    for (b, wyb) in wy.iter().enumerate() {
        let mut row = 0.0;
        for (a, wxa) in wx.iter().enumerate() {
            row += wxa * sample(values, grid, i0 - 1 + a as isize, j0 - 1 + b as isize);
        }
        acc += wyb * row;
    }
    acc
}

#[inline]
fn catmull_rom_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

#[inline]
fn sample(values: &[f64], grid: &GridSpec, i: isize, j: isize) -> f64 {
    if i < 0 || j < 0 || i >= grid.nx as isize || j >= grid.ny as isize {
        0.0
    } else {
        values[j as usize * grid.nx + i as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(n, n, 1.0, [0.0, 0.0]).unwrap()
    }

    #[test]
    fn smallest_valid_field() {
        let f = ScalarField::new(grid(3), vec![0., 0., 0., 0., 1., 0., 0., 0., 0.]).unwrap();
        assert!(f.boundary_is_zero());
        assert_eq!(f.at(1, 1), 1.0);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let err = ScalarField::new(grid(3), vec![0.0; 8]).unwrap_err();
        assert!(alloc::format!("{err}").contains("length mismatch"));
    }

    #[test]
    fn non_finite_is_rejected() {
        let mut v = vec![0.0; 9];
        v[4] = f64::NAN;
        let err = ScalarField::new(grid(3), v).unwrap_err();
        assert!(alloc::format!("{err}").contains("index 4"));
    }

    #[test]
    fn zero_boundary_enforcement_counts_changes() {
        let mut f = ScalarField::from_fn(grid(4), |_, _| 1.0);
        assert_eq!(f.enforce_zero_boundary(), 12);
        assert!(f.boundary_is_zero());
        assert_eq!(f.values.iter().filter(|v| **v == 1.0).count(), 4);
    }

    #[test]
    fn constant_has_zero_perp_gradient() {
        let f = ScalarField::from_fn(grid(6), |_, _| 3.5);
        let v = perp_gradient(&f);
        assert!(v.vx.iter().chain(&v.vy).all(|x| *x == 0.0));
    }

    #[test]
    fn linear_patch_is_differentiated_exactly() {
        let g = GridSpec::new(20, 20, 0.1, [0.0, 0.0]).unwrap();
        let taper = 0.7;
        let f = ScalarField::from_fn(g, |x, _| taper * x);
        let v = perp_gradient(&f);
        for j in 1..19 {
            for i in 1..19 {
                let k = g.index(i, j);
                assert!(v.vx[k].abs() < 1e-12);
                assert!((v.vy[k] - taper).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_cell_indicator_has_tv_four() {
        let mut values = vec![0.0; 25];
        values[12] = 1.0;
        let f = ScalarField::new(grid(5), values).unwrap();
        assert_eq!(total_variation(&f), 4.0);
        assert_eq!(perimeter_integral(&f), 4.0);
    }

    #[test]
    fn constant_field_tv_counts_only_the_exterior_jump() {
        let f = ScalarField::from_fn(grid(4), |_, _| 0.0);
        assert_eq!(total_variation(&f), 0.0);
    }

    #[test]
    fn coarea_rejects_constant_field() {
        let f = ScalarField::zeros(grid(8));
        assert_eq!(coarea_report(&f, 4).unwrap_err(), Error::ConstantField);
    }

    #[test]
    fn central_divergence_of_perp_gradient_vanishes() {
        let g = GridSpec::centered_square(40, 1.0);
        let f = ScalarField::from_fn(g, |x, y| libm::sin(3.0 * x) * libm::cos(2.0 * y + x * y));
        let (div, interior) = divergence(&perp_gradient(&f));
        let mut checked = 0;
        for (d, ok) in div.iter().zip(&interior) {
            if *ok {
                assert!(d.abs() < 1e-12, "{d}");
                checked += 1;
            }
        }
        assert_eq!(checked, 36 * 36);
    }

    #[test]
    fn interpolation_reproduces_samples() {
        let g = GridSpec::centered_square(10, 1.0);
        let f = ScalarField::from_fn(g, |x, y| x * x - y);
        for (i, j) in [(0, 0), (3, 7), (9, 9)] {
            let p = g.center(i, j);
            assert!((f.bilinear(p) - f.at(i, j)).abs() < 1e-14);
            assert!((f.bicubic(p) - f.at(i, j)).abs() < 1e-14);
        }
    }
}
