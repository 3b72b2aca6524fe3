//! Essential level curves by marching squares.
//!
//! Corners of a square are cell centers (the grid padded by one ring of
//! virtual zeros), so every crossing sits on exactly one perimeter edge of
//! `{f > t}`. Within a square the corners are walked counter-clockwise and
//! each maximal run of foreground corners yields one segment, from the point
//! where the walk leaves the run back to the point where it entered it. Two
//! diagonal foreground corners are therefore never joined, which is the
//! 4/8 connectivity used by [`crate::region`], and the foreground always lies
//! to the left of travel.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{self, ScalarField, VectorField};

/// One closed, simple, oriented polyline of `{f = level}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelCurve {
    pub level: f64,
    /// Closed polyline; the last vertex connects back to the first.
    pub vertices: Vec<[f64; 2]>,
    pub arclength: f64,
    /// `|∇f|` at each segment midpoint (segment `k` joins vertex `k` and `k+1`).
    pub grad_at_midpoints: Vec<f64>,
    /// For each vertex, the foreground cell and the background cell of the
    /// perimeter edge it lies on (cell indices, `-1` and `n` are exterior).
    pub crossings: Vec<[[isize; 2]; 2]>,
}

impl LevelCurve {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn segment(&self, k: usize) -> ([f64; 2], [f64; 2]) {
        (self.vertices[k], self.vertices[(k + 1) % self.vertices.len()])
    }

    pub fn segment_lengths(&self) -> Vec<f64> {
        (0..self.len()).map(|k| dist(self.segment(k).0, self.segment(k).1)).collect()
    }

    /// Same curve traversed backwards (vertex 0 kept in place).
    pub fn reversed(&self) -> Self {
        let n = self.len();
        let vertices: Vec<_> = (0..n).map(|k| self.vertices[(n - k) % n]).collect();
        let crossings: Vec<_> = (0..n).map(|k| self.crossings[(n - k) % n]).collect();
        // old segment k' joins old vertices k', k'+1; new segment k joins
        // old vertices n-k, n-k-1, i.e. old segment n-k-1
        let grad_at_midpoints = (0..n).map(|k| self.grad_at_midpoints[(2 * n - k - 1) % n]).collect();
        Self { level: self.level, vertices, arclength: self.arclength, grad_at_midpoints, crossings }
    }

    /// Signed enclosed area (positive for counter-clockwise).
    pub fn signed_area(&self) -> f64 {
        let mut a = 0.0;
        for k in 0..self.len() {
            let (p, q) = self.segment(k);
            a += p[0] * q[1] - q[0] * p[1];
        }
        0.5 * a
    }
}

#[inline]
fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    libm::hypot(b[0] - a[0], b[1] - a[1])
}

/// `10⁻¹⁰ · max |∇f|`.
pub fn gradient_floor(f: &ScalarField) -> f64 {
    1e-10 * field::gradient_magnitude(f).iter().fold(0.0, |m, v| f64::max(m, *v))
}

fn value_range(f: &ScalarField) -> (f64, f64) {
    (f.min().min(0.0), f.max().max(0.0))
}

/// Up to `n` levels strictly between the extreme values: band midpoints of an
/// even split of the range, each moved to the midpoint of the gap between the
/// two consecutive distinct values that bracket it. Duplicates are dropped.
pub fn regular_levels(f: &ScalarField, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let (lo, hi) = value_range(f);
    if hi <= lo {
        return Err(Error::ConstantField);
    }
    let d = f.breakpoints();
    let mut out: Vec<f64> = Vec::with_capacity(n);
    for k in 0..n {
        let target = lo + (k as f64 + 0.5) * (hi - lo) / n as f64;
        let upper = d.partition_point(|v| *v <= target).clamp(1, d.len() - 1);
        let t = 0.5 * (d[upper - 1] + d[upper]);
        if out.last() != Some(&t) {
            out.push(t);
        }
    }
    Ok(out)
}

/// A level is regular when no sample (the exterior 0 included) equals it.
pub fn is_regular_level(f: &ScalarField, t: f64) -> bool {
    t.is_finite() && t != 0.0 && !f.values.contains(&t)
}

struct Tracer<'a> {
    f: &'a ScalarField,
    t: f64,
    /// padded dimensions
    px: usize,
    py: usize,
    n_horizontal: usize,
}

impl<'a> Tracer<'a> {
    fn new(f: &'a ScalarField, t: f64) -> Self {
        let (px, py) = (f.grid.nx + 2, f.grid.ny + 2);
        Self { f, t, px, py, n_horizontal: (px - 1) * py }
    }

    #[inline]
    fn value(&self, i: usize, j: usize) -> f64 {
        self.f.get(i as isize - 1, j as isize - 1)
    }

    #[inline]
    fn fg(&self, i: usize, j: usize) -> bool {
        self.value(i, j) > self.t
    }

    fn link_count(&self) -> usize {
        self.n_horizontal + self.px * (self.py - 1)
    }

    #[inline]
    fn horizontal(&self, i: usize, j: usize) -> usize {
        j * (self.px - 1) + i
    }

    #[inline]
    fn vertical(&self, i: usize, j: usize) -> usize {
        self.n_horizontal + j * self.px + i
    }

    /// Padded sample endpoints of a link.
    fn endpoints(&self, link: usize) -> ([usize; 2], [usize; 2]) {
        if link < self.n_horizontal {
            let (i, j) = (link % (self.px - 1), link / (self.px - 1));
            ([i, j], [i + 1, j])
        } else {
            let l = link - self.n_horizontal;
            let (i, j) = (l % self.px, l / self.px);
            ([i, j], [i, j + 1])
        }
    }

    fn crossing(&self, link: usize) -> ([f64; 2], [[isize; 2]; 2]) {
        let (a, b) = self.endpoints(link);
        let (fa, fb) = (self.value(a[0], a[1]), self.value(b[0], b[1]));
        let s = (self.t - fa) / (fb - fa);
        let g = [a[0] as f64 + s * (b[0] as f64 - a[0] as f64) - 1.0, a[1] as f64 + s * (b[1] as f64 - a[1] as f64) - 1.0];
        let ca = [a[0] as isize - 1, a[1] as isize - 1];
        let cb = [b[0] as isize - 1, b[1] as isize - 1];
        let cells = if fa > self.t { [ca, cb] } else { [cb, ca] };
        (self.f.grid.to_physical(g), cells)
    }

    /// `next[link]` for every crossed link.
    fn links(&self) -> Vec<u32> {
        let mut next = vec![u32::MAX; self.link_count()];
        for j in 0..self.py - 1 {
            for i in 0..self.px - 1 {
                let fg = [self.fg(i, j), self.fg(i + 1, j), self.fg(i + 1, j + 1), self.fg(i, j + 1)];
                if fg.iter().all(|b| *b) || !fg.iter().any(|b| *b) {
                    continue;
                }
                let edge = [self.horizontal(i, j), self.vertical(i + 1, j), self.horizontal(i, j + 1), self.vertical(i, j)];
                for k in 0..4 {
                    if fg[k] && !fg[(k + 1) % 4] {
                        // walk back to the edge where this foreground run began
                        let mut m = (k + 3) % 4;
                        while fg[m] || !fg[(m + 1) % 4] {
                            m = (m + 3) % 4;
                        }
                        next[edge[k]] = edge[m] as u32;
                    }
                }
            }
        }
        next
    }
}

fn finish_curve(
    level: f64,
    mut vertices: Vec<[f64; 2]>,
    mut crossings: Vec<[[isize; 2]; 2]>,
    grad: &VectorField,
) -> LevelCurve {
    // start at the leftmost-lowest vertex
    let start = (0..vertices.len())
        .min_by(|&a, &b| {
            let (p, q) = (vertices[a], vertices[b]);
            p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1]))
        })
        .unwrap_or(0);
    vertices.rotate_left(start);
    crossings.rotate_left(start);
    let n = vertices.len();
    let mut arclength = 0.0;
    let mut grad_at_midpoints = Vec::with_capacity(n);
    for k in 0..n {
        let (p, q) = (vertices[k], vertices[(k + 1) % n]);
        arclength += dist(p, q);
        let g = grad.bilinear([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
        grad_at_midpoints.push(libm::hypot(g[0], g[1]));
    }
    LevelCurve { level, vertices, arclength, grad_at_midpoints, crossings }
}

/// Closed oriented curves bounding `{f > t}`, ordered by leftmost-lowest vertex.
pub fn trace_essential_level(f: &ScalarField, t: f64) -> Result<Vec<LevelCurve>> {
    trace_with_gradient(f, t, &field::gradient(f))
}

/// As [`trace_essential_level`] with a precomputed `∇f`.
pub fn trace_with_gradient(f: &ScalarField, t: f64, grad: &VectorField) -> Result<Vec<LevelCurve>> {
    if !is_regular_level(f, t) {
        return Err(Error::NonRegularLevel(t));
    }
    let tracer = Tracer::new(f, t);
    let next = tracer.links();
    let mut seen = vec![false; next.len()];
    let mut curves = Vec::new();
    for start in 0..next.len() {
        if next[start] == u32::MAX || seen[start] {
            continue;
        }
        let mut vertices = Vec::new();
        let mut crossings = Vec::new();
        let mut link = start;
        while !seen[link] {
            seen[link] = true;
            let (p, cells) = tracer.crossing(link);
            vertices.push(p);
            crossings.push(cells);
            link = next[link] as usize;
        }
        debug_assert_eq!(link, start);
        curves.push(finish_curve(t, vertices, crossings, grad));
    }
    curves.sort_by(|a, b| {
        let (p, q) = (a.vertices[0], b.vertices[0]);
        p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1]))
    });
    Ok(curves)
}

#[inline]
fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

/// Closed-segment intersection test.
pub fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0)) && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0)) {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// True when no two non-adjacent segments of the closed polyline meet and no
/// segment is degenerate. Segments are bucketed on a uniform grid sized to the
/// longest segment, so only nearby pairs are tested.
pub fn is_simple_polyline(vertices: &[[f64; 2]]) -> bool {
    let n = vertices.len();
    if n < 3 {
        return false;
    }
    let seg = |k: usize| (vertices[k], vertices[(k + 1) % n]);
    let mut cell = 0.0f64;
    for k in 0..n {
        let (a, b) = seg(k);
        if a == b {
            return false;
        }
        cell = cell.max(libm::fabs(b[0] - a[0])).max(libm::fabs(b[1] - a[1]));
    }
    let key = |v: f64| libm::floor(v / cell) as i64;
    let mut buckets: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for k in 0..n {
        let (a, b) = seg(k);
        for bx in key(a[0].min(b[0]))..=key(a[0].max(b[0])) {
            for by in key(a[1].min(b[1]))..=key(a[1].max(b[1])) {
                buckets.entry((bx, by)).or_default().push(k);
            }
        }
    }
    for members in buckets.values() {
        for (x, &k) in members.iter().enumerate() {
            for &m in &members[x + 1..] {
                let gap = k.abs_diff(m);
                if gap == 1 || gap == n - 1 {
                    // adjacent segments share exactly one endpoint; they only
                    // fail if they fold back onto each other
                    let (shared, p, q) = if (k + 1) % n == m { (seg(m).0, seg(k).0, seg(m).1) } else { (seg(k).0, seg(m).0, seg(k).1) };
                    if orient(shared, p, q) == 0.0 && (p[0] - shared[0]) * (q[0] - shared[0]) + (p[1] - shared[1]) * (q[1] - shared[1]) > 0.0 {
                        return false;
                    }
                    continue;
                }
                let (a, b) = seg(k);
                let (c, d) = seg(m);
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentNormalReport {
    pub rms_angle: f64,
    pub max_angle: f64,
    pub segments: usize,
    /// Segments skipped because `|∇f|` is below the floor there.
    pub excluded: usize,
}

/// Angle between the left normal of each segment and `∇f/|∇f|` at its midpoint.
pub fn check_tangent_normal(f: &ScalarField, c: &LevelCurve) -> TangentNormalReport {
    let grad = field::gradient(f);
    let floor = gradient_floor(f);
    let (mut sum, mut max, mut used, mut excluded) = (0.0, 0.0f64, 0usize, 0usize);
    for k in 0..c.len() {
        let (p, q) = c.segment(k);
        let normal = [-(q[1] - p[1]), q[0] - p[0]];
        let g = grad.bilinear([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
        if libm::hypot(g[0], g[1]) <= floor {
            excluded += 1;
            continue;
        }
        let cross = normal[0] * g[1] - normal[1] * g[0];
        let dot = normal[0] * g[0] + normal[1] * g[1];
        let angle = libm::atan2(libm::fabs(cross), dot);
        sum += angle * angle;
        max = max.max(angle);
        used += 1;
    }
    let rms_angle = if used > 0 { libm::sqrt(sum / used as f64) } else { 0.0 };
    TangentNormalReport { rms_angle, max_angle: max, segments: c.len(), excluded }
}

/// Travel-time weight `a = |γ'| / |∇f|∘γ` per segment.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveWeight {
    /// `1 / max(|∇f|, floor)` at each segment midpoint (per unit length).
    pub density: Vec<f64>,
    /// `segment length · density`: time spent on each segment.
    pub travel: Vec<f64>,
    pub total: f64,
    /// Segments where the floor replaced `|∇f|`.
    pub floored: Vec<usize>,
}

pub fn curve_weight(f: &ScalarField, c: &LevelCurve) -> CurveWeight {
    weight_with_floor(c, gradient_floor(f))
}

pub(crate) fn weight_with_floor(c: &LevelCurve, floor: f64) -> CurveWeight {
    let lengths = c.segment_lengths();
    let mut density = Vec::with_capacity(c.len());
    let mut travel = Vec::with_capacity(c.len());
    let mut floored = Vec::new();
    for (k, (g, l)) in c.grad_at_midpoints.iter().zip(&lengths).enumerate() {
        let speed = if *g > floor {
            *g
        } else {
            floored.push(k);
            floor
        };
        density.push(1.0 / speed);
        travel.push(l / speed);
    }
    let total = travel.iter().sum();
    CurveWeight { density, travel, total, floored }
}

/// A level curve resampled at equal Hamiltonian travel-time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianCurve {
    pub curve: LevelCurve,
    pub time_step: f64,
    /// `|γ̃(k+1) - γ̃(k)| / time_step`.
    pub node_speeds: Vec<f64>,
    /// `|∇f|` interpolated at each resampled node.
    pub grad_at_nodes: Vec<f64>,
    pub total_time: f64,
}

/// Position at travel time `s` along a curve with the given per-segment times.
pub(crate) fn point_at_time(c: &LevelCurve, cumulative: &[f64], s: f64) -> [f64; 2] {
    let total = *cumulative.last().unwrap();
    let s = s - total * libm::floor(s / total);
    let k = cumulative.partition_point(|v| *v <= s).clamp(1, cumulative.len() - 1) - 1;
    let span = cumulative[k + 1] - cumulative[k];
    let r = if span > 0.0 { ((s - cumulative[k]) / span).clamp(0.0, 1.0) } else { 0.0 };
    let (p, q) = c.segment(k);
    [p[0] + r * (q[0] - p[0]), p[1] + r * (q[1] - p[1])]
}

pub(crate) fn cumulative(travel: &[f64]) -> Vec<f64> {
    let mut acc = Vec::with_capacity(travel.len() + 1);
    let mut s = 0.0;
    acc.push(0.0);
    for t in travel {
        s += t;
        acc.push(s);
    }
    acc
}

pub fn hamiltonian_parametrization(f: &ScalarField, c: &LevelCurve) -> Result<HamiltonianCurve> {
    let w = curve_weight(f, c);
    if !w.floored.is_empty() {
        return Err(Error::GradientFloor { segments: w.floored });
    }
    let grad = field::gradient(f);
    let cum = cumulative(&w.travel);
    let n = c.len();
    let time_step = w.total / n as f64;
    let vertices: Vec<[f64; 2]> = (0..n).map(|m| point_at_time(c, &cum, m as f64 * time_step)).collect();
    let node_speeds = (0..n).map(|m| dist(vertices[m], vertices[(m + 1) % n]) / time_step).collect();
    let grad_at_nodes = vertices
        .iter()
        .map(|p| {
            let g = grad.bilinear(*p);
            libm::hypot(g[0], g[1])
        })
        .collect();
    let mut curve = LevelCurve {
        level: c.level,
        vertices,
        arclength: 0.0,
        grad_at_midpoints: Vec::new(),
        crossings: Vec::new(),
    };
    let mut length = 0.0;
    for k in 0..n {
        let (p, q) = curve.segment(k);
        length += dist(p, q);
        let g = grad.bilinear([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
        curve.grad_at_midpoints.push(libm::hypot(g[0], g[1]));
    }
    curve.arclength = length;
    Ok(HamiltonianCurve { curve, time_step, node_speeds, grad_at_nodes, total_time: w.total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;
    use crate::region::RegionMask;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(n, n, 1.0, [0.0, 0.0]).unwrap()
    }

    #[test]
    fn binary_field_single_level() {
        let f = RegionMask::from_fn(grid(5), |i, j| (1..4).contains(&i) && (1..4).contains(&j)).to_field();
        assert_eq!(regular_levels(&f, 1).unwrap(), vec![0.5]);
        assert_eq!(regular_levels(&f, 7).unwrap(), vec![0.5]);
    }

    #[test]
    fn single_cell_gives_a_diamond() {
        let mut f = ScalarField::zeros(grid(3));
        f.values[4] = 1.0;
        let c = trace_essential_level(&f, 0.5).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].len(), 4);
        assert!(c[0].signed_area() > 0.0);
        assert!((c[0].arclength - 4.0 * libm::sqrt(0.5)).abs() < 1e-12);
        assert!(is_simple_polyline(&c[0].vertices));
    }

    #[test]
    fn diagonal_cells_are_traced_separately() {
        let mut f = ScalarField::zeros(grid(4));
        f.values[grid(4).index(1, 1)] = 1.0;
        f.values[grid(4).index(2, 2)] = 1.0;
        let c = trace_essential_level(&f, 0.5).unwrap();
        assert_eq!(c.len(), 2);
        for cv in &c {
            assert!(is_simple_polyline(&cv.vertices));
        }
    }

    #[test]
    fn hole_boundary_runs_clockwise() {
        let f = RegionMask::from_fn(grid(7), |i, j| (1..6).contains(&i) && (1..6).contains(&j) && (i, j) != (3, 3)).to_field();
        let c = trace_essential_level(&f, 0.5).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c[0].signed_area() > 0.0);
        assert!(c[1].signed_area() < 0.0);
    }

    #[test]
    fn sample_value_is_not_regular() {
        let mut f = ScalarField::zeros(grid(3));
        f.values[4] = 1.0;
        assert_eq!(trace_essential_level(&f, 1.0).unwrap_err(), Error::NonRegularLevel(1.0));
        assert!(trace_essential_level(&f, 0.0).is_err());
    }

    #[test]
    fn self_touching_polyline_is_rejected() {
        let figure_eight = [[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(!is_simple_polyline(&figure_eight));
        let square = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!(is_simple_polyline(&square));
    }

    #[test]
    fn reversed_keeps_midpoint_samples_aligned() {
        let f = ScalarField::from_fn(GridSpec::centered_square(32, 1.0), |x, y| f64::max(0.0, 1.0 - 2.0 * x * x - y * y));
        let c = &trace_essential_level(&f, 0.3).unwrap()[0];
        let r = c.reversed();
        assert!(r.signed_area() < 0.0);
        for k in 0..r.len() {
            let (p, q) = r.segment(k);
            let g = field::gradient(&f).bilinear([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
            assert!((libm::hypot(g[0], g[1]) - r.grad_at_midpoints[k]).abs() < 1e-12);
        }
    }
}
