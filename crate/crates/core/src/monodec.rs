//! Greedy decomposition of a stream function into monotone pieces.
//!
//! Every step works on one sign part `p` of the current residual (`f⁺` or
//! `f⁻`), both of which are nonnegative:
//!
//! 1. pick a regional-maximum plateau `P` of `p` at level `a`;
//! 2. `g(x)` = best path value from `x` to `P`, where a 4-path is worth the
//!    minimum of `p` along it. Then `{g > t}` is exactly the component of
//!    `{p > t}` that contains `P`, for every `t < a`;
//! 3. `h(x)` = cheapest 8-path from `x` to the grid border, a path costing
//!    the maximum of `g` along it. Then `{h > t}` is the saturation of
//!    `{g > t}`.
//!
//! Each of the two maps preserves total variation exactly, edge by edge:
//! `TV(p) = TV(g) + TV(p - g)` and `TV(g) = TV(h) + TV(h - g)`.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::field::{self, ScalarField};
use crate::maxtree::MaxTree;
use crate::region::{self, RegionMask};

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneComponent {
    pub field: ScalarField,
    /// +1 or -1.
    pub sign: i8,
    pub tv: f64,
    pub grad_support: RegionMask,
}

impl MonotoneComponent {
    pub fn new(field: ScalarField, sign: i8) -> Self {
        let tv = field::total_variation(&field);
        let grad_support = grad_support(&field);
        Self { field, sign, tv, grad_support }
    }
}

/// Cells where the central-difference gradient does not vanish.
pub fn grad_support(f: &ScalarField) -> RegionMask {
    let g = field::gradient(f);
    let bits = g.vx.iter().zip(&g.vy).map(|(a, b)| *a != 0.0 || *b != 0.0).collect();
    RegionMask { grid: f.grid, bits }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperlevelFamily {
    pub thresholds: Vec<f64>,
    pub masks: Vec<RegionMask>,
}

impl SuperlevelFamily {
    /// The family `{f ≥ t}` over the positive breakpoints of `f`.
    pub fn of_field(f: &ScalarField) -> Self {
        let thresholds: Vec<f64> = f.breakpoints().into_iter().filter(|t| *t > 0.0).collect();
        let masks = thresholds
            .iter()
            .map(|t| RegionMask { grid: f.grid, bits: f.values.iter().map(|v| *v >= *t).collect() })
            .collect();
        Self { thresholds, masks }
    }
}

/// `w(x) = max { t_k : x ∈ masks[k] }`, 0 where no mask holds. Then
/// `{w ≥ t_k} = masks[k]` and `{w > t_k} = masks[k + 1]`.
pub fn function_from_superlevels(fam: &SuperlevelFamily) -> Result<ScalarField> {
    if fam.thresholds.len() != fam.masks.len() {
        return Err(Error::InvalidArgument("thresholds and masks differ in length".into()));
    }
    let Some(first) = fam.masks.first() else {
        return Err(Error::InvalidArgument("empty superlevel family".into()));
    };
    let grid = first.grid;
    for k in 0..fam.masks.len() {
        if !fam.masks[k].grid.same_as(&grid) {
            return Err(Error::GridMismatch);
        }
        if !fam.thresholds[k].is_finite() {
            return Err(Error::InvalidArgument("non-finite threshold".into()));
        }
        if k > 0 {
            if fam.thresholds[k] <= fam.thresholds[k - 1] {
                return Err(Error::InvalidArgument("thresholds must be strictly increasing".into()));
            }
            if !fam.masks[k].is_subset_of(&fam.masks[k - 1]) {
                return Err(Error::NotNested { index: k - 1 });
            }
        }
    }
    let mut w = ScalarField::zeros(grid);
    for (t, m) in fam.thresholds.iter().zip(&fam.masks) {
        for k in m.indices() {
            w.values[k] = *t;
        }
    }
    Ok(w)
}

/// Every strict superlevel `{f > t}` with `t ≥ 0` is 4-connected, and so is
/// every `{f < -t}`.
pub fn is_monotone(f: &ScalarField) -> bool {
    MaxTree::build(&f.positive_part()).leaves_above(0.0).len() <= 1
        && MaxTree::build(&f.negative_part()).leaves_above(0.0).len() <= 1
}

#[derive(Clone, Copy)]
struct Key {
    v: f64,
    cell: usize,
}

impl PartialEq for Key {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Key {}
impl PartialOrd for Key {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Key {
    fn cmp(&self, o: &Self) -> Ordering {
        self.v.total_cmp(&o.v).then(o.cell.cmp(&self.cell))
    }
}

fn neighbors(nx: usize, ny: usize, p: usize, eight: bool, out: &mut Vec<usize>) {
    out.clear();
    let (i, j) = ((p % nx) as isize, (p / nx) as isize);
    for dj in -1isize..=1 {
        for di in -1isize..=1 {
            if (di == 0 && dj == 0) || (!eight && di != 0 && dj != 0) {
                continue;
            }
            let (a, b) = (i + di, j + dj);
            if a >= 0 && b >= 0 && (a as usize) < nx && (b as usize) < ny {
                out.push(b as usize * nx + a as usize);
            }
        }
    }
}

/// Maximin path value to `seed` over 4-paths.
fn flood_to_seed(f: &ScalarField, seed: &RegionMask) -> Vec<f64> {
    let (nx, ny) = (f.grid.nx, f.grid.ny);
    let mut best = vec![f64::NEG_INFINITY; f.grid.len()];
    let mut done = vec![false; f.grid.len()];
    let mut heap = BinaryHeap::new();
    for k in seed.indices() {
        best[k] = f.values[k];
        heap.push(Key { v: f.values[k], cell: k });
    }
    let mut nb = Vec::with_capacity(4);
    while let Some(Key { v, cell }) = heap.pop() {
        if done[cell] {
            continue;
        }
        done[cell] = true;
        neighbors(nx, ny, cell, false, &mut nb);
        for &q in &nb {
            let cand = v.min(f.values[q]);
            if !done[q] && cand > best[q] {
                best[q] = cand;
                heap.push(Key { v: cand, cell: q });
            }
        }
    }
    best
}

/// Minimax path value to the grid border over 8-paths.
fn flood_from_border(g: &ScalarField) -> Vec<f64> {
    let (nx, ny) = (g.grid.nx, g.grid.ny);
    let mut best = vec![f64::INFINITY; g.grid.len()];
    let mut done = vec![false; g.grid.len()];
    let mut heap = BinaryHeap::new();
    for k in 0..g.grid.len() {
        let (i, j) = (k % nx, k / nx);
        if i == 0 || j == 0 || i + 1 == nx || j + 1 == ny {
            // The virtual exterior is 0 and g ≥ 0, so a border cell's cost is its own value.
            best[k] = g.values[k];
            heap.push(core::cmp::Reverse(Key { v: g.values[k], cell: k }));
        }
    }
    let mut nb = Vec::with_capacity(8);
    while let Some(core::cmp::Reverse(Key { v, cell })) = heap.pop() {
        if done[cell] {
            continue;
        }
        done[cell] = true;
        neighbors(nx, ny, cell, true, &mut nb);
        for &q in &nb {
            let cand = v.max(g.values[q]);
            if !done[q] && cand < best[q] {
                best[q] = cand;
                heap.push(core::cmp::Reverse(Key { v: cand, cell: q }));
            }
        }
    }
    best
}

fn require_nonnegative(f: &ScalarField) -> Result<()> {
    if f.values.iter().any(|v| *v < 0.0) {
        return Err(Error::InvalidArgument("expected a nonnegative field".into()));
    }
    Ok(())
}

/// Splits `f ≥ 0` into the branch `g` that follows `seed` down through the
/// superlevel sets, capped at the seed's lowest value, and the rest.
pub fn extract_indecomposable(f: &ScalarField, seed: &RegionMask) -> Result<(ScalarField, ScalarField)> {
    require_nonnegative(f)?;
    if !seed.grid.same_as(&f.grid) {
        return Err(Error::GridMismatch);
    }
    if seed.is_empty() {
        return Err(Error::InvalidSeed("empty seed".into()));
    }
    let cap = seed.indices().map(|k| f.values[k]).fold(f64::INFINITY, f64::min);
    let below = f.breakpoints().into_iter().filter(|t| *t < cap).fold(f64::NEG_INFINITY, f64::max);
    if !(below >= 0.0) {
        return Err(Error::InvalidSeed("seed is not inside a positive superlevel set".into()));
    }
    // The seed must coincide with a component of {f > below}.
    let sup = RegionMask::superlevel(f, below);
    let start = seed.indices().next().unwrap();
    let comp = region::components(&sup).into_iter().find(|c| c.bits[start]).unwrap();
    if comp != *seed {
        return Err(Error::InvalidSeed("seed is not a component of a superlevel set".into()));
    }
    let mu = flood_to_seed(f, seed);
    let g = ScalarField { grid: f.grid, values: mu.iter().map(|m| m.min(cap)).collect() };
    let residual = f.zip_with(&g, |a, b| a - b)?;
    Ok((g, residual))
}

/// Fills the holes of every superlevel set of `g`.
pub fn extract_saturated(g: &ScalarField) -> Result<ScalarField> {
    require_nonnegative(g)?;
    let leaves = MaxTree::build(g).leaves_above(0.0).len();
    if leaves > 1 {
        return Err(Error::NotIndecomposable { components: leaves });
    }
    Ok(ScalarField { grid: g.grid, values: flood_from_border(g) })
}

/// 4-connected plateau of equal values through `cell`.
fn plateau(f: &ScalarField, cell: usize) -> RegionMask {
    let v = f.values[cell];
    let (nx, ny) = (f.grid.nx, f.grid.ny);
    let mut m = RegionMask::empty(f.grid);
    m.bits[cell] = true;
    let mut stack = vec![cell];
    let mut nb = Vec::with_capacity(4);
    while let Some(p) = stack.pop() {
        neighbors(nx, ny, p, false, &mut nb);
        for &q in &nb {
            if !m.bits[q] && f.values[q] == v {
                m.bits[q] = true;
                stack.push(q);
            }
        }
    }
    m
}

/// One scored extraction.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub sign: i8,
    pub leaf_cell: usize,
    pub level: f64,
    pub tv: f64,
}

/// Saturated branch of `part` through the leaf plateau at `cell`.
fn branch(part: &ScalarField, cell: usize) -> ScalarField {
    let seed = plateau(part, cell);
    let g = ScalarField { grid: part.grid, values: flood_to_seed(part, &seed) };
    ScalarField { grid: part.grid, values: flood_from_border(&g) }
}

/// Every leaf of the max-trees of `f⁺` and `f⁻` with the TV of its
/// extraction; `f⁺` leaves first, each part ordered by leaf index.
pub fn candidates(f: &ScalarField) -> Vec<Candidate> {
    let mut out = Vec::new();
    for (sign, part) in [(1i8, f.positive_part()), (-1i8, f.negative_part())] {
        for leaf in MaxTree::build(&part).leaves_above(0.0) {
            let h = branch(&part, leaf.cell);
            out.push(Candidate { sign, leaf_cell: leaf.cell, level: leaf.level, tv: field::total_variation(&h) });
        }
    }
    out
}

fn signed(h: ScalarField, sign: i8) -> ScalarField {
    if sign > 0 {
        h
    } else {
        h.map(|v| -v)
    }
}

/// Extracts the candidate of largest TV (first one on ties).
pub fn extract_monotone(f: &ScalarField) -> Result<(MonotoneComponent, ScalarField)> {
    if field::total_variation(f) == 0.0 {
        return Err(Error::NullFunction);
    }
    let cands = candidates(f);
    let best = cands.iter().fold(None::<&Candidate>, |b, c| match b {
        Some(b) if b.tv >= c.tv => Some(b),
        _ => Some(c),
    });
    let Some(best) = best else {
        return Err(Error::NullFunction);
    };
    let part = if best.sign > 0 { f.positive_part() } else { f.negative_part() };
    let h = signed(branch(&part, best.leaf_cell), best.sign);
    let residual = f.zip_with(&h, |a, b| a - b)?;
    Ok((MonotoneComponent::new(h, best.sign), residual))
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub components: Vec<MonotoneComponent>,
    pub residual: ScalarField,
}

pub const DEFAULT_EPS_STOP: f64 = 1e-12;
pub const DEFAULT_MAX_COMPONENTS: usize = 1024;

pub fn decompose(f: &ScalarField, eps_stop: f64, max_components: usize) -> Result<Decomposition> {
    if !(eps_stop >= 0.0) {
        return Err(Error::InvalidArgument("eps_stop must be nonnegative".into()));
    }
    let tv_f = field::total_variation(f);
    let mut residual = f.clone();
    let mut components = Vec::new();
    while components.len() < max_components {
        let tv_r = field::total_variation(&residual);
        if tv_r == 0.0 || tv_r <= eps_stop * tv_f {
            break;
        }
        let (c, r) = extract_monotone(&residual)?;
        components.push(c);
        residual = r;
    }
    Ok(Decomposition { components, residual })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    pub max_pointwise_defect: f64,
    pub tv_field: f64,
    pub tv_sum: f64,
    pub relative_tv_defect: f64,
    /// `(i, j, shared cells)` for every pair with overlapping gradient support.
    pub overlaps: Vec<(usize, usize, usize)>,
    pub monotone: Vec<bool>,
}

impl DecompositionReport {
    pub fn disjoint_supports(&self) -> bool {
        self.overlaps.is_empty()
    }
}

pub fn verify_decomposition(f: &ScalarField, comps: &[MonotoneComponent]) -> Result<DecompositionReport> {
    let mut sum = ScalarField::zeros(f.grid);
    for c in comps {
        if !c.field.grid.same_as(&f.grid) {
            return Err(Error::GridMismatch);
        }
        for (s, v) in sum.values.iter_mut().zip(&c.field.values) {
            *s += v;
        }
    }
    let max_pointwise_defect = f.values.iter().zip(&sum.values).fold(0.0, |m, (a, b)| f64::max(m, libm::fabs(a - b)));
    let tv_field = field::total_variation(f);
    let tv_sum: f64 = comps.iter().map(|c| c.tv).sum();
    let relative_tv_defect = if tv_field > 0.0 { libm::fabs(tv_field - tv_sum) / tv_field } else { libm::fabs(tv_sum) };
    let mut overlaps = Vec::new();
    for i in 0..comps.len() {
        for j in i + 1..comps.len() {
            let shared = comps[i].grad_support.intersection(&comps[j].grad_support).count();
            if shared > 0 {
                overlaps.push((i, j, shared));
            }
        }
    }
    let monotone = comps.iter().map(|c| is_monotone(&c.field)).collect();
    Ok(DecompositionReport { max_pointwise_defect, tv_field, tv_sum, relative_tv_defect, overlaps, monotone })
}
