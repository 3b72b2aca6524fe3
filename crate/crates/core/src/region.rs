//! Grid sets of finite perimeter.
//!
//! Foreground is 4-connected and background 8-connected, globally. With that
//! pairing every perimeter edge of a 4-component borders exactly one
//! background 8-component, so perimeter additivity and the saturation
//! identity hold as integer equalities, and "up to negligible sets" becomes
//! plain set equality.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarField};

const UNLABELED: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    pub grid: GridSpec,
    pub bits: Vec<bool>,
}

impl RegionMask {
    pub fn empty(grid: GridSpec) -> Self {
        Self { grid, bits: vec![false; grid.len()] }
    }

    pub fn new(grid: GridSpec, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != grid.len() {
            return Err(Error::InvalidField(alloc::format!(
                "length mismatch: expected {} cells, found {}",
                grid.len(),
                bits.len()
            )));
        }
        Ok(Self { grid, bits })
    }

    pub fn from_fn(grid: GridSpec, pred: impl Fn(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                bits.push(pred(i, j));
            }
        }
        Self { grid, bits }
    }

    /// Strict superlevel set `{f > t}`.
    pub fn superlevel(f: &ScalarField, t: f64) -> Self {
        Self { grid: f.grid, bits: f.values.iter().map(|v| *v > t).collect() }
    }

    /// Strict sublevel set `{f < t}`.
    pub fn sublevel(f: &ScalarField, t: f64) -> Self {
        Self { grid: f.grid, bits: f.values.iter().map(|v| *v < t).collect() }
    }

    #[inline]
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.bits[j * self.grid.nx + i]
    }

    /// Zero-extended lookup.
    #[inline]
    pub fn get(&self, i: isize, j: isize) -> bool {
        i >= 0
            && j >= 0
            && (i as usize) < self.grid.nx
            && (j as usize) < self.grid.ny
            && self.bits[j as usize * self.grid.nx + i as usize]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn area(&self) -> f64 {
        self.count() as f64 * self.grid.h * self.grid.h
    }

    /// Number of foreground/background 4-adjacent pairs, exterior included.
    pub fn perimeter_edges(&self) -> u64 {
        let mut n = 0u64;
        self.grid.for_each_edge(|p, q| {
            if self.bits[p] != q.is_some_and(|q| self.bits[q]) {
                n += 1;
            }
        });
        n
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter_edges() as f64 * self.grid.h
    }

    pub fn union(&self, other: &RegionMask) -> Self {
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect();
        Self { grid: self.grid, bits }
    }

    pub fn intersection(&self, other: &RegionMask) -> Self {
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect();
        Self { grid: self.grid, bits }
    }

    pub fn is_subset_of(&self, other: &RegionMask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, b)| **b).map(|(k, _)| k)
    }

    /// Cell-index bounding box `[i_min, j_min, i_max, j_max]`, inclusive.
    pub fn bounding_box(&self) -> Option<[usize; 4]> {
        let mut bb: Option<[usize; 4]> = None;
        for k in self.indices() {
            let (i, j) = self.grid.coords(k);
            bb = Some(match bb {
                None => [i, j, i, j],
                Some([a, b, c, d]) => [a.min(i), b.min(j), c.max(i), d.max(j)],
            });
        }
        bb
    }

    /// The bounding box grown by `margin` cells, as a mask on its own grid.
    /// Perimeter, components and holes are unchanged for `margin ≥ 1`.
    pub fn cropped(&self, margin: usize) -> RegionMask {
        let Some([i0, j0, i1, j1]) = self.bounding_box() else { return self.clone() };
        let (nx, ny) = (i1 - i0 + 1 + 2 * margin, j1 - j0 + 1 + 2 * margin);
        let c = self.grid.center(i0, j0);
        let h = self.grid.h;
        let origin = [c[0] - margin as f64 * h, c[1] - margin as f64 * h];
        let grid = GridSpec { nx, ny, h, origin };
        let (oi, oj) = (i0 as isize - margin as isize, j0 as isize - margin as isize);
        RegionMask::from_fn(grid, |i, j| self.get(i as isize + oi, j as isize + oj))
    }

    /// 0/1 field on the same grid.
    pub fn to_field(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.bits.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect(),
        }
    }
}

/// Connected-component labels of the cells where `member` holds.
/// Returns the label plane (`u32::MAX` outside) and the number of labels,
/// numbered in order of their smallest linear index.
pub(crate) fn label(grid: &GridSpec, member: &[bool], eight: bool) -> (Vec<u32>, usize) {
    let (nx, ny) = (grid.nx as isize, grid.ny as isize);
    let mut labels = vec![UNLABELED; member.len()];
    let mut stack = Vec::new();
    let mut next = 0u32;
    for start in 0..member.len() {
        if !member[start] || labels[start] != UNLABELED {
            continue;
        }
        labels[start] = next;
        stack.push(start);
        while let Some(k) = stack.pop() {
            let (i, j) = ((k % grid.nx) as isize, (k / grid.nx) as isize);
            for dj in -1isize..=1 {
                for di in -1isize..=1 {
                    if (di == 0 && dj == 0) || (!eight && di != 0 && dj != 0) {
                        continue;
                    }
                    let (a, b) = (i + di, j + dj);
                    if a < 0 || b < 0 || a >= nx || b >= ny {
                        continue;
                    }
                    let q = (b * nx + a) as usize;
                    if member[q] && labels[q] == UNLABELED {
                        labels[q] = next;
                        stack.push(q);
                    }
                }
            }
        }
        next += 1;
    }
    (labels, next as usize)
}

fn split_labels(grid: &GridSpec, labels: &[u32], n: usize, keep: impl Fn(usize) -> bool) -> Vec<RegionMask> {
    let mut out: Vec<RegionMask> = (0..n).map(|_| RegionMask::empty(*grid)).collect();
    for (k, l) in labels.iter().enumerate() {
        if *l != UNLABELED {
            out[*l as usize].bits[k] = true;
        }
    }
    let mut out: Vec<RegionMask> = out.into_iter().enumerate().filter(|(l, _)| keep(*l)).map(|(_, m)| m).collect();
    // Labels are already in order of smallest index, so a stable sort by
    // descending area gives the documented order.
    out.sort_by_key(|m| core::cmp::Reverse(m.count()));
    out
}

/// 4-connected components of the foreground, by descending area then by
/// smallest linear index.
pub fn components(mask: &RegionMask) -> Vec<RegionMask> {
    let (labels, n) = label(&mask.grid, &mask.bits, false);
    split_labels(&mask.grid, &labels, n, |_| true)
}

pub fn component_count(mask: &RegionMask) -> usize {
    label(&mask.grid, &mask.bits, false).1
}

/// Both sides of `P(E) = Σ P(Eᵢ)` as integer edge counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdditivityReport {
    pub mask_edges: u64,
    pub component_edges: u64,
    pub components: usize,
}

impl AdditivityReport {
    pub fn exact(&self) -> bool {
        self.mask_edges == self.component_edges
    }
}

pub fn perimeter_additivity_check(mask: &RegionMask) -> AdditivityReport {
    let comps = components(mask);
    AdditivityReport {
        mask_edges: mask.perimeter_edges(),
        component_edges: comps.iter().map(RegionMask::perimeter_edges).sum(),
        components: comps.len(),
    }
}

/// Background 8-components that do not reach the grid border.
fn enclosed_background(mask: &RegionMask) -> (Vec<u32>, usize, Vec<bool>) {
    let bg: Vec<bool> = mask.bits.iter().map(|b| !*b).collect();
    let (labels, n) = label(&mask.grid, &bg, true);
    let mut outer = vec![false; n];
    let GridSpec { nx, ny, .. } = mask.grid;
    for (k, l) in labels.iter().enumerate() {
        if *l == UNLABELED {
            continue;
        }
        let (i, j) = (k % nx, k / nx);
        if i == 0 || j == 0 || i + 1 == nx || j + 1 == ny {
            outer[*l as usize] = true;
        }
    }
    (labels, n, outer)
}

/// Holes of an indecomposable mask.
pub fn holes(mask: &RegionMask) -> Result<Vec<RegionMask>> {
    let n = component_count(mask);
    if n != 1 {
        return Err(Error::NotIndecomposable { components: n });
    }
    let (labels, n, outer) = enclosed_background(mask);
    Ok(split_labels(&mask.grid, &labels, n, |l| !outer[l]))
}

/// `mask` together with every background region it encloses. For a
/// decomposable mask this is the union of the per-component saturations:
/// a bounded background 8-component is always enclosed by a single
/// foreground 4-component.
pub fn saturate(mask: &RegionMask) -> RegionMask {
    let (labels, _, outer) = enclosed_background(mask);
    let bits = mask
        .bits
        .iter()
        .zip(&labels)
        .map(|(b, l)| *b || (*l != UNLABELED && !outer[*l as usize]))
        .collect();
    RegionMask { grid: mask.grid, bits }
}

pub fn is_simple(mask: &RegionMask) -> bool {
    if component_count(mask) != 1 {
        return false;
    }
    let (_, _, outer) = enclosed_background(mask);
    outer.iter().all(|o| *o)
}

/// Both sides of `P(E) = P(sat E) + Σ P(Yᵢ)` as integer edge counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SaturationReport {
    pub mask_edges: u64,
    pub saturated_edges: u64,
    pub hole_edges: u64,
    pub holes: usize,
}

impl SaturationReport {
    pub fn exact(&self) -> bool {
        self.mask_edges == self.saturated_edges + self.hole_edges
    }
}

pub fn saturation_identity_check(mask: &RegionMask) -> Result<SaturationReport> {
    let mask = &mask.cropped(1);
    let hs = holes(mask)?;
    Ok(SaturationReport {
        mask_edges: mask.perimeter_edges(),
        saturated_edges: saturate(mask).perimeter_edges(),
        hole_edges: hs.iter().map(RegionMask::perimeter_edges).sum(),
        holes: hs.len(),
    })
}
