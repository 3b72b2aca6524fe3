//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use proptest::prelude::*;
use streamdec_core::{GridSpec, RegionMask, ScalarField};

pub fn unit_grid(nx: usize, ny: usize) -> GridSpec {
    GridSpec::new(nx, ny, 1.0, [0.0, 0.0]).unwrap()
}

/// Sample at `(i, j)`, zero outside the grid.
pub fn value(f: &ScalarField, i: isize, j: isize) -> f64 {
    let g = f.grid;
    if i < 0 || j < 0 || i >= g.nx as isize || j >= g.ny as isize {
        0.0
    } else {
        f.at(i as usize, j as usize)
    }
}

/// `h · Σ |f(p) - f(q)|` over all edges of the padded grid.
pub fn tv_oracle(f: &ScalarField) -> f64 {
    let g = f.grid;
    let mut s = 0.0;
    for j in -1..g.ny as isize {
        for i in -1..g.nx as isize {
            let c = value(f, i, j);
            s += (c - value(f, i + 1, j)).abs();
            s += (c - value(f, i, j + 1)).abs();
        }
    }
    s * g.h
}

/// Ordered pairs `(fg, bg)` across the boundary of `mask`, exterior included.
pub fn perimeter_pairs(mask: &RegionMask) -> BTreeSet<([isize; 2], [isize; 2])> {
    let mut out = BTreeSet::new();
    for idx in mask.indices() {
        let (i, j) = mask.grid.coords(idx);
        let (i, j) = (i as isize, j as isize);
        for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            if !mask.get(i + di, j + dj) {
                out.insert(([i, j], [i + di, j + dj]));
            }
        }
    }
    out
}

/// BFS labelling; `eight` selects 8-connectivity.
pub fn flood_components(grid: GridSpec, member: &dyn Fn(usize, usize) -> bool, eight: bool) -> Vec<Vec<(usize, usize)>> {
    let mut seen = vec![false; grid.len()];
    let mut out = Vec::new();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if seen[grid.index(i, j)] || !member(i, j) {
                continue;
            }
            let mut comp = Vec::new();
            let mut q = VecDeque::from([(i, j)]);
            seen[grid.index(i, j)] = true;
            while let Some((a, b)) = q.pop_front() {
                comp.push((a, b));
                for db in -1isize..=1 {
                    for da in -1isize..=1 {
                        if (da == 0 && db == 0) || (!eight && da != 0 && db != 0) {
                            continue;
                        }
                        let (x, y) = (a as isize + da, b as isize + db);
                        if x < 0 || y < 0 || x >= grid.nx as isize || y >= grid.ny as isize {
                            continue;
                        }
                        let (x, y) = (x as usize, y as usize);
                        if !seen[grid.index(x, y)] && member(x, y) {
                            seen[grid.index(x, y)] = true;
                            q.push_back((x, y));
                        }
                    }
                }
            }
            out.push(comp);
        }
    }
    out
}

/// Background cells not 8-reachable from outside the grid.
pub fn enclosed_oracle(mask: &RegionMask) -> Vec<bool> {
    let g = mask.grid;
    let (px, py) = (g.nx + 2, g.ny + 2);
    let padded = unit_grid(px, py);
    let bg = |i: usize, j: usize| i == 0 || j == 0 || i == px - 1 || j == py - 1 || !mask.contains(i - 1, j - 1);
    let outside = flood_components(padded, &bg, true).into_iter().find(|c| c.contains(&(0, 0))).unwrap();
    let mut reach = vec![false; padded.len()];
    for (i, j) in outside {
        reach[padded.index(i, j)] = true;
    }
    (0..g.len())
        .map(|k| {
            let (i, j) = g.coords(k);
            !mask.bits[k] && !reach[padded.index(i + 1, j + 1)]
        })
        .collect()
}

pub fn mask_strategy(max: usize) -> impl Strategy<Value = RegionMask> {
    (3..=max, 3..=max, 0.2f64..0.8).prop_flat_map(|(nx, ny, p)| {
        proptest::collection::vec(proptest::bool::weighted(p), nx * ny)
            .prop_map(move |bits| RegionMask::new(unit_grid(nx, ny), bits).unwrap())
    })
}

/// Zero boundary ring, values on a 1/8 lattice so ties are common.
pub fn field_strategy(max: usize) -> impl Strategy<Value = ScalarField> {
    (4..=max, 4..=max).prop_flat_map(|(nx, ny)| {
        proptest::collection::vec(-4i32..=8, nx * ny).prop_map(move |v| {
            let mut f = ScalarField::new(unit_grid(nx, ny), v.into_iter().map(|x| x as f64 / 8.0).collect()).unwrap();
            f.enforce_zero_boundary();
            f
        })
    })
}

/// Smooth-ish fields: sums of a few random radial bumps on a 24² grid.
pub fn bumps_strategy() -> impl Strategy<Value = ScalarField> {
    proptest::collection::vec((-0.5f64..0.5, -0.5f64..0.5, 0.15f64..0.4, -1.0f64..1.0), 1..4).prop_map(|bumps| {
        let grid = GridSpec::centered_square(24, 1.0);
        let mut f = ScalarField::from_fn(grid, |x, y| {
            bumps.iter().map(|(cx, cy, r, a)| a * (1.0 - ((x - cx).powi(2) + (y - cy).powi(2)) / (r * r)).max(0.0)).sum()
        });
        f.enforce_zero_boundary();
        f
    })
}
