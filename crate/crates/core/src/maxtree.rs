//! Component tree of the strict superlevel sets of a field (4-connected).
//!
//! Built with the usual union-find pass over cells sorted by decreasing
//! value, followed by level canonicalization. A node is represented by its
//! canonical cell; its level is the value of that cell.

use alloc::vec;
use alloc::vec::Vec;

use crate::field::ScalarField;

pub struct MaxTree {
    /// Parent cell of every cell; canonical cells of the root point at themselves.
    pub parent: Vec<usize>,
    /// Cells by decreasing value, ties by increasing index.
    pub order: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leaf {
    /// Smallest linear index on the leaf plateau.
    pub cell: usize,
    pub level: f64,
}

fn find(zpar: &mut [usize], mut p: usize) -> usize {
    let mut root = p;
    while zpar[root] != root {
        root = zpar[root];
    }
    while zpar[p] != root {
        let next = zpar[p];
        zpar[p] = root;
        p = next;
    }
    root
}

impl MaxTree {
    pub fn build(f: &ScalarField) -> Self {
        let n = f.grid.len();
        let nx = f.grid.nx;
        let ny = f.grid.ny;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| f.values[b].partial_cmp(&f.values[a]).unwrap().then(a.cmp(&b)));

        let mut parent = vec![usize::MAX; n];
        let mut zpar = vec![usize::MAX; n];
        for &p in &order {
            parent[p] = p;
            zpar[p] = p;
            let (i, j) = (p % nx, p / nx);
            let mut nb = [usize::MAX; 4];
            if i > 0 {
                nb[0] = p - 1;
            }
            if i + 1 < nx {
                nb[1] = p + 1;
            }
            if j > 0 {
                nb[2] = p - nx;
            }
            if j + 1 < ny {
                nb[3] = p + nx;
            }
            for q in nb {
                if q == usize::MAX || zpar[q] == usize::MAX {
                    continue;
                }
                let r = find(&mut zpar, q);
                if r != p {
                    parent[r] = p;
                    zpar[r] = p;
                }
            }
        }
        for &p in order.iter().rev() {
            let q = parent[p];
            if f.values[parent[q]] == f.values[q] {
                parent[p] = parent[q];
            }
        }
        Self { parent, order, values: f.values.clone() }
    }

    #[inline]
    pub fn is_canonical(&self, p: usize) -> bool {
        let q = self.parent[p];
        q == p || self.values[q] != self.values[p]
    }

    /// Canonical cell of the node containing `p` at its own level.
    #[inline]
    pub fn node_of(&self, p: usize) -> usize {
        if self.is_canonical(p) {
            p
        } else {
            self.parent[p]
        }
    }

    pub fn node_count(&self) -> usize {
        (0..self.parent.len()).filter(|&p| self.is_canonical(p)).count()
    }

    /// Regional-maximum plateaus, ordered by their smallest cell index.
    pub fn leaves(&self) -> Vec<Leaf> {
        let n = self.parent.len();
        let mut has_child = vec![false; n];
        for p in 0..n {
            if self.is_canonical(p) && self.parent[p] != p {
                has_child[self.parent[p]] = true;
            }
        }
        let mut min_cell = vec![usize::MAX; n];
        for p in 0..n {
            let c = self.node_of(p);
            if !has_child[c] {
                min_cell[c] = min_cell[c].min(p);
            }
        }
        let mut out: Vec<Leaf> = (0..n)
            .filter(|&c| self.is_canonical(c) && !has_child[c])
            .map(|c| Leaf { cell: min_cell[c], level: self.values[c] })
            .collect();
        out.sort_by_key(|l| l.cell);
        out
    }

    /// Leaves strictly above `floor`.
    pub fn leaves_above(&self, floor: f64) -> Vec<Leaf> {
        self.leaves().into_iter().filter(|l| l.level > floor).collect()
    }
}
