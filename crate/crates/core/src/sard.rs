//! Weak Sard estimation: critical set, the positive-length level union `E*`,
//! pushforward histograms and densest-bin singularity scores.
//!
//! Mutual singularity with Lebesgue measure cannot be decided from samples.
//! A histogram is called singular-like when its densest bins covering a
//! fraction `δ` of the value range carry at least `threshold` of the mass.

use alloc::vec;
use alloc::vec::Vec;

use crate::curves;
use crate::error::{Error, Result};
use crate::field::{self, ScalarField};
use crate::monodec::{self, MonotoneComponent};
use crate::region::RegionMask;

pub const DEFAULT_EPS_GRAD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SardThresholds {
    pub eps_grad: f64,
    pub n_bins: usize,
    pub delta: f64,
    pub threshold: f64,
}

impl Default for SardThresholds {
    fn default() -> Self {
        Self { eps_grad: DEFAULT_EPS_GRAD, n_bins: 1024, delta: 0.01, threshold: 0.95 }
    }
}

/// Cells where `|∇f| ≤ eps_grad · max|∇f|`.
pub fn critical_set(f: &ScalarField, eps_grad: f64) -> RegionMask {
    let g = field::gradient_magnitude(f);
    let cut = eps_grad * g.iter().fold(0.0, |m, v| f64::max(m, *v));
    RegionMask { grid: f.grid, bits: g.iter().map(|v| *v <= cut).collect() }
}

/// Union of the 1-cell dilated rasterizations of traced level curves of
/// length at least `min_len`, over `n_levels` regular levels.
pub fn e_star(f: &ScalarField, min_len: f64, n_levels: usize) -> RegionMask {
    let grid = f.grid;
    let mut hit = RegionMask::empty(grid);
    let Ok(levels) = curves::regular_levels(f, n_levels.max(1)) else { return hit };
    let grad = field::gradient(f);
    for t in levels {
        let Ok(cs) = curves::trace_with_gradient(f, t, &grad) else { continue };
        for c in cs.iter().filter(|c| c.arclength >= min_len) {
            for k in 0..c.len() {
                let (p, q) = c.segment(k);
                let len = libm::hypot(q[0] - p[0], q[1] - p[1]);
                let steps = (libm::ceil(2.0 * len / grid.h) as usize).max(1);
                for s in 0..=steps {
                    let r = s as f64 / steps as f64;
                    let g = grid.to_grid([p[0] + r * (q[0] - p[0]), p[1] + r * (q[1] - p[1])]);
                    let (i, j) = (libm::floor(g[0]) as isize, libm::floor(g[1]) as isize);
                    if i >= 0 && j >= 0 && (i as usize) < grid.nx && (j as usize) < grid.ny {
                        hit.bits[grid.index(i as usize, j as usize)] = true;
                    }
                }
            }
        }
    }
    let mut out = hit.clone();
    for idx in hit.indices() {
        let (i, j) = grid.coords(idx);
        for dj in -1isize..=1 {
            for di in -1isize..=1 {
                let (a, b) = (i as isize + di, j as isize + dj);
                if a >= 0 && b >= 0 && (a as usize) < grid.nx && (b as usize) < grid.ny {
                    out.bits[grid.index(a as usize, b as usize)] = true;
                }
            }
        }
    }
    out
}

/// Binned `f_#(1_M h²)` over `[t_min, t_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PushforwardHistogram {
    pub t_min: f64,
    pub t_max: f64,
    pub masses: Vec<f64>,
    pub total: f64,
}

impl PushforwardHistogram {
    pub fn n_bins(&self) -> usize {
        self.masses.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.t_max - self.t_min) / self.n_bins() as f64
    }

    /// Histogram over an explicit value range; values outside are clamped.
    pub fn from_values(values: impl IntoIterator<Item = f64>, weight: f64, range: [f64; 2], n_bins: usize) -> Self {
        let n_bins = n_bins.max(1);
        let [lo, hi] = range;
        let mut masses = vec![0.0; n_bins];
        let mut count = 0usize;
        for v in values {
            let b = if hi > lo { libm::floor((v - lo) / (hi - lo) * n_bins as f64) } else { 0.0 };
            let b = if b.is_nan() || b < 0.0 { 0 } else { (b as usize).min(n_bins - 1) };
            masses[b] += weight;
            count += 1;
        }
        Self { t_min: lo, t_max: hi, masses, total: count as f64 * weight }
    }
}

/// Histogram of `f` over the mask cells on `[min f, max f]`, each cell weighing `h²`.
pub fn pushforward(f: &ScalarField, mask: &RegionMask, n_bins: usize) -> PushforwardHistogram {
    let h2 = f.grid.h * f.grid.h;
    PushforwardHistogram::from_values(mask.indices().map(|k| f.values[k]), h2, [f.min(), f.max()], n_bins)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreCurve {
    pub deltas: Vec<f64>,
    pub scores: Vec<f64>,
    pub n_bins: usize,
}

/// `score(δ)`: mass of the `⌊δ·n_bins⌋` densest bins over the total.
pub fn singularity_score(hist: &PushforwardHistogram, deltas: &[f64]) -> Result<ScoreCurve> {
    if !(hist.total > 0.0) {
        return Err(Error::EmptyPushforward);
    }
    let mut sorted = hist.masses.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut prefix = Vec::with_capacity(sorted.len() + 1);
    let mut acc = 0.0;
    prefix.push(0.0);
    for m in &sorted {
        acc += m;
        prefix.push(acc);
    }
    let n = hist.n_bins();
    let scores = deltas
        .iter()
        .map(|d| {
            let k = (libm::floor(d * n as f64 + 1e-9).max(0.0) as usize).min(n);
            (prefix[k] / acc).min(1.0)
        })
        .collect();
    Ok(ScoreCurve { deltas: deltas.to_vec(), scores, n_bins: n })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SardVerdict {
    SingularLike,
    AbsolutelyContinuousPart,
}

impl SardVerdict {
    pub fn name(self) -> &'static str {
        match self {
            SardVerdict::SingularLike => "singular-like",
            SardVerdict::AbsolutelyContinuousPart => "absolutely-continuous-part detected",
        }
    }
}

/// Score at `thr.delta` and its verdict. An empty histogram is singular.
pub fn verdict(hist: &PushforwardHistogram, thr: &SardThresholds) -> (Option<f64>, SardVerdict) {
    match singularity_score(hist, &[thr.delta]) {
        Err(_) => (None, SardVerdict::SingularLike),
        Ok(c) => {
            let s = c.scores[0];
            let v = if s >= thr.threshold && hist.n_bins() >= 1024 { SardVerdict::SingularLike } else { SardVerdict::AbsolutelyContinuousPart };
            (Some(s), v)
        }
    }
}

/// Deltas reported in score curves.
pub const SCORE_DELTAS: [f64; 7] = [0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1];

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSard {
    pub sign: i8,
    /// Critical cells where the component is nonzero.
    pub critical_cells: usize,
    pub histogram: PushforwardHistogram,
    pub curve: Option<ScoreCurve>,
    pub score: Option<f64>,
    pub verdict: SardVerdict,
    /// Verdict with the mask further intersected with `E*`.
    pub verdict_with_e_star: SardVerdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WspReport {
    pub components: Vec<ComponentSard>,
    /// `cross[i][j]`: score of `(f_i)_#` restricted to the gradient support of `f_j`; `None` on the diagonal or for empty masks.
    pub cross: Vec<Vec<Option<f64>>>,
    pub cross_singular: bool,
    /// All component verdicts singular-like.
    pub verdict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EStarParams {
    pub min_len: f64,
    pub n_levels: usize,
}

/// Per monotone component: pushforward of its critical set (where it is
/// nonzero) and a verdict; plus the cross pushforwards of gradient supports.
pub fn wsp_report(comps: &[MonotoneComponent], thr: &SardThresholds, estar: EStarParams) -> WspReport {
    let mut components = Vec::with_capacity(comps.len());
    for c in comps {
        let f = &c.field;
        let crit = critical_set(f, thr.eps_grad);
        let nonzero = RegionMask { grid: f.grid, bits: f.values.iter().map(|v| *v != 0.0).collect() };
        let mask = crit.intersection(&nonzero);
        let histogram = pushforward(f, &mask, thr.n_bins);
        let (score, v) = verdict(&histogram, thr);
        let curve = singularity_score(&histogram, &SCORE_DELTAS).ok();
        let with = mask.intersection(&e_star(f, estar.min_len, estar.n_levels));
        let (_, v_e) = verdict(&pushforward(f, &with, thr.n_bins), thr);
        components.push(ComponentSard {
            sign: c.sign,
            critical_cells: mask.count(),
            histogram,
            curve,
            score,
            verdict: v,
            verdict_with_e_star: v_e,
        });
    }
    let n = comps.len();
    let mut cross = vec![vec![None; n]; n];
    let mut cross_singular = true;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let hist = pushforward(&comps[i].field, &comps[j].grad_support, thr.n_bins);
            let (s, v) = verdict(&hist, thr);
            cross[i][j] = s;
            cross_singular &= v == SardVerdict::SingularLike;
        }
    }
    let verdict = components.iter().all(|c| c.verdict == SardVerdict::SingularLike);
    WspReport { components, cross, cross_singular, verdict }
}

/// Decomposes `f` and reports on its components.
pub fn wsp_report_for(f: &ScalarField, thr: &SardThresholds, estar: EStarParams) -> Result<WspReport> {
    let dec = monodec::decompose(f, monodec::DEFAULT_EPS_STOP, monodec::DEFAULT_MAX_COMPONENTS)?;
    Ok(wsp_report(&dec.components, thr, estar))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hist(masses: Vec<f64>) -> PushforwardHistogram {
        let total = masses.iter().sum();
        PushforwardHistogram { t_min: 0.0, t_max: 1.0, masses, total }
    }

    #[test]
    fn single_atom_scores_one() {
        let mut m = vec![0.0; 1024];
        m[17] = 3.0;
        let c = singularity_score(&hist(m), &[1.0 / 1024.0, 0.01, 0.5]).unwrap();
        assert!(c.scores.iter().all(|s| *s == 1.0));
    }

    #[test]
    fn uniform_scores_delta() {
        let c = singularity_score(&hist(vec![1.0; 1000]), &[0.01, 0.1, 0.37]).unwrap();
        for (d, s) in c.deltas.iter().zip(&c.scores) {
            assert!((d - s).abs() < 1e-12);
        }
    }

    #[test]
    fn mixture_scores_closed_form() {
        let mut m = vec![0.1 / 1024.0; 1024];
        m[500] += 0.9;
        let c = singularity_score(&hist(m), &[0.01]).unwrap();
        assert!((c.scores[0] - (0.9 + 10.0 * 0.1 / 1024.0)).abs() < 1e-12);
    }

    #[test]
    fn empty_pushforward_is_an_error() {
        assert_eq!(singularity_score(&hist(vec![0.0; 8]), &[0.1]).unwrap_err(), Error::EmptyPushforward);
    }
}
