//! Transport along one closed level curve: `∂t(ρμ) + ∂sρ = 0` on a circle of
//! length `L`, with `μ = a ds + Σ m δ_{s₀}`.
//!
//! In the time-change coordinate `A(s) = μ([0, s])` the equation is a pure
//! shift, `ρ(t, ·) = ρ̂₀(A(·) - t)`. Each atom occupies a hidden `A`-interval of
//! length `m`. States hold `μ`-averages per segment and per atom; [`advect`]
//! shifts the cumulative-mass primitive `M(A)` (cubic Lagrange through the
//! piece boundaries, extended periodically by the total mass) and differences
//! it, so mass is conserved up to summation rounding and the scheme is fourth
//! order for data smooth in `A`.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::curves::{self, LevelCurve};
use crate::error::{Error, Result};
use crate::field::{self, ScalarField};
use crate::monodec;
use crate::region::RegionMask;
use crate::weakdiv::Beta;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub position: f64,
    pub mass: f64,
}

/// Absolutely continuous density on `n` uniform segments plus atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleWeight {
    pub length: f64,
    pub ac: Vec<f64>,
    pub atoms: Vec<Atom>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Owner {
    Segment(usize),
    Atom(usize),
}

/// A piece of the `A`-axis: part of a segment or a whole atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub start: f64,
    pub len: f64,
    pub owner: Owner,
}

impl CircleWeight {
    pub fn new(length: f64, ac: Vec<f64>, mut atoms: Vec<Atom>) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidArgument("circle length must be positive".into()));
        }
        if ac.len() < 4 {
            return Err(Error::InvalidArgument("need at least 4 segments".into()));
        }
        if ac.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::NonIncreasingWeight);
        }
        for a in &atoms {
            if !(a.mass.is_finite() && a.mass > 0.0) || !(a.position >= 0.0 && a.position < length) {
                return Err(Error::NonIncreasingWeight);
            }
        }
        atoms.sort_by(|a, b| a.position.total_cmp(&b.position));
        Ok(Self { length, ac, atoms })
    }

    pub fn uniform(length: f64, n: usize, a: f64) -> Result<Self> {
        Self::new(length, vec![a; n], Vec::new())
    }

    pub fn n(&self) -> usize {
        self.ac.len()
    }

    pub fn h(&self) -> f64 {
        self.length / self.n() as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.h()
    }

    pub fn segment_of(&self, s: f64) -> usize {
        (libm::floor(s / self.h()) as usize).min(self.n() - 1)
    }

    /// `A(L)`.
    pub fn total(&self) -> f64 {
        self.ac.iter().sum::<f64>() * self.h() + self.atoms.iter().map(|a| a.mass).sum::<f64>()
    }

    /// `μ` of segment `j`.
    pub fn segment_measure(&self, j: usize) -> f64 {
        self.ac[j] * self.h()
    }

    /// The `A`-axis cut into pieces, in order.
    pub fn partition(&self) -> Vec<Piece> {
        let h = self.h();
        let mut out = Vec::with_capacity(self.n() + 2 * self.atoms.len());
        let mut a = 0.0;
        let mut next_atom = 0;
        for j in 0..self.n() {
            let mut s = self.node(j);
            let end = if j + 1 == self.n() { self.length } else { self.node(j + 1) };
            while next_atom < self.atoms.len() && self.atoms[next_atom].position < end {
                let atom = self.atoms[next_atom];
                let len = (atom.position - s) * self.ac[j];
                if len > 0.0 {
                    out.push(Piece { start: a, len, owner: Owner::Segment(j) });
                    a += len;
                }
                out.push(Piece { start: a, len: atom.mass, owner: Owner::Atom(next_atom) });
                a += atom.mass;
                s = atom.position;
                next_atom += 1;
            }
            let len = (end - s) * self.ac[j];
            if len > 0.0 {
                out.push(Piece { start: a, len, owner: Owner::Segment(j) });
                a += len;
            }
        }
        debug_assert!(h > 0.0);
        out
    }

    /// `A(s)` for `s ∈ [0, L]`, atoms at `s₀ ≤ s` included.
    pub fn cumulative(&self, s: f64) -> f64 {
        let j = self.segment_of(s);
        let mut a = self.ac[..j].iter().sum::<f64>() * self.h() + (s - self.node(j)) * self.ac[j];
        a += self.atoms.iter().filter(|at| at.position <= s).map(|at| at.mass).sum::<f64>();
        a
    }
}

/// `μ`-averages per segment and per atom at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleState {
    pub segments: Vec<f64>,
    pub atoms: Vec<f64>,
    pub time: f64,
}

const GAUSS3: [(f64, f64); 3] = [(-0.774_596_669_241_483_4, 5.0 / 9.0), (0.0, 8.0 / 9.0), (0.774_596_669_241_483_4, 5.0 / 9.0)];

fn gauss_average(lo: f64, hi: f64, f: &impl Fn(f64) -> f64) -> f64 {
    let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    GAUSS3.iter().map(|(x, w)| w * f(c + r * x)).sum::<f64>() * 0.5
}

impl CircleState {
    pub fn zeros(w: &CircleWeight) -> Self {
        Self { segments: vec![0.0; w.n()], atoms: vec![0.0; w.atoms.len()], time: 0.0 }
    }

    /// Averages of `ρ₀(s)` over each segment; atoms take `ρ₀(s₀)`.
    pub fn from_fn(w: &CircleWeight, rho0: impl Fn(f64) -> f64) -> Self {
        let h = w.h();
        let segments = (0..w.n()).map(|j| gauss_average(w.node(j), w.node(j) + h, &rho0)).collect();
        let atoms = w.atoms.iter().map(|a| rho0(a.position)).collect();
        Self { segments, atoms, time: 0.0 }
    }

    /// `μ`-averages of a profile given in the time-change coordinate `A`.
    pub fn from_profile(w: &CircleWeight, profile: impl Fn(f64) -> f64) -> Self {
        let mut mass = vec![0.0; w.n()];
        let mut atoms = vec![0.0; w.atoms.len()];
        for p in w.partition() {
            let avg = gauss_average(p.start, p.start + p.len, &profile);
            match p.owner {
                Owner::Segment(j) => mass[j] += avg * p.len,
                Owner::Atom(k) => atoms[k] = avg,
            }
        }
        let segments = mass.iter().enumerate().map(|(j, m)| m / w.segment_measure(j)).collect();
        Self { segments, atoms, time: 0.0 }
    }

    pub fn map(&self, beta: Beta) -> Self {
        Self {
            segments: self.segments.iter().map(|r| beta.value(*r)).collect(),
            atoms: self.atoms.iter().map(|r| beta.value(*r)).collect(),
            time: self.time,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.segments.iter().chain(&self.atoms).fold(0.0, |m, v| f64::max(m, libm::fabs(*v)))
    }

    /// `∫ ρ a ds + Σ ρ_atom m`.
    pub fn mass(&self, w: &CircleWeight) -> f64 {
        let seg: f64 = self.segments.iter().enumerate().map(|(j, r)| r * w.segment_measure(j)).sum();
        seg + self.atoms.iter().zip(&w.atoms).map(|(r, a)| r * a.mass).sum::<f64>()
    }

    /// `L¹(μ)` distance.
    pub fn l1_distance(&self, other: &CircleState, w: &CircleWeight) -> f64 {
        let seg: f64 = (0..w.n()).map(|j| libm::fabs(self.segments[j] - other.segments[j]) * w.segment_measure(j)).sum();
        seg + (0..w.atoms.len()).map(|k| libm::fabs(self.atoms[k] - other.atoms[k]) * w.atoms[k].mass).sum::<f64>()
    }

    fn value_of(&self, owner: Owner) -> f64 {
        match owner {
            Owner::Segment(j) => self.segments[j],
            Owner::Atom(k) => self.atoms[k],
        }
    }
}

/// Periodically extended cumulative-mass primitive on the piece boundaries.
struct Primitive {
    nodes: Vec<f64>,
    mass: Vec<f64>,
    period: f64,
    total: f64,
}

impl Primitive {
    fn new(pieces: &[Piece], state: &CircleState) -> Self {
        let mut nodes = Vec::with_capacity(pieces.len() + 1);
        let mut mass = Vec::with_capacity(pieces.len() + 1);
        let (mut a, mut m) = (0.0, 0.0);
        nodes.push(0.0);
        mass.push(0.0);
        for p in pieces {
            a += p.len;
            m += p.len * state.value_of(p.owner);
            nodes.push(a);
            mass.push(m);
        }
        Self { period: a, total: m, nodes, mass }
    }

    /// Node `q` of the periodic extension (any integer index).
    #[inline]
    fn node(&self, q: isize) -> (f64, f64) {
        let p = (self.nodes.len() - 1) as isize;
        let wraps = q.div_euclid(p);
        let r = q.rem_euclid(p) as usize;
        (self.nodes[r] + wraps as f64 * self.period, self.mass[r] + wraps as f64 * self.total)
    }

    fn eval(&self, alpha: f64) -> f64 {
        let mut wraps = libm::floor(alpha / self.period);
        let mut x = alpha - wraps * self.period;
        if x >= self.period {
            x -= self.period;
            wraps += 1.0;
        }
        let base = wraps * self.total;
        let p = self.nodes.partition_point(|v| *v <= x).clamp(1, self.nodes.len() - 1) - 1;
        let p = p as isize;
        let pts = [self.node(p - 1), self.node(p), self.node(p + 1), self.node(p + 2)];
        let mut acc = 0.0;
        for (i, (xi, yi)) in pts.iter().enumerate() {
            let mut l = 1.0;
            for (k, (xk, _)) in pts.iter().enumerate() {
                if k != i {
                    l *= (x - xk) / (xi - xk);
                }
            }
            acc += l * yi;
        }
        base + acc
    }
}

/// State at time `rho0.time + t`.
pub fn advect(w: &CircleWeight, rho0: &CircleState, t: f64) -> Result<CircleState> {
    if rho0.segments.len() != w.n() || rho0.atoms.len() != w.atoms.len() {
        return Err(Error::InvalidArgument("state does not match weight".into()));
    }
    if !t.is_finite() {
        return Err(Error::InvalidArgument("non-finite time".into()));
    }
    let pieces = w.partition();
    let prim = Primitive::new(&pieces, rho0);
    let mut seg_mass = vec![0.0; w.n()];
    let mut atoms = vec![0.0; w.atoms.len()];
    let mut lo = prim.eval(-t);
    for (p, piece) in pieces.iter().enumerate() {
        let next = prim.eval(prim.nodes[p + 1] - t);
        let m = next - lo;
        lo = next;
        match piece.owner {
            Owner::Segment(j) => seg_mass[j] += m,
            Owner::Atom(k) => atoms[k] = m / w.atoms[k].mass,
        }
    }
    let segments = seg_mass.iter().enumerate().map(|(j, m)| m / w.segment_measure(j)).collect();
    Ok(CircleState { segments, atoms, time: rho0.time + t })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenormalizationReport {
    /// `‖β(advect ρ₀) - advect β(ρ₀)‖_{L¹(μ)}`.
    pub l1_distance: f64,
    /// `‖advect β(ρ₀)‖_{L¹(μ)}`.
    pub l1_scale: f64,
}

pub fn renormalization_check(w: &CircleWeight, rho0: &CircleState, beta: Beta, t: f64) -> Result<RenormalizationReport> {
    let lhs = advect(w, rho0, t)?.map(beta);
    let rhs = advect(w, &rho0.map(beta), t)?;
    let zero = CircleState::zeros(w);
    Ok(RenormalizationReport { l1_distance: lhs.l1_distance(&rhs, w), l1_scale: rhs.l1_distance(&zero, w) })
}

/// `φ(t, s) = ψ(t) χ(s)` with `ψ(t) = (1 - t/T)² cos(ωt + p)` and
/// `χ(s) = cos(2πks/L + q)`; `ψ(T) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimeTest {
    pub horizon: f64,
    pub omega: f64,
    pub phase_t: f64,
    pub length: f64,
    pub k: u32,
    pub phase_s: f64,
}

impl SpaceTimeTest {
    pub fn psi(&self, t: f64) -> f64 {
        let u = 1.0 - t / self.horizon;
        u * u * libm::cos(self.omega * t + self.phase_t)
    }

    pub fn dpsi(&self, t: f64) -> f64 {
        let u = 1.0 - t / self.horizon;
        let arg = self.omega * t + self.phase_t;
        -2.0 * u / self.horizon * libm::cos(arg) - u * u * self.omega * libm::sin(arg)
    }

    fn wavenumber(&self) -> f64 {
        2.0 * core::f64::consts::PI * self.k as f64 / self.length
    }

    pub fn chi(&self, s: f64) -> f64 {
        libm::cos(self.wavenumber() * s + self.phase_s)
    }

    /// `∫₀^s χ`.
    pub fn chi_integral(&self, s: f64) -> f64 {
        let kk = self.wavenumber();
        if kk == 0.0 {
            s * libm::cos(self.phase_s)
        } else {
            (libm::sin(kk * s + self.phase_s) - libm::sin(self.phase_s)) / kk
        }
    }

    /// Seeded family: `k ∈ 0..=8`, `ω ∈ [0, 6π/T)`, uniform phases.
    pub fn random_family(count: usize, length: f64, horizon: f64, seed: u64) -> Vec<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tau = 2.0 * core::f64::consts::PI;
        (0..count)
            .map(|_| SpaceTimeTest {
                horizon,
                omega: rng.gen_range(0.0..3.0 * tau / horizon),
                phase_t: rng.gen_range(0.0..tau),
                length,
                k: rng.gen_range(0..=8),
                phase_s: rng.gen_range(0.0..tau),
            })
            .collect()
    }
}

const GAUSS4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

/// `R(φ) = ∫₀ᵀ∫ ρ ∂tφ dμ dt + ∫₀ᵀ∫ ρ ∂sφ ds dt + ∫ ρ₀ φ(0) dμ` for a
/// trajectory of piecewise-constant states. Space integrals are exact for
/// such states; time uses composite 4-point Gauss on `panels` panels.
pub fn weak_residual(
    w: &CircleWeight,
    rho0: &CircleState,
    trajectory: impl Fn(f64) -> CircleState,
    horizon: f64,
    tests: &[SpaceTimeTest],
    panels: usize,
) -> Vec<f64> {
    let n = w.n();
    let h = w.h();
    // per test: μ-weighted segment integrals of χ, and χ differences
    let tables: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = tests
        .iter()
        .map(|phi| {
            let mut xa = Vec::with_capacity(n);
            let mut dx = Vec::with_capacity(n);
            for j in 0..n {
                let (s0, s1) = (j as f64 * h, (j + 1) as f64 * h);
                xa.push(w.ac[j] * (phi.chi_integral(s1) - phi.chi_integral(s0)));
                dx.push(phi.chi(s1) - phi.chi(s0));
            }
            let atoms = w.atoms.iter().map(|a| a.mass * phi.chi(a.position)).collect();
            (xa, dx, atoms)
        })
        .collect();
    let spatial = |state: &CircleState, table: &(Vec<f64>, Vec<f64>, Vec<f64>)| -> (f64, f64) {
        let (xa, dx, atoms) = table;
        let mut a = 0.0;
        let mut b = 0.0;
        for j in 0..n {
            a += state.segments[j] * xa[j];
            b += state.segments[j] * dx[j];
        }
        for (r, m) in state.atoms.iter().zip(atoms) {
            a += r * m;
        }
        (a, b)
    };
    let mut res: Vec<f64> = tests.iter().zip(&tables).map(|(phi, tab)| phi.psi(0.0) * spatial(rho0, tab).0).collect();
    let width = horizon / panels as f64;
    for p in 0..panels {
        let c = (p as f64 + 0.5) * width;
        for (x, wt) in GAUSS4 {
            let t = c + 0.5 * width * x;
            let state = trajectory(t);
            let weight = 0.5 * width * wt;
            for ((phi, tab), r) in tests.iter().zip(&tables).zip(res.iter_mut()) {
                let (a, b) = spatial(&state, tab);
                *r += weight * (phi.dpsi(t) * a + phi.psi(t) * b);
            }
        }
    }
    res
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonUniquenessReport {
    pub weight: CircleWeight,
    /// Atom position after snapping to the nearest segment node.
    pub s0: f64,
    pub horizon: f64,
    pub times: Vec<f64>,
    /// The zero solution.
    pub trajectory_a: Vec<CircleState>,
    /// Front `1` on `(s₀, s₀ + t)`, atom value `-t/m`.
    pub trajectory_b: Vec<CircleState>,
    pub residuals_a: Vec<f64>,
    pub residuals_b: Vec<f64>,
    pub max_residual_a: f64,
    pub max_residual_b: f64,
    pub sup_norm_b: f64,
    pub initial_sup_b: f64,
    /// Largest `|θ(t, s₀)| = T/m`.
    pub atom_bound: f64,
    /// `T/m` exceeds the declared bound.
    pub max_principle_violated: bool,
}

/// Trajectory B at time `t`, with exact segment averages.
pub fn front_state(w: &CircleWeight, s0: f64, t: f64) -> CircleState {
    let h = w.h();
    let mut st = CircleState::zeros(w);
    let (lo, hi) = (s0, s0 + t);
    for j in 0..w.n() {
        let (a, b) = (j as f64 * h, (j + 1) as f64 * h);
        let overlap = (hi.min(b) - lo.max(a)).max(0.0);
        st.segments[j] = overlap / h;
    }
    st.atoms[0] = -t / w.atoms[0].mass;
    st.time = t;
    st
}

pub struct DemoConfig {
    pub n: usize,
    pub tests: usize,
    pub seed: u64,
    pub snapshots: usize,
    pub panels: usize,
    /// Declared bound for the maximum-principle flag.
    pub bound: f64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self { n: 4096, tests: 200, seed: 7, snapshots: 8, panels: 256, bound: 1.0 }
    }
}

/// Two weak solutions with zero initial data against `ds + m δ_{s₀}`.
/// `s₀` is snapped to the nearest segment node.
pub fn nonuniqueness_demo(length: f64, s0: f64, m: f64, horizon: f64, cfg: &DemoConfig) -> Result<NonUniquenessReport> {
    if !(horizon > 0.0 && horizon < length) {
        return Err(Error::InvalidArgument("need 0 < T < L (the front would wrap)".into()));
    }
    if !(m > 0.0) {
        return Err(Error::InvalidArgument("atom mass must be positive".into()));
    }
    // the atom sits on a segment node so the front cells are resolved exactly
    let h = length / cfg.n as f64;
    let wrap = |x: f64| x - length * libm::floor(x / length);
    let s0 = wrap(libm::round(wrap(s0) / h) * h);
    let w = CircleWeight::new(length, vec![1.0; cfg.n], vec![Atom { position: s0, mass: m }])?;
    let tests = SpaceTimeTest::random_family(cfg.tests, length, horizon, cfg.seed);
    let zero = CircleState::zeros(&w);
    let residuals_a = weak_residual(&w, &zero, |t| CircleState { time: t, ..zero.clone() }, horizon, &tests, cfg.panels);
    let residuals_b = weak_residual(&w, &zero, |t| front_state(&w, s0, t), horizon, &tests, cfg.panels);
    let times: Vec<f64> = (0..=cfg.snapshots).map(|k| horizon * k as f64 / cfg.snapshots as f64).collect();
    let trajectory_a = times.iter().map(|t| CircleState { time: *t, ..zero.clone() }).collect();
    let trajectory_b: Vec<CircleState> = times.iter().map(|t| front_state(&w, s0, *t)).collect();
    let max_abs = |v: &[f64]| v.iter().fold(0.0, |a, b| f64::max(a, libm::fabs(*b)));
    let sup_norm_b = trajectory_b.iter().map(|s| s.segments.iter().fold(0.0, |a, b| f64::max(a, libm::fabs(*b)))).fold(0.0, f64::max);
    let atom_bound = horizon / m;
    Ok(NonUniquenessReport {
        horizon,
        times,
        max_residual_a: max_abs(&residuals_a),
        max_residual_b: max_abs(&residuals_b),
        residuals_a,
        residuals_b,
        sup_norm_b,
        initial_sup_b: trajectory_b[0].sup_norm(),
        trajectory_a,
        trajectory_b,
        atom_bound,
        max_principle_violated: atom_bound > cfg.bound,
        s0,
        weight: w,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoliationReport {
    pub field: ScalarField,
    /// Cells that were transported (inside a level band, off the critical set).
    pub covered: RegionMask,
    /// Per level: `∫ ρ a ds` along the curve before and after.
    pub level_mass: Vec<(f64, f64)>,
}

struct SegmentIndex {
    cell: f64,
    buckets: alloc::collections::BTreeMap<(i64, i64), Vec<(usize, usize)>>,
}

impl SegmentIndex {
    fn new(curves: &[LevelCurve], cell: f64) -> Self {
        let mut buckets: alloc::collections::BTreeMap<(i64, i64), Vec<(usize, usize)>> = Default::default();
        let key = |v: f64| libm::floor(v / cell) as i64;
        for (ci, c) in curves.iter().enumerate() {
            for k in 0..c.len() {
                let (p, q) = c.segment(k);
                for bx in key(p[0].min(q[0]))..=key(p[0].max(q[0])) {
                    for by in key(p[1].min(q[1]))..=key(p[1].max(q[1])) {
                        buckets.entry((bx, by)).or_default().push((ci, k));
                    }
                }
            }
        }
        Self { cell, buckets }
    }

    /// Nearest `(curve, segment, fraction, distance)`.
    fn nearest(&self, curves: &[LevelCurve], x: [f64; 2]) -> Option<(usize, usize, f64)> {
        let (kx, ky) = (libm::floor(x[0] / self.cell) as i64, libm::floor(x[1] / self.cell) as i64);
        let mut best: Option<(usize, usize, f64, f64)> = None;
        for ring in 0..64i64 {
            for bx in kx - ring..=kx + ring {
                for by in ky - ring..=ky + ring {
                    if (bx - kx).abs() != ring && (by - ky).abs() != ring {
                        continue;
                    }
                    let Some(list) = self.buckets.get(&(bx, by)) else { continue };
                    for &(ci, k) in list {
                        let (p, q) = curves[ci].segment(k);
                        let d = [q[0] - p[0], q[1] - p[1]];
                        let ll = d[0] * d[0] + d[1] * d[1];
                        let r = if ll > 0.0 { (((x[0] - p[0]) * d[0] + (x[1] - p[1]) * d[1]) / ll).clamp(0.0, 1.0) } else { 0.0 };
                        let (cx, cy) = (p[0] + r * d[0] - x[0], p[1] + r * d[1] - x[1]);
                        let dist = libm::hypot(cx, cy);
                        if best.map_or(true, |b| dist < b.3) {
                            best = Some((ci, k, r, dist));
                        }
                    }
                }
            }
            // anything in a farther ring is at least `ring·cell` away
            if let Some(b) = best {
                if b.3 <= ring as f64 * self.cell {
                    break;
                }
            }
        }
        best.map(|b| (b.0, b.1, b.2))
    }
}

/// Moves `x` along `∇f` until the bicubic interpolant of `f` equals `target`.
fn project_to_level(f: &ScalarField, grad: &field::VectorField, mut x: [f64; 2], target: f64) -> [f64; 2] {
    for _ in 0..8 {
        let r = f.bicubic(x) - target;
        let g = grad.bilinear(x);
        let gg = g[0] * g[0] + g[1] * g[1];
        if gg == 0.0 || r == 0.0 {
            break;
        }
        x = [x[0] - r * g[0] / gg, x[1] - r * g[1] / gg];
        if libm::fabs(r) < 1e-15 {
            break;
        }
    }
    x
}

/// Transports `ρ₀` along the level curves of a monotone `f` for time `t`.
///
/// Each level owns the band of cells whose `f`-value is closer to it than to
/// its neighbours. A cell in a band is located on that level's curve in
/// Hamiltonian travel time, shifted by `t` (the flow `∇⊥f` runs against the
/// curve orientation), moved back onto its own level, and `ρ₀` is sampled
/// there. Cells in the critical set `|∇f| ≤ 10⁻⁶ max|∇f|` or outside every
/// band keep `ρ₀`.
pub fn foliate_and_advect(f: &ScalarField, rho0: &ScalarField, t: f64, levels: &[f64]) -> Result<FoliationReport> {
    if !rho0.grid.same_as(&f.grid) {
        return Err(Error::GridMismatch);
    }
    if !monodec::is_monotone(f) {
        return Err(Error::NotMonotone);
    }
    let mut levels = levels.to_vec();
    levels.sort_by(|a, b| a.total_cmp(b));
    levels.dedup();
    if levels.is_empty() {
        return Err(Error::InvalidArgument("no levels".into()));
    }
    let grad = field::gradient(f);
    let gmag = field::gradient_magnitude(f);
    let gmax = gmag.iter().fold(0.0, |m, v| f64::max(m, *v));
    let floor = curves::gradient_floor(f);
    let mut out = rho0.clone();
    let mut covered = RegionMask::empty(f.grid);
    let mut level_mass = Vec::with_capacity(levels.len());
    let nl = levels.len();
    for (li, &lvl) in levels.iter().enumerate() {
        let lo = if li == 0 {
            if nl > 1 { lvl - 0.5 * (levels[1] - lvl) } else { f64::NEG_INFINITY }
        } else {
            0.5 * (levels[li - 1] + lvl)
        };
        let hi = if li + 1 == nl {
            if nl > 1 { lvl + 0.5 * (lvl - levels[li - 1]) } else { f64::INFINITY }
        } else {
            0.5 * (lvl + levels[li + 1])
        };
        let cs = curves::trace_with_gradient(f, lvl, &grad)?;
        if cs.is_empty() {
            level_mass.push((0.0, 0.0));
            continue;
        }
        let weights: Vec<curves::CurveWeight> = cs.iter().map(|c| curves::weight_with_floor(c, floor)).collect();
        let cums: Vec<Vec<f64>> = weights.iter().map(|w| curves::cumulative(&w.travel)).collect();
        // mass along the level before and after
        let (mut before, mut after) = (0.0, 0.0);
        for (ci, c) in cs.iter().enumerate() {
            for k in 0..c.len() {
                let tm = 0.5 * (cums[ci][k] + cums[ci][k + 1]);
                let p0 = curves::point_at_time(c, &cums[ci], tm);
                let p1 = curves::point_at_time(c, &cums[ci], tm + t);
                before += rho0.bicubic(p0) * weights[ci].travel[k];
                after += rho0.bicubic(p1) * weights[ci].travel[k];
            }
        }
        level_mass.push((before, after));

        let index = SegmentIndex::new(&cs, 4.0 * f.grid.h);
        for k in 0..f.grid.len() {
            let v = f.values[k];
            if !(v > lo && v <= hi) || gmag[k] <= 1e-6 * gmax {
                continue;
            }
            let (i, j) = f.grid.coords(k);
            let x = f.grid.center(i, j);
            let Some((ci, seg, r)) = index.nearest(&cs, x) else { continue };
            let alpha = cums[ci][seg] + r * (cums[ci][seg + 1] - cums[ci][seg]);
            let p0 = curves::point_at_time(&cs[ci], &cums[ci], alpha);
            let p1 = curves::point_at_time(&cs[ci], &cums[ci], alpha + t);
            let moved = [x[0] + p1[0] - p0[0], x[1] + p1[1] - p0[1]];
            let target = project_to_level(f, &grad, moved, v);
            out.values[k] = rho0.bicubic(target);
            covered.bits[k] = true;
        }
    }
    Ok(FoliationReport { field: out, covered, level_mass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_splits_segment_at_atom() {
        let w = CircleWeight::new(1.0, vec![1.0; 4], vec![Atom { position: 0.3, mass: 0.5 }]).unwrap();
        let p = w.partition();
        assert_eq!(p.len(), 6);
        assert_eq!(p[2].owner, Owner::Atom(0));
        assert!((p[1].len - 0.05).abs() < 1e-15 && (p[3].len - 0.2).abs() < 1e-15);
        assert!((w.total() - 1.5).abs() < 1e-15);
        assert!((w.cumulative(0.3) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn nonpositive_density_is_rejected() {
        assert_eq!(CircleWeight::new(1.0, vec![1.0, 0.0, 1.0, 1.0], vec![]).unwrap_err(), Error::NonIncreasingWeight);
    }

    #[test]
    fn full_revolution_is_identity() {
        let w = CircleWeight::uniform(1.0, 64, 1.0).unwrap();
        let r0 = CircleState::from_fn(&w, |s| libm::sin(2.0 * core::f64::consts::PI * s) + 0.3);
        let r1 = advect(&w, &r0, 1.0).unwrap();
        for (a, b) in r0.segments.iter().zip(&r1.segments) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn whole_cell_shift_is_exact() {
        let w = CircleWeight::uniform(1.0, 16, 1.0).unwrap();
        let mut r0 = CircleState::zeros(&w);
        r0.segments[3] = 1.0;
        let r1 = advect(&w, &r0, 2.0 / 16.0).unwrap();
        for (j, v) in r1.segments.iter().enumerate() {
            assert!((v - if j == 5 { 1.0 } else { 0.0 }).abs() < 1e-12, "{j} {v}");
        }
    }

    #[test]
    fn demo_rejects_wrapping_front() {
        assert!(nonuniqueness_demo(1.0, 0.25, 1.0, 1.0, &DemoConfig::default()).is_err());
    }

    #[test]
    fn front_state_has_fractional_cell() {
        let w = CircleWeight::new(1.0, vec![1.0; 8], vec![Atom { position: 0.25, mass: 2.0 }]).unwrap();
        let st = front_state(&w, 0.25, 0.2);
        assert_eq!(st.segments[2], 1.0);
        assert!((st.segments[3] - 0.6).abs() < 1e-12);
        assert_eq!(st.atoms[0], -0.1);
    }
}
