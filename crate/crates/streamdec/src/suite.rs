//! The acceptance suite shared by `verify-all` and the `acceptance` test target.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use streamdec_core::curves;
use streamdec_core::field::{self, GridSpec, ScalarField};
use streamdec_core::gallery::{self, NelsonProfile, NELSON_SINK, NELSON_SOURCE};
use streamdec_core::monodec::{self, SuperlevelFamily};
use streamdec_core::region::{self, RegionMask};
use streamdec_core::sard::{self, EStarParams, PushforwardHistogram, SardThresholds, SardVerdict};
use streamdec_core::transport1d::{self, CircleState, CircleWeight, DemoConfig};
use streamdec_core::weakdiv::{self, Beta, TestFamily};

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    /// Sub-checks that failed; empty when `passed`.
    pub failures: Vec<String>,
    pub metrics: Value,
    pub seconds: f64,
    pub budget: Option<f64>,
}

/// Sub-checks that cannot pass on a cell grid; see the README.
pub const KNOWN_GAPS: [(u8, &str); 1] = [(3, "overlapping: gradient supports overlap")];

pub fn is_known_gap(id: u8, failure: &str) -> bool {
    KNOWN_GAPS.iter().any(|(k, prefix)| *k == id && failure.starts_with(prefix))
}

impl Outcome {
    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let budget = self.budget.map(|b| format!(" / {b:.0} s")).unwrap_or_default();
        let mut s = format!("{status} [{:>2}] {} ({:.2} s{budget})", self.id, self.name, self.seconds);
        for f in &self.failures {
            let tag = if is_known_gap(self.id, f) { " (known gap)" } else { "" };
            s.push_str(&format!("\n        - {f}{tag}"));
        }
        s
    }

    /// Failures other than the known gaps.
    pub fn unexpected(&self) -> Vec<&str> {
        self.failures.iter().filter(|f| !is_known_gap(self.id, f)).map(String::as_str).collect()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "id": self.id,
            "name": self.name,
            "passed": self.passed,
            "failures": self.failures,
            "metrics": self.metrics,
            "seconds": self.seconds,
            "budget_seconds": self.budget,
        })
    }
}

pub const CRITERIA: [(u8, &str); 10] = [
    (1, "exact discrete coarea"),
    (2, "perimeter additivity and saturation identity"),
    (3, "monotone decomposition of two bumps"),
    (4, "continuum coarea on the radial bump"),
    (5, "dipole defect of the sector field"),
    (6, "constancy criterion"),
    (7, "1D renormalization, flow and mass"),
    (8, "non-uniqueness witness"),
    (9, "Sard scoring"),
    (10, "level tracing"),
];

struct Checks {
    failures: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Self { failures: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }
}

fn finish(id: u8, budget: Option<f64>, start: Instant, checks: Checks, metrics: Value) -> Outcome {
    let seconds = start.elapsed().as_secs_f64();
    let mut failures = checks.failures;
    if let Some(b) = budget {
        if seconds > b {
            failures.push(format!("runtime {seconds:.2} s exceeds {b} s"));
        }
    }
    let name = CRITERIA[id as usize - 1].1;
    Outcome { id, name, passed: failures.is_empty(), failures, metrics, seconds, budget }
}

pub fn run(id: u8) -> Option<Outcome> {
    Some(match id {
        1 => coarea_exact(),
        2 => perimeter_identities(),
        3 => decomposition(),
        4 => coarea_continuum(),
        5 => nelson_dipole(),
        6 => constancy(),
        7 => renormalization(),
        8 => nonuniqueness(),
        9 => sard_scoring(),
        10 => level_tracing(),
        _ => return None,
    })
}

pub fn run_all() -> Vec<Outcome> {
    CRITERIA.iter().filter_map(|(id, _)| run(*id)).collect()
}

fn random_field(rng: &mut ChaCha8Rng, n: usize) -> ScalarField {
    let grid = GridSpec::centered_square(n, 1.0);
    let quantized = rng.gen_bool(0.5);
    let values = (0..grid.len())
        .map(|_| {
            let v: f64 = rng.gen_range(-1.0..1.0);
            if quantized {
                (v * 8.0).round() / 8.0
            } else {
                v
            }
        })
        .collect();
    let mut f = ScalarField::new(grid, values).expect("finite");
    f.enforce_zero_boundary();
    f
}

fn gallery_fields(n: usize) -> Vec<(&'static str, ScalarField)> {
    let g = GridSpec::centered_square(n, 1.0);
    vec![
        ("radial_bump", gallery::radial_bump(g, [0.0, 0.0], 0.9, 1.0)),
        ("smooth_bump", gallery::smooth_bump(g, [0.1, -0.2], 0.7, 2.0)),
        ("two_bumps_disjoint", gallery::two_bumps(g, 0.9, false)),
        ("two_bumps_overlap", gallery::two_bumps(g, 0.9, true)),
        ("volcano", gallery::volcano(g)),
        ("nelson", gallery::nelson(gallery::nelson_grid(n), NelsonProfile::Slope).expect("covering grid").f),
    ]
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn coarea_exact() -> Outcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let f = random_field(&mut rng, 32);
        let d = rel(field::total_variation(&f), field::perimeter_integral(&f));
        worst = worst.max(d);
        c.check(d <= 1e-12, || format!("random field {k}: relative defect {d:e}"));
    }
    let mut per_gallery = serde_json::Map::new();
    for (name, f) in gallery_fields(128) {
        let d = rel(field::total_variation(&f), field::perimeter_integral(&f));
        worst = worst.max(d);
        per_gallery.insert(name.into(), json!(d));
        c.check(d <= 1e-12, || format!("{name}: relative defect {d:e}"));
    }
    finish(1, Some(5.0), start, c, json!({ "max_relative_defect": worst, "gallery": per_gallery }))
}

fn random_mask(rng: &mut ChaCha8Rng, n: usize) -> RegionMask {
    let grid = GridSpec::centered_square(n, 1.0);
    let p = rng.gen_range(0.3..0.7);
    RegionMask::new(grid, (0..grid.len()).map(|_| rng.gen_bool(p)).collect()).expect("sized")
}

fn identity_failures(mask: &RegionMask, label: &str, c: &mut Checks) -> (usize, usize) {
    let add = region::perimeter_additivity_check(mask);
    c.check(add.exact(), || format!("{label}: P = {} but Σ P(Aᵢ) = {}", add.mask_edges, add.component_edges));
    let mut holes = 0;
    for (ci, comp) in region::components(mask).iter().enumerate() {
        match region::saturation_identity_check(comp) {
            Ok(s) => {
                holes += s.holes;
                c.check(s.exact(), || {
                    format!("{label} component {ci}: P(E) = {} vs P(sat E) + Σ P(Y) = {} + {}", s.mask_edges, s.saturated_edges, s.hole_edges)
                });
            }
            Err(e) => c.check(false, || format!("{label} component {ci}: {e}")),
        }
    }
    (add.components, holes)
}

fn perimeter_identities() -> Outcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut comps, mut holes) = (0, 0);
    for k in 0..100 {
        let m = random_mask(&mut rng, 64);
        let (a, b) = identity_failures(&m, &format!("random mask {k}"), &mut c);
        comps += a;
        holes += b;
    }
    let v = gallery::volcano(GridSpec::centered_square(128, 1.0));
    let mut volcano = Vec::new();
    for t in [0.1, 0.5, 0.9] {
        let m = RegionMask::superlevel(&v, t);
        let (a, b) = identity_failures(&m, &format!("volcano {{f > {t}}}"), &mut c);
        volcano.push(json!({ "level": t, "components": a, "holes": b }));
    }
    c.check(volcano[1]["holes"] == json!(1), || "volcano annulus should have exactly one hole".into());
    finish(2, Some(5.0), start, c, json!({ "random_components": comps, "random_holes": holes, "volcano": volcano }))
}

fn decomposition() -> Outcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let g = GridSpec::centered_square(128, 1.0);
    let mut metrics = Vec::new();
    for overlap in [false, true] {
        let label = if overlap { "overlapping" } else { "disjoint" };
        let f = gallery::two_bumps(g, 0.9, overlap);
        let dec = match monodec::decompose(&f, monodec::DEFAULT_EPS_STOP, monodec::DEFAULT_MAX_COMPONENTS) {
            Ok(d) => d,
            Err(e) => {
                c.check(false, || format!("{label}: decompose failed: {e}"));
                continue;
            }
        };
        let r = monodec::verify_decomposition(&f, &dec.components).expect("same grid");
        c.check(dec.components.len() == 2, || format!("{label}: {} components, expected 2", dec.components.len()));
        c.check(r.max_pointwise_defect <= 1e-12, || format!("{label}: pointwise defect {:e}", r.max_pointwise_defect));
        c.check(r.relative_tv_defect <= 1e-12, || format!("{label}: TV defect {:e}", r.relative_tv_defect));
        c.check(r.overlaps.is_empty(), || format!("{label}: gradient supports overlap {:?}", r.overlaps));
        c.check(r.monotone.iter().all(|m| *m), || format!("{label}: monotone verdicts {:?}", r.monotone));
        metrics.push(json!({
            "case": label,
            "components": dec.components.len(),
            "max_pointwise_defect": r.max_pointwise_defect,
            "relative_tv_defect": r.relative_tv_defect,
            "overlaps": r.overlaps,
            "monotone": r.monotone,
        }));
    }
    finish(3, Some(30.0), start, c, json!(metrics))
}

fn coarea_continuum() -> Outcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let f = gallery::radial_bump(GridSpec::centered_square(512, 1.2), [0.0, 0.0], 1.0, 1.0);
    let exact = 4.0 * PI / 3.0;
    let metrics = match field::coarea_report(&f, 64) {
        Ok(r) => {
            let eg = rel(r.gradient_integral, exact);
            let el = rel(r.level_length_integral, exact);
            c.check(eg <= 0.05, || format!("∫|∇f| off by {eg:.4}"));
            c.check(el <= 0.05, || format!("∫ length dt off by {el:.4}"));
            c.check(r.relative_discrepancy <= 0.05, || format!("discrepancy {:.4}", r.relative_discrepancy));
            json!({
                "analytic": exact,
                "gradient_integral": r.gradient_integral,
                "level_length_integral": r.level_length_integral,
                "relative_discrepancy": r.relative_discrepancy,
                "levels": r.levels.len(),
            })
        }
        Err(e) => {
            c.check(false, || format!("coarea_report: {e}"));
            Value::Null
        }
    };
    finish(4, Some(10.0), start, c, metrics)
}

fn nelson_dipole() -> Outcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let grid = gallery::nelson_grid(1024);
    let nf = gallery::nelson(grid, NelsonProfile::Slope).expect("covering grid");
    let fam = TestFamily::lattice(&grid).with_singular_points(&[NELSON_SINK, NELSON_SOURCE]);
    let threshold = weakdiv::control_threshold(&nf.v, &fam).expect("same grid");
    let d_rho = weakdiv::divergence_defect(&nf.rho, &nf.v, &fam).expect("same grid");
    let d_rho2 = weakdiv::divergence_defect(&nf.rho2, &nf.v, &fam).expect("same grid");
    c.check(d_rho.max_normalized <= threshold, || format!("normalized defect of ρ {:e} above threshold {threshold:e}", d_rho.max_normalized));
    let inside = |t: &weakdiv::TestFunction, p: [f64; 2]| t.value(p) > 0.0;
    let mut matches = Vec::new();
    let mut within = 0;
    for (k, t) in fam.tests.iter().enumerate() {
        let (sink, source) = (inside(t, NELSON_SINK), inside(t, NELSON_SOURCE));
        if sink == source {
            continue;
        }
        let expected = if source { t.value(NELSON_SOURCE) } else { -t.value(NELSON_SINK) };
        let err = (d_rho2.raw[k] - expected).abs() / expected.abs();
        within += usize::from(err <= 0.05);
        matches.push(json!({ "test": k, "center": t.center, "radius": t.radius, "expected": expected, "raw": d_rho2.raw[k], "relative_error": err }));
    }
    c.check(within >= 3, || format!("only {within} of {} isolating tests match within 5%", matches.len()));
    let metrics = json!({
        "threshold": threshold,
        "rho_max_normalized": d_rho.max_normalized,
        "rho2_max_normalized": d_rho2.max_normalized,
        "dipole_within_5_percent": within,
        "dipole_tests": matches,
    });
    finish(5, Some(60.0), start, c, metrics)
}

fn constancy() -> Outcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let grid = GridSpec::centered_square(256, 1.0);
    let f = gallery::smooth_bump(grid, [0.0, 0.0], 0.9, 1.0);
    let v = field::perp_gradient(&f);
    let fam = TestFamily::lattice(&grid);
    let threshold = weakdiv::control_threshold(&v, &fam).expect("same grid");
    let levels = curves::regular_levels(&f, 16).expect("nonconstant");
    let cases: [(&str, ScalarField, bool); 3] = [
        ("eta(f) = sin(3f)", f.map(|t| (3.0 * t).sin()), true),
        ("eta(f) = f^2", f.map(|t| t * t), true),
        ("angle", ScalarField::from_fn(grid, |x, y| y.atan2(x)), false),
    ];
    let mut metrics = Vec::new();
    for (name, rho, constant) in cases {
        let cr = weakdiv::constancy_test(&rho, &f, &levels).expect("monotone bump");
        let dr = weakdiv::divergence_defect(&rho, &v, &fam).expect("same grid");
        let by_variance = cr.max_variance <= 1e-6;
        let by_defect = dr.max_normalized <= threshold;
        if constant {
            c.check(by_variance, || format!("{name}: variance {:e} > 1e-6", cr.max_variance));
            c.check(by_defect, || format!("{name}: defect {:e} > threshold {threshold:e}", dr.max_normalized));
        } else {
            c.check(cr.max_variance >= 0.1, || format!("{name}: variance {:e} < 0.1", cr.max_variance));
            c.check(dr.max_normalized >= 10.0 * threshold, || format!("{name}: defect {:e} < 10 × threshold", dr.max_normalized));
        }
        c.check(by_variance == by_defect, || format!("{name}: variance and defect verdicts disagree"));
        metrics.push(json!({ "rho": name, "max_variance": cr.max_variance, "max_normalized_defect": dr.max_normalized }));
    }
    finish(6, None, start, c, json!({ "threshold": threshold, "cases": metrics }))
}

fn renormalization() -> Outcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let n = 4096;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let ac: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    let w = CircleWeight::new(1.0, ac, Vec::new()).expect("positive density");
    let tau = 2.0 * PI;
    let rho0 = CircleState::from_fn(&w, |s| 0.5 + (tau * s).sin() + 0.3 * (2.0 * tau * s + 1.0).cos());
    let mut renorm = Vec::new();
    for beta in [Beta::Square, Beta::Sin] {
        for t in [0.137, 0.5, 0.911] {
            let r = transport1d::renormalization_check(&w, &rho0, beta, t).expect("consistent state");
            c.check(r.l1_distance <= 1e-6, || format!("β = {} t = {t}: L¹ distance {:e}", beta.name(), r.l1_distance));
            renorm.push(json!({ "beta": beta.name(), "t": t, "l1_distance": r.l1_distance }));
        }
    }
    // flow and mass on data smooth in the time-change coordinate
    let total = w.total();
    let smooth_a = CircleState::from_profile(&w, |a| 0.5 + (tau * a / total).sin() + 0.3 * (2.0 * tau * a / total).cos());
    let (t1, t2) = (0.213, 0.379);
    let zero = CircleState::zeros(&w);
    let flow = |r0: &CircleState| {
        let two = transport1d::advect(&w, &transport1d::advect(&w, r0, t1).unwrap(), t2).unwrap();
        let one = transport1d::advect(&w, r0, t1 + t2).unwrap();
        two.l1_distance(&one, &w) / one.l1_distance(&zero, &w)
    };
    let mass = |r0: &CircleState| {
        let m1 = transport1d::advect(&w, r0, t1 + t2).unwrap().mass(&w);
        (m1 - r0.mass(&w)).abs() / r0.l1_distance(&zero, &w)
    };
    let (flow_a, mass_a) = (flow(&smooth_a), mass(&smooth_a));
    let (flow_s, mass_s) = (flow(&rho0), mass(&rho0));
    c.check(flow_a <= 1e-9, || format!("flow property {flow_a:e}"));
    c.check(mass_a <= 1e-9 && mass_s <= 1e-9, || format!("mass drift {mass_a:e}, {mass_s:e}"));
    let metrics = json!({
        "renormalization": renorm,
        "flow_relative": flow_a,
        "mass_relative": mass_a,
        "arclength_smooth_data": { "flow_relative": flow_s, "mass_relative": mass_s },
    });
    finish(7, None, start, c, metrics)
}

fn nonuniqueness() -> Outcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let cfg = DemoConfig { n: 4096, tests: 200, ..DemoConfig::default() };
    let metrics = match transport1d::nonuniqueness_demo(1.0, 0.25, 1.0, 0.5, &cfg) {
        Ok(d) => {
            c.check(d.initial_sup_b == 0.0, || format!("trajectory B starts at sup {}", d.initial_sup_b));
            c.check(d.sup_norm_b == 1.0, || format!("trajectory B sup-norm {}", d.sup_norm_b));
            c.check(d.max_residual_b <= 1e-6, || format!("trajectory B residual {:e}", d.max_residual_b));
            c.check(d.max_residual_a <= 1e-12, || format!("trajectory A residual {:e}", d.max_residual_a));
            let differ = d.trajectory_b.iter().skip(1).all(|s| s.sup_norm() > 0.0);
            c.check(differ, || "trajectories coincide at a positive time".into());
            json!({
                "residual_a": d.max_residual_a,
                "residual_b": d.max_residual_b,
                "sup_norm_b": d.sup_norm_b,
                "atom_bound": d.atom_bound,
                "max_principle_violated": d.max_principle_violated,
            })
        }
        Err(e) => {
            c.check(false, || format!("demo failed: {e}"));
            Value::Null
        }
    };
    finish(8, Some(10.0), start, c, metrics)
}

/// Nested square rings on an `n²` grid with `rings` equally spaced values:
/// every ring interior is an exact plateau, so the critical set spreads its
/// mass over a whole value interval. Detector calibration only.
pub fn staircase(n: usize, ring_width: usize) -> ScalarField {
    let grid = GridSpec::centered_square(n, 1.0);
    let rings = (n / 2 - 2) / ring_width;
    let thresholds: Vec<f64> = (1..=rings).map(|k| k as f64 / rings as f64).collect();
    let masks = (0..rings)
        .map(|k| {
            let r = n / 2 - 2 - k * ring_width;
            RegionMask::from_fn(grid, |i, j| {
                let d = (i as isize - n as isize / 2).abs().max((j as isize - n as isize / 2).abs()) as usize;
                d < r
            })
        })
        .collect();
    monodec::function_from_superlevels(&SuperlevelFamily { thresholds, masks }).expect("nested rings")
}

fn sard_scoring() -> Outcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let thr = SardThresholds::default();
    let g = GridSpec::centered_square(256, 1.0);
    let estar = EStarParams { min_len: 4.0 * g.h, n_levels: 64 };
    let mut fields = Vec::new();
    for (name, f) in [
        ("radial", gallery::radial_bump(g, [0.0, 0.0], 0.9, 1.0)),
        ("two_bumps_disjoint", gallery::two_bumps(g, 0.9, false)),
        ("two_bumps_overlap", gallery::two_bumps(g, 0.9, true)),
    ] {
        match sard::wsp_report_for(&f, &thr, estar) {
            Ok(r) => {
                let scores: Vec<Option<f64>> = r.components.iter().map(|c| c.score).collect();
                c.check(r.verdict, || format!("{name}: component scores {scores:?}"));
                let agree = r.components.iter().all(|c| c.verdict == c.verdict_with_e_star);
                c.check(agree, || format!("{name}: verdicts with and without E* differ"));
                if name == "two_bumps_disjoint" {
                    c.check(r.cross_singular, || format!("{name}: cross scores {:?}", r.cross));
                }
                fields.push(json!({ "field": name, "scores": scores, "cross": r.cross, "cross_singular": r.cross_singular }));
            }
            Err(e) => c.check(false, || format!("{name}: {e}")),
        }
    }
    // calibration: a histogram with a uniform part, and an engineered staircase
    let uniform = PushforwardHistogram::from_values((0..100_000).map(|k| (k as f64 + 0.5) / 100_000.0), 1.0, [0.0, 1.0], 1024);
    let (s_uniform, v_uniform) = sard::verdict(&uniform, &thr);
    c.check(s_uniform.is_some_and(|s| s <= 0.5) && v_uniform == SardVerdict::AbsolutelyContinuousPart, || format!("uniform histogram score {s_uniform:?}"));
    let stairs = staircase(512, 4);
    let rs = sard::wsp_report_for(&stairs, &thr, estar).expect("staircase decomposes");
    let s_stairs = rs.components.first().and_then(|c| c.score);
    c.check(s_stairs.is_some_and(|s| s <= 0.5) && !rs.verdict, || format!("staircase score {s_stairs:?}"));
    let metrics = json!({
        "fields": fields,
        "calibration": { "uniform_histogram": s_uniform, "staircase": s_stairs, "staircase_components": rs.components.len() },
    });
    finish(9, None, start, c, metrics)
}

fn level_tracing() -> Outcome {
    let start = Instant::now();
    let mut c = Checks::new();
    let f = gallery::radial_bump(GridSpec::centered_square(512, 1.2), [0.0, 0.0], 1.0, 1.0);
    let levels = curves::regular_levels(&f, 24).expect("nonconstant");
    let grad = field::gradient(&f);
    let (mut worst_len, mut worst_rms): (f64, f64) = (0.0, 0.0);
    let mut traced = 0;
    for &t in levels.iter().filter(|t| **t > 0.02 && **t < 0.98) {
        let cs = match curves::trace_with_gradient(&f, t, &grad) {
            Ok(cs) => cs,
            Err(e) => {
                c.check(false, || format!("level {t}: {e}"));
                continue;
            }
        };
        c.check(cs.len() == 1, || format!("level {t}: {} curves", cs.len()));
        let exact = 2.0 * PI * (1.0 - t).sqrt();
        for cv in &cs {
            traced += 1;
            let e = rel(cv.arclength, exact);
            worst_len = worst_len.max(e);
            c.check(e <= 0.01, || format!("level {t}: length {} vs {exact} ({:.3}%)", cv.arclength, 100.0 * e));
            let tn = curves::check_tangent_normal(&f, cv);
            worst_rms = worst_rms.max(tn.rms_angle);
            c.check(tn.rms_angle <= 0.02, || format!("level {t}: RMS angle {}", tn.rms_angle));
            c.check(curves::is_simple_polyline(&cv.vertices), || format!("level {t}: curve not simple"));
        }
    }
    finish(10, None, start, c, json!({ "curves": traced, "max_length_error": worst_len, "max_rms_angle": worst_rms }))
}
