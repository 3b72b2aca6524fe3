//! File formats: JSON fields and masks, CSV curves and histograms, SVG plots.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use streamdec_core::curves::LevelCurve;
use streamdec_core::sard::PushforwardHistogram;
use streamdec_core::transport1d::{CircleState, CircleWeight};
use streamdec_core::{GridSpec, RegionMask, ScalarField, VectorField};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: malformed JSON: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

pub type IoResult<T> = Result<T, IoError>;

/// On-disk field: row-major samples, `y` outer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldFile {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub origin: [f64; 2],
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VectorFile {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub origin: [f64; 2],
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
}

fn read(path: &Path) -> IoResult<String> {
    fs::read_to_string(path).map_err(|source| IoError::Io { path: path.display().to_string(), source })
}

fn write(path: &Path, text: &str) -> IoResult<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|source| IoError::Io { path: dir.display().to_string(), source })?;
        }
    }
    fs::write(path, text).map_err(|source| IoError::Io { path: path.display().to_string(), source })
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path) -> IoResult<T> {
    serde_json::from_str(&read(path)?).map_err(|source| IoError::Json { path: path.display().to_string(), source })
}

fn format_err(path: &Path, e: impl std::fmt::Display) -> IoError {
    IoError::Format { path: path.display().to_string(), message: e.to_string() }
}

/// A loaded field and the number of boundary samples that had to be zeroed.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub field: ScalarField,
    pub zeroed_boundary: usize,
}

pub fn load_field(path: &Path) -> IoResult<Loaded> {
    let file: FieldFile = parse(path)?;
    let grid = GridSpec::new(file.nx, file.ny, file.h, file.origin).map_err(|e| format_err(path, e))?;
    let mut field = ScalarField::new(grid, file.data).map_err(|e| format_err(path, e))?;
    let zeroed_boundary = field.enforce_zero_boundary();
    Ok(Loaded { field, zeroed_boundary })
}

pub fn field_to_file(f: &ScalarField) -> FieldFile {
    FieldFile { nx: f.grid.nx, ny: f.grid.ny, h: f.grid.h, origin: f.grid.origin, data: f.values.clone() }
}

pub fn save_field(path: &Path, f: &ScalarField) -> IoResult<()> {
    write(path, &serde_json::to_string(&field_to_file(f)).expect("field serializes"))
}

/// Masks share the field format with data in `{0, 1}`.
pub fn load_mask(path: &Path) -> IoResult<RegionMask> {
    let file: FieldFile = parse(path)?;
    let grid = GridSpec::new(file.nx, file.ny, file.h, file.origin).map_err(|e| format_err(path, e))?;
    if let Some(v) = file.data.iter().find(|v| **v != 0.0 && **v != 1.0) {
        return Err(format_err(path, format!("mask value {v} is not 0 or 1")));
    }
    RegionMask::new(grid, file.data.iter().map(|v| *v == 1.0).collect()).map_err(|e| format_err(path, e))
}

pub fn save_mask(path: &Path, m: &RegionMask) -> IoResult<()> {
    save_field(path, &m.to_field())
}

pub fn load_vector(path: &Path) -> IoResult<VectorField> {
    let file: VectorFile = parse(path)?;
    let grid = GridSpec::new(file.nx, file.ny, file.h, file.origin).map_err(|e| format_err(path, e))?;
    if file.vx.len() != grid.len() || file.vy.len() != grid.len() {
        return Err(format_err(path, "length mismatch"));
    }
    if file.vx.iter().chain(&file.vy).any(|v| !v.is_finite()) {
        return Err(format_err(path, "non-finite velocity"));
    }
    Ok(VectorField { grid, vx: file.vx, vy: file.vy })
}

pub fn save_vector(path: &Path, v: &VectorField) -> IoResult<()> {
    let file = VectorFile { nx: v.grid.nx, ny: v.grid.ny, h: v.grid.h, origin: v.grid.origin, vx: v.vx.clone(), vy: v.vy.clone() };
    write(path, &serde_json::to_string(&file).expect("vector field serializes"))
}

pub fn save_json(path: &Path, value: &serde_json::Value) -> IoResult<()> {
    write(path, &(serde_json::to_string_pretty(value).expect("json serializes") + "\n"))
}

fn into_string(w: csv::Writer<Vec<u8>>) -> IoResult<String> {
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

/// Columns `level, curve_id, vertex_index, x, y`.
pub fn curves_csv(levels: &[(f64, Vec<LevelCurve>)]) -> IoResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["level", "curve_id", "vertex_index", "x", "y"])?;
    for (t, cs) in levels {
        for (id, c) in cs.iter().enumerate() {
            for (k, p) in c.vertices.iter().enumerate() {
                w.write_record([t.to_string(), id.to_string(), k.to_string(), p[0].to_string(), p[1].to_string()])?;
            }
        }
    }
    into_string(w)
}

/// Columns `bin, t_lo, t_hi, mass`.
pub fn histogram_csv(h: &PushforwardHistogram) -> IoResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bin", "t_lo", "t_hi", "mass"])?;
    let width = h.bin_width();
    for (b, m) in h.masses.iter().enumerate() {
        let lo = h.t_min + b as f64 * width;
        w.write_record([b.to_string(), lo.to_string(), (lo + width).to_string(), m.to_string()])?;
    }
    into_string(w)
}

/// Columns `t, s, value, kind`; atoms are reported at their position.
pub fn circle_csv(w: &CircleWeight, states: &[CircleState]) -> IoResult<String> {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["t", "s", "value", "kind"])?;
    let h = w.h();
    for st in states {
        for (j, v) in st.segments.iter().enumerate() {
            let s = (j as f64 + 0.5) * h;
            out.write_record([st.time.to_string(), s.to_string(), v.to_string(), "segment".into()])?;
        }
        for (k, v) in st.atoms.iter().enumerate() {
            out.write_record([st.time.to_string(), w.atoms[k].position.to_string(), v.to_string(), "atom".into()])?;
        }
    }
    into_string(out)
}

pub fn save_text(path: &Path, text: &str) -> IoResult<()> {
    write(path, text)
}

/// Level curves as closed polylines over the grid bounds, `y` up.
pub fn curves_svg(grid: &GridSpec, levels: &[(f64, Vec<LevelCurve>)]) -> String {
    let [[x0, x1], [y0, y1]] = grid.bounds();
    let scale = 800.0 / (x1 - x0).max(y1 - y0);
    let (wd, ht) = ((x1 - x0) * scale, (y1 - y0) * scale);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{wd:.0}" height="{ht:.0}" viewBox="0 0 {wd:.3} {ht:.3}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let n = levels.len().max(1);
    for (li, (_, cs)) in levels.iter().enumerate() {
        let hue = 240.0 * (1.0 - li as f64 / n as f64);
        for c in cs {
            let pts: Vec<String> = c.vertices.iter().map(|p| format!("{:.3},{:.3}", (p[0] - x0) * scale, (y1 - p[1]) * scale)).collect();
            let _ = writeln!(s, r#"<polygon points="{}" fill="none" stroke="hsl({hue:.0},80%,40%)" stroke-width="1"/>"#, pts.join(" "));
        }
    }
    s.push_str("</svg>\n");
    s
}
