//! File-format round trips.

use std::fs;

use streamdec::io;
use streamdec_core::field::{GridSpec, ScalarField, VectorField};
use streamdec_core::gallery;
use streamdec_core::transport1d::{CircleState, CircleWeight};
use streamdec_core::{curves, RegionMask};

#[test]
fn field_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("sub/f.json");
    let f = gallery::smooth_bump(GridSpec::centered_square(33, 0.7), [0.1, 0.0], 0.5, 1.0 / 3.0);
    io::save_field(&p, &f).unwrap();
    let l = io::load_field(&p).unwrap();
    assert_eq!(l.zeroed_boundary, 0);
    assert!(l.field == f, "round trip changed the field");
}

#[test]
fn boundary_samples_are_zeroed_and_counted() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.json");
    let f = ScalarField::new(GridSpec::new(4, 3, 0.5, [0.0, 0.0]).unwrap(), vec![1.0; 12]).unwrap();
    io::save_field(&p, &f).unwrap();
    let l = io::load_field(&p).unwrap();
    assert_eq!(l.zeroed_boundary, 10);
    assert!(l.field.boundary_is_zero());
    assert_eq!(l.field.at(1, 1), 1.0);
}

#[test]
fn malformed_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    fs::write(&p, "{ not json").unwrap();
    assert!(matches!(io::load_field(&p), Err(io::IoError::Json { .. })));
    fs::write(&p, r#"{"nx": 2, "ny": 2, "h": 1.0, "origin": [0, 0], "data": [1, 2, 3]}"#).unwrap();
    assert!(matches!(io::load_field(&p), Err(io::IoError::Format { .. })));
    fs::write(&p, r#"{"nx": 2, "ny": 2, "h": -1.0, "origin": [0, 0], "data": [1, 2, 3, 4]}"#).unwrap();
    assert!(matches!(io::load_field(&p), Err(io::IoError::Format { .. })));
    fs::write(&p, r#"{"nx": 2, "ny": 1, "h": 1.0, "origin": [0, 0], "data": [1, 0.5]}"#).unwrap();
    assert!(matches!(io::load_mask(&p), Err(io::IoError::Format { .. })));
    assert!(matches!(io::load_field(&dir.path().join("missing.json")), Err(io::IoError::Io { .. })));
}

#[test]
fn mask_and_vector_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = GridSpec::new(5, 4, 0.25, [1.0, -1.0]).unwrap();
    let m = RegionMask::from_fn(g, |i, j| (i + j) % 3 == 0);
    io::save_mask(&dir.path().join("m.json"), &m).unwrap();
    assert_eq!(io::load_mask(&dir.path().join("m.json")).unwrap(), m);
    let v = VectorField::from_fn(g, |x, y| [x * y, x - y]);
    io::save_vector(&dir.path().join("v.json"), &v).unwrap();
    assert_eq!(io::load_vector(&dir.path().join("v.json")).unwrap(), v);
}

#[test]
fn csv_writers_have_headers_and_rows() {
    let f = gallery::radial_bump(GridSpec::centered_square(32, 1.0), [0.0, 0.0], 0.8, 1.0);
    let t = curves::regular_levels(&f, 2).unwrap()[0];
    let cs = curves::trace_essential_level(&f, t).unwrap();
    let text = io::curves_csv(&[(t, cs.clone())]).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rdr.headers().unwrap(), vec!["level", "curve_id", "vertex_index", "x", "y"]);
    assert_eq!(rdr.records().count(), cs[0].len());
    let svg = io::curves_svg(&f.grid, &[(t, cs)]);
    assert!(svg.starts_with("<svg") && svg.contains("<polygon"));

    let w = CircleWeight::uniform(1.0, 8, 1.0).unwrap();
    let st = CircleState::from_fn(&w, |s| s);
    let text = io::circle_csv(&w, &[st.clone(), st]).unwrap();
    assert_eq!(text.lines().count(), 1 + 16);
    assert!(text.starts_with("t,s,value,kind"));

    let h = streamdec_core::sard::PushforwardHistogram::from_values([0.1, 0.2, 0.9], 1.0, [0.0, 1.0], 4);
    let text = io::histogram_csv(&h).unwrap();
    assert_eq!(text.lines().count(), 5);
}
