use std::fs;

use perone::traffic::{generate_synthetic, load_trace_csv, DailyShape, SyntheticProfile, TrafficTrace};
use perone::Error;
use proptest::prelude::*;

fn write(dir: &tempfile::TempDir, body: &str) -> std::path::PathBuf {
    let path = dir.path().join("trace.csv");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn empty_body_with_declared_horizon_is_all_zero() {
    let dir = tempfile::tempdir().unwrap();
    let trace = load_trace_csv(&write(&dir, "t,location_id,intensity\n"), 2, Some(3)).unwrap();
    assert_eq!(trace.horizon(), 3);
    assert_eq!(trace.n_locations(), 2);
    for t in 1..=3 {
        assert_eq!(trace.slot(t), &[0.0, 0.0]);
    }
}

#[test]
fn sparse_rows_fill_with_zero() {
    let dir = tempfile::tempdir().unwrap();
    let trace = load_trace_csv(&write(&dir, "1,1,2.0\n2,2,4.0\n"), 2, None).unwrap();
    assert_eq!(trace.horizon(), 2);
    assert_eq!(trace.get(1, 0), 2.0);
    assert_eq!(trace.get(2, 1), 4.0);
    assert_eq!(trace.get(1, 1), 0.0);
    assert_eq!(trace.get(2, 0), 0.0);
}

fn parse_line(body: &str, n_locations: usize) -> usize {
    let dir = tempfile::tempdir().unwrap();
    match load_trace_csv(&write(&dir, body), n_locations, None) {
        Err(Error::Parse { line, .. }) => line as usize,
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn bad_rows_report_their_line() {
    assert_eq!(parse_line("t,location_id,intensity\n1,1,1.0\n2,1,-3\n", 1), 3);
    assert_eq!(parse_line("1,1,1.0\n1,2,abc\n", 2), 2);
    assert_eq!(parse_line("1,1,1.0\n2,1,1.0\n3,4,1.0\n", 3), 3);
    assert_eq!(parse_line("1,0,1.0\n", 3), 1);
    assert_eq!(parse_line("1,1\n", 3), 1);
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_trace_csv(&dir.path().join("nope.csv"), 1, None).unwrap_err();
    assert!(matches!(err, Error::Io { .. }), "{err:?}");
}

#[test]
fn synthetic_trace_round_trips_through_csv() {
    let profile = SyntheticProfile {
        base_min: 0.5,
        base_max: 7.0,
        slots_per_day: 12,
        shape: DailyShape::Sinusoidal {
            amplitude: 0.8,
            phase: 0.3,
        },
        noise: 0.4,
    };
    let trace = generate_synthetic(6, 48, 11, &profile).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    trace.write_csv(&path).unwrap();
    let back = load_trace_csv(&path, 6, None).unwrap();
    assert_eq!(back, trace);
}

proptest! {
    #[test]
    fn arbitrary_traces_round_trip(
        n in 1usize..5,
        rows in prop::collection::vec(prop::collection::vec(0.0f64..1e6, 4), 1..20),
    ) {
        let rows: Vec<Vec<f64>> = rows.into_iter().map(|r| r[..n].to_vec()).collect();
        let trace = TrafficTrace::from_rows(&rows).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        trace.write_csv(&path).unwrap();
        let back = load_trace_csv(&path, n, Some(rows.len())).unwrap();
        prop_assert_eq!(back, trace);
    }
}
