#![allow(dead_code)]

pub mod fixture_expected;

use std::path::{Path, PathBuf};

use povspace::pipeline::RunConfig;
use povspace::YearSpan;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// Run configuration for the bundled 6-country fixture.
pub fn fixture_config(out_dir: &Path) -> RunConfig {
    RunConfig {
        exports: Some(fixture("exports.csv")),
        poverty: Some(fixture("poverty.csv")),
        controls: Some(fixture("controls.csv")),
        years: YearSpan {
            start: 2008,
            end: 2010,
        },
        elbow_windows: (1..=10).collect(),
        out_dir: out_dir.to_path_buf(),
        ..RunConfig::default()
    }
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub fn close_opt(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => close(a, b, tol),
        (None, None) => true,
        _ => false,
    }
}
