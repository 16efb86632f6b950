//! CSV and text artifacts.
//!
//! Reals are written as `{:.16e}` (17 significant digits) so files compare
//! byte-for-byte across runs and round-trip exactly.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use dsee::bounds::Report;
use dsee::sim::RegretCurve;

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub const CURVE_HEADER: &str = "t,mean_regret,std,q05,q95,reps,analytic_bound";

/// Regret curve rows; `bound(t)` fills the last column when defined.
pub fn curve_csv(curve: &RegretCurve, bound: impl Fn(u64) -> Option<f64>) -> String {
    let mut s = String::from(CURVE_HEADER);
    s.push('\n');
    for p in &curve.points {
        let b = bound(p.t).map(num).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            p.t,
            num(p.mean),
            num(p.std),
            num(p.q05),
            num(p.q95),
            p.reps,
            b
        );
    }
    s
}

/// Curve rows followed by extra per-checkpoint mean columns.
pub fn curve_csv_with(curve: &RegretCurve, extra: &[(&str, Vec<f64>)]) -> String {
    let mut s = String::from(CURVE_HEADER);
    for (name, _) in extra {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for (i, p) in curve.points.iter().enumerate() {
        let _ = write!(
            s,
            "{},{},{},{},{},{},",
            p.t,
            num(p.mean),
            num(p.std),
            num(p.q05),
            num(p.q95),
            p.reps
        );
        for (_, col) in extra {
            s.push(',');
            s.push_str(&num(col[i]));
        }
        s.push('\n');
    }
    s
}

pub fn report_csv(report: &Report) -> String {
    let mut s = String::from("size,param,empirical,bound,se,status\n");
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.size,
            num(r.param),
            num(r.empirical),
            num(r.bound),
            num(r.se),
            r.status
        );
    }
    s
}

pub fn write(dir: &Path, name: &str, contents: &str) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)
}
