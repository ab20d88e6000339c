//! Two-section CSV: distances per step, a blank line, then lifted stages.
//!
//! Floats are written with 17 significant digits; a missing observed ratio
//! is an empty field.

use std::fmt::Write as _;
use std::path::Path;

use crate::experiment::DistanceTable;

pub const DISTANCE_HEADER: &str = "k,riemannian,two_norm";
pub const LIFTED_HEADER: &str = "t,rho_bound,observed_ratio";

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn render_csv(table: &DistanceTable) -> String {
    let mut s = String::new();
    s.push_str(DISTANCE_HEADER);
    s.push('\n');
    for r in &table.rows {
        let _ = writeln!(s, "{},{},{}", r.k, num(r.riemannian), num(r.two_norm));
    }
    s.push('\n');
    s.push_str(LIFTED_HEADER);
    s.push('\n');
    for r in &table.lifted {
        let ratio = r.observed_ratio.map(num).unwrap_or_default();
        let _ = writeln!(s, "{},{},{}", r.t, num(r.rho_bound), ratio);
    }
    s
}

pub fn write_csv(table: &DistanceTable, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, render_csv(table))
}
