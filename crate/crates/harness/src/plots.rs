//! Log-log plot data (CSV) and standalone SVG scatter plots.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::FitSpec;
use crate::error::{HarnessError, Result};
use crate::json::float;
use crate::report::{fit_rate, write_file, Axis, DeviationReport};

/// Rows of a plot: `(log x, log mean, log median, fitted log value)`.
pub fn plot_rows(report: &DeviationReport, axis: Axis, fit: FitSpec) -> Result<Vec<[f64; 4]>> {
    let cells = report.along(axis, None);
    if cells.is_empty() {
        return Err(HarnessError::Report(format!("no cells along the {} axis", axis_name(axis))));
    }
    let rate = fit_rate(report, axis, fit.statistic, fit.target, None).ok();
    Ok(cells
        .iter()
        .map(|c| {
            let x = match axis {
                Axis::H => c.h,
                Axis::N => c.n as f64,
            };
            let fitted = rate.as_ref().map_or(f64::NAN, |r| r.intercept + r.slope * x.ln());
            [x.ln(), c.summary.mean.ln(), c.summary.median.ln(), fitted]
        })
        .collect())
}

fn axis_name(axis: Axis) -> &'static str {
    match axis {
        Axis::H => "h",
        Axis::N => "n",
    }
}

pub fn plot_csv(rows: &[[f64; 4]], axis: Axis) -> String {
    let mut out = format!("log_{},log_sup_mean,log_sup_median,fit_value\n", axis_name(axis));
    for r in rows {
        let cols: Vec<String> = r
            .iter()
            .map(|v| if v.is_finite() { float(*v) } else { String::new() })
            .collect();
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

pub fn plot_svg(rows: &[[f64; 4]], axis: Axis) -> String {
    const W: f64 = 480.0;
    const H: f64 = 360.0;
    const M: f64 = 48.0;
    let finite = |v: f64| v.is_finite().then_some(v);
    let xs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let ys: Vec<f64> = rows.iter().flat_map(|r| r[1..].iter().copied().filter_map(finite)).collect();
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) }
    };
    let (x0, x1) = range(&xs);
    let (y0, y1) = range(&ys);
    let px = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let py = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r##"<rect width="{W}" height="{H}" fill="#ffffff"/>"##);
    let _ = writeln!(
        s,
        r##"<path d="M{M} {M} V{} H{}" fill="none" stroke="#000000"/>"##,
        H - M,
        W - M
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">log {}</text>"#,
        W / 2.0,
        H - 12.0,
        axis_name(axis)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" font-size="12" transform="rotate(-90 14 {})" text-anchor="middle">log sup deviation</text>"#,
        H / 2.0,
        H / 2.0
    );
    for r in rows {
        if r[1].is_finite() {
            let _ = writeln!(s, r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#1f77b4"/>"##, px(r[0]), py(r[1]));
        }
        if r[2].is_finite() {
            let _ = writeln!(
                s,
                r##"<rect x="{:.2}" y="{:.2}" width="6" height="6" fill="#d62728"/>"##,
                px(r[0]) - 3.0,
                py(r[2]) - 3.0
            );
        }
    }
    let line: Vec<String> = rows
        .iter()
        .filter(|r| r[3].is_finite())
        .map(|r| format!("{:.2},{:.2}", px(r[0]), py(r[3])))
        .collect();
    if line.len() >= 2 {
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#2ca02c"/>"##,
            line.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `plot_<axis>.csv` and `plot_<axis>.svg` into `dir`.
pub fn emit_plots(report: &DeviationReport, axis: Axis, fit: FitSpec, dir: &Path) -> Result<Vec<PathBuf>> {
    let rows = plot_rows(report, axis, fit)?;
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let csv = dir.join(format!("plot_{}.csv", axis_name(axis)));
    let svg = dir.join(format!("plot_{}.svg", axis_name(axis)));
    write_file(&csv, &plot_csv(&rows, axis))?;
    write_file(&svg, &plot_svg(&rows, axis))?;
    Ok(vec![csv, svg])
}
