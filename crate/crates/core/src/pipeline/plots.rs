//! Self-contained SVG charts rendered from the CSV outputs of a run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{Family, NetworkKind, CURVE_HEADER};
use crate::error::{Error, Result};
use crate::io;
use crate::metrics::Metric;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

fn color(network: NetworkKind) -> &'static str {
    match network {
        NetworkKind::Observed => "#d62728",
        NetworkKind::RandomNode => "#2ca02c",
        NetworkKind::RandomEdge => "#1f77b4",
    }
}

struct Series {
    name: String,
    color: &'static str,
    points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// About five round tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> (Vec<f64>, f64) {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|f| f * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    ((first..=last).map(|k| k as f64 * step).collect(), step)
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 {
        0
    } else {
        (-step.log10()).ceil() as usize
    };
    format!("{v:.decimals$}")
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        let pad = (lo.abs() * 0.1).max(1.0);
        (lo - pad, hi + pad)
    }
}

fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y1) = (0.0, 1.0, 1.0);
    }
    let (x0, x1) = padded(x0, x1);
    let (y0, y1) = padded(y0, y1);
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    let (xt, xstep) = ticks(x0, x1);
    for x in xt {
        let px = sx(x);
        let _ = writeln!(
            svg,
            r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#ddd"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP,
            TOP + ph,
            TOP + ph + 16.0,
            tick_label(x, xstep)
        );
    }
    let (yt, ystep) = ticks(y0, y1);
    for y in yt {
        let py = sy(y);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            py + 4.0,
            tick_label(y, ystep)
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 14.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{}" stroke-width="2" points="{}"/>"#,
            s.color,
            pts.join(" ")
        );
        for &(x, y) in &s.points {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}"/>"#,
                sx(x),
                sy(y),
                s.color
            );
        }
        let ly = TOP + 14.0 + 20.0 * i as f64;
        let lx = LEFT + pw + 14.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 24.0,
            s.color,
            lx + 30.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn missing(path: &Path) -> Error {
    Error::io(
        path,
        std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
    )
}

fn read_rows(path: &Path, header: &str) -> Result<Vec<csv::StringRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::format(path, format!("{other:?}")),
    })?;
    let found = rdr
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if found != header {
        return Err(Error::format(
            path,
            format!("expected header {header:?}, found {found:?}"),
        ));
    }
    let rows = rdr
        .records()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::format(path, e.to_string()))?;
    if rows.is_empty() {
        return Err(Error::format(path, "no data rows"));
    }
    Ok(rows)
}

fn number(path: &Path, field: &str) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::format(path, format!("not a number: {field:?}")))
}

/// `metric -> network -> [(scale_m, mean)]` from one curves file.
type CurveTable = BTreeMap<String, BTreeMap<NetworkKind, Vec<(f64, f64)>>>;

fn read_curves(path: &Path) -> Result<CurveTable> {
    let mut table = CurveTable::new();
    for row in read_rows(path, CURVE_HEADER)? {
        let network = NetworkKind::from_name(&row[0])
            .ok_or_else(|| Error::format(path, format!("unknown network {:?}", &row[0])))?;
        if row[5].is_empty() {
            continue;
        }
        let point = (number(path, &row[2])?, number(path, &row[5])?);
        table
            .entry(row[4].to_string())
            .or_default()
            .entry(network)
            .or_default()
            .push(point);
    }
    Ok(table)
}

fn read_histogram(path: &Path) -> Result<Vec<(f64, f64)>> {
    read_rows(path, "bin_lo,bin_hi,count")?
        .iter()
        .map(|r| Ok((number(path, &r[1])?, number(path, &r[2])?)))
        .collect()
}

fn histogram_panel(dir: &Path, prefix: &str, label: &str, title: &str) -> Result<Option<String>> {
    let mut series = Vec::new();
    for network in NetworkKind::ALL {
        let path = dir.join(format!("{prefix}_{}_{label}.csv", network.name()));
        if path.exists() {
            series.push(Series {
                name: network.name().to_string(),
                color: color(network),
                points: read_histogram(&path)?,
            });
        }
    }
    if series.is_empty() {
        return Ok(None);
    }
    Ok(Some(line_chart(
        title,
        "Edge distance (m, bin upper edge)",
        "Edges",
        &series,
    )))
}

/// Renders charts into `dir/plots`: one line chart per metric and partition family,
/// plus Dist and Loss panels for each label in `histogram_scales` and for the undivided
/// networks. Returns the written paths.
pub fn emit_plots(dir: &Path, histogram_scales: &[String]) -> Result<Vec<PathBuf>> {
    let mut charts: Vec<(String, String)> = Vec::new();
    let mut any_curves = false;
    for family in [Family::Grid, Family::Polygon] {
        let path = dir.join(family.curves_file());
        if !path.exists() {
            continue;
        }
        any_curves = true;
        let table = read_curves(&path)?;
        for m in Metric::ALL {
            let series: Vec<Series> = table
                .get(m.name())
                .into_iter()
                .flatten()
                .map(|(net, pts)| Series {
                    name: net.name().to_string(),
                    color: color(*net),
                    points: pts.clone(),
                })
                .collect();
            let x_label = match family {
                Family::Grid => "Cell size (m)",
                Family::Polygon => "Mean unit size (m, square root of area)",
            };
            charts.push((
                format!("{}_{}.svg", family.name(), m.name()),
                line_chart(
                    &format!("{} ({})", m.title(), family.name()),
                    x_label,
                    m.name(),
                    &series,
                ),
            ));
        }
    }
    if !any_curves {
        return Err(missing(&dir.join(Family::Grid.curves_file())));
    }
    if let Some(svg) = histogram_panel(
        dir,
        "dist",
        "original",
        "Edge distances of the undivided networks",
    )? {
        charts.push(("dist_original.svg".to_string(), svg));
    }
    for label in histogram_scales {
        for (prefix, what) in [("dist", "Retained"), ("loss", "Lost")] {
            let svg = histogram_panel(dir, prefix, label, &format!("{what} edge distances at {label}"))?
                .ok_or_else(|| missing(&dir.join(format!("{prefix}_observed_{label}.csv"))))?;
            charts.push((format!("{prefix}_{label}.svg"), svg));
        }
    }
    let mut written = Vec::new();
    for (name, svg) in charts {
        let path = dir.join("plots").join(name);
        io::write_text(&path, &svg)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tick_steps_are_round() {
        let (t, step) = ticks(0.0, 2400.0);
        assert_eq!(step, 500.0);
        assert_eq!(t, vec![0.0, 500.0, 1000.0, 1500.0, 2000.0]);
        let (t, step) = ticks(0.0, 0.83);
        assert_eq!(step, 0.2);
        assert_eq!(t.len(), 5);
        assert_eq!(tick_label(0.4, step), "0.4");
    }

    #[test]
    fn single_point_chart_is_well_formed() {
        let svg = line_chart(
            "t",
            "x",
            "y",
            &[Series {
                name: "observed".into(),
                color: "#000",
                points: vec![(100.0, 0.5)],
            }],
        );
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(!svg.contains("NaN"));
    }
}
