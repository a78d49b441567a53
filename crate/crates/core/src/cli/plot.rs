//! SVG line chart of eval curves from an experiment CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::CliError;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];

/// Per-setting curves of `metric` averaged over seeds, in first-seen order.
pub fn mean_curves(csv_text: &str, metric: &str) -> Result<Vec<(String, Vec<(f64, f64)>)>, CliError> {
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = reader.headers().map_err(|e| CliError::Io(e.to_string()))?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| CliError::Config {
            field: "metric".into(),
            reason: format!("column `{name}` not in CSV"),
        })
    };
    let (c_set, c_epoch, c_metric) = (col("scale_or_ratio")?, col("epoch")?, col(metric)?);
    let mut order: Vec<String> = Vec::new();
    let mut sums: BTreeMap<(usize, u64), (f64, usize)> = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::MalformedRecord { line: i + 2, reason: e.to_string() })?;
        let parse = |c: usize| -> Result<f64, CliError> {
            rec[c].parse().map_err(|_| CliError::MalformedRecord {
                line: i + 2,
                reason: format!("not a number: {}", &rec[c]),
            })
        };
        let setting = rec[c_set].to_string();
        let idx = match order.iter().position(|s| *s == setting) {
            Some(k) => k,
            None => {
                order.push(setting);
                order.len() - 1
            }
        };
        let epoch = parse(c_epoch)? as u64;
        let e = sums.entry((idx, epoch)).or_insert((0.0, 0));
        e.0 += parse(c_metric)?;
        e.1 += 1;
    }
    Ok(order
        .into_iter()
        .enumerate()
        .map(|(k, name)| {
            let pts = sums
                .iter()
                .filter(|((i, _), _)| *i == k)
                .map(|((_, ep), (s, c))| (*ep as f64, s / *c as f64))
                .collect();
            (name, pts)
        })
        .collect())
}

pub fn render_svg(curves: &[(String, Vec<(f64, f64)>)], metric: &str) -> String {
    let all = curves.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<polyline fill="none" stroke="black" points="{m},{t} {m},{b} {r},{b}"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">epoch</text>"#, WIDTH / 2.0, HEIGHT - 12.0);
    let _ = writeln!(svg, r#"<text x="14" y="{}" font-size="12" transform="rotate(-90 14 {})" text-anchor="middle">{metric}</text>"#, HEIGHT / 2.0, HEIGHT / 2.0);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{y0:.4}</text>"#, MARGIN - 4.0, HEIGHT - MARGIN);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{y1:.4}</text>"#, MARGIN - 4.0, MARGIN + 4.0);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{x1}</text>"#, WIDTH - MARGIN, HEIGHT - MARGIN + 14.0);
    for (i, (name, pts)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, path.join(" "));
        let ly = MARGIN + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{ly}" font-size="11" fill="{color}" text-anchor="end">{}</text>"#,
            WIDTH - MARGIN,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn cmd_plot(input: &Path, output: &Path, metric: &str) -> Result<usize, CliError> {
    let text = std::fs::read_to_string(input).map_err(|e| CliError::io(input, e))?;
    let curves = mean_curves(&text, metric)?;
    std::fs::write(output, render_svg(&curves, metric)).map_err(|e| CliError::io(output, e))?;
    Ok(curves.len())
}
