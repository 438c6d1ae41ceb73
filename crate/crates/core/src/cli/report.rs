//! Summary table and regret-curve plot from a results CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::run::{ResultRow, Variant};
use super::CliError;
use crate::metrics::{mean, std_err};

pub const REPORT_FILE: &str = "report.txt";
pub const SVG_FILE: &str = "regret_curve.svg";

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN: f64 = 60.0;

/// Mean ± standard error of accuracy (in percent) and regret per
/// (kind, variant, shots), at the largest number of training tasks present.
pub fn render(rows: &[ResultRow], expected_hash: Option<&str>) -> Result<String, CliError> {
    let first = rows.first().ok_or_else(|| CliError::Data("results CSV has no rows".into()))?;
    if let Some(r) = rows.iter().find(|r| r.config_hash != first.config_hash) {
        return Err(CliError::Data(format!(
            "results mix configuration hashes {} and {}",
            first.config_hash, r.config_hash
        )));
    }
    if let Some(h) = expected_hash {
        if h != first.config_hash {
            return Err(CliError::Data(format!(
                "results were produced by configuration {} but {} was given",
                first.config_hash, h
            )));
        }
    }
    let t_max = rows.iter().map(|r| r.train_tasks).max().unwrap_or(0);
    let mut groups: BTreeMap<(String, Variant, usize), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.train_tasks == t_max) {
        let g = groups.entry((r.kind.clone(), r.variant, r.shots)).or_default();
        g.0.push(100.0 * r.accuracy);
        g.1.push(r.regret);
    }
    let mut out = String::new();
    let _ = writeln!(out, "experiment {}  config {}", first.experiment_id, first.config_hash);
    let _ = writeln!(out, "training tasks: {t_max}");
    let _ = writeln!(
        out,
        "{:<18} {:<18} {:>5} {:>8} {:>22} {:>22}",
        "kind", "variant", "shots", "n", "accuracy (%)", "regret"
    );
    for ((kind, variant, shots), (acc, reg)) in &groups {
        let _ = writeln!(
            out,
            "{:<18} {:<18} {:>5} {:>8} {:>22} {:>22}",
            kind,
            variant.as_str(),
            shots,
            acc.len(),
            format!("{:.2} ± {:.2}", mean(acc), std_err(acc)),
            format!("{:.4} ± {:.4}", mean(reg), std_err(reg)),
        );
    }
    Ok(out)
}

/// Mean test-task regret per variant against the number of training tasks.
/// Regret does not depend on the shot count, so one shot value is used.
pub fn regret_curves(rows: &[ResultRow]) -> BTreeMap<Variant, Vec<(usize, f64)>> {
    let Some(shot) = rows.iter().map(|r| r.shots).min() else {
        return BTreeMap::new();
    };
    let mut acc: BTreeMap<Variant, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.shots == shot) {
        acc.entry(r.variant).or_default().entry(r.train_tasks).or_default().push(r.regret);
    }
    acc.into_iter()
        .map(|(v, by_t)| (v, by_t.into_iter().map(|(t, xs)| (t, mean(&xs))).collect()))
        .collect()
}

pub fn regret_svg(rows: &[ResultRow]) -> String {
    let curves = regret_curves(rows);
    let pts: Vec<(usize, f64)> = curves.values().flatten().copied().collect();
    let (t_lo, t_hi) = pts.iter().fold((usize::MAX, 0), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let y_hi = pts.iter().map(|p| p.1).fold(0.0f64, f64::max).max(1e-12) * 1.1;
    let t_span = (t_hi.saturating_sub(t_lo)).max(1) as f64;
    let sx = |t: usize| MARGIN + (t.saturating_sub(t_lo)) as f64 / t_span * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - y / y_hi * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    let _ = writeln!(s, r#"<polyline points="{x0},{y1} {x0},{y0} {x1},{y0}" fill="none" stroke="black"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">training tasks</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" font-size="14" transform="rotate(-90 18 {})">mean test-task regret</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    if !pts.is_empty() {
        for t in [t_lo, t_hi] {
            let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle" font-size="12">{t}</text>"#, sx(t), y0 + 18.0);
        }
        for y in [0.0, y_hi / 1.1] {
            let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end" font-size="12">{y:.3}</text>"#, x0 - 6.0, sy(y) + 4.0);
        }
    }
    for (i, (variant, curve)) in curves.iter().enumerate() {
        let color = if *variant == Variant::SingleTask { "#1f77b4" } else { "#d62728" };
        let points: Vec<String> = curve.iter().map(|&(t, y)| format!("{:.1},{:.1}", sx(t), sy(y))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, points.join(" "));
        let ly = MARGIN + 20.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" font-size="12" fill="{color}">{}</text>"#,
            WIDTH - MARGIN - 140.0,
            variant.as_str()
        );
    }
    s.push_str("</svg>\n");
    s
}
