//! Learning-curve SVGs: across-seed mean with 95% error bars.

use std::fmt::Write as _;

use optit_core::learn::MetricsRow;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PlotError {
    #[error("no metrics files")]
    Empty,
    #[error("step grids differ between files ({0} vs {1} rows or differing steps)")]
    MismatchedGrid(usize, usize),
}

/// One curve: per-step mean and optional 95% half-width.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub steps: Vec<u64>,
    pub mean: Vec<f64>,
    /// `1.96 * sd / sqrt(n)` with the sample standard deviation; `None`
    /// for a single seed.
    pub half_width: Option<Vec<f64>>,
}

/// Across-seed statistics of windowed returns; every run must report the
/// same steps. Seeds with an empty window at a step are left out there.
pub fn aggregate(runs: &[Vec<MetricsRow>]) -> Result<Curve, PlotError> {
    let first = runs.first().ok_or(PlotError::Empty)?;
    for r in runs {
        if r.len() != first.len() || r.iter().zip(first).any(|(a, b)| a.total_env_steps != b.total_env_steps) {
            return Err(PlotError::MismatchedGrid(first.len(), r.len()));
        }
    }
    let steps: Vec<u64> = first.iter().map(|r| r.total_env_steps).collect();
    let mut mean = Vec::with_capacity(steps.len());
    let mut half = Vec::with_capacity(steps.len());
    for i in 0..steps.len() {
        let v: Vec<f64> = runs.iter().map(|r| r[i].windowed_return_mean).filter(|x| x.is_finite()).collect();
        let n = v.len() as f64;
        let m = if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / n };
        let h = if v.len() < 2 { 0.0 } else { 1.96 * (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt() };
        mean.push(m);
        half.push(h);
    }
    Ok(Curve { steps, mean, half_width: (runs.len() > 1).then_some(half) })
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct PlotStyle {
    pub title: String,
    /// Values below the floor are drawn at the floor.
    pub y_floor: Option<f64>,
    pub width: f64,
    pub height: f64,
}

impl Default for PlotStyle {
    fn default() -> Self {
        PlotStyle { title: "windowed return".into(), y_floor: None, width: 640.0, height: 400.0 }
    }
}

fn nice_ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / count as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * span {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

/// Line chart of labelled curves.
pub fn render_curves(curves: &[(String, Curve)], style: &PlotStyle) -> String {
    let clamp = |v: f64| style.y_floor.map_or(v, |f| v.max(f));
    let (mut x_max, mut y_lo, mut y_hi) = (1.0f64, f64::INFINITY, f64::NEG_INFINITY);
    for (_, c) in curves {
        for (i, &m) in c.mean.iter().enumerate() {
            if !m.is_finite() {
                continue;
            }
            let h = c.half_width.as_ref().map_or(0.0, |h| h[i]);
            y_lo = y_lo.min(clamp(m - h));
            y_hi = y_hi.max(clamp(m + h));
            x_max = x_max.max(c.steps[i] as f64);
        }
    }
    if !y_lo.is_finite() {
        (y_lo, y_hi) = (0.0, 1.0);
    }
    if y_hi - y_lo < 1e-9 {
        (y_lo, y_hi) = (y_lo - 0.5, y_hi + 0.5);
    }
    let (w, h) = (style.width, style.height);
    let (left, right, top, bottom) = (60.0, 20.0, 30.0, 45.0);
    let px = |x: f64| left + x / x_max * (w - left - right);
    let py = |y: f64| top + (y_hi - y) / (y_hi - y_lo) * (h - top - bottom);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#, w / 2.0, escape(&style.title));
    for t in nice_ticks(y_lo, y_hi, 5) {
        let y = py(t);
        let _ = writeln!(s, r##"<line x1="{left}" x2="{}" y1="{y:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{t}</text>"##, w - right, left - 5.0, y + 4.0);
    }
    for t in nice_ticks(0.0, x_max, 5) {
        let _ = writeln!(s, r##"<text x="{:.2}" y="{}" text-anchor="middle">{t}</text>"##, px(t), h - bottom + 15.0);
    }
    let _ = writeln!(s, r##"<text x="{}" y="{}" text-anchor="middle">environment steps</text>"##, w / 2.0, h - 8.0);
    let _ = writeln!(s, r##"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="#444"/>"##, w - left - right, h - top - bottom);
    for (k, (label, c)) in curves.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> =
            c.steps.iter().zip(&c.mean).filter(|(_, m)| m.is_finite()).map(|(x, m)| format!("{:.2},{:.2}", px(*x as f64), py(clamp(*m)))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        if let Some(hw) = &c.half_width {
            for ((x, m), e) in c.steps.iter().zip(&c.mean).zip(hw) {
                if m.is_finite() && *e > 0.0 {
                    let x = px(*x as f64);
                    let _ = writeln!(s, r#"<line x1="{x:.2}" x2="{x:.2}" y1="{:.2}" y2="{:.2}" stroke="{color}" class="errorbar"/>"#, py(clamp(m - e)), py(clamp(m + e)));
                }
            }
        }
        let ly = top + 14.0 + 14.0 * k as f64;
        let _ = writeln!(s, r#"<line x1="{}" x2="{}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#, left + 10.0, left + 30.0, left + 35.0, ly + 4.0, escape(label));
    }
    s.push_str("</svg>\n");
    s
}

pub fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
