//! Arrow-grid pictures of option policies.
//!
//! One panel per option (or the single policy), plus the option-choice
//! panel when there are several options. Each drawn cell gets an arrow in
//! its modal action's direction whose length is that action's probability;
//! walls, goal, buttons and terminal edges are shaded underneath.

use std::fmt::Write as _;

use optit_core::action;
use optit_core::analysis::{CellKind, GridPanel, OptionGrids};

use crate::plot::escape;

const CELL: f64 = 22.0;
const GAP: f64 = 18.0;
const OPTION_COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

fn fill(kind: CellKind) -> &'static str {
    match kind {
        CellKind::Open => "#ffffff",
        CellKind::Wall => "#555555",
        CellKind::Goal => "#9be39b",
        CellKind::Button(_) => "#ffd27f",
        CellKind::Edge => "#e4e4e4",
    }
}

fn panel(s: &mut String, g: &OptionGrids, p: &GridPanel, x0: f64, y0: f64, arrows: bool) {
    let w = g.width;
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, x0, y0 - 5.0, escape(&p.label));
    for r in 0..w {
        for c in 0..w {
            let (x, y) = (x0 + c as f64 * CELL, y0 + r as f64 * CELL);
            let kind = g.kinds[r * w + c];
            let _ = writeln!(s, r##"<rect x="{x:.1}" y="{y:.1}" width="{CELL}" height="{CELL}" fill="{}" stroke="#ccc"/>"##, fill(kind));
            if let CellKind::Button(a) = kind {
                let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="9">{}</text>"#, x + CELL / 2.0, y + CELL - 3.0, action::NAMES[a]);
            }
            let Some((m, prob)) = p.cells[r * w + c] else { continue };
            let (cx, cy) = (x + CELL / 2.0, y + CELL / 2.0);
            if arrows {
                let (dr, dc) = action::delta(m);
                let len = prob * 0.45 * CELL;
                let (ex, ey) = (cx + dc as f64 * len, cy + dr as f64 * len);
                let _ = writeln!(
                    s,
                    r#"<line x1="{:.2}" y1="{:.2}" x2="{ex:.2}" y2="{ey:.2}" stroke="black" stroke-width="1.5" marker-end="url(#head)" data-action="{m}" data-p="{prob:.4}"/>"#,
                    cx - dc as f64 * len,
                    cy - dr as f64 * len
                );
            } else {
                let color = OPTION_COLORS[m % OPTION_COLORS.len()];
                let _ = writeln!(s, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{:.2}" fill="{color}" data-option="{m}" data-p="{prob:.4}"/>"#, prob * 0.45 * CELL);
            }
        }
    }
}

/// SVG of all panels side by side.
pub fn render_option_grids(g: &OptionGrids) -> String {
    let panels = g.options.len() + g.rho.is_some() as usize;
    let side = g.width as f64 * CELL;
    let (w, h) = (GAP + panels as f64 * (side + GAP), side + 2.0 * GAP + 10.0);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#);
    s.push_str(r#"<defs><marker id="head" viewBox="0 0 6 6" refX="5" refY="3" markerWidth="4" markerHeight="4" orient="auto"><path d="M0,0 L6,3 L0,6 z"/></marker></defs>"#);
    s.push('\n');
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let y0 = GAP + 10.0;
    for (i, p) in g.options.iter().enumerate() {
        panel(&mut s, g, p, GAP + i as f64 * (side + GAP), y0, true);
    }
    if let Some(rho) = &g.rho {
        panel(&mut s, g, rho, GAP + g.options.len() as f64 * (side + GAP), y0, false);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use optit_core::analysis::{option_grids, CompassView};
    use optit_core::envs::Compass;
    use optit_core::nn::{HeadLayout, Init, MlpConfig, PolicyNet};
    use optit_core::StreamKey;

    fn arrows(svg: &str) -> Vec<(usize, f64)> {
        svg.lines()
            .filter(|l| l.contains("data-action"))
            .map(|l| {
                let get = |k: &str| l.split(&format!("{k}=\"")).nth(1).unwrap().split('"').next().unwrap().to_owned();
                (get("data-action").parse().unwrap(), get("data-p").parse().unwrap())
            })
            .collect()
    }

    #[test]
    fn uniform_policy_draws_quarter_arrows() {
        let env = Compass::new(7).unwrap();
        let p = PolicyNet::<f64>::new(MlpConfig::new(14, 1, 4).unwrap(), HeadLayout::new(1, 4, false).unwrap(), Init::ZeroOutput, &mut StreamKey::root(0).rng());
        let svg = render_option_grids(&option_grids(&p, &CompassView { env }).unwrap());
        let a = arrows(&svg);
        assert_eq!(a.len(), 25);
        assert!(a.iter().all(|&(_, p)| p == 0.25));
        assert!(!svg.contains("data-option"));
    }

    #[test]
    fn deterministic_left_policy_draws_full_left_arrows() {
        let env = Compass::new(7).unwrap();
        let mut p = PolicyNet::<f64>::new(MlpConfig::new(14, 1, 4).unwrap(), HeadLayout::new(2, 4, false).unwrap(), Init::ZeroOutput, &mut StreamKey::root(0).rng());
        // output bias: both options strongly prefer LEFT
        let last = p.mlp.num_layers() - 1;
        for n in 0..2 {
            *p.mlp.param_mut(p.mlp.param_count() - p.layout.output_dim() + n * 4 + action::LEFT).unwrap() = 40.0;
        }
        assert_eq!(p.mlp.shapes()[last].1, p.layout.output_dim());
        let svg = render_option_grids(&option_grids(&p, &CompassView { env }).unwrap());
        let a = arrows(&svg);
        assert_eq!(a.len(), 50);
        assert!(a.iter().all(|&(m, p)| m == action::LEFT && p == 1.0));
        assert_eq!(svg.matches("data-option").count(), 25);
    }
}
