//! Minimal SVG scatter plots of the first two embedding dimensions.

use std::fmt::Write as _;

use rfphate::Embedding;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 620.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 550.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

// viridis at five evenly spaced stops
const RAMP: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

pub enum Coloring {
    Categorical { codes: Vec<usize>, levels: Vec<String> },
    Continuous { values: Vec<f64> },
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn ramp(u: f64) -> String {
    let u = if u.is_finite() { u.clamp(0.0, 1.0) } else { 0.0 };
    let pos = u * (RAMP.len() - 1) as f64;
    let i = (pos.floor() as usize).min(RAMP.len() - 2);
    let f = pos - i as f64;
    let (a, b) = (RAMP[i], RAMP[i + 1]);
    let mix = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi - lo > 0.0 {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

/// Scatter of dimensions 1 and 2 (dimension 2 is zero for 1-D embeddings),
/// coloured by `coloring`, with a legend titled `legend_title`.
pub fn scatter_svg(emb: &Embedding, coloring: &Coloring, legend_title: &str) -> String {
    let n = emb.n();
    let xs: Vec<f64> = (0..n).map(|i| emb.y[(i, 0)]).collect();
    let ys: Vec<f64> = (0..n).map(|i| if emb.m() > 1 { emb.y[(i, 1)] } else { 0.0 }).collect();
    let (x0, x1) = span(xs.iter().copied());
    let (y0, y1) = span(ys.iter().copied());
    let px = |v: f64| LEFT + (v - x0) / (x1 - x0) * (RIGHT - LEFT);
    let py = |v: f64| BOTTOM - (v - y0) / (y1 - y0) * (BOTTOM - TOP);

    let colors: Vec<String> = match coloring {
        Coloring::Categorical { codes, .. } => codes.iter().map(|&c| PALETTE[c % PALETTE.len()].to_string()).collect(),
        Coloring::Continuous { values } => {
            let (lo, hi) = span(values.iter().copied());
            values.iter().map(|&v| ramp((v - lo) / (hi - lo))).collect()
        }
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        RIGHT - LEFT,
        BOTTOM - TOP
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">dim_1</text>"#, (LEFT + RIGHT) / 2.0, BOTTOM + 35.0);
    let _ = writeln!(
        s,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">dim_2</text>"#,
        (TOP + BOTTOM) / 2.0
    );
    for (i, color) in colors.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}" fill-opacity="0.8"/>"#,
            px(xs[i]),
            py(ys[i])
        );
    }

    let lx = RIGHT + 25.0;
    let _ = writeln!(s, r#"<text x="{lx}" y="{}" font-weight="bold">{}</text>"#, TOP + 10.0, escape(legend_title));
    match coloring {
        Coloring::Categorical { levels, .. } => {
            for (k, level) in levels.iter().enumerate() {
                let y = TOP + 30.0 + 20.0 * k as f64;
                let _ = writeln!(s, r#"<circle cx="{}" cy="{}" r="5" fill="{}"/>"#, lx + 5.0, y - 4.0, PALETTE[k % PALETTE.len()]);
                let _ = writeln!(s, r#"<text x="{}" y="{y}">{}</text>"#, lx + 16.0, escape(level));
            }
        }
        Coloring::Continuous { values } => {
            let (lo, hi) = span(values.iter().copied());
            let _ = writeln!(s, r#"<defs><linearGradient id="ramp" x1="0" y1="1" x2="0" y2="0">"#);
            for (k, _) in RAMP.iter().enumerate() {
                let u = k as f64 / (RAMP.len() - 1) as f64;
                let _ = writeln!(s, r#"<stop offset="{u}" stop-color="{}"/>"#, ramp(u));
            }
            let _ = writeln!(s, "</linearGradient></defs>");
            let _ = writeln!(s, r#"<rect x="{lx}" y="{}" width="16" height="200" fill="url(#ramp)"/>"#, TOP + 25.0);
            let _ = writeln!(s, r#"<text x="{}" y="{}">{hi:.3}</text>"#, lx + 22.0, TOP + 35.0);
            let _ = writeln!(s, r#"<text x="{}" y="{}">{lo:.3}</text>"#, lx + 22.0, TOP + 225.0);
        }
    }
    s.push_str("</svg>\n");
    s
}
