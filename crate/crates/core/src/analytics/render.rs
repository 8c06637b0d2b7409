use std::fmt::Write as _;
use std::str::FromStr;

use super::riskmap::{RiskMap, Verdict};
use crate::error::{Error, Result};

/// Diverging ramp: blue for lower risk, gray at 0, orange for higher risk.
pub const RAMP_NEG: (u8, u8, u8) = (33, 102, 172);
pub const RAMP_MID: (u8, u8, u8) = (191, 191, 191);
pub const RAMP_POS: (u8, u8, u8) = (230, 97, 1);

const CELL_W: f64 = 150.0;
const CELL_H: f64 = 72.0;
const LEFT: f64 = 130.0;
const TOP: f64 = 64.0;
const MIN_BORDER: f64 = 0.5;
const MAX_BORDER: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderFormat {
    Text,
    Svg,
    Json,
}

impl FromStr for RenderFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Self::Text),
            "svg" => Ok(Self::Svg),
            "json" => Ok(Self::Json),
            other => Err(Error::contract(format!(
                "unknown risk map format `{other}` (expected text, svg or json)"
            ))),
        }
    }
}

pub fn render_risk_map(map: &RiskMap, format: RenderFormat) -> Result<String> {
    match format {
        RenderFormat::Json => Ok(serde_json::to_string_pretty(map)?),
        RenderFormat::Text => Ok(render_text(map)),
        RenderFormat::Svg => Ok(render_svg(map)),
    }
}

pub fn parse_risk_map(json: &str) -> Result<RiskMap> {
    Ok(serde_json::from_str(json)?)
}

fn glyph(v: Verdict) -> &'static str {
    match v {
        Verdict::Increase => "▲ increase",
        Verdict::Decrease => "▼ decrease",
        Verdict::NoEvidence => "○ no-evidence",
    }
}

fn heading(map: &RiskMap) -> String {
    let cond = if map.condition.is_empty() {
        "∅".to_owned()
    } else {
        map.condition
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    format!(
        "r(b) = log p({t}={s} | c, b) − log p({t}={s} | c);  c = {cond};  baseline {base:.6}",
        t = map.target,
        s = map.target_state,
        base = map.baseline_probability
    )
}

fn render_text(map: &RiskMap) -> String {
    let mut out = heading(map);
    out.push('\n');
    let _ = writeln!(
        out,
        "{:.0}% interval from {} parameter draws (seed {})",
        map.level * 100.0,
        map.n_param_samples,
        map.seed
    );
    let labels: Vec<String> = map
        .cells
        .iter()
        .map(|c| {
            map.axes
                .iter()
                .zip(&c.b_value)
                .map(|(a, v)| format!("{a}={v}"))
                .collect::<Vec<_>>()
                .join(", ")
        })
        .collect();
    let w = labels.iter().map(|l| l.chars().count()).max().unwrap_or(0).max(4);
    let _ = writeln!(
        out,
        "{:<w$}  {:>10}  {:>23}  {:>8}  verdict",
        "cell", "r_hat", "interval", "share"
    );
    for (c, label) in map.cells.iter().zip(&labels) {
        let flag = if c.r_hat_outside_interval { "*" } else { " " };
        let pad = w - label.chars().count();
        let _ = writeln!(
            out,
            "{label}{:pad$}  {:>10.5}{flag} [{:>10.5}, {:>10.5}]  {:>8.4}  {}",
            "",
            c.r_hat,
            c.lower,
            c.upper,
            c.population_share,
            glyph(c.verdict)
        );
    }
    if map.cells.iter().any(|c| c.r_hat_outside_interval) {
        out.push_str("* r_hat lies outside its interval\n");
    }
    out
}

fn lerp(a: (u8, u8, u8), b: (u8, u8, u8), t: f64) -> (u8, u8, u8) {
    let f = |x: u8, y: u8| (x as f64 + (y as f64 - x as f64) * t).round() as u8;
    (f(a.0, b.0), f(a.1, b.1), f(a.2, b.2))
}

/// Ramp colour for `r` on a symmetric scale `[−max_abs, max_abs]`.
pub(crate) fn ramp_color(r: f64, max_abs: f64) -> (u8, u8, u8) {
    if max_abs <= 0.0 || r == 0.0 {
        return RAMP_MID;
    }
    let t = (r / max_abs).clamp(-1.0, 1.0);
    if t > 0.0 {
        lerp(RAMP_MID, RAMP_POS, t)
    } else {
        lerp(RAMP_MID, RAMP_NEG, -t)
    }
}

/// Border width grows strictly with the population share.
pub(crate) fn border_width(share: f64) -> f64 {
    MIN_BORDER + (MAX_BORDER - MIN_BORDER) * share.clamp(0.0, 1.0)
}

fn hex((r, g, b): (u8, u8, u8)) -> String {
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn render_svg(map: &RiskMap) -> String {
    let shape = map.shape();
    let (n_rows, n_cols) = match shape.as_slice() {
        [c] => (1, *c),
        [r, c] => (*r, *c),
        _ => (1, map.cells.len()),
    };
    let max_abs = map
        .cells
        .iter()
        .map(|c| c.r_hat.abs())
        .fold(0.0, f64::max);
    let width = LEFT + CELL_W * n_cols as f64 + 20.0;
    let height = TOP + CELL_H * n_rows as f64 + 70.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="10" y="20" font-size="12">{}</text>"#,
        esc(&heading(map))
    );
    let col_axis = map.axes.last().map(String::as_str).unwrap_or("");
    let _ = writeln!(
        s,
        r#"<text x="{}" y="42" font-size="12" font-weight="bold">{}</text>"#,
        LEFT,
        esc(col_axis)
    );
    let col_states = map.axis_states.last().cloned().unwrap_or_default();
    for (j, label) in col_states.iter().enumerate() {
        let x = LEFT + CELL_W * (j as f64 + 0.5);
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="58" font-size="11" text-anchor="middle">{}</text>"#,
            esc(label)
        );
    }
    if shape.len() == 2 {
        let _ = writeln!(
            s,
            r#"<text x="10" y="{}" font-size="12" font-weight="bold">{}</text>"#,
            TOP - 8.0,
            esc(&map.axes[0])
        );
        for (i, label) in map.axis_states[0].iter().enumerate() {
            let y = TOP + CELL_H * (i as f64 + 0.5);
            let _ = writeln!(s, r#"<text x="10" y="{y}" font-size="11">{}</text>"#, esc(label));
        }
    }

    for (idx, c) in map.cells.iter().enumerate() {
        let (i, j) = (idx / n_cols, idx % n_cols);
        let x = LEFT + CELL_W * j as f64;
        let y = TOP + CELL_H * i as f64;
        let bw = border_width(c.population_share);
        let verdict = serde_json::to_value(c.verdict)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        let _ = writeln!(
            s,
            r##"<rect class="cell" data-index="{idx}" data-verdict="{verdict}" data-share="{share}" x="{x}" y="{y}" width="{w}" height="{h}" fill="{fill}" stroke="#222222" stroke-width="{bw:.4}"/>"##,
            share = c.population_share,
            w = CELL_W - 4.0,
            h = CELL_H - 4.0,
            fill = hex(ramp_color(c.r_hat, max_abs)),
        );
        let cx = x + (CELL_W - 4.0) / 2.0;
        let flag = if c.r_hat_outside_interval { "*" } else { "" };
        let _ = writeln!(
            s,
            r#"<text x="{cx}" y="{}" font-size="13" text-anchor="middle">{:+.4}{flag}</text>"#,
            y + 24.0,
            c.r_hat
        );
        let _ = writeln!(
            s,
            r#"<text x="{cx}" y="{}" font-size="11" text-anchor="middle">[{:+.4}, {:+.4}]</text>"#,
            y + 42.0,
            c.lower,
            c.upper
        );
        let _ = writeln!(
            s,
            r#"<text x="{cx}" y="{}" font-size="10" text-anchor="middle">{} · {:.1}%</text>"#,
            y + 58.0,
            esc(glyph(c.verdict)),
            c.population_share * 100.0
        );
    }

    // legend
    let ly = TOP + CELL_H * n_rows as f64 + 16.0;
    let _ = writeln!(
        s,
        r#"<defs><linearGradient id="ramp"><stop offset="0" stop-color="{}"/><stop offset="0.5" stop-color="{}"/><stop offset="1" stop-color="{}"/></linearGradient></defs>"#,
        hex(RAMP_NEG),
        hex(RAMP_MID),
        hex(RAMP_POS)
    );
    let _ = writeln!(
        s,
        r#"<rect class="legend" x="{LEFT}" y="{ly}" width="200" height="12" fill="url(#ramp)"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{LEFT}" y="{}" font-size="10">{:+.3}</text><text x="{}" y="{}" font-size="10" text-anchor="middle">0</text><text x="{}" y="{}" font-size="10" text-anchor="end">{:+.3}</text>"#,
        ly + 26.0,
        -max_abs,
        LEFT + 100.0,
        ly + 26.0,
        LEFT + 200.0,
        ly + 26.0,
        max_abs
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="10">border width ∝ population share</text>"#,
        LEFT + 220.0,
        ly + 10.0
    );
    s.push_str("</svg>\n");
    s
}
