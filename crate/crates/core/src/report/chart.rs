//! Static SVG bar charts: bars grouped by model, one series per variant.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::serialize::{value_rows, write_csv, ValueRow, CSV_HEADER};
use super::MetricFamily;
use crate::error::{Error, Result};
use crate::metrics::Analysis;

const PALETTE: [&str; 6] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#b07aa1"];
const BAR_W: f64 = 16.0;
const GROUP_GAP: f64 = 22.0;
const LEFT: f64 = 84.0;
const RIGHT: f64 = 20.0;
const PANEL_H: f64 = 200.0;
const PANEL_TOP: f64 = 34.0;
const PANEL_BOTTOM: f64 = 44.0;

type CellValues = BTreeMap<(String, String), Option<f64>>;

/// One panel of bars.
#[derive(Debug, Clone)]
pub struct Panel {
    pub subtitle: Option<String>,
    /// (model, variant) -> value; undefined values draw no bar.
    pub values: CellValues,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn axis_label(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 {
        "0".into()
    } else if (1e-2..1e5).contains(&a) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn unique<'a>(keys: impl Iterator<Item = &'a String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for k in keys {
        if !out.contains(k) {
            out.push(k.clone());
        }
    }
    out
}

/// Renders panels stacked vertically into one SVG document.
pub fn render_svg(title: &str, panels: &[Panel]) -> String {
    let models = unique(panels.iter().flat_map(|p| p.values.keys().map(|(m, _)| m)));
    let mut variants = unique(panels.iter().flat_map(|p| p.values.keys().map(|(_, v)| v)));
    variants.sort();
    let group_w = BAR_W * variants.len().max(1) as f64 + GROUP_GAP;
    let width = (LEFT + group_w * models.len().max(1) as f64 + RIGHT).max(320.0);
    let legend_h = 28.0;
    let panel_total = PANEL_TOP + PANEL_H + PANEL_BOTTOM;
    let height = legend_h + 24.0 + panel_total * panels.len().max(1) as f64;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="14" font-weight="bold">{}</text>"#,
        width / 2.0,
        esc(title)
    );
    for (i, v) in variants.iter().enumerate() {
        let x = LEFT + i as f64 * 70.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="30" width="10" height="10" fill="{}"/><text x="{}" y="39">{}</text>"#,
            PALETTE[i % PALETTE.len()],
            x + 14.0,
            esc(v)
        );
    }

    for (pi, panel) in panels.iter().enumerate() {
        let top = legend_h + 24.0 + pi as f64 * panel_total + PANEL_TOP;
        let bottom = top + PANEL_H;
        if let Some(sub) = &panel.subtitle {
            let _ = writeln!(s, r#"<text x="{LEFT}" y="{}" font-weight="bold">{}</text>"#, top - 12.0, esc(sub));
        }
        let defined: Vec<f64> = panel.values.values().filter_map(|v| *v).collect();
        let mut lo = defined.iter().copied().fold(0.0_f64, f64::min);
        let mut hi = defined.iter().copied().fold(0.0_f64, f64::max);
        if hi == lo {
            hi = lo + 1.0;
        }
        if !(lo.is_finite() && hi.is_finite()) {
            lo = 0.0;
            hi = 1.0;
        }
        let y_of = |v: f64| bottom - (v - lo) / (hi - lo) * PANEL_H;
        for t in 0..=4 {
            let v = lo + (hi - lo) * t as f64 / 4.0;
            let y = y_of(v);
            let _ = writeln!(
                s,
                "<line x1=\"{LEFT}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#ddd\"/><text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
                width - RIGHT,
                LEFT - 6.0,
                y + 4.0,
                axis_label(v)
            );
        }
        let zero = y_of(0.0);
        let _ = writeln!(
            s,
            r#"<line x1="{LEFT}" y1="{zero:.2}" x2="{:.2}" y2="{zero:.2}" stroke="black"/>"#,
            width - RIGHT
        );
        for (gi, model) in models.iter().enumerate() {
            let gx = LEFT + GROUP_GAP / 2.0 + gi as f64 * group_w;
            for (vi, variant) in variants.iter().enumerate() {
                let Some(Some(v)) = panel.values.get(&(model.clone(), variant.clone())) else {
                    continue;
                };
                let y = y_of(*v);
                let (y0, h) = if y < zero { (y, zero - y) } else { (zero, y - zero) };
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.2}" y="{y0:.2}" width="{BAR_W}" height="{h:.2}" fill="{}"><title>{} {}: {}</title></rect>"#,
                    gx + vi as f64 * BAR_W,
                    PALETTE[vi % PALETTE.len()],
                    esc(model),
                    esc(variant),
                    v
                );
            }
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                gx + BAR_W * variants.len() as f64 / 2.0,
                bottom + 16.0,
                esc(model)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn panels_for(family: MetricFamily, rows: &[&ValueRow]) -> Vec<Panel> {
    let mut by_beta: BTreeMap<Option<u64>, (Option<f64>, CellValues)> = BTreeMap::new();
    for r in rows {
        let key = r.beta.map(f64::to_bits);
        by_beta
            .entry(key)
            .or_insert_with(|| (r.beta, BTreeMap::new()))
            .1
            .insert((r.model.clone(), r.variant.clone()), r.value);
    }
    let mut panels: Vec<(Option<f64>, Panel)> = by_beta
        .into_values()
        .map(|(beta, values)| {
            let subtitle = beta.map(|b| format!("beta = {b}"));
            (beta, Panel { subtitle, values })
        })
        .collect();
    panels.sort_by(|a, b| a.0.unwrap_or(0.0).total_cmp(&b.0.unwrap_or(0.0)));
    if panels.is_empty() && family == MetricFamily::Gf {
        return vec![Panel { subtitle: None, values: BTreeMap::new() }];
    }
    panels.into_iter().map(|(_, p)| p).collect()
}

/// Writes `<metric>.svg` and the plotted data `<metric>.csv` for every metric
/// family. Sidecar rows are the report's CSV rows for that metric.
pub fn emit_charts(analysis: &Analysis, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let rows = value_rows(analysis);
    let mut written = Vec::new();
    for family in MetricFamily::ALL {
        let mine: Vec<&ValueRow> = rows.iter().filter(|r| r.metric == family.name()).collect();
        let mut panels = panels_for(family, &mine);
        if panels.is_empty() {
            panels.push(Panel { subtitle: None, values: BTreeMap::new() });
        }
        let svg_path = out_dir.join(format!("{}.svg", family.slug()));
        fs::write(&svg_path, render_svg(family.name(), &panels)).map_err(|e| Error::io(&svg_path, e))?;
        let csv_path = out_dir.join(format!("{}.csv", family.slug()));
        let body = write_csv(&CSV_HEADER, mine.iter().map(|r| r.record().to_vec()))?;
        fs::write(&csv_path, body).map_err(|e| Error::io(&csv_path, e))?;
        written.push(svg_path);
        written.push(csv_path);
    }
    Ok(written)
}
