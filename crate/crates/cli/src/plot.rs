//! Standalone SVG charts from the experiment tables. Output depends only on
//! the table contents: fixed layout, fixed number formatting.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ppgnn::data::NoiseMode;
use ppgnn::train::ModelMode;

use crate::error::{CliError, Result};
use crate::homophily::{HomophilyRow, HOMOPHILY_FILE};
use crate::output::{read_csv, write_atomic};
use crate::robustness::{RobustnessRow, ROBUSTNESS_FILE};
use crate::scaling::{ScalingRow, SCALING_FILE};

const WIDTH: f64 = 640.0;
const PANEL: f64 = 300.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 48.0;
/// Series label and the column it reads.
type Series = (&'static str, fn(&ScalingRow) -> Option<f64>);

const PALETTE: [&str; 6] = [
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#b07aa1",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Svg {
    body: String,
    height: f64,
}

impl Svg {
    fn new(height: f64) -> Self {
        Self {
            body: String::new(),
            height,
        }
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"/>"#
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}"/>"#
        );
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, size: u32, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}" font-size="{size}">{}</text>"#,
            escape(s)
        );
    }

    fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str) {
        let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="2"/>"#,
            coords.join(" ")
        );
        for (x, y) in pts {
            let _ = writeln!(
                self.body,
                r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{stroke}"/>"#
            );
        }
    }

    fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
             <svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH:.0}\" height=\"{:.0}\" viewBox=\"0 0 {WIDTH:.0} {:.0}\" font-family=\"sans-serif\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.height, self.height, self.body
        )
    }
}

/// Plot area of panel `p`: (x, y, w, h).
fn area(p: usize) -> (f64, f64, f64, f64) {
    let y = p as f64 * PANEL + TOP;
    (LEFT, y, WIDTH - LEFT - RIGHT, PANEL - TOP - BOTTOM)
}

/// Axes with y ticks given as (fraction of height, label).
fn axes(
    svg: &mut Svg,
    p: usize,
    title: &str,
    xlabel: &str,
    ylabel: &str,
    yticks: &[(f64, String)],
) {
    let (x, y, w, h) = area(p);
    svg.line(x, y + h, x + w, y + h, "black");
    svg.line(x, y, x, y + h, "black");
    for (f, label) in yticks {
        let ty = y + h - f * h;
        svg.line(x - 4.0, ty, x, ty, "black");
        svg.line(x, ty, x + w, ty, "#e0e0e0");
        svg.text(x - 6.0, ty + 4.0, "end", 11, label);
    }
    svg.text(x + w / 2.0, y - 14.0, "middle", 14, title);
    svg.text(x + w / 2.0, y + h + 38.0, "middle", 12, xlabel);
    let _ = writeln!(
        svg.body,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12" transform="rotate(-90 {:.2} {:.2})">{}</text>"#,
        x - 44.0,
        y + h / 2.0,
        x - 44.0,
        y + h / 2.0,
        escape(ylabel)
    );
}

fn unit_ticks() -> Vec<(f64, String)> {
    (0..=5)
        .map(|i| (i as f64 / 5.0, format!("{:.1}", i as f64 / 5.0)))
        .collect()
}

fn legend(svg: &mut Svg, p: usize, names: &[String]) {
    let (x, y, w, _) = area(p);
    for (i, name) in names.iter().enumerate() {
        let ly = y + 8.0 + 18.0 * i as f64;
        svg.rect(
            x + w + 12.0,
            ly - 9.0,
            10.0,
            10.0,
            PALETTE[i % PALETTE.len()],
        );
        svg.text(x + w + 28.0, ly, "start", 11, name);
    }
}

/// Grouped bars: one panel per noise mode, one group per ratio, one bar
/// per model. Missing means leave a gap.
pub fn robustness_svg(rows: &[RobustnessRow]) -> String {
    let noises: Vec<NoiseMode> = {
        let mut seen = Vec::new();
        for r in rows {
            if !seen.contains(&r.noise) {
                seen.push(r.noise);
            }
        }
        seen
    };
    let mut models: Vec<ModelMode> = Vec::new();
    for r in rows {
        if !models.contains(&r.model) {
            models.push(r.model);
        }
    }
    let names: Vec<String> = models.iter().map(|m| m.to_string()).collect();
    let panels = noises.len().max(1);
    let mut svg = Svg::new(PANEL * panels as f64);
    if noises.is_empty() {
        axes(
            &mut svg,
            0,
            "robustness",
            "ratio",
            "test accuracy",
            &unit_ticks(),
        );
    }
    for (p, noise) in noises.iter().enumerate() {
        axes(
            &mut svg,
            p,
            &format!("edge {noise}"),
            "ratio",
            "test accuracy",
            &unit_ticks(),
        );
        let mut ratios: Vec<f64> = Vec::new();
        for r in rows.iter().filter(|r| r.noise == *noise) {
            if !ratios.contains(&r.ratio) {
                ratios.push(r.ratio);
            }
        }
        let (x, y, w, h) = area(p);
        let group = w / ratios.len().max(1) as f64;
        let bar = group * 0.8 / models.len().max(1) as f64;
        for (g, ratio) in ratios.iter().enumerate() {
            let gx = x + g as f64 * group + group * 0.1;
            svg.text(
                gx + group * 0.4,
                y + h + 16.0,
                "middle",
                11,
                &format!("{:.0}%", ratio * 100.0),
            );
            for (m, model) in models.iter().enumerate() {
                let cell = rows
                    .iter()
                    .find(|r| r.noise == *noise && r.ratio == *ratio && r.model == *model);
                if let Some(mean) = cell.and_then(|c| c.mean) {
                    let bh = mean.clamp(0.0, 1.0) * h;
                    svg.rect(
                        gx + m as f64 * bar,
                        y + h - bh,
                        bar,
                        bh,
                        PALETTE[m % PALETTE.len()],
                    );
                }
            }
        }
        legend(&mut svg, p, &names);
    }
    svg.finish()
}

/// One bar per probability bin; empty bins have no bar.
pub fn homophily_svg(rows: &[HomophilyRow]) -> String {
    let mut svg = Svg::new(PANEL);
    axes(
        &mut svg,
        0,
        "same-label ratio by edge probability",
        "probability bin",
        "same-label ratio",
        &unit_ticks(),
    );
    let (x, y, w, h) = area(0);
    let slot = w / rows.len().max(1) as f64;
    for (i, r) in rows.iter().enumerate() {
        let bx = x + i as f64 * slot;
        if let Some(ratio) = r.ratio {
            let bh = ratio.clamp(0.0, 1.0) * h;
            svg.rect(bx + slot * 0.1, y + h - bh, slot * 0.8, bh, PALETTE[0]);
        }
        svg.text(
            bx + slot / 2.0,
            y + h + 16.0,
            "middle",
            10,
            &format!("{:.2}", r.hi),
        );
    }
    svg.finish()
}

/// Log-log lines of stage time against N; OOM cells are left out.
pub fn scaling_svg(rows: &[ScalingRow]) -> String {
    let mut svg = Svg::new(PANEL);
    let series: [Series; 2] = [
        ("node-node", |r| r.node_node_ms),
        ("anchor", |r| r.anchor_ms),
    ];
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|(_, f)| {
            rows.iter()
                .filter_map(|r| f(r).filter(|t| *t > 0.0).map(|t| (r.n as f64, t)))
                .collect()
        })
        .collect();
    let all: Vec<(f64, f64)> = pts.iter().flatten().copied().collect();
    if all.is_empty() {
        axes(&mut svg, 0, "graph learning time", "N", "ms", &[]);
        return svg.finish();
    }
    let decades = |vals: &mut dyn Iterator<Item = f64>| {
        let v: Vec<f64> = vals.collect();
        let lo = v
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
            .log10()
            .floor();
        let hi = v
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
            .log10()
            .ceil();
        (lo, if hi > lo { hi } else { lo + 1.0 })
    };
    let (xl, xh) = decades(&mut all.iter().map(|p| p.0));
    let (yl, yh) = decades(&mut all.iter().map(|p| p.1));
    let yticks: Vec<(f64, String)> = (yl as i32..=yh as i32)
        .map(|e| ((e as f64 - yl) / (yh - yl), format!("1e{e}")))
        .collect();
    axes(&mut svg, 0, "graph learning time", "N", "ms", &yticks);
    let (x, y, w, h) = area(0);
    let map = |(n, t): (f64, f64)| {
        (
            x + (n.log10() - xl) / (xh - xl) * w,
            y + h - (t.log10() - yl) / (yh - yl) * h,
        )
    };
    for e in xl as i32..=xh as i32 {
        let (tx, _) = map((10f64.powi(e), 10f64.powf(yl)));
        svg.line(tx, y + h, tx, y + h + 4.0, "black");
        svg.text(tx, y + h + 16.0, "middle", 11, &format!("1e{e}"));
    }
    for (i, series_pts) in pts.iter().enumerate() {
        let mapped: Vec<(f64, f64)> = series_pts.iter().map(|&p| map(p)).collect();
        if !mapped.is_empty() {
            svg.polyline(&mapped, PALETTE[i]);
        }
    }
    legend(
        &mut svg,
        0,
        &series.iter().map(|s| s.0.to_string()).collect::<Vec<_>>(),
    );
    svg.finish()
}

/// Renders every table found in `input` into `out`; returns the files
/// written. Fails when none of the tables exists.
pub fn export_plots(input: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut emit = |name: &str, svg: String| -> Result<()> {
        let path = out.join(name);
        write_atomic(&path, svg.as_bytes())?;
        written.push(path);
        Ok(())
    };
    let found: BTreeSet<&str> = [ROBUSTNESS_FILE, HOMOPHILY_FILE, SCALING_FILE]
        .into_iter()
        .filter(|f| input.join(f).is_file())
        .collect();
    if found.is_empty() {
        return Err(CliError::data(format!(
            "{}: none of {ROBUSTNESS_FILE}, {HOMOPHILY_FILE}, {SCALING_FILE} found",
            input.display()
        )));
    }
    if found.contains(ROBUSTNESS_FILE) {
        emit(
            "robustness.svg",
            robustness_svg(&read_csv(&input.join(ROBUSTNESS_FILE))?),
        )?;
    }
    if found.contains(HOMOPHILY_FILE) {
        emit(
            "homophily.svg",
            homophily_svg(&read_csv(&input.join(HOMOPHILY_FILE))?),
        )?;
    }
    if found.contains(SCALING_FILE) {
        emit(
            "scaling.svg",
            scaling_svg(&read_csv(&input.join(SCALING_FILE))?),
        )?;
    }
    Ok(written)
}
