//! Report bundles: a machine-readable metrics document plus rendered
//! tables and SVG figures.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::Track;
use crate::error::{Error, Result};
use crate::eval::{AblationTable, ConfusionMatrix, LosoReport, Subset, TrackReport};

pub const BUNDLE_FORMAT: &str = "infant-motion-report";
pub const BUNDLE_VERSION: u32 = 1;
pub const METRICS_FILE: &str = "metrics.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub format: String,
    pub version: u32,
    /// The fully resolved configuration that produced this bundle.
    pub run_config: serde_json::Value,
    pub loso: Option<LosoReport>,
    pub ablation: Option<AblationTable>,
}

impl Bundle {
    pub fn new(run_config: serde_json::Value) -> Self {
        Bundle {
            format: BUNDLE_FORMAT.into(),
            version: BUNDLE_VERSION,
            run_config,
            loso: None,
            ablation: None,
        }
    }
}

pub fn read_bundle(dir: &Path) -> Result<Bundle> {
    let path = dir.join(METRICS_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    let b: Bundle = serde_json::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    if b.format != BUNDLE_FORMAT || b.version != BUNDLE_VERSION {
        return Err(Error::invalid(format!("{}: unsupported bundle {} v{}", path.display(), b.format, b.version)));
    }
    if b.loso.is_none() && b.ablation.is_none() {
        return Err(Error::invalid(format!("{}: bundle holds no results", path.display())));
    }
    Ok(b)
}

/// Writes the metrics document and renders every table and figure.
pub fn write_bundle(dir: &Path, bundle: &Bundle) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let path = dir.join(METRICS_FILE);
    fs::write(&path, serde_json::to_string_pretty(bundle)? + "\n")?;
    let mut written = vec![path];
    written.extend(render(dir, bundle)?);
    Ok(written)
}

/// Renders tables and figures of a bundle into `dir`.
pub fn render(dir: &Path, bundle: &Bundle) -> Result<Vec<PathBuf>> {
    let mut files: Vec<(String, String)> = Vec::new();
    if let Some(loso) = &bundle.loso {
        files.push(("table1.md".into(), table1_markdown(loso)));
        for tr in &loso.tracks {
            let name = tr.track.name();
            let mut md = String::new();
            for s in &tr.subsets {
                let _ = writeln!(md, "## {} track, {}\n", name, subset_title(s.subset));
                md.push_str(&confusion_markdown(&s.confusion));
                md.push('\n');
                files.push((format!("confusion_{name}_{}.csv", s.subset.name()), confusion_csv(&s.confusion)));
            }
            files.push((format!("confusion_{name}.md"), md));
            files.push((format!("per_class_f_{name}.svg"), per_class_f_svg(tr)));
            files.push((format!("profiles_{name}.svg"), profile_svg(tr)));
        }
    }
    if let Some(ab) = &bundle.ablation {
        files.push(("ablation.md".into(), ablation_markdown(ab)));
        let mut tracks: Vec<Track> = Vec::new();
        for row in &ab.rows {
            for (t, _, _) in &row.uar {
                if !tracks.contains(t) {
                    tracks.push(*t);
                }
            }
        }
        for t in tracks {
            files.push((format!("ablation_{}.svg", t.name()), ablation_svg(ab, t)));
        }
    }
    let mut written = Vec::new();
    for (name, content) in files {
        let p = dir.join(name);
        fs::write(&p, content)?;
        written.push(p);
    }
    Ok(written)
}

fn subset_title(s: Subset) -> &'static str {
    match s {
        Subset::FullAgreement => "Full agreement frames",
        Subset::AllFrames => "All frames",
    }
}

fn pct(v: f64) -> String {
    format!("{:.1}%", 100.0 * v)
}

fn capitalized(track: Track) -> &'static str {
    match track {
        Track::Posture => "Posture",
        Track::Movement => "Movement",
        Track::Meta => "Meta",
    }
}

/// Two blocks (full agreement, all frames) of ACC/UAR/UAP/UAF rows per track.
pub fn table1_markdown(report: &LosoReport) -> String {
    let mut out = String::new();
    for (i, subset) in Subset::BOTH.into_iter().enumerate() {
        let _ = writeln!(out, "| **{}** | **ACC** | **UAR** | **UAP** | **UAF** |", subset_title(subset));
        if i == 0 {
            out.push_str("|---|---|---|---|---|\n");
        }
        for track in [Track::Posture, Track::Movement] {
            let label = format!("{} track", capitalized(track));
            match report.track(track) {
                Some(tr) => {
                    let m = &tr.subset(subset).pooled;
                    let _ = writeln!(out, "| {label} | {} | {} | {} | {} |", pct(m.acc), pct(m.uar), pct(m.uap), pct(m.uaf));
                }
                None => {
                    let _ = writeln!(out, "| {label} | n/a | n/a | n/a | n/a |");
                }
            }
        }
    }
    out
}

/// Counts with row recall percentages; rows are truth.
pub fn confusion_markdown(cm: &ConfusionMatrix) -> String {
    let names = &cm.classes.classes;
    let mut out = String::from("| truth \\ predicted |");
    for n in names {
        let _ = write!(out, " {n} |");
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(names.len()));
    out.push('\n');
    for (i, row) in cm.counts.iter().enumerate() {
        let total: u64 = row.iter().sum();
        let _ = write!(out, "| {} |", names[i]);
        for &c in row {
            if total > 0 {
                let _ = write!(out, " {c} ({:.1}%) |", 100.0 * c as f64 / total as f64);
            } else {
                let _ = write!(out, " {c} |");
            }
        }
        out.push('\n');
    }
    out
}

pub fn confusion_csv(cm: &ConfusionMatrix) -> String {
    let mut out = String::from("truth");
    for n in &cm.classes.classes {
        let _ = write!(out, ",{n}");
    }
    out.push('\n');
    for (i, row) in cm.counts.iter().enumerate() {
        out.push_str(&cm.classes.classes[i]);
        for c in row {
            let _ = write!(out, ",{c}");
        }
        out.push('\n');
    }
    out
}

pub fn ablation_markdown(ab: &AblationTable) -> String {
    let mut cols: Vec<(Track, Subset)> = Vec::new();
    for row in &ab.rows {
        for (t, s, _) in &row.uar {
            if !cols.contains(&(*t, *s)) {
                cols.push((*t, *s));
            }
        }
    }
    let mut out = String::from("| sensors | features |");
    for (t, s) in &cols {
        let _ = write!(out, " {} UAR ({}) |", t.name(), s.name());
    }
    out.push_str("\n|---|---|");
    out.push_str(&"---|".repeat(cols.len()));
    out.push('\n');
    for row in &ab.rows {
        let tag = if row.baseline { " (baseline)" } else { "" };
        let _ = write!(out, "| {}{tag} | {} |", row.sensors, row.feature_dim);
        for &(t, s) in &cols {
            match row.uar(t, s) {
                Some(v) => {
                    let _ = write!(out, " {} |", pct(v));
                }
                None => out.push_str(" n/a |"),
            }
        }
        out.push('\n');
    }
    out
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Svg {
    body: String,
    width: f64,
    height: f64,
}

impl Svg {
    fn new(width: f64, height: f64) -> Self {
        Svg {
            body: String::new(),
            width,
            height,
        }
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, size: f64, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.1}" y="{y:.1}" text-anchor="{anchor}" font-size="{size}">{}</text>"#,
            esc(s)
        );
    }

    fn rotated_text(&mut self, x: f64, y: f64, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.1}" y="{y:.1}" text-anchor="end" font-size="11" transform="rotate(-35 {x:.1} {y:.1})">{}</text>"#,
            esc(s)
        );
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(self.body, r#"<rect x="{x:.1}" y="{y:.1}" width="{w:.1}" height="{h:.1}" fill="{fill}"/>"#);
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.1}" y1="{y1:.1}" x2="{x2:.1}" y2="{y2:.1}" stroke="{stroke}" stroke-width="{width}"/>"#
        );
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        let _ = writeln!(self.body, r#"<circle cx="{x:.1}" cy="{y:.1}" r="{r}" fill="{fill}"/>"#);
    }

    fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

const LEFT: f64 = 60.0;
const TOP: f64 = 40.0;
const PLOT_H: f64 = 240.0;

/// Axis with ticks for values in [0, 1].
fn unit_axis(svg: &mut Svg, width: f64) {
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let y = TOP + PLOT_H * (1.0 - v);
        svg.line(LEFT, y, LEFT + width, y, "#dddddd", 1.0);
        svg.text(LEFT - 6.0, y + 4.0, "end", 11.0, &format!("{v:.1}"));
    }
    svg.line(LEFT, TOP, LEFT, TOP + PLOT_H, "black", 1.0);
    svg.line(LEFT, TOP + PLOT_H, LEFT + width, TOP + PLOT_H, "black", 1.0);
}

const COLORS: [&str; 2] = ["#1f77b4", "#ff7f0e"];

/// Grouped bars of per-class F-score, one bar per subset.
pub fn per_class_f_svg(tr: &TrackReport) -> String {
    let names = &tr.classes.classes;
    let group = 70.0;
    let width = group * names.len() as f64;
    let mut svg = Svg::new(LEFT + width + 170.0, TOP + PLOT_H + 110.0);
    svg.text(LEFT + width / 2.0, 22.0, "middle", 14.0, &format!("Per-class F-score, {} track", tr.track.name()));
    unit_axis(&mut svg, width);
    for (si, s) in tr.subsets.iter().enumerate() {
        for (ci, score) in s.pooled.per_class.iter().enumerate() {
            let h = PLOT_H * score.f_score.clamp(0.0, 1.0);
            let x = LEFT + ci as f64 * group + 10.0 + si as f64 * 25.0;
            svg.rect(x, TOP + PLOT_H - h, 22.0, h, COLORS[si % 2]);
        }
        let ly = TOP + 10.0 + si as f64 * 18.0;
        svg.rect(LEFT + width + 15.0, ly, 12.0, 12.0, COLORS[si % 2]);
        svg.text(LEFT + width + 32.0, ly + 10.0, "start", 11.0, subset_title(s.subset));
    }
    for (ci, n) in names.iter().enumerate() {
        svg.rotated_text(LEFT + ci as f64 * group + group / 2.0, TOP + PLOT_H + 14.0, n);
    }
    svg.finish()
}

/// Bars of pooled all-frames UAR per sensor configuration.
pub fn ablation_svg(ab: &AblationTable, track: Track) -> String {
    let bar = 60.0;
    let width = bar * ab.rows.len().max(1) as f64;
    let mut svg = Svg::new(LEFT + width + 20.0, TOP + PLOT_H + 90.0);
    svg.text(LEFT + width / 2.0, 22.0, "middle", 14.0, &format!("UAR by sensor configuration, {} track", track.name()));
    unit_axis(&mut svg, width);
    for (i, row) in ab.rows.iter().enumerate() {
        let v = row.uar(track, Subset::AllFrames).unwrap_or(0.0);
        let h = PLOT_H * v.clamp(0.0, 1.0);
        let x = LEFT + i as f64 * bar + 8.0;
        svg.rect(x, TOP + PLOT_H - h, bar - 16.0, h, if row.baseline { COLORS[1] } else { COLORS[0] });
        svg.text(x + (bar - 16.0) / 2.0, TOP + PLOT_H - h - 4.0, "middle", 10.0, &format!("{:.2}", v));
        svg.rotated_text(x + (bar - 16.0) / 2.0, TOP + PLOT_H + 14.0, &row.sensors);
    }
    svg.finish()
}

/// Smallest relative frequency drawn on the log axis.
const PROFILE_FLOOR: f64 = 1e-4;

/// Per-class relative frequencies on a log axis: for every subject a
/// human marker and a machine marker joined by a hairline.
pub fn profile_svg(tr: &TrackReport) -> String {
    let names = &tr.classes.classes;
    let group = 80.0;
    let width = group * names.len() as f64;
    let mut svg = Svg::new(LEFT + width + 150.0, TOP + PLOT_H + 110.0);
    svg.text(LEFT + width / 2.0, 22.0, "middle", 14.0, &format!("Activity profiles, {} track", tr.track.name()));
    let decades = -PROFILE_FLOOR.log10();
    let y_of = |v: f64| TOP + PLOT_H * (-v.max(PROFILE_FLOOR).log10() / decades);
    for d in 0..=decades as i32 {
        let y = TOP + PLOT_H * d as f64 / decades;
        svg.line(LEFT, y, LEFT + width, y, "#dddddd", 1.0);
        svg.text(LEFT - 6.0, y + 4.0, "end", 11.0, &format!("1e-{d}"));
    }
    svg.line(LEFT, TOP, LEFT, TOP + PLOT_H, "black", 1.0);
    let n = tr.profiles.len().max(1) as f64;
    for (pi, p) in tr.profiles.iter().enumerate() {
        let offset = 10.0 + (group - 20.0) * (pi as f64 + 0.5) / n;
        for ci in 0..names.len() {
            let x = LEFT + ci as f64 * group + offset;
            let (yh, ym) = (y_of(p.human[ci]), y_of(p.machine[ci]));
            svg.line(x - 3.0, yh, x + 3.0, ym, "#888888", 0.8);
            svg.circle(x - 3.0, yh, 2.5, COLORS[0]);
            svg.circle(x + 3.0, ym, 2.5, COLORS[1]);
        }
    }
    for (i, label) in ["human majority", "classifier"].iter().enumerate() {
        let ly = TOP + 10.0 + i as f64 * 18.0;
        svg.circle(LEFT + width + 20.0, ly + 6.0, 4.0, COLORS[i]);
        svg.text(LEFT + width + 30.0, ly + 10.0, "start", 11.0, label);
    }
    for (ci, nme) in names.iter().enumerate() {
        svg.rotated_text(LEFT + ci as f64 * group + group / 2.0, TOP + PLOT_H + 14.0, nme);
    }
    svg.finish()
}
