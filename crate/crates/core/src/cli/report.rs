use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::run::mean_stderr;
use super::Failure;
use crate::engine::RoundRecord;
use crate::{Error, Result};

pub const PLOT_WIDTH: f64 = 560.0;
pub const PLOT_HEIGHT: f64 = 320.0;
pub const MARGIN_LEFT: f64 = 60.0;
pub const MARGIN_RIGHT: f64 = 170.0;
pub const MARGIN_TOP: f64 = 20.0;
pub const MARGIN_BOTTOM: f64 = 50.0;

const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub labels: f64,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub seeds: usize,
    pub points: Vec<SeriesPoint>,
}

fn rounds_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if path.is_file() && name.starts_with("rounds_") && name.ends_with(".csv") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn read_rounds(path: &Path) -> Result<Vec<RoundRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<RoundRecord>, _>>()?;
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 2,
            detail: format!("{} has no rounds", path.display()),
        });
    }
    Ok(rows)
}

fn series_from(name: String, files: &[PathBuf]) -> Result<Series> {
    let runs: Vec<Vec<RoundRecord>> = files
        .iter()
        .map(|f| read_rounds(f))
        .collect::<Result<_>>()?;
    let first = &runs[0];
    for (run, file) in runs.iter().zip(files).skip(1) {
        if run.len() != first.len() {
            return Err(Error::Parse {
                line: run.len().min(first.len()) + 2,
                detail: format!(
                    "{} has {} rounds, {} has {}",
                    file.display(),
                    run.len(),
                    files[0].display(),
                    first.len()
                ),
            });
        }
        if let Some(i) = run
            .iter()
            .zip(first)
            .position(|(a, b)| a.labels != b.labels)
        {
            return Err(Error::Parse {
                line: i + 2,
                detail: format!(
                    "{} label counts differ from {}",
                    file.display(),
                    files[0].display()
                ),
            });
        }
    }
    let points = (0..first.len())
        .map(|i| {
            let accs: Vec<f64> = runs.iter().map(|r| r[i].accuracy).collect();
            let (mean, stderr) = mean_stderr(&accs);
            SeriesPoint {
                labels: first[i].labels as f64,
                mean,
                stderr,
            }
        })
        .collect();
    Ok(Series {
        name,
        seeds: runs.len(),
        points,
    })
}

/// One series if `dir` holds `rounds_*.csv` files, otherwise one per
/// subdirectory that does, in name order.
pub fn load_series(dir: &Path) -> Result<Vec<Series>> {
    let dir_name = |p: &Path| {
        p.file_name()
            .map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into())
    };
    let own = rounds_files(dir)?;
    if !own.is_empty() {
        return Ok(vec![series_from(dir_name(dir), &own)?]);
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    let mut out = Vec::new();
    for sub in subdirs {
        let files = rounds_files(&sub)?;
        if !files.is_empty() {
            out.push(series_from(dir_name(&sub), &files)?);
        }
    }
    if out.is_empty() {
        return Err(Error::Insufficient(format!(
            "no rounds_*.csv files under {}",
            dir.display()
        )));
    }
    Ok(out)
}

struct Frame {
    x_min: f64,
    x_max: f64,
}

impl Frame {
    fn x(&self, labels: f64) -> f64 {
        if self.x_max > self.x_min {
            MARGIN_LEFT + (labels - self.x_min) / (self.x_max - self.x_min) * PLOT_WIDTH
        } else {
            MARGIN_LEFT + 0.5 * PLOT_WIDTH
        }
    }

    fn y(&self, accuracy: f64) -> f64 {
        MARGIN_TOP + (1.0 - accuracy) * PLOT_HEIGHT
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Learning curves: x is cumulative labels over the data range, y is
/// accuracy on a fixed `[0, 1]` axis, `y_px = MARGIN_TOP + (1 − acc)·PLOT_HEIGHT`.
/// Each series draws a `mean ± stderr` band path (upper edge left to right,
/// then lower edge right to left) and a mean polyline.
pub fn render_svg(series: &[Series]) -> String {
    let xs = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.labels));
    let (x_min, x_max) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
        (lo.min(x), hi.max(x))
    });
    let f = Frame { x_min, x_max };
    let width = MARGIN_LEFT + PLOT_WIDTH + MARGIN_RIGHT;
    let height = MARGIN_TOP + PLOT_HEIGHT + MARGIN_BOTTOM;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let (left, right) = (MARGIN_LEFT, MARGIN_LEFT + PLOT_WIDTH);
    let (top, bottom) = (MARGIN_TOP, MARGIN_TOP + PLOT_HEIGHT);
    let _ = writeln!(
        svg,
        r#"<rect class="frame" x="{left}" y="{top}" width="{PLOT_WIDTH}" height="{PLOT_HEIGHT}" fill="none" stroke="black"/>"#
    );
    for i in 0..=5 {
        let acc = i as f64 / 5.0;
        let y = f.y(acc);
        let _ = writeln!(
            svg,
            r##"<line class="grid" x1="{left}" y1="{y:.4}" x2="{right}" y2="{y:.4}" stroke="#dddddd"/><text x="{:.1}" y="{:.4}" text-anchor="end">{acc:.1}</text>"##,
            left - 6.0,
            y + 4.0
        );
    }
    let ticks: Vec<f64> = if x_max > x_min {
        (0..=4)
            .map(|i| x_min + (x_max - x_min) * i as f64 / 4.0)
            .collect()
    } else {
        vec![x_min]
    };
    for t in ticks {
        let _ = writeln!(
            svg,
            r#"<text x="{:.4}" y="{:.1}" text-anchor="middle">{}</text>"#,
            f.x(t),
            bottom + 18.0,
            t.round()
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">labels</text><text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">test accuracy</text>"#,
        left + PLOT_WIDTH / 2.0,
        bottom + 40.0,
        top + PLOT_HEIGHT / 2.0,
        top + PLOT_HEIGHT / 2.0
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let name = escape(&s.name);
        let mut d = String::new();
        for (j, p) in s.points.iter().enumerate() {
            let _ = write!(
                d,
                "{}{:.4},{:.4} ",
                if j == 0 { "M" } else { "L" },
                f.x(p.labels),
                f.y(p.mean + p.stderr)
            );
        }
        for p in s.points.iter().rev() {
            let _ = write!(d, "L{:.4},{:.4} ", f.x(p.labels), f.y(p.mean - p.stderr));
        }
        d.push('Z');
        let _ = writeln!(
            svg,
            r#"<path class="band" data-series="{name}" d="{d}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#
        );
        let points: Vec<String> = s
            .points
            .iter()
            .map(|p| format!("{:.4},{:.4}", f.x(p.labels), f.y(p.mean)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="mean" data-series="{name}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            points.join(" ")
        );
        let ly = top + 14.0 + 18.0 * i as f64;
        let lx = right + 12.0;
        let _ = writeln!(
            svg,
            r#"<g class="legend"><line x1="{lx}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{ly:.1}">{name} (n={})</text></g>"#,
            ly - 4.0,
            lx + 20.0,
            ly - 4.0,
            lx + 26.0,
            s.seeds
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Render `dir` to `out` (default `<dir>/learning_curve.svg`).
pub fn cmd_report(dir: &Path, out: Option<&Path>) -> Result<PathBuf, Failure> {
    let series = load_series(dir).map_err(Failure::Config)?;
    let out = out.map_or_else(|| dir.join("learning_curve.svg"), Path::to_path_buf);
    fs::write(&out, render_svg(&series)).map_err(|e| Failure::Runtime(e.into()))?;
    Ok(out)
}
