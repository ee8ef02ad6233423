//! SVG trajectory figures and a flat CSV of everything they show.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::MapFile;
use crate::episode::{EpisodeLog, StepRecord};
use crate::error::{Error, Result};

/// One-sigma ellipse of a 2×2 covariance `[[a, b], [b, c]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovEllipse {
    pub semi_major: f64,
    pub semi_minor: f64,
    /// Angle of the major axis from the x-axis, radians.
    pub angle: f64,
}

impl CovEllipse {
    pub fn from_cov(a: f64, b: f64, c: f64) -> Self {
        let mid = 0.5 * (a + c);
        let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        let (l1, l2) = (mid + rad, mid - rad);
        Self {
            semi_major: l1.max(0.0).sqrt(),
            semi_minor: l2.max(0.0).sqrt(),
            angle: 0.5 * f64::atan2(2.0 * b, a - c),
        }
    }
}

#[derive(Debug, Serialize)]
struct Row {
    t: usize,
    kind: &'static str,
    id: usize,
    x: f64,
    y: f64,
    theta: Option<f64>,
    semi_major: Option<f64>,
    semi_minor: Option<f64>,
    ellipse_angle: Option<f64>,
    log_det: Option<f64>,
    observed: Option<bool>,
}

fn rows(step: &StepRecord) -> Vec<Row> {
    let mut out = vec![Row {
        t: step.t,
        kind: "robot",
        id: 0,
        x: step.pose[0],
        y: step.pose[1],
        theta: Some(step.pose[2]),
        semi_major: None,
        semi_minor: None,
        ellipse_angle: None,
        log_det: None,
        observed: None,
    }];
    for (i, y) in step.targets.iter().enumerate() {
        out.push(Row {
            t: step.t,
            kind: "target",
            id: i,
            x: y[0],
            y: y[1],
            theta: None,
            semi_major: None,
            semi_minor: None,
            ellipse_angle: None,
            log_det: None,
            observed: step.observed.get(i).copied(),
        });
    }
    for (i, (m, p)) in step.means.iter().zip(&step.pos_cov).enumerate() {
        let e = CovEllipse::from_cov(p[0], p[1], p[2]);
        out.push(Row {
            t: step.t,
            kind: "belief",
            id: i,
            x: m[0],
            y: m[1],
            theta: None,
            semi_major: Some(e.semi_major),
            semi_minor: Some(e.semi_minor),
            ellipse_angle: Some(e.angle),
            log_det: step.log_dets.get(i).copied(),
            observed: None,
        });
    }
    out
}

/// World-to-canvas transform; the y axis points up in the world and down on
/// the canvas.
struct Canvas {
    min_x: f64,
    max_y: f64,
    scale: f64,
    width: f64,
    height: f64,
}

const MARGIN: f64 = 10.0;
const CANVAS: f64 = 600.0;

impl Canvas {
    fn new(map: &MapFile) -> Self {
        let [x0, y0, x1, y1] = map.bounds;
        let scale = CANVAS / (x1 - x0).max(y1 - y0);
        Self {
            min_x: x0,
            max_y: y1,
            scale,
            width: (x1 - x0) * scale + 2.0 * MARGIN,
            height: (y1 - y0) * scale + 2.0 * MARGIN,
        }
    }

    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        (
            MARGIN + (x - self.min_x) * self.scale,
            MARGIN + (self.max_y - y) * self.scale,
        )
    }

    fn rect(&self, r: &[f64; 4], style: &str, s: &mut String) {
        let (x, y) = self.px(r[0], r[3]);
        let _ = writeln!(
            s,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" {style}/>"#,
            (r[2] - r[0]) * self.scale,
            (r[3] - r[1]) * self.scale
        );
    }

    fn polyline(&self, pts: impl Iterator<Item = (f64, f64)>, style: &str, s: &mut String) {
        let mut d = String::new();
        for (x, y) in pts {
            let (u, v) = self.px(x, y);
            let _ = write!(d, "{u:.2},{v:.2} ");
        }
        if !d.is_empty() {
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" {style}/>"#, d.trim_end());
        }
    }
}

/// SVG of the episode up to and including step `frame`.
pub fn frame_svg(log: &EpisodeLog, frame: Option<usize>) -> String {
    let c = Canvas::new(&log.header.map);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" data-schema="{}">"#,
        c.width,
        c.height,
        crate::episode::EPISODE_SCHEMA
    );
    c.rect(&log.header.map.bounds, r#"fill="white" stroke="black" stroke-width="2""#, &mut s);
    for o in &log.header.map.obstacles {
        c.rect(o, r#"fill="gray" stroke="black""#, &mut s);
    }

    let shown: Vec<&StepRecord> = match frame {
        Some(f) => log.steps.iter().filter(|st| st.t <= f).collect(),
        None => Vec::new(),
    };
    if let Some(cur) = shown.last() {
        c.polyline(shown.iter().map(|st| (st.pose[0], st.pose[1])), r#"stroke="blue" stroke-width="1.5""#, &mut s);
        for i in 0..cur.targets.len() {
            c.polyline(
                shown.iter().filter_map(|st| st.targets.get(i)).map(|y| (y[0], y[1])),
                r#"stroke="red" stroke-width="1" stroke-dasharray="4 2""#,
                &mut s,
            );
        }
        for (m, p) in cur.means.iter().zip(&cur.pos_cov) {
            let e = CovEllipse::from_cov(p[0], p[1], p[2]);
            let (u, v) = c.px(m[0], m[1]);
            let _ = writeln!(
                s,
                r#"<ellipse cx="{u:.2}" cy="{v:.2}" rx="{:.3}" ry="{:.3}" transform="rotate({:.3} {u:.2} {v:.2})" fill="green" fill-opacity="0.25" stroke="green"/>"#,
                e.semi_major * c.scale,
                e.semi_minor * c.scale,
                -e.angle.to_degrees()
            );
            let _ = writeln!(s, r#"<circle cx="{u:.2}" cy="{v:.2}" r="2.5" fill="green"/>"#);
        }
        for y in &cur.targets {
            let (u, v) = c.px(y[0], y[1]);
            let _ = writeln!(s, r#"<circle cx="{u:.2}" cy="{v:.2}" r="4" fill="red"/>"#);
        }
        let [x, y, th] = cur.pose;
        let tri: Vec<(f64, f64)> = [(0.9, 0.0), (-0.5, 0.5), (-0.5, -0.5)]
            .iter()
            .map(|&(a, b)| c.px(x + a * th.cos() - b * th.sin(), y + a * th.sin() + b * th.cos()))
            .collect();
        let _ = writeln!(
            s,
            r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="blue"/>"#,
            tri[0].0, tri[0].1, tri[1].0, tri[1].1, tri[2].0, tri[2].1
        );
        let _ = writeln!(s, r#"<text x="{:.0}" y="{:.0}" font-size="14">t = {}</text>"#, MARGIN + 4.0, MARGIN + 16.0, cur.t);
    }
    s.push_str("</svg>\n");
    s
}

/// Write `frame_TTTT.svg` for each requested step (the last step when none
/// are given) and `episode.csv` with every plotted quantity. A log without
/// steps yields a single figure of the map outline.
pub fn render(log: &EpisodeLog, frames: &[usize], out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let wanted: Vec<Option<usize>> = if log.steps.is_empty() {
        vec![None]
    } else if frames.is_empty() {
        vec![log.steps.last().map(|s| s.t)]
    } else {
        frames.iter().map(|&f| Some(f)).collect()
    };
    for f in wanted {
        let name = match f {
            Some(t) => format!("frame_{t:04}.svg"),
            None => "frame_empty.svg".into(),
        };
        let p = out_dir.join(name);
        std::fs::write(&p, frame_svg(log, f)).map_err(|e| Error::io(&p, e))?;
        written.push(p);
    }
    let p = out_dir.join("episode.csv");
    let mut w = csv::Writer::from_path(&p)?;
    for st in &log.steps {
        for r in rows(st) {
            w.serialize(r)?;
        }
    }
    w.flush().map_err(|e| Error::io(&p, e))?;
    written.push(p);
    Ok(written)
}
