//! Plain-text SVG charts: scatter with separatrix, distribution curves,
//! accuracy-vs-ratio lines, and confusion-matrix heatmaps. Text output
//! keeps the figures assertable in tests and reproducible byte-for-byte.

use std::fmt::Write as _;

use crate::classifier::LinearModel;
use crate::error::{Error, Result};
use crate::evaluation::{ConfusionMatrix, SweepRow};
use crate::features::ChannelHistogram;
use crate::imaging::Channel;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 56.0;

const QUALIFIED_COLOR: &str = "#1f77b4";
const DEFECTIVE_COLOR: &str = "#ff7f0e";

fn fmt(x: f64) -> String {
    // Two decimals are plenty for pixel coordinates and keep files stable.
    format!("{x:.2}")
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn from_ranges(x: (f64, f64), y: (f64, f64)) -> Self {
        let pad = |lo: f64, hi: f64| {
            let span = (hi - lo).max(1e-9);
            (lo - 0.05 * span, hi + 0.05 * span)
        };
        let (x_min, x_max) = pad(x.0, x.1);
        let (y_min, y_max) = pad(y.0, y.1);
        Frame { x_min, x_max, y_min, y_max }
    }

    fn sx(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn sy(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM
            - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn svg_open(out: &mut String, title: &str) {
    write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    )
    .expect("string write");
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Round tick step to 1/2/5 x 10^k covering roughly five intervals.
fn tick_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    step * mag
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;
    write!(
        out,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    )
    .expect("string write");

    let xs = tick_step(frame.x_max - frame.x_min);
    let mut t = (frame.x_min / xs).ceil() * xs;
    while t <= frame.x_max + 1e-12 {
        let sx = frame.sx(t);
        write!(
            out,
            "<line x1=\"{}\" y1=\"{y0}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            fmt(sx),
            fmt(sx),
            fmt(y0 + 5.0),
            fmt(sx),
            fmt(y0 + 18.0),
            fmt_tick(t)
        )
        .expect("string write");
        t += xs;
    }
    let ys = tick_step(frame.y_max - frame.y_min);
    let mut t = (frame.y_min / ys).ceil() * ys;
    while t <= frame.y_max + 1e-12 {
        let sy = frame.sy(t);
        write!(
            out,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{x0}\" y2=\"{}\" stroke=\"black\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            fmt(x0 - 5.0),
            fmt(sy),
            fmt(sy),
            fmt(x0 - 8.0),
            fmt(sy + 4.0),
            fmt_tick(t)
        )
        .expect("string write");
        t += ys;
    }
    write!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{}</text>\n\
         <text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" \
         transform=\"rotate(-90 16 {})\">{}</text>\n",
        fmt((x0 + x1) / 2.0),
        fmt(HEIGHT - 14.0),
        escape(x_label),
        fmt((y0 + y1) / 2.0),
        fmt((y0 + y1) / 2.0),
        escape(y_label)
    )
    .expect("string write");
}

fn fmt_tick(t: f64) -> String {
    if t.abs() < 1e-12 {
        "0".to_string()
    } else {
        let s = format!("{t:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    }
}

/// One scatter point; `qualified` selects the open-circle style.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScatterPoint {
    pub x: f64,
    pub y: f64,
    pub qualified: bool,
}

/// Mean/std scatter with one marker per bean (open blue circle = qualified,
/// filled orange = defective) and an optional separatrix line given as raw
/// coefficients a·x + b·y + c = 0.
pub fn scatter_svg(
    points: &[ScatterPoint],
    separatrix: Option<[f64; 3]>,
    x_label: &str,
    y_label: &str,
    title: &str,
) -> Result<String> {
    if points.is_empty() {
        return Err(Error::InvalidInput("no points to plot".into()));
    }
    let xr = (
        points.iter().map(|p| p.x).fold(f64::MAX, f64::min),
        points.iter().map(|p| p.x).fold(f64::MIN, f64::max),
    );
    let yr = (
        points.iter().map(|p| p.y).fold(f64::MAX, f64::min),
        points.iter().map(|p| p.y).fold(f64::MIN, f64::max),
    );
    let frame = Frame::from_ranges(xr, yr);
    let mut out = String::new();
    svg_open(&mut out, title);
    axes(&mut out, &frame, x_label, y_label);

    if let Some([a, b, c]) = separatrix {
        if let Some(((px1, py1), (px2, py2))) = clip_line(a, b, c, &frame) {
            write!(
                out,
                "<line class=\"separatrix\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\" stroke-width=\"1.5\"/>\n",
                fmt(frame.sx(px1)),
                fmt(frame.sy(py1)),
                fmt(frame.sx(px2)),
                fmt(frame.sy(py2))
            )
            .expect("string write");
        }
    }

    for p in points {
        if p.qualified {
            write!(
                out,
                "<circle class=\"pt qualified\" cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"none\" stroke=\"{QUALIFIED_COLOR}\"/>\n",
                fmt(frame.sx(p.x)),
                fmt(frame.sy(p.y))
            )
            .expect("string write");
        } else {
            write!(
                out,
                "<circle class=\"pt defective\" cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{DEFECTIVE_COLOR}\"/>\n",
                fmt(frame.sx(p.x)),
                fmt(frame.sy(p.y))
            )
            .expect("string write");
        }
    }

    // Legend.
    let lx = WIDTH - MARGIN_RIGHT - 140.0;
    write!(
        out,
        "<circle cx=\"{lx}\" cy=\"{}\" r=\"3\" fill=\"none\" stroke=\"{QUALIFIED_COLOR}\"/>\
         <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">qualified</text>\n\
         <circle cx=\"{lx}\" cy=\"{}\" r=\"3\" fill=\"{DEFECTIVE_COLOR}\"/>\
         <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">defective</text>\n",
        fmt(MARGIN_TOP + 8.0),
        fmt(lx + 8.0),
        fmt(MARGIN_TOP + 12.0),
        fmt(MARGIN_TOP + 24.0),
        fmt(lx + 8.0),
        fmt(MARGIN_TOP + 28.0),
    )
    .expect("string write");

    out.push_str("</svg>\n");
    Ok(out)
}

/// Separatrix of a 2-component model in raw feature space:
/// (w1/s1)·x + (w2/s2)·y − (b + w1·m1/s1 + w2·m2/s2) = 0.
pub fn separatrix_coefficients(model: &LinearModel) -> Result<[f64; 3]> {
    if model.weights.len() != 2 {
        return Err(Error::InvalidInput(format!(
            "separatrix needs a 2-component model, got {} components",
            model.weights.len()
        )));
    }
    let a = model.weights[0] / model.standardization.scale[0];
    let b = model.weights[1] / model.standardization.scale[1];
    let c = -(model.bias
        + model.weights[0] * model.standardization.mean[0] / model.standardization.scale[0]
        + model.weights[1] * model.standardization.mean[1] / model.standardization.scale[1]);
    Ok([a, b, c])
}

/// Intersect a·x + b·y + c = 0 with the frame rectangle.
fn clip_line(a: f64, b: f64, c: f64, frame: &Frame) -> Option<((f64, f64), (f64, f64))> {
    let mut hits: Vec<(f64, f64)> = Vec::new();
    if b.abs() > 1e-12 {
        for x in [frame.x_min, frame.x_max] {
            let y = -(a * x + c) / b;
            if y >= frame.y_min - 1e-9 && y <= frame.y_max + 1e-9 {
                hits.push((x, y));
            }
        }
    }
    if a.abs() > 1e-12 {
        for y in [frame.y_min, frame.y_max] {
            let x = -(b * y + c) / a;
            if x >= frame.x_min - 1e-9 && x <= frame.x_max + 1e-9 {
                hits.push((x, y));
            }
        }
    }
    hits.dedup_by(|p, q| (p.0 - q.0).abs() < 1e-9 && (p.1 - q.1).abs() < 1e-9);
    if hits.len() >= 2 {
        Some((hits[0], hits[1]))
    } else {
        None
    }
}

fn channel_color(ch: Channel) -> &'static str {
    match ch {
        Channel::Red => "#d62728",
        Channel::Green => "#2ca02c",
        Channel::Blue => "#1f77b4",
    }
}

/// Distribution-curve overlay: one polyline per histogram, colored by
/// channel, y = frequency of occurrence.
pub fn curves_svg(histograms: &[ChannelHistogram], title: &str) -> Result<String> {
    if histograms.is_empty() {
        return Err(Error::InvalidInput("no histograms to plot".into()));
    }
    let mut y_max = 0.0f64;
    for h in histograms {
        for f in h.frequencies() {
            y_max = y_max.max(f);
        }
    }
    let frame = Frame::from_ranges((0.0, 255.0), (0.0, y_max.max(1e-9)));
    let mut out = String::new();
    svg_open(&mut out, title);
    axes(&mut out, &frame, "grayscale value", "frequency");
    for h in histograms {
        let mut path = String::new();
        for (v, f) in h.frequencies().iter().enumerate() {
            let cmd = if v == 0 { 'M' } else { 'L' };
            write!(path, "{cmd}{} {} ", fmt(frame.sx(v as f64)), fmt(frame.sy(*f)))
                .expect("string write");
        }
        write!(
            out,
            "<path class=\"curve {}\" d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-opacity=\"0.55\"/>\n",
            h.channel,
            path.trim_end(),
            channel_color(h.channel)
        )
        .expect("string write");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Accuracy-vs-ratio chart: one polyline with a marker per sweep row.
pub fn sweep_svg(rows: &[SweepRow], title: &str) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("no sweep rows to plot".into()));
    }
    let y_lo = rows.iter().map(|r| r.accuracy).fold(f64::MAX, f64::min);
    let frame = Frame::from_ranges((0.0, 1.0), ((y_lo - 0.05).max(0.0), 1.0));
    let mut out = String::new();
    svg_open(&mut out, title);
    axes(&mut out, &frame, "training ratio", "accuracy");
    let mut path = String::new();
    for (i, r) in rows.iter().enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        write!(path, "{cmd}{} {} ", fmt(frame.sx(r.ratio)), fmt(frame.sy(r.accuracy)))
            .expect("string write");
    }
    write!(
        out,
        "<path class=\"sweep\" d=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        path.trim_end()
    )
    .expect("string write");
    for r in rows {
        write!(
            out,
            "<circle class=\"pt\" cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"black\"/>\n",
            fmt(frame.sx(r.ratio)),
            fmt(frame.sy(r.accuracy))
        )
        .expect("string write");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Confusion-matrix heatmap with counts, true classes as rows.
pub fn confusion_svg(cm: &ConfusionMatrix, title: &str) -> Result<String> {
    let n = cm.classes.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty confusion matrix".into()));
    }
    let mut out = String::new();
    svg_open(&mut out, title);
    let grid = (WIDTH.min(HEIGHT) - 160.0) / n as f64;
    let x0 = MARGIN_LEFT + 40.0;
    let y0 = MARGIN_TOP + 30.0;
    let max_count = cm.counts.iter().flatten().copied().max().unwrap_or(1).max(1);
    for i in 0..n {
        for j in 0..n {
            let c = cm.counts[i][j];
            // Darker cell = larger count.
            let shade = 255 - (c as f64 / max_count as f64 * 160.0) as u32;
            let x = x0 + j as f64 * grid;
            let y = y0 + i as f64 * grid;
            write!(
                out,
                "<rect class=\"cell\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" \
                 fill=\"rgb({shade},{shade},255)\" stroke=\"black\"/>\n\
                 <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{c}</text>\n",
                fmt(x),
                fmt(y),
                fmt(grid),
                fmt(grid),
                fmt(x + grid / 2.0),
                fmt(y + grid / 2.0 + 5.0),
            )
            .expect("string write");
        }
    }
    for (i, class) in cm.classes.iter().enumerate() {
        write!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            fmt(x0 - 8.0),
            fmt(y0 + i as f64 * grid + grid / 2.0 + 4.0),
            escape(class),
            fmt(x0 + i as f64 * grid + grid / 2.0),
            fmt(y0 - 8.0),
            escape(class)
        )
        .expect("string write");
    }
    write!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">accuracy {}</text>\n",
        fmt(x0 + n as f64 * grid / 2.0),
        fmt(y0 + n as f64 * grid + 24.0),
        crate::format_percent(cm.accuracy())
    )
    .expect("string write");
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{LabelMap, Standardization};
    use crate::features::FeatureScheme;

    #[test]
    fn scatter_has_one_marker_per_point_and_a_separatrix() {
        let points = vec![
            ScatterPoint { x: 100.0, y: 10.0, qualified: true },
            ScatterPoint { x: 120.0, y: 30.0, qualified: false },
            ScatterPoint { x: 110.0, y: 12.0, qualified: true },
        ];
        let svg = scatter_svg(&points, Some([1.0, 1.0, -130.0]), "mean", "std", "scatter").unwrap();
        assert_eq!(svg.matches("class=\"pt").count(), 3);
        assert_eq!(svg.matches("class=\"separatrix\"").count(), 1);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn scatter_without_model_has_no_separatrix() {
        let points = vec![ScatterPoint { x: 1.0, y: 2.0, qualified: false }];
        let svg = scatter_svg(&points, None, "x", "y", "t").unwrap();
        assert_eq!(svg.matches("class=\"separatrix\"").count(), 0);
    }

    #[test]
    fn separatrix_maps_to_raw_feature_space() {
        let model = LinearModel::new(
            FeatureScheme::TwoChannel(Channel::Red),
            vec![2.0, 4.0],
            1.0,
            Standardization { mean: vec![100.0, 10.0], scale: vec![2.0, 4.0] },
            LabelMap::quality(),
        )
        .unwrap();
        let [a, b, c] = separatrix_coefficients(&model).unwrap();
        // Any raw point on the line must give decision value 0.
        let x = 103.0;
        let y = -(a * x + c) / b;
        let fv = crate::features::FeatureVector::new(
            FeatureScheme::TwoChannel(Channel::Red),
            vec![x, y],
            "p",
        )
        .unwrap();
        let z = crate::classifier::decision_value(&model, &fv).unwrap();
        assert!(z.abs() < 1e-9, "z = {z}");
    }

    #[test]
    fn curves_emit_one_path_per_histogram() {
        let mut counts = [0u64; 256];
        counts[100] = 5;
        counts[110] = 5;
        let hists = vec![
            ChannelHistogram { channel: Channel::Red, counts, total: 10 },
            ChannelHistogram { channel: Channel::Green, counts, total: 10 },
        ];
        let svg = curves_svg(&hists, "curves").unwrap();
        assert_eq!(svg.matches("class=\"curve").count(), 2);
    }

    #[test]
    fn sweep_chart_markers_match_rows() {
        let rows: Vec<SweepRow> = (1..=19)
            .map(|k| SweepRow {
                ratio: k as f64 / 20.0,
                accuracy: 0.9,
                train_size: 10,
                test_size: 10,
                seed: 0,
            })
            .collect();
        let svg = sweep_svg(&rows, "sweep").unwrap();
        assert_eq!(svg.matches("class=\"pt\"").count(), 19);
    }

    #[test]
    fn confusion_heatmap_has_n_squared_cells() {
        let cm = ConfusionMatrix::from_counts(
            vec!["site1".into(), "site2".into(), "site3".into()],
            vec![vec![114, 30, 10], vec![23, 500, 15], vec![8, 22, 128]],
        )
        .unwrap();
        let svg = confusion_svg(&cm, "confusion").unwrap();
        assert_eq!(svg.matches("class=\"cell\"").count(), 9);
        assert!(svg.contains("87.29%"));
    }

    #[test]
    fn plots_are_deterministic() {
        let points = vec![
            ScatterPoint { x: 0.123456, y: 9.87, qualified: true },
            ScatterPoint { x: -4.2, y: 3.3, qualified: false },
        ];
        let a = scatter_svg(&points, None, "x", "y", "t").unwrap();
        let b = scatter_svg(&points, None, "x", "y", "t").unwrap();
        assert_eq!(a, b);
    }
}
