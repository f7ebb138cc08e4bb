//! Self-contained SVG figures with a CSV sidecar of the plotted coordinates.
//!
//! Element conventions, relied on by tests and downstream tooling:
//! data markers are the only `<circle>` elements, silhouette bars are
//! `<rect class="bar">`, radar series are the only `<polygon>` elements.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::DataMatrix;
use crate::error::{Error, Result};
use crate::fcm::MembershipMatrix;
use crate::metrics::SilhouetteReport;

pub const EMPHASIS: &str = "#d62728";

pub const DEFAULT_PALETTE: [&str; 9] = [
    "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf",
];

const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 50.0;
const MARKER_RADIUS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    Scatter2d,
    Scatter3dProjection,
    Membership,
    Silhouette,
    Radar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub kind: PlotKind,
    pub title: String,
    pub width: u32,
    pub height: u32,
    pub palette: Vec<String>,
}

impl PlotSpec {
    pub fn new(kind: PlotKind, title: impl Into<String>) -> Self {
        Self {
            kind,
            title: title.into(),
            width: 800,
            height: 600,
            palette: DEFAULT_PALETTE.iter().map(|c| c.to_string()).collect(),
        }
    }

    fn color(&self, label: usize) -> &str {
        if self.palette.is_empty() {
            DEFAULT_PALETTE[label % DEFAULT_PALETTE.len()]
        } else {
            &self.palette[label % self.palette.len()]
        }
    }
}

/// An SVG document and the CSV of the coordinates it draws.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Figure {
    pub svg: String,
    pub sidecar: String,
}

struct Canvas {
    out: String,
    width: f64,
    height: f64,
}

impl Canvas {
    fn new(spec: &PlotSpec) -> Self {
        let (width, height) = (spec.width.max(1) as f64, spec.height.max(1) as f64);
        let mut out = String::new();
        let _ = write!(
            out,
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
             <svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
             <rect class=\"background\" x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"#ffffff\"/>\n\
             <text class=\"title\" x=\"{tx}\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"18\">{title}</text>\n",
            w = spec.width.max(1),
            h = spec.height.max(1),
            tx = fmt(width / 2.0),
            title = escape(&spec.title),
        );
        Self { out, width, height }
    }

    fn plot_box(&self) -> (f64, f64, f64, f64) {
        (
            MARGIN_LEFT,
            MARGIN_TOP,
            (self.width - MARGIN_RIGHT).max(MARGIN_LEFT + 1.0),
            (self.height - MARGIN_BOTTOM).max(MARGIN_TOP + 1.0),
        )
    }

    fn line(&mut self, class: &str, x1: f64, y1: f64, x2: f64, y2: f64, extra: &str) {
        let _ = writeln!(
            self.out,
            "<line class=\"{class}\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#333333\" stroke-width=\"1\"{extra}/>",
            fmt(x1),
            fmt(y1),
            fmt(x2),
            fmt(y2)
        );
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, size: u32, body: &str) {
        let _ = writeln!(
            self.out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"{anchor}\" font-family=\"sans-serif\" font-size=\"{size}\">{}</text>",
            fmt(x),
            fmt(y),
            escape(body)
        );
    }

    fn marker(&mut self, class: &str, x: f64, y: f64, r: f64, color: &str, opacity: f64) {
        let _ = writeln!(
            self.out,
            "<circle class=\"{class}\" cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{color}\" fill-opacity=\"{}\"/>",
            fmt(x),
            fmt(y),
            fmt(r),
            fmt(opacity)
        );
    }

    /// Frame with tick labels at both ends of each axis.
    fn axes(&mut self, x: &Scale, y: &Scale, x_label: &str, y_label: &str) {
        let (x0, y0, x1, y1) = self.plot_box();
        self.line("axis", x0, y1, x1, y1, "");
        self.line("axis", x0, y0, x0, y1, "");
        self.text(x0, y1 + 16.0, "middle", 11, &format!("{:.2}", x.lo));
        self.text(x1, y1 + 16.0, "middle", 11, &format!("{:.2}", x.hi));
        self.text(x0 - 6.0, y1, "end", 11, &format!("{:.2}", y.lo));
        self.text(x0 - 6.0, y0 + 4.0, "end", 11, &format!("{:.2}", y.hi));
        self.text((x0 + x1) / 2.0, y1 + 36.0, "middle", 13, x_label);
        let _ = writeln!(
            self.out,
            "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 18 {})\">{}</text>",
            fmt((y0 + y1) / 2.0),
            fmt((y0 + y1) / 2.0),
            escape(y_label)
        );
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

/// Linear map from a value interval to a pixel interval.
#[derive(Debug, Clone, Copy)]
struct Scale {
    lo: f64,
    hi: f64,
    from: f64,
    to: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, from: f64, to: f64) -> Self {
        Self { lo, hi, from, to }
    }

    /// Scale covering `values` with 5 % padding.
    fn fit(values: impl Iterator<Item = f64>, from: f64, to: f64) -> Self {
        let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
            (l.min(v), h.max(v))
        });
        if !lo.is_finite() || !hi.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        Self::new(lo - pad, hi + pad, from, to)
    }

    fn map(&self, v: f64) -> f64 {
        self.from + (v - self.lo) / (self.hi - self.lo) * (self.to - self.from)
    }
}

fn fmt(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Fixed axonometric projection of a 3-D point onto the page plane.
pub fn axonometric(p: &[f64]) -> (f64, f64) {
    let (c, s) = ((PI / 6.0).cos(), (PI / 6.0).sin());
    ((p[0] - p[1]) * c, (p[0] + p[1]) * s + p[2])
}

/// Projected points with the horizontal and vertical axis labels.
type Planar = (Vec<(f64, f64)>, String, String);

fn planar_coords(data: &DataMatrix) -> Result<Planar> {
    match data.features() {
        2 => Ok((
            (0..data.rows())
                .map(|i| (data.row(i)[0], data.row(i)[1]))
                .collect(),
            data.feature_names()[0].clone(),
            data.feature_names()[1].clone(),
        )),
        3 => Ok((
            (0..data.rows()).map(|i| axonometric(data.row(i))).collect(),
            format!(
                "({} - {}) cos 30°",
                data.feature_names()[0],
                data.feature_names()[1]
            ),
            format!(
                "({} + {}) sin 30° + {}",
                data.feature_names()[0],
                data.feature_names()[1],
                data.feature_names()[2]
            ),
        )),
        f => Err(Error::Dimension(format!(
            "scatter plots need 2 or 3 features, got {f}; normalize and use a radar plot instead"
        ))),
    }
}

fn check_labels(labels: &[usize], n: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::Input(format!(
            "{} labels for {n} rows",
            labels.len()
        )));
    }
    Ok(())
}

/// One marker per row colored by label; `highlight` rows are drawn again
/// on top in the emphasis color.
pub fn plot_scatter(
    data: &DataMatrix,
    labels: &[usize],
    highlight: &[usize],
    spec: &PlotSpec,
) -> Result<Figure> {
    check_labels(labels, data.rows())?;
    if let Some(&bad) = highlight.iter().find(|&&i| i >= data.rows()) {
        return Err(Error::Input(format!("highlight index {bad} out of range")));
    }
    let opacity = vec![0.8; data.rows()];
    scatter(data, labels, &opacity, highlight, spec)
}

/// Scatter of the data colored by strongest membership, with opacity equal
/// to that membership.
pub fn plot_intersection(
    data: &DataMatrix,
    memberships: &MembershipMatrix,
    spec: &PlotSpec,
) -> Result<Figure> {
    if memberships.rows() != data.rows() {
        return Err(Error::Input("membership and data row counts differ".into()));
    }
    let (labels, opacity): (Vec<usize>, Vec<f64>) = (0..data.rows())
        .map(|i| strongest(memberships.row(i)))
        .unzip();
    scatter(data, &labels, &opacity, &[], spec)
}

fn strongest(row: &[f64]) -> (usize, f64) {
    row.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (j, &u)| {
            if u > best.1 {
                (j, u)
            } else {
                best
            }
        })
}

fn scatter(
    data: &DataMatrix,
    labels: &[usize],
    opacity: &[f64],
    highlight: &[usize],
    spec: &PlotSpec,
) -> Result<Figure> {
    let (points, x_label, y_label) = planar_coords(data)?;
    let mut canvas = Canvas::new(spec);
    let (x0, y0, x1, y1) = canvas.plot_box();
    let xs = Scale::fit(points.iter().map(|p| p.0), x0, x1);
    let ys = Scale::fit(points.iter().map(|p| p.1), y1, y0);
    canvas.axes(&xs, &ys, &x_label, &y_label);

    let mut flagged = vec![false; points.len()];
    highlight.iter().for_each(|&i| flagged[i] = true);
    let mut sidecar = String::from("index,label,highlight,x,y\n");
    let pixels: Vec<(f64, f64)> = points
        .iter()
        .map(|&(x, y)| (xs.map(x), ys.map(y)))
        .collect();
    for (i, &(px, py)) in pixels.iter().enumerate() {
        canvas.marker(
            "point",
            px,
            py,
            MARKER_RADIUS,
            spec.color(labels[i]),
            opacity[i],
        );
        let _ = writeln!(
            sidecar,
            "{i},{},{},{},{}",
            labels[i],
            flagged[i] as u8,
            fmt(px),
            fmt(py)
        );
    }
    for &i in highlight {
        let (px, py) = pixels[i];
        canvas.marker("highlight", px, py, MARKER_RADIUS + 0.5, EMPHASIS, 1.0);
    }
    Ok(Figure {
        svg: canvas.finish(),
        sidecar,
    })
}

/// Indices of the two membership columns with the largest variance, ties
/// to the lower index.
pub fn dominant_columns(memberships: &MembershipMatrix) -> (usize, usize) {
    let n = memberships.rows().max(1) as f64;
    let mut variances: Vec<(usize, f64)> = memberships
        .values()
        .columns()
        .into_iter()
        .enumerate()
        .map(|(j, col)| {
            let mean = col.sum() / n;
            (
                j,
                col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n,
            )
        })
        .collect();
    variances.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let (a, b) = (variances[0].0, variances[1].0);
    (a.min(b), a.max(b))
}

/// Membership vectors in membership space: `μ1` against `μ2` for two
/// clusters, the probability simplex for three, and the two highest-variance
/// columns beyond that.
pub fn plot_membership(memberships: &MembershipMatrix, spec: &PlotSpec) -> Result<Figure> {
    let c = memberships.clusters();
    if c < 2 {
        return Err(Error::Dimension(format!(
            "membership plots need at least 2 clusters, got {c}"
        )));
    }
    let mut canvas = Canvas::new(spec);
    let (x0, y0, x1, y1) = canvas.plot_box();
    // Square plotting region so the simplex keeps its shape.
    let side = (x1 - x0).min(y1 - y0);
    let (left, bottom) = (x0 + ((x1 - x0) - side) / 2.0, y1);
    let pad = 0.05;

    let (coords, x_label, y_label): (Vec<(f64, f64)>, String, String) = if c == 3 {
        let h = 3f64.sqrt() / 2.0;
        let xs = Scale::new(-pad, 1.0 + pad, left, left + side);
        let ys = Scale::new(-pad, 1.0 + pad, bottom, bottom - side);
        let corners = [(0.0, 0.0), (1.0, 0.0), (0.5, h)];
        let vertices: Vec<String> = corners
            .iter()
            .map(|&(x, y)| format!("{},{}", fmt(xs.map(x)), fmt(ys.map(y))))
            .collect();
        let _ = writeln!(
            canvas.out,
            "<path class=\"simplex\" d=\"M{} Z\" fill=\"none\" stroke=\"#333333\"/>",
            vertices.join(" L")
        );
        for (k, &(x, y)) in corners.iter().enumerate() {
            canvas.text(
                xs.map(x),
                ys.map(y) + if y > 0.0 { -8.0 } else { 16.0 },
                "middle",
                12,
                &format!("C.{}", k + 1),
            );
        }
        let coords = (0..memberships.rows())
            .map(|i| {
                let u = memberships.row(i);
                (xs.map(u[1] + 0.5 * u[2]), ys.map(h * u[2]))
            })
            .collect();
        (coords, String::new(), String::new())
    } else {
        let (a, b) = if c == 2 {
            (0, 1)
        } else {
            dominant_columns(memberships)
        };
        let xs = Scale::new(-pad, 1.0 + pad, left, left + side);
        let ys = Scale::new(-pad, 1.0 + pad, bottom, bottom - side);
        canvas.line(
            "axis",
            xs.map(0.0),
            ys.map(0.0),
            xs.map(1.0),
            ys.map(0.0),
            "",
        );
        canvas.line(
            "axis",
            xs.map(0.0),
            ys.map(0.0),
            xs.map(0.0),
            ys.map(1.0),
            "",
        );
        canvas.text(xs.map(0.0), ys.map(0.0) + 16.0, "middle", 11, "0");
        canvas.text(xs.map(1.0), ys.map(0.0) + 16.0, "middle", 11, "1");
        canvas.text(xs.map(0.0) - 6.0, ys.map(1.0) + 4.0, "end", 11, "1");
        if c == 2 {
            canvas.line(
                "simplex",
                xs.map(0.0),
                ys.map(1.0),
                xs.map(1.0),
                ys.map(0.0),
                " stroke-dasharray=\"4,4\"",
            );
        }
        let coords = (0..memberships.rows())
            .map(|i| {
                let u = memberships.row(i);
                (xs.map(u[a]), ys.map(u[b]))
            })
            .collect();
        (coords, format!("C.{}", a + 1), format!("C.{}", b + 1))
    };
    if !x_label.is_empty() {
        canvas.text(left + side / 2.0, bottom + 36.0, "middle", 13, &x_label);
        canvas.text(left - 30.0, bottom - side / 2.0, "middle", 13, &y_label);
    }

    let mut sidecar = String::from("index,x,y\n");
    for (i, &(px, py)) in coords.iter().enumerate() {
        let (label, strength) = strongest(memberships.row(i));
        canvas.marker("point", px, py, MARKER_RADIUS, spec.color(label), strength);
        let _ = writeln!(sidecar, "{i},{},{}", fmt(px), fmt(py));
    }
    Ok(Figure {
        svg: canvas.finish(),
        sidecar,
    })
}

/// Horizontal silhouette bars, grouped by cluster and sorted descending
/// within each group, with a dashed line at the mean.
pub fn plot_silhouette(
    report: &SilhouetteReport,
    labels: &[usize],
    spec: &PlotSpec,
) -> Result<Figure> {
    check_labels(labels, report.s.len())?;
    let mut canvas = Canvas::new(spec);
    let (x0, y0, x1, y1) = canvas.plot_box();
    let min_s = report.s.iter().cloned().fold(0.0, f64::min);
    let xs = Scale::new(min_s.min(-0.1), 1.0, x0, x1);

    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| {
        labels[a]
            .cmp(&labels[b])
            .then(report.s[b].total_cmp(&report.s[a]))
            .then(a.cmp(&b))
    });
    let groups = labels.iter().max().map_or(0, |m| m + 1);
    let gap_units = 10.0;
    let slot =
        (y1 - y0) / (order.len() as f64 + gap_units * groups.saturating_sub(1) as f64).max(1.0);
    let zero = xs.map(0.0);

    let mut sidecar = String::from("index,cluster,s,x0,x1,y\n");
    let mut y = y0;
    let mut previous = None;
    for &i in &order {
        if previous.is_some_and(|p| p != labels[i]) {
            y += gap_units * slot;
        }
        if previous != Some(labels[i]) {
            canvas.text(x0 - 6.0, y + 10.0, "end", 11, &labels[i].to_string());
        }
        previous = Some(labels[i]);
        let end = xs.map(report.s[i]);
        let (left, width) = (zero.min(end), (end - zero).abs());
        let _ = writeln!(
            canvas.out,
            "<rect class=\"bar\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>",
            fmt(left),
            fmt(y),
            fmt(width),
            fmt(slot),
            spec.color(labels[i])
        );
        let _ = writeln!(
            sidecar,
            "{i},{},{},{},{},{}",
            labels[i],
            report.s[i],
            fmt(left),
            fmt(left + width),
            fmt(y)
        );
        y += slot;
    }
    canvas.line("axis", x0, y1, x1, y1, "");
    canvas.line("zero", zero, y0, zero, y1, "");
    canvas.text(zero, y1 + 16.0, "middle", 11, "0");
    canvas.text(x1, y1 + 16.0, "middle", 11, "1");
    canvas.text((x0 + x1) / 2.0, y1 + 36.0, "middle", 13, "silhouette value");
    let mean_x = xs.map(report.mean_si);
    let _ = writeln!(
        canvas.out,
        "<line class=\"mean\" x1=\"{m}\" y1=\"{}\" x2=\"{m}\" y2=\"{}\" stroke=\"{EMPHASIS}\" stroke-width=\"1.5\" stroke-dasharray=\"6,4\"/>",
        fmt(y0),
        fmt(y1),
        m = fmt(mean_x)
    );
    canvas.text(
        mean_x + 4.0,
        y0 - 6.0,
        "start",
        11,
        &format!("SI = {:.4}", report.mean_si),
    );
    Ok(Figure {
        svg: canvas.finish(),
        sidecar,
    })
}

/// Stacked radar chart of the rows labeled `cluster`. Values must already
/// be scaled to `[0, 1]`.
pub fn plot_radar(
    data: &DataMatrix,
    labels: &[usize],
    cluster: usize,
    spec: &PlotSpec,
) -> Result<Figure> {
    check_labels(labels, data.rows())?;
    let f = data.features();
    if f < 3 {
        return Err(Error::Dimension(format!(
            "radar plots need at least 3 features, got {f}"
        )));
    }
    if let Some(v) = data.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Input(format!(
            "radar input must be MinMax-normalized, found {v}"
        )));
    }
    let mut canvas = Canvas::new(spec);
    let (x0, y0, x1, y1) = canvas.plot_box();
    let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    let radius = ((x1 - x0).min(y1 - y0) / 2.0 - 20.0).max(1.0);
    let angles: Vec<f64> = (0..f)
        .map(|k| -PI / 2.0 + 2.0 * PI * k as f64 / f as f64)
        .collect();
    let at = |k: usize, v: f64| {
        (
            cx + radius * v * angles[k].cos(),
            cy + radius * v * angles[k].sin(),
        )
    };

    for ring in [0.25, 0.5, 0.75, 1.0] {
        let d: Vec<String> = (0..f)
            .map(|k| {
                let (x, y) = at(k, ring);
                format!("{},{}", fmt(x), fmt(y))
            })
            .collect();
        let _ = writeln!(
            canvas.out,
            "<path class=\"grid\" d=\"M{} Z\" fill=\"none\" stroke=\"#cccccc\"/>",
            d.join(" L")
        );
    }
    for (k, name) in data.feature_names().iter().enumerate() {
        let (x, y) = at(k, 1.0);
        canvas.line("axis", cx, cy, x, y, "");
        let (lx, ly) = at(k, 1.08);
        canvas.text(lx, ly + 4.0, "middle", 10, name);
    }

    let color = spec.color(cluster).to_string();
    let mut sidecar = String::from("index");
    for name in data.feature_names() {
        sidecar.push(',');
        sidecar.push_str(name);
    }
    sidecar.push('\n');
    for i in (0..data.rows()).filter(|&i| labels[i] == cluster) {
        let row = data.row(i);
        let pts: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let (x, y) = at(k, v);
                format!("{},{}", fmt(x), fmt(y))
            })
            .collect();
        let _ = writeln!(
            canvas.out,
            "<polygon class=\"series\" points=\"{}\" fill=\"{color}\" fill-opacity=\"0.05\" stroke=\"{color}\" stroke-opacity=\"0.4\"/>",
            pts.join(" ")
        );
        let _ = write!(sidecar, "{i}");
        for v in row {
            let _ = write!(sidecar, ",{v}");
        }
        sidecar.push('\n');
    }
    Ok(Figure {
        svg: canvas.finish(),
        sidecar,
    })
}
