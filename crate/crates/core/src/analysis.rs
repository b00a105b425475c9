//! Post-processing: exponential-rate regression, restart-interval
//! statistics, CSV export and SVG plots.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::discrete::IterateRecord;
use crate::error::{Error, Result};
use crate::restart::Sample;

/// Gaps at or below this are left out of the log-linear fit.
pub const FIT_FLOOR: f64 = 1e-30;

/// Closed time window `[t_min, t_max]` for the regression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitWindow {
    pub t_min: f64,
    pub t_max: f64,
}

impl FitWindow {
    pub const ALL: FitWindow = FitWindow {
        t_min: f64::NEG_INFINITY,
        t_max: f64::INFINITY,
    };

    pub fn up_to(t_max: f64) -> Self {
        FitWindow {
            t_min: f64::NEG_INFINITY,
            t_max,
        }
    }

    fn contains(&self, t: f64) -> bool {
        t >= self.t_min && t <= self.t_max
    }
}

/// `gap ≈ A e^{−B t}` fitted by least squares on `ln(gap)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionFit {
    pub a: f64,
    pub b: f64,
    pub r_squared: f64,
    /// Time span of the samples that entered the fit.
    pub window: (f64, f64),
    pub points: usize,
}

pub fn fit_exponential(samples: &[(f64, f64)]) -> Result<RegressionFit> {
    fit_exponential_in(samples, FitWindow::ALL)
}

/// Fit restricted to samples inside `window` with gap above [`FIT_FLOOR`].
pub fn fit_exponential_in(samples: &[(f64, f64)], window: FitWindow) -> Result<RegressionFit> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(t, g)| window.contains(*t) && *g > FIT_FLOOR && g.is_finite())
        .map(|&(t, g)| (t, g.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 positive samples in the fit window, found {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, y) in &pts {
        let dt = t - mean_t;
        let dy = y - mean_y;
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    if stt == 0.0 {
        return Err(Error::InsufficientData("all samples share one time value".into()));
    }
    let slope = sty / stt;
    let intercept = mean_y - slope * mean_t;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sty * sty / (stt * syy)).clamp(0.0, 1.0)
    };
    let t_lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let t_hi = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(RegressionFit {
        a: intercept.exp(),
        b: -slope,
        r_squared,
        window: (t_lo, t_hi),
        points: pts.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum VarianceKind {
    #[default]
    Population,
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalStats {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
}

pub fn interval_stats(intervals: &[f64]) -> Result<IntervalStats> {
    interval_stats_with(intervals, VarianceKind::Population)
}

pub fn interval_stats_with(intervals: &[f64], kind: VarianceKind) -> Result<IntervalStats> {
    if intervals.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = intervals.len();
    let mean = intervals.iter().sum::<f64>() / n as f64;
    let ss: f64 = intervals.iter().map(|x| (x - mean) * (x - mean)).sum();
    let variance = match kind {
        VarianceKind::Population => ss / n as f64,
        VarianceKind::Sample if n > 1 => ss / (n - 1) as f64,
        VarianceKind::Sample => 0.0,
    };
    Ok(IntervalStats {
        count: n,
        mean,
        variance,
    })
}

pub const CONTINUOUS_HEADER: &str = "t,f_gap,speed,restarted";
pub const DISCRETE_HEADER: &str = "k,f_gap,step_norm,restarted";

/// 17 significant digits; parses back to the same `f64`.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn continuous_csv(samples: &[Sample]) -> String {
    let mut s = String::with_capacity(64 * (samples.len() + 1));
    s.push_str(CONTINUOUS_HEADER);
    s.push('\n');
    for r in samples {
        let _ = writeln!(s, "{},{},{},{}", num(r.t), num(r.f_gap), num(r.speed), r.restarted as u8);
    }
    s
}

pub fn discrete_csv(records: &[IterateRecord]) -> String {
    let mut s = String::with_capacity(64 * (records.len() + 1));
    s.push_str(DISCRETE_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(s, "{},{},{},{}", r.k, num(r.f_gap), num(r.step_norm), r.restarted as u8);
    }
    s
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `t,f_gap,speed,restarted` rows in time order.
pub fn export_continuous_csv(samples: &[Sample], path: &Path) -> Result<()> {
    write_file(path, &continuous_csv(samples))
}

/// Writes `k,f_gap,step_norm,restarted` rows in iteration order.
pub fn export_discrete_csv(records: &[IterateRecord], path: &Path) -> Result<()> {
    write_file(path, &discrete_csv(records))
}

/// One parsed CSV row: first column, gap, speed or step norm, restart flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvRow {
    pub time_or_k: f64,
    pub f_gap: f64,
    pub norm: f64,
    pub restarted: bool,
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CONTINUOUS_HEADER || h == DISCRETE_HEADER => {}
        other => return Err(Error::Domain(format!("unexpected CSV header {other:?}"))),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let cols: Vec<&str> = line.split(',').collect();
            let bad = || Error::Domain(format!("malformed CSV row {}: {line:?}", i + 2));
            if cols.len() != 4 {
                return Err(bad());
            }
            let f = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(CsvRow {
                time_or_k: f(cols[0])?,
                f_gap: f(cols[1])?,
                norm: f(cols[2])?,
                restarted: match cols[3] {
                    "0" => false,
                    "1" => true,
                    _ => return Err(bad()),
                },
            })
        })
        .collect()
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}

/// A curve on the log-gap plot.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
            dashed: false,
        }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

/// `C e^{−Kt} · gap₀`, drawn as a dashed overlay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub c: f64,
    pub k: f64,
    pub gap0: f64,
}

impl Envelope {
    pub fn at(&self, t: f64) -> f64 {
        self.c * (-self.k * t).exp() * self.gap0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotStyle {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub width: u32,
    pub height: u32,
    /// Points marked with a small circle (restarts).
    pub markers: Vec<(f64, f64)>,
    pub envelope: Option<Envelope>,
    /// Restrict the x axis; `None` uses the data range.
    pub x_range: Option<(f64, f64)>,
    /// Series longer than this are thinned by a fixed stride.
    pub max_vertices: usize,
    /// `false` plots raw values on a linear axis (for signed curves).
    pub log_y: bool,
}

impl Default for PlotStyle {
    fn default() -> Self {
        Self {
            title: String::new(),
            x_label: "t".into(),
            y_label: "f - f*".into(),
            width: 720,
            height: 480,
            markers: Vec::new(),
            envelope: None,
            x_range: None,
            max_vertices: 4000,
            log_y: true,
        }
    }
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const PLOT_FLOOR: f64 = 1e-30;

fn thin(points: &[(f64, f64)], max: usize) -> Vec<(f64, f64)> {
    if points.len() <= max || max < 2 {
        return points.to_vec();
    }
    let stride = points.len().div_ceil(max - 1);
    let mut out: Vec<(f64, f64)> = points.iter().step_by(stride).copied().collect();
    if out.last() != points.last() {
        out.push(*points.last().unwrap());
    }
    out
}

/// Renders the gap curves on a log₁₀ axis as a standalone SVG document.
pub fn render_svg(series: &[Series], style: &PlotStyle) -> Result<String> {
    let in_x = |t: f64| style.x_range.is_none_or(|(a, b)| t >= a && t <= b);
    let curves: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            let pts: Vec<(f64, f64)> = s.points.iter().copied().filter(|p| in_x(p.0) && p.1.is_finite()).collect();
            thin(&pts, style.max_vertices)
        })
        .collect();
    if curves.iter().all(|c| c.is_empty()) {
        return Err(Error::EmptyInput);
    }

    let all = curves.iter().flatten();
    let (mut x0, mut x1) = style.x_range.unwrap_or((f64::INFINITY, f64::NEG_INFINITY));
    if style.x_range.is_none() {
        for p in all.clone() {
            x0 = x0.min(p.0);
            x1 = x1.max(p.0);
        }
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let ly = |g: f64| if style.log_y { g.max(PLOT_FLOOR).log10() } else { g };
    let mut y0 = f64::INFINITY;
    let mut y1 = f64::NEG_INFINITY;
    for p in all {
        y0 = y0.min(ly(p.1));
        y1 = y1.max(ly(p.1));
    }
    if let Some(env) = &style.envelope {
        y1 = y1.max(ly(env.at(x0)));
    }
    if style.log_y {
        y0 = y0.floor();
        y1 = y1.ceil();
    } else {
        let pad = 0.05 * (y1 - y0);
        y0 -= pad;
        y1 += pad;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }

    let (w, h) = (style.width as f64, style.height as f64);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 50.0);
    let px = |t: f64| ml + (t - x0) / (x1 - x0) * (w - ml - mr);
    let py = |g: f64| mt + (y1 - ly(g).clamp(y0, y1)) / (y1 - y0) * (h - mt - mb);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif" font-size="12">"#,
        style.width, style.height, style.width, style.height
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if !style.title.is_empty() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            w / 2.0,
            escape(&style.title)
        );
    }
    // axes
    let _ = writeln!(
        svg,
        r#"<g stroke="black" fill="none"><line x1="{ml:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/><line x1="{ml:.2}" y1="{mt:.2}" x2="{ml:.2}" y2="{:.2}"/></g>"#,
        h - mb,
        w - mr,
        h - mb,
        h - mb
    );
    let y_tick = |y: f64, label: String, svg: &mut String| {
        let yp = mt + (y1 - y) / (y1 - y0) * (h - mt - mb);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{yp:.2}" x2="{ml:.2}" y2="{yp:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"##,
            ml - 5.0,
            ml - 8.0,
            yp + 4.0
        );
    };
    if style.log_y {
        let decades = (y1 - y0) as i64;
        let dstep = (decades / 10).max(1);
        let mut d = y0 as i64;
        while d <= y1 as i64 {
            y_tick(d as f64, format!("1e{d}"), &mut svg);
            d += dstep;
        }
    } else {
        for i in 0..=4 {
            let y = y0 + (y1 - y0) * i as f64 / 4.0;
            y_tick(y, tick_label(y), &mut svg);
        }
    }
    if !style.log_y && y0 < 0.0 && y1 > 0.0 {
        let yp = mt + y1 / (y1 - y0) * (h - mt - mb);
        let _ = writeln!(
            svg,
            r##"<line x1="{ml:.2}" y1="{yp:.2}" x2="{:.2}" y2="{yp:.2}" stroke="#999999" stroke-width="0.5"/>"##,
            w - mr
        );
    }
    for i in 0..=5 {
        let t = x0 + (x1 - x0) * i as f64 / 5.0;
        let x = px(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            h - mb,
            h - mb + 5.0,
            h - mb + 18.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        ml + (w - ml - mr) / 2.0,
        h - 10.0,
        escape(&style.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        mt + (h - mt - mb) / 2.0,
        mt + (h - mt - mb) / 2.0,
        escape(&style.y_label)
    );

    for (i, (s, pts)) in series.iter().zip(&curves).enumerate() {
        if pts.is_empty() {
            continue;
        }
        let color = PALETTE[i % PALETTE.len()];
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = write!(svg, r#"<polyline class="series" fill="none" stroke="{color}" stroke-width="1.5"{dash} points=""#);
        for (j, p) in pts.iter().enumerate() {
            if j > 0 {
                svg.push(' ');
            }
            let _ = write!(svg, "{:.2},{:.2}", px(p.0), py(p.1));
        }
        svg.push_str("\"/>\n");
        let ly_legend = mt + 10.0 + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{ly_legend:.2}" x2="{:.2}" y2="{ly_legend:.2}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}">{}</text>"#,
            w - mr - 180.0,
            w - mr - 155.0,
            w - mr - 150.0,
            ly_legend + 4.0,
            escape(&s.label)
        );
    }

    if let Some(env) = &style.envelope {
        let _ = write!(
            svg,
            r##"<polyline class="envelope" fill="none" stroke="#555555" stroke-width="1" stroke-dasharray="2 3" points=""##
        );
        for j in 0..=200 {
            let t = x0 + (x1 - x0) * j as f64 / 200.0;
            if j > 0 {
                svg.push(' ');
            }
            let _ = write!(svg, "{:.2},{:.2}", px(t), py(env.at(t)));
        }
        svg.push_str("\"/>\n");
    }

    for &(t, g) in style.markers.iter().filter(|m| in_x(m.0)) {
        let _ = writeln!(
            svg,
            r#"<circle class="restart" cx="{:.2}" cy="{:.2}" r="2.5" fill="none" stroke="black"/>"#,
            px(t),
            py(g)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_plot(series: &[Series], path: &Path, style: &PlotStyle) -> Result<()> {
    let svg = render_svg(series, style)?;
    write_file(path, &svg)
}

fn tick_label(t: f64) -> String {
    if t != 0.0 && (t.abs() < 1e-2 || t.abs() >= 1e5) {
        return format!("{t:.1e}");
    }
    let s = format!("{t:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
