//! Plot data for the Δ panel (training segment, reference, mean, ±2σ band) and
//! a plain SVG rendering of it.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use qdml::ensemble::EnsembleForecast;
use qdml::io::fmt_f64;
use qdml::tdvp::Trajectory;

use crate::CliError;

pub const PLOT_HEADER: &str = "t_fs,segment,reference_delta,mean_delta,lower_delta,upper_delta";

#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub t_hist: f64,
    /// Reference Δ over the whole trajectory.
    pub reference: Vec<(f64, f64)>,
    /// (t, mean, σ) over the forecast.
    pub forecast: Vec<(f64, f64, f64)>,
}

impl PlotData {
    pub fn new(reference: &Trajectory, t_hist: f64, forecast: &EnsembleForecast) -> Result<Self, CliError> {
        if forecast.is_empty() {
            return Err(CliError::Usage("empty forecast".into()));
        }
        Ok(Self {
            t_hist,
            reference: reference
                .times
                .iter()
                .zip(&reference.rows)
                .map(|(t, r)| (*t, r.rho11 - r.rho22))
                .collect(),
            forecast: forecast
                .times
                .iter()
                .enumerate()
                .map(|(k, t)| (*t, forecast.mean[[k, 0]], forecast.std[[k, 0]]))
                .collect(),
        })
    }

    /// One row per reference time; forecast columns are empty on the training
    /// segment.
    pub fn write_csv(&self, path: &Path) -> Result<(), CliError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "{PLOT_HEADER}")?;
        let mut fc = self.forecast.iter().peekable();
        for &(t, r) in &self.reference {
            let segment = if t <= self.t_hist + 1e-9 { "train" } else { "forecast" };
            match fc.peek() {
                Some(&&(tf, m, s)) if (tf - t).abs() < 1e-6 => {
                    fc.next();
                    writeln!(
                        out,
                        "{},{segment},{},{},{},{}",
                        fmt_f64(t),
                        fmt_f64(r),
                        fmt_f64(m),
                        fmt_f64(m - 2.0 * s),
                        fmt_f64(m + 2.0 * s)
                    )?;
                }
                _ => writeln!(out, "{},{segment},{},,,", fmt_f64(t), fmt_f64(r))?,
            }
        }
        out.flush()?;
        Ok(())
    }
}

const W: f64 = 720.0;
const H: f64 = 360.0;
const MARGIN: f64 = 48.0;

fn polyline(points: impl Iterator<Item = (f64, f64)>) -> String {
    let mut s = String::new();
    for (x, y) in points {
        let _ = write!(s, "{x:.2},{y:.2} ");
    }
    s.trim_end().to_string()
}

pub fn render_svg(data: &PlotData, title: &str) -> String {
    let t_max = data.reference.last().map_or(1.0, |p| p.0).max(1e-9);
    let sx = |t: f64| MARGIN + (W - 2.0 * MARGIN) * t / t_max;
    let sy = |v: f64| H - MARGIN - (H - 2.0 * MARGIN) * (v.clamp(-1.2, 1.2) + 1.2) / 2.4;

    let band = polyline(
        data.forecast
            .iter()
            .map(|&(t, m, s)| (sx(t), sy(m + 2.0 * s)))
            .chain(data.forecast.iter().rev().map(|&(t, m, s)| (sx(t), sy(m - 2.0 * s)))),
    );
    let train = polyline(
        data.reference
            .iter()
            .filter(|p| p.0 <= data.t_hist + 1e-9)
            .map(|&(t, v)| (sx(t), sy(v))),
    );
    let reference = polyline(data.reference.iter().map(|&(t, v)| (sx(t), sy(v))));
    let mean = polyline(data.forecast.iter().map(|&(t, m, _)| (sx(t), sy(m))));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{MARGIN}" y="24">{}</text>"#, escape(title));
    let (x0, x1, y0, y1) = (sx(0.0), sx(t_max), sy(-1.2), sy(1.2));
    let _ = writeln!(
        svg,
        r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    for v in [-1.0, 0.0, 1.0] {
        let y = sy(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v}</text>"##,
            x0 - 6.0,
            y + 4.0
        );
    }
    let step = if t_max > 500.0 { 200.0 } else { 50.0 };
    let mut t = 0.0;
    while t <= t_max + 1e-9 {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{t}</text>"#,
            sx(t),
            y0 + 16.0
        );
        t += step;
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">t (fs)</text>"#,
        (x0 + x1) / 2.0,
        H - 8.0
    );
    let _ = writeln!(svg, r##"<polygon points="{band}" fill="#f4a582" fill-opacity="0.5" stroke="none"/>"##);
    let _ = writeln!(svg, r##"<polyline points="{reference}" fill="none" stroke="#444" stroke-width="1"/>"##);
    let _ = writeln!(svg, r##"<polyline points="{train}" fill="none" stroke="#2166ac" stroke-width="2"/>"##);
    let _ = writeln!(svg, r##"<polyline points="{mean}" fill="none" stroke="#b2182b" stroke-width="1.5"/>"##);
    let ts = sx(data.t_hist);
    let _ = writeln!(
        svg,
        r##"<line x1="{ts:.2}" y1="{y1:.2}" x2="{ts:.2}" y2="{y0:.2}" stroke="#888" stroke-dasharray="4 3"/>"##
    );
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
