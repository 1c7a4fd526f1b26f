//! Static SVG line/band plots rendered directly from CSV tables, so that
//! regenerating a figure from its CSV alone reproduces it byte for byte.

use std::fmt::Write as _;

use kcq::{Error, Result};

use crate::csvio::Table;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 20.0;
const MARGIN_B: f64 = 50.0;

struct Axes {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Axes {
    fn from_ranges(xs: &[&[f64]], ys: &[&[f64]]) -> Result<Self> {
        let span = |slices: &[&[f64]]| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for s in slices {
                for v in *s {
                    lo = lo.min(*v);
                    hi = hi.max(*v);
                }
            }
            (lo, hi)
        };
        let (x_min, x_max) = span(xs);
        let (mut y_min, mut y_max) = span(ys);
        if !(x_min.is_finite() && x_max.is_finite() && y_min.is_finite() && y_max.is_finite()) {
            return Err(Error::Config("plot data must be finite and non-empty".into()));
        }
        if y_max == y_min {
            y_min -= 0.5;
            y_max += 0.5;
        }
        let pad = 0.05 * (y_max - y_min);
        Ok(Self {
            x_min,
            x_max,
            y_min: y_min - pad,
            y_max: y_max + pad,
        })
    }

    fn sx(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn sy(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_B
            - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn polyline(out: &mut String, axes: &Axes, xs: &[f64], ys: &[f64], style: &str) {
    let pts: Vec<String> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| format!("{:.2},{:.2}", axes.sx(*x), axes.sy(*y)))
        .collect();
    writeln!(
        out,
        "  <polyline fill=\"none\" {} points=\"{}\"/>",
        style,
        pts.join(" ")
    )
    .unwrap();
}

fn band(out: &mut String, axes: &Axes, xs: &[f64], lo: &[f64], hi: &[f64], fill: &str) {
    let mut pts = Vec::with_capacity(2 * xs.len());
    for (x, y) in xs.iter().zip(hi) {
        pts.push(format!("{:.2},{:.2}", axes.sx(*x), axes.sy(*y)));
    }
    for (x, y) in xs.iter().zip(lo).rev() {
        pts.push(format!("{:.2},{:.2}", axes.sx(*x), axes.sy(*y)));
    }
    writeln!(
        out,
        "  <polygon fill=\"{}\" stroke=\"none\" points=\"{}\"/>",
        fill,
        pts.join(" ")
    )
    .unwrap();
}

fn frame(out: &mut String, axes: &Axes, x_label: &str, y_label: &str) {
    writeln!(
        out,
        "  <rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{:.2}\" height=\"{:.2}\" \
         fill=\"none\" stroke=\"black\"/>",
        WIDTH - MARGIN_L - MARGIN_R,
        HEIGHT - MARGIN_T - MARGIN_B
    )
    .unwrap();
    for i in 0..=4 {
        let fx = axes.x_min + i as f64 / 4.0 * (axes.x_max - axes.x_min);
        let fy = axes.y_min + i as f64 / 4.0 * (axes.y_max - axes.y_min);
        writeln!(
            out,
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{:.3e}</text>",
            axes.sx(fx),
            HEIGHT - MARGIN_B + 16.0,
            fx
        )
        .unwrap();
        writeln!(
            out,
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\">{:.3e}</text>",
            MARGIN_L - 6.0,
            axes.sy(fy) + 4.0,
            fy
        )
        .unwrap();
    }
    writeln!(
        out,
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\">{}</text>",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 10.0,
        x_label
    )
    .unwrap();
    writeln!(
        out,
        "  <text x=\"16\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\" \
         transform=\"rotate(-90 16 {:.2})\">{}</text>",
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        y_label
    )
    .unwrap();
}

fn svg_open() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n  <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         fill=\"white\"/>\n"
    )
}

/// Mean ± 3·SD bands over time for the conditional (KCQ) and non-conditional
/// (N-MC) estimates, from a `kcq_timeseries.csv` table.
pub fn band_plot(table: &Table, y_label: &str) -> Result<String> {
    let t = table.column("time")?;
    let km = table.column("kcq_mean")?;
    let ks = table.column("kcq_sd")?;
    let nm = table.column("nmc_mean")?;
    let ns = table.column("nmc_sd")?;
    let k_lo: Vec<f64> = km.iter().zip(&ks).map(|(m, s)| m - 3.0 * s).collect();
    let k_hi: Vec<f64> = km.iter().zip(&ks).map(|(m, s)| m + 3.0 * s).collect();
    let n_lo: Vec<f64> = nm.iter().zip(&ns).map(|(m, s)| m - 3.0 * s).collect();
    let n_hi: Vec<f64> = nm.iter().zip(&ns).map(|(m, s)| m + 3.0 * s).collect();
    let axes = Axes::from_ranges(&[&t], &[&k_lo, &k_hi, &n_lo, &n_hi])?;
    let mut out = svg_open();
    band(&mut out, &axes, &t, &n_lo, &n_hi, "#c6dbef");
    band(&mut out, &axes, &t, &k_lo, &k_hi, "#fdd0a2");
    polyline(&mut out, &axes, &t, &nm, "stroke=\"#2171b5\" stroke-width=\"1.5\" stroke-dasharray=\"6 3\"");
    polyline(&mut out, &axes, &t, &km, "stroke=\"#d94801\" stroke-width=\"1.5\"");
    frame(&mut out, &axes, "time [s]", y_label);
    writeln!(
        out,
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"#d94801\">conditional mean \
         &#177; 3&#183;SD</text>",
        MARGIN_L + 10.0,
        MARGIN_T + 18.0
    )
    .unwrap();
    writeln!(
        out,
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"#2171b5\">non-conditional mean \
         &#177; 3&#183;SD</text>",
        MARGIN_L + 10.0,
        MARGIN_T + 34.0
    )
    .unwrap();
    out.push_str("</svg>\n");
    Ok(out)
}

/// Conditional versus non-conditional density overlay, from a `kcq_pdf_<k>.csv`
/// table with columns `grid,density,nonconditional_density`.
pub fn pdf_plot(table: &Table, x_label: &str) -> Result<String> {
    let grid = table.column("grid")?;
    let cond = table.column("density")?;
    let nmc = table.column("nonconditional_density")?;
    let axes = Axes::from_ranges(&[&grid], &[&cond, &nmc])?;
    let mut out = svg_open();
    polyline(&mut out, &axes, &grid, &nmc, "stroke=\"#2171b5\" stroke-width=\"1.5\" stroke-dasharray=\"6 3\"");
    polyline(&mut out, &axes, &grid, &cond, "stroke=\"#d94801\" stroke-width=\"1.5\"");
    frame(&mut out, &axes, x_label, "density");
    writeln!(
        out,
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"#d94801\">conditional</text>",
        MARGIN_L + 10.0,
        MARGIN_T + 18.0
    )
    .unwrap();
    writeln!(
        out,
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"#2171b5\">non-conditional</text>",
        MARGIN_L + 10.0,
        MARGIN_T + 34.0
    )
    .unwrap();
    out.push_str("</svg>\n");
    Ok(out)
}
