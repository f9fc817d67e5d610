//! Minimal SVG line/scatter plots with error bars. Hand-rolled on purpose:
//! the outputs are simple diagnostic curves (order parameter vs activity,
//! event decay, correlation decay, contour histograms) and a dependency
//! would be heavier than the hundred lines of layout below.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PlotError {
    #[error("nothing to plot: no input points")]
    Empty,
    #[error("log-scale axis requires positive values, got {0}")]
    NonPositiveOnLogAxis(f64),
    #[error("non-finite input value")]
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    /// (x, y, y standard error); the error may be 0 for bare points.
    pub points: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct PlotOptions {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub width: u32,
    pub height: u32,
}

impl Default for PlotOptions {
    fn default() -> Self {
        PlotOptions {
            title: String::new(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_y: false,
            width: 640,
            height: 440,
        }
    }
}

const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;
const PALETTE: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.').to_string();
        if s.is_empty() {
            "0".into()
        } else {
            s
        }
    } else {
        format!("{v:.2e}")
    }
}

/// Render one or more series to an SVG document string.
pub fn render_svg(series: &[Series], opts: &PlotOptions) -> Result<String, PlotError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in series {
        for &(x, y, e) in &s.points {
            if !x.is_finite() || !y.is_finite() || !e.is_finite() {
                return Err(PlotError::NonFinite);
            }
            if opts.log_y && y <= 0.0 {
                return Err(PlotError::NonPositiveOnLogAxis(y));
            }
            xs.push(x);
            ys.push(if opts.log_y {
                // Error bars enter the range only as far as they stay positive.
                (y - e).max(y * 1e-2)
            } else {
                y - e
            });
            ys.push(y + e);
        }
    }
    if xs.is_empty() {
        return Err(PlotError::Empty);
    }

    let (x_min, x_max) = padded_range(&xs, false);
    let (y_min, y_max) = padded_range(&ys, opts.log_y);

    let plot_w = opts.width as f64 - MARGIN_L - MARGIN_R;
    let plot_h = opts.height as f64 - MARGIN_T - MARGIN_B;
    let x_pix = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * plot_w;
    let y_val = |y: f64| if opts.log_y { y.ln() } else { y };
    let y_pix = |y: f64| {
        MARGIN_T + plot_h - (y_val(y) - y_val(y_min)) / (y_val(y_max) - y_val(y_min)) * plot_h
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n",
        w = opts.width,
        h = opts.height
    ));
    svg.push_str(&format!(
        "<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n",
        opts.width, opts.height
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\" \
         font-family=\"sans-serif\">{}</text>\n",
        opts.width as f64 / 2.0,
        escape(&opts.title)
    ));

    // Axes.
    let x0 = MARGIN_L;
    let y0 = MARGIN_T + plot_h;
    svg.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{}\" y2=\"{y0}\" stroke=\"black\"/>\n",
        MARGIN_L + plot_w
    ));
    svg.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{}\" x2=\"{x0}\" y2=\"{y0}\" stroke=\"black\"/>\n",
        MARGIN_T
    ));

    // Ticks and labels.
    for i in 0..=4 {
        let fx = x_min + (x_max - x_min) * i as f64 / 4.0;
        let px = x_pix(fx);
        svg.push_str(&format!(
            "<line x1=\"{px}\" y1=\"{y0}\" x2=\"{px}\" y2=\"{}\" stroke=\"black\"/>\n",
            y0 + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{px}\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\" \
             font-family=\"sans-serif\">{}</text>\n",
            y0 + 20.0,
            fmt_num(fx)
        ));

        let fy = if opts.log_y {
            (y_val(y_min) + (y_val(y_max) - y_val(y_min)) * i as f64 / 4.0).exp()
        } else {
            y_min + (y_max - y_min) * i as f64 / 4.0
        };
        let py = y_pix(fy);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{py}\" x2=\"{x0}\" y2=\"{py}\" stroke=\"black\"/>\n",
            x0 - 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"11\" \
             font-family=\"sans-serif\">{}</text>\n",
            x0 - 8.0,
            py + 4.0,
            fmt_num(fy)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\" \
         font-family=\"sans-serif\">{}</text>\n",
        MARGIN_L + plot_w / 2.0,
        opts.height as f64 - 12.0,
        escape(&opts.x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\" \
         font-family=\"sans-serif\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0,
        escape(&opts.y_label)
    ));

    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let mut pts = s.points.clone();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));

        if pts.len() > 1 {
            let path: Vec<String> = pts
                .iter()
                .map(|&(x, y, _)| format!("{:.2},{:.2}", x_pix(x), y_pix(y)))
                .collect();
            svg.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" \
                 points=\"{}\"/>\n",
                path.join(" ")
            ));
        }
        for &(x, y, e) in &pts {
            let px = x_pix(x);
            if e > 0.0 {
                let lo = if opts.log_y {
                    (y - e).max(y * 1e-2)
                } else {
                    y - e
                };
                let hi = y + e;
                let (pl, ph) = (y_pix(lo), y_pix(hi));
                svg.push_str(&format!(
                    "<line x1=\"{px:.2}\" y1=\"{pl:.2}\" x2=\"{px:.2}\" y2=\"{ph:.2}\" \
                     stroke=\"{color}\"/>\n"
                ));
                for p in [pl, ph] {
                    svg.push_str(&format!(
                        "<line x1=\"{:.2}\" y1=\"{p:.2}\" x2=\"{:.2}\" y2=\"{p:.2}\" \
                         stroke=\"{color}\"/>\n",
                        px - 3.0,
                        px + 3.0
                    ));
                }
            }
            svg.push_str(&format!(
                "<circle cx=\"{px:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                y_pix(y)
            ));
        }
        if !s.label.is_empty() {
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-size=\"12\" font-family=\"sans-serif\" \
                 fill=\"{color}\">{}</text>\n",
                MARGIN_L + plot_w - 150.0,
                MARGIN_T + 16.0 * (si as f64 + 1.0),
                escape(&s.label)
            ));
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn padded_range(values: &[f64], log: bool) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        if log && v <= 0.0 {
            continue;
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo == hi {
        if log {
            (lo / 2.0, hi * 2.0)
        } else if lo == 0.0 {
            (-1.0, 1.0)
        } else {
            (lo - lo.abs() * 0.5, hi + hi.abs() * 0.5)
        }
    } else if log {
        let span = (hi / lo).ln();
        (lo * (-0.05 * span).exp(), hi * (0.05 * span).exp())
    } else {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
