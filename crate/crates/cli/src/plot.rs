//! Plot emission: a gnuplot script (data inlined, relative references only)
//! and a self-contained SVG, so no plotting dependency is mandatory.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
    pub y_scale: Scale,
    /// Named series of (x, y) points.
    pub series: Vec<(String, Vec<(f64, f64)>)>,
}

pub fn gnuplot_script(spec: &PlotSpec) -> String {
    let mut s = String::new();
    s.push_str("set terminal svg size 720,480\n");
    s.push_str("set output 'plot_gnuplot.svg'\n");
    s.push_str(&format!("set title \"{}\"\n", spec.title));
    s.push_str(&format!("set xlabel \"{}\"\n", spec.x_label));
    s.push_str(&format!("set ylabel \"{}\"\n", spec.y_label));
    if spec.x_scale == Scale::Log {
        s.push_str("set logscale x\n");
    }
    if spec.y_scale == Scale::Log {
        s.push_str("set logscale y\n");
    }
    s.push_str("set key outside\n");
    let plots: Vec<String> = spec
        .series
        .iter()
        .map(|(name, _)| format!("'-' using 1:2 with linespoints title \"{name}\""))
        .collect();
    s.push_str(&format!("plot {}\n", plots.join(", ")));
    for (_, points) in &spec.series {
        for &(x, y) in points {
            s.push_str(&format!("{x} {y}\n"));
        }
        s.push_str("e\n");
    }
    s
}

fn transform(v: f64, scale: Scale) -> f64 {
    match scale {
        Scale::Linear => v,
        Scale::Log => v.max(f64::MIN_POSITIVE).log10(),
    }
}

/// Minimal self-contained SVG: axes, tick labels at the extremes, one
/// polyline per series.
pub fn render_svg(spec: &PlotSpec) -> String {
    const W: f64 = 720.0;
    const H: f64 = 480.0;
    const ML: f64 = 70.0;
    const MR: f64 = 140.0;
    const MT: f64 = 40.0;
    const MB: f64 = 50.0;

    let pts: Vec<(f64, f64)> = spec
        .series
        .iter()
        .flat_map(|(_, p)| p.iter())
        .map(|&(x, y)| (transform(x, spec.x_scale), transform(y, spec.y_scale)))
        .collect();
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        x0 = 0.0;
        x1 = 1.0;
        y0 = 0.0;
        y1 = 1.0;
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| ML + (x - x0) / (x1 - x0) * (W - ML - MR);
    let py = |y: f64| H - MB - (y - y0) / (y1 - y0) * (H - MT - MB);

    let palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    );
    s.push_str(&format!(
        "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{}</text>\n",
        W / 2.0,
        spec.title
    ));
    // axes
    s.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - MB,
        W - MR,
        H - MB
    ));
    s.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - MB
    ));
    let fmt_tick = |v: f64, scale: Scale| match scale {
        Scale::Linear => format!("{v:.3}"),
        Scale::Log => format!("1e{v:.1}"),
    };
    s.push_str(&format!(
        "<text x=\"{ML}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
        H - MB + 16.0,
        fmt_tick(x0, spec.x_scale)
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
        W - MR,
        H - MB + 16.0,
        fmt_tick(x1, spec.x_scale)
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
        ML - 6.0,
        H - MB,
        fmt_tick(y0, spec.y_scale)
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
        ML - 6.0,
        MT + 10.0,
        fmt_tick(y1, spec.y_scale)
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
        (ML + W - MR) / 2.0,
        H - 12.0,
        spec.x_label
    ));
    s.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0,
        spec.y_label
    ));

    for (si, (name, points)) in spec.series.iter().enumerate() {
        let color = palette[si % palette.len()];
        let path: Vec<String> = points
            .iter()
            .map(|&(x, y)| {
                format!(
                    "{:.2},{:.2}",
                    px(transform(x, spec.x_scale)),
                    py(transform(y, spec.y_scale))
                )
            })
            .collect();
        s.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        for &(x, y) in points {
            s.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\"/>\n",
                px(transform(x, spec.x_scale)),
                py(transform(y, spec.y_scale))
            ));
        }
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{color}\">{}</text>\n",
            W - MR + 8.0,
            MT + 14.0 * (si as f64 + 1.0),
            name
        ));
    }
    s.push_str("</svg>\n");
    s
}
