//! Self-contained SVG line plots: scattered observations, a posterior mean
//! polyline, and a shaded 95% band, in a fixed 800x500 viewport.

/// One scatter layer (training or holdout observations).
pub struct ScatterLayer {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub color: &'static str,
    pub label: String,
}

/// The mean curve plus its confidence band, sampled on a common grid.
pub struct BandLayer {
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

pub struct Plot {
    pub title: String,
    pub band: BandLayer,
    pub scatters: Vec<ScatterLayer>,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 62.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 38.0;
const MARGIN_BOTTOM: f64 = 46.0;

struct Axis {
    min: f64,
    max: f64,
    span: f64,
}

impl Axis {
    fn from_values<'a>(values: impl Iterator<Item = &'a f64>) -> Axis {
        let mut min = f64::MAX;
        let mut max = f64::MIN;
        for &v in values {
            if v.is_finite() {
                min = min.min(v);
                max = max.max(v);
            }
        }
        if min > max {
            min = 0.0;
            max = 1.0;
        }
        let pad = (max - min).max(1e-9) * 0.05;
        let (min, max) = (min - pad, max + pad);
        Axis {
            min,
            max,
            span: max - min,
        }
    }

    /// Round tick positions covering the axis.
    fn ticks(&self) -> Vec<f64> {
        let raw_step = self.span / 6.0;
        let mag = 10f64.powf(raw_step.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| self.span / s <= 7.0)
            .unwrap_or(mag * 10.0);
        let mut ticks = Vec::new();
        let mut t = (self.min / step).ceil() * step;
        while t <= self.max {
            ticks.push(t);
            t += step;
        }
        ticks
    }
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let abs = v.abs();
    if abs >= 1e4 || abs < 1e-2 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

impl Plot {
    pub fn to_svg(&self) -> String {
        let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let xs = Axis::from_values(
            self.band
                .x
                .iter()
                .chain(self.scatters.iter().flat_map(|s| s.x.iter())),
        );
        let ys = Axis::from_values(
            self.band
                .mean
                .iter()
                .chain(self.band.lower.iter())
                .chain(self.band.upper.iter())
                .chain(self.scatters.iter().flat_map(|s| s.y.iter())),
        );
        let px = |x: f64| MARGIN_LEFT + (x - xs.min) / xs.span * plot_w;
        let py = |y: f64| MARGIN_TOP + plot_h - (y - ys.min) / ys.span * plot_h;

        let mut svg = String::new();
        svg.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
        ));
        svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\" \
             text-anchor=\"middle\">{}</text>\n",
            WIDTH / 2.0,
            xml_escape(&self.title)
        ));

        // Grid and tick labels.
        for t in xs.ticks() {
            let x = px(t);
            svg.push_str(&format!(
                "<line x1=\"{x:.2}\" y1=\"{MARGIN_TOP}\" x2=\"{x:.2}\" y2=\"{:.2}\" \
                 stroke=\"#dddddd\" stroke-width=\"1\"/>\n",
                MARGIN_TOP + plot_h
            ));
            svg.push_str(&format!(
                "<text x=\"{x:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" \
                 text-anchor=\"middle\">{}</text>\n",
                MARGIN_TOP + plot_h + 16.0,
                fmt_tick(t)
            ));
        }
        for t in ys.ticks() {
            let y = py(t);
            svg.push_str(&format!(
                "<line x1=\"{MARGIN_LEFT}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" \
                 stroke=\"#dddddd\" stroke-width=\"1\"/>\n",
                MARGIN_LEFT + plot_w
            ));
            svg.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" \
                 text-anchor=\"end\">{}</text>\n",
                MARGIN_LEFT - 6.0,
                y + 4.0,
                fmt_tick(t)
            ));
        }

        // 95% band polygon: upper edge forward, lower edge back.
        let mut band = String::from("<polygon points=\"");
        for (x, u) in self.band.x.iter().zip(&self.band.upper) {
            band.push_str(&format!("{:.2},{:.2} ", px(*x), py(*u)));
        }
        for (x, l) in self.band.x.iter().zip(&self.band.lower).rev() {
            band.push_str(&format!("{:.2},{:.2} ", px(*x), py(*l)));
        }
        band.push_str("\" fill=\"#4a90d9\" fill-opacity=\"0.25\" stroke=\"none\"/>\n");
        svg.push_str(&band);

        // Posterior mean polyline.
        let mut line = String::from("<polyline points=\"");
        for (x, m) in self.band.x.iter().zip(&self.band.mean) {
            line.push_str(&format!("{:.2},{:.2} ", px(*x), py(*m)));
        }
        line.push_str("\" fill=\"none\" stroke=\"#1f4e8c\" stroke-width=\"1.8\"/>\n");
        svg.push_str(&line);

        // Observations.
        for layer in &self.scatters {
            for (x, y) in layer.x.iter().zip(&layer.y) {
                svg.push_str(&format!(
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.6\" fill=\"{}\"/>\n",
                    px(*x),
                    py(*y),
                    layer.color
                ));
            }
        }

        // Legend, top-left inside the plot area.
        let mut legend_y = MARGIN_TOP + 16.0;
        for layer in &self.scatters {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\"/>\n",
                MARGIN_LEFT + 12.0,
                legend_y - 4.0,
                layer.color
            ));
            svg.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
                MARGIN_LEFT + 22.0,
                legend_y,
                xml_escape(&layer.label)
            ));
            legend_y += 16.0;
        }
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" \
             fill=\"#1f4e8c\">posterior mean &#177; 95%</text>\n",
            MARGIN_LEFT + 22.0,
            legend_y
        ));

        // Frame.
        svg.push_str(&format!(
            "<rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{plot_w}\" height=\"{plot_h}\" \
             fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n"
        ));
        svg.push_str("</svg>\n");
        svg
    }
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
