//! Static SVG figures: line charts, stem plots and forecast fans.

use std::fmt::Write as _;

use soibart::spectral::{Correlogram, Periodogram};
use soibart::{ForecastResult, TimeSeries};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 360.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_TOP: f64 = 32.0;
const MARGIN_BOTTOM: f64 = 44.0;

/// Maps data coordinates into one plotting panel.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    top: f64,
    height: f64,
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64), top: f64, height: f64) -> Self {
        let widen = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Self { x: widen(x), y: widen(y), top, height }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        self.top + self.height - (y - self.y.0) / (self.y.1 - self.y.0) * self.height
    }

    fn points(&self, pts: impl IntoIterator<Item = (f64, f64)>) -> String {
        pts.into_iter().map(|(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y))).collect::<Vec<_>>().join(" ")
    }

    fn axes(&self, svg: &mut String, x_label: &str, y_label: &str) {
        let (left, right) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
        let bottom = self.top + self.height;
        let _ = writeln!(
            svg,
            r#"<rect x="{left:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            self.top,
            right - left,
            self.height
        );
        for t in ticks(self.x) {
            let x = self.px(t);
            let _ = writeln!(
                svg,
                r#"<line x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
                bottom + 4.0
            );
            let _ =
                writeln!(svg, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, bottom + 16.0, label(t));
        }
        for t in ticks(self.y) {
            let y = self.py(t);
            let _ = writeln!(
                svg,
                r#"<line x1="{:.2}" y1="{y:.2}" x2="{left:.2}" y2="{y:.2}" stroke="black"/>"#,
                left - 4.0
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                left - 6.0,
                y + 4.0,
                label(t)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            (left + right) / 2.0,
            bottom + 34.0,
            escape(x_label)
        );
        let mid = self.top + self.height / 2.0;
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{mid:.2}" text-anchor="middle" transform="rotate(-90 16 {mid:.2})">{}</text>"#,
            escape(y_label)
        );
    }
}

/// Roughly five round tick positions inside `range`.
fn ticks((lo, hi): (f64, f64)) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(v: f64) -> String {
    let s = format!("{:.3}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn document(title: &str, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{:.2}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n{body}</svg>\n",
        WIDTH / 2.0,
        escape(title)
    )
}

fn extent(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    values.into_iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

pub fn periodogram(p: &Periodogram, title: &str) -> String {
    let frame = Frame::new(
        extent(p.frequencies.iter().copied()),
        (0.0, extent(p.power.iter().copied()).1),
        MARGIN_TOP,
        HEIGHT - MARGIN_TOP - MARGIN_BOTTOM,
    );
    let mut body = String::new();
    frame.axes(&mut body, "frequency (cycles per month)", "power");
    let _ = writeln!(
        body,
        r#"<polyline fill="none" stroke="steelblue" points="{}"/>"#,
        frame.points(p.frequencies.iter().copied().zip(p.power.iter().copied()))
    );
    document(title, &body)
}

/// ACF and PACF panels with the ±1.96/√n band.
pub fn correlogram(c: &Correlogram, title: &str) -> String {
    let lags = c.acf.len() as f64;
    let lo = extent(c.acf.iter().chain(&c.pacf).copied()).0.min(-c.band);
    let hi = extent(c.acf.iter().chain(&c.pacf).copied()).1.max(c.band);
    let panel = (HEIGHT - MARGIN_TOP - 2.0 * MARGIN_BOTTOM) / 2.0;
    let mut body = String::new();
    for (k, (name, values)) in [("ACF", &c.acf), ("PACF", &c.pacf)].into_iter().enumerate() {
        let frame = Frame::new((0.0, lags + 1.0), (lo, hi), MARGIN_TOP + k as f64 * (panel + MARGIN_BOTTOM), panel);
        frame.axes(&mut body, if k == 1 { "lag (months)" } else { "" }, name);
        let (zero, left, right) = (frame.py(0.0), frame.px(0.0), frame.px(lags + 1.0));
        let _ = writeln!(body, r#"<line x1="{left:.2}" y1="{zero:.2}" x2="{right:.2}" y2="{zero:.2}" stroke="gray"/>"#);
        for b in [c.band, -c.band] {
            let y = frame.py(b);
            let _ = writeln!(
                body,
                r#"<line x1="{left:.2}" y1="{y:.2}" x2="{right:.2}" y2="{y:.2}" stroke="firebrick" stroke-dasharray="4 3"/>"#
            );
        }
        for (i, v) in values.iter().enumerate() {
            let x = frame.px(i as f64 + 1.0);
            let _ = writeln!(
                body,
                r#"<line x1="{x:.2}" y1="{zero:.2}" x2="{x:.2}" y2="{:.2}" stroke="steelblue" stroke-width="2"/>"#,
                frame.py(*v)
            );
        }
    }
    document(title, &body)
}

/// Recent history, the point forecast and shaded bands for each symmetric
/// quantile pair, outermost first.
pub fn fan_chart(history: &TimeSeries, forecast: &ForecastResult, history_months: usize, title: &str) -> String {
    let n = history.len();
    let shown = history_months.min(n);
    let hist: Vec<(f64, f64)> = (n - shown..n).map(|i| (i as f64, history.values()[i])).collect();
    let fc: Vec<(f64, f64)> = forecast.steps.iter().enumerate().map(|(h, s)| ((n + h) as f64, s.point)).collect();
    let levels = &forecast.quantile_levels;
    let mut pairs: Vec<(usize, usize)> = levels
        .iter()
        .enumerate()
        .filter(|(_, q)| **q < 0.5)
        .filter_map(|(i, q)| levels.iter().position(|u| (u - (1.0 - q)).abs() < 1e-9).map(|j| (i, j)))
        .collect();
    pairs.sort_by(|a, b| levels[a.0].total_cmp(&levels[b.0]));

    let all_y =
        hist.iter().chain(&fc).map(|p| p.1).chain(forecast.steps.iter().flat_map(|s| s.quantiles.iter().copied()));
    let x_range = ((n - shown) as f64, (n + forecast.steps.len()).saturating_sub(1) as f64);
    let frame = Frame::new(x_range, extent(all_y), MARGIN_TOP, HEIGHT - MARGIN_TOP - MARGIN_BOTTOM);
    let mut body = String::new();
    let start = history.start();
    frame.axes(&mut body, &format!("months since {start}"), "index value");

    let has_bands = forecast.steps.first().is_some_and(|s| !s.quantiles.is_empty());
    if has_bands {
        for (k, (lo, hi)) in pairs.iter().enumerate() {
            let upper = forecast.steps.iter().enumerate().map(|(h, s)| ((n + h) as f64, s.quantiles[*hi]));
            let lower = forecast.steps.iter().enumerate().rev().map(|(h, s)| ((n + h) as f64, s.quantiles[*lo]));
            let opacity = 0.15 + 0.15 * k as f64;
            let _ = writeln!(
                body,
                r#"<polygon fill="steelblue" fill-opacity="{opacity:.2}" stroke="none" points="{}"/>"#,
                frame.points(upper.chain(lower))
            );
        }
    }
    let _ = writeln!(body, r#"<polyline fill="none" stroke="black" points="{}"/>"#, frame.points(hist.iter().copied()));
    let joined = hist.last().copied().into_iter().chain(fc.iter().copied());
    let _ = writeln!(
        body,
        r#"<polyline fill="none" stroke="firebrick" stroke-width="2" points="{}"/>"#,
        frame.points(joined)
    );
    document(title, &body)
}
