//! Mean budget curves as standalone SVG files.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use albench_core::protocol::CurveRow;
use albench_core::MetricKind;

pub const WIDTH: f64 = 720.0;
pub const HEIGHT: f64 = 440.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/// Mean curve of one strategy: `(num_labeled, mean value)` sorted by budget.
pub type MeanCurve = Vec<(usize, f64)>;

fn value(row: &CurveRow, metric: MetricKind) -> f64 {
    match metric {
        MetricKind::Acc => row.acc,
        MetricKind::Auc => row.auc,
        MetricKind::F1 => row.f1,
    }
}

/// Per strategy, the mean over trials at every recorded budget of `dataset`.
pub fn mean_curves(rows: &[CurveRow], dataset: &str, metric: MetricKind) -> BTreeMap<String, MeanCurve> {
    let mut acc: BTreeMap<&str, BTreeMap<usize, (f64, usize)>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.dataset == dataset) {
        let e = acc
            .entry(&r.strategy)
            .or_default()
            .entry(r.num_labeled)
            .or_insert((0.0, 0));
        e.0 += value(r, metric);
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(s, pts)| {
            (
                s.to_string(),
                pts.into_iter().map(|(b, (sum, n))| (b, sum / n as f64)).collect(),
            )
        })
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Pixel row of a metric value; the y axis always spans [0, 1].
pub fn y_pixel(v: f64) -> f64 {
    TOP + (1.0 - v.clamp(0.0, 1.0)) * (HEIGHT - TOP - BOTTOM)
}

/// Renders one polyline per strategy with axes and a legend.
pub fn render_svg(title: &str, metric: MetricKind, curves: &BTreeMap<String, MeanCurve>) -> String {
    let (lo, hi) = curves
        .values()
        .flatten()
        .fold((usize::MAX, 0), |(lo, hi), &(b, _)| (lo.min(b), hi.max(b)));
    let (lo, hi) = if lo > hi { (0, 1) } else { (lo, hi.max(lo + 1)) };
    let plot_w = WIDTH - LEFT - RIGHT;
    let x_px = |b: usize| LEFT + (b - lo) as f64 / (hi - lo) as f64 * plot_w;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="18" font-size="14" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    );
    let bottom = HEIGHT - BOTTOM;
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{bottom}" x2="{}" y2="{bottom}" stroke="black"/>"#,
        LEFT + plot_w
    );
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{bottom}" stroke="black"/>"#
    );
    for k in 0..=5 {
        let v = k as f64 / 5.0;
        let y = y_pixel(v);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{v:.1}</text>"#,
            LEFT - 6.0,
            y + 3.0
        );
    }
    for k in 0..=4 {
        let b = lo + (hi - lo) * k / 4;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" font-size="10" text-anchor="middle">{b}</text>"#,
            x_px(b),
            bottom + 14.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">number of labeled points</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        TOP + (bottom - TOP) / 2.0,
        TOP + (bottom - TOP) / 2.0,
        metric
    );
    for (i, (strategy, pts)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = pts
            .iter()
            .map(|&(b, v)| format!("{:.2},{:.2}", x_px(b), y_pixel(v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
            points.join(" "),
            escape(strategy)
        );
        let ly = TOP + 10.0 + 16.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 18.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11">{}</text>"#,
            lx + 24.0,
            ly + 4.0,
            escape(strategy)
        );
    }
    s.push_str("</svg>\n");
    s
}
