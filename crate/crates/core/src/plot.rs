//! Self-contained SVG figures: the pupil trace and the score regression.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::protocol::{Eye, Schedule};
use crate::scoring::RapdReport;
use crate::session::Session;
use crate::signal::{clean_session, segment_intervals, SignalParams};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 55.0;

const RIGHT_COLOUR: &str = "#c0392b";
const LEFT_COLOUR: &str = "#2471a3";

#[derive(Debug, Clone, Copy)]
pub enum PlotSpec<'a> {
    /// Both pupils against time, with the lit eye's max and min marked in
    /// every interval.
    Trace {
        session: &'a Session,
        schedule: &'a Schedule,
        signal: SignalParams,
    },
    /// Level scores, the fitted line and its x-intercept.
    Regression { report: &'a RapdReport },
}

pub fn emit_plot(spec: &PlotSpec<'_>) -> Result<String> {
    match *spec {
        PlotSpec::Trace {
            session,
            schedule,
            signal,
        } => trace_svg(session, schedule, &signal),
        PlotSpec::Regression { report } => regression_svg(report),
    }
}

pub fn write_plot(spec: &PlotSpec<'_>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, emit_plot(spec)?)?;
    Ok(())
}

/// Maps data coordinates onto the plotting area.
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        let widen = |a: f64, b: f64| {
            if (b - a).abs() < 1e-12 {
                (a - 0.5, b + 0.5)
            } else {
                (a, b)
            }
        };
        let (x0, x1) = widen(x0, x1);
        let (y0, y1) = widen(y0, y1);
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT
            - MARGIN_BOTTOM
            - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str, ticks: usize) {
    let (left, right) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (top, bottom) = (MARGIN_TOP, HEIGHT - MARGIN_BOTTOM);
    let _ = writeln!(
        out,
        r#"<g class="axes" stroke="black" fill="none"><path d="M{left:.2},{top:.2} L{left:.2},{bottom:.2} L{right:.2},{bottom:.2}"/></g>"#
    );
    let _ = writeln!(out, r#"<g class="ticks" text-anchor="middle">"#);
    for k in 0..=ticks {
        let f = k as f64 / ticks as f64;
        let xv = frame.x0 + f * (frame.x1 - frame.x0);
        let yv = frame.y0 + f * (frame.y1 - frame.y0);
        let (px, py) = (frame.px(xv), frame.py(yv));
        let _ = writeln!(
            out,
            r#"<line x1="{px:.2}" y1="{bottom:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}">{}</text>"#,
            bottom + 4.0,
            bottom + 17.0,
            tick_label(xv)
        );
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{left:.2}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 4.0,
            left - 6.0,
            py + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(
        out,
        r#"<text class="x-label" x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text class="y-label" x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        (top + bottom) / 2.0,
        (top + bottom) / 2.0,
        escape(y_label)
    );
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.2}");
    // Avoid "-0.00".
    if s.trim_start_matches('-')
        .chars()
        .all(|c| c == '0' || c == '.')
    {
        "0.00".into()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn polyline(
    out: &mut String,
    frame: &Frame,
    class: &str,
    colour: &str,
    pts: impl Iterator<Item = (f64, f64)>,
) {
    let mut d = String::new();
    for (k, (x, y)) in pts.enumerate() {
        let _ = write!(
            d,
            "{}{:.2},{:.2}",
            if k == 0 { "M" } else { " L" },
            frame.px(x),
            frame.py(y)
        );
    }
    let _ = writeln!(
        out,
        r#"<path class="{class}" d="{d}" fill="none" stroke="{colour}" stroke-width="1.2"/>"#
    );
}

fn trace_svg(session: &Session, schedule: &Schedule, signal: &SignalParams) -> Result<String> {
    let clean = clean_session(session, signal)?;
    let windows = segment_intervals(&clean, schedule);
    let times: Vec<f64> = clean.timestamps().collect();

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in clean.smoothed_right.iter().chain(&clean.smoothed_left) {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    let frame = Frame::new(
        0.0,
        schedule.total_duration.max(*times.last().unwrap_or(&0.0)),
        (lo - 0.25).floor().max(0.0),
        (hi + 0.25).ceil(),
    );

    let mut out = String::new();
    header(&mut out, "Pupil diameter");
    // Shade the intervals in which the left eye is lit.
    let _ = writeln!(out, r##"<g class="left-lit" fill="#eaf2f8">"##);
    for iv in schedule
        .intervals
        .iter()
        .filter(|iv| iv.illuminated_eye == Eye::Left)
    {
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{MARGIN_TOP:.2}" width="{:.2}" height="{:.2}"/>"#,
            frame.px(iv.start),
            frame.px(iv.end()) - frame.px(iv.start),
            HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
        );
    }
    let _ = writeln!(out, "</g>");
    axes(&mut out, &frame, "Time (s)", "Pupil diameter (mm)", 5);
    for (eye, colour) in [(Eye::Right, RIGHT_COLOUR), (Eye::Left, LEFT_COLOUR)] {
        let series = clean.smoothed(eye);
        polyline(
            &mut out,
            &frame,
            &format!("pupil-{eye}"),
            colour,
            times.iter().copied().zip(series.iter().copied()),
        );
    }
    let _ = writeln!(out, r#"<g class="extrema" fill="black">"#);
    for w in windows.iter().flatten() {
        let eye = w.interval.illuminated_eye;
        let series = clean.smoothed(eye);
        let (argmax, argmin) = w.extreme_rows(&clean, eye);
        for (kind, row) in [("max", argmax), ("min", argmin)] {
            let _ = writeln!(
                out,
                r#"<circle class="extremum {kind}" cx="{:.2}" cy="{:.2}" r="2.5"/>"#,
                frame.px(times[row]),
                frame.py(series[row])
            );
        }
    }
    let _ = writeln!(out, "</g>");
    legend(
        &mut out,
        &[("Right pupil", RIGHT_COLOUR), ("Left pupil", LEFT_COLOUR)],
    );
    out.push_str("</svg>\n");
    Ok(out)
}

fn legend(out: &mut String, entries: &[(&str, &str)]) {
    let x = WIDTH - MARGIN_RIGHT - 120.0;
    let _ = writeln!(out, r#"<g class="legend">"#);
    for (k, (label, colour)) in entries.iter().enumerate() {
        let y = MARGIN_TOP + 12.0 + 16.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{colour}" stroke-width="2"/><text x="{:.2}" y="{y:.2}">{}</text>"#,
            y - 4.0,
            x + 18.0,
            y - 4.0,
            x + 24.0,
            escape(label)
        );
    }
    let _ = writeln!(out, "</g>");
}

fn regression_svg(report: &RapdReport) -> Result<String> {
    report.check_fit()?;
    let intercept_x = report.final_score;
    let line_at = |x: f64| report.slope * x + report.y_intercept;

    let mut xs: Vec<f64> = report.level_scores.iter().map(|l| l.level_x).collect();
    xs.push(intercept_x);
    let x_lo = xs.iter().copied().fold(f64::INFINITY, f64::min).min(-0.6) - 0.1;
    let x_hi = xs
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.6)
        + 0.1;
    let mut ys: Vec<f64> = report.level_scores.iter().map(|l| l.score).collect();
    ys.extend([line_at(x_lo), line_at(x_hi), 0.0]);
    let y_lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let y_hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = 0.1 * (y_hi - y_lo).max(0.5);
    let frame = Frame::new(x_lo, x_hi, y_lo - pad, y_hi + pad);

    let mut out = String::new();
    header(&mut out, "RAPD score by illumination level");
    axes(
        &mut out,
        &frame,
        "Illumination difference OD left − OD right (log units)",
        "RAPD score (dB)",
        4,
    );
    let _ = writeln!(
        out,
        r##"<line class="zero" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
        frame.px(x_lo),
        frame.py(0.0),
        frame.px(x_hi),
        frame.py(0.0)
    );
    let _ = writeln!(
        out,
        r#"<line class="fit" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{RIGHT_COLOUR}" stroke-width="1.5"/>"#,
        frame.px(x_lo),
        frame.py(line_at(x_lo)),
        frame.px(x_hi),
        frame.py(line_at(x_hi))
    );
    let _ = writeln!(out, r#"<g class="levels" fill="{LEFT_COLOUR}">"#);
    for l in &report.level_scores {
        let _ = writeln!(
            out,
            r#"<circle class="level" cx="{:.2}" cy="{:.2}" r="4"/>"#,
            frame.px(l.level_x),
            frame.py(l.score)
        );
    }
    let _ = writeln!(out, "</g>");
    let (ix, iy) = (frame.px(intercept_x), frame.py(0.0));
    let _ = writeln!(
        out,
        r#"<g class="intercept"><circle cx="{ix:.2}" cy="{iy:.2}" r="5" fill="none" stroke="black" stroke-width="1.5"/><text x="{ix:.2}" y="{:.2}" text-anchor="middle">{}</text></g>"#,
        iy - 10.0,
        tick_label(intercept_x)
    );
    let _ = writeln!(
        out,
        r#"<text class="classification" x="{:.2}" y="{:.2}">{} log units, {}</text>"#,
        MARGIN_LEFT + 10.0,
        MARGIN_TOP + 14.0,
        tick_label(intercept_x),
        report.classification
    );
    out.push_str("</svg>\n");
    Ok(out)
}
