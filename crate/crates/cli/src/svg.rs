//! Three stacked line plots of a training run: reward, KL, response actions.

use std::fmt::Write as _;

use veason_core::grpo::StepStats;

const WIDTH: f64 = 720.0;
const PANEL_HEIGHT: f64 = 180.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const GAP: f64 = 50.0;

struct Panel {
    title: &'static str,
    color: &'static str,
    values: Vec<f64>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: &[f64]) -> (f64, f64) {
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        (0.0, 1.0)
    } else {
        (lo, hi)
    }
}

fn panel(s: &mut String, p: &Panel, steps: &[usize], top: f64) {
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let (lo, hi) = range(&p.values);
    let y_of = |v: f64| {
        if hi > lo {
            top + (1.0 - (v - lo) / (hi - lo)) * PANEL_HEIGHT
        } else {
            top + PANEL_HEIGHT / 2.0
        }
    };
    let (s0, s1) = (steps[0] as f64, *steps.last().expect("non-empty") as f64);
    let x_of = |step: usize| {
        if s1 > s0 {
            MARGIN_LEFT + (step as f64 - s0) / (s1 - s0) * plot_w
        } else {
            MARGIN_LEFT + plot_w / 2.0
        }
    };
    writeln!(
        s,
        r##"<g class="panel"><rect x="{MARGIN_LEFT}" y="{top}" width="{plot_w}" height="{PANEL_HEIGHT}" fill="none" stroke="#999"/>"##
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{MARGIN_LEFT}" y="{:.2}" font-size="13" font-family="sans-serif">{}</text>"#,
        top - 8.0,
        escape(p.title)
    )
    .unwrap();
    for (v, y) in [(hi, top), (lo, top + PANEL_HEIGHT)] {
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end" font-family="sans-serif">{v:.4}</text>"#,
            MARGIN_LEFT - 6.0,
            y + 4.0
        )
        .unwrap();
    }
    let points: Vec<String> = steps
        .iter()
        .zip(&p.values)
        .filter(|(_, v)| v.is_finite())
        .map(|(st, v)| format!("{:.2},{:.2}", x_of(*st), y_of(*v)))
        .collect();
    writeln!(
        s,
        r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/></g>"#,
        p.color,
        points.join(" ")
    )
    .unwrap();
}

pub fn render_curves(stats: &[StepStats]) -> String {
    let steps: Vec<usize> = stats.iter().map(|s| s.step).collect();
    let panels = [
        Panel {
            title: "mean reward",
            color: "#1f77b4",
            values: stats.iter().map(|s| s.mean_reward).collect(),
        },
        Panel {
            title: "KL to reference",
            color: "#d62728",
            values: stats.iter().map(|s| s.kl).collect(),
        },
        Panel {
            title: "mean response actions",
            color: "#2ca02c",
            values: stats.iter().map(|s| s.mean_response_actions).collect(),
        },
    ];
    let height = MARGIN_TOP + panels.len() as f64 * (PANEL_HEIGHT + GAP);
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    )
    .unwrap();
    writeln!(s, r##"<rect width="100%" height="100%" fill="#fff"/>"##).unwrap();
    if !steps.is_empty() {
        for (i, p) in panels.iter().enumerate() {
            panel(&mut s, p, &steps, MARGIN_TOP + i as f64 * (PANEL_HEIGHT + GAP));
        }
    }
    s.push_str("</svg>\n");
    s
}
