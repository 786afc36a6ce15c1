//! Trace writers: CSV rows and an SVG trajectory plot.

use std::fmt::Write as _;

use formfield::{CircleObstacle, StepRecord, UavMode, Vec2};

/// Decimal places needed to print multiples of `dt` exactly.
pub fn time_decimals(dt: f64) -> usize {
    let mut places = 0;
    let mut scaled = dt;
    while places < 12 && (scaled - scaled.round()).abs() > 1e-9 * scaled.abs().max(1.0) {
        scaled *= 10.0;
        places += 1;
    }
    places
}

/// `t,uav,x,y,fx,fy,mode`, one row per UAV per record, UAV ids 1-based.
pub fn trace_csv(trace: &[StepRecord], dt: f64) -> String {
    let places = time_decimals(dt);
    let rows: usize = trace.iter().map(|r| r.uavs.len()).sum();
    let mut out = String::with_capacity(64 * (rows + 1));
    out.push_str("t,uav,x,y,fx,fy,mode\n");
    for rec in trace {
        for (i, u) in rec.uavs.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:.places$},{},{},{},{},{},{}",
                rec.time,
                i + 1,
                u.position.x,
                u.position.y,
                u.force.x,
                u.force.y,
                u.mode.as_str()
            );
        }
    }
    out
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#7f7f7f",
];
const ESCAPE_COLOR: &str = "#d62728";
const WIDTH: f64 = 800.0;

/// Overlay of several traces in one viewport. Each trace is drawn with its
/// own dash pattern; UAVs keep their colors across traces.
pub struct Plot<'a> {
    pub traces: Vec<(&'a str, &'a [StepRecord])>,
    pub obstacles: &'a [CircleObstacle],
    pub goal: Vec2,
}

struct View {
    min: Vec2,
    scale: f64,
    height: f64,
}

impl View {
    fn px(&self, p: Vec2) -> (f64, f64) {
        (
            (p.x - self.min.x) * self.scale,
            self.height - (p.y - self.min.y) * self.scale,
        )
    }
}

fn bounds(traces: &[(&str, &[StepRecord])], goal: Vec2) -> (Vec2, Vec2) {
    let mut lo = goal;
    let mut hi = goal;
    for (_, t) in traces {
        for u in t.iter().flat_map(|r| r.uavs.iter()) {
            lo = Vec2::new(lo.x.min(u.position.x), lo.y.min(u.position.y));
            hi = Vec2::new(hi.x.max(u.position.x), hi.y.max(u.position.y));
        }
    }
    (lo, hi)
}

impl Plot<'_> {
    pub fn render(&self) -> String {
        let (lo, hi) = bounds(&self.traces, self.goal);
        let margin = 0.05 * (hi - lo).x.max((hi - lo).y).max(1.0) + 1.0;
        let min = lo - Vec2::new(margin, margin);
        let span = (hi - lo) + Vec2::new(2.0 * margin, 2.0 * margin);
        let scale = WIDTH / span.x;
        let view = View {
            min,
            scale,
            height: span.y * scale,
        };

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.2} {:.2}">"#,
            WIDTH, view.height, WIDTH, view.height
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);

        for o in self.obstacles {
            let (cx, cy) = view.px(o.center);
            let _ = writeln!(
                s,
                r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="{:.2}" fill="none" stroke="#999" stroke-dasharray="4 3" stroke-width="0.8"/>"##,
                (o.radius + o.influence) * scale
            );
        }
        for o in self.obstacles {
            let (cx, cy) = view.px(o.center);
            let _ = writeln!(
                s,
                r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="{:.2}" fill="#444"/>"##,
                o.radius * scale
            );
        }

        for (k, (label, trace)) in self.traces.iter().enumerate() {
            let dash = match k {
                0 => "",
                1 => r#" stroke-dasharray="8 4""#,
                _ => r#" stroke-dasharray="2 3""#,
            };
            let _ = writeln!(s, r#"<g class="run" data-label="{label}">"#);
            let n = trace.first().map_or(0, |r| r.uavs.len());
            for i in 0..n {
                for (mode, pts) in segments(trace, i, &view) {
                    let (color, width) = match mode {
                        UavMode::Normal => (PALETTE[i % PALETTE.len()], 1.5),
                        UavMode::Escaping => (ESCAPE_COLOR, 2.5),
                    };
                    let _ = write!(
                        s,
                        r#"<polyline class="{}" fill="none" stroke="{color}" stroke-width="{width}"{dash} points=""#,
                        mode.as_str()
                    );
                    for (j, (x, y)) in pts.iter().enumerate() {
                        let sep = if j == 0 { "" } else { " " };
                        let _ = write!(s, "{sep}{x:.2},{y:.2}");
                    }
                    s.push_str("\"/>\n");
                }
                if k == 0 {
                    let (x, y) = view.px(trace[0].uavs[i].position);
                    let _ = writeln!(
                        s,
                        r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{}"/>"#,
                        PALETTE[i % PALETTE.len()]
                    );
                }
            }
            s.push_str("</g>\n");
        }

        let (gx, gy) = view.px(self.goal);
        let _ = writeln!(
            s,
            r#"<path d="M {:.2} {:.2} L {:.2} {:.2} M {:.2} {:.2} L {:.2} {:.2}" stroke="black" stroke-width="2"/>"#,
            gx - 6.0,
            gy - 6.0,
            gx + 6.0,
            gy + 6.0,
            gx - 6.0,
            gy + 6.0,
            gx + 6.0,
            gy - 6.0
        );
        s.push_str("</svg>\n");
        s
    }
}

/// Runs of equal mode for UAV `i`, in pixels. Points closer than half a
/// pixel to the last kept one are dropped; consecutive runs share their
/// boundary point so the path stays connected.
fn segments(trace: &[StepRecord], i: usize, view: &View) -> Vec<(UavMode, Vec<(f64, f64)>)> {
    let mut out: Vec<(UavMode, Vec<(f64, f64)>)> = Vec::new();
    for rec in trace {
        let u = &rec.uavs[i];
        let p = view.px(u.position);
        match out.last_mut() {
            Some((mode, pts)) if *mode == u.mode => {
                let last = *pts.last().expect("runs are non-empty");
                if (p.0 - last.0).hypot(p.1 - last.1) >= 0.5 {
                    pts.push(p);
                }
            }
            Some((_, pts)) => {
                let last = *pts.last().expect("runs are non-empty");
                pts.push(p);
                out.push((u.mode, vec![last, p]));
            }
            None => out.push((u.mode, vec![p])),
        }
    }
    if let (Some((_, pts)), Some(rec)) = (out.last_mut(), trace.last()) {
        let end = view.px(rec.uavs[i].position);
        if pts.len() == 1 || *pts.last().expect("runs are non-empty") != end {
            pts.push(end);
        }
    }
    out
}
