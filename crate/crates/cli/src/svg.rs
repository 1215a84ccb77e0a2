//! Minimal SVG writers for diagnostics.

use std::fmt::Write;

use kakeya_core::conditions::Cone;
use kakeya_core::{IfsSystem, Rect, Vec2};

struct Canvas {
    lo: Vec2,
    hi: Vec2,
    body: String,
}

impl Canvas {
    fn new(lo: Vec2, hi: Vec2) -> Self {
        let pad = 0.05 * (hi.x - lo.x).max(hi.y - lo.y).max(1e-12);
        Self { lo: Vec2::new(lo.x - pad, lo.y - pad), hi: Vec2::new(hi.x + pad, hi.y + pad), body: String::new() }
    }

    // SVG y grows downwards.
    fn y(&self, y: f64) -> f64 {
        self.hi.y + self.lo.y - y
    }

    fn polygon(&mut self, pts: &[Vec2], style: &str) {
        let coords: Vec<String> = pts.iter().map(|p| format!("{:.6},{:.6}", p.x, self.y(p.y))).collect();
        let _ = writeln!(self.body, r#"<polygon points="{}" {style}/>"#, coords.join(" "));
    }

    fn line(&mut self, a: Vec2, b: Vec2, style: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{:.6}" y1="{:.6}" x2="{:.6}" y2="{:.6}" {style}/>"#,
            a.x,
            self.y(a.y),
            b.x,
            self.y(b.y)
        );
    }

    fn finish(self) -> String {
        let (w, h) = (self.hi.x - self.lo.x, self.hi.y - self.lo.y);
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{:.6} {:.6} {w:.6} {h:.6}\" width=\"800\" height=\"{:.0}\">\n{}</svg>\n",
            self.lo.x,
            self.lo.y,
            800.0 * h / w,
            self.body
        )
    }
}

/// Outlines of the rectangles.
pub fn rects(rects: &[Rect]) -> String {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for c in rects.iter().flat_map(|r| r.corners()) {
        lo = Vec2::new(lo.x.min(c.x), lo.y.min(c.y));
        hi = Vec2::new(hi.x.max(c.x), hi.y.max(c.y));
    }
    let mut canvas = Canvas::new(lo, hi);
    let stroke = format!(r#"fill="black" fill-opacity="0.15" stroke="black" stroke-width="{:.6}""#, (hi.x - lo.x) * 1e-3);
    for r in rects {
        canvas.polygon(&r.corners(), &stroke);
    }
    canvas.finish()
}

/// The invariant cone together with the column directions of every map.
pub fn cone(sys: &IfsSystem, cone: Option<&Cone>) -> String {
    let mut canvas = Canvas::new(Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0));
    if let Some(c) = cone {
        let [u, v] = c.boundary_rays();
        for s in [1.0, -1.0] {
            canvas.polygon(
                &[Vec2::ZERO, Vec2::new(s * u.x, s * u.y), Vec2::new(s * v.x, s * v.y)],
                r#"fill="steelblue" fill-opacity="0.3" stroke="none""#,
            );
        }
    }
    for m in sys.maps() {
        let a = m.linear;
        for col in [Vec2::new(a.a, a.c), Vec2::new(a.b, a.d)] {
            let d = col.normalized();
            canvas.line(Vec2::new(-d.x, -d.y), d, r#"stroke="black" stroke-width="0.004""#);
        }
    }
    canvas.finish()
}

/// One dot per point.
pub fn points(pts: &[Vec2]) -> String {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in pts {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let mut canvas = Canvas::new(lo, hi);
    let r = 1.5e-3 * (hi.x - lo.x).max(hi.y - lo.y).max(1e-12);
    for p in pts {
        let _ = writeln!(canvas.body, r#"<circle cx="{:.6}" cy="{:.6}" r="{r:.6}"/>"#, p.x, canvas.y(p.y));
    }
    canvas.finish()
}
