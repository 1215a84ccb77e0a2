//! Attractor rendering, δ-neighborhood areas, box-dimension regression,
//! planar hull utilities and the rectangle-union bound.

use std::f64::consts::{PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ifs::{visit_stopping_set, IfsSystem};
use crate::mat2::Vec2;
use crate::numeric::linear_fit;

const BURN_IN: usize = 100;

/// How a point cloud was produced.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum CloudGen {
    ChaosGame { seed: u64, count: usize },
    StoppingSet { t: f64, r: f64, seed_point: Vec2 },
    Explicit,
}

/// Points approximating an attractor. Every point of E lies within
/// `diameter_bound` of the cloud and vice versa.
#[derive(Clone, Debug, Serialize)]
pub struct PointCloud {
    pub points: Vec<Vec2>,
    pub gen: CloudGen,
    pub diameter_bound: f64,
}

impl PointCloud {
    /// A cloud that is itself the set of interest.
    pub fn explicit(points: Vec<Vec2>) -> Self {
        Self { points, gen: CloudGen::Explicit, diameter_bound: 0.0 }
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        bounding_box(&self.points)
    }
}

fn bounding_box(points: &[Vec2]) -> (Vec2, Vec2) {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    (lo, hi)
}

/// Rendering strategy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum RenderMode {
    ChaosGame { count: usize },
    StoppingSet { t: f64, r: f64 },
}

/// Chaos-game orbit with uniform map selection, starting from the fixed
/// point of the first map (a point of E).
pub fn chaos_game(sys: &IfsSystem, count: usize, seed: u64) -> Vec<Vec2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = sys.kappa();
    let mut x = sys.fixed_point(0);
    for _ in 0..BURN_IN {
        x = sys.map(rng.gen_range(0..k)).apply(x);
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        x = sys.map(rng.gen_range(0..k)).apply(x);
        out.push(x);
    }
    out
}

/// Render the attractor. Chaos-game clouds carry no covering certificate
/// (`diameter_bound = ∞`); stopping-set clouds place the image of the first
/// fixed point in every cylinder of `Z(r)`.
pub fn render(sys: &IfsSystem, mode: RenderMode, budget: u64, seed: u64) -> Result<PointCloud> {
    match mode {
        RenderMode::ChaosGame { count } => {
            if count as u64 > budget {
                return Err(Error::BudgetExceeded { budget, requested: count as u128 });
            }
            Ok(PointCloud {
                points: chaos_game(sys, count, seed),
                gen: CloudGen::ChaosGame { seed, count },
                diameter_bound: f64::INFINITY,
            })
        }
        RenderMode::StoppingSet { t, r } => {
            let p0 = sys.fixed_point(0);
            let (_, radius) = sys.enclosing_ball();
            let mut points = Vec::new();
            let mut max_log_a1 = f64::NEG_INFINITY;
            visit_stopping_set(sys, t, r, budget, |_, p, o| {
                let s = 2f64.powi(p.exponent.clamp(-1100, 1100) as i32);
                points.push(p.mantissa.mul_vec(p0) * s + o);
                max_log_a1 = max_log_a1.max(p.log_alpha1());
            })?;
            Ok(PointCloud {
                points,
                gen: CloudGen::StoppingSet { t, r, seed_point: p0 },
                diameter_bound: 2.0 * max_log_a1.exp() * radius,
            })
        }
    }
}

/// A grid of square cells with an occupancy bitmap; row 0 is the bottom.
#[derive(Clone, Debug)]
pub struct Raster {
    pub origin: Vec2,
    pub h: f64,
    pub width: usize,
    pub height: usize,
    pub cells: Vec<bool>,
}

impl Raster {
    /// Empty raster covering `[lo, hi]` with at least `margin` cells on each side.
    pub fn covering(lo: Vec2, hi: Vec2, h: f64, margin: usize) -> Raster {
        let m = margin as f64 * h;
        let origin = Vec2::new(lo.x - m, lo.y - m);
        let width = ((hi.x - lo.x) / h).ceil() as usize + 2 * margin + 1;
        let height = ((hi.y - lo.y) / h).ceil() as usize + 2 * margin + 1;
        Raster { origin, h, width, height, cells: vec![false; width * height] }
    }

    pub fn index_of(&self, p: Vec2) -> Option<(usize, usize)> {
        let ix = ((p.x - self.origin.x) / self.h).floor();
        let iy = ((p.y - self.origin.y) / self.h).floor();
        if ix < 0.0 || iy < 0.0 || ix >= self.width as f64 || iy >= self.height as f64 {
            None
        } else {
            Some((ix as usize, iy as usize))
        }
    }

    pub fn center(&self, ix: usize, iy: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + (ix as f64 + 0.5) * self.h,
            self.origin.y + (iy as f64 + 0.5) * self.h,
        )
    }

    pub fn get(&self, ix: usize, iy: usize) -> bool {
        self.cells[iy * self.width + ix]
    }

    pub fn set(&mut self, ix: usize, iy: usize) {
        self.cells[iy * self.width + ix] = true;
    }

    pub fn mark(&mut self, p: Vec2) {
        if let Some((ix, iy)) = self.index_of(p) {
            self.set(ix, iy);
        }
    }

    pub fn count(&self) -> usize {
        self.cells.par_chunks(self.width).map(|r| r.iter().filter(|&&b| b).count()).sum()
    }

    pub fn area(&self) -> f64 {
        self.count() as f64 * self.h * self.h
    }

    /// Cells whose state differs from one of their 4-neighbors.
    pub fn boundary_cells(&self) -> usize {
        let (w, hgt) = (self.width, self.height);
        (0..hgt)
            .into_par_iter()
            .map(|y| {
                let mut c = 0;
                for x in 0..w {
                    let v = self.get(x, y);
                    let diff = (x > 0 && self.get(x - 1, y) != v)
                        || (x + 1 < w && self.get(x + 1, y) != v)
                        || (y > 0 && self.get(x, y - 1) != v)
                        || (y + 1 < hgt && self.get(x, y + 1) != v);
                    c += diff as usize;
                }
                c
            })
            .sum()
    }

    /// Rasterization error estimate for the occupied area.
    pub fn area_error(&self) -> f64 {
        self.boundary_cells() as f64 * self.h * self.h
    }

    /// Binary PGM (P5), occupied cells black, top row first.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        for y in (0..self.height).rev() {
            for x in 0..self.width {
                out.push(if self.get(x, y) { 0 } else { 255 });
            }
        }
        out
    }
}

/// Raster of a point cloud with `pixels` cells along its longer side.
pub fn rasterize_points(points: &[Vec2], pixels: usize) -> Raster {
    let (lo, hi) = bounding_box(points);
    let extent = (hi.x - lo.x).max(hi.y - lo.y).max(1e-300);
    let mut r = Raster::covering(lo, hi, extent / pixels.max(1) as f64, 2);
    for &p in points {
        r.mark(p);
    }
    r
}

const FAR: f64 = 1e30;

/// One-dimensional squared distance transform (lower envelope of parabolas).
fn edt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let qf = q as f64;
        loop {
            let p = v[k] as f64;
            let s = ((f[q] + qf * qf) - (f[v[k]] + p * p)) / (2.0 * qf - 2.0 * p);
            if s <= z[k] && k > 0 {
                k -= 1;
            } else if s <= z[k] {
                // k == 0 and the new parabola dominates everywhere.
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for q in 0..n {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let p = v[k] as f64;
        d[q] = (qf - p) * (qf - p) + f[v[k]];
    }
}

/// Exact squared Euclidean distance (in cell units) from every cell center
/// to the nearest occupied cell center.
pub fn distance_transform(r: &Raster) -> Vec<f64> {
    let (w, h) = (r.width, r.height);
    // Column pass, stored column-major.
    let mut cols = vec![0.0; w * h];
    cols.par_chunks_mut(h).enumerate().for_each(|(x, col)| {
        let f: Vec<f64> = (0..h).map(|y| if r.get(x, y) { 0.0 } else { FAR }).collect();
        let mut v = vec![0usize; h];
        let mut z = vec![0.0; h + 1];
        edt_1d(&f, col, &mut v, &mut z);
    });
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let f: Vec<f64> = (0..w).map(|x| cols[x * h + y]).collect();
        let mut v = vec![0usize; w];
        let mut z = vec![0.0; w + 1];
        edt_1d(&f, row, &mut v, &mut z);
    });
    out
}

/// Seed raster for a cloud, sized for neighborhoods up to `delta_max`.
fn seed_raster(points: &[Vec2], delta_max: f64, h: f64) -> Raster {
    let (lo, hi) = bounding_box(points);
    let margin = (delta_max / h).ceil() as usize + 2;
    let mut r = Raster::covering(lo, hi, h, margin);
    for &p in points {
        r.mark(p);
    }
    r
}

/// Measured area of a δ-neighborhood with an error estimate.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AreaMeasurement {
    pub delta: f64,
    pub h: f64,
    pub area: f64,
    pub error_bound: f64,
}

/// Count cells within `delta` of a seed, plus the boundary-cell count.
fn threshold_counts(dist: &[f64], w: usize, h: usize, rho2: f64) -> (usize, usize) {
    (0..h)
        .into_par_iter()
        .map(|y| {
            let inside = |x: usize, y: usize| dist[y * w + x] <= rho2;
            let mut c = 0;
            let mut b = 0;
            for x in 0..w {
                let v = inside(x, y);
                c += v as usize;
                let diff = (x > 0 && inside(x - 1, y) != v)
                    || (x + 1 < w && inside(x + 1, y) != v)
                    || (y > 0 && inside(x, y - 1) != v)
                    || (y + 1 < h && inside(x, y + 1) != v);
                b += diff as usize;
            }
            (c, b)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
}

/// Area of the δ-neighborhood of a cloud on a grid of cell size `h`.
pub fn neighborhood_area(cloud: &PointCloud, delta: f64, h: f64) -> Result<AreaMeasurement> {
    if h > delta / 4.0 {
        return Err(Error::Resolution { h, limit: delta / 4.0 });
    }
    if !(delta > 2.0 * cloud.diameter_bound) {
        return Err(Error::hypothesis(format!(
            "delta = {delta} must exceed twice the cloud's diameter bound {}",
            cloud.diameter_bound
        )));
    }
    let r = seed_raster(&cloud.points, delta, h);
    let dist = distance_transform(&r);
    let rho = delta / h;
    let (c, b) = threshold_counts(&dist, r.width, r.height, rho * rho);
    Ok(AreaMeasurement { delta, h, area: c as f64 * h * h, error_bound: 2.0 * b as f64 * h * h })
}

/// Geometric sequence of neighborhood radii.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DeltaRange {
    /// Largest δ as a fraction of the rendered diameter of E.
    pub max_fraction: f64,
    pub count: usize,
    pub ratio: f64,
    /// Number of largest deltas left out of the regression.
    pub exclude_largest: usize,
}

impl Default for DeltaRange {
    fn default() -> Self {
        Self { max_fraction: 1.0 / 16.0, count: 12, ratio: SQRT_2, exclude_largest: 2 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BoxDimEstimate {
    pub deltas: Vec<f64>,
    pub areas: Vec<f64>,
    pub area_errors: Vec<f64>,
    pub used_in_fit: usize,
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub dim_estimate: f64,
    pub cell_size: f64,
    pub points: usize,
    pub diameter_bound: f64,
}

/// Diameter of a planar point set via its hull.
pub fn point_set_diameter(points: &[Vec2]) -> f64 {
    let hull = convex_hull(points);
    let mut d: f64 = 0.0;
    for i in 0..hull.len() {
        for j in i + 1..hull.len() {
            d = d.max((hull[i] - hull[j]).norm());
        }
    }
    d
}

/// Minkowski-dimension estimate from rasterized δ-neighborhoods of a
/// stopping-set rendering fine enough for the smallest δ. The rendered
/// points are marked on the grid as they are generated.
pub fn box_dimension(sys: &IfsSystem, range: DeltaRange, budget: u64) -> Result<BoxDimEstimate> {
    if range.count < range.exclude_largest + 3 || !(range.ratio > 1.0) || !(range.max_fraction > 0.0) {
        return Err(Error::hypothesis("delta range needs ratio > 1 and at least three fitted values"));
    }
    let diam = point_set_diameter(&chaos_game(sys, 4096, 0));
    let diam = if diam > 0.0 { diam } else { 2.0 * sys.enclosing_ball().1 };
    if !(diam > 0.0) {
        return Err(Error::hypothesis("attractor is a single point"));
    }
    let deltas: Vec<f64> =
        (0..range.count).map(|k| range.max_fraction * diam / range.ratio.powi(k as i32)).collect();
    let delta_min = *deltas.last().unwrap();
    let h = delta_min / 4.0;
    let (center, radius) = sys.enclosing_ball();
    let reach = Vec2::new(radius, radius);
    let margin = (deltas[0] / h).ceil() as usize + 2;
    let mut r = Raster::covering(center - reach, center + reach, h, margin);
    let p0 = sys.fixed_point(0);
    let mut points = 0usize;
    let mut max_log_a1 = f64::NEG_INFINITY;
    visit_stopping_set(sys, 1.0, delta_min / (8.0 * radius), budget, |_, p, o| {
        let s = 2f64.powi(p.exponent.clamp(-1100, 1100) as i32);
        r.mark(p.mantissa.mul_vec(p0) * s + o);
        max_log_a1 = max_log_a1.max(p.log_alpha1());
        points += 1;
    })?;
    let diameter_bound = 2.0 * max_log_a1.exp() * radius;
    debug_assert!(diameter_bound <= delta_min / 4.0 * (1.0 + 1e-12));
    let dist = distance_transform(&r);
    let mut areas = Vec::with_capacity(deltas.len());
    let mut area_errors = Vec::with_capacity(deltas.len());
    for &d in &deltas {
        let rho = d / h;
        let (c, b) = threshold_counts(&dist, r.width, r.height, rho * rho);
        areas.push(c as f64 * h * h);
        area_errors.push(2.0 * b as f64 * h * h);
    }
    let fit = &deltas[range.exclude_largest..];
    let xs: Vec<f64> = fit.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = areas[range.exclude_largest..].iter().map(|a| a.ln()).collect();
    let (slope, intercept, stderr) = linear_fit(&xs, &ys);
    Ok(BoxDimEstimate {
        deltas,
        areas,
        area_errors,
        used_in_fit: xs.len(),
        slope,
        intercept,
        stderr,
        dim_estimate: 2.0 - slope,
        cell_size: h,
        points,
        diameter_bound,
    })
}

/// Convex hull in counter-clockwise order (Andrew's monotone chain);
/// collinear points are dropped.
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: Vec2, a: Vec2, b: Vec2| (a - o).cross(b - o);
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Minimum width of a convex polygon (zero for fewer than three vertices).
pub fn hull_min_width(hull: &[Vec2]) -> f64 {
    if hull.len() < 3 {
        return 0.0;
    }
    let n = hull.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        let (a, b) = (hull[i], hull[(i + 1) % n]);
        let e = b - a;
        let len = e.norm();
        if len == 0.0 {
            continue;
        }
        let far = hull.iter().map(|&p| e.cross(p - a).abs() / len).fold(0.0, f64::max);
        best = best.min(far);
    }
    best
}

/// Separating-axis test for convex polygons (possibly degenerate). Only
/// overlaps that survive a relative margin of `1e-12` count.
pub fn hulls_intersect(p: &[Vec2], q: &[Vec2]) -> bool {
    if p.is_empty() || q.is_empty() {
        return false;
    }
    let scale = p.iter().chain(q).map(|v| v.x.abs().max(v.y.abs())).fold(1e-300, f64::max);
    let eps = 1e-12 * scale;
    let mut axes = Vec::new();
    for poly in [p, q] {
        let n = poly.len();
        for i in 0..n {
            let e = poly[(i + 1) % n] - poly[i];
            if e.norm() > 0.0 {
                axes.push(e.perp().normalized());
                if n <= 2 {
                    axes.push(e.normalized());
                }
            }
        }
    }
    if p.len() == 1 && q.len() == 1 {
        return (p[0] - q[0]).norm() <= eps;
    }
    let project = |poly: &[Vec2], a: Vec2| {
        poly.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            let t = v.dot(a);
            (lo.min(t), hi.max(t))
        })
    };
    axes.iter().all(|&a| {
        let (p0, p1) = project(p, a);
        let (q0, q1) = project(q, a);
        p1.min(q1) - p0.max(q0) >= -eps
    })
}

/// Area of a simple polygon (shoelace formula, absolute value).
pub fn polygon_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    (0..n).map(|i| poly[i].cross(poly[(i + 1) % n])).sum::<f64>().abs() * 0.5
}

/// Intersection of two convex polygons given counter-clockwise
/// (Sutherland–Hodgman clipping).
pub fn convex_intersection(subject: &[Vec2], clip: &[Vec2]) -> Vec<Vec2> {
    let mut out: Vec<Vec2> = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % n]);
        let side = |p: Vec2| (b - a).cross(p - a);
        let input = std::mem::take(&mut out);
        let m = input.len();
        for j in 0..m {
            let (cur, prev) = (input[j], input[(j + m - 1) % m]);
            let (sc, sp) = (side(cur), side(prev));
            if sc >= 0.0 {
                if sp < 0.0 {
                    out.push(prev + (cur - prev) * (sp / (sp - sc)));
                }
                out.push(cur);
            } else if sp >= 0.0 {
                out.push(prev + (cur - prev) * (sp / (sp - sc)));
            }
        }
    }
    out
}

/// A rectangle with sides `len1` along `long_axis` and `len2` across it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Rect {
    pub center: Vec2,
    pub long_axis: Vec2,
    pub len1: f64,
    pub len2: f64,
}

impl Rect {
    pub fn new(center: Vec2, angle: f64, len1: f64, len2: f64) -> Self {
        Self { center, long_axis: Vec2::from_angle(angle), len1, len2 }
    }

    /// Corners in counter-clockwise order.
    pub fn corners(&self) -> [Vec2; 4] {
        let u = self.long_axis * (0.5 * self.len1);
        let v = self.long_axis.perp() * (0.5 * self.len2);
        let c = self.center;
        [c - u - v, c + u - v, c + u + v, c - u + v]
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let d = p - self.center;
        d.dot(self.long_axis).abs() <= 0.5 * self.len1
            && d.dot(self.long_axis.perp()).abs() <= 0.5 * self.len2
    }

    pub fn area(&self) -> f64 {
        self.len1 * self.len2
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * (self.len1 + self.len2)
    }

    fn bbox(&self) -> (Vec2, Vec2) {
        bounding_box(&self.corners())
    }
}

/// Smaller angle between the long sides of two rectangles, in `[0, π/2]`.
pub fn line_angle(r1: &Rect, r2: &Rect) -> f64 {
    let c = r1.long_axis.dot(r2.long_axis).abs().min(1.0);
    let s = r1.long_axis.cross(r2.long_axis).abs();
    s.atan2(c)
}

/// Exact area of `R₁ ∩ R₂`.
pub fn rect_intersection_area(r1: &Rect, r2: &Rect) -> f64 {
    polygon_area(&convex_intersection(&r1.corners(), &r2.corners()))
}

/// Pairwise-overlap estimate `√2·π·α₂² / (α₂/α₁ + ∠)`.
pub fn overlap_bound(alpha1: f64, alpha2: f64, angle: f64) -> f64 {
    SQRT_2 * PI * alpha2 * alpha2 / (alpha2 / alpha1 + angle)
}

/// Lower bound `Mτ²α₁α₂ / (2√2·π·log(2πα₁/α₂))` for the area of a set
/// meeting `M` well-separated rectangles in proportion `τ`.
pub fn kakeya_bound(m: usize, alpha1: f64, alpha2: f64, tau: f64) -> Result<f64> {
    if !(alpha1 > alpha2 && alpha2 > 0.0) {
        return Err(Error::hypothesis("need alpha1 > alpha2 > 0"));
    }
    if !(tau >= 0.0 && tau <= 1.0) {
        return Err(Error::hypothesis("need 0 <= tau <= 1"));
    }
    if m == 0 {
        return Err(Error::hypothesis("need M >= 1"));
    }
    let l = (2.0 * PI * alpha1 / alpha2).ln();
    if !(l > 0.0) {
        return Err(Error::hypothesis("need 2*pi*alpha1/alpha2 > 1"));
    }
    Ok(m as f64 * tau * tau * alpha1 * alpha2 / (2.0 * SQRT_2 * PI * l))
}

/// Raster of a union of rectangles: a cell is set when its center lies in
/// one of them.
pub fn rasterize_rects(rects: &[Rect], h: f64) -> Raster {
    let (mut lo, mut hi) = rects[0].bbox();
    for r in rects {
        let (a, b) = r.bbox();
        lo = Vec2::new(lo.x.min(a.x), lo.y.min(a.y));
        hi = Vec2::new(hi.x.max(b.x), hi.y.max(b.y));
    }
    let mut raster = Raster::covering(lo, hi, h, 2);
    let w = raster.width;
    let origin = raster.origin;
    raster.cells.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let cy = origin.y + (y as f64 + 0.5) * h;
        for r in rects {
            let (a, b) = r.bbox();
            if cy < a.y || cy > b.y {
                continue;
            }
            let x0 = (((a.x - origin.x) / h).floor().max(0.0)) as usize;
            let x1 = ((((b.x - origin.x) / h).ceil()) as usize).min(w);
            for (x, cell) in row.iter_mut().enumerate().take(x1).skip(x0) {
                if !*cell {
                    let c = Vec2::new(origin.x + (x as f64 + 0.5) * h, cy);
                    *cell = r.contains(c);
                }
            }
        }
    });
    raster
}

/// Area of the occupied cells of `f` whose centers lie in `rect`.
pub fn raster_area_in(f: &Raster, rect: &Rect) -> f64 {
    let (a, b) = rect.bbox();
    let x0 = (((a.x - f.origin.x) / f.h).floor().max(0.0)) as usize;
    let y0 = (((a.y - f.origin.y) / f.h).floor().max(0.0)) as usize;
    let x1 = ((((b.x - f.origin.x) / f.h).ceil()).max(0.0) as usize).min(f.width);
    let y1 = ((((b.y - f.origin.y) / f.h).ceil()).max(0.0) as usize).min(f.height);
    let mut c = 0usize;
    for y in y0..y1 {
        for x in x0..x1 {
            if f.get(x, y) && rect.contains(f.center(x, y)) {
                c += 1;
            }
        }
    }
    c as f64 * f.h * f.h
}

#[derive(Clone, Debug, Serialize)]
pub struct KakeyaCheck {
    pub m: usize,
    pub bound: f64,
    pub measured: f64,
    pub margin: f64,
    pub min_pair_angle: f64,
    pub pass: bool,
}

/// Check the hypotheses of the rectangle bound on `rects` and `F`, then
/// compare the rasterized area of `F` against the bound.
pub fn verify_kakeya_estimate(rects: &[Rect], f: &Raster, tau: f64) -> Result<KakeyaCheck> {
    let first = rects.first().ok_or_else(|| Error::hypothesis("no rectangles"))?;
    let (a1, a2) = (first.len1, first.len2);
    for (i, r) in rects.iter().enumerate() {
        if (r.len1 - a1).abs() > 1e-12 * a1 || (r.len2 - a2).abs() > 1e-12 * a2 {
            return Err(Error::hypothesis(format!("rectangle {} has different side lengths", i + 1)));
        }
    }
    if !(a1 > a2) {
        return Err(Error::hypothesis("need len1 > len2"));
    }
    let sep = a2 / a1;
    let mut min_angle = f64::INFINITY;
    for i in 0..rects.len() {
        for j in i + 1..rects.len() {
            let ang = line_angle(&rects[i], &rects[j]);
            if ang < sep * (1.0 - 1e-12) {
                return Err(Error::hypothesis(format!(
                    "rectangles {} and {} meet at angle {ang:.3e} < alpha2/alpha1 = {sep:.3e}",
                    i + 1,
                    j + 1
                )));
            }
            min_angle = min_angle.min(ang);
        }
    }
    for (i, r) in rects.iter().enumerate() {
        let inside = raster_area_in(f, r);
        let slack = SQRT_2 * r.perimeter() * f.h;
        if inside < tau * a1 * a2 - slack {
            return Err(Error::hypothesis(format!(
                "F covers {inside:.3e} of rectangle {}, less than tau*alpha1*alpha2 = {:.3e}",
                i + 1,
                tau * a1 * a2
            )));
        }
    }
    let bound = kakeya_bound(rects.len(), a1, a2, tau)?;
    let measured = f.area();
    let margin = f.area_error();
    Ok(KakeyaCheck {
        m: rects.len(),
        bound,
        measured,
        margin,
        min_pair_angle: min_angle,
        pass: measured >= bound - margin,
    })
}

/// `M` rectangles about a common center with long sides at angles
/// `k·spacing`.
pub fn fan(m: usize, alpha1: f64, alpha2: f64, spacing: f64) -> Vec<Rect> {
    (0..m).map(|k| Rect::new(Vec2::ZERO, k as f64 * spacing, alpha1, alpha2)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn render_unit_interval() {
        let sys = fixtures::unit_interval();
        let c = render(&sys, RenderMode::ChaosGame { count: 5000 }, 1 << 20, 1).unwrap();
        assert!(c.points.iter().all(|p| p.y.abs() < 1e-12 && p.x > -1e-12 && p.x < 1.0 + 1e-12));
        let c = render(&sys, RenderMode::StoppingSet { t: 1.0, r: 1e-3 }, 1 << 20, 1).unwrap();
        assert_eq!(c.points.len(), 1024);
        assert!(c.diameter_bound <= 2.0 * 1e-3 * sys.enclosing_ball().1 + 1e-15);
    }

    #[test]
    fn render_collapses_to_fixed_point() {
        let a = crate::mat2::Mat2::new(0.3, 0.1, 0.0, 0.2);
        let t = Vec2::new(0.4, -0.2);
        let sys = IfsSystem::from_parts(&[(a, t), (a, t)]).unwrap();
        let p = sys.fixed_point(0);
        let c = render(&sys, RenderMode::ChaosGame { count: 1000 }, 1 << 20, 3).unwrap();
        assert!(c.points.iter().all(|q| (*q - p).norm() < 1e-12));
    }

    #[test]
    fn render_budget() {
        let sys = fixtures::unit_interval();
        assert!(matches!(
            render(&sys, RenderMode::ChaosGame { count: 100 }, 10, 0),
            Err(Error::BudgetExceeded { .. })
        ));
        assert!(matches!(
            render(&sys, RenderMode::StoppingSet { t: 1.0, r: 1e-6 }, 1000, 0),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn edgar_extent() {
        let sys = fixtures::edgar(0.4, 0.1);
        let c = render(&sys, RenderMode::ChaosGame { count: 100_000 }, 1 << 20, 0).unwrap();
        let (lo, hi) = c.bounding_box();
        // (x, y) ↦ (−y, −x) swaps the two maps, so E is invariant under it.
        let w = hi.x - lo.x;
        assert!((lo.x + hi.y).abs() < 0.1 * w && (lo.y + hi.x).abs() < 0.1 * w);
        for i in 0..2 {
            let p = sys.fixed_point(i);
            let tol = 1e-3 * w;
            assert!(p.x >= lo.x - tol && p.x <= hi.x + tol && p.y >= lo.y - tol && p.y <= hi.y + tol);
        }
        let (center, radius) = sys.enclosing_ball();
        assert!((hi - center).norm() <= radius && (lo - center).norm() <= radius);
    }

    #[test]
    fn disk_area() {
        let c = PointCloud::explicit(vec![Vec2::new(0.3, 0.1)]);
        let a = neighborhood_area(&c, 1.0, 1.0 / 256.0).unwrap();
        assert!((a.area / PI - 1.0).abs() < 0.02, "{a:?}");
        let c = PointCloud::explicit(vec![Vec2::ZERO, Vec2::new(10.0, 0.0)]);
        let a = neighborhood_area(&c, 1.0, 1.0 / 64.0).unwrap();
        assert!((a.area / (2.0 * PI) - 1.0).abs() < 0.02);
    }

    #[test]
    fn stadium_area() {
        let pts: Vec<Vec2> = (0..=4000).map(|k| Vec2::new(k as f64 / 4000.0, 0.0)).collect();
        let c = PointCloud::explicit(pts);
        let a = neighborhood_area(&c, 0.1, 0.1 / 16.0).unwrap();
        let exact = 2.0 * 0.1 + PI * 0.01;
        assert!((a.area / exact - 1.0).abs() < 0.03, "{a:?}");
    }

    #[test]
    fn resolution_error() {
        let c = PointCloud::explicit(vec![Vec2::ZERO]);
        assert!(matches!(neighborhood_area(&c, 1.0, 0.3), Err(Error::Resolution { .. })));
    }

    #[test]
    fn edt_matches_brute_force() {
        let mut r = Raster::covering(Vec2::ZERO, Vec2::new(1.0, 0.7), 0.05, 2);
        for p in [Vec2::new(0.1, 0.1), Vec2::new(0.9, 0.2), Vec2::new(0.5, 0.65)] {
            r.mark(p);
        }
        let d = distance_transform(&r);
        let seeds: Vec<(usize, usize)> =
            (0..r.height).flat_map(|y| (0..r.width).map(move |x| (x, y))).filter(|&(x, y)| r.get(x, y)).collect();
        for y in 0..r.height {
            for x in 0..r.width {
                let b = seeds
                    .iter()
                    .map(|&(sx, sy)| (x as f64 - sx as f64).powi(2) + (y as f64 - sy as f64).powi(2))
                    .fold(f64::INFINITY, f64::min);
                assert_eq!(d[y * r.width + x], b);
            }
        }
    }

    #[test]
    fn rect_raster_area() {
        let rect = Rect::new(Vec2::new(0.2, 0.3), 0.0, 0.7, 0.3);
        let h = 1.0 / 200.0;
        let r = rasterize_rects(&[rect], h);
        assert!((r.area() - 0.21).abs() <= 2.0 * (0.7 + 0.3) * h);
    }

    #[test]
    fn intersection_of_squares() {
        let a = Rect::new(Vec2::ZERO, 0.0, 2.0, 1.0);
        let b = Rect::new(Vec2::new(0.5, 0.0), 0.0, 2.0, 1.0);
        assert!((rect_intersection_area(&a, &b) - 1.5).abs() < 1e-14);
        let c = Rect::new(Vec2::ZERO, std::f64::consts::FRAC_PI_2, 2.0, 1.0);
        assert!((rect_intersection_area(&a, &c) - 1.0).abs() < 1e-14);
        let far = Rect::new(Vec2::new(5.0, 0.0), 0.0, 2.0, 1.0);
        assert_eq!(rect_intersection_area(&a, &far), 0.0);
    }

    #[test]
    fn kakeya_bound_examples() {
        let b = kakeya_bound(1, 1.0, 0.01, 1.0).unwrap();
        let direct = 0.01 / (2.0 * SQRT_2 * PI * (200.0 * PI).ln());
        assert!((b - direct).abs() < 1e-18);
        assert!((b - 1.75e-4).abs() < 5e-6);
        assert_eq!(kakeya_bound(3, 1.0, 0.01, 0.0).unwrap(), 0.0);
        let b2 = kakeya_bound(2, 1.0, 0.01, 0.7).unwrap();
        let b4 = kakeya_bound(4, 1.0, 0.01, 0.7).unwrap();
        assert!((b4 - 2.0 * b2).abs() < 1e-18);
        assert!(kakeya_bound(1, 0.1, 0.2, 1.0).is_err());
    }

    #[test]
    fn fan_passes() {
        let (a1, a2) = (1.0, 1.0 / 64.0);
        let rects = fan(64, a1, a2, a2 / a1);
        let f = rasterize_rects(&rects, a2 / 32.0);
        let r = verify_kakeya_estimate(&rects, &f, 1.0).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn parallel_rects_rejected() {
        let rects = vec![Rect::new(Vec2::ZERO, 0.3, 1.0, 0.1), Rect::new(Vec2::new(0.0, 1.0), 0.3, 1.0, 0.1)];
        let f = rasterize_rects(&rects, 0.01);
        assert!(matches!(verify_kakeya_estimate(&rects, &f, 1.0), Err(Error::HypothesisViolated(_))));
    }

    #[test]
    fn single_rect_passes() {
        let rects = vec![Rect::new(Vec2::ZERO, 0.4, 1.0, 0.1)];
        let f = rasterize_rects(&rects, 0.1 / 32.0);
        let r = verify_kakeya_estimate(&rects, &f, 1.0).unwrap();
        assert!(r.pass && r.measured >= r.bound);
    }

    #[test]
    fn hull_and_width() {
        let pts = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 1.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 0.5),
            Vec2::new(1.0, 0.0),
        ];
        let h = convex_hull(&pts);
        assert_eq!(h.len(), 4);
        assert!((hull_min_width(&h) - 1.0).abs() < 1e-15);
        assert!((polygon_area(&h) - 2.0).abs() < 1e-15);
        assert!((point_set_diameter(&pts) - 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sat_cases() {
        let sq = |c: Vec2| Rect::new(c, 0.0, 1.0, 1.0).corners().to_vec();
        assert!(hulls_intersect(&sq(Vec2::ZERO), &sq(Vec2::new(0.9, 0.9))));
        assert!(!hulls_intersect(&sq(Vec2::ZERO), &sq(Vec2::new(1.1, 0.0))));
        let seg = vec![Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0)];
        let seg2 = vec![Vec2::new(0.0, -1.0), Vec2::new(0.0, 1.0)];
        assert!(hulls_intersect(&seg, &seg2));
        assert!(!hulls_intersect(&seg, &[Vec2::new(0.0, 0.5)]));
    }
}
