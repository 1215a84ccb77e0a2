//! Checks of the Kakeya-type hypotheses: cone invariance and separation,
//! the X1 interval criterion, projection criteria and the projective
//! contraction factor.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{chaos_game, convex_hull, hull_min_width, hulls_intersect};
use crate::ifs::{word_endpoints, IfsSystem};
use crate::mat2::{svd2, Mat2, Vec2};

const CONE_MARGIN: f64 = 1e-9;
const ORIENT_EPS: f64 = 1e-12;
/// Points rendered for hull-based witnesses.
const WITNESS_POINTS: usize = 4096;
const WITNESS_SEED: u64 = 0;

/// The double cone `X(θ, β) = {x ≠ 0 : cos(β/2) < |θ·x|/|x|}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cone {
    pub theta: Vec2,
    pub beta: f64,
    /// Angular gap between the widest image ray and the cone boundary.
    pub margin: f64,
}

impl Cone {
    pub fn contains(&self, x: Vec2) -> bool {
        (0.5 * self.beta).cos() < self.theta.dot(x).abs() / x.norm()
    }

    /// Supermultiplicativity constant `D = cos⁻²β`.
    pub fn d_constant(&self) -> f64 {
        1.0 / self.beta.cos().powi(2)
    }

    /// Unit vectors along the two boundary lines.
    pub fn boundary_rays(&self) -> [Vec2; 2] {
        let a = self.theta.angle();
        [Vec2::from_angle(a - 0.5 * self.beta), Vec2::from_angle(a + 0.5 * self.beta)]
    }

    /// Signed angle of the line through `v` relative to `θ`, in `(−π/2, π/2]`.
    pub fn signed_deviation(&self, v: Vec2) -> f64 {
        let v = if self.theta.dot(v) < 0.0 { -v } else { v };
        self.theta.cross(v).atan2(self.theta.dot(v))
    }
}

/// Why no cone was found.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConeFailure {
    pub map_index: usize,
    /// Offending `(row, column)` entry, if the failure is a sign pattern.
    pub entry: Option<(usize, usize)>,
    pub reason: String,
}

/// `m` or `−m`, whichever has strictly positive entries.
pub fn sign_normalized(m: &Mat2) -> Option<Mat2> {
    if m.is_positive() {
        Some(*m)
    } else if m.is_negative() {
        Some(-*m)
    } else {
        None
    }
}

fn sign_failure(i: usize, m: &Mat2) -> ConeFailure {
    let e = m.entries();
    let pos = if e.iter().filter(|v| **v > 0.0).count() >= e.iter().filter(|v| **v < 0.0).count() {
        1.0
    } else {
        -1.0
    };
    let k = e.iter().position(|v| *v * pos <= 0.0).unwrap_or(0);
    let reason = if e[k] == 0.0 { "zero entry" } else { "mixed-sign entries" };
    ConeFailure { map_index: i, entry: Some((k / 2, k % 2)), reason: reason.into() }
}

/// Deviation of the line through `v` from the diagonal `(1,1)/√2`.
fn diagonal_deviation(v: Vec2) -> f64 {
    (v.y.atan2(v.x) - FRAC_PI_4).abs()
}

/// Cone around the diagonal containing the images of the closed quadrant
/// under every `Aᵢ` and `Aᵢᵀ` (after sign normalization).
pub fn find_invariant_cone(sys: &IfsSystem) -> std::result::Result<Cone, ConeFailure> {
    let mut dev: f64 = 0.0;
    for (i, m) in sys.maps().iter().enumerate() {
        let a = sign_normalized(&m.linear).ok_or_else(|| sign_failure(i, &m.linear))?;
        for v in [
            Vec2::new(a.a, a.c),
            Vec2::new(a.b, a.d),
            Vec2::new(a.a, a.b),
            Vec2::new(a.c, a.d),
        ] {
            dev = dev.max(diagonal_deviation(v));
        }
    }
    let beta = 2.0 * dev + 2.0 * CONE_MARGIN;
    if beta >= FRAC_PI_2 {
        return Err(ConeFailure {
            map_index: 0,
            entry: None,
            reason: "boundary-ray images reach the quadrant boundary".into(),
        });
    }
    Ok(Cone { theta: Vec2::new(1.0, 1.0).normalized(), beta, margin: CONE_MARGIN })
}

/// Boundary rays of a cone in the open first quadrant mapped into itself by
/// every sign-normalized linear part, obtained by iterating the images of
/// the quadrant. Each iterate is invariant; the result is widened by a
/// small angle to absorb rounding.
pub fn refined_invariant_rays(sys: &IfsSystem, iterations: usize) -> Option<[Vec2; 2]> {
    let mats: Vec<Mat2> = sys.maps().iter().map(|m| sign_normalized(&m.linear)).collect::<Option<_>>()?;
    let (mut lo, mut hi) = (0.0f64, FRAC_PI_2);
    for _ in 0..iterations.max(1) {
        let (mut nlo, mut nhi) = (f64::INFINITY, f64::NEG_INFINITY);
        for a in &mats {
            for ang in [lo, hi] {
                let v = a.mul_vec(Vec2::from_angle(ang));
                let t = v.y.atan2(v.x);
                nlo = nlo.min(t);
                nhi = nhi.max(t);
            }
        }
        if nhi - nlo >= hi - lo {
            break;
        }
        lo = nlo;
        hi = nhi;
    }
    let pad = 1e-12;
    let (lo, hi) = ((lo - pad).max(0.0), (hi + pad).min(FRAC_PI_2));
    if hi - lo >= FRAC_PI_2 {
        return None;
    }
    Some([Vec2::from_angle(lo), Vec2::from_angle(hi)])
}

fn is_conformal(m: &Mat2) -> bool {
    let scale = m.max_abs() * m.max_abs();
    let p = m.a * m.a + m.c * m.c;
    let r = m.b * m.b + m.d * m.d;
    let q = m.a * m.b + m.c * m.d;
    (p - r).abs() <= 1e-14 * scale && q.abs() <= 1e-14 * scale
}

/// True when `φᵗ` is exactly multiplicative on all products: every linear
/// part is conformal, or every linear part is diagonal with the same
/// dominant coordinate.
pub fn exactly_multiplicative(sys: &IfsSystem) -> bool {
    let ms: Vec<&Mat2> = sys.maps().iter().map(|m| &m.linear).collect();
    if ms.iter().all(|m| is_conformal(m)) {
        return true;
    }
    if ms.iter().all(|m| m.b == 0.0 && m.c == 0.0) {
        return ms.iter().all(|m| m.a.abs() >= m.d.abs()) || ms.iter().all(|m| m.a.abs() <= m.d.abs());
    }
    false
}

/// The X1 intervals `[wᵢ/uᵢ, zᵢ/vᵢ]` (normalized to `[min, max]`).
#[derive(Clone, Debug, Serialize)]
pub struct X1Report {
    pub intervals: Vec<(f64, f64)>,
    pub disjoint: bool,
    pub overlapping_pair: Option<(usize, usize)>,
}

/// Compute the X1 intervals and test strict pairwise disjointness.
pub fn check_x1(sys: &IfsSystem) -> Result<X1Report> {
    let mut intervals = Vec::with_capacity(sys.kappa());
    for (i, m) in sys.maps().iter().enumerate() {
        let a = sign_normalized(&m.linear).ok_or_else(|| {
            Error::hypothesis(format!("map {} does not have strictly positive entries", i + 1))
        })?;
        let (p, q) = (a.c / a.a, a.d / a.b);
        intervals.push((p.min(q), p.max(q)));
    }
    let overlapping_pair = first_overlap(&intervals);
    Ok(X1Report { disjoint: overlapping_pair.is_none(), intervals, overlapping_pair })
}

/// First pair of closed intervals that intersect.
fn first_overlap(iv: &[(f64, f64)]) -> Option<(usize, usize)> {
    for i in 0..iv.len() {
        for j in i + 1..iv.len() {
            if iv[i].0 <= iv[j].1 && iv[j].0 <= iv[i].1 {
                return Some((i, j));
            }
        }
    }
    None
}

/// Outcome of one condition with a human-readable witness.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub holds: bool,
    pub witness: String,
}

fn image_deviations(cone: &Cone, m: &Mat2) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in cone.boundary_rays() {
        let d = cone.signed_deviation(m.mul_vec(r));
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (lo, hi)
}

fn check_invariance(sys: &IfsSystem, cone: &Cone, transpose: bool) -> Check {
    let half = 0.5 * cone.beta;
    let mut worst = (0usize, 0.0f64);
    for (i, m) in sys.maps().iter().enumerate() {
        let a = if transpose { m.linear.transpose() } else { m.linear };
        let (lo, hi) = image_deviations(cone, &a);
        let d = lo.abs().max(hi.abs());
        if d > worst.1 {
            worst = (i, d);
        }
    }
    let label = if transpose { "A^T" } else { "A" };
    Check {
        holds: worst.1 < half,
        witness: format!(
            "max deviation of {label}-images of the cone boundary: {:.6e} rad (map {}), half-aperture {:.6e} rad",
            worst.1,
            worst.0 + 1,
            half
        ),
    }
}

fn check_separation(sys: &IfsSystem, cone: &Cone) -> Check {
    let iv: Vec<(f64, f64)> = sys.maps().iter().map(|m| image_deviations(cone, &m.linear)).collect();
    match first_overlap(&iv) {
        None => Check { holds: true, witness: "cone images are pairwise disjoint".into() },
        Some((i, j)) => Check {
            holds: false,
            witness: format!(
                "images of maps {} and {} overlap: [{:.6}, {:.6}] vs [{:.6}, {:.6}] rad",
                i + 1,
                j + 1,
                iv[i].0,
                iv[i].1,
                iv[j].0,
                iv[j].1
            ),
        },
    }
}

/// A certified reason why no cone can satisfy the cone conditions: a map
/// with eigenvalues of equal modulus maps no closed cone into its
/// interior, and proportional linear parts have equal cone images.
pub fn k1_obstruction(sys: &IfsSystem) -> Option<String> {
    for (i, m) in sys.maps().iter().enumerate() {
        match m.linear.real_eigenvalues() {
            None => return Some(format!("map {} has non-real eigenvalues", i + 1)),
            Some((l1, l2)) if l1.abs() - l2.abs() <= 1e-12 * l1.abs() => {
                return Some(format!("map {} has eigenvalues of equal modulus ({l1}, {l2})", i + 1))
            }
            _ => {}
        }
    }
    let unit = |m: &Mat2| {
        let e = m.entries();
        let n = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        e.map(|v| v / n)
    };
    for i in 0..sys.kappa() {
        for j in i + 1..sys.kappa() {
            let (u, v) = (unit(sys.linear(i)), unit(sys.linear(j)));
            let dm: f64 = u.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let dp: f64 = u.iter().zip(&v).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
            if dm.min(dp) <= 1e-12 {
                return Some(format!("maps {} and {} have proportional linear parts", i + 1, j + 1));
            }
        }
    }
    None
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

/// True when the open segments `(p1, p2)` and `(q1, q2)` cross at a single
/// interior point.
pub fn segments_cross(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let scale = [p1, p2, q1, q2].iter().map(|v| v.x.abs().max(v.y.abs())).fold(1e-300, f64::max);
    let eps = ORIENT_EPS * scale * scale;
    let o1 = orient(p1, p2, q1);
    let o2 = orient(p1, p2, q2);
    let o3 = orient(q1, q2, p1);
    let o4 = orient(q1, q2, p2);
    if [o1, o2, o3, o4].iter().any(|o| o.abs() <= eps) {
        return false;
    }
    (o1 > 0.0) != (o2 > 0.0) && (o3 > 0.0) != (o4 > 0.0)
}

/// Irreducibility of a 0/1 matrix via positivity of `(Id + M)^{κ−1}`.
pub fn irreducible(m: &[Vec<u8>]) -> bool {
    let k = m.len();
    let base: Vec<Vec<bool>> =
        (0..k).map(|i| (0..k).map(|j| i == j || m[i][j] != 0).collect()).collect();
    let mut acc = base.clone();
    for _ in 1..k.max(1) {
        let mut next = vec![vec![false; k]; k];
        for i in 0..k {
            for l in 0..k {
                if acc[i][l] {
                    for j in 0..k {
                        next[i][j] |= base[l][j];
                    }
                }
            }
        }
        acc = next;
    }
    acc.iter().all(|r| r.iter().all(|&b| b))
}

/// Segment-crossing adjacency of the endpoints `xᵢ = π(i1^∞)`, `yᵢ = π(iκ^∞)`.
#[derive(Clone, Debug, Serialize)]
pub struct Corollary54Report {
    pub endpoints: Vec<(Vec2, Vec2)>,
    pub adjacency: Vec<Vec<u8>>,
    pub irreducible: bool,
    /// Minimum width of the hull of a rendered sample of E; a lower bound
    /// for every projection length of conv(E).
    pub rho_witness: Option<f64>,
    pub verdict: bool,
}

pub fn check_corollary54(sys: &IfsSystem) -> Corollary54Report {
    let k = sys.kappa();
    let endpoints: Vec<(Vec2, Vec2)> = (0..k).map(|i| word_endpoints(sys, i)).collect();
    let mut adjacency = vec![vec![0u8; k]; k];
    for i in 0..k {
        for j in 0..k {
            if i != j {
                let ((a, b), (c, d)) = (endpoints[i], endpoints[j]);
                adjacency[i][j] = segments_cross(a, b, c, d) as u8;
            }
        }
    }
    let irr = irreducible(&adjacency);
    let rho_witness = irr.then(|| {
        let pts = chaos_game(sys, WITNESS_POINTS, WITNESS_SEED);
        hull_min_width(&convex_hull(&pts))
    });
    let verdict = irr && rho_witness.map_or(false, |r| r > 0.0);
    Corollary54Report { endpoints, adjacency, irreducible: irr, rho_witness, verdict }
}

/// The chain `xᵢ ≺ xᵢ₊₁ ≺ yᵢ ≺ yᵢ₊₁`.
#[derive(Clone, Debug, Serialize)]
pub struct Lemma55Report {
    pub endpoints: Vec<(Vec2, Vec2)>,
    pub verdict: bool,
    pub first_violation: Option<String>,
    /// `(y_κ − x₁)·e` for `e = (1,1)/√2`.
    pub interval_length: Option<f64>,
}

fn precedes(a: Vec2, b: Vec2) -> bool {
    b.x - a.x > 0.0 && b.y - a.y > 0.0
}

pub fn check_lemma55(sys: &IfsSystem) -> Result<Lemma55Report> {
    if let Some(i) = sys.maps().iter().position(|m| !m.linear.is_positive()) {
        return Err(Error::hypothesis(format!("map {} does not have strictly positive entries", i + 1)));
    }
    let k = sys.kappa();
    let endpoints: Vec<(Vec2, Vec2)> = (0..k).map(|i| word_endpoints(sys, i)).collect();
    let mut first_violation = None;
    'outer: for i in 0..k - 1 {
        let (xi, yi) = endpoints[i];
        let (xn, yn) = endpoints[i + 1];
        let chain = [(xi, xn, "x", i, "x", i + 1), (xn, yi, "x", i + 1, "y", i), (yi, yn, "y", i, "y", i + 1)];
        for (a, b, na, ia, nb, ib) in chain {
            if !precedes(a, b) {
                first_violation = Some(format!("{na}{} ⊀ {nb}{}", ia + 1, ib + 1));
                break 'outer;
            }
        }
    }
    let verdict = first_violation.is_none();
    let e = Vec2::new(1.0, 1.0).normalized();
    let interval_length = verdict.then(|| (endpoints[k - 1].1 - endpoints[0].0).dot(e));
    Ok(Lemma55Report { endpoints, verdict, first_violation, interval_length })
}

/// The two test matrices of the pair criterion with `B₂ = (Id − A₂)⁻¹`.
#[derive(Clone, Debug, Serialize)]
pub struct Lemma63Report {
    pub a1b2_minus_id: Mat2,
    pub id_minus_a1_b2: Mat2,
    /// Smallest entry over both test matrices.
    pub margin: f64,
    pub positive_inputs: bool,
    pub x1_disjoint: bool,
    pub verdict: bool,
}

pub fn check_lemma63(a1: &Mat2, a2: &Mat2) -> Result<Lemma63Report> {
    for (k, m) in [a1, a2].iter().enumerate() {
        let s = svd2(m).map_err(|_| Error::hypothesis(format!("matrix {} is singular", k + 1)))?;
        if s.alpha1 >= 1.0 {
            return Err(Error::hypothesis(format!("matrix {} is not contractive", k + 1)));
        }
    }
    let b2 = (Mat2::IDENTITY - *a2).inverse()?;
    let t1 = *a1 * b2 - Mat2::IDENTITY;
    let t2 = (Mat2::IDENTITY - *a1) * b2;
    let margin = t1.entries().iter().chain(t2.entries().iter()).cloned().fold(f64::INFINITY, f64::min);
    let positive_inputs = a1.is_positive() && a2.is_positive();
    let x1_disjoint = positive_inputs && {
        let iv = |m: &Mat2| {
            let (p, q) = (m.c / m.a, m.d / m.b);
            (p.min(q), p.max(q))
        };
        first_overlap(&[iv(a1), iv(a2)]).is_none()
    };
    Ok(Lemma63Report {
        a1b2_minus_id: t1,
        id_minus_a1_b2: t2,
        margin,
        positive_inputs,
        x1_disjoint,
        verdict: positive_inputs && x1_disjoint && margin > 0.0,
    })
}

/// Adjacency of rendered cylinder hulls.
#[derive(Clone, Debug, Serialize)]
pub struct Prop53Report {
    pub adjacency: Vec<Vec<u8>>,
    pub irreducible: bool,
    pub verdict: bool,
    pub approximate: bool,
    pub points: usize,
    pub seed: u64,
}

/// Hulls of `fᵢ(cloud)` for a rendered cloud of E are inner approximations
/// of `conv(Eᵢ)`; a detected intersection is therefore certified.
pub fn check_prop53_empirical(sys: &IfsSystem, render_budget: usize) -> Prop53Report {
    let pts = chaos_game(sys, render_budget.max(16), WITNESS_SEED);
    let hulls: Vec<Vec<Vec2>> = sys
        .maps()
        .iter()
        .map(|m| convex_hull(&pts.iter().map(|&p| m.apply(p)).collect::<Vec<_>>()))
        .collect();
    let k = sys.kappa();
    let mut adjacency = vec![vec![0u8; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let hit = hulls_intersect(&hulls[i], &hulls[j]) as u8;
            adjacency[i][j] = hit;
            adjacency[j][i] = hit;
        }
    }
    let irr = irreducible(&adjacency);
    let width = hull_min_width(&convex_hull(&pts));
    Prop53Report {
        adjacency,
        irreducible: irr,
        verdict: irr && width > 0.0,
        approximate: true,
        points: pts.len(),
        seed: WITNESS_SEED,
    }
}

/// Exact projective contraction factor `|ad−bc| / (ad+bc+2√(abcd))` of a
/// one-signed matrix.
pub fn projective_factor(m: &Mat2) -> Result<f64> {
    let a = sign_normalized(m).ok_or_else(|| Error::hypothesis("matrix entries are not strictly one-signed"))?;
    let (ad, bc) = (a.a * a.d, a.b * a.c);
    Ok((ad - bc).abs() / (ad + bc + 2.0 * (ad * bc).sqrt()))
}

#[derive(Clone, Debug, Serialize)]
pub struct ContractionReport {
    pub factors: Vec<f64>,
    pub eta: f64,
    /// Metric-equivalence constant `4/cos²β` of the verified cone.
    pub c0: Option<f64>,
    pub beta: Option<f64>,
}

pub fn projective_contraction(sys: &IfsSystem) -> Result<ContractionReport> {
    let factors = sys
        .maps()
        .iter()
        .enumerate()
        .map(|(i, m)| projective_factor(&m.linear).map_err(|_| Error::hypothesis(format!("map {}: entries not one-signed", i + 1))))
        .collect::<Result<Vec<_>>>()?;
    let eta = factors.iter().cloned().fold(0.0, f64::max);
    let cone = find_invariant_cone(sys).ok();
    Ok(ContractionReport {
        factors,
        eta,
        c0: cone.map(|c| 4.0 / c.beta.cos().powi(2)),
        beta: cone.map(|c| c.beta),
    })
}

/// One projection-condition attempt.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "criterion", rename_all = "kebab-case")]
pub enum ProjectionEvidence {
    #[serde(rename = "hull-adjacency")]
    Corollary54 { subset: Vec<usize>, report: Corollary54Report },
    #[serde(rename = "endpoint-chain")]
    Lemma55 { subset: Vec<usize>, report: Lemma55Report },
    #[serde(rename = "fixed-point-order")]
    Lemma63 { pair: (usize, usize), reflected: bool, report: Lemma63Report },
    #[serde(rename = "empirical-hulls")]
    Empirical53 { report: Prop53Report },
}

impl ProjectionEvidence {
    /// True when the criterion certifies the projection condition.
    pub fn certifies(&self) -> bool {
        match self {
            ProjectionEvidence::Corollary54 { report, .. } => report.verdict,
            ProjectionEvidence::Lemma55 { report, .. } => report.verdict,
            ProjectionEvidence::Lemma63 { report, .. } => report.verdict,
            ProjectionEvidence::Empirical53 { .. } => false,
        }
    }

    pub fn describe(&self) -> String {
        let one_based = |v: &[usize]| v.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(",");
        match self {
            ProjectionEvidence::Corollary54 { subset, .. } => format!("hull adjacency on J={{{}}}", one_based(subset)),
            ProjectionEvidence::Lemma55 { subset, .. } => format!("endpoint chain on J=({})", one_based(subset)),
            ProjectionEvidence::Lemma63 { pair, reflected, .. } => format!(
                "fixed-point order on pair ({},{}){}",
                pair.0 + 1,
                pair.1 + 1,
                if *reflected { " after reflection" } else { "" }
            ),
            ProjectionEvidence::Empirical53 { .. } => "empirical hull adjacency".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Yes,
    No,
    Unknown,
}

#[derive(Clone, Debug, Serialize)]
pub struct KakeyaReport {
    pub cone: Option<Cone>,
    pub cone_failure: Option<ConeFailure>,
    pub k1a: Check,
    pub k1b: Check,
    pub k1c: Check,
    pub x1: Option<X1Report>,
    pub obstruction: Option<String>,
    pub projection: Vec<ProjectionEvidence>,
    pub certified_by: Option<String>,
    pub verdict: Verdict,
}

/// Fixed-point order test on maps `(i, j)`: conjugate so that map `i`
/// fixes the origin, then require the translation of map `j` in `±Q₂`.
fn lemma63_on_pair(sys: &IfsSystem, i: usize, j: usize) -> Option<ProjectionEvidence> {
    let p = sys.fixed_point(i);
    let aj = sys.map(j).apply(p) - p;
    let reflected = if aj.x > 0.0 && aj.y > 0.0 {
        false
    } else if aj.x < 0.0 && aj.y < 0.0 {
        true
    } else {
        return None;
    };
    let report = check_lemma63(sys.linear(i), sys.linear(j)).ok()?;
    Some(ProjectionEvidence::Lemma63 { pair: (i, j), reflected, report })
}

/// Run every check and combine them into a verdict.
pub fn full_report(sys: &IfsSystem) -> KakeyaReport {
    let k = sys.kappa();
    let cone_result = find_invariant_cone(sys);
    let (cone, cone_failure) = match &cone_result {
        Ok(c) => (Some(*c), None),
        Err(f) => (None, Some(f.clone())),
    };
    let failed = |what: &str| Check {
        holds: false,
        witness: match &cone_failure {
            Some(f) => format!(
                "no cone: map {} {}{}",
                f.map_index + 1,
                f.reason,
                f.entry.map(|(r, c)| format!(" at ({}, {})", r + 1, c + 1)).unwrap_or_default()
            ),
            None => format!("{what} not checked"),
        },
    };
    let (k1a, k1b, k1c) = match &cone {
        Some(c) => (check_invariance(sys, c, false), check_invariance(sys, c, true), check_separation(sys, c)),
        None => (failed("K1a"), failed("K1b"), failed("K1c")),
    };
    let x1 = check_x1(sys).ok();
    let obstruction = k1_obstruction(sys);

    let mut projection = Vec::new();
    let all: Vec<usize> = (0..k).collect();
    for i in 0..k {
        for j in 0..k {
            if i != j {
                projection.extend(lemma63_on_pair(sys, i, j));
            }
        }
    }
    projection.push(ProjectionEvidence::Corollary54 { subset: all.clone(), report: check_corollary54(sys) });
    if let Ok(r) = check_lemma55(sys) {
        projection.push(ProjectionEvidence::Lemma55 { subset: all.clone(), report: r });
    }
    for i in 0..k {
        for j in i + 1..k {
            let pairs: Vec<Vec<usize>> =
                if k == 2 { vec![vec![j, i]] } else { vec![vec![i, j], vec![j, i]] };
            if k > 2 {
                if let Ok(sub) = sys.subsystem(&[i, j]) {
                    projection.push(ProjectionEvidence::Corollary54 { subset: vec![i, j], report: check_corollary54(&sub) });
                }
            }
            for order in pairs {
                if let Ok(sub) = sys.subsystem(&order) {
                    if let Ok(r) = check_lemma55(&sub) {
                        projection.push(ProjectionEvidence::Lemma55 { subset: order, report: r });
                    }
                }
            }
        }
    }
    projection.push(ProjectionEvidence::Empirical53 { report: check_prop53_empirical(sys, WITNESS_POINTS) });

    let k1 = k1a.holds && k1b.holds && k1c.holds;
    let certified_by = if k1 { projection.iter().find(|p| p.certifies()).map(|p| p.describe()) } else { None };
    let verdict = if certified_by.is_some() {
        Verdict::Yes
    } else if obstruction.is_some() {
        Verdict::No
    } else {
        Verdict::Unknown
    };
    KakeyaReport { cone, cone_failure, k1a, k1b, k1c, x1, obstruction, projection, certified_by, verdict }
}
