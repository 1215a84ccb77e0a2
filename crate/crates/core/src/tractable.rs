//! Affine systems in dimension `d ≤ 8` whose linear parts preserve the
//! cone `Q_d ∪ −Q_d`: cone entry of iterates, empirical comparability of
//! cylinder diameters with `α₁`, and a finite-scale ball-condition checker.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ifs::{IfsSystem, Word};

pub type MatD = DMatrix<f64>;
pub type VecD = DVector<f64>;

pub const MAX_DIM: usize = 8;
pub const ENTRY_MARGIN: f64 = 1e-12;
pub const ENTRY_CAP: usize = 10_000;
const HYPERPLANE_TOL: f64 = 1e-9;
const RANK_TOL: f64 = 1e-6;
const TAIL_STEPS: usize = 32;
const CLOUD_POINTS: usize = 4096;
const EXTREME_DIRECTIONS: usize = 64;

/// Config form of a `d`-dimensional map.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AffineMapDoc {
    #[serde(rename = "A")]
    pub linear: Vec<Vec<f64>>,
    #[serde(rename = "t")]
    pub translation: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConfigDocD {
    pub maps: Vec<AffineMapDoc>,
}

/// A validated affine IFS in `ℝ^d`.
#[derive(Clone, Debug)]
pub struct IfsSystemD {
    dim: usize,
    linear: Vec<MatD>,
    translation: Vec<VecD>,
    alpha1: Vec<f64>,
}

fn norm2(m: &MatD) -> f64 {
    m.singular_values().max()
}

impl IfsSystemD {
    pub fn new(linear: Vec<MatD>, translation: Vec<VecD>) -> Result<Self> {
        let invalid = |index, reason: String| Error::Validation { index, reason };
        if linear.len() < 2 || linear.len() != translation.len() {
            return Err(invalid(None, "need at least two maps with one translation each".into()));
        }
        let dim = linear[0].nrows();
        if dim == 0 || dim > MAX_DIM {
            return Err(invalid(None, format!("dimension {dim} outside 1..={MAX_DIM}")));
        }
        let mut alpha1 = Vec::with_capacity(linear.len());
        for (i, (a, t)) in linear.iter().zip(&translation).enumerate() {
            if a.nrows() != dim || a.ncols() != dim || t.len() != dim {
                return Err(invalid(Some(i), format!("expected a {dim}x{dim} matrix and {dim}-vector")));
            }
            if a.iter().chain(t.iter()).any(|v| !v.is_finite()) {
                return Err(invalid(Some(i), "non-finite entry".into()));
            }
            if a.determinant().abs() < 1e-300 {
                return Err(invalid(Some(i), "linear part is singular".into()));
            }
            let n = norm2(a);
            if n >= 1.0 - 1e-9 {
                return Err(invalid(Some(i), format!("linear part is not contractive (norm {n})")));
            }
            alpha1.push(n);
        }
        Ok(Self { dim, linear, translation, alpha1 })
    }

    pub fn from_doc(doc: &ConfigDocD) -> Result<Self> {
        let mut linear = Vec::new();
        let mut translation = Vec::new();
        for (i, m) in doc.maps.iter().enumerate() {
            let d = m.linear.len();
            if m.linear.iter().any(|row| row.len() != d) {
                return Err(Error::Validation { index: Some(i), reason: "matrix is not square".into() });
            }
            let flat: Vec<f64> = m.linear.iter().flatten().copied().collect();
            linear.push(MatD::from_row_slice(d, d, &flat));
            translation.push(VecD::from_column_slice(&m.translation));
        }
        Self::new(linear, translation)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kappa(&self) -> usize {
        self.linear.len()
    }

    pub fn linear(&self, i: usize) -> &MatD {
        &self.linear[i]
    }

    pub fn translation(&self, i: usize) -> &VecD {
        &self.translation[i]
    }

    pub fn apply(&self, i: usize, x: &VecD) -> VecD {
        &self.linear[i] * x + &self.translation[i]
    }

    pub fn fixed_point(&self, i: usize) -> VecD {
        let m = MatD::identity(self.dim, self.dim) - &self.linear[i];
        m.lu().solve(&self.translation[i]).expect("Id - A is invertible for a contraction")
    }

    /// Chaos-game orbit with uniform map selection after a 100-step burn-in.
    pub fn chaos_game(&self, count: usize, seed: u64) -> Vec<VecD> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = self.fixed_point(0);
        for _ in 0..100 {
            x = self.apply(rng.gen_range(0..self.kappa()), &x);
        }
        (0..count)
            .map(|_| {
                x = self.apply(rng.gen_range(0..self.kappa()), &x);
                x.clone()
            })
            .collect()
    }

    /// A ball mapped into itself by every map.
    pub fn enclosing_ball(&self) -> (VecD, f64) {
        let k = self.kappa();
        let c = (0..k).fold(VecD::zeros(self.dim), |acc, i| acc + self.fixed_point(i)) / k as f64;
        let r = (0..k)
            .map(|i| (self.apply(i, &c) - &c).norm() / (1.0 - self.alpha1[i]))
            .fold(0.0, f64::max);
        (c, r)
    }

    /// Whether every linear part has entries of one strict sign, which maps
    /// the closure of `Q_d ∪ −Q_d` into `Q_d ∪ −Q_d`.
    pub fn preserves_orthant_cone(&self) -> bool {
        self.linear.iter().all(|a| strict_sign_entries(a).is_ok())
    }
}

impl From<&IfsSystem> for IfsSystemD {
    fn from(sys: &IfsSystem) -> Self {
        let linear = (0..sys.kappa())
            .map(|i| {
                let m = sys.linear(i);
                MatD::from_row_slice(2, 2, &[m.a, m.b, m.c, m.d])
            })
            .collect();
        let translation = (0..sys.kappa())
            .map(|i| {
                let t = sys.translation(i);
                VecD::from_column_slice(&[t.x, t.y])
            })
            .collect();
        IfsSystemD::new(linear, translation).expect("a valid planar system is valid in any dimension")
    }
}

/// Parse a configuration document of any dimension `d ≤ 8`.
pub fn load_system_d(document: &[u8]) -> Result<IfsSystemD> {
    let doc: ConfigDocD = serde_json::from_slice(document).map_err(|e| Error::Parse(e.to_string()))?;
    IfsSystemD::from_doc(&doc)
}

fn strict_sign_entries(a: &MatD) -> std::result::Result<(), (usize, usize)> {
    let positive = a[(0, 0)] > 0.0;
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            let v = a[(r, c)];
            if (positive && v <= 0.0) || (!positive && v >= 0.0) {
                return Err((r, c));
            }
        }
    }
    Ok(())
}

/// Signed distance of the direction of `x` from the boundary of
/// `Q_d ∪ −Q_d`: positive exactly when all coordinates share a strict sign.
pub fn orthant_margin(x: &VecD) -> f64 {
    let n = x.norm();
    if n == 0.0 {
        return 0.0;
    }
    x.min().max(-x.max()) / n
}

fn null_vector(m: &MatD) -> VecD {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let k = svd.singular_values.imin();
    let v: VecD = v_t.row(k).transpose();
    if v.sum() < 0.0 {
        -v
    } else {
        v
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConeEntryResult {
    /// Orthonormal basis of the invariant hyperplane `H` spanned by the
    /// non-Perron eigenvectors.
    pub hyperplane_basis: Vec<Vec<f64>>,
    pub n0: usize,
    /// `orthant_margin(Aⁿw)` for `n = 0, 1, …`.
    pub trajectory_margins: Vec<f64>,
    pub perron_value: f64,
    pub subdominant_modulus: f64,
    pub perron_vector: Vec<f64>,
    /// Coefficient of `w` along the unit Perron vector in `ℝ^d = ℝv ⊕ H`.
    pub perron_component: f64,
}

/// Iterate `w ↦ Aw` (renormalized) until it enters `Q_d ∪ −Q_d` with margin
/// [`ENTRY_MARGIN`], then record a further stretch of the trajectory.
pub fn cone_entry(a: &MatD, w: &VecD) -> Result<ConeEntryResult> {
    let d = a.nrows();
    if d < 2 || d > MAX_DIM || a.ncols() != d || w.len() != d {
        return Err(Error::hypothesis(format!("need a square matrix of size 2..={MAX_DIM} and a matching vector")));
    }
    if let Err((r, c)) = strict_sign_entries(a) {
        return Err(Error::hypothesis(format!(
            "entry ({}, {}) breaks the strict sign pattern, so the cone is not certified invariant",
            r + 1,
            c + 1
        )));
    }
    let eig = a.complex_eigenvalues();
    let mut moduli: Vec<(f64, usize)> = eig.iter().enumerate().map(|(k, z)| (z.norm(), k)).collect();
    moduli.sort_by(|x, y| y.0.total_cmp(&x.0));
    let lead = eig[moduli[0].1];
    let lambda1 = lead.re;
    let sub = moduli[1].0;
    if lead.im.abs() > 1e-12 * lead.norm() || !(lambda1.abs() > sub * (1.0 + 1e-12)) {
        return Err(Error::hypothesis("the dominant eigenvalue is not simple and real"));
    }
    let id = MatD::identity(d, d);
    let v = null_vector(&(a - &id * lambda1));
    let u = null_vector(&(a.transpose() - &id * lambda1));
    if w.norm() == 0.0 || u.dot(w).abs() < HYPERPLANE_TOL * u.norm() * w.norm() {
        return Err(Error::NearHyperplane);
    }
    let perron_component = u.dot(w) / u.dot(&v);

    let un = u.normalize();
    let mut basis: Vec<VecD> = Vec::with_capacity(d - 1);
    for k in 0..d {
        let mut e = VecD::zeros(d);
        e[k] = 1.0;
        e -= &un * un.dot(&e);
        for b in &basis {
            e -= b * b.dot(&e);
        }
        let n = e.norm();
        if n > 1e-8 && basis.len() < d - 1 {
            basis.push(e / n);
        }
    }

    let mut x = w / w.norm();
    let mut margins = vec![orthant_margin(&x)];
    let mut entered = (margins[0] >= ENTRY_MARGIN).then_some(0);
    let mut n = 0;
    loop {
        match entered {
            Some(e) if n >= e + TAIL_STEPS => break,
            None if n >= ENTRY_CAP => return Err(Error::NoEntry { iterations: ENTRY_CAP }),
            _ => {}
        }
        x = a * &x;
        x /= x.norm();
        n += 1;
        let m = orthant_margin(&x);
        margins.push(m);
        if entered.is_none() && m >= ENTRY_MARGIN {
            entered = Some(n);
        }
    }
    Ok(ConeEntryResult {
        hyperplane_basis: basis.iter().map(|b| b.iter().copied().collect()).collect(),
        n0: entered.unwrap_or(0),
        trajectory_margins: margins,
        perron_value: lambda1,
        subdominant_modulus: sub,
        perron_vector: v.iter().copied().collect(),
        perron_component,
    })
}

/// Points of `E` used to measure cylinder diameters: the extremes of a
/// rendered cloud in a fixed set of directions.
struct Probe {
    points: Vec<VecD>,
    differences: Vec<VecD>,
    centroid: VecD,
    cloud: Vec<VecD>,
}

impl Probe {
    fn new(sys: &IfsSystemD, seed: u64) -> Self {
        let cloud = sys.chaos_game(CLOUD_POINTS, seed);
        let d = sys.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut dirs: Vec<VecD> = Vec::new();
        for k in 0..d {
            let mut e = VecD::zeros(d);
            e[k] = 1.0;
            dirs.push(e.clone());
            dirs.push(-e);
        }
        while dirs.len() < EXTREME_DIRECTIONS {
            let g = VecD::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
            if g.norm() > 1e-3 {
                dirs.push(g.normalize());
            }
        }
        let mut idx: Vec<usize> = dirs
            .iter()
            .map(|u| {
                (0..cloud.len()).max_by(|&i, &j| cloud[i].dot(u).total_cmp(&cloud[j].dot(u))).unwrap()
            })
            .collect();
        idx.sort_unstable();
        idx.dedup();
        let points: Vec<VecD> = idx.iter().map(|&i| cloud[i].clone()).collect();
        let mut differences = Vec::new();
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                differences.push(&points[j] - &points[i]);
            }
        }
        let centroid = points.iter().fold(VecD::zeros(d), |acc, p| acc + p) / points.len() as f64;
        Self { points, differences, centroid, cloud }
    }

    /// Inner estimate of `diam(A E)`.
    fn diameter(&self, a: &MatD) -> f64 {
        self.differences.iter().map(|v| (a * v).norm()).fold(0.0, f64::max)
    }
}

/// Affine rank check: `E` must not lie in a hyperplane.
fn check_affine_rank(cloud: &[VecD], d: usize) -> Result<f64> {
    let n = cloud.len() as f64;
    let mean = cloud.iter().fold(VecD::zeros(d), |acc, p| acc + p) / n;
    let m = MatD::from_fn(cloud.len(), d, |r, c| cloud[r][c] - mean[c]);
    let s = m.singular_values();
    let (hi, lo) = (s.max(), s.min());
    if !(hi > 0.0) || lo < RANK_TOL * hi {
        return Err(Error::hypothesis("the rendered attractor lies in a hyperplane"));
    }
    Ok(lo / hi)
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelRatios {
    pub level: usize,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DiameterComparability {
    pub max_level: usize,
    pub words: u64,
    /// `min diam(E_𝚒)/α₁(A_𝚒)` over all tested words.
    pub c_low: f64,
    /// `max diam(E_𝚒)/α₁(A_𝚒)` over all tested words.
    pub c_high: f64,
    pub band: f64,
    pub per_level: Vec<LevelRatios>,
    pub cone_condition: bool,
    pub rank_ratio: f64,
}

/// Ratios `diam(E_𝚒)/α₁(A_𝚒)` over all words of length `1..=max_level`,
/// with diameters measured on a rendered cloud.
pub fn diameter_comparability(sys: &IfsSystemD, max_level: usize, budget: u64) -> Result<DiameterComparability> {
    let k = sys.kappa() as u128;
    let total: u128 = (1..=max_level as u32).map(|n| k.pow(n)).sum();
    if total > budget as u128 {
        return Err(Error::BudgetExceeded { budget, requested: total });
    }
    let probe = Probe::new(sys, 0);
    let rank_ratio = check_affine_rank(&probe.cloud, sys.dim())?;
    let mut per_level: Vec<LevelRatios> =
        (1..=max_level).map(|level| LevelRatios { level, min: f64::INFINITY, max: 0.0 }).collect();
    let mut stack: Vec<(MatD, usize)> = vec![(MatD::identity(sys.dim(), sys.dim()), 0)];
    while let Some((m, len)) = stack.pop() {
        if len > 0 {
            let ratio = probe.diameter(&m) / norm2(&m);
            let l = &mut per_level[len - 1];
            l.min = l.min.min(ratio);
            l.max = l.max.max(ratio);
        }
        if len < max_level {
            for i in 0..sys.kappa() {
                stack.push((&m * sys.linear(i), len + 1));
            }
        }
    }
    let c_low = per_level.iter().map(|l| l.min).fold(f64::INFINITY, f64::min);
    let c_high = per_level.iter().map(|l| l.max).fold(0.0, f64::max);
    Ok(DiameterComparability {
        max_level,
        words: total as u64,
        c_low,
        c_high,
        band: c_high / c_low,
        per_level,
        cone_condition: sys.preserves_orthant_cone(),
        rank_ratio,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BallWitness {
    pub sample: usize,
    pub x: Vec<f64>,
    pub r: f64,
    pub words: Vec<Word>,
    pub centers: Vec<Vec<f64>>,
    /// `min |x_𝚒 − x_𝚓| − 2·δ·r` over pairs.
    pub separation_margin: f64,
    /// Largest `δ′ ≤ 1` for which the balls `B(x_𝚒, δ′r)` are disjoint.
    pub delta_prime: f64,
    pub closest_pair: Option<(Word, Word)>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BallConditionReport {
    pub t: f64,
    pub delta: f64,
    pub scales: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub cylinders_visited: u64,
    pub witnesses: Vec<BallWitness>,
    pub min_delta_prime: f64,
    pub pass: bool,
}

struct Node {
    word: Vec<usize>,
    product: MatD,
    offset: VecD,
}

/// `Z(x, r)` under the diameter stopping rule, with `diam(E_∅)` taken as
/// infinite so every member has length at least one.
fn local_stopping_set(
    sys: &IfsSystemD,
    probe: &Probe,
    ball: &(VecD, f64),
    x: &VecD,
    r: f64,
    budget: u64,
    visited: &mut u64,
) -> Result<Vec<Node>> {
    let d = sys.dim();
    let mut out = Vec::new();
    let mut stack = vec![Node { word: Vec::new(), product: MatD::identity(d, d), offset: VecD::zeros(d) }];
    while let Some(node) = stack.pop() {
        for i in (0..sys.kappa()).rev() {
            *visited += 1;
            if *visited > budget {
                return Err(Error::BudgetExceeded { budget, requested: *visited as u128 });
            }
            let product = &node.product * sys.linear(i);
            let offset = &node.product * sys.translation(i) + &node.offset;
            let center = &product * &ball.0 + &offset;
            if (x - &center).norm() > r + norm2(&product) * ball.1 {
                continue;
            }
            let mut word = node.word.clone();
            word.push(i);
            let child = Node { word, product, offset };
            if probe.diameter(&child.product) <= r {
                let meets = probe.cloud.iter().step_by(8).chain(&probe.points).any(|p| {
                    (&child.product * p + &child.offset - x).norm() <= r
                });
                if meets {
                    out.push(child);
                }
            } else {
                stack.push(child);
            }
        }
    }
    out.sort_by(|a, b| a.word.cmp(&b.word));
    Ok(out)
}

fn min_pair(centers: &[VecD]) -> Option<(f64, usize, usize)> {
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            let dist = (&centers[i] - &centers[j]).norm();
            if best.map_or(true, |b| dist < b.0) {
                best = Some((dist, i, j));
            }
        }
    }
    best
}

/// Centroid centers, then repeated farthest-point moves for the members of
/// the closest pair while they increase the minimum separation.
fn choose_centers(probe: &Probe, nodes: &[Node]) -> Vec<VecD> {
    let mut centers: Vec<VecD> = nodes.iter().map(|n| &n.product * &probe.centroid + &n.offset).collect();
    for _ in 0..16 {
        let Some((current, i, j)) = min_pair(&centers) else { break };
        let mut improved = false;
        for &k in &[i, j] {
            let nearest = |c: &VecD| {
                centers
                    .iter()
                    .enumerate()
                    .filter(|&(m, _)| m != k)
                    .map(|(_, o)| (c - o).norm())
                    .fold(f64::INFINITY, f64::min)
            };
            let best = probe
                .points
                .iter()
                .map(|p| &nodes[k].product * p + &nodes[k].offset)
                .map(|c| (nearest(&c), c))
                .max_by(|a, b| a.0.total_cmp(&b.0));
            if let Some((dist, c)) = best {
                if dist > current * (1.0 + 1e-12) {
                    centers[k] = c;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            break;
        }
    }
    centers
}

/// Finite-scale check of the ball condition at `samples` chaos-game points
/// of `E`. A pass is evidence only; a failure refers to the chosen centers.
pub fn ball_condition_check(
    sys: &IfsSystemD,
    t: f64,
    delta: f64,
    scales: &[f64],
    samples: usize,
    seed: u64,
    budget: u64,
) -> Result<BallConditionReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::hypothesis("delta must lie in (0, 1)"));
    }
    if scales.is_empty() || scales.iter().any(|r| !(*r > 0.0)) || scales.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::hypothesis("scales must be positive and strictly decreasing"));
    }
    let probe = Probe::new(sys, seed);
    let ball = sys.enclosing_ball();
    let xs = sys.chaos_game(samples, seed.wrapping_add(1));
    let per_sample: Vec<Result<(Vec<BallWitness>, u64)>> = xs
        .par_iter()
        .enumerate()
        .map(|(s, x)| {
            let mut visited = 0u64;
            let mut out = Vec::with_capacity(scales.len());
            for &r in scales {
                let nodes = local_stopping_set(sys, &probe, &ball, x, r, budget, &mut visited)?;
                let centers = choose_centers(&probe, &nodes);
                let pair = min_pair(&centers);
                let (delta_prime, margin, closest) = match pair {
                    Some((dist, i, j)) => (
                        (dist / (2.0 * r)).min(1.0),
                        dist - 2.0 * delta * r,
                        Some((Word(nodes[i].word.clone()), Word(nodes[j].word.clone()))),
                    ),
                    None => (1.0, f64::INFINITY, None),
                };
                out.push(BallWitness {
                    sample: s,
                    x: x.iter().copied().collect(),
                    r,
                    words: nodes.iter().map(|n| Word(n.word.clone())).collect(),
                    centers: centers.iter().map(|c| c.iter().copied().collect()).collect(),
                    separation_margin: if margin.is_finite() { margin } else { 2.0 * r },
                    delta_prime,
                    closest_pair: closest,
                    pass: delta_prime >= delta,
                });
            }
            Ok((out, visited))
        })
        .collect();
    let mut witnesses = Vec::new();
    let mut visited = 0u64;
    for r in per_sample {
        let (w, v) = r?;
        witnesses.extend(w);
        visited += v;
    }
    let min_delta_prime = witnesses.iter().map(|w| w.delta_prime).fold(1.0, f64::min);
    Ok(BallConditionReport {
        t,
        delta,
        scales: scales.to_vec(),
        samples,
        seed,
        cylinders_visited: visited,
        pass: witnesses.iter().all(|w| w.pass),
        witnesses,
        min_delta_prime,
    })
}
