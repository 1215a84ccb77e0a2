//! Affine IFS data model: maps, words, cylinders and level enumeration.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat2::{svd2, Mat2, ScaledMat2, SingularData, Vec2};
use crate::pressure::log_phi;

/// Default cap on the number of cylinders visited by one enumeration.
pub const DEFAULT_BUDGET: u64 = 1 << 26;

/// Minimum number of partitions used for parallel level folds.
const MIN_PARTITIONS: usize = 64;

const CONTRACTION_MARGIN: f64 = 1e-9;

/// One contractive invertible map `x ↦ linear·x + translation`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    #[serde(rename = "A")]
    pub linear: Mat2,
    #[serde(rename = "t")]
    pub translation: Vec2,
}

impl AffineMap {
    pub fn new(linear: Mat2, translation: Vec2) -> Self {
        Self { linear, translation }
    }

    pub fn apply(&self, x: Vec2) -> Vec2 {
        self.linear.mul_vec(x) + self.translation
    }

    /// The unique fixed point `(Id − A)⁻¹ a`.
    pub fn fixed_point(&self) -> Vec2 {
        let inv = (Mat2::IDENTITY - self.linear)
            .inverse()
            .expect("Id - A is invertible for a contraction");
        inv.mul_vec(self.translation)
    }
}

/// JSON configuration document.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConfigDoc {
    pub maps: Vec<AffineMap>,
}

/// A validated planar affine IFS.
#[derive(Clone, Debug, Serialize)]
pub struct IfsSystem {
    maps: Vec<AffineMap>,
    pub alpha_bar: f64,
    pub alpha_lower: f64,
    #[serde(skip)]
    singular: Vec<SingularData>,
    #[serde(skip)]
    log_abs_det: Vec<f64>,
}

impl IfsSystem {
    /// Validate and wrap a list of maps.
    pub fn new(maps: Vec<AffineMap>) -> Result<Self> {
        if maps.len() < 2 {
            return Err(Error::Validation {
                index: None,
                reason: format!("at least two maps are required, got {}", maps.len()),
            });
        }
        let mut singular = Vec::with_capacity(maps.len());
        let mut log_abs_det = Vec::with_capacity(maps.len());
        for (i, m) in maps.iter().enumerate() {
            if !m.linear.is_finite() || !m.translation.is_finite() {
                return Err(Error::Validation { index: Some(i), reason: "non-finite entry".into() });
            }
            let s = svd2(&m.linear).map_err(|_| Error::Validation {
                index: Some(i),
                reason: "linear part is singular".into(),
            })?;
            if s.alpha1 >= 1.0 - CONTRACTION_MARGIN {
                return Err(Error::Validation {
                    index: Some(i),
                    reason: format!("linear part is not contractive (norm {})", s.alpha1),
                });
            }
            log_abs_det.push(m.linear.det().abs().ln());
            singular.push(s);
        }
        let alpha_bar = singular.iter().map(|s| s.alpha1).fold(0.0, f64::max);
        let alpha_lower = singular.iter().map(|s| s.alpha2).fold(f64::INFINITY, f64::min);
        Ok(Self { maps, alpha_bar, alpha_lower, singular, log_abs_det })
    }

    pub fn from_parts(parts: &[(Mat2, Vec2)]) -> Result<Self> {
        Self::new(parts.iter().map(|&(a, t)| AffineMap::new(a, t)).collect())
    }

    pub fn kappa(&self) -> usize {
        self.maps.len()
    }

    pub fn maps(&self) -> &[AffineMap] {
        &self.maps
    }

    pub fn map(&self, i: usize) -> &AffineMap {
        &self.maps[i]
    }

    pub fn linear(&self, i: usize) -> &Mat2 {
        &self.maps[i].linear
    }

    pub fn translation(&self, i: usize) -> Vec2 {
        self.maps[i].translation
    }

    pub fn singular(&self, i: usize) -> &SingularData {
        &self.singular[i]
    }

    pub fn log_abs_det(&self, i: usize) -> f64 {
        self.log_abs_det[i]
    }

    pub fn fixed_point(&self, i: usize) -> Vec2 {
        self.maps[i].fixed_point()
    }

    /// The system restricted to the given map indices, in that order.
    pub fn subsystem(&self, idx: &[usize]) -> Result<IfsSystem> {
        IfsSystem::new(idx.iter().map(|&i| self.maps[i]).collect())
    }

    /// Same linear parts, translations replaced.
    pub fn with_translations(&self, ts: &[Vec2]) -> Result<IfsSystem> {
        IfsSystem::new(
            self.maps.iter().zip(ts).map(|(m, &t)| AffineMap::new(m.linear, t)).collect(),
        )
    }

    pub fn to_config(&self) -> ConfigDoc {
        ConfigDoc { maps: self.maps.clone() }
    }

    /// A ball `B(c, R)` mapped into itself by every map, hence containing E.
    pub fn enclosing_ball(&self) -> (Vec2, f64) {
        let k = self.kappa() as f64;
        let c = (0..self.kappa()).fold(Vec2::ZERO, |acc, i| acc + self.fixed_point(i)) * (1.0 / k);
        let r = (0..self.kappa())
            .map(|i| (self.maps[i].apply(c) - c).norm() / (1.0 - self.singular[i].alpha1))
            .fold(0.0, f64::max);
        (c, r)
    }

    /// Lipschitz constant `2·max|aᵢ|/(1−ᾱ)` of the coding map.
    pub fn pi_lipschitz(&self) -> f64 {
        let amax = self.maps.iter().map(|m| m.translation.norm()).fold(0.0, f64::max);
        2.0 * amax / (1.0 - self.alpha_bar)
    }

    fn check_index(&self, w: &Word) -> Result<()> {
        match w.0.iter().position(|&s| s >= self.kappa()) {
            Some(p) => Err(Error::Validation {
                index: None,
                reason: format!("word symbol {} at position {p} out of range", w.0[p]),
            }),
            None => Ok(()),
        }
    }
}

/// Parse and validate a JSON configuration document.
pub fn load_system(document: &[u8]) -> Result<IfsSystem> {
    let doc: ConfigDoc =
        serde_json::from_slice(document).map_err(|e| Error::Parse(e.to_string()))?;
    IfsSystem::new(doc.maps)
}

/// A finite word over the alphabet `{0, …, κ−1}`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    pub fn concat(&self, o: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&o.0);
        Word(v)
    }

    /// First `n` symbols.
    pub fn prefix(&self, n: usize) -> Word {
        Word(self.0[..n.min(self.len())].to_vec())
    }

    /// The word with its last symbol removed.
    pub fn parent(&self) -> Word {
        self.prefix(self.len().saturating_sub(1))
    }

    /// Longest common prefix.
    pub fn common_prefix(&self, o: &Word) -> Word {
        let n = self.0.iter().zip(&o.0).take_while(|(a, b)| a == b).count();
        self.prefix(n)
    }

    pub fn is_prefix_of(&self, o: &Word) -> bool {
        o.0.starts_with(&self.0)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "∅");
        }
        for (k, s) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", s + 1)?;
        }
        Ok(())
    }
}

/// The composed map of a cylinder: `x ↦ A_w x + a_w`.
#[derive(Clone, Debug, Serialize)]
pub struct Cylinder {
    pub word: Word,
    pub product: ScaledMat2,
    pub offset: Vec2,
    pub singular: SingularData,
}

impl Cylinder {
    pub fn apply(&self, x: Vec2) -> Vec2 {
        scaled_apply(&self.product, x) + self.offset
    }
}

#[inline]
fn scaled_apply(p: &ScaledMat2, v: Vec2) -> Vec2 {
    let s = 2f64.powi(p.exponent.clamp(-1100, 1100) as i32);
    p.mantissa.mul_vec(v) * s
}

/// The cylinder map of word `w`.
pub fn cylinder(sys: &IfsSystem, w: &Word) -> Result<Cylinder> {
    sys.check_index(w)?;
    let mut product = ScaledMat2::IDENTITY;
    let mut offset = Vec2::ZERO;
    for &s in w.symbols() {
        offset = offset + scaled_apply(&product, sys.translation(s));
        product = product.mul_mat(sys.linear(s), sys.log_abs_det(s));
    }
    Ok(Cylinder { word: w.clone(), singular: product.singular(), product, offset })
}

/// `(xᵢ, yᵢ) = (π(i1^∞), π(iκ^∞))`.
pub fn word_endpoints(sys: &IfsSystem, i: usize) -> (Vec2, Vec2) {
    let m = sys.map(i);
    (m.apply(sys.fixed_point(0)), m.apply(sys.fixed_point(sys.kappa() - 1)))
}

fn level_size(kappa: usize, n: usize) -> u128 {
    (kappa as u128).checked_pow(n as u32).unwrap_or(u128::MAX)
}

fn check_budget(kappa: usize, n: usize, budget: u64) -> Result<()> {
    let requested = level_size(kappa, n);
    if requested > budget as u128 {
        Err(Error::BudgetExceeded { budget, requested })
    } else {
        Ok(())
    }
}

/// One depth-first frame of the prefix-reuse walk.
#[derive(Clone, Copy)]
struct Frame {
    product: ScaledMat2,
    offset: Vec2,
}

/// Visit every extension of `prefix` to length `n` in lexicographic order,
/// one matrix multiply per visited node.
fn walk<F>(sys: &IfsSystem, prefix: &[usize], n: usize, f: &mut F)
where
    F: FnMut(&[usize], &ScaledMat2, Vec2),
{
    let mut top = Frame { product: ScaledMat2::IDENTITY, offset: Vec2::ZERO };
    for &s in prefix {
        top = Frame {
            offset: top.offset + scaled_apply(&top.product, sys.translation(s)),
            product: top.product.mul_mat(sys.linear(s), sys.log_abs_det(s)),
        };
    }
    let base = prefix.len();
    if base >= n {
        f(prefix, &top.product, top.offset);
        return;
    }
    let kappa = sys.kappa();
    let mut word: Vec<usize> = prefix.to_vec();
    word.resize(n, 0);
    let mut stack = vec![top; n - base + 1];
    let mut depth = base;
    word[depth] = 0;
    loop {
        let parent = stack[depth - base];
        let s = word[depth];
        stack[depth - base + 1] = Frame {
            offset: parent.offset + scaled_apply(&parent.product, sys.translation(s)),
            product: parent.product.mul_mat(sys.linear(s), sys.log_abs_det(s)),
        };
        if depth + 1 == n {
            let fr = &stack[depth - base + 1];
            f(&word, &fr.product, fr.offset);
            // Advance to the next sibling, climbing as needed.
            loop {
                word[depth] += 1;
                if word[depth] < kappa {
                    break;
                }
                if depth == base {
                    return;
                }
                depth -= 1;
            }
        } else {
            depth += 1;
            word[depth] = 0;
        }
    }
}

/// Visit all `κⁿ` cylinders of length `n` in lexicographic order.
pub fn enumerate_level<F>(sys: &IfsSystem, n: usize, budget: u64, mut visitor: F) -> Result<()>
where
    F: FnMut(&Cylinder),
{
    check_budget(sys.kappa(), n, budget)?;
    walk(sys, &[], n, &mut |w, p, o| {
        visitor(&Cylinder { word: Word(w.to_vec()), product: *p, offset: o, singular: p.singular() })
    });
    Ok(())
}

/// The fixed partition of level `n` used for parallel folds: all prefixes of
/// the smallest length `p ≤ n` with `κᵖ ≥ 64`, lexicographically ordered.
/// Independent of the number of worker threads.
pub fn partition_prefixes(kappa: usize, n: usize) -> Vec<Vec<usize>> {
    let mut p = 0;
    while p < n && level_size(kappa, p) < MIN_PARTITIONS as u128 {
        p += 1;
    }
    let mut out = vec![Vec::new()];
    for _ in 0..p {
        out = out
            .into_iter()
            .flat_map(|w| {
                (0..kappa).map(move |s| {
                    let mut v = w.clone();
                    v.push(s);
                    v
                })
            })
            .collect();
    }
    out
}

/// Parallel fold over level `n`: one accumulator per fixed partition,
/// returned in lexicographic partition order. Each partition is walked
/// sequentially, so results do not depend on the thread count.
pub fn fold_level<A, I, F>(sys: &IfsSystem, n: usize, budget: u64, init: I, visit: F) -> Result<Vec<A>>
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, &[usize], &ScaledMat2, Vec2) + Sync,
{
    check_budget(sys.kappa(), n, budget)?;
    let parts = partition_prefixes(sys.kappa(), n);
    Ok(parts
        .par_iter()
        .map(|prefix| {
            let mut acc = init();
            walk(sys, prefix, n, &mut |w, p, o| visit(&mut acc, w, p, o));
            acc
        })
        .collect())
}

/// Depth-first traversal of the stopping set `Z(r)` for `φᵗ`, calling
/// `visit(word, product, offset)` on each member in lexicographic order.
pub fn visit_stopping_set<F>(sys: &IfsSystem, t: f64, r: f64, budget: u64, mut visit: F) -> Result<u64>
where
    F: FnMut(&[usize], &ScaledMat2, Vec2),
{
    if r >= 1.0 {
        visit(&[], &ScaledMat2::IDENTITY, Vec2::ZERO);
        return Ok(1);
    }
    let log_r = r.ln();
    let kappa = sys.kappa();
    let mut visited: u64 = 0;
    let mut word: Vec<usize> = vec![0];
    let mut stack: Vec<Frame> = vec![Frame { product: ScaledMat2::IDENTITY, offset: Vec2::ZERO }];
    loop {
        visited += 1;
        if visited > budget {
            return Err(Error::BudgetExceeded { budget, requested: visited as u128 });
        }
        let depth = word.len() - 1;
        let parent = stack[depth];
        let s = word[depth];
        let fr = Frame {
            offset: parent.offset + scaled_apply(&parent.product, sys.translation(s)),
            product: parent.product.mul_mat(sys.linear(s), sys.log_abs_det(s)),
        };
        let la1 = fr.product.log_alpha1();
        let lp = log_phi(la1, fr.product.log_abs_det - la1, t);
        if lp <= log_r {
            visit(&word, &fr.product, fr.offset);
            loop {
                let last = word.len() - 1;
                word[last] += 1;
                if word[last] < kappa {
                    break;
                }
                word.pop();
                stack.pop();
                if word.is_empty() {
                    return Ok(visited);
                }
            }
        } else {
            stack.push(fr);
            word.push(0);
        }
    }
}

/// The stopping set `Z(r) = {w : φᵗ(A_w) ≤ r < φᵗ(A_{w⁻})}` with
/// `φᵗ(A_∅) = 1`; returns `{∅}` when `r ≥ 1`.
pub fn stopping_set(sys: &IfsSystem, t: f64, r: f64, budget: u64) -> Result<Vec<Cylinder>> {
    let mut out = Vec::new();
    visit_stopping_set(sys, t, r, budget, |w, p, o| {
        out.push(Cylinder { word: Word(w.to_vec()), product: *p, offset: o, singular: p.singular() })
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn load_pair64() {
        let doc = br#"{"maps":[{"A":[[0.35,0.40],[0.30,0.35]],"t":[0,0]},
                                {"A":[[0.40,0.45],[0.45,0.50]],"t":[1,1]}]}"#;
        let sys = load_system(doc).unwrap();
        assert_eq!(sys.kappa(), 2);
        assert!(sys.alpha_lower <= sys.alpha_bar && sys.alpha_bar < 1.0);
    }

    #[test]
    fn load_rejects_bad_documents() {
        let one = br#"{"maps":[{"A":[[0.5,0],[0,0.5]],"t":[0,0]}]}"#;
        assert!(matches!(load_system(one), Err(Error::Validation { index: None, .. })));
        let big = br#"{"maps":[{"A":[[0.5,0],[0,0.5]],"t":[0,0]},{"A":[[1.2,0],[0,0.5]],"t":[0,0]}]}"#;
        assert!(matches!(load_system(big), Err(Error::Validation { index: Some(1), .. })));
        let sing = br#"{"maps":[{"A":[[0.5,0.5],[0.5,0.5]],"t":[0,0]},{"A":[[0.2,0],[0,0.5]],"t":[0,0]}]}"#;
        assert!(matches!(load_system(sing), Err(Error::Validation { index: Some(0), .. })));
        assert!(matches!(load_system(b"{\"maps\": ["), Err(Error::Parse(_))));
    }

    #[test]
    fn cylinder_basic() {
        let sys = fixtures::pair64(Vec2::new(1.0, 1.0));
        let c = cylinder(&sys, &Word::empty()).unwrap();
        assert_eq!(c.product.to_mat(), Mat2::IDENTITY);
        assert_eq!(c.offset, Vec2::ZERO);
        let c = cylinder(&sys, &Word(vec![1])).unwrap();
        assert_eq!(c.product.to_mat(), *sys.linear(1));
        assert_eq!(c.offset, sys.translation(1));
    }

    #[test]
    fn cylinder_composes_maps() {
        let sys = fixtures::pair64(Vec2::new(1.0, 1.0));
        let c = cylinder(&sys, &Word(vec![0, 1])).unwrap();
        let (f, g) = (sys.map(0), sys.map(1));
        for x in [Vec2::new(0.3, -2.0), Vec2::new(5.0, 1.0)] {
            let direct = f.apply(g.apply(x));
            assert!((c.apply(x) - direct).norm() < 1e-14);
        }
        let prod = *sys.linear(0) * *sys.linear(1);
        let m = c.product.to_mat();
        for (a, b) in m.entries().iter().zip(prod.entries()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn endpoints() {
        let z = fixtures::pair64(Vec2::ZERO);
        assert_eq!(word_endpoints(&z, 0), (Vec2::ZERO, Vec2::ZERO));

        let u = fixtures::unit_interval();
        assert_eq!(word_endpoints(&u, 0), (Vec2::new(0.0, 0.0), Vec2::new(0.5, 0.0)));
        assert_eq!(word_endpoints(&u, 1), (Vec2::new(0.5, 0.0), Vec2::new(1.0, 0.0)));

        // Truncated geometric series: a_i + A_i Σ_{k<1000} A_j^k a_j.
        let sys = fixtures::pair64(Vec2::new(1.0, 1.0));
        for i in 0..2 {
            let (x, y) = word_endpoints(&sys, i);
            for (j, target) in [(0usize, x), (1usize, y)] {
                let mut acc = Vec2::ZERO;
                let mut pw = Mat2::IDENTITY;
                for _ in 0..1000 {
                    acc = acc + pw.mul_vec(sys.translation(j));
                    pw = pw * *sys.linear(j);
                }
                let series = sys.map(i).apply(acc);
                assert!((series - target).norm() < 1e-12, "{i} {j}");
            }
        }
    }

    #[test]
    fn level_counts_and_order() {
        let sys = fixtures::pair64(Vec2::new(1.0, 1.0));
        let mut count = 0;
        enumerate_level(&sys, 0, DEFAULT_BUDGET, |c| {
            assert!(c.word.is_empty());
            count += 1;
        })
        .unwrap();
        assert_eq!(count, 1);

        let mut words = Vec::new();
        enumerate_level(&sys, 10, DEFAULT_BUDGET, |c| words.push(c.word.clone())).unwrap();
        assert_eq!(words.len(), 1024);
        assert!(words.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn level_two_sum_matches_explicit_products() {
        let sys = fixtures::edgar(0.4, 0.1);
        let mut sum = 0.0;
        enumerate_level(&sys, 2, DEFAULT_BUDGET, |c| sum += c.singular.alpha1).unwrap();
        let mut direct = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                direct += svd2(&(*sys.linear(i) * *sys.linear(j))).unwrap().alpha1;
            }
        }
        assert!((sum - direct).abs() < 1e-14);
    }

    #[test]
    fn budget_is_enforced() {
        let sys = fixtures::edgar(0.4, 0.1);
        let err = enumerate_level(&sys, 11, 1024, |_| {}).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { budget: 1024, requested: 2048 }));
    }

    #[test]
    fn fold_matches_sequential_in_order() {
        let sys = fixtures::family65(4);
        let parts = fold_level(&sys, 5, DEFAULT_BUDGET, Vec::new, |acc: &mut Vec<Vec<usize>>, w, _, _| {
            acc.push(w.to_vec())
        })
        .unwrap();
        let flat: Vec<Vec<usize>> = parts.into_iter().flatten().collect();
        let mut seq = Vec::new();
        enumerate_level(&sys, 5, DEFAULT_BUDGET, |c| seq.push(c.word.0.clone())).unwrap();
        assert_eq!(flat, seq);
    }

    #[test]
    fn stopping_set_conventions() {
        let sys = fixtures::edgar(0.4, 0.1);
        let z = stopping_set(&sys, 1.0, 1.0, DEFAULT_BUDGET).unwrap();
        assert_eq!(z.len(), 1);
        assert!(z[0].word.is_empty());
        let z = stopping_set(&sys, 1.0, 0.999, DEFAULT_BUDGET).unwrap();
        assert_eq!(z.len(), 2);
        assert!(z.iter().all(|c| c.word.len() == 1));
    }

    #[test]
    fn stopping_set_uniform_similitudes() {
        let sys = fixtures::four_corners(0.5);
        let r: f64 = 0.01;
        let z = stopping_set(&sys, 1.0, r, DEFAULT_BUDGET).unwrap();
        let expected = (r.ln() / 0.5f64.ln()).ceil() as usize;
        assert!(z.iter().all(|c| c.word.len() == expected));
        assert_eq!(z.len(), 4usize.pow(expected as u32));
    }

    #[test]
    fn stopping_set_sandwich_on_edgar() {
        let sys = fixtures::edgar(0.4, 0.1);
        let (t, r) = (1.2, 1e-3);
        let z = stopping_set(&sys, t, r, DEFAULT_BUDGET).unwrap();
        for c in &z {
            let s = c.singular;
            assert!(log_phi(s.log_alpha1, s.log_alpha2, t) <= r.ln());
            let p = cylinder(&sys, &c.word.parent()).unwrap().singular;
            let parent = if c.word.len() == 1 { 0.0 } else { log_phi(p.log_alpha1, p.log_alpha2, t) };
            assert!(parent > r.ln());
        }
    }
}
