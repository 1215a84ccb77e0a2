//! Singular value function, pressure bounds, the dimension bracket,
//! perturbation bounds and finite-level Gibbs diagnostics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::conditions::{exactly_multiplicative, find_invariant_cone, refined_invariant_rays};
use crate::error::{Error, Result};
use crate::ifs::{fold_level, IfsSystem, DEFAULT_BUDGET};
use crate::mat2::{ScaledMat2, SingularData, Vec2};
use crate::numeric::LogSumExp;

/// Slack applied to computed pressure values before they count as a sign
/// certificate; it dominates the floating error of the level sums.
pub const ROUNDING_SLACK: f64 = 1e-13;

/// Level sizes up to this many words keep their spectrum in memory.
const CACHE_LIMIT: u64 = 1 << 21;

const CHUNK: usize = 4096;

/// `log φᵗ` from `log α₁` and `log α₂`.
#[inline]
pub fn log_phi(log_alpha1: f64, log_alpha2: f64, t: f64) -> f64 {
    if t <= 1.0 {
        t * log_alpha1
    } else if t <= 2.0 {
        log_alpha1 + (t - 1.0) * log_alpha2
    } else {
        0.5 * t * (log_alpha1 + log_alpha2)
    }
}

/// `log φᵗ(A)` for a matrix with the given singular data.
pub fn phi(s: &SingularData, t: f64) -> f64 {
    log_phi(s.log_alpha1, s.log_alpha2, t)
}

/// A linear functional `f` positive on a closed cone spanned by two rays
/// that every linear part maps into itself (up to sign). The quantity
/// `ψ(A) = min_rays |f(Ax)| / f(x)` is supermultiplicative and bounded
/// above by a constant times `α₁(A)`, which gives a level-`n` lower bound
/// on the pressure for `t ≤ 2`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConeFunctional {
    pub rays: [Vec2; 2],
    pub functional: Vec2,
}

impl ConeFunctional {
    pub fn new(rays: [Vec2; 2]) -> Self {
        let functional = (rays[0].normalized() + rays[1].normalized()).normalized();
        Self { rays: [rays[0].normalized(), rays[1].normalized()], functional }
    }

    #[inline]
    pub fn log_psi(&self, p: &ScaledMat2) -> f64 {
        let f = self.functional;
        let mut best = f64::INFINITY;
        for x in self.rays {
            let v = f.dot(p.mantissa.mul_vec(x)).abs() / f.dot(x);
            best = best.min(v);
        }
        best.ln() + p.log_scale()
    }
}

/// Certified two-sided bound on `P(t)` from level `n`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PressureBound {
    pub t: f64,
    pub n: usize,
    pub upper: f64,
    /// `upper − (log D)/n`; `−∞` when no valid `D` is known.
    pub lower: f64,
    pub d_constant: f64,
    /// Cone-functional lower bound, when an invariant cone is available.
    pub lower_cone: Option<f64>,
}

impl PressureBound {
    /// The best of the available lower bounds.
    pub fn certified_lower(&self) -> f64 {
        self.lower.max(self.lower_cone.unwrap_or(f64::NEG_INFINITY))
    }
}

/// How the lower bound is obtained.
#[derive(Clone, Debug)]
pub enum LowerMode {
    /// `φᵗ` is exactly multiplicative: `D = 1`.
    Exact,
    /// Supermultiplicativity constant `D` and optionally a cone functional.
    Cone { d_constant: f64, functional: Option<ConeFunctional> },
    /// No lower bound.
    None,
}

impl LowerMode {
    /// Select the strongest lower bound available for `sys`.
    pub fn for_system(sys: &IfsSystem) -> LowerMode {
        if exactly_multiplicative(sys) {
            return LowerMode::Exact;
        }
        match find_invariant_cone(sys) {
            Ok(cone) => LowerMode::Cone {
                d_constant: cone.d_constant(),
                functional: refined_invariant_rays(sys, 32).map(ConeFunctional::new),
            },
            Err(_) => LowerMode::None,
        }
    }

    pub fn d_constant(&self) -> f64 {
        match self {
            LowerMode::Exact => 1.0,
            LowerMode::Cone { d_constant, .. } => *d_constant,
            LowerMode::None => f64::INFINITY,
        }
    }

    fn functional(&self) -> Option<&ConeFunctional> {
        match self {
            LowerMode::Cone { functional: Some(f), .. } => Some(f),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LowerMode::Exact => "exact",
            LowerMode::Cone { functional: Some(_), .. } => "cone-functional",
            LowerMode::Cone { .. } => "supermultiplicativity",
            LowerMode::None => "none",
        }
    }
}

/// Raw level sums: `log Σ φᵗ` and, with a cone, the cone-functional sum.
#[derive(Clone, Copy, Debug)]
struct LevelSums {
    upper: f64,
    cone: f64,
}

#[inline]
fn log_psi_term(lpsi: f64, ldet: f64, t: f64) -> f64 {
    if t <= 1.0 {
        t * lpsi
    } else {
        (2.0 - t) * lpsi + (t - 1.0) * ldet
    }
}

/// Per-word spectrum of a level, either cached or recomputed on demand.
struct Spectrum<'a> {
    sys: &'a IfsSystem,
    n: usize,
    budget: u64,
    functional: Option<ConeFunctional>,
    cached: Option<Cached>,
}

struct Cached {
    la1: Vec<f64>,
    ldet: Vec<f64>,
    lpsi: Option<Vec<f64>>,
}

impl<'a> Spectrum<'a> {
    fn new(
        sys: &'a IfsSystem,
        n: usize,
        budget: u64,
        functional: Option<ConeFunctional>,
        cache_limit: u64,
    ) -> Result<Self> {
        let size = (sys.kappa() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        if size > budget as u128 {
            return Err(Error::BudgetExceeded { budget, requested: size });
        }
        let cached = if size <= cache_limit as u128 {
            let f = functional;
            let parts = fold_level(
                sys,
                n,
                budget,
                || (Vec::new(), Vec::new(), Vec::new()),
                |acc, _, p, _| {
                    acc.0.push(p.log_alpha1());
                    acc.1.push(p.log_abs_det);
                    if let Some(f) = &f {
                        acc.2.push(f.log_psi(p));
                    }
                },
            )?;
            let mut c = Cached { la1: Vec::new(), ldet: Vec::new(), lpsi: f.map(|_| Vec::new()) };
            for (a, d, s) in parts {
                c.la1.extend(a);
                c.ldet.extend(d);
                if let Some(v) = c.lpsi.as_mut() {
                    v.extend(s);
                }
            }
            Some(c)
        } else {
            None
        };
        Ok(Self { sys, n, budget, functional, cached })
    }

    fn sums(&self, ts: &[f64]) -> Result<Vec<LevelSums>> {
        let k = ts.len();
        let merge = |parts: Vec<Vec<(LogSumExp, LogSumExp)>>| {
            let mut tot = vec![(LogSumExp::new(), LogSumExp::new()); k];
            for p in &parts {
                for (acc, v) in tot.iter_mut().zip(p) {
                    acc.0.merge(&v.0);
                    acc.1.merge(&v.1);
                }
            }
            tot.into_iter().map(|(u, c)| LevelSums { upper: u.value(), cone: c.value() }).collect()
        };
        if let Some(c) = &self.cached {
            let chunks: Vec<Vec<(LogSumExp, LogSumExp)>> = c
                .la1
                .par_chunks(CHUNK)
                .enumerate()
                .map(|(ci, la1)| {
                    let base = ci * CHUNK;
                    let ldet = &c.ldet[base..base + la1.len()];
                    let lpsi = c.lpsi.as_ref().map(|v| &v[base..base + la1.len()]);
                    ts.iter()
                        .map(|&t| {
                            let mut u = LogSumExp::new();
                            let mut w = LogSumExp::new();
                            for j in 0..la1.len() {
                                u.push(log_phi(la1[j], ldet[j] - la1[j], t));
                                if let Some(lp) = lpsi {
                                    w.push(log_psi_term(lp[j], ldet[j], t));
                                }
                            }
                            (u, w)
                        })
                        .collect()
                })
                .collect();
            return Ok(merge(chunks));
        }
        let f = self.functional;
        let parts = fold_level(
            self.sys,
            self.n,
            self.budget,
            || vec![(LogSumExp::new(), LogSumExp::new()); k],
            |acc, _, p, _| {
                let la1 = p.log_alpha1();
                let ldet = p.log_abs_det;
                let lpsi = f.as_ref().map(|f| f.log_psi(p));
                for (a, &t) in acc.iter_mut().zip(ts) {
                    a.0.push(log_phi(la1, ldet - la1, t));
                    if let Some(lp) = lpsi {
                        a.1.push(log_psi_term(lp, ldet, t));
                    }
                }
            },
        )?;
        Ok(merge(parts))
    }
}

/// `log Σᵢ |det Aᵢ|^{t/2}`, the exact pressure for `t ≥ 2`.
fn determinant_pressure(sys: &IfsSystem, t: f64) -> f64 {
    let mut acc = LogSumExp::new();
    for i in 0..sys.kappa() {
        acc.push(0.5 * t * sys.log_abs_det(i));
    }
    acc.value()
}

fn assemble(sys: &IfsSystem, t: f64, n: usize, s: LevelSums, mode: &LowerMode) -> PressureBound {
    let d = mode.d_constant();
    if t > 2.0 {
        let p = determinant_pressure(sys, t);
        return PressureBound { t, n, upper: p, lower: p, d_constant: d, lower_cone: Some(p) };
    }
    let upper = s.upper / n as f64;
    let lower = if d.is_finite() { upper - d.ln() / n as f64 } else { f64::NEG_INFINITY };
    let lower_cone = mode.functional().map(|_| s.cone / n as f64);
    PressureBound { t, n, upper, lower, d_constant: d, lower_cone }
}

fn bounds_at(spec: &Spectrum<'_>, ts: &[f64], mode: &LowerMode) -> Result<Vec<PressureBound>> {
    let sums = spec.sums(ts)?;
    Ok(ts.iter().zip(sums).map(|(&t, s)| assemble(spec.sys, t, spec.n, s, mode)).collect())
}

/// Level-`n` pressure bounds at `t` using the supplied constant `D`
/// (`f64::INFINITY` disables the lower bound).
pub fn pressure_bounds(sys: &IfsSystem, t: f64, n: usize, d_constant: f64) -> Result<PressureBound> {
    let mode = if d_constant.is_finite() {
        LowerMode::Cone { d_constant, functional: None }
    } else {
        LowerMode::None
    };
    pressure_bounds_with(sys, t, n, &mode, DEFAULT_BUDGET)
}

/// Level-`n` pressure bounds with an explicit lower-bound mode and budget.
pub fn pressure_bounds_with(
    sys: &IfsSystem,
    t: f64,
    n: usize,
    mode: &LowerMode,
    budget: u64,
) -> Result<PressureBound> {
    if n == 0 {
        return Err(Error::hypothesis("level n must be at least 1"));
    }
    if !(t >= 0.0) {
        return Err(Error::hypothesis("t must be nonnegative"));
    }
    let spec = Spectrum::new(sys, n, budget, mode.functional().copied(), 0)?;
    Ok(bounds_at(&spec, &[t], mode)?[0])
}

/// Certified interval containing the zero of the pressure.
#[derive(Clone, Debug, Serialize)]
pub struct DimensionBracket {
    pub t_lo: f64,
    pub t_hi: f64,
    pub n: usize,
    pub d_constant: f64,
    pub lower_source: String,
    /// Upper bound of `P(t_hi)`; nonpositive.
    pub upper_at_t_hi: f64,
    /// Certified lower bound of `P(t_lo)`; nonnegative (`t_lo = 0` needs none).
    pub lower_at_t_lo: f64,
    pub tolerance: f64,
    pub tolerance_met: bool,
    pub levels_tried: Vec<usize>,
}

impl DimensionBracket {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.t_lo + self.t_hi)
    }

    pub fn width(&self) -> f64 {
        self.t_hi - self.t_lo
    }
}

/// Tuning knobs of [`dimension_bracket_with`].
#[derive(Clone, Debug)]
pub struct BracketOptions {
    pub tol: f64,
    pub budget: u64,
    pub n_start: usize,
    pub n_max: Option<usize>,
    pub cache_limit: u64,
}

impl BracketOptions {
    pub fn new(tol: f64, budget: u64) -> Self {
        Self { tol, budget, n_start: 8, n_max: None, cache_limit: CACHE_LIMIT }
    }
}

/// Bracket the pressure zero to within `tol`, escalating the level up to
/// the largest `n` with `κⁿ ≤ budget`.
pub fn dimension_bracket(sys: &IfsSystem, tol: f64, budget: u64) -> Result<DimensionBracket> {
    dimension_bracket_with(sys, &BracketOptions::new(tol, budget))
}

struct LevelResult {
    t_lo: f64,
    t_hi: f64,
    upper_at_t_hi: f64,
    lower_at_t_lo: f64,
}

fn bracket_level(spec: &Spectrum<'_>, mode: &LowerMode, tol: f64) -> Result<LevelResult> {
    let tol_root = tol / 8.0;
    let has_lower = !matches!(mode, LowerMode::None);
    let eval = |ts: &[f64]| bounds_at(spec, ts, mode);

    // Right end: double until the upper bound is certified negative.
    let mut right = 4.0;
    let mut upper_right = eval(&[right])?[0].upper;
    while upper_right > -ROUNDING_SLACK {
        right *= 2.0;
        if right > 1024.0 {
            return Err(Error::hypothesis("pressure stays positive for t ≤ 1024"));
        }
        upper_right = eval(&[right])?[0].upper;
    }

    // Invariants: U(u_hi) certified ≤ −slack; L(l_lo) certified ≥ slack or l_lo = 0.
    let (mut u_lo, mut u_hi, mut u_val) = (0.0, right, upper_right);
    let (mut l_lo, mut l_hi, mut l_val) = (0.0f64, right, f64::NAN);
    const K: usize = 8;
    loop {
        let need_u = u_hi - u_lo > tol_root;
        let need_l = has_lower && l_hi - l_lo > tol_root;
        if !need_u && !need_l {
            break;
        }
        // The bracket can no longer reach the tolerance at this level.
        if has_lower && u_lo - l_hi > tol {
            break;
        }
        let mut ts = Vec::with_capacity(2 * K);
        if need_u {
            ts.extend((1..=K).map(|k| u_lo + (u_hi - u_lo) * k as f64 / (K + 1) as f64));
        }
        if need_l {
            ts.extend((1..=K).map(|k| l_lo + (l_hi - l_lo) * k as f64 / (K + 1) as f64));
        }
        let bs = eval(&ts)?;
        let split = if need_u { K } else { 0 };
        if need_u {
            let grid = &bs[..split];
            if let Some(b) = grid.iter().find(|b| b.upper <= -ROUNDING_SLACK) {
                u_hi = b.t;
                u_val = b.upper;
            }
            if let Some(b) = grid.iter().rev().find(|b| b.t < u_hi && b.upper > -ROUNDING_SLACK) {
                u_lo = b.t;
            }
        }
        if need_l {
            let grid = &bs[split..];
            if let Some(b) = grid.iter().rev().find(|b| b.certified_lower() >= ROUNDING_SLACK) {
                l_lo = b.t;
                l_val = b.certified_lower();
            }
            if let Some(b) = grid.iter().find(|b| b.t > l_lo && b.certified_lower() < ROUNDING_SLACK) {
                l_hi = b.t;
            }
        }
    }
    if l_lo == 0.0 && l_val.is_nan() {
        // P(0) = log κ > 0 without any certificate.
        l_val = (spec.sys.kappa() as f64).ln();
    }
    Ok(LevelResult { t_lo: l_lo, t_hi: u_hi, upper_at_t_hi: u_val, lower_at_t_lo: l_val })
}

/// [`dimension_bracket`] with explicit options.
pub fn dimension_bracket_with(sys: &IfsSystem, opts: &BracketOptions) -> Result<DimensionBracket> {
    if !(opts.tol > 0.0) {
        return Err(Error::hypothesis("tolerance must be positive"));
    }
    let mode = LowerMode::for_system(sys);
    let kappa = sys.kappa() as f64;
    let mut n_max = ((opts.budget as f64).ln() / kappa.ln() + 1e-9).floor() as usize;
    while n_max > 0 && (sys.kappa() as u128).pow(n_max as u32) > opts.budget as u128 {
        n_max -= 1;
    }
    if let Some(cap) = opts.n_max {
        n_max = n_max.min(cap);
    }
    if n_max == 0 {
        return Err(Error::BudgetExceeded { budget: opts.budget, requested: sys.kappa() as u128 });
    }
    let mut n = if matches!(mode, LowerMode::Exact) { 1 } else { opts.n_start.clamp(1, n_max) };
    let mut best: Option<DimensionBracket> = None;
    let mut levels = Vec::new();
    loop {
        levels.push(n);
        let spec = Spectrum::new(sys, n, opts.budget, mode.functional().copied(), opts.cache_limit)?;
        let r = bracket_level(&spec, &mode, opts.tol)?;
        let mut b = DimensionBracket {
            t_lo: r.t_lo,
            t_hi: r.t_hi,
            n,
            d_constant: mode.d_constant(),
            lower_source: mode.name().to_string(),
            upper_at_t_hi: r.upper_at_t_hi,
            lower_at_t_lo: r.lower_at_t_lo,
            tolerance: opts.tol,
            tolerance_met: false,
            levels_tried: levels.clone(),
        };
        // Brackets from different levels are all certified; keep the tighter ends.
        if let Some(prev) = &best {
            if prev.t_lo > b.t_lo {
                b.t_lo = prev.t_lo;
                b.lower_at_t_lo = prev.lower_at_t_lo;
            }
            if prev.t_hi < b.t_hi {
                b.t_hi = prev.t_hi;
                b.upper_at_t_hi = prev.upper_at_t_hi;
            }
        }
        b.tolerance_met = b.width() <= opts.tol;
        if b.tolerance_met {
            return Ok(b);
        }
        if n >= n_max {
            return Err(Error::BracketBudget(Box::new(b)));
        }
        best = Some(b);
        n = (2 * n).min(n_max);
    }
}

/// Certified pressure shift under entrywise perturbations of size `eps`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PerturbationBounds {
    pub eps: f64,
    pub delta: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub d_max: f64,
    pub d_prime: f64,
    #[serde(rename = "T")]
    pub t_cap: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// `[−log λ₂, −log λ₁]`.
    pub pressure_shift: (f64, f64),
    /// Bound on the movement of the pressure zero: `max(−log λ₁, log λ₂)/|log ᾱ|`.
    pub dimension_shift: f64,
}

/// Perturbation bounds for an all-positive (after sign normalization) system.
pub fn perturbation_bounds(sys: &IfsSystem, eps: f64, d_prime: f64) -> Result<PerturbationBounds> {
    let mut delta = f64::INFINITY;
    for (i, m) in sys.maps().iter().enumerate() {
        let a = m.linear;
        if !(a.is_positive() || a.is_negative()) {
            return Err(Error::hypothesis(format!(
                "map {} does not have strictly one-signed coefficients",
                i + 1
            )));
        }
        delta = delta.min(a.entries().iter().fold(f64::INFINITY, |m, v| m.min(v.abs())));
    }
    if !(eps > 0.0 && eps < delta) {
        return Err(Error::hypothesis(format!("need 0 < eps < delta = {delta}, got eps = {eps}")));
    }
    let dets: Vec<f64> = sys.maps().iter().map(|m| m.linear.det().abs()).collect();
    let d_max = dets.iter().cloned().fold(0.0, f64::max);
    if !(d_prime > d_max && d_prime < 1.0) {
        return Err(Error::hypothesis(format!("need max|det| = {d_max} < d' < 1, got {d_prime}")));
    }
    if d_max + 8.0 * eps >= d_prime {
        return Err(Error::hypothesis(format!("need max|det| + 8 eps < d' ({} ≥ {d_prime})", d_max + 8.0 * eps)));
    }
    let eps1 = eps / delta;
    let eps2 = dets.iter().map(|d| 8.0 * eps / d).fold(0.0, f64::max);
    if eps2 >= 1.0 {
        return Err(Error::hypothesis(format!("eps2 = {eps2} ≥ 1; determinant bound is vacuous")));
    }
    let kappa = sys.kappa() as f64;
    let t_cap = (2.0 * kappa.ln() / d_prime.ln().abs()).max(2.0);
    let lambda1 = (1.0 - eps1) / (1.0 + eps1) * (1.0 - eps2).powf(t_cap / 2.0);
    let lambda2 = (1.0 + eps1) / (1.0 - eps1) * (1.0 + eps2).powf(t_cap / 2.0);
    let shift = (-lambda2.ln(), -lambda1.ln());
    let dimension_shift = (-lambda1.ln()).max(lambda2.ln()) / sys.alpha_bar.ln().abs();
    Ok(PerturbationBounds {
        eps,
        delta,
        eps1,
        eps2,
        d_max,
        d_prime,
        t_cap,
        lambda1,
        lambda2,
        pressure_shift: shift,
        dimension_shift,
    })
}

/// Mean and standard error.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

fn estimate(xs: &[f64]) -> Estimate {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    Estimate { mean, stderr: (var / m).sqrt() }
}

/// Finite-level Gibbs weights and Lyapunov exponent estimates.
#[derive(Clone, Debug, Serialize)]
pub struct GibbsReport {
    pub t: f64,
    pub n: usize,
    pub seed: u64,
    pub samples: usize,
    /// `"table"` or `"sequential"`.
    pub mode: String,
    /// Normalized level-`n` weights; omitted for large levels.
    pub weights: Option<Vec<f64>>,
    pub weights_sum: f64,
    /// Estimates of `(1/n) log α_k(A_w)` under the weights.
    pub log_lyapunov1: Estimate,
    pub log_lyapunov2: Estimate,
    pub lyapunov1: f64,
    pub lyapunov2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub quasi_mult_worst: f64,
    /// max/min over sampled prefixes of `μₙ([w|m]) e^{mP} / φᵗ(A_{w|m})`, `m = n/2`.
    pub gibbs_constant_ratio: Option<f64>,
}

impl GibbsReport {
    /// `γ₁ + (t−1)γ₂`, equal to 1 by construction.
    pub fn gamma_identity(&self) -> f64 {
        self.gamma1 + (self.t - 1.0) * self.gamma2
    }
}

/// Table mode is used when `κⁿ` is at most this.
const GIBBS_TABLE_LIMIT: u64 = 1 << 20;

fn word_product(sys: &IfsSystem, w: &[usize]) -> ScaledMat2 {
    w.iter().fold(ScaledMat2::IDENTITY, |p, &s| p.mul_mat(sys.linear(s), sys.log_abs_det(s)))
}

fn log_phi_of(p: &ScaledMat2, t: f64) -> f64 {
    let la1 = p.log_alpha1();
    log_phi(la1, p.log_abs_det - la1, t)
}

/// Level-`n` Gibbs diagnostics at `t` from `samples` seeded draws.
pub fn gibbs_report(
    sys: &IfsSystem,
    t: f64,
    n: usize,
    samples: usize,
    seed: u64,
    budget: u64,
) -> Result<GibbsReport> {
    if n == 0 || samples == 0 {
        return Err(Error::hypothesis("gibbs_report needs n ≥ 1 and samples ≥ 1"));
    }
    let kappa = sys.kappa();
    let size = (kappa as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words: Vec<Vec<usize>> = Vec::with_capacity(samples);
    let mut weights_out = None;
    let mut weights_sum = 1.0;
    let mut gibbs_ratio = None;
    let mode;
    if size <= GIBBS_TABLE_LIMIT.min(budget) as u128 {
        mode = "table";
        let parts = fold_level(sys, n, budget, Vec::new, |acc: &mut Vec<f64>, _, p, _| {
            acc.push(log_phi_of(p, t))
        })?;
        let logs: Vec<f64> = parts.into_iter().flatten().collect();
        let lse = crate::numeric::log_sum_exp(&logs);
        let weights: Vec<f64> = logs.iter().map(|l| (l - lse).exp()).collect();
        weights_sum = weights.iter().sum();
        let mut cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cdf.push(acc);
        }
        let decode = |mut idx: usize| {
            let mut w = vec![0; n];
            for k in (0..n).rev() {
                w[k] = idx % kappa;
                idx /= kappa;
            }
            w
        };
        for _ in 0..samples {
            let u: f64 = rng.gen::<f64>() * acc;
            let idx = cdf.partition_point(|&c| c <= u).min(weights.len() - 1);
            words.push(decode(idx));
        }
        // Marginals on prefixes of length m.
        let m = (n / 2).max(1);
        let block = kappa.pow((n - m) as u32);
        let p_n = lse / n as f64;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for w in &words {
            let pidx = w[..m].iter().fold(0usize, |a, &s| a * kappa + s);
            let mass: f64 = weights[pidx * block..(pidx + 1) * block].iter().sum();
            let r = mass.ln() + m as f64 * p_n - log_phi_of(&word_product(sys, &w[..m]), t);
            lo = lo.min(r);
            hi = hi.max(r);
        }
        gibbs_ratio = Some((hi - lo).exp());
        if weights.len() <= 1024 {
            weights_out = Some(weights);
        }
    } else {
        mode = "sequential";
        for _ in 0..samples {
            let mut p = ScaledMat2::IDENTITY;
            let mut w = Vec::with_capacity(n);
            for _ in 0..n {
                let logs: Vec<f64> = (0..kappa)
                    .map(|s| log_phi_of(&p.mul_mat(sys.linear(s), sys.log_abs_det(s)), t))
                    .collect();
                let mx = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let probs: Vec<f64> = logs.iter().map(|l| (l - mx).exp()).collect();
                let total: f64 = probs.iter().sum();
                let mut u = rng.gen::<f64>() * total;
                let mut s = kappa - 1;
                for (k, pr) in probs.iter().enumerate() {
                    if u < *pr {
                        s = k;
                        break;
                    }
                    u -= pr;
                }
                w.push(s);
                p = p.mul_mat(sys.linear(s), sys.log_abs_det(s));
            }
            words.push(w);
        }
    }

    let mut l1 = Vec::with_capacity(samples);
    let mut l2 = Vec::with_capacity(samples);
    let mut worst = f64::INFINITY;
    for w in &words {
        let p = word_product(sys, w);
        let s = p.singular();
        l1.push(s.log_alpha1 / n as f64);
        l2.push(s.log_alpha2 / n as f64);
        let whole = log_phi_of(&p, t);
        let mut prefix = ScaledMat2::IDENTITY;
        for k in 1..n {
            prefix = prefix.mul_mat(sys.linear(w[k - 1]), sys.log_abs_det(w[k - 1]));
            let suffix = word_product(sys, &w[k..]);
            worst = worst.min(whole - log_phi_of(&prefix, t) - log_phi_of(&suffix, t));
        }
    }
    let e1 = estimate(&l1);
    let e2 = estimate(&l2);
    let denom = e1.mean + (t - 1.0) * e2.mean;
    Ok(GibbsReport {
        t,
        n,
        seed,
        samples,
        mode: mode.to_string(),
        weights: weights_out,
        weights_sum,
        log_lyapunov1: e1,
        log_lyapunov2: e2,
        lyapunov1: e1.mean.exp(),
        lyapunov2: e2.mean.exp(),
        gamma1: e1.mean / denom,
        gamma2: e2.mean / denom,
        quasi_mult_worst: if n > 1 { worst.exp() } else { 1.0 },
        gibbs_constant_ratio: gibbs_ratio,
    })
}
