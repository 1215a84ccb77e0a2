//! End-to-end acceptance run. One line per criterion on stderr; exits
//! nonzero if any criterion fails.

use std::f64::consts::PI;
use std::process::Command;
use std::time::{Duration, Instant};

use kakeya_core::conditions::{
    find_invariant_cone, full_report, projective_contraction, projective_factor, ProjectionEvidence, Verdict,
};
use kakeya_core::geom::{
    box_dimension, fan, line_angle, overlap_bound, rasterize_rects, rect_intersection_area, verify_kakeya_estimate,
    DeltaRange,
};
use kakeya_core::ifs::{cylinder, enumerate_level};
use kakeya_core::mat2::spectral_radius;
use kakeya_core::pressure::{dimension_bracket, gibbs_report, log_phi, perturbation_bounds};
use kakeya_core::tractable::{ball_condition_check, cone_entry, IfsSystemD, MatD, VecD, ENTRY_MARGIN};
use kakeya_core::{fixtures, Error, IfsSystem, Mat2, Rect, Vec2, Word, DEFAULT_BUDGET};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, format!("took {:.2}s, limit {limit_s}s", elapsed.as_secs_f64()))
}

fn similitude_bracket() -> Outcome {
    let start = Instant::now();
    let b = dimension_bracket(&fixtures::unit_interval(), 1e-12, DEFAULT_BUDGET).map_err(|e| e.to_string())?;
    within(start.elapsed(), 1.0)?;
    ensure(b.t_lo <= 1.0 && 1.0 <= b.t_hi, format!("[{}, {}] misses 1", b.t_lo, b.t_hi))?;
    ensure(b.width() <= 1e-12, format!("width {:.3e}", b.width()))?;
    Ok(format!("[{:.15}, {:.15}] width {:.1e}", b.t_lo, b.t_hi, b.width()))
}

fn diagonal_bracket() -> Outcome {
    let start = Instant::now();
    let b = dimension_bracket(&fixtures::diagonal_triple(), 1e-6, DEFAULT_BUDGET).map_err(|e| e.to_string())?;
    within(start.elapsed(), 5.0)?;
    let exact = 1.0 + (3f64.ln() - 2f64.ln()) / 4f64.ln();
    ensure(b.t_lo <= exact && exact <= b.t_hi, format!("[{}, {}] misses {exact}", b.t_lo, b.t_hi))?;
    ensure(b.width() <= 1e-6, format!("width {:.3e}", b.width()))?;
    Ok(format!("[{:.9}, {:.9}] contains {exact:.9}", b.t_lo, b.t_hi))
}

fn edgar_third() -> Outcome {
    let start = Instant::now();
    let sys = fixtures::edgar(1.0 / 3.0, 0.01);
    let b = dimension_bracket(&sys, 0.05, DEFAULT_BUDGET).map_err(|e| e.to_string())?;
    within(start.elapsed(), 60.0)?;
    ensure(b.n <= 20, format!("level {}", b.n))?;
    ensure((b.midpoint() - 1.0).abs() <= 0.05, format!("midpoint {}", b.midpoint()))?;
    let d_max = sys.maps().iter().map(|m| m.linear.det().abs()).fold(0.0, f64::max);
    let shift = perturbation_bounds(&sys, 1e-3, 0.5 * (d_max + 1.0))
        .map(|p| format!("{:.3e}", p.dimension_shift))
        .unwrap_or_else(|e| e.to_string());
    Ok(format!(
        "midpoint {:.4} at level {} in {:.2}s (perturbation shift for size 1e-3: {shift})",
        b.midpoint(),
        b.n,
        start.elapsed().as_secs_f64()
    ))
}

fn spectral() -> Outcome {
    let sys = fixtures::edgar(0.4, 0.1);
    let rho: Vec<f64> = (0..2).map(|i| spectral_radius(sys.linear(i))).collect();
    for r in &rho {
        ensure((r - 0.6236).abs() <= 5e-4, format!("spectral radius {r}"))?;
    }
    Ok(format!("{:.6}, {:.6}", rho[0], rho[1]))
}

fn verdicts() -> Outcome {
    let timed = |sys: &IfsSystem| {
        let start = Instant::now();
        let r = full_report(sys);
        within(start.elapsed(), 1.0).map(|_| r)
    };
    let r = timed(&fixtures::edgar(0.4, 0.1))?;
    ensure(r.verdict == Verdict::Yes, format!("edgar(0.4, 0.1): {:?}", r.verdict))?;
    let r = timed(&fixtures::edgar(0.4, 0.0))?;
    ensure(r.verdict == Verdict::No && !r.k1a.holds, format!("edgar(0.4, 0): {:?}", r.verdict))?;
    for a2 in [Vec2::new(1.0, 1.0), Vec2::new(0.2, 3.0), Vec2::new(5.0, 0.01)] {
        let r = timed(&fixtures::pair64(a2))?;
        ensure(r.verdict == Verdict::Yes, format!("pair64({a2:?}): {:?}", r.verdict))?;
        let certified = r.projection.iter().any(|e| match e {
            ProjectionEvidence::Lemma63 { pair: (0, 1), report, .. } => {
                report.verdict && report.id_minus_a1_b2.entries().iter().all(|&x| x > 0.0)
            }
            _ => false,
        });
        ensure(certified, format!("pair64({a2:?}) not certified by the fixed-point order test"))?;
    }
    let r = timed(&fixtures::family65(5))?;
    ensure(r.verdict == Verdict::Yes, format!("family65(5): {:?}", r.verdict))?;
    let by = r.certified_by.unwrap_or_default();
    ensure(by.contains("(1,2)"), format!("family65(5) certified by {by}"))?;
    Ok(format!("edgar yes/no, pair64 yes x3, family65 yes via {by}"))
}

fn cross_validation() -> Outcome {
    let start = Instant::now();
    let sys = fixtures::edgar(0.4, 0.1);
    let b = dimension_bracket(&sys, 0.01, DEFAULT_BUDGET).map_err(|e| e.to_string())?;
    let est = box_dimension(&sys, DeltaRange::default(), DEFAULT_BUDGET).map_err(|e| e.to_string())?;
    within(start.elapsed(), 600.0)?;
    let diff = (est.dim_estimate - b.midpoint()).abs();
    ensure(diff <= 0.15, format!("|{} - {}| = {diff}", est.dim_estimate, b.midpoint()))?;
    ensure(est.stderr <= 0.05, format!("stderr {}", est.stderr))?;
    Ok(format!(
        "box {:.4} (stderr {:.4}) vs bracket midpoint {:.4}: diff {diff:.4} in {:.1}s",
        est.dim_estimate,
        est.stderr,
        b.midpoint(),
        start.elapsed().as_secs_f64()
    ))
}

fn random_rect_pair(rng: &mut ChaCha8Rng) -> (Rect, Rect) {
    let a1 = rng.gen_range(1.0..4.0);
    let a2 = a1 * rng.gen_range(0.01..0.5);
    let r1 = Rect::new(Vec2::ZERO, rng.gen_range(0.0..PI), a1, a2);
    let c = Vec2::new(rng.gen_range(-0.5..0.5) * a1, rng.gen_range(-0.5..0.5) * a1);
    (r1, Rect::new(c, rng.gen_range(0.0..PI), a1, a2))
}

fn kakeya_estimates() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut fans = 0;
    while fans < 100 {
        let m = rng.gen_range(1..40usize);
        let a2 = rng.gen_range(0.01..0.1);
        let spacing = rng.gen_range(1.0..2.0) * a2;
        if (m as f64 - 1.0) * spacing > PI - spacing {
            continue;
        }
        let rects = fan(m, 1.0, a2, spacing);
        let f = rasterize_rects(&rects, a2 / 32.0);
        let c = verify_kakeya_estimate(&rects, &f, 1.0).map_err(|e| e.to_string())?;
        ensure(c.pass, format!("fan m={m} a2={a2} spacing={spacing}: {c:?}"))?;
        fans += 1;
    }
    let mut pairs = 0;
    while pairs < 1000 {
        let (r1, r2) = random_rect_pair(&mut rng);
        let ang = line_angle(&r1, &r2);
        if ang < r1.len2 / r1.len1 {
            continue;
        }
        let area = rect_intersection_area(&r1, &r2);
        ensure(area <= overlap_bound(r1.len1, r1.len2, ang) * (1.0 + 1e-12), format!("{r1:?} {r2:?}"))?;
        pairs += 1;
    }
    Ok("100 fans pass, 1000 rectangle pairs satisfy the overlap inequality".into())
}

fn random_positive_system(rng: &mut ChaCha8Rng, k: usize) -> IfsSystem {
    loop {
        let parts: Vec<(Mat2, Vec2)> = (0..k)
            .map(|_| {
                let mut e = || rng.gen_range(0.01..0.45);
                let m = Mat2::new(e(), e(), e(), e());
                (m, Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            })
            .collect();
        if let Ok(s) = IfsSystem::from_parts(&parts) {
            if (0..k).all(|i| s.linear(i).det().abs() > 1e-4) && find_invariant_cone(&s).is_ok() {
                return s;
            }
        }
    }
}

fn random_word(rng: &mut ChaCha8Rng, k: usize, max_len: usize) -> Word {
    let n = rng.gen_range(1..max_len);
    Word((0..n).map(|_| rng.gen_range(0..k)).collect())
}

fn log_phi_word(sys: &IfsSystem, w: &Word, t: f64) -> f64 {
    let s = cylinder(sys, w).unwrap().singular;
    log_phi(s.log_alpha1, s.log_alpha2, t)
}

fn axis_angle(u: Vec2, v: Vec2) -> f64 {
    u.cross(v).abs().atan2(u.dot(v).abs())
}

/// `max_u |d/du log-slope image|` by a fine grid plus golden-section search.
fn numeric_factor(m: &Mat2) -> f64 {
    let g = |u: f64| {
        let s = u.exp();
        (s * m.det() / ((m.c + m.d * s) * (m.a + m.b * s))).abs()
    };
    let (lo, step) = (-40.0, 0.01);
    let k = (0..=8000).max_by(|&i, &j| g(lo + i as f64 * step).total_cmp(&g(lo + j as f64 * step))).unwrap();
    let (mut l, mut h) = (lo + (k as f64 - 1.0) * step, lo + (k as f64 + 1.0) * step);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let (x1, x2) = (h - phi * (h - l), l + phi * (h - l));
        if g(x1) < g(x2) {
            l = x1;
        } else {
            h = x2;
        }
    }
    g(0.5 * (l + h))
}

fn inequality_suites() -> Outcome {
    const CASES: usize = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for case in 0..CASES {
        let sys = random_positive_system(&mut rng, 2);
        let cone = find_invariant_cone(&sys).unwrap();
        let (a, b) = (random_word(&mut rng, 2, 16), random_word(&mut rng, 2, 16));
        let t = rng.gen_range(0.0..3.0);
        let c = cylinder(&sys, &a).unwrap();
        let x = Vec2::from_angle(cone.theta.angle() + rng.gen_range(-0.5..0.5) * cone.beta);
        let m = c.product.mantissa;
        let log_norm = m.mul_vec(x).norm().ln() + c.product.exponent as f64 * 2f64.ln();
        ensure(log_norm >= cone.beta.cos().ln() + c.singular.log_alpha1 - 1e-12, format!("lower bound, case {case}"))?;

        let d = rng.gen_range(0.0..1.0);
        let n = a.len() as f64;
        let (base, shifted) = (log_phi_word(&sys, &a, t), log_phi_word(&sys, &a, t + d));
        ensure(
            base + d * n * sys.alpha_lower.ln() <= shifted + 1e-10 && shifted <= base + d * n * sys.alpha_bar.ln() + 1e-10,
            format!("shift sandwich, case {case}"),
        )?;

        let ab = log_phi_word(&sys, &a.concat(&b), t);
        let (pa, pb) = (base, log_phi_word(&sys, &b, t));
        ensure(ab <= pa + pb + 1e-10, format!("submultiplicativity, case {case}"))?;
        ensure(ab >= pa + pb + 2.0 * cone.beta.cos().ln() - 1e-10, format!("supermultiplicativity, case {case}"))?;

        let ang = axis_angle(m.mul_vec(c.singular.theta1), m.mul_vec(x));
        let ratio = (c.singular.log_alpha2 - c.singular.log_alpha1).exp();
        ensure(ang <= PI / (2.0 * cone.beta.cos()) * ratio + 1e-12, format!("angle bound, case {case}"))?;

        let p = Mat2::new(rng.gen_range(0.001..1.0), rng.gen_range(0.001..1.0), rng.gen_range(0.001..1.0), rng.gen_range(0.001..1.0));
        let closed = projective_factor(&p).map_err(|e| e.to_string())?;
        ensure((closed - numeric_factor(&p)).abs() <= 1e-9, format!("contraction factor, case {case}"))?;
    }
    for sys in [fixtures::edgar(0.4, 0.1), fixtures::pair64(Vec2::new(1.0, 1.0))] {
        let eta = projective_contraction(&sys).map_err(|e| e.to_string())?.eta;
        let constants: Vec<f64> = (1..=20)
            .map(|n| {
                let mut worst: f64 = 0.0;
                enumerate_level(&sys, n, 1 << 22, |c| {
                    worst = worst.max((c.singular.log_alpha2 - c.singular.log_alpha1).exp())
                })
                .unwrap();
                worst / eta.powi(n as i32)
            })
            .collect();
        let early = constants[..10].iter().cloned().fold(0.0, f64::max);
        let late = constants[10..].iter().cloned().fold(0.0, f64::max);
        ensure(late <= early * (1.0 + 1e-9), format!("aspect ratio decay: {constants:?}"))?;
    }
    Ok(format!("{CASES} cases each, zero violations; geometric decay holds on two fixtures"))
}

fn gibbs() -> Outcome {
    let sys = fixtures::edgar(0.4, 0.1);
    let b = dimension_bracket(&sys, 0.01, DEFAULT_BUDGET).map_err(|e| e.to_string())?;
    let g = gibbs_report(&sys, b.midpoint(), 12, 4096, 0, DEFAULT_BUDGET).map_err(|e| e.to_string())?;
    ensure((g.gamma_identity() - 1.0).abs() <= 1e-9, format!("identity {}", g.gamma_identity()))?;
    ensure(g.gamma1 < g.gamma2, format!("gamma1 {} >= gamma2 {}", g.gamma1, g.gamma2))?;
    Ok(format!("t={:.4}: gamma1 {:.4} < gamma2 {:.4}, identity off by {:.1e}", g.t, g.gamma1, g.gamma2, (g.gamma_identity() - 1.0).abs()))
}

fn cone_entry_and_balls() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut entered, mut skipped, mut settled) = (0, 0, 0);
    for case in 0..200 {
        let d = 3 + case % 2;
        let a = MatD::from_fn(d, d, |_, _| rng.gen_range(0.01..1.0));
        let w = VecD::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
        match cone_entry(&a, &w) {
            Ok(r) => {
                ensure(r.perron_value > r.subdominant_modulus, format!("Perron value not dominant, case {case}"))?;
                let tail = &r.trajectory_margins[r.n0..];
                ensure(tail.iter().all(|&m| m >= ENTRY_MARGIN), format!("left the cone after entry, case {case}"))?;
                let last = &tail[tail.len() / 2..];
                if last.windows(2).all(|p| p[1] >= p[0] - 1e-12) {
                    settled += 1;
                }
                entered += 1;
            }
            Err(Error::NearHyperplane) => skipped += 1,
            Err(e) => return Err(format!("case {case}: {e}")),
        }
    }
    let sep = ball_condition_check(&IfsSystemD::from(&fixtures::four_corners(0.25)), 1.0, 0.125, &[2.0, 0.5, 0.1, 0.02], 8, 0, 1 << 22)
        .map_err(|e| e.to_string())?;
    ensure(sep.pass && sep.min_delta_prime >= 0.125, format!("four corners: min delta' {}", sep.min_delta_prime))?;
    let overlap = ball_condition_check(&IfsSystemD::from(&fixtures::total_overlap()), 1.0, 0.125, &[0.5, 0.1], 8, 0, 1 << 22)
        .map_err(|e| e.to_string())?;
    ensure(!overlap.pass, "total overlap passed")?;
    Ok(format!(
        "{entered} trajectories entered and stayed in the cone ({skipped} near the hyperplane, {settled} with nondecreasing tails); four corners min delta' {:.4}; total overlap fails",
        sep.min_delta_prime
    ))
}

fn run_cli(args: &[&str], threads: &str, via_env: bool) -> Result<serde_json::Value, String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kakeya"));
    cmd.env_remove("KAKEYA_THREADS").arg("--json").args(args);
    if via_env {
        cmd.env("KAKEYA_THREADS", threads).args(["--threads", "1"]);
    } else {
        cmd.args(["--threads", threads]);
    }
    let out = cmd.output().map_err(|e| e.to_string())?;
    let mut v: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| format!("{args:?}: {e}"))?;
    v.as_object_mut().ok_or("report is not an object")?.remove("wall_time_s");
    Ok(v)
}

fn reproducibility() -> Outcome {
    let commands: [&[&str]; 6] = [
        &["check", "--example", "edgar"],
        &["dim", "--example", "edgar", "--tol", "0.02", "--gibbs", "--seed", "3"],
        &["render", "--example", "pair64", "--points", "50000", "--seed", "5"],
        &["boxdim", "--example", "sierpinski", "--tol", "0.01"],
        &["kakeya-bound", "--m", "64", "--alpha1", "1", "--alpha2", "0.015625", "--verify"],
        &["ball", "--example", "four-corners", "--ratio", "0.25", "--samples", "16", "--seed", "9"],
    ];
    for args in commands {
        let reference = serde_json::to_vec(&run_cli(args, "1", false)?).unwrap();
        for (threads, via_env) in [("2", false), ("7", false), ("4", true)] {
            let other = serde_json::to_vec(&run_cli(args, threads, via_env)?).unwrap();
            ensure(reference == other, format!("{args:?} differs at {threads} threads"))?;
        }
    }
    Ok(format!("{} commands identical at 1, 2, 7 threads and KAKEYA_THREADS=4", commands.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("similitude bracket", similitude_bracket),
        ("diagonal bracket", diagonal_bracket),
        ("edgar r=1/3", edgar_third),
        ("spectral radius", spectral),
        ("condition verdicts", verdicts),
        ("box dimension vs pressure zero", cross_validation),
        ("rectangle estimates", kakeya_estimates),
        ("inequality suites", inequality_suites),
        ("gibbs diagnostics", gibbs),
        ("cone entry and ball condition", cone_entry_and_balls),
        ("thread-count reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => eprintln!("criterion {:>2} PASS {name} ({secs:.1}s): {detail}", k + 1),
            Err(why) => {
                failed += 1;
                eprintln!("criterion {:>2} FAIL {name} ({secs:.1}s): {why}", k + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
