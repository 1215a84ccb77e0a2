use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use kakeya_core::conditions::{full_report, Verdict};
use kakeya_core::geom::{
    self, box_dimension, fan, kakeya_bound, rasterize_points, rasterize_rects, verify_kakeya_estimate, DeltaRange,
    RenderMode,
};
use kakeya_core::pressure::{dimension_bracket, gibbs_report, perturbation_bounds};
use kakeya_core::tractable::{ball_condition_check, diameter_comparability, load_system_d, IfsSystemD};
use kakeya_core::{fixtures, load_system, Error, IfsSystem, Vec2, DEFAULT_BUDGET};

mod report;
mod svg;

use report::{BoxCrossCheck, KakeyaBoundResult, PerturbResult, RenderResult, RunReport};

#[derive(Parser)]
#[command(name = "kakeya", version, about = "Dimension and Kakeya-type checks for planar self-affine sets")]
struct Cli {
    /// Emit the machine-readable JSON report on stdout.
    #[arg(long, global = true)]
    json: bool,

    /// Worker threads (default: all cores). KAKEYA_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the Kakeya-type conditions and report a verdict.
    Check {
        #[command(flatten)]
        sys: SystemArgs,
        /// SVG of the invariant cone and the column directions.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certified bracket for the zero of the pressure.
    Dim {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, default_value_t = 0.01)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        /// Also sample the Gibbs diagnostics at the bracket midpoint.
        #[arg(long)]
        gibbs: bool,
        #[arg(long, default_value_t = 12)]
        gibbs_level: usize,
        #[arg(long, default_value_t = 4096)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Render the attractor by the chaos game.
    Render {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, default_value_t = 200_000)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Raster cells along the longer side.
        #[arg(long, default_value_t = 1024)]
        pixels: usize,
        /// Output image; `.svg` draws points, anything else is written as PGM.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the box dimension and compare it with the pressure bracket.
    Boxdim {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        /// Largest radius as a fraction of the attractor diameter.
        #[arg(long)]
        max_fraction: Option<f64>,
        /// Number of radii.
        #[arg(long)]
        count: Option<usize>,
        /// Ratio between consecutive radii.
        #[arg(long)]
        delta_ratio: Option<f64>,
        /// Largest radii left out of the fit.
        #[arg(long)]
        exclude_largest: Option<usize>,
        /// Tolerance of the bracket used for the cross-check.
        #[arg(long, default_value_t = 0.01)]
        tol: f64,
        /// Skip the pressure bracket.
        #[arg(long)]
        no_bracket: bool,
    },
    /// Lower bound for the area of a union of rectangles with separated directions.
    KakeyaBound {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        alpha1: f64,
        #[arg(long)]
        alpha2: f64,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        /// Rasterize a fan of `m` rectangles and check the bound against it.
        #[arg(long)]
        verify: bool,
        /// Angle between consecutive fan rectangles (default alpha2/alpha1).
        #[arg(long)]
        spacing: Option<f64>,
        /// Raster cell size (default alpha2/32).
        #[arg(long)]
        cell: Option<f64>,
        /// `.svg` draws the fan, anything else is written as PGM.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certified shift of the pressure under entrywise perturbation.
    Perturb {
        #[command(flatten)]
        sys: SystemArgs,
        /// Entrywise perturbation size.
        #[arg(long, default_value_t = 1e-3)]
        size: f64,
        /// Determinant cap (default midway between max |det| and 1).
        #[arg(long)]
        d_prime: Option<f64>,
        /// Also bracket the unperturbed system and widen it by the shift.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
    },
    /// Finite-scale ball condition and diameter comparability in any dimension.
    Ball {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 0.125)]
        delta: f64,
        /// Decreasing radii, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.1,0.02")]
        scales: Vec<f64>,
        #[arg(long, default_value_t = 8)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1 << 22)]
        budget: u64,
        /// Also measure diameter comparability up to this level.
        #[arg(long)]
        comparability: Option<usize>,
    },
    /// List the built-in fixtures.
    Examples,
}

#[derive(Args, Clone)]
struct SystemArgs {
    /// Built-in fixture (see `examples`).
    #[arg(long, conflicts_with = "config")]
    example: Option<String>,
    /// JSON configuration `{"maps": [{"A": [[..],[..]], "t": [..]}, ..]}`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0.4)]
    r: f64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, value_parser = parse_vec2, allow_hyphen_values = true)]
    a1: Option<Vec2>,
    #[arg(long, value_parser = parse_vec2, allow_hyphen_values = true)]
    a2: Option<Vec2>,
    #[arg(long, default_value_t = 5)]
    kappa: usize,
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
}

fn parse_vec2(s: &str) -> Result<Vec2, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected X,Y, got {s:?}"));
    }
    let x = parts[0].trim().parse::<f64>().map_err(|e| e.to_string())?;
    let y = parts[1].trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok(Vec2::new(x, y))
}

impl SystemArgs {
    fn load(&self) -> anyhow::Result<IfsSystem> {
        if let Some(path) = &self.config {
            let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            return Ok(load_system(&bytes)?);
        }
        let name = self.example.as_deref().ok_or_else(|| anyhow!("need --example NAME or --config PATH"))?;
        Ok(match name {
            "edgar" => {
                let a1 = self.a1.unwrap_or(Vec2::new(-0.3, -0.3));
                let a2 = self.a2.unwrap_or(Vec2::new(-a1.x, -a1.y));
                fixtures::edgar_with(self.r, self.eps, a1, a2)
            }
            "pair64" => fixtures::pair64(self.a2.unwrap_or(Vec2::new(1.0, 1.0))),
            "family65" => {
                if self.kappa < 3 {
                    bail!("family65 needs --kappa >= 3");
                }
                fixtures::family65(self.kappa)
            }
            "unit-interval" => fixtures::unit_interval(),
            "diagonal-triple" => fixtures::diagonal_triple(),
            "four-corners" => fixtures::four_corners(self.ratio),
            "sierpinski" => fixtures::sierpinski(),
            "total-overlap" => fixtures::total_overlap(),
            other => bail!("unknown example {other:?}; run `kakeya examples`"),
        })
    }

    fn load_d(&self) -> anyhow::Result<IfsSystemD> {
        if let Some(path) = &self.config {
            let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            return Ok(load_system_d(&bytes)?);
        }
        Ok(IfsSystemD::from(&self.load()?))
    }

    fn digest(&self) -> anyhow::Result<String> {
        if let Some(path) = &self.config {
            let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            return Ok(report::digest(&bytes));
        }
        Ok(report::digest(&serde_json::to_vec(&self.load()?.to_config())?))
    }
}

fn thread_count(flag: Option<usize>) -> anyhow::Result<Option<usize>> {
    match std::env::var("KAKEYA_THREADS") {
        Ok(v) if !v.trim().is_empty() => {
            Ok(Some(v.trim().parse().with_context(|| format!("KAKEYA_THREADS={v:?} is not a count"))?))
        }
        _ => Ok(flag),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn is_svg(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("svg"))
}

/// Outcome of one command: the report and the exit code it implies.
struct Outcome {
    report: RunReport,
    code: u8,
    text: String,
}

fn run(command: &Command) -> anyhow::Result<Outcome> {
    let mut report = RunReport::new(command_name(command));
    let mut code = 0;
    let mut text = String::new();
    match command {
        Command::Check { sys, out } => {
            let s = sys.load()?;
            report.config_digest = Some(sys.digest()?);
            let r = full_report(&s);
            code = match r.verdict {
                Verdict::Yes => 0,
                Verdict::No => 2,
                Verdict::Unknown => 3,
            };
            text.push_str(&format!("K1a: {} ({})\n", r.k1a.holds, r.k1a.witness));
            text.push_str(&format!("K1b: {} ({})\n", r.k1b.holds, r.k1b.witness));
            text.push_str(&format!("K1c: {} ({})\n", r.k1c.holds, r.k1c.witness));
            for e in &r.projection {
                text.push_str(&format!("projection: {} -> {}\n", e.describe(), e.certifies()));
            }
            if let Some(o) = &r.obstruction {
                text.push_str(&format!("obstruction: {o}\n"));
            }
            if let Some(c) = &r.certified_by {
                text.push_str(&format!("certified by: {c}\n"));
            }
            text.push_str(&format!("verdict: {}\n", serde_json::to_value(r.verdict)?.as_str().unwrap_or("?")));
            if let Some(path) = out {
                write_file(path, svg::cone(&s, r.cone.as_ref()).as_bytes())?;
            }
            report.results.kakeya = Some(r);
        }
        Command::Dim { sys, tol, budget, gibbs, gibbs_level, samples, seed } => {
            let s = sys.load()?;
            report.config_digest = Some(sys.digest()?);
            let b = match dimension_bracket(&s, *tol, *budget) {
                Ok(b) => b,
                Err(Error::BracketBudget(best)) => {
                    report.error = Some(Error::BracketBudget(best.clone()).to_string());
                    report.results.bracket = Some(*best);
                    return Ok(Outcome { text: String::new(), report, code: 1 });
                }
                Err(e) => return Err(e.into()),
            };
            text.push_str(&format!(
                "bracket: [{:.12}, {:.12}] width {:.3e} at level {} ({} lower bound)\n",
                b.t_lo,
                b.t_hi,
                b.width(),
                b.n,
                b.lower_source
            ));
            if *gibbs {
                let g = gibbs_report(&s, b.midpoint(), *gibbs_level, *samples, *seed, *budget)?;
                report.seeds.push(*seed);
                text.push_str(&format!(
                    "gibbs at t={:.6}: gamma1={:.6} gamma2={:.6} identity={:.12}\n",
                    g.t,
                    g.gamma1,
                    g.gamma2,
                    g.gamma_identity()
                ));
                report.results.gibbs = Some(g);
            }
            report.results.bracket = Some(b);
        }
        Command::Render { sys, points, seed, pixels, out } => {
            let s = sys.load()?;
            report.config_digest = Some(sys.digest()?);
            report.seeds.push(*seed);
            let cloud = geom::render(&s, RenderMode::ChaosGame { count: *points }, u64::MAX, *seed)?;
            let raster = rasterize_points(&cloud.points, *pixels);
            let (lo, hi) = cloud.bounding_box();
            if let Some(path) = out {
                if is_svg(path) {
                    write_file(path, svg::points(&cloud.points).as_bytes())?;
                } else {
                    write_file(path, &raster.to_pgm())?;
                }
            }
            text.push_str(&format!(
                "{} points in [{:.6}, {:.6}] x [{:.6}, {:.6}], {} of {}x{} cells occupied\n",
                cloud.points.len(),
                lo.x,
                hi.x,
                lo.y,
                hi.y,
                raster.count(),
                raster.width,
                raster.height
            ));
            report.results.render = Some(RenderResult {
                points: cloud.points.len(),
                bounding_box: (lo, hi),
                width: raster.width,
                height: raster.height,
                occupied: raster.count(),
            });
        }
        Command::Boxdim { sys, budget, max_fraction, count, delta_ratio, exclude_largest, tol, no_bracket } => {
            let s = sys.load()?;
            report.config_digest = Some(sys.digest()?);
            let mut range = DeltaRange::default();
            if let Some(v) = max_fraction {
                range.max_fraction = *v;
            }
            if let Some(v) = count {
                range.count = *v;
            }
            if let Some(v) = delta_ratio {
                range.ratio = *v;
            }
            if let Some(v) = exclude_largest {
                range.exclude_largest = *v;
            }
            let est = box_dimension(&s, range, *budget)?;
            text.push_str(&format!(
                "box dimension estimate {:.4} (stderr {:.4}) from {} points\n",
                est.dim_estimate, est.stderr, est.points
            ));
            if !no_bracket {
                let b = match dimension_bracket(&s, *tol, *budget) {
                    Ok(b) => b,
                    Err(Error::BracketBudget(best)) => *best,
                    Err(e) => return Err(e.into()),
                };
                let difference = est.dim_estimate - b.midpoint();
                text.push_str(&format!(
                    "pressure zero in [{:.6}, {:.6}]; estimate - midpoint = {:+.4}\n",
                    b.t_lo, b.t_hi, difference
                ));
                report.results.cross_check = Some(BoxCrossCheck { bracket_midpoint: b.midpoint(), difference });
                report.results.bracket = Some(b);
            }
            report.results.box_dimension = Some(est);
        }
        Command::KakeyaBound { m, alpha1, alpha2, tau, verify, spacing, cell, out } => {
            let bound = kakeya_bound(*m, *alpha1, *alpha2, *tau)?;
            text.push_str(&format!("area bound {bound:.6e}\n"));
            let mut result = KakeyaBoundResult { bound, check: None };
            if *verify || out.is_some() {
                let rects = fan(*m, *alpha1, *alpha2, spacing.unwrap_or(alpha2 / alpha1));
                let f = rasterize_rects(&rects, cell.unwrap_or(alpha2 / 32.0));
                if let Some(path) = out {
                    if is_svg(path) {
                        write_file(path, svg::rects(&rects).as_bytes())?;
                    } else {
                        write_file(path, &f.to_pgm())?;
                    }
                }
                if *verify {
                    let c = verify_kakeya_estimate(&rects, &f, *tau)?;
                    text.push_str(&format!(
                        "fan of {m}: measured {:.6e} (bound {:.6e}) -> {}\n",
                        c.measured,
                        c.bound,
                        if c.pass { "pass" } else { "FAIL" }
                    ));
                    if !c.pass {
                        code = 1;
                    }
                    result.check = Some(c);
                }
            }
            report.results.kakeya_bound = Some(result);
        }
        Command::Perturb { sys, size, d_prime, tol, budget } => {
            let s = sys.load()?;
            report.config_digest = Some(sys.digest()?);
            let d_max = s.maps().iter().map(|m| m.linear.det().abs()).fold(0.0, f64::max);
            let p = perturbation_bounds(&s, *size, d_prime.unwrap_or(0.5 * (d_max + 1.0)))?;
            text.push_str(&format!(
                "pressure shift in [{:.6e}, {:.6e}]; dimension moves by at most {:.6e}\n",
                p.pressure_shift.0, p.pressure_shift.1, p.dimension_shift
            ));
            let mut widened = None;
            if let Some(tol) = tol {
                let b = dimension_bracket(&s, *tol, *budget)?;
                let w = (b.t_lo - p.dimension_shift, b.t_hi + p.dimension_shift);
                text.push_str(&format!("perturbed systems have pressure zero in [{:.6}, {:.6}]\n", w.0, w.1));
                widened = Some(w);
                report.results.bracket = Some(b);
            }
            report.results.perturbation = Some(PerturbResult { bounds: p, widened_bracket: widened });
        }
        Command::Ball { sys, t, delta, scales, samples, seed, budget, comparability } => {
            let s = sys.load_d()?;
            report.config_digest = Some(sys.digest()?);
            report.seeds.push(*seed);
            let r = ball_condition_check(&s, *t, *delta, scales, *samples, *seed, *budget)?;
            text.push_str(&format!(
                "ball condition at delta={delta}: {} (min delta' {:.4}, {} cylinders)\n",
                if r.pass { "pass" } else { "fail" },
                r.min_delta_prime,
                r.cylinders_visited
            ));
            if let Some(level) = comparability {
                let c = diameter_comparability(&s, *level, *budget)?;
                text.push_str(&format!("diam/alpha1 in [{:.4}, {:.4}] up to level {level}\n", c.c_low, c.c_high));
                report.results.comparability = Some(c);
            }
            report.results.ball_condition = Some(r);
        }
        Command::Examples => {
            let list = fixtures::catalog();
            for f in &list {
                text.push_str(&format!("{:<16} {}\n{:<16} {}\n", f.name, f.parameters, "", f.description));
            }
            report.results.examples = Some(list);
        }
    }
    Ok(Outcome { report, code, text })
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Check { .. } => "check",
        Command::Dim { .. } => "dim",
        Command::Render { .. } => "render",
        Command::Boxdim { .. } => "boxdim",
        Command::KakeyaBound { .. } => "kakeya-bound",
        Command::Perturb { .. } => "perturb",
        Command::Ball { .. } => "ball",
        Command::Examples => "examples",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let threads = match thread_count(cli.threads) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let pool = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(&cli.command)) {
        Ok(mut outcome) => {
            outcome.report.wall_time_s = start.elapsed().as_secs_f64();
            if cli.json {
                match serde_json::to_string_pretty(&outcome.report) {
                    Ok(s) => println!("{s}"),
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::from(1);
                    }
                }
            } else {
                print!("{}", outcome.text);
            }
            if let Some(e) = &outcome.report.error {
                eprintln!("error: {e}");
            }
            ExitCode::from(outcome.code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
