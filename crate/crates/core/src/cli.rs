//! Command-line front end: `region`, `verify` and `reproduce`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::{transform_channel, Cplx, SimoChannel, TransformedChannel, TxStrategy};
use crate::error::{Error, Result};
use crate::improper_gp::{multistart, GP_EPS};
use crate::proper_pure::{balance_pure_proper, RateProfile};
use crate::rates::{enhanced_upper_bound, rate_complex, rate_composite, rate_proper, CompositeChannel, RatePoint};
use crate::region::{
    beta_grid, containment_gap, contains, convex_hull_2d, preset_scenario, sweep_region, Method, RegionCurve,
    SweepOptions, PRESETS,
};
use crate::timesharing::solve_time_sharing;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "tinregion", version, about = "TIN rate regions of the two-user SIMO interference channel")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep a rate region and export it.
    Region(RegionArgs),
    /// Run the numerical self-checks on a scenario.
    Verify(VerifyArgs),
    /// Recompute a figure and compare it with the embedded reference points.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    /// Preset name (fig1, fig2, fig3) or path to a scenario JSON file.
    #[arg(long)]
    pub scenario: String,
    /// Comma-separated list of proper-pure, proper-ts, improper, hull.
    #[arg(long, value_delimiter = ',', default_value = "proper-pure")]
    pub method: Vec<String>,
    /// Number of uniform betas, or a comma-separated list of betas.
    #[arg(long, default_value = "21")]
    pub betas: String,
    /// Solver tolerance (defaults depend on the method).
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub starts: usize,
    /// Chord tolerance of the adaptive beta refinement (0 disables it).
    #[arg(long, default_value_t = 1e-2)]
    pub refine: f64,
    /// Output file (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub scenario: String,
    /// Tolerance of the time-sharing solves in the nesting check.
    #[arg(long, default_value_t = 1e-2)]
    pub eps: f64,
    #[arg(long, default_value = "21")]
    pub betas: String,
    /// Seed of the random strategies.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Skip the region nesting check.
    #[arg(long)]
    pub skip_nesting: bool,
    /// Report file (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// fig1, fig2 or fig3.
    pub figure: String,
    #[arg(long, default_value = "21")]
    pub betas: String,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub starts: usize,
    /// Tolerance of the balanced time-sharing solve.
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    /// Output directory for the CSV files and the report.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Resolved run settings shared by the subcommands.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: String,
    pub methods: Vec<Method>,
    pub betas: Vec<f64>,
    pub sweep: SweepOptions,
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub format: Format,
}

impl RegionArgs {
    pub fn config(&self) -> Result<RunConfig> {
        let methods = self
            .method
            .iter()
            .map(|m| Method::parse(m.trim()))
            .collect::<Result<Vec<_>>>()?;
        if methods.is_empty() {
            return Err(Error::InvalidArgument("no method given".into()));
        }
        let mut sweep = SweepOptions {
            seed: self.seed,
            starts: self.starts,
            refine_tol: (self.refine > 0.0).then_some(self.refine),
            ..SweepOptions::default()
        };
        if !(self.refine >= 0.0 && self.refine.is_finite()) {
            return Err(Error::InvalidArgument(format!("--refine {} must be >= 0", self.refine)));
        }
        if let Some(eps) = self.eps {
            check_eps(eps)?;
            sweep.eps_pure = eps;
            sweep.eps_ts = eps;
            sweep.eps_gp = eps;
        }
        if self.starts == 0 {
            return Err(Error::InvalidArgument("--starts must be >= 1".into()));
        }
        Ok(RunConfig {
            scenario: self.scenario.clone(),
            methods,
            betas: parse_betas(&self.betas)?,
            sweep,
            out: self.out.clone(),
            format: self.format,
        })
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("eps {eps} must be > 0")))
    }
}

/// `"21"` gives 21 uniform betas; `"0,0.5,1"` is taken literally.
pub fn parse_betas(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    if !spec.contains(',') {
        if let Ok(n) = spec.parse::<usize>() {
            if n == 0 {
                return Err(Error::InvalidArgument("empty beta grid".into()));
            }
            return Ok(beta_grid(n));
        }
    }
    let betas = spec
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad beta '{s}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(b) = betas.iter().find(|b| !(0.0..=1.0).contains(*b)) {
        return Err(Error::InvalidArgument(format!("beta {b} outside [0, 1]")));
    }
    Ok(betas)
}

/// A preset name or a JSON scenario file.
pub fn load_scenario(arg: &str) -> Result<SimoChannel> {
    if PRESETS.contains(&arg) {
        return preset_scenario(arg);
    }
    let text = std::fs::read_to_string(arg)?;
    Ok(serde_json::from_str(&text)?)
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn fmt_point(p: Option<RatePoint>) -> String {
    match p {
        Some(p) => format!("({:.4}, {:.4})", p.r1, p.r2),
        None => "n/a".into(),
    }
}

pub fn cmd_region(cfg: &RunConfig) -> Result<u8> {
    let ch = load_scenario(&cfg.scenario)?;
    let mut curves = Vec::with_capacity(cfg.methods.len());
    let mut failures = 0;
    for &method in &cfg.methods {
        let start = Instant::now();
        let curve = sweep_region(&ch, method, &cfg.betas, &cfg.sweep)?;
        let pts = curve.points();
        eprintln!(
            "{method}: {} samples, {} failed, ends {} .. {}, balanced {}, {:.2} s",
            curve.samples.len(),
            curve.failures(),
            fmt_point(pts.first().copied()),
            fmt_point(pts.last().copied()),
            fmt_point(curve.at_beta(0.5)),
            start.elapsed().as_secs_f64()
        );
        for s in curve.samples.iter().filter(|s| s.point.is_none()) {
            eprintln!("  beta {}: {}", s.beta, s.error.as_deref().unwrap_or("failed"));
        }
        failures += curve.failures();
        curves.push(curve);
    }
    let text = match cfg.format {
        Format::Csv => {
            let mut out = String::from("method,beta,r1,r2\n");
            for c in &curves {
                c.write_csv_rows(&mut out);
            }
            out
        }
        Format::Json if curves.len() == 1 => curves[0].to_json()?,
        Format::Json => serde_json::to_string_pretty(&curves)?,
    };
    write_output(cfg.out.as_deref(), &text)?;
    Ok(if failures > 0 { EXIT_CHECK_FAILED } else { EXIT_OK })
}

/// Outcome of one numerical check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub allowed: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    /// Passes when `measured <= allowed`.
    pub fn at_most(name: &str, measured: f64, allowed: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            allowed,
            pass: measured <= allowed,
            detail: None,
        }
    }

    fn failed(name: &str, allowed: f64, err: &Error) -> Self {
        Check {
            name: name.into(),
            measured: f64::NAN,
            allowed,
            pass: false,
            detail: Some(err.to_string()),
        }
    }

    fn with_detail(mut self, detail: String) -> Self {
        self.detail = Some(detail);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub scenario: String,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl Report {
    fn new(scenario: &str, checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Report {
            scenario: scenario.into(),
            checks,
            pass,
        }
    }
}

fn random_strategy(rng: &mut ChaCha8Rng, p: [f64; 2], max_frac: f64) -> TxStrategy {
    let mut draw = |pk: f64| {
        let c = rng.gen_range(0.0..=pk);
        let ct = Cplx::from_polar(rng.gen_range(0.0..=max_frac) * c, rng.gen_range(0.0..std::f64::consts::TAU));
        (c, ct)
    };
    let (c1, ct1) = draw(p[0]);
    let (c2, ct2) = draw(p[1]);
    TxStrategy::new(c1, c2, ct1, ct2)
}

fn guarded(name: &str, allowed: f64, f: impl FnOnce() -> Result<Check>) -> Check {
    f().unwrap_or_else(|e| Check::failed(name, allowed, &e))
}

/// Determinant formula against the composite real formula.
pub fn check_formula_equivalence(ch: &SimoChannel, rng: &mut ChaCha8Rng, n: usize) -> Check {
    guarded("formula-equivalence", 1e-10, || {
        let mut worst: f64 = 0.0;
        for _ in 0..n {
            let x = random_strategy(rng, ch.powers(), 1.0);
            let [m1, m2] = x.composite()?;
            let a = rate_complex(ch, &x)?;
            let b = rate_composite(ch, &m1, &m2)?;
            worst = worst.max((a.r1 - b.r1).abs()).max((a.r2 - b.r2).abs());
        }
        Ok(Check::at_most("formula-equivalence", worst, 1e-10))
    })
}

/// Rates are unchanged by the two-antenna transformation.
pub fn check_transform_invariance(ch: &SimoChannel, rng: &mut ChaCha8Rng, n: usize) -> Check {
    guarded("transform-rate-invariance", 1e-10, || {
        let tc = transform_channel(ch)?;
        let tch = tc.channel();
        let mut worst: f64 = 0.0;
        for _ in 0..n {
            let x = random_strategy(rng, ch.powers(), 1.0);
            let a = rate_complex(ch, &x)?;
            let b = rate_complex(&tch, &tc.map_strategy(&x))?;
            worst = worst.max((a.r1 - b.r1).abs()).max((a.r2 - b.r2).abs());
        }
        Ok(Check::at_most("transform-rate-invariance", worst, 1e-10))
    })
}

/// Proper rates of the transformed channel do not depend on `θ`.
pub fn check_theta_independence(ch: &SimoChannel, rng: &mut ChaCha8Rng, n: usize) -> Check {
    guarded("theta-independence", 1e-10, || {
        let tc = transform_channel(ch)?;
        let mut worst: f64 = 0.0;
        for _ in 0..n {
            let p1 = rng.gen_range(0.0..=ch.p1);
            let p2 = rng.gen_range(0.0..=ch.p2);
            let theta = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let a = rate_proper(&tc.channel(), p1, p2)?;
            let b = rate_proper(&TransformedChannel { theta, ..tc }.channel(), p1, p2)?;
            worst = worst.max((a.r1 - b.r1).abs()).max((a.r2 - b.r2).abs());
        }
        Ok(Check::at_most("theta-independence", worst, 1e-10))
    })
}

/// The enhanced-channel bound dominates the achieved rates.
pub fn check_enhancement(ch: &SimoChannel, rng: &mut ChaCha8Rng, n: usize) -> Check {
    guarded("enhancement-dominance", 1e-10, || {
        let tc = transform_channel(ch)?;
        let mut worst: f64 = 0.0;
        for _ in 0..n {
            let x = random_strategy(rng, ch.powers(), 1.0);
            let b = enhanced_upper_bound(&tc, &x)?;
            let r = rate_complex(ch, &x)?;
            worst = worst.max(r.r1 - b.r1).max(r.r2 - b.r2);
        }
        Ok(Check::at_most("enhancement-dominance", worst, 1e-10))
    })
}

/// Analytic weighted-sum-rate gradient against central differences.
pub fn check_gradient(ch: &SimoChannel, rng: &mut ChaCha8Rng, n: usize) -> Check {
    guarded("gradient", 1e-5, || {
        let cc = CompositeChannel::new(ch);
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for _ in 0..n {
            let x = random_strategy(rng, ch.powers(), 0.9);
            let m = x.composite()?.map(|c| *c.matrix());
            let w = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let g = cc
                .weighted_gradient(w, &m)
                .ok_or(Error::NonFiniteRate { user: 0 })?;
            let f = |m: &[Matrix2<f64>; 2]| {
                let r = cc.rates(m);
                w[0] * r[0] + w[1] * r[1]
            };
            for u in 0..2 {
                for (i, j) in [(0, 0), (1, 1), (0, 1)] {
                    let mut e = Matrix2::zeros();
                    e[(i, j)] = 1.0;
                    e[(j, i)] = 1.0;
                    let (mut up, mut dn) = (m, m);
                    up[u] += e * h;
                    dn[u] -= e * h;
                    let fd = (f(&up) - f(&dn)) / (2.0 * h);
                    let an = (g[u] * e).trace();
                    worst = worst.max((fd - an).abs() / an.abs().max(1e-3));
                }
            }
        }
        Ok(Check::at_most("gradient", worst, 1e-5))
    })
}

/// Pure region inside its hull, hull inside the time-sharing region.
pub fn check_nesting(ch: &SimoChannel, betas: &[f64], eps_ts: f64) -> Vec<Check> {
    let opts = SweepOptions {
        eps_ts,
        ..SweepOptions::default()
    };
    let curves = sweep_region(ch, Method::ProperPure, betas, &opts).and_then(|pure| {
        let hull = convex_hull_2d(&pure.points());
        let ts = sweep_region(ch, Method::ProperTimesharing, betas, &opts)?;
        Ok((pure, hull, ts))
    });
    let (pure, hull, ts) = match curves {
        Ok(c) => c,
        Err(e) => {
            return vec![
                Check::failed("nesting-pure-in-hull", 2e-2, &e),
                Check::failed("nesting-hull-in-timesharing", 2e-2, &e),
            ]
        }
    };
    let gap = |name: &str, inner: &RegionCurve, outer: &RegionCurve| {
        let failed = inner.failures() + outer.failures();
        guarded(name, 2e-2, || {
            let c = Check::at_most(name, containment_gap(inner, outer)?, 2e-2);
            Ok(if failed > 0 {
                Check { pass: false, ..c }.with_detail(format!("{failed} failed samples"))
            } else {
                c
            })
        })
    };
    vec![
        gap("nesting-pure-in-hull", &pure, &hull),
        gap("nesting-hull-in-timesharing", &hull, &ts),
    ]
}

pub fn run_verify(scenario: &str, ch: &SimoChannel, args: &VerifyArgs) -> Result<Report> {
    check_eps(args.eps)?;
    let betas = parse_betas(&args.betas)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut checks = vec![
        check_formula_equivalence(ch, &mut rng, 1000),
        check_transform_invariance(ch, &mut rng, 100),
        check_theta_independence(ch, &mut rng, 100),
        check_enhancement(ch, &mut rng, 200),
        check_gradient(ch, &mut rng, 50),
    ];
    if !args.skip_nesting {
        checks.extend(check_nesting(ch, &betas, args.eps));
    }
    Ok(Report::new(scenario, checks))
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<u8> {
    let ch = load_scenario(&args.scenario)?;
    let report = run_verify(&args.scenario, &ch, args)?;
    for c in &report.checks {
        eprintln!(
            "{} {}: measured {:.3e}, allowed {:.1e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.allowed
        );
    }
    write_output(args.out.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    Ok(if report.pass { EXIT_OK } else { EXIT_CHECK_FAILED })
}

/// Published figure values that `reproduce` compares against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferencePoint {
    pub figure: &'static str,
    pub label: &'static str,
    pub kind: ReferenceKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum ReferenceKind {
    /// Single-user rate of user `user` within `tol`.
    Corner { user: usize, rate: f64, tol: f64 },
    /// Balanced proper pure point.
    PureBalanced { rate: f64, tol: f64 },
    /// Balanced coded time-sharing point.
    TimeSharingBalanced { rate: f64, tol: f64 },
    /// Best improper sum rate with equal weights is at least `min_sum`.
    ImproperSum { min_sum: f64 },
    /// Some improper terminal point lies within `tol` of `(r1, r2)` per coordinate.
    ImproperPoint { r1: f64, r2: f64, tol: f64 },
}

pub const REFERENCE_POINTS: [ReferencePoint; 9] = [
    ReferencePoint {
        figure: "fig1",
        label: "user 1 single-user rate",
        kind: ReferenceKind::Corner { user: 0, rate: 4.22659234751577, tol: 1e-3 },
    },
    ReferencePoint {
        figure: "fig1",
        label: "user 2 single-user rate",
        kind: ReferenceKind::Corner { user: 1, rate: 4.77534426964198, tol: 1e-3 },
    },
    ReferencePoint {
        figure: "fig1",
        label: "proper pure balanced point",
        kind: ReferenceKind::PureBalanced { rate: 1.9174, tol: 1e-2 },
    },
    ReferencePoint {
        figure: "fig1",
        label: "proper time-sharing balanced point",
        kind: ReferenceKind::TimeSharingBalanced { rate: 3.04664756017678, tol: 2e-2 },
    },
    ReferencePoint {
        figure: "fig1",
        label: "improper sum rate",
        kind: ReferenceKind::ImproperSum { min_sum: 6.0 },
    },
    ReferencePoint {
        figure: "fig2",
        label: "proper pure balanced point",
        kind: ReferenceKind::PureBalanced { rate: 2.87326975409803, tol: 1e-2 },
    },
    ReferencePoint {
        figure: "fig2",
        label: "proper time-sharing balanced point",
        kind: ReferenceKind::TimeSharingBalanced { rate: 3.59405774404157, tol: 2e-2 },
    },
    ReferencePoint {
        figure: "fig3",
        label: "improper point",
        kind: ReferenceKind::ImproperPoint { r1: 4.2266, r2: 3.2763, tol: 0.1 },
    },
    ReferencePoint {
        figure: "fig3",
        label: "user 1 single-user rate",
        kind: ReferenceKind::Corner { user: 0, rate: 4.22659234751577, tol: 1e-3 },
    },
];

fn compare_reference(ch: &SimoChannel, r: &ReferencePoint, args: &ReproduceArgs, improper: &[RatePoint]) -> Check {
    let name = format!("{} {}", r.figure, r.label);
    let balanced = RateProfile::balanced();
    let dev = |got: RatePoint, target: [f64; 2], tol: f64| {
        let d = (got.r1 - target[0]).abs().max((got.r2 - target[1]).abs());
        Check::at_most(&name, d, tol).with_detail(format!(
            "got ({:.6}, {:.6}), reference ({}, {})",
            got.r1, got.r2, target[0], target[1]
        ))
    };
    let res: Result<Check> = (|| {
        Ok(match r.kind {
            ReferenceKind::Corner { user, rate, tol } => {
                let profile = RateProfile::from_beta(if user == 0 { 1.0 } else { 0.0 })?;
                let got = balance_pure_proper(ch, &profile, 1e-9)?.rates;
                let target = if user == 0 { [rate, 0.0] } else { [0.0, rate] };
                dev(got, target, tol)
            }
            ReferenceKind::PureBalanced { rate, tol } => {
                dev(balance_pure_proper(ch, &balanced, 1e-9)?.rates, [rate, rate], tol)
            }
            ReferenceKind::TimeSharingBalanced { rate, tol } => {
                let (_, sol) = solve_time_sharing(ch, &balanced, args.eps)?;
                dev(sol.rate_point(), [rate, rate], tol)
            }
            ReferenceKind::ImproperSum { min_sum } => {
                let best = improper.iter().map(|p| p.sum()).fold(f64::NEG_INFINITY, f64::max);
                Check {
                    name: name.clone(),
                    measured: best,
                    allowed: min_sum,
                    pass: best >= min_sum,
                    detail: Some(format!("best sum {best:.6}, required >= {min_sum}")),
                }
            }
            ReferenceKind::ImproperPoint { r1, r2, tol } => {
                let best = improper
                    .iter()
                    .map(|p| (p.r1 - r1).abs().max((p.r2 - r2).abs()))
                    .fold(f64::INFINITY, f64::min);
                Check::at_most(&name, best, tol).with_detail(format!("closest terminal point deviation {best:.6}"))
            }
        })
    })();
    res.unwrap_or_else(|e| Check::failed(&name, f64::NAN, &e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReproduceReport {
    pub figure: String,
    pub files: Vec<PathBuf>,
    pub report: Report,
}

pub fn run_reproduce(args: &ReproduceArgs) -> Result<ReproduceReport> {
    let figure = args.figure.as_str();
    let ch = preset_scenario(figure)?;
    check_eps(args.eps)?;
    let betas = parse_betas(&args.betas)?;
    let opts = SweepOptions {
        seed: args.seed,
        starts: args.starts,
        ..SweepOptions::default()
    };
    std::fs::create_dir_all(&args.out)?;
    let mut files = Vec::new();
    let mut curves = Vec::new();
    let mut checks = Vec::new();
    for method in Method::ALL {
        let start = Instant::now();
        let curve = sweep_region(&ch, method, &betas, &opts)?;
        eprintln!("{figure} {method}: {:.2} s", start.elapsed().as_secs_f64());
        let path = args.out.join(format!("{figure}_{}.csv", method.tag()));
        std::fs::write(&path, curve.to_csv())?;
        files.push(path);
        if curve.failures() > 0 {
            checks.push(Check {
                name: format!("{figure} {method} sweep"),
                measured: curve.failures() as f64,
                allowed: 0.0,
                pass: false,
                detail: Some("failed samples".into()),
            });
        }
        curves.push(curve);
    }
    let improper: Vec<RatePoint> = multistart(&ch, [1.0, 1.0], args.starts, args.seed, GP_EPS)?
        .runs
        .iter()
        .map(|r| r.rates)
        .collect();
    for r in REFERENCE_POINTS.iter().filter(|r| r.figure == figure) {
        checks.push(compare_reference(&ch, r, args, &improper));
    }
    let ts = &curves[1];
    let outside = improper
        .iter()
        .filter(|p| !contains(ts, **p, 2e-2).unwrap_or(false))
        .count();
    checks.push(Check::at_most(&format!("{figure} improper points inside time-sharing region"), outside as f64, 0.0));

    let report = Report::new(figure, checks);
    let path = args.out.join(format!("{figure}_report.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
    files.push(path);
    Ok(ReproduceReport {
        figure: figure.into(),
        files,
        report,
    })
}

pub fn cmd_reproduce(args: &ReproduceArgs) -> Result<u8> {
    let out = run_reproduce(args)?;
    let mut text = String::new();
    for c in &out.report.checks {
        let _ = writeln!(
            text,
            "{} {}: measured {:.6}, allowed {}{}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.allowed,
            c.detail.as_deref().map(|d| format!(" ({d})")).unwrap_or_default()
        );
    }
    for f in &out.files {
        let _ = writeln!(text, "wrote {}", f.display());
    }
    print!("{text}");
    Ok(if out.report.pass { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("TINREGION_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::InvalidArgument(format!("TINREGION_THREADS='{v}' is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// Parses `args` and runs the selected subcommand.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    let res = configure_threads().and_then(|_| match &cli.command {
        Command::Region(a) => a.config().and_then(|cfg| cmd_region(&cfg)),
        Command::Verify(a) => cmd_verify(a),
        Command::Reproduce(a) => cmd_reproduce(a),
    });
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
