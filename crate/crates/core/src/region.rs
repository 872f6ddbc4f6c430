//! Rate-region sweeps, convex hulls, containment and export.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{Cplx, SimoChannel};
use crate::error::{Error, Result};
use crate::improper_gp::{multistart, GP_EPS};
use crate::proper_pure::{balance_pure_proper, RateProfile};
use crate::rates::RatePoint;
use crate::timesharing::solve_time_sharing;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ProperPure,
    ProperTimesharing,
    ImproperHeuristic,
    ConvexHull,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::ProperPure,
        Method::ProperTimesharing,
        Method::ImproperHeuristic,
        Method::ConvexHull,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Method::ProperPure => "proper-pure",
            Method::ProperTimesharing => "proper-timesharing",
            Method::ImproperHeuristic => "improper-heuristic",
            Method::ConvexHull => "convex-hull",
        }
    }

    /// Accepts the output tags and the short command-line names.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "proper-pure" | "pure" => Ok(Method::ProperPure),
            "proper-ts" | "proper-timesharing" | "ts" => Ok(Method::ProperTimesharing),
            "improper" | "improper-heuristic" => Ok(Method::ImproperHeuristic),
            "hull" | "convex-hull" => Ok(Method::ConvexHull),
            _ => Err(Error::InvalidArgument(format!("unknown method '{s}'"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSample {
    pub beta: f64,
    /// `None` if the solver failed for this sample.
    pub point: Option<RatePoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RegionSample {
    pub fn ok(beta: f64, point: RatePoint) -> Self {
        RegionSample {
            beta,
            point: Some(point),
            error: None,
        }
    }

    pub fn failed(beta: f64, err: &Error) -> Self {
        RegionSample {
            beta,
            point: None,
            error: Some(err.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionCurve {
    pub method: Method,
    pub samples: Vec<RegionSample>,
}

impl RegionCurve {
    /// Successfully computed points in sample order.
    pub fn points(&self) -> Vec<RatePoint> {
        self.samples.iter().filter_map(|s| s.point).collect()
    }

    pub fn failures(&self) -> usize {
        self.samples.iter().filter(|s| s.point.is_none()).count()
    }

    /// Point of the sample closest to `beta`.
    pub fn at_beta(&self, beta: f64) -> Option<RatePoint> {
        self.samples
            .iter()
            .filter(|s| s.point.is_some())
            .min_by(|a, b| (a.beta - beta).abs().total_cmp(&(b.beta - beta).abs()))
            .and_then(|s| s.point)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,beta,r1,r2\n");
        self.write_csv_rows(&mut out);
        out
    }

    pub(crate) fn write_csv_rows(&self, out: &mut String) {
        for s in &self.samples {
            let (r1, r2) = match s.point {
                Some(p) => (fmt_sig(p.r1), fmt_sig(p.r2)),
                None => (String::new(), String::new()),
            };
            let _ = writeln!(out, "{},{},{},{}", self.method, fmt_sig(s.beta), r1, r2);
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Formats `x` with 12 significant digits, trailing zeros trimmed.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{x:.11e}");
        let (mant, e) = s.split_once('e').unwrap_or((&s, "0"));
        let mant = if mant.contains('.') {
            mant.trim_end_matches('0').trim_end_matches('.')
        } else {
            mant
        };
        format!("{mant}e{e}")
    }
}

/// `n` uniformly spaced values in `[0, 1]` (just `0.5` for `n = 1`).
pub fn beta_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// Deepest bisection level of the adaptive beta refinement.
pub const MAX_REFINE_DEPTH: usize = 10;

/// Solver settings of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub eps_pure: f64,
    pub eps_ts: f64,
    pub eps_gp: f64,
    pub starts: usize,
    pub seed: u64,
    /// Split a beta interval of the pure and time-sharing sweeps while its
    /// midpoint sample is farther than this from the chord of its end points.
    /// `None` keeps the grid as given.
    pub refine_tol: Option<f64>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            eps_pure: 1e-6,
            eps_ts: 1e-2,
            eps_gp: GP_EPS,
            starts: 20,
            seed: 0,
            refine_tol: Some(1e-2),
        }
    }
}

fn start_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// One solver run per `beta` with profile / weights `(β, 1 - β)`.
///
/// The pure and time-sharing sweeps add midpoints where the curve bends
/// between grid points (see [`SweepOptions::refine_tol`]). The improper
/// heuristic contributes every terminal point of its multistart runs. The
/// hull method hulls a proper-pure sweep over the same betas.
pub fn sweep_region(
    ch: &SimoChannel,
    method: Method,
    betas: &[f64],
    opts: &SweepOptions,
) -> Result<RegionCurve> {
    if betas.is_empty() {
        return Err(Error::InvalidArgument("empty beta grid".into()));
    }
    if let Some(b) = betas.iter().find(|b| !(0.0..=1.0).contains(*b)) {
        return Err(Error::InvalidArgument(format!("beta {b} outside [0, 1]")));
    }
    if method == Method::ConvexHull {
        let pure = sweep_region(ch, Method::ProperPure, betas, opts)?;
        return Ok(convex_hull_2d(&pure.points()));
    }
    let per_beta: Vec<Vec<RegionSample>> = betas
        .par_iter()
        .enumerate()
        .map(|(i, &beta)| sample_beta(ch, method, beta, i, opts))
        .collect();
    let mut samples: Vec<RegionSample> = per_beta.into_iter().flatten().collect();
    samples.sort_by(|a, b| a.beta.total_cmp(&b.beta));
    if let (Some(tol), Method::ProperPure | Method::ProperTimesharing) = (opts.refine_tol, method) {
        refine(ch, method, &mut samples, tol, opts);
    }
    Ok(RegionCurve { method, samples })
}

/// Distance of `m` from the line through `a` and `b`.
fn chord_distance(a: RatePoint, b: RatePoint, m: RatePoint) -> f64 {
    let len = (b.r1 - a.r1).hypot(b.r2 - a.r2);
    if len == 0.0 {
        return (m.r1 - a.r1).hypot(m.r2 - a.r2);
    }
    cross(a, b, m).abs() / len
}

fn refine(ch: &SimoChannel, method: Method, samples: &mut Vec<RegionSample>, tol: f64, opts: &SweepOptions) {
    let mut pending: Vec<(RegionSample, RegionSample)> = samples
        .windows(2)
        .filter(|w| w[0].point.is_some() && w[1].point.is_some() && w[0].beta < w[1].beta)
        .map(|w| (w[0].clone(), w[1].clone()))
        .collect();
    for _ in 0..MAX_REFINE_DEPTH {
        if pending.is_empty() {
            break;
        }
        let mids: Vec<RegionSample> = pending
            .par_iter()
            .map(|(a, b)| {
                let beta = 0.5 * (a.beta + b.beta);
                sample_beta(ch, method, beta, 0, opts).remove(0)
            })
            .collect();
        let mut next = Vec::new();
        for ((a, b), m) in pending.into_iter().zip(mids) {
            let Some(pm) = m.point else {
                samples.push(m);
                continue;
            };
            let (pa, pb) = (a.point.unwrap(), b.point.unwrap());
            if chord_distance(pa, pb, pm) > tol {
                samples.push(m.clone());
                next.push((a, m.clone()));
                next.push((m, b));
            }
        }
        pending = next;
    }
    samples.sort_by(|a, b| a.beta.total_cmp(&b.beta));
}

fn sample_beta(
    ch: &SimoChannel,
    method: Method,
    beta: f64,
    index: usize,
    opts: &SweepOptions,
) -> Vec<RegionSample> {
    let profile = match RateProfile::from_beta(beta) {
        Ok(p) => p,
        Err(e) => return vec![RegionSample::failed(beta, &e)],
    };
    let one = |r: Result<RatePoint>| match r {
        Ok(p) => vec![RegionSample::ok(beta, p)],
        Err(e) => vec![RegionSample::failed(beta, &e)],
    };
    match method {
        Method::ProperPure => one(balance_pure_proper(ch, &profile, opts.eps_pure).map(|r| r.rates)),
        Method::ProperTimesharing => {
            one(solve_time_sharing(ch, &profile, opts.eps_ts).map(|(_, s)| s.rate_point()))
        }
        Method::ImproperHeuristic => {
            match multistart(ch, [beta, 1.0 - beta], opts.starts, start_seed(opts.seed, index), opts.eps_gp) {
                Ok(ms) => ms
                    .runs
                    .iter()
                    .map(|r| RegionSample::ok(beta, r.rates))
                    .collect(),
                Err(e) => vec![RegionSample::failed(beta, &e)],
            }
        }
        Method::ConvexHull => unreachable!("hull is assembled from a pure sweep"),
    }
}

fn cross(o: RatePoint, a: RatePoint, b: RatePoint) -> f64 {
    (a.r1 - o.r1) * (b.r2 - o.r2) - (a.r2 - o.r2) * (b.r1 - o.r1)
}

/// Upper-right convex hull of `points` together with the axis points
/// `(max r1, 0)` and `(0, max r2)`.
///
/// Samples run from `(0, max r2)` to `(max r1, 0)`; each carries
/// `β = r1 / (r1 + r2)`. Collinear points are dropped.
pub fn convex_hull_2d(points: &[RatePoint]) -> RegionCurve {
    let valid: Vec<RatePoint> = points
        .iter()
        .copied()
        .filter(|p| p.r1.is_finite() && p.r2.is_finite())
        .map(|p| RatePoint::new(p.r1.max(0.0), p.r2.max(0.0)))
        .collect();
    if valid.is_empty() {
        return RegionCurve {
            method: Method::ConvexHull,
            samples: Vec::new(),
        };
    }
    let r1max = valid.iter().map(|p| p.r1).fold(0.0, f64::max);
    let r2max = valid.iter().map(|p| p.r2).fold(0.0, f64::max);
    let mut pts = valid;
    pts.push(RatePoint::new(r1max, 0.0));
    pts.push(RatePoint::new(0.0, r2max));
    pts.sort_by(|a, b| a.r1.total_cmp(&b.r1).then(b.r2.total_cmp(&a.r2)));
    pts.dedup();

    let mut chain: Vec<RatePoint> = Vec::new();
    for p in pts {
        while chain.len() >= 2 && cross(chain[chain.len() - 2], chain[chain.len() - 1], p) >= 0.0 {
            chain.pop();
        }
        chain.push(p);
    }
    let samples = chain
        .into_iter()
        .map(|p| {
            let total = p.r1 + p.r2;
            let beta = if total > 0.0 { p.r1 / total } else { 0.5 };
            RegionSample::ok(beta, p)
        })
        .collect();
    RegionCurve {
        method: Method::ConvexHull,
        samples,
    }
}

/// Is there `t` in `[0, 1]` with `a + t (b - a) >= target` componentwise?
fn segment_dominates(a: RatePoint, b: RatePoint, target: RatePoint) -> bool {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for (s, e, t) in [(a.r1, b.r1, target.r1), (a.r2, b.r2, target.r2)] {
        let d = e - s;
        if d == 0.0 {
            if s < t {
                return false;
            }
        } else if d > 0.0 {
            lo = lo.max((t - s) / d);
        } else {
            hi = hi.min((t - s) / d);
        }
    }
    lo <= hi
}

/// Whether `pt` lies in the downward closure of the region curve, up to `tol`
/// in each coordinate. The curve is interpolated linearly between samples and
/// closed by the projections of its end points onto the axes.
pub fn contains(region: &RegionCurve, pt: RatePoint, tol: f64) -> Result<bool> {
    let pts = region.points();
    if pts.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let target = RatePoint::new(pt.r1 - tol, pt.r2 - tol);
    if target.r1 <= 0.0 && target.r2 <= 0.0 {
        return Ok(true);
    }
    let first = pts[0];
    let last = pts[pts.len() - 1];
    let mut chain = Vec::with_capacity(pts.len() + 2);
    chain.push(RatePoint::new(0.0, first.r2));
    chain.extend(pts.iter().copied());
    chain.push(RatePoint::new(last.r1, 0.0));
    if chain.iter().any(|q| q.r1 >= target.r1 && q.r2 >= target.r2) {
        return Ok(true);
    }
    Ok(chain
        .windows(2)
        .any(|w| segment_dominates(w[0], w[1], target)))
}

/// Largest distance of a hull vertex from the chord between the hull's end points.
pub fn hull_segment_deviation(hull: &RegionCurve) -> Result<f64> {
    let pts = hull.points();
    if pts.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let a = pts[0];
    let b = pts[pts.len() - 1];
    let (dx, dy) = (b.r1 - a.r1, b.r2 - a.r2);
    let len = dx.hypot(dy);
    if len == 0.0 {
        return Ok(0.0);
    }
    Ok(pts
        .iter()
        .map(|p| ((p.r1 - a.r1) * dy - (p.r2 - a.r2) * dx).abs() / len)
        .fold(0.0, f64::max))
}

/// Largest coordinate shortfall of any point of `inner` against `outer`:
/// the smallest `tol` for which every point of `inner` is contained.
pub fn containment_gap(inner: &RegionCurve, outer: &RegionCurve) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for p in inner.points() {
        if contains(outer, p, 0.0)? {
            continue;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        while !contains(outer, p, hi)? {
            hi *= 2.0;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if contains(outer, p, mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        worst = worst.max(hi);
    }
    Ok(worst)
}

fn cv(v: &[(f64, f64)]) -> Vec<Cplx> {
    v.iter().map(|&(re, im)| Cplx::new(re, im)).collect()
}

/// Built-in channel realizations `fig1`, `fig2` and `fig3` (all with `P = 10`).
///
/// `fig3` is `fig1` with the link from user 2 into receiver 1 removed.
pub fn preset_scenario(name: &str) -> Result<SimoChannel> {
    let fig1 = || {
        (
            cv(&[(-0.0878, 0.3457), (1.0534, 0.7316)]),
            cv(&[(0.9963, 0.5140), (1.0021, -0.2146)]),
            cv(&[(0.9496, 0.4156), (-1.7076, -1.1134)]),
            cv(&[(0.5072, 0.6282), (1.1528, -0.8111)]),
        )
    };
    let (h11, h12, h21, h22) = match name {
        "fig1" => fig1(),
        "fig2" => (
            cv(&[(0.9578, 2.0563), (-0.7581, 0.5835)]),
            cv(&[(0.6795, 0.9751), (0.0877, -0.7482)]),
            cv(&[(1.0159, -0.3314), (-1.3866, -0.1927)]),
            cv(&[(-0.1398, 0.7767), (-0.8541, -0.1965)]),
        ),
        "fig3" => {
            let (h11, _, h21, h22) = fig1();
            (h11, cv(&[(0.0, 0.0), (0.0, 0.0)]), h21, h22)
        }
        _ => return Err(Error::UnknownPreset(name.to_string())),
    };
    SimoChannel::new(h11, h12, h21, h22, 10.0, 10.0)
}

pub const PRESETS: [&str; 3] = ["fig1", "fig2", "fig3"];

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rp(a: f64, b: f64) -> RatePoint {
        RatePoint::new(a, b)
    }

    #[test]
    fn presets() {
        let ch = preset_scenario("fig1").unwrap();
        assert_eq!(ch.h11[0], Cplx::new(-0.0878, 0.3457));
        assert_eq!((ch.p1, ch.p2), (10.0, 10.0));
        let ch = preset_scenario("fig2").unwrap();
        assert_eq!(ch.h11[0], Cplx::new(0.9578, 2.0563));
        let ch3 = preset_scenario("fig3").unwrap();
        assert!(ch3.h12.iter().all(|z| z.norm() == 0.0));
        assert_eq!(ch3.h21, preset_scenario("fig1").unwrap().h21);
        assert!(matches!(preset_scenario("fig9"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn hull_drops_collinear_point() {
        let h = convex_hull_2d(&[rp(1.0, 1.0), rp(2.0, 0.0), rp(0.0, 2.0)]);
        assert_eq!(h.points(), vec![rp(0.0, 2.0), rp(2.0, 0.0)]);
    }

    #[test]
    fn hull_keeps_bulge_and_is_idempotent() {
        let pts = [rp(0.0, 3.0), rp(2.0, 2.5), rp(1.0, 1.0), rp(3.0, 0.0), rp(2.9, 1.0)];
        let h = convex_hull_2d(&pts);
        assert_eq!(h.points(), vec![rp(0.0, 3.0), rp(2.0, 2.5), rp(2.9, 1.0), rp(3.0, 0.0)]);
        let again = convex_hull_2d(&h.points());
        assert_eq!(again.points(), h.points());
        for p in pts {
            assert!(contains(&h, p, 1e-12).unwrap());
        }
        let betas: Vec<f64> = h.samples.iter().map(|s| s.beta).collect();
        assert!(betas.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn containment_examples() {
        let curve = RegionCurve {
            method: Method::ProperPure,
            samples: vec![
                RegionSample::ok(0.0, rp(0.0, 2.0)),
                RegionSample::ok(0.5, rp(1.5, 1.5)),
                RegionSample::ok(1.0, rp(2.0, 0.0)),
            ],
        };
        assert!(contains(&curve, rp(0.0, 0.0), 0.0).unwrap());
        assert!(contains(&curve, rp(0.75, 1.75), 1e-12).unwrap());
        assert!(!contains(&curve, rp(1.0, 1.9), 1e-3).unwrap());
        assert!(contains(&curve, rp(1.0, 1.9), 0.2).unwrap());
        assert!(contains(&curve, rp(2.0, 0.0), 0.0).unwrap());
        assert!(!contains(&curve, rp(2.1, 0.0), 0.05).unwrap());
        let empty = RegionCurve {
            method: Method::ProperPure,
            samples: vec![],
        };
        assert!(matches!(contains(&empty, rp(0.0, 0.0), 0.0), Err(Error::EmptyRegion)));
    }

    #[test]
    fn chord_deviation() {
        let flat = convex_hull_2d(&[rp(0.0, 2.0), rp(2.0, 0.0)]);
        assert!(hull_segment_deviation(&flat).unwrap() < 1e-15);
        let bump = convex_hull_2d(&[rp(0.0, 2.0), rp(2.0, 0.0), rp(1.5, 1.5)]);
        let d = hull_segment_deviation(&bump).unwrap();
        assert!((d - 1.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(0.5), "0.5");
        assert_eq!(fmt_sig(4.22659234751577), "4.22659234752");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(1234567.0), "1234567");
        assert_eq!(fmt_sig(1.5e-9), "1.5e-9");
    }

    #[test]
    fn grid() {
        assert_eq!(beta_grid(3), vec![0.0, 0.5, 1.0]);
        assert_eq!(beta_grid(1), vec![0.5]);
        assert_eq!(beta_grid(21).len(), 21);
    }

    #[test]
    fn pure_sweep_endpoints() {
        let ch = preset_scenario("fig1").unwrap();
        let opts = SweepOptions {
            refine_tol: None,
            ..SweepOptions::default()
        };
        let c = sweep_region(&ch, Method::ProperPure, &[0.0, 1.0], &opts).unwrap();
        let p = c.points();
        assert!(p[0].r1.abs() < 1e-12 && (p[0].r2 - 4.77534426964198).abs() < 1e-3);
        assert!((p[1].r1 - 4.22659234751577).abs() < 1e-3 && p[1].r2.abs() < 1e-12);
    }

    #[test]
    fn refinement_finds_full_power_corner() {
        // On the Z channel the pure boundary turns sharply at full power.
        let ch = preset_scenario("fig3").unwrap();
        let corner = crate::rates::rate_proper(&ch, 10.0, 10.0).unwrap();
        let coarse = SweepOptions {
            refine_tol: None,
            ..SweepOptions::default()
        };
        let betas = beta_grid(21);
        let plain = sweep_region(&ch, Method::ProperPure, &betas, &coarse).unwrap();
        assert!(!contains(&plain, corner, 2e-2).unwrap());
        let refined = sweep_region(&ch, Method::ProperPure, &betas, &SweepOptions::default()).unwrap();
        assert!(contains(&refined, corner, 2e-2).unwrap());
        assert!(refined.samples.len() > plain.samples.len());
        for b in &betas {
            assert!(refined.samples.iter().any(|s| s.beta == *b));
        }
        let sorted = refined.samples.windows(2).all(|w| w[0].beta <= w[1].beta);
        assert!(sorted);
    }

    #[test]
    fn csv_layout() {
        let curve = RegionCurve {
            method: Method::ProperTimesharing,
            samples: vec![
                RegionSample::ok(0.5, rp(3.0, 3.0)),
                RegionSample::failed(0.6, &Error::EmptyRegion),
            ],
        };
        let csv = curve.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "method,beta,r1,r2");
        assert_eq!(lines[1], "proper-timesharing,0.5,3,3");
        assert_eq!(lines[2], "proper-timesharing,0.6,,");
    }

    #[test]
    fn method_names() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.tag()).unwrap(), m);
        }
        assert_eq!(Method::parse("proper-ts").unwrap(), Method::ProperTimesharing);
        assert_eq!(Method::parse("hull").unwrap(), Method::ConvexHull);
        assert!(Method::parse("bogus").is_err());
    }

    proptest! {
        #[test]
        fn hull_is_idempotent_and_covers_inputs(
            raw in proptest::collection::vec((0.0f64..5.0, 0.0f64..5.0), 1..40)
        ) {
            let pts: Vec<RatePoint> = raw.iter().map(|&(a, b)| rp(a, b)).collect();
            let h = convex_hull_2d(&pts);
            prop_assert_eq!(convex_hull_2d(&h.points()).points(), h.points());
            for p in &pts {
                prop_assert!(contains(&h, *p, 1e-9).unwrap());
            }
            let hp = h.points();
            prop_assert!(hp.windows(2).all(|w| w[0].r1 <= w[1].r1 && w[0].r2 >= w[1].r2));
        }
    }
}
