//! Coded time-sharing with proper signals.
//!
//! The time-sharing balancing problem is solved through its Lagrangian dual.
//! The dual function is evaluated by a branch-and-bound search over transmit
//! powers (mixed monotonic bounds) and minimized with Kelley's cutting-plane
//! method. A time-sharing schedule is recovered from the stored cut points.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::LN_2;

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, Variable};
use serde::{Deserialize, Serialize};

use crate::channel::{other, SimoChannel};
use crate::error::{Error, Result};
use crate::linalg::{dot_h, norm_sqr};
use crate::proper_pure::RateProfile;
use crate::rates::{rate_proper, RatePoint};

/// Smallest admissible power price.
pub const LAMBDA_FLOOR: f64 = 1e-9;
/// Live-box cap of the branch-and-bound search.
pub const MAX_BOXES: usize = 2_000_000;
pub const MAX_CUTTING_PLANE_ITER: usize = 2000;
const TAU_DROP: f64 = 1e-12;
const SEED_SCALES: [f64; 4] = [1.0, 10.0, 100.0, 1000.0];

/// Rate prices `μ` (with `ρᵀμ = 1`) and power prices `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualVariables {
    pub mu: [f64; 2],
    pub lambda: [f64; 2],
}

impl DualVariables {
    pub fn new(mu: [f64; 2], lambda: [f64; 2]) -> Result<Self> {
        let ok = mu.iter().chain(&lambda).all(|x| x.is_finite())
            && mu.iter().all(|m| *m >= 0.0)
            && lambda.iter().all(|l| *l >= 0.0);
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "dual variables must be finite and nonnegative: mu {mu:?}, lambda {lambda:?}"
            )));
        }
        Ok(DualVariables { mu, lambda })
    }
}

/// Per-user constants of the proper rate `log2(1 + x_k (g_kk - y_j c_k / (1 + y_j g_kj)))`.
#[derive(Debug, Clone, Copy)]
struct Gains {
    direct: [f64; 2],
    cross: [f64; 2],
    overlap: [f64; 2],
}

impl Gains {
    fn new(ch: &SimoChannel) -> Self {
        let mut g = Gains {
            direct: [0.0; 2],
            cross: [0.0; 2],
            overlap: [0.0; 2],
        };
        for k in 0..2 {
            g.direct[k] = norm_sqr(ch.direct(k));
            g.cross[k] = norm_sqr(ch.cross(k));
            g.overlap[k] = dot_h(ch.cross(k), ch.direct(k)).norm_sqr();
        }
        g
    }

    fn effective(&self, k: usize, y_j: f64) -> f64 {
        (self.direct[k] - y_j * self.overlap[k] / (1.0 + y_j * self.cross[k])).max(0.0)
    }
}

/// The mixed monotonic function `F(x, y)` for fixed dual variables.
#[derive(Debug, Clone, Copy)]
struct MmFunction {
    gains: Gains,
    dv: DualVariables,
}

impl MmFunction {
    fn eval(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        let mut v = 0.0;
        for k in 0..2 {
            let j = other(k);
            if self.dv.mu[k] != 0.0 {
                v += self.dv.mu[k] * (x[k] * self.gains.effective(k, y[j])).ln_1p() / LN_2;
            }
            v -= self.dv.lambda[k] * y[k];
        }
        v
    }

    /// Interference-free concave part `μ_k log2(1 + p g_kk) - λ_k p`.
    fn free(&self, k: usize, p: f64) -> f64 {
        self.dv.mu[k] * (p * self.gains.direct[k]).ln_1p() / LN_2 - self.dv.lambda[k] * p
    }

    fn free_argmax(&self, k: usize) -> f64 {
        let (mu, lam, g) = (self.dv.mu[k], self.dv.lambda[k], self.gains.direct[k]);
        if mu == 0.0 || g == 0.0 {
            return 0.0;
        }
        if lam == 0.0 {
            return f64::INFINITY;
        }
        (mu / (lam * LN_2) - 1.0 / g).max(0.0)
    }
}

/// `F(x, y) = Σ_k μ_k log2(1 + x_k h_kkᴴ (I + y_j h_kj h_kjᴴ)⁻¹ h_kk) - λ_k y_k`.
///
/// Nondecreasing in `x`, nonincreasing in `y`; `F(p, p)` is the Lagrangian
/// objective at powers `p`.
pub fn mm_objective(ch: &SimoChannel, x: [f64; 2], y: [f64; 2], dv: &DualVariables) -> f64 {
    MmFunction {
        gains: Gains::new(ch),
        dv: *dv,
    }
    .eval(x, y)
}

/// Axis-aligned power box `[lo, hi]` with cached bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBox {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub upper: f64,
    pub lower: f64,
}

impl PowerBox {
    /// Box without computed bounds (both set to NaN).
    pub fn new(lo: [f64; 2], hi: [f64; 2]) -> Self {
        PowerBox {
            lo,
            hi,
            upper: f64::NAN,
            lower: f64::NAN,
        }
    }

    pub fn volume(&self) -> f64 {
        (self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1])
    }

    fn with_bounds(mut self, f: &MmFunction) -> Self {
        self.upper = f.eval(self.hi, self.lo);
        self.lower = f.eval(self.lo, self.lo);
        self
    }
}

/// `(U, L) = (F(hi, lo), F(lo, lo))`.
pub fn box_bounds(ch: &SimoChannel, b: &PowerBox, dv: &DualVariables) -> (f64, f64) {
    let f = MmFunction {
        gains: Gains::new(ch),
        dv: *dv,
    };
    (f.eval(b.hi, b.lo), f.eval(b.lo, b.lo))
}

/// Bisects `b` at the midpoint of its longest edge (lowest index on ties).
pub fn branch_box(b: &PowerBox) -> Result<(PowerBox, PowerBox)> {
    let w = [b.hi[0] - b.lo[0], b.hi[1] - b.lo[1]];
    let k = if w[1] > w[0] { 1 } else { 0 };
    if !(w[k] > 0.0) {
        return Err(Error::DegenerateBox);
    }
    let mid = b.lo[k] + 0.5 * w[k];
    let mut left_hi = b.hi;
    left_hi[k] = mid;
    let mut right_lo = b.lo;
    right_lo[k] = mid;
    Ok((PowerBox::new(b.lo, left_hi), PowerBox::new(right_lo, b.hi)))
}

/// Smallest `p >= start` with `g(p) <= 0` for a concave `g` with `g(start) >= 0`,
/// returned from the nonpositive side.
fn concave_root(g: impl Fn(f64) -> f64, start: f64) -> Result<f64> {
    if g(start) <= 0.0 {
        return Ok(start);
    }
    let mut lo = start;
    let mut hi = start.max(1.0) * 2.0;
    let mut n = 0;
    while g(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        n += 1;
        if n > 2000 || !hi.is_finite() {
            return Err(Error::NoConvergence {
                what: "box root bracketing",
                iterations: n,
            });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

fn init_box_inner(f: &MmFunction) -> Result<PowerBox> {
    let mut fmax = [0.0; 2];
    let mut argmax = [0.0; 2];
    for k in 0..2 {
        argmax[k] = f.free_argmax(k);
        if !argmax[k].is_finite() {
            return Err(Error::InvalidArgument(format!(
                "power price of user {} must be positive",
                k + 1
            )));
        }
        fmax[k] = f.free(k, argmax[k]);
    }
    let mut hi = [0.0; 2];
    for k in 0..2 {
        let j = other(k);
        // Without a rate weight, power of user k only interferes and costs.
        if f.dv.mu[k] == 0.0 {
            continue;
        }
        if f.dv.lambda[k] == 0.0 {
            if f.dv.mu[k] == 0.0 && fmax[j] == 0.0 {
                continue;
            }
            return Err(Error::InvalidArgument(format!(
                "power price of user {} must be positive",
                k + 1
            )));
        }
        hi[k] = concave_root(|p| f.free(k, p) + fmax[j], argmax[k])?;
    }
    Ok(PowerBox::new([0.0; 2], hi).with_bounds(f))
}

/// Box `[0, p0]` containing a maximizer of `F(p, p)` over `p >= 0`.
///
/// Outside the box the interference-free bound `f̂_k(p_k) + max f̂_j` is negative,
/// while `F(0, 0) = 0`. A user with `μ_k = 0` gets `p0_k = 0`, since raising
/// its power cannot increase `F(p, p)`.
pub fn init_box(ch: &SimoChannel, dv: &DualVariables) -> Result<PowerBox> {
    init_box_inner(&MmFunction {
        gains: Gains::new(ch),
        dv: *dv,
    })
}

/// Result of the inner maximization `max_{p >= 0} F(p, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerSolution {
    pub p: [f64; 2],
    /// Best attained value `F(p, p)`.
    pub value: f64,
    /// Certified upper bound on the maximum.
    pub upper: f64,
    pub boxes: usize,
}

struct HeapBox(PowerBox);

impl PartialEq for HeapBox {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapBox {}
impl PartialOrd for HeapBox {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapBox {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .upper
            .total_cmp(&other.0.upper)
            .then_with(|| other.0.lo[0].total_cmp(&self.0.lo[0]))
            .then_with(|| other.0.lo[1].total_cmp(&self.0.lo[1]))
    }
}

fn solve_inner_fn(f: &MmFunction, eps: f64) -> Result<InnerSolution> {
    let root = init_box_inner(f)?;
    // Search in coordinates normalised to the initial box, so that the longest
    // edge is measured relative to each power range.
    let scale = root.hi;
    let to_p = |u: [f64; 2]| [u[0] * scale[0], u[1] * scale[1]];
    let bounded = |b: PowerBox| PowerBox {
        upper: f.eval(to_p(b.hi), to_p(b.lo)),
        lower: f.eval(to_p(b.lo), to_p(b.lo)),
        ..b
    };
    let unit = |s: f64| if s > 0.0 { 1.0 } else { 0.0 };
    let start = bounded(PowerBox::new([0.0; 2], [unit(scale[0]), unit(scale[1])]));

    let mut best_u = start.lo;
    let mut best = start.lower;
    let mut heap = BinaryHeap::new();
    heap.push(HeapBox(start));
    let mut created = 1usize;
    let finish = |u: [f64; 2], value: f64, upper: f64, boxes: usize| InnerSolution {
        p: to_p(u),
        value,
        upper,
        boxes,
    };
    loop {
        let top = match heap.peek() {
            None => return Ok(finish(best_u, best, best, created)),
            Some(b) => b.0,
        };
        if top.upper - best <= eps {
            return Ok(finish(best_u, best, top.upper.max(best), created));
        }
        heap.pop();
        if top.upper < best {
            continue;
        }
        let (a, b) = match branch_box(&top) {
            Ok(children) => children,
            // A point box has U = L <= best, so this is unreachable in exact arithmetic.
            Err(_) => continue,
        };
        for child in [bounded(a), bounded(b)] {
            created += 1;
            if child.lower > best {
                best = child.lower;
                best_u = child.lo;
            }
            if child.upper >= best {
                heap.push(HeapBox(child));
            }
        }
        if heap.len() > MAX_BOXES {
            let upper = heap.peek().map(|b| b.0.upper).unwrap_or(best);
            return Err(Error::BoxLimit {
                boxes: heap.len(),
                upper,
                lower: best,
            });
        }
    }
}

/// Branch-and-bound maximization of `F(p, p)` over `p >= 0` to accuracy `eps`.
pub fn solve_inner(ch: &SimoChannel, dv: &DualVariables, eps: f64) -> Result<InnerSolution> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps {eps} must be > 0")));
    }
    solve_inner_fn(
        &MmFunction {
            gains: Gains::new(ch),
            dv: *dv,
        },
        eps,
    )
}

/// Dual function `Σ λ_k P_k + max_p F(p, p)` (inner maximum to accuracy `eps`).
pub fn dual_value(ch: &SimoChannel, dv: &DualVariables, eps: f64) -> Result<f64> {
    let inner = solve_inner(ch, dv, eps)?;
    Ok(dv.lambda[0] * ch.p1 + dv.lambda[1] * ch.p2 + inner.value)
}

/// One stored power point and its proper rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub p: [f64; 2],
    pub rates: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuttingPlaneResult {
    /// Value of the recovered time-sharing schedule.
    pub r_star: f64,
    /// Best certified upper bound on the optimum.
    pub upper: f64,
    pub dual: DualVariables,
    pub cuts: Vec<Cut>,
    pub iterations: usize,
}

fn cut_at(ch: &SimoChannel, p: [f64; 2]) -> Result<Cut> {
    let r = rate_proper(ch, p[0], p[1])?;
    Ok(Cut {
        p,
        rates: r.as_array(),
    })
}

fn lp_error(e: minilp::Error) -> Error {
    Error::LinearProgram(e.to_string())
}

/// Upper end of the power-price domain. Beyond it every `p > 0` has negative
/// Lagrangian value, so the dual is not decreased by larger prices.
pub(crate) fn lambda_max(ch: &SimoChannel, profile: &RateProfile) -> f64 {
    let mut m: f64 = 0.0;
    for k in 0..2 {
        let rho = profile.get(k);
        if rho > 0.0 {
            m = m.max(norm_sqr(ch.direct(k)) / rho);
        }
    }
    (10.0 * m / LN_2).max(10.0 * LAMBDA_FLOOR)
}

/// Master program: minimize the cutting-plane model of the dual function.
fn solve_master(
    cuts: &[Cut],
    profile: &RateProfile,
    budget: [f64; 2],
    lam_max: f64,
) -> Result<(DualVariables, f64)> {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let rho = profile.as_array();
    let mu: Vec<Variable> = (0..2)
        .map(|k| {
            let ub = if rho[k] > 0.0 { 1.0 / rho[k] } else { 0.0 };
            lp.add_var(0.0, (0.0, ub))
        })
        .collect();
    let lam: Vec<Variable> = (0..2)
        .map(|_| lp.add_var(0.0, (LAMBDA_FLOOR, lam_max)))
        .collect();
    let t = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    lp.add_constraint(&[(mu[0], rho[0]), (mu[1], rho[1])], ComparisonOp::Eq, 1.0);
    for c in cuts {
        let mut e = LinearExpr::empty();
        e.add(t, 1.0);
        for k in 0..2 {
            e.add(mu[k], -c.rates[k]);
            e.add(lam[k], -(budget[k] - c.p[k]));
        }
        lp.add_constraint(e, ComparisonOp::Ge, 0.0);
    }
    let sol = lp.solve().map_err(lp_error)?;
    let dv = DualVariables {
        mu: [sol[mu[0]].max(0.0), sol[mu[1]].max(0.0)],
        lambda: [sol[lam[0]].max(LAMBDA_FLOOR), sol[lam[1]].max(LAMBDA_FLOOR)],
    };
    Ok((dv, sol.objective()))
}

/// Kelley cutting-plane minimization of the dual of the time-sharing problem.
///
/// Stops when the certified dual upper bound is within `eps` of the value of
/// the schedule recovered from the current cuts.
pub fn cutting_plane(
    ch: &SimoChannel,
    profile: &RateProfile,
    eps: f64,
) -> Result<CuttingPlaneResult> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps {eps} must be > 0")));
    }
    let budget = ch.powers();
    let gains = Gains::new(ch);
    let lam_max = lambda_max(ch, profile);
    let mut cuts = Vec::new();
    // Corners of the budget box, plus scaled-up corners whose cuts keep the
    // first master iterates away from vanishing power prices.
    for scale in SEED_SCALES {
        let (a, b) = (scale * budget[0], scale * budget[1]);
        for p in [[0.0, 0.0], [a, 0.0], [0.0, b], [a, b]] {
            if !cuts.iter().any(|c: &Cut| c.p == p) {
                cuts.push(cut_at(ch, p)?);
            }
        }
    }

    let mut upper = f64::INFINITY;
    let mut best_dual = None;
    for it in 1..=MAX_CUTTING_PLANE_ITER {
        let (dv, _model) = solve_master(&cuts, profile, budget, lam_max)?;
        let inner = solve_inner_fn(&MmFunction { gains, dv }, eps / 10.0)?;
        let bound = dv.lambda[0] * budget[0] + dv.lambda[1] * budget[1] + inner.upper;
        if bound < upper {
            upper = bound;
            best_dual = Some(dv);
        }
        if !cuts.iter().any(|c| c.p == inner.p) {
            cuts.push(cut_at(ch, inner.p)?);
        }
        let (recovered, _) = recovery_lp(&cuts, profile, budget)?;
        if upper - recovered <= eps {
            return Ok(CuttingPlaneResult {
                r_star: recovered,
                upper,
                dual: best_dual.unwrap_or(dv),
                cuts,
                iterations: it,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "cutting plane",
        iterations: MAX_CUTTING_PLANE_ITER,
    })
}

/// `max R` over schedules on the stored points; returns `R` and the weights.
fn recovery_lp(cuts: &[Cut], profile: &RateProfile, budget: [f64; 2]) -> Result<(f64, Vec<f64>)> {
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let tau: Vec<Variable> = cuts.iter().map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
    let r = lp.add_var(1.0, (0.0, f64::INFINITY));
    for k in 0..2 {
        let mut rate = LinearExpr::empty();
        let mut power = LinearExpr::empty();
        for (v, c) in tau.iter().zip(cuts) {
            rate.add(*v, c.rates[k]);
            power.add(*v, c.p[k]);
        }
        rate.add(r, -profile.get(k));
        lp.add_constraint(rate, ComparisonOp::Ge, 0.0);
        lp.add_constraint(power, ComparisonOp::Le, budget[k]);
    }
    let ones: Vec<(Variable, f64)> = tau.iter().map(|v| (*v, 1.0)).collect();
    lp.add_constraint(&ones[..], ComparisonOp::Eq, 1.0);
    let sol = lp.solve().map_err(lp_error)?;
    let weights = tau.iter().map(|v| sol[*v].max(0.0)).collect();
    Ok((sol[r], weights))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsEntry {
    pub tau: f64,
    pub p1: f64,
    pub p2: f64,
}

/// Time-sharing schedule with its averaged rates `[r1, r2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSharingSolution {
    pub entries: Vec<TsEntry>,
    pub rates: [f64; 2],
}

impl TimeSharingSolution {
    pub fn rate_point(&self) -> RatePoint {
        RatePoint::from_array(self.rates)
    }

    pub fn average_power(&self) -> [f64; 2] {
        let mut p = [0.0; 2];
        for e in &self.entries {
            p[0] += e.tau * e.p1;
            p[1] += e.tau * e.p2;
        }
        p
    }
}

/// Schedule over at most four stored points maximizing the balanced rate.
///
/// The recovery LP is the dual of the master program, so its weights are the
/// master multipliers of the cuts. A basic optimal solution has at most four
/// nonzero weights.
pub fn primal_recovery(
    cuts: &[Cut],
    profile: &RateProfile,
    ch: &SimoChannel,
) -> Result<TimeSharingSolution> {
    if cuts.is_empty() {
        return Err(Error::Recovery("no stored strategies".into()));
    }
    let (_, weights) = recovery_lp(cuts, profile, ch.powers())?;
    let total: f64 = weights.iter().filter(|w| **w > TAU_DROP).sum();
    if !(total > 0.0) {
        return Err(Error::Recovery("all weights vanished".into()));
    }
    let mut entries = Vec::new();
    let mut rates = [0.0; 2];
    for (w, c) in weights.iter().zip(cuts) {
        if *w <= TAU_DROP {
            continue;
        }
        let tau = w / total;
        entries.push(TsEntry {
            tau,
            p1: c.p[0],
            p2: c.p[1],
        });
        rates[0] += tau * c.rates[0];
        rates[1] += tau * c.rates[1];
    }
    if entries.len() > 4 {
        return Err(Error::Recovery(format!(
            "{} active strategies in a basic solution",
            entries.len()
        )));
    }
    Ok(TimeSharingSolution { entries, rates })
}

/// Balanced time-sharing rates for `profile`.
pub fn solve_time_sharing(
    ch: &SimoChannel,
    profile: &RateProfile,
    eps: f64,
) -> Result<(CuttingPlaneResult, TimeSharingSolution)> {
    let cp = cutting_plane(ch, profile, eps)?;
    let sol = primal_recovery(&cp.cuts, profile, ch)?;
    Ok((cp, sol))
}
