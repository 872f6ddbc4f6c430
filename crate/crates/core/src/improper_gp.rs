//! Weighted sum rate maximization with improper signals by gradient
//! projection on the composite real covariances.

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::channel::{composite_cov_from_strategy, CompositeCov, Cplx, SimoChannel};
use crate::error::{Error, Result};
use crate::linalg::{sym2_compose, sym2_eigen, symmetrize2};
use crate::rates::{CompositeChannel, RatePoint};

pub const GP_EPS: f64 = 1e-8;
pub const GP_MAX_ITER: usize = 5000;
/// Largest step divisor `s` before the search is stopped.
pub const GP_MAX_STEP_DIVISOR: u64 = 1_000_000;

/// `w1·r1 + w2·r2` for composite covariances `m1`, `m2`.
pub fn wsr_objective(
    ch: &SimoChannel,
    m1: &CompositeCov,
    m2: &CompositeCov,
    w1: f64,
    w2: f64,
) -> f64 {
    let r = CompositeChannel::new(ch).rates(&[*m1.matrix(), *m2.matrix()]);
    w1 * r[0] + w2 * r[1]
}

/// Gradients of the weighted sum rate with respect to `m1` and `m2`.
pub fn wsr_gradient(
    ch: &SimoChannel,
    m1: &CompositeCov,
    m2: &CompositeCov,
    w: [f64; 2],
) -> Result<[Matrix2<f64>; 2]> {
    CompositeChannel::new(ch)
        .weighted_gradient(w, &[*m1.matrix(), *m2.matrix()])
        .ok_or(Error::NonFiniteRate { user: 0 })
}

/// Frobenius-nearest PSD matrix with trace `p`: eigenvalues are lowered by a
/// common water level `ζ` (possibly negative) and clipped at zero.
pub fn project_psd_trace(m: &Matrix2<f64>, p: f64) -> Result<CompositeCov> {
    if !p.is_finite() || p < 0.0 {
        return Err(Error::NegativePower {
            path: "projection budget".into(),
            value: p,
        });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            path: "projection input".into(),
        });
    }
    let (xi, omega) = sym2_eigen(&symmetrize2(m));
    let zeta = if xi[0] - xi[1] >= p {
        xi[0] - p
    } else {
        0.5 * (xi[0] + xi[1] - p)
    };
    let vals = [(xi[0] - zeta).max(0.0), (xi[1] - zeta).max(0.0)];
    Ok(CompositeCov::from_matrix_unchecked(symmetrize2(&sym2_compose(
        vals, &omega,
    ))))
}

/// Terminal state of one gradient-projection run.
#[derive(Debug, Clone, PartialEq)]
pub struct GpOutcome {
    pub m: [CompositeCov; 2],
    pub objective: f64,
    pub rates: RatePoint,
    pub iterations: usize,
    /// Final step divisor.
    pub step_divisor: u64,
    /// True if the run stopped on an iteration or step-size cap instead of
    /// the improvement test.
    pub capped: bool,
    /// Objective after each accepted iteration, starting with the initial value.
    pub history: Vec<f64>,
}

impl GpOutcome {
    /// Variances and pseudovariances of both users.
    pub fn strategies(&self) -> [(f64, Cplx); 2] {
        [self.m[0].to_strategy(), self.m[1].to_strategy()]
    }
}

/// Gradient projection from `init` with step `1/s` and backoff `s += 1`.
///
/// The step divisor `s` is carried across iterations. Returns once an
/// accepted step improves the objective by at most `eps`.
pub fn gradient_projection(
    ch: &SimoChannel,
    w: [f64; 2],
    init: [CompositeCov; 2],
    eps: f64,
) -> Result<GpOutcome> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps {eps} must be > 0")));
    }
    if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidArgument(format!("weights {w:?} must be >= 0")));
    }
    let cc = CompositeChannel::new(ch);
    let budget = ch.powers();
    for k in 0..2 {
        if init[k].trace() > budget[k] + 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "initial covariance of user {} exceeds its power budget",
                k + 1
            )));
        }
    }
    let wsr = |m: &[Matrix2<f64>; 2]| {
        let r = cc.rates(m);
        w[0] * r[0] + w[1] * r[1]
    };

    let mut m = [*init[0].matrix(), *init[1].matrix()];
    let mut obj = wsr(&m);
    let mut history = vec![obj];
    let mut s: u64 = 1;
    let mut capped = true;
    let mut iterations = 0;

    'outer: while iterations < GP_MAX_ITER {
        let g = cc
            .weighted_gradient(w, &m)
            .ok_or(Error::NonFiniteRate { user: 0 })?;
        let (next, next_obj) = loop {
            let step = 1.0 / s as f64;
            let cand = [
                *project_psd_trace(&(m[0] + g[0] * step), budget[0])?.matrix(),
                *project_psd_trace(&(m[1] + g[1] * step), budget[1])?.matrix(),
            ];
            let v = wsr(&cand);
            if !v.is_finite() {
                return Err(Error::NonFiniteRate { user: 0 });
            }
            if v - obj >= 0.0 {
                break (cand, v);
            }
            if s >= GP_MAX_STEP_DIVISOR {
                break 'outer;
            }
            s += 1;
        };
        iterations += 1;
        let gain = next_obj - obj;
        m = next;
        obj = next_obj;
        history.push(obj);
        if gain <= eps {
            capped = false;
            break;
        }
    }

    let rates = cc.rates(&m);
    Ok(GpOutcome {
        m: [
            CompositeCov::from_matrix_unchecked(m[0]),
            CompositeCov::from_matrix_unchecked(m[1]),
        ],
        objective: obj,
        rates: RatePoint::new(rates[0].max(0.0), rates[1].max(0.0)),
        iterations,
        step_divisor: s,
        capped,
        history,
    })
}

/// Random improper starting covariance with variance in `(0, p]` and
/// pseudovariance magnitude in `(c/2, c]`.
pub fn random_improper_init(rng: &mut impl Rng, p: f64) -> Result<CompositeCov> {
    let c = p * (1.0 - rng.gen::<f64>());
    let mag = c * (1.0 - 0.5 * rng.gen::<f64>());
    let phase = rng.gen_range(0.0..2.0 * PI);
    composite_cov_from_strategy(c, Cplx::from_polar(mag, phase))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultistartResult {
    /// Index into `runs` of the best objective (lowest index on ties).
    pub best: usize,
    pub runs: Vec<GpOutcome>,
}

impl MultistartResult {
    pub fn best_run(&self) -> &GpOutcome {
        &self.runs[self.best]
    }
}

/// Independent gradient-projection runs from random improper starts.
///
/// Start `i` draws from a ChaCha stream `i` keyed by `seed`, so results do not
/// depend on the thread count.
pub fn multistart(
    ch: &SimoChannel,
    w: [f64; 2],
    n_starts: usize,
    seed: u64,
    eps: f64,
) -> Result<MultistartResult> {
    if n_starts == 0 {
        return Err(Error::InvalidArgument("n_starts must be >= 1".into()));
    }
    let runs: Vec<GpOutcome> = (0..n_starts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let init = [
                random_improper_init(&mut rng, ch.p1)?,
                random_improper_init(&mut rng, ch.p2)?,
            ];
            gradient_projection(ch, w, init, eps)
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.objective > runs[best].objective {
            best = i;
        }
    }
    Ok(MultistartResult { best, runs })
}
