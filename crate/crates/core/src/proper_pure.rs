//! Rate balancing with proper signals and a single (pure) strategy.
//!
//! The balancing problem is solved by bisection over the sum rate `R`. Each
//! feasibility test evaluates `Γ(R)` by alternating MMSE receive filters and
//! the Perron eigenpair of a 3×3 nonnegative matrix.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::channel::{other, Cplx, SimoChannel};
use crate::error::{Error, Result};
use crate::linalg::{dot_h, norm_sqr};
use crate::rates::{rate_proper, RatePoint};

/// Cap reported for `Γ` when all rate targets vanish.
pub const GAMMA_CAP: f64 = 1e12;
/// Tolerance on the eigenvalue change in the filter/eigenpair loop.
pub const LOOP_TOL: f64 = 1e-10;
pub const LOOP_MAX_ITER: usize = 500;
const EIGEN_MAX_ITER: usize = 100_000;
/// Relative slack when checking eigenvector powers against the budgets.
const POWER_SLACK: f64 = 1e-9;

/// Relative rate targets `(ρ1, ρ2)` with `ρ1 + ρ2 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateProfile {
    pub rho1: f64,
    pub rho2: f64,
}

impl RateProfile {
    pub fn new(rho1: f64, rho2: f64) -> Result<Self> {
        let ok = rho1.is_finite()
            && rho2.is_finite()
            && (0.0..=1.0).contains(&rho1)
            && (0.0..=1.0).contains(&rho2)
            && (rho1 + rho2 - 1.0).abs() <= 1e-9;
        if !ok {
            return Err(Error::InvalidProfile { rho1, rho2 });
        }
        Ok(RateProfile { rho1, rho2 })
    }

    /// Profile `(β, 1 - β)`.
    pub fn from_beta(beta: f64) -> Result<Self> {
        Self::new(beta, 1.0 - beta)
    }

    pub fn balanced() -> Self {
        RateProfile {
            rho1: 0.5,
            rho2: 0.5,
        }
    }

    pub fn get(&self, k: usize) -> f64 {
        if k == 0 {
            self.rho1
        } else {
            self.rho2
        }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.rho1, self.rho2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceResult {
    /// Achieved scaling `R`; user `k` gets at least `ρ_k·R`.
    pub sum_rate: f64,
    pub p1: f64,
    pub p2: f64,
    pub rates: RatePoint,
}

/// Perron root and eigenvector of a nonnegative 3×3 matrix.
///
/// The vector is scaled so that its last entry is 1. If that entry vanishes
/// the unit-norm vector is returned instead.
pub fn dominant_eigenpair(a: &Matrix3<f64>, tol: f64) -> Result<(f64, Vector3<f64>)> {
    if a.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidArgument(
            "eigenpair input must be finite and nonnegative".into(),
        ));
    }
    let scale = a.norm();
    if scale == 0.0 {
        return Ok((0.0, Vector3::new(0.0, 0.0, 1.0)));
    }
    // Shifting by half the root keeps the other eigenvalues below a third of
    // it in the shifted spectrum, also for periodic or reducible matrices.
    let root = a
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(0.0, f64::max);
    let shift = (0.5 * root).max(1e-12 * scale);
    let b = a + Matrix3::identity() * shift;

    let mut v = Vector3::repeat(1.0 / 3f64.sqrt());
    let mut converged = false;
    for _ in 0..EIGEN_MAX_ITER {
        let bv = b * v;
        v = bv / bv.norm();
        let av = a * v;
        let lambda = av.dot(&v);
        // Round-off floor of `A·v`; all terms are nonnegative.
        if (av - v * lambda).norm() <= tol * lambda + 64.0 * f64::EPSILON * av.norm() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            what: "dominant eigenpair",
            iterations: EIGEN_MAX_ITER,
        });
    }
    // Extra sweeps settle small components to full relative accuracy.
    for _ in 0..100 {
        let bv = b * v;
        v = bv / bv.norm();
    }
    let lambda = (a * v).dot(&v);
    if v[2].abs() <= 1e-12 {
        v[2] = 0.0;
        return Ok((lambda, v / v.norm()));
    }
    Ok((lambda, v / v[2]))
}

/// `(h_kj p_j h_kjᴴ + I)⁻¹ h_kk` via the Sherman–Morrison identity.
pub fn mmse_filter(ch: &SimoChannel, k: usize, p_j: f64) -> Vec<Cplx> {
    let hd = ch.direct(k);
    let hx = ch.cross(k);
    let coef = dot_h(hx, hd) * (p_j / (1.0 + p_j * norm_sqr(hx)));
    hd.iter().zip(hx).map(|(d, x)| d - x * coef).collect()
}

/// Outcome of one `Γ(R)` evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct GammaEval {
    pub gamma: f64,
    pub powers: [f64; 2],
}

fn single_user_gamma(ch: &SimoChannel, k: usize, target: f64) -> GammaEval {
    let mut powers = [0.0; 2];
    powers[k] = ch.power(k);
    let snr = norm_sqr(ch.direct(k)) * ch.power(k);
    let need = target.exp2() - 1.0;
    let gamma = if need <= 0.0 {
        GAMMA_CAP
    } else {
        (snr / need).min(GAMMA_CAP)
    };
    GammaEval { gamma, powers }
}

pub(crate) fn evaluate_gamma(
    ch: &SimoChannel,
    profile: &RateProfile,
    r: f64,
    tol: f64,
) -> Result<GammaEval> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!("rate {r} must be finite and >= 0")));
    }
    let rho = profile.as_array();
    for k in 0..2 {
        if rho[k] == 0.0 {
            let j = other(k);
            return Ok(single_user_gamma(ch, j, rho[j] * r));
        }
    }
    let targets = [(rho[0] * r).exp2() - 1.0, (rho[1] * r).exp2() - 1.0];
    if targets.iter().all(|t| *t <= 0.0) {
        return Ok(GammaEval {
            gamma: GAMMA_CAP,
            powers: [0.0; 2],
        });
    }

    let budget = ch.powers();
    for i in 0..2 {
        let mut c = [0.0; 2];
        let mut lambda_prev = f64::INFINITY;
        let mut converged = false;
        let mut lambda = 0.0;
        for _ in 0..LOOP_MAX_ITER {
            let w = [mmse_filter(ch, 0, c[1]), mmse_filter(ch, 1, c[0])];
            let mut d = [0.0; 2];
            let mut cross = [0.0; 2];
            let mut noise = [0.0; 2];
            for k in 0..2 {
                let gain = dot_h(&w[k], ch.direct(k)).norm_sqr();
                if gain == 0.0 {
                    return Err(Error::ZeroDirectChannel { user: k });
                }
                d[k] = targets[k] / gain;
                cross[k] = dot_h(&w[k], ch.cross(k)).norm_sqr();
                noise[k] = norm_sqr(&w[k]);
            }
            let psi01 = d[0] * cross[0];
            let psi10 = d[1] * cross[1];
            let sigma = [d[0] * noise[0], d[1] * noise[1]];
            let psi_row = [[0.0, psi01], [psi10, 0.0]];
            let a = Matrix3::new(
                0.0,
                psi01,
                sigma[0],
                psi10,
                0.0,
                sigma[1],
                psi_row[i][0] / budget[i],
                psi_row[i][1] / budget[i],
                sigma[i] / budget[i],
            );
            let (l, v) = dominant_eigenpair(&a, 1e-13)?;
            if v[2] != 1.0 {
                return Err(Error::NoAdmissiblePowers { rate: r });
            }
            lambda = l;
            c = [v[0].max(0.0), v[1].max(0.0)];
            if (lambda - lambda_prev).abs() <= tol * lambda.max(1.0) {
                converged = true;
                break;
            }
            lambda_prev = lambda;
        }
        if !converged {
            return Err(Error::NoConvergence {
                what: "filter/eigenpair iteration",
                iterations: LOOP_MAX_ITER,
            });
        }
        if (0..2).all(|k| c[k] <= budget[k] * (1.0 + POWER_SLACK)) {
            let gamma = if lambda > 0.0 {
                (1.0 / lambda).min(GAMMA_CAP)
            } else {
                GAMMA_CAP
            };
            let powers = [c[0].min(budget[0]), c[1].min(budget[1])];
            return Ok(GammaEval { gamma, powers });
        }
    }
    Err(Error::NoAdmissiblePowers { rate: r })
}

/// `Γ(R)`: the rate targets `ρ_k·R` are feasible iff `Γ(R) >= 1`.
///
/// `tol` bounds the eigenvalue change at which the filter loop stops.
pub fn gamma_of_r(ch: &SimoChannel, profile: &RateProfile, r: f64, tol: f64) -> Result<f64> {
    Ok(evaluate_gamma(ch, profile, r, tol)?.gamma)
}

pub(crate) fn single_user_sum(ch: &SimoChannel) -> f64 {
    (0..2)
        .map(|k| (norm_sqr(ch.direct(k)) * ch.power(k)).ln_1p() / std::f64::consts::LN_2)
        .sum()
}

/// Largest `R` (to within `eps`) such that proper powers achieve `ρ_k·R` for both users.
pub fn balance_pure_proper(
    ch: &SimoChannel,
    profile: &RateProfile,
    eps: f64,
) -> Result<BalanceResult> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps {eps} must be > 0")));
    }
    let rho = profile.as_array();
    for k in 0..2 {
        if rho[k] == 0.0 {
            let j = other(k);
            let mut p = [0.0; 2];
            p[j] = ch.power(j);
            let rates = rate_proper(ch, p[0], p[1])?;
            return Ok(BalanceResult {
                sum_rate: rates.get(j),
                p1: p[0],
                p2: p[1],
                rates,
            });
        }
    }

    let mut lo = 0.0;
    let mut hi = single_user_sum(ch);
    let mut powers = [0.0; 2];
    while hi - lo > eps {
        let mid = 0.5 * (lo + hi);
        let ev = evaluate_gamma(ch, profile, mid, LOOP_TOL)?;
        if ev.gamma >= 1.0 {
            lo = mid;
            powers = ev.powers;
        } else {
            hi = mid;
        }
    }
    let rates = rate_proper(ch, powers[0], powers[1])?;
    Ok(BalanceResult {
        sum_rate: lo,
        p1: powers[0],
        p2: powers[1],
        rates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::sinr;
    use crate::region::preset_scenario;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Largest real root of the characteristic polynomial, by bisection on
    /// `det(tI - A)` starting above the row-sum bound.
    fn perron_root_oracle(a: &Matrix3<f64>) -> f64 {
        let p = |t: f64| (Matrix3::identity() * t - a).determinant();
        let mut hi = a.row_iter().map(|r| r.sum()).fold(0.0, f64::max) + 1.0;
        // The polynomial is positive beyond the largest real root.
        let mut lo = hi;
        let step = hi / 1e5;
        while lo > -step && p(lo) > 0.0 {
            lo -= step;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if p(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn eigenpair_identity() {
        let (l, v) = dominant_eigenpair(&Matrix3::identity(), 1e-12).unwrap();
        assert!((l - 1.0).abs() < 1e-12);
        assert!((Matrix3::identity() * v - v).norm() < 1e-12);
    }

    #[test]
    fn eigenpair_analytic() {
        let a = Matrix3::new(2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 1.0);
        let (l, v) = dominant_eigenpair(&a, 1e-12).unwrap();
        assert!((l - 3.0).abs() < 1e-10);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v - Vector3::new(s, s, 0.0)).norm() < 1e-8);
        let perm = Matrix3::new(1.0, 0.0, 0.0, 0.0, 2.0, 1.0, 0.0, 1.0, 2.0);
        let (l, v) = dominant_eigenpair(&perm, 1e-12).unwrap();
        assert!((l - 3.0).abs() < 1e-10);
        assert!(v[0].abs() < 1e-8 && (v[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn eigenpair_matches_characteristic_root() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let a = Matrix3::from_fn(|_, _| rng.gen_range(0.0..3.0));
            let (l, v) = dominant_eigenpair(&a, 1e-13).unwrap();
            let oracle = perron_root_oracle(&a);
            assert!((l - oracle).abs() < 1e-8, "{l} vs {oracle}");
            assert!((a * v - v * l).norm() <= 1e-10 * l * v.norm());
        }
    }

    #[test]
    fn eigenpair_periodic_matrix() {
        let a = Matrix3::new(0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0);
        let (l, v) = dominant_eigenpair(&a, 1e-12).unwrap();
        assert!((l - 1.0).abs() < 1e-10);
        assert!((v - Vector3::repeat(1.0)).norm() < 1e-8);
    }

    #[test]
    fn eigenpair_reducible_with_small_root() {
        // Zero cross gain at receiver 1: spectrum {σ, 0, 0} with a Jordan block at 0.
        let a = Matrix3::new(0.0, 0.0, 1e-9, 5.0, 0.0, 2.0, 0.0, 0.0, 1e-10);
        let (l, v) = dominant_eigenpair(&a, 1e-13).unwrap();
        assert!((l - 1e-10).abs() < 1e-20, "{l}");
        let expect = Vector3::new(10.0, 5.0 * 10.0 / 1e-10 + 2.0 / 1e-10, 1.0);
        assert!(((v - expect).component_div(&expect)).norm() < 1e-8, "{v:?}");
    }

    #[test]
    fn mmse_without_interference_is_matched() {
        let ch = preset_scenario("fig1").unwrap();
        assert_eq!(mmse_filter(&ch, 0, 0.0), ch.h11);
    }

    #[test]
    fn mmse_with_orthogonal_interference() {
        let c = |re: f64, im: f64| Cplx::new(re, im);
        let ch = SimoChannel::new(
            vec![c(1.0, 1.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(2.0, -1.0)],
            vec![c(1.0, 0.0)],
            vec![c(1.0, 0.0)],
            1.0,
            1.0,
        )
        .unwrap();
        for pj in [0.0, 1.0, 100.0] {
            let w = mmse_filter(&ch, 0, pj);
            assert!((w[0] - c(1.0, 1.0)).norm() < 1e-15 && w[1].norm() < 1e-15);
        }
    }

    #[test]
    fn mmse_beats_random_filters() {
        let ch = preset_scenario("fig1").unwrap();
        let w1 = mmse_filter(&ch, 0, 10.0);
        let (best, _) = sinr(&ch, &w1, &ch.h22, 10.0, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let w: Vec<Cplx> = (0..2)
                .map(|_| Cplx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let (g, _) = sinr(&ch, &w, &ch.h22, 10.0, 10.0).unwrap();
            assert!(g <= best + 1e-12);
        }
    }

    #[test]
    fn gamma_at_zero_is_capped() {
        let ch = preset_scenario("fig1").unwrap();
        let g = gamma_of_r(&ch, &RateProfile::balanced(), 0.0, LOOP_TOL).unwrap();
        assert_eq!(g, GAMMA_CAP);
    }

    #[test]
    fn gamma_is_nonincreasing() {
        for name in ["fig1", "fig2", "fig3"] {
            let ch = preset_scenario(name).unwrap();
            for beta in [0.2, 0.5, 0.8] {
                let prof = RateProfile::from_beta(beta).unwrap();
                let mut prev = f64::INFINITY;
                for i in 1..=40 {
                    let r = 0.25 * i as f64;
                    let g = gamma_of_r(&ch, &prof, r, LOOP_TOL).unwrap();
                    assert!(g <= prev * (1.0 + 1e-9), "{name} {beta} {r}: {g} > {prev}");
                    prev = g;
                }
            }
        }
    }

    #[test]
    fn gamma_below_one_at_six() {
        let ch = preset_scenario("fig1").unwrap();
        let g = gamma_of_r(&ch, &RateProfile::balanced(), 6.0, LOOP_TOL).unwrap();
        assert!(g < 1.0);
    }

    #[test]
    fn single_user_profile_hits_corner() {
        let ch = preset_scenario("fig1").unwrap();
        let res = balance_pure_proper(&ch, &RateProfile::new(1.0, 0.0).unwrap(), 1e-6).unwrap();
        assert!((res.rates.r1 - 4.22659234751577).abs() < 1e-3);
        assert_eq!(res.rates.r2, 0.0);
    }

    #[test]
    fn invalid_profiles_are_rejected() {
        assert!(RateProfile::new(0.6, 0.6).is_err());
        assert!(RateProfile::new(-0.1, 1.1).is_err());
        assert!(RateProfile::new(f64::NAN, 0.5).is_err());
    }

    /// Maximum of `min_k r_k / ρ_k` over a fine power grid.
    fn grid_balance(ch: &SimoChannel, prof: &RateProfile, n: usize) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..=n {
            for j in 0..=n {
                let p1 = ch.p1 * i as f64 / n as f64;
                let p2 = ch.p2 * j as f64 / n as f64;
                let r = rate_proper(ch, p1, p2).unwrap();
                best = best.max((r.r1 / prof.rho1).min(r.r2 / prof.rho2));
            }
        }
        best
    }

    #[test]
    fn bisection_certificate_and_grid_oracle() {
        for name in ["fig1", "fig2", "fig3"] {
            let ch = preset_scenario(name).unwrap();
            for beta in [0.3, 0.5, 0.7] {
                let prof = RateProfile::from_beta(beta).unwrap();
                let eps = 1e-6;
                let res = balance_pure_proper(&ch, &prof, eps).unwrap();
                let below = gamma_of_r(&ch, &prof, res.sum_rate - eps, LOOP_TOL).unwrap();
                let above = gamma_of_r(&ch, &prof, res.sum_rate + eps, LOOP_TOL).unwrap();
                assert!(below >= 1.0 && above <= 1.0, "{name} {beta}: {below} {above}");
                for k in 0..2 {
                    assert!(res.rates.get(k) >= prof.get(k) * res.sum_rate - eps);
                }
                assert!(res.p1 <= ch.p1 + 1e-9 && res.p2 <= ch.p2 + 1e-9);
                let grid = grid_balance(&ch, &prof, 400);
                assert!(grid <= res.sum_rate + 1e-5, "{name} {beta}: grid {grid} > {}", res.sum_rate);
                assert!(grid >= res.sum_rate - 5e-2, "{name} {beta}: grid {grid} << {}", res.sum_rate);
            }
        }
    }
}
