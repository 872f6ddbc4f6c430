//! Achievable rates with interference treated as noise.
//!
//! Three equivalent evaluations are provided: the complex covariance /
//! pseudocovariance form, the composite real form and the closed form for
//! proper inputs. All rates are in bits per channel use.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

use crate::channel::{
    enhance_channel, other, Cplx, CompositeCov, SimoChannel, TransformedChannel, TxStrategy,
};
use crate::error::{Error, Result};
use crate::linalg::{dot_h, norm_sqr};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RatePoint {
    pub r1: f64,
    pub r2: f64,
}

impl RatePoint {
    pub fn new(r1: f64, r2: f64) -> Self {
        RatePoint { r1, r2 }
    }

    pub fn from_array(r: [f64; 2]) -> Self {
        RatePoint { r1: r[0], r2: r[1] }
    }

    pub fn get(&self, k: usize) -> f64 {
        if k == 0 {
            self.r1
        } else {
            self.r2
        }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.r1, self.r2]
    }

    pub fn sum(&self) -> f64 {
        self.r1 + self.r2
    }
}

fn finite_rates(r: [f64; 2]) -> Result<RatePoint> {
    for (k, v) in r.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteRate { user: k });
        }
    }
    // Exact arithmetic gives r >= 0; only round-off can push below.
    Ok(RatePoint::new(r[0].max(0.0), r[1].max(0.0)))
}

fn embed_scalar(z: Cplx) -> Matrix2<f64> {
    Matrix2::new(z.re, -z.im, z.im, z.re)
}

/// Composite real channel reduced to its Gram matrices.
///
/// With `G_k = [Ĥ_kk, Ĥ_kj]` and `S_k = blockdiag(m_k, m_j)` the receive
/// covariance determinant ratio collapses to `det(I + 2 S_k G_kᵀ G_k)`, a 4×4
/// determinant independent of the number of receive antennas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositeChannel {
    gram: [Matrix4<f64>; 2],
    cross_gain: [f64; 2],
}

impl CompositeChannel {
    pub fn new(ch: &SimoChannel) -> Self {
        let block = |k: usize| {
            let d = ch.direct(k);
            let x = ch.cross(k);
            let mut g = Matrix4::zeros();
            let dd = norm_sqr(d);
            let xx = norm_sqr(x);
            g.fixed_view_mut::<2, 2>(0, 0).copy_from(&(Matrix2::identity() * dd));
            g.fixed_view_mut::<2, 2>(2, 2).copy_from(&(Matrix2::identity() * xx));
            let off = embed_scalar(dot_h(d, x));
            g.fixed_view_mut::<2, 2>(0, 2).copy_from(&off);
            g.fixed_view_mut::<2, 2>(2, 0).copy_from(&off.transpose());
            (g, xx)
        };
        let (g0, x0) = block(0);
        let (g1, x1) = block(1);
        CompositeChannel {
            gram: [g0, g1],
            cross_gain: [x0, x1],
        }
    }

    fn stacked(k: usize, m: &[Matrix2<f64>; 2]) -> Matrix4<f64> {
        let mut s = Matrix4::zeros();
        s.fixed_view_mut::<2, 2>(0, 0).copy_from(&m[k]);
        s.fixed_view_mut::<2, 2>(2, 2).copy_from(&m[other(k)]);
        s
    }

    /// Rate of user `k`; `m[i]` is the composite covariance of user `i`.
    pub fn rate(&self, k: usize, m: &[Matrix2<f64>; 2]) -> f64 {
        let s = Self::stacked(k, m);
        let num = (Matrix4::identity() + 2.0 * s * self.gram[k]).determinant();
        let den = (Matrix2::identity() + 2.0 * self.cross_gain[k] * m[other(k)]).determinant();
        0.5 * (num / den).log2()
    }

    pub fn rates(&self, m: &[Matrix2<f64>; 2]) -> [f64; 2] {
        [self.rate(0, m), self.rate(1, m)]
    }

    /// `G_kᵀ Ĉy_k⁻¹ G_k` (4×4) and `Ĥ_kjᵀ Ĉs_k⁻¹ Ĥ_kj` (2×2) at receiver `k`.
    ///
    /// Returns `None` if the 4×4 system is numerically singular.
    pub fn whitened_gram(
        &self,
        k: usize,
        m: &[Matrix2<f64>; 2],
    ) -> Option<(Matrix4<f64>, Matrix2<f64>)> {
        let s = Self::stacked(k, m);
        let g = self.gram[k];
        let inv = (Matrix4::identity() * 0.5 + s * g).try_inverse()?;
        let n = self.cross_gain[k];
        let inv_s = (Matrix2::identity() * 0.5 + n * m[other(k)]).try_inverse()?;
        Some((g * inv, n * inv_s))
    }

    /// Gradient of `w_0 r_0 + w_1 r_1` with respect to each composite covariance.
    pub fn weighted_gradient(
        &self,
        weights: [f64; 2],
        m: &[Matrix2<f64>; 2],
    ) -> Option<[Matrix2<f64>; 2]> {
        let c = 1.0 / (2.0 * LN_2);
        let w0 = self.whitened_gram(0, m)?;
        let w1 = self.whitened_gram(1, m)?;
        let own = |w: &(Matrix4<f64>, Matrix2<f64>)| w.0.fixed_view::<2, 2>(0, 0).into_owned();
        let leak =
            |w: &(Matrix4<f64>, Matrix2<f64>)| w.0.fixed_view::<2, 2>(2, 2).into_owned() - w.1;
        let g0 = c * (weights[0] * own(&w0) + weights[1] * leak(&w1));
        let g1 = c * (weights[1] * own(&w1) + weights[0] * leak(&w0));
        Some([
            crate::linalg::symmetrize2(&g0),
            crate::linalg::symmetrize2(&g1),
        ])
    }
}

fn outer(h: &[Cplx], g: &[Cplx], scale: Cplx, conj: bool) -> DMatrix<Cplx> {
    let n = h.len();
    DMatrix::from_fn(n, n, |i, j| {
        let gj = if conj { g[j].conj() } else { g[j] };
        h[i] * scale * gj
    })
}

fn complex_rate_user(ch: &SimoChannel, x: &TxStrategy, k: usize) -> Option<f64> {
    let j = other(k);
    let n = ch.antennas(k);
    let (hd, hx) = (ch.direct(k), ch.cross(k));
    let eye = DMatrix::<Cplx>::identity(n, n);
    let re = |v: f64| Cplx::new(v, 0.0);

    let cs = outer(hx, hx, re(x.c[j]), true) + &eye;
    let cy = outer(hd, hd, re(x.c[k]), true) + &cs;
    let ps = outer(hx, hx, x.ct[j], false);
    let py = outer(hd, hd, x.ct[k], false) + &ps;

    let first = (cy.determinant().re / cs.determinant().re).log2();
    if x.ct[0].norm_sqr() == 0.0 && x.ct[1].norm_sqr() == 0.0 {
        return Some(first);
    }
    // det(I - C⁻¹ P C⁻ᵀ Pᴴ) = det(C - P C̄⁻¹ Pᴴ) / det(C). The Schur complement
    // is bounded below by the noise, so this form does not cancel.
    let improper_term = |c: &DMatrix<Cplx>, p: &DMatrix<Cplx>| -> Option<f64> {
        let z = c.map(|v| v.conj()).lu().solve(&p.adjoint())?;
        let schur = c - p * z;
        Some(schur.determinant().re / c.determinant().re)
    };
    let second = 0.5 * (improper_term(&cy, &py)? / improper_term(&cs, &ps)?).log2();
    Some(first + second)
}

/// Rates from covariances and pseudocovariances of the complex receive signals.
pub fn rate_complex(ch: &SimoChannel, x: &TxStrategy) -> Result<RatePoint> {
    x.validate()?;
    let mut r = [0.0; 2];
    for (k, rk) in r.iter_mut().enumerate() {
        *rk = complex_rate_user(ch, x, k).ok_or(Error::NonFiniteRate { user: k })?;
    }
    finite_rates(r)
}

/// Rates from the composite real covariances `m1`, `m2` of the two inputs.
pub fn rate_composite(ch: &SimoChannel, m1: &CompositeCov, m2: &CompositeCov) -> Result<RatePoint> {
    let cc = CompositeChannel::new(ch);
    finite_rates(cc.rates(&[*m1.matrix(), *m2.matrix()]))
}

/// Rates of a strategy through the composite real form.
pub fn rate_strategy(ch: &SimoChannel, x: &TxStrategy) -> Result<RatePoint> {
    let [m1, m2] = x.composite()?;
    rate_composite(ch, &m1, &m2)
}

/// Rate of user `k` with proper inputs of powers `p`.
pub(crate) fn proper_rate_user(ch: &SimoChannel, k: usize, p: [f64; 2]) -> f64 {
    let j = other(k);
    let (hd, hx) = (ch.direct(k), ch.cross(k));
    let g = norm_sqr(hd);
    let cross = dot_h(hx, hd).norm_sqr();
    let gx = norm_sqr(hx);
    let eff = g - p[j] * cross / (1.0 + p[j] * gx);
    (p[k] * eff.max(0.0)).ln_1p() / LN_2
}

/// Rates with proper signaling and transmit powers `p1`, `p2`.
pub fn rate_proper(ch: &SimoChannel, p1: f64, p2: f64) -> Result<RatePoint> {
    for (name, p) in [("p1", p1), ("p2", p2)] {
        if !p.is_finite() {
            return Err(Error::NonFinite { path: name.into() });
        }
        if p < 0.0 {
            return Err(Error::NegativePower {
                path: name.into(),
                value: p,
            });
        }
    }
    finite_rates([
        proper_rate_user(ch, 0, [p1, p2]),
        proper_rate_user(ch, 1, [p1, p2]),
    ])
}

/// Signal-to-interference-plus-noise ratios after linear receive filters.
pub fn sinr(ch: &SimoChannel, w1: &[Cplx], w2: &[Cplx], p1: f64, p2: f64) -> Result<(f64, f64)> {
    let p = [p1, p2];
    let w = [w1, w2];
    let mut g = [0.0; 2];
    for k in 0..2 {
        let wk = w[k];
        if wk.len() != ch.antennas(k) {
            return Err(Error::DimensionMismatch {
                path: format!("w{}", k + 1),
                expected: ch.antennas(k),
                found: wk.len(),
            });
        }
        let noise = norm_sqr(wk);
        if noise == 0.0 {
            return Err(Error::ZeroFilter { user: k });
        }
        let sig = dot_h(wk, ch.direct(k)).norm_sqr() * p[k];
        let intf = dot_h(wk, ch.cross(k)).norm_sqr() * p[other(k)];
        g[k] = sig / (intf + noise);
    }
    Ok((g[0], g[1]))
}

/// Upper bound on the rates of `x` (in original coordinates) obtained by
/// evaluating the enhanced channel with anti-aligned pseudovariances.
///
/// Only the variances and pseudovariance magnitudes of `x` matter.
pub fn enhanced_upper_bound(tc: &TransformedChannel, x: &TxStrategy) -> Result<RatePoint> {
    x.validate()?;
    let ech = enhance_channel(tc).channel();
    let anti = TxStrategy::new(
        x.c[0],
        x.c[1],
        Cplx::new(x.ct[0].norm(), 0.0),
        Cplx::new(-x.ct[1].norm(), 0.0),
    );
    rate_strategy(&ech, &anti)
}
