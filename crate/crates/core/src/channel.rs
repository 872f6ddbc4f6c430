//! Channel data model, composite real embedding and the reduced-QR channel
//! transformation used by the enhancement bound.
//!
//! Users are indexed `0` and `1` throughout the crate. For user `k` the
//! direct link is `h_kk` and the interfering link is `h_kj` with `j = 1 - k`,
//! so user 0 sees `(h11, h12)` and user 1 sees `(h22, h21)`. Noise at both
//! receivers is proper with identity covariance.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot_h, norm_sqr, sym2_eigen};

pub type Cplx = Complex64;

/// Slack allowed on `|ct| <= c` and on negative eigenvalues of covariances.
pub const PSD_TOL: f64 = 1e-12;

pub const fn other(k: usize) -> usize {
    1 - k
}

/// Two-user SIMO interference channel with per-user power budgets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioFile", into = "ScenarioFile")]
pub struct SimoChannel {
    pub h11: Vec<Cplx>,
    pub h12: Vec<Cplx>,
    pub h21: Vec<Cplx>,
    pub h22: Vec<Cplx>,
    pub p1: f64,
    pub p2: f64,
}

impl SimoChannel {
    /// Builds and validates a channel.
    pub fn new(
        h11: Vec<Cplx>,
        h12: Vec<Cplx>,
        h21: Vec<Cplx>,
        h22: Vec<Cplx>,
        p1: f64,
        p2: f64,
    ) -> Result<Self> {
        validate_channel(SimoChannel {
            h11,
            h12,
            h21,
            h22,
            p1,
            p2,
        })
    }

    pub fn direct(&self, k: usize) -> &[Cplx] {
        match k {
            0 => &self.h11,
            _ => &self.h22,
        }
    }

    pub fn cross(&self, k: usize) -> &[Cplx] {
        match k {
            0 => &self.h12,
            _ => &self.h21,
        }
    }

    pub fn power(&self, k: usize) -> f64 {
        match k {
            0 => self.p1,
            _ => self.p2,
        }
    }

    pub fn powers(&self) -> [f64; 2] {
        [self.p1, self.p2]
    }

    pub fn antennas(&self, k: usize) -> usize {
        self.direct(k).len()
    }

    /// Same links with different power budgets.
    pub fn with_powers(&self, p1: f64, p2: f64) -> Result<Self> {
        validate_channel(SimoChannel {
            p1,
            p2,
            ..self.clone()
        })
    }
}

/// Checks dimensions, finiteness and power signs; returns the channel unchanged.
pub fn validate_channel(ch: SimoChannel) -> Result<SimoChannel> {
    let links: [(&str, &[Cplx], usize); 4] = [
        ("h11", &ch.h11, ch.h11.len()),
        ("h12", &ch.h12, ch.h11.len()),
        ("h21", &ch.h21, ch.h22.len()),
        ("h22", &ch.h22, ch.h22.len()),
    ];
    for (name, v, expected) in links {
        if v.is_empty() {
            return Err(Error::EmptyChannel { path: name.into() });
        }
        if v.len() != expected {
            return Err(Error::DimensionMismatch {
                path: name.into(),
                expected,
                found: v.len(),
            });
        }
        if let Some(i) = v.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite {
                path: format!("{name}[{i}]"),
            });
        }
    }
    for (name, p) in [("p1", ch.p1), ("p2", ch.p2)] {
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
    Ok(ch)
}

/// On-disk scenario layout: complex entries as `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub h11: Vec<[f64; 2]>,
    pub h12: Vec<[f64; 2]>,
    pub h21: Vec<[f64; 2]>,
    pub h22: Vec<[f64; 2]>,
    pub p1: f64,
    pub p2: f64,
}

impl TryFrom<ScenarioFile> for SimoChannel {
    type Error = Error;

    fn try_from(f: ScenarioFile) -> Result<Self> {
        let conv = |v: Vec<[f64; 2]>| v.into_iter().map(|[re, im]| Cplx::new(re, im)).collect();
        SimoChannel::new(conv(f.h11), conv(f.h12), conv(f.h21), conv(f.h22), f.p1, f.p2)
    }
}

impl From<SimoChannel> for ScenarioFile {
    fn from(ch: SimoChannel) -> Self {
        let conv = |v: Vec<Cplx>| v.into_iter().map(|z| [z.re, z.im]).collect();
        ScenarioFile {
            h11: conv(ch.h11),
            h12: conv(ch.h12),
            h21: conv(ch.h21),
            h22: conv(ch.h22),
            p1: ch.p1,
            p2: ch.p2,
        }
    }
}

/// Transmit variances `c` and complex pseudovariances `ct` of both users.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxStrategy {
    pub c: [f64; 2],
    pub ct: [Cplx; 2],
}

impl TxStrategy {
    pub fn new(c1: f64, c2: f64, ct1: Cplx, ct2: Cplx) -> Self {
        TxStrategy {
            c: [c1, c2],
            ct: [ct1, ct2],
        }
    }

    pub fn proper(c1: f64, c2: f64) -> Self {
        Self::new(c1, c2, Cplx::new(0.0, 0.0), Cplx::new(0.0, 0.0))
    }

    pub fn is_proper(&self) -> bool {
        self.ct.iter().all(|z| z.norm_sqr() == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        for k in 0..2 {
            let (c, ct) = (self.c[k], self.ct[k]);
            if !c.is_finite() || !ct.re.is_finite() || !ct.im.is_finite() {
                return Err(Error::NonFinite {
                    path: format!("strategy.user{k}"),
                });
            }
            if c < 0.0 {
                return Err(Error::NegativePower {
                    path: format!("strategy.c{}", k + 1),
                    value: c,
                });
            }
            if ct.norm() > c + PSD_TOL * c.max(1.0) {
                return Err(Error::InvalidPseudovariance {
                    user: k,
                    magnitude: ct.norm(),
                    variance: c,
                });
            }
        }
        Ok(())
    }

    pub fn composite(&self) -> Result<[CompositeCov; 2]> {
        Ok([
            composite_cov_from_strategy(self.c[0], self.ct[0])?,
            composite_cov_from_strategy(self.c[1], self.ct[1])?,
        ])
    }
}

/// Composite real covariance of one scalar complex input (2×2, symmetric PSD).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositeCov(Matrix2<f64>);

impl CompositeCov {
    pub fn zero() -> Self {
        CompositeCov(Matrix2::zeros())
    }

    /// Proper input of variance `c`: `(c/2)·I`.
    pub fn proper(c: f64) -> Self {
        CompositeCov(Matrix2::identity() * (0.5 * c))
    }

    /// Validates symmetry and PSD-ness. Eigenvalues down to `-PSD_TOL` are
    /// clipped to zero.
    pub fn from_matrix(m: Matrix2<f64>) -> Result<Self> {
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                path: "composite covariance".into(),
            });
        }
        let scale = m.abs().max().max(1.0);
        let asymmetry = (m[(0, 1)] - m[(1, 0)]).abs();
        if asymmetry > PSD_TOL * scale {
            return Err(Error::NotSymmetric { asymmetry });
        }
        let (vals, vecs) = sym2_eigen(&m);
        if vals[1] < -PSD_TOL * scale {
            return Err(Error::Indefinite {
                min_eigenvalue: vals[1],
            });
        }
        if vals[1] < 0.0 {
            let clipped = [vals[0].max(0.0), 0.0];
            return Ok(CompositeCov(crate::linalg::sym2_compose(clipped, &vecs)));
        }
        Ok(CompositeCov(crate::linalg::symmetrize2(&m)))
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix2<f64>) -> Self {
        CompositeCov(m)
    }

    pub fn matrix(&self) -> &Matrix2<f64> {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        sym2_eigen(&self.0).0
    }

    /// Variance and pseudovariance this covariance describes.
    pub fn to_strategy(&self) -> (f64, Cplx) {
        strategy_from_composite_cov(self)
    }

    /// True if the matrix has the `(c/2)·I` structure of a proper input.
    pub fn is_proper(&self, tol: f64) -> bool {
        let m = &self.0;
        (m[(0, 0)] - m[(1, 1)]).abs() <= tol && m[(0, 1)].abs() <= tol
    }
}

/// Real embedding `[[Re A, -Im A], [Im A, Re A]]` of a complex matrix.
pub fn composite_real_embed(a: &DMatrix<Cplx>) -> DMatrix<f64> {
    let (r, c) = a.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let z = a[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + c)] = -z.im;
            out[(i + r, j)] = z.im;
            out[(i + r, j + c)] = z.re;
        }
    }
    out
}

/// Embedding of a complex column vector, a `2N × 2` real matrix.
pub fn composite_real_embed_vector(v: &[Cplx]) -> DMatrix<f64> {
    composite_real_embed(&DMatrix::from_column_slice(v.len(), 1, v))
}

/// `(c/2)·I + (|ct|/2)·[[cos α, sin α], [sin α, -cos α]]` with `α = arg ct`.
pub fn composite_cov_from_strategy(c: f64, ct: Cplx) -> Result<CompositeCov> {
    if !c.is_finite() || !ct.re.is_finite() || !ct.im.is_finite() {
        return Err(Error::NonFinite {
            path: "strategy".into(),
        });
    }
    if c < 0.0 {
        return Err(Error::NegativePower {
            path: "strategy.c".into(),
            value: c,
        });
    }
    if ct.norm() > c + PSD_TOL * c.max(1.0) {
        return Err(Error::InvalidPseudovariance {
            user: 0,
            magnitude: ct.norm(),
            variance: c,
        });
    }
    Ok(CompositeCov(Matrix2::new(
        0.5 * (c + ct.re),
        0.5 * ct.im,
        0.5 * ct.im,
        0.5 * (c - ct.re),
    )))
}

/// Inverse of [`composite_cov_from_strategy`].
pub fn strategy_from_composite_cov(m: &CompositeCov) -> (f64, Cplx) {
    let m = &m.0;
    let c = m[(0, 0)] + m[(1, 1)];
    let ct = Cplx::new(m[(0, 0)] - m[(1, 1)], m[(0, 1)] + m[(1, 0)]);
    (c, ct)
}

/// Reduced QR factors of `[h_kk, h_kj]` for one user.
#[derive(Debug, Clone)]
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) struct QrFactors {
    pub q1: Vec<Cplx>,
    /// `None` for single-antenna receivers.
    pub q2: Option<Vec<Cplx>>,
    pub h: f64,
    pub a: f64,
    pub phi: f64,
    pub b: f64,
    pub psi: f64,
}

pub(crate) fn reduced_qr(direct: &[Cplx], cross: &[Cplx], user: usize) -> Result<QrFactors> {
    let h = norm_sqr(direct).sqrt();
    if h == 0.0 {
        return Err(Error::ZeroDirectChannel { user });
    }
    let q1: Vec<Cplx> = direct.iter().map(|z| z / h).collect();
    let r12 = dot_h(&q1, cross);
    let (a, phi) = if r12.norm() == 0.0 {
        (0.0, 0.0)
    } else {
        (r12.norm(), r12.arg())
    };
    let residual: Vec<Cplx> = cross
        .iter()
        .zip(&q1)
        .map(|(x, q)| x - q * r12)
        .collect();
    let b = norm_sqr(&residual).sqrt();
    let cross_norm = norm_sqr(cross).sqrt();

    if b > 1e-12 * cross_norm && b > 0.0 {
        let q2 = residual.iter().map(|z| z / b).collect();
        return Ok(QrFactors {
            q1,
            q2: Some(q2),
            h,
            a,
            phi,
            b,
            psi: 0.0,
        });
    }

    // Rank deficient: complete with the canonical basis vector least aligned
    // with q1, orthogonalised against it.
    let q2 = if direct.len() >= 2 {
        let seed = q1
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.norm().total_cmp(&y.1.norm()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let overlap = q1[seed].conj();
        let mut v: Vec<Cplx> = q1.iter().map(|q| -q * overlap).collect();
        v[seed] += Cplx::new(1.0, 0.0);
        let n = norm_sqr(&v).sqrt();
        Some(v.into_iter().map(|z| z / n).collect())
    } else {
        None
    };
    Ok(QrFactors {
        q1,
        q2,
        h,
        a,
        phi,
        b: 0.0,
        psi: 0.0,
    })
}

/// Two-antenna equivalent of a SIMO interference channel.
///
/// The transformed system has `h'_11 = [h_1, 0]`, `h'_12 = [a_1, b_1]`,
/// `h'_21 = [a_2, b_2]` and `h'_22 = [h_2 e^{jθ}, 0]` with `θ = -φ_1 - φ_2`.
/// It has the same rates as the original channel once the pseudovariance of
/// user 2 is rotated by `e^{j2φ_1}` (see [`TransformedChannel::map_strategy`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformedChannel {
    pub h: [f64; 2],
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub phi: [f64; 2],
    pub psi: [f64; 2],
    pub theta: f64,
    pub power: [f64; 2],
}

impl TransformedChannel {
    /// Explicit 2-antenna channel vectors of the transformed system.
    pub fn channel(&self) -> SimoChannel {
        let r = |x: f64| Cplx::new(x, 0.0);
        SimoChannel {
            h11: vec![r(self.h[0]), r(0.0)],
            h12: vec![r(self.a[0]), r(self.b[0])],
            h21: vec![r(self.a[1]), r(self.b[1])],
            h22: vec![Cplx::from_polar(self.h[1], self.theta), r(0.0)],
            p1: self.power[0],
            p2: self.power[1],
        }
    }

    /// Maps a strategy of the original channel into transformed coordinates.
    pub fn map_strategy(&self, x: &TxStrategy) -> TxStrategy {
        let rot = Cplx::from_polar(1.0, 2.0 * self.phi[0]);
        TxStrategy {
            c: x.c,
            ct: [x.ct[0], x.ct[1] * rot],
        }
    }

    /// Inverse of [`Self::map_strategy`].
    pub fn unmap_strategy(&self, x: &TxStrategy) -> TxStrategy {
        let rot = Cplx::from_polar(1.0, -2.0 * self.phi[0]);
        TxStrategy {
            c: x.c,
            ct: [x.ct[0], x.ct[1] * rot],
        }
    }
}

pub fn transform_channel(ch: &SimoChannel) -> Result<TransformedChannel> {
    let f = [
        reduced_qr(ch.direct(0), ch.cross(0), 0)?,
        reduced_qr(ch.direct(1), ch.cross(1), 1)?,
    ];
    Ok(TransformedChannel {
        h: [f[0].h, f[1].h],
        a: [f[0].a, f[1].a],
        b: [f[0].b, f[1].b],
        phi: [f[0].phi, f[1].phi],
        psi: [f[0].psi, f[1].psi],
        theta: -f[0].phi - f[1].phi,
        power: ch.powers(),
    })
}

/// Enhanced channel: the transformed channel with `θ = 0`.
pub fn enhance_channel(tc: &TransformedChannel) -> TransformedChannel {
    TransformedChannel { theta: 0.0, ..*tc }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::preset_scenario;

    fn c(re: f64, im: f64) -> Cplx {
        Cplx::new(re, im)
    }

    #[test]
    fn fig1_preset_is_valid() {
        let ch = preset_scenario("fig1").unwrap();
        assert!(validate_channel(ch.clone()).is_ok());
    }

    #[test]
    fn negative_power_is_rejected() {
        let ch = preset_scenario("fig1").unwrap();
        let err = ch.with_powers(-1.0, 10.0).unwrap_err();
        assert!(matches!(err, Error::NegativePower { ref path, .. } if path == "p1"));
        assert!(err.to_string().contains("negative power"));
    }

    #[test]
    fn cross_length_mismatch_is_rejected() {
        let mut ch = preset_scenario("fig1").unwrap();
        ch.h12.push(c(1.0, 0.0));
        let err = validate_channel(ch).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { ref path, expected: 2, found: 3 } if path == "h12"));
        assert!(err.to_string().contains("dimension mismatch"));
    }

    #[test]
    fn non_finite_entry_is_reported_with_path() {
        let mut ch = preset_scenario("fig2").unwrap();
        ch.h21[1] = c(f64::NAN, 0.0);
        let err = validate_channel(ch).unwrap_err();
        assert!(matches!(err, Error::NonFinite { ref path } if path == "h21[1]"));
    }

    #[test]
    fn embed_scalars() {
        let one = composite_real_embed(&DMatrix::from_element(1, 1, c(1.0, 0.0)));
        assert_eq!(one, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]));
        let j = composite_real_embed(&DMatrix::from_element(1, 1, c(0.0, 1.0)));
        assert_eq!(j, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
    }

    #[test]
    fn cov_from_strategy_examples() {
        let m = composite_cov_from_strategy(2.0, c(0.0, 0.0)).unwrap();
        assert_eq!(*m.matrix(), Matrix2::new(1.0, 0.0, 0.0, 1.0));
        let m = composite_cov_from_strategy(2.0, c(2.0, 0.0)).unwrap();
        assert_eq!(*m.matrix(), Matrix2::new(2.0, 0.0, 0.0, 0.0));
        assert!(composite_cov_from_strategy(1.0, c(1.5, 0.0)).is_err());
    }

    #[test]
    fn cov_from_strategy_matches_covariance_relation() {
        // Evaluate the general relation for a scalar directly:
        // ½([[Re C, -Im C],[Im C, Re C]] + [[Re C̃, Im C̃],[Im C̃, -Re C̃]]) with real C = c.
        let (cv, ct) = (1.0, Cplx::from_polar(0.5, std::f64::consts::FRAC_PI_3));
        let expected = 0.5
            * (Matrix2::new(cv, 0.0, 0.0, cv) + Matrix2::new(ct.re, ct.im, ct.im, -ct.re));
        let m = composite_cov_from_strategy(cv, ct).unwrap();
        assert!((m.matrix() - expected).norm() < 1e-15);
        assert!((m.trace() - cv).abs() < 1e-15);
        let ev = m.eigenvalues();
        assert!((ev[0] - 0.75).abs() < 1e-14 && (ev[1] - 0.25).abs() < 1e-14);
    }

    #[test]
    fn strategy_from_cov_examples() {
        let (cv, ct) = CompositeCov::proper(2.0).to_strategy();
        assert_eq!((cv, ct), (2.0, c(0.0, 0.0)));
        let m = CompositeCov::from_matrix(Matrix2::new(2.0, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(m.to_strategy(), (2.0, c(2.0, 0.0)));
    }

    #[test]
    fn from_matrix_rejects_bad_input() {
        assert!(matches!(
            CompositeCov::from_matrix(Matrix2::new(1.0, 0.5, 0.2, 1.0)),
            Err(Error::NotSymmetric { .. })
        ));
        assert!(matches!(
            CompositeCov::from_matrix(Matrix2::new(1.0, 0.0, 0.0, -0.5)),
            Err(Error::Indefinite { .. })
        ));
        let clipped = CompositeCov::from_matrix(Matrix2::new(1.0, 0.0, 0.0, -1e-14)).unwrap();
        assert!(clipped.eigenvalues()[1] >= 0.0);
    }

    #[test]
    fn upper_triangular_real_channel_is_fixed_point() {
        let ch = SimoChannel::new(
            vec![c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.6, 0.0), c(0.8, 0.0)],
            vec![c(0.3, 0.0), c(0.4, 0.0)],
            vec![c(2.0, 0.0), c(0.0, 0.0)],
            1.0,
            1.0,
        )
        .unwrap();
        let tc = transform_channel(&ch).unwrap();
        assert!((tc.h[0] - 1.0).abs() < 1e-15);
        assert!((tc.a[0] - 0.6).abs() < 1e-15);
        assert!((tc.b[0] - 0.8).abs() < 1e-15);
        assert_eq!(tc.phi[0], 0.0);
        assert_eq!(tc.psi[0], 0.0);
    }

    #[test]
    fn qr_factors_are_consistent() {
        for name in ["fig1", "fig2", "fig3"] {
            let ch = preset_scenario(name).unwrap();
            for k in 0..2 {
                let f = reduced_qr(ch.direct(k), ch.cross(k), k).unwrap();
                let q2 = f.q2.as_ref().unwrap();
                assert!((norm_sqr(&f.q1) - 1.0).abs() < 1e-12);
                assert!((norm_sqr(q2) - 1.0).abs() < 1e-12);
                assert!(dot_h(&f.q1, q2).norm() < 1e-12);
                let r12 = Cplx::from_polar(f.a, f.phi);
                let r22 = Cplx::from_polar(f.b, f.psi);
                for i in 0..ch.antennas(k) {
                    assert!((f.q1[i] * f.h - ch.direct(k)[i]).norm() < 1e-12);
                    assert!((f.q1[i] * r12 + q2[i] * r22 - ch.cross(k)[i]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_interference_link_completes_basis() {
        let ch = preset_scenario("fig3").unwrap();
        let tc = transform_channel(&ch).unwrap();
        assert_eq!(tc.a[0], 0.0);
        assert_eq!(tc.b[0], 0.0);
        let f = reduced_qr(ch.direct(0), ch.cross(0), 0).unwrap();
        assert!(f.q2.is_some());
    }

    #[test]
    fn zero_direct_channel_is_rejected() {
        let ch = SimoChannel::new(
            vec![c(0.0, 0.0)],
            vec![c(1.0, 0.0)],
            vec![c(1.0, 0.0)],
            vec![c(1.0, 0.0)],
            1.0,
            1.0,
        )
        .unwrap();
        assert!(matches!(
            transform_channel(&ch),
            Err(Error::ZeroDirectChannel { user: 0 })
        ));
    }

    #[test]
    fn enhancement_only_resets_theta() {
        let ch = preset_scenario("fig2").unwrap();
        let tc = transform_channel(&ch).unwrap();
        let zero = TransformedChannel { theta: 0.0, ..tc };
        assert_eq!(enhance_channel(&zero), zero);
        let quarter = TransformedChannel {
            theta: std::f64::consts::FRAC_PI_4,
            ..tc
        };
        assert_eq!(enhance_channel(&quarter), zero);
    }

    #[test]
    fn scenario_json_roundtrip() {
        let ch = preset_scenario("fig2").unwrap();
        let text = serde_json::to_string(&ch).unwrap();
        assert!(text.contains("\"h11\":[["));
        let back: SimoChannel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, ch);
    }

    #[test]
    fn scenario_json_validates() {
        let bad = r#"{"h11": [[1,0]], "h12": [[1,0],[0,1]], "h21": [[1,0]], "h22": [[1,0]], "p1": 1, "p2": 1}"#;
        assert!(serde_json::from_str::<SimoChannel>(bad).is_err());
    }
}
