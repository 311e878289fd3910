//! Single-particle geometry of the constant-curvature surface of radius `1/ε`.
//!
//! Points on the surface are addressed by Riemannian normal coordinates
//! `w = (u, v)` centred at the North pole `N = (0, 0, 1/ε)`. The surface sits in
//! R³ with the inner product `⟨x, y⟩_σ = x₁y₁ + x₂y₂ + σ x₃y₃`.
//!
//! Functions with a removable singularity at the origin (`S(x)/x` and the
//! quotients built from it) switch to truncated Taylor series near zero.

use nalgebra::{Matrix2, Matrix3x2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ChartPoint = Vector2<f64>;
pub type AmbientPoint = Vector3<f64>;

/// Threshold below which `S(x)/x` and `ψ/S(ψ)` use their series.
const SERIES_SMALL: f64 = 1e-4;
/// Threshold for the higher-order quotients `k`, `g`, `h`, `k'/x`, whose direct
/// formulas cancel like `x^-2 .. x^-4`.
const SERIES_QUOTIENT: f64 = 0.3;
/// Margin to the cut locus for chart validity on the sphere.
pub const CHART_MARGIN: f64 = 1e-6;
/// Margin to the cut locus for `log_chart`.
pub const CUT_LOCUS_MARGIN: f64 = 1e-8;

/// Curvature sign and inverse radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureParam {
    sigma: i32,
    epsilon: f64,
}

impl CurvatureParam {
    pub fn new(sigma: i32, epsilon: f64) -> Result<Self> {
        if (sigma != 1 && sigma != -1) || !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::InvalidParam { sigma, epsilon });
        }
        Ok(Self { sigma, epsilon })
    }

    /// The Euclidean plane, remembering which family it is the limit of.
    pub fn flat(sigma: i32) -> Result<Self> {
        Self::new(sigma, 0.0)
    }

    pub fn sigma(&self) -> i32 {
        self.sigma
    }

    /// `σ` as a float, for use in formulas.
    pub fn sign(&self) -> f64 {
        self.sigma as f64
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn is_flat(&self) -> bool {
        self.epsilon == 0.0
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.sigma, epsilon)
    }

    /// Surface radius `1/ε`, infinite when flat.
    pub fn radius(&self) -> f64 {
        1.0 / self.epsilon
    }
}

/// Pulled-back metric and its inverse at a chart point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricAtPoint {
    pub g: Matrix2<f64>,
    pub g_inv: Matrix2<f64>,
}

/// `(C_σ(x), S_σ(x))`: `(cos, sin)` on the sphere, `(cosh, sinh)` on the hyperbolic plane.
pub fn curv_trig(param: CurvatureParam, x: f64) -> (f64, f64) {
    trig(param.sign(), x)
}

pub(crate) fn trig(sign: f64, x: f64) -> (f64, f64) {
    if sign > 0.0 {
        (x.cos(), x.sin())
    } else {
        (x.cosh(), x.sinh())
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// `S_σ(x)/x`.
pub(crate) fn s_over_x(sign: f64, x: f64) -> f64 {
    if x.abs() < SERIES_SMALL {
        let t = -sign * x * x;
        1.0 + t / 6.0 + t * t / 120.0 + t * t * t / 5040.0
    } else {
        trig(sign, x).1 / x
    }
}

/// `ψ/S_σ(ψ)`.
pub(crate) fn x_over_s(sign: f64, x: f64) -> f64 {
    if x.abs() < SERIES_SMALL {
        let t = -sign * x * x;
        1.0 - t / 6.0 + 7.0 * t * t / 360.0 - 31.0 * t * t * t / 15120.0
    } else {
        x / trig(sign, x).1
    }
}

/// `k(x) = (x C(x) − S(x)) / x³`, so that `s'(ρ)/ρ = ε² k(ερ)`.
pub(crate) fn k_quot(sign: f64, x: f64) -> f64 {
    if x.abs() < SERIES_QUOTIENT {
        let t = -sign * x * x;
        let mut sum = 0.0;
        let mut tp = 1.0;
        for j in 1..=10u32 {
            sum += tp * (2 * j) as f64 / factorial(2 * j + 1);
            tp *= t;
        }
        -sign * sum
    } else {
        let (c, s) = trig(sign, x);
        (x * c - s) / (x * x * x)
    }
}

/// `k'(x)/x`.
pub(crate) fn dk_over_x(sign: f64, x: f64) -> f64 {
    if x.abs() < SERIES_QUOTIENT {
        let t = -sign * x * x;
        let mut sum = 0.0;
        let mut tp = 1.0;
        for j in 2..=11u32 {
            sum += tp * ((j - 1) * 2 * j) as f64 / factorial(2 * j + 1);
            tp *= t;
        }
        2.0 * sum
    } else {
        let s = trig(sign, x).1;
        -sign * s / (x * x * x) - 3.0 * k_quot(sign, x) / (x * x)
    }
}

/// Taylor coefficients of `1/sin²x − 1/x²` in powers of `x²`.
const G_COEFFS: [f64; 12] = [
    1.0 / 3.0,
    1.0 / 15.0,
    2.0 / 189.0,
    1.0 / 675.0,
    2.0 / 10395.0,
    1382.0 / 58046625.0,
    4.0 / 1403325.0,
    3617.0 / 10854718875.0,
    87734.0 / 2292899734125.0,
    349222.0 / 80596287646875.0,
    310732.0 / 640374140030625.0,
    472728182.0 / 8779111824511153125.0,
];

/// `g(x) = 1/S_σ(x)² − 1/x²`, the curvature part of the cometric.
pub(crate) fn g_quot(sign: f64, x: f64) -> f64 {
    if x.abs() < SERIES_QUOTIENT {
        let y = sign * x * x;
        let mut sum = 0.0;
        let mut yp = 1.0;
        for c in G_COEFFS {
            sum += c * yp;
            yp *= y;
        }
        sign * sum
    } else {
        let s = trig(sign, x).1;
        1.0 / (s * s) - 1.0 / (x * x)
    }
}

/// `h(x) = g'(x)/x`.
pub(crate) fn h_quot(sign: f64, x: f64) -> f64 {
    if x.abs() < SERIES_QUOTIENT {
        let y = sign * x * x;
        let mut sum = 0.0;
        let mut yp = 1.0;
        for (k, c) in G_COEFFS.iter().enumerate().skip(1) {
            sum += 2.0 * k as f64 * c * sign * yp;
            yp *= y;
        }
        sign * sum
    } else {
        let (c, s) = trig(sign, x);
        (-2.0 * c / (s * s * s) + 2.0 / (x * x * x)) / x
    }
}

/// `s_σ(ρ) = S_σ(ερ)/(ερ)`, equal to 1 at the pole and in the flat limit.
pub fn radius_factor(param: CurvatureParam, rho: f64) -> f64 {
    s_over_x(param.sign(), param.epsilon() * rho)
}

/// Rejects chart points at or beyond the injectivity radius (sphere only).
pub fn check_chart(param: CurvatureParam, w: &ChartPoint) -> Result<()> {
    let x = param.epsilon() * w.norm();
    if !x.is_finite() {
        return Err(Error::ChartDomain { eps_rho: x, limit: std::f64::consts::PI - CHART_MARGIN });
    }
    if param.sigma() == 1 && x > std::f64::consts::PI - CHART_MARGIN {
        return Err(Error::ChartDomain { eps_rho: x, limit: std::f64::consts::PI - CHART_MARGIN });
    }
    Ok(())
}

fn require_curved(param: CurvatureParam, op: &'static str) -> Result<()> {
    if param.is_flat() {
        Err(Error::FlatLimit { op })
    } else {
        Ok(())
    }
}

/// `⟨x, y⟩_σ`.
pub fn sigma_inner(param: CurvatureParam, x: &AmbientPoint, y: &AmbientPoint) -> f64 {
    x[0] * y[0] + x[1] * y[1] + param.sign() * x[2] * y[2]
}

/// Riemannian exponential at the North pole.
pub fn exp_chart(param: CurvatureParam, w: &ChartPoint) -> Result<AmbientPoint> {
    require_curved(param, "exp_chart")?;
    check_chart(param, w)?;
    let eps = param.epsilon();
    let x = eps * w.norm();
    let s = s_over_x(param.sign(), x);
    let c = trig(param.sign(), x).0;
    Ok(Vector3::new(w[0] * s, w[1] * s, c / eps))
}

/// Inverse of [`exp_chart`].
pub fn log_chart(param: CurvatureParam, q: &AmbientPoint) -> Result<ChartPoint> {
    require_curved(param, "log_chart")?;
    let eps = param.epsilon();
    let sign = param.sign();
    let residual = (sigma_inner(param, q, q) * eps * eps - sign).abs();
    if !(residual <= 1e-9) {
        return Err(Error::InvalidAmbient { residual });
    }
    if sign < 0.0 && q[2] <= 0.0 {
        return Err(Error::InvalidAmbient { residual: f64::INFINITY });
    }
    let r_xy = q[0].hypot(q[1]);
    // Polar angle from both ambient components; stable near the pole.
    let psi = if sign > 0.0 {
        (eps * r_xy).atan2(eps * q[2])
    } else {
        (eps * r_xy).asinh()
    };
    if sign > 0.0 && psi >= std::f64::consts::PI - CUT_LOCUS_MARGIN {
        return Err(Error::CutLocus { psi });
    }
    Ok(Vector2::new(q[0], q[1]) * x_over_s(sign, psi))
}

/// Pulled-back metric `G = A·I + (1 − A)·P` and cometric `G⁻¹ = P + A⁻¹(I − P)`.
pub fn metric_at(param: CurvatureParam, w: &ChartPoint) -> Result<MetricAtPoint> {
    check_chart(param, w)?;
    if param.is_flat() {
        return Ok(MetricAtPoint { g: Matrix2::identity(), g_inv: Matrix2::identity() });
    }
    let eps = param.epsilon();
    let sign = param.sign();
    let x = eps * w.norm();
    let s = s_over_x(sign, x);
    let a = s * s;
    let gq = g_quot(sign, x);
    let wwt = w * w.transpose();
    // (1 − A)/ρ² = A ε² g(x) and (A⁻¹ − 1)/ρ² = ε² g(x).
    let g = Matrix2::identity() * a + wwt * (a * eps * eps * gq);
    let g_inv = Matrix2::identity() / a - wwt * (eps * eps * gq);
    Ok(MetricAtPoint { g, g_inv })
}

/// Columns are the ambient images of `∂/∂u` and `∂/∂v`.
pub fn chart_jacobian(param: CurvatureParam, w: &ChartPoint) -> Result<Matrix3x2<f64>> {
    check_chart(param, w)?;
    if param.is_flat() {
        return Ok(Matrix3x2::new(1.0, 0.0, 0.0, 1.0, 0.0, 0.0));
    }
    let eps = param.epsilon();
    let sign = param.sign();
    let x = eps * w.norm();
    let s = s_over_x(sign, x);
    let kk = eps * eps * k_quot(sign, x);
    let (u, v) = (w[0], w[1]);
    Ok(Matrix3x2::new(
        s + kk * u * u,
        kk * u * v,
        kk * u * v,
        s + kk * v * v,
        -sign * eps * s * u,
        -sign * eps * s * v,
    ))
}

/// Second derivatives of the exponential map: `out[l]` is `∂J/∂w_l`.
pub(crate) fn chart_hessian(param: CurvatureParam, w: &ChartPoint) -> [Matrix3x2<f64>; 2] {
    let eps = param.epsilon();
    let sign = param.sign();
    let x = eps * w.norm();
    let s = s_over_x(sign, x);
    let kk = eps * eps * k_quot(sign, x);
    let dk = eps.powi(4) * dk_over_x(sign, x);
    let mut out = [Matrix3x2::zeros(); 2];
    for (l, m) in out.iter_mut().enumerate() {
        for i in 0..2 {
            for j in 0..2 {
                let dil = if i == l { 1.0 } else { 0.0 };
                let dij = if i == j { 1.0 } else { 0.0 };
                let djl = if j == l { 1.0 } else { 0.0 };
                m[(i, j)] = kk * w[l] * dij + dk * w[l] * w[i] * w[j] + kk * (dil * w[j] + w[i] * djl);
            }
        }
        for j in 0..2 {
            let djl = if j == l { 1.0 } else { 0.0 };
            m[(2, j)] = -sign * eps * (s * djl + kk * w[j] * w[l]);
        }
    }
    out
}

/// Ambient difference `Exp(w2) − Exp(w1)` without the cancellation in the
/// third component.
pub(crate) fn ambient_difference(param: CurvatureParam, w1: &ChartPoint, w2: &ChartPoint) -> AmbientPoint {
    let eps = param.epsilon();
    let sign = param.sign();
    let x1 = eps * w1.norm();
    let x2 = eps * w2.norm();
    let s1 = s_over_x(sign, x1);
    let s2 = s_over_x(sign, x2);
    let dz = -2.0 * sign * trig(sign, 0.5 * (x2 + x1)).1 * trig(sign, 0.5 * (x2 - x1)).1 / eps;
    Vector3::new(w2[0] * s2 - w1[0] * s1, w2[1] * s2 - w1[1] * s1, dz)
}

/// Geodesic angle from the squared ambient chord `⟨Δ, Δ⟩_σ`.
pub(crate) fn angle_from_chord(param: CurvatureParam, chord2: f64, q1: &AmbientPoint, q2: &AmbientPoint) -> f64 {
    let eps = param.epsilon();
    let half = 0.5 * eps * chord2.max(0.0).sqrt();
    if param.sign() > 0.0 {
        let psi = 2.0 * half.min(1.0).asin();
        if psi > std::f64::consts::FRAC_PI_2 {
            // Past the equator use the chord to the antipode of q1 instead.
            let sum = q1 + q2;
            std::f64::consts::PI - 2.0 * (0.5 * eps * sum.norm()).min(1.0).asin()
        } else {
            psi
        }
    } else {
        2.0 * half.asinh()
    }
}

/// Central angle `ψ = ε·d` between two chart points.
pub fn geodesic_angle(param: CurvatureParam, w1: &ChartPoint, w2: &ChartPoint) -> Result<f64> {
    require_curved(param, "geodesic_angle")?;
    let q1 = exp_chart(param, w1)?;
    let q2 = exp_chart(param, w2)?;
    let d = ambient_difference(param, w1, w2);
    let psi = angle_from_chord(param, sigma_inner(param, &d, &d), &q1, &q2);
    if param.sign() > 0.0 && psi > std::f64::consts::PI - CUT_LOCUS_MARGIN {
        return Err(Error::Antipodal { i: 0, j: 1, psi });
    }
    if psi < 1e-12 {
        return Err(Error::Coincident { psi });
    }
    Ok(psi)
}

/// Geodesic distance `ψ/ε`; Euclidean distance when flat.
pub fn geodesic_distance(param: CurvatureParam, w1: &ChartPoint, w2: &ChartPoint) -> Result<f64> {
    if param.is_flat() {
        return Ok((w1 - w2).norm());
    }
    Ok(geodesic_angle(param, w1, w2)? / param.epsilon())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn p(sigma: i32, eps: f64) -> CurvatureParam {
        CurvatureParam::new(sigma, eps).unwrap()
    }

    #[test]
    fn param_validation() {
        assert!(CurvatureParam::new(0, 0.1).is_err());
        assert!(CurvatureParam::new(1, -0.1).is_err());
        assert!(CurvatureParam::new(-1, f64::NAN).is_err());
        assert!(CurvatureParam::new(-1, 0.0).unwrap().is_flat());
    }

    #[test]
    fn trig_at_zero() {
        assert_eq!(curv_trig(p(1, 0.3), 0.0), (1.0, 0.0));
        assert_eq!(curv_trig(p(-1, 0.3), 0.0), (1.0, 0.0));
        assert_eq!(radius_factor(p(1, 0.3), 0.0), 1.0);
        assert_eq!(radius_factor(p(-1, 7.0), 0.0), 1.0);
    }

    #[test]
    fn series_branches_match_direct_formulas() {
        // Both sides of each switch agree to near machine precision.
        for sign in [1.0, -1.0] {
            for x in [SERIES_SMALL * 0.999, SERIES_SMALL * 1.001] {
                let (c, s) = trig(sign, x);
                assert!((s_over_x(sign, x) - s / x).abs() < 1e-15);
                assert!((x_over_s(sign, x) - x / s).abs() < 1e-15);
                let _ = c;
            }
            for x in [SERIES_QUOTIENT * 0.9999, SERIES_QUOTIENT * 1.0001] {
                let (c, s) = trig(sign, x);
                let k = (x * c - s) / (x * x * x);
                assert!((k_quot(sign, x) - k).abs() < 1e-12, "k {sign} {x}");
                let g = 1.0 / (s * s) - 1.0 / (x * x);
                assert!((g_quot(sign, x) - g).abs() < 1e-12, "g {sign} {x}");
                let h = (-2.0 * c / (s * s * s) + 2.0 / (x * x * x)) / x;
                assert!((h_quot(sign, x) - h).abs() < 1e-9, "h {sign} {x}");
                let dk = -sign * s / (x * x * x) - 3.0 * k / (x * x);
                assert!((dk_over_x(sign, x) - dk).abs() < 1e-9, "dk {sign} {x}");
            }
        }
    }

    #[test]
    fn quotient_series_leading_terms() {
        for sign in [1.0, -1.0] {
            assert!((k_quot(sign, 0.0) + sign / 3.0).abs() < 1e-16);
            assert!((g_quot(sign, 0.0) - sign / 3.0).abs() < 1e-16);
            assert!((h_quot(sign, 0.0) - 2.0 / 15.0).abs() < 1e-16);
            assert!((dk_over_x(sign, 0.0) - 1.0 / 15.0).abs() < 1e-16);
        }
    }

    #[test]
    fn exp_examples() {
        let q = exp_chart(p(1, 0.1), &Vector2::zeros()).unwrap();
        assert_eq!(q, Vector3::new(0.0, 0.0, 10.0));
        let q = exp_chart(p(1, 1.0), &Vector2::new(FRAC_PI_2, 0.0)).unwrap();
        assert!((q - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
        let q = exp_chart(p(-1, 1.0), &Vector2::new(1.0, 0.0)).unwrap();
        assert!((q[0] - 1.1752011936438014).abs() < 1e-15);
        assert!((q[2] - 1.5430806348152437).abs() < 1e-15);
        assert!((q[0] * q[0] + q[1] * q[1] - q[2] * q[2] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn exp_rejects_flat_and_cut_locus() {
        assert!(matches!(exp_chart(p(1, 0.0), &Vector2::zeros()), Err(Error::FlatLimit { .. })));
        assert!(matches!(
            exp_chart(p(1, 1.0), &Vector2::new(PI, 0.0)),
            Err(Error::ChartDomain { .. })
        ));
        assert!(exp_chart(p(-1, 1.0), &Vector2::new(PI, 0.0)).is_ok());
    }

    #[test]
    fn log_examples() {
        let w = log_chart(p(1, 0.1), &Vector3::new(0.0, 0.0, 10.0)).unwrap();
        assert_eq!(w, Vector2::zeros());
        let w = log_chart(p(1, 1.0), &Vector3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((w - Vector2::new(FRAC_PI_2, 0.0)).norm() < 1e-15);
        assert!(matches!(
            log_chart(p(1, 1.0), &Vector3::new(0.0, 0.0, -1.0)),
            Err(Error::CutLocus { .. })
        ));
        assert!(matches!(
            log_chart(p(1, 1.0), &Vector3::new(0.0, 0.0, 1.1)),
            Err(Error::InvalidAmbient { .. })
        ));
    }

    #[test]
    fn metric_example_against_direct_values() {
        let m = metric_at(p(1, 0.2), &Vector2::new(1.0, 0.0)).unwrap();
        let a = (0.2f64.sin() / 0.2).powi(2);
        assert!((m.g - Matrix2::new(1.0, 0.0, 0.0, a)).norm() < 1e-15);
        assert!((m.g * m.g_inv - Matrix2::identity()).norm() < 1e-14);
        let m0 = metric_at(p(-1, 0.7), &Vector2::zeros()).unwrap();
        assert_eq!(m0.g, Matrix2::identity());
    }

    #[test]
    fn chart_hessian_matches_differences_of_jacobian() {
        for sigma in [1, -1] {
            let par = p(sigma, 0.4);
            let w = Vector2::new(0.7, -1.1);
            let hess = chart_hessian(par, &w);
            for l in 0..2 {
                let mut e = Vector2::zeros();
                e[l] = 1e-5;
                let fd = (chart_jacobian(par, &(w + e)).unwrap() - chart_jacobian(par, &(w - e)).unwrap()) / 2e-5;
                assert!((fd - hess[l]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn geodesic_examples() {
        let psi = geodesic_angle(p(1, 1.0), &Vector2::new(FRAC_PI_2, 0.0), &Vector2::new(0.0, FRAC_PI_2)).unwrap();
        assert!((psi - FRAC_PI_2).abs() < 1e-15);
        for sigma in [1, -1] {
            let par = p(sigma, 0.3);
            let psi = geodesic_angle(par, &Vector2::new(0.4, 0.0), &Vector2::new(1.9, 0.0)).unwrap();
            assert!((psi - 0.3 * 1.5).abs() < 1e-15);
        }
        assert!(matches!(
            geodesic_angle(p(1, 1.0), &Vector2::new(1.0, 0.0), &Vector2::new(1.0, 0.0)),
            Err(Error::Coincident { .. })
        ));
        assert!(matches!(
            geodesic_angle(p(1, 1.0), &Vector2::new(1.6, 0.0), &Vector2::new(-1.54159265, 0.0)),
            Err(Error::Antipodal { .. })
        ));
    }

    #[test]
    fn obtuse_angles_use_the_cosine_branch() {
        let par = p(1, 1.0);
        let psi = geodesic_angle(par, &Vector2::new(1.2, 0.0), &Vector2::new(-1.5, 0.0)).unwrap();
        assert!((psi - 2.7).abs() < 1e-13);
    }
}
