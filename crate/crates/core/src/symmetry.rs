//! The ε-family of symmetry algebras and groups acting on the surface.
//!
//! Algebra elements are stored as coefficients `(a, b, ω)` in the contracted
//! basis `b₁ = εE₁, b₂ = εE₂, b₃ = E₃`, which stays meaningful at `ε = 0` where
//! the algebra becomes se(2). Group elements are ambient 3×3 isometries for
//! `ε > 0` and structural `(translation, angle)` pairs for `ε = 0`.

use nalgebra::{DVector, Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    chart_hessian, chart_jacobian, check_chart, exp_chart, log_chart, metric_at, trig, ChartPoint,
    CurvatureParam,
};
use crate::state::ChartState;

/// Default relative threshold for the isotropy rank decision.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Coefficients `(a, b, ω)` of `a·b₁ + b·b₂ + ω·b₃`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AlgebraElement {
    pub a: f64,
    pub b: f64,
    pub omega: f64,
}

impl AlgebraElement {
    pub const fn new(a: f64, b: f64, omega: f64) -> Self {
        Self { a, b, omega }
    }

    pub const fn b1() -> Self {
        Self::new(1.0, 0.0, 0.0)
    }

    pub const fn b2() -> Self {
        Self::new(0.0, 1.0, 0.0)
    }

    pub const fn b3() -> Self {
        Self::new(0.0, 0.0, 1.0)
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.a, self.b, self.omega)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn scale(self, t: f64) -> Self {
        Self::new(t * self.a, t * self.b, t * self.omega)
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.a + o.a, self.b + o.b, self.omega + o.omega)
    }

    pub fn norm(self) -> f64 {
        self.to_vector().norm()
    }
}

/// Momentum value `(μ₁, μ₂, L)` in the basis dual to `(b₁, b₂, b₃)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MomentumValue {
    pub mu1: f64,
    pub mu2: f64,
    pub l: f64,
}

impl MomentumValue {
    pub const fn new(mu1: f64, mu2: f64, l: f64) -> Self {
        Self { mu1, mu2, l }
    }

    pub fn pair(&self, xi: &AlgebraElement) -> f64 {
        self.mu1 * xi.a + self.mu2 * xi.b + self.l * xi.omega
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.mu1, self.mu2, self.l)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn norm(self) -> f64 {
        self.to_vector().norm()
    }
}

/// An element of `G_ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GroupElement {
    /// Ambient isometry of the sphere (SO(3)) or hyperboloid (SO⁺(2,1)).
    Ambient(Matrix3<f64>),
    /// `w ↦ R_angle·w + translation`.
    Euclidean { translation: Vector2<f64>, angle: f64 },
}

impl GroupElement {
    pub fn identity(param: CurvatureParam) -> Self {
        if param.is_flat() {
            GroupElement::Euclidean { translation: Vector2::zeros(), angle: 0.0 }
        } else {
            GroupElement::Ambient(Matrix3::identity())
        }
    }

    /// `self · other`.
    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        match (self, other) {
            (GroupElement::Ambient(a), GroupElement::Ambient(b)) => GroupElement::Ambient(a * b),
            (
                GroupElement::Euclidean { translation: t1, angle: a1 },
                GroupElement::Euclidean { translation: t2, angle: a2 },
            ) => GroupElement::Euclidean { translation: t1 + rotation(*a1) * t2, angle: a1 + a2 },
            _ => panic!("cannot compose curved and flat group elements"),
        }
    }

    pub fn inverse(&self, param: CurvatureParam) -> GroupElement {
        match self {
            GroupElement::Ambient(m) => {
                let d = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, param.sign()));
                GroupElement::Ambient(d * m.transpose() * d)
            }
            GroupElement::Euclidean { translation, angle } => GroupElement::Euclidean {
                translation: -(rotation(-angle) * translation),
                angle: -angle,
            },
        }
    }

    pub fn matrix(&self) -> Option<Matrix3<f64>> {
        match self {
            GroupElement::Ambient(m) => Some(*m),
            GroupElement::Euclidean { .. } => None,
        }
    }
}

pub(crate) fn rotation(angle: f64) -> Matrix2<f64> {
    let (s, c) = angle.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Ambient generator matrices `E₁^σ, E₂^σ, E₃`.
pub fn ambient_generators(param: CurvatureParam) -> [Matrix3<f64>; 3] {
    let s = param.sign();
    [
        Matrix3::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -s, 0.0, 0.0),
        Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, -s, 0.0),
        Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
    ]
}

/// Matrix `a·εE₁ + b·εE₂ + ω·E₃`.
pub fn ambient_matrix(param: CurvatureParam, xi: &AlgebraElement) -> Matrix3<f64> {
    let [e1, e2, e3] = ambient_generators(param);
    let eps = param.epsilon();
    e1 * (xi.a * eps) + e2 * (xi.b * eps) + e3 * xi.omega
}

/// Lie bracket of 𝔤_ε in the contracted basis.
pub fn bracket(param: CurvatureParam, x: &AlgebraElement, y: &AlgebraElement) -> AlgebraElement {
    let k = param.sign() * param.epsilon() * param.epsilon();
    AlgebraElement::new(
        x.b * y.omega - x.omega * y.b,
        x.omega * y.a - x.a * y.omega,
        k * (x.a * y.b - x.b * y.a),
    )
}

/// `(Σ (−κ)^j/(2j+1)!, Σ (−κ)^j/(2j+2)!)` so that `exp(M) = I + f₁M + f₂M²` when `M³ = −κM`.
fn rodrigues_coeffs(kappa: f64) -> (f64, f64) {
    if kappa.abs() < 1e-3 {
        let mut f1 = 0.0;
        let mut f2 = 0.0;
        let mut term = 1.0;
        let mut n = 1.0;
        for _ in 0..8 {
            // term = (−κ)^j / (2j)!, n = 2j + 1
            f1 += term / n;
            f2 += term / (n * (n + 1.0));
            term *= -kappa / (n * (n + 1.0));
            n += 2.0;
        }
        (f1, f2)
    } else if kappa > 0.0 {
        let th = kappa.sqrt();
        let h = (0.5 * th).sin() / th;
        (th.sin() / th, 2.0 * h * h)
    } else {
        let th = (-kappa).sqrt();
        let h = (0.5 * th).sinh() / th;
        (th.sinh() / th, 2.0 * h * h)
    }
}

/// `exp(t·ξ)` in `G_ε`.
pub fn exp_group(param: CurvatureParam, xi: &AlgebraElement, t: f64) -> GroupElement {
    if param.is_flat() {
        let phi = t * xi.omega;
        let (s, c) = phi.sin_cos();
        let v = if phi.abs() < 1e-8 {
            Matrix2::new(1.0 - phi * phi / 6.0, -phi / 2.0, phi / 2.0, 1.0 - phi * phi / 6.0)
        } else {
            Matrix2::new(s, c - 1.0, 1.0 - c, s) / phi
        };
        return GroupElement::Euclidean { translation: v * Vector2::new(t * xi.a, t * xi.b), angle: phi };
    }
    let eps = param.epsilon();
    let m = ambient_matrix(param, xi) * t;
    let kappa = t * t * (xi.omega * xi.omega + param.sign() * eps * eps * (xi.a * xi.a + xi.b * xi.b));
    let (f1, f2) = rodrigues_coeffs(kappa);
    GroupElement::Ambient(Matrix3::identity() + m * f1 + m * m * f2)
}

/// `g ∗ w = Log(g·Exp(w))`, or the rigid motion itself when flat.
pub fn act_chart(param: CurvatureParam, g: &GroupElement, w: &ChartPoint) -> Result<ChartPoint> {
    match g {
        GroupElement::Euclidean { translation, angle } => Ok(rotation(*angle) * w + translation),
        GroupElement::Ambient(m) => {
            if m[(0, 2)] == 0.0 && m[(1, 2)] == 0.0 && m[(2, 0)] == 0.0 && m[(2, 1)] == 0.0 {
                // g fixes the pole, so it acts by its 2×2 block.
                check_chart(param, w)?;
                return Ok(m.fixed_view::<2, 2>(0, 0) * w);
            }
            let q = exp_chart(param, w)?;
            log_chart(param, &(m * q))
        }
    }
}

/// Cotangent lift of `g` applied to one body `(w, α)`.
pub fn act_phase(
    param: CurvatureParam,
    g: &GroupElement,
    w: &ChartPoint,
    alpha: &Vector2<f64>,
) -> Result<(ChartPoint, Vector2<f64>)> {
    match g {
        GroupElement::Euclidean { angle, .. } => Ok((act_chart(param, g, w)?, rotation(*angle) * alpha)),
        GroupElement::Ambient(m) => {
            let w2 = act_chart(param, g, w)?;
            let j1 = chart_jacobian(param, w)?;
            let j2 = chart_jacobian(param, &w2)?;
            let ginv = metric_at(param, w)?.g_inv;
            let d = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, param.sign()));
            Ok((w2, j2.transpose() * d * m * j1 * ginv * alpha))
        }
    }
}

/// Diagonal cotangent-lifted action on an n-body state.
pub fn act_state(param: CurvatureParam, g: &GroupElement, s: &ChartState) -> Result<ChartState> {
    let mut q = Vec::with_capacity(s.n());
    let mut p = Vec::with_capacity(s.n());
    for (w, a) in s.q.iter().zip(&s.p) {
        let (w2, a2) = act_phase(param, g, w, a)?;
        q.push(w2);
        p.push(a2);
    }
    Ok(ChartState::new(q, p))
}

/// Infinitesimal generator `ξ ∗ w` on the chart.
pub fn generator_chart(param: CurvatureParam, xi: &AlgebraElement, w: &ChartPoint) -> Result<Vector2<f64>> {
    let rot = Vector2::new(-w[1], w[0]) * xi.omega;
    if param.is_flat() {
        check_chart(param, w)?;
        return Ok(rot + Vector2::new(xi.a, xi.b));
    }
    let q = exp_chart(param, w)?;
    let j = chart_jacobian(param, w)?;
    let ginv = metric_at(param, w)?.g_inv;
    let d = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, param.sign()));
    let m = ambient_matrix(param, &AlgebraElement::new(xi.a, xi.b, 0.0));
    Ok(rot + ginv * j.transpose() * d * m * q)
}

/// Cotangent-lifted generator on one body: `(ẇ, α̇)`.
pub fn generator_phase(
    param: CurvatureParam,
    xi: &AlgebraElement,
    w: &ChartPoint,
    alpha: &Vector2<f64>,
) -> Result<(Vector2<f64>, Vector2<f64>)> {
    let wdot = generator_chart(param, xi, w)?;
    let rot_alpha = Vector2::new(-alpha[1], alpha[0]) * xi.omega;
    if param.is_flat() || (xi.a == 0.0 && xi.b == 0.0) {
        return Ok((wdot, rot_alpha));
    }
    // Translation-type part: α = Jᵀp♭ with p♭ transported by −Mᵀ.
    let j = chart_jacobian(param, w)?;
    let ginv = metric_at(param, w)?.g_inv;
    let d = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, param.sign()));
    let m = ambient_matrix(param, &AlgebraElement::new(xi.a, xi.b, 0.0));
    let q = exp_chart(param, w)?;
    let wdot_t = ginv * j.transpose() * d * m * q;
    let pflat = d * j * ginv * alpha;
    let hess = chart_hessian(param, w);
    let dj = hess[0] * wdot_t[0] + hess[1] * wdot_t[1];
    let adot = dj.transpose() * pflat - j.transpose() * m.transpose() * pflat;
    Ok((wdot, rot_alpha + adot))
}

/// Phase-space generator field `ξ_M` in the flat vector layout.
pub fn generator_field(param: CurvatureParam, xi: &AlgebraElement, s: &ChartState) -> Result<DVector<f64>> {
    let n = s.n();
    let mut out = DVector::zeros(4 * n);
    for i in 0..n {
        let (wd, ad) = generator_phase(param, xi, &s.q[i], &s.p[i])?;
        out[2 * i] = wd[0];
        out[2 * i + 1] = wd[1];
        out[2 * n + 2 * i] = ad[0];
        out[2 * n + 2 * i + 1] = ad[1];
    }
    Ok(out)
}

/// Momentum of a single particle at `w` with canonical momentum `α`.
pub fn momentum_single(param: CurvatureParam, w: &ChartPoint, alpha: &Vector2<f64>) -> Result<MomentumValue> {
    check_chart(param, w)?;
    let l = w[0] * alpha[1] - w[1] * alpha[0];
    if param.is_flat() {
        return Ok(MomentumValue::new(alpha[0], alpha[1], l));
    }
    let eps = param.epsilon();
    let sign = param.sign();
    let x = eps * w.norm();
    let (c, _) = trig(sign, x);
    let s = crate::geometry::s_over_x(sign, x);
    let j = chart_jacobian(param, w)?;
    let ginv = metric_at(param, w)?.g_inv;
    let pt = ginv * alpha;
    let p = j * pt;
    // ε(Z p_x − X p_z) with εZ = C(x) and p_z = −σεs(w·G⁻¹α).
    let radial = w.dot(&pt);
    let mu1 = c * p[0] + sign * eps * eps * s * s * w[0] * radial;
    let mu2 = c * p[1] + sign * eps * eps * s * s * w[1] * radial;
    Ok(MomentumValue::new(mu1, mu2, l))
}

/// Total momentum of an n-body state.
pub fn momentum_nbody(param: CurvatureParam, s: &ChartState) -> Result<MomentumValue> {
    let mut total = Vector3::zeros();
    for (w, a) in s.q.iter().zip(&s.p) {
        total += momentum_single(param, w, a)?.to_vector();
    }
    Ok(MomentumValue::from_vector(&total))
}

/// `ad*_ξ μ` with `⟨ad*_ξ μ, η⟩ = ⟨μ, [ξ, η]_ε⟩`.
pub fn coadjoint(param: CurvatureParam, xi: &AlgebraElement, mu: &MomentumValue) -> MomentumValue {
    let k = param.sign() * param.epsilon() * param.epsilon();
    MomentumValue::new(
        xi.omega * mu.mu2 - k * xi.b * mu.l,
        -xi.omega * mu.mu1 + k * xi.a * mu.l,
        xi.b * mu.mu1 - xi.a * mu.mu2,
    )
}

/// Matrix of `η ↦ ad*_η μ` in the b-basis.
pub fn coadjoint_matrix(param: CurvatureParam, mu: &MomentumValue) -> Matrix3<f64> {
    let mut m = Matrix3::zeros();
    for k in 0..3 {
        let mut e = Vector3::zeros();
        e[k] = 1.0;
        m.set_column(k, &coadjoint(param, &AlgebraElement::from_vector(&e), mu).to_vector());
    }
    m
}

/// Orthonormal basis of the isotropy algebra of a momentum value.
#[derive(Debug, Clone, PartialEq)]
pub struct Isotropy {
    pub basis: Vec<AlgebraElement>,
    pub singular_values: [f64; 3],
}

impl Isotropy {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Euclidean distance of `xi` from the span of the basis.
    pub fn distance(&self, xi: &AlgebraElement) -> f64 {
        let v = xi.to_vector();
        let mut r = v;
        for e in &self.basis {
            let ev = e.to_vector();
            r -= ev * ev.dot(&v);
        }
        r.norm()
    }
}

/// Kernel of `η ↦ ad*_η μ`.
///
/// When the coadjoint matrix vanishes numerically (only possible at `ε = 0`
/// with `μ = (0, 0, L)`), the algebra returned is the `ε → 0⁺` limit of the
/// curved isotropy algebras, `span{b₃}`.
pub fn isotropy_algebra(param: CurvatureParam, mu: &MomentumValue, rank_tol: f64) -> Result<Isotropy> {
    let norm = mu.norm();
    if norm < 1e-14 {
        return Err(Error::ZeroMomentum { norm });
    }
    let m = coadjoint_matrix(param, mu);
    let svd = m.svd(false, true);
    let sv = svd.singular_values;
    let threshold = rank_tol * norm;
    for &s in sv.iter() {
        if s > threshold / 10.0 && s < threshold * 10.0 {
            return Err(Error::RankAmbiguity { singular_value: s, threshold });
        }
    }
    let rank = sv.iter().filter(|&&s| s > threshold).count();
    let mut sorted = [sv[0], sv[1], sv[2]];
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if rank == 0 {
        return Ok(Isotropy { basis: vec![AlgebraElement::b3()], singular_values: sorted });
    }
    let vt = svd.v_t.expect("requested v_t");
    let mut basis = Vec::new();
    for (k, &s) in sv.iter().enumerate() {
        if s <= threshold {
            let mut v: Vector3<f64> = vt.row(k).transpose();
            // Orient along (μ₁, μ₂, σε²L) so the basis varies continuously in ε.
            let axis = Vector3::new(mu.mu1, mu.mu2, param.sign() * param.epsilon().powi(2) * mu.l);
            let reference = if axis.norm() > 0.0 { axis } else { Vector3::new(0.0, 0.0, 1.0) };
            if v.dot(&reference) < 0.0 {
                v = -v;
            }
            basis.push(AlgebraElement::from_vector(&v.normalize()));
        }
    }
    Ok(Isotropy { basis, singular_values: sorted })
}

/// Rotation angle about the pole of `exp(a b₁) exp(b b₂) exp(−a b₁) exp(−b b₂)`.
pub fn commutator_holonomy(param: CurvatureParam, a: f64, b: f64) -> f64 {
    let g1 = exp_group(param, &AlgebraElement::b1(), a);
    let g2 = exp_group(param, &AlgebraElement::b2(), b);
    let g3 = exp_group(param, &AlgebraElement::b1(), -a);
    let g4 = exp_group(param, &AlgebraElement::b2(), -b);
    let c = g1.compose(&g2).compose(&g3).compose(&g4);
    match c {
        GroupElement::Ambient(m) => (m[(1, 0)] - m[(0, 1)]).atan2(m[(0, 0)] + m[(1, 1)]),
        GroupElement::Euclidean { angle, .. } => angle,
    }
}
