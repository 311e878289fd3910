//! Curved Newtonian n-body Hamiltonian in exponential coordinates.
//!
//! The kinetic energy of a body is written as
//! `K = (‖p‖² + ε² g(ερ) L²) / 2m` with `L = u p_v − v p_u` and
//! `g(x) = 1/S(x)² − 1/x²`, which is the cometric form with the radial
//! projector eliminated; it is smooth through the pole.

use nalgebra::{DVector, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    ambient_difference, angle_from_chord, chart_jacobian, check_chart, exp_chart, g_quot, h_quot, sigma_inner,
    trig, CurvatureParam,
};
use crate::state::ChartState;

/// Minimum chart separation before a configuration counts as a collision.
pub const COLLISION_TOL: f64 = 1e-8;
/// Minimum geodesic angle between bodies (and margin to antipodality).
pub const PSI_MIN: f64 = 1e-8;

/// Masses of the bodies, with the gravitational constant set to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodySystem {
    masses: Vec<f64>,
}

impl BodySystem {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.len() < 2 {
            return Err(Error::Schema { field: "masses".into(), message: "need at least two bodies".into() });
        }
        if let Some(m) = masses.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::Schema { field: "masses".into(), message: format!("mass {m} is not positive") });
        }
        Ok(Self { masses })
    }

    pub fn equal(n: usize, mass: f64) -> Result<Self> {
        Self::new(vec![mass; n])
    }

    pub fn n(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }
}

/// `(∂H/∂q, ∂H/∂p)` per body.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub dq: Vec<Vector2<f64>>,
    pub dp: Vec<Vector2<f64>>,
}

impl Gradient {
    fn zeros(n: usize) -> Self {
        Self { dq: vec![Vector2::zeros(); n], dp: vec![Vector2::zeros(); n] }
    }

    /// Hamiltonian vector field `(∂H/∂p, −∂H/∂q)` in the flat layout.
    pub fn to_vector_field(&self) -> DVector<f64> {
        let n = self.dq.len();
        let mut out = DVector::zeros(4 * n);
        for i in 0..n {
            out[2 * i] = self.dp[i][0];
            out[2 * i + 1] = self.dp[i][1];
            out[2 * n + 2 * i] = -self.dq[i][0];
            out[2 * n + 2 * i + 1] = -self.dq[i][1];
        }
        out
    }

    /// `(∂H/∂q, ∂H/∂p)` in the flat layout.
    pub fn to_vector(&self) -> DVector<f64> {
        let n = self.dq.len();
        let mut out = DVector::zeros(4 * n);
        for i in 0..n {
            out[2 * i] = self.dq[i][0];
            out[2 * i + 1] = self.dq[i][1];
            out[2 * n + 2 * i] = self.dp[i][0];
            out[2 * n + 2 * i + 1] = self.dp[i][1];
        }
        out
    }
}

/// A Hamiltonian on the n-body chart phase space at a fixed curvature.
pub trait Hamiltonian: Sync {
    fn param(&self) -> CurvatureParam;
    fn n_bodies(&self) -> usize;
    fn energy(&self, s: &ChartState) -> Result<f64>;
    fn gradient(&self, s: &ChartState) -> Result<Gradient>;

    fn vector_field(&self, s: &ChartState) -> Result<DVector<f64>> {
        Ok(self.gradient(s)?.to_vector_field())
    }
}

/// A family of Hamiltonians indexed by the curvature parameter, `H_ε = H₀ + O(ε²)`.
pub trait HamiltonianFamily: Sync {
    type System: Hamiltonian;
    fn at(&self, param: CurvatureParam) -> Self::System;
    fn n_bodies(&self) -> usize;
    fn masses(&self) -> Vec<f64>;
}

/// The gravitational n-body problem on the surface of curvature `σε²`.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonianSystem {
    pub param: CurvatureParam,
    pub bodies: BodySystem,
}

impl NewtonianSystem {
    pub fn new(param: CurvatureParam, bodies: BodySystem) -> Self {
        Self { param, bodies }
    }
}

impl Hamiltonian for NewtonianSystem {
    fn param(&self) -> CurvatureParam {
        self.param
    }

    fn n_bodies(&self) -> usize {
        self.bodies.n()
    }

    fn energy(&self, s: &ChartState) -> Result<f64> {
        hamiltonian(self.param, &self.bodies, s)
    }

    fn gradient(&self, s: &ChartState) -> Result<Gradient> {
        grad_hamiltonian(self.param, &self.bodies, s)
    }
}

impl HamiltonianFamily for BodySystem {
    type System = NewtonianSystem;

    fn at(&self, param: CurvatureParam) -> NewtonianSystem {
        NewtonianSystem::new(param, self.clone())
    }

    fn n_bodies(&self) -> usize {
        self.n()
    }

    fn masses(&self) -> Vec<f64> {
        self.masses.clone()
    }
}

fn check_state(sys: &BodySystem, s: &ChartState) {
    assert_eq!(sys.n(), s.n(), "state has {} bodies, system has {}", s.n(), sys.n());
}

fn check_collisions(s: &ChartState) -> Result<()> {
    for i in 0..s.n() {
        for j in i + 1..s.n() {
            let d = (s.q[i] - s.q[j]).norm();
            if !(d > COLLISION_TOL) {
                return Err(Error::Collision { i, j, separation: d });
            }
        }
    }
    Ok(())
}

/// Kinetic energy `Σ ‖α_i‖²_{G⁻¹} / 2m_i`.
pub fn kinetic(param: CurvatureParam, sys: &BodySystem, s: &ChartState) -> Result<f64> {
    check_state(sys, s);
    let eps = param.epsilon();
    let mut k = 0.0;
    for ((w, a), m) in s.q.iter().zip(&s.p).zip(sys.masses()) {
        check_chart(param, w)?;
        let mut t = a.norm_squared();
        if !param.is_flat() {
            let l = w[0] * a[1] - w[1] * a[0];
            t += eps * eps * g_quot(param.sign(), eps * w.norm()) * l * l;
        }
        k += t / (2.0 * m);
    }
    Ok(k)
}

/// Pairwise geometry shared by the potential and its gradient.
struct PairTerm {
    value: f64,
    dwi: Vector2<f64>,
    dwj: Vector2<f64>,
}

fn pair_term(
    param: CurvatureParam,
    i: usize,
    j: usize,
    mm: f64,
    s: &ChartState,
    amb: &[Vector3<f64>],
    jac: &[nalgebra::Matrix3x2<f64>],
) -> Result<PairTerm> {
    let (wi, wj) = (&s.q[i], &s.q[j]);
    if param.is_flat() {
        let d = wj - wi;
        let r = d.norm();
        let f = mm / (r * r * r);
        return Ok(PairTerm { value: -mm / r, dwi: -d * f, dwj: d * f });
    }
    let eps = param.epsilon();
    let sign = param.sign();
    let delta = ambient_difference(param, wi, wj);
    let psi = angle_from_chord(param, sigma_inner(param, &delta, &delta), &amb[i], &amb[j]);
    if psi < PSI_MIN {
        return Err(Error::Collision { i, j, separation: psi / eps });
    }
    if sign > 0.0 && psi > std::f64::consts::PI - PSI_MIN {
        return Err(Error::Antipodal { i, j, psi });
    }
    let (c, sn) = trig(sign, psi);
    let d = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, sign));
    let dd = d * delta;
    let f = mm * eps.powi(3) / (sn * sn * sn);
    Ok(PairTerm {
        value: -mm * eps * c / sn,
        dwi: -(jac[i].transpose() * dd) * f,
        dwj: (jac[j].transpose() * dd) * f,
    })
}

fn body_geometry(
    param: CurvatureParam,
    s: &ChartState,
) -> Result<(Vec<Vector3<f64>>, Vec<nalgebra::Matrix3x2<f64>>)> {
    if param.is_flat() {
        return Ok((Vec::new(), Vec::new()));
    }
    let mut amb = Vec::with_capacity(s.n());
    let mut jac = Vec::with_capacity(s.n());
    for w in &s.q {
        amb.push(exp_chart(param, w)?);
        jac.push(chart_jacobian(param, w)?);
    }
    Ok((amb, jac))
}

/// Gravitational potential `−Σ m_i m_j ε·cot_σ(ψ_ij)`; `−Σ m_i m_j / r_ij` when flat.
pub fn potential(param: CurvatureParam, sys: &BodySystem, s: &ChartState) -> Result<f64> {
    check_state(sys, s);
    check_collisions(s)?;
    let (amb, jac) = body_geometry(param, s)?;
    let m = sys.masses();
    let mut u = 0.0;
    for i in 0..s.n() {
        for j in i + 1..s.n() {
            u += pair_term(param, i, j, m[i] * m[j], s, &amb, &jac)?.value;
        }
    }
    Ok(u)
}

/// `H_ε = K_ε + U_ε`.
pub fn hamiltonian(param: CurvatureParam, sys: &BodySystem, s: &ChartState) -> Result<f64> {
    Ok(kinetic(param, sys, s)? + potential(param, sys, s)?)
}

/// First curvature correction `H₂` in `H_ε = H₀ + σε²H₂ + O(ε⁴)`.
pub fn h2_correction(sys: &BodySystem, s: &ChartState) -> Result<f64> {
    check_state(sys, s);
    check_collisions(s)?;
    let m = sys.masses();
    let mut h = 0.0;
    for i in 0..s.n() {
        let (q, p) = (&s.q[i], &s.p[i]);
        h += (q.norm_squared() * p.norm_squared() - q.dot(p).powi(2)) / (6.0 * m[i]);
    }
    for i in 0..s.n() {
        for j in i + 1..s.n() {
            let (qi, qj) = (&s.q[i], &s.q[j]);
            let r = (qi - qj).norm();
            let a = qi.norm_squared() * qj.norm_squared() - qi.dot(qj).powi(2);
            h += m[i] * m[j] * (r / 3.0 - a / (6.0 * r * r * r));
        }
    }
    Ok(h)
}

/// Gradient of the kinetic energy alone.
pub fn grad_kinetic(param: CurvatureParam, sys: &BodySystem, s: &ChartState) -> Result<Gradient> {
    check_state(sys, s);
    let eps = param.epsilon();
    let sign = param.sign();
    let mut g = Gradient::zeros(s.n());
    for (i, m) in sys.masses().iter().enumerate() {
        let (w, a) = (&s.q[i], &s.p[i]);
        check_chart(param, w)?;
        if param.is_flat() {
            g.dp[i] = a / *m;
            continue;
        }
        let x = eps * w.norm();
        let l = w[0] * a[1] - w[1] * a[0];
        let gq = g_quot(sign, x);
        let e2 = eps * eps;
        g.dp[i] = (a + Vector2::new(-w[1], w[0]) * (e2 * gq * l)) / *m;
        g.dq[i] = (w * (0.5 * e2 * e2 * h_quot(sign, x) * l * l) + Vector2::new(a[1], -a[0]) * (e2 * gq * l)) / *m;
    }
    Ok(g)
}

/// Gradient of the potential alone.
pub fn grad_potential(param: CurvatureParam, sys: &BodySystem, s: &ChartState) -> Result<Gradient> {
    check_state(sys, s);
    check_collisions(s)?;
    let (amb, jac) = body_geometry(param, s)?;
    let m = sys.masses();
    let mut g = Gradient::zeros(s.n());
    for i in 0..s.n() {
        for j in i + 1..s.n() {
            let t = pair_term(param, i, j, m[i] * m[j], s, &amb, &jac)?;
            g.dq[i] += t.dwi;
            g.dq[j] += t.dwj;
        }
    }
    Ok(g)
}

/// Analytic gradient of [`hamiltonian`].
pub fn grad_hamiltonian(param: CurvatureParam, sys: &BodySystem, s: &ChartState) -> Result<Gradient> {
    let mut g = grad_kinetic(param, sys, s)?;
    let gp = grad_potential(param, sys, s)?;
    for i in 0..s.n() {
        g.dq[i] += gp.dq[i];
    }
    Ok(g)
}

/// `(q̇, ṗ) = (∂H/∂p, −∂H/∂q)`.
pub fn vector_field(param: CurvatureParam, sys: &BodySystem, s: &ChartState) -> Result<DVector<f64>> {
    Ok(grad_hamiltonian(param, sys, s)?.to_vector_field())
}
