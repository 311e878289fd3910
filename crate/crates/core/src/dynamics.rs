//! Time integration, flow Jacobians and Poincaré returns.
//!
//! The integrator is the implicit midpoint rule `z' = z + h·X((z + z')/2)`,
//! which is symplectic for any Hamiltonian written in canonical coordinates.
//! The stage equation is solved by fixed-point iteration; if the contraction
//! stalls, Newton's method with a difference Jacobian of `X` takes over.

use nalgebra::{Complex, DMatrix, DVector, Matrix6x4, Vector2, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{chart_jacobian, exp_chart, metric_at, CurvatureParam};
use crate::hamiltonian::Hamiltonian;
use crate::state::ChartState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    /// Nominal time step.
    pub step: f64,
    /// Stage equation tolerance, relative to `max(1, ‖z‖∞)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { step: 1e-3, tol: 1e-14, max_iter: 60 }
    }
}

impl IntegratorConfig {
    pub fn with_step(step: f64) -> Self {
        Self { step, ..Self::default() }
    }
}

pub(crate) fn field<H: Hamiltonian + ?Sized>(h: &H, z: &DVector<f64>) -> Result<DVector<f64>> {
    h.vector_field(&ChartState::from_vector(z))
}

fn field_jacobian<H: Hamiltonian + ?Sized>(h: &H, z: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = z.len();
    let mut jac = DMatrix::zeros(n, n);
    for k in 0..n {
        let d = 1e-7 * z[k].abs().max(1.0);
        let mut zp = z.clone();
        let mut zm = z.clone();
        zp[k] += d;
        zm[k] -= d;
        let col = (field(h, &zp)? - field(h, &zm)?) / (2.0 * d);
        jac.set_column(k, &col);
    }
    Ok(jac)
}

fn newton_stage<H: Hamiltonian + ?Sized>(
    h: &H,
    z: &DVector<f64>,
    mut y: DVector<f64>,
    dt: f64,
    cfg: &IntegratorConfig,
) -> Result<DVector<f64>> {
    let n = z.len();
    let mut res = f64::INFINITY;
    for _ in 0..cfg.max_iter {
        let mid = (z + &y) * 0.5;
        let f = &y - z - field(h, &mid)? * dt;
        let scale = y.amax().max(1.0);
        res = f.amax();
        if res <= cfg.tol * scale {
            return Ok(y);
        }
        let jac = DMatrix::identity(n, n) - field_jacobian(h, &mid)? * (0.5 * dt);
        let delta = jac
            .lu()
            .solve(&f)
            .ok_or(Error::SingularJacobian { smallest: 0.0, largest: f64::NAN })?;
        y -= delta;
    }
    Err(Error::NewtonDivergence { iterations: cfg.max_iter, residual: res })
}

fn step_vec<H: Hamiltonian + ?Sized>(
    h: &H,
    z: &DVector<f64>,
    dt: f64,
    cfg: &IntegratorConfig,
) -> Result<DVector<f64>> {
    let mut y = z + field(h, z)? * dt;
    let mut prev = f64::INFINITY;
    for it in 0..cfg.max_iter {
        let mid = (z + &y) * 0.5;
        let next = z + field(h, &mid)? * dt;
        let d = (&next - &y).amax();
        y = next;
        if d <= cfg.tol * y.amax().max(1.0) {
            // One more sweep leaves the result a smooth function of z.
            let mid = (z + &y) * 0.5;
            return Ok(z + field(h, &mid)? * dt);
        }
        if it >= 2 && d > 0.5 * prev {
            return newton_stage(h, z, y, dt, cfg);
        }
        prev = d;
    }
    newton_stage(h, z, y, dt, cfg)
}

/// One implicit midpoint step of size `cfg.step`.
pub fn step_implicit_midpoint<H: Hamiltonian + ?Sized>(
    h: &H,
    s: &ChartState,
    cfg: &IntegratorConfig,
) -> Result<ChartState> {
    Ok(ChartState::from_vector(&step_vec(h, &s.to_vector(), cfg.step, cfg)?))
}

pub(crate) fn flow_vec<H: Hamiltonian + ?Sized>(
    h: &H,
    z: &DVector<f64>,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<DVector<f64>> {
    let dir = t.signum();
    let full = (t.abs() / cfg.step).floor();
    let rest = t.abs() - full * cfg.step;
    let mut y = z.clone();
    for _ in 0..full as usize {
        y = step_vec(h, &y, dir * cfg.step, cfg)?;
    }
    if rest > 1e-14 * t.abs().max(1.0) {
        y = step_vec(h, &y, dir * rest, cfg)?;
    }
    Ok(y)
}

/// Time-`t` map with exactly `steps` equal steps, smooth in `t`.
pub(crate) fn flow_vec_uniform<H: Hamiltonian + ?Sized>(
    h: &H,
    z: &DVector<f64>,
    t: f64,
    steps: usize,
    cfg: &IntegratorConfig,
) -> Result<DVector<f64>> {
    let dt = t / steps as f64;
    let mut y = z.clone();
    for _ in 0..steps {
        y = step_vec(h, &y, dt, cfg)?;
    }
    Ok(y)
}

/// Time-`t` map, taking `⌊|t|/h⌋` full steps and one partial step.
pub fn flow<H: Hamiltonian + ?Sized>(h: &H, s: &ChartState, t: f64, cfg: &IntegratorConfig) -> Result<ChartState> {
    Ok(ChartState::from_vector(&flow_vec(h, &s.to_vector(), t, cfg)?))
}

/// States at `t = 0, every·dt, 2·every·dt, …` and at `t_final`, where
/// `dt = t_final / ⌈t_final / h⌉` so the last step lands on `t_final`.
pub fn trajectory<H: Hamiltonian + ?Sized>(
    h: &H,
    s: &ChartState,
    t_final: f64,
    every: usize,
    cfg: &IntegratorConfig,
) -> Result<Vec<(f64, ChartState)>> {
    let every = every.max(1);
    let steps = (t_final / cfg.step).ceil().max(0.0) as usize;
    let dt = if steps > 0 { t_final / steps as f64 } else { 0.0 };
    let mut z = s.to_vector();
    let mut out = vec![(0.0, s.clone())];
    for k in 1..=steps {
        z = step_vec(h, &z, dt, cfg)?;
        if k % every == 0 || k == steps {
            out.push((if k == steps { t_final } else { k as f64 * dt }, ChartState::from_vector(&z)));
        }
    }
    Ok(out)
}

/// `∂φ_t/∂z` by central differences of the discrete flow, one column per thread.
pub fn flow_jacobian<H: Hamiltonian + ?Sized>(
    h: &H,
    s: &ChartState,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<DMatrix<f64>> {
    let z = s.to_vector();
    let cols: Vec<Result<DVector<f64>>> = (0..z.len())
        .into_par_iter()
        .map(|k| {
            let d = 1e-6 * z[k].abs().max(1.0);
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[k] += d;
            zm[k] -= d;
            Ok((flow_vec(h, &zp, t, cfg)? - flow_vec(h, &zm, t, cfg)?) / (2.0 * d))
        })
        .collect();
    let mut jac = DMatrix::zeros(z.len(), z.len());
    for (k, c) in cols.into_iter().enumerate() {
        jac.set_column(k, &c?);
    }
    Ok(jac)
}

/// A hyperplane section `⟨n, z − base⟩ = 0` inside the energy level `H = energy`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoincareSection {
    pub base: DVector<f64>,
    pub normal: DVector<f64>,
    pub energy: f64,
}

impl PoincareSection {
    /// Section through `s` with normal `n` (normalised here).
    pub fn through<H: Hamiltonian + ?Sized>(h: &H, s: &ChartState, n: &DVector<f64>) -> Result<Self> {
        Ok(Self { base: s.to_vector(), normal: n.normalize(), energy: h.energy(s)? })
    }

    /// Section through `s` transverse to the flow there.
    pub fn transverse<H: Hamiltonian + ?Sized>(h: &H, s: &ChartState) -> Result<Self> {
        let x = h.vector_field(s)?;
        Self::through(h, s, &x)
    }

    pub fn offset(&self, z: &DVector<f64>) -> f64 {
        self.normal.dot(&(z - &self.base))
    }
}

/// First positive crossing of the section after leaving `s`, with its time.
///
/// The crossing is bracketed by a full step and located by the Illinois
/// variant of regula falsi on the length of a single partial step.
pub fn poincare_return<H: Hamiltonian + ?Sized>(
    h: &H,
    section: &PoincareSection,
    s: &ChartState,
    period_hint: f64,
    cfg: &IntegratorConfig,
) -> Result<(ChartState, f64)> {
    let z0 = s.to_vector();
    let plane = section.offset(&z0).abs();
    let energy = (h.energy(s)? - section.energy).abs();
    if plane > 1e-10 * z0.amax().max(1.0) || energy > 1e-10 * section.energy.abs().max(1.0) {
        return Err(Error::OffSection { plane, energy });
    }
    let t_max = 10.0 * period_hint.abs();
    let mut t = 0.0;
    let mut z = z0;
    // The start is on the section by construction.
    let mut f_prev = 0.0;
    while t < t_max {
        let next = step_vec(h, &z, cfg.step, cfg)?;
        let f_next = section.offset(&next);
        if f_prev < 0.0 && f_next >= 0.0 {
            let (tau, zc) = refine_crossing(h, section, &z, f_prev, cfg.step, &next, f_next, cfg)?;
            let normal_speed = section.normal.dot(&field(h, &zc)?);
            if normal_speed.abs() < 1e-8 {
                return Err(Error::Tangency { normal_speed });
            }
            return Ok((ChartState::from_vector(&zc), t + tau));
        }
        z = next;
        f_prev = f_next;
        t += cfg.step;
    }
    Err(Error::NoReturn { t_max })
}

#[allow(clippy::too_many_arguments)]
fn refine_crossing<H: Hamiltonian + ?Sized>(
    h: &H,
    section: &PoincareSection,
    z: &DVector<f64>,
    fa0: f64,
    tb0: f64,
    zb0: &DVector<f64>,
    fb0: f64,
    cfg: &IntegratorConfig,
) -> Result<(f64, DVector<f64>)> {
    if fb0 == 0.0 {
        return Ok((tb0, zb0.clone()));
    }
    let (mut ta, mut fa) = (0.0, fa0);
    let (mut tb, mut fb) = (tb0, fb0);
    let mut zb = zb0.clone();
    let mut side = 0i32;
    let ftol = 1e-15 * z.amax().max(1.0);
    for _ in 0..200 {
        let tc = (ta * fb - tb * fa) / (fb - fa);
        let zc = step_vec(h, z, tc, cfg)?;
        let fc = section.offset(&zc);
        if fc.abs() <= ftol || (tb - ta).abs() <= 1e-15 * tb0 {
            return Ok((tc, zc));
        }
        if fc < 0.0 {
            ta = tc;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            tb = tc;
            fb = fc;
            zb = zc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    Ok((tb, zb))
}

/// Eigenvalues of a monodromy matrix.
pub fn floquet_multipliers(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    if m.is_empty() {
        return Vec::new();
    }
    m.complex_eigenvalues().iter().copied().collect()
}

/// `max |DFᵀ Ω₆ DF − Ω₄|` for the single-particle map
/// `F(w, α) = (Exp(w), D J(w) G(w)⁻¹ α)` into `(R³ × R³, dq ∧ dp♭)`, evaluated
/// by central differences at each sample. Zero at `ε = 0`, where `F` is the
/// identity.
pub fn symplectic_pullback_check(param: CurvatureParam, samples: &[(Vector2<f64>, Vector2<f64>)]) -> Result<f64> {
    if param.is_flat() {
        return Ok(0.0);
    }
    let sign = param.sign();
    let lift = |w: &Vector2<f64>, a: &Vector2<f64>| -> Result<(Vector3<f64>, Vector3<f64>)> {
        let q = exp_chart(param, w)?;
        let mut v = chart_jacobian(param, w)? * (metric_at(param, w)?.g_inv * a);
        v[2] *= sign;
        Ok((q, v))
    };
    let mut om6 = nalgebra::Matrix6::zeros();
    let mut om4 = nalgebra::Matrix4::zeros();
    for k in 0..3 {
        om6[(k, 3 + k)] = 1.0;
        om6[(3 + k, k)] = -1.0;
    }
    for k in 0..2 {
        om4[(k, 2 + k)] = 1.0;
        om4[(2 + k, k)] = -1.0;
    }
    let mut worst: f64 = 0.0;
    for (w, a) in samples {
        let mut df = Matrix6x4::zeros();
        let d = 1e-5;
        for k in 0..4 {
            let mut e = nalgebra::Vector4::zeros();
            e[k] = d;
            let shift = |sgn: f64| -> Result<nalgebra::Vector6<f64>> {
                let wk = w + Vector2::new(e[0], e[1]) * sgn;
                let ak = a + Vector2::new(e[2], e[3]) * sgn;
                let (q, v) = lift(&wk, &ak)?;
                Ok(nalgebra::Vector6::new(q[0], q[1], q[2], v[0], v[1], v[2]))
            };
            df.set_column(k, &((shift(1.0)? - shift(-1.0)?) / (2.0 * d)));
        }
        let r = df.transpose() * om6 * df - om4;
        worst = worst.max(r.amax());
    }
    Ok(worst)
}
