//! Invariant suites for the geometry, symmetry, Hamiltonian and dynamics
//! layers, each a list of measured quantities against thresholds.
//!
//! Every random sample is drawn from a [`ChaCha8Rng`] seeded by the caller, so
//! a report is a pure function of `(suite, seed)`.

use std::fmt::Write as _;

use nalgebra::{Complex, Matrix2, Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{
    flow, flow_jacobian, floquet_multipliers, poincare_return, symplectic_pullback_check, IntegratorConfig,
    PoincareSection,
};
use crate::error::Result;
use crate::geometry::{
    chart_jacobian, exp_chart, geodesic_angle, log_chart, metric_at, sigma_inner, CurvatureParam,
};
use crate::hamiltonian::{h2_correction, hamiltonian, BodySystem, Hamiltonian, NewtonianSystem};
use crate::scenarios::make_two_body;
use crate::state::ChartState;
use crate::symmetry::{
    act_state, bracket, coadjoint, exp_group, generator_chart, isotropy_algebra, momentum_nbody, AlgebraElement,
    GroupElement, MomentumValue, DEFAULT_RANK_TOL,
};

/// The `ε` ladder for expansion-order checks.
pub const EXPANSION_GRID: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Geometry,
    Symmetry,
    Hamiltonian,
    Dynamics,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Geometry, Suite::Symmetry, Suite::Hamiltonian, Suite::Dynamics];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Geometry => "geometry",
            Suite::Symmetry => "symmetry",
            Suite::Hamiltonian => "hamiltonian",
            Suite::Dynamics => "dynamics",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
    Within(f64, f64),
}

impl Bound {
    pub fn holds(&self, v: f64) -> bool {
        match *self {
            Bound::AtMost(t) => v <= t,
            Bound::AtLeast(t) => v >= t,
            Bound::Within(lo, hi) => (lo..=hi).contains(&v),
        }
    }

    fn describe(&self) -> String {
        match *self {
            Bound::AtMost(t) => format!("<= {t:.1e}"),
            Bound::AtLeast(t) => format!(">= {t:.1e}"),
            Bound::Within(lo, hi) => format!("in [{lo}, {hi}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, bound: Bound) -> Self {
        let passed = bound.holds(value);
        Self { name: name.into(), value, bound, passed }
    }

    /// A check whose measurement itself failed.
    fn failed(name: impl Into<String>, bound: Bound) -> Self {
        Self { name: name.into(), value: f64::NAN, bound, passed: false }
    }
}

fn check_of(name: &str, bound: Bound, value: Result<f64>) -> Check {
    match value {
        Ok(v) => Check::new(name, v, bound),
        Err(_) => Check::failed(name, bound),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub suite: Suite,
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Fixed-width table: check, measured value, threshold, PASS/FAIL.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "suite {} (seed {})", self.suite.name(), self.seed);
        let _ = writeln!(out, "{:<44} {:>24}  {:<20} result", "check", "value", "threshold");
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{:<44} {:>24.16e}  {:<20} {}",
                c.name,
                c.value,
                c.bound.describe(),
                if c.passed { "PASS" } else { "FAIL" }
            );
        }
        out
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Report {
    let checks = match suite {
        Suite::Geometry => geometry_checks(seed),
        Suite::Symmetry => symmetry_checks(seed),
        Suite::Hamiltonian => hamiltonian_checks(seed),
        Suite::Dynamics => dynamics_checks(seed),
    };
    Report { suite, seed, checks }
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Uniform point of the disc of radius `r`.
pub fn random_point(rng: &mut ChaCha8Rng, r: f64) -> Vector2<f64> {
    loop {
        let v = Vector2::new(rng.gen_range(-r..r), rng.gen_range(-r..r));
        if v.norm() <= r {
            return v;
        }
    }
}

/// `count` states of `n` bodies with `‖q‖ ≤ 1`, pairwise separation at
/// least 0.2, and momentum components in `[−1, 1]`.
pub fn random_states(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<ChartState> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let q: Vec<Vector2<f64>> = (0..n).map(|_| random_point(rng, 1.0)).collect();
        let p: Vec<Vector2<f64>> =
            (0..n).map(|_| Vector2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let s = ChartState::new(q, p);
        if s.min_pair_distance() >= 0.2 {
            out.push(s);
        }
    }
    out
}

fn random_element(rng: &mut ChaCha8Rng) -> AlgebraElement {
    AlgebraElement::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn curved(sigma: i32, eps: f64) -> CurvatureParam {
    CurvatureParam::new(sigma, eps).expect("valid parameter")
}

fn random_param(rng: &mut ChaCha8Rng) -> CurvatureParam {
    let sigma = if rng.gen_bool(0.5) { 1 } else { -1 };
    curved(sigma, rng.gen_range(0.05..1.0))
}

/// Chart point with `ερ ≤ 2` (well inside the injectivity ball on the sphere).
fn random_chart_point(rng: &mut ChaCha8Rng, param: CurvatureParam) -> Vector2<f64> {
    random_point(rng, 2.0 / param.epsilon())
}

// ---------------------------------------------------------------------------
// Geometry

/// `‖G⁻¹ − I − σε²ρ²/3·(I − P)‖` at `w`, with `P` the radial projector.
pub fn cometric_remainder(param: CurvatureParam, w: &Vector2<f64>) -> Result<f64> {
    let ginv = metric_at(param, w)?.g_inv;
    let rho2 = w.norm_squared();
    let proj = w * w.transpose() / rho2;
    let k = param.sign() * param.epsilon().powi(2) * rho2 / 3.0;
    Ok((ginv - Matrix2::identity() - (Matrix2::identity() - proj) * k).norm())
}

/// `|cos_σ(ψ) − 1 + σε²r²/2 − ε⁴(r⁴ + 4A)/24|` for two chart points, with
/// `A = |w₁|²|w₂|² − (w₁·w₂)²`.
pub fn cos_psi_remainder(param: CurvatureParam, w1: &Vector2<f64>, w2: &Vector2<f64>) -> Result<f64> {
    let psi = geodesic_angle(param, w1, w2)?;
    let c = if param.sign() > 0.0 { psi.cos() } else { psi.cosh() };
    let eps = param.epsilon();
    let s = param.sign();
    let r2 = (w1 - w2).norm_squared();
    let a = w1.norm_squared() * w2.norm_squared() - w1.dot(w2).powi(2);
    Ok((c - 1.0 + s * eps * eps * r2 / 2.0 - eps.powi(4) * (r2 * r2 + 4.0 * a) / 24.0).abs())
}

fn geometry_checks(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<(CurvatureParam, Vector2<f64>)> = (0..100)
        .map(|_| {
            let p = random_param(&mut rng);
            (p, random_chart_point(&mut rng, p))
        })
        .collect();
    let mut checks = Vec::new();

    let roundtrip = || -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (p, w) in &samples {
            let back = log_chart(*p, &exp_chart(*p, w)?)?;
            worst = worst.max((back - w).norm() / w.norm().max(1.0));
        }
        Ok(worst)
    };
    checks.push(check_of("log(exp(w)) - w", Bound::AtMost(1e-10), roundtrip()));

    let constraint = || -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (p, w) in &samples {
            let q = exp_chart(*p, w)?;
            let target = p.sign() / p.epsilon().powi(2);
            worst = worst.max((sigma_inner(*p, &q, &q) - target).abs() / target.abs());
        }
        Ok(worst)
    };
    checks.push(check_of("ambient constraint (relative)", Bound::AtMost(1e-11), constraint()));

    let pullback = || -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (p, w) in &samples {
            let j = chart_jacobian(*p, w)?;
            let d = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, p.sign()));
            worst = worst.max((j.transpose() * d * j - metric_at(*p, w)?.g).amax());
        }
        Ok(worst)
    };
    checks.push(check_of("metric = Jacobian Gram matrix", Bound::AtMost(1e-12), pullback()));

    let radial = || -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (p, w) in &samples {
            let dir = w.normalize();
            let (r1, r2) = (0.3 * w.norm(), w.norm());
            let psi = geodesic_angle(*p, &(dir * r1), &(dir * r2))?;
            worst = worst.max((psi - p.epsilon() * (r2 - r1)).abs());
        }
        Ok(worst)
    };
    checks.push(check_of("radial geodesic angle", Bound::AtMost(1e-12), radial()));

    let pairs: Vec<(Vector2<f64>, Vector2<f64>)> =
        (0..10).map(|_| (random_point(&mut rng, 1.0), random_point(&mut rng, 1.0))).collect();
    let ladder: Vec<f64> = (0..5).map(|k| 1e-1 / 2f64.powi(k)).collect();
    for sigma in [1, -1] {
        let cometric = || -> Result<f64> {
            let mut r = Vec::with_capacity(ladder.len());
            for &e in &ladder {
                let mut worst: f64 = 0.0;
                for (w, _) in &pairs {
                    worst = worst.max(cometric_remainder(curved(sigma, e), w)?);
                }
                r.push(worst);
            }
            Ok(log_log_slope(&ladder, &r))
        };
        checks.push(check_of(
            &format!("cometric remainder slope, sigma={sigma:+}"),
            Bound::Within(3.7, 4.3),
            cometric(),
        ));
        let cos_psi = || -> Result<f64> {
            let mut r = Vec::with_capacity(EXPANSION_GRID.len());
            for &e in &EXPANSION_GRID {
                let mut worst: f64 = 0.0;
                for (w1, w2) in &pairs {
                    worst = worst.max(cos_psi_remainder(curved(sigma, e), w1, w2)?);
                }
                r.push(worst);
            }
            Ok(log_log_slope(&EXPANSION_GRID, &r))
        };
        checks.push(check_of(&format!("cos(psi) remainder slope, sigma={sigma:+}"), Bound::Within(5.7, 6.3), cos_psi()));
    }
    checks
}

// ---------------------------------------------------------------------------
// Symmetry

/// Largest Jacobi-identity residual over `count` random triples.
pub fn jacobi_residual(param: CurvatureParam, rng: &mut ChaCha8Rng, count: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let (x, y, z) = (random_element(rng), random_element(rng), random_element(rng));
        let j = bracket(param, &x, &bracket(param, &y, &z))
            .add(bracket(param, &y, &bracket(param, &z, &x)))
            .add(bracket(param, &z, &bracket(param, &x, &y)));
        worst = worst.max(j.norm());
    }
    worst
}

/// `‖𝒥_ε(s) − 𝒥₀(s)‖` with `𝒥₀ = (Σp_u, Σp_v, Σ(u p_v − v p_u))`.
pub fn momentum_contraction_gap(param: CurvatureParam, s: &ChartState) -> Result<f64> {
    Ok((momentum_nbody(param, s)?.to_vector() - se2_momentum(s).to_vector()).norm())
}

/// Planar momentum written out directly.
pub fn se2_momentum(s: &ChartState) -> MomentumValue {
    let mut m = MomentumValue::new(0.0, 0.0, 0.0);
    for (q, p) in s.q.iter().zip(&s.p) {
        m.mu1 += p[0];
        m.mu2 += p[1];
        m.l += q[0] * p[1] - q[1] * p[0];
    }
    m
}

fn symmetry_checks(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    let params: Vec<CurvatureParam> = [0.0, 0.3, 1.0]
        .iter()
        .flat_map(|&e| [1, -1].map(|s| CurvatureParam::new(s, e).expect("valid")))
        .collect();

    let jacobi = params.iter().map(|p| jacobi_residual(*p, &mut rng, 1000)).fold(0.0, f64::max);
    checks.push(Check::new("Jacobi identity", jacobi, Bound::AtMost(1e-14)));

    let mut anti: f64 = 0.0;
    for p in &params {
        for _ in 0..200 {
            let (x, y) = (random_element(&mut rng), random_element(&mut rng));
            anti = anti.max(bracket(*p, &x, &y).add(bracket(*p, &y, &x)).norm());
        }
    }
    checks.push(Check::new("bracket antisymmetry", anti, Bound::AtMost(1e-15)));

    let b12 = params
        .iter()
        .map(|p| {
            let c = bracket(*p, &AlgebraElement::b1(), &AlgebraElement::b2());
            (c.omega - p.sign() * p.epsilon().powi(2)).abs() + c.a.abs() + c.b.abs()
        })
        .fold(0.0, f64::max);
    checks.push(Check::new("[b1,b2] = sigma eps^2 b3", b12, Bound::AtMost(1e-15)));

    let mut membership: f64 = 0.0;
    for p in params.iter().filter(|p| !p.is_flat()) {
        let d = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, p.sign()));
        for _ in 0..100 {
            let xi = random_element(&mut rng);
            let t = rng.gen_range(-1.0..1.0) * 10.0 / xi.norm();
            if let GroupElement::Ambient(m) = exp_group(*p, &xi, t) {
                let scale = m.norm_squared().max(1.0);
                membership = membership.max((m.transpose() * d * m - d).amax() / scale).max((m.determinant() - 1.0).abs() / scale);
            }
        }
    }
    checks.push(Check::new("exp_group preserves the sigma form (relative)", membership, Bound::AtMost(1e-10)));

    let states = random_states(&mut rng, 3, 20);
    let mut equivariance = || -> Result<f64> {
        let mut worst: f64 = 0.0;
        for p in &params {
            for s in &states {
                let gamma = rng.gen_range(-3.0..3.0);
                let g = exp_group(*p, &AlgebraElement::b3(), gamma);
                let before = momentum_nbody(*p, s)?;
                let after = momentum_nbody(*p, &act_state(*p, &g, s)?)?;
                let (sn, cs) = gamma.sin_cos();
                let rotated = Vector2::new(cs * before.mu1 - sn * before.mu2, sn * before.mu1 + cs * before.mu2);
                worst = worst.max((after.l - before.l).abs()).max((Vector2::new(after.mu1, after.mu2) - rotated).norm());
            }
        }
        Ok(worst)
    };
    checks.push(check_of("momentum equivariance under b3", Bound::AtMost(1e-9), equivariance()));

    let isotropy = || -> Result<f64> {
        let mut worst: f64 = 0.0;
        for p in &params {
            for s in &states {
                let mu = momentum_nbody(*p, s)?;
                for xi in isotropy_algebra(*p, &mu, DEFAULT_RANK_TOL)?.basis {
                    worst = worst.max(coadjoint(*p, &xi, &mu).norm() / mu.norm());
                }
            }
        }
        Ok(worst)
    };
    checks.push(check_of("isotropy annihilates mu (relative)", Bound::AtMost(1e-9), isotropy()));

    let w = random_point(&mut rng, 1.0);
    for (name, xi, limit) in [
        ("b1 generator contraction slope", AlgebraElement::b1(), Vector2::new(1.0, 0.0)),
        ("b2 generator contraction slope", AlgebraElement::b2(), Vector2::new(0.0, 1.0)),
    ] {
        let slope = || -> Result<f64> {
            let mut worst = f64::NEG_INFINITY;
            for sigma in [1, -1] {
                let r: Vec<f64> = EXPANSION_GRID
                    .iter()
                    .map(|&e| Ok((generator_chart(curved(sigma, e), &xi, &w)? - limit).norm()))
                    .collect::<Result<_>>()?;
                worst = worst.max((log_log_slope(&EXPANSION_GRID, &r) - 2.0).abs());
            }
            Ok(2.0 + worst)
        };
        checks.push(check_of(name, Bound::Within(1.7, 2.3), slope()));
    }

    for sigma in [1, -1] {
        checks.push(check_of(
            &format!("momentum contraction slope, sigma={sigma:+}"),
            Bound::Within(1.8, 2.2),
            contraction_slope(sigma, &states),
        ));
    }
    let flat = CurvatureParam::flat(1).expect("valid");
    let flat_gap = || -> Result<f64> {
        let mut worst: f64 = 0.0;
        for s in &states {
            worst = worst.max(momentum_contraction_gap(flat, s)?);
        }
        Ok(worst)
    };
    checks.push(check_of("flat momentum is the planar momentum", Bound::AtMost(0.0), flat_gap()));
    checks
}

// ---------------------------------------------------------------------------
// Hamiltonian

/// `|H_ε − H₀ − σε²H₂|` at `s`.
pub fn expansion_remainder(sigma: i32, eps: f64, sys: &BodySystem, s: &ChartState) -> Result<f64> {
    let h = hamiltonian(curved(sigma, eps), sys, s)?;
    let h0 = hamiltonian(CurvatureParam::flat(sigma)?, sys, s)?;
    Ok((h - h0 - sigma as f64 * eps * eps * h2_correction(sys, s)?).abs())
}

/// Log-log slope over [`EXPANSION_GRID`] of `max_s |H_ε − H₀ − σε²H₂|`.
pub fn expansion_slope(sigma: i32, sys: &BodySystem, states: &[ChartState]) -> Result<f64> {
    let r = max_over_batch(states, |e, s| expansion_remainder(sigma, e, sys, s))?;
    Ok(log_log_slope(&EXPANSION_GRID, &r))
}

/// Log-log slope over [`EXPANSION_GRID`] of `max_s ‖𝒥_ε(s) − 𝒥₀(s)‖`.
pub fn contraction_slope(sigma: i32, states: &[ChartState]) -> Result<f64> {
    let r = max_over_batch(states, |e, s| momentum_contraction_gap(curved(sigma, e), s))?;
    Ok(log_log_slope(&EXPANSION_GRID, &r))
}

fn max_over_batch(states: &[ChartState], f: impl Fn(f64, &ChartState) -> Result<f64>) -> Result<Vec<f64>> {
    EXPANSION_GRID
        .iter()
        .map(|&e| states.iter().try_fold(0.0_f64, |acc, s| Ok(acc.max(f(e, s)?))))
        .collect()
}

fn hamiltonian_checks(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sys = BodySystem::new(vec![1.0, 2.0, 0.5]).expect("valid masses");
    let states = random_states(&mut rng, 3, 20);
    let mut checks = Vec::new();
    for sigma in [1, -1] {
        checks.push(check_of(
            &format!("H expansion remainder slope, sigma={sigma:+}"),
            Bound::Within(3.7, 4.3),
            expansion_slope(sigma, &sys, &states),
        ));
    }

    let params: Vec<CurvatureParam> = [0.0, 0.1, 0.3]
        .iter()
        .flat_map(|&e| [1, -1].map(|s| CurvatureParam::new(s, e).expect("valid")))
        .collect();
    let mut rotation = || -> Result<f64> {
        let mut worst: f64 = 0.0;
        for p in &params {
            for s in &states {
                let g = exp_group(*p, &AlgebraElement::b3(), rng.gen_range(-3.0..3.0));
                worst = worst.max((hamiltonian(*p, &sys, &act_state(*p, &g, s)?)? - hamiltonian(*p, &sys, s)?).abs());
            }
        }
        Ok(worst)
    };
    checks.push(check_of("rotation invariance of H", Bound::AtMost(1e-11), rotation()));

    let mut isometry = || -> Result<f64> {
        let mut worst: f64 = 0.0;
        for p in params.iter().filter(|p| !p.is_flat()) {
            for s in &states {
                let g = exp_group(*p, &AlgebraElement::b1(), rng.gen_range(-0.5..0.5));
                worst = worst.max((hamiltonian(*p, &sys, &act_state(*p, &g, s)?)? - hamiltonian(*p, &sys, s)?).abs());
            }
        }
        Ok(worst)
    };
    checks.push(check_of("b1 isometry invariance of H", Bound::AtMost(1e-9), isometry()));

    let gradient = || -> Result<f64> {
        let mut worst: f64 = 0.0;
        for p in &params {
            let h = NewtonianSystem::new(*p, sys.clone());
            for s in states.iter().take(5) {
                let g = h.gradient(s)?.to_vector();
                let z = s.to_vector();
                for k in 0..z.len() {
                    let d = 1e-6;
                    let mut zp = z.clone();
                    let mut zm = z.clone();
                    zp[k] += d;
                    zm[k] -= d;
                    let fd = (h.energy(&ChartState::from_vector(&zp))? - h.energy(&ChartState::from_vector(&zm))?)
                        / (2.0 * d);
                    worst = worst.max((fd - g[k]).abs() / g.amax().max(1.0));
                }
            }
        }
        Ok(worst)
    };
    checks.push(check_of("gradient vs differences (relative)", Bound::AtMost(1e-6), gradient()));

    let flat = || -> Result<f64> {
        let mut worst: f64 = 0.0;
        let m = sys.masses();
        for s in &states {
            let mut k = 0.0;
            for (i, p) in s.p.iter().enumerate() {
                k += p.norm_squared() / (2.0 * m[i]);
            }
            let mut u = 0.0;
            for i in 0..s.n() {
                for j in i + 1..s.n() {
                    u -= m[i] * m[j] / (s.q[i] - s.q[j]).norm();
                }
            }
            let h = hamiltonian(CurvatureParam::flat(1)?, &sys, s)?;
            worst = worst.max((h - (k + u)).abs() / (k + u).abs().max(1.0));
        }
        Ok(worst)
    };
    checks.push(check_of("flat H is the planar Hamiltonian", Bound::AtMost(4.0 * f64::EPSILON), flat()));
    checks
}

// ---------------------------------------------------------------------------
// Dynamics

/// Energy and momentum change of the flat circular two-body orbit (masses 1,
/// separation 1) after one flat period at `(σ, ε)`.
pub fn two_body_conservation(sigma: i32, eps: f64, cfg: &IntegratorConfig) -> Result<(f64, f64)> {
    let seed = make_two_body([1.0, 1.0], 1.0, [0.0, 0.0])?;
    let param = CurvatureParam::new(sigma, eps)?;
    let h = NewtonianSystem::new(param, seed.bodies.clone());
    let end = flow(&h, &seed.state, seed.period(), cfg)?;
    let de = (h.energy(&end)? - h.energy(&seed.state)?).abs();
    let dmu = (momentum_nbody(param, &end)?.to_vector() - momentum_nbody(param, &seed.state)?.to_vector()).norm();
    Ok((de, dmu))
}

fn dynamics_checks(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    let cfg = IntegratorConfig::default();
    for eps in [0.0, 0.1] {
        for sigma in [1, -1] {
            let r = two_body_conservation(sigma, eps, &cfg);
            let tag = format!("eps={eps}, sigma={sigma:+}");
            checks.push(check_of(&format!("two-body |dH|, {tag}"), Bound::AtMost(1e-8), r.clone().map(|v| v.0)));
            checks.push(check_of(&format!("two-body |dmu|, {tag}"), Bound::AtMost(1e-8), r.map(|v| v.1)));
        }
    }

    let sys = BodySystem::equal(3, 1.0).expect("valid");
    let states = random_states(&mut rng, 3, 5);
    let reversibility = || -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (k, s) in states.iter().enumerate() {
            let p = curved(if k % 2 == 0 { 1 } else { -1 }, 0.2);
            let h = NewtonianSystem::new(p, sys.clone());
            let c = IntegratorConfig::with_step(1e-2);
            let back = flow(&h, &flow(&h, s, 0.05, &c)?, -0.05, &c)?;
            worst = worst.max((back.to_vector() - s.to_vector()).amax());
        }
        Ok(worst)
    };
    checks.push(check_of("forward-backward integration", Bound::AtMost(1e-10), reversibility()));

    let tb = make_two_body([1.0, 1.0], 1.0, [0.0, 0.0]).expect("valid");
    let flat = CurvatureParam::flat(1).expect("valid");
    let h = NewtonianSystem::new(flat, tb.bodies.clone());
    let unit = || -> Result<f64> {
        let m = flow_jacobian(&h, &tb.state, tb.period(), &cfg)?;
        let near = floquet_multipliers(&m).iter().filter(|z| (*z - Complex::new(1.0, 0.0)).norm() < 1e-4).count();
        Ok(near as f64)
    };
    checks.push(check_of("multipliers within 1e-4 of 1", Bound::AtLeast(2.0), unit()));

    let fixed_point = || -> Result<f64> {
        let section = PoincareSection::transverse(&h, &tb.state)?;
        let (out, _) = poincare_return(&h, &section, &tb.state, tb.period(), &cfg)?;
        Ok((out.to_vector() - tb.state.to_vector()).norm())
    };
    checks.push(check_of("circular orbit returns to itself", Bound::AtMost(1e-8), fixed_point()));

    for sigma in [1, -1] {
        let p = curved(sigma, 0.2);
        let samples: Vec<(Vector2<f64>, Vector2<f64>)> = (0..20)
            .map(|_| (random_chart_point(&mut rng, p), Vector2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
            .collect();
        checks.push(check_of(
            &format!("symplectic pullback, sigma={sigma:+}"),
            Bound::AtMost(1e-7),
            symplectic_pullback_check(p, &samples),
        ));
    }
    checks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_power_law() {
        let xs = [0.1, 0.05, 0.025];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powi(4)).collect();
        assert!((log_log_slope(&xs, &ys) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn suites_pass() {
        for suite in Suite::ALL {
            let r = run_suite(suite, 1);
            assert!(r.passed(), "{}", r.render());
        }
    }

    #[test]
    fn reports_are_deterministic() {
        assert_eq!(run_suite(Suite::Symmetry, 9).render(), run_suite(Suite::Symmetry, 9).render());
    }

    #[test]
    fn failing_bounds() {
        assert!(!Check::new("x", 2.0, Bound::AtMost(1.0)).passed);
        assert!(!Check::new("x", f64::NAN, Bound::Within(0.0, 1.0)).passed);
        assert!(Check::new("x", 3.0, Bound::AtLeast(2.0)).passed);
    }
}
