//! Seed configurations and scenario files.
//!
//! Every seed is a flat configuration with its centre of mass at the chart
//! origin. Relative-equilibrium seeds rotate rigidly, `p_i = m_i(ω J q_i + V)`
//! with `J` the quarter turn and `V` an optional drift velocity.
//!
//! # Scenario files
//!
//! A scenario is a JSON object:
//!
//! ```json
//! {
//!   "kind": "lagrange",            // lagrange | euler | ngon | two_body | figure_eight | custom
//!   "masses": [1.0, 1.0, 1.0],
//!   "side": 1.0,                   // lagrange
//!   "spacing": 1.0,                // euler
//!   "circumradius": 1.0, "n": 4,   // ngon (n may be inferred from masses)
//!   "separation": 1.0,             // two_body
//!   "drift": [0.0, 0.0],           // centre-of-mass velocity
//!   "sigma": 1,
//!   "epsilon_grid": {"start": 0.0, "stop": 0.2, "step": 0.01},
//!   "integrator": {"step": 0.001, "tol": 1e-14},
//!   "output": {"directory": "out"},
//!   "state": {"positions": [[0.5, 0.0], [-0.5, 0.0]], "momenta": [[0.0, 0.7], [0.0, -0.7]]},
//!   "omega": 1.414,                // custom: rotation rate of an RE seed
//!   "period": 4.44,                // custom: period guess for orbit seeds
//!   "path": "figure_eight.json"    // figure_eight: alternative data file
//! }
//! ```
//!
//! Only `kind` is required; the fields each kind needs are checked by
//! [`ScenarioSpec::validate`]. Unknown fields are rejected.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::dynamics::{flow, IntegratorConfig};
use crate::error::{Error, Result};
use crate::geometry::CurvatureParam;
use crate::hamiltonian::{BodySystem, NewtonianSystem};
use crate::state::ChartState;
use crate::symmetry::{momentum_nbody, AlgebraElement};

/// The shipped figure-eight data.
pub const FIGURE_EIGHT_JSON: &str = include_str!("../assets/figure_eight.json");
/// Closure required of figure-eight data before use.
pub const FIGURE_EIGHT_CLOSURE_TOL: f64 = 1e-6;

/// A flat seed: state, rotation generator and masses.
#[derive(Debug, Clone, PartialEq)]
pub struct Seed {
    pub bodies: BodySystem,
    pub state: ChartState,
    pub generator: AlgebraElement,
}

impl Seed {
    pub fn omega(&self) -> f64 {
        self.generator.omega
    }

    /// Rotation period `2π/ω`.
    pub fn period(&self) -> f64 {
        TAU / self.omega().abs()
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Schema { field: field.into(), message: format!("must be positive, got {v}") })
    }
}

fn quarter_turn(v: &Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-v[1], v[0])
}

/// Centres `q` on its centre of mass and attaches rigid-rotation momenta.
fn rigid_seed(masses: &[f64], q: Vec<Vector2<f64>>, omega: f64, drift: [f64; 2]) -> Result<Seed> {
    let bodies = BodySystem::new(masses.to_vec())?;
    let total = bodies.total_mass();
    let com = q.iter().zip(masses).fold(Vector2::zeros(), |acc, (x, m)| acc + x * *m) / total;
    let v = Vector2::new(drift[0], drift[1]);
    let q: Vec<Vector2<f64>> = q.iter().map(|x| x - com).collect();
    let p = q.iter().zip(masses).map(|(x, m)| (quarter_turn(x) * omega + v) * *m).collect();
    Ok(Seed { bodies, state: ChartState::new(q, p), generator: AlgebraElement::new(0.0, 0.0, omega) })
}

/// Equilateral triangle of side `side`, `ω² = M/d³`.
pub fn make_lagrange(masses: [f64; 3], side: f64, drift: [f64; 2]) -> Result<Seed> {
    positive("side", side)?;
    let r = side / 3f64.sqrt();
    let q = (0..3)
        .map(|k| {
            let a = PI / 2.0 + TAU * k as f64 / 3.0;
            Vector2::new(r * a.cos(), r * a.sin())
        })
        .collect();
    let total: f64 = masses.iter().sum();
    rigid_seed(&masses, q, (total / side.powi(3)).sqrt(), drift)
}

/// Collinear balance function in units where `x₁ = 0`, `x₂ = 1`, `x₃ = 1 + λ`:
/// zero exactly when the accelerations are proportional to the positions.
pub fn euler_balance(masses: [f64; 3], lambda: f64) -> f64 {
    let (a1, a2, a3) = euler_accelerations(masses, lambda);
    (a2 - a1) - (a3 - a2) / lambda
}

fn euler_accelerations(m: [f64; 3], lambda: f64) -> (f64, f64, f64) {
    let l1 = 1.0 + lambda;
    (
        m[1] + m[2] / (l1 * l1),
        -m[0] + m[2] / (lambda * lambda),
        -m[0] / (l1 * l1) - m[1] / (lambda * lambda),
    )
}

/// Ratio `λ = (x₃ − x₂)/(x₂ − x₁)` of the collinear central configuration.
pub fn euler_ratio(masses: [f64; 3]) -> Result<f64> {
    let (mut lo, mut hi) = (1e-6, 1e6);
    let (flo, fhi) = (euler_balance(masses, lo), euler_balance(masses, hi));
    if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
        return Err(Error::BisectionFailure { detail: format!("no sign change for masses {masses:?}") });
    }
    for _ in 0..400 {
        let mid = (lo * hi).sqrt();
        let fm = euler_balance(masses, mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let scale = euler_accelerations(masses, lambda).0.abs().max(1.0);
    if euler_balance(masses, lambda).abs() > 1e-12 * scale {
        return Err(Error::BisectionFailure {
            detail: format!("balance residual {} at λ = {lambda}", euler_balance(masses, lambda)),
        });
    }
    Ok(lambda)
}

/// Collinear configuration with `x₂ − x₁ = spacing`.
pub fn make_euler(masses: [f64; 3], spacing: f64) -> Result<Seed> {
    positive("spacing", spacing)?;
    let lambda = euler_ratio(masses)?;
    let (a1, a2, _) = euler_accelerations(masses, lambda);
    let omega = ((a1 - a2) / spacing.powi(3)).sqrt();
    let q = vec![Vector2::new(0.0, 0.0), Vector2::new(spacing, 0.0), Vector2::new(spacing * (1.0 + lambda), 0.0)];
    rigid_seed(&masses, q, omega, [0.0, 0.0])
}

/// `ω²` of the regular `n`-gon of equal masses.
pub fn ngon_omega_squared(n: usize, mass: f64, circumradius: f64) -> f64 {
    let s: f64 = (1..n).map(|k| 1.0 / (PI * k as f64 / n as f64).sin()).sum();
    mass * s / (4.0 * circumradius.powi(3))
}

/// `n` equal masses on a circle.
pub fn make_ngon(n: usize, mass: f64, circumradius: f64) -> Result<Seed> {
    if n < 3 {
        return Err(Error::Schema { field: "n".into(), message: format!("need n >= 3, got {n}") });
    }
    positive("mass", mass)?;
    positive("circumradius", circumradius)?;
    let q = (0..n)
        .map(|k| {
            let a = TAU * k as f64 / n as f64;
            Vector2::new(circumradius * a.cos(), circumradius * a.sin())
        })
        .collect();
    rigid_seed(&vec![mass; n], q, ngon_omega_squared(n, mass, circumradius).sqrt(), [0.0, 0.0])
}

/// Circular two-body orbit with `ω² = M/d³`.
pub fn make_two_body(masses: [f64; 2], separation: f64, drift: [f64; 2]) -> Result<Seed> {
    positive("separation", separation)?;
    let total = masses[0] + masses[1];
    let q = vec![Vector2::new(separation, 0.0), Vector2::new(0.0, 0.0)];
    rigid_seed(&masses, q, (total / separation.powi(3)).sqrt(), drift)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OrbitFile {
    #[serde(default)]
    description: String,
    masses: Vec<f64>,
    positions: Vec<[f64; 2]>,
    momenta: Vec<[f64; 2]>,
    period: f64,
    validation_step: f64,
}

/// Validated periodic-orbit data.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSeed {
    pub bodies: BodySystem,
    pub state: ChartState,
    pub period: f64,
    /// `‖φ_T(z₀) − z₀‖` measured on ingestion.
    pub closure: f64,
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse { line: e.line(), column: e.column(), message: e.to_string() }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn figure_eight_from_str(text: &str) -> Result<OrbitSeed> {
    let f: OrbitFile = serde_json::from_str(text).map_err(parse_error)?;
    if f.masses.len() != 3 || f.masses.iter().any(|&m| m != 1.0) {
        return Err(Error::Schema { field: "masses".into(), message: "expected three unit masses".into() });
    }
    if f.positions.len() != 3 || f.momenta.len() != 3 {
        return Err(Error::Schema { field: "positions".into(), message: "expected three bodies".into() });
    }
    positive("period", f.period)?;
    positive("validation_step", f.validation_step)?;
    let state = ChartState::new(
        f.positions.iter().map(|x| Vector2::new(x[0], x[1])).collect(),
        f.momenta.iter().map(|x| Vector2::new(x[0], x[1])).collect(),
    );
    let com = state.q.iter().fold(Vector2::zeros(), |a, x| a + x) / 3.0;
    if com.norm() > 1e-12 {
        return Err(Error::Schema { field: "positions".into(), message: format!("centre of mass at {com:?}") });
    }
    let flat = CurvatureParam::flat(1)?;
    let mu = momentum_nbody(flat, &state)?;
    if mu.norm() > 1e-12 {
        return Err(Error::Schema { field: "momenta".into(), message: format!("total momentum {mu:?} is not zero") });
    }
    let bodies = BodySystem::new(f.masses)?;
    let h = NewtonianSystem::new(flat, bodies.clone());
    let end = flow(&h, &state, f.period, &IntegratorConfig::with_step(f.validation_step))?;
    let closure = (end.to_vector() - state.to_vector()).norm();
    if !(closure < FIGURE_EIGHT_CLOSURE_TOL) {
        return Err(Error::ClosureValidation { closure, tolerance: FIGURE_EIGHT_CLOSURE_TOL });
    }
    Ok(OrbitSeed { bodies, state, period: f.period, closure })
}

/// Reads and validates figure-eight data, refusing it unless one period of
/// integration closes to within [`FIGURE_EIGHT_CLOSURE_TOL`].
pub fn load_figure_eight(path: &Path) -> Result<OrbitSeed> {
    figure_eight_from_str(&read(path)?)
}

/// The shipped figure-eight, validated.
pub fn figure_eight() -> Result<OrbitSeed> {
    figure_eight_from_str(FIGURE_EIGHT_JSON)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Lagrange,
    Euler,
    Ngon,
    TwoBody,
    FigureEight,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonGridSpec {
    #[serde(default)]
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for EpsilonGridSpec {
    fn default() -> Self {
        Self { start: 0.0, stop: 0.2, step: 0.01 }
    }
}

impl EpsilonGridSpec {
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        let mut v: Vec<f64> = (0..=n).map(|k| self.start + k as f64 * self.step).collect();
        if self.stop - v[n] > 1e-9 * self.step {
            v.push(self.stop);
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub step: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_tol() -> f64 {
    IntegratorConfig::default().tol
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        let c = IntegratorConfig::default();
        Self { step: c.step, tol: c.tol }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub directory: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub positions: Vec<[f64; 2]>,
    pub momenta: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    #[serde(default)]
    pub masses: Vec<f64>,
    pub side: Option<f64>,
    pub spacing: Option<f64>,
    pub circumradius: Option<f64>,
    pub n: Option<usize>,
    pub separation: Option<f64>,
    #[serde(default)]
    pub drift: [f64; 2],
    #[serde(default = "default_sigma")]
    pub sigma: i32,
    #[serde(default)]
    pub epsilon_grid: EpsilonGridSpec,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub output: OutputSpec,
    pub state: Option<StateSpec>,
    pub omega: Option<f64>,
    pub period: Option<f64>,
    pub path: Option<String>,
}

fn default_sigma() -> i32 {
    1
}

/// A seed built from a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSeed {
    Rigid(Seed),
    Orbit(OrbitSeed),
}

impl ScenarioSeed {
    pub fn bodies(&self) -> &BodySystem {
        match self {
            ScenarioSeed::Rigid(s) => &s.bodies,
            ScenarioSeed::Orbit(o) => &o.bodies,
        }
    }

    pub fn state(&self) -> &ChartState {
        match self {
            ScenarioSeed::Rigid(s) => &s.state,
            ScenarioSeed::Orbit(o) => &o.state,
        }
    }

    /// Rotation period for rigid seeds, the stored period otherwise.
    pub fn period(&self) -> Option<f64> {
        match self {
            ScenarioSeed::Rigid(s) if s.omega() != 0.0 => Some(s.period()),
            ScenarioSeed::Rigid(_) => None,
            ScenarioSeed::Orbit(o) => Some(o.period),
        }
    }
}

fn require(field: &str, v: Option<f64>) -> Result<f64> {
    let v = v.ok_or_else(|| Error::Schema { field: field.into(), message: "required for this kind".into() })?;
    positive(field, v)?;
    Ok(v)
}

fn masses_of<const N: usize>(masses: &[f64]) -> Result<[f64; N]> {
    masses.try_into().map_err(|_| Error::Schema {
        field: "masses".into(),
        message: format!("expected {N} masses, got {}", masses.len()),
    })
}

impl ScenarioSpec {
    /// Checks the invariants not expressible in the serde schema.
    pub fn validate(&self) -> Result<()> {
        if self.sigma != 1 && self.sigma != -1 {
            return Err(Error::Schema { field: "sigma".into(), message: format!("must be 1 or -1, got {}", self.sigma) });
        }
        for (k, m) in self.masses.iter().enumerate() {
            if !(m.is_finite() && *m > 0.0) {
                return Err(Error::Schema { field: format!("masses[{k}]"), message: format!("must be positive, got {m}") });
            }
        }
        if self.drift.iter().any(|v| !v.is_finite()) {
            return Err(Error::Schema { field: "drift".into(), message: "must be finite".into() });
        }
        let g = &self.epsilon_grid;
        if !(g.start >= 0.0 && g.stop >= g.start && g.step > 0.0) {
            return Err(Error::Schema {
                field: "epsilon_grid".into(),
                message: "need 0 <= start <= stop and step > 0".into(),
            });
        }
        positive("integrator.step", self.integrator.step)?;
        positive("integrator.tol", self.integrator.tol)?;
        match self.kind {
            ScenarioKind::Lagrange => {
                masses_of::<3>(&self.masses)?;
                require("side", self.side)?;
            }
            ScenarioKind::Euler => {
                masses_of::<3>(&self.masses)?;
                require("spacing", self.spacing)?;
            }
            ScenarioKind::Ngon => {
                require("circumradius", self.circumradius)?;
                let n = self.n.unwrap_or(self.masses.len());
                if n < 3 {
                    return Err(Error::Schema { field: "n".into(), message: format!("need n >= 3, got {n}") });
                }
                if !self.masses.is_empty() && self.masses.iter().any(|&m| m != self.masses[0]) {
                    return Err(Error::Schema { field: "masses".into(), message: "n-gon masses must be equal".into() });
                }
            }
            ScenarioKind::TwoBody => {
                masses_of::<2>(&self.masses)?;
                require("separation", self.separation)?;
            }
            ScenarioKind::FigureEight => {}
            ScenarioKind::Custom => {
                let st = self.state.as_ref().ok_or_else(|| Error::Schema {
                    field: "state".into(),
                    message: "required for custom scenarios".into(),
                })?;
                if st.positions.len() != self.masses.len() || st.momenta.len() != self.masses.len() {
                    return Err(Error::Schema {
                        field: "state".into(),
                        message: "positions, momenta and masses must have the same length".into(),
                    });
                }
                if let Some(t) = self.period {
                    positive("period", t)?;
                }
            }
        }
        Ok(())
    }

    pub fn integrator_config(&self) -> IntegratorConfig {
        IntegratorConfig { step: self.integrator.step, tol: self.integrator.tol, ..IntegratorConfig::default() }
    }

    /// Builds the flat seed. Relative paths for figure-eight data resolve against `base_dir`.
    pub fn seed(&self, base_dir: Option<&Path>) -> Result<ScenarioSeed> {
        self.validate()?;
        Ok(match self.kind {
            ScenarioKind::Lagrange => {
                ScenarioSeed::Rigid(make_lagrange(masses_of(&self.masses)?, require("side", self.side)?, self.drift)?)
            }
            ScenarioKind::Euler => {
                ScenarioSeed::Rigid(make_euler(masses_of(&self.masses)?, require("spacing", self.spacing)?)?)
            }
            ScenarioKind::Ngon => {
                let n = self.n.unwrap_or(self.masses.len());
                let m = self.masses.first().copied().unwrap_or(1.0);
                ScenarioSeed::Rigid(make_ngon(n, m, require("circumradius", self.circumradius)?)?)
            }
            ScenarioKind::TwoBody => ScenarioSeed::Rigid(make_two_body(
                masses_of(&self.masses)?,
                require("separation", self.separation)?,
                self.drift,
            )?),
            ScenarioKind::FigureEight => match &self.path {
                Some(p) => {
                    let p = Path::new(p);
                    let full = match base_dir {
                        Some(d) if p.is_relative() => d.join(p),
                        _ => p.to_path_buf(),
                    };
                    ScenarioSeed::Orbit(load_figure_eight(&full)?)
                }
                None => ScenarioSeed::Orbit(figure_eight()?),
            },
            ScenarioKind::Custom => {
                let st = self.state.as_ref().expect("validated");
                let bodies = BodySystem::new(self.masses.clone())?;
                let state = ChartState::new(
                    st.positions.iter().map(|x| Vector2::new(x[0], x[1])).collect(),
                    st.momenta.iter().map(|x| Vector2::new(x[0], x[1])).collect(),
                );
                match self.period {
                    Some(period) if self.omega.is_none() => {
                        ScenarioSeed::Orbit(OrbitSeed { bodies, state, period, closure: f64::NAN })
                    }
                    _ => ScenarioSeed::Rigid(Seed {
                        bodies,
                        state,
                        generator: AlgebraElement::new(0.0, 0.0, self.omega.unwrap_or(0.0)),
                    }),
                }
            }
        })
    }
}

/// Parses and validates a scenario from text.
pub fn parse_scenario(text: &str) -> Result<ScenarioSpec> {
    let spec: ScenarioSpec = serde_json::from_str(text).map_err(parse_error)?;
    spec.validate()?;
    Ok(spec)
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<ScenarioSpec> {
    parse_scenario(&read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuation::re_residual;

    fn flat() -> CurvatureParam {
        CurvatureParam::flat(1).unwrap()
    }

    fn residual(seed: &Seed) -> f64 {
        re_residual(flat(), &seed.bodies, &seed.state, &seed.generator).unwrap().norm()
    }

    #[test]
    fn lagrange_balances() {
        let s = make_lagrange([1.0; 3], 1.0, [0.0, 0.0]).unwrap();
        assert!((s.omega() - 3f64.sqrt()).abs() < 1e-15);
        assert!(residual(&s) < 1e-12);
        let s = make_lagrange([1.0, 2.0, 3.0], 1.0, [0.0, 0.0]).unwrap();
        assert!((s.omega() * s.omega() - 6.0).abs() < 1e-14);
        assert!(residual(&s) < 1e-12);
        let mu = momentum_nbody(flat(), &s.state).unwrap();
        assert!(mu.mu1.abs() < 1e-12 && mu.mu2.abs() < 1e-12);
    }

    #[test]
    fn drifting_lagrange_carries_linear_momentum() {
        let s = make_lagrange([1.0; 3], 1.0, [0.1, 0.0]).unwrap();
        let mu = momentum_nbody(flat(), &s.state).unwrap();
        assert!((mu.mu1 - 0.3).abs() < 1e-14 && mu.mu2.abs() < 1e-14);
    }

    #[test]
    fn euler_equal_masses() {
        let s = make_euler([1.0; 3], 1.0).unwrap();
        assert!((s.omega() * s.omega() - 1.25).abs() < 1e-13);
        assert!((s.state.q[0] - Vector2::new(-1.0, 0.0)).norm() < 1e-14);
        assert!(s.state.q[1].norm() < 1e-14);
        assert!(residual(&s) < 1e-12);
    }

    #[test]
    fn euler_symmetric_masses_centre_the_middle_body() {
        let s = make_euler([1.0, 3.5, 1.0], 0.8).unwrap();
        assert!(s.state.q[1].norm() < 1e-14);
        assert!(residual(&s) < 1e-12);
    }

    #[test]
    fn euler_ratio_solves_the_quintic() {
        for m in [[1.0, 2.0, 3.0], [0.2, 1.0, 5.0], [3.0, 0.1, 1.0]] {
            let l = euler_ratio(m).unwrap();
            let [m1, m2, m3] = m;
            // Classical quintic for λ = (x₃ − x₂)/(x₂ − x₁).
            let q = (m1 + m2) * l.powi(5) + (3.0 * m1 + 2.0 * m2) * l.powi(4) + (3.0 * m1 + m2) * l.powi(3)
                - (m2 + 3.0 * m3) * l.powi(2)
                - (2.0 * m2 + 3.0 * m3) * l
                - (m2 + m3);
            assert!(q.abs() < 1e-11, "{m:?}: {q}");
            assert!(euler_balance(m, l).abs() < 1e-12);
            assert!(residual(&make_euler(m, 1.0).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn ngon_oracles() {
        let w2 = ngon_omega_squared(4, 1.0, 1.0);
        assert!((w2 - 0.25 * (2.0 * 2f64.sqrt() + 1.0)).abs() < 1e-15);
        for n in [3, 4, 6, 9] {
            assert!(residual(&make_ngon(n, 1.0, 1.0).unwrap()) < 1e-12, "n={n}");
        }
        // n = 3 is the equal-mass Lagrange triangle of side r√3.
        let r: f64 = 0.7;
        assert!((ngon_omega_squared(3, 2.0, r) - 3.0 * 2.0 / (r * 3f64.sqrt()).powi(3)).abs() < 1e-13);
    }

    #[test]
    fn ngon_three_matches_lagrange_up_to_rotation() {
        let a = make_ngon(3, 1.0, 1.0 / 3f64.sqrt()).unwrap();
        let b = make_lagrange([1.0; 3], 1.0, [0.0, 0.0]).unwrap();
        let rot = nalgebra::Rotation2::new(PI / 2.0);
        for k in 0..3 {
            assert!((rot * a.state.q[k] - b.state.q[k]).norm() < 1e-12);
            assert!((rot * a.state.p[k] - b.state.p[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn two_body_circular() {
        let s = make_two_body([1.0, 1.0], 1.0, [0.0, 0.0]).unwrap();
        assert!((s.omega() - 2f64.sqrt()).abs() < 1e-15);
        assert!(residual(&s) < 1e-12);
    }

    #[test]
    fn shipped_figure_eight_validates() {
        let f = figure_eight().unwrap();
        assert!(f.closure < 1e-6);
        let mu = momentum_nbody(flat(), &f.state).unwrap();
        assert!(mu.norm() < 1e-12);
    }

    #[test]
    fn corrupted_figure_eight_is_refused() {
        let text = FIGURE_EIGHT_JSON.replace("6.325913916295211", "6.3");
        assert!(matches!(figure_eight_from_str(&text), Err(Error::ClosureValidation { .. })));
    }

    #[test]
    fn scenario_parsing() {
        let s = parse_scenario(r#"{"kind": "lagrange", "masses": [1, 1, 1], "side": 1}"#).unwrap();
        assert_eq!(s.sigma, 1);
        assert!(matches!(s.seed(None).unwrap(), ScenarioSeed::Rigid(_)));
        match parse_scenario(r#"{"kind": "lagrange", "masses": [1, -1, 1], "side": 1}"#) {
            Err(Error::Schema { field, .. }) => assert_eq!(field, "masses[1]"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_scenario(r#"{"kind": "lagrange", "masses": [1, 1, 1], "side": 1, "sigma": 0}"#),
            Err(Error::Schema { .. })
        ));
        match parse_scenario("{\n  \"kind\": \"lagrange\",\n  \"masses\": [1, 1\n}") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_scenario(r#"{"kind": "lagrange", "colour": 1}"#), Err(Error::Parse { .. })));
        assert!(matches!(parse_scenario(r#"{"kind": "ngon", "circumradius": 1}"#), Err(Error::Schema { .. })));
    }

    #[test]
    fn grid_values() {
        let g = EpsilonGridSpec { start: 0.0, stop: 0.2, step: 0.05 }.values();
        assert_eq!(g.len(), 5);
        assert!((g[4] - 0.2).abs() < 1e-15);
    }
}
