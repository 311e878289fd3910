//! Slices at a momentum level, Newton correctors for relative equilibria,
//! periodic and relative periodic orbits, and natural-parameter continuation
//! of all three in `ε`.
//!
//! All Newton Jacobians are central differences. Linear solves go through an
//! SVD: strictly for relative equilibria, where a small singular value is
//! reported as a failure of nondegeneracy, and with a truncated
//! pseudo-inverse for orbits, whose correctors carry the usual energy/period
//! redundancy. Nondegeneracy of orbits is judged afterwards from the reduced
//! multipliers.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{field, flow_vec_uniform, poincare_return, IntegratorConfig, PoincareSection};
use crate::error::{Error, Result};
use crate::geometry::CurvatureParam;
use crate::hamiltonian::{BodySystem, Hamiltonian, HamiltonianFamily, NewtonianSystem};
use crate::state::ChartState;
use crate::symmetry::{
    act_state, exp_group, generator_field, isotropy_algebra, momentum_nbody, AlgebraElement, Isotropy,
    MomentumValue, DEFAULT_RANK_TOL,
};

pub const RE_TOL: f64 = 1e-10;
pub const PO_TOL: f64 = 1e-10;
pub const RPO_TOL: f64 = 1e-8;
/// Smallest admissible singular value of `D𝒥` at a slice base.
pub const REGULARITY_TOL: f64 = 1e-8;
/// Smallest admissible singular value of the isotropy generator fields.
pub const FREENESS_TOL: f64 = 1e-8;
/// Smallest admissible singular value of `dP − I` for periodic orbits.
pub const PO_SINGULAR_TOL: f64 = 1e-6;
/// Minimum distance of a reduced multiplier from 1.
pub const MULTIPLIER_GAP: f64 = 1e-4;
/// Linear momentum allowed in a flat relative equilibrium.
pub const LINEAR_MOMENTUM_TOL: f64 = 1e-10;

/// What to do when an orbit fails its nondegeneracy hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NondegeneracyPolicy {
    /// Return [`Error::DegenerateOrbit`].
    Enforce,
    /// Return the converged orbit; the multipliers show the degeneracy.
    Report,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub integrator: IntegratorConfig,
    pub re_tol: f64,
    pub po_tol: f64,
    pub rpo_tol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
    pub rank_tol: f64,
    pub policy: NondegeneracyPolicy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig::default(),
            re_tol: RE_TOL,
            po_tol: PO_TOL,
            rpo_tol: RPO_TOL,
            max_iter: 30,
            fd_step: 1e-6,
            rank_tol: DEFAULT_RANK_TOL,
            policy: NondegeneracyPolicy::Enforce,
        }
    }
}

// ---------------------------------------------------------------------------
// Linear algebra helpers

/// Orthonormal basis of the orthogonal complement of the orthonormal columns of `r` in `R^m`.
fn orth_complement(r: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    if r.ncols() == 0 {
        return DMatrix::identity(m, m);
    }
    let eig = SymmetricEigen::new(r * r.transpose());
    let cols: Vec<DVector<f64>> = (0..m)
        .filter(|&k| eig.eigenvalues[k] < 0.5)
        .map(|k| eig.eigenvectors.column(k).into_owned())
        .collect();
    if cols.is_empty() {
        return DMatrix::zeros(m, 0);
    }
    DMatrix::from_columns(&cols)
}

/// Part of `span(basis)` orthogonal to `dirs`, with an orthonormal basis.
fn remove_directions(basis: &DMatrix<f64>, dirs: &[DVector<f64>], tol: f64) -> DMatrix<f64> {
    let k = basis.ncols();
    let unit: Vec<DVector<f64>> = dirs.iter().filter(|d| d.norm() > 0.0).map(|d| d.normalize()).collect();
    if unit.is_empty() {
        return basis.clone();
    }
    let c = basis.transpose() * DMatrix::from_columns(&unit);
    let svd = c.svd(true, false);
    let u = svd.u.expect("requested u");
    let keep: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > tol)
        .map(|(j, _)| u.column(j).into_owned())
        .collect();
    let r = if keep.is_empty() { DMatrix::zeros(k, 0) } else { DMatrix::from_columns(&keep) };
    basis * orth_complement(&r, k)
}

/// Central-difference Jacobian, one column per task.
fn fd_jacobian<F>(f: &F, x: &DVector<f64>, fx_len: usize, step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync,
{
    let cols: Vec<Result<DVector<f64>>> = (0..x.len())
        .into_par_iter()
        .map(|k| {
            let d = step * x[k].abs().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += d;
            xm[k] -= d;
            Ok((f(&xp)? - f(&xm)?) / (2.0 * d))
        })
        .collect();
    let mut jac = DMatrix::zeros(fx_len, x.len());
    for (k, c) in cols.into_iter().enumerate() {
        jac.set_column(k, &c?);
    }
    Ok(jac)
}

#[derive(Debug, Clone, Copy)]
enum Inverse {
    /// Fail when `σ_min < rel·σ_max`.
    Strict(f64),
    /// Drop singular values below `rel·σ_max`.
    Truncated(f64),
}

struct NewtonOutput {
    x: DVector<f64>,
    iterations: usize,
}

/// Damped Newton iteration on `f(x) = 0` until `‖f‖ ≤ tol`.
fn newton<F>(f: &F, x0: DVector<f64>, tol: f64, max_iter: usize, fd_step: f64, inverse: Inverse) -> Result<NewtonOutput>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync,
{
    let mut x = x0;
    let mut fx = f(&x)?;
    let mut norm = fx.norm();
    for it in 0..max_iter {
        if norm <= tol {
            return Ok(NewtonOutput { x, iterations: it });
        }
        let jac = fd_jacobian(f, &x, fx.len(), fd_step)?;
        let svd = jac.svd(true, true);
        let largest = svd.singular_values.max();
        let smallest = svd.singular_values.min();
        let cut = match inverse {
            Inverse::Strict(rel) => {
                if !(smallest >= rel * largest) {
                    return Err(Error::SingularJacobian { smallest, largest });
                }
                0.0
            }
            Inverse::Truncated(rel) => rel * largest,
        };
        let dx = svd.solve(&fx, cut).map_err(|_| Error::SingularJacobian { smallest, largest })?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let xt = &x - &dx * lambda;
            if let Ok(ft) = f(&xt) {
                let nt = ft.norm();
                if nt < norm {
                    x = xt;
                    fx = ft;
                    norm = nt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonDivergence { iterations: it + 1, residual: norm });
        }
    }
    if norm <= tol {
        Ok(NewtonOutput { x, iterations: max_iter })
    } else {
        Err(Error::NewtonDivergence { iterations: max_iter, residual: norm })
    }
}

// ---------------------------------------------------------------------------
// Slices

/// `D𝒥_ε` at `s` (3 × 4n) by central differences.
pub fn momentum_jacobian(param: CurvatureParam, s: &ChartState, fd_step: f64) -> Result<DMatrix<f64>> {
    let z = s.to_vector();
    let mut jac = DMatrix::zeros(3, z.len());
    for k in 0..z.len() {
        let d = fd_step * z[k].abs().max(1.0);
        let mut zp = z.clone();
        let mut zm = z.clone();
        zp[k] += d;
        zm[k] -= d;
        let jp = momentum_nbody(param, &ChartState::from_vector(&zp))?.to_vector();
        let jm = momentum_nbody(param, &ChartState::from_vector(&zm))?.to_vector();
        jac.set_column(k, &((jp - jm) / (2.0 * d)));
    }
    Ok(jac)
}

/// Kernel and row space of `D𝒥`, with its singular values.
fn momentum_split(param: CurvatureParam, s: &ChartState, fd_step: f64) -> Result<(DMatrix<f64>, DMatrix<f64>, f64)> {
    let dj = momentum_jacobian(param, s, fd_step)?;
    let svd = dj.svd(false, true);
    let smallest = svd.singular_values.min();
    if !(smallest > REGULARITY_TOL) {
        return Err(Error::Regularity { smallest });
    }
    let range = svd.v_t.expect("requested v_t").transpose();
    let kernel = orth_complement(&range, s.dim());
    Ok((kernel, range, smallest))
}

/// Local coordinates around a base point of a momentum level set.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceFrame {
    pub base: ChartState,
    pub momentum: MomentumValue,
    pub isotropy: Isotropy,
    /// Orthonormal basis of `ker D𝒥(base)`, dimension `4n − 3`.
    pub level_basis: DMatrix<f64>,
    /// Part of the level basis orthogonal to the isotropy generator fields.
    pub slice_basis: DMatrix<f64>,
    /// Orthonormal basis of the row space of `D𝒥(base)`.
    pub normal_basis: DMatrix<f64>,
    /// Isotropy generator fields at the base, one per column.
    pub generators: DMatrix<f64>,
}

impl SliceFrame {
    pub fn slice_dim(&self) -> usize {
        self.slice_basis.ncols()
    }
}

/// Slice at `base` for the momentum level `mu`.
pub fn build_slice(param: CurvatureParam, base: &ChartState, mu: &MomentumValue, rank_tol: f64) -> Result<SliceFrame> {
    build_slice_with(param, base, mu, rank_tol, None)
}

/// As [`build_slice`], optionally rotating the slice basis by a random
/// orthogonal matrix drawn from `completion_seed`.
pub fn build_slice_with(
    param: CurvatureParam,
    base: &ChartState,
    mu: &MomentumValue,
    rank_tol: f64,
    completion_seed: Option<u64>,
) -> Result<SliceFrame> {
    let isotropy = isotropy_algebra(param, mu, rank_tol)?;
    let (level, normal, _) = momentum_split(param, base, 1e-6)?;
    let gens: Vec<DVector<f64>> =
        isotropy.basis.iter().map(|e| generator_field(param, e, base)).collect::<Result<_>>()?;
    let generators = DMatrix::from_columns(&gens);
    let smallest = generators.clone().svd(false, false).singular_values.min();
    if !(smallest > FREENESS_TOL) {
        return Err(Error::LocalFreeness { smallest });
    }
    let mut slice = remove_directions(&level, &gens, 1e-8);
    if let Some(seed) = completion_seed {
        let k = slice.ncols();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(k, k, |_, _| rng.gen_range(-1.0..1.0));
        slice = slice * a.qr().q();
    }
    Ok(SliceFrame {
        base: base.clone(),
        momentum: *mu,
        isotropy,
        level_basis: level,
        slice_basis: slice,
        normal_basis: normal,
        generators,
    })
}

// ---------------------------------------------------------------------------
// Relative equilibria

/// `X_H(state) − ξ_M(state)`.
pub fn re_residual(
    param: CurvatureParam,
    sys: &BodySystem,
    state: &ChartState,
    xi: &AlgebraElement,
) -> Result<DVector<f64>> {
    let h = NewtonianSystem::new(param, sys.clone());
    Ok(h.vector_field(state)? - generator_field(param, xi, state)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct REPoint {
    pub state: ChartState,
    pub generator: AlgebraElement,
    pub momentum: MomentumValue,
    pub residual: f64,
    pub iterations: usize,
}

fn check_flat_linear_momentum(param: CurvatureParam, mu: &MomentumValue) -> Result<()> {
    if param.is_flat() && (mu.mu1.abs() > LINEAR_MOMENTUM_TOL || mu.mu2.abs() > LINEAR_MOMENTUM_TOL) {
        return Err(Error::NonvanishingLinearMomentum { mu1: mu.mu1, mu2: mu.mu2 });
    }
    Ok(())
}

/// Relative equilibrium near `guess` at momentum `mu_target`, with generator
/// in the isotropy algebra of `mu_target`.
pub fn solve_re(
    param: CurvatureParam,
    sys: &BodySystem,
    guess: &ChartState,
    guess_xi: &AlgebraElement,
    mu_target: &MomentumValue,
    cfg: &SolverConfig,
) -> Result<REPoint> {
    check_flat_linear_momentum(param, mu_target)?;
    let frame = build_slice(param, guess, mu_target, cfg.rank_tol)?;
    solve_re_in(param, sys, &frame, guess_xi, cfg)
}

/// [`solve_re`] on a prebuilt slice.
pub fn solve_re_in(
    param: CurvatureParam,
    sys: &BodySystem,
    frame: &SliceFrame,
    guess_xi: &AlgebraElement,
    cfg: &SolverConfig,
) -> Result<REPoint> {
    check_flat_linear_momentum(param, &frame.momentum)?;
    let h = NewtonianSystem::new(param, sys.clone());
    let ks = frame.slice_dim();
    let r = frame.isotropy.dim();
    let base = frame.base.to_vector();
    let basis: Vec<nalgebra::Vector3<f64>> = frame.isotropy.basis.iter().map(|e| e.to_vector()).collect();
    let unpack = |x: &DVector<f64>| -> (ChartState, AlgebraElement) {
        let z = &base + &frame.slice_basis * x.rows(0, ks) + &frame.normal_basis * x.rows(ks, 3);
        let mut xi = nalgebra::Vector3::zeros();
        for (k, e) in basis.iter().enumerate() {
            xi += e * x[ks + 3 + k];
        }
        (ChartState::from_vector(&z), AlgebraElement::from_vector(&xi))
    };
    let f = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let (s, xi) = unpack(x);
        let res = h.vector_field(&s)? - generator_field(param, &xi, &s)?;
        let dj = momentum_nbody(param, &s)?.to_vector() - frame.momentum.to_vector();
        let mut out = DVector::zeros(ks + r + 3);
        out.rows_mut(0, ks + r).copy_from(&(frame.level_basis.transpose() * res));
        out.rows_mut(ks + r, 3).copy_from(&dj);
        Ok(out)
    };
    let mut x0 = DVector::zeros(ks + 3 + r);
    let g = guess_xi.to_vector();
    for (k, e) in basis.iter().enumerate() {
        x0[ks + 3 + k] = e.dot(&g);
    }
    let out = newton(&f, x0, 0.3 * cfg.re_tol, cfg.max_iter, cfg.fd_step, Inverse::Strict(1e-10))?;
    let (state, generator) = unpack(&out.x);
    let residual = re_residual(param, sys, &state, &generator)?.norm();
    if residual > cfg.re_tol {
        return Err(Error::NewtonDivergence { iterations: out.iterations, residual });
    }
    let momentum = momentum_nbody(param, &state)?;
    check_flat_linear_momentum(param, &momentum)?;
    Ok(REPoint { state, generator, momentum, residual, iterations: out.iterations })
}

// ---------------------------------------------------------------------------
// Periodic orbits

/// Orthonormal coordinates on the reduced energy-momentum section at `s`:
/// `ker D𝒥 ∩ ∇H^⊥` minus the symmetry and `extra` directions.
fn reduced_section_basis(
    h: &NewtonianSystem,
    s: &ChartState,
    symmetries: &[AlgebraElement],
    extra: &[DVector<f64>],
) -> Result<DMatrix<f64>> {
    let param = h.param;
    let (kernel, _, _) = momentum_split(param, s, 1e-6)?;
    let mut dirs: Vec<DVector<f64>> =
        symmetries.iter().map(|e| generator_field(param, e, s)).collect::<Result<_>>()?;
    dirs.push(h.gradient(s)?.to_vector());
    dirs.extend(extra.iter().cloned());
    Ok(remove_directions(&kernel, &dirs, 1e-8))
}

/// The section `{H = E} ∩ {⟨n, z − base⟩ = 0}`.
struct SectionConstraints<'a> {
    h: &'a NewtonianSystem,
    section: &'a PoincareSection,
    dirs: DMatrix<f64>,
}

impl<'a> SectionConstraints<'a> {
    fn new(h: &'a NewtonianSystem, at: &ChartState, section: &'a PoincareSection) -> Result<Self> {
        let dirs = DMatrix::from_columns(&[h.gradient(at)?.to_vector(), section.normal.clone()]);
        Ok(Self { h, section, dirs })
    }

    fn values(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let e = self.h.energy(&ChartState::from_vector(z))? - self.section.energy;
        Ok(DVector::from_vec(vec![e, self.section.offset(z)]))
    }

    fn gradients(&self, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        let g = self.h.gradient(&ChartState::from_vector(z))?.to_vector();
        Ok(DMatrix::from_rows(&[g.transpose(), self.section.normal.transpose()]))
    }

    /// Projection onto the section along the constraint gradients at the
    /// frame base, by Newton's method in the two coefficients.
    fn retract(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let mut y = z.clone();
        let mut c = self.values(&y)?;
        let scale = self.section.energy.abs().max(1.0);
        for _ in 0..40 {
            if c.amax() <= 1e-14 * scale {
                return Ok(y);
            }
            let jac = self.gradients(&y)? * &self.dirs;
            let step = jac.lu().solve(&c).ok_or(Error::Regularity { smallest: 0.0 })?;
            let next = &y - &self.dirs * step;
            let cn = self.values(&next)?;
            if cn.amax() >= c.amax() {
                break;
            }
            y = next;
            c = cn;
        }
        if c.amax() <= 1e-12 * scale {
            Ok(y)
        } else {
            Err(Error::NewtonDivergence { iterations: 40, residual: c.amax() })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct POPoint {
    pub state: ChartState,
    pub period: f64,
    pub energy: f64,
    pub momentum: MomentumValue,
    /// Multipliers of the reduced return map.
    pub floquet: Vec<Complex<f64>>,
    /// Smallest singular value of the reduced `dP − I`.
    pub min_singular: f64,
    /// `‖φ_T(z) − z‖`.
    pub closure: f64,
    pub iterations: usize,
}

/// Distance of the nearest multiplier to 1.
pub fn multiplier_gap(floquet: &[Complex<f64>]) -> f64 {
    floquet.iter().map(|m| (m - Complex::new(1.0, 0.0)).norm()).fold(f64::INFINITY, f64::min)
}

fn all_generators() -> [AlgebraElement; 3] {
    [AlgebraElement::b1(), AlgebraElement::b2(), AlgebraElement::b3()]
}

/// Periodic orbit through the section near `guess`, on the energy level of
/// the section.
///
/// The unknowns are coordinates `u` on the section hyperplane inside the
/// energy level; a state is recovered from `u` by projecting `base + B·u`
/// onto the section, and Newton's method is applied to `Bᵀ(P(z) − z)`.
/// The momentum is left free: it is whatever the continued orbit carries.
/// The symmetry directions make `dP − I` singular on the full section, so
/// Newton steps use a truncated pseudo-inverse; nondegeneracy is judged on
/// the reduced return map, with the momentum level, the group orbit and the
/// flow direction factored out.
pub fn solve_po(
    param: CurvatureParam,
    sys: &BodySystem,
    section: &PoincareSection,
    guess: &ChartState,
    period_hint: f64,
    cfg: &SolverConfig,
) -> Result<POPoint> {
    let h = NewtonianSystem::new(param, sys.clone());
    let grad = h.gradient(guess)?.to_vector();
    if !(grad.norm() > 1e-8) {
        return Err(Error::Regularity { smallest: grad.norm() });
    }
    let cons = SectionConstraints::new(&h, guess, section)?;
    let base = cons.retract(&guess.to_vector())?;
    let b = orth_complement(&cons.dirs.clone().qr().q(), base.len());
    let k = b.ncols();

    let state_of = |u: &DVector<f64>| cons.retract(&(&base + &b * u));
    let ret = |u: &DVector<f64>| -> Result<(DVector<f64>, DVector<f64>, f64)> {
        let z = state_of(u)?;
        let (out, t) = poincare_return(&h, section, &ChartState::from_vector(&z), period_hint, &cfg.integrator)?;
        Ok((z, out.to_vector(), t))
    };
    let gap = |u: &DVector<f64>| -> Result<DVector<f64>> {
        let (z, out, _) = ret(u)?;
        Ok(b.transpose() * (out - z))
    };
    let sol = newton(&gap, DVector::zeros(k), 0.3 * cfg.po_tol, cfg.max_iter, cfg.fd_step, Inverse::Truncated(1e-9))?;
    let (z, out, period) = ret(&sol.x)?;
    let closure = (&out - &z).norm();
    if closure > cfg.po_tol {
        return Err(Error::NewtonDivergence { iterations: sol.iterations, residual: closure });
    }
    let state = ChartState::from_vector(&z);
    let steps = (period / cfg.integrator.step).ceil().max(1.0) as usize;
    let map = |y: &DVector<f64>| flow_vec_uniform(&h, y, period, steps, &cfg.integrator);
    let monodromy = fd_jacobian(&map, &z, z.len(), cfg.fd_step)?;
    let r = reduced_section_basis(&h, &state, &all_generators(), &[field(&h, &z)?])?;
    let reduced = r.transpose() * monodromy * &r;
    let n = reduced.nrows();
    let min_singular = if n == 0 {
        f64::INFINITY
    } else {
        (&reduced - DMatrix::identity(n, n)).svd(false, false).singular_values.min()
    };
    let point = POPoint {
        energy: h.energy(&state)?,
        momentum: momentum_nbody(param, &state)?,
        floquet: crate::dynamics::floquet_multipliers(&reduced),
        state,
        period,
        min_singular,
        closure,
        iterations: sol.iterations,
    };
    if min_singular < PO_SINGULAR_TOL && cfg.policy == NondegeneracyPolicy::Enforce {
        return Err(Error::DegenerateOrbit {
            detail: format!("smallest singular value of the reduced dP - I is {min_singular:e}"),
            distance: multiplier_gap(&point.floquet),
        });
    }
    Ok(point)
}

/// [`solve_po`] with the section through `guess` normal to the flow.
pub fn solve_po_through(
    param: CurvatureParam,
    sys: &BodySystem,
    guess: &ChartState,
    period_hint: f64,
    cfg: &SolverConfig,
) -> Result<POPoint> {
    let h = NewtonianSystem::new(param, sys.clone());
    let section = PoincareSection::transverse(&h, guess)?;
    solve_po(param, sys, &section, guess, period_hint, cfg)
}

// ---------------------------------------------------------------------------
// Relative periodic orbits

#[derive(Debug, Clone, PartialEq)]
pub struct RPOPoint {
    pub state: ChartState,
    pub period: f64,
    /// `η` with `z(T) = exp(η)·z(0)`.
    pub drift: AlgebraElement,
    pub momentum: MomentumValue,
    /// Multipliers of the drift-corrected monodromy on the reduced section.
    pub floquet: Vec<Complex<f64>>,
    /// `‖exp(−η)·φ_T(z) − z‖`.
    pub residual: f64,
    /// Distance of `η` from the isotropy algebra.
    pub drift_distance: f64,
    /// Integrator steps per period.
    pub steps: usize,
    pub iterations: usize,
}

fn drifted_return(
    h: &NewtonianSystem,
    z: &DVector<f64>,
    period: f64,
    drift: &AlgebraElement,
    steps: usize,
    cfg: &IntegratorConfig,
) -> Result<DVector<f64>> {
    let end = flow_vec_uniform(h, z, period, steps, cfg)?;
    let back = exp_group(h.param, drift, -1.0);
    Ok(act_state(h.param, &back, &ChartState::from_vector(&end))?.to_vector())
}

/// Relative periodic orbit near `guess` with drift in the isotropy algebra of `mu_target`.
pub fn solve_rpo(
    param: CurvatureParam,
    sys: &BodySystem,
    guess: &ChartState,
    guess_period: f64,
    guess_drift: &AlgebraElement,
    mu_target: &MomentumValue,
    cfg: &SolverConfig,
) -> Result<RPOPoint> {
    let steps = (guess_period / cfg.integrator.step).ceil().max(1.0) as usize;
    solve_rpo_steps(param, sys, guess, guess_period, guess_drift, mu_target, steps, cfg)
}

#[allow(clippy::too_many_arguments)]
fn solve_rpo_steps(
    param: CurvatureParam,
    sys: &BodySystem,
    guess: &ChartState,
    guess_period: f64,
    guess_drift: &AlgebraElement,
    mu_target: &MomentumValue,
    steps: usize,
    cfg: &SolverConfig,
) -> Result<RPOPoint> {
    let h = NewtonianSystem::new(param, sys.clone());
    let frame = build_slice(param, guess, mu_target, cfg.rank_tol)?;
    let ks = frame.slice_dim();
    let r = frame.isotropy.dim();
    let base = guess.to_vector();
    let phase = field(&h, &base)?.normalize();
    let basis: Vec<nalgebra::Vector3<f64>> = frame.isotropy.basis.iter().map(|e| e.to_vector()).collect();
    let unpack = |x: &DVector<f64>| -> (DVector<f64>, f64, AlgebraElement) {
        let z = &base + &frame.slice_basis * x.rows(0, ks) + &frame.normal_basis * x.rows(ks, 3);
        let mut eta = nalgebra::Vector3::zeros();
        for (k, e) in basis.iter().enumerate() {
            eta += e * x[ks + 4 + k];
        }
        (z, x[ks + 3], AlgebraElement::from_vector(&eta))
    };
    let f = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let (z, period, eta) = unpack(x);
        let gap = drifted_return(&h, &z, period, &eta, steps, &cfg.integrator)? - &z;
        let dj = momentum_nbody(param, &ChartState::from_vector(&z))?.to_vector() - mu_target.to_vector();
        let mut out = DVector::zeros(ks + r + 4);
        out.rows_mut(0, ks + r).copy_from(&(frame.level_basis.transpose() * gap));
        out.rows_mut(ks + r, 3).copy_from(&dj);
        out[ks + r + 3] = phase.dot(&(&z - &base));
        Ok(out)
    };
    let mut x0 = DVector::zeros(ks + 4 + r);
    x0[ks + 3] = guess_period;
    let g = guess_drift.to_vector();
    for (k, e) in basis.iter().enumerate() {
        x0[ks + 4 + k] = e.dot(&g);
    }
    let sol = newton(&f, x0, 0.3 * cfg.rpo_tol, cfg.max_iter, cfg.fd_step, Inverse::Truncated(1e-9))?;
    let (z, period, drift) = unpack(&sol.x);
    let residual = (drifted_return(&h, &z, period, &drift, steps, &cfg.integrator)? - &z).norm();
    if residual > cfg.rpo_tol {
        return Err(Error::NewtonDivergence { iterations: sol.iterations, residual });
    }
    let state = ChartState::from_vector(&z);
    let momentum = momentum_nbody(param, &state)?;
    let drift_distance = isotropy_algebra(param, &momentum, cfg.rank_tol)
        .map(|iso| iso.distance(&drift))
        .unwrap_or(f64::INFINITY);
    if drift_distance > 1e-8 * drift.norm().max(1.0) {
        return Err(Error::DriftOutsideIsotropy { distance: drift_distance });
    }
    let floquet = reduced_rpo_multipliers(&h, &state, period, &drift, steps, &frame.isotropy.basis, cfg)?;
    let point = RPOPoint {
        state,
        period,
        drift,
        momentum,
        floquet,
        residual,
        drift_distance,
        steps,
        iterations: sol.iterations,
    };
    check_rpo_nondegenerate(&point, cfg)?;
    Ok(point)
}

fn check_rpo_nondegenerate(point: &RPOPoint, cfg: &SolverConfig) -> Result<()> {
    let gap = multiplier_gap(&point.floquet);
    if gap <= MULTIPLIER_GAP && cfg.policy == NondegeneracyPolicy::Enforce {
        return Err(Error::DegenerateOrbit {
            detail: format!("reduced multiplier within {gap:e} of 1"),
            distance: gap,
        });
    }
    Ok(())
}

/// Multipliers of `exp(−η)∘φ_T` on the reduced energy-momentum section.
fn reduced_rpo_multipliers(
    h: &NewtonianSystem,
    state: &ChartState,
    period: f64,
    drift: &AlgebraElement,
    steps: usize,
    symmetries: &[AlgebraElement],
    cfg: &SolverConfig,
) -> Result<Vec<Complex<f64>>> {
    let z = state.to_vector();
    let map = |y: &DVector<f64>| drifted_return(h, y, period, drift, steps, &cfg.integrator);
    let m = fd_jacobian(&map, &z, z.len(), cfg.fd_step)?;
    let b = reduced_section_basis(h, state, symmetries, &[field(h, &z)?])?;
    Ok(crate::dynamics::floquet_multipliers(&(b.transpose() * m * &b)))
}

// ---------------------------------------------------------------------------
// Continuation

/// `0, step, 2·step, …` up to and including `max` (within rounding).
pub fn epsilon_grid(max: f64, step: f64) -> Vec<f64> {
    let n = (max / step + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|k| k as f64 * step).collect();
    if max - grid[n] > 1e-9 * step {
        grid.push(max);
    }
    grid
}

#[derive(Debug, Clone, PartialEq)]
pub enum BranchPoint {
    Re(REPoint),
    Po(POPoint),
    Rpo(RPOPoint),
}

impl BranchPoint {
    pub fn state(&self) -> &ChartState {
        match self {
            BranchPoint::Re(p) => &p.state,
            BranchPoint::Po(p) => &p.state,
            BranchPoint::Rpo(p) => &p.state,
        }
    }

    pub fn residual(&self) -> f64 {
        match self {
            BranchPoint::Re(p) => p.residual,
            BranchPoint::Po(p) => p.closure,
            BranchPoint::Rpo(p) => p.residual,
        }
    }

    pub fn momentum(&self) -> MomentumValue {
        match self {
            BranchPoint::Re(p) => p.momentum,
            BranchPoint::Po(p) => p.momentum,
            BranchPoint::Rpo(p) => p.momentum,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchRecord {
    pub epsilon: f64,
    pub sigma: i32,
    pub point: BranchPoint,
    pub newton_iterations: usize,
    pub step_accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchFailure {
    pub epsilon: f64,
    pub error: Error,
}

/// Accepted records in increasing `ε`, and the step that stopped the branch, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub records: Vec<BranchRecord>,
    pub failure: Option<BranchFailure>,
}

impl Branch {
    pub fn last_epsilon(&self) -> Option<f64> {
        self.records.last().map(|r| r.epsilon)
    }

    pub fn max_residual(&self) -> f64 {
        self.records.iter().map(|r| r.point.residual()).fold(0.0, f64::max)
    }

    fn fail(mut self, epsilon: f64, error: Error) -> Self {
        self.failure = Some(BranchFailure { epsilon, error });
        self
    }
}

fn record(epsilon: f64, sigma: i32, point: BranchPoint, newton_iterations: usize) -> BranchRecord {
    BranchRecord { epsilon, sigma, point, newton_iterations, step_accepted: true }
}

/// Continues a flat relative equilibrium along `grid` (which starts at 0).
///
/// At each `ε` the target momentum is the momentum of the previous solution
/// read in the new geometry, and the previous `(state, ξ)` is the predictor.
pub fn continue_re(grid: &[f64], sigma: i32, sys: &BodySystem, seed: &REPoint, cfg: &SolverConfig) -> Branch {
    let mut branch = Branch { records: Vec::new(), failure: None };
    let eps0 = grid.first().copied().unwrap_or(0.0);
    if let Err(e) = CurvatureParam::flat(sigma).and_then(|p| check_flat_linear_momentum(p, &seed.momentum)) {
        return branch.fail(eps0, e);
    }
    let mut prev = seed.clone();
    for &eps in grid {
        if eps == 0.0 {
            branch.records.push(record(eps, sigma, BranchPoint::Re(prev.clone()), 0));
            continue;
        }
        let step = (|| {
            let param = CurvatureParam::new(sigma, eps)?;
            let mu = momentum_nbody(param, &prev.state)?;
            solve_re(param, sys, &prev.state, &prev.generator, &mu, cfg)
        })();
        match step {
            Ok(p) => {
                let it = p.iterations;
                branch.records.push(record(eps, sigma, BranchPoint::Re(p.clone()), it));
                prev = p;
            }
            Err(e) => return branch.fail(eps, e),
        }
    }
    branch
}

/// Continues a flat relative periodic orbit along `grid`, predicting
/// `(state, T, η)` from the previous step.
pub fn continue_rpo(grid: &[f64], sigma: i32, sys: &BodySystem, seed: &RPOPoint, cfg: &SolverConfig) -> Branch {
    let mut branch = Branch { records: Vec::new(), failure: None };
    let eps0 = grid.first().copied().unwrap_or(0.0);
    if let Err(e) = check_rpo_nondegenerate(seed, cfg) {
        return branch.fail(eps0, e);
    }
    let mut prev = seed.clone();
    for &eps in grid {
        if eps == 0.0 {
            branch.records.push(record(eps, sigma, BranchPoint::Rpo(prev.clone()), 0));
            continue;
        }
        let step = (|| {
            let param = CurvatureParam::new(sigma, eps)?;
            let mu = momentum_nbody(param, &prev.state)?;
            solve_rpo_steps(param, sys, &prev.state, prev.period, &prev.drift, &mu, prev.steps, cfg)
        })();
        match step {
            Ok(p) => {
                let it = p.iterations;
                branch.records.push(record(eps, sigma, BranchPoint::Rpo(p.clone()), it));
                prev = p;
            }
            Err(e) => return branch.fail(eps, e),
        }
    }
    branch
}

/// Continues a flat periodic orbit along `grid` with [`solve_po`] at each
/// `ε`, with the section through the previous orbit point normal to the flow.
pub fn continue_po(grid: &[f64], sigma: i32, sys: &BodySystem, seed: &POPoint, cfg: &SolverConfig) -> Branch {
    let mut branch = Branch { records: Vec::new(), failure: None };
    let mut prev = seed.clone();
    for &eps in grid {
        if eps == 0.0 {
            branch.records.push(record(eps, sigma, BranchPoint::Po(prev.clone()), 0));
            continue;
        }
        let step = (|| {
            let param = CurvatureParam::new(sigma, eps)?;
            let h = sys.at(param);
            let section = PoincareSection::transverse(&h, &prev.state)?;
            solve_po(param, sys, &section, &prev.state, prev.period, cfg)
        })();
        match step {
            Ok(p) => {
                let it = p.iterations;
                branch.records.push(record(eps, sigma, BranchPoint::Po(p.clone()), it));
                prev = p;
            }
            Err(e) => return branch.fail(eps, e),
        }
    }
    branch
}
