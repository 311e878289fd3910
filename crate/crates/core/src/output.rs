//! Branch and trajectory files.
//!
//! Every floating-point number is written with 17 significant digits
//! (`{:.16e}`), which round-trips any `f64` exactly.

use std::io;
use std::path::Path;

use nalgebra::Complex;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::continuation::{Branch, BranchPoint};
use crate::error::{Error, Result};
use crate::geometry::{geodesic_distance, CurvatureParam};
use crate::hamiltonian::{BodySystem, Hamiltonian, NewtonianSystem};
use crate::state::ChartState;
use crate::symmetry::{momentum_nbody, AlgebraElement, MomentumValue};

/// A double with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Pretty JSON writer that prints floats with [`fmt17`] and non-finite floats as `null`.
struct Json17 {
    inner: PrettyFormatter<'static>,
}

impl Formatter for Json17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            w.write_all(fmt17(value).as_bytes())
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// Pretty-printed JSON with 17-digit floats.
pub fn to_json17<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Json17 { inner: PrettyFormatter::new() });
    value.serialize(&mut ser).map_err(|e| Error::Io(e.to_string()))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        }
    }
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Smallest geodesic distance between two bodies.
pub fn min_pair_distance(param: CurvatureParam, s: &ChartState) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..s.n() {
        for j in i + 1..s.n() {
            let d = geodesic_distance(param, &s.q[i], &s.q[j]).unwrap_or(0.0);
            best = best.min(d);
        }
    }
    best
}

#[derive(Debug, Clone, Serialize)]
pub struct PhasePoint {
    pub positions: Vec<[f64; 2]>,
    pub momenta: Vec<[f64; 2]>,
}

impl From<&ChartState> for PhasePoint {
    fn from(s: &ChartState) -> Self {
        Self {
            positions: s.q.iter().map(|v| [v[0], v[1]]).collect(),
            momenta: s.p.iter().map(|v| [v[0], v[1]]).collect(),
        }
    }
}

/// One accepted continuation step, as written to the structured branch file.
#[derive(Debug, Clone, Serialize)]
pub struct BranchEntry {
    pub epsilon: f64,
    pub sigma: i32,
    pub kind: &'static str,
    pub residual: f64,
    /// `ω` for relative equilibria, the period for orbits.
    pub omega_or_period: f64,
    /// Generator of a relative equilibrium or drift of a relative periodic orbit.
    pub algebra: Option<AlgebraElement>,
    pub momentum: MomentumValue,
    pub energy: f64,
    pub min_pair_distance: f64,
    /// Multipliers as `[re, im]`.
    pub floquet: Vec<[f64; 2]>,
    pub newton_iterations: usize,
    pub state: PhasePoint,
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchFile {
    pub masses: Vec<f64>,
    pub entries: Vec<BranchEntry>,
    pub failure: Option<FailureEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FailureEntry {
    pub epsilon: f64,
    pub error: String,
}

fn floquet_pairs(f: &[Complex<f64>]) -> Vec<[f64; 2]> {
    f.iter().map(|m| [m.re, m.im]).collect()
}

pub fn branch_entries(branch: &Branch, sys: &BodySystem) -> Vec<BranchEntry> {
    branch
        .records
        .iter()
        .map(|r| {
            let param = CurvatureParam::new(r.sigma, r.epsilon).expect("branch parameters are valid");
            let state = r.point.state();
            let energy = NewtonianSystem::new(param, sys.clone()).energy(state).unwrap_or(f64::NAN);
            let (kind, omega_or_period, algebra, floquet) = match &r.point {
                BranchPoint::Re(p) => ("re", p.generator.omega, Some(p.generator), Vec::new()),
                BranchPoint::Po(p) => ("po", p.period, None, floquet_pairs(&p.floquet)),
                BranchPoint::Rpo(p) => ("rpo", p.period, Some(p.drift), floquet_pairs(&p.floquet)),
            };
            BranchEntry {
                epsilon: r.epsilon,
                sigma: r.sigma,
                kind,
                residual: r.point.residual(),
                omega_or_period,
                algebra,
                momentum: r.point.momentum(),
                energy,
                min_pair_distance: min_pair_distance(param, state),
                floquet,
                newton_iterations: r.newton_iterations,
                state: state.into(),
            }
        })
        .collect()
}

pub fn branch_file(branch: &Branch, sys: &BodySystem) -> BranchFile {
    BranchFile {
        masses: sys.masses().to_vec(),
        entries: branch_entries(branch, sys),
        failure: branch.failure.as_ref().map(|f| FailureEntry { epsilon: f.epsilon, error: f.error.to_string() }),
    }
}

/// Branch table: `epsilon, sigma, residual, omega_or_period, a, b, omega,
/// mu1, mu2, L, H, min_pair_distance, floquet_modulus_0, …`.
///
/// `a, b, omega` are the generator of a relative equilibrium or the drift of
/// a relative periodic orbit, and zero for periodic orbits. Multiplier
/// columns are padded with empty cells to the longest list in the branch.
pub fn branch_csv(entries: &[BranchEntry]) -> String {
    let nf = entries.iter().map(|e| e.floquet.len()).max().unwrap_or(0);
    let mut out = String::from("epsilon,sigma,residual,omega_or_period,a,b,omega,mu1,mu2,L,H,min_pair_distance");
    for k in 0..nf {
        out.push_str(&format!(",floquet_modulus_{k}"));
    }
    out.push('\n');
    for e in entries {
        let g = e.algebra.unwrap_or(AlgebraElement::new(0.0, 0.0, 0.0));
        let mut cells = vec![fmt17(e.epsilon), e.sigma.to_string()];
        for x in [
            e.residual,
            e.omega_or_period,
            g.a,
            g.b,
            g.omega,
            e.momentum.mu1,
            e.momentum.mu2,
            e.momentum.l,
            e.energy,
            e.min_pair_distance,
        ] {
            cells.push(fmt17(x));
        }
        for k in 0..nf {
            cells.push(e.floquet.get(k).map(|m| fmt17(m[0].hypot(m[1]))).unwrap_or_default());
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Conservation summary of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservationSummary {
    pub max_energy_drift: f64,
    pub max_momentum_drift: f64,
    /// `‖z(t_final) − z(0)‖`.
    pub closure: f64,
    pub min_pair_distance: f64,
}

/// Trajectory table `t, H, dH, mu1, mu2, L, dmu, min_pair_distance,
/// u_0, v_0, …, pu_0, pv_0, …` and its conservation summary.
pub fn trajectory_csv(
    param: CurvatureParam,
    sys: &BodySystem,
    samples: &[(f64, ChartState)],
) -> Result<(String, ConservationSummary)> {
    let h = NewtonianSystem::new(param, sys.clone());
    let n = sys.n();
    let mut out = String::from("t,H,dH,mu1,mu2,L,dmu,min_pair_distance");
    for k in 0..n {
        out.push_str(&format!(",u_{k},v_{k}"));
    }
    for k in 0..n {
        out.push_str(&format!(",pu_{k},pv_{k}"));
    }
    out.push('\n');
    let (_, first) = samples.first().ok_or_else(|| Error::Schema {
        field: "t_final".into(),
        message: "empty trajectory".into(),
    })?;
    let e0 = h.energy(first)?;
    let mu0 = momentum_nbody(param, first)?.to_vector();
    let mut summary = ConservationSummary {
        max_energy_drift: 0.0,
        max_momentum_drift: 0.0,
        closure: 0.0,
        min_pair_distance: f64::INFINITY,
    };
    for (t, s) in samples {
        let e = h.energy(s)?;
        let mu = momentum_nbody(param, s)?;
        let dmu = (mu.to_vector() - mu0).norm();
        let dist = min_pair_distance(param, s);
        summary.max_energy_drift = summary.max_energy_drift.max((e - e0).abs());
        summary.max_momentum_drift = summary.max_momentum_drift.max(dmu);
        summary.min_pair_distance = summary.min_pair_distance.min(dist);
        let mut cells: Vec<String> =
            [*t, e, e - e0, mu.mu1, mu.mu2, mu.l, dmu, dist].iter().map(|x| fmt17(*x)).collect();
        for q in &s.q {
            cells.push(fmt17(q[0]));
            cells.push(fmt17(q[1]));
        }
        for p in &s.p {
            cells.push(fmt17(p[0]));
            cells.push(fmt17(p[1]));
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    if let Some((_, last)) = samples.last() {
        summary.closure = (last.to_vector() - first.to_vector()).norm();
    }
    Ok((out, summary))
}
