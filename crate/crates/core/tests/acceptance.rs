//! Acceptance criteria, one line per criterion. Exits nonzero if any fails.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use curved_nbody::continuation::{
    continue_po, continue_re, continue_rpo, epsilon_grid, multiplier_gap, solve_po_through, solve_re, solve_rpo,
    Branch, BranchPoint, NondegeneracyPolicy, REPoint, RPOPoint, SolverConfig,
};
use curved_nbody::dynamics::{symplectic_pullback_check, IntegratorConfig};
use curved_nbody::scenarios::{figure_eight, make_euler, make_lagrange, make_ngon, make_two_body, Seed};
use curved_nbody::symmetry::{bracket, commutator_holonomy, momentum_nbody};
use curved_nbody::verify::{
    contraction_slope, expansion_slope, jacobi_residual, log_log_slope, momentum_contraction_gap, random_point,
    random_states, two_body_conservation,
};
use curved_nbody::{AlgebraElement, BodySystem, ChartState, CurvatureParam, Error};

const SEED: u64 = 20240601;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn param(sigma: i32, eps: f64) -> CurvatureParam {
    CurvatureParam::new(sigma, eps).unwrap()
}

fn flat() -> CurvatureParam {
    CurvatureParam::flat(1).unwrap()
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&v)
}

fn c1_expansion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let sys = BodySystem::equal(3, 1.0).unwrap();
    let states = random_states(&mut rng, 3, 20);
    let mut ok = true;
    let mut parts = Vec::new();
    for sigma in [1, -1] {
        let k = expansion_slope(sigma, &sys, &states).unwrap_or(f64::NAN);
        ok &= within(k, 3.7, 4.3);
        parts.push(format!("slope(sigma={sigma:+})={k:.3}"));
    }
    outcome(ok, parts.join(", "))
}

fn c2_contraction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let states = random_states(&mut rng, 3, 20);
    let mut ok = true;
    let mut parts = Vec::new();
    for sigma in [1, -1] {
        let k = contraction_slope(sigma, &states).unwrap_or(f64::NAN);
        ok &= within(k, 1.8, 2.2);
        parts.push(format!("slope(sigma={sigma:+})={k:.3}"));
    }
    let flat_gap = states.iter().map(|s| momentum_contraction_gap(flat(), s).unwrap()).fold(0.0, f64::max);
    ok &= flat_gap == 0.0;
    parts.push(format!("flat gap={flat_gap:e}"));
    outcome(ok, parts.join(", "))
}

fn c3_brackets() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let mut jacobi: f64 = 0.0;
    let mut b12: f64 = 0.0;
    for eps in [0.0, 0.3, 1.0] {
        for sigma in [1, -1] {
            let p = CurvatureParam::new(sigma, eps).unwrap();
            jacobi = jacobi.max(jacobi_residual(p, &mut rng, 1000));
            let c = bracket(p, &AlgebraElement::b1(), &AlgebraElement::b2());
            b12 = b12.max((c.omega - sigma as f64 * eps * eps).abs());
        }
    }
    outcome(jacobi <= 1e-14 && b12 <= 1e-15, format!("jacobi={jacobi:.2e}, [b1,b2] error={b12:.2e}"))
}

fn c4_holonomy() -> Outcome {
    let eps: Vec<f64> = (0..9).map(|k| 1e-3 * 10f64.powf(k as f64 / 4.0)).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for (a, b) in [(1.0, 1.0), (1.0, 2.0)] {
        for sigma in [1, -1] {
            let r: Vec<f64> = eps
                .iter()
                .map(|&e| (commutator_holonomy(param(sigma, e), a, b) - sigma as f64 * e * e * a * b).abs())
                .collect();
            let k = log_log_slope(&eps, &r);
            ok &= within(k, 2.7, 3.3);
            parts.push(format!("(a,b)=({a},{b}) sigma={sigma:+}: {k:.3}"));
        }
    }
    outcome(ok, format!("slopes {}", parts.join("; ")))
}

fn c5_pullback() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 5);
    let mut worst: f64 = 0.0;
    for sigma in [1, -1] {
        let samples: Vec<(Vector2<f64>, Vector2<f64>)> = (0..20)
            .map(|_| (random_point(&mut rng, 2.0), Vector2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
            .collect();
        worst = worst.max(symplectic_pullback_check(param(sigma, 0.2), &samples).unwrap_or(f64::NAN));
    }
    outcome(worst < 1e-7, format!("max residual {worst:.2e}"))
}

fn c6_conservation() -> Outcome {
    let cfg = IntegratorConfig::with_step(1e-3);
    let mut de: f64 = 0.0;
    let mut dmu: f64 = 0.0;
    for eps in [0.0, 0.1] {
        for sigma in [1, -1] {
            let (e, m) = two_body_conservation(sigma, eps, &cfg).unwrap_or((f64::NAN, f64::NAN));
            de = de.max(e);
            dmu = dmu.max(m);
        }
    }
    outcome(de < 1e-8 && dmu < 1e-8, format!("max |dH|={de:.2e}, max |dmu|={dmu:.2e}"))
}

fn perturbed(s: &ChartState, size: f64, seed: u64) -> ChartState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ChartState::from_vector(&s.to_vector().map(|x| x + size * rng.gen_range(-1.0..1.0)))
}

fn solve_flat(seed: &Seed, noise_seed: u64) -> curved_nbody::Result<REPoint> {
    let mu = momentum_nbody(flat(), &seed.state)?;
    let guess = perturbed(&seed.state, 1e-3, noise_seed);
    solve_re(flat(), &seed.bodies, &guess, &seed.generator, &mu, &SolverConfig::default())
}

fn centre_of_mass(sys: &BodySystem, s: &ChartState) -> Vector2<f64> {
    s.q.iter().zip(sys.masses()).map(|(q, m)| q * *m).sum::<Vector2<f64>>() / sys.total_mass()
}

/// Flat RE solutions from perturbed seeds, with the oracle `ω` at the converged size.
fn flat_res() -> Vec<(&'static str, curved_nbody::Result<REPoint>, Box<dyn Fn(&REPoint) -> f64>)> {
    let lag = make_lagrange([1.0; 3], 1.0, [0.0, 0.0]).unwrap();
    let lag123 = make_lagrange([1.0, 2.0, 3.0], 1.0, [0.0, 0.0]).unwrap();
    let euler = make_euler([1.0; 3], 1.0).unwrap();
    let square = make_ngon(4, 1.0, 1.0).unwrap();
    let square_sys = square.bodies.clone();
    vec![
        (
            "lagrange(1,1,1)",
            solve_flat(&lag, 1),
            Box::new(|p: &REPoint| (3.0 / (p.state.q[0] - p.state.q[1]).norm().powi(3)).sqrt()),
        ),
        (
            "lagrange(1,2,3)",
            solve_flat(&lag123, 2),
            Box::new(|p: &REPoint| (6.0 / (p.state.q[0] - p.state.q[1]).norm().powi(3)).sqrt()),
        ),
        (
            "euler(1,1,1)",
            solve_flat(&euler, 3),
            Box::new(|p: &REPoint| {
                let d = 0.5 * (p.state.q[0] - p.state.q[2]).norm();
                (1.25 / d.powi(3)).sqrt()
            }),
        ),
        (
            "square",
            solve_flat(&square, 4),
            Box::new(move |p: &REPoint| {
                let c = centre_of_mass(&square_sys, &p.state);
                let r = (p.state.q[0] - c).norm();
                let csc: f64 = (1..4).map(|k| 1.0 / (PI * k as f64 / 4.0).sin()).sum();
                (csc / (4.0 * r.powi(3))).sqrt()
            }),
        ),
    ]
}

fn c7_flat_oracles() -> (Outcome, Vec<REPoint>) {
    let mut ok = true;
    let mut parts = Vec::new();
    let mut solved = Vec::new();
    for (name, res, oracle) in flat_res() {
        match res {
            Ok(p) => {
                let err = (p.generator.omega - oracle(&p)).abs();
                ok &= err < 1e-9 && p.residual < 1e-10;
                parts.push(format!("{name}: |dw|={err:.1e} res={:.1e}", p.residual));
                solved.push(p);
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    (outcome(ok, parts.join("; ")), solved)
}

fn drifting_rpo_guess(seed: &Seed) -> (AlgebraElement, curved_nbody::MomentumValue) {
    let mu = momentum_nbody(flat(), &seed.state).unwrap();
    let m = seed.bodies.total_mass();
    (AlgebraElement::new(mu.mu1 * seed.period() / m, mu.mu2 * seed.period() / m, 0.0), mu)
}

fn c8_linear_momentum(flat_points: &[REPoint]) -> Outcome {
    let worst = flat_points.iter().map(|p| p.momentum.mu1.abs().max(p.momentum.mu2.abs())).fold(0.0, f64::max);
    let part_a = flat_points.len() == 4 && worst < 1e-10;
    let drifting = make_lagrange([1.0; 3], 1.0, [0.1, 0.0]).unwrap();
    let (drift, mu) = drifting_rpo_guess(&drifting);
    let re = solve_re(flat(), &drifting.bodies, &drifting.state, &drifting.generator, &mu, &SolverConfig::default());
    let rejected = matches!(re, Err(Error::NonvanishingLinearMomentum { .. }));
    let rpo = |cfg: &SolverConfig| {
        solve_rpo(flat(), &drifting.bodies, &drifting.state, drifting.period(), &drift, &mu, cfg)
    };
    let enforced = rpo(&SolverConfig::default());
    let mut detail = format!(
        "(a) max |mu1|,|mu2| over {} flat RE = {worst:.1e}; (b) solve_re rejects drift: {rejected}; solve_rpo: {}",
        flat_points.len(),
        match &enforced {
            Ok(p) => format!("accepted, residual {:.1e}", p.residual),
            Err(e) => format!("rejected ({e})"),
        }
    );
    if enforced.is_err() {
        let report = SolverConfig { policy: NondegeneracyPolicy::Report, ..SolverConfig::default() };
        if let Ok(p) = rpo(&report) {
            detail.push_str(&format!(
                "; without the nondegeneracy test it converges: residual {:.1e}, drift ({:.6}, {:.1e}, {:.1e}), multiplier gap {:.1e}",
                p.residual,
                p.drift.a,
                p.drift.b,
                p.drift.omega,
                multiplier_gap(&p.floquet)
            ));
        }
    }
    outcome(part_a && rejected && enforced.is_ok(), detail)
}

fn state_slope(branch: &Branch) -> f64 {
    let z0 = branch.records[0].point.state().to_vector();
    let picks = [0.01, 0.02, 0.04, 0.08];
    let d: Vec<f64> = picks
        .iter()
        .map(|&e| {
            let r = branch.records.iter().find(|r| (r.epsilon - e).abs() < 1e-12).expect("grid point");
            (r.point.state().to_vector() - &z0).norm()
        })
        .collect();
    log_log_slope(&picks, &d)
}

fn re_branches() -> Vec<(String, Branch)> {
    let grid = epsilon_grid(0.2, 0.01);
    let cfg = SolverConfig::default();
    let mut out = Vec::new();
    for (name, seed) in
        [("lagrange", make_lagrange([1.0; 3], 1.0, [0.0, 0.0]).unwrap()), ("square", make_ngon(4, 1.0, 1.0).unwrap())]
    {
        let mu = momentum_nbody(flat(), &seed.state).unwrap();
        let start = solve_re(flat(), &seed.bodies, &seed.state, &seed.generator, &mu, &cfg).unwrap();
        for sigma in [1, -1] {
            out.push((format!("{name} sigma={sigma:+}"), continue_re(&grid, sigma, &seed.bodies, &start, &cfg)));
        }
    }
    out
}

fn c9_re_continuation(branches: &[(String, Branch)]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, b) in branches {
        let reached = b.last_epsilon().unwrap_or(f64::NAN);
        let full = b.failure.is_none() && (reached - 0.2).abs() < 1e-12;
        let res = b.max_residual();
        let k = if full { state_slope(b) } else { f64::NAN };
        ok &= full && res <= 1e-10 && within(k, 1.7, 2.3);
        parts.push(format!("{name}: eps={reached}, max res={res:.1e}, slope={k:.3}"));
        if let Some(f) = &b.failure {
            parts.push(format!("stopped at {}: {}", f.epsilon, f.error));
        }
    }
    outcome(ok, parts.join("; "))
}

fn c10_momentum_tilt(branches: &[(String, Branch)]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (_, b) in branches {
        for r in &b.records {
            let BranchPoint::Re(p) = &r.point else { continue };
            let k = r.sigma as f64 * r.epsilon.powi(2) * p.momentum.l / p.generator.omega;
            worst = worst.max((p.momentum.mu1 - k * p.generator.a).abs()).max((p.momentum.mu2 - k * p.generator.b).abs());
            count += 1;
        }
    }
    outcome(count > 0 && worst < 1e-8, format!("max deviation {worst:.2e} over {count} points"))
}

fn rpo_branch_summary(seed_point: &RPOPoint, sys: &BodySystem, cfg: &SolverConfig) -> Vec<String> {
    let grid = epsilon_grid(0.05, 0.01);
    let mut parts = Vec::new();
    for sigma in [1, -1] {
        let b = continue_rpo(&grid, sigma, sys, seed_point, cfg);
        let drift_dist = b
            .records
            .iter()
            .filter_map(|r| if let BranchPoint::Rpo(p) = &r.point { Some(p.drift_distance) } else { None })
            .fold(0.0, f64::max);
        let period = |e: f64| {
            b.records.iter().find(|r| (r.epsilon - e).abs() < 1e-12).and_then(|r| match &r.point {
                BranchPoint::Rpo(p) => Some(p.period),
                _ => None,
            })
        };
        let t0 = period(0.0).unwrap_or(f64::NAN);
        let picks = [0.01, 0.02, 0.04];
        let dt: Vec<f64> = picks.iter().map(|&e| (period(e).unwrap_or(f64::NAN) - t0).abs()).collect();
        parts.push(format!(
            "sigma={sigma:+}: eps={:?}, max res={:.1e}, drift distance={drift_dist:.1e}, T slope={:.3}{}",
            b.last_epsilon(),
            b.max_residual(),
            log_log_slope(&picks, &dt),
            b.failure.as_ref().map(|f| format!(", stopped at {}: {}", f.epsilon, f.error)).unwrap_or_default()
        ));
    }
    parts
}

fn c11_rpo_continuation() -> Outcome {
    let seed = make_two_body([1.0, 1.0], 1.0, [0.1, 0.0]).unwrap();
    let (drift, mu) = drifting_rpo_guess(&seed);
    let cfg = SolverConfig::default();
    let start = solve_rpo(flat(), &seed.bodies, &seed.state, seed.period(), &drift, &mu, &cfg);
    match start {
        Ok(p) => {
            let grid = epsilon_grid(0.05, 0.01);
            let mut ok = true;
            let mut parts = Vec::new();
            for sigma in [1, -1] {
                let b = continue_rpo(&grid, sigma, &seed.bodies, &p, &cfg);
                let periods: Vec<(f64, f64, f64)> = b
                    .records
                    .iter()
                    .filter_map(|r| match &r.point {
                        BranchPoint::Rpo(q) => Some((r.epsilon, q.period, q.drift_distance)),
                        _ => None,
                    })
                    .collect();
                let t0 = periods[0].1;
                let picks: Vec<(f64, f64)> =
                    periods.iter().filter(|x| x.0 > 0.0).map(|x| (x.0, (x.1 - t0).abs())).collect();
                let k = log_log_slope(
                    &picks.iter().map(|x| x.0).collect::<Vec<_>>(),
                    &picks.iter().map(|x| x.1).collect::<Vec<_>>(),
                );
                let dd = periods.iter().map(|x| x.2).fold(0.0, f64::max);
                let full = b.failure.is_none() && (b.last_epsilon().unwrap_or(0.0) - 0.05).abs() < 1e-12;
                ok &= full && b.max_residual() <= 1e-8 && dd <= 1e-8 && within(k, 1.7, 2.3);
                parts.push(format!("sigma={sigma:+}: res={:.1e} drift={dd:.1e} T slope={k:.3}", b.max_residual()));
            }
            outcome(ok, parts.join("; "))
        }
        Err(e) => {
            let report = SolverConfig { policy: NondegeneracyPolicy::Report, ..SolverConfig::default() };
            let mut detail = format!("flat seed rejected: {e}");
            if let Ok(p) = solve_rpo(flat(), &seed.bodies, &seed.state, seed.period(), &drift, &mu, &report) {
                detail.push_str(&format!(
                    "; without the nondegeneracy test: {}",
                    rpo_branch_summary(&p, &seed.bodies, &report).join("; ")
                ));
            }
            outcome(false, detail)
        }
    }
}

fn c12_figure_eight() -> Outcome {
    let f = match figure_eight() {
        Ok(f) => f,
        Err(e) => return outcome(false, format!("data rejected: {e}")),
    };
    let cfg = SolverConfig::default();
    let p = match solve_po_through(flat(), &f.bodies, &f.state, f.period, &cfg) {
        Ok(p) => p,
        Err(e) => return outcome(false, format!("closure {:.1e}; polish failed: {e}", f.closure)),
    };
    let gap = multiplier_gap(&p.floquet);
    let mut ok = f.closure < 1e-6 && p.closure < 1e-10 && gap > 1e-4;
    let mut parts = vec![format!(
        "data closure {:.1e}, polished {:.1e}, T={:.6}, multiplier gap {gap:.3e}",
        f.closure, p.closure, p.period
    )];
    let grid = epsilon_grid(0.02, 0.01);
    for sigma in [1, -1] {
        let b = continue_po(&grid, sigma, &f.bodies, &p, &cfg);
        let full = b.failure.is_none() && (b.last_epsilon().unwrap_or(0.0) - 0.02).abs() < 1e-12;
        ok &= full && b.max_residual() < 1e-8;
        parts.push(format!(
            "sigma={sigma:+}: eps={:?} max closure {:.1e}{}",
            b.last_epsilon(),
            b.max_residual(),
            b.failure.as_ref().map(|f| format!(", stopped at {}: {}", f.epsilon, f.error)).unwrap_or_default()
        ));
    }
    outcome(ok, parts.join("; "))
}

fn report(n: usize, title: &str, started: Instant, o: &Outcome) -> bool {
    println!(
        "criterion {n:>2} {} {title} ({:.1}s): {}",
        if o.passed { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64(),
        o.detail
    );
    o.passed
}

fn main() {
    let mut passed = Vec::new();
    let mut run = |n: usize, title: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        passed.push(report(n, title, t, &o));
    };
    run(1, "Hamiltonian expansion order", &mut c1_expansion);
    run(2, "momentum map contraction", &mut c2_contraction);
    run(3, "bracket algebra", &mut c3_brackets);
    run(4, "commutator holonomy", &mut c4_holonomy);
    run(5, "symplectic pullback", &mut c5_pullback);
    run(6, "conservation under the flow", &mut c6_conservation);
    let mut flat_points = Vec::new();
    run(7, "flat RE oracles", &mut || {
        let (o, pts) = c7_flat_oracles();
        flat_points = pts;
        o
    });
    run(8, "vanishing linear momentum", &mut || c8_linear_momentum(&flat_points));
    let mut branches = Vec::new();
    run(9, "RE continuation", &mut || {
        branches = re_branches();
        c9_re_continuation(&branches)
    });
    run(10, "curved momentum identity", &mut || c10_momentum_tilt(&branches));
    run(11, "RPO continuation", &mut c11_rpo_continuation);
    run(12, "figure-eight", &mut c12_figure_eight);
    let failed: Vec<usize> = passed.iter().enumerate().filter(|(_, p)| !**p).map(|(k, _)| k + 1).collect();
    println!("{} of {} criteria passed", passed.len() - failed.len(), passed.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
