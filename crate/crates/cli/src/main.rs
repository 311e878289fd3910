//! `curved-nbody`: invariant suites, trajectory runs and continuation
//! campaigns for the n-body problem on surfaces of small constant curvature.
//!
//! Every command that writes files also writes `manifest.json` next to them,
//! recording the command, the scenario, the flags that overrode it, the seed
//! and the tool version.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use curved_nbody::continuation::{
    continue_po, continue_re, continue_rpo, epsilon_grid, solve_po_through, solve_re, solve_rpo, Branch,
    NondegeneracyPolicy, SolverConfig,
};
use curved_nbody::dynamics::{trajectory, IntegratorConfig};
use curved_nbody::output::{branch_csv, branch_file, to_json17, trajectory_csv, write_text};
use curved_nbody::scenarios::{load_scenario, ScenarioSeed, ScenarioSpec};
use curved_nbody::symmetry::momentum_nbody;
use curved_nbody::verify::{run_suite, Suite};
use curved_nbody::{AlgebraElement, BodySystem, CurvatureParam, Error, NewtonianSystem};

#[derive(Parser, Debug)]
#[command(name = "curved-nbody", version, about = "Curved n-body verification, simulation and continuation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an invariant suite and print its table.
    Verify {
        #[arg(long, value_enum, default_value_t = SuiteArg::All)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the report and a manifest here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Continue a flat solution in epsilon.
    Continue {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        /// `+1`, `-1` or `both`; defaults to the scenario's sigma.
        #[arg(long, value_parser = parse_sigmas, allow_hyphen_values = true)]
        sigma: Option<Sigmas>,
        #[arg(long)]
        eps_max: Option<f64>,
        #[arg(long)]
        eps_step: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        /// Accept orbits that fail the nondegeneracy test instead of stopping.
        #[arg(long)]
        report_degenerate: bool,
    },
    /// Integrate a scenario and write its trajectory.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Defaults to the seed's period.
        #[arg(long)]
        t_final: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = parse_sigma, allow_hyphen_values = true)]
        sigma: Option<i32>,
        /// Defaults to the start of the scenario's epsilon grid.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        /// Keep every k-th step.
        #[arg(long, default_value_t = 10)]
        every: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SuiteArg {
    Geometry,
    Symmetry,
    Hamiltonian,
    Dynamics,
    All,
}

impl SuiteArg {
    fn suites(self) -> Vec<Suite> {
        match self {
            SuiteArg::Geometry => vec![Suite::Geometry],
            SuiteArg::Symmetry => vec![Suite::Symmetry],
            SuiteArg::Hamiltonian => vec![Suite::Hamiltonian],
            SuiteArg::Dynamics => vec![Suite::Dynamics],
            SuiteArg::All => Suite::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Re,
    Rpo,
    Po,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Re => "re",
            Kind::Rpo => "rpo",
            Kind::Po => "po",
        }
    }
}

fn parse_sigma(s: &str) -> Result<i32, String> {
    match s {
        "1" | "+1" => Ok(1),
        "-1" => Ok(-1),
        _ => Err(format!("sigma must be +1 or -1, got {s}")),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Sigmas(Vec<i32>);

fn parse_sigmas(s: &str) -> Result<Sigmas, String> {
    if s == "both" {
        Ok(Sigmas(vec![1, -1]))
    } else {
        parse_sigma(s).map(|v| Sigmas(vec![v]))
    }
}

#[derive(Debug, Serialize)]
struct RunManifest {
    command: String,
    scenario: Option<String>,
    overrides: BTreeMap<String, Value>,
    output_directory: String,
    seed: Option<u64>,
    version: String,
    timestamp: String,
}

impl RunManifest {
    fn new(command: &str, scenario: Option<&Path>, overrides: BTreeMap<String, Value>, out: &Path) -> Self {
        Self {
            command: command.into(),
            scenario: scenario.map(|p| p.display().to_string()),
            overrides,
            output_directory: out.display().to_string(),
            seed: None,
            version: env!("CARGO_PKG_VERSION").into(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        }
    }

    fn write(&self, out: &Path) -> Result<(), Error> {
        write_text(&out.join("manifest.json"), &to_json17(self)?)
    }
}

/// Failure of a command, mapped onto the exit-code contract.
#[derive(Debug)]
enum Failure {
    /// Exit 1: a solver, hypothesis or suite failure.
    Numeric(String),
    /// Exit 2: unreadable or invalid input.
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Numeric(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify { suite, seed, out } => cmd_verify(suite, seed, out.as_deref()),
        Command::Continue { scenario, kind, sigma, eps_max, eps_step, out, step, tol, report_degenerate } => {
            let opts = ContinueOptions { kind, sigma, eps_max, eps_step, out, step, tol, report_degenerate };
            cmd_continue(&scenario, &opts)
        }
        Command::Simulate { scenario, t_final, out, sigma, epsilon, step, tol, every } => {
            let opts = SimulateOptions { t_final, out, sigma, epsilon, step, tol, every };
            cmd_simulate(&scenario, &opts)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn cmd_verify(suite: SuiteArg, seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    let reports: Vec<_> = suite.suites().into_iter().map(|s| run_suite(s, seed)).collect();
    let mut text = String::new();
    for r in &reports {
        text.push_str(&r.render());
        text.push('\n');
    }
    print!("{text}");
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed()).map(|r| r.suite.name()).collect();
    if let Some(out) = out {
        write_text(&out.join("verify.txt"), &text)?;
        write_text(&out.join("verify.json"), &to_json17(&reports)?)?;
        let mut overrides = BTreeMap::new();
        overrides.insert("suite".into(), json!(suite));
        let mut manifest = RunManifest::new("verify", None, overrides, out);
        manifest.seed = Some(seed);
        manifest.write(out)?;
    }
    if failed.is_empty() {
        println!("all checks passed");
        Ok(())
    } else {
        Err(Failure::Numeric(format!("failing suites: {}", failed.join(", "))))
    }
}

struct ContinueOptions {
    kind: Kind,
    sigma: Option<Sigmas>,
    eps_max: Option<f64>,
    eps_step: Option<f64>,
    out: Option<PathBuf>,
    step: Option<f64>,
    tol: Option<f64>,
    report_degenerate: bool,
}

fn load(path: &Path) -> Result<(ScenarioSpec, ScenarioSeed), Failure> {
    let spec = load_scenario(path)?;
    let seed = spec.seed(path.parent())?;
    Ok((spec, seed))
}

fn integrator(spec: &ScenarioSpec, step: Option<f64>, tol: Option<f64>) -> Result<IntegratorConfig, Failure> {
    let mut cfg = spec.integrator_config();
    for (name, v) in [("--step", step), ("--tol", tol)] {
        if let Some(v) = v {
            if !(v.is_finite() && v > 0.0) {
                return Err(Failure::Input(format!("{name} must be positive, got {v}")));
            }
        }
    }
    cfg.step = step.unwrap_or(cfg.step);
    cfg.tol = tol.unwrap_or(cfg.tol);
    Ok(cfg)
}

fn output_dir(spec: &ScenarioSpec, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf)
        .or_else(|| spec.output.directory.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn sigma_tag(sigma: i32) -> &'static str {
    if sigma > 0 {
        "sigma+1"
    } else {
        "sigma-1"
    }
}

fn cmd_continue(scenario: &Path, opts: &ContinueOptions) -> Result<(), Failure> {
    let (spec, seed) = load(scenario)?;
    let mut cfg = SolverConfig { integrator: integrator(&spec, opts.step, opts.tol)?, ..SolverConfig::default() };
    if opts.report_degenerate {
        cfg.policy = NondegeneracyPolicy::Report;
    }
    let grid = match (opts.eps_max, opts.eps_step) {
        (None, None) => spec.epsilon_grid.values(),
        (max, step) => {
            let max = max.unwrap_or(spec.epsilon_grid.stop);
            let step = step.unwrap_or(spec.epsilon_grid.step);
            if !(max >= 0.0 && step > 0.0) {
                return Err(Failure::Input(format!("need --eps-max >= 0 and --eps-step > 0, got {max}, {step}")));
            }
            epsilon_grid(max, step)
        }
    };
    let sigmas = opts.sigma.clone().map_or_else(|| vec![spec.sigma], |s| s.0);
    let flat = CurvatureParam::flat(1)?;
    let sys = seed.bodies().clone();
    let kind = opts.kind;

    let start = flat_start(kind, flat, &seed, &cfg)
        .map_err(|e| Failure::from(e).context(&format!("flat {} seed", kind.name())))?;
    let branches: Vec<(i32, Branch)> = std::thread::scope(|scope| {
        let handles: Vec<_> = sigmas
            .iter()
            .map(|&sigma| {
                let (sys, start, grid) = (&sys, &start, &grid);
                scope.spawn(move || (sigma, run_branch(start, grid, sigma, sys, &cfg)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("branch thread panicked")).collect()
    });

    let out = output_dir(&spec, opts.out.as_deref());
    let mut failures = Vec::new();
    for (sigma, branch) in &branches {
        let file = branch_file(branch, &sys);
        let stem = format!("branch_{}_{}", kind.name(), sigma_tag(*sigma));
        write_text(&out.join(format!("{stem}.csv")), &branch_csv(&file.entries))?;
        write_text(&out.join(format!("{stem}.json")), &to_json17(&file)?)?;
        let reached = branch.last_epsilon().map_or("none".to_string(), |e| e.to_string());
        println!("sigma={sigma:+}: reached epsilon={reached}, max residual {:.3e}", branch.max_residual());
        if let Some(f) = &branch.failure {
            println!("sigma={sigma:+}: stopped at epsilon={}: {}", f.epsilon, f.error);
            failures.push((f.error.is_input_error(), format!("sigma={sigma:+}, epsilon={}: {}", f.epsilon, f.error)));
        }
    }

    let mut overrides = BTreeMap::new();
    overrides.insert("kind".into(), json!(kind));
    overrides.insert("sigma".into(), json!(sigmas));
    for (k, v) in [("eps_max", opts.eps_max), ("eps_step", opts.eps_step), ("step", opts.step), ("tol", opts.tol)] {
        if let Some(v) = v {
            overrides.insert(k.into(), json!(v));
        }
    }
    if opts.report_degenerate {
        overrides.insert("report_degenerate".into(), json!(true));
    }
    RunManifest::new("continue", Some(scenario), overrides, &out).write(&out)?;

    match failures.iter().find(|f| !f.0).or(failures.first()) {
        None => Ok(()),
        Some((true, msg)) => Err(Failure::Input(msg.clone())),
        Some((false, msg)) => Err(Failure::Numeric(msg.clone())),
    }
}

impl Failure {
    fn context(self, what: &str) -> Self {
        match self {
            Failure::Numeric(m) => Failure::Numeric(format!("{what}: {m}")),
            Failure::Input(m) => Failure::Input(format!("{what}: {m}")),
        }
    }
}

enum Start {
    Re(curved_nbody::continuation::REPoint),
    Rpo(curved_nbody::continuation::RPOPoint),
    Po(curved_nbody::continuation::POPoint),
}

fn period_of(seed: &ScenarioSeed) -> Result<f64, Error> {
    seed.period().ok_or_else(|| Error::Schema {
        field: "period".into(),
        message: "the seed has no period; give omega or period".into(),
    })
}

/// Solves for the flat solution that the branch starts from.
fn flat_start(kind: Kind, flat: CurvatureParam, seed: &ScenarioSeed, cfg: &SolverConfig) -> Result<Start, Error> {
    let sys = seed.bodies();
    let state = seed.state();
    let mu = momentum_nbody(flat, state)?;
    match kind {
        Kind::Re => {
            let generator = match seed {
                ScenarioSeed::Rigid(s) => s.generator,
                ScenarioSeed::Orbit(o) => AlgebraElement::new(0.0, 0.0, std::f64::consts::TAU / o.period),
            };
            Ok(Start::Re(solve_re(flat, sys, state, &generator, &mu, cfg)?))
        }
        Kind::Rpo => {
            let period = period_of(seed)?;
            let m = sys.total_mass();
            let drift = AlgebraElement::new(mu.mu1 * period / m, mu.mu2 * period / m, 0.0);
            Ok(Start::Rpo(solve_rpo(flat, sys, state, period, &drift, &mu, cfg)?))
        }
        Kind::Po => Ok(Start::Po(solve_po_through(flat, sys, state, period_of(seed)?, cfg)?)),
    }
}

fn run_branch(start: &Start, grid: &[f64], sigma: i32, sys: &BodySystem, cfg: &SolverConfig) -> Branch {
    match start {
        Start::Re(p) => continue_re(grid, sigma, sys, p, cfg),
        Start::Rpo(p) => continue_rpo(grid, sigma, sys, p, cfg),
        Start::Po(p) => continue_po(grid, sigma, sys, p, cfg),
    }
}

struct SimulateOptions {
    t_final: Option<f64>,
    out: Option<PathBuf>,
    sigma: Option<i32>,
    epsilon: Option<f64>,
    step: Option<f64>,
    tol: Option<f64>,
    every: usize,
}

fn cmd_simulate(scenario: &Path, opts: &SimulateOptions) -> Result<(), Failure> {
    let (spec, seed) = load(scenario)?;
    let cfg = integrator(&spec, opts.step, opts.tol)?;
    let sigma = opts.sigma.unwrap_or(spec.sigma);
    let epsilon = opts.epsilon.unwrap_or(spec.epsilon_grid.start);
    let param = CurvatureParam::new(sigma, epsilon)?;
    let t_final = match opts.t_final {
        Some(t) if t.is_finite() && t > 0.0 => t,
        Some(t) => return Err(Failure::Input(format!("--t-final must be positive, got {t}"))),
        None => period_of(&seed)?,
    };
    let h = NewtonianSystem::new(param, seed.bodies().clone());
    let samples = trajectory(&h, seed.state(), t_final, opts.every, &cfg)?;
    let (csv, summary) = trajectory_csv(param, seed.bodies(), &samples)?;

    let out = output_dir(&spec, opts.out.as_deref());
    write_text(&out.join("trajectory.csv"), &csv)?;
    let report = json!({
        "sigma": sigma,
        "epsilon": epsilon,
        "t_final": t_final,
        "step": cfg.step,
        "samples": samples.len(),
        "summary": summary,
    });
    write_text(&out.join("summary.json"), &to_json17(&report)?)?;
    let mut overrides = BTreeMap::new();
    for (k, v) in [("t_final", opts.t_final), ("epsilon", opts.epsilon), ("step", opts.step), ("tol", opts.tol)] {
        if let Some(v) = v {
            overrides.insert(k.into(), json!(v));
        }
    }
    if let Some(s) = opts.sigma {
        overrides.insert("sigma".into(), json!(s));
    }
    overrides.insert("every".into(), json!(opts.every));
    RunManifest::new("simulate", Some(scenario), overrides, &out).write(&out)?;

    println!("t_final {t_final}, {} samples", samples.len());
    println!("max |dH|      {:.3e}", summary.max_energy_drift);
    println!("max |dmu|     {:.3e}", summary.max_momentum_drift);
    println!("closure       {:.3e}", summary.closure);
    println!("min distance  {:.6}", summary.min_pair_distance);
    Ok(())
}
