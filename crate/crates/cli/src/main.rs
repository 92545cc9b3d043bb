use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use spikelab::config::{Budget, ExperimentConfig};
use spikelab::geometry::{generate_mesh, max_mean_curvature, Mesh};
use spikelab::harness::{curvature_table, epsilon_sweep, peak_convergence_report, PeakConvergence, SweepReport};
use spikelab::nonlinearity::HypothesisReport;
use spikelab::radial::{
    decay_diagnostics, find_ground_state, gamma_crosscheck, ground_state_constants, DecayDiagnostics, GammaCrosscheck,
    GroundStateConstants, RadialProfile,
};
use spikelab::verify::{CriterionOutcome, Verifier};

#[derive(Parser)]
#[command(name = "spikelab", version, about = "Least-energy spike solutions of the m-Laplacian Neumann problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Experiment config, TOML or JSON (by extension). Defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Overrides `solver.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `verify.budget`.
    #[arg(long, global = true, value_enum)]
    budget: Option<BudgetArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BudgetArg {
    Quick,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Ground-state profile, decay diagnostics and constants.
    Radial,
    /// Mean-curvature maximizers and the curvature table of the boundary.
    Curvature,
    /// Boundary-fitted mesh as vertex and cell tables.
    Mesh {
        /// Mesh size; defaults to `h_ratio` times the first schedule value.
        #[arg(long)]
        h: Option<f64>,
    },
    /// One ε with the full restart panel.
    Solve {
        /// Defaults to the first schedule value.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// The whole ε schedule.
    Sweep,
    /// Acceptance criteria as a pass/fail table.
    Verify {
        /// Comma-separated criterion names; all when absent.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<String>,
    },
}

struct Failure {
    code: u8,
    body: serde_json::Value,
}

fn fail(kind: &str, message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        body: json!({ "error": kind, "message": message.into() }),
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.common.workers).build() {
        Ok(p) => p,
        Err(e) => return report(Err(fail("workers", e.to_string()))),
    };
    report(pool.install(|| run(&cli)))
}

fn report(outcome: Outcome) -> ExitCode {
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("{}", serde_json::to_string_pretty(&f.body).unwrap());
            ExitCode::from(f.code)
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        None => ExperimentConfig::default().resolve().map_err(|e| fail("config", e.to_string()))?,
        Some(path) if !path.exists() => {
            let usage = Cli::command().render_usage().to_string();
            return Err(Failure {
                code: 1,
                body: json!({
                    "error": "config",
                    "message": format!("config file {} not found", path.display()),
                    "usage": usage,
                }),
            });
        }
        Some(path) => ExperimentConfig::from_path(path).map_err(|e| fail("config", e.to_string()))?,
    };
    if let Some(s) = common.seed {
        cfg.solver.seed = s;
    }
    if let Some(b) = common.budget {
        cfg.verify.budget = match b {
            BudgetArg::Quick => Budget::Quick,
            BudgetArg::Full => Budget::Full,
        };
    }
    if let Some(out) = &common.out {
        cfg.output.dir = out.display().to_string();
    }
    Ok(cfg)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    fs::write(dir.join(name), contents).map_err(|e| fail("io", format!("{}: {e}", dir.join(name).display())))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), Failure> {
    write(dir, name, &(serde_json::to_string_pretty(value).unwrap() + "\n"))
}

fn prepare_output(cfg: &ExperimentConfig) -> Result<PathBuf, Failure> {
    let dir = PathBuf::from(&cfg.output.dir);
    fs::create_dir_all(&dir).map_err(|e| fail("io", format!("{}: {e}", dir.display())))?;
    write(&dir, "effective_config.toml", &cfg.to_toml())?;
    Ok(dir)
}

fn run(cli: &Cli) -> Outcome {
    let cfg = load_config(&cli.common)?;
    match &cli.command {
        Command::Radial => cmd_radial(&cfg),
        Command::Curvature => cmd_curvature(&cfg),
        Command::Mesh { h } => cmd_mesh(&cfg, *h),
        Command::Solve { eps } => cmd_solve(&cfg, *eps),
        Command::Sweep => cmd_sweep(&cfg),
        Command::Verify { criteria } => cmd_verify(&cfg, criteria),
    }
}

fn checked_hypotheses(cfg: &ExperimentConfig) -> Result<(spikelab::nonlinearity::NonlinearitySpec, HypothesisReport), Failure> {
    let spec = cfg.nonlinearity_spec().map_err(|e| fail("nonlinearity", e.to_string()))?;
    let hyp = spec.check_hypotheses().map_err(|e| fail("nonlinearity", e.to_string()))?;
    if !hyp.all_pass() && !hyp.extrapolation {
        return Err(Failure {
            code: 1,
            body: json!({
                "error": "hypotheses",
                "message": format!("nonlinearity fails {:?}", hyp.failures()),
                "failed": hyp.failures(),
                "report": hyp,
            }),
        });
    }
    Ok((spec, hyp))
}

fn ground_state(cfg: &ExperimentConfig, spec: &spikelab::nonlinearity::NonlinearitySpec) -> Result<RadialProfile, Failure> {
    find_ground_state(spec, &cfg.radial.settings()).map_err(|e| fail("radial", e.to_string()))
}

#[derive(Serialize)]
struct RadialReport<'a> {
    hypotheses: &'a HypothesisReport,
    shoot_height: f64,
    reliable_radius: f64,
    splice_radius: f64,
    mu: f64,
    decay: DecayDiagnostics,
    constants: GroundStateConstants,
    gamma_crosscheck: GammaCrosscheck,
    plateau_ok: bool,
    crosscheck_ok: bool,
}

fn cmd_radial(cfg: &ExperimentConfig) -> Outcome {
    let (spec, hyp) = checked_hypotheses(cfg)?;
    let dir = prepare_output(cfg)?;
    let p = ground_state(cfg, &spec)?;
    let decay = decay_diagnostics(&p).map_err(|e| fail("radial", e.to_string()))?;
    let constants = ground_state_constants(&p, &spec).map_err(|e| fail("radial", e.to_string()))?;
    let cross = gamma_crosscheck(&p, &spec, cfg.radial.crosscheck_samples, cfg.solver.seed);
    let report = RadialReport {
        hypotheses: &hyp,
        shoot_height: p.shoot_height,
        reliable_radius: p.reliable_radius,
        splice_radius: p.splice_radius,
        mu: p.mu(),
        plateau_ok: decay.plateau_error < cfg.radial.plateau_tol,
        crosscheck_ok: cross.relative_gap < cfg.radial.crosscheck_tol,
        decay,
        constants,
        gamma_crosscheck: cross,
    };
    write_json(&dir, "radial_report.json", &report)?;
    let (alpha, mu) = (p.alpha(), p.mu());
    let mut csv = String::from("r,w,dw,q\n");
    for i in 0..p.r.len() {
        let r = p.r[i];
        let q = p.w[i] * r.powf(alpha) * (mu * r).exp();
        writeln!(csv, "{r:e},{:e},{:e},{q:e}", p.w[i], p.dw[i]).unwrap();
    }
    write(&dir, "radial_profile.csv", &csv)?;
    Ok(if report.plateau_ok && report.crosscheck_ok { 0 } else { 1 })
}

fn cmd_curvature(cfg: &ExperimentConfig) -> Outcome {
    let dir = prepare_output(cfg)?;
    write_json(&dir, "curvature.json", &max_mean_curvature(&cfg.domain))?;
    write(&dir, "curvature_table.csv", &curvature_csv(cfg))?;
    Ok(0)
}

fn curvature_csv(cfg: &ExperimentConfig) -> String {
    let mut csv = String::from(if cfg.dim() == 2 { "theta,H\n" } else { "theta,phi,H\n" });
    for (param, h) in curvature_table(&cfg.domain, 360) {
        for t in &param {
            write!(csv, "{t:e},").unwrap();
        }
        writeln!(csv, "{h:e}").unwrap();
    }
    csv
}

fn mesh_tables(mesh: &Mesh) -> (String, String) {
    let d = mesh.dim;
    let mut v = String::from(if d == 2 { "id,x,y,boundary\n" } else { "id,x,y,z,boundary\n" });
    for i in 0..mesh.n_vertices() {
        write!(v, "{i}").unwrap();
        for x in mesh.vertex(i) {
            write!(v, ",{x:e}").unwrap();
        }
        writeln!(v, ",{}", u8::from(mesh.is_boundary(i))).unwrap();
    }
    let mut c = String::from(if d == 2 { "id,v0,v1,v2\n" } else { "id,v0,v1,v2,v3\n" });
    for k in 0..mesh.n_cells() {
        write!(c, "{k}").unwrap();
        for n in mesh.cell(k) {
            write!(c, ",{n}").unwrap();
        }
        c.push('\n');
    }
    (v, c)
}

fn cmd_mesh(cfg: &ExperimentConfig, h: Option<f64>) -> Outcome {
    let h = h.unwrap_or(cfg.schedule()[0] * cfg.solver.h_ratio);
    let dir = prepare_output(cfg)?;
    let mesh = generate_mesh(&cfg.domain, h).map_err(|e| fail("mesh", e.to_string()))?;
    let (v, c) = mesh_tables(&mesh);
    write(&dir, "mesh_vertices.csv", &v)?;
    write(&dir, "mesh_cells.csv", &c)?;
    write_json(&dir, "mesh_stats.json", &mesh.stats())?;
    Ok(0)
}

fn field_csv(mesh: &Mesh, u: &[f64]) -> String {
    let mut s = String::from(if mesh.dim == 2 { "id,x,y,u\n" } else { "id,x,y,z,u\n" });
    for (i, val) in u.iter().enumerate() {
        write!(s, "{i}").unwrap();
        for x in mesh.vertex(i) {
            write!(s, ",{x:e}").unwrap();
        }
        writeln!(s, ",{val:e}").unwrap();
    }
    s
}

fn run_schedule(cfg: &ExperimentConfig, schedule: Vec<f64>) -> Result<SweepReport, Failure> {
    let (spec, _) = checked_hypotheses(cfg)?;
    let profile = Arc::new(ground_state(cfg, &spec)?);
    let mut settings = cfg.sweep_settings();
    settings.schedule = schedule;
    epsilon_sweep(&cfg.domain, &spec, profile, &settings).map_err(|e| fail("sweep", e.to_string()))
}

fn case_status(sweep: &SweepReport) -> serde_json::Value {
    json!(sweep
        .cases
        .iter()
        .map(|c| json!({ "eps": c.eps, "converged": c.converged, "error": c.error }))
        .collect::<Vec<_>>())
}

fn partial(sweep: &SweepReport) -> Failure {
    Failure {
        code: 2,
        body: json!({ "error": "not_converged", "message": "some cases did not converge", "cases": case_status(sweep) }),
    }
}

fn cmd_solve(cfg: &ExperimentConfig, eps: Option<f64>) -> Outcome {
    let eps = eps.unwrap_or(cfg.schedule()[0]);
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(fail("config", format!("ε = {eps} must lie in (0, 1]")));
    }
    let dir = prepare_output(cfg)?;
    let sweep = run_schedule(cfg, vec![eps])?;
    let case = &sweep.cases[0];
    write_json(&dir, "solve_report.json", case)?;
    if let Some(r) = &case.report {
        write(&dir, "field.csv", &field_csv(&r.u.mesh, &r.u.values))?;
    }
    if case.converged {
        Ok(0)
    } else {
        Err(partial(&sweep))
    }
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    sweep: &'a SweepReport,
    peak_convergence: PeakConvergence,
}

fn cmd_sweep(cfg: &ExperimentConfig) -> Outcome {
    let dir = prepare_output(cfg)?;
    let sweep = run_schedule(cfg, cfg.schedule())?;
    let summary = SweepSummary {
        sweep: &sweep,
        peak_convergence: peak_convergence_report(&cfg.domain, &sweep),
    };
    write_json(&dir, "sweep_summary.json", &summary)?;

    let n = cfg.dim() as i32;
    let mut energy = String::from("eps,c_eps,c_eps_scaled,converged\n");
    let mut decay = String::from("case,eps,rho,log_u\n");
    let fields = dir.join("fields");
    fs::create_dir_all(&fields).map_err(|e| fail("io", e.to_string()))?;
    for c in &sweep.cases {
        let Some(r) = &c.report else {
            writeln!(energy, "{:e},,,false", c.eps).unwrap();
            continue;
        };
        writeln!(energy, "{:e},{:e},{:e},{}", c.eps, r.c_eps, r.c_eps * c.eps.powi(-n), c.converged).unwrap();
        write(&fields, &format!("case_{}.csv", c.index), &field_csv(&r.u.mesh, &r.u.values))?;
        let peak = c.peak.as_ref().unwrap();
        for (i, &u) in r.u.values.iter().enumerate() {
            if u > 0.0 {
                let d: f64 = r.u.mesh.vertex(i).iter().zip(peak).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                writeln!(decay, "{},{:e},{:e},{:e}", c.index, c.eps, d / c.eps, u.ln()).unwrap();
            }
        }
    }
    write(&dir, "energy_table.csv", &energy)?;
    write(&dir, "decay_table.csv", &decay)?;
    write(&dir, "curvature_table.csv", &curvature_csv(cfg))?;
    if sweep.all_converged() {
        Ok(0)
    } else {
        Err(partial(&sweep))
    }
}

fn cmd_verify(cfg: &ExperimentConfig, criteria: &[String]) -> Outcome {
    let names = if criteria.is_empty() { &cfg.verify.criteria } else { criteria };
    let selected = Verifier::select(names).map_err(|e| match &e {
        spikelab::verify::VerifyError::UnknownCriterion { valid, .. } => Failure {
            code: 1,
            body: json!({ "error": "unknown_criterion", "message": e.to_string(), "valid": valid }),
        },
    })?;
    let dir = prepare_output(cfg)?;
    let verifier = Verifier::new(cfg.verify.budget, cfg.solver.seed);
    let mut outcomes: Vec<CriterionOutcome> = Vec::new();
    for info in selected {
        let o = verifier.run(info);
        println!("{}", o.line());
        outcomes.push(o);
    }
    write_json(&dir, "verify.json", &outcomes)?;
    Ok(if outcomes.iter().all(|o| o.passed) { 0 } else { 1 })
}
