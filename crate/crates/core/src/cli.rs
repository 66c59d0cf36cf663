//! Command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input, 3 solver failure or a failed
//! check (criterion, audit, incomplete sweep).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::cell::HomogenizedLaw;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::flux::audit_assumptions;
use crate::harness::report::{self, format_f64};
use crate::harness::{convergence_study, ergodic_study, ErgodicRow};
use crate::pde::{fine_residual, solve_fine, solve_homogenized, NewtonDiagnostics};
use crate::plot::{render_svg, Table};
use crate::projection::{check_criterion, Certificate, CriterionReport};

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "QUASIHOM_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "quasihom", version, about = "Homogenization of quasiperiodic monotone operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify the irrationality criterion of the projection matrix.
    CheckMatrix(RunArgs),
    /// Sample the structural assumptions of the flux model.
    AuditModel(RunArgs),
    /// Ergodic averages of a torus field along the projected plane.
    Ergodic(RunArgs),
    /// Solve one cell problem.
    Cell(RunArgs),
    /// Solve the homogenized macroscopic problem.
    Homogenize(RunArgs),
    /// Solve the oscillating problem at one `eta`.
    Fine(RunArgs),
    /// Run an `eta` sweep and measure convergence.
    Converge(RunArgs),
    /// Render a CSV table as an SVG line chart.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Scale {
    /// Log-log for tables indexed by `eta`, linear otherwise.
    Auto,
    Linear,
    Log,
}

#[derive(Args, Debug)]
struct PlotArgs {
    input: PathBuf,
    /// Output file; defaults to the input with an `.svg` extension.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "auto")]
    scale: Scale,
}

struct Outcome {
    code: i32,
    message: String,
}

impl Outcome {
    fn ok(message: String) -> Self {
        Self { code: EXIT_OK, message }
    }
}

fn exit_code(err: &Error) -> i32 {
    if err.is_solver_failure() {
        EXIT_FAILURE
    } else {
        EXIT_INVALID
    }
}

fn configure_workers() -> Result<()> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let workers: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&w| w > 0)
        .ok_or_else(|| Error::Config(format!("{WORKERS_ENV} must be a positive integer, got `{raw}`")))?;
    // a pool that already exists (repeated calls in one process) is kept
    let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    Ok(())
}

/// Parse `args` (including the program name), run the command and return
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = configure_workers().and_then(|()| dispatch(cli.command));
    match outcome {
        Ok(o) => {
            if o.code == EXIT_OK {
                println!("{}", o.message);
            } else {
                eprintln!("{}", o.message);
            }
            o.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command) -> Result<Outcome> {
    match command {
        Command::CheckMatrix(a) => with_config(&a, "check-matrix", check_matrix),
        Command::AuditModel(a) => with_config(&a, "audit-model", audit_model),
        Command::Ergodic(a) => with_config(&a, "ergodic", ergodic),
        Command::Cell(a) => with_config(&a, "cell", cell),
        Command::Homogenize(a) => with_config(&a, "homogenize", homogenize),
        Command::Fine(a) => with_config(&a, "fine", fine),
        Command::Converge(a) => with_config(&a, "converge", converge),
        Command::Plot(a) => plot(&a),
    }
}

fn with_config(
    args: &RunArgs,
    command: &str,
    body: impl FnOnce(&Config, &Path, &str) -> Result<Outcome>,
) -> Result<Outcome> {
    let cfg = Config::load(&args.config)?;
    let outcome = body(&cfg, &args.out, command)?;
    report::write_meta(&args.out, command)?;
    Ok(outcome)
}

#[derive(Serialize)]
struct MatrixResult {
    m: usize,
    n: usize,
    entries: Vec<f64>,
    algebraic_tag: String,
    criterion: CriterionReport,
}

fn check_matrix(cfg: &Config, out: &Path, command: &str) -> Result<Outcome> {
    let r = cfg.projection()?;
    let criterion = check_criterion(&r, cfg.check.radius);
    let result = MatrixResult {
        m: r.m(),
        n: r.n(),
        entries: r.entries().to_vec(),
        algebraic_tag: r.tag().label(),
        criterion: criterion.clone(),
    };
    report::write_report(out, command, cfg, &result)?;
    let min = format_f64(criterion.min_projected_norm);
    Ok(match &criterion.certificate {
        Certificate::ExactFail { k } => Outcome {
            code: EXIT_FAILURE,
            message: format!("criterion fails: R^T k = 0 at k = {k:?}"),
        },
        Certificate::NumericOnly if criterion.min_projected_norm == 0.0 => Outcome {
            code: EXIT_FAILURE,
            message: format!("criterion fails numerically at k = {:?}", criterion.worst_k),
        },
        Certificate::ExactPass => {
            Outcome::ok(format!("criterion holds (exact); min |R^T k| = {min} at k = {:?}", criterion.worst_k))
        }
        Certificate::NumericOnly => Outcome::ok(format!(
            "criterion not refuted (numeric only); min |R^T k| = {min} at k = {:?}",
            criterion.worst_k
        )),
    })
}

fn audit_model(cfg: &Config, out: &Path, command: &str) -> Result<Outcome> {
    let r = cfg.projection()?;
    let model = cfg.model(&r)?;
    let audit = audit_assumptions(&model, cfg.audit.samples, cfg.audit.seed);
    report::write_report(out, command, cfg, &audit)?;
    let failed: Vec<&str> = audit.checks.iter().filter(|c| !c.pass).map(|c| c.id.as_str()).collect();
    Ok(if audit.pass {
        Outcome::ok(format!("all {} assumption checks pass", audit.checks.len()))
    } else {
        Outcome { code: EXIT_FAILURE, message: format!("assumption checks failed: {}", failed.join(", ")) }
    })
}

fn ergodic(cfg: &Config, out: &Path, command: &str) -> Result<Outcome> {
    let r = cfg.projection()?;
    let section = cfg.ergodic.as_ref().ok_or_else(|| Error::Config("missing [ergodic] section".into()))?;
    let field = section.field.build(r.m())?;
    let rows: Vec<ErgodicRow> = ergodic_study(&field, &r, &section.times)?;
    report::write_report(out, command, cfg, &rows)?;
    let body: Vec<Vec<f64>> = rows.iter().map(|row| vec![row.t, row.error, row.bound]).collect();
    report::write_text(out, "ergodic.csv", &report::csv(&["t", "error", "bound"], &body))?;
    let last = rows.last().expect("times are non-empty");
    Ok(Outcome::ok(format!("ergodic error {} at T = {}", format_f64(last.error), last.t)))
}

#[derive(Serialize)]
struct CellResult {
    #[serde(flatten)]
    summary: crate::cell::CellSummary,
    divergence_defect: f64,
}

fn cell(cfg: &Config, out: &Path, command: &str) -> Result<Outcome> {
    let point = cfg.point.as_ref().ok_or_else(|| Error::Config("missing [point] section".into()))?;
    let r = cfg.projection()?;
    let model = cfg.model(&r)?;
    let solver = cfg.cell_solver(&r, model)?;
    let sol = solver.solve(&point.x, &point.xi, None)?;
    let result = CellResult { summary: sol.summary(point.spectrum), divergence_defect: sol.divergence_defect(&r) };
    report::write_report(out, command, cfg, &result)?;
    let rows: Vec<Vec<f64>> = sol
        .residual_history
        .iter()
        .zip(&sol.energy_history)
        .enumerate()
        .map(|(i, (res, en))| vec![i as f64, *res, *en])
        .collect();
    report::write_text(out, "cell_history.csv", &report::csv(&["iteration", "residual", "energy"], &rows))?;
    Ok(Outcome::ok(format!(
        "cell solved in {} iterations; sigma_hom = {:?}",
        sol.iterations,
        sol.hom_flux.iter().map(|v| format_f64(*v)).collect::<Vec<_>>()
    )))
}

#[derive(Serialize)]
struct MacroResult {
    elements: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    diagnostics: NewtonDiagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    cell_solves: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    effective_matrix: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    recomputed_residual: Option<f64>,
}

fn homogenize(cfg: &Config, out: &Path, command: &str) -> Result<Outcome> {
    let setup = cfg.study()?;
    let solver = cfg.cell_solver(&setup.projection, setup.model.clone())?;
    let law = HomogenizedLaw::new(solver)?;
    let sol = solve_homogenized(&setup.problem, &law)?;
    let result = MacroResult {
        elements: sol.mesh.element_count(),
        eta: None,
        diagnostics: sol.diagnostics.clone(),
        cell_solves: Some(law.cell_solves()),
        effective_matrix: law
            .effective_matrix()
            .map(|a| a.row_iter().map(|row| row.iter().copied().collect()).collect()),
        recomputed_residual: None,
    };
    report::write_report(out, command, cfg, &result)?;
    report::write_text(out, "solution.csv", &sol.to_csv())?;
    Ok(Outcome::ok(format!(
        "homogenized solve: {} Newton iterations, residual {}",
        sol.diagnostics.iterations,
        format_f64(sol.diagnostics.residual)
    )))
}

fn fine(cfg: &Config, out: &Path, command: &str) -> Result<Outcome> {
    let section = cfg.fine.as_ref().ok_or_else(|| Error::Config("missing [fine] section".into()))?;
    let setup = cfg.study()?;
    let sol = solve_fine(&setup.problem, &setup.projection, &setup.model, section.eta, section.refinement)?;
    let residual = fine_residual(&setup.problem, &setup.projection, &setup.model, &sol)?;
    let result = MacroResult {
        elements: sol.mesh.element_count(),
        eta: Some(section.eta),
        diagnostics: sol.diagnostics.clone(),
        cell_solves: None,
        effective_matrix: None,
        recomputed_residual: Some(residual),
    };
    report::write_report(out, command, cfg, &result)?;
    report::write_text(out, "solution.csv", &sol.to_csv())?;
    Ok(Outcome::ok(format!(
        "fine solve at eta = {}: {} elements, {} Newton iterations, residual {}",
        section.eta,
        result.elements,
        sol.diagnostics.iterations,
        format_f64(residual)
    )))
}

fn converge(cfg: &Config, out: &Path, command: &str) -> Result<Outcome> {
    let setup = cfg.study()?;
    let rep = convergence_study(&setup)?;
    report::write_report(out, command, cfg, &rep)?;
    let csv = rep.errors_csv();
    report::write_text(out, "errors.csv", &csv)?;
    if rep.records.len() >= 2 {
        report::write_text(out, "errors.svg", &render_svg(&Table::parse(&csv)?, true)?)?;
    }
    if let Some(failure) = &rep.failure {
        return Ok(Outcome {
            code: EXIT_FAILURE,
            message: format!("sweep stopped after {} of {} etas: {failure}", rep.records.len(), rep.eta_list.len()),
        });
    }
    let slope = |f: &Option<crate::harness::RateFit>| f.as_ref().map_or("n/a".to_string(), |f| format!("{:.3}", f.slope));
    Ok(Outcome::ok(format!(
        "{} etas; L2 rate {}, corrector rate {}",
        rep.records.len(),
        slope(&rep.rates.l2_error),
        slope(&rep.rates.corrector_error)
    )))
}

fn plot(args: &PlotArgs) -> Result<Outcome> {
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.input.display())))?;
    let table = Table::parse(&text)?;
    let log_log = match args.scale {
        Scale::Auto => table.is_convergence(),
        Scale::Linear => false,
        Scale::Log => true,
    };
    let svg = render_svg(&table, log_log)?;
    let target = args.out.clone().unwrap_or_else(|| args.input.with_extension("svg"));
    if let Some(dir) = target.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&target, svg)?;
    Ok(Outcome::ok(format!("wrote {}", target.display())))
}
