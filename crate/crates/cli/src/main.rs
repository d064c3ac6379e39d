//! `bpfem`: runs the convergence, sweep, comparison and oracle experiments
//! and writes CSV tables, VTK fields and a plotting script.

mod config;
mod output;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bpfem::experiments::{
    run_compare, run_convergence, run_custom, run_oracle_check, run_sweep, ExperimentConfig, ExperimentError, ExperimentId,
    FieldExport, MeshSource, ReactionModel,
};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{parse_levels, ConfigError, RawConfig};

#[derive(Debug, Parser)]
#[command(name = "bpfem", version, about = "Bound-preserving finite element experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Error norms and EOC over refinement levels (smooth-k1, smooth-k2, obtuse)
    Convergence(Common),
    /// Iteration counts over the diffusion values on one mesh (layers, discbc)
    Sweep(Common),
    /// Galerkin against bound-preserving solutions (interior-layer, anisotropic-nl)
    Compare(Common),
    /// Bound-preserving solution against the obstacle-problem oracle
    OracleCheck {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One bound-preserving solve of a problem described in a config file
    Solve(Common),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// experiment id, overriding `experiment.id`
    #[arg(long)]
    experiment: Option<String>,
    /// levels such as `3-6` or `3,4,5`
    #[arg(long)]
    levels: Option<String>,
    /// damping for every solve, including small diffusion values in sweeps
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    no_auto_damp: bool,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{failed} of {total} oracle cases failed")]
    OracleMismatch { failed: usize, total: usize },
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Experiment(ExperimentError::Config(_)) => "config",
            CliError::Experiment(ExperimentError::Unsupported { .. }) => "unsupported",
            CliError::Experiment(_) => "solve",
            CliError::Io { .. } => "io",
            CliError::OracleMismatch { .. } => "oracle-mismatch",
        }
    }

    fn to_json(&self) -> serde_json::Value {
        let mut err = json!({ "kind": self.kind(), "message": self.to_string() });
        if let CliError::Config(ConfigError { line: Some(l), .. }) = self {
            err["line"] = json!(l);
        }
        json!({ "error": err })
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Experiment(ExperimentError::Config(_)) => 2,
            _ => 1,
        }
    }
}

/// Writes files into the output directory, creating it on first use.
struct OutDir {
    dir: PathBuf,
}

impl OutDir {
    fn new(dir: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir.join("vtk")).map_err(|source| CliError::Io { path: dir.clone(), source })?;
        Ok(OutDir { dir })
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|source| CliError::Io { path, source })
    }

    fn fields(&self, fields: &[FieldExport]) -> Result<(), CliError> {
        for f in fields {
            self.write(&format!("vtk/{}.vtk", f.name), &output::vtk(f))?;
        }
        Ok(())
    }
}

/// Preset of the chosen experiment, then the config file, then the flags.
fn resolve(common: &Common, default: ExperimentId) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let raw = match &common.config {
        Some(path) => RawConfig::read(path)?,
        None => RawConfig::default(),
    };
    let id = match &common.experiment {
        Some(s) => s.parse().map_err(|_| CliError::Usage(format!("unknown experiment `{s}`")))?,
        None => raw.experiment_id()?.unwrap_or(default),
    };
    let mut cfg = ExperimentConfig::preset(id);
    raw.apply(&mut cfg)?;
    if let Some(levels) = &common.levels {
        cfg.levels = parse_levels(levels).map_err(CliError::Usage)?;
    }
    if let Some(omega) = common.omega {
        cfg.solver.omega = omega;
        cfg.small_eps_omega = omega;
    }
    if let Some(alpha) = common.alpha {
        cfg.solver.alpha = alpha;
    }
    if common.no_auto_damp {
        cfg.solver.auto_damp = false;
    }
    cfg.validate().map_err(|e| ConfigError::new(e.to_string()))?;
    let out = common
        .out
        .clone()
        .or_else(|| raw.output_dir())
        .unwrap_or_else(|| Path::new("out").join(id.as_str()));
    Ok((cfg, out))
}

fn list(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(", ")
}

/// Run parameters recorded next to the data.
fn meta(cfg: &ExperimentConfig, extra: &[(&str, String)]) -> String {
    let mut out = String::new();
    let mesh = match &cfg.mesh {
        MeshSource::CrissCross { n } => format!("criss-cross n={n}"),
        MeshSource::ObtuseLayer { level } => format!("obtuse level={level}"),
        MeshSource::File(p) => format!("file {}", p.display()),
    };
    let reaction = match cfg.reaction {
        ReactionModel::Linear { mu } => format!("linear mu={mu:e}"),
        ReactionModel::Power { p } => format!("power p={p:e}"),
    };
    let s = &cfg.solver;
    let rows = [
        ("experiment", cfg.id.to_string()),
        ("degree", cfg.degree.to_string()),
        ("levels", cfg.levels.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(", ")),
        ("mesh", mesh),
        ("eps", format!("{:e}", cfg.eps)),
        ("eps_values", list(&cfg.eps_values)),
        ("reaction", reaction),
        ("anisotropy", format!("{:e} {:e}", cfg.anisotropy.0, cfg.anisotropy.1)),
        ("theta", format!("{:e}", cfg.theta)),
        ("source", format!("{:e}", cfg.source)),
        ("marker_values", cfg.marker_values.iter().map(|(m, v)| format!("{m}:{v:e}")).collect::<Vec<_>>().join(", ")),
        ("bounds", format!("{:e} {:e}", cfg.lower, cfg.upper)),
        ("alpha", format!("{:e}", s.alpha)),
        ("omega", format!("{:e}", s.omega)),
        ("small_eps_omega", format!("{:e} for eps <= {:e}", cfg.small_eps_omega, cfg.small_eps_threshold)),
        ("tol", format!("{:e}", s.tol)),
        ("max_iter", s.max_iter.to_string()),
        ("auto_damp", s.auto_damp.to_string()),
    ];
    for (k, v) in rows.iter().chain(extra) {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

fn warn_unconverged(what: &str, converged: bool) {
    if !converged {
        eprintln!("{}", json!({ "warning": { "kind": "not-converged", "message": format!("{what} did not converge") } }));
    }
}

fn convergence(common: &Common) -> Result<(), CliError> {
    let (cfg, out) = resolve(common, ExperimentId::SmoothK1)?;
    let study = run_convergence(&cfg)?;
    for r in &study.records {
        warn_unconverged(&format!("level {}", r.level), r.converged);
    }
    let dir = OutDir::new(out)?;
    let csv = output::convergence_csv(&study);
    dir.write("convergence.csv", &csv)?;
    dir.fields(&study.fields)?;
    dir.write("meta.txt", &meta(&cfg, &[("all_admissible", study.all_admissible.to_string())]))?;
    dir.write("plot.py", &output::plot_script("convergence"))?;
    print!("{csv}");
    Ok(())
}

fn sweep(common: &Common) -> Result<(), CliError> {
    let (cfg, out) = resolve(common, ExperimentId::Layers)?;
    let study = run_sweep(&cfg)?;
    for r in &study.rows {
        warn_unconverged(&format!("eps = {:e}", r.eps), r.converged);
    }
    let dir = OutDir::new(out)?;
    let csv = output::sweep_csv(&study.rows);
    dir.write("sweep.csv", &csv)?;
    dir.fields(&study.fields)?;
    let n = study.n.map_or("-".into(), |n| n.to_string());
    dir.write("meta.txt", &meta(&cfg, &[("n", n), ("h_max", format!("{:e}", study.h))]))?;
    dir.write("plot.py", &output::plot_script("sweep"))?;
    print!("{csv}");
    Ok(())
}

fn compare(common: &Common) -> Result<(), CliError> {
    let (cfg, out) = resolve(common, ExperimentId::InteriorLayer)?;
    let study = run_compare(&cfg)?;
    for r in &study.rows {
        warn_unconverged(&format!("eps = {:e}", r.eps), r.converged);
    }
    let dir = OutDir::new(out)?;
    let csv = output::compare_csv(&study);
    dir.write("compare.csv", &csv)?;
    for r in &study.rows {
        dir.write(&format!("cross_section_eps{:e}.csv", r.eps), &output::cross_section_csv(&r.cross_section))?;
    }
    dir.fields(&study.fields)?;
    dir.write("meta.txt", &meta(&cfg, &[("h_max", format!("{:e}", study.h))]))?;
    dir.write("plot.py", &output::plot_script("compare"))?;
    print!("{csv}");
    Ok(())
}

fn solve(common: &Common) -> Result<(), CliError> {
    let (cfg, out) = resolve(common, ExperimentId::Custom)?;
    let run = run_custom(&cfg)?;
    warn_unconverged("solve", run.row.converged);
    let dir = OutDir::new(out)?;
    let csv = output::sweep_csv(std::slice::from_ref(&run.row));
    dir.write("solve.csv", &csv)?;
    dir.fields(std::slice::from_ref(&run.field))?;
    dir.write("meta.txt", &meta(&cfg, &[("h_max", format!("{:e}", run.h))]))?;
    print!("{csv}");
    Ok(())
}

fn oracle_check(out: Option<PathBuf>) -> Result<(), CliError> {
    let rows = run_oracle_check()?;
    let csv = output::oracle_csv(&rows);
    let dir = OutDir::new(out.unwrap_or_else(|| PathBuf::from("out/oracle-check")))?;
    dir.write("oracle_check.csv", &csv)?;
    print!("{csv}");
    let failed = rows.iter().filter(|r| !r.passed()).count();
    if failed > 0 {
        return Err(CliError::OracleMismatch { failed, total: rows.len() });
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Convergence(c) => convergence(&c),
        Command::Sweep(c) => sweep(&c),
        Command::Compare(c) => compare(&c),
        Command::OracleCheck { out } => oracle_check(out),
        Command::Solve(c) => solve(&c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.kind().to_string();
            let detail = e.render().to_string();
            eprintln!("{}", json!({ "error": { "kind": "usage", "message": message, "detail": detail.trim() } }));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
