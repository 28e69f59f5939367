//! `singmap`: command-line entry points over the `singmap` library.

mod commands;
mod config;
mod io;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{RenormChoice, RunConfig, SourceKind};
use io::{digest_file, to_json, write_bytes, RunHeader, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    Other = 1,
    Config = 2,
    Solver = 3,
    Fit = 4,
    Invariant = 5,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Core(singmap::Error),
}

impl CliError {
    fn config(e: singmap::Error) -> Self {
        Self::Config(e.to_string())
    }

    fn exit_code(&self) -> ExitCode {
        use singmap::Error as E;
        match self {
            Self::Config(_) => ExitCode::Config,
            Self::Io(_) => ExitCode::Other,
            Self::Core(e) => match e {
                E::Domain(_) | E::InvalidParameter(_) => ExitCode::Config,
                E::NonConvergence { .. } | E::SingularJacobian(_) | E::Continuation { .. } | E::NonFinite(_) => {
                    ExitCode::Solver
                }
                E::FitUnstable(_) | E::Eigen(_) => ExitCode::Fit,
                E::BoundBreach { .. } | E::Hypothesis(_) => ExitCode::Invariant,
                E::Io(_) | E::Json(_) => ExitCode::Other,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Io(m) => write!(f, "i/o error: {m}"),
            Self::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<singmap::Error> for CliError {
    fn from(e: singmap::Error) -> Self {
        Self::Core(e)
    }
}

#[derive(Parser, Debug)]
#[command(name = "singmap", version, about = "Singular axisymmetric harmonic maps into the hyperbolic plane")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Residual norms of a closed-form state over a grid ladder and the fitted order.
    Residual(Overrides),
    /// Dirichlet solve with closed-form (optionally perturbed) end data.
    Solve(Overrides),
    /// Twist or linearized spectrum on the sphere.
    Spectrum(Overrides),
    /// Fit the tangent map at the puncture.
    TangentFit(Overrides),
    /// Fit the far-field expansion.
    InfinityFit(Overrides),
    /// Twist potential, conformal factor and rod defects.
    Reconstruct(Overrides),
    /// Near-horizon limit along an ε ladder.
    Nhg(Overrides),
    /// Re-check the digests recorded in DIR/manifest.json.
    Verify {
        #[arg(long)]
        out: PathBuf,
    },
}

/// Flags override the config file.
#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    source: Option<SourceKind>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    #[arg(long, value_enum)]
    renormalizer: Option<RenormChoice>,
    #[arg(long, allow_hyphen_values = true)]
    t_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t_max: Option<f64>,
    #[arg(long)]
    n_t: Option<usize>,
    #[arg(long)]
    n_theta: Option<usize>,
    /// Comma-separated square grid sizes for `residual`.
    #[arg(long, value_delimiter = ',')]
    ladder: Option<Vec<usize>>,
    /// Comma-separated ε values for `nhg`.
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    #[arg(long)]
    rbar: Option<f64>,
    /// Tangent-fit window `LO,HI` in t.
    #[arg(long, value_delimiter = ',', num_args = 2, allow_hyphen_values = true)]
    window: Option<Vec<f64>>,
    #[arg(long)]
    min_r2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    perturb: Option<f64>,
    #[arg(long)]
    max_newton_iters: Option<usize>,
    #[arg(long)]
    continuation_steps: Option<usize>,
    #[arg(long)]
    twist: bool,
    #[arg(short = 'k', long)]
    k: Option<usize>,
    #[arg(long)]
    azimuthal: Option<u32>,
}

impl Overrides {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $($dst:ident).+),* $(,)?) => {
                $(if let Some(x) = self.$flag.clone() { c.$($dst).+ = x; })*
            };
        }
        set!(
            out => out, seed => seed, source => source.kind, m => source.m, a => source.a, b => source.b,
            renormalizer => renormalizer, t_min => grid.t_min, t_max => grid.t_max, n_t => grid.n_t,
            n_theta => grid.n_theta, ladder => ladder, epsilons => epsilons, rbar => rbar, min_r2 => fit.min_r2,
            perturb => perturb.amplitude, max_newton_iters => solver.max_newton_iters,
            continuation_steps => solver.continuation_steps, k => spectrum.k, azimuthal => spectrum.azimuthal,
        );
        if let Some(n) = self.n_theta {
            c.spectrum.n_theta = n;
        }
        if let Some(p) = &self.input {
            c.input = Some(p.clone());
        }
        if let Some(w) = &self.window {
            c.fit.window = Some((w[0], w[1]));
        }
        if self.twist {
            c.spectrum.twist = true;
        }
        c.validate()?;
        Ok(c)
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("SINGMAP_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("SINGMAP_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

/// Runs one command and persists report, fields and manifest.
fn run(name: &str, ov: &Overrides, f: fn(&RunConfig) -> Result<commands::Outcome, CliError>) -> ExitCode {
    let start = Instant::now();
    let cfg = match ov.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("singmap {name}: {e}");
            return e.exit_code();
        }
    };
    let header = RunHeader::new(name, &cfg);
    let outcome = f(&cfg).unwrap_or_else(|e| commands::Outcome {
        results: serde_json::Value::Null,
        files: Vec::new(),
        inputs: cfg.input.iter().cloned().collect(),
        exit: e.exit_code(),
        message: e.to_string(),
    });
    let code = outcome.exit;
    match persist(&cfg.out, header, outcome, start) {
        Ok(msg) => {
            if code == ExitCode::Ok {
                println!("singmap {name}: {msg}");
            } else {
                eprintln!("singmap {name}: {msg}");
            }
            code
        }
        Err(e) => {
            eprintln!("singmap {name}: {e}");
            e.exit_code()
        }
    }
}

fn persist(out: &Path, header: RunHeader, o: commands::Outcome, start: Instant) -> Result<String, CliError> {
    let report = json!({
        "manifest": header,
        "status": { "exit_code": o.exit as i32, "message": o.message },
        "results": o.results,
    });
    let mut outputs = Vec::new();
    let report_path = out.join("report.json");
    write_bytes(&report_path, &to_json(&report)?)?;
    outputs.push(digest_file(out, &report_path)?);
    for (rel, bytes) in &o.files {
        let p = out.join(rel);
        write_bytes(&p, bytes)?;
        outputs.push(digest_file(out, &p)?);
    }
    let inputs = o.inputs.iter().map(|p| digest_file(out, p)).collect::<Result<Vec<_>, _>>()?;
    let manifest = RunManifest {
        header,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        exit_code: o.exit as i32,
        inputs,
        outputs,
    };
    write_bytes(&out.join("manifest.json"), &to_json(&manifest)?)?;
    Ok(format!("{} (report in {})", o.message, out.display()))
}

fn verify(out: &Path) -> ExitCode {
    match io::verify_dir(out) {
        Ok(entries) => {
            let bad: Vec<_> = entries.iter().filter(|e| !e.ok).collect();
            for e in &bad {
                eprintln!("mismatch {}: {}", e.path, e.detail);
            }
            if bad.is_empty() {
                println!("singmap verify: {} files ok", entries.len());
                ExitCode::Ok
            } else {
                ExitCode::Invariant
            }
        }
        Err(e) => {
            eprintln!("singmap verify: {e}");
            e.exit_code()
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("singmap: {e}");
        std::process::exit(e.exit_code() as i32);
    }
    let code = match &cli.command {
        Command::Residual(o) => run("residual", o, commands::residual_cmd),
        Command::Solve(o) => run("solve", o, commands::solve_cmd),
        Command::Spectrum(o) => run("spectrum", o, commands::spectrum_cmd),
        Command::TangentFit(o) => run("tangent-fit", o, commands::tangent_fit_cmd),
        Command::InfinityFit(o) => run("infinity-fit", o, commands::infinity_fit_cmd),
        Command::Reconstruct(o) => run("reconstruct", o, commands::reconstruct_cmd),
        Command::Nhg(o) => run("nhg", o, commands::nhg_cmd),
        Command::Verify { out } => verify(out),
    };
    std::process::exit(code as i32);
}
