//! `psdid` - generate benchmark pencils, run the eigensolver, verify the
//! convergence bounds of recorded runs.
//!
//! Exit codes: 0 success; 2 usage or input-format error; 3 a solve target hit
//! the iteration cap; 4 a solve target broke down; 5 a verified bound is
//! violated; 1 anything else.

mod manifest;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use psdid::driver::{ApplyMode, GlobalPrecond};
use psdid::problems::{
    assemble_oscillator, read_matrix_market, write_matrix_market, Discretization, OscillatorSpec,
};
use psdid::{solve_smallest, Error, Pencil, SolverConfig, Termination};

use manifest::{HistoryFile, Manifest};

#[derive(Parser)]
#[command(name = "psdid", version, about = "Sparse symmetric-definite eigensolver based on preconditioned steepest descent with implicit deflation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark pencil and write it as Matrix Market files.
    Generate(GenerateArgs),
    /// Compute the smallest eigenpairs of a pencil.
    Solve(SolveArgs),
    /// Verify convergence bounds on a recorded solve history.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DiscArg {
    Linear,
    Cubic,
    Pufe,
}

impl From<DiscArg> for Discretization {
    fn from(d: DiscArg) -> Self {
        match d {
            DiscArg::Linear => Discretization::LinearFe,
            DiscArg::Cubic => Discretization::CubicFe,
            DiscArg::Pufe => Discretization::Pufe,
        }
    }
}

#[derive(Args)]
struct ProblemArgs {
    /// Built-in problem family.
    #[arg(long, default_value = "oscillator")]
    problem: String,
    /// Finite element discretization.
    #[arg(long, value_enum)]
    disc: Option<DiscArg>,
    /// Element count(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    elems: Vec<usize>,
    /// Domain half-width.
    #[arg(long, default_value_t = 10.0)]
    half_width: f64,
    /// Gaussian decay rate of the PUFE enrichment.
    #[arg(long, default_value_t = 0.4)]
    decay: f64,
    /// Support half-width of the PUFE enrichment.
    #[arg(long, default_value_t = 5.0)]
    support: f64,
}

impl ProblemArgs {
    fn specs(&self) -> Result<Vec<OscillatorSpec>, Error> {
        if self.problem != "oscillator" {
            return Err(Error::usage(format!(
                "unknown problem '{}' (available: oscillator)",
                self.problem
            )));
        }
        let disc = self
            .disc
            .ok_or_else(|| Error::usage("--disc is required with --problem"))?;
        if self.elems.is_empty() {
            return Err(Error::usage("--elems is required with --problem"));
        }
        Ok(self
            .elems
            .iter()
            .map(|&n_elem| {
                let mut spec = OscillatorSpec::new(disc.into(), n_elem);
                spec.half_width = self.half_width;
                spec.enrichment_decay = self.decay;
                spec.enrichment_support = self.support;
                spec
            })
            .collect())
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads across independent generation tasks.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct SolveArgs {
    /// Matrix Market files of the pencil (H then S); omit when generating
    /// the problem inline with --problem/--disc/--elems.
    #[arg(value_name = "H.mtx", requires = "s_path")]
    h_path: Option<PathBuf>,
    #[arg(value_name = "S.mtx")]
    s_path: Option<PathBuf>,
    #[command(flatten)]
    problem: ProblemArgs,
    /// Number of wanted eigenpairs.
    #[arg(long, default_value_t = 1)]
    nev: usize,
    /// Extra Ritz values carried for gap estimation.
    #[arg(long, default_value_t = 4)]
    ell: usize,
    /// Relative-residual convergence tolerance.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Residual threshold of the localization test.
    #[arg(long, default_value_t = 0.1)]
    tau1: f64,
    /// Outer iteration cap per target.
    #[arg(long, default_value_t = 500)]
    max_outer: usize,
    /// RNG seed for the initial vectors.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pre-localization preconditioner: auto | identity | fixed:<sigma>.
    #[arg(long, default_value = "auto")]
    precond: String,
    /// Disable the locally accelerated preconditioner switch.
    #[arg(long)]
    no_local_accel: bool,
    /// MINRES iteration cap of the inner solves.
    #[arg(long, default_value_t = 200)]
    minres_cap: usize,
    /// Apply preconditioners exactly through the dense oracle (analysis runs).
    #[arg(long)]
    exact_precond: bool,
    /// Cross-check accepted eigenvalues against the dense oracle.
    #[arg(long)]
    oracle_checks: bool,
    /// Dense oracle dimension cap (overrides PSDID_ORACLE_CAP).
    #[arg(long)]
    oracle_cap: Option<usize>,
    /// Zero wallclock and timestamps so outputs are byte-reproducible.
    #[arg(long)]
    deterministic: bool,
    /// History output (JSON).
    #[arg(long, default_value = "history.json")]
    out_json: PathBuf,
    /// History output (CSV).
    #[arg(long, default_value = "history.csv")]
    out_csv: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Matrix Market files of the pencil the history belongs to.
    #[arg(value_name = "H.mtx")]
    h_path: PathBuf,
    #[arg(value_name = "S.mtx")]
    s_path: PathBuf,
    /// History JSON produced by `psdid solve`.
    #[arg(long)]
    history: PathBuf,
    /// Verification report output (JSON).
    #[arg(long, default_value = "verify_report.json")]
    report: PathBuf,
    /// Dense oracle dimension cap (overrides PSDID_ORACLE_CAP).
    #[arg(long)]
    oracle_cap: Option<usize>,
}

fn oracle_cap(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var("PSDID_ORACLE_CAP")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(psdid::DEFAULT_ORACLE_CAP)
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Usage(_) | Error::Parse { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Verify(args) => cmd_verify(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn file_stem(spec: &OscillatorSpec, multi: bool) -> String {
    if !multi {
        return String::new();
    }
    let disc = match spec.discretization {
        Discretization::LinearFe => "linear",
        Discretization::CubicFe => "cubic",
        Discretization::Pufe => "pufe",
    };
    format!("oscillator-{disc}-{:04}-", spec.n_elem)
}

fn generate_one(spec: &OscillatorSpec, out: &Path, multi: bool) -> Result<usize, Error> {
    let pencil = assemble_oscillator(spec)?;
    let stem = file_stem(spec, multi);
    let h_path = out.join(format!("{stem}H.mtx"));
    let s_path = out.join(format!("{stem}S.mtx"));
    write_matrix_market(pencil.h(), &h_path)?;
    write_matrix_market(pencil.s(), &s_path)?;
    let sidecar = serde_json::json!({
        "problem": "oscillator",
        "spec": spec,
        "n": pencil.n(),
        "s_regularized": pencil.s_regularized(),
        "files": { "h": h_path.file_name().unwrap().to_str(), "s": s_path.file_name().unwrap().to_str() },
    });
    std::fs::write(
        out.join(format!("{stem}pencil.json")),
        serde_json::to_string_pretty(&sidecar).expect("sidecar serializes"),
    )?;
    println!(
        "wrote {} and {} (n = {})",
        h_path.display(),
        s_path.display(),
        pencil.n()
    );
    Ok(pencil.n())
}

fn cmd_generate(args: GenerateArgs) -> Result<ExitCode, Error> {
    let specs = args.problem.specs()?;
    for spec in &specs {
        spec.validate()?;
    }
    std::fs::create_dir_all(&args.out)?;
    let multi = specs.len() > 1;
    if args.jobs <= 1 || specs.len() == 1 {
        for spec in &specs {
            generate_one(spec, &args.out, multi)?;
        }
    } else {
        let out = args.out.clone();
        let results: Vec<Result<usize, Error>> = std::thread::scope(|scope| {
            let handles: Vec<_> = specs
                .chunks(specs.len().div_ceil(args.jobs))
                .map(|chunk| {
                    let out = out.clone();
                    scope.spawn(move || {
                        chunk
                            .iter()
                            .map(|spec| generate_one(spec, &out, true))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("generation worker panicked"))
                .collect()
        });
        for r in results {
            r?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

struct LoadedPencil {
    pencil: Pencil,
    inputs: Vec<manifest::InputRecord>,
}

fn load_pencil(
    h_path: &Option<PathBuf>,
    s_path: &Option<PathBuf>,
    problem: &ProblemArgs,
) -> Result<LoadedPencil, Error> {
    match (h_path, s_path) {
        (Some(h), Some(s)) => {
            let hm = read_matrix_market(h)?;
            let sm = read_matrix_market(s)?;
            let inputs = vec![
                manifest::InputRecord::from_file(h)?,
                manifest::InputRecord::from_file(s)?,
            ];
            Ok(LoadedPencil {
                pencil: Pencil::new(hm, sm)?,
                inputs,
            })
        }
        (None, None) => {
            let specs = problem.specs()?;
            if specs.len() != 1 {
                return Err(Error::usage("inline solve takes exactly one --elems value"));
            }
            let spec = &specs[0];
            let pencil = assemble_oscillator(spec)?;
            let inputs = vec![manifest::InputRecord::generated(spec, &pencil)?];
            Ok(LoadedPencil { pencil, inputs })
        }
        _ => Err(Error::usage("supply both H and S files, or neither")),
    }
}

fn parse_precond(arg: &str) -> Result<GlobalPrecond, Error> {
    match arg {
        "auto" => Ok(GlobalPrecond::ShiftInvertAuto),
        "identity" => Ok(GlobalPrecond::Identity),
        other => match other.strip_prefix("fixed:") {
            Some(v) => v
                .parse()
                .map(GlobalPrecond::ShiftInvert)
                .map_err(|_| Error::usage(format!("invalid shift in --precond {other}"))),
            None => Err(Error::usage(format!(
                "unknown preconditioner '{other}' (auto | identity | fixed:<sigma>)"
            ))),
        },
    }
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode, Error> {
    let loaded = load_pencil(&args.h_path, &args.s_path, &args.problem)?;
    let cfg = SolverConfig {
        nev: args.nev,
        extra_ritz: args.ell,
        eig_tolerance: args.tol,
        localization_res_threshold: args.tau1,
        max_outer_iterations: args.max_outer,
        rng_seed: args.seed,
        oracle_checks: args.oracle_checks,
        global_precond: parse_precond(&args.precond)?,
        local_accel: !args.no_local_accel,
        inner: psdid::MinresConfig {
            max_iterations: args.minres_cap,
            ..Default::default()
        },
        apply_mode: if args.exact_precond {
            ApplyMode::ExactDense
        } else {
            ApplyMode::Minres
        },
        oracle_cap: oracle_cap(args.oracle_cap),
        deterministic: args.deterministic,
    };

    let mut man = Manifest::new("solve", &cfg, loaded.inputs, args.deterministic);
    let (pairs, histories) = solve_smallest(&loaded.pencil, &cfg)?;
    man.finish(args.deterministic);

    let file = HistoryFile {
        manifest: man,
        targets: histories,
    };
    std::fs::write(
        &args.out_json,
        serde_json::to_string_pretty(&file).expect("history serializes"),
    )?;
    std::fs::write(&args.out_csv, psdid::history::to_csv(&file.targets))?;

    println!("{:>3} {:>22} {:>12} {:>6} {:>13} termination", "i", "value", "residual", "iters", "localized_at");
    for h in &file.targets {
        let loc = h
            .iterates
            .iter()
            .find(|s| s.localized)
            .map(|s| s.j.to_string())
            .unwrap_or_else(|| "-".into());
        println!(
            "{:>3} {:>22.15e} {:>12.3e} {:>6} {:>13} {:?}",
            h.i,
            h.final_summary.value,
            h.final_summary.residual,
            h.iterates.len() - 1,
            loc,
            h.termination
        );
        for w in &h.warnings {
            eprintln!("    warning (target {}): {w}", h.i);
        }
    }
    let _ = pairs;

    let worst = file
        .targets
        .iter()
        .map(|h| match h.termination {
            Termination::Converged => 0u8,
            Termination::MaxIterations => 3,
            Termination::Breakdown => 4,
        })
        .max()
        .unwrap_or(0);
    Ok(ExitCode::from(worst))
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode, Error> {
    let hm = read_matrix_market(&args.h_path)?;
    let sm = read_matrix_market(&args.s_path)?;
    let pencil = Pencil::new(hm, sm)?;
    let text = std::fs::read_to_string(&args.history)?;
    let file: HistoryFile = serde_json::from_str(&text)
        .map_err(|e| Error::usage(format!("invalid history file: {e}")))?;
    let cap = oracle_cap(args.oracle_cap);
    let outcome = report::verify(&pencil, &file, cap)?;
    std::fs::write(
        &args.report,
        serde_json::to_string_pretty(&outcome.report).expect("report serializes"),
    )?;
    if let Some(first) = &outcome.first_violation {
        eprintln!("bound violation: {first}");
        println!("FAIL: {} violation(s); report at {}", outcome.violations, args.report.display());
        return Ok(ExitCode::from(5));
    }
    println!(
        "OK: all applicable bounds hold; report at {}",
        args.report.display()
    );
    Ok(ExitCode::SUCCESS)
}
