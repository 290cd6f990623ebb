use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dirichlet_einstein::casestudies::nonexistence_threshold;
use dirichlet_einstein::S1S2Config;
use dirichlet_einstein_cli::config::{Engine, Format};
use dirichlet_einstein_cli::run::{output_dir, run_s1s2, trace_m, uniform_grid, write_diagnostics};
use dirichlet_einstein_cli::{parse_config, run, CliError, ProblemConfig, ResultRecord};
use rayon::prelude::*;

#[derive(Parser)]
#[command(
    name = "dirichlet-einstein",
    version,
    about = "Einstein metrics on G/H x [0, 1] with prescribed boundary metrics"
)]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG takes precedence.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the problems described by one or more config files.
    Solve(SolveArgs),
    /// Solve a flat-fibre problem given on the command line.
    SolveTorus(TorusArgs),
    /// Re-check a result file against the configuration that produced it.
    Verify(VerifyArgs),
    /// S^1 x S^2 example: scan the fibre size, or solve one case with --f2-bar.
    ScanS1s2(ScanArgs),
    /// Sample the torus matching function m(lambda) as CSV.
    TraceM(TraceArgs),
}

#[derive(Args)]
struct OutputArgs {
    /// Output directory [env: DIRICHLET_EINSTEIN_OUTPUT_DIR; config output.dir; default .]
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Output formats (repeatable); replaces the configured list.
    #[arg(long = "format", value_enum)]
    formats: Vec<Format>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(required = true)]
    configs: Vec<PathBuf>,
    /// Number of config files solved concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// File stem of the outputs (single config only).
    #[arg(long)]
    stem: Option<String>,
    #[arg(long, value_enum)]
    engine: Option<Engine>,
    /// Grid intervals [default 256].
    #[arg(long)]
    intervals: Option<usize>,
    /// Residual acceptance tolerance [default 1e-8].
    #[arg(long)]
    residual_tol: Option<f64>,
    /// Continuation Newton tolerance [default 1e-12].
    #[arg(long)]
    newton_tol: Option<f64>,
    /// Shooting Newton tolerance [default 1e-10].
    #[arg(long)]
    shooting_tol: Option<f64>,
    /// Interval length for shooting [default 1].
    #[arg(long)]
    length: Option<f64>,
    /// Shooting starts [default 32].
    #[arg(long)]
    starts: Option<usize>,
    /// Skip the shooting polish after continuation.
    #[arg(long)]
    no_polish: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct TorusArgs {
    /// f_i(0), comma separated.
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    a: Vec<f64>,
    /// f_i(1), comma separated.
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    b: Vec<f64>,
    /// Module dimensions [default: all 1].
    #[arg(long, value_delimiter = ',')]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 256)]
    intervals: usize,
    #[arg(long, default_value_t = 1e-8)]
    residual_tol: f64,
    #[arg(long, default_value = "torus")]
    stem: String,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// Result file (.csv or .jsonl).
    result: PathBuf,
    /// Configuration the result was produced from.
    #[arg(long)]
    config: PathBuf,
    /// Tolerance for the re-check [default: the configured residual_tol].
    #[arg(long)]
    residual_tol: Option<f64>,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long, default_value_t = 1.0)]
    mu_q: f64,
    #[arg(long, default_value_t = 1.0)]
    length: f64,
    /// f_1(0), f_1(1).
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1.0])]
    f1_ends: Vec<f64>,
    /// Solve this single case and write a result record.
    #[arg(long)]
    f2_bar: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    from: f64,
    #[arg(long, default_value_t = 1.0)]
    to: f64,
    #[arg(long, default_value_t = 50)]
    samples: usize,
    #[arg(long, default_value_t = 256)]
    intervals: usize,
    #[arg(long, default_value_t = 1e-8)]
    residual_tol: f64,
    /// Scan table destination [default: stdout].
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value = "s1s2")]
    stem: String,
    #[command(flatten)]
    record: OutputArgs,
}

#[derive(Args)]
struct TraceArgs {
    /// Total log-ratio D = sum_i d_i ln(b_i / a_i).
    #[arg(long, allow_negative_numbers = true)]
    total: f64,
    /// Fibre dimension d.
    #[arg(long)]
    dim: usize,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Destination [default: stdout].
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let code = match cli.command {
        Command::Solve(args) => solve(args),
        Command::SolveTorus(args) => report(solve_torus(args)),
        Command::Verify(args) => report(verify(args)),
        Command::ScanS1s2(args) => report(scan(args)),
        Command::TraceM(args) => report(trace(args).map(|_| 0)),
    };
    ExitCode::from(code)
}

fn report(res: Result<u8, CliError>) -> u8 {
    res.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    })
}

/// Worst of several exit codes: 1 outranks 2 outranks 0.
fn worst(codes: impl IntoIterator<Item = u8>) -> u8 {
    codes
        .into_iter()
        .max_by_key(|&c| match c {
            0 => 0,
            2 => 1,
            _ => 2,
        })
        .unwrap_or(0)
}

fn verdict_code(rec: &ResultRecord) -> u8 {
    if rec.residual.verdict.passed() {
        0
    } else {
        1
    }
}

fn solve(args: SolveArgs) -> u8 {
    if args.stem.is_some() && args.configs.len() > 1 {
        eprintln!("error: --stem needs a single config file");
        return 1;
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(args.jobs.max(1)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let results: Vec<_> = pool.install(|| args.configs.par_iter().map(|p| solve_one(p, &args)).collect());
    let mut codes = Vec::new();
    for (path, res) in args.configs.iter().zip(results) {
        match res {
            Ok((rec, files)) => {
                println!("{}: {}", path.display(), rec.describe());
                for f in files {
                    println!("  wrote {}", f.display());
                }
                codes.push(verdict_code(&rec));
            }
            Err(e) => {
                eprintln!("{}: error: {e}", path.display());
                codes.push(e.exit_code());
            }
        }
    }
    worst(codes)
}

fn load(path: &Path) -> Result<ProblemConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(parse_config(&text)?)
}

fn solve_one(path: &Path, args: &SolveArgs) -> Result<(ResultRecord, Vec<PathBuf>), CliError> {
    let mut cfg = load(path)?;
    let s = &mut cfg.solver;
    if let Some(v) = args.engine {
        s.engine = v;
    }
    if let Some(v) = args.intervals {
        s.intervals = v;
    }
    if let Some(v) = args.residual_tol {
        s.residual_tol = v;
    }
    if let Some(v) = args.newton_tol {
        s.newton_tol = v;
    }
    if let Some(v) = args.shooting_tol {
        s.shooting_tol = v;
    }
    if let Some(v) = args.length {
        s.length = v;
    }
    if let Some(v) = args.starts {
        s.starts = v;
    }
    if args.no_polish {
        s.polish = false;
    }
    if !args.output.formats.is_empty() {
        cfg.output.formats = args.output.formats.clone();
    }
    cfg.validate()?;
    let out = run(&cfg)?;
    let dir = output_dir(args.output.output_dir.as_deref(), cfg.output.dir.as_deref());
    let stem = args
        .stem
        .clone()
        .or_else(|| cfg.output.stem.clone())
        .or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "result".into());
    let mut files = out.record.emit(&dir, &stem, &cfg.output.formats)?;
    if cfg.output.diagnostics && !out.diagnostics.is_empty() {
        let p = dir.join(format!("{stem}.steps.jsonl"));
        write_diagnostics(&p, &out.diagnostics)?;
        files.push(p);
    }
    Ok((out.record, files))
}

fn formats_or_default(f: &[Format]) -> Vec<Format> {
    if f.is_empty() {
        vec![Format::Csv, Format::Jsonl]
    } else {
        f.to_vec()
    }
}

fn solve_torus(args: TorusArgs) -> Result<u8, CliError> {
    let n = args.a.len();
    let dims = if args.dims.is_empty() {
        vec![1; n]
    } else {
        args.dims.clone()
    };
    let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
    let dims_list = dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ");
    let text = format!(
        "[space]\ndims = [{dims_list}]\n[boundary]\na = [{}]\nb = [{}]\n[solver]\nengine = \"torus\"\nintervals = {}\nresidual_tol = {:?}\n",
        list(&args.a),
        list(&args.b),
        args.intervals,
        args.residual_tol
    );
    let cfg = parse_config(&text)?;
    let out = run(&cfg)?;
    let dir = output_dir(args.output.output_dir.as_deref(), None);
    let files = out
        .record
        .emit(&dir, &args.stem, &formats_or_default(&args.output.formats))?;
    println!("{}", out.record.describe());
    for f in files {
        println!("  wrote {}", f.display());
    }
    Ok(verdict_code(&out.record))
}

fn verify(args: VerifyArgs) -> Result<u8, CliError> {
    let cfg = load(&args.config)?;
    let rec = ResultRecord::read(&args.result)?;
    if rec.n() != cfg.n() {
        return Err(CliError::Record(format!(
            "record has {} summands, config has {}",
            rec.n(),
            cfg.n()
        )));
    }
    let tol = args.residual_tol.unwrap_or(cfg.solver.residual_tol);
    let report = rec.recheck(&cfg.space()?, tol)?;
    let stored = rec.residual.verdict;
    let verdict = report.verdict;
    println!(
        "{}: stored {:?}, recomputed {:?} (max residual {:.3e}, tolerance {tol:e})",
        args.result.display(),
        stored,
        verdict,
        report.max_residual()
    );
    Ok(if verdict.passed() && stored.passed() { 0 } else { 1 })
}

fn writer(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(fs::File::create(p).map_err(|e| CliError::io(p, e))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn scan(args: ScanArgs) -> Result<u8, CliError> {
    let [e0, e1] = args.f1_ends[..] else {
        return Err(CliError::Usage("--f1-ends takes exactly two values".into()));
    };
    let ends = (e0, e1);
    if let Some(f2) = args.f2_bar {
        let cfg = S1S2Config::new(args.mu_q, f2, ends, args.length)?;
        let rec = run_s1s2(&cfg, args.intervals, args.residual_tol)?;
        let dir = output_dir(args.record.output_dir.as_deref(), None);
        let files = rec.emit(&dir, &args.stem, &formats_or_default(&args.record.formats))?;
        println!("{}", rec.describe());
        for f in files {
            println!("  wrote {}", f.display());
        }
        return Ok(verdict_code(&rec));
    }
    if !(args.from > 0.0 && args.to > args.from) || args.samples < 2 {
        return Err(CliError::Usage(
            "scan needs 0 < from < to and at least 2 samples".into(),
        ));
    }
    let threshold = nonexistence_threshold(args.mu_q, args.length)?;
    eprintln!("threshold f2_bar* = {threshold}");
    let mut w = csv::Writer::from_writer(writer(args.output.as_deref())?);
    w.write_record(["f2_bar", "phase", "exists", "lambda"])?;
    for k in 0..args.samples {
        let f2 = args.from + (args.to - args.from) * k as f64 / (args.samples - 1) as f64;
        let cfg = S1S2Config::new(args.mu_q, f2, ends, args.length)?;
        let exists = dirichlet_einstein::casestudies::s1s2_solve(&cfg, &uniform_grid(2))?.exists();
        let lambda = if exists {
            (args.mu_q / (f2 * f2)).to_string()
        } else {
            String::new()
        };
        w.write_record([f2.to_string(), cfg.phase().to_string(), exists.to_string(), lambda])?;
    }
    w.flush()?;
    Ok(0)
}

fn trace(args: TraceArgs) -> Result<(), CliError> {
    let pts = trace_m(args.total, args.dim, args.samples)?;
    let mut w = csv::Writer::from_writer(writer(args.output.as_deref())?);
    w.write_record(["lambda", "m"])?;
    for (l, m) in pts {
        w.write_record([l.to_string(), m.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
