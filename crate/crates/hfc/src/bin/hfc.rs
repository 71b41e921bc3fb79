//! Thin command-line front end: loads a problem file, runs the named suite,
//! prints one line per check and optionally emits report files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use hfc::config::QuadProfile;
use hfc::contour::QuadOverrides;
use hfc::report::{emit, render, run_suite, EmitFormat, ProblemFile};

const VERBS: &[&str] = &[
    "analyze",
    "fc",
    "fc-constant",
    "angle-profile",
    "phi-check",
    "integral-check",
    "sqfn",
    "quad-check",
    "reproduce",
    "schatten",
    "dilate",
    "transfer",
    "multiplier",
    "group-equiv",
    "verify-all",
];

#[derive(Parser)]
#[command(
    name = "hfc",
    about = "Joint holomorphic functional calculus of commuting sectorial matrices",
    after_help = "Verbs: analyze, fc, fc-constant, angle-profile, phi-check, integral-check,\n\
                  sqfn, quad-check, reproduce, schatten, dilate, transfer, multiplier,\n\
                  group-equiv, verify-all.\n\
                  HFC_QUAD_PROFILE selects quadrature presets {fast, default, strict}."
)]
struct Cli {
    /// Suite verb to run.
    verb: String,

    /// Problem file (JSON). Built-in demo inputs are used when omitted.
    #[arg(long)]
    problem: Option<PathBuf>,

    /// Output directory for report files.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Report format: json, csv or plotdata.
    #[arg(long, default_value = "json")]
    format: String,

    /// Worker threads for internal parallelism.
    #[arg(long)]
    jobs: Option<usize>,

    /// Seed override (takes precedence over the problem file).
    #[arg(long)]
    seed: Option<u64>,

    /// Contour angles, one per coordinate (comma separated).
    #[arg(long, value_delimiter = ',')]
    nu: Option<Vec<f64>>,

    /// Contour quadrature nodes per decade.
    #[arg(long)]
    nodes_per_decade: Option<usize>,

    /// Radial truncation overrides.
    #[arg(long)]
    rmin: Option<f64>,
    #[arg(long)]
    rmax: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // keep BLAS single threaded: results independent of the thread pool
    std::env::set_var("OPENBLAS_NUM_THREADS", "1");
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> hfc::Result<ExitCode> {
    if !VERBS.contains(&cli.verb.as_str()) {
        return Err(hfc::HfcError::SchemaError(format!(
            "unknown verb {:?}; expected one of {VERBS:?}",
            cli.verb
        )));
    }
    let mut problem = match &cli.problem {
        Some(path) => ProblemFile::from_path(path)?,
        None => ProblemFile::from_str(&format!(
            r#"{{"suite": "{}", "seed": 0}}"#,
            cli.verb
        ))?,
    };
    problem.suite = cli.verb.clone();
    if let Some(seed) = cli.seed {
        problem.seed = Some(seed);
    }
    let overrides = QuadOverrides {
        nu: cli.nu.clone(),
        nodes_per_decade: cli.nodes_per_decade,
        r_min: cli.rmin,
        r_max: cli.rmax,
    };
    let profile = QuadProfile::from_env();
    let format: EmitFormat = cli.format.parse()?;
    let report = run_suite(problem, overrides, profile)?;
    for check in &report.checks {
        let status = if check.pass { "PASS" } else { "FAIL" };
        let target = check
            .target
            .map(|t| format!(" target={t:.6e}"))
            .unwrap_or_default();
        let tol = check
            .tolerance
            .map(|t| format!(" tol={t:.1e}"))
            .unwrap_or_default();
        let note = check
            .note
            .as_ref()
            .map(|n| format!(" ({n})"))
            .unwrap_or_default();
        println!(
            "[{status}] {} value={:.6e}{target}{tol}{note}",
            check.name, check.value
        );
    }
    if let Some(dir) = &cli.out {
        let path = emit(&report, format, dir)?;
        println!("report written to {}", path.display());
    } else if format != EmitFormat::Json {
        // non-default formats print to stdout when no directory is given
        print!("{}", render(&report, format));
    }
    Ok(ExitCode::from(report.exit_code() as u8))
}
