//! Configuration-driven studies on top of `rtmixed`: single solves,
//! convergence tables, fixed-step stability sweeps and embedding studies.

pub mod config;
pub mod study;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

pub use config::{Example, Mode, StudyConfig, TauRule};
pub use study::{run_study, summary, to_csv, StudyResult, CSV_HEADER};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rtmixed", version, about = "Mixed finite element studies for nonlinear parabolic equations")]
pub struct Cli {
    /// Study configuration (INI).
    #[arg(long)]
    pub config: PathBuf,

    /// Override the mode given in the file.
    #[arg(long)]
    pub mode: Option<String>,

    /// CSV output path. Without it (and without `csv` in the file) the table
    /// goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Worker threads for assembly and norms.
    #[arg(long, env = "RTMIXED_THREADS")]
    pub threads: Option<usize>,

    /// Write a VTK snapshot every this many steps.
    #[arg(long)]
    pub vtk_stride: Option<usize>,

    /// Run the levels of a study concurrently.
    #[arg(long)]
    pub parallel: bool,

    /// Record wall-clock times in the CSV.
    #[arg(long)]
    pub timing: bool,
}

/// Parse arguments, run the study and return the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            code
        }
    }
}

fn config_error(msg: impl Into<String>) -> (i32, String) {
    (EXIT_CONFIG, msg.into())
}

fn execute(cli: &Cli) -> Result<(), (i32, String)> {
    let mut config = StudyConfig::load(&cli.config).map_err(config_error)?;
    if let Some(mode) = &cli.mode {
        config.mode = mode.parse().map_err(config_error)?;
    }
    if cli.vtk_stride.is_some() {
        config.vtk_stride = cli.vtk_stride;
    }
    config.parallel |= cli.parallel;
    config.timing |= cli.timing;
    config.validate().map_err(config_error)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(config_error("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| config_error(format!("cannot start {n} threads: {e}")))?;
    }

    eprintln!(
        "{} study: {}, {}D, RT_{}, M = {:?}",
        cli.mode.as_deref().unwrap_or(mode_name(config.mode)),
        config.example.name(),
        config.dim,
        config.r,
        config.m_list
    );
    let result = run_study(&config).map_err(|e| {
        let code = if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_CONFIG };
        (code, e.to_string())
    })?;
    let csv = to_csv(&result, config.timing);
    match cli.out.as_ref().or(config.output_path.as_ref()) {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| config_error(format!("cannot create {}: {e}", dir.display())))?;
            }
            std::fs::write(path, &csv).map_err(|e| config_error(format!("cannot write {}: {e}", path.display())))?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    eprint!("{}", summary(&result));

    let failures = result.chain_failures();
    if !failures.is_empty() {
        return Err((EXIT_NUMERICAL, format!("chain inequality violated for (M, tau) in {failures:?}")));
    }
    Ok(())
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Solve => "solve",
        Mode::Convergence => "convergence",
        Mode::Stability => "stability",
        Mode::Embedding => "embedding",
    }
}
