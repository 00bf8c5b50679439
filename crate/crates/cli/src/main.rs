use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use clickcraft::config::{parse_grid, Clicks};
use clickcraft::{execute, manifest, CliError, Format, Overrides, Protocol, RunConfig, THREADS_ENV};

/// Quantum state engineering with click-counting detectors.
#[derive(Parser, Debug)]
#[command(name = "clickcraft", version, about)]
struct Cli {
    /// Protocol to run.
    #[arg(value_enum)]
    protocol: Protocol,
    /// JSON run configuration ("schema": 1).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output file format.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// P-function grid as re0,re1,im0,im1,nre,nim.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// Also write manifest.json with the resolved parameters.
    #[arg(long)]
    manifest: bool,
    /// Quantum efficiency of every detector.
    #[arg(long)]
    eta: Option<f64>,
    /// Click counts: `all`, `k`, `k,k,...`, or `k1,.../k2,...` for amplify.
    #[arg(long)]
    k: Option<String>,
    /// Diode count(s); a list is scanned by errorbound.
    #[arg(long = "N", value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Beam-splitter transmission amplitude.
    #[arg(long)]
    t: Option<f64>,
    /// Squeezer gain μ = cosh ξ.
    #[arg(long)]
    mu: Option<f64>,
    /// Fock-space cutoff.
    #[arg(long)]
    cutoff: Option<usize>,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::schema(format!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
    // Fails only if a pool already exists, which cannot happen this early.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| CliError::Write { path: path.clone(), source })?;
    Ok(path)
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::empty(),
    };
    let overrides = Overrides {
        eta: cli.eta,
        n: cli.n.clone(),
        k: cli.k.as_deref().map(str::parse::<Clicks>).transpose()?,
        t: cli.t,
        mu: cli.mu,
        cutoff: cli.cutoff,
        grid: cli.grid.as_deref().map(parse_grid).transpose()?,
        format: cli.format,
        out: cli.out.clone(),
    };
    cfg.apply(&overrides);
    log::info!("running {} with {:?}", cli.protocol, cfg);

    let mut artifacts = execute(cli.protocol, &cfg)?;
    if cli.manifest {
        let m = manifest(cli.protocol, &cfg, &artifacts)?;
        artifacts.push(m);
    }
    let dir = cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|source| CliError::Write { path: dir.clone(), source })?;
    for a in &artifacts {
        println!("{}", write(&dir, &a.name, &a.contents)?.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("clickcraft: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
