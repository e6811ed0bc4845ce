use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use af_cli::output::{manifest_path, write_manifest, Manifest};
use af_cli::{resolve, run, worker_count, CliError, Experiment, RawConfig, RawMinimize};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "af",
    version,
    about = "Numerical experiments on the average-field functional"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimise at one coupling and write one CSV row.
    Minimize(Flags),
    /// Minimise over a list of couplings and fit e(1,1).
    Sweep(Flags),
    /// Thomas-Fermi chemical potential, energy and support radius.
    Tf(Flags),
    /// Vortex-lattice trial state and its energy factorisation.
    Trial(Flags),
    /// Run the invariant battery; exits nonzero on any failure.
    Verify(Flags),
    /// Compare a saved trapped minimiser with the Thomas-Fermi profile.
    Lda(Flags),
}

/// Flags shared by every subcommand. Each one overrides the config file.
#[derive(Debug, Args)]
struct Flags {
    /// TOML config document.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    beta: Option<f64>,
    /// Comma-separated couplings.
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
    /// dirichlet, neumann or free.
    #[arg(long)]
    bc: Option<String>,
    /// none, harmonic, harmonic:a,b, power:s or homogeneous:s,a,b.
    #[arg(long)]
    potential: Option<String>,
    /// Nodes per side.
    #[arg(long)]
    grid: Option<usize>,
    /// Box width and height for untrapped problems.
    #[arg(long, num_args = 2, value_names = ["WIDTH", "HEIGHT"])]
    extent: Option<Vec<f64>>,
    #[arg(long)]
    e11: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Seed each β of a sweep with the previous minimiser as an extra start.
    #[arg(long)]
    warm_start: bool,
    /// Coarse-graining cell exponent.
    #[arg(long)]
    nu: Option<f64>,
    /// Coarse-graining threshold exponent.
    #[arg(long)]
    mu_thr: Option<f64>,
    #[arg(long)]
    tol_energy: Option<f64>,
    #[arg(long)]
    tol_residual: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    /// constant, random-phase or vortex-seeded.
    #[arg(long)]
    init: Option<String>,
    /// cg or descent.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    /// CSV output; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// AFLD snapshot of the minimiser.
    #[arg(long)]
    save_field: Option<PathBuf>,
    /// AFLD snapshot to analyse.
    #[arg(long)]
    field: Option<PathBuf>,
}

impl Flags {
    fn overrides(&self, experiment: Experiment) -> Result<RawConfig, CliError> {
        let extent = match self.extent.as_deref() {
            Some([w, h]) => Some([*w, *h]),
            Some(_) => return Err(CliError::config("extent", "needs a width and a height")),
            None => None,
        };
        let minimize = RawMinimize {
            max_iters: self.max_iters,
            tol_energy: self.tol_energy,
            tol_residual: self.tol_residual,
            init: self.init.clone(),
            restarts: self.restarts,
            sigma: self.sigma,
            method: self.method.clone(),
            ..Default::default()
        };
        Ok(RawConfig {
            experiment: Some(experiment.name().to_string()),
            beta: self.beta,
            betas: self.betas.clone(),
            bc: self.bc.clone(),
            potential: self.potential.clone(),
            grid: self.grid,
            extent,
            e11: self.e11,
            seed: self.seed,
            threads: self.threads,
            warm_start: self.warm_start.then_some(true),
            nu: self.nu,
            mu_thr: self.mu_thr,
            out: self.out.clone(),
            save_field: self.save_field.clone(),
            field: self.field.clone(),
            minimize: (minimize != RawMinimize::default()).then_some(minimize),
        })
    }
}

fn load(flags: &Flags, experiment: Experiment) -> Result<RawConfig, CliError> {
    let base = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            toml::from_str::<RawConfig>(&text).map_err(|e| CliError::Document(format!("{}: {e}", path.display())))?
        }
        None => RawConfig::default(),
    };
    let top = flags.overrides(experiment)?;
    // a --beta flag replaces a betas list from the document, and vice versa
    let mut base = base;
    if top.beta.is_some() {
        base.betas = None;
    }
    if top.betas.is_some() {
        base.beta = None;
    }
    Ok(base.overlay(&top))
}

fn report(err: &CliError) {
    eprintln!("af: error: {err}");
    let mut source = std::error::Error::source(err);
    while let Some(s) = source {
        eprintln!("  caused by: {s}");
        source = s.source();
    }
}

fn execute(experiment: Experiment, flags: &Flags) -> Result<i32, CliError> {
    let raw = load(flags, experiment)?;
    let config = resolve(raw)?;
    let env = std::env::var("AF_THREADS").ok();
    let threads = worker_count(&config, env.as_deref())?;
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    let clock = Instant::now();
    let result = run(&config, threads);

    if let Some(out) = &config.out {
        let (status, outputs, summary) = match &result {
            Ok(o) => (
                if o.status == 0 {
                    "ok".to_string()
                } else {
                    "partial".to_string()
                },
                o.outputs.clone(),
                o.summary.clone(),
            ),
            Err(e) => (format!("error: {e}"), Vec::new(), None),
        };
        let manifest = Manifest {
            tool: "af",
            version: env!("CARGO_PKG_VERSION"),
            core_version: af_core::VERSION,
            experiment: experiment.name().to_string(),
            config: serde_json::to_value(&config.raw).unwrap_or(serde_json::Value::Null),
            seed: config.seed,
            threads,
            started_unix: started,
            wall_seconds: clock.elapsed().as_secs_f64(),
            outputs,
            status,
            summary,
        };
        let path = manifest_path(out);
        if let Err(e) = write_manifest(&path, &manifest) {
            report(&e);
            if result.is_ok() {
                return Err(e);
            }
        }
    }

    let outcome = result?;
    for note in &outcome.notes {
        eprintln!("{note}");
    }
    Ok(outcome.status)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, flags) = match &cli.command {
        Command::Minimize(f) => (Experiment::Minimize, f),
        Command::Sweep(f) => (Experiment::Sweep, f),
        Command::Tf(f) => (Experiment::Tf, f),
        Command::Trial(f) => (Experiment::Trial, f),
        Command::Verify(f) => (Experiment::Verify, f),
        Command::Lda(f) => (Experiment::Lda, f),
    };
    match execute(experiment, flags) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            report(&e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
