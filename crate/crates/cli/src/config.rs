use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use af_core::{BoundaryCondition, InitStrategy, Method, MinimizeSettings, PotentialSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_GRID: usize = 128;
pub const MAX_GRID: usize = 4096;
pub const DEFAULT_NU: f64 = 0.25;
pub const DEFAULT_MU_THR: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    Minimize,
    Sweep,
    Tf,
    Trial,
    Verify,
    Lda,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Minimize => "minimize",
            Experiment::Sweep => "sweep",
            Experiment::Tf => "tf",
            Experiment::Trial => "trial",
            Experiment::Verify => "verify",
            Experiment::Lda => "lda",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "minimize" => Ok(Experiment::Minimize),
            "sweep" => Ok(Experiment::Sweep),
            "tf" => Ok(Experiment::Tf),
            "trial" => Ok(Experiment::Trial),
            "verify" => Ok(Experiment::Verify),
            "lda" => Ok(Experiment::Lda),
            other => Err(CliError::config(
                "experiment",
                format!("unknown experiment {other:?}; expected minimize, sweep, tf, trial, verify or lda"),
            )),
        }
    }
}

/// Minimiser settings as written in a config document. Every field is
/// optional and falls back to [`MinimizeSettings::default`].
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawMinimize {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shrink: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub armijo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
}

/// A config document before defaults and validation.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bc: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potential: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extent: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e11: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warm_start: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_thr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub save_field: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minimize: Option<RawMinimize>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($field:ident),+) => {
        $(if $top.$field.is_some() { $base.$field = $top.$field.clone(); })+
    };
}

impl RawConfig {
    /// Fields set in `top` replace those of `self`.
    pub fn overlay(mut self, top: &RawConfig) -> RawConfig {
        overlay!(
            self, top, experiment, beta, betas, bc, potential, grid, extent, e11, seed, threads, warm_start, nu,
            mu_thr, out, save_field, field
        );
        if let Some(m) = &top.minimize {
            let mut base = self.minimize.take().unwrap_or_default();
            overlay!(
                base,
                m,
                max_iters,
                initial_step,
                shrink,
                armijo,
                tol_energy,
                tol_residual,
                init,
                restarts,
                sigma,
                method
            );
            self.minimize = Some(base);
        }
        self
    }
}

/// A validated experiment description with defaults applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub betas: Vec<f64>,
    pub bc: BoundaryCondition,
    pub potential: PotentialSpec,
    pub grid: usize,
    /// Domain extent for untrapped problems.
    pub extent: [f64; 2],
    pub e11: f64,
    pub seed: u64,
    pub threads: Option<usize>,
    pub warm_start: bool,
    pub nu: f64,
    pub mu_thr: f64,
    pub settings: MinimizeSettings,
    pub out: Option<PathBuf>,
    pub save_field: Option<PathBuf>,
    pub field: Option<PathBuf>,
    /// The document this config was resolved from.
    pub raw: RawConfig,
}

impl ExperimentConfig {
    pub fn beta(&self) -> f64 {
        self.betas[0]
    }
}

/// Parses a TOML document into a validated config.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Document(e.to_string()))?;
    resolve(raw)
}

fn check_finite(key: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::config(key, format!("must be finite, got {v}")))
    }
}

fn resolve_settings(raw: &RawMinimize, seed: u64) -> Result<MinimizeSettings, CliError> {
    let d = MinimizeSettings::default();
    let init = raw
        .init
        .as_deref()
        .map(InitStrategy::from_str)
        .transpose()
        .map_err(|e| CliError::config("minimize.init", e.to_string()))?;
    let method = match raw.method.as_deref() {
        Some(m) => Method::from_str(m).map_err(|e| CliError::config("minimize.method", e.to_string()))?,
        None => d.method,
    };
    let s = MinimizeSettings {
        max_iters: raw.max_iters.unwrap_or(d.max_iters),
        initial_step: raw.initial_step.unwrap_or(d.initial_step),
        shrink: raw.shrink.unwrap_or(d.shrink),
        armijo: raw.armijo.unwrap_or(d.armijo),
        tol_energy: raw.tol_energy.unwrap_or(d.tol_energy),
        tol_residual: raw.tol_residual.unwrap_or(d.tol_residual),
        init,
        seed,
        restarts: raw.restarts.unwrap_or(d.restarts),
        sigma: raw.sigma.or(d.sigma),
        method,
    };
    let named = |key: &str, ok: bool, msg: String| {
        if ok {
            Ok(())
        } else {
            Err(CliError::config(key, msg))
        }
    };
    named(
        "minimize.tol_energy",
        s.tol_energy > 0.0 && s.tol_energy.is_finite(),
        format!("must be positive, got {}", s.tol_energy),
    )?;
    named(
        "minimize.tol_residual",
        s.tol_residual > 0.0 && s.tol_residual.is_finite(),
        format!("must be positive, got {}", s.tol_residual),
    )?;
    named(
        "minimize.shrink",
        s.shrink > 0.0 && s.shrink < 1.0,
        format!("must lie in (0, 1), got {}", s.shrink),
    )?;
    named(
        "minimize.armijo",
        s.armijo > 0.0 && s.armijo < 1.0,
        format!("must lie in (0, 1), got {}", s.armijo),
    )?;
    named(
        "minimize.initial_step",
        s.initial_step > 0.0 && s.initial_step.is_finite(),
        format!("must be positive, got {}", s.initial_step),
    )?;
    named("minimize.restarts", s.restarts >= 1, "must be at least 1".into())?;
    if let Some(sigma) = s.sigma {
        named(
            "minimize.sigma",
            sigma > 0.0 && sigma.is_finite(),
            format!("must be positive, got {sigma}"),
        )?;
    }
    Ok(s)
}

/// Applies defaults and checks every value against the preconditions of the
/// module it feeds.
pub fn resolve(raw: RawConfig) -> Result<ExperimentConfig, CliError> {
    let experiment: Experiment = raw
        .experiment
        .as_deref()
        .ok_or_else(|| {
            CliError::config(
                "experiment",
                "missing; expected one of minimize, sweep, tf, trial, verify, lda",
            )
        })?
        .parse()?;

    let bc = match raw.bc.as_deref() {
        Some(b) => BoundaryCondition::from_str(b).map_err(|e| CliError::config("bc", e.to_string()))?,
        None => BoundaryCondition::Dirichlet,
    };
    let default_potential = if experiment == Experiment::Lda {
        "harmonic"
    } else {
        "none"
    };
    let potential = PotentialSpec::from_str(raw.potential.as_deref().unwrap_or(default_potential))
        .map_err(|e| CliError::config("potential", e.to_string()))?;
    let grid = raw.grid.unwrap_or(DEFAULT_GRID);
    if !(af_core::grid::MIN_NODES..=MAX_GRID).contains(&grid) {
        return Err(CliError::config(
            "grid",
            format!("must lie in [{}, {MAX_GRID}], got {grid}", af_core::grid::MIN_NODES),
        ));
    }
    let extent = raw.extent.unwrap_or([1.0, 1.0]);
    if !extent.iter().all(|e| *e > 0.0 && e.is_finite()) {
        return Err(CliError::config("extent", format!("must be positive, got {extent:?}")));
    }
    let e11 = check_finite("e11", raw.e11.unwrap_or(2.0 * std::f64::consts::PI))?;
    if e11 <= 0.0 {
        return Err(CliError::config("e11", format!("must be positive, got {e11}")));
    }
    let nu = check_finite("nu", raw.nu.unwrap_or(DEFAULT_NU))?;
    if !(nu > 0.0 && nu < 0.5) {
        return Err(CliError::config(
            "nu",
            format!("coarse graining needs 0 < ν < 1/2, got {nu}"),
        ));
    }
    let mu_thr = check_finite("mu_thr", raw.mu_thr.unwrap_or(DEFAULT_MU_THR))?;
    if !(mu_thr > 0.0 && mu_thr < 1.0 - 2.0 * nu) {
        return Err(CliError::config(
            "mu_thr",
            format!(
                "coarse graining needs 0 < μ < 1 − 2ν = {}, got {mu_thr}",
                1.0 - 2.0 * nu
            ),
        ));
    }
    if raw.threads == Some(0) {
        return Err(CliError::config("threads", "must be at least 1"));
    }

    let mut betas = match (&raw.beta, &raw.betas) {
        (Some(_), Some(_)) => return Err(CliError::config("beta", "give either beta or betas, not both")),
        (Some(b), None) => vec![*b],
        (None, Some(bs)) => bs.clone(),
        (None, None) => Vec::new(),
    };
    for b in &betas {
        check_finite("betas", *b)?;
    }
    match experiment {
        Experiment::Sweep => {
            if betas.is_empty() {
                return Err(CliError::config("betas", "a sweep needs a nonempty beta list"));
            }
            if betas.iter().any(|b| *b <= 0.0) || betas.windows(2).any(|w| w[0] >= w[1]) {
                return Err(CliError::config("betas", "must be positive and strictly ascending"));
            }
        }
        Experiment::Minimize | Experiment::Trial | Experiment::Lda => {
            let key = if raw.betas.is_some() { "betas" } else { "beta" };
            if betas.len() != 1 {
                return Err(CliError::config(key, format!("{experiment} needs exactly one beta")));
            }
            let b = betas[0];
            let ok = match experiment {
                Experiment::Minimize => b >= 0.0,
                Experiment::Trial => b >= 1.0,
                _ => b > 0.0,
            };
            if !ok {
                let need = match experiment {
                    Experiment::Minimize => "β ≥ 0",
                    Experiment::Trial => "β ≥ 1",
                    _ => "β > 0",
                };
                return Err(CliError::config(key, format!("{experiment} needs {need}, got {b}")));
            }
        }
        Experiment::Tf => {
            if betas.is_empty() {
                betas = vec![1.0];
            }
            if betas.iter().any(|b| *b <= 0.0) {
                return Err(CliError::config("betas", "must be positive"));
            }
        }
        Experiment::Verify => {}
    }
    if experiment == Experiment::Lda {
        if raw.field.is_none() {
            return Err(CliError::config("field", "lda needs the path of a saved field"));
        }
        if potential.is_zero() {
            return Err(CliError::config("potential", "lda needs a trapping potential"));
        }
    }

    let seed = raw.seed.unwrap_or(0);
    let settings = resolve_settings(&raw.minimize.clone().unwrap_or_default(), seed)?;
    Ok(ExperimentConfig {
        experiment,
        betas,
        bc,
        potential,
        grid,
        extent,
        e11,
        seed,
        threads: raw.threads,
        warm_start: raw.warm_start.unwrap_or(false),
        nu,
        mu_thr,
        settings,
        out: raw.out.clone(),
        save_field: raw.save_field.clone(),
        field: raw.field.clone(),
        raw,
    })
}

/// Worker cap: the config value, then `AF_THREADS`, then the machine.
pub fn worker_count(config: &ExperimentConfig, env: Option<&str>) -> Result<usize, CliError> {
    let machine = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let cap = match env {
        Some(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n >= 1)
            .ok_or_else(|| CliError::config("AF_THREADS", format!("must be a positive integer, got {v:?}")))?,
        None => machine,
    };
    Ok(config.threads.map_or(cap, |t| t.min(cap)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_sweep_gets_defaults() {
        let c = parse_config("experiment = \"sweep\"\nbetas = [10, 20]\n").unwrap();
        assert_eq!(c.experiment, Experiment::Sweep);
        assert_eq!(c.betas, vec![10.0, 20.0]);
        assert_eq!(c.bc, BoundaryCondition::Dirichlet);
        assert_eq!(c.potential, PotentialSpec::Zero);
        assert_eq!(c.grid, DEFAULT_GRID);
        assert_eq!(c.e11, 2.0 * std::f64::consts::PI);
        assert_eq!(c.settings, MinimizeSettings::default());
        assert_eq!((c.nu, c.mu_thr), (DEFAULT_NU, DEFAULT_MU_THR));
    }

    #[test]
    fn rejects_periodic_boundary() {
        let err = parse_config("experiment = \"sweep\"\nbetas = [10]\nbc = \"periodic\"\n").unwrap_err();
        assert!(matches!(err, CliError::Config { ref key, .. } if key == "bc"), "{err}");
    }

    #[test]
    fn rejects_nu_outside_range() {
        let err = parse_config("experiment = \"verify\"\nnu = 0.6\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("nu") && msg.contains("0 < ν < 1/2"), "{msg}");
        assert!(parse_config("experiment = \"verify\"\nnu = 0.25\nmu_thr = 0.6\n").is_err());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let err = parse_config("experiment = \"sweep\"\nbetas = [10]\ncolour = 3\n").unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
        let err = parse_config("experiment = \"sweep\"\nbetas = [10]\n[minimize]\nspeed = 1\n").unwrap_err();
        assert!(err.to_string().contains("speed"), "{err}");
        let err = parse_config("experiment = \"sweep\"\nbetas = []\n").unwrap_err();
        assert!(err.to_string().contains("betas"));
        let err = parse_config("experiment = \"sweep\"\nbetas = [20, 10]\n").unwrap_err();
        assert!(err.to_string().contains("betas"));
        let err = parse_config("experiment = \"minimize\"\nbeta = 1\n[minimize]\nshrink = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("minimize.shrink"));
        let err = parse_config("experiment = \"minimize\"\n").unwrap_err();
        assert!(err.to_string().contains("beta"));
        let err = parse_config("experiment = \"lda\"\nbeta = 10\n").unwrap_err();
        assert!(err.to_string().contains("field"));
        let err = parse_config("experiment = \"dance\"\n").unwrap_err();
        assert!(err.to_string().contains("experiment"));
        let err = parse_config("experiment = \"minimize\"\nbeta = 1\ngrid = 4\n").unwrap_err();
        assert!(err.to_string().contains("grid"));
        let err = parse_config("experiment = \"minimize\"\nbeta = 1\npotential = \"harmonic:0,1\"\n").unwrap_err();
        assert!(err.to_string().contains("potential"));
        assert!(matches!(
            parse_config("experiment = ").unwrap_err(),
            CliError::Document(_)
        ));
    }

    #[test]
    fn flags_overlay_document() {
        let base: RawConfig = toml::from_str(
            "experiment = \"sweep\"\nbetas = [10, 20]\ngrid = 64\n[minimize]\nmax_iters = 10\nrestarts = 2\n",
        )
        .unwrap();
        let top = RawConfig {
            grid: Some(32),
            minimize: Some(RawMinimize {
                max_iters: Some(5),
                ..Default::default()
            }),
            ..Default::default()
        };
        let c = resolve(base.overlay(&top)).unwrap();
        assert_eq!(c.grid, 32);
        assert_eq!(c.settings.max_iters, 5);
        assert_eq!(c.settings.restarts, 2);
        assert_eq!(c.betas, vec![10.0, 20.0]);
    }

    #[test]
    fn worker_cap() {
        let mut c = parse_config("experiment = \"verify\"\n").unwrap();
        assert_eq!(worker_count(&c, Some("3")).unwrap(), 3);
        c.threads = Some(2);
        assert_eq!(worker_count(&c, Some("3")).unwrap(), 2);
        assert_eq!(worker_count(&c, Some("1")).unwrap(), 1);
        assert!(worker_count(&c, Some("zero")).is_err());
        assert!(worker_count(&c, Some("0")).is_err());
    }
}
