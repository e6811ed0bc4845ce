use std::path::{Path, PathBuf};

use af_core::{
    build_kernel, bump_profile, detect_vortices, estimate_e11_rows, experiment_grid, factorization_check, lda_compare,
    load_snapshot, multistart, packed_side, phase_winding, save_snapshot, seed_region, sweep, tf_minimizer,
    tf_minimizer_at, tf_uniform, trial_geometry, vortex_lattice_trial, ComplexField, E11Fit, Functional, Grid2D,
    SweepOptions, SweepRow, TfProfile,
};
use serde_json::json;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{CliError, Context, EXIT_FAILURE, EXIT_OK};
use crate::output::{create_output, fmt_f64, sibling, Table};
use crate::verify;

pub const ROW_HEADER: [&str; 14] = [
    "beta",
    "bc",
    "grid",
    "energy",
    "energy_per_beta",
    "kinetic",
    "potential",
    "cross",
    "quartic",
    "mu",
    "residual",
    "iterations",
    "vortex_count",
    "seed",
];

pub fn row_cells(row: &SweepRow) -> Vec<String> {
    let e = &row.energy;
    vec![
        fmt_f64(row.beta),
        row.bc.name().to_string(),
        format!("{}x{}", row.grid[0], row.grid[1]),
        fmt_f64(e.total),
        fmt_f64(row.energy_per_beta),
        fmt_f64(e.kinetic),
        fmt_f64(e.potential),
        fmt_f64(e.cross),
        fmt_f64(e.quartic),
        fmt_f64(row.mu),
        fmt_f64(row.residual),
        row.iterations.to_string(),
        row.vortex_count.to_string(),
        row.seed.to_string(),
    ]
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub status: i32,
    pub outputs: Vec<PathBuf>,
    /// Human-readable lines for standard error.
    pub notes: Vec<String>,
    pub summary: Option<serde_json::Value>,
}

impl RunOutcome {
    fn ok(outputs: Vec<PathBuf>) -> Self {
        Self {
            status: EXIT_OK,
            outputs,
            notes: Vec::new(),
            summary: None,
        }
    }
}

/// Runs one experiment with at most `threads` workers.
pub fn run(config: &ExperimentConfig, threads: usize) -> Result<RunOutcome, CliError> {
    match config.experiment {
        Experiment::Minimize => run_minimize(config),
        Experiment::Sweep => run_sweep(config, threads),
        Experiment::Tf => run_tf(config),
        Experiment::Trial => run_trial(config),
        Experiment::Verify => run_verify(config),
        Experiment::Lda => run_lda(config),
    }
}

fn grid_for(config: &ExperimentConfig, beta: f64) -> af_core::Result<Grid2D> {
    experiment_grid(
        &config.potential,
        beta,
        config.grid,
        config.bc,
        config.extent,
        config.e11,
    )
}

/// Checks that a snapshot path can be created before the work starts.
fn reserve(path: Option<&Path>) -> Result<(), CliError> {
    if let Some(p) = path {
        create_output(p)?;
    }
    Ok(())
}

fn save_field(u: &ComplexField, path: &Path) -> Result<(), CliError> {
    save_snapshot(u, path).context(|| format!("saving field to {}", path.display()))
}

fn run_minimize(config: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    let beta = config.beta();
    let mut table = Table::open(config.out.as_deref(), &ROW_HEADER)?;
    reserve(config.save_field.as_deref())?;
    let what = || format!("minimize at beta = {beta}");
    let grid = grid_for(config, beta).context(what)?;
    let kernel = build_kernel(&grid).context(what)?;
    let f = Functional::new(&kernel, beta, config.potential).context(what)?;
    let region = seed_region(&grid, &config.potential, beta, config.e11);
    let (u, report) = multistart(&f, &config.settings, &region, &[]).context(what)?;
    let row = SweepRow::from_report(beta, &grid, &u, &report);
    table.row(&row_cells(&row))?;
    let mut outputs: Vec<PathBuf> = table.finish()?.into_iter().collect();
    if let Some(p) = &config.save_field {
        save_field(&u, p)?;
        outputs.push(p.clone());
    }
    let mut outcome = RunOutcome::ok(outputs);
    if !row.converged {
        outcome.notes.push(format!(
            "warning: not converged after {} iterations (residual {:.3e})",
            row.iterations, row.residual
        ));
    }
    outcome.summary = Some(json!({ "converged": row.converged, "energy": row.energy.total }));
    Ok(outcome)
}

/// Snapshot path for one β of a sweep: `run.afld` becomes `run.beta-10.afld`.
pub fn sweep_field_path(base: &Path, beta: f64) -> PathBuf {
    let ext = base
        .extension()
        .map(|e| e.to_string_lossy().into_owned())
        .unwrap_or_else(|| "afld".into());
    sibling(base, &format!("beta-{beta}"), &ext)
}

fn fit_note(fit: &E11Fit) -> String {
    let slopes: Vec<String> = fit.slopes.iter().map(|s| format!("{s:.6}")).collect();
    format!(
        "e11 estimate {:.6} (intercept {:.6}, slopes [{}], rms {:.3e}, {} points)",
        fit.estimate,
        fit.intercept,
        slopes.join(", "),
        fit.rms,
        fit.points
    )
}

fn run_sweep(config: &ExperimentConfig, threads: usize) -> Result<RunOutcome, CliError> {
    let mut table = Table::open(config.out.as_deref(), &ROW_HEADER)?;
    if let Some(base) = &config.save_field {
        for beta in &config.betas {
            reserve(Some(&sweep_field_path(base, *beta)))?;
        }
    }
    let options = SweepOptions {
        warm_start: config.warm_start,
        threads,
    };
    let factory = |beta: f64| grid_for(config, beta);
    let outcomes = sweep(
        &config.betas,
        &config.potential,
        &factory,
        &config.settings,
        options,
        config.e11,
    )
    .context(|| "sweep".into())?;

    let mut outputs = Vec::new();
    let mut notes = Vec::new();
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for o in &outcomes {
        match &o.result {
            Ok((row, u)) => {
                table.row(&row_cells(row))?;
                if !row.converged {
                    notes.push(format!(
                        "warning: beta = {} not converged (residual {:.3e})",
                        o.beta, row.residual
                    ));
                }
                if let Some(base) = &config.save_field {
                    let p = sweep_field_path(base, o.beta);
                    save_field(u, &p)?;
                    outputs.push(p);
                }
                rows.push(row.clone());
            }
            Err(e) => {
                notes.push(format!("error: beta = {} failed: {e}", o.beta));
                failed.push(o.beta);
            }
        }
    }
    if let Some(p) = table.finish()? {
        outputs.insert(0, p);
    }

    let mut summary = json!({ "rows": rows.len(), "failed_betas": failed });
    if config.potential.is_zero() && rows.len() >= 3 {
        let area = config.extent[0] * config.extent[1];
        match estimate_e11_rows(&rows, area) {
            Ok(fit) => {
                notes.push(fit_note(&fit));
                summary["e11_estimate"] = json!(fit.estimate);
                summary["e11_intercept"] = json!(fit.intercept);
                summary["e11_slopes"] = json!(fit.slopes);
                summary["e11_rms"] = json!(fit.rms);
            }
            Err(e) => notes.push(format!("e11 fit unavailable: {e}")),
        }
    }
    Ok(RunOutcome {
        status: if failed.is_empty() { EXIT_OK } else { EXIT_FAILURE },
        outputs,
        notes,
        summary: Some(summary),
    })
}

pub const TF_HEADER: [&str; 6] = ["s", "e11", "beta", "lambda_tf", "energy", "support_radius"];

fn tf_profile(config: &ExperimentConfig, beta: f64) -> af_core::Result<TfProfile> {
    if config.potential.is_zero() {
        let grid = grid_for(config, beta)?;
        tf_uniform(grid.domain(), config.e11, beta)
    } else {
        tf_minimizer_at(&config.potential, config.e11, beta)
    }
}

fn run_tf(config: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    let mut table = Table::open(config.out.as_deref(), &TF_HEADER)?;
    for &beta in &config.betas {
        let tf = tf_profile(config, beta).context(|| format!("Thomas-Fermi profile at beta = {beta}"))?;
        table.row(&[
            tf.degree().map(fmt_f64).unwrap_or_default(),
            fmt_f64(tf.e11),
            fmt_f64(tf.beta),
            fmt_f64(tf.lambda),
            fmt_f64(tf.energy),
            fmt_f64(tf.support_radius),
        ])?;
    }
    Ok(RunOutcome::ok(table.finish()?.into_iter().collect()))
}

pub const TRIAL_HEADER: [&str; 9] = [
    "beta",
    "grid",
    "side",
    "vortices",
    "lhs",
    "rhs",
    "rel_error",
    "energy_per_beta",
    "cells_per_ball",
];
pub const BALL_HEADER: [&str; 6] = ["ball", "cx", "cy", "mass", "expected_mass", "winding"];

fn run_trial(config: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    let beta = config.beta();
    let mut table = Table::open(config.out.as_deref(), &TRIAL_HEADER)?;
    let balls_path = config.out.as_deref().map(|p| sibling(p, "balls", "csv"));
    let mut balls = match &balls_path {
        Some(p) => Some(Table::open(Some(p), &BALL_HEADER)?),
        None => None,
    };
    reserve(config.save_field.as_deref())?;
    let what = || format!("trial state at beta = {beta}");
    let side = packed_side(beta).context(what)?;
    let n = config.grid;
    let grid = Grid2D::over_rect([0.0, 0.0], [side, side], [n, n], config.bc).context(what)?;
    let f = bump_profile();
    let u = vortex_lattice_trial(&grid, beta, &f).context(what)?;
    let (lhs, rhs) = factorization_check(&u, beta, &f).context(what)?;
    let (radius, centers) = trial_geometry(&grid.domain(), beta).context(what)?;
    let h = grid.spacing()[0].max(grid.spacing()[1]);
    table.row(&[
        fmt_f64(beta),
        format!("{n}x{n}"),
        fmt_f64(side),
        centers.len().to_string(),
        fmt_f64(lhs),
        fmt_f64(rhs),
        fmt_f64((lhs - rhs).abs() / rhs),
        fmt_f64(lhs / beta),
        fmt_f64(2.0 * radius / h),
    ])?;
    if let Some(t) = balls.as_mut() {
        let w = grid.cell_area();
        for (j, c) in centers.iter().enumerate() {
            let mut mass = 0.0;
            for iy in 0..grid.ny() {
                for ix in 0..grid.nx() {
                    let r = grid.coords(ix, iy);
                    if (r[0] - c[0]).hypot(r[1] - c[1]) < radius {
                        mass += w * u.at(ix, iy).norm_sqr();
                    }
                }
            }
            let winding = phase_winding(&centers, Some(j), *c, 0.9 * radius, 512);
            t.row(&[
                j.to_string(),
                fmt_f64(c[0]),
                fmt_f64(c[1]),
                fmt_f64(mass),
                fmt_f64(1.0 / centers.len() as f64),
                winding.to_string(),
            ])?;
        }
    }
    let mut outputs: Vec<PathBuf> = table.finish()?.into_iter().collect();
    if let Some(t) = balls {
        outputs.extend(t.finish()?);
    }
    if let Some(p) = &config.save_field {
        save_field(&u, p)?;
        outputs.push(p.clone());
    }
    let mut outcome = RunOutcome::ok(outputs);
    outcome.notes.push(format!(
        "{} vortices detected in the trial state",
        detect_vortices(&u, None).len()
    ));
    Ok(outcome)
}

pub const VERIFY_HEADER: [&str; 4] = ["check", "measured", "tolerance", "status"];

fn run_verify(config: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    let mut table = Table::open(config.out.as_deref(), &VERIFY_HEADER)?;
    let checks = verify::battery(config.seed)?;
    let mut failed = Vec::new();
    for c in &checks {
        table.row(&[
            c.name.to_string(),
            fmt_f64(c.measured),
            fmt_f64(c.tolerance),
            if c.passed { "pass" } else { "fail" }.to_string(),
        ])?;
        if !c.passed {
            failed.push(c.name);
        }
    }
    let mut outcome = RunOutcome::ok(table.finish()?.into_iter().collect());
    if !failed.is_empty() {
        outcome.status = EXIT_FAILURE;
        outcome.notes.push(format!("failed checks: {}", failed.join(", ")));
    }
    outcome.summary = Some(json!({ "checks": checks.len(), "failed": failed }));
    Ok(outcome)
}

pub const LDA_HEADER: [&str; 5] = ["ball", "cx", "cy", "radius", "distance"];

fn run_lda(config: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    let beta = config.beta();
    let field_path = config.field.as_deref().expect("validated: lda has a field");
    let mut table = Table::open(config.out.as_deref(), &LDA_HEADER)?;
    let u = load_snapshot(field_path).context(|| format!("loading {}", field_path.display()))?;
    let tf = tf_minimizer(&config.potential, config.e11).context(|| "Thomas-Fermi profile".into())?;
    let report = lda_compare(&u, beta, &tf).context(|| format!("local density comparison at beta = {beta}"))?;
    for (j, b) in report.balls.iter().enumerate() {
        table.row(&[
            j.to_string(),
            fmt_f64(b.center[0]),
            fmt_f64(b.center[1]),
            fmt_f64(b.radius),
            fmt_f64(b.distance),
        ])?;
    }
    let mut outcome = RunOutcome::ok(table.finish()?.into_iter().collect());
    outcome.notes.push(format!(
        "max weak distance {:.6e}; support radius {:.6} (Thomas-Fermi {:.6}); L1 distance {:.6e}",
        report.max_distance, report.measured_support_radius, report.tf_support_radius, report.l1_distance
    ));
    outcome.summary = Some(json!({
        "max_distance": report.max_distance,
        "measured_support_radius": report.measured_support_radius,
        "tf_support_radius": report.tf_support_radius,
        "l1_distance": report.l1_distance,
    }));
    Ok(outcome)
}
