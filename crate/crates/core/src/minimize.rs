//! Constrained minimisation of `E^af_β` on the unit `L²` sphere, β sweeps and
//! the extrapolation of the homogeneous energy coefficient.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::detect_vortices;
use crate::error::{AfError, Result};
use crate::field::{normalize, ComplexField};
use crate::functional::{EnergyBreakdown, Functional};
use crate::grid::{BoundaryCondition, Grid2D, Rect};
use crate::kernel::build_kernel;
use crate::potential::PotentialSpec;
use crate::precond::Preconditioner;
use crate::tf::tf_minimizer_at;
use crate::trial::{lattice_centers, vortex_carrier};
use num_complex::Complex64;

/// Couplings at or above this use the vortex-seeded start by default.
pub const VORTEX_SEED_THRESHOLD: f64 = 10.0;

/// Largest vortex displacement in the seeded start, as a fraction of the
/// lattice spacing.
pub const SEED_JITTER: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InitStrategy {
    Constant,
    RandomPhase,
    VortexSeeded,
}

impl InitStrategy {
    pub fn name(self) -> &'static str {
        match self {
            InitStrategy::Constant => "constant",
            InitStrategy::RandomPhase => "random-phase",
            InitStrategy::VortexSeeded => "vortex-seeded",
        }
    }

    /// Vortex-seeded for `β ≥ 10`, constant below.
    pub fn default_for(beta: f64) -> Self {
        if beta >= VORTEX_SEED_THRESHOLD {
            InitStrategy::VortexSeeded
        } else {
            InitStrategy::Constant
        }
    }
}

impl fmt::Display for InitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InitStrategy {
    type Err = AfError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "constant" => Ok(InitStrategy::Constant),
            "random-phase" | "random_phase" => Ok(InitStrategy::RandomPhase),
            "vortex-seeded" | "vortex_seeded" => Ok(InitStrategy::VortexSeeded),
            other => Err(AfError::Config(format!(
                "unknown init strategy {other:?}; expected constant, random-phase or vortex-seeded"
            ))),
        }
    }
}

/// Search direction rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Preconditioned steepest descent.
    Descent,
    /// Preconditioned nonlinear conjugate gradients (Polak–Ribière+), which
    /// falls back to steepest descent whenever the direction is not downhill.
    ConjugateGradient,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Descent => "descent",
            Method::ConjugateGradient => "cg",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = AfError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "descent" | "sd" => Ok(Method::Descent),
            "cg" | "conjugate-gradient" => Ok(Method::ConjugateGradient),
            other => Err(AfError::Config(format!(
                "unknown method {other:?}; expected descent or cg"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeSettings {
    pub max_iters: usize,
    /// Trial step of the first line search.
    pub initial_step: f64,
    /// Backtracking factor in `(0, 1)`.
    pub shrink: f64,
    /// Sufficient-decrease constant in `(0, 1)`.
    pub armijo: f64,
    /// Bound on `|ΔE| / max(1, |E|)` between accepted iterates.
    pub tol_energy: f64,
    /// Bound on `‖G − μu‖₂`.
    pub tol_residual: f64,
    /// `None` picks [`InitStrategy::default_for`].
    pub init: Option<InitStrategy>,
    pub seed: u64,
    /// Number of seeds tried by [`multistart`].
    pub restarts: usize,
    /// Shift of the `(σ − Δ)⁻¹` preconditioner; `None` picks
    /// [`default_sigma`].
    pub sigma: Option<f64>,
    pub method: Method,
}

impl Default for MinimizeSettings {
    fn default() -> Self {
        Self {
            max_iters: 4000,
            initial_step: 1.0,
            shrink: 0.5,
            armijo: 1e-4,
            tol_energy: 1e-10,
            tol_residual: 1e-3,
            init: None,
            seed: 0,
            restarts: 3,
            sigma: None,
            method: Method::ConjugateGradient,
        }
    }
}

impl MinimizeSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(AfError::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("tol_energy", self.tol_energy)?;
        positive("tol_residual", self.tol_residual)?;
        positive("initial_step", self.initial_step)?;
        if let Some(sigma) = self.sigma {
            positive("sigma", sigma)?;
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(AfError::Config(format!(
                "shrink must lie in (0, 1), got {}",
                self.shrink
            )));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return Err(AfError::Config(format!(
                "armijo must lie in (0, 1), got {}",
                self.armijo
            )));
        }
        if self.restarts == 0 {
            return Err(AfError::Config("restarts must be at least 1".into()));
        }
        Ok(())
    }

    pub fn sigma_for(&self, beta: f64) -> f64 {
        self.sigma.unwrap_or_else(|| default_sigma(beta))
    }

    pub fn strategy(&self, beta: f64) -> InitStrategy {
        self.init.unwrap_or_else(|| InitStrategy::default_for(beta))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeReport {
    /// Accepted steps.
    pub iterations: usize,
    pub energy: EnergyBreakdown,
    /// `‖G − μu‖₂` at the returned state.
    pub residual: f64,
    pub mu: f64,
    /// Energy of every accepted iterate, starting with the initial state.
    pub trace: Vec<f64>,
    pub converged: bool,
    /// Seed of the start that produced this report.
    pub seed: u64,
}

/// `max(1, 8|β|)`, which tracks the size of the magnetic terms.
pub fn default_sigma(beta: f64) -> f64 {
    (8.0 * beta.abs()).max(1.0)
}

/// Normalised starting state on `grid`.
pub fn init_state(grid: &Grid2D, strategy: InitStrategy, beta: f64, seed: u64) -> ComplexField {
    init_state_in(grid, strategy, beta, seed, &grid.domain())
}

/// As [`init_state`], with seeded vortices placed on a lattice over `region`.
pub fn init_state_in(grid: &Grid2D, strategy: InitStrategy, beta: f64, seed: u64, region: &Rect) -> ComplexField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let one = Complex64::new(1.0, 0.0);
    let u = match strategy {
        InitStrategy::Constant => ComplexField::from_fn(*grid, |_| one),
        InitStrategy::RandomPhase => ComplexField::from_fn(*grid, |_| {
            Complex64::from_polar(1.0, rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
        }),
        InitStrategy::VortexSeeded => {
            let n = if beta >= 1.0 && beta.is_finite() {
                beta.floor() as usize
            } else {
                0
            };
            if n == 0 {
                ComplexField::from_fn(*grid, |_| one)
            } else {
                let m = (n as f64).sqrt().ceil();
                let (jx, jy) = (SEED_JITTER * region.width() / m, SEED_JITTER * region.height() / m);
                let centers: Vec<[f64; 2]> = lattice_centers(region, n)
                    .into_iter()
                    .map(|c| [c[0] + rng.gen_range(-jx..=jx), c[1] + rng.gen_range(-jy..=jy)])
                    .collect();
                return vortex_carrier(grid, &centers).expect("unit modulus state is nonzero");
            }
        }
    };
    normalize(&u).expect("unit modulus state is nonzero")
}

fn check_start(u0: &ComplexField) -> Result<()> {
    if !u0.is_finite() {
        return Err(AfError::Contract("initial state has non-finite values".into()));
    }
    let n = u0.norm();
    if (n - 1.0).abs() > 1e-8 {
        return Err(AfError::Contract(format!(
            "initial state must be normalised, ‖u0‖ = {n}"
        )));
    }
    Ok(())
}

/// Minimises from `u0`, building the kernel for its grid.
pub fn minimize(
    u0: &ComplexField,
    beta: f64,
    v: &PotentialSpec,
    settings: &MinimizeSettings,
) -> Result<(ComplexField, MinimizeReport)> {
    let kernel = build_kernel(u0.grid())?;
    let f = Functional::new(&kernel, beta, *v)?;
    minimize_with(&f, u0, settings)
}

/// Projected Sobolev-gradient minimisation with backtracking. Each step is
/// `u ← normalize(u + t·d)` with `t` chosen by the Armijo rule, so the energy
/// trace never increases.
pub fn minimize_with(
    f: &Functional<'_>,
    u0: &ComplexField,
    settings: &MinimizeSettings,
) -> Result<(ComplexField, MinimizeReport)> {
    settings.validate()?;
    f.grid().check_same(u0.grid(), "minimize")?;
    check_start(u0)?;
    let pre = Preconditioner::new(f.grid(), settings.sigma_for(f.beta()))?;
    let mut u = normalize(u0)?;
    let mut eval = f.evaluate(&u)?;
    let mut trace = vec![eval.energy.total];
    let failure = |message: String, trace: &[f64]| AfError::NumericalFailure {
        message,
        trace: trace.to_vec(),
    };
    if !eval.energy.total.is_finite() {
        return Err(failure("initial energy is not finite".into(), &trace));
    }

    let mut step = settings.initial_step;
    let mut prev: Option<(ComplexField, ComplexField, f64)> = None;
    let mut last_change = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    loop {
        let residual_field = eval.residual(&u);
        let residual = residual_field.norm();
        if last_change <= settings.tol_energy && residual <= settings.tol_residual {
            converged = true;
            break;
        }
        if iterations >= settings.max_iters {
            break;
        }

        let mut z = residual_field.clone();
        pre.apply(z.values_mut());
        z.apply_mask();
        let z = crate::functional::project_tangent(&u, &z);
        let rz = residual_field.real_inner(&z);

        let steepest = z.scaled(-1.0);
        let mut dir = steepest.clone();
        if let (Method::ConjugateGradient, Some((d_old, z_old, rz_old))) = (settings.method, &prev) {
            let pr = (rz - residual_field.real_inner(z_old)) / rz_old;
            if pr > 0.0 && pr.is_finite() {
                let carried = crate::functional::project_tangent(&u, d_old);
                let candidate = dir.axpy(pr, &carried);
                if residual_field.real_inner(&candidate) < 0.0 {
                    dir = candidate;
                }
            }
        }

        let e0 = eval.energy.total;
        let mut found = line_search(
            f,
            &u,
            &dir,
            2.0 * residual_field.real_inner(&dir),
            e0,
            step,
            settings,
            &trace,
        )?;
        if found.is_none() && dir != steepest {
            dir = steepest;
            found = line_search(
                f,
                &u,
                &dir,
                2.0 * residual_field.real_inner(&dir),
                e0,
                step,
                settings,
                &trace,
            )?;
        }
        let Some((next, t, _)) = found else {
            // no measurable decrease left at working precision
            if residual <= settings.tol_residual {
                converged = true;
            }
            break;
        };

        step = t;
        prev = Some((dir, z, rz));
        u = next;
        eval = f.evaluate(&u)?;
        iterations += 1;
        let e = eval.energy.total;
        if !e.is_finite() {
            return Err(failure(format!("energy became {e}"), &trace));
        }
        last_change = (e0 - e).abs() / e.abs().max(1.0);
        debug_assert!(e <= e0);
        trace.push(e);
    }

    let residual = eval.residual(&u).norm();
    let report = MinimizeReport {
        iterations,
        energy: eval.energy,
        residual,
        mu: eval.rayleigh(&u),
        trace,
        converged,
        seed: settings.seed,
    };
    Ok((u, report))
}

/// Energy differences below this fraction of `|E|` are rounding noise.
const ENERGY_NOISE: f64 = 1e-13;

/// Armijo line search along the retraction `t ↦ normalize(u + t·dir)`.
/// Tries `step`, grown tenfold while the change is lost in rounding, then the
/// minimiser of the parabola through `E(0)`, `E'(0)` and `E(t)`, then plain
/// backtracking. Returns the accepted state, step and energy.
#[allow(clippy::too_many_arguments)]
fn line_search(
    f: &Functional<'_>,
    u: &ComplexField,
    dir: &ComplexField,
    slope: f64,
    e0: f64,
    step: f64,
    settings: &MinimizeSettings,
    trace: &[f64],
) -> Result<Option<(ComplexField, f64, f64)>> {
    if !(slope < 0.0) {
        return Ok(None);
    }
    let sufficient = |t: f64, e: f64| e <= e0 + settings.armijo * t * slope;
    let probe = |t: f64| -> Result<(ComplexField, f64)> {
        let trial = normalize(&u.axpy(t, dir))?;
        let e = f.energy(&trial)?.total;
        if !e.is_finite() {
            return Err(AfError::NumericalFailure {
                message: format!("energy became {e} at step {t:e}"),
                trace: trace.to_vec(),
            });
        }
        Ok((trial, e))
    };
    let noise = ENERGY_NOISE * e0.abs().max(1.0);
    let mut t = step;
    let (mut state, mut e1) = probe(t)?;
    for _ in 0..12 {
        if sufficient(t, e1) || (e1 - e0).abs() > noise {
            break;
        }
        t *= 10.0;
        (state, e1) = probe(t)?;
    }
    let t1 = t;
    let mut best = sufficient(t1, e1).then_some((state, t1, e1));
    let curvature = (e1 - e0 - slope * t1) / (t1 * t1);
    if curvature > 0.0 {
        let ts = (-slope / (2.0 * curvature)).clamp(0.02 * t1, 50.0 * t1);
        if (ts - t1).abs() > 1e-3 * t1 {
            let (cand, es) = probe(ts)?;
            if sufficient(ts, es) && best.as_ref().is_none_or(|b| es < b.2) {
                best = Some((cand, ts, es));
            }
            t = t.min(ts);
        }
    }
    while best.is_none() {
        t *= settings.shrink;
        if t * dir.max_abs() < 1e-15 * u.max_abs() {
            break;
        }
        let (cand, e) = probe(t)?;
        if sufficient(t, e) {
            best = Some((cand, t, e));
        }
    }
    Ok(best)
}

/// Runs `settings.restarts` starts with seeds `seed, seed + 1, …` plus any
/// extra starts, and keeps the lowest energy. Ties go to the earlier start.
pub fn multistart(
    f: &Functional<'_>,
    settings: &MinimizeSettings,
    region: &Rect,
    extra: &[ComplexField],
) -> Result<(ComplexField, MinimizeReport)> {
    settings.validate()?;
    let strategy = settings.strategy(f.beta());
    let mut best: Option<(ComplexField, MinimizeReport)> = None;
    let mut consider = |u: ComplexField, rep: MinimizeReport| {
        if best.as_ref().is_none_or(|(_, b)| rep.energy.total < b.energy.total) {
            best = Some((u, rep));
        }
    };
    for u0 in extra {
        let (u, rep) = minimize_with(f, u0, settings)?;
        consider(u, rep);
    }
    for k in 0..settings.restarts as u64 {
        let seed = settings.seed.wrapping_add(k);
        let u0 = init_state_in(f.grid(), strategy, f.beta(), seed, region);
        let run = MinimizeSettings {
            seed,
            ..settings.clone()
        };
        let (u, rep) = minimize_with(f, &u0, &run)?;
        consider(u, rep);
    }
    Ok(best.expect("at least one start"))
}

/// One row of a β sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub beta: f64,
    pub bc: BoundaryCondition,
    pub grid: [usize; 2],
    pub energy: EnergyBreakdown,
    pub energy_per_beta: f64,
    pub mu: f64,
    pub residual: f64,
    pub iterations: usize,
    pub vortex_count: usize,
    pub seed: u64,
    pub converged: bool,
}

impl SweepRow {
    pub fn from_report(beta: f64, grid: &Grid2D, u: &ComplexField, rep: &MinimizeReport) -> Self {
        Self {
            beta,
            bc: grid.bc(),
            grid: grid.size(),
            energy: rep.energy,
            energy_per_beta: if beta != 0.0 { rep.energy.total / beta } else { f64::NAN },
            mu: rep.mu,
            residual: rep.residual,
            iterations: rep.iterations,
            vortex_count: detect_vortices(u, None).len(),
            seed: rep.seed,
            converged: rep.converged,
        }
    }
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub beta: f64,
    pub result: Result<(SweepRow, ComplexField)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    /// Adds the previous minimiser as an extra start; forces serial order.
    pub warm_start: bool,
    /// Worker cap for independent jobs.
    pub threads: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            warm_start: false,
            threads: 1,
        }
    }
}

/// Where seeded vortices go: the Thomas–Fermi support for trapping potentials,
/// the whole grid otherwise.
pub fn seed_region(grid: &Grid2D, v: &PotentialSpec, beta: f64, e11: f64) -> Rect {
    if v.is_zero() || !(beta > 0.0) {
        return grid.domain();
    }
    match tf_minimizer_at(v, e11, beta) {
        Ok(tf) => {
            let half = tf.support_radius / std::f64::consts::SQRT_2;
            let dom = grid.domain();
            let c = [0.0, 0.0];
            Rect {
                lo: [(c[0] - half).max(dom.lo[0]), (c[1] - half).max(dom.lo[1])],
                hi: [(c[0] + half).min(dom.hi[0]), (c[1] + half).min(dom.hi[1])],
            }
        }
        Err(_) => grid.domain(),
    }
}

/// Grid for coupling `beta`: the box `[0, extent]` without a potential, and
/// for a trapping potential a centred square of half side
/// [`TfProfile::box_half_width`](crate::tf::TfProfile::box_half_width).
pub fn experiment_grid(
    v: &PotentialSpec,
    beta: f64,
    n: usize,
    bc: BoundaryCondition,
    extent: [f64; 2],
    e11: f64,
) -> Result<Grid2D> {
    if v.is_zero() {
        Grid2D::over_rect([0.0, 0.0], extent, [n, n], bc)
    } else {
        let half = tf_minimizer_at(v, e11, 1.0)?.box_half_width(beta.max(f64::MIN_POSITIVE))?;
        Grid2D::centered([2.0 * half, 2.0 * half], [n, n], bc)
    }
}

/// Minimises at every β of `betas`, on the grid `grid_for(β)`. Failures are
/// recorded per β and the sweep carries on.
pub fn sweep(
    betas: &[f64],
    v: &PotentialSpec,
    grid_for: &(dyn Fn(f64) -> Result<Grid2D> + Sync),
    settings: &MinimizeSettings,
    options: SweepOptions,
    e11: f64,
) -> Result<Vec<SweepOutcome>> {
    if betas.is_empty() {
        return Err(AfError::Config("the beta list is empty".into()));
    }
    if betas.windows(2).any(|w| !(w[0] < w[1])) || betas.iter().any(|b| !(*b > 0.0)) {
        return Err(AfError::Config("betas must be positive and strictly ascending".into()));
    }
    settings.validate()?;
    let job = |beta: f64, warm: Option<&ComplexField>| -> Result<(SweepRow, ComplexField)> {
        let grid = grid_for(beta)?;
        let kernel = build_kernel(&grid)?;
        let f = Functional::new(&kernel, beta, *v)?;
        let extra: Vec<ComplexField> = warm
            .filter(|w| w.grid().same_nodes(&grid))
            .into_iter()
            .cloned()
            .collect();
        let (u, rep) = multistart(&f, settings, &seed_region(&grid, v, beta, e11), &extra)?;
        Ok((SweepRow::from_report(beta, &grid, &u, &rep), u))
    };

    if options.warm_start || options.threads <= 1 || betas.len() == 1 {
        let mut out = Vec::with_capacity(betas.len());
        let mut warm: Option<ComplexField> = None;
        for &beta in betas {
            let result = job(beta, if options.warm_start { warm.as_ref() } else { None });
            if let Ok((_, u)) = &result {
                warm = Some(u.clone());
            }
            out.push(SweepOutcome { beta, result });
        }
        return Ok(out);
    }

    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<SweepOutcome>>> = Mutex::new((0..betas.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..options.threads.min(betas.len()) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= betas.len() {
                    break;
                }
                let result = job(betas[k], None);
                slots.lock().expect("no worker panicked")[k] = Some(SweepOutcome { beta: betas[k], result });
            });
        }
    });
    Ok(slots
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|o| o.expect("every job ran"))
        .collect())
}

/// Least-squares fit `E/β ≈ a + b_g·β^{−1/7}` with one intercept shared by all
/// series `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct E11Fit {
    /// `a·|Ω|`
    pub estimate: f64,
    pub intercept: f64,
    /// One slope per series.
    pub slopes: Vec<f64>,
    /// Root-mean-square residual of the fit.
    pub rms: f64,
    pub points: usize,
}

/// Fits `(β, E/β)` series against `β^{−1/7}` with a common intercept and
/// scales the intercept by the domain area.
pub fn estimate_e11_series(series: &[Vec<(f64, f64)>], area: f64) -> Result<E11Fit> {
    let points: usize = series.iter().map(Vec::len).sum();
    if points < 3 {
        return Err(AfError::InsufficientData { needed: 3, got: points });
    }
    if series.iter().flatten().any(|(b, e)| !(*b > 0.0) || !e.is_finite()) {
        return Err(AfError::Contract("fit points need β > 0 and finite energies".into()));
    }
    let x = |b: f64| b.powf(-1.0 / 7.0);
    // Eliminating each slope leaves a one-parameter problem for the
    // intercept: a = Σ p·q / Σ q² with p = y − Py, q = 1 − P1, where P
    // projects onto the span of x within a series.
    let (mut pq, mut qq) = (0.0, 0.0);
    for s in series {
        let sxx: f64 = s.iter().map(|(b, _)| x(*b).powi(2)).sum();
        let sxy: f64 = s.iter().map(|(b, e)| x(*b) * e).sum();
        let sx: f64 = s.iter().map(|(b, _)| x(*b)).sum();
        for (b, e) in s {
            let p = e - x(*b) * sxy / sxx;
            let q = 1.0 - x(*b) * sx / sxx;
            pq += p * q;
            qq += q * q;
        }
    }
    if !(qq > 1e-14 * points as f64) {
        return Err(AfError::InsufficientData {
            needed: series.len() + 1,
            got: points,
        });
    }
    let intercept = pq / qq;
    let slopes: Vec<f64> = series
        .iter()
        .map(|s| {
            let sxx: f64 = s.iter().map(|(b, _)| x(*b).powi(2)).sum();
            s.iter().map(|(b, e)| x(*b) * (e - intercept)).sum::<f64>() / sxx
        })
        .collect();
    let sq: f64 = series
        .iter()
        .zip(&slopes)
        .flat_map(|(s, k)| s.iter().map(move |(b, e)| (e - intercept - k * x(*b)).powi(2)))
        .sum();
    Ok(E11Fit {
        estimate: intercept * area,
        intercept,
        slopes,
        rms: (sq / points as f64).sqrt(),
        points,
    })
}

/// Single-series form of [`estimate_e11_series`].
pub fn estimate_e11(points: &[(f64, f64)], area: f64) -> Result<E11Fit> {
    estimate_e11_series(&[points.to_vec()], area)
}

/// [`estimate_e11_series`] over sweep rows, one series per boundary
/// condition, in tag order.
pub fn estimate_e11_rows(rows: &[SweepRow], area: f64) -> Result<E11Fit> {
    let mut series: Vec<(u8, Vec<(f64, f64)>)> = Vec::new();
    for r in rows {
        let tag = r.bc.tag();
        match series.iter_mut().find(|(t, _)| *t == tag) {
            Some((_, s)) => s.push((r.beta, r.energy_per_beta)),
            None => series.push((tag, vec![(r.beta, r.energy_per_beta)])),
        }
    }
    series.sort_by_key(|(t, _)| *t);
    let series: Vec<Vec<(f64, f64)>> = series.into_iter().map(|(_, s)| s).collect();
    estimate_e11_series(&series, area)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::total_winding;
    use crate::grid::make_grid;
    use std::f64::consts::PI;

    fn unit(n: usize, bc: BoundaryCondition) -> Grid2D {
        make_grid((1.0, 1.0), (n, n), bc).unwrap()
    }

    #[test]
    fn constant_start_is_one() {
        let g = unit(32, BoundaryCondition::Neumann);
        let u = init_state(&g, InitStrategy::Constant, 5.0, 3);
        assert!(u.values().iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-14));
    }

    #[test]
    fn starts_are_deterministic() {
        let g = unit(32, BoundaryCondition::Dirichlet);
        for s in [InitStrategy::RandomPhase, InitStrategy::VortexSeeded] {
            let a = init_state(&g, s, 12.0, 9);
            let b = init_state(&g, s, 12.0, 9);
            let c = init_state(&g, s, 12.0, 10);
            assert_eq!(a, b);
            assert_ne!(a, c);
            assert!((a.norm() - 1.0).abs() < 1e-12);
        }
        let r = init_state(&g, InitStrategy::RandomPhase, 1.0, 0);
        let m: Vec<f64> = r.values().iter().map(|z| z.norm()).filter(|m| *m > 0.0).collect();
        assert!(m.iter().all(|x| (x - m[0]).abs() < 1e-12));
    }

    #[test]
    fn vortex_seed_has_floor_beta_vortices() {
        let g = unit(128, BoundaryCondition::Dirichlet);
        for (beta, n) in [(9.0, 9), (12.7, 12)] {
            let u = init_state(&g, InitStrategy::VortexSeeded, beta, 4);
            let v = detect_vortices(&u, None);
            assert_eq!(v.len(), n);
            assert!(v.iter().all(|r| r.winding == -1));
            assert_eq!(total_winding(&v), -(n as i32));
        }
        assert_eq!(InitStrategy::default_for(9.9), InitStrategy::Constant);
        assert_eq!(InitStrategy::default_for(10.0), InitStrategy::VortexSeeded);
    }

    #[test]
    fn free_laplacian_ground_state() {
        let g = unit(32, BoundaryCondition::Neumann);
        let u0 = init_state(&g, InitStrategy::RandomPhase, 0.0, 1);
        let s = MinimizeSettings {
            tol_residual: 1e-6,
            ..Default::default()
        };
        let (_, rep) = minimize(&u0, 0.0, &PotentialSpec::Zero, &s).unwrap();
        assert!(rep.converged, "{rep:?}");
        assert!(rep.energy.total <= 1e-8, "{}", rep.energy.total);
    }

    #[test]
    fn dirichlet_laplacian_ground_state() {
        let n = 32;
        let g = unit(n, BoundaryCondition::Dirichlet);
        let u0 = init_state(&g, InitStrategy::Constant, 0.0, 0);
        for method in [Method::Descent, Method::ConjugateGradient] {
            let s = MinimizeSettings {
                tol_residual: 1e-6,
                method,
                ..Default::default()
            };
            let (_, rep) = minimize(&u0, 0.0, &PotentialSpec::Zero, &s).unwrap();
            let h = 1.0 / (n - 1) as f64;
            let discrete = 2.0 * (2.0 - 2.0 * (PI * h).cos()) / (h * h);
            assert!(rep.converged);
            assert!(
                (rep.energy.total - discrete).abs() < 1e-9 * discrete,
                "{method}: {}",
                rep.energy.total
            );
            assert!((rep.energy.total - 2.0 * PI * PI).abs() < 0.01 * 2.0 * PI * PI);
        }
    }

    #[test]
    fn trace_is_monotone_and_iterates_normalised() {
        let g = unit(48, BoundaryCondition::Dirichlet);
        let beta = 12.0;
        let kernel = build_kernel(&g).unwrap();
        let f = Functional::new(&kernel, beta, PotentialSpec::Zero).unwrap();
        let u0 = init_state(&g, InitStrategy::VortexSeeded, beta, 0);
        let s = MinimizeSettings {
            max_iters: 60,
            ..Default::default()
        };
        let (u, rep) = minimize_with(&f, &u0, &s).unwrap();
        assert!((u.norm() - 1.0).abs() < 1e-12);
        assert!(rep.trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(rep.trace.len(), rep.iterations + 1);
        assert_eq!(rep.energy.total, *rep.trace.last().unwrap());
        let again = minimize_with(&f, &u0, &s).unwrap();
        assert_eq!(again.1, rep);
        assert_eq!(again.0, u);
    }

    #[test]
    fn converged_report_meets_residual_tolerance() {
        let g = unit(32, BoundaryCondition::Dirichlet);
        let kernel = build_kernel(&g).unwrap();
        let f = Functional::new(&kernel, 3.0, PotentialSpec::Zero).unwrap();
        let u0 = init_state(&g, InitStrategy::Constant, 3.0, 0);
        let s = MinimizeSettings {
            tol_residual: 1e-5,
            ..Default::default()
        };
        let (u, rep) = minimize_with(&f, &u0, &s).unwrap();
        assert!(rep.converged);
        let r = f.evaluate(&u).unwrap().residual(&u).norm();
        assert!(r <= s.tol_residual);
        assert!(rep.energy.total / 3.0 >= 2.0 * PI);
    }

    #[test]
    fn rejects_bad_settings_and_starts() {
        let g = unit(16, BoundaryCondition::Neumann);
        let u0 = init_state(&g, InitStrategy::Constant, 0.0, 0);
        let bad = MinimizeSettings {
            shrink: 1.0,
            ..Default::default()
        };
        assert!(matches!(
            minimize(&u0, 0.0, &PotentialSpec::Zero, &bad),
            Err(AfError::Config(_))
        ));
        let s = MinimizeSettings::default();
        assert!(matches!(
            minimize(&u0.scaled(2.0), 0.0, &PotentialSpec::Zero, &s),
            Err(AfError::Contract(_))
        ));
        let nan = ComplexField::from_fn(g, |_| Complex64::new(f64::NAN, 0.0));
        assert!(minimize(&nan, 0.0, &PotentialSpec::Zero, &s).is_err());
    }

    #[test]
    fn fit_recovers_synthetic_coefficient() {
        let pts: Vec<(f64, f64)> = [10.0, 20.0, 40.0, 80.0]
            .iter()
            .map(|&b: &f64| (b, 7.0 + 2.0 * b.powf(-1.0 / 7.0)))
            .collect();
        let fit = estimate_e11(&pts, 1.0).unwrap();
        assert!((fit.estimate - 7.0).abs() < 1e-10);
        assert!((fit.slopes[0] - 2.0).abs() < 1e-9);
        let flat: Vec<(f64, f64)> = [10.0, 20.0, 40.0].iter().map(|&b| (b, 2.0 * PI)).collect();
        let fit = estimate_e11(&flat, 1.0).unwrap();
        assert!((fit.estimate - 2.0 * PI).abs() < 1e-12);
        assert!((estimate_e11(&flat, 2.5).unwrap().estimate - 5.0 * PI).abs() < 1e-12);
        assert!(matches!(
            estimate_e11(&pts[..2], 1.0),
            Err(AfError::InsufficientData { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn shared_intercept_fit() {
        let betas = [10.0, 20.0, 40.0];
        let d: Vec<(f64, f64)> = betas
            .iter()
            .map(|&b: &f64| (b, 7.5 + 3.0 * b.powf(-1.0 / 7.0)))
            .collect();
        let n: Vec<(f64, f64)> = betas
            .iter()
            .map(|&b: &f64| (b, 7.5 - 4.0 * b.powf(-1.0 / 7.0)))
            .collect();
        let fit = estimate_e11_series(&[d.clone(), n.clone()], 1.0).unwrap();
        assert!((fit.estimate - 7.5).abs() < 1e-10);
        assert!((fit.slopes[0] - 3.0).abs() < 1e-9 && (fit.slopes[1] + 4.0).abs() < 1e-9);
        assert!(fit.rms < 1e-12);

        let g = unit(16, BoundaryCondition::Dirichlet);
        let row = |beta: f64, e: f64, bc: BoundaryCondition| SweepRow {
            beta,
            bc,
            grid: g.size(),
            energy: EnergyBreakdown::default(),
            energy_per_beta: e,
            mu: 0.0,
            residual: 0.0,
            iterations: 0,
            vortex_count: 0,
            seed: 0,
            converged: true,
        };
        let mut rows: Vec<SweepRow> = n.iter().map(|&(b, e)| row(b, e, BoundaryCondition::Neumann)).collect();
        rows.extend(d.iter().map(|&(b, e)| row(b, e, BoundaryCondition::Dirichlet)));
        let fit = estimate_e11_rows(&rows, 1.0).unwrap();
        assert!((fit.estimate - 7.5).abs() < 1e-10);
        assert!((fit.slopes[0] - 3.0).abs() < 1e-9, "dirichlet first");
        assert!(matches!(
            estimate_e11_series(&[d[..1].to_vec(), n[..1].to_vec()], 1.0),
            Err(AfError::InsufficientData { .. })
        ));
    }

    #[test]
    fn sweep_single_beta_gives_single_row() {
        let g = unit(24, BoundaryCondition::Dirichlet);
        let s = MinimizeSettings {
            max_iters: 30,
            restarts: 1,
            ..Default::default()
        };
        let grid_for = |_: f64| Ok(g);
        let rows = sweep(
            &[2.0],
            &PotentialSpec::Zero,
            &grid_for,
            &s,
            SweepOptions::default(),
            2.0 * PI,
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        let (row, _) = rows[0].result.as_ref().unwrap();
        assert_eq!(row.beta, 2.0);
        assert_eq!(row.grid, [24, 24]);
        assert!(sweep(
            &[3.0, 2.0],
            &PotentialSpec::Zero,
            &grid_for,
            &s,
            SweepOptions::default(),
            1.0
        )
        .is_err());
        assert!(sweep(&[], &PotentialSpec::Zero, &grid_for, &s, SweepOptions::default(), 1.0).is_err());
    }

    #[test]
    fn trapped_grid_scales_with_the_support() {
        let v = PotentialSpec::harmonic(1.0, 1.0).unwrap();
        let e11 = 2.0 * PI;
        let g10 = experiment_grid(&v, 10.0, 64, BoundaryCondition::Dirichlet, [1.0, 1.0], e11).unwrap();
        let g30 = experiment_grid(&v, 30.0, 64, BoundaryCondition::Dirichlet, [1.0, 1.0], e11).unwrap();
        let r10 = tf_minimizer_at(&v, e11, 10.0).unwrap().support_radius;
        assert!((g10.domain().width() - 3.0 * r10).abs() < 1e-12);
        let ratio = g30.domain().width() / g10.domain().width();
        assert!((ratio - 3f64.powf(0.25)).abs() < 1e-9);
        assert_eq!(g10.domain().center(), [0.0, 0.0]);
        let flat = experiment_grid(
            &PotentialSpec::Zero,
            10.0,
            64,
            BoundaryCondition::Neumann,
            [2.0, 1.0],
            e11,
        )
        .unwrap();
        assert_eq!(flat.domain().hi, [2.0, 1.0]);
    }

    #[test]
    fn warm_start_never_loses_to_cold_start() {
        let g = unit(24, BoundaryCondition::Dirichlet);
        let grid_for = |_: f64| Ok(g);
        let s = MinimizeSettings {
            max_iters: 40,
            restarts: 1,
            ..Default::default()
        };
        let opts = SweepOptions {
            warm_start: true,
            threads: 4,
        };
        let cold = sweep(
            &[2.0, 3.0],
            &PotentialSpec::Zero,
            &grid_for,
            &s,
            SweepOptions::default(),
            1.0,
        )
        .unwrap();
        let warm = sweep(&[2.0, 3.0], &PotentialSpec::Zero, &grid_for, &s, opts, 1.0).unwrap();
        let e = |o: &SweepOutcome| o.result.as_ref().unwrap().0.energy.total;
        assert_eq!(e(&cold[0]), e(&warm[0]));
        assert!(e(&warm[1]) <= e(&cold[1]));
    }

    #[test]
    fn parallel_sweep_matches_serial() {
        let g = unit(24, BoundaryCondition::Neumann);
        let grid_for = |_: f64| Ok(g);
        let s = MinimizeSettings {
            max_iters: 20,
            restarts: 2,
            ..Default::default()
        };
        let betas = [1.0, 2.0, 3.0];
        let serial = sweep(
            &betas,
            &PotentialSpec::Zero,
            &grid_for,
            &s,
            SweepOptions::default(),
            1.0,
        )
        .unwrap();
        let par = sweep(
            &betas,
            &PotentialSpec::Zero,
            &grid_for,
            &s,
            SweepOptions {
                warm_start: false,
                threads: 3,
            },
            1.0,
        )
        .unwrap();
        for (a, b) in serial.iter().zip(&par) {
            assert_eq!(a.result.as_ref().unwrap().0, b.result.as_ref().unwrap().0);
        }
    }
}
