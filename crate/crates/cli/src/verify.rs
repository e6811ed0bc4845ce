use std::f64::consts::PI;

use af_core::{
    build_kernel, bump_profile, curl, diamagnetic_bound, exterior_field, factorization_check, magnetic_bound,
    normalize, packed_side, rescale_state, vector_potential, vortex_lattice_trial, BoundaryCondition, ComplexField,
    Functional, Grid2D, PotentialSpec, ScalarField,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, Context};

/// One line of the verification battery.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &'static str, measured: f64, tolerance: f64) -> Self {
        Self {
            name,
            measured,
            tolerance,
            passed: measured <= tolerance,
        }
    }

    fn at_least(name: &'static str, measured: f64, tolerance: f64) -> Self {
        Self {
            name,
            measured,
            tolerance,
            passed: measured >= tolerance,
        }
    }
}

pub const CURL_TOLERANCE: f64 = 1e-2;
pub const CURL_REFINEMENT_RATIO: f64 = 3.0;
pub const NEWTON_TOLERANCE: f64 = 1e-3;
pub const MU_TOLERANCE: f64 = 1e-11;
pub const SCALING_TOLERANCE: f64 = 1e-10;
/// Relative rounding allowance for inequalities that hold exactly on the grid.
pub const ROUNDING_SLACK: f64 = 1e-12;
pub const FACTORIZATION_TOLERANCE: f64 = 0.02;

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// `(1 − r²)³` on the disc of radius `a`.
pub fn smooth_bump(r: f64, a: f64) -> f64 {
    if r < a {
        (1.0 - (r / a).powi(2)).powi(3)
    } else {
        0.0
    }
}

/// Normalised superposition of a few random plane waves, times
/// `sin(πx/Lx) sin(πy/Ly)` on Dirichlet grids so the state vanishes on the
/// boundary.
pub fn random_state(grid: &Grid2D, seed: u64, modes: usize, max_wavenumber: f64) -> Result<ComplexField, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64, f64)> = (0..modes)
        .map(|_| {
            (
                rng.gen_range(-max_wavenumber..max_wavenumber),
                rng.gen_range(-max_wavenumber..max_wavenumber),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.0..2.0 * PI),
            )
        })
        .collect();
    let dom = grid.domain();
    let dirichlet = grid.bc() == BoundaryCondition::Dirichlet;
    let u = ComplexField::from_fn(*grid, |[x, y]| {
        let z = waves.iter().fold(Complex64::new(0.5, 0.0), |acc, &(kx, ky, amp, ph)| {
            acc + Complex64::from_polar(amp, kx * x + ky * y + ph)
        });
        if dirichlet {
            let sx = (PI * (x - dom.lo[0]) / dom.width()).sin();
            let sy = (PI * (y - dom.lo[1]) / dom.height()).sin();
            z * sx * sy
        } else {
            z
        }
    });
    normalize(&u).context(|| format!("random state {seed}"))
}

/// Relative interior `L²` error of `curl A[ρ] − 2πρ` for a smooth bump on an
/// `n × n` free grid.
pub fn curl_identity_error(n: usize) -> Result<f64, CliError> {
    let g = Grid2D::centered([2.0, 2.0], [n, n], BoundaryCondition::Free).context(|| "curl grid".into())?;
    let rho = ScalarField::from_fn(g, |[x, y]| smooth_bump(x.hypot(y), 0.6));
    let k = build_kernel(&g).context(|| "curl kernel".into())?;
    let c = curl(&vector_potential(&rho, &k).context(|| "curl potential".into())?);
    let (mut num, mut den) = (0.0, 0.0);
    for iy in 2..n - 2 {
        for ix in 2..n - 2 {
            let t = 2.0 * PI * rho.at(ix, iy);
            num += (c.at(ix, iy) - t).powi(2);
            den += t * t;
        }
    }
    Ok((num / den).sqrt())
}

/// Largest relative deviation of the grid vector potential of a unit-mass
/// bump from the point-mass field, over nodes at least two support radii out.
pub fn newton_exterior_error(n: usize) -> Result<f64, CliError> {
    let g = Grid2D::centered([2.0, 2.0], [n, n], BoundaryCondition::Free).context(|| "newton grid".into())?;
    let a0 = 0.25;
    let raw = ScalarField::from_fn(g, |[x, y]| smooth_bump(x.hypot(y), a0));
    let rho = raw.scaled(1.0 / raw.integral());
    let k = build_kernel(&g).context(|| "newton kernel".into())?;
    let a = vector_potential(&rho, &k).context(|| "newton potential".into())?;
    let mut worst: f64 = 0.0;
    for iy in 0..g.ny() {
        for ix in 0..g.nx() {
            let q = g.coords(ix, iy);
            if q[0].hypot(q[1]) < 2.0 * a0 {
                continue;
            }
            let e = exterior_field(1.0, [0.0, 0.0], q).context(|| "exterior field".into())?;
            let got = a.at(ix, iy);
            worst = worst.max((got[0] - e[0]).hypot(got[1] - e[1]) / e[0].hypot(e[1]));
        }
    }
    Ok(worst)
}

/// Largest relative gap between the two chemical-potential expressions.
pub fn mu_identity_gap(states: usize, n: usize, betas: &[f64], seed: u64) -> Result<f64, CliError> {
    let g = af_core::make_grid((1.0, 1.0), (n, n), BoundaryCondition::Dirichlet).context(|| "mu grid".into())?;
    let k = build_kernel(&g).context(|| "mu kernel".into())?;
    let v = PotentialSpec::harmonic(1.0, 1.0).context(|| "mu potential".into())?;
    let mut worst: f64 = 0.0;
    for &beta in betas {
        let f = Functional::new(&k, beta, v).context(|| "mu functional".into())?;
        for s in 0..states as u64 {
            let u = random_state(&g, seed.wrapping_add(s), 6, 6.0)?;
            let e = f.energy(&u).context(|| "mu energy".into())?;
            let (mu1, mu2) = f.chemical_potential(&u, &e).context(|| "mu identity".into())?;
            worst = worst.max(rel(mu1, mu2));
        }
    }
    Ok(worst)
}

/// Pairs `(λ, μ)` of the scaling check.
pub const SCALING_PAIRS: [(f64, f64); 3] = [(2.0, 1.0), (1.0, 2.0), (0.5, 3.0)];

/// Largest relative gap in `E_{β,μΩ}[u_{λ,μ}] = λ² E_{λ²μ²β,Ω}[u]`.
pub fn scaling_gap(states: usize, n: usize, beta: f64, seed: u64) -> Result<f64, CliError> {
    let g = af_core::make_grid((1.0, 1.0), (n, n), BoundaryCondition::Neumann).context(|| "scaling grid".into())?;
    let k = build_kernel(&g).context(|| "scaling kernel".into())?;
    let mut worst: f64 = 0.0;
    for s in 0..states as u64 {
        let u = random_state(&g, seed.wrapping_add(s), 6, 6.0)?;
        for (lam, mu) in SCALING_PAIRS {
            let w = rescale_state(&u, lam, mu).context(|| "rescale".into())?;
            let kw = build_kernel(w.grid()).context(|| "scaled kernel".into())?;
            let lhs = Functional::new(&kw, beta, PotentialSpec::Zero)
                .and_then(|f| f.energy(&w))
                .context(|| "scaled energy".into())?;
            let rhs = Functional::new(&k, lam * lam * mu * mu * beta, PotentialSpec::Zero)
                .and_then(|f| f.energy(&u))
                .context(|| "reference energy".into())?;
            worst = worst.max(rel(lhs.total, lam * lam * rhs.total));
        }
    }
    Ok(worst)
}

/// Measured violations of the two lower bounds over `states` random states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundSlack {
    /// `max (∫|∇|u||² − T)/T` where `T` is the magnetic kinetic energy.
    pub diamagnetic: f64,
    /// `max (2πβ‖u‖₄⁴ − T)/T` over Dirichlet states.
    pub magnetic: f64,
}

/// Bound violations on an `n × n` Dirichlet unit square. The same seeds give
/// the same continuum states on every grid, so slacks at different `n`
/// measure the discretisation error.
pub fn bound_slack(states: usize, n: usize, seed: u64) -> Result<BoundSlack, CliError> {
    let g = af_core::make_grid((1.0, 1.0), (n, n), BoundaryCondition::Dirichlet).context(|| "bound grid".into())?;
    let k = build_kernel(&g).context(|| "bound kernel".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = BoundSlack {
        diamagnetic: f64::NEG_INFINITY,
        magnetic: f64::NEG_INFINITY,
    };
    for s in 0..states as u64 {
        let beta = rng.gen_range(0.0..50.0);
        let u = random_state(&g, seed.wrapping_add(1 + s), 3, 3.0)?;
        let e = Functional::new(&k, beta, PotentialSpec::Zero)
            .and_then(|f| f.energy(&u))
            .context(|| "bound energy".into())?;
        let t = e.magnetic_kinetic();
        out.diamagnetic = out.diamagnetic.max((diamagnetic_bound(&u) - t) / t);
        out.magnetic = out.magnetic.max((magnetic_bound(&u, beta) - t) / t);
    }
    Ok(out)
}

/// Trial energy against `⌊β⌋·E_{1,B₁}[f]` on the packed box with
/// `cells_per_ball` nodes across each ball. Returns `(lhs, rhs)`.
pub fn trial_factorization(beta: f64, cells_per_ball: usize) -> Result<(f64, f64), CliError> {
    let side = packed_side(beta).context(|| "packed side".into())?;
    let diameter = 2.0 / beta.sqrt();
    let n = (side / diameter * cells_per_ball as f64).ceil() as usize;
    let g = Grid2D::over_rect([0.0, 0.0], [side, side], [n, n], BoundaryCondition::Dirichlet)
        .context(|| "trial grid".into())?;
    let f = bump_profile();
    let u = vortex_lattice_trial(&g, beta, &f).context(|| "trial state".into())?;
    factorization_check(&u, beta, &f).context(|| "factorization".into())
}

/// The battery run by `af verify`.
pub fn battery(seed: u64) -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();
    let (coarse, fine) = (curl_identity_error(128)?, curl_identity_error(256)?);
    checks.push(Check::at_most("curl_identity", fine, CURL_TOLERANCE));
    checks.push(Check::at_least(
        "curl_refinement_ratio",
        coarse / fine,
        CURL_REFINEMENT_RATIO,
    ));
    checks.push(Check::at_most(
        "newton_exterior",
        newton_exterior_error(128)?,
        NEWTON_TOLERANCE,
    ));
    checks.push(Check::at_most(
        "mu_identity",
        mu_identity_gap(5, 32, &[0.0, 1.0, 10.0], seed)?,
        MU_TOLERANCE,
    ));
    checks.push(Check::at_most(
        "scaling_law",
        scaling_gap(5, 24, 3.0, seed)?,
        SCALING_TOLERANCE,
    ));
    let (c, f) = (bound_slack(20, 32, seed)?, bound_slack(20, 64, seed)?);
    checks.push(Check::at_most(
        "diamagnetic_bound",
        f.diamagnetic.max(c.diamagnetic),
        ROUNDING_SLACK,
    ));
    // a violation on the fine grid may not exceed the one measured on the coarse grid
    checks.push(Check::at_most(
        "magnetic_bound",
        f.magnetic,
        c.magnetic.max(0.0) + ROUNDING_SLACK,
    ));
    let (lhs, rhs) = trial_factorization(4.0, 64)?;
    checks.push(Check::at_most(
        "trial_factorization",
        rel(lhs, rhs),
        FACTORIZATION_TOLERANCE,
    ));
    Ok(checks)
}
