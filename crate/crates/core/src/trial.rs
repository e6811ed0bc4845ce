//! Vortex-lattice trial states.
//!
//! `N = ⌊β⌋` bumps of radius `1/√β` sit on a square lattice. Bump `j` carries
//! the phase `−Σ_{k≠j} arg(r − r_k)`, so outside its own ball every other bump
//! sees the field of a point flux and the energy splits into `N` copies of the
//! single-bump energy at `β = 1`.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::Arc;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;

use crate::error::{AfError, Result};
use crate::field::{normalize, rescale_state, ComplexField};
use crate::functional::Functional;
use crate::grid::{BoundaryCondition, Grid2D, Rect};
use crate::kernel::build_kernel;
use crate::potential::PotentialSpec;

/// Radial profile supported in the unit ball, normalised in `L²(R²)`.
#[derive(Clone)]
pub struct RadialProfile {
    shape: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    scale: f64,
}

impl std::fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RadialProfile")
            .field("scale", &self.scale)
            .finish_non_exhaustive()
    }
}

impl RadialProfile {
    /// Normalises `shape` on the unit ball by Gauss–Legendre quadrature.
    pub fn new(shape: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        let gl = GaussLegendre::new(NonZeroUsize::new(64).expect("nonzero"));
        let mass = gl.integrate(0.0, 1.0, |r| 2.0 * PI * r * shape(r).powi(2));
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(AfError::DegenerateState("radial profile has no mass".into()));
        }
        Ok(Self {
            shape: Arc::new(shape),
            scale: mass.sqrt().recip(),
        })
    }

    /// Normalisation constant `c` in `f = c·shape`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r >= 1.0 {
            0.0
        } else {
            self.scale * (self.shape)(r)
        }
    }
}

/// `f(r) = c(1 − r²)²` on the unit ball.
pub fn bump_profile() -> RadialProfile {
    RadialProfile::new(|r| (1.0 - r * r).powi(2)).expect("bump has positive mass")
}

/// Number of vortices used for coupling `β`.
pub fn vortex_count(beta: f64) -> Result<usize> {
    if !(beta >= 1.0) || !beta.is_finite() {
        return Err(AfError::Config(format!(
            "the vortex lattice needs beta >= 1, got {beta}"
        )));
    }
    Ok(beta.floor() as usize)
}

/// First `n` points of the `m × m` cell-centred lattice on `domain`,
/// `m = ⌈√n⌉`, row by row.
pub fn lattice_centers(domain: &Rect, n: usize) -> Vec<[f64; 2]> {
    let m = (n as f64).sqrt().ceil() as usize;
    let m = if m * m < n { m + 1 } else { m.max(1) };
    let (sx, sy) = (domain.width() / m as f64, domain.height() / m as f64);
    (0..n)
        .map(|k| {
            let (i, j) = (k % m, k / m);
            [
                domain.lo[0] + (i as f64 + 0.5) * sx,
                domain.lo[1] + (j as f64 + 0.5) * sy,
            ]
        })
        .collect()
}

/// `−Σ_k arg(r − r_k)` over all centers except `skip`.
fn lattice_phase(r: [f64; 2], centers: &[[f64; 2]], skip: Option<usize>) -> f64 {
    centers
        .iter()
        .enumerate()
        .filter(|(k, _)| Some(*k) != skip)
        .map(|(_, c)| -(r[1] - c[1]).atan2(r[0] - c[0]))
        .sum()
}

/// Unit-modulus state carrying one vortex of winding −1 at every center.
pub fn vortex_carrier(grid: &Grid2D, centers: &[[f64; 2]]) -> Result<ComplexField> {
    normalize(&ComplexField::from_fn(*grid, |r| {
        Complex64::from_polar(1.0, lattice_phase(r, centers, None))
    }))
}

/// Ball radius and centers of the trial lattice, validated for disjointness.
pub fn trial_geometry(domain: &Rect, beta: f64) -> Result<(f64, Vec<[f64; 2]>)> {
    let n = vortex_count(beta)?;
    let radius = 1.0 / beta.sqrt();
    let centers = lattice_centers(domain, n);
    let m = (n as f64).sqrt().ceil();
    let spacing = (domain.width() / m).min(domain.height() / m);
    if spacing < 2.0 * radius * (1.0 - 1e-12) {
        return Err(AfError::Geometry(format!(
            "{n} disjoint balls of radius {radius:.6} do not fit on a {m}x{m} lattice \
             with spacing {spacing:.6}; the domain needs side at least {:.6}",
            2.0 * radius * m
        )));
    }
    Ok((radius, centers))
}

/// The vortex-lattice trial state on `grid`, normalised.
pub fn vortex_lattice_trial(grid: &Grid2D, beta: f64, f: &RadialProfile) -> Result<ComplexField> {
    let (radius, centers) = trial_geometry(&grid.domain(), beta)?;
    let sb = beta.sqrt();
    let u = ComplexField::from_fn(*grid, |r| {
        let owner = centers.iter().position(|c| (r[0] - c[0]).hypot(r[1] - c[1]) < radius);
        match owner {
            Some(j) => {
                let c = centers[j];
                let amp = f.eval(sb * (r[0] - c[0]).hypot(r[1] - c[1]));
                Complex64::from_polar(amp, lattice_phase(r, &centers, Some(j)))
            }
            None => Complex64::new(0.0, 0.0),
        }
    });
    normalize(&u)
}

/// `E^af_{1,B₁}[f]` on `[−1, 1]²` with node spacing `h`.
pub fn ball_energy(f: &RadialProfile, h: f64) -> Result<f64> {
    let n = (2.0 / h).round() as usize;
    let grid = Grid2D::centered([n as f64 * h, n as f64 * h], [n, n], BoundaryCondition::Free)?;
    let u = normalize(&ComplexField::from_fn(grid, |r| {
        Complex64::new(f.eval(r[0].hypot(r[1])), 0.0)
    }))?;
    let kernel = build_kernel(&grid)?;
    Ok(Functional::new(&kernel, 1.0, PotentialSpec::Zero)?.energy(&u)?.total)
}

/// `(lhs, rhs)`: the trial energy at `β` and `⌊β⌋·E^af_{1,B₁}[f]` on a ball
/// grid with the same number of nodes per ball.
pub fn factorization_check(u: &ComplexField, beta: f64, f: &RadialProfile) -> Result<(f64, f64)> {
    let n = vortex_count(beta)?;
    let kernel = build_kernel(u.grid())?;
    let lhs = Functional::new(&kernel, beta, PotentialSpec::Zero)?.energy(u)?.total;
    let h = u.grid().spacing()[0].max(u.grid().spacing()[1]);
    let rhs = n as f64 * ball_energy(f, h * beta.sqrt())?;
    Ok((lhs, rhs))
}

/// Side `2⌈√N⌉/√β` of the smallest square holding the trial lattice.
pub fn packed_side(beta: f64) -> Result<f64> {
    let m = (vortex_count(beta)? as f64).sqrt().ceil();
    Ok(2.0 * m / beta.sqrt())
}

/// Trial state for the unit square at coupling `β`.
///
/// Disjoint balls of radius `1/√β` only fit on a box of side
/// `L = 2⌈√N⌉/√β`, so the lattice is built there and mapped onto the unit
/// square by `u ↦ L·u(L·)`, which preserves `β` and multiplies the energy by
/// `L²`. Returns the state on the unit square and its energy.
pub fn unit_square_trial(beta: f64, n: usize, bc: BoundaryCondition, f: &RadialProfile) -> Result<(ComplexField, f64)> {
    let side = packed_side(beta)?;
    let grid = Grid2D::over_rect([0.0, 0.0], [side, side], [n, n], bc)?;
    let u = vortex_lattice_trial(&grid, beta, f)?;
    let unit = rescale_state(&u, side, 1.0 / side)?;
    let kernel = build_kernel(unit.grid())?;
    let e = Functional::new(&kernel, beta, PotentialSpec::Zero)?
        .energy(&unit)?
        .total;
    Ok((unit, e))
}

/// Winding number of the phase `−Σ_{k≠skip} arg(r − r_k)` along a circle,
/// by summing wrapped phase increments over `samples` chords.
pub fn phase_winding(centers: &[[f64; 2]], skip: Option<usize>, center: [f64; 2], radius: f64, samples: usize) -> i64 {
    let point = |t: f64| [center[0] + radius * t.cos(), center[1] + radius * t.sin()];
    let mut total = 0.0;
    let mut prev = lattice_phase(point(0.0), centers, skip);
    for s in 1..=samples {
        let next = lattice_phase(point(2.0 * PI * s as f64 / samples as f64), centers, skip);
        let mut d = next - prev;
        d -= 2.0 * PI * (d / (2.0 * PI)).round();
        total += d;
        prev = next;
    }
    (total / (2.0 * PI)).round() as i64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::density;
    use crate::grid::make_grid;

    #[test]
    fn bump_normalisation() {
        // ∫₀¹ (1 − r²)⁴ 2πr dr = π/5
        let f = bump_profile();
        assert!((f.scale() - (5.0 / PI).sqrt()).abs() < 1e-13);
        assert!((f.scale() - 1.261_566_261_010_080_2).abs() < 1e-13);
        assert_eq!(f.eval(1.0), 0.0);
        let d = 1e-6;
        assert!(f.eval(1.0 - d) / d < 1e-5, "derivative at the edge vanishes");
        let gl = GaussLegendre::new(NonZeroUsize::new(40).unwrap());
        let mass = gl.integrate(0.0, 1.0, |r| 2.0 * PI * r * f.eval(r).powi(2));
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lattice_on_unit_square() {
        let dom = Rect {
            lo: [0.0, 0.0],
            hi: [1.0, 1.0],
        };
        let c = lattice_centers(&dom, 9);
        assert_eq!(c.len(), 9);
        assert!((c[0][0] - 1.0 / 6.0).abs() < 1e-15 && (c[8][1] - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(lattice_centers(&dom, 5).len(), 5);
    }

    #[test]
    fn packing_failure_is_reported() {
        let g = make_grid((1.0, 1.0), (64, 64), BoundaryCondition::Free).unwrap();
        let err = vortex_lattice_trial(&g, 4.0, &bump_profile()).unwrap_err();
        assert!(matches!(err, AfError::Geometry(_)));
    }

    #[test]
    fn single_bump_has_no_phase() {
        let g = make_grid((2.0, 2.0), (64, 64), BoundaryCondition::Free).unwrap();
        let u = vortex_lattice_trial(&g, 1.0, &bump_profile()).unwrap();
        assert!(u.values().iter().all(|z| z.im == 0.0 && z.re >= 0.0));
    }

    #[test]
    fn density_is_sum_of_disjoint_bumps() {
        let g = make_grid((2.0, 2.0), (128, 128), BoundaryCondition::Free).unwrap();
        let f = bump_profile();
        let beta = 9.0;
        let u = vortex_lattice_trial(&g, beta, &f).unwrap();
        let (radius, centers) = trial_geometry(&g.domain(), beta).unwrap();
        let rho = density(&u);
        let raw: Vec<f64> = (0..g.len())
            .map(|i| {
                let r = g.coords(i % 128, i / 128);
                centers
                    .iter()
                    .map(|c| f.eval(beta.sqrt() * (r[0] - c[0]).hypot(r[1] - c[1])).powi(2))
                    .sum()
            })
            .collect();
        let norm: f64 = raw.iter().sum::<f64>() * g.cell_area();
        for (i, (a, b)) in rho.values().iter().zip(&raw).enumerate() {
            assert!((a - b / norm).abs() < 1e-12, "node {i}");
        }
        assert!(radius > 0.0);
    }

    #[test]
    fn phase_factor_windings() {
        let dom = Rect {
            lo: [0.0, 0.0],
            hi: [2.0, 2.0],
        };
        let centers = lattice_centers(&dom, 9);
        let r = 1.0 / 3.0;
        for j in 0..9 {
            assert_eq!(phase_winding(&centers, Some(j), [1.0, 1.0], 3.0, 4096), -8);
            assert_eq!(phase_winding(&centers, Some(j), centers[j], 0.5 * r, 512), 0);
            let k = (j + 1) % 9;
            assert_eq!(phase_winding(&centers, Some(j), centers[k], 0.5 * r, 512), -1);
        }
    }

    #[test]
    fn factorization_at_beta_one_is_exact() {
        let g = make_grid((2.0, 2.0), (64, 64), BoundaryCondition::Free).unwrap();
        let f = bump_profile();
        let u = vortex_lattice_trial(&g, 1.0, &f).unwrap();
        let (lhs, rhs) = factorization_check(&u, 1.0, &f).unwrap();
        assert!((lhs - rhs).abs() < 1e-12 * rhs);
    }

    #[test]
    fn factorization_at_beta_four() {
        let g = make_grid((2.0, 2.0), (128, 128), BoundaryCondition::Free).unwrap();
        let f = bump_profile();
        let u = vortex_lattice_trial(&g, 4.0, &f).unwrap();
        let (lhs, rhs) = factorization_check(&u, 4.0, &f).unwrap();
        assert!((lhs - rhs).abs() < 2e-2 * rhs, "{lhs} vs {rhs}");
    }

    #[test]
    fn unit_square_trial_scales_exactly() {
        let f = bump_profile();
        let (unit, e) = unit_square_trial(4.0, 64, BoundaryCondition::Free, &f).unwrap();
        assert!((unit.grid().area() - 1.0).abs() < 1e-12);
        assert!((unit.norm() - 1.0).abs() < 1e-12);
        let g = make_grid((2.0, 2.0), (64, 64), BoundaryCondition::Free).unwrap();
        let u = vortex_lattice_trial(&g, 4.0, &f).unwrap();
        let k = build_kernel(&g).unwrap();
        let e2 = Functional::new(&k, 4.0, PotentialSpec::Zero)
            .unwrap()
            .energy(&u)
            .unwrap()
            .total;
        assert!((e - 4.0 * e2).abs() < 1e-10 * e);
    }
}
