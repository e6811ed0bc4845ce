//! Thomas–Fermi theory: `E^TF_β[ρ] = ∫ e11·β·ρ² + V·ρ` over normalised `ρ ≥ 0`.
//!
//! For `V` homogeneous of degree `s` the minimiser is `[λ − V]₊ / (2 e11 β)`.
//! Along each ray the support ends at `R_θ = (λ / V(e_θ))^{1/s}`, so every
//! radial integral has a closed form and only the angular integral is done
//! numerically, by the periodic trapezoid rule refined until it settles.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

use crate::error::{AfError, Result};
use crate::field::ScalarField;
use crate::grid::Rect;
use crate::potential::PotentialSpec;

/// Default `e(1,1)`: the proven lower bound `2π`.
pub const DEFAULT_E11: f64 = 2.0 * PI;

/// Relative tolerance for the normalisation check in [`tf_energy`].
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TfShape {
    /// Homogeneous trap of degree `s`.
    Trapped { potential: PotentialSpec, s: f64 },
    /// `V = 0` on a bounded domain: the uniform density.
    Uniform { domain: Rect },
}

/// Minimiser of the Thomas–Fermi functional at a given `β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TfProfile {
    pub shape: TfShape,
    pub e11: f64,
    pub beta: f64,
    /// Chemical potential `λ_TF`.
    pub lambda: f64,
    /// Minimal energy `E^TF_β`.
    pub energy: f64,
    /// Radius of the smallest centred ball containing the support.
    pub support_radius: f64,
}

/// `∫₀^{2π} f(θ) dθ` by the trapezoid rule, doubling until two successive
/// estimates agree to `1e-15` relative.
pub fn periodic_integral(f: impl Fn(f64) -> f64) -> f64 {
    let trapezoid = |m: usize| -> f64 {
        let h = 2.0 * PI / m as f64;
        h * (0..m).map(|k| f(k as f64 * h)).sum::<f64>()
    };
    let mut m = 64;
    let mut prev = trapezoid(m);
    while m < 1 << 20 {
        m *= 2;
        let next = trapezoid(m);
        if (next - prev).abs() <= 1e-15 * next.abs() {
            return next;
        }
        prev = next;
    }
    prev
}

fn check_e11(e11: f64) -> Result<()> {
    if e11 > 0.0 && e11.is_finite() {
        Ok(())
    } else {
        Err(AfError::Config(format!("e11 must be positive, got {e11}")))
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(AfError::Config(format!("beta must be positive, got {beta}")))
    }
}

/// Mass of `[λ − V]₊/(2 e11)` for a homogeneous trap:
/// `λ^{1+2/s} · s/(2(s+2)) · ∫ g^{−2/s} dθ / (2 e11)` with `g(θ) = V(e_θ)`.
struct TrapIntegrals {
    s: f64,
    /// `∫ g^{−2/s} dθ`
    angular: f64,
}

impl TrapIntegrals {
    fn new(v: &PotentialSpec) -> Result<Self> {
        let s = v
            .degree()
            .ok_or_else(|| AfError::Model("the Thomas-Fermi trap needs a homogeneous potential".into()))?;
        let angular = periodic_integral(|t| v.angular(t).powf(-2.0 / s));
        if !(angular.is_finite() && angular > 0.0) {
            return Err(AfError::Model("potential does not confine in every direction".into()));
        }
        Ok(Self { s, angular })
    }

    fn mass(&self, lambda: f64, e11: f64) -> f64 {
        let s = self.s;
        lambda.powf(1.0 + 2.0 / s) * s / (2.0 * (s + 2.0)) * self.angular / (2.0 * e11)
    }

    /// `∫ e11 ρ² + V ρ` for `ρ = [λ − V]₊/(2 e11)`.
    fn energy(&self, lambda: f64, e11: f64) -> f64 {
        let s = self.s;
        lambda.powf(2.0 + 2.0 / s) * s / (2.0 * (s + 1.0)) * self.angular / (4.0 * e11)
    }
}

/// Bisection for the root of a nondecreasing `f` with `f(0) < 0`; the upper
/// end of the bracket is found by doubling.
fn monotone_root(f: impl Fn(f64) -> f64) -> Result<f64> {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    if !(f(lo) < 0.0) {
        return Err(AfError::Model("mass function is not negative at zero".into()));
    }
    let mut doublings = 0;
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 1100 || !hi.is_finite() {
            return Err(AfError::Model("could not bracket the chemical potential".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The Thomas–Fermi minimiser at `β = 1`.
pub fn tf_minimizer(v: &PotentialSpec, e11: f64) -> Result<TfProfile> {
    tf_minimizer_at(v, e11, 1.0)
}

/// The Thomas–Fermi minimiser at coupling `β`, solved directly.
pub fn tf_minimizer_at(v: &PotentialSpec, e11: f64, beta: f64) -> Result<TfProfile> {
    check_e11(e11)?;
    check_beta(beta)?;
    let (s, a, b) = match *v {
        PotentialSpec::Homogeneous { s, a, b } => (s, a, b),
        PotentialSpec::Zero => {
            return Err(AfError::Model(
                "V = 0 has no trapped minimiser; use tf_uniform on a bounded domain".into(),
            ))
        }
    };
    let ints = TrapIntegrals::new(v)?;
    let coupling = e11 * beta;
    let lambda = monotone_root(|l| ints.mass(l, coupling) - 1.0)?;
    Ok(TfProfile {
        shape: TfShape::Trapped { potential: *v, s },
        e11,
        beta,
        lambda,
        energy: ints.energy(lambda, coupling),
        support_radius: lambda.powf(1.0 / s) / a.min(b).sqrt(),
    })
}

/// Uniform minimiser of the untrapped problem on `domain`.
pub fn tf_uniform(domain: Rect, e11: f64, beta: f64) -> Result<TfProfile> {
    check_e11(e11)?;
    check_beta(beta)?;
    let area = domain.area();
    let energy = e11 * beta / area;
    Ok(TfProfile {
        shape: TfShape::Uniform { domain },
        e11,
        beta,
        lambda: 2.0 * energy,
        energy,
        support_radius: 0.5 * domain.width().hypot(domain.height()),
    })
}

impl TfProfile {
    pub fn degree(&self) -> Option<f64> {
        match self.shape {
            TfShape::Trapped { s, .. } => Some(s),
            TfShape::Uniform { .. } => None,
        }
    }

    pub fn potential(&self) -> PotentialSpec {
        match self.shape {
            TfShape::Trapped { potential, .. } => potential,
            TfShape::Uniform { .. } => PotentialSpec::Zero,
        }
    }

    /// `ρ^TF_β(r)`.
    pub fn density(&self, r: [f64; 2]) -> f64 {
        match self.shape {
            TfShape::Trapped { potential, .. } => {
                (self.lambda - potential.eval(r)).max(0.0) / (2.0 * self.e11 * self.beta)
            }
            TfShape::Uniform { domain } => {
                let inside =
                    r[0] >= domain.lo[0] && r[0] <= domain.hi[0] && r[1] >= domain.lo[1] && r[1] <= domain.hi[1];
                if inside {
                    1.0 / domain.area()
                } else {
                    0.0
                }
            }
        }
    }

    /// `‖ρ‖₂²` in closed form.
    pub fn density_l2_squared(&self) -> f64 {
        match self.shape {
            TfShape::Trapped { potential, s } => {
                let ang = periodic_integral(|t| potential.angular(t).powf(-2.0 / s));
                let c = self.e11 * self.beta;
                let radial = 0.5 - 2.0 / (s + 2.0) + 1.0 / (2.0 * s + 2.0);
                self.lambda.powf(2.0 + 2.0 / s) * radial * ang / (4.0 * c * c)
            }
            TfShape::Uniform { domain } => 1.0 / domain.area(),
        }
    }

    /// The same problem at coupling `beta`, by the exact scaling law.
    pub fn at_beta(&self, beta: f64) -> Result<TfProfile> {
        check_beta(beta)?;
        let ratio = beta / self.beta;
        match self.shape {
            TfShape::Trapped { s, .. } => {
                let p = ratio.powf(s / (s + 2.0));
                Ok(TfProfile {
                    beta,
                    lambda: self.lambda * p,
                    energy: self.energy * p,
                    support_radius: self.support_radius * ratio.powf(1.0 / (s + 2.0)),
                    ..*self
                })
            }
            TfShape::Uniform { domain } => tf_uniform(domain, self.e11, beta),
        }
    }

    /// `β^{−2/(s+2)} ρ₁(β^{−1/(s+2)} r)` for a `β = 1` profile.
    pub fn scaled_density(&self, beta: f64, r: [f64; 2]) -> f64 {
        match self.shape {
            TfShape::Trapped { s, .. } => {
                let l = beta.powf(-1.0 / (s + 2.0));
                l * l * self.density([l * r[0], l * r[1]])
            }
            TfShape::Uniform { .. } => self.density(r),
        }
    }

    /// Mass and energy by polar Gauss–Legendre quadrature, independent of the
    /// closed-form radial integrals. Returns `(mass, energy, ‖ρ‖₂²)`.
    pub fn quadrature_check(&self, radial_nodes: usize, angular_nodes: usize) -> (f64, f64, f64) {
        let TfShape::Trapped { potential, s } = self.shape else {
            let a = self.density(self.centre());
            let area = match self.shape {
                TfShape::Uniform { domain } => domain.area(),
                TfShape::Trapped { .. } => unreachable!(),
            };
            return (a * area, self.energy, a * a * area);
        };
        let gl = GaussLegendre::new(NonZeroUsize::new(radial_nodes.max(2)).expect("nonzero"));
        let c = self.e11 * self.beta;
        let h = 2.0 * PI / angular_nodes as f64;
        let (mut mass, mut energy, mut l2) = (0.0, 0.0, 0.0);
        for k in 0..angular_nodes {
            let t = k as f64 * h;
            let (ct, st) = (t.cos(), t.sin());
            let r_end = (self.lambda / potential.angular(t)).powf(1.0 / s);
            mass += h * gl.integrate(0.0, r_end, |r| self.density([r * ct, r * st]) * r);
            energy += h * gl.integrate(0.0, r_end, |r| {
                let p = [r * ct, r * st];
                let rho = self.density(p);
                (c * rho * rho + potential.eval(p) * rho) * r
            });
            l2 += h * gl.integrate(0.0, r_end, |r| self.density([r * ct, r * st]).powi(2) * r);
        }
        (mass, energy, l2)
    }

    fn centre(&self) -> [f64; 2] {
        match self.shape {
            TfShape::Uniform { domain } => domain.center(),
            TfShape::Trapped { .. } => [0.0, 0.0],
        }
    }

    /// Half side of the computational box for coupling `beta`: 1.5 times the
    /// support radius at that coupling.
    pub fn box_half_width(&self, beta: f64) -> Result<f64> {
        Ok(1.5 * self.at_beta(beta)?.support_radius)
    }
}

/// `β^{s/(s+2)} E₁`.
pub fn tf_scale(e1: f64, beta: f64, s: f64) -> f64 {
    beta.powf(s / (s + 2.0)) * e1
}

/// `E^TF_β[ρ]` by the grid quadrature.
pub fn tf_energy(rho: &ScalarField, beta: f64, v: &PotentialSpec, e11: f64) -> Result<f64> {
    check_e11(e11)?;
    if rho.values().iter().any(|r| *r < 0.0 || !r.is_finite()) {
        return Err(AfError::Contract(
            "Thomas-Fermi density must be finite and nonnegative".into(),
        ));
    }
    let mass = rho.integral();
    if (mass - 1.0).abs() > MASS_TOLERANCE {
        return Err(AfError::Contract(format!(
            "Thomas-Fermi density has mass {mass}, expected 1"
        )));
    }
    let grid = rho.grid();
    let w = grid.cell_area();
    let mut sum = 0.0;
    for iy in 0..grid.ny() {
        for ix in 0..grid.nx() {
            let r = rho.at(ix, iy);
            sum += e11 * beta * r * r + v.eval(grid.coords(ix, iy)) * r;
        }
    }
    Ok(w * sum)
}

/// `e(γ, λ) = γ λ² e11`, the energy density of the homogeneous gas.
pub fn homogeneous_energy(gamma: f64, density: f64, e11: f64) -> f64 {
    gamma * density * density * e11
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, BoundaryCondition, Grid2D};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs())
    }

    #[test]
    fn harmonic_closed_forms() {
        // radial oracle: ∫ (λ − r²)₊ r dr dθ / (4π) = λ²/8, so λ = 2√2 and E = λ³/12
        let v = PotentialSpec::harmonic(1.0, 1.0).unwrap();
        let p = tf_minimizer(&v, DEFAULT_E11).unwrap();
        let lambda = 2.0 * 2.0f64.sqrt();
        assert!(rel(p.lambda, lambda) < 1e-12);
        assert!(rel(p.energy, lambda.powi(3) / 12.0) < 1e-12);
        assert!((p.energy - 1.885_618_083_164_126_7).abs() < 1e-12);
        assert!(rel(p.support_radius, lambda.sqrt()) < 1e-12);
    }

    #[test]
    fn anisotropic_angular_integral() {
        // ∫ dθ / (a cos² + b sin²) = 2π/√(ab)
        let (a, b) = (0.7, 5.3);
        let v = PotentialSpec::harmonic(a, b).unwrap();
        let got = periodic_integral(|t| 1.0 / v.angular(t));
        assert!(rel(got, 2.0 * PI / (a * b).sqrt()) < 1e-14);
        let p = tf_minimizer(&v, 3.0).unwrap();
        // mass = λ² π / (4 e11 √(ab)) for the anisotropic harmonic trap
        let lambda = (4.0 * 3.0 * (a * b).sqrt() / PI).sqrt();
        assert!(rel(p.lambda, lambda) < 1e-12, "{} vs {lambda}", p.lambda);
    }

    #[test]
    fn profile_invariants_by_independent_quadrature() {
        for v in [
            PotentialSpec::harmonic(1.0, 1.0).unwrap(),
            PotentialSpec::harmonic(0.5, 2.0).unwrap(),
            PotentialSpec::power(3.0).unwrap(),
            PotentialSpec::homogeneous(4.0, 1.0, 3.0).unwrap(),
        ] {
            let p = tf_minimizer(&v, 7.0).unwrap();
            let (mass, energy, l2) = p.quadrature_check(48, 512);
            assert!((mass - 1.0).abs() < 1e-10, "{v}: mass {mass}");
            assert!(rel(energy, p.energy) < 1e-10, "{v}: {energy} vs {}", p.energy);
            assert!(rel(l2, p.density_l2_squared()) < 1e-10);
            assert!(rel(p.lambda, p.energy + p.e11 * p.density_l2_squared()) < 1e-10);
            let outside = [p.support_radius * 1.0001, 0.0];
            assert_eq!(p.density(outside), 0.0);
            assert_eq!(p.density([-outside[0], 0.0]), 0.0);
        }
    }

    #[test]
    fn scaling_matches_direct_solve() {
        for v in [
            PotentialSpec::harmonic(1.0, 1.0).unwrap(),
            PotentialSpec::power(3.0).unwrap(),
        ] {
            let s = v.degree().unwrap();
            let p1 = tf_minimizer(&v, DEFAULT_E11).unwrap();
            for beta in [1.0, 10.0, 100.0] {
                let direct = tf_minimizer_at(&v, DEFAULT_E11, beta).unwrap();
                let scaled = p1.at_beta(beta).unwrap();
                assert!(rel(direct.energy, scaled.energy) < 1e-12);
                assert!(rel(direct.energy / beta.powf(s / (s + 2.0)), p1.energy) < 1e-12);
                assert!(rel(tf_scale(p1.energy, beta, s), direct.energy) < 1e-12);
                assert!(rel(direct.support_radius, p1.support_radius * beta.powf(1.0 / (s + 2.0))) < 1e-12);
                for r in [[0.3, 0.1], [1.0, -0.7], [2.0, 2.0]] {
                    let a = direct.density(r);
                    let b = p1.scaled_density(beta, r);
                    assert!((a - b).abs() <= 1e-12 * a.max(1e-300), "{a} vs {b}");
                }
            }
        }
        assert_eq!(tf_scale(3.0, 16.0, 2.0), 12.0);
        assert_eq!(tf_scale(3.0, 1.0, 2.7), 3.0);
    }

    #[test]
    fn scaled_density_stays_normalised() {
        let v = PotentialSpec::harmonic(1.0, 1.0).unwrap();
        let p = tf_minimizer(&v, DEFAULT_E11).unwrap();
        let beta = 16.0;
        let radius = p.at_beta(beta).unwrap().support_radius;
        let g = Grid2D::centered([2.2 * radius, 2.2 * radius], [400, 400], BoundaryCondition::Free).unwrap();
        let rho = ScalarField::from_fn(g, |r| p.scaled_density(beta, r));
        assert!((rho.integral() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn grid_energy_of_uniform_density() {
        let g = make_grid((1.0, 1.0), (32, 32), BoundaryCondition::Neumann).unwrap();
        let rho = ScalarField::from_fn(g, |_| 1.0);
        for beta in [1.0, 3.5] {
            let e = tf_energy(&rho, beta, &PotentialSpec::Zero, DEFAULT_E11).unwrap();
            assert!(rel(e, 2.0 * PI * beta) < 1e-13);
        }
        let u = tf_uniform(g.domain(), DEFAULT_E11, 2.0).unwrap();
        assert!(rel(u.energy, 4.0 * PI) < 1e-15);
        assert_eq!(u.density([0.5, 0.5]), 1.0);
        assert!(rel(u.lambda, u.energy + u.e11 * u.beta * u.density_l2_squared()) < 1e-15);
        assert!(matches!(
            tf_minimizer(&PotentialSpec::Zero, 1.0),
            Err(AfError::Model(_))
        ));
    }

    #[test]
    fn beta_zero_energy_is_potential_only() {
        let g = Grid2D::centered([2.0, 2.0], [40, 40], BoundaryCondition::Free).unwrap();
        let v = PotentialSpec::harmonic(1.0, 1.0).unwrap();
        let raw = ScalarField::from_fn(g, |[x, y]| (-(x * x + y * y)).exp());
        let rho = raw.scaled(1.0 / raw.integral());
        let e = tf_energy(&rho, 0.0, &v, DEFAULT_E11).unwrap();
        let pot: f64 = (0..g.len())
            .map(|i| {
                let (ix, iy) = (i % 40, i / 40);
                v.eval(g.coords(ix, iy)) * rho.values()[i]
            })
            .sum::<f64>()
            * g.cell_area();
        assert!(rel(e, pot) < 1e-14);
        assert!(matches!(
            tf_energy(&raw.scaled(2.0), 1.0, &v, DEFAULT_E11),
            Err(AfError::Contract(_))
        ));
    }

    #[test]
    fn homogeneous_energy_law() {
        assert_eq!(homogeneous_energy(1.0, 1.0, 7.0), 7.0);
        let area: f64 = 3.0;
        assert!(rel(homogeneous_energy(2.0, area.powf(-0.5), 7.0), 2.0 / area * 7.0) < 1e-15);
        assert!(
            rel(
                homogeneous_energy(1.0, 2.0, 1.5),
                4.0 * homogeneous_energy(1.0, 1.0, 1.5)
            ) < 1e-15
        );
    }

    #[test]
    fn minimiser_beats_random_densities() {
        let v = PotentialSpec::harmonic(1.0, 1.0).unwrap();
        let p = tf_minimizer(&v, DEFAULT_E11).unwrap();
        let g = Grid2D::centered([4.0, 4.0], [96, 96], BoundaryCondition::Free).unwrap();
        let raw = ScalarField::from_fn(g, |r| p.density(r));
        let tf = raw.scaled(1.0 / raw.integral());
        let best = tf_energy(&tf, 1.0, &v, DEFAULT_E11).unwrap();
        assert!(rel(best, p.energy) < 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let (cx, cy, w, mix) = (
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(0.3..2.0),
                rng.gen_range(0.0..1.0),
            );
            let trial = ScalarField::from_fn(g, |[x, y]| {
                let bump = (-((x - cx).powi(2) + (y - cy).powi(2)) / (w * w)).exp();
                mix * bump + (1.0 - mix) * p.density([x, y])
            });
            let trial = trial.scaled(1.0 / trial.integral());
            let e = tf_energy(&trial, 1.0, &v, DEFAULT_E11).unwrap();
            assert!(e >= best - 1e-12, "{e} < {best}");
        }
    }
}
