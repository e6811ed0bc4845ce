//! Analyses of computed states: vortices, coarse-grained densities, weak
//! distances between densities and the comparison with Thomas–Fermi theory.

use std::f64::consts::PI;

use crate::error::{AfError, Result};
use crate::field::{density, ComplexField, ScalarField};
use crate::grid::Grid2D;
use crate::tf::TfProfile;

/// Default modulus floor for vortex detection, relative to the median modulus.
pub const VORTEX_FLOOR_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VortexRecord {
    /// Plaquette centre.
    pub position: [f64; 2],
    pub winding: i32,
}

fn wrap(d: f64) -> f64 {
    d - 2.0 * PI * (d / (2.0 * PI)).round()
}

/// `VORTEX_FLOOR_FRACTION` times the median modulus of `u`.
pub fn default_floor(u: &ComplexField) -> f64 {
    let mut m: Vec<f64> = u.values().iter().map(|z| z.norm()).collect();
    let mid = m.len() / 2;
    let (_, median, _) = m.select_nth_unstable_by(mid, f64::total_cmp);
    VORTEX_FLOOR_FRACTION * *median
}

/// Plaquettes around which the phase of `u` winds. Plaquettes with a corner
/// modulus at or below `floor` are skipped; `None` uses [`default_floor`].
pub fn detect_vortices(u: &ComplexField, floor: Option<f64>) -> Vec<VortexRecord> {
    let floor = floor.unwrap_or_else(|| default_floor(u));
    let grid = u.grid();
    let [nx, ny] = grid.size();
    let [hx, hy] = grid.spacing();
    let v = u.values();
    let mut out = Vec::new();
    for iy in 0..ny - 1 {
        for ix in 0..nx - 1 {
            let n = iy * nx + ix;
            // counter-clockwise with x to the right and y up
            let corners = [v[n], v[n + 1], v[n + 1 + nx], v[n + nx]];
            if corners.iter().any(|z| z.norm() <= floor) {
                continue;
            }
            let sum: f64 = (0..4)
                .map(|k| wrap((corners[(k + 1) % 4] * corners[k].conj()).arg()))
                .sum();
            let winding = (sum / (2.0 * PI)).round() as i32;
            if winding != 0 {
                let c = grid.coords(ix, iy);
                out.push(VortexRecord {
                    position: [c[0] + 0.5 * hx, c[1] + 0.5 * hy],
                    winding: winding.clamp(-4, 4),
                });
            }
        }
    }
    out
}

pub fn total_winding(vortices: &[VortexRecord]) -> i32 {
    vortices.iter().map(|v| v.winding).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoarseCell {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    /// Mean density over the cell.
    pub value: f64,
    pub retained: bool,
}

impl CoarseCell {
    pub fn area(&self) -> f64 {
        (self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1])
    }
}

/// Piecewise-constant approximation of a density on square cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseDensity {
    /// Realised cell side, a whole number of grid spacings.
    pub cell_side: [f64; 2],
    /// Nodes per cell along each axis.
    pub cell_nodes: [usize; 2],
    pub nu: f64,
    pub mu_thr: f64,
    /// `β^{2ν−1+μ}`
    pub threshold: f64,
    pub cells: Vec<CoarseCell>,
    grid: Grid2D,
}

impl CoarseDensity {
    pub fn retained(&self) -> impl Iterator<Item = &CoarseCell> {
        self.cells.iter().filter(|c| c.retained)
    }

    /// `Σ_retained ρ_j |Q_j|`
    pub fn retained_mass(&self) -> f64 {
        self.retained().map(|c| c.value * c.area()).sum()
    }

    /// `ρ̄` sampled on the nodes of the original grid.
    pub fn to_field(&self) -> ScalarField {
        let [nx, ny] = self.grid.size();
        let [kx, ky] = self.cell_nodes;
        let cols = nx.div_ceil(kx);
        let mut values = vec![0.0; nx * ny];
        for iy in 0..ny {
            for ix in 0..nx {
                let cell = &self.cells[(iy / ky) * cols + ix / kx];
                if cell.retained {
                    values[iy * nx + ix] = cell.value;
                }
            }
        }
        ScalarField::from_values(self.grid, values).expect("sizes match")
    }
}

/// Tiles the grid with cells of side about `β^{−ν}` and keeps the cells whose
/// mean density is at least `β^{2ν−1+μ_thr}`.
pub fn coarse_grain(rho: &ScalarField, beta: f64, nu: f64, mu_thr: f64) -> Result<CoarseDensity> {
    if !(nu > 0.0 && nu < 0.5) {
        return Err(AfError::Contract(format!(
            "coarse graining needs 0 < ν < 1/2, got ν = {nu}"
        )));
    }
    if !(mu_thr > 0.0 && mu_thr < 1.0 - 2.0 * nu) {
        return Err(AfError::Contract(format!(
            "coarse graining needs 0 < μ < 1 − 2ν = {}, got μ = {mu_thr}",
            1.0 - 2.0 * nu
        )));
    }
    if !(beta > 0.0) {
        return Err(AfError::Contract(format!("coarse graining needs β > 0, got {beta}")));
    }
    let grid = *rho.grid();
    let side = beta.powf(-nu);
    let [hx, hy] = grid.spacing();
    let kx = (side / hx).round() as usize;
    let ky = (side / hy).round() as usize;
    if kx < 2 || ky < 2 {
        return Err(AfError::Resolution(format!(
            "cell side {side:.4e} spans fewer than 2 grid spacings ({hx:.4e} x {hy:.4e})"
        )));
    }
    let [nx, ny] = grid.size();
    let threshold = beta.powf(2.0 * nu - 1.0 + mu_thr);
    let dom = grid.domain();
    let mut cells = Vec::new();
    for by in (0..ny).step_by(ky) {
        for bx in (0..nx).step_by(kx) {
            let (ex, ey) = ((bx + kx).min(nx), (by + ky).min(ny));
            let mut sum = 0.0;
            for iy in by..ey {
                sum += rho.values()[iy * nx + bx..iy * nx + ex].iter().sum::<f64>();
            }
            let count = ((ex - bx) * (ey - by)) as f64;
            let value = sum / count;
            let lo = [dom.lo[0] + bx as f64 * hx, dom.lo[1] + by as f64 * hy];
            let hi = [
                (dom.lo[0] + ex as f64 * hx).min(dom.hi[0]),
                (dom.lo[1] + ey as f64 * hy).min(dom.hi[1]),
            ];
            cells.push(CoarseCell {
                lo,
                hi,
                value,
                retained: value >= threshold,
            });
        }
    }
    Ok(CoarseDensity {
        cell_side: [kx as f64 * hx, ky as f64 * hy],
        cell_nodes: [kx, ky],
        nu,
        mu_thr,
        threshold,
        cells,
        grid,
    })
}

/// One Lipschitz test function of the weak-norm dictionary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    /// `(R − |r − c|)₊`
    Cone { center: [f64; 2], radius: f64 },
    /// `(ℓ − |dx|)₊ (ℓ − |dy|)₊ / (√2 ℓ)`
    Hat { center: [f64; 2], half_width: f64 },
}

impl TestFunction {
    pub fn eval(&self, r: [f64; 2]) -> f64 {
        match *self {
            TestFunction::Cone { center, radius } => (radius - (r[0] - center[0]).hypot(r[1] - center[1])).max(0.0),
            TestFunction::Hat { center, half_width: l } => {
                let a = (l - (r[0] - center[0]).abs()).max(0.0);
                let b = (l - (r[1] - center[1]).abs()).max(0.0);
                a * b / (std::f64::consts::SQRT_2 * l)
            }
        }
    }
}

/// Number of dyadic scales in the dictionary.
pub const DICTIONARY_SCALES: usize = 3;

/// Cones and tensor hats at three dyadic scales, centred on a lattice that is
/// symmetric about `center`, all supported in the closed ball `B_R(center)`.
pub fn dictionary(center: [f64; 2], radius: f64) -> Vec<TestFunction> {
    let mut out = Vec::new();
    for s in 0..DICTIONARY_SCALES {
        let rc = radius / (1u32 << s) as f64;
        let l = rc / std::f64::consts::SQRT_2;
        let reach = (1u32 << s) as i32;
        for j in -reach..=reach {
            for i in -reach..=reach {
                let cone_off = [i as f64 * rc, j as f64 * rc];
                if cone_off[0].hypot(cone_off[1]) + rc <= radius * (1.0 + 1e-12) {
                    out.push(TestFunction::Cone {
                        center: [center[0] + cone_off[0], center[1] + cone_off[1]],
                        radius: rc,
                    });
                }
                let hat_off = [i as f64 * l, j as f64 * l];
                if hat_off[0].hypot(hat_off[1]) + l * std::f64::consts::SQRT_2 <= radius * (1.0 + 1e-12) {
                    out.push(TestFunction::Hat {
                        center: [center[0] + hat_off[0], center[1] + hat_off[1]],
                        half_width: l,
                    });
                }
            }
        }
    }
    out
}

/// `max_φ |∫ φ (ρ₁ − ρ₂)|` over the dictionary for the ball `B_R(center)`.
pub fn weak_norm_distance(rho1: &ScalarField, rho2: &ScalarField, radius: f64, center: [f64; 2]) -> Result<f64> {
    rho1.grid().check_same(rho2.grid(), "weak_norm_distance")?;
    let grid = rho1.grid();
    if !(radius > 0.0) || !grid.domain().contains_disc(center, radius) {
        return Err(AfError::Geometry(format!(
            "ball of radius {radius} at ({}, {}) is not inside the grid domain",
            center[0], center[1]
        )));
    }
    let w = grid.cell_area();
    let [hx, hy] = grid.spacing();
    let o = grid.origin();
    let ix0 = (((center[0] - radius - o[0]) / hx).floor().max(0.0)) as usize;
    let iy0 = (((center[1] - radius - o[1]) / hy).floor().max(0.0)) as usize;
    let ix1 = ((((center[0] + radius - o[0]) / hx).ceil()) as usize).min(grid.nx() - 1);
    let iy1 = ((((center[1] + radius - o[1]) / hy).ceil()) as usize).min(grid.ny() - 1);
    let mut nodes = Vec::new();
    for iy in iy0..=iy1 {
        for ix in ix0..=ix1 {
            let r = grid.coords(ix, iy);
            if (r[0] - center[0]).hypot(r[1] - center[1]) <= radius {
                let i = grid.idx(ix, iy);
                nodes.push((r, rho1.values()[i] - rho2.values()[i]));
            }
        }
    }
    let best = dictionary(center, radius)
        .iter()
        .map(|phi| (w * nodes.iter().map(|(r, d)| phi.eval(*r) * d).sum::<f64>()).abs())
        .fold(0.0, f64::max);
    Ok(best)
}

/// Distances of a homogeneous state from the uniform one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousDistance {
    /// `‖ |Ω|^{1/2}|u| − 1 ‖₂ / |Ω|^{1/2}`
    pub l2: f64,
    /// Weak distance between `|u|²` and `1/|Ω|` on the largest centred ball.
    pub weak: f64,
}

pub fn homogeneous_distance(u: &ComplexField) -> Result<HomogeneousDistance> {
    let grid = u.grid();
    let dom = grid.domain();
    let area = dom.area();
    let w = grid.cell_area();
    let sqrt_area = area.sqrt();
    let l2 = (w * u
        .values()
        .iter()
        .map(|z| (sqrt_area * z.norm() - 1.0).powi(2))
        .sum::<f64>())
    .sqrt()
        / sqrt_area;
    let rho = density(u);
    let flat = ScalarField::from_fn(*grid, |_| 1.0 / area);
    let radius = 0.5 * dom.width().min(dom.height()) * (1.0 - 1e-9);
    let weak = weak_norm_distance(&rho, &flat, radius, dom.center())?;
    Ok(HomogeneousDistance { l2, weak })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallDistance {
    pub center: [f64; 2],
    pub radius: f64,
    pub distance: f64,
}

/// Rescaled minimiser density against the Thomas–Fermi profile.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaReport {
    pub beta: f64,
    pub balls: Vec<BallDistance>,
    pub max_distance: f64,
    /// Support radius of the `β = 1` profile.
    pub tf_support_radius: f64,
    /// Largest rescaled radius where the density is at least
    /// `SUPPORT_FRACTION` of its maximum.
    pub measured_support_radius: f64,
    /// `‖ρ̃ − ρ^TF₁‖₁` on the rescaled grid.
    pub l1_distance: f64,
}

/// Density level, relative to the peak, that marks the edge of the support.
pub const SUPPORT_FRACTION: f64 = 0.01;

/// Nine balls of radius `0.6 R₀`: one at the centre and eight on the circle of
/// radius `0.55 R₀`. Together they cover the disc of radius `R₀`.
pub fn lda_balls(r0: f64) -> Vec<([f64; 2], f64)> {
    let radius = 0.6 * r0;
    let mut balls = vec![([0.0, 0.0], radius)];
    for k in 0..8 {
        let t = k as f64 * PI / 4.0;
        balls.push(([0.55 * r0 * t.cos(), 0.55 * r0 * t.sin()], radius));
    }
    balls
}

/// Compares `β^{2/(s+2)} |u(β^{1/(s+2)} x)|²` with `ρ^TF₁` on balls covering
/// the support. `tf` is the `β = 1` profile of the same potential.
pub fn lda_compare(u: &ComplexField, beta: f64, tf: &TfProfile) -> Result<LdaReport> {
    let s = tf
        .degree()
        .ok_or_else(|| AfError::Model("the local density comparison needs a trapping potential".into()))?;
    if !(beta > 0.0) {
        return Err(AfError::Config(format!("beta must be positive, got {beta}")));
    }
    let length = beta.powf(1.0 / (s + 2.0));
    let grid = u.grid().dilated(1.0 / length)?;
    let dom = grid.domain();
    let r0 = tf.at_beta(1.0)?.support_radius;
    if !dom.contains_disc([0.0, 0.0], r0) {
        return Err(AfError::Geometry(format!(
            "the rescaled Thomas-Fermi support (radius {r0:.4}) exceeds the computational box"
        )));
    }
    let amp = length * length;
    let rho = ScalarField::from_values(grid, u.values().iter().map(|z| amp * z.norm_sqr()).collect())?;
    let reference = ScalarField::from_fn(grid, |r| tf.scaled_density(1.0, r));
    let mut balls = Vec::new();
    for (center, radius) in lda_balls(r0) {
        let radius = radius.min(
            (center[0] - dom.lo[0])
                .min(dom.hi[0] - center[0])
                .min(center[1] - dom.lo[1])
                .min(dom.hi[1] - center[1]),
        );
        let distance = weak_norm_distance(&rho, &reference, radius, center)?;
        balls.push(BallDistance {
            center,
            radius,
            distance,
        });
    }
    let max_distance = balls.iter().map(|b| b.distance).fold(0.0, f64::max);
    let peak = rho.values().iter().cloned().fold(0.0, f64::max);
    let mut measured: f64 = 0.0;
    for iy in 0..grid.ny() {
        for ix in 0..grid.nx() {
            if rho.at(ix, iy) >= SUPPORT_FRACTION * peak {
                let r = grid.coords(ix, iy);
                measured = measured.max(r[0].hypot(r[1]));
            }
        }
    }
    let l1_distance = grid.cell_area()
        * rho
            .values()
            .iter()
            .zip(reference.values())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
    Ok(LdaReport {
        beta,
        balls,
        max_distance,
        tf_support_radius: r0,
        measured_support_radius: measured,
        l1_distance,
    })
}
