//! The self-generated vector potential `A[ρ] = ∇⊥ log|·| ∗ ρ`.
//!
//! The convolution is linear, not circular: the density is zero padded to
//! twice the grid size in each direction and the kernel is tabulated at every
//! node offset. Transforms are pruned to skip rows that are known to be zero.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{AfError, Result};
use crate::field::{diff_x, diff_y, ScalarField, VectorField};
use crate::grid::Grid2D;

/// Largest padded transform we are willing to allocate (complex entries).
const MAX_PADDED: usize = 1 << 26;

/// `∇⊥ log|r| = (−y, x)/|r|²`, with the value at the origin set to zero.
pub fn kernel_value(r: [f64; 2]) -> [f64; 2] {
    let r2 = r[0] * r[0] + r[1] * r[1];
    if r2 == 0.0 {
        return [0.0, 0.0];
    }
    [-r[1] / r2, r[0] / r2]
}

/// Exterior field of a radial mass distribution, `m (q − c)⊥/|q − c|²`.
pub fn exterior_field(mass: f64, center: [f64; 2], query: [f64; 2]) -> Result<[f64; 2]> {
    let d = [query[0] - center[0], query[1] - center[1]];
    if d[0] == 0.0 && d[1] == 0.0 {
        return Err(AfError::Singularity(format!(
            "exterior field queried at its own center ({}, {})",
            center[0], center[1]
        )));
    }
    let k = kernel_value(d);
    Ok([mass * k[0], mass * k[1]])
}

/// Precomputed spectrum of the kernel for one grid.
#[derive(Clone)]
pub struct KernelTable {
    grid: Grid2D,
    padded: [usize; 2],
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    /// Spectrum of `(Kx + iKy)·w/P`, column-major (`kx·Py + ky`).
    spec: Vec<Complex64>,
    /// Spectrum of `(Kx − iKy)·w/P`, same layout.
    spec_conj: Vec<Complex64>,
}

impl std::fmt::Debug for KernelTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelTable")
            .field("grid", &self.grid)
            .field("padded", &self.padded)
            .finish_non_exhaustive()
    }
}

/// Tabulates the kernel on all node offsets of `grid` and transforms it.
pub fn build_kernel(grid: &Grid2D) -> Result<KernelTable> {
    let [nx, ny] = grid.size();
    let (px, py) = (2 * nx, 2 * ny);
    if px.checked_mul(py).is_none_or(|p| p > MAX_PADDED) {
        return Err(AfError::Resource(format!(
            "padded transform of {px}x{py} exceeds the limit of {MAX_PADDED} entries"
        )));
    }
    let mut planner = FftPlanner::<f64>::new();
    let row_fwd = planner.plan_fft_forward(px);
    let row_inv = planner.plan_fft_inverse(px);
    let col_fwd = planner.plan_fft_forward(py);
    let col_inv = planner.plan_fft_inverse(py);

    let [hx, hy] = grid.spacing();
    let scale = grid.cell_area() / (px * py) as f64;
    let offset = |k: usize, n: usize, p: usize| -> Option<i64> {
        if k < n {
            Some(k as i64)
        } else if k > p - n {
            Some(k as i64 - p as i64)
        } else {
            None
        }
    };
    let mut plus = vec![Complex64::new(0.0, 0.0); px * py];
    let mut minus = plus.clone();
    for ky in 0..py {
        let Some(dy) = offset(ky, ny, py) else { continue };
        for kx in 0..px {
            let Some(dx) = offset(kx, nx, px) else { continue };
            let k = kernel_value([dx as f64 * hx, dy as f64 * hy]);
            plus[ky * px + kx] = Complex64::new(k[0], k[1]) * scale;
            minus[ky * px + kx] = Complex64::new(k[0], -k[1]) * scale;
        }
    }

    let mut table = KernelTable {
        grid: *grid,
        padded: [px, py],
        row_fwd,
        row_inv,
        col_fwd,
        col_inv,
        spec: Vec::new(),
        spec_conj: Vec::new(),
    };
    table.spec = table.full_forward(plus);
    table.spec_conj = table.full_forward(minus);
    Ok(table)
}

impl KernelTable {
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn padded_size(&self) -> [usize; 2] {
        self.padded
    }

    /// Forward transform of a fully populated padded array (row-major in,
    /// column-major out).
    fn full_forward(&self, mut rows: Vec<Complex64>) -> Vec<Complex64> {
        let [px, py] = self.padded;
        self.row_fwd.process(&mut rows);
        let mut cols = vec![Complex64::new(0.0, 0.0); px * py];
        for ky in 0..py {
            for kx in 0..px {
                cols[kx * py + ky] = rows[ky * px + kx];
            }
        }
        self.col_fwd.process(&mut cols);
        cols
    }

    /// Forward transform of node data zero padded to the transform size.
    fn forward(&self, values: &[Complex64]) -> Vec<Complex64> {
        let [nx, ny] = self.grid.size();
        let [px, py] = self.padded;
        let mut rows = vec![Complex64::new(0.0, 0.0); ny * px];
        for iy in 0..ny {
            rows[iy * px..iy * px + nx].copy_from_slice(&values[iy * nx..(iy + 1) * nx]);
        }
        self.row_fwd.process(&mut rows);
        let mut cols = vec![Complex64::new(0.0, 0.0); px * py];
        for iy in 0..ny {
            for kx in 0..px {
                cols[kx * py + iy] = rows[iy * px + kx];
            }
        }
        self.col_fwd.process(&mut cols);
        cols
    }

    /// Inverse transform restricted to the grid nodes. Normalisation is folded
    /// into the kernel spectrum.
    fn inverse(&self, mut cols: Vec<Complex64>) -> Vec<Complex64> {
        let [nx, ny] = self.grid.size();
        let [px, py] = self.padded;
        self.col_inv.process(&mut cols);
        let mut rows = vec![Complex64::new(0.0, 0.0); ny * px];
        for iy in 0..ny {
            for kx in 0..px {
                rows[iy * px + kx] = cols[kx * py + iy];
            }
        }
        self.row_inv.process(&mut rows);
        let mut out = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            out.extend_from_slice(&rows[iy * px..iy * px + nx]);
        }
        out
    }

    /// `(Ax, Ay)` for raw node densities.
    pub(crate) fn potential_raw(&self, rho: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let input: Vec<Complex64> = rho.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        let mut spec = self.forward(&input);
        for (s, k) in spec.iter_mut().zip(&self.spec) {
            *s *= k;
        }
        let out = self.inverse(spec);
        (out.iter().map(|z| z.re).collect(), out.iter().map(|z| z.im).collect())
    }

    /// `Kx ∗ fx + Ky ∗ fy` for raw node data.
    pub(crate) fn dual_raw(&self, fx: &[f64], fy: &[f64]) -> Vec<f64> {
        let input: Vec<Complex64> = fx.iter().zip(fy).map(|(&a, &b)| Complex64::new(a, b)).collect();
        let mut spec = self.forward(&input);
        for (s, k) in spec.iter_mut().zip(&self.spec_conj) {
            *s *= k;
        }
        self.inverse(spec).iter().map(|z| z.re).collect()
    }

    /// `Kx ∗ fx + Ky ∗ fy` on the grid, weighted by the cell area.
    pub fn dual(&self, f: &VectorField) -> Result<ScalarField> {
        self.grid.check_same(f.grid(), "dual convolution")?;
        ScalarField::from_values(self.grid, self.dual_raw(f.x(), f.y()))
    }
}

/// `A[ρ]` at every node, by free-space convolution.
pub fn vector_potential(rho: &ScalarField, k: &KernelTable) -> Result<VectorField> {
    k.grid.check_same(rho.grid(), "vector_potential")?;
    let (ax, ay) = k.potential_raw(rho.values());
    VectorField::from_components(k.grid, ax, ay)
}

/// `∂x Ay − ∂y Ax` by the shared difference stencil, one-sided at the edges.
pub fn curl(a: &VectorField) -> ScalarField {
    let grid = *a.grid();
    let dxay = diff_x(a.y(), &grid, false);
    let dyax = diff_y(a.x(), &grid, false);
    let values = dxay.iter().zip(&dyax).map(|(p, q)| p - q).collect();
    ScalarField::from_values(grid, values).expect("difference keeps the grid size")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, BoundaryCondition};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn bump(r: f64, a: f64) -> f64 {
        if r < a {
            (1.0 - (r / a).powi(2)).powi(3)
        } else {
            0.0
        }
    }

    fn brute_force(rho: &ScalarField) -> (Vec<f64>, Vec<f64>) {
        let g = rho.grid();
        let w = g.cell_area();
        let mut ax = vec![0.0; g.len()];
        let mut ay = vec![0.0; g.len()];
        for iy in 0..g.ny() {
            for ix in 0..g.nx() {
                let p = g.coords(ix, iy);
                for jy in 0..g.ny() {
                    for jx in 0..g.nx() {
                        let q = g.coords(jx, jy);
                        let k = kernel_value([p[0] - q[0], p[1] - q[1]]);
                        ax[g.idx(ix, iy)] += w * k[0] * rho.at(jx, jy);
                        ay[g.idx(ix, iy)] += w * k[1] * rho.at(jx, jy);
                    }
                }
            }
        }
        (ax, ay)
    }

    #[test]
    fn kernel_values_at_offsets() {
        assert_eq!(kernel_value([2.0, 0.0]), [0.0, 0.5]);
        assert_eq!(kernel_value([0.0, 0.0]), [0.0, 0.0]);
        assert_eq!(kernel_value([1.0, 1.0]), [-0.5, 0.5]);
        for r in [[0.3, -1.7], [2.5, 4.0], [-1e-3, 7.0]] {
            let k = kernel_value(r);
            let m = kernel_value([-r[0], -r[1]]);
            assert_eq!(k, [-m[0], -m[1]]);
        }
    }

    #[test]
    fn exterior_field_examples() {
        assert_eq!(exterior_field(0.0, [0.0, 0.0], [1.0, 2.0]).unwrap(), [0.0, 0.0]);
        let v = exterior_field(1.0, [0.0, 0.0], [0.0, 3.0]).unwrap();
        assert!((v[0] + 1.0 / 3.0).abs() < 1e-15 && v[1].abs() < 1e-15);
        assert!(matches!(
            exterior_field(1.0, [1.0, 1.0], [1.0, 1.0]),
            Err(AfError::Singularity(_))
        ));
        // (1/β)∇arg(r − c)
        let beta = 4.0;
        let (c, q) = ([0.2, 0.1], [0.9, -0.4]);
        let v = exterior_field(1.0 / beta, c, q).unwrap();
        let d = [q[0] - c[0], q[1] - c[1]];
        let eps = 1e-6;
        let arg = |x: f64, y: f64| y.atan2(x);
        let gx = (arg(d[0] + eps, d[1]) - arg(d[0] - eps, d[1])) / (2.0 * eps);
        let gy = (arg(d[0], d[1] + eps) - arg(d[0], d[1] - eps)) / (2.0 * eps);
        assert!((v[0] - gx / beta).abs() < 1e-8 && (v[1] - gy / beta).abs() < 1e-8);
    }

    #[test]
    fn padded_size_is_linear_convolution() {
        let g = make_grid((1.0, 2.0), (12, 24), BoundaryCondition::Free).unwrap();
        let k = build_kernel(&g).unwrap();
        let [px, py] = k.padded_size();
        assert!(px >= 2 * 12 - 1 && py >= 2 * 24 - 1);
    }

    #[test]
    fn fft_matches_direct_sum() {
        for bc in [BoundaryCondition::Free, BoundaryCondition::Dirichlet] {
            let g = make_grid((1.0, 1.5), (12, 18), bc).unwrap();
            let rho = ScalarField::from_fn(g, |[x, y]| (x * 3.0).sin().abs() + y * y);
            let k = build_kernel(&g).unwrap();
            let a = vector_potential(&rho, &k).unwrap();
            let (bx, by) = brute_force(&rho);
            let scale = bx.iter().chain(&by).map(|v| v.abs()).fold(0.0, f64::max);
            for i in 0..g.len() {
                assert!((a.x()[i] - bx[i]).abs() < 1e-12 * scale);
                assert!((a.y()[i] - by[i]).abs() < 1e-12 * scale);
            }
        }
    }

    #[test]
    fn dual_is_adjoint_of_potential() {
        // Σ w F·(K∗ρ) = −Σ w ρ (K∗F) by oddness of the kernel.
        let g = make_grid((1.0, 1.0), (16, 16), BoundaryCondition::Neumann).unwrap();
        let k = build_kernel(&g).unwrap();
        let rho = ScalarField::from_fn(g, |[x, y]| (5.0 * x).cos() + y);
        let f = VectorField::from_fn(g, |[x, y]| [x * y, (3.0 * y).sin()]);
        let a = vector_potential(&rho, &k).unwrap();
        let lhs: f64 = (0..g.len()).map(|i| a.x()[i] * f.x()[i] + a.y()[i] * f.y()[i]).sum();
        let d = k.dual(&f).unwrap();
        let rhs: f64 = (0..g.len()).map(|i| rho.values()[i] * d.values()[i]).sum();
        assert!((lhs + rhs).abs() < 1e-12 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn zero_density_gives_zero_potential() {
        let g = make_grid((1.0, 1.0), (16, 16), BoundaryCondition::Free).unwrap();
        let k = build_kernel(&g).unwrap();
        let a = vector_potential(&ScalarField::zeros(g), &k).unwrap();
        assert_eq!(a.max_norm(), 0.0);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let g = make_grid((1.0, 1.0), (16, 16), BoundaryCondition::Free).unwrap();
        let h = make_grid((1.0, 1.0), (20, 20), BoundaryCondition::Free).unwrap();
        let k = build_kernel(&g).unwrap();
        assert!(matches!(
            vector_potential(&ScalarField::zeros(h), &k),
            Err(AfError::Contract(_))
        ));
    }

    #[test]
    fn curl_of_simple_fields() {
        let g = make_grid((2.0, 2.0), (32, 32), BoundaryCondition::Free).unwrap();
        let rot = VectorField::from_fn(g, |[x, y]| [-y / 2.0, x / 2.0]);
        assert!(curl(&rot).values().iter().all(|c| (c - 1.0).abs() < 1e-12));
        let konst = VectorField::from_fn(g, |_| [0.4, -2.0]);
        assert!(curl(&konst).values().iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn newton_exterior_match() {
        let g = Grid2D::centered([2.0, 2.0], [128, 128], BoundaryCondition::Free).unwrap();
        let a0 = 0.25;
        let raw = ScalarField::from_fn(g, |[x, y]| bump(x.hypot(y), a0));
        let rho = raw.scaled(1.0 / raw.integral());
        let k = build_kernel(&g).unwrap();
        let a = vector_potential(&rho, &k).unwrap();
        for iy in 0..g.ny() {
            for ix in 0..g.nx() {
                let q = g.coords(ix, iy);
                if q[0].hypot(q[1]) < 2.0 * a0 {
                    continue;
                }
                let e = exterior_field(1.0, [0.0, 0.0], q).unwrap();
                let got = a.at(ix, iy);
                let err = (got[0] - e[0]).hypot(got[1] - e[1]) / e[0].hypot(e[1]);
                assert!(err < 1e-3, "err {err} at {q:?}");
            }
        }
    }

    #[test]
    fn curl_recovers_two_pi_rho() {
        let err = |n: usize| {
            let g = Grid2D::centered([2.0, 2.0], [n, n], BoundaryCondition::Free).unwrap();
            let rho = ScalarField::from_fn(g, |[x, y]| bump(x.hypot(y), 0.6));
            let k = build_kernel(&g).unwrap();
            let c = curl(&vector_potential(&rho, &k).unwrap());
            let (mut num, mut den) = (0.0, 0.0);
            for iy in 2..n - 2 {
                for ix in 2..n - 2 {
                    let t = 2.0 * PI * rho.at(ix, iy);
                    num += (c.at(ix, iy) - t).powi(2);
                    den += t * t;
                }
            }
            (num / den).sqrt()
        };
        let (e1, e2) = (err(64), err(128));
        assert!(e2 < 1e-2, "{e2}");
        assert!(e1 / e2 > 3.0, "{e1} {e2}");
    }

    #[test]
    fn reflection_negates_potential() {
        let g = Grid2D::centered([1.0, 1.0], [24, 24], BoundaryCondition::Neumann).unwrap();
        let k = build_kernel(&g).unwrap();
        let rho = ScalarField::from_fn(g, |[x, y]| (x + 0.3).powi(2) + (2.0 * y).sin().abs());
        let refl = ScalarField::from_fn(g, |[x, y]| (-x + 0.3).powi(2) + (-2.0 * y).sin().abs());
        let a = vector_potential(&rho, &k).unwrap();
        let b = vector_potential(&refl, &k).unwrap();
        let n = g.nx();
        let scale = a.max_norm();
        for iy in 0..n {
            for ix in 0..n {
                let p = a.at(ix, iy);
                let q = b.at(n - 1 - ix, n - 1 - iy);
                assert!((p[0] + q[0]).abs() < 1e-13 * scale);
                assert!((p[1] + q[1]).abs() < 1e-13 * scale);
            }
        }
    }

    #[test]
    fn dilation_scales_potential() {
        let g = make_grid((1.0, 1.0), (20, 20), BoundaryCondition::Free).unwrap();
        let mu = 2.5;
        let gm = g.dilated(mu).unwrap();
        let rho = ScalarField::from_fn(g, |[x, y]| x * x + y);
        let rho_mu = ScalarField::from_values(gm, rho.values().to_vec()).unwrap();
        let a = vector_potential(&rho, &build_kernel(&g).unwrap()).unwrap();
        let b = vector_potential(&rho_mu, &build_kernel(&gm).unwrap()).unwrap();
        let scale = a.max_norm();
        for i in 0..g.len() {
            assert!((b.x()[i] - mu * a.x()[i]).abs() < 1e-12 * scale);
            assert!((b.y()[i] - mu * a.y()[i]).abs() < 1e-12 * scale);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn potential_is_linear(
            r1 in prop::collection::vec(0.0..1.0f64, 16 * 16),
            r2 in prop::collection::vec(0.0..1.0f64, 16 * 16),
            a in -3.0..3.0f64,
            b in -3.0..3.0f64,
        ) {
            let g = make_grid((1.0, 1.0), (16, 16), BoundaryCondition::Free).unwrap();
            let k = build_kernel(&g).unwrap();
            let f1 = ScalarField::from_values(g, r1).unwrap();
            let f2 = ScalarField::from_values(g, r2).unwrap();
            let mix = f1.scaled(a).add(&f2.scaled(b));
            let am = vector_potential(&mix, &k).unwrap();
            let a1 = vector_potential(&f1, &k).unwrap();
            let a2 = vector_potential(&f2, &k).unwrap();
            let scale = a1.max_norm() * a.abs() + a2.max_norm() * b.abs() + 1e-300;
            for i in 0..g.len() {
                prop_assert!((am.x()[i] - a * a1.x()[i] - b * a2.x()[i]).abs() <= 1e-13 * scale);
                prop_assert!((am.y()[i] - a * a1.y()[i] - b * a2.y()[i]).abs() <= 1e-13 * scale);
            }
        }
    }
}
