//! `(σ − Δ)⁻¹` on the grid by fast diagonalisation.
//!
//! Neumann and free grids use the mirrored-ghost Laplacian, which the DCT-II
//! diagonalises. Dirichlet grids solve on the interior nodes with the boundary
//! ring held at zero, diagonalised by the DST-I.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustdct::{Dct2, Dct3, DctPlanner, Dst1};

use crate::error::{AfError, Result};
use crate::grid::{BoundaryCondition, Grid2D};

#[derive(Clone)]
enum Plans {
    Cosine {
        fwd_x: Arc<dyn Dct2<f64>>,
        inv_x: Arc<dyn Dct3<f64>>,
        fwd_y: Arc<dyn Dct2<f64>>,
        inv_y: Arc<dyn Dct3<f64>>,
    },
    Sine {
        x: Arc<dyn Dst1<f64>>,
        y: Arc<dyn Dst1<f64>>,
    },
}

#[derive(Clone)]
pub struct Preconditioner {
    grid: Grid2D,
    sigma: f64,
    plans: Plans,
    /// Active block size (interior for Dirichlet).
    block: [usize; 2],
    eig_x: Vec<f64>,
    eig_y: Vec<f64>,
    /// Product of the two round-trip normalisations.
    norm: f64,
}

impl std::fmt::Debug for Preconditioner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Preconditioner")
            .field("grid", &self.grid)
            .field("sigma", &self.sigma)
            .finish_non_exhaustive()
    }
}

fn eigenvalues(n: usize, period: f64, h: f64, shift: usize) -> Vec<f64> {
    (0..n)
        .map(|k| (2.0 - 2.0 * (PI * (k + shift) as f64 / period).cos()) / (h * h))
        .collect()
}

impl Preconditioner {
    pub fn new(grid: &Grid2D, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(AfError::Config(format!(
                "preconditioner shift must be positive, got {sigma}"
            )));
        }
        let [nx, ny] = grid.size();
        let [hx, hy] = grid.spacing();
        let mut planner = DctPlanner::new();
        let pre = match grid.bc() {
            BoundaryCondition::Dirichlet => {
                let (mx, my) = (nx - 2, ny - 2);
                Preconditioner {
                    grid: *grid,
                    sigma,
                    plans: Plans::Sine {
                        x: planner.plan_dst1(mx),
                        y: planner.plan_dst1(my),
                    },
                    block: [mx, my],
                    eig_x: eigenvalues(mx, (mx + 1) as f64, hx, 1),
                    eig_y: eigenvalues(my, (my + 1) as f64, hy, 1),
                    norm: 4.0 / ((mx + 1) * (my + 1)) as f64,
                }
            }
            _ => Preconditioner {
                grid: *grid,
                sigma,
                plans: Plans::Cosine {
                    fwd_x: planner.plan_dct2(nx),
                    inv_x: planner.plan_dct3(nx),
                    fwd_y: planner.plan_dct2(ny),
                    inv_y: planner.plan_dct3(ny),
                },
                block: [nx, ny],
                eig_x: eigenvalues(nx, nx as f64, hx, 0),
                eig_y: eigenvalues(ny, ny as f64, hy, 0),
                norm: 4.0 / (nx * ny) as f64,
            },
        };
        Ok(pre)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    fn solve_block(&self, block: &mut [f64], scratch: &mut [f64]) {
        let [mx, my] = self.block;
        let transpose = |src: &[f64], dst: &mut [f64], rows: usize, cols: usize| {
            for r in 0..rows {
                for c in 0..cols {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        };
        match &self.plans {
            Plans::Cosine { fwd_x, fwd_y, .. } => {
                block.chunks_exact_mut(mx).for_each(|row| fwd_x.process_dct2(row));
                transpose(block, scratch, my, mx);
                scratch.chunks_exact_mut(my).for_each(|col| fwd_y.process_dct2(col));
            }
            Plans::Sine { x, y } => {
                block.chunks_exact_mut(mx).for_each(|row| x.process_dst1(row));
                transpose(block, scratch, my, mx);
                scratch.chunks_exact_mut(my).for_each(|col| y.process_dst1(col));
            }
        }
        // scratch is column-major: index kx·my + ky
        for kx in 0..mx {
            for ky in 0..my {
                scratch[kx * my + ky] *= self.norm / (self.sigma + self.eig_x[kx] + self.eig_y[ky]);
            }
        }
        match &self.plans {
            Plans::Cosine { inv_x, inv_y, .. } => {
                scratch.chunks_exact_mut(my).for_each(|col| inv_y.process_dct3(col));
                transpose(scratch, block, mx, my);
                block.chunks_exact_mut(mx).for_each(|row| inv_x.process_dct3(row));
            }
            Plans::Sine { x, y } => {
                scratch.chunks_exact_mut(my).for_each(|col| y.process_dst1(col));
                transpose(scratch, block, mx, my);
                block.chunks_exact_mut(mx).for_each(|row| x.process_dst1(row));
            }
        }
    }

    /// Applies `(σ − Δ)⁻¹` to real node values.
    pub fn apply_real(&self, values: &mut [f64]) {
        let [nx, ny] = self.grid.size();
        let [mx, my] = self.block;
        let mut scratch = vec![0.0; mx * my];
        if self.grid.bc() == BoundaryCondition::Dirichlet {
            let mut block = vec![0.0; mx * my];
            for iy in 0..my {
                block[iy * mx..(iy + 1) * mx].copy_from_slice(&values[(iy + 1) * nx + 1..(iy + 1) * nx + 1 + mx]);
            }
            self.solve_block(&mut block, &mut scratch);
            values.iter_mut().for_each(|v| *v = 0.0);
            for iy in 0..my {
                values[(iy + 1) * nx + 1..(iy + 1) * nx + 1 + mx].copy_from_slice(&block[iy * mx..(iy + 1) * mx]);
            }
        } else {
            debug_assert_eq!(values.len(), nx * ny);
            self.solve_block(values, &mut scratch);
        }
    }

    /// Applies `(σ − Δ)⁻¹` to real and imaginary parts independently.
    pub fn apply(&self, values: &mut [Complex64]) {
        let mut re: Vec<f64> = values.iter().map(|z| z.re).collect();
        let mut im: Vec<f64> = values.iter().map(|z| z.im).collect();
        self.apply_real(&mut re);
        self.apply_real(&mut im);
        for (z, (a, b)) in values.iter_mut().zip(re.into_iter().zip(im)) {
            *z = Complex64::new(a, b);
        }
    }
}

/// `(σ − Δ_h) v` with the same boundary treatment as the preconditioner.
pub fn shifted_laplacian(grid: &Grid2D, sigma: f64, v: &[f64]) -> Vec<f64> {
    let [nx, ny] = grid.size();
    let [hx, hy] = grid.spacing();
    let dirichlet = grid.bc() == BoundaryCondition::Dirichlet;
    let mut out = vec![0.0; v.len()];
    for iy in 0..ny {
        for ix in 0..nx {
            if grid.is_masked(ix, iy) {
                continue;
            }
            let c = v[iy * nx + ix];
            let at = |jx: isize, jy: isize| -> f64 {
                let (jx, jy) = if dirichlet {
                    (jx, jy)
                } else {
                    (jx.clamp(0, nx as isize - 1), jy.clamp(0, ny as isize - 1))
                };
                v[jy as usize * nx + jx as usize]
            };
            let (x, y) = (ix as isize, iy as isize);
            let lap = (at(x - 1, y) - 2.0 * c + at(x + 1, y)) / (hx * hx)
                + (at(x, y - 1) - 2.0 * c + at(x, y + 1)) / (hy * hy);
            out[iy * nx + ix] = sigma * c - lap;
        }
    }
    out
}
