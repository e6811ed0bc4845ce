//! Discrete fields on a [`Grid2D`] and the pointwise operations on them.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{AfError, Result};
use crate::grid::{BoundaryCondition, Grid2D};

/// Discretised wave function.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid2D,
    values: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
}

/// Two real components per node.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid2D,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl ComplexField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            grid,
        }
    }

    /// Wraps row-major values. Dirichlet boundary nodes are forced to zero.
    pub fn from_values(grid: Grid2D, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(AfError::Contract(format!(
                "field has {} values but the grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        let mut field = Self { grid, values };
        field.apply_mask();
        Ok(field)
    }

    /// Samples `f` at every node. Dirichlet boundary nodes are set to zero.
    pub fn from_fn(grid: Grid2D, mut f: impl FnMut([f64; 2]) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for iy in 0..grid.ny() {
            for ix in 0..grid.nx() {
                values.push(if grid.is_masked(ix, iy) {
                    Complex64::new(0.0, 0.0)
                } else {
                    f(grid.coords(ix, iy))
                });
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn at(&self, ix: usize, iy: usize) -> Complex64 {
        self.values[self.grid.idx(ix, iy)]
    }

    pub fn apply_mask(&mut self) {
        if self.grid.bc() != BoundaryCondition::Dirichlet {
            return;
        }
        let [nx, ny] = self.grid.size();
        let zero = Complex64::new(0.0, 0.0);
        for ix in 0..nx {
            self.values[ix] = zero;
            self.values[(ny - 1) * nx + ix] = zero;
        }
        for iy in 0..ny {
            self.values[iy * nx] = zero;
            self.values[iy * nx + nx - 1] = zero;
        }
    }

    /// Discrete `L²` norm (plain Riemann sum).
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.grid.cell_area() * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// Real part of the `L²` inner product `∫ conj(self)·other`.
    pub fn real_inner(&self, other: &ComplexField) -> f64 {
        debug_assert_eq!(self.values.len(), other.values.len());
        self.grid.cell_area()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.re * b.re + a.im * b.im)
                .sum::<f64>()
    }

    pub fn scaled(&self, factor: f64) -> ComplexField {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|z| z * factor).collect(),
        }
    }

    /// `self + t·other`.
    pub fn axpy(&self, t: f64, other: &ComplexField) -> ComplexField {
        Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b * t).collect(),
        }
    }

    /// Multiplies every value by `e^{iθ}`.
    pub fn with_phase(&self, theta: f64) -> ComplexField {
        let rot = Complex64::from_polar(1.0, theta);
        Self {
            grid: self.grid,
            values: self.values.iter().map(|z| z * rot).collect(),
        }
    }

    pub fn conj(&self) -> ComplexField {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl ScalarField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            values: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(AfError::Contract(format!(
                "field has {} values but the grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid2D, mut f: impl FnMut([f64; 2]) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for iy in 0..grid.ny() {
            for ix in 0..grid.nx() {
                values.push(f(grid.coords(ix, iy)));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.grid.idx(ix, iy)]
    }

    /// `∫ f` by the Riemann sum.
    pub fn integral(&self) -> f64 {
        self.grid.cell_area() * self.values.iter().sum::<f64>()
    }

    pub fn scaled(&self, factor: f64) -> ScalarField {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }
}

impl VectorField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            x: vec![0.0; grid.len()],
            y: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn from_components(grid: Grid2D, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != grid.len() || y.len() != grid.len() {
            return Err(AfError::Contract(format!(
                "vector components have {}/{} values but the grid has {} nodes",
                x.len(),
                y.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, x, y })
    }

    pub fn from_fn(grid: Grid2D, mut f: impl FnMut([f64; 2]) -> [f64; 2]) -> Self {
        let mut x = Vec::with_capacity(grid.len());
        let mut y = Vec::with_capacity(grid.len());
        for iy in 0..grid.ny() {
            for ix in 0..grid.nx() {
                let v = f(grid.coords(ix, iy));
                x.push(v[0]);
                y.push(v[1]);
            }
        }
        Self { grid, x, y }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn at(&self, ix: usize, iy: usize) -> [f64; 2] {
        let i = self.grid.idx(ix, iy);
        [self.x[i], self.y[i]]
    }

    pub fn scaled(&self, factor: f64) -> VectorField {
        Self {
            grid: self.grid,
            x: self.x.iter().map(|v| v * factor).collect(),
            y: self.y.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.x.iter().zip(&self.y).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max)
    }
}

/// Rescales `u` to unit `L²` norm; the phase is untouched.
pub fn normalize(u: &ComplexField) -> Result<ComplexField> {
    let norm = u.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(AfError::DegenerateState(format!(
            "cannot normalize a field with norm {norm}"
        )));
    }
    Ok(u.scaled(1.0 / norm))
}

/// Anything that offers a pointwise modulus on a grid.
pub trait Modulus {
    fn grid(&self) -> &Grid2D;
    fn moduli(&self) -> Box<dyn Iterator<Item = f64> + '_>;
}

impl Modulus for ComplexField {
    fn grid(&self) -> &Grid2D {
        &self.grid
    }

    fn moduli(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        Box::new(self.values.iter().map(|z| z.norm()))
    }
}

impl Modulus for ScalarField {
    fn grid(&self) -> &Grid2D {
        &self.grid
    }

    fn moduli(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        Box::new(self.values.iter().map(|v| v.abs()))
    }
}

/// `(∫ |f|^p)^{1/p}` by the Riemann sum.
pub fn lp_norm<F: Modulus + ?Sized>(f: &F, p: f64) -> f64 {
    let w = f.grid().cell_area();
    if p == 2.0 {
        return (w * f.moduli().map(|m| m * m).sum::<f64>()).sqrt();
    }
    if p.is_infinite() {
        return f.moduli().fold(0.0, f64::max);
    }
    (w * f.moduli().map(|m| m.powf(p)).sum::<f64>()).powf(1.0 / p)
}

/// Centred second-order difference along x. Boundary columns use one-sided
/// second-order stencils, or treat values beyond the boundary as zero when
/// `zero_extend` is set.
pub(crate) fn diff_x<T>(values: &[T], grid: &Grid2D, zero_extend: bool) -> Vec<T>
where
    T: Copy + Default + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    let [nx, ny] = grid.size();
    let inv2h = 0.5 / grid.spacing()[0];
    let dirichlet = zero_extend;
    let mut out = vec![T::default(); values.len()];
    for iy in 0..ny {
        let row = &values[iy * nx..(iy + 1) * nx];
        let dst = &mut out[iy * nx..(iy + 1) * nx];
        for ix in 1..nx - 1 {
            dst[ix] = (row[ix + 1] - row[ix - 1]) * inv2h;
        }
        if dirichlet {
            dst[0] = row[1] * inv2h;
            dst[nx - 1] = (T::default() - row[nx - 2]) * inv2h;
        } else {
            dst[0] = (row[1] * 4.0 - row[0] * 3.0 - row[2]) * inv2h;
            dst[nx - 1] = (row[nx - 1] * 3.0 - row[nx - 2] * 4.0 + row[nx - 3]) * inv2h;
        }
    }
    out
}

pub(crate) fn diff_y<T>(values: &[T], grid: &Grid2D, zero_extend: bool) -> Vec<T>
where
    T: Copy + Default + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    let [nx, ny] = grid.size();
    let inv2h = 0.5 / grid.spacing()[1];
    let dirichlet = zero_extend;
    let mut out = vec![T::default(); values.len()];
    let at = |ix: usize, iy: usize| values[iy * nx + ix];
    for ix in 0..nx {
        for iy in 1..ny - 1 {
            out[iy * nx + ix] = (at(ix, iy + 1) - at(ix, iy - 1)) * inv2h;
        }
        if dirichlet {
            out[ix] = at(ix, 1) * inv2h;
            out[(ny - 1) * nx + ix] = (T::default() - at(ix, ny - 2)) * inv2h;
        } else {
            out[ix] = (at(ix, 1) * 4.0 - at(ix, 0) * 3.0 - at(ix, 2)) * inv2h;
            out[(ny - 1) * nx + ix] = (at(ix, ny - 1) * 3.0 - at(ix, ny - 2) * 4.0 + at(ix, ny - 3)) * inv2h;
        }
    }
    out
}

/// `(∂x u, ∂y u)` by the shared difference stencil.
pub fn gradient(u: &ComplexField) -> (ComplexField, ComplexField) {
    let grid = u.grid;
    let zero_extend = grid.bc() == BoundaryCondition::Dirichlet;
    (
        ComplexField {
            grid,
            values: diff_x(&u.values, &grid, zero_extend),
        },
        ComplexField {
            grid,
            values: diff_y(&u.values, &grid, zero_extend),
        },
    )
}

/// `ρ = |u|²`.
pub fn density(u: &ComplexField) -> ScalarField {
    ScalarField {
        grid: u.grid,
        values: u.values.iter().map(|z| z.norm_sqr()).collect(),
    }
}

/// `j = (i/2)(u ∇u* − u* ∇u) = Im(u* ∇u)` at the nodes.
pub fn current(u: &ComplexField) -> VectorField {
    let (dx, dy) = gradient(u);
    let half_i = Complex64::new(0.0, 0.5);
    let component = |d: &ComplexField| -> Vec<f64> {
        u.values
            .iter()
            .zip(&d.values)
            .map(|(z, dz)| (half_i * (z * dz.conj() - z.conj() * dz)).re)
            .collect()
    };
    VectorField {
        grid: u.grid,
        x: component(&dx),
        y: component(&dy),
    }
}

/// `u_{λ,μ}(r) = λ·u(r/μ)` on the grid dilated by `μ`; node values are copied.
pub fn rescale_state(u: &ComplexField, lambda: f64, mu: f64) -> Result<ComplexField> {
    let grid = u.grid.dilated(mu)?;
    Ok(ComplexField {
        grid,
        values: u.values.iter().map(|z| z * lambda).collect(),
    })
}
