//! The average-field energy, its gradient and the derived quantities.
//!
//! The magnetic kinetic term `|(−i∇ + βA)u|²` is assembled on grid edges:
//! every edge carries the difference quotient of `u`, the midpoint average of
//! `u` and the midpoint average of `A`. Differences over a single spacing keep
//! neighbouring nodes coupled, which a centred node stencil would not. On
//! Neumann and free grids each boundary node also owns half an edge pointing
//! out of the box with zero difference, so that every node carries the same
//! quadrature weight for `|A|²|u|²`.
//!
//! The gradient returned by [`Functional::evaluate`] is the exact derivative of
//! the discrete energy, including the nonlocal response of `A` to `|u|²`.

use num_complex::Complex64;

use crate::error::{AfError, Result};
use crate::field::{lp_norm, ComplexField};
use crate::grid::{BoundaryCondition, Grid2D};
use crate::kernel::KernelTable;
use crate::potential::PotentialSpec;
use crate::precond::Preconditioner;

/// Itemised energy terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    /// `∫|∇u|²`
    pub kinetic: f64,
    /// `∫V|u|²`
    pub potential: f64,
    /// `2β∫A·j`
    pub cross: f64,
    /// `β²∫|A|²|u|²`
    pub quartic: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    /// `∫|(−i∇ + βA)u|²`
    pub fn magnetic_kinetic(&self) -> f64 {
        self.kinetic + self.cross + self.quartic
    }

    /// `⟨u, Gu⟩`, the chemical potential of a normalised state.
    pub fn mu(&self) -> f64 {
        self.kinetic + self.potential + 2.0 * self.cross + 3.0 * self.quartic
    }
}

/// Energy together with its `L²` gradient.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub energy: EnergyBreakdown,
    /// `G` with `δE = 2 Re ∫ conj(δu) G`.
    pub gradient: ComplexField,
}

impl Evaluation {
    /// `Re⟨u, G⟩ / ‖u‖²`.
    pub fn rayleigh(&self, u: &ComplexField) -> f64 {
        u.real_inner(&self.gradient) / u.norm_sqr()
    }

    /// `G − μu` for the Rayleigh quotient `μ`.
    pub fn residual(&self, u: &ComplexField) -> ComplexField {
        self.gradient.axpy(-self.rayleigh(u), u)
    }
}

/// `E^af_β` on one grid with a fixed potential.
#[derive(Debug, Clone)]
pub struct Functional<'k> {
    kernel: &'k KernelTable,
    beta: f64,
    potential: PotentialSpec,
    v: Option<Vec<f64>>,
}

struct EdgeTerms {
    kinetic: f64,
    cross: f64,
    quartic: f64,
    direct: f64,
}

impl<'k> Functional<'k> {
    pub fn new(kernel: &'k KernelTable, beta: f64, potential: PotentialSpec) -> Result<Self> {
        if !beta.is_finite() {
            return Err(AfError::Config(format!("beta must be finite, got {beta}")));
        }
        let v = potential.sample_values(kernel.grid());
        Ok(Self {
            kernel,
            beta,
            potential,
            v,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn grid(&self) -> &Grid2D {
        self.kernel.grid()
    }

    pub fn kernel(&self) -> &KernelTable {
        self.kernel
    }

    fn check(&self, u: &ComplexField) -> Result<()> {
        self.kernel.grid().check_same(u.grid(), "energy evaluation")
    }

    pub fn energy(&self, u: &ComplexField) -> Result<EnergyBreakdown> {
        self.check(u)?;
        Ok(self.assemble(u, None))
    }

    /// Energy and exact discrete gradient.
    pub fn evaluate(&self, u: &ComplexField) -> Result<Evaluation> {
        self.check(u)?;
        let mut g = vec![Complex64::new(0.0, 0.0); u.values().len()];
        let energy = self.assemble(u, Some(&mut g));
        let mut gradient = ComplexField::from_values(*u.grid(), g)?;
        gradient.apply_mask();
        Ok(Evaluation { energy, gradient })
    }

    /// The Euler–Lagrange operator applied to `u`.
    pub fn el_apply(&self, u: &ComplexField) -> Result<ComplexField> {
        Ok(self.evaluate(u)?.gradient)
    }

    /// Both chemical-potential expressions. `μ₁` is built from `e`, `μ₂` from
    /// a fresh assembly of the integrals.
    pub fn chemical_potential(&self, u: &ComplexField, e: &EnergyBreakdown) -> Result<(f64, f64)> {
        let fresh = self.energy(u)?;
        let mu1 = e.total + e.cross + 2.0 * e.quartic;
        let mu2 = fresh.kinetic + fresh.potential + 2.0 * fresh.cross + 3.0 * fresh.quartic;
        Ok((mu1, mu2))
    }

    fn assemble(&self, u: &ComplexField, mut grad: Option<&mut Vec<Complex64>>) -> EnergyBreakdown {
        let grid = *u.grid();
        let vals = u.values();
        let w = grid.cell_area();
        let beta = self.beta;

        let magnetic = beta != 0.0;
        let (ax, ay) = if magnetic {
            let rho: Vec<f64> = vals.iter().map(|z| z.norm_sqr()).collect();
            self.kernel.potential_raw(&rho)
        } else {
            (vec![0.0; vals.len()], vec![0.0; vals.len()])
        };

        let mut dedax = if grad.is_some() && magnetic {
            vec![0.0; vals.len()]
        } else {
            Vec::new()
        };
        let mut deday = dedax.clone();

        let [nx, ny] = grid.size();
        let [hx, hy] = grid.spacing();
        let half_edges = grid.bc() != BoundaryCondition::Dirichlet;

        let x_terms = edge_pass(
            vals,
            &ax,
            beta,
            w,
            hx,
            half_edges,
            grad.as_deref_mut(),
            &mut dedax,
            (0..ny).map(|iy| (iy * nx, 1usize, nx)),
        );
        let y_terms = edge_pass(
            vals,
            &ay,
            beta,
            w,
            hy,
            half_edges,
            grad.as_deref_mut(),
            &mut deday,
            (0..nx).map(|ix| (ix, nx, ny)),
        );

        let potential = match &self.v {
            Some(v) => w * vals.iter().zip(v).map(|(z, v)| v * z.norm_sqr()).sum::<f64>(),
            None => 0.0,
        };

        if let Some(g) = grad {
            if let Some(v) = &self.v {
                for ((gi, z), vi) in g.iter_mut().zip(vals).zip(v) {
                    *gi += z * *vi;
                }
            }
            if magnetic {
                let inv_w = 1.0 / w;
                dedax.iter_mut().for_each(|d| *d *= inv_w);
                deday.iter_mut().for_each(|d| *d *= inv_w);
                let phi = self.kernel.dual_raw(&dedax, &deday);
                for ((gi, z), p) in g.iter_mut().zip(vals).zip(&phi) {
                    *gi -= z * *p;
                }
            }
        }

        let kinetic = x_terms.kinetic + y_terms.kinetic;
        let cross = x_terms.cross + y_terms.cross;
        let quartic = x_terms.quartic + y_terms.quartic;
        let direct = x_terms.direct + y_terms.direct;
        debug_assert!(
            (direct - (kinetic + cross + quartic)).abs() <= 1e-9 * (kinetic + quartic + cross.abs()).max(1e-300),
            "expanded magnetic kinetic energy disagrees with the direct form: {direct} vs {}",
            kinetic + cross + quartic
        );
        EnergyBreakdown {
            kinetic,
            potential,
            cross,
            quartic,
            // the direct form sums positive terms and so carries less
            // rounding than the itemised sum
            total: direct + potential,
        }
    }
}

/// One sweep over all edges along a single axis. `lines` yields
/// `(start, stride, len)` for every grid line parallel to that axis.
#[allow(clippy::too_many_arguments)]
fn edge_pass(
    vals: &[Complex64],
    a: &[f64],
    beta: f64,
    w: f64,
    h: f64,
    half_edges: bool,
    mut grad: Option<&mut Vec<Complex64>>,
    deda: &mut [f64],
    lines: impl Iterator<Item = (usize, usize, usize)>,
) -> EdgeTerms {
    let mut t = EdgeTerms {
        kinetic: 0.0,
        cross: 0.0,
        quartic: 0.0,
        direct: 0.0,
    };
    let inv_h = 1.0 / h;
    let i = Complex64::new(0.0, 1.0);
    let track_a = !deda.is_empty();
    for (start, stride, len) in lines {
        // per-line partial sums keep the accumulated rounding small
        let mut line = EdgeTerms {
            kinetic: 0.0,
            cross: 0.0,
            quartic: 0.0,
            direct: 0.0,
        };
        for k in 0..len - 1 {
            let n0 = start + k * stride;
            let n1 = n0 + stride;
            let (u0, u1) = (vals[n0], vals[n1]);
            let du = (u1 - u0) * inv_h;
            let ub = (u0 + u1) * 0.5;
            let ae = 0.5 * (a[n0] + a[n1]);
            let z = -i * du + ub * (beta * ae);
            let je = (u0.conj() * u1).im * inv_h;
            line.kinetic += w * du.norm_sqr();
            line.cross += 2.0 * beta * w * ae * je;
            line.quartic += beta * beta * w * ae * ae * ub.norm_sqr();
            line.direct += w * z.norm_sqr();
            if let Some(g) = grad.as_deref_mut() {
                let c1 = Complex64::new(0.5 * beta * ae, -inv_h);
                let c0 = Complex64::new(0.5 * beta * ae, inv_h);
                g[n1] += c1.conj() * z;
                g[n0] += c0.conj() * z;
                if track_a {
                    let ge = 2.0 * beta * w * (z.conj() * ub).re;
                    deda[n0] += 0.5 * ge;
                    deda[n1] += 0.5 * ge;
                }
            }
        }
        if half_edges {
            for n in [start, start + (len - 1) * stride] {
                let ub = vals[n];
                let ae = a[n];
                let z = ub * (beta * ae);
                let q = 0.5 * w * z.norm_sqr();
                line.quartic += q;
                line.direct += q;
                if let Some(g) = grad.as_deref_mut() {
                    g[n] += z * (0.5 * beta * ae);
                    if track_a {
                        deda[n] += w * beta * (z.conj() * ub).re;
                    }
                }
            }
        }
        t.kinetic += line.kinetic;
        t.cross += line.cross;
        t.quartic += line.quartic;
        t.direct += line.direct;
    }
    t
}

/// `E^af_β[u]` itemised.
pub fn energy(u: &ComplexField, beta: f64, v: &PotentialSpec, k: &KernelTable) -> Result<EnergyBreakdown> {
    Functional::new(k, beta, *v)?.energy(u)
}

/// The Euler–Lagrange operator applied to `u`.
pub fn el_apply(u: &ComplexField, beta: f64, v: &PotentialSpec, k: &KernelTable) -> Result<ComplexField> {
    Functional::new(k, beta, *v)?.el_apply(u)
}

/// Both chemical-potential expressions for `u`, given its energy `e`.
pub fn chemical_potential(
    u: &ComplexField,
    beta: f64,
    v: &PotentialSpec,
    k: &KernelTable,
    e: &EnergyBreakdown,
) -> Result<(f64, f64)> {
    Functional::new(k, beta, *v)?.chemical_potential(u, e)
}

/// Projection of `g` onto the tangent space of the sphere at `u`.
pub fn project_tangent(u: &ComplexField, g: &ComplexField) -> ComplexField {
    g.axpy(-u.real_inner(g) / u.norm_sqr(), u)
}

/// Preconditioned descent direction from a precomputed evaluation.
pub fn sobolev_direction(u: &ComplexField, eval: &Evaluation, pre: &Preconditioner) -> ComplexField {
    let mut r = eval.residual(u);
    pre.apply(r.values_mut());
    r.apply_mask();
    project_tangent(u, &r)
}

/// `(1 − Δ)⁻¹` applied to the `L²` gradient, projected onto the tangent space.
pub fn sobolev_gradient(u: &ComplexField, beta: f64, v: &PotentialSpec, k: &KernelTable) -> Result<ComplexField> {
    let eval = Functional::new(k, beta, *v)?.evaluate(u)?;
    let pre = Preconditioner::new(u.grid(), 1.0)?;
    Ok(sobolev_direction(u, &eval, &pre))
}

/// `∫|∇|u||²` with the same edge differences as the kinetic term.
pub fn diamagnetic_bound(u: &ComplexField) -> f64 {
    let grid = u.grid();
    let [nx, ny] = grid.size();
    let [hx, hy] = grid.spacing();
    let w = grid.cell_area();
    let m: Vec<f64> = u.values().iter().map(|z| z.norm()).collect();
    let mut sum = 0.0;
    for iy in 0..ny {
        for ix in 0..nx - 1 {
            let n = iy * nx + ix;
            sum += ((m[n + 1] - m[n]) / hx).powi(2);
        }
    }
    for iy in 0..ny - 1 {
        for ix in 0..nx {
            let n = iy * nx + ix;
            sum += ((m[n + nx] - m[n]) / hy).powi(2);
        }
    }
    w * sum
}

/// `2πβ‖u‖₄⁴`.
pub fn magnetic_bound(u: &ComplexField, beta: f64) -> f64 {
    2.0 * std::f64::consts::PI * beta * lp_norm(u, 4.0).powi(4)
}

/// `(diamagnetic, magnetic)` lower bounds for the magnetic kinetic energy.
/// The magnetic bound needs a state vanishing on the boundary.
pub fn lower_bounds(u: &ComplexField, beta: f64, _e: &EnergyBreakdown) -> Result<(f64, f64)> {
    if u.grid().bc() != BoundaryCondition::Dirichlet {
        return Err(AfError::Contract(
            "the magnetic lower bound needs a Dirichlet state".into(),
        ));
    }
    Ok((diamagnetic_bound(u), magnetic_bound(u, beta.abs())))
}
