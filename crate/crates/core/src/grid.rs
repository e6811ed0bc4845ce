//! Uniform rectangular lattices.
//!
//! Neumann and free grids are cell-centred: node `(i, j)` sits at the centre of
//! cell `(i, j)` and the domain extends half a spacing beyond the outer nodes.
//! Dirichlet grids place their outer ring of nodes exactly on the boundary of
//! the rectangle; those nodes form the boundary mask and always carry zero.

use crate::error::{AfError, Result};

pub const MIN_NODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
    Free,
}

impl BoundaryCondition {
    pub fn tag(self) -> u8 {
        match self {
            BoundaryCondition::Dirichlet => 0,
            BoundaryCondition::Neumann => 1,
            BoundaryCondition::Free => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(BoundaryCondition::Dirichlet),
            1 => Some(BoundaryCondition::Neumann),
            2 => Some(BoundaryCondition::Free),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundaryCondition::Dirichlet => "dirichlet",
            BoundaryCondition::Neumann => "neumann",
            BoundaryCondition::Free => "free",
        }
    }
}

impl std::str::FromStr for BoundaryCondition {
    type Err = AfError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dirichlet" => Ok(BoundaryCondition::Dirichlet),
            "neumann" => Ok(BoundaryCondition::Neumann),
            "free" => Ok(BoundaryCondition::Free),
            other => Err(AfError::Config(format!(
                "unsupported boundary condition `{other}` (expected dirichlet, neumann or free)"
            ))),
        }
    }
}

/// Axis-aligned rectangle `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Rect {
    pub fn width(&self) -> f64 {
        self.hi[0] - self.lo[0]
    }

    pub fn height(&self) -> f64 {
        self.hi[1] - self.lo[1]
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> [f64; 2] {
        [0.5 * (self.lo[0] + self.hi[0]), 0.5 * (self.lo[1] + self.hi[1])]
    }

    pub fn contains_disc(&self, center: [f64; 2], radius: f64) -> bool {
        center[0] - radius >= self.lo[0]
            && center[0] + radius <= self.hi[0]
            && center[1] - radius >= self.lo[1]
            && center[1] + radius <= self.hi[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    origin: [f64; 2],
    spacing: [f64; 2],
    size: [usize; 2],
    bc: BoundaryCondition,
}

impl Grid2D {
    /// Builds a grid from raw parts. `origin` is the position of node `(0, 0)`.
    pub fn new(origin: [f64; 2], spacing: [f64; 2], size: [usize; 2], bc: BoundaryCondition) -> Result<Self> {
        if size[0] < MIN_NODES || size[1] < MIN_NODES {
            return Err(AfError::Config(format!(
                "grid size {}x{} is below the minimum of {MIN_NODES}x{MIN_NODES}",
                size[0], size[1]
            )));
        }
        if !(spacing[0] > 0.0 && spacing[1] > 0.0) || !spacing.iter().all(|h| h.is_finite()) {
            return Err(AfError::Config(format!(
                "grid spacing must be positive and finite, got ({}, {})",
                spacing[0], spacing[1]
            )));
        }
        if !origin.iter().all(|x| x.is_finite()) {
            return Err(AfError::Config("grid origin must be finite".into()));
        }
        Ok(Self {
            origin,
            spacing,
            size,
            bc,
        })
    }

    /// Grid covering `[lo, lo + extent]`.
    pub fn over_rect(lo: [f64; 2], extent: [f64; 2], n: [usize; 2], bc: BoundaryCondition) -> Result<Self> {
        if !(extent[0] > 0.0 && extent[1] > 0.0) || !extent.iter().all(|e| e.is_finite()) {
            return Err(AfError::Config(format!(
                "extent must be positive, got ({}, {})",
                extent[0], extent[1]
            )));
        }
        if n[0] < MIN_NODES || n[1] < MIN_NODES {
            return Err(AfError::Config(format!(
                "grid size {}x{} is below the minimum of {MIN_NODES}x{MIN_NODES}",
                n[0], n[1]
            )));
        }
        let (spacing, origin) = match bc {
            BoundaryCondition::Dirichlet => {
                let h = [extent[0] / (n[0] - 1) as f64, extent[1] / (n[1] - 1) as f64];
                (h, lo)
            }
            _ => {
                let h = [extent[0] / n[0] as f64, extent[1] / n[1] as f64];
                (h, [lo[0] + 0.5 * h[0], lo[1] + 0.5 * h[1]])
            }
        };
        Self::new(origin, spacing, n, bc)
    }

    /// Grid over a rectangle centred on the coordinate origin.
    pub fn centered(extent: [f64; 2], n: [usize; 2], bc: BoundaryCondition) -> Result<Self> {
        Self::over_rect([-0.5 * extent[0], -0.5 * extent[1]], extent, n, bc)
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    pub fn size(&self) -> [usize; 2] {
        self.size
    }

    pub fn nx(&self) -> usize {
        self.size[0]
    }

    pub fn ny(&self) -> usize {
        self.size[1]
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn len(&self) -> usize {
        self.size[0] * self.size[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight of one node.
    pub fn cell_area(&self) -> f64 {
        self.spacing[0] * self.spacing[1]
    }

    #[inline]
    pub fn idx(&self, ix: usize, iy: usize) -> usize {
        iy * self.size[0] + ix
    }

    #[inline]
    pub fn coords(&self, ix: usize, iy: usize) -> [f64; 2] {
        [
            self.origin[0] + ix as f64 * self.spacing[0],
            self.origin[1] + iy as f64 * self.spacing[1],
        ]
    }

    /// The rectangle represented by this grid.
    pub fn domain(&self) -> Rect {
        let [nx, ny] = self.size;
        let [hx, hy] = self.spacing;
        match self.bc {
            BoundaryCondition::Dirichlet => Rect {
                lo: self.origin,
                hi: [
                    self.origin[0] + (nx - 1) as f64 * hx,
                    self.origin[1] + (ny - 1) as f64 * hy,
                ],
            },
            _ => Rect {
                lo: [self.origin[0] - 0.5 * hx, self.origin[1] - 0.5 * hy],
                hi: [
                    self.origin[0] + (nx as f64 - 0.5) * hx,
                    self.origin[1] + (ny as f64 - 0.5) * hy,
                ],
            },
        }
    }

    pub fn area(&self) -> f64 {
        self.domain().area()
    }

    /// True on the Dirichlet boundary ring.
    #[inline]
    pub fn is_masked(&self, ix: usize, iy: usize) -> bool {
        self.bc == BoundaryCondition::Dirichlet
            && (ix == 0 || iy == 0 || ix + 1 == self.size[0] || iy + 1 == self.size[1])
    }

    /// Boundary mask as a flat boolean vector (all false unless Dirichlet).
    pub fn boundary_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        for iy in 0..self.ny() {
            for ix in 0..self.nx() {
                mask[self.idx(ix, iy)] = self.is_masked(ix, iy);
            }
        }
        mask
    }

    /// Same node layout dilated by `mu` about the coordinate origin.
    pub fn dilated(&self, mu: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(AfError::Config(format!("dilation factor must be positive, got {mu}")));
        }
        Self::new(
            [mu * self.origin[0], mu * self.origin[1]],
            [mu * self.spacing[0], mu * self.spacing[1]],
            self.size,
            self.bc,
        )
    }

    pub fn with_bc(&self, bc: BoundaryCondition) -> Self {
        Self { bc, ..*self }
    }

    /// True when both grids share node positions (boundary tags may differ).
    pub fn same_nodes(&self, other: &Grid2D) -> bool {
        self.size == other.size && self.origin == other.origin && self.spacing == other.spacing
    }

    pub(crate) fn check_same(&self, other: &Grid2D, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(AfError::Contract(format!("grid mismatch in {what}")))
        }
    }
}

/// Uniform grid over `[0, extent.0] x [0, extent.1]`.
pub fn make_grid(extent: (f64, f64), n: (usize, usize), bc: BoundaryCondition) -> Result<Grid2D> {
    Grid2D::over_rect([0.0, 0.0], [extent.0, extent.1], [n.0, n.1], bc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumann_unit_square_spacing() {
        let g = make_grid((1.0, 1.0), (64, 64), BoundaryCondition::Neumann).unwrap();
        assert_eq!(g.spacing(), [1.0 / 64.0, 1.0 / 64.0]);
        assert_eq!(g.origin(), [0.5 / 64.0, 0.5 / 64.0]);
        assert!((g.area() - 1.0).abs() < 1e-15);
        assert!(g.boundary_mask().iter().all(|m| !m));
    }

    #[test]
    fn rectangular_grid_is_isotropic() {
        let g = make_grid((2.0, 1.0), (128, 64), BoundaryCondition::Free).unwrap();
        assert_eq!(g.spacing(), [1.0 / 64.0, 1.0 / 64.0]);
        assert!((g.area() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn undersized_grid_rejected() {
        let err = make_grid((1.0, 1.0), (4, 4), BoundaryCondition::Neumann).unwrap_err();
        assert!(matches!(err, AfError::Config(_)));
        assert!(make_grid((0.0, 1.0), (16, 16), BoundaryCondition::Neumann).is_err());
        assert!(make_grid((-1.0, 1.0), (16, 16), BoundaryCondition::Neumann).is_err());
    }

    #[test]
    fn dirichlet_ring_sits_on_boundary() {
        let g = make_grid((1.0, 1.0), (33, 33), BoundaryCondition::Dirichlet).unwrap();
        assert_eq!(g.spacing(), [1.0 / 32.0, 1.0 / 32.0]);
        assert_eq!(g.coords(0, 0), [0.0, 0.0]);
        assert!((g.coords(32, 32)[0] - 1.0).abs() < 1e-15);
        let masked = g.boundary_mask().iter().filter(|m| **m).count();
        assert_eq!(masked, 4 * 32);
        assert!((g.area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bc_tags_round_trip() {
        for bc in [
            BoundaryCondition::Dirichlet,
            BoundaryCondition::Neumann,
            BoundaryCondition::Free,
        ] {
            assert_eq!(BoundaryCondition::from_tag(bc.tag()), Some(bc));
            assert_eq!(bc.name().parse::<BoundaryCondition>().unwrap(), bc);
        }
        assert!("periodic".parse::<BoundaryCondition>().is_err());
    }
}
