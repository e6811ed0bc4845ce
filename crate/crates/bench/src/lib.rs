//! Fixtures shared by the benchmarks.

use af_core::{density, init_state, make_grid, BoundaryCondition, ComplexField, Grid2D, InitStrategy, ScalarField};

/// Grid sizes every benchmark sweeps over.
pub const SIZES: [usize; 3] = [64, 128, 256];

pub fn unit_grid(n: usize, bc: BoundaryCondition) -> Grid2D {
    make_grid((1.0, 1.0), (n, n), bc).expect("benchmark grid sizes are valid")
}

/// A normalised state with seeded vortices at coupling `beta`.
pub fn vortex_state(n: usize, bc: BoundaryCondition, beta: f64) -> ComplexField {
    init_state(&unit_grid(n, bc), InitStrategy::VortexSeeded, beta, 0)
}

pub fn state_density(u: &ComplexField) -> ScalarField {
    density(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_normalized() {
        let u = vortex_state(16, BoundaryCondition::Neumann, 10.0);
        assert!((u.norm() - 1.0).abs() < 1e-12);
        assert!((state_density(&u).integral() - 1.0).abs() < 1e-12);
    }
}
