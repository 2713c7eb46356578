//! Uniform radial grid on the ball B_R and its finite-difference operators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_CELLS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub n: u32,
    pub radius: f64,
    pub cells: usize,
}

impl RadialGrid {
    pub fn new(n: u32, radius: f64, cells: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("grid.n", "dimension must be at least 1"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::config("grid.R", "radius must be positive and finite"));
        }
        if cells < MIN_CELLS {
            return Err(Error::config(
                "grid.J",
                format!("need at least {MIN_CELLS} cells, got {cells}"),
            ));
        }
        Ok(RadialGrid { n, radius, cells })
    }

    pub fn h(&self) -> f64 {
        self.radius / self.cells as f64
    }

    pub fn len(&self) -> usize {
        self.cells + 1
    }

    pub fn r(&self, j: usize) -> f64 {
        if j == self.cells {
            self.radius
        } else {
            j as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.r(j)).collect()
    }

    /// Explicit-diffusion stability bound h²/(2n).
    pub fn diffusion_dt(&self) -> f64 {
        let h = self.h();
        h * h / (2.0 * self.n as f64)
    }
}

/// Second-order radial Laplacian at a single interior or origin node.
#[inline]
pub fn laplacian_at(grid: &RadialGrid, field: &[f64], j: usize) -> f64 {
    let h = grid.h();
    let n = grid.n as f64;
    if j == 0 {
        return 2.0 * n * (field[1] - field[0]) / (h * h);
    }
    let second = (field[j + 1] - 2.0 * field[j] + field[j - 1]) / (h * h);
    if grid.n == 1 {
        second
    } else {
        second + (n - 1.0) / grid.r(j) * (field[j + 1] - field[j - 1]) / (2.0 * h)
    }
}

/// Radial Laplacian on all nodes; the boundary entry is left at 0
/// (Dirichlet nodes carry no evolution equation).
pub fn laplacian_radial(grid: &RadialGrid, field: &[f64]) -> Vec<f64> {
    assert_eq!(field.len(), grid.len(), "field must have J+1 entries");
    let mut out = vec![0.0; field.len()];
    for (j, o) in out.iter_mut().enumerate().take(grid.cells) {
        *o = laplacian_at(grid, field, j);
    }
    out
}

/// Centered radial derivative, 0 at the origin by symmetry and
/// one-sided second order at the boundary.
pub fn gradient_radial(grid: &RadialGrid, field: &[f64]) -> Vec<f64> {
    assert_eq!(field.len(), grid.len(), "field must have J+1 entries");
    let h = grid.h();
    let last = grid.cells;
    let mut out = vec![0.0; field.len()];
    for j in 1..last {
        out[j] = (field[j + 1] - field[j - 1]) / (2.0 * h);
    }
    out[last] = (3.0 * field[last] - 4.0 * field[last - 1] + field[last - 2]) / (2.0 * h);
    out
}
