//! Cubical sublevel filtration of a distance field: vertices carry the field
//! values, and every higher cube takes the maximum over its vertices.
//!
//! Cells live on the doubled grid (2L−1 per axis): even coordinates are
//! vertices, odd coordinates span edges/faces/cubes, and a cell's dimension
//! is its number of odd coordinates.

use super::edt::DistanceField;
use super::grid::MemoryBudget;
use crate::error::{Error, Result};
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct FilteredCubicalComplex {
    pub ambient_dim: usize,
    /// Doubled-grid extents; unused axes have extent 1.
    pub grid: [usize; 3],
    pub spacing: f64,
    pub values: Vec<f64>,
}

impl FilteredCubicalComplex {
    pub fn len(&self) -> usize {
        self.grid[0] * self.grid[1] * self.grid[2]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.grid[0];
        let rest = idx / self.grid[0];
        [x, rest % self.grid[1], rest / self.grid[1]]
    }

    #[inline]
    pub fn index(&self, c: [usize; 3]) -> usize {
        c[0] + self.grid[0] * (c[1] + self.grid[1] * c[2])
    }

    #[inline]
    pub fn dim_of(&self, idx: usize) -> usize {
        let c = self.coords(idx);
        (c[0] % 2) + (c[1] % 2) + (c[2] % 2)
    }

    /// Codimension-1 faces: one step along each odd axis.
    pub fn faces(&self, idx: usize, out: &mut Vec<u32>) {
        out.clear();
        let c = self.coords(idx);
        for axis in 0..3 {
            if c[axis] % 2 == 1 {
                let mut lo = c;
                lo[axis] -= 1;
                let mut hi = c;
                hi[axis] += 1;
                out.push(self.index(lo) as u32);
                out.push(self.index(hi) as u32);
            }
        }
    }

    /// Cell counts per dimension among cells with value ≤ eps.
    pub fn counts_at(&self, eps: f64) -> [u64; 4] {
        let mut counts = [0u64; 4];
        for idx in 0..self.len() {
            if self.values[idx] <= eps {
                counts[self.dim_of(idx)] += 1;
            }
        }
        counts
    }

    /// Every cell must carry the maximum of its faces' values.
    pub fn is_monotone(&self) -> bool {
        let mut buf = Vec::with_capacity(6);
        for idx in 0..self.len() {
            if self.dim_of(idx) == 0 {
                continue;
            }
            let mut m = f64::NEG_INFINITY;
            self.faces(idx, &mut buf);
            for &f in &buf {
                m = m.max(self.values[f as usize]);
            }
            if self.values[idx] != m {
                return false;
            }
        }
        true
    }
}

pub fn cubical_filtration(
    field: &DistanceField,
    budget: &MemoryBudget,
) -> Result<FilteredCubicalComplex> {
    let mut grid = [1usize; 3];
    for axis in 0..field.ambient_dim {
        grid[axis] = 2 * field.shape[axis] - 1;
    }
    let total = grid[0] * grid[1] * grid[2];
    if total > u32::MAX as usize {
        return Err(Error::Resource(format!("complex of {total} cells exceeds 32-bit indexing")));
    }
    budget.check(total as u64 * 8, "cubical complex")?;

    let sx = field.shape[0];
    let sy = field.shape[1];
    let values: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let x = idx % grid[0];
            let rest = idx / grid[0];
            let c = [x, rest % grid[1], rest / grid[1]];
            let mut m = f64::NEG_INFINITY;
            // corner vertices: floor/ceil halves along odd axes
            let span = |v: usize| if v % 2 == 1 { (v / 2, v / 2 + 1) } else { (v / 2, v / 2) };
            let (x0, x1) = span(c[0]);
            let (y0, y1) = span(c[1]);
            let (z0, z1) = span(c[2]);
            for z in z0..=z1 {
                for y in y0..=y1 {
                    for x in x0..=x1 {
                        m = m.max(field.values[x + sx * (y + sy * z)]);
                    }
                }
            }
            m
        })
        .collect();

    Ok(FilteredCubicalComplex {
        ambient_dim: field.ambient_dim,
        grid,
        spacing: field.spacing,
        values,
    })
}
