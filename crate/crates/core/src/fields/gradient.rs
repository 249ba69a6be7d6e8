use rayon::prelude::*;

use super::{TensorField3, VectorField3};
use crate::error::Result;
use crate::linalg::{Mat3, ZERO33};

/// `∂f/∂ξ_a` at index `i` of a line of `n` samples with stride `stride`.
///
/// Central differences inside, second-order one-sided stencils at the ends,
/// so affine data is differentiated exactly everywhere.
#[inline]
fn diff(get: impl Fn(usize) -> f64, i: usize, n: usize, h: f64) -> f64 {
    if i == 0 {
        (-3.0 * get(0) + 4.0 * get(1) - get(2)) / (2.0 * h)
    } else if i + 1 == n {
        (3.0 * get(n - 1) - 4.0 * get(n - 2) + get(n - 3)) / (2.0 * h)
    } else {
        (get(i + 1) - get(i - 1)) / (2.0 * h)
    }
}

/// Cellwise displacement gradient, `G[a][b] = ∂u_a/∂ξ_b` in the field's frame.
pub fn gradient(u: &VectorField3) -> Result<TensorField3> {
    let g = u.grid();
    let [nx, ny, nz] = g.resolution();
    let h = g.spacing();
    let v = u.values();
    let values: Vec<Mat3> = (0..g.len())
        .into_par_iter()
        .map(|idx| {
            let [i, j, k] = g.ijk(idx);
            let mut m = ZERO33;
            for (a, row) in m.iter_mut().enumerate() {
                row[0] = diff(|t| v[g.index(t, j, k)][a], i, nx, h[0]);
                row[1] = diff(|t| v[g.index(i, t, k)][a], j, ny, h[1]);
                row[2] = diff(|t| v[g.index(i, j, t)][a], k, nz, h[2]);
            }
            m
        })
        .collect();
    TensorField3::new(g.clone(), *u.frame(), values)
}
