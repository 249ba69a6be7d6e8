//! Preparing rough relaxed slips for lamination: truncation, mollification,
//! interior cut-off and the combined pipeline.

mod cutoff;
mod pipeline;

pub use cutoff::{interior_cutoff, CutoffReport, PatchGeometry};
pub use pipeline::{smooth_pipeline, ComponentReport, PipelineReport, SmoothParams, StageReport};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Grid3, ScalarField3};

/// Kernel radius must cover at least this many of the smallest cells.
pub const MIN_RADIUS_CELLS: f64 = 2.0;

/// Radial bump `(1 − r²)^k` on the unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelProfile {
    pub exponent: u32,
}

impl Default for KernelProfile {
    fn default() -> Self {
        KernelProfile { exponent: 4 }
    }
}

impl KernelProfile {
    pub fn eval(&self, r: f64) -> f64 {
        if r >= 1.0 {
            0.0
        } else {
            (1.0 - r * r).powi(self.exponent as i32)
        }
    }
}

/// Discrete normalized mollifier on the cell offsets of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MollifierKernel {
    radius: f64,
    reach: [usize; 3],
    offsets: Vec<([isize; 3], f64)>,
}

impl MollifierKernel {
    pub fn new(radius: f64, grid: &Grid3, profile: KernelProfile) -> Result<Self> {
        let h = grid.spacing();
        let min = MIN_RADIUS_CELLS * grid.min_spacing();
        if !(radius >= min * (1.0 - 1e-12)) || !radius.is_finite() {
            return Err(Error::guard(
                "kernel_radius",
                format!("radius {radius} is below {MIN_RADIUS_CELLS} cells ({min})"),
            ));
        }
        let reach = [0, 1, 2].map(|a| (radius / h[a]).floor() as usize);
        let mut offsets = Vec::new();
        for k in -(reach[2] as isize)..=reach[2] as isize {
            for j in -(reach[1] as isize)..=reach[1] as isize {
                for i in -(reach[0] as isize)..=reach[0] as isize {
                    let d = [i as f64 * h[0], j as f64 * h[1], k as f64 * h[2]];
                    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() / radius;
                    let w = profile.eval(r);
                    if w > 0.0 {
                        offsets.push(([i, j, k], w));
                    }
                }
            }
        }
        let sum: f64 = offsets.iter().map(|o| o.1).sum();
        for o in &mut offsets {
            o.1 /= sum;
        }
        let reach = [0, 1, 2].map(|a| offsets.iter().map(|o| o.0[a].unsigned_abs()).max().unwrap_or(0));
        Ok(MollifierKernel { radius, reach, offsets })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Largest offset (in cells) along each axis.
    pub fn reach(&self) -> [usize; 3] {
        self.reach
    }

    pub fn weights(&self) -> impl Iterator<Item = ([isize; 3], f64)> + '_ {
        self.offsets.iter().copied()
    }
}

/// How values outside the grid are supplied to the convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extension {
    /// Zero outside; the support must keep the kernel reach from every face.
    Zero,
    /// Even (half-sample) reflection across the flagged faces
    /// `[axis][low, high]`, zero across the others.
    Reflect([[bool; 2]; 3]),
}

impl Extension {
    fn faces(&self) -> [[bool; 2]; 3] {
        match self {
            Extension::Zero => [[false; 2]; 3],
            Extension::Reflect(f) => *f,
        }
    }
}

/// Clamps values to `[−level, level]`.
pub fn truncate(f: &ScalarField3, level: f64) -> Result<ScalarField3> {
    if !(level > 0.0) {
        return Err(Error::param("level", "must be positive"));
    }
    f.map(|v| v.clamp(-level, level))
}

/// Normalized discrete convolution with `kernel`.
pub fn mollify(f: &ScalarField3, kernel: &MollifierKernel, extension: Extension) -> Result<ScalarField3> {
    let grid = f.grid();
    let n = grid.resolution();
    let faces = extension.faces();
    let reach = kernel.reach();
    let v = f.values();
    // Support cells whose stencil would leave through a zero-extended face
    // lose mass; refuse them.
    for (idx, &x) in v.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        let c = grid.ijk(idx);
        for a in 0..3 {
            if (!faces[a][0] && c[a] < reach[a]) || (!faces[a][1] && c[a] + reach[a] >= n[a]) {
                return Err(Error::guard(
                    "support_distance",
                    format!(
                        "support cell {c:?} lies within the kernel radius {} of a zero-extended face",
                        kernel.radius()
                    ),
                ));
            }
        }
    }
    let fetch = |i: isize, len: usize, lo: bool, hi: bool| -> Option<usize> {
        let len = len as isize;
        let mut i = i;
        // Half-sample reflection, repeated for offsets longer than the grid.
        loop {
            if i < 0 {
                if !lo {
                    return None;
                }
                i = -1 - i;
            } else if i >= len {
                if !hi {
                    return None;
                }
                i = 2 * len - 1 - i;
            } else {
                return Some(i as usize);
            }
        }
    };
    let plane = n[0] * n[1];
    let mut out = vec![0.0; grid.len()];
    out.par_chunks_mut(plane).enumerate().for_each(|(k, slab)| {
        for j in 0..n[1] {
            for i in 0..n[0] {
                let mut acc = 0.0;
                for (o, w) in kernel.weights() {
                    let Some(ii) = fetch(i as isize + o[0], n[0], faces[0][0], faces[0][1]) else {
                        continue;
                    };
                    let Some(jj) = fetch(j as isize + o[1], n[1], faces[1][0], faces[1][1]) else {
                        continue;
                    };
                    let Some(kk) = fetch(k as isize + o[2], n[2], faces[2][0], faces[2][1]) else {
                        continue;
                    };
                    acc += w * v[ii + n[0] * (jj + n[1] * kk)];
                }
                slab[i + n[0] * j] = acc;
            }
        }
    });
    f.with_values(out)
}
