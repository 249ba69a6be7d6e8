//! The level-`n` laminate: bi-layers of single-slip slices and the zig-zag
//! corrector that accommodates them.
//!
//! Bi-layer `k` spans `[a + kT, a + (k+1)T]` in `x¹` with `T = L/2ⁿ` and
//! centre plane `t_k`. Its lower half carries `2c₂(t_k,y,z) b₂ ⊗ m`, its upper
//! half `2c₁(t_k,y,z) b₁ ⊗ m`. The corrector is
//! `û = (T/2 − |x¹ − t_k|) · w(t_k,y,z)` with `w = c₂b₂ − c₁b₁`, so
//! `∂û/∂x¹ = 2c_j b_j − s` on each slice and `∇û = β_n − β + O(T)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::profile::AnalyticSlip;
use crate::error::{Error, Result};
use crate::fields::{Grid3, PatchFrame, TensorField3, VectorField3};
use crate::linalg::{self, Mat3, Vec3};
use crate::slipsys::{SlipCell, SlipSystem};

/// Largest supported level (2³⁰ bi-layers).
pub const MAX_LEVEL: u32 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bilayer {
    pub index: usize,
    pub lower: f64,
    pub centre: f64,
    pub upper: f64,
}

/// Which half of a bi-layer a point is in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Half {
    /// Lower half, slip `2c₂ b₂`.
    Bottom,
    /// Upper half, slip `2c₁ b₁`.
    Top,
}

#[derive(Debug, Clone)]
pub struct Laminate {
    level: u32,
    lower: f64,
    extent: f64,
    slip: AnalyticSlip,
    /// The slip system in local (patch-frame) components.
    local: SlipSystem,
    global: SlipSystem,
}

impl Laminate {
    /// Level-`n` laminate of `slip` over the `x¹`-extent of `grid` (patch frame).
    pub fn build(slip: &AnalyticSlip, system: &SlipSystem, grid: &Grid3, n: u32) -> Result<Self> {
        if n == 0 || n > MAX_LEVEL {
            return Err(Error::param("n", format!("level {n} is outside 1..={MAX_LEVEL}")));
        }
        let e1 = slip.frame().e1();
        if linalg::norm(linalg::sub(e1, system.m())) > 1e-12 {
            return Err(Error::FrameMismatch(format!(
                "laminate frame e1 = {e1:?} is not the slip normal {:?}",
                system.m()
            )));
        }
        Ok(Laminate {
            level: n,
            lower: grid.origin()[0],
            extent: grid.extents()[0],
            slip: slip.clone(),
            local: system.in_frame(slip.frame()),
            global: *system,
        })
    }

    pub fn level(&self) -> u32 {
        self.level
    }
    pub fn bilayer_count(&self) -> usize {
        1usize << self.level
    }
    /// Bi-layer thickness `T = L/2ⁿ`.
    pub fn thickness(&self) -> f64 {
        self.extent / self.bilayer_count() as f64
    }
    pub fn frame(&self) -> &PatchFrame {
        self.slip.frame()
    }
    pub fn slip(&self) -> &AnalyticSlip {
        &self.slip
    }
    pub fn local_system(&self) -> &SlipSystem {
        &self.local
    }
    pub fn system(&self) -> &SlipSystem {
        &self.global
    }
    pub fn x1_range(&self) -> (f64, f64) {
        (self.lower, self.lower + self.extent)
    }

    pub fn bilayer(&self, k: usize) -> Bilayer {
        let t = self.thickness();
        Bilayer {
            index: k,
            lower: self.lower + k as f64 * t,
            centre: self.lower + (k as f64 + 0.5) * t,
            upper: self.lower + (k + 1) as f64 * t,
        }
    }

    pub fn bilayers(&self) -> Vec<Bilayer> {
        (0..self.bilayer_count()).map(|k| self.bilayer(k)).collect()
    }

    /// Bi-layer index and half containing `x¹` (clamped to the stack).
    pub fn locate(&self, x1: f64) -> (usize, Half) {
        let t = self.thickness();
        let r = ((x1 - self.lower) / t).max(0.0);
        let k = (r.floor() as usize).min(self.bilayer_count() - 1);
        let half = if r - k as f64 >= 0.5 { Half::Top } else { Half::Bottom };
        (k, half)
    }

    /// Slip of a slice from centre-plane samples `c = (c1, c2)`.
    #[inline]
    pub fn slice_slip(&self, half: Half, c: [f64; 2]) -> Vec3 {
        match half {
            Half::Bottom => linalg::scale(self.local.b2(), 2.0 * c[1]),
            Half::Top => linalg::scale(self.local.b1(), 2.0 * c[0]),
        }
    }

    /// `w = c₂b₂ − c₁b₁` from centre-plane samples.
    #[inline]
    pub fn amplitude(&self, c: [f64; 2]) -> Vec3 {
        linalg::lincomb(c[1], self.local.b2(), -c[0], self.local.b1())
    }

    /// `∇_{y,z} w` as a tensor with zero first column.
    #[inline]
    pub fn amplitude_gradient(&self, g: [Vec3; 2]) -> Mat3 {
        let mut m = linalg::mat_sub(&linalg::outer(self.local.b2(), g[1]), &linalg::outer(self.local.b1(), g[0]));
        for row in m.iter_mut() {
            row[0] = 0.0;
        }
        m
    }

    fn centre_sample(&self, xi: Vec3) -> (Bilayer, Half, Vec3) {
        let (k, half) = self.locate(xi[0]);
        let b = self.bilayer(k);
        (b, half, [b.centre, xi[1], xi[2]])
    }

    /// `β_n(ξ)`, local components.
    pub fn slip_at(&self, xi: Vec3) -> Vec3 {
        let (_, half, p) = self.centre_sample(xi);
        self.slice_slip(half, self.slip.values(p))
    }

    pub fn beta_at(&self, xi: Vec3) -> Mat3 {
        linalg::outer(self.slip_at(xi), self.local.m())
    }

    /// Tent height `T/2 − |x¹ − t_k|` (zero on every bi-layer face).
    #[inline]
    pub fn tent_height(&self, x1: f64, b: &Bilayer) -> f64 {
        0.5 * self.thickness() - (x1 - b.centre).abs()
    }

    /// `û_n(ξ)`, local components.
    pub fn corrector_at(&self, xi: Vec3) -> Vec3 {
        let (b, _, p) = self.centre_sample(xi);
        linalg::scale(self.amplitude(self.slip.values(p)), self.tent_height(xi[0], &b))
    }

    /// `∇û_n(ξ)`, local components.
    pub fn corrector_grad_at(&self, xi: Vec3) -> Mat3 {
        let (b, half, p) = self.centre_sample(xi);
        let w = self.amplitude(self.slip.values(p));
        let gw = self.amplitude_gradient(self.slip.gradients(p));
        corrector_gradient(w, &gw, self.tent_height(xi[0], &b), half)
    }

    /// Per-cell slip for the side-condition checks: one cell per slice and
    /// `(y, z)` node of `grid`, global components.
    pub fn slice_cells(&self, grid: &Grid3, system_id: usize) -> Vec<SlipCell> {
        let [_, ny, nz] = grid.resolution();
        let frame = *self.frame();
        (0..2 * self.bilayer_count())
            .into_par_iter()
            .flat_map_iter(|slice| {
                let b = self.bilayer(slice / 2);
                let half = if slice % 2 == 0 { Half::Bottom } else { Half::Top };
                (0..ny * nz).map(move |idx| {
                    let c = grid.center(0, idx % ny, idx / ny);
                    let s = self.slice_slip(half, self.slip.values([b.centre, c[1], c[2]]));
                    SlipCell {
                        system: Some(system_id),
                        s: frame.to_global(s),
                    }
                })
            })
            .collect()
    }

    /// Samples `β_n`, its slip vector and `û_n` at the cell centres of `grid`
    /// (patch frame). Each bi-layer must span at least two cells in `x¹`.
    pub fn rasterize(&self, grid: &Grid3) -> Result<RasterLaminate> {
        let h1 = grid.spacing()[0];
        if self.thickness() < 2.0 * h1 * (1.0 - 1e-12) {
            return Err(Error::guard(
                "quadrature",
                format!(
                    "bi-layer thickness {} is below two cells ({h1} each) at level {}",
                    self.thickness(),
                    self.level
                ),
            ));
        }
        let frame = *self.frame();
        let cells: Vec<(Vec3, Vec3)> = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let xi = grid.center_of(idx);
                (self.slip_at(xi), self.corrector_at(xi))
            })
            .collect();
        let m = self.local.m();
        let slip = VectorField3::new(grid.clone(), frame, cells.iter().map(|c| c.0).collect())?;
        let beta = TensorField3::new(grid.clone(), frame, cells.iter().map(|c| linalg::outer(c.0, m)).collect())?;
        let corrector = VectorField3::new(grid.clone(), frame, cells.iter().map(|c| c.1).collect())?;
        Ok(RasterLaminate { slip, beta, corrector })
    }

    /// JSON-friendly description of the bi-layer stack.
    pub fn dump(&self) -> LaminateDump {
        LaminateDump {
            level: self.level,
            thickness: self.thickness(),
            x1_range: [self.lower, self.lower + self.extent],
            system: self.global,
            frame: *self.frame(),
            bilayers: self.bilayers(),
        }
    }
}

/// `∇û = ±w ⊗ e₁ + d·∇_{y,z}w` with `+` on the bottom half.
#[inline]
pub fn corrector_gradient(w: Vec3, grad_w: &Mat3, height: f64, half: Half) -> Mat3 {
    let sign = match half {
        Half::Bottom => 1.0,
        Half::Top => -1.0,
    };
    let mut g = linalg::mat_scale(grad_w, height);
    for (a, row) in g.iter_mut().enumerate() {
        row[0] = sign * w[a];
    }
    g
}

#[derive(Debug, Clone)]
pub struct RasterLaminate {
    pub slip: VectorField3,
    pub beta: TensorField3,
    pub corrector: VectorField3,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LaminateDump {
    pub level: u32,
    pub thickness: f64,
    pub x1_range: [f64; 2],
    pub system: SlipSystem,
    pub frame: PatchFrame,
    pub bilayers: Vec<Bilayer>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lamination::profile::Profile;
    use crate::slipsys::check_ssc;

    fn system() -> SlipSystem {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        SlipSystem::new([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, r, r]).unwrap()
    }

    fn gaussian_slip() -> AnalyticSlip {
        AnalyticSlip::new(
            PatchFrame::identity(),
            Profile::Gaussian {
                amplitude: 1.0,
                center: [0.5; 3],
                widths: [0.2; 3],
            },
            Profile::Gaussian {
                amplitude: -0.6,
                center: [0.45, 0.55, 0.5],
                widths: [0.15, 0.2, 0.2],
            },
        )
        .unwrap()
    }

    #[test]
    fn bilayers_tile_the_patch() {
        let g = Grid3::unit(16).unwrap();
        let lam = Laminate::build(&gaussian_slip(), &system(), &g, 3).unwrap();
        assert_eq!(lam.bilayer_count(), 8);
        assert_eq!(lam.thickness(), 0.125);
        let b = lam.bilayers();
        assert_eq!(b[0].lower, 0.0);
        assert_eq!(b[7].upper, 1.0);
        for w in b.windows(2) {
            assert_eq!(w[0].upper, w[1].lower);
        }
    }

    #[test]
    fn constant_slip_puts_everything_in_top_slices() {
        let slip = AnalyticSlip::new(PatchFrame::identity(), Profile::Constant(0.3), Profile::Zero).unwrap();
        let g = Grid3::unit(16).unwrap();
        let lam = Laminate::build(&slip, &system(), &g, 3).unwrap();
        assert_eq!(lam.slip_at([0.01, 0.5, 0.5]), [0.0; 3]);
        let top = lam.slip_at([0.1, 0.5, 0.5]);
        assert!((top[1] - 0.6).abs() < 1e-15 && top[0] == 0.0 && top[2] == 0.0);
    }

    #[test]
    fn corrector_slopes_for_constant_components() {
        let slip = AnalyticSlip::new(PatchFrame::identity(), Profile::Constant(0.3), Profile::Constant(0.5)).unwrap();
        let sys = system();
        let g = Grid3::unit(16).unwrap();
        let lam = Laminate::build(&slip, &sys, &g, 2).unwrap();
        // w = c2 b2 − c1 b1: the lower half rises with slope w, the upper
        // half falls back with slope −w.
        let w = linalg::lincomb(0.5, sys.b2(), -0.3, sys.b1());
        let bottom = lam.corrector_grad_at([0.3, 0.5, 0.5]);
        let top = lam.corrector_grad_at([0.45, 0.5, 0.5]);
        for a in 0..3 {
            assert!((bottom[a][0] - w[a]).abs() < 1e-15);
            assert!((top[a][0] + w[a]).abs() < 1e-15);
        }
        // ∂û/∂x¹ = 2c_j b_j − s on each slice.
        let s = linalg::lincomb(0.3, sys.b1(), 0.5, sys.b2());
        let want_bottom = linalg::sub(linalg::scale(sys.b2(), 1.0), s);
        for a in 0..3 {
            assert!((bottom[a][0] - want_bottom[a]).abs() < 1e-15);
        }
    }

    #[test]
    fn corrector_vanishes_on_every_interface() {
        let g = Grid3::unit(16).unwrap();
        for n in 1..=6 {
            let lam = Laminate::build(&gaussian_slip(), &system(), &g, n).unwrap();
            for b in lam.bilayers() {
                for x1 in [b.lower, b.upper] {
                    let u = lam.corrector_at([x1, 0.47, 0.52]);
                    // At `upper` the point belongs to the next bi-layer (or is
                    // clamped into the last one); both evaluate to zero height.
                    assert!(linalg::norm(u) < 1e-12, "n={n} x1={x1} u={u:?}");
                }
            }
        }
    }

    #[test]
    fn slices_pass_single_slip() {
        let g = Grid3::new([1.0; 3], [8, 16, 16], [0.0; 3]).unwrap();
        for n in 1..=5 {
            let lam = Laminate::build(&gaussian_slip(), &system(), &g, n).unwrap();
            let r = check_ssc(&lam.slice_cells(&g, 0), &[system()], 1e-12).unwrap();
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn rasterization_guard() {
        let g = Grid3::unit(16).unwrap();
        let lam = Laminate::build(&gaussian_slip(), &system(), &g, 3).unwrap();
        assert!(lam.rasterize(&g).is_ok());
        let lam = Laminate::build(&gaussian_slip(), &system(), &g, 4).unwrap();
        assert!(matches!(lam.rasterize(&g), Err(Error::Guard { guard: "quadrature", .. })));
    }

    #[test]
    fn rejects_level_zero_and_wrong_frame() {
        let g = Grid3::unit(8).unwrap();
        assert!(Laminate::build(&gaussian_slip(), &system(), &g, 0).is_err());
        let other = SlipSystem::new([0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]).unwrap();
        assert!(matches!(
            Laminate::build(&gaussian_slip(), &other, &g, 2),
            Err(Error::FrameMismatch(_))
        ));
    }
}
