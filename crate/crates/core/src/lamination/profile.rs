//! Closed-form slip components and displacements, evaluated at local
//! coordinates of a patch frame.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{gradient, PatchFrame, ScalarField3, TensorField3, VectorField3};
use crate::geometry::Region;
use crate::linalg::{self, Mat3, Vec3, ZERO3, ZERO33};
use crate::slipsys::SlipSystem;

/// Relative step for finite-difference gradients of opaque profiles.
const FD_STEP: f64 = 1e-6;

type ScalarFn = Arc<dyn Fn(Vec3) -> f64 + Send + Sync>;

/// One Burgers component `c_j(ξ)`.
#[derive(Clone)]
pub enum Profile {
    Zero,
    Constant(f64),
    /// `amplitude · exp(−Σ_a (ξ_a − center_a)² / (2 widths_a²))`
    Gaussian {
        amplitude: f64,
        center: Vec3,
        widths: Vec3,
    },
    /// `value` inside the region, 0 outside.
    Indicator { region: Region, value: f64 },
    /// Trilinear interpolation of a field stored in the patch frame.
    Sampled(Arc<ScalarField3>),
    Custom(ScalarFn),
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Zero => write!(f, "Zero"),
            Profile::Constant(c) => write!(f, "Constant({c})"),
            Profile::Gaussian {
                amplitude,
                center,
                widths,
            } => write!(f, "Gaussian({amplitude}, {center:?}, {widths:?})"),
            Profile::Indicator { region, value } => write!(f, "Indicator({region:?}, {value})"),
            Profile::Sampled(field) => write!(f, "Sampled({:?})", field.grid()),
            Profile::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Profile {
    pub fn custom(f: impl Fn(Vec3) -> f64 + Send + Sync + 'static) -> Self {
        Profile::Custom(Arc::new(f))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Profile::Constant(c) if !c.is_finite() => Err(Error::param("profile.value", "must be finite")),
            Profile::Gaussian {
                amplitude, widths, ..
            } => {
                if !amplitude.is_finite() || widths.iter().any(|w| !(*w > 0.0)) {
                    Err(Error::param("profile.gaussian", "needs finite amplitude and positive widths"))
                } else {
                    Ok(())
                }
            }
            Profile::Indicator { region, value } => {
                if !value.is_finite() {
                    return Err(Error::param("profile.value", "must be finite"));
                }
                region.validate()
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn value(&self, xi: Vec3) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Constant(c) => *c,
            Profile::Gaussian {
                amplitude,
                center,
                widths,
            } => amplitude * (-gauss_exponent(xi, center, widths)).exp(),
            Profile::Indicator { region, value } => region.indicator(xi) * value,
            Profile::Sampled(field) => field.sample_local(xi),
            Profile::Custom(f) => f(xi),
        }
    }

    /// `∂c/∂ξ`; zero almost everywhere for piecewise-constant profiles.
    #[inline]
    pub fn gradient(&self, xi: Vec3) -> Vec3 {
        match self {
            Profile::Zero | Profile::Constant(_) | Profile::Indicator { .. } => ZERO3,
            Profile::Gaussian {
                amplitude,
                center,
                widths,
            } => {
                let v = amplitude * (-gauss_exponent(xi, center, widths)).exp();
                [
                    -v * (xi[0] - center[0]) / (widths[0] * widths[0]),
                    -v * (xi[1] - center[1]) / (widths[1] * widths[1]),
                    -v * (xi[2] - center[2]) / (widths[2] * widths[2]),
                ]
            }
            Profile::Sampled(_) | Profile::Custom(_) => {
                let mut g = ZERO3;
                for a in 0..3 {
                    let h = FD_STEP * (1.0 + xi[a].abs());
                    let mut p = xi;
                    let mut q = xi;
                    p[a] += h;
                    q[a] -= h;
                    g[a] = (self.value(p) - self.value(q)) / (2.0 * h);
                }
                g
            }
        }
    }

    /// Whether the profile is constant (no spatial variation at all).
    pub fn is_constant(&self) -> bool {
        matches!(self, Profile::Zero | Profile::Constant(_))
    }
}

#[inline]
fn gauss_exponent(xi: Vec3, c: &Vec3, w: &Vec3) -> f64 {
    let mut e = 0.0;
    for a in 0..3 {
        let d = (xi[a] - c[a]) / w[a];
        e += d * d;
    }
    0.5 * e
}

/// The pair `(c1, c2)` in a patch frame, optionally cut to a support region
/// (local coordinates).
#[derive(Debug, Clone)]
pub struct AnalyticSlip {
    frame: PatchFrame,
    c: [Profile; 2],
    support: Option<Region>,
}

impl AnalyticSlip {
    pub fn new(frame: PatchFrame, c1: Profile, c2: Profile) -> Result<Self> {
        for c in [&c1, &c2] {
            c.validate()?;
            if let Profile::Sampled(f) = c {
                f.frame().ensure_matches(&frame)?;
            }
        }
        Ok(AnalyticSlip {
            frame,
            c: [c1, c2],
            support: None,
        })
    }

    pub fn with_support(mut self, region: Region) -> Result<Self> {
        region.validate()?;
        self.support = Some(region);
        Ok(self)
    }

    pub fn zero(frame: PatchFrame) -> Self {
        AnalyticSlip {
            frame,
            c: [Profile::Zero, Profile::Zero],
            support: None,
        }
    }

    pub fn frame(&self) -> &PatchFrame {
        &self.frame
    }
    pub fn profiles(&self) -> &[Profile; 2] {
        &self.c
    }
    pub fn support(&self) -> Option<&Region> {
        self.support.as_ref()
    }

    #[inline]
    fn inside(&self, xi: Vec3) -> bool {
        self.support.as_ref().map_or(true, |r| r.contains(xi))
    }

    #[inline]
    pub fn values(&self, xi: Vec3) -> [f64; 2] {
        if !self.inside(xi) {
            return [0.0; 2];
        }
        [self.c[0].value(xi), self.c[1].value(xi)]
    }

    #[inline]
    pub fn gradients(&self, xi: Vec3) -> [Vec3; 2] {
        if !self.inside(xi) {
            return [ZERO3; 2];
        }
        [self.c[0].gradient(xi), self.c[1].gradient(xi)]
    }

    /// Samples `(c1, c2)` at the cell centres of `grid` (patch-local).
    pub fn sample(&self, grid: &crate::fields::Grid3) -> Result<[ScalarField3; 2]> {
        Ok([
            ScalarField3::from_fn(grid.clone(), self.frame, |p| self.values(p)[0])?,
            ScalarField3::from_fn(grid.clone(), self.frame, |p| self.values(p)[1])?,
        ])
    }
}

type GradFn = Arc<dyn Fn(Vec3) -> (Vec3, Mat3) + Send + Sync>;

/// The macroscopic displacement `u` paired with the slip.
#[derive(Clone)]
pub enum Displacement {
    Zero,
    /// `u(x) = A x + b`, global components.
    Affine { matrix: Mat3, offset: Vec3 },
    /// `u = κ (c2 b2 − c1 b1)`, built from the slip components themselves.
    SlipAligned { kappa: f64 },
    /// A sampled field on the global grid with its finite-difference gradient.
    Field {
        u: Arc<VectorField3>,
        grad: Arc<TensorField3>,
    },
    /// `x ↦ (u(x), ∇u(x))` at global points, global components.
    Custom(GradFn),
}

impl fmt::Debug for Displacement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Displacement::Zero => write!(f, "Zero"),
            Displacement::Affine { matrix, offset } => write!(f, "Affine({matrix:?}, {offset:?})"),
            Displacement::SlipAligned { kappa } => write!(f, "SlipAligned({kappa})"),
            Displacement::Field { u, .. } => write!(f, "Field({:?})", u.grid()),
            Displacement::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Displacement {
    pub fn from_field(u: VectorField3) -> Result<Self> {
        u.frame().ensure_matches(&PatchFrame::identity())?;
        let grad = gradient(&u)?;
        Ok(Displacement::Field {
            u: Arc::new(u),
            grad: Arc::new(grad),
        })
    }

    /// Simple shear `u = γ (m·x) b` (global components).
    pub fn shear(gamma: f64, m: Vec3, b: Vec3) -> Self {
        Displacement::Affine {
            matrix: linalg::mat_scale(&linalg::outer(b, m), gamma),
            offset: ZERO3,
        }
    }

    /// `(u, ∇u)` at local point `ξ`, both in local components of `slip`'s
    /// frame. `system` must be given in the same local components.
    pub fn eval_local(&self, xi: Vec3, slip: &AnalyticSlip, system: &SlipSystem) -> (Vec3, Mat3) {
        let frame = slip.frame();
        let global = |u: Vec3, g: Mat3| (frame.to_local(u), frame.tensor_to_local(&g));
        match self {
            Displacement::Zero => (ZERO3, ZERO33),
            Displacement::Affine { matrix, offset } => {
                let x = frame.to_global(xi);
                global(linalg::add(linalg::mat_vec(matrix, x), *offset), *matrix)
            }
            Displacement::SlipAligned { kappa } => {
                let [c1, c2] = slip.values(xi);
                let [g1, g2] = slip.gradients(xi);
                let u = linalg::scale(linalg::lincomb(c2, system.b2(), -c1, system.b1()), *kappa);
                let g = linalg::mat_scale(
                    &linalg::mat_sub(&linalg::outer(system.b2(), g2), &linalg::outer(system.b1(), g1)),
                    *kappa,
                );
                (u, g)
            }
            Displacement::Field { u, grad } => {
                let x = frame.to_global(xi);
                global(u.sample_global(x), grad.sample_global(x))
            }
            Displacement::Custom(f) => {
                let (u, g) = f(frame.to_global(xi));
                global(u, g)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid3;

    #[test]
    fn gaussian_gradient_matches_finite_differences() {
        let p = Profile::Gaussian {
            amplitude: 0.7,
            center: [0.5, 0.4, 0.6],
            widths: [0.2, 0.1, 0.15],
        };
        let xi = [0.55, 0.47, 0.52];
        let g = p.gradient(xi);
        let fd = Profile::custom(move |x| {
            0.7 * (-0.5 * (((x[0] - 0.5) / 0.2).powi(2) + ((x[1] - 0.4) / 0.1).powi(2) + ((x[2] - 0.6) / 0.15).powi(2))).exp()
        })
        .gradient(xi);
        for a in 0..3 {
            assert!((g[a] - fd[a]).abs() < 1e-7, "{g:?} vs {fd:?}");
        }
    }

    #[test]
    fn support_cuts_profiles() {
        let slip = AnalyticSlip::new(PatchFrame::identity(), Profile::Constant(2.0), Profile::Constant(1.0))
            .unwrap()
            .with_support(Region::Ball {
                center: [0.5; 3],
                radius: 0.2,
            })
            .unwrap();
        assert_eq!(slip.values([0.5; 3]), [2.0, 1.0]);
        assert_eq!(slip.values([0.0; 3]), [0.0, 0.0]);
    }

    #[test]
    fn slip_aligned_gradient_is_consistent() {
        let sys = SlipSystem::new([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.6, 0.8]).unwrap();
        let slip = AnalyticSlip::new(
            PatchFrame::identity(),
            Profile::Gaussian {
                amplitude: 1.0,
                center: [0.5; 3],
                widths: [0.3; 3],
            },
            Profile::custom(|x| x[1] * x[2]),
        )
        .unwrap();
        let d = Displacement::SlipAligned { kappa: 0.8 };
        let xi = [0.3, 0.6, 0.7];
        let (_, g) = d.eval_local(xi, &slip, &sys);
        for b in 0..3 {
            let h = 1e-6;
            let mut p = xi;
            let mut q = xi;
            p[b] += h;
            q[b] -= h;
            let (up, _) = d.eval_local(p, &slip, &sys);
            let (uq, _) = d.eval_local(q, &slip, &sys);
            for a in 0..3 {
                assert!((g[a][b] - (up[a] - uq[a]) / (2.0 * h)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn field_displacement_reproduces_affine_gradient() {
        let g = Grid3::unit(8).unwrap();
        let a = [[0.1, 0.2, 0.0], [0.0, -0.3, 0.5], [0.4, 0.0, 0.0]];
        let u = VectorField3::from_fn(g, PatchFrame::identity(), |x| linalg::mat_vec(&a, x)).unwrap();
        let d = Displacement::from_field(u).unwrap();
        let slip = AnalyticSlip::zero(PatchFrame::identity());
        let sys = SlipSystem::new([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]).unwrap();
        let (_, grad) = d.eval_local([0.37, 0.51, 0.22], &slip, &sys);
        for r in 0..3 {
            for c in 0..3 {
                assert!((grad[r][c] - a[r][c]).abs() < 1e-12);
            }
        }
    }
}
