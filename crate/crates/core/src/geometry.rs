//! Geometric primitives for patch indicators and slip supports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Region {
    /// The whole domain.
    All,
    /// Axis-aligned box `lo ≤ x ≤ hi`.
    Box { lo: Vec3, hi: Vec3 },
    /// Circular cylinder around the line through `center` along `axis`;
    /// infinite unless `length` is given (then centred on `center`).
    Cylinder {
        center: Vec3,
        axis: Vec3,
        radius: f64,
        #[serde(default)]
        length: Option<f64>,
    },
    Ball { center: Vec3, radius: f64 },
    /// `normal · x ≤ offset`.
    HalfSpace { normal: Vec3, offset: f64 },
}

impl Region {
    pub fn validate(&self) -> Result<()> {
        match self {
            Region::All | Region::HalfSpace { .. } => {}
            Region::Box { lo, hi } => {
                if (0..3).any(|a| !(lo[a] < hi[a])) {
                    return Err(Error::param("region.box", "needs lo < hi on every axis"));
                }
            }
            Region::Cylinder {
                axis, radius, length, ..
            } => {
                if linalg::normalize(*axis).is_none() {
                    return Err(Error::param("region.cylinder.axis", "must be nonzero"));
                }
                if !(*radius > 0.0) || length.is_some_and(|l| !(l > 0.0)) {
                    return Err(Error::param("region.cylinder", "radius and length must be positive"));
                }
            }
            Region::Ball { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(Error::param("region.ball.radius", "must be positive"));
                }
            }
        }
        if let Region::HalfSpace { normal, .. } = self {
            if linalg::normalize(*normal).is_none() {
                return Err(Error::param("region.half_space.normal", "must be nonzero"));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: Vec3) -> bool {
        match self {
            Region::All => true,
            Region::Box { lo, hi } => (0..3).all(|a| p[a] >= lo[a] && p[a] <= hi[a]),
            Region::Cylinder {
                center,
                axis,
                radius,
                length,
            } => {
                let a = linalg::normalize(*axis).unwrap_or([1.0, 0.0, 0.0]);
                let d = linalg::sub(p, *center);
                let t = linalg::dot(d, a);
                let radial = linalg::norm(linalg::sub(d, linalg::scale(a, t)));
                radial <= *radius && length.map_or(true, |l| t.abs() <= 0.5 * l)
            }
            Region::Ball { center, radius } => linalg::norm(linalg::sub(p, *center)) <= *radius,
            Region::HalfSpace { normal, offset } => linalg::dot(*normal, p) <= *offset,
        }
    }

    pub fn indicator(&self, p: Vec3) -> f64 {
        if self.contains(p) {
            1.0
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primitives_contain_their_centres() {
        let c = [0.5, 0.5, 0.5];
        let regions = [
            Region::All,
            Region::Box {
                lo: [0.0; 3],
                hi: [1.0; 3],
            },
            Region::Cylinder {
                center: c,
                axis: [1.0, 0.0, 0.0],
                radius: 0.1,
                length: Some(0.2),
            },
            Region::Ball { center: c, radius: 0.1 },
            Region::HalfSpace {
                normal: [0.0, 0.0, 1.0],
                offset: 0.6,
            },
        ];
        for r in &regions {
            r.validate().unwrap();
            assert!(r.contains(c), "{r:?}");
        }
        assert!(!regions[2].contains([0.5, 0.7, 0.5]));
        assert!(!regions[2].contains([0.65, 0.5, 0.5]));
        assert!(!regions[4].contains([0.0, 0.0, 0.7]));
    }

    #[test]
    fn parses_tagged_json() {
        let r: Region = serde_json::from_str(r#"{"type":"ball","center":[0,0,0],"radius":2}"#).unwrap();
        assert!(r.contains([1.0, 1.0, 1.0]));
        assert!(serde_json::from_str::<Region>(r#"{"type":"ball","center":[0,0,0]}"#).is_err());
    }
}
