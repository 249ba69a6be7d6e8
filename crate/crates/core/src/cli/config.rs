//! Scenario files: one JSON document per scenario, `"schema": 1`.
//!
//! Patch regions are in global coordinates; slip profiles are evaluated at
//! patch-local coordinates (identical to global ones when the patch frame is
//! the identity). Relative file paths are resolved against the directory of
//! the scenario file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::energy::EnergyParams;
use crate::error::{Error, Result};
use crate::fields::io::{read_raw, AnyField};
use crate::fields::{resample_scalar, Grid3, PatchFrame, ScalarField3, VectorField3};
use crate::geometry::Region;
use crate::lamination::{AnalyticSlip, Displacement, Profile};
use crate::linalg::{self, Mat3, Vec3, ZERO3};
use crate::slipsys::{load_catalogue, RelaxedState, SlipPatch, SlipSystem};
use crate::smoothing::SmoothParams;
use crate::verify::VerifyParams;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: u32,
    pub grid: Grid3,
    #[serde(default)]
    pub systems: Vec<SlipSystem>,
    /// JSON catalogue appended after `systems`.
    #[serde(default)]
    pub systems_file: Option<PathBuf>,
    #[serde(default)]
    pub patches: Vec<PatchConfig>,
    #[serde(default)]
    pub displacement: DisplacementConfig,
    #[serde(default)]
    pub energy: EnergyParams,
    #[serde(default)]
    pub laminate: LaminateConfig,
    #[serde(default)]
    pub smooth: SmoothParams,
    #[serde(default)]
    pub verify: VerifyParams,
    #[serde(default)]
    pub export: ExportConfig,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchConfig {
    pub system: usize,
    #[serde(default)]
    pub region: Option<Region>,
    /// Raw scalar indicator file (global grid); alternative to `region`.
    #[serde(default)]
    pub indicator_file: Option<PathBuf>,
    /// Defaults to the slip frame `(m, b1, m × b1)`.
    #[serde(default)]
    pub frame: Option<PatchFrame>,
    #[serde(default)]
    pub boundary_contact: [[bool; 2]; 3],
    #[serde(default)]
    pub slip: SlipConfig,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SlipConfig {
    #[default]
    Zero,
    Components {
        #[serde(default)]
        c1: ProfileConfig,
        #[serde(default)]
        c2: ProfileConfig,
    },
    /// Uniform slip `γ · direction`, split into Burgers components.
    Shear { gamma: f64, direction: Vec3 },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileConfig {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    Gaussian {
        amplitude: f64,
        center: Vec3,
        widths: Vec3,
    },
    CylinderIndicator {
        center: Vec3,
        axis: Vec3,
        radius: f64,
        #[serde(default)]
        length: Option<f64>,
        #[serde(default = "one")]
        value: f64,
    },
    Indicator {
        region: Region,
        #[serde(default = "one")]
        value: f64,
    },
    /// Raw scalar file on the patch grid, in the patch frame.
    File {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisplacementConfig {
    #[default]
    Zero,
    Affine {
        matrix: Mat3,
        #[serde(default)]
        offset: Vec3,
    },
    /// `u = γ (normal · x) direction`.
    Shear { gamma: f64, normal: Vec3, direction: Vec3 },
    /// `u = κ (c2 b2 − c1 b1)` of the laminated patch (laminate command only).
    SlipAligned { kappa: f64 },
    /// Raw vector file on the global grid.
    Field { path: PathBuf },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaminateConfig {
    pub patch: usize,
    pub n_list: Vec<u32>,
    pub nodes_per_slice: usize,
    /// `(y, z)` node grid; defaults to the patch grid.
    pub evaluation_resolution: Option<[usize; 3]>,
    /// Levels whose rasterized laminate is written as VTK.
    pub vtk_levels: Vec<u32>,
    pub tent: Option<TentConfig>,
}

impl Default for LaminateConfig {
    fn default() -> Self {
        LaminateConfig {
            patch: 0,
            n_list: vec![2, 3, 4, 5, 6],
            nodes_per_slice: 4,
            evaluation_resolution: None,
            vtk_levels: Vec::new(),
            tent: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TentConfig {
    /// `δ_n = scale · 2^{−n/2} · L_{x¹}`.
    pub scale: f64,
}

impl Default for TentConfig {
    fn default() -> Self {
        TentConfig { scale: 1.0 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportConfig {
    /// Raw field files converted to VTK.
    pub fields: Vec<PathBuf>,
    /// Also rasterize and export the laminate of this level.
    pub laminate_level: Option<u32>,
}

fn config_err(key: impl Into<String>, e: Error) -> Error {
    match e {
        e @ (Error::Config { .. } | Error::Io { .. }) => e,
        other => Error::Config {
            key: key.into(),
            reason: other.to_string(),
        },
    }
}

/// A parsed scenario together with the directory its paths are relative to.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub base: PathBuf,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Scenario::parse(&text, base)
    }

    pub fn parse(text: &str, base: PathBuf) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            Error::Config {
                key: if key == "." { "(root)".into() } else { key },
                reason: e.into_inner().to_string(),
            }
        })?;
        if config.schema != SCHEMA_VERSION {
            return Err(Error::Config {
                key: "schema".into(),
                reason: format!("unsupported version {} (expected {SCHEMA_VERSION})", config.schema),
            });
        }
        config.energy.validate().map_err(|e| config_err("energy", e))?;
        let scenario = Scenario { config, base };
        let n = scenario.systems()?.len();
        for (i, p) in scenario.config.patches.iter().enumerate() {
            if p.system >= n {
                return Err(Error::Config {
                    key: format!("patches[{i}].system"),
                    reason: format!("system {} does not exist ({n} defined)", p.system),
                });
            }
            if p.region.is_some() == p.indicator_file.is_some() {
                return Err(Error::Config {
                    key: format!("patches[{i}]"),
                    reason: "exactly one of `region` and `indicator_file` is required".into(),
                });
            }
            if let Some(r) = &p.region {
                r.validate().map_err(|e| config_err(format!("patches[{i}].region"), e))?;
            }
        }
        Ok(scenario)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn systems(&self) -> Result<Vec<SlipSystem>> {
        let mut out = self.config.systems.clone();
        if let Some(file) = &self.config.systems_file {
            out.extend(load_catalogue(&self.resolve(file)).map_err(|e| config_err("systems_file", e))?);
        }
        Ok(out)
    }

    pub fn grid(&self) -> &Grid3 {
        &self.config.grid
    }

    pub fn patch_frame(&self, i: usize) -> Result<PatchFrame> {
        let p = self.patch_config(i)?;
        match p.frame {
            Some(f) => Ok(f),
            None => Ok(self.systems()?[p.system].slip_frame()),
        }
    }

    fn patch_config(&self, i: usize) -> Result<&PatchConfig> {
        self.config.patches.get(i).ok_or_else(|| Error::Config {
            key: "laminate.patch".into(),
            reason: format!("patch {i} does not exist"),
        })
    }

    /// Patch grid: the global grid when the frame is the identity, else a
    /// grid in the patch frame covering the domain.
    pub fn patch_grid(&self, frame: &PatchFrame) -> Result<Grid3> {
        if frame.approx_eq(&PatchFrame::identity()) {
            Ok(self.grid().clone())
        } else {
            self.grid().covering(&PatchFrame::identity(), frame)
        }
    }

    fn profile(&self, key: String, c: &ProfileConfig, frame: &PatchFrame, grid: &Grid3) -> Result<Profile> {
        let p = match c {
            ProfileConfig::Zero => Profile::Zero,
            ProfileConfig::Constant { value } => Profile::Constant(*value),
            ProfileConfig::Gaussian {
                amplitude,
                center,
                widths,
            } => Profile::Gaussian {
                amplitude: *amplitude,
                center: *center,
                widths: *widths,
            },
            ProfileConfig::CylinderIndicator {
                center,
                axis,
                radius,
                length,
                value,
            } => Profile::Indicator {
                region: Region::Cylinder {
                    center: *center,
                    axis: *axis,
                    radius: *radius,
                    length: *length,
                },
                value: *value,
            },
            ProfileConfig::Indicator { region, value } => Profile::Indicator {
                region: region.clone(),
                value: *value,
            },
            ProfileConfig::File { path } => {
                let field = read_raw(&self.resolve(path))
                    .and_then(AnyField::into_scalar)
                    .map_err(|e| config_err(key.clone(), e))?;
                field.frame().ensure_matches(frame).map_err(|e| config_err(key.clone(), e))?;
                field.grid().ensure_matches(grid).map_err(|e| config_err(key.clone(), e))?;
                Profile::Sampled(std::sync::Arc::new(field))
            }
        };
        p.validate().map_err(|e| config_err(key, e))?;
        Ok(p)
    }

    /// Analytic slip of patch `i` in its frame (no support cut).
    pub fn analytic_slip(&self, i: usize) -> Result<AnalyticSlip> {
        let p = self.patch_config(i)?;
        let frame = self.patch_frame(i)?;
        let grid = self.patch_grid(&frame)?;
        let system = self.systems()?[p.system];
        let (c1, c2) = match &p.slip {
            SlipConfig::Zero => (Profile::Zero, Profile::Zero),
            SlipConfig::Components { c1, c2 } => (
                self.profile(format!("patches[{i}].slip.c1"), c1, &frame, &grid)?,
                self.profile(format!("patches[{i}].slip.c2"), c2, &frame, &grid)?,
            ),
            SlipConfig::Shear { gamma, direction } => {
                let s = linalg::scale(*direction, *gamma);
                let ratio = linalg::dot(s, system.m()).abs() / linalg::norm(s).max(f64::MIN_POSITIVE);
                if ratio > crate::slipsys::TANGENT_TOL {
                    return Err(Error::Config {
                        key: format!("patches[{i}].slip.direction"),
                        reason: "shear direction must lie in the slip plane".into(),
                    });
                }
                let (a, b) = system.decompose(s);
                (Profile::Constant(a), Profile::Constant(b))
            }
        };
        AnalyticSlip::new(frame, c1, c2).map_err(|e| config_err(format!("patches[{i}].slip"), e))
    }

    /// Indicator of patch `i` on its patch grid.
    pub fn patch_indicator(&self, i: usize) -> Result<ScalarField3> {
        let p = self.patch_config(i)?;
        let frame = self.patch_frame(i)?;
        let grid = self.patch_grid(&frame)?;
        let domain = self.grid().clone();
        match (&p.region, &p.indicator_file) {
            (Some(region), _) => ScalarField3::from_fn(grid, frame, |xi| {
                let x = frame.to_global(xi);
                if domain.contains(x) && region.contains(x) {
                    1.0
                } else {
                    0.0
                }
            }),
            (None, Some(file)) => {
                let key = format!("patches[{i}].indicator_file");
                let f = read_raw(&self.resolve(file))
                    .and_then(AnyField::into_scalar)
                    .map_err(|e| config_err(key.clone(), e))?;
                f.grid().ensure_matches(self.grid()).map_err(|e| config_err(key.clone(), e))?;
                let on_patch = resample_scalar(&f, &frame, &grid).map_err(|e| config_err(key.clone(), e))?;
                on_patch.map(|v| if v > 0.5 { 1.0 } else { 0.0 })
            }
            (None, None) => unreachable!("checked at parse time"),
        }
    }

    /// Patch `i` with its components sampled on the patch grid.
    pub fn slip_patch(&self, i: usize) -> Result<SlipPatch> {
        let p = self.patch_config(i)?;
        let frame = self.patch_frame(i)?;
        let grid = self.patch_grid(&frame)?;
        let ind = self.patch_indicator(i)?;
        let [c1, c2] = self.analytic_slip(i)?.sample(&grid)?;
        Ok(SlipPatch::masked(p.system, ind, &c1, &c2)?.with_boundary_contact(p.boundary_contact))
    }

    /// Displacement for the laminate study.
    pub fn displacement(&self) -> Result<Displacement> {
        Ok(match &self.config.displacement {
            DisplacementConfig::Zero => Displacement::Zero,
            DisplacementConfig::Affine { matrix, offset } => Displacement::Affine {
                matrix: *matrix,
                offset: *offset,
            },
            DisplacementConfig::Shear {
                gamma,
                normal,
                direction,
            } => Displacement::shear(*gamma, *normal, *direction),
            DisplacementConfig::SlipAligned { kappa } => Displacement::SlipAligned { kappa: *kappa },
            DisplacementConfig::Field { path } => {
                let u = read_raw(&self.resolve(path))
                    .and_then(AnyField::into_vector)
                    .map_err(|e| config_err("displacement.path", e))?;
                Displacement::from_field(u).map_err(|e| config_err("displacement.path", e))?
            }
        })
    }

    /// Displacement sampled on the global grid.
    pub fn displacement_field(&self) -> Result<VectorField3> {
        let grid = self.grid().clone();
        let id = PatchFrame::identity();
        let affine = |a: Mat3, b: Vec3| VectorField3::from_fn(grid.clone(), id, move |x| linalg::add(linalg::mat_vec(&a, x), b));
        match &self.config.displacement {
            DisplacementConfig::Zero => Ok(VectorField3::zeros(grid.clone(), id)),
            DisplacementConfig::Affine { matrix, offset } => affine(*matrix, *offset),
            DisplacementConfig::Shear {
                gamma,
                normal,
                direction,
            } => affine(linalg::mat_scale(&linalg::outer(*direction, *normal), *gamma), ZERO3),
            DisplacementConfig::SlipAligned { .. } => Err(Error::Config {
                key: "displacement.type".into(),
                reason: "slip_aligned is only available to the laminate command".into(),
            }),
            DisplacementConfig::Field { path } => {
                let u = read_raw(&self.resolve(path))
                    .and_then(AnyField::into_vector)
                    .map_err(|e| config_err("displacement.path", e))?;
                u.grid().ensure_matches(&grid).map_err(|e| config_err("displacement.path", e))?;
                Ok(u)
            }
        }
    }

    /// The relaxed state for the energy command.
    pub fn relaxed_state(&self) -> Result<RelaxedState> {
        let patches = (0..self.config.patches.len())
            .map(|i| self.slip_patch(i))
            .collect::<Result<Vec<_>>>()?;
        RelaxedState::new(self.displacement_field()?, self.systems()?, patches, Vec::new())
            .map_err(|e| config_err("patches", e))
    }
}
