//! Procedural synthetic scenes, described in versioned TOML.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCENE_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Texture {
    Solid,
    /// Alternates between full and `contrast`-scaled color every `size` meters
    /// of surface parameter.
    Checker { size: f64, contrast: f64 },
    /// Linear blend to `to` along the vertical surface parameter over `period` meters.
    Gradient { to: [f64; 3], period: f64 },
    /// Two-octave value noise with cell size `scale` meters; brightness varies
    /// in `[1 - contrast, 1]`.
    Noise { scale: f64, contrast: f64, seed: u32 },
}

fn lattice(i: i64, j: i64, seed: u32) -> f64 {
    let mut h = (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (j as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ (seed as u64).wrapping_mul(0x1656_67B1_9E37_79F9);
    h ^= h >> 33;
    h = h.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    h ^= h >> 33;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn value_noise(a: f64, b: f64, seed: u32) -> f64 {
    let (fa, fb) = (a.floor(), b.floor());
    let (ta, tb) = (a - fa, b - fb);
    let (sa, sb) = (ta * ta * (3.0 - 2.0 * ta), tb * tb * (3.0 - 2.0 * tb));
    let (i, j) = (fa as i64, fb as i64);
    let top = lattice(i, j, seed) * (1.0 - sa) + lattice(i + 1, j, seed) * sa;
    let bottom = lattice(i, j + 1, seed) * (1.0 - sa) + lattice(i + 1, j + 1, seed) * sa;
    top * (1.0 - sb) + bottom * sb
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub color: [f64; 3],
    #[serde(default = "solid")]
    pub texture: Texture,
}

fn solid() -> Texture {
    Texture::Solid
}

impl Material {
    /// Unlit texture value at surface parameters `(a, b)` in meters.
    pub fn shade(&self, a: f64, b: f64) -> [f64; 3] {
        match self.texture {
            Texture::Solid => self.color,
            Texture::Checker { size, contrast } => {
                let parity = ((a / size).floor() + (b / size).floor()).rem_euclid(2.0);
                let k = if parity < 0.5 { 1.0 } else { contrast };
                self.color.map(|c| c * k)
            }
            Texture::Gradient { to, period } => {
                let t = (b / period).rem_euclid(2.0);
                let t = if t > 1.0 { 2.0 - t } else { t };
                let mut out = [0.0; 3];
                for c in 0..3 {
                    out[c] = self.color[c] * (1.0 - t) + to[c] * t;
                }
                out
            }
            Texture::Noise { scale, contrast, seed } => {
                let n = (2.0 * value_noise(a / scale, b / scale, seed)
                    + value_noise(2.0 * a / scale, 2.0 * b / scale, seed ^ 0x5bd1_e995))
                    / 3.0;
                let k = 1.0 - contrast + contrast * n;
                self.color.map(|c| c * k)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Primitive {
    /// Open vertical tube around `(center[0], center[1])`, visible from both sides.
    Cylinder {
        center: [f64; 2],
        radius: f64,
        z_min: f64,
        z_max: f64,
        material: Material,
    },
    Sphere {
        center: [f64; 3],
        radius: f64,
        material: Material,
    },
    /// Axis-aligned box.
    Box {
        min: [f64; 3],
        max: [f64; 3],
        material: Material,
    },
    /// Rectangular mirror spanned by `center ± half_u·u ± half_v·v`; reflected
    /// rays are tinted by `reflectance`.
    Mirror {
        center: [f64; 3],
        u: [f64; 3],
        v: [f64; 3],
        half_u: f64,
        half_v: f64,
        reflectance: [f64; 3],
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticScene {
    pub version: u32,
    #[serde(default)]
    pub background: [f64; 3],
    #[serde(default)]
    pub primitives: Vec<Primitive>,
}

/// Scenes must fit inside this radius around the origin.
pub const SCENE_BOUND: f64 = 1.0e3;

impl SyntheticScene {
    pub fn empty(background: [f64; 3]) -> Self {
        SyntheticScene {
            version: SCENE_VERSION,
            background,
            primitives: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCENE_VERSION {
            return Err(Error::VersionMismatch {
                found: self.version,
                expected: SCENE_VERSION,
            });
        }
        let bad = |i: usize, what: &str| Err(Error::InvalidArgument(format!("primitive {i}: {what}")));
        for (i, p) in self.primitives.iter().enumerate() {
            let ok_extent = |v: f64| v.is_finite() && v.abs() <= SCENE_BOUND;
            match p {
                Primitive::Cylinder {
                    center,
                    radius,
                    z_min,
                    z_max,
                    ..
                } => {
                    if !(*radius > 0.0) || !(z_max > z_min) || ![center[0], center[1], *radius, *z_min, *z_max].into_iter().all(ok_extent) {
                        return bad(i, "cylinder needs radius > 0, z_max > z_min and bounded extents");
                    }
                }
                Primitive::Sphere { center, radius, .. } => {
                    if !(*radius > 0.0) || !center.iter().copied().chain([*radius]).all(ok_extent) {
                        return bad(i, "sphere needs radius > 0 and bounded extents");
                    }
                }
                Primitive::Box { min, max, .. } => {
                    if (0..3).any(|k| !(max[k] > min[k])) || !min.iter().chain(max).copied().all(ok_extent) {
                        return bad(i, "box needs max > min on every axis and bounded extents");
                    }
                }
                Primitive::Mirror {
                    center,
                    u,
                    v,
                    half_u,
                    half_v,
                    ..
                } => {
                    let (u, v) = (Vector3::from(*u), Vector3::from(*v));
                    if (u.norm() - 1.0).abs() > 1e-6
                        || (v.norm() - 1.0).abs() > 1e-6
                        || u.dot(&v).abs() > 1e-6
                        || !(*half_u > 0.0 && *half_v > 0.0)
                        || !center.iter().all(|&c| ok_extent(c))
                    {
                        return bad(i, "mirror needs orthonormal u, v and positive half extents");
                    }
                }
            }
        }
        Ok(())
    }

    /// Whether any primitive has geometry at a cylindrical radius inside `[lo, hi]`.
    pub fn occupies_radius_range(&self, lo: f64, hi: f64) -> bool {
        self.primitives.iter().any(|p| {
            let (a, b) = match *p {
                Primitive::Cylinder { center, radius, .. } => {
                    let d = center[0].hypot(center[1]);
                    ((d - radius).abs(), d + radius)
                }
                Primitive::Sphere { center, radius, .. } => {
                    let d = center[0].hypot(center[1]);
                    ((d - radius).max(0.0), d + radius)
                }
                Primitive::Box { min, max, .. } => {
                    let cx = 0.0f64.clamp(min[0], max[0]);
                    let cy = 0.0f64.clamp(min[1], max[1]);
                    let far = min[0].abs().max(max[0].abs()).hypot(min[1].abs().max(max[1].abs()));
                    (cx.hypot(cy), far)
                }
                Primitive::Mirror { center, half_u, half_v, .. } => {
                    let d = center[0].hypot(center[1]);
                    let r = half_u.hypot(half_v);
                    ((d - r).max(0.0), d + r)
                }
            };
            a <= hi && b >= lo
        })
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let scene: SyntheticScene = toml::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scene serializes")
    }

    /// Desk-scale evaluation scene: a checkered enclosing wall at 6 m, a ring
    /// of textured pillars and boxes between 1.5 and 4 m, and a few spheres.
    pub fn standard() -> Self {
        let checker = |color: [f64; 3], size: f64| Material {
            color,
            texture: Texture::Checker { size, contrast: 0.3 },
        };
        let gradient = |color: [f64; 3], to: [f64; 3]| Material {
            color,
            texture: Texture::Gradient { to, period: 0.7 },
        };
        let mut primitives = vec![Primitive::Cylinder {
            center: [0.0, 0.0],
            radius: 6.0,
            z_min: -12.0,
            z_max: 12.0,
            material: Material {
                color: [0.9, 0.85, 0.75],
                texture: Texture::Noise {
                    scale: 0.5,
                    contrast: 0.8,
                    seed: 1,
                },
            },
        }];
        let pillar_colors = [
            [0.9, 0.3, 0.2],
            [0.2, 0.7, 0.3],
            [0.2, 0.4, 0.9],
            [0.9, 0.8, 0.2],
            [0.7, 0.3, 0.8],
            [0.2, 0.8, 0.8],
        ];
        for (i, color) in pillar_colors.iter().enumerate() {
            let theta = i as f64 * std::f64::consts::TAU / 6.0 + 0.2;
            let d = 2.0 + 0.35 * i as f64;
            primitives.push(Primitive::Cylinder {
                center: [d * theta.cos(), d * theta.sin()],
                radius: 0.25,
                z_min: -2.0,
                z_max: 1.5,
                material: checker(*color, 0.15),
            });
        }
        for i in 0..4 {
            let theta = i as f64 * std::f64::consts::FRAC_PI_2 + 0.75;
            let d = 3.2 + 0.2 * i as f64;
            let (x, y) = (d * theta.cos(), d * theta.sin());
            primitives.push(Primitive::Box {
                min: [x - 0.35, y - 0.35, -1.2],
                max: [x + 0.35, y + 0.35, -0.3 + 0.2 * i as f64],
                material: gradient([0.95, 0.55, 0.1], [0.1, 0.2, 0.6]),
            });
        }
        for i in 0..3 {
            let theta = i as f64 * std::f64::consts::TAU / 3.0 + 1.1;
            let d = 1.6 + 0.5 * i as f64;
            primitives.push(Primitive::Sphere {
                center: [d * theta.cos(), d * theta.sin(), 0.6 - 0.4 * i as f64],
                radius: 0.3,
                material: checker([0.95, 0.95, 0.95], 0.12),
            });
        }
        SyntheticScene {
            version: SCENE_VERSION,
            background: [0.0; 3],
            primitives,
        }
    }

    /// Two concentric textured cylinders, useful for parallax checks.
    pub fn two_cylinders(inner: f64, outer: f64) -> Self {
        let mat = |color: [f64; 3], size: f64| Material {
            color,
            texture: Texture::Checker { size, contrast: 0.25 },
        };
        SyntheticScene {
            version: SCENE_VERSION,
            background: [0.0; 3],
            primitives: vec![
                Primitive::Cylinder {
                    center: [0.0, 0.0],
                    radius: inner,
                    z_min: -0.5,
                    z_max: 0.5,
                    material: mat([0.9, 0.4, 0.2], 0.2),
                },
                Primitive::Cylinder {
                    center: [0.0, 0.0],
                    radius: outer,
                    z_min: -4.0 * outer,
                    z_max: 4.0 * outer,
                    material: mat([0.3, 0.6, 0.9], 0.5),
                },
            ],
        }
    }

    /// The standard scene with a mirror patch facing the rig.
    pub fn with_mirror() -> Self {
        let mut s = Self::standard();
        s.primitives.push(Primitive::Mirror {
            center: [-2.5, 0.0, 0.0],
            u: [0.0, 1.0, 0.0],
            v: [0.0, 0.0, 1.0],
            half_u: 0.8,
            half_v: 0.6,
            reflectance: [0.9, 0.9, 0.9],
        });
        s
    }
}
