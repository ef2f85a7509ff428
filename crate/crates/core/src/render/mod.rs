//! Analytic sphere renderer.
//!
//! An orthographic camera looks down `-z` at a unit sphere centred at the
//! origin; the image spans `[-1, 1]^2`. Each covered pixel is shaded once,
//! independently of every other pixel, so any parallel split of the raster
//! yields bit-identical output.

mod image;
mod metrics;

pub use self::image::{encode_gamma, read_pfm, write_pfm, write_png, ImageBuffer, ImageError};
pub use self::metrics::{mean_abs_diff, psnr, psnr_from_rmse, rmse, PSNR_CAP_DB};

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use thiserror::Error;

use crate::brdf::Brdf;
use crate::color::Rgb;
use crate::geom::Direction;

pub const MIN_RESOLUTION: usize = 16;
pub const DEFAULT_ROWS_PER_TASK: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("resolution {0} below the minimum of 16")]
    Resolution(usize),
    #[error("light intensity channels must be positive and finite")]
    Intensity,
    #[error("light position must be finite and outside the unit sphere")]
    LightPosition,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointLight {
    pub position: [f64; 3],
    pub intensity: Rgb,
}

impl Default for PointLight {
    fn default() -> Self {
        PointLight {
            position: [2.0, 2.0, 4.0],
            intensity: Rgb::splat(20.0),
        }
    }
}

/// Camera framing, light and raster size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SceneSpec {
    resolution: usize,
    light: PointLight,
}

impl SceneSpec {
    pub fn new(resolution: usize, light: PointLight) -> Result<Self, SceneError> {
        if resolution < MIN_RESOLUTION {
            return Err(SceneError::Resolution(resolution));
        }
        if !light.intensity.is_finite() || light.intensity.min_channel() <= 0.0 {
            return Err(SceneError::Intensity);
        }
        let p = light.position;
        if !p.iter().all(|c| c.is_finite()) || p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= 1.0 {
            return Err(SceneError::LightPosition);
        }
        Ok(SceneSpec { resolution, light })
    }

    /// Default light at `(2, 2, 4)` with intensity 20.
    pub fn with_resolution(resolution: usize) -> Result<Self, SceneError> {
        SceneSpec::new(resolution, PointLight::default())
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn light(&self) -> PointLight {
        self.light
    }
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            resolution: 256,
            light: PointLight::default(),
        }
    }
}

/// Orthonormal frame around a surface normal.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Frame {
    t: [f64; 3],
    b: [f64; 3],
    n: [f64; 3],
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl Frame {
    // branchless basis of Duff et al.
    fn from_normal(n: [f64; 3]) -> Frame {
        let sign = 1f64.copysign(n[2]);
        let a = -1.0 / (sign + n[2]);
        let b = n[0] * n[1] * a;
        Frame {
            t: [1.0 + sign * n[0] * n[0] * a, sign * b, -sign * n[0]],
            b: [b, sign + n[1] * n[1] * a, -n[1]],
            n,
        }
    }

    fn to_local(&self, v: [f64; 3]) -> Direction {
        Direction::from_unit(dot3(v, self.t), dot3(v, self.b), dot3(v, self.n))
    }

    fn to_world(&self, d: Direction) -> [f64; 3] {
        let (x, y, z) = (d.x(), d.y(), d.z());
        [
            x * self.t[0] + y * self.b[0] + z * self.n[0],
            x * self.t[1] + y * self.b[1] + z * self.n[1],
            x * self.t[2] + y * self.b[2] + z * self.n[2],
        ]
    }
}

/// Per-pixel geometry of one visible sphere point.
#[derive(Clone, Copy, Debug)]
pub struct ShadingPoint {
    /// Direction to the light, local frame.
    pub wi: Direction,
    /// Direction to the camera, local frame.
    pub wo: Direction,
    /// `cos(theta_i) / r^2`; zero when the light is behind the surface.
    pub irradiance: f64,
    frame: Frame,
}

/// Precomputed view/light geometry for a scene; shading a BRDF only needs
/// one evaluation per covered pixel.
#[derive(Clone, Debug)]
pub struct SceneGeometry {
    resolution: usize,
    intensity: Rgb,
    points: Vec<Option<ShadingPoint>>,
}

impl SceneGeometry {
    pub fn new(scene: &SceneSpec) -> Self {
        let res = scene.resolution;
        let light = scene.light;
        let points = (0..res * res)
            .map(|idx| {
                let (px, py) = (idx % res, idx / res);
                let x = (px as f64 + 0.5) / res as f64 * 2.0 - 1.0;
                let y = 1.0 - (py as f64 + 0.5) / res as f64 * 2.0;
                let rr = x * x + y * y;
                if rr >= 1.0 {
                    return None;
                }
                let n = [x, y, (1.0 - rr).sqrt()];
                let frame = Frame::from_normal(n);
                let to_light = [
                    light.position[0] - n[0],
                    light.position[1] - n[1],
                    light.position[2] - n[2],
                ];
                let r2 = dot3(to_light, to_light);
                let r = r2.sqrt();
                let l = [to_light[0] / r, to_light[1] / r, to_light[2] / r];
                let cos_i = dot3(l, n);
                Some(ShadingPoint {
                    wi: frame.to_local(l),
                    wo: frame.to_local([0.0, 0.0, 1.0]),
                    irradiance: if cos_i > 0.0 { cos_i / r2 } else { 0.0 },
                    frame,
                })
            })
            .collect();
        SceneGeometry {
            resolution: res,
            intensity: light.intensity,
            points,
        }
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn points(&self) -> &[Option<ShadingPoint>] {
        &self.points
    }

    /// Point-light radiance reaching the camera at one pixel.
    pub fn radiance(&self, brdf: &dyn Brdf, index: usize) -> Rgb {
        match &self.points[index] {
            Some(sp) if sp.irradiance > 0.0 => brdf.eval(sp.wi, sp.wo) * self.intensity * sp.irradiance,
            _ => Rgb::ZERO,
        }
    }

    pub fn shade(&self, brdf: &dyn Brdf) -> ImageBuffer {
        self.shade_chunked(brdf, DEFAULT_ROWS_PER_TASK)
    }

    /// Parallel shading with `rows_per_task` raster rows per work item.
    pub fn shade_chunked(&self, brdf: &dyn Brdf, rows_per_task: usize) -> ImageBuffer {
        self.fill(rows_per_task.max(1), |i| self.radiance(brdf, i))
    }

    /// Single-threaded shading, for callers that parallelize at a coarser
    /// level.
    pub fn shade_serial(&self, brdf: &dyn Brdf) -> ImageBuffer {
        let res = self.resolution;
        let pixels = (0..res * res).map(|i| to_f32(self.radiance(brdf, i))).collect();
        ImageBuffer::from_pixels(res, res, pixels)
    }

    /// Radiance under a vertical-gradient dome, integrated with 8x8
    /// stratified cosine-weighted directions per pixel.
    pub fn shade_environment(&self, brdf: &dyn Brdf, env: &EnvironmentLight, rows_per_task: usize) -> ImageBuffer {
        self.fill(rows_per_task.max(1), |i| match &self.points[i] {
            Some(sp) => {
                let mut sum = Rgb::ZERO;
                for a in 0..ENV_STRATA {
                    for b in 0..ENV_STRATA {
                        let u1 = (a as f64 + 0.5) / ENV_STRATA as f64;
                        let u2 = (b as f64 + 0.5) / ENV_STRATA as f64;
                        let r = u1.sqrt();
                        let (s, c) = (TAU * u2).sin_cos();
                        let wi = Direction::from_unit(r * c, r * s, (1.0 - u1).sqrt());
                        let radiance = env.radiance(sp.frame.to_world(wi));
                        sum += brdf.eval(wi, sp.wo) * radiance;
                    }
                }
                // cosine-weighted estimator: f L cos / (cos / pi)
                sum * (PI / (ENV_STRATA * ENV_STRATA) as f64)
            }
            None => Rgb::ZERO,
        })
    }

    fn fill(&self, rows_per_task: usize, f: impl Fn(usize) -> Rgb + Sync) -> ImageBuffer {
        let res = self.resolution;
        let mut pixels = vec![[0.0f32; 3]; res * res];
        pixels
            .par_chunks_mut(res * rows_per_task)
            .enumerate()
            .for_each(|(chunk, out)| {
                let base = chunk * res * rows_per_task;
                for (k, px) in out.iter_mut().enumerate() {
                    *px = to_f32(f(base + k));
                }
            });
        ImageBuffer::from_pixels(res, res, pixels)
    }
}

fn to_f32(c: Rgb) -> [f32; 3] {
    [c[0] as f32, c[1] as f32, c[2] as f32]
}

const ENV_STRATA: usize = 8;

/// Sky dome whose radiance blends linearly from `ground` (straight down,
/// world `-y`) to `sky` (straight up, world `+y`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvironmentLight {
    pub sky: Rgb,
    pub ground: Rgb,
}

impl Default for EnvironmentLight {
    fn default() -> Self {
        EnvironmentLight {
            sky: Rgb::new(0.9, 0.95, 1.0),
            ground: Rgb::new(0.25, 0.2, 0.15),
        }
    }
}

impl EnvironmentLight {
    pub fn radiance(&self, world_dir: [f64; 3]) -> Rgb {
        let t = (0.5 * (world_dir[1] + 1.0)).clamp(0.0, 1.0);
        self.ground.lerp(self.sky, t)
    }
}

/// Renders `brdf` on the unit sphere under the scene's point light.
pub fn render_sphere(brdf: &dyn Brdf, scene: &SceneSpec) -> ImageBuffer {
    SceneGeometry::new(scene).shade(brdf)
}

pub fn render_sphere_chunked(brdf: &dyn Brdf, scene: &SceneSpec, rows_per_task: usize) -> ImageBuffer {
    SceneGeometry::new(scene).shade_chunked(brdf, rows_per_task)
}

/// Renders `brdf` under an environment dome instead of the point light.
pub fn render_sphere_environment(brdf: &dyn Brdf, scene: &SceneSpec, env: &EnvironmentLight) -> ImageBuffer {
    SceneGeometry::new(scene).shade_environment(brdf, env, DEFAULT_ROWS_PER_TASK)
}
