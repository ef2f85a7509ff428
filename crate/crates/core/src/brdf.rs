//! Analytic reflectance models and their importance-sampling warps.
//!
//! Both lobes are parameterized by the half vector: a point `u` of the unit
//! square maps to a half-angle direction `(theta_h, phi_h)`, and each warp
//! has a closed-form inverse so tabulated measurements can be addressed by
//! unit-square coordinates.

use std::f64::consts::{FRAC_1_PI, FRAC_PI_2, PI, TAU};

use thiserror::Error;

use crate::color::Rgb;
use crate::geom::{half_vector, Direction, Spherical};

/// Smallest cosine used by the evaluators.
pub const COS_EPS: f64 = 1e-6;
/// Clamp margin on `u1` before logarithms and ratios.
pub const U_EPS: f64 = 1e-12;
/// Half angles are clamped to `pi/2 - THETA_EPS` before taking tangents.
pub const THETA_EPS: f64 = 1e-6;

pub const WARD_ALPHA_RANGE: (f64, f64) = (1e-3, 2.0);
pub const GGX_ALPHA_RANGE: (f64, f64) = (1e-3, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BrdfError {
    #[error("lobe weights must be non-negative and sum to one (got w_d={w_d}, w_s={w_s})")]
    InvalidWeights { w_d: f64, w_s: f64 },
    #[error("unit-square coordinate ({0}, {1}) outside [0, 1]^2")]
    OutOfUnitSquare(f64, f64),
}

/// Anything that returns a reflectance value (1/sr) for a direction pair in
/// the local shading frame.
pub trait Brdf: Sync {
    fn eval(&self, wi: Direction, wo: Direction) -> Rgb;
}

impl<F> Brdf for F
where
    F: Fn(Direction, Direction) -> Rgb + Sync,
{
    fn eval(&self, wi: Direction, wo: Direction) -> Rgb {
        self(wi, wo)
    }
}

/// Isotropic Ward model. The specular weight is `1 - rho_d` per channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WardParams {
    rho_d: Rgb,
    alpha: f64,
}

impl WardParams {
    /// Clamps albedo channels into `[0, 1]` and `alpha` into
    /// [`WARD_ALPHA_RANGE`].
    pub fn new(rho_d: Rgb, alpha: f64) -> Self {
        WardParams {
            rho_d: rho_d.clamp(0.0, 1.0),
            alpha: alpha.clamp(WARD_ALPHA_RANGE.0, WARD_ALPHA_RANGE.1),
        }
    }

    pub fn rho_d(&self) -> Rgb {
        self.rho_d
    }

    pub fn rho_s(&self) -> Rgb {
        self.rho_d.map(|c| 1.0 - c)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Microfacet model with a GGX distribution and a diffuse base.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GgxParams {
    albedo: Rgb,
    alpha: f64,
}

impl GgxParams {
    /// Clamps albedo channels into `[0, 1]` and `alpha` into
    /// [`GGX_ALPHA_RANGE`].
    pub fn new(albedo: Rgb, alpha: f64) -> Self {
        GgxParams {
            albedo: albedo.clamp(0.0, 1.0),
            alpha: alpha.clamp(GGX_ALPHA_RANGE.0, GGX_ALPHA_RANGE.1),
        }
    }

    pub fn albedo(&self) -> Rgb {
        self.albedo
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitSquarePoint {
    pub u1: f64,
    pub u2: f64,
}

impl UnitSquarePoint {
    pub fn new(u1: f64, u2: f64) -> Result<Self, BrdfError> {
        if !(0.0..=1.0).contains(&u1) || !(0.0..=1.0).contains(&u2) {
            return Err(BrdfError::OutOfUnitSquare(u1, u2));
        }
        Ok(UnitSquarePoint { u1, u2 })
    }
}

/// Mixture weights of the diffuse and specular sampling densities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LobeWeights {
    w_d: f64,
    w_s: f64,
}

impl LobeWeights {
    pub fn new(w_d: f64, w_s: f64) -> Result<Self, BrdfError> {
        if !(w_d >= 0.0 && w_s >= 0.0 && ((w_d + w_s) - 1.0).abs() <= 1e-12) {
            return Err(BrdfError::InvalidWeights { w_d, w_s });
        }
        Ok(LobeWeights { w_d, w_s })
    }

    /// Weights from the specular share alone; `w_s` is clamped into `[0, 1]`.
    pub fn from_specular(w_s: f64) -> Self {
        let w_s = w_s.clamp(0.0, 1.0);
        LobeWeights { w_d: 1.0 - w_s, w_s }
    }

    pub fn w_d(&self) -> f64 {
        self.w_d
    }

    pub fn w_s(&self) -> f64 {
        self.w_s
    }
}

fn tan2_from_cos(c: f64) -> f64 {
    let c2 = c * c;
    (1.0 - c2).max(0.0) / c2
}

pub fn ward_eval(p: &WardParams, wi: Direction, wo: Direction) -> Rgb {
    let diffuse = p.rho_d * FRAC_1_PI;
    let cos_i = wi.cos_theta().max(COS_EPS);
    let cos_o = wo.cos_theta().max(COS_EPS);
    let Ok(h) = half_vector(wi, wo) else {
        return diffuse;
    };
    let a2 = p.alpha * p.alpha;
    let lobe = (-tan2_from_cos(h.cos_theta()) / a2).exp() / (4.0 * PI * a2 * (cos_i * cos_o).sqrt());
    diffuse + p.rho_s() * lobe
}

/// GGX normal distribution at a half vector with cosine `cos_h`.
pub fn ggx_ndf(alpha: f64, cos_h: f64) -> f64 {
    let a2 = alpha * alpha;
    let c2 = cos_h * cos_h;
    let denom = (a2 - 1.0) * c2 + 1.0;
    a2 / (PI * denom * denom)
}

fn ggx_lambda(alpha: f64, cos_theta: f64) -> f64 {
    let t2 = tan2_from_cos(cos_theta);
    0.5 * (-1.0 + (1.0 + alpha * alpha * t2).sqrt())
}

/// Height-correlated Smith masking-shadowing.
pub fn ggx_smith_g2(alpha: f64, cos_i: f64, cos_o: f64) -> f64 {
    1.0 / (1.0 + ggx_lambda(alpha, cos_i) + ggx_lambda(alpha, cos_o))
}

/// Diffuse base plus `D G / (4 cos_i cos_o)`; Fresnel is fixed at one.
pub fn ggx_eval(p: &GgxParams, wi: Direction, wo: Direction) -> Rgb {
    let diffuse = p.albedo * FRAC_1_PI;
    let cos_i = wi.cos_theta().max(COS_EPS);
    let cos_o = wo.cos_theta().max(COS_EPS);
    let Ok(h) = half_vector(wi, wo) else {
        return diffuse;
    };
    let d = ggx_ndf(p.alpha, h.cos_theta().max(0.0));
    let g = ggx_smith_g2(p.alpha, cos_i, cos_o);
    diffuse + Rgb::splat(d * g / (4.0 * cos_i * cos_o))
}

impl Brdf for WardParams {
    fn eval(&self, wi: Direction, wo: Direction) -> Rgb {
        ward_eval(self, wi, wo)
    }
}

impl Brdf for GgxParams {
    fn eval(&self, wi: Direction, wo: Direction) -> Rgb {
        ggx_eval(self, wi, wo)
    }
}

fn azimuth_from_u2(u2: f64) -> f64 {
    let phi = TAU * u2;
    if phi >= TAU {
        0.0
    } else {
        phi
    }
}

/// Half-angle sample of the Ward lobe:
/// `theta_h = atan(alpha sqrt(-ln u1))`, `phi_h = 2 pi u2`.
pub fn ward_sample(p: &WardParams, u: UnitSquarePoint) -> Spherical {
    let u1 = u.u1.clamp(U_EPS, 1.0);
    let theta = (p.alpha * (-u1.ln()).sqrt()).atan();
    Spherical::clamped(theta, azimuth_from_u2(u.u2))
}

/// Inverse of [`ward_sample`]: `u1 = exp(-tan^2 theta_h / alpha^2)`.
pub fn ward_inverse(p: &WardParams, h: Spherical) -> UnitSquarePoint {
    let t = h.theta().min(FRAC_PI_2 - THETA_EPS).tan();
    UnitSquarePoint {
        u1: (-(t * t) / (p.alpha * p.alpha)).exp(),
        u2: h.phi() / TAU,
    }
}

/// Half-angle sample of the GGX distribution:
/// `theta_h = atan(alpha sqrt(u1 / (1 - u1)))`, `phi_h = 2 pi u2`.
pub fn ggx_sample(p: &GgxParams, u: UnitSquarePoint) -> Spherical {
    let u1 = u.u1.clamp(0.0, 1.0 - U_EPS);
    let theta = (p.alpha * (u1 / (1.0 - u1)).sqrt()).atan();
    Spherical::clamped(theta, azimuth_from_u2(u.u2))
}

/// Inverse of [`ggx_sample`]: `u1 = tan^2 theta_h / (alpha^2 + tan^2 theta_h)`.
pub fn ggx_inverse(p: &GgxParams, h: Spherical) -> UnitSquarePoint {
    let t = h.theta().min(FRAC_PI_2 - THETA_EPS).tan();
    let t2 = t * t;
    UnitSquarePoint {
        u1: t2 / (p.alpha * p.alpha + t2),
        u2: h.phi() / TAU,
    }
}

/// The analytic lobe that drives a warp.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LobeModel {
    Ward(WardParams),
    Ggx(GgxParams),
}

impl LobeModel {
    pub fn name(&self) -> &'static str {
        match self {
            LobeModel::Ward(_) => "ward",
            LobeModel::Ggx(_) => "ggx",
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            LobeModel::Ward(p) => p.alpha(),
            LobeModel::Ggx(p) => p.alpha(),
        }
    }

    /// Diffuse albedo of the model.
    pub fn albedo(&self) -> Rgb {
        match self {
            LobeModel::Ward(p) => p.rho_d(),
            LobeModel::Ggx(p) => p.albedo(),
        }
    }

    pub fn sample(&self, u: UnitSquarePoint) -> Spherical {
        match self {
            LobeModel::Ward(p) => ward_sample(p, u),
            LobeModel::Ggx(p) => ggx_sample(p, u),
        }
    }

    pub fn inverse(&self, h: Spherical) -> UnitSquarePoint {
        match self {
            LobeModel::Ward(p) => ward_inverse(p, h),
            LobeModel::Ggx(p) => ggx_inverse(p, h),
        }
    }

    /// Probability that the sampled half angle is at most `theta`.
    pub fn half_angle_cdf(&self, theta: f64) -> f64 {
        if theta <= 0.0 {
            return 0.0;
        }
        if theta >= FRAC_PI_2 {
            return 1.0;
        }
        let t2 = theta.tan().powi(2);
        match self {
            LobeModel::Ward(p) => 1.0 - (-t2 / (p.alpha * p.alpha)).exp(),
            LobeModel::Ggx(p) => t2 / (p.alpha * p.alpha + t2),
        }
    }

    /// Density of the sampled half vector per unit solid angle.
    pub fn half_density(&self, h: Direction) -> f64 {
        let c = h.cos_theta();
        if c <= 0.0 {
            return 0.0;
        }
        match self {
            LobeModel::Ward(p) => {
                let a2 = p.alpha * p.alpha;
                (-tan2_from_cos(c) / a2).exp() / (PI * a2 * c * c * c)
            }
            LobeModel::Ggx(p) => ggx_ndf(p.alpha, c) * c,
        }
    }

    /// Fraction of half-vector samples whose reflection of `wi` stays above
    /// the horizon.
    ///
    /// For `wi` at polar angle `theta_i` (azimuth rotated to zero), the
    /// reflection about a half vector at azimuth `phi` is above the horizon
    /// iff `theta_h <= (atan2(cos phi sin theta_i, cos theta_i) + pi/2) / 2`,
    /// so the mass is a one-dimensional integral of the half-angle CDF over
    /// `phi`, evaluated by the periodic trapezoid rule.
    pub fn horizon_mass(&self, wi: Direction) -> f64 {
        const STEPS: usize = 2048;
        let cos_i = wi.cos_theta().max(COS_EPS);
        let sin_i = (1.0 - cos_i * cos_i).max(0.0).sqrt();
        let sum: f64 = (0..STEPS)
            .map(|k| {
                let phi = TAU * k as f64 / STEPS as f64;
                let delta = (phi.cos() * sin_i).atan2(cos_i);
                self.half_angle_cdf(0.5 * (delta + FRAC_PI_2))
            })
            .sum();
        sum / STEPS as f64
    }

    /// Default mixture weights: the mean specular albedo for Ward; one minus
    /// the mean albedo for GGX, floored at 0.5 for rough lobes.
    pub fn default_weights(&self) -> LobeWeights {
        match self {
            LobeModel::Ward(p) => LobeWeights::from_specular(p.rho_s().mean()),
            LobeModel::Ggx(p) => {
                let mut w_s = 1.0 - p.albedo().mean();
                if p.alpha() >= 0.7 {
                    w_s = w_s.max(0.5);
                }
                LobeWeights::from_specular(w_s)
            }
        }
    }
}

impl Brdf for LobeModel {
    fn eval(&self, wi: Direction, wo: Direction) -> Rgb {
        match self {
            LobeModel::Ward(p) => ward_eval(p, wi, wo),
            LobeModel::Ggx(p) => ggx_eval(p, wi, wo),
        }
    }
}

/// Outgoing-direction density of the diffuse/specular mixture for a fixed
/// incoming direction.
///
/// The specular part is the half-vector density mapped to outgoing solid
/// angle with the `1 / (4 (wh . wo))` Jacobian, restricted to the upper
/// hemisphere and renormalized by [`LobeModel::horizon_mass`], which is the
/// distribution of the directions a measurement plan keeps.
#[derive(Clone, Copy, Debug)]
pub struct MixturePdf {
    model: LobeModel,
    weights: LobeWeights,
    wi: Direction,
    specular_mass: f64,
}

impl MixturePdf {
    pub fn new(model: LobeModel, weights: LobeWeights, wi: Direction) -> Self {
        let specular_mass = if weights.w_s() > 0.0 {
            model.horizon_mass(wi)
        } else {
            1.0
        };
        MixturePdf {
            model,
            weights,
            wi,
            specular_mass,
        }
    }

    pub fn specular_mass(&self) -> f64 {
        self.specular_mass
    }

    pub fn density(&self, wo: Direction) -> f64 {
        let cos_o = wo.cos_theta();
        if cos_o <= 0.0 {
            return 0.0;
        }
        let diffuse = cos_o * FRAC_1_PI;
        let specular = match half_vector(self.wi, wo) {
            Ok(h) if self.weights.w_s() > 0.0 && self.specular_mass > 0.0 => {
                let h_dot_o = h.dot(wo);
                if h_dot_o > 0.0 {
                    self.model.half_density(h) / (4.0 * h_dot_o) / self.specular_mass
                } else {
                    0.0
                }
            }
            _ => 0.0,
        };
        self.weights.w_d() * diffuse + self.weights.w_s() * specular
    }
}

/// One-shot mixture density; see [`MixturePdf`].
pub fn pdf(model: &LobeModel, weights: LobeWeights, wi: Direction, wo: Direction) -> f64 {
    MixturePdf::new(*model, weights, wi).density(wo)
}
