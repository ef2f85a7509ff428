//! Spherical geometry on the shading hemisphere.
//!
//! The local frame has the surface normal along `+z`. Directions are unit
//! vectors; angles follow the physics convention (`theta` from the normal,
//! `phi` counter-clockwise from `+x`).

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("incoming and outgoing directions are antipodal, half vector undefined")]
    DegeneratePair,
    #[error("polar angle {0} outside [0, pi/2]")]
    ThetaOutOfRange(f64),
    #[error("cannot normalize a zero-length vector")]
    ZeroVector,
}

/// Unit 3-vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Direction {
    x: f64,
    y: f64,
    z: f64,
}

impl Direction {
    pub const NORMAL: Direction = Direction { x: 0.0, y: 0.0, z: 1.0 };

    /// Normalizes `(x, y, z)`.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, GeomError> {
        let len = (x * x + y * y + z * z).sqrt();
        if !(len > 0.0) || !len.is_finite() {
            return Err(GeomError::ZeroVector);
        }
        Ok(Direction {
            x: x / len,
            y: y / len,
            z: z / len,
        })
    }

    /// Wraps components that are already unit length.
    pub(crate) const fn from_unit(x: f64, y: f64, z: f64) -> Self {
        Direction { x, y, z }
    }

    pub fn x(self) -> f64 {
        self.x
    }

    pub fn y(self) -> f64 {
        self.y
    }

    pub fn z(self) -> f64 {
        self.z
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, other: Direction) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cos_theta(self) -> f64 {
        self.z
    }

    /// Polar angle, unrestricted (may exceed pi/2 below the horizon).
    pub fn theta(self) -> f64 {
        self.z.clamp(-1.0, 1.0).acos()
    }

    /// Azimuth in `[0, 2pi)`; zero at the poles.
    pub fn phi(self) -> f64 {
        if self.x == 0.0 && self.y == 0.0 {
            return 0.0;
        }
        wrap_angle(self.y.atan2(self.x))
    }

    pub fn is_upper(self) -> bool {
        self.z >= 0.0
    }

    /// Rotation by `angle` about the normal (`+z`).
    pub fn rotate_z(self, angle: f64) -> Direction {
        let (s, c) = angle.sin_cos();
        Direction {
            x: c * self.x - s * self.y,
            y: s * self.x + c * self.y,
            z: self.z,
        }
    }

    /// Rotation by `angle` about the binormal (`+y`).
    pub fn rotate_y(self, angle: f64) -> Direction {
        let (s, c) = angle.sin_cos();
        Direction {
            x: c * self.x + s * self.z,
            y: self.y,
            z: -s * self.x + c * self.z,
        }
    }
}

/// Polar/azimuth pair on the upper hemisphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spherical {
    theta: f64,
    phi: f64,
}

impl Spherical {
    /// `theta` must lie in `[0, pi/2]`; `phi` is wrapped into `[0, 2pi)`.
    pub fn new(theta: f64, phi: f64) -> Result<Self, GeomError> {
        if !(0.0..=FRAC_PI_2).contains(&theta) {
            return Err(GeomError::ThetaOutOfRange(theta));
        }
        Ok(Spherical {
            theta,
            phi: wrap_angle(phi),
        })
    }

    /// Like [`Spherical::new`] but clamps `theta` into range.
    pub fn clamped(theta: f64, phi: f64) -> Self {
        Spherical {
            theta: theta.clamp(0.0, FRAC_PI_2),
            phi: wrap_angle(phi),
        }
    }

    pub fn theta(self) -> f64 {
        self.theta
    }

    pub fn phi(self) -> f64 {
        self.phi
    }
}

/// Half-angle / difference-angle coordinates of an isotropic direction pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfDiffCoords {
    pub theta_h: f64,
    pub theta_d: f64,
    /// Folded into `[0, pi)`.
    pub phi_d: f64,
}

/// Wraps an angle into `[0, 2pi)`.
pub fn wrap_angle(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

pub fn spherical_to_dir(s: Spherical) -> Direction {
    let (st, ct) = s.theta.sin_cos();
    let (sp, cp) = s.phi.sin_cos();
    Direction::from_unit(st * cp, st * sp, ct)
}

/// Inverse of [`spherical_to_dir`]. Directions below the horizon are reported
/// at `theta = pi/2`.
pub fn dir_to_spherical(d: Direction) -> Spherical {
    Spherical {
        theta: d.theta().min(FRAC_PI_2),
        phi: d.phi(),
    }
}

/// Normalized `wi + wo`.
pub fn half_vector(wi: Direction, wo: Direction) -> Result<Direction, GeomError> {
    let (x, y, z) = (wi.x + wo.x, wi.y + wo.y, wi.z + wo.z);
    let len = (x * x + y * y + z * z).sqrt();
    if len < 1e-12 {
        return Err(GeomError::DegeneratePair);
    }
    Ok(Direction::from_unit(x / len, y / len, z / len))
}

/// Mirror `wi` about `wh`: `2 (wh . wi) wh - wi`.
pub fn reflect_about_half(wh: Direction, wi: Direction) -> Direction {
    let d = 2.0 * wh.dot(wi);
    Direction::from_unit(d * wh.x - wi.x, d * wh.y - wi.y, d * wh.z - wi.z)
}

/// Standard half/diff transform used by tabulated isotropic BRDFs.
pub fn dir_to_half_diff(wi: Direction, wo: Direction) -> Result<HalfDiffCoords, GeomError> {
    let h = half_vector(wi, wo)?;
    let theta_h = h.theta();
    let phi_h = h.phi();
    let diff = wi.rotate_z(-phi_h).rotate_y(-theta_h);
    let theta_d = diff.theta().min(FRAC_PI_2);
    let mut phi_d = if diff.x == 0.0 && diff.y == 0.0 {
        0.0
    } else {
        diff.y.atan2(diff.x)
    };
    // reciprocity: phi_d and phi_d + pi describe the same (swapped) pair
    if phi_d < 0.0 {
        phi_d += PI;
    }
    if phi_d >= PI {
        phi_d -= PI;
    }
    Ok(HalfDiffCoords {
        theta_h,
        theta_d,
        phi_d,
    })
}

/// Inverse of the half/diff transform for a given half-vector azimuth.
pub fn half_diff_to_dirs(coords: HalfDiffCoords, phi_h: f64) -> (Direction, Direction) {
    let diff = spherical_to_dir(Spherical::clamped(coords.theta_d, coords.phi_d));
    let wi = diff.rotate_y(coords.theta_h).rotate_z(phi_h);
    let h = spherical_to_dir(Spherical::clamped(coords.theta_h, phi_h));
    (wi, reflect_about_half(h, wi))
}

/// Stratified midpoints of the cosine-weighted polar marginal:
/// `theta_k = asin(sqrt((k + 0.5) / n))`.
pub fn cosine_weighted_thetas(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| ((k as f64 + 0.5) / n as f64).sqrt().asin())
        .collect()
}
