//! Linear RGB triples used for reflectance and radiance values.

use std::ops::{Add, AddAssign, Div, Index, Mul, Sub};

/// Linear-light RGB triple.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Rgb(pub [f64; 3]);

impl Rgb {
    pub const ZERO: Rgb = Rgb([0.0; 3]);

    pub const fn new(r: f64, g: f64, b: f64) -> Self {
        Rgb([r, g, b])
    }

    pub const fn splat(v: f64) -> Self {
        Rgb([v; 3])
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Self {
        Rgb([f(self.0[0]), f(self.0[1]), f(self.0[2])])
    }

    pub fn zip(self, other: Rgb, f: impl Fn(f64, f64) -> f64) -> Self {
        Rgb([
            f(self.0[0], other.0[0]),
            f(self.0[1], other.0[1]),
            f(self.0[2], other.0[2]),
        ])
    }

    pub fn mean(self) -> f64 {
        (self.0[0] + self.0[1] + self.0[2]) / 3.0
    }

    pub fn max_channel(self) -> f64 {
        self.0[0].max(self.0[1]).max(self.0[2])
    }

    pub fn min_channel(self) -> f64 {
        self.0[0].min(self.0[1]).min(self.0[2])
    }

    pub fn is_finite(self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn clamp(self, lo: f64, hi: f64) -> Self {
        self.map(|c| c.clamp(lo, hi))
    }

    /// `self + (other - self) * t`, exact at `t == 0` and for equal endpoints.
    pub fn lerp(self, other: Rgb, t: f64) -> Self {
        self.zip(other, |a, b| a + (b - a) * t)
    }
}

impl Index<usize> for Rgb {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for Rgb {
    type Output = Rgb;

    fn add(self, rhs: Rgb) -> Rgb {
        self.zip(rhs, |a, b| a + b)
    }
}

impl AddAssign for Rgb {
    fn add_assign(&mut self, rhs: Rgb) {
        *self = *self + rhs;
    }
}

impl Sub for Rgb {
    type Output = Rgb;

    fn sub(self, rhs: Rgb) -> Rgb {
        self.zip(rhs, |a, b| a - b)
    }
}

impl Mul for Rgb {
    type Output = Rgb;

    fn mul(self, rhs: Rgb) -> Rgb {
        self.zip(rhs, |a, b| a * b)
    }
}

impl Mul<f64> for Rgb {
    type Output = Rgb;

    fn mul(self, rhs: f64) -> Rgb {
        self.map(|a| a * rhs)
    }
}

impl Div<f64> for Rgb {
    type Output = Rgb;

    fn div(self, rhs: f64) -> Rgb {
        self.map(|a| a / rhs)
    }
}

impl From<[f64; 3]> for Rgb {
    fn from(v: [f64; 3]) -> Self {
        Rgb(v)
    }
}
