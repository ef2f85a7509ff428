//! Reader, writer and lookup for the MERL isotropic BRDF binary format.
//!
//! Layout: three little-endian `i32` dimensions `(90, 90, 180)` followed by
//! `90 * 90 * 180 * 3` little-endian `f64` samples, all red values first,
//! then green, then blue. Samples are stored unscaled; the per-channel scale
//! factors are applied at lookup time.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::brdf::Brdf;
use crate::color::Rgb;
use crate::geom::{dir_to_half_diff, half_diff_to_dirs, Direction, HalfDiffCoords};

pub const N_THETA_H: usize = 90;
pub const N_THETA_D: usize = 90;
pub const N_PHI_D: usize = 180;
pub const CELLS: usize = N_THETA_H * N_THETA_D * N_PHI_D;
pub const SAMPLE_COUNT: usize = CELLS * 3;
pub const HEADER_BYTES: usize = 12;
pub const FILE_BYTES: usize = HEADER_BYTES + SAMPLE_COUNT * 8;

pub const CHANNEL_SCALE: [f64; 3] = [1.0 / 1500.0, 1.15 / 1500.0, 1.66 / 1500.0];

#[derive(Debug, Error)]
pub enum MerlError {
    #[error("MERL file must be {expected} bytes, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("MERL header dimensions {0:?} differ from (90, 90, 180)")]
    HeaderMismatch([i32; 3]),
    #[error("sample buffer must hold {expected} values, got {actual}")]
    SampleCount { expected: usize, actual: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense tabulated isotropic BRDF in half/diff storage order.
#[derive(Clone, PartialEq)]
pub struct MerlBrdf {
    samples: Vec<f64>,
}

impl std::fmt::Debug for MerlBrdf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MerlBrdf")
            .field("dims", &(N_THETA_H, N_THETA_D, N_PHI_D))
            .finish_non_exhaustive()
    }
}

/// Flat cell index, shared by all three channel planes.
pub fn cell_index(i_theta_h: usize, i_theta_d: usize, i_phi_d: usize) -> usize {
    i_phi_d + N_PHI_D * (i_theta_d + N_THETA_D * i_theta_h)
}

pub fn theta_h_index(theta_h: f64) -> usize {
    if theta_h <= 0.0 {
        return 0;
    }
    let idx = ((theta_h / FRAC_PI_2).sqrt() * N_THETA_H as f64).floor();
    (idx as usize).min(N_THETA_H - 1)
}

pub fn theta_d_index(theta_d: f64) -> usize {
    let idx = (theta_d / FRAC_PI_2 * N_THETA_D as f64).floor().max(0.0);
    (idx as usize).min(N_THETA_D - 1)
}

pub fn phi_d_index(phi_d: f64) -> usize {
    let idx = (phi_d / PI * N_PHI_D as f64).floor().max(0.0);
    (idx as usize).min(N_PHI_D - 1)
}

/// Coordinates at the center of a table cell (under the index mapping above).
pub fn cell_center(i_theta_h: usize, i_theta_d: usize, i_phi_d: usize) -> HalfDiffCoords {
    let t = (i_theta_h as f64 + 0.5) / N_THETA_H as f64;
    HalfDiffCoords {
        theta_h: t * t * FRAC_PI_2,
        theta_d: (i_theta_d as f64 + 0.5) / N_THETA_D as f64 * FRAC_PI_2,
        phi_d: (i_phi_d as f64 + 0.5) / N_PHI_D as f64 * PI,
    }
}

impl MerlBrdf {
    /// Wraps raw (unscaled) samples in storage order.
    pub fn from_samples(samples: Vec<f64>) -> Result<Self, MerlError> {
        if samples.len() != SAMPLE_COUNT {
            return Err(MerlError::SampleCount {
                expected: SAMPLE_COUNT,
                actual: samples.len(),
            });
        }
        Ok(MerlBrdf { samples })
    }

    /// Table where every raw sample equals `value`.
    pub fn constant(value: f64) -> Self {
        MerlBrdf {
            samples: vec![value; SAMPLE_COUNT],
        }
    }

    /// Tabulates `brdf` at every cell center (half vector azimuth zero),
    /// dividing out the channel scales so lookups return the model values.
    pub fn tabulate(brdf: &dyn Brdf) -> Self {
        use rayon::prelude::*;
        let mut samples = vec![0.0; SAMPLE_COUNT];
        let values: Vec<Rgb> = (0..CELLS)
            .into_par_iter()
            .map(|cell| {
                let i_phi_d = cell % N_PHI_D;
                let i_theta_d = (cell / N_PHI_D) % N_THETA_D;
                let i_theta_h = cell / (N_PHI_D * N_THETA_D);
                let (wi, wo) = half_diff_to_dirs(cell_center(i_theta_h, i_theta_d, i_phi_d), 0.0);
                if wi.z() <= 0.0 || wo.z() <= 0.0 {
                    // outside the physical domain: invalid marker
                    Rgb::splat(-1.0)
                } else {
                    brdf.eval(wi, wo)
                }
            })
            .collect();
        for (cell, v) in values.into_iter().enumerate() {
            for c in 0..3 {
                samples[c * CELLS + cell] = if v[c] < 0.0 { v[c] } else { v[c] / CHANNEL_SCALE[c] };
            }
        }
        MerlBrdf { samples }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (N_THETA_H, N_THETA_D, N_PHI_D)
    }

    /// Scaled, non-negative value of one cell.
    pub fn cell(&self, index: usize) -> Rgb {
        Rgb([
            (self.samples[index] * CHANNEL_SCALE[0]).max(0.0),
            (self.samples[CELLS + index] * CHANNEL_SCALE[1]).max(0.0),
            (self.samples[2 * CELLS + index] * CHANNEL_SCALE[2]).max(0.0),
        ])
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, MerlError> {
        parse_merl(&fs::read(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), MerlError> {
        fs::write(path, write_merl(self))?;
        Ok(())
    }
}

pub fn parse_merl(bytes: &[u8]) -> Result<MerlBrdf, MerlError> {
    if bytes.len() != FILE_BYTES {
        return Err(MerlError::SizeMismatch {
            expected: FILE_BYTES,
            actual: bytes.len(),
        });
    }
    let mut dims = [0i32; 3];
    for (d, chunk) in dims.iter_mut().zip(bytes[..HEADER_BYTES].chunks_exact(4)) {
        *d = i32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
    }
    if dims != [N_THETA_H as i32, N_THETA_D as i32, N_PHI_D as i32] {
        return Err(MerlError::HeaderMismatch(dims));
    }
    let samples = bytes[HEADER_BYTES..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(MerlBrdf { samples })
}

pub fn write_merl(b: &MerlBrdf) -> Vec<u8> {
    let mut out = Vec::with_capacity(FILE_BYTES);
    for d in [N_THETA_H, N_THETA_D, N_PHI_D] {
        out.extend_from_slice(&(d as i32).to_le_bytes());
    }
    for v in &b.samples {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Nearest-cell lookup with channel scaling; negative cells read as zero.
pub fn merl_lookup(b: &MerlBrdf, wi: Direction, wo: Direction) -> Rgb {
    let Ok(hd) = dir_to_half_diff(wi, wo) else {
        return Rgb::ZERO;
    };
    let idx = cell_index(
        theta_h_index(hd.theta_h),
        theta_d_index(hd.theta_d),
        phi_d_index(hd.phi_d),
    );
    b.cell(idx)
}

impl Brdf for MerlBrdf {
    fn eval(&self, wi: Direction, wo: Direction) -> Rgb {
        merl_lookup(self, wi, wo)
    }
}
