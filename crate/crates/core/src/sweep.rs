//! Sample-count sweep and knee selection.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::brdf::Brdf;
use crate::render::{psnr, rmse, ImageBuffer, SceneGeometry, SceneSpec};
use crate::sampler::{measure, plan_measurements, Boundary, SamplerError, Warp, MAX_GRID};

pub const DEFAULT_EPSILON: f64 = 0.01;
pub const DEFAULT_THETA_IN: usize = 8;
pub const SWEEP_CSV_HEADER: &str = "n,samples_total,rmse,psnr,millis";
/// Relative improvements are taken as zero once the error is this small.
const RMSE_FLOOR: f64 = 1e-9;

pub fn default_schedule() -> Vec<usize> {
    (2..=32).step_by(2).collect()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error("schedule is empty")]
    EmptySchedule,
    #[error("schedule must be strictly increasing with entries in [1, {MAX_GRID}]")]
    BadSchedule,
    #[error("epsilon {0} outside (0, 1)")]
    Epsilon(f64),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub warp: Warp,
    pub n_theta_in: usize,
    pub schedule: Vec<usize>,
    pub epsilon: f64,
    pub boundary: Boundary,
}

impl SweepConfig {
    pub fn new(warp: Warp) -> Self {
        SweepConfig {
            warp,
            n_theta_in: DEFAULT_THETA_IN,
            schedule: default_schedule(),
            epsilon: DEFAULT_EPSILON,
            boundary: Boundary::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if self.schedule.is_empty() {
            return Err(SweepError::EmptySchedule);
        }
        if self.schedule.iter().any(|&n| n == 0 || n > MAX_GRID) || self.schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SweepError::BadSchedule);
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(SweepError::Epsilon(self.epsilon));
        }
        if self.n_theta_in == 0 {
            return Err(SamplerError::NoIncoming.into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub n: usize,
    pub samples_total: usize,
    pub rmse: f64,
    pub psnr: f64,
    /// Wall time for plan, measure and render; not reproducible.
    pub millis: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    pub selected_n: usize,
    pub epsilon: f64,
    /// False when the curve was still improving at the last entry and the
    /// largest grid was chosen by default.
    pub plateau_reached: bool,
}

impl SweepReport {
    pub fn schedule(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.n).collect()
    }

    pub fn point(&self, n: usize) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.n == n)
    }

    /// Curve as CSV. Timings are left empty unless requested so the file
    /// stays byte-stable across runs.
    pub fn to_csv(&self, timings: bool) -> String {
        let mut out = String::from(SWEEP_CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            let _ = write!(out, "{},{},{},{},", p.n, p.samples_total, p.rmse, p.psnr);
            if timings {
                let _ = write!(out, "{:.3}", p.millis);
            }
            out.push('\n');
        }
        out
    }
}

/// `(prev - cur) / prev`, zero once `prev` is negligible.
pub fn relative_improvement(prev: f64, cur: f64) -> f64 {
    if prev < RMSE_FLOOR {
        0.0
    } else {
        (prev - cur) / prev
    }
}

/// Index of the knee: the smallest `j` such that every later step improves
/// by less than `epsilon`. Returns `(index, plateau_reached)`.
pub fn select_knee(rmse: &[f64], epsilon: f64) -> (usize, bool) {
    let last = rmse.len().saturating_sub(1);
    let mut j = last;
    while j > 0 && relative_improvement(rmse[j - 1], rmse[j]) < epsilon {
        j -= 1;
    }
    if j == last && last > 0 {
        (last, false)
    } else {
        (j, true)
    }
}

/// Runs plan, measure, reconstruct and render for each grid side of the
/// schedule and scores against a direct render of `reference`.
pub fn run_sweep(reference: &dyn Brdf, scene: &SceneSpec, config: &SweepConfig) -> Result<SweepReport, SweepError> {
    config.validate()?;
    let geometry = SceneGeometry::new(scene);
    let truth = geometry.shade(reference);
    let points = config
        .schedule
        .par_iter()
        .map(|&n| sweep_point(reference, &geometry, &truth, config, n))
        .collect::<Result<Vec<_>, _>>()?;
    let curve: Vec<f64> = points.iter().map(|p| p.rmse).collect();
    let (idx, plateau_reached) = select_knee(&curve, config.epsilon);
    Ok(SweepReport {
        selected_n: points[idx].n,
        points,
        epsilon: config.epsilon,
        plateau_reached,
    })
}

fn sweep_point(
    reference: &dyn Brdf,
    geometry: &SceneGeometry,
    truth: &ImageBuffer,
    config: &SweepConfig,
    n: usize,
) -> Result<SweepPoint, SweepError> {
    let start = Instant::now();
    let plan = plan_measurements(config.warp, n, config.n_theta_in)?;
    let table = measure(&plan, reference).with_boundary(config.boundary);
    let image = geometry.shade(&table);
    let millis = start.elapsed().as_secs_f64() * 1e3;
    let e = rmse(&image, truth).expect("same geometry");
    Ok(SweepPoint {
        n,
        samples_total: config.n_theta_in * n * n,
        rmse: e,
        psnr: psnr(&image, truth).expect("same geometry"),
        millis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brdf::{LobeModel, WardParams};
    use crate::color::Rgb;

    #[test]
    fn knee_examples() {
        assert_eq!(select_knee(&[1.0, 1.0, 1.0], 0.01), (0, true));
        assert_eq!(select_knee(&[1.0, 0.5, 0.25, 0.249, 0.2489], 0.01), (2, true));
        assert_eq!(select_knee(&[1.0, 0.5, 0.25], 0.01), (2, false));
        assert_eq!(select_knee(&[0.3], 0.01), (0, true));
        // an inversion counts as no improvement
        assert_eq!(select_knee(&[1.0, 0.5, 0.55, 0.549], 0.01), (1, true));
        assert_eq!(select_knee(&[0.0, 0.0], 0.5), (0, true));
    }

    #[test]
    fn knee_monotone_in_epsilon() {
        let curve = [1.0, 0.6, 0.45, 0.40, 0.39, 0.385, 0.384];
        let mut prev = usize::MAX;
        for eps in [0.001, 0.01, 0.03, 0.1, 0.2, 0.5] {
            let (j, _) = select_knee(&curve, eps);
            assert!(j <= prev);
            prev = j;
        }
    }

    #[test]
    fn config_validation() {
        let warp = Warp::with_default_weights(LobeModel::Ward(WardParams::new(Rgb::splat(0.5), 0.2)));
        let mut c = SweepConfig::new(warp);
        assert_eq!(c.schedule.len(), 16);
        assert_eq!(*c.schedule.last().unwrap(), 32);
        assert!(c.validate().is_ok());
        c.epsilon = 1.0;
        assert_eq!(c.validate(), Err(SweepError::Epsilon(1.0)));
        c.epsilon = 0.01;
        c.schedule = vec![4, 4];
        assert_eq!(c.validate(), Err(SweepError::BadSchedule));
        c.schedule = vec![];
        assert_eq!(c.validate(), Err(SweepError::EmptySchedule));
        c.schedule = vec![2, 65];
        assert_eq!(c.validate(), Err(SweepError::BadSchedule));
    }

    #[test]
    fn csv_timings_optional() {
        let report = SweepReport {
            points: vec![SweepPoint {
                n: 2,
                samples_total: 32,
                rmse: 0.5,
                psnr: 6.0,
                millis: 12.25,
            }],
            selected_n: 2,
            epsilon: 0.01,
            plateau_reached: true,
        };
        assert_eq!(report.to_csv(false), "n,samples_total,rmse,psnr,millis\n2,32,0.5,6,\n");
        assert_eq!(report.to_csv(true), "n,samples_total,rmse,psnr,millis\n2,32,0.5,6,12.250\n");
    }
}
