//! Inverse rendering of analytic BRDF parameters from one sphere image.
//!
//! The target image is matched by rendering candidate parameters under the
//! same scene and minimizing the mean absolute pixel difference with a
//! multi-start Nelder-Mead search. Starts run in parallel; the winner is the
//! lowest loss, ties broken by start index, so the result does not depend on
//! scheduling.

use rayon::prelude::*;
use thiserror::Error;

use crate::brdf::{GgxParams, WardParams, GGX_ALPHA_RANGE, WARD_ALPHA_RANGE};
use crate::color::Rgb;
use crate::render::{mean_abs_diff, ImageBuffer, ImageError, SceneGeometry, SceneSpec};

/// Stop when the best loss improves by less than this over one full
/// simplex cycle (`dim + 1` iterations).
pub const CONVERGENCE_TOL: f64 = 1e-5;
pub const MAX_ITERATIONS: usize = 500;

const START_RHO: [f64; 4] = [0.1, 0.1 + 0.8 / 3.0, 0.1 + 1.6 / 3.0, 0.9];
const START_ALPHA: [f64; 4] = [0.05, 0.3, 0.55, 0.8];
const INITIAL_STEP: f64 = 0.1;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("target is {found}x{found_h}, scene renders {expected}x{expected}")]
    TargetSize {
        expected: usize,
        found: usize,
        found_h: usize,
    },
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult<P> {
    pub params: P,
    pub final_loss: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best loss after each iteration of the winning start.
    pub loss_history: Vec<f64>,
}

/// Mean absolute difference over all pixels and channels, linear values.
pub fn image_loss_l1(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64, ImageError> {
    mean_abs_diff(a, b)
}

/// Outcome of one Nelder-Mead run.
#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<f64>,
}

/// Derivative-free simplex minimizer with the standard coefficients
/// (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
pub fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    x0: &[f64],
    step: f64,
    tol: f64,
    max_iter: usize,
) -> Minimum {
    let dim = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for k in 0..dim {
        let mut v = x0.to_vec();
        v[k] += step;
        let fv = f(&v);
        simplex.push((v, fv));
    }
    let order = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    order(&mut simplex);

    let cycle = dim + 1;
    let mut history = Vec::new();
    let mut checkpoint = simplex[0].1;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let worst = simplex[dim].clone();
        let centroid: Vec<f64> = (0..dim)
            .map(|k| simplex[..dim].iter().map(|(v, _)| v[k]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = f(&xe);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let x = along(0.5);
                let fx = f(&x);
                (x, fx)
            } else {
                let x = along(-0.5);
                let fx = f(&x);
                (x, fx)
            };
            if fc < worst.1.min(fr) {
                simplex[dim] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let v: Vec<f64> = best.iter().zip(&vertex.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    let fv = f(&v);
                    *vertex = (v, fv);
                }
            }
        }
        order(&mut simplex);
        history.push(simplex[0].1);
        if iterations % cycle == 0 {
            if checkpoint - simplex[0].1 < tol {
                converged = true;
                break;
            }
            checkpoint = simplex[0].1;
        }
    }
    let (x, value) = simplex.swap_remove(0);
    Minimum {
        x,
        value,
        iterations,
        converged,
        history,
    }
}

fn check_target(target: &ImageBuffer, scene: &SceneSpec) -> Result<(), EstimatorError> {
    let res = scene.resolution();
    if target.width() != res || target.height() != res {
        return Err(EstimatorError::TargetSize {
            expected: res,
            found: target.width(),
            found_h: target.height(),
        });
    }
    Ok(())
}

fn ward_from_vec(x: &[f64]) -> WardParams {
    WardParams::new(Rgb::new(x[0], x[1], x[2]), x[3].clamp(WARD_ALPHA_RANGE.0, WARD_ALPHA_RANGE.1))
}

/// Runs every start (in parallel), then polishes the best one with a fresh
/// simplex.
fn multi_start(objective: &(dyn Fn(&[f64]) -> f64 + Sync), starts: &[Vec<f64>]) -> Minimum {
    let runs: Vec<Minimum> = starts
        .par_iter()
        .map(|x0| nelder_mead(objective, x0, INITIAL_STEP, CONVERGENCE_TOL, MAX_ITERATIONS))
        .collect();
    // argmin by (loss, start index)
    let best = runs
        .into_iter()
        .enumerate()
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)))
        .map(|(_, m)| m)
        .expect("at least one start");
    let polish = nelder_mead(objective, &best.x, 0.25 * INITIAL_STEP, CONVERGENCE_TOL, MAX_ITERATIONS);
    if polish.value < best.value {
        let mut history = best.history;
        history.extend(polish.history.iter().map(|v| v.min(best.value)));
        Minimum {
            x: polish.x,
            value: polish.value,
            iterations: best.iterations + polish.iterations,
            converged: polish.converged,
            history,
        }
    } else {
        best
    }
}

/// Recovers Ward albedo and roughness from a rendered sphere.
pub fn fit_ward(target: &ImageBuffer, scene: &SceneSpec) -> Result<FitResult<WardParams>, EstimatorError> {
    check_target(target, scene)?;
    let geometry = SceneGeometry::new(scene);
    let objective = |x: &[f64]| -> f64 {
        let img = geometry.shade_serial(&ward_from_vec(x));
        image_loss_l1(&img, target).expect("sizes checked")
    };
    let starts: Vec<Vec<f64>> = START_RHO
        .iter()
        .flat_map(|&rho| START_ALPHA.iter().map(move |&alpha| vec![rho, rho, rho, alpha]))
        .collect();
    let best = multi_start(&objective, &starts);
    let params = ward_from_vec(&best.x);
    Ok(FitResult {
        params,
        final_loss: best.value,
        iterations: best.iterations,
        converged: best.converged,
        loss_history: best.history,
    })
}

/// Recovers GGX roughness for a known diffuse albedo.
pub fn fit_ggx_alpha(
    target: &ImageBuffer,
    scene: &SceneSpec,
    albedo: Rgb,
) -> Result<FitResult<GgxParams>, EstimatorError> {
    check_target(target, scene)?;
    let geometry = SceneGeometry::new(scene);
    let make = |x: &[f64]| GgxParams::new(albedo, x[0].clamp(GGX_ALPHA_RANGE.0, GGX_ALPHA_RANGE.1));
    let objective = |x: &[f64]| -> f64 {
        let img = geometry.shade_serial(&make(x));
        image_loss_l1(&img, target).expect("sizes checked")
    };
    let starts: Vec<Vec<f64>> = START_ALPHA.iter().map(|&a| vec![a]).collect();
    let best = multi_start(&objective, &starts);
    Ok(FitResult {
        params: make(&best.x),
        final_loss: best.value,
        iterations: best.iterations,
        converged: best.converged,
        loss_history: best.history,
    })
}

/// Diffuse albedo guess: divide each lit pixel by its irradiance to get a
/// reflectance value, then take `pi` times the per-channel mean over the
/// darkest tenth of those values.
pub fn estimate_albedo(target: &ImageBuffer, scene: &SceneSpec) -> Result<Rgb, EstimatorError> {
    check_target(target, scene)?;
    let geometry = SceneGeometry::new(scene);
    let intensity = scene.light().intensity;
    let mut samples: Vec<Rgb> = geometry
        .points()
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let p = p.as_ref()?;
            // skip grazing light where the division is ill-conditioned
            if p.wi.cos_theta() < 0.2 || p.irradiance <= 0.0 {
                return None;
            }
            let px = target.pixels()[i];
            Some(Rgb::new(
                px[0] as f64 / (intensity[0] * p.irradiance),
                px[1] as f64 / (intensity[1] * p.irradiance),
                px[2] as f64 / (intensity[2] * p.irradiance),
            ))
        })
        .collect();
    if samples.is_empty() {
        return Ok(Rgb::ZERO);
    }
    samples.sort_by(|a, b| a.mean().total_cmp(&b.mean()));
    let take = (samples.len() / 10).max(1);
    let sum = samples[..take].iter().fold(Rgb::ZERO, |acc, &v| acc + v);
    Ok((sum / take as f64 * std::f64::consts::PI).clamp(0.0, 1.0))
}
