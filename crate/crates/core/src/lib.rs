//! Adaptive BRDF measurement.
//!
//! Fit an analytic lobe to a rendered sphere, warp a uniform lattice through
//! the lobe's importance sampler to get gonioreflectometer directions,
//! measure a reference material there, reconstruct, re-render and score.
//! [`sweep`] repeats the measure/render loop over grid sizes and picks the
//! knee of the error curve.

pub mod brdf;
pub mod color;
pub mod estimator;
pub mod geom;
pub mod merl;
pub mod render;
pub mod sampler;
pub mod sweep;

pub use brdf::{Brdf, BrdfError, GgxParams, LobeModel, LobeWeights, MixturePdf, UnitSquarePoint, WardParams};
pub use color::Rgb;
pub use estimator::{estimate_albedo, fit_ggx_alpha, fit_ward, EstimatorError, FitResult};
pub use geom::{Direction, GeomError, HalfDiffCoords, Spherical};
pub use merl::{MerlBrdf, MerlError};
pub use render::{render_sphere, ImageBuffer, ImageError, PointLight, SceneError, SceneSpec};
pub use sampler::{measure, plan_measurements, Boundary, MeasurementPlan, MeasurementTable, SamplerError, Warp};
pub use sweep::{run_sweep, SweepConfig, SweepError, SweepPoint, SweepReport};
