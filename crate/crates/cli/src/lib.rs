//! `adbrdf` subcommands as library functions.
//!
//! Every command validates and loads all of its inputs before it creates any
//! output, so a failed run leaves nothing behind.
//!
//! # File schemas
//!
//! - Plan export: header `# in_theta in_phi out_theta out_phi u1 u2 valid`,
//!   then one space-separated line per entry. Angles are radians, all reals
//!   use 9 significant digits (`{:.8e}`), `valid` is `0` or `1`. Entries are
//!   ordered by incoming direction, then lattice row `i` (along `u1`), then
//!   column `j`.
//! - Measurement table: CSV with header
//!   `in_theta,in_phi,out_theta,out_phi,u1,u2,valid,r,g,b`, same order as the
//!   plan; invalid entries leave `r,g,b` empty.
//! - Sweep curve: CSV with header `n,samples_total,rmse,psnr,millis`; `millis`
//!   is empty unless `--timings` is given.
//! - Reports: one `key=value` per line, keys in a fixed order per command.
//!   Colors are `r,g,b`; floats print in shortest round-trip form.
//! - Images: linear PFM and 8-bit PNG encoded with gamma 2.2.
//!
//! Exit codes: 0 success, 2 bad arguments, 3 unreadable or unwritable file,
//! 4 malformed input or invalid parameters.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use adaptive_brdf::estimator::{estimate_albedo, fit_ggx_alpha, fit_ward, EstimatorError};
use adaptive_brdf::render::{psnr, read_pfm, rmse, write_pfm, write_png, ImageBuffer, ImageError, SceneGeometry};
use adaptive_brdf::sampler::{measure, plan_measurements, Boundary, SamplerError, Warp};
use adaptive_brdf::sweep::{run_sweep, SweepConfig, SweepError, DEFAULT_EPSILON};
use adaptive_brdf::{
    Brdf, Direction, GgxParams, LobeModel, LobeWeights, MerlBrdf, MerlError, PointLight, Rgb, SceneError,
    SceneSpec, WardParams,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_INVALID: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => EXIT_IO,
            CliError::Invalid(_) => EXIT_INVALID,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn image(path: &Path, e: ImageError) -> Self {
        match e {
            ImageError::Io(source) => CliError::io(path, source),
            other => CliError::Invalid(format!("{}: {other}", path.display())),
        }
    }

    fn merl(path: &Path, e: MerlError) -> Self {
        match e {
            MerlError::Io(source) => CliError::io(path, source),
            other => CliError::Invalid(format!("{}: {other}", path.display())),
        }
    }
}

macro_rules! invalid_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Invalid(e.to_string())
            }
        }
    )*};
}
invalid_from!(SceneError, SamplerError, SweepError, EstimatorError);

// ---------------------------------------------------------------- values

fn parse_floats<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated numbers, got {s:?}"));
    }
    let mut out = [0.0f64; N];
    for (slot, p) in out.iter_mut().zip(parts) {
        *slot = p.parse().map_err(|_| format!("bad number {p:?}"))?;
        if !slot.is_finite() {
            return Err(format!("non-finite number {p:?}"));
        }
    }
    Ok(out)
}

/// `v` or `r,g,b`.
pub fn parse_rgb(s: &str) -> Result<Rgb, String> {
    if s.contains(',') {
        parse_floats::<3>(s).map(Rgb)
    } else {
        parse_floats::<1>(s).map(|[v]| Rgb::splat(v))
    }
}

pub fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    parse_floats::<3>(s)
}

pub fn format_rgb(c: Rgb) -> String {
    format!("{},{},{}", c[0], c[1], c[2])
}

fn parse_unit(s: &str, what: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("bad {what} {s:?}"))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(format!("{what} {v} outside [0, 1]"));
    }
    Ok(v)
}

fn parse_unit_rgb(s: &str, what: &str) -> Result<Rgb, String> {
    let c = parse_rgb(s)?;
    if c.0.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(format!("{what} channels must lie in [0, 1]"));
    }
    Ok(c)
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("bad alpha {s:?}"))?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(format!("alpha {v} must be positive"));
    }
    Ok(v)
}

/// Material description:
/// `ward:RHO:ALPHA`, `ggx:ALBEDO:ALPHA`, `lambert:RHO` or `merl:PATH`, where
/// colours are `v` or `r,g,b`.
#[derive(Clone, Debug, PartialEq)]
pub enum MaterialSpec {
    Ward(WardParams),
    Ggx(GgxParams),
    Lambert(Rgb),
    Merl(PathBuf),
}

impl FromStr for MaterialSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s.split_once(':').ok_or_else(|| format!("material {s:?} lacks a kind prefix"))?;
        match kind {
            "merl" if !rest.is_empty() => Ok(MaterialSpec::Merl(PathBuf::from(rest))),
            "lambert" => Ok(MaterialSpec::Lambert(parse_unit_rgb(rest, "rho")?)),
            "ward" | "ggx" => {
                let (colour, alpha) = rest
                    .rsplit_once(':')
                    .ok_or_else(|| format!("{kind} needs COLOUR:ALPHA, got {rest:?}"))?;
                let colour = parse_unit_rgb(colour, "colour")?;
                let alpha = parse_alpha(alpha)?;
                Ok(if kind == "ward" {
                    MaterialSpec::Ward(WardParams::new(colour, alpha))
                } else {
                    MaterialSpec::Ggx(GgxParams::new(colour, alpha))
                })
            }
            _ => Err(format!("unknown material {s:?}")),
        }
    }
}

impl fmt::Display for MaterialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaterialSpec::Ward(p) => write!(f, "ward:{}:{}", format_rgb(p.rho_d()), p.alpha()),
            MaterialSpec::Ggx(p) => write!(f, "ggx:{}:{}", format_rgb(p.albedo()), p.alpha()),
            MaterialSpec::Lambert(c) => write!(f, "lambert:{}", format_rgb(*c)),
            MaterialSpec::Merl(p) => write!(f, "merl:{}", p.display()),
        }
    }
}

impl MaterialSpec {
    pub fn load(&self) -> Result<Material, CliError> {
        Ok(match self {
            MaterialSpec::Ward(p) => Material::Analytic(LobeModel::Ward(*p)),
            MaterialSpec::Ggx(p) => Material::Analytic(LobeModel::Ggx(*p)),
            MaterialSpec::Lambert(c) => Material::Lambert(*c),
            MaterialSpec::Merl(path) => Material::Merl(Box::new(MerlBrdf::read(path).map_err(|e| CliError::merl(path, e))?)),
        })
    }

    /// The analytic lobe this spec names, if any.
    pub fn lobe(&self) -> Option<LobeModel> {
        match self {
            MaterialSpec::Ward(p) => Some(LobeModel::Ward(*p)),
            MaterialSpec::Ggx(p) => Some(LobeModel::Ggx(*p)),
            _ => None,
        }
    }
}

/// A lobe used to drive the warp: a `ward:` or `ggx:` material spec.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LobeSpec(pub LobeModel);

impl FromStr for LobeSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<MaterialSpec>()?
            .lobe()
            .map(LobeSpec)
            .ok_or_else(|| format!("lobe must be ward:... or ggx:..., got {s:?}"))
    }
}

pub enum Material {
    Analytic(LobeModel),
    Lambert(Rgb),
    Merl(Box<MerlBrdf>),
}

impl Brdf for Material {
    fn eval(&self, wi: Direction, wo: Direction) -> Rgb {
        match self {
            Material::Analytic(m) => m.eval(wi, wo),
            Material::Lambert(c) => {
                if wi.z() <= 0.0 || wo.z() <= 0.0 {
                    Rgb::ZERO
                } else {
                    *c * std::f64::consts::FRAC_1_PI
                }
            }
            Material::Merl(m) => m.eval(wi, wo),
        }
    }
}

// ---------------------------------------------------------------- report

/// Ordered `key=value` lines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn push(&mut self, key: &str, value: impl fmt::Display) -> &mut Self {
        debug_assert!(!key.contains('=') && !key.contains('\n'));
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn parse(text: &str) -> Result<Report, CliError> {
        let mut r = Report::new();
        for (n, line) in text.lines().enumerate() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Invalid(format!("report line {}: missing '='", n + 1)))?;
            r.push(k, v);
        }
        Ok(r)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------- config

#[derive(Parser, Clone, Debug)]
#[command(name = "adbrdf", version, about = "Adaptive BRDF measurement planning and evaluation")]
pub struct RunConfig {
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Clone, Debug)]
pub enum Command {
    /// Estimate lobe parameters from a rendered sphere image (PFM).
    Fit(FitArgs),
    /// Write a measurement plan for a lobe.
    Plan(PlanArgs),
    /// Virtually measure a material along a plan.
    Measure(MeasureArgs),
    /// Render a material on the sphere.
    Render(RenderArgs),
    /// Score one PFM image against another.
    Compare(CompareArgs),
    /// Sweep grid sizes and select the knee.
    Sweep(SweepArgs),
    /// Fit, plan, measure, reconstruct, render and score.
    Pipeline(PipelineArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Ward,
    Ggx,
}

/// Reconstruction between the outermost lattice rows and the unit-square
/// edge.
#[derive(ValueEnum, Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BoundaryKind {
    #[default]
    Clamp,
    Extend,
}

impl BoundaryKind {
    fn mode(self) -> Boundary {
        match self {
            BoundaryKind::Clamp => Boundary::Clamp,
            BoundaryKind::Extend => Boundary::Extend,
        }
    }

    fn name(self) -> &'static str {
        match self {
            BoundaryKind::Clamp => "clamp",
            BoundaryKind::Extend => "extend",
        }
    }
}

fn parse_resolution(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|_| format!("bad resolution {s:?}"))?;
    if !(16..=1024).contains(&v) {
        return Err(format!("resolution {v} outside [16, 1024]"));
    }
    Ok(v)
}

fn parse_grid(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|_| format!("bad grid side {s:?}"))?;
    if !(2..=64).contains(&v) {
        return Err(format!("grid side {v} outside [2, 64]"));
    }
    Ok(v)
}

fn parse_theta_in(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|_| format!("bad incoming count {s:?}"))?;
    if !(1..=32).contains(&v) {
        return Err(format!("incoming count {v} outside [1, 32]"));
    }
    Ok(v)
}

/// Comma-separated grid sides.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule(pub Vec<usize>);

fn parse_schedule(s: &str) -> Result<Schedule, String> {
    s.split(',').map(parse_grid).collect::<Result<_, _>>().map(Schedule)
}

fn parse_epsilon(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("bad epsilon {s:?}"))?;
    if !(v > 0.0 && v < 1.0) {
        return Err(format!("epsilon {v} outside (0, 1)"));
    }
    Ok(v)
}

fn parse_ws(s: &str) -> Result<f64, String> {
    parse_unit(s, "specular weight")
}

#[derive(Args, Clone, Debug)]
pub struct SceneArgs {
    /// Image side in pixels, 16..=1024.
    #[arg(long, default_value = "256", value_parser = parse_resolution)]
    pub resolution: usize,
    /// Point light position `x,y,z`.
    #[arg(long, default_value = "2,2,4", value_parser = parse_vec3)]
    pub light: [f64; 3],
    /// Light intensity, `v` or `r,g,b`.
    #[arg(long, default_value = "20", value_parser = parse_rgb)]
    pub intensity: Rgb,
}

impl Default for SceneArgs {
    fn default() -> Self {
        let light = PointLight::default();
        SceneArgs {
            resolution: SceneSpec::default().resolution(),
            light: light.position,
            intensity: light.intensity,
        }
    }
}

impl SceneArgs {
    pub fn scene(&self) -> Result<SceneSpec, CliError> {
        Ok(SceneSpec::new(
            self.resolution,
            PointLight {
                position: self.light,
                intensity: self.intensity,
            },
        )?)
    }
}

#[derive(Args, Clone, Debug)]
pub struct WarpArgs {
    /// Lobe driving the warp, `ward:RHO:ALPHA` or `ggx:ALBEDO:ALPHA`.
    #[arg(long, value_parser = LobeSpec::from_str)]
    pub lobe: LobeSpec,
    /// Specular mixture weight (default from the lobe).
    #[arg(long, value_parser = parse_ws)]
    pub ws: Option<f64>,
    /// Outgoing grid side N.
    #[arg(long, default_value = "16", value_parser = parse_grid)]
    pub grid: usize,
    /// Number of incoming polar angles.
    #[arg(long, default_value = "8", value_parser = parse_theta_in)]
    pub theta_in: usize,
}

impl WarpArgs {
    pub fn warp(&self) -> Warp {
        warp_for(self.lobe.0, self.ws)
    }
}

fn warp_for(model: LobeModel, ws: Option<f64>) -> Warp {
    match ws {
        Some(w) => Warp::new(model, LobeWeights::from_specular(w)),
        None => Warp::with_default_weights(model),
    }
}

#[derive(Args, Clone, Debug)]
pub struct FitArgs {
    /// Target sphere image.
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long, value_enum, default_value = "ward")]
    pub model: ModelKind,
    /// Fixed GGX albedo (default: darkest-decile estimate).
    #[arg(long, value_parser = parse_rgb)]
    pub albedo: Option<Rgb>,
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Report path (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug)]
pub struct PlanArgs {
    #[command(flatten)]
    pub warp: WarpArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug)]
pub struct MeasureArgs {
    #[command(flatten)]
    pub warp: WarpArgs,
    /// Reference material.
    #[arg(long, value_parser = MaterialSpec::from_str)]
    pub material: MaterialSpec,
    /// Measurement table CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Clone, Debug)]
pub struct RenderArgs {
    #[arg(long, value_parser = MaterialSpec::from_str)]
    pub material: MaterialSpec,
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Output PFM.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional gamma-encoded PNG preview.
    #[arg(long)]
    pub png: Option<PathBuf>,
}

#[derive(Args, Clone, Debug)]
pub struct CompareArgs {
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub candidate: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug)]
pub struct SweepArgs {
    #[arg(long, value_parser = MaterialSpec::from_str)]
    pub material: MaterialSpec,
    /// Warp lobe (default: fitted from a render of the material).
    #[arg(long, value_parser = LobeSpec::from_str)]
    pub lobe: Option<LobeSpec>,
    #[arg(long, value_enum, default_value = "ward")]
    pub model: ModelKind,
    #[arg(long, value_parser = parse_ws)]
    pub ws: Option<f64>,
    #[arg(long, default_value = "8", value_parser = parse_theta_in)]
    pub theta_in: usize,
    /// Comma-separated grid sides (default 2,4,...,32).
    #[arg(long, value_parser = parse_schedule)]
    pub schedule: Option<Schedule>,
    #[arg(long, default_value_t = DEFAULT_EPSILON, value_parser = parse_epsilon)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value = "clamp")]
    pub boundary: BoundaryKind,
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Record wall-clock times in the curve (makes it non-reproducible).
    #[arg(long)]
    pub timings: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Clone, Debug)]
pub struct PipelineArgs {
    #[arg(long, value_parser = MaterialSpec::from_str)]
    pub material: MaterialSpec,
    /// Warp lobe (default: fitted from a render of the material).
    #[arg(long, value_parser = LobeSpec::from_str)]
    pub lobe: Option<LobeSpec>,
    #[arg(long, value_enum, default_value = "ward")]
    pub model: ModelKind,
    #[arg(long, value_parser = parse_ws)]
    pub ws: Option<f64>,
    #[arg(long, default_value = "16", value_parser = parse_grid)]
    pub grid: usize,
    #[arg(long, default_value = "8", value_parser = parse_theta_in)]
    pub theta_in: usize,
    #[arg(long, value_enum, default_value = "clamp")]
    pub boundary: BoundaryKind,
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

// ---------------------------------------------------------------- helpers

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn load_image(path: &Path) -> Result<ImageBuffer, CliError> {
    read_pfm(path).map_err(|e| CliError::image(path, e))
}

fn save_image(img: &ImageBuffer, pfm: &Path, png: Option<&Path>) -> Result<(), CliError> {
    write_pfm(img, pfm).map_err(|e| CliError::image(pfm, e))?;
    if let Some(png) = png {
        write_png(img, png).map_err(|e| CliError::image(png, e))?;
    }
    Ok(())
}

/// Writes the report when a path was given; the binary prints it anyway.
fn emit(report: &Report, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => write_file(path, report.to_string()),
        None => Ok(()),
    }
}

/// Lobe fitted to `target`, with its loss and iteration count.
struct Fitted {
    model: LobeModel,
    loss: f64,
    iterations: usize,
    converged: bool,
}

fn fit_lobe(target: &ImageBuffer, scene: &SceneSpec, kind: ModelKind, albedo: Option<Rgb>) -> Result<Fitted, CliError> {
    Ok(match kind {
        ModelKind::Ward => {
            let r = fit_ward(target, scene)?;
            Fitted {
                model: LobeModel::Ward(r.params),
                loss: r.final_loss,
                iterations: r.iterations,
                converged: r.converged,
            }
        }
        ModelKind::Ggx => {
            let albedo = match albedo {
                Some(a) => a,
                None => estimate_albedo(target, scene)?,
            };
            let r = fit_ggx_alpha(target, scene, albedo)?;
            Fitted {
                model: LobeModel::Ggx(r.params),
                loss: r.final_loss,
                iterations: r.iterations,
                converged: r.converged,
            }
        }
    })
}

fn push_lobe(report: &mut Report, prefix: &str, model: &LobeModel) {
    report.push(&format!("{prefix}model"), model.name());
    let colour_key = match model {
        LobeModel::Ward(_) => "rho_d",
        LobeModel::Ggx(_) => "albedo",
    };
    report.push(&format!("{prefix}{colour_key}"), format_rgb(model.albedo()));
    report.push(&format!("{prefix}alpha"), model.alpha());
}

fn push_warp(report: &mut Report, warp: &Warp) {
    push_lobe(report, "lobe_", &warp.model);
    report.push("w_d", warp.weights.w_d());
    report.push("w_s", warp.weights.w_s());
}

// ---------------------------------------------------------------- commands

pub fn cmd_fit(args: &FitArgs) -> Result<Report, CliError> {
    let scene = args.scene.scene()?;
    let target = load_image(&args.target)?;
    let fitted = fit_lobe(&target, &scene, args.model, args.albedo)?;
    let mut report = Report::new();
    push_lobe(&mut report, "", &fitted.model);
    report
        .push("final_loss", fitted.loss)
        .push("iterations", fitted.iterations)
        .push("converged", fitted.converged)
        .push("resolution", scene.resolution());
    emit(&report, args.out.as_deref())?;
    Ok(report)
}

pub fn cmd_plan(args: &PlanArgs) -> Result<Report, CliError> {
    let warp = args.warp.warp();
    let plan = plan_measurements(warp, args.warp.grid, args.warp.theta_in)?;
    write_file(&args.out, plan.to_text())?;
    let mut report = Report::new();
    push_warp(&mut report, &warp);
    report
        .push("grid_n", plan.grid_n())
        .push("theta_in", plan.incoming().len())
        .push("entries", plan.entries().len())
        .push("valid_entries", plan.valid_count());
    Ok(report)
}

pub fn cmd_measure(args: &MeasureArgs) -> Result<Report, CliError> {
    let material = args.material.load()?;
    let warp = args.warp.warp();
    let plan = plan_measurements(warp, args.warp.grid, args.warp.theta_in)?;
    let table = measure(&plan, &material);
    write_file(&args.out, table.to_csv())?;
    let mut report = Report::new();
    report.push("material", &args.material);
    push_warp(&mut report, &warp);
    report
        .push("grid_n", plan.grid_n())
        .push("theta_in", plan.incoming().len())
        .push("values", table.value_count());
    Ok(report)
}

pub fn cmd_render(args: &RenderArgs) -> Result<Report, CliError> {
    let scene = args.scene.scene()?;
    let material = args.material.load()?;
    let img = SceneGeometry::new(&scene).shade(&material);
    save_image(&img, &args.out, args.png.as_deref())?;
    let mut report = Report::new();
    report.push("material", &args.material).push("resolution", scene.resolution());
    Ok(report)
}

pub fn cmd_compare(args: &CompareArgs) -> Result<Report, CliError> {
    let a = load_image(&args.reference)?;
    let b = load_image(&args.candidate)?;
    let e = rmse(&a, &b).map_err(|e| CliError::Invalid(e.to_string()))?;
    let p = psnr(&a, &b).map_err(|e| CliError::Invalid(e.to_string()))?;
    let mut report = Report::new();
    report.push("rmse", e).push("psnr", p);
    emit(&report, args.out.as_deref())?;
    Ok(report)
}

/// Ground-truth render plus the warp lobe, fitted unless given.
fn prepare_warp(
    material: &Material,
    scene: &SceneSpec,
    geometry: &SceneGeometry,
    lobe: Option<LobeSpec>,
    kind: ModelKind,
    ws: Option<f64>,
    report: &mut Report,
) -> Result<(ImageBuffer, Warp), CliError> {
    let target = geometry.shade(material);
    let model = match lobe {
        Some(LobeSpec(m)) => {
            report.push("fit", "skipped");
            m
        }
        None => {
            let fitted = fit_lobe(&target, scene, kind, None)?;
            push_lobe(report, "fit_", &fitted.model);
            report
                .push("fit_loss", fitted.loss)
                .push("fit_iterations", fitted.iterations)
                .push("fit_converged", fitted.converged);
            fitted.model
        }
    };
    let warp = warp_for(model, ws);
    push_warp(report, &warp);
    Ok((target, warp))
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<Report, CliError> {
    let scene = args.scene.scene()?;
    let material = args.material.load()?;
    let geometry = SceneGeometry::new(&scene);
    let mut report = Report::new();
    report.push("material", &args.material).push("resolution", scene.resolution());
    let (_, warp) = prepare_warp(&material, &scene, &geometry, args.lobe, args.model, args.ws, &mut report)?;
    let mut config = SweepConfig::new(warp);
    config.n_theta_in = args.theta_in;
    config.epsilon = args.epsilon;
    config.boundary = args.boundary.mode();
    if let Some(s) = &args.schedule {
        config.schedule = s.0.clone();
    }
    let sweep = run_sweep(&material, &scene, &config)?;
    let selected = sweep.point(sweep.selected_n).expect("selected point is in the curve");
    let schedule: Vec<String> = sweep.schedule().iter().map(usize::to_string).collect();
    report
        .push("theta_in", config.n_theta_in)
        .push("boundary", args.boundary.name())
        .push("schedule", schedule.join(","))
        .push("epsilon", sweep.epsilon)
        .push("selected_n", sweep.selected_n)
        .push("selected_samples_total", selected.samples_total)
        .push("selected_rmse", selected.rmse)
        .push("selected_psnr", selected.psnr)
        .push("plateau_reached", sweep.plateau_reached);

    create_dir(&args.out_dir)?;
    write_file(&args.out_dir.join("sweep.csv"), sweep.to_csv(args.timings))?;
    write_file(&args.out_dir.join("sweep_report.txt"), report.to_string())?;
    Ok(report)
}

pub fn cmd_pipeline(args: &PipelineArgs) -> Result<Report, CliError> {
    let scene = args.scene.scene()?;
    let material = args.material.load()?;
    let geometry = SceneGeometry::new(&scene);
    let mut report = Report::new();
    report.push("material", &args.material).push("resolution", scene.resolution());
    let (target, warp) = prepare_warp(&material, &scene, &geometry, args.lobe, args.model, args.ws, &mut report)?;

    let plan = plan_measurements(warp, args.grid, args.theta_in)?;
    let table = measure(&plan, &material).with_boundary(args.boundary.mode());
    let recon = geometry.shade(&table);
    let e = rmse(&recon, &target).map_err(|e| CliError::Invalid(e.to_string()))?;
    let p = psnr(&recon, &target).map_err(|e| CliError::Invalid(e.to_string()))?;
    report
        .push("grid_n", plan.grid_n())
        .push("theta_in", plan.incoming().len())
        .push("boundary", args.boundary.name())
        .push("entries", plan.entries().len())
        .push("valid_entries", plan.valid_count())
        .push("samples_total", plan.incoming().len() * plan.grid_n() * plan.grid_n())
        .push("rmse", e)
        .push("psnr", p);

    let dir = &args.out_dir;
    create_dir(dir)?;
    save_image(&target, &dir.join("target.pfm"), Some(&dir.join("target.png")))?;
    write_file(&dir.join("plan.txt"), plan.to_text())?;
    write_file(&dir.join("measurements.csv"), table.to_csv())?;
    save_image(&recon, &dir.join("reconstruction.pfm"), Some(&dir.join("reconstruction.png")))?;
    write_file(&dir.join("report.txt"), report.to_string())?;
    Ok(report)
}

/// Runs one parsed invocation on a pool of `config.threads` workers.
pub fn run(config: &RunConfig) -> Result<Report, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))?;
    pool.install(|| match &config.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Plan(a) => cmd_plan(a),
        Command::Measure(a) => cmd_measure(a),
        Command::Render(a) => cmd_render(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Pipeline(a) => cmd_pipeline(a),
    })
}
