//! Adaptive measurement plans.
//!
//! A uniform midpoint lattice on the unit square is pushed through the
//! lobe's half-vector warp and reflected about each planned incoming
//! direction, which concentrates outgoing directions where the lobe has
//! mass. A measured table is read back by inverting the warp for the query's
//! half vector and interpolating bilinearly on the lattice.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::brdf::{Brdf, LobeModel, LobeWeights, UnitSquarePoint};
use crate::color::Rgb;
use crate::geom::{
    cosine_weighted_thetas, dir_to_spherical, half_vector, reflect_about_half, spherical_to_dir, Direction,
    Spherical,
};

pub const MAX_GRID: usize = 64;
/// Lattice coordinates this close to a node snap onto it.
const NODE_SNAP: f64 = 1e-6;
const SLICE_SNAP: f64 = 1e-12;

pub const PLAN_HEADER: &str = "# in_theta in_phi out_theta out_phi u1 u2 valid";
pub const TABLE_HEADER: &str = "in_theta,in_phi,out_theta,out_phi,u1,u2,valid,r,g,b";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("grid side {0} outside [1, {MAX_GRID}]")]
    GridSize(usize),
    #[error("at least one incoming direction is required")]
    NoIncoming,
    #[error("table has {found} values for a plan of {expected} entries")]
    ValueCount { expected: usize, found: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Lobe model plus mixture weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Warp {
    pub model: LobeModel,
    pub weights: LobeWeights,
}

impl Warp {
    pub fn new(model: LobeModel, weights: LobeWeights) -> Self {
        Warp { model, weights }
    }

    pub fn with_default_weights(model: LobeModel) -> Self {
        Warp {
            model,
            weights: model.default_weights(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanEntry {
    pub incoming: usize,
    /// Lattice index along `u1`.
    pub i: usize,
    /// Lattice index along `u2`.
    pub j: usize,
    pub u: UnitSquarePoint,
    pub wo: Direction,
    /// Outgoing direction is above the horizon.
    pub valid: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementPlan {
    incoming: Vec<Spherical>,
    grid_n: usize,
    warp: Warp,
    entries: Vec<PlanEntry>,
}

pub fn lattice_point(i: usize, j: usize, n: usize) -> UnitSquarePoint {
    UnitSquarePoint {
        u1: (i as f64 + 0.5) / n as f64,
        u2: (j as f64 + 0.5) / n as f64,
    }
}

/// Builds the plan for `n_theta_in` cosine-stratified incoming angles at
/// azimuth zero and an `n_out x n_out` outgoing lattice.
pub fn plan_measurements(warp: Warp, n_out: usize, n_theta_in: usize) -> Result<MeasurementPlan, SamplerError> {
    if n_out == 0 || n_out > MAX_GRID {
        return Err(SamplerError::GridSize(n_out));
    }
    if n_theta_in == 0 {
        return Err(SamplerError::NoIncoming);
    }
    let incoming: Vec<Spherical> = cosine_weighted_thetas(n_theta_in)
        .into_iter()
        .map(|t| Spherical::clamped(t, 0.0))
        .collect();
    let mut entries = Vec::with_capacity(n_theta_in * n_out * n_out);
    for (k, s) in incoming.iter().enumerate() {
        let wi = spherical_to_dir(*s);
        for i in 0..n_out {
            for j in 0..n_out {
                let u = lattice_point(i, j, n_out);
                let h = spherical_to_dir(warp.model.sample(u));
                let wo = reflect_about_half(h, wi);
                entries.push(PlanEntry {
                    incoming: k,
                    i,
                    j,
                    u,
                    wo,
                    valid: wo.z() >= 0.0,
                });
            }
        }
    }
    Ok(MeasurementPlan {
        incoming,
        grid_n: n_out,
        warp,
        entries,
    })
}

impl MeasurementPlan {
    pub fn incoming(&self) -> &[Spherical] {
        &self.incoming
    }

    pub fn incoming_dir(&self, k: usize) -> Direction {
        spherical_to_dir(self.incoming[k])
    }

    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    pub fn warp(&self) -> &Warp {
        &self.warp
    }

    pub fn entries(&self) -> &[PlanEntry] {
        &self.entries
    }

    pub fn valid_count(&self) -> usize {
        self.entries.iter().filter(|e| e.valid).count()
    }

    pub fn entry_index(&self, incoming: usize, i: usize, j: usize) -> usize {
        (incoming * self.grid_n + i) * self.grid_n + j
    }

    /// One line per entry:
    /// `in_theta in_phi out_theta out_phi u1 u2 valid`, radians with nine
    /// significant digits, `valid` as 0/1.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.entries.len() * 100);
        out.push_str(PLAN_HEADER);
        out.push('\n');
        for e in &self.entries {
            let s = self.incoming[e.incoming];
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {}",
                sig9(s.theta()),
                sig9(s.phi()),
                sig9(e.wo.theta()),
                sig9(e.wo.phi()),
                sig9(e.u.u1),
                sig9(e.u.u2),
                u8::from(e.valid)
            );
        }
        out
    }
}

/// Nine significant digits in scientific notation.
pub fn sig9(v: f64) -> String {
    format!("{v:.8e}")
}

/// One parsed row of a plan export.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanRecord {
    pub in_theta: f64,
    pub in_phi: f64,
    pub out_theta: f64,
    pub out_phi: f64,
    pub u1: f64,
    pub u2: f64,
    pub valid: bool,
}

pub fn parse_plan_text(text: &str) -> Result<Vec<PlanRecord>, SamplerError> {
    let mut records = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: &str| SamplerError::Parse {
            line: n + 1,
            msg: msg.to_string(),
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 7 {
            return Err(err("expected 7 fields"));
        }
        let mut nums = [0.0; 6];
        for (slot, f) in nums.iter_mut().zip(&fields) {
            *slot = f.parse().map_err(|_| err("bad number"))?;
        }
        let valid = match fields[6] {
            "1" => true,
            "0" => false,
            _ => return Err(err("valid flag must be 0 or 1")),
        };
        records.push(PlanRecord {
            in_theta: nums[0],
            in_phi: nums[1],
            out_theta: nums[2],
            out_phi: nums[3],
            u1: nums[4],
            u2: nums[5],
            valid,
        });
    }
    Ok(records)
}

/// Reconstruction in the half-cell strips between the outermost lattice
/// rows and the `u1 = 0` / `u1 = 1` edges.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Boundary {
    /// Hold the outermost row's value.
    #[default]
    Clamp,
    /// Extend the boundary cell's bilinear patch to the edge (floored at
    /// zero). Falls back to clamping when the patch includes an unmeasured
    /// node. Much more faithful for narrow lobes, whose tails are squeezed
    /// into the strip, but not monotone in the worst case.
    Extend,
}

/// Reflectance captured at every valid plan entry.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementTable {
    plan: MeasurementPlan,
    values: Vec<Option<Rgb>>,
    /// Node values used for interpolation: measured values, with invalid
    /// nodes taking the nearest valid node of the same slice.
    nodes: Vec<Rgb>,
    slice_cos: Vec<f64>,
    boundary: Boundary,
}

/// Virtually measures `reference` at every valid entry of `plan`.
pub fn measure(plan: &MeasurementPlan, reference: &dyn Brdf) -> MeasurementTable {
    let values: Vec<Option<Rgb>> = plan
        .entries
        .par_iter()
        .map(|e| {
            e.valid
                .then(|| reference.eval(plan.incoming_dir(e.incoming), e.wo).map(|c| c.max(0.0)))
        })
        .collect();
    MeasurementTable::assemble(plan.clone(), values)
}

impl MeasurementTable {
    /// Table from externally captured values (one per plan entry, `None`
    /// for invalid entries).
    pub fn from_values(plan: MeasurementPlan, values: Vec<Option<Rgb>>) -> Result<Self, SamplerError> {
        if values.len() != plan.entries.len() {
            return Err(SamplerError::ValueCount {
                expected: plan.entries.len(),
                found: values.len(),
            });
        }
        let values = values
            .into_iter()
            .zip(&plan.entries)
            .map(|(v, e)| if e.valid { v.map(|c| c.map(|x| x.max(0.0))) } else { None })
            .collect();
        Ok(MeasurementTable::assemble(plan, values))
    }

    fn assemble(plan: MeasurementPlan, values: Vec<Option<Rgb>>) -> Self {
        let slice_cos = plan.incoming.iter().map(|s| s.theta().cos()).collect();
        let nodes = fill_nodes(&plan, &values);
        MeasurementTable {
            plan,
            values,
            nodes,
            slice_cos,
            boundary: Boundary::default(),
        }
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn plan(&self) -> &MeasurementPlan {
        &self.plan
    }

    pub fn values(&self) -> &[Option<Rgb>] {
        &self.values
    }

    pub fn value_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    fn slice_value(&self, slice: usize, x: f64, y: f64) -> Rgb {
        let n = self.plan.grid_n;
        let base = slice * n * n;
        let node = |i: usize, j: usize| self.nodes[base + i * n + j];

        let x = x.clamp(-0.5, n as f64 - 0.5);
        let i0 = (x.floor().max(0.0) as usize).min(n.saturating_sub(2));
        let i1 = (i0 + 1).min(n - 1);

        let y0f = y.floor();
        let ty = y - y0f;
        let j0 = (y0f as i64).rem_euclid(n as i64) as usize;
        let j1 = (j0 + 1) % n;

        let measured = |i: usize, j: usize| self.values[base + i * n + j].is_some();
        let tx = if n == 1 {
            0.0
        } else {
            let tx = x - i0 as f64;
            let extend = self.boundary == Boundary::Extend
                && measured(i0, j0)
                && measured(i0, j1)
                && measured(i1, j0)
                && measured(i1, j1);
            if extend {
                tx
            } else {
                tx.clamp(0.0, 1.0)
            }
        };

        let low = node(i0, j0).lerp(node(i0, j1), ty);
        let high = node(i1, j0).lerp(node(i1, j1), ty);
        let v = low.lerp(high, tx);
        if (0.0..=1.0).contains(&tx) {
            v
        } else {
            v.map(|c| c.max(0.0))
        }
    }

    /// Reconstructed reflectance for an arbitrary direction pair.
    pub fn reconstruct_eval(&self, wi: Direction, wo: Direction) -> Rgb {
        // isotropy: rotate the pair so the incoming azimuth is zero
        let phi_i = wi.phi();
        let (wi, wo) = if phi_i == 0.0 {
            (wi, wo)
        } else {
            (wi.rotate_z(-phi_i), wo.rotate_z(-phi_i))
        };
        let Ok(h) = half_vector(wi, wo) else {
            return Rgb::ZERO;
        };
        let u = self.plan.warp.model.inverse(dir_to_spherical(h));
        let n = self.plan.grid_n;
        let x = snap(u.u1 * n as f64 - 0.5);
        let y = snap(u.u2 * n as f64 - 0.5);

        let c = wi.cos_theta();
        let cos = &self.slice_cos;
        let last = cos.len() - 1;
        if c >= cos[0] - SLICE_SNAP {
            return self.slice_value(0, x, y);
        }
        if c <= cos[last] + SLICE_SNAP {
            return self.slice_value(last, x, y);
        }
        // slice cosines decrease with k
        let k = cos.partition_point(|&ck| ck > c) - 1;
        if (cos[k + 1] - c).abs() <= SLICE_SNAP {
            return self.slice_value(k + 1, x, y);
        }
        let t = (cos[k] - c) / (cos[k] - cos[k + 1]);
        self.slice_value(k, x, y).lerp(self.slice_value(k + 1, x, y), t)
    }

    /// CSV with [`TABLE_HEADER`]; colour fields are empty for invalid
    /// entries.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 120);
        out.push_str(TABLE_HEADER);
        out.push('\n');
        for (e, v) in self.plan.entries.iter().zip(&self.values) {
            let s = self.plan.incoming[e.incoming];
            let _ = write!(
                out,
                "{},{},{},{},{},{},{}",
                sig9(s.theta()),
                sig9(s.phi()),
                sig9(e.wo.theta()),
                sig9(e.wo.phi()),
                sig9(e.u.u1),
                sig9(e.u.u2),
                u8::from(e.valid)
            );
            match v {
                Some(c) => {
                    let _ = writeln!(out, ",{},{},{}", c[0], c[1], c[2]);
                }
                None => out.push_str(",,,\n"),
            }
        }
        out
    }

    /// Reads values from [`MeasurementTable::to_csv`] output against the plan
    /// that produced it.
    pub fn from_csv(plan: MeasurementPlan, text: &str) -> Result<Self, SamplerError> {
        let mut values = Vec::with_capacity(plan.entries.len());
        for (n, line) in text.lines().enumerate() {
            if n == 0 || line.trim().is_empty() {
                continue;
            }
            let err = |msg: &str| SamplerError::Parse {
                line: n + 1,
                msg: msg.to_string(),
            };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 10 {
                return Err(err("expected 10 fields"));
            }
            if fields[7].is_empty() {
                values.push(None);
            } else {
                let mut c = [0.0; 3];
                for (slot, f) in c.iter_mut().zip(&fields[7..]) {
                    *slot = f.parse().map_err(|_| err("bad number"))?;
                }
                values.push(Some(Rgb(c)));
            }
        }
        MeasurementTable::from_values(plan, values)
    }
}

impl Brdf for MeasurementTable {
    fn eval(&self, wi: Direction, wo: Direction) -> Rgb {
        self.reconstruct_eval(wi, wo)
    }
}

/// Free-function form of [`MeasurementTable::reconstruct_eval`].
pub fn reconstruct_eval(table: &MeasurementTable, wi: Direction, wo: Direction) -> Rgb {
    table.reconstruct_eval(wi, wo)
}

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < NODE_SNAP {
        r
    } else {
        x
    }
}

/// Node grid per slice with invalid nodes replaced by the nearest valid
/// node of that slice (lattice distance, `u2` periodic; ties to the lowest
/// index). Slices without any valid node borrow the nearest populated
/// slice.
fn fill_nodes(plan: &MeasurementPlan, values: &[Option<Rgb>]) -> Vec<Rgb> {
    let n = plan.grid_n;
    let per_slice = n * n;
    let slices = plan.incoming.len();
    let mut nodes = vec![Rgb::ZERO; slices * per_slice];
    let mut populated = vec![false; slices];
    for k in 0..slices {
        let base = k * per_slice;
        let valid: Vec<usize> = (0..per_slice).filter(|&q| values[base + q].is_some()).collect();
        if valid.is_empty() {
            continue;
        }
        populated[k] = true;
        for q in 0..per_slice {
            nodes[base + q] = match values[base + q] {
                Some(v) => v,
                None => {
                    let (i, j) = ((q / n) as i64, (q % n) as i64);
                    let nearest = valid
                        .iter()
                        .min_by_key(|&&p| {
                            let (pi, pj) = ((p / n) as i64, (p % n) as i64);
                            let dj = (pj - j).rem_euclid(n as i64);
                            let dj = dj.min(n as i64 - dj);
                            ((pi - i).pow(2) + dj * dj, p)
                        })
                        .expect("non-empty");
                    values[base + nearest].expect("valid node")
                }
            };
        }
    }
    for k in 0..slices {
        if populated[k] {
            continue;
        }
        let donor = (0..slices)
            .filter(|&d| populated[d])
            .min_by_key(|&d| (d.abs_diff(k), d));
        if let Some(d) = donor {
            let (src, dst) = (d * per_slice, k * per_slice);
            for q in 0..per_slice {
                nodes[dst + q] = nodes[src + q];
            }
        }
    }
    nodes
}

/// Incoming polar angle of a planned slice, for reporting.
pub fn slice_theta(plan: &MeasurementPlan, k: usize) -> f64 {
    plan.incoming[k].theta().min(FRAC_PI_2)
}
