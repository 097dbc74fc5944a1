//! Snake localizer for closely spaced arrays: medial axis of the MLE-thresholded
//! VOI, matched-filter endpoints, a fixed-endpoint snake on vesselness, and
//! spacing-based resampling.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::array::ArrayModel;
use crate::centerline::resample_by_spacing;
use crate::error::{Error, Result, Stage, StageExt};
use crate::filters::{detect_endpoint, scale_range, vesselness, EndpointFilter, LATTICE_SPAN, SEARCH_POINTS};
use crate::geom::{cumulative_length, point_at_length, resample_uniform, vec3, Vec3};
use crate::graph::UPSAMPLED_SPACING;
use crate::medial_axis::{label_bool, skeletonize_voxels, MedialAxisLine};
use crate::params::SnakeParams;
use crate::result::LocalizationResult;
use crate::volume::{BoundingBox, Volume3};

pub const VESSEL_ALPHA: f64 = 0.5;
pub const VESSEL_BETA: f64 = 0.5;
pub const VESSEL_C: f64 = 500.0;
/// Arc length used to estimate the outward direction at a curve end (mm).
pub const END_DIRECTION_REACH: f64 = 1.0;
/// Arc length over which end curvature is compared (mm).
pub const END_CURVATURE_REACH: f64 = 4.0;
/// Arc length skipped at each end before measuring curvature (mm).
pub const END_CURVATURE_SKIP: f64 = 0.5;
/// Finite-difference step of the external force (mm).
const GRADIENT_STEP: f64 = 0.05;
/// Step halvings tried before an energy-increasing iteration ends the run.
const MAX_HALVINGS: usize = 8;

pub fn vessel_scales() -> Vec<f64> {
    scale_range(0.08, 0.8, 0.08)
}

/// Padding that keeps the endpoint search and filter lattices inside the VOI (mm).
pub fn endpoint_padding() -> f64 {
    let search = LATTICE_SPAN / SEARCH_POINTS as f64 * (SEARCH_POINTS / 2) as f64;
    search + LATTICE_SPAN / 2.0 * 3f64.sqrt()
}

/// Medial axis of the largest component above the MLE threshold.
pub fn init_centerline(voi: &Volume3) -> Result<MedialAxisLine> {
    init_centerline_at(voi, voi.mle_threshold()?)
}

/// Medial axis of the largest component of `grid` above `threshold`.
pub fn init_centerline_at(grid: &Volume3, threshold: f64) -> Result<MedialAxisLine> {
    let mask: Vec<bool> = grid.data().iter().map(|&v| v as f64 > threshold).collect();
    let labels = label_bool(grid.dims(), &mask);
    let largest = labels.components.first().ok_or_else(|| Error::Empty(format!("no voxel above threshold {threshold}")))?;
    skeletonize_voxels(grid, &largest.voxels, 0)
}

/// Outward unit direction at the start (or end) of `line`, measured over `reach` mm.
pub fn end_direction(line: &[Vec3], at_start: bool, reach: f64) -> Result<Vec3> {
    let pts: Vec<Vec3> = if at_start { line.to_vec() } else { line.iter().rev().copied().collect() };
    let cum = cumulative_length(&pts);
    let inner = point_at_length(&pts, &cum, reach);
    let d = pts[0] - inner;
    let n = d.norm();
    if !(n > 0.0) {
        return Err(Error::Degenerate("curve end has no direction".into()));
    }
    Ok(d / n)
}

/// Curvature (1/mm) of the circle through three points spaced `reach / 2`
/// apart, starting `skip` mm in from one end.
pub fn end_curvature(line: &[Vec3], at_start: bool, skip: f64, reach: f64) -> f64 {
    let pts: Vec<Vec3> = if at_start { line.to_vec() } else { line.iter().rev().copied().collect() };
    let cum = cumulative_length(&pts);
    let total = *cum.last().unwrap_or(&0.0);
    let skip = skip.min(total / 4.0);
    let reach = reach.min(total - 2.0 * skip);
    let at = |s: f64| point_at_length(&pts, &cum, s);
    let (p0, p1, p2) = (at(skip), at(skip + reach / 2.0), at(skip + reach));
    let (a, b, c) = ((p1 - p0).norm(), (p2 - p1).norm(), (p2 - p0).norm());
    let area2 = (p1 - p0).cross(&(p2 - p0)).norm();
    if !(a * b * c > 0.0) {
        return 0.0;
    }
    2.0 * area2 / (a * b * c)
}

/// Discrete snake energy: tension and rigidity in mm units, minus weighted field.
pub fn snake_energy(curve: &[Vec3], field: &Volume3, p: &SnakeParams) -> f64 {
    let h = p.point_spacing;
    let tension: f64 = curve.windows(2).map(|w| ((w[1] - w[0]) / h).norm_squared()).sum();
    let rigidity: f64 = curve.windows(3).map(|w| ((w[0] - w[1] * 2.0 + w[2]) / (h * h)).norm_squared()).sum();
    let external: f64 = curve.iter().map(|x| field.sample(x)).sum();
    h * (p.rho1 * tension + p.rho2 * rigidity - p.external_weight * external)
}

fn field_gradient(field: &Volume3, x: &Vec3) -> Vec3 {
    let g = |a: Vec3| (field.sample(&(x + a * GRADIENT_STEP)) - field.sample(&(x - a * GRADIENT_STEP))) / (2.0 * GRADIENT_STEP);
    vec3(g(Vec3::x()), g(Vec3::y()), g(Vec3::z()))
}

/// Internal-energy Hessian per unit length, `(2 rho1 / h^2) D1'D1 + (2 rho2 / h^4) D2'D2`.
fn internal_matrix(n: usize, p: &SnakeParams) -> DMatrix<f64> {
    let h = p.point_spacing;
    let mut m = DMatrix::zeros(n, n);
    let a = 2.0 * p.rho1 / (h * h);
    for i in 0..n - 1 {
        m[(i, i)] += a;
        m[(i + 1, i + 1)] += a;
        m[(i, i + 1)] -= a;
        m[(i + 1, i)] -= a;
    }
    let b = 2.0 * p.rho2 / h.powi(4);
    for i in 0..n.saturating_sub(2) {
        let c = [1.0, -2.0, 1.0];
        for r in 0..3 {
            for s in 0..3 {
                m[(i + r, i + s)] += b * c[r] * c[s];
            }
        }
    }
    m
}

/// One accepted iteration: energies before and after, and the step used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnakeStep {
    pub before: f64,
    pub after: f64,
    pub time_step: f64,
    pub max_displacement: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnakeRun {
    pub curve: Vec<Vec3>,
    pub steps: Vec<SnakeStep>,
    pub converged: bool,
}

/// Semi-implicit snake update with both endpoints held fixed.
fn semi_implicit_step(curve: &[Vec3], chol: &Cholesky<f64, nalgebra::Dyn>, coupling: &DMatrix<f64>, field: &Volume3, tau: f64, p: &SnakeParams) -> Vec<Vec3> {
    let n = curve.len();
    let m = n - 2;
    let mut out = curve.to_vec();
    for axis in 0..3 {
        let boundary = DVector::from_vec(vec![curve[0][axis], curve[n - 1][axis]]);
        let pull = coupling * &boundary;
        let rhs = DVector::from_fn(m, |i, _| {
            let x = &curve[i + 1];
            x[axis] + tau * (p.external_weight * field_gradient(field, x)[axis] - pull[i])
        });
        let sol = chol.solve(&rhs);
        for i in 0..m {
            out[i + 1][axis] = sol[i];
        }
    }
    out
}

/// Minimizes [`snake_energy`] over interior points; endpoints are copied bit for bit.
///
/// Each iteration solves `(I + tau M_II) x' = x + tau (w grad V - M_IB x_B)`.
/// A step that raises the energy is retried at half the time step, and the run
/// stops when halving cannot lower it. The curve is resampled to the point
/// spacing every `resample_every` iterations.
pub fn snake_optimize(curve: &[Vec3], field: &Volume3, p: &SnakeParams) -> Result<SnakeRun> {
    p.validate()?;
    if curve.len() < 3 {
        return Err(Error::InvalidArgument(format!("a snake needs at least 3 points, got {}", curve.len())));
    }
    let (first, last) = (curve[0], curve[curve.len() - 1]);
    let mut x = curve.to_vec();
    let mut steps = Vec::new();
    let mut converged = false;
    let mut factor: Option<(usize, Vec<(f64, Cholesky<f64, nalgebra::Dyn>)>, DMatrix<f64>)> = None;
    for it in 0..p.max_iterations {
        if it > 0 && it % p.resample_every == 0 {
            x = resample_uniform(&x, p.point_spacing);
            x[0] = first;
            let n = x.len();
            x[n - 1] = last;
        }
        let n = x.len();
        if n < 3 {
            break;
        }
        if factor.as_ref().is_none_or(|f| f.0 != n) {
            let full = internal_matrix(n, p);
            let inner = full.view((1, 1), (n - 2, n - 2)).into_owned();
            let mut coupling = DMatrix::zeros(n - 2, 2);
            for i in 0..n - 2 {
                coupling[(i, 0)] = full[(i + 1, 0)];
                coupling[(i, 1)] = full[(i + 1, n - 1)];
            }
            let chols = (0..=MAX_HALVINGS)
                .map(|k| {
                    let tau = p.time_step / 2f64.powi(k as i32);
                    let sys = DMatrix::identity(n - 2, n - 2) + &inner * tau;
                    let c = Cholesky::new(sys).ok_or_else(|| Error::Degenerate("snake system is not positive definite".into()))?;
                    Ok((tau, c))
                })
                .collect::<Result<Vec<_>>>()?;
            factor = Some((n, chols, coupling));
        }
        let (_, chols, coupling) = factor.as_ref().unwrap();
        let before = snake_energy(&x, field, p);
        let mut accepted = None;
        for (tau, chol) in chols {
            let y = semi_implicit_step(&x, chol, coupling, field, *tau, p);
            let after = snake_energy(&y, field, p);
            if after <= before {
                accepted = Some((y, after, *tau));
                break;
            }
        }
        let Some((y, after, tau)) = accepted else {
            converged = true;
            break;
        };
        let moved = x.iter().zip(&y).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        steps.push(SnakeStep { before, after, time_step: tau, max_displacement: moved });
        x = y;
        if moved < p.tolerance {
            converged = true;
            break;
        }
    }
    Ok(SnakeRun { curve: x, steps, converged })
}

#[derive(Debug, Clone)]
pub struct SnakeOutput {
    pub result: LocalizationResult,
    pub initial: MedialAxisLine,
    /// Snake input curve, apical end first, with the detected endpoints.
    pub start: Vec<Vec3>,
    pub run: SnakeRun,
}

/// Detected endpoint; an end whose search box leaves the VOI is a cut
/// structure rather than a tip and keeps its initial position.
fn locate_end(voi: &Volume3, line: &[Vec3], at_start: bool, p: &SnakeParams) -> Result<Vec3> {
    let x0 = if at_start { line[0] } else { line[line.len() - 1] };
    let dir = end_direction(line, at_start, END_DIRECTION_REACH)?;
    let f = EndpointFilter::new(p.endpoint_radius, dir, p.rho3)?;
    match detect_endpoint(voi, &x0, &f) {
        Err(Error::OutOfBounds(_)) => Ok(x0),
        r => r,
    }
}

/// Snake pipeline. The array coils tighter toward its tip, so the end with the
/// larger curvature is taken as apical. The threshold comes from the VOI at its
/// own resolution; the axis and snake run on the upsampled VOI.
pub fn localize_snake(volume: &Volume3, bbox: &BoundingBox, array: &ArrayModel, p: &SnakeParams) -> Result<SnakeOutput> {
    p.validate()?;
    let pad = endpoint_padding();
    let padded = BoundingBox::new(bbox.min - Vec3::repeat(pad), bbox.max + Vec3::repeat(pad)).stage(Stage::Crop)?;
    let region = padded
        .intersect(&volume.extent())
        .ok_or_else(|| Error::OutOfBounds("bounding box misses the volume".into()))
        .stage(Stage::Crop)?;
    let voi = volume.crop(&region).stage(Stage::Crop)?;
    let up = voi.resample_trilinear([UPSAMPLED_SPACING; 3]).stage(Stage::Crop)?;

    let threshold = voi.mle_threshold().stage(Stage::Centerline)?;
    let initial = init_centerline_at(&up, threshold).stage(Stage::Centerline)?;
    if initial.points.len() < 2 {
        return Err(Error::Degenerate("initial centerline has fewer than 2 points".into())).stage(Stage::Centerline);
    }
    let a = locate_end(&up, &initial.points, true, p).stage(Stage::Endpoints)?;
    let b = locate_end(&up, &initial.points, false, p).stage(Stage::Endpoints)?;
    let mut line = initial.points.clone();
    let n = line.len();
    line[0] = a;
    line[n - 1] = b;
    let bend = |at_start| end_curvature(&initial.points, at_start, END_CURVATURE_SKIP, END_CURVATURE_REACH);
    if bend(false) > bend(true) {
        line.reverse();
    }
    let mut start = resample_uniform(&line, p.point_spacing);
    if start.len() < 3 {
        start = resample_uniform(&line, line.windows(2).map(|w| (w[1] - w[0]).norm()).sum::<f64>() / 2.0);
    }

    let field = vesselness(&up, &vessel_scales(), VESSEL_ALPHA, VESSEL_BETA, VESSEL_C).stage(Stage::Features)?;
    let run = snake_optimize(&start, &field, p).stage(Stage::Snake)?;
    let contacts = resample_by_spacing(&run.curve, array).stage(Stage::Resampling)?;
    Ok(SnakeOutput { result: LocalizationResult::new(&array.name, contacts, None), initial, start, run })
}
