//! Gaussian smoothing, Hessian-eigenvalue filters (blob, vesselness), and the
//! endpoint matched filter.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{orthonormal_basis, Vec3};
use crate::volume::Volume3;

/// Kernel taps are truncated at this many standard deviations.
const TRUNCATE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Order {
    Smooth,
    First,
    Second,
}

/// Correlation weights `w[t]` for offsets `t - r` voxels: `out(x) = sum w(o) f(x + o*h)`.
fn kernel(sigma: f64, h: f64, order: Order) -> Vec<f32> {
    let r = (TRUNCATE * sigma / h).ceil().max(1.0) as i64;
    let xs: Vec<f64> = (-r..=r).map(|o| o as f64 * h).collect();
    let g: Vec<f64> = xs.iter().map(|x| (-0.5 * x * x / (sigma * sigma)).exp()).collect();
    let gs: f64 = g.iter().sum();
    let w: Vec<f64> = match order {
        Order::Smooth => g.iter().map(|v| v / gs).collect(),
        Order::First => {
            // derivative of G evaluated at -x, normalized to be exact on f(x) = x
            let w: Vec<f64> = xs.iter().zip(&g).map(|(x, g)| x * g).collect();
            let m: f64 = w.iter().zip(&xs).map(|(w, x)| w * x).sum();
            w.iter().map(|v| v / m).collect()
        }
        Order::Second => {
            let s2 = sigma * sigma;
            let mut w: Vec<f64> = xs.iter().zip(&g).map(|(x, g)| (x * x / s2 - 1.0) / s2 * g).collect();
            // zero DC response, then exact on f(x) = x^2 / 2
            let dc: f64 = w.iter().sum::<f64>() / gs;
            for (w, g) in w.iter_mut().zip(&g) {
                *w -= dc * g;
            }
            let m: f64 = w.iter().zip(&xs).map(|(w, x)| w * x * x / 2.0).sum();
            w.iter().map(|v| v / m).collect()
        }
    };
    w.into_iter().map(|v| v as f32).collect()
}

/// 1D correlation along `axis` with replicate-edge padding.
fn correlate_axis(data: &[f32], dims: [usize; 3], axis: usize, w: &[f32]) -> Vec<f32> {
    let [nx, ny, nz] = dims;
    let r = (w.len() / 2) as isize;
    let plane = nx * ny;
    let mut out = vec![0f32; data.len()];
    match axis {
        0 => {
            out.par_chunks_mut(nx).enumerate().for_each(|(row, o)| {
                let src = &data[row * nx..(row + 1) * nx];
                let last = nx as isize - 1;
                for (i, dst) in o.iter_mut().enumerate() {
                    let mut acc = 0f32;
                    for (t, &wt) in w.iter().enumerate() {
                        let s = (i as isize + t as isize - r).clamp(0, last) as usize;
                        acc += wt * src[s];
                    }
                    *dst = acc;
                }
            });
        }
        1 => {
            out.par_chunks_mut(plane).enumerate().for_each(|(k, o)| {
                let slab = &data[k * plane..(k + 1) * plane];
                let last = ny as isize - 1;
                for j in 0..ny {
                    let dst = &mut o[j * nx..(j + 1) * nx];
                    for (t, &wt) in w.iter().enumerate() {
                        let s = (j as isize + t as isize - r).clamp(0, last) as usize;
                        let src = &slab[s * nx..(s + 1) * nx];
                        for (d, v) in dst.iter_mut().zip(src) {
                            *d += wt * v;
                        }
                    }
                }
            });
        }
        _ => {
            out.par_chunks_mut(plane).enumerate().for_each(|(k, o)| {
                let last = nz as isize - 1;
                for (t, &wt) in w.iter().enumerate() {
                    let s = (k as isize + t as isize - r).clamp(0, last) as usize;
                    let src = &data[s * plane..(s + 1) * plane];
                    for (d, v) in o.iter_mut().zip(src) {
                        *d += wt * v;
                    }
                }
            });
        }
    }
    out
}

/// Separable Gaussian blur with `sigma` in mm; `sigma == 0` is the identity.
pub fn gaussian_blur(v: &Volume3, sigma: f64) -> Result<Volume3> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(v.clone());
    }
    let sp = v.spacing();
    let mut data = v.data().to_vec();
    for axis in 0..3 {
        data = correlate_axis(&data, v.dims(), axis, &kernel(sigma, sp[axis], Order::Smooth));
    }
    v.with_data(data)
}

/// Scale-normalized Hessian components `sigma^2 * [xx, xy, xz, yy, yz, zz]`.
pub fn hessian_components(v: &Volume3, sigma: f64) -> [Vec<f32>; 6] {
    let sp = v.spacing();
    let d = v.dims();
    let k = |a: usize, o: Order| kernel(sigma, sp[a], o);
    let pass = |src: &[f32], a: usize, o: Order| correlate_axis(src, d, a, &k(a, o));
    // the Hessian ignores offsets; removing one keeps flat regions exactly zero
    let (lo, _) = v.min_max();
    let base: Vec<f32> = v.data().iter().map(|x| x - lo).collect();
    let z0 = pass(&base, 2, Order::Smooth);
    let z1 = pass(&base, 2, Order::First);
    let z2 = pass(&base, 2, Order::Second);
    let y0z0 = pass(&z0, 1, Order::Smooth);
    let y1z0 = pass(&z0, 1, Order::First);
    let y2z0 = pass(&z0, 1, Order::Second);
    let y0z1 = pass(&z1, 1, Order::Smooth);
    let y1z1 = pass(&z1, 1, Order::First);
    let y0z2 = pass(&z2, 1, Order::Smooth);
    let s2 = (sigma * sigma) as f32;
    let mut out = [
        pass(&y0z0, 0, Order::Second),
        pass(&y1z0, 0, Order::First),
        pass(&y0z1, 0, Order::First),
        pass(&y2z0, 0, Order::Smooth),
        pass(&y1z1, 0, Order::Smooth),
        pass(&y0z2, 0, Order::Smooth),
    ];
    for c in out.iter_mut() {
        c.iter_mut().for_each(|x| *x *= s2);
    }
    out
}

/// Eigenvalues of a symmetric 3x3 matrix, sorted by increasing magnitude.
pub fn symmetric_eigenvalues(a: [f64; 6]) -> [f64; 3] {
    let [a11, a12, a13, a22, a23, a33] = a;
    let p1 = a12 * a12 + a13 * a13 + a23 * a23;
    let mut e = if p1 <= 1e-30 * (a11 * a11 + a22 * a22 + a33 * a33).max(1e-300) {
        [a11, a22, a33]
    } else {
        let q = (a11 + a22 + a33) / 3.0;
        let p2 = (a11 - q).powi(2) + (a22 - q).powi(2) + (a33 - q).powi(2) + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let (b11, b22, b33) = ((a11 - q) / p, (a22 - q) / p, (a33 - q) / p);
        let (b12, b13, b23) = (a12 / p, a13 / p, a23 / p);
        let det = b11 * (b22 * b33 - b23 * b23) - b12 * (b12 * b33 - b23 * b13) + b13 * (b12 * b23 - b22 * b13);
        let r = (det / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let l1 = q + 2.0 * p * phi.cos();
        let l3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
        [l1, 3.0 * q - l1 - l3, l3]
    };
    e.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    e
}

/// Per-voxel Hessian eigenvalues at one scale.
#[derive(Debug, Clone)]
pub struct HessianEigen {
    pub sigma: f64,
    /// `[L1, L2, L3]` with `|L1| <= |L2| <= |L3|`, one triple per voxel.
    pub values: Vec<[f32; 3]>,
}

pub fn hessian_eigen(v: &Volume3, sigma: f64) -> Result<HessianEigen> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("Hessian scale must be > 0, got {sigma}")));
    }
    let h = hessian_components(v, sigma);
    let values = (0..v.len())
        .into_par_iter()
        .map(|i| {
            let e = symmetric_eigenvalues([
                h[0][i] as f64,
                h[1][i] as f64,
                h[2][i] as f64,
                h[3][i] as f64,
                h[4][i] as f64,
                h[5][i] as f64,
            ]);
            [e[0] as f32, e[1] as f32, e[2] as f32]
        })
        .collect();
    Ok(HessianEigen { sigma, values })
}

/// Max over scales of a per-voxel eigenvalue response.
fn multiscale<F>(v: &Volume3, scales: &[f64], response: F) -> Result<Volume3>
where
    F: Fn([f64; 3]) -> f64 + Sync,
{
    if scales.is_empty() {
        return Err(Error::InvalidArgument("at least one scale is required".into()));
    }
    let mut best = vec![0f32; v.len()];
    for &s in scales {
        let he = hessian_eigen(v, s)?;
        best.par_iter_mut().zip(he.values.par_iter()).for_each(|(b, l)| {
            let r = response([l[0] as f64, l[1] as f64, l[2] as f64]) as f32;
            if r > *b {
                *b = r;
            }
        });
    }
    v.with_data(best)
}

/// Blob-likeness `B1 * B2 * B3` for eigenvalue triples that are all negative.
pub fn blob_response(l: [f64; 3], s1: f64, s2: f64, s3: f64) -> f64 {
    if l.iter().any(|&x| x >= 0.0) {
        return 0.0;
    }
    let sum_sq: f64 = l.iter().map(|x| x * x).sum();
    let b1 = 1.0 - (-sum_sq / (s1 * s1)).exp();
    let r = (l[0] - l[1]).abs() + (l[1] - l[2]).abs() + (l[0] - l[2]).abs();
    let b2 = (-r / s2).exp();
    let lmin = (-l[0]).min(-l[1]).min(-l[2]);
    let b3 = 1.0 - (-lmin / s3).exp();
    b1 * b2 * b3
}

pub fn blob_filter(v: &Volume3, scales: &[f64], s1: f64, s2: f64, s3: f64) -> Result<Volume3> {
    if !(s1 > 0.0 && s2 > 0.0 && s3 > 0.0) {
        return Err(Error::InvalidArgument(format!("blob constants must be positive, got {s1}, {s2}, {s3}")));
    }
    multiscale(v, scales, |l| blob_response(l, s1, s2, s3))
}

/// Frangi tubularity for a bright tube: needs `L2 < 0` and `L3 < 0`.
pub fn vesselness_response(l: [f64; 3], alpha: f64, beta: f64, c: f64) -> f64 {
    let [l1, l2, l3] = l;
    if l2 >= 0.0 || l3 >= 0.0 {
        return 0.0;
    }
    let ra = l2.abs() / l3.abs();
    let rb = l1.abs() / (l2 * l3).abs().sqrt();
    let s2 = l1 * l1 + l2 * l2 + l3 * l3;
    (1.0 - (-ra * ra / (2.0 * alpha * alpha)).exp())
        * (-rb * rb / (2.0 * beta * beta)).exp()
        * (1.0 - (-s2 / (2.0 * c * c)).exp())
}

pub fn vesselness(v: &Volume3, scales: &[f64], alpha: f64, beta: f64, c: f64) -> Result<Volume3> {
    if !(alpha > 0.0 && beta > 0.0 && c > 0.0) {
        return Err(Error::InvalidArgument(format!("vesselness constants must be positive, got {alpha}, {beta}, {c}")));
    }
    multiscale(v, scales, |l| vesselness_response(l, alpha, beta, c))
}

/// `[start, start + step, ...]` up to and including `stop` (within rounding).
pub fn scale_range(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

/// Matched filter for a rounded array tip pointing along `dir`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndpointFilter {
    pub radius: f64,
    pub dir: Vec3,
    pub rho3: f64,
}

/// Points per axis of the filter sampling lattice.
pub const FILTER_POINTS: usize = 21;
/// Points per axis of the tip search lattice.
pub const SEARCH_POINTS: usize = 16;
/// Edge length of both lattices (mm).
pub const LATTICE_SPAN: f64 = 1.2;

impl EndpointFilter {
    pub fn new(radius: f64, dir: Vec3, rho3: f64) -> Result<Self> {
        let n = dir.norm();
        if !(radius > 0.0) || !(0.0..=1.0).contains(&rho3) || !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidArgument("endpoint filter needs r > 0, rho3 in [0, 1], nonzero direction".into()));
        }
        Ok(EndpointFilter { radius, dir: dir / n, rho3 })
    }

    /// Hemisphere ahead of the origin along `dir`, tube behind it.
    pub fn shape(&self, w: &Vec3) -> f64 {
        let r2 = self.radius * self.radius;
        let t = w.dot(&self.dir);
        if t >= 0.0 {
            r2 - w.norm_squared()
        } else {
            r2 - (w - self.dir * t).norm_squared()
        }
    }

    pub fn weight(&self, w: &Vec3) -> f64 {
        let m = self.shape(w);
        if m > 0.0 {
            self.rho3 * m
        } else if m < 0.0 {
            (1.0 - self.rho3) * m
        } else {
            0.0
        }
    }

    /// Lattice offsets in world coordinates with their filter weights.
    fn taps(&self) -> Vec<(Vec3, f64)> {
        let (e1, e2) = orthonormal_basis(&self.dir);
        let step = LATTICE_SPAN / (FILTER_POINTS - 1) as f64;
        let half = (FILTER_POINTS / 2) as f64;
        let mut out = Vec::with_capacity(FILTER_POINTS.pow(3));
        for a in 0..FILTER_POINTS {
            for b in 0..FILTER_POINTS {
                for c in 0..FILTER_POINTS {
                    let w = self.dir * ((a as f64 - half) * step)
                        + e1 * ((b as f64 - half) * step)
                        + e2 * ((c as f64 - half) * step);
                    let m = self.weight(&w);
                    if m != 0.0 {
                        out.push((w, m));
                    }
                }
            }
        }
        out
    }
}

fn box_inside(v: &Volume3, x: &Vec3, half_diag: f64) -> bool {
    let e = v.extent();
    (0..3).all(|a| x[a] - half_diag >= e.min[a] - 1e-9 && x[a] + half_diag <= e.max[a] + 1e-9)
}

/// Filter response `sum I(y) M(y - x)` over the oriented sampling lattice.
pub fn endpoint_response(v: &Volume3, x: &Vec3, f: &EndpointFilter) -> Result<f64> {
    let reach = LATTICE_SPAN / 2.0 * 3f64.sqrt();
    if !box_inside(v, x, reach) {
        return Err(Error::OutOfBounds(format!("endpoint filter box around {x:?} leaves the volume")));
    }
    Ok(f.taps().iter().map(|(w, m)| v.sample(&(x + w)) * m).sum())
}

/// Offset of search lattice index `k` along one axis (mm); index 8 is the center.
pub fn search_offset(k: usize) -> f64 {
    let step = LATTICE_SPAN / SEARCH_POINTS as f64;
    (k as f64 - (SEARCH_POINTS / 2) as f64) * step
}

/// Argmax of [`endpoint_response`] over the 16^3 search lattice around `x0`.
///
/// Ties go to the lowest lexicographic lattice index.
pub fn detect_endpoint(v: &Volume3, x0: &Vec3, f: &EndpointFilter) -> Result<Vec3> {
    let reach = LATTICE_SPAN / 2.0 * 3f64.sqrt();
    let lo = search_offset(0).abs().max(search_offset(SEARCH_POINTS - 1).abs());
    if !box_inside(v, x0, lo + reach) {
        return Err(Error::OutOfBounds(format!("endpoint search box around {x0:?} leaves the volume")));
    }
    let taps = f.taps();
    let n = SEARCH_POINTS;
    let scores: Vec<(usize, f64)> = (0..n * n * n)
        .into_par_iter()
        .map(|idx| {
            let (a, b, c) = (idx / (n * n), (idx / n) % n, idx % n);
            let x = x0 + Vec3::new(search_offset(a), search_offset(b), search_offset(c));
            let s: f64 = taps.iter().map(|(w, m)| v.sample(&(x + w)) * m).sum();
            (idx, s)
        })
        .collect();
    let mut best = scores[0];
    for &(idx, s) in &scores[1..] {
        if s > best.1 {
            best = (idx, s);
        }
    }
    let idx = best.0;
    let (a, b, c) = (idx / (n * n), (idx / n) % n, idx % n);
    Ok(x0 + Vec3::new(search_offset(a), search_offset(b), search_offset(c)))
}
