//! Scalar 3D volumes: storage, VVOL file I/O, resampling, and intensity thresholds.
//!
//! Voxel centers sit at `origin + index * spacing` (mm), data is x-fastest.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{vec3, Vec3};

const MAGIC: &str = "VVOL1";

#[derive(Debug, Clone, PartialEq)]
pub struct Volume3 {
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
    data: Vec<f32>,
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    // exact when a == b
    a + t * (b - a)
}

impl Volume3 {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3], data: Vec<f32>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument(format!("dims must be positive, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument(format!("spacing must be positive, got {spacing:?}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidArgument("origin must be finite".into()));
        }
        let expected = dims[0] * dims[1] * dims[2];
        if data.len() != expected {
            return Err(Error::SizeMismatch { expected, found: data.len() });
        }
        Ok(Volume3 { dims, spacing, origin, data })
    }

    pub fn filled(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3], value: f32) -> Result<Self> {
        let n = dims.iter().product();
        Self::new(dims, spacing, origin, vec![value; n])
    }

    /// Builds a volume by evaluating `f` at every voxel center (world coordinates).
    pub fn from_fn(
        dims: [usize; 3],
        spacing: [f64; 3],
        origin: [f64; 3],
        mut f: impl FnMut(Vec3) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(dims.iter().product());
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let p = vec3(
                        origin[0] + i as f64 * spacing[0],
                        origin[1] + j as f64 * spacing[1],
                        origin[2] + k as f64 * spacing[2],
                    );
                    data.push(f(p) as f32);
                }
            }
        }
        Self::new(dims, spacing, origin, data)
    }

    /// Same geometry, new voxel values.
    pub fn with_data(&self, data: Vec<f32>) -> Result<Self> {
        Self::new(self.dims, self.spacing, self.origin, data)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }
    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }
    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }
    pub fn data(&self) -> &[f32] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<f32> {
        self.data
    }
    pub fn len(&self) -> usize {
        self.data.len()
    }
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn voxel_diagonal(&self) -> f64 {
        self.spacing.iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    /// Inverse of [`Volume3::index`].
    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let r = idx / self.dims[0];
        [i, r % self.dims[1], r / self.dims[1]]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f32 {
        self.data[self.index(i, j, k)]
    }

    pub fn voxel_to_world(&self, ijk: [f64; 3]) -> Vec3 {
        vec3(
            self.origin[0] + ijk[0] * self.spacing[0],
            self.origin[1] + ijk[1] * self.spacing[1],
            self.origin[2] + ijk[2] * self.spacing[2],
        )
    }

    pub fn index_to_world(&self, idx: usize) -> Vec3 {
        let [i, j, k] = self.coords(idx);
        self.voxel_to_world([i as f64, j as f64, k as f64])
    }

    pub fn world_to_voxel(&self, p: &Vec3) -> [f64; 3] {
        [
            (p.x - self.origin[0]) / self.spacing[0],
            (p.y - self.origin[1]) / self.spacing[1],
            (p.z - self.origin[2]) / self.spacing[2],
        ]
    }

    /// Nearest voxel index for a world point, clamped to the grid.
    pub fn nearest_voxel(&self, p: &Vec3) -> [usize; 3] {
        let u = self.world_to_voxel(p);
        let mut out = [0usize; 3];
        for a in 0..3 {
            out[a] = u[a].round().clamp(0.0, (self.dims[a] - 1) as f64) as usize;
        }
        out
    }

    /// World-space box spanned by the voxel centers.
    pub fn extent(&self) -> BoundingBox {
        let max = self.voxel_to_world([
            (self.dims[0] - 1) as f64,
            (self.dims[1] - 1) as f64,
            (self.dims[2] - 1) as f64,
        ]);
        BoundingBox { min: vec3(self.origin[0], self.origin[1], self.origin[2]), max }
    }

    /// True when `p` lies inside the box spanned by the voxel centers.
    pub fn contains(&self, p: &Vec3) -> bool {
        let u = self.world_to_voxel(p);
        (0..3).all(|a| u[a] >= -1e-9 && u[a] <= (self.dims[a] - 1) as f64 + 1e-9)
    }

    /// Trilinear interpolation at a world point; coordinates are clamped to the grid.
    pub fn sample(&self, p: &Vec3) -> f64 {
        let u = self.world_to_voxel(p);
        let mut i0 = [0usize; 3];
        let mut i1 = [0usize; 3];
        let mut t = [0.0f64; 3];
        for a in 0..3 {
            let d = self.dims[a];
            let c = u[a].clamp(0.0, (d - 1) as f64);
            if d == 1 {
                continue;
            }
            let f = (c.floor() as usize).min(d - 2);
            i0[a] = f;
            i1[a] = f + 1;
            t[a] = c - f as f64;
        }
        let v = |i: usize, j: usize, k: usize| self.get(i, j, k) as f64;
        let c00 = lerp(v(i0[0], i0[1], i0[2]), v(i1[0], i0[1], i0[2]), t[0]);
        let c10 = lerp(v(i0[0], i1[1], i0[2]), v(i1[0], i1[1], i0[2]), t[0]);
        let c01 = lerp(v(i0[0], i0[1], i1[2]), v(i1[0], i0[1], i1[2]), t[0]);
        let c11 = lerp(v(i0[0], i1[1], i1[2]), v(i1[0], i1[1], i1[2]), t[0]);
        lerp(lerp(c00, c10, t[1]), lerp(c01, c11, t[1]), t[2])
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Sub-volume of the voxels whose centers fall inside `bbox`.
    pub fn crop(&self, bbox: &BoundingBox) -> Result<Volume3> {
        let lo_w = self.world_to_voxel(&bbox.min);
        let hi_w = self.world_to_voxel(&bbox.max);
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for a in 0..3 {
            let l = (lo_w[a] - 1e-9).ceil().max(0.0);
            let h = (hi_w[a] + 1e-9).floor().min((self.dims[a] - 1) as f64);
            if l > h {
                return Err(Error::Empty("bounding box does not overlap the volume".into()));
            }
            lo[a] = l as usize;
            hi[a] = h as usize;
        }
        let dims = [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1];
        let mut data = Vec::with_capacity(dims.iter().product());
        for k in lo[2]..=hi[2] {
            for j in lo[1]..=hi[1] {
                let row = self.index(lo[0], j, k);
                data.extend_from_slice(&self.data[row..row + dims[0]]);
            }
        }
        let o = self.voxel_to_world([lo[0] as f64, lo[1] as f64, lo[2] as f64]);
        Volume3::new(dims, self.spacing, [o.x, o.y, o.z], data)
    }

    /// Resamples onto a grid with `new_spacing` covering the same world extent.
    ///
    /// Each axis gets `ceil(extent / new_spacing) + 1` samples, placed at
    /// `origin + i * new_spacing` and clamped at the far border.
    pub fn resample_trilinear(&self, new_spacing: [f64; 3]) -> Result<Volume3> {
        if new_spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument(format!("spacing must be positive, got {new_spacing:?}")));
        }
        let dims = resampled_dims(self.dims, self.spacing, new_spacing);
        let origin = self.origin;
        let n = dims[0] * dims[1] * dims[2];
        let mut data = vec![0f32; n];
        // per-axis interpolation tables
        let table = |a: usize| -> Vec<(usize, usize, f64)> {
            (0..dims[a])
                .map(|i| {
                    let d = self.dims[a];
                    let u = (i as f64 * new_spacing[a] / self.spacing[a]).min((d - 1) as f64);
                    if d == 1 {
                        (0, 0, 0.0)
                    } else {
                        let f = (u.floor() as usize).min(d - 2);
                        (f, f + 1, u - f as f64)
                    }
                })
                .collect()
        };
        let (tx, ty, tz) = (table(0), table(1), table(2));
        use rayon::prelude::*;
        let plane = dims[0] * dims[1];
        data.par_chunks_mut(plane).enumerate().for_each(|(k, slab)| {
            let (z0, z1, wz) = tz[k];
            for (j, &(y0, y1, wy)) in ty.iter().enumerate() {
                for (i, &(x0, x1, wx)) in tx.iter().enumerate() {
                    let v = |a: usize, b: usize, c: usize| self.get(a, b, c) as f64;
                    let c00 = lerp(v(x0, y0, z0), v(x1, y0, z0), wx);
                    let c10 = lerp(v(x0, y1, z0), v(x1, y1, z0), wx);
                    let c01 = lerp(v(x0, y0, z1), v(x1, y0, z1), wx);
                    let c11 = lerp(v(x0, y1, z1), v(x1, y1, z1), wx);
                    slab[i + dims[0] * j] = lerp(lerp(c00, c10, wy), lerp(c01, c11, wy), wz) as f32;
                }
            }
        });
        Volume3::new(dims, new_spacing, origin, data)
    }

    /// Intensity `t` such that the fraction of voxels with value `>= t` is the
    /// smallest fraction `>= alpha_pct / 100`.
    pub fn percentile_threshold(&self, alpha_pct: f64) -> Result<f64> {
        percentile_threshold(&self.data, alpha_pct)
    }

    /// Two-Gaussian mixture threshold `mu_2 + 5 sigma_2` of the brighter class.
    ///
    /// The darkest and brightest `MLE_TAIL_PCT` percent (air and metal) are left
    /// out of the fit.
    pub fn mle_threshold(&self) -> Result<f64> {
        let lo = percentile_threshold(&self.data, 100.0 - MLE_TAIL_PCT)?;
        let hi = percentile_threshold(&self.data, MLE_TAIL_PCT)?;
        let kept: Vec<f32> = self.data.iter().copied().filter(|&v| v as f64 >= lo && v as f64 <= hi).collect();
        let fit = fit_two_gaussians(&kept)?;
        Ok(fit.means[1] + 5.0 * fit.sigmas[1])
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = fs::File::create(path)?;
        let mut w = BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let [dx, dy, dz] = self.dims;
        let [sx, sy, sz] = self.spacing;
        let [ox, oy, oz] = self.origin;
        writeln!(w, "{MAGIC} {dx} {dy} {dz} {sx} {sy} {sz} {ox} {oy} {oz}")?;
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Volume3> {
        let bytes = fs::read(path)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Volume3> {
        let nl = bytes
            .iter()
            .take(4096)
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Format("missing VVOL header line".into()))?;
        let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::Format("header is not ASCII".into()))?;
        let tokens: Vec<&str> = header.split_ascii_whitespace().collect();
        if tokens.first() != Some(&MAGIC) {
            return Err(Error::Format(format!("bad magic {:?}", tokens.first().unwrap_or(&""))));
        }
        if tokens.len() != 10 {
            return Err(Error::Format(format!("expected 9 header fields, found {}", tokens.len() - 1)));
        }
        let mut dims = [0usize; 3];
        for a in 0..3 {
            dims[a] = tokens[1 + a]
                .parse()
                .map_err(|_| Error::Format(format!("bad dimension {:?}", tokens[1 + a])))?;
        }
        let mut reals = [0f64; 6];
        for a in 0..6 {
            reals[a] = tokens[4 + a]
                .parse()
                .map_err(|_| Error::Format(format!("bad header number {:?}", tokens[4 + a])))?;
        }
        let n: usize = dims.iter().product();
        let payload = &bytes[nl + 1..];
        if payload.len() != n * 4 {
            return Err(Error::SizeMismatch { expected: n, found: payload.len() / 4 });
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Volume3::new(dims, [reals[0], reals[1], reals[2]], [reals[3], reals[4], reals[5]], data)
    }
}

/// Grid size covering the same extent at a new spacing.
pub fn resampled_dims(dims: [usize; 3], spacing: [f64; 3], new_spacing: [f64; 3]) -> [usize; 3] {
    let mut out = [0usize; 3];
    for a in 0..3 {
        let extent = (dims[a] - 1) as f64 * spacing[a];
        out[a] = (extent / new_spacing[a] - 1e-9).ceil().max(0.0) as usize + 1;
    }
    out
}

pub fn percentile_threshold(values: &[f32], alpha_pct: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("percentile of an empty volume".into()));
    }
    if !(alpha_pct > 0.0 && alpha_pct <= 100.0) {
        return Err(Error::InvalidArgument(format!("alpha must be in (0, 100], got {alpha_pct}")));
    }
    let n = values.len();
    let k = ((alpha_pct / 100.0 * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let mut buf = values.to_vec();
    let (_, kth, _) = buf.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    Ok(*kth as f64)
}

/// Result of the two-class histogram fit; component 1 has the higher mean.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MixtureFit {
    pub weights: [f64; 2],
    pub means: [f64; 2],
    pub sigmas: [f64; 2],
    pub iterations: usize,
    pub mean_log_likelihood: f64,
}

const HIST_BINS: usize = 512;
/// Mean log-likelihood gain (nats per voxel) the two-class fit needs over one Gaussian.
pub const MIN_LOG_LIKELIHOOD_GAIN: f64 = 0.05;
/// Percent of voxels trimmed from each end of the histogram before the mixture fit.
pub const MLE_TAIL_PCT: f64 = 0.5;
const EM_MAX_ITER: usize = 500;
const EM_TOL: f64 = 1e-6;

/// EM fit of two Gaussians to a 512-bin histogram over `[min, max]`.
pub fn fit_two_gaussians(values: &[f32]) -> Result<MixtureFit> {
    if values.is_empty() {
        return Err(Error::Empty("mixture fit of an empty volume".into()));
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v as f64), h.max(v as f64)));
    if !(hi > lo) {
        return Err(Error::MixtureFit { reason: "constant histogram".into(), fit: MixtureFit::default() });
    }
    let width = (hi - lo) / HIST_BINS as f64;
    let mut counts = [0f64; HIST_BINS];
    for &v in values {
        let b = (((v as f64 - lo) / width) as usize).min(HIST_BINS - 1);
        counts[b] += 1.0;
    }
    let centers: Vec<f64> = (0..HIST_BINS).map(|b| lo + (b as f64 + 0.5) * width).collect();
    let total: f64 = counts.iter().sum();

    let q = |p: f64| -> f64 {
        let mut acc = 0.0;
        for (b, c) in counts.iter().enumerate() {
            acc += c;
            if acc >= p * total {
                return centers[b];
            }
        }
        hi
    };
    let spread = (hi - lo) / 8.0;
    let mut fit = MixtureFit {
        weights: [0.5, 0.5],
        means: [q(0.25), q(0.75)],
        sigmas: [spread, spread],
        iterations: 0,
        mean_log_likelihood: f64::NEG_INFINITY,
    };
    if fit.means[0] == fit.means[1] {
        fit.means[1] = fit.means[0] + spread;
    }
    let floor = width / 4.0;
    let norm = (2.0 * std::f64::consts::PI).sqrt();
    let mut resp = vec![[0f64; 2]; HIST_BINS];
    let mut prev = f64::NEG_INFINITY;
    for it in 1..=EM_MAX_ITER {
        // E step
        let mut ll = 0.0;
        for b in 0..HIST_BINS {
            let x = centers[b];
            let mut p = [0f64; 2];
            for c in 0..2 {
                let z = (x - fit.means[c]) / fit.sigmas[c];
                p[c] = fit.weights[c] * (-0.5 * z * z).exp() / (norm * fit.sigmas[c]);
            }
            let s = p[0] + p[1];
            if s > 0.0 {
                resp[b] = [p[0] / s, p[1] / s];
                ll += counts[b] * s.ln();
            } else {
                // far tail of both components; assign to the nearer mean
                let near = if (x - fit.means[0]).abs() <= (x - fit.means[1]).abs() { 0 } else { 1 };
                resp[b] = if near == 0 { [1.0, 0.0] } else { [0.0, 1.0] };
                ll += counts[b] * f64::MIN_POSITIVE.ln();
            }
        }
        let mean_ll = ll / total;
        // M step
        for c in 0..2 {
            let nk: f64 = (0..HIST_BINS).map(|b| counts[b] * resp[b][c]).sum();
            if nk <= 0.0 {
                fit.iterations = it;
                return Err(Error::MixtureFit { reason: "empty component".into(), fit });
            }
            let mu = (0..HIST_BINS).map(|b| counts[b] * resp[b][c] * centers[b]).sum::<f64>() / nk;
            let var = (0..HIST_BINS)
                .map(|b| counts[b] * resp[b][c] * (centers[b] - mu).powi(2))
                .sum::<f64>()
                / nk;
            fit.weights[c] = nk / total;
            fit.means[c] = mu;
            fit.sigmas[c] = var.sqrt();
        }
        fit.iterations = it;
        fit.mean_log_likelihood = mean_ll;
        if fit.sigmas.iter().any(|&s| s < floor) {
            return Err(Error::MixtureFit { reason: "component variance collapsed".into(), fit });
        }
        if (mean_ll - prev).abs() < EM_TOL {
            if fit.means[0] > fit.means[1] {
                fit.weights.swap(0, 1);
                fit.means.swap(0, 1);
                fit.sigmas.swap(0, 1);
            }
            // a second component must explain the histogram clearly better than one
            let mu = (0..HIST_BINS).map(|b| counts[b] * centers[b]).sum::<f64>() / total;
            let var = (0..HIST_BINS).map(|b| counts[b] * (centers[b] - mu).powi(2)).sum::<f64>() / total;
            let sd = var.sqrt().max(floor);
            let single: f64 = (0..HIST_BINS)
                .map(|b| {
                    let z = (centers[b] - mu) / sd;
                    counts[b] * (-0.5 * z * z - (norm * sd).ln())
                })
                .sum::<f64>()
                / total;
            let gain = mean_ll - single;
            if gain < MIN_LOG_LIKELIHOOD_GAIN {
                return Err(Error::MixtureFit { reason: format!("second mode not supported (gain {gain:.4} nats)"), fit });
            }
            return Ok(fit);
        }
        prev = mean_ll;
    }
    Err(Error::MixtureFit { reason: format!("no convergence after {EM_MAX_ITER} iterations"), fit })
}

/// Axis-aligned world-space box (mm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min: Vec3,
    pub max: Vec3,
}

impl BoundingBox {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self> {
        if (0..3).any(|a| !(min[a] <= max[a])) {
            return Err(Error::InvalidArgument(format!("bounding box min {min:?} exceeds max {max:?}")));
        }
        Ok(BoundingBox { min, max })
    }

    pub fn around(points: &[Vec3], margin: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("bounding box of no points".into()));
        }
        let mut min = points[0];
        let mut max = points[0];
        for p in points {
            min = min.inf(p);
            max = max.sup(p);
        }
        let m = Vec3::repeat(margin);
        BoundingBox::new(min - m, max + m)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    pub fn intersect(&self, other: &BoundingBox) -> Option<BoundingBox> {
        let min = self.min.sup(&other.min);
        let max = self.max.inf(&other.max);
        BoundingBox::new(min, max).ok()
    }

    /// Text form used for `.bbox` sidecar files: `minx miny minz maxx maxy maxz`.
    pub fn to_text(&self) -> String {
        format!(
            "{} {} {} {} {} {}\n",
            self.min.x, self.min.y, self.min.z, self.max.x, self.max.y, self.max.z
        )
    }

    pub fn from_text(s: &str) -> Result<Self> {
        let v: Vec<f64> = s
            .split_ascii_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("bad bbox value {t:?}"))))
            .collect::<Result<_>>()?;
        if v.len() != 6 {
            return Err(Error::Parse(format!("bbox needs 6 numbers, found {}", v.len())));
        }
        BoundingBox::new(vec3(v[0], v[1], v[2]), vec3(v[3], v[4], v[5]))
    }
}
