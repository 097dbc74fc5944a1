//! Small geometric helpers shared by the localizers and metrics.

use nalgebra::Vector3;

pub type Vec3 = Vector3<f64>;

pub fn vec3(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3::new(x, y, z)
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Distance from `p` to a polyline (a single point counts as a degenerate polyline).
pub fn point_polyline_distance(p: &Vec3, line: &[Vec3]) -> f64 {
    match line.len() {
        0 => f64::INFINITY,
        1 => (p - line[0]).norm(),
        _ => line
            .windows(2)
            .map(|w| point_segment_distance(p, &w[0], &w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Cumulative arc length at each vertex, starting at 0.
pub fn cumulative_length(line: &[Vec3]) -> Vec<f64> {
    let mut acc = Vec::with_capacity(line.len());
    let mut s = 0.0;
    for (i, p) in line.iter().enumerate() {
        if i > 0 {
            s += (p - line[i - 1]).norm();
        }
        acc.push(s);
    }
    acc
}

pub fn polyline_length(line: &[Vec3]) -> f64 {
    line.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Point at arc length `s` along a polyline with precomputed cumulative lengths.
/// `s` is clamped to the polyline's extent.
pub fn point_at_length(line: &[Vec3], cum: &[f64], s: f64) -> Vec3 {
    debug_assert_eq!(line.len(), cum.len());
    let n = line.len();
    if n == 1 || s <= 0.0 {
        return line[0];
    }
    let total = cum[n - 1];
    if s >= total {
        return line[n - 1];
    }
    // first vertex with cum > s
    let hi = cum.partition_point(|&c| c <= s);
    let lo = hi - 1;
    let seg = cum[hi] - cum[lo];
    if seg <= 0.0 {
        return line[lo];
    }
    let t = (s - cum[lo]) / seg;
    line[lo] + (line[hi] - line[lo]) * t
}

/// Resample a polyline at uniform arc-length `step`; both endpoints are kept exactly.
pub fn resample_uniform(line: &[Vec3], step: f64) -> Vec<Vec3> {
    if line.len() < 2 {
        return line.to_vec();
    }
    let cum = cumulative_length(line);
    let total = *cum.last().unwrap();
    if total == 0.0 {
        return vec![line[0]];
    }
    let segments = (total / step).round().max(1.0) as usize;
    let mut out = Vec::with_capacity(segments + 1);
    out.push(line[0]);
    for k in 1..segments {
        out.push(point_at_length(line, &cum, total * k as f64 / segments as f64));
    }
    out.push(line[line.len() - 1]);
    out
}

/// Orthonormal pair perpendicular to the unit vector `v`.
pub fn orthonormal_basis(v: &Vec3) -> (Vec3, Vec3) {
    let helper = if v.x.abs() < 0.9 { vec3(1.0, 0.0, 0.0) } else { vec3(0.0, 1.0, 0.0) };
    let u = v.cross(&helper).normalize();
    let w = v.cross(&u);
    (u, w)
}

/// Moving-average smoothing with a window that shrinks symmetrically at the ends,
/// so the two endpoints stay fixed.
pub fn smooth_polyline(line: &[Vec3], half_window: usize) -> Vec<Vec3> {
    let n = line.len();
    (0..n)
        .map(|i| {
            let h = half_window.min(i).min(n - 1 - i);
            let mut acc = Vec3::zeros();
            for p in &line[i - h..=i + h] {
                acc += p;
            }
            acc / (2 * h + 1) as f64
        })
        .collect()
}
