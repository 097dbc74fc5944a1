//! The ten configuration features of a DVF set.

use crate::config::Configuration;
use crate::dvf::DvfSet;
use crate::error::{Error, Result};

/// Floor for areas, depths, and the T and R thresholds.
pub const EPS: f64 = 1e-9;

/// Area at which keeping or dropping an electrode is equally desirable.
pub fn threshold_t(d: f64) -> f64 {
    -0.2660 + 1.4125 * d + 0.5398 * d * d
}

/// Depth of concavity at which keeping or dropping an electrode is equally desirable.
pub fn threshold_r(d: f64) -> f64 {
    0.0328 + 0.005 * d + 0.0351 * d * d
}

/// Modiolar-distance line separating kept from dropped basal electrodes (mm).
pub fn line_m(freq: f64) -> f64 {
    -17.29 * freq.log10() + 72.81
}

/// Sum of squared gaps where `env` lies above `curve`.
pub fn area_against(curve: &[f64], env: &[f64]) -> f64 {
    curve.iter().zip(env).map(|(&c, &e)| if e > c { (e - c) * (e - c) } else { 0.0 }).sum()
}

/// Summed gaps where `env` lies above `curve`, before and after grid index `at`.
pub fn half_areas(curve: &[f64], env: &[f64], at: usize) -> (f64, f64) {
    let gap = |k: usize| if env[k] > curve[k] { env[k] - curve[k] } else { 0.0 };
    ((0..at).map(gap).sum(), (at + 1..curve.len()).map(gap).sum())
}

/// `min / max` of the half areas; two empty halves count as symmetric.
pub fn symmetry_ratio(left: f64, right: f64) -> f64 {
    let hi = left.max(right);
    if hi > 0.0 {
        left.min(right) / hi
    } else {
        1.0
    }
}

/// Concavity depth of curve `i` at its minimum relative to the given neighbors;
/// a single neighbor serves both sides and none gives 0.
pub fn depth_with(s: &DvfSet, i: usize, left: Option<usize>, right: Option<usize>) -> f64 {
    let c = &s.curves[i];
    let at = c.argmin();
    let v = c.distances[at];
    let lift = |j: usize| (s.curves[j].distances[at] - v).max(0.0);
    match (left, right) {
        (Some(l), Some(r)) => lift(l).min(lift(r)),
        (Some(n), None) | (None, Some(n)) => lift(n),
        (None, None) => 0.0,
    }
}

/// Area of curve `i` below the envelope of all other curves.
pub fn area_i(s: &DvfSet, i: usize) -> f64 {
    match s.envelope_excluding(i, None) {
        Ok(env) => area_against(&s.curves[i].distances, &env),
        Err(_) => 0.0,
    }
}

/// Concavity depth of curve `i` against its adjacent electrodes.
pub fn depth_i(s: &DvfSet, i: usize) -> f64 {
    let left = i.checked_sub(1);
    let right = (i + 1 < s.len()).then_some(i + 1);
    depth_with(s, i, left, right)
}

/// Symmetry ratio of curve `i` against the envelope of all other curves.
pub fn ratio_i(s: &DvfSet, i: usize) -> f64 {
    match s.envelope_excluding(i, None) {
        Ok(env) => {
            let c = &s.curves[i];
            let (l, r) = half_areas(&c.distances, &env, c.argmin());
            symmetry_ratio(l, r)
        }
        Err(_) => 1.0,
    }
}

/// Whether the minimum of curve `i` lies above curve `j` at that frequency.
pub fn minimum_above(s: &DvfSet, i: usize, j: usize) -> bool {
    let at = s.curves[i].argmin();
    s.curves[j].distances[at] < s.curves[i].distances[at]
}

/// Term inside `exp(-.)` of the area and depth features.
pub fn activation_term(value: f64, threshold: f64, active: bool) -> f64 {
    let (v, t) = (value.max(EPS), threshold.max(EPS));
    if active {
        t / v
    } else {
        v / t
    }
}

/// Depth feature term, oriented as printed: value over threshold when active.
pub fn depth_term(value: f64, threshold: f64, active: bool) -> f64 {
    let (v, t) = (value.max(EPS), threshold.max(EPS));
    if active {
        v / t
    } else {
        t / v
    }
}

/// Which envelope the area, depth and symmetry terms are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnvelopeMode {
    /// All electrodes, independent of the configuration.
    #[default]
    All,
    /// Active electrodes only, recomputed per configuration.
    Active,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; 10]);

impl FeatureVector {
    pub fn zero() -> Self {
        FeatureVector([0.0; 10])
    }

    /// Fills f8..f10 as square roots of f3, f4 and f7.
    pub fn from_base(f: [f64; 7]) -> Self {
        FeatureVector([f[0], f[1], f[2], f[3], f[4], f[5], f[6], f[2].sqrt(), f[3].sqrt(), f[6].sqrt()])
    }
}

/// Features of configuration `c` against the all-electrode envelope.
pub fn compute_features(s: &DvfSet, c: &Configuration) -> Result<FeatureVector> {
    compute_features_with(s, c, EnvelopeMode::All)
}

/// Features of `c`, recomputing every per-electrode term from the curves.
pub fn compute_features_with(s: &DvfSet, c: &Configuration, mode: EnvelopeMode) -> Result<FeatureVector> {
    let k = s.len();
    if c.len() != k {
        return Err(Error::SizeMismatch { expected: k, found: c.len() });
    }
    let ka = c.active_count();
    if ka == 0 {
        return Err(Error::InvalidArgument("configuration has no active electrode".into()));
    }
    let on = &c.active;
    let active_env = |i: usize| s.envelope_excluding(i, Some(on)).ok();
    let nearest = |i: usize, step: isize| {
        let mut j = i as isize + step;
        while j >= 0 && (j as usize) < k {
            if on[j as usize] {
                return Some(j as usize);
            }
            j += step;
        }
        None
    };

    let f1 = if on[0] { 0.0 } else { 1.0 };
    let f2 = 1.0 / ka as f64;
    let mut f3 = 0.0;
    let mut f4 = 0.0;
    let mut f5 = 0.0;
    let mut k_i = 0usize;
    let mut f7 = 0.0;
    let mut k_s = 0usize;
    for i in 0..k {
        let curve = &s.curves[i];
        let d = curve.d_min;
        let (area, depth, ratio) = match mode {
            EnvelopeMode::All => (area_i(s, i), depth_i(s, i), ratio_i(s, i)),
            EnvelopeMode::Active => {
                let env = active_env(i);
                let area = env.as_ref().map_or(0.0, |e| area_against(&curve.distances, e));
                let ratio = env.as_ref().map_or(1.0, |e| {
                    let (l, r) = half_areas(&curve.distances, e, curve.argmin());
                    symmetry_ratio(l, r)
                });
                (area, depth_with(s, i, nearest(i, -1), nearest(i, 1)), ratio)
            }
        };
        f3 += (-activation_term(area, threshold_t(d), on[i])).exp();
        f4 += (-depth_term(depth, threshold_r(d), on[i])).exp();
        if on[i] {
            let excess = d - line_m(curve.freq);
            if excess > 0.0 {
                f5 += excess;
            }
            if (0..k).any(|j| j != i && on[j] && minimum_above(s, i, j)) {
                k_i += 1;
            }
            if nearest(i, -1).is_some() && nearest(i, 1).is_some() {
                f7 += (-ratio).exp();
                k_s += 1;
            }
        }
    }
    let f7 = if k_s > 0 { f7 / k_s as f64 } else { 0.0 };
    Ok(FeatureVector::from_base([f1, f2, f3 / k as f64, f4 / k as f64, f5, k_i as f64 / ka as f64, f7]))
}
