//! Exhaustive configuration search.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::config::features::{
    activation_term, area_i, compute_features_with, depth_i, depth_term, line_m, minimum_above, ratio_i, threshold_r,
    threshold_t, EnvelopeMode, FeatureVector,
};
use crate::config::weights::WeightSet;
use crate::config::Configuration;
use crate::dvf::DvfSet;
use crate::error::{Error, Result};

/// Largest electrode count searched exhaustively.
pub const MAX_ELECTRODES: usize = 24;
/// Masks per parallel work unit.
const CHUNK: u32 = 1 << 12;

/// Configuration-independent per-electrode terms.
#[derive(Debug, Clone)]
pub struct ElectrodeTerms {
    pub k: usize,
    /// `exp(-Area_Term)` when active and when inactive.
    pub area_on: Vec<f64>,
    pub area_off: Vec<f64>,
    pub depth_on: Vec<f64>,
    pub depth_off: Vec<f64>,
    /// Positive part of `D_i - M_i`.
    pub excess: Vec<f64>,
    /// `exp(-ratio_i)`.
    pub symmetry: Vec<f64>,
    /// Bit `j` set when the minimum of curve `i` lies above curve `j`.
    pub above: Vec<u32>,
}

impl ElectrodeTerms {
    pub fn new(s: &DvfSet) -> Result<Self> {
        let k = s.len();
        if k == 0 || k > MAX_ELECTRODES {
            return Err(Error::InvalidArgument(format!("exhaustive search needs 1 to {MAX_ELECTRODES} electrodes, got {k}")));
        }
        let mut t = ElectrodeTerms {
            k,
            area_on: Vec::with_capacity(k),
            area_off: Vec::with_capacity(k),
            depth_on: Vec::with_capacity(k),
            depth_off: Vec::with_capacity(k),
            excess: Vec::with_capacity(k),
            symmetry: Vec::with_capacity(k),
            above: Vec::with_capacity(k),
        };
        for i in 0..k {
            let c = &s.curves[i];
            let (area, depth) = (area_i(s, i), depth_i(s, i));
            let (tt, rr) = (threshold_t(c.d_min), threshold_r(c.d_min));
            t.area_on.push((-activation_term(area, tt, true)).exp());
            t.area_off.push((-activation_term(area, tt, false)).exp());
            t.depth_on.push((-depth_term(depth, rr, true)).exp());
            t.depth_off.push((-depth_term(depth, rr, false)).exp());
            let e = c.d_min - line_m(c.freq);
            t.excess.push(if e > 0.0 { e } else { 0.0 });
            t.symmetry.push((-ratio_i(s, i)).exp());
            t.above.push((0..k).filter(|&j| j != i && minimum_above(s, i, j)).fold(0, |b, j| b | 1 << j));
        }
        Ok(t)
    }

    /// Features of the configuration whose active set is `bits`.
    pub fn features(&self, bits: u32) -> FeatureVector {
        let k = self.k;
        let ka = bits.count_ones() as usize;
        let (first, last) = (bits.trailing_zeros() as usize, 31 - bits.leading_zeros() as usize);
        let mut f3 = 0.0;
        let mut f4 = 0.0;
        let mut f5 = 0.0;
        let mut k_i = 0usize;
        let mut f7 = 0.0;
        let mut k_s = 0usize;
        for i in 0..k {
            let on = bits >> i & 1 == 1;
            if on {
                f3 += self.area_on[i];
                f4 += self.depth_on[i];
                f5 += self.excess[i];
                if self.above[i] & bits != 0 {
                    k_i += 1;
                }
                if i > first && i < last {
                    f7 += self.symmetry[i];
                    k_s += 1;
                }
            } else {
                f3 += self.area_off[i];
                f4 += self.depth_off[i];
            }
        }
        let f1 = if bits & 1 == 1 { 0.0 } else { 1.0 };
        let f7 = if k_s > 0 { f7 / k_s as f64 } else { 0.0 };
        FeatureVector::from_base([f1, 1.0 / ka as f64, f3 / k as f64, f4 / k as f64, f5, k_i as f64 / ka as f64, f7])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub config: Configuration,
    pub cost: f64,
    /// Number of masks scored.
    pub scored: u64,
}

/// Lower cost first; ties prefer more active electrodes, then the
/// lexicographically smallest mask (electrode 1 first, inactive before active).
fn rank(a: (u32, f64), b: (u32, f64), k: usize) -> Ordering {
    let lex = |m: u32| m.reverse_bits() >> (32 - k);
    a.1.total_cmp(&b.1)
        .then(b.0.count_ones().cmp(&a.0.count_ones()))
        .then(lex(a.0).cmp(&lex(b.0)))
}

fn search(k: usize, score: impl Fn(u32) -> f64 + Sync) -> (u32, f64, u64) {
    let end: u32 = if k == 32 { u32::MAX } else { (1u32 << k) - 1 };
    let chunks = end / CHUNK + 1;
    let best = (0..chunks)
        .into_par_iter()
        .filter_map(|c| {
            let lo = (c * CHUNK).max(1);
            let hi = (c * CHUNK).saturating_add(CHUNK - 1).min(end);
            let mut best: Option<(u32, f64)> = None;
            for m in lo..=hi {
                let cand = (m, score(m));
                if best.is_none_or(|b| rank(cand, b, k).is_lt()) {
                    best = Some(cand);
                }
            }
            best
        })
        .reduce_with(|a, b| if rank(b, a, k).is_lt() { b } else { a })
        .expect("at least one mask");
    (best.0, best.1, end as u64)
}

/// Global minimum of the configuration cost over all masks with at least one
/// active electrode, using precomputed per-electrode terms.
pub fn select_configuration(s: &DvfSet, w: &WeightSet) -> Result<Selection> {
    let terms = ElectrodeTerms::new(s)?;
    let k = terms.k;
    let (bits, cost, scored) = search(k, |m| w.cost(&terms.features(m)));
    Ok(Selection { config: Configuration::from_bits(bits, k), cost, scored })
}

/// Reference search that recomputes every feature from the curves for each mask.
pub fn select_configuration_naive(s: &DvfSet, w: &WeightSet, mode: EnvelopeMode) -> Result<Selection> {
    let k = s.len();
    if k == 0 || k > MAX_ELECTRODES {
        return Err(Error::InvalidArgument(format!("exhaustive search needs 1 to {MAX_ELECTRODES} electrodes, got {k}")));
    }
    let mut best: Option<(u32, f64)> = None;
    let mut scored = 0u64;
    for m in 1..(1u32 << k) {
        let fv = compute_features_with(s, &Configuration::from_bits(m, k), mode)?;
        let cand = (m, w.cost(&fv));
        scored += 1;
        if best.is_none_or(|b| rank(cand, b, k).is_lt()) {
            best = Some(cand);
        }
    }
    let (bits, cost) = best.expect("at least one mask");
    Ok(Selection { config: Configuration::from_bits(bits, k), cost, scored })
}
