//! Weight training: features of sampled configurations regressed on target
//! costs with nonnegative weights and a free offset.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::array::Family;
use crate::config::distance::target_cost;
use crate::config::features::FeatureVector;
use crate::config::nnls::nnls;
use crate::config::select::ElectrodeTerms;
use crate::config::weights::WeightSet;
use crate::config::Configuration;
use crate::dvf::DvfSet;
use crate::error::{Error, Result};

/// Electrode counts up to this use every configuration as a training row.
pub const FULL_ENUMERATION_MAX: usize = 16;

#[derive(Debug, Clone)]
pub struct TrainingSubject {
    pub dvf: DvfSet,
    /// Expert configuration.
    pub optimal: Configuration,
    /// Alternatives the expert accepts.
    pub acceptable: Vec<Configuration>,
}

#[derive(Debug, Clone)]
pub struct TrainingReport {
    pub weights: WeightSet,
    pub rows: usize,
    /// `||F w + delta - C||`.
    pub residual: f64,
    pub rank_deficient: bool,
}

/// Masks used as training rows for one subject. Small arrays use all of them;
/// larger ones use the expert and acceptable masks, every single flip of the
/// expert mask, and uniform random masks up to `budget`.
pub fn training_masks(s: &TrainingSubject, budget: usize, rng: &mut ChaCha8Rng) -> Result<Vec<u32>> {
    let k = s.dvf.len();
    if s.optimal.len() != k || s.acceptable.iter().any(|a| a.len() != k) {
        return Err(Error::SizeMismatch { expected: k, found: s.optimal.len() });
    }
    if k <= FULL_ENUMERATION_MAX {
        return Ok((1..1u32 << k).collect());
    }
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut push = |m: u32, out: &mut Vec<u32>| {
        if m != 0 && seen.insert(m) {
            out.push(m);
        }
    };
    let opt = s.optimal.bits();
    push(opt, &mut out);
    for a in &s.acceptable {
        push(a.bits(), &mut out);
    }
    for i in 0..k {
        push(opt ^ 1 << i, &mut out);
    }
    let full = (1u32 << k) - 1;
    let mut tries = 0;
    while out.len() < budget && tries < 20 * budget {
        push(rng.random_range(1..=full), &mut out);
        tries += 1;
    }
    Ok(out)
}

/// Nonnegative weights and free offset minimizing `||F w + delta - C||`.
pub fn solve_weights(features: &[FeatureVector], targets: &[f64], family: Family) -> Result<TrainingReport> {
    let m = features.len();
    if m == 0 || targets.len() != m {
        return Err(Error::SizeMismatch { expected: m, found: targets.len() });
    }
    // the offset is eliminated by centering rows and targets
    let mut mean = [0.0; 10];
    for f in features {
        for (a, v) in mean.iter_mut().zip(&f.0) {
            *a += v / m as f64;
        }
    }
    let c_mean = targets.iter().sum::<f64>() / m as f64;
    let a = DMatrix::from_fn(m, 10, |r, c| features[r].0[c] - mean[c]);
    let b = DVector::from_fn(m, |r, _| targets[r] - c_mean);
    let sol = nnls(&a, &b)?;
    let mut weights = [0.0; 10];
    for (w, x) in weights.iter_mut().zip(sol.x.iter()) {
        *w = *x;
    }
    let delta = c_mean - weights.iter().zip(&mean).map(|(w, f)| w * f).sum::<f64>();
    let residual = features
        .iter()
        .zip(targets)
        .map(|(f, c)| {
            let r = weights.iter().zip(&f.0).map(|(w, f)| w * f).sum::<f64>() + delta - c;
            r * r
        })
        .sum::<f64>()
        .sqrt();
    Ok(TrainingReport { weights: WeightSet::new(family, weights, delta)?, rows: m, residual, rank_deficient: sol.rank_deficient })
}

/// Trains weights on all subjects; `seed` fixes the row sampling.
pub fn train_weights(subjects: &[TrainingSubject], family: Family, budget: usize, seed: u64) -> Result<TrainingReport> {
    if subjects.is_empty() {
        return Err(Error::Empty("no training subjects".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::new();
    let mut targets = Vec::new();
    for s in subjects {
        let terms = ElectrodeTerms::new(&s.dvf)?;
        let k = s.dvf.len();
        for m in training_masks(s, budget, &mut rng)? {
            let c = Configuration::from_bits(m, k);
            features.push(terms.features(m));
            targets.push(target_cost(&c, &s.optimal, &s.acceptable)?);
        }
    }
    solve_weights(&features, &targets, family)
}
