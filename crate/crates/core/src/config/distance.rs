//! Distance between configurations and the training target cost.

use crate::config::Configuration;
use crate::error::{Error, Result};

/// Per electrode, the index distance from a mismatched position of `m` to the
/// nearest position where `reference` has the state `m` has there; 0 at matches
/// and `K` when `reference` never takes that state.
pub fn mismatch_distances(m: &Configuration, reference: &Configuration) -> Result<Vec<usize>> {
    let k = m.len();
    if reference.len() != k {
        return Err(Error::SizeMismatch { expected: k, found: reference.len() });
    }
    Ok((0..k)
        .map(|j| {
            let want = m.active[j];
            if reference.active[j] == want {
                return 0;
            }
            (0..k).filter(|&i| reference.active[i] == want).map(|i| i.abs_diff(j)).min().unwrap_or(k)
        })
        .collect())
}

/// Sum of the local maxima of `d`; a plateau of equal values counts once and
/// positions outside the vector count as 0.
pub fn sum_local_maxima(d: &[usize]) -> usize {
    let mut total = 0;
    let mut i = 0;
    while i < d.len() {
        let mut j = i;
        while j + 1 < d.len() && d[j + 1] == d[i] {
            j += 1;
        }
        let left = if i == 0 { 0 } else { d[i - 1] };
        let right = if j + 1 == d.len() { 0 } else { d[j + 1] };
        if d[i] > 0 && d[i] > left && d[i] > right {
            total += d[i];
        }
        i = j + 1;
    }
    total
}

/// Reference-directed configuration distance; not symmetric in general.
pub fn config_distance(m: &Configuration, reference: &Configuration) -> Result<f64> {
    Ok(sum_local_maxima(&mismatch_distances(m, reference)?) as f64)
}

/// Training target: 0 for the expert choice, 1/2 for an acceptable
/// alternative, otherwise the distance to the expert choice.
pub fn target_cost(m: &Configuration, optimal: &Configuration, acceptable: &[Configuration]) -> Result<f64> {
    if m.len() != optimal.len() {
        return Err(Error::SizeMismatch { expected: optimal.len(), found: m.len() });
    }
    if m == optimal {
        Ok(0.0)
    } else if acceptable.contains(m) {
        Ok(0.5)
    } else {
        config_distance(m, optimal)
    }
}
