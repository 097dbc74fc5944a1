//! Instance generators and independent checks shared by integration tests.
#![allow(dead_code)]

use cochlea_core::array::{ArrayModel, Family};
use cochlea_core::centerline::{CenterlineCandidate, CostScale, Source};
use cochlea_core::config::WeightSet;
use cochlea_core::dvf::{log_grid, DvfSet};
use cochlea_core::geom::cumulative_length;
use cochlea_core::graph::{Coi, CoiSet};
use cochlea_core::params::{ClParams, GpParams};
use cochlea_core::{vec3, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small random candidate set: at most `per_group` candidates per spacing group.
pub fn random_coi_instance(seed: u64, per_group: usize) -> (ArrayModel, CoiSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(3..=5);
    let spacings: Vec<f64> = (0..n - 1).map(|_| if rng.random_bool(0.3) { 2.0 } else { 1.0 }).collect();
    let array = ArrayModel::new("T", Family::AdvancedBionics, spacings, 0.25, 0.25).unwrap();
    let esd = array.esd_values();
    let mut cois = Vec::new();
    for group in 0..esd.len() {
        for _ in 0..rng.random_range(2..=per_group) {
            let pos = vec3(rng.random_range(0.0..3.0), rng.random_range(0.0..3.0), rng.random_range(0.0..1.5));
            cois.push(Coi {
                pos,
                roi: rng.random_range(0..3),
                k: rng.random_range(0..5),
                group,
                intensity: rng.random_range(500.0..4000.0),
                blob: rng.random_range(0.0..50.0),
                vessel: rng.random_range(0.0..1.0),
                doi: rng.random_range(0.0..720.0),
                phantom: false,
            });
        }
    }
    let max = |g: fn(&Coi) -> f64| cois.iter().map(g).fold(f64::NEG_INFINITY, f64::max);
    let (i_max, ib_max, iv_max) = (max(|c| c.intensity), max(|c| c.blob), max(|c| c.vessel));
    let set = CoiSet { axes: vec![Vec::new(); esd.len()], esd, cois, i_max, ib_max, iv_max };
    (array, set)
}

/// Re-checks the five hard constraints on a basal-first path of candidate ids.
pub fn path_violations(set: &CoiSet, array: &ArrayModel, p: &GpParams, nodes: &[usize]) -> Vec<String> {
    let spacings = array.basal_first_spacings();
    let group_of = |d: f64| set.esd.iter().position(|&e| (e - d).abs() < 1e-9);
    let c = |i: usize| &set.cois[nodes[i]];
    let mut out = Vec::new();
    if nodes.len() != array.contact_count() {
        out.push(format!("length {} != {}", nodes.len(), array.contact_count()));
        return out;
    }
    if group_of(spacings[0]) != Some(c(0).group) {
        out.push("seed group".into());
    }
    for i in 1..nodes.len() {
        let d = spacings[i - 1];
        let dist = (c(i).pos - c(i - 1).pos).norm();
        if !(p.gamma1 * d < dist && dist < p.gamma2 * d) {
            out.push(format!("distance {dist} at {i} outside ({}, {})", p.gamma1 * d, p.gamma2 * d));
        }
        if group_of(d) != Some(c(i).group) {
            out.push(format!("group at {i}"));
        }
        for j in 0..i {
            let (a, b) = (c(i), c(j));
            if (a.group, a.roi, a.k) == (b.group, b.roi, b.k) {
                out.push(format!("site reused at {i}"));
            }
            if j + 1 < i && (a.group, a.roi) == (b.group, b.roi) && (c(i - 1).group, c(i - 1).roi) != (a.group, a.roi) {
                out.push(format!("region re-entered at {i}"));
            }
        }
        if i >= 2 {
            let (x, y, z) = (c(i - 2), c(i - 1), c(i));
            let same = (x.group, x.roi) == (z.group, z.roi) && (y.group, y.roi) == (z.group, z.roi);
            if same && !((x.k < y.k && y.k < z.k) || (x.k > y.k && y.k > z.k)) {
                out.push(format!("axis order at {i}"));
            }
        }
    }
    out
}

pub const G: usize = 40;

/// Smooth bowl-shaped curves with minima ordered apical (high grid index) to basal.
pub fn random_set(k: usize, seed: u64) -> DvfSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let freqs = log_grid(20000.0, 100.0, G).unwrap();
    let curves = (0..k)
        .map(|i| {
            let c = (G - 1) as f64 * (1.0 - (i as f64 + 0.5) / k as f64) + rng.random_range(-2.0..2.0);
            let a = rng.random_range(0.05..1.5);
            let b = rng.random_range(2.0..8.0);
            (0..G).map(|g| a + b * ((g as f64 - c) / G as f64).powi(2) + rng.random_range(0.0..0.05)).collect()
        })
        .collect();
    DvfSet::from_curves(freqs, curves).unwrap()
}

pub fn random_weights(rng: &mut ChaCha8Rng) -> WeightSet {
    let mut w = [0.0; 10];
    for x in w.iter_mut() {
        if rng.random_bool(0.7) {
            *x = rng.random_range(0.0..2.0);
        }
    }
    WeightSet::new(Family::Cochlear, w, 0.0).unwrap()
}

pub fn argmin_of(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |b, g| if v[g] < v[b] { g } else { b })
}

/// Features written out directly from their definitions, all-electrode envelope.
pub fn oracle_features(s: &DvfSet, on: &[bool]) -> [f64; 10] {
    let k = s.curves.len();
    let c = |i: usize| &s.curves[i].distances;
    let env = |i: usize| -> Option<Vec<f64>> {
        (k > 1).then(|| (0..G).map(|g| (0..k).filter(|&j| j != i).map(|j| c(j)[g]).fold(f64::INFINITY, f64::min)).collect())
    };
    let floor = |x: f64| if x < 1e-9 { 1e-9 } else { x };
    let ka = on.iter().filter(|&&a| a).count();
    let (mut f3, mut f4, mut f5, mut ki, mut f7, mut ks) = (0.0, 0.0, 0.0, 0, 0.0, 0);
    let first = on.iter().position(|&a| a).unwrap();
    let last = on.iter().rposition(|&a| a).unwrap();
    for i in 0..k {
        let d = c(i).iter().cloned().fold(f64::INFINITY, f64::min);
        let m = argmin_of(c(i));
        let (area, ratio) = match env(i) {
            Some(e) => {
                let area: f64 = (0..G).map(|g| (e[g] - c(i)[g]).max(0.0).powi(2)).sum();
                let l: f64 = (0..m).map(|g| (e[g] - c(i)[g]).max(0.0)).sum();
                let r: f64 = (m + 1..G).map(|g| (e[g] - c(i)[g]).max(0.0)).sum();
                (area, if l.max(r) == 0.0 { 1.0 } else { l.min(r) / l.max(r) })
            }
            None => (0.0, 1.0),
        };
        let lift = |j: usize| (c(j)[m] - c(i)[m]).max(0.0);
        let depth = match (i > 0, i + 1 < k) {
            (true, true) => lift(i - 1).min(lift(i + 1)),
            (true, false) => lift(i - 1),
            (false, true) => lift(i + 1),
            _ => 0.0,
        };
        let t = floor(-0.2660 + 1.4125 * d + 0.5398 * d * d);
        let rr = floor(0.0328 + 0.005 * d + 0.0351 * d * d);
        let (a, dp) = (floor(area), floor(depth));
        if on[i] {
            f3 += (-t / a).exp();
            f4 += (-dp / rr).exp();
            let freq = s.freqs[m];
            f5 += (d - (72.81 - 17.29 * freq.log10())).max(0.0);
            if (0..k).any(|j| j != i && on[j] && c(j)[m] < c(i)[m]) {
                ki += 1;
            }
            if i > first && i < last {
                f7 += (-ratio).exp();
                ks += 1;
            }
        } else {
            f3 += (-a / t).exp();
            f4 += (-rr / dp).exp();
        }
    }
    let f7 = if ks == 0 { 0.0 } else { f7 / ks as f64 };
    let (f3, f4) = (f3 / k as f64, f4 / k as f64);
    [if on[0] { 0.0 } else { 1.0 }, 1.0 / ka as f64, f3, f4, f5, ki as f64 / ka as f64, f7, f3.sqrt(), f4.sqrt(), f7.sqrt()]
}

pub fn oracle_select(s: &DvfSet, w: &WeightSet) -> (u32, f64) {
    let k = s.curves.len();
    let mut best: Option<(u32, f64)> = None;
    for bits in 1u32..1 << k {
        let on: Vec<bool> = (0..k).map(|i| bits >> i & 1 == 1).collect();
        let f = oracle_features(s, &on);
        let cost: f64 = (0..10).map(|i| w.weights[i] * f[i]).sum();
        let better = match best {
            None => true,
            Some((b, bc)) => {
                let order = |m: u32| (0..k).map(|i| m >> i & 1).collect::<Vec<_>>();
                cost < bc || cost == bc && (bits.count_ones() > b.count_ones() || bits.count_ones() == b.count_ones() && order(bits) < order(b))
            }
        };
        if better {
            best = Some((bits, cost));
        }
    }
    best.unwrap()
}

/// Candidate with explicit per-point values.
pub fn candidate(points: Vec<Vec3>, doi: Vec<f64>, blob_apical: Vec<f64>, blob_basal: Vec<f64>) -> CenterlineCandidate {
    let arc = cumulative_length(&points);
    let doi_max = doi.iter().cloned().filter(|x| x.is_finite()).fold(0.0, f64::max);
    CenterlineCandidate {
        layout: vec![(0, false)],
        source: (0..points.len()).map(|index| Source::Axis { axis: 0, index }).collect(),
        points,
        doi,
        blob_apical,
        blob_basal,
        arc,
        doi_max,
    }
}

/// Independent transcription of the endpoint cost.
pub fn oracle_cost(c: &CenterlineCandidate, i: usize, j: usize, s: &CostScale, p: &ClParams) -> Option<f64> {
    if i == j || c.doi[i] <= c.doi[j] || c.doi[i].is_nan() || c.doi[j].is_nan() {
        return None;
    }
    let deficit = |max: f64, v: f64| if max > 0.0 { (max - v) / max } else { 0.0 };
    let len = (c.arc[i] - c.arc[j]).abs();
    let r = len / s.expected_length;
    let w = if r < p.mu4 {
        p.mu3 + p.mu5 * (p.mu4 - r)
    } else if r > 1.0 {
        p.mu3 + p.mu5 * (r - 1.0)
    } else {
        p.mu3
    };
    let depth = if c.doi_max > 0.0 { (c.doi_max - c.doi[i]) / c.doi_max } else { 0.0 };
    Some(
        deficit(s.blob_apical_max, c.blob_apical[i])
            + p.mu1 * deficit(s.blob_basal_max, c.blob_basal[j])
            + (p.mu2 * depth + (len - s.expected_length).abs() * w),
    )
}

pub fn brute_force(cands: &[CenterlineCandidate], s: &CostScale, p: &ClParams) -> Option<(usize, usize, usize, f64)> {
    let mut best: Option<(usize, usize, usize, f64)> = None;
    for (k, c) in cands.iter().enumerate() {
        for i in 0..c.points.len() {
            for j in 0..c.points.len() {
                if let Some(cost) = oracle_cost(c, i, j, s, p) {
                    if best.is_none_or(|b| cost < b.3) {
                        best = Some((k, i, j, cost));
                    }
                }
            }
        }
    }
    best
}

/// Random centerline candidates with their case-wide normalizers.
pub fn random_centerline_instance(seed: u64) -> (Vec<CenterlineCandidate>, CostScale) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cands: Vec<CenterlineCandidate> = (0..rng.random_range(1..5))
        .map(|_| {
            let n = rng.random_range(2..40);
            let mut v = || -> Vec<f64> { (0..n).map(|_| rng.random_range(0.0..1.0)).collect() };
            let (ba, bb) = (v(), v());
            let points = (0..n)
                .map(|_| vec3(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-2.0..2.0)))
                .collect();
            let doi = (0..n).map(|_| if rng.random_bool(0.2) { f64::NAN } else { rng.random_range(0.0..700.0) }).collect();
            candidate(points, doi, ba, bb)
        })
        .collect();
    let max = |f: fn(&CenterlineCandidate) -> &Vec<f64>| cands.iter().flat_map(|c| f(c).iter().cloned()).fold(0.0, f64::max);
    let s = CostScale {
        blob_apical_max: max(|c| &c.blob_apical),
        blob_basal_max: max(|c| &c.blob_basal),
        expected_length: rng.random_range(1.0..20.0),
    };
    (cands, s)
}
