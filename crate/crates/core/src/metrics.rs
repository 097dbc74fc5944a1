//! Localization error metrics, per-contact pose statistics, the
//! coordinate-descent parameter sweep, and evaluation reports.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::cochlea::CochleaModel;
use crate::error::{Error, Result};
use crate::geom::{point_polyline_distance, Vec3};
use crate::result::LocalizationResult;

/// Mean and maximum of a set of distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub max: f64,
}

/// Symmetric curve distance: vertex-to-polyline distances of each curve
/// against the other, pooled.
pub fn curve_distance(c1: &[Vec3], c2: &[Vec3]) -> Result<Summary> {
    if c1.is_empty() || c2.is_empty() {
        return Err(Error::Empty("curve distance needs two nonempty curves".into()));
    }
    let one_way = |a: &[Vec3], b: &[Vec3]| {
        a.iter().map(|p| point_polyline_distance(p, b)).fold((0.0, 0.0f64), |(s, m), d| (s + d, m.max(d)))
    };
    let (s12, m12) = one_way(c1, c2);
    let (s21, m21) = one_way(c2, c1);
    Ok(Summary { mean: (s12 + s21) / (c1.len() + c2.len()) as f64, max: m12.max(m21) })
}

/// Index-matched contact distances.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactErrors {
    pub per_contact: Vec<f64>,
    pub mean: f64,
    pub max: f64,
}

pub fn electrode_errors(a: &LocalizationResult, b: &LocalizationResult) -> Result<ContactErrors> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch { expected: a.len(), found: b.len() });
    }
    if a.is_empty() {
        return Err(Error::Empty("no contacts to compare".into()));
    }
    let per_contact: Vec<f64> = a.contacts.iter().zip(&b.contacts).map(|(p, q)| (p - q).norm()).collect();
    let mean = per_contact.iter().sum::<f64>() / per_contact.len() as f64;
    let max = per_contact.iter().cloned().fold(0.0, f64::max);
    Ok(ContactErrors { per_contact, mean, max })
}

/// Position of one contact relative to the cochlea model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    /// Angular depth of insertion (degrees).
    pub doi: f64,
    /// Distance to the modiolar surface (mm).
    pub dtom: f64,
    /// Signed distance to the basilar membrane (mm), positive toward scala vestibuli.
    pub dtobm: f64,
}

pub fn pose_stats(r: &LocalizationResult, m: &CochleaModel) -> Result<Vec<Pose>> {
    r.contacts
        .iter()
        .map(|p| Ok(Pose { doi: m.doi_of_point(p)?, dtom: m.modiolar_distance(p), dtobm: m.basilar_signed_distance(p) }))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    /// Grid points per parameter.
    pub steps: usize,
    pub max_passes: usize,
    /// Fixed `(lo, hi)` per parameter; `None` sweeps `[0, 2 * current]`.
    pub ranges: Option<Vec<(f64, f64)>>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { steps: 11, max_passes: 10, ranges: None }
    }
}

/// An accepted sweep move; the first entry records the starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepStep {
    pub pass: usize,
    /// Index of the moved parameter; `None` for the starting point.
    pub param: Option<usize>,
    pub params: Vec<f64>,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub params: Vec<f64>,
    pub error: f64,
    pub trace: Vec<SweepStep>,
}

fn key(e: f64) -> f64 {
    if e.is_nan() {
        f64::INFINITY
    } else {
        e
    }
}

/// Coordinate descent: each parameter in turn moves to the grid point with
/// the lowest objective, keeping its value on ties, until a full pass moves
/// nothing or the pass limit is reached.
pub fn parameter_sweep<F>(objective: F, start: &[f64], opts: &SweepOptions) -> Result<SweepResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = start.len();
    if opts.steps < 2 {
        return Err(Error::InvalidArgument("a sweep needs at least two grid points".into()));
    }
    if let Some(r) = &opts.ranges {
        if r.len() != n {
            return Err(Error::SizeMismatch { expected: n, found: r.len() });
        }
    }
    let mut params = start.to_vec();
    let mut error = key(objective(&params));
    let mut trace = vec![SweepStep { pass: 0, param: None, params: params.clone(), error }];
    for pass in 1..=opts.max_passes {
        let mut moved = false;
        for i in 0..n {
            let (lo, hi) = match &opts.ranges {
                Some(r) => r[i],
                None => (0.0, 2.0 * params[i]),
            };
            if lo == hi {
                continue;
            }
            let grid: Vec<f64> = (0..opts.steps).map(|s| lo + (hi - lo) * s as f64 / (opts.steps - 1) as f64).collect();
            let scores: Vec<f64> = grid
                .par_iter()
                .map(|&v| {
                    let mut p = params.clone();
                    p[i] = v;
                    key(objective(&p))
                })
                .collect();
            let best = (0..scores.len()).fold(0, |b, s| if scores[s] < scores[b] { s } else { b });
            if scores[best] < error && grid[best] != params[i] {
                params[i] = grid[best];
                error = scores[best];
                moved = true;
                trace.push(SweepStep { pass, param: Some(i), params: params.clone(), error });
            }
        }
        if !moved {
            break;
        }
    }
    Ok(SweepResult { params, error, trace })
}

/// Error histogram bin edges as fractions of the voxel diagonal.
pub const BIN_EDGES: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

/// Counts of errors within 25, 50, 75 and 100% of `diagonal`, and above it.
pub fn error_bins(errors: &[f64], diagonal: f64) -> [usize; 5] {
    let mut bins = [0; 5];
    for &e in errors {
        let b = BIN_EDGES.iter().position(|&edge| e <= edge * diagonal).unwrap_or(4);
        bins[b] += 1;
    }
    bins
}

/// One evaluated case; `errors` is `None` when localization failed.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseReport {
    pub name: String,
    pub errors: Option<ContactErrors>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub diagonal: f64,
    pub cases: Vec<CaseReport>,
}

impl EvalReport {
    /// Every per-contact error of the successful cases.
    pub fn all_errors(&self) -> Vec<f64> {
        self.cases.iter().filter_map(|c| c.errors.as_ref()).flat_map(|e| e.per_contact.iter().cloned()).collect()
    }

    pub fn bins(&self) -> [usize; 5] {
        error_bins(&self.all_errors(), self.diagonal)
    }

    /// `case,mean_mm,max_mm,seconds,status` rows.
    pub fn cases_csv(&self) -> String {
        let mut s = String::from("case,mean_mm,max_mm,seconds,status\n");
        for c in &self.cases {
            match &c.errors {
                Some(e) => writeln!(s, "{},{},{},{},ok", c.name, e.mean, e.max, c.seconds),
                None => writeln!(s, "{},,,{},failed", c.name, c.seconds),
            }
            .unwrap();
        }
        s
    }

    /// Histogram of per-contact errors in voxel-diagonal bins.
    pub fn summary_csv(&self) -> String {
        let bins = self.bins();
        let mut s = String::from("bin,count\n");
        for (edge, count) in BIN_EDGES.iter().zip(&bins) {
            writeln!(s, "<={}%,{}", edge * 100.0, count).unwrap();
        }
        writeln!(s, ">100%,{}", bins[4]).unwrap();
        let failed = self.cases.iter().filter(|c| c.errors.is_none()).count();
        writeln!(s, "failed_cases,{failed}").unwrap();
        s
    }

    /// Bar chart of the histogram.
    pub fn to_svg(&self) -> String {
        let bins = self.bins();
        let labels = ["25%", "50%", "75%", "100%", ">100%"];
        let top = bins.iter().cloned().max().unwrap_or(0).max(1) as f64;
        let (w, h, pad) = (400.0, 240.0, 30.0);
        let bar = (w - 2.0 * pad) / bins.len() as f64;
        let mut s = format!(r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">"#);
        s.push('\n');
        for (i, (&c, label)) in bins.iter().zip(labels).enumerate() {
            let bh = (h - 2.0 * pad) * c as f64 / top;
            let x = pad + i as f64 * bar;
            writeln!(
                s,
                r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="steelblue"/><text x="{:.1}" y="{:.1}" font-size="10">{label} ({c})</text>"#,
                x + 2.0,
                h - pad - bh,
                bar - 4.0,
                bh,
                x + 4.0,
                h - pad + 14.0
            )
            .unwrap();
        }
        s.push_str("</svg>\n");
        s
    }
}
