//! Centerline localizer for closely spaced arrays: join medial axes into
//! centerline candidates, pick the apical and basal endpoints by exhaustive
//! search, then place contacts by their known spacing.

use rayon::prelude::*;

use crate::array::ArrayModel;
use crate::cochlea::CochleaModel;
use crate::error::{Error, Result, Stage, StageExt};
use crate::filters::{blob_filter, scale_range, vesselness};
use crate::geom::{cumulative_length, point_at_length, smooth_polyline, Vec3};
use crate::graph::{BLOB_S2, BLOB_S3, UPSAMPLED_SPACING};
use crate::medial_axis::{label_bool, skeletonize_voxels, MedialAxisLine};
use crate::params::{scaled_percentile, ClParams};
use crate::result::LocalizationResult;
use crate::volume::{BoundingBox, Volume3};

/// Most medial axes joined into candidates.
pub const AXIS_CAP: usize = 5;
/// Bridge segments are sampled at most this far apart (mm).
pub const BRIDGE_STEP: f64 = 0.1;
/// Half window of the moving average applied to medial axes.
pub const SMOOTH_HALF_WINDOW: usize = 3;
pub const VESSEL_ALPHA: f64 = 0.5;
pub const VESSEL_BETA: f64 = 0.5;
pub const VESSEL_C: f64 = 500.0;

pub fn vessel_scales() -> Vec<f64> {
    scale_range(0.5, 0.6, 0.05)
}

/// Where a candidate's point came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Axis { axis: usize, index: usize },
    Bridge,
}

/// Axis order and orientation of a candidate; `true` means reversed.
pub type Layout = Vec<(usize, bool)>;

#[derive(Debug, Clone, PartialEq)]
pub struct CenterlineCandidate {
    pub layout: Layout,
    pub points: Vec<Vec3>,
    pub source: Vec<Source>,
    pub doi: Vec<f64>,
    /// Blob response at the apical contact scale.
    pub blob_apical: Vec<f64>,
    /// Blob response at the basal contact scale.
    pub blob_basal: Vec<f64>,
    /// Cumulative arc length.
    pub arc: Vec<f64>,
    /// Deepest finite DOI on the candidate.
    pub doi_max: f64,
}

/// All axis orders and orientations, one per global-reversal pair.
pub fn enumerate_layouts(count: usize) -> Result<Vec<Layout>> {
    if count == 0 {
        return Err(Error::Empty("no medial axes to join".into()));
    }
    if count > AXIS_CAP {
        return Err(Error::TooManyAxes { count, cap: AXIS_CAP });
    }
    let mut out = Vec::new();
    let mut used = vec![false; count];
    let mut seq = Vec::new();
    fn rec(count: usize, used: &mut [bool], seq: &mut Layout, out: &mut Vec<Layout>) {
        if !seq.is_empty() {
            let keep = if seq.len() == 1 { !seq[0].1 } else { seq[0].0 < seq[seq.len() - 1].0 };
            if keep {
                out.push(seq.clone());
            }
        }
        for a in 0..count {
            if used[a] {
                continue;
            }
            used[a] = true;
            for rev in [false, true] {
                seq.push((a, rev));
                rec(count, used, seq, out);
                seq.pop();
            }
            used[a] = false;
        }
    }
    rec(count, &mut used, &mut seq, &mut out);
    Ok(out)
}

/// Per-point values of the medial axes, sampled once.
#[derive(Debug, Clone)]
pub struct AxisValues {
    pub doi: Vec<Vec<f64>>,
    pub blob_apical: Vec<Vec<f64>>,
    pub blob_basal: Vec<Vec<f64>>,
}

impl AxisValues {
    pub fn sample(axes: &[MedialAxisLine], model: &CochleaModel, blob_apical: &Volume3, blob_basal: &Volume3) -> Self {
        let doi = axes
            .iter()
            .map(|a| a.points.iter().map(|p| model.doi_of_point(p).unwrap_or(f64::NAN)).collect())
            .collect();
        let sample = |v: &Volume3| axes.iter().map(|a| a.points.iter().map(|p| v.sample(p)).collect()).collect();
        AxisValues { doi, blob_apical: sample(blob_apical), blob_basal: sample(blob_basal) }
    }
}

/// Builds one candidate: axes joined end to start by straight bridges.
pub fn build_candidate(
    layout: &[(usize, bool)],
    axes: &[MedialAxisLine],
    values: &AxisValues,
    blob_apical: &Volume3,
    blob_basal: &Volume3,
) -> CenterlineCandidate {
    let mut c = CenterlineCandidate {
        layout: layout.to_vec(),
        points: Vec::new(),
        source: Vec::new(),
        doi: Vec::new(),
        blob_apical: Vec::new(),
        blob_basal: Vec::new(),
        arc: Vec::new(),
        doi_max: 0.0,
    };
    for &(a, rev) in layout {
        let n = axes[a].points.len();
        let order: Box<dyn Iterator<Item = usize>> = if rev { Box::new((0..n).rev()) } else { Box::new(0..n) };
        let mut first = true;
        for idx in order {
            let p = axes[a].points[idx];
            if first && !c.points.is_empty() {
                let from = *c.points.last().unwrap();
                let d0 = *c.doi.last().unwrap();
                let d1 = values.doi[a][idx];
                let steps = ((p - from).norm() / BRIDGE_STEP).ceil() as usize;
                for s in 1..steps {
                    let t = s as f64 / steps as f64;
                    let q = from + (p - from) * t;
                    c.points.push(q);
                    c.source.push(Source::Bridge);
                    c.doi.push(d0 + (d1 - d0) * t);
                    c.blob_apical.push(blob_apical.sample(&q));
                    c.blob_basal.push(blob_basal.sample(&q));
                }
            }
            first = false;
            c.points.push(p);
            c.source.push(Source::Axis { axis: a, index: idx });
            c.doi.push(values.doi[a][idx]);
            c.blob_apical.push(values.blob_apical[a][idx]);
            c.blob_basal.push(values.blob_basal[a][idx]);
        }
    }
    c.arc = cumulative_length(&c.points);
    c.doi_max = c.doi.iter().cloned().filter(|x| x.is_finite()).fold(0.0, f64::max);
    c
}

pub fn enumerate_centerline_candidates(
    axes: &[MedialAxisLine],
    values: &AxisValues,
    blob_apical: &Volume3,
    blob_basal: &Volume3,
) -> Result<Vec<CenterlineCandidate>> {
    Ok(enumerate_layouts(axes.len())?
        .par_iter()
        .map(|l| build_candidate(l, axes, values, blob_apical, blob_basal))
        .collect())
}

/// Case-wide normalizers: blob maxima over all medial-axis points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostScale {
    pub blob_apical_max: f64,
    pub blob_basal_max: f64,
    /// Expected straight array length.
    pub expected_length: f64,
}

impl CostScale {
    pub fn new(values: &AxisValues, array: &ArrayModel) -> Self {
        let max = |v: &[Vec<f64>]| v.iter().flatten().cloned().filter(|x| x.is_finite()).fold(0.0, f64::max);
        CostScale {
            blob_apical_max: max(&values.blob_apical),
            blob_basal_max: max(&values.blob_basal),
            expected_length: array.straight_length(),
        }
    }
}

fn normalized_deficit(max: f64, v: f64) -> f64 {
    if max > 0.0 {
        (max - v) / max
    } else {
        0.0
    }
}

/// Length penalty weight for a candidate of length `len`.
pub fn length_weight(len: f64, expected: f64, p: &ClParams) -> f64 {
    let r = len / expected;
    if r < p.mu4 {
        p.mu3 + p.mu5 * (p.mu4 - r)
    } else if r > 1.0 {
        p.mu3 + p.mu5 * (r - 1.0)
    } else {
        p.mu3
    }
}

/// Cost of the array spanning apical point `i` and basal point `j`, or `None`
/// when the apical point is not deeper than the basal one.
pub fn array_candidate_cost(c: &CenterlineCandidate, i: usize, j: usize, s: &CostScale, p: &ClParams) -> Option<f64> {
    if i == j || !(c.doi[i] > c.doi[j]) {
        return None;
    }
    let cost_i = normalized_deficit(s.blob_apical_max, c.blob_apical[i])
        + p.mu1 * normalized_deficit(s.blob_basal_max, c.blob_basal[j]);
    let len = (c.arc[i] - c.arc[j]).abs();
    let depth = if c.doi_max > 0.0 { (c.doi_max - c.doi[i]) / c.doi_max } else { 0.0 };
    let cost_s = p.mu2 * depth + (len - s.expected_length).abs() * length_weight(len, s.expected_length, p);
    Some(cost_i + cost_s)
}

/// The selected candidate and endpoint indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterlineChoice {
    pub candidate: usize,
    pub apical: usize,
    pub basal: usize,
    pub cost: f64,
}

fn better(a: &CenterlineChoice, b: &CenterlineChoice) -> bool {
    a.cost
        .total_cmp(&b.cost)
        .then((a.candidate, a.apical, a.basal).cmp(&(b.candidate, b.apical, b.basal)))
        .is_lt()
}

/// Exhaustive search over candidates and endpoint pairs.
pub fn find_centerline(cands: &[CenterlineCandidate], s: &CostScale, p: &ClParams) -> Result<CenterlineChoice> {
    if cands.is_empty() {
        return Err(Error::Empty("no centerline candidates".into()));
    }
    cands
        .par_iter()
        .enumerate()
        .filter_map(|(k, c)| {
            let mut best: Option<CenterlineChoice> = None;
            let n = c.points.len();
            for i in 0..n {
                for j in 0..n {
                    if let Some(cost) = array_candidate_cost(c, i, j, s, p) {
                        let cand = CenterlineChoice { candidate: k, apical: i, basal: j, cost };
                        if best.as_ref().is_none_or(|b| better(&cand, b)) {
                            best = Some(cand);
                        }
                    }
                }
            }
            best
        })
        .reduce_with(|a, b| if better(&b, &a) { b } else { a })
        .ok_or(Error::NoAdmissibleCandidate)
}

/// Places contacts along `line` (apical end first) at the array spacings,
/// shrinking all spacings uniformly when the line is shorter than the array.
pub fn resample_by_spacing(line: &[Vec3], array: &ArrayModel) -> Result<Vec<Vec3>> {
    let cum = cumulative_length(line);
    let total = cum.last().copied().unwrap_or(0.0);
    if !(total > 0.0) {
        return Err(Error::Degenerate("centerline has zero length".into()));
    }
    let expected = array.straight_length();
    let scale = if total < expected { total / expected } else { 1.0 };
    let mut s = 0.0;
    let mut out = vec![line[0]];
    for d in &array.spacings {
        s += d * scale;
        out.push(point_at_length(line, &cum, s));
    }
    Ok(out)
}

/// Points of candidate `c` from index `from` to index `to`, inclusive.
pub fn span(points: &[Vec3], from: usize, to: usize) -> Vec<Vec3> {
    if from <= to {
        points[from..=to].to_vec()
    } else {
        points[to..=from].iter().rev().copied().collect()
    }
}

/// Feature volumes on the upsampled VOI.
#[derive(Debug, Clone)]
pub struct ClFeatures {
    pub intensity: Volume3,
    pub vessel: Volume3,
    pub t_i: f64,
    pub t_v: f64,
}

impl ClFeatures {
    pub fn compute(voi_up: &Volume3, p: &ClParams) -> Result<Self> {
        let [nx, ny, nz] = voi_up.dims();
        let [sx, sy, sz] = voi_up.spacing();
        let crop = (nx as f64 * sx) * (ny as f64 * sy) * (nz as f64 * sz);
        let t_i = voi_up.percentile_threshold(scaled_percentile(p.alpha_i, p.voi_volume, crop))?;
        let vessel = vesselness(voi_up, &vessel_scales(), VESSEL_ALPHA, VESSEL_BETA, VESSEL_C)?;
        let t_v = vessel.percentile_threshold(scaled_percentile(p.alpha_v, p.voi_volume, crop))?;
        if !(t_i > 0.0) {
            return Err(Error::Empty("intensity threshold is not positive".into()));
        }
        Ok(ClFeatures { intensity: voi_up.clone(), vessel, t_i, t_v })
    }

    /// `(1 - rho) (I - T_I) / T_I + rho (I_V - T_V) / T_V`; the vesselness term
    /// is dropped when its threshold is zero.
    pub fn feature_image(&self, p: &ClParams) -> Result<Volume3> {
        let data = self
            .intensity
            .data()
            .iter()
            .zip(self.vessel.data())
            .map(|(&i, &v)| {
                let ti = (1.0 - p.rho) * (i as f64 - self.t_i) / self.t_i;
                let tv = if self.t_v > 0.0 { p.rho * (v as f64 - self.t_v) / self.t_v } else { 0.0 };
                (ti + tv) as f32
            })
            .collect();
        self.intensity.with_data(data)
    }
}

#[derive(Debug, Clone)]
pub struct ClOutput {
    /// Contacts on the smoothed centerline.
    pub result: LocalizationResult,
    /// Contacts on the raw medial-axis points between the same endpoints.
    pub coarse: LocalizationResult,
    pub centerline: Vec<Vec3>,
    pub choice: CenterlineChoice,
    pub axes: Vec<MedialAxisLine>,
}

/// Medial axes of the `AXIS_CAP` largest regions of the thresholded feature image.
pub fn cl_axes(feature: &Volume3) -> Result<Vec<MedialAxisLine>> {
    let mask: Vec<bool> = feature.data().iter().map(|&v| v > 0.0).collect();
    let labels = label_bool(feature.dims(), &mask);
    if labels.components.is_empty() {
        return Err(Error::Empty("feature image has no positive voxels".into()));
    }
    labels
        .components
        .iter()
        .take(AXIS_CAP)
        .enumerate()
        .map(|(j, c)| skeletonize_voxels(feature, &c.voxels, j))
        .collect()
}

pub fn localize_cl(
    volume: &Volume3,
    bbox: &BoundingBox,
    array: &ArrayModel,
    model: &CochleaModel,
    p: &ClParams,
) -> Result<ClOutput> {
    p.validate()?;
    let voi = volume.crop(bbox).stage(Stage::Crop)?;
    let up = voi.resample_trilinear([UPSAMPLED_SPACING; 3]).stage(Stage::Crop)?;
    let f = ClFeatures::compute(&up, p).stage(Stage::Features)?;
    let fi = f.feature_image(p).stage(Stage::Features)?;
    let raw_axes = cl_axes(&fi).stage(Stage::Candidates)?;
    let axes: Vec<MedialAxisLine> = raw_axes
        .iter()
        .map(|a| MedialAxisLine { points: smooth_polyline(&a.points, SMOOTH_HALF_WINDOW), roi: a.roi })
        .collect();

    let blob_a = blob_filter(&up, &[array.apical_radius], f.t_i, BLOB_S2, BLOB_S3).stage(Stage::Features)?;
    let blob_b = if array.basal_radius == array.apical_radius {
        blob_a.clone()
    } else {
        blob_filter(&up, &[array.basal_radius], f.t_i, BLOB_S2, BLOB_S3).stage(Stage::Features)?
    };
    let values = AxisValues::sample(&axes, model, &blob_a, &blob_b);
    let scale = CostScale::new(&values, array);
    let cands = enumerate_centerline_candidates(&axes, &values, &blob_a, &blob_b).stage(Stage::Centerline)?;
    let choice = find_centerline(&cands, &scale, p).stage(Stage::Centerline)?;
    let cand = &cands[choice.candidate];
    let centerline = span(&cand.points, choice.apical, choice.basal);
    let contacts = resample_by_spacing(&centerline, array).stage(Stage::Resampling)?;

    // the same span over unsmoothed axis points (bridges stay straight)
    let raw_points: Vec<Vec3> = cand
        .source
        .iter()
        .zip(&cand.points)
        .map(|(s, p)| match s {
            Source::Axis { axis, index } => raw_axes[*axis].points[*index],
            Source::Bridge => *p,
        })
        .collect();
    let coarse_line = span(&raw_points, choice.apical, choice.basal);
    let coarse = resample_by_spacing(&coarse_line, array).stage(Stage::Resampling)?;

    let doi = |pts: &[Vec3]| pts.iter().map(|c| model.doi_of_point(c).unwrap_or(f64::NAN)).collect::<Vec<_>>();
    let d_fine = doi(&contacts);
    let d_coarse = doi(&coarse);
    Ok(ClOutput {
        result: LocalizationResult::new(&array.name, contacts, Some(d_fine)),
        coarse: LocalizationResult::new(&array.name, coarse, Some(d_coarse)),
        centerline,
        choice,
        axes,
    })
}
