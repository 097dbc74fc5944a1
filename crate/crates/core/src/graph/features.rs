//! Feature volumes and candidate-of-interest generation.

use crate::array::ArrayModel;
use crate::cochlea::CochleaModel;
use crate::error::{Error, Result};
use crate::filters::{blob_filter, scale_range, vesselness};
use crate::medial_axis::{label_bool, skeletonize_voxels, MedialAxisLine};
use crate::params::{scaled_percentile, GpParams};
use crate::volume::Volume3;

use super::Coi;

/// Blob constants for the second and third factors.
pub const BLOB_S2: f64 = 5000.0;
pub const BLOB_S3: f64 = 40000.0;
/// Vesselness scale for the candidate tubularity feature (mm).
pub const COI_VESSEL_SCALE: f64 = 0.25;
/// Working grid spacing (mm).
pub const UPSAMPLED_SPACING: f64 = 0.1;
/// Turn-boundary rule: a neighborhood DOI spread this large gets a twin.
pub const TWIN_SPREAD_DEG: f64 = 180.0;

/// Blob scales spanning typical contact radii (mm).
pub fn blob_scales() -> Vec<f64> {
    scale_range(0.2, 0.4, 0.04)
}

/// Parameter-independent volumes on the upsampled VOI.
#[derive(Debug, Clone)]
pub struct GpFeatures {
    pub intensity: Volume3,
    pub blob: Volume3,
    pub vessel: Volume3,
    pub t_i: f64,
    pub t_b: f64,
    pub t_b_seed: f64,
    /// Intensity percentile the blob volume was built with.
    pub alpha_i: f64,
}

impl GpFeatures {
    pub fn compute(voi_up: &Volume3, p: &GpParams) -> Result<Self> {
        let [nx, ny, nz] = voi_up.dims();
        let [sx, sy, sz] = voi_up.spacing();
        let crop = (nx as f64 * sx) * (ny as f64 * sy) * (nz as f64 * sz);
        let pct = |a: f64| scaled_percentile(a, p.voi_volume, crop);
        let t_i = voi_up.percentile_threshold(pct(p.alpha_i))?;
        if !(t_i > 0.0) {
            return Err(Error::NoCandidates(f64::NAN));
        }
        let blob = blob_filter(voi_up, &blob_scales(), t_i, BLOB_S2, BLOB_S3)?;
        let vessel = vesselness(voi_up, &[COI_VESSEL_SCALE], 0.5, 0.5, 500.0)?;
        let t_b = blob.percentile_threshold(pct(p.alpha_b))?;
        let t_b_seed = blob.percentile_threshold(pct(p.alpha_b_seed))?;
        Ok(GpFeatures { intensity: voi_up.clone(), blob, vessel, t_i, t_b, t_b_seed, alpha_i: p.alpha_i })
    }

    /// Feature image for spacing `d`; positive voxels form the regions of interest.
    pub fn feature_image(&self, d: f64, p: &GpParams) -> Result<Volume3> {
        let li = p.lambda_i(d);
        let lb = p.lambda_b(d);
        if li == 0.0 && lb == 0.0 {
            return Err(Error::EsdOutOfRange(d));
        }
        if !(self.t_i > 0.0 && self.t_b > 0.0) {
            return Err(Error::NoCandidates(d));
        }
        let data = self
            .intensity
            .data()
            .iter()
            .zip(self.blob.data())
            .map(|(&i, &b)| {
                (lb * (b as f64 - self.t_b) / self.t_b + li * (i as f64 - self.t_i) / self.t_i) as f32
            })
            .collect();
        self.intensity.with_data(data)
    }
}

/// Regions, medial axes, and candidates for every spacing group.
#[derive(Debug, Clone)]
pub struct CoiSet {
    /// Unique spacings, descending; group `m` belongs to `esd[m]`.
    pub esd: Vec<f64>,
    pub cois: Vec<Coi>,
    /// Medial axes per group, indexed by region id.
    pub axes: Vec<Vec<MedialAxisLine>>,
    pub i_max: f64,
    pub ib_max: f64,
    pub iv_max: f64,
}

pub fn generate_cois(
    f: &GpFeatures,
    array: &ArrayModel,
    model: &CochleaModel,
    p: &GpParams,
    twin_h: f64,
) -> Result<CoiSet> {
    let esd = array.esd_values();
    let mut cois = Vec::new();
    let mut axes_all = Vec::new();
    for (m, &d) in esd.iter().enumerate() {
        let fi = f.feature_image(d, p)?;
        let mask: Vec<bool> = fi.data().iter().map(|&v| v > 0.0).collect();
        let labels = label_bool(fi.dims(), &mask);
        let mut axes = Vec::with_capacity(labels.components.len());
        let mut count = 0;
        for (j, comp) in labels.components.iter().enumerate() {
            let axis = skeletonize_voxels(&fi, &comp.voxels, j)?;
            for (k, pos) in axis.points.iter().enumerate() {
                let [a, b, c] = fi.nearest_voxel(pos);
                let idx = fi.index(a, b, c);
                // points beyond the model's reach cannot be contacts
                let (lo, hi) = match model.doi_neighborhood(pos, twin_h) {
                    Ok(r) => r,
                    Err(Error::OutsideModel(_)) => continue,
                    Err(e) => return Err(e),
                };
                let base = Coi {
                    pos: *pos,
                    roi: j,
                    k,
                    group: m,
                    intensity: f.intensity.data()[idx] as f64,
                    blob: f.blob.data()[idx] as f64,
                    vessel: f.vessel.data()[idx] as f64,
                    doi: 0.0,
                    phantom: false,
                };
                if hi - lo >= TWIN_SPREAD_DEG {
                    cois.push(Coi { doi: lo, ..base });
                    cois.push(Coi { doi: hi, phantom: true, ..base });
                } else {
                    cois.push(Coi { doi: model.doi_of_point(pos)?, ..base });
                }
                count += 1;
            }
            axes.push(axis);
        }
        if count == 0 {
            return Err(Error::NoCandidates(d));
        }
        axes_all.push(axes);
    }
    let max = |g: fn(&Coi) -> f64| cois.iter().map(g).fold(f64::NEG_INFINITY, f64::max);
    let (i_max, ib_max, iv_max) = (max(|c| c.intensity), max(|c| c.blob), max(|c| c.vessel));
    Ok(CoiSet { esd, cois, axes: axes_all, i_max, ib_max, iv_max })
}
