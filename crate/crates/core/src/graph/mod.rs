//! Graph-path localizer: candidate points on region medial axes, a beam
//! search for the best fixed-length path, then local grid refinement.

mod features;
mod refine;
mod search;

pub use features::{
    blob_scales, generate_cois, CoiSet, GpFeatures, BLOB_S2, BLOB_S3, COI_VESSEL_SCALE, TWIN_SPREAD_DEG,
    UPSAMPLED_SPACING,
};
pub use refine::{grid_offsets, refine_path};
pub use search::{CandidatePath, SearchContext, SEED_PENALTY};

use crate::array::ArrayModel;
use crate::cochlea::CochleaModel;
use crate::error::{Result, Stage, StageExt};
use crate::filters::gaussian_blur;
use crate::geom::Vec3;
use crate::params::GpParams;
use crate::result::LocalizationResult;
use crate::volume::{BoundingBox, Volume3};

/// A candidate contact location on a region's medial axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coi {
    pub pos: Vec3,
    /// Region id within the spacing group.
    pub roi: usize,
    /// Position along the region's medial axis.
    pub k: usize,
    /// Spacing group index.
    pub group: usize,
    pub intensity: f64,
    pub blob: f64,
    pub vessel: f64,
    /// Depth of insertion in degrees.
    pub doi: f64,
    /// True for the second copy of a point straddling two turns.
    pub phantom: bool,
}

impl Coi {
    /// Region identity `(group, roi)`.
    pub fn region(&self) -> (usize, usize) {
        (self.group, self.roi)
    }

    /// Twins share a site and may not both appear on one path.
    pub fn same_site(&self, other: &Coi) -> bool {
        self.group == other.group && self.roi == other.roi && self.k == other.k
    }
}

/// Cropped, upsampled inputs and candidate sets for one volume and array.
///
/// Depends on `alpha_i`, `alpha_b`, `alpha_b_seed` and the spacing weights;
/// the search and refinement parameters can vary freely across [`run_gp`] calls.
#[derive(Debug, Clone)]
pub struct GpPrepared {
    pub array: ArrayModel,
    pub features: GpFeatures,
    pub cois: CoiSet,
    /// `G_sigma * I` on the upsampled VOI.
    pub smoothed: Volume3,
}

#[derive(Debug, Clone)]
pub struct GpOutput {
    /// Refined contacts, apical-first.
    pub result: LocalizationResult,
    /// Coarse path positions, apical-first.
    pub coarse: LocalizationResult,
    /// Candidate ids of the coarse path, basal-first.
    pub path: CandidatePath,
    pub refined_cost: f64,
}

pub fn prepare_gp(
    volume: &Volume3,
    bbox: &BoundingBox,
    array: &ArrayModel,
    model: &CochleaModel,
    p: &GpParams,
) -> Result<GpPrepared> {
    p.validate()?;
    let voi = volume.crop(bbox).stage(Stage::Crop)?;
    let up = voi
        .resample_trilinear([UPSAMPLED_SPACING; 3])
        .stage(Stage::Crop)?;
    let features = GpFeatures::compute(&up, p).stage(Stage::Features)?;
    let smoothed = gaussian_blur(&up, p.sigma).stage(Stage::Features)?;
    let twin_h = voi.spacing().iter().cloned().fold(0.0, f64::max);
    let cois = generate_cois(&features, array, model, p, twin_h).stage(Stage::Candidates)?;
    Ok(GpPrepared { array: array.clone(), features, cois, smoothed })
}

pub fn run_gp(prep: &GpPrepared, model: &CochleaModel, p: &GpParams) -> Result<GpOutput> {
    p.validate()?;
    let ctx = SearchContext::new(&prep.cois, &prep.array, p, prep.features.t_b_seed);
    let path = ctx.beam_search(p.eta_max).stage(Stage::CoarseSearch)?;
    let coarse: Vec<Vec3> = path.nodes.iter().map(|&c| prep.cois.cois[c].pos).collect();
    let (refined, refined_cost) = refine_path(&coarse, &ctx.spacings, &prep.smoothed, &prep.features.blob, p);
    Ok(GpOutput {
        result: to_result(&prep.array, model, refined),
        coarse: to_result(&prep.array, model, coarse),
        path,
        refined_cost,
    })
}

/// Full pipeline: crop, features, candidates, coarse search, refinement.
pub fn localize_gp(
    volume: &Volume3,
    bbox: &BoundingBox,
    array: &ArrayModel,
    model: &CochleaModel,
    p: &GpParams,
) -> Result<GpOutput> {
    let prep = prepare_gp(volume, bbox, array, model, p)?;
    run_gp(&prep, model, p)
}

fn to_result(array: &ArrayModel, model: &CochleaModel, mut basal_first: Vec<Vec3>) -> LocalizationResult {
    basal_first.reverse();
    let doi = basal_first.iter().map(|c| model.doi_of_point(c).unwrap_or(f64::NAN)).collect();
    LocalizationResult::new(&array.name, basal_first, Some(doi))
}
