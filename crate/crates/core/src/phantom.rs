//! Synthetic post-implantation CT volumes with exact ground truth.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::ArrayModel;
use crate::cochlea::{CochleaModel, CochleaParams};
use crate::error::{Error, Result};
use crate::geom::{orthonormal_basis, point_segment_distance, vec3, Vec3};
use crate::result::LocalizationResult;
use crate::volume::{BoundingBox, Volume3};

/// Margin between the contacts and the localization box (mm).
pub const BBOX_MARGIN: f64 = 1.5;
/// Margin between the contacts and the rendered volume (mm).
pub const VOLUME_MARGIN: f64 = 4.0;
/// Confounders keep at least this distance from the array and lead (mm).
pub const CONFOUNDER_CLEARANCE: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HuMode {
    /// Metal keeps its full intensity.
    Extended,
    /// Intensities are clamped at the bone level.
    Limited,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub cochlea: CochleaParams,
    pub array: ArrayModel,
    /// Angular depth of the apical contact (degrees).
    pub insertion_depth: f64,
    /// Radial offset of the contacts from the spiral path (mm, positive lateral).
    pub lateral_offset: f64,
    pub contact_intensity: f64,
    pub bone_intensity: f64,
    /// Relative intensity of inactive basal marker contacts.
    pub inactive_scale: f64,
    pub streak_amplitude: f64,
    pub noise_sigma: f64,
    pub mode: HuMode,
    pub spacing: f64,
    pub confounders: usize,
    /// Fraction of confounders with metal-like rather than bone-like intensity.
    pub metal_fraction: f64,
    pub bone_shell: bool,
    /// Solid bone outside the scala instead of a thin shell.
    pub bone_fill: bool,
    /// Length of the lead wire leaving the basal contact (mm); 0 disables it.
    pub lead_length: f64,
    pub seed: u64,
}

impl PhantomSpec {
    /// Moderate-noise defaults for `array`, with the basal contact near 60 degrees.
    pub fn new(array: ArrayModel) -> Self {
        let cochlea = CochleaParams::default();
        let insertion_depth = default_insertion_depth(&cochlea, &array);
        PhantomSpec {
            cochlea,
            array,
            insertion_depth,
            lateral_offset: 0.2,
            contact_intensity: 8000.0,
            bone_intensity: 1500.0,
            inactive_scale: 1.0,
            streak_amplitude: 300.0,
            noise_sigma: 150.0,
            mode: HuMode::Extended,
            spacing: 0.3,
            confounders: 24,
            metal_fraction: 2.0 / 3.0,
            bone_shell: true,
            bone_fill: false,
            lead_length: 4.0,
            seed: 0,
        }
    }

    /// Noise-free, artifact-free variant.
    pub fn clean(array: ArrayModel) -> Self {
        PhantomSpec { streak_amplitude: 0.0, noise_sigma: 0.0, confounders: 0, ..PhantomSpec::new(array) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0) {
            return Err(Error::InvalidArgument("phantom spacing must be positive".into()));
        }
        if !(self.insertion_depth > 0.0 && self.insertion_depth <= self.cochlea.total_angle) {
            return Err(Error::InvalidArgument(format!(
                "insertion depth {} outside the spiral (0, {}]",
                self.insertion_depth, self.cochlea.total_angle
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.contact_intensity > 0.0 && self.bone_intensity >= 0.0) {
            return Err(Error::InvalidArgument("phantom intensities must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Depth that places the basal contact near 60 degrees.
fn default_insertion_depth(cochlea: &CochleaParams, array: &ArrayModel) -> f64 {
    let Ok(model) = CochleaModel::new(cochlea.clone()) else {
        return cochlea.total_angle / 2.0;
    };
    let target = array.straight_length() * 1.05;
    let mut theta = 60.0;
    let mut len = 0.0;
    while len < target && theta < cochlea.total_angle {
        len += (model.point_at(theta + 0.5, 0.2) - model.point_at(theta, 0.2)).norm();
        theta += 0.5;
    }
    theta.min(cochlea.total_angle).round()
}

#[derive(Debug, Clone)]
pub struct PhantomCase {
    pub volume: Volume3,
    pub model: CochleaModel,
    pub truth: LocalizationResult,
    pub bbox: BoundingBox,
    pub spec: PhantomSpec,
}

/// Contact angles, apical-first, with chord distances matching the array spacings.
pub fn place_contacts(model: &CochleaModel, array: &ArrayModel, depth: f64, offset: f64) -> Result<Vec<f64>> {
    let mut thetas = vec![depth];
    let step = 0.25;
    for &d in &array.spacings {
        let t0 = *thetas.last().unwrap();
        let p0 = model.point_at(t0, offset);
        let chord = |t: f64| (model.point_at(t, offset) - p0).norm();
        let mut hi = t0;
        let mut lo = t0 - step;
        while chord(lo) < d {
            hi = lo;
            lo -= step;
            if lo < -step {
                return Err(Error::InvalidArgument(format!(
                    "insertion depth {depth} too shallow for a {:.1} mm array",
                    array.straight_length()
                )));
            }
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if chord(mid) < d {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        if t < 0.0 {
            return Err(Error::InvalidArgument(format!("insertion depth {depth} places contacts before the base")));
        }
        thetas.push(t);
    }
    Ok(thetas)
}

struct Field<'a> {
    vol: &'a Volume3,
    acc: Vec<f64>,
}

impl<'a> Field<'a> {
    fn new(vol: &'a Volume3) -> Self {
        Field { vol, acc: vec![0.0; vol.len()] }
    }

    /// Visits voxels whose centers lie in the box `[lo, hi]`.
    fn visit(&mut self, lo: Vec3, hi: Vec3, mut f: impl FnMut(Vec3) -> f64) {
        let a = self.vol.world_to_voxel(&lo);
        let b = self.vol.world_to_voxel(&hi);
        let dims = self.vol.dims();
        let range = |ax: usize| {
            let s = a[ax].min(b[ax]).ceil().max(0.0);
            let e = a[ax].max(b[ax]).floor().min(dims[ax] as f64 - 1.0);
            (s as usize, e as i64)
        };
        let (x0, x1) = range(0);
        let (y0, y1) = range(1);
        let (z0, z1) = range(2);
        for k in z0 as i64..=z1 {
            for j in y0 as i64..=y1 {
                for i in x0 as i64..=x1 {
                    let idx = self.vol.index(i as usize, j as usize, k as usize);
                    self.acc[idx] += f(self.vol.voxel_to_world([i as f64, j as f64, k as f64]));
                }
            }
        }
    }

    fn gaussian(&mut self, c: Vec3, sigma: f64, amp: f64) {
        let r = Vec3::repeat(4.0 * sigma);
        let s2 = 2.0 * sigma * sigma;
        self.visit(c - r, c + r, |p| amp * (-(p - c).norm_squared() / s2).exp());
    }

    fn segment(&mut self, a: Vec3, b: Vec3, sigma: f64, amp: f64) {
        let r = Vec3::repeat(4.0 * sigma);
        let s2 = 2.0 * sigma * sigma;
        self.visit(a.inf(&b) - r, a.sup(&b) + r, |p| {
            let d = point_segment_distance(&p, &a, &b);
            amp * (-d * d / s2).exp()
        });
    }
}

/// Analytic contact field: Gaussian blobs with sigma equal to the contact radius.
pub fn contact_field(spec: &PhantomSpec, contacts: &[Vec3], p: &Vec3) -> f64 {
    let n = contacts.len();
    contacts
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let s = spec.array.contact_radius(i);
            contact_amplitude(spec, i, n) * (-(p - c).norm_squared() / (2.0 * s * s)).exp()
        })
        .sum()
}

fn contact_amplitude(spec: &PhantomSpec, i: usize, n: usize) -> f64 {
    if i + spec.array.inactive_basal >= n {
        spec.contact_intensity * spec.inactive_scale
    } else {
        spec.contact_intensity
    }
}

pub fn synth_case(spec: &PhantomSpec) -> Result<PhantomCase> {
    spec.validate()?;
    let model = CochleaModel::new(spec.cochlea.clone())?;
    let thetas = place_contacts(&model, &spec.array, spec.insertion_depth, spec.lateral_offset)?;
    let contacts: Vec<Vec3> = thetas.iter().map(|&t| model.point_at(t, spec.lateral_offset)).collect();
    let n = contacts.len();
    let bbox = BoundingBox::around(&contacts, BBOX_MARGIN)?;

    let outer = BoundingBox::around(&contacts, VOLUME_MARGIN)?;
    let h = spec.spacing;
    let origin = outer.min.map(|v| (v / h).floor() * h);
    let dims = [0, 1, 2].map(|a| ((outer.max[a] - origin[a]) / h).ceil() as usize + 1);
    let grid = Volume3::filled(dims, [h; 3], [origin.x, origin.y, origin.z], 0.0)?;
    let mut field = Field::new(&grid);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    if spec.bone_shell {
        bone_shell(&mut field, &model, spec.bone_intensity, spec.bone_fill);
    }
    for (i, c) in contacts.iter().enumerate() {
        field.gaussian(*c, spec.array.contact_radius(i), contact_amplitude(spec, i, n));
    }
    if spec.streak_amplitude > 0.0 {
        for w in contacts.windows(2) {
            field.segment(w[0], w[1], 0.12, spec.streak_amplitude);
        }
    }
    let mut lead = Vec::new();
    if spec.lead_length > 0.0 {
        let basal = contacts[n - 1];
        let dir = -model.tangent(thetas[n - 1], spec.lateral_offset);
        let start = basal + dir * (spec.array.spacings[n - 2].min(1.0) * 0.7 + spec.array.contact_radius(n - 1));
        let end = start + dir * spec.lead_length;
        field.segment(start, end, 0.15, 0.5 * spec.contact_intensity);
        lead = vec![start, end];
    }
    let mut placed = 0;
    let mut tries = 0;
    while placed < spec.confounders && tries < 100 * spec.confounders.max(1) {
        tries += 1;
        let p = vec3(
            rng.random_range(outer.min.x..outer.max.x),
            rng.random_range(outer.min.y..outer.max.y),
            rng.random_range(outer.min.z..outer.max.z),
        );
        let bone_like = !rng.random_bool(spec.metal_fraction.clamp(0.0, 1.0));
        let amp = if bone_like {
            spec.bone_intensity * rng.random_range(1.0..2.0)
        } else {
            spec.contact_intensity * rng.random_range(0.25..0.6)
        };
        let sigma = rng.random_range(0.15..0.35);
        let near_array = contacts.windows(2).any(|w| point_segment_distance(&p, &w[0], &w[1]) < CONFOUNDER_CLEARANCE)
            || contacts.iter().any(|c| (p - c).norm() < CONFOUNDER_CLEARANCE)
            || (lead.len() == 2 && point_segment_distance(&p, &lead[0], &lead[1]) < CONFOUNDER_CLEARANCE);
        if near_array {
            continue;
        }
        field.gaussian(p, sigma, amp);
        placed += 1;
    }

    let mut data: Vec<f32> = field.acc.iter().map(|&v| v as f32).collect();
    if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        for v in data.iter_mut() {
            *v += normal.sample(&mut rng) as f32;
        }
    }
    if spec.mode == HuMode::Limited {
        let cap = spec.bone_intensity as f32;
        for v in data.iter_mut() {
            *v = v.min(cap);
        }
    }
    let volume = grid.with_data(data)?;
    let truth = LocalizationResult::new(&spec.array.name, contacts, Some(thetas));
    Ok(PhantomCase { volume, model, truth, bbox, spec: spec.clone() })
}

/// Bone wall around the scala: a thin shell about the spiral path, or with
/// `fill` solid bone everywhere beyond the shell's peak.
fn bone_shell(field: &mut Field<'_>, model: &CochleaModel, bone: f64, fill: bool) {
    let total = model.total_angle();
    let (radius, width) = (0.9, 0.12);
    let vol = field.vol;
    let values: Vec<f64> = (0..vol.len())
        .into_par_iter()
        .map(|idx| {
            let p = vol.index_to_world(idx);
            let (rho, phi, z) = model.cylindrical(&p);
            let mut best = f64::INFINITY;
            for k in -1..=3 {
                let theta = (phi + 360.0 * k as f64).clamp(0.0, total);
                let d = ((rho - model.radius(theta)).powi(2) + (z - model.height(theta)).powi(2)).sqrt();
                best = best.min(d);
            }
            if fill && best >= radius {
                bone
            } else {
                bone * (-(best - radius).powi(2) / (2.0 * width * width)).exp()
            }
        })
        .collect();
    for (a, v) in field.acc.iter_mut().zip(values) {
        *a += v;
    }
}

/// Jittered cases: insertion depth, lateral offset, head pose, and noise draws.
pub fn synth_suite(base: &PhantomSpec, n: usize, seed: u64) -> Result<Vec<PhantomCase>> {
    if n == 0 {
        return Err(Error::InvalidArgument("a suite needs at least one case".into()));
    }
    suite_specs(base, n, seed).par_iter().map(synth_case).collect()
}

/// The per-case specs [`synth_suite`] renders.
pub fn suite_specs(base: &PhantomSpec, n: usize, seed: u64) -> Vec<PhantomSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut s = base.clone();
            s.seed = rng.next_u64();
            s.insertion_depth = (base.insertion_depth + rng.random_range(-30.0..30.0)).min(base.cochlea.total_angle);
            s.lateral_offset = base.lateral_offset + rng.random_range(-0.1..0.1);
            let axis = vec3(base.cochlea.axis[0], base.cochlea.axis[1], base.cochlea.axis[2]).normalize();
            let (u, v) = orthonormal_basis(&axis);
            let tilt = rng.random_range(0.0..20f64).to_radians();
            let az = rng.random_range(0.0..360f64).to_radians();
            let a = axis * tilt.cos() + (u * az.cos() + v * az.sin()) * tilt.sin();
            s.cochlea.axis = [a.x, a.y, a.z];
            let spin = rng.random_range(0.0..360f64).to_radians();
            let r = u * spin.cos() + v * spin.sin();
            s.cochlea.reference = [r.x, r.y, r.z];
            let shift = [0, 1, 2].map(|_| rng.random_range(0.0..base.spacing));
            s.cochlea.center = [0, 1, 2].map(|i| base.cochlea.center[i] + shift[i]);
            s
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    case: String,
    seed: u64,
    array: String,
    insertion_depth: f64,
    lateral_offset: f64,
    noise_sigma: f64,
    streak_amplitude: f64,
    confounders: usize,
    spacing: f64,
    mode: HuMode,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    cases: Vec<ManifestEntry>,
}

/// File prefix of case `k` inside a suite directory.
pub fn case_prefix(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("case_{k}"))
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

impl PhantomCase {
    /// Writes `<prefix>.vvol`, `.model`, `.truth.csv` and `.bbox`.
    pub fn save(&self, prefix: &Path) -> Result<()> {
        self.volume.save(with_ext(prefix, ".vvol"))?;
        self.model.save(with_ext(prefix, ".model"))?;
        self.truth.save(with_ext(prefix, ".truth.csv"))?;
        fs::write(with_ext(prefix, ".bbox"), self.bbox.to_text())?;
        Ok(())
    }
}

/// Files of a saved case; the array name is needed to read the truth.
pub struct CaseFiles {
    pub volume: Volume3,
    pub model: CochleaModel,
    pub bbox: BoundingBox,
    pub truth: Option<LocalizationResult>,
}

pub fn load_case(prefix: &Path, array: &str) -> Result<CaseFiles> {
    let volume = Volume3::load(with_ext(prefix, ".vvol"))?;
    let model = CochleaModel::load(with_ext(prefix, ".model"))?;
    let bbox = BoundingBox::from_text(&fs::read_to_string(with_ext(prefix, ".bbox"))?)?;
    let truth_path = with_ext(prefix, ".truth.csv");
    let truth = if truth_path.exists() { Some(LocalizationResult::load(truth_path, array)?) } else { None };
    Ok(CaseFiles { volume, model, bbox, truth })
}

/// Saves every case plus a `manifest.toml` listing seeds and specs.
pub fn save_suite(dir: &Path, cases: &[PhantomCase]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for (k, c) in cases.iter().enumerate() {
        c.save(&case_prefix(dir, k))?;
        let s = &c.spec;
        entries.push(ManifestEntry {
            case: format!("case_{k}"),
            seed: s.seed,
            array: s.array.name.clone(),
            insertion_depth: s.insertion_depth,
            lateral_offset: s.lateral_offset,
            noise_sigma: s.noise_sigma,
            streak_amplitude: s.streak_amplitude,
            confounders: s.confounders,
            spacing: s.spacing,
            mode: s.mode,
        });
    }
    let text = toml::to_string(&Manifest { cases: entries }).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(dir.join("manifest.toml"), text)?;
    Ok(())
}

/// Array name of a saved case, read from its suite's `manifest.toml`.
pub fn case_array(prefix: &Path) -> Result<String> {
    let name = prefix
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::InvalidArgument(format!("bad case path {}", prefix.display())))?;
    let dir = prefix.parent().unwrap_or(Path::new("."));
    let text = fs::read_to_string(dir.join("manifest.toml"))?;
    let m: Manifest = toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    m.cases
        .into_iter()
        .find(|c| c.case == name)
        .map(|c| c.array)
        .ok_or_else(|| Error::InvalidArgument(format!("{name} is not listed in the suite manifest")))
}
