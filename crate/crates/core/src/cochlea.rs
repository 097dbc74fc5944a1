//! Parametric spiral cochlea: depth of insertion, modiolar distance, basilar
//! membrane signed distance, and place frequency.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{vec3, Vec3};

/// Greenwood constants for the human cochlea.
pub const GREENWOOD_A: f64 = 165.4;
pub const GREENWOOD_ALPHA: f64 = 2.1;
pub const GREENWOOD_K: f64 = 0.88;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CochleaParams {
    /// Point on the modiolar axis at the height of the 0 degree reference.
    pub center: [f64; 3],
    /// Modiolar axis direction, pointing from base toward apex.
    pub axis: [f64; 3],
    /// Direction of the 0 degree (round-window) reference; projected onto the
    /// plane orthogonal to `axis`.
    pub reference: [f64; 3],
    pub base_radius: f64,
    pub apex_radius: f64,
    /// Total spiral angle in degrees.
    pub total_angle: f64,
    /// Axial rise per turn (mm).
    pub pitch: f64,
    /// Radial inset of the modiolar surface from the spiral path (mm).
    pub modiolar_inset: f64,
    /// Half-height of the modiolar surface band around the path (mm).
    pub modiolar_half_height: f64,
    /// Height of the basilar membrane above the spiral path (mm).
    pub membrane_height: f64,
    /// Radial half-width of the basilar membrane patch (mm).
    pub membrane_half_width: f64,
    /// Angular sampling of the surfaces (degrees).
    pub angle_step: f64,
}

impl Default for CochleaParams {
    fn default() -> Self {
        CochleaParams {
            center: [0.0; 3],
            axis: [0.0, 0.0, 1.0],
            reference: [1.0, 0.0, 0.0],
            base_radius: 4.5,
            apex_radius: 1.5,
            total_angle: 900.0,
            pitch: 0.7,
            modiolar_inset: 0.6,
            modiolar_half_height: 0.4,
            membrane_height: 0.4,
            membrane_half_width: 0.5,
            angle_step: 1.0,
        }
    }
}

/// Sample of the frequency-mapped modiolar surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModiolarVertex {
    pub position: Vec3,
    pub normal: Vec3,
    pub doi: f64,
    pub frequency: f64,
}

#[derive(Debug, Clone)]
pub struct CochleaModel {
    params: CochleaParams,
    center: Vec3,
    axis: Vec3,
    e0: Vec3,
    e1: Vec3,
    decay: f64,
    modiolus: Vec<ModiolarVertex>,
    membrane: Vec<Vec3>,
}

impl PartialEq for CochleaModel {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
    }
}

impl CochleaModel {
    pub fn new(params: CochleaParams) -> Result<Self> {
        let p = &params;
        if !(p.total_angle > 0.0 && p.total_angle <= 900.0) {
            return Err(Error::InvalidArgument(format!("total angle must be in (0, 900], got {}", p.total_angle)));
        }
        if !(p.base_radius > p.apex_radius && p.apex_radius > 0.0) {
            return Err(Error::InvalidArgument("spiral radius must decrease from base to apex".into()));
        }
        if !(p.pitch >= 0.0 && p.angle_step > 0.0 && p.modiolar_inset >= 0.0 && p.modiolar_inset < p.apex_radius) {
            return Err(Error::InvalidArgument("invalid pitch, sampling step, or modiolar inset".into()));
        }
        let axis = vec3(p.axis[0], p.axis[1], p.axis[2]);
        let r = vec3(p.reference[0], p.reference[1], p.reference[2]);
        if axis.norm() == 0.0 {
            return Err(Error::InvalidArgument("axis must be nonzero".into()));
        }
        let axis = axis.normalize();
        let e0 = r - axis * r.dot(&axis);
        if e0.norm() < 1e-9 {
            return Err(Error::InvalidArgument("reference direction is parallel to the axis".into()));
        }
        let e0 = e0.normalize();
        let e1 = axis.cross(&e0);
        let decay = (p.base_radius / p.apex_radius).ln() / p.total_angle.to_radians();
        let mut m = CochleaModel {
            params: params.clone(),
            center: vec3(p.center[0], p.center[1], p.center[2]),
            axis,
            e0,
            e1,
            decay,
            modiolus: Vec::new(),
            membrane: Vec::new(),
        };
        m.build_surfaces();
        Ok(m)
    }

    pub fn params(&self) -> &CochleaParams {
        &self.params
    }
    pub fn total_angle(&self) -> f64 {
        self.params.total_angle
    }
    pub fn center(&self) -> Vec3 {
        self.center
    }
    pub fn axis(&self) -> Vec3 {
        self.axis
    }
    pub fn modiolar_vertices(&self) -> &[ModiolarVertex] {
        &self.modiolus
    }
    pub fn membrane_points(&self) -> &[Vec3] {
        &self.membrane
    }

    /// Path radius at angle `theta` (degrees); defined for any angle.
    pub fn radius(&self, theta: f64) -> f64 {
        self.params.base_radius * (-self.decay * theta.to_radians()).exp()
    }

    /// Path height along the axis at angle `theta` (degrees).
    pub fn height(&self, theta: f64) -> f64 {
        self.params.pitch * theta / 360.0
    }

    /// Unit radial direction at angle `theta`.
    pub fn radial(&self, theta: f64) -> Vec3 {
        let t = theta.to_radians();
        self.e0 * t.cos() + self.e1 * t.sin()
    }

    /// Point at angle `theta` with a radial offset from the spiral path.
    pub fn point_at(&self, theta: f64, radial_offset: f64) -> Vec3 {
        self.center + self.radial(theta) * (self.radius(theta) + radial_offset) + self.axis * self.height(theta)
    }

    pub fn path_point(&self, theta: f64) -> Vec3 {
        self.point_at(theta, 0.0)
    }

    /// Unit tangent of the offset path in the direction of increasing angle.
    pub fn tangent(&self, theta: f64, radial_offset: f64) -> Vec3 {
        let h = 1e-4;
        (self.point_at(theta + h, radial_offset) - self.point_at(theta - h, radial_offset)).normalize()
    }

    fn build_surfaces(&mut self) {
        let p = self.params.clone();
        let steps = (p.total_angle / p.angle_step).round().max(1.0) as usize;
        let heights = 9;
        let radial = 11;
        for s in 0..=steps {
            let theta = p.total_angle * s as f64 / steps as f64;
            let dir = self.radial(theta);
            let rm = self.radius(theta) - p.modiolar_inset;
            let freq = self.place_frequency(theta).unwrap_or(f64::NAN);
            for h in 0..heights {
                let dz = p.modiolar_half_height * (2.0 * h as f64 / (heights - 1) as f64 - 1.0);
                self.modiolus.push(ModiolarVertex {
                    position: self.center + dir * rm + self.axis * (self.height(theta) + dz),
                    normal: dir,
                    doi: theta,
                    frequency: freq,
                });
            }
            for w in 0..radial {
                let dr = p.membrane_half_width * (2.0 * w as f64 / (radial - 1) as f64 - 1.0);
                self.membrane.push(
                    self.center + dir * (self.radius(theta) + dr) + self.axis * (self.height(theta) + p.membrane_height),
                );
            }
        }
    }

    /// Cylindrical coordinates `(rho, azimuth in [0, 360), height)` about the axis.
    pub fn cylindrical(&self, p: &Vec3) -> (f64, f64, f64) {
        let rel = p - self.center;
        let z = rel.dot(&self.axis);
        let x = rel.dot(&self.e0);
        let y = rel.dot(&self.e1);
        let mut phi = y.atan2(x).to_degrees();
        if phi < 0.0 {
            phi += 360.0;
        }
        ((x * x + y * y).sqrt(), phi, z)
    }

    /// Unwrapped angular depth of `p`, choosing the spiral branch nearest in
    /// the (radius, height) half-plane; clamped to `[0, total_angle]`.
    pub fn doi_of_point(&self, p: &Vec3) -> Result<f64> {
        let (rho, phi, z) = self.cylindrical(p);
        if rho > 2.0 * self.params.base_radius {
            return Err(Error::OutsideModel(format!("{:.3} mm from the modiolar axis", rho)));
        }
        let mut best = (f64::INFINITY, 0.0);
        for k in -1..=3 {
            let theta = phi + 360.0 * k as f64;
            let d = (rho - self.radius(theta)).powi(2) + (z - self.height(theta)).powi(2);
            if d < best.0 {
                best = (d, theta);
            }
        }
        Ok(best.1.clamp(0.0, self.params.total_angle))
    }

    /// Min and max DOI over the lattice `p + h * {-1, 0, 1}^3`.
    pub fn doi_neighborhood(&self, p: &Vec3, h: f64) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for a in -1..=1 {
            for b in -1..=1 {
                for c in -1..=1 {
                    let q = p + vec3(a as f64, b as f64, c as f64) * h;
                    let d = self.doi_of_point(&q)?;
                    lo = lo.min(d);
                    hi = hi.max(d);
                }
            }
        }
        Ok((lo, hi))
    }

    fn nearest_modiolar(&self, p: &Vec3) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, v) in self.modiolus.iter().enumerate() {
            let d = (v.position - p).norm_squared();
            if d < best.1 {
                best = (i, d);
            }
        }
        (best.0, best.1.sqrt())
    }

    /// Distance from `p` to the nearest modiolar surface vertex.
    pub fn modiolar_distance(&self, p: &Vec3) -> f64 {
        self.nearest_modiolar(p).1
    }

    /// Nearest modiolar surface vertex.
    pub fn nearest_modiolar_vertex(&self, p: &Vec3) -> &ModiolarVertex {
        &self.modiolus[self.nearest_modiolar(p).0]
    }

    /// Distance to the basilar membrane, positive on the scala vestibuli side.
    pub fn basilar_signed_distance(&self, p: &Vec3) -> f64 {
        let mut best = (Vec3::zeros(), f64::INFINITY);
        for q in &self.membrane {
            let d = (q - p).norm_squared();
            if d < best.1 {
                best = (*q, d);
            }
        }
        let side = (p - best.0).dot(&self.axis);
        let d = best.1.sqrt();
        if side < 0.0 {
            -d
        } else {
            d
        }
    }

    /// Greenwood place frequency (Hz) at angular depth `doi` (degrees).
    pub fn place_frequency(&self, doi: f64) -> Result<f64> {
        greenwood(doi, self.params.total_angle)
    }

    /// Place frequencies at the apex and base ends, lowest first.
    pub fn frequency_range(&self) -> (f64, f64) {
        let t = self.params.total_angle;
        (greenwood(t, t).unwrap(), greenwood(0.0, t).unwrap())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.params).expect("cochlea parameters serialize")
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let params: CochleaParams = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        CochleaModel::new(params)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// `F = A (10^(a x) - k)` with `x = 1 - doi / total` the fraction of length from the apex.
pub fn greenwood(doi: f64, total: f64) -> Result<f64> {
    if !(doi >= -1e-9 && doi <= total + 1e-9) {
        return Err(Error::InvalidArgument(format!("DOI {doi} outside [0, {total}]")));
    }
    let x = 1.0 - doi.clamp(0.0, total) / total;
    Ok(GREENWOOD_A * (10f64.powf(GREENWOOD_ALPHA * x) - GREENWOOD_K))
}
