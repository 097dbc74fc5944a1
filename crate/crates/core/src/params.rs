//! Algorithm parameters with published defaults and `key = value` overrides.

use crate::error::{Error, Result};

macro_rules! param_struct {
    ($(#[$meta:meta])* $name:ident { $($(#[$fmeta:meta])* $field:ident : $ty:ty = $default:expr),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            $($(#[$fmeta])* pub $field: $ty,)+
        }

        impl Default for $name {
            fn default() -> Self {
                $name { $($field: $default,)+ }
            }
        }

        impl $name {
            pub const KEYS: &'static [&'static str] = &[$(stringify!($field)),+];

            /// Sets one parameter by name.
            pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
                match key {
                    $(stringify!($field) => {
                        self.$field = convert::<$ty>(key, value)?;
                    })+
                    _ => return Err(Error::InvalidArgument(format!(
                        "unknown parameter {key:?} for {}; known: {}", stringify!($name), Self::KEYS.join(", ")))),
                }
                self.validate()
            }

            pub fn get(&self, key: &str) -> Option<f64> {
                match key {
                    $(stringify!($field) => Some(self.$field as f64),)+
                    _ => None,
                }
            }

            /// Applies every `key = value` line of a parameter file.
            pub fn apply(&mut self, text: &str) -> Result<()> {
                for (k, v) in parse_key_values(text)? {
                    self.set(&k, v)?;
                }
                Ok(())
            }
        }
    };
}

trait FromF64: Sized {
    fn from_f64(key: &str, v: f64) -> Result<Self>;
}

impl FromF64 for f64 {
    fn from_f64(_: &str, v: f64) -> Result<Self> {
        Ok(v)
    }
}

impl FromF64 for usize {
    fn from_f64(key: &str, v: f64) -> Result<Self> {
        if v >= 0.0 && v.fract() == 0.0 && v < usize::MAX as f64 {
            Ok(v as usize)
        } else {
            Err(Error::InvalidArgument(format!("{key} must be a nonnegative integer, got {v}")))
        }
    }
}

fn convert<T: FromF64>(key: &str, v: f64) -> Result<T> {
    if !v.is_finite() {
        return Err(Error::InvalidArgument(format!("{key} must be finite")));
    }
    T::from_f64(key, v)
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", n + 1)))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: bad number {:?}", n + 1, v.trim())))?;
        out.push((k.trim().to_string(), v));
    }
    Ok(out)
}

/// Percentile over a crop of `crop_volume` mm^3 that selects as many voxels
/// as `alpha_pct` selects over a nominal VOI of `nominal_volume` mm^3 padded
/// with dark background. Crops at least as large as the nominal VOI keep `alpha_pct`.
pub fn scaled_percentile(alpha_pct: f64, nominal_volume: f64, crop_volume: f64) -> f64 {
    if nominal_volume > crop_volume && crop_volume > 0.0 {
        (alpha_pct * nominal_volume / crop_volume).min(100.0)
    } else {
        alpha_pct
    }
}

param_struct! {
    /// Graph path-finding localizer parameters.
    GpParams {
        eta_max: usize = 1200,
        /// Intensity threshold percentile (%).
        alpha_i: f64 = 0.048,
        /// Blob threshold percentile (%).
        alpha_b: f64 = 0.028,
        beta_i: f64 = 2.72,
        kappa_i: f64 = 1.82,
        beta_b: f64 = 1.14,
        kappa_b: f64 = 1.21,
        gamma1: f64 = 0.6,
        gamma2: f64 = 1.2,
        rho: f64 = 2.0,
        /// Seed blob percentile (%) below which the first contact is penalized.
        alpha_b_seed: f64 = 0.007,
        mu_d1: f64 = 10.0,
        mu_d2: f64 = 6.0,
        mu_s: f64 = 450.0,
        eta_max2: usize = 500,
        phi_q: f64 = 0.03,
        phi_r: usize = 3,
        sigma: f64 = 0.275,
        phi_i: f64 = 32.0,
        phi_b: f64 = 16.0,
        phi_d1: f64 = 0.6,
        phi_d2: f64 = 2.5,
        /// Nominal VOI volume (mm^3) the percentiles refer to; 0 uses the crop as is.
        voi_volume: f64 = 20000.0,
    }
}

impl GpParams {
    pub fn validate(&self) -> Result<()> {
        let reals = [
            self.alpha_i, self.alpha_b, self.beta_i, self.kappa_i, self.beta_b, self.kappa_b, self.gamma1,
            self.gamma2, self.rho, self.alpha_b_seed, self.mu_d1, self.mu_d2, self.mu_s, self.phi_q, self.sigma,
            self.phi_i, self.phi_b, self.phi_d1, self.phi_d2, self.voi_volume,
        ];
        if reals.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument("GP parameters must be nonnegative".into()));
        }
        if self.eta_max == 0 || self.eta_max2 == 0 || self.phi_r == 0 {
            return Err(Error::InvalidArgument("eta_max, eta_max2 and phi_r must be positive".into()));
        }
        Ok(())
    }

    /// Intensity weight for spacing `d`.
    pub fn lambda_i(&self, d: f64) -> f64 {
        (self.beta_i - self.kappa_i * d).max(0.0)
    }

    /// Blob weight for spacing `d`.
    pub fn lambda_b(&self, d: f64) -> f64 {
        (self.kappa_b * d - self.beta_b).max(0.0)
    }

    /// Candidates per contact in the refinement grid.
    pub fn refinement_grid_size(&self) -> usize {
        (2 * self.phi_r + 1).pow(3)
    }
}

param_struct! {
    /// Centerline localizer parameters.
    ClParams {
        alpha_i: f64 = 0.06,
        alpha_v: f64 = 0.06,
        rho: f64 = 0.29,
        mu1: f64 = 1.47,
        mu2: f64 = 8.89,
        mu3: f64 = 0.27,
        mu4: f64 = 0.90,
        mu5: f64 = 1.78,
        /// Nominal VOI volume (mm^3) the percentiles refer to; 0 uses the crop as is.
        voi_volume: f64 = 20000.0,
    }
}

impl ClParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.alpha_i, self.alpha_v, self.rho, self.mu1, self.mu2, self.mu3, self.mu4, self.mu5, self.voi_volume,
        ];
        if all.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument("CL parameters must be nonnegative".into()));
        }
        if !(self.mu4 > 0.0 && self.mu4 <= 1.0) {
            return Err(Error::InvalidArgument("mu4 must be in (0, 1]".into()));
        }
        Ok(())
    }
}

param_struct! {
    /// Snake localizer parameters.
    SnakeParams {
        /// Tension weight.
        rho1: f64 = 0.03,
        /// Rigidity weight.
        rho2: f64 = 0.08,
        max_iterations: usize = 100,
        /// Convergence threshold on the largest point displacement (mm).
        tolerance: f64 = 1e-3,
        time_step: f64 = 0.1,
        /// Point spacing of the evolving curve (mm).
        point_spacing: f64 = 0.1,
        /// Iterations between arc-length resamplings.
        resample_every: usize = 10,
        /// External energy weight.
        external_weight: f64 = 1.0,
        /// Endpoint filter radius (mm).
        endpoint_radius: f64 = 0.3,
        /// Endpoint filter foreground weight.
        rho3: f64 = 0.97,
    }
}

impl SnakeParams {
    pub fn validate(&self) -> Result<()> {
        if self.rho1 < 0.0 || self.rho2 < 0.0 || self.external_weight < 0.0 {
            return Err(Error::InvalidArgument("snake weights must be nonnegative".into()));
        }
        if self.max_iterations == 0 || self.resample_every == 0 {
            return Err(Error::InvalidArgument("iteration counts must be positive".into()));
        }
        if !(self.time_step > 0.0 && self.point_spacing > 0.0 && self.tolerance > 0.0 && self.endpoint_radius > 0.0) {
            return Err(Error::InvalidArgument("time step, spacing, tolerance and radius must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.rho3) {
            return Err(Error::InvalidArgument("rho3 must be in [0, 1]".into()));
        }
        Ok(())
    }
}
