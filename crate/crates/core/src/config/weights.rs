//! Feature weights and their TOML file format.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::array::Family;
use crate::config::features::FeatureVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    pub family: Family,
    pub weights: [f64; 10],
    /// Constant offset of the trained cost; does not affect selection.
    pub delta: f64,
}

#[derive(Serialize, Deserialize)]
struct WeightFile {
    family: String,
    weights: Vec<f64>,
    #[serde(default)]
    delta: f64,
}

impl WeightSet {
    pub fn new(family: Family, weights: [f64; 10], delta: f64) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || !delta.is_finite() {
            return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
        }
        Ok(WeightSet { family, weights, delta })
    }

    /// Published weights per manufacturer.
    pub fn preset(family: Family) -> Self {
        let weights = match family {
            Family::MedEl => [0.68, 0.0, 3.72e-3, 0.0, 3.23e-4, 2.28, 0.0, 0.0, 0.0, 0.0],
            Family::AdvancedBionics => [0.28, 1.55e-9, 8.89e-5, 6.02e-9, 8.32e-2, 1.37, 6.75e-10, 3.58e-9, 5.07e-10, 1.18e-9],
            Family::Cochlear => [1.09, 1.62e-4, 8.95e-4, 5.09e-5, 4.89e-4, 5.43, 4.75e-5, 5.55e-5, 4.98e-5, 4.80e-5],
        };
        WeightSet { family, weights, delta: 0.0 }
    }

    /// `sum w_i f_i`.
    pub fn cost(&self, f: &FeatureVector) -> f64 {
        self.weights.iter().zip(&f.0).map(|(w, f)| w * f).sum()
    }

    /// Copy with weights of magnitude at most `tol` set to zero.
    pub fn pruned(&self, tol: f64) -> Self {
        let mut w = self.clone();
        for x in w.weights.iter_mut() {
            if x.abs() <= tol {
                *x = 0.0;
            }
        }
        w
    }

    pub fn to_toml(&self) -> String {
        let f = WeightFile { family: self.family.tag().to_string(), weights: self.weights.to_vec(), delta: self.delta };
        toml::to_string(&f).expect("weights serialize")
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let f: WeightFile = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let weights: [f64; 10] = f
            .weights
            .try_into()
            .map_err(|v: Vec<f64>| Error::Parse(format!("expected 10 weights, found {}", v.len())))?;
        WeightSet::new(f.family.parse()?, weights, f.delta)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}
